//! Statistical model of the complex gain that rain imposes on each array element.

mod alpha;
mod covariance;
mod fit;
mod pdf;
pub mod anchors;

pub use alpha::{
    alpha_empirical, alpha_model, within_validity, AlphaCoeffs, AlphaValue, RainScenario, MAX_VALID_RANGE_M,
    VALID_SEPARATION_WAVELENGTHS,
};
pub use covariance::{build_distortion_covariance, sample_distortion, DistortionCovariance, DistortionSampler, PSD_TOLERANCE};
pub(crate) use covariance::STREAM_DISTORTION;
pub use fit::{fit_alpha_coeffs, fit_rate_coefficient, AlphaFit, AlphaObservation};
pub use pdf::{empirical_pair_pdfs, FieldPairStats, Histogram, PairPdfOptions};
