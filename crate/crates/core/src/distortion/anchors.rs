//! Published decorrelation values used to pin the model coefficients.
//!
//! Four anchor cases are available: three at 25 mm/h spanning two ranges and
//! two separations, which determine `(a1, a2, a3)` exactly, and one at
//! 50 mm/h. The 50 mm/h triple is only identifiable if `a2` and `a3` are
//! assumed not to depend on rain rate, so that assumption must be requested
//! explicitly.

use serde::Serialize;

use super::alpha::AlphaCoeffs;
use super::fit::{fit_alpha_coeffs, fit_rate_coefficient, AlphaFit, AlphaObservation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnchorCase {
    pub label: &'static str,
    pub d_over_lambda: f64,
    pub range_m: f64,
    pub rain_rate_mm_hr: f64,
    pub alpha: f64,
}

impl AnchorCase {
    pub fn observation(&self) -> AlphaObservation {
        AlphaObservation::new(self.range_m, self.d_over_lambda, self.alpha)
    }
}

pub const ANCHOR_CASES: [AnchorCase; 4] = [
    AnchorCase { label: "i", d_over_lambda: 4.0, range_m: 200.0, rain_rate_mm_hr: 25.0, alpha: 0.6470 },
    AnchorCase { label: "ii", d_over_lambda: 4.0, range_m: 400.0, rain_rate_mm_hr: 25.0, alpha: 0.6217 },
    AnchorCase { label: "iii", d_over_lambda: 8.0, range_m: 200.0, rain_rate_mm_hr: 25.0, alpha: 0.5598 },
    AnchorCase { label: "iv", d_over_lambda: 4.0, range_m: 200.0, rain_rate_mm_hr: 50.0, alpha: 0.4994 },
];

fn cases_at(rate: f64) -> Vec<AlphaObservation> {
    ANCHOR_CASES.iter().filter(|c| c.rain_rate_mm_hr == rate).map(AnchorCase::observation).collect()
}

/// Full three-coefficient fit to the 25 mm/h anchors.
pub fn fit_25mm() -> Result<AlphaFit> {
    fit_alpha_coeffs(&cases_at(25.0))
}

/// 50 mm/h coefficients with `a2`, `a3` carried over from the 25 mm/h fit.
pub fn fit_50mm_shared_shape() -> Result<AlphaFit> {
    let base = fit_25mm()?.coeffs;
    fit_rate_coefficient(&cases_at(50.0), base.a2, base.a3)
}

/// Coefficients for `rain_rate` derived from the anchors alone.
///
/// At 25 mm/h the anchors determine all three coefficients. At any other
/// anchored rate `share_shape` must be set to accept rate-independent
/// `a2`, `a3`. Rates without an anchor need explicit coefficients.
pub fn anchor_coeffs(rain_rate_mm_hr: f64, share_shape: bool) -> Result<AlphaCoeffs> {
    if rain_rate_mm_hr == 25.0 {
        return Ok(fit_25mm()?.coeffs);
    }
    let obs = cases_at(rain_rate_mm_hr);
    if obs.is_empty() {
        return Err(Error::Config(format!(
            "no anchor values at {rain_rate_mm_hr} mm/h; supply a1, a2 and a3 explicitly"
        )));
    }
    if !share_shape {
        return Err(Error::Config(format!(
            "coefficients at {rain_rate_mm_hr} mm/h are underdetermined; supply a1, a2 and a3 or enable shared a2/a3"
        )));
    }
    let base = fit_25mm()?.coeffs;
    Ok(fit_rate_coefficient(&obs, base.a2, base.a3)?.coeffs)
}
