use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest range (m) for which the empirical decorrelation model was fitted.
pub const MAX_VALID_RANGE_M: f64 = 500.0;
/// Separation window, in wavelengths, of the empirical model.
pub const VALID_SEPARATION_WAVELENGTHS: (f64, f64) = (0.1, 8.0);

/// Rain-rate and frequency dependent coefficients of the decorrelation model
/// `alpha = exp(-a1 * R/(a2 R + 1) * u/(a3 u + 1))`, with `u = d / lambda0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl AlphaCoeffs {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        let c = AlphaCoeffs { a1, a2, a3 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1.is_finite() && self.a1 > 0.0) {
            return Err(Error::domain(format!("a1 must be positive, got {}", self.a1)));
        }
        if !(self.a2.is_finite() && self.a2 >= 0.0 && self.a3.is_finite() && self.a3 >= 0.0) {
            return Err(Error::domain(format!(
                "a2 and a3 must be non-negative, got a2={} a3={}",
                self.a2, self.a3
            )));
        }
        Ok(())
    }
}

/// Propagation conditions that set the strength of the rain distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainScenario {
    pub rain_rate_mm_hr: f64,
    pub range_m: f64,
    #[serde(flatten)]
    pub coeffs: AlphaCoeffs,
    pub wavelength_m: f64,
}

impl RainScenario {
    pub fn new(rain_rate_mm_hr: f64, range_m: f64, coeffs: AlphaCoeffs, wavelength_m: f64) -> Result<Self> {
        let s = RainScenario { rain_rate_mm_hr, range_m, coeffs, wavelength_m };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive("rain rate", self.rain_rate_mm_hr)?;
        positive("range", self.range_m)?;
        positive("wavelength", self.wavelength_m)?;
        self.coeffs.validate()
    }
}

/// Decorrelation parameter together with the model-validity verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaValue {
    pub value: f64,
    /// Set when the range or separation falls outside the fitted window.
    pub outside_validity: bool,
}

/// The bare empirical formula. Accepts `range_m = 0`, where it returns 1.
pub fn alpha_model(coeffs: &AlphaCoeffs, range_m: f64, d_over_lambda: f64) -> f64 {
    (-coeffs.a1 * range_factor(coeffs.a2, range_m) * separation_factor(coeffs.a3, d_over_lambda)).exp()
}

pub(crate) fn range_factor(a2: f64, range_m: f64) -> f64 {
    range_m / (a2 * range_m + 1.0)
}

pub(crate) fn separation_factor(a3: f64, d_over_lambda: f64) -> f64 {
    d_over_lambda / (a3 * d_over_lambda + 1.0)
}

pub fn within_validity(range_m: f64, d_over_lambda: f64) -> bool {
    let (lo, hi) = VALID_SEPARATION_WAVELENGTHS;
    range_m <= MAX_VALID_RANGE_M && (lo..=hi).contains(&d_over_lambda)
}

/// Evaluates the decorrelation between two wavefront points `separation_m` apart.
pub fn alpha_empirical(scenario: &RainScenario, separation_m: f64) -> Result<AlphaValue> {
    scenario.validate()?;
    if !(separation_m.is_finite() && separation_m > 0.0) {
        return Err(Error::domain(format!("separation must be positive, got {separation_m}")));
    }
    let u = separation_m / scenario.wavelength_m;
    Ok(AlphaValue {
        value: alpha_model(&scenario.coeffs, scenario.range_m, u),
        outside_validity: !within_validity(scenario.range_m, u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(range_m: f64) -> RainScenario {
        RainScenario::new(25.0, range_m, AlphaCoeffs::new(0.0065, 0.0248, 0.251).unwrap(), 0.01).unwrap()
    }

    #[test]
    fn zero_range_limit_is_one() {
        let c = AlphaCoeffs::new(3.0, 0.1, 0.2).unwrap();
        for u in [0.1, 1.0, 8.0, 100.0] {
            assert_eq!(alpha_model(&c, 0.0, u), 1.0);
        }
        let tiny = alpha_empirical(&scenario(1e-12), 0.04).unwrap();
        assert!((tiny.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        let s = scenario(200.0);
        assert!(matches!(alpha_empirical(&s, 0.0), Err(Error::Domain(_))));
        assert!(matches!(alpha_empirical(&s, -1.0), Err(Error::Domain(_))));
        let mut bad = s;
        bad.range_m = 0.0;
        assert!(matches!(alpha_empirical(&bad, 0.04), Err(Error::Domain(_))));
        assert!(AlphaCoeffs::new(0.0, 0.1, 0.1).is_err());
        assert!(AlphaCoeffs::new(1.0, -0.1, 0.1).is_err());
    }

    #[test]
    fn validity_window_flags_but_still_returns() {
        let s = scenario(200.0);
        let inside = alpha_empirical(&s, 4.0 * s.wavelength_m).unwrap();
        assert!(!inside.outside_validity);
        let far = alpha_empirical(&s, 9.0 * s.wavelength_m).unwrap();
        assert!(far.outside_validity);
        assert!(far.value > 0.0 && far.value < inside.value);
        let close = alpha_empirical(&s, 0.05 * s.wavelength_m).unwrap();
        assert!(close.outside_validity);
        let long = alpha_empirical(&scenario(800.0), 4.0 * s.wavelength_m).unwrap();
        assert!(long.outside_validity);
    }

    #[test]
    fn strictly_decreasing_on_grid() {
        let c = AlphaCoeffs::new(0.0104, 0.0248, 0.251).unwrap();
        for &r in &[10.0, 100.0, 200.0, 400.0, 500.0] {
            let seq: Vec<f64> = (1..=80).map(|k| alpha_model(&c, r, 0.1 * k as f64)).collect();
            assert!(seq.windows(2).all(|w| w[1] < w[0]));
            assert!(seq.iter().all(|&a| a > 0.0 && a <= 1.0));
        }
        for &u in &[0.1, 0.5, 4.0, 8.0] {
            let seq: Vec<f64> = (1..=50).map(|k| alpha_model(&c, 10.0 * k as f64, u)).collect();
            assert!(seq.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn scenario_file_keys_are_flat() {
        let s = scenario(200.0);
        let v = serde_json::to_value(s).unwrap();
        for key in ["rain_rate_mm_hr", "range_m", "a1", "a2", "a3", "wavelength_m"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
