//! Closed-form thermodynamics of temperature-tunable baths.
//!
//! A bath with thermodynamic temperature `T` and tuning (squeezing)
//! parameter `r` acts on a weakly coupled working medium like a thermal bath
//! at the effective temperature `T (1 + 2 sinh² r)`. Everything here is a
//! pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A heat reservoir with a tunable effective temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bath {
    temperature: f64,
    tuning: f64,
}

impl Bath {
    /// `temperature` in meV (> 0), dimensionless `tuning` (>= 0).
    pub fn new(temperature: f64, tuning: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Domain(format!(
                "bath temperature must be positive and finite, got {temperature}"
            )));
        }
        if !(tuning >= 0.0 && tuning.is_finite()) {
            return Err(Error::Domain(format!(
                "bath tuning parameter must be non-negative and finite, got {tuning}"
            )));
        }
        Ok(Self {
            temperature,
            tuning,
        })
    }

    /// A plain thermal bath (`r = 0`).
    pub fn thermal(temperature: f64) -> Result<Self> {
        Self::new(temperature, 0.0)
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn tuning(&self) -> f64 {
        self.tuning
    }

    pub fn effective_temperature(&self) -> f64 {
        effective_temperature(self)
    }
}

/// `T (1 + 2 sinh² r)`; equals `T cosh 2r`.
pub fn effective_temperature(bath: &Bath) -> f64 {
    let s = bath.tuning.sinh();
    bath.temperature * (1.0 + 2.0 * s * s)
}

/// Quasi-static efficiency limit `1 - T_C^e / T_H^e`.
pub fn generalized_carnot(hot: &Bath, cold: &Bath) -> Result<f64> {
    let th = hot.effective_temperature();
    let tc = cold.effective_temperature();
    if tc >= th {
        return Err(Error::NotAnEngine { hot: th, cold: tc });
    }
    Ok(1.0 - tc / th)
}

/// Standard Carnot efficiency `1 - T_C / T_H` from the bare temperatures.
pub fn standard_carnot(hot: &Bath, cold: &Bath) -> f64 {
    1.0 - cold.temperature / hot.temperature
}

/// Bounds on the efficiency at maximum power of a low-dissipation engine,
/// together with the generalized Curzon-Ahlborn value that sits between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpBounds {
    pub eta_s: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_gca: f64,
}

impl EmpBounds {
    /// Whether `eta` lies in `[eta_min - slack, eta_max + slack]`.
    pub fn contains(&self, eta: f64, slack: f64) -> bool {
        eta >= self.eta_min - slack && eta <= self.eta_max + slack
    }
}

fn check_eta_s(eta_s: f64) -> Result<()> {
    if (0.0..1.0).contains(&eta_s) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "generalized Carnot limit must lie in [0, 1), got {eta_s}"
        )))
    }
}

/// `eta_s / 2 <= eta* <= eta_s / (2 - eta_s)`. `eta_s = 0` is accepted and
/// yields all-zero bounds.
pub fn emp_bounds(eta_s: f64) -> Result<EmpBounds> {
    check_eta_s(eta_s)?;
    Ok(EmpBounds {
        eta_s,
        eta_min: eta_s / 2.0,
        eta_max: eta_s / (2.0 - eta_s),
        eta_gca: 1.0 - (1.0 - eta_s).sqrt(),
    })
}

/// Generalized Curzon-Ahlborn efficiency `1 - sqrt(1 - eta_s)`.
pub fn gca_efficiency(eta_s: f64) -> Result<f64> {
    check_eta_s(eta_s)?;
    Ok(1.0 - (1.0 - eta_s).sqrt())
}

/// First-order irreversible heat corrections and the entropy moved per
/// cycle: `Q_H = T_H^e ΔS + q1_hot / t_H`, `Q_C = -T_C^e ΔS + q1_cold / t_C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowDissipationCoefficients {
    q1_hot: f64,
    q1_cold: f64,
    delta_s: f64,
}

impl LowDissipationCoefficients {
    pub fn new(q1_hot: f64, q1_cold: f64, delta_s: f64) -> Result<Self> {
        if !(q1_hot < 0.0 && q1_cold < 0.0) {
            return Err(Error::Domain(format!(
                "first-order heat corrections must be negative, got q1_hot = {q1_hot}, q1_cold = {q1_cold}"
            )));
        }
        if !(delta_s > 0.0) {
            return Err(Error::Domain(format!(
                "entropy change must be positive, got {delta_s}"
            )));
        }
        Ok(Self {
            q1_hot,
            q1_cold,
            delta_s,
        })
    }

    pub fn q1_hot(&self) -> f64 {
        self.q1_hot
    }

    pub fn q1_cold(&self) -> f64 {
        self.q1_cold
    }

    pub fn delta_s(&self) -> f64 {
        self.delta_s
    }
}

/// The maximum-power operating point of a low-dissipation engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowDissipationOptimum {
    pub t_hot: f64,
    pub t_cold: f64,
    pub power: f64,
    pub emp: f64,
}

/// Power of the low-dissipation engine at durations `(t_hot, t_cold)`.
pub fn low_dissipation_power(
    coeffs: &LowDissipationCoefficients,
    hot: &Bath,
    cold: &Bath,
    t_hot: f64,
    t_cold: f64,
) -> f64 {
    let drive = (hot.effective_temperature() - cold.effective_temperature()) * coeffs.delta_s;
    (drive + coeffs.q1_hot / t_hot + coeffs.q1_cold / t_cold) / (t_hot + t_cold)
}

/// Closed-form maximizer of the low-dissipation power.
///
/// Stationarity gives `a / t_H² = b / t_C²` with `a = -q1_hot`,
/// `b = -q1_cold`, so with `A = (T_H^e - T_C^e) ΔS`:
/// `t_H = 2√a(√a + √b)/A`, `t_C = 2√b(√a + √b)/A` and
/// `P = A² / (4 (√a + √b)²)`.
pub fn low_dissipation_optimum(
    coeffs: &LowDissipationCoefficients,
    hot: &Bath,
    cold: &Bath,
) -> Result<LowDissipationOptimum> {
    let th = hot.effective_temperature();
    let tc = cold.effective_temperature();
    let drive = (th - tc) * coeffs.delta_s;
    if !(drive > 0.0) {
        return Err(Error::NotAnEngine { hot: th, cold: tc });
    }
    let sa = (-coeffs.q1_hot).sqrt();
    let sb = (-coeffs.q1_cold).sqrt();
    let sum = sa + sb;
    let t_hot = 2.0 * sa * sum / drive;
    let t_cold = 2.0 * sb * sum / drive;
    let power = drive * drive / (4.0 * sum * sum);
    let q_hot = th * coeffs.delta_s + coeffs.q1_hot / t_hot;
    let q_cold = -tc * coeffs.delta_s + coeffs.q1_cold / t_cold;
    Ok(LowDissipationOptimum {
        t_hot,
        t_cold,
        power,
        emp: (q_hot + q_cold) / q_hot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bath(t: f64, r: f64) -> Bath {
        Bath::new(t, r).unwrap()
    }

    #[test]
    fn effective_temperature_examples() {
        assert_eq!(effective_temperature(&bath(25.8, 0.0)), 25.8);
        // 40-digit reference values.
        let hot = effective_temperature(&bath(25.8, 2.0));
        assert!((hot - 704.552_407_169_225_4).abs() < 1e-10);
        let warm = effective_temperature(&bath(25.8, 1.8));
        assert!((warm - 472.469_700_343_016_1).abs() < 1e-10);
    }

    #[test]
    fn bath_rejects_invalid_fields() {
        assert!(Bath::new(0.0, 1.0).is_err());
        assert!(Bath::new(-1.0, 1.0).is_err());
        assert!(Bath::new(1.0, -0.1).is_err());
        assert!(Bath::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn generalized_carnot_examples() {
        let eta = generalized_carnot(&bath(25.8, 2.0), &bath(12.9, 1.8)).unwrap();
        assert!((eta - 0.664_702_231_136_133).abs() < 1e-12);
        let eta = generalized_carnot(&bath(25.8, 2.0), &bath(25.8, 1.0)).unwrap();
        assert!((eta - 0.862_232_180_541_477).abs() < 1e-12);
        let eta = generalized_carnot(&bath(25.8, 1.3), &bath(12.9, 1.3)).unwrap();
        assert!((eta - 0.5).abs() < 1e-14);
    }

    #[test]
    fn generalized_carnot_rejects_reversed_baths() {
        let r = generalized_carnot(&bath(10.0, 0.0), &bath(10.0, 0.5));
        assert!(matches!(r, Err(Error::NotAnEngine { .. })));
        let r = generalized_carnot(&bath(10.0, 0.3), &bath(10.0, 0.3));
        assert!(matches!(r, Err(Error::NotAnEngine { .. })));
    }

    #[test]
    fn bounds_examples() {
        let b = emp_bounds(0.5).unwrap();
        assert_eq!(b.eta_min, 0.25);
        assert!((b.eta_max - 1.0 / 3.0).abs() < 1e-15);
        let b = emp_bounds(0.0).unwrap();
        assert_eq!((b.eta_min, b.eta_max, b.eta_gca), (0.0, 0.0, 0.0));
        let b = emp_bounds(0.664_702_231_136_133).unwrap();
        assert!((b.eta_min - 0.332_351_115_568_066).abs() < 1e-12);
        assert!((b.eta_max - 0.497_793_261_275_118).abs() < 1e-12);
        assert!(emp_bounds(1.0).is_err());
        assert!(emp_bounds(-0.1).is_err());
    }

    #[test]
    fn gca_examples() {
        assert_eq!(gca_efficiency(0.75).unwrap(), 0.5);
        assert_eq!(gca_efficiency(0.0).unwrap(), 0.0);
        let g = gca_efficiency(0.664_702_231_136_133).unwrap();
        assert!((g - 0.420_950_978_876_687).abs() < 1e-12);
        assert!(gca_efficiency(1.2).is_err());
    }

    #[test]
    fn coefficients_must_be_dissipative() {
        assert!(LowDissipationCoefficients::new(0.0, -1.0, 1.0).is_err());
        assert!(LowDissipationCoefficients::new(-1.0, 0.5, 1.0).is_err());
        assert!(LowDissipationCoefficients::new(-1.0, -1.0, 0.0).is_err());
    }

    // Unit drive: T_H^e - T_C^e = 1 with ΔS = 1.
    fn unit_drive() -> (Bath, Bath) {
        (bath(2.0, 0.0), bath(1.0, 0.0))
    }

    #[test]
    fn symmetric_dissipation_gives_equal_durations() {
        let (hot, cold) = unit_drive();
        let c = LowDissipationCoefficients::new(-1.0, -1.0, 1.0).unwrap();
        let opt = low_dissipation_optimum(&c, &hot, &cold).unwrap();
        assert_eq!(opt.t_hot, 4.0);
        assert_eq!(opt.t_cold, 4.0);
        assert_eq!(opt.power, 1.0 / 16.0);
    }

    #[test]
    fn optimum_matches_coarse_grid() {
        let (hot, cold) = unit_drive();
        let c = LowDissipationCoefficients::new(-1.0, -1.0, 1.0).unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 1..=400 {
            for j in 1..=400 {
                let p = low_dissipation_power(&c, &hot, &cold, i as f64 * 0.02, j as f64 * 0.02);
                best = best.max(p);
            }
        }
        assert!((best - 1.0 / 16.0).abs() / (1.0 / 16.0) < 1e-12);
    }

    #[test]
    fn bound_attaining_limits() {
        let (hot, cold) = (bath(4.0, 0.0), bath(1.0, 0.0));
        let eta_s = generalized_carnot(&hot, &cold).unwrap();
        let b = emp_bounds(eta_s).unwrap();
        let upper = LowDissipationCoefficients::new(-1.0, -1e-14, 1.0).unwrap();
        let lower = LowDissipationCoefficients::new(-1e-14, -1.0, 1.0).unwrap();
        let up = low_dissipation_optimum(&upper, &hot, &cold).unwrap().emp;
        let lo = low_dissipation_optimum(&lower, &hot, &cold).unwrap().emp;
        assert!((up - b.eta_max).abs() < 1e-6);
        assert!((lo - b.eta_min).abs() < 1e-6);
    }

    #[test]
    fn optimum_requires_positive_drive() {
        let c = LowDissipationCoefficients::new(-1.0, -1.0, 1.0).unwrap();
        let r = low_dissipation_optimum(&c, &bath(1.0, 0.0), &bath(2.0, 0.0));
        assert!(matches!(r, Err(Error::NotAnEngine { .. })));
    }
}
