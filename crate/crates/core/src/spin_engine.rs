//! The two-level spin working medium.
//!
//! The spin has Hamiltonian `Δ(t) σ_z / 2` and its state is the population
//! `p = <σ_z>`. In contact with a bath at effective temperature `T^e` it
//! relaxes as `dp/dt = -Γ coth(Δ / 2T^e) p - Γ`. Work and heat rates follow
//! the weak-coupling identification `dW/dt = (dΔ/dt) p / 2` and
//! `dQ/dt = Δ (dp/dt) / 2`; positive work is done on the spin and positive
//! heat flows from the bath into it.

use serde::{Deserialize, Serialize};

use crate::bath_thermo::{generalized_carnot, Bath};
use crate::error::{Error, Result};

/// Above this gap-to-temperature ratio the high-temperature picture is
/// flagged in report metadata.
pub const HIGH_TEMPERATURE_RATIO: f64 = 0.1;

/// Full specification of the minimal engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub hot: Bath,
    pub cold: Bath,
    /// Gap at corner A (start of the hot stroke), meV.
    pub delta_a: f64,
    /// Gap at corner B (end of the hot stroke), meV.
    pub delta_b: f64,
    /// Exchange rate constant, shared by both baths.
    pub gamma: f64,
}

impl EngineParams {
    /// Validates gaps, rate and bath ordering. `delta_a == delta_b` is let
    /// through here and rejected by [`cycle_boundaries`] as a degenerate cycle.
    pub fn new(hot: Bath, cold: Bath, delta_a: f64, delta_b: f64, gamma: f64) -> Result<Self> {
        let params = Self {
            hot,
            cold,
            delta_a,
            delta_b,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_b > 0.0 && self.delta_b.is_finite() && self.delta_a.is_finite()) {
            return Err(Error::Domain(format!(
                "gaps must be positive and finite, got delta_a = {}, delta_b = {}",
                self.delta_a, self.delta_b
            )));
        }
        if self.delta_a < self.delta_b {
            return Err(Error::Domain(format!(
                "delta_a must exceed delta_b for a positive-work cycle, got {} < {}",
                self.delta_a, self.delta_b
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!(
                "rate constant must be positive, got {}",
                self.gamma
            )));
        }
        generalized_carnot(&self.hot, &self.cold).map(|_| ())
    }

    /// Same engine with a different rate constant.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    /// Same engine with a different cold-bath temperature (tuning unchanged).
    pub fn with_cold_temperature(mut self, temperature: f64) -> Result<Self> {
        self.cold = Bath::new(temperature, self.cold.tuning())?;
        self.validate()?;
        Ok(self)
    }

    pub fn hot_effective(&self) -> f64 {
        self.hot.effective_temperature()
    }

    pub fn cold_effective(&self) -> f64 {
        self.cold.effective_temperature()
    }

    /// Non-fatal observations about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio =
            self.delta_a.max(self.delta_b) / self.hot_effective().min(self.cold_effective());
        if ratio > HIGH_TEMPERATURE_RATIO {
            out.push(format!(
                "max gap / min effective temperature = {ratio:.4} exceeds {HIGH_TEMPERATURE_RATIO}: outside the high-temperature regime"
            ));
        }
        if self.cold.tuning() > self.hot.tuning() {
            out.push(format!(
                "cold tuning {} exceeds hot tuning {}",
                self.cold.tuning(),
                self.hot.tuning()
            ));
        }
        out
    }
}

/// Stationary population `-tanh(Δ / 2T^e)` of the spin at a fixed gap.
pub fn stationary_population(gap: f64, t_eff: f64) -> f64 {
    -(gap / (2.0 * t_eff)).tanh()
}

/// Right-hand side of the relaxation equation, `dp/dt`.
pub fn master_rhs(p: f64, gap: f64, t_eff: f64, gamma: f64) -> Result<f64> {
    if gap == 0.0 {
        if p == 0.0 {
            return Ok(-gamma);
        }
        return Err(Error::Domain(format!(
            "zero gap with nonzero population {p}: coth is singular"
        )));
    }
    let x = gap / (2.0 * t_eff);
    Ok(-gamma * p / x.tanh() - gamma)
}

/// Gap that produces the rate `p_rate` at population `p`:
/// `T^e ln[(Γ + ṗ - Γp) / (Γ + ṗ + Γp)]`.
pub fn gap_from_state(p: f64, p_rate: f64, t_eff: f64, gamma: f64) -> Result<f64> {
    let minus = gamma + p_rate - gamma * p;
    let plus = gamma + p_rate + gamma * p;
    if !(minus > 0.0 && plus > 0.0) {
        return Err(Error::InvalidState(format!(
            "no gap reaches p = {p} with dp/dt = {p_rate} (log arguments {minus}, {plus})"
        )));
    }
    Ok(t_eff * (-2.0 * gamma * p / plus).ln_1p())
}

/// `dW/dt = (dΔ/dt) p / 2`.
pub fn work_rate(gap_rate: f64, p: f64) -> f64 {
    0.5 * gap_rate * p
}

/// `dQ/dt = Δ (dp/dt) / 2`.
pub fn heat_rate(gap: f64, p_rate: f64) -> f64 {
    0.5 * gap * p_rate
}

/// `E = Δ p / 2`.
pub fn internal_energy(gap: f64, p: f64) -> f64 {
    0.5 * gap * p
}

fn x_ln_x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `ln 2 - S(p)`, evaluated without cancellation for small `|p|`.
pub(crate) fn entropy_deficit(p: f64) -> f64 {
    if p.abs() < 0.5 {
        0.5 * ((1.0 + p) * p.ln_1p() + (1.0 - p) * (-p).ln_1p())
    } else {
        0.5 * (x_ln_x(1.0 + p) + x_ln_x(1.0 - p))
    }
}

/// Von Neumann entropy of the spin with population `p`.
pub fn entropy(p: f64) -> Result<f64> {
    if !(p.abs() <= 1.0) {
        return Err(Error::Domain(format!(
            "population must lie in [-1, 1], got {p}"
        )));
    }
    Ok(std::f64::consts::LN_2 - entropy_deficit(p))
}

/// Cycle corner data derived from the engine parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleBoundaries {
    /// Population at corners A and D.
    pub p0: f64,
    /// Population at corners B and C.
    pub p1: f64,
    /// Gap at corner C (start of the cold stroke).
    pub delta_c: f64,
    /// Gap at corner D (end of the cold stroke).
    pub delta_d: f64,
    /// Entropy absorbed by the spin over the hot stroke.
    pub delta_s: f64,
}

/// Stationary corner populations and the cold-side gaps obtained by the
/// population-preserving rescaling `Δ_C = Δ_B T_C^e / T_H^e`,
/// `Δ_D = Δ_A T_C^e / T_H^e`.
pub fn cycle_boundaries(params: &EngineParams) -> Result<CycleBoundaries> {
    params.validate()?;
    if params.delta_a == params.delta_b {
        return Err(Error::DegenerateCycle(params.delta_a));
    }
    let th = params.hot_effective();
    let scale = params.cold_effective() / th;
    let p0 = stationary_population(params.delta_a, th);
    let p1 = stationary_population(params.delta_b, th);
    let delta_s = entropy_deficit(p0) - entropy_deficit(p1);
    Ok(CycleBoundaries {
        p0,
        p1,
        delta_c: params.delta_b * scale,
        delta_d: params.delta_a * scale,
        delta_s,
    })
}

/// Work done on the spin by an instantaneous gap change at fixed population.
/// Used for the adiabatic corners and for protocol jumps.
pub fn sudden_quench_work(gap_before: f64, gap_after: f64, p: f64) -> f64 {
    0.5 * (gap_after - gap_before) * p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T_HOT: f64 = 704.552;

    fn reference_params(t_cold: f64) -> EngineParams {
        EngineParams::new(
            Bath::new(25.8, 2.0).unwrap(),
            Bath::new(t_cold, 1.8).unwrap(),
            5.0,
            3.0,
            0.005,
        )
        .unwrap()
    }

    #[test]
    fn stationary_population_examples() {
        assert_eq!(stationary_population(0.0, 3.0), 0.0);
        assert!((stationary_population(5.0, T_HOT) + 0.003_548_339_239_268_794).abs() < 1e-16);
        assert!((stationary_population(3.0, T_HOT) + 0.002_129_009_262_136_849).abs() < 1e-16);
    }

    #[test]
    fn master_rhs_examples() {
        let p = stationary_population(5.0, T_HOT);
        assert!(master_rhs(p, 5.0, T_HOT, 0.005).unwrap().abs() < 1e-17);
        assert_eq!(master_rhs(0.0, 5.0, T_HOT, 0.005).unwrap(), -0.005);
        let r = master_rhs(-0.003, 5.0, T_HOT, 0.005).unwrap();
        assert!((r + 7.726_702_582_442_351e-4).abs() < 1e-15);
        assert!(master_rhs(-0.1, 0.0, T_HOT, 0.005).is_err());
    }

    #[test]
    fn gap_from_state_examples() {
        let p = stationary_population(4.0, T_HOT);
        assert!((gap_from_state(p, 0.0, T_HOT, 0.005).unwrap() - 4.0).abs() < 1e-12);
        let g = gap_from_state(-0.003, 0.0, T_HOT, 0.005).unwrap();
        assert!((g - 4.227_324_682_004_483).abs() < 1e-12);
        let r = gap_from_state(-0.5, -0.006, T_HOT, 0.005);
        assert!(matches!(r, Err(Error::InvalidState(_))));
    }

    #[test]
    fn rate_examples() {
        assert_eq!(work_rate(0.0, -0.4), 0.0);
        let pdot = master_rhs(-0.003, 5.0, T_HOT, 0.005).unwrap();
        assert!((heat_rate(5.0, pdot) + 1.931_675_645_610_588e-3).abs() < 1e-15);
        // Static state: no work, no heat.
        assert_eq!(work_rate(0.0, -0.2) + heat_rate(3.0, 0.0), 0.0);
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(0.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-16);
        assert_eq!(entropy(1.0).unwrap(), 0.0);
        assert_eq!(entropy(-1.0).unwrap(), 0.0);
        assert!((entropy(-0.5).unwrap() - 0.562_335_144_618_808_4).abs() < 1e-15);
        assert!(entropy(1.0001).is_err());
    }

    #[test]
    fn reference_cycle_corners() {
        let b = cycle_boundaries(&reference_params(12.9)).unwrap();
        assert!((b.p0 + 0.003_548_337_188_658_51).abs() < 1e-16);
        assert!((b.p1 + 0.002_129_008_031_760_764).abs() < 1e-16);
        assert!((b.delta_c - 1.005_893_306_591_601).abs() < 1e-12);
        assert!((b.delta_d - 1.676_488_844_319_335).abs() < 1e-12);
        assert!(b.delta_s > 0.0);
        let direct = entropy(b.p1).unwrap() - entropy(b.p0).unwrap();
        assert!((b.delta_s - direct).abs() < 1e-14);
    }

    #[test]
    fn cold_side_consistency() {
        let params = reference_params(12.9);
        let b = cycle_boundaries(&params).unwrap();
        let tc = params.cold_effective();
        assert!((stationary_population(b.delta_d, tc) - b.p0).abs() < 1e-14);
        assert!((stationary_population(b.delta_c, tc) - b.p1).abs() < 1e-14);
    }

    #[test]
    fn unit_scaling_with_identical_baths_but_hotter() {
        // Same tuning, slightly colder: ratio approaches one.
        let params = EngineParams::new(
            Bath::new(25.8, 2.0).unwrap(),
            Bath::new(25.8 * (1.0 - 1e-12), 2.0).unwrap(),
            5.0,
            3.0,
            0.005,
        )
        .unwrap();
        let b = cycle_boundaries(&params).unwrap();
        assert!((b.delta_c - 3.0).abs() < 1e-10);
        assert!((b.delta_d - 5.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_and_invalid_configurations() {
        let mut params = reference_params(12.9);
        params.delta_b = 5.0;
        assert_eq!(cycle_boundaries(&params), Err(Error::DegenerateCycle(5.0)));
        let hot = Bath::new(25.8, 2.0).unwrap();
        let cold = Bath::new(12.9, 1.8).unwrap();
        assert!(EngineParams::new(hot, cold, 3.0, 5.0, 0.005).is_err());
        assert!(EngineParams::new(hot, cold, 5.0, 3.0, 0.0).is_err());
        assert!(EngineParams::new(cold, hot, 5.0, 3.0, 0.005).is_err());
    }

    #[test]
    fn warnings_flag_regime_and_tuning_order() {
        assert!(reference_params(12.9).warnings().is_empty());
        let p = EngineParams::new(
            Bath::new(10.0, 0.0).unwrap(),
            Bath::new(1.0, 0.5).unwrap(),
            5.0,
            3.0,
            0.01,
        )
        .unwrap();
        assert_eq!(p.warnings().len(), 2);
    }

    #[test]
    fn quench_work_at_fixed_population() {
        assert_eq!(sudden_quench_work(5.0, 3.0, -0.01), 0.01);
    }

    proptest! {
        #[test]
        fn gap_round_trip(p in -0.9f64..-1e-3, ratio in 1e-3f64..1.0, t in 1.0f64..1000.0) {
            // Recovery loses about exp(gap/t)/|p| in relative precision.
            let gap = ratio * t;
            let rate = master_rhs(p, gap, t, 0.005).unwrap();
            let back = gap_from_state(p, rate, t, 0.005).unwrap();
            prop_assert!((back - gap).abs() <= 1e-12 * gap,
                "gap {gap} came back as {back}");
        }

        #[test]
        fn entropy_is_even_and_bounded(p in -1.0f64..=1.0) {
            let s = entropy(p).unwrap();
            prop_assert!((0.0..=std::f64::consts::LN_2 + 1e-16).contains(&s));
            prop_assert!((s - entropy(-p).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn entropy_is_strictly_concave(p in -0.99f64..0.99, h in 1e-3f64..1e-2) {
            let mid = entropy(p).unwrap();
            let avg = 0.5 * (entropy(p - h).unwrap() + entropy(p + h).unwrap());
            prop_assert!(mid > avg);
        }

        #[test]
        fn larger_hot_gap_moves_entropy(da in 0.2f64..20.0, frac in 0.05f64..0.95) {
            let params = EngineParams::new(
                Bath::new(25.8, 2.0).unwrap(),
                Bath::new(12.9, 1.8).unwrap(),
                da,
                da * frac,
                0.005,
            ).unwrap();
            let b = cycle_boundaries(&params).unwrap();
            prop_assert!(b.delta_s > 0.0);
            prop_assert!(b.p0 < b.p1 && b.p1 < 0.0);
        }

        #[test]
        fn first_law_along_smooth_protocol(a in 1.0f64..6.0, w in 0.1f64..3.0, t in 0.0f64..5.0) {
            // Δ(t) = a + sin(w t), p(t) = -0.01 cos(t): compare the rates to a
            // centred difference of E = Δ p / 2.
            let gap = |t: f64| a + (w * t).sin();
            let pop = |t: f64| -0.01 * t.cos();
            let h = 1e-4;
            let de = (internal_energy(gap(t + h), pop(t + h)) - internal_energy(gap(t - h), pop(t - h))) / (2.0 * h);
            let rates = work_rate(w * (w * t).cos(), pop(t)) + heat_rate(gap(t), 0.01 * t.sin());
            prop_assert!((de - rates).abs() < 1e-8);
        }
    }
}
