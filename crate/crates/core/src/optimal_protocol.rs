//! Optimal finite-time isothermal strokes.
//!
//! Writing the gap as a functional of the population turns the heat
//! absorbed in a stroke into an action `∫ L(p, ṗ) dt`. Its Euler-Lagrange
//! first integral, in the reduced rate `x = ṗ / Γ`, reads
//! `x² p / ((1 + x)² - p²) = K` with a constant `K < 0`. Solving for `x`
//! gives one increasing branch (hot stroke) and one decreasing branch (cold
//! stroke). Everything the optimizer needs, durations and heats, is a
//! quadrature in `p` along one of these branches.

use roots::{find_root_brent, Convergency};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::integrate_default;
use crate::spin_engine::{gap_from_state, CycleBoundaries};

/// Relative margin kept between `K` and the largest population on the path.
pub const K_POLE_MARGIN: f64 = 1e-3;
/// Initial relative distance of the small-|K| end of the bracket from zero.
pub const K_ZERO_MARGIN: f64 = 1e-3;
/// Smallest |K| the duration solver will try before giving up.
pub const K_FLOOR: f64 = 1e-280;
/// Relative tolerance on durations returned by [`solve_k_for_duration`].
pub const DURATION_REL_TOL: f64 = 1e-10;
/// Default number of samples in a reconstructed protocol.
pub const DEFAULT_SAMPLES: usize = 512;

/// Which root of the Euler-Lagrange quadratic a stroke follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchKind {
    /// Population rises; used in contact with the hot bath (A → B).
    HotPlus,
    /// Population falls; used in contact with the cold bath (C → D).
    ColdMinus,
}

impl BranchKind {
    pub fn name(&self) -> &'static str {
        match self {
            BranchKind::HotPlus => "hot",
            BranchKind::ColdMinus => "cold",
        }
    }

    /// `(p_start, p_end)` of the stroke.
    pub fn endpoints(&self, b: &CycleBoundaries) -> (f64, f64) {
        match self {
            BranchKind::HotPlus => (b.p0, b.p1),
            BranchKind::ColdMinus => (b.p1, b.p0),
        }
    }

    /// Admissible `(K_min, K_max)` before the small-|K| extension: K stays
    /// above the least negative corner population and below zero.
    pub fn k_bracket(&self, b: &CycleBoundaries) -> (f64, f64) {
        let p_max = b.p0.max(b.p1);
        (p_max * (1.0 - K_POLE_MARGIN), p_max * K_ZERO_MARGIN)
    }
}

impl std::fmt::Display for BranchKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Reduced population rate `ṗ / Γ` on the requested branch.
///
/// `x = [-K ± sqrt(K p (K p + 1 - p²))] / (K - p)`. The cold root is
/// evaluated in the rationalized form `K (1 - p²) / (sqrt(...) - K)`, which
/// has no cancellation near `K = p`.
pub fn pdot_branch(p: f64, k: f64, branch: BranchKind) -> Result<f64> {
    if !(k < 0.0) {
        return Err(Error::Domain(format!("K must be negative, got {k}")));
    }
    if k == p {
        return Err(Error::Singular(k));
    }
    let disc = k * p * (k * p + 1.0 - p * p);
    if !(disc >= 0.0) {
        return Err(Error::Domain(format!(
            "negative discriminant {disc} at p = {p}, K = {k}"
        )));
    }
    let root = disc.sqrt();
    match branch {
        BranchKind::HotPlus => {
            if k < p {
                return Err(Error::Domain(format!(
                    "hot branch needs K > p, got K = {k}, p = {p}"
                )));
            }
            Ok((root - k) / (k - p))
        }
        BranchKind::ColdMinus => Ok(k * (1.0 - p * p) / (root - k)),
    }
}

/// Euler-Lagrange first integral evaluated at `(p, x)`, minus `k`.
pub fn el_residual(p: f64, reduced_rate: f64, k: f64) -> f64 {
    let x = reduced_rate;
    x * x * p / ((1.0 + x).powi(2) - p * p) - k
}

/// Residual of `[p coth(y) + 1]² = K p csch²(y)` with `y = gap / 2T^e`.
pub fn quadratic_identity_residual(p: f64, gap: f64, t_eff: f64, k: f64) -> f64 {
    let y = gap / (2.0 * t_eff);
    let sinh = y.sinh();
    let lhs = (p * y.cosh() / sinh + 1.0).powi(2);
    lhs - k * p / (sinh * sinh)
}

/// Population on a Euler-Lagrange branch as a function of the instantaneous
/// gap: `p = -tanh y + (K/2) sech² y [1 ± sqrt(1 - (4/K) sinh y cosh y)]`,
/// plus sign on the hot branch, minus on the cold one.
pub fn population_on_branch(gap: f64, t_eff: f64, k: f64, branch: BranchKind) -> f64 {
    let y = gap / (2.0 * t_eff);
    let cosh = y.cosh();
    let root = (1.0 - 4.0 * y.sinh() * cosh / k).sqrt();
    let sign = match branch {
        BranchKind::HotPlus => 1.0,
        BranchKind::ColdMinus => -1.0,
    };
    -y.tanh() + 0.5 * k / (cosh * cosh) * (1.0 + sign * root)
}

/// A solution of the Euler-Lagrange equation for one stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ELBranch {
    k: f64,
    branch: BranchKind,
    t_eff: f64,
    p_start: f64,
    p_end: f64,
}

impl ELBranch {
    pub fn new(k: f64, branch: BranchKind, t_eff: f64, p_start: f64, p_end: f64) -> Result<Self> {
        if !(k < 0.0) {
            return Err(Error::Domain(format!("K must be negative, got {k}")));
        }
        if !(t_eff > 0.0) {
            return Err(Error::Domain(format!(
                "effective temperature must be positive, got {t_eff}"
            )));
        }
        let rising = p_end > p_start;
        match branch {
            BranchKind::HotPlus if !rising => {
                return Err(Error::Domain(format!(
                    "hot branch must raise the population, got {p_start} -> {p_end}"
                )))
            }
            BranchKind::ColdMinus if rising || p_end == p_start => {
                return Err(Error::Domain(format!(
                    "cold branch must lower the population, got {p_start} -> {p_end}"
                )))
            }
            _ => {}
        }
        let p_max = p_start.max(p_end);
        if !(k > p_max) {
            return Err(Error::Domain(format!(
                "K = {k} must exceed the largest population on the path ({p_max})"
            )));
        }
        for p in [p_start, p_end] {
            if !(p.abs() < 1.0) || k * p * (k * p + 1.0 - p * p) < 0.0 {
                return Err(Error::Domain(format!(
                    "negative discriminant at endpoint p = {p}"
                )));
            }
        }
        Ok(Self {
            k,
            branch,
            t_eff,
            p_start,
            p_end,
        })
    }

    /// Branch for one stroke of the cycle described by `boundaries`.
    pub fn for_stroke(
        k: f64,
        branch: BranchKind,
        boundaries: &CycleBoundaries,
        t_eff: f64,
    ) -> Result<Self> {
        let (p_start, p_end) = branch.endpoints(boundaries);
        Self::new(k, branch, t_eff, p_start, p_end)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn branch(&self) -> BranchKind {
        self.branch
    }

    pub fn t_eff(&self) -> f64 {
        self.t_eff
    }

    pub fn p_start(&self) -> f64 {
        self.p_start
    }

    pub fn p_end(&self) -> f64 {
        self.p_end
    }

    /// Reduced rate `ṗ / Γ` at population `p`.
    pub fn reduced_rate(&self, p: f64) -> Result<f64> {
        pdot_branch(p, self.k, self.branch)
    }

    /// Gap needed to hold the branch at population `p`.
    pub fn gap_at(&self, p: f64) -> Result<f64> {
        // Γ cancels out of the gap functional; use Γ = 1.
        gap_from_state(p, self.reduced_rate(p)?, self.t_eff, 1.0)
    }

    /// Gap of the stationary state at population `p` (the corner gap).
    pub fn nominal_gap(&self, p: f64) -> Result<f64> {
        gap_from_state(p, 0.0, self.t_eff, 1.0)
    }

    /// `(start, end)` jump magnitudes `|Δ(0⁺) - Δ(0)|` and `|Δ(τ) - Δ(τ⁻)|`.
    pub fn jump_magnitudes(&self) -> Result<(f64, f64)> {
        let start = (self.gap_at(self.p_start)? - self.nominal_gap(self.p_start)?).abs();
        let end = (self.nominal_gap(self.p_end)? - self.gap_at(self.p_end)?).abs();
        Ok((start, end))
    }
}

/// `Γ t` spent on the branch between `p_a` and `p_b` (oriented).
fn reduced_time_between(el: &ELBranch, p_a: f64, p_b: f64) -> Result<f64> {
    integrate_default(|p| Ok(1.0 / el.reduced_rate(p)?), p_a, p_b)
}

/// Dimensionless duration `Γ t` of the stroke. Independent of `Γ`.
pub fn reduced_duration(el: &ELBranch) -> Result<f64> {
    reduced_time_between(el, el.p_start, el.p_end)
}

/// Duration `t = (1/Γ) ∫ dp / x(p; K)` of the stroke.
pub fn duration_integral(el: &ELBranch, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "rate constant must be positive, got {gamma}"
        )));
    }
    Ok(reduced_duration(el)? / gamma)
}

/// Heat absorbed from the bath along the stroke:
/// `(T^e / 2) ∫ ln[(1 + x - p) / (1 + x + p)] dp`.
pub fn heat_quadrature(el: &ELBranch) -> Result<f64> {
    let integral = integrate_default(
        |p| {
            let x = el.reduced_rate(p)?;
            let plus = 1.0 + x + p;
            if !(plus > 0.0 && 1.0 + x - p > 0.0) {
                return Err(Error::InvalidState(format!(
                    "heat integrand log argument not positive at p = {p}, x = {x}"
                )));
            }
            Ok((-2.0 * p / plus).ln_1p())
        },
        el.p_start,
        el.p_end,
    )?;
    Ok(0.5 * el.t_eff * integral)
}

struct LogConvergency;

impl Convergency<f64> for LogConvergency {
    fn is_root_found(&mut self, y: f64) -> bool {
        y.abs() < 1e-13
    }

    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() < 1e-15 * x1.abs().max(1.0)
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= 200
    }
}

/// Reduced duration as a function of `s = ln(-K)`.
fn reduced_duration_at(
    s: f64,
    branch: BranchKind,
    boundaries: &CycleBoundaries,
    t_eff: f64,
) -> Result<f64> {
    let el = ELBranch::for_stroke(-s.exp(), branch, boundaries, t_eff)?;
    reduced_duration(&el)
}

/// Finds `K` such that the stroke lasts `target_duration`.
///
/// The search runs on `ln(-K)` between the pole margin and a small-|K| end
/// that is pushed towards zero until it brackets the target. Brent's method
/// is tried first; if it misses the tolerance, a scan with local refinement
/// takes over.
pub fn solve_k_for_duration(
    target_duration: f64,
    branch: BranchKind,
    boundaries: &CycleBoundaries,
    gamma: f64,
    t_eff: f64,
) -> Result<ELBranch> {
    if !(target_duration > 0.0 && target_duration.is_finite()) {
        return Err(Error::Domain(format!(
            "target duration must be positive and finite, got {target_duration}"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "rate constant must be positive, got {gamma}"
        )));
    }
    let target = target_duration * gamma;
    let (k_fast, k_slow) = branch.k_bracket(boundaries);
    let s_fast = (-k_fast).ln();
    let fastest = reduced_duration_at(s_fast, branch, boundaries, t_eff)?;
    if target < fastest {
        return Err(Error::InfeasibleDuration {
            target: target_duration,
            minimum: fastest / gamma,
        });
    }
    let mut s_slow = (-k_slow).ln();
    let floor = K_FLOOR.ln();
    while reduced_duration_at(s_slow, branch, boundaries, t_eff)? < target {
        if s_slow <= floor {
            return Err(Error::Numerical(format!(
                "duration {target_duration} needs |K| below {K_FLOOR}"
            )));
        }
        s_slow = (s_slow - std::f64::consts::LN_10).max(floor);
    }

    let objective = |s: f64| -> Result<f64> {
        Ok((reduced_duration_at(s, branch, boundaries, t_eff)? / target).ln())
    };
    let s = match brent_on(&objective, s_slow, s_fast) {
        Ok(s) if objective(s)?.abs() <= DURATION_REL_TOL => s,
        _ => scan_and_refine(&objective, s_slow, s_fast)?,
    };
    ELBranch::for_stroke(-s.exp(), branch, boundaries, t_eff)
}

fn brent_on<F>(objective: &F, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure = std::cell::RefCell::new(None);
    let f = |s: f64| match objective(s) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let root = find_root_brent(a, b, &f, &mut LogConvergency);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    root.map_err(|e| Error::Numerical(format!("duration root search failed: {e:?}")))
}

fn scan_and_refine<F>(objective: &F, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    const POINTS: usize = 256;
    let mut prev_s = a;
    let mut prev_v = objective(a)?;
    for i in 1..=POINTS {
        let s = a + (b - a) * i as f64 / POINTS as f64;
        let v = objective(s)?;
        if prev_v == 0.0 {
            return Ok(prev_s);
        }
        if prev_v.signum() != v.signum() {
            let root = brent_on(objective, prev_s, s)?;
            if objective(root)?.abs() <= DURATION_REL_TOL {
                return Ok(root);
            }
        }
        prev_s = s;
        prev_v = v;
    }
    Err(Error::Numerical(
        "no duration root found in the K bracket after scanning".into(),
    ))
}

/// `(K, Γ t)` pairs on a log-uniform grid of `|K|` across the bracket, from
/// small to large `|K|`.
pub fn duration_scan(
    branch: BranchKind,
    boundaries: &CycleBoundaries,
    t_eff: f64,
    k_min_abs: f64,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    let (k_fast, _) = branch.k_bracket(boundaries);
    let lo = k_min_abs.ln();
    let hi = (-k_fast).ln();
    (0..points)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64;
            let k = -s.exp();
            Ok((k, reduced_duration_at(s, branch, boundaries, t_eff)?))
        })
        .collect()
}

/// One point of a reconstructed protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSample {
    pub t: f64,
    pub p: f64,
    pub gap: f64,
}

/// A sudden gap change at fixed population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapJump {
    pub from: f64,
    pub to: f64,
}

impl GapJump {
    pub fn magnitude(&self) -> f64 {
        (self.to - self.from).abs()
    }
}

/// Time-domain optimal protocol for one stroke.
///
/// `samples[0].gap` is `Δ(0⁺)` and the last sample's gap is `Δ(τ⁻)`; the
/// corner gaps sit in the jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub branch: BranchKind,
    pub k: f64,
    pub t_eff: f64,
    pub samples: Vec<ProtocolSample>,
    /// Corner gap `Δ(0)` to `Δ(0⁺)`.
    pub jump_start: GapJump,
    /// `Δ(τ⁻)` to the corner gap `Δ(τ)`.
    pub jump_end: GapJump,
}

impl ProtocolTrace {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }
}

/// Samples the optimal protocol uniformly in `p`, accumulating time by
/// quadrature of `dt = dp / (Γ x(p))` and recovering the gap from the
/// population and its rate.
pub fn reconstruct_protocol(el: &ELBranch, gamma: f64, n_samples: usize) -> Result<ProtocolTrace> {
    if n_samples < 2 {
        return Err(Error::Domain(format!(
            "a protocol needs at least two samples, got {n_samples}"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "rate constant must be positive, got {gamma}"
        )));
    }
    let last = n_samples - 1;
    let span = el.p_end - el.p_start;
    let mut samples = Vec::with_capacity(n_samples);
    let mut t = 0.0;
    let mut prev_p = el.p_start;
    for i in 0..n_samples {
        let p = if i == last {
            el.p_end
        } else {
            el.p_start + span * (i as f64 / last as f64)
        };
        if i > 0 {
            t += reduced_time_between(el, prev_p, p)? / gamma;
        }
        let gap = el.gap_at(p)?;
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(Error::Numerical(format!(
                "protocol gap {gap} at p = {p} is not positive"
            )));
        }
        samples.push(ProtocolSample { t, p, gap });
        prev_p = p;
    }
    let jump_start = GapJump {
        from: el.nominal_gap(el.p_start)?,
        to: samples[0].gap,
    };
    let jump_end = GapJump {
        from: samples[last].gap,
        to: el.nominal_gap(el.p_end)?,
    };
    Ok(ProtocolTrace {
        branch: el.branch,
        k: el.k,
        t_eff: el.t_eff,
        samples,
        jump_start,
        jump_end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath_thermo::Bath;
    use crate::spin_engine::{cycle_boundaries, master_rhs, EngineParams};

    fn reference_params() -> EngineParams {
        EngineParams::new(
            Bath::new(25.8, 2.0).unwrap(),
            Bath::new(12.9, 1.8).unwrap(),
            5.0,
            3.0,
            0.005,
        )
        .unwrap()
    }

    fn hot_branch(k: f64) -> ELBranch {
        let params = reference_params();
        let b = cycle_boundaries(&params).unwrap();
        ELBranch::for_stroke(k, BranchKind::HotPlus, &b, params.hot_effective()).unwrap()
    }

    fn cold_branch(k: f64) -> ELBranch {
        let params = reference_params();
        let b = cycle_boundaries(&params).unwrap();
        ELBranch::for_stroke(k, BranchKind::ColdMinus, &b, params.cold_effective()).unwrap()
    }

    #[test]
    fn branch_rate_examples() {
        let up = pdot_branch(-0.003, -0.001, BranchKind::HotPlus).unwrap();
        let down = pdot_branch(-0.003, -0.001, BranchKind::ColdMinus).unwrap();
        assert!((up - 1.366_022_805_704_33).abs() < 1e-12);
        assert!((down + 0.366_022_805_704_330).abs() < 1e-12);
        assert!(el_residual(-0.003, up, -0.001).abs() < 1e-16);
        assert!(el_residual(-0.003, down, -0.001).abs() < 1e-16);
        let slow = pdot_branch(-0.003, -1e-300, BranchKind::HotPlus).unwrap();
        assert!(slow > 0.0 && slow < 1e-148);
    }

    #[test]
    fn branch_rate_errors() {
        assert_eq!(
            pdot_branch(-0.003, -0.003, BranchKind::HotPlus),
            Err(Error::Singular(-0.003))
        );
        assert!(pdot_branch(-0.003, 0.0, BranchKind::HotPlus).is_err());
        assert!(pdot_branch(-0.003, -0.01, BranchKind::HotPlus).is_err());
        // K p (K p + 1 - p²) < 0 for p beyond ±1.
        assert!(pdot_branch(-2.0, -0.5, BranchKind::ColdMinus).is_err());
    }

    #[test]
    fn cold_rate_is_continuous_through_pole() {
        let p = -0.002;
        let below = pdot_branch(p, p * (1.0 + 1e-9), BranchKind::ColdMinus).unwrap();
        let above = pdot_branch(p, p * (1.0 - 1e-9), BranchKind::ColdMinus).unwrap();
        assert!((below - above).abs() < 1e-8);
        assert!((above - 0.5 * (p * p - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn branch_validation() {
        let params = reference_params();
        let b = cycle_boundaries(&params).unwrap();
        let th = params.hot_effective();
        assert!(ELBranch::for_stroke(b.p1 * 1.01, BranchKind::HotPlus, &b, th).is_err());
        assert!(ELBranch::for_stroke(1e-4, BranchKind::HotPlus, &b, th).is_err());
        assert!(ELBranch::new(-1e-4, BranchKind::HotPlus, th, b.p1, b.p0).is_err());
        assert!(ELBranch::new(-1e-4, BranchKind::ColdMinus, th, b.p0, b.p1).is_err());
    }

    #[test]
    fn duration_scales_inversely_with_gamma() {
        let el = hot_branch(-1e-4);
        let t1 = duration_integral(&el, 0.005).unwrap();
        let t2 = duration_integral(&el, 0.0025).unwrap();
        assert!((t2 / t1 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn duration_diverges_as_k_vanishes() {
        let mut last = 0.0;
        for k in [-1e-4, -1e-6, -1e-8, -1e-10] {
            let t = duration_integral(&hot_branch(k), 0.005).unwrap();
            assert!(t > 10.0 * last);
            last = t;
        }
    }

    #[test]
    fn solve_round_trip_both_branches() {
        let params = reference_params();
        let b = cycle_boundaries(&params).unwrap();
        for (branch, t_eff) in [
            (BranchKind::HotPlus, params.hot_effective()),
            (BranchKind::ColdMinus, params.cold_effective()),
        ] {
            for target in [0.7, 1.0, 3.0, 40.0, 1e3, 1e6] {
                let el = solve_k_for_duration(target, branch, &b, 0.005, t_eff).unwrap();
                let t = duration_integral(&el, 0.005).unwrap();
                assert!((t / target - 1.0).abs() < 1e-10, "{branch} {target}: {t}");
            }
        }
    }

    #[test]
    fn longer_target_means_smaller_k() {
        let params = reference_params();
        let b = cycle_boundaries(&params).unwrap();
        let mut last = f64::INFINITY;
        for target in [0.65, 1.2, 2.4, 4.8, 9.6, 19.2] {
            let el = solve_k_for_duration(
                target,
                BranchKind::HotPlus,
                &b,
                0.005,
                params.hot_effective(),
            )
            .unwrap();
            assert!(el.k().abs() < last);
            last = el.k().abs();
        }
    }

    #[test]
    fn too_short_target_is_infeasible() {
        let params = reference_params();
        let b = cycle_boundaries(&params).unwrap();
        let r = solve_k_for_duration(1e-4, BranchKind::HotPlus, &b, 0.005, params.hot_effective());
        assert!(matches!(r, Err(Error::InfeasibleDuration { .. })));
    }

    #[test]
    fn duration_monotone_over_bracket() {
        let params = reference_params();
        let b = cycle_boundaries(&params).unwrap();
        for (branch, t_eff) in [
            (BranchKind::HotPlus, params.hot_effective()),
            (BranchKind::ColdMinus, params.cold_effective()),
        ] {
            let scan = duration_scan(branch, &b, t_eff, 1e-12, 120).unwrap();
            for w in scan.windows(2) {
                assert!(w[1].1 < w[0].1, "{branch}: {:?} -> {:?}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn quasi_static_heat_limits() {
        let params = reference_params();
        let b = cycle_boundaries(&params).unwrap();
        let qh = heat_quadrature(&hot_branch(-1e-14)).unwrap();
        let qc = heat_quadrature(&cold_branch(-1e-14)).unwrap();
        let q0h = params.hot_effective() * b.delta_s;
        let q0c = -params.cold_effective() * b.delta_s;
        assert!((qh / q0h - 1.0).abs() < 1e-5);
        assert!((qc / q0c - 1.0).abs() < 1e-5);
        assert!(qh < q0h && qc < q0c);
    }

    #[test]
    fn finite_duration_heat_has_negative_first_order_term() {
        let params = reference_params();
        let b = cycle_boundaries(&params).unwrap();
        let q0 = params.hot_effective() * b.delta_s;
        let th = params.hot_effective();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for target in [200.0, 400.0, 800.0, 1600.0, 3200.0] {
            let el = solve_k_for_duration(target, BranchKind::HotPlus, &b, 0.005, th).unwrap();
            let q = heat_quadrature(&el).unwrap();
            assert!(q < q0);
            xs.push(1.0 / target);
            ys.push(q);
        }
        let (_, q1, _) = crate::numerics::fit_line(&xs, &ys).unwrap();
        assert!(q1 < 0.0);
    }

    #[test]
    fn trace_invariants() {
        let el = hot_branch(-1.3e-4);
        let trace = reconstruct_protocol(&el, 0.005, DEFAULT_SAMPLES).unwrap();
        assert_eq!(trace.samples.len(), DEFAULT_SAMPLES);
        for w in trace.samples.windows(2) {
            assert!(w[1].p > w[0].p && w[1].t > w[0].t);
        }
        let end = trace.samples.last().unwrap();
        assert_eq!(end.p, el.p_end());
        let t = duration_integral(&el, 0.005).unwrap();
        assert!((end.t / t - 1.0).abs() < 1e-10);
        assert!(trace.jump_start.magnitude() > 0.0 && trace.jump_end.magnitude() > 0.0);
        assert!((trace.jump_start.from - 5.0).abs() < 1e-10);
        assert!((trace.jump_end.to - 3.0).abs() < 1e-10);
    }

    #[test]
    fn trace_recovers_branch_rate_and_branch_population() {
        let params = reference_params();
        for el in [hot_branch(-1.3e-4), cold_branch(-3.8e-4)] {
            let trace = reconstruct_protocol(&el, params.gamma, 256).unwrap();
            for s in &trace.samples[1..trace.samples.len() - 1] {
                let rate = master_rhs(s.p, s.gap, el.t_eff(), params.gamma).unwrap() / params.gamma;
                assert!(el_residual(s.p, rate, el.k()).abs() < 1e-9);
                assert!(quadratic_identity_residual(s.p, s.gap, el.t_eff(), el.k()).abs() < 1e-9);
                let p = population_on_branch(s.gap, el.t_eff(), el.k(), el.branch());
                assert!((p - s.p).abs() < 1e-8, "{:?}: {p} vs {}", el.branch(), s.p);
            }
        }
    }

    #[test]
    fn jumps_shrink_towards_quasi_static_limit() {
        let mut last = (f64::INFINITY, f64::INFINITY);
        for k in [-1e-4, -1e-5, -1e-6, -1e-7] {
            let j = hot_branch(k).jump_magnitudes().unwrap();
            assert!(j.0 < last.0 && j.1 < last.1);
            last = j;
        }
        assert!(last.0 < 1e-1 && last.1 < 1e-1);
    }

    #[test]
    fn reconstruct_rejects_bad_sample_count() {
        assert!(reconstruct_protocol(&hot_branch(-1e-4), 0.005, 1).is_err());
    }
}
