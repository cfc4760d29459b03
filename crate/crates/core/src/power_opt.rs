//! Power maximization over the two stroke durations.
//!
//! The search runs directly on the Euler-Lagrange constants `(K_H, K_C)`:
//! each objective evaluation is then two duration quadratures and two heat
//! quadratures, with no root finding inside the loop. Durations only enter
//! as `Γ t`, so the objective optimized here is the Γ-free reduced power
//! `(Q_H + Q_C) / (Γ t_H + Γ t_C)`; the physical power is `Γ` times it.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use crate::bath_thermo::{
    emp_bounds, generalized_carnot, low_dissipation_optimum, standard_carnot, EmpBounds,
    LowDissipationCoefficients,
};
use crate::error::{Error, Result};
use crate::numerics::fit_line;
use crate::optimal_protocol::{
    duration_integral, heat_quadrature, reduced_duration, solve_k_for_duration, BranchKind,
    ELBranch,
};
use crate::spin_engine::{cycle_boundaries, CycleBoundaries, EngineParams};

/// Relative tolerance on the maximal power.
pub const POWER_REL_TOL: f64 = 1e-10;
/// Relative tolerance on the optimal durations.
pub const OPT_DURATION_REL_TOL: f64 = 1e-6;
/// Allowed excursion of the EMP beyond its bounds.
pub const BOUND_SLACK: f64 = 1e-9;

/// Default `T_C` sweep (meV) and point count.
pub const SWEEP_T_COLD_MIN: f64 = 8.6;
pub const SWEEP_T_COLD_MAX: f64 = 24.94;
pub const SWEEP_STEPS: usize = 20;

/// `Γ t` grid used for the low-dissipation fits.
pub const FIT_REDUCED_DURATIONS: [f64; 8] = [
    10.0,
    19.306_977_288_832_5,
    37.275_937_203_149_4,
    71.968_567_300_115_2,
    138.949_549_437_313_7,
    268.269_579_527_972_6,
    517.947_467_923_121,
    1000.0,
];

const MAX_ROUNDS: u64 = 200;
const GOLDEN_TOL: f64 = 1e-11;
const ROUND_VALUE_TOL: f64 = 1e-14;
const ROUND_PARAM_TOL: f64 = 1e-9;

/// Maximum-power operating point of the spin engine with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub t_hot_star: f64,
    pub t_cold_star: f64,
    pub k_hot: f64,
    pub k_cold: f64,
    pub q_hot: f64,
    pub q_cold: f64,
    pub power_star: f64,
    pub emp: f64,
    pub eta_s: f64,
    pub eta_c: f64,
    pub bounds: EmpBounds,
    /// `K_H / K_C`.
    pub k_ratio: f64,
    /// `t_H* / t_C*`.
    pub duration_ratio: f64,
    pub q1_hot_fit: f64,
    pub q1_cold_fit: f64,
    /// `(-Γ K_H T_H^e - P*) / P*`: zero at an interior stationary point.
    pub stationarity_hot: f64,
    /// `(-Γ K_C T_C^e - P*) / P*`.
    pub stationarity_cold: f64,
    pub warnings: Vec<String>,
}

impl OptimumReport {
    pub fn within_bounds(&self) -> bool {
        self.bounds.contains(self.emp, BOUND_SLACK)
    }
}

/// Heat and `Γ t` of one stroke at a given `K`.
#[derive(Debug, Clone, Copy)]
struct Stroke {
    el: ELBranch,
    reduced_duration: f64,
    heat: f64,
}

/// Everything about the engine that the Γ-free objective needs.
#[derive(Debug, Clone, Copy)]
struct Cycle {
    boundaries: CycleBoundaries,
    t_hot: f64,
    t_cold: f64,
}

impl Cycle {
    fn new(params: &EngineParams) -> Result<Self> {
        Ok(Self {
            boundaries: cycle_boundaries(params)?,
            t_hot: params.hot_effective(),
            t_cold: params.cold_effective(),
        })
    }

    fn t_eff(&self, branch: BranchKind) -> f64 {
        match branch {
            BranchKind::HotPlus => self.t_hot,
            BranchKind::ColdMinus => self.t_cold,
        }
    }

    fn stroke(&self, k: f64, branch: BranchKind) -> Result<Stroke> {
        let el = ELBranch::for_stroke(k, branch, &self.boundaries, self.t_eff(branch))?;
        Ok(Stroke {
            el,
            reduced_duration: reduced_duration(&el)?,
            heat: heat_quadrature(&el)?,
        })
    }

    /// Largest admissible `ln|K|` (fastest stroke).
    fn log_k_fast(&self, branch: BranchKind) -> f64 {
        (-branch.k_bracket(&self.boundaries).0).ln()
    }
}

fn reduced_power(hot: &Stroke, cold: &Stroke) -> f64 {
    (hot.heat + cold.heat) / (hot.reduced_duration + cold.reduced_duration)
}

/// Power `(Q_H + Q_C) / (t_H + t_C)` of the cycle run with optimal strokes
/// of the given durations.
pub fn power_at(t_hot: f64, t_cold: f64, params: &EngineParams) -> Result<f64> {
    let b = cycle_boundaries(params)?;
    let hot = solve_k_for_duration(
        t_hot,
        BranchKind::HotPlus,
        &b,
        params.gamma,
        params.hot_effective(),
    )?;
    let cold = solve_k_for_duration(
        t_cold,
        BranchKind::ColdMinus,
        &b,
        params.gamma,
        params.cold_effective(),
    )?;
    let q = heat_quadrature(&hot)? + heat_quadrature(&cold)?;
    let t = duration_integral(&hot, params.gamma)? + duration_integral(&cold, params.gamma)?;
    Ok(q / t)
}

/// Result of fitting `Q(t) = q0 + q1 / t` to optimal-stroke heats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowDissipationFit {
    pub q0: f64,
    pub q1: f64,
    pub rms_residual: f64,
    /// `±T^e ΔS`, the quasi-static heat the intercept should reproduce.
    pub q0_expected: f64,
}

impl LowDissipationFit {
    /// Dissipative coefficient `Σ = -q1 / T^e`.
    pub fn sigma(&self, t_eff: f64) -> f64 {
        -self.q1 / t_eff
    }
}

/// Least-squares fit of the optimal-stroke heat against `1/t` over
/// `durations`, which must all lie in the small-|K| regime. Fails when the
/// residual is not small against the `1/t` variation being fitted.
pub fn fit_low_dissipation(
    params: &EngineParams,
    branch: BranchKind,
    durations: &[f64],
) -> Result<LowDissipationFit> {
    let fit = fit_heats(params, branch, durations)?;
    let (lo, hi) = durations
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(l, h), &t| (l.min(t), h.max(t)));
    let signal = fit.q1.abs() * (1.0 / lo - 1.0 / hi);
    if !(fit.rms_residual <= 1e-2 * signal) {
        return Err(Error::Numerical(format!(
            "low-dissipation fit is poorly conditioned: rms residual {} against a 1/t signal of {signal}",
            fit.rms_residual
        )));
    }
    Ok(fit)
}

fn fit_heats(
    params: &EngineParams,
    branch: BranchKind,
    durations: &[f64],
) -> Result<LowDissipationFit> {
    if durations.len() < 4 {
        return Err(Error::Domain(format!(
            "low-dissipation fit needs at least 4 durations, got {}",
            durations.len()
        )));
    }
    let cycle = Cycle::new(params)?;
    let t_eff = cycle.t_eff(branch);
    let p_scale = cycle.boundaries.p0.abs().min(cycle.boundaries.p1.abs());
    let mut xs = Vec::with_capacity(durations.len());
    let mut ys = Vec::with_capacity(durations.len());
    for &t in durations {
        let el = solve_k_for_duration(t, branch, &cycle.boundaries, params.gamma, t_eff)?;
        if el.k().abs() > 0.1 * p_scale {
            return Err(Error::Domain(format!(
                "duration {t} gives K = {} which is not small against the populations",
                el.k()
            )));
        }
        xs.push(1.0 / t);
        ys.push(heat_quadrature(&el)?);
    }
    let (q0, q1, rms_residual) = fit_line(&xs, &ys)?;
    let sign = match branch {
        BranchKind::HotPlus => 1.0,
        BranchKind::ColdMinus => -1.0,
    };
    Ok(LowDissipationFit {
        q0,
        q1,
        rms_residual,
        q0_expected: sign * t_eff * cycle.boundaries.delta_s,
    })
}

/// Durations of the default fit grid for a given rate constant.
pub fn default_fit_durations(gamma: f64) -> Vec<f64> {
    FIT_REDUCED_DURATIONS.iter().map(|x| x / gamma).collect()
}

struct Axis<'a> {
    cycle: &'a Cycle,
    branch: BranchKind,
    other: Stroke,
}

impl CostFunction for Axis<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, log_k: &f64) -> std::result::Result<f64, ArgminError> {
        Ok(match self.cycle.stroke(-log_k.exp(), self.branch) {
            Ok(s) => match self.branch {
                BranchKind::HotPlus => -reduced_power(&s, &self.other),
                BranchKind::ColdMinus => -reduced_power(&self.other, &s),
            },
            Err(_) => f64::INFINITY,
        })
    }
}

struct Plane<'a> {
    cycle: &'a Cycle,
}

impl Plane<'_> {
    fn value(&self, log_k: &[f64]) -> Result<f64> {
        let hot = self.cycle.stroke(-log_k[0].exp(), BranchKind::HotPlus)?;
        let cold = self.cycle.stroke(-log_k[1].exp(), BranchKind::ColdMinus)?;
        Ok(reduced_power(&hot, &cold))
    }
}

impl CostFunction for Plane<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, log_k: &Vec<f64>) -> std::result::Result<f64, ArgminError> {
        Ok(self.value(log_k).map_or(f64::INFINITY, |v| -v))
    }
}

fn golden(axis: Axis<'_>, lo: f64, hi: f64, start: f64) -> Result<f64> {
    let start = start.clamp(lo + 1e-9 * (hi - lo), hi - 1e-9 * (hi - lo));
    let solver = GoldenSectionSearch::new(lo, hi)
        .and_then(|s| s.with_tolerance(GOLDEN_TOL))
        .map_err(|e| Error::Numerical(format!("golden section setup: {e}")))?;
    let res = Executor::new(axis, solver)
        .configure(|s| s.param(start).max_iters(400))
        .run()
        .map_err(|e| Error::Numerical(format!("golden section: {e}")))?;
    res.state
        .get_best_param()
        .copied()
        .ok_or_else(|| Error::Numerical("golden section returned no iterate".into()))
}

/// Seeds `(ln|K_H|, ln|K_C|)` from the low-dissipation closed form.
fn seed(
    params: &EngineParams,
    cycle: &Cycle,
    fits: (&LowDissipationFit, &LowDissipationFit),
) -> Result<[f64; 2]> {
    let coeffs = LowDissipationCoefficients::new(fits.0.q1, fits.1.q1, cycle.boundaries.delta_s)?;
    let guess = low_dissipation_optimum(&coeffs, &params.hot, &params.cold)?;
    let mut out = [0.0; 2];
    for (slot, (branch, t)) in out.iter_mut().zip([
        (BranchKind::HotPlus, guess.t_hot),
        (BranchKind::ColdMinus, guess.t_cold),
    ]) {
        *slot = match solve_k_for_duration(
            t,
            branch,
            &cycle.boundaries,
            params.gamma,
            cycle.t_eff(branch),
        ) {
            Ok(el) => (-el.k()).ln(),
            Err(Error::InfeasibleDuration { .. }) => cycle.log_k_fast(branch) - 0.1,
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

/// Locates the maximum power of the engine over both stroke durations.
pub fn maximize_power(params: &EngineParams) -> Result<OptimumReport> {
    let cycle = Cycle::new(params)?;
    let durations = default_fit_durations(params.gamma);
    let fit_hot = fit_heats(params, BranchKind::HotPlus, &durations)?;
    let fit_cold = fit_heats(params, BranchKind::ColdMinus, &durations)?;
    let mut x = seed(params, &cycle, (&fit_hot, &fit_cold))?;

    let hi = [
        cycle.log_k_fast(BranchKind::HotPlus),
        cycle.log_k_fast(BranchKind::ColdMinus),
    ];
    let lo = [x[0].min(hi[0]) - 25.0, x[1].min(hi[1]) - 25.0];
    let plane = Plane { cycle: &cycle };
    let mut value = plane.value(&x).unwrap_or(f64::NEG_INFINITY);
    let mut converged = false;
    for _ in 0..MAX_ROUNDS {
        let prev = (x, value);
        let other = cycle.stroke(-x[1].exp(), BranchKind::ColdMinus)?;
        x[0] = golden(
            Axis {
                cycle: &cycle,
                branch: BranchKind::HotPlus,
                other,
            },
            lo[0],
            hi[0],
            x[0],
        )?;
        let other = cycle.stroke(-x[0].exp(), BranchKind::HotPlus)?;
        x[1] = golden(
            Axis {
                cycle: &cycle,
                branch: BranchKind::ColdMinus,
                other,
            },
            lo[1],
            hi[1],
            x[1],
        )?;
        value = plane.value(&x)?;
        let step = (x[0] - prev.0[0]).abs().max((x[1] - prev.0[1]).abs());
        if (value - prev.1).abs() <= ROUND_VALUE_TOL * value.abs() && step <= ROUND_PARAM_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            message: format!("coordinate search did not settle within {MAX_ROUNDS} rounds"),
            best_k_hot: -x[0].exp(),
            best_k_cold: -x[1].exp(),
            best_value: value * params.gamma,
        });
    }

    // Simplex polish around the coordinate-search optimum.
    let simplex = vec![x.to_vec(), vec![x[0] + 1e-4, x[1]], vec![x[0], x[1] + 1e-4]];
    let polished = NelderMead::new(simplex)
        .with_sd_tolerance(1e-18)
        .map_err(|e| Error::Numerical(format!("simplex setup: {e}")))
        .and_then(|nm| {
            Executor::new(Plane { cycle: &cycle }, nm)
                .configure(|s| s.max_iters(500))
                .run()
                .map_err(|e| Error::Numerical(format!("simplex polish: {e}")))
        })?;
    if let Some(best) = polished.state.get_best_param() {
        if let Ok(v) = plane.value(best) {
            if v > value && best[0] < hi[0] && best[1] < hi[1] {
                x = [best[0], best[1]];
                value = v;
            }
        }
    }
    if !(value > 0.0) {
        return Err(Error::NotConverged {
            message: "no positive-power operating point found".into(),
            best_k_hot: -x[0].exp(),
            best_k_cold: -x[1].exp(),
            best_value: value * params.gamma,
        });
    }

    let hot = cycle.stroke(-x[0].exp(), BranchKind::HotPlus)?;
    let cold = cycle.stroke(-x[1].exp(), BranchKind::ColdMinus)?;
    build_report(params, &cycle, &hot, &cold, &fit_hot, &fit_cold)
}

fn build_report(
    params: &EngineParams,
    cycle: &Cycle,
    hot: &Stroke,
    cold: &Stroke,
    fit_hot: &LowDissipationFit,
    fit_cold: &LowDissipationFit,
) -> Result<OptimumReport> {
    let gamma = params.gamma;
    let t_hot_star = hot.reduced_duration / gamma;
    let t_cold_star = cold.reduced_duration / gamma;
    let power_star = (hot.heat + cold.heat) / (t_hot_star + t_cold_star);
    let eta_s = generalized_carnot(&params.hot, &params.cold)?;
    let (k_hot, k_cold) = (hot.el.k(), cold.el.k());
    let mut warnings = params.warnings();
    for (branch, k) in [
        (BranchKind::HotPlus, k_hot),
        (BranchKind::ColdMinus, k_cold),
    ] {
        if at_fast_edge(cycle, branch, k) {
            warnings.push(format!(
                "{branch} stroke constant {k:e} sits at the fast end of its admissible range: the optimum is constrained"
            ));
        }
    }
    Ok(OptimumReport {
        t_hot_star,
        t_cold_star,
        k_hot,
        k_cold,
        q_hot: hot.heat,
        q_cold: cold.heat,
        power_star,
        emp: (hot.heat + cold.heat) / hot.heat,
        eta_s,
        eta_c: standard_carnot(&params.hot, &params.cold),
        bounds: emp_bounds(eta_s)?,
        k_ratio: k_hot / k_cold,
        duration_ratio: t_hot_star / t_cold_star,
        q1_hot_fit: fit_hot.q1,
        q1_cold_fit: fit_cold.q1,
        stationarity_hot: (-gamma * k_hot * cycle.t_hot - power_star) / power_star,
        stationarity_cold: (-gamma * k_cold * cycle.t_cold - power_star) / power_star,
        warnings,
    })
}

fn at_fast_edge(cycle: &Cycle, branch: BranchKind, k: f64) -> bool {
    (cycle.log_k_fast(branch) - (-k).ln()).abs() < 1e-6
}

impl OptimumReport {
    /// Whether the optimum sits strictly inside the admissible constants,
    /// where `dQ_i/dt_i = P*` holds.
    pub fn is_interior(&self) -> bool {
        !self
            .warnings
            .iter()
            .any(|w| w.contains("optimum is constrained"))
    }
}

/// One row of an EMP-versus-Carnot sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t_cold: f64,
    pub eta_c: f64,
    pub eta_s: f64,
    pub eta_gca: f64,
    pub outcome: Result<OptimumReport>,
}

/// `steps` evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![min],
        n => (0..n)
            .map(|i| {
                if i == n - 1 {
                    max
                } else {
                    min + (max - min) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn sweep_row(template: &EngineParams, t_cold: f64) -> Result<SweepRow> {
    let params = template.with_cold_temperature(t_cold)?;
    let eta_s = generalized_carnot(&params.hot, &params.cold)?;
    Ok(SweepRow {
        t_cold,
        eta_c: standard_carnot(&params.hot, &params.cold),
        eta_s,
        eta_gca: emp_bounds(eta_s)?.eta_gca,
        outcome: maximize_power(&params),
    })
}

/// Optimizes the engine at every cold-bath temperature in `t_cold_range`,
/// on up to `jobs` threads. Rows come back in input order; a failing point
/// is recorded in its row and the sweep carries on.
pub fn emp_vs_carnot_sweep(
    params_template: &EngineParams,
    t_cold_range: &[f64],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    for &t in t_cold_range {
        params_template.with_cold_temperature(t)?;
    }
    let jobs = jobs.clamp(1, t_cold_range.len().max(1));
    let mut rows: Vec<Option<SweepRow>> = vec![None; t_cold_range.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        let Some(&t) = t_cold_range.get(i) else { break };
                        done.push((i, sweep_row(params_template, t)));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, row) in h.join().expect("sweep worker panicked") {
                rows[i] = Some(row.expect("temperatures validated above"));
            }
        }
    });
    Ok(rows
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect())
}
