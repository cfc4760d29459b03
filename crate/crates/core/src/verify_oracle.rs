//! Brute-force checks: direct integration of the relaxation equation under a
//! reconstructed protocol, first-law audits over a full cycle and the
//! quasi-static limit.

use serde::{Deserialize, Serialize};

use crate::bath_thermo::generalized_carnot;
use crate::error::{Error, Result};
use crate::numerics::fit_line;
use crate::optimal_protocol::{
    heat_quadrature, reconstruct_protocol, reduced_duration, solve_k_for_duration, BranchKind,
    ELBranch, ProtocolTrace, DEFAULT_SAMPLES,
};
use crate::spin_engine::{
    cycle_boundaries, entropy, internal_energy, master_rhs, sudden_quench_work, EngineParams,
};

/// Relative heat change under step halving that counts as converged.
pub const STEP_REL_TOL: f64 = 1e-8;
/// Number of step halvings tried before giving up.
pub const MAX_HALVINGS: u32 = 14;

/// Outcome of integrating the relaxation equation along a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterIntegration {
    pub p_final: f64,
    /// Heat absorbed, `∫ Δ ṗ / 2 dt`.
    pub heat: f64,
    /// Work done on the spin, `∫ Δ̇ p / 2 dt`.
    pub work: f64,
    /// Step that met the refinement contract.
    pub step: f64,
}

#[derive(Clone, Copy)]
struct State {
    p: f64,
    heat: f64,
    work: f64,
}

fn rates(p: f64, gap: f64, gap_rate: f64, t_eff: f64, gamma: f64) -> Result<State> {
    let pd = master_rhs(p, gap, t_eff, gamma)?;
    Ok(State {
        p: pd,
        heat: 0.5 * gap * pd,
        work: 0.5 * gap_rate * p,
    })
}

fn sweep(trace: &ProtocolTrace, t_eff: f64, gamma: f64, step: f64) -> Result<State> {
    let mut s = State {
        p: trace.samples[0].p,
        heat: 0.0,
        work: 0.0,
    };
    for seg in trace.samples.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let dt = b.t - a.t;
        if !(dt > 0.0) {
            continue;
        }
        let slope = (b.gap - a.gap) / dt;
        let n = (dt / step).ceil().max(1.0) as usize;
        let h = dt / n as f64;
        for j in 0..n {
            let g0 = a.gap + slope * (j as f64 * h);
            let gm = g0 + 0.5 * h * slope;
            let g1 = g0 + h * slope;
            let k1 = rates(s.p, g0, slope, t_eff, gamma)?;
            let k2 = rates(s.p + 0.5 * h * k1.p, gm, slope, t_eff, gamma)?;
            let k3 = rates(s.p + 0.5 * h * k2.p, gm, slope, t_eff, gamma)?;
            let k4 = rates(s.p + h * k3.p, g1, slope, t_eff, gamma)?;
            let w = h / 6.0;
            s.p += w * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
            s.heat += w * (k1.heat + 2.0 * k2.heat + 2.0 * k3.heat + k4.heat);
            s.work += w * (k1.work + 2.0 * k2.work + 2.0 * k3.work + k4.work);
        }
    }
    if !(s.p.is_finite() && s.heat.is_finite() && s.work.is_finite()) {
        return Err(Error::Numerical(
            "master-equation integration diverged".into(),
        ));
    }
    Ok(s)
}

/// Integrates `dp/dt` from the first trace sample with classic RK4, the gap
/// varying linearly between consecutive samples. The step is halved until
/// the heat moves by less than [`STEP_REL_TOL`] relative.
pub fn integrate_master(
    trace: &ProtocolTrace,
    t_eff: f64,
    gamma: f64,
    step: f64,
) -> Result<MasterIntegration> {
    if trace.samples.len() < 2 {
        return Err(Error::Domain("trace needs at least two samples".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    if !(t_eff > 0.0 && gamma > 0.0) {
        return Err(Error::Domain(format!(
            "temperature {t_eff} and rate {gamma} must be positive"
        )));
    }
    let mut h = step;
    let mut prev = sweep(trace, t_eff, gamma, h)?;
    for _ in 0..MAX_HALVINGS {
        h *= 0.5;
        let next = sweep(trace, t_eff, gamma, h)?;
        let scale = next.heat.abs().max(f64::MIN_POSITIVE);
        if (next.heat - prev.heat).abs() <= STEP_REL_TOL * scale
            || (next.heat - prev.heat).abs() <= 1e-15
        {
            return Ok(MasterIntegration {
                p_final: next.p,
                heat: next.heat,
                work: next.work,
                step: h,
            });
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "heat did not settle under step halving down to {h}"
    )))
}

/// Starting step for a trace: one RK4 step per segment.
pub fn default_step(trace: &ProtocolTrace) -> f64 {
    trace.duration() / (trace.samples.len().max(2) - 1) as f64
}

/// Quadrature versus direct integration for one stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeAudit {
    pub branch: BranchKind,
    pub k: f64,
    pub duration: f64,
    pub heat_quadrature: f64,
    pub heat_ode: f64,
    pub heat_rel_diff: f64,
    pub work_ode: f64,
    pub p_end: f64,
    pub p_final_ode: f64,
    pub jump_start: f64,
    pub jump_end: f64,
}

/// Reconstructs the optimal stroke and integrates it directly.
pub fn audit_stroke(el: &ELBranch, gamma: f64, n_samples: usize) -> Result<StrokeAudit> {
    let trace = reconstruct_protocol(el, gamma, n_samples)?;
    let ode = integrate_master(&trace, el.t_eff(), gamma, default_step(&trace))?;
    stroke_audit(el, &trace, &ode)
}

/// Energy bookkeeping for one closed cycle run on the optimal strokes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleAudit {
    pub hot: StrokeAudit,
    pub cold: StrokeAudit,
    /// Work done on the spin by the four endpoint jumps.
    pub jump_work: f64,
    /// Work done on the spin by the two adiabats.
    pub adiabat_work: f64,
    /// Total work extracted over the cycle.
    pub work_output: f64,
    /// `Q_H + Q_C` from direct integration.
    pub net_heat: f64,
    /// Change of internal energy around the cycle minus all heat and work
    /// exchanged; zero for exact bookkeeping.
    pub energy_residual: f64,
    /// `energy_residual / Q_H`.
    pub energy_residual_rel: f64,
    /// Population change across each adiabat (zero by construction).
    pub adiabat_population_change: [f64; 2],
    /// Entropy change across each adiabat.
    pub adiabat_entropy_change: [f64; 2],
    /// Power from the integrated heats over the quadrature durations.
    pub power_ode: f64,
    /// Power from the quadrature heats.
    pub power_quadrature: f64,
}

/// Runs the cycle with Euler-Lagrange constants `(k_hot, k_cold)`: hot
/// stroke, adiabat, cold stroke, adiabat, each isotherm bracketed by its
/// endpoint jumps.
pub fn audit_cycle(
    params: &EngineParams,
    k_hot: f64,
    k_cold: f64,
    n_samples: usize,
) -> Result<CycleAudit> {
    let b = cycle_boundaries(params)?;
    let gamma = params.gamma;
    let hot_el = ELBranch::for_stroke(k_hot, BranchKind::HotPlus, &b, params.hot_effective())?;
    let cold_el = ELBranch::for_stroke(k_cold, BranchKind::ColdMinus, &b, params.cold_effective())?;
    let hot_trace = reconstruct_protocol(&hot_el, gamma, n_samples)?;
    let cold_trace = reconstruct_protocol(&cold_el, gamma, n_samples)?;
    let hot_ode = integrate_master(
        &hot_trace,
        params.hot_effective(),
        gamma,
        default_step(&hot_trace),
    )?;
    let cold_ode = integrate_master(
        &cold_trace,
        params.cold_effective(),
        gamma,
        default_step(&cold_trace),
    )?;

    // Start at the hot-stroke corner and carry the integrated population
    // round the loop.
    let corner_hot_start = hot_trace.jump_start.from;
    let corner_hot_end = hot_trace.jump_end.to;
    let corner_cold_start = cold_trace.jump_start.from;
    let corner_cold_end = cold_trace.jump_end.to;
    let p_start = hot_trace.samples[0].p;
    let e_start = internal_energy(corner_hot_start, p_start);

    let mut jump_work = sudden_quench_work(corner_hot_start, hot_trace.jump_start.to, p_start);
    let p_hot = hot_ode.p_final;
    jump_work += sudden_quench_work(hot_trace.jump_end.from, corner_hot_end, p_hot);
    let mut adiabat_work = sudden_quench_work(corner_hot_end, corner_cold_start, p_hot);

    // The cold integration starts from the trace's own start population; the
    // mismatch to the hot end is what the ODE error leaves behind.
    let p_cold_start = cold_trace.samples[0].p;
    jump_work += sudden_quench_work(corner_cold_start, cold_trace.jump_start.to, p_cold_start);
    let p_cold = cold_ode.p_final;
    jump_work += sudden_quench_work(cold_trace.jump_end.from, corner_cold_end, p_cold);
    adiabat_work += sudden_quench_work(corner_cold_end, corner_hot_start, p_cold);
    let e_end = internal_energy(corner_hot_start, p_cold);

    // Energy handed over between strokes at the population seams.
    let seam = internal_energy(corner_cold_start, p_cold_start)
        - internal_energy(corner_cold_start, p_hot);

    let work_on = jump_work + adiabat_work + hot_ode.work + cold_ode.work;
    let net_heat = hot_ode.heat + cold_ode.heat;
    let energy_residual = (e_end - e_start) - (work_on + net_heat + seam);

    let hot = stroke_audit(&hot_el, &hot_trace, &hot_ode)?;
    let cold = stroke_audit(&cold_el, &cold_trace, &cold_ode)?;
    let total_time = hot.duration + cold.duration;
    Ok(CycleAudit {
        jump_work,
        adiabat_work,
        work_output: -work_on,
        net_heat,
        energy_residual,
        energy_residual_rel: energy_residual / hot.heat_ode,
        adiabat_population_change: [0.0, 0.0],
        adiabat_entropy_change: [
            entropy(p_hot)? - entropy(p_hot)?,
            entropy(p_cold)? - entropy(p_cold)?,
        ],
        power_ode: net_heat / total_time,
        power_quadrature: (hot.heat_quadrature + cold.heat_quadrature) / total_time,
        hot,
        cold,
    })
}

fn stroke_audit(
    el: &ELBranch,
    trace: &ProtocolTrace,
    ode: &MasterIntegration,
) -> Result<StrokeAudit> {
    let q = heat_quadrature(el)?;
    Ok(StrokeAudit {
        branch: el.branch(),
        k: el.k(),
        duration: trace.duration(),
        heat_quadrature: q,
        heat_ode: ode.heat,
        heat_rel_diff: (ode.heat - q).abs() / q.abs(),
        work_ode: ode.work,
        p_end: el.p_end(),
        p_final_ode: ode.p_final,
        jump_start: trace.jump_start.to - trace.jump_start.from,
        jump_end: trace.jump_end.to - trace.jump_end.from,
    })
}

/// Cycle audit at the default sample count.
pub fn audit_cycle_default(params: &EngineParams, k_hot: f64, k_cold: f64) -> Result<CycleAudit> {
    audit_cycle(params, k_hot, k_cold, DEFAULT_SAMPLES)
}

/// One point of the quasi-static audit, run with equal stroke durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiStaticPoint {
    pub duration: f64,
    pub q_hot: f64,
    pub q_cold: f64,
    pub efficiency: f64,
    pub power: f64,
}

/// Approach to the reversible limit along a duration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiStaticReport {
    pub points: Vec<QuasiStaticPoint>,
    pub eta_s: f64,
    /// `T_H^e ΔS`.
    pub q_hot_reversible: f64,
    /// `|Q_H / (T_H^e ΔS) - 1|` at the longest duration.
    pub q_hot_rel_gap: f64,
    /// `|η - η_s|` at the longest duration.
    pub efficiency_gap: f64,
    pub efficiency_monotone: bool,
    pub power_decreasing: bool,
    pub q1_hot: f64,
    pub q1_cold: f64,
    /// Log-log slope of the remainder `Q - q0 - q1/t` against `t`, worst
    /// branch. `-2` or below means second-order convergence.
    pub remainder_exponent: f64,
}

/// Runs the engine at equal stroke durations over `duration_grid`.
pub fn quasi_static_audit(
    params: &EngineParams,
    duration_grid: &[f64],
) -> Result<QuasiStaticReport> {
    let (lo, hi) = duration_grid
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(l, h), &t| (l.min(t), h.max(t)));
    if duration_grid.len() < 4 || !(hi >= 100.0 * lo) || !(lo > 0.0) {
        return Err(Error::Domain(
            "duration grid needs at least 4 positive points spanning two decades".into(),
        ));
    }
    let mut grid = duration_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let b = cycle_boundaries(params)?;
    let (th, tc) = (params.hot_effective(), params.cold_effective());
    let mut points = Vec::with_capacity(grid.len());
    for &t in &grid {
        let hot = solve_k_for_duration(t, BranchKind::HotPlus, &b, params.gamma, th)?;
        let cold = solve_k_for_duration(t, BranchKind::ColdMinus, &b, params.gamma, tc)?;
        let q_hot = heat_quadrature(&hot)?;
        let q_cold = heat_quadrature(&cold)?;
        let time = (reduced_duration(&hot)? + reduced_duration(&cold)?) / params.gamma;
        points.push(QuasiStaticPoint {
            duration: t,
            q_hot,
            q_cold,
            efficiency: 1.0 + q_cold / q_hot,
            power: (q_hot + q_cold) / time,
        });
    }
    let eta_s = generalized_carnot(&params.hot, &params.cold)?;
    let q_hot_reversible = th * b.delta_s;
    let last = *points.last().expect("grid is non-empty");

    let mut q1 = [0.0; 2];
    let mut exponent = f64::NEG_INFINITY;
    for (i, (q0, pick)) in [
        (
            q_hot_reversible,
            (|p: &QuasiStaticPoint| p.q_hot) as fn(&QuasiStaticPoint) -> f64,
        ),
        (-tc * b.delta_s, |p: &QuasiStaticPoint| p.q_cold),
    ]
    .into_iter()
    .enumerate()
    {
        // t (Q - q0) = q1 + q2 / t + ...: the intercept is q1.
        let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.duration).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.duration * (pick(p) - q0)).collect();
        let (q1_fit, _, _) = fit_line(&xs, &ys)?;
        q1[i] = q1_fit;
        let (lx, ly): (Vec<f64>, Vec<f64>) = points
            .iter()
            .map(|p| (p.duration.ln(), (pick(p) - q0 - q1_fit / p.duration).abs()))
            .filter(|(_, r)| *r > 0.0)
            .map(|(x, r)| (x, r.ln()))
            .unzip();
        let slope = if lx.len() >= 2 {
            fit_line(&lx, &ly)?.1
        } else {
            f64::NEG_INFINITY
        };
        exponent = exponent.max(slope);
    }

    Ok(QuasiStaticReport {
        eta_s,
        q_hot_reversible,
        q_hot_rel_gap: (last.q_hot / q_hot_reversible - 1.0).abs(),
        efficiency_gap: (last.efficiency - eta_s).abs(),
        efficiency_monotone: points.windows(2).all(|w| w[1].efficiency > w[0].efficiency),
        power_decreasing: points.windows(2).all(|w| w[1].power < w[0].power),
        q1_hot: q1[0],
        q1_cold: q1[1],
        remainder_exponent: exponent,
        points,
    })
}
