use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use tunable_carnot::bath_thermo::{emp_bounds, generalized_carnot};
use tunable_carnot::optimal_protocol::{reconstruct_protocol, solve_k_for_duration};
use tunable_carnot::power_opt::{emp_vs_carnot_sweep, linspace, maximize_power, BOUND_SLACK};
use tunable_carnot::spin_engine::cycle_boundaries;
use tunable_carnot::verify_oracle::{audit_cycle_default, quasi_static_audit};
use tunable_carnot::{Bath, BranchKind, ELBranch, OptimumReport};

use crate::config::Config;
use crate::CliError;

/// Text produced by a command plus whether every check in it passed.
pub struct Output {
    pub text: String,
    pub ok: bool,
}

fn sci(x: f64) -> String {
    format!("{x:.14e}")
}

fn csv_row(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| sci(*v)).collect();
    cells.join(",")
}

pub fn bounds(cfg: &Config, ratios: &[f64], eta_points: usize) -> Result<Output, CliError> {
    if eta_points < 2 {
        return Err(CliError::Usage("eta-points must be at least 2".into()));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(CliError::Usage(
            "ratios must be finite and non-negative".into(),
        ));
    }
    let mut text = cfg.comment_block();
    let _ = writeln!(
        text,
        "# ratios = {}",
        ratios
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    );
    text.push_str("eta_c,ratio,eta_s,eta_min,eta_max\n");
    let hot = Bath::new(1.0, cfg.r_hot).map_err(CliError::config)?;
    for &ratio in ratios {
        for i in 0..eta_points {
            let eta_c = i as f64 / eta_points as f64;
            let cold = Bath::new(1.0 - eta_c, ratio * cfg.r_hot).map_err(CliError::config)?;
            let eta_s = if eta_c == 0.0 && ratio == 1.0 {
                0.0
            } else {
                generalized_carnot(&hot, &cold).map_err(CliError::config)?
            };
            let b = emp_bounds(eta_s)?;
            let _ = writeln!(
                text,
                "{}",
                csv_row(&[eta_c, ratio, eta_s, b.eta_min, b.eta_max])
            );
        }
    }
    Ok(Output { text, ok: true })
}

fn flat_report(cfg: &Config, t_cold: f64, r: &OptimumReport) -> Result<Value, CliError> {
    let mut m = cfg.to_json();
    m.insert("t_cold".into(), Value::from(t_cold));
    let Value::Object(fields) = serde_json::to_value(r).map_err(CliError::internal)? else {
        return Err(CliError::internal("report did not serialize to an object"));
    };
    for (k, v) in fields {
        if k != "bounds" {
            m.insert(k, v);
        }
    }
    m.insert("eta_min".into(), Value::from(r.bounds.eta_min));
    m.insert("eta_max".into(), Value::from(r.bounds.eta_max));
    m.insert("eta_gca".into(), Value::from(r.bounds.eta_gca));
    Ok(Value::Object(m))
}

fn pretty(v: &Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(CliError::internal)?;
    s.push('\n');
    Ok(s)
}

pub fn optimize(cfg: &Config, t_cold: f64) -> Result<Output, CliError> {
    let params = cfg.engine(t_cold)?;
    for w in params.warnings() {
        eprintln!("warning: {w}");
    }
    let report = maximize_power(&params)?;
    Ok(Output {
        text: pretty(&flat_report(cfg, t_cold, &report)?)?,
        ok: true,
    })
}

pub const SWEEP_COLUMNS: &str = "T_C,eta_c,eta_s,emp,eta_gca,eta_min,eta_max,t_hot_star,t_cold_star,k_hot,k_cold,q_hot,q_cold,power_star";

pub fn sweep(cfg: &Config, jobs: usize) -> Result<Output, CliError> {
    if cfg.t_cold_steps == 0 {
        return Err(CliError::Usage("t_cold_steps must be at least 1".into()));
    }
    if jobs == 0 {
        return Err(CliError::Usage("jobs must be at least 1".into()));
    }
    let template = cfg.engine(cfg.t_cold_min)?;
    for w in template.warnings() {
        eprintln!("warning: {w}");
    }
    let temps = linspace(cfg.t_cold_min, cfg.t_cold_max, cfg.t_cold_steps);
    let rows = emp_vs_carnot_sweep(&template, &temps, jobs).map_err(CliError::config)?;
    let mut text = cfg.comment_block();
    let mut body = String::new();
    let mut ok = true;
    for row in &rows {
        let fields = match &row.outcome {
            Ok(r) => [
                r.emp,
                row.eta_gca,
                r.bounds.eta_min,
                r.bounds.eta_max,
                r.t_hot_star,
                r.t_cold_star,
                r.k_hot,
                r.k_cold,
                r.q_hot,
                r.q_cold,
                r.power_star,
            ],
            Err(e) => {
                ok = false;
                eprintln!("T_C = {}: {e}", row.t_cold);
                let _ = writeln!(text, "# failed T_C = {}: {e}", row.t_cold);
                let b = emp_bounds(row.eta_s)?;
                let n = f64::NAN;
                [n, row.eta_gca, b.eta_min, b.eta_max, n, n, n, n, n, n, n]
            }
        };
        let mut values = vec![row.t_cold, row.eta_c, row.eta_s];
        values.extend_from_slice(&fields);
        let _ = writeln!(body, "{}", csv_row(&values));
    }
    text.push_str(SWEEP_COLUMNS);
    text.push('\n');
    text.push_str(&body);
    Ok(Output { text, ok })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BranchArg {
    Hot,
    Cold,
}

impl From<BranchArg> for BranchKind {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Hot => BranchKind::HotPlus,
            BranchArg::Cold => BranchKind::ColdMinus,
        }
    }
}

pub enum Selector {
    Optimal,
    K(f64),
    Duration(f64),
}

pub fn protocol(
    cfg: &Config,
    t_cold: f64,
    branch: BranchArg,
    selector: Selector,
    samples: usize,
) -> Result<Output, CliError> {
    if samples < 2 {
        return Err(CliError::Usage("samples must be at least 2".into()));
    }
    let params = cfg.engine(t_cold)?;
    let branch = BranchKind::from(branch);
    let t_eff = match branch {
        BranchKind::HotPlus => params.hot_effective(),
        BranchKind::ColdMinus => params.cold_effective(),
    };
    let b = cycle_boundaries(&params)?;
    let el = match selector {
        Selector::Optimal => {
            let r = maximize_power(&params)?;
            let k = match branch {
                BranchKind::HotPlus => r.k_hot,
                BranchKind::ColdMinus => r.k_cold,
            };
            ELBranch::for_stroke(k, branch, &b, t_eff)?
        }
        Selector::K(k) => ELBranch::for_stroke(k, branch, &b, t_eff).map_err(CliError::config)?,
        Selector::Duration(t) => solve_k_for_duration(t, branch, &b, params.gamma, t_eff)?,
    };
    let trace = reconstruct_protocol(&el, params.gamma, samples)?;
    let mut text = cfg.comment_block();
    let _ = writeln!(text, "# t_cold = {t_cold}");
    let _ = writeln!(text, "# branch = {branch}");
    let _ = writeln!(text, "# k = {}", sci(trace.k));
    let _ = writeln!(text, "# t_eff = {}", sci(trace.t_eff));
    let _ = writeln!(
        text,
        "# jump_start = {},{}",
        sci(trace.jump_start.from),
        sci(trace.jump_start.to)
    );
    let _ = writeln!(
        text,
        "# jump_end = {},{}",
        sci(trace.jump_end.from),
        sci(trace.jump_end.to)
    );
    text.push_str("t,p,gap\n");
    for s in &trace.samples {
        let _ = writeln!(text, "{}", csv_row(&[s.t, s.p, s.gap]));
    }
    Ok(Output { text, ok: true })
}

/// Reduced durations `Γ t` of the quasi-static audit grid.
pub const QUASI_STATIC_GRID: [f64; 9] = [
    0.5,
    1.58113883008419,
    5.0,
    15.8113883008419,
    50.0,
    158.113883008419,
    500.0,
    1581.13883008419,
    5000.0,
];

pub fn verify(cfg: &Config, t_cold: f64) -> Result<Output, CliError> {
    let params = cfg.engine(t_cold)?;
    let report = maximize_power(&params)?;
    let cycle = audit_cycle_default(&params, report.k_hot, report.k_cold)?;
    let grid: Vec<f64> = QUASI_STATIC_GRID.iter().map(|x| x / params.gamma).collect();
    let qs = quasi_static_audit(&params, &grid)?;
    let power_dev = (cycle.power_ode / report.power_star - 1.0).abs();
    let checks: Vec<(&str, bool)> = vec![
        (
            "emp_within_bounds",
            report.bounds.contains(report.emp, BOUND_SLACK),
        ),
        ("hot_heat_oracle", cycle.hot.heat_rel_diff <= 1e-6),
        ("cold_heat_oracle", cycle.cold.heat_rel_diff <= 1e-6),
        ("energy_audit", cycle.energy_residual_rel.abs() < 1e-10),
        ("power_oracle", power_dev <= 1e-6),
        ("quasi_static_efficiency", qs.efficiency_gap < 1e-3),
        ("efficiency_monotone", qs.efficiency_monotone),
        ("power_vanishes", qs.power_decreasing),
        ("negative_q1", qs.q1_hot < 0.0 && qs.q1_cold < 0.0),
        ("second_order_remainder", qs.remainder_exponent <= -1.9),
    ];
    let ok = checks.iter().all(|(_, pass)| *pass);
    let mut check_map = Map::new();
    for (name, pass) in &checks {
        check_map.insert((*name).into(), Value::from(*pass));
        if !pass {
            eprintln!("check failed: {name}");
        }
    }
    let value = json!({
        "config": Value::Object(cfg.to_json()),
        "t_cold": t_cold,
        "optimum": flat_report(cfg, t_cold, &report)?,
        "cycle": serde_json::to_value(&cycle).map_err(CliError::internal)?,
        "power_rel_diff": power_dev,
        "quasi_static": serde_json::to_value(&qs).map_err(CliError::internal)?,
        "checks": Value::Object(check_map),
        "passed": ok,
    });
    Ok(Output {
        text: pretty(&value)?,
        ok,
    })
}
