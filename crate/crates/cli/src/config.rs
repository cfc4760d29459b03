//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tunable_carnot::{Bath, EngineParams};

use crate::CliError;

pub const KEYS: [&str; 10] = [
    "t_hot",
    "t_cold_min",
    "t_cold_max",
    "t_cold_steps",
    "r_hot",
    "r_cold",
    "delta_a",
    "delta_b",
    "gamma",
    "output",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub t_hot: f64,
    pub t_cold_min: f64,
    pub t_cold_max: f64,
    pub t_cold_steps: usize,
    pub r_hot: f64,
    pub r_cold: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    pub gamma: f64,
    pub output: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            t_hot: 25.8,
            t_cold_min: 8.6,
            t_cold_max: 24.94,
            t_cold_steps: 20,
            r_hot: 2.0,
            r_cold: 1.8,
            delta_a: 5.0,
            delta_b: 3.0,
            gamma: 0.005,
            output: None,
        }
    }
}

fn number(key: &str, value: &str) -> Result<f64, CliError> {
    let v: f64 = value
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: '{value}' is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::Usage(format!("{key}: value must be finite")));
    }
    Ok(v)
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "t_hot" => self.t_hot = number(key, value)?,
            "t_cold_min" => self.t_cold_min = number(key, value)?,
            "t_cold_max" => self.t_cold_max = number(key, value)?,
            "t_cold_steps" => {
                self.t_cold_steps = value.parse().map_err(|_| {
                    CliError::Usage(format!(
                        "t_cold_steps: '{value}' is not a non-negative integer"
                    ))
                })?
            }
            "r_hot" => self.r_hot = number(key, value)?,
            "r_cold" => self.r_cold = number(key, value)?,
            "delta_a" => self.delta_a = number(key, value)?,
            "delta_b" => self.delta_b = number(key, value)?,
            "gamma" => self.gamma = number(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown config key '{other}' (expected one of {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("line {}: expected 'key = value'", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(CliError::Usage(format!(
                    "line {}: '{key}' has no value",
                    n + 1
                )));
            }
            self.set(key, value)
                .map_err(|e| CliError::Usage(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Engine at cold-bath temperature `t_cold`.
    pub fn engine(&self, t_cold: f64) -> Result<EngineParams, CliError> {
        let hot = Bath::new(self.t_hot, self.r_hot).map_err(CliError::config)?;
        let cold = Bath::new(t_cold, self.r_cold).map_err(CliError::config)?;
        EngineParams::new(hot, cold, self.delta_a, self.delta_b, self.gamma)
            .map_err(CliError::config)
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("t_hot", self.t_hot.to_string()),
            ("t_cold_min", self.t_cold_min.to_string()),
            ("t_cold_max", self.t_cold_max.to_string()),
            ("t_cold_steps", self.t_cold_steps.to_string()),
            ("r_hot", self.r_hot.to_string()),
            ("r_cold", self.r_cold.to_string()),
            ("delta_a", self.delta_a.to_string()),
            ("delta_b", self.delta_b.to_string()),
            ("gamma", self.gamma.to_string()),
            (
                "output",
                self.output
                    .as_ref()
                    .map_or(String::new(), |p| p.display().to_string()),
            ),
        ]
    }

    /// The resolved config as `# key = value` lines.
    pub fn comment_block(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            if v.is_empty() {
                continue;
            }
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Map<String, serde_json::Value> {
        use serde_json::Value;
        let mut m = serde_json::Map::new();
        for (k, v) in [
            ("t_hot", self.t_hot),
            ("t_cold_min", self.t_cold_min),
            ("t_cold_max", self.t_cold_max),
            ("r_hot", self.r_hot),
            ("r_cold", self.r_cold),
            ("delta_a", self.delta_a),
            ("delta_b", self.delta_b),
            ("gamma", self.gamma),
        ] {
            m.insert(k.into(), Value::from(v));
        }
        m.insert("t_cold_steps".into(), Value::from(self.t_cold_steps));
        m.insert(
            "output".into(),
            self.output
                .as_ref()
                .map_or(Value::Null, |p| Value::from(p.display().to_string())),
        );
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let mut c = Config::default();
        c.apply_text("# comment\n\nt_hot = 30\n gamma=0.01 \nt_cold_steps = 5\noutput = out.csv\n")
            .unwrap();
        assert_eq!(c.t_hot, 30.0);
        assert_eq!(c.gamma, 0.01);
        assert_eq!(c.t_cold_steps, 5);
        assert_eq!(c.output, Some(PathBuf::from("out.csv")));
        assert_eq!(c.r_hot, 2.0);
    }

    #[test]
    fn rejects_malformed_lines() {
        let mut c = Config::default();
        assert!(matches!(c.apply_text("t_hot 30"), Err(CliError::Usage(_))));
        assert!(matches!(
            c.apply_text("t_hot = hot"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            c.apply_text("t_warm = 3"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            c.apply_text("t_cold_steps = -1"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(c.apply_text("gamma ="), Err(CliError::Usage(_))));
        assert!(matches!(
            c.apply_text("gamma = inf"),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn comment_block_round_trips() {
        let c = Config {
            gamma: 0.01,
            output: Some("x.csv".into()),
            ..Config::default()
        };
        let text: String = c
            .comment_block()
            .lines()
            .map(|l| l.trim_start_matches("# ").to_string() + "\n")
            .collect();
        let mut back = Config::default();
        back.apply_text(&text).unwrap();
        assert_eq!(back, c);
    }
}
