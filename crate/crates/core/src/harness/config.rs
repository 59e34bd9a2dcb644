use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{OracleSelection, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Hard,
    Slack,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Hard => "hard",
            Mode::Slack => "slack",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard" => Ok(Mode::Hard),
            "slack" => Ok(Mode::Slack),
            other => Err(format!("unknown mode `{other}` (expected hard or slack)")),
        }
    }
}

/// Experiment description read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub q: f64,
    #[serde(rename = "C", default)]
    pub c: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Total training points; empty selects [`default_budgets`].
    #[serde(default)]
    pub budgets: Vec<usize>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub oracle_selection: OracleSelection,
    #[serde(default = "default_qp_tolerance")]
    pub qp_tolerance: f64,
    /// Test samples per manifold for the generalization error.
    #[serde(default = "default_m_test")]
    pub m_test: usize,
    #[serde(default)]
    pub bias: bool,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

fn default_delta() -> f64 {
    1e-3
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_qp_tolerance() -> f64 {
    1e-8
}

fn default_m_test() -> usize {
    1000
}

/// `P · {1, 2, 5, 10, 20, 50, 100, 200}`
pub fn default_budgets(p: usize) -> Vec<usize> {
    [1, 2, 5, 10, 20, 50, 100, 200].iter().map(|k| k * p).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Parses and validates; parse errors carry serde's line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |field: &str, why: String| Err(ConfigError(format!("config field `{field}`: {why}")));
        if self.n == 0 {
            return fail("N", "must be positive".into());
        }
        if self.d == 0 {
            return fail("D", "must be positive".into());
        }
        if self.p == 0 || self.p % 2 != 0 {
            return fail("P", format!("must be a positive even number, got {}", self.p));
        }
        if !(self.r0 > 0.0) || !self.r0.is_finite() {
            return fail("R0", format!("must be finite and > 0, got {}", self.r0));
        }
        if !(self.q >= 1.0) {
            return fail("q", format!("must be >= 1, got {}", self.q));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail("delta", format!("must lie in (0, 1), got {}", self.delta));
        }
        if !(self.qp_tolerance > 0.0) {
            return fail("qp_tolerance", format!("must be > 0, got {}", self.qp_tolerance));
        }
        if self.seeds.is_empty() {
            return fail("seeds", "at least one seed is required".into());
        }
        if self.m_test == 0 {
            return fail("m_test", "must be positive".into());
        }
        if self.budgets.contains(&0) {
            return fail("budgets", "budgets must be positive".into());
        }
        match (self.mode, self.c) {
            (Mode::Slack, None) => return fail("C", "slack mode needs C".into()),
            (Mode::Slack, Some(c)) if !(c > 0.0) || !c.is_finite() => {
                return fail("C", format!("must be finite and > 0, got {c}"))
            }
            (Mode::Hard, Some(_)) => return fail("C", "hard mode takes no C".into()),
            _ => {}
        }
        Ok(())
    }

    /// Budgets in increasing order, defaults applied.
    pub fn resolved_budgets(&self) -> Vec<usize> {
        let mut b = if self.budgets.is_empty() {
            default_budgets(self.p)
        } else {
            self.budgets.clone()
        };
        b.sort_unstable();
        b.dedup();
        b
    }

    /// Driver settings for one seed.
    pub fn run_config(&self, seed: u64) -> RunConfig {
        RunConfig {
            tolerance: self.delta,
            slack_coefficient: match self.mode {
                Mode::Hard => None,
                Mode::Slack => self.c,
            },
            max_iterations: self.max_iterations,
            qp_tolerance: self.qp_tolerance,
            rng_seed: seed,
            oracle_selection: self.oracle_selection,
            init: Default::default(),
        }
    }

    /// `key=value` pairs with every default filled in.
    pub fn header_lines(&self) -> Vec<String> {
        let sel = match self.oracle_selection {
            OracleSelection::First => "first",
            OracleSelection::Worst => "worst",
        };
        let join = |v: Vec<String>| v.join(";");
        vec![
            format!("N={}", self.n),
            format!("P={}", self.p),
            format!("D={}", self.d),
            format!("R0={}", self.r0),
            format!("q={}", self.q),
            format!("C={}", self.c.map_or("none".to_string(), |c| c.to_string())),
            format!("delta={}", self.delta),
            format!("seeds={}", join(self.seeds.iter().map(u64::to_string).collect())),
            format!("budgets={}", join(self.resolved_budgets().iter().map(usize::to_string).collect())),
            format!("mode={}", self.mode),
            format!("oracle_selection={sel}"),
            format!("qp_tolerance={}", self.qp_tolerance),
            format!("m_test={}", self.m_test),
            format!("bias={}", self.bias),
            format!(
                "max_iterations={}",
                self.max_iterations.map_or("default".to_string(), |m| m.to_string())
            ),
            "init=center".to_string(),
            "sampler=normalized_generalized_gaussian".to_string(),
        ]
    }
}
