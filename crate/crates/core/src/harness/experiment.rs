use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use super::{derive_seed, generate_ensemble, with_bias, ExperimentConfig, Mode};
use crate::baseline::{generalization_error, pooled_samples, train_point_svm};
use crate::cutting_plane::{
    bracket_hard, bracket_slack, centers_of, run_simple_observed, run_slack_observed, RunOutcome,
};
use crate::error::{QpError, RunError};
use crate::oracle::EllipsoidOracle;
use crate::types::{QpSolution, RunStatus, RunTrace, WorkingSet};

pub const RESULTS_HEADER: &str =
    "method,seed,budget,gen_error,iters,objective,bracket_lo,bracket_hi,status,wall_ms";

const TRAIN_TAG: u64 = 1;
const TEST_TAG: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Mcp,
    McpFinal,
    PointSvm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mcp => "mcp",
            Method::McpFinal => "mcp_final",
            Method::PointSvm => "point_svm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub seed: u64,
    /// Training points consumed. For `mcp` rows this is the requested budget
    /// and `iters` tells how many augmentations the iterate had used.
    pub budget: usize,
    pub gen_error: f64,
    pub iters: usize,
    pub objective: f64,
    pub bracket: Option<(f64, f64)>,
    pub status: String,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        let (lo, hi) = self
            .bracket
            .map_or((String::new(), String::new()), |(a, b)| (format!("{a:.17e}"), format!("{b:.17e}")));
        format!(
            "{},{},{},{:.17e},{},{:.17e},{lo},{hi},{},{:.3}",
            self.method, self.seed, self.budget, self.gen_error, self.iters, self.objective, self.status, self.wall_ms
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    /// Cutting-plane trace per seed.
    pub traces: Vec<(u64, RunTrace)>,
    /// Final cutting-plane solution per seed, `None` when infeasible.
    pub solutions: Vec<(u64, Option<QpSolution>)>,
}

impl ExperimentOutput {
    /// Results CSV with the configuration as leading `# key=value` lines.
    pub fn to_csv(&self, config: &ExperimentConfig) -> String {
        let mut out = String::new();
        for line in config.header_lines() {
            out.push_str("# ");
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(RESULTS_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        out
    }
}

struct Snapshot {
    size: usize,
    solution: QpSolution,
    elapsed_ms: f64,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs every seed (in parallel) and returns rows sorted by
/// `(seed, budget, method)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, RunError> {
    config.validate().map_err(|e| RunError::Config(e.0))?;
    let per_seed: Vec<(Vec<ResultRow>, RunTrace, Option<QpSolution>)> = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut solutions = Vec::new();
    for (seed, (r, t, s)) in config.seeds.iter().zip(per_seed) {
        rows.extend(r);
        traces.push((*seed, t));
        solutions.push((*seed, s));
    }
    rows.sort_by(|a, b| (a.seed, a.budget, a.method).cmp(&(b.seed, b.budget, b.method)));
    Ok(ExperimentOutput {
        rows,
        traces,
        solutions,
    })
}

/// One seed: the cutting-plane run, its iterates at each budget, and the
/// point-SVM baseline at each budget.
pub fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(Vec<ResultRow>, RunTrace, Option<QpSolution>), RunError> {
    let mut manifolds = generate_ensemble(config.n, config.p, config.d, config.r0, config.q, seed)?;
    if config.bias {
        manifolds = with_bias(&manifolds);
    }
    let budgets = config.resolved_budgets();
    let test_seed = derive_seed(seed, TEST_TAG);
    let run_cfg = config.run_config(seed);
    let p = manifolds.len();

    let wanted: std::collections::HashSet<usize> = budgets.iter().copied().collect();
    let mut snaps: HashMap<usize, Snapshot> = HashMap::new();
    let start = Instant::now();
    let mut observer = |step: &crate::cutting_plane::Step<'_>| {
        if step.iteration == 0 {
            snaps.insert(
                p,
                Snapshot {
                    size: p,
                    solution: step.before.clone(),
                    elapsed_ms: elapsed_ms(start),
                },
            );
        }
        let size = p + step.iteration + 1;
        if wanted.contains(&size) {
            snaps.insert(
                size,
                Snapshot {
                    size,
                    solution: step.after.clone(),
                    elapsed_ms: elapsed_ms(start),
                },
            );
        }
    };
    let mut oracle = EllipsoidOracle::new(&manifolds);
    let initial = WorkingSet::from_centers(&manifolds);
    let outcome: RunOutcome = match config.mode {
        Mode::Hard => run_simple_observed(&mut oracle, initial, &run_cfg, &mut observer)?,
        Mode::Slack => {
            let centers = centers_of(&manifolds);
            run_slack_observed(&mut oracle, &centers, initial, &run_cfg, &mut observer)?
        }
    };
    let total_ms = elapsed_ms(start);
    let status = outcome.status().to_string();
    let final_size = outcome.working_set.len();
    let mut rows = Vec::new();

    if let Some(sol) = &outcome.solution {
        let bracket = match (config.mode, outcome.status()) {
            (_, RunStatus::Infeasible) => None,
            (Mode::Hard, _) => bracket_hard(sol, config.delta).ok(),
            (Mode::Slack, _) => Some(bracket_slack(sol, p, config.c.unwrap_or(0.0), config.delta)),
        };
        rows.push(ResultRow {
            method: Method::McpFinal,
            seed,
            budget: final_size,
            gen_error: generalization_error(&sol.weights, &manifolds, config.m_test, test_seed),
            iters: outcome.augmentations(),
            objective: sol.objective,
            bracket,
            status: status.clone(),
            wall_ms: total_ms,
        });
        for &b in &budgets {
            let (sol_b, size, ms) = if b.max(p) >= final_size {
                (sol, final_size, total_ms)
            } else {
                let s = snaps
                    .get(&b.max(p))
                    .expect("every intermediate working-set size is observed");
                (&s.solution, s.size, s.elapsed_ms)
            };
            rows.push(ResultRow {
                method: Method::Mcp,
                seed,
                budget: b,
                gen_error: generalization_error(&sol_b.weights, &manifolds, config.m_test, test_seed),
                iters: size - p,
                objective: sol_b.objective,
                bracket: None,
                status: status.clone(),
                wall_ms: ms,
            });
        }
    } else {
        rows.push(ResultRow {
            method: Method::McpFinal,
            seed,
            budget: final_size,
            gen_error: f64::NAN,
            iters: 0,
            objective: f64::NAN,
            bracket: None,
            status: status.clone(),
            wall_ms: total_ms,
        });
    }

    let train_seed = derive_seed(seed, TRAIN_TAG);
    let max_per = budgets.iter().map(|b| b.div_ceil(p)).max().unwrap_or(1);
    let (pool, labels) = pooled_samples(&manifolds, max_per, train_seed);
    let c = match config.mode {
        Mode::Hard => None,
        Mode::Slack => config.c,
    };
    let baseline: Vec<ResultRow> = budgets
        .par_iter()
        .map(|&b| -> Result<ResultRow, RunError> {
            let t = Instant::now();
            let trained = train_point_svm(&pool[..b], &labels[..b], c, config.qp_tolerance);
            let ms = elapsed_ms(t);
            Ok(match trained {
                Ok(sol) => ResultRow {
                    method: Method::PointSvm,
                    seed,
                    budget: b,
                    gen_error: generalization_error(&sol.weights, &manifolds, config.m_test, test_seed),
                    iters: 0,
                    objective: sol.objective,
                    bracket: None,
                    status: RunStatus::Converged.to_string(),
                    wall_ms: ms,
                },
                Err(QpError::Infeasible) => ResultRow {
                    method: Method::PointSvm,
                    seed,
                    budget: b,
                    gen_error: f64::NAN,
                    iters: 0,
                    objective: f64::NAN,
                    bracket: None,
                    status: RunStatus::Infeasible.to_string(),
                    wall_ms: ms,
                },
                Err(e) => return Err(e.into()),
            })
        })
        .collect::<Result<_, _>>()?;
    rows.extend(baseline);
    let solution = match outcome.status() {
        RunStatus::Infeasible => None,
        _ => outcome.solution,
    };
    Ok((rows, outcome.trace, solution))
}
