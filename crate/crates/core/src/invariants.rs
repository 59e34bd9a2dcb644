//! Executable forms of the convergence guarantees: per-step checks fed by the
//! drivers' observer hook, and replay checks on a recorded trace.

use std::fmt;

use crate::cutting_plane::Step;
use crate::linalg::{dot, norm2_sq, sub};

/// Slack allowed on the weight-change inequalities.
pub const STEP_TOL: f64 = 1e-8;
/// Slack allowed on the slack-mode objective-increase bound.
pub const SLACK_INCREASE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    /// `⟨Δw, w⟩ >= 0`
    WeightProjection,
    /// `‖w'‖² − ‖w‖² >= δ_k² / L²`
    NormIncrease,
    /// `⟨Δw, w⟩ + C Σ Δξ >= 0`
    SlackProjection,
    /// `ΔF >= min(δ_k² / (8L²), C δ_k / 2)`
    ObjectiveIncrease,
    /// The added point is tight at the next solution.
    NewSupportVector,
    /// Trace objectives never decrease.
    Monotone,
    /// Hard-mode trace objectives stay below `½‖w_final‖²`.
    UpperBound,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::WeightProjection => "weight_projection",
            Check::NormIncrease => "norm_increase",
            Check::SlackProjection => "slack_projection",
            Check::ObjectiveIncrease => "objective_increase",
            Check::NewSupportVector => "new_support_vector",
            Check::Monotone => "monotone",
            Check::UpperBound => "upper_bound",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: Check,
    pub iteration: usize,
    /// Left side minus right side; negative means the check failed.
    pub excess: f64,
}

/// `½(x − δ)² + K x >= min(δ²/2, K δ / 2)` for `K, δ > 0`, `x >= 0`.
pub fn scalar_increase_holds(k: f64, delta: f64, x: f64) -> bool {
    let lhs = 0.5 * (x - delta) * (x - delta) + k * x;
    let rhs = (0.5 * delta * delta).min(0.5 * k * delta);
    lhs >= rhs * (1.0 - 1e-12)
}

/// Collects per-step violations of the guarantees.
#[derive(Debug, Clone)]
pub struct InvariantMonitor {
    norm_bound: f64,
    slack_coefficient: Option<f64>,
    qp_tolerance: f64,
    steps: usize,
    violations: Vec<Violation>,
}

impl InvariantMonitor {
    pub fn new(norm_bound: f64, slack_coefficient: Option<f64>, qp_tolerance: f64) -> Self {
        Self {
            norm_bound,
            slack_coefficient,
            qp_tolerance,
            steps: 0,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, check: Check, iteration: usize, excess: f64) {
        if excess < 0.0 {
            self.violations.push(Violation {
                check,
                iteration,
                excess,
            });
        }
    }

    pub fn observe(&mut self, step: &Step<'_>) {
        self.steps += 1;
        let k = step.iteration;
        let w = &step.before.weights;
        let dw = sub(&step.after.weights, w);
        let proj = dot(&dw, w);
        let l2 = self.norm_bound * self.norm_bound;
        let d = step.violation;
        match self.slack_coefficient {
            None => {
                self.record(Check::WeightProjection, k, proj + STEP_TOL);
                let inc = norm2_sq(&step.after.weights) - norm2_sq(w);
                self.record(Check::NormIncrease, k, inc - d * d / l2 + STEP_TOL);
            }
            Some(c) => {
                let dxi: f64 = step
                    .after
                    .slacks
                    .iter()
                    .zip(&step.before.slacks)
                    .map(|(a, b)| a - b)
                    .sum();
                self.record(Check::SlackProjection, k, proj + c * dxi + STEP_TOL);
                let df = step.after.objective - step.before.objective;
                let bound = (d * d / (8.0 * l2)).min(0.5 * c * d);
                self.record(Check::ObjectiveIncrease, k, df - bound + SLACK_INCREASE_TOL);
                let activity = step.label.sign() * dot(&step.after.weights, step.point)
                    + step.after.slacks[step.manifold]
                    - 1.0;
                self.record(
                    Check::NewSupportVector,
                    k,
                    10.0 * self.qp_tolerance - activity.abs(),
                );
            }
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays a recorded trace. Only quantities stored in the trace are
/// checked: monotonicity, the per-step increase bounds and, in hard mode,
/// the upper bound by the final objective.
pub fn check_trace(
    trace: &crate::types::RunTrace,
    norm_bound: f64,
    slack_coefficient: Option<f64>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let rows = &trace.iterations;
    let l2 = norm_bound * norm_bound;
    let mut push = |check, iteration, excess: f64| {
        if excess < 0.0 {
            out.push(Violation {
                check,
                iteration,
                excess,
            });
        }
    };
    for k in 1..rows.len() {
        let (prev, cur) = (&rows[k - 1], &rows[k]);
        let df = cur.objective - prev.objective;
        push(Check::Monotone, k - 1, df + STEP_TOL);
        if prev.added_manifold.is_none() {
            continue;
        }
        let d = prev.violation;
        match slack_coefficient {
            // objective is ½‖w‖²
            None => push(Check::NormIncrease, k - 1, 2.0 * df - d * d / l2 + STEP_TOL),
            Some(c) => push(
                Check::ObjectiveIncrease,
                k - 1,
                df - (d * d / (8.0 * l2)).min(0.5 * c * d) + SLACK_INCREASE_TOL,
            ),
        }
    }
    if slack_coefficient.is_none() {
        if let Some(last) = rows.last() {
            for (k, r) in rows.iter().enumerate() {
                push(Check::UpperBound, k, last.objective - r.objective + STEP_TOL);
            }
        }
    }
    out
}
