//! Cutting-plane drivers: solve the inner QP on the working set, ask the
//! oracle for a violated manifold point, add it, repeat.

use crate::error::{QpError, RunError};
use crate::linalg::scaled;
use crate::oracle::{find_violation, SeparationOracle};
use crate::qp::{kkt_residual, DualState, HardMarginSolver, KktData, QpSettings, SlackSolver};
use crate::types::{
    ensemble_norm_bound, Label, Manifold, QpSolution, RunConfig, RunStatus, RunTrace, TraceRow,
    WorkingSet,
};

/// One augmentation, reported to observers after the inner QP is re-solved.
#[derive(Debug, Clone, Copy)]
pub struct Step<'a> {
    /// Zero-based augmentation index `k`.
    pub iteration: usize,
    /// `δ_k`
    pub violation: f64,
    pub manifold: usize,
    pub label: Label,
    pub point: &'a [f64],
    pub before: &'a QpSolution,
    pub after: &'a QpSolution,
}

/// Result of a driver run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Last feasible inner solution; `None` when the very first QP is infeasible.
    pub solution: Option<QpSolution>,
    pub trace: RunTrace,
    pub working_set: WorkingSet,
    /// `L` of the ensemble.
    pub norm_bound: f64,
}

impl RunOutcome {
    pub fn status(&self) -> RunStatus {
        self.trace.status
    }

    pub fn augmentations(&self) -> usize {
        self.trace.augmentation_count()
    }
}

/// Cap used when the configuration leaves `max_iterations` unset.
pub const HARD_ITERATION_CAP: usize = 1_000_000;

/// `L² / (κ δ)²`
pub fn hard_iteration_bound(norm_bound: f64, margin: f64, delta: f64) -> f64 {
    (norm_bound / (margin * delta)).powi(2)
}

/// `L² / κ²`
pub fn hard_error_bound(norm_bound: f64, margin: f64) -> f64 {
    (norm_bound / margin).powi(2)
}

/// `P · max(8 C L² / δ², 2 / δ)`
pub fn slack_iteration_bound(manifolds: usize, c: f64, norm_bound: f64, delta: f64) -> f64 {
    manifolds as f64 * (8.0 * c * norm_bound * norm_bound / (delta * delta)).max(2.0 / delta)
}

/// Default augmentation cap: fixed in hard mode, ten times the slack-mode
/// bound otherwise.
pub fn default_max_iterations(config: &RunConfig, manifolds: usize, norm_bound: f64) -> usize {
    match config.slack_coefficient {
        None => HARD_ITERATION_CAP,
        Some(c) => {
            let cap = 10.0 * slack_iteration_bound(manifolds, c, norm_bound, config.tolerance);
            if cap >= usize::MAX as f64 {
                usize::MAX
            } else {
                cap.ceil() as usize
            }
        }
    }
}

/// `(‖w‖², ‖w‖² / (1 − δ)²)`; the optimal `‖w*‖²` lies inside after a
/// converged hard-margin run.
pub fn bracket_hard(solution: &QpSolution, delta: f64) -> Result<(f64, f64), RunError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(RunError::Tolerance(delta));
    }
    let n = solution.weight_norm_sq();
    Ok((n, n / ((1.0 - delta) * (1.0 - delta))))
}

/// `(F, F + P C δ)` for a converged slack run.
pub fn bracket_slack(solution: &QpSolution, manifolds: usize, c: f64, delta: f64) -> (f64, f64) {
    (
        solution.objective,
        solution.objective + manifolds as f64 * c * delta,
    )
}

/// Number of augmentations whose point was misclassified (`δ_k > 1`).
pub fn error_counter(trace: &RunTrace) -> usize {
    trace.augmentations().filter(|r| r.violation > 1.0).count()
}

fn check_initial<M: Manifold>(manifolds: &[M], initial: &WorkingSet) -> Result<usize, RunError> {
    if initial.manifold_count() != manifolds.len() {
        return Err(RunError::Config(format!(
            "working set indexes {} manifolds, oracle has {}",
            initial.manifold_count(),
            manifolds.len()
        )));
    }
    if let Some(p) = initial.uncovered_manifold() {
        return Err(RunError::UncoveredManifold(p));
    }
    let dim = manifolds.first().map_or(0, Manifold::ambient_dim);
    for m in manifolds {
        if m.ambient_dim() != dim {
            return Err(RunError::Config("manifolds differ in ambient dimension".into()));
        }
    }
    Ok(dim)
}

fn resolve_cap(config: &RunConfig, manifolds: usize, norm_bound: f64) -> usize {
    config
        .max_iterations
        .unwrap_or_else(|| default_max_iterations(config, manifolds, norm_bound))
}

fn hard_solution(solver: &HardMarginSolver, groups: &[usize], manifolds: usize) -> QpSolution {
    let weights = solver.weights().to_vec();
    let slacks = vec![0.0; manifolds];
    let dual = DualState {
        alpha: solver.multipliers(),
        beta: Vec::new(),
    };
    let data = KktData {
        points: solver.rows(),
        groups,
        centers: &[],
        c: None,
    };
    let kkt = kkt_residual(&data, &weights, &slacks, &dual);
    QpSolution {
        objective: QpSolution::objective_of(&weights, &slacks, None),
        weights,
        slacks,
        kkt_residual: kkt,
    }
}

fn slack_solution(solver: &SlackSolver, c: f64) -> QpSolution {
    let weights = solver.weights().to_vec();
    let slacks = solver.slacks().to_vec();
    let data = KktData {
        points: solver.points(),
        groups: solver.groups(),
        centers: solver.centers(),
        c: Some(c),
    };
    let kkt = kkt_residual(&data, &weights, &slacks, &solver.dual());
    QpSolution {
        objective: QpSolution::objective_of(&weights, &slacks, Some(c)),
        weights,
        slacks,
        kkt_residual: kkt,
    }
}

/// Hard-margin cutting-plane run.
pub fn run_simple<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    initial: WorkingSet,
    config: &RunConfig,
) -> Result<RunOutcome, RunError> {
    run_simple_observed(oracle, initial, config, |_| {})
}

/// [`run_simple`] with a callback after every augmentation.
pub fn run_simple_observed<O, F>(
    oracle: &mut O,
    initial: WorkingSet,
    config: &RunConfig,
    mut observer: F,
) -> Result<RunOutcome, RunError>
where
    O: SeparationOracle + ?Sized,
    F: FnMut(&Step<'_>),
{
    config.validate()?;
    if config.slack_coefficient.is_some() {
        return Err(RunError::Config("hard-margin run given a slack coefficient".into()));
    }
    let count = oracle.manifolds().len();
    let dim = check_initial(oracle.manifolds(), &initial)?;
    let labels: Vec<Label> = oracle.manifolds().iter().map(Manifold::label).collect();
    let norm_bound = ensemble_norm_bound(oracle.manifolds());
    let cap = resolve_cap(config, count, norm_bound);

    let mut solver = HardMarginSolver::new(dim, QpSettings::with_tolerance(config.qp_tolerance));
    let mut groups = Vec::with_capacity(initial.len());
    for e in initial.entries() {
        solver.add_constraint(scaled(labels[e.manifold].sign(), &e.point))?;
        groups.push(e.manifold);
    }
    let mut working_set = initial;
    let mut rows = Vec::new();
    let finish = |solution, rows, status, working_set| RunOutcome {
        solution,
        trace: RunTrace {
            iterations: rows,
            status,
        },
        working_set,
        norm_bound,
    };
    match solver.solve() {
        Ok(()) => {}
        Err(QpError::Infeasible) => return Ok(finish(None, rows, RunStatus::Infeasible, working_set)),
        Err(e) => return Err(e.into()),
    }
    let mut current = hard_solution(&solver, &groups, count);
    loop {
        let found = find_violation(oracle, &current.weights, None, config.tolerance, config.oracle_selection)?;
        let k = rows.len();
        if !found.found || k >= cap {
            rows.push(TraceRow {
                objective: current.objective,
                violation: found.violation,
                working_set_size: working_set.len(),
                added_manifold: None,
            });
            let status = if found.found {
                RunStatus::MaxIterations
            } else {
                RunStatus::Converged
            };
            return Ok(finish(Some(current), rows, status, working_set));
        }
        let p = found.manifold_index;
        rows.push(TraceRow {
            objective: current.objective,
            violation: found.violation,
            working_set_size: working_set.len(),
            added_manifold: Some(p),
        });
        working_set.push(found.point.clone(), p)?;
        solver.add_constraint(scaled(labels[p].sign(), &found.point))?;
        groups.push(p);
        match solver.solve() {
            Ok(()) => {}
            Err(QpError::Infeasible) => {
                return Ok(finish(Some(current), rows, RunStatus::Infeasible, working_set))
            }
            Err(e) => return Err(e.into()),
        }
        let next = hard_solution(&solver, &groups, count);
        observer(&Step {
            iteration: k,
            violation: found.violation,
            manifold: p,
            label: labels[p],
            point: &found.point,
            before: &current,
            after: &next,
        });
        current = next;
    }
}

/// Shared-slack cutting-plane run with hard constraints on `centers`
/// (unsigned, one per manifold).
pub fn run_slack<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    centers: &[Vec<f64>],
    initial: WorkingSet,
    config: &RunConfig,
) -> Result<RunOutcome, RunError> {
    run_slack_observed(oracle, centers, initial, config, |_| {})
}

/// [`run_slack`] with a callback after every augmentation.
pub fn run_slack_observed<O, F>(
    oracle: &mut O,
    centers: &[Vec<f64>],
    initial: WorkingSet,
    config: &RunConfig,
    mut observer: F,
) -> Result<RunOutcome, RunError>
where
    O: SeparationOracle + ?Sized,
    F: FnMut(&Step<'_>),
{
    config.validate()?;
    let c = config
        .slack_coefficient
        .ok_or_else(|| RunError::Config("slack run needs a slack coefficient".into()))?;
    let count = oracle.manifolds().len();
    let dim = check_initial(oracle.manifolds(), &initial)?;
    if centers.len() != count || centers.iter().any(|x| x.len() != dim) {
        return Err(RunError::Config("one center of the ambient dimension per manifold required".into()));
    }
    let labels: Vec<Label> = oracle.manifolds().iter().map(Manifold::label).collect();
    let norm_bound = ensemble_norm_bound(oracle.manifolds());
    let cap = resolve_cap(config, count, norm_bound);
    let mut rows = Vec::new();
    let finish = |solution, rows, status, working_set| RunOutcome {
        solution,
        trace: RunTrace {
            iterations: rows,
            status,
        },
        working_set,
        norm_bound,
    };

    let signed_centers = centers
        .iter()
        .zip(&labels)
        .map(|(x, y)| Some(scaled(y.sign(), x)))
        .collect();
    let settings = QpSettings::with_tolerance(config.qp_tolerance);
    let mut solver = match SlackSolver::new(dim, c, signed_centers, settings) {
        Ok(s) => s,
        Err(QpError::CentersInfeasible) => {
            return Ok(finish(None, rows, RunStatus::Infeasible, initial))
        }
        Err(e) => return Err(e.into()),
    };
    solver.add_points(
        initial
            .entries()
            .iter()
            .map(|e| (scaled(labels[e.manifold].sign(), &e.point), e.manifold))
            .collect(),
    )?;
    solver.solve()?;
    let mut working_set = initial;
    let mut current = slack_solution(&solver, c);
    loop {
        let found = find_violation(
            oracle,
            &current.weights,
            Some(&current.slacks),
            config.tolerance,
            config.oracle_selection,
        )?;
        let k = rows.len();
        if !found.found || k >= cap {
            rows.push(TraceRow {
                objective: current.objective,
                violation: found.violation,
                working_set_size: working_set.len(),
                added_manifold: None,
            });
            let status = if found.found {
                RunStatus::MaxIterations
            } else {
                RunStatus::Converged
            };
            return Ok(finish(Some(current), rows, status, working_set));
        }
        let p = found.manifold_index;
        rows.push(TraceRow {
            objective: current.objective,
            violation: found.violation,
            working_set_size: working_set.len(),
            added_manifold: Some(p),
        });
        working_set.push(found.point.clone(), p)?;
        solver.add_points(vec![(scaled(labels[p].sign(), &found.point), p)])?;
        solver.solve()?;
        let next = slack_solution(&solver, c);
        observer(&Step {
            iteration: k,
            violation: found.violation,
            manifold: p,
            label: labels[p],
            point: &found.point,
            before: &current,
            after: &next,
        });
        current = next;
    }
}

/// Continues a finished run from its working set with tolerance
/// `δ / factor`, for use as a near-optimal reference.
pub fn refine<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    outcome: &RunOutcome,
    config: &RunConfig,
    factor: f64,
) -> Result<RunOutcome, RunError> {
    let mut fine = config.clone();
    fine.tolerance = config.tolerance / factor;
    fine.max_iterations = None;
    match fine.slack_coefficient {
        None => run_simple(oracle, outcome.working_set.clone(), &fine),
        Some(_) => {
            let centers: Vec<Vec<f64>> = oracle.manifolds().iter().map(|m| m.center().to_vec()).collect();
            run_slack(oracle, &centers, outcome.working_set.clone(), &fine)
        }
    }
}

/// Centers of an ensemble, for [`run_slack`].
pub fn centers_of<M: Manifold>(manifolds: &[M]) -> Vec<Vec<f64>> {
    manifolds.iter().map(|m| m.center().to_vec()).collect()
}
