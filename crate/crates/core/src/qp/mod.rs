//! Exact solvers for the two finite inner problems of the cutting-plane
//! drivers, plus the KKT residual used to certify their output.

mod factor;
mod hard;
mod slack;

pub use hard::HardMarginSolver;
pub use slack::SlackSolver;

use crate::error::QpError;
use crate::linalg::{axpy, dot, norm2, scaled};
use crate::types::{Label, QpSolution, WorkingSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Target KKT residual.
    pub tolerance: f64,
    /// Hard mode gives up as infeasible once `½‖w‖²` exceeds this.
    pub divergence_cap: f64,
    /// Cap on active-set steps per solve call.
    pub max_steps: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            divergence_cap: 1e12,
            max_steps: 1_000_000,
        }
    }
}

impl QpSettings {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    pub(crate) fn feasibility_tol(&self) -> f64 {
        0.1 * self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpMode {
    Hard,
    Slack,
}

/// A finite inner problem over a working set.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    mode: QpMode,
    working_set: WorkingSet,
    labels: Vec<Label>,
    centers: Option<Vec<Vec<f64>>>,
    slack_coefficient: Option<f64>,
}

impl QpProblem {
    fn check(ws: &WorkingSet, labels: &[Label]) -> Result<usize, QpError> {
        if ws.manifold_count() != labels.len() {
            return Err(QpError::DimensionMismatch {
                expected: ws.manifold_count(),
                found: labels.len(),
            });
        }
        let dim = ws.entries().first().map_or(0, |e| e.point.len());
        for e in ws.entries() {
            if e.point.len() != dim {
                return Err(QpError::DimensionMismatch {
                    expected: dim,
                    found: e.point.len(),
                });
            }
            if e.point.iter().any(|v| !v.is_finite()) {
                return Err(QpError::Numerical("non-finite working-set point".into()));
            }
        }
        Ok(dim)
    }

    pub fn hard(working_set: WorkingSet, labels: Vec<Label>) -> Result<Self, QpError> {
        Self::check(&working_set, &labels)?;
        Ok(Self {
            mode: QpMode::Hard,
            working_set,
            labels,
            centers: None,
            slack_coefficient: None,
        })
    }

    /// Shared-slack problem with one hard center constraint per manifold.
    pub fn slack(
        working_set: WorkingSet,
        labels: Vec<Label>,
        centers: Vec<Vec<f64>>,
        c: f64,
    ) -> Result<Self, QpError> {
        let dim = Self::check(&working_set, &labels)?;
        if centers.len() != labels.len() {
            return Err(QpError::DimensionMismatch {
                expected: labels.len(),
                found: centers.len(),
            });
        }
        if let Some(bad) = centers.iter().find(|c| !working_set.is_empty() && c.len() != dim) {
            return Err(QpError::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::slack_inner(working_set, labels, Some(centers), c)
    }

    /// Shared-slack problem without center constraints. With singleton
    /// manifolds this is the ordinary per-point soft-margin SVM.
    pub fn slack_without_centers(
        working_set: WorkingSet,
        labels: Vec<Label>,
        c: f64,
    ) -> Result<Self, QpError> {
        Self::check(&working_set, &labels)?;
        Self::slack_inner(working_set, labels, None, c)
    }

    fn slack_inner(
        working_set: WorkingSet,
        labels: Vec<Label>,
        centers: Option<Vec<Vec<f64>>>,
        c: f64,
    ) -> Result<Self, QpError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(QpError::Numerical(format!("slack coefficient must be > 0, got {c}")));
        }
        Ok(Self {
            mode: QpMode::Slack,
            working_set,
            labels,
            centers,
            slack_coefficient: Some(c),
        })
    }

    pub fn mode(&self) -> QpMode {
        self.mode
    }

    pub fn working_set(&self) -> &WorkingSet {
        &self.working_set
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn centers(&self) -> Option<&[Vec<f64>]> {
        self.centers.as_deref()
    }

    pub fn slack_coefficient(&self) -> Option<f64> {
        self.slack_coefficient
    }

    fn dim(&self) -> usize {
        self.working_set
            .entries()
            .first()
            .map(|e| e.point.len())
            .or_else(|| self.centers.as_ref().and_then(|c| c.first()).map(Vec::len))
            .unwrap_or(0)
    }

    fn signed_points(&self) -> Vec<(Vec<f64>, usize)> {
        self.working_set
            .entries()
            .iter()
            .map(|e| (scaled(self.labels[e.manifold].sign(), &e.point), e.manifold))
            .collect()
    }

    fn signed_centers(&self) -> Vec<Option<Vec<f64>>> {
        match &self.centers {
            Some(cs) => cs
                .iter()
                .zip(&self.labels)
                .map(|(c, y)| Some(scaled(y.sign(), c)))
                .collect(),
            None => vec![None; self.labels.len()],
        }
    }
}

/// Multipliers of the inner problem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualState {
    /// One per working-set entry.
    pub alpha: Vec<f64>,
    /// One per center constraint (empty or zero without centers).
    pub beta: Vec<f64>,
}

/// Solves the hard-margin problem on `problem`'s working set.
pub fn solve_hard(problem: &QpProblem, qp_tolerance: f64) -> Result<(QpSolution, DualState), QpError> {
    if problem.mode != QpMode::Hard {
        return Err(QpError::WrongMode);
    }
    let mut solver = HardMarginSolver::new(problem.dim(), QpSettings::with_tolerance(qp_tolerance));
    for (z, _) in problem.signed_points() {
        solver.add_constraint(z)?;
    }
    solver.solve()?;
    let dual = DualState {
        alpha: solver.multipliers(),
        beta: Vec::new(),
    };
    let weights = solver.weights().to_vec();
    let slacks = vec![0.0; problem.labels.len()];
    let objective = QpSolution::objective_of(&weights, &slacks, None);
    let mut solution = QpSolution {
        weights,
        slacks,
        objective,
        kkt_residual: 0.0,
    };
    solution.kkt_residual = kkt_report(problem, &solution, &dual)?;
    Ok((solution, dual))
}

/// Solves the shared-slack problem on `problem`'s working set.
pub fn solve_slack(problem: &QpProblem, qp_tolerance: f64) -> Result<(QpSolution, DualState), QpError> {
    if problem.mode != QpMode::Slack {
        return Err(QpError::WrongMode);
    }
    let c = problem.slack_coefficient.ok_or(QpError::WrongMode)?;
    let mut solver = SlackSolver::new(
        problem.dim(),
        c,
        problem.signed_centers(),
        QpSettings::with_tolerance(qp_tolerance),
    )?;
    solver.add_points(problem.signed_points())?;
    solver.solve()?;
    let mut dual = solver.dual();
    if problem.centers.is_none() {
        dual.beta.clear();
    }
    let weights = solver.weights().to_vec();
    let slacks = solver.slacks().to_vec();
    let objective = QpSolution::objective_of(&weights, &slacks, Some(c));
    let mut solution = QpSolution {
        weights,
        slacks,
        objective,
        kkt_residual: 0.0,
    };
    solution.kkt_residual = kkt_report(problem, &solution, &dual)?;
    Ok((solution, dual))
}

/// Signed-data view used by the residual computation.
pub(crate) struct KktData<'a> {
    pub points: &'a [Vec<f64>],
    pub groups: &'a [usize],
    pub centers: &'a [Option<Vec<f64>>],
    pub c: Option<f64>,
}

/// Largest of the primal infeasibility, dual infeasibility, complementarity
/// products and the stationarity residual `‖w − Σ α z − Σ β c‖`.
pub(crate) fn kkt_residual(data: &KktData<'_>, w: &[f64], xi: &[f64], dual: &DualState) -> f64 {
    let mut worst = 0.0_f64;
    let mut stationarity = w.to_vec();
    let mut group_mass = vec![0.0; xi.len()];
    for (i, (z, &p)) in data.points.iter().zip(data.groups).enumerate() {
        let a = dual.alpha[i];
        let slack = dot(z, w) + xi[p] - 1.0;
        worst = worst.max(-slack).max(-a).max(a * slack.abs());
        group_mass[p] += a;
        if a != 0.0 {
            axpy(-a, z, &mut stationarity);
        }
    }
    for (p, cz) in data.centers.iter().enumerate() {
        if let Some(cz) = cz {
            let b = dual.beta.get(p).copied().unwrap_or(0.0);
            let slack = dot(cz, w) - 1.0;
            worst = worst.max(-slack).max(-b).max(b * slack.abs());
            if b != 0.0 {
                axpy(-b, cz, &mut stationarity);
            }
        }
    }
    match data.c {
        Some(c) => {
            for (p, &x) in xi.iter().enumerate() {
                worst = worst
                    .max(-x)
                    .max(group_mass[p] - c)
                    .max(x * (c - group_mass[p]).abs());
            }
        }
        None => {
            for &x in xi {
                worst = worst.max(x.abs());
            }
        }
    }
    worst.max(norm2(&stationarity))
}

/// KKT residual of `(solution, dual)` for `problem`.
pub fn kkt_report(problem: &QpProblem, solution: &QpSolution, dual: &DualState) -> Result<f64, QpError> {
    let dim = problem.dim();
    if solution.weights.len() != dim {
        return Err(QpError::DimensionMismatch {
            expected: dim,
            found: solution.weights.len(),
        });
    }
    if solution.slacks.len() != problem.labels.len() {
        return Err(QpError::DimensionMismatch {
            expected: problem.labels.len(),
            found: solution.slacks.len(),
        });
    }
    if dual.alpha.len() != problem.working_set.len() {
        return Err(QpError::DimensionMismatch {
            expected: problem.working_set.len(),
            found: dual.alpha.len(),
        });
    }
    if problem.centers.is_some() && dual.beta.len() != problem.labels.len() {
        return Err(QpError::DimensionMismatch {
            expected: problem.labels.len(),
            found: dual.beta.len(),
        });
    }
    let signed = problem.signed_points();
    let points: Vec<Vec<f64>> = signed.iter().map(|(z, _)| z.clone()).collect();
    let groups: Vec<usize> = signed.iter().map(|(_, p)| *p).collect();
    let centers = problem.signed_centers();
    let data = KktData {
        points: &points,
        groups: &groups,
        centers: &centers,
        c: problem.slack_coefficient,
    };
    Ok(kkt_residual(&data, &solution.weights, &solution.slacks, dual))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm_e1() -> (WorkingSet, Vec<Label>) {
        let mut ws = WorkingSet::new(2);
        ws.push(vec![1.0, 0.0], 0).unwrap();
        ws.push(vec![-1.0, 0.0], 1).unwrap();
        (ws, vec![Label::Positive, Label::Negative])
    }

    #[test]
    fn hard_symmetric_pair() {
        let (ws, labels) = pm_e1();
        let problem = QpProblem::hard(ws, labels).unwrap();
        let (sol, dual) = solve_hard(&problem, 1e-8).unwrap();
        assert!((sol.weights[0] - 1.0).abs() < 1e-14);
        assert!((sol.weight_norm_sq() - 1.0).abs() < 1e-14);
        assert!(sol.kkt_residual <= 1e-8);
        assert_eq!(dual.alpha.len(), 2);
    }

    #[test]
    fn hard_scaled_pair() {
        let mut ws = WorkingSet::new(2);
        ws.push(vec![2.0, 0.0], 0).unwrap();
        ws.push(vec![-2.0, 0.0], 1).unwrap();
        let problem = QpProblem::hard(ws, vec![Label::Positive, Label::Negative]).unwrap();
        let (sol, _) = solve_hard(&problem, 1e-8).unwrap();
        assert!((sol.weights[0] - 0.5).abs() < 1e-14);
        assert!((sol.weight_norm_sq() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn hard_infeasible() {
        let mut ws = WorkingSet::new(2);
        ws.push(vec![1.0, 0.0], 0).unwrap();
        ws.push(vec![1.0, 0.0], 1).unwrap();
        let problem = QpProblem::hard(ws, vec![Label::Positive, Label::Negative]).unwrap();
        assert_eq!(solve_hard(&problem, 1e-8).unwrap_err(), QpError::Infeasible);
    }

    #[test]
    fn slack_separable_pair() {
        let (ws, labels) = pm_e1();
        let centers = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        for c in [0.5, 1.0, 100.0] {
            let problem = QpProblem::slack(ws.clone(), labels.clone(), centers.clone(), c).unwrap();
            let (sol, _) = solve_slack(&problem, 1e-8).unwrap();
            assert!((sol.weights[0] - 1.0).abs() < 1e-12);
            assert!(sol.slacks.iter().all(|x| *x == 0.0));
            assert!((sol.objective - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let (ws, labels) = pm_e1();
        let problem = QpProblem::hard(ws, labels).unwrap();
        assert_eq!(solve_slack(&problem, 1e-8).unwrap_err(), QpError::WrongMode);
    }

    #[test]
    fn kkt_exact_point_and_perturbation() {
        let (ws, labels) = pm_e1();
        let problem = QpProblem::hard(ws, labels).unwrap();
        let sol = QpSolution {
            weights: vec![1.0, 0.0],
            slacks: vec![0.0, 0.0],
            objective: 0.5,
            kkt_residual: 0.0,
        };
        let dual = DualState {
            alpha: vec![0.5, 0.5],
            beta: vec![],
        };
        assert!(kkt_report(&problem, &sol, &dual).unwrap() <= 1e-12);
        let bumped = DualState {
            alpha: vec![0.6, 0.5],
            beta: vec![],
        };
        assert!(kkt_report(&problem, &sol, &bumped).unwrap() >= 0.05);
        let short = DualState {
            alpha: vec![0.5],
            beta: vec![],
        };
        assert!(matches!(
            kkt_report(&problem, &sol, &short),
            Err(QpError::DimensionMismatch { .. })
        ));
    }
}
