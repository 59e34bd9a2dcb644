//! Slack-mode inner problem with one shared slack per manifold:
//!
//! ```text
//! min ½‖w‖² + C Σ_p ξ_p
//! s.t. ⟨z_i, w⟩ + ξ_{p_i} >= 1   (working-set points)
//!      ⟨c_p, w⟩ >= 1             (centers, optional)
//!      ξ_p >= 0
//! ```
//!
//! Primal active-set method started from a feasible point. Every manifold's
//! slack is kept pinned by at least one working constraint (its bound or one
//! of its points), which makes each equality subproblem strictly convex in
//! `w` alone: on a manifold pinned by points, one point is the reference and
//! the others enter as difference rows `⟨z_i − z_ref, w⟩ = 0`, while the
//! reference contributes `−C⟨z_ref, w⟩` to the objective. The resulting
//! projection problem shares the updatable factorization with the hard-margin
//! solver.

use super::factor::{Append, OrthoFactor};
use super::hard::{HardMarginSolver, DEPENDENCE_TOL};
use super::{DualState, QpSettings};
use crate::error::QpError;
use crate::linalg::{axpy, dist, dot, norm2, sub};

/// Constraint slacks at or below this count as tight in the ratio test.
const DEGENERATE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowTag {
    Center(usize),
    Point(usize),
    Diff { point: usize, reference: usize },
}

/// Ordered for the smallest-index rule used on degenerate steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Constraint {
    Point(usize),
    Center(usize),
    Bound(usize),
}

#[derive(Debug, Clone)]
pub struct SlackSolver {
    dim: usize,
    c: f64,
    settings: QpSettings,
    points: Vec<Vec<f64>>,
    point_norms: Vec<f64>,
    group_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    centers: Vec<Option<Vec<f64>>>,
    w: Vec<f64>,
    xi: Vec<f64>,
    point_active: Vec<bool>,
    /// Points equal to their group's center: implied by the center constraint
    /// and `ξ >= 0`, so they never enter the active set.
    implied: Vec<bool>,
    center_active: Vec<bool>,
    bound_active: Vec<bool>,
    reference: Vec<Option<usize>>,
    factor: OrthoFactor,
    rows: Vec<RowTag>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    steps: usize,
}

impl SlackSolver {
    /// `centers[p]` is the signed center `y_p x_p^c` of group `p`, or `None`
    /// when the group has no center constraint. Fails with
    /// `CentersInfeasible` when the centers cannot all be satisfied.
    pub fn new(
        dim: usize,
        c: f64,
        centers: Vec<Option<Vec<f64>>>,
        settings: QpSettings,
    ) -> Result<Self, QpError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(QpError::Numerical(format!("slack coefficient must be > 0, got {c}")));
        }
        let groups = centers.len();
        let mut hard = HardMarginSolver::new(dim, settings);
        let mut center_ids = Vec::new();
        for (p, cz) in centers.iter().enumerate() {
            if let Some(cz) = cz {
                hard.add_constraint(cz.clone())?;
                center_ids.push(p);
            }
        }
        match hard.solve() {
            Ok(()) => {}
            Err(QpError::Infeasible) => return Err(QpError::CentersInfeasible),
            Err(e) => return Err(e),
        }
        let mut solver = Self {
            dim,
            c,
            settings,
            points: Vec::new(),
            point_norms: Vec::new(),
            group_of: Vec::new(),
            members: vec![Vec::new(); groups],
            centers,
            w: hard.weights().to_vec(),
            xi: vec![0.0; groups],
            point_active: Vec::new(),
            implied: Vec::new(),
            center_active: vec![false; groups],
            bound_active: vec![true; groups],
            reference: vec![None; groups],
            factor: OrthoFactor::new(dim),
            rows: Vec::new(),
            alpha: Vec::new(),
            beta: vec![0.0; groups],
            steps: 0,
        };
        for &k in hard.active_set() {
            let p = center_ids[k];
            solver.center_active[p] = solver.append_row(RowTag::Center(p));
        }
        Ok(solver)
    }

    pub fn group_count(&self) -> usize {
        self.centers.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn slacks(&self) -> &[f64] {
        &self.xi
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn objective(&self) -> f64 {
        0.5 * crate::linalg::norm2_sq(&self.w) + self.c * self.xi.iter().sum::<f64>()
    }

    /// Multipliers from the last completed solve.
    pub fn dual(&self) -> DualState {
        let mut alpha = self.alpha.clone();
        alpha.resize(self.points.len(), 0.0);
        DualState {
            alpha,
            beta: self.beta.clone(),
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn groups(&self) -> &[usize] {
        &self.group_of
    }

    pub fn centers(&self) -> &[Option<Vec<f64>>] {
        &self.centers
    }

    fn row_vector(&self, tag: RowTag) -> Vec<f64> {
        match tag {
            RowTag::Center(p) => self.centers[p].clone().expect("center row without center"),
            RowTag::Point(i) => self.points[i].clone(),
            RowTag::Diff { point, reference } => sub(&self.points[point], &self.points[reference]),
        }
    }

    fn row_rhs(tag: RowTag) -> f64 {
        match tag {
            RowTag::Center(_) | RowTag::Point(_) => 1.0,
            RowTag::Diff { .. } => 0.0,
        }
    }

    /// Appends a working row. A row in the span of the active rows is
    /// already satisfied with equality on the current face, so it is left
    /// out and `false` is returned.
    fn append_row(&mut self, tag: RowTag) -> bool {
        let v = self.row_vector(tag);
        match self.factor.append(&v, DEPENDENCE_TOL) {
            Append::Added => {
                self.rows.push(tag);
                true
            }
            Append::Dependent => false,
        }
    }

    fn remove_row_at(&mut self, pos: usize) {
        self.rows.remove(pos);
        self.factor.remove(pos);
    }

    fn row_group(&self, tag: RowTag) -> Option<usize> {
        match tag {
            RowTag::Center(_) => None,
            RowTag::Point(i) | RowTag::Diff { point: i, .. } => Some(self.group_of[i]),
        }
    }

    /// Re-derives the point rows of group `p` from its working constraints.
    fn rebuild_group(&mut self, p: usize) -> Result<(), QpError> {
        for pos in (0..self.rows.len()).rev() {
            if self.row_group(self.rows[pos]) == Some(p) {
                self.remove_row_at(pos);
            }
        }
        let active: Vec<usize> = self.members[p]
            .iter()
            .copied()
            .filter(|&i| self.point_active[i])
            .collect();
        if self.bound_active[p] {
            for i in active {
                if !self.append_row(RowTag::Point(i)) {
                    self.point_active[i] = false;
                }
            }
        } else {
            let reference = self.reference[p].expect("unpinned group");
            for i in active.into_iter().filter(|&i| i != reference) {
                if !self.append_row(RowTag::Diff { point: i, reference }) {
                    self.point_active[i] = false;
                }
            }
        }
        Ok(())
    }

    /// Adds working-set points `(z, group)` and restores feasibility by
    /// raising the slack of every group they violate.
    pub fn add_points(&mut self, new_points: Vec<(Vec<f64>, usize)>) -> Result<(), QpError> {
        let mut raise: Vec<Option<(f64, usize)>> = vec![None; self.group_count()];
        for (z, p) in new_points {
            if z.len() != self.dim {
                return Err(QpError::DimensionMismatch {
                    expected: self.dim,
                    found: z.len(),
                });
            }
            if p >= self.group_count() {
                return Err(QpError::DimensionMismatch {
                    expected: self.group_count(),
                    found: p + 1,
                });
            }
            let i = self.points.len();
            let need = 1.0 - dot(&z, &self.w);
            let implied = self.centers[p]
                .as_ref()
                .is_some_and(|c| dist(c, &z) <= 1e-12 * (1.0 + norm2(c)));
            self.implied.push(implied);
            self.point_norms.push(norm2(&z));
            self.points.push(z);
            self.group_of.push(p);
            self.members[p].push(i);
            self.point_active.push(false);
            self.alpha.push(0.0);
            if !implied && need > self.xi[p] && raise[p].is_none_or(|(v, _)| need > v) {
                raise[p] = Some((need, i));
            }
        }
        for (p, r) in raise.into_iter().enumerate() {
            if let Some((need, i)) = r {
                self.xi[p] = need;
                self.bound_active[p] = false;
                for &m in &self.members[p] {
                    self.point_active[m] = false;
                }
                self.point_active[i] = true;
                self.reference[p] = Some(i);
                self.rebuild_group(p)?;
            }
        }
        Ok(())
    }

    fn stationary_point(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let q = self.factor.rank();
        let b: Vec<f64> = self.rows.iter().map(|&t| Self::row_rhs(t)).collect();
        let a = self.factor.solve_rt(&b);
        let mut g0 = vec![0.0; self.dim];
        for p in 0..self.group_count() {
            if !self.bound_active[p] {
                let r = self.reference[p].expect("unpinned group");
                axpy(self.c, &self.points[r], &mut g0);
            }
        }
        let d = self.factor.project(&g0);
        let mut target = self.factor.combine(0, &a);
        let free = self.factor.combine(q, &d[q..]);
        axpy(1.0, &free, &mut target);
        let xi: Vec<f64> = (0..self.group_count())
            .map(|p| {
                if self.bound_active[p] {
                    0.0
                } else {
                    1.0 - dot(&self.points[self.reference[p].unwrap()], &target)
                }
            })
            .collect();
        let rhs: Vec<f64> = a.iter().zip(&d[..q]).map(|(x, y)| x - y).collect();
        let nu = self.factor.solve_r(&rhs);
        (target, xi, nu)
    }

    /// Splits row multipliers into point, center and bound multipliers.
    fn multipliers(&self, nu: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let groups = self.group_count();
        let mut alpha = vec![0.0; self.points.len()];
        let mut beta = vec![0.0; groups];
        let mut group_sum = vec![0.0; groups];
        for (&tag, &v) in self.rows.iter().zip(nu) {
            match tag {
                RowTag::Center(p) => beta[p] = v,
                RowTag::Point(i) | RowTag::Diff { point: i, .. } => {
                    alpha[i] = v;
                    group_sum[self.group_of[i]] += v;
                }
            }
        }
        let mut mu = vec![0.0; groups];
        for p in 0..groups {
            if self.bound_active[p] {
                mu[p] = self.c - group_sum[p];
            } else {
                let r = self.reference[p].unwrap();
                alpha[r] = self.c - group_sum[p];
            }
        }
        (alpha, beta, mu)
    }

    fn deactivate(&mut self, con: Constraint) -> Result<(), QpError> {
        match con {
            Constraint::Center(p) => {
                self.center_active[p] = false;
                let pos = self
                    .rows
                    .iter()
                    .position(|&t| t == RowTag::Center(p))
                    .expect("active center has a row");
                self.remove_row_at(pos);
            }
            Constraint::Point(i) => {
                let p = self.group_of[i];
                self.point_active[i] = false;
                if self.reference[p] == Some(i) {
                    let next = self.members[p].iter().copied().find(|&m| self.point_active[m]);
                    match next {
                        Some(m) => self.reference[p] = Some(m),
                        None => {
                            return Err(QpError::Numerical(
                                "dropping the only constraint pinning a slack".into(),
                            ))
                        }
                    }
                }
                self.rebuild_group(p)?;
            }
            Constraint::Bound(p) => {
                let first = self.members[p].iter().copied().find(|&m| self.point_active[m]);
                match first {
                    Some(m) => {
                        self.bound_active[p] = false;
                        self.reference[p] = Some(m);
                        self.rebuild_group(p)?;
                    }
                    None => {
                        return Err(QpError::Numerical(
                            "dropping the only constraint pinning a slack".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    /// Returns `false` when the constraint's row was dependent and skipped.
    fn activate(&mut self, con: Constraint) -> Result<bool, QpError> {
        match con {
            Constraint::Center(p) => {
                self.center_active[p] = self.append_row(RowTag::Center(p));
                Ok(self.center_active[p])
            }
            Constraint::Point(i) => {
                let p = self.group_of[i];
                let tag = if self.bound_active[p] {
                    RowTag::Point(i)
                } else {
                    RowTag::Diff {
                        point: i,
                        reference: self.reference[p].unwrap(),
                    }
                };
                self.point_active[i] = self.append_row(tag);
                Ok(self.point_active[i])
            }
            Constraint::Bound(p) => {
                self.bound_active[p] = true;
                self.xi[p] = 0.0;
                self.reference[p] = None;
                self.rebuild_group(p)?;
                Ok(true)
            }
        }
    }

    pub fn solve(&mut self) -> Result<(), QpError> {
        let groups = self.group_count();
        let mult_tol = 1e-2 * self.settings.tolerance;
        // blocking constraints found to lie in the span of the working rows;
        // their rate is zero on the current face, so they are left out of the
        // ratio test until the face changes
        let mut dependent: Vec<Constraint> = Vec::new();
        // after a zero-length step both choices fall back to the smallest
        // index, which rules out cycling among degenerate constraints
        let mut degenerate = false;
        let mut steps = 0;
        loop {
            steps += 1;
            self.steps += 1;
            if steps > self.settings.max_steps {
                return Err(QpError::IterationLimit(self.settings.max_steps));
            }
            let (target_w, target_xi, nu) = self.stationary_point();
            let dw = sub(&target_w, &self.w);
            let dxi = sub(&target_xi, &self.xi);
            let scale = 1.0
                + target_w.iter().chain(&target_xi).fold(0.0_f64, |m, v| m.max(v.abs()));
            let step = dw.iter().chain(&dxi).fold(0.0_f64, |m, v| m.max(v.abs()));

            if step <= 1e-11 * scale {
                let (alpha, beta, mu) = self.multipliers(&nu);
                let mut worst: Option<(Constraint, f64)> = None;
                let mut consider = |con: Constraint, v: f64| {
                    if v < -mult_tol && worst.is_none_or(|(k, b)| if degenerate { con < k } else { v < b }) {
                        worst = Some((con, v));
                    }
                };
                for (i, &a) in alpha.iter().enumerate() {
                    if self.point_active[i] {
                        consider(Constraint::Point(i), a);
                    }
                }
                for p in 0..groups {
                    if self.center_active[p] {
                        consider(Constraint::Center(p), beta[p]);
                    }
                    if self.bound_active[p] {
                        consider(Constraint::Bound(p), mu[p]);
                    }
                }
                match worst {
                    Some((con, _)) => {
                        self.deactivate(con)?;
                        dependent.clear();
                        continue;
                    }
                    None => {
                        self.w = target_w;
                        self.finish(alpha, beta);
                        return Ok(());
                    }
                }
            }

            let dnorm = (crate::linalg::norm2_sq(&dw) + crate::linalg::norm2_sq(&dxi)).sqrt();
            let mut blocking: Vec<(f64, Constraint)> = Vec::new();
            let mut test = |con: Constraint, slack: f64, rate: f64, a_norm: f64| {
                if rate < -1e-11 * a_norm * dnorm && !dependent.contains(&con) {
                    let t = if slack <= DEGENERATE_SLACK { 0.0 } else { slack / -rate };
                    if t < 1.0 {
                        blocking.push((t, con));
                    }
                }
            };
            for (i, z) in self.points.iter().enumerate() {
                if self.point_active[i] || self.implied[i] {
                    continue;
                }
                let p = self.group_of[i];
                let slack = dot(z, &self.w) + self.xi[p] - 1.0;
                let rate = dot(z, &dw) + dxi[p];
                test(Constraint::Point(i), slack, rate, self.point_norms[i] + 1.0);
            }
            for p in 0..groups {
                if let (Some(cz), false) = (&self.centers[p], self.center_active[p]) {
                    let slack = dot(cz, &self.w) - 1.0;
                    let rate = dot(cz, &dw);
                    test(Constraint::Center(p), slack, rate, norm2(cz));
                }
                if !self.bound_active[p] {
                    test(Constraint::Bound(p), self.xi[p], dxi[p], 1.0);
                }
            }
            let t_max = blocking.iter().map(|b| b.0).fold(1.0, f64::min);
            if t_max >= 1.0 {
                degenerate = false;
                self.w = target_w;
                self.xi = target_xi;
                continue;
            }
            // a rejected dependent row leaves the state and direction unchanged,
            // so every tied candidate is tried before the next step
            blocking.retain(|b| b.0 == t_max);
            if t_max == 0.0 && degenerate {
                blocking.sort_by_key(|b| b.1);
            }
            degenerate = t_max == 0.0;
            axpy(t_max, &dw, &mut self.w);
            axpy(t_max, &dxi, &mut self.xi);
            for (_, con) in blocking {
                if self.activate(con)? {
                    if matches!(con, Constraint::Bound(_)) {
                        dependent.clear();
                    }
                    break;
                }
                dependent.push(con);
            }
        }
    }

    fn finish(&mut self, alpha: Vec<f64>, beta: Vec<f64>) {
        // slacks at their smallest feasible value for the final weights
        let mut xi = vec![0.0_f64; self.group_count()];
        for (z, &p) in self.points.iter().zip(&self.group_of) {
            xi[p] = xi[p].max(1.0 - dot(z, &self.w));
        }
        self.xi = xi;
        self.alpha = alpha.into_iter().map(|a| a.max(0.0)).collect();
        self.beta = beta.into_iter().map(|b| b.max(0.0)).collect();
    }
}
