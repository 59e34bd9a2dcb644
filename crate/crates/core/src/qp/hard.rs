//! Hard-margin inner problem `min ½‖w‖²  s.t.  ⟨z_i, w⟩ >= 1`, `z_i = y_i x_i`.
//!
//! Dual active-set method of Goldfarb and Idnani specialised to an identity
//! Hessian: the iterate is always the minimum-norm point on the current
//! active face, constraints are added one at a time, and multipliers that
//! would turn negative are dropped. New constraints can be appended after a
//! solve and the method resumes from the previous optimum.

use super::factor::{Append, OrthoFactor};
use super::QpSettings;
use crate::error::QpError;
use crate::linalg::{axpy, dist, dot, norm2, norm2_sq};

/// Columns whose component outside the active span is below this fraction of
/// their norm are treated as linearly dependent.
pub(crate) const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct HardMarginSolver {
    dim: usize,
    rows: Vec<Vec<f64>>,
    row_norms: Vec<f64>,
    /// `⟨z_i, w_ref⟩ − 1`, refreshed lazily; screens rows in the pricing scan.
    slack_ref: Vec<f64>,
    w_ref: Vec<f64>,
    active: Vec<usize>,
    mult: Vec<f64>,
    is_active: Vec<bool>,
    w: Vec<f64>,
    factor: OrthoFactor,
    settings: QpSettings,
    steps: usize,
}

impl HardMarginSolver {
    pub fn new(dim: usize, settings: QpSettings) -> Self {
        Self {
            dim,
            rows: Vec::new(),
            row_norms: Vec::new(),
            slack_ref: Vec::new(),
            w_ref: vec![0.0; dim],
            active: Vec::new(),
            mult: Vec::new(),
            is_active: Vec::new(),
            w: vec![0.0; dim],
            factor: OrthoFactor::new(dim),
            settings,
            steps: 0,
        }
    }

    /// Adds the constraint `⟨z, w⟩ >= 1` and returns its index.
    pub fn add_constraint(&mut self, z: Vec<f64>) -> Result<usize, QpError> {
        if z.len() != self.dim {
            return Err(QpError::DimensionMismatch {
                expected: self.dim,
                found: z.len(),
            });
        }
        self.row_norms.push(norm2(&z));
        self.slack_ref.push(dot(&z, &self.w_ref) - 1.0);
        self.rows.push(z);
        self.is_active.push(false);
        Ok(self.rows.len() - 1)
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn constraint_count(&self) -> usize {
        self.rows.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Multiplier of every constraint (zero when inactive).
    pub fn multipliers(&self) -> Vec<f64> {
        let mut alpha = vec![0.0; self.rows.len()];
        for (&i, &u) in self.active.iter().zip(&self.mult) {
            alpha[i] = u;
        }
        alpha
    }

    pub fn objective(&self) -> f64 {
        0.5 * norm2_sq(&self.w)
    }

    /// Rows whose slack at `w_ref` exceeds `‖z_i‖ ‖w − w_ref‖` cannot be
    /// violated and are skipped without a dot product.
    fn most_violated(&mut self) -> Option<usize> {
        let feas = self.settings.feasibility_tol();
        let drift = dist(&self.w, &self.w_ref);
        let round = 1e-12 * (1.0 + norm2(&self.w));
        let mut best: Option<(usize, f64)> = None;
        let mut priced = 0;
        for (i, z) in self.rows.iter().enumerate() {
            if self.is_active[i] || self.slack_ref[i] - self.row_norms[i] * (drift + round) >= -feas {
                continue;
            }
            priced += 1;
            let s = dot(z, &self.w) - 1.0;
            if s < -feas && best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
        if priced * 8 > self.rows.len() {
            self.w_ref.copy_from_slice(&self.w);
            for (c, z) in self.slack_ref.iter_mut().zip(&self.rows) {
                *c = dot(z, &self.w_ref) - 1.0;
            }
        }
        best.map(|(i, _)| i)
    }

    fn drop_active(&mut self, pos: usize) {
        let i = self.active.remove(pos);
        self.mult.remove(pos);
        self.is_active[i] = false;
        self.factor.remove(pos);
    }

    /// Runs the active-set iteration until every constraint holds to the
    /// feasibility tolerance. On `Infeasible` the solver state is left as is.
    pub fn solve(&mut self) -> Result<(), QpError> {
        let mut steps = 0;
        while let Some(p) = self.most_violated() {
            let mut u_new = 0.0;
            loop {
                steps += 1;
                self.steps += 1;
                if steps > self.settings.max_steps {
                    return Err(QpError::IterationLimit(self.settings.max_steps));
                }
                let z_p = &self.rows[p];
                let d = self.factor.project(z_p);
                let q = self.factor.rank();
                let tail_sq: f64 = d[q..].iter().map(|v| v * v).sum();
                let dependent = tail_sq.sqrt() <= DEPENDENCE_TOL * self.row_norms[p];
                let r = self.factor.solve_r(&d[..q]);

                let mut t1 = f64::INFINITY;
                let mut drop_at = None;
                for (k, &rk) in r.iter().enumerate() {
                    if rk > 0.0 {
                        let t = self.mult[k] / rk;
                        if t < t1 {
                            t1 = t;
                            drop_at = Some(k);
                        }
                    }
                }
                let slack = dot(z_p, &self.w) - 1.0;
                let t2 = if dependent {
                    f64::INFINITY
                } else {
                    (-slack / tail_sq).max(0.0)
                };
                let t = t1.min(t2);
                if !t.is_finite() {
                    return Err(QpError::Infeasible);
                }
                if !dependent {
                    let step = self.factor.combine(q, &d[q..]);
                    axpy(t, &step, &mut self.w);
                }
                for (m, rk) in self.mult.iter_mut().zip(&r) {
                    *m -= t * rk;
                }
                u_new += t;
                if self.objective() > self.settings.divergence_cap {
                    return Err(QpError::Infeasible);
                }
                if t2 <= t1 {
                    match self.factor.append_projected(d, self.row_norms[p], DEPENDENCE_TOL) {
                        Append::Added => {}
                        Append::Dependent => {
                            return Err(QpError::Numerical(
                                "added constraint became dependent".into(),
                            ))
                        }
                    }
                    self.active.push(p);
                    self.mult.push(u_new);
                    self.is_active[p] = true;
                    break;
                }
                let k = drop_at.expect("partial step always has a blocking multiplier");
                self.mult[k] = 0.0;
                self.drop_active(k);
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub(crate) fn active_set(&self) -> &[usize] {
        &self.active
    }
}
