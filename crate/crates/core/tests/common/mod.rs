//! Independent reference computations shared by the integration tests.
//! Nothing here calls the library's solvers or oracles.

#![allow(dead_code)]

use manifold_cp::{EllipsoidManifold, Label, Manifold};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn qnorm(s: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        s.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        s.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Every subset of `0..n` with at most `max_size` elements.
fn subsets(n: usize, max_size: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        visit(cur);
        if cur.len() == max {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, max, cur, visit);
            cur.pop();
        }
    }
    rec(0, n, max_size, &mut Vec::new(), &mut visit);
}

/// One linear inequality `⟨a_w, w⟩ + ⟨a_xi, ξ⟩ >= b` of a brute-force problem.
#[derive(Clone, Debug)]
pub struct Row {
    pub a: Vec<f64>,
    pub b: f64,
}

/// Optimum of `min ½‖w‖² + ⟨lin, ξ⟩` over `x = (w, ξ)`, `w ∈ R^n`,
/// `ξ ∈ R^m`, subject to `rows`, by enumerating working sets: each subset
/// is solved as an equality problem through its KKT system, and the
/// smallest objective among the primal-feasible solutions is returned.
/// Every such solution is feasible, and the optimal face is among the
/// subsets with independent rows, so this is the optimum.
pub fn brute_force_qp(n: usize, lin: &[f64], rows: &[Row]) -> Option<(f64, Vec<f64>)> {
    let m = lin.len();
    let nv = n + m;
    let mut best: Option<(f64, Vec<f64>)> = None;
    subsets(rows.len(), nv, |s| {
        let k = s.len();
        let size = nv + k;
        let mut kkt = DMatrix::<f64>::zeros(size, size);
        let mut rhs = DVector::<f64>::zeros(size);
        for i in 0..n {
            kkt[(i, i)] = 1.0;
        }
        for j in 0..m {
            rhs[n + j] = -lin[j];
        }
        for (r, &idx) in s.iter().enumerate() {
            for (v, &a) in rows[idx].a.iter().enumerate() {
                kkt[(nv + r, v)] = a;
                kkt[(v, nv + r)] = a;
            }
            rhs[nv + r] = rows[idx].b;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            return;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return;
        }
        let x: Vec<f64> = sol.iter().take(nv).copied().collect();
        let feasible = rows
            .iter()
            .all(|r| dot(&r.a, &x) >= r.b - 1e-9 * (1.0 + r.b.abs() + norm(&r.a) * norm(&x)));
        if !feasible {
            return;
        }
        let f = 0.5 * dot(&x[..n], &x[..n]) + dot(lin, &x[n..]);
        if best.as_ref().is_none_or(|(b, _)| f < *b) {
            best = Some((f, x));
        }
    });
    best
}

/// Hard-margin optimum `min ½‖w‖²` s.t. `⟨z_i, w⟩ >= 1` for signed points.
pub fn brute_force_hard(dim: usize, signed: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let rows: Vec<Row> = signed.iter().map(|z| Row { a: z.clone(), b: 1.0 }).collect();
    brute_force_qp(dim, &[], &rows)
}

/// Shared-slack optimum for signed points `z_i` in groups `groups[i]`, with
/// optional signed center constraints per group. Returns `(F, w, ξ)`.
pub fn brute_force_slack(
    dim: usize,
    signed: &[Vec<f64>],
    groups: &[usize],
    centers: &[Option<Vec<f64>>],
    c: f64,
) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let p = centers.len();
    let mut rows = Vec::new();
    for (z, &g) in signed.iter().zip(groups) {
        let mut a = z.clone();
        a.extend((0..p).map(|j| if j == g { 1.0 } else { 0.0 }));
        rows.push(Row { a, b: 1.0 });
    }
    for cz in centers.iter().flatten() {
        let mut a = cz.clone();
        a.extend(std::iter::repeat_n(0.0, p));
        rows.push(Row { a, b: 1.0 });
    }
    for j in 0..p {
        let mut a = vec![0.0; dim + p];
        a[dim + j] = 1.0;
        rows.push(Row { a, b: 0.0 });
    }
    let (f, x) = brute_force_qp(dim, &vec![c; p], &rows)?;
    Some((f, x[..dim].to_vec(), x[dim..].to_vec()))
}

/// Random ellipsoid with unit basis columns and radii in `[0.5, 1.5]`.
pub fn random_ellipsoid(rng: &mut ChaCha8Rng, n: usize, d: usize, q: f64, label: Label) -> EllipsoidManifold {
    let center = gaussian(rng, n);
    let basis: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            let u = gaussian(rng, n);
            let l = norm(&u);
            u.iter().map(|v| v / l).collect()
        })
        .collect();
    let radii: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
    EllipsoidManifold::new(center, basis, radii, q, label).unwrap()
}

/// `y⟨w, c + Σ R_i s_i u_i⟩` by explicit summation.
pub fn margin_at(m: &EllipsoidManifold, w: &[f64], s: &[f64]) -> f64 {
    let mut x = m.center().to_vec();
    for ((u, r), si) in m.basis().iter().zip(m.radii()).zip(s) {
        for (xv, uv) in x.iter_mut().zip(u) {
            *xv += r * si * uv;
        }
    }
    m.label().sign() * dot(w, &x)
}

fn to_sphere(d: &[f64], q: f64) -> Vec<f64> {
    let l = qnorm(d, q);
    d.iter().map(|v| v / l).collect()
}

fn direction(angles: &[f64]) -> Vec<f64> {
    match angles {
        [t] => vec![t.cos(), t.sin()],
        [t, f] => vec![t.sin() * f.cos(), t.sin() * f.sin(), t.cos()],
        _ => unreachable!("grid oracle handles D <= 3"),
    }
}

/// Minimum margin over a grid of the unit q-sphere (`D <= 3`), refined by
/// repeated zooming around the best cells. Returns `(min, samples used)`.
/// The grid minimum is attained at real sphere points, so it is an upper
/// bound on the true minimum.
pub fn grid_min(m: &EllipsoidManifold, w: &[f64], budget: usize) -> (f64, usize) {
    let q = m.q();
    let d = m.param_dim();
    let mut used = 0;
    let eval = |s: &[f64], used: &mut usize| {
        *used += 1;
        margin_at(m, w, s)
    };
    if d == 1 {
        let v = eval(&[1.0], &mut used).min(eval(&[-1.0], &mut used));
        return (v, used);
    }
    if d == 2 {
        let coarse = budget / 2;
        let step = std::f64::consts::TAU / coarse as f64;
        let mut cells: Vec<(f64, f64)> = (0..coarse)
            .map(|k| {
                let t = k as f64 * step;
                (eval(&to_sphere(&direction(&[t]), q), &mut used), t)
            })
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = cells[0].0;
        let per = (budget - coarse) / 4;
        for &(_, t0) in cells.iter().take(4) {
            let (mut center, mut width) = (t0, step);
            let levels = 8;
            for _ in 0..levels {
                let k = per / levels;
                let mut local = (f64::INFINITY, center);
                for j in 0..=k {
                    let t = center - width + 2.0 * width * j as f64 / k as f64;
                    let v = eval(&to_sphere(&direction(&[t]), q), &mut used);
                    if v < local.0 {
                        local = (v, t);
                    }
                }
                best = best.min(local.0);
                center = local.1;
                width *= 4.0 / k as f64;
            }
        }
        return (best, used);
    }
    let side = ((budget / 2) as f64).sqrt() as usize;
    let (dt, df) = (std::f64::consts::PI / side as f64, std::f64::consts::TAU / side as f64);
    let mut cells = Vec::with_capacity(side * side);
    for i in 0..=side {
        for j in 0..side {
            let a = [i as f64 * dt, j as f64 * df];
            cells.push((eval(&to_sphere(&direction(&a), q), &mut used), a));
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = cells[0].0;
    let seeds = 4;
    let levels = 8;
    let k = (((budget.saturating_sub(used)) / (seeds * levels)) as f64).sqrt() as usize;
    let k = k.max(4);
    for &(_, a0) in cells.iter().take(seeds) {
        let (mut center, mut width) = (a0, [dt, df]);
        for _ in 0..levels {
            let mut local = (f64::INFINITY, center);
            for i in 0..=k {
                for j in 0..=k {
                    let a = [
                        center[0] - width[0] + 2.0 * width[0] * i as f64 / k as f64,
                        center[1] - width[1] + 2.0 * width[1] * j as f64 / k as f64,
                    ];
                    let v = eval(&to_sphere(&direction(&a), q), &mut used);
                    if v < local.0 {
                        local = (v, a);
                    }
                }
            }
            best = best.min(local.0);
            center = local.1;
            width = [width[0] * 4.0 / k as f64, width[1] * 4.0 / k as f64];
        }
    }
    (best, used)
}

/// Minimum margin over `random` uniform-direction samples of the q-sphere
/// followed by compass search on `s = v / ‖v‖_q` from the best sample.
/// Returns `(minimum of the raw samples, polished minimum)`.
pub fn sampled_then_polished(m: &EllipsoidManifold, w: &[f64], random: usize, seed: u64) -> (f64, f64) {
    let q = m.q();
    let d = m.param_dim();
    let mut r = rng(seed);
    let mut best = (f64::INFINITY, vec![0.0; d]);
    for _ in 0..random {
        let s = to_sphere(&gaussian(&mut r, d), q);
        let v = margin_at(m, w, &s);
        if v < best.0 {
            best = (v, s);
        }
    }
    let raw = best.0;
    let (mut f, mut x) = best;
    let mut step = 0.1;
    while step > 1e-13 {
        let mut improved = false;
        for i in 0..d {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += sign * step;
                if y.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let y = to_sphere(&y, q);
                let v = margin_at(m, w, &y);
                if v < f {
                    f = v;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (raw, f)
}

/// Every signed vertex `±e_i` of the parameter cross-polytope.
pub fn vertex_min(m: &EllipsoidManifold, w: &[f64]) -> (f64, Vec<f64>) {
    let d = m.param_dim();
    let mut best = (f64::INFINITY, Vec::new());
    for i in 0..d {
        for sign in [-1.0, 1.0] {
            let mut s = vec![0.0; d];
            s[i] = sign;
            let v = margin_at(m, w, &s);
            if v < best.0 - 1e-15 {
                best = (v, s);
            }
        }
    }
    best
}

/// A small random inner problem with its own brute-force answer.
#[derive(Clone, Debug)]
pub struct Instance {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub groups: Vec<usize>,
    pub labels: Vec<Label>,
    pub centers: Option<Vec<Vec<f64>>>,
    pub c: Option<f64>,
}

impl Instance {
    pub fn signed_points(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .zip(&self.groups)
            .map(|(x, &g)| x.iter().map(|v| v * self.labels[g].sign()).collect())
            .collect()
    }

    pub fn signed_centers(&self) -> Vec<Option<Vec<f64>>> {
        match &self.centers {
            Some(cs) => cs
                .iter()
                .zip(&self.labels)
                .map(|(c, y)| Some(c.iter().map(|v| v * y.sign()).collect()))
                .collect(),
            None => vec![None; self.labels.len()],
        }
    }

    pub fn working_set(&self) -> manifold_cp::WorkingSet {
        let mut ws = manifold_cp::WorkingSet::new(self.labels.len());
        for (x, &g) in self.points.iter().zip(&self.groups) {
            ws.push(x.clone(), g).unwrap();
        }
        ws
    }

    pub fn problem(&self) -> manifold_cp::qp::QpProblem {
        use manifold_cp::qp::QpProblem;
        match (self.c, &self.centers) {
            (None, _) => QpProblem::hard(self.working_set(), self.labels.clone()).unwrap(),
            (Some(c), Some(cs)) => QpProblem::slack(self.working_set(), self.labels.clone(), cs.clone(), c).unwrap(),
            (Some(c), None) => QpProblem::slack_without_centers(self.working_set(), self.labels.clone(), c).unwrap(),
        }
    }

    pub fn constraint_count(&self) -> usize {
        self.points.len() + self.centers.as_ref().map_or(0, Vec::len)
    }

    /// `(F, w, ξ)` from enumeration, `None` when infeasible.
    pub fn brute_force(&self) -> Option<(f64, Vec<f64>, Vec<f64>)> {
        match self.c {
            None => brute_force_hard(self.dim, &self.signed_points())
                .map(|(f, w)| (f, w, vec![0.0; self.labels.len()])),
            Some(c) => brute_force_slack(self.dim, &self.signed_points(), &self.groups, &self.signed_centers(), c),
        }
    }
}

fn random_label(rng: &mut ChaCha8Rng) -> Label {
    if rng.random_bool(0.5) {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Hard-margin instance with at most `max_constraints` points; roughly one
/// in five is not separable.
pub fn random_hard_instance(rng: &mut ChaCha8Rng, max_constraints: usize) -> Instance {
    let dim = rng.random_range(2..=5);
    let m = rng.random_range(2..=max_constraints);
    let groups_n = rng.random_range(1..=m);
    let labels: Vec<Label> = (0..groups_n).map(|_| random_label(rng)).collect();
    let dir = {
        let g = gaussian(rng, dim);
        let l = norm(&g);
        g.iter().map(|v| v / l).collect::<Vec<_>>()
    };
    let noise = if rng.random_bool(0.2) { 3.0 } else { 0.6 };
    let mut points = Vec::new();
    let mut groups = Vec::new();
    for i in 0..m {
        let g = if i < groups_n { i } else { rng.random_range(0..groups_n) };
        let offset = rng.random_range(0.5..2.0) * labels[g].sign();
        let x: Vec<f64> = gaussian(rng, dim)
            .iter()
            .zip(&dir)
            .map(|(e, d)| offset * d + noise * e)
            .collect();
        points.push(x);
        groups.push(g);
    }
    Instance {
        dim,
        points,
        groups,
        labels,
        centers: None,
        c: None,
    }
}

/// Shared-slack instance with separable centers and noisy points; points
/// plus centers number at most `max_constraints`.
pub fn random_slack_instance(rng: &mut ChaCha8Rng, max_constraints: usize) -> Instance {
    let dim = rng.random_range(2..=4);
    let p = rng.random_range(2..=3);
    let labels: Vec<Label> = (0..p)
        .map(|j| if j == 0 { Label::Positive } else if j == 1 { Label::Negative } else { random_label(rng) })
        .collect();
    let dir = {
        let g = gaussian(rng, dim);
        let l = norm(&g);
        g.iter().map(|v| v / l).collect::<Vec<_>>()
    };
    let centers: Vec<Vec<f64>> = labels
        .iter()
        .map(|y| {
            gaussian(rng, dim)
                .iter()
                .zip(&dir)
                .map(|(e, d)| y.sign() * 1.5 * d + 0.2 * e)
                .collect()
        })
        .collect();
    let m = rng.random_range(p..=max_constraints - p);
    let spread = rng.random_range(0.5..2.5);
    let mut points = Vec::new();
    let mut groups = Vec::new();
    for i in 0..m {
        let g = if i < p { i } else { rng.random_range(0..p) };
        let x: Vec<f64> = gaussian(rng, dim)
            .iter()
            .zip(&centers[g])
            .map(|(e, c)| c + spread * e)
            .collect();
        points.push(x);
        groups.push(g);
    }
    let c = [0.1, 1.0, 10.0, 100.0][rng.random_range(0..4)];
    Instance {
        dim,
        points,
        groups,
        labels,
        centers: Some(centers),
        c: Some(c),
    }
}
