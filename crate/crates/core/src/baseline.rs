//! Point-sampling SVM baseline: sample each manifold finitely, pool the
//! samples and train an ordinary max-margin classifier on them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::QpError;
use crate::linalg::{dot, scaled};
use crate::qp::{kkt_residual, DualState, HardMarginSolver, KktData, QpSettings, SlackSolver};
use crate::sampling::QSphere;
use crate::types::{EllipsoidManifold, Label, Manifold, QpSolution};

/// Most-violated points added per outer round of [`train_point_svm`].
pub const CHUNK: usize = 128;

/// `count` parameter vectors drawn on the unit q-sphere of `m`.
pub fn sample_params(m: &EllipsoidManifold, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    QSphere::new(m.param_dim(), m.q()).sample_many(rng, count)
}

/// `count` surface points of `m`.
pub fn sample_manifold(m: &EllipsoidManifold, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_params(m, count, &mut rng)
        .iter()
        .map(|s| m.point_unchecked(s))
        .collect()
}

/// Pools `per_manifold` surface samples of every manifold, sample-major so
/// that any prefix covers the manifolds evenly. Manifold `p` draws from
/// stream `p` of the seed.
pub fn pooled_samples(
    manifolds: &[EllipsoidManifold],
    per_manifold: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Label>) {
    let per: Vec<Vec<Vec<f64>>> = manifolds
        .par_iter()
        .enumerate()
        .map(|(p, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            sample_params(m, per_manifold, &mut rng)
                .iter()
                .map(|s| m.point_unchecked(s))
                .collect()
        })
        .collect();
    let mut points = Vec::with_capacity(per_manifold * manifolds.len());
    let mut labels = Vec::with_capacity(points.capacity());
    for j in 0..per_manifold {
        for (p, m) in manifolds.iter().enumerate() {
            points.push(per[p][j].clone());
            labels.push(m.label());
        }
    }
    (points, labels)
}

fn most_violated(margins: &[f64], included: &[bool], tol: f64, limit: usize) -> Vec<usize> {
    let mut cand: Vec<usize> = (0..margins.len())
        .filter(|&i| !included[i] && margins[i] < 1.0 - tol)
        .collect();
    cand.sort_by(|&a, &b| margins[a].total_cmp(&margins[b]).then(a.cmp(&b)));
    cand.truncate(limit);
    cand
}

/// Hard-margin (`c = None`) or per-point soft-margin SVM on a pooled sample.
/// Each point is its own one-point manifold without a center constraint.
/// Points enter the inner solver in rounds of the most violated ones, which
/// is exact: the loop stops only when every point satisfies its constraint.
pub fn train_point_svm(
    points: &[Vec<f64>],
    labels: &[Label],
    c: Option<f64>,
    qp_tolerance: f64,
) -> Result<QpSolution, QpError> {
    if points.len() != labels.len() {
        return Err(QpError::DimensionMismatch {
            expected: points.len(),
            found: labels.len(),
        });
    }
    let dim = points.first().map_or(0, Vec::len);
    if let Some(bad) = points.iter().find(|x| x.len() != dim) {
        return Err(QpError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let n = points.len();
    let z: Vec<Vec<f64>> = points
        .iter()
        .zip(labels)
        .map(|(x, y)| scaled(y.sign(), x))
        .collect();
    let settings = QpSettings::with_tolerance(qp_tolerance);
    let mut included = vec![false; n];
    let mut order = Vec::new();

    enum Inner {
        Hard(HardMarginSolver),
        Slack(SlackSolver),
    }
    let mut inner = match c {
        None => Inner::Hard(HardMarginSolver::new(dim, settings)),
        Some(c) => Inner::Slack(SlackSolver::new(dim, c, vec![None; n], settings)?),
    };
    let mut w = vec![0.0; dim];
    loop {
        let margins: Vec<f64> = z.par_iter().map(|zi| dot(zi, &w)).collect();
        let add = most_violated(&margins, &included, settings.tolerance, CHUNK);
        if add.is_empty() {
            break;
        }
        for &i in &add {
            included[i] = true;
            order.push(i);
        }
        match &mut inner {
            Inner::Hard(s) => {
                for &i in &add {
                    s.add_constraint(z[i].clone())?;
                }
                s.solve()?;
                w = s.weights().to_vec();
            }
            Inner::Slack(s) => {
                s.add_points(add.iter().map(|&i| (z[i].clone(), i)).collect())?;
                s.solve()?;
                w = s.weights().to_vec();
            }
        }
    }

    let mut alpha = vec![0.0; n];
    let (slacks, objective) = match &inner {
        Inner::Hard(s) => {
            for (k, a) in s.multipliers().into_iter().enumerate() {
                alpha[order[k]] = a;
            }
            (vec![0.0; n], QpSolution::objective_of(&w, &vec![0.0; n], None))
        }
        Inner::Slack(s) => {
            for (k, a) in s.dual().alpha.into_iter().enumerate() {
                alpha[order[k]] = a;
            }
            let xi = s.slacks().to_vec();
            let f = QpSolution::objective_of(&w, &xi, c);
            (xi, f)
        }
    };
    let groups: Vec<usize> = (0..n).collect();
    let data = KktData {
        points: &z,
        groups: &groups,
        centers: &[],
        c,
    };
    let dual = DualState {
        alpha,
        beta: Vec::new(),
    };
    let kkt = kkt_residual(&data, &w, &slacks, &dual);
    Ok(QpSolution {
        weights: w,
        slacks,
        objective,
        kkt_residual: kkt,
    })
}

/// Average over manifolds of the fraction of `m_test` fresh surface samples
/// with `y⟨w, x⟩ <= 0`. Manifold `p` draws from stream `p` of the seed.
pub fn generalization_error(
    w: &[f64],
    manifolds: &[EllipsoidManifold],
    m_test: usize,
    seed: u64,
) -> f64 {
    if manifolds.is_empty() || m_test == 0 {
        return 0.0;
    }
    let total: f64 = manifolds
        .par_iter()
        .enumerate()
        .map(|(p, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let y = m.label().sign();
            let wc = dot(w, m.center());
            let coef: Vec<f64> = m
                .basis_projections(w)
                .into_iter()
                .zip(m.radii())
                .map(|(wu, r)| wu * r)
                .collect();
            let sphere = QSphere::new(m.param_dim(), m.q());
            let errors = (0..m_test)
                .filter(|_| {
                    let s = sphere.sample(&mut rng);
                    y * (wc + dot(&s, &coef)) <= 0.0
                })
                .count();
            errors as f64 / m_test as f64
        })
        .sum();
    total / manifolds.len() as f64
}
