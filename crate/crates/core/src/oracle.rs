//! Separation oracles: locate the manifold point with the smallest signed
//! margin `y⟨w, x⟩` for the current weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::OracleError;
use crate::linalg::{conjugate_exponent, dot};
use crate::types::{EllipsoidManifold, Manifold, OracleResult, OracleSelection, SampledManifold};

/// Minimizer of a manifold's margin for fixed weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstPoint {
    pub point: Vec<f64>,
    /// `y⟨w, point⟩`
    pub margin: f64,
    /// Parameter vector `s` (ellipsoids only).
    pub params: Option<Vec<f64>>,
    /// Sample index (sampled manifolds only).
    pub sample: Option<usize>,
}

/// Minimizer of `⟨s, h⟩` over `‖s‖_q <= 1`. Zero entries of `h` get `s_i = 0`;
/// for `q = 1` the lowest-index dominant coordinate wins ties.
pub fn minimizing_params(h: &[f64], q: f64) -> Vec<f64> {
    let hmax = h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut s = vec![0.0; h.len()];
    if hmax == 0.0 {
        return s;
    }
    if q == 1.0 {
        let i = h.iter().position(|v| v.abs() == hmax).unwrap();
        s[i] = -h[i].signum();
        return s;
    }
    if q.is_infinite() {
        for (si, hi) in s.iter_mut().zip(h) {
            if *hi != 0.0 {
                *si = -hi.signum();
            }
        }
        return s;
    }
    let p = conjugate_exponent(q);
    // scaled by hmax; the ratio is invariant to the scale
    let denom = h
        .iter()
        .map(|v| (v.abs() / hmax).powf(p))
        .sum::<f64>()
        .powf(1.0 / q);
    for (si, hi) in s.iter_mut().zip(h) {
        if *hi != 0.0 {
            *si = -hi.signum() * (hi.abs() / hmax).powf(p - 1.0) / denom;
        }
    }
    s
}

/// `h_i = y R_i ⟨w, u_i⟩`, the linear coefficients of the margin in `s`.
pub fn margin_coefficients(m: &EllipsoidManifold, w: &[f64]) -> Vec<f64> {
    let y = m.label().sign();
    m.basis_projections(w)
        .into_iter()
        .zip(m.radii())
        .map(|(wu, r)| y * r * wu)
        .collect()
}

fn check_dim(m: &impl Manifold, w: &[f64]) -> Result<(), OracleError> {
    if w.len() != m.ambient_dim() {
        return Err(OracleError::DimensionMismatch {
            expected: m.ambient_dim(),
            found: w.len(),
        });
    }
    Ok(())
}

fn ellipsoid_from_params(m: &EllipsoidManifold, w: &[f64], s: Vec<f64>, h: &[f64]) -> WorstPoint {
    let y = m.label().sign();
    let margin = y * dot(w, m.center()) + dot(&s, h);
    WorstPoint {
        point: m.point_unchecked(&s),
        margin,
        params: Some(s),
        sample: None,
    }
}

/// Closed-form worst point of an `L_q` ellipsoid. `q = 1` is routed to
/// [`ellipsoid_worst_point_q1`].
pub fn ellipsoid_worst_point(m: &EllipsoidManifold, w: &[f64]) -> Result<WorstPoint, OracleError> {
    if m.q() <= 1.0 {
        return ellipsoid_worst_point_q1(m, w);
    }
    check_dim(m, w)?;
    let h = margin_coefficients(m, w);
    let s = minimizing_params(&h, m.q());
    Ok(ellipsoid_from_params(m, w, s, &h))
}

/// Worst point of an `L_1` ellipsoid: the signed vertex along the dominant
/// coefficient.
pub fn ellipsoid_worst_point_q1(m: &EllipsoidManifold, w: &[f64]) -> Result<WorstPoint, OracleError> {
    check_dim(m, w)?;
    let h = margin_coefficients(m, w);
    let s = minimizing_params(&h, 1.0);
    Ok(ellipsoid_from_params(m, w, s, &h))
}

/// Local search over the neighbor graph: from each start, repeatedly move to
/// the neighbor with the lowest margin while it improves.
pub fn sampled_worst_point<R: Rng + ?Sized>(
    m: &SampledManifold,
    w: &[f64],
    restarts: usize,
    rng: &mut R,
    previous: Option<usize>,
) -> Result<WorstPoint, OracleError> {
    if m.is_empty() {
        return Err(OracleError::EmptyManifold);
    }
    if restarts == 0 {
        return Err(OracleError::NoRestarts);
    }
    check_dim(m, w)?;
    let y = m.label().sign();
    let mut score: Vec<Option<f64>> = vec![None; m.len()];
    let eval = |i: usize, score: &mut Vec<Option<f64>>| -> f64 {
        *score[i].get_or_insert_with(|| y * dot(w, &m.points()[i]))
    };
    let mut starts: Vec<usize> = (0..restarts).map(|_| rng.random_range(0..m.len())).collect();
    if let Some(prev) = previous.filter(|&p| p < m.len()) {
        starts.push(prev);
    }
    let mut best: Option<(usize, f64)> = None;
    for start in starts {
        let mut cur = start;
        let mut cur_score = eval(cur, &mut score);
        loop {
            let mut next = None;
            for &j in m.neighbors(cur) {
                let sj = eval(j, &mut score);
                if sj < cur_score && next.is_none_or(|(_, b)| sj < b) {
                    next = Some((j, sj));
                }
            }
            match next {
                Some((j, sj)) => {
                    cur = j;
                    cur_score = sj;
                }
                None => break,
            }
        }
        if best.is_none_or(|(_, b)| cur_score < b) {
            best = Some((cur, cur_score));
        }
    }
    let (i, margin) = best.expect("at least one start");
    Ok(WorstPoint {
        point: m.points()[i].clone(),
        margin,
        params: None,
        sample: Some(i),
    })
}

/// A per-manifold worst-point search used by the cutting-plane drivers.
pub trait SeparationOracle {
    type Manifold: Manifold;

    fn manifolds(&self) -> &[Self::Manifold];

    fn worst_point(&mut self, manifold: usize, w: &[f64]) -> Result<WorstPoint, OracleError>;
}

/// Analytic oracle over ellipsoids.
#[derive(Debug, Clone, Copy)]
pub struct EllipsoidOracle<'a> {
    manifolds: &'a [EllipsoidManifold],
}

impl<'a> EllipsoidOracle<'a> {
    pub fn new(manifolds: &'a [EllipsoidManifold]) -> Self {
        Self { manifolds }
    }
}

impl SeparationOracle for EllipsoidOracle<'_> {
    type Manifold = EllipsoidManifold;

    fn manifolds(&self) -> &[EllipsoidManifold] {
        self.manifolds
    }

    fn worst_point(&mut self, manifold: usize, w: &[f64]) -> Result<WorstPoint, OracleError> {
        ellipsoid_worst_point(&self.manifolds[manifold], w)
    }
}

/// Local-search oracle over sampled manifolds. Remembers the last worst
/// sample of each manifold and uses it as an extra start.
#[derive(Debug, Clone)]
pub struct SampledOracle<'a> {
    manifolds: &'a [SampledManifold],
    restarts: usize,
    rng: ChaCha8Rng,
    previous: Vec<Option<usize>>,
}

/// Random starts per search.
pub const DEFAULT_RESTARTS: usize = 8;
/// Parameter-space neighbors per sample.
pub const DEFAULT_NEIGHBORS: usize = 5;

impl<'a> SampledOracle<'a> {
    pub fn new(manifolds: &'a [SampledManifold], restarts: usize, seed: u64) -> Self {
        Self {
            manifolds,
            restarts,
            rng: ChaCha8Rng::seed_from_u64(seed),
            previous: vec![None; manifolds.len()],
        }
    }
}

impl SeparationOracle for SampledOracle<'_> {
    type Manifold = SampledManifold;

    fn manifolds(&self) -> &[SampledManifold] {
        self.manifolds
    }

    fn worst_point(&mut self, manifold: usize, w: &[f64]) -> Result<WorstPoint, OracleError> {
        let found = sampled_worst_point(
            &self.manifolds[manifold],
            w,
            self.restarts,
            &mut self.rng,
            self.previous[manifold],
        )?;
        self.previous[manifold] = found.sample;
        Ok(found)
    }
}

/// Scans the manifolds for a point with violation `1 − margin − ξ_p > delta`
/// (`xi = None` in hard mode). With `First` the scan stops at the first such
/// manifold; otherwise the largest violation wins (lowest index on ties).
pub fn find_violation<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    w: &[f64],
    xi: Option<&[f64]>,
    delta: f64,
    selection: OracleSelection,
) -> Result<OracleResult, OracleError> {
    let count = oracle.manifolds().len();
    let mut largest: Option<(f64, usize, Vec<f64>)> = None;
    for p in 0..count {
        let found = oracle.worst_point(p, w)?;
        let slack = xi.map_or(0.0, |x| x[p]);
        let violation = 1.0 - found.margin - slack;
        if violation > delta && selection == OracleSelection::First {
            return Ok(OracleResult {
                found: true,
                point: found.point,
                manifold_index: p,
                violation,
            });
        }
        if largest.as_ref().is_none_or(|(v, _, _)| violation > *v) {
            largest = Some((violation, p, found.point));
        }
    }
    match largest {
        Some((violation, p, point)) => Ok(OracleResult {
            found: violation > delta,
            point,
            manifold_index: p,
            violation,
        }),
        None => Ok(OracleResult {
            found: false,
            point: w.iter().map(|_| 0.0).collect(),
            manifold_index: 0,
            violation: f64::NEG_INFINITY,
        }),
    }
}
