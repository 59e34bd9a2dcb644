//! Random parameter vectors on the `L_q` unit sphere.
//!
//! Coordinates are drawn from the sign-symmetric generalized Gaussian with
//! density ∝ exp(−|t|^q) and the vector is then normalized to `‖s‖_q = 1`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::linalg::qnorm;

/// Sampler for `{ s ∈ R^D : ‖s‖_q = 1 }`.
#[derive(Debug, Clone)]
pub struct QSphere {
    dim: usize,
    q: f64,
    radial: Option<Gamma<f64>>,
}

impl QSphere {
    pub fn new(dim: usize, q: f64) -> Self {
        assert!(q >= 1.0, "q must be >= 1");
        assert!(dim >= 1, "dimension must be >= 1");
        let radial = if q.is_finite() {
            Some(Gamma::new(1.0 + 1.0 / q, 1.0).expect("valid gamma shape"))
        } else {
            None
        };
        Self { dim, q, radial }
    }

    fn coordinate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let magnitude = match &self.radial {
            // |t| = G^{1/q} U with G ~ Gamma(1 + 1/q) has density ∝ exp(-|t|^q)
            Some(g) => g.sample(rng).powf(1.0 / self.q) * u,
            None => u,
        };
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let t: Vec<f64> = (0..self.dim).map(|_| self.coordinate(rng)).collect();
            let n = qnorm(&t, self.q);
            if n > 0.0 {
                return t.into_iter().map(|v| v / n).collect();
            }
        }
    }

    pub fn sample_many<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}
