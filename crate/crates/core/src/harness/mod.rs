//! Synthetic ensembles, experiment runner and solution audit.

mod audit;
mod config;
mod experiment;

pub use audit::{audit_sampled, audit_solution, AuditReport, ManifoldAudit, AUDIT_TOL};
pub use config::{default_budgets, ConfigError, ExperimentConfig, Mode};
pub use experiment::{run_experiment, run_seed, ExperimentOutput, Method, ResultRow, RESULTS_HEADER};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::ModelError;
use crate::types::{EllipsoidManifold, Label, Manifold};

/// `P` random `L_q` ellipsoids in `R^N` with `D` axes each: Gaussian centers,
/// Gaussian basis vectors (normalized), radii uniform on `[0.5 R0, 1.5 R0]`.
/// The first `P/2` are labeled +1.
pub fn generate_ensemble(
    n: usize,
    p: usize,
    d: usize,
    r0: f64,
    q: f64,
    seed: u64,
) -> Result<Vec<EllipsoidManifold>, ModelError> {
    let invalid = |name, reason: String| ModelError::InvalidParameter { name, reason };
    if n == 0 || d == 0 {
        return Err(invalid("N/D", format!("dimensions must be positive, got N={n}, D={d}")));
    }
    if p == 0 || p % 2 != 0 {
        return Err(invalid("P", format!("must be a positive even number, got {p}")));
    }
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(invalid("R0", format!("must be finite and > 0, got {r0}")));
    }
    if !(q >= 1.0) {
        return Err(invalid("q", format!("must be >= 1, got {q}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.sample(StandardNormal)).collect()
    };
    (0..p)
        .map(|k| {
            let center = gauss(&mut rng, n);
            let basis: Vec<Vec<f64>> = (0..d).map(|_| gauss(&mut rng, n)).collect();
            let radii: Vec<f64> = (0..d).map(|_| rng.random_range(0.5 * r0..=1.5 * r0)).collect();
            let label = if k < p / 2 { Label::Positive } else { Label::Negative };
            EllipsoidManifold::new(center, basis, radii, q, label)
        })
        .collect()
}

/// Appends a constant-1 feature to every center (and 0 to every axis), so a
/// homogeneous separator acts as one with bias.
pub fn with_bias(manifolds: &[EllipsoidManifold]) -> Vec<EllipsoidManifold> {
    manifolds
        .iter()
        .map(|m| {
            let mut center = m.center().to_vec();
            center.push(1.0);
            let basis = m
                .basis()
                .iter()
                .map(|u| {
                    let mut u = u.clone();
                    u.push(0.0);
                    u
                })
                .collect();
            EllipsoidManifold::new(center, basis, m.radii().to_vec(), m.q(), m.label())
                .expect("extending a valid manifold keeps it valid")
        })
        .collect()
}

/// Independent sub-seed for a purpose `tag` of an experiment seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03)
}
