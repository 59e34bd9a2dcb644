use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::dot;
use crate::oracle::ellipsoid_worst_point;
use crate::sampling::QSphere;
use crate::types::{EllipsoidManifold, Manifold, SampledManifold};

/// Slack on top of `δ` before a sampled point counts as a violation.
pub const AUDIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldAudit {
    pub manifold: usize,
    /// Smallest `y⟨w, x⟩` over the audit samples.
    pub worst_sampled_margin: f64,
    /// Oracle minimum (ellipsoids only).
    pub analytic_margin: Option<f64>,
    /// Samples with `1 − margin − ξ_p > δ + AUDIT_TOL`.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub delta: f64,
    pub samples_per_manifold: usize,
    pub manifolds: Vec<ManifoldAudit>,
}

impl AuditReport {
    pub fn total_violations(&self) -> usize {
        self.manifolds.iter().map(|m| m.violations).sum()
    }

    pub fn passed(&self) -> bool {
        self.total_violations() == 0
    }

    pub fn worst_sampled_margin(&self) -> f64 {
        self.manifolds
            .iter()
            .map(|m| m.worst_sampled_margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `sampled − analytic` gap; negative would mean the oracle missed
    /// a lower point.
    pub fn max_gap(&self) -> f64 {
        self.manifolds
            .iter()
            .filter_map(|m| m.analytic_margin.map(|a| m.worst_sampled_margin - a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_gap(&self) -> f64 {
        self.manifolds
            .iter()
            .filter_map(|m| m.analytic_margin.map(|a| m.worst_sampled_margin - a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "samples_per_manifold={} delta={} violations={} worst_margin={:.12e}",
            self.samples_per_manifold,
            self.delta,
            self.total_violations(),
            self.worst_sampled_margin()
        );
        if self.manifolds.iter().any(|m| m.analytic_margin.is_some()) {
            out.push_str(&format!(
                " gap_to_oracle=[{:.3e}, {:.3e}]",
                self.min_gap(),
                self.max_gap()
            ));
        }
        out.push_str(if self.passed() { " PASS" } else { " FLAGGED" });
        out
    }
}

/// Dense independent check of a solution: `samples` surface points per
/// ellipsoid (stream `p` of `seed` for manifold `p`). `slacks = None` means
/// hard margin.
pub fn audit_solution(
    w: &[f64],
    slacks: Option<&[f64]>,
    manifolds: &[EllipsoidManifold],
    delta: f64,
    samples: usize,
    seed: u64,
) -> AuditReport {
    let per = manifolds
        .par_iter()
        .enumerate()
        .map(|(p, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let y = m.label().sign();
            let wc = y * dot(w, m.center());
            let coef: Vec<f64> = m
                .basis_projections(w)
                .into_iter()
                .zip(m.radii())
                .map(|(wu, r)| y * wu * r)
                .collect();
            let xi = slacks.map_or(0.0, |s| s[p]);
            let sphere = QSphere::new(m.param_dim(), m.q());
            let mut worst = f64::INFINITY;
            let mut violations = 0;
            for _ in 0..samples {
                let s = sphere.sample(&mut rng);
                let margin = wc + dot(&s, &coef);
                worst = worst.min(margin);
                if 1.0 - margin - xi > delta + AUDIT_TOL {
                    violations += 1;
                }
            }
            let analytic = ellipsoid_worst_point(m, w).ok().map(|wp| wp.margin);
            ManifoldAudit {
                manifold: p,
                worst_sampled_margin: worst,
                analytic_margin: analytic,
                violations,
            }
        })
        .collect();
    AuditReport {
        delta,
        samples_per_manifold: samples,
        manifolds: per,
    }
}

/// Exhaustive check over every stored sample.
pub fn audit_sampled(
    w: &[f64],
    slacks: Option<&[f64]>,
    manifolds: &[SampledManifold],
    delta: f64,
) -> AuditReport {
    let per = manifolds
        .par_iter()
        .enumerate()
        .map(|(p, m)| {
            let y = m.label().sign();
            let xi = slacks.map_or(0.0, |s| s[p]);
            let margins: Vec<f64> = m.points().iter().map(|x| y * dot(w, x)).collect();
            ManifoldAudit {
                manifold: p,
                worst_sampled_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
                analytic_margin: None,
                violations: margins.iter().filter(|&&g| 1.0 - g - xi > delta + AUDIT_TOL).count(),
            }
        })
        .collect();
    AuditReport {
        delta,
        samples_per_manifold: manifolds.iter().map(SampledManifold::len).max().unwrap_or(0),
        manifolds: per,
    }
}
