//! Domain types shared by the solvers, oracles and drivers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg::{axpy, dist, norm2, qnorm};

/// Slack allowed on `‖s‖_q <= 1` when a parameter vector is checked.
pub const PARAM_BALL_TOL: f64 = 1e-9;

/// Two working-set points closer than this (Euclidean) are the same point.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Binary class label of a manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(y: f64) -> Result<Self, ModelError> {
        if y == 1.0 {
            Ok(Label::Positive)
        } else if y == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(ModelError::InvalidParameter {
                name: "label",
                reason: format!("expected +1 or -1, got {y}"),
            })
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign() as i8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let y = f64::deserialize(d)?;
        Label::from_sign(y).map_err(serde::de::Error::custom)
    }
}

/// Common view of a labeled, bounded manifold in feature space.
pub trait Manifold {
    fn label(&self) -> Label;
    /// Ambient dimension `N`.
    fn ambient_dim(&self) -> usize;
    /// Representative point used for initialization and center constraints.
    fn center(&self) -> &[f64];
    /// `L` with `‖x‖ <= L` for every point `x` of the manifold.
    fn norm_bound(&self) -> f64;
}

/// `L` over a whole ensemble.
pub fn ensemble_norm_bound<M: Manifold>(manifolds: &[M]) -> f64 {
    manifolds
        .iter()
        .map(Manifold::norm_bound)
        .fold(0.0, f64::max)
}

/// `{ center + Σ_i R_i s_i u_i : ‖s‖_q <= 1 }`.
///
/// Basis columns are rescaled to unit norm at construction so that the radii
/// are the true semi-axis lengths. They are not orthogonalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidManifold {
    center: Vec<f64>,
    basis: Vec<Vec<f64>>,
    radii: Vec<f64>,
    q: f64,
    label: Label,
}

impl EllipsoidManifold {
    pub fn new(
        center: Vec<f64>,
        basis: Vec<Vec<f64>>,
        radii: Vec<f64>,
        q: f64,
        label: Label,
    ) -> Result<Self, ModelError> {
        let n = center.len();
        if n == 0 {
            return Err(ModelError::InvalidParameter {
                name: "center",
                reason: "empty".into(),
            });
        }
        if basis.len() != radii.len() {
            return Err(ModelError::DimensionMismatch {
                expected: radii.len(),
                found: basis.len(),
                context: "basis columns vs radii",
            });
        }
        if radii.is_empty() {
            return Err(ModelError::InvalidParameter {
                name: "radii",
                reason: "at least one axis is required".into(),
            });
        }
        if !(q >= 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "q",
                reason: format!("norm order must be >= 1, got {q}"),
            });
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "radii",
                reason: format!("radii must be finite and positive, got {r}"),
            });
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "center",
                reason: "non-finite entry".into(),
            });
        }
        let mut unit = Vec::with_capacity(basis.len());
        for col in basis {
            if col.len() != n {
                return Err(ModelError::DimensionMismatch {
                    expected: n,
                    found: col.len(),
                    context: "basis column length",
                });
            }
            let len = norm2(&col);
            if !(len > 0.0) || !len.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name: "basis",
                    reason: "basis columns must be finite and nonzero".into(),
                });
            }
            // columns already unit up to rounding are kept as-is so files round-trip
            if (len - 1.0).abs() <= 4.0 * f64::EPSILON {
                unit.push(col);
            } else {
                unit.push(col.iter().map(|v| v / len).collect());
            }
        }
        Ok(Self {
            center,
            basis: unit,
            radii,
            q,
            label,
        })
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Intrinsic dimension `D`.
    pub fn param_dim(&self) -> usize {
        self.radii.len()
    }

    /// `center + Σ_i R_i s_i u_i`; rejects `s` outside the q-ball.
    pub fn point_on_manifold(&self, s: &[f64]) -> Result<Vec<f64>, ModelError> {
        if s.len() != self.param_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.param_dim(),
                found: s.len(),
                context: "parameter vector",
            });
        }
        let norm = qnorm(s, self.q);
        if norm > 1.0 + PARAM_BALL_TOL {
            return Err(ModelError::OutsideParameterBall { norm, q: self.q });
        }
        Ok(self.point_unchecked(s))
    }

    pub(crate) fn point_unchecked(&self, s: &[f64]) -> Vec<f64> {
        let mut x = self.center.clone();
        for ((si, ri), ui) in s.iter().zip(&self.radii).zip(&self.basis) {
            if *si != 0.0 {
                axpy(si * ri, ui, &mut x);
            }
        }
        x
    }

    /// `(w·u_i)_i`, the projections used for cheap scoring of many parameter vectors.
    pub fn basis_projections(&self, w: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|u| crate::linalg::dot(w, u)).collect()
    }
}

impl Manifold for EllipsoidManifold {
    fn label(&self) -> Label {
        self.label
    }

    fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    fn center(&self) -> &[f64] {
        &self.center
    }

    fn norm_bound(&self) -> f64 {
        // |s_i| <= 1 on every q-ball with q >= 1
        norm2(&self.center) + self.radii.iter().sum::<f64>()
    }
}

/// A manifold known only through samples on a parameter grid, with a
/// symmetric neighbor graph over the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledManifold {
    points: Vec<Vec<f64>>,
    neighbors: Vec<Vec<usize>>,
    label: Label,
    center_index: usize,
}

impl SampledManifold {
    pub fn new(
        points: Vec<Vec<f64>>,
        neighbors: Vec<Vec<usize>>,
        label: Label,
        center_index: usize,
    ) -> Result<Self, ModelError> {
        if points.is_empty() {
            return Err(ModelError::InvalidParameter {
                name: "points",
                reason: "a sampled manifold needs at least one point".into(),
            });
        }
        let n = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: p.len(),
                context: "sample length",
            });
        }
        if neighbors.len() != points.len() {
            return Err(ModelError::DimensionMismatch {
                expected: points.len(),
                found: neighbors.len(),
                context: "neighbor lists",
            });
        }
        if center_index >= points.len() {
            return Err(ModelError::InvalidParameter {
                name: "center_index",
                reason: format!("{center_index} out of range"),
            });
        }
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if j >= points.len() {
                    return Err(ModelError::InvalidParameter {
                        name: "neighbor_lists",
                        reason: format!("index {j} out of range"),
                    });
                }
                if !neighbors[j].contains(&i) {
                    return Err(ModelError::InvalidParameter {
                        name: "neighbor_lists",
                        reason: format!("{j} is a neighbor of {i} but not vice versa"),
                    });
                }
            }
        }
        Ok(Self {
            points,
            neighbors,
            label,
            center_index,
        })
    }

    /// Builds a manifold from samples and their parameter coordinates by
    /// linking each sample to its `k` nearest parameter-space neighbors,
    /// then symmetrizing the graph.
    pub fn from_parameter_samples(
        points: Vec<Vec<f64>>,
        params: &[Vec<f64>],
        k: usize,
        label: Label,
        center_index: usize,
    ) -> Result<Self, ModelError> {
        if params.len() != points.len() {
            return Err(ModelError::DimensionMismatch {
                expected: points.len(),
                found: params.len(),
                context: "parameter coordinates",
            });
        }
        let m = params.len();
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); m];
        for i in 0..m {
            let mut order: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| (dist(&params[i], &params[j]), j))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in order.iter().take(k) {
                neighbors[i].push(j);
            }
        }
        for i in 0..m {
            for idx in 0..neighbors[i].len() {
                let j = neighbors[i][idx];
                if !neighbors[j].contains(&i) {
                    neighbors[j].push(i);
                }
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Self::new(points, neighbors, label, center_index)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn center_index(&self) -> usize {
        self.center_index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Manifold for SampledManifold {
    fn label(&self) -> Label {
        self.label
    }

    fn ambient_dim(&self) -> usize {
        self.points[0].len()
    }

    fn center(&self) -> &[f64] {
        &self.points[self.center_index]
    }

    fn norm_bound(&self) -> f64 {
        self.points.iter().map(|p| norm2(p)).fold(0.0, f64::max)
    }
}

/// One training point of the finite working set.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingEntry {
    pub point: Vec<f64>,
    pub manifold: usize,
}

/// The finite training set `T_k`. Points are never removed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkingSet {
    entries: Vec<WorkingEntry>,
    manifold_count: usize,
}

impl WorkingSet {
    pub fn new(manifold_count: usize) -> Self {
        Self {
            entries: Vec::new(),
            manifold_count,
        }
    }

    /// One center sample per manifold.
    pub fn from_centers<M: Manifold>(manifolds: &[M]) -> Self {
        let mut ws = Self::new(manifolds.len());
        for (p, m) in manifolds.iter().enumerate() {
            ws.entries.push(WorkingEntry {
                point: m.center().to_vec(),
                manifold: p,
            });
        }
        ws
    }

    /// Appends an entry, rejecting bad indices and duplicates.
    pub fn push(&mut self, point: Vec<f64>, manifold: usize) -> Result<(), ModelError> {
        if manifold >= self.manifold_count {
            return Err(ModelError::ManifoldIndex {
                index: manifold,
                count: self.manifold_count,
            });
        }
        if self
            .entries
            .iter()
            .any(|e| e.manifold == manifold && dist(&e.point, &point) <= DUPLICATE_TOL)
        {
            return Err(ModelError::DuplicateEntry { manifold });
        }
        self.entries.push(WorkingEntry { point, manifold });
        Ok(())
    }

    pub fn entries(&self) -> &[WorkingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn manifold_count(&self) -> usize {
        self.manifold_count
    }

    /// Index of the first manifold without any entry, if one exists.
    pub fn uncovered_manifold(&self) -> Option<usize> {
        let mut seen = vec![false; self.manifold_count];
        for e in &self.entries {
            seen[e.manifold] = true;
        }
        seen.iter().position(|s| !s)
    }
}

/// Primal solution of an inner QP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub weights: Vec<f64>,
    /// Per-manifold slacks; all zero in hard-margin mode.
    pub slacks: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
}

impl QpSolution {
    /// `½‖w‖² + C Σ ξ` (`C` absent means hard margin).
    pub fn objective_of(weights: &[f64], slacks: &[f64], c: Option<f64>) -> f64 {
        let quad = 0.5 * crate::linalg::norm2_sq(weights);
        match c {
            Some(c) => quad + c * slacks.iter().sum::<f64>(),
            None => quad,
        }
    }

    pub fn weight_norm_sq(&self) -> f64 {
        crate::linalg::norm2_sq(&self.weights)
    }

    /// Geometric margin `1/‖w‖`.
    pub fn margin(&self) -> f64 {
        1.0 / self.weight_norm_sq().sqrt()
    }
}

/// Which violating manifold the separation step reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleSelection {
    /// First manifold in index order whose violation exceeds the tolerance.
    #[default]
    First,
    /// Manifold with the largest violation.
    Worst,
}

impl FromStr for OracleSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(Self::First),
            "worst" => Ok(Self::Worst),
            other => Err(format!("unknown oracle selection `{other}`")),
        }
    }
}

/// How `T_1` is seeded when the caller does not supply it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPolicy {
    #[default]
    Center,
    Random,
}

/// Settings of one cutting-plane run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// `δ`
    pub tolerance: f64,
    /// `C`; `None` selects hard-margin mode.
    pub slack_coefficient: Option<f64>,
    /// `None` uses the mode default (see `cutting_plane::default_max_iterations`).
    pub max_iterations: Option<usize>,
    pub qp_tolerance: f64,
    pub rng_seed: u64,
    pub oracle_selection: OracleSelection,
    pub init: InitPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            slack_coefficient: None,
            max_iterations: None,
            qp_tolerance: 1e-8,
            rng_seed: 0,
            oracle_selection: OracleSelection::First,
            init: InitPolicy::Center,
        }
    }
}

impl RunConfig {
    pub fn hard(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    pub fn slack(tolerance: f64, c: f64) -> Self {
        Self {
            tolerance,
            slack_coefficient: Some(c),
            ..Self::default()
        }
    }

    pub fn with_max_iterations(mut self, cap: usize) -> Self {
        self.max_iterations = Some(cap);
        self
    }

    pub fn with_selection(mut self, sel: OracleSelection) -> Self {
        self.oracle_selection = sel;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.tolerance > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "tolerance",
                reason: format!("must be > 0, got {}", self.tolerance),
            });
        }
        if let Some(c) = self.slack_coefficient {
            if !(c > 0.0) || !c.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name: "slack_coefficient",
                    reason: format!("must be finite and > 0, got {c}"),
                });
            }
        }
        if !(self.qp_tolerance > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "qp_tolerance",
                reason: format!("must be > 0, got {}", self.qp_tolerance),
            });
        }
        Ok(())
    }
}

/// Outcome of one separation step.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub found: bool,
    pub point: Vec<f64>,
    pub manifold_index: usize,
    /// `δ_k`. When nothing was found this is the largest violation seen (<= δ).
    pub violation: f64,
}

/// How a cutting-plane run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Infeasible,
    MaxIterations,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Converged => "converged",
            RunStatus::Infeasible => "infeasible",
            RunStatus::MaxIterations => "max_iterations",
        })
    }
}

impl FromStr for RunStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "converged" => Ok(Self::Converged),
            "infeasible" => Ok(Self::Infeasible),
            "max_iterations" => Ok(Self::MaxIterations),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// One row of a run trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub objective: f64,
    pub violation: f64,
    pub working_set_size: usize,
    /// `None` on the terminal row, where nothing was added.
    pub added_manifold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub iterations: Vec<TraceRow>,
    pub status: RunStatus,
}

impl RunTrace {
    /// Rows where a point was added.
    pub fn augmentations(&self) -> impl Iterator<Item = &TraceRow> {
        self.iterations.iter().filter(|r| r.added_manifold.is_some())
    }

    pub fn augmentation_count(&self) -> usize {
        self.augmentations().count()
    }

    /// CSV with columns `iter,objective,violation,ws_size,added_manifold` and a
    /// trailing `# status=...` line. `added_manifold` is -1 on the terminal row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,objective,violation,ws_size,added_manifold\n");
        for (k, row) in self.iterations.iter().enumerate() {
            let added = row.added_manifold.map_or(-1, |p| p as i64);
            out.push_str(&format!(
                "{k},{:.17e},{:.17e},{},{added}\n",
                row.objective, row.violation, row.working_set_size
            ));
        }
        out.push_str(&format!("# status={}\n", self.status));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ModelError> {
        let bad = |line: usize, reason: String| ModelError::InvalidParameter {
            name: "trace",
            reason: format!("line {line}: {reason}"),
        };
        let mut iterations = Vec::new();
        let mut status = None;
        let mut header_seen = false;
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(s) = rest.trim().strip_prefix("status=") {
                    status = Some(s.trim().parse().map_err(|e| bad(lineno, e))?);
                }
                continue;
            }
            if !header_seen {
                if line != "iter,objective,violation,ws_size,added_manifold" {
                    return Err(bad(lineno, format!("unexpected header `{line}`")));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad(lineno, format!("expected 5 fields, got {}", fields.len())));
            }
            let num = |i: usize| -> Result<f64, ModelError> {
                fields[i]
                    .parse::<f64>()
                    .map_err(|e| bad(lineno, format!("field {i}: {e}")))
            };
            let ws = fields[3]
                .parse::<usize>()
                .map_err(|e| bad(lineno, format!("ws_size: {e}")))?;
            let added = fields[4]
                .parse::<i64>()
                .map_err(|e| bad(lineno, format!("added_manifold: {e}")))?;
            iterations.push(TraceRow {
                objective: num(1)?,
                violation: num(2)?,
                working_set_size: ws,
                added_manifold: usize::try_from(added).ok(),
            });
        }
        let status = status.ok_or_else(|| bad(0, "missing `# status=` line".into()))?;
        Ok(Self { iterations, status })
    }
}
