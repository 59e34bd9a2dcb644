//! JSON form of an ellipsoid ensemble:
//! `{"N", "D", "q", "manifolds": [{"label", "center", "radii", "basis"}]}`
//! with `basis` a list of `D` vectors of length `N`. Doubles are written with
//! 17 significant digits so that files round-trip exactly.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::types::{EllipsoidManifold, Label, Manifold};

/// serde_json formatter printing every finite double as `{:.16e}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes `value` with [`FullPrecision`].
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Order {
    Finite(f64),
    Named(String),
}

impl Order {
    fn from_q(q: f64) -> Self {
        if q.is_infinite() {
            Order::Named("inf".into())
        } else {
            Order::Finite(q)
        }
    }

    fn to_q(&self) -> Result<f64, ModelError> {
        match self {
            Order::Finite(q) => Ok(*q),
            Order::Named(s) if s == "inf" || s == "Infinity" => Ok(f64::INFINITY),
            Order::Named(s) => Err(ModelError::InvalidParameter {
                name: "q",
                reason: format!("expected a number or \"inf\", got {s:?}"),
            }),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifoldDoc {
    label: Label,
    center: Vec<f64>,
    radii: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleDoc {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "D")]
    d: usize,
    q: Order,
    manifolds: Vec<ManifoldDoc>,
}

/// Writes an ensemble. All manifolds must share `N`, `D` and `q`.
pub fn ensemble_to_json(manifolds: &[EllipsoidManifold]) -> Result<String, ModelError> {
    let first = manifolds.first().ok_or_else(|| ModelError::InvalidParameter {
        name: "manifolds",
        reason: "empty ensemble".into(),
    })?;
    let (n, d, q) = (first.center().len(), first.param_dim(), first.q());
    let mut docs = Vec::with_capacity(manifolds.len());
    for m in manifolds {
        if m.center().len() != n || m.param_dim() != d || m.q() != q {
            return Err(ModelError::InvalidParameter {
                name: "manifolds",
                reason: "ensemble members differ in N, D or q".into(),
            });
        }
        docs.push(ManifoldDoc {
            label: m.label(),
            center: m.center().to_vec(),
            radii: m.radii().to_vec(),
            basis: m.basis().to_vec(),
        });
    }
    let doc = EnsembleDoc {
        n,
        d,
        q: Order::from_q(q),
        manifolds: docs,
    };
    to_json_string(&doc).map_err(|e| ModelError::InvalidParameter {
        name: "ensemble",
        reason: e.to_string(),
    })
}

/// Reads an ensemble, validating every manifold.
pub fn ensemble_from_json(text: &str) -> Result<Vec<EllipsoidManifold>, ModelError> {
    let doc: EnsembleDoc = serde_json::from_str(text).map_err(|e| ModelError::InvalidParameter {
        name: "ensemble",
        reason: e.to_string(),
    })?;
    let q = doc.q.to_q()?;
    doc.manifolds
        .into_iter()
        .map(|m| {
            if m.center.len() != doc.n {
                return Err(ModelError::DimensionMismatch {
                    expected: doc.n,
                    found: m.center.len(),
                    context: "center",
                });
            }
            if m.radii.len() != doc.d {
                return Err(ModelError::DimensionMismatch {
                    expected: doc.d,
                    found: m.radii.len(),
                    context: "radii",
                });
            }
            EllipsoidManifold::new(m.center, m.basis, m.radii, q, m.label)
        })
        .collect()
}
