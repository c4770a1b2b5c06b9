//! The six latent factor models: parameter containers, scores, the logistic
//! loss and its exact gradient.

pub mod checkpoint;
mod grad;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grad::{GradEntry, RowKey, SparseGrad};
pub use store::{probability, EmbeddingStore, ParamBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Cp,
    Rescal,
    TransE(Norm),
    FModel,
    DistMult,
    ComplEx,
}

impl ModelKind {
    /// Every model, with both TransE norms.
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Cp,
        ModelKind::Rescal,
        ModelKind::TransE(Norm::L1),
        ModelKind::TransE(Norm::L2),
        ModelKind::FModel,
        ModelKind::DistMult,
        ModelKind::ComplEx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cp => "CP",
            ModelKind::Rescal => "RESCAL",
            ModelKind::TransE(Norm::L1) => "TransE-L1",
            ModelKind::TransE(Norm::L2) => "TransE-L2",
            ModelKind::FModel => "F",
            ModelKind::DistMult => "DistMult",
            ModelKind::ComplEx => "ComplEx",
        }
    }

    /// TransE replaces L2 regularization with the unit-norm entity constraint.
    pub fn uses_regularization(self) -> bool {
        !matches!(self, ModelKind::TransE(_))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "cp" => ModelKind::Cp,
            "rescal" => ModelKind::Rescal,
            "transe-l1" | "transe_l1" => ModelKind::TransE(Norm::L1),
            "transe-l2" | "transe_l2" | "transe" => ModelKind::TransE(Norm::L2),
            "f" | "fmodel" | "f-model" => ModelKind::FModel,
            "distmult" => ModelKind::DistMult,
            "complex" => ModelKind::ComplEx,
            _ => return Err(Error::invalid(format!("unknown model {s:?}"))),
        })
    }
}

impl Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub rank: usize,
    pub lambda: f64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, rank: usize, lambda: f64) -> Result<Self> {
        let cfg = ModelConfig { kind, rank, lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// `Σ_j a_j b_j c_j`.
pub fn trilinear(a: &[f64], b: &[f64], c: &[f64]) -> Result<f64> {
    if a.len() != b.len() || b.len() != c.len() {
        return Err(Error::invalid(format!("trilinear product of lengths {}, {}, {}", a.len(), b.len(), c.len())));
    }
    Ok(a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).sum())
}

/// Complex trilinear product on split real/imaginary slices; returns
/// `(re, im)` of `Σ_j a_j b_j c_j`.
pub fn trilinear_complex(a: (&[f64], &[f64]), b: (&[f64], &[f64]), c: (&[f64], &[f64])) -> Result<(f64, f64)> {
    let k = a.0.len();
    if [a.1.len(), b.0.len(), b.1.len(), c.0.len(), c.1.len()].iter().any(|&l| l != k) {
        return Err(Error::invalid("complex trilinear product of mismatched lengths"));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for j in 0..k {
        let (ab_re, ab_im) = (a.0[j] * b.0[j] - a.1[j] * b.1[j], a.0[j] * b.1[j] + a.1[j] * b.0[j]);
        re += ab_re * c.0[j] - ab_im * c.1[j];
        im += ab_re * c.1[j] + ab_im * c.0[j];
    }
    Ok((re, im))
}
