//! Incremental base learners behind one train/predict/score interface.

mod hoeffding;
mod majority;
mod mlp;

pub use hoeffding::{hoeffding_bound, HoeffdingConfig, HoeffdingTree};
pub use majority::Majority;
pub use mlp::{Activation, Mlp, MlpConfig, Optimizer};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Instance;
use crate::streams::{AttributeKind, Schema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    HoeffdingTree(HoeffdingConfig),
    Mlp(MlpConfig),
    Majority,
}

impl LearnerConfig {
    pub fn majority() -> Self {
        LearnerConfig::Majority
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerConfig::HoeffdingTree(c) => c.validate(),
            LearnerConfig::Mlp(c) => c.validate(),
            LearnerConfig::Majority => Ok(()),
        }
    }

    /// Basis for this member's training cost before normalization:
    /// hidden-node count for networks, the byte budget for trees.
    pub fn raw_cost(&self) -> f64 {
        match self {
            LearnerConfig::HoeffdingTree(c) => c.max_bytes as f64,
            LearnerConfig::Mlp(c) => c.hidden as f64,
            LearnerConfig::Majority => 1.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            LearnerConfig::HoeffdingTree(c) => format!("ht[{}B]", c.max_bytes),
            LearnerConfig::Mlp(c) => format!(
                "mlp[{:?},{},{}h,s{}]",
                c.optimizer, c.learning_rate, c.hidden, c.seed
            )
            .to_lowercase(),
            LearnerConfig::Majority => "majority".into(),
        }
    }
}

/// Normalized, non-negative per-class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores(Vec<f64>);

impl ClassScores {
    /// Normalizes `raw` to sum to one; all-zero input becomes uniform.
    pub fn from_unnormalized(mut raw: Vec<f64>) -> Self {
        let total: f64 = raw.iter().sum();
        if total > 0.0 && total.is_finite() {
            raw.iter_mut().for_each(|v| *v /= total);
        } else {
            let u = 1.0 / raw.len() as f64;
            raw.iter_mut().for_each(|v| *v = u);
        }
        Self(raw)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Highest-scoring class, lowest index on ties.
    pub fn argmax(&self) -> usize {
        crate::mdp::argmax_first(self.0.iter().copied())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Learner {
    HoeffdingTree(HoeffdingTree),
    Mlp(Mlp),
    Majority(Majority),
}

const BLOB_MAGIC: &[u8; 4] = b"GPLB";
const BLOB_VERSION: u16 = 1;

impl Learner {
    /// Builds a learner over `d` numeric attributes and `classes` classes.
    pub fn new(config: &LearnerConfig, d: usize, classes: usize) -> Result<Self> {
        Self::with_schema(config, &Schema::numeric(d, classes))
    }

    pub fn with_schema(config: &LearnerConfig, schema: &Schema) -> Result<Self> {
        config.validate()?;
        if schema.classes == 0 {
            return Err(Error::InvalidConfig(
                "a learner needs at least one class".into(),
            ));
        }
        Ok(match config {
            LearnerConfig::HoeffdingTree(c) => {
                Learner::HoeffdingTree(HoeffdingTree::new(c.clone(), schema))
            }
            LearnerConfig::Mlp(c) => {
                Learner::Mlp(Mlp::new(c.clone(), schema.dims(), schema.classes))
            }
            LearnerConfig::Majority => {
                Learner::Majority(Majority::new(schema.dims(), schema.classes))
            }
        })
    }

    pub fn dims(&self) -> usize {
        match self {
            Learner::HoeffdingTree(t) => t.dims(),
            Learner::Mlp(n) => n.dims(),
            Learner::Majority(m) => m.dims(),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Learner::HoeffdingTree(t) => t.classes(),
            Learner::Mlp(n) => n.classes(),
            Learner::Majority(m) => m.classes(),
        }
    }

    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.dims() {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                actual: features.len(),
            });
        }
        if let Some((i, v)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInstance(format!("feature {i} is {v}")));
        }
        Ok(())
    }

    pub fn train(&mut self, instance: &Instance) -> Result<()> {
        self.check_features(&instance.features)?;
        if instance.label >= self.classes() {
            return Err(Error::InvalidInstance(format!(
                "label {} outside {} classes",
                instance.label,
                self.classes()
            )));
        }
        match self {
            Learner::HoeffdingTree(t) => t.train(&instance.features, instance.label),
            Learner::Mlp(n) => {
                n.train(&instance.features, instance.label);
                Ok(())
            }
            Learner::Majority(m) => {
                m.train(instance.label);
                Ok(())
            }
        }
    }

    pub fn score(&self, features: &[f64]) -> Result<ClassScores> {
        self.check_features(features)?;
        Ok(match self {
            Learner::HoeffdingTree(t) => t.score(features)?,
            Learner::Mlp(n) => n.score(features),
            Learner::Majority(m) => m.score(),
        })
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        Ok(self.score(features)?.argmax())
    }

    /// Deterministic estimate of the learner's state footprint.
    pub fn size_bytes(&self) -> usize {
        match self {
            Learner::HoeffdingTree(t) => t.size_bytes(),
            Learner::Mlp(n) => n.size_bytes(),
            Learner::Majority(m) => m.size_bytes(),
        }
    }

    /// Versioned binary snapshot: `GPLB`, little-endian `u16` version, CBOR body.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(256);
        out.extend_from_slice(BLOB_MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        ciborium::into_writer(self, &mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 || &bytes[..4] != BLOB_MAGIC {
            return Err(Error::parse(0, "not a learner blob"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != BLOB_VERSION {
            return Err(Error::parse(
                0,
                format!("unsupported learner blob version {version}"),
            ));
        }
        ciborium::from_reader(&bytes[6..]).map_err(|e| Error::parse(0, e.to_string()))
    }
}

pub(crate) fn is_nominal(kind: &AttributeKind) -> Option<usize> {
    match kind {
        AttributeKind::Nominal { values } => Some(*values),
        AttributeKind::Numeric => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_normalize() {
        let s = ClassScores::from_unnormalized(vec![1.0, 3.0]);
        assert_eq!(s.as_slice(), &[0.25, 0.75]);
        let u = ClassScores::from_unnormalized(vec![0.0, 0.0, 0.0, 0.0]);
        assert_eq!(u.as_slice(), &[0.25; 4]);
        assert_eq!(ClassScores::from_unnormalized(vec![0.5, 0.5]).argmax(), 0);
    }

    #[test]
    fn validation_errors() {
        let mut l = Learner::new(&LearnerConfig::Majority, 2, 3).unwrap();
        assert!(matches!(
            l.train(&Instance::new(vec![1.0], 0)),
            Err(Error::ShapeMismatch {
                expected: 2,
                actual: 1
            })
        ));
        assert!(matches!(
            l.train(&Instance::new(vec![1.0, f64::NAN], 0)),
            Err(Error::InvalidInstance(_))
        ));
        assert!(matches!(
            l.train(&Instance::new(vec![1.0, 2.0], 3)),
            Err(Error::InvalidInstance(_))
        ));
        assert!(l.predict(&[0.0]).is_err());
    }

    #[test]
    fn blob_round_trip_and_header() {
        let cfg = LearnerConfig::Mlp(MlpConfig {
            hidden: 3,
            ..MlpConfig::default()
        });
        let mut l = Learner::new(&cfg, 2, 2).unwrap();
        l.train(&Instance::new(vec![0.3, -1.0], 1)).unwrap();
        let blob = l.to_bytes();
        assert_eq!(&blob[..4], b"GPLB");
        let back = Learner::from_bytes(&blob).unwrap();
        assert_eq!(back.to_bytes(), blob);
        assert!(Learner::from_bytes(b"nope").is_err());
    }
}
