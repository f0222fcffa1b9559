//! Synthetic drifting streams and file ingestion.

mod agrawal;
mod drift;
mod file;
mod led;
mod rbf;

pub use agrawal::{Agrawal, DEFAULT_FUNCTION as DEFAULT_AGRAWAL_FUNCTION};
pub use drift::{drift_probability, gradual_mix, DriftStream, StreamChoice};
pub use file::{ingest_file, FileFormat, FileOptions, FileSource, MissingValues, NominalEncoding};
pub use led::Led;
pub use rbf::RandomRbf;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Instance;
use crate::par::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttributeKind {
    Numeric,
    /// Index-encoded: the feature value is an integer in `0..values`.
    Nominal {
        values: usize,
    },
}

/// Declared shape of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<AttributeKind>,
    pub classes: usize,
    #[serde(default)]
    pub names: Vec<String>,
}

impl Schema {
    pub fn numeric(d: usize, classes: usize) -> Self {
        Self {
            attributes: vec![AttributeKind::Numeric; d],
            classes,
            names: Vec::new(),
        }
    }

    pub fn dims(&self) -> usize {
        self.attributes.len()
    }

    pub fn attribute_name(&self, i: usize) -> String {
        self.names
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("x{i}"))
    }
}

/// Pull-based supplier of instances.
pub trait StreamSource: Send {
    fn schema(&self) -> &Schema;

    /// Next instance, or `None` at end of stream.
    fn next_instance(&mut self) -> Result<Option<Instance>>;
}

/// A single concept generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Agrawal {
        #[serde(default = "default_function")]
        function: u8,
        #[serde(default = "default_perturbation")]
        perturbation: f64,
    },
    Rbf {
        centroids: usize,
        classes: usize,
        dims: usize,
        #[serde(default)]
        drift_speed: f64,
        /// Fixed class prior; one weight per class.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class_weights: Option<Vec<f64>>,
        /// Probability of replacing a label with a uniform draw.
        #[serde(default)]
        label_noise: f64,
    },
    Led {
        #[serde(default = "default_led_noise")]
        noise: f64,
        #[serde(default)]
        drifting_attributes: usize,
    },
    File {
        path: PathBuf,
        #[serde(flatten)]
        options: FileOptions,
    },
}

fn default_function() -> u8 {
    agrawal::DEFAULT_FUNCTION
}

fn default_perturbation() -> f64 {
    0.05
}

fn default_led_noise() -> f64 {
    0.1
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorSpec::Agrawal {
                function,
                perturbation,
            } => {
                if !(1..=10).contains(function) {
                    return Err(Error::InvalidConfig(format!(
                        "agrawal function {function} not in 1..=10"
                    )));
                }
                if !(0.0..=1.0).contains(perturbation) {
                    return Err(Error::InvalidConfig(format!(
                        "agrawal perturbation {perturbation} not in [0, 1]"
                    )));
                }
            }
            GeneratorSpec::Rbf {
                centroids,
                classes,
                dims,
                drift_speed,
                class_weights,
                label_noise,
            } => {
                if !(0.0..=1.0).contains(label_noise) {
                    return Err(Error::InvalidConfig(format!(
                        "rbf label_noise {label_noise} not in [0, 1]"
                    )));
                }
                if *centroids == 0 || *classes == 0 || *dims == 0 {
                    return Err(Error::InvalidConfig(
                        "rbf needs centroids, classes and dims >= 1".into(),
                    ));
                }
                if let Some(w) = class_weights {
                    if w.len() != *classes || !w.iter().all(|v| *v > 0.0 && v.is_finite()) {
                        return Err(Error::InvalidConfig(format!(
                            "rbf class_weights needs {classes} positive weights"
                        )));
                    }
                }
                if !(*drift_speed >= 0.0) {
                    return Err(Error::InvalidConfig(
                        "rbf drift_speed must be non-negative".into(),
                    ));
                }
            }
            GeneratorSpec::Led {
                noise,
                drifting_attributes,
            } => {
                if !(0.0..=1.0).contains(noise) {
                    return Err(Error::InvalidConfig(format!(
                        "led noise {noise} not in [0, 1]"
                    )));
                }
                if *drifting_attributes > led::RELEVANT_ATTRIBUTES {
                    return Err(Error::InvalidConfig(
                        "led drifts at most 7 attributes".into(),
                    ));
                }
            }
            GeneratorSpec::File { .. } => {}
        }
        Ok(())
    }

    /// Opens the generator with `seed`. Synthetic generators are unbounded.
    pub fn open(&self, seed: u64) -> Result<Box<dyn StreamSource>> {
        self.validate()?;
        Ok(match self {
            GeneratorSpec::Agrawal {
                function,
                perturbation,
            } => Box::new(Agrawal::new(*function, *perturbation, seed)),
            GeneratorSpec::Rbf {
                centroids,
                classes,
                dims,
                drift_speed,
                class_weights,
                label_noise,
            } => {
                let g = match class_weights {
                    Some(w) => {
                        RandomRbf::with_class_weights(*centroids, w, *dims, *drift_speed, seed)
                    }
                    None => RandomRbf::new(*centroids, *classes, *dims, *drift_speed, seed),
                };
                Box::new(g.with_label_noise(*label_noise))
            }
            GeneratorSpec::Led {
                noise,
                drifting_attributes,
            } => Box::new(Led::new(*noise, *drifting_attributes, seed)),
            GeneratorSpec::File { path, options } => Box::new(ingest_file(path, options)?),
        })
    }
}

/// How the stream moves from the previous concept to the next one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Transition {
    Abrupt { position: u64 },
    Gradual { position: u64, width: u64 },
}

impl Transition {
    pub fn position(&self) -> u64 {
        match *self {
            Transition::Abrupt { position } | Transition::Gradual { position, .. } => position,
        }
    }

    /// Probability of drawing from the incoming concept at step `t`.
    pub fn probability(&self, t: u64) -> f64 {
        match *self {
            Transition::Abrupt { position } => {
                if t >= position {
                    1.0
                } else {
                    0.0
                }
            }
            Transition::Gradual { position, width } => drift_probability(t, position, width),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub generator: GeneratorSpec,
    /// Absent for the first concept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Transition>,
}

/// Ordered concepts joined by abrupt or gradual transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSchedule {
    pub segments: Vec<Segment>,
}

impl DriftSchedule {
    pub fn single(generator: GeneratorSpec) -> Self {
        Self {
            segments: vec![Segment {
                generator,
                transition: None,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.segments.first() else {
            return Err(Error::InvalidConfig(
                "drift schedule has no segments".into(),
            ));
        };
        if first.transition.is_some() {
            return Err(Error::InvalidConfig(
                "the first segment cannot have a transition".into(),
            ));
        }
        let mut last: Option<u64> = None;
        for s in &self.segments[1..] {
            s.generator.validate()?;
            let Some(t) = s.transition else {
                return Err(Error::InvalidConfig(
                    "every segment after the first needs a transition".into(),
                ));
            };
            if let Transition::Gradual { width: 0, .. } = t {
                return Err(Error::InvalidConfig(
                    "gradual transition width must be >= 1".into(),
                ));
            }
            if last.is_some_and(|p| t.position() <= p) {
                return Err(Error::InvalidConfig(
                    "transition positions must be strictly increasing".into(),
                ));
            }
            last = Some(t.position());
        }
        first.generator.validate()
    }

    pub fn transitions(&self) -> Vec<Transition> {
        self.segments.iter().filter_map(|s| s.transition).collect()
    }

    /// Opens every concept with its own derived seed and composes them.
    pub fn open(&self, seed: u64) -> Result<Box<dyn StreamSource>> {
        self.validate()?;
        if self.segments.len() == 1 {
            return self.segments[0].generator.open(mix_seed(seed, 0));
        }
        let concepts = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| s.generator.open(mix_seed(seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(DriftStream::new(
            concepts,
            self.transitions(),
            mix_seed(seed, u64::MAX),
        )?))
    }
}

/// A named, length-bounded stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub name: String,
    pub length: u64,
    pub schedule: DriftSchedule,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::EmptyStream);
        }
        self.schedule.validate()
    }

    pub fn open(&self, seed: u64) -> Result<Box<dyn StreamSource>> {
        Ok(Box::new(Bounded {
            inner: self.schedule.open(seed)?,
            remaining: self.length,
        }))
    }
}

/// Truncates a source to at most `remaining` instances.
pub struct Bounded {
    inner: Box<dyn StreamSource>,
    remaining: u64,
}

impl Bounded {
    pub fn new(inner: Box<dyn StreamSource>, remaining: u64) -> Self {
        Self { inner, remaining }
    }
}

impl StreamSource for Bounded {
    fn schema(&self) -> &Schema {
        self.inner.schema()
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        self.remaining -= 1;
        self.inner.next_instance()
    }
}

/// Built-in drifting benchmark streams.
///
/// Full-scale streams hold 10⁶ instances with four concepts centred at
/// 25 %, 50 % and 75 % of the stream. Abrupt drifts use a sigmoid of width
/// 50; gradual drifts use width 5 % of the stream (50 000 at full scale).
/// Shorter lengths rescale positions and gradual widths proportionally.
pub mod presets {
    use super::*;

    pub const FULL_LENGTH: u64 = 1_000_000;
    pub const ABRUPT_WIDTH: u64 = 50;
    pub const AGRAWAL_CONCEPTS: [u8; 4] = [1, 2, 4, 7];

    pub const NAMES: [&str; 6] = ["AGR_a", "AGR_g", "RBF_f", "RBF_m", "LED_a", "LED_g"];

    fn drift_positions(length: u64) -> [u64; 3] {
        [length / 4, length / 2, 3 * length / 4]
    }

    fn gradual_width(length: u64) -> u64 {
        (length / 20).max(1)
    }

    fn chain(concepts: Vec<GeneratorSpec>, length: u64, gradual: bool) -> DriftSchedule {
        let positions = drift_positions(length);
        let segments = concepts
            .into_iter()
            .enumerate()
            .map(|(i, generator)| Segment {
                generator,
                transition: (i > 0).then(|| {
                    let position = positions[i - 1];
                    let width = if gradual {
                        gradual_width(length)
                    } else {
                        ABRUPT_WIDTH
                    };
                    Transition::Gradual { position, width }
                }),
            })
            .collect();
        DriftSchedule { segments }
    }

    pub fn agrawal(length: u64, gradual: bool) -> StreamSpec {
        let concepts = AGRAWAL_CONCEPTS
            .iter()
            .map(|&function| GeneratorSpec::Agrawal {
                function,
                perturbation: default_perturbation(),
            })
            .collect();
        let name = if gradual { "AGR_g" } else { "AGR_a" };
        StreamSpec {
            name: name.into(),
            length,
            schedule: chain(concepts, length, gradual),
        }
    }

    pub fn rbf(length: u64, fast: bool) -> StreamSpec {
        let drift_speed = if fast { 1e-3 } else { 1e-4 };
        let name = if fast { "RBF_f" } else { "RBF_m" };
        let generator = GeneratorSpec::Rbf {
            centroids: 50,
            classes: 5,
            dims: 10,
            drift_speed,
            class_weights: None,
            label_noise: 0.0,
        };
        StreamSpec {
            name: name.into(),
            length,
            schedule: DriftSchedule::single(generator),
        }
    }

    pub fn led(length: u64, gradual: bool) -> StreamSpec {
        let drifting = if gradual { 7 } else { 3 };
        let concepts = (0..4)
            .map(|i| GeneratorSpec::Led {
                noise: default_led_noise(),
                drifting_attributes: if i == 0 { 0 } else { drifting },
            })
            .collect();
        let name = if gradual { "LED_g" } else { "LED_a" };
        StreamSpec {
            name: name.into(),
            length,
            schedule: chain(concepts, length, gradual),
        }
    }

    /// Looks up one of [`NAMES`].
    pub fn by_name(name: &str, length: u64) -> Option<StreamSpec> {
        Some(match name {
            "AGR_a" => agrawal(length, false),
            "AGR_g" => agrawal(length, true),
            "RBF_f" => rbf(length, true),
            "RBF_m" => rbf(length, false),
            "LED_a" => led(length, false),
            "LED_g" => led(length, true),
            _ => return None,
        })
    }

    pub fn synthetic_suite(length: u64) -> Vec<StreamSpec> {
        NAMES.iter().map(|n| by_name(n, length).unwrap()).collect()
    }

    /// Activity counts of the WISDM release (walking, jogging, upstairs,
    /// downstairs, sitting, standing).
    pub const WISDM_CLASS_COUNTS: [f64; 6] = [2082.0, 1626.0, 633.0, 529.0, 307.0, 246.0];

    /// Label noise that brings a 20-network ζ ensemble to an AUROC near 0.94,
    /// about what such ensembles reach on the real activity data.
    pub const WISDM_LABEL_NOISE: f64 = 0.07;

    /// Stand-in with the shape of the WISDM activity stream: 5417 instances,
    /// 45 numeric features, 6 classes with its skewed class prior.
    pub fn wisdm_like() -> StreamSpec {
        let generator = GeneratorSpec::Rbf {
            centroids: 30,
            classes: 6,
            dims: 45,
            drift_speed: 0.0,
            class_weights: Some(WISDM_CLASS_COUNTS.to_vec()),
            label_noise: WISDM_LABEL_NOISE,
        };
        StreamSpec {
            name: "WISDM_like".into(),
            length: 5417,
            schedule: DriftSchedule::single(generator),
        }
    }
}
