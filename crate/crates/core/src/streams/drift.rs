//! Composition of concepts under abrupt and sigmoid-gradual transitions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Schema, StreamSource, Transition};
use crate::error::{Error, Result};
use crate::mdp::Instance;

/// Probability of drawing from the incoming concept at step `t` for a
/// transition centred at `p` with width `w`.
pub fn drift_probability(t: u64, p: u64, w: u64) -> f64 {
    if w == 0 {
        return if t >= p { 1.0 } else { 0.0 };
    }
    let z = -4.0 * (t as f64 - p as f64) / w as f64;
    1.0 / (1.0 + z.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamChoice {
    Current,
    Incoming,
}

/// Draws which of two concepts supplies the instance at step `t`.
pub fn gradual_mix<R: Rng + ?Sized>(rng: &mut R, p: u64, w: u64, t: u64) -> StreamChoice {
    if rng.random::<f64>() < drift_probability(t, p, w) {
        StreamChoice::Incoming
    } else {
        StreamChoice::Current
    }
}

/// Chain of concepts where transition `i` hands over from concept `i` to the
/// remainder of the chain. Only the concept that supplies an instance advances.
pub struct DriftStream {
    concepts: Vec<Box<dyn StreamSource>>,
    transitions: Vec<Transition>,
    rng: ChaCha8Rng,
    t: u64,
}

impl DriftStream {
    pub fn new(
        concepts: Vec<Box<dyn StreamSource>>,
        transitions: Vec<Transition>,
        seed: u64,
    ) -> Result<Self> {
        if concepts.is_empty() || transitions.len() + 1 != concepts.len() {
            return Err(Error::InvalidConfig(format!(
                "{} concepts need {} transitions, got {}",
                concepts.len(),
                concepts.len().saturating_sub(1),
                transitions.len()
            )));
        }
        let schema = concepts[0].schema();
        if let Some(c) = concepts
            .iter()
            .find(|c| c.schema().dims() != schema.dims() || c.schema().classes != schema.classes)
        {
            return Err(Error::ShapeMismatch {
                expected: schema.dims(),
                actual: c.schema().dims(),
            });
        }
        Ok(Self {
            concepts,
            transitions,
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
        })
    }

    fn choose(&mut self) -> usize {
        for (i, tr) in self.transitions.iter().enumerate() {
            let choice = match *tr {
                Transition::Abrupt { position } => {
                    if self.t >= position {
                        StreamChoice::Incoming
                    } else {
                        StreamChoice::Current
                    }
                }
                Transition::Gradual { position, width } => {
                    gradual_mix(&mut self.rng, position, width, self.t)
                }
            };
            if choice == StreamChoice::Current {
                return i;
            }
        }
        self.transitions.len()
    }
}

impl StreamSource for DriftStream {
    fn schema(&self) -> &Schema {
        self.concepts[0].schema()
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let i = self.choose();
        self.t += 1;
        self.concepts[i].next_instance()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{Agrawal, GeneratorSpec};

    #[test]
    fn sigmoid_midpoint_and_tail() {
        assert_eq!(drift_probability(1000, 1000, 50), 0.5);
        assert!(drift_probability(800, 1000, 50) < 0.02);
        assert!(drift_probability(1200, 1000, 50) > 0.98);
        assert_eq!(drift_probability(999, 1000, 0), 0.0);
        assert_eq!(drift_probability(1000, 1000, 0), 1.0);
    }

    #[test]
    fn empirical_mix_matches_sigmoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (p, w) = (5000, 400);
        for t in [4800, 4950, 5000, 5100, 5300] {
            let n = 100_000;
            let hits = (0..n)
                .filter(|_| gradual_mix(&mut rng, p, w, t) == StreamChoice::Incoming)
                .count();
            let expected = drift_probability(t, p, w);
            assert!((hits as f64 / n as f64 - expected).abs() < 0.01, "t={t}");
        }
    }

    #[test]
    fn abrupt_switch_is_exact() {
        let p = 300;
        let a = GeneratorSpec::Agrawal {
            function: 1,
            perturbation: 0.0,
        };
        let b = GeneratorSpec::Agrawal {
            function: 2,
            perturbation: 0.0,
        };
        let mut s = DriftStream::new(
            vec![a.open(1).unwrap(), b.open(2).unwrap()],
            vec![Transition::Abrupt { position: p }],
            0,
        )
        .unwrap();
        let mut oracle_a = Agrawal::new(1, 0.0, 1);
        let mut oracle_b = Agrawal::new(2, 0.0, 2);
        for t in 0..2 * p {
            let x = s.next_instance().unwrap().unwrap();
            let expected = if t < p {
                oracle_a.next_instance()
            } else {
                oracle_b.next_instance()
            };
            assert_eq!(x, expected.unwrap().unwrap(), "t={t}");
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let a = GeneratorSpec::Agrawal {
            function: 1,
            perturbation: 0.0,
        }
        .open(0)
        .unwrap();
        let b = GeneratorSpec::Led {
            noise: 0.1,
            drifting_attributes: 0,
        }
        .open(0)
        .unwrap();
        assert!(DriftStream::new(vec![a, b], vec![Transition::Abrupt { position: 1 }], 0).is_err());
    }
}
