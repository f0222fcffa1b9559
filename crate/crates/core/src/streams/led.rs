//! Seven-segment LED digits with noise and irrelevant attributes.
//!
//! The first seven attributes encode the digit's segments, each flipped with
//! probability `noise`; the remaining seventeen are fair coin flips. A
//! drifting concept swaps `drifting_attributes` of the segment attributes
//! with irrelevant positions, chosen from the generator seed.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttributeKind, Schema, StreamSource};
use crate::error::Result;
use crate::mdp::Instance;
use crate::par::mix_seed;

pub(crate) const RELEVANT_ATTRIBUTES: usize = 7;
const TOTAL_ATTRIBUTES: usize = 24;

const SEGMENTS: [[u8; 7]; 10] = [
    [1, 1, 1, 0, 1, 1, 1],
    [0, 0, 1, 0, 0, 1, 0],
    [1, 0, 1, 1, 1, 0, 1],
    [1, 0, 1, 1, 0, 1, 1],
    [0, 1, 1, 1, 0, 1, 0],
    [1, 1, 0, 1, 0, 1, 1],
    [1, 1, 0, 1, 1, 1, 1],
    [1, 0, 1, 0, 0, 1, 0],
    [1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 0, 1, 1],
];

pub struct Led {
    noise: f64,
    /// Output position of each generated attribute.
    positions: [usize; TOTAL_ATTRIBUTES],
    rng: ChaCha8Rng,
    schema: Schema,
}

impl Led {
    pub fn new(noise: f64, drifting_attributes: usize, seed: u64) -> Self {
        assert!(drifting_attributes <= RELEVANT_ATTRIBUTES);
        let mut positions: [usize; TOTAL_ATTRIBUTES] = std::array::from_fn(|i| i);
        let mut perm_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
        let targets = sample(
            &mut perm_rng,
            TOTAL_ATTRIBUTES - RELEVANT_ATTRIBUTES,
            drifting_attributes,
        );
        for (i, t) in targets.into_iter().enumerate() {
            positions.swap(i, RELEVANT_ATTRIBUTES + t);
        }
        let schema = Schema {
            attributes: vec![AttributeKind::Nominal { values: 2 }; TOTAL_ATTRIBUTES],
            classes: 10,
            names: Vec::new(),
        };
        Self {
            noise,
            positions,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(seed, 2)),
            schema,
        }
    }
}

impl StreamSource for Led {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let digit = self.rng.random_range(0..10);
        let mut x = vec![0.0; TOTAL_ATTRIBUTES];
        for i in 0..TOTAL_ATTRIBUTES {
            let bit = if i < RELEVANT_ATTRIBUTES {
                let flip = self.rng.random::<f64>() < self.noise;
                SEGMENTS[digit][i] ^ u8::from(flip)
            } else {
                u8::from(self.rng.random::<bool>())
            };
            x[self.positions[i]] = f64::from(bit);
        }
        Ok(Some(Instance::new(x, digit)))
    }
}
