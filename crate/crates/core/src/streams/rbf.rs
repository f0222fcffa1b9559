//! Random radial-basis-function generator with optionally moving centroids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Schema, StreamSource};
use crate::error::Result;
use crate::mdp::Instance;
use crate::par::mix_seed;

struct Centroid {
    centre: Vec<f64>,
    label: usize,
    std_dev: f64,
    speed: Vec<f64>,
}

pub struct RandomRbf {
    centroids: Vec<Centroid>,
    cumulative_weights: Vec<f64>,
    /// Per-class centroid indices and cumulative class prior, when the
    /// class distribution is fixed.
    by_class: Option<(Vec<Vec<usize>>, Vec<f64>)>,
    label_noise: f64,
    drift_speed: f64,
    rng: ChaCha8Rng,
    schema: Schema,
}

impl RandomRbf {
    pub fn new(centroids: usize, classes: usize, dims: usize, drift_speed: f64, seed: u64) -> Self {
        let mut model = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
        let mut cumulative_weights = Vec::with_capacity(centroids);
        let mut total = 0.0;
        let centroids = (0..centroids)
            .map(|_| {
                let centre = (0..dims).map(|_| model.random::<f64>()).collect();
                let label = model.random_range(0..classes);
                let std_dev = model.random::<f64>();
                total += model.random::<f64>();
                cumulative_weights.push(total);
                let mut speed: Vec<f64> = (0..dims)
                    .map(|_| model.random::<f64>() * 2.0 - 1.0)
                    .collect();
                let norm = speed
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
                    .max(f64::MIN_POSITIVE);
                speed.iter_mut().for_each(|v| *v *= drift_speed / norm);
                Centroid {
                    centre,
                    label,
                    std_dev,
                    speed,
                }
            })
            .collect();
        Self {
            centroids,
            cumulative_weights,
            by_class: None,
            label_noise: 0.0,
            drift_speed,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(seed, 2)),
            schema: Schema::numeric(dims, classes),
        }
    }

    /// Like [`RandomRbf::new`], but labels are drawn from `class_weights`
    /// first and the centroid second, so the class prior is exact. The first
    /// `classes` centroids cover one class each.
    pub fn with_class_weights(
        centroids: usize,
        class_weights: &[f64],
        dims: usize,
        drift_speed: f64,
        seed: u64,
    ) -> Self {
        let classes = class_weights.len();
        let mut g = Self::new(centroids.max(classes), classes, dims, drift_speed, seed);
        let mut relabel = ChaCha8Rng::seed_from_u64(mix_seed(seed, 3));
        let mut members = vec![Vec::new(); classes];
        for (i, c) in g.centroids.iter_mut().enumerate() {
            c.label = if i < classes {
                i
            } else {
                relabel.random_range(0..classes)
            };
            members[c.label].push(i);
        }
        let mut total = 0.0;
        let prior = class_weights
            .iter()
            .map(|w| {
                total += w;
                total
            })
            .collect();
        g.by_class = Some((members, prior));
        g
    }

    /// Replaces each label with a uniformly drawn class with probability `p`.
    pub fn with_label_noise(mut self, p: f64) -> Self {
        self.label_noise = p;
        self
    }

    fn pick_centroid(&mut self) -> usize {
        let cumulative = |weights: &[f64], rng: &mut ChaCha8Rng| {
            let u = rng.random::<f64>() * weights.last().unwrap();
            weights.partition_point(|w| *w <= u).min(weights.len() - 1)
        };
        match &self.by_class {
            None => cumulative(&self.cumulative_weights, &mut self.rng),
            Some((members, prior)) => {
                let class = cumulative(prior, &mut self.rng);
                let own: Vec<f64> = members[class]
                    .iter()
                    .scan(0.0, |acc, &i| {
                        let prev = if i == 0 {
                            0.0
                        } else {
                            self.cumulative_weights[i - 1]
                        };
                        *acc += self.cumulative_weights[i] - prev;
                        Some(*acc)
                    })
                    .collect();
                members[class][cumulative(&own, &mut self.rng)]
            }
        }
    }

    fn drift(&mut self) {
        for c in &mut self.centroids {
            for (x, v) in c.centre.iter_mut().zip(c.speed.iter_mut()) {
                *x += *v;
                if *x > 1.0 {
                    *x = 1.0;
                    *v = -*v;
                } else if *x < 0.0 {
                    *x = 0.0;
                    *v = -*v;
                }
            }
        }
    }
}

impl StreamSource for RandomRbf {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        if self.drift_speed > 0.0 {
            self.drift();
        }
        let idx = self.pick_centroid();
        let c = &self.centroids[idx];
        let d = c.centre.len();
        let direction: Vec<f64> = (0..d)
            .map(|_| self.rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let norm = direction
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let magnitude: f64 = self.rng.sample::<f64, _>(StandardNormal) * c.std_dev;
        let x = c
            .centre
            .iter()
            .zip(&direction)
            .map(|(m, v)| m + v / norm * magnitude)
            .collect();
        let mut label = c.label;
        if self.label_noise > 0.0 && self.rng.random::<f64>() < self.label_noise {
            label = self.rng.random_range(0..self.schema.classes);
        }
        Ok(Some(Instance::new(x, label)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_generator_uses_all_declared_classes() {
        let mut g = RandomRbf::new(50, 5, 10, 0.0, 3);
        let mut seen = [0usize; 5];
        for _ in 0..10_000 {
            let x = g.next_instance().unwrap().unwrap();
            assert_eq!(x.features.len(), 10);
            seen[x.label] += 1;
        }
        assert!(seen.iter().all(|c| *c > 0), "{seen:?}");
    }

    #[test]
    fn class_weights_fix_the_prior() {
        let weights = [0.5, 0.3, 0.15, 0.05];
        let mut g = RandomRbf::with_class_weights(20, &weights, 4, 0.0, 9);
        let n = 200_000;
        let mut seen = [0usize; 4];
        for _ in 0..n {
            seen[g.next_instance().unwrap().unwrap().label] += 1;
        }
        for (s, w) in seen.iter().zip(weights) {
            assert!((*s as f64 / n as f64 - w).abs() < 0.005, "{seen:?}");
        }
    }

    #[test]
    fn label_noise_mixes_in_uniform_labels() {
        // share of class 0 = (1 - p) · 0.9 + p / 3
        let mut g =
            RandomRbf::with_class_weights(6, &[0.9, 0.05, 0.05], 2, 0.0, 4).with_label_noise(0.3);
        let n = 200_000;
        let zeros = (0..n)
            .filter(|_| g.next_instance().unwrap().unwrap().label == 0)
            .count();
        assert!((zeros as f64 / n as f64 - 0.73).abs() < 0.005);
    }

    #[test]
    fn centroids_stay_in_unit_cube() {
        let mut g = RandomRbf::new(5, 2, 3, 0.05, 1);
        for _ in 0..1000 {
            g.next_instance().unwrap();
        }
        assert!(g
            .centroids
            .iter()
            .all(|c| c.centre.iter().all(|x| (0.0..=1.0).contains(x))));
    }

    #[test]
    fn drift_moves_centroids() {
        let mut g = RandomRbf::new(5, 2, 3, 1e-3, 1);
        let before: Vec<Vec<f64>> = g.centroids.iter().map(|c| c.centre.clone()).collect();
        for _ in 0..100 {
            g.next_instance().unwrap();
        }
        for (c, b) in g.centroids.iter().zip(&before) {
            let moved: f64 = c
                .centre
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(moved > 0.0 && moved <= 0.1 + 1e-9);
        }
    }
}
