//! AGRAWAL loan-application generator with its ten labeling functions.
//!
//! Attribute order: salary, commission, age, elevel, car, zipcode, hvalue,
//! hyears, loan. `elevel`, `car` and `zipcode` are nominal and index-encoded
//! (`car` is shifted to start at zero).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttributeKind, Schema, StreamSource};
use crate::error::Result;
use crate::mdp::Instance;

/// Labeling function used when a config does not name one.
pub const DEFAULT_FUNCTION: u8 = 3;

pub struct Agrawal {
    function: u8,
    perturbation: f64,
    rng: ChaCha8Rng,
    schema: Schema,
}

struct Applicant {
    salary: f64,
    commission: f64,
    age: f64,
    elevel: f64,
    car: f64,
    zipcode: f64,
    hvalue: f64,
    hyears: f64,
    loan: f64,
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    lo <= v && v <= hi
}

/// Class 0 ("group A") when the function's predicate holds, class 1 otherwise.
fn label(function: u8, a: &Applicant) -> usize {
    let group_a = match function {
        1 => a.age < 40.0 || a.age >= 60.0,
        2 => {
            if a.age < 40.0 {
                within(a.salary, 50_000.0, 100_000.0)
            } else if a.age < 60.0 {
                within(a.salary, 75_000.0, 125_000.0)
            } else {
                within(a.salary, 25_000.0, 75_000.0)
            }
        }
        3 => {
            let e = a.elevel as u8;
            if a.age < 40.0 {
                e <= 1
            } else if a.age < 60.0 {
                (1..=3).contains(&e)
            } else {
                (2..=4).contains(&e)
            }
        }
        4 => {
            let e = a.elevel as u8;
            if a.age < 40.0 {
                if e <= 1 {
                    within(a.salary, 25_000.0, 75_000.0)
                } else {
                    within(a.salary, 50_000.0, 100_000.0)
                }
            } else if a.age < 60.0 {
                if (1..=3).contains(&e) {
                    within(a.salary, 50_000.0, 100_000.0)
                } else {
                    within(a.salary, 75_000.0, 125_000.0)
                }
            } else if (2..=4).contains(&e) {
                within(a.salary, 50_000.0, 100_000.0)
            } else {
                within(a.salary, 25_000.0, 75_000.0)
            }
        }
        5 => {
            if a.age < 40.0 {
                if within(a.salary, 50_000.0, 100_000.0) {
                    within(a.loan, 100_000.0, 300_000.0)
                } else {
                    within(a.loan, 200_000.0, 400_000.0)
                }
            } else if a.age < 60.0 {
                if within(a.salary, 75_000.0, 125_000.0) {
                    within(a.loan, 200_000.0, 400_000.0)
                } else {
                    within(a.loan, 300_000.0, 500_000.0)
                }
            } else if within(a.salary, 25_000.0, 75_000.0) {
                within(a.loan, 300_000.0, 500_000.0)
            } else {
                within(a.loan, 100_000.0, 300_000.0)
            }
        }
        6 => {
            let total = a.salary + a.commission;
            if a.age < 40.0 {
                within(total, 50_000.0, 100_000.0)
            } else if a.age < 60.0 {
                within(total, 75_000.0, 125_000.0)
            } else {
                within(total, 25_000.0, 75_000.0)
            }
        }
        7 => 2.0 * (a.salary + a.commission) / 3.0 - a.loan / 5.0 - 20_000.0 > 0.0,
        8 => 2.0 * (a.salary + a.commission) / 3.0 - 5_000.0 * a.elevel - 20_000.0 > 0.0,
        9 => {
            2.0 * (a.salary + a.commission) / 3.0 - 5_000.0 * a.elevel - a.loan / 5.0 - 10_000.0
                > 0.0
        }
        10 => {
            let equity = if a.hyears >= 20.0 {
                a.hvalue * (a.hyears - 20.0) / 10.0
            } else {
                0.0
            };
            2.0 * (a.salary + a.commission) / 3.0 - 5_000.0 * a.elevel + equity / 5.0 - 10_000.0
                > 0.0
        }
        _ => unreachable!("function validated to 1..=10"),
    };
    usize::from(!group_a)
}

impl Agrawal {
    pub fn new(function: u8, perturbation: f64, seed: u64) -> Self {
        assert!(
            (1..=10).contains(&function),
            "agrawal function must be in 1..=10"
        );
        let numeric = AttributeKind::Numeric;
        let schema = Schema {
            attributes: vec![
                numeric,
                numeric,
                numeric,
                AttributeKind::Nominal { values: 5 },
                AttributeKind::Nominal { values: 20 },
                AttributeKind::Nominal { values: 9 },
                numeric,
                numeric,
                numeric,
            ],
            classes: 2,
            names: [
                "salary",
                "commission",
                "age",
                "elevel",
                "car",
                "zipcode",
                "hvalue",
                "hyears",
                "loan",
            ]
            .map(String::from)
            .to_vec(),
        };
        Self {
            function,
            perturbation,
            rng: ChaCha8Rng::seed_from_u64(seed),
            schema,
        }
    }

    fn perturb(&mut self, v: f64, range: f64, min: f64, max: f64) -> f64 {
        let noisy = v + range * (2.0 * (self.rng.random::<f64>() - 0.5)) * self.perturbation;
        noisy.clamp(min, max)
    }

    fn draw(&mut self) -> Applicant {
        let r = &mut self.rng;
        let salary = 20_000.0 + 130_000.0 * r.random::<f64>();
        let commission = if salary >= 75_000.0 {
            0.0
        } else {
            10_000.0 + 65_000.0 * r.random::<f64>()
        };
        let age = r.random_range(20..=80) as f64;
        let elevel = r.random_range(0..5) as f64;
        let car = r.random_range(0..20) as f64;
        let zipcode = r.random_range(0..9) as f64;
        let hvalue = (9.0 - zipcode) * 100_000.0 * (0.5 + r.random::<f64>());
        let hyears = r.random_range(1..=30) as f64;
        let loan = 500_000.0 * r.random::<f64>();
        Applicant {
            salary,
            commission,
            age,
            elevel,
            car,
            zipcode,
            hvalue,
            hyears,
            loan,
        }
    }
}

impl StreamSource for Agrawal {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let mut a = self.draw();
        let y = label(self.function, &a);
        if self.perturbation > 0.0 {
            a.salary = self.perturb(a.salary, 130_000.0, 20_000.0, 150_000.0);
            if a.commission > 0.0 {
                a.commission = self.perturb(a.commission, 65_000.0, 10_000.0, 75_000.0);
            }
            a.age = self.perturb(a.age, 60.0, 20.0, 80.0).round();
            let hmax = (9.0 - a.zipcode) * 100_000.0;
            a.hvalue = self.perturb(a.hvalue, hmax, 0.0, 1.5 * hmax);
            a.hyears = self.perturb(a.hyears, 29.0, 1.0, 30.0).round();
            a.loan = self.perturb(a.loan, 500_000.0, 0.0, 500_000.0);
        }
        let x = vec![
            a.salary,
            a.commission,
            a.age,
            a.elevel,
            a.car,
            a.zipcode,
            a.hvalue,
            a.hyears,
            a.loan,
        ];
        Ok(Some(Instance::new(x, y)))
    }
}
