//! Seeded instance generators.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::Instance;
use crate::rational::{int, ratio, Rational};

/// Largest disutility denominator produced by [`Family::UniformRational`].
pub const DENOMINATOR: i64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Random positive weights; disutilities `k/1000` with `k` uniform in `1..=1000`.
    UniformRational,
    /// Equal weights and every disutility 1.
    IdenticalChores,
    /// Equal weights; each disutility is 1/2 or 1 with equal probability.
    AdversarialHalved,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::UniformRational,
        Family::IdenticalChores,
        Family::AdversarialHalved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::UniformRational => "uniform-rational",
            Family::IdenticalChores => "identical-chores",
            Family::AdversarialHalved => "adversarial-halved",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| GenerateError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerateError {
    #[error(
        "unknown family {0:?} (expected uniform-rational, identical-chores or adversarial-halved)"
    )]
    UnknownFamily(String),
    #[error("an instance needs at least one agent")]
    NoAgents,
}

fn equal_weights(n: usize) -> Vec<Rational> {
    vec![ratio(1, n as i64); n]
}

/// Random positive weights summing to exactly 1.
fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    let raw: Vec<i64> = (0..n).map(|_| rng.random_range(1..=100)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|r| ratio(r, total)).collect()
}

/// Generates an instance; the output depends only on the arguments.
pub fn generate(family: Family, n: usize, m: usize, seed: u64) -> Result<Instance, GenerateError> {
    if n == 0 {
        return Err(GenerateError::NoAgents);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (weights, disutilities) = match family {
        Family::UniformRational => {
            let weights = random_weights(&mut rng, n);
            let d = (0..n)
                .map(|_| {
                    (0..m)
                        .map(|_| ratio(rng.random_range(1..=DENOMINATOR), DENOMINATOR))
                        .collect()
                })
                .collect();
            (weights, d)
        }
        Family::IdenticalChores => (equal_weights(n), vec![vec![int(1); m]; n]),
        Family::AdversarialHalved => {
            let d = (0..n)
                .map(|_| {
                    (0..m)
                        .map(|_| {
                            if rng.random_bool(0.5) {
                                ratio(1, 2)
                            } else {
                                int(1)
                            }
                        })
                        .collect()
                })
                .collect();
            (equal_weights(n), d)
        }
    };
    Ok(Instance::new(weights, disutilities).expect("generated instances are valid"))
}
