//! Fair-division instances over chores: parsing, validation, zero-disutility
//! preprocessing and normalization to the bounded form (every disutility at
//! most 1).

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, Rational};

/// Read access to per-agent additive disutilities.
///
/// Implemented by [`Instance`] and by the identical-disutility instance
/// built from equilibrium payments, so rounding costs can be evaluated
/// against either.
pub trait Disutility {
    fn agent_count(&self) -> usize;
    fn chore_count(&self) -> usize;
    fn disutility(&self, agent: usize, chore: usize) -> &Rational;

    fn bundle_disutility(&self, agent: usize, chores: &[usize]) -> Rational {
        chores
            .iter()
            .fold(Rational::zero(), |acc, &c| acc + self.disutility(agent, c))
    }

    fn total_disutility(&self, agent: usize) -> Rational {
        (0..self.chore_count()).fold(Rational::zero(), |acc, c| acc + self.disutility(agent, c))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("weights: weights sum ≠ 1 (sum is {sum})")]
    WeightSum { sum: String },
    #[error("{path}: weight must be positive, found {value}")]
    NonPositiveWeight { path: String, value: String },
    #[error("{path}: negative disutility {value}")]
    NegativeDisutility { path: String, value: String },
    #[error("{path}: dimension mismatch, expected {expected} entries, found {found}")]
    Dimension {
        path: String,
        expected: usize,
        found: usize,
    },
}

/// A validated instance: `n` agents with weights summing to one and an
/// `n × m` matrix of nonnegative disutilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "InstanceDocument")]
pub struct Instance {
    weights: Vec<Rational>,
    disutilities: Vec<Vec<Rational>>,
    scale: Rational,
}

/// Wire form of an [`Instance`].
#[derive(Serialize)]
struct InstanceDocument {
    #[serde(with = "rational::serde_vec")]
    weights: Vec<Rational>,
    #[serde(with = "rational::serde_matrix")]
    disutilities: Vec<Vec<Rational>>,
    #[serde(
        with = "rational::serde_scalar",
        skip_serializing_if = "Rational::is_one"
    )]
    scale: Rational,
}

impl From<Instance> for InstanceDocument {
    fn from(inst: Instance) -> Self {
        InstanceDocument {
            weights: inst.weights,
            disutilities: inst.disutilities,
            scale: inst.scale,
        }
    }
}

impl TryFrom<serde_json::Value> for Instance {
    type Error = InstanceError;

    fn try_from(value: serde_json::Value) -> Result<Self, Self::Error> {
        Instance::from_json(&value)
    }
}

impl Instance {
    /// Builds and validates an instance with scale 1.
    pub fn new(
        weights: Vec<Rational>,
        disutilities: Vec<Vec<Rational>>,
    ) -> Result<Self, InstanceError> {
        let inst = Instance {
            weights,
            disutilities,
            scale: Rational::one(),
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Equal-weight instance where every disutility is 1.
    pub fn identical_unit(n: usize, m: usize) -> Self {
        let w = Rational::new(1.into(), (n as i64).into());
        Instance {
            weights: vec![w; n],
            disutilities: vec![vec![Rational::one(); m]; n],
            scale: Rational::one(),
        }
    }

    fn validate(&self) -> Result<(), InstanceError> {
        if self.weights.is_empty() {
            return Err(InstanceError::Field {
                path: "weights".into(),
                message: "at least one agent is required".into(),
            });
        }
        for (i, w) in self.weights.iter().enumerate() {
            if !w.is_positive() {
                return Err(InstanceError::NonPositiveWeight {
                    path: format!("weights[{i}]"),
                    value: rational::to_text(w),
                });
            }
        }
        let sum = rational::sum(&self.weights);
        if !sum.is_one() {
            return Err(InstanceError::WeightSum {
                sum: rational::to_text(&sum),
            });
        }
        let n = self.weights.len();
        if self.disutilities.len() != n {
            return Err(InstanceError::Dimension {
                path: "disutilities".into(),
                expected: n,
                found: self.disutilities.len(),
            });
        }
        let m = self.disutilities[0].len();
        for (i, row) in self.disutilities.iter().enumerate() {
            if row.len() != m {
                return Err(InstanceError::Dimension {
                    path: format!("disutilities[{i}]"),
                    expected: m,
                    found: row.len(),
                });
            }
            for (c, d) in row.iter().enumerate() {
                if d.is_negative() {
                    return Err(InstanceError::NegativeDisutility {
                        path: format!("disutilities[{i}][{c}]"),
                        value: rational::to_text(d),
                    });
                }
            }
        }
        if !self.scale.is_positive() {
            return Err(InstanceError::Field {
                path: "scale".into(),
                message: "scale must be positive".into(),
            });
        }
        Ok(())
    }

    fn from_json(doc: &serde_json::Value) -> Result<Self, InstanceError> {
        let obj = doc.as_object().ok_or_else(|| InstanceError::Field {
            path: "$".into(),
            message: "expected an object".into(),
        })?;
        let field = |path: &str, message: String| InstanceError::Field {
            path: path.to_string(),
            message,
        };
        let weights = obj
            .get("weights")
            .ok_or_else(|| field("weights", "missing field".into()))?
            .as_array()
            .ok_or_else(|| field("weights", "expected an array".into()))?
            .iter()
            .enumerate()
            .map(|(i, v)| rational::from_json(v).map_err(|e| field(&format!("weights[{i}]"), e)))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = obj
            .get("disutilities")
            .ok_or_else(|| field("disutilities", "missing field".into()))?
            .as_array()
            .ok_or_else(|| field("disutilities", "expected an array".into()))?;
        let mut disutilities = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| field(&format!("disutilities[{i}]"), "expected an array".into()))?;
            disutilities.push(
                row.iter()
                    .enumerate()
                    .map(|(c, v)| {
                        rational::from_json(v)
                            .map_err(|e| field(&format!("disutilities[{i}][{c}]"), e))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let scale = match obj.get("scale") {
            Some(v) => rational::from_json(v).map_err(|e| field("scale", e))?,
            None => Rational::one(),
        };
        let inst = Instance {
            weights,
            disutilities,
            scale,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn weight(&self, agent: usize) -> &Rational {
        &self.weights[agent]
    }

    pub fn disutilities(&self) -> &[Vec<Rational>] {
        &self.disutilities
    }

    /// Factor by which the disutilities were divided during normalization.
    pub fn scale(&self) -> &Rational {
        &self.scale
    }

    /// `w_i · d_i(M)`, the agent's proportional share.
    pub fn proportional_share(&self, agent: usize) -> Rational {
        &self.weights[agent] * self.total_disutility(agent)
    }

    pub fn max_disutility(&self) -> Rational {
        self.disutilities
            .iter()
            .flatten()
            .max()
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn is_bounded(&self) -> bool {
        self.disutilities
            .iter()
            .flatten()
            .all(|d| *d <= Rational::one())
    }

    /// Divides every disutility by `factor` and multiplies the recorded scale by it.
    pub fn scaled_down(&self, factor: &Rational) -> Instance {
        assert!(factor.is_positive(), "scale factor must be positive");
        Instance {
            weights: self.weights.clone(),
            disutilities: self
                .disutilities
                .iter()
                .map(|row| row.iter().map(|d| d / factor).collect())
                .collect(),
            scale: &self.scale * factor,
        }
    }

    /// Keeps only the listed chores, in the given order.
    pub fn restrict_chores(&self, chores: &[usize]) -> Instance {
        Instance {
            weights: self.weights.clone(),
            disutilities: self
                .disutilities
                .iter()
                .map(|row| chores.iter().map(|&c| row[c].clone()).collect())
                .collect(),
            scale: self.scale.clone(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("instance serializes")
    }
}

impl Disutility for Instance {
    fn agent_count(&self) -> usize {
        self.weights.len()
    }

    fn chore_count(&self) -> usize {
        self.disutilities.first().map_or(0, Vec::len)
    }

    fn disutility(&self, agent: usize, chore: usize) -> &Rational {
        &self.disutilities[agent][chore]
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "instance(n={}, m={})",
            self.agent_count(),
            self.chore_count()
        )
    }
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
    Instance::from_json(&doc)
}

pub fn serialize_instance(inst: &Instance) -> String {
    serde_json::to_string_pretty(inst).expect("instance serializes")
}

/// Chore ownership. `owner[c]` is `None` while chore `c` is unassigned;
/// a complete allocation has an owner for every chore.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntegralAllocation {
    pub owner: Vec<Option<usize>>,
}

impl IntegralAllocation {
    pub fn empty(m: usize) -> Self {
        IntegralAllocation {
            owner: vec![None; m],
        }
    }

    pub fn from_owners(owners: Vec<usize>) -> Self {
        IntegralAllocation {
            owner: owners.into_iter().map(Some).collect(),
        }
    }

    /// Builds an allocation from explicit bundles, one per agent.
    pub fn from_bundles(m: usize, bundles: &[Vec<usize>]) -> Self {
        let mut alloc = Self::empty(m);
        for (agent, bundle) in bundles.iter().enumerate() {
            for &c in bundle {
                alloc.owner[c] = Some(agent);
            }
        }
        alloc
    }

    pub fn chore_count(&self) -> usize {
        self.owner.len()
    }

    pub fn owner_of(&self, chore: usize) -> Option<usize> {
        self.owner[chore]
    }

    pub fn assign(&mut self, chore: usize, agent: usize) {
        self.owner[chore] = Some(agent);
    }

    pub fn is_complete(&self) -> bool {
        self.owner.iter().all(Option::is_some)
    }

    pub fn bundle(&self, agent: usize) -> Vec<usize> {
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(agent))
            .map(|(c, _)| c)
            .collect()
    }

    pub fn bundles(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n];
        for (c, o) in self.owner.iter().enumerate() {
            if let Some(a) = o {
                out[*a].push(c);
            }
        }
        out
    }
}

/// Result of removing chores that some agent does not mind at all.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    /// The instance over the remaining chores; every disutility is positive.
    pub instance: Instance,
    /// Assignments of removed chores, indexed by original chore.
    pub preassigned: IntegralAllocation,
    /// Original index of each remaining chore.
    pub kept: Vec<usize>,
}

/// Assigns every chore with a zero disutility to the lowest-index agent
/// that has zero disutility for it and drops it from the instance.
pub fn preprocess_zero_disutility(inst: &Instance) -> Preprocessed {
    let n = inst.agent_count();
    let m = inst.chore_count();
    let mut preassigned = IntegralAllocation::empty(m);
    let mut kept = Vec::with_capacity(m);
    for c in 0..m {
        match (0..n).find(|&i| inst.disutility(i, c).is_zero()) {
            Some(i) => preassigned.assign(c, i),
            None => kept.push(c),
        }
    }
    Preprocessed {
        instance: inst.restrict_chores(&kept),
        preassigned,
        kept,
    }
}

/// Scales disutilities down so the largest is 1. Bounded instances are
/// returned unchanged.
pub fn normalize(inst: &Instance) -> Instance {
    let max = inst.max_disutility();
    if max > Rational::one() {
        inst.scaled_down(&max)
    } else {
        inst.clone()
    }
}
