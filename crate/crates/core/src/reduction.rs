//! Identical-disutility reduction and rounding cost.
//!
//! Given an equilibrium `(x, p)` of a bounded instance, every agent is given
//! the same disutility `d̂(c) = p_c / p_max`. For any rounding of `x` the
//! rounding cost under `d̂` is at least the cost under the original
//! disutilities, so it suffices to round against `d̂`.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::equilibrium::{Equilibrium, FractionalAllocation};
use crate::instance::{Disutility, Instance, IntegralAllocation};
use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("chore {chore} is given to agent {agent} who holds no share of it")]
    NotARounding { chore: usize, agent: usize },
    #[error("chore {chore} in scope has no owner")]
    Unassigned { chore: usize },
}

/// The instance where every agent's disutility for chore `c` is `p_c / p_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedInstance {
    pub base: Instance,
    pub common: Vec<Rational>,
    pub p_max: Rational,
}

impl ReducedInstance {
    /// The reduced instance in the ordinary instance schema.
    pub fn to_instance(&self) -> Instance {
        Instance::new(
            self.base.weights().to_vec(),
            vec![self.common.clone(); self.base.agent_count()],
        )
        .expect("reduced instance keeps valid weights")
    }
}

impl Disutility for ReducedInstance {
    fn agent_count(&self) -> usize {
        self.base.agent_count()
    }

    fn chore_count(&self) -> usize {
        self.common.len()
    }

    fn disutility(&self, _agent: usize, chore: usize) -> &Rational {
        &self.common[chore]
    }
}

/// Normalizes payments by their maximum. An empty payment vector gives an
/// empty reduced instance with `p_max = 1`.
pub fn reduce_payments(payments: &[Rational]) -> (Vec<Rational>, Rational) {
    let p_max = payments.iter().max().cloned().unwrap_or_else(Rational::one);
    debug_assert!(p_max.is_positive());
    (payments.iter().map(|p| p / &p_max).collect(), p_max)
}

pub fn reduce_to_identical(eq: &Equilibrium, inst: &Instance) -> ReducedInstance {
    let (common, p_max) = reduce_payments(&eq.payments);
    ReducedInstance {
        base: inst.clone(),
        common,
        p_max,
    }
}

/// `Σ_i (d_i(A_i ∩ S) − Σ_{c∈S} d_i(c)·x_{i,c})⁺` over the chores `S = scope`.
pub fn rounding_cost(
    d: &impl Disutility,
    x: &FractionalAllocation,
    owners: &IntegralAllocation,
    scope: &[usize],
) -> Result<Rational, ReductionError> {
    let n = d.agent_count();
    let mut excess = vec![Rational::zero(); n];
    for &c in scope {
        let owner = owners
            .owner_of(c)
            .ok_or(ReductionError::Unassigned { chore: c })?;
        if !x.share(owner, c).is_positive() {
            return Err(ReductionError::NotARounding {
                chore: c,
                agent: owner,
            });
        }
        excess[owner] += d.disutility(owner, c);
        for (i, e) in excess.iter_mut().enumerate() {
            let share = x.share(i, c);
            if !share.is_zero() {
                *e -= share * d.disutility(i, c);
            }
        }
    }
    Ok(excess
        .into_iter()
        .fold(Rational::zero(), |acc, e| acc + rational::positive_part(e)))
}

/// Rounding cost over every chore.
pub fn total_rounding_cost(
    d: &impl Disutility,
    x: &FractionalAllocation,
    owners: &IntegralAllocation,
) -> Result<Rational, ReductionError> {
    let scope: Vec<usize> = (0..x.chore_count()).collect();
    rounding_cost(d, x, owners, &scope)
}
