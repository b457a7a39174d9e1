//! Subsidy accounting, certificates, and brute-force oracles.
//!
//! The oracles enumerate every integral allocation in mixed-radix order
//! (chore 0 is the least significant digit), so ties resolve to the first
//! allocation in that order regardless of how the range is chunked.

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::equilibrium::{Equilibrium, FractionalAllocation};
use crate::instance::{Disutility, Instance, IntegralAllocation};
use crate::rational::{self, Rational};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("allocation is incomplete or malformed: {0}")]
    IncompleteAllocation(String),
    #[error("enumeration needs {needed} allocations, budget is {budget}")]
    BudgetExceeded { needed: String, budget: u64 },
}

/// Per-agent proportionality subsidies of an integral allocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubsidyReport {
    pub allocation: IntegralAllocation,
    #[serde(with = "rational::serde_vec")]
    pub per_agent_subsidy: Vec<Rational>,
    #[serde(with = "rational::serde_scalar")]
    pub total: Rational,
    #[serde(with = "rational::serde_scalar")]
    pub bound: Rational,
    pub bound_satisfied: bool,
    /// Filled in by the caller once the equilibrium certificate is checked.
    pub fpo_certified: bool,
    /// Multiply subsidies by this to restate them in input units.
    #[serde(with = "rational::serde_scalar")]
    pub scale: Rational,
}

/// `n/3 − 1/6`.
pub fn subsidy_bound(n: usize) -> Rational {
    rational::ratio(2 * n as i64 - 1, 6)
}

/// `m(n−m)/n`, the optimal subsidy for `m < n` identical unit chores and equal weights.
pub fn identical_chores_optimum(n: usize, m: usize) -> Rational {
    rational::ratio((m * (n - m)) as i64, n as i64)
}

fn check_complete(inst: &Instance, alloc: &IntegralAllocation) -> Result<(), AuditError> {
    let m = inst.chore_count();
    let n = inst.agent_count();
    if alloc.chore_count() != m {
        return Err(AuditError::IncompleteAllocation(format!(
            "{} chores allocated, instance has {m}",
            alloc.chore_count()
        )));
    }
    for (c, o) in alloc.owner.iter().enumerate() {
        match o {
            None => {
                return Err(AuditError::IncompleteAllocation(format!(
                    "chore {c} has no owner"
                )))
            }
            Some(a) if *a >= n => {
                return Err(AuditError::IncompleteAllocation(format!(
                    "chore {c} owned by unknown agent {a}"
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn subsidy(inst: &Instance, alloc: &IntegralAllocation) -> Result<SubsidyReport, AuditError> {
    check_complete(inst, alloc)?;
    let n = inst.agent_count();
    let bundles = alloc.bundles(n);
    let per_agent_subsidy: Vec<Rational> = (0..n)
        .map(|i| {
            rational::positive_part(
                inst.bundle_disutility(i, &bundles[i]) - inst.proportional_share(i),
            )
        })
        .collect();
    let total = rational::sum(&per_agent_subsidy);
    let bound = subsidy_bound(n);
    Ok(SubsidyReport {
        allocation: alloc.clone(),
        bound_satisfied: total <= bound,
        per_agent_subsidy,
        total,
        bound,
        fpo_certified: false,
        scale: inst.scale().clone(),
    })
}

/// Exact proportionality test `d_i(x_i) ≤ w_i·d_i(M)`.
pub fn prop_check(inst: &Instance, x: &FractionalAllocation) -> bool {
    (0..inst.agent_count()).all(|i| x.bundle_disutility(inst, i) <= inst.proportional_share(i))
}

/// True iff `(A, p)` is a market equilibrium with the equilibrium's `α`,
/// which by the first welfare theorem makes `A` fractionally Pareto-optimal.
pub fn certify_fpo(inst: &Instance, eq: &Equilibrium, alloc: &IntegralAllocation) -> bool {
    let n = inst.agent_count();
    let m = inst.chore_count();
    if check_complete(inst, alloc).is_err() || eq.mpb.len() != n || eq.payments.len() != m {
        return false;
    }
    if eq.payments.iter().any(|p| !p.is_positive()) || eq.mpb.iter().any(|a| !a.is_positive()) {
        return false;
    }
    for c in 0..m {
        let owner = alloc.owner_of(c).expect("checked complete");
        for i in 0..n {
            let priced = &eq.mpb[i] * &eq.payments[c];
            let d = inst.disutility(i, c);
            if *d < priced || (i == owner && *d != priced) {
                return false;
            }
        }
    }
    true
}

fn allocation_count(n: usize, m: usize, budget: u64) -> Result<u64, AuditError> {
    let mut count: u64 = 1;
    for _ in 0..m {
        count = match count.checked_mul(n as u64) {
            Some(c) if c <= budget => c,
            _ => {
                return Err(AuditError::BudgetExceeded {
                    needed: format!("{n}^{m}"),
                    budget,
                })
            }
        };
    }
    if count > budget {
        return Err(AuditError::BudgetExceeded {
            needed: format!("{n}^{m}"),
            budget,
        });
    }
    Ok(count)
}

/// Walks allocations `start..end` in mixed-radix order, keeping per-agent
/// bundle disutilities up to date, and calls `visit(index, owners, bundles)`.
fn enumerate_range(
    inst: &Instance,
    start: u64,
    end: u64,
    mut visit: impl FnMut(u64, &[usize], &[Rational]),
) {
    let n = inst.agent_count();
    let m = inst.chore_count();
    let mut owners = vec![0usize; m];
    let mut rest = start;
    for o in owners.iter_mut() {
        *o = (rest % n as u64) as usize;
        rest /= n as u64;
    }
    let mut bundles = vec![Rational::zero(); n];
    for (c, &o) in owners.iter().enumerate() {
        bundles[o] += inst.disutility(o, c);
    }
    for index in start..end {
        visit(index, &owners, &bundles);
        // odometer step
        for (c, owner) in owners.iter_mut().enumerate() {
            let old = *owner;
            bundles[old] -= inst.disutility(old, c);
            let new = if old + 1 == n { 0 } else { old + 1 };
            *owner = new;
            bundles[new] += inst.disutility(new, c);
            if new != 0 {
                break;
            }
        }
    }
}

fn chunks(total: u64, jobs: usize) -> Vec<(u64, u64)> {
    let parts = (jobs.max(1) as u64).min(total.max(1));
    let size = total.div_ceil(parts);
    (0..parts)
        .map(|k| (k * size, ((k + 1) * size).min(total)))
        .filter(|(a, b)| a < b)
        .collect()
}

fn run_chunks<T: Send>(
    jobs: usize,
    ranges: Vec<(u64, u64)>,
    f: impl Fn(u64, u64) -> T + Sync + Send,
) -> Vec<T> {
    if jobs > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| ranges.into_par_iter().map(|(a, b)| f(a, b)).collect());
        }
    }
    ranges.into_iter().map(|(a, b)| f(a, b)).collect()
}

/// Minimum total subsidy over all integral allocations, with the first
/// minimizer in enumeration order.
pub fn brute_force_opt_subsidy(
    inst: &Instance,
    budget: u64,
    jobs: usize,
) -> Result<(Rational, IntegralAllocation), AuditError> {
    let n = inst.agent_count();
    let m = inst.chore_count();
    let total = allocation_count(n, m, budget)?;
    let shares: Vec<Rational> = (0..n).map(|i| inst.proportional_share(i)).collect();
    let results = run_chunks(jobs, chunks(total, jobs), |start, end| {
        let mut best: Option<(Rational, u64, Vec<usize>)> = None;
        enumerate_range(inst, start, end, |index, owners, bundles| {
            let value = bundles
                .iter()
                .zip(&shares)
                .fold(
                    Rational::zero(),
                    |acc, (b, s)| {
                        if b > s {
                            acc + (b - s)
                        } else {
                            acc
                        }
                    },
                );
            if best.as_ref().is_none_or(|(v, _, _)| value < *v) {
                best = Some((value, index, owners.to_vec()));
            }
        });
        best
    });
    let (value, _, owners) = results
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one allocation");
    Ok((value, IntegralAllocation::from_owners(owners)))
}

/// True iff no integral allocation Pareto-dominates `alloc`.
pub fn pareto_check_integral(
    inst: &Instance,
    alloc: &IntegralAllocation,
    budget: u64,
    jobs: usize,
) -> Result<bool, AuditError> {
    check_complete(inst, alloc)?;
    let n = inst.agent_count();
    let m = inst.chore_count();
    let total = allocation_count(n, m, budget)?;
    let bundles = alloc.bundles(n);
    let current: Vec<Rational> = (0..n)
        .map(|i| inst.bundle_disutility(i, &bundles[i]))
        .collect();
    let dominated = run_chunks(jobs, chunks(total, jobs), |start, end| {
        let mut found = false;
        enumerate_range(inst, start, end, |_, _, other| {
            if found {
                return;
            }
            let no_worse = other.iter().zip(&current).all(|(o, c)| o <= c);
            let better = other.iter().zip(&current).any(|(o, c)| o < c);
            found = no_worse && better;
        });
        found
    });
    Ok(!dominated.into_iter().any(|d| d))
}
