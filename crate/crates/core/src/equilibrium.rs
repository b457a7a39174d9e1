//! Proportional market equilibrium via the proportionality LP and its dual.
//!
//! The primal LP minimizes `Σ d_i(c)·x_{i,c}` over fractional allocations
//! subject to `d_i(x_i) ≤ w_i·d_i(M)` for every agent. An optimal vertex is
//! proportional and has an acyclic consumption graph. The dual
//! `max Σ p_c − Σ h_i·w_i·d_i(M)  s.t.  p_c ≤ (1+h_i)·d_i(c), h ≥ 0`
//! supplies payments; with `α_i = 1/(1+h_i)` the pair is a market
//! equilibrium, which [`assemble_equilibrium`] checks exactly.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Disutility, Instance};
use crate::rational::{self, Rational};
use crate::simplex::{LpOutcome, StandardLp};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EquilibriumError {
    #[error("invalid fractional allocation: {0}")]
    InvalidAllocation(String),
    #[error("LP solver failure: {0}")]
    Solver(String),
    #[error("solver returned a cyclic consumption graph")]
    CyclicSolution,
    #[error("primal objective {primal} differs from dual objective {dual}")]
    DualityGap { primal: String, dual: String },
    #[error("certificate violation at agent {agent}, chore {chore}: {reason}")]
    CertificateViolation {
        agent: usize,
        chore: usize,
        reason: String,
    },
    #[error("payment for chore {chore} is not positive")]
    NonPositivePayment { chore: usize },
    #[error("dual variable h for agent {agent} is negative")]
    NegativeDual { agent: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// An `n × m` matrix of shares where each chore's column sums to one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FractionalAllocation {
    #[serde(with = "rational::serde_matrix")]
    shares: Vec<Vec<Rational>>,
}

impl FractionalAllocation {
    pub fn new(shares: Vec<Vec<Rational>>) -> Result<Self, EquilibriumError> {
        let alloc = FractionalAllocation { shares };
        alloc.validate()?;
        Ok(alloc)
    }

    pub fn validate(&self) -> Result<(), EquilibriumError> {
        let m = self.chore_count();
        for (i, row) in self.shares.iter().enumerate() {
            if row.len() != m {
                return Err(EquilibriumError::InvalidAllocation(format!(
                    "row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (c, v) in row.iter().enumerate() {
                if v.is_negative() || *v > Rational::one() {
                    return Err(EquilibriumError::InvalidAllocation(format!(
                        "x[{i}][{c}] = {v} outside [0, 1]"
                    )));
                }
            }
        }
        if m > 0 && self.shares.is_empty() {
            return Err(EquilibriumError::InvalidAllocation("no agents".into()));
        }
        for c in 0..m {
            let col = self
                .shares
                .iter()
                .fold(Rational::zero(), |acc, row| acc + &row[c]);
            if !col.is_one() {
                return Err(EquilibriumError::InvalidAllocation(format!(
                    "column {c} sums to {col}"
                )));
            }
        }
        Ok(())
    }

    /// Uniform split `x_{i,c} = w_i`, always feasible for the LP.
    pub fn by_weights(inst: &Instance) -> Self {
        let m = inst.chore_count();
        FractionalAllocation {
            shares: inst.weights().iter().map(|w| vec![w.clone(); m]).collect(),
        }
    }

    pub fn from_integral(n: usize, owners: &[usize]) -> Self {
        let mut shares = vec![vec![Rational::zero(); owners.len()]; n];
        for (c, &a) in owners.iter().enumerate() {
            shares[a][c] = Rational::one();
        }
        FractionalAllocation { shares }
    }

    pub fn agent_count(&self) -> usize {
        self.shares.len()
    }

    pub fn chore_count(&self) -> usize {
        self.shares.first().map_or(0, Vec::len)
    }

    pub fn share(&self, agent: usize, chore: usize) -> &Rational {
        &self.shares[agent][chore]
    }

    pub fn shares(&self) -> &[Vec<Rational>] {
        &self.shares
    }

    /// `d_i(x_i)`.
    pub fn bundle_disutility(&self, d: &impl Disutility, agent: usize) -> Rational {
        self.shares[agent]
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_zero())
            .fold(Rational::zero(), |acc, (c, x)| {
                acc + x * d.disutility(agent, c)
            })
    }

    pub fn is_integral(&self) -> bool {
        self.shares
            .iter()
            .flatten()
            .all(|v| v.is_zero() || v.is_one())
    }
}

/// Bipartite agent–chore graph with an edge wherever a share is positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsumptionGraph {
    chore_agents: Vec<Vec<usize>>,
    agent_chores: Vec<Vec<usize>>,
}

/// A connected component of a [`ConsumptionGraph`] that contains at least one chore.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub agents: Vec<usize>,
    pub chores: Vec<usize>,
    pub edges: usize,
}

impl Component {
    pub fn is_tree(&self) -> bool {
        self.edges + 1 == self.agents.len() + self.chores.len()
    }
}

impl ConsumptionGraph {
    pub fn from_edges(n: usize, m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut chore_agents = vec![Vec::new(); m];
        let mut agent_chores = vec![Vec::new(); n];
        for (i, c) in edges {
            chore_agents[c].push(i);
            agent_chores[i].push(c);
        }
        for v in chore_agents.iter_mut().chain(agent_chores.iter_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        ConsumptionGraph {
            chore_agents,
            agent_chores,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.agent_chores.len()
    }

    pub fn chore_count(&self) -> usize {
        self.chore_agents.len()
    }

    /// Agents adjacent to `chore`, ascending.
    pub fn agents_of(&self, chore: usize) -> &[usize] {
        &self.chore_agents[chore]
    }

    /// Chores adjacent to `agent`, ascending.
    pub fn chores_of(&self, agent: usize) -> &[usize] {
        &self.agent_chores[agent]
    }

    pub fn degree(&self, chore: usize) -> usize {
        self.chore_agents[chore].len()
    }

    pub fn edge_count(&self) -> usize {
        self.chore_agents.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, agent: usize, chore: usize) -> bool {
        self.chore_agents[chore].binary_search(&agent).is_ok()
    }

    /// Copy of the graph with the listed chores' edges removed.
    pub fn without_chores(&self, removed: &[usize]) -> ConsumptionGraph {
        let mut g = self.clone();
        for &c in removed {
            for &a in &self.chore_agents[c] {
                g.agent_chores[a].retain(|&x| x != c);
            }
            g.chore_agents[c].clear();
        }
        g
    }

    /// Components that contain at least one edge, ordered by their lowest chore.
    pub fn components(&self) -> Vec<Component> {
        let n = self.agent_count();
        let m = self.chore_count();
        let mut seen_chore = vec![false; m];
        let mut seen_agent = vec![false; n];
        let mut out = Vec::new();
        for start in 0..m {
            if seen_chore[start] || self.chore_agents[start].is_empty() {
                continue;
            }
            let mut comp = Component {
                agents: Vec::new(),
                chores: Vec::new(),
                edges: 0,
            };
            // (is_chore, index)
            let mut stack = vec![(true, start)];
            seen_chore[start] = true;
            while let Some((is_chore, v)) = stack.pop() {
                if is_chore {
                    comp.chores.push(v);
                    comp.edges += self.chore_agents[v].len();
                    for &a in &self.chore_agents[v] {
                        if !seen_agent[a] {
                            seen_agent[a] = true;
                            stack.push((false, a));
                        }
                    }
                } else {
                    comp.agents.push(v);
                    for &c in &self.agent_chores[v] {
                        if !seen_chore[c] {
                            seen_chore[c] = true;
                            stack.push((true, c));
                        }
                    }
                }
            }
            comp.agents.sort_unstable();
            comp.chores.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_forest(&self) -> bool {
        self.components().iter().all(Component::is_tree)
    }

    pub fn has_cycle(&self) -> bool {
        !self.is_forest()
    }
}

pub fn consumption_graph(alloc: &FractionalAllocation) -> ConsumptionGraph {
    let n = alloc.agent_count();
    let m = alloc.chore_count();
    ConsumptionGraph::from_edges(
        n,
        m,
        (0..n)
            .flat_map(|i| (0..m).map(move |c| (i, c)))
            .filter(|&(i, c)| alloc.share(i, c).is_positive()),
    )
}

/// Payments and dual multipliers from the dual LP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualSolution {
    pub payments: Vec<Rational>,
    pub dual_h: Vec<Rational>,
    pub objective: Rational,
}

/// A certified market equilibrium.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equilibrium {
    #[serde(rename = "x")]
    pub alloc: FractionalAllocation,
    #[serde(rename = "p", with = "rational::serde_vec")]
    pub payments: Vec<Rational>,
    /// Minimum pain-per-buck `α_i = 1/(1+h_i)`.
    #[serde(rename = "alpha", with = "rational::serde_vec")]
    pub mpb: Vec<Rational>,
    #[serde(rename = "h", with = "rational::serde_vec")]
    pub dual_h: Vec<Rational>,
}

pub fn primal_objective(inst: &Instance, alloc: &FractionalAllocation) -> Rational {
    (0..inst.agent_count()).fold(Rational::zero(), |acc, i| {
        acc + alloc.bundle_disutility(inst, i)
    })
}

pub fn dual_objective(inst: &Instance, payments: &[Rational], dual_h: &[Rational]) -> Rational {
    let paid = rational::sum(payments);
    let charged = dual_h
        .iter()
        .enumerate()
        .fold(Rational::zero(), |acc, (i, h)| {
            acc + h * inst.proportional_share(i)
        });
    paid - charged
}

/// Solves the proportionality LP and returns an optimal vertex.
pub fn solve_primal(inst: &Instance) -> Result<FractionalAllocation, EquilibriumError> {
    let n = inst.agent_count();
    let m = inst.chore_count();
    let vars = n * m + n;
    let x_var = |i: usize, c: usize| i * m + c;

    let mut constraints = Vec::with_capacity(n + m);
    let mut rhs = Vec::with_capacity(n + m);
    for i in 0..n {
        let mut row = vec![Rational::zero(); vars];
        for c in 0..m {
            row[x_var(i, c)] = inst.disutility(i, c).clone();
        }
        row[n * m + i] = Rational::one();
        constraints.push(row);
        rhs.push(inst.proportional_share(i));
    }
    for c in 0..m {
        let mut row = vec![Rational::zero(); vars];
        for i in 0..n {
            row[x_var(i, c)] = Rational::one();
        }
        constraints.push(row);
        rhs.push(Rational::one());
    }
    let mut cost = vec![Rational::zero(); vars];
    for i in 0..n {
        for c in 0..m {
            cost[x_var(i, c)] = inst.disutility(i, c).clone();
        }
    }

    let lp = StandardLp {
        constraints,
        rhs,
        cost,
    };
    let sol = match lp.solve() {
        LpOutcome::Optimal(sol) => sol,
        other => return Err(EquilibriumError::Solver(format!("primal LP: {other:?}"))),
    };
    let shares = (0..n)
        .map(|i| (0..m).map(|c| sol.values[x_var(i, c)].clone()).collect())
        .collect();
    let alloc = FractionalAllocation::new(shares)?;
    if consumption_graph(&alloc).has_cycle() {
        return Err(EquilibriumError::CyclicSolution);
    }
    Ok(alloc)
}

/// Solves the dual LP, with the free payments split as `p = p⁺ − p⁻`.
pub fn solve_dual(inst: &Instance) -> Result<DualSolution, EquilibriumError> {
    let n = inst.agent_count();
    let m = inst.chore_count();
    let vars = 2 * m + n + n * m;
    let h_var = |i: usize| 2 * m + i;
    let slack = |i: usize, c: usize| 2 * m + n + i * m + c;

    let mut constraints = Vec::with_capacity(n * m);
    let mut rhs = Vec::with_capacity(n * m);
    for i in 0..n {
        for c in 0..m {
            let d = inst.disutility(i, c);
            let mut row = vec![Rational::zero(); vars];
            row[c] = Rational::one();
            row[m + c] = -Rational::one();
            row[h_var(i)] = -d.clone();
            row[slack(i, c)] = Rational::one();
            constraints.push(row);
            rhs.push(d.clone());
        }
    }
    let mut cost = vec![Rational::zero(); vars];
    for c in 0..m {
        cost[c] = -Rational::one();
        cost[m + c] = Rational::one();
    }
    for i in 0..n {
        cost[h_var(i)] = inst.proportional_share(i);
    }

    let lp = StandardLp {
        constraints,
        rhs,
        cost,
    };
    let sol = match lp.solve() {
        LpOutcome::Optimal(sol) => sol,
        other => return Err(EquilibriumError::Solver(format!("dual LP: {other:?}"))),
    };
    let payments: Vec<Rational> = (0..m)
        .map(|c| &sol.values[c] - &sol.values[m + c])
        .collect();
    let dual_h: Vec<Rational> = (0..n).map(|i| sol.values[h_var(i)].clone()).collect();
    Ok(DualSolution {
        payments,
        dual_h,
        objective: -sol.objective,
    })
}

/// Derives `α_i = 1/(1+h_i)` and checks the market-equilibrium conditions.
pub fn assemble_equilibrium(
    inst: &Instance,
    alloc: FractionalAllocation,
    payments: Vec<Rational>,
    dual_h: Vec<Rational>,
) -> Result<Equilibrium, EquilibriumError> {
    let n = inst.agent_count();
    let m = inst.chore_count();
    if alloc.agent_count() != n || alloc.chore_count() != m && m > 0 {
        return Err(EquilibriumError::Shape(format!(
            "allocation is {}×{}, instance is {n}×{m}",
            alloc.agent_count(),
            alloc.chore_count()
        )));
    }
    if payments.len() != m || dual_h.len() != n {
        return Err(EquilibriumError::Shape(format!(
            "{} payments and {} dual values for {m} chores and {n} agents",
            payments.len(),
            dual_h.len()
        )));
    }
    if let Some(i) = dual_h.iter().position(Signed::is_negative) {
        return Err(EquilibriumError::NegativeDual { agent: i });
    }
    let mpb: Vec<Rational> = dual_h
        .iter()
        .map(|h| (Rational::one() + h).recip())
        .collect();
    let eq = Equilibrium {
        alloc,
        payments,
        mpb,
        dual_h,
    };
    check_equilibrium(inst, &eq)?;
    Ok(eq)
}

/// Checks `p > 0`, `α > 0`, `d_i(c) ≥ α_i·p_c` everywhere and equality on
/// every consumption edge.
pub fn check_equilibrium(inst: &Instance, eq: &Equilibrium) -> Result<(), EquilibriumError> {
    let n = inst.agent_count();
    let m = inst.chore_count();
    if eq.mpb.len() != n || eq.payments.len() != m {
        return Err(EquilibriumError::Shape("equilibrium vectors".into()));
    }
    if let Some(c) = eq.payments.iter().position(|p| !p.is_positive()) {
        return Err(EquilibriumError::NonPositivePayment { chore: c });
    }
    for i in 0..n {
        let alpha = &eq.mpb[i];
        if !alpha.is_positive() {
            return Err(EquilibriumError::CertificateViolation {
                agent: i,
                chore: 0,
                reason: "non-positive pain-per-buck".into(),
            });
        }
        for c in 0..m {
            let priced = alpha * &eq.payments[c];
            let d = inst.disutility(i, c);
            if *d < priced {
                return Err(EquilibriumError::CertificateViolation {
                    agent: i,
                    chore: c,
                    reason: format!("d = {d} < α·p = {priced}"),
                });
            }
            if eq.alloc.share(i, c).is_positive() && *d != priced {
                return Err(EquilibriumError::CertificateViolation {
                    agent: i,
                    chore: c,
                    reason: format!("held chore with d = {d} ≠ α·p = {priced}"),
                });
            }
        }
    }
    Ok(())
}

/// Runs both LPs, checks strong duality, and certifies the equilibrium.
pub fn solve_equilibrium(inst: &Instance) -> Result<Equilibrium, EquilibriumError> {
    let alloc = solve_primal(inst)?;
    let dual = solve_dual(inst)?;
    let primal = primal_objective(inst, &alloc);
    if primal != dual.objective {
        return Err(EquilibriumError::DualityGap {
            primal: primal.to_string(),
            dual: dual.objective.to_string(),
        });
    }
    assemble_equilibrium(inst, alloc, dual.payments, dual.dual_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_instance;
    use crate::rational::{int, ratio};

    pub(crate) fn worked_instance() -> Instance {
        parse_instance(
            r#"{ "weights": ["2/15","8/15","1/3"],
            "disutilities": [["1/2","1","1/2"],["1","1","1"],["1","2/3","1/3"]] }"#,
        )
        .unwrap()
    }

    pub(crate) fn worked_x() -> FractionalAllocation {
        FractionalAllocation::new(vec![
            vec![ratio(1, 3), int(0), int(0)],
            vec![ratio(2, 3), ratio(2, 3), int(0)],
            vec![int(0), ratio(1, 3), int(1)],
        ])
        .unwrap()
    }

    #[test]
    fn single_agent_takes_everything() {
        let inst = Instance::new(vec![int(1)], vec![vec![ratio(1, 2), int(1)]]).unwrap();
        let x = solve_primal(&inst).unwrap();
        assert_eq!(x.shares(), &[vec![int(1), int(1)]]);
    }

    #[test]
    fn two_equal_agents_split_single_chore() {
        let inst = Instance::new(
            vec![ratio(1, 2), ratio(1, 2)],
            vec![vec![int(1)], vec![int(1)]],
        )
        .unwrap();
        let x = solve_primal(&inst).unwrap();
        assert_eq!(x.shares(), &[vec![ratio(1, 2)], vec![ratio(1, 2)]]);
    }

    #[test]
    fn weight_split_is_feasible() {
        let inst = worked_instance();
        let x = FractionalAllocation::by_weights(&inst);
        x.validate().unwrap();
        for i in 0..3 {
            assert_eq!(x.bundle_disutility(&inst, i), inst.proportional_share(i));
        }
    }

    #[test]
    fn single_agent_dual_is_slack() {
        let inst = Instance::new(vec![int(1)], vec![vec![int(1)]]).unwrap();
        let dual = solve_dual(&inst).unwrap();
        assert_eq!(dual.dual_h, vec![int(0)]);
        assert_eq!(dual.payments, vec![int(1)]);
    }

    #[test]
    fn worked_payments_certify_worked_x() {
        let inst = worked_instance();
        let eq = assemble_equilibrium(
            &inst,
            worked_x(),
            vec![int(1), int(1), ratio(1, 2)],
            vec![int(1), int(0), ratio(1, 2)],
        )
        .unwrap();
        assert_eq!(eq.mpb, vec![ratio(1, 2), int(1), ratio(2, 3)]);
        // (p, h) is dual optimal, although x itself is not primal optimal.
        let dual = solve_dual(&inst).unwrap();
        assert_eq!(
            dual_objective(&inst, &eq.payments, &eq.dual_h),
            dual.objective
        );
        assert_eq!(dual.objective, ratio(19, 10));
        assert!(primal_objective(&inst, &eq.alloc) > dual.objective);
    }

    #[test]
    fn perturbed_payment_is_rejected() {
        let err = assemble_equilibrium(
            &worked_instance(),
            worked_x(),
            vec![int(1), int(1), int(1)],
            vec![int(1), int(0), ratio(1, 2)],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            EquilibriumError::CertificateViolation {
                agent: 2,
                chore: 2,
                ..
            }
        ));
    }

    #[test]
    fn solved_worked_instance_is_certified() {
        let inst = worked_instance();
        let eq = solve_equilibrium(&inst).unwrap();
        assert!(consumption_graph(&eq.alloc).is_forest());
        for i in 0..3 {
            assert!(eq.alloc.bundle_disutility(&inst, i) <= inst.proportional_share(i));
        }
    }

    #[test]
    fn graph_of_worked_x_is_a_path() {
        let g = consumption_graph(&worked_x());
        assert_eq!(g.agents_of(0), &[0, 1]);
        assert_eq!(g.agents_of(1), &[1, 2]);
        assert_eq!(g.agents_of(2), &[2]);
        assert_eq!(g.edge_count(), 5);
        let comps = g.components();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].agents, vec![0, 1, 2]);
        assert!(comps[0].is_tree());
    }

    #[test]
    fn integral_graph_and_four_cycle() {
        let g = consumption_graph(&FractionalAllocation::from_integral(2, &[1, 0, 1]));
        assert!((0..3).all(|c| g.degree(c) == 1));
        assert!(g.is_forest());

        let half = ratio(1, 2);
        let x = FractionalAllocation::new(vec![
            vec![half.clone(), half.clone()],
            vec![half.clone(), half],
        ])
        .unwrap();
        assert!(consumption_graph(&x).has_cycle());
    }

    #[test]
    fn empty_instance_solves() {
        let inst = Instance::new(vec![ratio(1, 2), ratio(1, 2)], vec![vec![], vec![]]).unwrap();
        let eq = solve_equilibrium(&inst).unwrap();
        assert_eq!(eq.alloc.chore_count(), 0);
        assert!(eq.payments.is_empty());
    }
}
