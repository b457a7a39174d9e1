//! Splits an acyclic consumption graph into small chore-disjoint trees.
//!
//! After chores held by a single agent are set aside, every chore has degree
//! at least two. A tree whose chores all have degree exactly two is cut into
//! two-chore paths (Type 2) plus at most one single shared chore (Type 1).
//! A tree with some chore of degree at least three is cut into Type 2 paths
//! and Type 3 "hubs": a chore shared by `k ≥ 3` agents, some of which also
//! share one pendant chore with an outer agent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::ConsumptionGraph;
use crate::instance::IntegralAllocation;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompositionError {
    #[error("chore {chore} has degree {degree}, expected {expected}")]
    ChoreDegreeViolation {
        chore: usize,
        degree: usize,
        expected: &'static str,
    },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("consumption graph contains a cycle")]
    NotAForest,
}

/// One pendant chore of a Type 3 piece, shared by a hub agent and an outer agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub spoke: usize,
    pub chore: usize,
    pub leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TreePiece {
    /// One chore shared by two agents.
    Type1 { chore: usize, agents: [usize; 2] },
    /// Path `i1 – c1 – i2 – c2 – i3`; `agents[1]` holds both chores.
    Type2 {
        chores: [usize; 2],
        agents: [usize; 3],
    },
    /// Hub chore shared by `spokes`, with pendant `branches`.
    Type3 {
        hub: usize,
        spokes: Vec<usize>,
        branches: Vec<Branch>,
    },
}

impl TreePiece {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TreePiece::Type1 { .. } => "Type1",
            TreePiece::Type2 { .. } => "Type2",
            TreePiece::Type3 { .. } => "Type3",
        }
    }

    pub fn chores(&self) -> Vec<usize> {
        match self {
            TreePiece::Type1 { chore, .. } => vec![*chore],
            TreePiece::Type2 { chores, .. } => chores.to_vec(),
            TreePiece::Type3 { hub, branches, .. } => std::iter::once(*hub)
                .chain(branches.iter().map(|b| b.chore))
                .collect(),
        }
    }

    pub fn agents(&self) -> Vec<usize> {
        match self {
            TreePiece::Type1 { agents, .. } => agents.to_vec(),
            TreePiece::Type2 { agents, .. } => agents.to_vec(),
            TreePiece::Type3 {
                spokes, branches, ..
            } => spokes
                .iter()
                .copied()
                .chain(branches.iter().map(|b| b.leaf))
                .collect(),
        }
    }

    pub fn edge_count(&self) -> usize {
        match self {
            TreePiece::Type1 { .. } => 2,
            TreePiece::Type2 { .. } => 4,
            TreePiece::Type3 {
                spokes, branches, ..
            } => spokes.len() + 2 * branches.len(),
        }
    }

    /// Edges minus chores; a third of this bounds the piece's rounding cost
    /// for Type 2 and Type 3 pieces.
    pub fn weight(&self) -> usize {
        self.edge_count() - self.chores().len()
    }

    /// Checks that the piece's induced subgraph in `graph` has exactly the
    /// declared shape.
    pub fn check(&self, graph: &ConsumptionGraph) -> Result<(), String> {
        let same = |chore: usize, expected: &[usize]| {
            let mut e = expected.to_vec();
            e.sort_unstable();
            if graph.agents_of(chore) == e.as_slice() {
                Ok(())
            } else {
                Err(format!(
                    "chore {chore} has agents {:?}, piece declares {:?}",
                    graph.agents_of(chore),
                    e
                ))
            }
        };
        match self {
            TreePiece::Type1 { chore, agents } => {
                if agents[0] == agents[1] {
                    return Err("Type1 agents must differ".into());
                }
                same(*chore, agents)
            }
            TreePiece::Type2 { chores, agents } => {
                let [i1, i2, i3] = *agents;
                if i1 == i2 || i2 == i3 || i1 == i3 || chores[0] == chores[1] {
                    return Err("Type2 roles must be distinct".into());
                }
                same(chores[0], &[i1, i2])?;
                same(chores[1], &[i2, i3])
            }
            TreePiece::Type3 {
                hub,
                spokes,
                branches,
            } => {
                let k = spokes.len();
                if k < 3 {
                    return Err(format!("Type3 needs k ≥ 3, found {k}"));
                }
                if branches.len() > k {
                    return Err("Type3 has more branches than spokes".into());
                }
                same(*hub, spokes)?;
                let mut used = Vec::new();
                for b in branches {
                    if !spokes.contains(&b.spoke) || used.contains(&b.spoke) {
                        return Err(format!("branch spoke {} invalid or reused", b.spoke));
                    }
                    if spokes.contains(&b.leaf) || used.contains(&b.leaf) {
                        return Err(format!("branch leaf {} overlaps", b.leaf));
                    }
                    used.push(b.spoke);
                    used.push(b.leaf);
                    same(b.chore, &[b.spoke, b.leaf])?;
                }
                Ok(())
            }
        }
    }
}

/// Assigns every degree-one chore to its only agent and removes it.
pub fn preassign_degree_one(graph: &ConsumptionGraph) -> (IntegralAllocation, ConsumptionGraph) {
    let m = graph.chore_count();
    let mut assigned = IntegralAllocation::empty(m);
    let mut removed = Vec::new();
    for c in 0..m {
        if let [agent] = graph.agents_of(c) {
            assigned.assign(c, *agent);
            removed.push(c);
        }
    }
    (assigned, graph.without_chores(&removed))
}

/// Traversal state shared by the splitting routines; counts elementary steps.
struct Splitter<'g> {
    graph: &'g ConsumptionGraph,
    in_scope: Vec<bool>,
    steps: usize,
}

impl<'g> Splitter<'g> {
    fn new(graph: &'g ConsumptionGraph) -> Self {
        Splitter {
            graph,
            in_scope: vec![false; graph.chore_count()],
            steps: 0,
        }
    }

    fn other_agent(&self, chore: usize, agent: usize) -> usize {
        let [a, b] = self.graph.agents_of(chore) else {
            unreachable!("degree-two chore expected")
        };
        if *a == agent {
            *b
        } else {
            *a
        }
    }

    fn two(&mut self, chores: &[usize]) -> Result<Vec<TreePiece>, DecompositionError> {
        for &c in chores {
            let degree = self.graph.degree(c);
            if degree != 2 {
                return Err(DecompositionError::ChoreDegreeViolation {
                    chore: c,
                    degree,
                    expected: "exactly 2",
                });
            }
        }
        // The agent tree: one edge per chore.
        let mut adj: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for &c in chores {
            let [a, b] = *self.graph.agents_of(c) else {
                unreachable!()
            };
            adj.entry(a).or_default().push((c, b));
            adj.entry(b).or_default().push((c, a));
            self.steps += 1;
        }
        for list in adj.values_mut() {
            list.sort_unstable();
        }

        let mut pieces = Vec::new();
        let mut visited: BTreeMap<usize, bool> = adj.keys().map(|&a| (a, false)).collect();
        let roots: Vec<usize> = adj.keys().copied().collect();
        for root in roots {
            if visited[&root] {
                continue;
            }
            // Preorder with parent edge; processed in reverse for a bottom-up pass.
            let mut order: Vec<(usize, Option<usize>)> = Vec::new();
            let mut stack = vec![(root, None)];
            visited.insert(root, true);
            while let Some((v, via)) = stack.pop() {
                self.steps += 1;
                order.push((v, via));
                for &(c, u) in adj[&v].iter().rev() {
                    self.steps += 1;
                    if Some(c) != via && !visited[&u] {
                        visited.insert(u, true);
                        stack.push((u, Some(c)));
                    } else if Some(c) != via {
                        return Err(DecompositionError::NotAForest);
                    }
                }
            }
            let mut leftover: BTreeMap<usize, usize> = BTreeMap::new();
            for &(v, via) in order.iter().rev() {
                let mut pool = Vec::new();
                for &(c, u) in &adj[&v] {
                    self.steps += 1;
                    if Some(c) == via {
                        continue;
                    }
                    match leftover.remove(&u) {
                        Some(f) => pieces.push(TreePiece::Type2 {
                            chores: [c, f],
                            agents: [v, u, self.other_agent(f, u)],
                        }),
                        None => pool.push(c),
                    }
                }
                pool.sort_unstable();
                let mut pairs = pool.chunks_exact(2);
                for pair in &mut pairs {
                    pieces.push(TreePiece::Type2 {
                        chores: [pair[0], pair[1]],
                        agents: [
                            self.other_agent(pair[0], v),
                            v,
                            self.other_agent(pair[1], v),
                        ],
                    });
                }
                if let [last] = pairs.remainder() {
                    if via.is_some() {
                        leftover.insert(v, *last);
                    } else {
                        let mut agents = self.graph.agents_of(*last).to_vec();
                        agents.sort_unstable();
                        pieces.push(TreePiece::Type1 {
                            chore: *last,
                            agents: [agents[0], agents[1]],
                        });
                    }
                }
            }
        }
        Ok(pieces)
    }

    fn mark(&mut self, chores: &[usize], value: bool) {
        for &c in chores {
            self.in_scope[c] = value;
        }
    }

    /// In-scope chores in the subtree hanging below `agent` when entered via `parent`.
    fn below_agent(&mut self, agent: usize, parent: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, usize)> = self
            .graph
            .chores_of(agent)
            .iter()
            .filter(|&&c| c != parent && self.in_scope[c])
            .map(|&c| (c, agent))
            .collect();
        while let Some((c, from)) = stack.pop() {
            self.steps += 1;
            out.push(c);
            for &a in self.graph.agents_of(c) {
                if a == from {
                    continue;
                }
                for &next in self.graph.chores_of(a) {
                    self.steps += 1;
                    if next != c && self.in_scope[next] {
                        stack.push((next, a));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// In-scope chores in the subtree rooted at `chore`, entered from `parent`.
    fn below_chore(&mut self, chore: usize, parent: usize) -> Vec<usize> {
        let mut out = vec![chore];
        for &a in self.graph.agents_of(chore) {
            if a != parent {
                out.extend(self.below_agent(a, chore));
            }
        }
        out.sort_unstable();
        out
    }

    fn high(&mut self, scope: &[usize]) -> Result<Vec<TreePiece>, DecompositionError> {
        let hub = scope
            .iter()
            .copied()
            .filter(|&c| self.graph.degree(c) >= 3)
            .min()
            .ok_or_else(|| {
                DecompositionError::PreconditionViolation(
                    "no chore of degree at least 3 in tree".into(),
                )
            })?;
        // Detaching the hub confines each spoke's traversal to its own subtree.
        self.in_scope[hub] = false;
        let spokes = self.graph.agents_of(hub).to_vec();
        let mut branches = Vec::new();
        let mut rest = Vec::new();
        for &a in &spokes {
            let below = self.below_agent(a, hub);
            if below.iter().any(|&c| self.graph.degree(c) >= 3) {
                rest.extend(self.high(&below)?);
                continue;
            }
            let children: Vec<usize> = self
                .graph
                .chores_of(a)
                .iter()
                .copied()
                .filter(|&c| c != hub && self.in_scope[c])
                .collect();
            let mut odd: Vec<(usize, Vec<usize>)> = Vec::new();
            for c in children {
                let subtree = self.below_chore(c, a);
                if subtree.len().is_multiple_of(2) {
                    rest.extend(self.two(&subtree)?);
                } else {
                    odd.push((c, subtree));
                }
            }
            let mut pairs = odd.chunks_exact(2);
            for pair in &mut pairs {
                let joined: Vec<usize> = pair[0].1.iter().chain(&pair[1].1).copied().collect();
                rest.extend(self.two(&joined)?);
            }
            if let [(star, _)] = pairs.remainder() {
                let leaf = self.other_agent(*star, a);
                let tail = self.below_agent(leaf, *star);
                rest.extend(self.two(&tail)?);
                branches.push(Branch {
                    spoke: a,
                    chore: *star,
                    leaf,
                });
            }
        }
        let mut pieces = vec![TreePiece::Type3 {
            hub,
            spokes,
            branches,
        }];
        pieces.extend(rest);
        Ok(pieces)
    }
}

fn check_min_degree(graph: &ConsumptionGraph, chores: &[usize]) -> Result<(), DecompositionError> {
    for &c in chores {
        let degree = graph.degree(c);
        if degree < 2 {
            return Err(DecompositionError::ChoreDegreeViolation {
                chore: c,
                degree,
                expected: "at least 2",
            });
        }
    }
    Ok(())
}

/// Splits a tree whose chores all have degree two into Type 1/2 pieces,
/// with a Type 1 piece exactly when the chore count is odd.
pub fn split_all_degree_two(
    graph: &ConsumptionGraph,
    chores: &[usize],
) -> Result<Vec<TreePiece>, DecompositionError> {
    Splitter::new(graph).two(chores)
}

/// Splits a tree containing a chore of degree at least three into Type 2/3 pieces.
pub fn split_with_high_degree(
    graph: &ConsumptionGraph,
    chores: &[usize],
) -> Result<Vec<TreePiece>, DecompositionError> {
    check_min_degree(graph, chores)?;
    let mut s = Splitter::new(graph);
    s.mark(chores, true);
    s.high(chores)
}

/// Pieces plus the number of elementary traversal steps spent.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub pieces: Vec<TreePiece>,
    pub steps: usize,
}

/// Decomposes every tree of a forest whose chores have degree at least two.
/// Chores without edges are ignored.
pub fn decompose(graph: &ConsumptionGraph) -> Result<Decomposition, DecompositionError> {
    let components = graph.components();
    if !components.iter().all(|c| c.is_tree()) {
        return Err(DecompositionError::NotAForest);
    }
    let mut s = Splitter::new(graph);
    let mut pieces = Vec::new();
    for comp in components {
        check_min_degree(graph, &comp.chores)?;
        if comp.chores.iter().any(|&c| graph.degree(c) >= 3) {
            s.mark(&comp.chores, true);
            pieces.extend(s.high(&comp.chores)?);
            s.mark(&comp.chores, false);
        } else {
            pieces.extend(s.two(&comp.chores)?);
        }
    }
    Ok(Decomposition {
        pieces,
        steps: s.steps,
    })
}
