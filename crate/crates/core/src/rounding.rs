//! Rounding of decomposition pieces under a common disutility `d̂`.
//!
//! Each piece is rounded on its own: a Type 1 chore goes to the larger
//! shareholder, Type 2 and Type 3 pieces are rounded by exact minimization
//! over their consumption-respecting assignments. The minimum is at most
//! `d̂(c)/2`, `2/3`, and `(k+h−1)/3` respectively. Ties go to the
//! lexicographically smallest owner vector, ordered by chore index.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::TreePiece;
use crate::equilibrium::FractionalAllocation;
use crate::instance::IntegralAllocation;
use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RoundingError {
    #[error("expected a {expected} piece, got {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("chore {chore} is neither pre-assigned nor covered by a piece")]
    Uncovered { chore: usize },
    #[error("chore {chore} is covered twice")]
    Overlap { chore: usize },
    #[error("piece assigns chore {chore} to agent {agent} without a positive share")]
    OffEdge { chore: usize, agent: usize },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Owners chosen for one piece and the resulting piece cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceRounding {
    pub piece: TreePiece,
    /// `(chore, agent)` pairs in ascending chore order.
    pub owners: Vec<(usize, usize)>,
    #[serde(with = "rational::serde_scalar")]
    pub cost: Rational,
}

/// Rounding cost of `owners` restricted to the chores and agents of a piece.
pub fn piece_cost(
    x: &FractionalAllocation,
    dhat: &[Rational],
    chores: &[usize],
    agents: &[usize],
    owners: &[(usize, usize)],
) -> Rational {
    agents.iter().fold(Rational::zero(), |acc, &a| {
        let held = owners
            .iter()
            .filter(|(_, o)| *o == a)
            .fold(Rational::zero(), |s, (c, _)| s + &dhat[*c]);
        let fractional = chores
            .iter()
            .fold(Rational::zero(), |s, &c| s + x.share(a, c) * &dhat[c]);
        acc + rational::positive_part(held - fractional)
    })
}

fn sorted(mut owners: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    owners.sort_unstable();
    owners
}

/// Picks the cheapest candidate; ties by owner vector.
fn best_of(
    piece: &TreePiece,
    x: &FractionalAllocation,
    dhat: &[Rational],
    candidates: impl IntoIterator<Item = Vec<(usize, usize)>>,
) -> PieceRounding {
    let chores = piece.chores();
    let agents = piece.agents();
    let (owners, cost) = candidates
        .into_iter()
        .map(|o| {
            let o = sorted(o);
            let cost = piece_cost(x, dhat, &chores, &agents, &o);
            (o, cost)
        })
        .min_by(|(oa, ca), (ob, cb)| ca.cmp(cb).then_with(|| oa.cmp(ob)))
        .expect("at least one candidate");
    PieceRounding {
        piece: piece.clone(),
        owners,
        cost,
    }
}

pub fn round_type1(
    piece: &TreePiece,
    x: &FractionalAllocation,
    dhat: &[Rational],
) -> Result<PieceRounding, RoundingError> {
    let TreePiece::Type1 { chore, agents } = piece else {
        return Err(RoundingError::WrongKind {
            expected: "Type1",
            found: piece.kind_name(),
        });
    };
    let (lo, hi) = (agents[0].min(agents[1]), agents[0].max(agents[1]));
    let owner = if x.share(hi, *chore) > x.share(lo, *chore) {
        hi
    } else {
        lo
    };
    let owners = vec![(*chore, owner)];
    let cost = piece_cost(x, dhat, &[*chore], &[lo, hi], &owners);
    Ok(PieceRounding {
        piece: piece.clone(),
        owners,
        cost,
    })
}

pub fn round_type2(
    piece: &TreePiece,
    x: &FractionalAllocation,
    dhat: &[Rational],
) -> Result<PieceRounding, RoundingError> {
    let TreePiece::Type2 { chores, agents } = piece else {
        return Err(RoundingError::WrongKind {
            expected: "Type2",
            found: piece.kind_name(),
        });
    };
    let [c1, c2] = *chores;
    let [i1, i2, i3] = *agents;
    let candidates = [i1, i2]
        .into_iter()
        .flat_map(|a| [i2, i3].into_iter().map(move |b| vec![(c1, a), (c2, b)]));
    Ok(best_of(piece, x, dhat, candidates))
}

pub fn round_type3(
    piece: &TreePiece,
    x: &FractionalAllocation,
    dhat: &[Rational],
) -> Result<PieceRounding, RoundingError> {
    let TreePiece::Type3 {
        hub,
        spokes,
        branches,
    } = piece
    else {
        return Err(RoundingError::WrongKind {
            expected: "Type3",
            found: piece.kind_name(),
        });
    };
    let d_hub = &dhat[*hub];
    let mut best: Option<(Rational, Vec<(usize, usize)>)> = None;
    for &receiver in spokes {
        if !x.share(receiver, *hub).is_positive() {
            continue;
        }
        let mut owners = vec![(*hub, receiver)];
        let mut total = Rational::zero();
        let mut branched = Vec::with_capacity(branches.len());
        for b in branches {
            branched.push(b.spoke);
            let y = x.share(b.spoke, *hub);
            let z = x.share(b.spoke, b.chore);
            let d = &dhat[b.chore];
            let gets_hub = b.spoke == receiver;
            // Cost of agents (spoke, leaf) when the pendant chore goes to `to_spoke`.
            let contribution = |to_spoke: bool| {
                let mut spoke_excess = -(y * d_hub) - z * d;
                if gets_hub {
                    spoke_excess += d_hub;
                }
                let mut leaf_excess = -((Rational::one() - z) * d);
                if to_spoke {
                    spoke_excess += d;
                } else {
                    leaf_excess += d;
                }
                rational::positive_part(spoke_excess) + rational::positive_part(leaf_excess)
            };
            let (keep, give) = (contribution(true), contribution(false));
            let spoke_first = b.spoke < b.leaf;
            let to_spoke = keep < give || (keep == give && spoke_first);
            if to_spoke {
                total += keep;
                owners.push((b.chore, b.spoke));
            } else {
                total += give;
                owners.push((b.chore, b.leaf));
            }
        }
        if !branched.contains(&receiver) {
            total += (Rational::one() - x.share(receiver, *hub)) * d_hub;
        }
        let owners = sorted(owners);
        let better = match &best {
            None => true,
            Some((c, o)) => total < *c || (total == *c && owners < *o),
        };
        if better {
            best = Some((total, owners));
        }
    }
    let (_, owners) = best.expect("hub has at least one positive share");
    let cost = piece_cost(x, dhat, &piece.chores(), &piece.agents(), &owners);
    Ok(PieceRounding {
        piece: piece.clone(),
        owners,
        cost,
    })
}

pub fn round_piece(
    piece: &TreePiece,
    x: &FractionalAllocation,
    dhat: &[Rational],
) -> Result<PieceRounding, RoundingError> {
    match piece {
        TreePiece::Type1 { .. } => round_type1(piece, x, dhat),
        TreePiece::Type2 { .. } => round_type2(piece, x, dhat),
        TreePiece::Type3 { .. } => round_type3(piece, x, dhat),
    }
}

/// Cost bound guaranteed for a piece: `d̂(c)/2`, `2/3`, or `(k+h−1)/3`.
pub fn piece_bound(piece: &TreePiece, dhat: &[Rational]) -> Rational {
    match piece {
        TreePiece::Type1 { chore, .. } => &dhat[*chore] / Rational::from_integer(2.into()),
        TreePiece::Type2 { .. } => rational::ratio(2, 3),
        TreePiece::Type3 {
            spokes, branches, ..
        } => rational::ratio((spokes.len() + branches.len()) as i64 - 1, 3),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestRounding {
    pub allocation: IntegralAllocation,
    pub pieces: Vec<PieceRounding>,
    pub total_cost: Rational,
}

/// Rounds every piece and merges the owners with the pre-assigned chores.
/// `jobs > 1` rounds pieces on a thread pool; the merge order is fixed.
pub fn round_forest(
    pieces: &[TreePiece],
    x: &FractionalAllocation,
    dhat: &[Rational],
    preassigned: &IntegralAllocation,
    jobs: usize,
) -> Result<ForestRounding, RoundingError> {
    let rounded: Vec<PieceRounding> = if jobs > 1 && pieces.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| RoundingError::Pool(e.to_string()))?;
        pool.install(|| {
            pieces
                .par_iter()
                .map(|p| round_piece(p, x, dhat))
                .collect::<Result<_, _>>()
        })?
    } else {
        pieces
            .iter()
            .map(|p| round_piece(p, x, dhat))
            .collect::<Result<_, _>>()?
    };

    let mut allocation = preassigned.clone();
    let mut total_cost = Rational::zero();
    for pr in &rounded {
        for &(c, a) in &pr.owners {
            if allocation.owner_of(c).is_some() {
                return Err(RoundingError::Overlap { chore: c });
            }
            if !x.share(a, c).is_positive() {
                return Err(RoundingError::OffEdge { chore: c, agent: a });
            }
            allocation.assign(c, a);
        }
        total_cost += &pr.cost;
    }
    if let Some(c) = (0..allocation.chore_count()).find(|&c| allocation.owner_of(c).is_none()) {
        return Err(RoundingError::Uncovered { chore: c });
    }
    Ok(ForestRounding {
        allocation,
        pieces: rounded,
        total_cost,
    })
}
