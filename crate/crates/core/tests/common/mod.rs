#![allow(dead_code)]

use prop_subsidy::decomposition::{Branch, TreePiece};
use prop_subsidy::equilibrium::FractionalAllocation;
use prop_subsidy::generate::{generate, Family};
use prop_subsidy::instance::{parse_instance, Instance};
use prop_subsidy::rational::{int, ratio, Rational};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORKED: &str = r#"{ "weights": ["2/15","8/15","1/3"],
    "disutilities": [["1/2","1","1/2"],["1","1","1"],["1","2/3","1/3"]] }"#;

pub fn worked_instance() -> Instance {
    parse_instance(WORKED).unwrap()
}

/// The worked example's fractional allocation.
pub fn worked_x() -> FractionalAllocation {
    FractionalAllocation::new(vec![
        vec![ratio(1, 3), int(0), int(0)],
        vec![ratio(2, 3), ratio(2, 3), int(0)],
        vec![int(0), ratio(1, 3), int(1)],
    ])
    .unwrap()
}

pub fn worked_payments() -> Vec<Rational> {
    vec![int(1), int(1), ratio(1, 2)]
}

pub fn worked_dual_h() -> Vec<Rational> {
    vec![int(1), int(0), ratio(1, 2)]
}

/// `count` uniform-rational instances sweeping `n ∈ [n_lo, n_hi]`, `m ∈ [m_lo, m_hi]`.
pub fn sweep(
    count: usize,
    (n_lo, n_hi): (usize, usize),
    (m_lo, m_hi): (usize, usize),
    seed: u64,
) -> Vec<Instance> {
    let ns = n_hi - n_lo + 1;
    let ms = m_hi - m_lo + 1;
    (0..count)
        .map(|k| {
            let n = n_lo + k % ns;
            let m = m_lo + (k / ns) % ms;
            generate(Family::UniformRational, n, m, seed.wrapping_add(k as u64)).unwrap()
        })
        .collect()
}

/// Random positive split of 1 into `parts` rationals with denominators up to 60.
pub fn random_split(rng: &mut ChaCha8Rng, parts: usize) -> Vec<Rational> {
    let raw: Vec<i64> = (0..parts).map(|_| rng.random_range(1..=12)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|r| ratio(r, total)).collect()
}

/// Random `d̂` value in `(0, 1]`.
pub fn random_dhat(rng: &mut ChaCha8Rng) -> Rational {
    if rng.random_bool(0.3) {
        int(1)
    } else {
        ratio(rng.random_range(1..=20), 20)
    }
}

/// A random piece with consistent shares and `d̂`.
pub struct PieceCase {
    pub piece: TreePiece,
    pub x: FractionalAllocation,
    pub dhat: Vec<Rational>,
}

fn shares_matrix(n: usize, m: usize, cells: &[(usize, usize, Rational)]) -> FractionalAllocation {
    let mut rows = vec![vec![int(0); m]; n];
    for (a, c, v) in cells {
        rows[*a][*c] = v.clone();
    }
    FractionalAllocation::new(rows).unwrap()
}

/// Random piece of the given kind; Type 3 uses `k ≥ 3`, `h ≤ k`, `k + h ≤ max_size`.
/// Agent and chore labels are shuffled so the solver cannot rely on ordering.
pub fn random_piece(rng: &mut ChaCha8Rng, kind: u8, max_size: usize) -> PieceCase {
    match kind {
        1 => {
            let mut agents = [0usize, 1];
            agents.shuffle(rng);
            let s = random_split(rng, 2);
            let x = shares_matrix(
                2,
                1,
                &[(agents[0], 0, s[0].clone()), (agents[1], 0, s[1].clone())],
            );
            PieceCase {
                piece: TreePiece::Type1 { chore: 0, agents },
                x,
                dhat: vec![random_dhat(rng)],
            }
        }
        2 => {
            let mut agents = [0usize, 1, 2];
            agents.shuffle(rng);
            let mut chores = [0usize, 1];
            chores.shuffle(rng);
            let a = random_split(rng, 2);
            let b = random_split(rng, 2);
            let x = shares_matrix(
                3,
                2,
                &[
                    (agents[0], chores[0], a[0].clone()),
                    (agents[1], chores[0], a[1].clone()),
                    (agents[1], chores[1], b[0].clone()),
                    (agents[2], chores[1], b[1].clone()),
                ],
            );
            PieceCase {
                piece: TreePiece::Type2 { chores, agents },
                x,
                dhat: vec![random_dhat(rng), random_dhat(rng)],
            }
        }
        _ => {
            let k = rng.random_range(3..=max_size.max(3));
            let h = rng.random_range(0..=k.min(max_size - k));
            let n = k + h;
            let m = 1 + h;
            let mut agent_ids: Vec<usize> = (0..n).collect();
            agent_ids.shuffle(rng);
            let mut chore_ids: Vec<usize> = (0..m).collect();
            chore_ids.shuffle(rng);
            let hub = chore_ids[0];
            let spokes: Vec<usize> = agent_ids[..k].to_vec();
            let mut cells = Vec::new();
            for (a, y) in spokes.iter().zip(random_split(rng, k)) {
                cells.push((*a, hub, y));
            }
            let mut spoke_order: Vec<usize> = spokes.clone();
            spoke_order.shuffle(rng);
            let branches: Vec<Branch> = (0..h)
                .map(|j| {
                    let z = random_split(rng, 2);
                    let b = Branch {
                        spoke: spoke_order[j],
                        chore: chore_ids[1 + j],
                        leaf: agent_ids[k + j],
                    };
                    cells.push((b.spoke, b.chore, z[0].clone()));
                    cells.push((b.leaf, b.chore, z[1].clone()));
                    b
                })
                .collect();
            PieceCase {
                piece: TreePiece::Type3 {
                    hub,
                    spokes,
                    branches,
                },
                x: shares_matrix(n, m, &cells),
                dhat: (0..m).map(|_| random_dhat(rng)).collect(),
            }
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
