//! Test corpus and brute-force oracles shared by the integration tests.
//!
//! The oracles below deliberately avoid the library's belief and value code:
//! they loop over explicit type and action tuples.

#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spbe_core::game_model::{numeric_labels, RewardSchedule};
use spbe_core::GameSpec;

/// Two players, two types, two actions, two stages. Each player earns 1 for
/// matching its own type and 0.5 when both actions agree. Types are
/// positively correlated.
pub fn reference() -> Arc<GameSpec> {
    let mut r = vec![vec![0.0; 16]; 2];
    for x in 0..4 {
        let (x0, x1) = (x / 2, x % 2);
        for a in 0..4 {
            let (a0, a1) = (a / 2, a % 2);
            let bonus = if a0 == a1 { 0.5 } else { 0.0 };
            r[0][x * 4 + a] = f64::from(u8::from(a0 == x0)) + bonus;
            r[1][x * 4 + a] = f64::from(u8::from(a1 == x1)) + bonus;
        }
    }
    let labels = vec![numeric_labels(2), numeric_labels(2)];
    Arc::new(
        GameSpec::new(
            2,
            labels.clone(),
            labels,
            vec![0.4, 0.1, 0.1, 0.4],
            RewardSchedule::Stationary(r),
            1.0,
        )
        .unwrap(),
    )
}

fn random_prior(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    if sparse && n > 2 {
        let k = rng.gen_range(0..n);
        w[k] = 0.0;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// Random game with rewards on the half-integer grid in `[-2, 2]`, sizes given
/// per player.
pub fn random_game(
    seed: u64,
    types: &[usize],
    actions: &[usize],
    horizon: usize,
    stationary: bool,
) -> Arc<GameSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx: usize = types.iter().product();
    let na: usize = actions.iter().product();
    let block = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..types.len())
            .map(|_| {
                (0..nx * na)
                    .map(|_| f64::from(rng.gen_range(-4i32..=4)) / 2.0)
                    .collect()
            })
            .collect()
    };
    let rewards = if stationary {
        RewardSchedule::Stationary(block(&mut rng))
    } else {
        RewardSchedule::PerStage((0..horizon).map(|_| block(&mut rng)).collect())
    };
    let prior = random_prior(&mut rng, nx, seed.is_multiple_of(3));
    let discount = if seed.is_multiple_of(2) { 1.0 } else { 0.9 };
    Arc::new(
        GameSpec::new(
            horizon,
            types.iter().map(|&n| numeric_labels(n)).collect(),
            actions.iter().map(|&n| numeric_labels(n)).collect(),
            prior,
            rewards,
            discount,
        )
        .unwrap(),
    )
}

/// The exact-mode corpus: small games that the default solver handles.
pub fn corpus() -> Vec<(String, Arc<GameSpec>)> {
    let mut out = vec![("reference".to_string(), reference())];
    for seed in 0..6 {
        out.push((
            format!("2x2x2-T2-s{seed}"),
            random_game(seed, &[2, 2], &[2, 2], 2, seed % 2 == 0),
        ));
    }
    for seed in 11..14 {
        out.push((
            format!("2x2x2-T3-s{seed}"),
            random_game(seed, &[2, 2], &[2, 2], 3, true),
        ));
    }
    out.push((
        "3types-T2".into(),
        random_game(20, &[3, 2], &[2, 2], 2, true),
    ));
    out.push((
        "3actions-T2".into(),
        random_game(21, &[2, 2], &[3, 2], 2, false),
    ));
    for seed in 30..33 {
        out.push((
            format!("single-T2-s{seed}"),
            random_game(seed, &[2], &[2], 2, seed % 2 == 0),
        ));
    }
    out
}

/// Bayes update over explicit tuples, leaving the belief unchanged when the
/// observed profile has zero probability.
pub fn oracle_update(spec: &GameSpec, pi: &[f64], rows: &[Vec<Vec<f64>>], a: usize) -> Vec<f64> {
    let types = spec.types();
    let actions = spec.actions();
    let mut post: Vec<f64> = (0..types.len())
        .map(|x| {
            let xs = types.unflatten(x);
            let acts = actions.unflatten(a);
            pi[x]
                * (0..spec.num_players())
                    .map(|i| rows[i][xs[i]][acts[i]])
                    .product::<f64>()
        })
        .collect();
    let z: f64 = post.iter().sum();
    if z <= 1e-12 {
        return pi.to_vec();
    }
    post.iter_mut().for_each(|p| *p /= z);
    post
}

/// Agent-form action values `q[i][xi][ai]` recomputed tuple by tuple.
/// `cont(next_belief, i, xi)` supplies the continuation value.
pub fn oracle_action_values(
    spec: &GameSpec,
    stage: usize,
    pi: &[f64],
    rows: &[Vec<Vec<f64>>],
    cont: &dyn Fn(&[f64], usize, usize) -> f64,
) -> Vec<Vec<Vec<f64>>> {
    let types = spec.types();
    let actions = spec.actions();
    let n = spec.num_players();
    let next: Vec<Vec<f64>> = (0..actions.len())
        .map(|a| oracle_update(spec, pi, rows, a))
        .collect();
    (0..n)
        .map(|i| {
            (0..types.size(i))
                .map(|xi| {
                    let own: Vec<usize> = (0..types.len())
                        .filter(|&x| types.unflatten(x)[i] == xi)
                        .collect();
                    let mass: f64 = own.iter().map(|&x| pi[x]).sum();
                    let weight = |x: usize| {
                        if mass <= 1e-12 {
                            1.0 / own.len() as f64
                        } else {
                            pi[x] / mass
                        }
                    };
                    (0..actions.size(i))
                        .map(|ai| {
                            let mut q = 0.0;
                            for &x in &own {
                                let xs = types.unflatten(x);
                                for a in 0..actions.len() {
                                    let acts = actions.unflatten(a);
                                    if acts[i] != ai {
                                        continue;
                                    }
                                    let mut p = weight(x);
                                    for j in (0..n).filter(|&j| j != i) {
                                        p *= rows[j][xs[j]][acts[j]];
                                    }
                                    if p == 0.0 {
                                        continue;
                                    }
                                    let r = spec.reward(stage, i, x, a);
                                    q += p * (r + spec.discount() * cont(&next[a], i, xi));
                                }
                            }
                            q
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn oracle_residual(rows: &[Vec<Vec<f64>>], q: &[Vec<Vec<f64>>]) -> f64 {
    let mut worst = 0.0f64;
    for (ri, qi) in rows.iter().zip(q) {
        for (row, qx) in ri.iter().zip(qi) {
            let best = qx.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let played: f64 = row.iter().zip(qx).map(|(p, v)| p * v).sum();
            worst = worst.max(best - played);
        }
    }
    worst
}

/// `sum_a gamma(a|x^i) q(a)` for every agent.
pub fn oracle_values(rows: &[Vec<Vec<f64>>], q: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    rows.iter()
        .zip(q)
        .map(|(ri, qi)| {
            ri.iter()
                .zip(qi)
                .map(|(row, qx)| row.iter().zip(qx).map(|(p, v)| p * v).sum())
                .collect()
        })
        .collect()
}

/// Best expected discounted total over every deterministic history-dependent
/// policy of a single-player game, by explicit enumeration of policies.
///
/// A policy assigns an action to each (own type, own action history) with
/// history length below the horizon; the number of such policies is
/// `|A|^(|X| * (|A|^T - 1) / (|A| - 1))`.
pub fn single_player_optimum(spec: &GameSpec) -> Vec<f64> {
    assert_eq!(spec.num_players(), 1);
    let nx = spec.types().len();
    let na = spec.actions().len();
    let horizon = spec.horizon();
    // node ids for histories: breadth-first, length 0..T-1
    let mut histories: Vec<Vec<usize>> = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 1..horizon {
        let mut next = Vec::new();
        for h in &frontier {
            for a in 0..na {
                let mut g: Vec<usize> = h.clone();
                g.push(a);
                next.push(g);
            }
        }
        histories.extend(next.iter().cloned());
        frontier = next;
    }
    let nodes = histories.len();
    let index = |h: &[usize]| histories.iter().position(|g| g == h).unwrap();
    // policies are independent across types, so maximize per type
    (0..nx)
        .map(|x| {
            let count = na.pow(nodes as u32);
            let mut best = f64::NEG_INFINITY;
            for code in 0..count {
                let choice: Vec<usize> =
                    (0..nodes).map(|k| (code / na.pow(k as u32)) % na).collect();
                let mut h = Vec::new();
                let mut total = 0.0;
                let mut factor = 1.0;
                for t in 1..=horizon {
                    let a = choice[index(&h)];
                    total += factor * spec.reward(t, 0, x, a);
                    factor *= spec.discount();
                    h.push(a);
                }
                best = best.max(total);
            }
            best
        })
        .collect()
}

/// L1-nearest lattice point, ties to the lowest index.
pub fn oracle_nearest(points: &[Vec<f64>], belief: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, p) in points.iter().enumerate() {
        let d: f64 = p.iter().zip(belief).map(|(a, b)| (a - b).abs()).sum();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}
