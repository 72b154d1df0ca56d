//! Independent certification of the equilibrium profile.
//!
//! Everything here is recomputed from the game description and read-only
//! policy queries (the common-belief map and stage prescriptions). Solver
//! values and action values are never consulted, except for the separately
//! reported value-table gap.
//!
//! Deviations range over fully history-dependent strategies. At every public
//! history `h` the deviating player holds the equilibrium belief
//! `mu*(h) = pi*[h](. | x^i)`; after an action with zero equilibrium
//! probability `pi*` stays put (zero-denominator branch), so this is also the
//! off-path belief.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::belief::{condition_on_type, initial_belief, ConditionalBelief, DENOMINATOR_EPS};
use crate::error::SolveError;
use crate::forward::EquilibriumPolicy;
use crate::game_model::GameSpec;
use crate::par;

/// Default cap on `|A|^T`, the size of the public-history tree.
pub const DEFAULT_HISTORY_LIMIT: f64 = 1e6;

/// Required agreement of the two sides of the continuation identity.
pub const INDEPENDENCE_TOLERANCE: f64 = 1e-12;

fn check_limit(spec: &GameSpec, limit: f64) -> Result<(), SolveError> {
    let size = (spec.actions().len() as f64).powi(spec.horizon() as i32);
    if size > limit {
        Err(SolveError::EnumerationLimit {
            required: size,
            limit,
        })
    } else {
        Ok(())
    }
}

/// Values of one (public history, own type) node for a fixed player.
#[derive(Debug, Clone, Copy)]
struct NodeValues {
    /// Best value over all continuation strategies.
    best: f64,
    /// Value of following the equilibrium.
    equilibrium: f64,
    /// Best value when deviating at this stage only.
    one_shot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryGain {
    pub player: usize,
    pub own_type: usize,
    /// Flattened joint actions `a_1 .. a_{t-1}`.
    pub history: Vec<usize>,
    pub equilibrium_value: f64,
    pub best_deviation_value: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub tolerance: f64,
    pub entries: Vec<HistoryGain>,
    pub max_gain_per_player: Vec<f64>,
    pub max_gain: f64,
    pub min_gain: f64,
    pub worst: Option<HistoryGain>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneShotEntry {
    pub player: usize,
    pub own_type: usize,
    pub history: Vec<usize>,
    pub value: f64,
    pub best_one_shot: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneShotReport {
    pub tolerance: f64,
    pub entries: Vec<OneShotEntry>,
    pub max_violation: f64,
    pub worst: Option<OneShotEntry>,
    /// Largest `|V_t(pi*[h], x^i) - value|` against the generator's value table.
    pub value_table_gap: f64,
    pub passed: bool,
}

struct Tree<'p, 'g> {
    policy: &'p EquilibriumPolicy<'g>,
    player: usize,
    own_type: usize,
}

impl Tree<'_, '_> {
    fn spec(&self) -> &GameSpec {
        self.policy.spec()
    }

    /// Post-order walk over every public history; `visit` sees each node.
    fn walk(
        &self,
        history: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize], NodeValues, &ConditionalBelief),
    ) -> Result<NodeValues, SolveError> {
        let spec = self.spec();
        let (i, xi) = (self.player, self.own_type);
        let stage = history.len() + 1;
        let types = spec.types();
        let actions = spec.actions();
        let na = actions.len();
        let delta = spec.discount();

        let pi = self.policy.common_belief(history)?;
        let gamma = self.policy.stage_solution(history)?.prescription.clone();
        let mu = condition_on_type(spec, &pi, i, xi);

        let mut children = Vec::with_capacity(na);
        for a in 0..na {
            if stage < spec.horizon() {
                history.push(a);
                children.push(self.walk(history, visit)?);
                history.pop();
            } else {
                children.push(NodeValues {
                    best: 0.0,
                    equilibrium: 0.0,
                    one_shot: 0.0,
                });
            }
        }

        let own_actions = actions.size(i);
        let mut deviate = vec![0.0; own_actions];
        let mut follow = vec![0.0; own_actions];
        let rewards = spec.reward_tensor(stage, i);
        for (rest, &w) in mu.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let x = types.insert_component(rest, i, xi);
            for (a, child) in children.iter().enumerate() {
                let mut p = w;
                for j in (0..spec.num_players()).filter(|&j| j != i) {
                    p *= gamma.prob(j, types.component(x, j), actions.component(a, j));
                }
                if p == 0.0 {
                    continue;
                }
                let ai = actions.component(a, i);
                let r = rewards[x * na + a];
                deviate[ai] += p * (r + delta * child.best);
                follow[ai] += p * (r + delta * child.equilibrium);
            }
        }
        let row = gamma.row(i, xi);
        let node = NodeValues {
            best: deviate.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            equilibrium: row.iter().zip(&follow).map(|(p, v)| p * v).sum(),
            one_shot: follow.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        };
        visit(history, node, &mu);
        Ok(node)
    }
}

/// Players and types with positive prior mass.
fn agents(spec: &GameSpec) -> Vec<(usize, usize)> {
    let prior = initial_belief(spec);
    (0..spec.num_players())
        .flat_map(|i| {
            prior
                .marginal(spec.types(), i)
                .into_iter()
                .enumerate()
                .filter(|&(_, m)| m > 0.0)
                .map(move |(xi, _)| (i, xi))
        })
        .collect()
}

fn node_at(
    policy: &EquilibriumPolicy<'_>,
    player: usize,
    history: &[usize],
    xi: usize,
) -> Result<NodeValues, SolveError> {
    let spec = policy.spec();
    assert!(
        history.len() < spec.horizon(),
        "history must leave at least one stage"
    );
    let tree = Tree {
        policy,
        player,
        own_type: xi,
    };
    let mut h = history.to_vec();
    tree.walk(&mut h, &mut |_, _, _| {})
}

/// Best value player `player` of type `xi` can reach from `history` against the
/// equilibrium strategies of the others.
pub fn best_deviation_value(
    policy: &EquilibriumPolicy<'_>,
    player: usize,
    history: &[usize],
    xi: usize,
    limit: f64,
) -> Result<f64, SolveError> {
    check_limit(policy.spec(), limit)?;
    Ok(node_at(policy, player, history, xi)?.best)
}

/// Continuation value of following the equilibrium from `history`.
pub fn equilibrium_value(
    policy: &EquilibriumPolicy<'_>,
    player: usize,
    history: &[usize],
    xi: usize,
    limit: f64,
) -> Result<f64, SolveError> {
    check_limit(policy.spec(), limit)?;
    Ok(node_at(policy, player, history, xi)?.equilibrium)
}

struct AgentSweep {
    gains: Vec<HistoryGain>,
    one_shot: Vec<OneShotEntry>,
}

fn sweep(policy: &EquilibriumPolicy<'_>, limit: f64) -> Result<Vec<AgentSweep>, SolveError> {
    let spec = policy.spec();
    check_limit(spec, limit)?;
    let list = agents(spec);
    par::map(&list, |&(i, xi)| {
        let tree = Tree {
            policy,
            player: i,
            own_type: xi,
        };
        let mut gains = Vec::new();
        let mut one_shot = Vec::new();
        tree.walk(&mut Vec::new(), &mut |h, node, _| {
            gains.push(HistoryGain {
                player: i,
                own_type: xi,
                history: h.to_vec(),
                equilibrium_value: node.equilibrium,
                best_deviation_value: node.best,
                gain: node.best - node.equilibrium,
            });
            one_shot.push(OneShotEntry {
                player: i,
                own_type: xi,
                history: h.to_vec(),
                value: node.equilibrium,
                best_one_shot: node.one_shot,
                violation: (node.one_shot - node.equilibrium).max(0.0),
            });
        })?;
        Ok(AgentSweep { gains, one_shot })
    })
    .into_iter()
    .collect()
}

/// Checks that no player gains more than `tol` by deviating at any public
/// history, for every own type with positive prior mass.
pub fn verify_pbe(
    policy: &EquilibriumPolicy<'_>,
    tol: f64,
    limit: f64,
) -> Result<DeviationReport, SolveError> {
    let spec = policy.spec();
    let mut entries: Vec<HistoryGain> = sweep(policy, limit)?
        .into_iter()
        .flat_map(|s| s.gains)
        .collect();
    entries.sort_by(|a, b| {
        (a.player, a.own_type, &a.history).cmp(&(b.player, b.own_type, &b.history))
    });
    let mut max_gain_per_player = vec![f64::NEG_INFINITY; spec.num_players()];
    let mut worst: Option<&HistoryGain> = None;
    let mut min_gain = f64::INFINITY;
    for e in &entries {
        max_gain_per_player[e.player] = max_gain_per_player[e.player].max(e.gain);
        min_gain = min_gain.min(e.gain);
        if worst.is_none_or(|w| e.gain > w.gain) {
            worst = Some(e);
        }
    }
    let max_gain = worst.map_or(0.0, |w| w.gain);
    Ok(DeviationReport {
        tolerance: tol,
        max_gain_per_player,
        max_gain,
        min_gain,
        worst: worst.cloned(),
        passed: max_gain <= tol,
        entries,
    })
}

/// One-stage deviation check at every public history: the equilibrium
/// continuation value must dominate every single-stage pure deviation that
/// returns to equilibrium play afterwards.
pub fn verify_one_shot(
    policy: &EquilibriumPolicy<'_>,
    tol: f64,
    limit: f64,
) -> Result<OneShotReport, SolveError> {
    let mut entries: Vec<OneShotEntry> = sweep(policy, limit)?
        .into_iter()
        .flat_map(|s| s.one_shot)
        .collect();
    entries.sort_by(|a, b| {
        (a.player, a.own_type, &a.history).cmp(&(b.player, b.own_type, &b.history))
    });
    let mut value_table_gap = 0.0f64;
    for e in &entries {
        let pi = policy.common_belief(&e.history)?;
        let v = policy
            .generator()
            .value(e.history.len() + 1, &pi, e.player, e.own_type)?;
        value_table_gap = value_table_gap.max((v - e.value).abs());
    }
    let worst = entries
        .iter()
        .fold(None::<&OneShotEntry>, |w, e| match w {
            Some(w) if w.violation >= e.violation => Some(w),
            _ => Some(e),
        })
        .cloned();
    let max_violation = worst.as_ref().map_or(0.0, |w| w.violation);
    Ok(OneShotReport {
        tolerance: tol,
        max_violation,
        passed: max_violation <= tol,
        worst,
        value_table_gap,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub player: usize,
    pub stage: usize,
    pub samples: usize,
    /// (sample, history, type, action) cases compared.
    pub checked: usize,
    /// Cases where one side's conditional expectation is undefined, or where
    /// the profile has zero probability under the equilibrium.
    pub skipped: usize,
    pub max_difference: f64,
    pub passed: bool,
}

/// Random history-dependent strategy of one player: rows keyed by (public
/// history, own type).
struct RandomStrategy {
    rows: HashMap<(Vec<usize>, usize), Vec<f64>>,
}

impl RandomStrategy {
    fn generate(
        spec: &GameSpec,
        player: usize,
        from_stage: usize,
        pure: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let na = spec.actions().size(player);
        let mut rows = HashMap::new();
        let mut histories: Vec<Vec<usize>> = vec![vec![]];
        for len in 0..spec.horizon() {
            if len + 1 >= from_stage {
                for h in &histories {
                    for xi in 0..spec.types().size(player) {
                        let row = if pure {
                            let mut r = vec![0.0; na];
                            r[rng.gen_range(0..na)] = 1.0;
                            r
                        } else {
                            let draws: Vec<f64> = (0..na).map(|_| Exp1.sample(rng)).collect();
                            let total: f64 = draws.iter().sum();
                            draws.into_iter().map(|d| d / total).collect()
                        };
                        rows.insert((h.clone(), xi), row);
                    }
                }
            }
            histories = histories
                .iter()
                .flat_map(|h| {
                    (0..spec.actions().len()).map(move |a| {
                        let mut n = h.clone();
                        n.push(a);
                        n
                    })
                })
                .collect();
        }
        RandomStrategy { rows }
    }

    fn row(&self, history: &[usize], xi: usize) -> &[f64] {
        &self.rows[&(history.to_vec(), xi)]
    }
}

/// Expected discounted reward from `history` onward, given unnormalized joint
/// weights over the other players' types, when `player` follows `strategy`
/// and the others follow the equilibrium.
fn continuation_sum(
    policy: &EquilibriumPolicy<'_>,
    player: usize,
    xi: usize,
    strategy: &RandomStrategy,
    history: &mut Vec<usize>,
    weights: &[f64],
) -> Result<f64, SolveError> {
    let spec = policy.spec();
    if history.len() == spec.horizon() {
        return Ok(0.0);
    }
    let stage = history.len() + 1;
    let types = spec.types();
    let actions = spec.actions();
    let na = actions.len();
    let gamma = policy.stage_solution(history)?.prescription.clone();
    let own = strategy.row(history, xi).to_vec();
    let rewards = spec.reward_tensor(stage, player);
    let mut total = 0.0;
    for a in 0..na {
        let mut next = vec![0.0; weights.len()];
        let mut immediate = 0.0;
        for (rest, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let x = types.insert_component(rest, player, xi);
            let mut p = w * own[actions.component(a, player)];
            for j in (0..spec.num_players()).filter(|&j| j != player) {
                p *= gamma.prob(j, types.component(x, j), actions.component(a, j));
            }
            next[rest] = p;
            immediate += p * rewards[x * na + a];
        }
        total += immediate;
        if next.iter().any(|&p| p > 0.0) {
            history.push(a);
            total +=
                spec.discount() * continuation_sum(policy, player, xi, strategy, history, &next)?;
            history.pop();
        }
    }
    Ok(total)
}

/// Compares, for sampled strategies of `player`, the expected reward after
/// stage `stage` computed two ways: conditioning the stage-`stage` belief on
/// the observed actions under the sampled strategy, and conditioning the
/// updated common belief `pi*_{stage+1}` on the player's type.
pub fn check_strategy_independence(
    policy: &EquilibriumPolicy<'_>,
    player: usize,
    stage: usize,
    samples: usize,
    seed: u64,
    limit: f64,
) -> Result<IndependenceReport, SolveError> {
    let spec = policy.spec();
    check_limit(spec, limit)?;
    assert!(stage >= 1 && stage <= spec.horizon(), "stage out of range");
    let types = spec.types();
    let actions = spec.actions();

    let mut histories: Vec<Vec<usize>> = vec![vec![]];
    for _ in 1..stage {
        histories = histories
            .iter()
            .flat_map(|h| {
                (0..actions.len()).map(move |a| {
                    let mut n = h.clone();
                    n.push(a);
                    n
                })
            })
            .collect();
    }
    let own_types: Vec<usize> = agents(spec)
        .into_iter()
        .filter(|&(i, _)| i == player)
        .map(|(_, xi)| xi)
        .collect();

    let mut checked = 0;
    let mut skipped = 0;
    let mut max_difference = 0.0f64;
    for s in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        // every fifth sample is deterministic
        let strategy = RandomStrategy::generate(spec, player, stage, s % 5 == 4, &mut rng);
        for h in &histories {
            let pi = policy.common_belief(h)?;
            let gamma = policy.stage_solution(h)?.prescription.clone();
            for &xi in &own_types {
                let mu = condition_on_type(spec, &pi, player, xi);
                let own = strategy.row(h, xi);
                for a in 0..actions.len() {
                    // path 1: Bayes from mu*_t under (beta^i_t, beta*^-i_t)
                    let mut joint: Vec<f64> = mu
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(rest, &w)| {
                            let x = types.insert_component(rest, player, xi);
                            let mut p = w * own[actions.component(a, player)];
                            for j in (0..spec.num_players()).filter(|&j| j != player) {
                                p *= gamma.prob(j, types.component(x, j), actions.component(a, j));
                            }
                            p
                        })
                        .collect();
                    let mass: f64 = joint.iter().sum();
                    let mut next_h = h.clone();
                    next_h.push(a);
                    let updated =
                        condition_on_type(spec, &policy.common_belief(&next_h)?, player, xi);
                    // a zero-probability profile leaves pi* unchanged instead of updating it
                    let common: f64 = (0..types.len())
                        .map(|x| pi.weights()[x] * gamma.likelihood(types, actions, x, a))
                        .sum();
                    if mass <= DENOMINATOR_EPS || common <= DENOMINATOR_EPS || updated.degenerate {
                        skipped += 1;
                        continue;
                    }
                    joint.iter_mut().for_each(|p| *p /= mass);
                    let lhs = continuation_sum(
                        policy,
                        player,
                        xi,
                        &strategy,
                        &mut next_h.clone(),
                        &joint,
                    )?;
                    // path 2: pi*_{t+1} conditioned on x^i
                    let rhs = continuation_sum(
                        policy,
                        player,
                        xi,
                        &strategy,
                        &mut next_h,
                        &updated.weights,
                    )?;
                    max_difference = max_difference.max((lhs - rhs).abs());
                    checked += 1;
                }
            }
        }
    }
    Ok(IndependenceReport {
        player,
        stage,
        samples,
        checked,
        skipped,
        max_difference,
        passed: max_difference <= INDEPENDENCE_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneShotSummary {
    pub tolerance: f64,
    pub max_violation: f64,
    pub value_table_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// SHA-256 of the canonical game document.
    pub instance_digest: String,
    pub tolerance: f64,
    pub off_path_rule: String,
    pub max_gain_per_player: Vec<f64>,
    pub max_gain: f64,
    pub worst_history: Option<HistoryGain>,
    pub worst_history_labels: Option<Vec<Vec<String>>>,
    pub one_shot: OneShotSummary,
    pub strategy_independence: Vec<IndependenceReport>,
    pub passed: bool,
}

pub fn instance_digest(spec: &GameSpec) -> String {
    let digest = Sha256::digest(spec.to_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Action labels of each joint action in `history`.
pub fn history_labels(spec: &GameSpec, history: &[usize]) -> Vec<Vec<String>> {
    history
        .iter()
        .map(|&a| {
            (0..spec.num_players())
                .map(|i| spec.action_labels()[i][spec.actions().component(a, i)].clone())
                .collect()
        })
        .collect()
}

pub fn certificate(
    spec: &GameSpec,
    pbe: &DeviationReport,
    one_shot: &OneShotReport,
    independence: Vec<IndependenceReport>,
) -> Certificate {
    let passed = pbe.passed && one_shot.passed && independence.iter().all(|r| r.passed);
    Certificate {
        instance_digest: instance_digest(spec),
        tolerance: pbe.tolerance,
        off_path_rule: "common belief unchanged after a joint action of zero probability (Bayes denominator <= 1e-12); \
                        zero own-type marginal conditions to the uniform distribution"
            .into(),
        max_gain_per_player: pbe.max_gain_per_player.clone(),
        max_gain: pbe.max_gain,
        worst_history_labels: pbe.worst.as_ref().map(|w| history_labels(spec, &w.history)),
        worst_history: pbe.worst.clone(),
        one_shot: OneShotSummary {
            tolerance: one_shot.tolerance,
            max_violation: one_shot.max_violation,
            value_table_gap: one_shot.value_table_gap,
            passed: one_shot.passed,
        },
        strategy_independence: independence,
        passed,
    }
}
