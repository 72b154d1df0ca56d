//! Common beliefs over joint types, prescriptions, and the Bayes update.

use serde::{Deserialize, Serialize};

use crate::game_model::{GameSpec, JointSpace};

/// Bayes denominators at or below this value take the "belief unchanged" branch.
pub const DENOMINATOR_EPS: f64 = 1e-12;

/// Default number of decimal digits kept by [`BeliefKey`].
pub const DEFAULT_KEY_DIGITS: u32 = 9;

/// Probability vector over the joint type space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Wraps `weights` after renormalizing. Returns `None` for negative,
    /// non-finite or all-zero input.
    pub fn new(weights: Vec<f64>) -> Option<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return None;
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(Belief(weights.into_iter().map(|w| w / total).collect()))
    }

    pub(crate) fn from_normalized(weights: Vec<f64>) -> Self {
        Belief(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| w * w.ln())
            .sum::<f64>()
    }

    /// Marginal distribution of `player`'s type.
    pub fn marginal(&self, types: &JointSpace, player: usize) -> Vec<f64> {
        let mut out = vec![0.0; types.size(player)];
        for (x, &w) in self.0.iter().enumerate() {
            out[types.component(x, player)] += w;
        }
        out
    }

    pub fn key(&self, digits: u32) -> BeliefKey {
        BeliefKey::new(self, digits)
    }
}

/// Quantized belief used as a memo key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeliefKey(Vec<i64>);

impl BeliefKey {
    pub fn new(belief: &Belief, digits: u32) -> Self {
        let scale = 10f64.powi(digits as i32);
        BeliefKey(
            belief
                .0
                .iter()
                .map(|w| (w * scale).round() as i64)
                .collect(),
        )
    }
}

/// Per-player row-stochastic maps from private type to action distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Prescription {
    /// `rows[i][x_i][a_i]`
    rows: Vec<Vec<Vec<f64>>>,
}

impl Prescription {
    pub fn from_rows(rows: Vec<Vec<Vec<f64>>>) -> Self {
        Prescription { rows }
    }

    pub fn uniform(spec: &GameSpec) -> Self {
        let rows = (0..spec.num_players())
            .map(|i| {
                let na = spec.actions().size(i);
                vec![vec![1.0 / na as f64; na]; spec.types().size(i)]
            })
            .collect();
        Prescription { rows }
    }

    /// Every type of every player plays `actions[i]` with certainty.
    pub fn pure_pooling(spec: &GameSpec, actions: &[usize]) -> Self {
        let mut p = Self::uniform(spec);
        for (i, &a) in actions.iter().enumerate() {
            for row in &mut p.rows[i] {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[a] = 1.0;
            }
        }
        p
    }

    #[inline]
    pub fn prob(&self, player: usize, xi: usize, ai: usize) -> f64 {
        self.rows[player][xi][ai]
    }

    pub fn row(&self, player: usize, xi: usize) -> &[f64] {
        &self.rows[player][xi]
    }

    pub fn row_mut(&mut self, player: usize, xi: usize) -> &mut [f64] {
        &mut self.rows[player][xi]
    }

    pub fn rows(&self) -> &[Vec<Vec<f64>>] {
        &self.rows
    }

    /// True when every row is nonnegative and sums to one within `tol`.
    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.rows.iter().flatten().all(|row| {
            row.iter().all(|&p| p >= 0.0 && p.is_finite())
                && (row.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }

    /// `prod_i gamma^i(a^i | x^i)`
    #[inline]
    pub fn likelihood(&self, types: &JointSpace, actions: &JointSpace, x: usize, a: usize) -> f64 {
        let mut p = 1.0;
        for i in 0..self.rows.len() {
            p *= self.rows[i][types.component(x, i)][actions.component(a, i)];
            if p == 0.0 {
                break;
            }
        }
        p
    }
}

/// Player `i`'s belief over the other players' joint type, given its own type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalBelief {
    pub player: usize,
    pub own_type: usize,
    /// Indexed by the flattened profile of the other players' types.
    pub weights: Vec<f64>,
    /// Set when the own-type marginal was zero and `weights` is the uniform fallback.
    pub degenerate: bool,
}

/// The common prior as a belief.
pub fn initial_belief(spec: &GameSpec) -> Belief {
    Belief(spec.prior().to_vec())
}

/// Bayes update of the common belief after observing joint action `a` under `gamma`.
///
/// Leaves the belief unchanged when the observed action has (numerically) zero
/// probability.
pub fn update(spec: &GameSpec, pi: &Belief, gamma: &Prescription, a: usize) -> Belief {
    let types = spec.types();
    let actions = spec.actions();
    let likelihoods: Vec<f64> =
        pi.0.iter()
            .enumerate()
            .map(|(x, &w)| {
                if w == 0.0 {
                    0.0
                } else {
                    gamma.likelihood(types, actions, x, a)
                }
            })
            .collect();
    let mut next: Vec<f64> = pi.0.iter().zip(&likelihoods).map(|(w, l)| w * l).collect();
    let z: f64 = next.iter().sum();
    if z <= DENOMINATOR_EPS {
        return pi.clone();
    }
    // a likelihood that is constant on the support carries no information
    let mut on_support =
        pi.0.iter()
            .zip(&likelihoods)
            .filter(|(&w, _)| w > 0.0)
            .map(|(_, &l)| l);
    if let Some(first) = on_support.next() {
        if on_support.all(|l| l == first) {
            return pi.clone();
        }
    }
    next.iter_mut().for_each(|w| *w /= z);
    Belief(next)
}

/// `pi(x^{-i} | x^i)`, with a flagged uniform fallback on a zero marginal.
pub fn condition_on_type(
    spec: &GameSpec,
    pi: &Belief,
    player: usize,
    xi: usize,
) -> ConditionalBelief {
    let types = spec.types();
    let others = types.without(player);
    let mut weights = vec![0.0; others.len()];
    for (rest, w) in weights.iter_mut().enumerate() {
        *w = pi.0[types.insert_component(rest, player, xi)];
    }
    let mass: f64 = weights.iter().sum();
    let degenerate = mass <= DENOMINATOR_EPS;
    if degenerate {
        let u = 1.0 / others.len() as f64;
        weights.iter_mut().for_each(|w| *w = u);
    } else {
        weights.iter_mut().for_each(|w| *w /= mass);
    }
    ConditionalBelief {
        player,
        own_type: xi,
        weights,
        degenerate,
    }
}
