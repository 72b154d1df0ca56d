//! Static description of a finite repeated game with correlated private types.
//!
//! Joint type and action profiles are flattened row-major with player 0 as the
//! outermost axis. Reward tensors are indexed `[x * |A| + a]`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the prior's total mass.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-12;

/// Mixed-radix index space over a product of per-player alphabets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl JointSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut strides = vec![1; sizes.len()];
        for k in (0..sizes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * sizes[k + 1];
        }
        let len = sizes.iter().product();
        JointSpace {
            sizes,
            strides,
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_players(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, player: usize) -> usize {
        self.sizes[player]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn flatten(&self, parts: &[usize]) -> usize {
        assert_eq!(parts.len(), self.sizes.len(), "joint index arity mismatch");
        parts
            .iter()
            .zip(&self.sizes)
            .zip(&self.strides)
            .map(|((&p, &n), &s)| {
                assert!(p < n, "component {p} out of range {n}");
                p * s
            })
            .sum()
    }

    pub fn unflatten(&self, index: usize) -> Vec<usize> {
        assert!(
            index < self.len,
            "joint index {index} out of range {}",
            self.len
        );
        (0..self.sizes.len())
            .map(|k| self.component(index, k))
            .collect()
    }

    /// The `player` coordinate of a flat joint index.
    #[inline]
    pub fn component(&self, index: usize, player: usize) -> usize {
        (index / self.strides[player]) % self.sizes[player]
    }

    /// Space over every player except `player`, in the original order.
    pub fn without(&self, player: usize) -> JointSpace {
        let sizes = self
            .sizes
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != player)
            .map(|(_, &n)| n)
            .collect();
        JointSpace::new(sizes)
    }

    /// Flat index of the profile with `player`'s coordinate removed.
    pub fn drop_component(&self, index: usize, player: usize) -> usize {
        let own = self.component(index, player) * self.strides[player];
        let rest = index - own;
        // coordinates before `player` are scaled by an extra factor of sizes[player]
        let high_stride = self.strides[player] * self.sizes[player];
        let high = rest / high_stride;
        let low = rest % self.strides[player];
        high * self.strides[player] + low
    }

    /// Inverse of `drop_component`: reinsert `value` as `player`'s coordinate.
    pub fn insert_component(&self, rest: usize, player: usize, value: usize) -> usize {
        let stride = self.strides[player];
        let high = rest / stride;
        let low = rest % stride;
        high * stride * self.sizes[player] + value * stride + low
    }
}

/// Reward tensors, either one block reused at every stage or one per stage.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardSchedule {
    Stationary(Vec<Vec<f64>>),
    PerStage(Vec<Vec<Vec<f64>>>),
}

impl RewardSchedule {
    /// Per-player tensors of stage `stage` (1-based).
    pub fn block(&self, stage: usize) -> &[Vec<f64>] {
        match self {
            RewardSchedule::Stationary(block) => block,
            RewardSchedule::PerStage(blocks) => &blocks[stage - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed game document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("invalid game: {0}")]
    Invalid(ValidationReport),
}

fn field_error(field: &str, message: impl Into<String>) -> SpecError {
    SpecError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Immutable game description shared by every solver stage.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    horizon: usize,
    type_labels: Vec<Vec<String>>,
    action_labels: Vec<Vec<String>>,
    prior: Vec<f64>,
    rewards: RewardSchedule,
    discount: f64,
    types: JointSpace,
    actions: JointSpace,
}

impl GameSpec {
    /// Builds and validates a game. Rejects any spec with a nonempty validation report.
    pub fn new(
        horizon: usize,
        type_labels: Vec<Vec<String>>,
        action_labels: Vec<Vec<String>>,
        prior: Vec<f64>,
        rewards: RewardSchedule,
        discount: f64,
    ) -> Result<Self, SpecError> {
        let spec = Self::new_unchecked(
            horizon,
            type_labels,
            action_labels,
            prior,
            rewards,
            discount,
        );
        let report = spec.validate();
        if report.is_empty() {
            Ok(spec)
        } else {
            Err(SpecError::Invalid(report))
        }
    }

    /// Builds a game without checking invariants; pair with [`GameSpec::validate`].
    pub fn new_unchecked(
        horizon: usize,
        type_labels: Vec<Vec<String>>,
        action_labels: Vec<Vec<String>>,
        prior: Vec<f64>,
        rewards: RewardSchedule,
        discount: f64,
    ) -> Self {
        let types = JointSpace::new(type_labels.iter().map(Vec::len).collect());
        let actions = JointSpace::new(action_labels.iter().map(Vec::len).collect());
        GameSpec {
            horizon,
            type_labels,
            action_labels,
            prior,
            rewards,
            discount,
            types,
            actions,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.type_labels.len();
        if n == 0 {
            report.push("players", "at least one player required");
        }
        if self.action_labels.len() != n {
            report.push(
                "actions",
                format!(
                    "{} action alphabets for {n} players",
                    self.action_labels.len()
                ),
            );
        }
        if self.horizon == 0 {
            report.push("horizon", "horizon must be at least 1");
        }
        for (i, labels) in self.type_labels.iter().enumerate() {
            if labels.is_empty() {
                report.push(format!("types[{i}]"), "empty type alphabet");
            }
        }
        for (i, labels) in self.action_labels.iter().enumerate() {
            if labels.is_empty() {
                report.push(format!("actions[{i}]"), "empty action alphabet");
            }
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            report.push(
                "discount",
                format!("discount {} outside (0, 1]", self.discount),
            );
        }

        let nx = self.types.len();
        let na = self.actions.len();
        if self.prior.len() != nx {
            report.push(
                "prior",
                format!("expected {nx} entries, found {}", self.prior.len()),
            );
        }
        let mut sum = 0.0;
        for (k, &p) in self.prior.iter().enumerate() {
            if !p.is_finite() {
                report.push("prior", format!("prior[{k}] is not finite"));
            } else if p < 0.0 {
                report.push("prior", format!("prior[{k}] < 0"));
            }
            sum += p;
        }
        if sum.is_finite() && (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            report.push("prior", format!("prior not normalized (sum = {sum})"));
        }

        let blocks: Vec<(usize, &[Vec<f64>])> = match &self.rewards {
            RewardSchedule::Stationary(block) => vec![(0, block.as_slice())],
            RewardSchedule::PerStage(blocks) => {
                if blocks.len() != self.horizon {
                    report.push(
                        "rewards",
                        format!(
                            "expected {} stage blocks, found {}",
                            self.horizon,
                            blocks.len()
                        ),
                    );
                }
                blocks
                    .iter()
                    .enumerate()
                    .map(|(t, b)| (t + 1, b.as_slice()))
                    .collect()
            }
        };
        for (stage, block) in blocks {
            let label = if stage == 0 {
                "rewards[stationary]".to_string()
            } else {
                format!("rewards[stage {stage}]")
            };
            if block.len() != n {
                report.push(
                    label.clone(),
                    format!("expected {n} player tensors, found {}", block.len()),
                );
            }
            for (i, tensor) in block.iter().enumerate() {
                if tensor.len() != nx * na {
                    report.push(
                        format!("{label}[player {i}]"),
                        format!("expected {} entries, found {}", nx * na, tensor.len()),
                    );
                    continue;
                }
                for (k, r) in tensor.iter().enumerate() {
                    if !r.is_finite() {
                        report.push(
                            format!("{label}[player {i}]"),
                            format!("non-finite reward at type {} action {}", k / na, k % na),
                        );
                    }
                }
            }
        }
        report
    }

    pub fn num_players(&self) -> usize {
        self.type_labels.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn types(&self) -> &JointSpace {
        &self.types
    }

    pub fn actions(&self) -> &JointSpace {
        &self.actions
    }

    pub fn type_labels(&self) -> &[Vec<String>] {
        &self.type_labels
    }

    pub fn action_labels(&self) -> &[Vec<String>] {
        &self.action_labels
    }

    pub fn rewards(&self) -> &RewardSchedule {
        &self.rewards
    }

    /// `R_t^i(x, a)` for stage `t` in `1..=T`.
    #[inline]
    pub fn reward(&self, stage: usize, player: usize, x: usize, a: usize) -> f64 {
        assert!(
            stage >= 1 && stage <= self.horizon,
            "stage {stage} out of range"
        );
        let na = self.actions.len();
        assert!(x < self.types.len() && a < na, "joint index out of range");
        self.rewards.block(stage)[player][x * na + a]
    }

    /// Stage-`t` tensor for `player`, indexed `[x * |A| + a]`.
    #[inline]
    pub fn reward_tensor(&self, stage: usize, player: usize) -> &[f64] {
        &self.rewards.block(stage)[player]
    }

    /// `sum_{n=t}^{T} max |R_n^i|`, a bound on any stage-`t` value of `player`.
    pub fn value_bound(&self, stage: usize, player: usize) -> f64 {
        (stage..=self.horizon)
            .map(|n| {
                self.reward_tensor(n, player)
                    .iter()
                    .fold(0.0f64, |m, r| m.max(r.abs()))
            })
            .sum()
    }

    pub fn parse(document: &str) -> Result<Self, SpecError> {
        let doc: GameDocument = serde_json::from_str(document)?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: GameDocument) -> Result<Self, SpecError> {
        if doc.players == 0 {
            return Err(field_error("players", "at least one player required"));
        }
        if doc.types.len() != doc.players {
            return Err(field_error(
                "types",
                format!("{} alphabets for {} players", doc.types.len(), doc.players),
            ));
        }
        if doc.actions.len() != doc.players {
            return Err(field_error(
                "actions",
                format!(
                    "{} alphabets for {} players",
                    doc.actions.len(),
                    doc.players
                ),
            ));
        }
        let rewards = match doc.rewards {
            RewardsDocument::Staged(blocks) => RewardSchedule::PerStage(blocks),
            RewardsDocument::Tagged {
                stationary: true,
                mut blocks,
            } => {
                if blocks.len() != 1 {
                    return Err(field_error(
                        "rewards",
                        format!(
                            "stationary rewards need exactly one block, found {}",
                            blocks.len()
                        ),
                    ));
                }
                RewardSchedule::Stationary(blocks.pop().unwrap_or_default())
            }
            RewardsDocument::Tagged {
                stationary: false,
                blocks,
            } => RewardSchedule::PerStage(blocks),
        };
        Self::new(
            doc.horizon,
            doc.types,
            doc.actions,
            doc.prior,
            rewards,
            doc.discount.unwrap_or(1.0),
        )
    }

    pub fn to_document(&self) -> GameDocument {
        let (stationary, blocks) = match &self.rewards {
            RewardSchedule::Stationary(block) => (true, vec![block.clone()]),
            RewardSchedule::PerStage(blocks) => (false, blocks.clone()),
        };
        GameDocument {
            players: self.num_players(),
            horizon: self.horizon,
            types: self.type_labels.clone(),
            actions: self.action_labels.clone(),
            prior: self.prior.clone(),
            rewards: RewardsDocument::Tagged { stationary, blocks },
            discount: if self.discount == 1.0 {
                None
            } else {
                Some(self.discount)
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("game documents always serialize")
    }
}

/// On-disk form of a [`GameSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub players: usize,
    pub horizon: usize,
    pub types: Vec<Vec<String>>,
    pub actions: Vec<Vec<String>>,
    pub prior: Vec<f64>,
    pub rewards: RewardsDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardsDocument {
    Staged(Vec<Vec<Vec<f64>>>),
    Tagged {
        stationary: bool,
        blocks: Vec<Vec<Vec<f64>>>,
    },
}

/// Labels `"0"`, `"1"`, ... for an alphabet of size `n`.
pub fn numeric_labels(n: usize) -> Vec<String> {
    (0..n).map(|k| k.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_by_two(prior: Vec<f64>) -> GameSpec {
        let labels = vec![numeric_labels(2), numeric_labels(2)];
        let tensor: Vec<f64> = (0..16).map(f64::from).collect();
        let other: Vec<f64> = (0..16).map(|k| -f64::from(k)).collect();
        GameSpec::new(
            2,
            labels.clone(),
            labels,
            prior,
            RewardSchedule::Stationary(vec![tensor, other]),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn minimal_document_parses() {
        let doc = r#"{"players":1,"horizon":1,"types":[["x"]],"actions":[["a"]],
            "prior":[1.0],"rewards":{"stationary":true,"blocks":[[[0.5]]]}}"#;
        let spec = GameSpec::parse(doc).unwrap();
        assert_eq!(spec.types().len(), 1);
        assert_eq!(spec.actions().len(), 1);
        assert_eq!(spec.reward(1, 0, 0, 0), 0.5);
        assert_eq!(spec.discount(), 1.0);
    }

    #[test]
    fn unnormalized_prior_is_rejected() {
        let doc = r#"{"players":1,"horizon":1,"types":[["x","y"]],"actions":[["a"]],
            "prior":[0.5,0.4],"rewards":[[[0.0,0.0]]]}"#;
        let err = GameSpec::parse(doc).unwrap_err();
        assert!(err.to_string().contains("prior not normalized"), "{err}");
    }

    #[test]
    fn two_player_dimensions() {
        let spec = two_by_two(vec![0.25; 4]);
        assert_eq!(spec.types().len(), 4);
        assert_eq!(spec.actions().len(), 4);
        assert_eq!(spec.reward_tensor(1, 0).len(), 16);
    }

    #[test]
    fn staged_rewards_need_one_block_per_stage() {
        let doc = r#"{"players":1,"horizon":2,"types":[["x"]],"actions":[["a"]],
            "prior":[1.0],"rewards":[[[1.0]]]}"#;
        let err = GameSpec::parse(doc).unwrap_err();
        assert!(err.to_string().contains("expected 2 stage blocks"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let doc =
            r#"{"players":1,"horizon":1,"types":[["x"]],"actions":[["a"]],"rewards":[[[1.0]]]}"#;
        let err = GameSpec::parse(doc).unwrap_err();
        assert!(err.to_string().contains("prior"), "{err}");
    }

    #[test]
    fn validate_reports_nan_and_negative_prior() {
        let labels = vec![numeric_labels(2), numeric_labels(2)];
        let mut tensor = vec![0.0; 16];
        tensor[6] = f64::NAN;
        let spec = GameSpec::new_unchecked(
            1,
            labels.clone(),
            labels,
            vec![0.5, 0.7, -0.2, 0.0],
            RewardSchedule::PerStage(vec![vec![tensor, vec![0.0; 16]]]),
            1.0,
        );
        let report = spec.validate();
        let text = report.to_string();
        assert!(text.contains("prior[2] < 0"), "{text}");
        assert!(text.contains("rewards[stage 1][player 0]"), "{text}");
        assert!(text.contains("type 1 action 2"), "{text}");
        assert!(two_by_two(vec![0.25; 4]).validate().is_empty());
    }

    #[test]
    fn reward_readback_and_stationarity() {
        let spec = two_by_two(vec![0.4, 0.1, 0.1, 0.4]);
        // x = (1, 0) -> 2, a = (0, 1) -> 1, entry 2 * 4 + 1
        let x = spec.types().flatten(&[1, 0]);
        let a = spec.actions().flatten(&[0, 1]);
        assert_eq!(spec.reward(1, 0, x, a), 9.0);
        assert_eq!(spec.reward(1, 1, x, a), -9.0);
        assert_eq!(spec.reward(1, 0, x, a), spec.reward(2, 0, x, a));
    }

    #[test]
    fn value_bound_sums_stage_maxima() {
        let spec = two_by_two(vec![0.25; 4]);
        assert_eq!(spec.value_bound(1, 0), 30.0);
        assert_eq!(spec.value_bound(2, 1), 15.0);
    }

    #[test]
    fn drop_and_insert_component() {
        let space = JointSpace::new(vec![2, 3, 2]);
        let others = space.without(1);
        for x in 0..space.len() {
            let parts = space.unflatten(x);
            let rest = space.drop_component(x, 1);
            assert_eq!(rest, others.flatten(&[parts[0], parts[2]]));
            assert_eq!(space.insert_component(rest, 1, parts[1]), x);
        }
    }

    proptest! {
        #[test]
        fn flatten_unflatten_bijective(sizes in prop::collection::vec(1usize..5, 1..5), seed in any::<u64>()) {
            let space = JointSpace::new(sizes);
            let index = (seed as usize) % space.len();
            prop_assert_eq!(space.flatten(&space.unflatten(index)), index);
        }

        #[test]
        fn document_round_trip_is_bit_exact(
            rewards in prop::collection::vec(-1e6f64..1e6, 16),
            w in prop::collection::vec(0.01f64..1.0, 4),
            discount in 0.01f64..=1.0,
        ) {
            let total: f64 = w.iter().sum();
            let mut prior: Vec<f64> = w.iter().map(|v| v / total).collect();
            let head: f64 = prior[..3].iter().sum();
            prior[3] = 1.0 - head;
            let labels = vec![numeric_labels(2), numeric_labels(2)];
            let negated: Vec<f64> = rewards.iter().map(|r| -r).collect();
            let Ok(spec) = GameSpec::new(
                3, labels.clone(), labels, prior,
                RewardSchedule::Stationary(vec![rewards, negated]), discount,
            ) else { return Ok(()); };
            let back = GameSpec::parse(&spec.to_json()).unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
