//! Forward construction of the equilibrium profile from a generator.
//!
//! The common belief after a public history is built on demand with
//! `pi*_{t+1} = F(pi*_t, theta_t[pi*_t], a_t)` and cached per prefix. Strategies
//! and private beliefs are read off it: `beta*_t^i(.|h, x^i) = theta_t^i[pi*_t[h]](.|x^i)`
//! and `mu*_t^i(.|h, x^i) = pi*_t[h](.|x^i)`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backward::Generator;
use crate::belief::{
    condition_on_type, initial_belief, update, Belief, BeliefKey, ConditionalBelief,
};
use crate::error::SolveError;
use crate::game_model::GameSpec;
use crate::par;
use crate::stage_solver::StageSolution;

/// Default cap on `|X| * |A|^T` for exact enumeration.
pub const DEFAULT_ENUMERATION_LIMIT: f64 = 1e7;

pub struct EquilibriumPolicy<'g> {
    generator: &'g dyn Generator,
    beliefs: Mutex<HashMap<Vec<usize>, Belief>>,
}

impl<'g> EquilibriumPolicy<'g> {
    pub fn new(generator: &'g dyn Generator) -> Self {
        EquilibriumPolicy {
            generator,
            beliefs: Mutex::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &GameSpec {
        self.generator.spec()
    }

    pub fn generator(&self) -> &dyn Generator {
        self.generator
    }

    fn check_history(&self, history: &[usize]) {
        let spec = self.spec();
        assert!(
            history.len() <= spec.horizon(),
            "history longer than the horizon"
        );
        assert!(
            history.iter().all(|&a| a < spec.actions().len()),
            "joint action out of range"
        );
    }

    /// `pi*_t[a_{1:t-1}]`
    pub fn common_belief(&self, history: &[usize]) -> Result<Belief, SolveError> {
        self.check_history(history);
        if history.is_empty() {
            return Ok(initial_belief(self.spec()));
        }
        if let Some(b) = self
            .beliefs
            .lock()
            .expect("belief cache poisoned")
            .get(history)
        {
            return Ok(b.clone());
        }
        let (last, prefix) = history.split_last().expect("nonempty history");
        let parent = self.common_belief(prefix)?;
        let theta = self.generator.stage_solution(prefix.len() + 1, &parent)?;
        let next = update(self.spec(), &parent, &theta.prescription, *last);
        self.beliefs
            .lock()
            .expect("belief cache poisoned")
            .insert(history.to_vec(), next.clone());
        Ok(next)
    }

    /// `theta_t[pi*_t[h]]` for `t = |h| + 1`.
    pub fn stage_solution(&self, history: &[usize]) -> Result<Arc<StageSolution>, SolveError> {
        assert!(
            history.len() < self.spec().horizon(),
            "no decision after the last stage"
        );
        let pi = self.common_belief(history)?;
        self.generator.stage_solution(history.len() + 1, &pi)
    }

    /// `beta*_t^i(. | a_{1:t-1}, x^i)`
    pub fn strategy_query(
        &self,
        player: usize,
        history: &[usize],
        xi: usize,
    ) -> Result<Vec<f64>, SolveError> {
        Ok(self
            .stage_solution(history)?
            .prescription
            .row(player, xi)
            .to_vec())
    }

    /// `mu*_t^i(. | a_{1:t-1}, x^i)`
    pub fn belief_query(
        &self,
        player: usize,
        history: &[usize],
        xi: usize,
    ) -> Result<ConditionalBelief, SolveError> {
        Ok(condition_on_type(
            self.spec(),
            &self.common_belief(history)?,
            player,
            xi,
        ))
    }

    /// `E[sum_t delta^{t-1} R_t^i | x^i]` under the equilibrium profile, by
    /// summing over every joint type and action sequence. `None` for types
    /// with zero prior mass.
    pub fn expected_payoffs_exact(&self, limit: f64) -> Result<Vec<Vec<Option<f64>>>, SolveError> {
        let spec = self.spec();
        let terms =
            spec.types().len() as f64 * (spec.actions().len() as f64).powi(spec.horizon() as i32);
        if terms > limit {
            return Err(SolveError::EnumerationLimit {
                required: terms,
                limit,
            });
        }
        let n = spec.num_players();
        let mut acc = vec![vec![0.0; spec.types().len()]; n];
        self.accumulate(&mut Vec::new(), spec.prior().to_vec(), 1.0, &mut acc)?;
        let prior = initial_belief(spec);
        Ok((0..n)
            .map(|i| {
                let marginal = prior.marginal(spec.types(), i);
                marginal
                    .iter()
                    .enumerate()
                    .map(|(xi, &m)| {
                        (m > 0.0).then(|| {
                            let total: f64 = acc[i]
                                .iter()
                                .enumerate()
                                .filter(|&(x, _)| spec.types().component(x, i) == xi)
                                .map(|(_, v)| v)
                                .sum();
                            total / m
                        })
                    })
                    .collect()
            })
            .collect())
    }

    fn accumulate(
        &self,
        history: &mut Vec<usize>,
        weights: Vec<f64>,
        discount: f64,
        acc: &mut [Vec<f64>],
    ) -> Result<(), SolveError> {
        let spec = self.spec();
        let stage = history.len() + 1;
        let theta = self.stage_solution(history)?;
        for a in 0..spec.actions().len() {
            let mut next = vec![0.0; weights.len()];
            for (x, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let p = w * theta
                    .prescription
                    .likelihood(spec.types(), spec.actions(), x, a);
                next[x] = p;
                if p > 0.0 {
                    for (i, row) in acc.iter_mut().enumerate() {
                        row[x] += p * discount * spec.reward(stage, i, x, a);
                    }
                }
            }
            if stage < spec.horizon() && next.iter().any(|&p| p > 0.0) {
                history.push(a);
                self.accumulate(history, next, discount * spec.discount(), acc)?;
                history.pop();
            }
        }
        Ok(())
    }

    /// Samples `episodes` plays. Episode `e` draws from its own ChaCha stream
    /// `(seed, e)`: joint type first, then each stage's actions in player order.
    pub fn simulate(&self, seed: u64, episodes: usize) -> Result<Simulation, SolveError> {
        assert!(episodes >= 1, "at least one episode");
        let traces = par::map_range(episodes, |e| self.episode(seed, e as u64))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let summary = SimulationSummary::from_traces(self.spec(), seed, &traces);
        Ok(Simulation { traces, summary })
    }

    fn episode(&self, seed: u64, episode: u64) -> Result<Trace, SolveError> {
        let spec = self.spec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(episode);
        let x = sample(&mut rng, spec.prior());
        let n = spec.num_players();
        let mut history = Vec::with_capacity(spec.horizon());
        let mut steps = Vec::with_capacity(spec.horizon());
        let mut totals = vec![0.0; n];
        let mut discount = 1.0;
        for stage in 1..=spec.horizon() {
            let belief = self.common_belief(&history)?;
            let theta = self.stage_solution(&history)?;
            let parts: Vec<usize> = (0..n)
                .map(|i| {
                    sample(
                        &mut rng,
                        theta.prescription.row(i, spec.types().component(x, i)),
                    )
                })
                .collect();
            let a = spec.actions().flatten(&parts);
            let rewards: Vec<f64> = (0..n).map(|i| spec.reward(stage, i, x, a)).collect();
            for (t, r) in totals.iter_mut().zip(&rewards) {
                *t += discount * r;
            }
            discount *= spec.discount();
            steps.push(TraceStep {
                stage,
                belief: belief.weights().to_vec(),
                action: a,
                rewards,
            });
            history.push(a);
        }
        Ok(Trace {
            episode: episode as usize,
            types: x,
            steps,
            totals,
        })
    }
}

fn sample(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last = k;
            if u < cum {
                return k;
            }
        }
    }
    last
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: usize,
    /// Common belief before the stage's actions.
    pub belief: Vec<f64>,
    pub action: usize,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub episode: usize,
    pub types: usize,
    pub steps: Vec<TraceStep>,
    /// Discounted total reward per player.
    pub totals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub episodes: usize,
    pub mean_total: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Mean entropy of the common belief before each stage.
    pub mean_entropy: Vec<f64>,
}

impl SimulationSummary {
    fn from_traces(spec: &GameSpec, seed: u64, traces: &[Trace]) -> Self {
        let m = traces.len() as f64;
        let n = spec.num_players();
        let mean_total: Vec<f64> = (0..n)
            .map(|i| traces.iter().map(|t| t.totals[i]).sum::<f64>() / m)
            .collect();
        let std_error = (0..n)
            .map(|i| {
                if traces.len() < 2 {
                    return 0.0;
                }
                let var = traces
                    .iter()
                    .map(|t| (t.totals[i] - mean_total[i]).powi(2))
                    .sum::<f64>()
                    / (m - 1.0);
                (var / m).sqrt()
            })
            .collect();
        let mean_entropy = (0..spec.horizon())
            .map(|t| {
                traces
                    .iter()
                    .map(|tr| Belief::from_normalized(tr.steps[t].belief.clone()).entropy())
                    .sum::<f64>()
                    / m
            })
            .collect();
        SimulationSummary {
            seed,
            episodes: traces.len(),
            mean_total,
            std_error,
            mean_entropy,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub traces: Vec<Trace>,
    pub summary: SimulationSummary,
}

/// One row per (episode, stage): types, belief, actions, rewards.
pub fn write_traces_csv<W: Write>(spec: &GameSpec, traces: &[Trace], out: W) -> csv::Result<()> {
    let n = spec.num_players();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["episode".to_string(), "stage".to_string()];
    header.extend((0..n).map(|i| format!("type_{i}")));
    header.extend((0..spec.types().len()).map(|x| format!("pi_{x}")));
    header.extend((0..n).map(|i| format!("action_{i}")));
    header.extend((0..n).map(|i| format!("reward_{i}")));
    w.write_record(&header)?;
    for tr in traces {
        for step in &tr.steps {
            let mut row = vec![tr.episode.to_string(), step.stage.to_string()];
            row.extend(
                (0..n).map(|i| spec.type_labels()[i][spec.types().component(tr.types, i)].clone()),
            );
            row.extend(step.belief.iter().map(|b| b.to_string()));
            row.extend((0..n).map(|i| {
                spec.action_labels()[i][spec.actions().component(step.action, i)].clone()
            }));
            row.extend(step.rewards.iter().map(|r| r.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A generator with selected stage prescriptions replaced. Values are
/// inherited from the base generator.
pub struct PerturbedGenerator<'a> {
    base: &'a dyn Generator,
    key_digits: u32,
    overrides: HashMap<(usize, BeliefKey), Arc<StageSolution>>,
}

impl<'a> PerturbedGenerator<'a> {
    pub fn new(base: &'a dyn Generator, key_digits: u32) -> Self {
        PerturbedGenerator {
            base,
            key_digits,
            overrides: HashMap::new(),
        }
    }

    /// Moves `amount` of probability from action `from` to action `to` in the
    /// row of `(player, xi)` at `(stage, belief)`.
    #[allow(clippy::too_many_arguments)]
    pub fn shift_mass(
        &mut self,
        stage: usize,
        belief: &Belief,
        player: usize,
        xi: usize,
        from: usize,
        to: usize,
        amount: f64,
    ) -> Result<(), SolveError> {
        let mut sol = (*self.stage_solution(stage, belief)?).clone();
        let row = sol.prescription.row_mut(player, xi);
        let moved = amount.min(row[from]);
        row[from] -= moved;
        row[to] += moved;
        self.overrides
            .insert((stage, belief.key(self.key_digits)), Arc::new(sol));
        Ok(())
    }
}

impl Generator for PerturbedGenerator<'_> {
    fn spec(&self) -> &GameSpec {
        self.base.spec()
    }

    fn stage_solution(
        &self,
        stage: usize,
        belief: &Belief,
    ) -> Result<Arc<StageSolution>, SolveError> {
        match self.overrides.get(&(stage, belief.key(self.key_digits))) {
            Some(s) => Ok(Arc::clone(s)),
            None => self.base.stage_solution(stage, belief),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::{solve, BackwardOptions};
    use crate::belief::DEFAULT_KEY_DIGITS;
    use crate::game_model::{numeric_labels, RewardSchedule};
    use crate::stage_solver::SolverConfig;

    fn zero_game() -> Arc<GameSpec> {
        let labels = vec![numeric_labels(2), numeric_labels(2)];
        Arc::new(
            GameSpec::new(
                2,
                labels.clone(),
                labels,
                vec![0.25; 4],
                RewardSchedule::Stationary(vec![vec![0.0; 16], vec![0.0; 16]]),
                1.0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_reward_simulation() {
        let spec = zero_game();
        let out = solve(
            Arc::clone(&spec),
            &SolverConfig::default(),
            &BackwardOptions::default(),
        );
        let policy = EquilibriumPolicy::new(&out.generator);
        let sim = policy.simulate(7, 50).unwrap();
        assert!(sim.traces.iter().all(|t| t.totals == vec![0.0, 0.0]));
        assert_eq!(sim.summary.mean_total, vec![0.0, 0.0]);
        let exact = policy
            .expected_payoffs_exact(DEFAULT_ENUMERATION_LIMIT)
            .unwrap();
        assert!(exact.iter().flatten().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn enumeration_limit_refuses() {
        let spec = zero_game();
        let out = solve(
            Arc::clone(&spec),
            &SolverConfig::default(),
            &BackwardOptions::default(),
        );
        let policy = EquilibriumPolicy::new(&out.generator);
        let err = policy.expected_payoffs_exact(10.0).unwrap_err();
        assert!(matches!(err, SolveError::EnumerationLimit { .. }));
    }

    #[test]
    fn trace_csv_has_row_per_stage() {
        let spec = zero_game();
        let out = solve(
            Arc::clone(&spec),
            &SolverConfig::default(),
            &BackwardOptions::default(),
        );
        let policy = EquilibriumPolicy::new(&out.generator);
        let sim = policy.simulate(1, 3).unwrap();
        let mut buf = Vec::new();
        write_traces_csv(&spec, &sim.traces, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 2);
        assert!(text.starts_with("episode,stage,type_0,type_1,pi_0"));
    }

    #[test]
    fn perturbation_overrides_one_row() {
        let spec = zero_game();
        let out = solve(
            Arc::clone(&spec),
            &SolverConfig::default(),
            &BackwardOptions::default(),
        );
        let mut p = PerturbedGenerator::new(&out.generator, DEFAULT_KEY_DIGITS);
        let prior = initial_belief(&spec);
        p.shift_mass(1, &prior, 0, 1, 0, 1, 0.05).unwrap();
        let row = p
            .stage_solution(1, &prior)
            .unwrap()
            .prescription
            .row(0, 1)
            .to_vec();
        assert!((row[0] - 0.95).abs() < 1e-15 && (row[1] - 0.05).abs() < 1e-15);
        let base = out.generator.stage_solution(1, &prior).unwrap();
        assert_eq!(base.prescription.row(0, 1), &[1.0, 0.0]);
    }
}
