//! Per-stage fixed point over the agent-form game.
//!
//! At a common belief `pi` every (player, type) pair is an agent choosing a
//! distribution over its actions. The payoff of agent `(i, x^i)` for action
//! `a^i` is
//!
//! ```text
//! q(a^i) = sum_{x^-i, a^-i} pi(x^-i | x^i) prod_{j != i} gamma^j(a^j | x^j)
//!          * [ R_t^i(x, a) + delta * V_{t+1}^i(F(pi, gamma, a), x^i) ]
//! ```
//!
//! where the continuation belief is updated with the full candidate `gamma`.
//! A prescription is a stage solution when every row is supported on the
//! maximizers of its own `q`, i.e. the residual `max q - gamma . q` vanishes
//! for every agent.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::belief::{condition_on_type, update, Belief, Prescription};
use crate::error::SolveError;
use crate::game_model::GameSpec;

/// `values[i][x^i]`
pub type AgentValues = Vec<Vec<f64>>;

/// `q[i][x^i][a^i]`
pub type ActionValues = Vec<Vec<Vec<f64>>>;

/// Source of stage-`t+1` values `V_{t+1}^i(pi', x^i)` for every player and type.
pub trait Continuation: Sync {
    fn values(&self, belief: &Belief) -> Result<Arc<AgentValues>, SolveError>;
}

/// `V_{T+1} = 0`.
#[derive(Debug, Clone)]
pub struct Terminal {
    zeros: Arc<AgentValues>,
}

impl Terminal {
    pub fn new(spec: &GameSpec) -> Self {
        let zeros = (0..spec.num_players())
            .map(|i| vec![0.0; spec.types().size(i)])
            .collect();
        Terminal {
            zeros: Arc::new(zeros),
        }
    }
}

impl Continuation for Terminal {
    fn values(&self, _belief: &Belief) -> Result<Arc<AgentValues>, SolveError> {
        Ok(Arc::clone(&self.zeros))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Best response puts all mass on the smallest maximizing action.
    Purify,
    /// Best response spreads mass uniformly over all maximizers.
    Mix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Converged,
    NoFixedPoint,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    PureScan,
    DampedIteration,
    SupportEnumeration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Fixed-point residual tolerance.
    pub tolerance: f64,
    /// Iterations per damped restart.
    pub max_iterations: usize,
    pub damping: f64,
    /// Number of damped-iteration attempts. Attempt 0 starts at uniform rows.
    pub restarts: usize,
    pub seed: u64,
    pub enable_support_enumeration: bool,
    /// Enumeration runs only when `sum_i |X^i| * |A^i|` is at most this.
    pub support_enumeration_limit: usize,
    pub tie_rule: TieRule,
    /// Actions within this distance of the best `q` count as maximizers.
    pub tie_tolerance: f64,
    /// A restart ends after this many iterations without residual improvement.
    pub stall_window: usize,
    /// Pure profiles are scanned first when there are at most this many
    /// (purifying tie rule only).
    #[serde(default = "default_pure_scan_limit")]
    pub pure_scan_limit: usize,
}

fn default_pure_scan_limit() -> usize {
    4096
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-8,
            max_iterations: 10_000,
            damping: 0.5,
            restarts: 8,
            seed: 0,
            enable_support_enumeration: true,
            support_enumeration_limit: 12,
            tie_rule: TieRule::Purify,
            tie_tolerance: 1e-12,
            stall_window: 200,
            pure_scan_limit: default_pure_scan_limit(),
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSolution {
    pub prescription: Prescription,
    /// `V_t^i(pi, x^i)` under `prescription`.
    pub values: AgentValues,
    pub action_values: ActionValues,
    pub residual: f64,
    pub status: StageStatus,
    pub method: SolveMethod,
    /// Damped-iteration attempt that produced the solution.
    pub restart: Option<usize>,
}

impl StageSolution {
    pub fn converged(&self) -> bool {
        self.status == StageStatus::Converged
    }

    /// Smallest gap between the chosen action and the runner-up over all agents
    /// whose row is pure. Infinite when no agent has a pure row with an alternative.
    pub fn strict_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (i, rows) in self.prescription.rows().iter().enumerate() {
            for (xi, row) in rows.iter().enumerate() {
                if let Some(chosen) = row.iter().position(|&p| p == 1.0) {
                    let q = &self.action_values[i][xi];
                    for (a, &v) in q.iter().enumerate() {
                        if a != chosen {
                            gap = gap.min(q[chosen] - v);
                        }
                    }
                }
            }
        }
        gap
    }
}

/// `max_a q(a) - sum_a gamma(a) q(a)`, floored at zero.
pub fn row_gap(row: &[f64], q: &[f64]) -> f64 {
    let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let expected: f64 = row.iter().zip(q).map(|(p, v)| p * v).sum();
    (best - expected).max(0.0)
}

/// Largest [`row_gap`] over every agent.
pub fn residual(gamma: &Prescription, q: &ActionValues) -> f64 {
    let mut r = 0.0f64;
    for (i, rows) in gamma.rows().iter().enumerate() {
        for (xi, row) in rows.iter().enumerate() {
            r = r.max(row_gap(row, &q[i][xi]));
        }
    }
    r
}

/// Actions whose value is within `tie_tol` of the best, in increasing order.
pub fn maximizers(q: &[f64], tie_tol: f64) -> Vec<usize> {
    let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    q.iter()
        .enumerate()
        .filter(|(_, &v)| v >= best - tie_tol)
        .map(|(a, _)| a)
        .collect()
}

/// Stage-`t` data shared by every evaluation at one belief.
struct StageProblem<'a, C: ?Sized> {
    spec: &'a GameSpec,
    stage: usize,
    pi: &'a Belief,
    continuation: &'a C,
    /// `agent_weights[i][x^i]`: joint types with that own type and their conditional weight.
    agent_weights: Vec<Vec<Vec<(usize, f64)>>>,
}

impl<'a, C: Continuation + ?Sized> StageProblem<'a, C> {
    fn new(spec: &'a GameSpec, stage: usize, pi: &'a Belief, continuation: &'a C) -> Self {
        let types = spec.types();
        let agent_weights = (0..spec.num_players())
            .map(|i| {
                (0..types.size(i))
                    .map(|xi| {
                        let cond = condition_on_type(spec, pi, i, xi);
                        cond.weights
                            .iter()
                            .enumerate()
                            .filter(|(_, &w)| w > 0.0)
                            .map(|(rest, &w)| (types.insert_component(rest, i, xi), w))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        StageProblem {
            spec,
            stage,
            pi,
            continuation,
            agent_weights,
        }
    }

    fn action_values(&self, gamma: &Prescription) -> Result<ActionValues, SolveError> {
        let spec = self.spec;
        let types = spec.types();
        let actions = spec.actions();
        let n = spec.num_players();
        let na = actions.len();
        let delta = spec.discount();

        let children = (0..na)
            .map(|a| self.continuation.values(&update(spec, self.pi, gamma, a)))
            .collect::<Result<Vec<_>, _>>()?;

        let mut q: ActionValues = (0..n)
            .map(|i| vec![vec![0.0; actions.size(i)]; types.size(i)])
            .collect();
        for i in 0..n {
            let rewards = spec.reward_tensor(self.stage, i);
            for xi in 0..types.size(i) {
                let row = &mut q[i][xi];
                for &(x, w) in &self.agent_weights[i][xi] {
                    for (a, child) in children.iter().enumerate() {
                        let mut p = w;
                        for j in 0..n {
                            if j != i {
                                p *= gamma.prob(j, types.component(x, j), actions.component(a, j));
                            }
                        }
                        if p == 0.0 {
                            continue;
                        }
                        row[actions.component(a, i)] +=
                            p * (rewards[x * na + a] + delta * child[i][xi]);
                    }
                }
            }
        }
        Ok(q)
    }
}

/// `q_t^i(a^i | pi, x^i, gamma)` for a single agent and action.
#[allow(clippy::too_many_arguments)]
pub fn action_value<C: Continuation + ?Sized>(
    spec: &GameSpec,
    stage: usize,
    pi: &Belief,
    gamma: &Prescription,
    player: usize,
    xi: usize,
    ai: usize,
    continuation: &C,
) -> Result<f64, SolveError> {
    Ok(action_values(spec, stage, pi, gamma, continuation)?[player][xi][ai])
}

/// `q` for every agent and action at `(pi, gamma)`.
pub fn action_values<C: Continuation + ?Sized>(
    spec: &GameSpec,
    stage: usize,
    pi: &Belief,
    gamma: &Prescription,
    continuation: &C,
) -> Result<ActionValues, SolveError> {
    StageProblem::new(spec, stage, pi, continuation).action_values(gamma)
}

/// Recomputes `q`, values and residual of an existing solution against a
/// changed continuation. `None` when the prescription no longer meets the
/// tolerance.
pub fn reevaluate<C: Continuation + ?Sized>(
    spec: &GameSpec,
    stage: usize,
    pi: &Belief,
    solution: StageSolution,
    continuation: &C,
    config: &SolverConfig,
) -> Result<Option<StageSolution>, SolveError> {
    let q = action_values(spec, stage, pi, &solution.prescription, continuation)?;
    let r = residual(&solution.prescription, &q);
    if r > config.tolerance {
        return Ok(None);
    }
    let values = solution
        .prescription
        .rows()
        .iter()
        .zip(&q)
        .map(|(rows, qs)| {
            rows.iter()
                .zip(qs)
                .map(|(row, qv)| row.iter().zip(qv).map(|(p, v)| p * v).sum())
                .collect()
        })
        .collect();
    Ok(Some(StageSolution {
        values,
        action_values: q,
        residual: r,
        ..solution
    }))
}

#[allow(clippy::too_many_arguments)]
pub fn best_response_set<C: Continuation + ?Sized>(
    spec: &GameSpec,
    stage: usize,
    pi: &Belief,
    gamma: &Prescription,
    player: usize,
    xi: usize,
    continuation: &C,
    tie_tol: f64,
) -> Result<Vec<usize>, SolveError> {
    let q = action_values(spec, stage, pi, gamma, continuation)?;
    Ok(maximizers(&q[player][xi], tie_tol))
}

struct Candidate {
    gamma: Prescription,
    q: ActionValues,
    residual: f64,
}

enum AttemptEnd {
    Converged,
    Stalled,
    MaxIterations,
}

struct Solver<'a, C: ?Sized> {
    problem: StageProblem<'a, C>,
    config: &'a SolverConfig,
    best: Option<Candidate>,
}

impl<'a, C: Continuation + ?Sized> Solver<'a, C> {
    fn evaluate(&mut self, gamma: Prescription) -> Result<Candidate, SolveError> {
        let q = self.problem.action_values(&gamma)?;
        let residual = residual(&gamma, &q);
        Ok(Candidate { gamma, q, residual })
    }

    fn remember(&mut self, c: &Candidate) {
        if self.best.as_ref().is_none_or(|b| c.residual < b.residual) {
            self.best = Some(Candidate {
                gamma: c.gamma.clone(),
                q: c.q.clone(),
                residual: c.residual,
            });
        }
    }

    fn best_response(&self, q: &ActionValues) -> Prescription {
        let rows = q
            .iter()
            .map(|player| {
                player
                    .iter()
                    .map(|qrow| {
                        let set = maximizers(qrow, self.config.tie_tolerance);
                        let mut row = vec![0.0; qrow.len()];
                        match self.config.tie_rule {
                            TieRule::Purify => row[set[0]] = 1.0,
                            TieRule::Mix => {
                                let w = 1.0 / set.len() as f64;
                                set.iter().for_each(|&a| row[a] = w);
                            }
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        Prescription::from_rows(rows)
    }

    fn initial(&self, restart: usize) -> Prescription {
        let uniform = Prescription::uniform(self.problem.spec);
        if restart == 0 {
            return uniform;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(restart as u64);
        let rows = uniform
            .rows()
            .iter()
            .map(|player| {
                player
                    .iter()
                    .map(|row| {
                        let draws: Vec<f64> = row.iter().map(|_| Exp1.sample(&mut rng)).collect();
                        let total: f64 = draws.iter().sum();
                        draws.into_iter().map(|d| d / total).collect()
                    })
                    .collect()
            })
            .collect();
        Prescription::from_rows(rows)
    }

    fn damped(&mut self, restart: usize) -> Result<(AttemptEnd, Option<Candidate>), SolveError> {
        let tol = self.config.tolerance;
        let lambda = self.config.damping;
        let mut current = self.evaluate(self.initial(restart))?;
        let mut last_target: Option<Prescription> = None;
        let mut best_residual = f64::INFINITY;
        let mut last_improvement = 0;

        for k in 0..self.config.max_iterations {
            self.remember(&current);
            if current.residual < best_residual {
                best_residual = current.residual;
                last_improvement = k;
            }
            let target = self.best_response(&current.q);
            if current.residual <= tol {
                if target != current.gamma {
                    let purified = self.evaluate(target)?;
                    if purified.residual <= tol {
                        return Ok((AttemptEnd::Converged, Some(purified)));
                    }
                }
                return Ok((AttemptEnd::Converged, Some(current)));
            }
            if last_target.as_ref() != Some(&target) {
                let candidate = self.evaluate(target.clone())?;
                if candidate.residual <= tol {
                    return Ok((AttemptEnd::Converged, Some(candidate)));
                }
                self.remember(&candidate);
                last_target = Some(target.clone());
            }
            if k - last_improvement > self.config.stall_window {
                return Ok((AttemptEnd::Stalled, None));
            }
            let rows = current
                .gamma
                .rows()
                .iter()
                .zip(target.rows())
                .map(|(cur, tgt)| {
                    cur.iter()
                        .zip(tgt)
                        .map(|(c, t)| {
                            c.iter()
                                .zip(t)
                                .map(|(c, t)| (1.0 - lambda) * c + lambda * t)
                                .collect()
                        })
                        .collect()
                })
                .collect();
            current = self.evaluate(Prescription::from_rows(rows))?;
        }
        self.remember(&current);
        Ok((AttemptEnd::MaxIterations, None))
    }

    fn enumeration_size(&self) -> usize {
        let spec = self.problem.spec;
        (0..spec.num_players())
            .map(|i| spec.types().size(i) * spec.actions().size(i))
            .sum()
    }

    fn agents(&self) -> Vec<(usize, usize)> {
        let spec = self.problem.spec;
        (0..spec.num_players())
            .flat_map(|i| (0..spec.types().size(i)).map(move |xi| (i, xi)))
            .collect()
    }

    /// Number of pure prescriptions, saturating.
    fn pure_profile_count(&self) -> usize {
        let spec = self.problem.spec;
        self.agents().iter().fold(1usize, |n, &(i, _)| {
            n.saturating_mul(spec.actions().size(i))
        })
    }

    /// Evaluates pure prescriptions in lexicographic order (first agent most
    /// significant) and returns the first fixed point.
    fn pure_scan(&mut self) -> Result<Option<Candidate>, SolveError> {
        let spec = self.problem.spec;
        let agents = self.agents();
        let sizes: Vec<usize> = agents
            .iter()
            .map(|&(i, _)| spec.actions().size(i))
            .collect();
        let mut digits = vec![0usize; agents.len()];
        loop {
            let mut gamma = Prescription::uniform(spec);
            for (&(i, xi), &a) in agents.iter().zip(&digits) {
                let row = gamma.row_mut(i, xi);
                row.iter_mut().for_each(|p| *p = 0.0);
                row[a] = 1.0;
            }
            let c = self.evaluate(gamma)?;
            if c.residual <= self.config.tolerance {
                return Ok(Some(c));
            }
            self.remember(&c);
            // advance the mixed-radix counter, last agent fastest
            let mut k = digits.len();
            loop {
                if k == 0 {
                    return Ok(None);
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < sizes[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
    }

    fn enumerate_supports(&mut self, skip_pure: bool) -> Result<Option<Candidate>, SolveError> {
        let spec = self.problem.spec;
        let agents = self.agents();
        let supports: Vec<Vec<Vec<usize>>> = agents
            .iter()
            .map(|&(i, _)| support_sets(spec.actions().size(i)))
            .collect();
        for profile in support_profiles(&supports) {
            let chosen: Vec<&[usize]> = profile
                .iter()
                .zip(&supports)
                .map(|(&k, sets)| sets[k].as_slice())
                .collect();
            if skip_pure && chosen.iter().all(|s| s.len() == 1) {
                continue;
            }
            if let Some(c) = self.solve_support(&agents, &chosen)? {
                if c.residual <= self.config.tolerance {
                    return Ok(Some(c));
                }
                self.remember(&c);
            }
        }
        Ok(None)
    }

    /// Newton's method on the indifference conditions with the support frozen.
    fn solve_support(
        &mut self,
        agents: &[(usize, usize)],
        support: &[&[usize]],
    ) -> Result<Option<Candidate>, SolveError> {
        let spec = self.problem.spec;
        let nvars: usize = support.iter().map(|s| s.len() - 1).sum();
        let build = |z: &[f64]| -> Prescription {
            let mut gamma = Prescription::uniform(spec);
            let mut k = 0;
            for (&(i, xi), s) in agents.iter().zip(support) {
                let row = gamma.row_mut(i, xi);
                row.iter_mut().for_each(|p| *p = 0.0);
                let mut rest = 1.0;
                for &a in &s[1..] {
                    row[a] = z[k];
                    rest -= z[k];
                    k += 1;
                }
                row[s[0]] = rest;
            }
            gamma
        };
        let indifference = |q: &ActionValues| -> Vec<f64> {
            let mut f = Vec::with_capacity(nvars);
            for (&(i, xi), s) in agents.iter().zip(support) {
                for &a in &s[1..] {
                    f.push(q[i][xi][a] - q[i][xi][s[0]]);
                }
            }
            f
        };
        let feasible = |z: &[f64]| -> bool {
            let mut k = 0;
            support.iter().all(|s| {
                let m = s.len() - 1;
                let part = &z[k..k + m];
                k += m;
                part.iter().all(|&p| p >= -1e-12) && part.iter().sum::<f64>() <= 1.0 + 1e-12
            })
        };

        let mut z: Vec<f64> = support
            .iter()
            .flat_map(|s| std::iter::repeat_n(1.0 / s.len() as f64, s.len() - 1))
            .collect();
        let mut current = self.evaluate(build(&z))?;
        if nvars == 0 {
            return Ok(Some(current));
        }
        let mut f = indifference(&current.q);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

        const FD_STEP: f64 = 1e-7;
        for _ in 0..25 {
            let fnorm = norm(&f);
            let scale = 1.0
                + current
                    .q
                    .iter()
                    .flatten()
                    .flatten()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
            if fnorm <= 1e-13 * scale {
                break;
            }
            let mut jac = DMatrix::<f64>::zeros(nvars, nvars);
            for col in 0..nvars {
                let h = if z[col] + FD_STEP <= 1.0 {
                    FD_STEP
                } else {
                    -FD_STEP
                };
                let mut zh = z.clone();
                zh[col] += h;
                let q = self.problem.action_values(&build(&zh))?;
                for (row, v) in indifference(&q).into_iter().enumerate() {
                    jac[(row, col)] = (v - f[row]) / h;
                }
            }
            let rhs = -DVector::from_vec(f.clone());
            let Some(step) = jac.lu().solve(&rhs) else {
                return Ok(None);
            };
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let trial: Vec<f64> = z
                    .iter()
                    .zip(step.iter())
                    .map(|(z, d)| z + alpha * d)
                    .collect();
                if feasible(&trial) {
                    let cand = self.evaluate(build(&trial))?;
                    let ft = indifference(&cand.q);
                    if norm(&ft) < fnorm {
                        z = trial;
                        f = ft;
                        current = cand;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        // snap round-off below zero back onto the simplex
        let snapped: Vec<f64> = {
            let mut k = 0;
            let mut out = Vec::with_capacity(nvars);
            for s in support {
                let m = s.len() - 1;
                let mut part: Vec<f64> = z[k..k + m].iter().map(|p| p.max(0.0)).collect();
                let total: f64 = part.iter().sum();
                if total > 1.0 {
                    part.iter_mut().for_each(|p| *p /= total);
                }
                out.extend(part);
                k += m;
            }
            out
        };
        if snapped != z {
            current = self.evaluate(build(&snapped))?;
        }
        Ok(Some(current))
    }

    fn finish(
        &self,
        c: Candidate,
        status: StageStatus,
        method: SolveMethod,
        restart: Option<usize>,
    ) -> StageSolution {
        let values = c
            .gamma
            .rows()
            .iter()
            .zip(&c.q)
            .map(|(rows, qs)| {
                rows.iter()
                    .zip(qs)
                    .map(|(row, q)| row.iter().zip(q).map(|(p, v)| p * v).sum())
                    .collect()
            })
            .collect();
        StageSolution {
            prescription: c.gamma,
            values,
            action_values: c.q,
            residual: c.residual,
            status,
            method,
            restart,
        }
    }
}

/// Nonempty action subsets, smallest first, each in increasing action order.
fn support_sets(num_actions: usize) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = (1..(1u32 << num_actions))
        .map(|m| (0..num_actions).filter(|a| m & (1 << a) != 0).collect())
        .collect();
    sets.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets
}

/// All support profiles ordered by total support size, then lexicographically.
fn support_profiles(supports: &[Vec<Vec<usize>>]) -> Vec<Vec<usize>> {
    let mut profiles: Vec<Vec<usize>> = vec![vec![]];
    for sets in supports {
        profiles = profiles
            .into_iter()
            .flat_map(|p| {
                (0..sets.len()).map(move |k| {
                    let mut next = p.clone();
                    next.push(k);
                    next
                })
            })
            .collect();
    }
    let size = |p: &Vec<usize>| -> usize { p.iter().zip(supports).map(|(&k, s)| s[k].len()).sum() };
    profiles.sort_by(|a, b| size(a).cmp(&size(b)).then_with(|| a.cmp(b)));
    profiles
}

/// Solves the stage fixed point at `pi`.
///
/// Schedule: a scan of pure prescriptions (purifying rule, small games), damped
/// iteration from uniform rows, support enumeration (small games), then the
/// seeded restarts. The first fixed point found is returned.
///
/// Local failure is reported through [`StageSolution::status`]; errors only
/// come from the continuation (a failed or refused child solve).
pub fn solve_stage_fixed_point<C: Continuation + ?Sized>(
    spec: &GameSpec,
    stage: usize,
    pi: &Belief,
    continuation: &C,
    config: &SolverConfig,
) -> Result<StageSolution, SolveError> {
    let mut solver = Solver {
        problem: StageProblem::new(spec, stage, pi, continuation),
        config,
        best: None,
    };
    let scan =
        config.tie_rule == TieRule::Purify && solver.pure_profile_count() <= config.pure_scan_limit;
    if scan {
        if let Some(c) = solver.pure_scan()? {
            return Ok(solver.finish(c, StageStatus::Converged, SolveMethod::PureScan, None));
        }
    }
    let enumerate = config.enable_support_enumeration
        && solver.enumeration_size() <= config.support_enumeration_limit;
    let mut hit_max = false;
    // the uniform start runs before enumeration, seeded restarts after it
    for restart in 0..config.restarts {
        if restart == 1 && enumerate {
            if let Some(c) = solver.enumerate_supports(scan)? {
                return Ok(solver.finish(
                    c,
                    StageStatus::Converged,
                    SolveMethod::SupportEnumeration,
                    None,
                ));
            }
        }
        match solver.damped(restart)? {
            (AttemptEnd::Converged, Some(c)) => {
                return Ok(solver.finish(
                    c,
                    StageStatus::Converged,
                    SolveMethod::DampedIteration,
                    Some(restart),
                ));
            }
            (AttemptEnd::MaxIterations, _) => hit_max = true,
            _ => {}
        }
    }
    if enumerate && config.restarts <= 1 {
        if let Some(c) = solver.enumerate_supports(scan)? {
            return Ok(solver.finish(
                c,
                StageStatus::Converged,
                SolveMethod::SupportEnumeration,
                None,
            ));
        }
    }
    let status = if !enumerate && hit_max {
        StageStatus::MaxIterations
    } else {
        StageStatus::NoFixedPoint
    };
    let best = match solver.best.take() {
        Some(b) => b,
        None => solver.evaluate(Prescription::uniform(spec))?,
    };
    let method = if enumerate {
        SolveMethod::SupportEnumeration
    } else {
        SolveMethod::DampedIteration
    };
    Ok(solver.finish(best, status, method, None))
}
