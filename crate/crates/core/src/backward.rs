//! Backward induction over stages: builds the equilibrium generating function
//! `theta_t[pi]` and the values `V_t^i(pi, x^i)`.
//!
//! Two realizations:
//! * exact: lazy recursion from the prior, memoized on quantized beliefs. Only
//!   beliefs actually queried are ever solved.
//! * grid: every lattice point `k / G` of the simplex at every stage, with
//!   nearest-neighbour continuation lookups.

use std::collections::HashMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::belief::{initial_belief, update, Belief, BeliefKey, DEFAULT_KEY_DIGITS};
use crate::error::SolveError;
use crate::game_model::GameSpec;
use crate::par;
use crate::stage_solver::{
    reevaluate, solve_stage_fixed_point, AgentValues, Continuation, SolverConfig, StageSolution,
    StageStatus, Terminal,
};

/// Stagewise map from common beliefs to stage solutions.
pub trait Generator: Sync {
    fn spec(&self) -> &GameSpec;

    /// `theta_t[pi]` together with `V_t(pi, .)`. Fails when no converged
    /// solution exists at the belief.
    fn stage_solution(
        &self,
        stage: usize,
        belief: &Belief,
    ) -> Result<Arc<StageSolution>, SolveError>;

    /// `V_t^i(pi, x^i)`; zero past the horizon.
    fn value(
        &self,
        stage: usize,
        belief: &Belief,
        player: usize,
        xi: usize,
    ) -> Result<f64, SolveError> {
        if stage == self.spec().horizon() + 1 {
            return Ok(0.0);
        }
        Ok(self.stage_solution(stage, belief)?.values[player][xi])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Mode {
    Exact,
    Grid { resolution: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardOptions {
    pub mode: Mode,
    pub key_digits: u32,
    pub cache_budget: usize,
}

impl Default for BackwardOptions {
    fn default() -> Self {
        BackwardOptions {
            mode: Mode::Exact,
            key_digits: DEFAULT_KEY_DIGITS,
            cache_budget: 1_000_000,
        }
    }
}

#[derive(Debug)]
struct Entry {
    belief: Belief,
    solution: Arc<StageSolution>,
    values: Arc<AgentValues>,
    /// Set when this solve, or a later-stage solve it relies on, has no fixed point.
    failure: Option<SolveError>,
}

impl Entry {
    fn new(stage: usize, belief: Belief, solution: StageSolution) -> Self {
        let failure = (!solution.converged()).then(|| SolveError::NoFixedPoint {
            stage,
            belief: belief.weights().to_vec(),
            status: solution.status,
        });
        Self::with_failure(belief, solution, failure)
    }

    fn with_failure(belief: Belief, solution: StageSolution, failure: Option<SolveError>) -> Self {
        let values = Arc::new(solution.values.clone());
        Entry {
            belief,
            solution: Arc::new(solution),
            values,
            failure,
        }
    }

    fn checked(&self) -> Result<Arc<StageSolution>, SolveError> {
        match &self.failure {
            None => Ok(Arc::clone(&self.solution)),
            Some(e) => Err(e.clone()),
        }
    }
}

/// Exact-mode generator: a memo of stage solutions keyed by quantized belief.
pub struct ExactGenerator {
    spec: Arc<GameSpec>,
    config: SolverConfig,
    key_digits: u32,
    cache_budget: usize,
    cache: Mutex<HashMap<(usize, BeliefKey), Arc<Entry>>>,
    solves: Vec<AtomicUsize>,
}

struct ExactContinuation<'a> {
    generator: &'a ExactGenerator,
    stage: usize,
}

impl Continuation for ExactContinuation<'_> {
    fn values(&self, belief: &Belief) -> Result<Arc<AgentValues>, SolveError> {
        // best-effort values: transient iterates may visit beliefs without a
        // fixed point; only the final prescription's children are certified
        Ok(Arc::clone(
            &self.generator.entry(self.stage, belief)?.values,
        ))
    }
}

impl ExactGenerator {
    pub fn new(
        spec: Arc<GameSpec>,
        config: SolverConfig,
        key_digits: u32,
        cache_budget: usize,
    ) -> Self {
        let solves = (0..spec.horizon()).map(|_| AtomicUsize::new(0)).collect();
        ExactGenerator {
            spec,
            config,
            key_digits,
            cache_budget,
            cache: Mutex::new(HashMap::new()),
            solves,
        }
    }

    fn entry(&self, stage: usize, belief: &Belief) -> Result<Arc<Entry>, SolveError> {
        let horizon = self.spec.horizon();
        if stage == 0 || stage > horizon {
            return Err(SolveError::StageOutOfRange(stage));
        }
        let key = (stage, belief.key(self.key_digits));
        {
            let cache = self.cache.lock().expect("memo lock poisoned");
            if let Some(e) = cache.get(&key) {
                return Ok(Arc::clone(e));
            }
            if cache.len() >= self.cache_budget {
                return Err(SolveError::ResourceLimit(format!(
                    "belief cache reached its budget of {} entries",
                    self.cache_budget
                )));
            }
        }
        // the lock is released while solving: children recurse into the cache
        let entry = self.compute(stage, belief)?;
        let mut cache = self.cache.lock().expect("memo lock poisoned");
        if !cache.contains_key(&key) && cache.len() >= self.cache_budget {
            return Err(SolveError::ResourceLimit(format!(
                "belief cache reached its budget of {} entries",
                self.cache_budget
            )));
        }
        let entry = cache.entry(key).or_insert_with(|| Arc::new(entry));
        Ok(Arc::clone(entry))
    }

    fn insert(&self, stage: usize, entry: Entry) -> Result<Arc<Entry>, SolveError> {
        let key = (stage, entry.belief.key(self.key_digits));
        let mut cache = self.cache.lock().expect("memo lock poisoned");
        if !cache.contains_key(&key) && cache.len() >= self.cache_budget {
            return Err(SolveError::ResourceLimit(format!(
                "belief cache reached its budget of {} entries",
                self.cache_budget
            )));
        }
        let entry = Arc::new(entry);
        cache.insert(key, Arc::clone(&entry));
        Ok(entry)
    }

    fn stage_solve(&self, stage: usize, belief: &Belief) -> Result<StageSolution, SolveError> {
        self.solves[stage - 1].fetch_add(1, Ordering::Relaxed);
        if stage == self.spec.horizon() {
            solve_stage_fixed_point(
                &self.spec,
                stage,
                belief,
                &Terminal::new(&self.spec),
                &self.config,
            )
        } else {
            let next = ExactContinuation {
                generator: self,
                stage: stage + 1,
            };
            solve_stage_fixed_point(&self.spec, stage, belief, &next, &self.config)
        }
    }

    /// Solves at `belief` and certifies the children of the final prescription.
    ///
    /// A child may hit a memo entry left by a transient iterate whose belief
    /// shares the key but is not bit-identical. Such entries are re-solved at
    /// the exact child belief and replaced, and the prescription is
    /// re-evaluated against them, so that stored values agree with forward
    /// play along the exact beliefs.
    fn compute(&self, stage: usize, belief: &Belief) -> Result<Entry, SolveError> {
        let horizon = self.spec.horizon();
        let mut solution = self.stage_solve(stage, belief)?;
        if stage == horizon {
            return Ok(Entry::new(stage, belief.clone(), solution));
        }
        const REFRESH_ROUNDS: usize = 3;
        for round in 0..=REFRESH_ROUNDS {
            if !solution.converged() {
                break;
            }
            let mut refreshed = false;
            for a in 0..self.spec.actions().len() {
                let child = update(&self.spec, belief, &solution.prescription, a);
                let existing = self.entry(stage + 1, &child)?;
                if existing.belief != child && round < REFRESH_ROUNDS {
                    let fresh = self.compute(stage + 1, &child)?;
                    self.insert(stage + 1, fresh)?;
                    refreshed = true;
                }
            }
            if !refreshed {
                break;
            }
            let next = ExactContinuation {
                generator: self,
                stage: stage + 1,
            };
            match reevaluate(
                &self.spec,
                stage,
                belief,
                solution.clone(),
                &next,
                &self.config,
            )? {
                Some(s) => solution = s,
                None => solution = self.stage_solve(stage, belief)?,
            }
        }
        let mut entry = Entry::new(stage, belief.clone(), solution);
        if entry.failure.is_none() {
            for a in 0..self.spec.actions().len() {
                let child = update(&self.spec, belief, &entry.solution.prescription, a);
                if let Some(f) = &self.entry(stage + 1, &child)?.failure {
                    entry.failure = Some(f.clone());
                    break;
                }
            }
        }
        Ok(entry)
    }

    /// Seeds the memo with previously solved entries.
    pub fn preload(&self, stage: usize, belief: Belief, solution: StageSolution) {
        let key = (stage, belief.key(self.key_digits));
        self.cache
            .lock()
            .expect("memo lock poisoned")
            .insert(key, Arc::new(Entry::new(stage, belief, solution)));
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("memo lock poisoned").len()
    }

    /// Every memo entry ordered by (stage, key).
    pub fn entries(&self) -> Vec<(usize, Belief, Arc<StageSolution>)> {
        let cache = self.cache.lock().expect("memo lock poisoned");
        let mut keys: Vec<&(usize, BeliefKey)> = cache.keys().collect();
        keys.sort();
        keys.into_iter()
            .map(|k| {
                let e = &cache[k];
                (k.0, e.belief.clone(), Arc::clone(&e.solution))
            })
            .collect()
    }

    pub fn stage_solve_counts(&self) -> Vec<usize> {
        self.solves
            .iter()
            .map(|c| c.load(Ordering::Relaxed))
            .collect()
    }
}

impl Generator for ExactGenerator {
    fn spec(&self) -> &GameSpec {
        &self.spec
    }

    fn stage_solution(
        &self,
        stage: usize,
        belief: &Belief,
    ) -> Result<Arc<StageSolution>, SolveError> {
        self.entry(stage, belief)?.checked()
    }
}

/// Lattice points `k / G` of the probability simplex in lexicographic order.
pub fn simplex_grid(dim: usize, resolution: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, left: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            fill(prefix, left - k, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim > 0 {
        fill(&mut Vec::with_capacity(dim), resolution, dim, &mut out);
    }
    out
}

/// Grid-mode generator.
pub struct GridGenerator {
    spec: Arc<GameSpec>,
    resolution: usize,
    points: Vec<Belief>,
    /// `stages[t - 1][point]`
    stages: Vec<Vec<Arc<Entry>>>,
}

struct GridContinuation<'a> {
    points: &'a [Belief],
    entries: &'a [Arc<Entry>],
}

impl Continuation for GridContinuation<'_> {
    fn values(&self, belief: &Belief) -> Result<Arc<AgentValues>, SolveError> {
        Ok(Arc::clone(
            &self.entries[nearest_point(self.points, belief)].values,
        ))
    }
}

/// Index of the closest grid point in L1 distance; ties go to the smallest index.
pub fn nearest_point(points: &[Belief], belief: &Belief) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, p) in points.iter().enumerate() {
        let d: f64 = p
            .weights()
            .iter()
            .zip(belief.weights())
            .map(|(a, b)| (a - b).abs())
            .sum();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

impl GridGenerator {
    fn lattice(spec: &GameSpec, resolution: usize) -> Vec<Belief> {
        simplex_grid(spec.types().len(), resolution)
            .into_iter()
            .map(|p| {
                Belief::from_normalized(
                    p.into_iter()
                        .map(|k| k as f64 / resolution as f64)
                        .collect(),
                )
            })
            .collect()
    }

    fn build(
        spec: Arc<GameSpec>,
        config: &SolverConfig,
        resolution: usize,
    ) -> (Self, Vec<FailureRecord>) {
        let points = Self::lattice(&spec, resolution);
        let horizon = spec.horizon();
        let mut stages: Vec<Vec<Arc<Entry>>> = vec![Vec::new(); horizon];
        let mut failures = Vec::new();
        for stage in (1..=horizon).rev() {
            let solved: Vec<Result<StageSolution, SolveError>> = if stage == horizon {
                let terminal = Terminal::new(&spec);
                par::map(&points, |pi| {
                    solve_stage_fixed_point(&spec, stage, pi, &terminal, config)
                })
            } else {
                let next = GridContinuation {
                    points: &points,
                    entries: &stages[stage],
                };
                par::map(&points, |pi| {
                    solve_stage_fixed_point(&spec, stage, pi, &next, config)
                })
            };
            let mut entries = Vec::with_capacity(points.len());
            for (pi, result) in points.iter().zip(solved) {
                // grid continuations are infallible lookups
                let solution = result.expect("grid continuation cannot fail");
                if !solution.converged() {
                    failures.push(FailureRecord::stage(stage, pi, solution.status));
                }
                entries.push(Arc::new(Entry::new(stage, pi.clone(), solution)));
            }
            stages[stage - 1] = entries;
        }
        (
            GridGenerator {
                spec,
                resolution,
                points,
                stages,
            },
            failures,
        )
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn solution_at(&self, stage: usize, point: usize) -> &StageSolution {
        &self.stages[stage - 1][point].solution
    }

    /// Writes `theta` at every grid point as delimited text, one row per
    /// (stage, point, player, type).
    pub fn write_theta_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let max_actions = (0..self.spec.num_players())
            .map(|i| self.spec.actions().size(i))
            .max()
            .unwrap_or(0);
        let mut header = vec!["stage".to_string(), "point".to_string()];
        header.extend((0..self.spec.types().len()).map(|x| format!("pi_{x}")));
        header.extend(["player", "type", "status"].map(String::from));
        header.extend((0..max_actions).map(|a| format!("p_{a}")));
        header.push("value".into());
        w.write_record(&header)?;
        for (t, stage) in self.stages.iter().enumerate() {
            for (k, entry) in stage.iter().enumerate() {
                for i in 0..self.spec.num_players() {
                    for xi in 0..self.spec.types().size(i) {
                        let mut row = vec![(t + 1).to_string(), k.to_string()];
                        row.extend(entry.belief.weights().iter().map(|w| w.to_string()));
                        row.push(i.to_string());
                        row.push(xi.to_string());
                        row.push(format!("{:?}", entry.solution.status).to_lowercase());
                        let probs = entry.solution.prescription.row(i, xi);
                        row.extend(
                            (0..max_actions)
                                .map(|a| probs.get(a).map_or(String::new(), |p| p.to_string())),
                        );
                        row.push(entry.solution.values[i][xi].to_string());
                        w.write_record(&row)?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl Generator for GridGenerator {
    fn spec(&self) -> &GameSpec {
        &self.spec
    }

    fn stage_solution(
        &self,
        stage: usize,
        belief: &Belief,
    ) -> Result<Arc<StageSolution>, SolveError> {
        if stage == 0 || stage > self.spec.horizon() {
            return Err(SolveError::StageOutOfRange(stage));
        }
        self.stages[stage - 1][nearest_point(&self.points, belief)].checked()
    }
}

pub enum EquilibriumGenerator {
    Exact(ExactGenerator),
    Grid(GridGenerator),
}

impl Generator for EquilibriumGenerator {
    fn spec(&self) -> &GameSpec {
        match self {
            EquilibriumGenerator::Exact(g) => g.spec(),
            EquilibriumGenerator::Grid(g) => g.spec(),
        }
    }

    fn stage_solution(
        &self,
        stage: usize,
        belief: &Belief,
    ) -> Result<Arc<StageSolution>, SolveError> {
        match self {
            EquilibriumGenerator::Exact(g) => g.stage_solution(stage, belief),
            EquilibriumGenerator::Grid(g) => g.stage_solution(stage, belief),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    NoFixedPoint,
    ResourceLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub kind: FailureKind,
    pub stage: Option<usize>,
    pub belief: Option<Vec<f64>>,
    pub status: Option<StageStatus>,
    pub message: String,
}

impl FailureRecord {
    fn stage(stage: usize, belief: &Belief, status: StageStatus) -> Self {
        FailureRecord {
            kind: FailureKind::NoFixedPoint,
            stage: Some(stage),
            belief: Some(belief.weights().to_vec()),
            status: Some(status),
            message: format!("no fixed point at stage {stage}"),
        }
    }

    pub fn from_error(err: &SolveError) -> Self {
        match err {
            SolveError::NoFixedPoint {
                stage,
                belief,
                status,
            } => FailureRecord {
                kind: FailureKind::NoFixedPoint,
                stage: Some(*stage),
                belief: Some(belief.clone()),
                status: Some(*status),
                message: err.to_string(),
            },
            _ => FailureRecord {
                kind: FailureKind::ResourceLimit,
                stage: None,
                belief: None,
                status: None,
                message: err.to_string(),
            },
        }
    }
}

pub struct SolveOutcome {
    pub generator: EquilibriumGenerator,
    pub failures: Vec<FailureRecord>,
}

impl SolveOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn stage_solve_counts(&self) -> Vec<usize> {
        match &self.generator {
            EquilibriumGenerator::Exact(g) => g.stage_solve_counts(),
            EquilibriumGenerator::Grid(g) => g.stages.iter().map(Vec::len).collect(),
        }
    }

    pub fn report(&self, config: &SolverConfig, options: &BackwardOptions) -> SolveReport {
        let entries: Vec<ReportEntry> = match &self.generator {
            EquilibriumGenerator::Exact(g) => g
                .entries()
                .into_iter()
                .map(|(stage, belief, sol)| ReportEntry {
                    stage,
                    belief: belief.weights().to_vec(),
                    solution: (*sol).clone(),
                })
                .collect(),
            EquilibriumGenerator::Grid(g) => g
                .stages
                .iter()
                .enumerate()
                .flat_map(|(t, entries)| {
                    entries.iter().map(move |e| ReportEntry {
                        stage: t + 1,
                        belief: e.belief.weights().to_vec(),
                        solution: (*e.solution).clone(),
                    })
                })
                .collect(),
        };
        SolveReport {
            status: if self.succeeded() {
                "converged"
            } else {
                "failed"
            }
            .to_string(),
            options: options.clone(),
            config: config.clone(),
            stage_solve_counts: self.stage_solve_counts(),
            failures: self.failures.clone(),
            entries,
        }
    }
}

/// Backward recursion in the requested mode.
pub fn solve(
    spec: Arc<GameSpec>,
    config: &SolverConfig,
    options: &BackwardOptions,
) -> SolveOutcome {
    match options.mode {
        Mode::Exact => {
            let g = ExactGenerator::new(
                Arc::clone(&spec),
                config.clone(),
                options.key_digits,
                options.cache_budget,
            );
            let failures = match g.stage_solution(1, &initial_belief(&spec)) {
                Ok(_) => Vec::new(),
                Err(e) => vec![FailureRecord::from_error(&e)],
            };
            SolveOutcome {
                generator: EquilibriumGenerator::Exact(g),
                failures,
            }
        }
        Mode::Grid { resolution } => {
            let (g, failures) = GridGenerator::build(spec, config, resolution);
            SolveOutcome {
                generator: EquilibriumGenerator::Grid(g),
                failures,
            }
        }
    }
}

/// `V_t^i(pi, x^i)` from any generator.
pub fn value_lookup<G: Generator + ?Sized>(
    generator: &G,
    stage: usize,
    belief: &Belief,
    player: usize,
    xi: usize,
) -> Result<f64, SolveError> {
    generator.value(stage, belief, player, xi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub stage: usize,
    pub belief: Vec<f64>,
    #[serde(flatten)]
    pub solution: StageSolution,
}

/// Solve report; doubles as the serialized equilibrium generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: String,
    pub options: BackwardOptions,
    pub config: SolverConfig,
    pub stage_solve_counts: Vec<usize>,
    pub failures: Vec<FailureRecord>,
    pub entries: Vec<ReportEntry>,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Rebuilds a generator from the report's entries. Exact-mode generators
    /// extend lazily on beliefs the report does not cover.
    pub fn into_generator(self, spec: Arc<GameSpec>) -> Result<EquilibriumGenerator, String> {
        let belief_of = |w: Vec<f64>| -> Result<Belief, String> {
            if w.len() != spec.types().len() {
                return Err(format!(
                    "belief of length {} for {} joint types",
                    w.len(),
                    spec.types().len()
                ));
            }
            Ok(Belief::from_normalized(w))
        };
        match self.options.mode {
            Mode::Exact => {
                let g = ExactGenerator::new(
                    Arc::clone(&spec),
                    self.config,
                    self.options.key_digits,
                    self.options.cache_budget,
                );
                for e in self.entries {
                    if e.stage == 0 || e.stage > spec.horizon() {
                        return Err(format!("entry stage {} outside the horizon", e.stage));
                    }
                    g.preload(e.stage, belief_of(e.belief)?, e.solution);
                }
                Ok(EquilibriumGenerator::Exact(g))
            }
            Mode::Grid { resolution } => {
                let points = GridGenerator::lattice(&spec, resolution);
                if self.entries.len() != points.len() * spec.horizon() {
                    return Err("grid report does not cover every grid point".into());
                }
                let mut stages: Vec<Vec<Arc<Entry>>> = vec![Vec::new(); spec.horizon()];
                for e in self.entries {
                    if e.stage == 0 || e.stage > spec.horizon() {
                        return Err(format!("entry stage {} outside the horizon", e.stage));
                    }
                    stages[e.stage - 1].push(Arc::new(Entry::new(
                        e.stage,
                        belief_of(e.belief)?,
                        e.solution,
                    )));
                }
                if stages.iter().any(|s| s.len() != points.len()) {
                    return Err("grid report stage sizes do not match the lattice".into());
                }
                Ok(EquilibriumGenerator::Grid(GridGenerator {
                    spec,
                    resolution,
                    points,
                    stages,
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::{numeric_labels, RewardSchedule};

    #[test]
    fn grid_sizes_and_order() {
        let g = simplex_grid(4, 10);
        assert_eq!(g.len(), 286);
        assert_eq!(g[0], vec![0, 0, 0, 10]);
        assert_eq!(g.last().unwrap(), &vec![10, 0, 0, 0]);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.iter().all(|p| p.iter().sum::<usize>() == 10));
        assert_eq!(simplex_grid(1, 3), vec![vec![3]]);
    }

    #[test]
    fn nearest_point_ties_to_first() {
        let pts: Vec<Belief> = [[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]]
            .iter()
            .map(|p| Belief::new(p.to_vec()).unwrap())
            .collect();
        assert_eq!(
            nearest_point(&pts, &Belief::new(vec![0.25, 0.75]).unwrap()),
            0
        );
        assert_eq!(
            nearest_point(&pts, &Belief::new(vec![0.5, 0.5]).unwrap()),
            1
        );
        assert_eq!(
            nearest_point(&pts, &Belief::new(vec![0.8, 0.2]).unwrap()),
            2
        );
    }

    fn zero_game(horizon: usize) -> Arc<GameSpec> {
        let labels = vec![numeric_labels(2), numeric_labels(2)];
        Arc::new(
            GameSpec::new(
                horizon,
                labels.clone(),
                labels,
                vec![0.4, 0.1, 0.1, 0.4],
                RewardSchedule::Stationary(vec![vec![0.0; 16], vec![0.0; 16]]),
                1.0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let spec = zero_game(2);
        let config = SolverConfig::default();
        let out = solve(Arc::clone(&spec), &config, &BackwardOptions::default());
        assert!(out.succeeded());
        let pi = initial_belief(&spec);
        for i in 0..2 {
            for xi in 0..2 {
                assert_eq!(value_lookup(&out.generator, 1, &pi, i, xi).unwrap(), 0.0);
                assert_eq!(value_lookup(&out.generator, 3, &pi, i, xi).unwrap(), 0.0);
            }
        }
        let sol = out.generator.stage_solution(1, &pi).unwrap();
        assert_eq!(sol.prescription.row(0, 0), &[1.0, 0.0]);
    }

    #[test]
    fn horizon_one_is_a_single_stage_solve() {
        let spec = zero_game(1);
        let out = solve(
            Arc::clone(&spec),
            &SolverConfig::default(),
            &BackwardOptions::default(),
        );
        assert_eq!(out.stage_solve_counts(), vec![1]);
        assert_eq!(
            out.generator
                .stage_solution(2, &initial_belief(&spec))
                .unwrap_err(),
            SolveError::StageOutOfRange(2)
        );
    }

    #[test]
    fn cache_budget_is_enforced() {
        let spec = zero_game(2);
        let options = BackwardOptions {
            cache_budget: 1,
            ..BackwardOptions::default()
        };
        let out = solve(spec, &SolverConfig::default(), &options);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].kind, FailureKind::ResourceLimit);
    }

    #[test]
    fn grid_lookup_at_grid_point_is_exact() {
        let spec = zero_game(1);
        let out = solve(
            Arc::clone(&spec),
            &SolverConfig::default(),
            &BackwardOptions {
                mode: Mode::Grid { resolution: 2 },
                ..BackwardOptions::default()
            },
        );
        let EquilibriumGenerator::Grid(g) = &out.generator else {
            unreachable!()
        };
        assert_eq!(g.points().len(), 10);
        for (k, p) in g.points().iter().enumerate() {
            assert_eq!(*g.stage_solution(1, p).unwrap(), *g.solution_at(1, k));
        }
    }
}
