use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

use spbe_core::backward::{solve as backward_solve, FailureKind, FailureRecord};
use spbe_core::forward::{write_traces_csv, SimulationSummary, Trace};
use spbe_core::verifier::{
    certificate, check_strategy_independence, instance_digest, verify_one_shot, verify_pbe,
    Certificate,
};
use spbe_core::{
    BackwardOptions, EquilibriumGenerator, EquilibriumPolicy, GameSpec, SolveReport, SolverConfig,
    SpecError,
};

use crate::failure::{Failure, Kind};

pub enum PolicySource {
    File(PathBuf),
    Solve(SolverConfig, BackwardOptions),
}

pub struct VerifyChecks {
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
    pub history_limit: f64,
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, doc: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn spec_failure(path: &Path, err: SpecError) -> Failure {
    let details = match &err {
        SpecError::Malformed(e) => json!({ "line": e.line(), "column": e.column() }),
        SpecError::Field { field, .. } => json!({ "field": field }),
        SpecError::Invalid(report) => Value::Array(
            report
                .violations
                .iter()
                .map(|v| json!({ "field": v.field, "message": v.message }))
                .collect(),
        ),
    };
    Failure::new(Kind::ParseError, format!("{}: {err}", path.display())).with_details(json!({
        "path": path.display().to_string(),
        "problems": details,
    }))
}

fn load_game(path: &Path) -> anyhow::Result<Arc<GameSpec>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    GameSpec::parse(&text)
        .map(Arc::new)
        .map_err(|e| spec_failure(path, e).into())
}

fn failures_error(failures: &[FailureRecord]) -> Failure {
    let kind = if failures
        .iter()
        .any(|f| f.kind == FailureKind::ResourceLimit)
    {
        Kind::ResourceLimit
    } else {
        Kind::NoFixedPoint
    };
    Failure::new(
        kind,
        format!(
            "{} stage solve(s) failed; first: {}",
            failures.len(),
            failures[0].message
        ),
    )
    .with_details(json!({ "failures": failures }))
}

fn load_policy(
    spec: &Arc<GameSpec>,
    source: &PolicySource,
) -> anyhow::Result<EquilibriumGenerator> {
    match source {
        PolicySource::Solve(config, options) => {
            let outcome = backward_solve(Arc::clone(spec), config, options);
            if !outcome.succeeded() {
                return Err(failures_error(&outcome.failures).into());
            }
            Ok(outcome.generator)
        }
        PolicySource::File(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let report = SolveReport::from_json(&text).map_err(|e| {
                Failure::new(Kind::ParseError, format!("{}: malformed solve report: {e}", path.display()))
                    .with_details(json!({ "path": path.display().to_string(), "line": e.line(), "column": e.column() }))
            })?;
            if !report.failures.is_empty() {
                return Err(failures_error(&report.failures).into());
            }
            report.into_generator(Arc::clone(spec)).map_err(|m| {
                Failure::new(Kind::ParseError, format!("{}: {m}", path.display()))
                    .with_details(json!({ "path": path.display().to_string() }))
                    .into()
            })
        }
    }
}

fn solve_error(err: spbe_core::SolveError) -> anyhow::Error {
    Failure::from_solve_error(&err).into()
}

pub fn validate(game: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let spec = load_game(game)?;
    let stationary = matches!(
        spec.rewards(),
        spbe_core::game_model::RewardSchedule::Stationary(_)
    );
    emit_json(
        out,
        &json!({
            "valid": true,
            "players": spec.num_players(),
            "horizon": spec.horizon(),
            "types": spec.types().sizes(),
            "actions": spec.actions().sizes(),
            "joint_types": spec.types().len(),
            "joint_actions": spec.actions().len(),
            "stationary_rewards": stationary,
            "discount": spec.discount(),
            "instance_digest": instance_digest(&spec),
        }),
    )
}

pub fn solve(
    game: &Path,
    config: &SolverConfig,
    options: &BackwardOptions,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let spec = load_game(game)?;
    let outcome = backward_solve(spec, config, options);
    let mut text = outcome.report(config, options).to_json();
    text.push('\n');
    emit(out, text.as_bytes())?;
    if outcome.succeeded() {
        Ok(())
    } else {
        Err(failures_error(&outcome.failures).into())
    }
}

#[derive(Serialize)]
struct SimulationDocument<'a> {
    summary: &'a SimulationSummary,
    traces: &'a [Trace],
}

pub fn simulate(
    game: &Path,
    source: &PolicySource,
    seed: u64,
    episodes: usize,
    out: Option<&Path>,
    traces_csv: Option<&Path>,
) -> anyhow::Result<()> {
    let spec = load_game(game)?;
    let generator = load_policy(&spec, source)?;
    let sim = EquilibriumPolicy::new(&generator)
        .simulate(seed, episodes)
        .map_err(solve_error)?;
    if let Some(path) = traces_csv {
        let file =
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_traces_csv(&spec, &sim.traces, file)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    emit_json(
        out,
        &SimulationDocument {
            summary: &sim.summary,
            traces: &sim.traces,
        },
    )
}

fn certify(
    generator: &EquilibriumGenerator,
    checks: &VerifyChecks,
) -> Result<Certificate, spbe_core::SolveError> {
    let policy = EquilibriumPolicy::new(generator);
    let spec = policy.spec();
    let pbe = verify_pbe(&policy, checks.tolerance, checks.history_limit)?;
    let one_shot = verify_one_shot(&policy, checks.tolerance, checks.history_limit)?;
    let mut independence = Vec::new();
    if checks.samples > 0 {
        for player in 0..spec.num_players() {
            for stage in 1..=spec.horizon() {
                independence.push(check_strategy_independence(
                    &policy,
                    player,
                    stage,
                    checks.samples,
                    checks.seed,
                    checks.history_limit,
                )?);
            }
        }
    }
    Ok(certificate(spec, &pbe, &one_shot, independence))
}

pub fn verify(
    game: &Path,
    source: &PolicySource,
    checks: &VerifyChecks,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let spec = load_game(game)?;
    let generator = load_policy(&spec, source)?;
    let cert = certify(&generator, checks).map_err(solve_error)?;
    emit_json(out, &cert)?;
    if cert.passed {
        return Ok(());
    }
    let failing: Vec<_> = cert
        .strategy_independence
        .iter()
        .filter(|r| !r.passed)
        .collect();
    Err(Failure::new(
        Kind::VerificationFailure,
        format!(
            "certificate failed: max deviation gain {:e} against tolerance {:e}",
            cert.max_gain, cert.tolerance
        ),
    )
    .with_details(json!({
        "max_gain": cert.max_gain,
        "max_gain_per_player": cert.max_gain_per_player,
        "worst_history": cert.worst_history,
        "worst_history_labels": cert.worst_history_labels,
        "one_shot": cert.one_shot,
        "failing_independence_checks": failing,
    }))
    .into())
}

pub fn export(game: &Path, source: &PolicySource, out: Option<&Path>) -> anyhow::Result<()> {
    let spec = load_game(game)?;
    let EquilibriumGenerator::Grid(grid) = load_policy(&spec, source)? else {
        return Err(Failure::new(Kind::Usage, "export needs a grid-mode policy").into());
    };
    let mut buffer = Vec::new();
    grid.write_theta_csv(&mut buffer)
        .context("writing the policy table")?;
    emit(out, &buffer)
}
