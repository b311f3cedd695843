//! Command dispatch for the `kpp-lab` binary.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::asymptotics::{pullback_positive_solution, PullbackDomain, PullbackOptions};
use crate::coefficients::KppReaction;
use crate::config::{Command, ConfigErrors, ExperimentConfig};
use crate::dichotomy::{
    critical_mu, run_and_classify, sweep, verdict_table, FrontSetup, SweepGrid, Thresholds,
};
use crate::error::Error;
use crate::lyapunov::{self, critical_length, principal_lyapunov, LyapunovOptions};
use crate::output::{atomic_write, emit_plotdata, Table};
use crate::parabolic::{write_snapshots_csv, BcTag};
use crate::stefan::{run_until, FrontState, FrontTrajectory, Stagnation, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

/// Failure of a CLI run, carrying everything the error JSON needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub kind: ErrorKind,
    pub code: &'static str,
    pub message: String,
    pub context: serde_json::Value,
}

impl RunError {
    pub fn config(errors: &ConfigErrors) -> Self {
        Self {
            kind: ErrorKind::Config,
            code: "config",
            message: errors.to_string(),
            context: json!({ "violations": errors.0 }),
        }
    }

    fn io(path: &Path, e: &std::io::Error) -> Self {
        Self {
            kind: ErrorKind::Io,
            code: "io",
            message: format!("{}: {e}", path.display()),
            context: json!({ "path": path.display().to_string() }),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Numerical | ErrorKind::Io => 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&json!({
            "code": self.code,
            "message": self.message,
            "context": self.context,
        }))
        .expect("json value serializes")
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for RunError {}

fn error_code(e: &Error) -> &'static str {
    match e.root() {
        Error::InvalidCoefficient(_) => "invalid_coefficient",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::ZeroPivot { .. } => "zero_pivot",
        Error::NegativeOvershoot { .. } => "negative_overshoot",
        Error::NonFinite { .. } => "non_finite",
        Error::LostPositivity { .. } => "lost_positivity",
        Error::NotConverged { .. } => "not_converged",
        Error::PullbackNotConverged { .. } => "pullback_not_converged",
        Error::BadBracket(_) => "bad_bracket",
        Error::FrontReversed { .. } => "front_reversed",
        Error::NotPositive(_) => "not_positive",
        Error::NegativeExponent(_) => "negative_exponent",
        Error::Undetermined(_) => "undetermined",
        Error::Monotonicity(_) => "monotonicity",
        Error::Partial { .. } => unreachable!("root strips partial wrappers"),
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let kind = match e.root() {
            Error::InvalidCoefficient(_) | Error::InvalidArgument(_) => ErrorKind::Config,
            _ => ErrorKind::Numerical,
        };
        let context = match &e {
            Error::Partial { steps, time, .. } => json!({ "steps": steps, "time": time }),
            _ => json!({}),
        };
        Self {
            kind,
            code: error_code(&e),
            message: e.to_string(),
            context,
        }
    }
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

struct Outputs<'a> {
    dir: &'a Path,
    summary: RunSummary,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        atomic_write(&path, bytes).map_err(|e| RunError::io(&path, &e))?;
        self.summary.files.push(path);
        Ok(())
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        self.write(name, table.to_csv_string().as_bytes())
    }

    fn plot(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        let path = self.dir.join(name);
        emit_plotdata(table, &path).map_err(|e| RunError::io(&path, &e))?;
        self.summary.files.push(path);
        Ok(())
    }

    fn say(&mut self, line: String) {
        self.summary.lines.push(line);
    }
}

fn pick<'a>(chosen: &'a Option<String>, default: &'a str) -> &'a str {
    chosen.as_deref().unwrap_or(default)
}

fn lyapunov_options(cfg: &ExperimentConfig) -> LyapunovOptions {
    LyapunovOptions {
        dt: cfg.numerics.dt,
        cells_per_unit: cfg.numerics.n.unwrap_or(256),
        horizon: cfg.numerics.horizon,
        window: cfg.numerics.window,
        spread_tolerance: None,
    }
}

/// Critical length of the mixed problem: given, closed form, or by bisection.
fn l_star(cfg: &ExperimentConfig) -> Result<f64, RunError> {
    if let Some(l) = cfg.problem.l_star {
        return Ok(l);
    }
    if let Some(mean) = cfg.a.time_mean() {
        if mean <= 0.0 {
            return Err(Error::NegativeExponent(format!(
                "mean growth rate {mean} admits no critical length"
            ))
            .into());
        }
        return Ok(FRAC_PI_2 / mean.sqrt());
    }
    let bracket = cfg.problem.bracket.unwrap_or((0.5, 10.0));
    let r = critical_length(
        &cfg.a,
        BcTag::NeumannLeftDirichletRight,
        1e-3,
        bracket,
        &lyapunov_options(cfg),
    )?;
    Ok(r.value)
}

fn stop_rule(cfg: &ExperimentConfig, h_max: f64) -> StopRule {
    let t = &cfg.thresholds;
    StopRule {
        t_max: t.t_max,
        h_max: t.h_max.unwrap_or(h_max),
        stagnation: Some(Stagnation {
            speed: t.speed,
            amplitude: t.amplitude,
            window: t.window,
        }),
        dt: cfg.numerics.dt,
        record_interval: t.record_interval,
        snapshot_times: cfg.problem.snapshot_times.clone(),
    }
}

fn front_setup(cfg: &ExperimentConfig) -> Result<FrontSetup, RunError> {
    let l_star = l_star(cfg)?;
    let thresholds = Thresholds {
        speed: cfg.thresholds.speed,
        amplitude: cfg.thresholds.amplitude,
        margin: cfg.thresholds.margin,
    };
    let mut setup = FrontSetup::new(l_star);
    let reference = if cfg.problem.g0.is_some() {
        2.0 * l_star
    } else {
        l_star
    };
    setup.stop = stop_rule(cfg, reference + thresholds.margin_for(reference));
    setup.thresholds = thresholds;
    setup.cells = cfg.numerics.n.unwrap_or(256);
    Ok(setup)
}

fn initial_front(cfg: &ExperimentConfig, mu: f64) -> Result<FrontState, RunError> {
    let p = &cfg.problem;
    let h0 = p.h0.expect("checked by require");
    let cells = cfg.numerics.n.unwrap_or(256);
    Ok(match p.g0 {
        Some(g0) => FrontState::double_cosine(g0, h0, mu, p.amplitude, cells)?,
        None => FrontState::single_cosine(h0, mu, p.amplitude, cells)?,
    })
}

fn write_trajectory(
    out: &mut Outputs<'_>,
    cfg: &ExperimentConfig,
    traj: &FrontTrajectory,
) -> Result<(), RunError> {
    out.table(pick(&cfg.output.csv, "trajectory.csv"), &traj.table())?;
    let mut series = Table::new(["t", "h"]);
    for (&t, &h) in traj.times.iter().zip(&traj.h) {
        series.push(vec![t.into(), h.into()]);
    }
    out.plot(pick(&cfg.output.plotdata, "trajectory.dat"), &series)?;
    if !traj.snapshots.is_empty() {
        out.table(
            pick(&cfg.output.snapshots, "snapshots.csv"),
            &traj.snapshot_table(),
        )?;
    }
    Ok(())
}

fn run_lyapunov(cfg: &ExperimentConfig, out: &mut Outputs<'_>) -> Result<(), RunError> {
    let l = cfg.problem.l.expect("checked by require");
    let (est, profile) = principal_lyapunov(
        &cfg.a,
        l,
        cfg.problem.bc,
        cfg.problem.drift,
        &lyapunov_options(cfg),
    )?;
    let mut csv = Vec::new();
    csv.extend_from_slice(lyapunov::CSV_HEADER.as_bytes());
    csv.push(b'\n');
    lyapunov::write_csv_row(&mut csv, l, cfg.problem.bc, cfg.problem.drift, &est)
        .expect("write to vec");
    out.write(pick(&cfg.output.csv, "lyapunov.csv"), &csv)?;
    let mut table = Table::new(["x", "v"]);
    for (j, &v) in profile.0.values.iter().enumerate() {
        table.push(vec![profile.0.mesh.x(j).into(), v.into()]);
    }
    out.plot(pick(&cfg.output.plotdata, "lyapunov_profile.dat"), &table)?;
    out.say(format!(
        "lambda = {} (l = {l}, bc = {})",
        est.value, cfg.problem.bc
    ));
    Ok(())
}

fn run_critical_length(cfg: &ExperimentConfig, out: &mut Outputs<'_>) -> Result<(), RunError> {
    let bracket = cfg.problem.bracket.unwrap_or((0.5, 10.0));
    let tol = cfg.problem.tol.unwrap_or(1e-3);
    let bc = cfg.problem.bc;
    let r = critical_length(&cfg.a, bc, tol, bracket, &lyapunov_options(cfg))?;
    let mut table = Table::new(["l", "value"]);
    for &(l, v) in &r.probes {
        table.push(vec![l.into(), v.into()]);
    }
    out.table(pick(&cfg.output.csv, "critical_length.csv"), &table)?;
    let summary = json!({ "value": r.value, "lo": r.lo, "hi": r.hi, "bc": bc.name() });
    out.write(
        pick(&cfg.output.json, "critical_length.json"),
        serde_json::to_string_pretty(&summary)
            .expect("json")
            .as_bytes(),
    )?;
    out.say(format!(
        "critical length = {} in ({}, {})",
        r.value, r.lo, r.hi
    ));
    Ok(())
}

fn run_front(
    cfg: &ExperimentConfig,
    f: &KppReaction,
    out: &mut Outputs<'_>,
) -> Result<(), RunError> {
    let mu = cfg.problem.mu.expect("checked by require");
    let state = initial_front(cfg, mu)?;
    let stop = stop_rule(cfg, f64::INFINITY);
    match run_until(state, f, &stop) {
        Ok(traj) => {
            write_trajectory(out, cfg, &traj)?;
            out.say(format!(
                "stopped on {} at t = {} with extent {}",
                traj.stop_reason.map_or("error", |r| r.name()),
                traj.final_state.time,
                traj.final_extent()
            ));
            Ok(())
        }
        Err(failure) => {
            write_trajectory(out, cfg, &failure.partial)?;
            Err(Error::from(failure).into())
        }
    }
}

fn run_pullback(
    cfg: &ExperimentConfig,
    f: &KppReaction,
    out: &mut Outputs<'_>,
) -> Result<(), RunError> {
    let domain = match cfg.problem.l {
        Some(length) => PullbackDomain::Bounded { length },
        None => match cfg.numerics.truncation {
            Some(truncation) => PullbackDomain::HalfLine { truncation },
            None => PullbackDomain::half_line(l_star(cfg)?),
        },
    };
    let defaults = PullbackOptions::default();
    let opts = PullbackOptions {
        depths: if cfg.problem.depths.is_empty() {
            defaults.depths
        } else {
            cfg.problem.depths.clone()
        },
        tol: cfg.problem.tol.unwrap_or(defaults.tol),
        dt: cfg.numerics.dt,
        cells_per_unit: cfg.numerics.n.unwrap_or(defaults.cells_per_unit),
        target_time: cfg.problem.target_time,
    };
    let r = pullback_positive_solution(f, domain, &opts)?;
    out.table(pick(&cfg.output.csv, "pullback.csv"), &r.table())?;
    let mut csv = Vec::new();
    write_snapshots_csv(&mut csv, std::slice::from_ref(&r.profile)).expect("write to vec");
    out.write(pick(&cfg.output.snapshots, "pullback_profile.csv"), &csv)?;
    let mut table = Table::new(["x", "u"]);
    for (j, &u) in r.profile.values.iter().enumerate() {
        table.push(vec![r.profile.mesh.x(j).into(), u.into()]);
    }
    out.plot(pick(&cfg.output.plotdata, "pullback_profile.dat"), &table)?;
    out.say(format!(
        "pullback converged at depth {} (change {:e}, interior inf {})",
        r.depth, r.change, r.inf_interior
    ));
    Ok(())
}

fn run_classify(
    cfg: &ExperimentConfig,
    f: &KppReaction,
    out: &mut Outputs<'_>,
) -> Result<(), RunError> {
    let setup = front_setup(cfg)?;
    let mu = cfg.problem.mu.expect("checked by require");
    let (verdict, traj) = run_and_classify(f, initial_front(cfg, mu)?, &setup)?;
    out.write(
        pick(&cfg.output.json, "verdict.json"),
        serde_json::to_string_pretty(&verdict)
            .expect("json")
            .as_bytes(),
    )?;
    write_trajectory(out, cfg, &traj)?;
    out.say(format!("{} ({})", verdict.outcome, verdict.fingerprint));
    Ok(())
}

fn run_critical_mu(
    cfg: &ExperimentConfig,
    f: &KppReaction,
    out: &mut Outputs<'_>,
) -> Result<(), RunError> {
    let setup = front_setup(cfg)?;
    let p = &cfg.problem;
    let h0 = p.h0.expect("checked by require");
    let bracket = p.bracket.expect("checked by require");
    let r = critical_mu(f, h0, p.amplitude, bracket, p.tol.unwrap_or(1e-2), &setup)?;
    out.write(
        pick(&cfg.output.json, "critical_mu.json"),
        r.to_json().as_bytes(),
    )?;
    let mut table = Table::new(["mu", "outcome", "final_h"]);
    for probe in &r.probes {
        table.push(vec![
            probe.mu.into(),
            probe.outcome.name().into(),
            probe.final_h.into(),
        ]);
    }
    out.table(pick(&cfg.output.csv, "critical_mu.csv"), &table)?;
    out.say(format!("mu* in ({}, {})", r.mu_lo, r.mu_hi));
    Ok(())
}

fn run_sweep(
    cfg: &ExperimentConfig,
    f: &KppReaction,
    jobs: Option<usize>,
    out: &mut Outputs<'_>,
) -> Result<(), RunError> {
    let spec = cfg.sweep.as_ref().expect("checked by require");
    let setup = front_setup(cfg)?;
    let grid = SweepGrid {
        mu: spec.mu.clone(),
        h0: spec.h0.clone(),
        amplitude: spec.amplitude.clone(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = jobs {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| RunError {
        kind: ErrorKind::Config,
        code: "jobs",
        message: format!("cannot start {jobs:?} worker threads: {e}"),
        context: json!({}),
    })?;
    let rows = pool.install(|| sweep(&grid, f, &setup));
    let table = verdict_table(&rows);
    out.table(pick(&cfg.output.csv, "verdicts.csv"), &table)?;
    out.plot(pick(&cfg.output.plotdata, "verdicts.dat"), &table)?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    out.say(format!("{} cells classified, {failed} failed", rows.len()));
    Ok(())
}

/// Runs `command` (or the config's own command) writing outputs under `out_dir`.
pub fn run(
    cfg: &ExperimentConfig,
    command: Option<Command>,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<RunSummary, RunError> {
    let command = match (command, cfg.command) {
        (Some(a), Some(b)) if a != b => {
            return Err(RunError::config(&ConfigErrors(vec![format!(
                "command {a} given but the config declares {b}"
            )])))
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => {
            return Err(RunError::config(&ConfigErrors(vec![
                "no command given on the command line or in the config".into(),
            ])))
        }
    };
    cfg.require(command).map_err(|e| RunError::config(&e))?;
    let f = cfg.reaction()?;
    let mut out = Outputs {
        dir: out_dir,
        summary: RunSummary::default(),
    };
    let result = match command {
        Command::Lyapunov => run_lyapunov(cfg, &mut out),
        Command::CriticalLength => run_critical_length(cfg, &mut out),
        Command::Simulate | Command::DoubleFront => run_front(cfg, &f, &mut out),
        Command::Pullback => run_pullback(cfg, &f, &mut out),
        Command::Classify => run_classify(cfg, &f, &mut out),
        Command::CriticalMu => run_critical_mu(cfg, &f, &mut out),
        Command::Sweep => run_sweep(cfg, &f, jobs, &mut out),
    };
    result.map_err(|mut e| {
        if let Some(obj) = e.context.as_object_mut() {
            obj.insert("command".into(), json!(command.name()));
        }
        e
    })?;
    Ok(out.summary)
}
