//! Experiment configuration files.
//!
//! A config is a TOML document with a fixed set of sections:
//!
//! ```toml
//! command = "simulate"
//!
//! [a]                     # a(t, x); [b] has the same keys and defaults to 1
//! mean = 1.0
//! sin = [[0.5, 1.0]]      # amplitude, frequency
//! cos = [[0.2, 3.0, 0.0]] # amplitude, frequency, phase
//! period = 2.0            # spatial period, needed with `spatial`
//! spatial = [[0.1, 1, 0.0]] # amplitude, index, phase
//!
//! [numerics]
//! n = 256
//! dt = 0.00390625
//!
//! [problem]
//! h0 = 2.0
//! mu = 1.0
//! ```
//!
//! Unknown keys are rejected; every violation is reported, not just the first.

use std::fmt;
use std::str::FromStr;

use toml::{Table, Value};

use crate::coefficients::{
    KppReaction, Mode, QuasiPeriodicSignal, SeparableCoefficient, SpatialMode, SpatialProfile,
};
use crate::parabolic::BcTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Lyapunov,
    CriticalLength,
    Simulate,
    DoubleFront,
    Pullback,
    Classify,
    CriticalMu,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Lyapunov,
        Command::CriticalLength,
        Command::Simulate,
        Command::DoubleFront,
        Command::Pullback,
        Command::Classify,
        Command::CriticalMu,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Lyapunov => "lyapunov",
            Command::CriticalLength => "critical-length",
            Command::Simulate => "simulate",
            Command::DoubleFront => "double-front",
            Command::Pullback => "pullback",
            Command::Classify => "classify",
            Command::CriticalMu => "critical-mu",
            Command::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                format!("unknown command \"{s}\"{}", suggestion(s, &names))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    /// Cells per unit length on fixed domains; cells on the reference interval
    /// for fronts. Each command has its own default.
    pub n: Option<usize>,
    pub dt: f64,
    pub horizon: f64,
    pub window: f64,
    pub truncation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub l: Option<f64>,
    pub bc: BcTag,
    pub drift: f64,
    pub h0: Option<f64>,
    pub g0: Option<f64>,
    pub mu: Option<f64>,
    /// Height of the cosine initial profile.
    pub amplitude: f64,
    pub bracket: Option<(f64, f64)>,
    pub tol: Option<f64>,
    pub l_star: Option<f64>,
    pub depths: Vec<f64>,
    pub target_time: f64,
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSpec {
    pub speed: f64,
    pub amplitude: f64,
    pub margin: Option<f64>,
    pub window: f64,
    pub t_max: f64,
    pub h_max: Option<f64>,
    pub record_interval: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub mu: Vec<f64>,
    pub h0: Vec<f64>,
    pub amplitude: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub csv: Option<String>,
    pub json: Option<String>,
    pub plotdata: Option<String>,
    pub snapshots: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub a: SeparableCoefficient,
    pub b: SeparableCoefficient,
    pub numerics: Numerics,
    pub problem: Problem,
    pub thresholds: ThresholdSpec,
    pub sweep: Option<SweepSpec>,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn reaction(&self) -> crate::Result<KppReaction> {
        KppReaction::new(self.a.clone(), self.b.clone())
    }

    /// Checks that everything `command` needs is present.
    pub fn require(&self, command: Command) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        let p = &self.problem;
        let mut need = |present: bool, key: &str| {
            if !present {
                errs.push(format!("{command} needs problem.{key}"));
            }
        };
        match command {
            Command::Lyapunov => need(p.l.is_some(), "l"),
            Command::CriticalLength | Command::Pullback => {}
            Command::Simulate | Command::Classify | Command::CriticalMu => {
                need(p.h0.is_some(), "h0");
                if command != Command::CriticalMu {
                    need(p.mu.is_some(), "mu");
                }
            }
            Command::DoubleFront => {
                need(p.h0.is_some(), "h0");
                need(p.g0.is_some(), "g0");
                need(p.mu.is_some(), "mu");
            }
            Command::Sweep => {
                if self.sweep.is_none() {
                    errs.push("sweep needs a [sweep] section".into());
                }
            }
        }
        if command == Command::CriticalMu && p.bracket.is_none() {
            errs.push("critical-mu needs problem.bracket".into());
        }
        if let (Some(g0), Some(h0)) = (p.g0, p.h0) {
            if g0 >= h0 {
                errs.push(format!("problem.g0 = {g0} must be below problem.h0 = {h0}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }
}

/// Every violation found in a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

fn suggestion(key: &str, known: &[&str]) -> String {
    known
        .iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .filter(|&(d, _)| d <= 2)
        .min()
        .map(|(_, k)| format!(" (did you mean \"{k}\"?)"))
        .unwrap_or_default()
}

struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    errs: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_owned()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn check_keys(&mut self, known: &[&str]) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !known.contains(&key.as_str()) {
                    let msg = format!(
                        "unknown key \"{}\"{}",
                        self.path(key),
                        suggestion(key, known)
                    );
                    self.errs.push(msg);
                }
            }
        }
    }

    fn value(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        let v = self.value(key)?;
        match number(v) {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                let msg = format!("{} must be a finite number", self.path(key));
                self.errs.push(msg);
                None
            }
        }
    }

    /// A number satisfying `ok`; `what` describes the allowed range.
    fn checked(&mut self, key: &str, ok: impl Fn(f64) -> bool, what: &str) -> Option<f64> {
        let x = self.float(key)?;
        if ok(x) {
            Some(x)
        } else {
            let msg = format!("{} = {x} must be {what}", self.path(key));
            self.errs.push(msg);
            None
        }
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        self.checked(key, |x| x > 0.0, "positive")
    }

    fn string(&mut self, key: &str) -> Option<&'a str> {
        let v = self.value(key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                let msg = format!("{} must be a string", self.path(key));
                self.errs.push(msg);
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.value(key)?;
        let parsed = v
            .as_array()
            .and_then(|a| a.iter().map(number).collect::<Option<Vec<f64>>>());
        if parsed.is_none() {
            let msg = format!("{} must be an array of numbers", self.path(key));
            self.errs.push(msg);
        }
        parsed
    }

    /// Array of fixed-length number rows.
    fn rows(&mut self, key: &str, width: usize) -> Vec<Vec<f64>> {
        let Some(v) = self.value(key) else {
            return Vec::new();
        };
        let parsed = v.as_array().and_then(|a| {
            a.iter()
                .map(|row| {
                    row.as_array()
                        .filter(|r| r.len() == width)
                        .and_then(|r| r.iter().map(number).collect::<Option<Vec<f64>>>())
                })
                .collect::<Option<Vec<_>>>()
        });
        match parsed {
            Some(rows) => rows,
            None => {
                let msg = format!(
                    "{} must be an array of {width}-number arrays",
                    self.path(key)
                );
                self.errs.push(msg);
                Vec::new()
            }
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

const TOP_KEYS: [&str; 8] = [
    "command",
    "a",
    "b",
    "numerics",
    "problem",
    "thresholds",
    "sweep",
    "output",
];
const COEFFICIENT_KEYS: [&str; 5] = ["mean", "sin", "cos", "period", "spatial"];
const NUMERICS_KEYS: [&str; 5] = ["n", "dt", "horizon", "window", "truncation"];
const PROBLEM_KEYS: [&str; 13] = [
    "l",
    "bc",
    "drift",
    "h0",
    "g0",
    "mu",
    "amplitude",
    "bracket",
    "tol",
    "l_star",
    "depths",
    "target_time",
    "snapshot_times",
];
const THRESHOLD_KEYS: [&str; 7] = [
    "speed",
    "amplitude",
    "margin",
    "window",
    "t_max",
    "h_max",
    "record_interval",
];
const SWEEP_KEYS: [&str; 3] = ["mu", "h0", "amplitude"];
const OUTPUT_KEYS: [&str; 4] = ["csv", "json", "plotdata", "snapshots"];

fn subtable<'a>(root: &'a Table, name: &str, errs: &mut Vec<String>) -> Option<&'a Table> {
    match root.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            errs.push(format!("{name} must be a section"));
            None
        }
    }
}

fn coefficient(
    root: &Table,
    name: &str,
    default: f64,
    errs: &mut Vec<String>,
) -> SeparableCoefficient {
    let table = subtable(root, name, errs);
    let mut s = Section { name, table, errs };
    s.check_keys(&COEFFICIENT_KEYS);
    let mean = s.float("mean").unwrap_or(default);
    let mut modes: Vec<Mode> = s
        .rows("sin", 2)
        .into_iter()
        .map(|r| Mode {
            amplitude: r[0],
            frequency: r[1],
            phase: 1.5 * std::f64::consts::PI,
        })
        .collect();
    modes.extend(s.rows("cos", 3).into_iter().map(|r| Mode {
        amplitude: r[0],
        frequency: r[1],
        phase: r[2],
    }));
    let period = s.positive("period");
    let spatial_rows = s.rows("spatial", 3);
    let temporal = match QuasiPeriodicSignal::new(mean, modes) {
        Ok(q) => q,
        Err(e) => {
            errs.push(format!("{name}: {e}"));
            QuasiPeriodicSignal::constant(mean)
        }
    };
    let spatial = if spatial_rows.is_empty() {
        SpatialProfile::Constant
    } else {
        let mut modes = Vec::with_capacity(spatial_rows.len());
        for r in &spatial_rows {
            if r[1] < 1.0 || r[1].fract() != 0.0 {
                errs.push(format!(
                    "{name}.spatial index {} must be a positive integer",
                    r[1]
                ));
            }
            modes.push(SpatialMode {
                amplitude: r[0],
                index: r[1].max(1.0) as u32,
                phase: r[2],
            });
        }
        match period {
            None => {
                errs.push(format!("{name}.spatial needs {name}.period"));
                SpatialProfile::Constant
            }
            Some(p) => SpatialProfile::periodic(p, modes).unwrap_or_else(|e| {
                errs.push(format!("{name}: {e}"));
                SpatialProfile::Constant
            }),
        }
    };
    SeparableCoefficient::new(temporal, spatial)
}

fn grid(s: &mut Section<'_>, key: &str) -> Vec<f64> {
    match s.floats(key) {
        Some(v) if !v.is_empty() => v,
        Some(_) => {
            let msg = format!("{} must not be empty", s.path(key));
            s.errs.push(msg);
            Vec::new()
        }
        None => {
            if s.value(key).is_none() {
                let msg = format!("{} is required", s.path(key));
                s.errs.push(msg);
            }
            Vec::new()
        }
    }
}

/// Parses and validates a config, reporting every violation found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax: {}", e.message())]))?;
    let mut errs = Vec::new();

    let mut top = Section {
        name: "",
        table: Some(&root),
        errs: &mut errs,
    };
    top.check_keys(&TOP_KEYS);
    let command = top
        .string("command")
        .and_then(|c| match c.parse::<Command>() {
            Ok(c) => Some(c),
            Err(e) => {
                top.errs.push(e);
                None
            }
        });

    let a = coefficient(&root, "a", 1.0, &mut errs);
    let b = coefficient(&root, "b", 1.0, &mut errs);
    if b.inf_bound() <= 0.0 {
        errs.push("b must be bounded below by a positive constant".into());
    }

    let table = subtable(&root, "numerics", &mut errs);
    let mut s = Section {
        name: "numerics",
        table,
        errs: &mut errs,
    };
    s.check_keys(&NUMERICS_KEYS);
    let numerics = Numerics {
        n: s.checked(
            "n",
            |x| x >= 8.0 && x.fract() == 0.0,
            "an integer of at least 8",
        )
        .map(|x| x as usize),
        dt: s.positive("dt").unwrap_or(1.0 / 256.0),
        horizon: s.positive("horizon").unwrap_or(2000.0),
        window: s.positive("window").unwrap_or(1.0),
        truncation: s.positive("truncation"),
    };

    let table = subtable(&root, "problem", &mut errs);
    let mut s = Section {
        name: "problem",
        table,
        errs: &mut errs,
    };
    s.check_keys(&PROBLEM_KEYS);
    let bc = match s.string("bc") {
        None => BcTag::NeumannLeftDirichletRight,
        Some(name) => BcTag::from_name(name).unwrap_or_else(|| {
            let msg = format!(
                "problem.bc \"{name}\" must be one of mixed, dirichlet, neumann{}",
                suggestion(name, &["mixed", "dirichlet", "neumann"])
            );
            s.errs.push(msg);
            BcTag::NeumannLeftDirichletRight
        }),
    };
    let bracket = s.floats("bracket").and_then(|v| {
        if v.len() == 2 && v[0] >= 0.0 && v[0] < v[1] {
            Some((v[0], v[1]))
        } else {
            s.errs
                .push("problem.bracket must be [lo, hi] with 0 <= lo < hi".into());
            None
        }
    });
    let depths = s.floats("depths").unwrap_or_default();
    if depths.windows(2).any(|w| w[1] <= w[0]) || depths.iter().any(|&d| d <= 0.0) {
        s.errs
            .push("problem.depths must be positive and increasing".into());
    }
    let problem = Problem {
        l: s.positive("l"),
        bc,
        drift: s.float("drift").unwrap_or(0.0),
        h0: s.positive("h0"),
        g0: s.float("g0"),
        mu: s.checked("mu", |x| x >= 0.0, "nonnegative"),
        amplitude: s.positive("amplitude").unwrap_or(1.0),
        bracket,
        tol: s.positive("tol"),
        l_star: s.positive("l_star"),
        depths,
        target_time: s.float("target_time").unwrap_or(0.0),
        snapshot_times: s.floats("snapshot_times").unwrap_or_default(),
    };

    let table = subtable(&root, "thresholds", &mut errs);
    let mut s = Section {
        name: "thresholds",
        table,
        errs: &mut errs,
    };
    s.check_keys(&THRESHOLD_KEYS);
    let thresholds = ThresholdSpec {
        speed: s.positive("speed").unwrap_or(1e-5),
        amplitude: s.positive("amplitude").unwrap_or(1e-4),
        margin: s.checked("margin", |x| x >= 0.0, "nonnegative"),
        window: s.positive("window").unwrap_or(50.0),
        t_max: s.positive("t_max").unwrap_or(200.0),
        h_max: s.positive("h_max"),
        record_interval: s
            .checked("record_interval", |x| x >= 0.0, "nonnegative")
            .unwrap_or(0.1),
    };

    let table = subtable(&root, "sweep", &mut errs);
    let sweep = table.map(|t| {
        let mut s = Section {
            name: "sweep",
            table: Some(t),
            errs: &mut errs,
        };
        s.check_keys(&SWEEP_KEYS);
        SweepSpec {
            mu: grid(&mut s, "mu"),
            h0: grid(&mut s, "h0"),
            amplitude: grid(&mut s, "amplitude"),
        }
    });
    if let Some(sw) = &sweep {
        if sw.mu.iter().any(|&m| m < 0.0) || sw.h0.iter().chain(&sw.amplitude).any(|&x| x <= 0.0) {
            errs.push("sweep values must have mu >= 0, h0 > 0 and amplitude > 0".into());
        }
    }

    let table = subtable(&root, "output", &mut errs);
    let mut s = Section {
        name: "output",
        table,
        errs: &mut errs,
    };
    s.check_keys(&OUTPUT_KEYS);
    let output = OutputSpec {
        csv: s.string("csv").map(str::to_owned),
        json: s.string("json").map(str::to_owned),
        plotdata: s.string("plotdata").map(str::to_owned),
        snapshots: s.string("snapshots").map(str::to_owned),
    };

    let config = ExperimentConfig {
        command,
        a,
        b,
        numerics,
        problem,
        thresholds,
        sweep,
        output,
    };
    if let Some(c) = command {
        if let Err(ConfigErrors(more)) = config.require(c) {
            errs.extend(more);
        }
    }
    if errs.is_empty() {
        Ok(config)
    } else {
        Err(ConfigErrors(errs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_lyapunov_config_gets_defaults() {
        let c = parse_config("command = \"lyapunov\"\n[problem]\nl = 1.5\n").unwrap();
        assert_eq!(c.command, Some(Command::Lyapunov));
        assert_eq!(c.numerics.n, None);
        assert_eq!(c.numerics.dt, 1.0 / 256.0);
        assert_eq!(c.numerics.horizon, 2000.0);
        assert_eq!(c.problem.bc, BcTag::NeumannLeftDirichletRight);
        assert_eq!(c.a, SeparableCoefficient::constant(1.0));
        assert_eq!(c.thresholds.t_max, 200.0);
    }

    #[test]
    fn negative_h0_names_key() {
        let err = parse_config("[problem]\nh0 = -1.0\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].contains("problem.h0"), "{err}");
    }

    #[test]
    fn unknown_key_suggests_fix() {
        let err = parse_config("[problem]\nh00 = 1.0\n").unwrap_err();
        assert!(err.0[0].contains("\"problem.h00\""));
        assert!(err.0[0].contains("did you mean \"h0\""), "{err}");
    }

    #[test]
    fn all_violations_reported() {
        let text =
            "command = \"simulate\"\nbogus = 1\n[numerics]\nn = 4\ndt = 0\n[problem]\nmu = -1\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.0.len() >= 5, "{err:?}");
    }

    #[test]
    fn coefficient_modes_parse() {
        let text = "[a]\nmean = 1.0\nsin = [[0.5, 1.0], [0.5, 1.4142135623730951]]\n\
                    [b]\nmean = 2.0\nperiod = 2.0\nspatial = [[0.5, 1, 0.0]]\n";
        let c = parse_config(text).unwrap();
        assert!(
            (c.a.eval(1.0, 0.0) - (1.0 + 0.5 * 1f64.sin() + 0.5 * 2f64.sqrt().sin())).abs() < 1e-12
        );
        assert!((c.b.eval(0.0, 0.5) - 2.0).abs() < 1e-12);
        assert!((c.b.eval(0.0, 1.0) - 1.0).abs() < 1e-12);
        assert!(!c.b.is_space_independent());
    }

    #[test]
    fn unknown_command_suggests() {
        let err = parse_config("command = \"simulat\"\n").unwrap_err();
        assert!(err.0[0].contains("did you mean \"simulate\""), "{err}");
    }

    #[test]
    fn missing_required_keys() {
        let err = parse_config("command = \"double-front\"\n[problem]\nh0 = 1.0\n").unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("problem.g0")));
        assert!(err.0.iter().any(|e| e.contains("problem.mu")));
    }

    #[test]
    fn spatial_amplitudes_checked() {
        let err = parse_config("[a]\nperiod = 1.0\nspatial = [[1.5, 1, 0.0]]\n").unwrap_err();
        assert!(err.0[0].starts_with("a:"), "{err}");
    }
}
