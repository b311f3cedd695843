//! Spreading/vanishing classification of free-boundary runs and the critical
//! expansion coefficient.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::PullbackResult;
use crate::coefficients::Reaction;
use crate::error::{Error, Result};
use crate::output::{Cell, Table};
use crate::stefan::{run_until, FrontState, FrontTrajectory, StopReason, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Spreading,
    Vanishing,
    Undetermined,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Spreading => "spreading",
            Outcome::Vanishing => "vanishing",
            Outcome::Undetermined => "undetermined",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Front speed below which the front counts as stalled.
    pub speed: f64,
    /// Amplitude below which the solution counts as gone.
    pub amplitude: f64,
    /// Margin above the reference length; `None` means 5% of it.
    pub margin: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            speed: 1e-5,
            amplitude: 1e-4,
            margin: None,
        }
    }
}

impl Thresholds {
    pub fn margin_for(&self, reference: f64) -> f64 {
        self.margin.unwrap_or(0.05 * reference)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub final_h: f64,
    pub final_g: Option<f64>,
    pub final_sup_u: f64,
    /// Largest outward front speed at the end of the run.
    pub final_speed: f64,
    /// Critical length the extent was compared with.
    pub reference: f64,
    pub margin: f64,
    pub stop_reason: Option<&'static str>,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyVerdict {
    pub outcome: Outcome,
    pub evidence: Evidence,
    pub fingerprint: String,
}

/// Classifies a trajectory against `reference`, the critical length for the
/// single-front problem or the critical width for the double-front problem.
pub fn classify(
    traj: &FrontTrajectory,
    reference: f64,
    thresholds: &Thresholds,
) -> DichotomyVerdict {
    let last = &traj.final_state;
    let (gdot, hdot) = last.velocities();
    let margin = thresholds.margin_for(reference);
    let extent = last.extent();
    let speed = hdot.max(-gdot);
    let stagnated = traj.stop_reason == Some(StopReason::Stagnation);
    let outcome = if extent >= reference + margin {
        Outcome::Spreading
    } else if stagnated && speed < thresholds.speed && last.sup_u() < thresholds.amplitude {
        Outcome::Vanishing
    } else {
        Outcome::Undetermined
    };
    let g0 = traj.g.as_ref().and_then(|g| g.first().copied());
    let fingerprint = format!(
        "mu={} h0={} g0={} cells={} t0={}",
        last.mu,
        traj.h.first().copied().unwrap_or(last.h),
        g0.map_or_else(|| "none".to_owned(), |g| g.to_string()),
        last.profile.mesh.cells(),
        traj.times.first().copied().unwrap_or(0.0),
    );
    DichotomyVerdict {
        outcome,
        evidence: Evidence {
            final_h: last.h,
            final_g: last.g,
            final_sup_u: last.sup_u(),
            final_speed: speed,
            reference,
            margin,
            stop_reason: traj.stop_reason.map(StopReason::name),
            final_time: last.time,
        },
        fingerprint,
    }
}

/// Shared settings for classifying single-front runs from a cosine initial profile.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSetup {
    pub cells: usize,
    pub stop: StopRule,
    pub thresholds: Thresholds,
    /// Critical length of the fixed-domain problem.
    pub l_star: f64,
    /// Times `t_max` may be doubled while the verdict stays undetermined.
    pub extensions: usize,
}

impl FrontSetup {
    /// Runs stop as soon as the front passes `l* + margin`.
    pub fn new(l_star: f64) -> Self {
        let thresholds = Thresholds::default();
        Self {
            cells: 256,
            stop: StopRule {
                h_max: l_star + thresholds.margin_for(l_star),
                ..StopRule::default()
            },
            thresholds,
            l_star,
            extensions: 2,
        }
    }
}

fn append(into: &mut FrontTrajectory, more: FrontTrajectory) {
    into.times.extend(&more.times[1..]);
    into.h.extend(&more.h[1..]);
    if let (Some(g), Some(m)) = (into.g.as_mut(), more.g.as_ref()) {
        g.extend(&m[1..]);
    }
    into.sup_u.extend(&more.sup_u[1..]);
    into.hdot.extend(&more.hdot[1..]);
    into.snapshots.extend(more.snapshots);
    into.final_state = more.final_state;
    into.stop_reason = more.stop_reason;
}

/// Runs from `state`, extending `t_max` while the verdict is undetermined.
pub fn run_and_classify<R: Reaction + ?Sized>(
    f: &R,
    state: FrontState,
    setup: &FrontSetup,
) -> Result<(DichotomyVerdict, FrontTrajectory)> {
    let reference = if state.is_double() {
        2.0 * setup.l_star
    } else {
        setup.l_star
    };
    let mut stop = setup.stop.clone();
    let span = stop.t_max - state.time;
    let mut traj = run_until(state, f, &stop)?;
    let mut verdict = classify(&traj, reference, &setup.thresholds);
    for _ in 0..setup.extensions {
        if verdict.outcome != Outcome::Undetermined {
            break;
        }
        stop.t_max += span;
        log::info!("verdict undetermined, extending to t = {}", stop.t_max);
        let more = run_until(traj.final_state.clone(), f, &stop)?;
        append(&mut traj, more);
        verdict = classify(&traj, reference, &setup.thresholds);
    }
    Ok((verdict, traj))
}

fn single_run<R: Reaction + ?Sized>(
    f: &R,
    h0: f64,
    amplitude: f64,
    mu: f64,
    setup: &FrontSetup,
) -> Result<DichotomyVerdict> {
    let state = FrontState::single_cosine(h0, mu, amplitude, setup.cells)?;
    Ok(run_and_classify(f, state, setup)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub mu: f64,
    pub outcome: Outcome,
    pub final_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalMuResult {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub verdict_lo: Outcome,
    pub verdict_hi: Outcome,
    pub iterations: usize,
    pub h0: f64,
    pub amplitude: f64,
    /// Every probe in evaluation order.
    pub probes: Vec<Probe>,
}

impl CriticalMuResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// No probe classified vanishing lies above a probe classified spreading.
pub fn probes_monotone(probes: &[Probe]) -> bool {
    let lowest_spread = probes
        .iter()
        .filter(|p| p.outcome == Outcome::Spreading)
        .map(|p| p.mu)
        .fold(f64::INFINITY, f64::min);
    probes
        .iter()
        .all(|p| p.outcome != Outcome::Vanishing || p.mu < lowest_spread)
}

/// Bisection on `μ` for the cosine initial profile of height `amplitude` on `[0, h0]`.
pub fn critical_mu<R: Reaction + ?Sized>(
    f: &R,
    h0: f64,
    amplitude: f64,
    bracket: (f64, f64),
    tol: f64,
    setup: &FrontSetup,
) -> Result<CriticalMuResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo >= 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= mu_lo < mu_hi and tol > 0, got ({lo}, {hi}), {tol}"
        )));
    }
    if h0 >= setup.l_star {
        return Err(Error::InvalidArgument(format!(
            "h0 = {h0} is not below the critical length {}",
            setup.l_star
        )));
    }
    let mut probes = Vec::new();
    let mut probe = |mu: f64| -> Result<Outcome> {
        let v = single_run(f, h0, amplitude, mu, setup)?;
        log::info!("mu = {mu}: {}", v.outcome);
        probes.push(Probe {
            mu,
            outcome: v.outcome,
            final_h: v.evidence.final_h,
        });
        Ok(v.outcome)
    };
    let at_lo = probe(lo)?;
    let at_hi = probe(hi)?;
    if at_lo != Outcome::Vanishing || at_hi != Outcome::Spreading {
        return Err(Error::BadBracket(format!(
            "verdicts {at_lo} at mu = {lo} and {at_hi} at mu = {hi}"
        )));
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        match probe(mid)? {
            Outcome::Spreading => hi = mid,
            Outcome::Vanishing => lo = mid,
            Outcome::Undetermined => {
                return Err(Error::Undetermined(format!(
                    "mu = {mid} still undetermined after extending the run; bracket ({lo}, {hi})"
                )))
            }
        }
    }
    if !probes_monotone(&probes) {
        return Err(Error::Monotonicity(
            "a vanishing probe lies above a spreading probe".into(),
        ));
    }
    Ok(CriticalMuResult {
        mu_lo: lo,
        mu_hi: hi,
        verdict_lo: Outcome::Vanishing,
        verdict_hi: Outcome::Spreading,
        iterations,
        h0,
        amplitude,
        probes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    pub time: f64,
    /// Right end of the window actually used.
    pub window: f64,
    pub clipped: bool,
    pub deviation: f64,
    pub passes: bool,
}

/// Sup over `[0, window]` of `|u(T, ·) - u*(T, ·)|`, the window clipped to `h(T) - 1`.
pub fn dichotomy_audit(
    traj: &FrontTrajectory,
    u_star: &PullbackResult,
    window: f64,
    tol: f64,
) -> Result<AuditReport> {
    let last = &traj.final_state;
    if (u_star.profile.time - last.time).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "u* given at t = {}, trajectory ends at t = {}",
            u_star.profile.time, last.time
        )));
    }
    let limit = last.h - 1.0;
    let clipped = window > limit;
    let right = window.min(limit);
    let mut deviation = 0.0f64;
    if right >= 0.0 {
        for (x, u) in last.physical_profile() {
            if (0.0..=right).contains(&x) {
                deviation = deviation.max((u - u_star.profile.interpolate(x)).abs());
            }
        }
    }
    Ok(AuditReport {
        time: last.time,
        window: right,
        clipped,
        deviation,
        passes: right >= 0.0 && deviation < tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub mu: Vec<f64>,
    pub h0: Vec<f64>,
    pub amplitude: Vec<f64>,
}

impl SweepGrid {
    /// Cells with `μ` varying slowest.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.mu.len() * self.h0.len() * self.amplitude.len());
        for &mu in &self.mu {
            for &h0 in &self.h0 {
                for &a in &self.amplitude {
                    out.push((mu, h0, a));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub h0: f64,
    pub amplitude: f64,
    pub result: std::result::Result<DichotomyVerdict, String>,
}

/// Classifies every grid cell in parallel; rows come back in grid order.
pub fn sweep<R: Reaction + ?Sized>(grid: &SweepGrid, f: &R, setup: &FrontSetup) -> Vec<SweepRow> {
    grid.cells()
        .into_par_iter()
        .map(|(mu, h0, amplitude)| {
            let result = single_run(f, h0, amplitude, mu, setup).map_err(|e| e.to_string());
            match &result {
                Ok(v) => log::info!("cell mu={mu} h0={h0} A={amplitude}: {}", v.outcome),
                Err(e) => log::warn!("cell mu={mu} h0={h0} A={amplitude} failed: {e}"),
            }
            SweepRow {
                mu,
                h0,
                amplitude,
                result,
            }
        })
        .collect()
}

/// Columns `mu,h0,amplitude,outcome,final_h,final_sup_u,stop_reason`.
pub fn verdict_table(rows: &[SweepRow]) -> Table {
    let mut table = Table::new([
        "mu",
        "h0",
        "amplitude",
        "outcome",
        "final_h",
        "final_sup_u",
        "stop_reason",
    ]);
    for r in rows {
        let mut row: Vec<Cell> = vec![r.mu.into(), r.h0.into(), r.amplitude.into()];
        match &r.result {
            Ok(v) => row.extend([
                v.outcome.name().into(),
                v.evidence.final_h.into(),
                v.evidence.final_sup_u.into(),
                v.evidence.stop_reason.unwrap_or("none").into(),
            ]),
            Err(_) => row.extend([
                "error".into(),
                f64::NAN.into(),
                f64::NAN.into(),
                "error".into(),
            ]),
        }
        table.push(row);
    }
    table
}

/// Number of outcome changes along a sequence of verdicts.
pub fn transitions(outcomes: &[Outcome]) -> usize {
    outcomes.windows(2).filter(|w| w[0] != w[1]).count()
}
