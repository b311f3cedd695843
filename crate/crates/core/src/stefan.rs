//! Single- and double-front free-boundary KPP problems in front-fixing
//! coordinates.
//!
//! The moving domain `[g(t), h(t)]` (with `g ≡ 0` for the single front) is
//! mapped to `ξ ∈ [0, 1]` by `x = g + ξ (h - g)`. With `w = h - g` the profile
//! `v(t, ξ) = u(t, x)` solves
//!
//! ```text
//! v_t = w⁻² v_ξξ + ((1 - ξ) g' + ξ h') / w · v_ξ + v f(t, x, v)
//! h'  = -μ v_ξ(t, 1) / w,    g' = -μ v_ξ(t, 0) / w
//! ```
//!
//! The single front has `v_ξ(t, 0) = 0` and `g' = 0`.

use std::f64::consts::PI;
use std::fmt;

use crate::coefficients::Reaction;
use crate::error::{Error, Result};
use crate::output::{Cell, Table};
use crate::parabolic::{
    imex_step, interpolate, BcTag, DampingSchedule, Drift, GridFunction, Mesh1D, SpatialOperator,
    StepKind,
};

/// Front velocities below this are treated as rounding noise.
const VELOCITY_ROUNDING: f64 = 1e-12;
/// Largest front displacement per step, in reference cells.
const FRONT_CFL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// One-sided three-point derivative of the profile at a boundary, in
/// reference coordinates.
pub fn front_derivative(profile: &GridFunction, side: Side) -> f64 {
    let v = &profile.values;
    let n = v.len() - 1;
    let dxi = profile.mesh.dx();
    match side {
        Side::Right => (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * dxi),
        Side::Left => (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dxi),
    }
}

/// Mapped profile plus front positions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontState {
    pub time: f64,
    pub h: f64,
    /// Left front; `None` for the single-front problem (wall at `x = 0`).
    pub g: Option<f64>,
    /// Profile on the unit reference mesh.
    pub profile: GridFunction,
    pub mu: f64,
}

impl FrontState {
    /// Single front on `[0, h0]` with `u0` sampled at physical positions.
    pub fn single(h0: f64, mu: f64, cells: usize, u0: impl Fn(f64) -> f64) -> Result<Self> {
        validate_front(h0 > 0.0, mu)?;
        let mesh = Mesh1D::new(1.0, cells)?;
        let profile =
            GridFunction::from_fn(
                mesh,
                BcTag::NeumannLeftDirichletRight,
                0.0,
                |xi| u0(xi * h0),
            )?;
        Self::checked(0.0, h0, None, profile, mu)
    }

    /// Single front with `u0(x) = A cos(πx / (2 h0))`.
    pub fn single_cosine(h0: f64, mu: f64, amplitude: f64, cells: usize) -> Result<Self> {
        Self::single(h0, mu, cells, |x| amplitude * (PI * x / (2.0 * h0)).cos())
    }

    /// Double front on `[g0, h0]`.
    pub fn double(
        g0: f64,
        h0: f64,
        mu: f64,
        cells: usize,
        u0: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        validate_front(g0 < h0, mu)?;
        let mesh = Mesh1D::new(1.0, cells)?;
        let w = h0 - g0;
        let profile =
            GridFunction::from_fn(mesh, BcTag::DirichletDirichlet, 0.0, |xi| u0(g0 + xi * w))?;
        Self::checked(0.0, h0, Some(g0), profile, mu)
    }

    /// Double front with `u0(x) = A cos(π (x - c) / (h0 - g0))`, `c` the midpoint.
    pub fn double_cosine(g0: f64, h0: f64, mu: f64, amplitude: f64, cells: usize) -> Result<Self> {
        let c = 0.5 * (g0 + h0);
        let w = h0 - g0;
        Self::double(g0, h0, mu, cells, |x| amplitude * (PI * (x - c) / w).cos())
    }

    fn checked(time: f64, h: f64, g: Option<f64>, profile: GridFunction, mu: f64) -> Result<Self> {
        if let Some(node) = profile.values.iter().position(|v| *v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "initial profile negative at reference node {node}"
            )));
        }
        Ok(Self {
            time,
            h,
            g,
            profile,
            mu,
        })
    }

    pub fn is_double(&self) -> bool {
        self.g.is_some()
    }

    pub fn left(&self) -> f64 {
        self.g.unwrap_or(0.0)
    }

    pub fn width(&self) -> f64 {
        self.h - self.left()
    }

    /// `h` for a single front, `h - g` for a double front.
    pub fn extent(&self) -> f64 {
        self.width()
    }

    pub fn sup_u(&self) -> f64 {
        self.profile.sup_norm()
    }

    /// `(g', h')` from the current profile.
    pub fn velocities(&self) -> (f64, f64) {
        velocities(&self.profile, self.mu, self.width(), self.is_double())
    }

    /// `u(t, x)` by linear interpolation in reference coordinates; zero outside the domain.
    pub fn u_at(&self, x: f64) -> f64 {
        let xi = (x - self.left()) / self.width();
        interpolate(&self.profile.values, 1.0, xi)
    }

    /// `(x, u)` pairs at the reference nodes.
    pub fn physical_profile(&self) -> Vec<(f64, f64)> {
        let w = self.width();
        let g = self.left();
        self.profile
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| (g + self.profile.mesh.x(j) * w, v))
            .collect()
    }
}

fn validate_front(ordered: bool, mu: f64) -> Result<()> {
    if !ordered {
        return Err(Error::InvalidArgument(
            "fronts must satisfy 0 < h0 and g0 < h0".into(),
        ));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mu {mu} must be nonnegative"
        )));
    }
    Ok(())
}

fn velocities(profile: &GridFunction, mu: f64, width: f64, double: bool) -> (f64, f64) {
    let hdot = -mu * front_derivative(profile, Side::Right) / width;
    let gdot = if double {
        -mu * front_derivative(profile, Side::Left) / width
    } else {
        0.0
    };
    (gdot, hdot)
}

fn check_velocities((gdot, hdot): (f64, f64)) -> Result<(f64, f64)> {
    if hdot < -VELOCITY_ROUNDING {
        return Err(Error::FrontReversed {
            side: "right",
            velocity: hdot,
        });
    }
    if gdot > VELOCITY_ROUNDING {
        return Err(Error::FrontReversed {
            side: "left",
            velocity: gdot,
        });
    }
    Ok((gdot.min(0.0), hdot.max(0.0)))
}

/// One IMEX step of the mapped equation with the geometry frozen at
/// `(g, h)` and velocities `(gdot, hdot)`.
fn mapped_step<R: Reaction + ?Sized>(
    state: &FrontState,
    f: &R,
    dt: f64,
    (g, h): (f64, f64),
    (gdot, hdot): (f64, f64),
    kind: StepKind,
) -> Result<Vec<f64>> {
    let mesh = state.profile.mesh;
    let w = h - g;
    let xi = mesh.positions();
    let drift = if gdot == 0.0 && hdot == 0.0 {
        Drift::None
    } else {
        Drift::Nodal(
            xi.iter()
                .map(|&s| ((1.0 - s) * gdot + s * hdot) / w)
                .collect(),
        )
    };
    let op = SpatialOperator::new(state.profile.bc, 1.0 / (w * w), mesh.dx(), drift);
    let x: Vec<f64> = if state.is_double() {
        xi.iter().map(|&s| g + s * w).collect()
    } else {
        xi.iter().map(|&s| s * h).collect()
    };
    imex_step(&state.profile.values, &op, &x, f, state.time, dt, kind)
}

/// Shared predictor–corrector step for both problems.
fn step_fronts<R: Reaction + ?Sized>(
    state: &FrontState,
    f: &R,
    dt: f64,
    kind: StepKind,
) -> Result<FrontState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} must be positive"
        )));
    }
    let double = state.is_double();
    let (g, h) = (state.left(), state.h);
    let (g0dot, h0dot) = check_velocities(state.velocities())?;

    // predictor
    let (gp, hp) = (g + dt * g0dot, h + dt * h0dot);
    let v1 = mapped_step(
        state,
        f,
        dt,
        (0.5 * (g + gp), 0.5 * (h + hp)),
        (g0dot, h0dot),
        kind,
    )?;
    let p1 = GridFunction {
        values: v1,
        ..state.profile.clone()
    };
    let (g1dot, h1dot) = check_velocities(velocities(&p1, state.mu, hp - gp, double))?;

    // corrector with midpoint-averaged geometry
    let (gdm, hdm) = (0.5 * (g0dot + g1dot), 0.5 * (h0dot + h1dot));
    let (gc, hc) = (g + dt * gdm, h + dt * hdm);
    let v2 = mapped_step(
        state,
        f,
        dt,
        (0.5 * (g + gc), 0.5 * (h + hc)),
        (gdm, hdm),
        kind,
    )?;
    let profile = GridFunction {
        values: v2,
        time: state.time + dt,
        ..state.profile.clone()
    };
    let (g2dot, h2dot) = check_velocities(velocities(&profile, state.mu, hc - gc, double))?;

    let h_new = h + 0.5 * dt * (h0dot + h2dot);
    let g_new = g + 0.5 * dt * (g0dot + g2dot);
    Ok(FrontState {
        time: state.time + dt,
        h: h_new,
        g: double.then_some(g_new),
        profile,
        mu: state.mu,
    })
}

/// Advances the single-front problem by `dt`.
pub fn step_single_front<R: Reaction + ?Sized>(
    state: &FrontState,
    f: &R,
    dt: f64,
) -> Result<FrontState> {
    if state.is_double() {
        return Err(Error::InvalidArgument("state carries a left front".into()));
    }
    step_fronts(state, f, dt, StepKind::CrankNicolson)
}

/// Advances the double-front problem by `dt`.
pub fn step_double_front<R: Reaction + ?Sized>(
    state: &FrontState,
    f: &R,
    dt: f64,
) -> Result<FrontState> {
    if !state.is_double() {
        return Err(Error::InvalidArgument("state has no left front".into()));
    }
    step_fronts(state, f, dt, StepKind::CrankNicolson)
}

/// Sustained-decay criterion for stopping a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stagnation {
    /// Front speed threshold ε_h'.
    pub speed: f64,
    /// Amplitude threshold ε_u.
    pub amplitude: f64,
    /// How long both must hold.
    pub window: f64,
}

impl Default for Stagnation {
    fn default() -> Self {
        Self {
            speed: 1e-5,
            amplitude: 1e-4,
            window: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    pub t_max: f64,
    /// Stop once the extent (`h`, or `h - g`) reaches this.
    pub h_max: f64,
    pub stagnation: Option<Stagnation>,
    pub dt: f64,
    /// Spacing of recorded samples; every step when zero.
    pub record_interval: f64,
    /// Times at which full profiles are kept; steps are shortened to land on them.
    pub snapshot_times: Vec<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            t_max: 200.0,
            h_max: f64::INFINITY,
            stagnation: Some(Stagnation::default()),
            dt: 1.0 / 256.0,
            record_interval: 0.1,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TimeLimit,
    FrontLimit,
    Stagnation,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::TimeLimit => "t_max",
            StopReason::FrontLimit => "h_max",
            StopReason::Stagnation => "stagnation",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Recorded run of a free-boundary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontTrajectory {
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    /// Present for double-front runs.
    pub g: Option<Vec<f64>>,
    pub sup_u: Vec<f64>,
    pub hdot: Vec<f64>,
    pub snapshots: Vec<FrontState>,
    pub final_state: FrontState,
    /// `None` for a partial trajectory cut short by an error.
    pub stop_reason: Option<StopReason>,
}

impl FrontTrajectory {
    fn start(state: &FrontState) -> Self {
        let mut t = Self {
            times: Vec::new(),
            h: Vec::new(),
            g: state.is_double().then(Vec::new),
            sup_u: Vec::new(),
            hdot: Vec::new(),
            snapshots: Vec::new(),
            final_state: state.clone(),
            stop_reason: None,
        };
        t.record(state);
        t
    }

    fn record(&mut self, s: &FrontState) {
        self.times.push(s.time);
        self.h.push(s.h);
        if let Some(g) = self.g.as_mut() {
            g.push(s.left());
        }
        self.sup_u.push(s.sup_u());
        self.hdot.push(s.velocities().1);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_double(&self) -> bool {
        self.g.is_some()
    }

    pub fn final_extent(&self) -> f64 {
        self.final_state.extent()
    }

    /// First recorded time at which the extent exceeds `level`.
    pub fn crossing_time(&self, level: f64) -> Option<f64> {
        let g = self.g.as_deref();
        (0..self.len())
            .find(|&k| self.h[k] - g.map_or(0.0, |g| g[k]) > level)
            .map(|k| self.times[k])
    }

    /// Columns `t,h[,g],sup_u,hprime`.
    pub fn table(&self) -> Table {
        let mut cols = vec!["t", "h"];
        if self.is_double() {
            cols.push("g");
        }
        cols.extend(["sup_u", "hprime"]);
        let mut table = Table::new(cols);
        for k in 0..self.len() {
            let mut row: Vec<Cell> = vec![self.times[k].into(), self.h[k].into()];
            if let Some(g) = &self.g {
                row.push(g[k].into());
            }
            row.push(self.sup_u[k].into());
            row.push(self.hdot[k].into());
            table.push(row);
        }
        table
    }

    /// Columns `t,x_physical,u` over every stored snapshot.
    pub fn snapshot_table(&self) -> Table {
        let mut table = Table::new(["t", "x_physical", "u"]);
        for s in &self.snapshots {
            for (x, u) in s.physical_profile() {
                table.push(vec![s.time.into(), x.into(), u.into()]);
            }
        }
        table
    }
}

/// A run that failed part way; `partial` holds everything recorded up to the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<FrontTrajectory>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (partial trajectory up to t = {})",
            self.error, self.partial.final_state.time
        )
    }
}

impl std::error::Error for RunFailure {}

impl From<RunFailure> for Error {
    fn from(r: RunFailure) -> Self {
        Error::Partial {
            steps: r.partial.len(),
            time: r.partial.final_state.time,
            source: Box::new(r.error),
        }
    }
}

/// Steps until `t_max`, the front limit, or sustained stagnation.
pub fn run_until<R: Reaction + ?Sized>(
    state: FrontState,
    f: &R,
    stop: &StopRule,
) -> std::result::Result<FrontTrajectory, RunFailure> {
    let mut traj = FrontTrajectory::start(&state);
    let invalid = |traj: FrontTrajectory, msg: String| RunFailure {
        error: Error::InvalidArgument(msg),
        partial: Box::new(traj),
    };
    if !(stop.dt > 0.0 && stop.t_max >= 0.0 && stop.h_max > 0.0) {
        return Err(invalid(
            traj,
            "stop thresholds and dt must be positive".into(),
        ));
    }
    if let Some(s) = stop.stagnation {
        if !(s.speed > 0.0 && s.amplitude > 0.0 && s.window > 0.0) {
            return Err(invalid(
                traj,
                "stagnation thresholds must be positive".into(),
            ));
        }
    }

    let t0 = state.time;
    let mut snapshots = stop.snapshot_times.iter().copied().peekable();
    while snapshots.peek().is_some_and(|&ts| ts <= t0) {
        snapshots.next();
        traj.snapshots.push(state.clone());
    }
    let mut current = state;
    let mut stagnant_since: Option<f64> = None;
    let mut damping = DampingSchedule::default();
    let mut next_record = t0 + stop.record_interval;
    let mut k = 0u64;
    let mut t_base = t0;

    let reason = loop {
        if current.time >= stop.t_max - 1e-12 {
            break StopReason::TimeLimit;
        }
        if current.extent() >= stop.h_max {
            break StopReason::FrontLimit;
        }
        let (gdot, hdot) = current.velocities();
        let speed = hdot.max(-gdot);
        let cfl = if speed > 0.0 {
            FRONT_CFL * current.width() * current.profile.mesh.dx() / speed
        } else {
            f64::INFINITY
        };
        let mut dt = stop.dt.min(cfl).min(stop.t_max - current.time);
        if let Some(&ts) = snapshots.peek() {
            dt = dt.min(ts - current.time);
        }
        let kind = damping.kind(current.time);
        let mut next = match step_fronts(&current, f, dt, kind) {
            Ok(s) => s,
            Err(error) => {
                traj.final_state = current;
                return Err(RunFailure {
                    error,
                    partial: Box::new(traj),
                });
            }
        };
        if dt == stop.dt {
            k += 1;
            // avoid drift from repeated addition
            next.time = t_base + k as f64 * stop.dt;
            next.profile.time = next.time;
        } else {
            t_base = next.time;
            k = 0;
        }
        current = next;

        let t = current.time;
        let is_last_candidate = t >= stop.t_max - 1e-12 || current.extent() >= stop.h_max;
        if stop.record_interval <= 0.0 || t >= next_record - 1e-12 || is_last_candidate {
            traj.record(&current);
            while stop.record_interval > 0.0 && next_record <= t + 1e-12 {
                next_record += stop.record_interval;
            }
        }
        while snapshots.peek().is_some_and(|&ts| ts <= t + 1e-12) {
            snapshots.next();
            traj.snapshots.push(current.clone());
        }

        if let Some(s) = stop.stagnation {
            let (gdot, hdot) = current.velocities();
            let speed = hdot.max(-gdot);
            if speed < s.speed && current.sup_u() < s.amplitude {
                let since = *stagnant_since.get_or_insert(t);
                if t - since >= s.window {
                    break StopReason::Stagnation;
                }
            } else {
                stagnant_since = None;
            }
        }
    };
    if traj.times.last() != Some(&current.time) {
        traj.record(&current);
    }
    traj.final_state = current;
    traj.stop_reason = Some(reason);
    Ok(traj)
}
