//! Crank–Nicolson stepping of `v_t = κ v_xx + c(x) v_x + a(t, x) v` and of the
//! semilinear KPP equation on a fixed interval with mixed boundary conditions.

use std::fmt;
use std::io::{self, Write};

use crate::coefficients::{Reaction, SeparableCoefficient};
use crate::error::{Error, Result};
use crate::output::fmt_num;
use crate::tridiag::Tridiagonal;

/// Values below this are reported as a negative overshoot rather than clamped.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// Uniform mesh of `[0, length]` with `n` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    length: f64,
    n: usize,
}

impl Mesh1D {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mesh length {length} must be positive"
            )));
        }
        if n < 8 {
            return Err(Error::InvalidArgument(format!(
                "mesh needs at least 8 cells, got {n}"
            )));
        }
        Ok(Self { length, n })
    }

    /// Mesh with `per_unit` cells per unit length, at least 8.
    pub fn with_density(length: f64, per_unit: usize) -> Result<Self> {
        let n = ((length * per_unit as f64).round() as usize).max(8);
        Self::new(length, n)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.n + 1
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.x(j)).collect()
    }
}

/// Boundary conditions at the two ends of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcTag {
    /// `u_x(0) = 0`, `u(l) = 0`.
    NeumannLeftDirichletRight,
    /// `u(0) = u(l) = 0`.
    DirichletDirichlet,
    /// `u_x(0) = u_x(l) = 0`; used to truncate the half line.
    NeumannNeumann,
}

impl BcTag {
    pub fn left_dirichlet(self) -> bool {
        matches!(self, BcTag::DirichletDirichlet)
    }

    pub fn right_dirichlet(self) -> bool {
        !matches!(self, BcTag::NeumannNeumann)
    }

    pub fn name(self) -> &'static str {
        match self {
            BcTag::NeumannLeftDirichletRight => "mixed",
            BcTag::DirichletDirichlet => "dirichlet",
            BcTag::NeumannNeumann => "neumann",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "mixed" => Some(BcTag::NeumannLeftDirichletRight),
            "dirichlet" => Some(BcTag::DirichletDirichlet),
            "neumann" => Some(BcTag::NeumannNeumann),
            _ => None,
        }
    }

    /// Node range where the solution is unconstrained.
    pub fn free_nodes(self, nodes: usize) -> std::ops::Range<usize> {
        let lo = usize::from(self.left_dirichlet());
        let hi = nodes - usize::from(self.right_dirichlet());
        lo..hi
    }
}

impl fmt::Display for BcTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Nodal values of a solution at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub mesh: Mesh1D,
    pub bc: BcTag,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GridFunction {
    pub fn new(mesh: Mesh1D, bc: BcTag, mut values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != mesh.nodes() {
            return Err(Error::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                mesh.nodes(),
                values.len()
            )));
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        pin_dirichlet(&mut values, bc);
        Ok(Self {
            mesh,
            bc,
            values,
            time,
        })
    }

    pub fn from_fn(mesh: Mesh1D, bc: BcTag, time: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = mesh.positions().into_iter().map(f).collect();
        Self::new(mesh, bc, values, time)
    }

    pub fn zeros(mesh: Mesh1D, bc: BcTag, time: f64) -> Self {
        Self {
            mesh,
            bc,
            values: vec![0.0; mesh.nodes()],
            time,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(self)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation at physical position `x`, zero outside the mesh.
    pub fn interpolate(&self, x: f64) -> f64 {
        interpolate(&self.values, self.mesh.length(), x)
    }

    /// Writes `time, v_0, ..., v_n` as one CSV row.
    pub fn write_csv_row<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write!(w, "{}", fmt_num(self.time))?;
        for v in &self.values {
            write!(w, ",{}", fmt_num(*v))?;
        }
        writeln!(w)
    }
}

pub(crate) fn interpolate(values: &[f64], length: f64, x: f64) -> f64 {
    let n = values.len() - 1;
    if !(0.0..=length).contains(&x) {
        return 0.0;
    }
    let s = x / length * n as f64;
    let j = (s.floor() as usize).min(n - 1);
    let w = s - j as f64;
    values[j] * (1.0 - w) + values[j + 1] * w
}

pub(crate) fn pin_dirichlet(values: &mut [f64], bc: BcTag) {
    if bc.left_dirichlet() {
        values[0] = 0.0;
    }
    if bc.right_dirichlet() {
        let n = values.len() - 1;
        values[n] = 0.0;
    }
}

/// Largest absolute nodal value.
pub fn sup_norm(state: &GridFunction) -> f64 {
    state.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Tridiagonal spatial operator `L v_j = D (v_{j+1} - 2 v_j + v_{j-1}) + c_j (v_{j+1} - v_{j-1}) + a_j v_j`
/// with `D = κ/dx²` and `c_j = drift_j/(2 dx)`. Neumann ends use the ghost
/// reflection `v_{-1} = v_1`; Dirichlet rows are pinned to zero.
#[derive(Debug, Clone)]
pub(crate) struct SpatialOperator {
    pub bc: BcTag,
    pub diffusion: f64,
    pub advection: Drift,
}

#[derive(Debug, Clone)]
pub(crate) enum Drift {
    None,
    Uniform(f64),
    Nodal(Vec<f64>),
}

impl Drift {
    #[inline]
    fn at(&self, j: usize) -> f64 {
        match self {
            Drift::None => 0.0,
            Drift::Uniform(c) => *c,
            Drift::Nodal(c) => c[j],
        }
    }
}

impl SpatialOperator {
    /// Diffusion `kappa` and physical drift velocity per node on a mesh of spacing `dx`.
    pub fn new(bc: BcTag, kappa: f64, dx: f64, drift: Drift) -> Self {
        let scale = 1.0 / (2.0 * dx);
        let advection = match drift {
            Drift::None => Drift::None,
            Drift::Uniform(c) => Drift::Uniform(c * scale),
            Drift::Nodal(mut c) => {
                c.iter_mut().for_each(|v| *v *= scale);
                Drift::Nodal(c)
            }
        };
        Self {
            bc,
            diffusion: kappa / (dx * dx),
            advection,
        }
    }

    #[inline]
    fn row(&self, j: usize, last: usize, potential: f64) -> (f64, f64, f64) {
        let d = self.diffusion;
        let diag = -2.0 * d + potential;
        if j == 0 {
            (0.0, diag, 2.0 * d)
        } else if j == last {
            (2.0 * d, diag, 0.0)
        } else {
            let c = self.advection.at(j);
            (d - c, diag, d + c)
        }
    }

    /// Assembled matrix of `L` with the given zeroth-order term.
    pub fn assemble(&self, potential: Potential<'_>, nodes: usize) -> Tridiagonal {
        let mut m = Tridiagonal::zeros(nodes);
        let last = nodes - 1;
        for j in 0..nodes {
            let (lo, di, up) = self.row(j, last, potential.at(j));
            m.lower[j] = lo;
            m.diag[j] = di;
            m.upper[j] = up;
        }
        m
    }
}

/// Zeroth-order term `a_j` of the spatial operator.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Potential<'a> {
    Zero,
    Uniform(f64),
    Nodal(&'a [f64]),
}

impl Potential<'_> {
    #[inline]
    fn at(&self, j: usize) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Uniform(a) => *a,
            Potential::Nodal(a) => a[j],
        }
    }
}

/// One θ-step `(I - θ dt L) v⁺ = (I + (1-θ) dt L) v + dt s` with Dirichlet rows
/// pinned. Stencil evaluation and the Thomas forward sweep share one pass.
#[allow(clippy::too_many_arguments)]
pub(crate) fn theta_step_into(
    values: &[f64],
    op: &SpatialOperator,
    potential: Potential<'_>,
    source: Option<&[f64]>,
    dt: f64,
    theta: f64,
    out: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let nodes = values.len();
    let last = nodes - 1;
    let implicit = theta * dt;
    let explicit = (1.0 - theta) * dt;
    let (pin_left, pin_right) = (op.bc.left_dirichlet(), op.bc.right_dirichlet());
    for j in 0..nodes {
        let (lo, di, up) = op.row(j, last, potential.at(j));
        let mut lv = di * values[j];
        if j > 0 {
            lv += lo * values[j - 1];
        }
        if j < last {
            lv += up * values[j + 1];
        }
        let mut rhs = values[j] + explicit * lv;
        if let Some(s) = source {
            rhs += dt * s[j];
        }
        let (mut ml, mut md, mut mu) = (-implicit * lo, 1.0 - implicit * di, -implicit * up);
        if (j == 0 && pin_left) || (j == last && pin_right) {
            ml = 0.0;
            md = 1.0;
            mu = 0.0;
            rhs = 0.0;
        }
        let pivot = if j == 0 { md } else { md - ml * scratch[j - 1] };
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::ZeroPivot { row: j });
        }
        scratch[j] = mu / pivot;
        out[j] = if j == 0 {
            rhs / pivot
        } else {
            (rhs - ml * out[j - 1]) / pivot
        };
    }
    for j in (0..last).rev() {
        out[j] -= scratch[j] * out[j + 1];
    }
    if let Some(node) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { node });
    }
    Ok(())
}

pub(crate) fn theta_step(
    values: &[f64],
    op: &SpatialOperator,
    potential: Potential<'_>,
    source: Option<&[f64]>,
    dt: f64,
    theta: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; values.len()];
    let mut scratch = vec![0.0; values.len()];
    theta_step_into(
        values,
        op,
        potential,
        source,
        dt,
        theta,
        &mut out,
        &mut scratch,
    )?;
    Ok(out)
}

/// How an IMEX step treats the diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepKind {
    /// Crank–Nicolson with the reaction at the midpoint after one predictor pass.
    CrankNicolson,
    /// Two backward-Euler half steps with the reaction explicit at each start.
    Damped,
}

/// Seconds of simulated time between damped steps in multi-step drivers.
pub const DAMPING_INTERVAL: f64 = 0.25;

/// Picks a damped step on the first call and then once per `DAMPING_INTERVAL`.
///
/// Crank–Nicolson maps stiff modes to amplification factors near -1, so
/// nonsmooth data leaves persistent grid-scale oscillations once the smooth
/// part of the solution decays. Occasional backward-Euler half steps remove
/// them at a cost of O(dt²) per occurrence.
#[derive(Debug, Clone, Default)]
pub(crate) struct DampingSchedule {
    last: Option<f64>,
}

impl DampingSchedule {
    pub fn kind(&mut self, t: f64) -> StepKind {
        match self.last {
            Some(last) if t - last < DAMPING_INTERVAL - 1e-9 => StepKind::CrankNicolson,
            _ => {
                self.last = Some(t);
                StepKind::Damped
            }
        }
    }
}

fn reaction_source<R: Reaction + ?Sized>(
    values: &[f64],
    positions: &[f64],
    f: &R,
    t: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    f.source_into(t, positions, values, &mut out);
    out
}

/// IMEX step for `u_t = L u + u f(t, x, u)`.
pub(crate) fn imex_step<R: Reaction + ?Sized>(
    values: &[f64],
    op: &SpatialOperator,
    positions: &[f64],
    f: &R,
    t: f64,
    dt: f64,
    kind: StepKind,
) -> Result<Vec<f64>> {
    let mut next = match kind {
        StepKind::CrankNicolson => {
            let r0 = reaction_source(values, positions, f, t);
            let pred = theta_step(values, op, Potential::Zero, Some(&r0), dt, 0.5)?;
            let mid: Vec<f64> = values
                .iter()
                .zip(&pred)
                .map(|(u0, u1)| 0.5 * (u0 + u1))
                .collect();
            let rmid = reaction_source(&mid, positions, f, t + 0.5 * dt);
            theta_step(values, op, Potential::Zero, Some(&rmid), dt, 0.5)?
        }
        StepKind::Damped => {
            let half = 0.5 * dt;
            let r0 = reaction_source(values, positions, f, t);
            let mid = theta_step(values, op, Potential::Zero, Some(&r0), half, 1.0)?;
            let r1 = reaction_source(&mid, positions, f, t + half);
            theta_step(&mid, op, Potential::Zero, Some(&r1), half, 1.0)?
        }
    };
    clamp_small_negatives(&mut next)?;
    Ok(next)
}

pub(crate) fn clamp_small_negatives(values: &mut [f64]) -> Result<()> {
    for (node, v) in values.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -NEGATIVE_TOLERANCE {
                return Err(Error::NegativeOvershoot { node, value: *v });
            }
            *v = 0.0;
        }
    }
    Ok(())
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} must be positive"
        )));
    }
    Ok(())
}

/// Fills `out` with `a(t, x_j)`; returns a uniform potential when `a` ignores `x`.
pub(crate) fn sample_coefficient<'b>(
    a: &SeparableCoefficient,
    t: f64,
    xs: &[f64],
    out: &'b mut Vec<f64>,
) -> Potential<'b> {
    if a.is_space_independent() {
        Potential::Uniform(a.eval(t, 0.0))
    } else {
        out.clear();
        out.extend(xs.iter().map(|&x| a.eval(t, x)));
        Potential::Nodal(out)
    }
}

/// Advances `v_t = v_xx + γ v_x + a(t, x) v` by one Crank–Nicolson step with
/// `a` frozen at `t + dt/2`.
pub fn step_linear(
    state: &GridFunction,
    a: &SeparableCoefficient,
    drift: f64,
    dt: f64,
) -> Result<GridFunction> {
    check_dt(dt)?;
    let mesh = state.mesh;
    let mut prop = LinearPropagator::new(mesh, state.bc, a, drift);
    let mut values = state.values.clone();
    prop.step(&mut values, state.time, dt)?;
    Ok(GridFunction {
        mesh,
        bc: state.bc,
        values,
        time: state.time + dt,
    })
}

fn drift_of(gamma: f64) -> Drift {
    if gamma == 0.0 {
        Drift::None
    } else {
        Drift::Uniform(gamma)
    }
}

/// Crank–Nicolson propagator for the linear problem with reusable buffers.
pub(crate) struct LinearPropagator<'a> {
    a: &'a SeparableCoefficient,
    op: SpatialOperator,
    positions: Vec<f64>,
    sampled: Vec<f64>,
    next: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> LinearPropagator<'a> {
    pub fn new(mesh: Mesh1D, bc: BcTag, a: &'a SeparableCoefficient, drift: f64) -> Self {
        let nodes = mesh.nodes();
        Self {
            a,
            op: SpatialOperator::new(bc, 1.0, mesh.dx(), drift_of(drift)),
            positions: mesh.positions(),
            sampled: Vec::with_capacity(nodes),
            next: vec![0.0; nodes],
            scratch: vec![0.0; nodes],
        }
    }

    pub fn operator(&self) -> &SpatialOperator {
        &self.op
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn step(&mut self, values: &mut Vec<f64>, t: f64, dt: f64) -> Result<()> {
        let pot = sample_coefficient(self.a, t + 0.5 * dt, &self.positions, &mut self.sampled);
        theta_step_into(
            values,
            &self.op,
            pot,
            None,
            dt,
            0.5,
            &mut self.next,
            &mut self.scratch,
        )?;
        std::mem::swap(values, &mut self.next);
        Ok(())
    }

    fn step_theta(&mut self, values: &mut Vec<f64>, t: f64, dt: f64, theta: f64) -> Result<()> {
        let tf = t + (1.0 - theta) * dt;
        let pot = sample_coefficient(self.a, tf, &self.positions, &mut self.sampled);
        theta_step_into(
            values,
            &self.op,
            pot,
            None,
            dt,
            theta,
            &mut self.next,
            &mut self.scratch,
        )?;
        std::mem::swap(values, &mut self.next);
        Ok(())
    }

    /// Propagates over `[t, t + span]` in equal steps no larger than `dt`.
    ///
    /// With `damp`, the final Crank–Nicolson step is replaced by two
    /// backward-Euler half steps, which suppress the stiff modes that
    /// Crank–Nicolson only flips in sign.
    pub fn advance(
        &mut self,
        values: &mut Vec<f64>,
        t: f64,
        span: f64,
        dt: f64,
        damp: bool,
    ) -> Result<()> {
        let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let cn_steps = if damp { steps - 1 } else { steps };
        for k in 0..cn_steps {
            self.step(values, t + k as f64 * h, h)?;
        }
        if damp {
            let t0 = t + cn_steps as f64 * h;
            self.step_theta(values, t0, 0.5 * h, 1.0)?;
            self.step_theta(values, t0 + 0.5 * h, 0.5 * h, 1.0)?;
        }
        Ok(())
    }
}

/// One IMEX step of `u_t = u_xx + u f(t, x, u)` on the fixed mesh.
pub fn step_semilinear<R: Reaction + ?Sized>(
    state: &GridFunction,
    f: &R,
    dt: f64,
) -> Result<GridFunction> {
    check_dt(dt)?;
    if let Some(node) = state.values.iter().position(|v| *v < -NEGATIVE_TOLERANCE) {
        return Err(Error::InvalidArgument(format!(
            "semilinear step needs nonnegative data (node {node} is {})",
            state.values[node]
        )));
    }
    let mesh = state.mesh;
    let op = SpatialOperator::new(state.bc, 1.0, mesh.dx(), Drift::None);
    let values = imex_step(
        &state.values,
        &op,
        &mesh.positions(),
        f,
        state.time,
        dt,
        StepKind::CrankNicolson,
    )?;
    Ok(GridFunction {
        mesh,
        bc: state.bc,
        values,
        time: state.time + dt,
    })
}

/// Integrates the semilinear problem to each of `sample_times` (ascending, not
/// before the state's time), using steps no larger than `dt`, damped on the
/// `DampingSchedule`. Returns one snapshot per sample time.
pub fn evolve_semilinear<R: Reaction + ?Sized>(
    state: &GridFunction,
    f: &R,
    dt: f64,
    sample_times: &[f64],
) -> Result<Vec<GridFunction>> {
    check_dt(dt)?;
    let mesh = state.mesh;
    let op = SpatialOperator::new(state.bc, 1.0, mesh.dx(), Drift::None);
    let positions = mesh.positions();
    let mut values = state.values.clone();
    let mut t = state.time;
    let mut out = Vec::with_capacity(sample_times.len());
    let mut steps = 0usize;
    let mut damping = DampingSchedule::default();
    for &target in sample_times {
        if target < t - 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "sample time {target} precedes current time {t}"
            )));
        }
        let span = (target - t).max(0.0);
        let k = (span / dt - 1e-9).ceil().max(0.0) as usize;
        if k > 0 {
            let h = span / k as f64;
            for i in 0..k {
                let ti = t + i as f64 * h;
                let kind = damping.kind(ti);
                values = imex_step(&values, &op, &positions, f, ti, h, kind).map_err(|e| {
                    Error::Partial {
                        source: Box::new(e),
                        steps,
                        time: ti,
                    }
                })?;
                steps += 1;
            }
        }
        t = target;
        out.push(GridFunction {
            mesh,
            bc: state.bc,
            values: values.clone(),
            time: t,
        });
    }
    Ok(out)
}

/// Writes a header `time,u0,...,un` and one row per snapshot.
pub fn write_snapshots_csv<W: Write>(w: &mut W, snapshots: &[GridFunction]) -> io::Result<()> {
    let nodes = snapshots.first().map_or(0, |s| s.values.len());
    write!(w, "time")?;
    for j in 0..nodes {
        write!(w, ",u{j}")?;
    }
    writeln!(w)?;
    for s in snapshots {
        s.write_csv_row(w)?;
    }
    Ok(())
}
