//! Part metric, pullback construction of the positive almost-periodic solution
//! and two-run uniqueness checks.

use crate::coefficients::Reaction;
use crate::error::{Error, Result};
use crate::output::{Cell, Table};
use crate::parabolic::{evolve_semilinear, BcTag, GridFunction, Mesh1D};

/// Slack allowed when checking that ρ does not increase.
pub const TRACE_SLACK: f64 = 1e-6;
/// Slack allowed when checking that pullback profiles decrease with depth.
pub const DEPTH_SLACK: f64 = 1e-8;

fn same_grid(u1: &GridFunction, u2: &GridFunction) -> Result<()> {
    if u1.mesh != u2.mesh || u1.bc != u2.bc {
        return Err(Error::InvalidArgument(
            "profiles live on different meshes or boundary conditions".into(),
        ));
    }
    Ok(())
}

/// `ln max(sup u1/u2, sup u2/u1, 1)` over the nodes not pinned by a Dirichlet condition.
pub fn part_metric(u1: &GridFunction, u2: &GridFunction) -> Result<f64> {
    same_grid(u1, u2)?;
    let mut worst = 1.0f64;
    for j in u1.bc.free_nodes(u1.values.len()) {
        let (a, b) = (u1.values[j], u2.values[j]);
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::NotPositive(format!(
                "values {a:e} and {b:e} at node {j}"
            )));
        }
        worst = worst.max(a / b).max(b / a);
    }
    Ok(worst.ln())
}

/// First sample at which ρ grew by more than [`TRACE_SLACK`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceViolation {
    pub index: usize,
    pub rho_before: f64,
    pub rho_after: f64,
    pub first: GridFunction,
    pub second: GridFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartMetricTrace {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    pub labels: (String, String),
    pub violation: Option<TraceViolation>,
}

impl PartMetricTrace {
    pub fn is_nonincreasing(&self) -> bool {
        self.violation.is_none()
    }

    /// `ρ(t_k) - ρ(t_{k+1})` for consecutive samples.
    pub fn decrements(&self) -> Vec<f64> {
        self.rho.windows(2).map(|w| w[0] - w[1]).collect()
    }

    /// Columns `t,rho`.
    pub fn table(&self) -> Table {
        let mut table = Table::new(["t", "rho"]);
        for (&t, &r) in self.times.iter().zip(&self.rho) {
            table.push(vec![Cell::from(t), Cell::from(r)]);
        }
        table
    }
}

/// Samples ρ along two runs taken at the same times.
pub fn part_metric_trace(
    run1: &[GridFunction],
    run2: &[GridFunction],
    labels: (&str, &str),
) -> Result<PartMetricTrace> {
    if run1.len() != run2.len() {
        return Err(Error::InvalidArgument(format!(
            "runs have {} and {} samples",
            run1.len(),
            run2.len()
        )));
    }
    let mut trace = PartMetricTrace {
        times: Vec::with_capacity(run1.len()),
        rho: Vec::with_capacity(run1.len()),
        labels: (labels.0.to_owned(), labels.1.to_owned()),
        violation: None,
    };
    for (k, (u1, u2)) in run1.iter().zip(run2).enumerate() {
        if (u1.time - u2.time).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "sample {k} taken at times {} and {}",
                u1.time, u2.time
            )));
        }
        let rho = part_metric(u1, u2)?;
        if let Some(&prev) = trace.rho.last() {
            if trace.violation.is_none() && rho > prev + TRACE_SLACK {
                trace.violation = Some(TraceViolation {
                    index: k,
                    rho_before: prev,
                    rho_after: rho,
                    first: u1.clone(),
                    second: u2.clone(),
                });
            }
        }
        trace.times.push(u1.time);
        trace.rho.push(rho);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PullbackDomain {
    /// `(0, length)`, Neumann at 0 and Dirichlet at `length`.
    Bounded { length: f64 },
    /// Half line cut at `truncation` with a no-flux wall.
    HalfLine { truncation: f64 },
}

impl PullbackDomain {
    /// Half line cut at `max(4 l*, 40)`.
    pub fn half_line(l_star: f64) -> Self {
        PullbackDomain::HalfLine {
            truncation: (4.0 * l_star).max(40.0),
        }
    }

    pub fn length(self) -> f64 {
        match self {
            PullbackDomain::Bounded { length } => length,
            PullbackDomain::HalfLine { truncation } => truncation,
        }
    }

    pub fn bc(self) -> BcTag {
        match self {
            PullbackDomain::Bounded { .. } => BcTag::NeumannLeftDirichletRight,
            PullbackDomain::HalfLine { .. } => BcTag::NeumannNeumann,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackOptions {
    /// Increasing depths; the first pair agreeing within `tol` ends the search.
    pub depths: Vec<f64>,
    pub tol: f64,
    pub dt: f64,
    pub cells_per_unit: usize,
    /// Physical time at which the profile is wanted.
    pub target_time: f64,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        Self {
            depths: vec![25.0, 50.0, 100.0, 200.0, 400.0],
            tol: 1e-4,
            dt: 1.0 / 256.0,
            cells_per_unit: 32,
            target_time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackResult {
    pub profile: GridFunction,
    pub depth: f64,
    /// Sup-norm change from the previous depth.
    pub change: f64,
    /// Infimum over the nodes not pinned to zero.
    pub inf_interior: f64,
    /// `(depth, change from previous depth)`; the first change is infinite.
    pub history: Vec<(f64, f64)>,
}

impl PullbackResult {
    /// Columns `depth,change`.
    pub fn table(&self) -> Table {
        let mut table = Table::new(["depth", "change"]);
        for &(d, c) in &self.history {
            table.push(vec![Cell::from(d), Cell::from(c)]);
        }
        table
    }
}

fn interior_inf(u: &GridFunction) -> f64 {
    u.bc.free_nodes(u.values.len())
        .map(|j| u.values[j])
        .fold(f64::INFINITY, f64::min)
}

/// Profile at `target_time` of the solution started from the constant carrying
/// bound at `target_time - T`, for `T` along the depth schedule.
pub fn pullback_positive_solution<R: Reaction + ?Sized>(
    f: &R,
    domain: PullbackDomain,
    opts: &PullbackOptions,
) -> Result<PullbackResult> {
    if opts.depths.is_empty() || opts.depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "depth schedule must be nonempty and increasing".into(),
        ));
    }
    if !(opts.tol > 0.0 && opts.depths[0] > 0.0) {
        return Err(Error::InvalidArgument(
            "tol and depths must be positive".into(),
        ));
    }
    let m = f.carrying_bound()?;
    let mesh = Mesh1D::with_density(domain.length(), opts.cells_per_unit)?;
    let bc = domain.bc();

    let mut history = Vec::with_capacity(opts.depths.len());
    let mut previous: Option<GridFunction> = None;
    for &depth in &opts.depths {
        let start = GridFunction::from_fn(mesh, bc, opts.target_time - depth, |_| m)?;
        let profile = evolve_semilinear(&start, f, opts.dt, &[opts.target_time])?
            .pop()
            .expect("one sample requested");
        if profile.sup_norm() < opts.tol {
            return Err(Error::NegativeExponent(format!(
                "pullback profile collapsed to sup {:e} at depth {depth}",
                profile.sup_norm()
            )));
        }
        let change = match &previous {
            None => f64::INFINITY,
            Some(prev) => {
                let mut change = 0.0f64;
                for (j, (&p, &c)) in prev.values.iter().zip(&profile.values).enumerate() {
                    if c > p + DEPTH_SLACK {
                        return Err(Error::Monotonicity(format!(
                            "pullback profile grew by {:e} at node {j} between depths",
                            c - p
                        )));
                    }
                    change = change.max((p - c).abs());
                }
                change
            }
        };
        history.push((depth, change));
        log::debug!("pullback depth {depth}: change {change:e}");
        if change < opts.tol {
            return Ok(PullbackResult {
                inf_interior: interior_inf(&profile),
                profile,
                depth,
                change,
                history,
            });
        }
        previous = Some(profile);
    }
    let change = history.last().map_or(f64::INFINITY, |h| h.1);
    Err(Error::PullbackNotConverged {
        change,
        tolerance: opts.tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessReport {
    pub time: f64,
    pub sup_difference: f64,
    pub part_metric: f64,
    pub passes: bool,
}

/// Runs both initial data to time `t_end` and compares the results.
pub fn uniqueness_check<R: Reaction + ?Sized>(
    f: &R,
    u1: &GridFunction,
    u2: &GridFunction,
    t_end: f64,
    dt: f64,
    tol: f64,
) -> Result<UniquenessReport> {
    same_grid(u1, u2)?;
    let a = evolve_semilinear(u1, f, dt, &[t_end])?
        .pop()
        .expect("one sample");
    let b = evolve_semilinear(u2, f, dt, &[t_end])?
        .pop()
        .expect("one sample");
    let sup_difference = a
        .values
        .iter()
        .zip(&b.values)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let part_metric = part_metric(&a, &b)?;
    Ok(UniquenessReport {
        time: t_end,
        sup_difference,
        part_metric,
        passes: sup_difference < tol && part_metric < tol,
    })
}
