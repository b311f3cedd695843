//! Principal Lyapunov exponents of `v_t = v_xx + γ v_x + a(t, x) v` on `(0, l)`
//! by renormalized long-horizon propagation, and critical lengths.

use std::io::{self, Write};

use crate::coefficients::SeparableCoefficient;
use crate::error::{Error, Result};
use crate::output::fmt_num;
use crate::parabolic::{BcTag, GridFunction, LinearPropagator, Mesh1D, Potential};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    pub dt: f64,
    /// Cells per unit length.
    pub cells_per_unit: usize,
    pub horizon: f64,
    /// Renormalization window.
    pub window: f64,
    /// Fail when the final-quarter window spread exceeds this.
    pub spread_tolerance: Option<f64>,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            dt: 1.0 / 256.0,
            cells_per_unit: 256,
            horizon: 2000.0,
            window: 1.0,
            spread_tolerance: None,
        }
    }
}

impl LyapunovOptions {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.window > 0.0) {
            return Err(Error::InvalidArgument(
                "dt and window must be positive".into(),
            ));
        }
        if self.horizon < 100.0 * self.window {
            return Err(Error::InvalidArgument(format!(
                "horizon {} must span at least 100 windows of {}",
                self.horizon, self.window
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub horizon: f64,
    pub renormalizations: usize,
    /// Max minus min of the per-window rates over the final quarter.
    pub window_spread: f64,
    /// Windows averaged for `value`.
    pub averaged_windows: usize,
}

impl LyapunovEstimate {
    /// Error proxy for `value`: the spread of the averaged rates divided by
    /// their count, floored at `1e-9`.
    pub fn uncertainty(&self) -> f64 {
        (self.window_spread / self.averaged_windows.max(1) as f64).max(1e-9)
    }
}

/// Sup-norm-one, interior-positive profile at the end of the propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalProfile(pub GridFunction);

/// Principal eigenvector of `v'' + γ v' + a(t0, x) v` by shifted inverse iteration.
fn frozen_principal_profile(
    prop: &LinearPropagator<'_>,
    a: &SeparableCoefficient,
    t0: f64,
    bc: BcTag,
) -> Result<Vec<f64>> {
    let xs = prop.positions();
    let nodes = xs.len();
    let sampled: Vec<f64> = xs.iter().map(|&x| a.eval(t0, x)).collect();
    let l = prop.operator().assemble(Potential::Nodal(&sampled), nodes);
    let shift = a.sup_bound() + 0.5;
    let mut m = l.clone();
    for j in 0..nodes {
        m.lower[j] = -l.lower[j];
        m.diag[j] = shift - l.diag[j];
        m.upper[j] = -l.upper[j];
    }
    let last = nodes - 1;
    if bc.left_dirichlet() {
        m.diag[0] = 1.0;
        m.upper[0] = 0.0;
    }
    if bc.right_dirichlet() {
        m.diag[last] = 1.0;
        m.lower[last] = 0.0;
    }
    let mut v = vec![1.0; nodes];
    let mut scratch = vec![0.0; nodes];
    for _ in 0..200 {
        if bc.left_dirichlet() {
            v[0] = 0.0;
        }
        if bc.right_dirichlet() {
            v[last] = 0.0;
        }
        m.solve_in_place(&mut v, &mut scratch)?;
        let s = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        v.iter_mut().for_each(|x| *x /= s);
    }
    Ok(v)
}

fn check_positive(values: &[f64], bc: BcTag) -> Result<()> {
    for j in bc.free_nodes(values.len()) {
        if !(values[j] > 0.0) {
            return Err(Error::LostPositivity {
                node: j,
                value: values[j],
            });
        }
    }
    Ok(())
}

/// Principal Lyapunov exponent on `(0, l)` with the given boundary conditions:
/// λ for `NeumannLeftDirichletRight`, λ̃ for `DirichletDirichlet`.
pub fn principal_lyapunov(
    a: &SeparableCoefficient,
    l: f64,
    bc: BcTag,
    drift: f64,
    opts: &LyapunovOptions,
) -> Result<(LyapunovEstimate, PrincipalProfile)> {
    opts.validate()?;
    if bc == BcTag::NeumannNeumann {
        return Err(Error::InvalidArgument(
            "exponents are defined for mixed or Dirichlet conditions".into(),
        ));
    }
    let mesh = Mesh1D::with_density(l, opts.cells_per_unit)?;
    let mut prop = LinearPropagator::new(mesh, bc, a, drift);
    let mut values = frozen_principal_profile(&prop, a, 0.0, bc)?;

    let windows = (opts.horizon / opts.window).round() as usize;
    let first_averaged = windows - windows / 4;
    let mut rates = Vec::with_capacity(windows - first_averaged);
    let mut t = 0.0;
    for k in 0..windows {
        prop.advance(&mut values, t, opts.window, opts.dt, true)?;
        t = (k + 1) as f64 * opts.window;
        check_positive(&values, bc)?;
        let norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if k >= first_averaged {
            rates.push(norm.ln() / opts.window);
        }
        values.iter_mut().for_each(|v| *v /= norm);
    }

    let value = rates.iter().sum::<f64>() / rates.len() as f64;
    let (lo, hi) = rates
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(r), hi.max(r))
        });
    let estimate = LyapunovEstimate {
        value,
        horizon: t,
        renormalizations: windows,
        window_spread: hi - lo,
        averaged_windows: rates.len(),
    };
    if let Some(tol) = opts.spread_tolerance {
        if estimate.window_spread > tol {
            return Err(Error::NotConverged {
                spread: estimate.window_spread,
                tolerance: tol,
            });
        }
    }
    let profile = GridFunction::new(mesh, bc, values, t)?;
    Ok((estimate, PrincipalProfile(profile)))
}

/// Principal eigenvalue `-(π/(2l))²` of `u'' = λu`, `u'(0) = u(l) = 0`, or
/// `-(π/l)²` with Dirichlet conditions at both ends.
pub fn laplacian_principal_eigenvalue(l: f64, bc: BcTag) -> f64 {
    let k = match bc {
        BcTag::NeumannLeftDirichletRight => std::f64::consts::PI / (2.0 * l),
        BcTag::DirichletDirichlet => std::f64::consts::PI / l,
        BcTag::NeumannNeumann => 0.0,
    };
    -k * k
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalLength {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    /// `(l, λ)` at every evaluation, in order.
    pub probes: Vec<(f64, f64)>,
}

/// Bisects on `l` for the sign change of λ(a, l).
pub fn critical_length(
    a: &SeparableCoefficient,
    bc: BcTag,
    tol: f64,
    bracket: (f64, f64),
    opts: &LyapunovOptions,
) -> Result<CriticalLength> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < l_lo < l_hi and tol > 0, got ({lo}, {hi}), {tol}"
        )));
    }
    let mut probes = Vec::new();
    let mut exponent = |l: f64| -> Result<f64> {
        let v = principal_lyapunov(a, l, bc, 0.0, opts)?.0.value;
        probes.push((l, v));
        Ok(v)
    };
    let f_lo = exponent(lo)?;
    let f_hi = exponent(hi)?;
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::BadBracket(format!(
            "λ({lo}) = {f_lo}, λ({hi}) = {f_hi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if exponent(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalLength {
        value: 0.5 * (lo + hi),
        lo,
        hi,
        probes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub lower: LyapunovEstimate,
    pub upper: LyapunovEstimate,
    pub tolerance: f64,
    pub holds: bool,
}

/// Checks λ(a1, l1) ≤ λ(a2, l2) for `a1 ≤ a2`, `l1 ≤ l2`.
pub fn monotonicity_probe(
    a1: &SeparableCoefficient,
    a2: &SeparableCoefficient,
    l1: f64,
    l2: f64,
    bc: BcTag,
    opts: &LyapunovOptions,
) -> Result<MonotonicityReport> {
    if l1 > l2 {
        return Err(Error::InvalidArgument(format!(
            "need l1 <= l2, got {l1} > {l2}"
        )));
    }
    if !a1.certified_below(a2) {
        return Err(Error::InvalidArgument(
            "a1 <= a2 cannot be certified from amplitude bounds".into(),
        ));
    }
    let (lower, _) = principal_lyapunov(a1, l1, bc, 0.0, opts)?;
    let (upper, _) = principal_lyapunov(a2, l2, bc, 0.0, opts)?;
    let tolerance = lower.uncertainty() + upper.uncertainty();
    Ok(MonotonicityReport {
        lower,
        upper,
        tolerance,
        holds: lower.value <= upper.value + tolerance,
    })
}

/// Smallest Dirichlet exponent λ̃(a(·, · + y), l) over the sampled shifts `y`.
pub fn min_exponent_over_shifts(
    a: &SeparableCoefficient,
    l: f64,
    shifts: &[f64],
    opts: &LyapunovOptions,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut out = Vec::with_capacity(shifts.len());
    for &y in shifts {
        let (est, _) = principal_lyapunov(
            &a.spatially_shifted(y),
            l,
            BcTag::DirichletDirichlet,
            0.0,
            opts,
        )?;
        out.push((y, est.value));
    }
    let min = out.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok((min, out))
}

pub const CSV_HEADER: &str = "l,bc,gamma,value,window_spread,horizon";

/// One CSV row `l,bc,gamma,value,window_spread,horizon`.
pub fn write_csv_row<W: Write>(
    w: &mut W,
    l: f64,
    bc: BcTag,
    gamma: f64,
    est: &LyapunovEstimate,
) -> io::Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{}",
        fmt_num(l),
        bc,
        fmt_num(gamma),
        fmt_num(est.value),
        fmt_num(est.window_spread),
        fmt_num(est.horizon)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{QuasiPeriodicSignal, SpatialMode, SpatialProfile};
    use std::f64::consts::PI;

    fn quick() -> LyapunovOptions {
        LyapunovOptions {
            dt: 1.0 / 64.0,
            cells_per_unit: 64,
            horizon: 100.0,
            ..Default::default()
        }
    }

    #[test]
    fn constant_growth_at_critical_length() {
        let a = SeparableCoefficient::constant(1.0);
        let (est, profile) = principal_lyapunov(
            &a,
            PI / 2.0,
            BcTag::NeumannLeftDirichletRight,
            0.0,
            &quick(),
        )
        .unwrap();
        assert!(est.value.abs() < 1e-3, "λ = {}", est.value);
        assert!(est.window_spread < 1e-6);
        assert!((profile.0.sup_norm() - 1.0).abs() < 1e-15);
        assert_eq!(est.renormalizations, 100);
        assert_eq!(est.averaged_windows, 25);
    }

    #[test]
    fn dirichlet_constant_growth() {
        let a = SeparableCoefficient::constant(1.0);
        let (est, profile) =
            principal_lyapunov(&a, PI, BcTag::DirichletDirichlet, 0.0, &quick()).unwrap();
        assert!(est.value.abs() < 1e-3, "λ̃ = {}", est.value);
        let v = &profile.0.values;
        assert_eq!(v[0], 0.0);
        assert!(v[1..v.len() - 1].iter().all(|x| *x > 0.0));
    }

    #[test]
    fn profile_is_cosine_for_constant_coefficient() {
        let a = SeparableCoefficient::constant(0.3);
        let l = 2.0;
        let (_, profile) =
            principal_lyapunov(&a, l, BcTag::NeumannLeftDirichletRight, 0.0, &quick()).unwrap();
        let g = &profile.0;
        for (j, v) in g.values.iter().enumerate() {
            let expect = (PI * g.mesh.x(j) / (2.0 * l)).cos();
            assert!((v - expect).abs() < 1e-3);
        }
    }

    #[test]
    fn short_horizon_rejected() {
        let a = SeparableCoefficient::constant(1.0);
        let opts = LyapunovOptions {
            horizon: 50.0,
            ..quick()
        };
        assert!(principal_lyapunov(&a, 1.0, BcTag::NeumannLeftDirichletRight, 0.0, &opts).is_err());
    }

    #[test]
    fn spread_tolerance_enforced() {
        let a = SeparableCoefficient::temporal(
            QuasiPeriodicSignal::constant(1.0)
                .with_sine(0.5, 1.0)
                .unwrap(),
        );
        let opts = LyapunovOptions {
            spread_tolerance: Some(1e-3),
            ..quick()
        };
        assert!(matches!(
            principal_lyapunov(&a, 2.0, BcTag::NeumannLeftDirichletRight, 0.0, &opts),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn drift_shifts_exponent_by_quarter_gamma_squared() {
        // v = e^{-γx/2} w removes the drift: λ̃(a, γ, l) = a - γ²/4 - (π/l)²
        let a = SeparableCoefficient::constant(1.0);
        let gamma = 0.6;
        let l = 3.0;
        let (est, _) =
            principal_lyapunov(&a, l, BcTag::DirichletDirichlet, gamma, &quick()).unwrap();
        let expect = 1.0 - gamma * gamma / 4.0 - (PI / l).powi(2);
        assert!(
            (est.value - expect).abs() < 2e-3,
            "{} vs {expect}",
            est.value
        );
    }

    #[test]
    fn periodic_profile_returns_after_one_period() {
        // period 2 in time, space-dependent so the profile shape moves
        let spatial = SpatialProfile::periodic(
            3.0,
            vec![SpatialMode {
                amplitude: 0.5,
                index: 1,
                phase: 0.0,
            }],
        )
        .unwrap();
        let temporal = QuasiPeriodicSignal::constant(1.0)
            .with_cosine(0.8, PI, 0.3)
            .unwrap();
        let a = SeparableCoefficient::new(temporal, spatial);
        let opts = |h: f64| LyapunovOptions {
            horizon: h,
            ..quick()
        };
        let bc = BcTag::NeumannLeftDirichletRight;
        let (_, p1) = principal_lyapunov(&a, 3.0, bc, 0.0, &opts(200.0)).unwrap();
        let (_, p2) = principal_lyapunov(&a, 3.0, bc, 0.0, &opts(202.0)).unwrap();
        let (_, p_half) = principal_lyapunov(&a, 3.0, bc, 0.0, &opts(201.0)).unwrap();
        assert!((p2.0.sup_norm() - 1.0).abs() < 1e-15);
        let diff =
            p1.0.values
                .iter()
                .zip(&p2.0.values)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-4, "diff = {diff}");
        let moved =
            p1.0.values
                .iter()
                .zip(&p_half.0.values)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(moved > 1e-3, "profile should move within a period: {moved}");
    }

    #[test]
    fn critical_length_bad_bracket() {
        let a = SeparableCoefficient::constant(1.0);
        let err = critical_length(
            &a,
            BcTag::NeumannLeftDirichletRight,
            1e-2,
            (2.0, 3.0),
            &quick(),
        );
        assert!(matches!(err, Err(Error::BadBracket(_))));
    }

    #[test]
    fn critical_length_for_growth_four() {
        let a = SeparableCoefficient::constant(4.0);
        let r = critical_length(
            &a,
            BcTag::NeumannLeftDirichletRight,
            1e-3,
            (0.5, 2.0),
            &quick(),
        )
        .unwrap();
        assert!((r.value - PI / 4.0).abs() < 1e-2, "{}", r.value);
        assert!(r.hi - r.lo <= 1e-3);
    }

    #[test]
    fn monotonicity_examples() {
        let bc = BcTag::NeumannLeftDirichletRight;
        let one = SeparableCoefficient::constant(1.0);
        let two = SeparableCoefficient::constant(2.0);
        let r = monotonicity_probe(&one, &two, 2.0, 2.0, bc, &quick()).unwrap();
        assert!(r.holds);
        assert!((r.upper.value - r.lower.value - 1.0).abs() < 2e-3);

        let r = monotonicity_probe(&one, &one, 2.0, 4.0, bc, &quick()).unwrap();
        assert!(r.holds && r.lower.value < r.upper.value);

        let r = monotonicity_probe(&one, &one, 3.0, 3.0, bc, &quick()).unwrap();
        assert!((r.upper.value - r.lower.value).abs() < 2e-3);

        assert!(monotonicity_probe(&two, &one, 2.0, 2.0, bc, &quick()).is_err());
    }

    #[test]
    fn spatial_shift_sampling() {
        let spatial = SpatialProfile::periodic(
            2.0,
            vec![SpatialMode {
                amplitude: 0.5,
                index: 1,
                phase: 0.0,
            }],
        )
        .unwrap();
        let a = SeparableCoefficient::new(QuasiPeriodicSignal::constant(1.0), spatial);
        let (min, all) = min_exponent_over_shifts(&a, 4.0, &[0.0, 0.5, 1.0], &quick()).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.iter().all(|p| p.1 >= min));
        // domain length is two periods: every shift sees a rearranged coefficient with the same mean
        assert!(min > 1.0 - 0.5 - (PI / 4.0).powi(2));
    }

    #[test]
    fn csv_row_format() {
        let est = LyapunovEstimate {
            value: 0.5,
            horizon: 100.0,
            renormalizations: 100,
            window_spread: 0.0,
            averaged_windows: 25,
        };
        let mut buf = Vec::new();
        write_csv_row(&mut buf, 2.0, BcTag::DirichletDirichlet, 0.0, &est).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2,dirichlet,0,0.5,0,100\n");
    }
}
