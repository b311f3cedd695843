//! Time almost-periodic, space-periodic coefficients and the logistic KPP
//! reaction `f(t, x, u) = a(t, x) - b(t, x) u`.
//!
//! Almost-periodic signals are finite trigonometric sums, so time shifts and
//! long-time means are exact.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// One cosine mode `amplitude * cos(frequency * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// `mean + sum amplitude * cos(frequency * t + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPeriodicSignal {
    mean: f64,
    modes: Vec<Mode>,
}

impl QuasiPeriodicSignal {
    pub fn new(mean: f64, modes: Vec<Mode>) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidCoefficient(format!(
                "mean {mean} is not finite"
            )));
        }
        let mut normalized = Vec::with_capacity(modes.len());
        for (k, m) in modes.into_iter().enumerate() {
            if !(m.frequency.is_finite() && m.frequency > 0.0) {
                return Err(Error::InvalidCoefficient(format!(
                    "mode {k}: frequency {} must be positive and finite",
                    m.frequency
                )));
            }
            if !m.amplitude.is_finite() || !m.phase.is_finite() {
                return Err(Error::InvalidCoefficient(format!(
                    "mode {k}: amplitude and phase must be finite"
                )));
            }
            normalized.push(Mode {
                phase: m.phase.rem_euclid(TAU),
                ..m
            });
        }
        Ok(Self {
            mean,
            modes: normalized,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            mean: value,
            modes: Vec::new(),
        }
    }

    /// Adds `amplitude * sin(frequency * t)`, stored as a cosine with phase 3π/2.
    pub fn with_sine(mut self, amplitude: f64, frequency: f64) -> Result<Self> {
        let mut modes = std::mem::take(&mut self.modes);
        modes.push(Mode {
            amplitude,
            frequency,
            phase: 1.5 * PI,
        });
        Self::new(self.mean, modes)
    }

    pub fn with_cosine(mut self, amplitude: f64, frequency: f64, phase: f64) -> Result<Self> {
        let mut modes = std::mem::take(&mut self.modes);
        modes.push(Mode {
            amplitude,
            frequency,
            phase,
        });
        Self::new(self.mean, modes)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.modes.iter().fold(self.mean, |acc, m| {
            acc + m.amplitude * (m.frequency * t + m.phase).cos()
        })
    }

    /// Birkhoff time average; every positive-frequency mode averages out.
    pub fn mean_value(&self) -> f64 {
        self.mean
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn is_constant(&self) -> bool {
        self.modes.iter().all(|m| m.amplitude == 0.0)
    }

    fn amplitude_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.amplitude.abs()).sum()
    }

    pub fn upper_bound(&self) -> f64 {
        self.mean + self.amplitude_sum()
    }

    pub fn lower_bound(&self) -> f64 {
        self.mean - self.amplitude_sum()
    }

    fn shifted_mean(&self, c: f64) -> Self {
        Self {
            mean: self.mean + c,
            modes: self.modes.clone(),
        }
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            mean: self.mean * s,
            modes: self
                .modes
                .iter()
                .map(|m| Mode {
                    amplitude: m.amplitude * s,
                    ..*m
                })
                .collect(),
        }
    }
}

/// One spatial mode `amplitude * cos(2π index x / period + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialMode {
    pub amplitude: f64,
    pub index: u32,
    pub phase: f64,
}

/// Spatial factor of a separable coefficient; always strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialProfile {
    Constant,
    Periodic {
        period: f64,
        modes: Vec<SpatialMode>,
    },
}

impl SpatialProfile {
    pub fn periodic(period: f64, modes: Vec<SpatialMode>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "spatial period {period} must be positive"
            )));
        }
        let sum: f64 = modes.iter().map(|m| m.amplitude.abs()).sum();
        if !(sum < 1.0) {
            return Err(Error::InvalidCoefficient(format!(
                "spatial amplitudes sum to {sum}; must be below 1 to keep the profile positive"
            )));
        }
        if modes.iter().any(|m| !m.phase.is_finite()) {
            return Err(Error::InvalidCoefficient("spatial phase not finite".into()));
        }
        Ok(SpatialProfile::Periodic { period, modes })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SpatialProfile::Constant => 1.0,
            SpatialProfile::Periodic { period, modes } => modes.iter().fold(1.0, |acc, m| {
                acc + m.amplitude * (TAU * f64::from(m.index) * x / period + m.phase).cos()
            }),
        }
    }

    fn amplitude_sum(&self) -> f64 {
        match self {
            SpatialProfile::Constant => 0.0,
            SpatialProfile::Periodic { modes, .. } => modes.iter().map(|m| m.amplitude.abs()).sum(),
        }
    }

    pub fn upper_bound(&self) -> f64 {
        1.0 + self.amplitude_sum()
    }

    pub fn lower_bound(&self) -> f64 {
        1.0 - self.amplitude_sum()
    }

    pub fn is_constant(&self) -> bool {
        self.amplitude_sum() == 0.0
    }

    /// Profile of `x -> self(x + y)`.
    pub fn shifted(&self, y: f64) -> Self {
        match self {
            SpatialProfile::Constant => SpatialProfile::Constant,
            SpatialProfile::Periodic { period, modes } => SpatialProfile::Periodic {
                period: *period,
                modes: modes
                    .iter()
                    .map(|m| SpatialMode {
                        phase: (m.phase + TAU * f64::from(m.index) * y / period).rem_euclid(TAU),
                        ..*m
                    })
                    .collect(),
            },
        }
    }
}

/// `temporal(t) * spatial(x) + offset`.
///
/// The offset is zero for coefficients read from a config; it exists so that
/// `a + c` for a constant `c` stays representable.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableCoefficient {
    pub temporal: QuasiPeriodicSignal,
    pub spatial: SpatialProfile,
    offset: f64,
}

impl SeparableCoefficient {
    pub fn new(temporal: QuasiPeriodicSignal, spatial: SpatialProfile) -> Self {
        Self {
            temporal,
            spatial,
            offset: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(
            QuasiPeriodicSignal::constant(value),
            SpatialProfile::Constant,
        )
    }

    pub fn temporal(signal: QuasiPeriodicSignal) -> Self {
        Self::new(signal, SpatialProfile::Constant)
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self.spatial {
            SpatialProfile::Constant => self.temporal.eval(t) + self.offset,
            _ => self.temporal.eval(t) * self.spatial.eval(x) + self.offset,
        }
    }

    /// `a + c`.
    pub fn plus_constant(&self, c: f64) -> Self {
        if self.spatial.is_constant() {
            Self {
                temporal: self.temporal.shifted_mean(c),
                spatial: SpatialProfile::Constant,
                offset: self.offset,
            }
        } else {
            Self {
                offset: self.offset + c,
                ..self.clone()
            }
        }
    }

    /// `s * a` for `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            temporal: self.temporal.scaled(s),
            spatial: self.spatial.clone(),
            offset: self.offset * s,
        }
    }

    /// `(t, x) -> a(t, x + y)`.
    pub fn spatially_shifted(&self, y: f64) -> Self {
        Self {
            spatial: self.spatial.shifted(y),
            ..self.clone()
        }
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_space_independent(&self) -> bool {
        self.spatial.is_constant()
    }

    /// Upper bound of `a` over all `(t, x)` from the amplitude sums.
    pub fn sup_bound(&self) -> f64 {
        let (tlo, thi) = (self.temporal.lower_bound(), self.temporal.upper_bound());
        let (slo, shi) = (self.spatial.lower_bound(), self.spatial.upper_bound());
        (thi * shi).max(thi * slo).max(tlo * shi).max(tlo * slo) + self.offset
    }

    /// Lower bound of `a` over all `(t, x)` from the amplitude sums.
    pub fn inf_bound(&self) -> f64 {
        let (tlo, thi) = (self.temporal.lower_bound(), self.temporal.upper_bound());
        let (slo, shi) = (self.spatial.lower_bound(), self.spatial.upper_bound());
        (thi * shi).min(thi * slo).min(tlo * shi).min(tlo * slo) + self.offset
    }

    /// Time average `â` when the coefficient does not depend on `x`.
    pub fn time_mean(&self) -> Option<f64> {
        self.is_space_independent()
            .then(|| self.temporal.mean_value() + self.offset)
    }

    /// `true` if `self <= other` everywhere can be certified from amplitude bounds
    /// (exact for coefficients sharing the same oscillating part).
    pub fn certified_below(&self, other: &Self) -> bool {
        if self.spatial == other.spatial && self.temporal.modes == other.temporal.modes {
            if self.spatial.is_constant() {
                return self.temporal.mean + self.offset <= other.temporal.mean + other.offset;
            }
            let dm = other.temporal.mean - self.temporal.mean;
            let off = other.offset - self.offset;
            let s = &self.spatial;
            return dm * s.lower_bound() + off >= 0.0 && dm * s.upper_bound() + off >= 0.0;
        }
        self.sup_bound() <= other.inf_bound()
    }
}

/// The per-capita growth rate `f(t, x, u)` of a KPP equation `u_t = u_xx + u f`.
pub trait Reaction: Send + Sync {
    fn eval_f(&self, t: f64, x: f64, u: f64) -> f64;

    fn eval_a(&self, t: f64, x: f64) -> f64 {
        self.eval_f(t, x, 0.0)
    }

    /// A level `M` above which `f < 0` everywhere.
    fn carrying_bound(&self) -> Result<f64>;

    /// `true` if `f` does not depend on `x`.
    fn is_space_independent(&self) -> bool {
        false
    }

    /// `out_j = u_j f(t, x_j, u_j)`.
    fn source_into(&self, t: f64, positions: &[f64], values: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            values
                .iter()
                .zip(positions)
                .map(|(&u, &x)| u * self.eval_f(t, x, u)),
        );
    }
}

/// Logistic reaction `f(t, x, u) = a(t + s, x) - b(t + s, x) u` with time shift `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct KppReaction {
    a: SeparableCoefficient,
    b: SeparableCoefficient,
    time_shift: f64,
}

impl KppReaction {
    pub fn new(a: SeparableCoefficient, b: SeparableCoefficient) -> Result<Self> {
        let inf_b = b.inf_bound();
        if !(inf_b > 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "inf of b is bounded only by {inf_b}; must be positive"
            )));
        }
        Ok(Self {
            a,
            b,
            time_shift: 0.0,
        })
    }

    /// Fisher reaction `1 - u`.
    pub fn fisher() -> Self {
        Self::logistic(SeparableCoefficient::constant(1.0))
    }

    /// `a - u` with `b ≡ 1`.
    pub fn logistic(a: SeparableCoefficient) -> Self {
        Self {
            a,
            b: SeparableCoefficient::constant(1.0),
            time_shift: 0.0,
        }
    }

    pub fn a(&self) -> &SeparableCoefficient {
        &self.a
    }

    pub fn b(&self) -> &SeparableCoefficient {
        &self.b
    }

    pub fn shift(&self) -> f64 {
        self.time_shift
    }

    /// Hull element `f · τ`: `(t, x, u) -> f(t + τ, x, u)`.
    pub fn time_shift(&self, tau: f64) -> Self {
        Self {
            time_shift: self.time_shift + tau,
            ..self.clone()
        }
    }

    /// `a` with the stored time shift folded into the phases.
    pub fn shifted_a(&self) -> SeparableCoefficient {
        shift_coefficient(&self.a, self.time_shift)
    }
}

fn shift_coefficient(c: &SeparableCoefficient, tau: f64) -> SeparableCoefficient {
    let modes = c
        .temporal
        .modes
        .iter()
        .map(|m| Mode {
            phase: (m.phase + m.frequency * tau).rem_euclid(TAU),
            ..*m
        })
        .collect();
    SeparableCoefficient {
        temporal: QuasiPeriodicSignal {
            mean: c.temporal.mean,
            modes,
        },
        ..c.clone()
    }
}

impl Reaction for KppReaction {
    #[inline]
    fn eval_f(&self, t: f64, x: f64, u: f64) -> f64 {
        let s = t + self.time_shift;
        self.a.eval(s, x) - self.b.eval(s, x) * u
    }

    #[inline]
    fn eval_a(&self, t: f64, x: f64) -> f64 {
        self.a.eval(t + self.time_shift, x)
    }

    /// `sup a / inf b`.
    fn carrying_bound(&self) -> Result<f64> {
        let inf_b = self.b.inf_bound();
        if !(inf_b > 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "inf of b bounded only by {inf_b}"
            )));
        }
        Ok(self.a.sup_bound() / inf_b)
    }

    fn is_space_independent(&self) -> bool {
        self.a.is_space_independent() && self.b.is_space_independent()
    }

    fn source_into(&self, t: f64, positions: &[f64], values: &[f64], out: &mut Vec<f64>) {
        let s = t + self.time_shift;
        out.clear();
        if self.is_space_independent() {
            let (a, b) = (self.a.eval(s, 0.0), self.b.eval(s, 0.0));
            out.extend(values.iter().map(|&u| u * (a - b * u)));
        } else {
            out.extend(
                values
                    .iter()
                    .zip(positions)
                    .map(|(&u, &x)| u * (self.a.eval(s, x) - self.b.eval(s, x) * u)),
            );
        }
    }
}

/// User-supplied growth rate with a caller-provided bound `M`.
#[derive(Clone)]
pub struct CustomReaction {
    f: Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    bound: f64,
}

impl CustomReaction {
    pub fn new<F>(f: F, bound: f64) -> Result<Self>
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "carrying bound {bound} must be positive"
            )));
        }
        Ok(Self {
            f: Arc::new(f),
            bound,
        })
    }
}

impl fmt::Debug for CustomReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomReaction")
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

impl Reaction for CustomReaction {
    fn eval_f(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.f)(t, x, u)
    }

    fn carrying_bound(&self) -> Result<f64> {
        Ok(self.bound)
    }
}

pub fn eval_a<R: Reaction + ?Sized>(c: &R, t: f64, x: f64) -> f64 {
    c.eval_a(t, x)
}

pub fn eval_f<R: Reaction + ?Sized>(c: &R, t: f64, x: f64, u: f64) -> f64 {
    c.eval_f(t, x, u)
}

pub fn mean_value(s: &QuasiPeriodicSignal) -> f64 {
    s.mean_value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sin_signal(mean: f64, amp: f64, freq: f64) -> QuasiPeriodicSignal {
        QuasiPeriodicSignal::constant(mean)
            .with_sine(amp, freq)
            .unwrap()
    }

    fn two_tone() -> QuasiPeriodicSignal {
        QuasiPeriodicSignal::constant(1.0)
            .with_sine(0.5, 1.0)
            .unwrap()
            .with_sine(0.5, 2f64.sqrt())
            .unwrap()
    }

    #[test]
    fn eval_a_examples() {
        let f = KppReaction::fisher();
        assert_eq!(eval_a(&f, 3.7, -2.0), 1.0);

        let f = KppReaction::logistic(SeparableCoefficient::temporal(sin_signal(1.0, 0.5, 1.0)));
        assert_abs_diff_eq!(eval_a(&f, PI / 2.0, 0.0), 1.5, epsilon = 1e-15);

        let spatial = SpatialProfile::periodic(
            1.0,
            vec![SpatialMode {
                amplitude: 0.3,
                index: 1,
                phase: 0.0,
            }],
        )
        .unwrap();
        let a = SeparableCoefficient::new(sin_signal(1.0, 0.5, 1.0), spatial);
        let f = KppReaction::logistic(a);
        assert_abs_diff_eq!(eval_a(&f, 0.0, 0.0), 1.3, epsilon = 1e-15);
    }

    #[test]
    fn eval_f_examples() {
        let f = KppReaction::fisher();
        assert_eq!(eval_f(&f, 0.0, 0.0, 1.0), 0.0);
        assert_eq!(eval_f(&f, 0.0, 0.0, 0.0), 1.0);
        let f = KppReaction::logistic(SeparableCoefficient::temporal(sin_signal(1.0, 0.5, 1.0)));
        assert_abs_diff_eq!(eval_f(&f, 0.0, 0.0, 2.0), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn time_shift_examples() {
        let f = KppReaction::logistic(SeparableCoefficient::temporal(two_tone()));
        let g = f.time_shift(0.0);
        for t in [0.0, 1.3, -7.2] {
            assert_eq!(eval_f(&f, t, 0.4, 0.3), eval_f(&g, t, 0.4, 0.3));
        }
        let back = f.time_shift(2.5).time_shift(-2.5);
        for t in [0.0, 1.3, -7.2] {
            assert_abs_diff_eq!(
                eval_f(&f, t, 0.4, 0.3),
                eval_f(&back, t, 0.4, 0.3),
                epsilon = 1e-14
            );
        }
        let f = KppReaction::logistic(SeparableCoefficient::temporal(sin_signal(0.0, 1.0, 1.0)));
        assert_abs_diff_eq!(eval_a(&f.time_shift(PI), 0.0, 0.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn shifted_a_folds_phase() {
        let f = KppReaction::logistic(SeparableCoefficient::temporal(two_tone())).time_shift(3.1);
        let a = f.shifted_a();
        for t in [0.0, 0.7, 11.0] {
            assert_abs_diff_eq!(a.eval(t, 0.0), f.eval_a(t, 0.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn mean_value_examples() {
        assert_eq!(mean_value(&QuasiPeriodicSignal::constant(2.5)), 2.5);
        assert_eq!(mean_value(&sin_signal(0.0, 1.0, 1.0)), 0.0);
        assert_eq!(mean_value(&two_tone()), 1.0);
    }

    #[test]
    fn mean_value_matches_quadrature() {
        // composite Simpson on [0, T], T = 1e4
        let s = two_tone();
        let t_end = 1.0e4;
        let n = 2_000_000usize;
        let h = t_end / n as f64;
        let mut acc = s.eval(0.0) + s.eval(t_end);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * s.eval(k as f64 * h);
        }
        let avg = acc * h / 3.0 / t_end;
        // each sine mode integrates to at most 2 * 0.5 / freq
        assert!((avg - mean_value(&s)).abs() < 2.0 / t_end, "avg = {avg}");
    }

    #[test]
    fn carrying_bound_examples() {
        assert_eq!(KppReaction::fisher().carrying_bound().unwrap(), 1.0);
        let f = KppReaction::logistic(SeparableCoefficient::temporal(sin_signal(1.0, 0.5, 1.0)));
        assert_abs_diff_eq!(f.carrying_bound().unwrap(), 1.5, epsilon = 1e-15);
        let f = KppReaction::new(
            SeparableCoefficient::constant(2.0),
            SeparableCoefficient::temporal(sin_signal(1.0, 0.5, 1.0)),
        )
        .unwrap();
        assert_abs_diff_eq!(f.carrying_bound().unwrap(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_nonpositive_b() {
        let b = SeparableCoefficient::temporal(sin_signal(1.0, 1.0, 1.0));
        assert!(KppReaction::new(SeparableCoefficient::constant(1.0), b).is_err());
    }

    #[test]
    fn rejects_bad_frequency_and_spatial_amplitude() {
        assert!(QuasiPeriodicSignal::constant(1.0)
            .with_sine(0.5, 0.0)
            .is_err());
        assert!(QuasiPeriodicSignal::constant(1.0)
            .with_sine(0.5, f64::NAN)
            .is_err());
        let m = SpatialMode {
            amplitude: 0.6,
            index: 1,
            phase: 0.0,
        };
        assert!(SpatialProfile::periodic(1.0, vec![m, m]).is_err());
    }

    #[test]
    fn spatial_shift_matches_translation() {
        let spatial = SpatialProfile::periodic(
            2.0,
            vec![SpatialMode {
                amplitude: 0.4,
                index: 3,
                phase: 0.2,
            }],
        )
        .unwrap();
        let a = SeparableCoefficient::new(two_tone(), spatial);
        let b = a.spatially_shifted(0.77);
        for (t, x) in [(0.0, 0.0), (1.0, 0.3), (5.0, -2.0)] {
            assert_abs_diff_eq!(b.eval(t, x), a.eval(t, x + 0.77), epsilon = 1e-13);
        }
    }

    #[test]
    fn custom_reaction_hook() {
        let f = CustomReaction::new(|_, _, u| 1.0 - u * u, 1.0).unwrap();
        assert_eq!(eval_f(&f, 0.0, 0.0, 0.5), 0.75);
        assert_eq!(f.carrying_bound().unwrap(), 1.0);
        assert!(CustomReaction::new(|_, _, u| -u, 0.0).is_err());
    }

    fn arb_reaction() -> impl Strategy<Value = KppReaction> {
        (
            0.2f64..3.0,
            -0.5f64..0.5,
            -0.5f64..0.5,
            0.0f64..0.4,
            0.0f64..TAU,
        )
            .prop_map(|(mean, a1, a2, sa, ph)| {
                let temporal = QuasiPeriodicSignal::constant(mean)
                    .with_sine(a1, 1.0)
                    .unwrap()
                    .with_cosine(a2, 2f64.sqrt(), ph)
                    .unwrap();
                let spatial = SpatialProfile::periodic(
                    1.5,
                    vec![SpatialMode {
                        amplitude: sa,
                        index: 1,
                        phase: ph,
                    }],
                )
                .unwrap();
                let b = SeparableCoefficient::new(
                    QuasiPeriodicSignal::constant(1.0)
                        .with_sine(0.3, 0.5)
                        .unwrap(),
                    SpatialProfile::Constant,
                );
                KppReaction::new(SeparableCoefficient::new(temporal, spatial), b).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn time_shift_is_exact(
            f in arb_reaction(),
            t in -100.0f64..100.0,
            x in -10.0f64..10.0,
            u in 0.0f64..5.0,
            tau in -100.0f64..100.0,
        ) {
            let shifted = f.time_shift(tau);
            let direct = eval_f(&f, t + tau, x, u);
            let via = eval_f(&shifted, t, x, u);
            // shift is applied as (t + tau) + 0 versus t + tau: identical up to one rounding
            prop_assert!((direct - via).abs() <= 1e-12 * (1.0 + direct.abs()));
        }

        #[test]
        fn f_strictly_decreasing_in_u(
            f in arb_reaction(),
            t in -50.0f64..50.0,
            x in -5.0f64..5.0,
            u in 0.0f64..5.0,
        ) {
            let h = 1e-6;
            let slope = (eval_f(&f, t, x, u + h) - eval_f(&f, t, x, u - h)) / (2.0 * h);
            prop_assert!(slope < 0.0);
        }

        #[test]
        fn f_negative_above_carrying_bound(
            f in arb_reaction(),
            t in -50.0f64..50.0,
            x in -5.0f64..5.0,
            excess in 1e-6f64..10.0,
        ) {
            let m = f.carrying_bound().unwrap();
            prop_assert!(eval_f(&f, t, x, m + excess) < 0.0);
        }

        #[test]
        fn bounds_enclose_values(f in arb_reaction(), t in -50.0f64..50.0, x in -5.0f64..5.0) {
            let a = f.a();
            let v = a.eval(t, x);
            prop_assert!(v <= a.sup_bound() + 1e-12 && v >= a.inf_bound() - 1e-12);
        }
    }
}
