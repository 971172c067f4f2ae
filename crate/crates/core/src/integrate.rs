//! Adaptive Dormand–Prince 5(4) integrator with embedded error control.

use thiserror::Error;

use crate::qops::C64;

/// Scalar component of an ODE state.
pub trait Component: Copy + Send + Sync {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn scale(self, factor: f64) -> Self;
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Component for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, factor: f64) -> Self {
        self * factor
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Component for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, factor: f64) -> Self {
        self * factor
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("exceeded {steps} steps at t = {t}")]
    TooManySteps { t: f64, steps: usize },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid integration interval [{t0}, {t1}]")]
    BadInterval { t0: f64, t1: f64 },
    #[error("tolerances must be positive (rel {rel}, abs {abs})")]
    BadTolerance { rel: f64, abs: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-10, max_step: f64::INFINITY, max_steps: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

// Dormand–Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth minus embedded fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn combine<T: Component>(out: &mut [T], y: &[T], h: f64, terms: &[(f64, &[T])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (w, k) in terms {
            if *w != 0.0 {
                acc = acc.add(k[i].scale(*w));
            }
        }
        *o = y[i].add(acc.scale(h));
    }
}

fn weighted_rms<T: Component>(v: &[T], y0: &[T], y1: &[T], ctl: &StepControl) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let sum: f64 = v
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = ctl.abs_tol + ctl.rel_tol * a.modulus().max(b.modulus());
            (e.modulus() / sc).powi(2)
        })
        .sum();
    (sum / v.len() as f64).sqrt()
}

fn initial_step<T: Component, F>(rhs: &mut F, t0: f64, y0: &[T], f0: &[T], ctl: &StepControl) -> f64
where
    F: FnMut(f64, &[T], &mut [T]),
{
    let d0 = weighted_rms(y0, y0, y0, ctl);
    let d1 = weighted_rms(f0, y0, y0, ctl);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut y1 = y0.to_vec();
    combine(&mut y1, y0, h0, &[(1.0, f0)]);
    let mut f1 = vec![T::zero(); y0.len()];
    rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<T> = f1.iter().zip(f0).map(|(a, b)| a.add(b.scale(-1.0))).collect();
    let d2 = weighted_rms(&diff, y0, y0, ctl) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(ctl.max_step)
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1`.
///
/// `on_accept(t, y)` runs after every accepted step; it may adjust the
/// state in place (returning `true` when it did) or abort with an error.
pub fn integrate<T, F, O, E>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y0: Vec<T>,
    ctl: &StepControl,
    mut on_accept: O,
) -> Result<(Vec<T>, StepStats), E>
where
    T: Component,
    F: FnMut(f64, &[T], &mut [T]),
    O: FnMut(f64, &mut [T]) -> Result<bool, E>,
    E: From<IntegrateError>,
{
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(IntegrateError::BadInterval { t0, t1 }.into());
    }
    if !(ctl.rel_tol > 0.0 && ctl.abs_tol > 0.0) {
        return Err(IntegrateError::BadTolerance { rel: ctl.rel_tol, abs: ctl.abs_tol }.into());
    }
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut y = y0;
    let mut k1 = vec![T::zero(); n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
    );
    let mut tmp = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    let mut err = vec![T::zero(); n];

    rhs(t0, &y, &mut k1);
    stats.rhs_evals += 1;
    let mut h = initial_step(&mut rhs, t0, &y, &k1, ctl);
    stats.rhs_evals += 1;
    let mut t = t0;
    let mut last_rejected = false;

    while t < t1 {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(IntegrateError::TooManySteps { t, steps: ctl.max_steps }.into());
        }
        let remaining = t1 - t;
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(IntegrateError::StepUnderflow { t, h }.into());
        }

        combine(&mut tmp, &y, h, &[(A21, &k1)]);
        rhs(t + C2 * h, &tmp, &mut k2);
        combine(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        rhs(t + C3 * h, &tmp, &mut k3);
        combine(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(t + C4 * h, &tmp, &mut k4);
        combine(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(t + C5 * h, &tmp, &mut k5);
        combine(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        rhs(t + h, &tmp, &mut k6);
        combine(&mut y_new, &y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if last { t1 } else { t + h };
        rhs(t_new, &y_new, &mut k7);
        stats.rhs_evals += 6;

        for i in 0..n {
            err[i] = k1[i]
                .scale(E1)
                .add(k3[i].scale(E3))
                .add(k4[i].scale(E4))
                .add(k5[i].scale(E5))
                .add(k6[i].scale(E6))
                .add(k7[i].scale(E7))
                .scale(h);
        }
        let err_norm = weighted_rms(&err, &y, &y_new, ctl);
        if !err_norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            if h < 1e-300 {
                return Err(IntegrateError::NonFinite { t }.into());
            }
            stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        if err_norm <= 1.0 {
            stats.accepted += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            if on_accept(t, &mut y)? {
                rhs(t, &y, &mut k1);
                stats.rhs_evals += 1;
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            let fac_max = if last_rejected { 1.0 } else { FAC_MAX };
            let fac = (SAFETY * err_norm.max(1e-16).powf(-0.2)).clamp(FAC_MIN, fac_max);
            h = (h * fac).min(ctl.max_step);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (SAFETY * err_norm.powf(-0.2)).max(FAC_MIN);
            h *= fac;
            last_rejected = true;
        }
    }
    Ok((y, stats))
}
