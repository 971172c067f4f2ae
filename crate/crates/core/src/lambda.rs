//! Λ-system physics: control pulse, mixing angle, dark state, the
//! interaction Hamiltonian and the analytic dark-state decay model.
//!
//! Everything is in scaled units: `ħ = 1`, rates and couplings in units of
//! the signal coupling `g_c`, times in `1/g_c`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qops::{annihilation_operator, atomic_operator, ComplexMatrix, HilbertSpace, Level, StateVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("domain error: {0}")]
    Domain(String),
}

fn require(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value, reason })
    }
}

/// Sigmoid control field `Ω(t) = Ω₀ / (1 + exp((t - center)/T))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseProfile {
    pub omega0: f64,
    #[serde(rename = "T")]
    pub t_char: f64,
    /// Time offset of the sigmoid midpoint.
    #[serde(default)]
    pub center: f64,
}

impl PulseProfile {
    pub fn new(omega0: f64, t_char: f64) -> Result<Self, ModelError> {
        let p = Self { omega0, t_char, center: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        require(self.omega0 > 0.0 && self.omega0.is_finite(), "omega0", self.omega0, "must be positive")?;
        require(self.t_char > 0.0 && self.t_char.is_finite(), "T", self.t_char, "must be positive")?;
        require(self.center.is_finite(), "center", self.center, "must be finite")
    }

    fn phase(&self, t: f64) -> f64 {
        (t - self.center) / self.t_char
    }
}

/// One dissipative channel `C = √γ |to⟩⟨from|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayChannel {
    pub to: Level,
    pub from: Level,
    pub rate: f64,
}

/// Parameters of the Λ-system coupled to one cavity mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSystemSpec {
    pub g: f64,
    pub pulse: PulseProfile,
    /// One-photon detuning Δ.
    #[serde(default)]
    pub delta_one: f64,
    /// Two-photon detuning δ.
    #[serde(default)]
    pub delta_two: f64,
    #[serde(default)]
    pub decays: Vec<DecayChannel>,
    /// Cavity decay rate; enters the master equation as `√κ (1 ⊗ a)`.
    #[serde(default)]
    pub kappa: f64,
}

impl LambdaSystemSpec {
    /// Resonant, lossless system.
    pub fn new(g: f64, pulse: PulseProfile) -> Self {
        Self { g, pulse, delta_one: 0.0, delta_two: 0.0, decays: Vec::new(), kappa: 0.0 }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_delta_one(mut self, delta: f64) -> Self {
        self.delta_one = delta;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.pulse.validate()?;
        require(self.g >= 0.0 && self.g.is_finite(), "g", self.g, "must be non-negative")?;
        require(self.kappa >= 0.0 && self.kappa.is_finite(), "kappa", self.kappa, "must be non-negative")?;
        require(self.delta_one.is_finite(), "delta_one", self.delta_one, "must be finite")?;
        require(self.delta_two.is_finite(), "delta_two", self.delta_two, "must be finite")?;
        for d in &self.decays {
            require(d.rate >= 0.0 && d.rate.is_finite(), "gamma", d.rate, "must be non-negative")?;
        }
        Ok(())
    }
}

/// `Ω(t)`, strictly decreasing from Ω₀ to 0.
pub fn control_pulse(t: f64, pulse: &PulseProfile) -> f64 {
    let x = pulse.phase(t);
    if x > 0.0 {
        let e = (-x).exp();
        pulse.omega0 * e / (1.0 + e)
    } else {
        pulse.omega0 / (1.0 + x.exp())
    }
}

/// `θ = arctan(g/Ω)` with the limit `θ = π/2` at `Ω = 0`.
pub fn mixing_angle(g: f64, omega: f64) -> f64 {
    if omega <= 0.0 {
        return if g > 0.0 { FRAC_PI_2 } else { 0.0 };
    }
    g.atan2(omega)
}

/// Mixing angle along the pulse, `θ(t) = arctan((g/Ω₀)(1 + e^{t/T}))`.
///
/// Identical to `mixing_angle(g, control_pulse(t))` but stays accurate
/// once the pulse has underflowed.
pub fn mixing_angle_at(t: f64, g: f64, pulse: &PulseProfile) -> f64 {
    let x = pulse.phase(t);
    let tail = if x > 700.0 { f64::INFINITY } else { 1.0 + x.exp() };
    (g * tail).atan2(pulse.omega0)
}

/// `cos²θ(t)` along the pulse.
pub fn ground_overlap_at(t: f64, g: f64, pulse: &PulseProfile) -> f64 {
    let r = g / pulse.omega0;
    let x = pulse.phase(t);
    if r == 0.0 {
        return 1.0;
    }
    // r(1 + e^x) in log space
    let z = r.ln() + softplus(x);
    1.0 / (1.0 + (2.0 * z).exp())
}

/// Dark state `cos θ |g,1⟩ − sin θ |s,0⟩`, the null vector of
/// [`build_hamiltonian`] at zero detuning.
pub fn dark_state(theta: f64, space: HilbertSpace) -> StateVector {
    let mut amps = vec![C64::new(0.0, 0.0); space.dim()];
    let g1 = space.index(Level::Ground, 1).expect("cutoff >= 1");
    let s0 = space.index(Level::Metastable, 0).expect("vacuum exists");
    amps[g1] = C64::new(theta.cos(), 0.0);
    amps[s0] = C64::new(-theta.sin(), 0.0);
    StateVector::new(space, amps).expect("unit vector")
}

/// Time-independent operator pieces of `H(t)`, assembled once per run.
#[derive(Clone, Debug)]
pub struct HamiltonianTerms {
    control: ComplexMatrix,
    static_part: ComplexMatrix,
    pulse: PulseProfile,
}

impl HamiltonianTerms {
    pub fn new(spec: &LambdaSystemSpec, space: HilbertSpace) -> Self {
        let op = |i, j| atomic_operator(i, j, space);
        let control =
            op(Level::Metastable, Level::Excited).add(&op(Level::Excited, Level::Metastable)).expect("same space");
        let a = annihilation_operator(space);
        let absorb = op(Level::Excited, Level::Ground).mul(&a).expect("same space");
        let signal = absorb.add(&absorb.adjoint()).expect("same space").scale_real(spec.g);
        let detunings = op(Level::Excited, Level::Excited)
            .scale_real(spec.delta_one)
            .add(&op(Level::Metastable, Level::Metastable).scale_real(spec.delta_two))
            .expect("same space");
        Self { control, static_part: signal.add(&detunings).expect("same space"), pulse: spec.pulse }
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        self.static_part.add(&self.control.scale_real(control_pulse(t, &self.pulse))).expect("same space")
    }
}

/// Rotating-wave Λ Hamiltonian
///
/// ```text
/// H(t) = Ω(t)(|s⟩⟨e| + |e⟩⟨s|)⊗1 + g(|e⟩⟨g|⊗a + |g⟩⟨e|⊗a†) + Δ|e⟩⟨e|⊗1 + δ|s⟩⟨s|⊗1
/// ```
pub fn build_hamiltonian(t: f64, spec: &LambdaSystemSpec, space: HilbertSpace) -> ComplexMatrix {
    HamiltonianTerms::new(spec, space).at(t)
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Antiderivative of `cos²θ(t)` along the sigmoid pulse:
///
/// ```text
/// ∫cos²θ dt = T/(1+r²) · [x − ½ ln(1 + r²(1+eˣ)²) − r·arctan(r(1+eˣ))],
/// x = (t − center)/T,  r = g/Ω₀
/// ```
pub fn ground_overlap_integral(t: f64, g: f64, pulse: &PulseProfile) -> f64 {
    let r = g / pulse.omega0;
    if r == 0.0 {
        return t;
    }
    let x = pulse.phase(t);
    let z = r.ln() + softplus(x);
    pulse.t_char / (1.0 + r * r) * (x - 0.5 * softplus(2.0 * z) - r * z.exp().atan())
}

/// Dark-state population loss driven by `κ(t) = k cos²θ(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarkStateDecayModel {
    pub k: f64,
    pub pulse: PulseProfile,
    pub g: f64,
    /// Population at `t_start`.
    pub p0: f64,
    pub t_start: f64,
}

impl DarkStateDecayModel {
    pub const DEFAULT_P0: f64 = 0.999;

    pub fn new(k: f64, pulse: PulseProfile, g: f64, p0: f64, t_start: f64) -> Result<Self, ModelError> {
        pulse.validate()?;
        require(k >= 0.0 && k.is_finite(), "k", k, "must be non-negative")?;
        require(g >= 0.0 && g.is_finite(), "g", g, "must be non-negative")?;
        require(p0 > 0.0 && p0 <= 1.0, "p0", p0, "must lie in (0, 1]")?;
        require(t_start.is_finite(), "t_start", t_start, "must be finite")?;
        Ok(Self { k, pulse, g, p0, t_start })
    }

    /// Integration constant `c₁` in `d(t) = c₁ exp(−k ∫cos²θ dt)`.
    pub fn c1(&self) -> f64 {
        self.p0 * (self.k * ground_overlap_integral(self.t_start, self.g, &self.pulse)).exp()
    }

    /// Exponent `−k ∫_{t_start}^{t} cos²θ dt`.
    pub fn log_survival(&self, t: f64) -> f64 {
        let i = |s| ground_overlap_integral(s, self.g, &self.pulse);
        -self.k * (i(t) - i(self.t_start))
    }
}

/// `κ(t) = k cos²θ(t)`.
pub fn effective_cavity_decay(t: f64, model: &DarkStateDecayModel) -> f64 {
    model.k * ground_overlap_at(t, model.g, &model.pulse)
}

/// Closed-form solution of `d'(t) = −k cos²θ(t) d(t)` with `d(t_start) = p0`.
pub fn dark_state_decay_closed_form(t: f64, model: &DarkStateDecayModel) -> f64 {
    model.p0 * model.log_survival(t).exp()
}

/// Literal start-time formula `t₀ = T ln(p|Ω₀|/√(p(1−p)) − 1)`, where `p`
/// is read as the dark-state overlap with the metastable state.
pub fn initial_time_from_overlap(pulse: &PulseProfile, p: f64) -> Result<f64, ModelError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ModelError::Domain(format!("overlap probability p = {p} must lie in (0, 1)")));
    }
    let arg = p * pulse.omega0.abs() / (p * (1.0 - p)).sqrt() - 1.0;
    if arg <= 0.0 {
        return Err(ModelError::Domain(format!(
            "log argument {arg} is not positive for p = {p}, omega0 = {}",
            pulse.omega0
        )));
    }
    Ok(pulse.center + pulse.t_char * arg.ln())
}

/// How the storage window `[t_start, t_end]` is placed on the pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowPolicy {
    /// `t_start` is where `cos²θ` reaches this fraction of its early-time
    /// limit `Ω₀²/(Ω₀²+g²)`.
    pub ground_fraction: f64,
    /// `t_end` is where `sin²θ` reaches this value.
    pub metastable_fraction: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self { ground_fraction: 0.999, metastable_fraction: 0.999 }
    }
}

impl WindowPolicy {
    pub fn new(ground_fraction: f64, metastable_fraction: f64) -> Self {
        Self { ground_fraction, metastable_fraction }
    }

    pub fn times(&self, pulse: &PulseProfile, g: f64) -> Result<(f64, f64), ModelError> {
        window_times(pulse, g, self.ground_fraction, self.metastable_fraction)
    }

    /// Stable identifier recorded in reports.
    pub fn tag(&self) -> String {
        format!("relative-ground(p_g={})/metastable(p_s={})", self.ground_fraction, self.metastable_fraction)
    }
}

/// Invert `θ(t)` for the window edges.
///
/// `t_start`: `cos²θ = p_g · Ω₀²/(Ω₀²+g²)`; `t_end`: `sin²θ = p_s`.
pub fn window_times(pulse: &PulseProfile, g: f64, p_g: f64, p_s: f64) -> Result<(f64, f64), ModelError> {
    pulse.validate()?;
    if !(p_g > 0.0 && p_g < 1.0) {
        return Err(ModelError::Domain(format!("ground fraction p_g = {p_g} must lie in (0, 1)")));
    }
    if !(p_s > 0.0 && p_s < 1.0) {
        return Err(ModelError::Domain(format!("metastable fraction p_s = {p_s} must lie in (0, 1)")));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(ModelError::Domain(format!("coupling g = {g} must be positive to place a window")));
    }
    let r = g / pulse.omega0;
    let r2 = r * r;
    // tanθ = r(1 + e^x)
    let invert = |tan_theta: f64| -> Option<f64> {
        let e = tan_theta / r - 1.0;
        (e > 0.0).then(|| pulse.center + pulse.t_char * e.ln())
    };
    let t_start = invert(((1.0 + r2 - p_g) / p_g).sqrt())
        .ok_or_else(|| ModelError::Domain(format!("ground fraction {p_g} unreachable")))?;
    let t_end = invert((p_s / (1.0 - p_s)).sqrt()).ok_or_else(|| {
        ModelError::Domain(format!("metastable fraction {p_s} is below the early-time value {:.6}", r2 / (1.0 + r2)))
    })?;
    if t_start >= t_end {
        return Err(ModelError::Domain(format!("window is empty: t_start = {t_start} >= t_end = {t_end}")));
    }
    Ok((t_start, t_end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_4};

    fn pulse() -> PulseProfile {
        PulseProfile::new(10.0, 2.0).unwrap()
    }

    #[test]
    fn control_pulse_examples() {
        assert_eq!(control_pulse(0.0, &pulse()), 5.0);
        assert!((control_pulse(-1e4, &pulse()) - 10.0).abs() < 1e-12);
        // 10 / (1 + e)
        let expected = 2.689_414_213_699_951;
        assert!((control_pulse(2.0, &pulse()) - expected).abs() < 1e-14);
        assert!((10.0 / (1.0 + E) - expected).abs() < 1e-14);
        assert!(control_pulse(1e4, &pulse()) >= 0.0);
    }

    #[test]
    fn control_pulse_strictly_decreasing() {
        let p = pulse();
        let mut prev = control_pulse(-40.0, &p);
        for i in 1..800 {
            let v = control_pulse(-40.0 + 0.1 * i as f64, &p);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn mixing_angle_examples() {
        assert!((mixing_angle(1.0, 1.0) - FRAC_PI_4).abs() < 1e-15);
        assert!(mixing_angle(1.0, 1e300) < 1e-299);
        assert_eq!(mixing_angle(1.0, 0.0), FRAC_PI_2);
    }

    #[test]
    fn mixing_angle_along_pulse_matches_definition() {
        let p = pulse();
        for i in -30..30 {
            let t = i as f64;
            let direct = mixing_angle(1.0, control_pulse(t, &p));
            assert!((mixing_angle_at(t, 1.0, &p) - direct).abs() < 1e-12);
            let cos2 = direct.cos().powi(2);
            assert!((ground_overlap_at(t, 1.0, &p) - cos2).abs() < 1e-12);
        }
    }

    #[test]
    fn dark_state_endpoints() {
        let space = HilbertSpace::default();
        let d0 = dark_state(0.0, space);
        assert_eq!(d0, StateVector::basis(space, Level::Ground, 1).unwrap());
        let d1 = dark_state(FRAC_PI_2, space);
        let s0 = StateVector::basis(space, Level::Metastable, 0).unwrap();
        assert!((d1.overlap_probability(&s0) - 1.0).abs() < 1e-15);
        for i in 0..20 {
            assert!((dark_state(0.1 * i as f64, space).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let space = HilbertSpace::default();
        let mut spec = LambdaSystemSpec::new(0.0, pulse());
        // Ω(t) underflows far past the midpoint.
        assert_eq!(build_hamiltonian(1e5, &spec, space).max_abs(), 0.0);
        spec.g = 0.7;
        let h = build_hamiltonian(0.3, &spec, space);
        let e0 = space.index(Level::Excited, 0).unwrap();
        let g1 = space.index(Level::Ground, 1).unwrap();
        assert_eq!(h[(e0, g1)].re, 0.7);
        assert!(h.is_hermitian(0.0));
    }

    #[test]
    fn effective_decay_limits() {
        let m = DarkStateDecayModel::new(0.3, pulse(), 1.0, 0.999, -6.0).unwrap();
        assert!(effective_cavity_decay(1e3, &m) < 1e-100);
        let early = 0.3 * 100.0 / 101.0;
        assert!((effective_cavity_decay(-200.0, &m) - early).abs() < 1e-12);
        let zero = DarkStateDecayModel::new(0.0, pulse(), 1.0, 0.999, -6.0).unwrap();
        assert_eq!(effective_cavity_decay(3.0, &zero), 0.0);
    }

    #[test]
    fn closed_form_without_loss_is_constant() {
        let m = DarkStateDecayModel::new(0.0, pulse(), 1.0, 0.999, -6.0).unwrap();
        for t in [-6.0, 0.0, 5.0, 11.5] {
            assert_eq!(dark_state_decay_closed_form(t, &m), 0.999);
        }
    }

    #[test]
    fn closed_form_initial_condition_and_monotonicity() {
        let m = DarkStateDecayModel::new(0.06, pulse(), 1.0, 0.999, -6.0).unwrap();
        assert!((dark_state_decay_closed_form(-6.0, &m) - 0.999).abs() < 1e-15);
        let mut prev = 0.999;
        for i in 0..200 {
            let d = dark_state_decay_closed_form(-6.0 + 0.1 * i as f64, &m);
            assert!(d <= prev && d > 0.0);
            prev = d;
        }
    }

    #[test]
    fn c1_reproduces_closed_form() {
        let m = DarkStateDecayModel::new(0.06, pulse(), 1.0, 0.999, -6.0).unwrap();
        for t in [-3.0, 0.0, 4.0, 9.0] {
            let via_c1 = m.c1() * (-m.k * ground_overlap_integral(t, 1.0, &m.pulse)).exp();
            assert!((via_c1 - dark_state_decay_closed_form(t, &m)).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_satisfies_ode_by_central_difference() {
        let m = DarkStateDecayModel::new(0.2, pulse(), 1.0, 0.999, -6.0).unwrap();
        let h = 1e-4;
        for i in 0..40 {
            let t = -5.0 + 0.4 * i as f64;
            let deriv = (dark_state_decay_closed_form(t + h, &m) - dark_state_decay_closed_form(t - h, &m)) / (2.0 * h);
            let rhs = -effective_cavity_decay(t, &m) * dark_state_decay_closed_form(t, &m);
            assert!((deriv - rhs).abs() < 1e-8, "t = {t}: {deriv} vs {rhs}");
        }
    }

    #[test]
    fn integral_is_stable_far_out() {
        let p = pulse();
        let far = ground_overlap_integral(5000.0, 1.0, &p);
        assert!(far.is_finite());
        // cos²θ vanishes late, so the integral saturates.
        assert!((ground_overlap_integral(6000.0, 1.0, &p) - far).abs() < 1e-12);
    }

    #[test]
    fn eq11_examples() {
        let t0 = initial_time_from_overlap(&pulse(), 0.999).unwrap();
        // 2 ln(10·√(0.999/0.001) − 1)
        let expected = 2.0 * (10.0 * (0.999f64 / 0.001).sqrt() - 1.0).ln();
        assert!((t0 - expected).abs() < 1e-12);
        assert!((t0 - 11.5056).abs() < 1e-3);
        let unit = PulseProfile::new(2.0, 1.0).unwrap();
        assert!(initial_time_from_overlap(&unit, 0.5).unwrap().abs() < 1e-15);
        let weak = PulseProfile::new(0.5, 2.0).unwrap();
        let err = initial_time_from_overlap(&weak, 0.5).unwrap_err();
        assert!(err.to_string().contains("omega0 = 0.5"));
    }

    #[test]
    fn window_examples() {
        let (t_start, t_end) = window_times(&pulse(), 1.0, 0.999, 0.999).unwrap();
        let eq11 = initial_time_from_overlap(&pulse(), 0.999).unwrap();
        assert!((t_end - eq11).abs() < 1e-12);
        assert!((t_start - (-6.018_297_902_991)).abs() < 1e-9);
        assert!(window_times(&pulse(), 1.0, 1.0, 0.999).is_err());
        let (_, later) = window_times(&pulse(), 1.0, 0.999, 0.9999).unwrap();
        assert!(later > t_end);
    }

    #[test]
    fn window_edges_hit_requested_overlaps() {
        let p = pulse();
        let (t_start, t_end) = window_times(&p, 1.0, 0.99, 0.95).unwrap();
        let c_inf = 100.0 / 101.0;
        assert!((ground_overlap_at(t_start, 1.0, &p) - 0.99 * c_inf).abs() < 1e-12);
        assert!((1.0 - ground_overlap_at(t_end, 1.0, &p) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn window_rejects_unreachable_metastable_fraction() {
        // early-time sin²θ is 1/101 for Ω₀ = 10
        assert!(window_times(&pulse(), 1.0, 0.999, 0.005).is_err());
        assert!(window_times(&pulse(), 0.0, 0.999, 0.999).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(PulseProfile::new(-1.0, 2.0).is_err());
        assert!(PulseProfile::new(10.0, 0.0).is_err());
        let mut s = LambdaSystemSpec::new(1.0, pulse());
        s.decays.push(DecayChannel { to: Level::Ground, from: Level::Excited, rate: -0.1 });
        assert!(s.validate().is_err());
    }
}
