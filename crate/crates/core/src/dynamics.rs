//! Lindblad propagation of the Λ-system, writing efficiency, and the two
//! universal sweeps (maximum cavity decay and detuning half-width).

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{integrate, IntegrateError, StepControl, StepStats};
use crate::lambda::{
    dark_state, ground_overlap_integral, mixing_angle_at, DarkStateDecayModel, HamiltonianTerms, LambdaSystemSpec,
    ModelError, PulseProfile, WindowPolicy,
};
use crate::qops::{
    annihilation_operator, atomic_operator, ComplexMatrix, DensityMatrix, HilbertSpace, Level, QopsError, C64,
};

/// Largest trace drift silently corrected after an accepted step.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Qops(#[from] QopsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("integration failed: {0}")]
    Integrate(#[from] IntegrateError),
    #[error("trace drifted by {drift:e} at t = {t}")]
    TraceDrift { t: f64, drift: f64 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("survival threshold {threshold} exceeds the initial population {p0}")]
    UnreachableThreshold { threshold: f64, p0: f64 },
    #[error("half maximum not bracketed: efficiency ratio stays above 0.5 up to {last} (min ratio {min_ratio:.4})")]
    NotBracketed { last: f64, min_ratio: f64 },
    #[error("zero-detuning efficiency {0} is not positive")]
    NoResonantTransfer(f64),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Jump operator `√rate · operator`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpSpec {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

impl JumpSpec {
    pub fn new(operator: ComplexMatrix, rate: f64) -> Result<Self, DynamicsError> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(DynamicsError::Invalid(format!("jump rate {rate} must be non-negative")));
        }
        Ok(Self { operator, rate })
    }

    /// `√κ (1 ⊗ a)`
    pub fn cavity_loss(space: HilbertSpace, kappa: f64) -> Result<Self, DynamicsError> {
        Self::new(annihilation_operator(space), kappa)
    }

    /// All channels of `spec`: atomic decays then cavity loss. Zero rates are skipped.
    pub fn from_spec(spec: &LambdaSystemSpec, space: HilbertSpace) -> Result<Vec<Self>, DynamicsError> {
        let mut jumps = Vec::new();
        for d in spec.decays.iter().filter(|d| d.rate > 0.0) {
            jumps.push(Self::new(atomic_operator(d.to, d.from, space), d.rate)?);
        }
        if spec.kappa > 0.0 {
            jumps.push(Self::cavity_loss(space, spec.kappa)?);
        }
        Ok(jumps)
    }

    fn scaled(&self) -> ComplexMatrix {
        self.operator.scale_real(self.rate.sqrt())
    }
}

/// `−i[H,ρ] + Σ CρC† − ½{C†C, ρ}`
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    h: &ComplexMatrix,
    jumps: &[JumpSpec],
) -> Result<ComplexMatrix, DynamicsError> {
    let r = rho.matrix();
    let mut out = h.commutator(r)?.scale(-C64::i());
    for j in jumps {
        let c = j.scaled();
        let cd = c.adjoint();
        let sandwich = c.mul(r)?.mul(&cd)?;
        let anti = cd.mul(&c)?.anticommutator(r)?.scale_real(0.5);
        out = out.add(&sandwich)?.sub(&anti)?;
    }
    Ok(out)
}

/// Precomputed superoperator pieces for the hot integration loop.
struct Generator {
    terms: HamiltonianTerms,
    jumps: Vec<(DMatrix<C64>, DMatrix<C64>)>,
    loss: DMatrix<C64>,
    dim: usize,
}

impl Generator {
    fn new(spec: &LambdaSystemSpec, space: HilbertSpace) -> Result<Self, DynamicsError> {
        let dim = space.dim();
        let mut loss = DMatrix::zeros(dim, dim);
        let mut jumps = Vec::new();
        for j in JumpSpec::from_spec(spec, space)? {
            let c = j.scaled().inner().clone();
            let cd = c.adjoint();
            loss += &cd * &c * C64::new(0.5, 0.0);
            jumps.push((c, cd));
        }
        Ok(Self { terms: HamiltonianTerms::new(spec, space), jumps, loss, dim })
    }

    fn apply(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let rho = DMatrix::from_column_slice(self.dim, self.dim, y);
        let h = self.terms.at(t);
        // −iH_eff ρ + h.c.-partner, with H_eff = H − iK
        let heff = h.inner() - &self.loss * C64::i();
        let left = &heff * &rho * (-C64::i());
        let mut d = &left + left.adjoint();
        for (c, cd) in &self.jumps {
            d += c * &rho * cd;
        }
        dy.copy_from_slice(d.as_slice());
    }
}

/// Time window and local error tolerances for one propagation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl IntegrationConfig {
    pub const DEFAULT_REL_TOL: f64 = 1e-8;
    pub const DEFAULT_ABS_TOL: f64 = 1e-10;
    pub const DEFAULT_MAX_STEP: f64 = 0.5;

    pub fn new(t_start: f64, t_end: f64) -> Self {
        Self {
            t_start,
            t_end,
            rel_tol: Self::DEFAULT_REL_TOL,
            abs_tol: Self::DEFAULT_ABS_TOL,
            max_step: Self::DEFAULT_MAX_STEP,
        }
    }

    pub fn from_window(pulse: &PulseProfile, g: f64, policy: &WindowPolicy) -> Result<Self, DynamicsError> {
        let (t_start, t_end) = policy.times(pulse, g)?;
        Ok(Self::new(t_start, t_end))
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_start < self.t_end) {
            return Err(DynamicsError::Invalid(format!(
                "need t_start < t_end, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(DynamicsError::Invalid("tolerances and max_step must be positive".into()));
        }
        Ok(())
    }

    fn step_control(&self) -> StepControl {
        StepControl { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_step: self.max_step, ..StepControl::default() }
    }
}

/// Where the incoming photon starts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// `|g,1⟩⟨g,1|`
    #[default]
    GroundPhoton,
    /// Dark state at `t_start`.
    DarkState,
}

impl InitialCondition {
    pub fn density(
        &self,
        spec: &LambdaSystemSpec,
        space: HilbertSpace,
        t_start: f64,
    ) -> Result<DensityMatrix, DynamicsError> {
        Ok(match self {
            InitialCondition::GroundPhoton => DensityMatrix::basis(space, Level::Ground, 1)?,
            InitialCondition::DarkState => {
                DensityMatrix::pure(&dark_state(mixing_angle_at(t_start, spec.g, &spec.pulse), space))
            }
        })
    }
}

/// Hilbert-space truncation and initial condition for efficiency runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub space: HilbertSpace,
    pub initial: InitialCondition,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn space(&self) -> HilbertSpace {
        self.states[0].space()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Per-basis-state population series, in basis order.
    pub fn populations(&self) -> Vec<Vec<f64>> {
        let dim = self.space().dim();
        (0..dim).map(|i| self.states.iter().map(|s| s.matrix()[(i, i)].re).collect()).collect()
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.states.iter().map(|s| (s.trace() - C64::new(1.0, 0.0)).norm()).fold(0.0, f64::max)
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        self.states.iter().map(|s| s.matrix().hermiticity_error()).fold(0.0, f64::max)
    }

    /// CSV with columns `t,p_g0,p_g1,...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DynamicsError> {
        let space = self.space();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..space.dim()).map(|i| {
            let (level, n) = space.basis_state(i);
            format!("p_{level}{n}")
        }));
        out.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(s.populations().iter().map(|p| p.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn propagate(
    rho0: &DensityMatrix,
    spec: &LambdaSystemSpec,
    cfg: &IntegrationConfig,
    mut record: Option<&mut Trajectory>,
) -> Result<DensityMatrix, DynamicsError> {
    spec.validate()?;
    cfg.validate()?;
    let space = rho0.space();
    let dim = space.dim();
    let generator = Generator::new(spec, space)?;
    let y0 = rho0.matrix().as_slice().to_vec();
    if let Some(tr) = record.as_deref_mut() {
        tr.times.push(cfg.t_start);
        tr.states.push(rho0.clone());
    }
    let (y, stats) = integrate(
        |t, y: &[C64], dy: &mut [C64]| generator.apply(t, y, dy),
        cfg.t_start,
        cfg.t_end,
        y0,
        &cfg.step_control(),
        |t, y: &mut [C64]| -> Result<bool, DynamicsError> {
            let m = DMatrix::from_column_slice(dim, dim, y);
            let mut herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            let tr = herm.trace().re;
            let drift = (tr - 1.0).abs();
            if drift > TRACE_DRIFT_LIMIT {
                return Err(DynamicsError::TraceDrift { t, drift });
            }
            herm /= C64::new(tr, 0.0);
            y.copy_from_slice(herm.as_slice());
            if let Some(tr) = record.as_deref_mut() {
                tr.times.push(t);
                tr.states.push(DensityMatrix::new_unchecked(space, ComplexMatrix::from_column_slice(dim, dim, y)));
            }
            Ok(true)
        },
    )?;
    if let Some(tr) = record {
        tr.stats = stats;
    }
    Ok(DensityMatrix::new_unchecked(space, ComplexMatrix::from_column_slice(dim, dim, &y)))
}

/// Integrates the master equation for `H(t)` from `spec`, keeping every
/// accepted step. States are re-Hermitized and trace-corrected after each
/// step; a drift above [`TRACE_DRIFT_LIMIT`] aborts.
pub fn evolve(
    rho0: &DensityMatrix,
    spec: &LambdaSystemSpec,
    cfg: &IntegrationConfig,
) -> Result<Trajectory, DynamicsError> {
    let mut tr = Trajectory { times: Vec::new(), states: Vec::new(), stats: StepStats::default() };
    propagate(rho0, spec, cfg, Some(&mut tr))?;
    Ok(tr)
}

/// Final state only.
pub fn evolve_final(
    rho0: &DensityMatrix,
    spec: &LambdaSystemSpec,
    cfg: &IntegrationConfig,
) -> Result<DensityMatrix, DynamicsError> {
    propagate(rho0, spec, cfg, None)
}

/// Population of `|s,0⟩` at `t_end`, starting from `|g,1⟩`.
pub fn writing_efficiency(spec: &LambdaSystemSpec, cfg: &IntegrationConfig) -> Result<f64, DynamicsError> {
    writing_efficiency_with(spec, cfg, &RunSettings::default())
}

pub fn writing_efficiency_with(
    spec: &LambdaSystemSpec,
    cfg: &IntegrationConfig,
    settings: &RunSettings,
) -> Result<f64, DynamicsError> {
    let rho0 = settings.initial.density(spec, settings.space, cfg.t_start)?;
    let rho = evolve_final(&rho0, spec, cfg)?;
    Ok(rho.population(Level::Metastable, 0)?.clamp(0.0, 1.0))
}

/// Largest cavity loss scale keeping the dark-state survival above a threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaMax {
    /// In units of `g_c`.
    pub value: f64,
    pub threshold: f64,
    pub p0: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub window_policy: String,
}

pub fn find_kappa_max(
    pulse: &PulseProfile,
    g: f64,
    survival_threshold: f64,
    policy: &WindowPolicy,
) -> Result<KappaMax, DynamicsError> {
    find_kappa_max_with_p0(pulse, g, survival_threshold, policy, DarkStateDecayModel::DEFAULT_P0)
}

/// Bisection on `k` of the closed-form survival `d(t_end)` with
/// `d(t_start) = p0`, to relative bracket width 1e-4.
pub fn find_kappa_max_with_p0(
    pulse: &PulseProfile,
    g: f64,
    survival_threshold: f64,
    policy: &WindowPolicy,
    p0: f64,
) -> Result<KappaMax, DynamicsError> {
    if !(survival_threshold > 0.0 && survival_threshold < 1.0) {
        return Err(DynamicsError::Invalid(format!("survival threshold {survival_threshold} must lie in (0, 1)")));
    }
    if survival_threshold > p0 {
        return Err(DynamicsError::UnreachableThreshold { threshold: survival_threshold, p0 });
    }
    let (t_start, t_end) = policy.times(pulse, g)?;
    let survives = |k: f64| -> Result<bool, DynamicsError> {
        let model = DarkStateDecayModel::new(k, *pulse, g, p0, t_start)?;
        Ok(crate::lambda::dark_state_decay_closed_form(t_end, &model) >= survival_threshold)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while survives(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(DynamicsError::Invalid("cavity decay unbounded: no loss in window".into()));
        }
    }
    for _ in 0..400 {
        if hi - lo <= 1e-4 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if survives(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(KappaMax { value: lo, threshold: survival_threshold, p0, t_start, t_end, window_policy: policy.tag() })
}

/// Closed-form counterpart of [`find_kappa_max_with_p0`].
pub fn kappa_max_closed_form(pulse: &PulseProfile, g: f64, threshold: f64, p0: f64, t_start: f64, t_end: f64) -> f64 {
    let exposure = ground_overlap_integral(t_end, g, pulse) - ground_overlap_integral(t_start, g, pulse);
    (p0 / threshold).ln() / exposure
}

/// One-photon detuning grid `0, step, 2·step, …, max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetuningGrid {
    pub max: f64,
    pub step: f64,
}

impl Default for DetuningGrid {
    fn default() -> Self {
        Self { max: 12.0, step: 0.1 }
    }
}

impl DetuningGrid {
    pub fn values(&self) -> Result<Vec<f64>, DynamicsError> {
        if !(self.step > 0.0 && self.max > 0.0 && self.max.is_finite()) {
            return Err(DynamicsError::Invalid(format!(
                "detuning grid needs positive max and step, got max {} step {}",
                self.max, self.step
            )));
        }
        let n = (self.max / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| i as f64 * self.step).collect())
    }
}

/// Efficiency scan with a derived scalar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub parameters: Vec<f64>,
    pub efficiencies: Vec<f64>,
    pub value: f64,
    pub convention: String,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DynamicsError> {
        write_series_csv(w, &self.parameter, &self.parameters, &self.efficiencies)
    }
}

pub fn write_series_csv<W: Write>(w: W, column: &str, xs: &[f64], effs: &[f64]) -> Result<(), DynamicsError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([column, "efficiency"])?;
    for (x, e) in xs.iter().zip(effs) {
        out.write_record([x.to_string(), e.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Writing efficiency at each one-photon detuning, evaluated in parallel.
pub fn detuning_sweep(
    template: &LambdaSystemSpec,
    cfg: &IntegrationConfig,
    settings: &RunSettings,
    detunings: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    detunings.par_iter().map(|&d| writing_efficiency_with(&template.clone().with_delta_one(d), cfg, settings)).collect()
}

/// Half-width at half maximum of efficiency versus one-photon detuning,
/// in units of `g_c`: first grid crossing of half the resonant efficiency,
/// linearly interpolated.
pub fn detuning_hwhm(
    template: &LambdaSystemSpec,
    cfg: &IntegrationConfig,
    grid: &DetuningGrid,
) -> Result<SweepResult, DynamicsError> {
    detuning_hwhm_with(template, cfg, grid, &RunSettings::default())
}

pub fn detuning_hwhm_with(
    template: &LambdaSystemSpec,
    cfg: &IntegrationConfig,
    grid: &DetuningGrid,
    settings: &RunSettings,
) -> Result<SweepResult, DynamicsError> {
    let detunings = grid.values()?;
    let effs = detuning_sweep(template, cfg, settings, &detunings)?;
    let value = half_max_crossing(&detunings, &effs)?;
    Ok(SweepResult {
        parameter: "delta".into(),
        parameters: detunings,
        efficiencies: effs,
        value,
        convention: format!(
            "first half-maximum crossing, linear interpolation; initial={:?}; photon_cutoff={}",
            settings.initial,
            settings.space.photon_cutoff()
        ),
    })
}

/// First `x` where `ys/ys[0]` drops to 0.5, linearly interpolated.
pub fn half_max_crossing(xs: &[f64], ys: &[f64]) -> Result<f64, DynamicsError> {
    let peak = *ys.first().ok_or_else(|| DynamicsError::Invalid("empty sweep".into()))?;
    if !(peak > 0.0) {
        return Err(DynamicsError::NoResonantTransfer(peak));
    }
    let half = 0.5 * peak;
    for i in 1..ys.len() {
        if ys[i] <= half {
            let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
            return Ok(if y0 == y1 { x1 } else { x0 + (x1 - x0) * (y0 - half) / (y0 - y1) });
        }
    }
    Err(DynamicsError::NotBracketed {
        last: *xs.last().unwrap_or(&0.0),
        min_ratio: ys.iter().copied().fold(f64::INFINITY, f64::min) / peak,
    })
}
