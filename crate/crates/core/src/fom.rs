//! Defect properties → quantum-memory figures of merit.
//!
//! Coupling constants, the cavity decay `κ = κ̂·g_c` and the bandwidth
//! `Δ = σ_Δ·g_c` all live on one angular-frequency footing (rad/s, with
//! `ω = 2πc/λ`); bandwidths are reported as `Δ / 1e9` "GHz".

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defectdb::{DefectRecord, TransitionSpin};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FomError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("initial and final levels are degenerate (E = {0} eV)")]
    DegenerateLevels(f64),
    #[error("record {0} has neither a transition dipole nor a lifetime")]
    MissingInputs(String),
}

fn positive(name: &'static str, value: f64) -> Result<f64, FomError> {
    if value > 0.0 && !value.is_nan() {
        Ok(value)
    } else {
        Err(FomError::NonPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, FomError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(FomError::Negative { name, value })
    }
}

/// SI constants (CODATA 2018) plus the unit factors used for data entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalConstants {
    pub c: f64,
    pub hbar: f64,
    pub epsilon0: f64,
    pub elementary_charge: f64,
    pub electron_mass: f64,
    pub joule_per_ev: f64,
    pub coulomb_meter_per_debye: f64,
    pub hc_ev_nm: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            c: 299_792_458.0,
            hbar: 1.054_571_817e-34,
            epsilon0: 8.854_187_812_8e-12,
            elementary_charge: 1.602_176_634e-19,
            electron_mass: 9.109_383_701_5e-31,
            joule_per_ev: 1.602_176_634e-19,
            coulomb_meter_per_debye: 3.33564e-30,
            hc_ev_nm: 1239.8420,
        }
    }
}

impl PhysicalConstants {
    /// `ω = 2πc/λ` in rad/s.
    pub fn angular_frequency(&self, zpl_nm: f64) -> f64 {
        2.0 * PI * self.c / (zpl_nm * 1e-9)
    }
}

/// nm → eV (and back; the map is its own inverse).
pub fn zpl_convert(value: f64, constants: &PhysicalConstants) -> Result<f64, FomError> {
    Ok(constants.hc_ev_nm / positive("zpl", value)?)
}

/// Transition dipole magnitudes per axis, in Debye. The z axis is normal
/// to the host layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionDipole {
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_z: f64,
}

impl TransitionDipole {
    pub fn new(mu_x: f64, mu_y: f64, mu_z: f64) -> Result<Self, FomError> {
        Ok(Self {
            mu_x: non_negative("mu_x", mu_x)?,
            mu_y: non_negative("mu_y", mu_y)?,
            mu_z: non_negative("mu_z", mu_z)?,
        })
    }

    pub fn modulus(&self) -> f64 {
        (self.mu_x * self.mu_x + self.mu_y * self.mu_y + self.mu_z * self.mu_z).sqrt()
    }

    pub fn is_in_plane(&self) -> bool {
        self.mu_z == 0.0
    }
}

/// `|μ| = ħ|⟨f|p|i⟩| / (|E_f − E_i| m_e)`, returned in Debye.
pub fn dipole_from_momentum(
    e_initial_ev: f64,
    e_final_ev: f64,
    momentum_element: f64,
    constants: &PhysicalConstants,
) -> Result<f64, FomError> {
    let gap_j = (e_final_ev - e_initial_ev).abs() * constants.joule_per_ev;
    if gap_j == 0.0 {
        return Err(FomError::DegenerateLevels(e_final_ev));
    }
    let length = constants.hbar * momentum_element.abs() / (gap_j * constants.electron_mass);
    Ok(length * constants.elementary_charge / constants.coulomb_meter_per_debye)
}

/// Spontaneous radiative decay of the optical transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadiativeRate {
    Finite {
        per_second: f64,
    },
    /// Vanishing dipole: no radiative channel, infinite lifetime.
    NoRadiativeChannel,
}

impl RadiativeRate {
    pub fn per_second(&self) -> f64 {
        match self {
            RadiativeRate::Finite { per_second } => *per_second,
            RadiativeRate::NoRadiativeChannel => 0.0,
        }
    }

    pub fn lifetime_ns(&self) -> f64 {
        match self {
            RadiativeRate::Finite { per_second } => 1e9 / per_second,
            RadiativeRate::NoRadiativeChannel => f64::INFINITY,
        }
    }
}

fn radiative_prefactor(e0_ev: f64, n_d: f64, k: &PhysicalConstants) -> f64 {
    let e0 = e0_ev * k.joule_per_ev;
    n_d * e0.powi(3) / (3.0 * PI * k.epsilon0 * k.hbar.powi(4) * k.c.powi(3))
}

/// `Γ_R = n_D E₀³ |d|² / (3π ε₀ ħ⁴ c³)` with `d = μ` in C·m.
pub fn radiative_rate(
    e0_ev: f64,
    mu_debye: f64,
    n_d: f64,
    constants: &PhysicalConstants,
) -> Result<RadiativeRate, FomError> {
    positive("E0", e0_ev)?;
    positive("n_D", n_d)?;
    let mu = non_negative("mu", mu_debye)? * constants.coulomb_meter_per_debye;
    if mu == 0.0 {
        return Ok(RadiativeRate::NoRadiativeChannel);
    }
    Ok(RadiativeRate::Finite { per_second: radiative_prefactor(e0_ev, n_d, constants) * mu * mu })
}

/// Inverse of [`radiative_rate`]: dipole modulus (Debye) from a lifetime.
pub fn dipole_from_lifetime(
    e0_ev: f64,
    lifetime_ns: f64,
    n_d: f64,
    constants: &PhysicalConstants,
) -> Result<f64, FomError> {
    positive("E0", e0_ev)?;
    positive("n_D", n_d)?;
    let tau = positive("lifetime", lifetime_ns)? * 1e-9;
    let mu_sq = 1.0 / (tau * radiative_prefactor(e0_ev, n_d, constants));
    Ok(mu_sq.sqrt() / constants.coulomb_meter_per_debye)
}

/// Mode volume and dipole-projection conventions for the cavity coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CavityConvention {
    /// `V = n λ³`
    pub mode_volume_factor: f64,
    /// Host refractive index `n_D`.
    pub refractive_index: f64,
    /// Projection of the dipole on the field polarization.
    pub orientation_factor: f64,
    /// Permittivity in the coupling is `ε₀ n_D^p`; `p = 0` is vacuum.
    pub medium_permittivity_exponent: f64,
}

impl Default for CavityConvention {
    /// Vacuum permittivity with the full dipole projected on the field.
    /// Reproduces the published coupling constants row by row.
    fn default() -> Self {
        Self {
            mode_volume_factor: 1.76,
            refractive_index: 1.85,
            orientation_factor: 1.0,
            medium_permittivity_exponent: 0.0,
        }
    }
}

impl CavityConvention {
    /// Isotropic orientation average (`1/√3`) inside a medium of
    /// permittivity `ε₀ n_D²`.
    pub fn orientation_averaged_in_medium() -> Self {
        Self { orientation_factor: 1.0 / 3f64.sqrt(), medium_permittivity_exponent: 2.0, ..Self::default() }
    }

    fn validate(&self) -> Result<(), FomError> {
        positive("mode_volume_factor", self.mode_volume_factor)?;
        positive("refractive_index", self.refractive_index)?;
        positive("orientation_factor", self.orientation_factor)?;
        if !self.medium_permittivity_exponent.is_finite() {
            return Err(FomError::NonPositive {
                name: "medium_permittivity_exponent",
                value: self.medium_permittivity_exponent,
            });
        }
        Ok(())
    }
}

/// `g_c = f·μ·√(ω / (2ħ ε V))`, `V = nλ³`, `ε = ε₀ n_D^p`, in rad/s.
pub fn coupling_constant(
    mu_debye: f64,
    zpl_nm: f64,
    conv: &CavityConvention,
    constants: &PhysicalConstants,
) -> Result<f64, FomError> {
    conv.validate()?;
    let mu = non_negative("mu", mu_debye)? * constants.coulomb_meter_per_debye;
    let lambda = positive("zpl_nm", zpl_nm)? * 1e-9;
    let omega = constants.angular_frequency(zpl_nm);
    let volume = conv.mode_volume_factor * lambda.powi(3);
    let eps = constants.epsilon0 * conv.refractive_index.powf(conv.medium_permittivity_exponent);
    Ok(conv.orientation_factor * mu * (omega / (2.0 * constants.hbar * eps * volume)).sqrt())
}

/// `Q = ω / 2κ`; `None` when `κ = 0` (no finite requirement).
pub fn quality_factor(omega: f64, kappa: f64) -> Option<f64> {
    (kappa > 0.0).then(|| omega / (2.0 * kappa))
}

/// `Δ = σ_Δ g_c`, expressed in GHz.
pub fn bandwidth_ghz(g_c: f64, sigma_delta: f64) -> f64 {
    sigma_delta * g_c / 1e9
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantOrigin {
    #[default]
    Cached,
    Recomputed,
    Override,
}

/// Material-independent memory constants (units of `g_c`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalConstants {
    /// Cavity decay `κ̂ = κ/g_c`.
    pub kappa_hat: f64,
    /// Detuning half-width `σ_Δ`.
    pub sigma_delta: f64,
    pub kappa_origin: ConstantOrigin,
    pub sigma_origin: ConstantOrigin,
}

impl UniversalConstants {
    pub const CACHED_KAPPA_HAT: f64 = 0.06;
    pub const CACHED_SIGMA_DELTA: f64 = 6.20;
}

impl Default for UniversalConstants {
    fn default() -> Self {
        Self {
            kappa_hat: Self::CACHED_KAPPA_HAT,
            sigma_delta: Self::CACHED_SIGMA_DELTA,
            kappa_origin: ConstantOrigin::Cached,
            sigma_origin: ConstantOrigin::Cached,
        }
    }
}

/// How a required quality factor is compared with the cap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapPolicy {
    /// `Q ≤ q_max`.
    Strict,
    /// Same or lower decade: `⌊log₁₀ Q⌋ ≤ ⌊log₁₀ q_max⌋`.
    #[default]
    OrderOfMagnitude,
}

/// Largest practically reachable cavity quality factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityCap {
    /// `None` disables the cap.
    pub q_max: Option<f64>,
    #[serde(default)]
    pub policy: CapPolicy,
}

impl Default for QualityCap {
    fn default() -> Self {
        Self { q_max: Some(1e7), policy: CapPolicy::default() }
    }
}

impl QualityCap {
    pub fn new(q_max: Option<f64>, policy: CapPolicy) -> Self {
        Self { q_max, policy }
    }

    pub fn reachable(&self, q: f64) -> bool {
        let Some(cap) = self.q_max.filter(|c| c.is_finite()) else {
            return true;
        };
        match self.policy {
            CapPolicy::Strict => q <= cap,
            CapPolicy::OrderOfMagnitude => decade(q) <= decade(cap),
        }
    }
}

fn decade(x: f64) -> i32 {
    (x.log10() + 1e-12).floor() as i32
}

/// Everything [`full_report`] needs besides the record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FomContext {
    pub physical: PhysicalConstants,
    pub convention: CavityConvention,
    pub universal: UniversalConstants,
    pub quality_cap: QualityCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Record,
    DipoleComponents,
    LifetimeInversion,
    DerivedFromDipole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FomFlag {
    /// Vanishing dipole: effectively no practical Λ structure.
    NoLambdaStructure,
    /// Dipole modulus recovered from a lifetime; axis components unknown.
    DipoleComponentsUnresolved,
    /// Required Q exceeds the configured cap.
    QUnreachable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureOfMeritReport {
    pub label: String,
    pub transition_spin: TransitionSpin,
    pub zpl_nm: f64,
    pub zpl_ev: f64,
    pub omega_rad_s: f64,
    pub mu_debye: f64,
    pub mu_source: InputSource,
    pub in_plane: Option<bool>,
    pub gamma_r_per_s: f64,
    /// `None` for an infinite lifetime.
    pub tau_ns: Option<f64>,
    pub tau_source: InputSource,
    pub g_c_rad_s: f64,
    pub kappa_rad_s: f64,
    /// `None` when no finite cavity requirement exists.
    pub q: Option<f64>,
    pub bandwidth_ghz: f64,
    pub convention: CavityConvention,
    pub universal: UniversalConstants,
    pub flags: Vec<FomFlag>,
}

impl FigureOfMeritReport {
    pub fn has_flag(&self, flag: FomFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Couples a defect record to the cavity model: dipole (or its inversion
/// from the lifetime) → `g_c` → `κ`, `Q`, `Δ`.
pub fn full_report(record: &DefectRecord, ctx: &FomContext) -> Result<FigureOfMeritReport, FomError> {
    let k = &ctx.physical;
    let conv = &ctx.convention;
    let zpl_ev = zpl_convert(record.zpl_nm, k)?;
    let omega = k.angular_frequency(record.zpl_nm);
    let mut flags = Vec::new();

    let (mu, mu_source, rate, tau_source) = match (&record.dipole, record.lifetime_ns) {
        (Some(d), _) => {
            let mu = d.modulus();
            let rate = radiative_rate(zpl_ev, mu, conv.refractive_index, k)?;
            (mu, InputSource::DipoleComponents, rate, InputSource::DerivedFromDipole)
        }
        (None, Some(tau)) => {
            let mu = if tau.is_infinite() { 0.0 } else { dipole_from_lifetime(zpl_ev, tau, conv.refractive_index, k)? };
            flags.push(FomFlag::DipoleComponentsUnresolved);
            let rate = radiative_rate(zpl_ev, mu, conv.refractive_index, k)?;
            (mu, InputSource::LifetimeInversion, rate, InputSource::Record)
        }
        (None, None) => return Err(FomError::MissingInputs(record.label.to_string())),
    };

    if mu == 0.0 {
        flags.push(FomFlag::NoLambdaStructure);
    }
    let g_c = coupling_constant(mu, record.zpl_nm, conv, k)?;
    let kappa = ctx.universal.kappa_hat * g_c;
    let q = quality_factor(omega, kappa);
    if q.is_some_and(|q| !ctx.quality_cap.reachable(q)) {
        flags.push(FomFlag::QUnreachable);
    }
    let tau_ns = match (tau_source, record.lifetime_ns) {
        (InputSource::Record, Some(t)) if t.is_finite() => Some(t),
        _ => Some(rate.lifetime_ns()).filter(|t| t.is_finite()),
    };
    Ok(FigureOfMeritReport {
        label: record.label.to_string(),
        transition_spin: record.transition_spin,
        zpl_nm: record.zpl_nm,
        zpl_ev,
        omega_rad_s: omega,
        mu_debye: mu,
        mu_source,
        in_plane: record.dipole.map(|d| d.is_in_plane()),
        gamma_r_per_s: rate.per_second(),
        tau_ns,
        tau_source,
        g_c_rad_s: g_c,
        kappa_rad_s: kappa,
        q,
        bandwidth_ghz: bandwidth_ghz(g_c, ctx.universal.sigma_delta),
        convention: *conv,
        universal: ctx.universal,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defectdb::{DefectLabel, SpinMultiplicity};

    fn k() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn record(label: &str, zpl: f64, tau: Option<f64>, dipole: Option<TransitionDipole>) -> DefectRecord {
        DefectRecord {
            host: "hBN".into(),
            label: label.parse::<DefectLabel>().unwrap(),
            spin_multiplicity: SpinMultiplicity::Triplet,
            transition_spin: TransitionSpin::Up,
            zpl_nm: zpl,
            dipole,
            lifetime_ns: tau,
            source: "test".into(),
        }
    }

    #[test]
    fn zpl_conversion_examples() {
        assert!((zpl_convert(1239.8420, &k()).unwrap() - 1.0).abs() < 1e-15);
        assert!((zpl_convert(619.9210, &k()).unwrap() - 2.0).abs() < 1e-15);
        for nm in [200.0, 555.1, 1557.8] {
            let back = zpl_convert(zpl_convert(nm, &k()).unwrap(), &k()).unwrap();
            assert!(((back - nm) / nm).abs() < 1e-12);
        }
        assert!(zpl_convert(0.0, &k()).is_err());
        assert!(zpl_convert(-3.0, &k()).is_err());
    }

    #[test]
    fn dipole_from_momentum_examples() {
        assert_eq!(dipole_from_momentum(0.0, 2.0, 0.0, &k()).unwrap(), 0.0);
        let a = dipole_from_momentum(0.0, 2.0, 1e-25, &k()).unwrap();
        let b = dipole_from_momentum(0.0, 4.0, 1e-25, &k()).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        // ħ·p / (ΔE·m_e) · e, in Debye, with literal constants
        let oracle = 1.054_571_817e-34 * 1e-25 / (2.0 * 1.602_176_634e-19 * 9.109_383_701_5e-31) * 1.602_176_634e-19
            / 3.33564e-30;
        assert!(((a - oracle) / oracle).abs() < 1e-12);
        assert!((a - 1.7355).abs() < 1e-3);
        assert!(matches!(dipole_from_momentum(1.5, 1.5, 1e-25, &k()), Err(FomError::DegenerateLevels(_))));
    }

    #[test]
    fn radiative_rate_examples() {
        assert_eq!(radiative_rate(2.0, 0.0, 1.85, &k()).unwrap(), RadiativeRate::NoRadiativeChannel);
        assert_eq!(RadiativeRate::NoRadiativeChannel.lifetime_ns(), f64::INFINITY);
        let one = radiative_rate(2.0, 1.0, 1.85, &k()).unwrap().per_second();
        let two = radiative_rate(2.0, 2.0, 1.85, &k()).unwrap().per_second();
        assert!((two / one - 4.0).abs() < 1e-12);
        assert!(radiative_rate(2.0, -1.0, 1.85, &k()).is_err());
        assert!(radiative_rate(0.0, 1.0, 1.85, &k()).is_err());
    }

    #[test]
    fn lifetime_inversion_roundtrip() {
        let e0 = zpl_convert(555.1, &k()).unwrap();
        let mu = dipole_from_lifetime(e0, 54.7, 1.85, &k()).unwrap();
        assert!((mu - 2.3).abs() < 0.05, "{mu}");
        let tau = radiative_rate(e0, mu, 1.85, &k()).unwrap().lifetime_ns();
        assert!(((tau - 54.7) / 54.7).abs() < 1e-9);
    }

    #[test]
    fn coupling_scaling() {
        let conv = CavityConvention::default();
        assert_eq!(coupling_constant(0.0, 600.0, &conv, &k()).unwrap(), 0.0);
        let base = coupling_constant(1.0, 600.0, &conv, &k()).unwrap();
        let doubled_mu = coupling_constant(2.0, 600.0, &conv, &k()).unwrap();
        let doubled_lambda = coupling_constant(1.0, 1200.0, &conv, &k()).unwrap();
        assert!((doubled_mu / base - 2.0).abs() < 1e-12);
        assert!((base / doubled_lambda - 4.0).abs() < 1e-12);
    }

    #[test]
    fn averaged_convention_is_smaller_by_sqrt3_nd() {
        let plain = coupling_constant(1.0, 600.0, &CavityConvention::default(), &k()).unwrap();
        let avg = coupling_constant(1.0, 600.0, &CavityConvention::orientation_averaged_in_medium(), &k()).unwrap();
        assert!((plain / avg - 3f64.sqrt() * 1.85).abs() < 1e-12);
    }

    #[test]
    fn quality_and_bandwidth() {
        assert_eq!(quality_factor(4.0, 2.0), Some(1.0));
        assert_eq!(quality_factor(4.0, 0.0), None);
        assert!(quality_factor(10.0, 1.0).unwrap() > quality_factor(10.0, 2.0).unwrap());
        assert_eq!(bandwidth_ghz(0.0, 6.2), 0.0);
        assert!((bandwidth_ghz(1.902e10, 6.20) - 117.924).abs() < 1e-9);
    }

    #[test]
    fn ge_nv_row_matches_published_values() {
        let r = record("Ge_NV_N", 555.1, Some(54.7), None);
        let rep = full_report(&r, &FomContext::default()).unwrap();
        // g_c implied by the published bandwidth: 117.9 GHz / 6.20
        assert!((rep.g_c_rad_s / (117.9e9 / 6.20) - 1.0).abs() < 0.02);
        assert!((rep.q.unwrap() / 1.5e6 - 1.0).abs() < 0.1);
        assert!((rep.bandwidth_ghz / 117.9 - 1.0).abs() < 0.1);
        assert_eq!(rep.mu_source, InputSource::LifetimeInversion);
        assert!(rep.has_flag(FomFlag::DipoleComponentsUnresolved));
        assert_eq!(rep.tau_ns, Some(54.7));
    }

    #[test]
    fn q_identity_holds_exactly() {
        let r = record("S_BV_B", 591.1, Some(51.7), None);
        let rep = full_report(&r, &FomContext::default()).unwrap();
        let recon = rep.q.unwrap() * 2.0 * rep.universal.kappa_hat * rep.g_c_rad_s;
        assert!((recon - rep.omega_rad_s).abs() <= 1e-15 * rep.omega_rad_s * 4.0);
    }

    #[test]
    fn long_lived_row_flagged_unreachable() {
        let r = record("In_BV_N^{+1}", 894.4, Some(6.2e9), None);
        let rep = full_report(&r, &FomContext::default()).unwrap();
        assert!((rep.q.unwrap() / 1.3e10 - 1.0).abs() < 0.1);
        assert!(rep.has_flag(FomFlag::QUnreachable));
    }

    #[test]
    fn zero_dipole_has_no_lambda_structure() {
        let d = TransitionDipole::new(0.0, 0.0, 0.0).unwrap();
        let rep = full_report(&record("Sb_B", 638.7, None, Some(d)), &FomContext::default()).unwrap();
        assert!(rep.has_flag(FomFlag::NoLambdaStructure));
        assert_eq!(rep.q, None);
        assert_eq!(rep.tau_ns, None);
        assert_eq!(rep.in_plane, Some(true));
    }

    #[test]
    fn dipole_components_take_precedence() {
        let d = TransitionDipole::new(1.0, 2.0, 2.0).unwrap();
        assert_eq!(d.modulus(), 3.0);
        let rep = full_report(&record("Sb_B", 638.7, Some(1.0), Some(d)), &FomContext::default()).unwrap();
        assert_eq!(rep.mu_debye, 3.0);
        assert_eq!(rep.mu_source, InputSource::DipoleComponents);
        assert_eq!(rep.in_plane, Some(false));
        assert!(!rep.has_flag(FomFlag::DipoleComponentsUnresolved));
    }

    #[test]
    fn missing_inputs_is_an_error() {
        let err = full_report(&record("Sb_B", 638.7, None, None), &FomContext::default()).unwrap_err();
        assert_eq!(err, FomError::MissingInputs("Sb_B".into()));
    }

    #[test]
    fn cap_policies() {
        let strict = QualityCap::new(Some(1e7), CapPolicy::Strict);
        let decade = QualityCap::new(Some(1e7), CapPolicy::OrderOfMagnitude);
        assert!(strict.reachable(1e7));
        assert!(!strict.reachable(1.8e7));
        assert!(decade.reachable(1.8e7));
        assert!(decade.reachable(9.9e7));
        assert!(!decade.reachable(1e8));
        assert!(!decade.reachable(3.6e8));
        assert!(QualityCap::new(None, CapPolicy::Strict).reachable(1e30));
        assert!(QualityCap::new(Some(f64::INFINITY), CapPolicy::Strict).reachable(1e30));
    }

    #[test]
    fn dipole_rejects_negative_components() {
        assert!(TransitionDipole::new(-1.0, 0.0, 0.0).is_err());
    }
}
