use std::io::Write;
use std::path::{Path, PathBuf};

use hbn_qmem::defectdb::{
    default_targets_json, ingest_csv_str, ingest_json_str, match_zpl, parse_targets_json, records_to_json, screen,
    seed_csv, write_records_csv, DbFormat, DefectRecord, Diagnostic, MatchResult, Screening, Severity, TransitionSpin,
    DEFAULT_TARGETS_NAME,
};
use hbn_qmem::dynamics::{
    detuning_sweep, evolve, find_kappa_max_with_p0, half_max_crossing, kappa_max_closed_form, DetuningGrid,
    InitialCondition, KappaMax, RunSettings,
};
use hbn_qmem::fom::{full_report, CapPolicy, ConstantOrigin, FigureOfMeritReport, FomContext, UniversalConstants};
use hbn_qmem::lambda::{dark_state_decay_closed_form, DarkStateDecayModel, LambdaSystemSpec, PulseProfile};
use hbn_qmem::qops::{HilbertSpace, Level};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ConstantSetting, Keyword, LoadedConfig, OutputFormat, RunConfig};
use crate::error::CliError;
use crate::output::{csv_writer, opt, InputDigest, Provenance, Sink};

/// Options shared by every subcommand.
pub struct Global {
    pub loaded: LoadedConfig,
    pub timestamp: bool,
}

impl Global {
    fn start(
        &self,
        command: &str,
        config: RunConfig,
        inputs: Vec<InputDigest>,
        parameters: serde_json::Value,
    ) -> Result<Sink, CliError> {
        let source = self.loaded.source.as_ref().map(|(p, _)| p.display().to_string());
        let mut prov = Provenance::new(command, config.clone(), source, self.timestamp);
        if let Some((p, bytes)) = &self.loaded.source {
            prov.inputs.push(InputDigest::of(p.display().to_string(), bytes));
        }
        prov.inputs.extend(inputs);
        prov.parameters = parameters;
        Sink::new(&config.output_dir, prov)
    }
}

/// Flag overrides for the reference pulse.
#[derive(Clone, Copy, Debug, Default)]
pub struct PulseFlags {
    pub omega0: Option<f64>,
    pub t_char: Option<f64>,
    pub g: Option<f64>,
}

impl PulseFlags {
    fn apply(&self, cfg: &mut RunConfig) -> Result<PulseProfile, CliError> {
        let p = &mut cfg.protocol;
        p.omega0 = self.omega0.unwrap_or(p.omega0);
        p.t_char = self.t_char.unwrap_or(p.t_char);
        p.g = self.g.unwrap_or(p.g);
        if !(p.g >= 0.0 && p.g.is_finite()) {
            return Err(CliError::Usage(format!("--g must be a non-negative coupling, got {}", p.g)));
        }
        p.pulse()
    }
}

fn finite_nonneg(name: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be a non-negative number, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be finite, got {v}")))
    }
}

fn space(cfg: &RunConfig) -> Result<HilbertSpace, CliError> {
    HilbertSpace::new(cfg.protocol.photon_cutoff).map_err(|e| CliError::Usage(e.to_string()))
}

fn tag<T: Serialize>(x: &T) -> String {
    match serde_json::to_value(x) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(v) => v.to_string(),
        Err(_) => String::new(),
    }
}

fn report_written(sink: &Sink) {
    for p in &sink.written {
        println!("wrote {}", p.display());
    }
}

// ---------------------------------------------------------------- simulate

pub struct SimulateFlags {
    pub pulse: PulseFlags,
    pub kappa: f64,
    pub delta: f64,
    pub delta2: f64,
    pub initial: InitialCondition,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
}

#[derive(Serialize)]
struct SimulateSummary {
    efficiency: f64,
    t_start: f64,
    t_end: f64,
    window_coupling: f64,
    final_populations: Vec<(String, f64)>,
    max_trace_drift: f64,
    max_hermiticity_error: f64,
    accepted_steps: usize,
    rejected_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory: Option<TrajectoryData>,
}

#[derive(Serialize)]
struct TrajectoryData {
    columns: Vec<String>,
    times: Vec<f64>,
    populations: Vec<Vec<f64>>,
}

pub fn simulate(global: &Global, mut cfg: RunConfig, flags: &SimulateFlags) -> Result<(), CliError> {
    let pulse = flags.pulse.apply(&mut cfg)?;
    let g = cfg.protocol.g;
    let kappa = finite_nonneg("--kappa", flags.kappa)?;
    let mut spec = LambdaSystemSpec::new(g, pulse).with_kappa(kappa).with_delta_one(finite("--delta", flags.delta)?);
    spec.delta_two = finite("--delta2", flags.delta2)?;
    spec.validate()?;
    // An uncoupled run still needs a window; place it as for g = g_c.
    let window_coupling = if g > 0.0 { g } else { 1.0 };
    let mut icfg = cfg.integration_config(&pulse, window_coupling)?;
    if let Some(t) = flags.t_start {
        icfg.t_start = finite("--t-start", t)?;
    }
    if let Some(t) = flags.t_end {
        icfg.t_end = finite("--t-end", t)?;
    }
    icfg.validate()?;
    let space = space(&cfg)?;
    let rho0 = flags.initial.density(&spec, space, icfg.t_start)?;
    let traj = evolve(&rho0, &spec, &icfg)?;
    let last = traj.final_state();
    let efficiency =
        last.population(Level::Metastable, 0).map_err(|e| CliError::Numerical(e.to_string()))?.clamp(0.0, 1.0);
    let columns: Vec<String> = (0..space.dim())
        .map(|i| {
            let (level, n) = space.basis_state(i);
            format!("p_{level}{n}")
        })
        .collect();
    let trajectory = (cfg.output_format == OutputFormat::Json).then(|| TrajectoryData {
        columns: columns.clone(),
        times: traj.times.clone(),
        populations: traj.populations(),
    });
    let summary = SimulateSummary {
        efficiency,
        t_start: icfg.t_start,
        t_end: icfg.t_end,
        window_coupling,
        final_populations: columns.iter().cloned().zip(last.populations()).collect(),
        max_trace_drift: traj.max_trace_drift(),
        max_hermiticity_error: traj.max_hermiticity_error(),
        accepted_steps: traj.stats.accepted,
        rejected_steps: traj.stats.rejected,
        trajectory,
    };
    let params = json!({
        "kappa": kappa,
        "delta": spec.delta_one,
        "delta2": spec.delta_two,
        "initial": flags.initial,
        "t_start": icfg.t_start,
        "t_end": icfg.t_end,
    });
    let mut sink = global.start("simulate", cfg.clone(), Vec::new(), params)?;
    if cfg.output_format == OutputFormat::Csv {
        sink.csv("trajectory.csv", |out| Ok(traj.write_csv(out)?))?;
    }
    sink.json("simulate.json", &summary)?;
    println!("efficiency = {efficiency}");
    report_written(&sink);
    Ok(())
}

// ---------------------------------------------------------------- kappa

#[derive(Clone, Debug, Serialize)]
pub struct KappaOutcome {
    pub kappa_max: KappaMax,
    /// Same quantity from the exposure integral, no bisection.
    pub closed_form: f64,
    /// `(t, d(t))` at `κ = κ_max`.
    #[serde(skip)]
    pub curve: Vec<(f64, f64)>,
}

const CURVE_POINTS: usize = 200;

pub fn kappa_outcome(cfg: &RunConfig, pulse: &PulseProfile) -> Result<KappaOutcome, CliError> {
    let p = &cfg.protocol;
    if !(p.survival_threshold > 0.0 && p.survival_threshold < 1.0) {
        return Err(CliError::Usage(format!("threshold {} must lie in (0, 1)", p.survival_threshold)));
    }
    if !(p.initial_survival > 0.0 && p.initial_survival <= 1.0) {
        return Err(CliError::Usage(format!("p0 {} must lie in (0, 1]", p.initial_survival)));
    }
    let k = find_kappa_max_with_p0(pulse, p.g, p.survival_threshold, &cfg.window, p.initial_survival)?;
    let closed_form = kappa_max_closed_form(pulse, p.g, p.survival_threshold, k.p0, k.t_start, k.t_end);
    let model = DarkStateDecayModel::new(k.value, *pulse, p.g, k.p0, k.t_start)?;
    let curve = (0..=CURVE_POINTS)
        .map(|i| {
            let t = k.t_start + (k.t_end - k.t_start) * i as f64 / CURVE_POINTS as f64;
            (t, dark_state_decay_closed_form(t, &model))
        })
        .collect();
    Ok(KappaOutcome { kappa_max: k, closed_form, curve })
}

fn write_curve(out: &mut Vec<u8>, curve: &[(f64, f64)]) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(["t", "survival"])?;
    for (t, d) in curve {
        w.write_record([t.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub struct KappaFlags {
    pub pulse: PulseFlags,
    pub threshold: Option<f64>,
    pub p0: Option<f64>,
}

pub fn kappa(global: &Global, mut cfg: RunConfig, flags: &KappaFlags) -> Result<(), CliError> {
    let pulse = flags.pulse.apply(&mut cfg)?;
    cfg.protocol.survival_threshold = flags.threshold.unwrap_or(cfg.protocol.survival_threshold);
    cfg.protocol.initial_survival = flags.p0.unwrap_or(cfg.protocol.initial_survival);
    let outcome = kappa_outcome(&cfg, &pulse)?;
    let mut sink = global.start("kappa", cfg.clone(), Vec::new(), json!({}))?;
    if cfg.output_format == OutputFormat::Csv {
        sink.csv("decay.csv", |out| write_curve(out, &outcome.curve))?;
        sink.json("kappa.json", &outcome)?;
    } else {
        sink.json("kappa.json", &json!({ "kappa": &outcome, "curve": &outcome.curve }))?;
    }
    println!("kappa_max = {} g_c ({})", outcome.kappa_max.value, outcome.kappa_max.window_policy);
    report_written(&sink);
    Ok(())
}

// ---------------------------------------------------------------- bandwidth

#[derive(Clone, Debug, Serialize)]
pub struct BandwidthOutcome {
    pub kappa: f64,
    /// Half width on the `Δ > 0` side.
    pub sigma_delta: f64,
    /// Half width on the `Δ < 0` side.
    pub sigma_delta_negative: f64,
    pub asymmetry: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub initial: InitialCondition,
    pub convention: String,
    /// Ascending, both signs.
    #[serde(skip)]
    pub detunings: Vec<f64>,
    #[serde(skip)]
    pub efficiencies: Vec<f64>,
}

pub fn bandwidth_outcome(
    cfg: &RunConfig,
    pulse: &PulseProfile,
    kappa: f64,
    initial: InitialCondition,
) -> Result<BandwidthOutcome, CliError> {
    let g = cfg.protocol.g;
    let template = LambdaSystemSpec::new(g, *pulse).with_kappa(kappa);
    template.validate()?;
    let icfg = cfg.integration_config(pulse, g)?;
    let settings = RunSettings { space: space(cfg)?, initial };
    let positive = cfg.detuning_grid.values()?;
    // 0, +d₁, …, +dₙ, −d₁, …, −dₙ
    let all: Vec<f64> = positive.iter().copied().chain(positive[1..].iter().map(|d| -d)).collect();
    let effs = detuning_sweep(&template, &icfg, &settings, &all)?;
    let n = positive.len();
    let pos_eff = &effs[..n];
    let neg_eff: Vec<f64> = std::iter::once(effs[0]).chain(effs[n..].iter().copied()).collect();
    let sigma_pos = half_max_crossing(&positive, pos_eff)?;
    let sigma_neg = half_max_crossing(&positive, &neg_eff)?;
    let mut pairs: Vec<(f64, f64)> = all.iter().copied().zip(effs.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(BandwidthOutcome {
        kappa,
        sigma_delta: sigma_pos,
        sigma_delta_negative: sigma_neg,
        asymmetry: (sigma_pos - sigma_neg).abs(),
        t_start: icfg.t_start,
        t_end: icfg.t_end,
        initial,
        convention: "first half-maximum crossing from Δ = 0, linear interpolation".into(),
        detunings: pairs.iter().map(|p| p.0).collect(),
        efficiencies: pairs.iter().map(|p| p.1).collect(),
    })
}

fn write_sweep(out: &mut Vec<u8>, b: &BandwidthOutcome) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(["delta", "efficiency"])?;
    for (d, e) in b.detunings.iter().zip(&b.efficiencies) {
        w.write_record([d.to_string(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn resolve_kappa(cfg: &RunConfig) -> Result<(f64, ConstantOrigin), CliError> {
    Ok(match cfg.kappa_hat {
        ConstantSetting::Value(v) => (v, ConstantOrigin::Override),
        ConstantSetting::Keyword(Keyword::Cached) => (UniversalConstants::CACHED_KAPPA_HAT, ConstantOrigin::Cached),
        ConstantSetting::Keyword(Keyword::Recompute) => {
            let k = kappa_outcome(cfg, &cfg.protocol.pulse()?)?.kappa_max.value;
            (k, ConstantOrigin::Recomputed)
        }
    })
}

/// κ̂ and σ_Δ as configured, running the simulations for `"recompute"`.
pub fn resolve_universal(cfg: &RunConfig) -> Result<UniversalConstants, CliError> {
    let (kappa_hat, kappa_origin) = resolve_kappa(cfg)?;
    let (sigma_delta, sigma_origin) = match cfg.sigma_delta {
        ConstantSetting::Value(v) => (v, ConstantOrigin::Override),
        ConstantSetting::Keyword(Keyword::Cached) => (UniversalConstants::CACHED_SIGMA_DELTA, ConstantOrigin::Cached),
        ConstantSetting::Keyword(Keyword::Recompute) => {
            let pulse = cfg.protocol.pulse()?;
            let b = bandwidth_outcome(cfg, &pulse, kappa_hat, InitialCondition::GroundPhoton)?;
            (b.sigma_delta, ConstantOrigin::Recomputed)
        }
    };
    Ok(UniversalConstants { kappa_hat, sigma_delta, kappa_origin, sigma_origin })
}

pub struct BandwidthFlags {
    pub pulse: PulseFlags,
    pub kappa: Option<f64>,
    pub max: Option<f64>,
    pub step: Option<f64>,
    pub initial: InitialCondition,
}

pub fn bandwidth(global: &Global, mut cfg: RunConfig, flags: &BandwidthFlags) -> Result<(), CliError> {
    let pulse = flags.pulse.apply(&mut cfg)?;
    cfg.detuning_grid = DetuningGrid {
        max: flags.max.unwrap_or(cfg.detuning_grid.max),
        step: flags.step.unwrap_or(cfg.detuning_grid.step),
    };
    let kappa = match flags.kappa {
        Some(k) => finite_nonneg("--kappa", k)?,
        None => resolve_kappa(&cfg)?.0,
    };
    let outcome = bandwidth_outcome(&cfg, &pulse, kappa, flags.initial)?;
    let mut sink =
        global.start("bandwidth", cfg.clone(), Vec::new(), json!({ "kappa": kappa, "initial": flags.initial }))?;
    if cfg.output_format == OutputFormat::Csv {
        sink.csv("detuning.csv", |out| write_sweep(out, &outcome))?;
        sink.json("bandwidth.json", &outcome)?;
    } else {
        sink.json(
            "bandwidth.json",
            &json!({ "bandwidth": &outcome, "detunings": &outcome.detunings, "efficiencies": &outcome.efficiencies }),
        )?;
    }
    println!("sigma_delta = {} g_c (negative side {})", outcome.sigma_delta, outcome.sigma_delta_negative);
    report_written(&sink);
    Ok(())
}

// ---------------------------------------------------------------- database

pub struct DbFlags {
    pub db: Option<PathBuf>,
    pub db_format: Option<DbFormat>,
}

pub struct Db {
    pub records: Vec<DefectRecord>,
    pub diagnostics: Vec<Diagnostic>,
    pub digest: InputDigest,
}

const SEED_NAME: &str = "builtin:seed-defects.csv";

fn read_input(path: &Path) -> Result<(String, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Usage(format!("{}: input is not UTF-8", path.display())))?;
    Ok((text, bytes))
}

pub fn load_db(flags: &DbFlags) -> Result<Db, CliError> {
    let Some(path) = &flags.db else {
        let report = ingest_csv_str(seed_csv());
        return Ok(Db {
            records: report.records,
            diagnostics: report.diagnostics,
            digest: InputDigest::of(SEED_NAME, seed_csv().as_bytes()),
        });
    };
    let format = flags
        .db_format
        .or_else(|| DbFormat::from_path(path))
        .ok_or_else(|| CliError::Usage(format!("{}: cannot tell CSV from JSON; pass --db-format", path.display())))?;
    let (text, bytes) = read_input(path)?;
    let report = match format {
        DbFormat::Csv => ingest_csv_str(&text),
        DbFormat::Json => ingest_json_str(&text),
    };
    Ok(Db {
        records: report.records,
        diagnostics: report.diagnostics,
        digest: InputDigest::of(path.display().to_string(), &bytes),
    })
}

fn print_diagnostics(diags: &[Diagnostic]) {
    for d in diags {
        let sev = match d.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        eprintln!("line {}: {sev}: {}", d.line, d.message);
    }
}

/// Diagnostics go to stderr; any error-level entry stops the command.
fn require_clean(db: &Db) -> Result<(), CliError> {
    print_diagnostics(&db.diagnostics);
    let errors = db.diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    if errors > 0 {
        return Err(CliError::Usage(format!("{}: {errors} invalid row(s); run `ingest` for details", db.digest.name)));
    }
    Ok(())
}

pub fn ingest(global: &Global, cfg: RunConfig, flags: &DbFlags) -> Result<(), CliError> {
    if flags.db.is_none() {
        return Err(CliError::Usage("ingest needs --db <file>".into()));
    }
    let db = load_db(flags)?;
    print_diagnostics(&db.diagnostics);
    let errors = db.diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    let mut sink = global.start("ingest", cfg.clone(), vec![db.digest.clone()], json!({}))?;
    if cfg.output_format == OutputFormat::Csv {
        sink.csv("records.csv", |out| Ok(write_records_csv(&db.records, out)?))?;
        sink.json("ingest.json", &json!({ "accepted": db.records.len(), "diagnostics": &db.diagnostics }))?;
    } else {
        let records: serde_json::Value = serde_json::from_str(&records_to_json(&db.records)?)?;
        sink.json(
            "ingest.json",
            &json!({ "accepted": db.records.len(), "diagnostics": &db.diagnostics, "records": records }),
        )?;
    }
    println!("accepted {} record(s), {} diagnostic(s)", db.records.len(), db.diagnostics.len());
    report_written(&sink);
    if errors > 0 {
        return Err(CliError::Usage(format!("{errors} row(s) rejected")));
    }
    Ok(())
}

// ---------------------------------------------------------------- fom

#[derive(Clone, Debug, Serialize)]
pub struct FomRow {
    pub label: String,
    pub transition_spin: TransitionSpin,
    pub report: Option<FigureOfMeritReport>,
    pub error: Option<String>,
}

pub fn fom_context(cfg: &RunConfig, universal: UniversalConstants) -> FomContext {
    FomContext { physical: cfg.physical, convention: cfg.convention, universal, quality_cap: cfg.quality_cap }
}

/// Evaluated in parallel; output order is record order.
pub fn fom_rows(records: &[DefectRecord], ctx: &FomContext) -> Vec<FomRow> {
    records
        .par_iter()
        .map(|r| {
            let res = full_report(r, ctx);
            FomRow {
                label: r.label.to_string(),
                transition_spin: r.transition_spin,
                error: res.as_ref().err().map(|e| e.to_string()),
                report: res.ok(),
            }
        })
        .collect()
}

fn write_fom_csv(out: &mut Vec<u8>, rows: &[FomRow]) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record([
        "defect_label",
        "transition_spin",
        "zpl_nm",
        "zpl_ev",
        "mu_debye",
        "mu_source",
        "tau_ns",
        "gamma_r_per_s",
        "g_c_rad_s",
        "kappa_rad_s",
        "q",
        "bandwidth_ghz",
        "flags",
        "error",
    ])?;
    for row in rows {
        let spin = row.transition_spin.as_str().to_string();
        let fields = match &row.report {
            Some(r) => vec![
                row.label.clone(),
                spin,
                r.zpl_nm.to_string(),
                r.zpl_ev.to_string(),
                r.mu_debye.to_string(),
                tag(&r.mu_source),
                opt(r.tau_ns),
                r.gamma_r_per_s.to_string(),
                r.g_c_rad_s.to_string(),
                r.kappa_rad_s.to_string(),
                opt(r.q),
                r.bandwidth_ghz.to_string(),
                r.flags.iter().map(tag).collect::<Vec<_>>().join(";"),
                String::new(),
            ],
            None => {
                let mut v = vec![row.label.clone(), spin];
                v.extend(std::iter::repeat_n(String::new(), 11));
                v.push(row.error.clone().unwrap_or_default());
                v
            }
        };
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn fom(global: &Global, cfg: RunConfig, flags: &DbFlags) -> Result<(), CliError> {
    let db = load_db(flags)?;
    require_clean(&db)?;
    let universal = resolve_universal(&cfg)?;
    let rows = fom_rows(&db.records, &fom_context(&cfg, universal));
    let mut sink = global.start("fom", cfg.clone(), vec![db.digest.clone()], json!({}))?;
    if cfg.output_format == OutputFormat::Csv {
        sink.csv("fom.csv", |out| write_fom_csv(out, &rows))?;
    }
    sink.json("fom.json", &json!({ "universal": universal, "rows": &rows }))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} report(s), {failed} row error(s)", rows.len() - failed);
    report_written(&sink);
    Ok(())
}

// ---------------------------------------------------------------- match

pub struct TargetFlags {
    pub targets: Option<PathBuf>,
}

fn load_targets(flags: &TargetFlags) -> Result<(Vec<hbn_qmem::defectdb::TargetSystem>, InputDigest), CliError> {
    match &flags.targets {
        None => Ok((
            parse_targets_json(default_targets_json())?,
            InputDigest::of(format!("builtin:{DEFAULT_TARGETS_NAME}"), default_targets_json().as_bytes()),
        )),
        Some(p) => {
            let (text, bytes) = read_input(p)?;
            Ok((parse_targets_json(&text)?, InputDigest::of(p.display().to_string(), &bytes)))
        }
    }
}

fn write_matches_csv(out: &mut Vec<u8>, matches: &[MatchResult]) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(["defect_label", "transition_spin", "zpl_nm", "target", "target_nm", "application", "detuning_nm"])?;
    for m in matches {
        w.write_record([
            m.defect.to_string(),
            m.transition_spin.as_str().to_string(),
            m.zpl_nm.to_string(),
            m.target.name.clone(),
            m.target.wavelength_nm.to_string(),
            m.target.application.to_string(),
            m.detuning_nm.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn matches(
    global: &Global,
    mut cfg: RunConfig,
    db: &DbFlags,
    targets: &TargetFlags,
    tol: Option<f64>,
) -> Result<(), CliError> {
    cfg.match_tolerance_nm = tol.unwrap_or(cfg.match_tolerance_nm);
    let db = load_db(db)?;
    require_clean(&db)?;
    let (targets, tdigest) = load_targets(targets)?;
    let found = match_zpl(&db.records, &targets, cfg.match_tolerance_nm)?;
    let mut sink = global.start("match", cfg.clone(), vec![db.digest.clone(), tdigest], json!({}))?;
    if cfg.output_format == OutputFormat::Csv {
        sink.csv("matches.csv", |out| write_matches_csv(out, &found))?;
    }
    sink.json("matches.json", &json!({ "tolerance_nm": cfg.match_tolerance_nm, "matches": &found }))?;
    println!("{} match(es) within ±{} nm", found.len(), cfg.match_tolerance_nm);
    report_written(&sink);
    Ok(())
}

// ---------------------------------------------------------------- screen

#[derive(Serialize)]
struct ScreenResult<'a> {
    screening: &'a Screening,
    /// Rows the figure-of-merit step could not evaluate.
    unevaluated: Vec<&'a FomRow>,
}

fn write_screen_csv(out: &mut Vec<u8>, s: &Screening, unevaluated: &[&FomRow]) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(["defect_label", "transition_spin", "q", "status", "reasons"])?;
    for r in &s.candidates {
        w.write_record([
            r.label.clone(),
            r.transition_spin.as_str().into(),
            opt(r.q),
            "candidate".into(),
            String::new(),
        ])?;
    }
    for rej in &s.rejected {
        let r = &rej.report;
        let reasons = rej.reasons.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(";");
        w.write_record([r.label.clone(), r.transition_spin.as_str().into(), opt(r.q), "rejected".into(), reasons])?;
    }
    for row in unevaluated {
        w.write_record([
            row.label.clone(),
            row.transition_spin.as_str().into(),
            String::new(),
            "unevaluated".into(),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn screen_rows<'a>(records: &[DefectRecord], rows: &'a [FomRow], cfg: &RunConfig) -> (Screening, Vec<&'a FomRow>) {
    let mut items = Vec::new();
    let mut unevaluated = Vec::new();
    for (rec, row) in records.iter().zip(rows) {
        match &row.report {
            Some(r) => items.push((rec.clone(), r.clone())),
            None => unevaluated.push(row),
        }
    }
    (screen(&items, &cfg.quality_cap), unevaluated)
}

pub struct ScreenFlags {
    pub qmax: Option<Option<f64>>,
    pub policy: Option<CapPolicy>,
}

pub fn screen_cmd(global: &Global, mut cfg: RunConfig, db: &DbFlags, flags: &ScreenFlags) -> Result<(), CliError> {
    if let Some(q) = flags.qmax {
        cfg.quality_cap.q_max = q;
    }
    if let Some(p) = flags.policy {
        cfg.quality_cap.policy = p;
    }
    cfg.validate()?;
    let db = load_db(db)?;
    require_clean(&db)?;
    let universal = resolve_universal(&cfg)?;
    let rows = fom_rows(&db.records, &fom_context(&cfg, universal));
    let (screening, unevaluated) = screen_rows(&db.records, &rows, &cfg);
    let mut sink = global.start("screen", cfg.clone(), vec![db.digest.clone()], json!({}))?;
    if cfg.output_format == OutputFormat::Csv {
        sink.csv("screen.csv", |out| write_screen_csv(out, &screening, &unevaluated))?;
    }
    sink.json("screen.json", &ScreenResult { screening: &screening, unevaluated: unevaluated.clone() })?;
    let rejected: Vec<&str> = screening.rejected.iter().map(|r| r.report.label.as_str()).collect();
    println!(
        "{} candidate(s), {} rejected [{}], {} unevaluated",
        screening.candidates.len(),
        rejected.len(),
        rejected.join(", "),
        unevaluated.len()
    );
    report_written(&sink);
    Ok(())
}

// ---------------------------------------------------------------- report

#[derive(Serialize)]
struct Report<'a> {
    universal: UniversalConstants,
    kappa: &'a KappaOutcome,
    bandwidth: Option<&'a BandwidthOutcome>,
    reports: usize,
    row_errors: Vec<&'a FomRow>,
    matches: &'a [MatchResult],
    candidates: Vec<&'a str>,
    rejected: Vec<(&'a str, Vec<&'static str>)>,
}

pub fn report(
    global: &Global,
    cfg: RunConfig,
    db: &DbFlags,
    targets: &TargetFlags,
    skip_sweep: bool,
) -> Result<(), CliError> {
    let pulse = cfg.protocol.pulse()?;
    let dbv = load_db(db)?;
    require_clean(&dbv)?;
    let (targets, tdigest) = load_targets(targets)?;
    let kappa = kappa_outcome(&cfg, &pulse)?;
    let universal = resolve_universal(&cfg)?;
    let sweep = if skip_sweep {
        None
    } else {
        Some(bandwidth_outcome(&cfg, &pulse, universal.kappa_hat, InitialCondition::GroundPhoton)?)
    };
    let rows = fom_rows(&dbv.records, &fom_context(&cfg, universal));
    let (screening, unevaluated) = screen_rows(&dbv.records, &rows, &cfg);
    let found = match_zpl(&dbv.records, &targets, cfg.match_tolerance_nm)?;

    let mut sink =
        global.start("report", cfg.clone(), vec![dbv.digest.clone(), tdigest], json!({ "skip_sweep": skip_sweep }))?;
    let csv = cfg.output_format == OutputFormat::Csv;
    if csv {
        sink.csv("decay.csv", |out| write_curve(out, &kappa.curve))?;
        if let Some(b) = &sweep {
            sink.csv("detuning.csv", |out| write_sweep(out, b))?;
        }
        sink.csv("fom.csv", |out| write_fom_csv(out, &rows))?;
        sink.csv("matches.csv", |out| write_matches_csv(out, &found))?;
        sink.csv("screen.csv", |out| write_screen_csv(out, &screening, &unevaluated))?;
    }
    let summary = Report {
        universal,
        kappa: &kappa,
        bandwidth: sweep.as_ref(),
        reports: rows.iter().filter(|r| r.report.is_some()).count(),
        row_errors: unevaluated.clone(),
        matches: &found,
        candidates: screening.candidates.iter().map(|r| r.label.as_str()).collect(),
        rejected: screening
            .rejected
            .iter()
            .map(|r| (r.report.label.as_str(), r.reasons.iter().map(|x| x.as_str()).collect()))
            .collect(),
    };
    if csv {
        sink.json("report.json", &summary)?;
    } else {
        sink.json(
            "report.json",
            &json!({
                "summary": &summary,
                "decay_curve": &kappa.curve,
                "sweep": sweep.as_ref().map(|b| json!({ "detunings": &b.detunings, "efficiencies": &b.efficiencies })),
                "fom": &rows,
                "screening": &screening,
            }),
        )?;
    }
    println!(
        "kappa_max = {}, sigma_delta = {}, {} report(s), {} match(es), {} rejected",
        kappa.kappa_max.value,
        universal.sigma_delta,
        summary.reports,
        found.len(),
        summary.rejected.len()
    );
    report_written(&sink);
    let _ = std::io::stdout().flush();
    Ok(())
}
