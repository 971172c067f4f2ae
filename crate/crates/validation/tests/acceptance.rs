//! Acceptance criteria. Prints one verdict line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Duration;

use hbn_qmem::defectdb::{default_targets, match_zpl, screen, seed_records, DefectRecord};
use hbn_qmem::dynamics::{
    detuning_hwhm_with, evolve, find_kappa_max, kappa_max_closed_form, writing_efficiency, writing_efficiency_with,
    DetuningGrid, InitialCondition, IntegrationConfig, RunSettings,
};
use hbn_qmem::fom::{full_report, CapPolicy, CavityConvention, FigureOfMeritReport, FomContext, QualityCap};
use hbn_qmem::lambda::{
    build_hamiltonian, dark_state, dark_state_decay_closed_form, mixing_angle_at, DarkStateDecayModel,
    LambdaSystemSpec, PulseProfile, WindowPolicy,
};
use hbn_qmem::qops::{DensityMatrix, HilbertSpace, Level};
use hbn_qmem_validation::{published_table, rel, Outcome, Verdict};

const KAPPA_HAT: f64 = 0.06;
const SIGMA_DELTA: f64 = 6.20;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

fn pulse() -> PulseProfile {
    PulseProfile::new(10.0, 2.0).unwrap()
}

fn default_cfg() -> IntegrationConfig {
    IntegrationConfig::from_window(&pulse(), 1.0, &WindowPolicy::default()).unwrap()
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn writing_efficiency_criterion() -> Outcome {
    Outcome::run("1", "writing efficiency (Ω₀=10, T=2, no decay) ≥ 0.95", secs(10), || {
        let eff = writing_efficiency(&LambdaSystemSpec::new(1.0, pulse()), &default_cfg()).unwrap();
        Verdict::new(eff >= 0.95, format!("efficiency = {eff:.6}"))
    })
}

fn kappa_max_criterion() -> Outcome {
    Outcome::run("2", "κ_max = 0.06 ± 0.01 g_c (survival 0.5, d₀ = 0.999)", secs(5), || {
        let policy = WindowPolicy::default();
        let k = find_kappa_max(&pulse(), 1.0, 0.5, &policy).unwrap();
        let analytic = kappa_max_closed_form(&pulse(), 1.0, 0.5, k.p0, k.t_start, k.t_end);
        let mut notes = vec![
            format!("analytic ln(d₀/0.5)/∫cos²θ = {analytic:.6}; bisection = {:.6}", k.value),
            "window-policy sensitivity (p_g = ground fraction at t_start, p_s = metastable fraction at t_end):".into(),
            format!("{:>8} {:>8} {:>10} {:>10} {:>9}  {}", "p_g", "p_s", "t_start", "t_end", "κ_max", "0.06±0.01"),
        ];
        for p_g in [0.99, 0.999, 0.9999] {
            for p_s in [0.99, 0.999, 0.9999] {
                let pol = WindowPolicy::new(p_g, p_s);
                let r = find_kappa_max(&pulse(), 1.0, 0.5, &pol).unwrap();
                let ok = (r.value - KAPPA_HAT).abs() <= 0.01;
                notes.push(format!(
                    "{p_g:>8} {p_s:>8} {:>10.4} {:>10.4} {:>9.5}  {}{}",
                    r.t_start,
                    r.t_end,
                    r.value,
                    if ok { "yes" } else { "no" },
                    if pol == policy { "  <- default" } else { "" }
                ));
            }
        }
        let pass = (k.value - KAPPA_HAT).abs() <= 0.01 && rel(analytic, k.value) < 1e-3;
        Verdict::new(pass, format!("κ_max = {:.5} g_c under {}", k.value, k.window_policy)).with_notes(notes)
    })
}

fn bandwidth_criterion() -> Outcome {
    let template = LambdaSystemSpec::new(1.0, pulse()).with_kappa(KAPPA_HAT);
    let grid = DetuningGrid::default();
    let mut outcome = Outcome::run("3", "σ_Δ = 6.20 ± 0.15 (κ = 0.06 g_c detuning sweep)", secs(120), || {
        let main = detuning_hwhm_with(&template, &default_cfg(), &grid, &RunSettings::default()).unwrap();
        let resonant = main.efficiencies[0];
        let pass = (main.value - SIGMA_DELTA).abs() <= 0.15;
        Verdict::new(pass, format!("σ_Δ = {:.4} g_c ({} grid points, |g,1⟩ start)", main.value, main.parameters.len()))
            .with_notes(vec![format!("resonant efficiency {resonant:.6}; convention: {}", main.convention)])
    });
    let dark = RunSettings { initial: InitialCondition::DarkState, ..RunSettings::default() };
    let alt = detuning_hwhm_with(&template, &default_cfg(), &grid, &dark).unwrap();
    outcome.notes.push(format!("dark-state start (untimed): σ_Δ = {:.4} g_c", alt.value));
    outcome
}

fn identity_criterion() -> Outcome {
    Outcome::run("4", "published Δ·Q/ω = σ_Δ/(2κ̂) ≈ 51.67 within 3%", secs(1), || {
        let target = SIGMA_DELTA / (2.0 * KAPPA_HAT);
        let mut checked = 0;
        let mut notes = Vec::new();
        for row in published_table().iter().filter(|r| r.bandwidth_ghz > 0.0) {
            checked += 1;
            let omega = 2.0 * PI * SPEED_OF_LIGHT / (row.zpl_nm * 1e-9);
            let ratio = row.bandwidth_ghz * 1e9 * row.q / omega;
            if rel(ratio, target) > 0.03 {
                notes.push(format!("{:<22} Δ·Q/ω = {ratio:8.3} ({:+.1}%)", row.label, 100.0 * (ratio / target - 1.0)));
            }
        }
        let bad = notes.len();
        Verdict::new(bad == 0, format!("{}/{checked} rows with Δ > 0 within 3% of {target:.3}", checked - bad))
            .with_notes(notes)
    })
}

fn evaluate(records: &[DefectRecord], ctx: &FomContext) -> Vec<FigureOfMeritReport> {
    records.iter().map(|r| full_report(r, ctx).unwrap()).collect()
}

/// Rows whose Q and Δ both land within 10% (Δ also within rounding).
fn calibration_misses(reports: &[FigureOfMeritReport]) -> Vec<(String, f64, f64)> {
    let table = published_table();
    reports
        .iter()
        .filter_map(|rep| {
            let row = table.iter().find(|r| r.label == rep.label).expect("seed row in table");
            let q = rep.q.unwrap_or(f64::INFINITY);
            let q_ok = rel(q, row.q) <= 0.10;
            let d_ok = rel(rep.bandwidth_ghz, row.bandwidth_ghz) <= 0.10
                || (rep.bandwidth_ghz - row.bandwidth_ghz).abs() <= row.bandwidth_rounding();
            (!(q_ok && d_ok)).then(|| (rep.label.clone(), q / row.q - 1.0, rep.bandwidth_ghz / row.bandwidth_ghz - 1.0))
        })
        .collect()
}

fn calibration_criterion() -> Outcome {
    Outcome::run("5", "τ → Q, Δ within 10% for ≥ 20/25 rows (default convention)", secs(1), || {
        let records = seed_records();
        let reports = evaluate(&records, &FomContext::default());
        let misses = calibration_misses(&reports);
        let within = reports.len() - misses.len();
        let anchor = |label: &str, q: f64, d: f64| {
            let rep = reports.iter().find(|r| r.label == label).unwrap();
            rel(rep.q.unwrap(), q) <= 0.10 && rel(rep.bandwidth_ghz, d) <= 0.10
        };
        let anchors = anchor("Ge_NV_N", 1.5e6, 117.9) && anchor("S_BV_B", 1.4e6, 117.6);
        let mut notes: Vec<String> = misses
            .iter()
            .map(|(l, dq, dd)| format!("outlier {l:<22} Q {:+.1}%  Δ {:+.1}%", 100.0 * dq, 100.0 * dd))
            .collect();
        let avg_ctx =
            FomContext { convention: CavityConvention::orientation_averaged_in_medium(), ..FomContext::default() };
        let avg = evaluate(&records, &avg_ctx);
        let avg_misses = calibration_misses(&avg);
        let ge = avg.iter().find(|r| r.label == "Ge_NV_N").unwrap();
        notes.push(format!(
            "orientation-averaged in-medium convention (1/√3, ε₀n_D²): {}/25 within 10%; Ge_NV_N Q = {:.3e}, Δ = {:.1} GHz",
            25 - avg_misses.len(),
            ge.q.unwrap(),
            ge.bandwidth_ghz
        ));
        Verdict::new(
            within >= 20 && anchors && reports.len() == 25,
            format!("{within}/25 rows within 10%; anchors Ge_NV_N, S_BV_B {}", if anchors { "ok" } else { "off" }),
        )
        .with_notes(notes)
    })
}

fn screening_outcome() -> Outcome {
    Outcome::run("6a", "Q ≤ 1e7 screening rejects exactly Al_BV_N^{+1}, In_BV_N^{+1}", None, || {
        let records = seed_records();
        let ctx = FomContext::default();
        let items: Vec<_> = records.iter().cloned().zip(evaluate(&records, &ctx)).collect();
        let rejected = |cap: &QualityCap| -> BTreeSet<String> {
            screen(&items, cap).rejected.iter().map(|r| r.report.label.clone()).collect()
        };
        let got = rejected(&ctx.quality_cap);
        let expected: BTreeSet<String> = ["Al_BV_N^{+1}", "In_BV_N^{+1}"].iter().map(|s| s.to_string()).collect();
        let strict = rejected(&QualityCap::new(Some(1e7), CapPolicy::Strict));
        let s = screen(&items, &ctx.quality_cap);
        let partition = s.candidates.len() + s.rejected.len() == items.len();
        Verdict::new(got == expected && partition, format!("rejected {got:?} under {:?} cap", ctx.quality_cap.policy))
            .with_notes(vec![format!("strict Q ≤ 1e7 would reject {} rows: {strict:?}", strict.len())])
    })
}

fn matching_outcome() -> Outcome {
    Outcome::run("6b", "±5 nm matching reproduces the published assignments (incl. Ga_N double match)", None, || {
        let records = seed_records();
        let matches = match_zpl(&records, &default_targets(), 5.0).unwrap();
        let got: BTreeSet<(String, String)> =
            matches.iter().map(|m| (m.defect.to_string(), m.target.name.clone())).collect();
        let expected: BTreeSet<(String, String)> = published_table()
            .iter()
            .flat_map(|r| r.targets.iter().map(move |t| (r.label.clone(), t.clone())))
            .collect();
        let mut notes = Vec::new();
        for (l, t) in expected.difference(&got) {
            let r = records.iter().find(|r| r.label.to_string() == *l).unwrap();
            let w = default_targets().iter().find(|x| x.name == *t).unwrap().wavelength_nm;
            notes.push(format!("missing {l} -> {t} (|{:.1} − {w}| = {:.1} nm)", r.zpl_nm, (r.zpl_nm - w).abs()));
        }
        for (l, t) in got.difference(&expected) {
            notes.push(format!("extra   {l} -> {t}"));
        }
        let ga: Vec<String> = matches
            .iter()
            .filter(|m| m.defect.to_string() == "Ga_N")
            .map(|m| format!("{} {} ({:+.1} nm)", m.target.name, m.target.application, m.detuning_nm))
            .collect();
        notes.push(format!("Ga_N matches: {ga:?}"));
        let common = got.intersection(&expected).count();
        Verdict::new(
            got == expected,
            format!("{common} shared pairs, {} missing, {} extra", expected.len() - common, got.len() - common),
        )
        .with_notes(notes)
    })
}

fn no_cloning_criterion() -> Outcome {
    Outcome::run("7", "efficiency at κ = 0.06 g_c > 0.5", None, || {
        let spec = LambdaSystemSpec::new(1.0, pulse()).with_kappa(KAPPA_HAT);
        let eff = writing_efficiency(&spec, &default_cfg()).unwrap();
        let dark = RunSettings { initial: InitialCondition::DarkState, ..RunSettings::default() };
        let eff_dark = writing_efficiency_with(&spec, &default_cfg(), &dark).unwrap();
        Verdict::new(eff > 0.5, format!("efficiency = {eff:.6} (dark-state start {eff_dark:.6})"))
    })
}

fn integrity_criterion() -> Outcome {
    Outcome::run("8", "numerical integrity", None, || {
        let (t0, t1) = WindowPolicy::default().times(&pulse(), 1.0).unwrap();
        let mut checks: Vec<(String, f64, f64)> = Vec::new();

        // closed-form survival vs RK4 on d' = −k cos²θ d
        let k = 0.0676;
        let model = DarkStateDecayModel::new(k, pulse(), 1.0, 0.999, t0).unwrap();
        let rhs = |t: f64, d: f64| {
            let om = 10.0 / (1.0 + (t / 2.0).exp());
            -k * om * om / (om * om + 1.0) * d
        };
        let n = 20_000;
        let h = (t1 - t0) / n as f64;
        let (mut t, mut d, mut worst) = (t0, 0.999, 0.0f64);
        for _ in 0..n {
            let k1 = rhs(t, d);
            let k2 = rhs(t + h / 2.0, d + h / 2.0 * k1);
            let k3 = rhs(t + h / 2.0, d + h / 2.0 * k2);
            let k4 = rhs(t + h, d + h * k3);
            d += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
            worst = worst.max((d - dark_state_decay_closed_form(t, &model)).abs());
        }
        checks.push(("closed form vs ODE".into(), worst, 1e-6));

        let lossy = LambdaSystemSpec::new(1.0, pulse()).with_kappa(KAPPA_HAT);
        let rho0 = DensityMatrix::basis(HilbertSpace::default(), Level::Ground, 1).unwrap();
        let tr = evolve(&rho0, &lossy, &default_cfg()).unwrap();
        checks.push(("trace drift".into(), tr.max_trace_drift(), 1e-9));

        let space = HilbertSpace::default();
        let closed = LambdaSystemSpec::new(1.0, pulse());
        let mut dark_res = 0.0f64;
        for i in 0..20 {
            let t = t0 + (t1 - t0) * i as f64 / 19.0;
            let h = build_hamiltonian(t, &closed, space);
            let v = h.mul_vec(dark_state(mixing_angle_at(t, 1.0, &pulse()), space).amplitudes()).unwrap();
            dark_res = dark_res.max(v.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        checks.push(("|H·dark|".into(), dark_res, 1e-10));

        let effs: Vec<f64> = [1, 2]
            .iter()
            .map(|&c| {
                let s = RunSettings { space: HilbertSpace::new(c).unwrap(), ..RunSettings::default() };
                writing_efficiency_with(&lossy, &default_cfg(), &s).unwrap()
            })
            .collect();
        checks.push(("cutoff 1→2 efficiency change".into(), (effs[0] - effs[1]).abs(), 1e-9));

        let unitary = evolve(&rho0, &closed, &default_cfg()).unwrap();
        let purity = unitary.states.iter().map(|r| (1.0 - r.purity()).abs()).fold(0.0, f64::max);
        checks.push(("unitary purity drift".into(), purity, 1e-8));

        let pass = checks.iter().all(|(_, v, lim)| v <= lim);
        let detail = checks
            .iter()
            .map(|(name, v, lim)| format!("{name} {v:.1e} ≤ {lim:.0e}{}", if v <= lim { "" } else { " ✗" }))
            .collect::<Vec<_>>()
            .join("; ");
        Verdict::new(pass, detail)
    })
}

fn main() {
    println!("acceptance suite");
    let mut outcomes = vec![
        writing_efficiency_criterion(),
        kappa_max_criterion(),
        bandwidth_criterion(),
        identity_criterion(),
        calibration_criterion(),
    ];
    let a = screening_outcome();
    let b = matching_outcome();
    let six = Outcome {
        id: "6".into(),
        title: "screening and matching reproduce the published selection".into(),
        pass: a.pass && b.pass,
        detail: format!("screening {}, matching {}", verdict(a.pass), verdict(b.pass)),
        runtime: a.runtime + b.runtime,
        limit: None,
        notes: Vec::new(),
    };
    outcomes.extend([a, b, six, no_cloning_criterion(), integrity_criterion()]);

    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        outcomes.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}
