//! Built-in self-check suite: cross-module invariants plus a reduced-scale
//! version of the acceptance checks.
//!
//! Each check has a stable dotted name so reports can be diffed and a failing
//! check can be pointed at directly.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{self, AnalyticInputs};
use crate::channel::{generate_channel, ChannelParams};
use crate::detection::DetectorKind;
use crate::linalg::frobenius;
use crate::modulation::{wrap_angle, Scheme};
use crate::montecarlo::rng::{derive_stream_rng, StreamRng};
use crate::montecarlo::{
    self, make_pool, ExperimentConfig, RealizationBank, ResultRow, Source,
};
use crate::phasenoise::{sample_phase_pair, PnConfig};
use crate::precoding::{design_hybrid, pe_altmin, AltMinOptions};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((ok, d)) => Self::new(name, ok, d),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn from_checks(checks: Vec<Check>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Draws one total phase `ψ` for the characteristic-function check.
pub type PhaseSampler = dyn Fn(&PnConfig, &mut StreamRng) -> f64 + Sync;

pub fn reference_sampler(cfg: &PnConfig, rng: &mut StreamRng) -> f64 {
    let (tx, rx) = sample_phase_pair(cfg, rng);
    tx + rx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    pub quick_acceptance: bool,
    pub workers: Option<usize>,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            quick_acceptance: true,
            workers: None,
            seed: 20_240_601,
        }
    }
}

pub fn run_suite(opts: &SuiteOptions, sampler: &PhaseSampler) -> Report {
    let mut checks = property_checks(sampler, opts.workers, opts.seed);
    if opts.quick_acceptance {
        checks.extend(quick_acceptance(opts.workers, opts.seed));
    }
    Report::from_checks(checks)
}

/// `E{cos ψ} = e^{-σ²_ψ/2}` within 0.3% over 10⁶ draws at σ²_ψ = 0.1.
pub fn check_characteristic_function(sampler: &PhaseSampler, seed: u64) -> Check {
    let cfg = PnConfig::from_total(0.1).expect("valid");
    let n = 1_000_000;
    let mut rng = derive_stream_rng(seed, 0, 1);
    let mut cos_sum = 0.0;
    let mut sq_sum = 0.0;
    for _ in 0..n {
        let psi = sampler(&cfg, &mut rng);
        cos_sum += psi.cos();
        sq_sum += psi * psi;
    }
    let cf = cos_sum / n as f64;
    let target = (-0.05f64).exp();
    let var = sq_sum / n as f64;
    let rel = (cf / target - 1.0).abs();
    Check::new(
        "pn.characteristic_function",
        rel <= 3e-3 && (var / 0.1 - 1.0).abs() <= 0.01,
        format!("E cos psi = {cf:.6} vs {target:.6} (rel {rel:.2e}), var = {var:.5}"),
    )
}

fn check_channel_energy(seed: u64, workers: Option<usize>) -> Result<(bool, String)> {
    let p = ChannelParams::default();
    let n = 10_000u64;
    let sum: f64 = make_pool(workers)?.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = derive_stream_rng(seed, i, 2);
                generate_channel(&p, &mut rng).map(|h| frobenius(&h.h).powi(2))
            })
            .collect::<Result<Vec<_>>>()
    })?
    .iter()
    .sum();
    let ratio = sum / n as f64 / (p.n_tx * p.n_rx) as f64;
    Ok(((ratio - 1.0).abs() <= 0.02, format!("E||H||^2 / (Nt Nr) = {ratio:.4} over {n}")))
}

fn check_precoders(seed: u64) -> Result<(Check, Check)> {
    let p = ChannelParams::default();
    let opts = AltMinOptions::default();
    let mut worst_isi: f64 = 0.0;
    let mut monotone = true;
    let mut iters = 0;
    for i in 0..20 {
        let h = generate_channel(&p, &mut derive_stream_rng(seed, i, 3))?.h;
        let d = design_hybrid(&h, 4, 4, &opts)?;
        d.precoders.check_invariants()?;
        let ps = &d.precoders;
        let g = ps.combiner() * &h * &ps.f_rf * &ps.f_bb;
        let diag_min = (0..4).map(|k| g[(k, k)].norm()).fold(f64::INFINITY, f64::min);
        for r in 0..4 {
            for c in 0..4 {
                if r != c {
                    worst_isi = worst_isi.max(g[(r, c)].norm() / diag_min);
                }
            }
        }
        let run = pe_altmin(&d.fdp.f_opt, 4, &opts)?;
        iters += run.objective.len();
        monotone &= run.objective.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    }
    Ok((
        Check::new(
            "precoding.isi",
            worst_isi <= 1e-9,
            format!("max |off-diagonal| / min |diagonal| = {worst_isi:.2e} over 20 channels"),
        ),
        Check::new(
            "precoding.altmin_monotone",
            monotone,
            format!("{iters} PE-AltMin iterations over 20 channels"),
        ),
    ))
}

fn check_unit_energy() -> Result<(bool, String)> {
    let schemes = [
        Scheme::QAM4,
        Scheme::QAM16,
        Scheme::pqam(4, 1),
        Scheme::pqam(8, 2),
        Scheme::pqam(16, 1),
        Scheme::pqam(16, 2),
        Scheme::pqam(16, 4),
        Scheme::pqam(16, 8),
        Scheme::pqam(16, 16),
        Scheme::pqam(64, 8),
    ];
    let mut worst: f64 = 0.0;
    for s in schemes {
        worst = worst.max((s.build()?.mean_energy() - 1.0).abs());
    }
    Ok((worst <= 1e-12, format!("max |E_s - 1| = {worst:.1e}")))
}

/// Spacings measured on the built 16-QAM constellation against the closed forms.
fn check_qam16_spacings() -> Result<(bool, String)> {
    let c = Scheme::QAM16.build()?;
    let g = &c.geometry;
    let mut radii: Vec<f64> = c.symbols.iter().map(|s| s.norm()).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let angles_on = |r: f64| {
        let mut a: Vec<f64> = c
            .symbols
            .iter()
            .filter(|s| (s.norm() - r).abs() < 1e-9)
            .map(|s| s.arg())
            .collect();
        a.sort_by(f64::total_cmp);
        a
    };
    let inner = angles_on(radii[0]);
    let middle = angles_on(radii[1]);
    // middle ring: gap across the real axis and gap across the diagonal
    let gaps: Vec<f64> = middle
        .iter()
        .zip(middle.iter().cycle().skip(1))
        .map(|(a, b)| wrap_angle(b - a).rem_euclid(std::f64::consts::TAU))
        .collect();
    let measured = [
        radii[1] - radii[0],
        radii[2] - radii[1],
        wrap_angle(inner[1] - inner[0]),
        gaps.iter().copied().fold(f64::INFINITY, f64::min),
        gaps.iter().copied().fold(0.0, f64::max),
    ];
    let expected = [
        g.delta_rho[0],
        g.delta_rho[1],
        g.delta_theta[0],
        g.delta_theta[1],
        g.delta_theta[2],
    ];
    let worst = measured
        .iter()
        .zip(&expected)
        .map(|(m, e)| (m - e).abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-12, format!("max deviation {worst:.1e}; measured {measured:?}")))
}

fn check_analytic_limits() -> Result<(bool, String)> {
    let base = AnalyticInputs {
        v_diag: vec![30.0, 21.0, 9.0, 4.0],
        rho: 0.1,
        xi: vec![36.0, 35.5, 37.0, 36.2],
        omega: 2.5,
        sigma2: 1e-3,
        sigma2_psi: 1e-12,
        n_pil: 0,
    };
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let r1 = rel(analytics::se_pn_lower_bound(&base)?, analytics::se_no_pn(&base)?);
    let hi = AnalyticInputs {
        sigma2: 1e-10,
        sigma2_psi: 0.1,
        ..base.clone()
    };
    let r2 = rel(analytics::se_pn_lower_bound(&hi)?, analytics::se_pn_high_snr(0.1, 4)?);
    let r3 = rel(analytics::ser_16qam_pn_stream(1e30, 0.1) / 4.0, analytics::ber_16qam_floor(0.1));
    let r4 = rel(
        analytics::ber_pqam_pn_stream(1e30, 0.1, 16, 4)?,
        analytics::ber_pqam_floor(0.1, 16, 4)?,
    );
    let (rp, b) = analytics::qam16_region_terms(1.0 / 40.0, 0.05);
    let r5 = rel((rp + b) / 16.0, analytics::ser_16qam_pn_stream(20.0, 0.05));
    let comp = AnalyticInputs { sigma2_psi: 0.07, ..base };
    let r6 = rel(analytics::se_pn_from_components(&comp)?, analytics::se_pn_lower_bound(&comp)?);
    let ok = r1 <= 1e-9 && r2 <= 1e-3 && r3 <= 1e-9 && r4 <= 1e-9 && r5 <= 1e-12 && r6 <= 1e-12;
    Ok((
        ok,
        format!(
            "bound->no-PN {r1:.1e}, bound->limit {r2:.1e}, 16-QAM floor {r3:.1e}, \
             PQAM floor {r4:.1e}, region sum {r5:.1e}, components {r6:.1e}"
        ),
    ))
}

fn tiny_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment_id: "worker-invariance".into(),
        channel: ChannelParams {
            n_tx: 32,
            n_rx: 16,
            ..ChannelParams::default()
        },
        pn: vec![PnConfig::from_total(0.1).expect("valid")],
        snr_db: vec![5.0, 25.0],
        schemes: vec![Scheme::QAM16],
        detectors: vec![DetectorKind::Euc, DetectorKind::Pm],
        n_channels: 150,
        n_symbols: 20,
        master_seed: seed,
        min_bit_errors: 300,
        ..ExperimentConfig::default()
    }
}

fn csv_bytes(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    montecarlo::results::write_rows(rows, &mut buf)?;
    Ok(buf)
}

fn check_worker_invariance(seed: u64) -> Result<(bool, String)> {
    let cfg = tiny_config(seed);
    let one = montecarlo::run_ber_sweep(&cfg, Some(1))?;
    let many = montecarlo::run_ber_sweep(&cfg, Some(4))?;
    let se1 = montecarlo::run_se_sweep(&cfg, Some(1))?;
    let se4 = montecarlo::run_se_sweep(&cfg, Some(3))?;
    let same = csv_bytes(&one.rows)? == csv_bytes(&many.rows)? && csv_bytes(&se1.rows)? == csv_bytes(&se4.rows)?;
    Ok((same, format!("{} BER rows, {} SE rows compared byte for byte", one.rows.len(), se1.rows.len())))
}

fn check_rng() -> (bool, String) {
    let draw = |r: u64, g: u64| {
        let mut rng = derive_stream_rng(7, r, g);
        (0..8).map(|_| rand::Rng::random::<u64>(&mut rng)).collect::<Vec<_>>()
    };
    let ok = draw(3, 4) == draw(3, 4) && draw(3, 4) != draw(4, 3) && draw(0, 0) != draw(0, 1);
    (ok, "same indices repeat, different indices differ".into())
}

pub fn property_checks(sampler: &PhaseSampler, workers: Option<usize>, seed: u64) -> Vec<Check> {
    let mut out = vec![check_characteristic_function(sampler, seed)];
    out.push(Check::from_result("channel.mean_energy", check_channel_energy(seed, workers)));
    match check_precoders(seed) {
        Ok((isi, mono)) => out.extend([isi, mono]),
        Err(e) => {
            out.push(Check::new("precoding.isi", false, format!("error: {e}")));
            out.push(Check::new("precoding.altmin_monotone", false, format!("error: {e}")));
        }
    }
    out.push(Check::from_result("modulation.unit_energy", check_unit_energy()));
    out.push(Check::from_result("modulation.qam16_polar_spacings", check_qam16_spacings()));
    out.push(Check::from_result("analytics.limits", check_analytic_limits()));
    let (ok, d) = check_rng();
    out.push(Check::new("rng.determinism", ok, d));
    out.push(Check::from_result("montecarlo.worker_invariance", check_worker_invariance(seed)));
    out
}

fn point<'a>(rows: &'a [ResultRow], series: &str, s2: f64, det: Option<&str>, m: &str) -> Option<&'a ResultRow> {
    rows.iter().find(|r| {
        r.series == series
            && r.sigma2_psi == s2
            && r.modulation.as_deref() == Some(m)
            && (det.is_none() || r.detector.as_deref() == det)
    })
}

/// Acceptance checks on 400 channels; the full-scale versions live in the
/// crate's acceptance test target.
pub fn quick_acceptance(workers: Option<usize>, seed: u64) -> Vec<Check> {
    match quick_acceptance_inner(workers, seed) {
        Ok(c) => c,
        Err(e) => vec![Check::new("acceptance.quick", false, format!("error: {e}"))],
    }
}

fn quick_acceptance_inner(workers: Option<usize>, seed: u64) -> Result<Vec<Check>> {
    let strong = PnConfig::from_total(0.1)?;
    let medium = PnConfig::from_total(0.01)?;
    let cfg = ExperimentConfig {
        experiment_id: "quick".into(),
        pn: vec![PnConfig::from_total(0.0)?, strong, medium],
        snr_db: vec![40.0],
        schemes: vec![Scheme::QAM4, Scheme::QAM16],
        detectors: vec![DetectorKind::Euc, DetectorKind::Pm],
        n_channels: 400,
        n_symbols: 100,
        master_seed: seed,
        min_bit_errors: 0,
        ..ExperimentConfig::default()
    };
    let mut bank = RealizationBank::build(&cfg, workers)?;
    let mut out = Vec::new();

    let se = montecarlo::run_se_sweep_with_bank(&cfg, &mut bank, workers)?;
    let se_of = |series: &str, s2: f64| {
        se.rows
            .iter()
            .find(|r| r.series == series && r.sigma2_psi == s2 && r.source == Source::Montecarlo)
            .and_then(|r| r.se_bps_hz)
            .unwrap_or(f64::NAN)
    };
    for (name, s2, target) in [("acceptance.se_floor_strong", 0.1, 13.574), ("acceptance.se_floor_medium", 0.01, 26.60)] {
        let v = se_of("hp_pn_bound", s2);
        out.push(Check::new(name, (v / target - 1.0).abs() <= 0.02, format!("{v:.4} vs {target}")));
    }
    let mut worst: f64 = 0.0;
    for r in &bank.realizations {
        let inputs = r.analytic_inputs(r.sigma2(1e4), 0.0, 0);
        let a = analytics::se_pn_lower_bound(&inputs)?;
        let b = analytics::se_no_pn(&inputs)?;
        worst = worst.max((a - b).abs() / b);
    }
    let (hp, fdp) = (se_of("hp_no_pn", 0.0), se_of("fdp", 0.0));
    out.push(Check::new(
        "acceptance.se_consistency",
        worst <= 1e-9 && hp >= 0.9 * fdp,
        format!("bound vs no-PN max rel {worst:.1e}; at 40 dB HP {hp:.3} vs FDP {fdp:.3}"),
    ));

    let ber_cfg = ExperimentConfig {
        pn: vec![strong],
        ..cfg.clone()
    };
    let ber = montecarlo::run_ber_sweep_with_bank(&ber_cfg, &mut bank, workers)?;
    for (name, m, det, target) in [
        ("acceptance.floor_4qam_euc", "4-QAM", "EUC-D", 6.50e-3),
        ("acceptance.floor_16qam_pm", "16-QAM", "PM-D", 4.03e-2),
    ] {
        let r = point(&ber.rows, "simulated", 0.1, Some(det), m);
        let (v, e) = r.map_or((f64::NAN, 0), |r| (r.ber.unwrap_or(f64::NAN), r.bit_errors.unwrap_or(0)));
        out.push(Check::new(
            name,
            (v / target - 1.0).abs() <= 0.2 && e >= 500,
            format!("BER {v:.4e} ({e} errors) vs {target:.2e}"),
        ));
    }
    let pm = point(&ber.rows, "simulated", 0.1, Some("PM-D"), "16-QAM").and_then(|r| r.ber);
    let euc = point(&ber.rows, "simulated", 0.1, Some("EUC-D"), "16-QAM").and_then(|r| r.ber);
    out.push(Check::new(
        "acceptance.detector_ordering",
        matches!((pm, euc), (Some(a), Some(b)) if a <= b),
        format!("16-QAM at 40 dB, strong: PM-D {pm:?} vs EUC-D {euc:?}"),
    ));
    Ok(out)
}

/// Phase sampler with the receive variance entering with the wrong sign;
/// used to show the suite catches it.
pub fn faulty_sampler(cfg: &PnConfig, rng: &mut StreamRng) -> f64 {
    let var = (cfg.sigma2_tx - cfg.sigma2_rx).abs();
    let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
    z * var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_sampler_passes() {
        assert!(check_characteristic_function(&reference_sampler, 1).passed);
    }

    #[test]
    fn sign_fault_is_caught_by_name() {
        let c = check_characteristic_function(&faulty_sampler, 1);
        assert!(!c.passed);
        assert_eq!(c.name, "pn.characteristic_function");
    }

    #[test]
    fn spacing_and_energy_checks_pass() {
        assert!(check_qam16_spacings().unwrap().0, "{:?}", check_qam16_spacings());
        assert!(check_unit_energy().unwrap().0);
        assert!(check_analytic_limits().unwrap().0, "{:?}", check_analytic_limits());
    }
}
