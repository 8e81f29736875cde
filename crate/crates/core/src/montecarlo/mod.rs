//! Seeded BER and spectral-efficiency sweeps.
//!
//! Channel realisations and their precoders depend only on the master seed and
//! the realisation index, so they are computed once into a [`RealizationBank`]
//! and shared by every grid point. Each `(realisation, grid point)` pair then
//! draws symbols, phase noise and thermal noise from its own stream, and
//! realisations are reduced in index order. Results therefore do not depend on
//! the number of worker threads.
//!
//! Thermal noise is drawn directly in the stream domain: the combined noise
//! `U_BB^H W_RF^H n` with `n ~ CN(0, σ² I)` has covariance `σ² C C^H`, which is
//! sampled as `σ L z` with `L` the Cholesky factor of `C C^H`.

pub mod results;
pub mod rng;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, AnalyticInputs};
use crate::channel::{complex_gaussian, generate_channel, ChannelMatrix, ChannelParams};
use crate::detection::{detect, DetectorConfig, DetectorKind};
use crate::linalg::{psd_factor, CMatrix};
use crate::modulation::{Constellation, Scheme, SchemeKind};
use crate::phasenoise::{compensate, estimate_pn, sample_phase_pair, PnConfig};
use crate::precoding::{design_hybrid, noise_shaping, omega, AltMinOptions, HybridDesign};
use crate::{Error, Result, C64};

pub use results::{Deviation, ResultRow, Source, SweepResult};
use rng::{derive_stream_rng, CHANNEL_DOMAIN};

/// Realisations processed between early-stop checks.
pub const BLOCK: usize = 64;

const MAX_RESAMPLES: u64 = 16;

/// Symbol transmitted on every pilot stream.
pub const PILOT_SYMBOL: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub channel: ChannelParams,
    pub pn: Vec<PnConfig>,
    pub snr_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub detectors: Vec<DetectorKind>,
    pub n_s: usize,
    pub n_rf: usize,
    /// Leading streams carrying pilots; 0 disables compensation.
    pub n_pil: usize,
    pub n_channels: usize,
    pub n_symbols: usize,
    pub master_seed: u64,
    /// Stop a grid point once every detector has this many bit errors; 0 never stops early.
    pub min_bit_errors: u64,
    pub altmin: AltMinOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment_id: "experiment".into(),
            channel: ChannelParams::default(),
            pn: vec![PnConfig::from_total(0.1).expect("valid")],
            snr_db: (0..=20).map(|i| -10.0 + 2.5 * i as f64).collect(),
            schemes: vec![Scheme::QAM16],
            detectors: vec![DetectorKind::Euc],
            n_s: 4,
            n_rf: 4,
            n_pil: 0,
            n_channels: 10_000,
            n_symbols: 100,
            master_seed: 1,
            min_bit_errors: 200,
            altmin: AltMinOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_s == 0 {
            return bad("n_s must be >= 1".into());
        }
        if self.n_rf < self.n_s {
            return bad(format!("n_rf = {} must be >= n_s = {}", self.n_rf, self.n_s));
        }
        if self.n_rf > self.channel.n_tx.min(self.channel.n_rx) {
            return bad(format!("n_rf = {} exceeds the array sizes", self.n_rf));
        }
        if self.n_pil >= self.n_s {
            return bad(format!("n_pil = {} must be < n_s = {}", self.n_pil, self.n_s));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db must be a non-empty list of finite values".into());
        }
        if self.pn.is_empty() {
            return bad("pn must list at least one phase-noise setting".into());
        }
        for p in &self.pn {
            if !(p.sigma2_tx >= 0.0 && p.sigma2_rx >= 0.0 && p.sigma2_psi().is_finite()) {
                return bad(format!("invalid phase-noise variances {p:?}"));
            }
        }
        for s in &self.schemes {
            s.build()?;
        }
        if self.n_channels == 0 || self.n_symbols == 0 {
            return bad("n_channels and n_symbols must be >= 1".into());
        }
        Ok(())
    }

    pub fn data_streams(&self) -> usize {
        self.n_s - self.n_pil
    }
}

/// Everything a sweep needs from one channel realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub rho: f64,
    pub v_diag: Vec<f64>,
    pub xi: Vec<f64>,
    pub omega: f64,
    /// Lower-triangular factor of the combined-noise covariance `C C^H`.
    pub noise_factor: CMatrix,
    /// Leading singular values of the channel (fully digital stream gains).
    pub fdp_singular: Vec<f64>,
    /// Channel draws rejected before this one was accepted.
    pub resamples: u64,
}

impl Realization {
    /// Thermal noise variance putting the receive-antenna SNR at `snr_rx`.
    pub fn sigma2(&self, snr_rx: f64) -> f64 {
        self.rho * self.rho * self.omega / snr_rx
    }

    pub fn analytic_inputs(&self, sigma2: f64, sigma2_psi: f64, n_pil: usize) -> AnalyticInputs {
        AnalyticInputs {
            v_diag: self.v_diag.clone(),
            rho: self.rho,
            xi: self.xi.clone(),
            omega: self.omega,
            sigma2,
            sigma2_psi,
            n_pil,
        }
    }

    /// Fully digital rate with equal power per stream and the same thermal noise.
    pub fn fdp_rate(&self, sigma2: f64, n_pil: usize) -> f64 {
        let beta: Vec<f64> = self.fdp_singular[n_pil..].iter().map(|s| s * s / sigma2).collect();
        analytics::sum_rate(&beta)
    }
}

/// Channel `index` of a seeded sequence with its hybrid design; degenerate
/// draws are replaced by the next attempt. Returns the number of rejected draws.
pub fn draw_design(
    params: &ChannelParams,
    n_s: usize,
    n_rf: usize,
    altmin: &AltMinOptions,
    master_seed: u64,
    index: u64,
) -> Result<(ChannelMatrix, HybridDesign, Realization)> {
    let mut last_err = None;
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = derive_stream_rng(master_seed, index, CHANNEL_DOMAIN - attempt);
        let ch = generate_channel(params, &mut rng)?;
        match design_realization(&ch.h, n_s, n_rf, altmin) {
            Ok((design, mut r)) => {
                r.resamples = attempt;
                return Ok((ch, design, r));
            }
            Err(e @ (Error::NumericalDegeneracy(_) | Error::DegeneratePrecoder)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::DegeneratePrecoder))
}

pub fn build_realization(
    params: &ChannelParams,
    n_s: usize,
    n_rf: usize,
    altmin: &AltMinOptions,
    master_seed: u64,
    index: u64,
) -> Result<Realization> {
    draw_design(params, n_s, n_rf, altmin, master_seed, index).map(|(_, _, r)| r)
}

/// Precoders and stream quantities of a given channel matrix.
pub fn realization_from_channel(
    h: &CMatrix,
    n_s: usize,
    n_rf: usize,
    altmin: &AltMinOptions,
) -> Result<Realization> {
    design_realization(h, n_s, n_rf, altmin).map(|(_, r)| r)
}

fn design_realization(
    h: &CMatrix,
    n_s: usize,
    n_rf: usize,
    altmin: &AltMinOptions,
) -> Result<(HybridDesign, Realization)> {
    let design = design_hybrid(h, n_s, n_rf, altmin)?;
    let real = realization_from_design(h, &design)?;
    Ok((design, real))
}

/// Stream quantities of an existing design; rejects vanishing stream gains.
pub fn realization_from_design(h: &CMatrix, design: &HybridDesign) -> Result<Realization> {
    let p = &design.precoders;
    let v0 = p.v_diag.first().copied().unwrap_or(0.0);
    let vmin = p.v_diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !v0.is_finite() || !(vmin > 1e-12 * v0) || !p.rho.is_finite() {
        return Err(Error::NumericalDegeneracy(format!(
            "smallest stream gain {vmin:e} against leading {v0:e}"
        )));
    }
    let xi = noise_shaping(p)?;
    let c = p.combiner();
    let noise_factor = psd_factor(&(&c * c.adjoint()))?;
    Ok(Realization {
        rho: p.rho,
        v_diag: p.v_diag.clone(),
        xi,
        omega: omega(h, &p.f_rf),
        noise_factor,
        fdp_singular: design.fdp.singular_values[..p.n_s()].to_vec(),
        resamples: 0,
    })
}

/// Realisations `0..n` of one channel/precoder setting, in index order.
#[derive(Debug, Clone)]
pub struct RealizationBank {
    pub channel: ChannelParams,
    pub n_s: usize,
    pub n_rf: usize,
    pub master_seed: u64,
    pub altmin: AltMinOptions,
    pub realizations: Vec<Realization>,
}

impl RealizationBank {
    /// Empty bank for the realisations `cfg` draws; filled on demand.
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            channel: cfg.channel,
            n_s: cfg.n_s,
            n_rf: cfg.n_rf,
            master_seed: cfg.master_seed,
            altmin: cfg.altmin,
            realizations: Vec::new(),
        })
    }

    pub fn build(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Self> {
        let mut bank = Self::new(cfg)?;
        bank.ensure(cfg.n_channels, &make_pool(workers)?)?;
        Ok(bank)
    }

    /// Designs realisations up to index `n - 1` if not present yet.
    pub fn ensure(&mut self, n: usize, pool: &rayon::ThreadPool) -> Result<()> {
        let have = self.realizations.len();
        if n <= have {
            return Ok(());
        }
        let fresh = pool.install(|| {
            (have as u64..n as u64)
                .into_par_iter()
                .map(|i| build_realization(&self.channel, self.n_s, self.n_rf, &self.altmin, self.master_seed, i))
                .collect::<Result<Vec<_>>>()
        })?;
        self.realizations.extend(fresh);
        Ok(())
    }

    /// Whether this bank holds (or would draw) the realisations of `cfg`.
    pub fn matches(&self, cfg: &ExperimentConfig) -> bool {
        self.channel == cfg.channel
            && self.n_s == cfg.n_s
            && self.n_rf == cfg.n_rf
            && self.master_seed == cfg.master_seed
            && self.altmin == cfg.altmin
    }

    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        if self.matches(cfg) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("realisation bank does not match the experiment".into()))
        }
    }

    pub fn resampled(&self, n: usize) -> u64 {
        self.realizations[..n.min(self.realizations.len())]
            .iter()
            .map(|r| r.resamples)
            .sum()
    }
}

/// Thread pool with `workers` threads, or rayon's default size.
pub fn make_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n.max(1));
    }
    b.build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Bit-error tally of one detector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub bit_errors: u64,
    pub bits_sent: u64,
}

/// Outcome of one realisation at one grid point.
#[derive(Debug, Clone, PartialEq)]
struct PointSample {
    tallies: Vec<Tally>,
    analytic_ber: f64,
}

struct PointSpec<'a> {
    grid_index: u64,
    snr_rx: f64,
    pn: &'a PnConfig,
    constellation: &'a Constellation,
    detectors: &'a [DetectorKind],
}

fn simulate_point(
    cfg: &ExperimentConfig,
    real: &Realization,
    index: u64,
    spec: &PointSpec<'_>,
) -> Result<PointSample> {
    let n_s = cfg.n_s;
    let sigma2 = real.sigma2(spec.snr_rx);
    let sigma = sigma2.sqrt();
    let sigma2_psi = spec.pn.sigma2_psi();
    // Residual phase noise seen by the detector after pilot compensation is treated as zero.
    let detector_psi = if cfg.n_pil > 0 { 0.0 } else { sigma2_psi };
    let inputs = real.analytic_inputs(sigma2, detector_psi, cfg.n_pil);
    let beta = inputs.beta();
    let configs: Vec<Vec<DetectorConfig>> = spec
        .detectors
        .iter()
        .map(|&d| {
            beta.iter()
                .map(|&b| DetectorConfig::for_stream(d, detector_psi, b))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let analytic_ber = analytics::semi_analytic_ber(&spec.constellation.scheme, &inputs)?;

    let c = spec.constellation;
    let m = c.order();
    let bps = c.bits_per_symbol as u64;
    let pilot_streams: Vec<usize> = (0..cfg.n_pil).collect();
    let pilots = vec![PILOT_SYMBOL; cfg.n_pil];
    let gains: Vec<f64> = real.v_diag.iter().map(|v| real.rho * v).collect();
    let mut rng = derive_stream_rng(cfg.master_seed, index, spec.grid_index);
    let mut tallies = vec![Tally::default(); spec.detectors.len()];
    let mut tx = vec![0usize; n_s];
    let mut z = vec![C64::new(0.0, 0.0); n_s];
    let mut r = vec![C64::new(0.0, 0.0); n_s];
    let bits_per_slot = bps * cfg.data_streams() as u64;
    for _ in 0..cfg.n_symbols {
        let (phi_tx, phi_rx) = sample_phase_pair(spec.pn, &mut rng);
        let rot_sig = C64::from_polar(1.0, phi_tx + phi_rx);
        let rot_noise = C64::from_polar(1.0, phi_rx);
        for t in tx.iter_mut().skip(cfg.n_pil) {
            *t = rng.random_range(0..m);
        }
        for zk in z.iter_mut() {
            *zk = complex_gaussian(&mut rng);
        }
        for k in 0..n_s {
            let s = if k < cfg.n_pil { PILOT_SYMBOL } else { c.symbols[tx[k]] };
            let mut n = C64::new(0.0, 0.0);
            for (j, zj) in z.iter().enumerate().take(k + 1) {
                n += real.noise_factor[(k, j)] * zj;
            }
            r[k] = rot_sig * s * gains[k] + rot_noise * n * sigma;
        }
        if cfg.n_pil > 0 {
            let psi_hat = estimate_pn(&pilot_streams, &r, &pilots, &real.v_diag, real.rho)?;
            compensate(&mut r, psi_hat);
        }
        for (t, dcfg) in tallies.iter_mut().zip(&configs) {
            for k in cfg.n_pil..n_s {
                let y = r[k] / gains[k];
                let got = detect(y, c, &dcfg[k]);
                t.bit_errors += ((got ^ tx[k]) as u64).count_ones() as u64;
            }
            t.bits_sent += bits_per_slot;
        }
    }
    Ok(PointSample { tallies, analytic_ber })
}

/// Monte Carlo BER over every `(pn, scheme, snr)` point and detector, plus the
/// semi-analytical prediction averaged over the same realisations and the
/// closed-form error floors.
pub fn run_ber_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepResult> {
    run_ber_sweep_with_bank(cfg, &mut RealizationBank::new(cfg)?, workers)
}

/// As [`run_ber_sweep`], drawing realisations from (and adding them to) `bank`.
pub fn run_ber_sweep_with_bank(
    cfg: &ExperimentConfig,
    bank: &mut RealizationBank,
    workers: Option<usize>,
) -> Result<SweepResult> {
    cfg.validate()?;
    bank.check(cfg)?;
    if cfg.detectors.is_empty() {
        return Err(Error::InvalidParameter("detectors must not be empty".into()));
    }
    let pool = make_pool(workers)?;
    let mut out = SweepResult::new(cfg);
    let mut max_used = 0;
    let constellations: Vec<Constellation> =
        cfg.schemes.iter().map(|s| s.build()).collect::<Result<_>>()?;
    let n_snr = cfg.snr_db.len() as u64;
    let n_sch = cfg.schemes.len() as u64;
    for (pi, pn) in cfg.pn.iter().enumerate() {
        for (si, c) in constellations.iter().enumerate() {
            for (gi, &snr_db) in cfg.snr_db.iter().enumerate() {
                let spec = PointSpec {
                    grid_index: (pi as u64 * n_sch + si as u64) * n_snr + gi as u64,
                    snr_rx: db_to_linear(snr_db),
                    pn,
                    constellation: c,
                    detectors: &cfg.detectors,
                };
                let mut tallies = vec![Tally::default(); cfg.detectors.len()];
                let mut analytic_sum = 0.0;
                let mut used = 0usize;
                for start in (0..cfg.n_channels).step_by(BLOCK) {
                    let end = (start + BLOCK).min(cfg.n_channels);
                    bank.ensure(end, &pool)?;
                    let reals = &bank.realizations;
                    let block = pool.install(|| {
                        (start..end)
                            .into_par_iter()
                            .map(|i| simulate_point(cfg, &reals[i], i as u64, &spec))
                            .collect::<Result<Vec<_>>>()
                    })?;
                    for s in block {
                        for (t, u) in tallies.iter_mut().zip(&s.tallies) {
                            t.bit_errors += u.bit_errors;
                            t.bits_sent += u.bits_sent;
                        }
                        analytic_sum += s.analytic_ber;
                    }
                    used = end;
                    max_used = max_used.max(used);
                    if cfg.min_bit_errors > 0 && tallies.iter().all(|t| t.bit_errors >= cfg.min_bit_errors) {
                        break;
                    }
                }
                for (d, t) in cfg.detectors.iter().zip(&tallies) {
                    out.rows.push(ResultRow::ber_point(cfg, pn, &c.scheme, *d, snr_db, *t, used));
                }
                let model = analytic_detector(&c.scheme, pn, cfg.n_pil);
                out.rows.push(ResultRow::analytic_ber(
                    cfg,
                    pn,
                    &c.scheme,
                    model,
                    snr_db,
                    analytic_sum / used as f64,
                    used,
                    "semi_analytic",
                ));
                if cfg.n_pil == 0 && pn.sigma2_psi() > 0.0 {
                    if let Some(f) = analytics::ber_floor(&c.scheme, pn.sigma2_psi()) {
                        out.rows.push(ResultRow::analytic_ber(
                            cfg, pn, &c.scheme, model, snr_db, f, 0, "floor",
                        ));
                    }
                }
            }
        }
    }
    out.resampled_channels = bank.resampled(max_used);
    out.flag_deviations();
    Ok(out)
}

/// Detector whose decision regions the semi-analytical expression models.
pub fn analytic_detector(scheme: &Scheme, pn: &PnConfig, n_pil: usize) -> DetectorKind {
    if n_pil > 0 || pn.sigma2_psi() == 0.0 || (scheme.kind == SchemeKind::Qam && scheme.order == 4) {
        DetectorKind::Euc
    } else {
        DetectorKind::Pm
    }
}

/// Per-realisation rates at one `(pn, snr)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    /// Rate without phase noise over all streams.
    pub hp_no_pn: f64,
    /// Phase-noise lower bound over all streams.
    pub hp_pn_bound: f64,
    /// Rate of the data streams once pilots remove the phase noise.
    pub hp_pilot: f64,
    pub fdp: f64,
}

pub fn rate_sample(real: &Realization, snr_rx: f64, sigma2_psi: f64, n_pil: usize) -> Result<RateSample> {
    let sigma2 = real.sigma2(snr_rx);
    let all = real.analytic_inputs(sigma2, sigma2_psi, 0);
    let no_pn = real.analytic_inputs(sigma2, 0.0, 0);
    let pilot = real.analytic_inputs(sigma2, 0.0, n_pil);
    Ok(RateSample {
        hp_no_pn: analytics::se_no_pn(&no_pn)?,
        hp_pn_bound: analytics::se_pn_lower_bound(&all)?,
        hp_pilot: analytics::se_no_pn(&pilot)?,
        fdp: real.fdp_rate(sigma2, 0),
    })
}

/// Channel-averaged spectral efficiency per `(pn, snr)` point.
pub fn run_se_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepResult> {
    run_se_sweep_with_bank(cfg, &mut RealizationBank::new(cfg)?, workers)
}

pub fn run_se_sweep_with_bank(
    cfg: &ExperimentConfig,
    bank: &mut RealizationBank,
    workers: Option<usize>,
) -> Result<SweepResult> {
    cfg.validate()?;
    bank.check(cfg)?;
    let pool = make_pool(workers)?;
    bank.ensure(cfg.n_channels, &pool)?;
    let reals = &bank.realizations[..cfg.n_channels];
    let mut out = SweepResult::new(cfg);
    out.resampled_channels = bank.resampled(cfg.n_channels);
    for pn in &cfg.pn {
        let s2 = pn.sigma2_psi();
        for &snr_db in &cfg.snr_db {
            let snr = db_to_linear(snr_db);
            let samples = pool.install(|| {
                reals
                    .par_iter()
                    .map(|r| rate_sample(r, snr, s2, cfg.n_pil))
                    .collect::<Result<Vec<_>>>()
            })?;
            out.hp_above_fdp += samples.iter().filter(|s| s.hp_no_pn > s.fdp).count() as u64;
            push_rate_rows(&mut out, cfg, pn, snr_db, &samples, Source::Montecarlo)?;
        }
    }
    Ok(out)
}

/// Channel-averaged analytic curves over given realisations, with no symbol
/// simulation: semi-analytical BER and floors per `(pn, scheme, snr)` and the
/// rate series per `(pn, snr)`. Every row has `source = analytic`.
pub fn analytic_sweep(cfg: &ExperimentConfig, reals: &[Realization]) -> Result<SweepResult> {
    if reals.is_empty() {
        return Err(Error::InvalidParameter("no realisations to average over".into()));
    }
    if let Some(r) = reals.iter().find(|r| r.v_diag.len() != cfg.n_s) {
        return Err(Error::DimensionMismatch(format!(
            "realisation has {} streams, config n_s = {}",
            r.v_diag.len(),
            cfg.n_s
        )));
    }
    let n = reals.len() as f64;
    let mut out = SweepResult::new(cfg);
    out.resampled_channels = reals.iter().map(|r| r.resamples).sum();
    for pn in &cfg.pn {
        let s2 = pn.sigma2_psi();
        let detector_psi = if cfg.n_pil > 0 { 0.0 } else { s2 };
        for scheme in &cfg.schemes {
            let model = analytic_detector(scheme, pn, cfg.n_pil);
            for &snr_db in &cfg.snr_db {
                let snr = db_to_linear(snr_db);
                let mut sum = 0.0;
                for r in reals {
                    let inputs = r.analytic_inputs(r.sigma2(snr), detector_psi, cfg.n_pil);
                    sum += analytics::semi_analytic_ber(scheme, &inputs)?;
                }
                out.rows.push(ResultRow::analytic_ber(
                    cfg, pn, scheme, model, snr_db, sum / n, reals.len(), "semi_analytic",
                ));
                if cfg.n_pil == 0 && s2 > 0.0 {
                    if let Some(f) = analytics::ber_floor(scheme, s2) {
                        out.rows.push(ResultRow::analytic_ber(cfg, pn, scheme, model, snr_db, f, 0, "floor"));
                    }
                }
            }
        }
        for &snr_db in &cfg.snr_db {
            let snr = db_to_linear(snr_db);
            let samples = reals
                .iter()
                .map(|r| rate_sample(r, snr, s2, cfg.n_pil))
                .collect::<Result<Vec<_>>>()?;
            out.hp_above_fdp += samples.iter().filter(|s| s.hp_no_pn > s.fdp).count() as u64;
            push_rate_rows(&mut out, cfg, pn, snr_db, &samples, Source::Analytic)?;
        }
    }
    Ok(out)
}

fn push_rate_rows(
    out: &mut SweepResult,
    cfg: &ExperimentConfig,
    pn: &PnConfig,
    snr_db: f64,
    samples: &[RateSample],
    source: Source,
) -> Result<()> {
    let n = samples.len() as f64;
    let mean = |f: fn(&RateSample) -> f64| samples.iter().map(f).sum::<f64>() / n;
    let mut series = vec![
        ("hp_no_pn", mean(|s| s.hp_no_pn)),
        ("hp_pn_bound", mean(|s| s.hp_pn_bound)),
    ];
    if cfg.n_pil > 0 {
        series.push(("hp_pilot", mean(|s| s.hp_pilot)));
    }
    series.push(("fdp", mean(|s| s.fdp)));
    for (name, v) in series {
        out.rows.push(ResultRow::se_point(cfg, pn, snr_db, v, samples.len(), source, name));
    }
    let s2 = pn.sigma2_psi();
    if s2 > 0.0 {
        let limit = analytics::se_pn_high_snr(s2, cfg.n_s)?;
        out.rows.push(ResultRow::se_point(cfg, pn, snr_db, limit, 0, Source::Analytic, "high_snr_limit"));
    }
    Ok(())
}

/// One received, normalised sample `r̃_k` with the transmitted label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub tx_index: usize,
    pub rx: C64,
}

/// Received constellation of data stream `stream` over `n_symbols` slots of
/// realisation 0, without compensation.
pub fn received_scatter(
    cfg: &ExperimentConfig,
    scheme: &Scheme,
    pn: &PnConfig,
    snr_db: f64,
    stream: usize,
) -> Result<Vec<ScatterPoint>> {
    cfg.validate()?;
    if stream >= cfg.n_s {
        return Err(Error::InvalidParameter(format!("stream {stream} >= n_s = {}", cfg.n_s)));
    }
    let real = build_realization(&cfg.channel, cfg.n_s, cfg.n_rf, &cfg.altmin, cfg.master_seed, 0)?;
    scatter_from_realization(&real, cfg.n_symbols, cfg.master_seed, scheme, pn, snr_db, stream)
}

pub fn scatter_from_realization(
    real: &Realization,
    n_symbols: usize,
    seed: u64,
    scheme: &Scheme,
    pn: &PnConfig,
    snr_db: f64,
    stream: usize,
) -> Result<Vec<ScatterPoint>> {
    let c = scheme.build()?;
    let n_s = real.v_diag.len();
    let sigma = real.sigma2(db_to_linear(snr_db)).sqrt();
    let gain = real.rho * real.v_diag[stream];
    let mut rng = derive_stream_rng(seed, 0, CHANNEL_DOMAIN - MAX_RESAMPLES);
    let mut out = Vec::with_capacity(n_symbols);
    let mut z = vec![C64::new(0.0, 0.0); n_s];
    for _ in 0..n_symbols {
        let (phi_tx, phi_rx) = sample_phase_pair(pn, &mut rng);
        let tx_index = rng.random_range(0..c.order());
        for zk in z.iter_mut() {
            *zk = complex_gaussian(&mut rng);
        }
        let mut n = C64::new(0.0, 0.0);
        for (j, zj) in z.iter().enumerate().take(stream + 1) {
            n += real.noise_factor[(stream, j)] * zj;
        }
        let r = C64::from_polar(1.0, phi_tx + phi_rx) * c.symbols[tx_index] * gain
            + C64::from_polar(1.0, phi_rx) * n * sigma;
        out.push(ScatterPoint { tx_index, rx: r / gain });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            channel: ChannelParams {
                n_tx: 32,
                n_rx: 16,
                ..ChannelParams::default()
            },
            n_channels: 40,
            n_symbols: 20,
            snr_db: vec![0.0, 20.0],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(small_cfg().validate().is_ok());
        let mut c = small_cfg();
        c.n_pil = 4;
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.n_rf = 3;
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.snr_db.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn stream_noise_factor_reproduces_covariance() {
        let cfg = small_cfg();
        let real = build_realization(&cfg.channel, 4, 4, &cfg.altmin, 3, 0).unwrap();
        let l = &real.noise_factor;
        let cov = l * l.adjoint();
        for k in 0..4 {
            assert!((cov[(k, k)].re - real.xi[k]).abs() < 1e-9 * real.xi[k]);
            for j in 0..k {
                assert_eq!(l[(j, k)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn ber_sweep_bookkeeping() {
        let mut cfg = small_cfg();
        cfg.n_channels = 200;
        let res = run_ber_sweep(&cfg, Some(2)).unwrap();
        let mc: Vec<_> = res.rows.iter().filter(|r| r.source == Source::Montecarlo).collect();
        assert_eq!(mc.len(), 2);
        for r in &mc {
            let (e, n) = (r.bit_errors.unwrap(), r.bits_sent.unwrap());
            assert_eq!(r.ber.unwrap(), e as f64 / n as f64);
            assert_eq!(n % (4 * 4) as u64, 0);
        }
        // the low SNR point stops after one block
        assert_eq!(mc[0].n_channels, BLOCK);
        assert!(mc[0].bit_errors.unwrap() >= 200);
    }

    #[test]
    fn se_sweep_rows() {
        let mut cfg = small_cfg();
        cfg.pn = vec![PnConfig::from_total(0.0).unwrap()];
        let res = run_se_sweep(&cfg, Some(1)).unwrap();
        let get = |s: &str, snr: f64| {
            res.rows
                .iter()
                .find(|r| r.series == s && r.snr_db == snr)
                .and_then(|r| r.se_bps_hz)
                .unwrap()
        };
        for snr in [0.0, 20.0] {
            assert!((get("hp_no_pn", snr) - get("hp_pn_bound", snr)).abs() < 1e-9 * get("hp_no_pn", snr));
        }
        assert!(res.rows.iter().all(|r| r.series != "high_snr_limit"));
    }

    #[test]
    fn scatter_is_centred_on_the_constellation() {
        let mut cfg = small_cfg();
        cfg.n_symbols = 500;
        let pts = received_scatter(&cfg, &Scheme::QAM16, &PnConfig::from_total(0.0).unwrap(), 60.0, 0).unwrap();
        let c = Scheme::QAM16.build().unwrap();
        assert_eq!(pts.len(), 500);
        for p in pts {
            assert!((p.rx - c.symbols[p.tx_index]).norm() < 0.01);
        }
    }
}
