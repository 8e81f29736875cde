//! Result rows, the CSV schema and the JSON provenance sidecar.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, Tally};
use crate::detection::DetectorKind;
use crate::modulation::Scheme;
use crate::phasenoise::PnConfig;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Montecarlo,
}

/// One grid point of one series. Columns that do not apply stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub source: Source,
    pub snr_db: f64,
    pub sigma2_psi: f64,
    pub modulation: Option<String>,
    pub shape_gamma: Option<usize>,
    pub detector: Option<String>,
    pub n_s: usize,
    pub n_rf: usize,
    pub n_pil: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub ber: Option<f64>,
    pub bit_errors: Option<u64>,
    pub bits_sent: Option<u64>,
    pub ci95: Option<f64>,
    pub se_bps_hz: Option<f64>,
    pub n_channels: usize,
    pub master_seed: u64,
    /// Curve the row belongs to, e.g. `simulated`, `semi_analytic`, `floor`, `fdp`.
    pub series: String,
}

/// Half-width of the normal-approximation binomial interval at quantile `z`.
pub fn binomial_halfwidth(errors: u64, trials: u64, z: f64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let p = errors as f64 / trials as f64;
    z * (p * (1.0 - p) / trials as f64).sqrt()
}

pub const Z95: f64 = 1.959_963_984_540_054;
pub const Z99: f64 = 2.575_829_303_548_901;

impl ResultRow {
    fn base(cfg: &ExperimentConfig, pn: &PnConfig, snr_db: f64, source: Source, series: &str) -> Self {
        Self {
            experiment_id: cfg.experiment_id.clone(),
            source,
            snr_db,
            sigma2_psi: pn.sigma2_psi(),
            modulation: None,
            shape_gamma: None,
            detector: None,
            n_s: cfg.n_s,
            n_rf: cfg.n_rf,
            n_pil: cfg.n_pil,
            n_t: cfg.channel.n_tx,
            n_r: cfg.channel.n_rx,
            ber: None,
            bit_errors: None,
            bits_sent: None,
            ci95: None,
            se_bps_hz: None,
            n_channels: 0,
            master_seed: cfg.master_seed,
            series: series.to_string(),
        }
    }

    pub fn ber_point(
        cfg: &ExperimentConfig,
        pn: &PnConfig,
        scheme: &Scheme,
        detector: DetectorKind,
        snr_db: f64,
        t: Tally,
        n_channels: usize,
    ) -> Self {
        let mut r = Self::base(cfg, pn, snr_db, Source::Montecarlo, "simulated");
        r.modulation = Some(scheme.modulation_label());
        r.shape_gamma = Some(scheme.gamma);
        r.detector = Some(detector.to_string());
        r.ber = Some(t.bit_errors as f64 / t.bits_sent as f64);
        r.bit_errors = Some(t.bit_errors);
        r.bits_sent = Some(t.bits_sent);
        r.ci95 = Some(binomial_halfwidth(t.bit_errors, t.bits_sent, Z95));
        r.n_channels = n_channels;
        r
    }

    #[allow(clippy::too_many_arguments)]
    pub fn analytic_ber(
        cfg: &ExperimentConfig,
        pn: &PnConfig,
        scheme: &Scheme,
        detector: DetectorKind,
        snr_db: f64,
        ber: f64,
        n_channels: usize,
        series: &str,
    ) -> Self {
        let mut r = Self::base(cfg, pn, snr_db, Source::Analytic, series);
        r.modulation = Some(scheme.modulation_label());
        r.shape_gamma = Some(scheme.gamma);
        r.detector = Some(detector.to_string());
        r.ber = Some(ber);
        r.n_channels = n_channels;
        r
    }

    pub fn se_point(
        cfg: &ExperimentConfig,
        pn: &PnConfig,
        snr_db: f64,
        se: f64,
        n_channels: usize,
        source: Source,
        series: &str,
    ) -> Self {
        let mut r = Self::base(cfg, pn, snr_db, source, series);
        r.se_bps_hz = Some(se);
        r.n_channels = n_channels;
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    /// Channel draws rejected for degenerate stream gains.
    pub resampled_channels: u64,
    /// Realisation/grid pairs where the hybrid rate exceeded the fully digital one.
    pub hp_above_fdp: u64,
    pub deviations: Vec<Deviation>,
}

/// A simulated BER with enough errors that sits outside the 99% binomial
/// interval around the semi-analytical value for the same detector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub sigma2_psi: f64,
    pub modulation: String,
    pub shape_gamma: usize,
    pub detector: String,
    pub snr_db: f64,
    pub simulated: f64,
    pub analytic: f64,
    pub bit_errors: u64,
    /// `(simulated - analytic) / sqrt(analytic (1 - analytic) / bits_sent)`.
    pub z: f64,
}

/// Errors needed before a simulated point is compared with its analytic value.
pub const DEVIATION_MIN_ERRORS: u64 = 200;

#[derive(Serialize)]
struct Sidecar<'a> {
    generator: String,
    config: &'a ExperimentConfig,
    csv: Vec<String>,
    rows: usize,
    resampled_channels: u64,
    hp_above_fdp: u64,
    deviations: &'a [Deviation],
}

impl SweepResult {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            config: cfg.clone(),
            rows: Vec::new(),
            resampled_channels: 0,
            hp_above_fdp: 0,
            deviations: Vec::new(),
        }
    }

    /// Fills [`SweepResult::deviations`] from the simulated and semi-analytical BER rows.
    pub fn flag_deviations(&mut self) {
        let mut found = Vec::new();
        for a in self.series(Source::Analytic, "semi_analytic") {
            let Some(p) = a.ber else { continue };
            let sim = self.series(Source::Montecarlo, "simulated").find(|r| {
                r.snr_db == a.snr_db
                    && r.sigma2_psi == a.sigma2_psi
                    && r.modulation == a.modulation
                    && r.shape_gamma == a.shape_gamma
                    && r.detector == a.detector
            });
            let Some(r) = sim else { continue };
            let (Some(ber), Some(e), Some(n)) = (r.ber, r.bit_errors, r.bits_sent) else { continue };
            if e < DEVIATION_MIN_ERRORS {
                continue;
            }
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            let z = if sd > 0.0 { (ber - p) / sd } else { f64::INFINITY };
            if z.abs() > Z99 {
                found.push(Deviation {
                    sigma2_psi: r.sigma2_psi,
                    modulation: r.modulation.clone().unwrap_or_default(),
                    shape_gamma: r.shape_gamma.unwrap_or(1),
                    detector: r.detector.clone().unwrap_or_default(),
                    snr_db: r.snr_db,
                    simulated: ber,
                    analytic: p,
                    bit_errors: e,
                    z,
                });
            }
        }
        self.deviations = found;
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }

    /// Writes `<stem>_montecarlo.csv` and `<stem>_analytic.csv` (each only when
    /// it has rows) plus the `<stem>.json` sidecar into `dir`. Returns the paths written.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut csvs = Vec::new();
        for (source, tag) in [(Source::Montecarlo, "montecarlo"), (Source::Analytic, "analytic")] {
            let rows: Vec<ResultRow> = self.rows.iter().filter(|r| r.source == source).cloned().collect();
            if rows.is_empty() {
                continue;
            }
            let name = format!("{stem}_{tag}.csv");
            let path = dir.join(&name);
            let mut f = BufWriter::new(File::create(&path)?);
            write_rows(&rows, &mut f)?;
            f.flush()?;
            csvs.push(name);
            written.push(path);
        }
        let side = Sidecar {
            generator: format!("hpgpn {}", env!("CARGO_PKG_VERSION")),
            config: &self.config,
            csv: csvs,
            rows: self.rows.len(),
            resampled_channels: self.resampled_channels,
            hp_above_fdp: self.hp_above_fdp,
            deviations: &self.deviations,
        };
        let json_path = dir.join(format!("{stem}.json"));
        let mut f = BufWriter::new(File::create(&json_path)?);
        serde_json::to_writer_pretty(&mut f, &side)?;
        f.write_all(b"\n")?;
        f.flush()?;
        written.push(json_path);
        Ok(written)
    }

    /// Rows matching a source and series.
    pub fn series<'a>(&'a self, source: Source, series: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.source == source && r.series == series)
    }
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for r in rd.deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_schema() {
        let cfg = ExperimentConfig::default();
        let pn = cfg.pn[0];
        let row = ResultRow::se_point(&cfg, &pn, 10.0, 3.5, 7, Source::Montecarlo, "fdp");
        let mut buf = Vec::new();
        write_rows(std::slice::from_ref(&row), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "experiment_id,source,snr_db,sigma2_psi,modulation,shape_gamma,detector,n_s,n_rf,n_pil,\
             n_t,n_r,ber,bit_errors,bits_sent,ci95,se_bps_hz,n_channels,master_seed,series"
        );
        assert_eq!(read_rows(&buf[..]).unwrap(), vec![row]);
    }

    #[test]
    fn binomial_halfwidth_values() {
        assert!((binomial_halfwidth(500, 100_000, Z95) - 4.3710e-4).abs() < 1e-7);
        assert_eq!(binomial_halfwidth(0, 10, Z95), 0.0);
        assert!(binomial_halfwidth(0, 0, Z95).is_nan());
    }

    #[test]
    fn deviations_use_the_99_percent_interval() {
        let cfg = ExperimentConfig::default();
        let pn = cfg.pn[0];
        let scheme = Scheme::QAM16;
        let mut res = SweepResult::new(&cfg);
        let sim = |snr: f64, e: u64| {
            let t = Tally { bit_errors: e, bits_sent: 20_000 };
            ResultRow::ber_point(&cfg, &pn, &scheme, DetectorKind::Pm, snr, t, 10)
        };
        for snr in [10.0, 20.0, 30.0] {
            res.rows.push(ResultRow::analytic_ber(&cfg, &pn, &scheme, DetectorKind::Pm, snr, 0.01, 10, "semi_analytic"));
        }
        // z = (0.02 - 0.01) / sqrt(0.01 * 0.99 / 20000) ≈ 14.2
        res.rows.push(sim(10.0, 400));
        res.rows.push(sim(20.0, 202));
        // too few errors to judge
        res.rows.push(sim(30.0, 150));
        res.flag_deviations();
        assert_eq!(res.deviations.len(), 1);
        let d = &res.deviations[0];
        assert_eq!(d.snr_db, 10.0);
        assert!((d.z - 14.213).abs() < 1e-3, "{}", d.z);
    }
}
