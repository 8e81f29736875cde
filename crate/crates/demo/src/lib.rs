//! Browser front end. [`Link`] holds a handful of designed channel
//! realisations of the 36x144 link and answers the three page queries; the
//! `wasm` module wraps it for JavaScript with JSON results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::str::FromStr;

use hpgpn::modulation::Scheme;
use hpgpn::montecarlo::{
    analytic_sweep, build_realization, scatter_from_realization, ExperimentConfig, Realization,
    Source,
};
use hpgpn::phasenoise::PnConfig;
use hpgpn::{Error, Result};
use serde::Serialize;

pub const MAX_CHANNELS: usize = 64;
pub const MAX_SYMBOLS: usize = 20_000;
const MAX_GRID: usize = 401;

/// Points of the ideal constellation and a received scatter, normalised by
/// the stream gain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scatter {
    pub scheme: String,
    pub ideal: Vec<[f64; 2]>,
    pub ring: Vec<usize>,
    pub tx: Vec<usize>,
    pub rx: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerCurves {
    pub scheme: String,
    pub sigma2_psi: f64,
    pub snr_db: Vec<f64>,
    pub with_pn: Vec<f64>,
    pub without_pn: Vec<f64>,
    /// High-SNR limit under phase noise, where a closed form exists.
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeCurves {
    pub sigma2_psi: f64,
    pub snr_db: Vec<f64>,
    pub hp_no_pn: Vec<f64>,
    pub hp_pn_bound: Vec<f64>,
    pub fdp: Vec<f64>,
    pub high_snr_limit: Option<f64>,
}

pub struct Link {
    cfg: ExperimentConfig,
    reals: Vec<Realization>,
}

pub fn snr_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("SNR grid {lo}:{step}:{hi}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if n > MAX_GRID {
        return Err(Error::InvalidParameter(format!("SNR grid has {n} points, at most {MAX_GRID}")));
    }
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

fn pn(sigma2_psi: f64) -> Result<PnConfig> {
    PnConfig::from_total(sigma2_psi)
}

impl Link {
    /// Designs `n_channels` realisations of the default 4-stream link.
    pub fn new(n_channels: usize, seed: u64) -> Result<Self> {
        if n_channels == 0 || n_channels > MAX_CHANNELS {
            return Err(Error::InvalidParameter(format!(
                "channel count {n_channels} outside 1..={MAX_CHANNELS}"
            )));
        }
        let cfg = ExperimentConfig {
            experiment_id: "demo".into(),
            n_channels,
            master_seed: seed,
            ..ExperimentConfig::default()
        };
        let reals = (0..n_channels as u64)
            .map(|i| build_realization(&cfg.channel, cfg.n_s, cfg.n_rf, &cfg.altmin, seed, i))
            .collect::<Result<_>>()?;
        Ok(Self { cfg, reals })
    }

    pub fn n_channels(&self) -> usize {
        self.reals.len()
    }

    /// Received symbols of the strongest stream of the first channel.
    pub fn scatter(&self, scheme: &str, snr_db: f64, sigma2_psi: f64, n_symbols: usize) -> Result<Scatter> {
        if n_symbols > MAX_SYMBOLS {
            return Err(Error::InvalidParameter(format!("at most {MAX_SYMBOLS} symbols")));
        }
        let s = Scheme::from_str(scheme)?;
        let c = s.build()?;
        let pts = scatter_from_realization(&self.reals[0], n_symbols, self.cfg.master_seed, &s, &pn(sigma2_psi)?, snr_db, 0)?;
        Ok(Scatter {
            scheme: s.to_string(),
            ideal: c.symbols.iter().map(|p| [p.re, p.im]).collect(),
            ring: c.ring.clone(),
            tx: pts.iter().map(|p| p.tx_index).collect(),
            rx: pts.iter().map(|p| [p.rx.re, p.rx.im]).collect(),
        })
    }

    fn sweep(&self, schemes: Vec<Scheme>, sigma2_psi: f64, snr_db: &[f64]) -> Result<Vec<hpgpn::montecarlo::ResultRow>> {
        let cfg = ExperimentConfig {
            pn: vec![pn(sigma2_psi)?, pn(0.0)?],
            snr_db: snr_db.to_vec(),
            schemes,
            ..self.cfg.clone()
        };
        Ok(analytic_sweep(&cfg, &self.reals)?.rows)
    }

    /// Semi-analytical BER averaged over the designed channels, with and without phase noise.
    pub fn ber_curves(&self, scheme: &str, sigma2_psi: f64, snr_db: &[f64]) -> Result<BerCurves> {
        let s = Scheme::from_str(scheme)?;
        s.build()?;
        let rows = self.sweep(vec![s], sigma2_psi, snr_db)?;
        let pick = |s2: f64, series: &str| -> Vec<f64> {
            snr_db
                .iter()
                .map(|&x| {
                    rows.iter()
                        .find(|r| r.series == series && r.sigma2_psi == s2 && r.snr_db == x && r.ber.is_some())
                        .and_then(|r| r.ber)
                        .unwrap_or(f64::NAN)
                })
                .collect()
        };
        let floor = rows
            .iter()
            .find(|r| r.series == "floor" && r.sigma2_psi == sigma2_psi)
            .and_then(|r| r.ber);
        Ok(BerCurves {
            scheme: s.to_string(),
            sigma2_psi,
            snr_db: snr_db.to_vec(),
            with_pn: pick(sigma2_psi, "semi_analytic"),
            without_pn: pick(0.0, "semi_analytic"),
            floor,
        })
    }

    /// Hybrid and fully digital spectral efficiency averaged over the designed channels.
    pub fn se_curves(&self, sigma2_psi: f64, snr_db: &[f64]) -> Result<SeCurves> {
        let rows = self.sweep(Vec::new(), sigma2_psi, snr_db)?;
        let pick = |series: &str| -> Vec<f64> {
            snr_db
                .iter()
                .map(|&x| {
                    rows.iter()
                        .find(|r| r.series == series && r.sigma2_psi == sigma2_psi && r.snr_db == x)
                        .and_then(|r| r.se_bps_hz)
                        .unwrap_or(f64::NAN)
                })
                .collect()
        };
        let high_snr_limit = rows
            .iter()
            .find(|r| r.series == "high_snr_limit" && r.sigma2_psi == sigma2_psi && r.source == Source::Analytic)
            .and_then(|r| r.se_bps_hz);
        Ok(SeCurves {
            sigma2_psi,
            snr_db: snr_db.to_vec(),
            hp_no_pn: pick("hp_no_pn"),
            hp_pn_bound: pick("hp_pn_bound"),
            fdp: pick("fdp"),
            high_snr_limit,
        })
    }
}

pub mod wasm {
    use wasm_bindgen::prelude::*;

    use super::{snr_grid, Link};

    fn js(e: impl std::fmt::Display) -> JsError {
        JsError::new(&e.to_string())
    }

    fn json<T: serde::Serialize>(v: &T) -> Result<String, JsError> {
        serde_json::to_string(v).map_err(js)
    }

    #[wasm_bindgen]
    pub struct DemoLink(Link);

    #[wasm_bindgen]
    impl DemoLink {
        #[wasm_bindgen(constructor)]
        pub fn new(n_channels: usize, seed: u64) -> Result<DemoLink, JsError> {
            Link::new(n_channels, seed).map(DemoLink).map_err(js)
        }

        #[wasm_bindgen(getter)]
        pub fn n_channels(&self) -> usize {
            self.0.n_channels()
        }

        pub fn scatter(&self, scheme: &str, snr_db: f64, sigma2_psi: f64, n_symbols: usize) -> Result<String, JsError> {
            json(&self.0.scatter(scheme, snr_db, sigma2_psi, n_symbols).map_err(js)?)
        }

        pub fn ber_curves(&self, scheme: &str, sigma2_psi: f64, lo: f64, hi: f64, step: f64) -> Result<String, JsError> {
            let grid = snr_grid(lo, hi, step).map_err(js)?;
            json(&self.0.ber_curves(scheme, sigma2_psi, &grid).map_err(js)?)
        }

        pub fn se_curves(&self, sigma2_psi: f64, lo: f64, hi: f64, step: f64) -> Result<String, JsError> {
            let grid = snr_grid(lo, hi, step).map_err(js)?;
            json(&self.0.se_curves(sigma2_psi, &grid).map_err(js)?)
        }
    }
}
