//! Per-stream symbol detection on the normalised observation `r̃_k = r_k / (ρ V_kk)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::modulation::{wrap_angle, Constellation};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    /// Minimum Euclidean distance.
    Euc,
    /// Polar metric.
    Pm,
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Euc => "EUC-D",
            Self::Pm => "PM-D",
        })
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().trim_end_matches("-d") {
            "euc" | "euclidean" => Ok(Self::Euc),
            "pm" | "polar" => Ok(Self::Pm),
            other => Err(Error::InvalidParameter(format!("unknown detector `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    /// Phase-error variance `γ² = σ²_ψ + σ²_{n_k}`.
    pub gamma2: f64,
    /// Per-dimension noise variance `σ²_{n_k} = 1/(2β_k)`.
    pub sigma2_n: f64,
}

impl DetectorConfig {
    pub fn euclidean() -> Self {
        Self {
            kind: DetectorKind::Euc,
            gamma2: 0.0,
            sigma2_n: 0.0,
        }
    }

    /// Polar metric for a stream with SNR `beta` under phase variance `sigma2_psi`.
    pub fn polar(sigma2_psi: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !(sigma2_psi >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "polar metric needs beta > 0 and sigma2_psi >= 0 (got {beta}, {sigma2_psi})"
            )));
        }
        let sigma2_n = 1.0 / (2.0 * beta);
        Ok(Self {
            kind: DetectorKind::Pm,
            gamma2: sigma2_psi + sigma2_n,
            sigma2_n,
        })
    }

    pub fn for_stream(kind: DetectorKind, sigma2_psi: f64, beta: f64) -> Result<Self> {
        match kind {
            DetectorKind::Euc => Ok(Self::euclidean()),
            DetectorKind::Pm => Self::polar(sigma2_psi, beta),
        }
    }
}

/// `r̃_k = r_k / (ρ V_kk)`.
pub fn normalize_stream(r_k: C64, rho: f64, v_kk: f64) -> Result<C64> {
    let gain = rho * v_kk;
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::StreamUnusable(gain));
    }
    Ok(r_k / gain)
}

/// Nearest point; ties go to the lowest index.
pub fn euclidean_detect(r: C64, c: &Constellation) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, s) in c.symbols.iter().enumerate() {
        let d = (r - s).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// `d_γ(r̃, s) = (r̃_ρ - s_ρ)²/σ²_n + wrap(r̃_θ - s_θ)²/γ²`.
pub fn polar_metric(r_rho: f64, r_theta: f64, s: (f64, f64), cfg: &DetectorConfig) -> f64 {
    let dr = r_rho - s.0;
    let dt = wrap_angle(r_theta - s.1);
    dr * dr / cfg.sigma2_n + dt * dt / cfg.gamma2
}

pub fn polar_detect(r: C64, c: &Constellation, cfg: &DetectorConfig) -> usize {
    let (r_rho, r_theta) = (r.norm(), r.arg());
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &s) in c.polar().iter().enumerate() {
        let d = polar_metric(r_rho, r_theta, s, cfg);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

pub fn detect(r: C64, c: &Constellation, cfg: &DetectorConfig) -> usize {
    match cfg.kind {
        DetectorKind::Euc => euclidean_detect(r, c),
        DetectorKind::Pm => polar_detect(r, c, cfg),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCount {
    pub bit_errors: u64,
    pub symbol_errors: u64,
}

/// Bit and symbol errors between two equally long bit streams.
pub fn count_errors(tx_bits: &[u8], rx_bits: &[u8], bits_per_symbol: usize) -> Result<ErrorCount> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::LengthMismatch {
            left: tx_bits.len(),
            right: rx_bits.len(),
        });
    }
    if bits_per_symbol == 0 || !tx_bits.len().is_multiple_of(bits_per_symbol) {
        return Err(Error::InvalidParameter(format!(
            "{} bits do not split into {bits_per_symbol}-bit symbols",
            tx_bits.len()
        )));
    }
    let mut out = ErrorCount::default();
    for (a, b) in tx_bits.chunks_exact(bits_per_symbol).zip(rx_bits.chunks_exact(bits_per_symbol)) {
        let e = a.iter().zip(b).filter(|(x, y)| x != y).count() as u64;
        out.bit_errors += e;
        out.symbol_errors += u64::from(e > 0);
    }
    Ok(out)
}

/// Same as [`count_errors`] on symbol labels directly.
pub fn count_label_errors(tx: usize, rx: usize) -> ErrorCount {
    let e = (tx ^ rx).count_ones() as u64;
    ErrorCount {
        bit_errors: e,
        symbol_errors: u64::from(e > 0),
    }
}
