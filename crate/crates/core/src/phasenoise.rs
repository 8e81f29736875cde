//! Gaussian phase noise on a common local oscillator.
//!
//! Every RF chain sees the same transmit phase `φ[k]` and the same receive
//! phase `ϕ[k]`, so a single total rotation `ψ[k] = φ[k] + ϕ[k]` multiplies
//! every stream of symbol slot `k`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, CVector};
use crate::precoding::PrecoderSet;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PnRegime {
    Strong,
    Medium,
    Low,
    Off,
    Custom,
}

impl PnRegime {
    /// Total variance `σ²_ψ` of the named levels; `None` for custom.
    pub fn sigma2_psi(self) -> Option<f64> {
        match self {
            Self::Strong => Some(1e-1),
            Self::Medium => Some(1e-2),
            Self::Low => Some(1e-3),
            Self::Off => Some(0.0),
            Self::Custom => None,
        }
    }
}

impl fmt::Display for PnRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Strong => "strong",
            Self::Medium => "medium",
            Self::Low => "low",
            Self::Off => "off",
            Self::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for PnRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strong" => Ok(Self::Strong),
            "medium" => Ok(Self::Medium),
            "low" => Ok(Self::Low),
            "off" | "none" => Ok(Self::Off),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidParameter(format!("unknown PN regime `{other}`"))),
        }
    }
}

/// Transmit and receive phase-noise variances in rad².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnConfig {
    pub sigma2_tx: f64,
    pub sigma2_rx: f64,
    pub regime: PnRegime,
}

impl PnConfig {
    /// Named level with the variance split evenly between both ends.
    pub fn from_regime(regime: PnRegime) -> Result<Self> {
        let total = regime.sigma2_psi().ok_or_else(|| {
            Error::InvalidParameter("the custom regime needs an explicit variance".into())
        })?;
        Ok(Self {
            sigma2_tx: total / 2.0,
            sigma2_rx: total / 2.0,
            regime,
        })
    }

    /// Even split of a total variance; picks the named regime when it matches.
    pub fn from_total(sigma2_psi: f64) -> Result<Self> {
        if !(sigma2_psi >= 0.0 && sigma2_psi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma2_psi must be finite and >= 0, got {sigma2_psi}"
            )));
        }
        let regime = [PnRegime::Strong, PnRegime::Medium, PnRegime::Low, PnRegime::Off]
            .into_iter()
            .find(|r| r.sigma2_psi() == Some(sigma2_psi))
            .unwrap_or(PnRegime::Custom);
        Ok(Self {
            sigma2_tx: sigma2_psi / 2.0,
            sigma2_rx: sigma2_psi / 2.0,
            regime,
        })
    }

    pub fn sigma2_psi(&self) -> f64 {
        self.sigma2_tx + self.sigma2_rx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnTrace {
    /// Total phase `ψ[k]` per symbol slot.
    pub psi: Vec<f64>,
    /// Receive-side phase `ϕ[k]`.
    pub phi_rx: Vec<f64>,
}

impl PnTrace {
    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

/// One `(φ, ϕ)` draw; zero variance yields exact zeros.
pub fn sample_phase_pair<R: Rng + ?Sized>(cfg: &PnConfig, rng: &mut R) -> (f64, f64) {
    let draw = |var: f64, rng: &mut R| {
        if var > 0.0 {
            Normal::new(0.0, var.sqrt()).expect("finite std").sample(rng)
        } else {
            0.0
        }
    };
    let tx = draw(cfg.sigma2_tx, rng);
    let rx = draw(cfg.sigma2_rx, rng);
    (tx, rx)
}

pub fn sample_pn<R: Rng + ?Sized>(cfg: &PnConfig, n_symbols: usize, rng: &mut R) -> Result<PnTrace> {
    if n_symbols == 0 {
        return Err(Error::InvalidParameter("n_symbols must be >= 1".into()));
    }
    let mut trace = PnTrace {
        psi: Vec::with_capacity(n_symbols),
        phi_rx: Vec::with_capacity(n_symbols),
    };
    for _ in 0..n_symbols {
        let (tx, rx) = sample_phase_pair(cfg, rng);
        trace.psi.push(tx + rx);
        trace.phi_rx.push(rx);
    }
    Ok(trace)
}

/// Received stream vector for symbol slot `k` of a CLO link:
///
/// `r = e^{jψ[k]} U_BB^H W_RF^H H (ρ F_RF F_BB) s + e^{jϕ[k]} U_BB^H W_RF^H n`.
///
/// With the SVD-derived digital stage the signal part equals `ρ V s`.
pub fn apply_clo(
    tx_symbols: &CVector,
    pset: &PrecoderSet,
    h: &CMatrix,
    noise: &CVector,
    trace: &PnTrace,
    k: usize,
) -> Result<CVector> {
    if tx_symbols.len() != pset.n_s() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbols for {} streams",
            tx_symbols.len(),
            pset.n_s()
        )));
    }
    if noise.len() != h.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "noise has {} entries for {} receive antennas",
            noise.len(),
            h.nrows()
        )));
    }
    if k >= trace.len() {
        return Err(Error::InvalidParameter(format!(
            "symbol index {k} outside a trace of length {}",
            trace.len()
        )));
    }
    let combiner = pset.combiner();
    let x = (&pset.f_rf * &pset.f_bb * tx_symbols) * C64::new(pset.rho, 0.0);
    let signal = &combiner * (h * x);
    let noise = &combiner * noise;
    let rot_sig = C64::from_polar(1.0, trace.psi[k]);
    let rot_noise = C64::from_polar(1.0, trace.phi_rx[k]);
    Ok(signal * rot_sig + noise * rot_noise)
}

/// Pilot-aided estimate
/// `ψ̂ = arg{ (1/N_pil) Σ_q r_q s_q^* / (ρ V_qq |s_q|²) }`.
pub fn estimate_pn(
    pilot_streams: &[usize],
    r: &[C64],
    pilots: &[C64],
    v_diag: &[f64],
    rho: f64,
) -> Result<f64> {
    if pilot_streams.is_empty() {
        return Err(Error::InvalidParameter("at least one pilot stream is required".into()));
    }
    if pilots.len() != pilot_streams.len() {
        return Err(Error::LengthMismatch {
            left: pilots.len(),
            right: pilot_streams.len(),
        });
    }
    let mut acc = C64::new(0.0, 0.0);
    for (&q, s) in pilot_streams.iter().zip(pilots) {
        let (Some(&rq), Some(&vq)) = (r.get(q), v_diag.get(q)) else {
            return Err(Error::InvalidParameter(format!("pilot stream {q} out of range")));
        };
        let gain = rho * vq;
        if !(gain > 0.0) {
            return Err(Error::PilotUnusable(q));
        }
        acc += rq * s.conj() / (gain * s.norm_sqr());
    }
    Ok((acc / pilot_streams.len() as f64).arg())
}

/// Derotation `r̃ = e^{-jψ̂} r`.
pub fn compensate(r: &mut [C64], psi_hat: f64) {
    let rot = C64::from_polar(1.0, -psi_hat);
    for z in r.iter_mut() {
        *z *= rot;
    }
}
