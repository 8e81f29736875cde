//! Hybrid precoder and combiner design.
//!
//! The analog stages come from PE-AltMin run on the fully digital SVD
//! precoder/combiner; the digital stages are the singular vectors of the
//! equivalent channel `W_RF^H H F_RF`, which decouples the streams exactly.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::linalg::{frobenius, leading_columns, phase_of, CMatrix, SortedSvd};
use crate::{Error, Result, C64};

/// Fully digital SVD precoder and combiner.
#[derive(Debug, Clone)]
pub struct FdpPrecoder {
    /// `n_tx x n_s`, leading right singular vectors of `H`.
    pub f_opt: CMatrix,
    /// `n_rx x n_s`, leading left singular vectors of `H`.
    pub w_opt: CMatrix,
    /// Leading `n_s` singular values of `H`.
    pub singular_values: Vec<f64>,
}

pub fn optimal_fdp(h: &CMatrix, n_s: usize) -> Result<FdpPrecoder> {
    let max = h.nrows().min(h.ncols());
    if n_s == 0 || n_s > max {
        return Err(Error::InvalidParameter(format!(
            "n_s = {n_s} must lie in 1..={max} for a {}x{} channel",
            h.nrows(),
            h.ncols()
        )));
    }
    let svd = SortedSvd::new(h)?;
    Ok(FdpPrecoder {
        f_opt: leading_columns(&svd.v, n_s),
        w_opt: leading_columns(&svd.u, n_s),
        singular_values: svd.s[..n_s].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltMinOptions {
    /// Stop once the residual changes by less than this between iterations.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AltMinOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AltMinOutcome {
    /// `rows x n_rf`, unit-modulus entries.
    pub f_rf: CMatrix,
    /// `n_rf x n_s`, a scaled semi-unitary matrix.
    pub f_bb: CMatrix,
    /// Residual `||F_opt - F_RF F_BB||_F` after every iteration, in order.
    pub objective: Vec<f64>,
    pub converged: bool,
}

impl AltMinOutcome {
    pub fn residual(&self) -> f64 {
        self.objective.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn phase_extraction(target: &CMatrix, f_bb: &CMatrix) -> CMatrix {
    (target * f_bb.adjoint()).map(phase_of)
}

/// Scaled orthogonal Procrustes step: `F_BB = α U V^H` where
/// `F_RF^H F_opt = U Σ V^H` and `α` minimises the residual along that direction.
fn procrustes_step(target: &CMatrix, f_rf: &CMatrix) -> Result<CMatrix> {
    let m = f_rf.adjoint() * target;
    let svd = SortedSvd::new(&m)?;
    let q = &svd.u * svd.v.adjoint();
    let energy = frobenius(&(f_rf * &q)).powi(2);
    if energy <= 0.0 {
        return Err(Error::DegeneratePrecoder);
    }
    let alpha = svd.s.iter().sum::<f64>() / energy;
    Ok(q * C64::new(alpha, 0.0))
}

/// Phase-extraction alternating minimisation of `||F_opt - F_RF F_BB||_F` with
/// `|F_RF[i,j]| = 1` and `F_BB` a scaled semi-unitary matrix.
///
/// Starts from `F_BB = [I; 0]`. Non-convergence is reported through
/// [`AltMinOutcome::converged`]; the best iterate seen is always returned.
pub fn pe_altmin(f_opt: &CMatrix, n_rf: usize, opts: &AltMinOptions) -> Result<AltMinOutcome> {
    let (rows, n_s) = f_opt.shape();
    if n_s == 0 || n_rf < n_s {
        return Err(Error::InvalidParameter(format!(
            "need n_rf >= n_s >= 1, got n_rf = {n_rf}, n_s = {n_s}"
        )));
    }
    if n_rf > rows {
        return Err(Error::InvalidParameter(format!(
            "n_rf = {n_rf} exceeds the array size {rows}"
        )));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "PE-AltMin needs tol > 0 and max_iter >= 1".into(),
        ));
    }

    let mut f_bb = CMatrix::identity(n_rf, n_s);
    let mut best: Option<(f64, CMatrix, CMatrix)> = None;
    let mut objective = Vec::with_capacity(opts.max_iter);
    let mut converged = false;

    for _ in 0..opts.max_iter {
        let f_rf = phase_extraction(f_opt, &f_bb);
        f_bb = procrustes_step(f_opt, &f_rf)?;
        let residual = frobenius(&(f_opt - &f_rf * &f_bb));
        let previous = objective.last().copied();
        objective.push(residual);

        if best.as_ref().is_none_or(|(b, _, _)| residual < *b) {
            best = Some((residual, f_rf, f_bb.clone()));
        }
        if let Some(prev) = previous {
            if (prev - residual).abs() < opts.tol {
                converged = true;
                break;
            }
            if residual > prev {
                // ascent can only happen when n_rf > n_s; keep the best iterate
                break;
            }
        }
    }

    let (_, f_rf, f_bb) = best.expect("at least one iteration ran");
    Ok(AltMinOutcome {
        f_rf,
        f_bb,
        objective,
        converged,
    })
}

/// `H_eq = W_RF^H H F_RF`.
pub fn equivalent_channel(h: &CMatrix, f_rf: &CMatrix, w_rf: &CMatrix) -> Result<CMatrix> {
    if w_rf.nrows() != h.nrows() || f_rf.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "W_RF is {}x{}, H is {}x{}, F_RF is {}x{}",
            w_rf.nrows(),
            w_rf.ncols(),
            h.nrows(),
            h.ncols(),
            f_rf.nrows(),
            f_rf.ncols()
        )));
    }
    Ok(w_rf.adjoint() * h * f_rf)
}

/// Digital stage from the SVD of the equivalent channel.
#[derive(Debug, Clone)]
pub struct DigitalStage {
    pub u_bb: CMatrix,
    pub v_diag: Vec<f64>,
    /// Right singular vectors before the ρ normalisation.
    pub f_bb: CMatrix,
}

pub fn digital_from_svd(h_eq: &CMatrix) -> Result<DigitalStage> {
    if h_eq.nrows() != h_eq.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "equivalent channel must be square, got {}x{}",
            h_eq.nrows(),
            h_eq.ncols()
        )));
    }
    let svd = SortedSvd::new(h_eq)?;
    Ok(DigitalStage {
        u_bb: svd.u,
        v_diag: svd.s,
        f_bb: svd.v,
    })
}

/// `ρ = sqrt(N_s) / ||F_RF F_BB||_F`.
pub fn normalize_rho(f_rf: &CMatrix, f_bb: &CMatrix, n_s: usize) -> Result<f64> {
    if f_rf.ncols() != f_bb.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "F_RF has {} columns, F_BB has {} rows",
            f_rf.ncols(),
            f_bb.nrows()
        )));
    }
    let norm = frobenius(&(f_rf * f_bb));
    if !(norm > 0.0) {
        return Err(Error::DegeneratePrecoder);
    }
    Ok((n_s as f64).sqrt() / norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    /// `n_tx x n_rf`, unit modulus.
    pub f_rf: CMatrix,
    /// `n_rf x n_s`, without ρ.
    pub f_bb: CMatrix,
    /// `n_rx x n_rf`, unit modulus.
    pub w_rf: CMatrix,
    /// `n_rf x n_s`.
    pub u_bb: CMatrix,
    /// Stream gains `V_kk`, non-increasing.
    pub v_diag: Vec<f64>,
    pub rho: f64,
}

impl PrecoderSet {
    pub fn n_s(&self) -> usize {
        self.v_diag.len()
    }

    pub fn n_rf(&self) -> usize {
        self.f_rf.ncols()
    }

    /// Combined receive combiner `U_BB^H W_RF^H` (`n_s x n_rx`).
    pub fn combiner(&self) -> CMatrix {
        self.u_bb.adjoint() * self.w_rf.adjoint()
    }

    /// Checks unit modulus, ordering and the ρ normalisation.
    pub fn check_invariants(&self) -> Result<()> {
        for (name, m) in [("F_RF", &self.f_rf), ("W_RF", &self.w_rf)] {
            if let Some(z) = m.iter().find(|z| (z.norm() - 1.0).abs() > 1e-12) {
                return Err(Error::NumericalDegeneracy(format!(
                    "{name} entry {z} is not unit modulus"
                )));
            }
        }
        if self.v_diag.windows(2).any(|w| w[0] < w[1]) || self.v_diag.iter().any(|&v| v < 0.0) {
            return Err(Error::NumericalDegeneracy("V_kk not sorted non-negative".into()));
        }
        let power = self.rho * frobenius(&(&self.f_rf * &self.f_bb));
        if (power - (self.n_s() as f64).sqrt()).abs() > 1e-10 {
            return Err(Error::NumericalDegeneracy(format!(
                "rho normalisation off: {power}"
            )));
        }
        Ok(())
    }
}

/// Everything produced for one channel realisation.
#[derive(Debug, Clone)]
pub struct HybridDesign {
    pub precoders: PrecoderSet,
    pub fdp: FdpPrecoder,
    pub tx_altmin_converged: bool,
    pub rx_altmin_converged: bool,
}

pub fn design_hybrid(
    h: &CMatrix,
    n_s: usize,
    n_rf: usize,
    opts: &AltMinOptions,
) -> Result<HybridDesign> {
    let fdp = optimal_fdp(h, n_s)?;
    let tx = pe_altmin(&fdp.f_opt, n_rf, opts)?;
    let rx = pe_altmin(&fdp.w_opt, n_rf, opts)?;
    let h_eq = equivalent_channel(h, &tx.f_rf, &rx.f_rf)?;
    let digital = digital_from_svd(&h_eq)?;
    let f_bb = leading_columns(&digital.f_bb, n_s);
    let u_bb = leading_columns(&digital.u_bb, n_s);
    let rho = normalize_rho(&tx.f_rf, &f_bb, n_s)?;
    Ok(HybridDesign {
        precoders: PrecoderSet {
            f_rf: tx.f_rf,
            f_bb,
            w_rf: rx.f_rf,
            u_bb,
            v_diag: digital.v_diag[..n_s].to_vec(),
            rho,
        },
        fdp,
        tx_altmin_converged: tx.converged,
        rx_altmin_converged: rx.converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamMetrics {
    /// Post-combining per-stream SNR `β_k`.
    pub beta: Vec<f64>,
    /// Combined-noise shaping `ξ_k = ||W_RF u_k||²`.
    pub xi: Vec<f64>,
    /// Mean per-antenna receive gain `ω`.
    pub omega: f64,
}

pub fn noise_shaping(pset: &PrecoderSet) -> Result<Vec<f64>> {
    let wu = &pset.w_rf * &pset.u_bb;
    let xi: Vec<f64> = wu.column_iter().map(|c| c.norm_squared()).collect();
    if let Some(k) = xi.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::NumericalDegeneracy(format!("xi_{k} = {} <= 0", xi[k])));
    }
    Ok(xi)
}

/// `ω = mean_q |h_q^T F_RF F_RF^H h_q^*| = ||H F_RF||_F² / N_r`.
pub fn omega(h: &CMatrix, f_rf: &CMatrix) -> f64 {
    frobenius(&(h * f_rf)).powi(2) / h.nrows() as f64
}

/// Thermal noise variance that puts the receive-antenna SNR at `snr_rx`.
pub fn noise_variance_for_snr(rho: f64, omega: f64, snr_rx: f64) -> f64 {
    rho * rho * omega / snr_rx
}

/// Per-stream SNR from the thermal noise variance:
/// `β_k = ρ² |V_kk|² / (σ² ξ_k)`.
pub fn stream_metrics(pset: &PrecoderSet, h: &ChannelMatrix, sigma2: f64) -> Result<StreamMetrics> {
    let xi = noise_shaping(pset)?;
    let beta = pset
        .v_diag
        .iter()
        .zip(&xi)
        .map(|(v, x)| pset.rho * pset.rho * v * v / (sigma2 * x))
        .collect();
    Ok(StreamMetrics {
        beta,
        xi,
        omega: omega(&h.h, &pset.f_rf),
    })
}

/// Per-stream SNR from the receive-antenna SNR: `β_k = |V_kk|² ϝ / (|ξ_k| ω)`.
pub fn stream_metrics_from_snr(
    pset: &PrecoderSet,
    h: &ChannelMatrix,
    snr_rx: f64,
) -> Result<StreamMetrics> {
    let xi = noise_shaping(pset)?;
    let omega = omega(&h.h, &pset.f_rf);
    let beta = pset
        .v_diag
        .iter()
        .zip(&xi)
        .map(|(v, x)| v * v * snr_rx / (x.abs() * omega))
        .collect();
    Ok(StreamMetrics { beta, xi, omega })
}
