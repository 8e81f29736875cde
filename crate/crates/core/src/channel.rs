//! Clustered Saleh-Valenzuela channel with half-wave spaced ULAs at both ends.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_clusters: usize,
    pub n_rays: usize,
    /// Standard deviation of the per-ray Laplacian angle offsets, in degrees.
    pub angular_spread_deg: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            n_tx: 144,
            n_rx: 36,
            n_clusters: 5,
            n_rays: 10,
            angular_spread_deg: 10.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_tx", self.n_tx),
            ("n_rx", self.n_rx),
            ("n_clusters", self.n_clusters),
            ("n_rays", self.n_rays),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("channel.{name} must be >= 1")));
            }
        }
        if !(self.angular_spread_deg > 0.0 && self.angular_spread_deg.is_finite()) {
            return Err(Error::InvalidParameter(
                "channel.angular_spread_deg must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn n_paths(&self) -> usize {
        self.n_clusters * self.n_rays
    }

    pub fn angular_spread_rad(&self) -> f64 {
        self.angular_spread_deg.to_radians()
    }
}

/// One channel realisation together with the ray parameters that produced it.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    /// `n_rx x n_tx` propagation matrix.
    pub h: CMatrix,
    /// Per-ray angles of arrival, radians, cluster-major.
    pub aoa: Vec<f64>,
    /// Per-ray angles of departure, radians, cluster-major.
    pub aod: Vec<f64>,
    /// Per-ray complex gains.
    pub gains: Vec<C64>,
}

impl ChannelMatrix {
    pub fn n_rx(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.ncols()
    }

    /// Wraps a bare matrix (no ray bookkeeping), e.g. one read back from a dump.
    pub fn from_matrix(h: CMatrix) -> Self {
        Self {
            h,
            aoa: Vec::new(),
            aod: Vec::new(),
            gains: Vec::new(),
        }
    }
}

/// Normalised ULA response `(1/sqrt n) [1, e^{jπ sinθ}, ..., e^{jπ(n-1) sinθ}]^T`.
pub fn array_response(theta: f64, n: usize) -> Result<CVector> {
    if n == 0 {
        return Err(Error::InvalidParameter("array size must be >= 1".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let step = PI * theta.sin();
    Ok(CVector::from_fn(n, |m, _| C64::from_polar(scale, step * m as f64)))
}

/// Cluster mean angles and absolute per-ray angles for both link ends.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSet {
    pub aoa_means: Vec<f64>,
    pub aod_means: Vec<f64>,
    /// Cluster-major, `n_clusters * n_rays` entries.
    pub aoa: Vec<f64>,
    pub aod: Vec<f64>,
}

/// Zero-mean Laplacian draw with the given standard deviation.
pub fn laplacian<R: Rng + ?Sized>(rng: &mut R, std_dev: f64) -> f64 {
    let b = std_dev / std::f64::consts::SQRT_2;
    // u in (-1/2, 1/2]; the open end avoids ln(0)
    let u: f64 = 0.5 - rng.random::<f64>();
    let mag = -b * (1.0 - 2.0 * u.abs()).ln();
    if u < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Cluster means uniform on `[0, 2π)`, ray offsets Laplacian with the
/// configured spread; arrival and departure sides are drawn independently.
pub fn sample_angles<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> AngleSet {
    let spread = params.angular_spread_rad();
    let mut out = AngleSet {
        aoa_means: Vec::with_capacity(params.n_clusters),
        aod_means: Vec::with_capacity(params.n_clusters),
        aoa: Vec::with_capacity(params.n_paths()),
        aod: Vec::with_capacity(params.n_paths()),
    };
    for _ in 0..params.n_clusters {
        let aoa_mean = TAU * rng.random::<f64>();
        let aod_mean = TAU * rng.random::<f64>();
        out.aoa_means.push(aoa_mean);
        out.aod_means.push(aod_mean);
        for _ in 0..params.n_rays {
            out.aoa.push(aoa_mean + laplacian(rng, spread));
            out.aod.push(aod_mean + laplacian(rng, spread));
        }
    }
    out
}

/// Unit-variance circularly-symmetric complex Gaussian.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Assembles `H = sqrt(Nt Nr / (Nc NR)) Σ ξ a_r(θr) a_t(θt)^H` from explicit rays.
pub fn channel_from_rays(
    params: &ChannelParams,
    aoa: &[f64],
    aod: &[f64],
    gains: &[C64],
) -> Result<ChannelMatrix> {
    params.validate()?;
    let paths = params.n_paths();
    if aoa.len() != paths || aod.len() != paths || gains.len() != paths {
        return Err(Error::DimensionMismatch(format!(
            "expected {paths} rays, got aoa={} aod={} gains={}",
            aoa.len(),
            aod.len(),
            gains.len()
        )));
    }
    let scale = ((params.n_tx * params.n_rx) as f64 / paths as f64).sqrt();
    let mut a_r = CMatrix::zeros(params.n_rx, paths);
    let mut a_t = CMatrix::zeros(params.n_tx, paths);
    for p in 0..paths {
        let ar = array_response(aoa[p], params.n_rx)? * (gains[p] * scale);
        a_r.set_column(p, &ar);
        a_t.set_column(p, &array_response(aod[p], params.n_tx)?);
    }
    Ok(ChannelMatrix {
        h: a_r * a_t.adjoint(),
        aoa: aoa.to_vec(),
        aod: aod.to_vec(),
        gains: gains.to_vec(),
    })
}

pub fn generate_channel<R: Rng + ?Sized>(
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    params.validate()?;
    let angles = sample_angles(params, rng);
    let gains: Vec<C64> = (0..params.n_paths()).map(|_| complex_gaussian(rng)).collect();
    channel_from_rays(params, &angles.aoa, &angles.aod, &gains)
}
