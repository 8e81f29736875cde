//! Closed-form and semi-analytical rate and error-probability expressions.
//!
//! Everything here is conditioned on one channel realisation; averaging over
//! realisations happens in [`crate::montecarlo`].

use std::f64::consts::PI;

use crate::modulation::{PolarGeometry, Scheme, SchemeKind};
use crate::{Error, Result};

/// Gaussian tail probability `Q(x) = erfc(x/√2)/2`.
pub fn qfunc(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Per-channel quantities the expressions depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticInputs {
    /// Stream gains `V_kk`.
    pub v_diag: Vec<f64>,
    pub rho: f64,
    /// Combined-noise shaping `ξ_k`.
    pub xi: Vec<f64>,
    /// Mean per-antenna receive gain `ω`.
    pub omega: f64,
    /// Thermal noise variance per receive antenna.
    pub sigma2: f64,
    /// Total phase-noise variance `σ²_ψ`.
    pub sigma2_psi: f64,
    /// Leading streams reserved for pilots.
    pub n_pil: usize,
}

impl AnalyticInputs {
    pub fn n_s(&self) -> usize {
        self.v_diag.len()
    }

    /// Receive-antenna SNR `ϝ` implied by `σ²`: `ϝ = ρ² ω / σ²`.
    pub fn snr_rx(&self) -> f64 {
        self.rho * self.rho * self.omega / self.sigma2
    }

    pub fn validate(&self) -> Result<()> {
        if self.xi.len() != self.v_diag.len() {
            return Err(Error::LengthMismatch {
                left: self.xi.len(),
                right: self.v_diag.len(),
            });
        }
        if self.n_pil >= self.n_s() {
            return Err(Error::InvalidParameter(format!(
                "n_pil = {} leaves no data stream out of {}",
                self.n_pil,
                self.n_s()
            )));
        }
        if !(self.sigma2_psi >= 0.0) || !(self.sigma2 >= 0.0) {
            return Err(Error::InvalidParameter("variances must be >= 0".into()));
        }
        Ok(())
    }

    /// `β_k = ρ² |V_kk|² / (σ² ξ_k)` for every stream.
    pub fn beta(&self) -> Vec<f64> {
        self.v_diag
            .iter()
            .zip(&self.xi)
            .map(|(v, x)| beta_from_noise(self.rho, *v, self.sigma2, *x))
            .collect()
    }

    /// `β_k` of the data streams only.
    pub fn data_beta(&self) -> Vec<f64> {
        self.beta().split_off(self.n_pil)
    }
}

pub fn beta_from_noise(rho: f64, v_kk: f64, sigma2: f64, xi_k: f64) -> f64 {
    rho * rho * v_kk * v_kk / (sigma2 * xi_k)
}

/// `β_k = |V_kk|² ϝ / (|ξ_k| ω)`.
pub fn beta_from_snr(v_kk: f64, snr_rx: f64, xi_k: f64, omega: f64) -> f64 {
    v_kk * v_kk * snr_rx / (xi_k.abs() * omega)
}

pub fn sum_rate(beta: &[f64]) -> f64 {
    beta.iter().map(|b| (1.0 + b).log2()).sum()
}

/// Sum rate without phase noise over the data streams, `Σ log₂(1 + β_k)`.
/// With `n_pil > 0` this is the pilot-reduced rate over `N_s - N_pil` streams.
pub fn se_no_pn(inputs: &AnalyticInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(sum_rate(&inputs.data_beta()))
}

/// Exact square-QAM BER of one AWGN stream with SNR `beta`.
pub fn ber_qam_awgn_stream(beta: f64, m: usize) -> Result<f64> {
    if !(m == 4 || m == 16 || m == 64 || m == 256) {
        return Err(Error::UnsupportedScheme(format!("{m}-QAM")));
    }
    let sqrt_m = (m as f64).sqrt() as usize;
    let bits_axis = sqrt_m.trailing_zeros();
    let mut acc = 0.0;
    for p in 1..=bits_axis {
        let w = 1usize << (p - 1);
        let upper = sqrt_m - sqrt_m / (1 << p);
        for c in 0..upper {
            let q = c * w / sqrt_m;
            let sign = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
            let weight = w as f64 - ((c * w) as f64 / sqrt_m as f64 + 0.5).floor();
            let arg = (3.0 * ((2 * c + 1) as f64).powi(2) * beta / (m as f64 - 1.0)).sqrt();
            acc += sign * weight * qfunc(arg);
        }
    }
    Ok(acc * 4.0 / (sqrt_m as f64 * (m as f64).log2()))
}

/// Semi-analytical QAM BER without phase noise, averaged over data streams.
pub fn ber_no_pn_qam(inputs: &AnalyticInputs, m: usize) -> Result<f64> {
    inputs.validate()?;
    let beta = inputs.data_beta();
    let mut total = 0.0;
    for b in &beta {
        total += ber_qam_awgn_stream(*b, m)?;
    }
    Ok(total / beta.len() as f64)
}

/// Coherent signal power `|E{e^{jψ} V_kk}|² = e^{-σ²_ψ} |V_kk|²`.
pub fn coherent_signal_power(v_kk: f64, sigma2_psi: f64) -> f64 {
    (-sigma2_psi).exp() * v_kk * v_kk
}

/// Phase-noise self-interference power `κ_k = (1 - e^{-σ²_ψ}) |V_kk|²`.
pub fn interference_power_kappa(v_kk: f64, sigma2_psi: f64) -> f64 {
    -(-sigma2_psi).exp_m1() * v_kk * v_kk
}

/// Combined thermal-noise power after rotation and combining, `σ² ξ_k`.
pub fn combined_noise_power(sigma2: f64, xi_k: f64) -> f64 {
    sigma2 * xi_k
}

/// Rate bound assembled from its three parts:
/// `Σ log₂(1 + ρ² e^{-σ²_ψ}|V|² / (ρ² κ_k + σ² ξ_k))`.
pub fn se_pn_from_components(inputs: &AnalyticInputs) -> Result<f64> {
    inputs.validate()?;
    let rho2 = inputs.rho * inputs.rho;
    Ok(inputs
        .v_diag
        .iter()
        .zip(&inputs.xi)
        .skip(inputs.n_pil)
        .map(|(&v, &xi)| {
            let signal = rho2 * coherent_signal_power(v, inputs.sigma2_psi);
            let impairment = rho2 * interference_power_kappa(v, inputs.sigma2_psi)
                + combined_noise_power(inputs.sigma2, xi);
            (1.0 + signal / impairment).log2()
        })
        .sum())
}

/// Lower bound on the achievable rate under phase noise:
/// `Σ log₂(1 + ρ²|V|² / (ρ²(e^{σ²_ψ}-1)|V|² + σ² e^{σ²_ψ} ξ_k))`.
pub fn se_pn_lower_bound(inputs: &AnalyticInputs) -> Result<f64> {
    inputs.validate()?;
    let rho2 = inputs.rho * inputs.rho;
    let growth = inputs.sigma2_psi.exp();
    let excess = inputs.sigma2_psi.exp_m1();
    Ok(inputs
        .v_diag
        .iter()
        .zip(&inputs.xi)
        .skip(inputs.n_pil)
        .map(|(&v, &xi)| {
            let s = rho2 * v * v;
            (1.0 + s / (excess * s + inputs.sigma2 * growth * xi)).log2()
        })
        .sum())
}

/// Noise-free limit `N_s log₂(e^{σ²_ψ} / (e^{σ²_ψ} - 1))`.
pub fn se_pn_high_snr(sigma2_psi: f64, n_s: usize) -> Result<f64> {
    if !(sigma2_psi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "high-SNR rate limit needs sigma2_psi > 0, got {sigma2_psi}"
        )));
    }
    // log2(e^x / (e^x - 1)) = x/ln2 - log2(e^x - 1)
    Ok(n_s as f64 * (sigma2_psi / std::f64::consts::LN_2 - sigma2_psi.exp_m1().log2()))
}

/// 16-QAM symbol-error probability of one stream under phase noise.
pub fn ser_16qam_pn_stream(beta: f64, sigma2_psi: f64) -> f64 {
    let g = PolarGeometry::qam16();
    let amp = |d: f64| qfunc((d * d * beta / 2.0).sqrt());
    let phase_std = (sigma2_psi + 1.0 / (2.0 * beta)).sqrt();
    let ph = |d: f64| qfunc(d / (2.0 * phase_std));
    0.5 * (amp(g.delta_rho[0]) + 3.0 * amp(g.delta_rho[1])) + ph(g.delta_theta[0]) + ph(g.delta_theta[1])
}

/// Per-ring error terms `(P_e^(r,p), P_e^(b))` of the 16-QAM polar decision
/// regions; their sum over 16 equals [`ser_16qam_pn_stream`].
pub fn qam16_region_terms(sigma2_n: f64, sigma2_psi: f64) -> (f64, f64) {
    let g = PolarGeometry::qam16();
    let sn = sigma2_n.sqrt();
    let pt = (sigma2_psi + sigma2_n).sqrt();
    let inner_outer = 8.0 * (qfunc(g.delta_rho[0] / (2.0 * sn)) + qfunc(g.delta_rho[1] / (2.0 * sn)))
        + 16.0 * qfunc(g.delta_theta[0] / (2.0 * pt));
    let middle = 16.0 * (qfunc(g.delta_rho[1] / (2.0 * sn)) + qfunc(g.delta_theta[1] / (2.0 * pt)));
    (inner_outer, middle)
}

/// 16-QAM BER under phase noise, `(1/(4 N)) Σ P_{e_k}` over data streams.
pub fn ber_16qam_pn(inputs: &AnalyticInputs) -> Result<f64> {
    inputs.validate()?;
    let beta = inputs.data_beta();
    let total: f64 = beta.iter().map(|&b| ser_16qam_pn_stream(b, inputs.sigma2_psi)).sum();
    Ok(total / (4.0 * beta.len() as f64))
}

/// 16-QAM error floor `(Q(δθ1/(2σ_ψ)) + Q(δθ2/(2σ_ψ)))/4`.
pub fn ber_16qam_floor(sigma2_psi: f64) -> f64 {
    if sigma2_psi <= 0.0 {
        return 0.0;
    }
    let g = PolarGeometry::qam16();
    let s = sigma2_psi.sqrt();
    0.25 * (qfunc(g.delta_theta[0] / (2.0 * s)) + qfunc(g.delta_theta[1] / (2.0 * s)))
}

fn check_pqam(m: usize, gamma: usize) -> Result<()> {
    if m < 2 || !m.is_power_of_two() || gamma == 0 || !m.is_multiple_of(gamma) {
        return Err(Error::UnsupportedScheme(format!("{m}-PQAM({gamma})")));
    }
    Ok(())
}

/// `M`-PQAM(`Γ`) BER approximation of one stream with SNR `beta`.
pub fn ber_pqam_pn_stream(beta: f64, sigma2_psi: f64, m: usize, gamma: usize) -> Result<f64> {
    check_pqam(m, gamma)?;
    let g = gamma as f64;
    let amp = qfunc((6.0 * beta / (4.0 * g * g - 1.0)).sqrt());
    let phase = qfunc(PI * g / (m as f64 * (sigma2_psi + 1.0 / (2.0 * beta)).sqrt()));
    Ok(2.0 / (m as f64).log2() * (amp + phase))
}

/// `M`-PQAM(`Γ`) BER from the receive-antenna SNR, averaged over data streams:
/// per stream `(2/log₂M)(Q(√(6|V|²ϝ/((4Γ²-1)ω|ξ|))) + Q(πΓ/(M√(σ²_ψ + ω|ξ|/(2|V|²ϝ)))))`.
pub fn ber_pqam_pn(inputs: &AnalyticInputs, m: usize, gamma: usize) -> Result<f64> {
    inputs.validate()?;
    check_pqam(m, gamma)?;
    let snr = inputs.snr_rx();
    let streams = inputs.n_s() - inputs.n_pil;
    let mut total = 0.0;
    for k in inputs.n_pil..inputs.n_s() {
        let beta = beta_from_snr(inputs.v_diag[k], snr, inputs.xi[k], inputs.omega);
        total += ber_pqam_pn_stream(beta, inputs.sigma2_psi, m, gamma)?;
    }
    Ok(total / streams as f64)
}

/// PQAM floor `(2/log₂M) Q(πΓ/(M σ_ψ))`.
pub fn ber_pqam_floor(sigma2_psi: f64, m: usize, gamma: usize) -> Result<f64> {
    check_pqam(m, gamma)?;
    if sigma2_psi <= 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 / (m as f64).log2() * qfunc(PI * gamma as f64 / (m as f64 * sigma2_psi.sqrt())))
}

/// 4-QAM floor `Q(π/(4σ_ψ))`.
pub fn ber_4qam_floor(sigma2_psi: f64) -> f64 {
    if sigma2_psi <= 0.0 {
        return 0.0;
    }
    qfunc(PI / (4.0 * sigma2_psi.sqrt()))
}

/// Channel-conditioned BER prediction used next to Monte Carlo results.
///
/// Without residual phase noise the exact QAM expression applies; otherwise
/// 4-QAM and PQAM use the polar approximation and 16-QAM the polar-region one.
pub fn semi_analytic_ber(scheme: &Scheme, inputs: &AnalyticInputs) -> Result<f64> {
    match (scheme.kind, scheme.order) {
        (SchemeKind::Qam, m) if inputs.sigma2_psi == 0.0 => ber_no_pn_qam(inputs, m),
        (SchemeKind::Qam, 4) => ber_pqam_pn(inputs, 4, 1),
        (SchemeKind::Qam, 16) => ber_16qam_pn(inputs),
        (SchemeKind::Pqam, m) => ber_pqam_pn(inputs, m, scheme.gamma),
        _ => Err(Error::UnsupportedScheme(scheme.to_string())),
    }
}

/// Infinite-SNR error floor of a scheme; `None` where no closed form exists.
pub fn ber_floor(scheme: &Scheme, sigma2_psi: f64) -> Option<f64> {
    match (scheme.kind, scheme.order) {
        (SchemeKind::Qam, 4) => Some(ber_4qam_floor(sigma2_psi)),
        (SchemeKind::Qam, 16) => Some(ber_16qam_floor(sigma2_psi)),
        (SchemeKind::Pqam, m) => ber_pqam_floor(sigma2_psi, m, scheme.gamma).ok(),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(sigma2: f64, sigma2_psi: f64) -> AnalyticInputs {
        AnalyticInputs {
            v_diag: vec![40.0, 25.0, 12.0, 6.0],
            rho: 1.0 / 12.0,
            xi: vec![36.5, 35.0, 37.2, 36.0],
            omega: 3.1,
            sigma2,
            sigma2_psi,
            n_pil: 0,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn qfunc_values() {
        assert_eq!(qfunc(0.0), 0.5);
        assert!((qfunc(2.4836) - 6.50e-3).abs() < 5e-6);
        assert!((qfunc(-1.7) - (1.0 - qfunc(1.7))).abs() < 1e-15);
        // far tail stays representable
        assert!(qfunc(7.854) > 1e-15 && qfunc(7.854) < 3e-15);
    }

    #[test]
    fn sum_rate_trivia() {
        assert_eq!(sum_rate(&[0.0; 4]), 0.0);
        assert_eq!(sum_rate(&[1.0; 4]), 4.0);
    }

    #[test]
    fn qam4_collapses_to_single_q() {
        for beta in [0.3, 1.0, 7.0, 40.0] {
            let b = ber_qam_awgn_stream(beta, 4).unwrap();
            assert!((b - qfunc(beta.sqrt())).abs() < 1e-15);
        }
        assert_eq!(ber_qam_awgn_stream(1e12, 16).unwrap(), 0.0);
        assert!(ber_qam_awgn_stream(10.0, 8).is_err());
    }

    #[test]
    fn rate_bound_reduces_without_phase_noise() {
        let a = inputs(1e-3, 0.0);
        assert!(rel(se_pn_lower_bound(&a).unwrap(), se_no_pn(&a).unwrap()) < 1e-12);
        let b = inputs(1e-3, 1e-12);
        assert!(rel(se_pn_lower_bound(&b).unwrap(), se_no_pn(&b).unwrap()) < 1e-9);
    }

    #[test]
    fn rate_bound_tends_to_high_snr_limit() {
        let a = inputs(1e-10, 0.1);
        let limit = se_pn_high_snr(0.1, 4).unwrap();
        assert!(rel(se_pn_lower_bound(&a).unwrap(), limit) < 1e-3);
    }

    #[test]
    fn rate_bound_decreases_with_phase_noise() {
        let mut prev = f64::INFINITY;
        for s in [0.0, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3] {
            let r = se_pn_lower_bound(&inputs(1e-3, s)).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn appendix_components_assemble_to_bound() {
        for s in [0.0, 0.01, 0.1] {
            let a = inputs(2e-3, s);
            assert!(rel(se_pn_from_components(&a).unwrap(), se_pn_lower_bound(&a).unwrap()) < 1e-12);
        }
        assert_eq!(interference_power_kappa(3.0, 0.0), 0.0);
        assert!((interference_power_kappa(2.0, 0.1) - 0.3806).abs() < 1e-4);
        assert!(interference_power_kappa(2.0, 5.0) < 4.0);
        assert!((coherent_signal_power(2.0, 0.1) - 4.0 * (-0.1f64).exp()).abs() < 1e-15);
        assert_eq!(combined_noise_power(0.5, 36.0), 18.0);
    }

    #[test]
    fn high_snr_rate_values() {
        assert!((se_pn_high_snr(0.1, 4).unwrap() - 13.574).abs() < 1e-3);
        assert!((se_pn_high_snr(0.01, 4).unwrap() - 26.60).abs() < 5e-3);
        assert!((se_pn_high_snr(0.01, 8).unwrap() - 2.0 * se_pn_high_snr(0.01, 4).unwrap()).abs() < 1e-12);
        assert!(se_pn_high_snr(0.0, 4).is_err());
    }

    #[test]
    fn qam16_floor_values() {
        // (Q(2.4836) + Q(1.0174)) / 4 = (0.006500 + 0.15447) / 4, quoted as 0.0403
        assert!((ber_16qam_floor(0.1) - 0.040242).abs() < 2e-6);
        assert!((ber_16qam_floor(0.1) / 0.0403 - 1.0).abs() < 2e-3);
        let f = ber_16qam_floor(0.01);
        assert!((f / 1.61e-4 - 1.0).abs() < 0.01, "{f}");
        assert_eq!(ber_16qam_floor(0.0), 0.0);
        assert!(ber_16qam_floor(0.02) > ber_16qam_floor(0.01));
        // limit consistency with the per-stream expression
        let a = inputs(1e-30, 0.1);
        assert!(rel(ber_16qam_pn(&a).unwrap(), ber_16qam_floor(0.1)) < 1e-6);
    }

    #[test]
    fn qam16_region_terms_sum_to_ser() {
        for (beta, s) in [(10.0, 0.1), (300.0, 0.01), (1e4, 0.0)] {
            let (rp, b) = qam16_region_terms(1.0 / (2.0 * beta), s);
            assert!(rel((rp + b) / 16.0, ser_16qam_pn_stream(beta, s)) < 1e-12);
        }
    }

    #[test]
    fn pqam_values() {
        let f = ber_pqam_floor(0.1, 16, 8).unwrap();
        assert!((f / 1.7e-7 - 1.0).abs() < 0.03, "{f}");
        assert!((ber_pqam_floor(0.1, 4, 1).unwrap() - 6.50e-3).abs() < 5e-6);
        assert!(ber_pqam_floor(0.1, 16, 8).unwrap() < ber_pqam_floor(0.1, 16, 4).unwrap());
        assert!((ber_4qam_floor(0.1) - 6.50e-3).abs() < 5e-6);
        let f = ber_4qam_floor(0.01);
        assert!(f > 1e-15 && f < 3e-15, "{f}");
        assert!((ber_4qam_floor(1e12) - 0.5).abs() < 1e-6);
        // floor limit of the per-stream expression
        let b = ber_pqam_pn_stream(f64::INFINITY, 0.1, 16, 8).unwrap();
        assert!(rel(b, ber_pqam_floor(0.1, 16, 8).unwrap()) < 1e-12);
        assert_eq!(ber_pqam_pn_stream(f64::INFINITY, 0.0, 16, 8).unwrap(), 0.0);
    }

    #[test]
    fn pqam_snr_and_beta_forms_agree() {
        let a = inputs(3e-4, 0.01);
        let direct = ber_pqam_pn(&a, 16, 4).unwrap();
        let via_beta: f64 = a
            .beta()
            .iter()
            .map(|&b| ber_pqam_pn_stream(b, 0.01, 16, 4).unwrap())
            .sum::<f64>()
            / 4.0;
        assert!(rel(direct, via_beta) < 1e-9);
    }

    #[test]
    fn qam4_via_pqam_substitution() {
        let a = inputs(1e-3, 0.1);
        let s = Scheme::QAM4;
        assert_eq!(semi_analytic_ber(&s, &a).unwrap(), ber_pqam_pn(&a, 4, 1).unwrap());
        assert_eq!(ber_floor(&s, 0.1), Some(ber_pqam_floor(0.1, 4, 1).unwrap()));
    }

    #[test]
    fn pilot_streams_are_excluded() {
        let mut a = inputs(1e-3, 0.0);
        let all = se_no_pn(&a).unwrap();
        a.n_pil = 1;
        let reduced = se_no_pn(&a).unwrap();
        let first = (1.0 + a.beta()[0]).log2();
        assert!((all - first - reduced).abs() < 1e-12);
        a.n_pil = 4;
        assert!(se_no_pn(&a).is_err());
    }
}
