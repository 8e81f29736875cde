//! Unit-energy square QAM and polar QAM (PQAM) constellations.
//!
//! Symbol indices double as bit labels: index `i` carries the bits of `i`,
//! most significant first. Gray coding lives in the index → point placement.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Qam,
    Pqam,
}

/// Constellation family, order and (for PQAM) number of amplitude rings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub order: usize,
    /// Amplitude levels Γ; 1 for QAM entries.
    pub gamma: usize,
}

impl Scheme {
    pub const QAM4: Self = Self { kind: SchemeKind::Qam, order: 4, gamma: 1 };
    pub const QAM16: Self = Self { kind: SchemeKind::Qam, order: 16, gamma: 1 };

    pub fn qam(order: usize) -> Self {
        Self { kind: SchemeKind::Qam, order, gamma: 1 }
    }

    pub fn pqam(order: usize, gamma: usize) -> Self {
        Self { kind: SchemeKind::Pqam, order, gamma }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    pub fn build(&self) -> Result<Constellation> {
        match self.kind {
            SchemeKind::Qam => build_qam(self.order),
            SchemeKind::Pqam => build_pqam(self.order, self.gamma),
        }
    }

    /// Short label used in result files: `QAM`/`PQAM` plus order.
    pub fn modulation_label(&self) -> String {
        match self.kind {
            SchemeKind::Qam => format!("{}-QAM", self.order),
            SchemeKind::Pqam => format!("{}-PQAM", self.order),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SchemeKind::Qam => write!(f, "qam{}", self.order),
            SchemeKind::Pqam => write!(f, "pqam{}-{}", self.order, self.gamma),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// Accepts `qam16`, `16-qam`, `pqam16-4` and `16-pqam(4)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnsupportedScheme(s.to_string());
        let t: String = s.to_ascii_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
        let num = |x: &str| x.parse::<usize>().map_err(|_| bad());
        if let Some(rest) = t.strip_prefix("pqam") {
            let (m, g) = rest.split_once('-').ok_or_else(bad)?;
            return Ok(Self::pqam(num(m)?, num(g)?));
        }
        if let Some(m) = t.strip_prefix("qam") {
            return Ok(Self::qam(num(m)?));
        }
        if let Some((m, rest)) = t.split_once('-') {
            if rest == "qam" {
                return Ok(Self::qam(num(m)?));
            }
            if let Some(g) = rest.strip_prefix("pqam(").and_then(|g| g.strip_suffix(')')) {
                return Ok(Self::pqam(num(m)?, num(g)?));
            }
        }
        Err(bad())
    }
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ring and phase gaps that bound the polar decision regions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGeometry {
    pub delta_rho: Vec<f64>,
    pub delta_theta: Vec<f64>,
}

impl PolarGeometry {
    /// 16-QAM: `δρ1 = 1 - 1/√5`, `δρ2 = 3/√5 - 1`, `δθ1 = δθ4 = π/2`,
    /// `δθ2 = 2 atan(1/3)`, `δθ3 = atan(3) - δθ2/2`.
    pub fn qam16() -> Self {
        let s5 = 5f64.sqrt();
        let dt2 = 2.0 * (1.0f64 / 3.0).atan();
        Self {
            delta_rho: vec![1.0 - 1.0 / s5, 3.0 / s5 - 1.0],
            delta_theta: vec![FRAC_PI_2, dt2, 3f64.atan() - dt2 / 2.0, FRAC_PI_2],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constellation {
    pub scheme: Scheme,
    /// Points indexed by their bit label.
    pub symbols: Vec<C64>,
    pub bits_per_symbol: usize,
    /// Amplitude ring of each point, 0 = innermost.
    pub ring: Vec<usize>,
    /// Position of each point within its ring, counter-clockwise from angle 0.
    pub phase_index: Vec<usize>,
    pub geometry: PolarGeometry,
    polar: Vec<(f64, f64)>,
}

fn gray_inverse(mut g: usize) -> usize {
    let mut i = 0;
    while g != 0 {
        i ^= g;
        g >>= 1;
    }
    i
}

impl Constellation {
    fn finish(scheme: Scheme, symbols: Vec<C64>, geometry: PolarGeometry) -> Self {
        let polar: Vec<(f64, f64)> = symbols.iter().map(|s| (s.norm(), s.arg())).collect();
        let mut radii: Vec<f64> = Vec::new();
        for &(r, _) in &polar {
            if !radii.iter().any(|&q| (q - r).abs() < 1e-9) {
                radii.push(r);
            }
        }
        radii.sort_by(f64::total_cmp);
        let ring: Vec<usize> = polar
            .iter()
            .map(|&(r, _)| radii.iter().position(|&q| (q - r).abs() < 1e-9).unwrap())
            .collect();
        let mut phase_index = vec![0; symbols.len()];
        for ring_id in 0..radii.len() {
            let mut members: Vec<usize> = (0..symbols.len()).filter(|&i| ring[i] == ring_id).collect();
            members.sort_by(|&a, &b| {
                polar[a].1.rem_euclid(TAU).total_cmp(&polar[b].1.rem_euclid(TAU))
            });
            for (pos, &i) in members.iter().enumerate() {
                phase_index[i] = pos;
            }
        }
        Self {
            bits_per_symbol: scheme.bits_per_symbol(),
            scheme,
            symbols,
            ring,
            phase_index,
            geometry,
            polar,
        }
    }

    pub fn order(&self) -> usize {
        self.symbols.len()
    }

    /// `(magnitude, phase)` of every point.
    pub fn polar(&self) -> &[(f64, f64)] {
        &self.polar
    }

    pub fn mean_energy(&self) -> f64 {
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.order() as f64
    }

    /// Bits of symbol `index`, most significant first.
    pub fn bits_of(&self, index: usize) -> impl Iterator<Item = u8> + '_ {
        (0..self.bits_per_symbol)
            .rev()
            .map(move |b| ((index >> b) & 1) as u8)
    }

    pub fn bit_string(&self, index: usize) -> String {
        self.bits_of(index).map(|b| char::from(b'0' + b)).collect()
    }

    /// CSV with columns `index,bits,re,im,ring,phase_index`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "bits", "re", "im", "ring", "phase_index"])?;
        for (i, s) in self.symbols.iter().enumerate() {
            w.write_record([
                i.to_string(),
                self.bit_string(i),
                format!("{:.17e}", s.re),
                format!("{:.17e}", s.im),
                self.ring[i].to_string(),
                self.phase_index[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Square Gray-coded QAM with unit mean energy; `m ∈ {4, 16}`.
///
/// 4-QAM is the PQAM(4, 1) point set rotated by π/4 so both code paths agree.
pub fn build_qam(m: usize) -> Result<Constellation> {
    match m {
        4 => {
            let base = build_pqam(4, 1)?;
            let rot = C64::from_polar(1.0, FRAC_PI_4);
            let symbols = base.symbols.iter().map(|s| s * rot).collect();
            let geometry = PolarGeometry {
                delta_rho: Vec::new(),
                delta_theta: vec![FRAC_PI_2],
            };
            Ok(Constellation::finish(Scheme::QAM4, symbols, geometry))
        }
        16 => {
            let side = 4;
            let half_bits = 2;
            let scale = 1.0 / 10f64.sqrt();
            let level = |g: usize| (2.0 * gray_inverse(g) as f64 - (side - 1) as f64) * scale;
            let symbols = (0..m)
                .map(|i| C64::new(level(i >> half_bits), level(i & (side - 1))))
                .collect();
            Ok(Constellation::finish(Scheme::QAM16, symbols, PolarGeometry::qam16()))
        }
        other => Err(Error::UnsupportedScheme(format!("{other}-QAM"))),
    }
}

/// `M`-PQAM(`Γ`): Γ rings with radii ∝ {1, 3, …, 2Γ-1}, `M/Γ` shared phases
/// spaced `2πΓ/M` apart, Gray-coded amplitude bits followed by phase bits.
pub fn build_pqam(m: usize, gamma: usize) -> Result<Constellation> {
    let invalid = || Error::UnsupportedScheme(format!("{m}-PQAM({gamma})"));
    if m < 2 || !m.is_power_of_two() || gamma == 0 || !gamma.is_power_of_two() || !m.is_multiple_of(gamma) {
        return Err(invalid());
    }
    let phases = m / gamma;
    let phase_bits = phases.trailing_zeros() as usize;
    let g = gamma as f64;
    // mean of (2i-1)² over i = 1..Γ is (4Γ² - 1)/3
    let unit = 1.0 / ((4.0 * g * g - 1.0) / 3.0).sqrt();
    let symbols = (0..m)
        .map(|i| {
            let a = gray_inverse(i >> phase_bits);
            let p = gray_inverse(i & (phases - 1));
            C64::from_polar((2 * a + 1) as f64 * unit, TAU * p as f64 / phases as f64)
        })
        .collect();
    let geometry = PolarGeometry {
        delta_rho: if gamma > 1 { vec![2.0 * unit] } else { Vec::new() },
        delta_theta: vec![TAU / phases as f64],
    };
    Ok(Constellation::finish(Scheme::pqam(m, gamma), symbols, geometry))
}

/// Maps a bit stream (one `0`/`1` per entry) onto symbol indices.
pub fn map_bits(c: &Constellation, bits: &[u8]) -> Result<Vec<usize>> {
    let k = c.bits_per_symbol;
    if !bits.len().is_multiple_of(k) {
        return Err(Error::LengthMismatch {
            left: bits.len(),
            right: k * bits.len().div_ceil(k),
        });
    }
    Ok(bits
        .chunks_exact(k)
        .map(|chunk| chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize))
        .collect())
}

pub fn demap_symbols(c: &Constellation, indices: &[usize]) -> Result<Vec<u8>> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= c.order()) {
        return Err(Error::InvalidParameter(format!(
            "symbol index {bad} outside a {}-point constellation",
            c.order()
        )));
    }
    Ok(indices.iter().flat_map(|&i| c.bits_of(i)).collect())
}

/// Angle difference wrapped to `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_schemes() -> Vec<Constellation> {
        let mut v = vec![build_qam(4).unwrap(), build_qam(16).unwrap()];
        for (m, g) in [(4, 1), (4, 2), (8, 2), (16, 1), (16, 2), (16, 4), (16, 8), (16, 16), (64, 8)] {
            v.push(build_pqam(m, g).unwrap());
        }
        v
    }

    #[test]
    fn unit_mean_energy() {
        for c in all_schemes() {
            assert!((c.mean_energy() - 1.0).abs() < 1e-12, "{}", c.scheme);
        }
    }

    #[test]
    fn qam4_points() {
        let c = build_qam(4).unwrap();
        for s in &c.symbols {
            assert!((s.re.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
            assert!((s.im.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
        }
        // same point set as PQAM(4, 1) up to rotation
        let p = build_pqam(4, 1).unwrap();
        assert!(p.symbols.iter().all(|s| (s.norm() - 1.0).abs() < 1e-15));
    }

    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn qam16_levels_and_rings() {
        let c = build_qam(16).unwrap();
        let levels = [-3.0, -1.0, 1.0, 3.0].map(|x: f64| x / 10f64.sqrt());
        for s in &c.symbols {
            assert!(levels.iter().any(|l| (l - s.re).abs() < 1e-15));
            assert!(levels.iter().any(|l| (l - s.im).abs() < 1e-15));
        }
        let mut radii: Vec<f64> = c.symbols.iter().map(|s| s.norm()).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let expect = [0.2f64.sqrt(), 1.0, 1.8f64.sqrt()];
        assert_eq!(radii.len(), 3);
        for (r, e) in radii.iter().zip(expect) {
            assert!((r - e).abs() < 1e-12);
        }
        assert!((expect[0] - 0.4472).abs() < 1e-4 && (expect[2] - 1.3416).abs() < 1e-4);
        assert_eq!(c.ring.iter().filter(|&&r| r == 1).count(), 8);
    }

    #[test]
    fn qam_grid_neighbours_differ_in_one_bit() {
        for m in [4, 16] {
            let c = build_qam(m).unwrap();
            let dmin = c
                .symbols
                .iter()
                .enumerate()
                .flat_map(|(i, a)| c.symbols[i + 1..].iter().map(move |b| (a - b).norm()))
                .fold(f64::INFINITY, f64::min);
            for i in 0..m {
                for j in 0..m {
                    if i != j && ((c.symbols[i] - c.symbols[j]).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "{m}-QAM {i} vs {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn pqam_structure() {
        let c = build_pqam(16, 4).unwrap();
        let unit = 1.0 / 21f64.sqrt();
        for (i, s) in c.symbols.iter().enumerate() {
            let r = (2 * c.ring[i] + 1) as f64 * unit;
            assert!((s.norm() - r).abs() < 1e-12);
        }
        assert_eq!(c.ring.iter().max(), Some(&3));
        assert_eq!(c.phase_index.iter().max(), Some(&3));

        let c8 = build_pqam(16, 8).unwrap();
        assert_eq!(c8.ring.iter().max(), Some(&7));
        assert!((c8.geometry.delta_theta[0] - PI).abs() < 1e-15);
    }

    #[test]
    fn pqam_ring_gaps_uniform() {
        for (m, g) in [(16, 4), (16, 8), (64, 8)] {
            let c = build_pqam(m, g).unwrap();
            let gap = 2.0 / ((4.0 * (g * g) as f64 - 1.0) / 3.0).sqrt();
            let mut radii: Vec<f64> = c.symbols.iter().map(|s| s.norm()).collect();
            radii.sort_by(f64::total_cmp);
            radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            for w in radii.windows(2) {
                assert!((w[1] - w[0] - gap).abs() < 1e-12);
            }
            assert!((c.geometry.delta_rho[0] - gap).abs() < 1e-15);
        }
    }

    #[test]
    fn pqam_gray_property() {
        for (m, g) in [(16, 1), (16, 4), (16, 8), (8, 2)] {
            let c = build_pqam(m, g).unwrap();
            let phases = m / g;
            for i in 0..m {
                for j in 0..m {
                    let same_ring = c.ring[i] == c.ring[j];
                    let same_phase = c.phase_index[i] == c.phase_index[j];
                    let phase_adj = same_ring
                        && phases > 2
                        && (c.phase_index[i] + 1) % phases == c.phase_index[j];
                    let ring_adj = same_phase && c.ring[i] + 1 == c.ring[j];
                    if phase_adj || ring_adj {
                        assert_eq!((i ^ j).count_ones(), 1, "PQAM({m},{g}) {i} vs {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_orders_rejected() {
        assert!(build_qam(8).is_err());
        assert!(build_qam(64).is_err());
        assert!(build_pqam(16, 3).is_err());
        assert!(build_pqam(12, 4).is_err());
        assert!(build_pqam(16, 32).is_err());
    }

    #[test]
    fn polar_geometry_qam16_values() {
        let g = PolarGeometry::qam16();
        let s5 = 5f64.sqrt();
        assert!((g.delta_rho[0] - (1.0 - 1.0 / s5)).abs() < 1e-12);
        assert!((g.delta_rho[1] - (3.0 / s5 - 1.0)).abs() < 1e-12);
        assert!((g.delta_rho[0] - 0.5528).abs() < 1e-4);
        assert!((g.delta_rho[1] - 0.3416).abs() < 1e-4);
        assert!((g.delta_theta[1] - 0.6435).abs() < 1e-4);
        assert!(g.delta_rho[0] > g.delta_rho[1]);
        assert!(g.delta_theta[2] > g.delta_theta[1]);
        // the gaps are the actual distances between adjacent 16-QAM rings/phases
        let c = build_qam(16).unwrap();
        let mid: Vec<f64> = (0..16)
            .filter(|&i| c.ring[i] == 1)
            .map(|i| c.polar()[i].1.rem_euclid(TAU))
            .collect();
        let mut mid = mid;
        mid.sort_by(f64::total_cmp);
        assert!((mid[1] - mid[0] - g.delta_theta[2]).abs() < 1e-12 || (mid[1] - mid[0] - g.delta_theta[1]).abs() < 1e-12);
    }

    #[test]
    fn all_zero_bits_map_to_first_symbol() {
        let c = build_qam(16).unwrap();
        assert_eq!(map_bits(&c, &[0; 12]).unwrap(), vec![0, 0, 0]);
        assert!(map_bits(&c, &[0; 5]).is_err());
    }

    #[test]
    fn labels_are_a_bijection() {
        for c in all_schemes() {
            let mut seen = std::collections::HashSet::new();
            for i in 0..c.order() {
                assert!(seen.insert(c.bit_string(i)));
            }
        }
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("qam16".parse::<Scheme>().unwrap(), Scheme::QAM16);
        assert_eq!("16-QAM".parse::<Scheme>().unwrap(), Scheme::QAM16);
        assert_eq!("pqam16-8".parse::<Scheme>().unwrap(), Scheme::pqam(16, 8));
        assert_eq!("16-PQAM(4)".parse::<Scheme>().unwrap(), Scheme::pqam(16, 4));
        assert!("psk8".parse::<Scheme>().is_err());
        assert_eq!(Scheme::pqam(16, 4).to_string(), "pqam16-4");
    }

    #[test]
    fn csv_dump_has_one_row_per_point() {
        let c = build_pqam(16, 4).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.starts_with("index,bits,re,im,ring,phase_index\n0,0000,"));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn map_demap_round_trip(bits in proptest::collection::vec(0u8..2, 0..400), which in 0usize..4) {
            let c = [build_qam(4), build_qam(16), build_pqam(16, 4), build_pqam(16, 8)][which].as_ref().unwrap().clone();
            let k = c.bits_per_symbol;
            let bits = &bits[..bits.len() / k * k];
            let idx = map_bits(&c, bits).unwrap();
            prop_assert_eq!(demap_symbols(&c, &idx).unwrap(), bits.to_vec());
        }
    }
}
