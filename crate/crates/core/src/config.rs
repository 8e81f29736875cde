//! Experiment files: TOML with `[channel]`, `[pn]`, `[sweep]` and `[altmin]`
//! sections, plus `key=value` overrides.
//!
//! ```toml
//! experiment_id = "strong-16qam"
//! mode = "ber"
//! n_s = 4
//! n_rf = 4
//!
//! [pn]
//! regimes = ["strong", "medium"]
//!
//! [sweep]
//! snr_db = "0:5:40"
//! schemes = ["qam16"]
//! detectors = ["euc", "pm"]
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::detection::DetectorKind;
use crate::modulation::Scheme;
use crate::montecarlo::ExperimentConfig;
use crate::phasenoise::{PnConfig, PnRegime};
use crate::precoding::AltMinOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Ber,
    Se,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ber => "ber",
            Mode::Se => "se",
        })
    }
}

/// SNR grid given either as a list or as `start:step:stop` (stop inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range(String),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::List(v) => Ok(v.clone()),
            Grid::Range(s) => parse_range(s),
        }
    }
}

pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| {
        p.parse::<f64>()
            .map_err(|_| Error::Config(format!("`{s}`: `{p}` is not a number")))
    };
    let (start, step, stop) = match parts.as_slice() {
        [a] => return Ok(vec![num(a)?]),
        [a, b] => (num(a)?, 1.0, num(b)?),
        [a, st, b] => (num(a)?, num(st)?, num(b)?),
        _ => return Err(Error::Config(format!("`{s}`: expected start:step:stop"))),
    };
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Config(format!("`{s}`: need step > 0 and stop >= start")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(Error::Config(format!("`{s}`: grid has more than 100000 points")));
    }
    // integer multiples avoid drift, round to tame 0.1-style steps
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PnSection {
    /// Named levels: strong, medium, low, off.
    pub regimes: Option<Vec<PnRegime>>,
    /// Explicit total variances `σ²_ψ`.
    pub sigma2_psi: Option<Vec<f64>>,
    /// Share of the variance on the transmit oscillator path.
    pub tx_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub snr_db: Option<Grid>,
    pub schemes: Option<Vec<String>>,
    pub detectors: Option<Vec<String>>,
    pub n_channels: Option<usize>,
    pub n_symbols: Option<usize>,
    pub min_bit_errors: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment_id: Option<String>,
    pub mode: Option<Mode>,
    pub n_s: Option<usize>,
    pub n_rf: Option<usize>,
    pub n_pil: Option<usize>,
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub pn: PnSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub altmin: AltMinSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub n_tx: Option<usize>,
    pub n_rx: Option<usize>,
    pub n_clusters: Option<usize>,
    pub n_rays: Option<usize>,
    pub angular_spread_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AltMinSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Every key a file or an override may set, as `section.key` or `key`.
pub const KNOWN_KEYS: &[&str] = &[
    "experiment_id",
    "mode",
    "n_s",
    "n_rf",
    "n_pil",
    "master_seed",
    "channel.n_tx",
    "channel.n_rx",
    "channel.n_clusters",
    "channel.n_rays",
    "channel.angular_spread_deg",
    "pn.regimes",
    "pn.sigma2_psi",
    "pn.tx_fraction",
    "sweep.snr_db",
    "sweep.schemes",
    "sweep.detectors",
    "sweep.n_channels",
    "sweep.n_symbols",
    "sweep.min_bit_errors",
    "altmin.tol",
    "altmin.max_iter",
];

/// A loaded experiment together with its mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub mode: Mode,
    pub config: ExperimentConfig,
}

fn field_err(field: &str, e: impl fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {e}"))
}

fn resolve_key(key: &str) -> Result<&'static str> {
    if let Some(k) = KNOWN_KEYS.iter().find(|k| **k == key) {
        return Ok(k);
    }
    let hits: Vec<&&str> = KNOWN_KEYS
        .iter()
        .filter(|k| k.rsplit('.').next() == Some(key))
        .collect();
    match hits.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::Config(format!("override `{key}` does not name a config key"))),
        _ => Err(Error::Config(format!("override `{key}` is ambiguous"))),
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("probe key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies one `key=value` override to a parsed document.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let path = resolve_key(key.trim())?;
    let mut value = parse_value(raw.trim());
    // bare lists of names arrive as strings
    if matches!(path, "pn.regimes" | "sweep.schemes" | "sweep.detectors") {
        if let toml::Value::String(s) = &value {
            value = toml::Value::Array(s.split(',').map(|x| toml::Value::String(x.trim().into())).collect());
        }
    }
    if path == "pn.sigma2_psi" {
        if let toml::Value::Float(_) | toml::Value::Integer(_) = value {
            value = toml::Value::Array(vec![value]);
        }
    }
    let mut table = doc;
    let mut parts = path.split('.').peekable();
    while let Some(p) = parts.next() {
        if parts.peek().is_none() {
            table.insert(p.to_string(), value);
            break;
        }
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` is not a section")))?;
    }
    Ok(())
}

/// Parses a config document; `origin` names it in diagnostics.
pub fn parse_experiment(text: &str, origin: &str, overrides: &[String]) -> Result<Experiment> {
    // the file alone first, so structural errors carry its line numbers
    toml::from_str::<ConfigFile>(text)
        .map_err(|e: toml::de::Error| Error::Config(format!("{origin}: {e}")))?;
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("{origin}: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o).map_err(|e| Error::Config(format!("{origin}: {}", strip_config(e))))?;
        // an override of one pn form replaces the other
        let key = o.split_once('=').map(|(k, _)| k.trim()).unwrap_or("");
        if let Ok(path) = resolve_key(key) {
            let other = match path {
                "pn.regimes" => Some("sigma2_psi"),
                "pn.sigma2_psi" => Some("regimes"),
                _ => None,
            };
            if let (Some(other), Some(pn)) = (other, doc.get_mut("pn").and_then(|v| v.as_table_mut())) {
                pn.remove(other);
            }
        }
    }
    let file: ConfigFile = doc
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{origin}: {e}")))?;
    file.into_experiment()
        .map_err(|e| Error::Config(format!("{origin}: {}", strip_config(e))))
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

pub fn load_experiment(path: &Path, overrides: &[String]) -> Result<Experiment> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_experiment(&text, &path.display().to_string(), overrides)
}

impl ConfigFile {
    pub fn into_experiment(self) -> Result<Experiment> {
        let d = ExperimentConfig::default();
        let dc = ChannelParams::default();
        let channel = ChannelParams {
            n_tx: self.channel.n_tx.unwrap_or(dc.n_tx),
            n_rx: self.channel.n_rx.unwrap_or(dc.n_rx),
            n_clusters: self.channel.n_clusters.unwrap_or(dc.n_clusters),
            n_rays: self.channel.n_rays.unwrap_or(dc.n_rays),
            angular_spread_deg: self.channel.angular_spread_deg.unwrap_or(dc.angular_spread_deg),
        };
        channel.validate().map_err(|e| field_err("channel", e))?;

        let tx_fraction = self.pn.tx_fraction.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&tx_fraction) {
            return Err(field_err("pn.tx_fraction", "must lie in [0, 1]"));
        }
        let totals: Vec<(f64, Option<PnRegime>)> = match (&self.pn.regimes, &self.pn.sigma2_psi) {
            (Some(_), Some(_)) => {
                return Err(field_err("pn", "give either `regimes` or `sigma2_psi`, not both"))
            }
            (Some(r), None) => r
                .iter()
                .map(|r| {
                    r.sigma2_psi()
                        .map(|s| (s, Some(*r)))
                        .ok_or_else(|| field_err("pn.regimes", "`custom` needs `sigma2_psi`"))
                })
                .collect::<Result<_>>()?,
            (None, Some(v)) => v.iter().map(|s| (*s, None)).collect(),
            (None, None) => d.pn.iter().map(|p| (p.sigma2_psi(), Some(p.regime))).collect(),
        };
        let mut pn = Vec::with_capacity(totals.len());
        for (total, regime) in totals {
            let mut p = PnConfig::from_total(total).map_err(|e| field_err("pn.sigma2_psi", e))?;
            p.sigma2_tx = total * tx_fraction;
            p.sigma2_rx = total - p.sigma2_tx;
            if let Some(r) = regime {
                p.regime = r;
            }
            pn.push(p);
        }

        let snr_db = match &self.sweep.snr_db {
            Some(g) => g.values().map_err(|e| field_err("sweep.snr_db", strip_config(e)))?,
            None => d.snr_db.clone(),
        };
        let schemes = match &self.sweep.schemes {
            Some(v) => v
                .iter()
                .map(|s| Scheme::from_str(s).and_then(|s| s.build().map(|_| s)))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| field_err("sweep.schemes", e))?,
            None => d.schemes.clone(),
        };
        let detectors = match &self.sweep.detectors {
            Some(v) => v
                .iter()
                .map(|s| DetectorKind::from_str(s))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| field_err("sweep.detectors", e))?,
            None => d.detectors.clone(),
        };
        let dalt = AltMinOptions::default();
        let config = ExperimentConfig {
            experiment_id: self.experiment_id.unwrap_or(d.experiment_id),
            channel,
            pn,
            snr_db,
            schemes,
            detectors,
            n_s: self.n_s.unwrap_or(d.n_s),
            n_rf: self.n_rf.unwrap_or(d.n_rf),
            n_pil: self.n_pil.unwrap_or(d.n_pil),
            n_channels: self.sweep.n_channels.unwrap_or(d.n_channels),
            n_symbols: self.sweep.n_symbols.unwrap_or(d.n_symbols),
            master_seed: self.master_seed.unwrap_or(d.master_seed),
            min_bit_errors: self.sweep.min_bit_errors.unwrap_or(d.min_bit_errors),
            altmin: AltMinOptions {
                tol: self.altmin.tol.unwrap_or(dalt.tol),
                max_iter: self.altmin.max_iter.unwrap_or(dalt.max_iter),
            },
        };
        check_fields(&config)?;
        Ok(Experiment {
            mode: self.mode.unwrap_or_default(),
            config,
        })
    }
}

/// Semantic checks reported against the file's field names.
fn check_fields(c: &ExperimentConfig) -> Result<()> {
    if c.n_s == 0 {
        return Err(field_err("n_s", "must be >= 1"));
    }
    if c.n_rf < c.n_s {
        return Err(field_err("n_rf", format!("{} is smaller than n_s = {}", c.n_rf, c.n_s)));
    }
    if c.n_rf > c.channel.n_tx.min(c.channel.n_rx) {
        return Err(field_err("n_rf", format!("{} exceeds the array sizes", c.n_rf)));
    }
    if c.n_pil >= c.n_s {
        return Err(field_err("n_pil", format!("{} must be smaller than n_s = {}", c.n_pil, c.n_s)));
    }
    if c.snr_db.is_empty() {
        return Err(field_err("sweep.snr_db", "grid is empty"));
    }
    if c.pn.is_empty() {
        return Err(field_err("pn", "no phase-noise setting given"));
    }
    if c.schemes.is_empty() {
        return Err(field_err("sweep.schemes", "no scheme given"));
    }
    if c.detectors.is_empty() {
        return Err(field_err("sweep.detectors", "no detector given"));
    }
    if c.n_channels == 0 {
        return Err(field_err("sweep.n_channels", "must be >= 1"));
    }
    if c.n_symbols == 0 {
        return Err(field_err("sweep.n_symbols", "must be >= 1"));
    }
    if !(c.altmin.tol > 0.0) || c.altmin.max_iter == 0 {
        return Err(field_err("altmin", "tol must be > 0 and max_iter >= 1"));
    }
    c.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
experiment_id = "t"
mode = "se"
n_s = 4
n_rf = 4

[channel]
n_tx = 64

[pn]
regimes = ["strong", "off"]

[sweep]
snr_db = "0:5:20"
schemes = ["qam16", "16-PQAM(4)"]
detectors = ["euc", "PM-D"]
n_channels = 10
"#;

    #[test]
    fn parses_sections() {
        let e = parse_experiment(DOC, "doc", &[]).unwrap();
        assert_eq!(e.mode, Mode::Se);
        let c = e.config;
        assert_eq!(c.channel.n_tx, 64);
        assert_eq!(c.channel.n_rx, 36);
        assert_eq!(c.snr_db, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(c.pn[0].sigma2_psi(), 0.1);
        assert_eq!(c.pn[0].regime, PnRegime::Strong);
        assert_eq!(c.pn[1].sigma2_psi(), 0.0);
        assert_eq!(c.schemes, vec![Scheme::QAM16, Scheme::pqam(16, 4)]);
        assert_eq!(c.detectors, vec![DetectorKind::Euc, DetectorKind::Pm]);
        assert_eq!(c.n_channels, 10);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:5:40").unwrap().len(), 9);
        let g = parse_range("-10:2.5:40").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(*g.last().unwrap(), 40.0);
        assert_eq!(parse_range("0:0.1:0.3").unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
        assert_eq!(parse_range("7").unwrap(), vec![7.0]);
        assert!(parse_range("5:1:0").is_err());
        assert!(parse_range("0:0:5").is_err());
        assert!(parse_range("a:1:2").is_err());
    }

    #[test]
    fn overrides_replace_values() {
        let o = vec![
            "snr_db=30:5:40".to_string(),
            "sweep.n_channels=3".to_string(),
            "pn.sigma2_psi=0.05".to_string(),
            "schemes=qam4,pqam16-8".to_string(),
            "master_seed=99".to_string(),
        ];
        let c = parse_experiment(DOC, "doc", &o).unwrap().config;
        assert_eq!(c.snr_db, vec![30.0, 35.0, 40.0]);
        assert_eq!(c.n_channels, 3);
        assert_eq!(c.pn.len(), 1);
        assert_eq!(c.pn[0].sigma2_psi(), 0.05);
        assert_eq!(c.schemes, vec![Scheme::QAM4, Scheme::pqam(16, 8)]);
        assert_eq!(c.master_seed, 99);
    }

    #[test]
    fn diagnostics_name_the_problem() {
        let e = parse_experiment(DOC, "doc", &["bogus=1".into()]).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = parse_experiment("n_s = 4\n[sweep]\nnchannels = 3\n", "f.toml", &[]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("f.toml") && msg.contains("line 3") && msg.contains("nchannels"), "{msg}");
        let e = parse_experiment("n_s = 4\nn_pil = 4\n", "f.toml", &[]).unwrap_err();
        assert!(e.to_string().contains("n_pil"), "{e}");
        let e = parse_experiment("[sweep]\nschemes = [\"qam8\"]\n", "f.toml", &[]).unwrap_err();
        assert!(e.to_string().contains("sweep.schemes"), "{e}");
        let e = parse_experiment("n_s = \"four\"\n", "f.toml", &[]).unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn tx_fraction_splits_variance() {
        let c = parse_experiment("[pn]\nsigma2_psi = [0.1]\ntx_fraction = 0.25\n", "d", &[])
            .unwrap()
            .config;
        assert!((c.pn[0].sigma2_tx - 0.025).abs() < 1e-15);
        assert!((c.pn[0].sigma2_psi() - 0.1).abs() < 1e-15);
    }
}
