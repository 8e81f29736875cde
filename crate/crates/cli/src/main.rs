//! `hpgpn` command-line front end.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hpgpn::config::{parse_experiment, Experiment, Mode};
use hpgpn::dump::{dump_experiment, read_dump};
use hpgpn::modulation::Scheme;
use hpgpn::montecarlo::{
    analytic_sweep, realization_from_channel, received_scatter, run_ber_sweep, run_se_sweep,
    ExperimentConfig,
};
use hpgpn::phasenoise::{PnConfig, PnRegime};
use hpgpn::validate::{faulty_sampler, reference_sampler, run_suite, SuiteOptions};
use hpgpn::Error;

const PRESETS: &[(&str, &str)] = &[
    ("paper-fig4", include_str!("../presets/paper-fig4.toml")),
    ("paper-fig5", include_str!("../presets/paper-fig5.toml")),
    ("paper-fig6", include_str!("../presets/paper-fig6.toml")),
    ("paper-fig7", include_str!("../presets/paper-fig7.toml")),
    ("paper-fig8", include_str!("../presets/paper-fig8.toml")),
    ("paper-fig9", include_str!("../presets/paper-fig9.toml")),
];

#[derive(Parser)]
#[command(name = "hpgpn", version, about = "Hybrid-precoded MIMO links under common-LO Gaussian phase noise")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment, see `hpgpn presets`.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// `key=value` applied on top of the experiment, e.g. `snr_db=0:5:40`.
    #[arg(long = "override", short = 'O', global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, env = "HPGPN_OUT", default_value = "results")]
    out: PathBuf,
    /// Worker threads: a count or `auto`.
    #[arg(long, global = true, default_value = "auto", value_parser = parse_workers)]
    workers: Workers,
    /// Replaces the experiment's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy)]
struct Workers(Option<usize>);

fn parse_workers(s: &str) -> Result<Workers, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Workers(None));
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Workers(Some(n))),
        _ => Err(format!("expected a positive count or `auto`, got `{s}`")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bit-error-rate sweep: Monte Carlo and semi-analytical CSVs.
    Ber,
    /// Spectral-efficiency sweep.
    Se,
    /// Constellation points, optionally with a received scatter.
    Constellation(ConstellationArgs),
    /// Property checks plus the quick acceptance set; writes a JSON report.
    Validate(ValidateArgs),
    /// Semi-analytical curves averaged over the channels of a dump file.
    Analytic(AnalyticArgs),
    /// Writes the experiment's channel realisations to a binary dump.
    DumpChannels(DumpArgs),
    /// Lists the built-in experiments.
    Presets,
}

#[derive(Args)]
struct ConstellationArgs {
    /// `qam4`, `qam16`, `pqam16-4`, ...
    #[arg(long, default_value = "qam16")]
    scheme: String,
    /// Also write a received scatter of one data stream.
    #[arg(long)]
    scatter: bool,
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    snr_db: f64,
    /// Phase-noise level of the scatter.
    #[arg(long, default_value = "medium")]
    regime: String,
    #[arg(long, default_value_t = 2000)]
    n_symbols: usize,
    #[arg(long, default_value_t = 0)]
    stream: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Property checks only.
    #[arg(long)]
    no_acceptance: bool,
    #[arg(long, hide = true, value_enum)]
    inject_fault: Option<Fault>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    PnSign,
}

#[derive(Args)]
struct AnalyticArgs {
    /// Channel dump written by `dump-channels`.
    #[arg(long)]
    dump: PathBuf,
}

#[derive(Args)]
struct DumpArgs {
    /// Number of realisations; defaults to the experiment's channel count.
    #[arg(long)]
    count: Option<usize>,
    /// Include the hybrid precoders of each realisation.
    #[arg(long)]
    with_precoders: bool,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::UnsupportedScheme(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Ber => sweep(g, Mode::Ber),
        Command::Se => sweep(g, Mode::Se),
        Command::Constellation(a) => constellation(g, a),
        Command::Validate(a) => validate(g, a),
        Command::Analytic(a) => analytic(g, a),
        Command::DumpChannels(a) => dump_channels(g, a),
        Command::Presets => {
            for (name, text) in PRESETS {
                let about = text.lines().next().unwrap_or("").trim_start_matches("# ");
                println!("{name:<12} {about}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn preset_text(name: &str) -> CliResult<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Failure::Usage(format!("unknown preset `{name}` (known: {})", known.join(", ")))
        })
}

/// The experiment named by `--config`/`--preset`, with overrides and seed applied.
fn experiment(g: &Global) -> CliResult<Option<Experiment>> {
    let mut exp = match (&g.config, &g.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            parse_experiment(&text, &path.display().to_string(), &g.overrides)?
        }
        (None, Some(name)) => parse_experiment(preset_text(name)?, name, &g.overrides)?,
        (None, None) => {
            if !g.overrides.is_empty() {
                return Err(Failure::Usage("--override needs --config or --preset".into()));
            }
            return Ok(None);
        }
    };
    if let Some(seed) = g.seed {
        exp.config.master_seed = seed;
    }
    Ok(Some(exp))
}

fn required(g: &Global) -> CliResult<Experiment> {
    experiment(g)?.ok_or_else(|| Failure::Usage("an experiment is required: pass --config or --preset".into()))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn sweep(g: &Global, mode: Mode) -> CliResult<ExitCode> {
    let exp = required(g)?;
    if exp.mode != mode {
        return Err(Failure::Usage(format!(
            "experiment `{}` has mode = \"{}\", run it with `hpgpn {}`",
            exp.config.experiment_id, exp.mode, exp.mode
        )));
    }
    let cfg = &exp.config;
    let res = match mode {
        Mode::Ber => run_ber_sweep(cfg, g.workers.0)?,
        Mode::Se => run_se_sweep(cfg, g.workers.0)?,
    };
    if res.resampled_channels > 0 {
        eprintln!("note: {} degenerate channel draws were resampled", res.resampled_channels);
    }
    if !res.deviations.is_empty() {
        eprintln!(
            "note: {} simulated points lie outside the 99% interval of their semi-analytical value, see {}.json",
            res.deviations.len(),
            cfg.experiment_id
        );
    }
    report_written(&res.write_files(&g.out, &cfg.experiment_id)?);
    Ok(ExitCode::SUCCESS)
}

fn constellation(g: &Global, a: &ConstellationArgs) -> CliResult<ExitCode> {
    let scheme = Scheme::from_str(&a.scheme)?;
    let points = scheme.build().map_err(|e| match e {
        Error::InvalidParameter(m) => Failure::Usage(format!("unsupported scheme `{}`: {m}", a.scheme)),
        other => other.into(),
    })?;
    std::fs::create_dir_all(&g.out)?;
    let path = g.out.join(format!("constellation_{scheme}.csv"));
    points.write_csv(BufWriter::new(File::create(&path)?))?;
    let mut written = vec![path];
    if a.scatter {
        let regime = PnRegime::from_str(&a.regime).map_err(|e| Failure::Usage(e.to_string()))?;
        let pn = PnConfig::from_regime(regime).map_err(|e| Failure::Usage(e.to_string()))?;
        let mut cfg = experiment(g)?.map(|e| e.config).unwrap_or_default();
        cfg.n_symbols = a.n_symbols;
        if let Some(seed) = g.seed {
            cfg.master_seed = seed;
        }
        let pts = received_scatter(&cfg, &scheme, &pn, a.snr_db, a.stream)?;
        let path = g.out.join(format!("scatter_{scheme}_{regime}_{}dB.csv", a.snr_db));
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
        w.write_record(["sample", "tx_index", "tx_re", "tx_im", "rx_re", "rx_im"])
            .map_err(Error::from)?;
        for (i, p) in pts.iter().enumerate() {
            let tx = points.symbols[p.tx_index];
            w.write_record([
                i.to_string(),
                p.tx_index.to_string(),
                format!("{:.17e}", tx.re),
                format!("{:.17e}", tx.im),
                format!("{:.17e}", p.rx.re),
                format!("{:.17e}", p.rx.im),
            ])
            .map_err(Error::from)?;
        }
        w.flush()?;
        written.push(path);
    }
    report_written(&written);
    Ok(ExitCode::SUCCESS)
}

fn validate(g: &Global, a: &ValidateArgs) -> CliResult<ExitCode> {
    let mut opts = SuiteOptions {
        quick_acceptance: !a.no_acceptance,
        workers: g.workers.0,
        ..SuiteOptions::default()
    };
    if let Some(seed) = g.seed {
        opts.seed = seed;
    }
    let report = match a.inject_fault {
        Some(Fault::PnSign) => run_suite(&opts, &faulty_sampler),
        None => run_suite(&opts, &reference_sampler),
    };
    for c in &report.checks {
        println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    std::fs::create_dir_all(&g.out)?;
    let path = g.out.join("validate_report.json");
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &report).map_err(Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    println!("wrote {}", path.display());
    if report.passed {
        return Ok(ExitCode::SUCCESS);
    }
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    eprintln!("validation failed: {}", failed.join(", "));
    Ok(ExitCode::from(1))
}

fn analytic(g: &Global, a: &AnalyticArgs) -> CliResult<ExitCode> {
    let exp = required(g)?;
    let cfg: &ExperimentConfig = &exp.config;
    let file = File::open(&a.dump).map_err(|e| Failure::Runtime(format!("{}: {e}", a.dump.display())))?;
    let records = read_dump(BufReader::new(file))?;
    let reals = records
        .iter()
        .map(|r| realization_from_channel(&r.h, cfg.n_s, cfg.n_rf, &cfg.altmin))
        .collect::<hpgpn::Result<Vec<_>>>()?;
    let mut res = analytic_sweep(cfg, &reals)?;
    res.rows.retain(|r| match exp.mode {
        Mode::Ber => r.ber.is_some(),
        Mode::Se => r.se_bps_hz.is_some(),
    });
    report_written(&res.write_files(&g.out, &cfg.experiment_id)?);
    Ok(ExitCode::SUCCESS)
}

fn dump_channels(g: &Global, a: &DumpArgs) -> CliResult<ExitCode> {
    let exp = required(g)?;
    let cfg = &exp.config;
    let n = a.count.unwrap_or(cfg.n_channels);
    std::fs::create_dir_all(&g.out)?;
    let path: PathBuf = Path::new(&g.out).join(format!("{}_channels.bin", cfg.experiment_id));
    let mut w = BufWriter::new(File::create(&path)?);
    dump_experiment(&mut w, cfg, n, a.with_precoders)?;
    w.flush()?;
    report_written(&[path]);
    Ok(ExitCode::SUCCESS)
}
