use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

fn hpgpn(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpgpn"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("HPGPN_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rd = csv::Reader::from_path(path).expect("csv exists");
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).expect("column present")
}

const SMALL: &[&str] = &["-O", "n_channels=24", "-O", "n_symbols=10", "-O", "snr_db=0:10:20"];

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpgpn(dir.path(), &["presets"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for n in 4..=9 {
        assert!(text.contains(&format!("paper-fig{n}")), "{text}");
    }
}

#[test]
fn fig9_preset_runs_eight_streams_with_one_pilot() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["--preset", "paper-fig9"];
    args.extend_from_slice(SMALL);
    args.push("ber");
    let o = hpgpn(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    for file in ["paper-fig9_montecarlo.csv", "paper-fig9_analytic.csv"] {
        let (h, rows) = read_csv(&dir.path().join(file));
        assert_eq!(rows.len(), 3, "{file}");
        for r in &rows {
            assert_eq!(r[column(&h, "n_s")], "8");
            assert_eq!(r[column(&h, "n_pil")], "1");
            assert_eq!(r[column(&h, "sigma2_psi")], "0.1");
            assert_eq!(r[column(&h, "modulation")], "16-QAM");
        }
    }
    let sidecar: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("paper-fig9.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["n_pil"], 1);
}

#[test]
fn ber_csv_is_byte_stable_across_runs_and_worker_counts() {
    let run = |workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["--preset", "paper-fig5", "--workers", workers, "-O", "regimes=strong"];
        args.extend_from_slice(SMALL);
        args.push("ber");
        let o = hpgpn(dir.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
        (
            std::fs::read(dir.path().join("paper-fig5_montecarlo.csv")).unwrap(),
            std::fs::read(dir.path().join("paper-fig5_analytic.csv")).unwrap(),
        )
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("3"));
}

#[test]
fn fig4_se_covers_four_regimes_and_override_replaces_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpgpn(
        dir.path(),
        &["--preset", "paper-fig4", "-O", "n_channels=8", "-O", "snr_db=0:5:40", "se"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&dir.path().join("paper-fig4_montecarlo.csv"));
    let (s, p, series) = (column(&h, "snr_db"), column(&h, "sigma2_psi"), column(&h, "series"));
    let fdp: Vec<&Vec<String>> = rows.iter().filter(|r| r[series] == "fdp").collect();
    assert_eq!(fdp.len(), 4 * 9);
    let grid: BTreeSet<&str> = rows.iter().map(|r| r[s].as_str()).collect();
    assert_eq!(grid.len(), 9);
    let regimes: BTreeSet<&str> = rows.iter().map(|r| r[p].as_str()).collect();
    assert_eq!(regimes, BTreeSet::from(["0.0", "0.001", "0.01", "0.1"]));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "mode = \"ber\"\n\n[sweep]\nn_chanels = 3\n").unwrap();
    let o = hpgpn(dir.path(), &["--config", bad.to_str().unwrap(), "ber"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    assert!(stderr(&o).contains("n_chanels"));

    let o = hpgpn(dir.path(), &["--preset", "paper-fig6", "-O", "nonsense=1", "ber"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nonsense"));

    let o = hpgpn(dir.path(), &["--preset", "paper-fig6", "-O", "n_s=9", "ber"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_s"), "{}", stderr(&o));

    let o = hpgpn(dir.path(), &["--preset", "paper-fig4", "ber"]);
    assert_eq!(o.status.code(), Some(2));

    let o = hpgpn(dir.path(), &["--preset", "paper-fig42", "ber"]);
    assert_eq!(o.status.code(), Some(2));

    let o = hpgpn(dir.path(), &["ber"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dump_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpgpn(
        dir.path(),
        &["--preset", "paper-fig6", "analytic", "--dump", "does-not-exist.bin"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn constellation_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpgpn(dir.path(), &["constellation", "--scheme", "qam16"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("constellation_qam16.csv"));
    assert_eq!(rows.len(), 16);

    let o = hpgpn(dir.path(), &["constellation", "--scheme", "pqam16-4"]);
    assert!(o.status.success());
    let (h, rows) = read_csv(&dir.path().join("constellation_pqam16-4.csv"));
    assert_eq!(rows.len(), 16);
    let ring = column(&h, "ring");
    let rings: BTreeSet<&str> = rows.iter().map(|r| r[ring].as_str()).collect();
    assert_eq!(rings.len(), 4);
    let (re, im) = (column(&h, "re"), column(&h, "im"));
    let mut radii: Vec<f64> = rows
        .iter()
        .map(|r| r[re].parse::<f64>().unwrap().hypot(r[im].parse().unwrap()))
        .collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    assert_eq!(radii.len(), 4);

    for bad in ["qam12", "psk8", "pqam16-3"] {
        let o = hpgpn(dir.path(), &["constellation", "--scheme", bad]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn constellation_scatter_has_one_row_per_symbol() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpgpn(
        dir.path(),
        &["-O", "n_rx=8", "-O", "n_tx=16", "--preset", "paper-fig7", "constellation", "--scheme", "qam16", "--scatter", "--n-symbols", "300"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&dir.path().join("scatter_qam16_medium_30dB.csv"));
    assert_eq!(rows.len(), 300);
    let tx = column(&h, "tx_index");
    assert!(rows.iter().all(|r| r[tx].parse::<usize>().unwrap() < 16));
}

#[test]
fn dump_then_analytic() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpgpn(
        dir.path(),
        &["--preset", "paper-fig6", "-O", "n_channels=3", "dump-channels", "--with-precoders"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let dump = dir.path().join("paper-fig6_channels.bin");
    assert!(std::fs::read(&dump).unwrap().starts_with(b"HPCH"));
    let o = hpgpn(
        dir.path(),
        &["--preset", "paper-fig6", "-O", "snr_db=0:10:40", "analytic", "--dump", dump.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&dir.path().join("paper-fig6_analytic.csv"));
    assert!(!dir.path().join("paper-fig6_montecarlo.csv").exists());
    let n = column(&h, "n_channels");
    assert!(rows.iter().any(|r| r[n] == "3"));
    assert!(rows.iter().all(|r| !r[column(&h, "ber")].is_empty()));
}

#[test]
fn validate_passes_on_the_reference_build() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpgpn(dir.path(), &["validate"]);
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("validate_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"pn.characteristic_function"));
    assert!(names.iter().any(|n| n.starts_with("acceptance.")));
}

#[test]
fn validate_catches_injected_phase_noise_fault() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpgpn(dir.path(), &["validate", "--no-acceptance", "--inject-fault", "pn-sign"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pn.characteristic_function"), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("validate_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}
