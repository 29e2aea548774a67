//! End-to-end runs of the `slelab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use slelab::excursions::Region;
use slelab_cli::error::exit;
use slelab_cli::manifest::{sha256_hex, RunManifest, RunStatus, MANIFEST_FILE};
use slelab_cli::plot::embedded_slope;
use slelab_cli::table::Table;

fn slelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slelab"))
        .args(args)
        .env_remove("SLELAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> u8 {
    o.status.code().expect("exited normally") as u8
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::read(&dir.join(MANIFEST_FILE)).unwrap()
}

#[test]
fn completed_run_records_checksummed_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("table");
    let o = slelab(&["exponents", "table", "--out", out.to_str().unwrap()]);
    assert_eq!(
        code(&o),
        exit::SUCCESS,
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let m = manifest(&out);
    assert_eq!(m.command, "exponents table");
    assert_eq!(m.status, RunStatus::Complete);
    assert!(m.finished_at.is_some());
    assert!(!m.outputs.is_empty());
    for f in &m.outputs {
        let bytes = fs::read(out.join(&f.path)).unwrap();
        assert_eq!(bytes.len() as u64, f.bytes);
        assert_eq!(sha256_hex(&bytes), f.sha256);
    }
    assert_eq!(m.metric("xi(1,1)").unwrap().value, 1.25);
}

#[test]
fn unknown_flag_is_a_usage_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let o = slelab(&[
        "walk",
        "nonintersection",
        "--bogus",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), exit::USAGE);
    assert!(!out.exists());
    let o = slelab(&[
        "exponents",
        "eval",
        "no-such-formula",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), exit::USAGE);
}

#[test]
fn domain_errors_leave_a_failed_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("theta");
    let o = slelab(&[
        "cardy",
        "eval",
        "--theta",
        "pi/2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), exit::DOMAIN);
    let m = manifest(&out);
    assert_eq!(m.status, RunStatus::Failed);
    assert!(m.error.as_deref().unwrap().contains("theta"));
    assert!(m.outputs.is_empty());

    let out = tmp.path().join("pilot");
    let o = slelab(&[
        "universality",
        "--paths",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), exit::DOMAIN);
    assert_eq!(manifest(&out).status, RunStatus::Failed);
}

#[test]
fn reruns_are_byte_identical_for_any_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for workers in ["1", "3"] {
        let out = tmp.path().join(format!("w{workers}"));
        let o = slelab(&[
            "walk",
            "nonintersection",
            "--kmin",
            "16",
            "--kmax",
            "128",
            "--paths",
            "3500",
            "--seed",
            "11",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            code(&o),
            exit::SUCCESS,
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        runs.push(manifest(&out));
    }
    let checksums = |m: &RunManifest| {
        m.outputs
            .iter()
            .map(|f| (f.path.clone(), f.sha256.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(checksums(&runs[0]), checksums(&runs[1]));
    assert_eq!(runs[0].seed, runs[1].seed);
    assert_eq!(runs[0].seed.blocks[0].chunk, 1000);
}

#[test]
fn plots_carry_the_fitted_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("plot");
    let o = slelab(&[
        "walk",
        "nonintersection",
        "--kmin",
        "8",
        "--kmax",
        "64",
        "--paths",
        "2000",
        "--plot",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), exit::SUCCESS);
    let svg = fs::read_to_string(out.join("nonintersection.svg")).unwrap();
    let fit = Table::read(&out.join("fit.csv")).unwrap();
    let slope: f64 = fit.rows[0][fit.column("slope").unwrap()].parse().unwrap();
    assert_eq!(embedded_slope(&svg), Some(slope));
    assert_eq!(manifest(&out).metric("slope").unwrap().value, slope);
}

#[test]
fn report_reads_stored_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("runs/extremal");
    let o = slelab(&[
        "excursion",
        "extremal",
        "--region",
        "rectangle:2",
        "--resolution",
        "32",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), exit::SUCCESS);
    let stored = manifest(&run).metric("pi_extremal_distance").unwrap().value;

    let rep = tmp.path().join("report");
    let o = slelab(&[
        "report",
        "--dir",
        tmp.path().join("runs").to_str().unwrap(),
        "--out",
        rep.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), exit::SUCCESS);
    let results = Table::read(&rep.join("results.csv")).unwrap();
    assert_eq!(results.rows.len(), 1);
    let value: f64 = results.rows[0][results.column("value").unwrap()]
        .parse()
        .unwrap();
    assert_eq!(value, stored);
}

#[test]
fn mask_files_are_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let mask = tmp.path().join("mask.txt");
    let o = slelab(&[
        "excursion",
        "extremal",
        "--mask",
        mask.to_str().unwrap(),
        "--out",
        tmp.path().join("m").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), exit::FAILURE, "missing file is an I/O failure");
    fs::write(&mask, "not a mask\n").unwrap();
    let o = slelab(&[
        "excursion",
        "extremal",
        "--mask",
        mask.to_str().unwrap(),
        "--out",
        tmp.path().join("m2").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), exit::DOMAIN);

    let grid = Region::Rectangle { l: 2.0 }.rasterize(32).unwrap();
    fs::write(&mask, grid.to_text()).unwrap();
    let out = tmp.path().join("m3");
    let o = slelab(&[
        "excursion",
        "extremal",
        "--mask",
        mask.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&o),
        exit::SUCCESS,
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let value = manifest(&out).metric("pi_extremal_distance").unwrap().value;
    assert!((value - 2.0).abs() < 0.1, "{value}");
}
