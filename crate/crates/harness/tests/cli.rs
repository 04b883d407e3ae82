use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dnls_harness::output::{parse_manifest, sha256_hex, MANIFEST_FILE};

fn dnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    let out = dir.to_str().unwrap();
    all.extend(["--out", out]);
    dnls(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(dir: &Path) -> Vec<(String, String)> {
    parse_manifest(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap())
}

fn lookup<'a>(m: &'a [(String, String)], key: &str) -> &'a str {
    &m.iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("{key} missing"))
        .1
}

#[test]
fn breather_table_writes_the_exact_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["breather-table"]);
    let text = stdout(&o);
    assert!(text.contains("PASS series table N=3"), "{text}");
    let csv = fs::read_to_string(dir.path().join("series_N3_order3.csv")).unwrap();
    let expected = "site,power,numerator,denominator\n\
        1,0,1,1\n1,1,-1,2\n1,2,-5,8\n1,3,-21,16\n\
        2,0,0,1\n2,1,-1,1\n2,2,-3,2\n2,3,-35,8\n\
        3,0,0,1\n3,1,0,1\n3,2,1,1\n3,3,5,2\n";
    assert_eq!(csv, expected);
    // the fourth-order coefficients exceed the stated constant, so the
    // agreement checks report an expectation failure
    assert_eq!(o.status.code(), Some(1), "{text}");
}

#[test]
fn spectrum_report_passes_structure_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(
        dir.path(),
        &[
            "spectrum-report",
            "--n-sites",
            "2,4",
            "--epsilon",
            "0.01,0.05",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for n in [2, 4] {
        for eps in ["0.01", "0.05"] {
            let chain =
                fs::read_to_string(dir.path().join(format!("chain_N{n}_eps{eps}_gamma0.csv")))
                    .unwrap();
            assert_eq!(chain.lines().count(), 1 + 2 * n);
        }
    }
}

#[test]
fn spectrum_sweep_matches_reference_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["fig5-spectrum"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("slopes_N3_eps0.01.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("plot.gp").exists());
}

#[test]
fn manifest_hashes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    run_into(dir.path(), &["spectrum-report"]);
    let m = manifest(dir.path());
    assert_eq!(lookup(&m, "status"), "complete");
    assert_eq!(lookup(&m, "config.seed"), "1");
    let listed: Vec<_> = m.iter().filter(|(k, _)| k.starts_with("file.")).collect();
    let on_disk = fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(listed.len() + 1, on_disk);
    for (k, hash) in listed {
        let bytes = fs::read(dir.path().join(&k["file.".len()..])).unwrap();
        assert_eq!(&sha256_hex(&bytes), hash);
    }
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# override\nepsilon = 0.005\nseed=7\n").unwrap();
    let out = dir.path().join("out");
    let o = dnls(&[
        "spectrum-report",
        "--epsilon",
        "0.02",
        "--seed",
        "3",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(&out);
    assert_eq!(lookup(&m, "config.epsilon"), "0.005");
    assert_eq!(lookup(&m, "config.seed"), "7");
    assert!(out.join("spectrum_N3_eps0.005_gamma0.csv").exists());
}

#[test]
fn bad_configuration_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "colour=blue\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["fig4-decay", "--epsilon", "2"],
        vec!["fig3-crossings", "--gamma", "0"],
        vec!["fig1-energies", "--n-sites", "x"],
        vec!["breather-table", "--config", cfg.to_str().unwrap()],
        vec!["breather-table", "--config", "/nonexistent/file"],
    ];
    for args in cases {
        let o = dnls(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("configuration error"));
    }
}

#[test]
fn integrating_runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "fig1-energies",
        "--n-sites",
        "3",
        "--epsilon",
        "0.05",
        "--t-end",
        "50",
        "--initial",
        "breather",
    ];
    run_into(a.path(), &args);
    run_into(b.path(), &args);
    let files = |d: &Path| {
        let mut v: Vec<_> = fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        v.sort();
        v
    };
    assert_eq!(files(a.path()), files(b.path()));
    for name in files(a.path()) {
        if name == MANIFEST_FILE {
            continue;
        }
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap()
        );
    }
    let ma = manifest(a.path());
    let mb = manifest(b.path());
    let hashes = |m: &[(String, String)]| {
        m.iter()
            .filter(|(k, _)| k.starts_with("file."))
            .cloned()
            .collect::<Vec<_>>()
    };
    assert_eq!(hashes(&ma), hashes(&mb));
}

#[test]
fn short_decay_and_crossing_runs_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(
        dir.path(),
        &[
            "fig4-decay",
            "--n-sites",
            "2",
            "--epsilon",
            "0.1",
            "--t-end",
            "200",
        ],
    );
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stdout(&o));
    let table = fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("2,0.1,0.2,breather,"));

    let dir = tempfile::tempdir().unwrap();
    let o = run_into(
        dir.path(),
        &["fig3-crossings", "--epsilon", "0.1", "--t-end", "100"],
    );
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stdout(&o));
    for prefix in ["crossings_", "fits_", "drift_", "predicted_"] {
        assert!(
            dir.path()
                .join(format!("{prefix}N3_eps0.1_gamma0.020000000000000004.csv"))
                .exists(),
            "{prefix}"
        );
    }
    assert_eq!(
        lookup(&manifest(dir.path()), "config.gamma_convention"),
        "relative"
    );
}

#[test]
fn validate_reports_warnings() {
    let o = dnls(&["validate", "fig4-decay", "--epsilon", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("basin"));

    let o = dnls(&["validate", "fig1-energies", "--dt", "2"]);
    let text = stdout(&o);
    assert!(
        text.contains("warning: dt = 2") && text.contains("suggested dt"),
        "{text}"
    );

    let o = dnls(&["validate", "fig3-crossings"]);
    let text = stdout(&o);
    assert!(text.ends_with("ok\n") && text.contains("steps"), "{text}");
}
