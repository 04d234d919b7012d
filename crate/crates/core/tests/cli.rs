use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use histkit::cli::{EXIT_INVALID, EXIT_OK, EXIT_REFUSED};
use histkit::scenario::{parse_scenario, parse_str, ScenarioError};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn histkit(command: &str, scenario: &Path, out: &Path, extra: &[&str]) -> i32 {
    Process::new(env!("CARGO_BIN_EXE_histkit"))
        .arg(command)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn report(out: &Path) -> String {
    fs::read_to_string(out.join("report.txt")).unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("qubit_precession.toml", "consistency", EXIT_OK),
        ("qubit_precession.toml", "probabilities", EXIT_REFUSED),
        ("qubit_resonant.toml", "probabilities", EXIT_OK),
        ("search_qubit.toml", "certify", EXIT_REFUSED),
        ("energy_window.toml", "certify", EXIT_OK),
        ("classical_ring.toml", "epsilon_det", EXIT_OK),
        ("qubit_precession.toml", "cells", EXIT_INVALID),
        ("phase_cells.toml", "classical", EXIT_INVALID),
    ];
    for (i, (name, command, expected)) in cases.into_iter().enumerate() {
        let out = tmp.path().join(i.to_string());
        assert_eq!(
            histkit(command, &scenario(name), &out, &[]),
            expected,
            "{name} {command}"
        );
        let text = report(&out);
        assert!(text.starts_with(&format!("command={command}\n")), "{text}");
        let status = if expected == EXIT_OK { "status=ok" } else { "status=" };
        assert!(text.contains(status));
    }
}

#[test]
fn refused_probabilities_write_no_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(
        histkit("probabilities", &scenario("qubit_precession.toml"), &out, &[]),
        EXIT_REFUSED
    );
    assert!(csv_files(&out).is_empty());
    assert!(report(&out).contains("status=refused"));
}

#[test]
fn consistency_report_and_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(
        histkit("consistency", &scenario("energy_window.toml"), &out, &[]),
        EXIT_OK
    );
    let text = report(&out);
    assert!(text.contains("verdict=exact"), "{text}");
    assert!(text.contains("kind=quantum"));
    let csv = fs::read_to_string(out.join("decoherence.csv")).unwrap();
    assert!(csv.lines().count() > 1);
}

#[test]
fn overrides_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let code = histkit(
        "consistency",
        &scenario("qubit_precession.toml"),
        &out,
        &["--epsilon", "0.5", "--seed", "7"],
    );
    assert_eq!(code, EXIT_OK);
    let text = report(&out);
    assert!(text.contains("seed=7\n"));
    assert!(text.contains("epsilon=0.5\n"));
    assert!(text.contains("epsilon_used=0.5\n"), "{text}");
}

#[test]
fn seeded_search_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(histkit("search", &scenario("search_qubit.toml"), out, &[]), EXIT_OK);
    }
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert_eq!(fa.len(), 3);
    assert_eq!(fa, fb);
}

#[test]
fn contrary_scenario_produces_its_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(
        histkit("contrary", &scenario("contrary_witness.toml"), &out, &[]),
        EXIT_OK
    );
    assert!(report(&out).contains("witness=true"));
    assert!(out.join("projectors.csv").exists());
}

#[test]
fn input_file_is_not_modified() {
    let path = scenario("classical_ring.toml");
    let before = fs::read(&path).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(histkit("classical", &path, &tmp.path().join("o"), &[]), EXIT_OK);
    assert_eq!(fs::read(&path).unwrap(), before);
}

#[test]
fn bundled_scenarios_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let parsed = parse_scenario(&path).unwrap();
        parsed.build().unwrap();
        let text = parsed.serialize();
        let again = parse_str(&text).unwrap();
        assert_eq!(parsed, again, "{}", path.display());
        assert_eq!(text, again.serialize());
        n += 1;
    }
    assert!(n >= 10);
}

#[test]
fn syntax_errors_report_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.toml");
    fs::write(&path, "kind = \"quantum\"\nepsilon = 1e-3\nseed = = 4\n").unwrap();
    match parse_scenario(&path) {
        Err(ScenarioError::Syntax { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let out = tmp.path().join("o");
    assert_eq!(histkit("consistency", &path, &out, &[]), EXIT_INVALID);
    assert!(report(&out).contains("line 3"), "{}", report(&out));
}

#[test]
fn unknown_fields_and_missing_files_are_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("extra.toml");
    fs::write(&path, "kind = \"classical\"\ncolour = 3\n").unwrap();
    assert_eq!(histkit("classical", &path, &tmp.path().join("a"), &[]), EXIT_INVALID);
    let missing = tmp.path().join("nope.toml");
    assert_eq!(histkit("classical", &missing, &tmp.path().join("b"), &[]), EXIT_INVALID);
    assert!(report(&tmp.path().join("b")).contains("status=invalid"));
}

#[test]
fn referential_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(
        &path,
        "kind = \"quantum\"\n[quantum]\ndim = 2\nhamiltonian = [[0, 1], [1, 0]]\ntimes = [1.0, 0.5]\n\
         state = { pure = [1, 0] }\npropositions = { mode = \"energy\" }\n",
    )
    .unwrap();
    let out = tmp.path().join("o");
    assert_eq!(histkit("consistency", &path, &out, &[]), EXIT_INVALID);
    assert!(report(&out).contains("quantum.times"), "{}", report(&out));
}
