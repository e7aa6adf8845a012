use std::path::Path;
use std::process::{Command, Output};

use genexp_cli::presets::PRESETS;

fn genexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genexp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    genexp(args).status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn quarter_cantor_preset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&["verify-onb", "--preset", "cantor4", "--out", out]), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["verdict"], "PASS");
    assert_eq!(report["result"]["gram_summary"]["method"], "product-formula");
    assert!(report["result"]["gram_summary"]["max_offdiag"].as_f64().unwrap() <= 1e-6);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.meta.json")).unwrap()).unwrap();
    assert!(meta["finished_unix_secs"].as_u64().unwrap() > 0);
    let gram = std::fs::read_to_string(dir.path().join("gram.csv")).unwrap();
    assert_eq!(gram.lines().next(), Some("row,col,re,im"));
    assert_eq!(gram.lines().count(), 1 + 64 * 64);
}

#[test]
fn exponential_counterexample_does_not_tile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        code(&["tiling-check", "--preset", "counterexample-exp", "--out", out]),
        1
    );
    let hist = std::fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("u1,u2,count"));
}

#[test]
fn classical_preset_passes() {
    assert_eq!(code(&["verify-onb", "--preset", "identity-1d"]), 0);
}

#[test]
fn every_preset_gives_its_expected_code() {
    let expected = |name: &str, cmd: &str| match (name, cmd) {
        ("counterexample-exp", _) | ("square-phase", _) => 1,
        _ => 0,
    };
    for p in PRESETS {
        for cmd in p.commands.split(", ") {
            let dir = tempfile::tempdir().unwrap();
            let o = genexp(&[cmd, "--preset", p.name, "--out", dir.path().to_str().unwrap()]);
            assert_eq!(
                o.status.code(),
                Some(expected(p.name, cmd)),
                "{cmd} --preset {}: {}",
                p.name,
                String::from_utf8_lossy(&o.stderr)
            );
        }
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad_top = r#"{"measure": {"kind": "lebesgue_box", "lo": [0], "hi": [1]}, "spectrum": {"kind": "integers", "lo": -2, "hi": 2}, "sede": 1}"#;
    let bad_inner = r#"{"measure": {"kind": "lebesgue_box", "lo": [0], "hi": [1], "extra": true}, "spectrum": {"kind": "integers", "lo": -2, "hi": 2}}"#;
    let bad_unit = r#"{"measure": {"kind": "nu4", "ratio": 4}, "spectrum": {"kind": "lambda4", "n": 3}}"#;
    for text in [bad_top, bad_inner, bad_unit] {
        let cfg = write_config(dir.path(), text);
        let o = genexp(&["verify-onb", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(3), "{text}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
    }
}

#[test]
fn expression_errors_report_their_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"measure": {"kind": "lebesgue_box", "lo": [0, 0], "hi": [1, 1]},
            "phase": {"kind": "unipotent", "l": ["sin(2*pi*y2)"]},
            "spectrum": {"kind": "integer_lattice", "dim": 2, "radius": 1}}"#,
    );
    let o = genexp(&["verify-onb", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("phase.l[0]") && err.contains("unknown identifier 'y2' at byte 9"),
        "{err}"
    );
}

#[test]
fn configs_run_from_files_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"measure": {"kind": "lebesgue_box", "lo": [0, 0], "hi": [1, 1]},
            "phase": {"kind": "custom", "components": ["x1 + x2^2", "x2"]},
            "spectrum": {"kind": "integer_lattice", "dim": 2, "radius": 3},
            "quad": {"scheme": "tensor_gauss", "orders": [40]}}"#,
    );
    let o = genexp(&["verify-onb", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["command"], "verify-onb");
    assert!(report["preset"].is_null());
}

#[test]
fn usage_errors() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&[]), 3);
    assert_eq!(code(&["verify-onb"]), 3);
    assert_eq!(code(&["verify-onb", "--preset", "no-such-preset"]), 3);
    assert_eq!(code(&["verify-onb", "--preset", "cantor4", "--config", "x.json"]), 3);
    assert_eq!(code(&["frame-bounds", "--preset", "cantor4"]), 3);
    assert_eq!(code(&["verify-onb", "--config", "/nonexistent/config.json"]), 3);
    assert_eq!(code(&["list-presets"]), 0);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (cmd, preset) in [
        ("tiling-check", "unipotent-sin"),
        ("repdisc", "axb"),
        ("probe-injectivity", "holhos-disc"),
    ] {
        let pa = a.path().join(preset);
        let pb = b.path().join(preset);
        assert_ne!(
            code(&[cmd, "--preset", preset, "--out", pa.to_str().unwrap(), "--threads", "1"]),
            3
        );
        assert_ne!(
            code(&[cmd, "--preset", preset, "--out", pb.to_str().unwrap(), "--threads", "4"]),
            3
        );
        let ra = std::fs::read(pa.join("report.json")).unwrap();
        let rb = std::fs::read(pb.join("report.json")).unwrap();
        assert!(ra == rb, "{preset}: reports differ");
    }
}

#[test]
fn library_entry_point_matches_the_binary() {
    assert_eq!(genexp_cli::run(["genexp", "verify-onb", "--preset", "square-phase"]), 1);
    assert_eq!(genexp_cli::run(["genexp", "bogus"]), 3);
}
