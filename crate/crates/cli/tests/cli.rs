use std::path::Path;
use std::process::Command;

use psdyn_cli::fieldio::{read_binary, read_csv};

const BIN: &str = env!("CARGO_BIN_EXE_psdyn");

fn config(kind: &str, methods: &str, times: &str, hbar: f64) -> String {
    format!(
        r#"
hbar = {hbar}
times = {times}
methods = {methods}

[potential]
kind = "{kind}"

[grid]
qmin = -2.5
qmax = 2.5
pmin = -2.5
pmax = 2.5
nq = 31
np = 31

[quadrature]
box = [-5.5, 5.5, -5.5, 5.5]

[output]
directory = "unused"
formats = ["csv", "bin"]
"#
    )
}

fn write(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn report(dir: &Path) -> toml::Value {
    std::fs::read_to_string(dir.join("report.toml"))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn exact_and_aga_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        &config("free", r#"["exact", "aga"]"#, "[0.5]", 0.1),
    );
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let cmp = &r["comparisons"].as_array().unwrap()[0];
    assert_eq!(cmp["method_a"].as_str(), Some("aga"));
    assert_eq!(cmp["method_b"].as_str(), Some("exact"));
    assert!(cmp["rel_l2"].as_float().unwrap() <= 1e-4);
    for key in ["sup", "phase_sup", "runtime_ms"] {
        assert!(cmp.get(key).is_some(), "{key}");
    }
    let csv = read_csv(&out.join("aga_t0.5.csv")).unwrap();
    let bin = read_binary(&out.join("aga_t0.5.bin")).unwrap();
    assert_eq!(csv, bin);
    assert_eq!(csv.grid.nq, 31);
}

#[test]
fn beam_reports_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), &config("harmonic", r#"["beam"]"#, "[0.3]", 0.1));
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("beam_t0.3.csv").exists());
    let r = report(&out);
    let f = &r["fields"].as_array().unwrap()[0];
    let coverage = f["coverage"].as_float().unwrap();
    assert!(coverage > 0.0 && coverage < 1.0, "{coverage}");
    assert_eq!(
        r["comparisons"].as_array().unwrap()[0]["masked"].as_bool(),
        Some(true)
    );
}

#[test]
fn invalid_hbar_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), &config("free", r#"["exact"]"#, "[0.5]", -1.0));
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hbar"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        config("free", r#"["exact"]"#, "[0.5]", 0.1).replace("[grid]", "[grid]\nspacing = 3");
    let cfg = write(dir.path(), &text);
    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_is_recorded_and_run_continues() {
    let dir = tempfile::tempdir().unwrap();
    let text = config("free", r#"["aga", "exact"]"#, "[0.5]", 0.1)
        .replace("[-5.5, 5.5, -5.5, 5.5]", "[-1.0, 1.0, -1.0, 1.0]");
    let cfg = write(dir.path(), &text);
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("exact_t0.5.csv").exists());
    let r = report(&out);
    let aga = &r["fields"].as_array().unwrap()[0];
    assert!(aga["error"].as_str().unwrap().contains("too small"));
}

#[test]
fn identical_configs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        &config(
            "linear_field",
            r#"["exact", "aga", "fourier", "beam"]"#,
            "[0.0, 0.4]",
            0.1,
        ),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(run(&[
            "run",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap()
        ])
        .status
        .success());
    }
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 8);
    for name in names {
        let (x, y) = (
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap(),
        );
        if name == "report.toml" {
            // wall-clock timings are the only non-deterministic entries
            let strip = |v: &[u8]| {
                String::from_utf8_lossy(v)
                    .lines()
                    .filter(|l| !l.starts_with("runtime_ms"))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            assert_eq!(strip(&x), strip(&y));
        } else {
            assert_eq!(x, y, "{name:?}");
        }
    }
}

#[test]
fn sweep_ratios_near_one_half() {
    for kind in ["free", "harmonic"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), &config(kind, r#"["beam"]"#, "[0.5]", 0.1));
        let out = dir.path().join("out");
        let o = run(&[
            "sweep-hbar",
            cfg.to_str().unwrap(),
            "--hbars",
            "0.2,0.1,0.05",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
        let r: toml::Value = std::fs::read_to_string(out.join("sweep.toml"))
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(r["pass"].as_bool(), Some(true));
        for row in r["rows"].as_array().unwrap().iter().skip(1) {
            let ratio = row["ratio"].as_float().unwrap();
            assert!((0.4..0.6).contains(&ratio), "{kind}: {ratio}");
        }
    }
}

#[test]
fn sweep_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), &config("free", r#"["beam"]"#, "[0.5]", 0.1));
    let out = dir.path().join("out");
    for hbars in ["0.1", "0.2,0.15"] {
        let o = run(&[
            "sweep-hbar",
            cfg.to_str().unwrap(),
            "--hbars",
            hbars,
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2), "{hbars}");
    }
    let quartic = config("polynomial", r#"["beam"]"#, "[0.5]", 0.1).replace(
        "kind = \"polynomial\"",
        "kind = \"polynomial\"\ncoefficients = [0.0, 0.0, 0.0, 0.0, 1.0]",
    );
    let cfg = write(dir.path(), &quartic);
    let o = run(&[
        "sweep-hbar",
        cfg.to_str().unwrap(),
        "--hbars",
        "0.2,0.1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        psdyn_cli::ScenarioConfig::load(&path)
            .unwrap()
            .validate()
            .unwrap();
    }
}
