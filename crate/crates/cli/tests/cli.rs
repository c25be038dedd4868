use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rmst() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rmst"));
    cmd.env_remove("RMST_SEED");
    cmd
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn without_version(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("version");
    v
}

#[test]
fn golden_report_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let out = run(rmst()
        .arg("test")
        .arg(fixture("s1_c2.csv"))
        .args([
            "--method",
            "all",
            "--estimand",
            "difference",
            "--tau",
            "10",
            "--B",
            "2000",
            "--seed",
            "42",
        ])
        .arg("--out")
        .arg(&out_path));
    assert!(out.status.success(), "{}", stderr(&out));
    let got: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let want: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("s1_c2_report.json")).unwrap())
            .unwrap();
    assert_eq!(got["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(without_version(got), without_version(want));
    assert!(stderr(&out).contains("group 1 = `A`"));
}

#[test]
fn json_stdout_matches_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = run(rmst()
        .arg("test")
        .arg(fixture("s1_c2.csv"))
        .args(["--tau", "8", "--B", "200", "--estimand", "both", "--json"])
        .arg("--out")
        .arg(&out_path));
    assert!(out.status.success(), "{}", stderr(&out));
    let printed: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let written: Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(printed, written);
    // unstudentized ratio is skipped, everything else is reported
    assert_eq!(printed["results"].as_array().unwrap().len(), 5);
}

#[test]
fn identical_groups_give_p_value_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "same.csv",
        "time,status,group\n3,1,a\n8,0,a\n3,1,b\n8,0,b\n",
    );
    let out = run(rmst()
        .arg("test")
        .arg(&data)
        .args(["--tau", "8", "--B", "50", "--json"]));
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for r in report["results"].as_array().unwrap() {
        assert_eq!(r["p_value"], 1.0, "{r}");
        if let Some(ci) = r["ci"].as_object() {
            match (ci["lower"].as_f64(), ci["upper"].as_f64()) {
                (Some(lo), Some(hi)) => assert!((lo + hi).abs() < 1e-12),
                // too few distinct partitions for a finite permutation quantile
                _ => assert_eq!(
                    (&ci["lower"], &ci["upper"]),
                    (&Value::from("-inf"), &Value::from("inf"))
                ),
            }
        }
    }
}

#[test]
fn seed_comes_from_environment() {
    let args = [
        "--tau",
        "10",
        "--B",
        "99",
        "--method",
        "studentized-perm",
        "--json",
    ];
    let base = |seed: Option<&str>| {
        let mut cmd = rmst();
        cmd.arg("test").arg(fixture("s1_c2.csv")).args(args);
        if let Some(s) = seed {
            cmd.env("RMST_SEED", s);
        }
        let v: Value = serde_json::from_str(&stdout(&run(&mut cmd))).unwrap();
        v
    };
    let env7 = base(Some("7"));
    assert_eq!(env7["settings"]["seed"], 7);
    let flag7: Value = serde_json::from_str(&stdout(&run(rmst()
        .arg("test")
        .arg(fixture("s1_c2.csv"))
        .args(args)
        .args(["--seed", "7"]))))
    .unwrap();
    assert_eq!(env7, flag7);
    assert_ne!(base(None)["results"], env7["results"]);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let out = run(rmst().arg("test").arg(&empty).args(["--tau", "5"]));
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let bad = write(dir.path(), "bad.csv", "time,status,group\n1,1,a\n2,3,b\n");
    let out = run(rmst().arg("km").arg(&bad));
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let censored_max = write(
        dir.path(),
        "cens.csv",
        "time,status,group\n1,1,a\n2,1,a\n6,0,a\n1.5,1,b\n3,1,b\n12,1,b\n",
    );
    let out = run(rmst().arg("test").arg(&censored_max).args(["--tau", "10"]));
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("group 1"), "{}", stderr(&out));
    let out = run(rmst()
        .arg("test")
        .arg(&censored_max)
        .args(["--tau", "6", "--B", "20"]));
    assert!(out.status.success(), "{}", stderr(&out));

    let late = write(
        dir.path(),
        "late.csv",
        "time,status,group\n11,1,a\n12,1,a\n13,1,b\n14,1,b\n",
    );
    let out = run(rmst()
        .arg("test")
        .arg(&late)
        .args(["--tau", "10", "--method", "asymptotic"]));
    assert_eq!(out.status.code(), Some(5), "{}", stderr(&out));

    let out = run(rmst().arg("test").arg(fixture("s1_c2.csv")).args([
        "--tau",
        "10",
        "--method",
        "unstudentized-perm",
        "--estimand",
        "ratio",
    ]));
    assert_eq!(out.status.code(), Some(2));

    let out = run(rmst()
        .arg("test")
        .arg(fixture("s1_c2.csv"))
        .args(["--tau", "ten"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn km_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "km.csv",
        "time,status,group\n1,1,x\n2,0,x\n3,1,x\n4,0,y\n5,0,y\n",
    );
    let out = run(rmst().arg("km").arg(&data));
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .filter(|l| l.split('\t').nth(1) == Some("x"))
        .map(|l| l.split('\t').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    let expected = [
        [0.0, 1.0, 1.0, 3.0, 0.0],
        [1.0, 2.0 / 3.0, 1.0, 3.0, 1.0],
        [2.0, 2.0 / 3.0, 0.5, 2.0, 1.0],
        [3.0, 0.0, 0.5, 1.0, 2.0],
    ];
    assert_eq!(rows.len(), expected.len());
    for (row, want) in rows.iter().zip(expected) {
        for (a, b) in row.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{row:?} vs {want:?}");
        }
    }
    // the all-censored group keeps S = 1
    assert!(text
        .lines()
        .filter(|l| l.split('\t').nth(1) == Some("y"))
        .all(|l| l.split('\t').nth(3) == Some("1")));

    let out_path = dir.path().join("km.tsv");
    let out = run(rmst()
        .arg("km")
        .arg(&data)
        .args(["--tau", "2"])
        .arg("--out")
        .arg(&out_path));
    assert!(out.status.success());
    assert_eq!(
        std::fs::read_to_string(&out_path).unwrap().lines().count(),
        1 + 3 + 1
    );
}

const SIM_CONFIG: &str = r#"
seed = 11
n_sim = 30
n_perm = 49
estimands = ["difference", "ratio"]

[[grid]]
survival = ["S1", "S3"]
censoring = ["C2"]
sample_sizes = [[12, 10]]
delta = [0.0, 1.0]
"#;

#[test]
fn sim_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "grid.toml", SIM_CONFIG);
    let mut outputs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out_dir = dir.path().join(name);
        let out = run(rmst()
            .arg("sim")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .args(["--workers", workers]));
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("binomial band"));
        outputs.push((
            std::fs::read_to_string(out_dir.join("results.tsv")).unwrap(),
            std::fs::read_to_string(out_dir.join("results.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].0, outputs[2].0);
    let strip_workers = |text: &str| {
        let mut v: Value = serde_json::from_str(text).unwrap();
        v["config"].as_object_mut().unwrap().remove("workers");
        v
    };
    assert_eq!(strip_workers(&outputs[0].1), strip_workers(&outputs[2].1));
    let tsv = &outputs[0].0;
    // 4 cells x (3 difference + 2 ratio) rows, plus the header
    assert_eq!(tsv.lines().count(), 1 + 4 * 5);
}

#[test]
fn sim_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "zero.toml", "n_sim = 0\n");
    let out = run(rmst()
        .arg("sim")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("o")));
    assert_eq!(out.status.code(), Some(6));
    assert!(stderr(&out).contains("n_sim"), "{}", stderr(&out));

    let config = write(
        dir.path(),
        "bad.toml",
        "[[grid]]\nsurvival = [\"S1\"]\ncensoring = [\"C4\"]\n",
    );
    let out = run(rmst()
        .arg("sim")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("o")));
    assert_eq!(out.status.code(), Some(6));
    assert!(
        stderr(&out).contains("grid[0].censoring[0]"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn failing_cells_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "grid.toml",
        "n_sim = 5\nn_perm = 19\n[[grid]]\nsurvival = [\"S3\"]\ncensoring = [\"C2\"]\nsample_sizes = [[10, 10]]\ndelta = [0.0, 5.0]\n",
    );
    let out_dir = dir.path().join("o");
    let out = run(rmst().arg("sim").arg(&config).arg("--out").arg(&out_dir));
    assert!(out.status.success(), "{}", stderr(&out));
    let tsv = std::fs::read_to_string(out_dir.join("results.tsv")).unwrap();
    assert!(tsv.contains("calibration failed"));
    assert!(tsv.lines().any(|l| l.starts_with("S3\tC2\t10\t10\t1\t0\t")));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    // S2 coincides with S1 under the null and is dropped there
    for (name, cells) in [
        ("type1.toml", 6 * 3 * 3 * 3),
        ("power.toml", 7 * 3 * 3 * 3 * 2),
        ("quick.toml", 8),
    ] {
        let config = rmst_core::io::load_sim_config(&root.join(name)).unwrap();
        assert_eq!(config.cells().unwrap().len(), cells, "{name}");
    }
}
