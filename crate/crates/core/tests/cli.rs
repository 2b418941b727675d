use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcl"))
        .args(args)
        .output()
        .expect("runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

const HELIX: &str = r#"{"kind":"partially_null","domain":[0,6.283185307179586],"kappa":"1","tau":"1"}"#;

#[test]
fn synth_writes_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "helix.json", HELIX);
    let out = dir.path().join("trace.csv");
    let o = lcl(&[
        "synth",
        "-p",
        p.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--h",
        "1e-3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 6284 + 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("max gram residual"));
}

#[test]
fn synth_emits_gnuplot_files() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "helix.json", HELIX);
    let plot = dir.path().join("plot");
    let o = lcl(&[
        "synth",
        "-p",
        p.to_str().unwrap(),
        "-o",
        dir.path().join("t.csv").to_str().unwrap(),
        "--emit-gnuplot",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(plot.join("plot.gp")).unwrap().contains("trace.dat"));
    assert_eq!(
        fs::read_to_string(plot.join("trace.dat")).unwrap().lines().count(),
        1002
    );
}

#[test]
fn validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let o = lcl(&["synth", "-p", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());

    let p = write(dir.path(), "helix.json", HELIX);
    assert_eq!(code(&lcl(&["synth", "-p", p.to_str().unwrap(), "--h", "0"])), 2);
    assert_eq!(
        code(&lcl(&["classify", "-p", p.to_str().unwrap(), "--tol-axis", "-1"])),
        2
    );

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"kind":"partially_null","domain":[1,0],"kappa":"1","tau":"1"}"#,
    );
    assert_eq!(code(&lcl(&["classify", "-p", bad.to_str().unwrap()])), 2);
    let garbled = write(
        dir.path(),
        "garbled.json",
        r#"{"kind":"pseudo_null","domain":[0,1],"tau":"1+","sigma":"1"}"#,
    );
    assert_eq!(code(&lcl(&["classify", "-p", garbled.to_str().unwrap()])), 2);
}

#[test]
fn integration_abort_exits_3() {
    let dir = TempDir::new().unwrap();
    let p = write(
        dir.path(),
        "stiff.json",
        r#"{"kind":"partially_null","domain":[0,10],"kappa":"200","tau":"200"}"#,
    );
    let o = lcl(&["synth", "-p", p.to_str().unwrap(), "--h", "1"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn classify_reports() {
    let dir = TempDir::new().unwrap();
    let q = write(
        dir.path(),
        "q.json",
        r#"{"kind":"pseudo_null","domain":[0,2],"tau":"1","sigma":"-s^2/2+0.3*s+0.1"}"#,
    );
    let r = json(&lcl(&["classify", "-p", q.to_str().unwrap()]));
    assert_eq!(r["verdicts"]["k0"], "no");
    assert_eq!(r["verdicts"]["k1"], "yes");
    assert!((r["constants"]["a"]["value"].as_f64().unwrap() - 0.3).abs() < 1e-7);
    assert!((r["constants"]["b"]["value"].as_f64().unwrap() - 0.1).abs() < 1e-7);

    let c = write(
        dir.path(),
        "c.json",
        r#"{"kind":"partially_null","domain":[0,1],"kappa":"2","tau":"6"}"#,
    );
    let r = json(&lcl(&["classify", "-p", c.to_str().unwrap()]));
    for k in ["k0", "k1", "k2", "k3"] {
        assert_eq!(r["verdicts"][k], "yes", "{k}");
    }

    let g = write(
        dir.path(),
        "g.json",
        r#"{"kind":"pseudo_null","domain":[0,1],"tau":"2+s","sigma":"exp(s)"}"#,
    );
    assert_eq!(
        json(&lcl(&["classify", "-p", g.to_str().unwrap()]))["verdicts"]["k0"],
        "no"
    );

    let table = lcl(&["classify", "-p", c.to_str().unwrap(), "--pretty"]);
    assert_eq!(code(&table), 0);
    assert!(String::from_utf8_lossy(&table.stdout).contains("k3"));
}

#[test]
fn oracle_command() {
    let dir = TempDir::new().unwrap();
    let c = write(
        dir.path(),
        "c.json",
        r#"{"kind":"partially_null","domain":[0,1],"kappa":"2","tau":"6"}"#,
    );
    let r = json(&lcl(&["oracle", "-p", c.to_str().unwrap(), "-k", "0"]));
    assert_eq!(r["verdict"], "yes");
    assert_eq!(r["u"].as_array().map(Vec::len), Some(4));
    assert_eq!(code(&lcl(&["oracle", "-p", c.to_str().unwrap(), "-k", "4"])), 2);
}

#[test]
fn verify_exit_codes() {
    assert_eq!(code(&lcl(&["verify"])), 0);

    let dir = TempDir::new().unwrap();
    let wrong = write(
        dir.path(),
        "wrong.json",
        r#"[{"profile":{"kind":"partially_null","domain":[0,1],"kappa":"2","tau":"6","label":"const"},"expected":{"k0":"N"}}]"#,
    );
    assert_eq!(code(&lcl(&["verify", "-s", wrong.to_str().unwrap()])), 1);

    let empty = write(dir.path(), "empty.json", "[]");
    let o = lcl(&["verify", "-s", empty.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["fixtures"], 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("zero fixtures"));
}

#[test]
fn written_suite_reproduces_the_bundled_run() {
    let dir = TempDir::new().unwrap();
    let suite = dir.path().join("suite.json");
    assert_eq!(code(&lcl(&["verify", "--write-suite", suite.to_str().unwrap()])), 0);
    let a = lcl(&["verify", "--json"]);
    let b = lcl(&["verify", "--json", "-s", suite.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["fixtures"], 50);
}

fn sweep(dir: &Path, spec: &str) -> Vec<Vec<String>> {
    let p = write(dir, "sweep.json", spec);
    let o = lcl(&["sweep", "-s", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

#[test]
fn sweep_quadratic_family() {
    let dir = TempDir::new().unwrap();
    let rows = sweep(
        dir.path(),
        r#"{"template":{"kind":"pseudo_null","domain":[0,2],"tau":"1","sigma":"-s^2/2 + {a}*s + {b}"},
            "parameters":{"a":[0,0.5,1],"b":[0]}}"#,
    );
    assert_eq!(rows.len(), 4);
    assert!(column(&rows, "k1").iter().all(|v| v == "yes"));
}

#[test]
fn sweep_exponential_family() {
    let dir = TempDir::new().unwrap();
    let tau = "{lambda}*exp(s/sqrt(-2*{c})) + {mu}*exp(-s/sqrt(-2*{c}))";
    let spec = format!(
        r#"{{"template":{{"kind":"pseudo_null","domain":[0,1],"tau":"{tau}","sigma":"{{c}}*({tau})"}},
            "parameters":{{"c":[-0.5,-1,-2],"lambda":[1],"mu":[1]}}}}"#
    );
    let rows = sweep(dir.path(), &spec);
    assert_eq!(rows.len(), 4);
    assert!(column(&rows, "k2").iter().all(|v| v == "yes"));
    assert!(column(&rows, "k1").iter().all(|v| v == "no"));
}

#[test]
fn sweep_residuals_grow_with_perturbation() {
    let dir = TempDir::new().unwrap();
    let rows = sweep(
        dir.path(),
        r#"{"template":{"kind":"pseudo_null","domain":[0,2],"tau":"1","sigma":"-s^2/2 + 0.3*s + 0.1 + {eps}*0.1*s^3"},
            "parameters":{"eps":[0,0.001,0.01,0.1,1]}}"#,
    );
    let r: Vec<f64> = column(&rows, "residual_k1")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(r.windows(2).all(|w| w[0] < w[1]), "{r:?}");
    assert_eq!(column(&rows, "k1")[0], "yes");
    assert_eq!(column(&rows, "k1")[4], "no");
}

#[test]
fn malformed_sweep_exits_2() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "bad.json", r#"{"template":{},"parameters":{"a":[]}}"#);
    assert_eq!(code(&lcl(&["sweep", "-s", p.to_str().unwrap()])), 2);
}
