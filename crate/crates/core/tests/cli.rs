use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tricentre::dynamics::{integrate, EllipticState, Params};
use tricentre::periods::solve_a1;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tricentre"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .map(|r| {
            r.map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn periods_json_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "periods", "--beta", "0", "--a1", "0.25", "--a", "1", "--json",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["periods"]["t2"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-12);

    let o = run(
        dir.path(),
        &["periods", "--beta", "0.142857", "--q", "1", "--json"],
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (t1, t2) = (
        v["periods"]["t1"].as_f64().unwrap(),
        v["periods"]["t2"].as_f64().unwrap(),
    );
    assert!((t1 - t2).abs() < 1e-10 * t1);

    let o = run(dir.path(), &["periods", "--beta", "1.5", "--a1", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain"));
    assert_eq!(
        run(dir.path(), &["periods", "--bogus"]).status.code(),
        Some(2)
    );
}

#[test]
fn unsafe_centre_exits_3() {
    let sol = solve_a1(0.1, "1".parse().unwrap(), 1.0, 1e-13).unwrap();
    let a1 = sol.a1_hat;
    let prm = Params::new(1.0, 0.1, a1).unwrap();
    let s0 = EllipticState::new(
        0.0,
        0.0,
        2.0 * (1.0 - a1 * 1.1).sqrt(),
        2.0 * (a1 * 1.1).sqrt(),
    );
    let c = integrate(&s0, &prm, 0.2 * sol.t1, 1e-13, &[])
        .unwrap()
        .final_state()
        .point;
    let centre = format!("{},{}", c.xi, c.phi);
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--centre-elliptic",
        centre.as_str(),
        "--q",
        "1",
        "--beta",
        "0.1",
    ];
    let o = run(dir.path(), &[&["check"], &args[..]].concat());
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("UNSAFE"));
    let o = run(dir.path(), &[&["arcs"], &args[..]].concat());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("class 1"));
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "arcs",
        "--centre-xy",
        "0.3,0.4",
        "--q",
        "1",
        "--beta",
        "0.1",
        "--out",
        "o",
    ];
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    let first: Vec<(String, Vec<u8>)> = files(&dir.path().join("o"))
        .into_iter()
        .map(|f| (f.clone(), fs::read(dir.path().join("o").join(&f)).unwrap()))
        .collect();
    assert_eq!(first.len(), 5);
    assert!(first.iter().all(|(f, _)| f.starts_with("arcs-")));
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    for (f, bytes) in &first {
        assert_eq!(
            &fs::read(dir.path().join("o").join(f)).unwrap(),
            bytes,
            "{f}"
        );
    }
    assert_eq!(files(&dir.path().join("o")).len(), 5);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "a = 1.0\nbeta = 0.3\nclasses = [\"1\", \"2\"]\noutput_dir = \"cfg-out\"\n",
    )
    .unwrap();
    let o = run(dir.path(), &["solve", "--config", "run.toml", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["solution"]["beta"].as_f64(), Some(0.3));
    let o = run(
        dir.path(),
        &["solve", "--config", "run.toml", "--beta", "0.1", "--json"],
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["solution"]["beta"].as_f64(), Some(0.1));
    fs::write(
        dir.path().join("bad.toml"),
        "beta = 0.1\nenergy = -0.1\nq = \"1\"\n",
    )
    .unwrap();
    assert_eq!(
        run(dir.path(), &["solve", "--config", "bad.toml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn integrate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "integrate",
            "--beta",
            "0.1",
            "--a1",
            "0.3",
            "--state",
            "0.2,1.0,0.5,1.2",
            "--tau",
            "3",
            "--samples",
            "30",
            "--json",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let path = dir.path().join(v["file"].as_str().unwrap());
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "tau,xi,phi,xi_prime,phi_prime,t_physical,x,y"
    );
    assert_eq!(lines.count(), 31);
}

#[test]
fn figs_three_and_five() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["figs", "3"]).status.code(), Some(0));
    let out = files(&dir.path().join("out"));
    assert_eq!(out.iter().filter(|f| f.contains("-orbit-")).count(), 18);
    assert_eq!(out.iter().filter(|f| f.contains("-collision-")).count(), 2);
    let o = run(dir.path(), &["figs", "5", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for orbit in v["summary"]["orbits"].as_array().unwrap() {
        assert!(orbit["closure_error"].as_f64().unwrap() < 1e-8);
        assert!(!orbit["self_intersections"].as_array().unwrap().is_empty());
    }
    assert_eq!(run(dir.path(), &["figs", "7"]).status.code(), Some(2));
}

#[test]
fn chains_and_shadow_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "chains",
            "--centre-xy",
            "0.3,0.4",
            "--q",
            "1",
            "--beta",
            "0.1",
            "--json",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["counts"][3]["count"], "32");
    assert!((v["entropy"]["value"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-9);
    let o = run(
        dir.path(),
        &[
            "shadow",
            "--centre-xy",
            "0.3,0.4",
            "--q",
            "1",
            "--beta",
            "0.1",
            "--eps",
            "1e-2,1e-3",
            "--json",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert!(v["slope"].as_f64().is_some());
}
