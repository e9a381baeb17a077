//! Black-box tests of the binary: flags, exit codes, file formats.

use std::path::Path;
use std::process::{Command, Output};

use roesser::realization::LayerRealization;
use roesser::tensor::Signal;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roesser"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen", "kernel", "-d", "2", "-r", "2", "2", "--cin", "1", "--cout", "1", "--seed", "7", "-o", "a.json"])), 0);
    assert_eq!(code(&run(d, &["gen", "kernel", "-d", "2", "-r", "2", "2", "--cin", "1", "--cout", "1", "--seed", "7", "-o", "b.json"])), 0);
    assert_eq!(code(&run(d, &["gen", "kernel", "-d", "2", "-r", "2", "2", "--cin", "1", "--cout", "1", "--seed", "8", "-o", "c.json"])), 0);
    let a = std::fs::read(d.join("a.json")).unwrap();
    let b = std::fs::read(d.join("b.json")).unwrap();
    let c = std::fs::read(d.join("c.json")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);

    assert_eq!(code(&run(d, &["gen", "signal", "-d", "3", "-N", "5", "5", "5", "-c", "2", "--seed", "1", "-o", "s.json"])), 0);
    let sig: Signal = serde_json::from_str(&std::fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    assert_eq!(sig.extent().as_slice(), &[5, 5, 5]);
    assert_eq!(sig.channels(), 2);
}

#[test]
fn realize_writes_a_loadable_realization() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["gen", "kernel", "-d", "2", "-r", "2", "2", "--cin", "2", "--cout", "2", "--seed", "5", "-o", "k.json"]);
    let out = run(d, &["realize", "-k", "k.json", "-o", "real.json"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("state dims"), "dim report on stdout");
    let lr: LayerRealization = serde_json::from_str(&std::fs::read_to_string(d.join("real.json")).unwrap()).unwrap();
    match lr {
        LayerRealization::Plain(r) => assert_eq!(r.state_dims(), &[4, 4]),
        LayerRealization::Strided(_) => panic!("unit stride must produce the plain form"),
    }

    // Without -o the JSON goes to stdout and the table is dropped.
    let out = run(d, &["realize", "-k", "k.json"]);
    assert_eq!(code(&out), 0);
    let lr: LayerRealization = serde_json::from_str(&stdout(&out)).expect("stdout is bare JSON");
    assert!(matches!(lr, LayerRealization::Plain(_)));

    let out = run(d, &["realize", "-k", "k.json", "-o", "sreal.json", "--stride", "2", "2"]);
    assert_eq!(code(&out), 0);
    let lr: LayerRealization = serde_json::from_str(&std::fs::read_to_string(d.join("sreal.json")).unwrap()).unwrap();
    assert!(matches!(lr, LayerRealization::Strided(_)));
}

#[test]
fn simulate_matches_convolve_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["gen", "kernel", "-d", "2", "-r", "2", "2", "--cin", "2", "--cout", "1", "--seed", "9", "-o", "k.json"]);
    run(d, &["gen", "signal", "-d", "2", "-N", "9", "9", "-c", "2", "--seed", "2", "-o", "u.json"]);
    for extra in [
        vec![],
        vec!["--padding", "same"],
        vec!["--padding", "none"],
        vec!["--stride", "2", "2"],
        vec!["--dilation", "2", "2", "--padding", "none"],
    ] {
        let mut cargs = vec!["convolve", "-k", "k.json", "-i", "u.json", "-o", "yc.json"];
        cargs.extend(&extra);
        let mut sargs = vec!["simulate", "-k", "k.json", "-i", "u.json", "-o", "ys.json"];
        sargs.extend(&extra);
        assert_eq!(code(&run(d, &cargs)), 0, "convolve {extra:?}");
        assert_eq!(code(&run(d, &sargs)), 0, "simulate {extra:?}");
        let yc: Signal = serde_json::from_str(&std::fs::read_to_string(d.join("yc.json")).unwrap()).unwrap();
        let ys: Signal = serde_json::from_str(&std::fs::read_to_string(d.join("ys.json")).unwrap()).unwrap();
        assert_eq!(yc.extent(), ys.extent(), "{extra:?}");
        let gap = yc.data().iter().zip(ys.data()).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        assert!(gap <= 1e-12, "{extra:?}: {gap}");
    }
}

#[test]
fn simulate_accepts_a_realization_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["gen", "kernel", "-d", "2", "-r", "1", "1", "--cin", "1", "--cout", "1", "--seed", "4", "-o", "k.json"]);
    run(d, &["gen", "signal", "-d", "2", "-N", "6", "6", "-c", "1", "--seed", "3", "-o", "u.json"]);
    run(d, &["realize", "-k", "k.json", "-o", "real.json"]);
    assert_eq!(code(&run(d, &["simulate", "--realization", "real.json", "-i", "u.json", "-o", "y1.json"])), 0);
    assert_eq!(code(&run(d, &["simulate", "-k", "k.json", "-i", "u.json", "-o", "y2.json"])), 0);
    let y1 = std::fs::read(d.join("y1.json")).unwrap();
    let y2 = std::fs::read(d.join("y2.json")).unwrap();
    assert_eq!(y1, y2);

    // Builder flags conflict with a prebuilt file.
    let out = run(d, &["simulate", "--realization", "real.json", "-i", "u.json", "--stride", "2", "2"]);
    assert_eq!(code(&out), 2);
    // Cropping without the kernel extents is refused.
    let out = run(d, &["simulate", "--realization", "real.json", "-i", "u.json", "--padding", "same"]);
    assert_eq!(code(&out), 2);
    // With the kernel it works and matches the built-in path.
    assert_eq!(code(&run(d, &["simulate", "--realization", "real.json", "-k", "k.json", "-i", "u.json", "--padding", "same", "-o", "y3.json"])), 0);
    assert_eq!(code(&run(d, &["simulate", "-k", "k.json", "-i", "u.json", "--padding", "same", "-o", "y4.json"])), 0);
    assert_eq!(std::fs::read(d.join("y3.json")).unwrap(), std::fs::read(d.join("y4.json")).unwrap());
}

#[test]
fn verify_distinguishes_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["gen", "kernel", "-d", "2", "-r", "1", "1", "--cin", "1", "--cout", "1", "--seed", "3", "-o", "k.json"]);
    run(d, &["realize", "-k", "k.json", "-o", "real.json"]);

    let out = run(d, &["verify", "-k", "k.json", "--realization", "real.json", "-o", "rep.json"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("verification: PASS"));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["kernel_recovered"], true);

    // Corrupt one feedthrough entry: math failure, exit 1.
    let mut real: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("real.json")).unwrap()).unwrap();
    real["D"]["data"][0] = serde_json::json!(real["D"]["data"][0].as_f64().unwrap() + 0.5);
    std::fs::write(d.join("bad.json"), serde_json::to_string(&real).unwrap()).unwrap();
    let out = run(d, &["verify", "-k", "k.json", "--realization", "bad.json"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("verification: FAIL"));

    // Unparseable file: usage failure, exit 2.
    std::fs::write(d.join("junk.json"), "{").unwrap();
    assert_eq!(code(&run(d, &["verify", "-k", "k.json", "--realization", "junk.json"])), 2);
    // Missing file.
    assert_eq!(code(&run(d, &["verify", "-k", "nope.json"])), 2);
    // Stride flag contradicting a plain realization file.
    assert_eq!(code(&run(d, &["verify", "-k", "k.json", "--realization", "real.json", "--stride", "2", "2"])), 2);
}

#[test]
fn unsupported_combinations_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["gen", "kernel", "-d", "3", "-r", "1", "1", "1", "--seed", "2", "-o", "k3.json"]);
    assert_eq!(code(&run(d, &["realize", "-k", "k3.json", "--stride", "2", "2", "2"])), 3);
    assert_eq!(code(&run(d, &["verify", "-k", "k3.json", "--stride", "2", "2", "2"])), 3);

    // Stride larger than the kernel size is not realizable either.
    run(d, &["gen", "kernel", "-d", "2", "-r", "1", "1", "--seed", "2", "-o", "k2.json"]);
    assert_eq!(code(&run(d, &["realize", "-k", "k2.json", "--stride", "3", "3"])), 3);
}

#[test]
fn quiet_mode_suppresses_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["gen", "kernel", "-d", "2", "-r", "1", "1", "--cin", "1", "--cout", "1", "--seed", "3", "-o", "k.json"]);
    let out = run(d, &["realize", "--quiet", "-k", "k.json", "-o", "r.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "");
    let out = run(d, &["verify", "--quiet", "-k", "k.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "verification: PASS");
}

#[test]
fn analyze_reports_and_flags_problems() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["gen", "kernel", "-d", "2", "-r", "2", "2", "--cin", "2", "--cout", "2", "--seed", "13", "-o", "k.json"]);
    let out = run(d, &["analyze", "-k", "k.json", "-o", "rep.json"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("state dims"));
    assert!(text.contains("minimality"));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["dims"]["matches"], true);
    assert!(rep["rank_certificate"].is_object());

    // One-direction kernels get the Kalman report instead.
    run(d, &["gen", "kernel", "-d", "1", "-r", "3", "--cin", "2", "--cout", "2", "--seed", "11", "-o", "k1.json"]);
    let out = run(d, &["analyze", "-k", "k1.json"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("controllability"));
}

#[test]
fn gen_validates_flag_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen", "kernel", "-d", "2", "-r", "2", "--seed", "1"])), 2);
    assert_eq!(code(&run(d, &["gen", "signal", "-d", "1", "-N", "4", "4", "--seed", "1"])), 2);
    // Zero-size grids are rejected by the core types.
    assert_eq!(code(&run(d, &["gen", "signal", "-d", "1", "-N", "3", "-c", "0", "--seed", "1"])), 2);
}
