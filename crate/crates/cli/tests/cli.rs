//! End-to-end tests of the binary: file formats, report shape, exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64;
use serde_json::{json, Value};

use torsionlab::cone::ComplexMorphism;
use torsionlab::gen;
use torsionlab::io;
use torsionlab::morse::{HermitianStructure, MorseDatum};
use torsionlab::operator::{AlgebraTag, CMat, Operator};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torsionlab"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn torsion_of_two_term_complex() {
    let dir = tempfile::tempdir().unwrap();
    let cx = json!({
        "kind": "complex",
        "algebra": "scalar",
        "modules": [1, 1],
        "differentials": [{"algebra": "scalar", "matrix": [[[2.0, 0.0]]]}],
    });
    write(dir.path(), "cx.json", &cx);
    let out = run(&["torsion", "cx.json"], dir.path());
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["kind"], "run_report");
    assert_eq!(r["command"], "torsion");
    let v = r["results"]["log_torsion"]["value"].as_f64().unwrap();
    assert!((v - 2.0f64.ln()).abs() < 1e-12);
    assert_eq!(r["results"]["log_torsion"]["oracle"], "none");
    assert!(r["inputs"][0]["sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn fkdet_regular_representation_symbol() {
    let dir = tempfile::tempdir().unwrap();
    let tau = std::f64::consts::TAU;
    let alpha = Operator::multiplication(
        |t| Complex64::new((tau * t).cos() - 1.0, (tau * t).sin()),
        4096,
    );
    write(dir.path(), "alpha.json", &io::operator_to_value(&alpha));
    let out = run(&["fkdet", "alpha.json"], dir.path());
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["results"]["det_class"]["verdict"], "determinant_class");
    let v = r["results"]["fk_log_det"]["value"].as_f64().unwrap();
    assert!(v.abs() < 1e-4, "Jensen value {v}");
}

#[test]
fn fkdet_divergent_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let flat = Operator::multiplication(|x| Complex64::new((-1.0 / (x * x)).exp(), 0.0), 8192);
    write(dir.path(), "flat.json", &io::operator_to_value(&flat));
    let out = run(&["fkdet", "flat.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["results"]["det_class"]["verdict"], "divergent");
    assert_eq!(r["pass"], false);
}

#[test]
fn cone_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let built = gen::random_acyclic_complex(AlgebraTag::Scalar, &[2, 4, 2], 501);
    let comps = gen::random_self_chain_map(&built.complex, 2.0, 502);
    let f = ComplexMorphism::new(built.complex.clone(), built.complex.clone(), comps).unwrap();
    write(dir.path(), "f.json", &io::morphism_to_value(&f));
    for check in ["prop1_12", "composition"] {
        let out = run(&["cone", "f.json", "--check", check], dir.path());
        assert!(out.status.success(), "{check} failed");
        let r = report(&out);
        assert_eq!(r["pass"], true);
        assert!(r["checks"][0]["residual"].as_f64().unwrap() < 1e-8);
    }

    // inclusion into a direct sum for the long-sequence check
    let other = gen::random_acyclic_complex(AlgebraTag::Scalar, &[1, 3, 2], 503);
    let b = built.complex.direct_sum(&other.complex).unwrap();
    let j = ComplexMorphism::new(
        built.complex.clone(),
        b.clone(),
        (0..=2)
            .map(|i| {
                let mut m = CMat::zeros(b.dim(i), built.complex.dim(i));
                m.view_mut((0, 0), (built.complex.dim(i), built.complex.dim(i)))
                    .copy_from(&CMat::identity(built.complex.dim(i), built.complex.dim(i)));
                Operator::scalar(m)
            })
            .collect(),
    )
    .unwrap();
    write(dir.path(), "j.json", &io::morphism_to_value(&j));
    let out = run(&["cone", "j.json", "--check", "milnor"], dir.path());
    assert!(out.status.success());

    // coupling file: source = outer, target = inner, anticommuting components
    let coupling = gen::random_coupling(&built.complex, &other.complex, 504);
    let raw = json!({
        "kind": "morphism",
        "source": serde_json::to_value(io::ComplexJson::from_complex(&other.complex)).unwrap(),
        "target": serde_json::to_value(io::ComplexJson::from_complex(&built.complex)).unwrap(),
        "components": coupling
            .iter()
            .map(|w| serde_json::to_value(io::OperatorJson::from_operator(w)).unwrap())
            .collect::<Vec<_>>(),
    });
    write(dir.path(), "w.json", &raw);
    let out = run(&["cone", "w.json", "--check", "cmm"], dir.path());
    assert!(
        out.status.success(),
        "cmm: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn mu_files(dir: &Path, samples: usize) -> (PathBuf, PathBuf, PathBuf) {
    let datum = MorseDatum::circle(&[0.1, 0.5], &[0.3, 0.8]).unwrap();
    let morse = write(dir, "datum.json", &io::morse_to_value(&datum));
    let g = Operator::scalar(CMat::from_element(1, 1, c(3.0)));
    let rep = write(
        dir,
        "rep.json",
        &json!({
            "kind": "representation",
            "generators": {"g": serde_json::to_value(io::OperatorJson::from_operator(&g)).unwrap()},
        }),
    );
    let mu = HermitianStructure::from_fn(
        |t| CMat::from_element(1, 1, c(9.0f64.powf(t))),
        samples,
        CMat::from_element(1, 1, c(1.0 / 3.0)),
    )
    .unwrap();
    let mu = write(dir, "mu.json", &io::hermitian_to_value(&mu));
    (morse, rep, mu)
}

#[test]
fn morse_anomalies_pass() {
    let dir = tempfile::tempdir().unwrap();
    mu_files(dir.path(), 2048);
    for anomaly in ["hermitian", "subdivision"] {
        let out = run(
            &[
                "morse",
                "datum.json",
                "rep.json",
                "mu.json",
                "--anomaly",
                anomaly,
            ],
            dir.path(),
        );
        assert!(
            out.status.success(),
            "{anomaly}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let r = report(&out);
        assert_eq!(r["pass"], true);
    }
}

#[test]
fn failing_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // so close to an integral twist that the zeta-derivative differencing
    // loses more accuracy than the 1e-6 the vanishing is held to
    let out = run(&["circle", "--theta", "1e-8", "--mode", "relative"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["pass"], false);
    assert_eq!(r["checks"][0]["pass"], false);
}

#[test]
fn circle_modes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["circle", "--theta", "0.3333333", "--mode", "det"], dir.path());
    assert!(out.status.success());
    let r = report(&out);
    let v = r["results"]["zeta_det"]["value"].as_f64().unwrap();
    assert!((v - 3.0).abs() < 1e-5);

    let out = run(&["circle", "--theta", "0.41", "--mode", "relative"], dir.path());
    assert!(out.status.success());

    let a = Operator::scalar(CMat::from_element(1, 1, c(2.0)));
    write(dir.path(), "a.json", &io::operator_to_value(&a));
    let out = run(
        &["circle", "--holonomy", "a.json", "--mode", "theorem01"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    let v = r["results"]["value"].as_f64().unwrap();
    assert!((v + 0.5 * 2.0f64.ln()).abs() < 1e-6, "invariant {v}");

    let out = run(
        &[
            "circle",
            "--holonomy",
            "a.json",
            "--mode",
            "prop51",
            "--chi-n",
            "-2",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let r = report(&out);
    let v = r["results"]["invariant"]["value"].as_f64().unwrap();
    assert!((v - 2.0f64.ln()).abs() < 1e-6, "product invariant {v}");

    let out = run(
        &["circle", "--mode", "witten", "--witten-t", "30", "--grid", "512"],
        dir.path(),
    );
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["results"]["count_small"], 1);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["torsion", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.json"), "{not json").unwrap();
    let out = run(&["torsion", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));

    // integral twist of the unitary holonomy: no zeta determinant
    let out = run(&["circle", "--theta", "1.0", "--mode", "det"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cx = json!({
        "kind": "complex",
        "algebra": "scalar",
        "modules": [1, 1],
        "differentials": [{"algebra": "scalar", "matrix": [[[3.0, 0.0]]]}],
    });
    write(dir.path(), "cx.json", &cx);
    let strip_time = |out: &Output| {
        let mut v = report(out);
        v.as_object_mut().unwrap().remove("wall_time_ms");
        serde_json::to_string(&v).unwrap()
    };
    let a = run(&["torsion", "cx.json"], dir.path());
    let b = run(&["torsion", "cx.json"], dir.path());
    assert_eq!(strip_time(&a), strip_time(&b));

    let a = run(&["verify-all", "--seed", "3", "--size", "smoke"], dir.path());
    let b = run(&["verify-all", "--seed", "3", "--size", "smoke"], dir.path());
    assert!(a.status.success());
    assert_eq!(strip_time(&a), strip_time(&b));
}
