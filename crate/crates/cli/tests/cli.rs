use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wforge"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["synth", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn report(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.report.json"))).unwrap()).unwrap()
}

fn minmax(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

/// Bundled config with edits applied to its JSON, written into `dir`.
fn edited(name: &str, dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(bundled(name)).unwrap()).unwrap();
    edit(&mut v);
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

#[test]
fn enneper_is_minimal() {
    let dir = tempfile::tempdir().unwrap();
    let o = synth(&bundled("enneper.json"), dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(dir.path(), "enneper");
    assert_eq!(r["geometry"]["W"].as_f64(), Some(0.0));
    let (_, h_max) = minmax(&r["geometry"]["H_fd_minmax"]);
    assert!(h_max <= 1e-6, "H_max = {h_max}");
    let obj = fs::read_to_string(dir.path().join("enneper.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 81 * 81);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 2 * 80 * 80);
}

#[test]
fn cylinder_has_unit_mean_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let o = synth(&bundled("cylinder.json"), dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = &report(dir.path(), "cylinder")["geometry"];
    let (lo, hi) = minmax(&g["H_fd_minmax"]);
    assert!((lo - 1.0).abs() <= 1e-6 && (hi - 1.0).abs() <= 1e-6, "H in [{lo}, {hi}]");
    let (klo, khi) = minmax(&g["K_minmax"]);
    assert!(klo.abs() <= 1e-6 && khi.abs() <= 1e-6);
}

#[test]
fn outputs_carry_the_hash_and_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = bundled("torus_r4.json");
    assert_eq!(code(&synth(&cfg, a.path(), &[])), 0);
    assert_eq!(code(&synth(&cfg, b.path(), &[])), 0);
    let hash = report(a.path(), "torus_r4")["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    for f in ["torus_r4.chart.csv", "torus_r4.p.csv", "torus_r4.H.csv", "torus_r4.obj", "torus_r4.report.json"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
        assert!(String::from_utf8_lossy(&x).contains(&hash), "{f} lacks the config hash");
    }
    let gm = &report(a.path(), "torus_r4")["gauss_map"];
    for key in ["eta_relation", "imag_constraint", "modulus_balance", "eta_square", "log_h_gradient", "p_roundtrip_max_err"] {
        assert!(gm[key].as_f64().unwrap() <= 1e-6, "{key}: {}", gm[key]);
    }
    assert!(gm["quadric_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn r4_with_one_solution_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited("enneper.json", dir.path(), |v| v["ambient"]["type"] = "r4".into());
    let o = synth(&cfg, dir.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("ambient"), "{}", stderr(&o));
}

#[test]
fn unknown_fields_are_reported_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited("cylinder.json", dir.path(), |v| v["grid"]["spacing"] = 1.0.into());
    let o = synth(&cfg, dir.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("grid") && stderr(&o).contains("spacing"), "{}", stderr(&o));
}

#[test]
fn strict_mode_turns_degeneracy_into_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // psi and phi both vanish at z = 0, a grid point.
    let cfg = edited("enneper.json", dir.path(), |v| {
        v["grid"]["nx"] = 9.into();
        v["grid"]["ny"] = 9.into();
        v["potential"]["family"]["phi"]["coeffs"] = serde_json::json!([[0.0, 0.0], [1.0, 0.0]]);
    });
    let lenient = synth(&cfg, dir.path(), &[]);
    assert_eq!(code(&lenient), 0, "{}", stderr(&lenient));
    assert!(stderr(&lenient).contains("degenerate"));
    let strict = synth(&cfg, dir.path(), &["--strict"]);
    assert_eq!(code(&strict), 2, "{}", stderr(&strict));
}

#[test]
fn solver_failure_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited("torus_r4.json", dir.path(), |v| {
        v["potential"]["terms"][0]["amp"] = 3.0.into();
        v["solutions"]["max_iter"] = 40.into();
    });
    let o = synth(&cfg, dir.path(), &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("no convergence"));
}

#[test]
fn mvn_bump_conserves_w() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["deform", bundled("mvn_bump.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("mvn_bump.run.json")).unwrap()).unwrap();
    assert_eq!(side["steps"].as_u64(), Some(1000));
    assert!(side["relative_w_drift"].as_f64().unwrap() <= 1e-6);
    let csv = fs::read_to_string(dir.path().join("mvn_bump.trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next(), Some("t,W,dirac_residual"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn deform_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    let big = edited("mvn_bump.json", dir.path(), |v| v["flow"]["dt"] = 0.5.into());
    let o = run(&["deform", big.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("exceeds stability limit"), "{}", stderr(&o));

    let zero = edited("mvn_bump.json", dir.path(), |v| v["flow"]["record_every"] = 0.into());
    let o = run(&["deform", zero.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("flow.record_every"), "{}", stderr(&o));

    let none = edited("mvn_bump.json", dir.path(), |v| {
        v.as_object_mut().unwrap().remove("flow");
    });
    let o = run(&["deform", none.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn deform_with_spinors_writes_meshes_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited("torus_r4.json", dir.path(), |v| {
        v["flow"] = serde_json::json!({ "t_end": 0.05, "record_every": 30, "snapshots": true });
    });
    let o = run(&["deform", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("torus_r4.run.json")).unwrap()).unwrap();
    let frames = side["steps"].as_u64().unwrap().div_ceil(30) as usize + 1;
    for k in 0..frames {
        assert!(dir.path().join(format!("torus_r4.{k:04}.obj")).exists());
        assert!(dir.path().join(format!("torus_r4.p.{k:04}.csv")).exists());
    }
    assert!(side["dirac_residual_growth"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn stored_solutions_reproduce_the_surface() {
    let dir = tempfile::tempdir().unwrap();
    let first = edited("torus_r4.json", dir.path(), |v| v["outputs"]["spinors"] = true.into());
    assert_eq!(code(&synth(&first, dir.path(), &[])), 0);
    let again = edited("torus_r4.json", dir.path(), |v| {
        v["potential"] = serde_json::json!({ "type": "csv", "path": "torus_r4.p.csv" });
        v["solutions"] = serde_json::json!({ "type": "files", "manifests": ["torus_r4.s0.json", "torus_r4.s1.json"] });
        v.as_object_mut().unwrap().remove("mix");
        v["outputs"]["name"] = "reloaded".into();
    });
    let o = synth(&again, dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (a, b) = (report(dir.path(), "torus_r4"), report(dir.path(), "reloaded"));
    let wa = a["geometry"]["W_direct"].as_f64().unwrap();
    let wb = b["geometry"]["W_direct"].as_f64().unwrap();
    assert!((wa - wb).abs() <= 1e-12 * wa.abs(), "{wa} vs {wb}");
}

#[test]
fn export_projects_and_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&synth(&bundled("torus_r4.json"), dir.path(), &[])), 0);
    let chart = dir.path().join("torus_r4.chart.csv");
    let obj = dir.path().join("proj.obj");
    let o = run(&["export", chart.to_str().unwrap(), "--obj", obj.to_str().unwrap(), "--project", "1,2,4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&obj).unwrap();
    assert!(text.contains("config_hash=") && text.contains("# coordinates 1,2,4"));

    let o = run(&["export", chart.to_str().unwrap(), "--obj", obj.to_str().unwrap(), "--project", "1,2,9"]);
    assert_eq!(code(&o), 1);

    let broken = dir.path().join("broken.csv");
    let good = fs::read_to_string(&chart).unwrap();
    fs::write(&broken, good.replacen("\n0,1,", "\n0,1,oops", 1)).unwrap();
    let o = run(&["export", broken.to_str().unwrap(), "--obj", obj.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("parse error at line"), "{}", stderr(&o));
}

#[test]
fn verify_quick_passes() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("verify.json");
    let o = run(&["verify", "--level", "quick", "--json", json.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&run(&["verify", "--level", "fast"])), 1);
    assert_eq!(code(&run(&["synth", "/nonexistent/config.json"])), 1);
    let o = bin().args(["verify"]).env("WFORGE_THREADS", "many").output().unwrap();
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}
