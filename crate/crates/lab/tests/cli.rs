use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rhlab::artifact;
use rhlab::run;
use rhlab::scenario::{self, Scenario};
use rhlab::verify;
use rhlab_core::flow::{self, StepControl};

fn rhlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhlab")).args(args).output().expect("spawn rhlab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn presets_are_listed() {
    let out = rhlab(&["presets"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for (name, _) in scenario::PRESETS {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn run_verify_plots_round_trip_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let d = dir.to_str().unwrap();
    let run = rhlab(&["run", "--scenario", "warped_ricci", "--out", d, "--resolution", "32", "--tmax", "0.2", "--p", "4"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout(&run).contains("PASS  ball_estimate"));
    let stored = Scenario::load(&dir.join(artifact::SCENARIO)).unwrap();
    assert_eq!((stored.resolution[0], stored.horizon, stored.p), (32, 0.2, 4.0));

    let ver = rhlab(&["verify", "--artifact", d]);
    assert!(ver.status.success(), "{}", stdout(&ver));
    assert!(!stdout(&ver).contains("FAIL"));

    let plots = rhlab(&["plots", "--artifact", d]);
    assert!(plots.status.success());
    let svg = fs::read_to_string(dir.join("plots").join("comparison.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    for id in ["curvature_energy", "hessian_coupling", "gradient_energy"] {
        assert!(dir.join("plots").join(format!("{id}.svg")).exists());
    }
    let again = rhlab(&["plots", "--artifact", d]);
    assert_eq!(stdout(&plots), stdout(&again));
}

#[test]
fn scenario_file_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.scn");
    let text = scenario::preset("flat_static").unwrap().to_text().replace("localization.rho = 1.0", "localization.rho = -2.0");
    assert!(text.contains("-2.0"));
    fs::write(&path, text).unwrap();
    let out = rhlab(&["run", "--scenario", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("localization.rho"), "{err}");

    let out = rhlab(&["run", "--scenario", "no_such_preset", "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_preset"));
}

#[test]
fn verify_rejects_an_inflated_left_side() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut scn = scenario::preset("warped_coupled").unwrap();
    scn.resolution[0] = 32;
    scn.snapshots = 10;
    let out = run::execute(&scn).unwrap();
    run::write_artifact(&out, dir).unwrap();
    assert!(verify::verify_dir(dir).unwrap().pass());

    let mut art = artifact::load(dir).unwrap();
    for s in &mut art.samples {
        s.tk[0] *= 10.0;
    }
    fs::write(dir.join(artifact::MONITOR), artifact::monitor_csv(&art.samples, &art.u)).unwrap();
    let outcome = verify::verify_dir(dir).unwrap();
    assert!(outcome.failures().contains(&"gradient_energy"), "{}", outcome.render());
    let cli = rhlab(&["verify", "--artifact", dir.to_str().unwrap()]);
    assert!(!cli.status.success());
    assert!(stdout(&cli).contains("FAIL gradient_energy"));
}

#[test]
fn singular_flow_is_persisted_with_its_status() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = scenario::preset("flat_coupled").unwrap();
    let traj = flow::evolve(scn.initial_state().unwrap(), &StepControl::new(0.05, 2), &mut []).unwrap();
    let out = run::audit(&scn, traj, Some((0.06, 3))).unwrap();
    assert_eq!(out.report.status, "singular at t=0.06");
    assert_eq!(out.report.flow.singular_point, Some(3));
    assert!(!out.report.all_pass());
    run::write_artifact(&out, tmp.path()).unwrap();
    assert!(!tmp.path().join(artifact::MONITOR).exists());
    let outcome = verify::verify_dir(tmp.path()).unwrap();
    assert_eq!(outcome.failures(), vec!["flow"]);
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_file())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = rhlab(&["run", "--scenario", "conformal_ricci", "--out", d.to_str().unwrap(), "--resolution", "32"]);
        assert!(o.status.success());
    }
    let (fa, fb) = (read_all(&a), read_all(&b));
    assert_eq!(fa.len(), 6);
    assert!(fa == fb);
}
