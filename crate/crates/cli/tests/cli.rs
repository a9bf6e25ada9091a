use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdsim")).args(args).output().expect("binary runs")
}

fn config(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(rel).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decouple_reports_the_working_point() {
    let o = fdsim(&["decouple", "--theta-over-pi", "0.8", "-k", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("U/J = 3.000000"), "{out}");
    assert!(out.contains("theta'/pi = 0.600000"), "{out}");

    let o = fdsim(&["decouple", "--theta-over-pi", "0.8", "-k", "2", "--attractive"]);
    assert!(stdout(&o).contains("U/J = -3.000000"), "{}", stdout(&o));

    let o = fdsim(&["decouple", "--theta-over-pi", "0.8", "-k", "2", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["u_over_j"].as_f64().unwrap() - 3.0).abs() < 1e-12);

    let o = fdsim(&["decouple", "--theta-over-pi", "0.8", "-k", "2", "--csv"]);
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn exit_codes() {
    // no decoupling point: theta above k pi / 2
    assert_eq!(fdsim(&["decouple", "--theta-over-pi", "0.9", "-k", "1"]).status.code(), Some(3));
    let o = fdsim(&["decouple", "--theta-over-pi", "1.5", "-k", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("theta_over_pi"), "{}", stderr(&o));

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e");
    let o = fdsim(&["evolve", "--boundary", "torus", "--periods", "1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("boundary"), "{}", stderr(&o));

    let o = fdsim(&["evolve", "--initial-site", "9,0", "--periods", "1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("initial_site"), "{}", stderr(&o));

    let missing = tmp.path().join("missing.toml");
    assert_eq!(fdsim(&["evolve", "-c", path(&missing)]).status.code(), Some(1));
}

#[test]
fn config_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "model = \"afi\"\nlx = 9\nly = 6\nboundary = \"open\"\n";
    let cases = [
        ("theta_over_pi = 1.2\n", "theta_over_pi"),
        ("theta_over_pi = 0.8\nperiodz = 4\n", "periodz"),
        ("theta_over_pi = 0.8\nalpha = 0.25\n", "alpha"),
        ("theta_over_pi = 0.8\nk_index = 2\nu_over_j = 3.0\n", "k_index"),
        ("k_index = 2\n", "theta_over_pi"),
    ];
    for (n, (text, field)) in cases.iter().enumerate() {
        let file = tmp.path().join(format!("bad{n}.toml"));
        fs::write(&file, format!("{base}{text}")).unwrap();
        let o = fdsim(&["evolve", "-c", path(&file), "--out", path(&tmp.path().join("o"))]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{text}: {}", stderr(&o));
    }
    let file = tmp.path().join("type.toml");
    fs::write(&file, base.replace("lx = 9", "lx = \"nine\"")).unwrap();
    let o = fdsim(&["evolve", "-c", path(&file)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nine"), "{}", stderr(&o));
}

#[test]
fn flags_override_the_file_and_the_resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let o = fdsim(&[
        "evolve",
        "-c",
        &config("evolve/detuned.toml"),
        "--periods",
        "3",
        "--initial-site",
        "4,0",
        "--out",
        path(&first),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let overlap = fs::read_to_string(first.join("overlap.csv")).unwrap();
    assert_eq!(overlap.lines().count(), 1 + 4);
    assert!(overlap.starts_with("t,overlap,schmidt_entropy\n"));
    let resolved = fs::read_to_string(first.join("resolved.toml")).unwrap();
    assert!(resolved.contains("periods = 3"), "{resolved}");
    assert!(resolved.contains("initial_site = [\n    4,\n    0,\n]") || resolved.contains("initial_site = [4, 0]"), "{resolved}");
    assert!(!resolved.contains("output"), "{resolved}");

    // feeding the resolved file back in gives the same outputs and
    // resolves to itself
    let second = tmp.path().join("second");
    let replay = first.join("resolved.toml");
    let o = fdsim(&["evolve", "-c", path(&replay), "--out", path(&second)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["overlap.csv", "trajectory.json", "resolved.toml", "density/t0003.csv"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn explicit_interaction_replaces_the_decoupling_order() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("u");
    let o = fdsim(&[
        "evolve",
        "-c",
        &config("evolve/working_point.toml"),
        "--u-over-j",
        "0",
        "--periods",
        "2",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved = fs::read_to_string(out.join("resolved.toml")).unwrap();
    assert!(!resolved.contains("k_index"), "{resolved}");
    let trajectory: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trajectory.json")).unwrap()).unwrap();
    assert_eq!(trajectory["metadata"]["u_over_j"].as_f64(), Some(0.0));
    // free particles leave the doublon subspace
    let last = fs::read_to_string(out.join("overlap.csv")).unwrap();
    let o_d: f64 = last.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(o_d < 0.9, "{o_d}");
}

#[test]
fn chern_and_stability_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let chern = tmp.path().join("chern");
    let o = fdsim(&["chern", "-c", &config("chern/hhf_torus.toml"), "--out", path(&chern)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(chern.join("chern.csv")).unwrap();
    let cherns: Vec<i64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(cherns.len(), 2);
    assert_eq!(cherns[0], -cherns[1]);
    assert_eq!(cherns[0].abs(), 1);

    // the chern command needs a torus, the spectrum command a cylinder
    let o = fdsim(&["chern", "--boundary", "open", "--out", path(&chern)]);
    assert_eq!(o.status.code(), Some(2));
    let o = fdsim(&["spectrum", "--boundary", "torus", "--out", path(&chern)]);
    assert_eq!(o.status.code(), Some(2));

    let st = tmp.path().join("stability");
    let o = fdsim(&["stability", "-c", &config("stability/decay.toml"), "--tune", "--out", path(&st)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pdec = fs::read_to_string(st.join("pdec.csv")).unwrap();
    assert!(pdec.starts_with("k,theta_prime_over_pi,"));
    let tune: serde_json::Value = serde_json::from_str(&fs::read_to_string(st.join("tune.json")).unwrap()).unwrap();
    assert!(tune["p_dec"].as_f64().unwrap() < 2.5e-4);
}

#[test]
fn validate_passes_every_check() {
    let o = fdsim(&["validate"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().count() >= 5);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

#[test]
fn default_output_directory_is_per_command() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fdsim"))
        .args(["evolve", "--periods", "1"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let dir: PathBuf = tmp.path().join("out/evolve");
    assert!(dir.join("overlap.csv").exists());
    assert!(dir.join("density/t0000.csv").exists());
}
