use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn swarmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmsim"))
        .args(args)
        .env_remove("SWARMSIM_THREADS")
        .output()
        .expect("spawn swarmsim")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

// Three releases at roughly 3200 s spacing need a bit under four timesteps.
const SHORT: [&str; 6] = ["--preset", "synthetic", "--size", "3", "--override", "sim.duration_s=13000"];

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate"];
    args.extend_from_slice(&SHORT);
    args.extend_from_slice(&["--out", out.to_str().unwrap()]);
    args.extend_from_slice(extra);
    swarmsim(&args)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = TempDir::new().unwrap();
    let out = simulate(dir.path(), &["--threads", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    for (file, header) in [
        ("events.csv", "t_s,"),
        ("trajectory.csv", "t_s,sc_id,x_km,y_km,z_km,vx_km_s,vy_km_s,vz_km_s"),
        ("samples.csv", "t_s,x_km,y_km,z_km,ax,ay,az,sc_id"),
        ("coefficients.csv", "l,m,C,S"),
    ] {
        let text = read(&dir.path().join(file));
        assert!(text.starts_with(header), "{file}: {}", text.lines().next().unwrap_or(""));
    }
    let summary = read(&dir.path().join("summary.json"));
    for row in ["ΔV_min [m/s]", "ΔV_max [m/s]", "ΔV_mean [m/s]", "Collision events", "Safety events", "Re-entry events"] {
        assert!(summary.contains(row), "summary lacks {row}");
    }
    assert!(summary.contains("\"swarm_size\": 3"));
    assert!(stdout(&out).contains("Re-entry events"));
    assert!(stderr(&out).contains("on 1 thread(s)"));
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert!(simulate(a.path(), &["--seed", "7", "--threads", "1"]).status.success());
    assert!(simulate(b.path(), &["--seed", "7", "--threads", "1"]).status.success());
    for file in ["summary.json", "events.csv", "trajectory.csv", "samples.csv", "coefficients.csv"] {
        assert_eq!(read(&a.path().join(file)), read(&b.path().join(file)), "{file} differs");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert!(simulate(a.path(), &["--threads", "1"]).status.success());
    let out = simulate(b.path(), &["--threads", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("on 4 thread(s)"));
    for file in ["events.csv", "trajectory.csv", "summary.json"] {
        assert_eq!(read(&a.path().join(file)), read(&b.path().join(file)), "{file} differs");
    }
}

#[test]
fn thread_env_is_used_and_flag_wins() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["simulate"];
    args.extend_from_slice(&SHORT);
    args.extend_from_slice(&["--out", dir.path().to_str().unwrap()]);
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_swarmsim"))
            .args(&args)
            .args(extra)
            .env("SWARMSIM_THREADS", "2")
            .output()
            .unwrap()
    };
    let from_env = run(&[]);
    assert!(from_env.status.success());
    assert!(stderr(&from_env).contains("on 2 thread(s)"), "{}", stderr(&from_env));
    let from_flag = run(&["--threads", "3"]);
    assert!(stderr(&from_flag).contains("on 3 thread(s)"), "{}", stderr(&from_flag));
}

#[test]
fn zero_threads_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = simulate(dir.path(), &["--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_mascon_file_without_fallback_names_the_path() {
    let dir = TempDir::new().unwrap();
    let out = swarmsim(&[
        "inspect",
        "--preset",
        "synthetic",
        "--override",
        "body.mascon_path=no/such/body.csv",
        "--override",
        "body.synthetic=null",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("no/such/body.csv"), "{}", stderr(&out));

    let sim = simulate(dir.path(), &["--override", "body.mascon_path=gone.csv"]);
    assert!(sim.status.success());
    assert!(stderr(&sim).contains("gone.csv not found, using the synthetic body"));
}

#[test]
fn malformed_scenario_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ \"name\": \"x\", ").unwrap();
    let out = swarmsim(&["inspect", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = swarmsim(&["inspect", "--preset", "synthetic", "--override", "swarm.size=-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = swarmsim(&["inspect", "--preset", "vesta"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bundled_scenarios_resolve() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ["itokawa", "bennu", "ryugu", "synthetic"] {
        let path = root.join(format!("{name}.json"));
        let out = swarmsim(&["inspect", "--scenario", path.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", stderr(&out));
        assert!(stdout(&out).contains("swarm size"));
    }
}

#[test]
fn gen_body_writes_reloadable_mascons() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("body.csv");
    let out = swarmsim(&[
        "gen-body",
        "--semi-axes",
        "0.3,0.2,0.1",
        "--n",
        "100",
        "--mu",
        "1e-9",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = read(&path);
    assert_eq!(text.lines().count(), 101);
    let model = swarm_core::body_model::load_mascons(&path).unwrap();
    assert_eq!(model.len(), 100);
    for mu in model.mus() {
        assert!((mu - 1e-11).abs() <= 1e-24);
    }
    for p in model.positions() {
        let q = (p.x / 0.3).powi(2) + (p.y / 0.2).powi(2) + (p.z / 0.1).powi(2);
        assert!(q <= 1.0 + 1e-12);
    }

    let again = dir.path().join("again.csv");
    let args = ["gen-body", "--semi-axes", "0.3,0.2,0.1", "--n", "100", "--mu", "1e-9", "--seed", "3", "--out"];
    let mut args = args.to_vec();
    args.push(again.to_str().unwrap());
    assert!(swarmsim(&args).status.success());
    assert_eq!(text, read(&again));
}

fn point_mass_samples(path: &Path, mu: f64, radius: f64, count: usize) {
    let mut text = String::from("t_s,x_km,y_km,z_km,ax,ay,az,sc_id\n");
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..count {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
        let rho = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        let r = [radius * rho * phi.cos(), radius * rho * phi.sin(), radius * z];
        let k = -mu / radius.powi(3);
        text.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},0\n",
            i as f64,
            r[0],
            r[1],
            r[2],
            k * r[0],
            k * r[1],
            k * r[2]
        ));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn fit_recovers_a_point_mass() {
    let dir = TempDir::new().unwrap();
    let samples = dir.path().join("samples.csv");
    let coeffs = dir.path().join("coeffs.csv");
    point_mass_samples(&samples, 2e-9, 1.5, 200);
    let out = swarmsim(&[
        "fit",
        "--samples",
        samples.to_str().unwrap(),
        "-L",
        "2",
        "--r0",
        "1",
        "--mu",
        "2e-9",
        "--out",
        coeffs.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = read(&coeffs);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("l,m,C,S"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let (l, m, c, s) = (row[0], row[1], row[2], row[3]);
        if l == 0.0 && m == 0.0 {
            assert_eq!(c, 1.0);
        } else {
            assert!(c.abs() <= 1e-10 && s.abs() <= 1e-10, "C{l}{m} = {c}, S{l}{m} = {s}");
        }
    }
}

#[test]
fn fit_against_a_reference_prints_errors() {
    let dir = TempDir::new().unwrap();
    let body = dir.path().join("body.csv");
    let samples = dir.path().join("samples.csv");
    let coeffs = dir.path().join("coeffs.csv");
    std::fs::write(&body, "x_km,y_km,z_km,mu_km3_s2\n0,0,0,2e-9\n").unwrap();
    point_mass_samples(&samples, 2e-9, 1.5, 100);
    let out = swarmsim(&[
        "fit",
        "--samples",
        samples.to_str().unwrap(),
        "--degree",
        "2",
        "--r0",
        "1",
        "--reference",
        body.to_str().unwrap(),
        "--out",
        coeffs.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("relative error"), "{}", stdout(&out));
}

#[test]
fn fit_error_exit_codes() {
    let dir = TempDir::new().unwrap();
    let samples = dir.path().join("samples.csv");
    let coeffs = dir.path().join("coeffs.csv");
    let fit = |degree: &str| {
        swarmsim(&[
            "fit",
            "--samples",
            samples.to_str().unwrap(),
            "-L",
            degree,
            "--r0",
            "1",
            "--mu",
            "1e-9",
            "--out",
            coeffs.to_str().unwrap(),
        ])
    };

    std::fs::write(&samples, "t_s,x_km,y_km,z_km,ax,ay,az,sc_id\n0,1,2,oops,0,0,0,0\n").unwrap();
    assert_eq!(fit("2").status.code(), Some(2));

    point_mass_samples(&samples, 1e-9, 1.5, 3);
    let out = fit("4");
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));

    let missing = dir.path().join("absent.csv");
    let out = swarmsim(&[
        "fit",
        "--samples",
        missing.to_str().unwrap(),
        "--r0",
        "1",
        "--mu",
        "1e-9",
        "--out",
        coeffs.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    point_mass_samples(&samples, 1e-9, 1.5, 50);
    let out = swarmsim(&["fit", "--samples", samples.to_str().unwrap(), "--r0", "1", "--out", coeffs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(swarmsim(&[]).status.code(), Some(64));
    assert_eq!(swarmsim(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(swarmsim(&["simulate", "--preset", "synthetic"]).status.code(), Some(64));
    assert_eq!(swarmsim(&["inspect", "--preset", "synthetic", "--scenario", "x.json"]).status.code(), Some(64));
    assert_eq!(swarmsim(&["--help"]).status.code(), Some(0));
    assert_eq!(swarmsim(&["--version"]).status.code(), Some(0));
}

#[test]
fn inspect_prints_the_resolved_scenario() {
    let out = swarmsim(&["inspect", "--preset", "bennu", "--size", "7", "--seed", "11"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("swarm size        7"));
    assert!(text.contains("seed              11"));
    assert!(text.contains("srp               on"));
}
