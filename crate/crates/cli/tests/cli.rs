use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn tmce(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmce"))
        .args(args)
        .env("TMCE_OUTPUT_ROOT", root)
        .output()
        .expect("tmce runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn grim_reaper_scenario_meets_its_oracle() {
    let root = tempfile::tempdir().unwrap();
    let out = tmce(root.path(), &["solve", scenario("grim_reaper.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = root.path().join("runs/grim_reaper");
    let r = report(&dir);
    assert!(r["residual_linf"].as_f64().unwrap() <= 1e-3);
    assert!(r["error"]["sampled_linf"].as_f64().unwrap() <= 1e-3);
    assert_eq!(r["verdict"], "CLASSIFIED");
    assert_eq!(r["config"]["psi"]["expression"], "-ln(cos(x))");
    assert_eq!(r["config"]["solver"]["cap_schedule"][1], 10.0);
    let solution = std::fs::read_to_string(dir.join("solution.csv")).unwrap();
    assert_eq!(solution.lines().next(), Some("node,x0,u,class"));
    assert_eq!(solution.lines().count(), 1 + 513);
    let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
    assert!(history.starts_with("iteration,sigma,cap,energy,grad_norm\n"));
}

#[test]
fn identical_configs_give_identical_csv_bodies() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for root in [a.path(), b.path()] {
        let out = tmce(root, &["solve", scenario("disk_bowl.cfg").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    for file in ["solution.csv", "history.csv"] {
        let x = std::fs::read(a.path().join("runs/disk_bowl").join(file)).unwrap();
        let y = std::fs::read(b.path().join("runs/disk_bowl").join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
}

#[test]
fn config_errors_exit_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "noalpha.cfg", "domain = euclidean_disk(1)\nh = 0.1\n");
    let out = tmce(dir.path(), &["solve", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let cfg = write_config(dir.path(), "torus.cfg", "domain = torus(1)\nalpha = 1\nh = 0.1\n");
    let out = tmce(dir.path(), &["solve", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("torus"));

    let cfg = write_config(dir.path(), "inject.cfg", "domain = interval(1)\nalpha = 1\nh = 0.1\npsi = system(1)\n");
    let out = tmce(dir.path(), &["solve", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("psi"));
}

#[test]
fn unconverged_single_cap_run_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "short.cfg",
        "domain = euclidean_disk(1)\nalpha = 1\nh = 0.125\nsolver.cap_schedule = 5\nsolver.max_iters = 1\nsolver.sigma_steps = 1\n",
    );
    let out = tmce(dir.path(), &["solve", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(report(&dir.path().join("runs/short"))["verdict"], "INCONCLUSIVE");
}

#[test]
fn hemisphere_scenario_is_classified() {
    let root = tempfile::tempdir().unwrap();
    let out = tmce(root.path(), &["solve", scenario("hemisphere.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&root.path().join("runs/hemisphere"));
    let c = &r["classification_counts"];
    let total = c["finite"].as_u64().unwrap() + c["plus_inf"].as_u64().unwrap() + c["minus_inf"].as_u64().unwrap();
    assert_eq!(total, r["mesh"]["nodes"].as_u64().unwrap());
    // The relaxed energy sits near the wall value π either way.
    assert!((r["energies"]["J"].as_f64().unwrap() - std::f64::consts::PI).abs() < 0.02 * std::f64::consts::PI);
}

#[test]
fn both_formulations_agree_on_the_interval() {
    let root = tempfile::tempdir().unwrap();
    let out = tmce(root.path(), &["solve", scenario("interval_indicator.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&root.path().join("runs/interval_indicator"));
    assert_eq!(r["indicator"]["converged"], true);
    // 2 h_r plus the solver tolerances.
    assert!(r["indicator"]["max_diff_vs_nodal"].as_f64().unwrap() <= 2.0 * 0.0625 + 1e-3);
}

#[test]
fn psi_from_csv_matches_the_expression() {
    let dir = tempfile::tempdir().unwrap();
    let n = 17;
    let mut csv = String::from("node,value\n");
    for i in 0..n {
        let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
        csv.push_str(&format!("{i},{}\n", -f64::cos(x).ln()));
    }
    std::fs::write(dir.path().join("psi.csv"), csv).unwrap();
    let body = "domain = interval(1)\nalpha = 1\nh = 0.125\npsi_csv = psi.csv\nexact = -ln(cos(x))\noutput = csvrun\n";
    let cfg = write_config(dir.path(), "csv.cfg", body);
    let out = tmce(dir.path(), &["solve", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("csvrun"));
    assert!(r["error"]["sampled_linf"].as_f64().unwrap() < 1e-2);
}

fn sweep_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn h_sweep_on_the_grim_reaper_converges_at_second_order() {
    let root = tempfile::tempdir().unwrap();
    let out = tmce(
        root.path(),
        &[
            "sweep",
            scenario("grim_reaper.cfg").to_str().unwrap(),
            "--param",
            "h",
            "--values",
            "0.125,0.0625,0.03125,0.015625",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = sweep_rows(&root.path().join("runs/grim_reaper/sweep.csv"));
    assert_eq!(rows.len(), 4);
    // Least-squares slope of ln(error) against ln(h).
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap().ln(), r[9].parse::<f64>().unwrap().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(slope >= 1.8, "{slope}");
}

#[test]
fn small_caps_solve_finitely_in_a_domain_size_sweep() {
    let root = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "caps.cfg",
        "domain = sphere_cap(0.4)\nalpha = 2\nh = 0.0625\noutput = caps\n",
    );
    let out = tmce(
        root.path(),
        &["sweep", cfg.to_str().unwrap(), "--param", "domain_size", "--values", "0.3,0.4"],
    );
    assert_eq!(out.status.code(), Some(0));
    for r in sweep_rows(&root.path().join("caps/sweep.csv")) {
        assert_eq!(r[1], "CLASSIFIED");
        assert_eq!((&r[6][..], &r[7][..]), ("0", "0"), "{r:?}");
    }
    let out = tmce(root.path(), &["sweep", cfg.to_str().unwrap(), "--param", "beta", "--values", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn vanishing_alpha_flattens_the_disk_solution() {
    let root = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.cfg", "domain = euclidean_disk(1)\nalpha = 1\nh = 0.125\noutput = flat\n");
    let out = tmce(root.path(), &["sweep", cfg.to_str().unwrap(), "--param", "alpha", "--values", "1,0.1,0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let sup: Vec<f64> = sweep_rows(&root.path().join("flat/sweep.csv"))
        .iter()
        .map(|r| r[10].parse().unwrap())
        .collect();
    assert!(sup.windows(2).all(|w| w[1] < w[0]), "{sup:?}");
    assert!(sup[2] < 0.01, "{sup:?}");
}

#[test]
fn verify_suites() {
    let root = tempfile::tempdir().unwrap();
    let out = tmce(root.path(), &["verify", "conformal"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    let out = tmce(root.path(), &["verify", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_all_is_green() {
    let root = tempfile::tempdir().unwrap();
    let out = tmce(root.path(), &["verify", "all"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
