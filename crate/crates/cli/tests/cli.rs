use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mixdim::geom::{build_box_mesh, save_mesh};
use tempfile::TempDir;

fn mixdim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixdim"))
        .args(args)
        .arg("--output")
        .arg(out)
        .env_remove("MIXDIM_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn solve_writes_all_artifacts() {
    let t = TempDir::new().unwrap();
    let o = mixdim(&["solve", "--problem", "tp1", "--n", "2", "--solver", "opt_pcg", "--tol", "1e-8"], t.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["solution_3d.vtk", "solution_1d.vtk", "errors.csv", "residuals.csv", "manifest.json"] {
        assert!(t.path().join(f).is_file(), "{f} missing");
    }
    let vtk1 = read(t.path().join("solution_1d.vtk"));
    for field in ["Uhat", "PsiD", "PsiSigma"] {
        assert!(vtk1.contains(&format!("SCALARS {field} double 1")));
    }
    assert!(read(t.path().join("solution_3d.vtk")).contains("SCALARS U double 1"));

    let m: serde_json::Value = serde_json::from_str(&read(t.path().join("manifest.json"))).unwrap();
    assert_eq!(m["status"], "converged");
    assert_eq!(m["parameters"]["tol"], 1e-8);
    assert_eq!(m["discretization"]["segments"][0]["crossings"], 1);
    assert!(m["versions"]["mixdim"].is_string());
}

#[test]
fn every_solver_runs() {
    for solver in ["opt_pcg", "opt_cg", "opt_direct", "coupled"] {
        let t = TempDir::new().unwrap();
        let o = mixdim(&["solve", "--n", "2", "--solver", solver], t.path());
        assert_eq!(o.status.code(), Some(0), "{solver}");
        let vtk1 = read(t.path().join("solution_1d.vtk"));
        assert_eq!(vtk1.contains("PsiD"), solver != "coupled");
    }
}

#[test]
fn convergence_writes_rows_and_slopes() {
    let t = TempDir::new().unwrap();
    let o = mixdim(&["convergence", "--problem", "tp1", "--n", "2,4,8,16"], t.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(t.path().join("convergence.csv")).lines().count(), 5);
    let slopes = read(t.path().join("slopes.csv"));
    assert_eq!(slopes.lines().count(), 7);
    assert!(slopes.starts_with("indicator,slope\nE_L2,"));
}

#[test]
fn condition_prints_both_numbers() {
    let t = TempDir::new().unwrap();
    let o = mixdim(&["condition", "--problem", "tp1", "--n", "2"], t.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("cond(K) = ") && s.contains("cond(M) = "), "{s}");
    assert_eq!(read(t.path().join("condition.csv")).lines().count(), 2);
}

#[test]
fn one_point_sweep_reduces_to_solve() {
    let t = TempDir::new().unwrap();
    let solve_dir = t.path().join("solve");
    let sweep_dir = t.path().join("sweep");
    assert_eq!(mixdim(&["solve", "--n", "4"], &solve_dir).status.code(), Some(0));
    assert_eq!(mixdim(&["sweep", "--n", "4"], &sweep_dir).status.code(), Some(0));
    assert_eq!(read(sweep_dir.join("sweep.csv")).lines().count(), 2);
    for f in ["errors.csv", "residuals.csv", "solution_3d.vtk", "solution_1d.vtk"] {
        assert_eq!(read(solve_dir.join(f)), read(sweep_dir.join("point_000").join(f)), "{f}");
    }
}

#[test]
fn psi_d_sweep_leaves_saddle_point_conditioning_nearly_unchanged() {
    let t = TempDir::new().unwrap();
    let o = mixdim(&["sweep", "--n", "4", "--delta-psi-d", "0.25,0.5,1,2", "--delta-psi-sigma", "0.5"], t.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = read(t.path().join("sweep.csv"));
    let conds: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert_eq!(conds.len(), 4);
    let (lo, hi) = conds.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi / lo < 10.0, "{conds:?}");
    for k in 0..4 {
        assert!(t.path().join(format!("point_{k:03}/manifest.json")).is_file());
    }
}

#[test]
fn compare_reports_segments_planes_and_flux() {
    let t = TempDir::new().unwrap();
    let o = mixdim(
        &["compare", "--problem", "tp2_like", "--seed", "3", "--count", "4", "--n", "4", "--tol", "1e-10", "--plane", "z=0", "--plane", "x=0.5"],
        t.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(t.path().join("compare.csv"));
    assert!(csv.lines().any(|l| l.starts_with("plane,x=0.5,")));
    // Û agrees closely; on a 4×4×4 mesh U only agrees to discretization level.
    for l in csv.lines().skip(1) {
        let d: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
        let bound = if l.starts_with("segment") { 1e-5 } else { 1e-1 };
        assert!(d < bound, "{l}");
    }
    assert_eq!(read(t.path().join("flux_balance.csv")).lines().count(), 3);
    assert!(t.path().join("coupled/solution_3d.vtk").is_file());
}

#[test]
fn invalid_configuration_exits_with_2() {
    let t = TempDir::new().unwrap();
    for args in [
        vec!["solve", "--tol", "2"],
        vec!["solve", "--problem", "nope"],
        vec!["solve", "--solver", "gmres"],
        vec!["solve", "--delta-psi-d", "0.5,1"],
        vec!["convergence", "--n", "4"],
    ] {
        let o = mixdim(&args, t.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let cfg = t.path().join("bad.toml");
    fs::write(&cfg, "[geom]\nsubdivisions = 3\n").unwrap();
    let o = mixdim(&["solve", "--config", cfg.to_str().unwrap()], t.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exhausted_budget_exits_with_3_and_keeps_artifacts() {
    let t = TempDir::new().unwrap();
    let o = mixdim(&["solve", "--problem", "cgtest_like", "--n", "8", "--max-iter", "2"], t.path());
    assert_eq!(o.status.code(), Some(3));
    let m: serde_json::Value = serde_json::from_str(&read(t.path().join("manifest.json"))).unwrap();
    assert_eq!(m["status"], "not_converged");
    assert_eq!(read(t.path().join("residuals.csv")).lines().count(), 4);
    assert!(t.path().join("solution_3d.vtk").is_file());
}

#[test]
fn config_file_sections_and_flag_precedence() {
    let t = TempDir::new().unwrap();
    let cfg = t.path().join("run.toml");
    fs::write(
        &cfg,
        "[problems]\nname = \"tp2_like\"\nseed = 5\ncount = 3\n[geom]\nn = 2\n[trace]\ndelta_psi_sigma = 1.0\n[optsolver]\nsolver = \"opt_direct\"\ntol = 1e-5\n",
    )
    .unwrap();
    let out = t.path().join("out");
    let o = mixdim(&["solve", "--config", cfg.to_str().unwrap(), "--tol", "1e-9"], &out);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&read(out.join("manifest.json"))).unwrap();
    assert_eq!(m["parameters"]["tol"], 1e-9);
    assert_eq!(m["parameters"]["solver"], "opt_direct");
    assert_eq!(m["parameters"]["problem"]["seed"], 5);
    assert_eq!(m["parameters"]["delta_psi_sigma"][0], 1.0);
    assert!(!out.join("errors.csv").exists());
}

#[test]
fn output_root_from_environment() {
    let t = TempDir::new().unwrap();
    let root = t.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_mixdim"))
        .args(["solve", "--n", "2"])
        .env("MIXDIM_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(root.join("manifest.json").is_file());
}

#[test]
fn custom_problem_from_files() {
    let t = TempDir::new().unwrap();
    let mesh = t.path().join("box.mesh");
    save_mesh(&build_box_mesh(3, [0.0; 3], [1.0; 3]).unwrap(), &mesh).unwrap();
    let net = t.path().join("net.txt");
    fs::write(&net, "# two segments\n0.5 0.5 0.0 0.5 0.5 0.5 0.01 0.1 1 0 D:1 N\n0.5 0.5 0.5 0.8 0.6 0.9 0.01 0.1 1 0 N N\n").unwrap();
    let cfg = t.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "[problems]\nmesh = {:?}\nnetwork = {:?}\n[problems.coefficients]\nk = 2.0\nboundary = \"dirichlet\"\nboundary_value = 0.0\n",
            mesh.to_str().unwrap(),
            net.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = t.path().join("out");
    let o = mixdim(&["solve", "--config", cfg.to_str().unwrap(), "--tol", "1e-10"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&read(out.join("manifest.json"))).unwrap();
    assert_eq!(m["discretization"]["dofs"]["junction_multipliers"], 1);
    assert!(m["flux_balance"]["imbalance"].as_f64().unwrap() < 1e-6);

    fs::write(&net, "0.5 0.5 0.0 0.5 0.5 0.5 0.01\n").unwrap();
    assert_eq!(mixdim(&["solve", "--config", cfg.to_str().unwrap()], &out).status.code(), Some(2));
}

#[test]
fn reruns_are_bit_identical() {
    let t = TempDir::new().unwrap();
    let run = |name: &str| {
        let d = t.path().join(name);
        let a = mixdim(&["convergence", "--n", "2,4,8"], &d.join("conv"));
        let b = mixdim(&["solve", "--problem", "cgtest_like", "--seed", "2", "--count", "8", "--n", "6", "--tol", "1e-9"], &d.join("solve"));
        let c = mixdim(&["sweep", "--n", "4", "--delta-psi-sigma", "0.5,1"], &d.join("sweep"));
        assert!([a, b, c].iter().all(|o| o.status.success()));
        d
    };
    let (a, b) = (run("a"), run("b"));
    for f in [
        "conv/convergence.csv",
        "conv/slopes.csv",
        "solve/residuals.csv",
        "solve/solution_3d.vtk",
        "solve/solution_1d.vtk",
        "sweep/sweep.csv",
        "sweep/point_001/residuals.csv",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
