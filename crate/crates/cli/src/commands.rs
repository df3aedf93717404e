//! Subcommand drivers. Every command writes into its output directory a
//! `manifest.json` recording parameters, versions and discretization sizes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mixdim::analysis::{compute_errors, conditioning, convergence_study, fmt_f64, solve_with, ErrorQuadrature, ErrorReport, SolverKind, ERROR_CSV_HEADER};
use mixdim::assembly::{assemble, BlockSystem, Deltas, Discretization, VolumeData};
use mixdim::geom::{load_mesh, load_network, SegmentNetwork, TetMesh};
use mixdim::kkt::{Method, Solution};
use mixdim::monolithic::{compare_solutions, flux_balance, solve_coupled};
use mixdim::optsolver::{pcg, recover, PcgOptions, Preconditioner, ReducedOperator};
use mixdim::output::{residual_csv, vtk_network, vtk_volume, write_text};
use mixdim::problems::{by_name, ExactSolution, TestProblem};
use serde_json::{json, Value};

use crate::config::{invalid, ProblemSpec, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    NotConverged,
}

impl Status {
    fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::NotConverged => "not_converged",
        }
    }
}

pub enum Problem {
    Builtin(TestProblem),
    Files {
        mesh: TetMesh,
        network: SegmentNetwork,
        volume: VolumeData,
    },
}

impl Problem {
    pub fn load(spec: &ProblemSpec) -> anyhow::Result<Self> {
        Ok(match spec {
            ProblemSpec::Builtin { name, seed, count } => Problem::Builtin(by_name(name, *seed, *count)?),
            ProblemSpec::Files {
                mesh,
                network,
                coefficients,
            } => Problem::Files {
                mesh: load_mesh(mesh)?,
                network: load_network(network)?,
                volume: coefficients.volume_data(),
            },
        })
    }

    /// File meshes are used as given; `n` only applies to built-in boxes.
    pub fn assemble(&self, n: usize, deltas: Deltas) -> mixdim::Result<(Discretization, BlockSystem)> {
        match self {
            Problem::Builtin(p) => p.assemble(n, deltas),
            Problem::Files { mesh, network, volume } => {
                let disc = Discretization::new(mesh.clone(), network, deltas)?;
                let sys = assemble(&disc, volume)?;
                Ok((disc, sys))
            }
        }
    }

    fn volume(&self) -> &VolumeData {
        match self {
            Problem::Builtin(p) => &p.volume,
            Problem::Files { volume, .. } => volume,
        }
    }

    fn exact(&self) -> Option<&ExactSolution> {
        match self {
            Problem::Builtin(p) => p.exact.as_ref(),
            Problem::Files { .. } => None,
        }
    }
}

fn versions() -> Value {
    json!({ "mixdim": mixdim::VERSION, "mixdim-cli": env!("CARGO_PKG_VERSION") })
}

fn discretization_json(disc: &Discretization, sys: &BlockSystem) -> Value {
    let crossings = disc.crossing_counts();
    let segments: Vec<Value> = disc
        .network
        .segments()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = &disc.partitions[i];
            json!({
                "index": i,
                "length": s.length(),
                "crossings": crossings[i],
                "nodes_uhat": p.uhat.n_nodes(),
                "nodes_psi_d": p.psi_d.n_nodes(),
                "nodes_psi_sigma": p.psi_sigma.n_nodes(),
            })
        })
        .collect();
    json!({
        "mesh": { "vertices": disc.mesh.n_vertices(), "tets": disc.mesh.n_tets(), "h": disc.mesh.h() },
        "segments": segments,
        "dofs": {
            "u": sys.n(),
            "uhat": sys.n_hat(),
            "junction_multipliers": sys.n_q(),
            "psi_d": sys.n_psi_d(),
            "psi_sigma": sys.n_psi_s(),
        },
    })
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, status: &str, extra: Value) -> anyhow::Result<()> {
    let mut m = json!({
        "command": command,
        "status": status,
        "versions": versions(),
        "parameters": cfg,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut m, extra) {
        m.extend(e);
    }
    let text = serde_json::to_string_pretty(&m)? + "\n";
    write_text(&dir.join("manifest.json"), &text)?;
    Ok(())
}

fn pcg_options(cfg: &RunConfig) -> PcgOptions {
    PcgOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        ..Default::default()
    }
}

/// One solved configuration together with what was written for it.
pub struct SolveRun {
    pub disc: Discretization,
    pub sys: BlockSystem,
    pub sol: Solution,
    pub status: Status,
    pub errors: Option<ErrorReport>,
}

/// Solves without treating an exhausted iteration budget as an error.
fn solve_allowing_partial(sys: &BlockSystem, kind: SolverKind, opts: &PcgOptions) -> anyhow::Result<(Solution, Status)> {
    match kind {
        SolverKind::OptPcg { preconditioned } => {
            let op = ReducedOperator::new(sys)?;
            let pre = if preconditioned { Some(Preconditioner::new(sys)?) } else { None };
            let out = pcg(&op, pre.as_ref(), opts)?;
            let method = if preconditioned { Method::Pcg } else { Method::Cg };
            let status = if out.converged { Status::Converged } else { Status::NotConverged };
            Ok((recover(&op, &out, method), status))
        }
        _ => Ok((solve_with(sys, kind, opts)?, Status::Converged)),
    }
}

/// Assembles, solves and writes the solution artifacts into `dir`.
pub fn solve_into(
    cfg: &RunConfig,
    problem: &Problem,
    n: usize,
    deltas: Deltas,
    kind: SolverKind,
    dir: &Path,
) -> anyhow::Result<SolveRun> {
    let (disc, sys) = problem.assemble(n, deltas)?;
    let (sol, status) = solve_allowing_partial(&sys, kind, &pcg_options(cfg))?;
    let u = sys.dofs.expand_u(&sol.u);
    let uhat = sys.dofs.expand_uhat(&sol.uhat);
    write_text(&dir.join("solution_3d.vtk"), &vtk_volume(&disc.mesh, &u)?)?;
    let psi = (!sol.psi_d.is_empty()).then_some((sol.psi_d.as_slice(), sol.psi_s.as_slice()));
    write_text(&dir.join("solution_1d.vtk"), &vtk_network(&disc, &sys.dofs, &uhat, psi)?)?;
    let mut artifacts = vec!["solution_3d.vtk", "solution_1d.vtk"];
    let history = &sol.report.residual_history;
    if !history.is_empty() {
        write_text(&dir.join("residuals.csv"), &residual_csv(history, history[0]))?;
        artifacts.push("residuals.csv");
    }
    let errors = match problem.exact() {
        Some(exact) => {
            let e = compute_errors(&disc, &sys, &sol, exact, ErrorQuadrature::default())?;
            write_text(&dir.join("errors.csv"), &format!("{ERROR_CSV_HEADER}\n{}\n", e.csv_row()))?;
            artifacts.push("errors.csv");
            Some(e)
        }
        None => None,
    };
    let balance = flux_balance(&disc, problem.volume(), &u, &uhat)?;
    write_manifest(
        dir,
        "solve",
        cfg,
        status.name(),
        json!({
            "run": { "n": n, "delta_uhat": deltas.uhat, "delta_psi_d": deltas.psi_d, "delta_psi_sigma": deltas.psi_sigma, "solver": kind.name() },
            "discretization": discretization_json(&disc, &sys),
            "solver_report": {
                "iterations": sol.report.iterations,
                "relative_residual": sol.report.relative_residual,
            },
            "flux_balance": {
                "boundary_outflux": balance.boundary_outflux,
                "exchange": balance.exchange,
                "source": balance.source,
                "imbalance": balance.imbalance(),
            },
            "artifacts": artifacts,
        }),
    )?;
    Ok(SolveRun {
        disc,
        sys,
        sol,
        status,
        errors,
    })
}

pub fn solve(cfg: &RunConfig) -> anyhow::Result<Status> {
    let problem = Problem::load(&cfg.problem)?;
    let (n, deltas, kind) = (cfg.single_n()?, cfg.single_deltas()?, cfg.solver_kind()?);
    let run = solve_into(cfg, &problem, n, deltas, kind, &cfg.output)?;
    println!(
        "{}: {} after {} iterations, relative residual {:.3e}",
        kind.name(),
        run.status.name(),
        run.sol.report.iterations,
        run.sol.report.relative_residual
    );
    if let Some(e) = &run.errors {
        println!("{ERROR_CSV_HEADER}\n{}", e.csv_row());
    }
    println!("artifacts in {}", cfg.output.display());
    Ok(run.status)
}

pub fn convergence(cfg: &RunConfig) -> anyhow::Result<Status> {
    let Problem::Builtin(problem) = Problem::load(&cfg.problem)? else {
        return Err(invalid("convergence studies need a built-in problem with an exact solution"));
    };
    if problem.exact.is_none() {
        return Err(invalid(format!("problem {} has no exact solution", problem.name)));
    }
    if cfg.n.len() < 2 {
        return Err(invalid("a convergence study needs at least two mesh sizes"));
    }
    let kind = cfg.solver_kind()?;
    let study = match convergence_study(&problem, &cfg.n, cfg.single_deltas()?, kind, &pcg_options(cfg)) {
        Err(e @ mixdim::Error::NonConvergence { .. }) => {
            write_manifest(&cfg.output, "convergence", cfg, Status::NotConverged.name(), json!({ "error": e.to_string() }))?;
            return Err(e.into());
        }
        r => r?,
    };
    write_text(&cfg.output.join("convergence.csv"), &study.csv())?;
    write_text(&cfg.output.join("slopes.csv"), &study.slopes_csv())?;
    write_manifest(
        &cfg.output,
        "convergence",
        cfg,
        Status::Converged.name(),
        json!({ "strictly_decreasing": study.strictly_decreasing(), "artifacts": ["convergence.csv", "slopes.csv"] }),
    )?;
    print!("{}{}", study.csv(), study.slopes_csv());
    Ok(Status::Converged)
}

const CONDITION_HEADER: &str = "n,delta_uhat,delta_psi_d,delta_psi_sigma,kkt_order,m_order,cond_kkt,cond_m,lambda_min,lambda_max,lanczos_converged";

pub fn condition(cfg: &RunConfig) -> anyhow::Result<Status> {
    let problem = Problem::load(&cfg.problem)?;
    let deltas = cfg.single_deltas()?;
    let mut csv = format!("{CONDITION_HEADER}\n");
    let mut runs = Vec::new();
    for &n in &cfg.n {
        let (disc, sys) = problem.assemble(n, deltas)?;
        let c = conditioning(&sys, cfg.lanczos_tol)?;
        println!("n = {n}: cond(K) = {:.6e}, cond(M) = {:.6e}", c.cond_kkt, c.cond_m.cond);
        writeln!(
            csv,
            "{n},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(deltas.uhat),
            fmt_f64(deltas.psi_d),
            fmt_f64(deltas.psi_sigma),
            c.kkt_order,
            c.m_order,
            fmt_f64(c.cond_kkt),
            fmt_f64(c.cond_m.cond),
            fmt_f64(c.cond_m.lambda_min),
            fmt_f64(c.cond_m.lambda_max),
            c.cond_m.converged
        )?;
        runs.push(json!({ "n": n, "discretization": discretization_json(&disc, &sys) }));
    }
    write_text(&cfg.output.join("condition.csv"), &csv)?;
    write_manifest(
        &cfg.output,
        "condition",
        cfg,
        Status::Converged.name(),
        json!({ "runs": runs, "artifacts": ["condition.csv"] }),
    )?;
    Ok(Status::Converged)
}

const SWEEP_HEADER: &str =
    "point,delta_uhat,delta_psi_d,delta_psi_sigma,n_psi_d,n_psi_sigma,cond_kkt,cond_m,cg_iterations,pcg_iterations,status";

/// Grid points run one after another, each writing into `point_NNN/`.
pub fn sweep(cfg: &RunConfig) -> anyhow::Result<Status> {
    let problem = Problem::load(&cfg.problem)?;
    let (n, kind) = (cfg.single_n()?, cfg.solver_kind()?);
    let grid = cfg.delta_grid();
    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut overall = Status::Converged;
    let opts = pcg_options(cfg);
    for (k, deltas) in grid.iter().enumerate() {
        let dir = cfg.output.join(format!("point_{k:03}"));
        let run = solve_into(cfg, &problem, n, *deltas, kind, &dir)?;
        let c = conditioning(&run.sys, cfg.lanczos_tol)?;
        let op = ReducedOperator::new(&run.sys)?;
        let cg = pcg(&op, None, &opts)?;
        let pre = Preconditioner::new(&run.sys)?;
        let pc = pcg(&op, Some(&pre), &opts)?;
        let status = if run.status == Status::Converged && cg.converged && pc.converged {
            Status::Converged
        } else {
            Status::NotConverged
        };
        if status == Status::NotConverged {
            overall = Status::NotConverged;
        }
        writeln!(
            csv,
            "{k},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(deltas.uhat),
            fmt_f64(deltas.psi_d),
            fmt_f64(deltas.psi_sigma),
            run.sys.n_psi_d(),
            run.sys.n_psi_s(),
            fmt_f64(c.cond_kkt),
            fmt_f64(c.cond_m.cond),
            cg.iterations,
            pc.iterations,
            status.name()
        )?;
        println!(
            "point {k}: δ = ({}, {}, {}), cond(K) = {:.3e}, cond(M) = {:.3e}, CG {} / PCG {} iterations",
            deltas.uhat, deltas.psi_d, deltas.psi_sigma, c.cond_kkt, c.cond_m.cond, cg.iterations, pc.iterations
        );
    }
    write_text(&cfg.output.join("sweep.csv"), &csv)?;
    let points: Vec<PathBuf> = (0..grid.len()).map(|k| PathBuf::from(format!("point_{k:03}"))).collect();
    write_manifest(
        &cfg.output,
        "sweep",
        cfg,
        overall.name(),
        json!({ "n": n, "points": points, "artifacts": ["sweep.csv"] }),
    )?;
    Ok(overall)
}

pub fn compare(cfg: &RunConfig) -> anyhow::Result<Status> {
    let problem = Problem::load(&cfg.problem)?;
    let (n, deltas, kind) = (cfg.single_n()?, cfg.single_deltas()?, cfg.solver_kind()?);
    if kind == SolverKind::Coupled {
        return Err(invalid("compare runs an optimization solver against the coupled one; choose opt_*"));
    }
    let planes = cfg.planes()?;
    let opt = solve_into(cfg, &problem, n, deltas, kind, &cfg.output.join("opt"))?;
    let reference = solve_coupled(&opt.sys).context("coupled reference solve")?;
    let full = |sol_u: &[f64], sol_uhat: &[f64]| (opt.sys.dofs.expand_u(sol_u), opt.sys.dofs.expand_uhat(sol_uhat));
    let (ua, uha) = full(&opt.sol.u, &opt.sol.uhat);
    let (ub, uhb) = full(&reference.u, &reference.uhat);
    let report = compare_solutions(&opt.disc, &ua, &uha, &ub, &uhb, &planes, cfg.samples)?;

    let mut csv = String::from("kind,id,rel_l2,rel_linf\n");
    for s in &report.segments {
        writeln!(csv, "segment,{},{},{}", s.segment, fmt_f64(s.rel_l2), fmt_f64(s.rel_linf))?;
    }
    for (p, name) in report.planes.iter().zip(&cfg.planes) {
        writeln!(csv, "plane,{},{},{}", name.replace(' ', ""), fmt_f64(p.rel_l2), fmt_f64(p.rel_linf))?;
    }
    write_text(&cfg.output.join("compare.csv"), &csv)?;

    let mut flux = String::from("solver,boundary_outflux,exchange,source,imbalance\n");
    for (name, u, uh) in [(kind.name(), &ua, &uha), ("coupled", &ub, &uhb)] {
        let b = flux_balance(&opt.disc, problem.volume(), u, uh)?;
        writeln!(
            flux,
            "{name},{},{},{},{}",
            fmt_f64(b.boundary_outflux),
            fmt_f64(b.exchange),
            fmt_f64(b.source),
            fmt_f64(b.imbalance())
        )?;
    }
    write_text(&cfg.output.join("flux_balance.csv"), &flux)?;
    write_text(&cfg.output.join("coupled").join("solution_3d.vtk"), &vtk_volume(&opt.disc.mesh, &ub)?)?;
    write_text(
        &cfg.output.join("coupled").join("solution_1d.vtk"),
        &vtk_network(&opt.disc, &opt.sys.dofs, &uhb, None)?,
    )?;
    write_manifest(
        &cfg.output,
        "compare",
        cfg,
        opt.status.name(),
        json!({
            "discretization": discretization_json(&opt.disc, &opt.sys),
            "max_segment_rel_l2": report.max_segment_l2(),
            "coupled_relative_residual": reference.relative_residual,
            "artifacts": ["compare.csv", "flux_balance.csv", "opt/", "coupled/"],
        }),
    )?;
    print!("{csv}{flux}");
    Ok(opt.status)
}
