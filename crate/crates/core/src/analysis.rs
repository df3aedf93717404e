//! Error indicators against exact solutions, convergence-rate fitting and
//! condition-number estimates.

use std::fmt::Write as _;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{BlockSystem, Deltas, Discretization};
use crate::error::{Error, Result};
use crate::kkt::{build_kkt, solve_direct, Method, Solution, SolveReport};
use crate::linalg::{dot, norm2, singular_values};
use crate::monolithic::solve_coupled;
use crate::optsolver::{solve_pcg, PcgOptions, Preconditioner, ReducedOperator};
use crate::problems::{ExactSolution, TestProblem};
use crate::quadrature::{gauss3_unit, tet_conical};
use crate::trace::{merge_breakpoints, Partition1D};

/// Which solver produces a [`Solution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// CG on the reduced system, optionally preconditioned.
    OptPcg { preconditioned: bool },
    /// Sparse LU of the saddle-point matrix.
    OptDirect,
    /// The coupled reference system; no interface variables or adjoints.
    Coupled,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::OptPcg { preconditioned: true } => "opt_pcg",
            SolverKind::OptPcg { preconditioned: false } => "opt_cg",
            SolverKind::OptDirect => "opt_direct",
            SolverKind::Coupled => "coupled",
        }
    }
}

/// Solves an assembled system with the chosen method. Coupled solutions
/// leave the interface variables and adjoints empty.
pub fn solve_with(sys: &BlockSystem, kind: SolverKind, pcg: &PcgOptions) -> Result<Solution> {
    match kind {
        SolverKind::OptDirect => solve_direct(sys),
        SolverKind::OptPcg { preconditioned } => {
            let op = ReducedOperator::new(sys)?;
            let pre = if preconditioned { Some(Preconditioner::new(sys)?) } else { None };
            solve_pcg(&op, pre.as_ref(), pcg)
        }
        SolverKind::Coupled => {
            let c = solve_coupled(sys)?;
            Ok(Solution {
                u: c.u,
                uhat: c.uhat,
                uhat_multipliers: c.multipliers,
                psi_d: Vec::new(),
                psi_s: Vec::new(),
                p: Vec::new(),
                p_hat: Vec::new(),
                report: SolveReport {
                    method: Method::Coupled,
                    iterations: 0,
                    residual_history: Vec::new(),
                    relative_residual: c.relative_residual,
                },
            })
        }
    }
}

/// Relative error indicators plus the discretization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub e_l2: f64,
    pub e_h1: f64,
    pub ehat_l2: f64,
    pub ehat_h1: f64,
    /// `None` for solutions without interface variables.
    pub epsi_d: Option<f64>,
    pub epsi_sigma: Option<f64>,
    pub h: f64,
    pub deltas: Deltas,
    pub n: usize,
    pub n_hat: usize,
    pub n_psi_d: usize,
    pub n_psi_sigma: usize,
}

/// Quadrature used for the error integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorQuadrature {
    /// Gauss points per direction of the collapsed tet rule; `q` points
    /// integrate degree `2q − 3` exactly.
    pub tet_points: usize,
    /// Subdivisions of every merged 1D interval (3-point Gauss on each).
    pub line_subdivisions: usize,
}

impl Default for ErrorQuadrature {
    fn default() -> Self {
        Self {
            tet_points: 6,
            line_subdivisions: 1,
        }
    }
}

/// All six relative error indicators of a solution of `sys` on `disc`.
pub fn compute_errors(
    disc: &Discretization,
    sys: &BlockSystem,
    sol: &Solution,
    exact: &ExactSolution,
    quad: ErrorQuadrature,
) -> Result<ErrorReport> {
    let dofs = &sys.dofs;
    if sol.u.len() != sys.n() || sol.uhat.len() != sys.n_hat() {
        return Err(Error::Dimension("solution does not match the assembled system".into()));
    }
    let has_psi = !sol.psi_d.is_empty() || !sol.psi_s.is_empty();
    if has_psi && (sol.psi_d.len() != sys.n_psi_d() || sol.psi_s.len() != sys.n_psi_s()) {
        return Err(Error::Dimension("interface variables do not match the assembled system".into()));
    }
    let u = dofs.expand_u(&sol.u);
    let uhat = dofs.expand_uhat(&sol.uhat);

    // 3D: per-tet sums, reduced in tet order for reproducibility.
    let rule = tet_conical(quad.tet_points);
    let mesh = &disc.mesh;
    let per_tet: Vec<[f64; 4]> = (0..mesh.n_tets())
        .into_par_iter()
        .map(|t| {
            let g = mesh.geometry(t);
            let v = mesh.tets()[t];
            let p = mesh.tet_points(t);
            let grad_uh: [f64; 3] = std::array::from_fn(|c| (0..4).map(|a| u[v[a]] * g.grads[a][c]).sum());
            let mut acc = [0.0; 4];
            for q in &rule {
                let x: [f64; 3] = std::array::from_fn(|c| (0..4).map(|a| q.bary[a] * p[a][c]).sum());
                let w = q.weight * g.volume;
                let uh: f64 = (0..4).map(|a| q.bary[a] * u[v[a]]).sum();
                let ue = exact.u.eval(x);
                let ge = exact.grad_u.eval(x);
                let dg: f64 = (0..3).map(|c| (ge[c] - grad_uh[c]).powi(2)).sum();
                acc[0] += w * (ue - uh).powi(2);
                acc[1] += w * dg;
                acc[2] += w * ue * ue;
                acc[3] += w * (ge[0] * ge[0] + ge[1] * ge[1] + ge[2] * ge[2]);
            }
            acc
        })
        .collect();
    let mut s3 = [0.0; 4];
    for a in &per_tet {
        for k in 0..4 {
            s3[k] += a[k];
        }
    }

    // 1D: merged partitions of every segment, exact functions from the
    // unsplit parent.
    let layout = disc.layout();
    let mut s1 = [0.0f64; 10];
    for (i, seg) in disc.network.segments().iter().enumerate() {
        let (parent, off) = (seg.parent, seg.parent_offset);
        let (fu, fc) = (&exact.uhat[parent], &exact.ucheck[parent]);
        let parts = &disc.partitions[i];
        let hat_vals = &uhat[layout.hat_offset[i]..layout.hat_offset[i] + parts.uhat.n_nodes()];
        let pd = has_psi.then(|| &sol.psi_d[dofs.psi_d_range(i)]);
        let ps = has_psi.then(|| &sol.psi_s[dofs.psi_s_range(i)]);
        let lists: [&[f64]; 3] = [&parts.uhat.nodes, &parts.psi_d.nodes, &parts.psi_sigma.nodes];
        let merged = merge_breakpoints(&lists, 1e-12 * seg.length());
        let r = quad.line_subdivisions.max(1);
        for w in merged.windows(2) {
            let h = (w[1] - w[0]) / r as f64;
            for sub in 0..r {
                let a = w[0] + h * sub as f64;
                for (x, wx) in gauss3_unit() {
                    let s = a + h * x;
                    let wq = h * wx;
                    let ue = fu.eval(off + s);
                    let due = fu.derivative(off + s).ok_or_else(|| {
                        Error::InvalidArgument("exact 1D solution needs a derivative for the H¹ error".into())
                    })?;
                    let ce = fc.eval(off + s);
                    let (uh, duh) = p1_value_and_slope(&parts.uhat, hat_vals, s);
                    s1[0] += wq * (ue - uh).powi(2);
                    s1[1] += wq * (due - duh).powi(2);
                    s1[2] += wq * ue * ue;
                    s1[3] += wq * due * due;
                    s1[4] += wq * ce * ce;
                    if let (Some(pd), Some(ps)) = (pd, ps) {
                        s1[5] += wq * (ce - parts.psi_d.interpolate(pd, s)).powi(2);
                        s1[6] += wq * (ue - parts.psi_sigma.interpolate(ps, s)).powi(2);
                    }
                }
            }
        }
    }

    let rel = |num: f64, den: f64| if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(ErrorReport {
        e_l2: rel(s3[0], s3[2]),
        e_h1: rel(s3[0] + s3[1], s3[2] + s3[3]),
        ehat_l2: rel(s1[0], s1[2]),
        ehat_h1: rel(s1[0] + s1[1], s1[2] + s1[3]),
        epsi_d: has_psi.then(|| rel(s1[5], s1[4])),
        epsi_sigma: has_psi.then(|| rel(s1[6], s1[2])),
        h: mesh.h(),
        deltas: disc.deltas,
        n: sys.n(),
        n_hat: sys.n_hat(),
        n_psi_d: sys.n_psi_d(),
        n_psi_sigma: sys.n_psi_s(),
    })
}

fn p1_value_and_slope(part: &Partition1D, v: &[f64], s: f64) -> (f64, f64) {
    let e = part.locate(s);
    let h = part.hats(e, s);
    let d = part.hat_slopes(e);
    (h[0] * v[e] + h[1] * v[e + 1], d[0] * v[e] + d[1] * v[e + 1])
}

/// Header of the error table.
pub const ERROR_CSV_HEADER: &str = "h,N,Nhat,E_L2,E_H1,Ehat_L2,Ehat_H1,Epsi_D,Epsi_Sigma";

/// Float formatting with 17 significant digits; missing values are `nan`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl ErrorReport {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| fmt_f64(v.unwrap_or(f64::NAN));
        format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(self.h),
            self.n,
            self.n_hat,
            fmt_f64(self.e_l2),
            fmt_f64(self.e_h1),
            fmt_f64(self.ehat_l2),
            fmt_f64(self.ehat_h1),
            opt(self.epsi_d),
            opt(self.epsi_sigma)
        )
    }

    /// Indicators in CSV column order.
    pub fn indicators(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("E_L2", Some(self.e_l2)),
            ("E_H1", Some(self.e_h1)),
            ("Ehat_L2", Some(self.ehat_l2)),
            ("Ehat_H1", Some(self.ehat_h1)),
            ("Epsi_D", self.epsi_d),
            ("Epsi_Sigma", self.epsi_sigma),
        ]
    }
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_slope(h: &[f64], e: &[f64]) -> Result<f64> {
    if h.len() != e.len() {
        return Err(Error::InvalidArgument("slope fit needs equally many h and error values".into()));
    }
    if h.len() < 2 {
        return Err(Error::InvalidArgument("slope fit needs at least two meshes".into()));
    }
    if h.iter().chain(e).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("slope fit needs positive finite values".into()));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs distinct h values".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ErrorReport>,
    /// Fitted slope per indicator, in CSV column order; `None` when the
    /// indicator is unavailable.
    pub slopes: Vec<(&'static str, Option<f64>)>,
}

impl ConvergenceStudy {
    pub fn slope(&self, name: &str) -> Option<f64> {
        self.slopes.iter().find(|(n, _)| *n == name).and_then(|(_, s)| *s)
    }

    pub fn csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{ERROR_CSV_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(out, "{}", r.csv_row()).unwrap();
        }
        out
    }

    pub fn slopes_csv(&self) -> String {
        let mut out = String::from("indicator,slope\n");
        for (name, s) in &self.slopes {
            writeln!(out, "{name},{}", fmt_f64(s.unwrap_or(f64::NAN))).unwrap();
        }
        out
    }

    /// True when every available indicator decreases strictly along the rows.
    pub fn strictly_decreasing(&self) -> bool {
        (0..6).all(|k| {
            self.rows.windows(2).all(|w| match (w[0].indicators()[k].1, w[1].indicators()[k].1) {
                (Some(a), Some(b)) => b < a,
                _ => true,
            })
        })
    }
}

/// Solves `problem` on every mesh size in `ns` and fits convergence slopes.
pub fn convergence_study(
    problem: &TestProblem,
    ns: &[usize],
    deltas: Deltas,
    solver: SolverKind,
    pcg: &PcgOptions,
) -> Result<ConvergenceStudy> {
    if ns.len() < 2 {
        return Err(Error::InvalidArgument("a convergence study needs at least two meshes".into()));
    }
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("problem {} has no exact solution", problem.name)))?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let (disc, sys) = problem.assemble(n, deltas)?;
        let sol = solve_with(&sys, solver, pcg)?;
        rows.push(compute_errors(&disc, &sys, &sol, exact, ErrorQuadrature::default())?);
        log::info!("convergence: n = {n} done");
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let slopes = (0..6)
        .map(|k| {
            let name = rows[0].indicators()[k].0;
            let e: Option<Vec<f64>> = rows.iter().map(|r| r.indicators()[k].1).collect();
            (name, e.and_then(|e| fit_slope(&h, &e).ok()))
        })
        .collect();
    Ok(ConvergenceStudy { rows, slopes })
}

/// Largest order accepted by the dense condition-number path.
pub const DENSE_LIMIT: usize = 5000;

/// `σ_max / σ_min` by dense SVD.
pub fn cond_dense(m: &Mat<f64>) -> Result<f64> {
    if m.nrows() > DENSE_LIMIT || m.ncols() > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "dense condition number limited to order {DENSE_LIMIT}, got {}",
            m.nrows()
        )));
    }
    let s = singular_values(m)?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
        (Some(_), Some(_)) => Ok(f64::INFINITY),
        _ => Err(Error::InvalidArgument("condition number of an empty matrix".into())),
    }
}

/// Extreme-eigenvalue estimate of an SPD operator.
#[derive(Debug, Clone, PartialEq)]
pub struct LanczosEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub cond: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest relative Ritz residual of the two extremes.
    pub achieved_tol: f64,
}

/// Lanczos with full reorthogonalization on an SPD operator of order `n`.
/// Stops when both extreme Ritz values have relative residual ≤ `tol`, or
/// when the Krylov space is exhausted.
pub fn lanczos_extremes(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    n: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<LanczosEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("Lanczos on an empty operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nq = norm2(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let limit = max_iter.min(n).max(1);
    let mut est = LanczosEstimate {
        lambda_min: f64::NAN,
        lambda_max: f64::NAN,
        cond: f64::NAN,
        iterations: 0,
        converged: false,
        achieved_tol: f64::INFINITY,
    };
    for k in 0..limit {
        let qk = &basis[k];
        let mut w = apply(qk);
        let a = dot(qk, &w);
        alpha.push(a);
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let bk = norm2(&w);
        let m = alpha.len();
        let t = Mat::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Factorization {
            what: "Lanczos tridiagonal".into(),
            reason: format!("{e:?}"),
        })?;
        let s = eig.S().column_vector();
        let u = eig.U();
        let (lo, hi) = (s[0], s[m - 1]);
        let r_lo = (bk * u[(m - 1, 0)]).abs() / lo.abs();
        let r_hi = (bk * u[(m - 1, m - 1)]).abs() / hi.abs();
        let exhausted = bk <= 1e-14 * hi.abs() || m == n;
        est = LanczosEstimate {
            lambda_min: lo,
            lambda_max: hi,
            cond: hi / lo,
            iterations: m,
            converged: exhausted || (r_lo <= tol && r_hi <= tol),
            achieved_tol: if exhausted { 0.0 } else { r_lo.max(r_hi) },
        };
        if est.converged {
            break;
        }
        beta.push(bk);
        basis.push(w.into_iter().map(|v| v / bk).collect());
    }
    if !(est.lambda_min > 0.0) {
        return Err(Error::SpdViolation(format!(
            "Lanczos found a non-positive eigenvalue estimate {:e}",
            est.lambda_min
        )));
    }
    Ok(est)
}

/// Condition numbers of the saddle-point matrix and of the reduced operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning {
    /// `σ_max/σ_min` of 𝒦 by dense SVD.
    pub cond_kkt: f64,
    pub cond_m: LanczosEstimate,
    pub kkt_order: usize,
    pub m_order: usize,
}

pub fn conditioning(sys: &BlockSystem, tol: f64) -> Result<Conditioning> {
    let kkt = build_kkt(sys)?;
    let cond_kkt = cond_dense(&kkt.matrix.to_dense())?;
    let op = ReducedOperator::new(sys)?;
    let cond_m = lanczos_extremes(|x| op.apply(x), op.dim(), tol, op.dim(), 0)?;
    if !cond_m.converged {
        log::warn!("Lanczos estimate reached relative tolerance {:e} only", cond_m.achieved_tol);
    }
    Ok(Conditioning {
        cond_kkt,
        cond_m,
        kkt_order: kkt.layout.order(),
        m_order: op.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::tp1;

    #[test]
    fn slope_of_exact_power_law() {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let e: Vec<f64> = h.iter().map(|v| v * v).collect();
        assert!((fit_slope(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        let scaled: Vec<f64> = h.iter().map(|v| 3.7 * v).collect();
        assert!((fit_slope(&scaled, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_slope(&h[..1], &e[..1]).is_err());
    }

    #[test]
    fn condition_numbers_of_simple_matrices() {
        assert!((cond_dense(&Mat::identity(4, 4)).unwrap() - 1.0).abs() < 1e-14);
        let d = Mat::from_fn(2, 2, |i, j| if i == j { [1.0, 10.0][i] } else { 0.0 });
        assert!((cond_dense(&d).unwrap() - 10.0).abs() < 1e-12);
        let diag: Vec<f64> = (1..=50).map(|k| k as f64).collect();
        let est = lanczos_extremes(|x| x.iter().zip(&diag).map(|(a, b)| a * b).collect(), 50, 1e-6, 50, 1).unwrap();
        assert!(est.converged);
        assert!((est.cond - 50.0).abs() < 1e-4 * 50.0);
    }

    #[test]
    fn interpolated_solution_has_small_errors_and_quadrature_is_stable() {
        let p = tp1();
        let (disc, sys) = p.assemble(2, Deltas::default()).unwrap();
        let sol = solve_direct(&sys).unwrap();
        let ex = p.exact.as_ref().unwrap();
        let a = compute_errors(&disc, &sys, &sol, ex, ErrorQuadrature::default()).unwrap();
        let b = compute_errors(
            &disc,
            &sys,
            &sol,
            ex,
            ErrorQuadrature {
                tet_points: 12,
                line_subdivisions: 2,
            },
        )
        .unwrap();
        for k in 0..6 {
            let (x, y) = (a.indicators()[k].1.unwrap(), b.indicators()[k].1.unwrap());
            assert!(x >= 0.0 && (x - y).abs() <= 1e-8 * y.max(1e-300), "{k}: {x} {y}");
        }
    }
}
