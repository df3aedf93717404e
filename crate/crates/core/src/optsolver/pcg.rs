use crate::error::{Error, Result};
use crate::kkt::{Method, Solution, SolveReport};
use crate::linalg::{axpy, dot, norm2, rel_diff};

use super::{check_finite, Preconditioner, ReducedOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct PcgOptions {
    /// Stop when `‖r_k‖₂ / ‖d‖₂ ≤ tol`.
    pub tol: f64,
    /// Defaults to `10 (N_D + N_Σ)`.
    pub max_iter: Option<usize>,
    /// Defaults to zero.
    pub x0: Option<Vec<f64>>,
    /// Every this many iterations, recompute `MX + d` from scratch and
    /// record its relative drift from the recurrence residual.
    pub verify_every: Option<usize>,
    /// Keep every iterate `X_k`.
    pub record_iterates: bool,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: None,
            x0: None,
            verify_every: None,
            record_iterates: false,
        }
    }
}

/// Raw result of a (preconditioned) CG run; `converged` is false when the
/// iteration budget ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖r_k‖₂` for k = 0, 1, ...
    pub residual_history: Vec<f64>,
    pub relative_residual: f64,
    /// `(k, ‖r_true − r_k‖ / ‖r_true‖)` at verification points.
    pub drift: Vec<(usize, f64)>,
    pub iterates: Vec<Vec<f64>>,
}

/// Runs CG on `MX = −d`, preconditioned when `precond` is given. Returns
/// the last state even without convergence; only a non-positive curvature
/// `δXᵀMδX ≤ 0` (or non-finite arithmetic) is an error.
pub fn pcg(op: &ReducedOperator<'_>, precond: Option<&Preconditioner>, opts: &PcgOptions) -> Result<PcgOutcome> {
    let n = op.dim();
    let d = op.d();
    let max_iter = opts.max_iter.unwrap_or(10 * n);
    let mut x = match &opts.x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::Dimension(format!("initial guess has length {}, expected {n}", x0.len())));
        }
        Some(x0) => x0.clone(),
        None => vec![0.0; n],
    };
    let norm_d = norm2(d);
    let mut out = PcgOutcome {
        x: Vec::new(),
        converged: false,
        iterations: 0,
        residual_history: Vec::new(),
        relative_residual: 0.0,
        drift: Vec::new(),
        iterates: Vec::new(),
    };
    if norm_d == 0.0 && x.iter().all(|v| *v == 0.0) {
        out.x = x;
        out.converged = true;
        out.residual_history.push(0.0);
        if opts.record_iterates {
            out.iterates.push(out.x.clone());
        }
        return Ok(out);
    }
    let scale = if norm_d > 0.0 { norm_d } else { 1.0 };
    let precondition = |r: &[f64]| match precond {
        Some(p) => p.apply(r),
        None => r.to_vec(),
    };

    let mut r = op.gradient(&x);
    let mut z = precondition(&r);
    let mut dx: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut rz = dot(&r, &z);
    let mut rnorm = norm2(&r);
    out.residual_history.push(rnorm);
    if opts.record_iterates {
        out.iterates.push(x.clone());
    }

    let mut k = 0;
    while rnorm / scale > opts.tol && k < max_iter {
        let mdx = op.apply(&dx);
        let curv = dot(&dx, &mdx);
        if !(curv > 0.0) {
            return Err(Error::SpdViolation(format!(
                "non-positive curvature {curv:e} at iteration {k}"
            )));
        }
        let zeta = rz / curv;
        axpy(zeta, &dx, &mut x);
        axpy(zeta, &mdx, &mut r);
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (p, zi) in dx.iter_mut().zip(&z) {
            *p = beta * *p - zi;
        }
        k += 1;
        rnorm = norm2(&r);
        out.residual_history.push(rnorm);
        check_finite(&x, "CG iterate")?;
        if opts.record_iterates {
            out.iterates.push(x.clone());
        }
        if let Some(every) = opts.verify_every {
            if every > 0 && k % every == 0 {
                let true_r = op.gradient(&x);
                out.drift.push((k, rel_diff(&r, &true_r)));
            }
        }
    }

    out.converged = rnorm / scale <= opts.tol;
    out.iterations = k;
    out.relative_residual = rnorm / scale;
    out.x = x;
    Ok(out)
}

/// Solves the optimality system iteratively and recovers states and
/// adjoints from the converged controls.
pub fn solve_pcg(op: &ReducedOperator<'_>, precond: Option<&Preconditioner>, opts: &PcgOptions) -> Result<Solution> {
    let outcome = pcg(op, precond, opts)?;
    if !outcome.converged {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            relative_residual: outcome.relative_residual,
        });
    }
    let method = if precond.is_some() { Method::Pcg } else { Method::Cg };
    Ok(recover(op, &outcome, method))
}

/// States and adjoints for the controls of an outcome, converged or not.
pub fn recover(op: &ReducedOperator<'_>, outcome: &PcgOutcome, method: Method) -> Solution {
    let sys = op.system();
    let x = &outcome.x;
    let (u, uh) = op.states(x);
    let (p, p_hat) = op.adjoints(x, &u, &uh);
    let nh = sys.n_hat();
    let nd = sys.n_psi_d();
    Solution {
        u,
        uhat: uh[..nh].to_vec(),
        uhat_multipliers: uh[nh..].to_vec(),
        psi_d: x[..nd].to_vec(),
        psi_s: x[nd..].to_vec(),
        p,
        p_hat,
        report: SolveReport {
            method,
            iterations: outcome.iterations,
            residual_history: outcome.residual_history.clone(),
            relative_residual: outcome.relative_residual,
        },
    }
}
