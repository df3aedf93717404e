//! Full saddle-point system of the constrained minimization, solved directly.
//!
//! Unknowns are ordered `[U; Û′; Ψ_D; Ψ_Σ; −P; −P̂′]`, where `Û′` appends the
//! junction multipliers to `Û` and `P̂′` is the matching adjoint.
//!
//! ```text
//! 𝒦 = ⎡ G    0     −D     0    Aᵀ   0    ⎤
//!     ⎢ 0    Ĝ′    0     −Ŝ′   0    Â′ᵀ  ⎥
//!     ⎢ −Dᵀ  0     M^D   0     0   −D̂β′ᵀ ⎥
//!     ⎢ 0   −Ŝ′ᵀ   0     M^Σ  −Sβᵀ  0    ⎥
//!     ⎢ A    0     0    −Sβ    0    0    ⎥
//!     ⎣ 0    Â′   −D̂β′   0     0    0    ⎦
//! ```

use std::ops::Range;

use crate::assembly::BlockSystem;
use crate::error::{Error, Result};
use crate::linalg::{norm2, sub, FactorKind, Factorization};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Above this order the direct solver logs a warning.
pub const SIZE_WARNING: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KktLayout {
    pub n: usize,
    pub n_hat: usize,
    pub n_hat_prime: usize,
    pub n_psi_d: usize,
    pub n_psi_s: usize,
}

impl KktLayout {
    pub fn of(sys: &BlockSystem) -> Self {
        Self {
            n: sys.n(),
            n_hat: sys.n_hat(),
            n_hat_prime: sys.n_hat_prime(),
            n_psi_d: sys.n_psi_d(),
            n_psi_s: sys.n_psi_s(),
        }
    }

    pub fn u(&self) -> Range<usize> {
        0..self.n
    }

    pub fn uhat(&self) -> Range<usize> {
        let s = self.n;
        s..s + self.n_hat_prime
    }

    pub fn psi_d(&self) -> Range<usize> {
        let s = self.uhat().end;
        s..s + self.n_psi_d
    }

    pub fn psi_s(&self) -> Range<usize> {
        let s = self.psi_d().end;
        s..s + self.n_psi_s
    }

    pub fn p(&self) -> Range<usize> {
        let s = self.psi_s().end;
        s..s + self.n
    }

    pub fn p_hat(&self) -> Range<usize> {
        let s = self.p().end;
        s..s + self.n_hat_prime
    }

    pub fn order(&self) -> usize {
        2 * self.n + 2 * self.n_hat_prime + self.n_psi_d + self.n_psi_s
    }
}

#[derive(Debug, Clone)]
pub struct KktSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub layout: KktLayout,
}

pub fn build_kkt(sys: &BlockSystem) -> Result<KktSystem> {
    check_dimensions(sys)?;
    let l = KktLayout::of(sys);
    let order = l.order();
    let a_hat = sys.a_hat();
    let dhb = sys.d_hat_beta_prime();
    let (u, uh, pd, ps, p, ph) = (
        l.u().start,
        l.uhat().start,
        l.psi_d().start,
        l.psi_s().start,
        l.p().start,
        l.p_hat().start,
    );
    let mut t = TripletBuilder::with_capacity(order, order, 4 * (sys.a.nnz() + a_hat.nnz() + sys.g.nnz()));
    // 𝒢′
    t.add_block(u, u, &sys.g, 1.0);
    t.add_block(u, pd, &sys.d, -1.0);
    t.add_block(uh, uh, &sys.g_hat, 1.0);
    t.add_block(uh, ps, &sys.s_hat, -1.0);
    t.add_block_transposed(pd, u, &sys.d, -1.0);
    t.add_block(pd, pd, &sys.m_d, 1.0);
    t.add_block_transposed(ps, uh, &sys.s_hat, -1.0);
    t.add_block(ps, ps, &sys.m_s, 1.0);
    // 𝒜 and 𝒜ᵀ
    t.add_block(p, u, &sys.a, 1.0);
    t.add_block(p, ps, &sys.s_beta, -1.0);
    t.add_block(ph, uh, &a_hat, 1.0);
    t.add_block(ph, pd, &dhb, -1.0);
    t.add_block_transposed(u, p, &sys.a, 1.0);
    t.add_block_transposed(ps, p, &sys.s_beta, -1.0);
    t.add_block_transposed(uh, ph, &a_hat, 1.0);
    t.add_block_transposed(pd, ph, &dhb, -1.0);
    let matrix = t.build();

    let mut rhs = vec![0.0; order];
    let neg = |dst: &mut [f64], src: &[f64]| dst.iter_mut().zip(src).for_each(|(d, s)| *d = -s);
    neg(&mut rhs[l.u()], &sys.lin_u);
    neg(&mut rhs[uh..uh + l.n_hat], &sys.lin_uhat);
    neg(&mut rhs[l.psi_d()], &sys.lin_psi_d);
    neg(&mut rhs[l.psi_s()], &sys.lin_psi_s);
    rhs[l.p()].copy_from_slice(&sys.f);
    rhs[ph..ph + l.n_hat].copy_from_slice(&sys.g_rhs);
    Ok(KktSystem { matrix, rhs, layout: l })
}

fn check_dimensions(sys: &BlockSystem) -> Result<()> {
    let (n, nh, nd, ns) = (sys.n(), sys.n_hat(), sys.n_psi_d(), sys.n_psi_s());
    // (name, actual shape, expected shape)
    #[allow(clippy::type_complexity)]
    let checks: [(&str, (usize, usize), (usize, usize)); 11] = [
        ("A", sys.a.shape(), (n, n)),
        ("Â♯", sys.a_hat_sharp.shape(), (nh, nh)),
        ("Q", (sys.q.ncols(), 0), (nh, 0)),
        ("D̂β", sys.d_hat_beta.shape(), (nh, nd)),
        ("Sβ", sys.s_beta.shape(), (n, ns)),
        ("G", sys.g.shape(), (n, n)),
        ("Ĝ", sys.g_hat.shape(), (nh, nh)),
        ("D", sys.d.shape(), (n, nd)),
        ("Ŝ", sys.s_hat.shape(), (nh, ns)),
        ("f", (sys.f.len(), 0), (n, 0)),
        ("g", (sys.g_rhs.len(), 0), (nh, 0)),
    ];
    for (name, got, want) in checks {
        if got != want {
            return Err(Error::Dimension(format!("{name} has shape {got:?}, expected {want:?}")));
        }
    }
    Ok(())
}

/// How a [`Solution`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Pcg,
    Cg,
    Coupled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// `‖r_k‖₂` per iteration, starting with the initial residual.
    pub residual_history: Vec<f64>,
    /// Final `‖r‖₂ / ‖d‖₂` (iterative) or `‖𝒦x − b‖/‖b‖` (direct).
    pub relative_residual: f64,
}

/// Free-DOF states, controls and adjoints. `uhat` excludes the junction
/// multipliers, which are kept in `uhat_multipliers`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: Vec<f64>,
    pub uhat: Vec<f64>,
    pub uhat_multipliers: Vec<f64>,
    pub psi_d: Vec<f64>,
    pub psi_s: Vec<f64>,
    pub p: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub report: SolveReport,
}

impl Solution {
    /// Controls `X = [Ψ_D; Ψ_Σ]`.
    pub fn controls(&self) -> Vec<f64> {
        let mut x = self.psi_d.clone();
        x.extend_from_slice(&self.psi_s);
        x
    }
}

/// Factorizes 𝒦 (sparse LU) and solves.
pub fn solve_direct(sys: &BlockSystem) -> Result<Solution> {
    let kkt = build_kkt(sys)?;
    solve_kkt(&kkt)
}

pub fn solve_kkt(kkt: &KktSystem) -> Result<Solution> {
    let order = kkt.layout.order();
    if order > SIZE_WARNING {
        log::warn!("direct saddle-point solve of order {order}; expect high memory use");
    }
    let fact = Factorization::new(&kkt.matrix, FactorKind::Lu, "saddle-point matrix").map_err(|e| {
        Error::WellPosedness(format!("saddle-point matrix could not be factorized: {e}"))
    })?;
    let x = fact.solve(&kkt.rhs);
    let r = sub(&kkt.matrix.matvec(&x), &kkt.rhs);
    let nb = norm2(&kkt.rhs);
    let relative_residual = if nb > 0.0 { norm2(&r) / nb } else { norm2(&r) };
    Ok(unpack(&kkt.layout, &x, SolveReport {
        method: Method::Direct,
        iterations: 0,
        residual_history: Vec::new(),
        relative_residual,
    }))
}

pub(crate) fn unpack(l: &KktLayout, x: &[f64], report: SolveReport) -> Solution {
    let uh = &x[l.uhat()];
    Solution {
        u: x[l.u()].to_vec(),
        uhat: uh[..l.n_hat].to_vec(),
        uhat_multipliers: uh[l.n_hat..].to_vec(),
        psi_d: x[l.psi_d()].to_vec(),
        psi_s: x[l.psi_s()].to_vec(),
        p: x[l.p()].iter().map(|v| -v).collect(),
        p_hat: x[l.p_hat()].iter().map(|v| -v).collect(),
        report,
    }
}

/// Packs a solution back into the KKT unknown ordering.
pub fn pack(l: &KktLayout, s: &Solution) -> Vec<f64> {
    let mut x = Vec::with_capacity(l.order());
    x.extend_from_slice(&s.u);
    x.extend_from_slice(&s.uhat);
    x.extend_from_slice(&s.uhat_multipliers);
    x.extend_from_slice(&s.psi_d);
    x.extend_from_slice(&s.psi_s);
    x.extend(s.p.iter().map(|v| -v));
    x.extend(s.p_hat.iter().map(|v| -v));
    x
}

/// `J̃ = ½Σ_i (‖U|Λ_i − Ψ_D‖² + ‖Û_i − Ψ_Σ‖²)` on free DOFs plus lifts.
pub fn evaluate_functional(sys: &BlockSystem, u: &[f64], uhat: &[f64], psi_d: &[f64], psi_s: &[f64]) -> Result<f64> {
    let dims = [
        (u.len(), sys.n()),
        (uhat.len(), sys.n_hat()),
        (psi_d.len(), sys.n_psi_d()),
        (psi_s.len(), sys.n_psi_s()),
    ];
    if dims.iter().any(|(a, b)| a != b) {
        return Err(Error::Dimension(format!("functional arguments have lengths {dims:?} (got, expected)")));
    }
    Ok(sys.functional(u, uhat, psi_d, psi_s))
}

/// Relative residuals of the two state equations
/// `A U − Sβ Ψ_Σ = f` and `Â′ Û′ − D̂β′ Ψ_D = g′`.
pub fn constraint_residuals(sys: &BlockSystem, s: &Solution) -> (f64, f64) {
    let mut r1 = sys.a.matvec(&s.u);
    let sp = sys.s_beta.matvec(&s.psi_s);
    r1.iter_mut().zip(&sp).zip(&sys.f).for_each(|((r, a), f)| *r -= a + f);
    let mut uhp = s.uhat.clone();
    uhp.extend_from_slice(&s.uhat_multipliers);
    let mut r2 = sys.a_hat().matvec(&uhp);
    let dp = sys.d_hat_beta_prime().matvec(&s.psi_d);
    let g = sys.pad_hat(&sys.g_rhs);
    r2.iter_mut().zip(&dp).zip(&g).for_each(|((r, a), f)| *r -= a + f);
    let rel = |r: &[f64], b: &[f64], x: f64| norm2(r) / norm2(b).max(x).max(f64::MIN_POSITIVE);
    (
        rel(&r1, &sys.f, norm2(&sp)),
        rel(&r2, &g, norm2(&dp)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, Deltas, Discretization, FaceBc, FaceConditions, VolumeData};
    use crate::functions::{Field3, ScalarFn};
    use crate::geom::{build_box_mesh, EndpointBc, Segment, SegmentNetwork};

    fn zero_problem(n: usize) -> BlockSystem {
        let mesh = build_box_mesh(n, [-1.0; 3], [1.0; 3]).unwrap();
        let seg = Segment::new([0.05, 0.1, -1.0], [0.05, 0.1, 1.0], 0.01, 1.0)
            .with_bc(EndpointBc::Dirichlet(0.0), EndpointBc::Dirichlet(0.0));
        let net = SegmentNetwork::new(vec![seg], vec![]).unwrap();
        let disc = Discretization::new(mesh, &net, Deltas::default()).unwrap();
        let data = VolumeData {
            k: 1.0,
            source: Field3::constant(0.0),
            bc: FaceConditions::uniform(FaceBc::Dirichlet(Field3::constant(0.0))),
        };
        assemble(&disc, &data).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let sys = zero_problem(3);
        let s = solve_direct(&sys).unwrap();
        assert!(s.u.iter().chain(&s.uhat).chain(&s.psi_d).chain(&s.psi_s).all(|v| *v == 0.0));
    }

    #[test]
    fn kkt_is_symmetric_and_solves() {
        let mesh = build_box_mesh(3, [-1.0; 3], [1.0; 3]).unwrap();
        let seg = Segment::new([0.05, 0.1, -1.0], [0.1, 0.05, 1.0], 0.05, 1.0)
            .with_gbar(ScalarFn::constant(1.0))
            .with_bc(EndpointBc::Dirichlet(1.0), EndpointBc::NeumannZero);
        let net = SegmentNetwork::new(vec![seg], vec![]).unwrap();
        let disc = Discretization::new(mesh, &net, Deltas::default()).unwrap();
        let data = VolumeData {
            k: 1.0,
            source: Field3::constant(1.0),
            bc: FaceConditions::uniform(FaceBc::Dirichlet(Field3::new(|p| p[2]))),
        };
        let sys = assemble(&disc, &data).unwrap();
        let kkt = build_kkt(&sys).unwrap();
        assert!(kkt.matrix.is_symmetric(1e-13));
        let s = solve_kkt(&kkt).unwrap();
        assert!(s.report.relative_residual < 1e-10);
        let (r1, r2) = constraint_residuals(&sys, &s);
        assert!(r1 < 1e-9 && r2 < 1e-9, "{r1} {r2}");
        let x = pack(&kkt.layout, &s);
        assert_eq!(unpack(&kkt.layout, &x, s.report.clone()), s);
        let j = evaluate_functional(&sys, &s.u, &s.uhat, &s.psi_d, &s.psi_s).unwrap();
        assert!(j >= 0.0);
    }
}
