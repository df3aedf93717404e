use rayon::prelude::*;

use crate::assembly::BlockSystem;
use crate::error::{Error, Result};
use crate::linalg::{dot, FactorKind, Factorization};

/// Matrix-free reduced Hessian `M` of the mismatch functional in the
/// controls `X = [Ψ_D; Ψ_Σ]`, with the constant terms `d` and `q` of
/// `J*(X) = ½(XᵀMX + 2dᵀX + q)`.
///
/// A and Â′ are factorized once; every application performs four solves
/// (two forward, two adjoint), each pair concurrently.
#[derive(Debug)]
pub struct ReducedOperator<'a> {
    sys: &'a BlockSystem,
    a: Factorization,
    a_hat: Factorization,
    u0: Vec<f64>,
    uhat0: Vec<f64>,
    d: Vec<f64>,
    q: f64,
}

impl<'a> ReducedOperator<'a> {
    pub fn new(sys: &'a BlockSystem) -> Result<Self> {
        let a_hat_prime = sys.a_hat();
        let (a, a_hat) = rayon::join(
            || Factorization::new(&sys.a, FactorKind::Cholesky, "A"),
            || Factorization::new(&a_hat_prime, FactorKind::Lu, "Â"),
        );
        let wp = |e: Error| Error::WellPosedness(e.to_string());
        let (a, a_hat) = (a.map_err(wp)?, a_hat.map_err(wp)?);

        let g_pad = sys.pad_hat(&sys.g_rhs);
        let (u0, uhat0) = rayon::join(|| a.solve(&sys.f), || a_hat.solve(&g_pad));
        let uhat0_free = &uhat0[..sys.n_hat()];

        let mut wu = sys.g.matvec(&u0);
        wu.iter_mut().zip(&sys.lin_u).for_each(|(w, l)| *w += l);
        let mut wh = sys.g_hat.matvec(uhat0_free);
        wh.iter_mut().zip(&sys.lin_uhat).for_each(|(w, l)| *w += l);
        let wh = sys.pad_hat(&wh);
        let (p0, ph0) = rayon::join(|| a.solve(&wu), || a_hat.solve(&wh));

        let mut d_d = sys.d_hat_beta.matvec_transpose(&ph0[..sys.n_hat()]);
        let dt_u = sys.d.matvec_transpose(&u0);
        d_d.iter_mut()
            .zip(&dt_u)
            .zip(&sys.lin_psi_d)
            .for_each(|((x, y), l)| *x += l - y);
        let mut d_s = sys.s_beta.matvec_transpose(&p0);
        let st_uh = sys.s_hat.matvec_transpose(uhat0_free);
        d_s.iter_mut()
            .zip(&st_uh)
            .zip(&sys.lin_psi_s)
            .for_each(|((x, y), l)| *x += l - y);
        let mut d = d_d;
        d.extend(d_s);

        let q = sys.g.bilinear(&u0, &u0)
            + sys.g_hat.bilinear(uhat0_free, uhat0_free)
            + 2.0 * dot(&sys.lin_u, &u0)
            + 2.0 * dot(&sys.lin_uhat, uhat0_free)
            + 2.0 * sys.c;

        Ok(Self {
            sys,
            a,
            a_hat,
            u0,
            uhat0,
            d,
            q,
        })
    }

    pub fn system(&self) -> &BlockSystem {
        self.sys
    }

    /// Number of controls `N_D + N_Σ`.
    pub fn dim(&self) -> usize {
        self.sys.n_psi_d() + self.sys.n_psi_s()
    }

    pub fn n_psi_d(&self) -> usize {
        self.sys.n_psi_d()
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn factor_a(&self) -> &Factorization {
        &self.a
    }

    pub fn factor_a_hat(&self) -> &Factorization {
        &self.a_hat
    }

    /// `M δX`.
    pub fn apply(&self, dx: &[f64]) -> Vec<f64> {
        assert_eq!(dx.len(), self.dim(), "apply: control vector has wrong length");
        let sys = self.sys;
        let nh = sys.n_hat();
        let (dpd, dps) = dx.split_at(sys.n_psi_d());

        let (du, duh) = rayon::join(
            || self.a.solve(&sys.s_beta.matvec(dps)),
            || self.a_hat.solve(&sys.pad_hat(&sys.d_hat_beta.matvec(dpd))),
        );
        let duh = &duh[..nh];

        let mut wu = sys.g.matvec(&du);
        let d_pd = sys.d.matvec(dpd);
        wu.iter_mut().zip(&d_pd).for_each(|(w, v)| *w -= v);
        let mut wh = sys.g_hat.matvec(duh);
        let s_ps = sys.s_hat.matvec(dps);
        wh.iter_mut().zip(&s_ps).for_each(|(w, v)| *w -= v);
        let (dp, dph) = rayon::join(|| self.a.solve(&wu), || self.a_hat.solve(&sys.pad_hat(&wh)));

        let mut out_d = sys.d_hat_beta.matvec_transpose(&dph[..nh]);
        let dt = sys.d.matvec_transpose(&du);
        let md = sys.m_d.matvec(dpd);
        out_d.iter_mut().zip(&dt).zip(&md).for_each(|((o, a), b)| *o += b - a);
        let mut out_s = sys.s_beta.matvec_transpose(&dp);
        let st = sys.s_hat.matvec_transpose(duh);
        let ms = sys.m_s.matvec(dps);
        out_s.iter_mut().zip(&st).zip(&ms).for_each(|((o, a), b)| *o += b - a);
        out_d.extend(out_s);
        out_d
    }

    /// Reduced functional `J*(X) = ½(XᵀMX + 2dᵀX + q)`.
    pub fn j_star(&self, x: &[f64]) -> f64 {
        0.5 * (dot(x, &self.apply(x)) + 2.0 * dot(&self.d, x) + self.q)
    }

    /// `∇J*(X) = MX + d`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.apply(x);
        g.iter_mut().zip(&self.d).for_each(|(g, d)| *g += d);
        g
    }

    /// States for given controls: `U = A⁻¹(Sβ Ψ_Σ + f)`,
    /// `Û′ = Â′⁻¹(D̂β′ Ψ_D + g′)`.
    pub fn states(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sys = self.sys;
        let (pd, ps) = x.split_at(sys.n_psi_d());
        let (mut u, mut uh) = rayon::join(
            || self.a.solve(&sys.s_beta.matvec(ps)),
            || self.a_hat.solve(&sys.pad_hat(&sys.d_hat_beta.matvec(pd))),
        );
        u.iter_mut().zip(&self.u0).for_each(|(a, b)| *a += b);
        uh.iter_mut().zip(&self.uhat0).for_each(|(a, b)| *a += b);
        (u, uh)
    }

    /// Adjoints for given controls and states.
    pub fn adjoints(&self, x: &[f64], u: &[f64], uhat_prime: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sys = self.sys;
        let nh = sys.n_hat();
        let (pd, ps) = x.split_at(sys.n_psi_d());
        let mut wu = sys.g.matvec(u);
        let dpd = sys.d.matvec(pd);
        wu.iter_mut()
            .zip(&dpd)
            .zip(&sys.lin_u)
            .for_each(|((w, a), l)| *w += l - a);
        let mut wh = sys.g_hat.matvec(&uhat_prime[..nh]);
        let sps = sys.s_hat.matvec(ps);
        wh.iter_mut()
            .zip(&sps)
            .zip(&sys.lin_uhat)
            .for_each(|((w, a), l)| *w += l - a);
        rayon::join(|| self.a.solve(&wu), || self.a_hat.solve(&sys.pad_hat(&wh)))
    }

    /// Dense copy of M, one column per unit vector.
    pub fn to_dense(&self) -> faer::Mat<f64> {
        let n = self.dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.apply(&e)
            })
            .collect();
        faer::Mat::from_fn(n, n, |i, j| cols[j][i])
    }
}
