//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use faer::Mat;
use mixdim::assembly::{BlockSystem, Discretization};
use mixdim::geom::PointLocator;
use mixdim::linalg::dense_solve;
use mixdim::trace::Partition1D;

/// Dense segment integrals over all DOFs, in the same numbering as the
/// assembled ones.
pub struct DenseIntegrals {
    pub trace_mass: Mat<f64>,
    pub g: Mat<f64>,
    pub d: Mat<f64>,
    pub s_beta: Mat<f64>,
    pub b: Mat<f64>,
    pub b_beta: Mat<f64>,
    pub a_hat_sharp: Mat<f64>,
    pub g_hat: Mat<f64>,
    pub d_hat_beta: Mat<f64>,
    pub s_hat: Mat<f64>,
    pub m_d: Mat<f64>,
    pub m_s: Mat<f64>,
    pub g_rhs: Vec<f64>,
}

/// One-sided evaluation of a partition at `s`: element, hat values, slopes.
fn side(p: &Partition1D, s: f64, probe: f64) -> (usize, [f64; 2], [f64; 2]) {
    let e = p.locate(probe.clamp(0.0, p.length()));
    (e, p.hats(e, s), p.hat_slopes(e))
}

/// Composite trapezoid rule with step `step` along every segment. Points are
/// located in the mesh by brute-force search, independently of the tracing
/// code. At partition nodes the integrand is averaged over both sides.
pub fn trapezoid_integrals(disc: &Discretization, step: f64) -> DenseIntegrals {
    let l = disc.layout();
    let (nv, nh, nd, ns) = (l.n_vertices, l.n_hat_full, l.n_psi_d, l.n_psi_s);
    let z = |r, c| Mat::<f64>::zeros(r, c);
    let mut o = DenseIntegrals {
        trace_mass: z(nv, nv),
        g: z(nv, nv),
        d: z(nv, nd),
        s_beta: z(nv, ns),
        b: z(nv, nh),
        b_beta: z(nv, nh),
        a_hat_sharp: z(nh, nh),
        g_hat: z(nh, nh),
        d_hat_beta: z(nh, nd),
        s_hat: z(nh, ns),
        m_d: z(nd, nd),
        m_s: z(ns, ns),
        g_rhs: vec![0.0; nh],
    };
    let loc = PointLocator::new(&disc.mesh);
    for (i, seg) in disc.network.segments().iter().enumerate() {
        let len = seg.length();
        let k = (len / step).ceil() as usize;
        let h = len / k as f64;
        let parts = &disc.partitions[i];
        let (oh, od, os) = (l.hat_offset[i], l.psi_d_offset[i], l.psi_s_offset[i]);
        for j in 0..=k {
            let s = j as f64 * h;
            let w = if j == 0 || j == k { 0.5 * h } else { h };
            let x = seg.point(s);
            let t = loc.locate(x).expect("segment point inside the mesh");
            let phi = disc.mesh.geometry(t).barycentric(x);
            let vert = disc.mesh.tets()[t];
            let bg = seg.beta * seg.perimeter(s);
            let ks = seg.k_tilde.eval(s) * seg.area(s);
            let eps = 1e-9 * h;
            for probe in [s - eps, s + eps] {
                let w = 0.5 * w;
                let (eh, uh, duh) = side(&parts.uhat, s, probe);
                let (ed, pd, _) = side(&parts.psi_d, s, probe);
                let (es, ps, _) = side(&parts.psi_sigma, s, probe);
                for a in 0..4 {
                    for b in 0..4 {
                        o.trace_mass[(vert[a], vert[b])] += w * bg * phi[a] * phi[b];
                        o.g[(vert[a], vert[b])] += w * phi[a] * phi[b];
                    }
                    for b in 0..2 {
                        o.d[(vert[a], od + ed + b)] += w * phi[a] * pd[b];
                        o.s_beta[(vert[a], os + es + b)] += w * bg * phi[a] * ps[b];
                        o.b[(vert[a], oh + eh + b)] += w * phi[a] * uh[b];
                        o.b_beta[(vert[a], oh + eh + b)] += w * bg * phi[a] * uh[b];
                    }
                }
                for a in 0..2 {
                    for b in 0..2 {
                        o.a_hat_sharp[(oh + eh + a, oh + eh + b)] += w * (ks * duh[a] * duh[b] + bg * uh[a] * uh[b]);
                        o.g_hat[(oh + eh + a, oh + eh + b)] += w * uh[a] * uh[b];
                        o.d_hat_beta[(oh + eh + a, od + ed + b)] += w * bg * uh[a] * pd[b];
                        o.s_hat[(oh + eh + a, os + es + b)] += w * uh[a] * ps[b];
                        o.m_d[(od + ed + a, od + ed + b)] += w * pd[a] * pd[b];
                        o.m_s[(os + es + a, os + es + b)] += w * ps[a] * ps[b];
                    }
                    o.g_rhs[oh + eh + a] += w * seg.area(s) * seg.gbar.eval(s) * uh[a];
                }
            }
        }
    }
    o
}

pub fn inverse(m: &Mat<f64>) -> Mat<f64> {
    dense_solve(m, &Mat::identity(m.nrows(), m.nrows()))
}

/// Reduced Hessian from its explicit block formula with dense inverses.
pub fn dense_reduced_hessian(sys: &BlockSystem) -> Mat<f64> {
    let nh = sys.n_hat();
    let ainv = inverse(&sys.a.to_dense());
    let ahinv = inverse(&sys.a_hat().to_dense());
    let h = ahinv.as_ref().submatrix(0, 0, nh, nh).to_owned();
    let (d, sb) = (sys.d.to_dense(), sys.s_beta.to_dense());
    let (dh, sh) = (sys.d_hat_beta.to_dense(), sys.s_hat.to_dense());
    let (g, gh) = (sys.g.to_dense(), sys.g_hat.to_dense());
    let m_dd = dh.transpose() * &h * &gh * &h * &dh + sys.m_d.to_dense();
    let m_ds = -(dh.transpose() * &h * &sh) - d.transpose() * &ainv * &sb;
    let m_ss = sb.transpose() * &ainv * &g * &ainv * &sb + sys.m_s.to_dense();
    let (nd, ns) = (sys.n_psi_d(), sys.n_psi_s());
    Mat::from_fn(nd + ns, nd + ns, |i, j| match (i < nd, j < nd) {
        (true, true) => m_dd[(i, j)],
        (true, false) => m_ds[(i, j - nd)],
        (false, true) => m_ds[(j, i - nd)],
        (false, false) => m_ss[(i - nd, j - nd)],
    })
}

pub fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

/// Prints the one-line verdict of an acceptance check, then asserts it.
pub fn verdict(id: u32, what: &str, pass: bool, detail: String) {
    println!("acceptance {id} [{}] {what}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "acceptance {id} failed: {what}: {detail}");
}
