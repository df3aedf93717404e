//! Built-in test problems: the manufactured-solution problem on a single
//! vertical inclusion, and seeded synthetic networks with the coefficient
//! sets of the network and iterative-solver studies.

use std::f64::consts::PI;

use crate::assembly::{assemble, BlockSystem, Deltas, Discretization, FaceBc, FaceConditions, VolumeData};
use crate::error::{Error, Result};
use crate::functions::{Field3, Point3, ScalarFn, VectorField3};
use crate::geom::{build_box_mesh, generate_random_network, EndpointBc, Segment, SegmentNetwork, TetMesh};
use crate::quadrature::{gauss3_unit, tet4};

/// Closed-form exact solution with the derivatives needed to verify the
/// strong equations. Per-segment entries follow the unsplit network and are
/// functions of the arclength from endpoint `a`.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub u: Field3,
    pub grad_u: VectorField3,
    /// `∇·(K∇u)`.
    pub div_flux: Field3,
    /// û with its first derivative attached.
    pub uhat: Vec<ScalarFn>,
    /// `(K̃|Σ|û′)′`.
    pub flux_1d_derivative: Vec<ScalarFn>,
    /// Trace of u on the lateral surface, uniform around the cylinder.
    pub ucheck: Vec<ScalarFn>,
}

#[derive(Debug, Clone)]
pub struct TestProblem {
    pub name: String,
    /// Box `[lo, hi]` meshed by [`build_box_mesh`].
    pub lo: Point3,
    pub hi: Point3,
    pub network: SegmentNetwork,
    pub volume: VolumeData,
    pub exact: Option<ExactSolution>,
}

impl TestProblem {
    pub fn mesh(&self, n: usize) -> Result<TetMesh> {
        build_box_mesh(n, self.lo, self.hi)
    }

    pub fn discretize(&self, n: usize, deltas: Deltas) -> Result<Discretization> {
        Discretization::new(self.mesh(n)?, &self.network, deltas)
    }

    pub fn assemble(&self, n: usize, deltas: Deltas) -> Result<(Discretization, BlockSystem)> {
        let disc = self.discretize(n, deltas)?;
        let sys = assemble(&disc, &self.volume)?;
        Ok((disc, sys))
    }
}

/// Inclusion radius of the manufactured problem.
pub const TP1_RADIUS: f64 = 1e-2;

/// `u_ex = ½(x²+y²)(z²−1) + 1`.
pub fn tp1_u(p: Point3) -> f64 {
    0.5 * (p[0] * p[0] + p[1] * p[1]) * (p[2] * p[2] - 1.0) + 1.0
}

/// `û_ex = 2 − z²`.
pub fn tp1_uhat(z: f64) -> f64 {
    2.0 - z * z
}

/// Manufactured-solution problem on the cube `[−1, 1]³` with one inclusion
/// along the z axis: `K = 1`, `f = 2 − x² − y² − 2z²`, `K̃ = z²/3 + ½`,
/// `ḡ = 3`, `β = 2R/(2 + R²)`; Dirichlet data from u_ex on the lateral faces,
/// Neumann `K∂u/∂n = x² + y²` on top and bottom, û = 1 at both ends.
pub fn tp1() -> TestProblem {
    let r = TP1_RADIUS;
    let beta = 2.0 * r / (2.0 + r * r);
    // Arclength s runs from z = −1, so z = s − 1.
    let k_tilde = ScalarFn::new(|s| {
        let z = s - 1.0;
        z * z / 3.0 + 0.5
    });
    let seg = Segment::new([0.0, 0.0, -1.0], [0.0, 0.0, 1.0], r, beta)
        .with_k_tilde(k_tilde)
        .with_gbar(ScalarFn::constant(3.0))
        .with_bc(EndpointBc::Dirichlet(1.0), EndpointBc::Dirichlet(1.0));
    let network = SegmentNetwork::new(vec![seg], vec![]).expect("single segment network is valid");

    let flux = Field3::new(|p| p[0] * p[0] + p[1] * p[1]);
    let volume = VolumeData {
        k: 1.0,
        source: Field3::new(|p| 2.0 - p[0] * p[0] - p[1] * p[1] - 2.0 * p[2] * p[2]),
        bc: FaceConditions {
            lateral: FaceBc::Dirichlet(Field3::new(tp1_u)),
            top: FaceBc::Neumann(flux.clone()),
            bottom: FaceBc::Neumann(flux.clone()),
            other: FaceBc::Neumann(flux),
        },
    };

    let area = PI * r * r;
    let exact = ExactSolution {
        u: Field3::new(tp1_u),
        grad_u: VectorField3::new(|p| {
            let rr = p[0] * p[0] + p[1] * p[1];
            let zz = p[2] * p[2] - 1.0;
            [p[0] * zz, p[1] * zz, rr * p[2]]
        }),
        div_flux: Field3::new(|p| 2.0 * (p[2] * p[2] - 1.0) + p[0] * p[0] + p[1] * p[1]),
        uhat: vec![ScalarFn::with_derivative(|s| tp1_uhat(s - 1.0), |s| -2.0 * (s - 1.0))],
        flux_1d_derivative: vec![ScalarFn::new(move |s| {
            let z = s - 1.0;
            // d/dz[(z²/3 + ½)(−2z)] = −2z² − 1.
            area * (-2.0 * z * z - 1.0)
        })],
        ucheck: vec![ScalarFn::new(move |s| tp1_u([r, 0.0, s - 1.0]))],
    };
    TestProblem {
        name: "tp1".into(),
        lo: [-1.0; 3],
        hi: [1.0; 3],
        network,
        volume,
        exact: Some(exact),
    }
}

/// Maximum strong-form residuals of an exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// `|∇·(K∇u) + f|` at tet quadrature points.
    pub volume: f64,
    /// `|−(K̃|Σ|û′)′ + β|Γ|(û − ǔ) − |Σ|ḡ|` at segment quadrature points.
    pub segment: f64,
    /// `|K∇u·n + β(û − ǔ)|` on the lateral surface, n the outward radial
    /// direction from the centerline.
    pub interface: f64,
    /// `|u − ǔ|` on the lateral surface (consistency of the trace callback).
    pub trace: f64,
    pub samples: usize,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.volume.max(self.segment).max(self.interface).max(self.trace)
    }
}

/// Residual tolerance of the manufactured-solution gate.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Evaluates the strong equations of the exact solution at composite
/// quadrature points and fails if any residual exceeds [`RESIDUAL_TOL`].
pub fn residual_check(problem: &TestProblem) -> Result<ResidualReport> {
    let report = residuals(problem)?;
    if report.max() > RESIDUAL_TOL {
        return Err(Error::ManufacturedSolution(format!(
            "problem {}: residuals {report:?} exceed {RESIDUAL_TOL:e}",
            problem.name
        )));
    }
    Ok(report)
}

/// The residuals without the tolerance gate.
pub fn residuals(problem: &TestProblem) -> Result<ResidualReport> {
    let ex = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("problem {} has no exact solution", problem.name)))?;
    let segs = problem.network.segments();
    if [ex.uhat.len(), ex.flux_1d_derivative.len(), ex.ucheck.len()] != [segs.len(); 3] {
        return Err(Error::InvalidArgument("exact solution does not match the network".into()));
    }
    let mut rep = ResidualReport {
        volume: 0.0,
        segment: 0.0,
        interface: 0.0,
        trace: 0.0,
        samples: 0,
    };

    let mesh = problem.mesh(4)?;
    let k = problem.volume.k;
    for t in 0..mesh.n_tets() {
        let p = mesh.tet_points(t);
        for q in tet4() {
            let x: Point3 = std::array::from_fn(|c| (0..4).map(|j| q.bary[j] * p[j][c]).sum());
            let r = k * ex.div_flux.eval(x) + problem.volume.source.eval(x);
            rep.volume = rep.volume.max(r.abs());
            rep.samples += 1;
        }
    }

    const PIECES: usize = 64;
    const ANGLES: usize = 8;
    for (i, seg) in segs.iter().enumerate() {
        let len = seg.length();
        let t = seg.tangent();
        let (e1, e2) = orthonormal_pair(t);
        for piece in 0..PIECES {
            for (xi, _) in gauss3_unit() {
                let s = len * (piece as f64 + xi) / PIECES as f64;
                let uh = ex.uhat[i].eval(s);
                let uc = ex.ucheck[i].eval(s);
                let r = -ex.flux_1d_derivative[i].eval(s) + seg.beta * seg.perimeter(s) * (uh - uc)
                    - seg.area(s) * seg.gbar.eval(s);
                rep.segment = rep.segment.max(r.abs());
                let c = seg.point(s);
                for a in 0..ANGLES {
                    let th = 2.0 * PI * a as f64 / ANGLES as f64;
                    let n: Point3 = std::array::from_fn(|c| th.cos() * e1[c] + th.sin() * e2[c]);
                    let x: Point3 = std::array::from_fn(|m| c[m] + seg.radius * n[m]);
                    let g = ex.grad_u.eval(x);
                    let kn = k * (g[0] * n[0] + g[1] * n[1] + g[2] * n[2]);
                    rep.interface = rep.interface.max((kn + seg.beta * (uh - uc)).abs());
                    rep.trace = rep.trace.max((ex.u.eval(x) - uc).abs());
                }
                rep.samples += 1;
            }
        }
    }
    Ok(rep)
}

fn orthonormal_pair(t: Point3) -> (Point3, Point3) {
    use crate::geom::{cross3, norm3, scale3};
    let helper = if t[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross3(t, helper);
    let e1 = scale3(e1, 1.0 / norm3(e1));
    let e2 = cross3(t, e1);
    (e1, e2)
}

/// Radius of the synthetic network inclusions.
pub const NETWORK_RADIUS: f64 = 1e-2;

/// Seeded network in the cube `[−1, 1]³` with `K = 1`, `f = 0`, `K̃ = 100`,
/// `ḡ = 100`, `β = 0.05`; homogeneous Dirichlet on every face and at the
/// inlets on `z = −1`, homogeneous Neumann at interior endpoints.
pub fn tp2_like(seed: u64, count: usize) -> Result<TestProblem> {
    let network = generate_random_network(count, [-1.0; 3], [1.0; 3], 0.3, seed)?.map_segments(|_, s| {
        s.radius = NETWORK_RADIUS;
        s.beta = 0.05;
        s.k_tilde = ScalarFn::constant(100.0);
        s.gbar = ScalarFn::constant(100.0);
    })?;
    Ok(TestProblem {
        name: format!("tp2_like(seed={seed},count={count})"),
        lo: [-1.0; 3],
        hi: [1.0; 3],
        network,
        volume: VolumeData {
            k: 1.0,
            source: Field3::constant(0.0),
            bc: FaceConditions::uniform(FaceBc::Dirichlet(Field3::constant(0.0))),
        },
        exact: None,
    })
}

/// Seeded network in the cube `[−1, 1]³` with `K = 2·10⁻⁴`, `f = 0`,
/// `K̃ = 30`, `ḡ = 0`, `β = 10⁻²`; Neumann flux `2·10⁻⁵` on every face,
/// û = 5·10⁻³ at the inlets on `z = −1`, homogeneous Neumann elsewhere.
pub fn cgtest_like(seed: u64, count: usize) -> Result<TestProblem> {
    let network = generate_random_network(count, [-1.0; 3], [1.0; 3], 0.2, seed)?.map_segments(|_, s| {
        s.radius = NETWORK_RADIUS;
        s.beta = 1e-2;
        s.k_tilde = ScalarFn::constant(30.0);
        s.gbar = ScalarFn::constant(0.0);
        for bc in &mut s.bc {
            if let EndpointBc::Dirichlet(_) = bc {
                *bc = EndpointBc::Dirichlet(5e-3);
            }
        }
    })?;
    Ok(TestProblem {
        name: format!("cgtest_like(seed={seed},count={count})"),
        lo: [-1.0; 3],
        hi: [1.0; 3],
        network,
        volume: VolumeData {
            k: 2e-4,
            source: Field3::constant(0.0),
            bc: FaceConditions::uniform(FaceBc::Neumann(Field3::constant(2e-5))),
        },
        exact: None,
    })
}

/// Problem lookup by name: `tp1`, `tp2_like`, `cgtest_like`.
pub fn by_name(name: &str, seed: u64, count: usize) -> Result<TestProblem> {
    match name {
        "tp1" => Ok(tp1()),
        "tp2_like" => tp2_like(seed, count),
        "cgtest_like" => cgtest_like(seed, count),
        other => Err(Error::InvalidArgument(format!(
            "unknown problem '{other}' (expected tp1, tp2_like or cgtest_like)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tp1_values() {
        assert_eq!(tp1_u([0.0; 3]), 1.0);
        assert_eq!(tp1_uhat(0.0), 2.0);
        let p = tp1();
        assert_eq!(p.network.segment(0).beta, 0.02 / 2.0001);
    }

    #[test]
    fn tp1_passes_residual_gate() {
        let r = residual_check(&tp1()).unwrap();
        assert!(r.max() <= RESIDUAL_TOL, "{r:?}");
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        let p = tp1();
        let ex = p.exact.as_ref().unwrap();
        let h = 1e-5;
        for x in [[0.3, -0.2, 0.7], [-0.9, 0.4, -0.1], [0.0, 0.5, 0.99]] {
            let g = ex.grad_u.eval(x);
            let mut lap = 0.0;
            for c in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[c] += h;
                xm[c] -= h;
                let (up, um, u0) = (ex.u.eval(xp), ex.u.eval(xm), ex.u.eval(x));
                assert!(((up - um) / (2.0 * h) - g[c]).abs() < 1e-8);
                lap += (up - 2.0 * u0 + um) / (h * h);
            }
            assert!((lap - ex.div_flux.eval(x)).abs() < 1e-4);
        }
        let seg = p.network.segment(0);
        for s in [0.1, 0.8, 1.5] {
            let du = ex.uhat[0].derivative(s).unwrap();
            let fd = (ex.uhat[0].eval(s + h) - ex.uhat[0].eval(s - h)) / (2.0 * h);
            assert!((du - fd).abs() < 1e-8);
            let flux = |t: f64| seg.k_tilde.eval(t) * seg.area(t) * ex.uhat[0].derivative(t).unwrap();
            let fd2 = (flux(s + h) - flux(s - h)) / (2.0 * h);
            assert!((fd2 - ex.flux_1d_derivative[0].eval(s)).abs() < 1e-9);
        }
    }

    #[test]
    fn wrong_exact_solution_fails_the_gate() {
        let mut p = tp1();
        p.volume.source = Field3::constant(1.0);
        assert!(matches!(residual_check(&p), Err(Error::ManufacturedSolution(_))));
    }

    #[test]
    fn synthetic_problems_have_listed_coefficients_and_are_seeded() {
        let a = tp2_like(7, 10).unwrap();
        assert!(a.network.segments().iter().all(|s| s.beta == 0.05 && s.radius == NETWORK_RADIUS));
        let b = tp2_like(7, 10).unwrap();
        let ends = |p: &TestProblem| p.network.segments().iter().map(|s| (s.a, s.b)).collect::<Vec<_>>();
        assert_eq!(ends(&a), ends(&b));
        let c = cgtest_like(3, 20).unwrap();
        assert!(matches!(c.volume.bc.top, FaceBc::Neumann(ref g) if g.as_constant() == Some(2e-5)));
        assert!(c
            .network
            .segments()
            .iter()
            .flat_map(|s| s.bc)
            .all(|bc| !matches!(bc, EndpointBc::Dirichlet(v) if v != 5e-3)));
        assert!(by_name("nope", 0, 1).is_err());
    }
}
