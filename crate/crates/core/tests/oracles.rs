//! Assembled quantities checked against independent brute-force oracles.

mod common;

use common::{max_abs_diff, trapezoid_integrals};
use mixdim::assembly::{assemble_segment_integrals, Deltas};
use mixdim::geom::PointLocator;
use mixdim::monolithic::{compare_solutions, Plane};
use mixdim::problems::{tp1, tp2_like};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn network_coupling_matrices_match_trapezoid_sums() {
    let p = tp2_like(4, 5).unwrap();
    let disc = p.discretize(3, Deltas::default()).unwrap();
    assert!(!disc.network.junctions().is_empty());
    let si = assemble_segment_integrals(&disc);
    let o = trapezoid_integrals(&disc, 2e-5);
    let pairs = [
        ("trace mass", &si.trace_mass, &o.trace_mass),
        ("G", &si.g, &o.g),
        ("D", &si.d, &o.d),
        ("S_beta", &si.s_beta, &o.s_beta),
        ("B_beta", &si.b_beta, &o.b_beta),
        ("A_hat_sharp", &si.a_hat_sharp, &o.a_hat_sharp),
        ("G_hat", &si.g_hat, &o.g_hat),
        ("D_hat_beta", &si.d_hat_beta, &o.d_hat_beta),
        ("S_hat", &si.s_hat, &o.s_hat),
        ("M_D", &si.m_d, &o.m_d),
        ("M_Sigma", &si.m_s, &o.m_s),
    ];
    for (name, a, b) in pairs {
        let a = a.to_dense();
        let scale = b.norm_max().max(1e-300);
        let err = max_abs_diff(&a, b);
        assert!(err <= 1e-7 * scale.max(1.0), "{name}: {err:e} (scale {scale:e})");
    }
}

#[test]
fn located_interpolation_reproduces_linear_fields() {
    let disc = tp1().discretize(3, Deltas::default()).unwrap();
    let mesh = &disc.mesh;
    let f = |p: [f64; 3]| 0.3 + 2.0 * p[0] - p[1] + 0.5 * p[2];
    let values: Vec<f64> = mesh.vertices().iter().map(|&v| f(v)).collect();
    let loc = PointLocator::new(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..500 {
        let p = [(); 3].map(|_| rng.random_range(-1.0..1.0));
        let t = loc.locate(p).unwrap();
        let lam = mesh.geometry(t).barycentric(p);
        assert!(lam.iter().all(|&l| l >= -1e-10));
        assert!((loc.evaluate(&values, p).unwrap() - f(p)).abs() < 1e-12);
    }
    assert!(loc.locate([1.5, 0.0, 0.0]).is_none());
}

#[test]
fn comparison_metrics_match_direct_sampling() {
    let disc = tp1().discretize(4, Deltas::default()).unwrap();
    let verts = disc.mesh.vertices();
    let u_a: Vec<f64> = verts.iter().map(|p| 2.0 * p[0] + 1.0 + p[2]).collect();
    let u_b: Vec<f64> = verts.iter().map(|p| p[0] + 1.0 + p[2]).collect();
    let part = &disc.partitions[0].uhat;
    let len = part.length();
    let uh_b: Vec<f64> = part.nodes.iter().map(|s| 1.0 + s).collect();
    let uh_a: Vec<f64> = part.nodes.iter().map(|s| 1.0 + 1.5 * s).collect();

    let m = 9;
    let r = compare_solutions(&disc, &u_a, &uh_a, &u_b, &uh_b, &[Plane { axis: 2, value: 0.25 }], m).unwrap();

    // On z = 0.25 the fields are exactly 2x + 1.25 and x + 1.25.
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        for _ in 0..m {
            let x = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
            num += x * x;
            den += (x + 1.25) * (x + 1.25);
        }
    }
    let pl = &r.planes[0];
    assert_eq!(pl.samples, m * m);
    assert!((pl.rel_l2 - (num / den).sqrt()).abs() < 1e-12);
    assert!((pl.rel_linf - 1.0 / 2.25).abs() < 1e-12);

    // ∫ (s/2)² / ∫ (1 + s)² over [0, L], exact for linear nodal data.
    let want = ((len.powi(3) / 12.0) / (((1.0 + len).powi(3) - 1.0) / 3.0)).sqrt();
    assert!((r.segments[0].rel_l2 - want).abs() < 1e-12);
    assert!((r.segments[0].rel_linf - 0.5 * len / (1.0 + len)).abs() < 1e-12);
}
