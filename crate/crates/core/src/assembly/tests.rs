use std::f64::consts::PI;

use super::*;
use crate::functions::ScalarFn;
use crate::geom::{build_box_mesh, Segment};
use crate::linalg::{FactorKind, Factorization};

fn data() -> VolumeData {
    VolumeData {
        k: 1.0,
        source: Field3::constant(1.0),
        bc: FaceConditions::uniform(FaceBc::Dirichlet(Field3::constant(0.0))),
    }
}

fn single(seg: Segment, n: usize) -> Discretization {
    let mesh = build_box_mesh(n, [-1.0; 3], [1.0; 3]).unwrap();
    let net = SegmentNetwork::new(vec![seg], vec![]).unwrap();
    Discretization::new(mesh, &net, Deltas::default()).unwrap()
}

fn with_uhat_nodes(disc: Discretization, n_nodes: usize) -> Discretization {
    let parts = disc
        .partitions
        .iter()
        .map(|p| SegmentPartitions {
            uhat: Partition1D::uniform(p.uhat.segment, Role::Uhat, p.uhat.length(), n_nodes),
            ..p.clone()
        })
        .collect();
    disc.with_partitions(parts).unwrap()
}

#[test]
fn one_dimensional_stiffness_and_mass() {
    // |Σ| = πR²; choose K̃ so that K̃|Σ| = 1. β must be positive, so the two
    // pieces are checked separately: stiffness via a tiny β, mass via K̃ → 0.
    let r = 0.1;
    let tiny = 1e-300;
    let seg = Segment::new([0.0, 0.0, -0.5], [0.0, 0.0, 0.5], r, tiny).with_k_tilde(ScalarFn::constant(1.0 / (PI * r * r)));
    let disc = with_uhat_nodes(single(seg, 2), 2);
    let si = assemble_segment_integrals(&disc);
    let a = si.a_hat_sharp.to_dense();
    let want = [[1.0, -1.0], [-1.0, 1.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((a[(i, j)] - want[i][j]).abs() < 1e-14);
        }
    }

    let beta = 1.0 / (2.0 * PI * r);
    let seg = Segment::new([0.0, 0.0, -0.5], [0.0, 0.0, 0.5], r, beta).with_k_tilde(ScalarFn::constant(0.0));
    let disc = with_uhat_nodes(single(seg, 2), 2);
    let a = assemble_segment_integrals(&disc).a_hat_sharp.to_dense();
    let want = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((a[(i, j)] - want[i][j]).abs() < 1e-14);
        }
    }
}

#[test]
fn psi_mass_is_standard_p1_mass() {
    let seg = Segment::new([0.0, 0.0, -0.5], [0.0, 0.0, 0.5], 0.01, 1.0);
    let disc = single(seg, 2);
    let parts: Vec<_> = disc
        .partitions
        .iter()
        .map(|p| SegmentPartitions {
            psi_d: Partition1D::uniform(0, Role::PsiD, 1.0, 3),
            ..p.clone()
        })
        .collect();
    let disc = disc.with_partitions(parts).unwrap();
    let m = assemble_segment_integrals(&disc).m_d.to_dense();
    let h = 0.5;
    let want = [
        [h / 3.0, h / 6.0, 0.0],
        [h / 6.0, 2.0 * h / 3.0, h / 6.0],
        [0.0, h / 6.0, h / 3.0],
    ];
    for i in 0..3 {
        for j in 0..3 {
            assert!((m[(i, j)] - want[i][j]).abs() < 1e-15);
        }
    }
}

#[test]
fn partition_of_unity_sums() {
    let segs = vec![
        Segment::new([0.0, 0.0, -1.0], [0.0, 0.0, 1.0], 0.01, 2.0),
        Segment::new([-0.7, 0.2, 0.1], [0.6, -0.3, 0.4], 0.02, 3.0),
    ];
    let total: f64 = segs.iter().map(Segment::length).sum();
    let trace_mass_total: f64 = segs.iter().map(|s| s.beta * 2.0 * PI * s.radius * s.length()).sum();
    let mesh = build_box_mesh(3, [-1.0; 3], [1.0; 3]).unwrap();
    let net = SegmentNetwork::new(segs, vec![]).unwrap();
    let disc = Discretization::new(mesh, &net, Deltas::default()).unwrap();
    let si = assemble_segment_integrals(&disc);
    for m in [&si.d, &si.b, &si.g, &si.g_hat, &si.s_hat, &si.m_d, &si.m_s] {
        assert!((m.sum() - total).abs() < 1e-12, "{} vs {total}", m.sum());
    }
    assert!((si.trace_mass.sum() - trace_mass_total).abs() < 1e-12);
    for m in [&si.trace_mass, &si.g, &si.g_hat, &si.a_hat_sharp, &si.m_d, &si.m_s] {
        assert!(m.is_symmetric(1e-13));
    }
}

#[test]
fn b_equals_d_on_shared_partition() {
    let seg = Segment::new([0.1, -0.2, -0.9], [0.3, 0.4, 0.8], 0.01, 1.0);
    let disc = single(seg, 3);
    let parts: Vec<_> = disc
        .partitions
        .iter()
        .map(|p| SegmentPartitions {
            uhat: Partition1D { role: Role::Uhat, ..p.psi_d.clone() },
            ..p.clone()
        })
        .collect();
    let disc = disc.with_partitions(parts).unwrap();
    let si = assemble_segment_integrals(&disc);
    let diff = si.b.add_scaled(&si.d, -1.0);
    assert!(diff.max_abs() < 1e-15);
}

#[test]
fn source_and_gbar_totals() {
    let r = 1e-2;
    let seg = Segment::new([0.0, 0.0, -1.0], [0.0, 0.0, 1.0], r, 1.0).with_gbar(ScalarFn::constant(3.0));
    let disc = single(seg, 2);
    let si = assemble_segment_integrals(&disc);
    let sum: f64 = si.g_rhs.iter().sum();
    assert!((sum - 6.0 * PI * r * r).abs() < 1e-15);
    let f = assemble_load(&disc.mesh, &Field3::constant(1.0));
    assert!((f.iter().sum::<f64>() - 8.0).abs() < 1e-12);
}

#[test]
fn star_junction_gives_two_constraint_rows() {
    let c = [0.1, 0.1, 0.1];
    let segs = vec![
        Segment::new([0.1, 0.1, -1.0], c, 0.01, 1.0).with_bc(EndpointBc::Dirichlet(0.0), EndpointBc::NeumannZero),
        Segment::new(c, [0.5, 0.5, 0.5], 0.01, 1.0),
        Segment::new(c, [-0.5, 0.3, 0.7], 0.01, 1.0),
    ];
    let net = SegmentNetwork::from_segments(segs).unwrap();
    let mesh = build_box_mesh(2, [-1.0; 3], [1.0; 3]).unwrap();
    let disc = Discretization::new(mesh, &net, Deltas::default()).unwrap();
    let sys = assemble(&disc, &data()).unwrap();
    assert_eq!(sys.q.nrows(), 2);
    for r in 0..2 {
        let row: Vec<_> = sys.q.row(r).collect();
        assert_eq!(row.len(), 2);
        assert_eq!(row.iter().map(|(_, v)| v).sum::<f64>(), 0.0);
    }
    let ahat = sys.a_hat();
    assert!(ahat.is_symmetric(0.0));
    Factorization::new(&ahat, FactorKind::Lu, "Â").unwrap();
}

#[test]
fn no_junctions_means_a_hat_is_sharp() {
    let seg = Segment::new([0.0, 0.0, -1.0], [0.0, 0.0, 1.0], 0.01, 1.0);
    let sys = assemble(&single(seg, 2), &data()).unwrap();
    assert_eq!(sys.n_q(), 0);
    assert_eq!(sys.a_hat(), sys.a_hat_sharp);
}

#[test]
fn restricted_a_is_spd() {
    let seg = Segment::new([0.0, 0.0, -1.0], [0.0, 0.0, 1.0], 0.01, 1.0);
    let sys = assemble(&single(seg, 2), &data()).unwrap();
    assert_eq!(sys.n(), 1);
    Factorization::new(&sys.a, FactorKind::Cholesky, "A").unwrap();
}
