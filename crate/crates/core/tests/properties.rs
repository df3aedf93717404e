//! Property tests over randomized inputs.

use std::sync::OnceLock;

use mixdim::analysis::fit_slope;
use mixdim::assembly::{BlockSystem, Deltas};
use mixdim::geom::{build_box_mesh, generate_random_network, Segment, TetMesh};
use mixdim::linalg::dot;
use mixdim::optsolver::ReducedOperator;
use mixdim::problems::tp2_like;
use mixdim::trace::{node_count, trace_segment};
use proptest::prelude::*;

fn network_system() -> &'static BlockSystem {
    static SYS: OnceLock<BlockSystem> = OnceLock::new();
    SYS.get_or_init(|| tp2_like(2, 6).unwrap().assemble(3, Deltas::default()).unwrap().1)
}

fn unit_mesh() -> &'static TetMesh {
    static MESH: OnceLock<TetMesh> = OnceLock::new();
    MESH.get_or_init(|| build_box_mesh(3, [0.0; 3], [1.0; 3]).unwrap())
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [0.02f64..0.98, 0.02f64..0.98, 0.02f64..0.98]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduced_operator_is_symmetric_positive(seed in any::<u64>()) {
        let sys = network_system();
        let op = ReducedOperator::new(sys).unwrap();
        let n = op.dim();
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x: Vec<f64> = (0..n).map(|_| next()).collect();
        let y: Vec<f64> = (0..n).map(|_| next()).collect();
        let (mx, my) = (op.apply(&x), op.apply(&y));
        let scale = dot(&x, &mx).abs().max(dot(&y, &my).abs());
        prop_assert!((dot(&y, &mx) - dot(&x, &my)).abs() <= 1e-12 * scale);
        prop_assert!(dot(&x, &mx) > 0.0);
    }

    #[test]
    fn trace_cells_tile_the_segment(a in point(), b in point()) {
        let seg = Segment::new(a, b, 0.01, 1.0);
        prop_assume!(seg.length() > 1e-3);
        let tr = trace_segment(unit_mesh(), &seg, 0).unwrap();
        let bp = tr.breakpoints();
        prop_assert_eq!(bp[0], 0.0);
        prop_assert!((bp[bp.len() - 1] - seg.length()).abs() <= 1e-12);
        prop_assert!(bp.windows(2).all(|w| w[1] > w[0]));
        let total: f64 = tr.cells.iter().map(|c| c.s1 - c.s0).sum();
        prop_assert!((total - seg.length()).abs() <= 1e-12);
        for c in &tr.cells {
            let mid = 0.5 * (c.s0 + c.s1);
            let lam = c.bary(mid);
            prop_assert!((lam.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(lam.iter().all(|&l| l >= -1e-9));
        }
    }

    #[test]
    fn slope_is_invariant_under_scaling(p in 0.5f64..3.0, c in 1e-3f64..1e3, s in 0.1f64..10.0) {
        let h = [0.4f64, 0.2, 0.1, 0.05];
        let e: Vec<f64> = h.iter().map(|v| c * v.powf(p)).collect();
        let hs: Vec<f64> = h.iter().map(|v| s * v).collect();
        prop_assert!((fit_slope(&h, &e).unwrap() - p).abs() < 1e-10);
        prop_assert!((fit_slope(&hs, &e).unwrap() - p).abs() < 1e-10);
    }

    #[test]
    fn node_count_is_monotone_and_at_least_two(d in 0.01f64..5.0, k in 0usize..500) {
        let n = node_count(d, k);
        prop_assert!(n >= 2);
        prop_assert!(node_count(d, k + 1) >= n);
        prop_assert!(node_count(d * 1.5, k) >= n);
        prop_assert!((n as f64 - (d * k as f64).round()).abs() < 1e-9 || n == 2);
    }

    #[test]
    fn random_networks_are_deterministic_and_inside_the_box(seed in any::<u64>(), count in 1usize..12) {
        let (lo, hi) = ([-1.0; 3], [1.0; 3]);
        let a = generate_random_network(count, lo, hi, 0.2, seed).unwrap();
        let b = generate_random_network(count, lo, hi, 0.2, seed).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (s, t) in a.segments().iter().zip(b.segments()) {
            prop_assert_eq!(s.a, t.a);
            prop_assert_eq!(s.b, t.b);
            for p in [s.a, s.b] {
                prop_assert!((0..3).all(|k| p[k] >= lo[k] && p[k] <= hi[k]));
            }
        }
    }
}
