//! Reference "coupled" method: one global system in `[U; Û′]` with the
//! exchange term written directly through `Bβ`, no interface variables.
//! Shares all assembly with the optimization method, so differences
//! between the two isolate the optimization machinery.

use crate::assembly::{assemble_load, assemble_neumann, assemble_segment_integrals, assemble_stiffness, BlockSystem, Discretization, VolumeData};
use crate::error::{Error, Result};
use crate::geom::PointLocator;
use crate::linalg::{norm2, sub, FactorKind, Factorization};
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::trace::{composite_points, Partition1D};

/// `[[A, −Bβ, 0], [−Bβᵀ, Â♯, Qᵀ], [0, Q, 0]]` with right-hand side
/// `[f; g; 0]` (Dirichlet lifts folded into f and g).
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub n: usize,
    pub n_hat: usize,
    pub n_q: usize,
}

pub fn build_coupled(sys: &BlockSystem) -> CoupledSystem {
    let (n, nh, nq) = (sys.n(), sys.n_hat(), sys.n_q());
    let order = n + nh + nq;
    let mut t = TripletBuilder::with_capacity(order, order, sys.a.nnz() + 2 * sys.b_beta.nnz() + sys.a_hat_sharp.nnz() + 2 * sys.q.nnz());
    t.add_block(0, 0, &sys.a, 1.0);
    t.add_block(0, n, &sys.b_beta, -1.0);
    t.add_block_transposed(n, 0, &sys.b_beta, -1.0);
    t.add_block(n, n, &sys.a_hat_sharp, 1.0);
    t.add_block_transposed(n, n + nh, &sys.q, 1.0);
    t.add_block(n + nh, n, &sys.q, 1.0);
    let mut rhs = Vec::with_capacity(order);
    rhs.extend_from_slice(&sys.coupled_f);
    rhs.extend_from_slice(&sys.coupled_g);
    rhs.resize(order, 0.0);
    CoupledSystem {
        matrix: t.build(),
        rhs,
        n,
        n_hat: nh,
        n_q: nq,
    }
}

/// Free-DOF solution of the coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSolution {
    pub u: Vec<f64>,
    pub uhat: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub relative_residual: f64,
}

pub fn solve_coupled(sys: &BlockSystem) -> Result<CoupledSolution> {
    let cs = build_coupled(sys);
    let fact = Factorization::new(&cs.matrix, FactorKind::Lu, "coupled system")
        .map_err(|e| Error::WellPosedness(format!("coupled system could not be factorized: {e}")))?;
    let x = fact.solve(&cs.rhs);
    let r = norm2(&sub(&cs.matrix.matvec(&x), &cs.rhs));
    let nb = norm2(&cs.rhs);
    let relative_residual = if nb > 0.0 { r / nb } else { r };
    Ok(CoupledSolution {
        u: x[..cs.n].to_vec(),
        uhat: x[cs.n..cs.n + cs.n_hat].to_vec(),
        multipliers: x[cs.n + cs.n_hat..].to_vec(),
        relative_residual,
    })
}

/// Axis-aligned plane `x[axis] = value` on which 3D fields are compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub axis: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDifference {
    pub segment: usize,
    /// `‖Û_a − Û_b‖_{L²} / ‖Û_b‖_{L²}`; absolute when `Û_b` vanishes.
    pub rel_l2: f64,
    /// Nodal maximum difference over the nodal maximum of `Û_b`.
    pub rel_linf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneDifference {
    pub plane: Plane,
    pub rel_l2: f64,
    pub rel_linf: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub segments: Vec<SegmentDifference>,
    pub planes: Vec<PlaneDifference>,
}

impl ComparisonReport {
    pub fn max_segment_l2(&self) -> f64 {
        self.segments.iter().map(|s| s.rel_l2).fold(0.0, f64::max)
    }
}

/// Per-segment differences of Û and sampled differences of U on planes.
/// Inputs are full (Dirichlet-expanded) vertex and û-node vectors on the
/// same discretization; `b` is the reference.
pub fn compare_solutions(
    disc: &Discretization,
    u_a: &[f64],
    uhat_a: &[f64],
    u_b: &[f64],
    uhat_b: &[f64],
    planes: &[Plane],
    samples_per_axis: usize,
) -> Result<ComparisonReport> {
    let layout = disc.layout();
    if [u_a.len(), u_b.len()] != [layout.n_vertices; 2] || [uhat_a.len(), uhat_b.len()] != [layout.n_hat_full; 2] {
        return Err(Error::InvalidArgument(
            "solutions to compare do not match the discretization".into(),
        ));
    }
    let segments = (0..disc.network.len())
        .map(|i| {
            let part = &disc.partitions[i].uhat;
            let off = layout.hat_offset[i];
            let va = &uhat_a[off..off + part.n_nodes()];
            let vb = &uhat_b[off..off + part.n_nodes()];
            let diff: Vec<f64> = va.iter().zip(vb).map(|(a, b)| a - b).collect();
            let num = p1_l2(part, &diff);
            let den = p1_l2(part, vb);
            let mx = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            SegmentDifference {
                segment: i,
                rel_l2: relative(num, den),
                rel_linf: relative(mx(&diff), mx(vb)),
            }
        })
        .collect();

    let mut plane_diffs = Vec::with_capacity(planes.len());
    if !planes.is_empty() {
        let loc = PointLocator::new(&disc.mesh);
        let (lo, hi) = disc.mesh.bbox();
        let m = samples_per_axis.max(2);
        for &plane in planes {
            if plane.axis > 2 || !(lo[plane.axis]..=hi[plane.axis]).contains(&plane.value) {
                return Err(Error::InvalidArgument(format!("plane {plane:?} does not cut the mesh")));
            }
            let (a1, a2) = ((plane.axis + 1) % 3, (plane.axis + 2) % 3);
            let (mut se, mut sb, mut me, mut mb, mut count) = (0.0, 0.0, 0.0f64, 0.0f64, 0);
            for i in 0..m {
                for j in 0..m {
                    let mut p = [0.0; 3];
                    p[plane.axis] = plane.value;
                    p[a1] = lo[a1] + (hi[a1] - lo[a1]) * i as f64 / (m - 1) as f64;
                    p[a2] = lo[a2] + (hi[a2] - lo[a2]) * j as f64 / (m - 1) as f64;
                    let (Some(va), Some(vb)) = (loc.evaluate(u_a, p), loc.evaluate(u_b, p)) else { continue };
                    se += (va - vb) * (va - vb);
                    sb += vb * vb;
                    me = me.max((va - vb).abs());
                    mb = mb.max(vb.abs());
                    count += 1;
                }
            }
            plane_diffs.push(PlaneDifference {
                plane,
                rel_l2: relative(se.sqrt(), sb.sqrt()),
                rel_linf: relative(me, mb),
                samples: count,
            });
        }
    }
    Ok(ComparisonReport {
        segments,
        planes: plane_diffs,
    })
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Exact L² norm of a P1 function with nodal values `v`.
fn p1_l2(part: &Partition1D, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for e in 0..part.n_elements() {
        let h = part.nodes[e + 1] - part.nodes[e];
        let (a, b) = (v[e], v[e + 1]);
        s += h / 3.0 * (a * a + a * b + b * b);
    }
    s.sqrt()
}

/// Global mass balance of a 3D/1D solution, Darcy sign convention
/// (flux of `−K∇u`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxBalance {
    /// `−∫_{∂Ω} K∇u·n`, from the Dirichlet reactions plus Neumann data.
    pub boundary_outflux: f64,
    /// `Σ_i ∫ β|Γ|(û − ǔ)` by quadrature along the traces.
    pub exchange: f64,
    /// `∫_Ω f`.
    pub source: f64,
}

impl FluxBalance {
    /// `|outflux − exchange − source|` relative to the largest term.
    pub fn imbalance(&self) -> f64 {
        let scale = self.boundary_outflux.abs().max(self.exchange.abs()).max(self.source.abs());
        relative((self.boundary_outflux - self.exchange - self.source).abs(), scale)
    }
}

/// Mass balance for full vertex values `u` and full û values `uhat`.
pub fn flux_balance(disc: &Discretization, data: &VolumeData, u: &[f64], uhat: &[f64]) -> Result<FluxBalance> {
    let si = assemble_segment_integrals(disc);
    let a = assemble_stiffness(&disc.mesh, data.k)?.add_scaled(&si.trace_mass, 1.0);
    let load = assemble_load(&disc.mesh, &data.source);
    let neumann = assemble_neumann(&disc.mesh, &data.bc);
    let au = a.matvec(u);
    let bu = si.b_beta.matvec(uhat);
    let dofs = crate::assembly::Dofs::new(disc, data);
    // Residual of the 3D equations; nonzero only at Dirichlet vertices.
    let reaction: f64 = (0..u.len())
        .filter(|&k| dofs.vertex_free[k].is_none())
        .map(|k| au[k] - bu[k] - load[k] - neumann[k])
        .sum();
    let boundary_outflux = -(reaction + neumann.iter().sum::<f64>());

    let mut exchange = 0.0;
    let layout = disc.layout();
    let tets = disc.mesh.tets();
    for (i, seg) in disc.network.segments().iter().enumerate() {
        let part = &disc.partitions[i].uhat;
        let off = layout.hat_offset[i];
        for q in composite_points(&disc.traces[i], [part]) {
            let cell = &disc.traces[i].cells[q.cell];
            let phi = cell.bary(q.s);
            let ucheck: f64 = (0..4).map(|a| phi[a] * u[tets[cell.tet][a]]).sum();
            let h = part.hats(q.elems[0], q.s);
            let uh = h[0] * uhat[off + q.elems[0]] + h[1] * uhat[off + q.elems[0] + 1];
            exchange += q.w * seg.beta * seg.perimeter(q.s) * (uh - ucheck);
        }
    }
    Ok(FluxBalance {
        boundary_outflux,
        exchange,
        source: load.iter().sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, Deltas, FaceBc, FaceConditions};
    use crate::functions::{Field3, ScalarFn};
    use crate::geom::{build_box_mesh, EndpointBc, Segment, SegmentNetwork};

    fn setup(source: f64) -> (Discretization, VolumeData) {
        let c = [0.1, -0.1, 0.05];
        let segs = vec![
            Segment::new([0.1, -0.1, -1.0], c, 0.02, 0.5).with_bc(EndpointBc::Dirichlet(1.0), EndpointBc::NeumannZero),
            Segment::new(c, [0.5, 0.4, 0.6], 0.02, 0.5).with_k_tilde(ScalarFn::constant(5.0)),
            Segment::new(c, [-0.5, 0.3, 0.7], 0.02, 0.5),
        ];
        let net = SegmentNetwork::from_segments(segs).unwrap();
        let mesh = build_box_mesh(4, [-1.0; 3], [1.0; 3]).unwrap();
        let disc = Discretization::new(mesh, &net, Deltas::default()).unwrap();
        let data = VolumeData {
            k: 1.0,
            source: Field3::constant(source),
            bc: FaceConditions {
                top: FaceBc::Neumann(Field3::constant(0.1)),
                ..FaceConditions::uniform(FaceBc::Dirichlet(Field3::constant(0.0)))
            },
        };
        (disc, data)
    }

    #[test]
    fn coupled_solve_is_accurate_and_conservative() {
        for source in [0.0, 0.7] {
            let (disc, data) = setup(source);
            let sys = assemble(&disc, &data).unwrap();
            let cs = build_coupled(&sys);
            assert!(cs.matrix.is_symmetric(1e-14));
            let sol = solve_coupled(&sys).unwrap();
            assert!(sol.relative_residual < 1e-10);
            let u = sys.dofs.expand_u(&sol.u);
            let uh = sys.dofs.expand_uhat(&sol.uhat);
            let fb = flux_balance(&disc, &data, &u, &uh).unwrap();
            assert!(fb.exchange > 0.0);
            assert!(fb.imbalance() < 1e-8, "{fb:?}");
        }
    }

    #[test]
    fn identical_inputs_compare_to_zero() {
        let (disc, data) = setup(0.0);
        let sys = assemble(&disc, &data).unwrap();
        let sol = solve_coupled(&sys).unwrap();
        let u = sys.dofs.expand_u(&sol.u);
        let uh = sys.dofs.expand_uhat(&sol.uhat);
        let planes = [Plane { axis: 2, value: 0.0 }, Plane { axis: 0, value: 0.3 }];
        let r = compare_solutions(&disc, &u, &uh, &u, &uh, &planes, 11).unwrap();
        assert!(r.segments.iter().all(|s| s.rel_l2 == 0.0 && s.rel_linf == 0.0));
        assert!(r.planes.iter().all(|p| p.rel_l2 == 0.0 && p.samples == 121));
        assert!(compare_solutions(&disc, &u[1..], &uh, &u, &uh, &[], 3).is_err());
    }
}
