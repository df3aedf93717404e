//! Restriction of the 3D mesh to each segment, 1D partitions, and composite
//! quadrature on merged breakpoints.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{dot3, Segment, SegmentNetwork, TetMesh};
use crate::quadrature::gauss3_unit;

/// Slack on barycentric coordinates when testing containment; lets segments
/// lying on faces or edges be claimed by every incident tet.
const BARY_EPS: f64 = 1e-12;

/// Sub-interval `[s0, s1]` of a segment inside one tet, with
/// `λ(s) = alpha + s·gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceCell {
    pub s0: f64,
    pub s1: f64,
    pub tet: usize,
    pub alpha: [f64; 4],
    pub gamma: [f64; 4],
}

impl TraceCell {
    #[inline]
    pub fn bary(&self, s: f64) -> [f64; 4] {
        std::array::from_fn(|j| self.alpha[j] + s * self.gamma[j])
    }
}

#[derive(Debug, Clone)]
pub struct TraceDecomposition {
    pub segment: usize,
    pub length: f64,
    pub cells: Vec<TraceCell>,
}

impl TraceDecomposition {
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.cells.iter().map(|c| c.s0).collect();
        b.push(self.length);
        b
    }

    /// Interior breakpoints `m − 1`: the number of tet-face crossings.
    pub fn crossing_count(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn locate(&self, s: f64) -> usize {
        let k = self.cells.partition_point(|c| c.s1 <= s);
        k.min(self.cells.len() - 1)
    }
}

/// Clips the segment against every tet and assigns each sub-interval to the
/// lowest-index tet containing it.
pub fn trace_segment(mesh: &TetMesh, segment: &Segment, segment_id: usize) -> Result<TraceDecomposition> {
    let len = segment.length();
    let t = segment.tangent();
    let a = segment.a;
    let tol = mesh.tolerance().max(1e-12 * len);

    let (slo, shi) = {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..3 {
            lo[k] = a[k].min(segment.b[k]) - tol;
            hi[k] = a[k].max(segment.b[k]) + tol;
        }
        (lo, hi)
    };

    // Candidate (s_lo, s_hi, tet) from every tet whose box meets the segment's.
    let mut candidates: Vec<(f64, f64, usize)> = Vec::new();
    for (ti, tet) in mesh.tets().iter().enumerate() {
        let p = tet.map(|v| mesh.vertices()[v]);
        let overlaps = (0..3).all(|k| {
            let lo = p.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min);
            let hi = p.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max);
            hi >= slo[k] && lo <= shi[k]
        });
        if !overlaps {
            continue;
        }
        let g = mesh.geometry(ti);
        let (mut lo, mut hi) = (0.0f64, len);
        for j in 0..4 {
            let alpha = g.consts[j] + dot3(g.grads[j], a);
            let gamma = dot3(g.grads[j], t);
            // alpha + s·gamma ≥ −eps
            if gamma.abs() <= 1e-14 * g.grads[j].iter().map(|x| x.abs()).sum::<f64>() {
                if alpha < -BARY_EPS {
                    hi = -1.0;
                }
            } else if gamma > 0.0 {
                lo = lo.max((-BARY_EPS - alpha) / gamma);
            } else {
                hi = hi.min((-BARY_EPS - alpha) / gamma);
            }
            if hi - lo <= tol {
                break;
            }
        }
        if hi - lo > tol {
            candidates.push((lo.max(0.0), hi.min(len), ti));
        }
    }
    if candidates.is_empty() {
        return Err(Error::Geometry(format!("segment {segment_id} lies outside the mesh")));
    }

    let mut points: Vec<f64> = Vec::with_capacity(2 * candidates.len() + 2);
    points.push(0.0);
    points.push(len);
    for &(lo, hi, _) in &candidates {
        points.push(lo);
        points.push(hi);
    }
    let breaks = merge_sorted(points, tol, 0.0, len);

    let mut cells: Vec<TraceCell> = Vec::with_capacity(breaks.len());
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let tet = candidates
            .iter()
            .filter(|c| c.0 <= mid && mid <= c.1)
            .map(|c| c.2)
            .min()
            .ok_or_else(|| {
                Error::Geometry(format!(
                    "segment {segment_id}: no tet contains arclength {mid} (point {:?})",
                    segment.point(mid)
                ))
            })?;
        match cells.last_mut() {
            Some(last) if last.tet == tet => last.s1 = w[1],
            _ => {
                let g = mesh.geometry(tet);
                let alpha = std::array::from_fn(|j| g.consts[j] + dot3(g.grads[j], a));
                let gamma = std::array::from_fn(|j| dot3(g.grads[j], t));
                cells.push(TraceCell {
                    s0: w[0],
                    s1: w[1],
                    tet,
                    alpha,
                    gamma,
                });
            }
        }
    }
    Ok(TraceDecomposition {
        segment: segment_id,
        length: len,
        cells,
    })
}

/// Traces every segment of a (split) network, in parallel.
pub fn trace_network(mesh: &TetMesh, network: &SegmentNetwork) -> Result<Vec<TraceDecomposition>> {
    network
        .segments()
        .par_iter()
        .enumerate()
        .map(|(i, s)| trace_segment(mesh, s, i))
        .collect()
}

/// Sorts, clamps to `[lo, hi]` and merges values closer than `tol`; the
/// result starts at `lo` and ends at `hi`.
fn merge_sorted(mut v: Vec<f64>, tol: f64, lo: f64, hi: f64) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    out.push(lo);
    for x in v {
        if x - out[out.len() - 1] > tol && hi - x > tol {
            out.push(x);
        }
    }
    out.push(hi);
    out
}

/// Which 1D unknown a partition discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Uhat,
    PsiD,
    PsiSigma,
}

/// Uniform partition of `[0, S]` carrying P1 hat functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition1D {
    pub segment: usize,
    pub role: Role,
    pub nodes: Vec<f64>,
}

impl Partition1D {
    pub fn uniform(segment: usize, role: Role, length: f64, n_nodes: usize) -> Self {
        assert!(n_nodes >= 2, "a partition needs at least two nodes");
        let nel = (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|k| length * k as f64 / nel).collect();
        nodes[n_nodes - 1] = length;
        Self { segment, role, nodes }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn length(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Element containing `s` (last element for `s = S`).
    pub fn locate(&self, s: f64) -> usize {
        let k = self.nodes.partition_point(|&x| x <= s);
        k.clamp(1, self.n_elements()) - 1
    }

    /// Element index and the two hat values `(φ_k, φ_{k+1})` at `s`.
    #[inline]
    pub fn hats(&self, e: usize, s: f64) -> [f64; 2] {
        let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
        let t = (s - x0) / (x1 - x0);
        [1.0 - t, t]
    }

    /// Hat derivatives on element `e`.
    #[inline]
    pub fn hat_slopes(&self, e: usize) -> [f64; 2] {
        let h = self.nodes[e + 1] - self.nodes[e];
        [-1.0 / h, 1.0 / h]
    }

    /// Value at `s` of the P1 function with nodal values `v`.
    pub fn interpolate(&self, v: &[f64], s: f64) -> f64 {
        let e = self.locate(s);
        let h = self.hats(e, s);
        h[0] * v[e] + h[1] * v[e + 1]
    }
}

/// Node count `max(2, round(δ × crossings))`, rounding half away from zero.
pub fn node_count(delta: f64, crossing_count: usize) -> usize {
    ((delta * crossing_count as f64).round() as usize).max(2)
}

pub fn build_partition(segment: usize, length: f64, role: Role, delta: f64, crossing_count: usize) -> Result<Partition1D> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("δ must be positive, got {delta}")));
    }
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("segment length must be positive, got {length}")));
    }
    Ok(Partition1D::uniform(
        segment,
        role,
        length,
        node_count(delta, crossing_count),
    ))
}

/// One Gauss point of the composite rule; `cell` indexes the trace and
/// `elems[k]` the element of the k-th partition passed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositePoint<const K: usize> {
    pub s: f64,
    pub w: f64,
    pub cell: usize,
    pub elems: [usize; K],
}

/// Union of sorted breakpoint lists on `[0, S]`, merged within `tol`.
pub fn merge_breakpoints(lists: &[&[f64]], tol: f64) -> Vec<f64> {
    let hi = lists
        .iter()
        .filter_map(|l| l.last().copied())
        .fold(0.0f64, f64::max);
    let lo = lists
        .iter()
        .filter_map(|l| l.first().copied())
        .fold(hi, f64::min);
    let all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    merge_sorted(all, tol, lo, hi)
}

/// 3-point Gauss rule on every sub-interval of the merged breakpoints.
pub fn composite_rule(lists: &[&[f64]], tol: f64) -> Vec<(f64, f64)> {
    let g = gauss3_unit();
    merge_breakpoints(lists, tol)
        .windows(2)
        .flat_map(|w| {
            let h = w[1] - w[0];
            g.map(|(x, wx)| (w[0] + h * x, h * wx))
        })
        .collect()
}

/// Composite points on the union of the trace breakpoints and the nodes of
/// `parts`, each tagged with the containing trace cell and partition elements.
pub fn composite_points<const K: usize>(trace: &TraceDecomposition, parts: [&Partition1D; K]) -> Vec<CompositePoint<K>> {
    let tb = trace.breakpoints();
    let mut lists: Vec<&[f64]> = vec![&tb];
    lists.extend(parts.iter().map(|p| p.nodes.as_slice()));
    let tol = 1e-12 * trace.length;
    let g = gauss3_unit();
    let merged = merge_breakpoints(&lists, tol);
    let mut out = Vec::with_capacity(3 * (merged.len() - 1));
    for w in merged.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let cell = trace.locate(mid);
        let elems = parts.map(|p| p.locate(mid));
        let h = w[1] - w[0];
        for (x, wx) in g {
            out.push(CompositePoint {
                s: w[0] + h * x,
                w: h * wx,
                cell,
                elems,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::build_box_mesh;

    fn axis_segment() -> Segment {
        Segment::new([0.0, 0.0, -1.0], [0.0, 0.0, 1.0], 0.01, 1.0)
    }

    #[test]
    fn interior_segment_has_one_cell() {
        let m = build_box_mesh(1, [-1.0; 3], [1.0; 3]).unwrap();
        // Tet 0 of the Kuhn split is the path x → y → z; pick points near its centroid.
        let c = m.tet_points(0);
        let cen: [f64; 3] = std::array::from_fn(|k| c.iter().map(|p| p[k]).sum::<f64>() / 4.0);
        let s = Segment::new(
            [cen[0] - 1e-3, cen[1], cen[2]],
            [cen[0] + 1e-3, cen[1], cen[2]],
            0.01,
            1.0,
        );
        let tr = trace_segment(&m, &s, 0).unwrap();
        assert_eq!(tr.cells.len(), 1);
        assert_eq!(tr.crossing_count(), 0);
    }

    #[test]
    fn axis_segment_covers_and_crosses_each_cell_layer() {
        for n in [2usize, 4, 6] {
            let m = build_box_mesh(n, [-1.0; 3], [1.0; 3]).unwrap();
            let tr = trace_segment(&m, &axis_segment(), 0).unwrap();
            let total: f64 = tr.cells.iter().map(|c| c.s1 - c.s0).sum();
            assert!((total - 2.0).abs() < 1e-14);
            assert_eq!(tr.crossing_count(), n - 1);
            for c in &tr.cells {
                for s in [c.s0, 0.5 * (c.s0 + c.s1), c.s1] {
                    assert!(c.bary(s).iter().all(|&l| l > -1e-11));
                }
            }
        }
    }

    #[test]
    fn outside_segment_is_rejected() {
        let m = build_box_mesh(1, [-1.0; 3], [1.0; 3]).unwrap();
        let s = Segment::new([0.0, 0.0, 0.5], [0.0, 0.0, 1.5], 0.01, 1.0);
        assert!(matches!(trace_segment(&m, &s, 0), Err(Error::Geometry(_))));
    }

    #[test]
    fn partition_node_counts() {
        assert_eq!(node_count(1.0, 57), 57);
        assert_eq!(node_count(0.5, 10), 5);
        assert_eq!(node_count(0.5, 1), 2);
        assert_eq!(node_count(0.5, 5), 3);
        let p = build_partition(0, 2.0, Role::PsiD, 1.0, 4).unwrap();
        assert_eq!(p.nodes, vec![0.0, 2.0 / 3.0, 4.0 / 3.0, 2.0]);
        assert!(build_partition(0, 2.0, Role::PsiD, 0.0, 4).is_err());
    }

    #[test]
    fn partition_locate_and_interpolate() {
        let p = Partition1D::uniform(0, Role::Uhat, 1.0, 3);
        assert_eq!(p.locate(0.0), 0);
        assert_eq!(p.locate(0.5), 1);
        assert_eq!(p.locate(1.0), 1);
        assert!((p.interpolate(&[0.0, 1.0, 4.0], 0.75) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn composite_rule_merges_and_is_exact() {
        let m = merge_breakpoints(&[&[0.0, 1.0, 2.0], &[0.0, 0.5, 2.0]], 1e-12);
        assert_eq!(m, vec![0.0, 0.5, 1.0, 2.0]);
        let r = composite_rule(&[&[0.0, 1.0]], 1e-12);
        let v: f64 = r.iter().map(|(s, w)| w * s * s).sum();
        assert!((v - 1.0 / 3.0).abs() < 1e-16);
    }
}
