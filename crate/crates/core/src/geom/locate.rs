use crate::functions::Point3;

use super::mesh::TetMesh;

/// Bucket grid over the mesh bounding box for point-in-tet queries.
#[derive(Debug)]
pub struct PointLocator<'a> {
    mesh: &'a TetMesh,
    lo: Point3,
    cell: Point3,
    dims: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

const INSIDE_EPS: f64 = 1e-10;

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a TetMesh) -> Self {
        let (lo, hi) = mesh.bbox();
        let per_axis = ((mesh.n_tets() as f64 / 6.0).cbrt().ceil() as usize).max(1);
        let dims = [per_axis; 3];
        let cell: Point3 = std::array::from_fn(|k| ((hi[k] - lo[k]) / per_axis as f64).max(f64::MIN_POSITIVE));
        let mut buckets = vec![Vec::new(); per_axis * per_axis * per_axis];
        for t in 0..mesh.n_tets() {
            let pts = mesh.tet_points(t);
            let (a, b) = bucket_range(&pts, lo, cell, dims);
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for k in a[2]..=b[2] {
                        buckets[(i * dims[1] + j) * dims[2] + k].push(t);
                    }
                }
            }
        }
        Self {
            mesh,
            lo,
            cell,
            dims,
            buckets,
        }
    }

    /// Lowest-index tet containing `p` (with a small tolerance), if any.
    pub fn locate(&self, p: Point3) -> Option<usize> {
        let idx: [usize; 3] = std::array::from_fn(|k| clamp_index((p[k] - self.lo[k]) / self.cell[k], self.dims[k]));
        let bucket = &self.buckets[(idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]];
        bucket.iter().copied().find(|&t| {
            let l = self.mesh.geometry(t).barycentric(p);
            l.iter().all(|&v| v >= -INSIDE_EPS)
        })
    }

    /// Value at `p` of the P1 field with vertex values `values`.
    pub fn evaluate(&self, values: &[f64], p: Point3) -> Option<f64> {
        let t = self.locate(p)?;
        let l = self.mesh.geometry(t).barycentric(p);
        let v = self.mesh.tets()[t];
        Some((0..4).map(|i| l[i] * values[v[i]]).sum())
    }
}

fn clamp_index(x: f64, n: usize) -> usize {
    if x <= 0.0 {
        0
    } else {
        (x.floor() as usize).min(n - 1)
    }
}

fn bucket_range(pts: &[Point3; 4], lo: Point3, cell: Point3, dims: [usize; 3]) -> ([usize; 3], [usize; 3]) {
    let mut a = [usize::MAX; 3];
    let mut b = [0; 3];
    for k in 0..3 {
        let mn = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let mx = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        // Pad so points on bucket boundaries find every touching tet.
        let pad = 1e-9 * cell[k];
        a[k] = clamp_index((mn - pad - lo[k]) / cell[k], dims[k]);
        b[k] = clamp_index((mx + pad - lo[k]) / cell[k], dims[k]);
    }
    (a, b)
}
