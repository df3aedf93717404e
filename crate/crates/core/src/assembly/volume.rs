use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{Field3, Point3};
use crate::geom::{dot3, TetMesh};
use crate::quadrature::{tet4, triangle3};
use crate::sparse::{CsrMatrix, TripletBuilder};

use super::{FaceBc, FaceConditions};

/// P1 stiffness `∫ K ∇φ_k·∇φ_l` over the whole box, all vertices.
pub fn assemble_stiffness(mesh: &TetMesh, k: f64) -> Result<CsrMatrix> {
    if !(k > 0.0) {
        return Err(Error::Assembly(format!("conductivity must be positive, got {k}")));
    }
    let locals: Vec<[[f64; 4]; 4]> = (0..mesh.n_tets())
        .into_par_iter()
        .map(|t| {
            let g = mesh.geometry(t);
            std::array::from_fn(|i| std::array::from_fn(|j| (k * g.volume) * dot3(g.grads[i], g.grads[j])))
        })
        .collect();
    if let Some(t) = (0..mesh.n_tets()).find(|&t| !(mesh.geometry(t).volume > 0.0)) {
        return Err(Error::Assembly(format!("tet {t} has non-positive volume")));
    }
    let nv = mesh.n_vertices();
    let mut b = TripletBuilder::with_capacity(nv, nv, 16 * mesh.n_tets());
    for (tet, local) in mesh.tets().iter().zip(&locals) {
        for i in 0..4 {
            for j in 0..4 {
                b.push(tet[i], tet[j], local[i][j]);
            }
        }
    }
    Ok(b.build())
}

/// `∫_Ω f φ_k` with the degree-2 tet rule.
pub fn assemble_load(mesh: &TetMesh, source: &Field3) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    if source.as_constant() == Some(0.0) {
        return out;
    }
    let rule = tet4();
    let locals: Vec<[f64; 4]> = (0..mesh.n_tets())
        .into_par_iter()
        .map(|t| {
            let p = mesh.tet_points(t);
            let vol = mesh.geometry(t).volume;
            let mut loc = [0.0; 4];
            for q in &rule {
                let x = combine(&p, &q.bary);
                let fw = source.eval(x) * q.weight * vol;
                for (l, b) in loc.iter_mut().zip(&q.bary) {
                    *l += fw * b;
                }
            }
            loc
        })
        .collect();
    for (tet, loc) in mesh.tets().iter().zip(&locals) {
        for i in 0..4 {
            out[tet[i]] += loc[i];
        }
    }
    out
}

/// `∫_{∂Ω_N} g_N φ_k` over faces whose tag carries Neumann data.
pub fn assemble_neumann(mesh: &TetMesh, bc: &FaceConditions) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    let rule = triangle3();
    for face in mesh.boundary_faces() {
        let FaceBc::Neumann(flux) = bc.get(face.tag) else { continue };
        if flux.as_constant() == Some(0.0) {
            continue;
        }
        let p = face.vertices.map(|v| mesh.vertices()[v]);
        let area = mesh.face_area(face);
        for q in &rule {
            let x = combine(&p, &q.bary);
            let fw = flux.eval(x) * q.weight * area;
            for i in 0..3 {
                out[face.vertices[i]] += fw * q.bary[i];
            }
        }
    }
    out
}

#[inline]
pub(crate) fn combine<const K: usize>(p: &[Point3; K], bary: &[f64; K]) -> Point3 {
    std::array::from_fn(|k| (0..K).map(|j| bary[j] * p[j][k]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::build_box_mesh;

    #[test]
    fn stiffness_annihilates_constants() {
        let m = build_box_mesh(2, [-1.0; 3], [1.0; 3]).unwrap();
        let a = assemble_stiffness(&m, 1.0).unwrap();
        let r = a.matvec(&vec![1.0; m.n_vertices()]);
        assert!(r.iter().all(|v| v.abs() < 1e-13));
        assert!(a.is_symmetric(1e-13));
        // Energy of the linear field x: ∫|∇x|² = vol.
        let x: Vec<f64> = m.vertices().iter().map(|p| p[0]).collect();
        assert!((a.bilinear(&x, &x) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn unit_source_integrates_to_volume() {
        let m = build_box_mesh(2, [-1.0; 3], [1.0; 3]).unwrap();
        let f = assemble_load(&m, &Field3::constant(1.0));
        assert!((f.iter().sum::<f64>() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn neumann_unit_flux_integrates_to_area() {
        let m = build_box_mesh(2, [-1.0; 3], [1.0; 3]).unwrap();
        let bc = FaceConditions {
            lateral: FaceBc::Dirichlet(Field3::constant(0.0)),
            top: FaceBc::Neumann(Field3::constant(1.0)),
            bottom: FaceBc::Neumann(Field3::constant(2.0)),
            other: FaceBc::Neumann(Field3::constant(0.0)),
        };
        let g = assemble_neumann(&m, &bc);
        assert!((g.iter().sum::<f64>() - 12.0).abs() < 1e-12);
    }
}
