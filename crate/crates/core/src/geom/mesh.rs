use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::functions::Point3;

/// Boundary tag of a triangular face of Ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceTag {
    Lateral,
    Top,
    Bottom,
    Other,
}

impl fmt::Display for FaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaceTag::Lateral => "lateral",
            FaceTag::Top => "top",
            FaceTag::Bottom => "bottom",
            FaceTag::Other => "other",
        })
    }
}

impl FromStr for FaceTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lateral" => Ok(FaceTag::Lateral),
            "top" => Ok(FaceTag::Top),
            "bottom" => Ok(FaceTag::Bottom),
            "other" => Ok(FaceTag::Other),
            _ => Err(format!("unknown face tag `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub vertices: [usize; 3],
    pub tag: FaceTag,
}

/// Affine barycentric map of one tetrahedron: `λ_j(x) = c_j + g_j · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetGeometry {
    pub volume: f64,
    pub grads: [Point3; 4],
    pub consts: [f64; 4],
}

impl TetGeometry {
    fn new(p: &[Point3; 4]) -> Option<Self> {
        let e = |k: usize| sub3(p[k], p[0]);
        let (e1, e2, e3) = (e(1), e(2), e(3));
        let det = dot3(e1, cross3(e2, e3));
        if !(det > 0.0) {
            return None;
        }
        // Rows of J⁻¹ for J = [e1 e2 e3] are the cofactor cross products / det.
        let g1 = scale3(cross3(e2, e3), 1.0 / det);
        let g2 = scale3(cross3(e3, e1), 1.0 / det);
        let g3 = scale3(cross3(e1, e2), 1.0 / det);
        let g0 = scale3(add3(add3(g1, g2), g3), -1.0);
        let c1 = -dot3(g1, p[0]);
        let c2 = -dot3(g2, p[0]);
        let c3 = -dot3(g3, p[0]);
        Some(Self {
            volume: det / 6.0,
            grads: [g0, g1, g2, g3],
            consts: [1.0 - c1 - c2 - c3, c1, c2, c3],
        })
    }

    #[inline]
    pub fn barycentric(&self, x: Point3) -> [f64; 4] {
        std::array::from_fn(|j| self.consts[j] + dot3(self.grads[j], x))
    }
}

/// Conforming tetrahedral mesh of a box domain.
#[derive(Debug, Clone)]
pub struct TetMesh {
    vertices: Vec<Point3>,
    tets: Vec<[usize; 4]>,
    boundary_faces: Vec<BoundaryFace>,
    geometry: Vec<TetGeometry>,
    h: f64,
    bbox: (Point3, Point3),
}

impl TetMesh {
    /// Validates and canonicalizes: tets are reoriented to positive volume,
    /// face incidence is checked, every exterior face must be tagged.
    pub fn new(
        vertices: Vec<Point3>,
        mut tets: Vec<[usize; 4]>,
        boundary_faces: Vec<BoundaryFace>,
    ) -> Result<Self> {
        if vertices.is_empty() || tets.is_empty() {
            return Err(Error::Validation("mesh has no vertices or no tets".into()));
        }
        let nv = vertices.len();
        for (t, tet) in tets.iter().enumerate() {
            if let Some(&v) = tet.iter().find(|&&v| v >= nv) {
                return Err(Error::Validation(format!("tet {t} references vertex {v} (have {nv})")));
            }
        }
        for (k, f) in boundary_faces.iter().enumerate() {
            if let Some(&v) = f.vertices.iter().find(|&&v| v >= nv) {
                return Err(Error::Validation(format!("face {k} references vertex {v} (have {nv})")));
            }
        }

        let mut geometry = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter_mut().enumerate() {
            let mut p = tet.map(|v| vertices[v]);
            if orient(&p) < 0.0 {
                tet.swap(2, 3);
                p.swap(2, 3);
            }
            let g = TetGeometry::new(&p)
                .ok_or_else(|| Error::Validation(format!("tet {t} is degenerate (zero volume)")))?;
            geometry.push(g);
        }

        let mut incidence: HashMap<[usize; 3], usize> = HashMap::with_capacity(2 * tets.len());
        for tet in &tets {
            for face in tet_faces(tet) {
                *incidence.entry(face).or_insert(0) += 1;
            }
        }
        if let Some((f, c)) = incidence.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Validation(format!("face {f:?} is shared by {c} tets")));
        }
        let mut tagged: HashMap<[usize; 3], usize> = HashMap::with_capacity(boundary_faces.len());
        for bf in &boundary_faces {
            let key = sorted3(bf.vertices);
            match incidence.get(&key) {
                Some(1) => {}
                Some(c) => {
                    return Err(Error::Validation(format!(
                        "boundary face {:?} is shared by {c} tets",
                        bf.vertices
                    )))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "boundary face {:?} is not a tet face",
                        bf.vertices
                    )))
                }
            }
            *tagged.entry(key).or_insert(0) += 1;
        }
        if let Some((f, _)) = tagged.iter().find(|(_, &c)| c > 1) {
            return Err(Error::Validation(format!("boundary face {f:?} listed twice")));
        }
        let exterior = incidence.values().filter(|&&c| c == 1).count();
        if exterior != boundary_faces.len() {
            return Err(Error::Validation(format!(
                "{exterior} exterior faces but {} tagged boundary faces",
                boundary_faces.len()
            )));
        }

        let h = tets
            .iter()
            .map(|tet| {
                let mut m: f64 = 0.0;
                for i in 0..4 {
                    for j in (i + 1)..4 {
                        m = m.max(dist3(vertices[tet[i]], vertices[tet[j]]));
                    }
                }
                m
            })
            .fold(0.0, f64::max);
        let bbox = bounding_box(&vertices);

        Ok(Self {
            vertices,
            tets,
            boundary_faces,
            geometry,
            h,
            bbox,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn geometry(&self, t: usize) -> &TetGeometry {
        &self.geometry[t]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    /// Maximum tet diameter (longest edge).
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn bbox(&self) -> (Point3, Point3) {
        self.bbox
    }

    /// Point-coincidence tolerance: 1e-12 × bounding-box diagonal.
    pub fn tolerance(&self) -> f64 {
        1e-12 * dist3(self.bbox.0, self.bbox.1)
    }

    pub fn volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn tet_points(&self, t: usize) -> [Point3; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn face_area(&self, face: &BoundaryFace) -> f64 {
        let p = face.vertices.map(|v| self.vertices[v]);
        0.5 * norm3(cross3(sub3(p[1], p[0]), sub3(p[2], p[0])))
    }
}

/// Structured box mesh: `n³` cells, each split into six tetrahedra sharing
/// the cell's main diagonal (Kuhn subdivision).
pub fn build_box_mesh(n: usize, lo: Point3, hi: Point3) -> Result<TetMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("mesh subdivisions must be at least 1".into()));
    }
    if (0..3).any(|k| !(hi[k] > lo[k])) {
        return Err(Error::InvalidArgument(format!("box {lo:?}..{hi:?} is empty")));
    }
    let np = n + 1;
    let idx = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let coord = |k: usize, i: usize| {
        if i == n {
            hi[k]
        } else {
            lo[k] + (hi[k] - lo[k]) * i as f64 / n as f64
        }
    };
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([coord(0, i), coord(1, j), coord(2, k)]);
            }
        }
    }

    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [idx(c[0], c[1], c[2]); 4];
                    for (step, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[step + 1] = idx(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }

    let faces = exterior_faces(&tets)
        .into_iter()
        .map(|f| BoundaryFace {
            vertices: f,
            tag: box_face_tag(f.map(|v| vertices[v]), lo, hi),
        })
        .collect();
    TetMesh::new(vertices, tets, faces)
}

/// Faces incident to exactly one tet, in deterministic order.
pub(crate) fn exterior_faces(tets: &[[usize; 4]]) -> Vec<[usize; 3]> {
    let mut count: HashMap<[usize; 3], usize> = HashMap::with_capacity(2 * tets.len());
    for tet in tets {
        for f in tet_faces(tet) {
            *count.entry(f).or_insert(0) += 1;
        }
    }
    let mut out: Vec<_> = count.into_iter().filter(|&(_, c)| c == 1).map(|(f, _)| f).collect();
    out.sort_unstable();
    out
}

fn box_face_tag(p: [Point3; 3], lo: Point3, hi: Point3) -> FaceTag {
    let tol = 1e-12 * dist3(lo, hi);
    let on = |k: usize, v: f64| p.iter().all(|q| (q[k] - v).abs() <= tol);
    if on(2, hi[2]) {
        FaceTag::Top
    } else if on(2, lo[2]) {
        FaceTag::Bottom
    } else if on(0, lo[0]) || on(0, hi[0]) || on(1, lo[1]) || on(1, hi[1]) {
        FaceTag::Lateral
    } else {
        FaceTag::Other
    }
}

fn tet_faces(tet: &[usize; 4]) -> [[usize; 3]; 4] {
    [
        sorted3([tet[1], tet[2], tet[3]]),
        sorted3([tet[0], tet[2], tet[3]]),
        sorted3([tet[0], tet[1], tet[3]]),
        sorted3([tet[0], tet[1], tet[2]]),
    ]
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

fn orient(p: &[Point3; 4]) -> f64 {
    dot3(sub3(p[1], p[0]), cross3(sub3(p[2], p[0]), sub3(p[3], p[0])))
}

pub(crate) fn bounding_box(points: &[Point3]) -> (Point3, Point3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

#[inline]
pub fn sub3(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add3(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale3(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3(a: Point3) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub fn dist3(a: Point3, b: Point3) -> f64 {
    norm3(sub3(a, b))
}
