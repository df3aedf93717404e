//! Legacy ASCII VTK and CSV writers. Floats carry 17 significant digits so
//! output round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::fmt_f64;
use crate::assembly::{Discretization, Dofs};
use crate::error::{Error, Result};
use crate::geom::TetMesh;
use crate::trace::merge_breakpoints;

/// Unstructured tet grid with point data `U` (full vertex values).
pub fn vtk_volume(mesh: &TetMesh, u: &[f64]) -> Result<String> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::Dimension(format!(
            "{} vertex values for {} vertices",
            u.len(),
            mesh.n_vertices()
        )));
    }
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0\n3D solution\nASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2])).unwrap();
    }
    writeln!(s, "CELLS {} {}", mesh.n_tets(), 5 * mesh.n_tets()).unwrap();
    for t in mesh.tets() {
        writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]).unwrap();
    }
    writeln!(s, "CELL_TYPES {}", mesh.n_tets()).unwrap();
    for _ in 0..mesh.n_tets() {
        s.push_str("10\n");
    }
    writeln!(s, "POINT_DATA {}\nSCALARS U double 1\nLOOKUP_TABLE default", mesh.n_vertices()).unwrap();
    for v in u {
        writeln!(s, "{}", fmt_f64(*v)).unwrap();
    }
    Ok(s)
}

/// One polyline per segment through the merged nodes of its three 1D
/// partitions, with point data `Uhat` and, when given, `PsiD` and
/// `PsiSigma`. `uhat` holds full û node values; `psi` the free Ψ vectors.
pub fn vtk_network(disc: &Discretization, dofs: &Dofs, uhat: &[f64], psi: Option<(&[f64], &[f64])>) -> Result<String> {
    let layout = disc.layout();
    if uhat.len() != layout.n_hat_full {
        return Err(Error::Dimension("û vector does not match the discretization".into()));
    }
    if let Some((d, s)) = psi {
        if d.len() != layout.n_psi_d || s.len() != layout.n_psi_s {
            return Err(Error::Dimension("Ψ vectors do not match the discretization".into()));
        }
    }
    let mut points = Vec::new();
    let mut lines: Vec<Vec<usize>> = Vec::new();
    let (mut vu, mut vd, mut vs) = (Vec::new(), Vec::new(), Vec::new());
    for (i, seg) in disc.network.segments().iter().enumerate() {
        let parts = &disc.partitions[i];
        let lists: [&[f64]; 3] = [&parts.uhat.nodes, &parts.psi_d.nodes, &parts.psi_sigma.nodes];
        let nodes = merge_breakpoints(&lists, 1e-12 * seg.length());
        let hv = &uhat[layout.hat_offset[i]..layout.hat_offset[i] + parts.uhat.n_nodes()];
        let mut line = Vec::with_capacity(nodes.len());
        for &s in &nodes {
            line.push(points.len());
            points.push(seg.point(s));
            vu.push(parts.uhat.interpolate(hv, s));
            if let Some((d, p)) = psi {
                vd.push(parts.psi_d.interpolate(&d[dofs.psi_d_range(i)], s));
                vs.push(parts.psi_sigma.interpolate(&p[dofs.psi_s_range(i)], s));
            }
        }
        lines.push(line);
    }
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0\n1D solution\nASCII\nDATASET POLYDATA").unwrap();
    writeln!(s, "POINTS {} double", points.len()).unwrap();
    for p in &points {
        writeln!(s, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2])).unwrap();
    }
    let size: usize = lines.iter().map(|l| l.len() + 1).sum();
    writeln!(s, "LINES {} {size}", lines.len()).unwrap();
    for l in &lines {
        let ids: Vec<String> = l.iter().map(|k| k.to_string()).collect();
        writeln!(s, "{} {}", l.len(), ids.join(" ")).unwrap();
    }
    writeln!(s, "POINT_DATA {}", points.len()).unwrap();
    let mut field = |name: &str, v: &[f64]| {
        writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for x in v {
            writeln!(s, "{}", fmt_f64(*x)).unwrap();
        }
    };
    field("Uhat", &vu);
    if psi.is_some() {
        field("PsiD", &vd);
        field("PsiSigma", &vs);
    }
    Ok(s)
}

/// `iteration,residual,relative_residual` rows of a CG history.
pub fn residual_csv(history: &[f64], reference: f64) -> String {
    let mut s = String::from("iteration,residual,relative_residual\n");
    let scale = if reference > 0.0 { reference } else { 1.0 };
    for (k, r) in history.iter().enumerate() {
        writeln!(s, "{k},{},{}", fmt_f64(*r), fmt_f64(r / scale)).unwrap();
    }
    s
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
