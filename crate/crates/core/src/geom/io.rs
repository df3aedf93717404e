//! Plain-text mesh and network files.
//!
//! Mesh: `nv nt nf`, then `x y z` per vertex, `v0 v1 v2 v3` per tet and
//! `v0 v1 v2 tag` per boundary face. Network: one segment per line,
//! `ax ay az bx by bz R beta Ktilde gbar bc_a bc_b` with `bc` either
//! `D:<value>` or `N`. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::functions::ScalarFn;

use super::mesh::{BoundaryFace, FaceTag, TetMesh};
use super::network::{EndpointBc, Segment, SegmentNetwork};

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Self {
            path,
            inner: it.peekable(),
        }
    }

    fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.inner.next() {
            Some((n, l)) => Ok((n, l.split_whitespace().collect())),
            None => Err(Error::Parse {
                path: self.path.to_path_buf(),
                line: 0,
                message: format!("unexpected end of file while reading {what}"),
            }),
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn parse<T: FromStr>(&self, line: usize, field: &str, what: &str) -> Result<T> {
        field
            .parse()
            .map_err(|_| self.err(line, format!("cannot parse {what} from `{field}`")))
    }

    fn expect_len(&self, line: usize, fields: &[&str], n: usize, what: &str) -> Result<()> {
        if fields.len() == n {
            Ok(())
        } else {
            Err(self.err(line, format!("{what}: expected {n} fields, found {}", fields.len())))
        }
    }
}

pub fn load_mesh(path: &Path) -> Result<TetMesh> {
    let text = fs::read_to_string(path)?;
    parse_mesh(path, &text)
}

pub(crate) fn parse_mesh(path: &Path, text: &str) -> Result<TetMesh> {
    let mut lines = Lines::new(path, text);
    let (ln, h) = lines.next_fields("header")?;
    lines.expect_len(ln, &h, 3, "header")?;
    let nv: usize = lines.parse(ln, h[0], "vertex count")?;
    let nt: usize = lines.parse(ln, h[1], "tet count")?;
    let nf: usize = lines.parse(ln, h[2], "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, f) = lines.next_fields("vertices")?;
        lines.expect_len(ln, &f, 3, "vertex")?;
        let mut p = [0.0f64; 3];
        for k in 0..3 {
            p[k] = lines.parse(ln, f[k], "coordinate")?;
            if !p[k].is_finite() {
                return Err(lines.err(ln, "non-finite coordinate"));
            }
        }
        vertices.push(p);
    }
    let index = |lines: &Lines, ln: usize, s: &str| -> Result<usize> {
        let v: usize = lines.parse(ln, s, "vertex index")?;
        if v >= nv {
            return Err(lines.err(ln, format!("vertex index {v} out of range (have {nv})")));
        }
        Ok(v)
    };
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, f) = lines.next_fields("tets")?;
        lines.expect_len(ln, &f, 4, "tet")?;
        let mut t = [0; 4];
        for k in 0..4 {
            t[k] = index(&lines, ln, f[k])?;
        }
        tets.push(t);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, f) = lines.next_fields("faces")?;
        lines.expect_len(ln, &f, 4, "face")?;
        let mut v = [0; 3];
        for k in 0..3 {
            v[k] = index(&lines, ln, f[k])?;
        }
        let tag = FaceTag::from_str(f[3]).map_err(|m| lines.err(ln, m))?;
        faces.push(BoundaryFace { vertices: v, tag });
    }
    if let Some(&(ln, _)) = lines.inner.peek() {
        return Err(lines.err(ln, "trailing content after the declared faces"));
    }
    TetMesh::new(vertices, tets, faces)
}

pub fn save_mesh(mesh: &TetMesh, path: &Path) -> Result<()> {
    fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub(crate) fn format_mesh(mesh: &TetMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_tets(),
        mesh.boundary_faces().len()
    );
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    for t in mesh.tets() {
        let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    for f in mesh.boundary_faces() {
        let v = f.vertices;
        let _ = writeln!(s, "{} {} {} {}", v[0], v[1], v[2], f.tag);
    }
    s
}

pub fn load_network(path: &Path) -> Result<SegmentNetwork> {
    let text = fs::read_to_string(path)?;
    parse_network(path, &text)
}

pub(crate) fn parse_network(path: &Path, text: &str) -> Result<SegmentNetwork> {
    let mut lines = Lines::new(path, text);
    let mut segments = Vec::new();
    while lines.inner.peek().is_some() {
        let (ln, f) = lines.next_fields("segment")?;
        lines.expect_len(ln, &f, 12, "segment")?;
        let mut x = [0.0f64; 10];
        for k in 0..10 {
            x[k] = lines.parse(ln, f[k], "number")?;
        }
        let bc = |s: &str| -> Result<EndpointBc> {
            if s == "N" {
                Ok(EndpointBc::NeumannZero)
            } else if let Some(v) = s.strip_prefix("D:") {
                Ok(EndpointBc::Dirichlet(lines.parse(ln, v, "Dirichlet value")?))
            } else {
                Err(lines.err(ln, format!("endpoint condition must be `N` or `D:<value>`, found `{s}`")))
            }
        };
        let seg = Segment::new([x[0], x[1], x[2]], [x[3], x[4], x[5]], x[6], x[7])
            .with_k_tilde(ScalarFn::constant(x[8]))
            .with_gbar(ScalarFn::constant(x[9]))
            .with_bc(bc(f[10])?, bc(f[11])?);
        if !(seg.length() > 0.0 && seg.radius > 0.0 && seg.beta > 0.0) {
            return Err(lines.err(ln, "segment needs positive length, radius and beta"));
        }
        segments.push(seg);
    }
    SegmentNetwork::from_segments(segments)
}

/// Writes constant-coefficient networks; K̃ and ḡ are sampled at s = 0.
pub fn save_network(network: &SegmentNetwork, path: &Path) -> Result<()> {
    let mut s = String::new();
    for seg in network.segments() {
        let bc = |b: EndpointBc| match b {
            EndpointBc::Dirichlet(v) => format!("D:{v}"),
            _ => "N".to_string(),
        };
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {} {} {}",
            seg.a[0],
            seg.a[1],
            seg.a[2],
            seg.b[0],
            seg.b[1],
            seg.b[2],
            seg.radius,
            seg.beta,
            seg.k_tilde.eval(0.0),
            seg.gbar.eval(0.0),
            bc(seg.bc[0]),
            bc(seg.bc[1]),
        );
    }
    fs::write(path, s)?;
    Ok(())
}
