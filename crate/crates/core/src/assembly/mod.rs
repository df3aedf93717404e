//! Discrete blocks of the coupled problem.
//!
//! Everything is first assembled over all DOFs ("full" numbering), then
//! restricted to the free DOFs. Dirichlet values enter as lifts: the
//! restricted right-hand sides and the affine terms of the mismatch
//! functional carry their contribution.

mod coupling;
mod volume;

use std::ops::Range;

use crate::error::{Error, Result};
use crate::functions::Field3;
use crate::geom::{split_at_junctions, EndpointBc, FaceTag, SegmentNetwork, Site, TetMesh};
use crate::linalg::dot;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::trace::{build_partition, trace_network, Partition1D, Role, TraceDecomposition};

pub use coupling::{assemble_segment_integrals, SegmentIntegrals};
pub use volume::{assemble_load, assemble_neumann, assemble_stiffness};

/// 1D refinement parameters: nodes per tet-face crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub uhat: f64,
    pub psi_d: f64,
    pub psi_sigma: f64,
}

impl Default for Deltas {
    fn default() -> Self {
        Self {
            uhat: 1.0,
            psi_d: 0.5,
            psi_sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPartitions {
    pub uhat: Partition1D,
    pub psi_d: Partition1D,
    pub psi_sigma: Partition1D,
}

/// Mesh, split network, traces and 1D partitions: everything geometric.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: TetMesh,
    pub network: SegmentNetwork,
    pub traces: Vec<TraceDecomposition>,
    pub partitions: Vec<SegmentPartitions>,
    pub deltas: Deltas,
}

impl Discretization {
    pub fn new(mesh: TetMesh, network: &SegmentNetwork, deltas: Deltas) -> Result<Self> {
        let network = if network.is_split() {
            network.clone()
        } else {
            split_at_junctions(network)?
        };
        let traces = trace_network(&mesh, &network)?;
        let partitions = traces
            .iter()
            .map(|tr| {
                let seg = tr.segment;
                let c = tr.crossing_count();
                Ok(SegmentPartitions {
                    uhat: build_partition(seg, tr.length, Role::Uhat, deltas.uhat, c)?,
                    psi_d: build_partition(seg, tr.length, Role::PsiD, deltas.psi_d, c)?,
                    psi_sigma: build_partition(seg, tr.length, Role::PsiSigma, deltas.psi_sigma, c)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mesh,
            network,
            traces,
            partitions,
            deltas,
        })
    }

    /// Replaces the partitions (e.g. to share nodes between roles).
    pub fn with_partitions(mut self, partitions: Vec<SegmentPartitions>) -> Result<Self> {
        if partitions.len() != self.network.len() {
            return Err(Error::Dimension(format!(
                "{} partition sets for {} segments",
                partitions.len(),
                self.network.len()
            )));
        }
        for (i, p) in partitions.iter().enumerate() {
            let len = self.traces[i].length;
            for part in [&p.uhat, &p.psi_d, &p.psi_sigma] {
                if part.nodes[0] != 0.0 || (part.length() - len).abs() > 1e-12 * len || part.n_nodes() < 2 {
                    return Err(Error::InvalidArgument(format!("partition of segment {i} does not span [0, S]")));
                }
            }
        }
        self.partitions = partitions;
        Ok(self)
    }

    pub fn crossing_counts(&self) -> Vec<usize> {
        self.traces.iter().map(TraceDecomposition::crossing_count).collect()
    }

    pub fn layout(&self) -> Layout {
        let mut l = Layout {
            n_vertices: self.mesh.n_vertices(),
            hat_offset: Vec::with_capacity(self.partitions.len()),
            psi_d_offset: Vec::with_capacity(self.partitions.len()),
            psi_s_offset: Vec::with_capacity(self.partitions.len()),
            n_hat_full: 0,
            n_psi_d: 0,
            n_psi_s: 0,
        };
        for p in &self.partitions {
            l.hat_offset.push(l.n_hat_full);
            l.psi_d_offset.push(l.n_psi_d);
            l.psi_s_offset.push(l.n_psi_s);
            l.n_hat_full += p.uhat.n_nodes();
            l.n_psi_d += p.psi_d.n_nodes();
            l.n_psi_s += p.psi_sigma.n_nodes();
        }
        l
    }
}

/// Full (unrestricted) numbering of all DOF families.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n_vertices: usize,
    pub hat_offset: Vec<usize>,
    pub psi_d_offset: Vec<usize>,
    pub psi_s_offset: Vec<usize>,
    pub n_hat_full: usize,
    pub n_psi_d: usize,
    pub n_psi_s: usize,
}

/// Boundary condition on one tagged part of ∂Ω. Neumann data is the outward
/// flux `K∇u·n`.
#[derive(Debug, Clone)]
pub enum FaceBc {
    Dirichlet(Field3),
    Neumann(Field3),
}

#[derive(Debug, Clone)]
pub struct FaceConditions {
    pub lateral: FaceBc,
    pub top: FaceBc,
    pub bottom: FaceBc,
    pub other: FaceBc,
}

impl FaceConditions {
    pub fn uniform(bc: FaceBc) -> Self {
        Self {
            lateral: bc.clone(),
            top: bc.clone(),
            bottom: bc.clone(),
            other: bc,
        }
    }

    pub fn get(&self, tag: FaceTag) -> &FaceBc {
        match tag {
            FaceTag::Lateral => &self.lateral,
            FaceTag::Top => &self.top,
            FaceTag::Bottom => &self.bottom,
            FaceTag::Other => &self.other,
        }
    }
}

/// Data of the 3D subproblem: scalar conductivity, source, face conditions.
#[derive(Debug, Clone)]
pub struct VolumeData {
    pub k: f64,
    pub source: Field3,
    pub bc: FaceConditions,
}

/// Free/constrained split of the 3D and û DOFs.
#[derive(Debug, Clone)]
pub struct Dofs {
    pub layout: Layout,
    pub vertex_free: Vec<Option<usize>>,
    pub free_vertices: Vec<usize>,
    /// Dirichlet values on constrained vertices, zero elsewhere.
    pub u_lift: Vec<f64>,
    pub hat_free: Vec<Option<usize>>,
    pub free_hats: Vec<usize>,
    pub uhat_lift: Vec<f64>,
    /// Free-û index range of every segment (contiguous by construction).
    pub hat_free_range: Vec<Range<usize>>,
}

impl Dofs {
    pub fn new(disc: &Discretization, data: &VolumeData) -> Self {
        let layout = disc.layout();
        let nv = layout.n_vertices;
        let mut fixed: Vec<Option<f64>> = vec![None; nv];
        for face in disc.mesh.boundary_faces() {
            if let FaceBc::Dirichlet(g) = data.bc.get(face.tag) {
                for &v in &face.vertices {
                    if fixed[v].is_none() {
                        fixed[v] = Some(g.eval(disc.mesh.vertices()[v]));
                    }
                }
            }
        }
        let (vertex_free, free_vertices, u_lift) = number(&fixed);

        let mut hat_fixed: Vec<Option<f64>> = vec![None; layout.n_hat_full];
        for (i, seg) in disc.network.segments().iter().enumerate() {
            let last = layout.hat_offset[i] + disc.partitions[i].uhat.n_nodes() - 1;
            for (k, node) in [layout.hat_offset[i], last].into_iter().enumerate() {
                if let EndpointBc::Dirichlet(v) = seg.bc[k] {
                    hat_fixed[node] = Some(v);
                }
            }
        }
        let (hat_free, free_hats, uhat_lift) = number(&hat_fixed);
        let hat_free_range = (0..disc.network.len())
            .map(|i| {
                let full = layout.hat_offset[i]..layout.hat_offset[i] + disc.partitions[i].uhat.n_nodes();
                let first = full.clone().find_map(|k| hat_free[k]);
                let count = full.filter(|&k| hat_free[k].is_some()).count();
                match first {
                    Some(f) => f..f + count,
                    None => {
                        let before = hat_free[..layout.hat_offset[i]].iter().flatten().count();
                        before..before
                    }
                }
            })
            .collect();
        Self {
            layout,
            vertex_free,
            free_vertices,
            u_lift,
            hat_free,
            free_hats,
            uhat_lift,
            hat_free_range,
        }
    }

    pub fn n(&self) -> usize {
        self.free_vertices.len()
    }

    pub fn n_hat(&self) -> usize {
        self.free_hats.len()
    }

    /// Vertex values of a free-DOF vector, including Dirichlet values.
    pub fn expand_u(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.u_lift.clone();
        for (k, &v) in self.free_vertices.iter().enumerate() {
            out[v] = u[k];
        }
        out
    }

    /// Full û nodal values, including Dirichlet endpoint values.
    pub fn expand_uhat(&self, uhat: &[f64]) -> Vec<f64> {
        let mut out = self.uhat_lift.clone();
        for (k, &v) in self.free_hats.iter().enumerate() {
            out[v] = uhat[k];
        }
        out
    }

    pub fn restrict_u(&self, full: &[f64]) -> Vec<f64> {
        self.free_vertices.iter().map(|&v| full[v]).collect()
    }

    pub fn restrict_uhat(&self, full: &[f64]) -> Vec<f64> {
        self.free_hats.iter().map(|&v| full[v]).collect()
    }

    pub fn psi_d_range(&self, i: usize) -> Range<usize> {
        let l = &self.layout;
        l.psi_d_offset[i]..l.psi_d_offset.get(i + 1).copied().unwrap_or(l.n_psi_d)
    }

    pub fn psi_s_range(&self, i: usize) -> Range<usize> {
        let l = &self.layout;
        l.psi_s_offset[i]..l.psi_s_offset.get(i + 1).copied().unwrap_or(l.n_psi_s)
    }

    pub fn hat_full_range(&self, i: usize) -> Range<usize> {
        let l = &self.layout;
        l.hat_offset[i]..l.hat_offset.get(i + 1).copied().unwrap_or(l.n_hat_full)
    }
}

fn number(fixed: &[Option<f64>]) -> (Vec<Option<usize>>, Vec<usize>, Vec<f64>) {
    let mut map = vec![None; fixed.len()];
    let mut free = Vec::new();
    let mut lift = vec![0.0; fixed.len()];
    for (k, f) in fixed.iter().enumerate() {
        match f {
            Some(v) => lift[k] = *v,
            None => {
                map[k] = Some(free.len());
                free.push(k);
            }
        }
    }
    (map, free, lift)
}

/// Junction constraints: one row per consecutive pair of members of each
/// junction, `+1` on the first endpoint DOF and `−1` on the second.
pub fn assemble_q(disc: &Discretization, dofs: &Dofs) -> Result<CsrMatrix> {
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for (jid, j) in disc.network.junctions().iter().enumerate() {
        let mut ids = Vec::with_capacity(j.members.len());
        for &(seg, site) in &j.members {
            let Site::End(e) = site else {
                return Err(Error::Assembly(format!("junction {jid} has an interior member; split the network first")));
            };
            let full = dofs.hat_full_range(seg);
            let node = if e.index() == 0 { full.start } else { full.end - 1 };
            let free = dofs.hat_free[node].ok_or_else(|| {
                Error::Assembly(format!("junction {jid} references a constrained û DOF on segment {seg}"))
            })?;
            ids.push(free);
        }
        rows.extend(ids.windows(2).map(|w| (w[0], w[1])));
    }
    let mut t = TripletBuilder::new(rows.len(), dofs.n_hat());
    for (r, &(p, q)) in rows.iter().enumerate() {
        t.push(r, p, 1.0);
        t.push(r, q, -1.0);
    }
    Ok(t.build())
}

/// All restricted blocks and right-hand sides.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub dofs: Dofs,
    pub a: CsrMatrix,
    pub a_hat_sharp: CsrMatrix,
    pub q: CsrMatrix,
    pub d_hat_beta: CsrMatrix,
    pub s_beta: CsrMatrix,
    pub g: CsrMatrix,
    pub g_hat: CsrMatrix,
    pub m_d: CsrMatrix,
    pub m_s: CsrMatrix,
    pub d: CsrMatrix,
    pub s_hat: CsrMatrix,
    /// `∫ φ_k φ̂_l`.
    pub b: CsrMatrix,
    /// `∫ β|Γ| φ_k φ̂_l`, the block entering the coupled system.
    pub b_beta: CsrMatrix,
    pub f: Vec<f64>,
    pub g_rhs: Vec<f64>,
    /// Affine part of the mismatch functional from the Dirichlet lifts:
    /// `J̃ = ½Φᵀ𝒢Φ + linᵀΦ + c`.
    pub lin_u: Vec<f64>,
    pub lin_uhat: Vec<f64>,
    pub lin_psi_d: Vec<f64>,
    pub lin_psi_s: Vec<f64>,
    pub c: f64,
    /// Right-hand side of the coupled system `[[A, −Bβ], [−Bβᵀ, Â]]`.
    pub coupled_f: Vec<f64>,
    pub coupled_g: Vec<f64>,
}

impl BlockSystem {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_hat(&self) -> usize {
        self.a_hat_sharp.nrows()
    }

    pub fn n_q(&self) -> usize {
        self.q.nrows()
    }

    /// Order of Â = [[Â♯, Qᵀ], [Q, 0]].
    pub fn n_hat_prime(&self) -> usize {
        self.n_hat() + self.n_q()
    }

    pub fn n_psi_d(&self) -> usize {
        self.m_d.nrows()
    }

    pub fn n_psi_s(&self) -> usize {
        self.m_s.nrows()
    }

    /// `Â = [[Â♯, Qᵀ], [Q, 0]]`; equals `Â♯` without junctions.
    pub fn a_hat(&self) -> CsrMatrix {
        if self.n_q() == 0 {
            return self.a_hat_sharp.clone();
        }
        let n = self.n_hat_prime();
        let mut t = TripletBuilder::with_capacity(n, n, self.a_hat_sharp.nnz() + 4 * self.q.nnz());
        t.add_block(0, 0, &self.a_hat_sharp, 1.0);
        t.add_block_transposed(0, self.n_hat(), &self.q, 1.0);
        t.add_block(self.n_hat(), 0, &self.q, 1.0);
        t.build()
    }

    /// Appends zero multiplier entries to a û-sized vector.
    pub fn pad_hat(&self, v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_hat_prime());
        out.extend_from_slice(v);
        out.resize(self.n_hat_prime(), 0.0);
        out
    }

    /// `D̂β′`: D̂β padded with zero multiplier rows.
    pub fn d_hat_beta_prime(&self) -> CsrMatrix {
        pad_rows(&self.d_hat_beta, self.n_hat_prime())
    }

    /// `𝒢 = [[G,0,−D,0],[0,Ĝ,0,−Ŝ],[−Dᵀ,0,M^D,0],[0,−Ŝᵀ,0,M^Σ]]` on
    /// `[U; Û; Ψ_D; Ψ_Σ]` (Û without multipliers).
    pub fn mismatch_matrix(&self) -> CsrMatrix {
        let (n, nh, nd) = (self.n(), self.n_hat(), self.n_psi_d());
        let total = n + nh + nd + self.n_psi_s();
        let mut t = TripletBuilder::new(total, total);
        t.add_block(0, 0, &self.g, 1.0);
        t.add_block(0, n + nh, &self.d, -1.0);
        t.add_block(n, n, &self.g_hat, 1.0);
        t.add_block(n, n + nh + nd, &self.s_hat, -1.0);
        t.add_block_transposed(n + nh, 0, &self.d, -1.0);
        t.add_block(n + nh, n + nh, &self.m_d, 1.0);
        t.add_block_transposed(n + nh + nd, n, &self.s_hat, -1.0);
        t.add_block(n + nh + nd, n + nh + nd, &self.m_s, 1.0);
        t.build()
    }

    /// Discrete functional `J̃ = ½Φᵀ𝒢Φ + linᵀΦ + c`, i.e.
    /// `½Σ_i (‖U|Λ_i − Ψ_D‖² + ‖Û_i − Ψ_Σ‖²)` including Dirichlet values.
    pub fn functional(&self, u: &[f64], uhat: &[f64], psi_d: &[f64], psi_s: &[f64]) -> f64 {
        let gu = self.g.matvec(u);
        let gh = self.g_hat.matvec(uhat);
        let du = self.d.matvec(psi_d);
        let sh = self.s_hat.matvec(psi_s);
        let quad = dot(u, &gu) + dot(uhat, &gh) - 2.0 * dot(u, &du) - 2.0 * dot(uhat, &sh)
            + self.m_d.bilinear(psi_d, psi_d)
            + self.m_s.bilinear(psi_s, psi_s);
        let lin = dot(&self.lin_u, u) + dot(&self.lin_uhat, uhat) + dot(&self.lin_psi_d, psi_d) + dot(&self.lin_psi_s, psi_s);
        0.5 * quad + lin + self.c
    }
}

fn pad_rows(m: &CsrMatrix, nrows: usize) -> CsrMatrix {
    let mut t = TripletBuilder::with_capacity(nrows, m.ncols(), m.nnz());
    t.add_block(0, 0, m, 1.0);
    t.build()
}

/// Assembles and restricts every block for the given 3D data; the 1D data
/// comes from the segments themselves.
pub fn assemble(disc: &Discretization, data: &VolumeData) -> Result<BlockSystem> {
    let dofs = Dofs::new(disc, data);
    let si = assemble_segment_integrals(disc);
    let stiff = assemble_stiffness(&disc.mesh, data.k)?;
    let a_full = stiff.add_scaled(&si.trace_mass, 1.0);
    let mut f_full = assemble_load(&disc.mesh, &data.source);
    for (fi, ni) in f_full.iter_mut().zip(assemble_neumann(&disc.mesh, &data.bc)) {
        *fi += ni;
    }

    let (vmap, n) = (&dofs.vertex_free, dofs.n());
    let (hmap, nh) = (&dofs.hat_free, dofs.n_hat());
    let all = |k: usize| -> Vec<Option<usize>> { (0..k).map(Some).collect() };
    let dmap = all(si.m_d.nrows());
    let smap = all(si.m_s.nrows());
    let (nd, ns) = (dmap.len(), smap.len());

    let ul = &dofs.u_lift;
    let hl = &dofs.uhat_lift;
    let minus = |x: Vec<f64>, y: Vec<f64>| -> Vec<f64> { x.iter().zip(&y).map(|(a, b)| a - b).collect() };

    let f = dofs.restrict_u(&minus(f_full.clone(), a_full.matvec(ul)));
    let g_rhs = dofs.restrict_uhat(&minus(si.g_rhs.clone(), si.a_hat_sharp.matvec(hl)));

    let bb_hl = si.b_beta.matvec(hl);
    let bbt_ul = si.b_beta.matvec_transpose(ul);
    let coupled_f = dofs.restrict_u(&f_full.iter().zip(a_full.matvec(ul)).zip(&bb_hl).map(|((f, a), b)| f - a + b).collect::<Vec<_>>());
    let coupled_g = dofs.restrict_uhat(
        &si.g_rhs
            .iter()
            .zip(si.a_hat_sharp.matvec(hl))
            .zip(&bbt_ul)
            .map(|((g, a), b)| g - a + b)
            .collect::<Vec<_>>(),
    );

    let g_ul = si.g.matvec(ul);
    let gh_hl = si.g_hat.matvec(hl);
    let lin_u = dofs.restrict_u(&g_ul);
    let lin_uhat = dofs.restrict_uhat(&gh_hl);
    let lin_psi_d: Vec<f64> = si.d.matvec_transpose(ul).iter().map(|v| -v).collect();
    let lin_psi_s: Vec<f64> = si.s_hat.matvec_transpose(hl).iter().map(|v| -v).collect();
    let c = 0.5 * (dot(ul, &g_ul) + dot(hl, &gh_hl));

    let q = assemble_q(disc, &dofs)?;
    Ok(BlockSystem {
        a: a_full.restrict(vmap, n, vmap, n),
        a_hat_sharp: si.a_hat_sharp.restrict(hmap, nh, hmap, nh),
        q,
        d_hat_beta: si.d_hat_beta.restrict(hmap, nh, &dmap, nd),
        s_beta: si.s_beta.restrict(vmap, n, &smap, ns),
        g: si.g.restrict(vmap, n, vmap, n),
        g_hat: si.g_hat.restrict(hmap, nh, hmap, nh),
        m_d: si.m_d,
        m_s: si.m_s,
        d: si.d.restrict(vmap, n, &dmap, nd),
        s_hat: si.s_hat.restrict(hmap, nh, &smap, ns),
        b: si.b.restrict(vmap, n, hmap, nh),
        b_beta: si.b_beta.restrict(vmap, n, hmap, nh),
        f,
        g_rhs,
        lin_u,
        lin_uhat,
        lin_psi_d,
        lin_psi_s,
        c,
        coupled_f,
        coupled_g,
        dofs,
    })
}

#[cfg(test)]
mod tests;
