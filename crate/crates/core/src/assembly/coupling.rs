use rayon::prelude::*;

use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::trace::composite_points;

use super::{Discretization, Layout};

/// Segment integrals over all (unrestricted) DOFs. Rows and columns follow
/// [`Layout`]: 3D vertices, full û nodes, Ψ_D nodes, Ψ_Σ nodes.
#[derive(Debug, Clone)]
pub struct SegmentIntegrals {
    /// `Σ_i ∫ β|Γ| φ_k φ_l`, the trace-mass part of A.
    pub trace_mass: CsrMatrix,
    pub g: CsrMatrix,
    pub d: CsrMatrix,
    pub s_beta: CsrMatrix,
    pub b: CsrMatrix,
    pub b_beta: CsrMatrix,
    pub a_hat_sharp: CsrMatrix,
    pub g_hat: CsrMatrix,
    pub d_hat_beta: CsrMatrix,
    pub s_hat: CsrMatrix,
    pub m_d: CsrMatrix,
    pub m_s: CsrMatrix,
    /// `∫ |Σ| ḡ φ̂_k`.
    pub g_rhs: Vec<f64>,
}

struct Local {
    trace_mass: TripletBuilder,
    g: TripletBuilder,
    d: TripletBuilder,
    s_beta: TripletBuilder,
    b: TripletBuilder,
    b_beta: TripletBuilder,
    a_hat: TripletBuilder,
    g_hat: TripletBuilder,
    d_hat_beta: TripletBuilder,
    s_hat: TripletBuilder,
    m_d: TripletBuilder,
    m_s: TripletBuilder,
    g_rhs: Vec<(usize, f64)>,
}

impl Local {
    fn new(l: &Layout) -> Self {
        let (nv, nh, nd, ns) = (l.n_vertices, l.n_hat_full, l.n_psi_d, l.n_psi_s);
        Self {
            trace_mass: TripletBuilder::new(nv, nv),
            g: TripletBuilder::new(nv, nv),
            d: TripletBuilder::new(nv, nd),
            s_beta: TripletBuilder::new(nv, ns),
            b: TripletBuilder::new(nv, nh),
            b_beta: TripletBuilder::new(nv, nh),
            a_hat: TripletBuilder::new(nh, nh),
            g_hat: TripletBuilder::new(nh, nh),
            d_hat_beta: TripletBuilder::new(nh, nd),
            s_hat: TripletBuilder::new(nh, ns),
            m_d: TripletBuilder::new(nd, nd),
            m_s: TripletBuilder::new(ns, ns),
            g_rhs: Vec::new(),
        }
    }

    fn absorb(&mut self, o: Local) {
        self.trace_mass.extend(o.trace_mass);
        self.g.extend(o.g);
        self.d.extend(o.d);
        self.s_beta.extend(o.s_beta);
        self.b.extend(o.b);
        self.b_beta.extend(o.b_beta);
        self.a_hat.extend(o.a_hat);
        self.g_hat.extend(o.g_hat);
        self.d_hat_beta.extend(o.d_hat_beta);
        self.s_hat.extend(o.s_hat);
        self.m_d.extend(o.m_d);
        self.m_s.extend(o.m_s);
        self.g_rhs.extend(o.g_rhs);
    }
}

/// Every segment integral, by composite Gauss quadrature on the union of the
/// trace breakpoints and the three partitions of each segment.
pub fn assemble_segment_integrals(disc: &Discretization) -> SegmentIntegrals {
    let layout = disc.layout();
    let per_segment: Vec<Local> = (0..disc.network.len())
        .into_par_iter()
        .map(|i| segment_local(disc, &layout, i))
        .collect();
    let mut all = Local::new(&layout);
    for l in per_segment {
        all.absorb(l);
    }
    let mut g_rhs = vec![0.0; layout.n_hat_full];
    for (k, v) in all.g_rhs {
        g_rhs[k] += v;
    }
    SegmentIntegrals {
        trace_mass: all.trace_mass.build(),
        g: all.g.build(),
        d: all.d.build(),
        s_beta: all.s_beta.build(),
        b: all.b.build(),
        b_beta: all.b_beta.build(),
        a_hat_sharp: all.a_hat.build(),
        g_hat: all.g_hat.build(),
        d_hat_beta: all.d_hat_beta.build(),
        s_hat: all.s_hat.build(),
        m_d: all.m_d.build(),
        m_s: all.m_s.build(),
        g_rhs,
    }
}

fn segment_local(disc: &Discretization, layout: &Layout, i: usize) -> Local {
    let seg = disc.network.segment(i);
    let trace = &disc.traces[i];
    let parts = &disc.partitions[i];
    let (oh, od, os) = (layout.hat_offset[i], layout.psi_d_offset[i], layout.psi_s_offset[i]);
    let mut l = Local::new(layout);
    let tets = disc.mesh.tets();

    for q in composite_points(trace, [&parts.uhat, &parts.psi_d, &parts.psi_sigma]) {
        let s = q.s;
        let w = q.w;
        let cell = &trace.cells[q.cell];
        let phi = cell.bary(s);
        let vert = tets[cell.tet];
        let [eh, ed, es] = q.elems;
        let uh = parts.uhat.hats(eh, s);
        let duh = parts.uhat.hat_slopes(eh);
        let pd = parts.psi_d.hats(ed, s);
        let ps = parts.psi_sigma.hats(es, s);
        let bg = seg.beta * seg.perimeter(s);
        let ks = seg.k_tilde.eval(s) * seg.area(s);
        let src = seg.area(s) * seg.gbar.eval(s);

        for a in 0..4 {
            for b in 0..4 {
                let m = w * (phi[a] * phi[b]);
                l.trace_mass.push(vert[a], vert[b], bg * m);
                l.g.push(vert[a], vert[b], m);
            }
            for b in 0..2 {
                l.d.push(vert[a], od + ed + b, w * phi[a] * pd[b]);
                l.s_beta.push(vert[a], os + es + b, w * bg * phi[a] * ps[b]);
                l.b.push(vert[a], oh + eh + b, w * phi[a] * uh[b]);
                l.b_beta.push(vert[a], oh + eh + b, w * bg * phi[a] * uh[b]);
            }
        }
        for a in 0..2 {
            let ra = oh + eh + a;
            for b in 0..2 {
                l.a_hat.push(ra, oh + eh + b, w * (ks * (duh[a] * duh[b]) + bg * (uh[a] * uh[b])));
                l.g_hat.push(ra, oh + eh + b, w * (uh[a] * uh[b]));
                l.d_hat_beta.push(ra, od + ed + b, w * bg * uh[a] * pd[b]);
                l.s_hat.push(ra, os + es + b, w * uh[a] * ps[b]);
                l.m_d.push(od + ed + a, od + ed + b, w * (pd[a] * pd[b]));
                l.m_s.push(os + es + a, os + es + b, w * (ps[a] * ps[b]));
            }
            l.g_rhs.push((ra, w * src * uh[a]));
        }
    }
    l
}
