use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::functions::{Point3, ScalarFn};

use super::mesh::{add3, bounding_box, dist3, dot3, scale3, sub3};

/// Boundary condition at one end of a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndpointBc {
    Dirichlet(f64),
    NeumannZero,
    /// Endpoint belongs to the junction with this index.
    Junction(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    A,
    B,
}

impl Endpoint {
    pub fn index(self) -> usize {
        match self {
            Endpoint::A => 0,
            Endpoint::B => 1,
        }
    }
}

/// Rectilinear segment with circular cross-section of constant radius.
#[derive(Debug, Clone)]
pub struct Segment {
    pub a: Point3,
    pub b: Point3,
    pub radius: f64,
    pub beta: f64,
    pub k_tilde: ScalarFn,
    pub gbar: ScalarFn,
    pub bc: [EndpointBc; 2],
    /// Index of the unsplit segment this piece came from.
    pub parent: usize,
    /// Arclength of `a` along the parent.
    pub parent_offset: f64,
}

impl Segment {
    pub fn new(a: Point3, b: Point3, radius: f64, beta: f64) -> Self {
        Self {
            a,
            b,
            radius,
            beta,
            k_tilde: ScalarFn::constant(1.0),
            gbar: ScalarFn::constant(0.0),
            bc: [EndpointBc::NeumannZero; 2],
            parent: 0,
            parent_offset: 0.0,
        }
    }

    pub fn with_k_tilde(mut self, k: ScalarFn) -> Self {
        self.k_tilde = k;
        self
    }

    pub fn with_gbar(mut self, g: ScalarFn) -> Self {
        self.gbar = g;
        self
    }

    pub fn with_bc(mut self, at_a: EndpointBc, at_b: EndpointBc) -> Self {
        self.bc = [at_a, at_b];
        self
    }

    pub fn length(&self) -> f64 {
        dist3(self.a, self.b)
    }

    pub fn tangent(&self) -> Point3 {
        scale3(sub3(self.b, self.a), 1.0 / self.length())
    }

    #[inline]
    pub fn point(&self, s: f64) -> Point3 {
        add3(self.a, scale3(self.tangent(), s))
    }

    pub fn endpoint(&self, e: Endpoint) -> Point3 {
        match e {
            Endpoint::A => self.a,
            Endpoint::B => self.b,
        }
    }

    /// Lateral perimeter |Γ(s)|.
    pub fn perimeter(&self, _s: f64) -> f64 {
        2.0 * PI * self.radius
    }

    /// Cross-section area |Σ(s)|.
    pub fn area(&self, _s: f64) -> f64 {
        PI * self.radius * self.radius
    }

    /// Arclength of the orthogonal projection of `p`, and the distance to it.
    pub fn project(&self, p: Point3) -> (f64, f64) {
        let s = dot3(sub3(p, self.a), self.tangent()).clamp(0.0, self.length());
        (s, dist3(p, self.point(s)))
    }

    fn validate(&self, i: usize) -> Result<()> {
        let ok = self.length() > 0.0
            && self.radius > 0.0
            && self.beta > 0.0
            && self.a.iter().chain(&self.b).all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "segment {i}: need |b−a| > 0, R > 0, β > 0 (got |b−a|={}, R={}, β={})",
                self.length(),
                self.radius,
                self.beta
            )))
        }
    }
}

/// Where a junction point sits on an incident segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Site {
    End(Endpoint),
    /// Interior point at the given arclength; removed by splitting.
    Interior(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub point: Point3,
    pub members: Vec<(usize, Site)>,
}

/// Segments plus junction records.
#[derive(Debug, Clone)]
pub struct SegmentNetwork {
    segments: Vec<Segment>,
    junctions: Vec<Junction>,
    tol: f64,
}

impl SegmentNetwork {
    /// Builds a network from segments and junction declarations
    /// `(point, incident segment ids)`. The site of each member is located
    /// geometrically; endpoints listed in a junction get `EndpointBc::Junction`.
    pub fn new(mut segments: Vec<Segment>, junctions: Vec<(Point3, Vec<usize>)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidArgument("network has no segments".into()));
        }
        for (i, seg) in segments.iter_mut().enumerate() {
            seg.validate(i)?;
            seg.parent = i;
            seg.parent_offset = 0.0;
        }
        let tol = network_tolerance(&segments);
        let mut records = Vec::with_capacity(junctions.len());
        for (jid, (point, ids)) in junctions.into_iter().enumerate() {
            if ids.len() < 2 {
                return Err(Error::Geometry(format!("junction {jid} has fewer than two segments")));
            }
            let mut members = Vec::with_capacity(ids.len());
            for id in ids {
                let seg = segments
                    .get(id)
                    .ok_or_else(|| Error::Geometry(format!("junction {jid} references missing segment {id}")))?;
                let site = locate(seg, point, tol).ok_or_else(|| {
                    Error::Geometry(format!(
                        "junction {jid} at {point:?} is not on segment {id} (distance {:.3e})",
                        seg.project(point).1
                    ))
                })?;
                if members.iter().any(|&(m, s)| m == id && s == site) {
                    continue;
                }
                members.push((id, site));
            }
            records.push(Junction { point, members });
        }
        for (jid, j) in records.iter().enumerate() {
            for &(id, site) in &j.members {
                if let Site::End(e) = site {
                    segments[id].bc[e.index()] = EndpointBc::Junction(jid);
                }
            }
        }
        for (i, seg) in segments.iter_mut().enumerate() {
            for bc in &mut seg.bc {
                if let EndpointBc::Junction(jid) = *bc {
                    let listed = records
                        .get(jid)
                        .is_some_and(|j| j.members.iter().any(|&(m, s)| m == i && matches!(s, Site::End(_))));
                    if !listed {
                        return Err(Error::Geometry(format!(
                            "segment {i} declares junction {jid} which does not list it"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            segments,
            junctions: records,
            tol,
        })
    }

    /// Infers junctions from coincident endpoints.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidArgument("network has no segments".into()));
        }
        let tol = network_tolerance(&segments);
        let mut groups: Vec<(Point3, Vec<usize>)> = Vec::new();
        for (i, seg) in segments.iter().enumerate() {
            for p in [seg.a, seg.b] {
                match groups.iter_mut().find(|(q, _)| dist3(*q, p) <= tol) {
                    Some((_, ids)) => ids.push(i),
                    None => groups.push((p, vec![i])),
                }
            }
        }
        let junctions = groups.into_iter().filter(|(_, ids)| ids.len() >= 2).collect();
        Self::new(segments, junctions)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, i: usize) -> &Segment {
        &self.segments[i]
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// True when every junction member is a segment endpoint.
    pub fn is_split(&self) -> bool {
        self.junctions
            .iter()
            .all(|j| j.members.iter().all(|(_, s)| matches!(s, Site::End(_))))
    }

    /// Applies `f` to every segment; geometry and junction structure must be
    /// left unchanged.
    pub fn map_segments(mut self, mut f: impl FnMut(usize, &mut Segment)) -> Result<Self> {
        let before: Vec<_> = self.segments.iter().map(|s| (s.a, s.b)).collect();
        for (i, s) in self.segments.iter_mut().enumerate() {
            let bc = s.bc;
            f(i, s);
            for (k, new) in s.bc.iter_mut().enumerate() {
                // Junction endpoints stay junctions.
                if matches!(bc[k], EndpointBc::Junction(_)) {
                    *new = bc[k];
                } else if matches!(new, EndpointBc::Junction(_)) {
                    return Err(Error::InvalidArgument(format!(
                        "segment {i}: cannot attach a junction through map_segments"
                    )));
                }
            }
            s.validate(i)?;
        }
        let moved = before
            .iter()
            .zip(&self.segments)
            .any(|(&(a, b), s)| a != s.a || b != s.b);
        if moved {
            return Err(Error::InvalidArgument("map_segments must not move segment endpoints".into()));
        }
        Ok(self)
    }
}

fn network_tolerance(segments: &[Segment]) -> f64 {
    let pts: Vec<Point3> = segments.iter().flat_map(|s| [s.a, s.b]).collect();
    let (lo, hi) = bounding_box(&pts);
    1e-12 * dist3(lo, hi).max(f64::MIN_POSITIVE)
}

fn locate(seg: &Segment, p: Point3, tol: f64) -> Option<Site> {
    if dist3(seg.a, p) <= tol {
        return Some(Site::End(Endpoint::A));
    }
    if dist3(seg.b, p) <= tol {
        return Some(Site::End(Endpoint::B));
    }
    let (s, d) = seg.project(p);
    (d <= tol).then_some(Site::Interior(s))
}

/// Splits segments at interior junction points so that every junction point
/// is an endpoint of each incident piece. Children inherit coefficients with
/// their arclength shifted to the parent's parametrization.
pub fn split_at_junctions(network: &SegmentNetwork) -> Result<SegmentNetwork> {
    let n = network.segments.len();
    // Per original segment: interior cut arclengths with their junction id.
    let mut cuts: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    for (jid, j) in network.junctions.iter().enumerate() {
        for &(id, site) in &j.members {
            if let Site::Interior(s) = site {
                cuts[id].push((s, jid));
            }
        }
    }

    let mut pieces: Vec<Segment> = Vec::new();
    // first and last piece index of every original segment
    let mut span: Vec<(usize, usize)> = Vec::with_capacity(n);
    let mut members: Vec<Vec<(usize, Site)>> = vec![Vec::new(); network.junctions.len()];

    for (id, seg) in network.segments.iter().enumerate() {
        let c = &mut cuts[id];
        c.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in c.windows(2) {
            if w[1].0 - w[0].0 <= network.tol {
                return Err(Error::Geometry(format!(
                    "segment {id}: junctions {} and {} coincide",
                    w[0].1, w[1].1
                )));
            }
        }
        let first = pieces.len();
        let mut start = 0.0;
        let mut start_point = seg.a;
        let mut start_bc = seg.bc[0];
        for &(s, jid) in c.iter() {
            let end_point = network.junctions[jid].point;
            pieces.push(piece(seg, start, start_point, end_point, start_bc, EndpointBc::Junction(jid)));
            members[jid].push((pieces.len() - 1, Site::End(Endpoint::B)));
            members[jid].push((pieces.len(), Site::End(Endpoint::A)));
            start = s;
            start_point = end_point;
            start_bc = EndpointBc::Junction(jid);
        }
        pieces.push(piece(seg, start, start_point, seg.b, start_bc, seg.bc[1]));
        span.push((first, pieces.len() - 1));
    }

    for (jid, j) in network.junctions.iter().enumerate() {
        for &(id, site) in &j.members {
            match site {
                Site::End(Endpoint::A) => members[jid].push((span[id].0, site)),
                Site::End(Endpoint::B) => members[jid].push((span[id].1, site)),
                Site::Interior(_) => {}
            }
        }
        members[jid].sort_by_key(|&(id, site)| (id, site_rank(site)));
    }

    let junctions = network
        .junctions
        .iter()
        .zip(members)
        .map(|(j, members)| Junction { point: j.point, members })
        .collect();
    Ok(SegmentNetwork {
        segments: pieces,
        junctions,
        tol: network.tol,
    })
}

fn piece(
    seg: &Segment,
    s0: f64,
    a: Point3,
    b: Point3,
    bc_a: EndpointBc,
    bc_b: EndpointBc,
) -> Segment {
    Segment {
        a,
        b,
        radius: seg.radius,
        beta: seg.beta,
        k_tilde: seg.k_tilde.shifted(s0),
        gbar: seg.gbar.shifted(s0),
        bc: [bc_a, bc_b],
        parent: seg.parent,
        parent_offset: seg.parent_offset + s0,
    }
}

fn site_rank(site: Site) -> usize {
    match site {
        Site::End(Endpoint::A) => 0,
        Site::End(Endpoint::B) => 1,
        Site::Interior(_) => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(a: Point3, b: Point3) -> Segment {
        Segment::new(a, b, 0.01, 1.0)
    }

    #[test]
    fn crossing_at_midpoints_gives_four_pieces() {
        let net = SegmentNetwork::new(
            vec![seg([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]), seg([0.0, -1.0, 0.0], [0.0, 1.0, 0.0])],
            vec![([0.0; 3], vec![0, 1])],
        )
        .unwrap();
        assert!(!net.is_split());
        let split = split_at_junctions(&net).unwrap();
        assert!(split.is_split());
        assert_eq!(split.len(), 4);
        assert_eq!(split.junctions().len(), 1);
        assert_eq!(split.junctions()[0].members.len(), 4);
        assert!((split.total_length() - net.total_length()).abs() < 1e-12 * net.total_length());
        for (id, site) in &split.junctions()[0].members {
            let Site::End(e) = site else { panic!("interior site after split") };
            assert!(dist3(split.segment(*id).endpoint(*e), [0.0; 3]) < 1e-15);
            assert_eq!(split.segment(*id).bc[e.index()], EndpointBc::Junction(0));
        }
    }

    #[test]
    fn no_junctions_is_identity() {
        let net = SegmentNetwork::new(vec![seg([0.0; 3], [1.0, 0.0, 0.0])], vec![]).unwrap();
        let split = split_at_junctions(&net).unwrap();
        assert_eq!(split.len(), 1);
        assert_eq!(split.segment(0).a, net.segment(0).a);
        assert_eq!(split.segment(0).b, net.segment(0).b);
    }

    #[test]
    fn star_of_three_is_unchanged() {
        let c = [0.5, 0.5, 0.5];
        let net = SegmentNetwork::from_segments(vec![
            seg([0.0, 0.0, 0.0], c),
            seg(c, [1.0, 0.5, 0.5]),
            seg([0.5, 1.0, 0.5], c),
        ])
        .unwrap();
        let split = split_at_junctions(&net).unwrap();
        assert_eq!(split.len(), 3);
        assert_eq!(split.junctions().len(), 1);
        assert_eq!(split.junctions()[0].members.len(), 3);
    }

    #[test]
    fn children_inherit_shifted_coefficients() {
        let parent = seg([0.0; 3], [2.0, 0.0, 0.0]).with_k_tilde(ScalarFn::new(|s| s));
        let net = SegmentNetwork::new(
            vec![parent, seg([1.0, 0.0, 0.0], [1.0, 1.0, 0.0])],
            vec![([1.0, 0.0, 0.0], vec![0, 1])],
        )
        .unwrap();
        let split = split_at_junctions(&net).unwrap();
        assert_eq!(split.len(), 3);
        assert_eq!(split.segment(1).k_tilde.eval(0.25), 1.25);
        assert_eq!(split.segment(1).parent_offset, 1.0);
    }

    #[test]
    fn off_segment_junction_is_rejected() {
        let err = SegmentNetwork::new(
            vec![seg([0.0; 3], [1.0, 0.0, 0.0]), seg([0.0; 3], [0.0, 1.0, 0.0])],
            vec![([0.5, 0.5, 0.0], vec![0, 1])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }
}
