use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functions::Point3;

use super::mesh::{add3, norm3, scale3};
use super::network::{EndpointBc, Segment, SegmentNetwork};

const MAX_TRIES: usize = 1000;

/// Seeded tree-like network inside the box `[lo, hi]`.
///
/// Segment 0 and every later "inlet" start on the face `z = lo[2]` with a
/// Dirichlet(0) condition there; the other segments branch off interior
/// points of earlier ones, creating junctions. All other points lie strictly
/// inside the box. `count` is the number of segments before splitting.
/// Coefficients are placeholders (R = 0.01, β = 1, K̃ = 1, ḡ = 0).
pub fn generate_random_network(count: usize, lo: Point3, hi: Point3, min_length: f64, seed: u64) -> Result<SegmentNetwork> {
    if count == 0 {
        return Err(Error::InvalidArgument("random network needs count ≥ 1".into()));
    }
    let side = (0..3).map(|k| hi[k] - lo[k]).fold(f64::INFINITY, f64::min);
    if !(side > 0.0) || !(min_length > 0.0) {
        return Err(Error::InvalidArgument("random network needs a non-empty box and min_length > 0".into()));
    }
    let margin = 0.05 * side;
    let max_length = 0.5 * side;
    if min_length > max_length - margin {
        return Err(Error::InvalidArgument(format!(
            "box of side {side} is too small for segments of length ≥ {min_length}"
        )));
    }
    let inside = |p: Point3| (0..3).all(|k| p[k] > lo[k] + margin && p[k] < hi[k] - margin);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments: Vec<Segment> = Vec::with_capacity(count);
    // Interior junction arclengths already used on each segment.
    let mut cuts: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut junctions: Vec<(Point3, Vec<usize>)> = Vec::new();

    for i in 0..count {
        let inlet = i == 0 || rng.random_bool(0.2);
        let mut placed = false;
        for _ in 0..MAX_TRIES {
            let length = rng.random_range(min_length..=max_length);
            let (start, parent) = if inlet {
                let x = rng.random_range(lo[0] + margin..hi[0] - margin);
                let y = rng.random_range(lo[1] + margin..hi[1] - margin);
                ([x, y, lo[2]], None)
            } else {
                let p = rng.random_range(0..segments.len());
                let len = segments[p].length();
                let s = rng.random_range(0.2..0.8) * len;
                if cuts[p].iter().any(|&c| (c - s).abs() < 0.1 * len) {
                    continue;
                }
                (segments[p].point(s), Some((p, s)))
            };
            let dir = random_direction(&mut rng, inlet);
            let end = add3(start, scale3(dir, length));
            if !inside(end) {
                continue;
            }
            let mut seg = Segment::new(start, end, 0.01, 1.0);
            if inlet {
                seg = seg.with_bc(EndpointBc::Dirichlet(0.0), EndpointBc::NeumannZero);
            }
            segments.push(seg);
            cuts.push(Vec::new());
            if let Some((p, s)) = parent {
                cuts[p].push(s);
                junctions.push((start, vec![p, i]));
            }
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::InvalidArgument(format!(
                "could not place segment {i} after {MAX_TRIES} attempts; enlarge the box or reduce min_length"
            )));
        }
    }
    SegmentNetwork::new(segments, junctions)
}

fn random_direction(rng: &mut ChaCha8Rng, upward: bool) -> Point3 {
    loop {
        let v: Point3 = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = norm3(v);
        if !(0.1..=1.0).contains(&n) {
            continue;
        }
        let d = scale3(v, 1.0 / n);
        if !upward || d[2] >= 0.5 {
            return d;
        }
    }
}
