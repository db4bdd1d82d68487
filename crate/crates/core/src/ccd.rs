//! Conservative advancement along linear trajectories.

use rayon::prelude::*;

use crate::contact::{candidate_pairs, edge_edge_distance, point_triangle_distance, PairKey, PairKind, Surface};
use crate::Vec3;

/// ACCD slack used when none is configured.
pub const DEFAULT_SLACK: f64 = 0.1;
/// Factor applied to the minimum time of impact when it is below one.
pub const DEFAULT_FACTOR: f64 = 0.9;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryKind {
    PointPoint,
    PointTriangle,
    EdgeEdge,
}

/// Primitive pair moving linearly from `start` to `start + displacement`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToiQuery {
    pub kind: QueryKind,
    /// `[p, q, _, _]`, `[p, t0, t1, t2]` or `[a0, a1, b0, b1]`.
    pub start: [Vec3; 4],
    pub displacement: [Vec3; 4],
    pub slack: f64,
}

impl ToiQuery {
    fn distance(&self, x: &[Vec3; 4]) -> f64 {
        match self.kind {
            QueryKind::PointPoint => (x[0] - x[1]).norm(),
            QueryKind::PointTriangle => point_triangle_distance(&x[0], &x[1], &x[2], &x[3])
                .map(|r| r.d2.sqrt())
                .unwrap_or(0.0),
            QueryKind::EdgeEdge => edge_edge_distance(&x[0], &x[1], &x[2], &x[3])
                .map(|r| r.d2.sqrt())
                .unwrap_or(0.0),
        }
    }

    fn groups(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        match self.kind {
            QueryKind::PointPoint => (0..1, 1..2),
            QueryKind::PointTriangle => (0..1, 1..4),
            QueryKind::EdgeEdge => (0..2, 2..4),
        }
    }
}

/// Largest fraction of the step over which the pair provably keeps a
/// distance of at least `slack * d0`; 1 when the full step is safe.
pub fn accd_toi(query: &ToiQuery) -> f64 {
    let (g1, g2) = query.groups();
    let used = g2.end;
    let mean = query.displacement[..used].iter().sum::<Vec3>() / used as f64;
    let mut p = query.displacement;
    for v in &mut p[..used] {
        *v -= mean;
    }
    let max_norm = |r: std::ops::Range<usize>| p[r].iter().map(|v| v.norm()).fold(0.0, f64::max);
    let lp = max_norm(g1) + max_norm(g2);
    if lp == 0.0 {
        return 1.0;
    }
    let s = query.slack;
    let mut x = query.start;
    let d0 = query.distance(&x);
    if lp <= (1.0 - s) * d0 {
        return 1.0;
    }
    let gap = s * d0;
    let mut t = 0.0;
    let mut tl = (1.0 - s) * d0 / lp;
    for _ in 0..MAX_ITERATIONS {
        for i in 0..used {
            x[i] += p[i] * tl;
        }
        let d = query.distance(&x);
        if t > 0.0 && d < gap {
            break;
        }
        t += tl;
        if t > 1.0 {
            return 1.0;
        }
        tl = 0.9 * d / lp;
    }
    t
}

/// Safe step fraction for the surface moving from `x` by `p`. All
/// broad-phase candidates are tested; the minimum time of impact is scaled by
/// `factor` whenever it is below one.
pub fn max_step(x: &[Vec3], p: &[Vec3], surface: &Surface, slack: f64, factor: f64) -> f64 {
    let end: Vec<Vec3> = x.iter().zip(p).map(|(a, b)| a + b).collect();
    let keys = candidate_pairs(x, Some(&end), surface, 0.0);
    let toi = keys
        .par_iter()
        .map(|k| accd_toi(&query_for(k, x, p, slack)))
        .reduce(|| 1.0, f64::min);
    if toi >= 1.0 {
        1.0
    } else {
        factor * toi
    }
}

pub fn query_for(key: &PairKey, x: &[Vec3], p: &[Vec3], slack: f64) -> ToiQuery {
    ToiQuery {
        kind: match key.kind {
            PairKind::PointTriangle => QueryKind::PointTriangle,
            PairKind::EdgeEdge => QueryKind::EdgeEdge,
        },
        start: key.verts.map(|v| x[v]),
        displacement: key.verts.map(|v| p[v]),
        slack,
    }
}
