//! Exact triangle-triangle intersection tests over broad-phase candidates.

use rayon::prelude::*;
use robust::{orient2d, orient3d, Coord, Coord3D};

use crate::contact::broad::{overlapping, Aabb};
use crate::contact::Surface;
use crate::Vec3;

fn c3(p: &Vec3) -> Coord3D<f64> {
    Coord3D {
        x: p.x,
        y: p.y,
        z: p.z,
    }
}

fn orient(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    orient3d(c3(a), c3(b), c3(c), c3(d))
}

fn project(p: &Vec3, drop: usize) -> Coord<f64> {
    let (i, j) = match drop {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    Coord { x: p[i], y: p[j] }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Closed 2D segments intersect.
fn segments_2d(p: Coord<f64>, q: Coord<f64>, a: Coord<f64>, b: Coord<f64>) -> bool {
    let d1 = sign(orient2d(a, b, p));
    let d2 = sign(orient2d(a, b, q));
    let d3 = sign(orient2d(p, q, a));
    let d4 = sign(orient2d(p, q, b));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    let on = |s: Coord<f64>, e: Coord<f64>, r: Coord<f64>| {
        r.x >= s.x.min(e.x) && r.x <= s.x.max(e.x) && r.y >= s.y.min(e.y) && r.y <= s.y.max(e.y)
    };
    (d1 == 0 && on(a, b, p)) || (d2 == 0 && on(a, b, q)) || (d3 == 0 && on(p, q, a)) || (d4 == 0 && on(p, q, b))
}

fn point_in_triangle_2d(p: Coord<f64>, t: [Coord<f64>; 3]) -> bool {
    let s = [0, 1, 2].map(|k| sign(orient2d(t[k], t[(k + 1) % 3], p)));
    !(s.contains(&1) && s.contains(&-1))
}

fn dominant_axis(t: &[Vec3; 3]) -> usize {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let a = n.abs();
    if a.x >= a.y && a.x >= a.z {
        0
    } else if a.y >= a.z {
        1
    } else {
        2
    }
}

/// Segment and triangle lying in one plane, tested in 2D.
fn coplanar_segment_triangle(p: &Vec3, q: &Vec3, t: &[Vec3; 3]) -> bool {
    let drop = dominant_axis(t);
    let tt = t.map(|v| project(&v, drop));
    let (pp, qq) = (project(p, drop), project(q, drop));
    if point_in_triangle_2d(pp, tt) || point_in_triangle_2d(qq, tt) {
        return true;
    }
    (0..3).any(|k| segments_2d(pp, qq, tt[k], tt[(k + 1) % 3]))
}

/// The closed segment `p q` meets the closed triangle `t`.
pub fn segment_triangle(p: &Vec3, q: &Vec3, t: &[Vec3; 3]) -> bool {
    let o1 = sign(orient(&t[0], &t[1], &t[2], p));
    let o2 = sign(orient(&t[0], &t[1], &t[2], q));
    if o1 == 0 && o2 == 0 {
        return coplanar_segment_triangle(p, q, t);
    }
    if o1 * o2 > 0 {
        return false;
    }
    let s = [0, 1, 2].map(|k| sign(orient(p, q, &t[k], &t[(k + 1) % 3])));
    !(s.contains(&1) && s.contains(&-1))
}

/// Closed triangles intersect (touching counts).
pub fn triangles_intersect(a: &[Vec3; 3], b: &[Vec3; 3]) -> bool {
    (0..3).any(|k| segment_triangle(&a[k], &a[(k + 1) % 3], b))
        || (0..3).any(|k| segment_triangle(&b[k], &b[(k + 1) % 3], a))
}

/// Intersecting triangle pairs `(i, j)`, `i < j`, excluding pairs that share
/// a vertex and intra-body pairs of bodies without self contact.
pub fn audit_intersections(x: &[Vec3], surface: &Surface) -> Vec<(usize, usize)> {
    let boxes: Vec<Aabb> = surface
        .triangles
        .iter()
        .map(|t| Aabb::from_points(t.iter().map(|&v| &x[v])))
        .collect();
    let candidates: Vec<(usize, usize)> = overlapping(&boxes, boxes.clone(), 0.0)
        .into_iter()
        .filter(|&(i, j)| i < j)
        .collect();
    candidates
        .into_par_iter()
        .filter(|&(i, j)| {
            let (ta, tb) = (surface.triangles[i], surface.triangles[j]);
            if ta.iter().any(|v| tb.contains(v)) {
                return false;
            }
            let body = surface.vertex_body[ta[0]];
            if surface.vertex_body[tb[0]] == body && !surface.self_contact[body] {
                return false;
            }
            triangles_intersect(&ta.map(|v| x[v]), &tb.map(|v| x[v]))
        })
        .collect()
}
