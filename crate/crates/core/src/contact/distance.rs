//! Unsigned point-triangle and edge-edge distances with region tags and
//! derivatives of the squared distance.
//!
//! Every region is an affine family of difference vectors
//! `r(theta) = sum_i w_i(theta) x_i` over the four stencil points with
//! `w(theta) = c + sum_a theta_a e_a`, and the squared distance is
//! `s = min_theta |r|^2` over the region. The gradient follows from the
//! envelope theorem and the Hessian from the Schur complement of the
//! parameter block.

use nalgebra::{Matrix2, Vector2};

use crate::energy::{Mat12, Vec12};
use crate::error::{Error, Result};
use crate::Vec3;

/// Closest-feature region of a point-triangle pair. Edge `k` joins `t_k` and
/// `t_{(k+1) mod 3}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PtRegion {
    Interior,
    Edge(u8),
    Vertex(u8),
}

/// Closest-feature region of an edge-edge pair.
///
/// `EndpointEdge(k)`: endpoint `[a0, a1, b0, b1][k]` against the other edge.
/// `EndpointEndpoint(k)`: `(a_{k / 2}, b_{k % 2})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EeRegion {
    Interior,
    EndpointEdge(u8),
    EndpointEndpoint(u8),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtDistance {
    pub d2: f64,
    pub region: PtRegion,
    /// Closest point on the triangle is `sum_i bary_i t_i`.
    pub bary: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EeDistance {
    pub d2: f64,
    pub region: EeRegion,
    /// Closest points `a0 + s (a1 - a0)` and `b0 + t (b1 - b0)`.
    pub s: f64,
    pub t: f64,
}

/// Relative threshold on `|a|^2 |b|^2 - (a.b)^2` below which two edges are
/// treated as parallel.
const PARALLEL: f64 = 1e-10;

/// Returns the clamped parameter of the closest point on segment `a b` to `p`.
fn segment_parameter(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let e = b - a;
    ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0)
}

pub fn point_triangle_distance(p: &Vec3, t0: &Vec3, t1: &Vec3, t2: &Vec3) -> Result<PtDistance> {
    let e1 = t1 - t0;
    let e2 = t2 - t0;
    let n = e1.cross(&e2);
    if n.norm_squared() <= f64::EPSILON * e1.norm_squared() * e2.norm_squared() {
        return Err(Error::DegenerateTriangle);
    }
    let m = Matrix2::new(e1.dot(&e1), e1.dot(&e2), e1.dot(&e2), e2.dot(&e2));
    let rhs = Vector2::new(e1.dot(&(p - t0)), e2.dot(&(p - t0)));
    if let Some(bg) = m.lu().solve(&rhs) {
        let (beta, gamma) = (bg[0], bg[1]);
        if beta >= 0.0 && gamma >= 0.0 && beta + gamma <= 1.0 {
            let q = t0 + e1 * beta + e2 * gamma;
            return Ok(PtDistance {
                d2: (p - q).norm_squared(),
                region: PtRegion::Interior,
                bary: [1.0 - beta - gamma, beta, gamma],
            });
        }
    }
    let t = [t0, t1, t2];
    let mut best: Option<PtDistance> = None;
    for k in 0..3 {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let theta = segment_parameter(p, a, b);
        let q = a + (b - a) * theta;
        let d2 = (p - q).norm_squared();
        let mut bary = [0.0; 3];
        let region = if theta <= 0.0 {
            bary[k] = 1.0;
            PtRegion::Vertex(k as u8)
        } else if theta >= 1.0 {
            bary[(k + 1) % 3] = 1.0;
            PtRegion::Vertex(((k + 1) % 3) as u8)
        } else {
            bary[k] = 1.0 - theta;
            bary[(k + 1) % 3] = theta;
            PtRegion::Edge(k as u8)
        };
        if best.is_none_or(|b| d2 < b.d2) {
            best = Some(PtDistance { d2, region, bary });
        }
    }
    Ok(best.expect("three edges"))
}

pub fn edge_edge_distance(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> Result<EeDistance> {
    let a = a1 - a0;
    let b = b1 - b0;
    let (aa, bb, ab) = (a.norm_squared(), b.norm_squared(), a.dot(&b));
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::DegenerateEdge);
    }
    let w = a0 - b0;
    let det = aa * bb - ab * ab;
    if det > PARALLEL * aa * bb {
        let (aw, bw) = (a.dot(&w), b.dot(&w));
        let s = (ab * bw - bb * aw) / det;
        let t = (aa * bw - ab * aw) / det;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) {
            let d2 = (a0 + a * s - b0 - b * t).norm_squared();
            return Ok(EeDistance {
                d2,
                region: EeRegion::Interior,
                s,
                t,
            });
        }
    }
    let ends = [a0, a1, b0, b1];
    let mut best: Option<EeDistance> = None;
    for k in 0..4 {
        let p = ends[k];
        let (q0, q1) = if k < 2 { (b0, b1) } else { (a0, a1) };
        let theta = segment_parameter(p, q0, q1);
        let d2 = (p - (q0 + (q1 - q0) * theta)).norm_squared();
        let fixed = (k % 2) as f64;
        let (s, t) = if k < 2 { (fixed, theta) } else { (theta, fixed) };
        let region = if theta > 0.0 && theta < 1.0 {
            EeRegion::EndpointEdge(k as u8)
        } else {
            let (ia, ib) = (s as u8, t as u8);
            EeRegion::EndpointEndpoint(2 * ia + ib)
        };
        if best.is_none_or(|bst| d2 < bst.d2) {
            best = Some(EeDistance { d2, region, s, t });
        }
    }
    Ok(best.expect("four endpoints"))
}

/// Affine family `w(theta) = c + sum_a theta_a e_a` at its minimizing
/// parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness {
    pub c: [f64; 4],
    pub e: [[f64; 4]; 2],
    pub n_params: usize,
    pub theta: [f64; 2],
}

impl Witness {
    /// Stencil coefficients at the minimizer; the difference vector is
    /// `sum_i w_i x_i`.
    pub fn weights(&self) -> [f64; 4] {
        let mut w = self.c;
        for a in 0..self.n_params {
            for i in 0..4 {
                w[i] += self.theta[a] * self.e[a][i];
            }
        }
        w
    }

    /// Stencil `[p, t0, t1, t2]`.
    pub fn point_triangle(region: PtRegion, bary: [f64; 3]) -> Self {
        let mut c = [1.0, 0.0, 0.0, 0.0];
        let mut e = [[0.0; 4]; 2];
        match region {
            PtRegion::Interior => {
                c[1] = -1.0;
                e[0] = [0.0, 1.0, -1.0, 0.0];
                e[1] = [0.0, 1.0, 0.0, -1.0];
                Witness {
                    c,
                    e,
                    n_params: 2,
                    theta: [bary[1], bary[2]],
                }
            }
            PtRegion::Edge(k) => {
                let (i, j) = (k as usize, (k as usize + 1) % 3);
                c[1 + i] = -1.0;
                e[0][1 + i] = 1.0;
                e[0][1 + j] = -1.0;
                Witness {
                    c,
                    e,
                    n_params: 1,
                    theta: [bary[j], 0.0],
                }
            }
            PtRegion::Vertex(k) => {
                c[1 + k as usize] = -1.0;
                Witness {
                    c,
                    e,
                    n_params: 0,
                    theta: [0.0; 2],
                }
            }
        }
    }

    /// Stencil `[a0, a1, b0, b1]`.
    pub fn edge_edge(region: EeRegion, s: f64, t: f64) -> Self {
        let mut e = [[0.0; 4]; 2];
        match region {
            EeRegion::Interior => {
                e[0] = [-1.0, 1.0, 0.0, 0.0];
                e[1] = [0.0, 0.0, 1.0, -1.0];
                Witness {
                    c: [1.0, 0.0, -1.0, 0.0],
                    e,
                    n_params: 2,
                    theta: [s, t],
                }
            }
            EeRegion::EndpointEdge(k) => {
                let k = k as usize;
                let mut c = [0.0; 4];
                if k < 2 {
                    c[k] = 1.0;
                    c[2] = -1.0;
                    e[0] = [0.0, 0.0, 1.0, -1.0];
                    Witness {
                        c,
                        e,
                        n_params: 1,
                        theta: [t, 0.0],
                    }
                } else {
                    c[0] = 1.0;
                    c[k] = -1.0;
                    e[0] = [-1.0, 1.0, 0.0, 0.0];
                    Witness {
                        c,
                        e,
                        n_params: 1,
                        theta: [s, 0.0],
                    }
                }
            }
            EeRegion::EndpointEndpoint(k) => {
                let mut c = [0.0; 4];
                c[(k / 2) as usize] = 1.0;
                c[2 + (k % 2) as usize] = -1.0;
                Witness {
                    c,
                    e,
                    n_params: 0,
                    theta: [0.0; 2],
                }
            }
        }
    }

    /// `(s, ds/dx, d^2 s/dx^2)` for the squared distance over the stencil.
    pub fn squared_distance_derivatives(&self, x: &[Vec3; 4]) -> (f64, Vec12, Mat12) {
        let w = self.weights();
        let r: Vec3 = (0..4).fold(Vec3::zeros(), |acc, i| acc + x[i] * w[i]);
        let mut grad = Vec12::zeros();
        let mut hess = Mat12::zeros();
        for i in 0..4 {
            grad.fixed_rows_mut::<3>(3 * i).copy_from(&(r * (2.0 * w[i])));
            for j in 0..4 {
                let v = 2.0 * w[i] * w[j];
                for d in 0..3 {
                    hess[(3 * i + d, 3 * j + d)] = v;
                }
            }
        }
        let k = self.n_params;
        if k > 0 {
            let t: Vec<Vec3> = (0..k)
                .map(|a| (0..4).fold(Vec3::zeros(), |acc, i| acc + x[i] * self.e[a][i]))
                .collect();
            let mut h_tt = Matrix2::identity();
            for a in 0..k {
                for b in 0..k {
                    h_tt[(a, b)] = 2.0 * t[a].dot(&t[b]);
                }
            }
            let h_tt_inv = if k == 2 {
                h_tt.try_inverse().unwrap_or_else(Matrix2::zeros)
            } else if h_tt[(0, 0)] > 0.0 {
                Matrix2::new(1.0 / h_tt[(0, 0)], 0.0, 0.0, 0.0)
            } else {
                Matrix2::zeros()
            };
            // mixed block: column a is d/dtheta_a of the gradient
            let mut h_xt = nalgebra::SMatrix::<f64, 12, 2>::zeros();
            for a in 0..k {
                for i in 0..4 {
                    let col = r * (2.0 * self.e[a][i]) + t[a] * (2.0 * w[i]);
                    h_xt.fixed_view_mut::<3, 1>(3 * i, a).copy_from(&col);
                }
            }
            hess -= h_xt * h_tt_inv * h_xt.transpose();
        }
        (r.norm_squared(), grad, hess)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tri() -> [Vec3; 3] {
        [Vec3::zeros(), Vec3::x(), Vec3::y()]
    }

    #[test]
    fn point_above_interior() {
        let [a, b, c] = tri();
        let d = point_triangle_distance(&Vec3::new(0.2, 0.2, 0.3), &a, &b, &c).unwrap();
        assert_relative_eq!(d.d2, 0.09, epsilon = 1e-15);
        assert_eq!(d.region, PtRegion::Interior);
        assert_relative_eq!(d.bary[1], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn point_in_vertex_and_edge_cones() {
        let [a, b, c] = tri();
        let p = Vec3::new(-1.0, -2.0, 0.5);
        let d = point_triangle_distance(&p, &a, &b, &c).unwrap();
        assert_eq!(d.region, PtRegion::Vertex(0));
        assert_relative_eq!(d.d2, p.norm_squared(), epsilon = 1e-15);
        let d = point_triangle_distance(&Vec3::new(0.5, -1.0, 0.0), &a, &b, &c).unwrap();
        assert_eq!(d.region, PtRegion::Edge(0));
        assert_relative_eq!(d.d2, 1.0, epsilon = 1e-15);
        let d = point_triangle_distance(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c).unwrap();
        assert_eq!(d.region, PtRegion::Edge(1));
        assert_relative_eq!(d.d2, 0.5, epsilon = 1e-15);
        assert!(point_triangle_distance(&p, &a, &b, &(b * 2.0)).is_err());
    }

    #[test]
    fn skew_and_parallel_edges() {
        let d = edge_edge_distance(
            &Vec3::new(-0.5, 0.0, 0.0),
            &Vec3::new(0.5, 0.0, 0.0),
            &Vec3::new(0.0, -0.5, 0.5),
            &Vec3::new(0.0, 0.5, 0.5),
        )
        .unwrap();
        assert_eq!(d.region, EeRegion::Interior);
        assert_relative_eq!(d.d2, 0.25, epsilon = 1e-15);
        // collinear, offset along the line
        let d = edge_edge_distance(
            &Vec3::zeros(),
            &Vec3::x(),
            &Vec3::new(3.0, 0.0, 0.0),
            &Vec3::new(2.0, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(d.region, EeRegion::EndpointEndpoint(3));
        assert_relative_eq!(d.d2, 1.0, epsilon = 1e-15);
        assert!(edge_edge_distance(&Vec3::x(), &Vec3::x(), &Vec3::zeros(), &Vec3::y()).is_err());
    }

    #[test]
    fn witness_reproduces_distance() {
        let x = [
            Vec3::new(0.3, 0.1, 0.4),
            Vec3::zeros(),
            Vec3::x(),
            Vec3::y(),
        ];
        let d = point_triangle_distance(&x[0], &x[1], &x[2], &x[3]).unwrap();
        let w = Witness::point_triangle(d.region, d.bary);
        let (s, _, _) = w.squared_distance_derivatives(&x);
        assert_relative_eq!(s, d.d2, epsilon = 1e-15);
    }
}
