//! Proximity pairs on the collision surface, the barrier energy, lagged
//! friction, and their derivatives with respect to surface positions.

pub mod barrier;
pub mod broad;
pub mod distance;

use nalgebra::{Matrix2, Matrix3x2, SymmetricEigen};
use rayon::prelude::*;

pub use self::barrier::{barrier, barrier_derivative, barrier_second_derivative, f0, f1};
use self::broad::{overlapping, Aabb};
pub use self::distance::{
    edge_edge_distance, point_triangle_distance, EeDistance, EeRegion, PtDistance, PtRegion,
    Witness,
};
use crate::energy::{Mat12, Vec12};
use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactParams {
    /// Barrier stiffness (kg/s^2).
    pub kappa: f64,
    /// Activation distance (m).
    pub dhat: f64,
    /// Static friction velocity threshold (m/s).
    pub eps_v: f64,
    pub mu: f64,
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        if self.kappa > 0.0 && self.dhat > 0.0 && self.eps_v > 0.0 && self.mu >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!("invalid contact parameters {self:?}")))
        }
    }
}

/// Global collision surface: every body's triangles and edges indexed into
/// one concatenated vertex array.
#[derive(Clone, Debug, Default)]
pub struct Surface {
    pub num_vertices: usize,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub vertex_body: Vec<usize>,
    /// Per body: whether pairs within the body are considered.
    pub self_contact: Vec<bool>,
    /// Per vertex: the vertex is driven entirely by scripted DoFs.
    pub kinematic: Vec<bool>,
}

impl Surface {
    fn admissible(&self, verts: &[usize]) -> bool {
        let body = self.vertex_body[verts[0]];
        if verts.iter().all(|&v| self.vertex_body[v] == body) && !self.self_contact[body] {
            return false;
        }
        !verts.iter().all(|&v| self.kinematic[v])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairKind {
    PointTriangle,
    EdgeEdge,
}

/// Identity of a primitive pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub kind: PairKind,
    /// `(vertex, triangle)` or `(edge, edge)`.
    pub primitives: [usize; 2],
    /// Stencil `[p, t0, t1, t2]` or `[a0, a1, b0, b1]`.
    pub verts: [usize; 4],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactPair {
    pub key: PairKey,
    /// Unsigned distance (m).
    pub d: f64,
}

impl PairKey {
    pub fn stencil(&self, x: &[Vec3]) -> [Vec3; 4] {
        self.verts.map(|v| x[v])
    }

    /// Squared distance and the minimizing affine family.
    pub fn witness(&self, x: &[Vec3]) -> Result<(f64, Witness)> {
        let [a, b, c, d] = self.stencil(x);
        Ok(match self.kind {
            PairKind::PointTriangle => {
                let r = point_triangle_distance(&a, &b, &c, &d)?;
                (r.d2, Witness::point_triangle(r.region, r.bary))
            }
            PairKind::EdgeEdge => {
                let r = edge_edge_distance(&a, &b, &c, &d)?;
                (r.d2, Witness::edge_edge(r.region, r.s, r.t))
            }
        })
    }

    pub fn squared_distance(&self, x: &[Vec3]) -> Result<f64> {
        let [a, b, c, d] = self.stencil(x);
        Ok(match self.kind {
            PairKind::PointTriangle => point_triangle_distance(&a, &b, &c, &d)?.d2,
            PairKind::EdgeEdge => edge_edge_distance(&a, &b, &c, &d)?.d2,
        })
    }
}

/// Candidate pairs whose boxes, swept from `x0` to `x1` when given and grown
/// by `r`, overlap. Pairs sharing a vertex and inadmissible pairs are
/// dropped. Output is sorted.
pub fn candidate_pairs(x0: &[Vec3], x1: Option<&[Vec3]>, surface: &Surface, r: f64) -> Vec<PairKey> {
    let boxed = |vs: &[usize]| {
        let pts = vs.iter().map(|&v| &x0[v]);
        match x1 {
            Some(x1) => Aabb::from_points(pts.chain(vs.iter().map(|&v| &x1[v]))),
            None => Aabb::from_points(pts),
        }
    };
    let vertex_boxes: Vec<Aabb> = (0..surface.num_vertices)
        .map(|v| boxed(&[v]).inflate(r))
        .collect();
    let tri_boxes: Vec<Aabb> = surface.triangles.iter().map(|t| boxed(t)).collect();
    let edge_boxes: Vec<Aabb> = surface.edges.iter().map(|e| boxed(e)).collect();
    let grown: Vec<Aabb> = edge_boxes.iter().map(|b| b.inflate(r)).collect();

    let mut keys = Vec::new();
    for (v, ti) in overlapping(&vertex_boxes, tri_boxes, r) {
        let t = surface.triangles[ti];
        if t.contains(&v) {
            continue;
        }
        let verts = [v, t[0], t[1], t[2]];
        if surface.admissible(&verts) {
            keys.push(PairKey {
                kind: PairKind::PointTriangle,
                primitives: [v, ti],
                verts,
            });
        }
    }
    for (i, j) in overlapping(&grown, edge_boxes, r) {
        if i >= j {
            continue;
        }
        let (a, b) = (surface.edges[i], surface.edges[j]);
        if a.iter().any(|v| b.contains(v)) {
            continue;
        }
        let verts = [a[0], a[1], b[0], b[1]];
        if surface.admissible(&verts) {
            keys.push(PairKey {
                kind: PairKind::EdgeEdge,
                primitives: [i, j],
                verts,
            });
        }
    }
    keys
}

/// Every admissible point-triangle and edge-edge pair closer than
/// `dhat + margin`.
pub fn collect_pairs(x: &[Vec3], surface: &Surface, dhat: f64, margin: f64) -> Result<Vec<ContactPair>> {
    let r = dhat + margin;
    let keys = candidate_pairs(x, None, surface, r);
    let pairs: Vec<Option<ContactPair>> = keys
        .par_iter()
        .map(|key| {
            let d2 = key.squared_distance(x)?;
            Ok((d2 < r * r).then(|| ContactPair { key: *key, d: d2.sqrt() }))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().flatten().collect())
}

/// Gradient and Hessian of one pair's energy over its four stencil vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairDerivatives {
    pub verts: [usize; 4],
    pub energy: f64,
    pub grad: Vec12,
    pub hess: Mat12,
}

/// Clamps the negative eigenvalues of a symmetric matrix to zero.
pub fn project_psd(m: &Mat12) -> Mat12 {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.min() >= 0.0 {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * Mat12::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

/// `kappa b(d)` for one pair with derivatives chained through the squared
/// distance.
pub fn barrier_pair(x: &[Vec3], key: &PairKey, params: &ContactParams, project: bool) -> Result<PairDerivatives> {
    let (d2, witness) = key.witness(x)?;
    let d = d2.sqrt();
    if !(d > 0.0) {
        return Err(Error::NonpositiveDistance(d));
    }
    let mut out = PairDerivatives {
        verts: key.verts,
        energy: 0.0,
        grad: Vec12::zeros(),
        hess: Mat12::zeros(),
    };
    if d >= params.dhat {
        return Ok(out);
    }
    let (_, ds, dds) = witness.squared_distance_derivatives(&key.stencil(x));
    let b1 = barrier_derivative(d, params.dhat);
    let b2 = barrier_second_derivative(d, params.dhat);
    out.energy = params.kappa * barrier(d, params.dhat);
    out.grad = ds * (params.kappa * b1 / (2.0 * d));
    let outer = (b2 / (4.0 * d2) - b1 / (4.0 * d2 * d)) * params.kappa;
    out.hess = ds * ds.transpose() * outer + dds * (params.kappa * b1 / (2.0 * d));
    if project {
        out.hess = project_psd(&out.hess);
    }
    Ok(out)
}

/// `B = kappa sum_k b(d_k)` with per-pair derivatives.
pub fn barrier_energy_grad_hess(
    x: &[Vec3],
    pairs: &[ContactPair],
    params: &ContactParams,
    project: bool,
) -> Result<(f64, Vec<PairDerivatives>)> {
    let parts: Vec<PairDerivatives> = pairs
        .par_iter()
        .map(|p| barrier_pair(x, &p.key, params, project))
        .collect::<Result<_>>()?;
    let energy = parts.iter().map(|p| p.energy).sum();
    Ok((energy, parts))
}

/// Friction state for one pair, frozen over a time step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrictionDatum {
    pub key: PairKey,
    /// Lagged normal force magnitude (N).
    pub lambda: f64,
    /// Stencil coefficients of the relative displacement of the witness points.
    pub gamma: [f64; 4],
    pub normal: Vec3,
    /// Orthonormal tangent frame, both columns orthogonal to `normal`.
    pub basis: Matrix3x2<f64>,
}

/// Orthonormal `3x2` frame spanning the plane orthogonal to unit `n`.
pub fn tangent_basis(n: &Vec3) -> Matrix3x2<f64> {
    let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let t1 = n.cross(&axis).normalize();
    let t2 = n.cross(&t1);
    Matrix3x2::from_columns(&[t1, t2])
}

/// Normal force magnitudes and tangent frames at `x_n` for every pair
/// closer than `dhat`.
pub fn friction_precompute(x_n: &[Vec3], pairs: &[ContactPair], params: &ContactParams) -> Result<Vec<FrictionDatum>> {
    let mut out = Vec::new();
    for p in pairs {
        if p.d >= params.dhat {
            continue;
        }
        let (d2, witness) = p.key.witness(x_n)?;
        let d = d2.sqrt();
        if !(d > 0.0) {
            return Err(Error::NonpositiveDistance(d));
        }
        let gamma = witness.weights();
        let stencil = p.key.stencil(x_n);
        let r: Vec3 = (0..4).fold(Vec3::zeros(), |acc, i| acc + stencil[i] * gamma[i]);
        let normal = r / r.norm();
        out.push(FrictionDatum {
            key: p.key,
            lambda: params.kappa * barrier_derivative(d, params.dhat).abs(),
            gamma,
            normal,
            basis: tangent_basis(&normal),
        });
    }
    Ok(out)
}

/// Tangential relative displacement `u = T^T sum_i gamma_i (x_i - x_i^n)`.
pub fn tangential_displacement(x: &[Vec3], x_prev: &[Vec3], datum: &FrictionDatum) -> nalgebra::Vector2<f64> {
    let rel: Vec3 = (0..4).fold(Vec3::zeros(), |acc, i| {
        let v = datum.key.verts[i];
        acc + (x[v] - x_prev[v]) * datum.gamma[i]
    });
    datum.basis.transpose() * rel
}

/// `D_k = mu lambda_k f0(|u_k|)` with lambda, frame and witness
/// coefficients held fixed.
pub fn friction_pair(x: &[Vec3], x_prev: &[Vec3], datum: &FrictionDatum, mu: f64, eps_v: f64, h: f64) -> PairDerivatives {
    let u = tangential_displacement(x, x_prev, datum);
    let y = u.norm();
    let scale = mu * datum.lambda;
    let ratio = barrier::f1_over_y(y, eps_v, h);
    let eh = eps_v * h;
    let h_u = if y >= eh {
        let uh = u / y;
        (Matrix2::identity() - uh * uh.transpose()) / y
    } else if y > 0.0 {
        Matrix2::identity() * ratio - u * u.transpose() / (eh * eh * y)
    } else {
        Matrix2::identity() * ratio
    };
    let tu = datum.basis * u * (scale * ratio);
    let block = datum.basis * h_u * datum.basis.transpose() * scale;
    let mut grad = Vec12::zeros();
    let mut hess = Mat12::zeros();
    for i in 0..4 {
        grad.fixed_rows_mut::<3>(3 * i).copy_from(&(tu * datum.gamma[i]));
        for j in 0..4 {
            hess.fixed_view_mut::<3, 3>(3 * i, 3 * j)
                .copy_from(&(block * (datum.gamma[i] * datum.gamma[j])));
        }
    }
    PairDerivatives {
        verts: datum.key.verts,
        energy: scale * f0(y, eps_v, h),
        grad,
        hess,
    }
}

pub fn friction_energy_grad_hess(
    x: &[Vec3],
    x_prev: &[Vec3],
    data: &[FrictionDatum],
    params: &ContactParams,
    h: f64,
) -> (f64, Vec<PairDerivatives>) {
    if params.mu == 0.0 {
        return (0.0, Vec::new());
    }
    let parts: Vec<PairDerivatives> = data
        .par_iter()
        .map(|d| friction_pair(x, x_prev, d, params.mu, params.eps_v, h))
        .collect();
    (parts.iter().map(|p| p.energy).sum(), parts)
}
