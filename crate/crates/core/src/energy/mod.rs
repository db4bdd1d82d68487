//! Elastic energy on the embedding tets, gravity, and their derivatives with
//! respect to the embedding vertex positions.

pub mod isotropic;

use nalgebra::{Matrix3, SMatrix, SVector};
use rayon::prelude::*;

use self::isotropic::{Corotational, Isotropic, Orthogonality, Svd};
use crate::error::{Error, Result};
use crate::mesh::{edge_matrix, EmbeddingMesh, MassModel};
use crate::Vec3;

pub type Mat12 = SMatrix<f64, 12, 12>;
pub type Vec12 = SVector<f64, 12>;
type Map9x12 = SMatrix<f64, 9, 12>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Corotational,
    /// Affine-body orthogonality potential `kappa_abd |F F^T - I|^2`.
    AffineOrthogonality,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub model: Model,
    /// Young's modulus (Pa).
    pub young: f64,
    pub poisson: f64,
    /// Density (kg/m^3).
    pub density: f64,
    /// Orthogonality stiffness (Pa), used by [`Model::AffineOrthogonality`].
    pub kappa_abd: f64,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        let ok = self.young > 0.0
            && (0.0..0.5).contains(&self.poisson)
            && self.density > 0.0
            && (self.model != Model::AffineOrthogonality || self.kappa_abd > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!("invalid material {self:?}")))
        }
    }

    /// Lamé parameters `(mu, lambda)`.
    pub fn lame(&self) -> (f64, f64) {
        lame(self.young, self.poisson)
    }
}

pub fn lame(young: f64, poisson: f64) -> (f64, f64) {
    let mu = young / (2.0 * (1.0 + poisson));
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    (mu, lambda)
}

/// `F = D (D0)^-1` from rest and current tet corners.
pub fn deformation_gradient(rest: [&Vec3; 4], current: [&Vec3; 4]) -> Result<Matrix3<f64>> {
    let d0 = edge_matrix(rest[0], rest[1], rest[2], rest[3]);
    let inv = d0
        .try_inverse()
        .filter(|_| d0.determinant().abs() / 6.0 >= crate::mesh::DEGENERATE_VOLUME)
        .ok_or(Error::DegenerateTet {
            volume: d0.determinant() / 6.0,
        })?;
    Ok(edge_matrix(current[0], current[1], current[2], current[3]) * inv)
}

pub fn psi_corotational(f: &Matrix3<f64>, young: f64, poisson: f64) -> f64 {
    let (mu, lambda) = lame(young, poisson);
    Corotational { mu, lambda }.psi(&Svd::new(f).sigma)
}

pub fn psi_orthogonality(f: &Matrix3<f64>, kappa_abd: f64) -> f64 {
    (f * f.transpose() - Matrix3::identity()).norm_squared() * kappa_abd
}

enum Density {
    Corotational(Corotational),
    Orthogonality(Orthogonality),
}

impl Density {
    fn new(material: &Material) -> Self {
        match material.model {
            Model::Corotational => {
                let (mu, lambda) = material.lame();
                Density::Corotational(Corotational { mu, lambda })
            }
            Model::AffineOrthogonality => Density::Orthogonality(Orthogonality {
                kappa: material.kappa_abd,
            }),
        }
    }

    fn psi(&self, f: &Matrix3<f64>) -> f64 {
        match self {
            Density::Corotational(c) => c.psi(&Svd::new(f).sigma),
            Density::Orthogonality(o) => psi_orthogonality(f, o.kappa),
        }
    }

    fn stress(&self, f: &Matrix3<f64>) -> Matrix3<f64> {
        match self {
            Density::Corotational(c) => isotropic::stress(c, &Svd::new(f)),
            Density::Orthogonality(o) => (f * f.transpose() - Matrix3::identity()) * f * (4.0 * o.kappa),
        }
    }

    fn hessian(&self, f: &Matrix3<f64>, project: bool) -> isotropic::Mat9 {
        let svd = Svd::new(f);
        match self {
            Density::Corotational(c) => isotropic::hessian(c, &svd, project),
            Density::Orthogonality(o) => isotropic::hessian(o, &svd, project),
        }
    }
}

/// Per-body elastic energy `sum_j Psi(F_j) V_j` over the embedding tets.
pub struct ElasticBody {
    pub tets: Vec<[usize; 4]>,
    pub rest_volumes: Vec<f64>,
    pub material: Material,
    dm_inv: Vec<Matrix3<f64>>,
    /// `vec(F) = B [x0; x1; x2; x3]` per tet.
    maps: Vec<Map9x12>,
    density: Density,
}

impl ElasticBody {
    pub fn new(emb: &EmbeddingMesh, material: Material) -> Result<Self> {
        material.validate()?;
        let mut dm_inv = Vec::with_capacity(emb.tets.len());
        let mut maps = Vec::with_capacity(emb.tets.len());
        for t in &emb.tets {
            let [a, b, c, d] = t.map(|v| emb.vertices[v]);
            let m = edge_matrix(&a, &b, &c, &d);
            let inv = m.try_inverse().ok_or(Error::DegenerateTet {
                volume: m.determinant() / 6.0,
            })?;
            maps.push(vec_f_map(&inv));
            dm_inv.push(inv);
        }
        Ok(ElasticBody {
            tets: emb.tets.clone(),
            rest_volumes: emb.rest_volumes.clone(),
            material,
            dm_inv,
            maps,
            density: Density::new(&material),
        })
    }

    pub fn deformation_gradients(&self, q: &[Vec3]) -> Vec<Matrix3<f64>> {
        (0..self.tets.len()).map(|j| self.f(q, j)).collect()
    }

    fn f(&self, q: &[Vec3], j: usize) -> Matrix3<f64> {
        let [a, b, c, d] = self.tets[j].map(|v| q[v]);
        edge_matrix(&a, &b, &c, &d) * self.dm_inv[j]
    }

    pub fn energy(&self, q: &[Vec3]) -> f64 {
        let per_tet: Vec<f64> = (0..self.tets.len())
            .into_par_iter()
            .map(|j| self.density.psi(&self.f(q, j)) * self.rest_volumes[j])
            .collect();
        per_tet.iter().sum()
    }

    /// Adds `dE/dq` into `out`.
    pub fn add_gradient(&self, q: &[Vec3], out: &mut [Vec3]) {
        let per_tet: Vec<Vec12> = (0..self.tets.len())
            .into_par_iter()
            .map(|j| {
                let p = self.density.stress(&self.f(q, j));
                self.maps[j].transpose() * SVector::<f64, 9>::from_column_slice(p.as_slice()) * self.rest_volumes[j]
            })
            .collect();
        for (t, g) in self.tets.iter().zip(&per_tet) {
            for (a, &v) in t.iter().enumerate() {
                out[v] += g.fixed_rows::<3>(3 * a);
            }
        }
    }

    /// Per-tet 12x12 Hessians in the tet's vertex order.
    pub fn hessian_blocks(&self, q: &[Vec3], project: bool) -> Vec<([usize; 4], Mat12)> {
        (0..self.tets.len())
            .into_par_iter()
            .map(|j| {
                let hf = self.density.hessian(&self.f(q, j), project);
                let b = &self.maps[j];
                (self.tets[j], b.transpose() * hf * b * self.rest_volumes[j])
            })
            .collect()
    }
}

fn vec_f_map(dm_inv: &Matrix3<f64>) -> Map9x12 {
    let mut b = Map9x12::zeros();
    for c in 0..3 {
        for d in 0..3 {
            let mut first = 0.0;
            for a in 1..4 {
                let w = dm_inv[(a - 1, c)];
                b[(3 * c + d, 3 * a + d)] = w;
                first -= w;
            }
            b[(3 * c + d, d)] = first;
        }
    }
    b
}

/// `E_ext = -sum_i m_i g . q_i`.
pub fn gravity_energy(q: &[Vec3], mass: &MassModel, g: &Vec3) -> f64 {
    -q.iter()
        .zip(&mass.masses)
        .map(|(qi, &m)| m * g.dot(qi))
        .sum::<f64>()
}

/// Generalized gravity force `m_i g` on each embedding vertex.
pub fn gravity_force(mass: &MassModel, g: &Vec3) -> Vec<Vec3> {
    mass.masses.iter().map(|&m| g * m).collect()
}
