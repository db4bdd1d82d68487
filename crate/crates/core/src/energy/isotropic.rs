//! Isotropic energy densities written in terms of signed singular values,
//! with the analytic eigensystem of their Hessian with respect to `F`.

use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen};

use crate::Vec3;

pub type Mat9 = SMatrix<f64, 9, 9>;
pub type Vec9 = SVector<f64, 9>;

/// Rotation-variant SVD `F = U diag(sigma) V^T` with `U, V` proper rotations
/// and `sigma` sorted by decreasing magnitude. When `det F < 0` the last
/// singular value carries the sign.
#[derive(Clone, Copy, Debug)]
pub struct Svd {
    pub u: Matrix3<f64>,
    pub sigma: Vec3,
    pub v: Matrix3<f64>,
}

impl Svd {
    pub fn new(f: &Matrix3<f64>) -> Self {
        let svd = f.svd(true, true);
        let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
        let v = v_t.transpose();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut u = Matrix3::from_columns(&order.map(|k| u.column(k).into_owned()));
        let mut v = Matrix3::from_columns(&order.map(|k| v.column(k).into_owned()));
        let mut sigma = Vec3::from(order.map(|k| svd.singular_values[k]));
        if u.determinant() < 0.0 {
            u.column_mut(2).neg_mut();
            sigma[2] = -sigma[2];
        }
        if v.determinant() < 0.0 {
            v.column_mut(2).neg_mut();
            sigma[2] = -sigma[2];
        }
        Svd { u, sigma, v }
    }

    /// Rotation factor of the polar decomposition, always in SO(3).
    pub fn rotation(&self) -> Matrix3<f64> {
        self.u * self.v.transpose()
    }

    fn lift(&self, d: &Matrix3<f64>) -> Matrix3<f64> {
        self.u * d * self.v.transpose()
    }
}

/// An energy density `psi(F) = psi_hat(sigma)` symmetric in the singular values.
pub trait Isotropic {
    fn psi(&self, sigma: &Vec3) -> f64;
    fn dpsi(&self, sigma: &Vec3) -> Vec3;
    fn d2psi(&self, sigma: &Vec3) -> Matrix3<f64>;
    /// Eigenvalue of the symmetric mode coupling `sigma_i` and `sigma_j`,
    /// `(dpsi_i - dpsi_j) / (sigma_i - sigma_j)` in closed form.
    fn flip(&self, sigma: &Vec3, i: usize, j: usize) -> f64;
    /// Eigenvalue of the antisymmetric mode, `(dpsi_i + dpsi_j) / (sigma_i + sigma_j)`.
    fn twist(&self, sigma: &Vec3, i: usize, j: usize) -> f64;
}

/// First Piola-Kirchhoff stress `U diag(dpsi) V^T`.
pub fn stress(model: &impl Isotropic, svd: &Svd) -> Matrix3<f64> {
    svd.lift(&Matrix3::from_diagonal(&model.dpsi(&svd.sigma)))
}

/// `d^2 psi / dF^2` in column-major `vec(F)` ordering. With `project` the
/// negative eigenvalues are clamped to zero.
pub fn hessian(model: &impl Isotropic, svd: &Svd, project: bool) -> Mat9 {
    let s = svd.sigma;
    let clamp = |l: f64| if project { l.max(0.0) } else { l };
    let mut h = Mat9::zeros();
    let mut add_mode = |lambda: f64, d: Matrix3<f64>| {
        if lambda != 0.0 {
            let m = svd.lift(&d);
            let q = Vec9::from_column_slice(m.as_slice());
            h += q * q.transpose() * lambda;
        }
    };
    let scaling = SymmetricEigen::new(model.d2psi(&s));
    for k in 0..3 {
        let z = scaling.eigenvectors.column(k);
        add_mode(
            clamp(scaling.eigenvalues[k]),
            Matrix3::from_diagonal(&Vec3::new(z[0], z[1], z[2])),
        );
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let mut sym = Matrix3::zeros();
        sym[(i, j)] = r;
        sym[(j, i)] = r;
        add_mode(clamp(model.flip(&s, i, j)), sym);
        let mut anti = Matrix3::zeros();
        anti[(i, j)] = r;
        anti[(j, i)] = -r;
        add_mode(clamp(model.twist(&s, i, j)), anti);
    }
    h
}

fn guarded(x: f64) -> f64 {
    const FLOOR: f64 = 1e-8;
    if x.abs() >= FLOOR {
        x
    } else if x < 0.0 {
        -FLOOR
    } else {
        FLOOR
    }
}

/// Corotational density `mu sum (sigma - 1)^2 + lambda / 2 (sum sigma - 3)^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Corotational {
    pub mu: f64,
    pub lambda: f64,
}

impl Isotropic for Corotational {
    fn psi(&self, s: &Vec3) -> f64 {
        let tr = s.sum() - 3.0;
        self.mu * (s - Vec3::repeat(1.0)).norm_squared() + 0.5 * self.lambda * tr * tr
    }

    fn dpsi(&self, s: &Vec3) -> Vec3 {
        let tr = s.sum() - 3.0;
        (s - Vec3::repeat(1.0)) * (2.0 * self.mu) + Vec3::repeat(self.lambda * tr)
    }

    fn d2psi(&self, _s: &Vec3) -> Matrix3<f64> {
        Matrix3::identity() * (2.0 * self.mu) + Matrix3::repeat(self.lambda)
    }

    fn flip(&self, _s: &Vec3, _i: usize, _j: usize) -> f64 {
        2.0 * self.mu
    }

    fn twist(&self, s: &Vec3, i: usize, j: usize) -> f64 {
        let d = self.dpsi(s);
        (d[i] + d[j]) / guarded(s[i] + s[j])
    }
}

/// Orthogonality potential `kappa sum (sigma^2 - 1)^2 = kappa |F F^T - I|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orthogonality {
    pub kappa: f64,
}

impl Isotropic for Orthogonality {
    fn psi(&self, s: &Vec3) -> f64 {
        self.kappa * s.map(|x| (x * x - 1.0).powi(2)).sum()
    }

    fn dpsi(&self, s: &Vec3) -> Vec3 {
        s.map(|x| 4.0 * self.kappa * x * (x * x - 1.0))
    }

    fn d2psi(&self, s: &Vec3) -> Matrix3<f64> {
        Matrix3::from_diagonal(&s.map(|x| 4.0 * self.kappa * (3.0 * x * x - 1.0)))
    }

    fn flip(&self, s: &Vec3, i: usize, j: usize) -> f64 {
        4.0 * self.kappa * (s[i] * s[i] + s[i] * s[j] + s[j] * s[j] - 1.0)
    }

    fn twist(&self, s: &Vec3, i: usize, j: usize) -> f64 {
        4.0 * self.kappa * (s[i] * s[i] - s[i] * s[j] + s[j] * s[j] - 1.0)
    }
}
