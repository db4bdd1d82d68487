mod common;

use embedded_ipc::energy::{
    deformation_gradient, gravity_energy, gravity_force, lame, psi_corotational, psi_orthogonality, ElasticBody,
    Material, Model,
};
use embedded_ipc::mesh::shapes::box_grid;
use embedded_ipc::mesh::lump_masses;
use embedded_ipc::Vec3;
use nalgebra::{DMatrix, Matrix3, Rotation3, SymmetricEigen};
use proptest::prelude::*;

fn material(model: Model) -> Material {
    Material {
        model,
        young: 1e4,
        poisson: 0.45,
        density: 1000.0,
        kappa_abd: 1e5,
    }
}

/// Corotational density from an SVD-based polar decomposition.
fn reference_corotational(f: &Matrix3<f64>, young: f64, poisson: f64) -> f64 {
    let svd = f.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    let (mu, lambda) = lame(young, poisson);
    let tr = (r.transpose() * f - Matrix3::identity()).trace();
    mu * (f - r).norm_squared() + 0.5 * lambda * tr * tr
}

#[test]
fn lame_parameters_for_soft_rubber() {
    let (mu, lambda) = lame(1e4, 0.45);
    assert!((mu - 3448.2759).abs() < 1e-4);
    assert!((lambda - 31034.4828).abs() < 1e-4);
}

#[test]
fn corotational_stretch_example() {
    let f = Matrix3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
    let (mu, lambda) = lame(1e4, 0.45);
    let expected = mu + 0.5 * lambda;
    assert!((psi_corotational(&f, 1e4, 0.45) - expected).abs() < 1e-9);
    assert!((expected - 18965.517).abs() < 1e-3);
}

#[test]
fn orthogonality_examples() {
    let f = Matrix3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
    assert!((psi_orthogonality(&f, 1.0) - 9.0).abs() < 1e-14);
    assert_eq!(psi_orthogonality(&-Matrix3::identity(), 1.0), 0.0);
}

#[test]
fn gravity_energy_and_force() {
    let g = box_grid(Vec3::zeros(), Vec3::new(0.1, 0.1, 0.1), [1, 1, 1]).unwrap();
    let mass = lump_masses(&g, 1000.0);
    let gvec = Vec3::new(0.0, 0.0, -9.81);
    let lifted: Vec<Vec3> = g.vertices.iter().map(|p| p + Vec3::new(0.0, 0.0, 1.0)).collect();
    let de = gravity_energy(&lifted, &mass, &gvec) - gravity_energy(&g.vertices, &mass, &gvec);
    assert!((de - mass.total() * 9.81).abs() < 1e-12);
    let f: Vec3 = gravity_force(&mass, &gvec).iter().sum();
    assert!((f - gvec * mass.total()).norm() < 1e-12);
}

fn body(model: Model) -> (ElasticBody, Vec<Vec3>) {
    let g = box_grid(Vec3::zeros(), Vec3::new(0.1, 0.08, 0.06), [2, 1, 1]).unwrap();
    let b = ElasticBody::new(&g, material(model)).unwrap();
    (b, g.vertices)
}

fn arb_ortho() -> impl Strategy<Value = Matrix3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| *Rotation3::from_scaled_axis(Vec3::new(x, y, z)).matrix())
}

fn arb_stretch() -> impl Strategy<Value = Matrix3<f64>> {
    proptest::collection::vec(-0.3..0.3f64, 9)
        .prop_map(|v| Matrix3::identity() + Matrix3::from_iterator(v))
        .prop_filter("det F > 0.2", |f| f.determinant() > 0.2)
}

fn perturbed(rest: &[Vec3], noise: &[f64], amp: f64) -> Vec<Vec3> {
    rest.iter()
        .enumerate()
        .map(|(i, p)| p + Vec3::new(noise[3 * i], noise[3 * i + 1], noise[3 * i + 2]) * amp)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn corotational_matches_polar_reference(f in arb_stretch()) {
        let a = psi_corotational(&f, 1e4, 0.45);
        let b = reference_corotational(&f, 1e4, 0.45);
        prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
    }

    #[test]
    fn densities_are_rotation_invariant(f in arb_stretch(), r in arb_ortho()) {
        let k = 1e5;
        prop_assert!((psi_corotational(&(r * f), 1e4, 0.3) - psi_corotational(&f, 1e4, 0.3)).abs() < 1e-8);
        prop_assert!((psi_orthogonality(&(r * f), k) - psi_orthogonality(&f, k)).abs() < 1e-6);
        prop_assert!(psi_corotational(&r, 1e4, 0.3).abs() < 1e-9);
        prop_assert!(psi_orthogonality(&r, k).abs() < 1e-12 * k);
    }

    #[test]
    fn elastic_gradients_match_differences(
        noise in proptest::collection::vec(-1.0..1.0f64, 36),
        ortho in any::<bool>(),
    ) {
        let model = if ortho { Model::AffineOrthogonality } else { Model::Corotational };
        let (b, rest) = body(model);
        let q = perturbed(&rest, &noise, 0.01);
        let mut g = vec![Vec3::zeros(); q.len()];
        b.add_gradient(&q, &mut g);
        let x = common::flatten(&q);
        let e = |y: &[f64]| b.energy(&common::unflatten(y));
        // step relative to the element size
        let fd = common::fd_gradient(&e, &x, 1e-6 * 0.05);
        let err = common::rel_err(&common::flatten(&g), &fd, 1e-8);
        prop_assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn hessian_matches_gradient_differences(noise in proptest::collection::vec(-1.0..1.0f64, 36)) {
        let (b, rest) = body(Model::Corotational);
        let q = perturbed(&rest, &noise, 0.005);
        let n = q.len();
        let mut dense = DMatrix::zeros(3 * n, 3 * n);
        for (t, block) in b.hessian_blocks(&q, false) {
            for a in 0..4 {
                for c in 0..4 {
                    for i in 0..3 {
                        for j in 0..3 {
                            dense[(3 * t[a] + i, 3 * t[c] + j)] += block[(3 * a + i, 3 * c + j)];
                        }
                    }
                }
            }
        }
        let x = common::flatten(&q);
        let step = 1e-7;
        for col in 0..3 * n {
            let grad_at = |delta: f64| {
                let mut y = x.clone();
                y[col] += delta;
                let mut g = vec![Vec3::zeros(); n];
                b.add_gradient(&common::unflatten(&y), &mut g);
                common::flatten(&g)
            };
            let (gp, gm) = (grad_at(step), grad_at(-step));
            let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, c)| (a - c) / (2.0 * step)).collect();
            let analytic: Vec<f64> = (0..3 * n).map(|r| dense[(r, col)]).collect();
            let err = common::rel_err(&analytic, &fd, 1.0);
            prop_assert!(err <= 1e-5, "column {col}: {err}");
        }
    }

    #[test]
    fn projected_hessian_is_psd(noise in proptest::collection::vec(-1.0..1.0f64, 36), ortho in any::<bool>()) {
        let model = if ortho { Model::AffineOrthogonality } else { Model::Corotational };
        let (b, rest) = body(model);
        let q = perturbed(&rest, &noise, 0.03);
        for (_, block) in b.hessian_blocks(&q, true) {
            let sym = (block + block.transpose()) * 0.5;
            let scale = sym.amax().max(1.0);
            let min = SymmetricEigen::new(sym).eigenvalues.min();
            prop_assert!(min >= -1e-10 * scale, "min eigenvalue {min}");
        }
    }

    #[test]
    fn energy_is_invariant_under_rigid_motion(
        noise in proptest::collection::vec(-1.0..1.0f64, 36),
        r in arb_ortho(),
        t in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
    ) {
        let (b, rest) = body(Model::Corotational);
        let q = perturbed(&rest, &noise, 0.01);
        let t = Vec3::new(t.0, t.1, t.2);
        let moved: Vec<Vec3> = q.iter().map(|p| r * p + t).collect();
        let (e0, e1) = (b.energy(&q), b.energy(&moved));
        prop_assert!((e0 - e1).abs() <= 1e-9 * e0.max(1e-12));
    }

    #[test]
    fn deformation_gradient_recovers_affine_map(a in arb_stretch(), t in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)) {
        let rest = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()].map(|p| p * 0.1 + Vec3::new(0.3, 0.1, 0.0));
        let t = Vec3::new(t.0, t.1, t.2);
        let cur = rest.map(|p| a * p + t);
        let f = deformation_gradient([&rest[0], &rest[1], &rest[2], &rest[3]], [&cur[0], &cur[1], &cur[2], &cur[3]]).unwrap();
        prop_assert!((f - a).amax() < 1e-12);
    }
}
