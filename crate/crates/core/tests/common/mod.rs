//! Reference computations shared by the integration tests. Nothing here calls
//! into the library's own checking code.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use embedded_ipc::scene::{parse_spec, Scene};
use embedded_ipc::Vec3;
use nalgebra::{DMatrix, DVector};

pub fn scenes_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes")
}

pub fn inline_scene(json: &str) -> Scene {
    let spec = parse_spec(json, Path::new("inline.json")).expect("scene parses");
    Scene::build(spec, Path::new(".")).expect("scene builds")
}

/// Central differences with Richardson extrapolation (fourth order).
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let mut at = |dx: f64| {
            y[i] = x[i] + dx;
            let v = f(&y);
            y[i] = x[i];
            v
        };
        let d1 = (at(step) - at(-step)) / (2.0 * step);
        let d2 = (at(2.0 * step) - at(-2.0 * step)) / (4.0 * step);
        g[i] = (4.0 * d1 - d2) / 3.0;
    }
    g
}

/// `|a - b|_inf / max(|b|_inf, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(floor, f64::max);
    diff / scale
}

pub fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

pub fn unflatten(v: &[f64]) -> Vec<Vec3> {
    v.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

/// Minimizes a convex function on `[0, 1]` by ternary search.
fn ternary(f: &dyn Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.0).min(f(1.0)).min(f(0.5 * (lo + hi)))
}

/// Closest parameter on segment `a + t e`, `t in [0, tmax]`, to `p`.
fn clamp_param(p: &Vec3, a: &Vec3, e: &Vec3, tmax: f64) -> f64 {
    ((p - a).dot(e) / e.norm_squared()).clamp(0.0, tmax)
}

/// Squared point-triangle distance by nested one-dimensional minimization
/// over the barycentric domain `u + v <= 1`.
pub fn sampled_pt_d2(p: &Vec3, t0: &Vec3, t1: &Vec3, t2: &Vec3) -> f64 {
    let (e1, e2) = (t1 - t0, t2 - t0);
    let row = |u: f64| {
        let base = t0 + e1 * u;
        let v = clamp_param(p, &base, &e2, 1.0 - u);
        (p - (base + e2 * v)).norm_squared()
    };
    ternary(&row)
}

/// Squared segment-segment distance by nested one-dimensional minimization.
pub fn sampled_ee_d2(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> f64 {
    let eb = b1 - b0;
    let row = |s: f64| {
        let p = a0 + (a1 - a0) * s;
        let t = clamp_param(&p, b0, &eb, 1.0);
        (p - (b0 + eb * t)).norm_squared()
    };
    ternary(&row)
}

/// Least-squares residual (max vertex distance) of the best affine map
/// taking `rest` to `current`.
pub fn affine_residual(rest: &[Vec3], current: &[Vec3]) -> f64 {
    let n = rest.len();
    let a = DMatrix::from_fn(n, 4, |i, j| if j < 3 { rest[i][j] } else { 1.0 });
    let svd = a.clone().svd(true, true);
    let mut worst: f64 = 0.0;
    let mut fitted = vec![Vec3::zeros(); n];
    for d in 0..3 {
        let b = DVector::from_fn(n, |i, _| current[i][d]);
        let coef = svd.solve(&b, 1e-14).expect("lstsq");
        let fit = &a * coef;
        for i in 0..n {
            fitted[i][d] = fit[i];
        }
    }
    for (f, c) in fitted.iter().zip(current) {
        worst = worst.max((f - c).norm());
    }
    worst
}

/// Signed tet volume by cofactor expansion.
pub fn tet_volume(p: [Vec3; 4]) -> f64 {
    let a = p[1] - p[0];
    let b = p[2] - p[0];
    let c = p[3] - p[0];
    let det = a.x * (b.y * c.z - b.z * c.y) - b.x * (a.y * c.z - a.z * c.y) + c.x * (a.y * b.z - a.z * b.y);
    det / 6.0
}

/// A 10 cm box resting `gap` above a scripted floor slab.
pub fn box_on_floor_json(gap: f64, mu: f64, embedding: &str, gravity: f64, extra_box: &str) -> String {
    format!(
        r#"{{
        "duration": 0.1,
        "gravity": [0, 0, {gravity}],
        "contact": {{ "mu": {mu} }},
        "bodies": [
          {{ "name": "box",
            "surface": {{ "box": {{ "size": [0.1, 0.1, 0.1], "res": [2, 2, 2] }} }},
            "embedding": {embedding},
            "material": {{ "model": "corotational", "young": 1e5, "poisson": 0.3, "density": 1000 }},
            "pose": {{ "translation": [0, 0, {z}] }} {extra_box} }},
          {{ "name": "floor",
            "surface": {{ "box": {{ "size": [1, 1, 0.1], "res": [1, 1, 1], "center": [0, 0, -0.05] }} }},
            "embedding": "identity",
            "material": {{ "model": "corotational", "young": 1e5, "poisson": 0.3, "density": 1000 }},
            "script": {{ "vertices": "all", "keyframes": [ {{ "t": 0 }} ] }} }}
        ]
    }}"#,
        z = 0.05 + gap
    )
}
