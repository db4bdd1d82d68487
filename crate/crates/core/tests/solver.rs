mod common;

use embedded_ipc::scene::{run, RunOptions};
use embedded_ipc::solver::{check_convergence, newton_iteration, step, SolverConfig};
use embedded_ipc::sparse::BlockMatrix;
use embedded_ipc::Vec3;
use nalgebra::Matrix3;

#[test]
fn convergence_threshold_is_inclusive() {
    let h = 0.01;
    let tol = 1e-3;
    let at_tol = vec![Vec3::new(0.0, -tol * h, 0.0)];
    assert!(check_convergence(&at_tol, h, tol));
    let above = vec![Vec3::new(0.0, -tol * h * (1.0 + 1e-9), 0.0)];
    assert!(!check_convergence(&above, h, tol));
    assert!(check_convergence(&[Vec3::zeros()], h, tol));
}

#[test]
fn newton_step_solves_a_quadratic_exactly() {
    // E(q) = 1/2 q^T A q - b^T q with a chain of coupled nodes
    let n = 5;
    let mut a = BlockMatrix::new(n);
    for i in 0..n {
        a.add(i, i, Matrix3::from_diagonal(&Vec3::new(4.0, 5.0, 6.0)));
        if i + 1 < n {
            let c = Matrix3::new(1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.0);
            a.add(i, i + 1, -c);
            a.add(i + 1, i, -c.transpose());
        }
    }
    a.compress();
    let b: Vec<Vec3> = (0..n).map(|i| Vec3::new(i as f64, 1.0, -2.0)).collect();
    let q0 = vec![Vec3::new(0.3, -0.1, 0.7); n];
    let grad: Vec<Vec3> = a.mul(&q0).iter().zip(&b).map(|(aq, bi)| aq - bi).collect();
    let free = vec![true; n];
    let p = newton_iteration(&a, &grad, &free, None).unwrap();
    let q1: Vec<Vec3> = q0.iter().zip(&p).map(|(q, d)| q + d).collect();
    let residual: Vec<Vec3> = a.mul(&q1).iter().zip(&b).map(|(aq, bi)| aq - bi).collect();
    let worst = residual.iter().map(|r| r.amax()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
    // fixed nodes keep their prescribed step
    let mut free = vec![true; n];
    free[0] = false;
    let mut fixed = vec![Vec3::zeros(); n];
    fixed[0] = Vec3::new(0.1, 0.0, 0.0);
    let p = newton_iteration(&a, &grad, &free, Some(&fixed)).unwrap();
    assert_eq!(p[0], fixed[0]);
}

fn lone_box(gravity: f64) -> embedded_ipc::scene::Scene {
    common::inline_scene(&format!(
        r#"{{ "duration": 0.2, "gravity": [0, 0, {gravity}],
        "bodies": [ {{ "name": "box",
            "surface": {{ "box": {{ "size": [0.1, 0.1, 0.1], "res": [1, 1, 1] }} }},
            "embedding": "single_tet",
            "material": {{ "model": "corotational", "young": 1e5, "poisson": 0.3, "density": 1000 }} }} ] }}"#
    ))
}

#[test]
fn ballistic_flight_follows_the_backward_euler_recurrence() {
    let scene = lone_box(-9.81);
    let j = &scene.assembly.jacobian;
    let mut state = scene.initial_state(j);
    let h = scene.solver.h;
    let q0 = state.q.clone();
    for n in 1..=20 {
        let out = step(&scene.assembly, j, &state, &scene.targets(n as f64 * h), &scene.solver).unwrap();
        assert!(out.stats.newton_iters <= 2, "{}", out.stats.newton_iters);
        state = out.state;
        // z_n = z_0 - g h^2 n (n + 1) / 2
        let drop = 9.81 * h * h * (n * (n + 1)) as f64 / 2.0;
        for (q, q0) in state.q.iter().zip(&q0) {
            assert!((q - (q0 - Vec3::z() * drop)).amax() < 1e-10);
        }
    }
}

#[test]
fn unloaded_body_stays_put() {
    let scene = lone_box(0.0);
    let log = run(&scene, &RunOptions::default()).unwrap();
    let fin = log.final_state.unwrap();
    for (a, b) in fin.q.iter().zip(&scene.q0) {
        assert!((a - b).amax() < 1e-9);
    }
}

#[test]
fn resting_box_keeps_gap_and_decreases_energy() {
    let scene = common::inline_scene(&common::box_on_floor_json(2e-3, 0.0, "\"single_tet\"", -9.81, ""));
    let log = run(
        &scene,
        &RunOptions {
            audit: true,
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(log.intersections.is_empty());
    assert_eq!(log.descent_violations(), 0);
    for f in &log.frames {
        assert!(f.stats.min_dist > 0.0);
        assert!(f.stats.newton_iters <= SolverConfig::default().max_newton);
    }
    let last = log.frames.last().unwrap();
    assert!(last.stats.min_dist < scene.assembly.contact.dhat);
}

#[test]
fn head_on_approach_is_clamped() {
    // box launched at the floor fast enough to cross it within one step
    let scene = common::inline_scene(&common::box_on_floor_json(5e-3, 0.0, "\"single_tet\"", 0.0, ""));
    let j = &scene.assembly.jacobian;
    let mut state = scene.initial_state(j);
    for (v, &s) in state.qdot.iter_mut().zip(&scene.assembly.scripted) {
        if !s {
            *v = Vec3::new(0.0, 0.0, -2.0);
        }
    }
    let out = step(&scene.assembly, j, &state, &scene.targets(0.01), &scene.solver).unwrap();
    assert!(out.stats.min_dist > 0.0);
    let bottom = out.state.x.iter().zip(&scene.assembly.surface.kinematic).filter(|(_, &k)| !k).map(|(x, _)| x.z).fold(f64::MAX, f64::min);
    assert!(bottom > 0.0, "{bottom}");
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let json = common::box_on_floor_json(1e-3, 0.3, "{ \"box_grid\": { \"res\": [2, 2, 2] } }", -9.81, "");
    let (a, b) = (common::inline_scene(&json), common::inline_scene(&json));
    let la = run(&a, &RunOptions { threads: Some(1), ..RunOptions::default() }).unwrap();
    let lb = run(&b, &RunOptions { threads: Some(4), ..RunOptions::default() }).unwrap();
    let (fa, fb) = (la.final_state.unwrap(), lb.final_state.unwrap());
    for (x, y) in fa.q.iter().zip(&fb.q) {
        for d in 0..3 {
            assert_eq!(x[d].to_bits(), y[d].to_bits());
        }
    }
}
