mod common;

use embedded_ipc::energy::Model;
use embedded_ipc::scene::{load_spec, run, RunOptions, Scene, TrajectoryLog};
use embedded_ipc::Vec3;

fn load(name: &str) -> Scene {
    let path = common::scenes_dir().join(name);
    Scene::build(load_spec(&path).unwrap(), &common::scenes_dir()).unwrap()
}

/// Sum of the forces the listed bodies exert on `target`.
fn force_on(scene: &Scene, log: &TrajectoryLog, target: &str, from: &[&str]) -> Vec<(f64, Vec3)> {
    let t = scene.body_index(target).unwrap();
    let mut total: Vec<(f64, Vec3)> = log.frames.iter().map(|f| (f.t, Vec3::zeros())).collect();
    for name in from {
        let o = scene.body_index(name).unwrap();
        for (slot, (_, f)) in total.iter_mut().zip(log.force_series(t, o)) {
            slot.1 += f;
        }
    }
    total
}

fn slope(series: &[(f64, f64)], t0: f64, t1: f64) -> f64 {
    let pts: Vec<_> = series.iter().filter(|(t, _)| *t >= t0 - 1e-9 && *t <= t1 + 1e-9).collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    cov / var
}

#[test]
fn bubble_gripper_lifts_and_holds_the_teddy() {
    let scene = load("bubble_gripper.json");
    assert_eq!(scene.bodies.len(), 4);
    for name in ["left_bubble", "right_bubble"] {
        let b = &scene.bodies[scene.body_index(name).unwrap()];
        assert_eq!(b.material.model, Model::Corotational);
        assert_eq!((b.material.young, b.material.poisson, b.material.density), (1e4, 0.45, 10.0));
    }
    let teddy = scene.body_index("teddy").unwrap();
    assert_eq!(scene.bodies[teddy].material.young, 5e4);
    assert!(scene.bodies[teddy].collision.vertices.len() > 10 * scene.bodies[teddy].embedding.vertices.len());
    let c = scene.assembly.contact;
    assert_eq!((c.kappa, c.dhat, c.eps_v, c.mu), (1e4, 1e-3, 1e-3, 1.0));

    let log = run(&scene, &RunOptions { audit: true, ..RunOptions::default() }).unwrap();
    assert!(log.intersections.is_empty());
    assert_eq!(log.descent_violations(), 0);

    // lift onset at t = 1.5 s: the squeeze force stops growing
    let left = force_on(&scene, &log, "teddy", &["left_bubble"]);
    let magnitude: Vec<(f64, f64)> = left.iter().map(|(t, f)| (*t, f.norm())).collect();
    let before = slope(&magnitude, 1.3, 1.5);
    let after = slope(&magnitude, 1.5, 1.7);
    assert!(before > 5.0, "{before}");
    assert!(after < 0.5 * before, "before {before} after {after}");

    // hold phase: the bubbles alone carry the weight
    let l = &scene.assembly.layout[teddy];
    let mass: f64 = scene.assembly.mass.masses[l.node_offset..l.node_offset + l.num_nodes].iter().sum();
    let weight = mass * 9.81;
    let grip = force_on(&scene, &log, "teddy", &["left_bubble", "right_bubble"]);
    let floor = force_on(&scene, &log, "teddy", &["floor"]);
    let held: Vec<f64> = grip.iter().filter(|(t, _)| *t >= 3.0).map(|(_, f)| f.z).collect();
    let mean = held.iter().sum::<f64>() / held.len() as f64;
    assert!((mean - weight).abs() <= 0.02 * weight, "support {mean} N, weight {weight} N");
    assert!(floor.iter().filter(|(t, _)| *t >= 3.0).all(|(_, f)| f.norm() == 0.0));
}

#[test]
fn squeeze_normal_force_grows_during_grasp() {
    let mut spec = load_spec(&common::scenes_dir().join("squeeze.json")).unwrap();
    spec.solver.h = 0.005;
    spec.duration = 0.8;
    let scene = Scene::build(spec, &common::scenes_dir()).unwrap();
    let log = run(&scene, &RunOptions::default()).unwrap();
    let normal: Vec<f64> = force_on(&scene, &log, "block", &["left"]).iter().map(|(_, f)| f.x).collect();
    let start = normal.iter().position(|&f| f > 0.0).expect("contact is made");
    let mut ups = 0;
    for w in normal[start..].windows(2) {
        assert!(w[1] >= w[0] - 1e-6 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        ups += (w[1] > w[0]) as usize;
    }
    assert!(ups > (normal.len() - start) / 2);
}
