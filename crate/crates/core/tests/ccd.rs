mod common;

use embedded_ipc::ccd::{accd_toi, max_step, query_for, QueryKind, ToiQuery, DEFAULT_FACTOR, DEFAULT_SLACK};
use embedded_ipc::contact::{candidate_pairs, Surface};
use embedded_ipc::mesh::CollisionMesh;
use embedded_ipc::scene::audit_intersections;
use embedded_ipc::Vec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

fn oracle_distance(kind: QueryKind, x: &[Vec3; 4]) -> f64 {
    match kind {
        QueryKind::PointPoint => (x[0] - x[1]).norm(),
        QueryKind::PointTriangle => common::sampled_pt_d2(&x[0], &x[1], &x[2], &x[3]).sqrt(),
        QueryKind::EdgeEdge => common::sampled_ee_d2(&x[0], &x[1], &x[2], &x[3]).sqrt(),
    }
}

fn at(q: &ToiQuery, t: f64) -> [Vec3; 4] {
    [0, 1, 2, 3].map(|i| q.start[i] + q.displacement[i] * t)
}

#[test]
fn head_on_points_stop_at_the_slack_gap() {
    let q = ToiQuery {
        kind: QueryKind::PointPoint,
        start: [Vec3::zeros(), Vec3::x(), Vec3::zeros(), Vec3::zeros()],
        displacement: [Vec3::x(), -Vec3::x(), Vec3::zeros(), Vec3::zeros()],
        slack: 0.1,
    };
    assert!((accd_toi(&q) - 0.45).abs() < 1e-12);
    let receding = ToiQuery {
        displacement: [-Vec3::x(), Vec3::x(), Vec3::zeros(), Vec3::zeros()],
        ..q
    };
    assert_eq!(accd_toi(&receding), 1.0);
}

/// One vertex falling onto a large two-triangle floor.
fn point_over_floor(gap: f64) -> (Vec<Vec3>, Surface) {
    let x = vec![
        Vec3::new(-5.0, -5.0, 0.0),
        Vec3::new(5.0, -5.0, 0.0),
        Vec3::new(5.0, 5.0, 0.0),
        Vec3::new(-5.0, 5.0, 0.0),
        Vec3::new(0.2, 0.3, gap),
        Vec3::new(0.3, 0.3, gap),
        Vec3::new(0.2, 0.4, gap),
    ];
    let m = CollisionMesh::new(x.clone(), vec![[0, 1, 2], [0, 2, 3], [4, 5, 6]]).unwrap();
    let s = Surface {
        num_vertices: 7,
        triangles: m.triangles,
        edges: m.edges,
        vertex_body: vec![0, 0, 0, 0, 1, 1, 1],
        self_contact: vec![true, true],
        kinematic: vec![true, true, true, true, false, false, false],
    };
    (x, s)
}

#[test]
fn falling_triangle_is_clamped_by_the_factor() {
    let gap = 0.01;
    let (x, s) = point_over_floor(gap);
    let mut p = vec![Vec3::zeros(); 7];
    for v in &mut p[4..] {
        *v = Vec3::new(0.0, 0.0, -2.0 * gap);
    }
    let alpha = max_step(&x, &p, &s, DEFAULT_SLACK, DEFAULT_FACTOR);
    // toi = (1 - s) d0 / |p| = 0.45
    assert!((alpha - 0.9 * 0.45).abs() < 1e-9, "{alpha}");
    let lifted: Vec<Vec3> = p.iter().map(|v| -v).collect();
    assert_eq!(max_step(&x, &lifted, &s, DEFAULT_SLACK, DEFAULT_FACTOR), 1.0);
}

fn soup(rng: &mut ChaCha8Rng) -> (Vec<Vec3>, Surface) {
    let mut x = Vec::new();
    let mut tris = Vec::new();
    while tris.len() < 10 {
        let c = rand_vec(rng, 0.3);
        let t: Vec<Vec3> = (0..3).map(|_| c + rand_vec(rng, 0.1)).collect();
        if (t[1] - t[0]).cross(&(t[2] - t[0])).norm() < 1e-3 {
            continue;
        }
        let o = x.len();
        x.extend(t);
        tris.push([o, o + 1, o + 2]);
    }
    let m = CollisionMesh::new(x.clone(), tris).unwrap();
    let n = x.len();
    let s = Surface {
        num_vertices: n,
        triangles: m.triangles,
        edges: m.edges,
        vertex_body: vec![0; n],
        self_contact: vec![true],
        kinematic: vec![false; n],
    };
    (x, s)
}

#[test]
fn clamped_steps_never_intersect() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut scenes = 0;
    while scenes < 100 {
        let (x, s) = soup(&mut rng);
        if !audit_intersections(&x, &s).is_empty() {
            continue;
        }
        let p: Vec<Vec3> = (0..x.len()).map(|_| rand_vec(&mut rng, 0.4)).collect();
        let alpha = max_step(&x, &p, &s, DEFAULT_SLACK, DEFAULT_FACTOR);
        let keys = candidate_pairs(&x, None, &s, f64::INFINITY);
        if keys.iter().any(|k| k.squared_distance(&x).unwrap() < 1e-10) {
            continue;
        }
        scenes += 1;
        for k in 1..=20 {
            let t = alpha * k as f64 / 20.0;
            let xt: Vec<Vec3> = x.iter().zip(&p).map(|(a, b)| a + b * t).collect();
            assert!(audit_intersections(&xt, &s).is_empty(), "intersection at t = {t} (alpha {alpha})");
            for key in &keys {
                assert!(key.squared_distance(&xt).unwrap() > 0.0);
            }
        }
    }
}

#[test]
fn max_step_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (x, s) = soup(&mut rng);
    let p: Vec<Vec3> = (0..x.len()).map(|_| rand_vec(&mut rng, 0.5)).collect();
    let a = max_step(&x, &p, &s, DEFAULT_SLACK, DEFAULT_FACTOR);
    for _ in 0..5 {
        assert_eq!(a.to_bits(), max_step(&x, &p, &s, DEFAULT_SLACK, DEFAULT_FACTOR).to_bits());
    }
}

#[test]
fn query_for_reads_the_stencil() {
    let (x, s) = point_over_floor(0.1);
    let p: Vec<Vec3> = (0..7).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
    for key in candidate_pairs(&x, None, &s, 1.0) {
        let q = query_for(&key, &x, &p, 0.2);
        for i in 0..4 {
            assert_eq!(q.start[i], x[key.verts[i]]);
            assert_eq!(q.displacement[i], p[key.verts[i]]);
        }
        assert_eq!(q.slack, 0.2);
    }
}

fn arb_query() -> impl Strategy<Value = ToiQuery> {
    let v = || (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, c)| Vec3::new(a, b, c));
    (
        prop_oneof![Just(QueryKind::PointTriangle), Just(QueryKind::EdgeEdge)],
        [v(), v(), v(), v()],
        [v(), v(), v(), v()],
    )
        .prop_map(|(kind, start, displacement)| ToiQuery {
            kind,
            start,
            displacement: displacement.map(|d| d * 2.0),
            slack: 0.1,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn toi_keeps_pairs_separated(q in arb_query()) {
        let d0 = oracle_distance(q.kind, &q.start);
        prop_assume!(d0 > 1e-3);
        let t = accd_toi(&q);
        prop_assert!((0.0..=1.0).contains(&t));
        for k in 0..=50 {
            let tau = t * k as f64 / 50.0;
            prop_assert!(oracle_distance(q.kind, &at(&q, tau)) > 0.0);
        }
        if t < 1.0 && t > 0.0 {
            prop_assert!(oracle_distance(q.kind, &at(&q, t)) >= q.slack * d0 * (1.0 - 1e-6));
        }
    }

    #[test]
    fn toi_ignores_common_motion(q in arb_query(), shift in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)) {
        let s = Vec3::new(shift.0, shift.1, shift.2);
        let moved = ToiQuery { displacement: q.displacement.map(|d| d + s), ..q };
        let (a, b) = (accd_toi(&q), accd_toi(&moved));
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}
