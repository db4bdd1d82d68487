//! Built-in self-checks: finite-difference gradients, distance queries
//! against sampling, special-case equivalences and incline statics.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contact::{
    barrier_pair, edge_edge_distance, friction_pair, friction_precompute, point_triangle_distance, ContactPair,
    ContactParams, EeRegion, PairKey, PairKind, PtRegion,
};
use crate::energy::{ElasticBody, Material, Model};
use crate::error::{Error, Result};
use crate::mesh::EmbeddingMesh;
use crate::scene::{run, ReductionKind, RunOptions, Scene, SceneSpec};
use crate::subspace::{evaluate, incremental_potential, StepContext};
use crate::Vec3;

pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const DISTANCE_TOLERANCE: f64 = 1e-6;

pub const CHECKS: [&str; 12] = [
    "gradient/corotational",
    "gradient/orthogonality",
    "gradient/barrier-pt",
    "gradient/barrier-ee",
    "gradient/friction",
    "gradient/incremental-potential",
    "distance/point-triangle",
    "distance/edge-edge",
    "equivalence/identity-embedding",
    "equivalence/single-tet-affine",
    "statics/incline-20",
    "statics/incline-35",
];

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst measured value of the check's figure of merit.
    pub measured: f64,
    /// Pass bound on `measured` (upper bound, or lower bound for slides on
    /// the steep incline).
    pub bound: f64,
    pub samples: usize,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random states per gradient check.
    pub gradient_samples: usize,
    /// Random instances per distance check.
    pub distance_samples: usize,
    /// Name of a gradient check whose analytic gradient is deliberately
    /// perturbed, to confirm the check can fail.
    pub inject_fault: Option<String>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            gradient_samples: 100,
            distance_samples: 1000,
            inject_fault: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<32} {:>6} {:>12} {:>12} {:>8}  detail", "check", "result", "measured", "bound", "samples");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<32} {:>6} {:>12.3e} {:>12.3e} {:>8}  {}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.measured,
                c.bound,
                c.samples,
                c.detail
            );
        }
        out
    }
}

/// Runs every check in [`CHECKS`].
pub fn run_suite(opts: &VerifyOptions) -> Result<VerifyReport> {
    if let Some(f) = &opts.inject_fault {
        if !CHECKS.iter().any(|c| c.starts_with("gradient/") && c == f) {
            return Err(Error::InvalidScene(format!("no gradient check named `{f}`")));
        }
    }
    let fault = |name: &str| opts.inject_fault.as_deref() == Some(name);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.gradient_samples;
    let checks = vec![
        elastic_check("gradient/corotational", Model::Corotational, n, fault, &mut rng)?,
        elastic_check("gradient/orthogonality", Model::AffineOrthogonality, n, fault, &mut rng)?,
        barrier_check("gradient/barrier-pt", PairKind::PointTriangle, n, fault, &mut rng)?,
        barrier_check("gradient/barrier-ee", PairKind::EdgeEdge, n, fault, &mut rng)?,
        friction_check("gradient/friction", n, fault, &mut rng)?,
        potential_check("gradient/incremental-potential", n, fault, &mut rng)?,
        pt_distance_check(opts.distance_samples, &mut rng)?,
        ee_distance_check(opts.distance_samples, &mut rng)?,
        identity_check()?,
        affine_check()?,
        incline_check("statics/incline-20", 20.0)?,
        incline_check("statics/incline-35", 35.0)?,
    ];
    Ok(VerifyReport { checks })
}

/// Fourth-order central differences of `f` at `x`.
pub fn fd_gradient(f: &mut dyn FnMut(&[f64]) -> Result<f64>, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut y = x.to_vec();
    for i in 0..x.len() {
        let mut at = |s: f64| {
            y[i] = x[i] + s * step;
            f(&y)
        };
        let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
        y[i] = x[i];
        g[i] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * step);
    }
    Ok(g)
}

/// `|a - b|_inf / |b|_inf`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

fn unflatten(v: &[f64]) -> Vec<Vec3> {
    v.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

fn corrupt(g: &mut [f64], on: bool) {
    if on {
        g[0] += 1e-3 * g.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    }
}

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ) * scale
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    *nalgebra::Rotation3::from_scaled_axis(random_vec(rng, std::f64::consts::PI)).matrix()
}

fn summarize(name: &'static str, errors: &[f64], bound: f64, detail: String) -> CheckResult {
    let measured = errors.iter().copied().fold(0.0, f64::max);
    CheckResult {
        name,
        passed: !errors.is_empty() && measured <= bound,
        measured,
        bound,
        samples: errors.len(),
        detail,
    }
}

fn elastic_check(
    name: &'static str,
    model: Model,
    samples: usize,
    fault: impl Fn(&str) -> bool,
    rng: &mut ChaCha8Rng,
) -> Result<CheckResult> {
    let material = Material {
        model,
        young: 1e4,
        poisson: 0.45,
        density: 10.0,
        kappa_abd: 1e7,
    };
    let mut errors = Vec::with_capacity(samples);
    while errors.len() < samples {
        let rest: Vec<Vec3> = (0..4).map(|_| random_vec(rng, 1.0)).collect();
        let Ok(emb) = EmbeddingMesh::new(rest.clone(), vec![[0, 1, 2, 3]]) else {
            continue;
        };
        if emb.rest_volumes[0] < 0.05 {
            continue;
        }
        let body = ElasticBody::new(&emb, material)?;
        let f = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.random_range(-0.4..0.4));
        let r = random_rotation(rng);
        let shift = random_vec(rng, 1.0);
        let q: Vec<Vec3> = emb.vertices.iter().map(|x| r * f * x + shift).collect();
        let mut g = vec![Vec3::zeros(); 4];
        body.add_gradient(&q, &mut g);
        let mut g = flatten(&g);
        corrupt(&mut g, fault(name));
        let fd = fd_gradient(&mut |y| Ok(body.energy(&unflatten(y))), &flatten(&q), 1e-4)?;
        errors.push(relative_error(&g, &fd));
    }
    Ok(summarize(name, &errors, GRADIENT_TOLERANCE, "random tets, F = R (I + noise)".into()))
}

fn contact_params() -> ContactParams {
    ContactParams {
        kappa: 1e4,
        dhat: 1e-3,
        eps_v: 1e-3,
        mu: 0.5,
    }
}

/// A random stencil whose distance lies in `(0.05, 0.95) dhat`, with its
/// region tag as a string.
fn random_pair(kind: PairKind, dhat: f64, rng: &mut ChaCha8Rng) -> Result<([Vec3; 4], f64, String)> {
    loop {
        let scale = dhat * rng.random_range(1.0..3.0);
        let base = random_vec(rng, 1.0);
        let (x, d, tag) = match kind {
            PairKind::PointTriangle => {
                let t0 = base;
                let t1 = base + random_vec(rng, scale);
                let t2 = base + random_vec(rng, scale);
                let n = (t1 - t0).cross(&(t2 - t0));
                if n.norm() < 0.1 * scale * scale {
                    continue;
                }
                let (u, v) = (rng.random_range(-0.6..1.6), rng.random_range(-0.6..1.6));
                let p = t0 + (t1 - t0) * u + (t2 - t0) * v + n.normalize() * rng.random_range(-dhat..dhat);
                let r = point_triangle_distance(&p, &t0, &t1, &t2)?;
                ([p, t0, t1, t2], r.d2.sqrt(), format!("{:?}", r.region))
            }
            PairKind::EdgeEdge => {
                let a0 = base;
                let a1 = base + random_vec(rng, scale);
                let dir = random_vec(rng, scale);
                let s = rng.random_range(-0.6..1.6);
                let off = random_vec(rng, dhat);
                let b0 = a0 + (a1 - a0) * s + off - dir * rng.random_range(-0.6..1.6);
                let b1 = b0 + dir;
                let r = edge_edge_distance(&a0, &a1, &b0, &b1)?;
                ([a0, a1, b0, b1], r.d2.sqrt(), format!("{:?}", r.region))
            }
        };
        if d > 0.05 * dhat && d < 0.95 * dhat {
            return Ok((x, d, tag));
        }
    }
}

fn all_tags(kind: PairKind) -> Vec<String> {
    match kind {
        PairKind::PointTriangle => std::iter::once(PtRegion::Interior)
            .chain((0..3).map(PtRegion::Edge))
            .chain((0..3).map(PtRegion::Vertex))
            .map(|r| format!("{r:?}"))
            .collect(),
        PairKind::EdgeEdge => std::iter::once(EeRegion::Interior)
            .chain((0..4).map(EeRegion::EndpointEdge))
            .chain((0..4).map(EeRegion::EndpointEndpoint))
            .map(|r| format!("{r:?}"))
            .collect(),
    }
}

fn local_key(kind: PairKind) -> PairKey {
    PairKey {
        kind,
        primitives: [0, 1],
        verts: [0, 1, 2, 3],
    }
}

fn barrier_check(
    name: &'static str,
    kind: PairKind,
    samples: usize,
    fault: impl Fn(&str) -> bool,
    rng: &mut ChaCha8Rng,
) -> Result<CheckResult> {
    let params = contact_params();
    let key = local_key(kind);
    let tags = all_tags(kind);
    let mut seen = vec![0usize; tags.len()];
    let mut errors = Vec::new();
    let mut attempts = 0;
    while (errors.len() < samples || seen.contains(&0)) && attempts < 200 * samples {
        attempts += 1;
        let (x, d, tag) = random_pair(kind, params.dhat, rng)?;
        let slot = tags.iter().position(|t| *t == tag).expect("known tag");
        // keep sampling rare regions once the quota is met
        if errors.len() >= samples && seen[slot] > 0 {
            continue;
        }
        seen[slot] += 1;
        let pd = barrier_pair(&x, &key, &params, false)?;
        let mut g: Vec<f64> = pd.grad.iter().copied().collect();
        corrupt(&mut g, fault(name));
        let fd = fd_gradient(
            &mut |y| Ok(barrier_pair(&unflatten(y), &key, &params, false)?.energy),
            &flatten(&x),
            1e-4 * d,
        )?;
        errors.push(relative_error(&g, &fd));
    }
    let missing: Vec<&str> = tags
        .iter()
        .zip(&seen)
        .filter(|(_, &n)| n == 0)
        .map(|(t, _)| t.as_str())
        .collect();
    let mut r = summarize(name, &errors, GRADIENT_TOLERANCE, format!("{} regions", tags.len()));
    if !missing.is_empty() {
        r.passed = false;
        r.detail = format!("regions not sampled: {}", missing.join(", "));
    }
    Ok(r)
}

fn friction_check(
    name: &'static str,
    samples: usize,
    fault: impl Fn(&str) -> bool,
    rng: &mut ChaCha8Rng,
) -> Result<CheckResult> {
    let params = contact_params();
    let h = 0.01;
    let eh = params.eps_v * h;
    let mut errors = Vec::with_capacity(samples);
    let (mut sticking, mut sliding) = (0, 0);
    for i in 0..samples {
        let kind = if i % 2 == 0 {
            PairKind::PointTriangle
        } else {
            PairKind::EdgeEdge
        };
        let key = local_key(kind);
        let (x_prev, d, _) = random_pair(kind, params.dhat, rng)?;
        let data = friction_precompute(&x_prev, &[ContactPair { key, d }], &params)?;
        let datum = data[0];
        // displacement with a prescribed tangential magnitude
        let target = eh * if i % 4 < 2 { rng.random_range(0.1..0.9) } else { rng.random_range(1.1..4.0) };
        let dir = datum.basis * nalgebra::Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if dir.norm() == 0.0 {
            continue;
        }
        let wsum: f64 = datum.gamma.iter().map(|g| g * g).sum();
        let x: Vec<Vec3> = (0..4)
            .map(|k| x_prev[k] + dir.normalize() * (target * datum.gamma[k] / wsum) + random_vec(rng, 1e-3 * eh))
            .collect();
        let y = crate::contact::tangential_displacement(&x, &x_prev, &datum).norm();
        if y < eh {
            sticking += 1;
        } else {
            sliding += 1;
        }
        let pd = friction_pair(&x, &x_prev, &datum, params.mu, params.eps_v, h);
        let mut g: Vec<f64> = pd.grad.iter().copied().collect();
        corrupt(&mut g, fault(name));
        let fd = fd_gradient(
            &mut |z| Ok(friction_pair(&unflatten(z), &x_prev, &datum, params.mu, params.eps_v, h).energy),
            &flatten(&x),
            1e-5 * eh,
        )?;
        errors.push(relative_error(&g, &fd));
    }
    let mut r = summarize(
        name,
        &errors,
        GRADIENT_TOLERANCE,
        format!("{sticking} below and {sliding} above eps_v h"),
    );
    if sticking == 0 || sliding == 0 {
        r.passed = false;
    }
    Ok(r)
}

fn small_scene() -> Result<Scene> {
    let spec: SceneSpec = serde_json::from_value(serde_json::json!({
        "duration": 0.05,
        "contact": { "mu": 0.5 },
        "bodies": [
            { "name": "cube",
              "surface": { "box": { "size": [0.1, 0.1, 0.1], "res": [1, 1, 1] } },
              "embedding": "identity",
              "material": { "model": "corotational", "young": 1e5, "poisson": 0.3, "density": 1000.0 },
              "pose": { "translation": [0.0, 0.0, 0.0505], "rotation": [0.0, 0.0, 0.3] } },
            { "name": "floor",
              "surface": { "box": { "size": [0.4, 0.4, 0.05], "res": [1, 1, 1], "center": [0.0, 0.0, -0.025] } },
              "embedding": "single_tet",
              "material": { "model": "corotational", "young": 1e5, "poisson": 0.3, "density": 1000.0 },
              "script": { "vertices": "all", "keyframes": [ { "t": 0.0 } ] } }
        ]
    }))
    .map_err(|e| Error::InvalidScene(e.to_string()))?;
    Scene::build(spec, Path::new("."))
}

fn potential_check(
    name: &'static str,
    samples: usize,
    fault: impl Fn(&str) -> bool,
    rng: &mut ChaCha8Rng,
) -> Result<CheckResult> {
    let scene = small_scene()?;
    let asm = &scene.assembly;
    let mut state = scene.initial_state(&asm.jacobian);
    for v in state.qdot.iter_mut().take(8) {
        *v = random_vec(rng, 0.05);
    }
    let ctx = StepContext::new(asm, &asm.jacobian, &state, scene.solver.h)?;
    let free: Vec<usize> = (0..asm.num_nodes()).filter(|&i| !asm.scripted[i]).collect();
    let mut errors = Vec::with_capacity(samples);
    while errors.len() < samples {
        let mut q = state.q.clone();
        for &i in &free {
            q[i] += random_vec(rng, 1e-4);
        }
        let x = asm.jacobian.apply(&q);
        if crate::contact::collect_pairs(&x, &asm.surface, asm.contact.dhat, 0.0)?
            .iter()
            .any(|p| p.d < 0.05 * asm.contact.dhat)
        {
            continue;
        }
        let eval = evaluate(&ctx, &q, false, false)?;
        let mut g: Vec<f64> = free.iter().flat_map(|&i| [eval.grad[i].x, eval.grad[i].y, eval.grad[i].z]).collect();
        corrupt(&mut g, fault(name));
        let x0: Vec<f64> = free.iter().flat_map(|&i| [q[i].x, q[i].y, q[i].z]).collect();
        let fd = fd_gradient(
            &mut |y| {
                let mut qq = q.clone();
                for (k, &i) in free.iter().enumerate() {
                    qq[i] = Vec3::new(y[3 * k], y[3 * k + 1], y[3 * k + 2]);
                }
                incremental_potential(&ctx, &qq)
            },
            &x0,
            1e-7,
        )?;
        errors.push(relative_error(&g, &fd));
    }
    Ok(summarize(name, &errors, GRADIENT_TOLERANCE, "box on floor, friction lagged".into()))
}

/// Minimizes a convex function over `[lo, hi]^2` by grid search with
/// repeated zooming onto the best sample.
fn zoom_minimize(f: &dyn Fn(f64, f64) -> Option<f64>, lo: [f64; 2], hi: [f64; 2]) -> f64 {
    const N: usize = 24;
    let (mut lo, mut hi) = (lo, hi);
    let (global_lo, global_hi) = (lo, hi);
    let mut best = f64::INFINITY;
    let mut arg = lo;
    for _ in 0..50 {
        for i in 0..=N {
            for j in 0..=N {
                let a = lo[0] + (hi[0] - lo[0]) * i as f64 / N as f64;
                let b = lo[1] + (hi[1] - lo[1]) * j as f64 / N as f64;
                if let Some(v) = f(a, b) {
                    if v < best {
                        best = v;
                        arg = [a, b];
                    }
                }
            }
        }
        for k in 0..2 {
            let w = (hi[k] - lo[k]) / 4.0;
            lo[k] = (arg[k] - w).max(global_lo[k]);
            hi[k] = (arg[k] + w).min(global_hi[k]);
        }
    }
    best
}

fn random_config(rng: &mut ChaCha8Rng) -> [Vec3; 4] {
    let scale = 10f64.powf(rng.random_range(-3.0..1.0));
    let base = random_vec(rng, 1.0);
    [0, 1, 2, 3].map(|_| base + random_vec(rng, scale))
}

fn pt_distance_check(samples: usize, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut errors = Vec::with_capacity(samples);
    while errors.len() < samples {
        let [p, a, b, c] = random_config(rng);
        let Ok(r) = point_triangle_distance(&p, &a, &b, &c) else {
            continue;
        };
        let f = |u: f64, v: f64| (u + v <= 1.0).then(|| (a + (b - a) * u + (c - a) * v - p).norm());
        let oracle = zoom_minimize(&f, [0.0, 0.0], [1.0, 1.0]);
        errors.push((r.d2.sqrt() - oracle).abs() / oracle.max(f64::MIN_POSITIVE));
    }
    Ok(summarize(
        "distance/point-triangle",
        &errors,
        DISTANCE_TOLERANCE,
        "zoomed barycentric grid".into(),
    ))
}

fn ee_distance_check(samples: usize, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut errors = Vec::with_capacity(samples);
    while errors.len() < samples {
        let [a0, a1, b0, b1] = random_config(rng);
        let Ok(r) = edge_edge_distance(&a0, &a1, &b0, &b1) else {
            continue;
        };
        let f = |s: f64, t: f64| Some((a0 + (a1 - a0) * s - b0 - (b1 - b0) * t).norm());
        let oracle = zoom_minimize(&f, [0.0, 0.0], [1.0, 1.0]);
        errors.push((r.d2.sqrt() - oracle).abs() / oracle.max(f64::MIN_POSITIVE));
    }
    Ok(summarize(
        "distance/edge-edge",
        &errors,
        DISTANCE_TOLERANCE,
        "zoomed parameter grid".into(),
    ))
}

fn identity_check() -> Result<CheckResult> {
    let scene = small_scene()?;
    let opts = |reduction| RunOptions {
        record: true,
        reduction,
        ..RunOptions::default()
    };
    // the scripted floor uses a single tet, so compare the cube alone
    let direct_scene = {
        let mut spec = scene.spec.clone();
        spec.bodies[1].embedding = crate::scene::EmbeddingSpec::Identity;
        Scene::build(spec, Path::new("."))?
    };
    let a = run(&direct_scene, &opts(ReductionKind::Embedded))?;
    let b = run(&direct_scene, &opts(ReductionKind::Direct))?;
    let mut errors = Vec::new();
    for (fa, fb) in a.trajectory.frames.iter().zip(&b.trajectory.frames) {
        let scale = fa.iter().map(|v| v.amax()).fold(0.0, f64::max);
        let diff = fa.iter().zip(fb).map(|(u, v)| (u - v).amax()).fold(0.0, f64::max);
        errors.push(diff / scale);
    }
    Ok(summarize(
        "equivalence/identity-embedding",
        &errors,
        1e-12,
        "Jacobian path vs direct vertex map".into(),
    ))
}

/// Largest residual of the least-squares affine fit `x ~ A r + b`.
pub fn affine_fit_residual(rest: &[Vec3], current: &[Vec3]) -> f64 {
    let n = rest.len();
    let m = DMatrix::from_fn(n, 4, |i, j| if j < 3 { rest[i][j] } else { 1.0 });
    let rhs = DMatrix::from_fn(n, 3, |i, j| current[i][j]);
    let Ok(sol) = m.clone().svd(true, true).solve(&rhs, 1e-14) else {
        return f64::INFINITY;
    };
    let res = &m * sol - rhs;
    (0..n)
        .map(|i| Vec3::new(res[(i, 0)], res[(i, 1)], res[(i, 2)]).norm())
        .fold(0.0, f64::max)
}

fn affine_check() -> Result<CheckResult> {
    let mut spec = small_scene()?.spec;
    spec.duration = 0.3;
    spec.bodies[0].embedding = crate::scene::EmbeddingSpec::SingleTet;
    let scene = Scene::build(spec, Path::new("."))?;
    let log = run(
        &scene,
        &RunOptions {
            record: true,
            ..RunOptions::default()
        },
    )?;
    let l = &scene.assembly.layout[0];
    let range = l.vertex_offset..l.vertex_offset + l.num_vertices;
    let rest = &log.trajectory.frames[0][range.clone()];
    let errors: Vec<f64> = log
        .trajectory
        .frames
        .iter()
        .map(|f| affine_fit_residual(rest, &f[range.clone()]))
        .collect();
    Ok(summarize(
        "equivalence/single-tet-affine",
        &errors,
        1e-9,
        "affine fit residual (m)".into(),
    ))
}

/// Block of 1 kg on a plane tilted by `degrees`, mu = 0.5, one second.
pub fn incline_spec(degrees: f64) -> SceneSpec {
    let th = degrees.to_radians();
    let (c, s) = (th.cos(), th.sin());
    let local = [-0.8, 0.0, 0.0755];
    let center = [c * local[0] + s * local[2], 0.0, -s * local[0] + c * local[2]];
    serde_json::from_value(serde_json::json!({
        "duration": 1.0,
        "contact": { "kappa": 1e4, "dhat": 1e-3, "eps_v": 1e-3, "mu": 0.5 },
        "bodies": [
            { "name": "block",
              "surface": { "box": { "size": [0.1, 0.1, 0.1], "res": [1, 1, 1] } },
              "embedding": "identity",
              "material": { "model": "corotational", "young": 1e6, "poisson": 0.3, "density": 1000.0 },
              "pose": { "translation": center, "rotation": [0.0, th, 0.0] } },
            { "name": "plane",
              "surface": { "box": { "size": [3.0, 0.6, 0.05], "res": [1, 1, 1] } },
              "embedding": "single_tet",
              "material": { "model": "corotational", "young": 1e6, "poisson": 0.3, "density": 1000.0 },
              "pose": { "rotation": [0.0, th, 0.0] },
              "script": { "vertices": "all", "keyframes": [ { "t": 0.0 } ] } }
        ]
    }))
    .expect("static scene description")
}

/// Distance travelled by the centroid of body 0 along the plane direction.
pub fn slide_distance(scene: &Scene, log: &crate::scene::TrajectoryLog, degrees: f64) -> f64 {
    let th = degrees.to_radians();
    let down = Vec3::new(th.cos(), 0.0, -th.sin());
    let l = &scene.assembly.layout[0];
    let centroid = |f: &Vec<Vec3>| {
        f[l.vertex_offset..l.vertex_offset + l.num_vertices].iter().sum::<Vec3>() / l.num_vertices as f64
    };
    let frames = &log.trajectory.frames;
    (centroid(&frames[frames.len() - 1]) - centroid(&frames[0])).dot(&down)
}

fn incline_check(name: &'static str, degrees: f64) -> Result<CheckResult> {
    let scene = Scene::build(incline_spec(degrees), Path::new("."))?;
    let log = run(
        &scene,
        &RunOptions {
            record: true,
            ..RunOptions::default()
        },
    )?;
    let slide = slide_distance(&scene, &log, degrees);
    let sticks = degrees.to_radians().tan() < 0.5;
    let (passed, bound) = if sticks {
        (slide.abs() <= 1e-3, 1e-3)
    } else {
        (slide >= 1e-2, 1e-2)
    };
    Ok(CheckResult {
        name,
        passed,
        measured: slide,
        bound,
        samples: log.frames.len(),
        detail: if sticks {
            "slide over 1 s (m), at most".into()
        } else {
            "slide over 1 s (m), at least".into()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zoom_finds_interior_minimum() {
        let f = |a: f64, b: f64| Some((a - 0.3).powi(2) + (b - 0.7).powi(2) + 1.0);
        assert!((zoom_minimize(&f, [0.0, 0.0], [1.0, 1.0]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn affine_residual_of_affine_image_is_zero() {
        let rest: Vec<Vec3> = (0..8).map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, (i >> 2) as f64)).collect();
        let a = Matrix3::new(1.0, 0.2, 0.0, 0.0, 0.9, 0.1, 0.3, 0.0, 1.1);
        let cur: Vec<Vec3> = rest.iter().map(|r| a * r + Vec3::new(1.0, 2.0, 3.0)).collect();
        assert!(affine_fit_residual(&rest, &cur) < 1e-12);
        let mut bent = cur.clone();
        bent[7].x += 0.01;
        assert!(affine_fit_residual(&rest, &bent) > 1e-3);
    }
}
