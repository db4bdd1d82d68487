//! The simulation loop and its on-disk logs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::metric::Trajectory;
use super::{audit_intersections, Scene};
use crate::contact::{ContactPair, PairDerivatives, Surface};
use crate::error::{Error, Result};
use crate::mesh::io::{fmt17, write_obj};
use crate::solver::{step, StepStats};
use crate::subspace::{Reduction, SimState};
use crate::Vec3;

/// How surface positions are computed from the reduced coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReductionKind {
    /// The sparse embedding Jacobian.
    #[default]
    Embedded,
    /// Index lookup; only valid when every surface vertex is one node.
    Direct,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Directory for `forces.csv`, `stats.csv` and (optionally) frames.
    pub out_dir: Option<PathBuf>,
    pub write_frames: bool,
    /// Run the exact intersection audit on every frame.
    pub audit: bool,
    /// Keep every frame's surface positions in the returned log.
    pub record: bool,
    pub reduction: ReductionKind,
    /// Worker threads for the parallel loops; `None` uses the global pool.
    /// Results do not depend on this value.
    pub threads: Option<usize>,
}

/// Net contact force on body `a` exerted by body `b` (N).
#[derive(Clone, Debug, PartialEq)]
pub struct PairForce {
    pub a: usize,
    pub b: usize,
    pub force: Vec3,
    /// Active primitive pairs between the two bodies.
    pub n_pairs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub t: f64,
    pub stats: StepStats,
    pub forces: Vec<PairForce>,
}

#[derive(Clone, Debug, Default)]
pub struct TrajectoryLog {
    pub frames: Vec<FrameRecord>,
    /// Filled when [`RunOptions::record`] is set, including the initial frame.
    pub trajectory: Trajectory,
    /// `(frame, intersecting triangle pairs)` for frames that failed the audit.
    pub intersections: Vec<(usize, Vec<(usize, usize)>)>,
    pub final_state: Option<SimState>,
}

impl TrajectoryLog {
    pub fn diagnostics(&self) -> usize {
        self.frames.iter().filter(|f| f.stats.diagnostic.is_some()).count()
    }

    pub fn descent_violations(&self) -> usize {
        self.frames.iter().map(|f| f.stats.descent_violations).sum()
    }

    /// Time series of the force on body `a` from body `b`.
    pub fn force_series(&self, a: usize, b: usize) -> Vec<(f64, Vec3)> {
        self.frames
            .iter()
            .map(|f| {
                let force = f
                    .forces
                    .iter()
                    .find(|p| (p.a, p.b) == (a, b))
                    .map(|p| p.force)
                    .or_else(|| f.forces.iter().find(|p| (p.a, p.b) == (b, a)).map(|p| -p.force))
                    .unwrap_or_else(Vec3::zeros);
                (f.t, force)
            })
            .collect()
    }
}

/// Body pair (lower index first) for a stencil spanning exactly two bodies.
fn body_pair(verts: &[usize; 4], surface: &Surface) -> Option<(usize, usize)> {
    let bodies = verts.map(|v| surface.vertex_body[v]);
    let lo = *bodies.iter().min()?;
    let hi = *bodies.iter().max()?;
    (lo != hi && bodies.iter().all(|&b| b == lo || b == hi)).then_some((lo, hi))
}

/// Per body pair `a < b`, the force on `a` from `b`: minus the gradient of
/// the barrier and friction energies over `a`'s vertices. Every pair of
/// bodies gets an entry.
pub fn contact_forces(
    contact: &[PairDerivatives],
    pairs: &[ContactPair],
    surface: &Surface,
    num_bodies: usize,
    dhat: f64,
) -> Vec<PairForce> {
    let mut map: BTreeMap<(usize, usize), PairForce> = BTreeMap::new();
    for a in 0..num_bodies {
        for b in a + 1..num_bodies {
            map.insert(
                (a, b),
                PairForce {
                    a,
                    b,
                    force: Vec3::zeros(),
                    n_pairs: 0,
                },
            );
        }
    }
    for pd in contact {
        let Some(key) = body_pair(&pd.verts, surface) else {
            continue;
        };
        let entry = map.get_mut(&key).expect("body pair");
        for (k, &v) in pd.verts.iter().enumerate() {
            if surface.vertex_body[v] == key.0 {
                entry.force -= pd.grad.fixed_rows::<3>(3 * k).into_owned();
            }
        }
    }
    for p in pairs.iter().filter(|p| p.d < dhat) {
        if let Some(key) = body_pair(&p.key.verts, surface) {
            map.get_mut(&key).expect("body pair").n_pairs += 1;
        }
    }
    map.into_values().collect()
}

struct Writers {
    dir: PathBuf,
    forces: BufWriter<File>,
    stats: BufWriter<File>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

impl Writers {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut forces = create(&dir.join("forces.csv"))?;
        let mut stats = create(&dir.join("stats.csv"))?;
        writeln!(forces, "t,pair,fx,fy,fz,n_pairs").map_err(|e| Error::io(dir.join("forces.csv"), e))?;
        writeln!(stats, "t,newton_iters,ls_trials,min_dist,wall_ms").map_err(|e| Error::io(dir.join("stats.csv"), e))?;
        Ok(Writers {
            dir: dir.to_path_buf(),
            forces,
            stats,
        })
    }

    fn frame(&mut self, scene: &Scene, rec: &FrameRecord) -> Result<()> {
        let t = fmt17(rec.t);
        for f in &rec.forces {
            writeln!(
                self.forces,
                "{t},{}|{},{},{},{},{}",
                scene.bodies[f.a].name,
                scene.bodies[f.b].name,
                fmt17(f.force.x),
                fmt17(f.force.y),
                fmt17(f.force.z),
                f.n_pairs
            )
            .map_err(|e| Error::io(self.dir.join("forces.csv"), e))?;
        }
        let s = &rec.stats;
        writeln!(
            self.stats,
            "{t},{},{},{},{}",
            s.newton_iters,
            s.ls_trials,
            fmt17(s.min_dist),
            fmt17(s.wall_ms)
        )
        .map_err(|e| Error::io(self.dir.join("stats.csv"), e))
    }

    fn obj(&self, scene: &Scene, index: usize, x: &[Vec3]) -> Result<()> {
        let path = self.dir.join(format!("frame_{index:06}.obj"));
        std::fs::write(&path, write_obj(x, &scene.assembly.surface.triangles)).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.forces.flush().map_err(|e| Error::io(self.dir.join("forces.csv"), e))?;
        self.stats.flush().map_err(|e| Error::io(self.dir.join("stats.csv"), e))
    }
}

/// Runs the scene for `floor(T/h)` steps.
pub fn run(scene: &Scene, opts: &RunOptions) -> Result<TrajectoryLog> {
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidScene(format!("thread pool: {e}")))?
            .install(|| run_on_current_pool(scene, opts)),
        None => run_on_current_pool(scene, opts),
    }
}

fn run_on_current_pool(scene: &Scene, opts: &RunOptions) -> Result<TrajectoryLog> {
    let direct;
    let reduction: &dyn Reduction = match opts.reduction {
        ReductionKind::Embedded => &scene.assembly.jacobian,
        ReductionKind::Direct => {
            direct = scene
                .direct_map()
                .ok_or_else(|| Error::InvalidScene("direct reduction needs one node per surface vertex".into()))?;
            &direct
        }
    };
    let mut writers = opts.out_dir.as_deref().map(Writers::new).transpose()?;
    let mut state = scene.initial_state(reduction);
    let mut log = TrajectoryLog::default();
    let h = scene.solver.h;
    if opts.record {
        log.trajectory.dt = h;
        log.trajectory.frames.push(state.x.clone());
    }
    if let Some(w) = writers.as_ref().filter(|_| opts.write_frames) {
        w.obj(scene, 0, &state.x)?;
    }
    let surface = &scene.assembly.surface;
    for n in 0..scene.num_steps() {
        let t = (n + 1) as f64 * h;
        let targets = scene.targets(t);
        let out = step(&scene.assembly, reduction, &state, &targets, &scene.solver).map_err(|e| Error::Step {
            frame: n + 1,
            source: Box::new(e),
        })?;
        let forces = contact_forces(
            &out.evaluation.contact,
            &out.evaluation.pairs,
            surface,
            scene.bodies.len(),
            scene.assembly.contact.dhat,
        );
        state = out.state;
        if opts.audit {
            let hits = audit_intersections(&state.x, surface);
            if !hits.is_empty() {
                log.intersections.push((n + 1, hits));
            }
        }
        let rec = FrameRecord {
            t,
            stats: out.stats,
            forces,
        };
        if let Some(w) = writers.as_mut() {
            w.frame(scene, &rec)?;
            if opts.write_frames {
                w.obj(scene, n + 1, &state.x)?;
            }
        }
        if opts.record {
            log.trajectory.frames.push(state.x.clone());
        }
        log.frames.push(rec);
    }
    if let Some(w) = writers {
        w.finish()?;
    }
    log.final_state = Some(state);
    Ok(log)
}
