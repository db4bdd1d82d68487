//! Scene description, loading, scripted kinematics and the simulation loop.
//!
//! Scene files are JSON documents:
//!
//! ```json
//! {
//!   "duration": 1.0,
//!   "gravity": [0, 0, -9.81],
//!   "contact": { "kappa": 1e4, "dhat": 1e-3, "eps_v": 1e-3, "mu": 0.5 },
//!   "solver": { "h": 0.01 },
//!   "bodies": [
//!     { "name": "box",
//!       "surface": { "box": { "size": [0.1, 0.1, 0.1], "res": [2, 2, 2] } },
//!       "embedding": "single_tet",
//!       "material": { "model": "corotational", "young": 1e5, "poisson": 0.3, "density": 1000 },
//!       "pose": { "translation": [0, 0, 0.0505] } }
//!   ]
//! }
//! ```
//!
//! Units are SI throughout (m, s, kg, Pa). Unknown keys are rejected.

pub mod audit;
pub mod metric;
pub mod run;
pub mod script;
pub mod study;

use std::path::{Path, PathBuf};

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

pub use self::audit::audit_intersections;
pub use self::metric::{error_metric, fit_slope, Trajectory};
pub use self::run::{contact_forces, run, FrameRecord, PairForce, ReductionKind, RunOptions, TrajectoryLog};
use self::script::{Keyframe, ScriptTrack};
pub use self::study::{convergence, ConvergenceReport, ConvergenceRow};
use crate::contact::{collect_pairs, ContactParams, Surface};
use crate::energy::{ElasticBody, Material, Model};
use crate::error::{Error, Result};
use crate::mesh::{self, io, shapes, Binding, CollisionMesh, EmbeddingMesh, Jacobian, MassModel};
use crate::solver::SolverConfig;
use crate::subspace::{Assembly, BodyLayout, DirectMap, Reduction, SimState};
use crate::Vec3;

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Simulated time T (s).
    pub duration: f64,
    /// m/s^2.
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub contact: ContactSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    pub bodies: Vec<BodySpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactSpec {
    /// kg/s^2.
    pub kappa: f64,
    /// m.
    pub dhat: f64,
    /// m/s.
    pub eps_v: f64,
    pub mu: f64,
}

impl Default for ContactSpec {
    fn default() -> Self {
        ContactSpec {
            kappa: 1e4,
            dhat: 1e-3,
            eps_v: 1e-3,
            mu: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub h: f64,
    pub tol_v: f64,
    pub max_newton: usize,
    pub beta: f64,
    pub armijo: f64,
    pub ccd_slack: f64,
    pub ccd_factor: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = SolverConfig::default();
        SolverSpec {
            h: c.h,
            tol_v: c.tol_v,
            max_newton: c.max_newton,
            beta: c.beta,
            armijo: c.armijo,
            ccd_slack: c.ccd_slack,
            ccd_factor: c.ccd_factor,
        }
    }
}

impl From<SolverSpec> for SolverConfig {
    fn from(s: SolverSpec) -> Self {
        SolverConfig {
            h: s.h,
            tol_v: s.tol_v,
            max_newton: s.max_newton,
            beta: s.beta,
            armijo: s.armijo,
            ccd_slack: s.ccd_slack,
            ccd_factor: s.ccd_factor,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub name: String,
    pub surface: SurfaceSpec,
    pub embedding: EmbeddingSpec,
    pub material: MaterialSpec,
    #[serde(default)]
    pub pose: PoseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<ScriptSpec>,
    #[serde(default = "yes")]
    pub self_contact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub size: [f64; 3],
    pub res: [usize; 3],
    #[serde(default)]
    pub center: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSpec {
    pub radius: f64,
    pub subdivisions: usize,
    #[serde(default)]
    pub center: [f64; 3],
    /// Relative bump height; zero gives a geodesic sphere.
    #[serde(default)]
    pub amplitude: f64,
}

/// Collision surface source. Paths are relative to the scene file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Obj(PathBuf),
    Box(BoxSpec),
    Sphere(SphereSpec),
    Union(Vec<SurfaceSpec>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub res: [usize; 3],
    /// Growth of the surface bounding box (m); defaults to 1% of its largest side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSpec {
    /// Full-space body: a box surface gets the matching tet grid and every
    /// collision vertex is one reduced node.
    Identity,
    /// Full-space body over a tet mesh whose vertices include every surface
    /// vertex exactly.
    IdentityTet(PathBuf),
    /// One enclosing tetrahedron (affine body).
    SingleTet,
    /// Embedding tet mesh from a file.
    Tet(PathBuf),
    /// Regular grid around the surface.
    BoxGrid(GridSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Corotational,
    Orthogonality,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub model: ModelSpec,
    /// Pa.
    pub young: f64,
    pub poisson: f64,
    /// kg/m^3.
    pub density: f64,
    /// Pa; orthogonality stiffness.
    #[serde(default)]
    pub kappa_abd: f64,
}

impl From<MaterialSpec> for Material {
    fn from(m: MaterialSpec) -> Self {
        Material {
            model: match m.model {
                ModelSpec::Corotational => Model::Corotational,
                ModelSpec::Orthogonality => Model::AffineOrthogonality,
            },
            young: m.young,
            poisson: m.poisson,
            density: m.density,
            kappa_abd: m.kappa_abd,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseSpec {
    /// m.
    pub translation: [f64; 3],
    /// Axis-angle (rad), applied before the translation.
    pub rotation: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllKeyword {
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexSelector {
    All(AllKeyword),
    /// Embedding vertex indices of the body.
    List(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeSpec {
    pub t: f64,
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSpec {
    pub vertices: VertexSelector,
    pub keyframes: Vec<KeyframeSpec>,
}

/// One loaded body in its rest pose.
#[derive(Clone, Debug)]
pub struct SceneBody {
    pub name: String,
    /// Collision surface with body-local vertex indices.
    pub collision: CollisionMesh,
    pub embedding: EmbeddingMesh,
    pub binding: Binding,
    pub material: Material,
    pub scripted: bool,
}

pub struct Scene {
    pub spec: SceneSpec,
    pub bodies: Vec<SceneBody>,
    pub assembly: Assembly,
    pub q0: Vec<Vec3>,
    pub scripts: Vec<ScriptTrack>,
    pub solver: SolverConfig,
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Reads and validates a scene document without building it.
pub fn load_spec(path: &Path) -> Result<SceneSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spec(&text, path)
}

pub fn parse_spec(text: &str, origin: &Path) -> Result<SceneSpec> {
    serde_json::from_str(text).map_err(|e| Error::parse(origin, e.line(), e.column(), e.to_string()))
}

/// Loads a scene file, builds every body and audits the initial state.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let spec = load_spec(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Scene::build(spec, base)
}

fn build_surface(spec: &SurfaceSpec, base: &Path) -> Result<CollisionMesh> {
    match spec {
        SurfaceSpec::Obj(p) => {
            let (v, f) = io::read_obj(&base.join(p))?;
            CollisionMesh::new(v, f)
        }
        SurfaceSpec::Box(b) => shapes::box_surface(v3(b.size), b.res, v3(b.center)),
        SurfaceSpec::Sphere(s) => {
            if s.amplitude == 0.0 {
                shapes::icosphere(s.radius, s.subdivisions, v3(s.center))
            } else {
                shapes::blob(s.radius, s.subdivisions, s.amplitude, v3(s.center))
            }
        }
        SurfaceSpec::Union(parts) => {
            let parts = parts.iter().map(|p| build_surface(p, base)).collect::<Result<Vec<_>>>()?;
            shapes::union(&parts)
        }
    }
}

fn default_padding(points: &[Vec3]) -> f64 {
    let (lo, hi) = mesh::bounding_box(points);
    0.01 * (hi - lo).max()
}

fn build_body(spec: &BodySpec, base: &Path) -> Result<SceneBody> {
    let rotation = *Rotation3::from_scaled_axis(v3(spec.pose.rotation)).matrix();
    let translation = v3(spec.pose.translation);
    let mut collision = build_surface(&spec.surface, base)?;
    collision.transform(&rotation, &translation);
    let (embedding, binding) = match &spec.embedding {
        EmbeddingSpec::Identity => {
            let SurfaceSpec::Box(b) = &spec.surface else {
                return Err(Error::InvalidScene(format!(
                    "body `{}`: identity embedding needs a box surface or `identity_tet`",
                    spec.name
                )));
            };
            let half = v3(b.size) / 2.0;
            let mut grid = shapes::box_grid(v3(b.center) - half, v3(b.center) + half, b.res)?;
            grid.transform(&rotation, &translation);
            let binding = Binding::coincident(&collision, &grid)?;
            (grid, binding)
        }
        EmbeddingSpec::IdentityTet(p) => {
            let (v, t) = io::read_tet(&base.join(p))?;
            let mut emb = EmbeddingMesh::new(v, t)?;
            emb.transform(&rotation, &translation);
            let binding = Binding::coincident(&collision, &emb)?;
            (emb, binding)
        }
        EmbeddingSpec::SingleTet => {
            let emb = shapes::enclosing_tet(&collision.vertices, default_padding(&collision.vertices))?;
            let binding = mesh::bind(&collision, &emb)?;
            (emb, binding)
        }
        EmbeddingSpec::Tet(p) => {
            let (v, t) = io::read_tet(&base.join(p))?;
            let mut emb = EmbeddingMesh::new(v, t)?;
            emb.transform(&rotation, &translation);
            let binding = mesh::bind(&collision, &emb)?;
            (emb, binding)
        }
        EmbeddingSpec::BoxGrid(g) => {
            let pad = g.padding.unwrap_or_else(|| default_padding(&collision.vertices));
            let emb = shapes::enclosing_grid(&collision.vertices, g.res, pad)?;
            let binding = mesh::bind(&collision, &emb)?;
            (emb, binding)
        }
    };
    let material: Material = spec.material.into();
    material.validate()?;
    Ok(SceneBody {
        name: spec.name.clone(),
        collision,
        embedding,
        binding,
        material,
        scripted: spec.script.is_some(),
    })
}

impl Scene {
    /// Builds all bodies from `spec`, resolving mesh paths against `base`.
    pub fn build(spec: SceneSpec, base: &Path) -> Result<Scene> {
        if !(spec.duration > 0.0) {
            return Err(Error::InvalidScene("duration must be positive".into()));
        }
        if spec.bodies.is_empty() {
            return Err(Error::InvalidScene("scene has no bodies".into()));
        }
        let contact = ContactParams {
            kappa: spec.contact.kappa,
            dhat: spec.contact.dhat,
            eps_v: spec.contact.eps_v,
            mu: spec.contact.mu,
        };
        contact.validate()?;
        let solver: SolverConfig = spec.solver.into();
        solver.validate()?;

        let mut bodies = Vec::with_capacity(spec.bodies.len());
        for b in &spec.bodies {
            if bodies.iter().any(|o: &SceneBody| o.name == b.name) {
                return Err(Error::InvalidScene(format!("duplicate body name `{}`", b.name)));
            }
            bodies.push(build_body(b, base)?);
        }

        let mut layout = Vec::new();
        let mut elastic = Vec::new();
        let mut masses = Vec::new();
        let mut jacobians = Vec::new();
        let mut surface = Surface::default();
        let mut q0 = Vec::new();
        let mut scripted = Vec::new();
        let mut scripts = Vec::new();
        for (bi, (body, bspec)) in bodies.iter().zip(&spec.bodies).enumerate() {
            let node_offset = q0.len();
            let vertex_offset = surface.num_vertices;
            let n_nodes = body.embedding.vertices.len();
            layout.push(BodyLayout {
                name: body.name.clone(),
                node_offset,
                num_nodes: n_nodes,
                vertex_offset,
                num_vertices: body.collision.vertices.len(),
            });
            elastic.push(ElasticBody::new(&body.embedding, body.material)?);
            masses.extend(mesh::lump_masses(&body.embedding, body.material.density).masses);
            jacobians.push(mesh::jacobian(&body.binding, n_nodes));
            q0.extend_from_slice(&body.embedding.vertices);
            let mut body_scripted = vec![false; n_nodes];
            if let Some(s) = &bspec.script {
                let local: Vec<usize> = match &s.vertices {
                    VertexSelector::All(_) => (0..n_nodes).collect(),
                    VertexSelector::List(l) => l.clone(),
                };
                if let Some(bad) = local.iter().find(|&&i| i >= n_nodes) {
                    return Err(Error::InvalidScene(format!(
                        "body `{}`: scripted vertex {bad} out of range",
                        body.name
                    )));
                }
                for &i in &local {
                    body_scripted[i] = true;
                }
                let keyframes = s
                    .keyframes
                    .iter()
                    .map(|k| Keyframe {
                        t: k.t,
                        translation: v3(k.translation),
                        rotation: v3(k.rotation),
                    })
                    .collect();
                let rest = local.iter().map(|&i| body.embedding.vertices[i]).collect();
                scripts.push(ScriptTrack::new(
                    local.iter().map(|&i| i + node_offset).collect(),
                    rest,
                    keyframes,
                )?);
            }
            surface
                .triangles
                .extend(body.collision.triangles.iter().map(|t| t.map(|v| v + vertex_offset)));
            surface
                .edges
                .extend(body.collision.edges.iter().map(|e| e.map(|v| v + vertex_offset)));
            surface
                .vertex_body
                .extend(std::iter::repeat_n(bi, body.collision.vertices.len()));
            surface.kinematic.extend(
                body.binding
                    .nodes
                    .iter()
                    .zip(&body.binding.weights)
                    .map(|(nodes, w)| (0..4).all(|j| w[j] == 0.0 || body_scripted[nodes[j]])),
            );
            surface.self_contact.push(bspec.self_contact);
            surface.num_vertices += body.collision.vertices.len();
            scripted.extend(body_scripted);
        }

        let assembly = Assembly {
            layout,
            elastic,
            mass: MassModel { masses },
            jacobian: Jacobian::stack(&jacobians),
            surface,
            scripted,
            gravity: v3(spec.gravity),
            contact,
        };
        let scene = Scene {
            spec,
            bodies,
            assembly,
            q0,
            scripts,
            solver,
        };
        scene.check_initial_state()?;
        Ok(scene)
    }

    fn check_initial_state(&self) -> Result<()> {
        let x = self.assembly.jacobian.apply(&self.q0);
        let surface = &self.assembly.surface;
        let name = |v: usize| &self.bodies[surface.vertex_body[v]].name;
        if let Some(&(i, j)) = audit_intersections(&x, surface).first() {
            let (a, b) = (surface.triangles[i][0], surface.triangles[j][0]);
            return Err(Error::InitialIntersection(format!(
                "triangle {i} of `{}` intersects triangle {j} of `{}`",
                name(a),
                name(b)
            )));
        }
        let pairs = collect_pairs(&x, surface, self.assembly.contact.dhat, 0.0)?;
        if let Some(p) = pairs.iter().find(|p| !(p.d > 0.0)) {
            return Err(Error::InitialIntersection(format!(
                "{:?} pair {:?} between `{}` and `{}` touches",
                p.key.kind,
                p.key.primitives,
                name(p.key.verts[0]),
                name(p.key.verts[3])
            )));
        }
        Ok(())
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    /// Reduced coordinates with every scripted node at its pose for time `t`.
    pub fn targets(&self, t: f64) -> Vec<Vec3> {
        let mut q = self.q0.clone();
        for s in &self.scripts {
            s.apply(t, &mut q);
        }
        q
    }

    /// Number of steps `floor(T / h)`.
    pub fn num_steps(&self) -> usize {
        (self.spec.duration / self.solver.h + 1e-9).floor() as usize
    }

    pub fn direct_map(&self) -> Option<DirectMap> {
        DirectMap::from_jacobian(&self.assembly.jacobian)
    }

    pub fn initial_state(&self, reduction: &dyn Reduction) -> SimState {
        SimState::at_rest(self.targets(0.0), reduction)
    }
}
