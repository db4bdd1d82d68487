//! Reduced coordinates, the incremental potential, and the pullback of
//! full-space surface quantities through the embedding.

use nalgebra::Matrix3;

use crate::contact::{
    barrier_energy_grad_hess, collect_pairs, friction_energy_grad_hess, ContactPair, ContactParams,
    FrictionDatum, PairDerivatives, Surface,
};
use crate::energy::{gravity_energy, ElasticBody, Mat12};
use crate::error::{Error, Result};
use crate::mesh::{Jacobian, MassModel};
use crate::sparse::BlockMatrix;
use crate::Vec3;

/// Map between reduced coordinates and surface positions.
pub trait Reduction: Sync {
    fn num_vertices(&self) -> usize;
    fn embed(&self, q: &[Vec3]) -> Vec<Vec3>;
    /// Accumulates `J^T g` into `out`.
    fn pull_gradient(&self, g: &[Vec3], out: &mut [Vec3]);
    /// Accumulates `J^T H J` for one pair block over the stencil `verts`.
    fn pull_pair_hessian(&self, verts: &[usize; 4], h: &Mat12, out: &mut BlockMatrix);
}

impl Reduction for Jacobian {
    fn num_vertices(&self) -> usize {
        self.rows.len()
    }

    fn embed(&self, q: &[Vec3]) -> Vec<Vec3> {
        self.apply(q)
    }

    fn pull_gradient(&self, g: &[Vec3], out: &mut [Vec3]) {
        self.apply_transpose(g, out);
    }

    fn pull_pair_hessian(&self, verts: &[usize; 4], h: &Mat12, out: &mut BlockMatrix) {
        for (a, &va) in verts.iter().enumerate() {
            for (b, &vb) in verts.iter().enumerate() {
                let block: Matrix3<f64> = h.fixed_view::<3, 3>(3 * a, 3 * b).into_owned();
                for &(n, wn) in &self.rows[va] {
                    for &(m, wm) in &self.rows[vb] {
                        out.add(n, m, block * (wn * wm));
                    }
                }
            }
        }
    }
}

/// Full-space assembly: every surface vertex is one reduced node. This is
/// the unreduced path, written without the Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectMap {
    pub node_of_vertex: Vec<usize>,
}

impl DirectMap {
    /// Extracts the vertex-to-node map of an identity Jacobian; `None` when
    /// some row is not a single unit weight.
    pub fn from_jacobian(j: &Jacobian) -> Option<Self> {
        j.rows
            .iter()
            .map(|row| match row.as_slice() {
                [(n, w)] if *w == 1.0 => Some(*n),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(|node_of_vertex| DirectMap { node_of_vertex })
    }
}

impl Reduction for DirectMap {
    fn num_vertices(&self) -> usize {
        self.node_of_vertex.len()
    }

    fn embed(&self, q: &[Vec3]) -> Vec<Vec3> {
        self.node_of_vertex.iter().map(|&n| q[n]).collect()
    }

    fn pull_gradient(&self, g: &[Vec3], out: &mut [Vec3]) {
        for (k, &n) in self.node_of_vertex.iter().enumerate() {
            out[n] += g[k];
        }
    }

    fn pull_pair_hessian(&self, verts: &[usize; 4], h: &Mat12, out: &mut BlockMatrix) {
        for (a, &va) in verts.iter().enumerate() {
            for (b, &vb) in verts.iter().enumerate() {
                out.add(
                    self.node_of_vertex[va],
                    self.node_of_vertex[vb],
                    h.fixed_view::<3, 3>(3 * a, 3 * b).into_owned(),
                );
            }
        }
    }
}

/// Per-body ranges into the global node and surface vertex arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyLayout {
    pub name: String,
    pub node_offset: usize,
    pub num_nodes: usize,
    pub vertex_offset: usize,
    pub num_vertices: usize,
}

/// Everything constant over a simulation: elastic bodies, masses, the
/// embedding, the collision surface and which nodes are scripted.
pub struct Assembly {
    pub layout: Vec<BodyLayout>,
    pub elastic: Vec<ElasticBody>,
    pub mass: MassModel,
    pub jacobian: Jacobian,
    pub surface: Surface,
    pub scripted: Vec<bool>,
    pub gravity: Vec3,
    pub contact: ContactParams,
}

impl Assembly {
    pub fn num_nodes(&self) -> usize {
        self.mass.masses.len()
    }

    pub fn free(&self) -> Vec<bool> {
        self.scripted.iter().map(|s| !s).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub q: Vec<Vec3>,
    pub qdot: Vec<Vec3>,
    /// Surface positions `x = J q`.
    pub x: Vec<Vec3>,
    pub step: usize,
    pub t: f64,
}

impl SimState {
    pub fn at_rest(q: Vec<Vec3>, reduction: &dyn Reduction) -> Self {
        let x = reduction.embed(&q);
        SimState {
            qdot: vec![Vec3::zeros(); q.len()],
            q,
            x,
            step: 0,
            t: 0.0,
        }
    }
}

/// Data frozen over one time step.
pub struct StepContext<'a> {
    pub assembly: &'a Assembly,
    pub reduction: &'a dyn Reduction,
    pub h: f64,
    /// `q^n + h qdot^n`.
    pub q_tilde: Vec<Vec3>,
    /// Surface positions at the start of the step.
    pub x_prev: Vec<Vec3>,
    pub friction: Vec<FrictionDatum>,
}

impl<'a> StepContext<'a> {
    pub fn new(assembly: &'a Assembly, reduction: &'a dyn Reduction, state: &SimState, h: f64) -> Result<Self> {
        let q_tilde = state.q.iter().zip(&state.qdot).map(|(q, v)| q + v * h).collect();
        let friction = if assembly.contact.mu > 0.0 {
            let pairs = collect_pairs(&state.x, &assembly.surface, assembly.contact.dhat, 0.0)?;
            crate::contact::friction_precompute(&state.x, &pairs, &assembly.contact)?
        } else {
            Vec::new()
        };
        Ok(StepContext {
            assembly,
            reduction,
            h,
            q_tilde,
            x_prev: state.x.clone(),
            friction,
        })
    }
}

/// Value, gradient and (optionally) Hessian of the incremental potential.
pub struct Evaluation {
    pub energy: f64,
    pub grad: Vec<Vec3>,
    pub hess: Option<BlockMatrix>,
    pub x: Vec<Vec3>,
    pub pairs: Vec<ContactPair>,
    /// Full-space contact contributions (barrier then friction), unscaled by
    /// `h^2`.
    pub contact: Vec<PairDerivatives>,
}

impl Evaluation {
    pub fn min_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.d).fold(f64::INFINITY, f64::min)
    }
}

fn inertia_and_gravity(ctx: &StepContext, q: &[Vec3]) -> f64 {
    let asm = ctx.assembly;
    let mut e = 0.0;
    for (i, (qi, qt)) in q.iter().zip(&ctx.q_tilde).enumerate() {
        if !asm.scripted[i] {
            e += 0.5 * asm.mass.masses[i] * (qi - qt).norm_squared();
        }
    }
    let free_mass = MassModel {
        masses: asm
            .mass
            .masses
            .iter()
            .zip(&asm.scripted)
            .map(|(&m, &s)| if s { 0.0 } else { m })
            .collect(),
    };
    e + ctx.h * ctx.h * gravity_energy(q, &free_mass, &asm.gravity)
}

fn elastic_energy(asm: &Assembly, q: &[Vec3]) -> f64 {
    asm.layout
        .iter()
        .zip(&asm.elastic)
        .map(|(l, body)| body.energy(&q[l.node_offset..l.node_offset + l.num_nodes]))
        .sum()
}

/// `E_IPC(q)`.
pub fn incremental_potential(ctx: &StepContext, q: &[Vec3]) -> Result<f64> {
    Ok(evaluate_with(ctx, q, false, false, false)?.energy)
}

/// Evaluates `E_IPC` and its reduced gradient; with `hessian` also the
/// SPD-projected reduced Hessian (or the exact one when `project` is false).
pub fn evaluate(ctx: &StepContext, q: &[Vec3], hessian: bool, project: bool) -> Result<Evaluation> {
    evaluate_with(ctx, q, true, hessian, project)
}

fn evaluate_with(ctx: &StepContext, q: &[Vec3], gradient: bool, hessian: bool, project: bool) -> Result<Evaluation> {
    let asm = ctx.assembly;
    let h2 = ctx.h * ctx.h;
    let x = ctx.reduction.embed(q);
    let pairs = collect_pairs(&x, &asm.surface, asm.contact.dhat, 0.0)?;
    let (barrier, barrier_parts) = barrier_energy_grad_hess(&x, &pairs, &asm.contact, project)?;
    let (friction, friction_parts) = friction_energy_grad_hess(&x, &ctx.x_prev, &ctx.friction, &asm.contact, ctx.h);
    let energy = inertia_and_gravity(ctx, q) + h2 * (elastic_energy(asm, q) + barrier + friction);
    if !energy.is_finite() {
        return Err(Error::NonpositiveDistance(0.0));
    }
    let mut contact = barrier_parts;
    contact.extend(friction_parts);
    let mut out = Evaluation {
        energy,
        grad: Vec::new(),
        hess: None,
        x,
        pairs,
        contact,
    };
    if gradient {
        out.grad = reduced_grad(ctx, q, &out.contact);
    }
    if hessian {
        out.hess = Some(reduced_hess(ctx, q, &out.contact, project));
    }
    Ok(out)
}

/// `M (q - q_tilde) - h^2 M g + h^2 grad Phi + h^2 J^T grad_x (B + D)`.
pub fn reduced_grad(ctx: &StepContext, q: &[Vec3], contact: &[PairDerivatives]) -> Vec<Vec3> {
    let asm = ctx.assembly;
    let h2 = ctx.h * ctx.h;
    let n = q.len();
    let mut elastic = vec![Vec3::zeros(); n];
    for (l, body) in asm.layout.iter().zip(&asm.elastic) {
        let range = l.node_offset..l.node_offset + l.num_nodes;
        body.add_gradient(&q[range.clone()], &mut elastic[range]);
    }
    let mut gx = vec![Vec3::zeros(); ctx.reduction.num_vertices()];
    for p in contact {
        for (a, &v) in p.verts.iter().enumerate() {
            gx[v] += p.grad.fixed_rows::<3>(3 * a);
        }
    }
    let mut pulled = vec![Vec3::zeros(); n];
    ctx.reduction.pull_gradient(&gx, &mut pulled);
    (0..n)
        .map(|i| {
            let mut g = (elastic[i] + pulled[i]) * h2;
            if !asm.scripted[i] {
                let m = asm.mass.masses[i];
                g += (q[i] - ctx.q_tilde[i]) * m - asm.gravity * (m * h2);
            }
            g
        })
        .collect()
}

/// `M + h^2 (H_elastic + J^T H_contact J)` as 3x3 blocks.
pub fn reduced_hess(ctx: &StepContext, q: &[Vec3], contact: &[PairDerivatives], project: bool) -> BlockMatrix {
    let asm = ctx.assembly;
    let h2 = ctx.h * ctx.h;
    let mut out = BlockMatrix::new(q.len());
    for (i, &m) in asm.mass.masses.iter().enumerate() {
        let m = if asm.scripted[i] { 0.0 } else { m };
        out.add(i, i, Matrix3::identity() * m);
    }
    for (l, body) in asm.layout.iter().zip(&asm.elastic) {
        let o = l.node_offset;
        for (t, block) in body.hessian_blocks(&q[o..o + l.num_nodes], project) {
            for a in 0..4 {
                for b in 0..4 {
                    out.add(o + t[a], o + t[b], block.fixed_view::<3, 3>(3 * a, 3 * b) * h2);
                }
            }
        }
    }
    for p in contact {
        ctx.reduction.pull_pair_hessian(&p.verts, &(p.hess * h2), &mut out);
    }
    out.compress();
    out
}
