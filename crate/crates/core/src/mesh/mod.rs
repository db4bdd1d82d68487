//! Geometry containers and the embedding of a high-resolution collision
//! surface into a coarse tetrahedral mesh.
//!
//! Every collision vertex `x_k` is expressed as a fixed barycentric
//! combination of the four vertices of one embedding tetrahedron, so the
//! full-space surface is a constant linear map `x = J q` of the stacked
//! embedding vertex positions `q`.

pub mod io;
pub mod shapes;

use std::collections::{BTreeSet, HashMap};

use nalgebra::{Matrix3, Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::Vec3;

/// Maximum signed distance (m) a collision vertex may lie outside its
/// embedding tetrahedron.
pub const BIND_TOLERANCE: f64 = 1e-6;

/// Volumes below this magnitude (m^3) are treated as degenerate.
pub const DEGENERATE_VOLUME: f64 = 1e-14;

/// High-resolution triangle surface carrying the contact primitives.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    /// Unique undirected edges, each stored with `e[0] < e[1]`, sorted.
    pub edges: Vec<[usize; 2]>,
}

impl CollisionMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {i} references a vertex beyond {n}"
                )));
            }
            let [a, b, c] = t.map(|v| vertices[v]);
            if (b - a).cross(&(c - a)).norm() <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {i} has zero area")));
            }
        }
        let edges = unique_edges(&triangles);
        Ok(CollisionMesh {
            vertices,
            triangles,
            edges,
        })
    }

    /// Applies `x -> R x + t` to every vertex.
    pub fn transform(&mut self, rotation: &Matrix3<f64>, translation: &Vec3) {
        for v in &mut self.vertices {
            *v = rotation * *v + translation;
        }
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        bounding_box(&self.vertices)
    }

    /// Volume enclosed by a closed, outward-oriented surface.
    pub fn enclosed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| self.vertices[v]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }
}

fn unique_edges(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut set = BTreeSet::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            set.insert([a.min(b), a.max(b)]);
        }
    }
    set.into_iter().collect()
}

pub(crate) fn bounding_box(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Coarse tetrahedral mesh whose vertex positions are the reduced coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub rest_volumes: Vec<f64>,
    /// Indices of tets whose first two vertices were swapped at load time to
    /// make the signed rest volume positive.
    pub reoriented: Vec<usize>,
}

impl EmbeddingMesh {
    pub fn new(vertices: Vec<Vec3>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        let n = vertices.len();
        let mut rest_volumes = Vec::with_capacity(tets.len());
        let mut reoriented = Vec::new();
        for (i, t) in tets.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "tet {i} references a vertex beyond {n}"
                )));
            }
            let [a, b, c, d] = t.map(|v| vertices[v]);
            let mut volume = rest_tet_volume(&a, &b, &c, &d)?;
            if volume < 0.0 {
                t.swap(0, 1);
                volume = -volume;
                reoriented.push(i);
            }
            rest_volumes.push(volume);
        }
        Ok(EmbeddingMesh {
            vertices,
            tets,
            rest_volumes,
            reoriented,
        })
    }

    pub fn transform(&mut self, rotation: &Matrix3<f64>, translation: &Vec3) {
        for v in &mut self.vertices {
            *v = rotation * *v + translation;
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.rest_volumes.iter().sum()
    }

    /// Extracts the boundary triangles (faces used by exactly one tet),
    /// oriented outward.
    pub fn boundary_triangles(&self) -> Vec<[usize; 3]> {
        let mut faces: HashMap<[usize; 3], ([usize; 3], usize)> = HashMap::new();
        for t in &self.tets {
            // outward faces of a positively oriented tet
            let local = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];
            for f in local {
                let face = [t[f[0]], t[f[1]], t[f[2]]];
                let mut key = face;
                key.sort_unstable();
                faces.entry(key).or_insert((face, 0)).1 += 1;
            }
        }
        let mut out: Vec<_> = faces
            .into_iter()
            .filter(|(_, (_, count))| *count == 1)
            .map(|(key, (face, _))| (key, face))
            .collect();
        out.sort_unstable_by_key(|(key, _)| *key);
        out.into_iter().map(|(_, face)| face).collect()
    }
}

/// Signed volume `det(D0) / 6` of the tetrahedron `(p0, p1, p2, p3)`.
pub fn rest_tet_volume(p0: &Vec3, p1: &Vec3, p2: &Vec3, p3: &Vec3) -> Result<f64> {
    let volume = edge_matrix(p0, p1, p2, p3).determinant() / 6.0;
    if volume.abs() < DEGENERATE_VOLUME {
        return Err(Error::DegenerateTet { volume });
    }
    Ok(volume)
}

/// `[p1 - p0, p2 - p0, p3 - p0]` as columns.
pub fn edge_matrix(p0: &Vec3, p1: &Vec3, p2: &Vec3, p3: &Vec3) -> Matrix3<f64> {
    Matrix3::from_columns(&[p1 - p0, p2 - p0, p3 - p0])
}

/// Per-collision-vertex embedding tetrahedron and barycentric weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    pub tet: Vec<usize>,
    /// Embedding vertex indices of `tet[k]`, in the order the weights refer to.
    pub nodes: Vec<[usize; 4]>,
    pub weights: Vec<[f64; 4]>,
}

impl Binding {
    pub fn len(&self) -> usize {
        self.tet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tet.is_empty()
    }

    /// Binds each collision vertex with weight one to a coincident embedding
    /// vertex. This is the full-space special case of the embedding.
    pub fn coincident(col: &CollisionMesh, emb: &EmbeddingMesh) -> Result<Self> {
        let key = |v: &Vec3| [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
        let mut by_position = HashMap::new();
        for (i, v) in emb.vertices.iter().enumerate() {
            by_position.entry(key(v)).or_insert(i);
        }
        let mut tet_of_node = vec![usize::MAX; emb.vertices.len()];
        for (ti, t) in emb.tets.iter().enumerate() {
            for &v in t {
                if tet_of_node[v] == usize::MAX {
                    tet_of_node[v] = ti;
                }
            }
        }
        let mut binding = Binding {
            tet: Vec::with_capacity(col.vertices.len()),
            nodes: Vec::with_capacity(col.vertices.len()),
            weights: Vec::with_capacity(col.vertices.len()),
        };
        for (k, x) in col.vertices.iter().enumerate() {
            let node = *by_position.get(&key(x)).ok_or(Error::UnboundVertex(k))?;
            let ti = tet_of_node[node];
            if ti == usize::MAX {
                return Err(Error::UnboundVertex(k));
            }
            let nodes = emb.tets[ti];
            let mut weights = [0.0; 4];
            let slot = nodes.iter().position(|&v| v == node).expect("node in its tet");
            weights[slot] = 1.0;
            binding.tet.push(ti);
            binding.nodes.push(nodes);
            binding.weights.push(weights);
        }
        Ok(binding)
    }
}

/// Finds a containing tetrahedron for every collision vertex and solves the
/// 4x4 barycentric system for its weights.
///
/// Containment is searched brute force. Among candidate tets the one with the
/// smallest distance outside is taken, ties broken by the largest minimum
/// weight and then by the lowest tet index.
pub fn bind(col: &CollisionMesh, emb: &EmbeddingMesh) -> Result<Binding> {
    struct Prepared {
        origin: Vec3,
        inverse: Matrix3<f64>,
        heights: [f64; 4],
    }
    let prepared: Vec<Prepared> = emb
        .tets
        .iter()
        .zip(&emb.rest_volumes)
        .map(|(t, &volume)| {
            let [a, b, c, d] = t.map(|v| emb.vertices[v]);
            let inverse = edge_matrix(&a, &b, &c, &d)
                .try_inverse()
                .expect("non-degenerate rest tet");
            let face_area = |p: &Vec3, q: &Vec3, r: &Vec3| 0.5 * (q - p).cross(&(r - p)).norm();
            let areas = [
                face_area(&b, &c, &d),
                face_area(&a, &c, &d),
                face_area(&a, &b, &d),
                face_area(&a, &b, &c),
            ];
            Prepared {
                origin: a,
                inverse,
                heights: areas.map(|area| 3.0 * volume / area),
            }
        })
        .collect();

    let mut binding = Binding {
        tet: Vec::with_capacity(col.vertices.len()),
        nodes: Vec::with_capacity(col.vertices.len()),
        weights: Vec::with_capacity(col.vertices.len()),
    };
    for (k, x) in col.vertices.iter().enumerate() {
        let mut best: Option<(f64, f64, usize, [f64; 4])> = None;
        for (ti, p) in prepared.iter().enumerate() {
            let l = p.inverse * (x - p.origin);
            let w = [1.0 - l.x - l.y - l.z, l.x, l.y, l.z];
            let outside = (0..4)
                .map(|j| (-w[j] * p.heights[j]).max(0.0))
                .fold(0.0, f64::max);
            if outside > BIND_TOLERANCE {
                continue;
            }
            let min_weight = w.iter().copied().fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((bo, bm, _, _)) => outside < bo || (outside == bo && min_weight > bm),
            };
            if better {
                best = Some((outside, min_weight, ti, w));
            }
        }
        let (_, _, ti, w) = best.ok_or(Error::UnboundVertex(k))?;
        binding.tet.push(ti);
        binding.nodes.push(emb.tets[ti]);
        binding.weights.push(w);
    }
    Ok(binding)
}

/// Solves the 4x4 barycentric system `[p_j; 1] w = [x; 1]` directly.
pub fn barycentric_weights(tet: [&Vec3; 4], x: &Vec3) -> Option<[f64; 4]> {
    let m = Matrix4::from_columns(&tet.map(|p| Vector4::new(p.x, p.y, p.z, 1.0)));
    let w = m.lu().solve(&Vector4::new(x.x, x.y, x.z, 1.0))?;
    Some([w[0], w[1], w[2], w[3]])
}

/// `x_k = sum_j w_kj q_{i_j(k)}` for every collision vertex.
pub fn embed(binding: &Binding, q: &[Vec3]) -> Vec<Vec3> {
    binding
        .nodes
        .iter()
        .zip(&binding.weights)
        .map(|(nodes, w)| (0..4).fold(Vec3::zeros(), |acc, j| acc + q[nodes[j]] * w[j]))
        .collect()
}

/// Sparse Jacobian `J = dx/dq`. Row block `k` holds `w_kj I3` at column block
/// `i_j(k)` for every nonzero weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    pub num_nodes: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl Jacobian {
    pub fn num_vertices(&self) -> usize {
        self.rows.len()
    }

    /// `J q`.
    pub fn apply(&self, q: &[Vec3]) -> Vec<Vec3> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(Vec3::zeros(), |acc, &(n, w)| acc + q[n] * w))
            .collect()
    }

    /// `J^T f`, accumulated into `out`.
    pub fn apply_transpose(&self, f: &[Vec3], out: &mut [Vec3]) {
        for (row, fk) in self.rows.iter().zip(f) {
            for &(n, w) in row {
                out[n] += fk * w;
            }
        }
    }

    /// Concatenates per-body Jacobians into one block-diagonal map.
    pub fn stack(parts: &[Jacobian]) -> Jacobian {
        let mut offset = 0;
        let mut rows = Vec::new();
        for part in parts {
            rows.extend(
                part.rows
                    .iter()
                    .map(|row| row.iter().map(|&(n, w)| (n + offset, w)).collect()),
            );
            offset += part.num_nodes;
        }
        Jacobian {
            num_nodes: offset,
            rows,
        }
    }

    /// Dense `3 N_v x 3 N_s` matrix, for tests and small problems.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(3 * self.rows.len(), 3 * self.num_nodes);
        for (k, row) in self.rows.iter().enumerate() {
            for &(n, w) in row {
                for d in 0..3 {
                    m[(3 * k + d, 3 * n + d)] += w;
                }
            }
        }
        m
    }
}

/// Assembles the sparse Jacobian of a binding; zero weights are dropped.
pub fn jacobian(binding: &Binding, num_nodes: usize) -> Jacobian {
    let rows = binding
        .nodes
        .iter()
        .zip(&binding.weights)
        .map(|(nodes, w)| {
            (0..4)
                .filter(|&j| w[j] != 0.0)
                .map(|j| (nodes[j], w[j]))
                .collect()
        })
        .collect();
    Jacobian { num_nodes, rows }
}

/// Lumped per-embedding-vertex masses. The reduced mass matrix is
/// `diag(m_i I3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MassModel {
    pub masses: Vec<f64>,
}

impl MassModel {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.masses.len();
        let mut m = nalgebra::DMatrix::zeros(3 * n, 3 * n);
        for (i, &mi) in self.masses.iter().enumerate() {
            for d in 0..3 {
                m[(3 * i + d, 3 * i + d)] = mi;
            }
        }
        m
    }
}

/// `m_i = rho * sum_{T containing i} V_T / 4`.
pub fn lump_masses(emb: &EmbeddingMesh, density: f64) -> MassModel {
    let mut masses = vec![0.0; emb.vertices.len()];
    for (t, &volume) in emb.tets.iter().zip(&emb.rest_volumes) {
        for &v in t {
            masses[v] += density * volume / 4.0;
        }
    }
    MassModel { masses }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_tet() -> EmbeddingMesh {
        EmbeddingMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }

    fn point_cloud(points: Vec<Vec3>) -> CollisionMesh {
        CollisionMesh {
            vertices: points,
            triangles: vec![],
            edges: vec![],
        }
    }

    #[test]
    fn centroid_and_vertex_weights() {
        let emb = unit_tet();
        let col = point_cloud(vec![Vec3::repeat(0.25), Vec3::zeros()]);
        let b = bind(&col, &emb).unwrap();
        for w in b.weights[0] {
            assert_relative_eq!(w, 0.25, epsilon = 1e-15);
        }
        assert_relative_eq!(b.weights[1][0], 1.0, epsilon = 1e-15);
        for w in &b.weights[1][1..] {
            assert!(w.abs() < 1e-15);
        }
    }

    #[test]
    fn generic_point_matches_linear_solve() {
        let emb = unit_tet();
        let x = Vec3::new(0.5, 0.25, 0.1);
        let b = bind(&point_cloud(vec![x]), &emb).unwrap();
        let v = &emb.vertices;
        let oracle = barycentric_weights([&v[0], &v[1], &v[2], &v[3]], &x).unwrap();
        let expected = [0.15, 0.5, 0.25, 0.1];
        for j in 0..4 {
            assert_relative_eq!(b.weights[0][j], expected[j], epsilon = 1e-14);
            assert_relative_eq!(oracle[j], expected[j], epsilon = 1e-14);
        }
        assert_relative_eq!(embed(&b, v)[0], x, epsilon = 1e-15);
    }

    #[test]
    fn outside_vertex_is_unbound() {
        let emb = unit_tet();
        let col = point_cloud(vec![Vec3::new(0.25, 0.25, 0.25), Vec3::new(1.0, 1.0, 1.0)]);
        assert!(matches!(bind(&col, &emb), Err(Error::UnboundVertex(1))));
        // just inside the tolerance band
        let near = point_cloud(vec![Vec3::new(0.3, 0.3, -0.5e-6)]);
        let b = bind(&near, &emb).unwrap();
        assert!(b.weights[0][3] < 0.0 && b.weights[0][3] >= -BIND_TOLERANCE);
    }

    #[test]
    fn volumes_and_orientation() {
        let o = Vec3::zeros();
        let (ex, ey, ez) = (Vec3::x(), Vec3::y(), Vec3::z());
        assert_relative_eq!(rest_tet_volume(&o, &ex, &ey, &ez).unwrap(), 1.0 / 6.0);
        assert_relative_eq!(rest_tet_volume(&o, &ey, &ex, &ez).unwrap(), -1.0 / 6.0);
        assert!(matches!(
            rest_tet_volume(&o, &ex, &(ex * 2.0), &ez),
            Err(Error::DegenerateTet { .. })
        ));
        let flipped = EmbeddingMesh::new(vec![o, ex, ey, ez], vec![[1, 0, 2, 3]]).unwrap();
        assert_eq!(flipped.reoriented, vec![0]);
        assert_eq!(flipped.tets[0], [0, 1, 2, 3]);
        assert_relative_eq!(flipped.rest_volumes[0], 1.0 / 6.0);
    }

    #[test]
    fn lumping_splits_volume() {
        let emb = EmbeddingMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(6.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        let m = lump_masses(&emb, 1.0);
        for mi in &m.masses {
            assert_relative_eq!(*mi, 0.25, epsilon = 1e-15);
        }
        // two tets sharing the face (1, 2, 3)
        let mut v = emb.vertices.clone();
        v.push(Vec3::new(2.0, 1.0, 1.0));
        let two = EmbeddingMesh::new(v, vec![[0, 1, 2, 3], [4, 1, 3, 2]]).unwrap();
        let m = lump_masses(&two, 2.0);
        let (v1, v2) = (two.rest_volumes[0], two.rest_volumes[1]);
        for shared in [1, 2, 3] {
            assert_relative_eq!(m.masses[shared], 2.0 * (v1 + v2) / 4.0, epsilon = 1e-14);
        }
        assert_relative_eq!(m.total(), 2.0 * (v1 + v2), epsilon = 1e-14);
    }

    #[test]
    fn jacobian_rows() {
        let emb = unit_tet();
        let b = bind(&point_cloud(vec![Vec3::repeat(0.25)]), &emb).unwrap();
        let j = jacobian(&b, 4);
        assert_eq!(j.rows[0].len(), 4);
        assert!(j.rows[0].iter().all(|&(_, w)| (w - 0.25).abs() < 1e-15));
        let dense = j.to_dense();
        for n in 0..4 {
            for d in 0..3 {
                assert_relative_eq!(dense[(d, 3 * n + d)], 0.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn edges_are_unique() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        let m = CollisionMesh::new(v, vec![[0, 1, 2], [1, 3, 2]]).unwrap();
        assert_eq!(m.edges, vec![[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]]);
        assert!(CollisionMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 2]]).is_err());
        assert!(CollisionMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 5]]).is_err());
    }
}
