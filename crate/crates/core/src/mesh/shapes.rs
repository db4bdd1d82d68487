//! Procedural meshes used by scenes and tests.

use std::collections::HashMap;

use super::{bounding_box, CollisionMesh, EmbeddingMesh};
use crate::error::Result;
use crate::Vec3;

/// Regular grid of `res` cells over the box `[lo, hi]`, each cube split into six
/// tets around its low-to-high diagonal. Neighbouring cubes share faces
/// conformingly.
pub fn box_grid(lo: Vec3, hi: Vec3, res: [usize; 3]) -> Result<EmbeddingMesh> {
    let [nx, ny, nz] = res.map(|r| r.max(1));
    let index = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let coord = |i: usize, n: usize, d: usize| {
        if i == n {
            hi[d]
        } else {
            lo[d] + (hi[d] - lo[d]) * (i as f64 / n as f64)
        }
    };
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Vec3::new(coord(i, nx, 0), coord(j, ny, 1), coord(k, nz, 2)));
            }
        }
    }
    let axis_orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let corner = |b: [usize; 3]| index(i + b[0], j + b[1], k + b[2]);
                for order in axis_orders {
                    let mut b = [0usize; 3];
                    let mut tet = [corner(b); 4];
                    for (slot, axis) in tet[1..].iter_mut().zip(order) {
                        b[axis] = 1;
                        *slot = corner(b);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    EmbeddingMesh::new(vertices, tets)
}

/// Surface of an axis-aligned box centred at `center`, triangulated on a
/// `res` grid. It coincides exactly with the boundary of
/// [`box_grid`] over the same box and resolution.
pub fn box_surface(size: Vec3, res: [usize; 3], center: Vec3) -> Result<CollisionMesh> {
    let (lo, hi) = (center - size / 2.0, center + size / 2.0);
    let grid = box_grid(lo, hi, res)?;
    let faces = grid.boundary_triangles();
    let mut remap = HashMap::new();
    let mut vertices = Vec::new();
    let mut used: Vec<usize> = faces.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    for v in used {
        remap.insert(v, vertices.len());
        vertices.push(grid.vertices[v]);
    }
    let triangles = faces.iter().map(|f| f.map(|v| remap[&v])).collect();
    CollisionMesh::new(vertices, triangles)
}

/// Grid embedding covering the bounding box of `points` grown by `padding`.
pub fn enclosing_grid(points: &[Vec3], res: [usize; 3], padding: f64) -> Result<EmbeddingMesh> {
    let (lo, hi) = bounding_box(points);
    box_grid(lo - Vec3::repeat(padding), hi + Vec3::repeat(padding), res)
}

/// One tetrahedron containing every point: the corner at the padded
/// bounding-box minimum and three legs of length `Lx + Ly + Lz` along the axes.
pub fn enclosing_tet(points: &[Vec3], padding: f64) -> Result<EmbeddingMesh> {
    let (lo, hi) = bounding_box(points);
    let lo = lo - Vec3::repeat(padding);
    let hi = hi + Vec3::repeat(padding);
    let s = (hi - lo).sum();
    EmbeddingMesh::new(
        vec![
            lo,
            lo + Vec3::new(s, 0.0, 0.0),
            lo + Vec3::new(0.0, s, 0.0),
            lo + Vec3::new(0.0, 0.0, s),
        ],
        vec![[0, 1, 2, 3]],
    )
}

/// Concatenates surfaces into one mesh.
pub fn union(parts: &[CollisionMesh]) -> Result<CollisionMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for part in parts {
        let offset = vertices.len();
        vertices.extend_from_slice(&part.vertices);
        triangles.extend(part.triangles.iter().map(|t| t.map(|v| v + offset)));
    }
    CollisionMesh::new(vertices, triangles)
}

/// Geodesic sphere from `subdivisions` rounds of 4-to-1 splitting of an
/// icosahedron.
pub fn icosphere(radius: f64, subdivisions: usize, center: Vec3) -> Result<CollisionMesh> {
    let (vertices, triangles) = unit_icosphere(subdivisions);
    CollisionMesh::new(
        vertices.into_iter().map(|v| center + v * radius).collect(),
        triangles,
    )
}

/// Star-shaped lumpy sphere: the icosphere with radius modulated by a sum of
/// low-frequency bumps of relative height `amplitude`.
pub fn blob(radius: f64, subdivisions: usize, amplitude: f64, center: Vec3) -> Result<CollisionMesh> {
    let (vertices, triangles) = unit_icosphere(subdivisions);
    let bumps = [
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.8, 0.0, 0.6),
        Vec3::new(-0.8, 0.0, 0.6),
        Vec3::new(0.0, 1.0, 0.0),
    ];
    let vertices = vertices
        .into_iter()
        .map(|n| {
            let bump: f64 = bumps.iter().map(|b| n.dot(b).max(0.0).powi(4)).sum();
            center + n * radius * (1.0 + amplitude * bump)
        })
        .collect();
    CollisionMesh::new(vertices, triangles)
}

fn unit_icosphere(subdivisions: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(4 * triangles.len());
        for t in &triangles {
            let mut mid = |a: usize, b: usize| {
                *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize());
                    vertices.len() - 1
                })
            };
            let (ab, bc, ca) = (mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0]));
            next.push([t[0], ab, ca]);
            next.push([t[1], bc, ab]);
            next.push([t[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
    }
    (vertices, triangles)
}
