//! Uniform spatial hash over axis-aligned boxes.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        };
        for p in points {
            b.lo = b.lo.inf(p);
            b.hi = b.hi.sup(p);
        }
        b
    }

    pub fn inflate(mut self, r: f64) -> Self {
        self.lo -= Vec3::repeat(r);
        self.hi += Vec3::repeat(r);
        self
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|d| self.lo[d] <= o.hi[d] && o.lo[d] <= self.hi[d])
    }

    fn extent(&self) -> f64 {
        (self.hi - self.lo).max()
    }
}

/// Boxes covering more cells than this are kept in a separate list tested
/// against every query.
const MAX_CELLS: i64 = 64;

pub struct SpatialHash {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
    large: Vec<u32>,
    boxes: Vec<Aabb>,
}

impl SpatialHash {
    /// Buckets `boxes` with cell size `max(min_cell, mean box extent)`.
    pub fn new(boxes: Vec<Aabb>, min_cell: f64) -> Self {
        let mean = if boxes.is_empty() {
            0.0
        } else {
            boxes.iter().map(Aabb::extent).sum::<f64>() / boxes.len() as f64
        };
        let cell = mean.max(min_cell).max(f64::MIN_POSITIVE);
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut large = Vec::new();
        for (i, b) in boxes.iter().enumerate() {
            let (lo, hi) = (Self::key(cell, &b.lo), Self::key(cell, &b.hi));
            if Self::count(&lo, &hi) > MAX_CELLS {
                large.push(i as u32);
                continue;
            }
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        cells.entry([x, y, z]).or_default().push(i as u32);
                    }
                }
            }
        }
        SpatialHash {
            cell,
            cells,
            large,
            boxes,
        }
    }

    fn key(cell: f64, p: &Vec3) -> [i64; 3] {
        [0, 1, 2].map(|d| (p[d] / cell).floor() as i64)
    }

    fn count(lo: &[i64; 3], hi: &[i64; 3]) -> i64 {
        (0..3).map(|d| hi[d] - lo[d] + 1).product()
    }

    /// Sorted indices of stored boxes overlapping `query`.
    pub fn query(&self, query: &Aabb) -> Vec<u32> {
        let (lo, hi) = (Self::key(self.cell, &query.lo), Self::key(self.cell, &query.hi));
        let mut out: Vec<u32> = if Self::count(&lo, &hi) > MAX_CELLS {
            (0..self.boxes.len() as u32).collect()
        } else {
            let mut v = self.large.clone();
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        if let Some(c) = self.cells.get(&[x, y, z]) {
                            v.extend_from_slice(c);
                        }
                    }
                }
            }
            v
        };
        out.sort_unstable();
        out.dedup();
        out.retain(|&i| self.boxes[i as usize].overlaps(query));
        out
    }
}

/// All `(i, j)` with `a[i]` overlapping `b[j]`, sorted.
pub fn overlapping(a: &[Aabb], b: Vec<Aabb>, min_cell: f64) -> Vec<(usize, usize)> {
    let hash = SpatialHash::new(b, min_cell);
    let per_query: Vec<Vec<(usize, usize)>> = a
        .par_iter()
        .enumerate()
        .map(|(i, q)| hash.query(q).into_iter().map(|j| (i, j as usize)).collect())
        .collect();
    per_query.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_brute_force() {
        let mut boxes = Vec::new();
        let mut seed = 7u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let c = Vec3::new(rnd(), rnd(), rnd());
            let r = 0.05 * rnd();
            boxes.push(Aabb { lo: c, hi: c }.inflate(r));
        }
        boxes.push(Aabb {
            lo: Vec3::repeat(-1.0),
            hi: Vec3::new(2.0, 2.0, -0.9),
        });
        let fast = overlapping(&boxes, boxes.clone(), 0.01);
        let mut slow = Vec::new();
        for (i, a) in boxes.iter().enumerate() {
            for (j, b) in boxes.iter().enumerate() {
                if a.overlaps(b) {
                    slow.push((i, j));
                }
            }
        }
        assert_eq!(fast, slow);
    }
}
