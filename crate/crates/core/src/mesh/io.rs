//! ASCII mesh formats.
//!
//! * Surface meshes: Wavefront OBJ restricted to `v x y z` and `f i j k`
//!   records (1-based indices). Comment lines starting with `#` are skipped.
//! * Tet meshes: a header `tet <nv> <nt>`, then `nv` lines `x y z`, then `nt`
//!   lines `i0 i1 i2 i3` (0-based). Anything after the last tet line other
//!   than whitespace is rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::Vec3;

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_obj(path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    parse_obj(&read(path)?, path)
}

pub fn parse_obj(text: &str, origin: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let column = line.len() - trimmed.len() + 1;
        let mut tokens = trimmed.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() != 3 {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        column,
                        format!("vertex record needs 3 coordinates, found {}", coords.len()),
                    ));
                }
                let mut v = [0.0; 3];
                for (slot, tok) in v.iter_mut().zip(&coords) {
                    *slot = tok.parse().map_err(|_| {
                        Error::parse(origin, line_no, column, format!("bad coordinate `{tok}`"))
                    })?;
                }
                vertices.push(Vec3::new(v[0], v[1], v[2]));
            }
            Some("f") => {
                let idx: Vec<&str> = tokens.collect();
                if idx.len() != 3 {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        column,
                        format!("face record must be a triangle, found {} indices", idx.len()),
                    ));
                }
                let mut f = [0usize; 3];
                for (slot, tok) in f.iter_mut().zip(&idx) {
                    let i: usize = tok.parse().map_err(|_| {
                        Error::parse(origin, line_no, column, format!("bad index `{tok}`"))
                    })?;
                    if i == 0 {
                        return Err(Error::parse(origin, line_no, column, "indices are 1-based"));
                    }
                    *slot = i - 1;
                }
                faces.push(f);
            }
            Some(other) => {
                return Err(Error::parse(
                    origin,
                    line_no,
                    column,
                    format!("unsupported record `{other}`"),
                ))
            }
            None => unreachable!(),
        }
    }
    if let Some((i, _)) = faces
        .iter()
        .enumerate()
        .find(|(_, f)| f.iter().any(|&v| v >= vertices.len()))
    {
        return Err(Error::parse(
            origin,
            0,
            0,
            format!("face {} references a missing vertex", i + 1),
        ));
    }
    Ok((vertices, faces))
}

pub fn write_obj(vertices: &[Vec3], triangles: &[[usize; 3]]) -> String {
    let mut out = String::new();
    for v in vertices {
        let _ = writeln!(out, "v {} {} {}", fmt17(v.x), fmt17(v.y), fmt17(v.z));
    }
    for t in triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn read_tet(path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 4]>)> {
    parse_tet(&read(path)?, path)
}

pub fn parse_tet(text: &str, origin: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 4]>)> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, msg: String| Error::parse(origin, line, 1, msg);

    let (_, header) = lines.next().ok_or_else(|| err(1, "empty tet file".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 || head[0] != "tet" {
        return Err(err(1, "expected header `tet <nv> <nt>`".into()));
    }
    let nv: usize = head[1]
        .parse()
        .map_err(|_| err(1, format!("bad vertex count `{}`", head[1])))?;
    let nt: usize = head[2]
        .parse()
        .map_err(|_| err(1, format!("bad tet count `{}`", head[2])))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(vertices.len() + 2, "missing vertex line".into()))?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(err(ln + 1, format!("expected 3 coordinates, found {}", tok.len())));
        }
        let mut v = [0.0; 3];
        for (slot, t) in v.iter_mut().zip(&tok) {
            *slot = t
                .parse()
                .map_err(|_| err(ln + 1, format!("bad coordinate `{t}`")))?;
        }
        vertices.push(Vec3::new(v[0], v[1], v[2]));
    }
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(nv + tets.len() + 2, "missing tet line".into()))?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 4 {
            return Err(err(ln + 1, format!("expected 4 indices, found {}", tok.len())));
        }
        let mut t = [0usize; 4];
        for (slot, s) in t.iter_mut().zip(&tok) {
            *slot = s.parse().map_err(|_| err(ln + 1, format!("bad index `{s}`")))?;
            if *slot >= nv {
                return Err(err(ln + 1, format!("index {slot} out of range")));
            }
        }
        tets.push(t);
    }
    if let Some((ln, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(ln + 1, "trailing content after last tet".into()));
    }
    Ok((vertices, tets))
}

pub fn write_tet(vertices: &[Vec3], tets: &[[usize; 4]]) -> String {
    let mut out = format!("tet {} {}\n", vertices.len(), tets.len());
    for v in vertices {
        let _ = writeln!(out, "{} {} {}", fmt17(v.x), fmt17(v.y), fmt17(v.z));
    }
    for t in tets {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    out
}
