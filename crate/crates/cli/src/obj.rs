//! OBJ meshes of lattice surfaces: vertices row-major, quad faces, and a
//! header comment carrying the lattice so `verify` can rebuild the grid.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use surface_forge_core::quatgeo::{ImVec3, Lattice, SurfaceGrid};

const HEADER: &str = "# surface-forge lattice";

/// 17 significant digits round-trip every finite f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_obj(lattice: &Lattice, f: &[ImVec3]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{HEADER} {} {} {} {} {} {}",
        lattice.nx,
        lattice.ny,
        fmt_f64(lattice.x0),
        fmt_f64(lattice.y0),
        fmt_f64(lattice.hx),
        fmt_f64(lattice.hy)
    );
    for p in f {
        let _ = writeln!(s, "v {} {} {}", fmt_f64(p.x1), fmt_f64(p.x2), fmt_f64(p.x3));
    }
    for j in 0..lattice.ny.saturating_sub(1) {
        for i in 0..lattice.nx.saturating_sub(1) {
            let a = lattice.index(i, j) + 1;
            let b = lattice.index(i + 1, j) + 1;
            let c = lattice.index(i + 1, j + 1) + 1;
            let d = lattice.index(i, j + 1) + 1;
            let _ = writeln!(s, "f {a} {b} {c} {d}");
        }
    }
    s
}

pub fn surface_obj(s: &SurfaceGrid) -> String {
    to_obj(&s.lattice, &s.f)
}

/// Parsed mesh. `lattice` is None when the header is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjMesh {
    pub lattice: Option<Lattice>,
    pub vertices: Vec<ImVec3>,
    pub faces: Vec<[usize; 4]>,
}

fn num(tok: Option<&str>, line: usize) -> Result<f64> {
    let t = tok.with_context(|| format!("line {line}: missing number"))?;
    let v: f64 = t.parse().with_context(|| format!("line {line}: bad number {t:?}"))?;
    if !v.is_finite() {
        bail!("line {line}: non-finite value {t}");
    }
    Ok(v)
}

pub fn parse_obj(text: &str) -> Result<ObjMesh> {
    let mut lattice = None;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let n = n + 1;
        if let Some(rest) = line.strip_prefix(HEADER) {
            let t: Vec<&str> = rest.split_whitespace().collect();
            if t.len() != 6 {
                bail!("line {n}: lattice header needs 6 fields");
            }
            let nx: usize = t[0].parse().with_context(|| format!("line {n}: bad nx"))?;
            let ny: usize = t[1].parse().with_context(|| format!("line {n}: bad ny"))?;
            let v: Vec<f64> = t[2..].iter().map(|s| num(Some(s), n)).collect::<Result<_>>()?;
            lattice = Some(Lattice::new(nx, ny, v[0], v[1], v[2], v[3]));
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => vertices.push(ImVec3::new(num(it.next(), n)?, num(it.next(), n)?, num(it.next(), n)?)),
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|s| s.split('/').next().unwrap_or("").parse::<usize>().with_context(|| format!("line {n}: bad face index {s:?}")))
                    .collect::<Result<_>>()?;
                if idx.len() != 4 || idx.contains(&0) {
                    bail!("line {n}: faces must be quads with 1-based indices");
                }
                faces.push([idx[0], idx[1], idx[2], idx[3]]);
            }
            _ => {}
        }
    }
    if let Some(lat) = &lattice {
        if lat.len() != vertices.len() {
            bail!("header announces {} vertices, found {}", lat.len(), vertices.len());
        }
    }
    if let Some(f) = faces.iter().flatten().find(|&&i| i > vertices.len()) {
        bail!("face index {f} exceeds vertex count {}", vertices.len());
    }
    Ok(ObjMesh { lattice, vertices, faces })
}
