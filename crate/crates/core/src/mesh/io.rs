//! Plain-text mesh format and legacy ASCII VTK export.
//!
//! Text format:
//! ```text
//! <n nodes>
//! x y            (n lines)
//! <n triangles>
//! i j k REGION   (one per triangle)
//! <n boundary edges>
//! i j TAG        (one per edge)
//! ```

use std::io::{BufRead, Write};

use super::{BoundaryEdge, Mesh, MeshError};
use crate::scalar::Real;

pub fn write_text<T: Real, W: Write>(mesh: &Mesh<T>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", mesh.nodes.len())?;
    for p in &mesh.nodes {
        writeln!(w, "{:.17e} {:.17e}", p[0].f64(), p[1].f64())?;
    }
    writeln!(w, "{}", mesh.triangles.len())?;
    for (t, r) in mesh.triangles.iter().zip(&mesh.regions) {
        writeln!(w, "{} {} {} {}", t[0], t[1], t[2], r)?;
    }
    writeln!(w, "{}", mesh.boundary_edges.len())?;
    for e in &mesh.boundary_edges {
        writeln!(w, "{} {} {}", e.nodes[0], e.nodes[1], e.tag)?;
    }
    Ok(())
}

pub fn read_text<T: Real, R: BufRead>(r: R) -> Result<Mesh<T>, MeshError> {
    let mut lines = r.lines().enumerate().filter_map(|(k, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((k + 1, other)),
    });
    let mut next = || -> Result<(usize, Vec<String>), MeshError> {
        let (k, l) = lines.next().ok_or(MeshError::Format { line: 0, msg: "unexpected end of file".into() })?;
        Ok((k, l?.split_whitespace().map(str::to_string).collect()))
    };
    fn parse<X: std::str::FromStr>(line: usize, s: &str) -> Result<X, MeshError> {
        s.parse().map_err(|_| MeshError::Format { line, msg: format!("cannot parse {s:?}") })
    }
    fn count(line: usize, f: &[String]) -> Result<usize, MeshError> {
        match f {
            [n] => parse(line, n),
            _ => Err(MeshError::Format { line, msg: "expected a count".into() }),
        }
    }
    let (k, f) = next()?;
    let n = count(k, &f)?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (k, f) = next()?;
        if f.len() != 2 {
            return Err(MeshError::Format { line: k, msg: "expected x y".into() });
        }
        nodes.push([T::lit(parse(k, &f[0])?), T::lit(parse(k, &f[1])?)]);
    }
    let (k, f) = next()?;
    let nt = count(k, &f)?;
    let mut triangles = Vec::with_capacity(nt);
    let mut regions = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (k, f) = next()?;
        if f.len() != 4 {
            return Err(MeshError::Format { line: k, msg: "expected i j k REGION".into() });
        }
        triangles.push([parse(k, &f[0])?, parse(k, &f[1])?, parse(k, &f[2])?]);
        regions.push(parse(k, &f[3])?);
    }
    let (k, f) = next()?;
    let ne = count(k, &f)?;
    let mut boundary_edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (k, f) = next()?;
        if f.len() != 3 {
            return Err(MeshError::Format { line: k, msg: "expected i j TAG".into() });
        }
        boundary_edges.push(BoundaryEdge {
            nodes: [parse(k, &f[0])?, parse(k, &f[1])?],
            tag: parse(k, &f[2])?,
        });
    }
    Ok(Mesh { nodes, triangles, regions, boundary_edges })
}

/// Named data arrays attached to a VTK export.
#[derive(Debug, Default, Clone)]
pub struct VtkData {
    pub point_scalars: Vec<(String, Vec<f64>)>,
    pub point_vectors: Vec<(String, Vec<[f64; 2]>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
    pub cell_vectors: Vec<(String, Vec<[f64; 2]>)>,
}

/// Legacy ASCII unstructured grid. The region is always written as the
/// integer cell array `region` (0 fluid, 1 solid).
pub fn write_vtk<T: Real, W: Write>(mesh: &Mesh<T>, data: &VtkData, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "poreshape")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.nodes.len())?;
    for p in &mesh.nodes {
        writeln!(w, "{:.12e} {:.12e} 0", p[0].f64(), p[1].f64())?;
    }
    let nt = mesh.triangles.len();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nt}")?;
    writeln!(w, "SCALARS region int 1\nLOOKUP_TABLE default")?;
    for r in &mesh.regions {
        writeln!(w, "{}", matches!(r, super::Region::Solid) as i32)?;
    }
    for (name, v) in &data.cell_scalars {
        assert_eq!(v.len(), nt, "cell array {name}");
        writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
        for x in v {
            writeln!(w, "{x:.12e}")?;
        }
    }
    for (name, v) in &data.cell_vectors {
        assert_eq!(v.len(), nt, "cell array {name}");
        writeln!(w, "VECTORS {name} double")?;
        for x in v {
            writeln!(w, "{:.12e} {:.12e} 0", x[0], x[1])?;
        }
    }
    let nn = mesh.nodes.len();
    if !data.point_scalars.is_empty() || !data.point_vectors.is_empty() {
        writeln!(w, "POINT_DATA {nn}")?;
    }
    for (name, v) in &data.point_scalars {
        assert_eq!(v.len(), nn, "point array {name}");
        writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
        for x in v {
            writeln!(w, "{x:.12e}")?;
        }
    }
    for (name, v) in &data.point_vectors {
        assert_eq!(v.len(), nn, "point array {name}");
        writeln!(w, "VECTORS {name} double")?;
        for x in v {
            writeln!(w, "{:.12e} {:.12e} 0", x[0], x[1])?;
        }
    }
    Ok(())
}
