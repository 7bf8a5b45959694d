//! Retriangulation of deformed meshes and nodal field transfer.

use std::collections::HashMap;

use super::triangulate::{orient, segments_cross};
use super::{triangulate, Mesh, MeshError, Pslg, Region, Segment, TriangulateOptions};
use crate::scalar::{Real, Vec2};

/// Linear interpolation from the nodes of an old mesh onto the nodes of a new one.
#[derive(Debug, Clone)]
pub struct Transfer {
    /// Old triangle and barycentric weights per new node.
    pub stencil: Vec<([usize; 3], [f64; 3])>,
    pub old_nodes: usize,
}

impl Transfer {
    /// Locates every target point in `old` (nearest triangle with clamped
    /// weights for points slightly outside).
    pub fn new<T: Real>(old: &Mesh<T>, targets: &[Vec2<T>]) -> Self {
        let nodes: Vec<[f64; 2]> = old.nodes.iter().map(|p| [p[0].f64(), p[1].f64()]).collect();
        let grid = TriangleGrid::new(&nodes, &old.triangles);
        let stencil = targets
            .iter()
            .map(|p| grid.locate(&nodes, &old.triangles, [p[0].f64(), p[1].f64()]))
            .collect();
        Self {
            stencil,
            old_nodes: old.nodes.len(),
        }
    }

    pub fn apply<T: Real>(&self, values: &[T]) -> Vec<T> {
        assert_eq!(values.len(), self.old_nodes, "transfer source length");
        self.stencil
            .iter()
            .map(|(t, w)| {
                T::lit(w[0]) * values[t[0]] + T::lit(w[1]) * values[t[1]] + T::lit(w[2]) * values[t[2]]
            })
            .collect()
    }

    pub fn apply_vec<T: Real>(&self, values: &[Vec2<T>]) -> Vec<Vec2<T>> {
        let x: Vec<T> = values.iter().map(|v| v[0]).collect();
        let y: Vec<T> = values.iter().map(|v| v[1]).collect();
        self.apply(&x).into_iter().zip(self.apply(&y)).map(|(a, b)| [a, b]).collect()
    }
}

struct TriangleGrid {
    origin: [f64; 2],
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl TriangleGrid {
    fn new(nodes: &[[f64; 2]], tris: &[[usize; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).max(1e-300);
        let cell = (area / tris.len().max(1) as f64).sqrt() * 2.0;
        let mut g = Self { origin: lo, cell, cells: HashMap::new() };
        for (t, tri) in tris.iter().enumerate() {
            let xs = tri.map(|v| nodes[v][0]);
            let ys = tri.map(|v| nodes[v][1]);
            let (i0, j0) = g.key([xs.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::INFINITY, f64::min)]);
            let (i1, j1) = g.key([xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)]);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    g.cells.entry((i, j)).or_default().push(t);
                }
            }
        }
        g
    }

    fn key(&self, p: [f64; 2]) -> (i64, i64) {
        (
            ((p[0] - self.origin[0]) / self.cell).floor() as i64,
            ((p[1] - self.origin[1]) / self.cell).floor() as i64,
        )
    }

    fn locate(&self, nodes: &[[f64; 2]], tris: &[[usize; 3]], p: [f64; 2]) -> ([usize; 3], [f64; 3]) {
        let (i, j) = self.key(p);
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for radius in 0..64i64 {
            for di in -radius..=radius {
                for dj in -radius..=radius {
                    if di.abs() != radius && dj.abs() != radius {
                        continue;
                    }
                    let Some(ts) = self.cells.get(&(i + di, j + dj)) else { continue };
                    for &t in ts {
                        let w = barycentric(tris[t].map(|v| nodes[v]), p);
                        let violation = -w.iter().cloned().fold(0.0, f64::min);
                        if best.map_or(true, |b| violation < b.0) {
                            best = Some((violation, t, w));
                        }
                    }
                }
            }
            if let Some(b) = best {
                if b.0 <= 1e-12 || radius >= 1 {
                    break;
                }
            }
        }
        let (_, t, w) = best.expect("transfer target far outside the source mesh");
        let mut w = w.map(|x| x.max(0.0));
        let s: f64 = w.iter().sum();
        for x in &mut w {
            *x /= s;
        }
        (tris[t], w)
    }
}

fn barycentric(v: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let d = orient(v[0], v[1], v[2]);
    let w0 = orient(p, v[1], v[2]) / d;
    let w1 = orient(v[0], p, v[2]) / d;
    [w0, w1, 1.0 - w0 - w1]
}

/// Result of a remesh: the new mesh, the field transfer and the map from
/// old boundary node indices to new ones (boundary nodes are preserved).
#[derive(Debug, Clone)]
pub struct Remeshed {
    pub mesh: Mesh<f64>,
    pub transfer: Transfer,
    pub boundary_map: HashMap<usize, usize>,
}

/// Planar graph of the current boundary of `mesh`. Returns the graph and the
/// mesh node of every graph point.
pub fn fluid_pslg(mesh: &Mesh<f64>, exclude_outside: bool) -> (Pslg, Vec<usize>) {
    let mut index = HashMap::new();
    let mut points = Vec::new();
    let mut origin = Vec::new();
    let mut segments = Vec::new();
    for e in &mesh.boundary_edges {
        let ids = e.nodes.map(|v| {
            *index.entry(v).or_insert_with(|| {
                points.push(mesh.nodes[v]);
                origin.push(v);
                points.len() - 1
            })
        });
        segments.push(Segment { a: ids[0], b: ids[1], tag: e.tag });
    }
    (Pslg { points, segments, exclude_outside }, origin)
}

/// First crossing among the fluid-bounding edges of `mesh`, if any.
pub fn gamma_self_intersection<T: Real>(mesh: &Mesh<T>) -> Option<String> {
    let nodes: Vec<[f64; 2]> = mesh.nodes.iter().map(|p| [p[0].f64(), p[1].f64()]).collect();
    let segs: Vec<Segment> = mesh
        .boundary_edges
        .iter()
        .filter(|e| e.tag.bounds_fluid())
        .map(|e| Segment { a: e.nodes[0], b: e.nodes[1], tag: e.tag })
        .collect();
    let bbox: Vec<[f64; 4]> = segs
        .iter()
        .map(|s| {
            let (a, b) = (nodes[s.a], nodes[s.b]);
            [a[0].min(b[0]), a[1].min(b[1]), a[0].max(b[0]), a[1].max(b[1])]
        })
        .collect();
    let mut order: Vec<usize> = (0..segs.len()).collect();
    order.sort_by(|&i, &j| bbox[i][0].total_cmp(&bbox[j][0]));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if bbox[j][0] > bbox[i][2] {
                break;
            }
            if bbox[j][1] > bbox[i][3] || bbox[j][3] < bbox[i][1] {
                continue;
            }
            if segments_cross(&nodes, segs[i], segs[j]) {
                let (a, b) = (segs[i], segs[j]);
                return Some(format!(
                    "edges {}-{} and {}-{} intersect near ({:.4}, {:.4})",
                    a.a, a.b, b.a, b.b, nodes[a.a][0], nodes[a.a][1]
                ));
            }
        }
    }
    None
}

/// Retriangulates the current boundary of a deformed mesh. Boundary nodes
/// and edges are kept; interior nodes are regenerated at target size `h`.
pub fn remesh(mesh: &Mesh<f64>, h: f64) -> Result<Remeshed, MeshError> {
    if let Some(msg) = gamma_self_intersection(mesh) {
        return Err(MeshError::InterfaceCollapse(msg));
    }
    let fluid_only = !mesh.has_region(Region::Solid);
    let (pslg, origin) = fluid_pslg(mesh, fluid_only);
    let mut opts = TriangulateOptions::new(h, 1.0);
    opts.keep_constraint_edges = true;
    opts.presplit = false;
    let new = triangulate(&pslg, &opts).map_err(|e| match e {
        MeshError::SelfIntersection(..) => MeshError::InterfaceCollapse(e.to_string()),
        other => other,
    })?;
    let transfer = Transfer::new(mesh, &new.nodes);
    let boundary_map = origin.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    Ok(Remeshed { mesh: new, transfer, boundary_map })
}

/// Remeshing entry point for fluid-only meshes.
pub fn remesh_fluid(mesh: &Mesh<f64>, h: f64) -> Result<Remeshed, MeshError> {
    if mesh.has_region(Region::Solid) {
        return Err(MeshError::Invalid("remesh_fluid expects a fluid-only mesh".into()));
    }
    remesh(mesh, h)
}

/// Whether closed segments pq and ru have a common point.
pub(crate) fn proper_or_touching(p: [f64; 2], q: [f64; 2], r: [f64; 2], u: [f64; 2]) -> bool {
    let d1 = orient(r, u, p);
    let d2 = orient(r, u, q);
    let d3 = orient(p, q, r);
    let d4 = orient(p, q, u);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], o: f64| {
        o == 0.0
            && c[0] >= a[0].min(b[0])
            && c[0] <= a[0].max(b[0])
            && c[1] >= a[1].min(b[1])
            && c[1] <= a[1].max(b[1])
    };
    on(r, u, p, d1) || on(r, u, q, d2) || on(p, q, r, d3) || on(p, q, u, d4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_reference_domain, BoundaryTag, ChannelGeometry};

    fn channel_fluid() -> Mesh<f64> {
        let g = ChannelGeometry { d: 2.0, l: 3.0, s: 0.5, thickness: 2.0, fillet: 0.0 };
        let p = build_reference_domain(&g, 0.125).unwrap();
        let m = triangulate(&p, &TriangulateOptions::new(0.25, 2.0)).unwrap();
        m.submesh(Region::Fluid).unwrap().mesh
    }

    #[test]
    fn linear_fields_transfer_exactly() {
        let m = channel_fluid();
        let r = remesh(&m, 0.2).unwrap();
        let f = |p: [f64; 2]| 2.0 * p[0] - 3.0 * p[1] + 0.5;
        let old: Vec<f64> = m.nodes.iter().map(|&p| f(p)).collect();
        let new = r.transfer.apply(&old);
        for (p, v) in r.mesh.nodes.iter().zip(&new) {
            assert!((f(*p) - v).abs() < 1e-12, "{p:?}");
        }
        for (&o, &n) in &r.boundary_map {
            assert_eq!(m.nodes[o], r.mesh.nodes[n]);
        }
        assert!(r.mesh.quality().min_angle.to_degrees() >= 20.0);
        assert!((r.mesh.area(None) - m.area(None)).abs() < 1e-10);
    }

    #[test]
    fn crossing_interface_is_a_collapse() {
        let mut m = channel_fluid();
        // drag one bottom-wall node above the top wall
        let v = m
            .nodes_with_tags(&[BoundaryTag::Gamma])
            .into_iter()
            .find(|&v| (m.nodes[v][1] + 1.0).abs() < 1e-12 && m.nodes[v][0] > 1.0 && m.nodes[v][0] < 2.0)
            .unwrap();
        m.nodes[v][1] = 3.0;
        assert!(gamma_self_intersection(&m).is_some());
        let err = remesh(&m, 0.2).unwrap_err();
        assert!(err.to_string().contains("interface collapse"), "{err}");
    }
}
