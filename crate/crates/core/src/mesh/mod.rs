//! Tagged triangle meshes of the channel/elastomer domain.
//!
//! Conventions used throughout the crate:
//! * triangles are counterclockwise;
//! * boundary edges that are not `Gamma` have the meshed domain on their left;
//! * `Gamma` edges have the fluid on their left, so the right-hand normal
//!   points from the fluid into the solid.

mod geometry;
mod io;
mod remesh;
mod triangulate;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::{self, Real, Vec2};

pub use geometry::{build_disk, build_reference_domain, polygon_pslg, ChannelGeometry, Pslg, Segment};
pub use io::{read_text, write_text, write_vtk, VtkData};
pub use remesh::{fluid_pslg, gamma_self_intersection, remesh, remesh_fluid, Remeshed, Transfer};
pub use triangulate::{triangulate, TriangulateOptions};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("channels disconnected: offset s = {s} must be smaller than the diameter d = {d}")]
    ChannelsDisconnected { s: f64, d: f64 },
    #[error("fillet radius {r} too large for the step (needs 2r ≤ {limit})")]
    FilletTooLarge { r: f64, limit: f64 },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("geometry self-intersection between segments {0} and {1}")]
    SelfIntersection(usize, usize),
    #[error("interface collapse: {0}")]
    InterfaceCollapse(String),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("mesh has no {0:?} region")]
    NoRegion(Region),
    #[error("mesh invariant violated: {0}")]
    Invalid(String),
    #[error("mesh i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh format, line {line}: {msg}")]
    Format { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Fluid,
    Solid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Channel inlet mouth on x = 0.
    I0,
    /// Channel outlet mouth on x = 2l.
    O0,
    /// Solid part of the left side x = 0.
    Z0,
    /// Top and bottom of the box.
    Sigma,
    /// Solid part of the right side x = 2l.
    Pi,
    /// Fluid/solid interface.
    Gamma,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 6] = [
        BoundaryTag::I0,
        BoundaryTag::O0,
        BoundaryTag::Z0,
        BoundaryTag::Sigma,
        BoundaryTag::Pi,
        BoundaryTag::Gamma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::I0 => "I0",
            BoundaryTag::O0 => "O0",
            BoundaryTag::Z0 => "Z0",
            BoundaryTag::Sigma => "SIGMA",
            BoundaryTag::Pi => "PI",
            BoundaryTag::Gamma => "GAMMA",
        }
    }

    /// Tags of edges that bound the fluid.
    pub fn bounds_fluid(self) -> bool {
        matches!(self, BoundaryTag::I0 | BoundaryTag::O0 | BoundaryTag::Gamma)
    }

    /// Tags of edges where the solid is clamped.
    pub fn is_clamped(self) -> bool {
        matches!(self, BoundaryTag::Z0 | BoundaryTag::Sigma | BoundaryTag::Pi)
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        BoundaryTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown boundary tag {s:?}"))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Fluid => "FLUID",
            Region::Solid => "SOLID",
        })
    }
}

impl FromStr for Region {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "FLUID" => Ok(Region::Fluid),
            "SOLID" => Ok(Region::Solid),
            _ => Err(format!("unknown region {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    pub nodes: Vec<Vec2<T>>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Smallest interior angle [rad].
    pub min_angle: f64,
    pub max_aspect_ratio: f64,
    pub min_area: f64,
    pub inverted_count: usize,
}

/// A region-restricted copy of a mesh with index maps to its parent.
#[derive(Debug, Clone)]
pub struct SubMesh<T> {
    pub mesh: Mesh<T>,
    /// Parent node index of each local node.
    pub to_parent: Vec<usize>,
    /// Local index of each parent node, if present.
    pub from_parent: Vec<Option<usize>>,
}

/// One connected chain of interface edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    /// Node indices in traversal order (fluid on the left). A closed arc does
    /// not repeat its first node.
    pub nodes: Vec<usize>,
    pub closed: bool,
}

impl Arc {
    pub fn edges(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        let n = self.nodes.len();
        let m = if self.closed { n } else { n.saturating_sub(1) };
        (0..m).map(move |k| [self.nodes[k], self.nodes[(k + 1) % n]])
    }
}

/// Ordering of the interface nodes of a reference mesh.
///
/// Interface displacements are stored as one vector per entry of `nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaIndex {
    /// Mesh node index of every interface node.
    pub nodes: Vec<usize>,
    /// Arcs expressed as positions into `nodes`.
    pub arcs: Vec<Arc>,
    position: HashMap<usize, usize>,
}

impl GammaIndex {
    pub fn from_mesh<T: Real>(mesh: &Mesh<T>) -> Result<Self, MeshError> {
        let arcs = mesh.gamma_arcs()?;
        let mut nodes = Vec::new();
        let mut position = HashMap::new();
        let mut local_arcs = Vec::new();
        for arc in &arcs {
            let mut local = Vec::with_capacity(arc.nodes.len());
            for &v in &arc.nodes {
                let k = *position.entry(v).or_insert_with(|| {
                    nodes.push(v);
                    nodes.len() - 1
                });
                local.push(k);
            }
            local_arcs.push(Arc {
                nodes: local,
                closed: arc.closed,
            });
        }
        Ok(Self {
            nodes,
            arcs: local_arcs,
            position,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Position of a mesh node in the interface ordering.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.position.get(&node).copied()
    }

    /// Interface positions that are endpoints of open arcs.
    pub fn endpoints(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for arc in self.arcs.iter().filter(|a| !a.closed) {
            out.push(arc.nodes[0]);
            out.push(*arc.nodes.last().unwrap());
        }
        out
    }

    /// Interface edges as pairs of positions.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        self.arcs.iter().flat_map(|a| a.edges()).collect()
    }

    /// The same ordering re-expressed for another mesh through a node map.
    pub fn remap(&self, map: impl Fn(usize) -> Option<usize>) -> Option<Self> {
        let nodes: Option<Vec<usize>> = self.nodes.iter().map(|&v| map(v)).collect();
        let nodes = nodes?;
        let position = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        Some(Self {
            nodes,
            arcs: self.arcs.clone(),
            position,
        })
    }

    /// Current positions of the interface nodes of `mesh`.
    pub fn positions<T: Real>(&self, mesh: &Mesh<T>) -> Vec<Vec2<T>> {
        self.nodes.iter().map(|&v| mesh.nodes[v]).collect()
    }
}

impl<T: Real> Mesh<T> {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, t: usize) -> [Vec2<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn signed_area(&self, t: usize) -> T {
        let [a, b, c] = self.vertices(t);
        T::half() * scalar::cross(scalar::sub(b, a), scalar::sub(c, a))
    }

    pub fn area(&self, region: Option<Region>) -> T {
        (0..self.triangles.len())
            .filter(|&t| region.map_or(true, |r| self.regions[t] == r))
            .map(|t| self.signed_area(t))
            .sum()
    }

    pub fn has_region(&self, region: Region) -> bool {
        self.regions.iter().any(|&r| r == region)
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> + '_ {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn boundary_length(&self, tag: BoundaryTag) -> T {
        self.edges_with_tag(tag)
            .map(|e| scalar::dist(self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]))
            .sum()
    }

    /// Sorted, deduplicated nodes touched by edges with any of the tags.
    pub fn nodes_with_tags(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| tags.contains(&e.tag))
            .flat_map(|e| e.nodes)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn cast<S: Real>(&self) -> Mesh<S> {
        Mesh {
            nodes: scalar::cast_pts(&self.nodes),
            triangles: self.triangles.clone(),
            regions: self.regions.clone(),
            boundary_edges: self.boundary_edges.clone(),
        }
    }

    /// Translates every node; tags and connectivity are kept.
    pub fn deform(&self, displacement: &[Vec2<T>]) -> Mesh<T> {
        assert_eq!(displacement.len(), self.nodes.len(), "displacement length");
        let mut out = self.clone();
        for (x, u) in out.nodes.iter_mut().zip(displacement) {
            *x = scalar::add(*x, *u);
        }
        out
    }

    pub fn quality(&self) -> MeshQuality {
        let mut q = MeshQuality {
            min_angle: f64::INFINITY,
            max_aspect_ratio: 0.0,
            min_area: f64::INFINITY,
            inverted_count: 0,
        };
        for t in 0..self.triangles.len() {
            let p = self.vertices(t).map(|v| [v[0].f64(), v[1].f64()]);
            let area = 0.5 * scalar::cross(scalar::sub(p[1], p[0]), scalar::sub(p[2], p[0]));
            q.min_area = q.min_area.min(area);
            if area <= 0.0 {
                q.inverted_count += 1;
                q.min_angle = 0.0;
                q.max_aspect_ratio = f64::INFINITY;
                continue;
            }
            let l = [
                scalar::dist(p[1], p[2]),
                scalar::dist(p[2], p[0]),
                scalar::dist(p[0], p[1]),
            ];
            for k in 0..3 {
                let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
                let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
                q.min_angle = q.min_angle.min(cos.acos());
            }
            let lmax = l.iter().cloned().fold(0.0, f64::max);
            let per = l.iter().sum::<f64>();
            let aspect = lmax * per / (4.0 * 3f64.sqrt() * area);
            q.max_aspect_ratio = q.max_aspect_ratio.max(aspect);
        }
        q
    }

    /// Copy of the triangles of one region, with renumbered nodes. Boundary
    /// edges are kept when both endpoints survive and some triangle of the
    /// region contains the edge.
    pub fn submesh(&self, region: Region) -> Result<SubMesh<T>, MeshError> {
        let mut from_parent = vec![None; self.nodes.len()];
        let mut to_parent = Vec::new();
        let mut triangles = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.regions[t] != region {
                continue;
            }
            let mut local = [0; 3];
            for k in 0..3 {
                let v = tri[k];
                local[k] = *from_parent[v].get_or_insert_with(|| {
                    to_parent.push(v);
                    to_parent.len() - 1
                });
            }
            triangles.push(local);
        }
        if triangles.is_empty() {
            return Err(MeshError::NoRegion(region));
        }
        let mut tri_edges = std::collections::HashSet::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                tri_edges.insert((a.min(b), a.max(b)));
            }
        }
        let boundary_edges = self
            .boundary_edges
            .iter()
            .filter_map(|e| {
                let a = from_parent[e.nodes[0]]?;
                let b = from_parent[e.nodes[1]]?;
                tri_edges.contains(&(a.min(b), a.max(b))).then_some(BoundaryEdge {
                    nodes: [a, b],
                    tag: e.tag,
                })
            })
            .collect();
        let regions = vec![region; triangles.len()];
        Ok(SubMesh {
            mesh: Mesh {
                nodes: to_parent.iter().map(|&v| self.nodes[v]).collect(),
                triangles,
                regions,
                boundary_edges,
            },
            to_parent,
            from_parent,
        })
    }

    /// Chains the `Gamma` edges into arcs. Open arcs start at a node without
    /// incoming interface edge; remaining cycles become closed arcs.
    pub fn gamma_arcs(&self) -> Result<Vec<Arc>, MeshError> {
        chain_edges(
            self.edges_with_tag(BoundaryTag::Gamma).map(|e| e.nodes),
            "interface",
        )
    }

    /// Closed loops bounding the fluid (interface and mouth edges).
    pub fn fluid_loops(&self) -> Result<Vec<Vec<usize>>, MeshError> {
        let arcs = chain_edges(
            self.boundary_edges
                .iter()
                .filter(|e| e.tag.bounds_fluid())
                .map(|e| e.nodes),
            "fluid boundary",
        )?;
        arcs.into_iter()
            .map(|a| {
                if a.closed {
                    Ok(a.nodes)
                } else {
                    Err(MeshError::Invalid("fluid boundary is not closed".into()))
                }
            })
            .collect()
    }

    /// Whether the triangles of `region` form one edge-connected piece.
    pub fn is_connected(&self, region: Option<Region>) -> bool {
        let tris: Vec<usize> = (0..self.triangles.len())
            .filter(|&t| region.map_or(true, |r| self.regions[t] == r))
            .collect();
        if tris.is_empty() {
            return false;
        }
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (k, &t) in tris.iter().enumerate() {
            let tri = self.triangles[t];
            for j in 0..3 {
                let (a, b) = (tri[j], tri[(j + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(k);
            }
        }
        let mut adj = vec![Vec::new(); tris.len()];
        for ts in by_edge.values() {
            for &a in ts {
                for &b in ts {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        let mut seen = vec![false; tris.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(k) = stack.pop() {
            for &j in &adj[k] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == tris.len()
    }

    /// Checks the structural invariants listed in the module docs.
    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.nodes.len();
        if self.regions.len() != self.triangles.len() {
            return Err(MeshError::Invalid("one region per triangle".into()));
        }
        let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(MeshError::Invalid(format!("triangle {t} has a bad node index")));
            }
            if self.signed_area(t) <= T::zero() {
                return Err(MeshError::Invalid(format!("triangle {t} is not positively oriented")));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_tris.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut tagged = HashMap::new();
        for e in &self.boundary_edges {
            let [a, b] = e.nodes;
            let key = (a.min(b), a.max(b));
            if tagged.insert(key, e.tag).is_some() {
                return Err(MeshError::Invalid(format!("edge {a}-{b} tagged twice")));
            }
            let ts = edge_tris
                .get(&key)
                .ok_or_else(|| MeshError::Invalid(format!("tagged edge {a}-{b} is not a mesh edge")))?;
            if e.tag == BoundaryTag::Gamma {
                let fluid_left = ts.iter().any(|&t| {
                    self.regions[t] == Region::Fluid && oriented_in(self.triangles[t], a, b)
                });
                if !fluid_left {
                    return Err(MeshError::Invalid(format!(
                        "interface edge {a}-{b} does not have the fluid on its left"
                    )));
                }
                let regions: Vec<Region> = ts.iter().map(|&t| self.regions[t]).collect();
                if ts.len() == 2 && regions[0] == regions[1] {
                    return Err(MeshError::Invalid(format!("interface edge {a}-{b} inside one region")));
                }
            } else {
                if ts.len() != 1 {
                    return Err(MeshError::Invalid(format!("boundary edge {a}-{b} is interior")));
                }
                if !oriented_in(self.triangles[ts[0]], a, b) {
                    return Err(MeshError::Invalid(format!(
                        "boundary edge {a}-{b} does not have the domain on its left"
                    )));
                }
            }
        }
        for (key, ts) in &edge_tris {
            match ts.len() {
                1 if !tagged.contains_key(key) => {
                    return Err(MeshError::Invalid(format!("untagged boundary edge {key:?}")))
                }
                2 if self.regions[ts[0]] != self.regions[ts[1]]
                    && tagged.get(key) != Some(&BoundaryTag::Gamma) =>
                {
                    return Err(MeshError::Invalid(format!(
                        "region change across {key:?} without interface tag"
                    )))
                }
                1 | 2 => {}
                _ => return Err(MeshError::Invalid(format!("edge {key:?} shared by >2 triangles"))),
            }
        }
        Ok(())
    }

    /// Structured grid on the tensor product of `xs` and `ys` (both
    /// increasing). `tags` lists the bottom, right, top and left sides.
    pub fn tensor_grid(xs: &[T], ys: &[T], region: Region, tags: [BoundaryTag; 4]) -> Mesh<T> {
        let (nx, ny) = (xs.len(), ys.len());
        assert!(nx >= 2 && ny >= 2);
        let id = |i: usize, j: usize| j * nx + i;
        let mut nodes = Vec::with_capacity(nx * ny);
        for &y in ys {
            for &x in xs {
                nodes.push([x, y]);
            }
        }
        let mut triangles = Vec::new();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        let mut boundary_edges = Vec::new();
        for i in 0..nx - 1 {
            boundary_edges.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], tag: tags[0] });
        }
        for j in 0..ny - 1 {
            boundary_edges.push(BoundaryEdge { nodes: [id(nx - 1, j), id(nx - 1, j + 1)], tag: tags[1] });
        }
        for i in (0..nx - 1).rev() {
            boundary_edges.push(BoundaryEdge { nodes: [id(i + 1, ny - 1), id(i, ny - 1)], tag: tags[2] });
        }
        for j in (0..ny - 1).rev() {
            boundary_edges.push(BoundaryEdge { nodes: [id(0, j + 1), id(0, j)], tag: tags[3] });
        }
        let regions = vec![region; triangles.len()];
        Mesh {
            nodes,
            triangles,
            regions,
            boundary_edges,
        }
    }

    /// Uniform `nx` by `ny` cell grid on a rectangle.
    pub fn rectangle(
        lo: Vec2<T>,
        hi: Vec2<T>,
        nx: usize,
        ny: usize,
        region: Region,
        tags: [BoundaryTag; 4],
    ) -> Mesh<T> {
        let lin = |a: T, b: T, n: usize| -> Vec<T> {
            (0..=n)
                .map(|k| a + (b - a) * T::lit(k as f64) / T::lit(n as f64))
                .collect()
        };
        Self::tensor_grid(&lin(lo[0], hi[0], nx), &lin(lo[1], hi[1], ny), region, tags)
    }
}

fn oriented_in(tri: [usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|k| tri[k] == a && tri[(k + 1) % 3] == b)
}

fn chain_edges(edges: impl Iterator<Item = [usize; 2]>, what: &str) -> Result<Vec<Arc>, MeshError> {
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut has_incoming = std::collections::HashSet::new();
    let mut order = Vec::new();
    for [a, b] in edges {
        if next.insert(a, b).is_some() {
            return Err(MeshError::Invalid(format!("{what} branches at node {a}")));
        }
        if !has_incoming.insert(b) {
            return Err(MeshError::Invalid(format!("{what} merges at node {b}")));
        }
        order.push(a);
    }
    let mut used = std::collections::HashSet::new();
    let mut arcs = Vec::new();
    for &start in order.iter().filter(|v| !has_incoming.contains(*v)) {
        let mut nodes = vec![start];
        let mut v = start;
        while let Some(&w) = next.get(&v) {
            used.insert(v);
            nodes.push(w);
            v = w;
        }
        arcs.push(Arc { nodes, closed: false });
    }
    for &start in &order {
        if used.contains(&start) {
            continue;
        }
        let mut nodes = vec![start];
        used.insert(start);
        let mut v = next[&start];
        while v != start {
            used.insert(v);
            nodes.push(v);
            v = next[&v];
        }
        arcs.push(Arc { nodes, closed: true });
    }
    Ok(arcs)
}
