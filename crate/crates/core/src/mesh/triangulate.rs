//! Constrained Delaunay refinement of a [`Pslg`] (backed by `spade`).

use std::collections::HashMap;

use spade::handles::FixedVertexHandle;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{BoundaryEdge, BoundaryTag, Mesh, MeshError, Pslg, Region, Segment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangulateOptions {
    /// Target edge length in the bulk.
    pub h: f64,
    /// Interface segments are pre-split to at most `h / refine_interface`.
    pub refine_interface: f64,
    pub min_angle_deg: f64,
    /// Forbid splitting of input segments (used when remeshing so that the
    /// interface nodes survive).
    pub keep_constraint_edges: bool,
    /// Split input segments to the target length before meshing.
    pub presplit: bool,
    pub max_additional_vertices: usize,
}

impl TriangulateOptions {
    pub fn new(h: f64, refine_interface: f64) -> Self {
        Self {
            h,
            refine_interface,
            min_angle_deg: 25.0,
            keep_constraint_edges: false,
            presplit: true,
            max_additional_vertices: 5_000_000,
        }
    }
}

pub fn triangulate(pslg: &Pslg, opts: &TriangulateOptions) -> Result<Mesh<f64>, MeshError> {
    if !(opts.h > 0.0) || !(opts.refine_interface >= 1.0) {
        return Err(MeshError::Geometry("h > 0 and refine_interface ≥ 1 required".into()));
    }
    let (points, segments) = if opts.presplit {
        presplit(pslg, opts)
    } else {
        (pslg.points.clone(), pslg.segments.clone())
    };
    check_intersections(&points, &segments)?;

    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let mut handles: Vec<FixedVertexHandle> = Vec::with_capacity(points.len());
    for p in &points {
        let h = cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| MeshError::Triangulation(format!("{e:?}")))?;
        handles.push(h);
    }
    if cdt.num_vertices() != points.len() {
        return Err(MeshError::Geometry("duplicate input points".into()));
    }
    for (k, s) in segments.iter().enumerate() {
        if cdt.try_add_constraint(handles[s.a], handles[s.b]).is_empty() {
            return Err(MeshError::SelfIntersection(k, k));
        }
    }

    let mut params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(opts.min_angle_deg))
        .with_max_allowed_area(3f64.sqrt() / 4.0 * opts.h * opts.h)
        .with_max_additional_vertices(opts.max_additional_vertices)
        .exclude_outer_faces(pslg.exclude_outside);
    if opts.keep_constraint_edges {
        params = params.keep_constraint_edges();
    }
    let result = cdt.refine(params);
    if !result.refinement_complete {
        log::warn!("mesh refinement stopped at the vertex limit");
    }
    let excluded: std::collections::HashSet<_> = result.excluded_faces.into_iter().collect();

    // Compact numbering over the vertices that are used by kept faces, with
    // input points first in input order.
    let mut triangles_raw = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let v = face.vertices().map(|v| v.fix().index());
        triangles_raw.push(v);
    }
    let nv = cdt.num_vertices();
    let mut used = vec![false; nv];
    for t in &triangles_raw {
        for &v in t {
            used[v] = true;
        }
    }
    let input_index: HashMap<usize, usize> =
        handles.iter().enumerate().map(|(k, h)| (h.index(), k)).collect();
    let mut order: Vec<usize> = handles.iter().map(|h| h.index()).filter(|&v| used[v]).collect();
    order.extend((0..nv).filter(|v| used[*v] && !input_index.contains_key(v)));
    let mut new_id = vec![usize::MAX; nv];
    for (k, &v) in order.iter().enumerate() {
        new_id[v] = k;
    }
    let positions: Vec<[f64; 2]> = cdt
        .vertices()
        .map(|v| {
            let p = v.position();
            [p.x, p.y]
        })
        .collect();
    let nodes: Vec<[f64; 2]> = order.iter().map(|&v| positions[v]).collect();
    let triangles: Vec<[usize; 3]> = triangles_raw
        .iter()
        .map(|t| t.map(|v| new_id[v]))
        .collect();

    // Recover tags: every constraint edge lies on exactly one input segment.
    let locator = SegmentLocator::new(&points, &segments);
    let mut boundary_edges = Vec::new();
    for edge in cdt.undirected_edges() {
        if !edge.is_constraint_edge() {
            continue;
        }
        let [a, b] = edge.vertices().map(|v| v.fix().index());
        if !used[a] || !used[b] {
            continue;
        }
        let (pa, pb) = (positions[a], positions[b]);
        let seg = locator.find(pa, pb).ok_or_else(|| {
            MeshError::Triangulation(format!("constraint edge {pa:?}-{pb:?} matches no segment"))
        })?;
        let dir = locator.direction(seg);
        let forward = (pb[0] - pa[0]) * dir[0] + (pb[1] - pa[1]) * dir[1] > 0.0;
        let nodes = if forward {
            [new_id[a], new_id[b]]
        } else {
            [new_id[b], new_id[a]]
        };
        boundary_edges.push(BoundaryEdge { nodes, tag: segments[seg].tag });
    }
    boundary_edges.sort_by_key(|e| (e.tag, e.nodes));

    let polygons = fluid_polygons(&points, &segments)?;
    let regions = triangles
        .iter()
        .map(|t| {
            let c = [
                (nodes[t[0]][0] + nodes[t[1]][0] + nodes[t[2]][0]) / 3.0,
                (nodes[t[0]][1] + nodes[t[1]][1] + nodes[t[2]][1]) / 3.0,
            ];
            if polygons.iter().filter(|poly| point_in_polygon(c, poly)).count() % 2 == 1 {
                Region::Fluid
            } else {
                Region::Solid
            }
        })
        .collect();

    let mesh = Mesh {
        nodes,
        triangles,
        regions,
        boundary_edges,
    };
    mesh.validate()?;
    Ok(mesh)
}

fn presplit(pslg: &Pslg, opts: &TriangulateOptions) -> (Vec<[f64; 2]>, Vec<Segment>) {
    let mut points = pslg.points.clone();
    let mut segments = Vec::new();
    for s in &pslg.segments {
        let (pa, pb) = (pslg.points[s.a], pslg.points[s.b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let target = if s.tag == BoundaryTag::Gamma {
            opts.h / opts.refine_interface
        } else {
            opts.h
        };
        let n = ((len / target) * (1.0 - 1e-9)).ceil().max(1.0) as usize;
        let mut prev = s.a;
        for k in 1..=n {
            let next = if k == n {
                s.b
            } else {
                let t = k as f64 / n as f64;
                points.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                points.len() - 1
            };
            segments.push(Segment { a: prev, b: next, tag: s.tag });
            prev = next;
        }
    }
    (points, segments)
}

fn check_intersections(points: &[[f64; 2]], segments: &[Segment]) -> Result<(), MeshError> {
    let bbox: Vec<[f64; 4]> = segments
        .iter()
        .map(|s| {
            let (a, b) = (points[s.a], points[s.b]);
            [a[0].min(b[0]), a[1].min(b[1]), a[0].max(b[0]), a[1].max(b[1])]
        })
        .collect();
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&i, &j| bbox[i][0].total_cmp(&bbox[j][0]));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if bbox[j][0] > bbox[i][2] {
                break;
            }
            if bbox[j][1] > bbox[i][3] || bbox[j][3] < bbox[i][1] {
                continue;
            }
            let (si, sj) = (segments[i], segments[j]);
            if segments_cross(points, si, sj) {
                return Err(MeshError::SelfIntersection(i.min(j), i.max(j)));
            }
        }
    }
    Ok(())
}

/// True when two segments share a point other than a common endpoint.
pub(crate) fn segments_cross(points: &[[f64; 2]], s: Segment, t: Segment) -> bool {
    let shared = [s.a, s.b].iter().filter(|v| **v == t.a || **v == t.b).count();
    let (p, q, r, u) = (points[s.a], points[s.b], points[t.a], points[t.b]);
    if shared == 2 {
        return true;
    }
    if shared == 1 {
        // only overlap along a common line counts
        let (o, x, y) = if s.a == t.a || s.a == t.b {
            (p, q, if s.a == t.a { u } else { r })
        } else {
            (q, p, if s.b == t.a { u } else { r })
        };
        let c = orient(o, x, y);
        let dot = (x[0] - o[0]) * (y[0] - o[0]) + (x[1] - o[1]) * (y[1] - o[1]);
        return c == 0.0 && dot > 0.0;
    }
    crate::mesh::remesh::proper_or_touching(p, q, r, u)
}

pub(crate) fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

struct SegmentLocator<'a> {
    points: &'a [[f64; 2]],
    segments: &'a [Segment],
    cell: f64,
    origin: [f64; 2],
    grid: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> SegmentLocator<'a> {
    fn new(points: &'a [[f64; 2]], segments: &'a [Segment]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut total = 0.0;
        for s in segments {
            let (a, b) = (points[s.a], points[s.b]);
            total += (b[0] - a[0]).hypot(b[1] - a[1]);
            for p in [a, b] {
                lo[0] = lo[0].min(p[0]);
                lo[1] = lo[1].min(p[1]);
            }
        }
        let cell = (total / segments.len().max(1) as f64).max(1e-12);
        let mut loc = Self {
            points,
            segments,
            cell,
            origin: lo,
            grid: HashMap::new(),
        };
        for (k, s) in segments.iter().enumerate() {
            let (a, b) = (points[s.a], points[s.b]);
            let (i0, j0) = loc.key([a[0].min(b[0]), a[1].min(b[1])]);
            let (i1, j1) = loc.key([a[0].max(b[0]), a[1].max(b[1])]);
            for i in i0 - 1..=i1 + 1 {
                for j in j0 - 1..=j1 + 1 {
                    loc.grid.entry((i, j)).or_default().push(k);
                }
            }
        }
        loc
    }

    fn key(&self, p: [f64; 2]) -> (i64, i64) {
        (
            ((p[0] - self.origin[0]) / self.cell).floor() as i64,
            ((p[1] - self.origin[1]) / self.cell).floor() as i64,
        )
    }

    fn direction(&self, k: usize) -> [f64; 2] {
        let s = self.segments[k];
        let (a, b) = (self.points[s.a], self.points[s.b]);
        [b[0] - a[0], b[1] - a[1]]
    }

    fn distance(&self, k: usize, p: [f64; 2]) -> f64 {
        let s = self.segments[k];
        let (a, b) = (self.points[s.a], self.points[s.b]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0);
        (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
    }

    /// Segment containing both endpoints of a sub-edge.
    fn find(&self, pa: [f64; 2], pb: [f64; 2]) -> Option<usize> {
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let tol = 1e-9 * len.max(self.cell);
        self.grid
            .get(&self.key(mid))?
            .iter()
            .copied()
            .filter(|&k| self.distance(k, pa) <= tol && self.distance(k, pb) <= tol)
            .min_by(|&i, &j| self.distance(i, mid).total_cmp(&self.distance(j, mid)))
    }
}

/// Closed loops of fluid-bounding segments, as coordinate lists.
fn fluid_polygons(points: &[[f64; 2]], segments: &[Segment]) -> Result<Vec<Vec<[f64; 2]>>, MeshError> {
    let mut next = HashMap::new();
    for s in segments.iter().filter(|s| s.tag.bounds_fluid()) {
        next.insert(s.a, s.b);
    }
    let mut seen = std::collections::HashSet::new();
    let mut polys = Vec::new();
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    for start in starts {
        if seen.contains(&start) {
            continue;
        }
        let mut poly = Vec::new();
        let mut v = start;
        loop {
            if !seen.insert(v) {
                break;
            }
            poly.push(points[v]);
            match next.get(&v) {
                Some(&w) => v = w,
                None => {
                    return Err(MeshError::Geometry("fluid boundary is not closed".into()));
                }
            }
        }
        if v != start {
            return Err(MeshError::Geometry("fluid boundary is not a simple loop".into()));
        }
        polys.push(poly);
    }
    Ok(polys)
}

pub(crate) fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}
