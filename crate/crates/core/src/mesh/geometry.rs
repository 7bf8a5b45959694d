//! Piecewise-linear boundary descriptions of the meshed domains.

use std::f64::consts::FRAC_PI_2;

use super::{BoundaryTag, MeshError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Planar straight-line graph: points, tagged segments and whether the
/// triangulation should drop everything outside the outermost loop.
///
/// Segment orientation follows the mesh conventions (domain on the left,
/// fluid on the left for `Gamma`).
#[derive(Debug, Clone, PartialEq)]
pub struct Pslg {
    pub points: Vec<[f64; 2]>,
    pub segments: Vec<Segment>,
    /// Set when the domain is not its own convex hull.
    pub exclude_outside: bool,
}

impl Pslg {
    fn new() -> Self {
        Self {
            points: Vec::new(),
            segments: Vec::new(),
            exclude_outside: false,
        }
    }

    /// Index of `p`, inserting it unless an identical point exists.
    fn point(&mut self, p: [f64; 2]) -> usize {
        if let Some(k) = self.points.iter().position(|q| q == &p) {
            return k;
        }
        self.points.push(p);
        self.points.len() - 1
    }

    /// Adds a polyline, skipping zero-length pieces.
    fn polyline(&mut self, pts: &[[f64; 2]], tag: BoundaryTag) {
        let ids: Vec<usize> = pts.iter().map(|&p| self.point(p)).collect();
        for w in ids.windows(2) {
            if w[0] != w[1] {
                self.segments.push(Segment { a: w[0], b: w[1], tag });
            }
        }
    }
}

/// Channel geometry in units of the length scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    pub d: f64,
    pub l: f64,
    pub s: f64,
    pub thickness: f64,
    pub fillet: f64,
}

impl ChannelGeometry {
    pub fn y_min(&self) -> f64 {
        -0.5 * self.d - self.thickness
    }

    pub fn y_max(&self) -> f64 {
        self.s + 0.5 * self.d + self.thickness
    }

    /// Area of the two channels (sharp corners).
    pub fn channel_area(&self) -> f64 {
        2.0 * self.l * self.d
    }

    pub fn box_area(&self) -> f64 {
        2.0 * self.l * (self.y_max() - self.y_min())
    }
}

/// Box `[0, 2l] x [y_min, y_max]` with the two channels. The lower interface
/// arc runs from the inlet to the outlet, the upper one back; both carry the
/// fluid on their left.
pub fn build_reference_domain(g: &ChannelGeometry, h_interface: f64) -> Result<Pslg, MeshError> {
    let ChannelGeometry { d, l, s, thickness, fillet } = *g;
    if !(d > 0.0 && l > 0.0 && thickness > 0.0 && s >= 0.0) {
        return Err(MeshError::Geometry(format!(
            "need d > 0, l > 0, thickness > 0, s ≥ 0 (got d={d}, l={l}, thickness={thickness}, s={s})"
        )));
    }
    if s >= d {
        return Err(MeshError::ChannelsDisconnected { s, d });
    }
    let r = if s > 0.0 { fillet } else { 0.0 };
    if r < 0.0 || 2.0 * r > s || r > l {
        return Err(MeshError::FilletTooLarge { r, limit: s.min(2.0 * l) });
    }
    let (y0, y1) = (g.y_min(), g.y_max());
    let hd = 0.5 * d;
    let x2 = 2.0 * l;

    let bottom = corner_path(
        &[[0.0, -hd], [l, -hd], [l, s - hd], [x2, s - hd]],
        r,
        h_interface,
    );
    let top = corner_path(
        &[[x2, s + hd], [l, s + hd], [l, hd], [0.0, hd]],
        r,
        h_interface,
    );

    let mut p = Pslg::new();
    use BoundaryTag::*;
    p.polyline(&[[0.0, y0], [x2, y0]], Sigma);
    p.polyline(&[[x2, y0], [x2, s - hd]], Pi);
    p.polyline(&[[x2, s - hd], [x2, s + hd]], O0);
    p.polyline(&[[x2, s + hd], [x2, y1]], Pi);
    p.polyline(&[[x2, y1], [0.0, y1]], Sigma);
    p.polyline(&[[0.0, y1], [0.0, hd]], Z0);
    p.polyline(&[[0.0, hd], [0.0, -hd]], I0);
    p.polyline(&[[0.0, -hd], [0.0, y0]], Z0);
    p.polyline(&bottom, Gamma);
    p.polyline(&top, Gamma);
    Ok(p)
}

/// Replaces the interior corners of an axis-aligned polyline by quarter
/// circles of radius `r`, discretized with pieces of length about `h`.
fn corner_path(pts: &[[f64; 2]], r: f64, h: f64) -> Vec<[f64; 2]> {
    let mut out = vec![pts[0]];
    for k in 1..pts.len() - 1 {
        let (p, q, n) = (pts[k - 1], pts[k], pts[k + 1]);
        let a = unit([q[0] - p[0], q[1] - p[1]]);
        let b = unit([n[0] - q[0], n[1] - q[1]]);
        if r <= 0.0 || a == b || a.iter().chain(b.iter()).any(|v| v.is_nan()) {
            out.push(q);
            continue;
        }
        // centre sits at q - r a + r b; the arc runs from direction -b to a.
        let c = [q[0] - r * a[0] + r * b[0], q[1] - r * a[1] + r * b[1]];
        let m = ((FRAC_PI_2 * r / h).ceil() as usize).max(2);
        for j in 0..=m {
            let t = FRAC_PI_2 * j as f64 / m as f64;
            let (sn, cs) = t.sin_cos();
            out.push([
                c[0] + r * (-cs * b[0] + sn * a[0]),
                c[1] + r * (-cs * b[1] + sn * a[1]),
            ]);
        }
    }
    out.push(*pts.last().unwrap());
    out
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Closed polygon with every segment carrying `tag`. Counterclockwise input
/// puts the enclosed region on the left.
pub fn polygon_pslg(points: &[[f64; 2]], tag: BoundaryTag) -> Pslg {
    let mut p = Pslg::new();
    let mut closed = points.to_vec();
    closed.push(points[0]);
    p.polyline(&closed, tag);
    p.exclude_outside = true;
    p
}

/// Fluid disk of radius `r` bounded by `n` interface segments.
pub fn build_disk(r: f64, n: usize) -> Pslg {
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    polygon_pslg(&pts, BoundaryTag::Gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig() -> ChannelGeometry {
        ChannelGeometry { d: 2.0, l: 10.0, s: 0.5, thickness: 6.0, fillet: 0.0 }
    }

    fn gamma_points(p: &Pslg) -> Vec<[f64; 2]> {
        p.segments
            .iter()
            .filter(|s| s.tag == BoundaryTag::Gamma)
            .flat_map(|s| [p.points[s.a], p.points[s.b]])
            .collect()
    }

    #[test]
    fn step_walls_have_offset_height() {
        let p = build_reference_domain(&fig(), 0.1).unwrap();
        let g: Vec<_> = p
            .segments
            .iter()
            .filter(|s| s.tag == BoundaryTag::Gamma)
            .map(|s| (p.points[s.a], p.points[s.b]))
            .filter(|(a, b)| a[0] == 10.0 && b[0] == 10.0)
            .collect();
        assert_eq!(g.len(), 2);
        for (a, b) in g {
            assert!(((a[1] - b[1]).abs() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_offset_gives_straight_walls() {
        let p = build_reference_domain(&ChannelGeometry { s: 0.0, ..fig() }, 0.1).unwrap();
        for q in gamma_points(&p) {
            assert_eq!(q[1].abs(), 1.0);
        }
        assert_eq!(p.segments.iter().filter(|s| s.tag == BoundaryTag::Gamma).count(), 4);
    }

    #[test]
    fn disconnected_channels_rejected() {
        let err = build_reference_domain(&ChannelGeometry { s: 2.0, ..fig() }, 0.1).unwrap_err();
        assert!(err.to_string().contains("channels disconnected"));
    }

    #[test]
    fn fillets_replace_corners() {
        let g = ChannelGeometry { l: 5.0, fillet: 0.2, ..fig() };
        let p = build_reference_domain(&g, 0.02).unwrap();
        let pts = gamma_points(&p);
        assert!(!pts.contains(&[5.0, -1.0]));
        // arc points lie at distance r from the centre (5 - 0.2, -1 + 0.2)
        let on_arc = pts
            .iter()
            .filter(|q| q[0] > 4.8 && q[0] < 5.0 && q[1] < -0.8)
            .count();
        assert!(on_arc > 5);
        assert!(build_reference_domain(&ChannelGeometry { fillet: 0.3, ..g }, 0.02).is_err());
    }
}
