//! Uniform bucket grid over segments, used for the radius-limited distance
//! queries behind the tangent-ball predicates and the pinch search.

use crate::geometry::Point2;

const MAX_CELLS: usize = 1 << 22;

/// A closed-polyline segment tagged with its curve and edge index.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
    pub curve: u32,
    pub edge: u32,
}

impl Segment {
    pub fn distance(&self, p: Point2) -> f64 {
        point_segment_distance(p, self.a, self.b)
    }
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Parameter of the closest point on segment `ab` to `p`, in `[0, 1]`.
pub fn closest_parameter(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct SegmentIndex {
    segments: Vec<Segment>,
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl SegmentIndex {
    /// Builds the index over closed polylines. `cell_hint` is the preferred cell
    /// size; it is enlarged when the bounding box would need too many cells.
    pub fn new<'a, I>(curves: I, cell_hint: f64) -> Self
    where
        I: IntoIterator<Item = &'a [Point2]>,
    {
        let mut segments = Vec::new();
        for (k, pts) in curves.into_iter().enumerate() {
            let n = pts.len();
            for i in 0..n {
                segments.push(Segment {
                    a: pts[i],
                    b: pts[(i + 1) % n],
                    curve: k as u32,
                    edge: i as u32,
                });
            }
        }
        Self::from_segments(segments, cell_hint)
    }

    pub fn from_segments(segments: Vec<Segment>, cell_hint: f64) -> Self {
        let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
        for s in &segments {
            for p in [s.a, s.b] {
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
            }
        }
        if segments.is_empty() {
            lo = Point2::new(0.0, 0.0);
            hi = lo;
        }
        let w = (hi.x - lo.x).max(1e-300);
        let h = (hi.y - lo.y).max(1e-300);
        let mut cell = if cell_hint.is_finite() && cell_hint > 0.0 { cell_hint } else { w.max(h) };
        let max_cells = (4 * segments.len()).clamp(1024, MAX_CELLS);
        let min_cell = (w * h / max_cells as f64).sqrt();
        cell = cell.max(min_cell).max(w.max(h) / 4096.0);
        let nx = ((w / cell).floor() as usize + 1).max(1);
        let ny = ((h / cell).floor() as usize + 1).max(1);

        let mut counts = vec![0u32; nx * ny + 1];
        let cell_range = |s: &Segment| {
            let (x0, x1) = (s.a.x.min(s.b.x), s.a.x.max(s.b.x));
            let (y0, y1) = (s.a.y.min(s.b.y), s.a.y.max(s.b.y));
            let ix0 = (((x0 - lo.x) / cell).floor() as usize).min(nx - 1);
            let ix1 = (((x1 - lo.x) / cell).floor() as usize).min(nx - 1);
            let iy0 = (((y0 - lo.y) / cell).floor() as usize).min(ny - 1);
            let iy1 = (((y1 - lo.y) / cell).floor() as usize).min(ny - 1);
            (ix0, ix1, iy0, iy1)
        };
        for s in &segments {
            let (ix0, ix1, iy0, iy1) = cell_range(s);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    counts[iy * nx + ix + 1] += 1;
                }
            }
        }
        for c in 1..counts.len() {
            counts[c] += counts[c - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; *counts.last().unwrap() as usize];
        for (id, s) in segments.iter().enumerate() {
            let (ix0, ix1, iy0, iy1) = cell_range(s);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    let c = iy * nx + ix;
                    items[fill[c] as usize] = id as u32;
                    fill[c] += 1;
                }
            }
        }
        SegmentIndex { segments, origin: lo, cell, nx, ny, starts: counts, items }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Calls `visit` for every segment stored in a cell that overlaps the
    /// square of half-side `radius` around `p`. A segment can be visited more
    /// than once. Returning `false` from `visit` stops the scan.
    pub fn for_each_near<F: FnMut(u32, &Segment) -> bool>(&self, p: Point2, radius: f64, mut visit: F) {
        let fx0 = (p.x - radius - self.origin.x) / self.cell;
        let fx1 = (p.x + radius - self.origin.x) / self.cell;
        let fy0 = (p.y - radius - self.origin.y) / self.cell;
        let fy1 = (p.y + radius - self.origin.y) / self.cell;
        if fx1 < 0.0 || fy1 < 0.0 || fx0 >= self.nx as f64 || fy0 >= self.ny as f64 {
            return;
        }
        let ix0 = fx0.max(0.0) as usize;
        let iy0 = fy0.max(0.0) as usize;
        let ix1 = (fx1 as usize).min(self.nx - 1);
        let iy1 = (fy1 as usize).min(self.ny - 1);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let c = iy * self.nx + ix;
                for &id in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                    if !visit(id, &self.segments[id as usize]) {
                        return;
                    }
                }
            }
        }
    }

    /// True if some segment passes strictly closer than `d` to `p`.
    pub fn any_closer_than(&self, p: Point2, d: f64) -> bool {
        let mut hit = false;
        self.for_each_near(p, d, |_, s| {
            if s.distance(p) < d {
                hit = true;
                false
            } else {
                true
            }
        });
        hit
    }

    /// Minimum distance from `p` to the segments within `radius`, if any.
    pub fn min_distance_within(&self, p: Point2, radius: f64) -> Option<f64> {
        let mut best = f64::INFINITY;
        self.for_each_near(p, radius, |_, s| {
            best = best.min(s.distance(p));
            true
        });
        (best <= radius).then_some(best)
    }
}

const LEAF: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: Point2,
    hi: Point2,
    /// Segment range for leaves, child indices otherwise.
    start: u32,
    end: u32,
    leaf: bool,
}

/// Bounding-box hierarchy over runs of consecutive segments. Neighbouring
/// edges of a polyline are spatially close, so splitting index ranges in half
/// gives tight boxes without any sorting.
#[derive(Debug, Clone)]
pub struct SegmentTree {
    segments: Vec<Segment>,
    nodes: Vec<Node>,
    roots: Vec<u32>,
}

fn box_distance2(p: Point2, lo: Point2, hi: Point2) -> f64 {
    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
    dx * dx + dy * dy
}

impl SegmentTree {
    pub fn new<'a, I>(curves: I) -> Self
    where
        I: IntoIterator<Item = &'a [Point2]>,
    {
        let mut tree = SegmentTree { segments: Vec::new(), nodes: Vec::new(), roots: Vec::new() };
        for (k, pts) in curves.into_iter().enumerate() {
            let n = pts.len();
            let first = tree.segments.len();
            for i in 0..n {
                tree.segments.push(Segment { a: pts[i], b: pts[(i + 1) % n], curve: k as u32, edge: i as u32 });
            }
            if n > 0 {
                let root = tree.build(first, first + n);
                tree.roots.push(root);
            }
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        if end - start <= LEAF {
            let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
            for s in &self.segments[start..end] {
                for p in [s.a, s.b] {
                    lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
                    hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
                }
            }
            self.nodes.push(Node { lo, hi, start: start as u32, end: end as u32, leaf: true });
        } else {
            let mid = start + (end - start) / 2;
            let l = self.build(start, mid);
            let r = self.build(mid, end);
            let (a, b) = (self.nodes[l as usize], self.nodes[r as usize]);
            self.nodes.push(Node {
                lo: Point2::new(a.lo.x.min(b.lo.x), a.lo.y.min(b.lo.y)),
                hi: Point2::new(a.hi.x.max(b.hi.x), a.hi.y.max(b.hi.y)),
                start: l,
                end: r,
                leaf: false,
            });
        }
        (self.nodes.len() - 1) as u32
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Calls `visit` for every segment whose bounding box lies within `radius`
    /// of `p`; returning `false` stops the scan.
    pub fn for_each_near<F: FnMut(u32, &Segment) -> bool>(&self, p: Point2, radius: f64, mut visit: F) {
        let r2 = radius * radius;
        let mut stack: Vec<u32> = self.roots.clone();
        while let Some(id) = stack.pop() {
            let nd = self.nodes[id as usize];
            if box_distance2(p, nd.lo, nd.hi) > r2 {
                continue;
            }
            if nd.leaf {
                for k in nd.start..nd.end {
                    if !visit(k, &self.segments[k as usize]) {
                        return;
                    }
                }
            } else {
                stack.push(nd.start);
                stack.push(nd.end);
            }
        }
    }

    /// True if some segment passes strictly closer than `d` to `p`.
    pub fn any_closer_than(&self, p: Point2, d: f64) -> bool {
        let d2 = d * d;
        let mut stack: Vec<u32> = self.roots.clone();
        while let Some(id) = stack.pop() {
            let nd = self.nodes[id as usize];
            if box_distance2(p, nd.lo, nd.hi) >= d2 {
                continue;
            }
            if nd.leaf {
                if self.segments[nd.start as usize..nd.end as usize].iter().any(|s| s.distance(p) < d) {
                    return true;
                }
            } else {
                stack.push(nd.start);
                stack.push(nd.end);
            }
        }
        false
    }
}
