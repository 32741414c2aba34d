//! Closed polylines representing boundaries of planar sets, and the geometric
//! primitives the other modules consume.
//!
//! A [`PlanarCurve`] is always simple and counterclockwise, so the enclosed
//! set lies to the left of the tangent and the outward normal is the tangent
//! rotated by -90 degrees.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::point_segment_distance;

pub const MIN_VERTICES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Rotation by -90 degrees; for a CCW tangent this is the outward normal.
    pub fn rot_cw(self) -> Point2 {
        Point2::new(self.y, -self.x)
    }

    pub fn rot_ccw(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        Point2::new(self.x / n, self.y / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        self + (o - self) * t
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Twice the signed area of triangle `abc`; positive for a left turn.
pub fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

/// Shoelace area, positive for counterclockwise vertex order.
pub fn polygon_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += pts[i].cross(pts[(i + 1) % n]);
    }
    0.5 * acc
}

pub fn polygon_perimeter(pts: &[Point2]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| pts[i].dist(pts[(i + 1) % n])).sum()
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection using orientation signs.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, b, c))
        || (d2 == 0.0 && on_segment(a, b, d))
        || (d3 == 0.0 && on_segment(c, d, a))
        || (d4 == 0.0 && on_segment(c, d, b))
}

/// Edges of one or more closed polylines, as `(curve, edge)` pairs, that
/// intersect improperly. Adjacent edges of the same polyline may share their
/// common endpoint; they only count if they fold back onto each other.
fn first_crossing(polys: &[&[Point2]]) -> Option<((usize, usize), (usize, usize))> {
    struct E {
        a: Point2,
        b: Point2,
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
        curve: usize,
        edge: usize,
    }
    let mut edges = Vec::new();
    for (k, pts) in polys.iter().enumerate() {
        let n = pts.len();
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            edges.push(E {
                a,
                b,
                xmin: a.x.min(b.x),
                xmax: a.x.max(b.x),
                ymin: a.y.min(b.y),
                ymax: a.y.max(b.y),
                curve: k,
                edge: i,
            });
        }
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&i, &j| edges[i].xmin.total_cmp(&edges[j].xmin));
    let mut active: Vec<usize> = Vec::new();
    for &id in &order {
        let e = &edges[id];
        active.retain(|&o| edges[o].xmax >= e.xmin);
        for &o in &active {
            let f = &edges[o];
            if f.ymax < e.ymin || f.ymin > e.ymax {
                continue;
            }
            if e.curve == f.curve {
                let n = polys[e.curve].len();
                let (i, j) = (e.edge, f.edge);
                let next = |k: usize| (k + 1) % n;
                if next(i) == j || next(j) == i {
                    // shared endpoint; a fold-back is collinear with opposite directions
                    let (p, q) = if next(i) == j { (e, f) } else { (f, e) };
                    let u = p.b - p.a;
                    let v = q.b - q.a;
                    if u.cross(v) == 0.0 && u.dot(v) < 0.0 {
                        return Some(((e.curve, e.edge), (f.curve, f.edge)));
                    }
                    continue;
                }
            }
            if segments_intersect(e.a, e.b, f.a, f.b) {
                return Some(((e.curve, e.edge), (f.curve, f.edge)));
            }
        }
        active.push(id);
    }
    None
}

/// Whether two closed polylines share a point.
pub fn polylines_cross(a: &[Point2], b: &[Point2]) -> bool {
    first_crossing(&[a, b]).is_some_and(|((ca, _), (cb, _))| ca != cb)
}

/// Whether the closed polyline through `pts` has no self-intersections.
pub fn is_simple(pts: &[Point2]) -> bool {
    pts.len() >= 3 && first_crossing(&[pts]).is_none()
}

/// Ray-crossing point-in-polygon test.
pub fn point_in_polygon(pts: &[Point2], p: Point2) -> bool {
    let n = pts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Resamples the closed polyline `pts` at `n` points equally spaced in
/// arclength, starting at `pts[0]`.
pub fn resample_closed(pts: &[Point2], n: usize) -> Vec<Point2> {
    let m = pts.len();
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for i in 0..m {
        let l = pts[i].dist(pts[(i + 1) % m]);
        cum.push(cum[i] + l);
    }
    let total = cum[m];
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for j in 0..n {
        let s = total * j as f64 / n as f64;
        while seg + 1 < m && cum[seg + 1] <= s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(pts[seg].lerp(pts[(seg + 1) % m], t));
    }
    out
}

/// Closed, simple, counterclockwise polyline with at least 16 vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarCurve {
    vertices: Vec<Point2>,
}

impl PlanarCurve {
    /// Validates the vertices and normalizes the orientation to counterclockwise.
    /// Degenerate input is rejected, never repaired.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < MIN_VERTICES {
            return Err(Error::InvalidCurve(format!("{n} vertices, need at least {MIN_VERTICES}")));
        }
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidCurve(format!("vertex {i} is not finite")));
        }
        let perimeter = polygon_perimeter(&vertices);
        let min_sep = 1e-12 * perimeter;
        for i in 0..n {
            if vertices[i].dist(vertices[(i + 1) % n]) <= min_sep {
                return Err(Error::InvalidCurve(format!("vertices {i} and {} coincide", (i + 1) % n)));
            }
        }
        if let Some(((_, i), (_, j))) = first_crossing(&[&vertices]) {
            return Err(Error::InvalidCurve(format!("edges {i} and {j} intersect")));
        }
        if polygon_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Ok(PlanarCurve { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point2> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        polygon_perimeter(&self.vertices)
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|i| self.vertices[i].dist(self.vertices[(i + 1) % n])).collect()
    }

    pub fn min_edge(&self) -> f64 {
        self.edge_lengths().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_edge(&self) -> f64 {
        self.perimeter() / self.len() as f64
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.len();
        let a = self.area();
        let mut c = Point2::default();
        for i in 0..n {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let w = p.cross(q);
            c += (p + q) * w;
        }
        c * (1.0 / (6.0 * a))
    }

    /// Cumulative arclength at each vertex, starting from zero at vertex 0.
    pub fn arclengths(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for (i, l) in self.edge_lengths().into_iter().enumerate() {
            s.push(acc);
            if i + 1 < self.len() {
                acc += l;
            }
        }
        s
    }

    /// Outward unit normal at each vertex: the normalized sum of the outward
    /// normals of the two incident edges.
    pub fn normals(&self) -> Vec<Point2> {
        let n = self.len();
        let v = &self.vertices;
        (0..n)
            .map(|i| {
                let prev = v[(i + n - 1) % n];
                let next = v[(i + 1) % n];
                let e0 = (v[i] - prev).normalized();
                let e1 = (next - v[i]).normalized();
                let s = e0 + e1;
                if s.norm() > 1e-12 {
                    s.normalized().rot_cw()
                } else {
                    (next - prev).normalized().rot_cw()
                }
            })
            .collect()
    }

    /// Per-vertex signed curvature `2 sin(dtheta/2) / l`, with `dtheta` the
    /// turning angle and `l` the mean of the two incident edge lengths.
    /// Positive where the enclosed set is locally convex.
    pub fn curvature(&self) -> Vec<f64> {
        let n = self.len();
        let v = &self.vertices;
        (0..n)
            .map(|i| {
                let e0 = v[i] - v[(i + n - 1) % n];
                let e1 = v[(i + 1) % n] - v[i];
                let turn = e0.cross(e1).atan2(e0.dot(e1));
                let l = 0.5 * (e0.norm() + e1.norm());
                2.0 * (0.5 * turn).sin() / l
            })
            .collect()
    }

    pub fn resample_uniform(&self, n: usize) -> Result<PlanarCurve> {
        if n < MIN_VERTICES {
            return Err(Error::InvalidCurve(format!("cannot resample to {n} < {MIN_VERTICES} vertices")));
        }
        PlanarCurve::new(resample_closed(&self.vertices, n))
    }

    /// Unsigned distance from `p` to the polyline.
    pub fn distance(&self, p: Point2) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        point_in_polygon(&self.vertices, p)
    }

    /// Distance to the curve, negative inside the enclosed region.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        let d = self.distance(p);
        if d == 0.0 {
            0.0
        } else if self.contains_point(p) {
            -d
        } else {
            d
        }
    }

    /// Minimal directional extent (rotating calipers on the convex hull) and
    /// the direction, in `[0, pi)`, along which it is measured.
    pub fn min_width(&self) -> (f64, f64) {
        min_width(&self.vertices)
    }

    /// Radius of the largest inscribed ball.
    pub fn inradius(&self) -> f64 {
        inradius(self)
    }

    pub fn reversed_raw(&self) -> Vec<Point2> {
        let mut v = self.vertices.clone();
        v.reverse();
        v
    }
}

/// Andrew's monotone chain; returns the hull counterclockwise.
pub fn convex_hull(pts: &[Point2]) -> Vec<Point2> {
    let mut p: Vec<Point2> = pts.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * p.len());
    for &q in &p {
        while hull.len() >= 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    let lower = hull.len() + 1;
    for &q in p.iter().rev().skip(1) {
        while hull.len() >= lower && orient(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    hull.pop();
    hull
}

pub fn min_width(pts: &[Point2]) -> (f64, f64) {
    let hull = convex_hull(pts);
    let h = hull.len();
    if h < 3 {
        return (0.0, 0.0);
    }
    let mut best = (f64::INFINITY, 0.0);
    let mut j = 1;
    for i in 0..h {
        let a = hull[i];
        let b = hull[(i + 1) % h];
        let e = b - a;
        let len = e.norm();
        let dist = |k: usize| orient(a, b, hull[k]) / len;
        // advance the antipodal pointer while the distance grows
        while dist((j + 1) % h) >= dist(j) {
            j = (j + 1) % h;
        }
        let w = dist(j);
        if w < best.0 {
            let nrm = e.rot_ccw();
            let mut ang = nrm.y.atan2(nrm.x);
            if ang < 0.0 {
                ang += PI;
            }
            if ang >= PI {
                ang -= PI;
            }
            best = (w, ang);
        }
    }
    best
}

/// Nelder-Mead maximization of `f` in the plane.
fn nelder_mead_max<F: Fn(Point2) -> f64>(f: F, start: Point2, step: f64, rel_tol: f64) -> (Point2, f64) {
    let mut simplex = [start, start + Point2::new(step, 0.0), start + Point2::new(0.0, step)];
    let mut vals = simplex.map(&f);
    for _ in 0..400 {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
        simplex = idx.map(|i| simplex[i]);
        vals = idx.map(|i| vals[i]);
        let size = simplex[0].dist(simplex[1]).max(simplex[0].dist(simplex[2]));
        let scale = vals[0].abs().max(f64::MIN_POSITIVE);
        if size <= rel_tol * scale && (vals[0] - vals[2]).abs() <= rel_tol * scale {
            break;
        }
        let centroid = (simplex[0] + simplex[1]) * 0.5;
        let worst = simplex[2];
        let refl = centroid + (centroid - worst);
        let fr = f(refl);
        if fr > vals[0] {
            let exp = centroid + (centroid - worst) * 2.0;
            let fe = f(exp);
            if fe > fr {
                simplex[2] = exp;
                vals[2] = fe;
            } else {
                simplex[2] = refl;
                vals[2] = fr;
            }
        } else if fr > vals[1] {
            simplex[2] = refl;
            vals[2] = fr;
        } else {
            let con = centroid + (worst - centroid) * 0.5;
            let fc = f(con);
            if fc > vals[2] {
                simplex[2] = con;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = simplex[0] + (simplex[k] - simplex[0]) * 0.5;
                    vals[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    (simplex[best], vals[best])
}

/// Grid search in the frame of the minimal-width direction, then local
/// Nelder-Mead ascent of the inside distance from the best seeds.
pub fn inradius(curve: &PlanarCurve) -> f64 {
    let (width, angle) = curve.min_width();
    let u = Point2::new(angle.cos(), angle.sin());
    let v = u.rot_ccw();
    let (mut ulo, mut uhi, mut vlo, mut vhi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in curve.vertices() {
        let (a, b) = (p.dot(u), p.dot(v));
        ulo = ulo.min(a);
        uhi = uhi.max(a);
        vlo = vlo.min(b);
        vhi = vhi.max(b);
    }
    let base = curve.perimeter() / 512.0;
    let mut du = base.min(width / 16.0);
    let mut dv = base;
    let budget = 20_000.0;
    let count = ((uhi - ulo) / du + 1.0) * ((vhi - vlo) / dv + 1.0);
    if count > budget {
        let s = (count / budget).sqrt();
        du *= s;
        dv *= s;
    }
    let inside = |p: Point2| -curve.signed_distance(p);
    let mut seeds: Vec<(f64, Point2)> = Vec::new();
    let nu = ((uhi - ulo) / du).ceil() as usize;
    let nv = ((vhi - vlo) / dv).ceil() as usize;
    for i in 0..=nu {
        for j in 0..=nv {
            let a = ulo + (i as f64 + 0.5) * du;
            let b = vlo + (j as f64 + 0.5) * dv;
            let p = u * a + v * b;
            let d = inside(p);
            if d > 0.0 {
                seeds.push((d, p));
            }
        }
    }
    if seeds.is_empty() {
        // the grid missed the interior; seed from inward vertex offsets
        let nrm = curve.normals();
        for (p, n) in curve.vertices().iter().zip(&nrm) {
            let q = *p - *n * (0.25 * width);
            let d = inside(q);
            if d > 0.0 {
                seeds.push((d, q));
            }
        }
    }
    seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
    seeds
        .iter()
        .take(5)
        .map(|&(d, p)| nelder_mead_max(inside, p, 0.5 * d.max(du.min(dv)), 1e-5).1)
        .fold(0.0, f64::max)
}

/// Pairwise disjoint, non-nested curves.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFamily {
    curves: Vec<PlanarCurve>,
}

impl CurveFamily {
    pub fn new(curves: Vec<PlanarCurve>) -> Result<Self> {
        if curves.len() > 1 {
            let polys: Vec<&[Point2]> = curves.iter().map(|c| c.vertices()).collect();
            if let Some(((a, _), (b, _))) = first_crossing(&polys) {
                return Err(Error::InvalidCurve(format!("curves {a} and {b} intersect")));
            }
            for (i, ci) in curves.iter().enumerate() {
                for (j, cj) in curves.iter().enumerate() {
                    if i != j && cj.contains_point(ci.vertices()[0]) {
                        return Err(Error::InvalidCurve(format!("curve {i} lies inside curve {j}")));
                    }
                }
            }
        }
        Ok(CurveFamily { curves })
    }

    pub fn single(curve: PlanarCurve) -> Self {
        CurveFamily { curves: vec![curve] }
    }

    pub fn curves(&self) -> &[PlanarCurve] {
        &self.curves
    }

    pub fn into_curves(self) -> Vec<PlanarCurve> {
        self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.curves.iter().map(|c| c.area()).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.curves.iter().map(|c| c.perimeter()).sum()
    }

    pub fn vertex_count(&self) -> usize {
        self.curves.iter().map(|c| c.len()).sum()
    }

    /// Distance to the union of the curves, negative inside any of them.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        let d = self.curves.iter().map(|c| c.distance(p)).fold(f64::INFINITY, f64::min);
        if d == 0.0 {
            0.0
        } else if self.curves.iter().any(|c| c.contains_point(p)) {
            -d
        } else {
            d
        }
    }
}
