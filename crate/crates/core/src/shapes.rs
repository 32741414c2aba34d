//! Closed-form test and barrier sets: circles, stadiums, the cosine-bump
//! barrier `G_eta`, the parabola/concave barrier `F_eps`, two dumbbells and a
//! square with smoothed corners.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PlanarCurve, Point2};
use crate::rcurv::{kappa_r, smootherstep, BallTester};

/// Default barrier steepness for `F_eps`, from the calibration sweep.
pub const DEFAULT_M: f64 = 50.0;
/// Default barrier speed constant for the `F_eps` schedule.
pub const DEFAULT_C0: f64 = 0.99;
/// Candidate values of `M` tried by [`calibrate_m`].
pub const M_SWEEP: [f64; 3] = [50.0, 100.0, 200.0];

const DENSE_POINTS: usize = 200_000;

/// One piece of a boundary path, traversed from its start to its end.
#[derive(Debug, Clone)]
pub enum PathPiece {
    Segment { a: Point2, b: Point2 },
    /// Circular arc starting at angle `start`, signed `sweep` (positive is CCW).
    Arc { center: Point2, radius: f64, start: f64, sweep: f64 },
    /// Fine polyline; sampled by linear interpolation in arclength.
    Dense { points: Vec<Point2>, cum: Vec<f64> },
}

impl PathPiece {
    pub fn dense(points: Vec<Point2>) -> Self {
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += p.dist(points[i - 1]);
            }
            cum.push(acc);
        }
        PathPiece::Dense { points, cum }
    }

    pub fn arc_between(center: Point2, radius: f64, start: f64, end: f64, ccw: bool) -> Self {
        let mut sweep = end - start;
        if ccw {
            while sweep <= 0.0 {
                sweep += 2.0 * PI;
            }
        } else {
            while sweep >= 0.0 {
                sweep -= 2.0 * PI;
            }
        }
        PathPiece::Arc { center, radius, start, sweep }
    }

    pub fn length(&self) -> f64 {
        match self {
            PathPiece::Segment { a, b } => a.dist(*b),
            PathPiece::Arc { radius, sweep, .. } => radius * sweep.abs(),
            PathPiece::Dense { cum, .. } => *cum.last().unwrap_or(&0.0),
        }
    }

    /// Point at arclength `s` from the start of the piece.
    pub fn point(&self, s: f64) -> Point2 {
        match self {
            PathPiece::Segment { a, b } => {
                let l = a.dist(*b);
                a.lerp(*b, if l > 0.0 { (s / l).clamp(0.0, 1.0) } else { 0.0 })
            }
            PathPiece::Arc { center, radius, start, sweep } => {
                let t = start + sweep.signum() * s / radius;
                *center + Point2::new(t.cos(), t.sin()) * *radius
            }
            PathPiece::Dense { points, cum } => {
                let k = cum.partition_point(|&c| c <= s).clamp(1, points.len() - 1);
                let l = cum[k] - cum[k - 1];
                let t = if l > 0.0 { ((s - cum[k - 1]) / l).clamp(0.0, 1.0) } else { 0.0 };
                points[k - 1].lerp(points[k], t)
            }
        }
    }
}

/// Samples a closed path at `n` points equally spaced in arclength.
pub fn sample_path(pieces: &[PathPiece], n: usize) -> Vec<Point2> {
    let lens: Vec<f64> = pieces.iter().map(|p| p.length()).collect();
    let total: f64 = lens.iter().sum();
    let mut out = Vec::with_capacity(n);
    let (mut k, mut base) = (0, 0.0);
    for j in 0..n {
        let s = total * j as f64 / n as f64;
        while k + 1 < pieces.len() && base + lens[k] <= s {
            base += lens[k];
            k += 1;
        }
        out.push(pieces[k].point(s - base));
    }
    out
}

/// Plateau bump: 1 on `[-1, 1]`, 0 outside `[-2, 2]`, smootherstep between.
/// Returns the value and the first two derivatives.
pub fn bump(t: f64) -> (f64, f64, f64) {
    let (s, d1, d2) = smootherstep(t.abs() - 1.0);
    (1.0 - s, -t.signum() * d1, -d2)
}

/// `g_eta(x) = eta + r/(32 pi^2) (1 - cos 4 pi x)` and its derivatives.
pub fn g_eta(x: f64, r: f64, eta: f64) -> (f64, f64, f64) {
    let a = 4.0 * PI * x;
    (eta + r / (32.0 * PI * PI) * (1.0 - a.cos()), r / (8.0 * PI) * a.sin(), r / 2.0 * a.cos())
}

/// `g(x) = x^2/(2 M^2 rho) phi(x/rho) + (1 - phi(x/rho)) |x| / (M^2 (1 + |x|))`
/// with `rho = M r`, and its derivatives.
pub fn g_feps(x: f64, r: f64, m: f64) -> (f64, f64, f64) {
    let rho = m * r;
    let m2 = m * m;
    let ax = x.abs();
    let (p, p1, p2) = bump(ax / rho);
    let g = ax * ax / (2.0 * m2 * rho) * p + (1.0 - p) * ax / (m2 * (1.0 + ax));
    let d1 = ax / (m2 * rho) * p + ax * ax / (2.0 * m2 * rho * rho) * p1 - p1 * ax / (m2 * rho * (1.0 + ax))
        + (1.0 - p) / (m2 * (1.0 + ax) * (1.0 + ax));
    let d2 = p / (m2 * rho) + 2.0 * ax / (m2 * rho * rho) * p1 + ax * ax / (2.0 * m2 * rho * rho * rho) * p2
        - p2 * ax / (m2 * rho * rho * (1.0 + ax))
        - p1 * 2.0 / (m2 * rho * (1.0 + ax) * (1.0 + ax))
        - (1.0 - p) * 2.0 / (m2 * (1.0 + ax).powi(3));
    (g, x.signum() * d1, d2)
}

/// Signed curvature of the upper boundary of `{|y| <= g(x)}`.
pub fn graph_curvature(d1: f64, d2: f64) -> f64 {
    -d2 / (1.0 + d1 * d1).powf(1.5)
}

fn default_corner_blend() -> Option<f64> {
    None
}

fn origin() -> [f64; 2] {
    [0.0, 0.0]
}

fn default_lobe_radius() -> f64 {
    3.0
}

fn default_m() -> f64 {
    DEFAULT_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticSet {
    Circle {
        radius: f64,
        #[serde(default = "origin")]
        center: [f64; 2],
    },
    /// `[-half_length, half_length] x [-half_width, half_width]` with
    /// semicircular ends.
    Stadium { half_width: f64, half_length: f64 },
    GEta { r: f64, eta: f64 },
    FEps {
        r: f64,
        #[serde(default = "default_m")]
        m: f64,
        eps: f64,
    },
    /// Balls of radius `r/4` at `(+-1/2, 0)` joined by a flat neck of half-height
    /// `r/(256 pi^2)`.
    DumbbellThin { r: f64 },
    /// Balls of radius `lobe_radius` at `(+-4, 0)` joined by a flat neck of
    /// half-height `r/(4M)`.
    DumbbellFat {
        r: f64,
        #[serde(default = "default_lobe_radius")]
        lobe_radius: f64,
    },
    /// Square of side `side` whose corners turn through an arc of radius
    /// `corner`, entered and left through curvature ramps of length `blend`
    /// (default `corner/2`).
    RoundedSquare {
        side: f64,
        corner: f64,
        #[serde(default = "default_corner_blend", skip_serializing_if = "Option::is_none")]
        blend: Option<f64>,
    },
}

/// Neck half-height of the thin dumbbell: half of the largest admissible
/// initial barrier parameter.
pub fn thin_neck_half_height(r: f64) -> f64 {
    0.5 * thin_eta0(r)
}

/// Initial `G_eta` parameter used with the thin dumbbell.
pub fn thin_eta0(r: f64) -> f64 {
    r / (128.0 * PI * PI)
}

pub fn fat_neck_half_height(r: f64, m: f64) -> f64 {
    0.5 * r / (2.0 * m)
}

/// Lobe centers, lobe radius, neck half-height and fillet radius of a dumbbell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumbbellGeometry {
    pub center: f64,
    pub lobe_radius: f64,
    pub neck: f64,
    pub fillet: f64,
}

impl DumbbellGeometry {
    /// Abscissa where the flat neck meets the fillet.
    pub fn neck_end(&self) -> f64 {
        let (rl, f, a) = (self.lobe_radius, self.fillet, self.neck);
        self.center - ((rl + f).powi(2) - (a + f).powi(2)).sqrt()
    }

    pub fn pieces(&self) -> Vec<PathPiece> {
        let (c, rl, a, f) = (self.center, self.lobe_radius, self.neck, self.fillet);
        let xf = self.neck_end();
        let mut out = Vec::new();
        // bottom neck, left to right
        out.push(PathPiece::Segment { a: Point2::new(-xf, -a), b: Point2::new(xf, -a) });
        for sgn in [1.0, -1.0] {
            // sgn = 1: right lobe traversed from its bottom fillet; -1: left lobe from the top
            let fc_in = Point2::new(sgn * xf, -sgn * (a + f));
            let fc_out = Point2::new(sgn * xf, sgn * (a + f));
            let lobe = Point2::new(sgn * c, 0.0);
            let t_in = (lobe - fc_in).normalized();
            let t_out = (lobe - fc_out).normalized();
            let start = sgn * PI / 2.0;
            let a_in_end = t_in.y.atan2(t_in.x);
            out.push(PathPiece::arc_between(fc_in, f, start, a_in_end, false));
            let l_start = (-t_in).y.atan2((-t_in).x);
            let l_end = (-t_out).y.atan2((-t_out).x);
            out.push(PathPiece::arc_between(lobe, rl, l_start, l_end, true));
            let f_start = t_out.y.atan2(t_out.x);
            let f_end = -sgn * PI / 2.0;
            out.push(PathPiece::arc_between(fc_out, f, f_start, f_end, false));
            if sgn > 0.0 {
                out.push(PathPiece::Segment { a: Point2::new(xf, a), b: Point2::new(-xf, a) });
            }
        }
        out
    }
}

const FILLET_RADII_PER_R: f64 = 2.0;

/// Bottom-right corner of a rounded square, as offsets from the point where
/// the bottom side ends. The tangent turns from `+x` to `+y`.
#[derive(Debug, Clone)]
pub struct CornerProfile {
    pub radius: f64,
    pub blend: f64,
    /// Arclength, offset and curvature along the corner.
    pub s: Vec<f64>,
    pub offset: Vec<Point2>,
    pub kappa: Vec<f64>,
}

impl CornerProfile {
    pub fn new(radius: f64, blend: f64) -> Self {
        let arc = radius * PI / 2.0 - blend;
        let total = 2.0 * blend + arc;
        let ramp_turn = |u: f64| {
            let t = (u / blend).clamp(0.0, 1.0);
            blend / radius * (t.powi(6) - 3.0 * t.powi(5) + 2.5 * t.powi(4))
        };
        let theta = |s: f64| {
            if s <= blend {
                ramp_turn(s)
            } else if s <= blend + arc {
                0.5 * blend / radius + (s - blend) / radius
            } else {
                PI / 2.0 - ramp_turn(total - s)
            }
        };
        let kappa = |s: f64| {
            if s <= blend {
                smootherstep(s / blend).0 / radius
            } else if s <= blend + arc {
                1.0 / radius
            } else {
                smootherstep((total - s) / blend).0 / radius
            }
        };
        let n = 20_000;
        let h = total / n as f64;
        let mut s = Vec::with_capacity(n + 1);
        let mut offset = Vec::with_capacity(n + 1);
        let mut ks = Vec::with_capacity(n + 1);
        let mut p = Point2::default();
        for k in 0..=n {
            let sk = h * k as f64;
            if k > 0 {
                // Simpson on each step
                let (t0, tm, t1) = (theta(sk - h), theta(sk - 0.5 * h), theta(sk));
                let dir = |t: f64| Point2::new(t.cos(), t.sin());
                p += (dir(t0) + dir(tm) * 4.0 + dir(t1)) * (h / 6.0);
            }
            s.push(sk);
            offset.push(p);
            ks.push(kappa(sk));
        }
        CornerProfile { radius, blend, s, offset, kappa: ks }
    }

    /// Horizontal (equal to vertical) extent of the corner.
    pub fn extent(&self) -> f64 {
        self.offset.last().unwrap().x
    }

    /// Curvature at the corner point with horizontal offset `dx`.
    pub fn kappa_at_dx(&self, dx: f64) -> f64 {
        let k = self.offset.partition_point(|p| p.x < dx).min(self.offset.len() - 1);
        if k == 0 {
            return self.kappa[0];
        }
        let (a, b) = (self.offset[k - 1].x, self.offset[k].x);
        let t = if b > a { (dx - a) / (b - a) } else { 0.0 };
        self.kappa[k - 1] + t * (self.kappa[k] - self.kappa[k - 1])
    }
}

impl AnalyticSet {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            AnalyticSet::Circle { radius, center } => {
                if !pos(radius) || !center.iter().all(|c| c.is_finite()) {
                    return bad(format!("circle needs a positive radius, got {radius}"));
                }
            }
            AnalyticSet::Stadium { half_width, half_length } => {
                if !pos(half_width) || !(half_length >= 0.0 && half_length.is_finite()) {
                    return bad(format!("stadium needs half_width > 0 and half_length >= 0, got {half_width}, {half_length}"));
                }
            }
            AnalyticSet::GEta { r, eta } => {
                if !pos(r) {
                    return bad(format!("r must be positive, got {r}"));
                }
                if !(eta > 0.0 && eta < r / (64.0 * PI * PI)) {
                    return bad(format!("eta must lie in (0, r/(64 pi^2)) = (0, {:e}), got {eta}", r / (64.0 * PI * PI)));
                }
            }
            AnalyticSet::FEps { r, m, eps } => check_feps(r, m, eps)?,
            AnalyticSet::DumbbellThin { r } => {
                if !(pos(r) && r <= 0.1) {
                    return bad(format!("thin dumbbell needs r in (0, 0.1], got {r}"));
                }
            }
            AnalyticSet::DumbbellFat { r, lobe_radius } => {
                if !(pos(r) && r < 1.0 / DEFAULT_M) {
                    return bad(format!("fat dumbbell needs r in (0, 1/M), got {r}"));
                }
                if !(pos(lobe_radius) && lobe_radius + 2.0 * FILLET_RADII_PER_R * r < 3.5) {
                    return bad(format!("lobe radius {lobe_radius} leaves no neck between the lobes"));
                }
            }
            AnalyticSet::RoundedSquare { side, corner, blend } => {
                let b = blend.unwrap_or(corner / 2.0);
                if !(pos(side) && pos(corner) && pos(b)) {
                    return bad("rounded square needs positive side, corner and blend".into());
                }
                if b >= corner * PI / 2.0 {
                    return bad(format!("blend {b} too long for corner radius {corner}"));
                }
                if 2.0 * CornerProfile::new(corner, b).extent() >= side {
                    return bad(format!("corner {corner} too large for side {side}"));
                }
            }
        }
        Ok(())
    }

    /// Half-width of the abscissa window of a graph-type set.
    pub fn natural_window(&self) -> f64 {
        match *self {
            AnalyticSet::GEta { .. } => 1.0,
            AnalyticSet::FEps { .. } => 10.0,
            AnalyticSet::Circle { radius, .. } => radius,
            AnalyticSet::Stadium { half_width, half_length } => half_length + half_width,
            AnalyticSet::DumbbellThin { r } => 0.5 + r / 4.0,
            AnalyticSet::DumbbellFat { lobe_radius, .. } => 4.0 + lobe_radius,
            AnalyticSet::RoundedSquare { side, .. } => side / 2.0,
        }
    }

    /// Truncation used by [`AnalyticSet::discretize`] when no window is given:
    /// far enough out that the caps cannot touch a tangent ball at points
    /// inside the natural window.
    pub fn default_graph_window(&self) -> f64 {
        match *self {
            AnalyticSet::GEta { r, .. } | AnalyticSet::FEps { r, .. } => self.natural_window() + 4.0 * r,
            _ => self.natural_window(),
        }
    }

    /// Half-height of a graph-type set at abscissa `x`, with derivatives.
    pub fn graph(&self, x: f64) -> Option<(f64, f64, f64)> {
        match *self {
            AnalyticSet::GEta { r, eta } => Some(g_eta(x, r, eta)),
            AnalyticSet::FEps { r, m, eps } => {
                let (g, d1, d2) = g_feps(x, r, m);
                Some((g + eps, d1, d2))
            }
            _ => None,
        }
    }

    pub fn dumbbell(&self) -> Option<DumbbellGeometry> {
        match *self {
            AnalyticSet::DumbbellThin { r } => Some(DumbbellGeometry {
                center: 0.5,
                lobe_radius: r / 4.0,
                neck: thin_neck_half_height(r),
                fillet: FILLET_RADII_PER_R * r,
            }),
            AnalyticSet::DumbbellFat { r, lobe_radius } => Some(DumbbellGeometry {
                center: 4.0,
                lobe_radius,
                neck: fat_neck_half_height(r, DEFAULT_M),
                fillet: FILLET_RADII_PER_R * r,
            }),
            _ => None,
        }
    }

    /// Boundary as a counterclockwise path. Graph-type sets are cut at
    /// `|x| = window` and closed with semicircular caps.
    pub fn pieces(&self, window: Option<f64>) -> Result<Vec<PathPiece>> {
        self.validate()?;
        Ok(match *self {
            AnalyticSet::Circle { radius, center } => vec![PathPiece::Arc {
                center: Point2::new(center[0], center[1]),
                radius,
                start: -PI / 2.0,
                sweep: 2.0 * PI,
            }],
            AnalyticSet::Stadium { half_width: l, half_length: len } => vec![
                PathPiece::Segment { a: Point2::new(-len, -l), b: Point2::new(len, -l) },
                PathPiece::Arc { center: Point2::new(len, 0.0), radius: l, start: -PI / 2.0, sweep: PI },
                PathPiece::Segment { a: Point2::new(len, l), b: Point2::new(-len, l) },
                PathPiece::Arc { center: Point2::new(-len, 0.0), radius: l, start: PI / 2.0, sweep: PI },
            ],
            AnalyticSet::GEta { .. } | AnalyticSet::FEps { .. } => {
                let w = window.unwrap_or_else(|| self.default_graph_window());
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::InvalidParams(format!("window must be positive, got {w}")));
                }
                let g = |x: f64| self.graph(x).unwrap().0;
                let bottom: Vec<Point2> = (0..=DENSE_POINTS)
                    .map(|k| {
                        let x = -w + 2.0 * w * k as f64 / DENSE_POINTS as f64;
                        Point2::new(x, -g(x))
                    })
                    .collect();
                let top: Vec<Point2> = bottom.iter().rev().map(|p| Point2::new(p.x, -p.y)).collect();
                vec![
                    PathPiece::dense(bottom),
                    PathPiece::Arc { center: Point2::new(w, 0.0), radius: g(w), start: -PI / 2.0, sweep: PI },
                    PathPiece::dense(top),
                    PathPiece::Arc { center: Point2::new(-w, 0.0), radius: g(-w), start: PI / 2.0, sweep: PI },
                ]
            }
            AnalyticSet::DumbbellThin { .. } | AnalyticSet::DumbbellFat { .. } => self.dumbbell().unwrap().pieces(),
            AnalyticSet::RoundedSquare { side, corner, blend } => {
                let cp = CornerProfile::new(corner, blend.unwrap_or(corner / 2.0));
                let a = cp.extent();
                let h = side / 2.0;
                let mut out = Vec::new();
                let rot = |p: Point2, k: usize| match k {
                    0 => p,
                    1 => p.rot_ccw(),
                    2 => -p,
                    _ => -p.rot_ccw(),
                };
                for k in 0..4 {
                    let start = rot(Point2::new(-h + a, -h), k);
                    let end = rot(Point2::new(h - a, -h), k);
                    out.push(PathPiece::Segment { a: start, b: end });
                    out.push(PathPiece::dense(cp.offset.iter().map(|&o| end + rot(o, k)).collect()));
                }
                out
            }
        })
    }

    pub fn discretize(&self, n: usize, window: Option<f64>) -> Result<PlanarCurve> {
        if n < 64 {
            return Err(Error::InvalidParams(format!("need at least 64 vertices, got {n}")));
        }
        let pts = sample_path(&self.pieces(window)?, n);
        PlanarCurve::new(pts)
    }

    /// Discretization with roughly uniform spacing `h`.
    pub fn discretize_spacing(&self, h: f64, window: Option<f64>) -> Result<PlanarCurve> {
        let pieces = self.pieces(window)?;
        let total: f64 = pieces.iter().map(|p| p.length()).sum();
        let n = ((total / h).ceil() as usize).max(64);
        PlanarCurve::new(sample_path(&pieces, n))
    }

    /// Closed-form signed curvature of the boundary at abscissa `x`: for
    /// graph-type sets and the rounded square, of the lower (equivalently
    /// upper) boundary.
    pub fn exact_curvature(&self, x: f64) -> Result<f64> {
        self.validate()?;
        let w = self.natural_window();
        let out = |lo: f64, hi: f64| Error::OutOfWindow { x, lo, hi };
        match *self {
            AnalyticSet::Circle { radius, center } => {
                if (x - center[0]).abs() > radius {
                    return Err(out(center[0] - radius, center[0] + radius));
                }
                Ok(1.0 / radius)
            }
            AnalyticSet::Stadium { half_width, half_length } => {
                if x.abs() > w {
                    Err(out(-w, w))
                } else if x.abs() <= half_length {
                    Ok(0.0)
                } else {
                    Ok(1.0 / half_width)
                }
            }
            AnalyticSet::GEta { .. } | AnalyticSet::FEps { .. } => {
                if x.abs() > w {
                    return Err(out(-w, w));
                }
                let (_, d1, d2) = self.graph(x).unwrap();
                Ok(graph_curvature(d1, d2))
            }
            AnalyticSet::RoundedSquare { side, corner, blend } => {
                if x.abs() > w {
                    return Err(out(-w, w));
                }
                let cp = CornerProfile::new(corner, blend.unwrap_or(corner / 2.0));
                let flat = side / 2.0 - cp.extent();
                if x.abs() <= flat {
                    Ok(0.0)
                } else {
                    Ok(cp.kappa_at_dx(x.abs() - flat))
                }
            }
            AnalyticSet::DumbbellThin { .. } | AnalyticSet::DumbbellFat { .. } => Err(Error::InvalidParams(
                "exact curvature is only available for circles, stadiums, graph sets and the rounded square".into(),
            )),
        }
    }
}

fn check_feps(r: f64, m: f64, eps: f64) -> Result<()> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::InvalidParams(format!("M must exceed 1, got {m}")));
    }
    if !(r > 0.0 && r < 1.0 / m) {
        return Err(Error::InvalidParams(format!("r must lie in (0, 1/M) = (0, {}), got {r}", 1.0 / m)));
    }
    if !(eps > 0.0 && eps < r / m) {
        return Err(Error::InvalidParams(format!("eps must lie in (0, r/M) = (0, {:e}), got {eps}", r / m)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierCheck {
    pub min_kappa_r: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Vertices of `curve` whose abscissa lies in `[-w, w]`, thinned to at most
/// `n` evenly spread indices.
fn window_samples(curve: &PlanarCurve, w: f64, n: usize) -> Vec<usize> {
    let inside: Vec<usize> = (0..curve.len()).filter(|&i| curve.vertices()[i].x.abs() <= w).collect();
    if inside.len() <= n {
        return inside;
    }
    (0..n).map(|k| inside[k * inside.len() / n]).collect()
}

/// Minimum r-curvature of `G_eta` over `n_samples` boundary points with
/// `|x| <= 1`, against the lower bound `1/(4r)`.
pub fn verify_barrier_g(r: f64, eta: f64, n_samples: usize) -> Result<BarrierCheck> {
    if !(r > 0.0 && r * r <= 0.5) {
        return Err(Error::InvalidParams(format!("r must lie in (0, 1/sqrt 2], got {r}")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParams("need at least one sample".into()));
    }
    let set = AnalyticSet::GEta { r, eta };
    set.validate()?;
    let curve = set.discretize_spacing(r / 8.0, Some(1.0 + 4.0 * r))?;
    let cs = std::slice::from_ref(&curve);
    let tester = BallTester::new(cs);
    let mut min = f64::INFINITY;
    for i in window_samples(&curve, 1.0, n_samples) {
        min = min.min(tester.sample(0, i, r)?.kappa_r);
    }
    let bound = 1.0 / (4.0 * r);
    Ok(BarrierCheck { min_kappa_r: min, bound, pass: min >= bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FBarrierCheck {
    pub m: f64,
    /// Minimum r-curvature over sampled points with `|x| <= 10`.
    pub c0_observed: f64,
    /// Minimum over sampled points with `|x| <= 2 M r`.
    pub neck_min_kappa_r: f64,
    /// `1/(3r)`.
    pub neck_bound: f64,
    /// Whether no interior tangent ball fits at any sampled point with `|x| <= 2 M r`.
    pub neck_int_excluded: bool,
    pub pass: bool,
}

/// Samples the r-curvature of `F_eps`, `eps = r/(2M)`, on `|x| <= 10`.
pub fn calibrate_and_verify_barrier_f(r: f64, m: f64, n_samples: usize) -> Result<FBarrierCheck> {
    let eps = r / (2.0 * m);
    check_feps(r, m, eps)?;
    if n_samples == 0 {
        return Err(Error::InvalidParams("need at least one sample".into()));
    }
    let set = AnalyticSet::FEps { r, m, eps };
    let curve = set.discretize_spacing(r / 8.0, Some(10.0 + 4.0 * r))?;
    let cs = std::slice::from_ref(&curve);
    let tester = BallTester::new(cs);
    let rho2 = 2.0 * m * r;
    let mut c0 = f64::INFINITY;
    let mut neck = f64::INFINITY;
    let mut excluded = true;
    let mut idx = window_samples(&curve, 10.0, n_samples);
    // the neck window is narrow; make sure it is sampled as densely as the rest
    idx.extend(window_samples(&curve, rho2, n_samples));
    for i in idx {
        let s = tester.sample(0, i, r)?;
        c0 = c0.min(s.kappa_r);
        if curve.vertices()[i].x.abs() <= rho2 {
            neck = neck.min(s.kappa_r);
            excluded &= !s.int_ball_fits;
        }
    }
    Ok(FBarrierCheck {
        m,
        c0_observed: c0,
        neck_min_kappa_r: neck,
        neck_bound: 1.0 / (3.0 * r),
        neck_int_excluded: excluded,
        pass: c0 > 0.0,
    })
}

/// Smallest `M` of [`M_SWEEP`] that is admissible at this `r` and passes.
pub fn calibrate_m(r: f64, n_samples: usize) -> Result<f64> {
    for m in M_SWEEP {
        if r >= 1.0 / m {
            continue;
        }
        if calibrate_and_verify_barrier_f(r, m, n_samples)?.pass {
            return Ok(m);
        }
    }
    Err(Error::ValidationFailed(format!("no M in {M_SWEEP:?} passes at r = {r}")))
}

/// Shrinking barrier: `eta(t) = eta0 - t/(4r)` for `G_eta`, or
/// `eps(t) = r/(2M) - c0 t/2` for `F_eps`. Containment is only checked on
/// `|x| <= window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BarrierSchedule {
    GEta { r: f64, eta0: f64, window: f64 },
    FEps { r: f64, m: f64, c0: f64, window: f64 },
}

impl BarrierSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BarrierSchedule::GEta { r, eta0, window } => {
                AnalyticSet::GEta { r, eta: eta0 }.validate()?;
                if !(window > 0.0) {
                    return Err(Error::InvalidParams(format!("window must be positive, got {window}")));
                }
            }
            BarrierSchedule::FEps { r, m, c0, window } => {
                check_feps(r, m, r / (2.0 * m))?;
                if !(c0 > 0.0 && c0 < 1.0) {
                    return Err(Error::InvalidParams(format!("c0 must lie in (0, 1), got {c0}")));
                }
                if !(window > 0.0) {
                    return Err(Error::InvalidParams(format!("window must be positive, got {window}")));
                }
            }
        }
        Ok(())
    }

    pub fn param_at(&self, t: f64) -> f64 {
        match *self {
            BarrierSchedule::GEta { r, eta0, .. } => eta0 - t / (4.0 * r),
            BarrierSchedule::FEps { r, m, c0, .. } => r / (2.0 * m) - c0 * t / 2.0,
        }
    }

    /// Time at which the neck of the barrier closes.
    pub fn closing_time(&self) -> f64 {
        match *self {
            BarrierSchedule::GEta { r, eta0, .. } => 4.0 * r * eta0,
            BarrierSchedule::FEps { r, m, c0, .. } => r / (c0 * m),
        }
    }

    pub fn window(&self) -> f64 {
        match *self {
            BarrierSchedule::GEta { window, .. } | BarrierSchedule::FEps { window, .. } => window,
        }
    }

    pub fn half_height(&self, x: f64, t: f64) -> f64 {
        let p = self.param_at(t);
        match *self {
            BarrierSchedule::GEta { r, .. } => g_eta(x, r, p).0,
            BarrierSchedule::FEps { r, m, .. } => g_feps(x, r, m).0 + p,
        }
    }

    pub fn set_at(&self, t: f64) -> AnalyticSet {
        let p = self.param_at(t);
        match *self {
            BarrierSchedule::GEta { r, .. } => AnalyticSet::GEta { r, eta: p },
            BarrierSchedule::FEps { r, m, .. } => AnalyticSet::FEps { r, m, eps: p },
        }
    }

    /// Minimum of `half_height(x) - |y|` over the vertices inside the window;
    /// `None` when no vertex lies there.
    pub fn clearance<'a, I: IntoIterator<Item = &'a Point2>>(&self, pts: I, t: f64) -> Option<f64> {
        let w = self.window();
        pts.into_iter()
            .filter(|p| p.x.abs() <= w)
            .map(|p| self.half_height(p.x, t) - p.y.abs())
            .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub x: f64,
    pub kappa: f64,
    pub phi: f64,
}

/// r-curvature along the bottom of a rounded square, from the middle of the
/// bottom side through the lower-right corner up to the diagonal.
pub fn kappa_r_bottom_profile(sq: &AnalyticSet, r: f64, n: usize) -> Result<Vec<ProfileSample>> {
    let AnalyticSet::RoundedSquare { .. } = sq else {
        return Err(Error::InvalidParams("bottom profile needs a rounded square".into()));
    };
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParams(format!("r must be positive, got {r}")));
    }
    let curve = sq.discretize(n, None)?;
    let samples = kappa_r(&curve, r)?;
    let mut out: Vec<ProfileSample> = curve
        .vertices()
        .iter()
        .zip(&samples)
        .filter(|(p, _)| p.x >= 0.0 && p.y <= -p.x)
        .map(|(p, s)| ProfileSample { x: p.x, kappa: s.kappa, phi: s.kappa_r })
        .collect();
    out.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    /// Extent of the run where the profile vanishes.
    pub zero_run: Option<(f64, f64)>,
    /// Extent of the run where the profile equals `1/(2r)`.
    pub half_run: Option<(f64, f64)>,
    /// Largest `phi(x2) - chord(x1, x3)(x2)` over `x1 < x2 < x3`.
    pub convexity_violation: f64,
    pub witness: [f64; 3],
    /// Largest `phi - kappa` among samples with `kappa > 1/r`.
    pub arc_excess: f64,
}

fn longest_run(p: &[ProfileSample], pred: impl Fn(f64) -> bool) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut k = 0;
    while k < p.len() {
        if pred(p[k].phi) {
            let s = k;
            while k + 1 < p.len() && pred(p[k + 1].phi) {
                k += 1;
            }
            let run = (p[s].x, p[k].x);
            if best.map_or(true, |b| run.1 - run.0 > b.1 - b.0) {
                best = Some(run);
            }
        }
        k += 1;
    }
    best
}

/// Plateau structure and convexity defect of a bottom profile. The defect
/// is measured against the lower convex envelope, which realizes the
/// smallest chord through each point.
pub fn analyze_profile(p: &[ProfileSample], r: f64) -> ProfileReport {
    let tol = 1e-6 / r;
    let half = 1.0 / (2.0 * r);
    let zero_run = longest_run(p, |v| v.abs() <= tol);
    let half_run = longest_run(p, |v| (v - half).abs() <= tol);
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..p.len() {
        while hull.len() >= 2 {
            let (a, b) = (&p[hull[hull.len() - 2]], &p[hull[hull.len() - 1]]);
            let cross = (b.x - a.x) * (p[i].phi - a.phi) - (b.phi - a.phi) * (p[i].x - a.x);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut violation = 0.0;
    let mut witness = [0.0; 3];
    for w in hull.windows(2) {
        let (a, b) = (&p[w[0]], &p[w[1]]);
        for q in &p[w[0] + 1..w[1]] {
            let chord = a.phi + (b.phi - a.phi) * (q.x - a.x) / (b.x - a.x);
            if q.phi - chord > violation {
                violation = q.phi - chord;
                witness = [a.x, q.x, b.x];
            }
        }
    }
    let arc_excess = p
        .iter()
        .filter(|s| s.kappa > 1.0 / r)
        .map(|s| s.phi - s.kappa)
        .fold(f64::NEG_INFINITY, f64::max);
    ProfileReport { zero_run, half_run, convexity_violation: violation, witness, arc_excess }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rcurv::Side;

    #[test]
    fn bump_shape() {
        let mut max1: f64 = 0.0;
        let mut max2: f64 = 0.0;
        for k in 0..=40_000 {
            let t = -2.5 + 5.0 * k as f64 / 40_000.0;
            let (p, d1, d2) = bump(t);
            if t.abs() <= 1.0 {
                assert_eq!(p, 1.0);
            }
            if t.abs() >= 2.0 {
                assert_eq!(p, 0.0);
            }
            assert!((0.0..=1.0).contains(&p));
            max1 = max1.max(d1.abs());
            max2 = max2.max(d2.abs());
        }
        assert!((max1 - 1.875).abs() < 1e-6);
        assert!(max2 <= 10.0 / 3.0f64.sqrt() + 1e-9);
    }

    #[test]
    fn graph_derivatives_match_finite_differences() {
        let h = 1e-5;
        for &x in &[0.1, 0.37, 0.6, 0.8, 0.99, 1.3, 4.0, -0.7] {
            for f in [|x| g_feps(x, 0.01, 50.0), |x| g_eta(x, 0.01, 1e-6)] {
                let (g0, d1, d2) = f(x);
                let (gp, d1p, _) = f(x + h);
                let (gm, d1m, _) = f(x - h);
                assert!((d1 - (gp - gm) / (2.0 * h)).abs() <= 1e-7 * (1.0 + d1.abs()), "x={x}");
                assert!((d2 - (d1p - d1m) / (2.0 * h)).abs() <= 1e-5 * (1.0 + d2.abs()), "x={x}");
                assert!(g0.is_finite());
            }
        }
    }

    #[test]
    fn feps_bound_chain() {
        let (r, m) = (0.01, DEFAULT_M);
        let rho = m * r;
        let eps = r / (2.0 * m);
        for k in 0..=200_000 {
            let x = 10.0 * k as f64 / 200_000.0;
            let (g, d1, d2) = g_feps(x, r, m);
            assert!(d2.abs() <= 23.0 / (m.powi(3) * r), "g'' at {x}");
            if x >= 2.0 * rho {
                assert!(d1.abs() <= 1.0 / (m * m));
                assert!(graph_curvature(d1, d2) >= 1.0 / (m * m * 11f64.powi(3)));
            } else {
                assert!(g + eps <= 5.0 * r / m);
                assert!(d1.abs() <= 11.0 / (m * m));
            }
        }
    }

    #[test]
    fn geta_flat_inequality() {
        for k in 1..=700 {
            let r = k as f64 / 1000.0;
            assert!(-r / 2.0 + 1.0 / (2.0 * r) >= 1.0 / (4.0 * r));
        }
    }

    #[test]
    fn circle_discretization_is_regular() {
        let c = AnalyticSet::Circle { radius: 1.0, center: [0.0, 0.0] }.discretize(512, None).unwrap();
        for p in c.vertices() {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
        let e = c.edge_lengths();
        let (lo, hi) = e.iter().fold((f64::MAX, 0.0f64), |(a, b), &l| (a.min(l), b.max(l)));
        assert!((hi - lo) / hi < 1e-9);
    }

    #[test]
    fn graph_sets_discretize() {
        let r = 0.01;
        let eta = r / (128.0 * PI * PI);
        let g = AnalyticSet::GEta { r, eta }.discretize(2048, Some(1.0)).unwrap();
        let ymax = g.vertices().iter().map(|p| p.y.abs()).fold(0.0, f64::max);
        assert!(ymax <= eta + r / (16.0 * PI * PI) + 1e-15);
        for k in curvature_on_window(&g, 1.0 - 0.05) {
            assert!(k.abs() <= r / 2.0 + 1e-3);
        }

        let f = AnalyticSet::FEps { r, m: DEFAULT_M, eps: r / (2.0 * DEFAULT_M) }.discretize(8192, None).unwrap();
        for k in 0..=400 {
            assert!(f.contains_point(Point2::new(-10.0 + 20.0 * k as f64 / 400.0, 0.0)));
        }
    }

    fn curvature_on_window(c: &PlanarCurve, w: f64) -> Vec<f64> {
        c.curvature().into_iter().zip(c.vertices()).filter(|(_, p)| p.x.abs() <= w).map(|(k, _)| k).collect()
    }

    #[test]
    fn exact_curvature_values() {
        let c = AnalyticSet::Circle { radius: 2.0, center: [0.0, 0.0] };
        assert_eq!(c.exact_curvature(0.3).unwrap(), 0.5);
        assert!(matches!(c.exact_curvature(3.0), Err(Error::OutOfWindow { .. })));
        let r = 0.01;
        let g = AnalyticSet::GEta { r, eta: r / (128.0 * PI * PI) };
        assert!((g.exact_curvature(0.0).unwrap() + r / 2.0).abs() < 1e-15);
        assert!(matches!(g.exact_curvature(1.5), Err(Error::OutOfWindow { .. })));
        let f = AnalyticSet::FEps { r, m: DEFAULT_M, eps: r / (2.0 * DEFAULT_M) };
        assert!(f.exact_curvature(5.0).unwrap() >= 1.0 / (DEFAULT_M.powi(2) * 11f64.powi(3)));
        let sq = AnalyticSet::RoundedSquare { side: 1.0, corner: 0.1, blend: None };
        assert_eq!(sq.exact_curvature(0.2).unwrap(), 0.0);
        let peak = (0..=1000).map(|k| sq.exact_curvature(0.3 + 0.2 * k as f64 / 1000.0).unwrap()).fold(0.0, f64::max);
        assert!((peak - 10.0).abs() < 1e-9);
    }

    /// Arclength curvature of the smoothed corner against its tangent turn.
    #[test]
    fn corner_turns_a_right_angle() {
        let cp = CornerProfile::new(0.1, 0.05);
        let turn: f64 = cp.s.windows(2).zip(cp.kappa.windows(2)).map(|(s, k)| 0.5 * (k[0] + k[1]) * (s[1] - s[0])).sum();
        assert!((turn - PI / 2.0).abs() < 1e-8);
        let end = *cp.offset.last().unwrap();
        assert!((end.x - end.y).abs() < 1e-10);
    }

    #[test]
    fn exact_and_discrete_curvature_agree() {
        let r = 0.01;
        let cases = [
            (AnalyticSet::GEta { r, eta: r / (128.0 * PI * PI) }, 0.95),
            (AnalyticSet::FEps { r, m: DEFAULT_M, eps: r / (2.0 * DEFAULT_M) }, 2.0),
            (AnalyticSet::RoundedSquare { side: 1.0, corner: 0.1, blend: None }, 0.5),
        ];
        for (set, w) in cases {
            // the F barrier is cut at |x| = 2.5 so that 4096 vertices resolve the bump transition
            let window = matches!(set, AnalyticSet::FEps { .. }).then_some(2.5);
            let c = set.discretize(4096, window).unwrap();
            let mut pairs = Vec::new();
            for (p, k) in c.vertices().iter().zip(c.curvature()) {
                // lower boundary only: square sides other than the bottom are rotations
                if p.y < 0.0 && p.x.abs() <= w && (!matches!(set, AnalyticSet::RoundedSquare { .. }) || p.y <= -p.x.abs()) {
                    pairs.push((set.exact_curvature(p.x).unwrap(), k));
                }
            }
            let scale = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
            let err = pairs.iter().map(|p| (p.0 - p.1).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-2 * scale, "{set:?}: err {err} scale {scale}");
        }
    }

    #[test]
    fn dumbbells() {
        let r = 0.01;
        let thin = AnalyticSet::DumbbellThin { r };
        let c = thin.discretize_spacing(2e-4, None).unwrap();
        assert!(c.min_width().0 < r);
        for p in c.vertices() {
            assert!(p.x.abs() < 1.0 && p.y.abs() < r / 2.0);
        }
        let geo = thin.dumbbell().unwrap();
        let sched = BarrierSchedule::GEta { r, eta0: thin_eta0(r), window: geo.neck_end() };
        assert!(sched.clearance(c.vertices(), 0.0).unwrap() > 0.0);

        let fat = AnalyticSet::DumbbellFat { r, lobe_radius: 3.0 };
        let c = fat.discretize(8192, None).unwrap();
        assert!(c.inradius() >= 3.0 * (1.0 - 1e-2));
        let geo = fat.dumbbell().unwrap();
        let sched = BarrierSchedule::FEps { r, m: DEFAULT_M, c0: DEFAULT_C0, window: geo.neck_end() };
        assert!(sched.clearance(c.vertices(), 0.0).unwrap() > 0.0);
    }

    #[test]
    fn barrier_g_lower_bound() {
        let r = 0.01;
        let chk = verify_barrier_g(r, r / (128.0 * PI * PI), 2000).unwrap();
        assert!(chk.pass);
        assert!(chk.min_kappa_r >= (-r / 2.0 + 1.0 / (2.0 * r)) * 0.99);
        assert!(verify_barrier_g(0.05, 0.05 / (128.0 * PI * PI), 500).unwrap().pass);
        assert!(matches!(verify_barrier_g(r, r / (64.0 * PI * PI), 100), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn barrier_f_positive_curvature() {
        let r = 0.01;
        let chk = calibrate_and_verify_barrier_f(r, DEFAULT_M, 2000).unwrap();
        assert!(chk.pass);
        assert!(chk.c0_observed >= 0.5 / (DEFAULT_M.powi(2) * 11f64.powi(3)));
        assert!(chk.neck_min_kappa_r >= chk.neck_bound * (1.0 - 1e-2));
        assert!(chk.neck_int_excluded);
        assert!(matches!(calibrate_and_verify_barrier_f(r, 1.0, 100), Err(Error::InvalidParams(_))));
        assert_eq!(calibrate_m(r, 500).unwrap(), DEFAULT_M);
    }

    #[test]
    fn barrier_g_interior_balls_never_fit() {
        let r = 0.01;
        let c = AnalyticSet::GEta { r, eta: r / (128.0 * PI * PI) }.discretize(4096, None).unwrap();
        let t = BallTester::new(std::slice::from_ref(&c));
        for i in (0..c.len()).step_by(17) {
            assert!(!t.fits(0, i, r, Side::Interior).unwrap());
        }
    }

    #[test]
    fn rounded_square_profile() {
        let r = 0.05;
        let sq = AnalyticSet::RoundedSquare { side: 1.0, corner: 1e-3, blend: None };
        let prof = kappa_r_bottom_profile(&sq, r, 40_000).unwrap();
        let rep = analyze_profile(&prof, r);
        let zero = rep.zero_run.unwrap();
        let half = rep.half_run.unwrap();
        assert!(zero.1 < half.0);
        // the interior ball stops fitting at distance r from the side
        assert!((half.0 - (0.5 - r)).abs() < 1e-3, "{half:?}");
        assert!(rep.convexity_violation >= 0.25 / r);
        assert!(rep.arc_excess <= 0.0);
    }

    #[test]
    fn descriptors_round_trip() {
        let s = AnalyticSet::DumbbellFat { r: 0.01, lobe_radius: 3.0 };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<AnalyticSet>(&j).unwrap(), s);
        let bad = r#"{"kind": "circle", "radius": 1.0, "colour": 3}"#;
        assert!(serde_json::from_str::<AnalyticSet>(bad).is_err());
        let c: AnalyticSet = serde_json::from_str(r#"{"kind": "circle", "radius": 1.0}"#).unwrap();
        assert_eq!(c, AnalyticSet::Circle { radius: 1.0, center: [0.0, 0.0] });
    }

    #[test]
    fn schedules() {
        let r = 0.01;
        let g = BarrierSchedule::GEta { r, eta0: 1e-6, window: 0.4 };
        assert!(g.param_at(g.closing_time()).abs() < 1e-18);
        let f = BarrierSchedule::FEps { r, m: DEFAULT_M, c0: DEFAULT_C0, window: 1.0 };
        assert!(f.param_at(f.closing_time()).abs() < 1e-15);
        assert!((f.closing_time() - r / (DEFAULT_C0 * DEFAULT_M)).abs() < 1e-18);
    }
}
