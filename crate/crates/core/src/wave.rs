//! The translating solution of the r-curvature flow with unit speed.
//!
//! Near the axis the profile solves `h'' = 2(1+h'^2) - (1+h'^2)^{3/2}/r`
//! (only the exterior ball fits); beyond the contact abscissa `x_r` of a
//! dropped ball it continues as a translated grim reaper `-log cos`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PlanarCurve, Point2};
use crate::rcurv::{kappa_r, BallTester};

/// `sqrt(4 r^2 - 1)`, the limit of `phi` at infinity.
pub fn ell(r: f64) -> f64 {
    (4.0 * r * r - 1.0).sqrt()
}

pub fn phi_rhs(r: f64, phi: f64) -> f64 {
    let q = 1.0 + phi * phi;
    2.0 * q - q * q.sqrt() / r
}

/// Curvature of `h0` at a point where `h0' = phi`.
pub fn kappa0(r: f64, phi: f64) -> f64 {
    2.0 / (1.0 + phi * phi).sqrt() - 1.0 / r
}

/// Default half-width of the `phi` grid.
pub fn default_x_max(r: f64) -> f64 {
    (10.0 + 5.0 / ell(r)).max(r + 1.0)
}

/// Default integration step.
pub fn default_step(r: f64) -> f64 {
    1e-4 * (1.0f64).min(1.0 / r)
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::InvalidR(r));
    }
    Ok(())
}

fn rk4_step(r: f64, y: f64, h: f64) -> f64 {
    let k1 = phi_rhs(r, y);
    let k2 = phi_rhs(r, y + 0.5 * h * k1);
    let k3 = phi_rhs(r, y + 0.5 * h * k2);
    let k4 = phi_rhs(r, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSolution {
    pub r: f64,
    /// Uniform and symmetric, `x[center] = 0`.
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub step: f64,
    /// Richardson estimate of the global error (step vs. half step).
    pub error_estimate: f64,
}

impl PhiSolution {
    pub fn center(&self) -> usize {
        self.x.len() / 2
    }
}

/// RK4 on `[0, x_max]` from `phi(0) = 0`, mirrored to `[-x_max, 0]` by oddness.
pub fn solve_phi(r: f64, x_max: f64, h_step: f64) -> Result<PhiSolution> {
    check_r(r)?;
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(Error::InvalidParams(format!("x_max must be positive, got {x_max}")));
    }
    if !(h_step > 0.0 && h_step <= 1e-3 * (1.0f64).min(1.0 / r)) {
        return Err(Error::InvalidParams(format!("step {h_step} exceeds 1e-3 min(1, 1/r)")));
    }
    let n = (x_max / h_step).ceil() as usize;
    let h = x_max / n as f64;
    let mut right = Vec::with_capacity(n + 1);
    let (mut y, mut y_half) = (0.0, 0.0);
    let mut err: f64 = 0.0;
    right.push(0.0);
    for _ in 0..n {
        y = rk4_step(r, y, h);
        y_half = rk4_step(r, rk4_step(r, y_half, 0.5 * h), 0.5 * h);
        err = err.max((y - y_half).abs() * 16.0 / 15.0);
        right.push(y);
    }
    if !y.is_finite() {
        return Err(Error::NumericalInstability("phi integration diverged".into()));
    }
    let mut x = Vec::with_capacity(2 * n + 1);
    let mut phi = Vec::with_capacity(2 * n + 1);
    for k in (1..=n).rev() {
        x.push(-(k as f64) * h);
        phi.push(-right[k]);
    }
    for (k, &p) in right.iter().enumerate() {
        x.push(k as f64 * h);
        phi.push(p);
    }
    Ok(PhiSolution { r, x, phi, step: h, error_estimate: err })
}

/// Cumulative Simpson integral of `phi` from the center of the grid.
pub fn build_h0(sol: &PhiSolution) -> Vec<f64> {
    let c = sol.center();
    let f = &sol.phi[c..];
    let h = sol.step;
    let m = f.len();
    let mut right = vec![0.0; m];
    for k in 1..m {
        right[k] = if k % 2 == 0 {
            right[k - 2] + h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k])
        } else if k + 1 < m {
            // one interval of the parabola through k-1, k, k+1
            right[k - 1] + h / 12.0 * (5.0 * f[k - 1] + 8.0 * f[k] - f[k + 1])
        } else {
            right[k - 1] + h / 12.0 * (-f[k - 2] + 8.0 * f[k - 1] + 5.0 * f[k])
        };
    }
    let mut out: Vec<f64> = right[1..].iter().rev().copied().collect();
    out.extend_from_slice(&right);
    out
}

/// Cubic Hermite interpolation on a uniform grid.
fn hermite(x0: f64, h: f64, y: &[f64], dy: &[f64], x: f64) -> f64 {
    let s = ((x - x0) / h).clamp(0.0, (y.len() - 1) as f64);
    let k = (s.floor() as usize).min(y.len() - 2);
    let t = s - k as f64;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * y[k] + (t3 - 2.0 * t2 + t) * h * dy[k] + (-2.0 * t3 + 3.0 * t2) * y[k + 1] + (t3 - t2) * h * dy[k + 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallDrop {
    pub x_r: f64,
    pub center_height: f64,
    /// Abscissa found by golden section on `h0(x) + sqrt(r^2 - x^2)`.
    pub argmax: f64,
    /// Root of `x - r h0'(x) / sqrt(1 + h0'(x)^2)`.
    pub tangency_root: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveProfile {
    pub r: f64,
    pub x_grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub h0: Vec<f64>,
    pub ell: f64,
    pub x_r: f64,
    pub x_tilde_r: f64,
    pub h0_prime_at_xr: f64,
    pub center_height: f64,
    pub phi_error: f64,
    #[serde(skip)]
    dphi: Vec<f64>,
}

/// Partial profile used before the ball drop.
pub struct Basket {
    r: f64,
    x0: f64,
    step: f64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    h0: Vec<f64>,
}

impl Basket {
    pub fn new(sol: &PhiSolution) -> Self {
        Basket {
            r: sol.r,
            x0: sol.x[0],
            step: sol.step,
            phi: sol.phi.clone(),
            dphi: sol.phi.iter().map(|&p| phi_rhs(sol.r, p)).collect(),
            h0: build_h0(sol),
        }
    }

    pub fn h0(&self, x: f64) -> f64 {
        hermite(self.x0, self.step, &self.h0, &self.phi, x)
    }

    pub fn phi(&self, x: f64) -> f64 {
        hermite(self.x0, self.step, &self.phi, &self.dphi, x)
    }

    pub fn x_max(&self) -> f64 {
        -self.x0
    }
}

const GOLDEN_TOL: f64 = 1e-8;
const TANGENCY_TOL: f64 = 1e-6;

/// Lowers a ball of radius `r` along the axis onto the graph of `h0`.
pub fn drop_ball(basket: &Basket) -> Result<BallDrop> {
    let r = basket.r;
    if basket.x_max() < r {
        return Err(Error::InvalidParams(format!("grid half-width {} is below r = {r}", basket.x_max())));
    }
    let obj = |x: f64| basket.h0(x) + (r * r - x * x).max(0.0).sqrt();
    // coarse scan for the bracket
    let n = 4000;
    let xs: Vec<f64> = (0..=n).map(|k| r * k as f64 / n as f64).collect();
    let best = (1..n).max_by(|&a, &b| obj(xs[a]).total_cmp(&obj(xs[b]))).unwrap();
    let (mut a, mut b) = (xs[best - 1], xs[best + 1]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    while b - a > GOLDEN_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = obj(d);
        }
    }
    let argmax = 0.5 * (a + b);
    // Newton on the tangency equation
    let tan_eq = |x: f64| {
        let p = basket.phi(x);
        let q = 1.0 + p * p;
        let f = x - r * p / q.sqrt();
        let df = 1.0 - r * phi_rhs(r, p) / (q * q.sqrt());
        (f, df)
    };
    let mut root = argmax;
    for _ in 0..50 {
        let (f, df) = tan_eq(root);
        let step = f / df;
        root -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    if !root.is_finite() || (root - argmax).abs() > TANGENCY_TOL || !(root > 0.0 && root < r) {
        return Err(Error::AmbiguousTangency { argmax, root });
    }
    Ok(BallDrop { x_r: root, center_height: obj(root), argmax, tangency_root: root })
}

/// Number of sign changes of the slope of `h0(x) + sqrt(r^2 - x^2)` on `(0, r)`.
pub fn tangency_sign_changes(basket: &Basket, samples: usize) -> usize {
    let r = basket.r;
    let d = |x: f64| basket.phi(x) - x / (r * r - x * x).sqrt();
    let vals: Vec<f64> = (1..samples).map(|k| d(r * k as f64 / samples as f64)).collect();
    vals.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count()
}

/// Grim reaper `-log cos x`.
pub fn grim_reaper(x: f64) -> f64 {
    -x.cos().ln()
}

pub fn build_h_star(r: f64) -> Result<WaveProfile> {
    build_h_star_with(r, default_x_max(r), default_step(r))
}

pub fn build_h_star_with(r: f64, x_max: f64, h_step: f64) -> Result<WaveProfile> {
    let sol = solve_phi(r, x_max, h_step)?;
    let basket = Basket::new(&sol);
    let drop = drop_ball(&basket)?;
    let slope = basket.phi(drop.x_r);
    Ok(WaveProfile {
        r,
        ell: ell(r),
        x_r: drop.x_r,
        x_tilde_r: slope.atan(),
        h0_prime_at_xr: slope,
        center_height: drop.center_height,
        phi_error: sol.error_estimate,
        x_grid: sol.x,
        phi: basket.phi,
        h0: basket.h0,
        dphi: basket.dphi,
    })
}

impl WaveProfile {
    fn step(&self) -> f64 {
        self.x_grid[1] - self.x_grid[0]
    }

    pub fn phi_at(&self, x: f64) -> f64 {
        hermite(self.x_grid[0], self.step(), &self.phi, &self.dphi, x)
    }

    pub fn h0_at(&self, x: f64) -> f64 {
        hermite(self.x_grid[0], self.step(), &self.h0, &self.phi, x)
    }

    /// Half-width of the domain of `h_star`.
    pub fn half_domain(&self) -> f64 {
        FRAC_PI_2 + self.x_r - self.x_tilde_r
    }

    /// `(h, h', h'')` of the glued profile; `None` outside the open domain.
    /// At `|x| = x_r` the one-sided second derivative of the central part is returned.
    pub fn h_star(&self, x: f64) -> Option<(f64, f64, f64)> {
        let ax = x.abs();
        if ax >= self.half_domain() {
            return None;
        }
        if ax <= self.x_r {
            let p = self.phi_at(x);
            return Some((self.h0_at(x), p, phi_rhs(self.r, p)));
        }
        let u = ax + self.x_tilde_r - self.x_r;
        let h = grim_reaper(u) - grim_reaper(self.x_tilde_r) + self.h0_at(self.x_r);
        let t = u.tan();
        Some((h, x.signum() * t, 1.0 + t * t))
    }

    pub fn h0_at_xr(&self) -> f64 {
        self.h0_at(self.x_r)
    }

    /// Curvature of the central branch at the contact point.
    pub fn kappa0_at_xr(&self) -> f64 {
        kappa0(self.r, self.h0_prime_at_xr)
    }

    /// Abscissa `x > x_r` on the right branch where `h_star = y`.
    pub fn branch_abscissa(&self, y: f64) -> Option<f64> {
        let base = self.h0_at(self.x_r) - grim_reaper(self.x_tilde_r);
        let v = y - base;
        if v < grim_reaper(self.x_tilde_r) {
            return None;
        }
        Some((-v).exp().acos() - self.x_tilde_r + self.x_r)
    }
}

/// Radius of the unit-speed problem equivalent to speed `c` at radius `r_prime`.
/// The dilation by `c` maps `E_t` to `c E_{t/c^2}`, which moves with speed 1 under
/// the flow of radius `c r_prime`.
pub fn normalize(r_prime: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && r_prime > 0.0) {
        return Err(Error::InvalidParams(format!("need c > 0 and r > 0, got c={c}, r={r_prime}")));
    }
    let r = c * r_prime;
    check_r(r)?;
    Ok(r)
}

/// Inverse of [`normalize`]: the radius for speed `c` given the unit-speed radius.
pub fn denormalize(r: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidParams(format!("need c > 0, got {c}")));
    }
    check_r(r)?;
    Ok(r / c)
}

impl WaveProfile {
    /// The profile of speed `c` at radius `r / c`: `x -> h_star(c x) / c`.
    pub fn scaled(&self, c: f64, x: f64) -> Option<f64> {
        self.h_star(c * x).map(|(h, _, _)| h / c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveReport {
    pub r: f64,
    pub ell: f64,
    pub x_r: f64,
    pub x_tilde_r: f64,
    pub slope_at_xr: f64,
    pub kappa0_at_xr: f64,
    /// Difference of the one-sided difference quotients of `h_star` at `x_r`.
    pub c11_jump: f64,
    /// `|h''(x_r+) - h''(x_r-)|`.
    pub second_derivative_jump: f64,
    /// Largest `|h''|` from second differences over the truncated domain.
    pub max_second_difference: f64,
    pub max_branch_curvature: f64,
    /// Largest `|k_r sqrt(1 + h'^2) - 1|` over the checked vertices.
    pub vb1_residual: f64,
    /// Largest gap between the discrete `k_r` and its closed form.
    pub kappa_r_agreement: f64,
    pub flag_mismatches: usize,
    pub checked_vertices: usize,
}

impl WaveReport {
    /// Fails with the first check that does not hold.
    pub fn check(&self, vb1_tol: f64) -> Result<()> {
        let fail = |m: String| Err(Error::ValidationFailed(m));
        if self.c11_jump > 1e-6 {
            return fail(format!("slope jump {:.3e} at x_r", self.c11_jump));
        }
        if self.max_branch_curvature > 1.0 / self.r + 1e-8 {
            return fail(format!("branch curvature {:.12} exceeds 1/r", self.max_branch_curvature));
        }
        if self.flag_mismatches > 0 {
            return fail(format!("{} vertices with unexpected tangent-ball flags", self.flag_mismatches));
        }
        if self.vb1_residual > vb1_tol {
            return fail(format!("velocity residual {:.3e} above {vb1_tol:.1e}", self.vb1_residual));
        }
        Ok(())
    }
}

/// Points of the graph of `f` over `[x0, x1]`, about `spacing` apart in
/// arclength, lying exactly on the graph. Includes `x0`, excludes `x1`.
pub fn sample_graph(f: &dyn Fn(f64) -> f64, x0: f64, x1: f64, spacing: f64) -> Vec<Point2> {
    let dense = 400_000;
    let xs: Vec<f64> = (0..=dense).map(|k| x0 + (x1 - x0) * k as f64 / dense as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut cum = vec![0.0; xs.len()];
    for k in 1..xs.len() {
        cum[k] = cum[k - 1] + (xs[k] - xs[k - 1]).hypot(ys[k] - ys[k - 1]);
    }
    let total = cum[dense];
    let n = ((total / spacing).ceil() as usize).max(1);
    (0..n)
        .map(|j| {
            let s = total * j as f64 / n as f64;
            let k = cum.partition_point(|&c| c <= s).clamp(1, dense);
            let t = (s - cum[k - 1]) / (cum[k] - cum[k - 1]);
            let x = xs[k - 1] + t * (xs[k] - xs[k - 1]);
            Point2::new(x, f(x))
        })
        .collect()
}

fn segment_points(a: Point2, b: Point2, spacing: f64) -> Vec<Point2> {
    let n = ((a.dist(b) / spacing).ceil() as usize).max(1);
    (0..n).map(|k| a.lerp(b, k as f64 / n as f64)).collect()
}

/// Closed polygon bounding `{h_star(x) < y < top}` with vertices exactly on
/// the graph, spaced about `spacing` apart in arclength.
pub fn truncated_supergraph(p: &WaveProfile, top: f64, spacing: f64) -> Result<Vec<Point2>> {
    let a = p.branch_abscissa(top).ok_or_else(|| Error::InvalidParams(format!("cap height {top} below the contact point")))?;
    let f = |x: f64| p.h_star(x).map_or(top, |v| v.0.min(top));
    let mut out = sample_graph(&f, -a, a, spacing);
    out.extend(segment_points(Point2::new(a, top), Point2::new(-a, top), spacing));
    Ok(out)
}

/// Measures every property of the glued wave without judging it.
pub fn measure_wave(p: &WaveProfile, n_check: usize) -> Result<WaveReport> {
    let r = p.r;
    let xr = p.x_r;
    let h = |x: f64| p.h_star(x).expect("inside the domain").0;
    let d = 1e-5;
    let left = (3.0 * h(xr) - 4.0 * h(xr - d) + h(xr - 2.0 * d)) / (2.0 * d);
    let right = (-3.0 * h(xr) + 4.0 * h(xr + d) - h(xr + 2.0 * d)) / (2.0 * d);
    let c11_jump = (left - right).abs();
    let s = p.h0_prime_at_xr;
    let second_derivative_jump = ((1.0 + s * s) - phi_rhs(r, s)).abs();

    let top = p.h0_at_xr() + 3.0 * r;
    let a = p.branch_abscissa(top).expect("cap above the contact point");
    let dd = 1e-3;
    let mut max_second_difference: f64 = 0.0;
    let mut max_branch_curvature: f64 = f64::NEG_INFINITY;
    for k in 0..=n_check {
        let x = -a + dd + (2.0 * (a - dd)) * k as f64 / n_check as f64;
        max_second_difference = max_second_difference.max(((h(x + dd) - 2.0 * h(x) + h(x - dd)) / (dd * dd)).abs());
        let xb = xr + (a - xr) * k as f64 / n_check as f64;
        let (_, d1, d2) = p.h_star(xb).expect("inside the domain");
        max_branch_curvature = max_branch_curvature.max(d2 / (1.0 + d1 * d1).powf(1.5));
    }

    let spacing = 2e-3;
    let curve = PlanarCurve::new(truncated_supergraph(p, top, spacing)?)?;
    let samples = kappa_r(&curve, r)?;
    let margin = 0.05;
    let (mut vb1, mut agree, mut mism, mut checked) = (0.0f64, 0.0f64, 0, 0);
    for (v, smp) in curve.vertices().iter().zip(&samples) {
        if v.y > top - 2.0 * r || (v.x.abs() - xr).abs() < margin {
            continue;
        }
        let (_, d1, _) = p.h_star(v.x).expect("inside the domain");
        let central = v.x.abs() < xr;
        let (want_ext, want_int) = (true, !central);
        if smp.ext_ball_fits != want_ext || smp.int_ball_fits != want_int {
            mism += 1;
        }
        let exact = if central {
            kappa0(r, d1) / 2.0 + 1.0 / (2.0 * r)
        } else {
            (v.x.abs() + p.x_tilde_r - xr).cos()
        };
        agree = agree.max((smp.kappa_r - exact).abs());
        vb1 = vb1.max((smp.kappa_r * (1.0 + d1 * d1).sqrt() - 1.0).abs());
        checked += 1;
    }
    Ok(WaveReport {
        r,
        ell: p.ell,
        x_r: xr,
        x_tilde_r: p.x_tilde_r,
        slope_at_xr: s,
        kappa0_at_xr: p.kappa0_at_xr(),
        c11_jump,
        second_derivative_jump,
        max_second_difference,
        max_branch_curvature,
        vb1_residual: vb1,
        kappa_r_agreement: agree,
        flag_mismatches: mism,
        checked_vertices: checked,
    })
}

/// [`measure_wave`] followed by the pass/fail checks.
pub fn validate_wave(p: &WaveProfile, n_check: usize) -> Result<WaveReport> {
    let rep = measure_wave(p, n_check)?;
    rep.check(1e-3)?;
    Ok(rep)
}

/// Velocity law for the graph evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphLaw {
    /// Normal velocity `k_r` with the given radius.
    RCurvature(f64),
    /// Normal velocity `k`.
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFlowResult {
    pub speed: f64,
    pub times: Vec<f64>,
    pub apex: Vec<f64>,
    pub steps: usize,
}

/// Evolves the graph `y = h(x, t)` with `h_t = v sqrt(1 + h_x^2)` on
/// `|x| <= window`. Outside the window the set is the initial profile
/// translated upward with unit speed, closed by a horizontal cap `cap_gap`
/// above the window edge. Returns the fitted apex speed over the second half
/// of the run.
pub fn graph_flow(
    init: &dyn Fn(f64) -> f64,
    half_domain: f64,
    window: f64,
    cap_gap: f64,
    law: GraphLaw,
    t_max: f64,
    dx: f64,
) -> Result<GraphFlowResult> {
    if !(window > 0.0 && window < half_domain && dx > 0.0 && t_max > 0.0) {
        return Err(Error::InvalidParams(format!("window {window} must lie inside the domain half-width {half_domain}")));
    }
    let n = (2.0 * window / dx).round() as usize;
    let dx = 2.0 * window / n as f64;
    let xs: Vec<f64> = (0..=n).map(|k| -window + k as f64 * dx).collect();
    let mut hs: Vec<f64> = xs.iter().map(|&x| init(x)).collect();
    let top0 = hs[0].max(hs[n]) + cap_gap;
    // edge of the truncated graph: init(a) = top0
    let (mut lo, mut hi) = (window, half_domain);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if init(m) < top0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let a = lo;
    let g = |x: f64| init(x).min(top0);
    let mut right = sample_graph(&g, window, a, dx);
    right.remove(0);
    let mut left: Vec<Point2> = right.iter().rev().map(|p| Point2::new(-p.x, p.y)).collect();
    right.extend(segment_points(Point2::new(a, top0), Point2::new(-a, top0), dx));
    left.retain(|p| p.x < -window);
    let offset = left.len();
    let r = match law {
        GraphLaw::RCurvature(r) => r,
        GraphLaw::Classical => f64::INFINITY,
    };
    let dt = 0.2 * (dx * dx).min(2.0 * r * dx);
    let steps = (t_max / dt).ceil() as usize;
    let dt = t_max / steps as f64;
    let c = n / 2;
    let mut times = vec![0.0];
    let mut apex = vec![hs[c]];
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut pts: Vec<Point2> = left.iter().map(|p| Point2::new(p.x, p.y + t)).collect();
        pts.extend(xs.iter().zip(&hs).map(|(&x, &y)| Point2::new(x, y)));
        pts.extend(right.iter().map(|p| Point2::new(p.x, p.y + t)));
        let curve = PlanarCurve::new(pts).map_err(|e| Error::NumericalInstability(format!("graph lost simplicity at t={t:.4e}: {e}")))?;
        let cs = std::slice::from_ref(&curve);
        let tester = BallTester::new(cs);
        let mut next = hs.clone();
        for i in 1..n {
            let v = match law {
                GraphLaw::RCurvature(r) => tester.sample(0, offset + i, r)?.kappa_r,
                GraphLaw::Classical => tester.curvature(0)[offset + i],
            };
            let hx = (hs[i + 1] - hs[i - 1]) / (2.0 * dx);
            next[i] = hs[i] + dt * v * (1.0 + hx * hx).sqrt();
        }
        let tn = t + dt;
        next[0] = init(xs[0]) + tn;
        next[n] = init(xs[n]) + tn;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalInstability(format!("graph flow diverged at t={tn:.4e}")));
        }
        hs = next;
        times.push(tn);
        apex.push(hs[c]);
    }
    let half = times.len() / 2;
    let (ts, ys) = (&times[half..], &apex[half..]);
    let m = ts.len() as f64;
    let (mt, my) = (ts.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let cov: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let var: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
    Ok(GraphFlowResult { speed: cov / var, times, apex, steps })
}

/// Default window of the translation test: `x_r` plus half the branch width.
pub fn default_translation_window(p: &WaveProfile) -> f64 {
    p.x_r + 0.5 * (FRAC_PI_2 - p.x_tilde_r)
}

/// Evolves the wave under its own law and returns the fitted speed.
pub fn graph_flow_translation_test(p: &WaveProfile, window: f64, t_max: f64) -> Result<f64> {
    let f = |x: f64| p.h_star(x).map_or(f64::INFINITY, |v| v.0);
    Ok(graph_flow(&f, p.half_domain(), window, 3.0 * p.r, GraphLaw::RCurvature(p.r), t_max, 0.01)?.speed)
}
