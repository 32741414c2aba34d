//! Tangent-ball predicates and the r-curvature built from them.
//!
//! At a boundary point with curvature `k` and outward normal `n`,
//! `k_r = k_plus + k_minus` where `k_plus = k/2 + 1/(2r)` if the open ball of
//! radius `r` centered at `x + r n` misses the set (else 0), and
//! `k_minus = k/2 - 1/(2r)` if the ball centered at `x - r n` lies inside it
//! (else 0). Both inclusions are global.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PlanarCurve, Point2};
use crate::spatial::SegmentTree;

/// Relative tolerance applied to the ball radius in the inclusion tests.
pub const EPS_BALL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Exterior,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RCurvatureSample {
    pub vertex_index: usize,
    pub kappa: f64,
    pub ext_ball_fits: bool,
    pub int_ball_fits: bool,
    pub kappa_r_plus: f64,
    pub kappa_r_minus: f64,
    pub kappa_r: f64,
}

impl RCurvatureSample {
    pub fn assemble(vertex_index: usize, kappa: f64, r: f64, ext: bool, int: bool) -> Self {
        let kappa_r_plus = if ext { kappa / 2.0 + 1.0 / (2.0 * r) } else { 0.0 };
        let kappa_r_minus = if int { kappa / 2.0 - 1.0 / (2.0 * r) } else { 0.0 };
        // when both balls fit the halves sum to kappa; report it without rounding drift
        let kappa_r = if ext && int { kappa } else { kappa_r_plus + kappa_r_minus };
        RCurvatureSample {
            vertex_index,
            kappa,
            ext_ball_fits: ext,
            int_ball_fits: int,
            kappa_r_plus,
            kappa_r_minus,
            kappa_r,
        }
    }
}

/// Ball-inclusion queries against a fixed family of curves.
#[derive(Debug, Clone)]
pub struct BallTester<'a> {
    curves: Vec<&'a [Point2]>,
    normals: Vec<Vec<Point2>>,
    curvature: Vec<Vec<f64>>,
    index: SegmentTree,
}

impl<'a> BallTester<'a> {
    pub fn new(curves: &'a [PlanarCurve]) -> Self {
        BallTester {
            curves: curves.iter().map(|c| c.vertices()).collect(),
            normals: curves.iter().map(|c| c.normals()).collect(),
            curvature: curves.iter().map(|c| c.curvature()).collect(),
            index: SegmentTree::new(curves.iter().map(|c| c.vertices())),
        }
    }

    pub fn curvature(&self, c: usize) -> &[f64] {
        &self.curvature[c]
    }

    pub fn normals(&self, c: usize) -> &[Point2] {
        &self.normals[c]
    }

    pub fn vertex(&self, c: usize, i: usize) -> Point2 {
        self.curves[c][i]
    }

    fn check(&self, c: usize, i: usize) -> Result<()> {
        let len = self.curves.get(c).map_or(0, |v| v.len());
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        Ok(())
    }

    /// Sagitta of the arcs adjacent to vertex `i`: how far the polyline can sit
    /// inside a tangent ball purely through chord error.
    pub fn chord_slack(&self, c: usize, i: usize) -> f64 {
        let v = self.curves[c];
        let k = &self.curvature[c];
        let n = v.len();
        let (ip, inx) = ((i + n - 1) % n, (i + 1) % n);
        let h = v[i].dist(v[ip]).max(v[i].dist(v[inx]));
        let kl = k[ip].abs().max(k[i].abs()).max(k[inx].abs());
        h * h * kl / 8.0
    }

    pub fn center(&self, c: usize, i: usize, rho: f64, side: Side) -> Point2 {
        let nu = self.normals[c][i];
        match side {
            Side::Exterior => self.curves[c][i] + nu * rho,
            Side::Interior => self.curves[c][i] - nu * rho,
        }
    }

    /// Inclusion test with an explicit absolute slack.
    pub fn fits_with_slack(&self, c: usize, i: usize, rho: f64, side: Side, slack: f64) -> bool {
        let center = self.center(c, i, rho, side);
        !self.index.any_closer_than(center, rho - slack)
    }

    pub fn fits(&self, c: usize, i: usize, rho: f64, side: Side) -> Result<bool> {
        self.check(c, i)?;
        let slack = EPS_BALL * rho + self.chord_slack(c, i);
        Ok(self.fits_with_slack(c, i, rho, side, slack))
    }

    pub fn sample(&self, c: usize, i: usize, r: f64) -> Result<RCurvatureSample> {
        let ext = self.fits(c, i, r, Side::Exterior)?;
        let int = self.fits(c, i, r, Side::Interior)?;
        Ok(RCurvatureSample::assemble(i, self.curvature[c][i], r, ext, int))
    }

    pub fn samples(&self, c: usize, r: f64) -> Vec<RCurvatureSample> {
        (0..self.curves[c].len()).map(|i| self.sample(c, i, r).expect("index in range")).collect()
    }

    /// Flags and half-curvatures at each radius of `sigmas`. The slack is tied
    /// to the largest radius so that the flags are monotone in the radius.
    pub fn sigma_profile(&self, c: usize, i: usize, sigmas: &[f64]) -> Result<Vec<SigmaSample>> {
        self.check(c, i)?;
        let top = sigmas.iter().cloned().fold(0.0, f64::max);
        let slack = EPS_BALL * top + self.chord_slack(c, i);
        let k = self.curvature[c][i];
        Ok(sigmas
            .iter()
            .map(|&s| {
                let ext = self.fits_with_slack(c, i, s, Side::Exterior, slack);
                let int = self.fits_with_slack(c, i, s, Side::Interior, slack);
                SigmaSample {
                    sigma: s,
                    ext_fits: ext,
                    int_fits: int,
                    kappa_plus: if ext { k / 2.0 + 1.0 / (2.0 * s) } else { 0.0 },
                    kappa_minus: if int { k / 2.0 - 1.0 / (2.0 * s) } else { 0.0 },
                }
            })
            .collect())
    }
}

pub fn ext_ball_fits(curve: &PlanarCurve, i: usize, rho: f64) -> Result<bool> {
    let cs = std::slice::from_ref(curve);
    BallTester::new(cs).fits(0, i, rho, Side::Exterior)
}

pub fn int_ball_fits(curve: &PlanarCurve, i: usize, rho: f64) -> Result<bool> {
    let cs = std::slice::from_ref(curve);
    BallTester::new(cs).fits(0, i, rho, Side::Interior)
}

pub fn kappa_r(curve: &PlanarCurve, r: f64) -> Result<Vec<RCurvatureSample>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParams(format!("r must be positive, got {r}")));
    }
    let cs = std::slice::from_ref(curve);
    Ok(BallTester::new(cs).samples(0, r))
}

/// Per-curve samples for a family; balls are tested against every member.
pub fn kappa_r_family(curves: &[PlanarCurve], r: f64) -> Result<Vec<Vec<RCurvatureSample>>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParams(format!("r must be positive, got {r}")));
    }
    let t = BallTester::new(curves);
    Ok((0..curves.len()).map(|c| t.samples(c, r)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSample {
    pub sigma: f64,
    pub ext_fits: bool,
    pub int_fits: bool,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSpec {
    pub r: f64,
    pub delta: f64,
    pub quadrature_nodes: usize,
}

const GL4_NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL4_WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// Quintic smootherstep `6t^5 - 15t^4 + 10t^3` and its first two derivatives,
/// clamped to `[0, 1]` outside the unit interval.
pub fn smootherstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let s = t * t * t * (t * (6.0 * t - 15.0) + 10.0);
        let d1 = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let d2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        (s, d1, d2)
    }
}

impl SmoothingSpec {
    pub fn new(r: f64, delta: f64, quadrature_nodes: usize) -> Result<Self> {
        let s = SmoothingSpec { r, delta, quadrature_nodes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParams(format!("r must be positive, got {}", self.r)));
        }
        if !(self.delta > 0.0 && self.delta <= self.r / 2.0) {
            return Err(Error::InvalidParams(format!("delta must lie in (0, r/2], got {}", self.delta)));
        }
        if self.quadrature_nodes < 8 {
            return Err(Error::QuadratureUnderflow(format!("{} nodes, need at least 8", self.quadrature_nodes)));
        }
        Ok(())
    }

    /// The bump: 1 on `[0, r - delta]`, smootherstep down to 0 at `r`.
    pub fn f(&self, sigma: f64) -> f64 {
        1.0 - smootherstep((sigma - (self.r - self.delta)) / self.delta).0
    }

    pub fn f_prime(&self, sigma: f64) -> f64 {
        -smootherstep((sigma - (self.r - self.delta)) / self.delta).1 / self.delta
    }

    /// Gauss-Legendre abscissae and weights: 4 nodes per panel, half of the
    /// panels on the plateau `[0, r - delta]` and half on the transition.
    pub fn quadrature(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let panels = self.quadrature_nodes / 4;
        let p_trans = panels - panels / 2;
        let p_flat = panels / 2;
        let knee = self.r - self.delta;
        if p_trans == 0 || knee >= self.r {
            return Err(Error::QuadratureUnderflow(format!(
                "cannot place 4 nodes inside [r - delta, r] with delta = {}",
                self.delta
            )));
        }
        let mut out = Vec::with_capacity(4 * panels);
        let mut push = |a: f64, b: f64, m: usize| {
            let w = (b - a) / m as f64;
            for p in 0..m {
                let lo = a + w * p as f64;
                for k in 0..4 {
                    out.push((lo + 0.5 * w * (GL4_NODES[k] + 1.0), 0.5 * w * GL4_WEIGHTS[k]));
                }
            }
        };
        push(0.0, knee, p_flat);
        push(knee, self.r, p_trans);
        Ok(out)
    }
}

/// Sample of the tangent-ball halves at the quadrature radii of a smoothing
/// with plateau `r/2`.
pub fn kappa_sigma_profile(curve: &PlanarCurve, i: usize, r: f64, n_sigma: usize) -> Result<Vec<SigmaSample>> {
    let spec = SmoothingSpec::new(r, r / 2.0, n_sigma)?;
    let sigmas: Vec<f64> = spec.quadrature()?.into_iter().map(|(s, _)| s).collect();
    let cs = std::slice::from_ref(curve);
    BallTester::new(cs).sigma_profile(0, i, &sigmas)
}

/// Smoothed curvature `-int_0^r (s/r) f'(s) (k_s^+ + k_s^-) ds`.
pub fn kappa_f(curve: &PlanarCurve, i: usize, spec: &SmoothingSpec) -> Result<f64> {
    let cs = std::slice::from_ref(curve);
    kappa_f_with(&BallTester::new(cs), 0, i, spec)
}

pub fn kappa_f_with(tester: &BallTester<'_>, c: usize, i: usize, spec: &SmoothingSpec) -> Result<f64> {
    let quad = spec.quadrature()?;
    let sigmas: Vec<f64> = quad.iter().map(|&(s, _)| s).collect();
    let prof = tester.sigma_profile(c, i, &sigmas)?;
    Ok(quad
        .iter()
        .zip(&prof)
        .map(|(&(s, w), p)| -w * (s / spec.r) * spec.f_prime(s) * (p.kappa_plus + p.kappa_minus))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::resample_closed;
    use std::f64::consts::PI;

    fn circle_at(r: f64, n: usize, cx: f64) -> PlanarCurve {
        let v = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                Point2::new(cx + r * t.cos(), r * t.sin())
            })
            .collect();
        PlanarCurve::new(v).unwrap()
    }

    fn circle(r: f64, n: usize) -> PlanarCurve {
        circle_at(r, n, 0.0)
    }

    /// Stadium `[-len, len] x [-l, l]` with semicircular ends, uniformly resampled.
    fn stadium(l: f64, len: f64, n: usize) -> PlanarCurve {
        let mut v = Vec::new();
        for k in 0..200 {
            v.push(Point2::new(-len + 2.0 * len * k as f64 / 200.0, -l));
        }
        for k in 0..100 {
            let t = -PI / 2.0 + PI * k as f64 / 100.0;
            v.push(Point2::new(len + l * t.cos(), l * t.sin()));
        }
        for k in 0..200 {
            v.push(Point2::new(len - 2.0 * len * k as f64 / 200.0, l));
        }
        for k in 0..100 {
            let t = PI / 2.0 + PI * k as f64 / 100.0;
            v.push(Point2::new(-len + l * t.cos(), l * t.sin()));
        }
        PlanarCurve::new(resample_closed(&v, n)).unwrap()
    }

    fn flat_vertex(c: &PlanarCurve) -> usize {
        c.vertices()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.x.abs() - a.1.y).total_cmp(&(b.1.x.abs() - b.1.y)))
            .map(|(i, _)| i)
            .unwrap()
    }

    /// Independent oracle: the ball misses (or sits inside) the set iff a dense
    /// set of points of the shrunken ball has the expected inside/outside status.
    fn brute_force_fits(c: &PlanarCurve, i: usize, rho: f64, side: Side) -> bool {
        brute_force_shrunk(c, i, rho, side, 1e-3)
    }

    fn brute_force_shrunk(c: &PlanarCurve, i: usize, rho: f64, side: Side, shrink: f64) -> bool {
        let v = c.vertices()[i];
        let nu = c.normals()[i];
        let center = match side {
            Side::Exterior => v + nu * rho,
            Side::Interior => v - nu * rho,
        };
        let want_inside = side == Side::Interior;
        for a in 0..64 {
            for b in 1..=16 {
                let rad = rho * (1.0 - shrink) * b as f64 / 16.0;
                let t = 2.0 * PI * a as f64 / 64.0;
                let p = center + Point2::new(t.cos(), t.sin()) * rad;
                if c.contains_point(p) != want_inside {
                    return false;
                }
            }
        }
        c.contains_point(center) == want_inside
    }

    #[test]
    fn predicates_on_circles() {
        let c = circle(1.0, 512);
        for i in [0, 100, 333] {
            assert!(ext_ball_fits(&c, i, 0.2).unwrap());
            assert!(int_ball_fits(&c, i, 0.2).unwrap());
        }
        let small = circle(0.1, 256);
        assert!(!int_ball_fits(&small, 3, 0.2).unwrap());
        assert!(ext_ball_fits(&small, 3, 0.2).unwrap());
        assert!(matches!(ext_ball_fits(&c, 512, 0.2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn circle_kappa_r() {
        for s in kappa_r(&circle(0.5, 512), 0.2).unwrap() {
            assert!((s.kappa_r - 2.0).abs() < 1e-9);
        }
        for s in kappa_r(&circle(0.1, 512), 0.2).unwrap() {
            assert!(!s.int_ball_fits && s.ext_ball_fits);
            assert!((s.kappa_r - 7.5).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_is_broken_below_r() {
        let big = kappa_r(&circle(0.5, 512), 0.2).unwrap()[0].kappa_r;
        let small = kappa_r(&circle(0.1, 512), 0.2).unwrap()[0].kappa_r;
        assert!((big - 2.0).abs() < 1e-9);
        assert!((small - 7.5).abs() < 1e-9);
        assert!((small - 1.0 / 0.1).abs() > 1.0);
        // rescaling both the set and r is exact
        let scaled = kappa_r(&circle(0.05, 512), 0.1).unwrap()[0].kappa_r;
        assert!((scaled - 2.0 * small).abs() < 1e-9);
    }

    #[test]
    fn strip_dichotomy() {
        let wide = stadium(0.3, 3.0, 4000);
        let s = kappa_r(&wide, 0.2).unwrap()[flat_vertex(&wide)];
        assert!(s.ext_ball_fits && s.int_ball_fits);
        assert!(s.kappa_r.abs() < 1e-9);

        let thin = stadium(0.1, 3.0, 4000);
        let i = flat_vertex(&thin);
        let s = kappa_r(&thin, 0.2).unwrap()[i];
        assert!(s.ext_ball_fits && !s.int_ball_fits);
        assert!((s.kappa_r - 2.5).abs() < 1e-9);
        assert!(ext_ball_fits(&thin, i, 0.15).unwrap());
    }

    #[test]
    fn sample_invariants_hold() {
        for c in [circle(0.1, 300), stadium(0.1, 1.0, 900), stadium(0.3, 1.0, 900)] {
            for s in kappa_r(&c, 0.2).unwrap() {
                assert_eq!(s.ext_ball_fits, s.kappa_r_plus != 0.0);
                assert_eq!(s.int_ball_fits, s.kappa_r_minus != 0.0);
                if s.ext_ball_fits && s.int_ball_fits {
                    assert_eq!(s.kappa_r, s.kappa);
                } else {
                    assert_eq!(s.kappa_r, s.kappa_r_plus + s.kappa_r_minus);
                }
            }
        }
    }

    #[test]
    fn predicates_agree_with_brute_force() {
        let fam = [circle(0.1, 256), stadium(0.1, 0.5, 600), stadium(0.25, 0.5, 600)];
        for c in &fam {
            for i in (0..c.len()).step_by(37) {
                for rho in [0.05, 0.12, 0.2] {
                    for side in [Side::Exterior, Side::Interior] {
                        let loose = brute_force_shrunk(c, i, rho, side, 1e-3);
                        if loose != brute_force_shrunk(c, i, rho, side, 1e-6) {
                            // tangent at two places up to the oracle's resolution
                            continue;
                        }
                        let t = BallTester::new(std::slice::from_ref(c));
                        assert_eq!(t.fits(0, i, rho, side).unwrap(), loose, "i={i} rho={rho} {side:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn global_inclusion_sees_other_curves() {
        let a = circle_at(0.5, 256, 0.0);
        let b = circle_at(0.5, 256, 1.1);
        let fam = [a, b];
        let t = BallTester::new(&fam);
        // the vertex of the first circle facing the second one
        assert!(!t.fits(0, 0, 0.2, Side::Exterior).unwrap());
        assert!(t.fits(0, 128, 0.2, Side::Exterior).unwrap());
    }

    #[test]
    fn sigma_profiles() {
        let c = circle(1.0, 512);
        for p in kappa_sigma_profile(&c, 0, 0.2, 32).unwrap() {
            assert!((p.kappa_plus + p.kappa_minus - 1.0).abs() < 1e-12);
        }
        let small = circle(0.1, 512);
        let prof = kappa_sigma_profile(&small, 7, 0.2, 32).unwrap();
        for p in &prof {
            assert_eq!(p.int_fits, p.sigma <= 0.1, "sigma {}", p.sigma);
        }
        let st = stadium(0.1, 3.0, 4000);
        let i = flat_vertex(&st);
        for p in kappa_sigma_profile(&st, i, 0.2, 32).unwrap() {
            assert_eq!(p.int_fits, brute_force_fits(&st, i, p.sigma, Side::Interior));
            if p.sigma > 0.1 {
                assert_eq!(p.kappa_minus, 0.0);
            }
            assert!((p.kappa_plus - 1.0 / (2.0 * p.sigma)).abs() < 1e-9);
        }
    }

    #[test]
    fn kappa_f_oracles() {
        let c = circle(1.0, 512);
        let half = SmoothingSpec::new(0.2, 0.1, 32).unwrap();
        // integration by parts: -int (s/r) f' k ds = (k/r) int f, and int f = r - delta/2
        assert!((kappa_f(&c, 0, &half).unwrap() - 0.75).abs() < 1e-6);
        let sharp = SmoothingSpec::new(0.2, 2e-4, 32).unwrap();
        let kr = kappa_r(&c, 0.2).unwrap()[0].kappa_r;
        let kf = kappa_f(&c, 0, &sharp).unwrap();
        assert!((kf - (1.0 - 1e-3 / 2.0)).abs() < 1e-6);
        assert!((kf - kr).abs() < 1e-2);
    }

    #[test]
    fn kappa_f_rejects_bad_specs() {
        assert!(matches!(SmoothingSpec::new(0.2, 0.1, 4), Err(Error::QuadratureUnderflow(_))));
        assert!(SmoothingSpec::new(0.2, 0.3, 32).is_err());
    }

    #[test]
    fn smootherstep_integrates_to_half() {
        let n = 10_000;
        let s: f64 = (0..n).map(|k| smootherstep((k as f64 + 0.5) / n as f64).0).sum::<f64>() / n as f64;
        assert!((s - 0.5).abs() < 1e-9);
    }
}
