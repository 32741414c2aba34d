use proptest::prelude::*;
use rflow_core::geometry::{CurveFamily, PlanarCurve, Point2};
use rflow_core::io::{curve_csv, parse_curve_csv};
use rflow_core::rcurv::kappa_r;
use rflow_core::shapes::AnalyticSet;
use rflow_core::wave::{ell, solve_phi};

fn ellipse(a: f64, b: f64, n: usize, phase: f64) -> PlanarCurve {
    let v = (0..n)
        .map(|i| {
            let t = phase + std::f64::consts::TAU * i as f64 / n as f64;
            Point2::new(a * t.cos(), b * t.sin())
        })
        .collect();
    PlanarCurve::new(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn kappa_r_assembles_from_flags(a in 0.2f64..1.5, b in 0.2f64..1.5, r in 0.05f64..0.6, phase in 0.0f64..1.0) {
        let c = ellipse(a, b, 160, phase);
        for s in kappa_r(&c, r).unwrap() {
            let plus = if s.ext_ball_fits { s.kappa / 2.0 + 1.0 / (2.0 * r) } else { 0.0 };
            let minus = if s.int_ball_fits { s.kappa / 2.0 - 1.0 / (2.0 * r) } else { 0.0 };
            prop_assert_eq!(s.kappa_r_plus, plus);
            prop_assert_eq!(s.kappa_r_minus, minus);
            if s.ext_ball_fits && s.int_ball_fits {
                prop_assert_eq!(s.kappa_r, s.kappa);
            } else {
                prop_assert_eq!(s.kappa_r, s.kappa_r_plus + s.kappa_r_minus);
            }
            // a convex set always admits the exterior ball
            prop_assert!(s.ext_ball_fits);
        }
    }

    #[test]
    fn kappa_r_scales_like_curvature(a in 0.3f64..1.0, b in 0.3f64..1.0, r in 0.05f64..0.5, lam in 0.5f64..3.0) {
        let c = ellipse(a, b, 128, 0.0);
        let big = ellipse(lam * a, lam * b, 128, 0.0);
        let k1 = kappa_r(&c, r).unwrap();
        let k2 = kappa_r(&big, lam * r).unwrap();
        for (p, q) in k1.iter().zip(&k2) {
            prop_assert_eq!(p.int_ball_fits, q.int_ball_fits);
            prop_assert!((p.kappa_r - lam * q.kappa_r).abs() <= 1e-8 * p.kappa_r.abs().max(1.0));
        }
    }

    #[test]
    fn curve_csv_round_trips(a in 0.1f64..10.0, b in 0.1f64..10.0, n in 16usize..200) {
        let c = ellipse(a, b, n, 0.3);
        let back = parse_curve_csv(&curve_csv(&c)).unwrap();
        prop_assert_eq!(back, CurveFamily::single(c));
    }

    #[test]
    fn stadium_discretization_is_simple_and_ccw(l in 0.05f64..0.5, len in 0.1f64..2.0, n in 64usize..600) {
        let c = AnalyticSet::Stadium { half_width: l, half_length: len }.discretize(n, None).unwrap();
        let exact = 4.0 * l * len + std::f64::consts::PI * l * l;
        prop_assert!(c.area() > 0.0);
        prop_assert!((c.area() - exact).abs() <= 0.05 * exact);
    }

    #[test]
    fn phi_stays_below_its_limit(r in 1.01f64..8.0) {
        let sol = solve_phi(r, 6.0, 1e-3 * (1.0f64).min(1.0 / r)).unwrap();
        let l = ell(r);
        prop_assert!(sol.phi.iter().all(|p| p.abs() < l + 1e-9));
        prop_assert!(sol.phi.windows(2).all(|w| w[1] >= w[0]));
    }
}
