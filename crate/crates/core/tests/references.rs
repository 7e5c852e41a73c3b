use proptest::prelude::*;
use rarefy_core::metrics::error_to_viscous;
use rarefy_core::{FieldState, Grid1D, RiemannData};

fn riemann() -> impl Strategy<Value = RiemannData> {
    (-2.0f64..2.0, 0.05f64..3.0).prop_map(|(a, d)| RiemannData::new(a, a + d).unwrap())
}

proptest! {
    #[test]
    fn rarefaction_is_non_decreasing_in_x(r in riemann(), t in 0.01f64..1e3, xs in prop::collection::vec(-1e4f64..1e4, 2..40)) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let w: Vec<f64> = xs.iter().map(|&x| r.rarefaction(x, t).unwrap()).collect();
        prop_assert!(w.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(w.iter().all(|&v| r.u_minus() <= v && v <= r.u_plus()));
    }

    #[test]
    fn derivatives_match_difference_quotients(r in riemann(), t in 0.5f64..500.0, s in -1.5f64..1.5) {
        // sample across the fan and a few diffusive widths beyond it
        let sq = t.sqrt();
        let x = if s < 0.0 { r.u_minus() * t + s * 4.0 * sq } else { r.u_plus() * t + (s - 1.0) * 4.0 * sq };
        let x = x + s * (r.u_plus() - r.u_minus()) * t;
        let d = 1e-4 * sq;
        let f = |x: f64| r.hopf_cole(x, t);
        let scale = r.jump() / sq;
        let fd1 = (f(x + d).value - f(x - d).value) / (2.0 * d);
        let fd2 = (f(x + d).dx - f(x - d).dx) / (2.0 * d);
        prop_assert!((fd1 - f(x).dx).abs() <= 1e-5 * scale, "wx {} vs {}", f(x).dx, fd1);
        prop_assert!((fd2 - f(x).dxx).abs() <= 1e-5 * scale / sq, "wxx {} vs {}", f(x).dxx, fd2);
    }
}

#[test]
fn viscous_profile_is_strictly_increasing_across_the_fan() {
    for (um, up) in [(-1.0, 1.0), (-0.5, 1.0), (0.2, 0.7), (-3.0, -1.0)] {
        let r = RiemannData::new(um, up).unwrap();
        for t in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            let (a, b) = (um * t - 6.0 * t.sqrt(), up * t + 6.0 * t.sqrt());
            let w: Vec<f64> = (0..1000).map(|i| r.viscous_profile(a + (b - a) * i as f64 / 999.0, t).unwrap()).collect();
            for (i, p) in w.windows(2).enumerate() {
                assert!(p[0] < p[1], "({um}, {up}) t = {t}: not increasing at sample {i}");
            }
            assert!(w.iter().all(|&v| um < v && v < up));
        }
    }
}

#[test]
fn diffusive_gap_scales_like_the_heat_kernel() {
    // ||w - w^R||_p t^((1-1/p)/2) stays within a bounded band for p > 1; in L1
    // the fan interior adds a log(2+t)
    let r = RiemannData::new(-1.0, 1.0).unwrap();
    for p in [1.0, 2.0, f64::INFINITY] {
        let scaled: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&t| {
                let g = Grid1D::fan_rule(r, t, 0.05).unwrap();
                let values = g.nodes().map(|x| r.rarefaction(x, t).unwrap()).collect();
                let s = FieldState::new(g, values, -1.0, 1.0, t).unwrap();
                let e = error_to_viscous(&s, &r, 1.0, p).unwrap();
                if p == 1.0 { e / (2.0 + t).ln() } else { e * t.powf((1.0 - 1.0 / p) / 2.0) }
            })
            .collect();
        let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        assert!(lo > 0.0 && hi / lo < 3.0, "p = {p}: {scaled:?}");
    }
}
