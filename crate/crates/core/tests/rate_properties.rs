use bbmtail::rate::{
    f_prime, f_value, minimize_rate, poly_p, rate_static_ball, rate_empty_moving_ball, rate_outside_expanding_ball,
    rho_bar, RateInput,
};
use proptest::prelude::*;

/// `(θ, a)` with `0 < a < 1 - θ² < 1`, away from the edges by `margin`.
fn open_pair(margin: f64) -> impl Strategy<Value = (f64, f64)> {
    (margin..1.0 - margin, margin..1.0 - margin).prop_filter_map("open regime", move |(t, u)| {
        let theta = t;
        let a = u * (1.0 - theta * theta);
        (a > margin && a < 1.0 - theta * theta - margin).then_some((theta, a))
    })
}

/// Any pair in the closed domain `0 <= a < 1 - θ²`.
fn domain_pair() -> impl Strategy<Value = (f64, f64)> {
    (0.0..0.98f64, 0.0..0.98f64).prop_map(|(theta, u)| (theta, u * (1.0 - theta * theta)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn minimizer_is_inside_and_below_bound((theta, a) in open_pair(1e-3)) {
        let input = RateInput::unit(theta, a).unwrap();
        let sol = minimize_rate(&input).unwrap();
        prop_assert!(sol.rho_hat > 0.0);
        prop_assert!(sol.rho_hat < rho_bar(&input));
        prop_assert!(sol.rho_hat < ((1.0 - theta * theta - a) / 2.0).sqrt());
        prop_assert!(!sol.at_boundary);
        prop_assert!(poly_p(&input, sol.rho_hat).unwrap().abs() <= 1e-8);
    }

    #[test]
    fn derivative_equals_one_at_rho_bar((theta, a) in open_pair(1e-3)) {
        let input = RateInput::unit(theta, a).unwrap();
        let d = f_prime(&input, rho_bar(&input)).unwrap();
        prop_assert!((d - 1.0).abs() <= 1e-9, "f'(rho_bar) = {}", d);
    }

    #[test]
    fn convex_on_the_open_interval((theta, a) in open_pair(1e-3), frac in 0.01..0.99f64) {
        let input = RateInput::unit(theta, a).unwrap();
        let upper = 1.0 - a;
        let rho = frac * upper;
        let h = 1e-5 * rho.min(upper - rho);
        let second = (f_prime(&input, rho + h).unwrap() - f_prime(&input, rho - h).unwrap()) / (2.0 * h);
        prop_assert!(second > 0.0, "f''({}) = {}", rho, second);
    }

    #[test]
    fn derivative_matches_difference_quotient((theta, a) in open_pair(1e-2), frac in 0.05..0.95f64) {
        let input = RateInput::unit(theta, a).unwrap();
        let rho = frac * (1.0 - a);
        let h = 1e-6 * rho.min(1.0 - a - rho);
        let numeric = (f_value(&input, rho + h).unwrap() - f_value(&input, rho - h).unwrap()) / (2.0 * h);
        let exact = f_prime(&input, rho).unwrap();
        prop_assert!((numeric - exact).abs() <= 1e-5 * (1.0 + exact.abs()));
    }

    #[test]
    fn minimum_beats_every_sampled_point((theta, a) in domain_pair(), frac in 0.001..1.0f64) {
        let input = RateInput::unit(theta, a).unwrap();
        let sol = minimize_rate(&input).unwrap();
        let rho = frac * (1.0 - a);
        prop_assert!(sol.infimum <= f_value(&input, rho).unwrap() + 1e-12);
        prop_assert!(sol.infimum > 0.0 && sol.infimum <= 1.0 - a);
    }

    #[test]
    fn sign_equivalence_left_of_the_bound((theta, a) in open_pair(1e-3), frac in 0.001..0.999f64) {
        let input = RateInput::unit(theta, a).unwrap();
        let upper = ((1.0 - theta * theta - a) / 2.0).sqrt().min(1.0 - a);
        let rho = frac * upper;
        let d = f_prime(&input, rho).unwrap();
        let p = poly_p(&input, rho).unwrap();
        if d.abs() > 1e-9 && p.abs() > 1e-12 {
            prop_assert_eq!(d.signum(), -p.signum());
        }
    }

    #[test]
    fn decreasing_in_a(theta in 0.0..0.95f64, u in 0.0..0.95f64, step in 0.001..0.05f64) {
        let a1 = u * (1.0 - theta * theta);
        let a2 = a1 + step * (1.0 - theta * theta - a1);
        let s1 = minimize_rate(&RateInput::unit(theta, a1).unwrap()).unwrap();
        let s2 = minimize_rate(&RateInput::unit(theta, a2).unwrap()).unwrap();
        prop_assert!(s2.infimum < s1.infimum);
        prop_assert!(s2.rho_hat < s1.rho_hat || (s1.at_boundary && s2.at_boundary));
    }

    #[test]
    fn decreasing_in_theta(a in 0.0..0.95f64, u in 0.0..0.95f64, step in 0.001..0.05f64) {
        let top = (1.0 - a).sqrt();
        let t1 = u * top;
        let t2 = t1 + step * (top - t1);
        let s1 = minimize_rate(&RateInput::unit(t1, a).unwrap()).unwrap();
        let s2 = minimize_rate(&RateInput::unit(t2, a).unwrap()).unwrap();
        prop_assert!(s2.infimum < s1.infimum);
        prop_assert!(s2.rho_hat < s1.rho_hat || (s1.at_boundary && s2.at_boundary));
    }

    #[test]
    fn minimizer_is_continuous((theta, a) in domain_pair()) {
        let delta = 1e-6;
        let base = minimize_rate(&RateInput::unit(theta, a).unwrap()).unwrap().rho_hat;
        if a + delta < 1.0 - theta * theta {
            let r = minimize_rate(&RateInput::unit(theta, a + delta).unwrap()).unwrap().rho_hat;
            prop_assert!((r - base).abs() <= 1e-4);
        }
        if (theta + delta).powi(2) < 1.0 - a {
            let r = minimize_rate(&RateInput::unit(theta + delta, a).unwrap()).unwrap().rho_hat;
            prop_assert!((r - base).abs() <= 1e-4);
        }
    }

    #[test]
    fn rate_scales_with_beta((theta, a) in domain_pair(), beta in 0.1..10.0f64) {
        let unit = minimize_rate(&RateInput::unit(theta, a).unwrap()).unwrap();
        let scaled = minimize_rate(&RateInput::new(theta, a, beta).unwrap()).unwrap();
        prop_assert_eq!(unit, scaled);
        let input = RateInput::new(theta, a, beta).unwrap();
        if theta > 0.0 {
            prop_assert_eq!(rate_outside_expanding_ball(&input).unwrap(), beta * rho_bar(&input));
        }
    }

    #[test]
    fn special_cases_match_closed_forms(x in 0.0..0.999f64, beta in 0.1..5.0f64) {
        let s = minimize_rate(&RateInput::new(0.0, x, beta).unwrap()).unwrap();
        prop_assert!((beta * s.infimum - rate_static_ball(x, beta).unwrap()).abs() <= 1e-9);
        let s = minimize_rate(&RateInput::new(x, 0.0, beta).unwrap()).unwrap();
        prop_assert!((beta * s.infimum - rate_empty_moving_ball(x, beta).unwrap()).abs() <= 1e-9);
        prop_assert!((s.rho_hat - (1.0 - x) / std::f64::consts::SQRT_2).abs() <= 1e-9);
    }
}

#[test]
fn boundary_limits() {
    let off = 1e-4;
    let sqrt2 = std::f64::consts::SQRT_2;
    for theta in [0.05, 0.25, 0.5, 0.75, 0.95] {
        // a -> 0 recovers the zero-a solution.
        let s = minimize_rate(&RateInput::unit(theta, off).unwrap()).unwrap();
        assert!((s.rho_hat - (1.0 - theta) / sqrt2).abs() <= 1e-2);
        assert!((s.infimum - 2.0 * (sqrt2 - 1.0) * (1.0 - theta)).abs() <= 1e-2);
        // a -> 1 - θ² collapses both to 0.
        let s = minimize_rate(&RateInput::unit(theta, 1.0 - theta * theta - off).unwrap()).unwrap();
        assert!(s.rho_hat <= 1e-2 && s.infimum <= 1e-2, "{s:?}");
    }
    for a in [0.05, 0.3, 0.5, 0.7, 0.95] {
        let s = minimize_rate(&RateInput::unit(off, a).unwrap()).unwrap();
        let rho0 = if a < 0.5 { ((1.0 - a) / 2.0).sqrt() } else { 1.0 - a };
        assert!((s.rho_hat - rho0).abs() <= 1e-2, "a = {a}: {s:?}");
        assert!((s.infimum - rate_static_ball(a, 1.0).unwrap()).abs() <= 1e-2);
        let s = minimize_rate(&RateInput::unit((1.0 - a).sqrt() - off, a).unwrap()).unwrap();
        assert!(s.rho_hat <= 1e-2 && s.infimum <= 1e-2, "{s:?}");
    }
}

#[test]
fn phase_transition_at_one_half() {
    for k in 0..200 {
        let a = k as f64 / 200.0;
        let s = minimize_rate(&RateInput::unit(0.0, a).unwrap()).unwrap();
        let expect = if a < 0.5 { ((1.0 - a) / 2.0).sqrt() } else { 1.0 - a };
        assert!((s.rho_hat - expect).abs() <= 1e-9, "a = {a}");
    }
    let s = minimize_rate(&RateInput::unit(0.0, 0.5).unwrap()).unwrap();
    assert!((s.rho_hat - 0.5).abs() <= 1e-9);
    assert!((s.infimum - 0.5).abs() <= 1e-9);
    let below = minimize_rate(&RateInput::unit(0.0, 0.5 - 1e-9).unwrap()).unwrap();
    assert!((below.rho_hat - 0.5).abs() <= 1e-8);
}
