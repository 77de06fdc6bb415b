use optmm::quoting::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 252.0 * 30.0;
const VEGA: f64 = 3.9;

fn atm() -> IntensityCurve {
    IntensityCurve::logistic(LAMBDA, 0.7, 150.0, VEGA).unwrap()
}

fn floor() -> f64 {
    -50.0 * VEGA / 150.0
}

#[test]
fn exponential_family_matches_closed_form() {
    let (a, k) = (500.0, 30.0);
    let c = IntensityCurve::exponential(a, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let p: f64 = rng.random_range(-0.5..0.5);
        let (h, d) = hamiltonian(&c, p, -10.0).unwrap();
        let h_exact = a / k * (-k * p - 1.0).exp();
        assert!((d - (p + 1.0 / k)).abs() < 1e-9);
        assert!((h - h_exact).abs() < 1e-9 * h_exact.max(1.0));
        let hp = hamiltonian_prime(&c, p, -10.0).unwrap();
        let hp_exact = -a * (-k * p - 1.0).exp();
        assert!((hp - hp_exact).abs() < 1e-9 * hp_exact.abs().max(1.0));
        assert_eq!(
            optimal_quote(&c, p, -10.0).unwrap(),
            (p + 1.0 / k).max(-10.0)
        );
    }
}

#[test]
fn exponential_quote_respects_floor() {
    let c = IntensityCurve::exponential(500.0, 30.0).unwrap();
    let q = optimal_quote(&c, -2.0, -1.0).unwrap();
    assert_eq!(q, -1.0);
}

#[test]
fn logistic_hamiltonian_matches_grid_search() {
    let c = atm();
    let lo = floor();
    let n = ((1.0 - lo) / 1e-6).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let p: f64 = rng.random_range(-0.5..0.5);
        let best = (0..=n)
            .map(|k| {
                let d = lo + k as f64 * 1e-6;
                c.intensity(d) * (d - p)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let (h, _) = hamiltonian(&c, p, lo).unwrap();
        assert!(h >= best - 1e-12 * best.abs());
        assert!(((h - best) / best).abs() < 1e-8, "p={p}: {h} vs {best}");
    }
}

#[test]
fn first_order_condition_holds_when_unclipped() {
    let c = atm();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let p: f64 = rng.random_range(-2.0..2.0);
        let (_, d) = hamiltonian(&c, p, floor()).unwrap();
        let foc = c.derivative(d) * (d - p) + c.intensity(d);
        assert!(foc.abs() <= 1e-10 * c.intensity(d), "p={p}: {foc}");
    }
}

#[test]
fn derivative_matches_finite_difference() {
    let c = atm();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let p: f64 = rng.random_range(-0.3..0.3);
        let h = 1e-5;
        let fd = (hamiltonian(&c, p + h, floor()).unwrap().0
            - hamiltonian(&c, p - h, floor()).unwrap().0)
            / (2.0 * h);
        let hp = hamiltonian_prime(&c, p, floor()).unwrap();
        assert!(((fd - hp) / hp).abs() < 1e-6, "p={p}: {fd} vs {hp}");
        assert!(hp < 0.0 && hp > -LAMBDA);
    }
}

#[test]
fn inverse_of_envelope_recovers_quote() {
    let c = atm();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let p: f64 = rng.random_range(-0.5..0.5);
        let hp = hamiltonian_prime(&c, p, floor()).unwrap();
        let via_inverse = c.inverse(-hp).unwrap().max(floor());
        let q = optimal_quote(&c, p, floor()).unwrap();
        assert!(
            (via_inverse - q).abs() < 1e-9,
            "p={p}: {via_inverse} vs {q}"
        );
    }
}

#[test]
fn derivative_vanishes_for_large_penalty() {
    let c = atm();
    let hp = hamiltonian_prime(&c, 50.0, floor()).unwrap();
    assert!(hp <= 0.0 && hp > -1e-100);
    let hp_mid = hamiltonian_prime(&c, 1.0, floor()).unwrap();
    assert!(hp < 0.0 || hp_mid < 0.0);
}

#[test]
fn quotes_increase_with_penalty() {
    let c = atm();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        let (p1, p2) = if a < b { (a, b) } else { (b, a) };
        assert!(optimal_quote(&c, p1, floor()).unwrap() <= optimal_quote(&c, p2, floor()).unwrap());
    }
}

#[test]
fn hamiltonian_convex_and_nonincreasing_on_grid() {
    let c = atm();
    let ps: Vec<f64> = (0..=400).map(|k| -1.0 + k as f64 * 0.005).collect();
    let hs: Vec<f64> = ps
        .iter()
        .map(|&p| hamiltonian(&c, p, floor()).unwrap().0)
        .collect();
    for w in hs.windows(3) {
        assert!(w[1] - w[0] <= 1e-9);
        assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
    }
}

proptest! {
    #[test]
    fn envelope_identity(p in -1.0f64..1.0, lambda in 10.0f64..1e5, alpha in -2.0f64..2.0, slope in 1.0f64..500.0) {
        let c = IntensityCurve::Logistic { lambda_max: lambda, alpha, slope };
        let (_, d) = hamiltonian(&c, p, -1e3).unwrap();
        let hp = hamiltonian_prime(&c, p, -1e3).unwrap();
        prop_assert!((hp + c.intensity(d)).abs() <= 1e-8 * lambda);
    }

    #[test]
    fn hamiltonian_is_nonnegative_and_dominates_any_quote(p in -1.0f64..1.0, d in -1.0f64..1.0) {
        let c = atm();
        let (h, _) = hamiltonian(&c, p, floor()).unwrap();
        prop_assert!(h >= 0.0);
        if d >= floor() {
            prop_assert!(h >= c.intensity(d) * (d - p) - 1e-9 * h.abs().max(1.0));
        }
    }

    #[test]
    fn convexity_in_p(p in -1.0f64..1.0, step in 1e-3f64..0.1) {
        let c = atm();
        let h = |x: f64| hamiltonian(&c, x, floor()).unwrap().0;
        prop_assert!(h(p + step) - 2.0 * h(p) + h(p - step) >= -1e-9);
        prop_assert!(h(p + step) <= h(p) + 1e-9);
    }

    #[test]
    fn hypothesis_ratio_below_two(d in -10.0f64..10.0, alpha in -3.0f64..3.0, slope in 0.1f64..1e3) {
        let c = IntensityCurve::Logistic { lambda_max: 1.0, alpha, slope };
        prop_assert!(c.hypothesis_ratio(d) < 2.0);
    }
}
