use std::sync::OnceLock;

use lpen::bm_oracle::BmClosedForms;
use lpen::calculus::{hit_prob, hit_prob3};
use lpen::montecarlo::{symmetric_stable, Estimate, Functional, SimConfig, Simulation, StopRule};
use lpen::penalization::{expect_gamma_two_point, phi};
use lpen::{ClockSpec, HFunction, ModelSpec, PenalizationParams, PhiEvaluator, ZeroResolvent};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn stable() -> &'static HFunction {
    static H: OnceLock<HFunction> = OnceLock::new();
    H.get_or_init(|| HFunction::new(ModelSpec::stable(1.5).unwrap()))
}

fn jumps() -> &'static HFunction {
    static H: OnceLock<HFunction> = OnceLock::new();
    H.get_or_init(|| HFunction::new(ModelSpec::brownian_with_jumps(1.0, 0.5, 0.7).unwrap()))
}

fn bm() -> &'static HFunction {
    static H: OnceLock<HFunction> = OnceLock::new();
    H.get_or_init(|| HFunction::new(ModelSpec::standard_bm()))
}

fn models() -> [&'static HFunction; 3] {
    [bm(), stable(), jumps()]
}

fn point() -> impl Strategy<Value = f64> {
    -4.0..4.0f64
}

fn separated(xs: &[f64]) -> bool {
    xs.iter()
        .enumerate()
        .all(|(i, a)| xs[i + 1..].iter().all(|b| (a - b).abs() > 0.05))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn h_is_subadditive_and_even_for_symmetric_models(x in point(), y in point()) {
        for hf in models() {
            let (hx, hy, hxy) = (hf.h(x).unwrap(), hf.h(y).unwrap(), hf.h(x + y).unwrap());
            prop_assert!(hxy <= hx + hy + 1e-8, "h({}) = {hxy} > {hx} + {hy}", x + y);
            prop_assert!((hf.h(-x).unwrap() - hx).abs() < 1e-8);
            prop_assert!(hx >= 0.0);
        }
    }

    #[test]
    fn phi_is_positive_and_swap_symmetric(
        a in point(), b in point(), x in point(),
        la in 0.05..5.0f64, lb in 0.05..5.0f64, g in -1.0..=1.0f64,
    ) {
        prop_assume!(separated(&[a, b]));
        let p = PenalizationParams::new(a, b, la, lb, g).unwrap();
        for hf in models() {
            let forward = PhiEvaluator::with_order(hf, p).unwrap().phi(x).unwrap();
            let backward = PhiEvaluator::with_order(hf, p.swapped()).unwrap().phi(x).unwrap();
            prop_assert!(forward > 0.0);
            prop_assert!((forward - backward).abs() <= 1e-9 * forward.max(1.0));
            prop_assert_eq!(phi(hf, &p, x).unwrap(), phi(hf, &p.swapped(), x).unwrap());
        }
    }

    #[test]
    fn phi_is_affine_in_gamma(
        a in point(), b in point(), x in point(),
        la in 0.05..5.0f64, lb in 0.05..5.0f64, g in -1.0..=1.0f64,
    ) {
        prop_assume!(separated(&[a, b]));
        let p = PenalizationParams::new(a, b, la, lb, g).unwrap();
        let hf = stable();
        let up = phi(hf, &p.with_gamma(1.0).unwrap(), x).unwrap();
        let down = phi(hf, &p.with_gamma(-1.0).unwrap(), x).unwrap();
        let v = phi(hf, &p, x).unwrap();
        prop_assert!((v - 0.5 * (1.0 + g) * up - 0.5 * (1.0 - g) * down).abs() < 1e-10 * v.max(1.0));
    }

    #[test]
    fn three_point_hitting_partitions(x in point(), a in point(), b in point(), c in point()) {
        prop_assume!(separated(&[a, b, c]));
        for hf in models() {
            let total = hit_prob3(hf, x, a, b, c).unwrap()
                + hit_prob3(hf, x, b, a, c).unwrap()
                + hit_prob3(hf, x, c, a, b).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-9, "total {total}");
        }
    }

    #[test]
    fn characteristic_exponent_is_even(lam in 0.0..50.0f64) {
        for hf in models() {
            let m = hf.model();
            prop_assert_eq!(m.psi(lam), m.psi(-lam));
            prop_assert!(m.psi(lam) >= 0.0);
        }
    }

    #[test]
    fn bm_h_matches_closed_form(x in -20.0..20.0f64) {
        let v = bm().h(x).unwrap();
        prop_assert!((v - BmClosedForms::default().h(x)).abs() < 1e-8);
    }
}

/// Two-point clocks agree with the Brownian closed forms and are bounded
/// by the exit probabilities for every model.
#[test]
fn two_point_clock_is_coherent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut u = move |lo: f64, hi: f64| lo + (hi - lo) * rand::Rng::random::<f64>(&mut rng);
    let oracle = BmClosedForms::default();
    let mut checked = 0;
    while checked < 20 {
        let (c, d) = (u(0.5, 6.0), u(0.5, 6.0));
        let (a, b, x) = (u(-d, c), u(-d, c), u(-d, c));
        if !separated(&[a, b, c, -d]) {
            continue;
        }
        let (la, lb) = (u(0.1, 3.0), u(0.1, 3.0));
        let p = PenalizationParams::new(a, b, la, lb, u(-1.0, 1.0)).unwrap();
        let e = expect_gamma_two_point(bm(), &p, x, c, d).unwrap();
        let (rc, rd, _) = oracle.gamma_two_point(a, b, la, lb, x, c, d).unwrap();
        assert!((e.restricted_c - rc).abs() < 1e-8, "{e:?} vs {rc}");
        assert!((e.restricted_d - rd).abs() < 1e-8, "{e:?} vs {rd}");
        for hf in models() {
            let e = expect_gamma_two_point(hf, &p, x, c, d).unwrap();
            let up = hit_prob(hf, x, c, -d).unwrap();
            assert!(e.restricted_c > 0.0 && e.restricted_c <= up + 1e-9, "{e:?} vs {up}");
            assert!(e.restricted_d > 0.0 && e.restricted_d <= 1.0 - up + 1e-9, "{e:?} vs {up}");
            assert!((e.restricted_c + e.restricted_d - e.total).abs() < 1e-12);
        }
        checked += 1;
    }
}

fn ks_statistic(mut xs: Vec<f64>, mut ys: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// A sum of `k` standard stable variates scaled by `k^{-1/α}` has the
/// law of one variate.
#[test]
fn stable_variates_are_self_similar() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for alpha in [1.2, 1.5, 1.8] {
        let n = 20_000;
        let k = 4;
        let single: Vec<f64> = (0..n).map(|_| symmetric_stable(alpha, &mut rng)).collect();
        let scale = (k as f64).powf(-1.0 / alpha);
        let summed: Vec<f64> = (0..n)
            .map(|_| scale * (0..k).map(|_| symmetric_stable(alpha, &mut rng)).sum::<f64>())
            .collect();
        let d = ks_statistic(single, summed);
        let critical = 1.95 * (2.0 / n as f64).sqrt();
        assert!(d < critical, "alpha {alpha}: KS {d} >= {critical}");
    }
}

/// The characteristic function of the sampler matches `e^{-|λ|^α}`.
#[test]
fn stable_variates_have_the_right_characteristic_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 100_000;
    for alpha in [1.2, 1.7] {
        let xs: Vec<f64> = (0..n).map(|_| symmetric_stable(alpha, &mut rng)).collect();
        for lam in [0.3, 1.0, 2.0] {
            let emp = xs.iter().map(|x| (lam * x).cos()).sum::<f64>() / n as f64;
            let exact = (-f64::powf(lam, alpha)).exp();
            assert!((emp - exact).abs() < 5.0 / (n as f64).sqrt(), "alpha {alpha} lam {lam}: {emp} vs {exact}");
        }
    }
}

fn first_hit_frequency(model: &ModelSpec, x: f64, a: f64, b: f64, cfg: SimConfig) -> Estimate {
    let (lo, hi) = (a.min(b), a.max(b));
    let shift = -0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let clock = ClockSpec::TwoPoint { c: half, d: half };
    let sim = Simulation::new(model, StopRule::Clock(clock), Functional::discount(0.0), &[], cfg).unwrap();
    let a_side = if a < b { -1.0 } else { 1.0 };
    sim.estimate_with(x + shift, |o| Ok(if o.state.x * a_side > 0.0 { 1.0 } else { 0.0 }))
        .unwrap()
}

/// Simulated first-hit sides agree with `hit_prob` over random configurations.
#[test]
fn simulated_first_hit_side_matches_hit_prob() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut u = move |lo: f64, hi: f64| lo + (hi - lo) * rand::Rng::random::<f64>(&mut rng);
    let exact_cfg = SimConfig {
        n_paths: 4000,
        ..SimConfig::default()
    };
    let mut checked = 0;
    while checked < 20 {
        let (a, b) = (u(-3.0, 3.0), u(-3.0, 3.0));
        if (a - b).abs() < 0.5 {
            continue;
        }
        checked += 1;
        let x = u(a.min(b), a.max(b));
        for hf in [bm(), jumps()] {
            let e = first_hit_frequency(hf.model(), x, a, b, SimConfig { seed: checked, ..exact_cfg });
            let p = hit_prob(hf, x, a, b).unwrap();
            assert!(e.agrees_with(p, 3.0, 0.0), "{} x {x} a {a} b {b}: {e:?} vs {p}", hf.model().label());
        }
    }
}
