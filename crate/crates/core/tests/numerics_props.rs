use critwin_core::analysis::{fit_loglog_slope, ks_statistic, rescale, sup_distance, Scaling, SeriesKind};
use critwin_core::moments::{bound_sweep, kappa_oracle, moment_triple, Quantity, WindowFamily};
use critwin_core::{derive_k, edge_probability, CriticalWindow, RngStream, RunConfig};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn kappa_closed_form_matches_summation() {
    let mut rng = RngStream::new(9, 0, "moments/oracle");
    let mut checked = 0;
    while checked < 1000 {
        let n: u64 = rng.random_range(2..2000);
        let c: u64 = rng.random_range(0..=n);
        let z: u64 = rng.random_range(0..=c.max(1).min(n));
        let window = if rng.random::<bool>() {
            CriticalWindow::aldous(rng.random_range(-2.0..2.0))
        } else {
            CriticalWindow::general(rng.random_range(-2.0..2.0), rng.random_range(0.01..0.5)).unwrap()
        };
        if edge_probability(&window, n).is_err() {
            continue;
        }
        let closed = moment_triple(n, z, c, &window).unwrap().kappa;
        let oracle = kappa_oracle(n, z, c, &window).unwrap();
        let scale = oracle.abs().max(1e-300);
        assert!(
            (closed - oracle).abs() <= 1e-9 * scale,
            "n={n} z={z} c={c} {window:?}: {closed} vs {oracle}"
        );
        checked += 1;
    }
}

#[test]
fn sweep_is_deterministic() {
    let family = WindowFamily::Aldous { lambda: 1.0 };
    let a = bound_sweep(&[1000, 8000, 27_000], 1.0, 1.0, family, 16).unwrap();
    let b = bound_sweep(&[1000, 8000, 27_000], 1.0, 1.0, family, 16).unwrap();
    assert_eq!(a, b);
    assert!(a.fit(Quantity::MuDeviation).unwrap().slope < 0.0);
}

proptest! {
    #[test]
    fn ks_symmetric_and_rank_based(
        a in prop::collection::vec(-50.0f64..50.0, 1..60),
        b in prop::collection::vec(-50.0f64..50.0, 1..60),
        shift in -10.0f64..10.0,
        scale in 0.1f64..5.0,
    ) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        let map = |v: &f64| {
            let y = scale * v + shift;
            y * y * y + y
        };
        let ta: Vec<f64> = a.iter().map(map).collect();
        let tb: Vec<f64> = b.iter().map(map).collect();
        prop_assert!((ks_statistic(&ta, &tb).unwrap() - d).abs() < 1e-12);
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn rescale_round_trips(values in prop::collection::vec(0u64..1_000_000, 1..100), n in 1u64..100_000_000, general in any::<bool>()) {
        let window = if general { CriticalWindow::general(0.0, 0.05).unwrap() } else { CriticalWindow::aldous(0.0) };
        for kind in [SeriesKind::Profile, SeriesKind::CumulativeProfile, SeriesKind::Cousin, SeriesKind::CumulativeCousin] {
            let s = Scaling::new(kind, &window, n);
            let vals: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let path = rescale(&vals, kind, &s).unwrap();
            let back: Vec<i64> = path.unscale();
            prop_assert!(back.iter().zip(&values).all(|(&b, &v)| b == v as i64));
            let reference = |t: f64| path.value_at(t);
            prop_assert_eq!(sup_distance(&path, reference, (0.0, f64::INFINITY)), 0.0);
        }
    }

    #[test]
    fn derived_k_stays_in_range(n in 1u64..10_000_000, frac in 0.0f64..1.0, lambda in -3.0f64..3.0, seed in any::<u64>()) {
        let n13 = (n as f64).cbrt();
        let x = (frac * n13 * n13).max(1e-9);
        if let Ok(cfg) = RunConfig::new(n, x, CriticalWindow::aldous(lambda), seed, 1) {
            if let Ok(k) = derive_k(&cfg) {
                prop_assert!(k >= 1 && k <= n);
            }
        }
    }

    #[test]
    fn power_laws_fit_exactly(exponent in -2.0f64..2.0, c in 0.1f64..10.0) {
        let pairs: Vec<(f64, f64)> = [1e3f64, 1e4, 1e5, 1e6].iter().map(|&n| (n, c * n.powf(exponent))).collect();
        let fit = fit_loglog_slope(&pairs).unwrap();
        prop_assert!((fit.slope - exponent).abs() < 1e-10);
    }
}

#[test]
fn aldous_probability_strictly_decreasing() {
    for lambda in [0.0, 0.5, 1.0, 3.0] {
        let w = CriticalWindow::aldous(lambda);
        let mut prev = f64::INFINITY;
        for n in 2..20_000u64 {
            let Ok(p) = edge_probability(&w, n) else { continue };
            assert!(p < prev, "lambda={lambda} n={n}");
            prev = p;
        }
    }
}
