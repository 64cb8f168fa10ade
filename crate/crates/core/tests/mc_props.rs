use gfet_prva::device::linear_grid;
use gfet_prva::mc::{
    check_invariants, draw_samples, integrate_mc, integrate_mc_with, run_experiment, run_with_seeds, sweep,
    tail_mass_outside, write_sweep_csv, SamplerSpec, TargetDensity, SWEEP_HEADER,
};
use proptest::prelude::*;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

#[test]
fn density_integrates_to_one() {
    for (mu, sigma) in [(0.0, 0.25), (0.5, 1.0), (-1.0, 0.1)] {
        let d = TargetDensity::normalized(mu, sigma).unwrap();
        // x = e^t over +-40 sigma around mu
        let g = |t: f64| d.value(t.exp()) * t.exp();
        let total = simpson(&g, mu - 40.0 * sigma, mu + 40.0 * sigma, 1e-13);
        assert!((total - 1.0).abs() < 1e-6, "({mu}, {sigma}): {total}");
    }
}

#[test]
fn uniform_sampler_moments() {
    let x = draw_samples(&SamplerSpec::uniform(0.0, 3.0, 8), 200_000).unwrap();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    assert!((mean - 1.5).abs() < 0.01);
    assert!(x.iter().all(|v| (0.0..=3.0).contains(v)));
}

#[test]
fn lognormal_sampler_log_mean() {
    let x = draw_samples(&SamplerSpec::lognormal(0.0, 0.25, 8), 1_000_000).unwrap();
    let m = x.iter().map(|v| v.ln()).sum::<f64>() / x.len() as f64;
    assert!(m.abs() < 1e-3, "{m}");
}

#[test]
fn ideal_hardware_buffer_matches_target() {
    let x = draw_samples(&SamplerSpec::ideal_hardware(0.0, 0.25, 8), 1_000_000).unwrap();
    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let m = logs.iter().sum::<f64>() / logs.len() as f64;
    let s = (logs.iter().map(|l| (l - m) * (l - m)).sum::<f64>() / logs.len() as f64).sqrt();
    assert!(m.abs() < 1e-3 && (s - 0.25).abs() < 1e-3, "({m}, {s})");
}

#[test]
fn lognormal_error_small_at_one_million() {
    let row = run_experiment(&SamplerSpec::lognormal(0.0, 0.25, 21), &TargetDensity::default(), 1_000_000, 10).unwrap();
    assert!(row.mean_error < 1e-3, "{}", row.mean_error);
}

#[test]
fn uniform_plateau_tracks_tail_mass() {
    let d = TargetDensity::default();
    let tail = tail_mass_outside(&d, 1e-300, 3.0).unwrap();
    let row = run_experiment(&SamplerSpec::uniform(0.0, 3.0, 2), &d, 200_000, 20).unwrap();
    assert!(row.mean_error > 0.5 * tail && row.mean_error < 2.0 * tail, "{} vs tail {tail}", row.mean_error);
}

#[test]
fn grid_matches_composite_trapezoid() {
    let d = TargetDensity::default();
    let grid = linear_grid(0.1, 5.0, 1025);
    let (area, _) = integrate_mc(&grid, &d).unwrap();
    let mut oracle = 0.0;
    for w in grid.windows(2) {
        oracle += (w[1] - w[0]) * (d.value(w[1]) + d.value(w[0])) / 2.0;
    }
    assert_eq!(area.to_bits(), oracle.to_bits());
}

#[test]
fn repeats_are_seed_deterministic() {
    let d = TargetDensity::default();
    let spec = SamplerSpec::lognormal(0.0, 0.25, 4);
    let a = run_experiment(&spec, &d, 5_000, 8).unwrap();
    let b = run_experiment(&spec, &d, 5_000, 8).unwrap();
    assert_eq!(a.mean_error, b.mean_error);
    assert_eq!(a.error_ci90, b.error_ci90);
    let same = run_with_seeds(&spec, &d, 5_000, &[9, 9, 9]).unwrap();
    assert_eq!(same.error_ci90, 0.0);
}

#[test]
fn sweep_csv_has_row_per_point() {
    let specs = [SamplerSpec::uniform(0.0, 3.0, 1), SamplerSpec::lognormal(0.0, 0.25, 1)];
    let rows = sweep(&specs, &TargetDensity::default(), &[100, 1000], 3).unwrap();
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
}

#[test]
fn invariant_checks_pass() {
    let checks = check_invariants(17, 100).unwrap();
    assert_eq!(checks.len(), 5);
    for c in &checks {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn area_is_permutation_invariant(mut xs in prop::collection::vec(0.01f64..10.0, 2..300), seed in any::<u64>()) {
        let d = TargetDensity::default();
        let (a, _) = integrate_mc(&xs, &d).unwrap();
        let k = (seed % xs.len() as u64) as usize;
        xs.rotate_left(k);
        xs.reverse();
        let (b, _) = integrate_mc(&xs, &d).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn duplicates_add_no_area(xs in prop::collection::vec(0.01f64..10.0, 2..300), pick in prop::collection::vec(any::<prop::sample::Index>(), 1..20)) {
        let d = TargetDensity::default();
        let (a, _) = integrate_mc(&xs, &d).unwrap();
        let mut dup = xs.clone();
        dup.extend(pick.iter().map(|i| xs[i.index(xs.len())]));
        let (b, _) = integrate_mc(&dup, &d).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn constant_integrand_gives_span(xs in prop::collection::vec(0.01f64..10.0, 2..300)) {
        let (a, _) = integrate_mc_with(&xs, |_| 1.0).unwrap();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((a - (hi - lo)).abs() <= 1e-12 * hi);
    }
}
