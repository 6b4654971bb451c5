use rrlevy::identities::IdentityContext;
use rrlevy::model::presets::{h2, m1, m1_diffusive};
use rrlevy::model::{ModelSpec, Target};
use rrlevy::scale::ScaleEvaluator;
use rrlevy::simulator::{path_rng, run_coupled_euler, run_ensemble, simulate_path_exact_bv, SimConfig};

fn z_score(mean: f64, stderr: f64, exact: f64) -> f64 {
    (mean - exact) / stderr
}

#[test]
fn exact_scheme_matches_formulas_on_hyperexponential_model() {
    let m = h2();
    let ctx = IdentityContext::new(m.clone()).unwrap();
    let (x, a, q, p) = (0.6, 2.5, 0.4, 0.2);
    let cfg = SimConfig::exact(x, a, q, 200_000, 3).with_p(p).with_band(0.2, 1.6);
    let set = run_ensemble(&m, &cfg).unwrap();
    let pairs = [
        ("exit_lt", ctx.one_sided_exit(q, x, a).unwrap()),
        ("dividends", ctx.dividends_npv(q, x, a).unwrap()),
        ("capital_injection", ctx.capital_injection_npv(q, x, a).unwrap()),
        ("occupation_below_lt", ctx.occupation_below_lt(p, q, x, a).unwrap()),
        ("occupation_above_lt", ctx.occupation_above_lt(p, q, x, a).unwrap()),
        ("band", ctx.resolvent_band(q, x, a, 0.2, 1.6).unwrap()),
    ];
    for (name, exact) in pairs {
        let e = set.get(name);
        let z = z_score(e.mean, e.stderr, exact);
        assert!(z.abs() <= 3.0, "{name}: mc {} ± {} vs {exact} (z = {z})", e.mean, e.stderr);
    }
}

#[test]
fn exact_scheme_with_upper_level_below_refraction() {
    // a < b: the refraction level is never reached
    let m = m1().with_b(3.0);
    let ctx = IdentityContext::new(m.clone()).unwrap();
    let ev = ScaleEvaluator::build(&m, 0.5, Target::X).unwrap();
    let cfg = SimConfig::exact(0.5, 2.0, 0.5, 100_000, 8);
    let set = run_ensemble(&m, &cfg).unwrap();
    let exact = ctx.one_sided_exit(0.5, 0.5, 2.0).unwrap();
    assert!((exact - ev.z(0.5) / ev.z(2.0)).abs() < 1e-12);
    let e = set.get("exit_lt");
    assert!(z_score(e.mean, e.stderr, exact).abs() <= 3.0);
    assert_eq!(set.get("dividends").mean, 0.0);
}

#[test]
fn censoring_vanishes_as_horizon_grows() {
    let m = m1();
    let frac = |cap: f64| {
        let cfg = SimConfig::exact(0.2, 3.0, 0.5, 20_000, 4).with_horizon_cap(cap);
        run_ensemble(&m, &cfg).unwrap().censored_fraction()
    };
    let (short, mid, long) = (frac(1.0), frac(5.0), frac(50.0));
    assert!(short > mid && mid > long, "{short} {mid} {long}");
    assert!(long < 1e-3);
}

#[test]
fn start_at_refraction_level_uses_refracted_slope() {
    let m = ModelSpec::new(0.0, 1.5, Vec::new(), 0.25, 1.0).unwrap();
    let cfg = SimConfig::exact(1.0, 2.0, 0.0, 1, 1);
    let f = simulate_path_exact_bv(&m, &cfg, &mut path_rng(1, 0), None).unwrap();
    assert!((f.t_up - 1.0 / 1.25).abs() < 1e-15);
    assert_eq!(f.occ_below, 0.0);
}

#[test]
fn euler_without_diffusion_approaches_exact_scheme() {
    let m = m1();
    let (x, a, q) = (1.0, 2.0, 0.5);
    let exact = run_ensemble(&m, &SimConfig::exact(x, a, q, 100_000, 21)).unwrap();
    let e = exact.get("exit_lt");
    let steps = [1e-2, 1e-3, 1e-4];
    let euler = run_coupled_euler(&m, &SimConfig::euler(x, a, q, 1e-4, 20_000, 22), &steps).unwrap();
    let gaps: Vec<f64> = euler.levels.iter().map(|l| (l.get("exit_lt").mean - e.mean).abs()).collect();
    let d = &euler.exit_lt_differences;
    assert!(d[1].mean.abs() < d[0].mean.abs(), "corrections {} then {}", d[0].mean, d[1].mean);
    let last = euler.levels[2].get("exit_lt");
    let combined = (last.stderr.powi(2) + e.stderr.powi(2)).sqrt();
    assert!(gaps[2] < 3.0 * combined, "gap {} vs combined stderr {combined}", gaps[2]);
}

#[test]
fn euler_reflected_brownian_motion_upcrossing() {
    // no jumps, no refraction: E e^{-q kappa_a^+} = Z(x)/Z(a)
    let m = ModelSpec::new(1.0, 0.0, Vec::new(), 0.0, 1.0).unwrap();
    let ev = ScaleEvaluator::build(&m, 0.5, Target::X).unwrap();
    let exact = ev.z(0.0) / ev.z(1.0);
    let steps = [1e-2, 1e-3];
    let run = run_coupled_euler(&m, &SimConfig::euler(0.0, 1.0, 0.5, 1e-3, 20_000, 31), &steps).unwrap();
    let err: Vec<f64> = run.levels.iter().map(|l| (l.get("exit_lt").mean - exact).abs()).collect();
    assert!(err[1] < err[0], "{err:?}");
    let last = run.levels[1].get("exit_lt");
    // O(sqrt h) exit bias at h = 1e-3 is about 0.6 sqrt(h) relative
    assert!(err[1] < 0.03 * exact + 3.0 * last.stderr, "{err:?} vs {exact}");
}

#[test]
fn step_halving_bias_is_small_with_jumps_and_refraction() {
    let m = m1_diffusive();
    let steps = [2e-3, 1e-3];
    let run = run_coupled_euler(&m, &SimConfig::euler(1.0, 2.0, 0.5, 1e-3, 10_000, 41), &steps).unwrap();
    for d in &run.exit_lt_differences {
        assert!(d.mean.abs() < 0.01, "step-halving change {}", d.mean);
    }
    let div: Vec<f64> = run.levels.iter().map(|l| l.get("dividends").mean).collect();
    assert!((div[0] - div[1]).abs() < 0.01, "{div:?}");
}

#[test]
fn paired_differences_have_smaller_error_than_levels() {
    let run = run_coupled_euler(&m1_diffusive(), &SimConfig::euler(1.0, 2.0, 0.5, 1e-3, 5_000, 2), &[1e-2, 1e-3]).unwrap();
    let d = &run.exit_lt_differences[0];
    assert!(d.stderr < run.levels[1].get("exit_lt").stderr);
}
