//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. All tolerances are fixed here.

use std::time::{Duration, Instant};

use rrlevy::identities::{IdentityContext, Value};
use rrlevy::model::presets::{all_test_models, m1, m1_diffusive};
use rrlevy::model::Target;
use rrlevy::simulator::{run_coupled_euler, run_ensemble, SimConfig};
use rrlevy::verifier::{
    check_backend_equivalence, check_boundary_facts, check_degeneracy_a_equals_b, check_degeneracy_delta_zero,
    check_euler_convergence, check_laplace_round_trip, check_lemma_pi_identities, check_levy_convolution_identities,
    check_mc_suite, check_resolvent_normalization, default_mc_params, VerificationReport,
};

const TOL_ROUND_TRIP: f64 = 1e-6;
const TOL_BACKEND: f64 = 1e-7;
const TOL_W0: f64 = 1e-8;
const TOL_ASYMPTOTE: f64 = 1e-4;
const TOL_RELATIONS: f64 = 1e-6;
const TOL_LEMMA: f64 = 1e-4;
const TOL_DEGENERACY: f64 = 1e-10;
const Z_MAX: f64 = 3.0;
const MC_STDERR_MAX: f64 = 1e-3;
const TOL_NORMALIZATION: f64 = 1e-6;
const TOL_INFINITE: f64 = 1e-5;

const MC_SEED: u64 = 20240601;
const EULER_SEED: u64 = 99;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Outcome;

/// Reduces reports checked against `tol` to the worst one; every report
/// must also carry its own pass flag.
fn worst(reports: &[VerificationReport], tol: f64, metric: fn(&VerificationReport) -> f64) -> (bool, String) {
    let mut pass = true;
    let mut worst: Option<&VerificationReport> = None;
    for r in reports {
        let e = metric(r);
        pass &= r.pass && e <= tol;
        if worst.is_none_or(|w| !(metric(w) >= e)) {
            worst = Some(r);
        }
    }
    let detail = match worst {
        Some(w) => format!(
            "{} checks, worst {:.2e} (tol {tol:.0e}) at {} {:?}",
            reports.len(),
            metric(w),
            w.check,
            w.inputs
        ),
        None => "no checks".into(),
    };
    (pass && !reports.is_empty(), detail)
}

fn rel(r: &VerificationReport) -> f64 {
    r.rel_err
}

fn abs(r: &VerificationReport) -> f64 {
    r.abs_err
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (mut pass, mut detail) = f();
    let el = t.elapsed();
    if let Some(limit) = limit {
        if el > limit {
            pass = false;
            detail.push_str(&format!("; runtime {el:.1?} exceeds {limit:?}"));
        }
    }
    detail.push_str(&format!(" [{el:.2?}]"));
    Outcome { pass, detail }
}

fn criterion_1_laplace_round_trip() -> Outcome {
    timed(Some(Duration::from_secs(10)), || {
        let mut reports = Vec::new();
        for (_, m) in all_test_models() {
            for q in [0.0, 0.5, 2.0] {
                reports.extend(check_laplace_round_trip(&m, q, &[0.5, 1.0, 2.0]).expect("round trip"));
            }
        }
        worst(&reports, TOL_ROUND_TRIP, rel)
    })
}

fn criterion_2_backend_equivalence() -> Outcome {
    timed(Some(Duration::from_secs(30)), || {
        let mut reports = Vec::new();
        for (_, m) in all_test_models() {
            for q in [0.0, 0.5, 2.0] {
                for target in [Target::X, Target::Y] {
                    reports.push(check_backend_equivalence(&m, q, target, 100).expect("backends"));
                }
            }
        }
        worst(&reports, TOL_BACKEND, rel)
    })
}

fn criterion_3_boundary_and_asymptotics() -> Outcome {
    timed(None, || {
        let (mut w0, mut mono, mut limit) = (Vec::new(), Vec::new(), Vec::new());
        for (_, m) in all_test_models() {
            for q in [0.0, 0.5, 2.0] {
                for r in check_boundary_facts(&m, q, Target::X).expect("boundary facts") {
                    if r.check.starts_with("w_at_zero") {
                        w0.push(r);
                    } else if r.check.starts_with("tilted_w_monotone") {
                        mono.push(r);
                    } else {
                        limit.push(r);
                    }
                }
            }
        }
        let (p0, d0) = worst(&w0, TOL_W0, abs);
        let pm = mono.len() == 9 && mono.iter().all(|r| r.pass);
        let (pl, dl) = worst(&limit, TOL_ASYMPTOTE, abs);
        let failed: Vec<String> = limit
            .iter()
            .filter(|r| !r.pass)
            .map(|r| format!("q={} gap {:.3e}", r.inputs["q"], r.abs_err))
            .collect();
        let mut detail = format!("W(0+): {d0}; monotone {}/{}; limit at x=30: {dl}", mono.iter().filter(|r| r.pass).count(), mono.len());
        if !failed.is_empty() {
            detail.push_str(&format!("; failing: {}", failed.join(", ")));
        }
        (p0 && pm && pl, detail)
    })
}

fn criterion_4_relation_equations() -> Outcome {
    timed(None, || {
        let mut reports = Vec::new();
        for (_, m) in all_test_models() {
            let ctx = IdentityContext::new(m).unwrap();
            for (p, q) in [(0.3, 0.5), (0.5, 0.3), (0.0, 1.0)] {
                for x in [0.5, 1.0, 2.0, 5.0] {
                    reports.extend(check_levy_convolution_identities(&ctx, p, q, x).expect("relations"));
                }
            }
        }
        worst(&reports, TOL_RELATIONS, rel)
    })
}

fn criterion_5_levy_measure_identities() -> Outcome {
    timed(Some(Duration::from_secs(60)), || {
        let ctx = IdentityContext::new(m1()).unwrap();
        let mut reports = Vec::new();
        for v in [0.0, 0.5] {
            for x in [1.5, 2.0, 3.0] {
                reports.extend(check_lemma_pi_identities(&ctx, 0.3, 0.5, v, x).expect("lemma"));
            }
        }
        worst(&reports, TOL_LEMMA, rel)
    })
}

fn criterion_6_degeneracy() -> Outcome {
    timed(None, || {
        let mut reports = Vec::new();
        for (_, m) in all_test_models() {
            reports.extend(check_degeneracy_delta_zero(&m, 0.3, 0.5, 2.0).expect("delta = 0"));
            reports.extend(check_degeneracy_a_equals_b(&m, 0.3, 0.5).expect("a = b"));
        }
        worst(&reports, TOL_DEGENERACY, rel)
    })
}

fn criterion_7_monte_carlo() -> Outcome {
    timed(Some(Duration::from_secs(300)), || {
        let m = m1();
        let ctx = IdentityContext::new(m.clone()).unwrap();
        let params = default_mc_params(&m, 1_000_000, MC_SEED);
        assert_eq!((params.x, params.a, params.q, params.p), (1.0, 2.0, 0.5, 0.3));
        assert_eq!(params.band, [1.2, 1.8]);
        let reports = check_mc_suite(&ctx, &params).expect("mc suite");
        let pass = reports.len() == 6
            && reports
                .iter()
                .all(|r| r.pass && r.z_score.unwrap().abs() <= Z_MAX && r.stderr.unwrap() < MC_STDERR_MAX);
        let detail = reports
            .iter()
            .map(|r| format!("{} z={:+.2} se={:.1e}", r.check.trim_start_matches("mc_"), r.z_score.unwrap(), r.stderr.unwrap()))
            .collect::<Vec<_>>()
            .join(", ");
        (pass, detail)
    })
}

fn criterion_8_resolvent_normalization() -> Outcome {
    timed(None, || {
        let mut reports = Vec::new();
        for (_, m) in all_test_models() {
            let ctx = IdentityContext::new(m).unwrap();
            for (x, a, q) in [(0.5, 2.0, 0.5), (1.0, 2.0, 0.5), (1.5, 2.0, 2.0), (0.3, 3.0, 0.1), (2.0, 4.0, 1.0)] {
                reports.push(check_resolvent_normalization(&ctx, q, x, a).expect("normalization"));
            }
        }
        worst(&reports, TOL_NORMALIZATION, rel)
    })
}

fn criterion_9_euler_convergence() -> Outcome {
    timed(None, || {
        let ctx = IdentityContext::new(m1_diffusive()).unwrap();
        let reports = check_euler_convergence(&ctx, 1.0, 2.0, 0.5, &[1e-2, 1e-3, 1e-4], 100_000, EULER_SEED)
            .expect("euler convergence");
        let pass = reports.iter().all(|r| r.pass);
        let detail = reports
            .iter()
            .map(|r| match r.z_score {
                Some(z) => format!("{} z={z:+.2}", r.check),
                None => format!("{} {:.2e} <= {:.2e}", r.check, r.lhs, r.rhs),
            })
            .collect::<Vec<_>>()
            .join(", ");
        (pass, detail)
    })
}

fn criterion_10_infinite_horizon() -> Outcome {
    timed(None, || {
        let ctx = IdentityContext::new(m1()).unwrap();
        let (q, a) = (0.5, 20.0);
        let finite = |v: Value| v.finite().expect("finite infinite-horizon value");
        let mut reports = Vec::new();
        for x in [0.5, 1.5] {
            for z in [0.5, 1.5, 3.0] {
                reports.push(VerificationReport::relative(
                    "resolvent_density_inf",
                    &[("x", x), ("z", z)],
                    ctx.resolvent_density(q, x, a, z).unwrap(),
                    finite(ctx.resolvent_density_inf(q, x, z).unwrap()),
                    TOL_INFINITE,
                ));
            }
            reports.push(VerificationReport::relative(
                "dividends_npv_inf",
                &[("x", x)],
                ctx.dividends_npv(q, x, a).unwrap(),
                finite(ctx.dividends_npv_inf(q, x).unwrap()),
                TOL_INFINITE,
            ));
            reports.push(VerificationReport::relative(
                "capital_injection_npv_inf",
                &[("x", x)],
                ctx.capital_injection_npv(q, x, a).unwrap(),
                ctx.capital_injection_npv_inf(q, x).unwrap(),
                TOL_INFINITE,
            ));
        }
        worst(&reports, TOL_INFINITE, rel)
    })
}

fn criterion_11_reproducibility() -> Outcome {
    timed(None, || {
        let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        let m = m1();
        let cfg = default_mc_params(&m, 1_000_000, MC_SEED).sim_config();
        let one = pool(1).install(|| run_ensemble(&m, &cfg)).unwrap().to_json();
        let four = pool(4).install(|| run_ensemble(&m, &cfg)).unwrap().to_json();
        let again = run_ensemble(&m, &cfg).unwrap().to_json();
        let exact_same = one == four && one == again;

        let md = m1_diffusive();
        let ecfg = SimConfig::euler(1.0, 2.0, 0.5, 1e-3, 20_000, EULER_SEED);
        let steps = [1e-2, 1e-3];
        let e1 = pool(1).install(|| run_coupled_euler(&md, &ecfg, &steps)).unwrap();
        let e3 = pool(3).install(|| run_coupled_euler(&md, &ecfg, &steps)).unwrap();
        let euler_same = serde_json::to_string(&e1).unwrap() == serde_json::to_string(&e3).unwrap();
        (
            exact_same && euler_same,
            format!("exact 10^6 paths on 1/4/default threads identical: {exact_same}; coupled Euler on 1/3 threads identical: {euler_same}"),
        )
    })
}

fn main() {
    let criteria: [(&str, Criterion); 11] = [
        ("scale-function Laplace round trip", criterion_1_laplace_round_trip),
        ("closed form vs Talbot backend", criterion_2_backend_equivalence),
        ("W(0+) and e^{-Phi x} W(x) asymptotics", criterion_3_boundary_and_asymptotics),
        ("relations between X and Y scale functions", criterion_4_relation_equations),
        ("Levy-measure double integrals (i)-(iii)", criterion_5_levy_measure_identities),
        ("delta = 0 and a = b degeneracy", criterion_6_degeneracy),
        ("Monte Carlo vs formula, exact scheme", criterion_7_monte_carlo),
        ("resolvent normalization", criterion_8_resolvent_normalization),
        ("Euler strong-approximation evidence", criterion_9_euler_convergence),
        ("infinite-horizon consistency", criterion_10_infinite_horizon),
        ("bitwise reproducibility", criterion_11_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {:<44} {}  {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
