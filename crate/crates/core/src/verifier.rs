//! Cross-checks between independent evaluations of the same quantity.
//!
//! Each check produces a [`VerificationReport`] comparing a left side and a
//! right side under a stated metric. Suites bundle checks for a model; see
//! [`Suite`] and [`run_suite`].

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::identities::{reflected, IdentityContext, Value};
use crate::model::{ModelSpec, Target, Variation};
use crate::quadrature::{gl16, gl64};
use crate::scale::{ScaleEvaluator, ScaleFn, ScaleOptions};
use crate::simulator::{run_coupled_euler, run_ensemble, Estimate, SchemeKind, SimConfig};

/// Right sides smaller than this are compared in absolute terms.
pub const ZERO_FLOOR: f64 = 1e-12;
pub const TOL_ANALYTIC: f64 = 1e-6;
pub const TOL_BACKEND: f64 = 1e-7;
pub const TOL_BOUNDARY: f64 = 1e-8;
pub const TOL_ASYMPTOTE: f64 = 1e-4;
pub const TOL_PI: f64 = 1e-4;
pub const TOL_DEGENERACY: f64 = 1e-10;
pub const TOL_INFINITE_HORIZON: f64 = 1e-5;
pub const TOL_DRIFT_SENSITIVITY: f64 = 1e-3;
pub const Z_MAX: f64 = 3.0;
/// Monte Carlo checks with more censored paths than this are inconclusive.
pub const MAX_CENSORED_FRACTION: f64 = 1e-3;

/// How `lhs` and `rhs` are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `|lhs - rhs| / |rhs| <= tol`, absolute when `|rhs| < ZERO_FLOOR`.
    Relative,
    /// `|lhs - rhs| <= tol`.
    Absolute,
    /// `|lhs - rhs| / stderr <= tol`.
    ZScore,
    /// `lhs <= rhs`.
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub inputs: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub metric: Metric,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<u64>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub inconclusive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn input_map(inputs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl VerificationReport {
    pub fn compare(check: &str, inputs: &[(&str, f64)], lhs: f64, rhs: f64, metric: Metric, tol: f64) -> Self {
        let abs_err = (lhs - rhs).abs();
        let rel_err = if rhs.abs() < ZERO_FLOOR { abs_err } else { abs_err / rhs.abs() };
        let pass = match metric {
            Metric::Relative => rel_err <= tol,
            Metric::Absolute => abs_err <= tol,
            Metric::AtMost => lhs <= rhs,
            Metric::ZScore => unreachable!("z-score reports are built by monte_carlo"),
        };
        Self {
            check: check.to_string(),
            inputs: input_map(inputs),
            lhs,
            rhs,
            abs_err,
            rel_err,
            metric,
            tolerance: tol,
            pass,
            z_score: None,
            stderr: None,
            n_paths: None,
            inconclusive: false,
            note: None,
        }
    }

    pub fn relative(check: &str, inputs: &[(&str, f64)], lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::compare(check, inputs, lhs, rhs, Metric::Relative, tol)
    }

    /// Monte Carlo mean `lhs` with standard error `stderr` against `rhs`.
    pub fn z_test(check: &str, inputs: &[(&str, f64)], lhs: f64, stderr: f64, rhs: f64, n: u64) -> Self {
        let abs_err = (lhs - rhs).abs();
        let z = if stderr > 0.0 {
            (lhs - rhs) / stderr
        } else if abs_err == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(lhs - rhs)
        };
        Self {
            check: check.to_string(),
            inputs: input_map(inputs),
            lhs,
            rhs,
            abs_err,
            rel_err: if rhs.abs() < ZERO_FLOOR { abs_err } else { abs_err / rhs.abs() },
            metric: Metric::ZScore,
            tolerance: Z_MAX,
            pass: z.abs() <= Z_MAX,
            z_score: Some(z),
            stderr: Some(stderr),
            n_paths: Some(n),
            inconclusive: false,
            note: None,
        }
    }

    pub fn monte_carlo(check: &str, inputs: &[(&str, f64)], est: &Estimate, rhs: f64, censored_fraction: f64) -> Self {
        let mut r = Self::z_test(check, inputs, est.mean, est.stderr, rhs, est.n);
        if censored_fraction > MAX_CENSORED_FRACTION {
            r.inconclusive = true;
            r.pass = false;
            r.note = Some(format!("censored fraction {censored_fraction:.2e} exceeds {MAX_CENSORED_FRACTION:e}"));
        }
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn status(&self) -> &'static str {
        match (self.pass, self.inconclusive) {
            (true, _) => "PASS",
            (false, true) => "INCONCLUSIVE",
            (false, false) => "FAIL",
        }
    }
}

pub fn all_pass(reports: &[VerificationReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

pub fn reports_json(reports: &[VerificationReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// Fixed-width human-readable table, one line per report plus a totals line.
pub fn summary_table(reports: &[VerificationReport]) -> String {
    let mut out = format!(
        "{:<34} {:<34} {:>22} {:>22} {:>10} {:>9} {}\n",
        "check", "inputs", "lhs", "rhs", "err", "tol", "status"
    );
    for r in reports {
        let inputs = r
            .inputs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",");
        let err = match r.metric {
            Metric::Relative => r.rel_err,
            Metric::ZScore => r.z_score.unwrap_or(f64::NAN),
            _ => r.abs_err,
        };
        let _ = writeln!(
            out,
            "{:<34} {:<34} {:>22.15e} {:>22.15e} {:>10.2e} {:>9.1e} {}",
            r.check,
            inputs,
            r.lhs,
            r.rhs,
            err,
            r.tolerance,
            r.status()
        );
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    let _ = writeln!(out, "{passed}/{} checks passed", reports.len());
    out
}

fn require_bounded_variation(model: &ModelSpec) -> Result<()> {
    if model.classify() == Variation::BoundedVariation {
        Ok(())
    } else {
        Err(domain("Levy-measure identities are checked for bounded variation (sigma = 0) only"))
    }
}

/// `int_0^inf e^{-theta x} W^(q)(x) dx` by quadrature against `1/(psi(theta) - q)`,
/// for `theta = Phi(q) + offset`.
pub fn check_laplace_round_trip(model: &ModelSpec, q: f64, offsets: &[f64]) -> Result<Vec<VerificationReport>> {
    let ev = ScaleEvaluator::build(model, q, Target::X)?;
    let phi = ev.right_inverse();
    offsets
        .iter()
        .map(|&off| {
            let theta = phi + off;
            // the integrand decays like e^{-off x}; stop where that is below 1e-17
            let len = 40.0 / off;
            let panels = (len / 0.25).ceil() as usize;
            let lhs = gl16().integrate_composite(|x| ev.try_eval_tilted(ScaleFn::W, x, theta), 0.0, len, panels)?;
            let rhs = 1.0 / (model.psi(theta)? - q);
            Ok(VerificationReport::relative(
                "laplace_round_trip",
                &[("q", q), ("theta", theta)],
                lhs,
                rhs,
                TOL_ANALYTIC,
            ))
        })
        .collect()
}

/// Closed form against forced Talbot inversion for every scale function on
/// `n` points of `[0.01, 10]`; reports the worst point.
pub fn check_backend_equivalence(model: &ModelSpec, q: f64, target: Target, n: usize) -> Result<VerificationReport> {
    let closed = ScaleEvaluator::build(model, q, target)?;
    let talbot = ScaleEvaluator::build_with(
        model,
        q,
        target,
        ScaleOptions {
            force_inversion: true,
            ..ScaleOptions::default()
        },
    )?;
    let kinds = [ScaleFn::W, ScaleFn::WPrime, ScaleFn::WBar, ScaleFn::Z, ScaleFn::ZBar];
    let mut worst = VerificationReport::relative("backend_equivalence", &[], 0.0, 0.0, TOL_BACKEND);
    for i in 0..n {
        let x = 0.01 + (10.0 - 0.01) * i as f64 / (n - 1).max(1) as f64;
        for kind in kinds {
            let r = VerificationReport::relative(
                "backend_equivalence",
                &[("q", q), ("x", x)],
                closed.try_eval(kind, x)?,
                talbot.try_eval(kind, x)?,
                TOL_BACKEND,
            );
            if !(r.rel_err <= worst.rel_err) {
                worst = r.with_note(format!("{kind:?}"));
            }
        }
    }
    if !closed.is_closed_form() {
        let note = worst.note.take().unwrap_or_default();
        worst.note = Some(format!("{note}; closed form unavailable, both sides use inversion"));
    }
    worst.check = format!("backend_equivalence_{target}");
    Ok(worst)
}

/// `W(0+)`, monotonicity of `e^{-Phi x} W(x)` on `[0, 30]` and its value at
/// `x = 30` against `1/psi'(Phi)`.
pub fn check_boundary_facts(model: &ModelSpec, q: f64, target: Target) -> Result<Vec<VerificationReport>> {
    let ev = ScaleEvaluator::build(model, q, target)?;
    let expected_w0 = match model.classify() {
        Variation::BoundedVariation => 1.0 / model.linear_drift(target),
        Variation::UnboundedVariation => 0.0,
    };
    let mut out = vec![VerificationReport::compare(
        &format!("w_at_zero_{target}"),
        &[("q", q), ("x", 1e-12)],
        ev.try_eval(ScaleFn::W, 1e-12)?,
        expected_w0,
        Metric::Absolute,
        TOL_BOUNDARY,
    )];
    let phi = ev.right_inverse();
    let slope = model.exponent_derivative(target, phi);
    if slope <= 0.0 {
        return Ok(out);
    }
    let mut max_drop: f64 = 0.0;
    let mut prev = ev.try_eval_tilted(ScaleFn::W, 0.0, phi)?;
    for i in 1..=300 {
        let cur = ev.try_eval_tilted(ScaleFn::W, 0.1 * i as f64, phi)?;
        max_drop = max_drop.max(prev - cur);
        prev = cur;
    }
    out.push(
        VerificationReport::compare(
            &format!("tilted_w_monotone_{target}"),
            &[("q", q)],
            max_drop,
            0.0,
            Metric::AtMost,
            0.0,
        )
        .with_note("largest decrease of e^{-Phi x} W(x) over a 0.1 grid on [0, 30]"),
    );
    out.push(VerificationReport::compare(
        &format!("tilted_w_limit_{target}"),
        &[("q", q), ("x", 30.0)],
        prev,
        1.0 / slope,
        Metric::Absolute,
        TOL_ASYMPTOTE,
    ));
    Ok(out)
}

/// Both relations between the scale functions of `X` and `Y` at `x`.
pub fn check_levy_convolution_identities(ctx: &IdentityContext, p: f64, q: f64, x: f64) -> Result<Vec<VerificationReport>> {
    let delta = ctx.model().delta;
    let xs = ctx.scale(Target::X, q)?;
    let ys = ctx.scale(Target::Y, p)?;
    let conv = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let panels = ctx.quadrature().panels(x);
        gl16().integrate_composite(|y| Ok(ys.try_eval(ScaleFn::W, x - y)? * f(y)?), 0.0, x, panels)
    };
    let lhs_w = conv(&|y| Ok(delta * xs.try_eval(ScaleFn::W, y)? - (q - p) * xs.try_eval(ScaleFn::WBar, y)?))?;
    let rhs_w = ys.try_eval(ScaleFn::WBar, x)? - xs.try_eval(ScaleFn::WBar, x)?;
    let lhs_z = conv(&|y| Ok(delta * xs.try_eval(ScaleFn::Z, y)? - (q - p) * xs.try_eval(ScaleFn::ZBar, y)?))?;
    let rhs_z = ys.try_eval(ScaleFn::ZBar, x)? - xs.try_eval(ScaleFn::ZBar, x)? + delta * ys.try_eval(ScaleFn::WBar, x)?;
    let inputs = [("p", p), ("q", q), ("x", x)];
    Ok(vec![
        VerificationReport::relative("relation_w_wbar", &inputs, lhs_w, rhs_w, TOL_ANALYTIC),
        VerificationReport::relative("relation_z_zbar", &inputs, lhs_z, rhs_z, TOL_ANALYTIC),
    ])
}

/// `int_{-inf}^{upper} f(s) e^{mu s} ds` with the values of `f` below zero.
fn tilted_integral_from_minus_infinity(ev: &ScaleEvaluator, kind: ScaleFn, mu: f64, upper: f64) -> Result<f64> {
    let below = match kind {
        ScaleFn::W | ScaleFn::WPrime | ScaleFn::WBar => 0.0,
        ScaleFn::Z => 1.0 / mu,
        ScaleFn::ZBar => -1.0 / (mu * mu),
    };
    Ok(below + ev.exp_integral(kind, mu, 0.0, upper)?)
}

/// `sum_k lambda_k mu_k G_k int_lo^hi e^{-mu_k (y + shift)} kernel(y) dy` where
/// `G_k = int_{-inf}^{shift} f(s) e^{mu_k s} ds`: the double integral against
/// the Levy measure after the inner integral is done analytically.
fn levy_double_integral<K>(
    model: &ModelSpec,
    f: &ScaleEvaluator,
    kind: ScaleFn,
    shift: f64,
    cuts: &[f64],
    kernel: K,
) -> Result<f64>
where
    K: Fn(f64) -> f64,
{
    let mut total = 0.0;
    for j in &model.jumps {
        let mu = j.exp_rate;
        let g = tilted_integral_from_minus_infinity(f, kind, mu, shift)?;
        let outer: f64 = cuts
            .windows(2)
            .map(|w| gl64().integrate(|y| (-mu * (y + shift)).exp() * kernel(y), w[0], w[1]))
            .sum();
        total += j.rate * mu * g * outer;
    }
    Ok(total)
}

/// Left side of the three Levy-measure identities: the double integral of
/// `f(y + u + b - v) WW^(p)(x - b - y) Pi(du) dy` for `f` in `W, Z, Zbar`.
pub fn lemma_pi_lhs(ctx: &IdentityContext, kind: ScaleFn, p: f64, q: f64, v: f64, x: f64) -> Result<f64> {
    let model = ctx.model();
    require_bounded_variation(model)?;
    let b = model.b;
    check_lemma_domain(v, b, x)?;
    if x == b {
        return Ok(0.0);
    }
    let fx = ctx.scale(Target::X, q)?;
    let ys = ctx.scale(Target::Y, p)?;
    levy_double_integral(model, &fx, kind, b - v, &[0.0, x - b], |y| ys.w(x - b - y))
}

/// Right side of the three Levy-measure identities, in scale functions only.
pub fn lemma_pi_rhs(ctx: &IdentityContext, kind: ScaleFn, p: f64, q: f64, v: f64, x: f64) -> Result<f64> {
    let model = ctx.model();
    require_bounded_variation(model)?;
    let (b, delta, c) = (model.b, model.delta, model.drift);
    check_lemma_domain(v, b, x)?;
    let fx = ctx.scale(Target::X, q)?;
    let ys = ctx.scale(Target::Y, p)?;
    let lead = |k: ScaleFn| -> Result<f64> {
        Ok((c - delta) * fx.try_eval(k, b - v)? * ys.try_eval(ScaleFn::W, x - b)? - fx.try_eval(k, x - v)?)
    };
    let conv = |k: ScaleFn| ctx.convolve(p, |y| fx.try_eval(k, y - v), x);
    match kind {
        ScaleFn::W => Ok(lead(ScaleFn::W)? - delta * conv(ScaleFn::WPrime)? + (q - p) * conv(ScaleFn::W)?),
        ScaleFn::Z => Ok(lead(ScaleFn::Z)? - (p - q) * ys.try_eval(ScaleFn::WBar, x - b)?
            + q * ((q - p) * conv(ScaleFn::WBar)? - delta * conv(ScaleFn::W)?)),
        ScaleFn::ZBar => Ok(lead(ScaleFn::ZBar)? - delta * conv(ScaleFn::Z)? + (q - p) * conv(ScaleFn::ZBar)?
            + model.net_drift().0 * ys.try_eval(ScaleFn::WBar, x - b)?),
        other => Err(domain(format!("no Levy-measure identity for {other:?}"))),
    }
}

fn check_lemma_domain(v: f64, b: f64, x: f64) -> Result<()> {
    if v <= b && b <= x {
        Ok(())
    } else {
        Err(domain(format!("need v <= b <= x, got v = {v}, b = {b}, x = {x}")))
    }
}

pub fn check_lemma_pi_identities(ctx: &IdentityContext, p: f64, q: f64, v: f64, x: f64) -> Result<Vec<VerificationReport>> {
    [("lemma_pi_w", ScaleFn::W), ("lemma_pi_z", ScaleFn::Z), ("lemma_pi_zbar", ScaleFn::ZBar)]
        .into_iter()
        .map(|(name, kind)| {
            Ok(VerificationReport::relative(
                name,
                &[("p", p), ("q", q), ("v", v), ("x", x)],
                lemma_pi_lhs(ctx, kind, p, q, v, x)?,
                lemma_pi_rhs(ctx, kind, p, q, v, x)?,
                TOL_PI,
            ))
        })
        .collect()
}

/// Central differences in the drift `c` of both sides of the `Zbar` identity,
/// the one carrying an explicit `psi'(0+)` term.
pub fn check_lemma_drift_sensitivity(ctx: &IdentityContext, p: f64, q: f64, v: f64, x: f64, eps: f64) -> Result<VerificationReport> {
    let model = ctx.model();
    let side = |drift: f64, lhs: bool| -> Result<f64> {
        let shifted = IdentityContext::new(model.with_drift(drift))?.with_quadrature(ctx.quadrature());
        if lhs {
            lemma_pi_lhs(&shifted, ScaleFn::ZBar, p, q, v, x)
        } else {
            lemma_pi_rhs(&shifted, ScaleFn::ZBar, p, q, v, x)
        }
    };
    let c = model.drift;
    let d_lhs = (side(c + eps, true)? - side(c - eps, true)?) / (2.0 * eps);
    let d_rhs = (side(c + eps, false)? - side(c - eps, false)?) / (2.0 * eps);
    Ok(VerificationReport::relative(
        "lemma_pi_zbar_drift_sensitivity",
        &[("p", p), ("q", q), ("v", v), ("x", x), ("eps", eps)],
        d_lhs,
        d_rhs,
        TOL_DRIFT_SENSITIVITY,
    ))
}

/// `E_x[e^{-p tau_b^-} Z^(p+q)(Y_{tau_b^-}); tau_b^- < tau_a^+]` by the Levy
/// measure double integral against `R(x) - R(a) WW(x - b)/WW(a - b)`.
pub fn check_renaud_expectation(ctx: &IdentityContext, p: f64, q: f64, x: f64, a: f64) -> Result<VerificationReport> {
    let model = ctx.model();
    require_bounded_variation(model)?;
    let b = model.b;
    if !(b <= x && x <= a && a > b) {
        return Err(domain(format!("need b <= x <= a and a > b, got x = {x}, a = {a}, b = {b}")));
    }
    let zs = ctx.scale(Target::X, p + q)?;
    let ys = ctx.scale(Target::Y, p)?;
    let ratio = ys.w(x - b) / ys.w(a - b);
    let mut cuts = vec![0.0, a - b];
    if x > b && x < a {
        cuts.insert(1, x - b);
    }
    let lhs = levy_double_integral(model, &zs, ScaleFn::Z, b, &cuts, |y| {
        ratio * ys.w(a - b - y) - ys.w(x - b - y)
    })?;
    let rhs = ctx.mathcal_r(p, q, x)? - ctx.mathcal_r(p, q, a)? * ratio;
    Ok(VerificationReport::relative(
        "renaud_expectation",
        &[("p", p), ("q", q), ("x", x), ("a", a)],
        lhs,
        rhs,
        TOL_PI,
    ))
}

/// `q int_0^a density + r(x)/r(a) = 1`.
pub fn check_resolvent_normalization(ctx: &IdentityContext, q: f64, x: f64, a: f64) -> Result<VerificationReport> {
    let mass = ctx.resolvent_band(q, x, a, 0.0, a)?;
    let lhs = q * mass + ctx.r(q, x)? / ctx.r(q, a)?;
    Ok(VerificationReport::relative(
        "resolvent_normalization",
        &[("q", q), ("x", x), ("a", a)],
        lhs,
        1.0,
        TOL_ANALYTIC,
    ))
}

/// Infinite-horizon formulas against the finite-level ones at a distant `a`.
pub fn check_infinite_horizon(ctx: &IdentityContext, q: f64, x: f64, zs: &[f64], a_far: f64) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for &z in zs {
        let inf = match ctx.resolvent_density_inf(q, x, z)? {
            Value::Finite(v) => v,
            Value::Infinite { reason } => return Err(domain(format!("infinite density: {reason}"))),
        };
        out.push(VerificationReport::relative(
            "resolvent_density_inf",
            &[("q", q), ("x", x), ("z", z), ("a", a_far)],
            ctx.resolvent_density(q, x, a_far, z)?,
            inf,
            TOL_INFINITE_HORIZON,
        ));
    }
    let div_inf = match ctx.dividends_npv_inf(q, x)? {
        Value::Finite(v) => v,
        Value::Infinite { reason } => return Err(domain(format!("infinite dividends: {reason}"))),
    };
    out.push(VerificationReport::relative(
        "dividends_npv_inf",
        &[("q", q), ("x", x), ("a", a_far)],
        ctx.dividends_npv(q, x, a_far)?,
        div_inf,
        TOL_INFINITE_HORIZON,
    ));
    out.push(VerificationReport::relative(
        "capital_injection_npv_inf",
        &[("q", q), ("x", x), ("a", a_far)],
        ctx.capital_injection_npv(q, x, a_far)?,
        ctx.capital_injection_npv_inf(q, x)?,
        TOL_INFINITE_HORIZON,
    ));
    Ok(out)
}

/// With `q = 0` the occupation transform above `b` is the exit transform at rate `p`.
pub fn check_occupation_reduces_to_exit(ctx: &IdentityContext, p: f64, x: f64, a: f64) -> Result<Vec<VerificationReport>> {
    let exit = ctx.one_sided_exit(p, x, a)?;
    let inputs = [("p", p), ("x", x), ("a", a)];
    Ok(vec![
        VerificationReport::relative("occupation_above_q0_is_exit", &inputs, ctx.occupation_above_lt(p, 0.0, x, a)?, exit, TOL_ANALYTIC),
        VerificationReport::relative("occupation_below_q0_is_exit", &inputs, ctx.occupation_below_lt(p, 0.0, x, a)?, exit, TOL_ANALYTIC),
    ])
}

/// With `delta = 0` the refracted-reflected formulas must coincide with the
/// reflected-process ones.
pub fn check_degeneracy_delta_zero(model: &ModelSpec, p: f64, q: f64, a: f64) -> Result<Vec<VerificationReport>> {
    let flat = model.with_delta(0.0);
    let ctx = IdentityContext::new(flat.clone())?;
    let ev = ScaleEvaluator::build(&flat, q, Target::X)?;
    let mut out = Vec::new();
    for x in [0.25 * a, 0.75 * a] {
        let inputs = [("p", p), ("q", q), ("x", x), ("a", a)];
        for z in [0.3 * a, 0.6 * a] {
            out.push(VerificationReport::relative(
                "degeneracy_delta0_resolvent_density",
                &[("q", q), ("x", x), ("a", a), ("z", z)],
                ctx.resolvent_density(q, x, a, z)?,
                reflected::resolvent_density(&ev, x, a, z),
                TOL_DEGENERACY,
            ));
        }
        out.push(VerificationReport::relative(
            "degeneracy_delta0_one_sided_exit",
            &inputs,
            ctx.one_sided_exit(q, x, a)?,
            reflected::upcrossing_lt(&ev, x, a),
            TOL_DEGENERACY,
        ));
        out.push(VerificationReport::relative(
            "degeneracy_delta0_capital_injection",
            &inputs,
            ctx.capital_injection_npv(q, x, a)?,
            reflected::capital_injection_npv(&ev, x, a),
            TOL_DEGENERACY,
        ));
        out.push(VerificationReport::relative(
            "degeneracy_delta0_occupation_below",
            &inputs,
            ctx.occupation_below_lt(p, q, x, a)?,
            reflected::occupation_below_lt(&ctx, p, q, x, a)?,
            TOL_DEGENERACY,
        ));
        out.push(VerificationReport::relative(
            "degeneracy_delta0_occupation_above",
            &inputs,
            ctx.occupation_above_lt(p, q, x, a)?,
            reflected::occupation_above_lt(&ctx, p, q, x, a)?,
            TOL_DEGENERACY,
        ));
    }
    Ok(out)
}

/// With `a = b` the process is never refracted before `T_a^+`, so the
/// formulas must coincide with the reflected ones at level `b`.
pub fn check_degeneracy_a_equals_b(model: &ModelSpec, p: f64, q: f64) -> Result<Vec<VerificationReport>> {
    let ctx = IdentityContext::new(model.clone())?;
    let b = model.b;
    let ev = ScaleEvaluator::build(model, q, Target::X)?;
    let ev_p = ScaleEvaluator::build(model, p, Target::X)?;
    let ev_pq = ScaleEvaluator::build(model, p + q, Target::X)?;
    let mut out = Vec::new();
    for x in [0.25 * b, 0.75 * b] {
        let inputs = [("p", p), ("q", q), ("x", x), ("a", b)];
        for z in [0.3 * b, 0.6 * b] {
            out.push(VerificationReport::relative(
                "degeneracy_a_eq_b_resolvent_density",
                &[("q", q), ("x", x), ("a", b), ("z", z)],
                ctx.resolvent_density(q, x, b, z)?,
                reflected::resolvent_density(&ev, x, b, z),
                TOL_DEGENERACY,
            ));
        }
        out.push(VerificationReport::relative(
            "degeneracy_a_eq_b_one_sided_exit",
            &inputs,
            ctx.one_sided_exit(q, x, b)?,
            reflected::upcrossing_lt(&ev, x, b),
            TOL_DEGENERACY,
        ));
        out.push(VerificationReport::relative(
            "degeneracy_a_eq_b_capital_injection",
            &inputs,
            ctx.capital_injection_npv(q, x, b)?,
            reflected::capital_injection_npv(&ev, x, b),
            TOL_DEGENERACY,
        ));
        // below b the whole time: rate p + q; above b never: rate p
        out.push(VerificationReport::relative(
            "degeneracy_a_eq_b_occupation_below",
            &inputs,
            ctx.occupation_below_lt(p, q, x, b)?,
            reflected::upcrossing_lt(&ev_pq, x, b),
            TOL_DEGENERACY,
        ));
        out.push(VerificationReport::relative(
            "degeneracy_a_eq_b_occupation_above",
            &inputs,
            ctx.occupation_above_lt(p, q, x, b)?,
            reflected::upcrossing_lt(&ev_p, x, b),
            TOL_DEGENERACY,
        ));
    }
    Ok(out)
}

/// Monte Carlo run description for [`check_mc_suite`].
#[derive(Clone, Debug, PartialEq)]
pub struct McParams {
    pub x: f64,
    pub a: f64,
    pub p: f64,
    pub q: f64,
    pub band: [f64; 2],
    pub n_paths: u64,
    pub seed: u64,
    pub scheme: SchemeKind,
    pub step: Option<f64>,
}

impl McParams {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            scheme: self.scheme,
            step: self.step,
            ..SimConfig::exact(self.x, self.a, self.q, self.n_paths, self.seed)
                .with_p(self.p)
                .with_band(self.band[0], self.band[1])
        }
    }
}

/// One ensemble, six functionals, each against its formula.
pub fn check_mc_suite(ctx: &IdentityContext, params: &McParams) -> Result<Vec<VerificationReport>> {
    let McParams { x, a, p, q, band, .. } = *params;
    let set = run_ensemble(ctx.model(), &params.sim_config())?;
    let cf = set.censored_fraction();
    let n = params.n_paths as f64;
    let formulas = [
        ("one_sided_exit", "exit_lt", ctx.one_sided_exit(q, x, a)?),
        ("dividends_npv", "dividends", ctx.dividends_npv(q, x, a)?),
        ("capital_injection_npv", "capital_injection", ctx.capital_injection_npv(q, x, a)?),
        ("occupation_below_lt", "occupation_below_lt", ctx.occupation_below_lt(p, q, x, a)?),
        ("occupation_above_lt", "occupation_above_lt", ctx.occupation_above_lt(p, q, x, a)?),
        ("resolvent_band", "band", ctx.resolvent_band(q, x, a, band[0], band[1])?),
    ];
    Ok(formulas
        .into_iter()
        .map(|(check, functional, formula)| {
            let inputs = [("x", x), ("a", a), ("p", p), ("q", q), ("n_paths", n)];
            let r = VerificationReport::monte_carlo(&format!("mc_{check}"), &inputs, set.get(functional), formula, cf);
            if check == "resolvent_band" {
                r.with_note(format!("band [{}, {}]", band[0], band[1]))
            } else {
                r
            }
        })
        .collect())
}

/// Euler estimates of `E e^{-q T_a^+}` on shared paths for decreasing steps:
/// successive corrections shrink, the last two levels agree within `Z_MAX`
/// combined standard errors and the finest level matches `r(x)/r(a)`.
pub fn check_euler_convergence(
    ctx: &IdentityContext,
    x: f64,
    a: f64,
    q: f64,
    steps: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    if steps.len() < 3 {
        return Err(domain("Euler convergence needs at least three step sizes"));
    }
    let cfg = SimConfig::euler(x, a, q, steps[steps.len() - 1], n_paths, seed);
    let run = run_coupled_euler(ctx.model(), &cfg, steps)?;
    let est: Vec<&Estimate> = run.levels.iter().map(|l| l.get("exit_lt")).collect();
    let formula = ctx.one_sided_exit(q, x, a)?;
    let mut out = Vec::new();
    for i in 1..est.len() - 1 {
        let coarse = est[i].mean - est[i - 1].mean;
        let fine = est[i + 1].mean - est[i].mean;
        let mut r = VerificationReport::compare(
            "euler_corrections_shrink",
            &[("h_coarse", steps[i - 1]), ("h_mid", steps[i]), ("h_fine", steps[i + 1])],
            fine.abs(),
            coarse.abs(),
            Metric::AtMost,
            0.0,
        );
        r.pass &= coarse * fine >= 0.0;
        out.push(r.with_note("lhs = |later correction|, rhs = |earlier correction|, same sign required"));
    }
    let (prev, last) = (est[est.len() - 2], est[est.len() - 1]);
    let combined = (prev.stderr.powi(2) + last.stderr.powi(2)).sqrt();
    out.push(VerificationReport::z_test(
        "euler_final_levels_agree",
        &[("h_prev", steps[steps.len() - 2]), ("h_last", steps[steps.len() - 1]), ("q", q)],
        last.mean,
        combined,
        prev.mean,
        n_paths,
    ));
    out.push(VerificationReport::z_test(
        "euler_vs_formula",
        &[("h", steps[steps.len() - 1]), ("x", x), ("a", a), ("q", q)],
        last.mean,
        last.stderr,
        formula,
        n_paths,
    ));
    Ok(out)
}

/// Named bundles of checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Analytic,
    LemmaPi,
    Degeneracy,
    McSmall,
    McFull,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Analytic, Suite::LemmaPi, Suite::Degeneracy, Suite::McSmall, Suite::McFull];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Analytic => "analytic",
            Suite::LemmaPi => "lemma_pi",
            Suite::Degeneracy => "degeneracy",
            Suite::McSmall => "mc_small",
            Suite::McFull => "mc_full",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown suite `{s}`; valid suites: {}", names.join(", ")))
        })
    }
}

/// Default Monte Carlo parameters for `model`: start at `b`, exit at `b + 1`.
/// Bounded variation uses the exact scheme, otherwise Euler with `h = 1e-4`.
pub fn default_mc_params(model: &ModelSpec, n_paths: u64, seed: u64) -> McParams {
    let b = model.b;
    let (scheme, step) = match model.classify() {
        Variation::BoundedVariation => (SchemeKind::ExactBv, None),
        Variation::UnboundedVariation => (SchemeKind::Euler, Some(1e-4)),
    };
    McParams {
        x: b,
        a: b + 1.0,
        p: 0.3,
        q: 0.5,
        band: [b + 0.2, b + 0.8],
        n_paths,
        seed,
        scheme,
        step,
    }
}

pub fn run_suite(model: &ModelSpec, suite: Suite, seed: u64) -> Result<Vec<VerificationReport>> {
    let ctx = IdentityContext::new(model.clone())?;
    let b = model.b;
    let mut out = Vec::new();
    match suite {
        Suite::Analytic => {
            for q in [0.0, 0.5, 2.0] {
                out.extend(check_laplace_round_trip(model, q, &[0.5, 1.0, 2.0])?);
                for target in [Target::X, Target::Y] {
                    out.push(check_backend_equivalence(model, q, target, 100)?);
                }
                out.extend(check_boundary_facts(model, q, Target::X)?);
            }
            for (p, q) in [(0.3, 0.5), (0.5, 0.3), (0.0, 1.0)] {
                for x in [0.5, 1.0, 2.0, 5.0] {
                    out.extend(check_levy_convolution_identities(&ctx, p, q, x)?);
                }
            }
            for (x, a, q) in [(0.5, 2.0, 0.5), (1.0, 2.0, 0.5), (1.5, 2.0, 2.0), (0.3, 3.0, 0.1), (2.0, 4.0, 1.0)] {
                out.push(check_resolvent_normalization(&ctx, q, x * b, a * b)?);
            }
            // finite-level values approach the limit roughly like e^{-varphi a}
            let a_far = (b + 30.0 / model.varphi(0.5)?).max(20.0);
            out.extend(check_infinite_horizon(&ctx, 0.5, b + 0.5, &[0.5 * b, b + 0.25, b + 1.0], a_far)?);
            out.extend(check_occupation_reduces_to_exit(&ctx, 0.3, b, b + 1.0)?);
        }
        Suite::LemmaPi => {
            require_bounded_variation(model)?;
            let (p, q) = (0.3, 0.5);
            for v in [0.0, 0.5 * b] {
                for x in [b, b + 0.5, b + 1.0, b + 2.0] {
                    out.extend(check_lemma_pi_identities(&ctx, p, q, v, x)?);
                }
            }
            out.push(check_lemma_drift_sensitivity(&ctx, p, q, 0.0, b + 1.0, 1e-4)?);
            out.push(check_renaud_expectation(&ctx, 0.4, 0.2, b + 0.5, b + 1.0)?);
            out.push(check_renaud_expectation(&ctx, 0.4, 0.0, b + 0.5, b + 1.0)?);
            out.push(check_renaud_expectation(&ctx, 0.4, 0.2, b + 1.0, b + 1.0)?);
            let rx = ctx.r(0.4, b + 0.5)?;
            out.push(VerificationReport::relative(
                "mathcal_r_q0_is_r",
                &[("p", 0.4), ("x", b + 0.5)],
                ctx.mathcal_r(0.4, 0.0, b + 0.5)?,
                rx,
                TOL_DEGENERACY,
            ));
        }
        Suite::Degeneracy => {
            out.extend(check_degeneracy_delta_zero(model, 0.3, 0.5, b + 1.0)?);
            out.extend(check_degeneracy_a_equals_b(model, 0.3, 0.5)?);
        }
        Suite::McSmall => out.extend(check_mc_suite(&ctx, &default_mc_params(model, 100_000, seed))?),
        Suite::McFull => out.extend(check_mc_suite(&ctx, &default_mc_params(model, 1_000_000, seed))?),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::*;

    #[test]
    fn relation_equations_hold() {
        let ctx = IdentityContext::new(m1()).unwrap();
        for r in check_levy_convolution_identities(&ctx, 0.3, 0.5, 2.0).unwrap() {
            assert!(r.pass, "{r:?}");
        }
        for r in check_levy_convolution_identities(&ctx, 0.3, 0.5, 0.0).unwrap() {
            assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        }
        // p = q and delta = 0: WW = W, both sides vanish
        let flat = IdentityContext::new(m1().with_delta(0.0)).unwrap();
        for r in check_levy_convolution_identities(&flat, 0.5, 0.5, 1.5).unwrap() {
            assert!(r.lhs.abs() < 1e-14 && r.rhs.abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn lemma_sides_agree() {
        let ctx = IdentityContext::new(m1()).unwrap();
        for r in check_lemma_pi_identities(&ctx, 0.3, 0.5, 0.0, 2.0).unwrap() {
            assert!(r.pass, "{r:?}");
        }
        // x = b: both sides vanish
        for r in check_lemma_pi_identities(&ctx, 0.3, 0.5, 0.5, 1.0).unwrap() {
            assert!(r.lhs == 0.0 && r.rhs.abs() < 1e-14, "{r:?}");
        }
        assert!(check_lemma_pi_identities(&IdentityContext::new(m1_diffusive()).unwrap(), 0.3, 0.5, 0.0, 2.0).is_err());
        assert!(check_lemma_pi_identities(&ctx, 0.3, 0.5, 1.5, 2.0).is_err());
    }

    #[test]
    fn renaud_expectation_matches() {
        let ctx = IdentityContext::new(m1()).unwrap();
        let r = check_renaud_expectation(&ctx, 0.4, 0.2, 1.5, 2.0).unwrap();
        assert!(r.pass, "{r:?}");
        let edge = check_renaud_expectation(&ctx, 0.4, 0.2, 2.0, 2.0).unwrap();
        assert!(edge.lhs.abs() < 1e-14 && edge.rhs.abs() < 1e-12, "{edge:?}");
    }

    #[test]
    fn report_metrics() {
        let r = VerificationReport::relative("t", &[], 1.0 + 1e-7, 1.0, 1e-6);
        assert!(r.pass);
        let r = VerificationReport::relative("t", &[], 1e-13, 0.0, 1e-12);
        assert!(r.pass && r.rel_err == 1e-13);
        let r = VerificationReport::relative("t", &[], f64::NAN, 1.0, 1e-6);
        assert!(!r.pass);
        let z = VerificationReport::z_test("t", &[], 1.0, 0.1, 1.25, 10);
        assert!((z.z_score.unwrap() + 2.5).abs() < 1e-12 && z.pass);
        let z = VerificationReport::z_test("t", &[], 1.0, 0.0, 1.0, 10);
        assert!(z.pass && z.z_score == Some(0.0));
        let est = Estimate {
            mean: 1.0,
            std_dev: 1.0,
            stderr: 0.1,
            n: 100,
            censored: 1,
        };
        let m = VerificationReport::monte_carlo("t", &[], &est, 1.0, 0.01);
        assert!(m.inconclusive && !m.pass);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        let err = "bogus".parse::<Suite>().unwrap_err().to_string();
        assert!(err.contains("mc_small"));
    }

    #[test]
    fn degeneracy_suite_passes() {
        let reports = run_suite(&m1(), Suite::Degeneracy, 0).unwrap();
        assert!(all_pass(&reports), "{}", summary_table(&reports));
        assert!(summary_table(&reports).contains("checks passed"));
    }
}
