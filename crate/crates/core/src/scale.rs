//! Scale functions `W^(q)`, `Z^(q)` and their companions for `X` or `Y`.
//!
//! For the hyperexponential family `1 / (psi(theta) - q)` is rational, so
//! `W^(q)(x) = sum_k C_k e^{rho_k x}` where `rho_k` runs over the (real,
//! simple) roots of `psi(theta) = q` and `C_k = 1 / psi'(rho_k)`. When the
//! roots are not cleanly separated the evaluator falls back to fixed-Talbot
//! inversion of the Laplace transforms.

use std::sync::Arc;

use serde::Serialize;

use crate::dd::{CDD, DD};
use crate::error::{domain, numeric, Error, Result};
use crate::model::{ModelSpec, Target, Variation};
use crate::quadrature::gl16;
use crate::roots::{brent, DEFAULT_MAX_ITER};
use crate::talbot::{FixedTalbot, DEFAULT_NODES};

/// Roots closer than this are treated as repeated.
pub const ROOT_SEPARATION: f64 = 1e-9;
/// Partial-fraction coefficients above this magnitude are considered unstable.
pub const MAX_COEFFICIENT: f64 = 1e8;

/// The functions an evaluator can produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ScaleFn {
    W,
    WPrime,
    WBar,
    Z,
    ZBar,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FallbackReason {
    /// Two roots of `psi(theta) = q` closer than [`ROOT_SEPARATION`].
    RepeatedRoot { gap: f64 },
    /// The interlacing root search did not find the expected number of roots.
    RootCount { found: usize, expected: usize },
    /// Partial fractions exist but their coefficients blow up.
    IllConditioned { max_coefficient: f64 },
    /// Requested through [`ScaleOptions::force_inversion`].
    Forced,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Backend {
    ClosedForm { roots: Vec<f64>, coefficients: Vec<f64> },
    NumericInversion { nodes: usize, reason: FallbackReason },
}

impl Backend {
    pub fn label(&self) -> &'static str {
        match self {
            Backend::ClosedForm { .. } => "closed-form",
            Backend::NumericInversion { .. } => "talbot",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleOptions {
    pub talbot_nodes: usize,
    pub force_inversion: bool,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        Self {
            talbot_nodes: DEFAULT_NODES,
            force_inversion: false,
        }
    }
}

/// Grid of `(x, W(x))` for the inversion backend. Evaluation always goes
/// through the contour sum; the grid serves the monotonicity check and dumps.
#[derive(Clone, Debug)]
struct Cache {
    step: f64,
    w: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ScaleEvaluator {
    model: ModelSpec,
    q: f64,
    target: Target,
    backend: Backend,
    right_inverse: f64,
    w0: f64,
    talbot: Option<Arc<FixedTalbot>>,
    cache: Option<Cache>,
}

impl ScaleEvaluator {
    pub fn build(model: &ModelSpec, q: f64, target: Target) -> Result<Self> {
        Self::build_with(model, q, target, ScaleOptions::default())
    }

    pub fn build_with(model: &ModelSpec, q: f64, target: Target, opts: ScaleOptions) -> Result<Self> {
        model.validate()?;
        if !(q.is_finite() && q >= 0.0) {
            return Err(domain(format!("q must be finite and >= 0, got {q}")));
        }
        let right_inverse = model.right_inverse(target, q)?;
        let w0 = match model.classify() {
            Variation::BoundedVariation => 1.0 / model.linear_drift(target),
            Variation::UnboundedVariation => 0.0,
        };
        let closed = if opts.force_inversion {
            Err(FallbackReason::Forced)
        } else {
            closed_form(model, q, target, right_inverse)
        };
        let (backend, talbot) = match closed {
            Ok((roots, coefficients)) => (Backend::ClosedForm { roots, coefficients }, None),
            Err(reason) => (
                Backend::NumericInversion {
                    nodes: opts.talbot_nodes,
                    reason,
                },
                Some(Arc::new(FixedTalbot::new(opts.talbot_nodes))),
            ),
        };
        Ok(Self {
            model: model.clone(),
            q,
            target,
            backend,
            right_inverse,
            w0,
            talbot,
            cache: None,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.backend, Backend::ClosedForm { .. })
    }

    /// `Phi(q)` for `X`, `varphi(q)` for `Y`.
    pub fn right_inverse(&self) -> f64 {
        self.right_inverse
    }

    /// `W(0+)`: `1/c` (or `1/(c - delta)`) for bounded variation, else 0.
    pub fn w_at_zero(&self) -> f64 {
        self.w0
    }

    /// `W'(0+)`, finite in both variation regimes for this family.
    pub fn w_prime_at_zero(&self) -> f64 {
        let s2 = self.model.sigma * self.model.sigma;
        if s2 > 0.0 {
            2.0 / s2
        } else {
            let c = self.model.linear_drift(self.target);
            (self.model.total_jump_rate() + self.q) / (c * c)
        }
    }

    /// `1 / psi'(Phi(q))`, the limit of `e^{-Phi(q) x} W(x)`. Infinite when
    /// `q = 0` and the mean drift vanishes.
    pub fn asymptotic_constant(&self) -> f64 {
        1.0 / self.model.exponent_derivative(self.target, self.right_inverse)
    }

    /// `1 / (psi(theta) - q)` for real `theta` beyond the right inverse.
    pub fn transform(&self, theta: f64) -> f64 {
        1.0 / (self.model.exponent(self.target, theta) - self.q)
    }

    pub fn w(&self, x: f64) -> f64 {
        self.eval(ScaleFn::W, x)
    }

    /// Right derivative of `W`.
    pub fn w_prime(&self, x: f64) -> f64 {
        self.eval(ScaleFn::WPrime, x)
    }

    pub fn w_bar(&self, x: f64) -> f64 {
        self.eval(ScaleFn::WBar, x)
    }

    pub fn z(&self, x: f64) -> f64 {
        self.eval(ScaleFn::Z, x)
    }

    pub fn z_bar(&self, x: f64) -> f64 {
        self.eval(ScaleFn::ZBar, x)
    }

    /// Evaluates `kind` at any real `x`. Inversion failures surface as NaN;
    /// use [`ScaleEvaluator::try_eval`] to get the error.
    pub fn eval(&self, kind: ScaleFn, x: f64) -> f64 {
        self.try_eval(kind, x).unwrap_or(f64::NAN)
    }

    pub fn try_eval(&self, kind: ScaleFn, x: f64) -> Result<f64> {
        self.try_eval_tilted(kind, x, 0.0)
    }

    /// `e^{-lambda x} f(x)`, computed without forming `f(x)` so that large
    /// arguments do not overflow.
    pub fn eval_tilted(&self, kind: ScaleFn, x: f64, lambda: f64) -> f64 {
        self.try_eval_tilted(kind, x, lambda).unwrap_or(f64::NAN)
    }

    pub fn try_eval_tilted(&self, kind: ScaleFn, x: f64, lambda: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(domain("scale function argument is NaN"));
        }
        if x < 0.0 {
            let v = match kind {
                ScaleFn::W | ScaleFn::WPrime | ScaleFn::WBar => 0.0,
                ScaleFn::Z => 1.0,
                ScaleFn::ZBar => x,
            };
            return Ok(v * (-lambda * x).exp());
        }
        match &self.backend {
            Backend::ClosedForm { roots, coefficients } => {
                Ok(closed_eval(kind, roots, coefficients, self.q, x, lambda))
            }
            Backend::NumericInversion { .. } => {
                if x == 0.0 {
                    return Ok(match kind {
                        ScaleFn::W => self.w0,
                        ScaleFn::WPrime => self.w_prime_at_zero(),
                        ScaleFn::WBar => 0.0,
                        ScaleFn::Z => 1.0,
                        ScaleFn::ZBar => 0.0,
                    });
                }
                self.invert(kind, x, lambda)
            }
        }
    }

    /// Talbot inversion of the transform of `W` at `x > 0`, whatever the
    /// backend.
    pub fn invert_laplace(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(domain(format!("inversion needs x > 0, got {x}")));
        }
        self.invert(ScaleFn::W, x, 0.0)
    }

    fn talbot(&self) -> Arc<FixedTalbot> {
        match &self.talbot {
            Some(t) => Arc::clone(t),
            None => Arc::new(FixedTalbot::new(DEFAULT_NODES)),
        }
    }

    fn invert(&self, kind: ScaleFn, x: f64, lambda: f64) -> Result<f64> {
        let m = &self.model;
        let s2 = DD::from(0.5 * m.sigma * m.sigma);
        let d = DD::from(m.linear_drift(self.target));
        let q = DD::from(self.q);
        let w0 = DD::from(self.w0);
        let jumps: Vec<(DD, DD)> = m
            .jumps
            .iter()
            .map(|j| (DD::from(j.rate), DD::from(j.exp_rate)))
            .collect();
        let f = |theta: CDD| -> CDD {
            let mut psi = theta * theta * s2 + theta * d;
            for &(rate, mu) in &jumps {
                psi = psi - (theta * rate) / (theta + mu);
            }
            let tr = (psi - q).recip();
            match kind {
                ScaleFn::W => tr,
                ScaleFn::WPrime => theta * tr - w0,
                ScaleFn::WBar => tr / theta,
                ScaleFn::Z => (tr * q + DD::ONE) / theta,
                ScaleFn::ZBar => (tr * q + DD::ONE) / (theta * theta),
            }
        };
        let shift = self.right_inverse;
        let g = self.talbot().invert_shifted(x, shift, f)?;
        let v = g.to_f64() * ((shift - lambda) * x).exp();
        if !v.is_finite() {
            return Err(numeric(format!("inversion of {kind:?} at x = {x} is not finite")));
        }
        Ok(v)
    }

    /// `int_lo^hi e^{mu s} f(s) ds` for `0 <= lo <= hi`.
    pub fn exp_integral(&self, kind: ScaleFn, mu: f64, lo: f64, hi: f64) -> Result<f64> {
        if lo < 0.0 || hi < lo {
            return Err(domain(format!("exp_integral needs 0 <= lo <= hi, got [{lo}, {hi}]")));
        }
        if hi == lo {
            return Ok(0.0);
        }
        if let Backend::ClosedForm { roots, coefficients } = &self.backend {
            let tiny = roots.iter().any(|&r| r != 0.0 && r.abs() < 1e-3);
            if !(tiny && matches!(kind, ScaleFn::WBar | ScaleFn::ZBar)) {
                return Ok(closed_exp_integral(kind, roots, coefficients, self.q, mu, lo, hi));
            }
        }
        let panels = ((hi - lo) / 0.25).ceil().max(8.0) as usize;
        gl16().integrate_composite(|s| Ok((mu * s).exp() * self.try_eval(kind, s)?), lo, hi, panels)
    }

    /// `int_0^inf e^{-lambda y} f(y) dy` for `lambda` above the right inverse.
    pub fn laplace_transform(&self, kind: ScaleFn, lambda: f64) -> Result<f64> {
        if !(lambda > self.right_inverse.max(0.0)) {
            return Err(domain(format!(
                "Laplace transform needs lambda > {}, got {lambda}",
                self.right_inverse.max(0.0)
            )));
        }
        let tr = self.transform(lambda);
        Ok(match kind {
            ScaleFn::W => tr,
            ScaleFn::WPrime => lambda * tr - self.w0,
            ScaleFn::WBar => tr / lambda,
            ScaleFn::Z => (1.0 + self.q * tr) / lambda,
            ScaleFn::ZBar => (1.0 + self.q * tr) / (lambda * lambda),
        })
    }

    /// `int_c^inf e^{-lambda y} f(y) dy` for `c >= 0`.
    pub fn laplace_tail(&self, kind: ScaleFn, lambda: f64, c: f64) -> Result<f64> {
        let full = self.laplace_transform(kind, lambda)?;
        Ok(full - self.exp_integral(kind, -lambda, 0.0, c.max(0.0))?)
    }

    /// Tabulates `W` on `[0, x_max]` for the inversion backend and checks that
    /// it increases along the grid. No-op for closed form.
    pub fn build_cache(&mut self, x_max: f64, step: f64) -> Result<()> {
        if self.is_closed_form() {
            return Ok(());
        }
        if !(step > 0.0 && x_max > step) {
            return Err(domain(format!("bad cache grid: x_max = {x_max}, step = {step}")));
        }
        let n = (x_max / step).ceil() as usize + 1;
        let mut w = Vec::with_capacity(n);
        w.push(self.w0);
        for i in 1..n {
            w.push(self.invert(ScaleFn::W, step * i as f64, 0.0)?);
        }
        if let Some(i) = (1..n).find(|&i| w[i] <= w[i - 1]) {
            return Err(Error::Numeric(format!(
                "cached W is not increasing at x = {} ({} <= {}); refine the grid or raise the Talbot node count",
                step * i as f64,
                w[i],
                w[i - 1]
            )));
        }
        self.cache = Some(Cache { step, w });
        Ok(())
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    /// CSV rows `x,W,Z` on a uniform grid from 0 to `x_max`; reuses the
    /// tabulated `W` when the grids coincide.
    pub fn grid_csv(&self, x_max: f64, step: f64) -> Result<String> {
        let mut out = String::from("x,W,Z\n");
        let n = (x_max / step).round() as usize;
        for i in 0..=n {
            let x = step * i as f64;
            let w = match &self.cache {
                Some(c) if c.step == step && i < c.w.len() => c.w[i],
                _ => self.try_eval(ScaleFn::W, x)?,
            };
            out.push_str(&format!("{},{:.16e},{:.16e}\n", x, w, self.try_eval(ScaleFn::Z, x)?));
        }
        Ok(out)
    }
}

/// `(e^{a x} - 1) / a`, continuous at `a = 0`.
fn expm1_ratio(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        x
    } else {
        (a * x).exp_m1() / a
    }
}

/// `(e^{a x} - 1 - a x) / a^2`, continuous at `a = 0`.
fn expm1_ratio2(a: f64, x: f64) -> f64 {
    let u = a * x;
    if u.abs() < 1e-3 {
        x * x * (0.5 + u / 6.0 + u * u / 24.0 + u * u * u / 120.0)
    } else {
        (u.exp_m1() - u) / (a * a)
    }
}

fn closed_eval(kind: ScaleFn, roots: &[f64], coef: &[f64], q: f64, x: f64, lambda: f64) -> f64 {
    let tilt = (-lambda * x).exp();
    let pairs = roots.iter().zip(coef);
    match kind {
        ScaleFn::W => pairs.map(|(r, c)| c * ((r - lambda) * x).exp()).sum(),
        ScaleFn::WPrime => pairs.map(|(r, c)| c * r * ((r - lambda) * x).exp()).sum(),
        ScaleFn::WBar => pairs.map(|(r, c)| c * expm1_ratio(*r, x)).sum::<f64>() * tilt,
        ScaleFn::Z => {
            if lambda == 0.0 {
                1.0 + q * pairs.map(|(r, c)| c * expm1_ratio(*r, x)).sum::<f64>()
            } else {
                // e^{-lambda x} + q sum C (e^{(rho - lambda) x} - e^{-lambda x}) / rho
                let mut acc = tilt;
                for (r, c) in pairs {
                    acc += q * c * if *r == 0.0 {
                        x * tilt
                    } else {
                        (((r - lambda) * x).exp() - tilt) / r
                    };
                }
                acc
            }
        }
        ScaleFn::ZBar => {
            (x + q * pairs.map(|(r, c)| c * expm1_ratio2(*r, x)).sum::<f64>()) * tilt
        }
    }
}

/// `int_lo^hi e^{a s} ds`.
fn e0(a: f64, lo: f64, hi: f64) -> f64 {
    (a * lo).exp() * expm1_ratio(a, hi - lo)
}

/// `int_lo^hi s e^{a s} ds`.
fn e1(a: f64, lo: f64, hi: f64) -> f64 {
    if a == 0.0 {
        0.5 * (hi * hi - lo * lo)
    } else {
        ((hi / a - 1.0 / (a * a)) * (a * hi).exp()) - ((lo / a - 1.0 / (a * a)) * (a * lo).exp())
    }
}

/// `int_lo^hi s^2 e^{a s} ds`.
fn e2(a: f64, lo: f64, hi: f64) -> f64 {
    if a == 0.0 {
        (hi * hi * hi - lo * lo * lo) / 3.0
    } else {
        let prim = |s: f64| (s * s / a - 2.0 * s / (a * a) + 2.0 / (a * a * a)) * (a * s).exp();
        prim(hi) - prim(lo)
    }
}

fn closed_exp_integral(
    kind: ScaleFn,
    roots: &[f64],
    coef: &[f64],
    q: f64,
    mu: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let wbar = || -> f64 {
        roots
            .iter()
            .zip(coef)
            .map(|(&r, &c)| {
                if r == 0.0 {
                    c * e1(mu, lo, hi)
                } else {
                    c * (e0(mu + r, lo, hi) - e0(mu, lo, hi)) / r
                }
            })
            .sum()
    };
    match kind {
        ScaleFn::W => roots.iter().zip(coef).map(|(&r, &c)| c * e0(mu + r, lo, hi)).sum(),
        ScaleFn::WPrime => roots
            .iter()
            .zip(coef)
            .map(|(&r, &c)| c * r * e0(mu + r, lo, hi))
            .sum(),
        ScaleFn::WBar => wbar(),
        ScaleFn::Z => e0(mu, lo, hi) + q * wbar(),
        ScaleFn::ZBar => {
            let inner: f64 = roots
                .iter()
                .zip(coef)
                .map(|(&r, &c)| {
                    if r == 0.0 {
                        0.5 * c * e2(mu, lo, hi)
                    } else {
                        c * (e0(mu + r, lo, hi) - e0(mu, lo, hi) - r * e1(mu, lo, hi)) / (r * r)
                    }
                })
                .sum();
            e1(mu, lo, hi) + q * inner
        }
    }
}

/// Numerator of `psi_target(theta) - q` once the poles `-mu_i` are cleared;
/// with `deflate` the known root at 0 is divided out (only valid for `q = 0`).
fn numerator(model: &ModelSpec, jumps: &[(f64, f64)], target: Target, q: f64, theta: f64, deflate: bool) -> f64 {
    let s2 = 0.5 * model.sigma * model.sigma;
    let d = model.linear_drift(target);
    let prod: f64 = jumps.iter().map(|&(_, mu)| mu + theta).product();
    let lead = if deflate {
        (s2 * theta + d) * prod
    } else {
        (s2 * theta * theta + d * theta - q) * prod
    };
    let mut tail = 0.0;
    for (k, &(rate, _)) in jumps.iter().enumerate() {
        let others: f64 = jumps
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, &(_, mu))| mu + theta)
            .product();
        tail += rate * others;
    }
    if deflate {
        lead - tail
    } else {
        lead - theta * tail
    }
}

/// Roots and partial-fraction coefficients of `1 / (psi_target - q)`.
fn closed_form(
    model: &ModelSpec,
    q: f64,
    target: Target,
    right_inverse: f64,
) -> std::result::Result<(Vec<f64>, Vec<f64>), FallbackReason> {
    let jumps: Vec<(f64, f64)> = model
        .merged_jumps()
        .iter()
        .map(|j| (j.rate, j.exp_rate))
        .collect();
    let m = jumps.len();
    let has_gauss = model.sigma > 0.0;
    let expected = m + 1 + usize::from(has_gauss);
    let slope0 = model.net_drift_of(target);
    let deflate = q == 0.0;
    let n = |t: f64| numerator(model, &jumps, target, q, t, deflate);

    let mut found = vec![right_inverse];
    if deflate {
        if slope0 == 0.0 {
            return Err(FallbackReason::RepeatedRoot { gap: 0.0 });
        }
        if right_inverse != 0.0 {
            found.push(0.0);
        }
    }

    // Boundaries 0 > -mu_1 > ... > -mu_m (> lo when Gaussian).
    let mut bounds = vec![0.0];
    bounds.extend(jumps.iter().map(|&(_, mu)| -mu));
    if has_gauss {
        let last = *bounds.last().unwrap();
        let f_last = n(last);
        let mut width = 1.0;
        let mut lo = last - width;
        while n(lo).signum() == f_last.signum() || n(lo) == 0.0 {
            width *= 2.0;
            lo = last - width;
            if width > 1e12 {
                return Err(FallbackReason::RootCount {
                    found: found.len(),
                    expected,
                });
            }
        }
        bounds.push(lo);
    }
    for (i, pair) in bounds.windows(2).enumerate() {
        let (hi, lo) = (pair[0], pair[1]);
        // With q = 0 the interval next to the origin holds a root only when
        // the mean drift is positive (otherwise that root is Phi(0) > 0).
        if i == 0 && deflate && slope0 < 0.0 {
            continue;
        }
        match brent(&n, lo, hi, 1e-15, DEFAULT_MAX_ITER) {
            Ok(r) => found.push(polish(model, target, q, r, lo, hi)),
            Err(_) => {
                return Err(FallbackReason::RootCount {
                    found: found.len(),
                    expected,
                })
            }
        }
    }
    if found.len() != expected {
        return Err(FallbackReason::RootCount {
            found: found.len(),
            expected,
        });
    }
    found.sort_by(|a, b| b.total_cmp(a));
    let gap = found
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    if gap < ROOT_SEPARATION {
        return Err(FallbackReason::RepeatedRoot { gap });
    }
    let coefficients: Vec<f64> = found
        .iter()
        .map(|&r| 1.0 / model.exponent_derivative(target, r))
        .collect();
    let max_coefficient = coefficients.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if !max_coefficient.is_finite() || max_coefficient > MAX_COEFFICIENT {
        return Err(FallbackReason::IllConditioned { max_coefficient });
    }
    Ok((found, coefficients))
}

/// A couple of Newton steps on the rational form, kept inside the bracket.
fn polish(model: &ModelSpec, target: Target, q: f64, r: f64, lo: f64, hi: f64) -> f64 {
    if r == 0.0 {
        return r;
    }
    let mut x = r;
    for _ in 0..2 {
        let f = model.exponent(target, x) - q;
        let d = model.exponent_derivative(target, x);
        let next = x - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            break;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::*;
    use crate::model::JumpComponent;

    const A: f64 = 0.910_683_602_522_959_3;
    const B: f64 = -0.244_016_935_856_292_7;

    #[test]
    fn m1_closed_form_matches_hand_partial_fractions() {
        let ev = ScaleEvaluator::build(&m1(), 0.5, Target::X).unwrap();
        let Backend::ClosedForm { roots, coefficients } = ev.backend() else {
            panic!("expected closed form");
        };
        let s = (1.0f64 / 3.0).sqrt();
        assert!((roots[0] - s).abs() < 1e-14 && (roots[1] + s).abs() < 1e-14);
        assert!((coefficients[0] - A).abs() < 1e-12);
        assert!((coefficients[1] - B).abs() < 1e-12);
        assert!((ev.w(0.0) - 2.0 / 3.0).abs() < 1e-14);
        assert!((ev.w(1.0) - 1.485_224_6).abs() < 1e-7);
        assert!((ev.w_bar(1.0) - 1.047_022_0).abs() < 1e-7);
        assert!((ev.z(1.0) - 1.523_511_0).abs() < 1e-7);
    }

    #[test]
    fn negative_half_line() {
        let ev = ScaleEvaluator::build(&m1(), 0.5, Target::X).unwrap();
        assert_eq!(ev.w(-1.0), 0.0);
        assert_eq!(ev.w_bar(-1.0), 0.0);
        assert_eq!(ev.z(-2.0), 1.0);
        assert_eq!(ev.z_bar(-2.0), -2.0);
    }

    #[test]
    fn z_is_one_when_q_vanishes() {
        let ev = ScaleEvaluator::build(&h2(), 0.0, Target::Y).unwrap();
        for x in [0.0, 0.5, 3.0] {
            assert!((ev.z(x) - 1.0).abs() < 1e-15);
            assert!((ev.z_bar(x) - x).abs() < 1e-14);
        }
    }

    #[test]
    fn initial_values() {
        for (name, m) in all_test_models() {
            for q in [0.0, 0.5, 2.0] {
                for target in [Target::X, Target::Y] {
                    let ev = ScaleEvaluator::build(&m, q, target).unwrap();
                    assert!(ev.is_closed_form(), "{name} q={q} {target}");
                    let expect = if m.sigma == 0.0 {
                        1.0 / m.linear_drift(target)
                    } else {
                        0.0
                    };
                    assert!((ev.w(0.0) - expect).abs() < 1e-12, "{name} q={q} {target}");
                    assert!(
                        (ev.w_prime(0.0) - ev.w_prime_at_zero()).abs() < 1e-9 * ev.w_prime_at_zero(),
                        "{name} q={q} {target}: {} vs {}",
                        ev.w_prime(0.0),
                        ev.w_prime_at_zero()
                    );
                }
            }
        }
    }

    #[test]
    fn talbot_agrees_with_closed_form() {
        let forced = ScaleOptions {
            force_inversion: true,
            ..ScaleOptions::default()
        };
        for (name, m) in all_test_models() {
            for q in [0.0, 0.5, 2.0] {
                let cf = ScaleEvaluator::build(&m, q, Target::X).unwrap();
                let inv = ScaleEvaluator::build_with(&m, q, Target::X, forced).unwrap();
                for x in [0.01, 0.3, 1.0, 4.0, 10.0] {
                    for kind in [ScaleFn::W, ScaleFn::WPrime, ScaleFn::WBar, ScaleFn::Z, ScaleFn::ZBar] {
                        let (a, b) = (cf.eval(kind, x), inv.eval(kind, x));
                        assert!(
                            (a - b).abs() <= 1e-10 * a.abs().max(1e-3),
                            "{name} q={q} {kind:?} x={x}: {a} vs {b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn q_zero_with_negative_drift_includes_phi_zero() {
        let m = m1().with_jumps(vec![JumpComponent { rate: 2.0, exp_rate: 1.0 }]);
        let ev = ScaleEvaluator::build(&m, 0.0, Target::X).unwrap();
        let Backend::ClosedForm { roots, .. } = ev.backend() else {
            panic!("expected closed form");
        };
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(roots[1], 0.0);
    }

    #[test]
    fn zero_mean_drift_at_q_zero_falls_back() {
        let m = m1().with_drift(1.0).with_delta(0.25);
        let ev = ScaleEvaluator::build(&m, 0.0, Target::X).unwrap();
        assert!(matches!(
            ev.backend(),
            Backend::NumericInversion {
                reason: FallbackReason::RepeatedRoot { .. },
                ..
            }
        ));
        // W^(0) = (1 + x) for c = 1, Exp(1) claims at unit rate
        for x in [0.5, 2.0, 6.0] {
            assert!((ev.w(x) - (1.0 + x)).abs() < 1e-10 * (1.0 + x), "x={x}: {}", ev.w(x));
        }
    }

    #[test]
    fn merged_components_share_a_pole() {
        let split = m1().with_jumps(vec![
            JumpComponent { rate: 0.4, exp_rate: 1.0 },
            JumpComponent { rate: 0.6, exp_rate: 1.0 },
        ]);
        let a = ScaleEvaluator::build(&split, 0.5, Target::X).unwrap();
        let b = ScaleEvaluator::build(&m1(), 0.5, Target::X).unwrap();
        assert!(a.is_closed_form());
        assert!((a.w(2.0) - b.w(2.0)).abs() < 1e-13);
    }

    #[test]
    fn exp_integrals_match_quadrature() {
        for (_, m) in all_test_models() {
            let ev = ScaleEvaluator::build(&m, 0.5, Target::Y).unwrap();
            for kind in [ScaleFn::W, ScaleFn::WPrime, ScaleFn::WBar, ScaleFn::Z, ScaleFn::ZBar] {
                for mu in [-1.3, 0.0, 2.0] {
                    let exact = ev.exp_integral(kind, mu, 0.2, 1.7).unwrap();
                    let quad = crate::quadrature::gl64()
                        .integrate(|s| (mu * s).exp() * ev.eval(kind, s), 0.2, 1.7);
                    assert!((exact - quad).abs() < 1e-12 * quad.abs().max(1.0), "{kind:?} mu={mu}");
                }
            }
        }
    }

    #[test]
    fn laplace_tail_matches_truncated_quadrature() {
        let ev = ScaleEvaluator::build(&m1(), 0.5, Target::X).unwrap();
        let lam = m1().varphi(0.5).unwrap();
        for kind in [ScaleFn::W, ScaleFn::WPrime, ScaleFn::Z] {
            let tail = ev.laplace_tail(kind, lam, 1.0).unwrap();
            let y_max = 1.0 + 40.0 / (lam - ev.right_inverse());
            let quad = gl16()
                .integrate_composite(|y| Ok(ev.eval_tilted(kind, y, lam)), 1.0, y_max, 2000)
                .unwrap();
            assert!(((tail - quad) / tail).abs() < 1e-10, "{kind:?}: {tail} vs {quad}");
        }
    }

    #[test]
    fn tilted_evaluation_avoids_overflow() {
        let ev = ScaleEvaluator::build(&m1(), 0.5, Target::X).unwrap();
        let phi = ev.right_inverse();
        let v = ev.eval_tilted(ScaleFn::W, 2000.0, phi);
        assert!((v - ev.asymptotic_constant()).abs() < 1e-12);
        assert!(ev.eval_tilted(ScaleFn::Z, 2000.0, phi).is_finite());
    }

    #[test]
    fn inversion_cache_is_monotone() {
        let forced = ScaleOptions {
            force_inversion: true,
            ..ScaleOptions::default()
        };
        let mut inv = ScaleEvaluator::build_with(&m1_diffusive(), 1.0, Target::X, forced).unwrap();
        inv.build_cache(5.0, 0.01).unwrap();
        let cf = ScaleEvaluator::build(&m1_diffusive(), 1.0, Target::X).unwrap();
        for x in [0.005, 0.123, 2.345, 4.999] {
            assert!((inv.w(x) - cf.w(x)).abs() < 1e-8 * cf.w(x).max(1e-2), "x = {x}");
        }
        let csv = inv.grid_csv(1.0, 0.01).unwrap();
        assert_eq!(csv.lines().count(), 102);
        assert!(inv.has_cache());
    }

    #[test]
    fn invert_laplace_rejects_origin() {
        let ev = ScaleEvaluator::build(&m1(), 0.5, Target::X).unwrap();
        assert!(ev.invert_laplace(0.0).is_err());
        assert!((ev.invert_laplace(1.0).unwrap() - ev.w(1.0)).abs() < 1e-8 * ev.w(1.0));
    }
}
