//! Fluctuation identities of the refracted-reflected process `V`.
//!
//! Notation: `W`, `Z` belong to `X`, `WW`/`ZZ` (written 𝕎, ℤ in docs) to the
//! drift-changed process `Y = X - delta t`. Every convolution
//! `int_b^x WW(x - y) f(y) dy` goes through [`IdentityContext::convolve`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{domain, numeric, Error, Result};
use crate::model::{ModelSpec, Target};
use crate::quadrature::gl16;
use crate::scale::{ScaleEvaluator, ScaleFn, ScaleOptions};

/// Value of an identity: either a number or a proven infinity.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Finite(f64),
    Infinite { reason: String },
}

impl Value {
    pub fn finite(self) -> Option<f64> {
        match self {
            Value::Finite(v) => Some(v),
            Value::Infinite { .. } => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Value::Infinite { .. })
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Finite(v) => write!(f, "{v}"),
            Value::Infinite { .. } => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSettings {
    /// Target panel width for `int_b^x` convolutions.
    pub panel_width: f64,
    pub min_panels: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            panel_width: 0.05,
            min_panels: 8,
        }
    }
}

impl QuadratureSettings {
    pub fn panels(&self, len: f64) -> usize {
        ((len / self.panel_width).ceil() as usize).max(self.min_panels)
    }

    /// Same rule with the panel width halved, for self-convergence checks.
    pub fn refined(&self) -> Self {
        Self {
            panel_width: 0.5 * self.panel_width,
            min_panels: 2 * self.min_panels,
        }
    }
}

type EvalKey = (Target, u64);

/// Model plus lazily built, shared scale-function evaluators.
pub struct IdentityContext {
    model: ModelSpec,
    scale_opts: ScaleOptions,
    quad: QuadratureSettings,
    evaluators: RwLock<HashMap<EvalKey, Arc<ScaleEvaluator>>>,
}

impl fmt::Debug for IdentityContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IdentityContext")
            .field("model", &self.model)
            .field("quad", &self.quad)
            .finish_non_exhaustive()
    }
}

impl IdentityContext {
    pub fn new(model: ModelSpec) -> Result<Self> {
        Self::with_options(model, ScaleOptions::default(), QuadratureSettings::default())
    }

    pub fn with_options(model: ModelSpec, scale_opts: ScaleOptions, quad: QuadratureSettings) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model,
            scale_opts,
            quad,
            evaluators: RwLock::new(HashMap::new()),
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn quadrature(&self) -> QuadratureSettings {
        self.quad
    }

    /// A context sharing the model and options but with other quadrature
    /// settings (fresh evaluator map).
    pub fn with_quadrature(&self, quad: QuadratureSettings) -> Self {
        Self {
            model: self.model.clone(),
            scale_opts: self.scale_opts,
            quad,
            evaluators: RwLock::new(HashMap::new()),
        }
    }

    pub fn scale(&self, target: Target, q: f64) -> Result<Arc<ScaleEvaluator>> {
        let key = (target, q.to_bits());
        if let Some(ev) = self.evaluators.read().expect("evaluator map poisoned").get(&key) {
            return Ok(Arc::clone(ev));
        }
        let ev = Arc::new(ScaleEvaluator::build_with(&self.model, q, target, self.scale_opts)?);
        let mut map = self.evaluators.write().expect("evaluator map poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(ev)))
    }

    fn x(&self, q: f64) -> Result<Arc<ScaleEvaluator>> {
        self.scale(Target::X, q)
    }

    fn y(&self, q: f64) -> Result<Arc<ScaleEvaluator>> {
        self.scale(Target::Y, q)
    }

    /// Backend labels of the evaluators built so far, for provenance.
    pub fn backends(&self) -> Vec<String> {
        let map = self.evaluators.read().expect("evaluator map poisoned");
        let mut keys: Vec<_> = map.iter().collect();
        keys.sort_by(|a, b| a.0.cmp(b.0));
        keys.iter()
            .map(|((t, q), ev)| format!("{t}(q={}):{}", f64::from_bits(*q), ev.backend().label()))
            .collect()
    }

    fn b(&self) -> f64 {
        self.model.b
    }

    fn delta(&self) -> f64 {
        self.model.delta
    }

    /// `int_b^x WW^(kernel_q)(x - y) f(y) dy`; zero when `x <= b`.
    pub fn convolve<F>(&self, kernel_q: f64, f: F, x: f64) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let b = self.b();
        if x <= b {
            return Ok(0.0);
        }
        let kernel = self.y(kernel_q)?;
        gl16().integrate_composite(
            |y| {
                let fy = f(y)?;
                if !fy.is_finite() {
                    return Err(numeric(format!("non-finite convolution integrand f({y}) = {fy}")));
                }
                Ok(kernel.try_eval(ScaleFn::W, x - y)? * fy)
            },
            b,
            x,
            self.quad.panels(x - b),
        )
    }

    /// `r^(q)(x) = Z(x) + q delta int_b^x WW(x - y) W(y) dy`.
    pub fn r(&self, q: f64, x: f64) -> Result<f64> {
        check_q(q)?;
        if x <= 0.0 {
            return Ok(1.0);
        }
        let xs = self.x(q)?;
        let z = xs.try_eval(ScaleFn::Z, x)?;
        if q == 0.0 || self.delta() == 0.0 {
            return Ok(z);
        }
        let conv = self.convolve(q, |y| xs.try_eval(ScaleFn::W, y), x)?;
        Ok(z + q * self.delta() * conv)
    }

    /// `r~^(q)(x) = Zbar(x) + psi'(0+)/q + delta int_b^x WW(x - y) Z(y) dy`.
    pub fn r_tilde(&self, q: f64, x: f64) -> Result<f64> {
        check_q_positive(q)?;
        let drift0 = self.model.net_drift().0;
        if x <= 0.0 {
            return Ok(x + drift0 / q);
        }
        let xs = self.x(q)?;
        let conv = if self.delta() == 0.0 {
            0.0
        } else {
            self.convolve(q, |y| xs.try_eval(ScaleFn::Z, y), x)?
        };
        Ok(xs.try_eval(ScaleFn::ZBar, x)? + drift0 / q + self.delta() * conv)
    }

    /// Kernel `w^(q)(x, z)` of the resolvent.
    pub fn w_kernel(&self, q: f64, x: f64, z: f64) -> Result<f64> {
        check_q(q)?;
        let b = self.b();
        if z > 0.0 && z < b {
            let xs = self.x(q)?;
            let mut v = xs.try_eval(ScaleFn::W, x - z)?;
            if self.delta() != 0.0 {
                v += self.delta() * self.convolve(q, |y| xs.try_eval(ScaleFn::WPrime, y - z), x)?;
            }
            Ok(v)
        } else if z > b && z < x {
            self.y(q)?.try_eval(ScaleFn::W, x - z)
        } else {
            Ok(0.0)
        }
    }

    /// Density in `z` of `E_x int_0^{T_a^+} e^{-qt} 1{V_t in dz} dt`.
    pub fn resolvent_density(&self, q: f64, x: f64, a: f64, z: f64) -> Result<f64> {
        check_xa(x, a)?;
        if !(0.0..=a).contains(&z) {
            return Err(domain(format!("resolvent density needs 0 <= z <= a, got z = {z}")));
        }
        let v = self.w_kernel(q, a, z)? * self.r(q, x)? / self.r(q, a)? - self.w_kernel(q, x, z)?;
        check_density(v, z)
    }

    /// `int_{z1}^{z2}` of the resolvent density, split at its breakpoints.
    pub fn resolvent_band(&self, q: f64, x: f64, a: f64, z1: f64, z2: f64) -> Result<f64> {
        check_xa(x, a)?;
        let (z1, z2) = (z1.max(0.0), z2.min(a));
        if z2 <= z1 {
            return Ok(0.0);
        }
        let ratio = self.r(q, x)? / self.r(q, a)?;
        let mut cuts = vec![z1, z2];
        cuts.extend([self.b(), x].into_iter().filter(|&c| c > z1 && c < z2));
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            total += gl16().integrate_composite(
                |z| Ok(self.w_kernel(q, a, z)? * ratio - self.w_kernel(q, x, z)?),
                lo,
                hi,
                self.quad.panels(hi - lo),
            )?;
        }
        Ok(total)
    }

    /// Limit of the resolvent density as `a -> infinity`.
    pub fn resolvent_density_inf(&self, q: f64, x: f64, z: f64) -> Result<Value> {
        check_q(q)?;
        if z < 0.0 {
            return Err(domain(format!("resolvent density needs z >= 0, got {z}")));
        }
        let b = self.b();
        let delta = self.delta();
        let on_set = z > 0.0 && z != b;
        if q == 0.0 {
            let slope_y = self.model.net_drift().1;
            if slope_y <= 0.0 {
                return Ok(Value::Infinite {
                    reason: format!("q=0 and psi_Y'(0+) = {slope_y} <= 0"),
                });
            }
            if !on_set {
                return Ok(Value::Finite(-self.w_kernel(0.0, x, z)?));
            }
            let factor = if z > b {
                1.0
            } else {
                1.0 - delta * self.x(0.0)?.try_eval(ScaleFn::W, b - z)?
            };
            let v = factor / slope_y - self.w_kernel(0.0, x, z)?;
            return Ok(Value::Finite(v));
        }
        let xs = self.x(q)?;
        if !on_set {
            return Ok(Value::Finite(-self.w_kernel(q, x, z)?));
        }
        let lead = if delta == 0.0 {
            // reflected process: W(a - z) / Z(a) -> Phi e^{-Phi z} / q
            let phi = xs.right_inverse();
            phi * (-phi * z).exp() / q * xs.try_eval(ScaleFn::Z, x)?
        } else {
            let varphi = self.y(q)?.right_inverse();
            let num = if z > b {
                (-varphi * z).exp()
            } else {
                delta * (-varphi * z).exp() * xs.laplace_tail(ScaleFn::WPrime, varphi, b - z)?
            };
            let den = delta * q * xs.laplace_tail(ScaleFn::W, varphi, b)?;
            num / den * self.r(q, x)?
        };
        Ok(Value::Finite(check_density(lead - self.w_kernel(q, x, z)?, z)?))
    }

    /// `E_x e^{-q T_a^+} = r(x) / r(a)`.
    pub fn one_sided_exit(&self, q: f64, x: f64, a: f64) -> Result<f64> {
        check_xa(x, a)?;
        Ok(self.r(q, x)? / self.r(q, a)?)
    }

    /// `E_x int_0^{T_a^+} e^{-qt} dL_t`.
    pub fn dividends_npv(&self, q: f64, x: f64, a: f64) -> Result<f64> {
        check_xa(x, a)?;
        let delta = self.delta();
        if delta == 0.0 {
            return Ok(0.0);
        }
        let ys = self.y(q)?;
        let b = self.b();
        Ok(delta * ys.try_eval(ScaleFn::WBar, a - b)? * self.r(q, x)? / self.r(q, a)?
            - delta * ys.try_eval(ScaleFn::WBar, x - b)?)
    }

    /// `E_x int_0^inf e^{-qt} dL_t`.
    pub fn dividends_npv_inf(&self, q: f64, x: f64) -> Result<Value> {
        check_q(q)?;
        if q == 0.0 {
            return Ok(Value::Infinite { reason: "q=0".into() });
        }
        let delta = self.delta();
        if delta == 0.0 {
            return Ok(Value::Finite(0.0));
        }
        let b = self.b();
        let xs = self.x(q)?;
        let varphi = self.y(q)?.right_inverse();
        let tail = xs.laplace_tail(ScaleFn::W, varphi, b)?;
        let v = (-varphi * b).exp() * self.r(q, x)? / (varphi * q * tail)
            - delta * self.y(q)?.try_eval(ScaleFn::WBar, x - b)?;
        Ok(Value::Finite(v))
    }

    /// `E_x int_[0, T_a^+] e^{-qt} dR_t`.
    pub fn capital_injection_npv(&self, q: f64, x: f64, a: f64) -> Result<f64> {
        check_q_positive(q)?;
        check_xa(x, a)?;
        Ok(self.r_tilde(q, a)? * self.r(q, x)? / self.r(q, a)? - self.r_tilde(q, x)?)
    }

    /// `E_x int_[0, inf) e^{-qt} dR_t`.
    pub fn capital_injection_npv_inf(&self, q: f64, x: f64) -> Result<f64> {
        check_q_positive(q)?;
        let xs = self.x(q)?;
        let ratio = if self.delta() == 0.0 {
            // Zbar(a) / Z(a) -> 1 / Phi
            1.0 / xs.right_inverse()
        } else {
            let varphi = self.y(q)?.right_inverse();
            let b = self.b();
            xs.laplace_tail(ScaleFn::Z, varphi, b)? / (q * xs.laplace_tail(ScaleFn::W, varphi, b)?)
        };
        Ok(ratio * self.r(q, x)? - self.r_tilde(q, x)?)
    }

    /// `R^(p,q)(x) = Z^(p+q)(x) - q WWbar^(p)(x-b)
    ///   - (p+q) int_b^x WW^(p)(x-y) (q Wbar^(p+q)(y) - delta W^(p+q)(y)) dy`.
    pub fn mathcal_r(&self, p: f64, q: f64, x: f64) -> Result<f64> {
        check_pq(p, q)?;
        if x <= 0.0 {
            return Ok(1.0);
        }
        let xs = self.x(p + q)?;
        let z = xs.try_eval(ScaleFn::Z, x)?;
        if x <= self.b() {
            return Ok(z);
        }
        let delta = self.delta();
        let wwbar = self.y(p)?.try_eval(ScaleFn::WBar, x - self.b())?;
        let conv = if p + q == 0.0 {
            0.0
        } else {
            self.convolve(
                p,
                |y| Ok(q * xs.try_eval(ScaleFn::WBar, y)? - delta * xs.try_eval(ScaleFn::W, y)?),
                x,
            )?
        };
        Ok(z - q * wwbar - (p + q) * conv)
    }

    /// `L^(p,q) = R^(p+q, -q)`.
    pub fn mathcal_l(&self, p: f64, q: f64, x: f64) -> Result<f64> {
        check_pq(p, q)?;
        self.mathcal_r(p + q, -q, x)
    }

    /// `L^(p,q)(x) = Z^(p)(x) + q WWbar^(p+q)(x-b)
    ///   + p int_b^x WW^(p+q)(x-y) (q Wbar^(p)(y) + delta W^(p)(y)) dy`.
    pub fn mathcal_l_expanded(&self, p: f64, q: f64, x: f64) -> Result<f64> {
        check_pq(p, q)?;
        if x <= 0.0 {
            return Ok(1.0);
        }
        let xs = self.x(p)?;
        let z = xs.try_eval(ScaleFn::Z, x)?;
        if x <= self.b() {
            return Ok(z);
        }
        let delta = self.delta();
        let wwbar = self.y(p + q)?.try_eval(ScaleFn::WBar, x - self.b())?;
        let conv = if p == 0.0 {
            0.0
        } else {
            self.convolve(
                p + q,
                |y| Ok(q * xs.try_eval(ScaleFn::WBar, y)? + delta * xs.try_eval(ScaleFn::W, y)?),
                x,
            )?
        };
        Ok(z + q * wwbar + p * conv)
    }

    /// `E_x exp(-p T_a^+ - q int_0^{T_a^+} 1{V_s < b} ds)`.
    pub fn occupation_below_lt(&self, p: f64, q: f64, x: f64, a: f64) -> Result<f64> {
        check_xa(x, a)?;
        Ok(self.mathcal_r(p, q, x)? / self.mathcal_r(p, q, a)?)
    }

    /// `E_x exp(-p T_a^+ - q int_0^{T_a^+} 1{V_s > b} ds)`.
    pub fn occupation_above_lt(&self, p: f64, q: f64, x: f64, a: f64) -> Result<f64> {
        check_xa(x, a)?;
        Ok(self.mathcal_l(p, q, x)? / self.mathcal_l(p, q, a)?)
    }

    /// Evaluates a named request.
    pub fn evaluate(&self, req: &IdentityRequest) -> Result<IdentityValue> {
        use Quantity::*;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("{} requires parameter `{name}`", req.quantity)))
        };
        let q = || need(req.q, "q");
        let x = || need(req.x, "x");
        let a = || need(req.a, "a");
        let p = || need(req.p, "p");
        let z = || need(req.z, "z");
        let fin = |v: Result<f64>| v.map(Value::Finite);
        let value = match req.quantity {
            RQ => fin(self.r(q()?, x()?)),
            RTildeQ => fin(self.r_tilde(q()?, x()?)),
            WKernel => fin(self.w_kernel(q()?, x()?, z()?)),
            ResolventDensity => fin(self.resolvent_density(q()?, x()?, a()?, z()?)),
            ResolventDensityInf => self.resolvent_density_inf(q()?, x()?, z()?),
            ResolventBand => fin(self.resolvent_band(q()?, x()?, a()?, need(req.z1, "z1")?, need(req.z2, "z2")?)),
            OneSidedExit => fin(self.one_sided_exit(q()?, x()?, a()?)),
            DividendsNpv => fin(self.dividends_npv(q()?, x()?, a()?)),
            DividendsNpvInf => self.dividends_npv_inf(q()?, x()?),
            CapitalInjectionNpv => fin(self.capital_injection_npv(q()?, x()?, a()?)),
            CapitalInjectionNpvInf => fin(self.capital_injection_npv_inf(q()?, x()?)),
            MathcalR => fin(self.mathcal_r(p()?, q()?, x()?)),
            MathcalL => fin(self.mathcal_l(p()?, q()?, x()?)),
            OccupationBelowLt => fin(self.occupation_below_lt(p()?, q()?, x()?, a()?)),
            OccupationAboveLt => fin(self.occupation_above_lt(p()?, q()?, x()?, a()?)),
        }?;
        let mut warnings = Vec::new();
        if let Value::Finite(v) = value {
            if v < 0.0 && req.quantity == ResolventDensityInf {
                warnings.push(format!("negative density value {v:e}"));
            }
        }
        Ok(IdentityValue {
            request: req.clone(),
            value,
            backends: self.backends(),
            panel_width: self.quad.panel_width,
            warnings,
        })
    }
}

/// Reference formulas for the reflected process `U` (no refraction), written
/// only in terms of the scale functions of `X`.
pub mod reflected {
    use super::*;

    /// `Z(x)/Z(a) W(a - z) - W(x - z)`.
    pub fn resolvent_density(ev: &ScaleEvaluator, x: f64, a: f64, z: f64) -> f64 {
        ev.z(x) / ev.z(a) * ev.w(a - z) - ev.w(x - z)
    }

    pub fn upcrossing_lt(ev: &ScaleEvaluator, x: f64, a: f64) -> f64 {
        ev.z(x) / ev.z(a)
    }

    pub fn capital_injection_npv(ev: &ScaleEvaluator, x: f64, a: f64) -> f64 {
        let m = ev.model().net_drift().0 / ev.q();
        -(ev.z_bar(x) + m) + (ev.z_bar(a) + m) * ev.z(x) / ev.z(a)
    }

    fn below_numerator(ctx: &IdentityContext, p: f64, q: f64, x: f64) -> Result<f64> {
        let b = ctx.model().b;
        let wp = ScaleEvaluator::build(ctx.model(), p, Target::X)?;
        let wpq = ScaleEvaluator::build(ctx.model(), p + q, Target::X)?;
        let conv = if x > b {
            gl16().integrate_composite(
                |y| Ok(wp.w(x - y) * wpq.w_bar(y)),
                b,
                x,
                ctx.quadrature().panels(x - b),
            )?
        } else {
            0.0
        };
        Ok(wpq.z(x) - q * wp.w_bar(x - b) - (p + q) * q * conv)
    }

    fn above_numerator(ctx: &IdentityContext, p: f64, q: f64, x: f64) -> Result<f64> {
        let b = ctx.model().b;
        let wp = ScaleEvaluator::build(ctx.model(), p, Target::X)?;
        let wpq = ScaleEvaluator::build(ctx.model(), p + q, Target::X)?;
        let conv = if x > b {
            gl16().integrate_composite(
                |y| Ok(wpq.w(x - y) * wp.w_bar(y)),
                b,
                x,
                ctx.quadrature().panels(x - b),
            )?
        } else {
            0.0
        };
        Ok(wp.z(x) + q * wpq.w_bar(x - b) + p * q * conv)
    }

    /// `E_x exp(-p kappa_a^+ - q int 1{U_s < b} ds)`; the model's `delta` is
    /// ignored.
    pub fn occupation_below_lt(ctx: &IdentityContext, p: f64, q: f64, x: f64, a: f64) -> Result<f64> {
        Ok(below_numerator(ctx, p, q, x)? / below_numerator(ctx, p, q, a)?)
    }

    pub fn occupation_above_lt(ctx: &IdentityContext, p: f64, q: f64, x: f64, a: f64) -> Result<f64> {
        Ok(above_numerator(ctx, p, q, x)? / above_numerator(ctx, p, q, a)?)
    }
}

fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("q must be finite and >= 0, got {q}")))
    }
}

fn check_q_positive(q: f64) -> Result<()> {
    if q.is_finite() && q > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("capital injection identities need q > 0, got {q}")))
    }
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p.is_finite() && q.is_finite()) || p < 0.0 || p + q < 0.0 {
        Err(domain(format!("need p >= 0 and p + q >= 0, got p = {p}, q = {q}")))
    } else {
        Ok(())
    }
}

fn check_xa(x: f64, a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(domain(format!("need 0 < a < inf, got a = {a}")));
    }
    if !(x <= a) {
        return Err(domain(format!("need x <= a, got x = {x}, a = {a}")));
    }
    Ok(())
}

fn check_density(v: f64, z: f64) -> Result<f64> {
    if v < -1e-9 {
        Err(numeric(format!(
            "resolvent density {v:e} < 0 at z = {z}; quadrature failure suspected"
        )))
    } else {
        Ok(v)
    }
}

/// Names accepted in identity request files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    RQ,
    RTildeQ,
    WKernel,
    ResolventDensity,
    ResolventDensityInf,
    ResolventBand,
    OneSidedExit,
    DividendsNpv,
    DividendsNpvInf,
    CapitalInjectionNpv,
    CapitalInjectionNpvInf,
    MathcalR,
    MathcalL,
    OccupationBelowLt,
    OccupationAboveLt,
}

impl Quantity {
    pub const ALL: [Quantity; 15] = [
        Quantity::RQ,
        Quantity::RTildeQ,
        Quantity::WKernel,
        Quantity::ResolventDensity,
        Quantity::ResolventDensityInf,
        Quantity::ResolventBand,
        Quantity::OneSidedExit,
        Quantity::DividendsNpv,
        Quantity::DividendsNpvInf,
        Quantity::CapitalInjectionNpv,
        Quantity::CapitalInjectionNpvInf,
        Quantity::MathcalR,
        Quantity::MathcalL,
        Quantity::OccupationBelowLt,
        Quantity::OccupationAboveLt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::RQ => "r_q",
            Quantity::RTildeQ => "r_tilde_q",
            Quantity::WKernel => "w_kernel",
            Quantity::ResolventDensity => "resolvent_density",
            Quantity::ResolventDensityInf => "resolvent_density_inf",
            Quantity::ResolventBand => "resolvent_band",
            Quantity::OneSidedExit => "one_sided_exit",
            Quantity::DividendsNpv => "dividends_npv",
            Quantity::DividendsNpvInf => "dividends_npv_inf",
            Quantity::CapitalInjectionNpv => "capital_injection_npv",
            Quantity::CapitalInjectionNpvInf => "capital_injection_npv_inf",
            Quantity::MathcalR => "mathcal_r",
            Quantity::MathcalL => "mathcal_l",
            Quantity::OccupationBelowLt => "occupation_below_lt",
            Quantity::OccupationAboveLt => "occupation_above_lt",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|q| q.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|q| q.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown quantity `{s}`; valid names: {}",
                    Self::valid_names()
                ))
            })
    }
}

/// One line of a request file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityRequest {
    pub quantity: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl IdentityRequest {
    pub fn new(quantity: Quantity) -> Self {
        Self {
            quantity,
            x: None,
            a: None,
            z: None,
            z1: None,
            z2: None,
            p: None,
            q: None,
        }
    }

    pub fn x(mut self, v: f64) -> Self {
        self.x = Some(v);
        self
    }

    pub fn a(mut self, v: f64) -> Self {
        self.a = Some(v);
        self
    }

    pub fn z(mut self, v: f64) -> Self {
        self.z = Some(v);
        self
    }

    pub fn band(mut self, z1: f64, z2: f64) -> Self {
        self.z1 = Some(z1);
        self.z2 = Some(z2);
        self
    }

    pub fn p(mut self, v: f64) -> Self {
        self.p = Some(v);
        self
    }

    pub fn q(mut self, v: f64) -> Self {
        self.q = Some(v);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityValue {
    pub request: IdentityRequest,
    pub value: Value,
    /// Backends of the scale evaluators involved, e.g. `Y(q=0.5):closed-form`.
    pub backends: Vec<String>,
    pub panel_width: f64,
    pub warnings: Vec<String>,
}
