//! Spectrally negative Lévy models with Gaussian part and hyperexponential
//! downward jumps, plus the refraction parameters.
//!
//! The Laplace exponent of the supported family is
//!
//! ```text
//! psi(theta) = sigma^2 theta^2 / 2 + drift theta - sum_i rate_i theta / (exp_rate_i + theta)
//! ```
//!
//! and the drift-changed process `Y_t = X_t - delta t` has exponent
//! `psi_Y(theta) = psi(theta) - delta theta`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::roots::{self, brent};

/// One compound Poisson component: jumps of size `-E`, `E ~ Exp(exp_rate)`,
/// arriving at intensity `rate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpComponent {
    pub rate: f64,
    pub exp_rate: f64,
}

/// Lévy triplet (restricted family) together with the refraction rate `delta`
/// and refraction level `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub sigma: f64,
    /// Natural drift: `c` in the bounded-variation case, the linear
    /// coefficient otherwise. The jump part is integrable, so no compensator
    /// is folded in.
    pub drift: f64,
    #[serde(default)]
    pub jumps: Vec<JumpComponent>,
    pub delta: f64,
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variation {
    BoundedVariation,
    UnboundedVariation,
}

/// Which process a scale function belongs to: `X` or the drift-changed `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    X,
    Y,
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::X => write!(f, "X"),
            Target::Y => write!(f, "Y"),
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Target::X),
            "y" | "Y" => Ok(Target::Y),
            _ => Err(Error::Config(format!("unknown target `{s}` (expected x or y)"))),
        }
    }
}

impl ModelSpec {
    pub fn new(sigma: f64, drift: f64, jumps: Vec<JumpComponent>, delta: f64, b: f64) -> Result<Self> {
        let model = Self {
            sigma,
            drift,
            jumps,
            delta,
            b,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !self.drift.is_finite() {
            return bad(format!("drift must be finite, got {}", self.drift));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return bad(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return bad(format!("b must be finite and > 0, got {}", self.b));
        }
        for (i, j) in self.jumps.iter().enumerate() {
            if !(j.rate.is_finite() && j.rate > 0.0) {
                return bad(format!("jumps[{i}].rate must be finite and > 0, got {}", j.rate));
            }
            if !(j.exp_rate.is_finite() && j.exp_rate > 0.0) {
                return bad(format!(
                    "jumps[{i}].exp_rate must be finite and > 0, got {}",
                    j.exp_rate
                ));
            }
        }
        if self.sigma == 0.0 {
            if self.drift <= 0.0 {
                return bad(format!(
                    "bounded variation requires drift c > 0, got {}",
                    self.drift
                ));
            }
            if self.delta >= self.drift {
                return bad(format!(
                    "bounded variation requires delta < c, got delta = {}, c = {}",
                    self.delta, self.drift
                ));
            }
        }
        Ok(())
    }

    pub fn classify(&self) -> Variation {
        if self.sigma == 0.0 {
            Variation::BoundedVariation
        } else {
            Variation::UnboundedVariation
        }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..self.clone() }
    }

    pub fn with_drift(&self, drift: f64) -> Self {
        Self { drift, ..self.clone() }
    }

    pub fn with_b(&self, b: f64) -> Self {
        Self { b, ..self.clone() }
    }

    pub fn with_jumps(&self, jumps: Vec<JumpComponent>) -> Self {
        Self { jumps, ..self.clone() }
    }

    /// Linear coefficient of the target's exponent.
    pub fn linear_drift(&self, target: Target) -> f64 {
        match target {
            Target::X => self.drift,
            Target::Y => self.drift - self.delta,
        }
    }

    pub fn total_jump_rate(&self) -> f64 {
        self.jumps.iter().map(|j| j.rate).sum()
    }

    /// Components with equal `exp_rate` merged, sorted by increasing `exp_rate`.
    pub fn merged_jumps(&self) -> Vec<JumpComponent> {
        let mut sorted = self.jumps.clone();
        sorted.sort_by(|a, b| a.exp_rate.total_cmp(&b.exp_rate));
        let mut out: Vec<JumpComponent> = Vec::with_capacity(sorted.len());
        for j in sorted {
            match out.last_mut() {
                Some(last) if last.exp_rate == j.exp_rate => last.rate += j.rate,
                _ => out.push(j),
            }
        }
        out
    }

    /// Exponent of the target evaluated for any real `theta` off the poles.
    pub(crate) fn exponent(&self, target: Target, theta: f64) -> f64 {
        let jumps: f64 = self
            .jumps
            .iter()
            .map(|j| j.rate * theta / (j.exp_rate + theta))
            .sum();
        0.5 * self.sigma * self.sigma * theta * theta + self.linear_drift(target) * theta - jumps
    }

    pub(crate) fn exponent_derivative(&self, target: Target, theta: f64) -> f64 {
        let jumps: f64 = self
            .jumps
            .iter()
            .map(|j| j.rate * j.exp_rate / ((j.exp_rate + theta) * (j.exp_rate + theta)))
            .sum();
        self.sigma * self.sigma * theta + self.linear_drift(target) - jumps
    }

    /// `psi(theta) / theta`, continuous at 0 with value `psi'(0+)`.
    fn exponent_over_theta(&self, target: Target, theta: f64) -> f64 {
        let jumps: f64 = self.jumps.iter().map(|j| j.rate / (j.exp_rate + theta)).sum();
        0.5 * self.sigma * self.sigma * theta + self.linear_drift(target) - jumps
    }

    pub fn psi(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.exponent(Target::X, theta))
    }

    pub fn psi_y(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.exponent(Target::Y, theta))
    }

    /// `(psi'(0+), psi_Y'(0+))`. Always finite for this family.
    pub fn net_drift(&self) -> (f64, f64) {
        let mean_jumps: f64 = self.jumps.iter().map(|j| j.rate / j.exp_rate).sum();
        let x = self.drift - mean_jumps;
        (x, x - self.delta)
    }

    pub fn net_drift_of(&self, target: Target) -> f64 {
        let (x, y) = self.net_drift();
        match target {
            Target::X => x,
            Target::Y => y,
        }
    }

    /// Right inverse `Phi(q)` of `psi`.
    pub fn phi(&self, q: f64) -> Result<f64> {
        self.right_inverse(Target::X, q)
    }

    /// Right inverse `varphi(q)` of `psi_Y`.
    pub fn varphi(&self, q: f64) -> Result<f64> {
        self.right_inverse(Target::Y, q)
    }

    /// Largest nonnegative root of `psi_target(lambda) = q`.
    pub fn right_inverse(&self, target: Target, q: f64) -> Result<f64> {
        if !(q.is_finite() && q >= 0.0) {
            return Err(domain(format!("q must be finite and >= 0, got {q}")));
        }
        let slope0 = self.net_drift_of(target);
        let root = if q == 0.0 {
            if slope0 >= 0.0 {
                return Ok(0.0);
            }
            // psi(theta)/theta is increasing and negative at 0+.
            let f = |t: f64| self.exponent_over_theta(target, t);
            let hi = roots::expand_upward(f, 1.0)?;
            brent(f, 0.0, hi, 1e-14, roots::DEFAULT_MAX_ITER)?
        } else {
            let f = |t: f64| self.exponent(target, t) - q;
            let start = q / slope0.max(1e-3);
            let hi = roots::expand_upward(f, start)?;
            let lo = if f(0.5 * hi) < 0.0 { 0.5 * hi } else { 0.0 };
            brent(f, lo, hi, 1e-14 * hi.max(1.0), roots::DEFAULT_MAX_ITER)?
        };
        let resid = (self.exponent(target, root) - q).abs();
        if resid > 1e-10 * q.max(1.0) {
            return Err(Error::Numeric(format!(
                "right inverse residual {resid:e} too large at q = {q} (root {root})"
            )));
        }
        Ok(root)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let model: ModelSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("model file: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let model: ModelSpec = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("model file: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    /// Loads a model file; `.json` is parsed as JSON, anything else as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|ext| ext == "json");
        if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model serializes to TOML")
    }

    /// Short content hash tying outputs to the model that produced them.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("model serializes to JSON");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_nan() || theta < 0.0 {
        Err(domain(format!("theta must be >= 0, got {theta}")))
    } else {
        Ok(())
    }
}

/// Reference models used by the examples, the verifier suites and the tests.
pub mod presets {
    use super::{JumpComponent, ModelSpec};

    /// Cramér–Lundberg type model: `c = 1.5`, unit-rate Exp(1) claims,
    /// `delta = 0.25`, `b = 1`.
    pub fn m1() -> ModelSpec {
        ModelSpec {
            sigma: 0.0,
            drift: 1.5,
            jumps: vec![JumpComponent {
                rate: 1.0,
                exp_rate: 1.0,
            }],
            delta: 0.25,
            b: 1.0,
        }
    }

    /// `m1` with a Gaussian component `sigma = 0.5` (unbounded variation).
    pub fn m1_diffusive() -> ModelSpec {
        m1().with_sigma(0.5)
    }

    /// Bounded variation with a two-component hyperexponential claim law.
    pub fn h2() -> ModelSpec {
        ModelSpec {
            sigma: 0.0,
            drift: 2.0,
            jumps: vec![
                JumpComponent {
                    rate: 0.5,
                    exp_rate: 1.0,
                },
                JumpComponent {
                    rate: 0.7,
                    exp_rate: 3.0,
                },
            ],
            delta: 0.3,
            b: 1.0,
        }
    }

    /// Pure drift, no jumps: deterministic paths.
    pub fn drift_only() -> ModelSpec {
        ModelSpec {
            sigma: 0.0,
            drift: 1.5,
            jumps: Vec::new(),
            delta: 0.25,
            b: 1.0,
        }
    }

    pub fn all_test_models() -> Vec<(&'static str, ModelSpec)> {
        vec![("M1", m1()), ("M1-sigma", m1_diffusive()), ("H2", h2())]
    }
}
