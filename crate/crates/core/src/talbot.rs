//! Fixed-Talbot numerical Laplace inversion in double-double precision.
//!
//! The contour is `s(theta) = r (theta cot theta + i theta)`, `theta` in
//! `(-pi, pi)`, with `r = 2M / (5t)`. Since `t s` does not depend on `t`, the
//! exponential weights are computed once per `M`.

use crate::dd::{CDD, DD};
use crate::error::{numeric, Result};

pub const DEFAULT_NODES: usize = 64;

#[derive(Clone, Debug)]
struct Node {
    /// `t * s_k`.
    ts: CDD,
    /// `e^{t s_k} (1 + i sigma(theta_k))`.
    weight: CDD,
}

#[derive(Clone, Debug)]
pub struct FixedTalbot {
    m: usize,
    nodes: Vec<Node>,
    /// `t * r` and `e^{t r}` for the real-axis node.
    tr: DD,
    exp_tr: DD,
}

impl FixedTalbot {
    pub fn new(m: usize) -> Self {
        assert!(m >= 2, "Talbot needs at least two nodes");
        let tr = DD::from(2.0 * m as f64) / 5.0;
        let mut nodes = Vec::with_capacity(m - 1);
        for k in 1..m {
            let theta = DD::pi() * (k as f64) / (m as f64);
            let (sin, cos) = theta.sin_cos();
            let cot = cos / sin;
            let tcot = theta * cot;
            let ts = CDD::new(tr * tcot, tr * theta);
            let sigma = theta + (tcot - 1.0) * cot;
            let weight = ts.exp() * CDD::new(DD::ONE, sigma);
            nodes.push(Node { ts, weight });
        }
        Self {
            m,
            nodes,
            tr,
            exp_tr: tr.exp(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.m
    }

    /// Inverts `G(s) = f(s + shift)` at `t > 0`; the caller multiplies by
    /// `e^{shift t}` (or any tilted variant) to recover the original function.
    pub fn invert_shifted<F>(&self, t: f64, shift: f64, mut f: F) -> Result<DD>
    where
        F: FnMut(CDD) -> CDD,
    {
        if !(t > 0.0 && t.is_finite()) {
            return Err(numeric(format!("Talbot inversion needs t > 0, got {t}")));
        }
        let t_dd = DD::from(t);
        let shift = DD::from(shift);
        let r = self.tr / t_dd;
        let g0 = f(CDD::real(r + shift));
        if !g0.is_finite() {
            return Err(numeric(format!("non-finite transform value at s = {}", r.to_f64())));
        }
        let mut acc = g0.re * self.exp_tr * 0.5;
        for node in &self.nodes {
            let s = CDD::new(node.ts.re / t_dd, node.ts.im / t_dd);
            let g = f(s + shift);
            if !g.is_finite() {
                return Err(numeric(format!(
                    "non-finite transform value at s = {} + {}i",
                    s.re.to_f64(),
                    s.im.to_f64()
                )));
            }
            let term = node.weight * g;
            acc = acc + term.re;
        }
        let out = acc * r / (self.m as f64);
        if !out.is_finite() {
            return Err(numeric(format!("non-finite Talbot sum at t = {t}")));
        }
        Ok(out)
    }

    pub fn invert<F>(&self, t: f64, f: F) -> Result<f64>
    where
        F: FnMut(CDD) -> CDD,
    {
        self.invert_shifted(t, 0.0, f).map(DD::to_f64)
    }
}

impl Default for FixedTalbot {
    fn default() -> Self {
        Self::new(DEFAULT_NODES)
    }
}
