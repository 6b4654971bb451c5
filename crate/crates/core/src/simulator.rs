//! Path simulation of the refracted-reflected process `V`.
//!
//! Two schemes:
//!
//! * [`Scheme::ExactBv`]: event-driven and exact for bounded variation. Between
//!   jumps `V` moves at slope `c` below `b` and `c - delta` at or above `b`;
//!   every time integral along a linear segment is done in closed form.
//! * [`Scheme::Euler`]: fixed step `h` for any `sigma`. Jump epochs are exact,
//!   the refraction indicator is taken at the left end of each step,
//!   reflection at 0 is applied at the step end and discounting uses the step
//!   midpoint.
//!
//! Path `i` of an ensemble draws from ChaCha8 stream `i` of the seed, so the
//! result does not depend on how paths are scheduled across threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{ModelSpec, Variation};

/// Paths per reduction block. Fixed so that floating-point summation order
/// is a function of `n_paths` only.
pub const BLOCK: u64 = 1024;

pub const DEFAULT_HORIZON_CAP: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    ExactBv,
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    ExactBv,
    /// Step `h`; each step's Gaussian increment is the sum of `substeps`
    /// finer draws (lets runs at `h` and `h / substeps` share randomness).
    Euler { step: f64, substeps: u32 },
}

fn default_substeps() -> u32 {
    1
}

fn default_horizon_cap() -> f64 {
    DEFAULT_HORIZON_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub x0: f64,
    /// Upper level; omitted means no upper level (run to the horizon cap).
    #[serde(default)]
    pub a: Option<f64>,
    pub q: f64,
    #[serde(default)]
    pub p: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub scheme: SchemeKind,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default = "default_substeps")]
    pub substeps: u32,
    #[serde(default = "default_horizon_cap")]
    pub horizon_cap: f64,
    /// Band `[z1, z2]` whose discounted occupation is recorded.
    #[serde(default)]
    pub band: Option<[f64; 2]>,
    #[serde(default)]
    pub trace_paths: usize,
}

impl SimConfig {
    pub fn exact(x0: f64, a: f64, q: f64, n_paths: u64, seed: u64) -> Self {
        Self {
            x0,
            a: Some(a),
            q,
            p: 0.0,
            n_paths,
            seed,
            scheme: SchemeKind::ExactBv,
            step: None,
            substeps: 1,
            horizon_cap: DEFAULT_HORIZON_CAP,
            band: None,
            trace_paths: 0,
        }
    }

    pub fn euler(x0: f64, a: f64, q: f64, step: f64, n_paths: u64, seed: u64) -> Self {
        Self {
            scheme: SchemeKind::Euler,
            step: Some(step),
            ..Self::exact(x0, a, q, n_paths, seed)
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_band(mut self, z1: f64, z2: f64) -> Self {
        self.band = Some([z1, z2]);
        self
    }

    pub fn with_horizon_cap(mut self, cap: f64) -> Self {
        self.horizon_cap = cap;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("simulation config: {e}")))?;
        cfg.scheme_checked()?;
        Ok(cfg)
    }

    pub fn upper(&self) -> f64 {
        self.a.unwrap_or(f64::INFINITY)
    }

    pub fn scheme_checked(&self) -> Result<Scheme> {
        if !(self.q.is_finite() && self.q >= 0.0 && self.p.is_finite() && self.p >= 0.0) {
            return Err(domain(format!("need q, p >= 0, got q = {}, p = {}", self.q, self.p)));
        }
        if let Some(a) = self.a {
            if !(a > 0.0) {
                return Err(domain(format!("upper level a must be > 0, got {a}")));
            }
        }
        if !(self.horizon_cap > 0.0) {
            return Err(domain(format!("horizon cap must be > 0, got {}", self.horizon_cap)));
        }
        if let Some([z1, z2]) = self.band {
            if !(z1 <= z2) {
                return Err(domain(format!("band needs z1 <= z2, got [{z1}, {z2}]")));
            }
        }
        match self.scheme {
            SchemeKind::ExactBv => Ok(Scheme::ExactBv),
            SchemeKind::Euler => {
                let step = self
                    .step
                    .ok_or_else(|| Error::Config("euler scheme requires `step`".into()))?;
                if !(step > 0.0 && step.is_finite()) {
                    return Err(domain(format!("Euler step must be > 0, got {step}")));
                }
                if self.substeps == 0 {
                    return Err(domain("substeps must be >= 1"));
                }
                Ok(Scheme::Euler {
                    step,
                    substeps: self.substeps,
                })
            }
        }
    }
}

/// Per-path record.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PathFunctionals {
    /// `T_a^+`, or the horizon cap when censored.
    pub t_up: f64,
    pub censored: bool,
    /// `e^{-q T_a^+}`.
    pub exit_lt: f64,
    /// `int_0^{T} e^{-qt} dL_t`.
    pub disc_l: f64,
    /// `int_[0,T] e^{-qt} dR_t`.
    pub disc_r: f64,
    pub occ_below: f64,
    pub occ_above: f64,
    /// `exp(-p T - q occ_below)`.
    pub weight_below: f64,
    /// `exp(-p T - q occ_above)`.
    pub weight_above: f64,
    /// `int_0^T e^{-qt} 1{V_t in band} dt`.
    pub band: f64,
    /// Undiscounted totals, for pathwise checks.
    pub l_total: f64,
    pub r_total: f64,
    /// `X_T - x0`, the free process increment.
    pub x_increment: f64,
    pub v_end: f64,
}

impl PathFunctionals {
    pub const NAMES: [&'static str; 9] = [
        "exit_lt",
        "dividends",
        "capital_injection",
        "occupation_below_lt",
        "occupation_above_lt",
        "band",
        "t_up",
        "occ_below",
        "occ_above",
    ];

    fn values(&self) -> [f64; 9] {
        [
            self.exit_lt,
            self.disc_l,
            self.disc_r,
            self.weight_below,
            self.weight_above,
            self.band,
            self.t_up,
            self.occ_below,
            self.occ_above,
        ]
    }

    fn finish(&mut self, t: f64, q: f64, p: f64) {
        self.t_up = t;
        self.exit_lt = (-q * t).exp();
        self.weight_below = (-p * t - q * self.occ_below).exp();
        self.weight_above = (-p * t - q * self.occ_above).exp();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    CrossB,
    Jump,
    Reflect,
    Step,
    Exit,
    Censor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEvent {
    pub t: f64,
    pub v: f64,
    pub l: f64,
    pub r: f64,
    pub event: EventKind,
}

pub fn trace_csv(traces: &[Vec<TraceEvent>]) -> String {
    let mut out = String::from("path,t,V,L,R,event\n");
    for (i, tr) in traces.iter().enumerate() {
        for e in tr {
            let kind = serde_json::to_string(&e.event).expect("event kind serializes");
            let _ = writeln!(
                out,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                e.t,
                e.v,
                e.l,
                e.r,
                kind.trim_matches('"')
            );
        }
    }
    out
}

/// RNG for path `index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Compound-Poisson part of the model: total rate and a mixture sampler.
#[derive(Clone, Debug)]
struct Jumps {
    total: f64,
    cumulative: Vec<f64>,
    exp_rates: Vec<f64>,
}

impl Jumps {
    fn new(model: &ModelSpec) -> Self {
        let total = model.total_jump_rate();
        let mut acc = 0.0;
        let cumulative = model
            .jumps
            .iter()
            .map(|j| {
                acc += j.rate / total;
                acc
            })
            .collect();
        Self {
            total,
            cumulative,
            exp_rates: model.jumps.iter().map(|j| j.exp_rate).collect(),
        }
    }

    fn waiting_time(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.total == 0.0 {
            f64::INFINITY
        } else {
            let e: f64 = Exp1.sample(rng);
            e / self.total
        }
    }

    /// Positive jump magnitude.
    fn size(&self, rng: &mut ChaCha8Rng) -> f64 {
        let k = if self.exp_rates.len() == 1 {
            0
        } else {
            let u: f64 = rng.random();
            self.cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(self.exp_rates.len() - 1)
        };
        let e: f64 = Exp1.sample(rng);
        e / self.exp_rates[k]
    }
}

/// `int_{t0}^{t1} e^{-q s} ds`.
fn disc_integral(q: f64, t0: f64, t1: f64) -> f64 {
    if t1 <= t0 {
        0.0
    } else if q == 0.0 {
        t1 - t0
    } else {
        (-q * t0).exp() * -(-q * (t1 - t0)).exp_m1() / q
    }
}

/// Exact simulation for bounded variation.
pub fn simulate_path_exact_bv(
    model: &ModelSpec,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> Result<PathFunctionals> {
    if model.classify() != Variation::BoundedVariation {
        return Err(domain("exact simulation requires bounded variation (sigma = 0)"));
    }
    model.validate()?;
    let jumps = Jumps::new(model);
    let (b, delta) = (model.b, model.delta);
    let (c_low, c_high) = (model.drift, model.drift - model.delta);
    let a = cfg.upper();
    let (q, cap) = (cfg.q, cfg.horizon_cap);
    let [z1, z2] = cfg.band.unwrap_or([f64::NAN, f64::NAN]);

    let mut f = PathFunctionals::default();
    let mut t = 0.0;
    let mut v = cfg.x0;
    let mut record = |t: f64, v: f64, f: &PathFunctionals, event: EventKind| {
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(TraceEvent {
                t,
                v,
                l: f.l_total,
                r: f.r_total,
                event,
            });
        }
    };
    if v < 0.0 {
        f.r_total = -v;
        f.disc_r = -v;
        v = 0.0;
    }
    record(t, v, &f, EventKind::Start);
    if v >= a {
        f.finish(0.0, q, cfg.p);
        f.v_end = v;
        record(t, v, &f, EventKind::Exit);
        return Ok(f);
    }

    loop {
        let next_jump = t + jumps.waiting_time(rng);
        // drift phase up to the next jump, the upper level, or the cap
        loop {
            let above = v >= b;
            let slope = if above { c_high } else { c_low };
            let target = if above { a } else { b.min(a) };
            let t_hit = t + (target - v) / slope;
            let t_end = t_hit.min(next_jump).min(cap);
            let len = t_end - t;
            let disc = disc_integral(q, t, t_end);
            if above {
                f.occ_above += len;
                f.l_total += delta * len;
                f.disc_l += delta * disc;
            } else {
                f.occ_below += len;
            }
            if z1 <= z2 {
                let s1 = (t + (z1 - v) / slope).max(t);
                let s2 = (t + (z2 - v) / slope).min(t_end);
                f.band += disc_integral(q, s1, s2);
            }
            f.x_increment += c_low * len;
            if t_end == t_hit {
                t = t_hit;
                v = target;
                if target == a {
                    f.finish(t, q, cfg.p);
                    f.v_end = v;
                    record(t, v, &f, EventKind::Exit);
                    return Ok(f);
                }
                record(t, v, &f, EventKind::CrossB);
                continue;
            }
            v += slope * len;
            t = t_end;
            break;
        }
        if t >= cap {
            f.censored = cfg.a.is_some();
            f.finish(cap, q, cfg.p);
            f.v_end = v;
            record(t, v, &f, EventKind::Censor);
            return Ok(f);
        }
        let size = jumps.size(rng);
        f.x_increment -= size;
        v -= size;
        if v < 0.0 {
            f.r_total -= v;
            f.disc_r -= (-q * t).exp() * v;
            v = 0.0;
            record(t, v, &f, EventKind::Reflect);
        } else {
            record(t, v, &f, EventKind::Jump);
        }
    }
}

/// State of one Euler level while a shared fine path is being generated.
struct EulerLevel {
    step: f64,
    ratio: u64,
    t: f64,
    v: f64,
    dw: f64,
    jump: f64,
    done: bool,
    f: PathFunctionals,
}

/// Simulates several Euler levels on one shared path: the Brownian part is
/// drawn on the finest grid and summed for coarser levels, jumps are shared.
/// Every step in `steps` must be an integer multiple of the smallest.
pub fn simulate_path_euler_coupled(
    model: &ModelSpec,
    cfg: &SimConfig,
    steps: &[f64],
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> Result<Vec<PathFunctionals>> {
    model.validate()?;
    let fine = steps.iter().copied().fold(f64::INFINITY, f64::min);
    if !(fine > 0.0 && fine.is_finite()) {
        return Err(domain(format!("Euler steps must be > 0, got {steps:?}")));
    }
    let mut levels = Vec::with_capacity(steps.len());
    for &h in steps {
        let ratio = (h / fine).round();
        if ((ratio * fine - h) / h).abs() > 1e-9 {
            return Err(domain(format!("step {h} is not a multiple of the finest step {fine}")));
        }
        levels.push(EulerLevel {
            step: h,
            ratio: ratio as u64,
            t: 0.0,
            v: cfg.x0,
            dw: 0.0,
            jump: 0.0,
            done: false,
            f: PathFunctionals::default(),
        });
    }
    let jumps = Jumps::new(model);
    let (b, delta, sigma, c) = (model.b, model.delta, model.sigma, model.drift);
    let a = cfg.upper();
    let (q, p, cap) = (cfg.q, cfg.p, cfg.horizon_cap);
    let [z1, z2] = cfg.band.unwrap_or([f64::NAN, f64::NAN]);
    let sqrt_fine = fine.sqrt();

    for lv in levels.iter_mut() {
        if lv.v < 0.0 {
            lv.f.r_total = -lv.v;
            lv.f.disc_r = -lv.v;
            lv.v = 0.0;
        }
        if lv.v >= a {
            lv.f.finish(0.0, q, p);
            lv.f.v_end = lv.v;
            lv.done = true;
        }
    }
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(TraceEvent {
            t: 0.0,
            v: levels[0].v,
            l: 0.0,
            r: levels[0].f.r_total,
            event: EventKind::Start,
        });
    }

    let mut next_jump = jumps.waiting_time(rng);
    let mut k: u64 = 0;
    while levels.iter().any(|lv| !lv.done) {
        let t_end = fine * (k + 1) as f64;
        let dw = if sigma > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            sqrt_fine * z
        } else {
            0.0
        };
        let mut jump = 0.0;
        while next_jump <= t_end {
            jump -= jumps.size(rng);
            next_jump += jumps.waiting_time(rng);
        }
        k += 1;
        for (li, lv) in levels.iter_mut().enumerate() {
            if lv.done {
                continue;
            }
            lv.dw += dw;
            lv.jump += jump;
            if k % lv.ratio != 0 {
                continue;
            }
            let h = lv.step;
            let t_mid = lv.t + 0.5 * h;
            let w = (-q * t_mid).exp();
            let f = &mut lv.f;
            let above = lv.v > b;
            if above {
                f.occ_above += h;
                f.l_total += delta * h;
                f.disc_l += delta * h * w;
            } else if lv.v < b {
                f.occ_below += h;
            }
            if lv.v >= z1 && lv.v <= z2 {
                f.band += h * w;
            }
            let dx = c * h + sigma * lv.dw + lv.jump;
            f.x_increment += dx;
            let mut v = lv.v + dx - if above { delta * h } else { 0.0 };
            let mut event = EventKind::Step;
            if v < 0.0 {
                f.r_total -= v;
                f.disc_r -= w * v;
                v = 0.0;
                event = EventKind::Reflect;
            }
            lv.v = v;
            lv.t = h * (k / lv.ratio) as f64;
            lv.dw = 0.0;
            lv.jump = 0.0;
            if v >= a {
                lv.done = true;
                event = EventKind::Exit;
                f.finish(lv.t, q, p);
                f.v_end = v;
            } else if lv.t >= cap {
                lv.done = true;
                event = EventKind::Censor;
                f.censored = cfg.a.is_some();
                f.finish(lv.t, q, p);
                f.v_end = v;
            }
            if li == 0 {
                if let Some(tr) = trace.as_deref_mut() {
                    tr.push(TraceEvent {
                        t: lv.t,
                        v,
                        l: f.l_total,
                        r: f.r_total,
                        event,
                    });
                }
            }
        }
    }
    Ok(levels.into_iter().map(|lv| lv.f).collect())
}

/// Single-level Euler path.
pub fn simulate_path_euler(
    model: &ModelSpec,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<PathFunctionals> {
    let Scheme::Euler { step, substeps } = cfg.scheme_checked()? else {
        return Err(domain("simulate_path_euler needs the euler scheme"));
    };
    let fine = step / substeps as f64;
    let steps = if substeps == 1 { vec![step] } else { vec![step, fine] };
    let mut out = simulate_path_euler_coupled(model, cfg, &steps, rng, trace)?;
    Ok(out.swap_remove(0))
}

/// Streaming mean/variance (Welford), mergeable in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_dev: f64,
    pub stderr: f64,
    pub n: u64,
    pub censored: u64,
}

impl Estimate {
    fn from_moments(m: &Moments, censored: u64) -> Self {
        let std_dev = m.variance().sqrt();
        Self {
            mean: m.mean,
            std_dev,
            stderr: if m.n > 0 { std_dev / (m.n as f64).sqrt() } else { 0.0 },
            n: m.n,
            censored,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateSet {
    pub model_hash: String,
    pub scheme: String,
    pub seed: u64,
    pub n_paths: u64,
    pub censored: u64,
    pub estimates: BTreeMap<String, Estimate>,
}

impl EstimateSet {
    pub fn get(&self, name: &str) -> &Estimate {
        self.estimates
            .get(name)
            .unwrap_or_else(|| panic!("no estimate named {name}"))
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.n_paths.max(1) as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimates serialize")
    }
}

#[derive(Clone, Debug, Default)]
struct Accumulator {
    moments: [Moments; 9],
    censored: u64,
}

impl Accumulator {
    fn push(&mut self, f: &PathFunctionals) {
        for (m, v) in self.moments.iter_mut().zip(f.values()) {
            m.push(v);
        }
        self.censored += u64::from(f.censored);
    }

    fn merge(&mut self, other: &Accumulator) {
        for (m, o) in self.moments.iter_mut().zip(&other.moments) {
            m.merge(o);
        }
        self.censored += other.censored;
    }

    fn into_set(self, model: &ModelSpec, cfg: &SimConfig, scheme: String) -> EstimateSet {
        let estimates = PathFunctionals::NAMES
            .iter()
            .zip(&self.moments)
            .map(|(name, m)| (name.to_string(), Estimate::from_moments(m, self.censored)))
            .collect();
        EstimateSet {
            model_hash: model.hash(),
            scheme,
            seed: cfg.seed,
            n_paths: cfg.n_paths,
            censored: self.censored,
            estimates,
        }
    }
}

fn scheme_label(scheme: Scheme) -> String {
    match scheme {
        Scheme::ExactBv => "exact_bv".into(),
        Scheme::Euler { step, substeps } => format!("euler(h={step},substeps={substeps})"),
    }
}

/// Runs `levels` accumulators over all paths in fixed-size blocks; blocks are
/// reduced in index order whatever the thread pool does.
fn run_blocks<F>(n_paths: u64, levels: usize, path: F) -> Result<Vec<Accumulator>>
where
    F: Fn(u64) -> Result<Vec<PathFunctionals>> + Sync,
{
    let n_blocks = n_paths.div_ceil(BLOCK);
    let blocks: Vec<Result<Vec<Accumulator>>> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let mut acc = vec![Accumulator::default(); levels];
            let end = ((blk + 1) * BLOCK).min(n_paths);
            for i in blk * BLOCK..end {
                for (a, f) in acc.iter_mut().zip(path(i)?) {
                    a.push(&f);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Accumulator::default(); levels];
    for blk in blocks {
        for (t, a) in total.iter_mut().zip(blk?) {
            t.merge(&a);
        }
    }
    Ok(total)
}

/// Ensemble estimate of every functional; bitwise reproducible from
/// `(model, cfg)`.
pub fn run_ensemble(model: &ModelSpec, cfg: &SimConfig) -> Result<EstimateSet> {
    if cfg.n_paths < 2 {
        return Err(domain(format!("need at least 2 paths, got {}", cfg.n_paths)));
    }
    let scheme = cfg.scheme_checked()?;
    if scheme == Scheme::ExactBv && model.classify() != Variation::BoundedVariation {
        return Err(domain("exact_bv scheme requires sigma = 0"));
    }
    let mut acc = run_blocks(cfg.n_paths, 1, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let f = match scheme {
            Scheme::ExactBv => simulate_path_exact_bv(model, cfg, &mut rng, None)?,
            Scheme::Euler { .. } => simulate_path_euler(model, cfg, &mut rng, None)?,
        };
        Ok(vec![f])
    })?;
    Ok(acc.remove(0).into_set(model, cfg, scheme_label(scheme)))
}

/// Traces of the first `k` paths of the run described by `cfg`.
pub fn trace_paths(model: &ModelSpec, cfg: &SimConfig, k: usize) -> Result<Vec<Vec<TraceEvent>>> {
    let scheme = cfg.scheme_checked()?;
    (0..k.min(cfg.n_paths as usize) as u64)
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let mut tr = Vec::new();
            match scheme {
                Scheme::ExactBv => simulate_path_exact_bv(model, cfg, &mut rng, Some(&mut tr))?,
                Scheme::Euler { .. } => simulate_path_euler(model, cfg, &mut rng, Some(&mut tr))?,
            };
            Ok(tr)
        })
        .collect()
}

/// Estimates for several Euler step sizes on shared paths, plus the paired
/// differences of `exit_lt` between consecutive levels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoupledEstimates {
    pub steps: Vec<f64>,
    pub levels: Vec<EstimateSet>,
    pub exit_lt_differences: Vec<Estimate>,
}

pub fn run_coupled_euler(model: &ModelSpec, cfg: &SimConfig, steps: &[f64]) -> Result<CoupledEstimates> {
    if cfg.n_paths < 2 {
        return Err(domain(format!("need at least 2 paths, got {}", cfg.n_paths)));
    }
    cfg.scheme_checked()?;
    let n = steps.len();
    // per level functionals, then (n - 1) difference slots carried in exit_lt
    let acc = run_blocks(cfg.n_paths, 2 * n - 1, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let fs = simulate_path_euler_coupled(model, cfg, steps, &mut rng, None)?;
        let mut out = fs.clone();
        for w in fs.windows(2) {
            out.push(PathFunctionals {
                exit_lt: w[1].exit_lt - w[0].exit_lt,
                ..PathFunctionals::default()
            });
        }
        Ok(out)
    })?;
    let mut levels = Vec::with_capacity(n);
    let mut diffs = Vec::with_capacity(n - 1);
    for (j, a) in acc.into_iter().enumerate() {
        if j < n {
            let label = format!("euler(h={},coupled)", steps[j]);
            levels.push(a.into_set(model, cfg, label));
        } else {
            diffs.push(Estimate::from_moments(&a.moments[0], 0));
        }
    }
    Ok(CoupledEstimates {
        steps: steps.to_vec(),
        levels,
        exit_lt_differences: diffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::*;

    #[test]
    fn drift_only_travel_time() {
        let m = drift_only();
        let cfg = SimConfig::exact(0.0, 2.0, 0.5, 10, 1);
        let f = simulate_path_exact_bv(&m, &cfg, &mut path_rng(1, 0), None).unwrap();
        let t = 1.0 / 1.5 + 1.0 / 1.25;
        assert!((f.t_up - t).abs() < 1e-14);
        assert!((f.occ_below - 1.0 / 1.5).abs() < 1e-14);
        assert!((f.l_total - 0.25 * 0.8).abs() < 1e-14);
        let set = run_ensemble(&m, &cfg).unwrap();
        assert!((set.get("t_up").mean - t).abs() < 1e-14);
        assert_eq!(set.get("t_up").stderr, 0.0);
    }

    #[test]
    fn start_at_upper_level() {
        let cfg = SimConfig::exact(2.0, 2.0, 0.5, 10, 1);
        let f = simulate_path_exact_bv(&m1(), &cfg, &mut path_rng(1, 0), None).unwrap();
        assert_eq!(f.t_up, 0.0);
        assert_eq!(f.exit_lt, 1.0);
        assert_eq!(f.disc_l + f.disc_r + f.occ_above + f.occ_below, 0.0);
    }

    #[test]
    fn exact_requires_bounded_variation() {
        let cfg = SimConfig::exact(1.0, 2.0, 0.5, 10, 1);
        assert!(simulate_path_exact_bv(&m1_diffusive(), &cfg, &mut path_rng(1, 0), None).is_err());
        assert!(run_ensemble(&m1_diffusive(), &cfg).is_err());
    }

    #[test]
    fn pathwise_invariants() {
        let m = h2();
        let cfg = SimConfig::exact(0.4, 2.5, 0.3, 10, 9).with_band(0.5, 1.5);
        for i in 0..200 {
            let mut tr = Vec::new();
            let f = simulate_path_exact_bv(&m, &cfg, &mut path_rng(9, i), Some(&mut tr)).unwrap();
            // V = x0 + X - L + R
            let v = cfg.x0 + f.x_increment - f.l_total + f.r_total;
            assert!((v - f.v_end).abs() < 1e-12 * (1.0 + f.r_total + f.l_total), "path {i}");
            assert!((f.l_total - m.delta * f.occ_above).abs() < 1e-12 * (1.0 + f.l_total));
            assert!(f.occ_above + f.occ_below <= f.t_up * (1.0 + 1e-12));
            assert!(tr.iter().all(|e| e.v >= 0.0));
            assert!(tr.windows(2).all(|w| w[1].r >= w[0].r && w[1].t >= w[0].t));
            assert!(f.band <= f.t_up + 1e-12);
        }
    }

    #[test]
    fn euler_decomposition_and_reflection() {
        let m = m1_diffusive();
        let cfg = SimConfig::euler(0.3, 2.0, 0.5, 1e-2, 10, 3);
        for i in 0..50 {
            let mut tr = Vec::new();
            let f = simulate_path_euler(&m, &cfg, &mut path_rng(3, i), Some(&mut tr)).unwrap();
            let v = cfg.x0 + f.x_increment - f.l_total + f.r_total;
            assert!((v - f.v_end).abs() < 1e-9);
            assert!(tr.iter().all(|e| e.v >= 0.0));
        }
        let bad = SimConfig::euler(0.3, 2.0, 0.5, 0.0, 10, 3);
        assert!(simulate_path_euler(&m, &bad, &mut path_rng(3, 0), None).is_err());
    }

    #[test]
    fn coupled_levels_match_single_level_runs() {
        let m = m1_diffusive();
        let cfg = SimConfig::euler(1.0, 2.0, 0.5, 1e-2, 10, 5);
        let coupled =
            simulate_path_euler_coupled(&m, &cfg, &[1e-2], &mut path_rng(5, 0), None).unwrap();
        let single = simulate_path_euler(&m, &cfg, &mut path_rng(5, 0), None).unwrap();
        assert_eq!(coupled[0], single);
        assert!(simulate_path_euler_coupled(&m, &cfg, &[1e-2, 3e-3], &mut path_rng(5, 0), None).is_err());
    }

    #[test]
    fn zero_rates_give_unit_weight() {
        let cfg = SimConfig::exact(1.0, 2.0, 0.0, 500, 2);
        let set = run_ensemble(&m1(), &cfg).unwrap();
        assert_eq!(set.get("exit_lt").mean, 1.0);
        assert_eq!(set.get("exit_lt").stderr, 0.0);
        assert_eq!(set.get("occupation_below_lt").mean, 1.0);
    }

    #[test]
    fn ensemble_is_reproducible() {
        let cfg = SimConfig::exact(1.0, 2.0, 0.5, 3000, 17).with_p(0.3).with_band(1.2, 1.8);
        let a = run_ensemble(&m1(), &cfg).unwrap();
        let b = run_ensemble(&m1(), &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| run_ensemble(&m1(), &cfg)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut left, mut right) = (Moments::default(), Moments::default());
        xs[..40].iter().for_each(|&x| left.push(x));
        xs[40..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert!((left.mean - all.mean).abs() < 1e-14);
        assert!((left.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn config_parsing() {
        let text = "x0 = 1.0\na = 2.0\nq = 0.5\np = 0.3\nn_paths = 1000\nseed = 7\nscheme = \"euler\"\nstep = 0.001\nband = [1.2, 1.8]\n";
        let cfg = SimConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.scheme_checked().unwrap(), Scheme::Euler { step: 1e-3, substeps: 1 });
        assert_eq!(cfg.band, Some([1.2, 1.8]));
        assert!(SimConfig::from_toml_str(&format!("{text}bogus = 1\n")).is_err());
        let no_step = text.replace("step = 0.001\n", "");
        assert!(matches!(SimConfig::from_toml_str(&no_step), Err(Error::Config(_))));
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let cfg = SimConfig::exact(1.0, 2.0, 0.5, 10, 4);
        let traces = trace_paths(&m1(), &cfg, 2).unwrap();
        let csv = trace_csv(&traces);
        assert!(csv.starts_with("path,t,V,L,R,event\n"));
        assert!(csv.lines().any(|l| l.ends_with(",exit")));
    }
}
