//! Step distributions: the law of the attachment offset `Z`.
//!
//! A distribution is built from a spec string (`const:<k>`, `table:<p1>,...`,
//! `geom:<theta>`, `zipf:<alpha>`, `logheavy`) and exposes the pmf `q_n`, the
//! tail `p_n = P{Z >= n}`, truncated means `m_n = E min(Z, n)`, moment
//! classification and an exact inverse-tail sampler.
//!
//! Unbounded families evaluate tails in closed form: explicit summation below
//! a small cutoff, Euler–Maclaurin beyond it. The result is accurate to a few
//! ulps for every `n`, which is what keeps far-tail sampling exact.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Result, SurfError};
use crate::numeric::NeumaierSum;
use crate::rng::SurfRng;

/// Largest step value the sampler returns. Draws from beyond it (mass below
/// 1e-9 even for `zipf:0.5`) are reported as this value so that `t - Z` stays
/// inside `i64`.
pub const Z_CAP: u64 = 1 << 62;

/// Chunks `0..=MAX_TABLE_CHUNK` of the sampling table are materialized on
/// demand; chunk `k` holds `p_n` for `n` in `[2^k, 2^(k+1))`.
const MAX_TABLE_CHUNK: usize = 22;
const BOUNDARIES: usize = 63;

/// Below this index unbounded tails are summed term by term.
const EM_CUTOFF: u64 = 32;
const LOG_EM_CUTOFF: u64 = 64;

/// `B_{2k} / (2k)!` for `k = 1..=6`.
const BERNOULLI_OVER_FACTORIAL: [f64; 6] =
    [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0, 1.0 / 47900160.0, -691.0 / 1307674368000.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Constant { k: u64 },
    Table { probs: Vec<f64> },
    Geometric { theta: f64 },
    Zipf { alpha: f64 },
    LogHeavy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanInfo {
    pub finite: bool,
    pub value: Option<f64>,
    pub second_moment_finite: bool,
    pub second_moment: Option<f64>,
}

pub struct StepDistribution {
    family: Family,
    spec: String,
    /// `Σ_n f(n)` for the unnormalized zipf/logheavy weights; 1 otherwise.
    norm: f64,
    /// `p_n` for table supports, index `n - 1`.
    table_tails: Vec<f64>,
    /// `p_{2^k}` for `k = 0..63`.
    boundary: [f64; BOUNDARIES],
    chunks: Vec<OnceLock<Box<[f64]>>>,
}

impl Clone for StepDistribution {
    fn clone(&self) -> Self {
        StepDistribution {
            family: self.family.clone(),
            spec: self.spec.clone(),
            norm: self.norm,
            table_tails: self.table_tails.clone(),
            boundary: self.boundary,
            chunks: self.chunks.clone(),
        }
    }
}

impl fmt::Debug for StepDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StepDistribution")
            .field("spec", &self.spec)
            .field("family", &self.family)
            .field("norm", &self.norm)
            .finish()
    }
}

impl fmt::Display for StepDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

impl FromStr for StepDistribution {
    type Err = SurfError;

    fn from_str(s: &str) -> Result<Self> {
        make_dist(s)
    }
}

fn invalid(spec: &str, reason: impl Into<String>) -> SurfError {
    SurfError::InvalidSpec { spec: spec.to_string(), reason: reason.into() }
}

/// Parses a probability token: a decimal (`0.25`, `1e-3`) or a fraction (`1/3`).
pub fn parse_probability(token: &str) -> Option<f64> {
    let token = token.trim();
    if let Some((num, den)) = token.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        if den == 0.0 {
            return None;
        }
        Some(num / den)
    } else {
        token.parse().ok()
    }
}

/// Builds a validated distribution from its spec string.
pub fn make_dist(spec: &str) -> Result<StepDistribution> {
    let spec = spec.trim();
    let (name, params) = match spec.split_once(':') {
        Some((name, params)) => (name.trim(), Some(params.trim())),
        None => (spec, None),
    };
    let family = match name {
        "const" => {
            let raw = params.ok_or_else(|| invalid(spec, "const needs a step value"))?;
            let k: u64 = raw.parse().map_err(|_| invalid(spec, "const step must be a positive integer"))?;
            if k == 0 || k > Z_CAP {
                return Err(invalid(spec, "const step must be in 1..=2^62"));
            }
            Family::Constant { k }
        }
        "table" => {
            let raw = params.ok_or_else(|| invalid(spec, "table needs probabilities"))?;
            let mut probs = Vec::new();
            for token in raw.split(',') {
                let p = parse_probability(token)
                    .ok_or_else(|| invalid(spec, format!("unparseable probability `{}`", token.trim())))?;
                if !p.is_finite() || p < 0.0 {
                    return Err(invalid(spec, format!("probability `{}` is negative or not finite", token.trim())));
                }
                probs.push(p);
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid(spec, format!("probabilities sum to {total}, not 1")));
            }
            while probs.last() == Some(&0.0) {
                probs.pop();
            }
            Family::Table { probs }
        }
        "geom" => {
            let raw = params.ok_or_else(|| invalid(spec, "geom needs theta"))?;
            let theta: f64 = raw.parse().map_err(|_| invalid(spec, "theta must be a number"))?;
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(invalid(spec, "theta must lie in (0, 1]"));
            }
            Family::Geometric { theta }
        }
        "zipf" => {
            let raw = params.ok_or_else(|| invalid(spec, "zipf needs alpha"))?;
            let alpha: f64 = raw.parse().map_err(|_| invalid(spec, "alpha must be a number"))?;
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(invalid(spec, "alpha must be positive"));
            }
            Family::Zipf { alpha }
        }
        "logheavy" => {
            if params.is_some_and(|p| !p.is_empty()) {
                return Err(invalid(spec, "logheavy takes no parameters"));
            }
            Family::LogHeavy
        }
        other => return Err(invalid(spec, format!("unknown family `{other}`"))),
    };
    Ok(StepDistribution::new(family, spec.to_string()))
}

/// `base^exp` by square-and-multiply; bit-identical on every IEEE platform.
pub(crate) fn pow_int(base: f64, mut exp: u64) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}

/// `s (s+1) ... (s+m-1)`.
fn rising(s: f64, m: u32) -> f64 {
    (0..m).fold(1.0, |acc, j| acc * (s + j as f64))
}

/// `Σ_{t >= n} t^{-s}` for `s > 1`, `n >= 1`.
pub fn power_tail(s: f64, n: u64) -> f64 {
    debug_assert!(s > 1.0 && n >= 1);
    let start = n.max(EM_CUTOFF);
    let x = start as f64;
    let mut acc = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    for (k, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let m = 2 * k as u32 + 1;
        acc += coeff * rising(s, m) * x.powf(-s - m as f64);
    }
    for t in (n..start).rev() {
        acc += (t as f64).powf(-s);
    }
    acc
}

/// Unnormalized logheavy weight `1 / ((t + 1) ln^2 (t + 1))`.
fn log_weight(t: u64) -> f64 {
    let u = (t + 1) as f64;
    let l = u.ln();
    1.0 / (u * l * l)
}

/// `Σ_{t >= n} 1 / ((t + 1) ln^2 (t + 1))`.
fn log_tail(n: u64) -> f64 {
    let start = n.max(LOG_EM_CUTOFF);
    let u = (start + 1) as f64;
    let l = u.ln();
    let inv_l = 1.0 / l;
    // g(u) = u^-1 L^-2; g^(m)(u) = (-1)^m u^-(m+1) Σ_j c_j L^-j.
    let mut coeffs = vec![0.0; 16];
    coeffs[2] = 1.0;
    let mut acc = inv_l + 0.5 * inv_l * inv_l / u;
    let mut m = 0u32;
    for coeff in BERNOULLI_OVER_FACTORIAL.iter().take(5) {
        // advance to derivative order 2k-1
        let target = if m == 0 { 1 } else { m + 2 };
        while m < target {
            let mut next = vec![0.0; coeffs.len()];
            for j in 0..coeffs.len() {
                next[j] += (m + 1) as f64 * coeffs[j];
                if j + 1 < coeffs.len() {
                    next[j + 1] += j as f64 * coeffs[j];
                }
            }
            coeffs = next;
            m += 1;
        }
        let poly: f64 = coeffs.iter().enumerate().map(|(j, c)| c * inv_l.powi(j as i32)).sum();
        // -B/(2k)! g^(2k-1) = +B/(2k)! u^-2k P(1/L)
        acc += coeff * u.powi(-(m as i32 + 1)) * poly;
    }
    for t in (n..start).rev() {
        acc += log_weight(t);
    }
    acc
}

impl StepDistribution {
    fn new(family: Family, spec: String) -> Self {
        let norm = match &family {
            Family::Zipf { alpha } => power_tail(1.0 + alpha, 1),
            Family::LogHeavy => log_tail(1),
            _ => 1.0,
        };
        let table_tails = match &family {
            Family::Table { probs } => {
                let mut tails = vec![0.0; probs.len()];
                let mut acc = NeumaierSum::default();
                for (i, p) in probs.iter().enumerate().rev() {
                    acc.add(*p);
                    tails[i] = acc.value();
                }
                if let Some(first) = tails.first_mut() {
                    *first = 1.0;
                }
                tails
            }
            _ => Vec::new(),
        };
        let mut dist = StepDistribution {
            family,
            spec,
            norm,
            table_tails,
            boundary: [0.0; BOUNDARIES],
            chunks: (0..=MAX_TABLE_CHUNK).map(|_| OnceLock::new()).collect(),
        };
        for k in 0..BOUNDARIES {
            dist.boundary[k] = dist.tail(1u64 << k);
        }
        dist
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn spec(&self) -> &str {
        &self.spec
    }

    /// `q_n = P{Z = n}`; zero for `n = 0`.
    pub fn pmf(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match &self.family {
            Family::Constant { k } => {
                if n == *k {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Table { probs } => probs.get((n - 1) as usize).copied().unwrap_or(0.0),
            Family::Geometric { theta } => theta * pow_int(1.0 - theta, n - 1),
            Family::Zipf { alpha } => (n as f64).powf(-(1.0 + alpha)) / self.norm,
            Family::LogHeavy => log_weight(n) / self.norm,
        }
    }

    /// `p_n = P{Z >= n}`; `p_0 = p_1 = 1`.
    pub fn tail(&self, n: u64) -> f64 {
        if n <= 1 {
            return 1.0;
        }
        match &self.family {
            Family::Constant { k } => {
                if n <= *k {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Table { .. } => self.table_tails.get((n - 1) as usize).copied().unwrap_or(0.0),
            Family::Geometric { theta } => pow_int(1.0 - theta, n - 1),
            Family::Zipf { alpha } => power_tail(1.0 + alpha, n) / self.norm,
            Family::LogHeavy => log_tail(n) / self.norm,
        }
    }

    /// `p_1, ..., p_n` (index `t - 1`), using the sampling cache where it exists.
    pub fn tails(&self, n: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n as usize);
        let support = self.support_len();
        for t in 1..=n {
            if support.is_some_and(|s| t > s) {
                out.resize(n as usize, 0.0);
                break;
            }
            out.push(self.cached_tail(t));
        }
        out
    }

    /// `q_1, ..., q_n` (index `t - 1`).
    pub fn pmfs(&self, n: u64) -> Vec<f64> {
        let support = self.support_len();
        (1..=n).map(|t| if support.is_some_and(|s| t > s) { 0.0 } else { self.pmf(t) }).collect()
    }

    fn cached_tail(&self, t: u64) -> f64 {
        let k = 63 - t.leading_zeros() as usize;
        if k <= MAX_TABLE_CHUNK && matches!(self.family, Family::Zipf { .. } | Family::LogHeavy) {
            self.chunk(k)[(t - (1u64 << k)) as usize]
        } else {
            self.tail(t)
        }
    }

    /// `m_n = Σ_{t=1}^n p_t = E min(Z, n)`.
    pub fn truncated_mean(&self, n: u64) -> f64 {
        let upper = self.support_len().map_or(n, |s| s.min(n));
        let mut acc = NeumaierSum::default();
        for t in 1..=upper {
            acc.add(self.cached_tail(t));
        }
        acc.value()
    }

    /// `m_0, m_1, ..., m_n`.
    pub fn truncated_means(&self, n: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n as usize + 1);
        out.push(0.0);
        let mut acc = NeumaierSum::default();
        for p in self.tails(n) {
            acc.add(p);
            out.push(acc.value());
        }
        out
    }

    pub fn mean_info(&self) -> MeanInfo {
        match &self.family {
            Family::Constant { k } => {
                let k = *k as f64;
                MeanInfo { finite: true, value: Some(k), second_moment_finite: true, second_moment: Some(k * k) }
            }
            Family::Table { probs } => {
                let mut first = NeumaierSum::default();
                let mut second = NeumaierSum::default();
                for (i, p) in probs.iter().enumerate() {
                    let n = (i + 1) as f64;
                    first.add(n * p);
                    second.add(n * n * p);
                }
                MeanInfo {
                    finite: true,
                    value: Some(first.value()),
                    second_moment_finite: true,
                    second_moment: Some(second.value()),
                }
            }
            Family::Geometric { theta } => MeanInfo {
                finite: true,
                value: Some(1.0 / theta),
                second_moment_finite: true,
                second_moment: Some((2.0 - theta) / (theta * theta)),
            },
            Family::Zipf { alpha } => {
                let alpha = *alpha;
                let finite = alpha > 1.0;
                let second = alpha > 2.0;
                MeanInfo {
                    finite,
                    value: finite.then(|| power_tail(alpha, 1) / self.norm),
                    second_moment_finite: second,
                    second_moment: second.then(|| power_tail(alpha - 1.0, 1) / self.norm),
                }
            }
            Family::LogHeavy => {
                MeanInfo { finite: false, value: None, second_moment_finite: false, second_moment: None }
            }
        }
    }

    /// Largest `n` with `q_n > 0`, for finite supports.
    pub fn support_len(&self) -> Option<u64> {
        match &self.family {
            Family::Constant { k } => Some(*k),
            Family::Table { probs } => Some(probs.len() as u64),
            Family::Geometric { theta } if *theta == 1.0 => Some(1),
            _ => None,
        }
    }

    pub fn q_max(&self) -> f64 {
        match &self.family {
            Family::Constant { .. } => 1.0,
            Family::Table { probs } => probs.iter().copied().fold(0.0, f64::max),
            // geometric, zipf and logheavy pmfs are decreasing
            _ => self.pmf(1),
        }
    }

    /// Greatest common divisor of the support is larger than one (finite
    /// supports only; the unbounded families all charge `n = 1`).
    pub fn is_periodic(&self) -> bool {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        match &self.family {
            Family::Constant { k } => *k > 1,
            Family::Table { probs } => {
                let g =
                    probs.iter().enumerate().filter(|(_, p)| **p > 0.0).fold(0u64, |g, (i, _)| gcd(g, i as u64 + 1));
                g > 1
            }
            _ => false,
        }
    }

    /// `q_n > 0` for every `n >= 1`.
    pub fn has_full_support(&self) -> bool {
        self.support_len().is_none()
    }

    /// `Σ_{t >= 1} p_t^x`, or `None` when the series diverges.
    pub fn tail_power_sum(&self, x: f64) -> Option<f64> {
        if x <= 0.0 {
            return None;
        }
        if let Some(s) = self.support_len() {
            let mut acc = NeumaierSum::default();
            for t in 1..=s {
                acc.add(self.tail(t).powf(x));
            }
            return Some(acc.value());
        }
        match &self.family {
            Family::Geometric { theta } => Some(1.0 / (1.0 - (1.0 - theta).powf(x))),
            Family::Zipf { alpha } => {
                let alpha = *alpha;
                let sigma = alpha * x;
                if sigma <= 1.0 {
                    return None;
                }
                const HEAD: u64 = 1 << 16;
                let mut acc = NeumaierSum::default();
                for t in 1..HEAD {
                    acc.add(self.cached_tail(t).powf(x));
                }
                // p_t = (t^-α / (α ζ)) [1 + (α/2) t^-1 + (α s / 12) t^-2 + O(t^-4)]
                let s = 1.0 + alpha;
                let c1 = x * alpha / 2.0;
                let c2 = x * alpha * s / 12.0 + x * (x - 1.0) * alpha * alpha / 8.0;
                let scale = (1.0 / (alpha * self.norm)).powf(x);
                let tail = scale
                    * (power_tail(sigma, HEAD)
                        + c1 * power_tail(sigma + 1.0, HEAD)
                        + c2 * power_tail(sigma + 2.0, HEAD));
                acc.add(tail);
                Some(acc.value())
            }
            // p_t ~ 1/ln t: Σ p_t^x diverges for every x
            Family::LogHeavy => None,
            Family::Constant { .. } | Family::Table { .. } => unreachable!("finite supports handled above"),
        }
    }

    fn chunk(&self, k: usize) -> &[f64] {
        self.chunks[k].get_or_init(|| self.fill_chunk(k))
    }

    fn fill_chunk(&self, k: usize) -> Box<[f64]> {
        let lo = 1u64 << k;
        let len = 1usize << k;
        let mut out = vec![0.0; len];
        match self.family {
            Family::Zipf { .. } | Family::LogHeavy => {
                // backward compensated accumulation from exact anchors
                const RESYNC: usize = 4096;
                let mut acc = NeumaierSum::default();
                let mut anchor = self.tail(lo + len as u64);
                acc.add(anchor);
                for i in (0..len).rev() {
                    let n = lo + i as u64;
                    if (len - 1 - i) % RESYNC == RESYNC - 1 {
                        anchor = self.tail(n);
                        acc = NeumaierSum::default();
                        acc.add(anchor);
                    } else {
                        acc.add(self.pmf(n));
                    }
                    out[i] = acc.value();
                }
            }
            _ => {
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = self.tail(lo + i as u64);
                }
            }
        }
        out.into_boxed_slice()
    }

    /// Draws `Z` by inverting the tail: the largest `n` with `p_n >= v`,
    /// `v` uniform on `(0, 1]`, has law `q`.
    pub fn sample(&self, rng: &mut SurfRng) -> u64 {
        let v = rng.next_f64_open_closed();
        self.invert_tail(v)
    }

    pub(crate) fn invert_tail(&self, v: f64) -> u64 {
        let mut k = 0;
        while k + 1 < BOUNDARIES && self.boundary[k + 1] >= v {
            k += 1;
        }
        if k + 1 >= BOUNDARIES {
            return Z_CAP;
        }
        let lo = 1u64 << k;
        if k <= MAX_TABLE_CHUNK {
            let chunk = self.chunk(k);
            let idx = chunk.partition_point(|&p| p >= v);
            lo + idx.saturating_sub(1) as u64
        } else {
            // tail(lo) >= v > tail(hi)
            let (mut good, mut bad) = (lo, lo << 1);
            while bad - good > 1 {
                let mid = good + (bad - good) / 2;
                if self.tail(mid) >= v {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            good
        }
    }
}
