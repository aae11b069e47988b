//! Deterministic recursions, expectations and probability bounds.
//!
//! Conventions: `r[t] = P{C_t = 0}` with `r[0] = 1`; `rhat[t]` is the
//! root-inclusive expected size of the tree rooted at 0 (`rhat[0] = 1`) and
//! `rhat[t] - 1` the root-exclusive one. Every logarithm is natural.
//!
//! Convolutions are direct `O(n * min(n, support))` loops.

use std::io::Write;

use serde::Serialize;

use crate::dist::{Family, StepDistribution};
use crate::error::{Result, SurfError};
use crate::numeric::{compensated_sum, dot, two_sum, DdVec, NeumaierSum};

/// Reversed pmf `q_n, ..., q_1` so that convolution sums read both operands forward.
struct ReversedPmf {
    qrev: Vec<f64>,
    support: usize,
}

impl ReversedPmf {
    fn new(d: &StepDistribution, n: u64) -> Self {
        let mut qrev = d.pmfs(n);
        // pmf values that underflow to zero end the effective support
        let support = qrev.iter().rposition(|&q| q > 0.0).map_or(0, |i| i + 1);
        qrev.reverse();
        ReversedPmf { qrev, support }
    }

    /// `Σ_{s=1}^{t} q_s seq[t - s]`.
    fn conv_at(&self, seq: &[f64], t: usize) -> f64 {
        let n = self.qrev.len();
        let lo = t.saturating_sub(self.support);
        dot(&seq[lo..t], &self.qrev[n - t + lo..n])
    }
}

/// `r_0..r_n` from `r_t = Σ_{s=1}^t q_s r_{t-s}`, `r_0 = 1`.
pub fn renewal_sequence(d: &StepDistribution, n: u64) -> Vec<f64> {
    let q = ReversedPmf::new(d, n);
    let qdd = DdVec::from_f64(&q.qrev);
    let len = q.qrev.len();
    let mut acc = DdVec::with_capacity(n as usize + 1);
    acc.push(1.0, 0.0);
    for t in 1..=n as usize {
        let lo = t.saturating_sub(q.support);
        let (s, c) = acc.dot(lo, &qdd, len - t + lo, t - lo);
        acc.push(s, c);
    }
    acc.values().to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectedSizes {
    /// Root-inclusive, `rhat[0] = 1`.
    pub rhat: Vec<f64>,
    /// Root-exclusive, `rhat[t] - 1`.
    pub r_exclusive: Vec<f64>,
}

/// Expected size of the tree rooted at 0 from `R_t = 1 + Σ_{s=1}^t q_s R_{t-s}`.
pub fn expected_size_series(d: &StepDistribution, n: u64) -> ExpectedSizes {
    // Double-double state: the values grow like n, and plain rounding drifts
    // by more than 1e-10 over 10^4 steps.
    let q = ReversedPmf::new(d, n);
    let qdd = DdVec::from_f64(&q.qrev);
    let len = q.qrev.len();
    let mut acc = DdVec::with_capacity(n as usize + 1);
    acc.push(1.0, 0.0);
    for t in 1..=n as usize {
        let lo = t.saturating_sub(q.support);
        let (s, c) = acc.dot(lo, &qdd, len - t + lo, t - lo);
        let (h, e) = two_sum(1.0, s);
        acc.push(h, e + c);
    }
    let rhat = acc.values().to_vec();
    let r_exclusive = rhat.iter().map(|x| x - 1.0).collect();
    ExpectedSizes { rhat, r_exclusive }
}

/// `E S_n^{(i)} = Σ_{j=1}^n q_{j-i} rhat_{n-j}` for a root `i <= 0`.
pub fn expected_size_rooted(d: &StepDistribution, n: u64, i: i64) -> Result<f64> {
    if i > 0 {
        return Err(SurfError::InvalidArgument(format!("root id must be <= 0, got {i}")));
    }
    let rhat = expected_size_series(d, n).rhat;
    Ok(expected_size_rooted_with(d, &rhat, n, i))
}

pub(crate) fn expected_size_rooted_with(d: &StepDistribution, rhat: &[f64], n: u64, i: i64) -> f64 {
    let offset = i.unsigned_abs();
    let mut acc = NeumaierSum::default();
    for j in 1..=n {
        let q = d.pmf(j + offset);
        if q > 0.0 {
            acc.add(q * rhat[(n - j) as usize]);
        }
    }
    acc.value()
}

/// Distribution of `X_1 + ... + X_k` on `0..=n` (mass beyond `n` dropped).
fn convolution_power(d: &StepDistribution, n: u64, k: u64) -> Vec<f64> {
    let q = ReversedPmf::new(d, n);
    let mut current = vec![0.0; n as usize + 1];
    current[0] = 1.0;
    for _ in 0..k {
        let mut next = vec![0.0; n as usize + 1];
        for t in 1..=n as usize {
            next[t] = q.conv_at(&current, t);
        }
        current = next;
    }
    current
}

/// `E N_k(n) = P{X_1 + ... + X_k <= n}`, the expected number of vertices of
/// the tree rooted at 0 at depth `k` by time `n`.
pub fn profile_expectation(d: &StepDistribution, n: u64, k: u64) -> Result<f64> {
    if k == 0 || n < k {
        return Err(SurfError::InvalidArgument(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    // P{S_k <= n} = Σ_m P{S_{k-1} = m} (1 - p_{n-m+1})
    let partial = convolution_power(d, n, k - 1);
    let mut acc = NeumaierSum::default();
    for (m, mass) in partial.iter().enumerate() {
        if *mass > 0.0 && (m as u64) < n {
            acc.add(mass * (1.0 - d.tail(n - m as u64 + 1)));
        }
    }
    Ok(acc.value())
}

/// `P_k = Π_{s=1}^k (1 - q_s)` for `k = 0..=n`, via running sums of `ln(1 - q_s)`.
fn no_child_products(d: &StepDistribution, n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(1.0);
    let mut logs = NeumaierSum::default();
    let mut vanished = false;
    for q in d.pmfs(n) {
        vanished |= q >= 1.0;
        if vanished {
            out.push(0.0);
        } else {
            logs.add((-q).ln_1p());
            out.push(logs.value().exp());
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafExpectation {
    pub expected: f64,
    /// `E L_n / E S_n^{(0)}`.
    pub ratio: f64,
    /// `[e^{-1/(1 - q_max)}, e^{-1}]`.
    pub bracket: (f64, f64),
}

pub fn leaf_bracket(d: &StepDistribution) -> (f64, f64) {
    let q_max = d.q_max();
    let lo = if q_max < 1.0 { (-1.0 / (1.0 - q_max)).exp() } else { 0.0 };
    (lo, (-1.0f64).exp())
}

/// `E L_n = Σ_{t=1}^n r_t Π_{s=1}^{n-t} (1 - q_s)` for the tree rooted at 0.
pub fn expected_leaves(d: &StepDistribution, n: u64) -> Result<LeafExpectation> {
    if n == 0 {
        return Err(SurfError::InvalidArgument("n must be at least 1".into()));
    }
    let r = renewal_sequence(d, n);
    Ok(leaves_from_renewal(d, &r, n))
}

pub(crate) fn leaves_from_renewal(d: &StepDistribution, r: &[f64], n: u64) -> LeafExpectation {
    let products = no_child_products(d, n);
    let expected = compensated_sum((1..=n as usize).map(|t| r[t] * products[n as usize - t]));
    let size = compensated_sum(r[1..=n as usize].iter().copied());
    LeafExpectation { expected, ratio: expected / size, bracket: leaf_bracket(d) }
}

/// `E L_0..E L_n` (quadratic).
pub fn expected_leaves_series(d: &StepDistribution, r: &[f64]) -> Vec<f64> {
    let n = r.len() - 1;
    let mut products = no_child_products(d, n as u64);
    products.reverse(); // products[n - k] = P_k
    let mut out = vec![0.0; n + 1];
    for m in 1..=n {
        // Σ_{t=1}^m r_t P_{m-t}
        out[m] = dot(&r[1..=m], &products[n - m + 1..=n]);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeExpectations {
    /// `E O_n = m_n`.
    pub eo: f64,
    /// `E M_n`, within `em_error`.
    pub em: f64,
    pub em_error: f64,
    pub var_o: f64,
    /// Roots summed explicitly; the rest is covered by the certified tail.
    pub roots_summed: u64,
}

pub const DEFAULT_ROOT_CAP: u64 = 1 << 27;

/// `E O_n`, `Var O_n` and `E M_n = Σ_{i<=0} [1 - Π_{t=1}^n (1 - q_{t-i})]`.
///
/// Root `-j` contributes `u_j = 1 - Π_{t=j+1}^{j+n}(1 - q_t)`, with
/// `w_j - w_j^2/2 <= u_j <= w_j` for `w_j = p_{j+1} - p_{j+n+1}`. Roots
/// `j >= J` are replaced by `Σ_{j>=J} w_j = Σ_{k=J+1}^{J+n} p_k`; for
/// nonincreasing pmfs the overestimate is at most `w_J/2` times that sum.
/// `J` doubles until both `w_J` and that bound fall below `epsilon / 2`.
pub fn expected_trees(d: &StepDistribution, n: u64, epsilon: f64) -> Result<TreeExpectations> {
    expected_trees_capped(d, n, epsilon, DEFAULT_ROOT_CAP)
}

pub fn expected_trees_capped(d: &StepDistribution, n: u64, epsilon: f64, cap: u64) -> Result<TreeExpectations> {
    if n == 0 || !(epsilon > 0.0) {
        return Err(SurfError::InvalidArgument("need n >= 1 and epsilon > 0".into()));
    }
    let tails = d.tails(n);
    let eo = compensated_sum(tails.iter().copied());
    let var_o = compensated_sum(tails.iter().map(|p| p * (1.0 - p)));

    if let Some(support) = d.support_len() {
        // roots -j with j >= support are unreachable
        let mut em = NeumaierSum::default();
        for j in 0..support {
            let mut prod = 1.0;
            for t in j + 1..=(j + n).min(support) {
                prod *= 1.0 - d.pmf(t);
            }
            em.add(1.0 - prod);
        }
        return Ok(TreeExpectations { eo, em: em.value(), em_error: 0.0, var_o, roots_summed: support });
    }

    let window_mass = |j: u64| d.tail(j + 1) - d.tail(j + n + 1);
    let first_order_tail = |j: u64| compensated_sum((j + 1..=j + n).map(|k| d.tail(k)));
    let mut cut = n.max(1024);
    let (tail_sum, remainder) = loop {
        let w = window_mass(cut);
        let tail_sum = first_order_tail(cut);
        let remainder = 0.5 * w * tail_sum;
        if w < epsilon / 2.0 && remainder < epsilon / 2.0 {
            break (tail_sum, remainder);
        }
        if cut >= cap {
            return Err(SurfError::NonConvergent { epsilon, cap, achieved: remainder.max(w) });
        }
        cut = (cut * 2).min(cap);
    };

    // two running prefix sums of ln(1 - q_t): trailing at j, leading at j + n
    let log_q = |t: u64| (-d.pmf(t)).ln_1p();
    let mut lead = NeumaierSum::default();
    for t in 1..=n {
        lead.add(log_q(t));
    }
    let mut trail = NeumaierSum::default();
    let mut head = NeumaierSum::default();
    for j in 0..cut {
        head.add(-(lead.value() - trail.value()).exp_m1());
        trail.add(log_q(j + 1));
        lead.add(log_q(j + n + 1));
    }
    head.add(tail_sum);
    Ok(TreeExpectations { eo, em: head.value(), em_error: remainder, var_o, roots_summed: cut })
}

/// `E D_n^{(i)}`: `p_{1-i} - p_{n-i+1}` for roots, `1 - p_{n-i+1}` for `1 <= i <= n`.
pub fn expected_root_degree(d: &StepDistribution, n: u64, i: i64) -> f64 {
    if i <= 0 {
        let j = i.unsigned_abs();
        d.tail(1 + j) - d.tail(n + j + 1)
    } else if i as u64 <= n {
        1.0 - d.tail(n - i as u64 + 1)
    } else {
        0.0
    }
}

/// `1 - Σ q_t^2`, the limiting variance of the degree of a positive vertex.
pub fn degree_variance_limit(d: &StepDistribution) -> f64 {
    let upper = d.support_len().unwrap_or(1 << 20);
    let squares = compensated_sum((1..=upper).map(|t| d.pmf(t).powi(2)));
    1.0 - squares
}

/// `P{S^{(0)} = ∞}`: `1 / E Z` for finite mean, 0 otherwise.
pub fn survival_probability(d: &StepDistribution) -> f64 {
    let info = d.mean_info();
    match info.value {
        Some(mean) if info.finite => 1.0 / mean,
        _ => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSurvival {
    /// `P{B_n = n} = Π_{i=1}^{n-1} (1 - p_{i+1})`.
    pub exact: f64,
    /// `exp(-E Z / q_1)`.
    pub lower_bound: Option<f64>,
    pub bound_note: Option<String>,
}

pub fn block_survival(d: &StepDistribution, n: u64) -> BlockSurvival {
    let mut logs = NeumaierSum::default();
    let mut zero = false;
    for i in 1..n {
        let p = d.tail(i + 1);
        if p >= 1.0 {
            zero = true;
            break;
        }
        logs.add((-p).ln_1p());
    }
    let exact = if zero { 0.0 } else { logs.value().exp() };
    let q1 = d.pmf(1);
    let info = d.mean_info();
    let (lower_bound, bound_note) = if q1 == 0.0 {
        (None, Some("q_1 = 0: escape bound unavailable".to_string()))
    } else if !info.finite {
        (None, Some("infinite mean: escape bound unavailable".to_string()))
    } else {
        (info.value.map(|m| (-m / q1).exp()), None)
    };
    BlockSurvival { exact, lower_bound, bound_note }
}

/// `Σ_{i>=1} i p_{i+1} = E[Z(Z-1)]/2`, when the second moment is finite.
pub fn block_length_sum(d: &StepDistribution) -> Option<f64> {
    let info = d.mean_info();
    match (info.value, info.second_moment) {
        (Some(m1), Some(m2)) => Some((m2 - m1) / 2.0),
        _ => None,
    }
}

/// `E N / E N_1 = Σ_{i>=1} i p_{i+1} Π_{j=2}^i (1 - p_j)` (infinite horizon),
/// summed until the remaining terms are below `1e-15` of the total bound.
pub fn block_renewal_ratio(d: &StepDistribution) -> Option<f64> {
    let bound = block_length_sum(d)?;
    let mut acc = NeumaierSum::default();
    let mut prod = 1.0;
    let mut partial_bound = 0.0;
    let limit = d.support_len().unwrap_or(1 << 24);
    for i in 1..=limit {
        if i >= 2 {
            prod *= 1.0 - d.tail(i);
        }
        let w = i as f64 * d.tail(i + 1);
        acc.add(w * prod);
        partial_bound += w;
        if bound - partial_bound < 1e-15 * bound.max(1.0) {
            break;
        }
    }
    Some(acc.value())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeightBound {
    /// `(2 + ln n) / p_n`; infinite when `p_n = 0`.
    pub mean_bound: f64,
    /// `min(1, Σ_{t=1}^n e^{-k p_t})`.
    pub tail_bound: f64,
    pub flagged: bool,
}

pub fn bound_height(d: &StepDistribution, n: u64, k: u64) -> HeightBound {
    let p_n = d.tail(n);
    let flagged = p_n == 0.0;
    let mean_bound = if flagged { f64::INFINITY } else { (2.0 + (n as f64).ln()) / p_n };
    let tails = d.tails(n);
    let sum = compensated_sum(tails.iter().map(|p| (-(k as f64) * p).exp()));
    HeightBound { mean_bound, tail_bound: sum.min(1.0), flagged }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeBounds {
    /// `n e^{x - 1 - x ln x}`.
    pub positive_tail: f64,
    /// `(e/x)^x Σ_t p_t^x`, `None` when the series diverges.
    pub root_tail: Option<f64>,
}

pub fn bound_degrees(d: &StepDistribution, n: u64, x: f64) -> Result<DegreeBounds> {
    if !(x > 0.0) {
        return Err(SurfError::InvalidArgument(format!("x must be positive, got {x}")));
    }
    let positive_tail = n as f64 * (x - 1.0 - x * x.ln()).exp();
    let root_tail = d.tail_power_sum(x).map(|s| (std::f64::consts::E / x).powf(x) * s);
    Ok(DegreeBounds { positive_tail, root_tail })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChernoffBounds {
    /// `(EM/(EM+x))^{EM+x} e^{-x}` as displayed for the upper tail.
    pub upper: f64,
    /// `(EM/(EM+x))^{EM+x} e^{x}`, the Chernoff bound for sums of
    /// negatively associated indicators.
    pub upper_standard: f64,
    /// `e^{-x^2/(2 EM)}` for `P{M_n < EM - x}`.
    pub lower: f64,
}

pub fn bound_chernoff_m(em: f64, x: f64) -> Result<ChernoffBounds> {
    if !(em > 0.0 && x > 0.0) {
        return Err(SurfError::InvalidArgument("need EM > 0 and x > 0".into()));
    }
    let base = ((em + x) * (em / (em + x)).ln()).exp();
    Ok(ChernoffBounds { upper: base * (-x).exp(), upper_standard: base * x.exp(), lower: (-x * x / (2.0 * em)).exp() })
}

/// Every series up to horizon `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactSeries {
    pub n: u64,
    pub r: Vec<f64>,
    pub rhat: Vec<f64>,
    /// `m_0..m_n`, also `E O_0..E O_n`.
    pub m: Vec<f64>,
    /// `E L_0..E L_n`.
    pub el: Vec<f64>,
}

impl ExactSeries {
    pub fn compute(d: &StepDistribution, n: u64) -> ExactSeries {
        let r = renewal_sequence(d, n);
        let rhat = expected_size_series(d, n).rhat;
        let m = d.truncated_means(n);
        let el = expected_leaves_series(d, &r);
        ExactSeries { n, r, rhat, m, el }
    }

    pub fn eo(&self) -> &[f64] {
        &self.m
    }

    /// CSV with header `n,r,Rhat,m,EL`, one row per `n = 0..=horizon`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,r,Rhat,m,EL")?;
        for t in 0..=self.n as usize {
            writeln!(w, "{},{:e},{:e},{:e},{:e}", t, self.r[t], self.rhat[t], self.m[t], self.el[t])?;
        }
        Ok(())
    }
}

/// Family-level classification used by the verification suite.
pub fn is_heavy(d: &StepDistribution) -> bool {
    !d.mean_info().finite && matches!(d.family(), Family::Zipf { .. } | Family::LogHeavy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::make_dist;

    fn d(spec: &str) -> StepDistribution {
        make_dist(spec).unwrap()
    }

    const THIRD: &str = "table:1/3,1/3,1/3";

    #[test]
    fn renewal_examples() {
        assert_eq!(renewal_sequence(&d("const:1"), 5), vec![1.0; 6]);
        let g = renewal_sequence(&d("geom:0.5"), 4);
        assert_eq!(&g[1..], &[0.5; 4]);
        let t = renewal_sequence(&d(THIRD), 3);
        assert!((t[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((t[2] - 4.0 / 9.0).abs() < 1e-15);
        assert!((t[3] - 16.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn expected_size_examples() {
        let s = expected_size_series(&d(THIRD), 3);
        let want = [1.0, 4.0 / 3.0, 16.0 / 9.0, 64.0 / 27.0];
        for (a, b) in s.rhat.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let c = expected_size_series(&d("const:1"), 8);
        for t in 0..=8 {
            assert_eq!(c.r_exclusive[t], t as f64);
        }
        assert!((expected_size_series(&d("geom:0.5"), 10).r_exclusive[10] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rooted_size_examples() {
        assert!((expected_size_rooted(&d(THIRD), 2, -1).unwrap() - 7.0 / 9.0).abs() < 1e-15);
        let g = d("geom:0.3");
        let at_zero = expected_size_rooted(&g, 20, 0).unwrap();
        assert!((at_zero - expected_size_series(&g, 20).r_exclusive[20]).abs() < 1e-12);
        assert_eq!(expected_size_rooted(&d("const:1"), 5, -1).unwrap(), 0.0);
        assert!(expected_size_rooted(&g, 5, 1).is_err());
    }

    #[test]
    fn profile_examples() {
        assert!((profile_expectation(&d("geom:0.5"), 3, 1).unwrap() - 0.875).abs() < 1e-15);
        assert!((profile_expectation(&d("geom:0.5"), 2, 2).unwrap() - 0.25).abs() < 1e-15);
        assert!((profile_expectation(&d(THIRD), 3, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(profile_expectation(&d(THIRD), 2, 3).is_err());
    }

    #[test]
    fn leaves_examples() {
        assert!((expected_leaves(&d(THIRD), 2).unwrap().expected - 2.0 / 3.0).abs() < 1e-15);
        for n in [1, 5, 40] {
            assert!((expected_leaves(&d("const:1"), n).unwrap().expected - 1.0).abs() < 1e-15);
        }
        assert!((expected_leaves(&d("geom:0.5"), 2).unwrap().expected - 0.75).abs() < 1e-15);
        let g = d("geom:0.5");
        let r = renewal_sequence(&g, 30);
        let series = expected_leaves_series(&g, &r);
        for n in 1..=30u64 {
            assert!((series[n as usize] - expected_leaves(&g, n).unwrap().expected).abs() < 1e-13);
        }
    }

    #[test]
    fn trees_examples() {
        let t = expected_trees(&d(THIRD), 2, 1e-9).unwrap();
        assert!((t.em - 13.0 / 9.0).abs() < 1e-15);
        assert!((t.eo - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.em_error, 0.0);
        let c = expected_trees(&d("const:1"), 17, 1e-9).unwrap();
        assert_eq!((c.em, c.eo), (1.0, 1.0));
        let g = expected_trees(&d("geom:0.5"), 1, 1e-12).unwrap();
        assert!((g.em - 1.0).abs() < 1e-12, "{}", g.em);
        assert_eq!(g.eo, 1.0);
        assert!(g.em_error < 1e-12);
    }

    #[test]
    fn trees_truncation_reports_non_convergence() {
        let err = expected_trees_capped(&d("logheavy"), 1000, 1e-9, 1 << 12).unwrap_err();
        assert!(matches!(err, SurfError::NonConvergent { .. }));
    }

    #[test]
    fn geometric_em_against_brute_root_sum() {
        // brute force: sum 2000 roots explicitly, the rest is below 2^-2000
        let g = d("geom:0.5");
        let n = 12;
        let brute: f64 = (0..2000u64).map(|j| 1.0 - (j + 1..=j + n).map(|t| 1.0 - g.pmf(t)).product::<f64>()).sum();
        let t = expected_trees(&g, n, 1e-12).unwrap();
        assert!((t.em - brute).abs() < 1e-12);
    }

    #[test]
    fn root_degree_examples() {
        assert!((expected_root_degree(&d(THIRD), 2, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((expected_root_degree(&d("geom:0.5"), 200, 0) - 1.0).abs() < 1e-15);
        for spec in [THIRD, "geom:0.5", "zipf:0.5"] {
            assert_eq!(expected_root_degree(&d(spec), 9, 9), 0.0);
        }
        assert!((degree_variance_limit(&d("geom:0.5")) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn survival_examples() {
        assert_eq!(survival_probability(&d("geom:0.5")), 0.5);
        assert_eq!(survival_probability(&d("zipf:0.5")), 0.0);
        assert_eq!(survival_probability(&d("const:1")), 1.0);
    }

    #[test]
    fn block_survival_examples() {
        let g = block_survival(&d("geom:0.5"), 5);
        assert!((g.exact - 0.307_617_187_5).abs() < 1e-15);
        assert!((g.lower_bound.unwrap() - (-4.0f64).exp()).abs() < 1e-15);
        let c = block_survival(&d("const:1"), 30);
        assert_eq!(c.exact, 1.0);
        assert!((c.lower_bound.unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let z = block_survival(&d("zipf:0.5"), 10);
        assert!(z.exact > 0.0 && z.exact < 1.0);
        assert!(z.lower_bound.is_none());
        let two = block_survival(&d("const:2"), 4);
        assert_eq!(two.exact, 0.0);
        assert!(two.bound_note.is_some());
    }

    #[test]
    fn height_bound_examples() {
        let h = bound_height(&d("geom:0.5"), 8, 3);
        assert!((h.mean_bound - (2.0 + 8f64.ln()) * 128.0).abs() < 1e-9);
        assert!((h.mean_bound - 522.17).abs() < 0.01);
        // p_n = 1 only at n = 1 for Z ≡ 1
        assert_eq!(bound_height(&d("const:1"), 1, 3).mean_bound, 2.0);
        assert!(bound_height(&d("const:1"), 50, 3).flagged);
        assert_eq!(bound_height(&d("geom:0.5"), 4, 0).tail_bound, 1.0);
        assert!(bound_height(&d(THIRD), 10, 1).flagged);
    }

    #[test]
    fn degree_bound_examples() {
        let b = bound_degrees(&d("geom:0.5"), 10, 5.0).unwrap();
        assert!((b.positive_tail - 10.0 * 4f64.exp() / 3125.0).abs() < 1e-12);
        assert!((b.positive_tail - 0.174714).abs() < 1e-6);
        let r = bound_degrees(&d("geom:0.5"), 10, 3.0).unwrap().root_tail.unwrap();
        assert!((r - (std::f64::consts::E / 3.0).powi(3) * 8.0 / 7.0).abs() < 1e-12);
        assert!((r - 0.8502).abs() < 1e-4);
        assert_eq!(bound_degrees(&d("zipf:0.5"), 7, 1.0).unwrap().positive_tail, 7.0);
        assert!(bound_degrees(&d("zipf:0.5"), 7, 1.0).unwrap().root_tail.is_none());
        assert!(bound_degrees(&d("zipf:0.5"), 7, 0.0).is_err());
    }

    #[test]
    fn chernoff_examples() {
        let b = bound_chernoff_m(1.0, 1.0).unwrap();
        assert!((b.lower - (-0.5f64).exp()).abs() < 1e-15);
        assert!((b.lower - 0.6065).abs() < 1e-4);
        let tiny = bound_chernoff_m(1.0, 1e-9).unwrap();
        assert!((tiny.upper - 1.0).abs() < 1e-8 && (tiny.lower - 1.0).abs() < 1e-8);
        assert!((tiny.upper_standard - 1.0).abs() < 1e-8);
        assert!((bound_chernoff_m(4.0, 4.0).unwrap().lower - (-2.0f64).exp()).abs() < 1e-15);
        assert!(bound_chernoff_m(0.0, 1.0).is_err());
    }

    #[test]
    fn block_sums() {
        assert_eq!(block_length_sum(&d("geom:0.5")), Some(2.0));
        assert!(block_length_sum(&d("zipf:1.5")).is_none());
        let ratio = block_renewal_ratio(&d("geom:0.5")).unwrap();
        assert!(ratio > 2.0 * (-4.0f64).exp() && ratio < 2.0);
        // table 1/3: Ŝ = 1·p_2 + 2·p_3 = 2/3 + 2/3
        assert!((block_length_sum(&d(THIRD)).unwrap() - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn series_csv_header() {
        let s = ExactSeries::compute(&d("geom:0.5"), 3);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,r,Rhat,m,EL\n0,1e0,1e0,0e0,0e0\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
