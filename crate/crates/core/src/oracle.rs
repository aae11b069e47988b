//! Brute-force ground truth for small finite-support instances.
//!
//! Every step sequence over the positive-mass support is visited with a
//! lexicographic odometer and run through [`Forest::from_steps`]. The weight of
//! a sequence depends only on how often each support value occurs, so integer
//! sums are kept per count-vector class and weighted once at the end. Weights
//! are exact rationals whenever the spec's probabilities are rationals summing
//! to exactly one, which covers every `const` and `table` spec written with
//! fractions or terminating decimals; otherwise they fall back to `f64` with
//! compensated summation.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::dist::{Family, StepDistribution};
use crate::error::{Result, SurfError};
use crate::forest::Forest;
use crate::numeric::NeumaierSum;

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// An expectation or probability: exact when available, always as `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleValue {
    pub exact: Option<BigRational>,
    pub value: f64,
}

impl OracleValue {
    fn from_rational(r: BigRational) -> Self {
        let value = r.to_f64().unwrap_or(f64::NAN);
        OracleValue { exact: Some(r), value }
    }

    fn from_f64(value: f64) -> Self {
        OracleValue { exact: None, value }
    }

    /// `a/b` (or an integer) for exact values.
    pub fn exact_string(&self) -> Option<String> {
        self.exact.as_ref().map(|r| r.to_string())
    }
}

impl Serialize for OracleValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("OracleValue", 2)?;
        st.serialize_field("exact", &self.exact_string())?;
        st.serialize_field("value", &self.value)?;
        st.end()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnumerationResult {
    pub spec: String,
    pub n: u64,
    /// Step values with positive mass.
    pub support: Vec<u64>,
    pub sequences: u64,
    pub arithmetic: &'static str,
    pub total_probability: OracleValue,
    /// `r_0..r_n`, `r_t = P{C_t = 0}`.
    pub r: Vec<OracleValue>,
    /// `R̂_0..R̂_n`, root-inclusive expected size of tree 0 at each time.
    pub rhat: Vec<OracleValue>,
    pub em: OracleValue,
    pub eo: OracleValue,
    pub el: OracleValue,
    pub eh: OracleValue,
    pub eh0: OracleValue,
    /// `E S_n^{(i)}` (root excluded) for every reachable root `i`.
    pub tree_sizes: BTreeMap<i64, OracleValue>,
    /// `E D_n^{(i)}` for reachable roots and for `1..=n`.
    pub degrees: BTreeMap<i64, OracleValue>,
    /// `E N_1..E N_n` for tree 0.
    pub profile: Vec<OracleValue>,
    /// Outcome value -> probability, zero-probability outcomes omitted.
    pub dist_m: BTreeMap<u64, OracleValue>,
    pub dist_o: BTreeMap<u64, OracleValue>,
    pub dist_h: BTreeMap<u64, OracleValue>,
}

impl EnumerationResult {
    pub fn tree_size(&self, i: i64) -> f64 {
        self.tree_sizes.get(&i).map_or(0.0, |v| v.value)
    }

    pub fn degree(&self, i: i64) -> f64 {
        self.degrees.get(&i).map_or(0.0, |v| v.value)
    }
}

/// Parses a terminating decimal (with optional exponent) or a fraction of two.
pub fn parse_rational(token: &str) -> Option<BigRational> {
    let token = token.trim();
    if let Some((a, b)) = token.split_once('/') {
        let (a, b) = (parse_decimal(a.trim())?, parse_decimal(b.trim())?);
        if b.is_zero() {
            return None;
        }
        return Some(a / b);
    }
    parse_decimal(token)
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("{int}{frac}").parse().unwrap_or_else(|_| BigInt::zero());
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(all);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

/// Exact step probabilities `(value, q)` with `q > 0`, or `None` when the spec
/// tokens are not exact rationals summing to one.
fn exact_masses(d: &StepDistribution) -> Option<Vec<(u64, BigRational)>> {
    match d.family() {
        Family::Constant { k } => Some(vec![(*k, BigRational::one())]),
        Family::Table { .. } => {
            let params = d.spec().split_once(':')?.1;
            let mut out = Vec::new();
            let mut total = BigRational::zero();
            for (i, token) in params.split(',').enumerate() {
                let q = parse_rational(token)?;
                total += &q;
                if !q.is_zero() {
                    out.push((i as u64 + 1, q));
                }
            }
            total.is_one().then_some(out)
        }
        _ => None,
    }
}

/// Integer sums over the sequences of one count-vector class.
#[derive(Clone, Debug)]
struct ClassSums {
    sequences: u64,
    color_zero: Vec<u64>,
    m: u64,
    o: u64,
    l: u64,
    h: u64,
    h0: u64,
    sizes: Vec<u64>,
    root_degrees: Vec<u64>,
    positive_degrees: Vec<u64>,
    profile: Vec<u64>,
    dist_m: Vec<u64>,
    dist_o: Vec<u64>,
    dist_h: Vec<u64>,
}

impl ClassSums {
    fn new(n: usize, window: usize) -> Self {
        ClassSums {
            sequences: 0,
            color_zero: vec![0; n],
            m: 0,
            o: 0,
            l: 0,
            h: 0,
            h0: 0,
            sizes: vec![0; window],
            root_degrees: vec![0; window],
            positive_degrees: vec![0; n],
            profile: vec![0; n],
            dist_m: vec![0; n + 1],
            dist_o: vec![0; n + 1],
            dist_h: vec![0; n + 1],
        }
    }

    fn record(&mut self, f: &Forest) {
        let s = f.stats();
        self.sequences += 1;
        for (t, c) in f.colors().iter().enumerate() {
            if *c == 0 {
                self.color_zero[t] += 1;
            }
        }
        self.m += s.num_trees;
        self.o += s.root_hits;
        self.l += s.leaves_of_zero;
        self.h += s.height as u64;
        self.h0 += s.height_of_zero as u64;
        for (&root, &size) in &s.tree_sizes {
            self.sizes[root.unsigned_abs() as usize] += size;
        }
        for (&root, &deg) in &s.root_degrees {
            self.root_degrees[root.unsigned_abs() as usize] += deg as u64;
        }
        for (acc, &deg) in self.positive_degrees.iter_mut().zip(&s.positive_degrees) {
            *acc += deg as u64;
        }
        for (acc, &count) in self.profile.iter_mut().zip(&s.profile_of_zero) {
            *acc += count;
        }
        self.dist_m[s.num_trees as usize] += 1;
        self.dist_o[s.root_hits as usize] += 1;
        self.dist_h[s.height as usize] += 1;
    }

    fn merge(&mut self, other: &ClassSums) {
        fn add(a: &mut [u64], b: &[u64]) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.sequences += other.sequences;
        add(&mut self.color_zero, &other.color_zero);
        self.m += other.m;
        self.o += other.o;
        self.l += other.l;
        self.h += other.h;
        self.h0 += other.h0;
        add(&mut self.sizes, &other.sizes);
        add(&mut self.root_degrees, &other.root_degrees);
        add(&mut self.positive_degrees, &other.positive_degrees);
        add(&mut self.profile, &other.profile);
        add(&mut self.dist_m, &other.dist_m);
        add(&mut self.dist_o, &other.dist_o);
        add(&mut self.dist_h, &other.dist_h);
    }
}

type Classes = HashMap<Vec<u32>, ClassSums>;

/// Weighted combination of per-class integer sums, exact or floating.
enum Weights {
    Exact(Vec<(Vec<u32>, BigRational)>),
    Float(Vec<(Vec<u32>, f64)>),
}

impl Weights {
    fn combine(&self, classes: &Classes, pick: impl Fn(&ClassSums) -> u64) -> OracleValue {
        match self {
            Weights::Exact(ws) => {
                let mut acc = BigRational::zero();
                for (key, w) in ws {
                    let k = pick(&classes[key]);
                    if k != 0 {
                        acc += w * BigRational::from_integer(BigInt::from(k));
                    }
                }
                OracleValue::from_rational(acc)
            }
            Weights::Float(ws) => {
                let mut acc = NeumaierSum::default();
                for (key, w) in ws {
                    acc.add(w * pick(&classes[key]) as f64);
                }
                OracleValue::from_f64(acc.value())
            }
        }
    }
}

/// Enumerates all `s^n` step sequences (s = number of positive-mass values).
pub fn enumerate_exact(d: &StepDistribution, n: u64, budget: u64) -> Result<EnumerationResult> {
    let Some(len) = d.support_len() else {
        return Err(SurfError::InfiniteSupport(d.spec().to_string()));
    };
    if n == 0 {
        return Err(SurfError::InvalidArgument("horizon n must be at least 1".into()));
    }
    let exact = exact_masses(d);
    let support: Vec<u64> = match &exact {
        Some(masses) => masses.iter().map(|(z, _)| *z).collect(),
        None => (1..=len).filter(|&z| d.pmf(z) > 0.0).collect(),
    };
    let s = support.len() as u128;
    let sequences = u32::try_from(n).ok().and_then(|e| s.checked_pow(e)).unwrap_or(u128::MAX);
    if sequences > budget as u128 {
        return Err(SurfError::EnumerationBudget { sequences, budget });
    }
    let sequences = sequences as u64;
    let n_us = n as usize;
    let window = *support.last().unwrap() as usize;

    // split on leading digits so that rayon has enough chunks
    let mut lead = 0usize;
    let mut chunks = 1u64;
    while lead < n_us && chunks < 256 {
        lead += 1;
        chunks *= support.len() as u64;
    }
    let classes: Classes = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut local = Classes::new();
            let mut digits = vec![0usize; n_us];
            let mut c = chunk;
            for pos in (0..lead).rev() {
                digits[pos] = (c % support.len() as u64) as usize;
                c /= support.len() as u64;
            }
            let mut counts = vec![0u32; support.len()];
            loop {
                counts.iter_mut().for_each(|c| *c = 0);
                for &dg in &digits {
                    counts[dg] += 1;
                }
                let steps = digits.iter().map(|&dg| support[dg]).collect();
                let forest = Forest::from_steps(steps).expect("support values are positive");
                match local.get_mut(counts.as_slice()) {
                    Some(acc) => acc.record(&forest),
                    None => {
                        let mut acc = ClassSums::new(n_us, window);
                        acc.record(&forest);
                        local.insert(counts.clone(), acc);
                    }
                }
                // odometer over the trailing digits
                let mut pos = n_us;
                loop {
                    if pos == lead {
                        return local;
                    }
                    pos -= 1;
                    digits[pos] += 1;
                    if digits[pos] < support.len() {
                        break;
                    }
                    digits[pos] = 0;
                }
            }
        })
        .reduce(Classes::new, |mut a, b| {
            for (key, sums) in b {
                match a.get_mut(&key) {
                    Some(acc) => acc.merge(&sums),
                    None => {
                        a.insert(key, sums);
                    }
                }
            }
            a
        });

    let mut keys: Vec<Vec<u32>> = classes.keys().cloned().collect();
    keys.sort();
    let weights = match &exact {
        Some(masses) => Weights::Exact(
            keys.into_iter()
                .map(|key| {
                    let mut w = BigRational::one();
                    for ((_, q), &c) in masses.iter().zip(&key) {
                        for _ in 0..c {
                            w *= q;
                        }
                    }
                    (key, w)
                })
                .collect(),
        ),
        None => Weights::Float(
            keys.into_iter()
                .map(|key| {
                    let w = support.iter().zip(&key).map(|(&z, &c)| d.pmf(z).powi(c as i32)).product();
                    (key, w)
                })
                .collect(),
        ),
    };

    let w = |pick: &dyn Fn(&ClassSums) -> u64| weights.combine(&classes, pick);
    let total_probability = w(&|c| c.sequences);

    let one = || match &weights {
        Weights::Exact(_) => OracleValue::from_rational(BigRational::one()),
        Weights::Float(_) => OracleValue::from_f64(1.0),
    };
    let mut r = vec![one()];
    let mut rhat = vec![one()];
    for t in 0..n_us {
        r.push(w(&|c| c.color_zero[t]));
        // R̂_t = 1 + E #{s <= t : C_s = 0}
        rhat.push(match &weights {
            Weights::Exact(_) => {
                let prev = rhat[t].exact.clone().unwrap();
                OracleValue::from_rational(prev + r[t + 1].exact.clone().unwrap())
            }
            Weights::Float(_) => w(&|c| c.sequences + c.color_zero[..=t].iter().sum::<u64>()),
        });
    }

    let mut tree_sizes = BTreeMap::new();
    let mut degrees = BTreeMap::new();
    for j in 0..window {
        tree_sizes.insert(-(j as i64), w(&|c| c.sizes[j]));
        degrees.insert(-(j as i64), w(&|c| c.root_degrees[j]));
    }
    for t in 0..n_us {
        degrees.insert(t as i64 + 1, w(&|c| c.positive_degrees[t]));
    }
    let profile = (0..n_us).map(|k| w(&|c| c.profile[k])).collect();
    let table = |pick: &dyn Fn(&ClassSums, usize) -> u64| {
        (0..=n_us)
            .filter(|&v| classes.values().any(|c| pick(c, v) > 0))
            .map(|v| (v as u64, w(&|c| pick(c, v))))
            .collect::<BTreeMap<_, _>>()
    };

    Ok(EnumerationResult {
        spec: d.spec().to_string(),
        n,
        support,
        sequences,
        arithmetic: if exact.is_some() { "rational" } else { "float" },
        total_probability,
        r,
        rhat,
        em: w(&|c| c.m),
        eo: w(&|c| c.o),
        el: w(&|c| c.l),
        eh: w(&|c| c.h),
        eh0: w(&|c| c.h0),
        tree_sizes,
        degrees,
        profile,
        dist_m: table(&|c, v| c.dist_m[v]),
        dist_o: table(&|c, v| c.dist_o[v]),
        dist_h: table(&|c, v| c.dist_h[v]),
    })
}
