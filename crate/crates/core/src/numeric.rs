//! Small floating-point helpers shared by the exact and harness modules.

/// Neumaier's compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_mass() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
    }
}

/// Dot product with eight independent lanes (fixed order, so deterministic).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            lanes[i] += x[i] * y[i];
        }
    }
    let mut s = ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5])) + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[cfg(test)]
mod dot_tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 / (i + 1) as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
        assert_eq!(dot(&[], &[]), 0.0);
    }
}

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Veltkamp split into two 26-bit halves, so products of halves are exact.
#[inline]
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

/// Sequence of double-double values `value + tail`, with the leading parts
/// pre-split for error-free products.
#[derive(Clone, Debug, Default)]
pub struct DdVec {
    value: Vec<f64>,
    tail: Vec<f64>,
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl DdVec {
    pub fn with_capacity(n: usize) -> Self {
        DdVec {
            value: Vec::with_capacity(n),
            tail: Vec::with_capacity(n),
            hi: Vec::with_capacity(n),
            lo: Vec::with_capacity(n),
        }
    }

    pub fn from_f64(xs: &[f64]) -> Self {
        let mut v = DdVec::with_capacity(xs.len());
        for &x in xs {
            v.push(x, 0.0);
        }
        v
    }

    /// Appends `a + b`, renormalized.
    pub fn push(&mut self, a: f64, b: f64) {
        let (s, e) = two_sum(a, b);
        let (h, l) = split(s);
        self.value.push(s);
        self.tail.push(e);
        self.hi.push(h);
        self.lo.push(l);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    /// `Σ self[a + k] * other[b + k]` for `k < len` as an unevaluated pair
    /// `(sum, correction)`; leading products are error-free and summed with
    /// four compensated lanes.
    pub fn dot(&self, a: usize, other: &DdVec, b: usize, len: usize) -> (f64, f64) {
        let xs = [&self.value[a..a + len], &self.tail[a..a + len], &self.hi[a..a + len], &self.lo[a..a + len]];
        let ys = [&other.value[b..b + len], &other.tail[b..b + len], &other.hi[b..b + len], &other.lo[b..b + len]];
        let mut sums = [0.0f64; LANES];
        let mut comps = [0.0f64; LANES];
        let full = len - len % LANES;
        let mut k = 0;
        while k < full {
            let x: [&[f64; LANES]; 4] = xs.map(|v| v[k..k + LANES].try_into().unwrap());
            let y: [&[f64; LANES]; 4] = ys.map(|v| v[k..k + LANES].try_into().unwrap());
            for l in 0..LANES {
                let p = x[0][l] * y[0][l];
                let err = ((x[2][l] * y[2][l] - p) + x[2][l] * y[3][l] + x[3][l] * y[2][l]) + x[3][l] * y[3][l];
                let s = sums[l] + p;
                let bb = s - sums[l];
                let e = (sums[l] - (s - bb)) + (p - bb);
                sums[l] = s;
                comps[l] += e + err + x[0][l] * y[1][l] + x[1][l] * y[0][l];
            }
            k += LANES;
        }
        let mut total = (0.0, 0.0);
        for l in 0..LANES {
            let (s, e) = two_sum(total.0, sums[l]);
            total = (s, total.1 + e + comps[l]);
        }
        for k in full..len {
            let p = xs[0][k] * ys[0][k];
            let err = ((xs[2][k] * ys[2][k] - p) + xs[2][k] * ys[3][k] + xs[3][k] * ys[2][k]) + xs[3][k] * ys[3][k];
            let (s, e) = two_sum(total.0, p);
            total = (s, total.1 + e + err + xs[0][k] * ys[1][k] + xs[1][k] * ys[0][k]);
        }
        total
    }
}

const LANES: usize = 8;

#[cfg(test)]
mod dd_tests {
    use super::*;

    #[test]
    fn error_free_dot_recovers_cancellation() {
        let a = DdVec::from_f64(&[1e16, 1.0, -1e16, 3.0, 0.1]);
        let b = DdVec::from_f64(&[1.0, 1.0, 1.0, 1.0, 10.0]);
        let (s, c) = a.dot(0, &b, 0, 5);
        assert_eq!(s + c, 5.0);
    }

    #[test]
    fn tails_contribute() {
        let mut a = DdVec::default();
        a.push(1.0, 1e-20);
        let b = DdVec::from_f64(&[2.0]);
        let (s, c) = a.dot(0, &b, 0, 1);
        assert_eq!(s, 2.0);
        assert!((c - 2e-20).abs() < 1e-35);
    }
}
