//! Small numeric helpers shared across modules.

/// Kahan (compensated) running sum. The 1/r^2 scaling in the operator
/// amplifies cancellation, so row sums go through this instead of a plain
/// accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum of an iterator.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Weighted inner product `sum_i w_i u_i v_i`.
pub fn weighted_dot(w: &[f64], u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), u.len());
    debug_assert_eq!(w.len(), v.len());
    let mut acc = KahanSum::new();
    for i in 0..w.len() {
        acc.add(w[i] * u[i] * v[i]);
    }
    acc.value()
}

/// Weighted L2 norm `(sum_i w_i u_i^2)^(1/2)`.
pub fn weighted_norm(w: &[f64], u: &[f64]) -> f64 {
    weighted_dot(w, u, u).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_handles_cancellation() {
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..10_000_000 {
            acc.add(1e-16);
        }
        let expected = 1.0 + 1e-9;
        assert!((acc.value() - expected).abs() < 1e-15);
    }

    #[test]
    fn weighted_dot_matches_direct() {
        let w = [0.5, 0.25, 0.25];
        let u = [1.0, 2.0, 3.0];
        let v = [4.0, 5.0, 6.0];
        assert_eq!(weighted_dot(&w, &u, &v), 0.5 * 4.0 + 0.25 * 10.0 + 0.25 * 18.0);
    }
}
