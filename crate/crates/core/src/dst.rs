//! Type-I discrete sine transform on top of a complex FFT.
//!
//! `X_k = Σ_{j=1}^{n} x_j sin(π j k / (n+1))`, `k = 1..=n`. Applying it twice
//! multiplies by `(n+1)/2`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dst1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dst1").field("n", &self.n).finish()
    }
}

impl Dst1 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, in place.
    pub fn transform(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n, "DST length mismatch");
        let m = 2 * (self.n + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (j, &v) in x.iter().enumerate() {
            buf[j + 1] = Complex64::new(v, 0.0);
            buf[m - j - 1] = Complex64::new(-v, 0.0);
        }
        self.fft.process(&mut buf);
        for (k, out) in x.iter_mut().enumerate() {
            *out = -0.5 * buf[k + 1].im;
        }
    }

    /// Inverse of [`Dst1::transform`].
    pub fn inverse(&self, x: &mut [f64]) {
        self.transform(x);
        let s = 2.0 / (self.n as f64 + 1.0);
        x.iter_mut().for_each(|v| *v *= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn naive(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (1..=n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| v * (PI * ((j + 1) * k) as f64 / (n as f64 + 1.0)).sin())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        for n in [2usize, 3, 7, 31, 100] {
            let x: Vec<f64> = (0..n).map(|j| ((j * 7 + 3) % 11) as f64 - 5.0).collect();
            let mut y = x.clone();
            Dst1::new(n).transform(&mut y);
            let z = naive(&x);
            for (a, b) in y.iter().zip(&z) {
                assert!((a - b).abs() < 1e-10 * (n as f64), "n={n}: {a} vs {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(x in proptest::collection::vec(-10.0f64..10.0, 2..80)) {
            let d = Dst1::new(x.len());
            let mut y = x.clone();
            d.transform(&mut y);
            d.inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
