//! Cubic spline with not-a-knot end conditions over a fixed knot vector.
//!
//! The tridiagonal factorisation depends only on the knots, so one
//! [`SplineBasis`] is reused for every antenna/subcarrier series. Values are
//! complex; since the spline is linear in the data this is the same as
//! splining real and imaginary parts independently.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub enum SplineError {
    TooFewKnots(usize),
    NotIncreasing,
}

#[derive(Debug, Clone)]
pub struct SplineBasis {
    knots: Vec<f64>,
    h: Vec<f64>,
    // Thomas factorisation of the reduced system over M_1..M_{n-2}
    lower: Vec<f64>,
    cprime: Vec<f64>,
    denom: Vec<f64>,
}

impl SplineBasis {
    pub fn new(knots: &[f64]) -> Result<Self, SplineError> {
        let n = knots.len();
        if n < 4 {
            return Err(SplineError::TooFewKnots(n));
        }
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        if h.iter().any(|&d| !(d > 0.0)) {
            return Err(SplineError::NotIncreasing);
        }
        let m = n - 2;
        let mut diag = vec![0.0; m];
        let mut lower = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for r in 0..m {
            let i = r + 1;
            lower[r] = h[i - 1];
            diag[r] = 2.0 * (h[i - 1] + h[i]);
            upper[r] = h[i];
        }
        // not-a-knot: M_0 = (1 + h0/h1) M_1 - (h0/h1) M_2
        let (h0, h1) = (h[0], h[1]);
        diag[0] += h0 * (1.0 + h0 / h1);
        upper[0] -= h0 * h0 / h1;
        lower[0] = 0.0;
        // and M_{n-1} = (1 + a/b) M_{n-2} - (a/b) M_{n-3}, a = h_{n-2}, b = h_{n-3}
        let (a, b) = (h[n - 2], h[n - 3]);
        diag[m - 1] += a * (1.0 + a / b);
        // n >= 4 guarantees at least two rows, so rows 0 and m-1 are distinct
        lower[m - 1] -= a * a / b;
        upper[m - 1] = 0.0;

        let mut cprime = vec![0.0; m];
        let mut denom = vec![0.0; m];
        denom[0] = diag[0];
        cprime[0] = upper[0] / denom[0];
        for r in 1..m {
            denom[r] = diag[r] - lower[r] * cprime[r - 1];
            cprime[r] = upper[r] / denom[r];
        }
        Ok(Self { knots: knots.to_vec(), h, lower, cprime, denom })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Second derivatives at the knots for data `y`.
    pub fn second_derivatives(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.knots.len();
        assert_eq!(y.len(), n, "data length must match knot count");
        let h = &self.h;
        let m = n - 2;
        let slope = |i: usize| (y[i + 1] - y[i]) / h[i];
        let mut d = vec![Complex64::new(0.0, 0.0); m];
        for r in 0..m {
            let i = r + 1;
            d[r] = (slope(i) - slope(i - 1)) * 6.0;
        }
        d[0] /= self.denom[0];
        for r in 1..m {
            d[r] = (d[r] - d[r - 1] * self.lower[r]) / self.denom[r];
        }
        for r in (0..m - 1).rev() {
            let next = d[r + 1];
            d[r] -= next * self.cprime[r];
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        out[1..n - 1].copy_from_slice(&d);
        let (h0, h1) = (h[0], h[1]);
        out[0] = out[1] * (1.0 + h0 / h1) - out[2] * (h0 / h1);
        let (a, b) = (h[n - 2], h[n - 3]);
        out[n - 1] = out[n - 2] * (1.0 + a / b) - out[n - 3] * (a / b);
        out
    }

    /// Evaluation weights at `t`: returns the interval index and the
    /// coefficients for (y_i, y_{i+1}, M_i, M_{i+1}). `t` is clamped to the
    /// knot span.
    pub fn weights(&self, t: f64) -> (usize, [f64; 4]) {
        let n = self.knots.len();
        let t = t.clamp(self.knots[0], self.knots[n - 1]);
        let i = (self.knots.partition_point(|&k| k <= t).max(1) - 1).min(n - 2);
        let h = self.h[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        let h2 = h * h / 6.0;
        (i, [a, b, (a * a * a - a) * h2, (b * b * b - b) * h2])
    }

    pub fn eval(&self, y: &[Complex64], m2: &[Complex64], t: f64) -> Complex64 {
        let (i, w) = self.weights(t);
        y[i] * w[0] + y[i + 1] * w[1] + m2[i] * w[2] + m2[i + 1] * w[3]
    }
}
