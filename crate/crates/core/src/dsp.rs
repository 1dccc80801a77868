//! Transforms and phase utilities shared by the stitcher and the metrics.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Wraps an angle into (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x - two_pi * (x / two_pi).round();
    if y <= -PI {
        y += two_pi;
    } else if y > PI {
        y -= two_pi;
    }
    y
}

/// Unwraps a phase sequence by removing jumps larger than π between
/// consecutive samples.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phases {
        if let Some(q) = prev {
            let d = p - q;
            if d > PI {
                offset -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
            } else if d < -PI {
                offset += 2.0 * PI * ((-d + PI) / (2.0 * PI)).floor();
            }
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}

/// Normalised inverse DFT: `h[k] = 1/N Σ_n x[n] e^{+j2πkn/N}`.
///
/// Uses a radix-2 FFT when the length is a power of two and a direct sum
/// otherwise.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    idft_padded(x, x.len())
}

/// Inverse DFT of `x` zero-padded to `size` points, normalised by `size`.
pub fn idft_padded(x: &[Complex64], size: usize) -> Vec<Complex64> {
    assert!(size >= x.len(), "transform size smaller than input");
    if size == 0 {
        return Vec::new();
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    buf[..x.len()].copy_from_slice(x);
    if size.is_power_of_two() {
        fft_in_place(&mut buf, true);
    } else {
        buf = direct_dft(&buf, true);
    }
    let scale = 1.0 / size as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

fn direct_dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    // twiddle table indexed by (k*j) mod n keeps the phase argument small
    let table: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(1.0, sign * 2.0 * PI * i as f64 / n as f64))
        .collect();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut idx = 0usize;
            for v in x {
                acc += v * table[idx];
                idx += k;
                if idx >= n {
                    idx -= n;
                }
            }
            acc
        })
        .collect()
}

/// Iterative radix-2 FFT, unnormalised. `inverse` selects the +j kernel.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = sign * 2.0 * PI / len as f64;
        let twiddles: Vec<Complex64> = (0..half).map(|k| Complex64::from_polar(1.0, step * k as f64)).collect();
        for chunk in buf.chunks_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for k in 0..half {
                let t = hi[k] * twiddles[k];
                hi[k] = lo[k] - t;
                lo[k] += t;
            }
        }
        len <<= 1;
    }
}

/// Index of the largest magnitude; ties resolve to the smallest index.
pub fn argmax_magnitude(x: &[Complex64]) -> Option<usize> {
    argmax_by(x.iter().map(|v| v.norm_sqr()))
}

pub(crate) fn argmax_by(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Maps a natural-order DFT index into the symmetric window [-N/2, N/2).
pub fn signed_index(k: usize, n: usize) -> isize {
    let half = n / 2;
    if k >= n - half {
        k as isize - n as isize
    } else {
        k as isize
    }
}
