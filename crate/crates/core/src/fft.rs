//! Axis-by-axis complex FFT on n-dimensional row-major buffers, shared by
//! the convolution backend of the assembled operator and the spectral
//! diagnostics. Plans are cached per axis; all work is sequential so
//! repeated runs are byte-identical.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::Scalar;

/// Smallest integer ≥ `x` whose prime factors are all in {2, 3, 5}, the
/// sizes the FFT handles at O(m log m) without Bluestein fallback.
pub(crate) fn next_smooth(x: usize) -> usize {
    let mut candidate = x.max(1);
    loop {
        let mut v = candidate;
        for p in [2usize, 3, 5] {
            while v.is_multiple_of(p) {
                v /= p;
            }
        }
        if v == 1 {
            return candidate;
        }
        candidate += 1;
    }
}

/// Cached forward/inverse FFT plans for an n-dimensional row-major box
/// (axis 0 slowest). All axes share one length.
pub(crate) struct NdFft<S: Scalar> {
    n_axes: usize,
    side: usize,
    forward: Arc<dyn Fft<S>>,
    inverse: Arc<dyn Fft<S>>,
}

impl<S: Scalar> NdFft<S> {
    pub(crate) fn new(n_axes: usize, side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_axes,
            side,
            forward: planner.plan_fft(side, FftDirection::Forward),
            inverse: planner.plan_fft(side, FftDirection::Inverse),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.side.pow(self.n_axes as u32)
    }

    fn transform(&self, data: &mut [Complex<S>], plan: &Arc<dyn Fft<S>>) {
        debug_assert_eq!(data.len(), self.len());
        let m = self.side;
        let mut line = vec![Complex::new(S::zero(), S::zero()); m];
        for axis in 0..self.n_axes {
            let inner: usize = m.pow((self.n_axes - 1 - axis) as u32);
            let outer: usize = m.pow(axis as u32);
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * m * inner + i;
                    for j in 0..m {
                        line[j] = data[base + j * inner];
                    }
                    plan.process(&mut line);
                    for j in 0..m {
                        data[base + j * inner] = line[j];
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT along every axis.
    pub(crate) fn forward(&self, data: &mut [Complex<S>]) {
        self.transform(data, &self.forward.clone());
    }

    /// Inverse DFT along every axis, normalized by 1/len so that
    /// inverse(forward(x)) = x.
    pub(crate) fn inverse(&self, data: &mut [Complex<S>]) {
        self.transform(data, &self.inverse.clone());
        let scale = S::one() / S::from_count(self.len());
        for z in data.iter_mut() {
            *z = Complex::new(z.re * scale, z.im * scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_smooth(1), 1);
        assert_eq!(next_smooth(257), 270);
        assert_eq!(next_smooth(64), 64);
        assert_eq!(next_smooth(65), 72);
    }

    #[test]
    fn roundtrip_2d_recovers_input() {
        let fft = NdFft::<f64>::new(2, 12);
        let mut data: Vec<Complex<f64>> = (0..fft.len())
            .map(|i| Complex::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let original = data.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&original) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    /// Circular convolution with a Kronecker delta shifted by k must shift
    /// the signal by k; this pins the sign and orientation conventions
    /// the operator backend relies on.
    #[test]
    fn delta_convolution_shifts() {
        let m = 8;
        let fft = NdFft::<f64>::new(1, m);
        let mut u: Vec<Complex<f64>> = (0..m).map(|i| Complex::new(i as f64, 0.0)).collect();
        let mut w = vec![Complex::new(0.0, 0.0); m];
        w[3] = Complex::new(1.0, 0.0);
        fft.forward(&mut u);
        fft.forward(&mut w);
        let mut prod: Vec<Complex<f64>> = u.iter().zip(&w).map(|(a, b)| a * b).collect();
        fft.inverse(&mut prod);
        // (w ⊛ u)_i = u_{(i−3) mod 8}.
        for (i, z) in prod.iter().enumerate() {
            let expect = ((i + m - 3) % m) as f64;
            assert_relative_eq!(z.re, expect, epsilon = 1e-12);
        }
    }
}
