//! Fourier-side norms of lattice fields: the zero extension is embedded
//! in a supercube roughly four times the ball diameter, transformed by
//! FFT, and the discrete transform is read as a quadrature of the
//! continuous Fourier integral,
//!
//! ```text
//! û(ξ_f) = hⁿ Σ_j u(x_j) e^{−i ξ_f · x_j},   ξ_f = 2π f / (m h),
//! ```
//!
//! with integer frequencies f per axis in [−m/2, m/2). Norms follow the
//! (2π)^{−n} ∫ |·|² dξ convention, so the Ḣ^s seminorm is
//! (2π)^{−n} Σ |ξ|^{2s} |û|² Δξⁿ with Δξ = 2π/(mh). The placement of the
//! field inside the supercube only changes phases and cancels in every
//! modulus, so no centering is needed.

use rustfft::num_complex::Complex;

use crate::fft::{next_smooth, NdFft};
use crate::grid::DiscreteField;
use crate::kernel::FractionalOrder;
use crate::Scalar;

/// Supercube points per axis: the smallest FFT-friendly size at or above
/// 4(N_side − 1), four times the lattice diameter so the periodization
/// error of the zero extension stays below the quadrature error.
pub fn supercube_points(n_side: usize) -> usize {
    next_smooth(4 * (n_side - 1))
}

struct Transform<S: Scalar> {
    n: usize,
    m: usize,
    h: S,
    hat: Vec<Complex<S>>,
}

fn transform<S: Scalar>(u: &DiscreteField<S>) -> Transform<S> {
    let grid = u.grid();
    let n = grid.n();
    let m = supercube_points(grid.n_side());
    let fft = NdFft::new(n, m);
    let mut buf = vec![Complex::new(S::zero(), S::zero()); fft.len()];
    for (a, &flat) in grid.active().iter().enumerate() {
        let idx = grid.lattice_coords(flat as usize);
        let mut pos = 0usize;
        for &i in &idx[..n] {
            pos = pos * m + i;
        }
        buf[pos] = Complex::new(u.at(a), S::zero());
    }
    fft.forward(&mut buf);
    let hn = grid.h().powi(n as i32);
    for z in buf.iter_mut() {
        *z = Complex::new(z.re * hn, z.im * hn);
    }
    Transform {
        n,
        m,
        h: grid.h(),
        hat: buf,
    }
}

impl<S: Scalar> Transform<S> {
    /// Δξ = 2π/(mh).
    fn dxi(&self) -> S {
        S::c(2.0) * S::PI() / (S::from_count(self.m) * self.h)
    }

    /// |ξ|² of the flat spectral index, with per-axis integer frequency
    /// folded into [−m/2, m/2).
    fn xi_norm_sq(&self, flat: usize) -> S {
        let m = self.m;
        let dxi = self.dxi();
        let mut rem = flat;
        let mut acc = S::zero();
        for _ in 0..self.n {
            let j = rem % m;
            rem /= m;
            let f = if j <= m / 2 { j as i64 } else { j as i64 - m as i64 };
            let xi = dxi * S::c(f as f64);
            acc = acc + xi * xi;
        }
        acc
    }

    /// (2π)^{−n} Σ g(|ξ|²)·w(ξ) Δξⁿ for a spectral weight applied to the
    /// coefficient product supplied by `w`.
    fn weighted_sum(&self, g: impl FnMut(usize) -> S) -> S {
        let dxi_n = self.dxi().powi(self.n as i32);
        let two_pi_n = (S::c(2.0) * S::PI()).powi(self.n as i32);
        let total: S = (0..self.hat.len()).map(g).sum();
        total * dxi_n / two_pi_n
    }
}

/// Squared spectral seminorm ‖u‖²_{Ḣ^s} of the zero extension.
pub fn hdot_norm_sq<S: Scalar>(u: &DiscreteField<S>, order: &FractionalOrder<S>) -> S {
    let t = transform(u);
    let s = order.s();
    t.weighted_sum(|f| {
        let z = t.hat[f];
        t.xi_norm_sq(f).powf(s) * (z.re * z.re + z.im * z.im)
    })
}

/// Squared L² norm recovered from the spectral side; for the discrete
/// transform this equals hⁿ Σ u² to rounding, which pins the
/// normalization conventions.
pub fn l2_norm_sq_spectral<S: Scalar>(u: &DiscreteField<S>) -> S {
    let t = transform(u);
    t.weighted_sum(|f| {
        let z = t.hat[f];
        z.re * z.re + z.im * z.im
    })
}

/// Spectral bilinear form (2π)^{−n} Σ |ξ|^{2s} û(ξ) conj(v̂(ξ)) Δξⁿ, the
/// multiplier route to the quadratic form of the pure fractional kernel.
pub fn multiplier_bilinear<S: Scalar>(
    u: &DiscreteField<S>,
    v: &DiscreteField<S>,
    order: &FractionalOrder<S>,
) -> S {
    let tu = transform(u);
    let tv = transform(v);
    let s = order.s();
    tu.weighted_sum(|f| {
        let a = tu.hat[f];
        let b = tv.hat[f];
        tu.xi_norm_sq(f).powf(s) * (a.re * b.re + a.im * b.im)
    })
}
