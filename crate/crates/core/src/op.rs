//! Lattice quadrature of the nonlocal operator and assembly of the
//! symmetric positive-definite system it induces on the active nodes.
//!
//! The pairwise weight W(k) of an integer offset k ≠ 0 approximates the
//! kernel mass of the cell centered at kh: a tensor Gauss–Legendre cell
//! average where the kernel varies fast (Chebyshev distance ≤ 2) and the
//! midpoint value K(kh) elsewhere. Offsets are cut at the Euclidean
//! radius D (default 4R) and the remaining mass enters the diagonal
//! exactly through the kernel tail integral. The singular cell at k = 0
//! carries no pair weight; its second-moment content is folded in as a
//! discrete Laplacean correction on the ±2eₐ stencil. The assembled
//! matrix is
//!
//! ```text
//! A_ij = −h^{2n} W(k_ij)                   (i ≠ j)
//! A_ii = h^{2n} c_tot + hⁿ (tail(D) + V_i),   c_tot = Σ_{0<|k|≤D/h} W(k),
//! ```
//!
//! an M-matrix: nonnegative off-lattice leakage and the strictly
//! positive tail make it strictly diagonally dominant, hence positive
//! definite, and monotone (maximum and comparison principles hold at the
//! matrix level). Matrix–vector products run either as a dense product
//! (small grids) or as an FFT convolution with the weight table (large
//! grids); both orderings are sequential and deterministic.

use std::sync::Arc;

use rustfft::num_complex::Complex;

use crate::fft::{next_smooth, NdFft};
use crate::grid::{DiscreteField, Grid};
use crate::kernel::{FractionalOrder, Kernel, Potential, PotentialKind};
use crate::quad::cell_average;
use crate::{Error, Result, Scalar};

/// Gauss–Legendre order of the near-origin cell averages.
const CELL_AVERAGE_ORDER: usize = 16;

/// Chebyshev radius up to which weights use cell averages instead of
/// midpoint values.
const CELL_AVERAGE_CHEB: i64 = 2;

/// Largest active-node count the automatic backend assembles densely.
const DENSE_AUTO_MAX_ACTIVE: usize = 2048;

/// Backend selection for the assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendChoice {
    /// Dense matrix below [`DENSE_AUTO_MAX_ACTIVE`] active nodes, FFT
    /// convolution above.
    #[default]
    Auto,
    ForceDense,
    ForceConv,
}

/// Assembly parameters: pair cutoff and backend choice.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyParams<S: Scalar> {
    /// Pair cutoff D as a multiple of the ball radius R (default 4).
    pub cutoff_factor: S,
    /// Absolute pair cutoff override; takes precedence over
    /// `cutoff_factor` when set. Exhaustion runs use this to keep one
    /// cutoff across growing domains so the operators agree on shared
    /// nodes exactly.
    pub pair_cutoff: Option<S>,
    pub backend: BackendChoice,
}

impl<S: Scalar> Default for AssemblyParams<S> {
    fn default() -> Self {
        Self {
            cutoff_factor: S::c(4.0),
            pair_cutoff: None,
            backend: BackendChoice::Auto,
        }
    }
}

impl<S: Scalar> AssemblyParams<S> {
    fn cutoff(&self, r_ball: S) -> S {
        self.pair_cutoff.unwrap_or(self.cutoff_factor * r_ball)
    }
}

/// Pairwise weights W(k) on the offset cube [−kc, kc]ⁿ together with the
/// scalar aggregates the assembled diagonal needs.
#[derive(Debug, Clone)]
pub struct WeightTable<S: Scalar> {
    n: usize,
    /// Stored cube radius: min(D/h, N_side − 1); offsets beyond it cannot
    /// connect two lattice nodes and only contribute to `c_tot`.
    kc: usize,
    /// Euclidean mask radius D/h in lattice steps.
    koff: usize,
    w: Vec<S>,
    /// Σ W(k) over the full Euclidean mask 0 < |k| ≤ koff.
    c_tot: S,
    /// Kernel mass beyond the cutoff, ∫_{|y| > koff·h} K(y) dy.
    tail_at_cutoff: S,
    /// Second-moment fold weight placed on the ±2eₐ stencil, zero when
    /// the table was built without the near-field correction.
    fold_weight: S,
}

type PointEval<'a, S> = Box<dyn Fn(&[S; 3]) -> S + 'a>;
type RadialIntegral<'a, S> = Box<dyn Fn(S) -> crate::Result<S> + 'a>;

/// Kernel data the table builder consumes: pointwise values plus the two
/// radial integrals that close the quadrature.
struct RadialSpec<'a, S: Scalar> {
    n: usize,
    eval: PointEval<'a, S>,
    tail_mass: RadialIntegral<'a, S>,
    near_second_moment: RadialIntegral<'a, S>,
}

impl<S: Scalar> WeightTable<S> {
    /// Table for an admissible kernel.
    pub fn for_kernel(
        kernel: &Kernel<S>,
        grid: &Grid<S>,
        params: &AssemblyParams<S>,
        include_fold: bool,
    ) -> Result<Self> {
        if kernel.order().n() != grid.n() {
            return Err(Error::Config(format!(
                "kernel dimension {} does not match grid dimension {}",
                kernel.order().n(),
                grid.n()
            )));
        }
        let spec = RadialSpec {
            n: grid.n(),
            eval: Box::new(move |y: &[S; 3]| {
                kernel
                    .eval(y)
                    .expect("cell quadrature nodes avoid the origin")
            }),
            tail_mass: Box::new(move |rho| kernel.tail_mass(rho)),
            near_second_moment: Box::new(move |rho| kernel.near_mass_second_moment(rho)),
        };
        Self::build(&spec, grid, params, include_fold)
    }

    /// Table for the unnormalized kernel |y|^{−n−2s}; its quadratic form
    /// is half the squared Gagliardo seminorm of the zero-extended field.
    pub fn raw_gagliardo(
        order: &FractionalOrder<S>,
        grid: &Grid<S>,
        params: &AssemblyParams<S>,
    ) -> Result<Self> {
        if order.n() != grid.n() {
            return Err(Error::Config(format!(
                "order dimension {} does not match grid dimension {}",
                order.n(),
                grid.n()
            )));
        }
        let n2s = S::from_count(order.n()) + order.two_s();
        let two_s = order.two_s();
        let omega = order.sphere_measure();
        let spec = RadialSpec {
            n: grid.n(),
            eval: Box::new(move |y: &[S; 3]| {
                let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
                r2.sqrt().powf(-n2s)
            }),
            tail_mass: Box::new(move |rho: S| Ok(omega * rho.powf(-two_s) / two_s)),
            near_second_moment: Box::new(move |rho: S| {
                let expo = S::c(2.0) - two_s;
                Ok(omega * rho.powf(expo) / expo)
            }),
        };
        Self::build(&spec, grid, params, true)
    }

    fn build(
        spec: &RadialSpec<'_, S>,
        grid: &Grid<S>,
        params: &AssemblyParams<S>,
        include_fold: bool,
    ) -> Result<Self> {
        let n = spec.n;
        let h = grid.h();
        let cutoff = params.cutoff(grid.r_ball());
        if !(cutoff > S::zero()) {
            return Err(Error::Config(format!(
                "pair cutoff must be positive, got {cutoff}"
            )));
        }
        let koff = (cutoff / h)
            .round()
            .to_f64()
            .map(|v| v as usize)
            .unwrap_or(0)
            .max(2);
        let kc = koff.min(grid.n_side() - 1).max(2);
        let side = 2 * kc + 1;
        let mut w = vec![S::zero(); side.pow(n as u32)];
        let koff2 = (koff as i64) * (koff as i64);
        let cube = 2 * koff as i64 + 1;
        let total = (cube as usize).pow(n as u32);
        let mut c_tot = S::zero();

        let mut k = [0i64; 3];
        for flat in 0..total {
            let mut rem = flat as i64;
            for d in (0..n).rev() {
                k[d] = rem % cube - koff as i64;
                rem /= cube;
            }
            // Canonical representative: first nonzero component positive;
            // the mirrored offset reuses the same weight bit for bit, so
            // the table is exactly even and the matrix exactly symmetric.
            let first_nonzero = (0..n).map(|d| k[d]).find(|&v| v != 0);
            let Some(lead) = first_nonzero else { continue };
            if lead < 0 {
                continue;
            }
            let norm2: i64 = (0..n).map(|d| k[d] * k[d]).sum();
            if norm2 > koff2 {
                continue;
            }
            let weight = Self::offset_weight(spec, &k, h, n);
            c_tot = c_tot + weight + weight;
            let cheb = (0..n).map(|d| k[d].abs()).max().unwrap_or(0);
            if cheb <= kc as i64 {
                w[Self::cube_index(&k, kc, n)] = weight;
                let neg = [-k[0], -k[1], -k[2]];
                w[Self::cube_index(&neg, kc, n)] = weight;
            }
        }

        let tail_at_cutoff = (spec.tail_mass)(S::from_count(koff) * h)?;
        let mut fold_weight = S::zero();
        if include_fold {
            // Second difference over step 2h carrying the singular-cell
            // second moment: −ν(h/2)/(2n)·Δu ≈ Σₐ fold·(2u − u₊ − u₋)
            // with fold = ν(h/2)/(8n h^{n+2}) in pair-weight units.
            let nu = (spec.near_second_moment)(h * S::c(0.5))?;
            fold_weight = nu
                / (S::c(8.0) * S::from_count(n) * h.powi(n as i32 + 2));
            for d in 0..n {
                for sign in [2i64, -2] {
                    let mut kk = [0i64; 3];
                    kk[d] = sign;
                    let idx = Self::cube_index(&kk, kc, n);
                    w[idx] = w[idx] + fold_weight;
                    c_tot = c_tot + fold_weight;
                }
            }
        }

        Ok(Self {
            n,
            kc,
            koff,
            w,
            c_tot,
            tail_at_cutoff,
            fold_weight,
        })
    }

    fn offset_weight(spec: &RadialSpec<'_, S>, k: &[i64; 3], h: S, n: usize) -> S {
        let mut center = [S::zero(); 3];
        for d in 0..n {
            center[d] = S::c(k[d] as f64) * h;
        }
        let cheb = (0..n).map(|d| k[d].abs()).max().unwrap_or(0);
        if cheb <= CELL_AVERAGE_CHEB {
            let mut f = |y: &[S; 3]| (spec.eval)(y);
            cell_average(&mut f, &center, h, n, CELL_AVERAGE_ORDER)
        } else {
            (spec.eval)(&center)
        }
    }

    fn cube_index(k: &[i64; 3], kc: usize, n: usize) -> usize {
        let side = 2 * kc + 1;
        let mut idx = 0usize;
        for &kd in &k[..n] {
            debug_assert!(kd.unsigned_abs() as usize <= kc);
            idx = idx * side + (kd + kc as i64) as usize;
        }
        idx
    }

    /// Weight of an offset; zero outside the stored cube or mask.
    pub fn weight(&self, k: &[i64; 3]) -> S {
        for &kd in &k[..self.n] {
            if kd.unsigned_abs() as usize > self.kc {
                return S::zero();
            }
        }
        self.w[Self::cube_index(k, self.kc, self.n)]
    }

    pub fn kc(&self) -> usize {
        self.kc
    }

    pub fn koff(&self) -> usize {
        self.koff
    }

    /// Σ W(k) over the full mask, the diagonal mass of the assembled
    /// operator before tail and potential.
    pub fn c_tot(&self) -> S {
        self.c_tot
    }

    /// Kernel mass beyond the cutoff radius koff·h.
    pub fn tail_at_cutoff(&self) -> S {
        self.tail_at_cutoff
    }

    pub fn fold_weight(&self) -> S {
        self.fold_weight
    }
}

/// FFT circular-convolution engine for one weight table on one lattice.
struct ConvEngine<S: Scalar> {
    n: usize,
    side: usize,
    fft: NdFft<S>,
    w_hat: Vec<Complex<S>>,
}

impl<S: Scalar> ConvEngine<S> {
    fn new(grid: &Grid<S>, table: &WeightTable<S>) -> Self {
        let n = grid.n();
        let n_side = grid.n_side();
        let kc = table.kc();
        // Periodic wrap-around cannot alias onto read positions when the
        // transform side reaches N_side + kc.
        let side = next_smooth(n_side + kc);
        let fft = NdFft::new(n, side);
        let mut buf = vec![Complex::new(S::zero(), S::zero()); fft.len()];
        let cube = 2 * kc as i64 + 1;
        let total = (cube as usize).pow(n as u32);
        let mut k = [0i64; 3];
        for flat in 0..total {
            let mut rem = flat as i64;
            for d in (0..n).rev() {
                k[d] = rem % cube - kc as i64;
                rem /= cube;
            }
            let wv = table.weight(&k);
            if wv == S::zero() {
                continue;
            }
            let mut pos = 0usize;
            for &kd in &k[..n] {
                let wrapped = ((kd % side as i64) + side as i64) % side as i64;
                pos = pos * side + wrapped as usize;
            }
            buf[pos] = Complex::new(wv, S::zero());
        }
        fft.forward(&mut buf);
        Self {
            n,
            side,
            fft,
            w_hat: buf,
        }
    }

    /// (W ⊛ u)_i = Σ_k W(k) u_{i+k} on active nodes, zero extension
    /// elsewhere; uses the evenness of W.
    fn convolve(&self, grid: &Grid<S>, u: &[S]) -> Vec<S> {
        let mut buf = vec![Complex::new(S::zero(), S::zero()); self.fft.len()];
        for (a, &flat) in grid.active().iter().enumerate() {
            let idx = grid.lattice_coords(flat as usize);
            let mut pos = 0usize;
            for &i in &idx[..self.n] {
                pos = pos * self.side + i;
            }
            buf[pos] = Complex::new(u[a], S::zero());
        }
        self.fft.forward(&mut buf);
        for (z, wh) in buf.iter_mut().zip(&self.w_hat) {
            *z = *z * *wh;
        }
        self.fft.inverse(&mut buf);
        let mut out = vec![S::zero(); grid.n_active()];
        for (a, &flat) in grid.active().iter().enumerate() {
            let idx = grid.lattice_coords(flat as usize);
            let mut pos = 0usize;
            for &i in &idx[..self.n] {
                pos = pos * self.side + i;
            }
            out[a] = buf[pos].re;
        }
        out
    }
}

enum Backend<S: Scalar> {
    Dense(Vec<S>),
    Conv(ConvEngine<S>),
}

/// Assembled symmetric positive-definite operator on the active nodes,
/// together with the unnormalized-kernel form used by the seminorm
/// diagnostics.
pub struct AssembledOperator<S: Scalar> {
    grid: Arc<Grid<S>>,
    kernel: Kernel<S>,
    potential: Potential<S>,
    v_samples: Vec<S>,
    table: WeightTable<S>,
    raw_engine: ConvEngine<S>,
    raw_diag: S,
    backend: Backend<S>,
    diag: Vec<S>,
    hn: S,
    h2n: S,
}

impl<S: Scalar> AssembledOperator<S> {
    /// Assembles the operator for a kernel, potential, and grid.
    ///
    /// Validates the potential against the kernel order, samples it by
    /// cell averages, builds the weight table with the near-field fold,
    /// and selects the backend.
    pub fn assemble(
        kernel: Kernel<S>,
        potential: Potential<S>,
        grid: Arc<Grid<S>>,
        params: &AssemblyParams<S>,
    ) -> Result<Self> {
        if kernel.order().n() != grid.n() {
            return Err(Error::Config(format!(
                "kernel dimension {} does not match grid dimension {}",
                kernel.order().n(),
                grid.n()
            )));
        }
        potential.validate_against(kernel.order())?;
        let v_samples = sample_potential(&potential, &grid)?;
        let table = WeightTable::for_kernel(&kernel, &grid, params, true)?;
        let raw_table = WeightTable::raw_gagliardo(kernel.order(), &grid, params)?;
        let raw_engine = ConvEngine::new(&grid, &raw_table);
        let hn = grid.h().powi(grid.n() as i32);
        let h2n = hn * hn;
        let raw_diag = h2n * raw_table.c_tot() + hn * raw_table.tail_at_cutoff();
        let m = grid.n_active();
        let mut diag = vec![S::zero(); m];
        for i in 0..m {
            diag[i] = h2n * table.c_tot() + hn * (table.tail_at_cutoff() + v_samples[i]);
        }
        let use_dense = match params.backend {
            BackendChoice::ForceDense => true,
            BackendChoice::ForceConv => false,
            BackendChoice::Auto => m <= DENSE_AUTO_MAX_ACTIVE,
        };
        let backend = if use_dense {
            let mut matrix = vec![S::zero(); m * m];
            for i in 0..m {
                let ci = grid.lattice_coords(grid.active()[i] as usize);
                for j in 0..m {
                    if i == j {
                        matrix[i * m + j] = diag[i];
                        continue;
                    }
                    let cj = grid.lattice_coords(grid.active()[j] as usize);
                    let mut k = [0i64; 3];
                    for d in 0..grid.n() {
                        k[d] = cj[d] as i64 - ci[d] as i64;
                    }
                    let wv = table.weight(&k);
                    if wv != S::zero() {
                        matrix[i * m + j] = -h2n * wv;
                    }
                }
            }
            Backend::Dense(matrix)
        } else {
            Backend::Conv(ConvEngine::new(&grid, &table))
        };
        Ok(Self {
            grid,
            kernel,
            potential,
            v_samples,
            table,
            raw_engine,
            raw_diag,
            backend,
            diag,
            hn,
            h2n,
        })
    }

    pub fn grid(&self) -> &Arc<Grid<S>> {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel<S> {
        &self.kernel
    }

    pub fn potential(&self) -> &Potential<S> {
        &self.potential
    }

    /// Cell-averaged potential values at the active nodes.
    pub fn v_samples(&self) -> &[S] {
        &self.v_samples
    }

    pub fn weight_table(&self) -> &WeightTable<S> {
        &self.table
    }

    /// Diagonal of the assembled matrix.
    pub fn diag(&self) -> &[S] {
        &self.diag
    }

    /// Cell volume hⁿ, the weight of the discrete L² pairing.
    pub fn hn(&self) -> S {
        self.hn
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.backend, Backend::Dense(_))
    }

    /// y = A u.
    pub fn matvec(&self, u: &[S]) -> Vec<S> {
        let m = self.grid.n_active();
        assert_eq!(u.len(), m, "matvec length mismatch");
        match &self.backend {
            Backend::Dense(matrix) => {
                let mut out = vec![S::zero(); m];
                for i in 0..m {
                    let row = &matrix[i * m..(i + 1) * m];
                    out[i] = row.iter().zip(u).map(|(&a, &b)| a * b).sum();
                }
                out
            }
            Backend::Conv(engine) => {
                let conv = engine.convolve(&self.grid, u);
                (0..m)
                    .map(|i| self.diag[i] * u[i] - self.h2n * conv[i])
                    .collect()
            }
        }
    }

    /// Applies A to a field on the same grid.
    pub fn apply(&self, u: &DiscreteField<S>) -> DiscreteField<S> {
        assert!(Arc::ptr_eq(u.grid(), &self.grid), "field grid mismatch");
        let out = self.matvec(u.values());
        DiscreteField::from_values(self.grid.clone(), out).expect("length preserved")
    }

    /// Quadratic form ⟨Au, u⟩.
    pub fn quadratic(&self, u: &[S]) -> S {
        self.matvec(u).iter().zip(u).map(|(&a, &b)| a * b).sum()
    }

    /// Inner product of the unnormalized-kernel form: for u = v this is
    /// half the squared Gagliardo seminorm of the zero-extended field.
    pub fn raw_form_inner(&self, u: &[S], v: &[S]) -> S {
        let conv = self.raw_engine.convolve(&self.grid, u);
        (0..u.len())
            .map(|i| (self.raw_diag * u[i] - self.h2n * conv[i]) * v[i])
            .sum()
    }

    /// Exterior weights w_i^ext = Σ_{k: i+k inactive} W(k): the mass each
    /// node couples to the zero extension. Quadratic cost in the node
    /// count; meant for small grids and identity tests.
    pub fn exterior_weights(&self) -> Vec<S> {
        let m = self.grid.n_active();
        let kc = self.table.kc() as i64;
        let n = self.grid.n();
        let mut out = vec![S::zero(); m];
        let cube = 2 * kc + 1;
        let total = (cube as usize).pow(n as u32);
        for (i, slot) in out.iter_mut().enumerate() {
            let mut interior = S::zero();
            let mut k = [0i64; 3];
            for flat in 0..total {
                let mut rem = flat as i64;
                for d in (0..n).rev() {
                    k[d] = rem % cube - kc;
                    rem /= cube;
                }
                if k[..n].iter().all(|&v| v == 0) {
                    continue;
                }
                if self.grid.neighbor(i, &k).is_some() {
                    interior = interior + self.table.weight(&k);
                }
            }
            *slot = self.table.c_tot() - interior;
        }
        out
    }

    /// Quadratic form recomputed from the pairwise representation
    ///
    /// ```text
    /// ⟨Au,u⟩ = ½ h^{2n} Σ_i Σ_k W(k)(u_i − u_{i+k})²
    ///        + h^{2n} Σ_i w_i^ext u_i² + hⁿ Σ_i (tail + V_i) u_i²,
    /// ```
    ///
    /// an independent route used to verify the assembly.
    pub fn pairwise_form(&self, u: &[S]) -> S {
        let m = self.grid.n_active();
        let kc = self.table.kc() as i64;
        let n = self.grid.n();
        let cube = 2 * kc + 1;
        let total = (cube as usize).pow(n as u32);
        let mut pair_sum = S::zero();
        let mut ext_sum = S::zero();
        let mut local_sum = S::zero();
        for i in 0..m {
            let mut interior = S::zero();
            let mut k = [0i64; 3];
            for flat in 0..total {
                let mut rem = flat as i64;
                for d in (0..n).rev() {
                    k[d] = rem % cube - kc;
                    rem /= cube;
                }
                if k[..n].iter().all(|&v| v == 0) {
                    continue;
                }
                let wv = self.table.weight(&k);
                if wv == S::zero() {
                    continue;
                }
                if let Some(j) = self.grid.neighbor(i, &k) {
                    interior = interior + wv;
                    let du = u[i] - u[j];
                    pair_sum = pair_sum + wv * du * du;
                }
            }
            let w_ext = self.table.c_tot() - interior;
            ext_sum = ext_sum + w_ext * u[i] * u[i];
            local_sum =
                local_sum + (self.table.tail_at_cutoff() + self.v_samples[i]) * u[i] * u[i];
        }
        self.h2n * (S::c(0.5) * pair_sum + ext_sum) + self.hn * local_sum
    }
}

/// Cell-averaged potential samples at the active nodes.
///
/// Constant and tabulated kinds sample directly; the inverse power
/// |x|^{−β} (β < n) is averaged by Gauss–Legendre per cell, with
/// recursive dyadic refinement toward the origin on cells whose closure
/// contains it, so the singular cell is integrated to full precision.
pub fn sample_potential<S: Scalar>(
    potential: &Potential<S>,
    grid: &Arc<Grid<S>>,
) -> Result<Vec<S>> {
    let m = grid.n_active();
    match potential.kind() {
        PotentialKind::Zero => Ok(vec![S::zero(); m]),
        PotentialKind::Constant(c) => Ok(vec![*c; m]),
        PotentialKind::Tabulated { values } => {
            if values.len() != m {
                return Err(Error::Config(format!(
                    "tabulated potential has {} values but the grid has {m} active nodes",
                    values.len()
                )));
            }
            Ok(values.clone())
        }
        PotentialKind::InversePower { beta } => {
            if !(*beta < S::from_count(grid.n())) {
                return Err(Error::Config(format!(
                    "inverse-power exponent beta = {beta} must be below the dimension for an integrable cell average"
                )));
            }
            let h = grid.h();
            let n = grid.n();
            let hn = h.powi(n as i32);
            let mut out = vec![S::zero(); m];
            for (a, slot) in out.iter_mut().enumerate() {
                let center = grid.active_coords(a);
                *slot = inverse_power_cube_integral(&center, h, *beta, n, 0) / hn;
            }
            Ok(out)
        }
    }
}

/// ∫_cube |x|^{−β} dx over the cube of the given side centered at
/// `center`. Cubes whose closure avoids the origin use one Gauss rule;
/// cubes containing it split dyadically, isolating the singular corner.
fn inverse_power_cube_integral<S: Scalar>(
    center: &[S; 3],
    side: S,
    beta: S,
    n: usize,
    depth: usize,
) -> S {
    let half = side * S::c(0.5);
    let slack = S::one() + S::c(1e-12);
    let contains_origin = (0..n).all(|d| center[d].abs() <= half * slack);
    if !contains_origin {
        let mut f = |x: &[S; 3]| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            r2.sqrt().powf(-beta)
        };
        return cell_average(&mut f, center, side, n, CELL_AVERAGE_ORDER)
            * side.powi(n as i32);
    }
    if depth >= 60 {
        // Remaining cube has side ≈ 2⁻⁶⁰·h and integral O(side^{n−β});
        // dropping it is far below the working precision.
        return S::zero();
    }
    let quarter = side * S::c(0.25);
    let children = 1usize << n;
    let mut acc = S::zero();
    for c in 0..children {
        let mut child = *center;
        for d in 0..n {
            let sign = if (c >> d) & 1 == 1 { S::one() } else { -S::one() };
            child[d] = center[d] + sign * quarter;
        }
        acc = acc + inverse_power_cube_integral(&child, half, beta, n, depth + 1);
    }
    acc
}

/// Collocation of the nonlocal part at every active node:
///
/// ```text
/// (L_K u)(x) ≈ ½ Σ_{0<|k|≤N} μ(u,x,kh) W(k) hⁿ + u(x)·tail(2R)
///            − ν(h/2)/(2n) · Σ_a (u(x+he_a) − 2u(x) + u(x−he_a))/h²
/// ```
///
/// with μ(u,x,y) = 2u(x) − u(x+y) − u(x−y) and zero extension outside
/// the ball. The cutoff 2R dominates R + |x| for every node, so beyond
/// it both translates vanish and the tail integral is exact. This is an
/// independent route to the same operator as [`AssembledOperator`]
/// (which folds the correction at step 2h); the two agree to the
/// discretization order.
pub fn apply_lk<S: Scalar>(kernel: &Kernel<S>, u: &DiscreteField<S>) -> Result<DiscreteField<S>> {
    let grid = u.grid().clone();
    if kernel.order().n() != grid.n() {
        return Err(Error::Config(format!(
            "kernel dimension {} does not match grid dimension {}",
            kernel.order().n(),
            grid.n()
        )));
    }
    let params = AssemblyParams::<S> {
        cutoff_factor: S::c(2.0),
        pair_cutoff: Some(S::c(2.0) * grid.r_ball()),
        backend: BackendChoice::Auto,
    };
    let table = WeightTable::for_kernel(kernel, &grid, &params, false)?;
    let engine = ConvEngine::new(&grid, &table);
    let conv = engine.convolve(&grid, u.values());
    let h = grid.h();
    let hn = h.powi(grid.n() as i32);
    let nu = kernel.near_mass_second_moment(h * S::c(0.5))?;
    let lap_coef = nu / (S::c(2.0) * S::from_count(grid.n()) * h * h);
    let mut out = vec![S::zero(); grid.n_active()];
    for i in 0..grid.n_active() {
        let ui = u.at(i);
        let nonlocal = hn * (table.c_tot() * ui - conv[i]) + table.tail_at_cutoff() * ui;
        let mut lap = S::zero();
        for d in 0..grid.n() {
            let mut e = [0i64; 3];
            e[d] = 1;
            let up = u.grid().neighbor(i, &e).map_or(S::zero(), |j| u.at(j));
            e[d] = -1;
            let dn = u.grid().neighbor(i, &e).map_or(S::zero(), |j| u.at(j));
            lap = lap + (up - S::c(2.0) * ui + dn);
        }
        out[i] = nonlocal - lap_coef * lap;
    }
    DiscreteField::from_values(grid, out)
}
