//! Admissible kernels K of fractional order s, their normalization
//! constant c_{n,s}, the Fourier multiplier m(ξ) = ∫(1−cos⟨y,ξ⟩)K(y)dy,
//! and the tail / near-second-moment integrals that close the lattice
//! quadrature of the operator. Also defines the nonnegative potentials V.
//!
//! Every kernel is squeezed between λ·c_{n,s}|y|^{−n−2s} and
//! Λ·c_{n,s}|y|^{−n−2s}, where c_{n,s} normalizes the Fourier symbol of
//! the pure fractional kernel to exactly |ξ|^{2s}:
//!
//! ```text
//! c_{n,s} · ∫ (1 − cos ξ₁) / |ξ|^{n+2s} dξ = 1.
//! ```
//!
//! The constant is computed here from that defining integral by a
//! radial–angular quadrature (radial part reduced to the universal
//! profile J_s = ∫₀^∞ (1−cos u) u^{−1−2s} du, itself evaluated
//! numerically); closed forms enter only as test oracles.

use crate::quad::{integrate_adaptive, integrate_gl};
use crate::{Error, Result, Scalar};

/// Relative tolerance and refinement budget for the kernel quadratures.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureParams<S: Scalar> {
    /// Requested relative error of the result.
    pub rel_tol: S,
    /// Maximum bisection depth of the adaptive angular quadratures.
    pub max_depth: usize,
}

impl<S: Scalar> Default for QuadratureParams<S> {
    fn default() -> Self {
        Self {
            rel_tol: S::c(1e-6),
            max_depth: 40,
        }
    }
}

/// Fractional order s ∈ (0,1) in dimension n ∈ {2,3}.
///
/// Embedding-dependent routines need 2s < n, which holds automatically
/// for n ≥ 2; [`FractionalOrder::critical_exponent`] asserts it anyway.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FractionalOrder<S: Scalar> {
    n: usize,
    s: S,
}

impl<S: Scalar> FractionalOrder<S> {
    pub fn new(n: usize, s: S) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return Err(Error::Config(format!(
                "dimension n must be 2 or 3, got {n}"
            )));
        }
        if !(s > S::zero() && s < S::one()) {
            return Err(Error::Config(format!(
                "fractional order s must lie in the open interval (0, 1), got {s}"
            )));
        }
        Ok(Self { n, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> S {
        self.s
    }

    /// 2s as a scalar, the homogeneity degree of the multiplier.
    pub fn two_s(&self) -> S {
        S::c(2.0) * self.s
    }

    /// Decay exponent n − 2s of the fundamental solution.
    pub fn decay_exponent(&self) -> S {
        S::from_count(self.n) - self.two_s()
    }

    /// Critical Sobolev exponent 2n/(n−2s); requires 2s < n, which is
    /// automatic for n ≥ 2 and asserted here.
    pub fn critical_exponent(&self) -> S {
        let n = S::from_count(self.n);
        assert!(self.two_s() < n, "embedding requires 2s < n");
        S::c(2.0) * n / (n - self.two_s())
    }

    /// Surface measure ω_{n−1} of the unit sphere S^{n−1}.
    pub fn sphere_measure(&self) -> S {
        match self.n {
            2 => S::c(2.0) * S::PI(),
            3 => S::c(4.0) * S::PI(),
            _ => unreachable!(),
        }
    }
}

/// Alternating series P(x) = ∫₀^x (1−cos u) u^{−1−2s} du for x ∈ [0,1]:
///
/// ```text
/// P(x) = Σ_{k≥1} (−1)^{k+1} x^{2k−2s} / ((2k)! (2k−2s)).
/// ```
///
/// The factorial denominator makes the series converge in a dozen terms
/// on [0,1]; this is the Taylor-corrected near part of the radial
/// profile, exact to machine precision.
pub fn near_radial_profile<S: Scalar>(x: S, s: S) -> S {
    if x <= S::zero() {
        return S::zero();
    }
    debug_assert!(x <= S::one() + S::epsilon(), "series is used on [0,1] only");
    let two_s = S::c(2.0) * s;
    let mut sum = S::zero();
    let mut factorial = S::one();
    let mut sign = S::one();
    for k in 1..=24 {
        let two_k = S::from_count(2 * k);
        factorial = factorial * (two_k - S::one()) * two_k;
        let term = sign * x.powf(two_k - two_s) / (factorial * (two_k - two_s));
        sum = sum + term;
        sign = -sign;
        if term.abs() <= S::epsilon() * sum.abs() {
            break;
        }
    }
    sum
}

/// Universal radial profile J_s = ∫₀^∞ (1−cos u) u^{−1−2s} du, computed
/// numerically: series on [0,1], Gauss–Legendre half-π panels on [1,A],
/// and a four-term integration-by-parts asymptotic tail beyond A ≈ 200π.
pub fn radial_profile<S: Scalar>(s: S) -> S {
    let two_s = S::c(2.0) * s;
    let a_exp = S::one() + two_s;
    // ∫_1^∞ u^{-1-2s} du = 1/(2s); subtract the oscillatory cosine part.
    let mut cos_part = S::zero();
    let panels = 400usize;
    let half_pi = S::PI() * S::c(0.5);
    for p in 0..panels {
        let lo = S::one().max(S::from_count(p) * half_pi);
        let hi = S::from_count(p + 1) * half_pi;
        if hi <= lo {
            continue;
        }
        let mut f = |u: S| u.cos() * u.powf(-a_exp);
        cos_part = cos_part + integrate_gl(&mut f, lo, hi, 16);
    }
    let big_a = S::from_count(panels) * half_pi;
    // ∫_A^∞ cos(u) u^{-a} du ≈ −sinA·A^{−a} + a·cosA·A^{−a−1}
    //                          + a(a+1)·sinA·A^{−a−2} − a(a+1)(a+2)·cosA·A^{−a−3}
    // with remainder O(A^{−a−4}) ≈ 1e−14 at A = 200π.
    let (sin_a, cos_a) = (big_a.sin(), big_a.cos());
    let a1 = a_exp;
    let a2 = a1 * (a_exp + S::one());
    let a3 = a2 * (a_exp + S::c(2.0));
    let tail = -sin_a * big_a.powf(-a_exp) + a1 * cos_a * big_a.powf(-a_exp - S::one())
        + a2 * sin_a * big_a.powf(-a_exp - S::c(2.0))
        - a3 * cos_a * big_a.powf(-a_exp - S::c(3.0));
    near_radial_profile(S::one(), s) + S::one() / two_s - (cos_part + tail)
}

/// Angular moment ∫₀^π |cos α|^{2s} sin^{n−2}α dα. The |cos|^{2s} kink at
/// π/2 is an algebraic singularity of the derivative, handled by
/// splitting there and integrating each half adaptively.
fn angular_moment<S: Scalar>(n: usize, s: S, params: &QuadratureParams<S>) -> Result<(S, S)> {
    let two_s = S::c(2.0) * s;
    let half_pi = S::PI() * S::c(0.5);
    let mut f = |alpha: S| {
        let c = alpha.cos().abs();
        let base = c.powf(two_s);
        match n {
            2 => base,
            3 => base * alpha.sin(),
            _ => unreachable!(),
        }
    };
    let (left, e1) = integrate_adaptive(&mut f, S::zero(), half_pi, params.rel_tol, params.max_depth)?;
    let (right, e2) = integrate_adaptive(&mut f, half_pi, S::PI(), params.rel_tol, params.max_depth)?;
    Ok((left + right, e1.max(e2)))
}

/// Normalization constant c_{n,s} from the defining integral
/// ∫(1−cos ξ₁)/|ξ|^{n+2s} dξ = 1/c_{n,s}, reduced to the radial profile
/// J_s times the angular moment over the sphere:
///
/// ```text
/// 1/c_{n,s} = J_s · ω_{n−2} · ∫₀^π |cos α|^{2s} sin^{n−2}α dα
/// ```
///
/// with ω₀ = 2 (two half-lines of S⁰ directions) and ω₁ = 2π. Returns the
/// constant and the achieved relative error estimate.
pub fn normalization_constant<S: Scalar>(
    order: &FractionalOrder<S>,
    params: &QuadratureParams<S>,
) -> Result<(S, S)> {
    let omega_low = match order.n {
        2 => S::c(2.0),
        3 => S::c(2.0) * S::PI(),
        _ => unreachable!(),
    };
    let j = radial_profile(order.s);
    let (ang, achieved) = angular_moment(order.n, order.s, params)?;
    let c = (j * omega_low * ang).recip();
    if !(c.is_finite() && c > S::zero()) {
        return Err(Error::QuadratureNonConvergence {
            achieved: f64::NAN,
            required: params.rel_tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((c, achieved))
}

/// Kernel family: the isotropic power law, or a bounded symmetric angular
/// modulation interpolating the ellipticity bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum KernelFamily {
    /// K(y) = c_{n,s} |y|^{−n−2s}, Fourier symbol exactly |ξ|^{2s}.
    PureFractional,
    /// K(y) = a(y/|y|) · c_{n,s} |y|^{−n−2s} with the even angular factor
    /// a(θ) = λ + (Λ−λ)θ₁² ∈ [λ, Λ].
    Modulated,
}

/// Admissible kernel with cached normalization constant.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Kernel<S: Scalar> {
    order: FractionalOrder<S>,
    family: KernelFamily,
    lambda_lower: S,
    lambda_upper: S,
    /// Cached c_{n,s}, computed by quadrature at construction.
    c_ns: S,
    /// Cached radial profile J_s.
    j_s: S,
}

impl<S: Scalar> Kernel<S> {
    /// Pure fractional kernel (ellipticity bounds λ = Λ = 1).
    pub fn pure_fractional(order: FractionalOrder<S>) -> Result<Self> {
        Self::build(order, KernelFamily::PureFractional, S::one(), S::one())
    }

    /// Modulated kernel with angular factor ranging over [λ, Λ].
    pub fn modulated(order: FractionalOrder<S>, lambda_lower: S, lambda_upper: S) -> Result<Self> {
        Self::build(order, KernelFamily::Modulated, lambda_lower, lambda_upper)
    }

    fn build(
        order: FractionalOrder<S>,
        family: KernelFamily,
        lambda_lower: S,
        lambda_upper: S,
    ) -> Result<Self> {
        if !(lambda_lower > S::zero() && lambda_lower.is_finite()) {
            return Err(Error::Config(format!(
                "ellipticity lower bound lambda must be positive, got {lambda_lower}"
            )));
        }
        if !(lambda_upper >= lambda_lower && lambda_upper.is_finite()) {
            return Err(Error::Config(format!(
                "ellipticity upper bound Lambda must satisfy Lambda >= lambda, got {lambda_upper}"
            )));
        }
        // The cached constant is computed once per kernel, so it gets a
        // near-machine tolerance instead of the default evaluation one.
        let tight = QuadratureParams {
            rel_tol: (S::epsilon() * S::c(100.0)).max(S::c(1e-12)),
            max_depth: 48,
        };
        let (c_ns, _) = normalization_constant(&order, &tight)?;
        let j_s = radial_profile(order.s);
        Ok(Self {
            order,
            family,
            lambda_lower,
            lambda_upper,
            c_ns,
            j_s,
        })
    }

    pub fn order(&self) -> &FractionalOrder<S> {
        &self.order
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lambda_lower(&self) -> S {
        self.lambda_lower
    }

    pub fn lambda_upper(&self) -> S {
        self.lambda_upper
    }

    /// Cached normalization constant c_{n,s}.
    pub fn normalization(&self) -> S {
        self.c_ns
    }

    /// Cached radial profile J_s.
    pub fn radial_profile_value(&self) -> S {
        self.j_s
    }

    /// Angular factor a(θ) for a unit direction θ; 1 for the pure family.
    pub fn angular_factor(&self, theta: &[S; 3]) -> S {
        match self.family {
            KernelFamily::PureFractional => S::one(),
            KernelFamily::Modulated => {
                self.lambda_lower + (self.lambda_upper - self.lambda_lower) * theta[0] * theta[0]
            }
        }
    }

    /// K(y); errors at y = 0 where the kernel is singular.
    pub fn eval(&self, y: &[S; 3]) -> Result<S> {
        let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        if r2 == S::zero() {
            return Err(Error::KernelSingularAtOrigin);
        }
        let r = r2.sqrt();
        let theta = [y[0] / r, y[1] / r, y[2] / r];
        let n2s = S::from_count(self.order.n) + self.order.two_s();
        Ok(self.angular_factor(&theta) * self.c_ns * r.powf(-n2s))
    }

    /// Fourier multiplier m(ξ) = ∫(1−cos⟨y,ξ⟩)K(y)dy by adaptive angular
    /// quadrature of the radial profile, split at δ = min(1, 1/|ξ|): the
    /// near part |y| < δ uses the Taylor-corrected series, the far part
    /// its complement |t|^{2s}(J_s − P(δ|t|)). Satisfies m(0) = 0 and
    /// λ|ξ|^{2s} ≤ m(ξ) ≤ Λ|ξ|^{2s} within quadrature tolerance.
    pub fn multiplier(&self, xi: &[S; 3], params: &QuadratureParams<S>) -> Result<S> {
        let xi_norm = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        if !xi_norm.is_finite() {
            return Err(Error::Domain("multiplier requires finite xi".into()));
        }
        if xi_norm == S::zero() {
            return Ok(S::zero());
        }
        let delta = S::one().min(xi_norm.recip());
        let two_s = self.order.two_s();
        let s = self.order.s();
        // Radial factor for a direction with projection t = ⟨θ, ξ⟩:
        // near + far parts of ∫₀^∞ (1−cos(rt)) r^{−1−2s} dr.
        let radial = |t: S| -> S {
            let t_abs = t.abs();
            if t_abs == S::zero() {
                return S::zero();
            }
            let near = t_abs.powf(two_s) * near_radial_profile(delta * t_abs, s);
            let far = t_abs.powf(two_s) * (self.j_s - near_radial_profile(delta * t_abs, s));
            near + far
        };
        let angular = match self.order.n {
            2 => {
                // Plane frame aligned with ξ; kinks of |t|^{2s} at the two
                // directions orthogonal to ξ split the circle in quarters.
                let e = [xi[0] / xi_norm, xi[1] / xi_norm];
                let quarter = S::PI() * S::c(0.5);
                let mut total = S::zero();
                let mut f = |phi: S| {
                    let (cp, sp) = (phi.cos(), phi.sin());
                    let theta = [cp * e[0] - sp * e[1], cp * e[1] + sp * e[0], S::zero()];
                    self.angular_factor(&theta) * radial(xi_norm * cp)
                };
                for q in 0..4 {
                    let lo = quarter * S::from_count(q);
                    let hi = quarter * S::from_count(q + 1);
                    let (v, _) =
                        integrate_adaptive(&mut f, lo, hi, params.rel_tol * S::c(0.5), params.max_depth)?;
                    total = total + v;
                }
                total
            }
            3 => {
                let frame = orthonormal_frame(xi, xi_norm);
                let mut f = |alpha: S| {
                    let (ca, sa) = (alpha.cos(), alpha.sin());
                    // Azimuthal average of the angular factor at polar
                    // angle α, by trapezoid doubling (periodic, smooth).
                    let mean_a = self.azimuthal_mean(&frame, ca, sa, params.rel_tol);
                    sa * mean_a * radial(xi_norm * ca)
                };
                let half_pi = S::PI() * S::c(0.5);
                let (left, _) = integrate_adaptive(
                    &mut f,
                    S::zero(),
                    half_pi,
                    params.rel_tol * S::c(0.5),
                    params.max_depth,
                )?;
                let (right, _) = integrate_adaptive(
                    &mut f,
                    half_pi,
                    S::PI(),
                    params.rel_tol * S::c(0.5),
                    params.max_depth,
                )?;
                left + right
            }
            _ => unreachable!(),
        };
        Ok(self.c_ns * angular)
    }

    /// Azimuthal mean (1/2π)·∫₀^{2π} a(θ(α,β)) dβ at fixed polar angle,
    /// multiplied by 2π (the measure), by trapezoid rule with doubling.
    fn azimuthal_mean(&self, frame: &[[S; 3]; 3], cos_a: S, sin_a: S, rel_tol: S) -> S {
        if matches!(self.family, KernelFamily::PureFractional) {
            return S::c(2.0) * S::PI();
        }
        let two_pi = S::c(2.0) * S::PI();
        let eval = |m: usize| -> S {
            let mut acc = S::zero();
            for jj in 0..m {
                let beta = two_pi * S::from_count(jj) / S::from_count(m);
                let (cb, sb) = (beta.cos(), beta.sin());
                let theta = [
                    cos_a * frame[2][0] + sin_a * (cb * frame[0][0] + sb * frame[1][0]),
                    cos_a * frame[2][1] + sin_a * (cb * frame[0][1] + sb * frame[1][1]),
                    cos_a * frame[2][2] + sin_a * (cb * frame[0][2] + sb * frame[1][2]),
                ];
                acc = acc + self.angular_factor(&theta);
            }
            acc * two_pi / S::from_count(m)
        };
        let mut m = 8;
        let mut prev = eval(m);
        for _ in 0..8 {
            m *= 2;
            let next = eval(m);
            if (next - prev).abs() <= rel_tol * prev.abs().max(S::one()) {
                return next;
            }
            prev = next;
        }
        prev
    }

    /// Integral of the angular factor over the unit sphere. Closed form
    /// ω_{n−1} for the pure family; adaptive quadrature for modulated.
    fn sphere_angular_integral(&self, params: &QuadratureParams<S>) -> Result<S> {
        match self.family {
            KernelFamily::PureFractional => Ok(self.order.sphere_measure()),
            KernelFamily::Modulated => match self.order.n {
                2 => {
                    let mut f = |phi: S| {
                        let theta = [phi.cos(), phi.sin(), S::zero()];
                        self.angular_factor(&theta)
                    };
                    let (v, _) = integrate_adaptive(
                        &mut f,
                        S::zero(),
                        S::c(2.0) * S::PI(),
                        params.rel_tol,
                        params.max_depth,
                    )?;
                    Ok(v)
                }
                3 => {
                    let frame = [
                        [S::one(), S::zero(), S::zero()],
                        [S::zero(), S::one(), S::zero()],
                        [S::zero(), S::zero(), S::one()],
                    ];
                    let mut f = |alpha: S| {
                        let (ca, sa) = (alpha.cos(), alpha.sin());
                        sa * self.azimuthal_mean(&frame, ca, sa, params.rel_tol)
                    };
                    let (v, _) = integrate_adaptive(
                        &mut f,
                        S::zero(),
                        S::PI(),
                        params.rel_tol,
                        params.max_depth,
                    )?;
                    Ok(v)
                }
                _ => unreachable!(),
            },
        }
    }

    /// Exterior mass ∫_{|y|>ρ} K(y) dy. Pure family in closed form
    /// c_{n,s}·ω_{n−1}·ρ^{−2s}/(2s); modulated via the angular quadrature
    /// times the same radial factor.
    pub fn tail_mass(&self, rho: S) -> Result<S> {
        if !(rho > S::zero()) {
            return Err(Error::Precondition(format!(
                "tail_mass requires rho > 0, got {rho}"
            )));
        }
        let two_s = self.order.two_s();
        let angular = self.sphere_angular_integral(&QuadratureParams::default())?;
        Ok(self.c_ns * angular * rho.powf(-two_s) / two_s)
    }

    /// Interior second moment ∫_{|y|<ρ} |y|² K(y) dy, finite since
    /// 2 − 2s > 0. Pure family c_{n,s}·ω_{n−1}·ρ^{2−2s}/(2−2s).
    pub fn near_mass_second_moment(&self, rho: S) -> Result<S> {
        if !(rho > S::zero()) {
            return Err(Error::Precondition(format!(
                "near_mass_second_moment requires rho > 0, got {rho}"
            )));
        }
        let expo = S::c(2.0) - self.order.two_s();
        let angular = self.sphere_angular_integral(&QuadratureParams::default())?;
        Ok(self.c_ns * angular * rho.powf(expo) / expo)
    }
}

/// Right-handed orthonormal frame {v₁, v₂, ξ̂} for azimuthal quadrature
/// around ξ in 3D. Deterministic: the seed axis is the coordinate
/// direction least aligned with ξ.
fn orthonormal_frame<S: Scalar>(xi: &[S; 3], xi_norm: S) -> [[S; 3]; 3] {
    let e = [xi[0] / xi_norm, xi[1] / xi_norm, xi[2] / xi_norm];
    let abs = [e[0].abs(), e[1].abs(), e[2].abs()];
    let k = if abs[0] <= abs[1] && abs[0] <= abs[2] {
        0
    } else if abs[1] <= abs[2] {
        1
    } else {
        2
    };
    let mut seed = [S::zero(); 3];
    seed[k] = S::one();
    // v1 = normalize(seed × e), v2 = e × v1.
    let cross = [
        seed[1] * e[2] - seed[2] * e[1],
        seed[2] * e[0] - seed[0] * e[2],
        seed[0] * e[1] - seed[1] * e[0],
    ];
    let norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let v1 = [cross[0] / norm, cross[1] / norm, cross[2] / norm];
    let v2 = [
        e[1] * v1[2] - e[2] * v1[1],
        e[2] * v1[0] - e[0] * v1[2],
        e[0] * v1[1] - e[1] * v1[0],
    ];
    [v1, v2, e]
}

/// Nonnegative potential V with its declared local integrability exponent
/// q (V ∈ L^q_loc with q > n/(2s)).
#[derive(Debug, Clone, serde::Serialize)]
pub struct Potential<S: Scalar> {
    kind: PotentialKind<S>,
    declared_q: S,
}

/// Shape of the potential.
#[derive(Debug, Clone, serde::Serialize)]
pub enum PotentialKind<S: Scalar> {
    Zero,
    Constant(S),
    /// V(x) = |x|^{−β}; admissible only when β·q < n.
    InversePower { beta: S },
    /// Values per active node of the grid the potential is sampled on.
    Tabulated { values: Vec<S> },
}

impl<S: Scalar> Potential<S> {
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
            declared_q: S::infinity(),
        }
    }

    pub fn constant(c: S, declared_q: S) -> Result<Self> {
        if !(c >= S::zero()) {
            return Err(Error::Config(format!(
                "potential must be nonnegative, got constant {c}"
            )));
        }
        Ok(Self {
            kind: PotentialKind::Constant(c),
            declared_q,
        })
    }

    pub fn inverse_power(beta: S, declared_q: S) -> Result<Self> {
        if !(beta > S::zero()) {
            return Err(Error::Config(format!(
                "inverse-power exponent beta must be positive, got {beta}"
            )));
        }
        Ok(Self {
            kind: PotentialKind::InversePower { beta },
            declared_q,
        })
    }

    pub fn tabulated(values: Vec<S>, declared_q: S) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !(*v >= S::zero()) {
                return Err(Error::Config(format!(
                    "tabulated potential must be nonnegative, node {i} has value {v}"
                )));
            }
        }
        Ok(Self {
            kind: PotentialKind::Tabulated { values },
            declared_q,
        })
    }

    pub fn kind(&self) -> &PotentialKind<S> {
        &self.kind
    }

    pub fn declared_q(&self) -> S {
        self.declared_q
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// Checks the declared exponent against the kernel order:
    /// q > n/(2s), and for inverse powers β·q < n (local integrability).
    pub fn validate_against(&self, order: &FractionalOrder<S>) -> Result<()> {
        if self.is_zero() {
            return Ok(());
        }
        let n = S::from_count(order.n());
        if !(self.declared_q > n / order.two_s()) {
            return Err(Error::Config(format!(
                "potential exponent q must exceed n/(2s) = {}, got {}",
                n / order.two_s(),
                self.declared_q
            )));
        }
        if let PotentialKind::InversePower { beta } = self.kind {
            if !(beta * self.declared_q < n) {
                return Err(Error::Config(format!(
                    "inverse-power potential requires beta*q < n for local integrability, got beta*q = {}",
                    beta * self.declared_q
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn order2(s: f64) -> FractionalOrder<f64> {
        FractionalOrder::new(2, s).unwrap()
    }

    /// J_{1/2} = π/2 exactly; the other values are frozen oracles from an
    /// independent high-precision evaluation of Γ(1−2s)cos(πs)/(2s).
    #[test]
    fn radial_profile_matches_frozen_oracles() {
        assert_relative_eq!(
            radial_profile(0.5f64),
            std::f64::consts::FRAC_PI_2,
            max_relative = 1e-12
        );
        assert_relative_eq!(radial_profile(0.25f64), 2.5066282746310005, max_relative = 1e-11);
        assert_relative_eq!(radial_profile(0.75f64), 1.671085516420667, max_relative = 1e-11);
    }

    /// c_{2,1/2} = 1/(2π); the defining-integral quadrature must hit the
    /// closed form well inside its 1e−6 contract.
    #[test]
    fn normalization_constant_at_half_is_inverse_two_pi() {
        let (c, achieved) =
            normalization_constant(&order2(0.5), &QuadratureParams::default()).unwrap();
        assert_relative_eq!(c, 1.0 / (2.0 * std::f64::consts::PI), max_relative = 1e-9);
        assert!(achieved <= 1e-6);
    }

    /// c_{n,s} vanishes like s(1−s) toward the endpoints; spot-check the
    /// upper end at fixed ratio boundedness.
    #[test]
    fn normalization_constant_vanishes_like_s_times_one_minus_s() {
        let params = QuadratureParams::default();
        for &s in &[0.9, 0.99] {
            let (c, _) = normalization_constant(&order2(s), &params).unwrap();
            let ratio = c / (s * (1.0 - s));
            assert!(
                (0.05..20.0).contains(&ratio),
                "c/(s(1-s)) = {ratio} at s = {s}"
            );
        }
    }

    #[test]
    fn kernel_eval_is_even_and_matches_pure_value() {
        let k = Kernel::pure_fractional(order2(0.5)).unwrap();
        let y = [0.3, -0.7, 0.0];
        let my = [-0.3, 0.7, 0.0];
        assert_eq!(k.eval(&y).unwrap(), k.eval(&my).unwrap());
        // |y| = 1: K = c_{2,1/2}.
        let unit = [0.6, 0.8, 0.0];
        assert_relative_eq!(k.eval(&unit).unwrap(), k.normalization(), max_relative = 1e-12);
    }

    #[test]
    fn kernel_eval_rejects_origin() {
        let k = Kernel::pure_fractional(order2(0.5)).unwrap();
        assert!(matches!(
            k.eval(&[0.0, 0.0, 0.0]),
            Err(Error::KernelSingularAtOrigin)
        ));
    }

    #[test]
    fn degenerate_modulation_equals_pure() {
        let ord = order2(0.4);
        let pure = Kernel::pure_fractional(ord).unwrap();
        let degen = Kernel::modulated(ord, 1.0, 1.0).unwrap();
        for y in [[0.2, 0.1, 0.0], [1.5, -2.0, 0.0], [0.0, 3.0, 0.0]] {
            assert_relative_eq!(
                pure.eval(&y).unwrap(),
                degen.eval(&y).unwrap(),
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(
            pure.tail_mass(1.3).unwrap(),
            degen.tail_mass(1.3).unwrap(),
            max_relative = 1e-8
        );
    }

    /// m(ξ) = |ξ|^{2s} exactly for the pure kernel; 2e₁ at s = 1/2 gives 2.
    #[test]
    fn multiplier_pure_kernel_scales_as_xi_to_two_s() {
        let k = Kernel::pure_fractional(order2(0.5)).unwrap();
        let params = QuadratureParams::default();
        let m = k.multiplier(&[2.0, 0.0, 0.0], &params).unwrap();
        assert_relative_eq!(m, 2.0, max_relative = 1e-6);
        assert_eq!(k.multiplier(&[0.0, 0.0, 0.0], &params).unwrap(), 0.0);
    }

    #[test]
    fn multiplier_pure_kernel_3d() {
        let ord = FractionalOrder::new(3, 0.5).unwrap();
        let k = Kernel::pure_fractional(ord).unwrap();
        let params = QuadratureParams::default();
        let m = k.multiplier(&[1.0, 2.0, -2.0], &params).unwrap();
        assert_relative_eq!(m, 3.0, max_relative = 1e-5);
    }

    /// Modulated kernels stay inside the ellipticity envelope.
    #[test]
    fn multiplier_modulated_respects_bounds() {
        let k = Kernel::modulated(order2(0.5), 1.0, 2.0).unwrap();
        let params = QuadratureParams::default();
        for xi in [[0.3f64, 0.0, 0.0], [0.0, 5.0, 0.0], [7.0, -3.0, 0.0]] {
            let norm = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            let m = k.multiplier(&xi, &params).unwrap();
            let ratio = m / norm;
            assert!(
                (0.999..=2.001).contains(&ratio),
                "ratio {ratio} outside [λ, Λ] at xi {xi:?}"
            );
        }
    }

    /// Tail mass at (n,s,ρ) = (2, 1/2, 1) equals exactly 1 in closed form:
    /// c·2π·1/(2s) = (1/2π)·2π = 1. Same for the near second moment.
    #[test]
    fn tail_and_near_mass_unit_values() {
        let k = Kernel::pure_fractional(order2(0.5)).unwrap();
        assert_relative_eq!(k.tail_mass(1.0).unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(
            k.near_mass_second_moment(1.0).unwrap(),
            1.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn tail_mass_decreasing_near_mass_increasing() {
        let k = Kernel::pure_fractional(order2(0.3)).unwrap();
        let radii = [0.5, 1.0, 2.0, 4.0];
        for w in radii.windows(2) {
            assert!(k.tail_mass(w[0]).unwrap() > k.tail_mass(w[1]).unwrap());
            assert!(
                k.near_mass_second_moment(w[0]).unwrap()
                    < k.near_mass_second_moment(w[1]).unwrap()
            );
        }
    }

    /// The 2−2s denominator stays under control toward s → 1⁻ because
    /// c_{n,s} ~ s(1−s) vanishes at a compatible rate.
    #[test]
    fn near_mass_second_moment_bounded_toward_s_one() {
        for &s in &[0.9, 0.99] {
            let k = Kernel::pure_fractional(order2(s)).unwrap();
            let v = k.near_mass_second_moment(1.0).unwrap();
            assert!(v.is_finite() && v > 0.0 && v < 10.0, "value {v} at s={s}");
        }
    }

    /// Modulated angular integral has the closed form ω_{n−1}(λ+(Λ−λ)/n);
    /// the quadrature route must agree.
    #[test]
    fn modulated_tail_mass_matches_angular_mean() {
        let (lo, hi) = (1.0, 2.0);
        let k2 = Kernel::modulated(order2(0.5), lo, hi).unwrap();
        let expect2 = (lo + (hi - lo) / 2.0) * 1.0; // ω₁ c = 1 at (2, 1/2, ρ=1)
        assert_relative_eq!(k2.tail_mass(1.0).unwrap(), expect2, max_relative = 1e-6);

        let ord3 = FractionalOrder::new(3, 0.5).unwrap();
        let k3 = Kernel::modulated(ord3, lo, hi).unwrap();
        let pure3 = Kernel::pure_fractional(ord3).unwrap();
        let expect3 = (lo + (hi - lo) / 3.0) * pure3.tail_mass(1.0).unwrap();
        assert_relative_eq!(k3.tail_mass(1.0).unwrap(), expect3, max_relative = 1e-6);
    }

    #[test]
    fn potential_validation_rules() {
        let ord = order2(0.5); // n/(2s) = 2
        assert!(Potential::constant(-1.0, 3.0).is_err());
        let p = Potential::constant(2.0, 3.0).unwrap();
        p.validate_against(&ord).unwrap();
        let too_small_q = Potential::constant(2.0, 1.5).unwrap();
        assert!(too_small_q.validate_against(&ord).is_err());
        // β q < n: β = 0.5, q = 3 gives 1.5 < 2, fine; β = 0.8 gives 2.4, rejected.
        Potential::inverse_power(0.5, 3.0)
            .unwrap()
            .validate_against(&ord)
            .unwrap();
        assert!(Potential::inverse_power(0.8, 3.0)
            .unwrap()
            .validate_against(&ord)
            .is_err());
        assert!(Potential::tabulated(vec![0.0, 1.0, -0.1], 3.0).is_err());
    }

    #[test]
    fn multiplier_works_in_f32() {
        let ord = FractionalOrder::new(2, 0.5f32).unwrap();
        let k = Kernel::pure_fractional(ord).unwrap();
        let params = QuadratureParams {
            rel_tol: 1e-3f32,
            max_depth: 20,
        };
        let m = k.multiplier(&[2.0f32, 0.0, 0.0], &params).unwrap();
        assert!((m - 2.0).abs() / 2.0 < 1e-2, "f32 multiplier {m}");
    }
}
