//! First-order surrogates used to convexify the rate and SINR constraints.

use num_complex::Complex;

use crate::scalar::{inner, Real};

/// Tangent of `2^α` at `α0`: `2^{α0} (1 + ln2 (α − α0))`, a global under-estimator.
pub fn exp2_tangent<T: Real>(alpha: T, alpha0: T) -> T {
    T::lit(2.0).powf(alpha0) * (T::one() + T::LN_2() * (alpha - alpha0))
}

/// Linear lower bound of `|hᴴp|² / β` around `(p0, β0)`:
/// `2 Re{p0ᴴ h hᴴ p} / β0 − |hᴴ p0|² β / β0²`.
pub fn sinr_lower_bound<T: Real>(h: &[Complex<T>], p: &[Complex<T>], p0: &[Complex<T>], beta: T, beta0: T) -> T {
    let a0 = inner(h, p0);
    let a = inner(h, p);
    let two = T::lit(2.0);
    two * (a0.conj() * a).re / beta0 - a0.norm_sqr() * beta / (beta0 * beta0)
}

/// Linear lower bound of `|hᴴp|²` around `p0`: `2 Re{p0ᴴ h hᴴ p} − |hᴴ p0|²`.
pub fn power_lower_bound<T: Real>(h: &[Complex<T>], p: &[Complex<T>], p0: &[Complex<T>]) -> T {
    let a0 = inner(h, p0);
    let a = inner(h, p);
    T::lit(2.0) * (a0.conj() * a).re - a0.norm_sqr()
}

/// Left-hand side of the printed wiretap bilinear surrogate at eavesdropper `j`:
/// `ρ0 Σ_{k'} (2Re{p0_{k'}ᴴ h hᴴ p_{k'}} − |hᴴ p0_{k'}|²) + ρ (Σ_{k'} |hᴴ p0_{k'}|² + σ²)`,
/// where `k'` runs over the interfering private streams.
pub fn wiretap_bilinear_printed<T: Real>(
    h: &[Complex<T>],
    interferers: &[&[Complex<T>]],
    interferers0: &[&[Complex<T>]],
    rho: T,
    rho0: T,
    noise: T,
) -> T {
    let lin: T = interferers
        .iter()
        .zip(interferers0)
        .map(|(p, p0)| power_lower_bound(h, p, p0))
        .sum();
    let base: T = interferers0.iter().map(|p0| inner(h, p0).norm_sqr()).sum();
    rho0 * lin + rho * (base + noise)
}

/// The exact product `ρ (Σ_{k'} |hᴴ p_{k'}|² + σ²)` the printed surrogate stands in for.
pub fn wiretap_bilinear_exact<T: Real>(h: &[Complex<T>], interferers: &[&[Complex<T>]], rho: T, noise: T) -> T {
    let x: T = interferers.iter().map(|p| inner(h, p).norm_sqr()).sum();
    rho * (x + noise)
}
