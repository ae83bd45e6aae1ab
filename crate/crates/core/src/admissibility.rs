//! Admissibility constants `C_φ = ∫ d³k |φ̂(k,0)|²/|k|³`, cross constants
//! `C_ψχ = ∫ d³k conj(ψ̂) χ̂ / |k|³`, the one-dimensional proxy form, and the
//! modified Bessel function `K_n` used as the closed-form reference.
//!
//! Radial integrals are taken in `s = ln|k|` over `[10⁻⁶, 10³]`, where the
//! measure `d³k/|k|³` becomes `ds dΩ`. Outside that window the angular
//! integral is modelled as a power law `e^{βs}` fitted at each end; a slope
//! that does not decay away from the window is reported as divergence, and a
//! decaying one contributes its analytic tail.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate};
use crate::wavelets::{PhysicalWavelet, ProxyWavelet, Symmetry};

const K_MIN: f64 = 1e-6;
const K_MAX: f64 = 1e3;
/// Smallest power-law exponent accepted as decay at either end.
const MIN_SLOPE: f64 = 1e-3;
const SLOPE_STEP: f64 = 0.5;
const MAX_PANELS: usize = 4000;
const ANGULAR_START: (usize, usize) = (16, 16);
const ANGULAR_MAX: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    #[serde(serialize_with = "serialize_complex")]
    pub constant: Complex64,
    pub converged: bool,
    /// Relative error estimate of `constant`.
    pub quadrature_error_estimate: f64,
    pub divergence_reason: Option<String>,
}

fn serialize_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("complex", 2)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.end()
}

impl AdmissibilityReport {
    fn divergent(reason: &str) -> Self {
        Self {
            constant: Complex64::new(f64::INFINITY, 0.0),
            converged: false,
            quadrature_error_estimate: f64::INFINITY,
            divergence_reason: Some(reason.to_string()),
        }
    }

    /// The constant, or an error when it diverged, failed to converge, or is zero.
    pub fn require(&self) -> Result<Complex64> {
        if let Some(reason) = &self.divergence_reason {
            return Err(Error::Inadmissible(format!("integral diverges at the {reason}")));
        }
        if !self.converged {
            return Err(Error::Inadmissible(format!(
                "quadrature did not reach tolerance (estimate {:e})",
                self.quadrature_error_estimate
            )));
        }
        if self.constant.norm() == 0.0 || !self.constant.is_finite() {
            return Err(Error::ZeroConstant);
        }
        Ok(self.constant)
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tolerance must lie in (0, 1), got {tol}")))
    }
}

/// Power-law tail beyond `s_edge`, extrapolated outward (`direction` = −1
/// toward the origin, +1 toward infinity). `Err` carries the divergence reason.
fn tail(g: &impl Fn(f64) -> Complex64, s_edge: f64, direction: f64, reason: &'static str) -> std::result::Result<Complex64, &'static str> {
    let g0 = g(s_edge);
    let g1 = g(s_edge - direction * SLOPE_STEP);
    let (m0, m1) = (g0.norm(), g1.norm());
    if m0 < f64::MIN_POSITIVE {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if m1 < f64::MIN_POSITIVE {
        // the integrand grows violently toward the edge
        return Err(reason);
    }
    // decay rate of |g| moving outward
    let decay = (m1.ln() - m0.ln()) / SLOPE_STEP;
    if decay < MIN_SLOPE {
        return Err(reason);
    }
    Ok(g0 / decay)
}

/// `∫ g(s) ds` over the real line with power-law tails.
fn radial(g: impl Fn(f64) -> Complex64, tol: f64) -> AdmissibilityReport {
    let (s0, s1) = (K_MIN.ln(), K_MAX.ln());
    let lower = match tail(&g, s0, -1.0, "origin") {
        Ok(v) => v,
        Err(reason) => return AdmissibilityReport::divergent(reason),
    };
    let upper = match tail(&g, s1, 1.0, "tail") {
        Ok(v) => v,
        Err(reason) => return AdmissibilityReport::divergent(reason),
    };
    let body = integrate(&g, s0, s1, 32, 0.0, 0.1 * tol, MAX_PANELS);
    let constant = body.value + lower + upper;
    let rel = if constant.norm() > 0.0 { body.error / constant.norm() } else { body.error };
    AdmissibilityReport {
        constant,
        converged: rel <= tol && constant.is_finite(),
        quadrature_error_estimate: rel,
        divergence_reason: None,
    }
}

/// Angular integral `∫ dΩ f(k ω)` by Gauss–Legendre in the cosine of the
/// angle from the x axis times the trapezoid rule in azimuth.
struct SphereRule {
    points: Vec<([f64; 3], f64)>,
}

impl SphereRule {
    fn new(n_polar: usize, n_azimuth: usize) -> Self {
        let (mu, w) = gauss_legendre(n_polar);
        let mut points = Vec::with_capacity(n_polar * n_azimuth);
        let dphi = 2.0 * PI / n_azimuth as f64;
        for (m, wm) in mu.iter().zip(&w) {
            let rho = (1.0 - m * m).max(0.0).sqrt();
            for j in 0..n_azimuth {
                let phi = j as f64 * dphi;
                points.push(([*m, rho * phi.cos(), rho * phi.sin()], wm * dphi));
            }
        }
        Self { points }
    }

    fn integrate(&self, f: &impl Fn([f64; 3]) -> Complex64, k: f64) -> Complex64 {
        self.points
            .iter()
            .map(|(w, weight)| f([k * w[0], k * w[1], k * w[2]]) * *weight)
            .sum()
    }
}

/// `∫ d³k F(k)/|k|³` for a pairing density `F`, spherical or not.
fn pairing_constant(f: impl Fn([f64; 3]) -> Complex64, spherical: bool, tol: f64) -> AdmissibilityReport {
    if spherical {
        return radial(|s| f([s.exp(), 0.0, 0.0]) * (4.0 * PI), tol);
    }
    let (mut np, mut na) = ANGULAR_START;
    let mut previous = {
        let rule = SphereRule::new(np, na);
        radial(|s| rule.integrate(&f, s.exp()), tol)
    };
    loop {
        if previous.divergence_reason.is_some() {
            return previous;
        }
        np *= 2;
        na *= 2;
        let rule = SphereRule::new(np, na);
        let next = radial(|s| rule.integrate(&f, s.exp()), tol);
        if next.divergence_reason.is_some() {
            return next;
        }
        let change = (next.constant - previous.constant).norm() / next.constant.norm().max(f64::MIN_POSITIVE);
        let stable = change <= tol;
        if stable || np >= ANGULAR_MAX {
            let estimate = next.quadrature_error_estimate.max(change);
            return AdmissibilityReport {
                constant: next.constant,
                converged: next.converged && stable,
                quadrature_error_estimate: estimate,
                divergence_reason: None,
            };
        }
        previous = next;
    }
}

/// Admissibility constant of a wavelet, to relative tolerance `tol`.
pub fn c_phi(phi: &PhysicalWavelet, tol: f64) -> Result<AdmissibilityReport> {
    check_tol(tol)?;
    let f = phi.spectral_fn()?;
    let mut report = pairing_constant(
        |k| Complex64::new(f(k).norm_sqr(), 0.0),
        phi.symmetry() == Symmetry::Spherical,
        tol,
    );
    report.constant.im = 0.0;
    Ok(report)
}

/// Cross constant `∫ d³k conj(ψ̂) χ̂ / |k|³` for two wavelets of one sign.
pub fn c_cross(psi: &PhysicalWavelet, chi: &PhysicalWavelet, tol: f64) -> Result<AdmissibilityReport> {
    check_tol(tol)?;
    if psi.sign() != chi.sign() {
        return Err(Error::SignMismatch { expected: psi.sign().as_str(), found: chi.sign().as_str() });
    }
    let fp = psi.spectral_fn()?;
    let fc = chi.spectral_fn()?;
    let spherical = psi.symmetry() == Symmetry::Spherical && chi.symmetry() == Symmetry::Spherical;
    Ok(pairing_constant(|k| fp(k).conj() * fc(k), spherical, tol))
}

/// `(π/c⁴) ∫₀^∞ |φ̂(k)|²/k³ dk` for a progressive proxy.
pub fn c_phi_proxy_spherical(proxy: &ProxyWavelet, c: f64, tol: f64) -> Result<AdmissibilityReport> {
    check_tol(tol)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("wave speed must be positive, got {c}")));
    }
    if !proxy.is_progressive() {
        return Err(Error::NotProgressive);
    }
    let s = proxy.spectrum_fn().ok_or_else(|| Error::MissingSpectrum(proxy.label().to_string()))?;
    let scale = PI / c.powi(4);
    let mut report = radial(|u| Complex64::new(s(u.exp()).norm_sqr() * (-2.0 * u).exp() * scale, 0.0), tol);
    report.constant.im = 0.0;
    Ok(report)
}

/// Modified Bessel function of the second kind,
/// `K_n(x) = ∫₀^∞ e^{−x cosh s} cosh(ns) ds`.
pub fn bessel_k(order: u32, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!("bessel_k needs x > 0, got {x}")));
    }
    let n = order as f64;
    let log_integrand = |s: f64| -x * s.cosh() + n * s;
    let s_peak = (n / x).asinh();
    let peak = log_integrand(s_peak);
    let mut upper = s_peak + 1.0;
    while log_integrand(upper) > peak - 46.0 {
        upper += 1.0;
    }
    // factor e^{peak} out to keep the integrand O(1)
    let r = integrate(
        |s| Complex64::new((-x * s.cosh() - peak).exp() * (n * s).cosh(), 0.0),
        0.0,
        upper,
        16,
        0.0,
        1e-14,
        2000,
    );
    Ok(r.value.re * peak.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelets::{
        derive_chi, derive_psi, exp_spherical_wavelet, gaussian_packet, kaiser_wavelet, time_reverse,
        PhysicalWavelet, Sign, SpectralFn,
    };
    use std::sync::Arc;

    fn kaiser_reference(alpha: f64, c: f64) -> f64 {
        // (4π/c⁴) Γ(2α−4) / 2^{2α−4}
        4.0 * PI / c.powi(4) * statrs::function::gamma::gamma(2.0 * alpha - 4.0) / 2f64.powf(2.0 * alpha - 4.0)
    }

    #[test]
    fn bessel_recurrence_and_monotonicity() {
        let x = 4.0;
        for n in 1..=4u32 {
            let lhs = bessel_k(n + 1, x).unwrap();
            let rhs = bessel_k(n - 1, x).unwrap() + 2.0 * n as f64 / x * bessel_k(n, x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-9 * lhs);
        }
        for n in 0..=8 {
            let mut prev = f64::INFINITY;
            for i in 0..40 {
                let v = bessel_k(n, 0.5 + 0.5 * i as f64).unwrap();
                assert!(v > 0.0 && v < prev);
                prev = v;
            }
        }
        assert!(bessel_k(0, 0.0).is_err());
    }

    #[test]
    fn bessel_matches_tabulated_value() {
        // K₅(4) as tabulated by standard special-function libraries
        let v = bessel_k(5, 4.0).unwrap();
        assert!((v - 0.15434254872599712).abs() <= 1e-12 * v);
        // K₀(1) = 0.42102443824070834
        assert!((bessel_k(0, 1.0).unwrap() - 0.42102443824070834).abs() < 1e-13);
    }

    #[test]
    fn exp_spherical_constant() {
        for c in [1.0, 1.7] {
            let r = c_phi(&exp_spherical_wavelet(c).unwrap(), 1e-9).unwrap();
            let expected = 8.0 * PI * PI / c.powi(4) * bessel_k(5, 4.0).unwrap();
            assert!(r.converged);
            assert!((r.constant.re - expected).abs() <= 1e-8 * expected, "{} vs {expected}", r.constant.re);
        }
    }

    #[test]
    fn kaiser_boundary() {
        for alpha in [2.5, 3.0, 4.0] {
            let r = c_phi(&kaiser_wavelet(alpha, 1.0).unwrap(), 1e-10).unwrap();
            let expected = kaiser_reference(alpha, 1.0);
            assert!(r.converged);
            assert!((r.constant.re - expected).abs() <= 1e-8 * expected);
        }
        for alpha in [1.5, 1.99, 2.0] {
            let r = c_phi(&kaiser_wavelet(alpha, 1.0).unwrap(), 1e-8).unwrap();
            assert!(!r.converged);
            assert_eq!(r.divergence_reason.as_deref(), Some("origin"));
            assert!(r.require().is_err());
        }
        let r = c_phi(&kaiser_wavelet(2.01, 1.0).unwrap(), 1e-8).unwrap();
        assert!(r.converged);
        assert!(r.constant.re > 10.0 * kaiser_reference(2.5, 1.0));
    }

    #[test]
    fn proxy_form_agrees_with_wavelet_form() {
        let r = c_phi_proxy_spherical(&ProxyWavelet::kaiser(3.0).unwrap(), 1.0, 1e-10).unwrap();
        assert!((r.constant.re - PI).abs() <= 1e-9 * PI);
        let r = c_phi_proxy_spherical(&ProxyWavelet::exponential(), 1.0, 1e-10).unwrap();
        let expected = 8.0 * PI * PI * bessel_k(5, 4.0).unwrap();
        assert!((r.constant.re - expected).abs() <= 1e-8 * expected);
        for alpha in [2.5, 3.0] {
            let proxy = ProxyWavelet::kaiser(alpha).unwrap();
            let a = c_phi_proxy_spherical(&proxy, 1.3, 1e-10).unwrap().constant.re;
            let b = c_phi(&kaiser_wavelet(alpha, 1.3).unwrap(), 1e-10).unwrap().constant.re;
            assert!((a - b).abs() <= 1e-8 * a);
        }
        let near = c_phi_proxy_spherical(&ProxyWavelet::kaiser(2.01).unwrap(), 1.0, 1e-8).unwrap();
        assert!(near.converged && near.constant.re > 10.0);
        let below = c_phi_proxy_spherical(&ProxyWavelet::kaiser(1.99).unwrap(), 1.0, 1e-8).unwrap();
        assert_eq!(below.divergence_reason.as_deref(), Some("origin"));
    }

    #[test]
    fn gaussian_spectrum_diverges_at_origin() {
        let f: SpectralFn = Arc::new(|k: [f64; 3]| Complex64::new((-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])).exp(), 0.0));
        let phi = PhysicalWavelet::new("gauss", Sign::Plus, Symmetry::Spherical, 1.0, Some(f), None).unwrap();
        let r = c_phi(&phi, 1e-8).unwrap();
        assert_eq!(r.divergence_reason.as_deref(), Some("origin"));
    }

    #[test]
    fn slowly_decaying_spectrum_diverges_in_tail() {
        let f: SpectralFn = Arc::new(|k: [f64; 3]| {
            let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            Complex64::new(kk / (1.0 + kk), 0.0)
        });
        let phi = PhysicalWavelet::new("flat", Sign::Plus, Symmetry::Spherical, 1.0, Some(f), None).unwrap();
        assert_eq!(c_phi(&phi, 1e-8).unwrap().divergence_reason.as_deref(), Some("tail"));
    }

    #[test]
    fn cross_constant_of_derived_pair() {
        let phi = exp_spherical_wavelet(1.0).unwrap();
        let cphi = c_phi(&phi, 1e-10).unwrap().constant.re;
        let cross = c_cross(&derive_psi(&phi), &derive_chi(&phi), 1e-10).unwrap();
        assert!((cross.constant + cphi).norm() <= 1e-8 * cphi);
        let same = c_cross(&phi, &phi, 1e-10).unwrap();
        assert!((same.constant.re - cphi).abs() <= 1e-10 * cphi);
        assert!(c_cross(&phi, &time_reverse(&phi), 1e-8).is_err());
    }

    #[test]
    fn packet_constant_is_rotation_stable_and_time_reversal_invariant() {
        let phi = gaussian_packet(10.0, 1.0, 0.5, 0.5, 1.0).unwrap();
        let a = c_phi(&phi, 1e-8).unwrap();
        assert!(a.converged, "{a:?}");
        let b = c_phi(&time_reverse(&phi), 1e-8).unwrap();
        assert!((a.constant.re - b.constant.re).abs() <= 1e-10 * a.constant.re);
        let psi = derive_psi(&phi);
        let chi = derive_chi(&phi);
        let cross = c_cross(&psi, &chi, 1e-8).unwrap();
        assert!((cross.constant + a.constant).norm() <= 1e-7 * a.constant.re);
    }

    #[test]
    fn disjoint_supports_give_zero_cross_constant() {
        let band = |lo: f64, hi: f64| -> SpectralFn {
            Arc::new(move |k: [f64; 3]| {
                let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
                if kk > lo && kk < hi {
                    Complex64::new(((kk - lo) * (hi - kk)).powi(2), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        };
        let a = PhysicalWavelet::new("a", Sign::Plus, Symmetry::Spherical, 1.0, Some(band(1.0, 2.0)), None).unwrap();
        let b = PhysicalWavelet::new("b", Sign::Plus, Symmetry::Spherical, 1.0, Some(band(3.0, 4.0)), None).unwrap();
        assert_eq!(c_cross(&a, &b, 1e-8).unwrap().constant, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn constant_is_scale_invariant() {
        let base = exp_spherical_wavelet(1.0).unwrap();
        let c0 = c_phi(&base, 1e-10).unwrap().constant.re;
        for lambda in [0.5, 2.0] {
            let f = base.spectral_fn().unwrap().clone();
            let g: SpectralFn = Arc::new(move |k: [f64; 3]| f([lambda * k[0], lambda * k[1], lambda * k[2]]));
            let scaled = PhysicalWavelet::new("scaled", Sign::Minus, Symmetry::Spherical, 1.0, Some(g), None).unwrap();
            let c1 = c_phi(&scaled, 1e-10).unwrap().constant.re;
            assert!((c1 - c0).abs() <= 1e-8 * c0);
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let phi = exp_spherical_wavelet(1.0).unwrap();
        assert!(c_phi(&phi, 0.0).is_err());
        assert!(c_phi(&phi, 2.0).is_err());
    }
}
