use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::integrate;

pub type ProfileFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;
pub type ProxySpectrumFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// One-variable proxy `φ(t)` with its transform `φ̂(ξ) = ∫ φ(t) e^{-iξt} dt`.
///
/// The profile is evaluated at complex arguments: Bateman-type wavelets
/// substitute a complex phase, and derivatives at real points are taken
/// with a Cauchy contour of radius `scale / 4`.
#[derive(Clone)]
pub struct ProxyWavelet {
    label: String,
    profile: Option<ProfileFn>,
    spectrum: Option<ProxySpectrumFn>,
    progressive: bool,
    scale: f64,
}

impl fmt::Debug for ProxyWavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProxyWavelet")
            .field("label", &self.label)
            .field("profile", &self.profile.is_some())
            .field("spectrum", &self.spectrum.is_some())
            .field("progressive", &self.progressive)
            .field("scale", &self.scale)
            .finish()
    }
}

const CONSISTENCY_POINTS: usize = 32;
const CONSISTENCY_TOL: f64 = 1e-6;
const CONTOUR_POINTS: usize = 32;

impl ProxyWavelet {
    /// User-supplied proxy. When both evaluators are present their
    /// consistency is spot-checked before the proxy is returned.
    pub fn new(
        label: impl Into<String>,
        profile: Option<ProfileFn>,
        spectrum: Option<ProxySpectrumFn>,
        progressive: bool,
        scale: f64,
    ) -> Result<Self> {
        if profile.is_none() && spectrum.is_none() {
            return Err(Error::MissingEvaluator);
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("proxy scale must be positive, got {scale}")));
        }
        let proxy = Self { label: label.into(), profile, spectrum, progressive, scale };
        if let Some(s) = &proxy.spectrum {
            if progressive {
                for j in 1..=8 {
                    let xi = -(j as f64) * scale.recip();
                    if s(xi) != Complex64::new(0.0, 0.0) {
                        return Err(Error::NotProgressive);
                    }
                }
            }
        }
        if proxy.profile.is_some() && proxy.spectrum.is_some() {
            let defect = proxy.consistency_defect()?;
            if defect > CONSISTENCY_TOL {
                return Err(Error::InconsistentProxy(defect));
            }
        }
        Ok(proxy)
    }

    /// `φ(t) = Γ(α) / (π (1 − it)^α)`, `φ̂(ξ) = 2Θ(ξ) ξ^{α−1} e^{−ξ}`.
    pub fn kaiser(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("kaiser alpha must be positive, got {alpha}")));
        }
        let norm = gamma(alpha) / PI;
        let one = Complex64::new(1.0, 0.0);
        let profile: ProfileFn = Arc::new(move |z: Complex64| {
            norm * (one - Complex64::i() * z).powf(-alpha)
        });
        let spectrum: ProxySpectrumFn = Arc::new(move |xi: f64| {
            if xi <= 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(2.0 * ((alpha - 1.0) * xi.ln() - xi).exp(), 0.0)
            }
        });
        Ok(Self {
            label: format!("kaiser-proxy(alpha={alpha})"),
            profile: Some(profile),
            spectrum: Some(spectrum),
            progressive: true,
            scale: 1.0,
        })
    }

    /// `φ(t) = exp(−p √(1 − it/γ))` with the principal root,
    /// `φ̂(ξ) = √π p γ^{−1/2} ξ^{−3/2} exp(−γξ − p²/(4γξ))` for ξ > 0.
    pub fn packet(p: f64, gamma_: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("gamma", gamma_)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        let one = Complex64::new(1.0, 0.0);
        let profile: ProfileFn = Arc::new(move |z: Complex64| {
            (-p * (one - Complex64::i() * z / gamma_).sqrt()).exp()
        });
        let log_pref = 0.5 * PI.ln() + p.ln() - 0.5 * gamma_.ln();
        let spectrum: ProxySpectrumFn = Arc::new(move |xi: f64| {
            if xi <= 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                let e = log_pref - 1.5 * xi.ln() - gamma_ * xi - p * p / (4.0 * gamma_ * xi);
                Complex64::new(e.exp(), 0.0)
            }
        });
        Ok(Self {
            label: format!("packet-proxy(p={p},gamma={gamma_})"),
            profile: Some(profile),
            spectrum: Some(spectrum),
            progressive: true,
            scale: gamma_ * (2.0 / p).min(1.0),
        })
    }

    /// `φ(t) = exp(−2 √(1 − it))`, the packet proxy with p = 2, γ = 1.
    pub fn exponential() -> Self {
        let mut proxy = Self::packet(2.0, 1.0).expect("fixed parameters are valid");
        proxy.label = "exponential-proxy".into();
        proxy
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_progressive(&self) -> bool {
        self.progressive
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn has_profile(&self) -> bool {
        self.profile.is_some()
    }

    pub fn has_spectrum(&self) -> bool {
        self.spectrum.is_some()
    }

    pub(crate) fn profile_fn(&self) -> Option<&ProfileFn> {
        self.profile.as_ref()
    }

    pub(crate) fn spectrum_fn(&self) -> Option<&ProxySpectrumFn> {
        self.spectrum.as_ref()
    }

    pub fn profile(&self, z: Complex64) -> Result<Complex64> {
        let f = self.profile.as_ref().ok_or_else(|| Error::MissingPosition(self.label.clone()))?;
        Ok(f(z))
    }

    pub fn spectrum(&self, xi: f64) -> Result<Complex64> {
        let f = self.spectrum.as_ref().ok_or_else(|| Error::MissingSpectrum(self.label.clone()))?;
        Ok(f(xi))
    }

    /// Derivatives `φ^{(n)}(x)` for `n = 0..=max_order` by the trapezoid rule
    /// on a circle around `x`.
    pub fn derivatives(&self, x: f64, max_order: usize) -> Result<Vec<Complex64>> {
        let f = self.profile.as_ref().ok_or_else(|| Error::MissingPosition(self.label.clone()))?;
        Ok(contour_derivatives(f.as_ref(), x, 0.25 * self.scale, max_order))
    }

    /// Largest deviation between the profile and the inverse transform of the
    /// spectrum over a fixed quasi-random set of points, relative to the
    /// largest profile magnitude seen.
    pub fn consistency_defect(&self) -> Result<f64> {
        let profile = self.profile.as_ref().ok_or_else(|| Error::MissingPosition(self.label.clone()))?;
        let spectrum = self.spectrum.as_ref().ok_or_else(|| Error::MissingSpectrum(self.label.clone()))?;
        let golden = 0.5 * (5f64.sqrt() - 1.0);
        let mut worst = 0.0f64;
        let mut peak = 0.0f64;
        for j in 0..CONSISTENCY_POINTS {
            let u = (0.5 + j as f64 * golden).fract();
            let t = self.scale * 6.0 * (2.0 * u - 1.0);
            let direct = profile(Complex64::new(t, 0.0));
            let synth = inverse_transform(spectrum.as_ref(), t, self.progressive);
            worst = worst.max((direct - synth).norm());
            peak = peak.max(direct.norm());
        }
        Ok(if peak > 0.0 { worst / peak } else { worst })
    }
}

/// `(1/2π) ∫ φ̂(ξ) e^{iξt} dξ` over the half line(s), with ξ = u/(1−u).
fn inverse_transform(spectrum: &(dyn Fn(f64) -> Complex64 + Send + Sync), t: f64, progressive: bool) -> Complex64 {
    let half = |sign: f64| {
        let g = |u: f64| {
            if u >= 1.0 {
                return Complex64::new(0.0, 0.0);
            }
            let xi = u / (1.0 - u);
            let jac = 1.0 / ((1.0 - u) * (1.0 - u));
            let v = spectrum(sign * xi);
            if v == Complex64::new(0.0, 0.0) {
                return v;
            }
            v * Complex64::from_polar(jac, sign * xi * t)
        };
        integrate(g, 0.0, 1.0, 16, 1e-300, 1e-11, 20000).value
    };
    let mut total = half(1.0);
    if !progressive {
        total += half(-1.0);
    }
    total / (2.0 * PI)
}

pub(crate) fn contour_derivatives(
    f: &(dyn Fn(Complex64) -> Complex64 + Send + Sync),
    x: f64,
    radius: f64,
    max_order: usize,
) -> Vec<Complex64> {
    let n = CONTOUR_POINTS;
    let samples: Vec<(Complex64, Complex64)> = (0..n)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / n as f64;
            let w = Complex64::from_polar(1.0, theta);
            (f(Complex64::new(x, 0.0) + radius * w), w)
        })
        .collect();
    let mut out = Vec::with_capacity(max_order + 1);
    let mut factorial = 1.0;
    for order in 0..=max_order {
        if order > 0 {
            factorial *= order as f64;
        }
        let sum: Complex64 = samples.iter().map(|(v, w)| v * w.powi(-(order as i32))).sum();
        out.push(sum * factorial / (n as f64 * radius.powi(order as i32)));
    }
    out
}
