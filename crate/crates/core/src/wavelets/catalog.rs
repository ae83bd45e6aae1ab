use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::{kabs, time_reverse, PhysicalWavelet, PositionFn, ProxyWavelet, Sign, SpectralFn, Symmetry};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Radius below which the spherical difference quotient is replaced by
/// its Taylor expansion, in units of the proxy scale.
const TAYLOR_RADIUS: f64 = 1e-4;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Spherical wavelet `(1/4πc²|r|)[φ(ct+|r|) − φ(ct−|r|)]` built from a
/// progressive proxy. The result lives in the minus subspace.
pub fn spherical_from_proxy(proxy: &ProxyWavelet, c: f64) -> Result<PhysicalWavelet> {
    positive("c", c)?;
    if !proxy.has_profile() && !proxy.has_spectrum() {
        return Err(Error::MissingEvaluator);
    }
    if !proxy.is_progressive() {
        return Err(Error::NotProgressive);
    }
    let position: Option<PositionFn> = proxy.profile_fn().cloned().map(|f| {
        let switch = TAYLOR_RADIUS * proxy.scale();
        let radius = 0.25 * proxy.scale();
        let pref = 1.0 / (4.0 * PI * c * c);
        let taylor = 1.0 / (2.0 * PI * c * c);
        Arc::new(move |r: [f64; 3], t: f64| {
            let rr = kabs(r);
            let tau = c * t;
            if rr < switch {
                let d = super::proxy::contour_derivatives(f.as_ref(), tau, radius, 3);
                (d[1] + d[3] * (rr * rr / 6.0)) * taylor
            } else {
                (f(Complex64::new(tau + rr, 0.0)) - f(Complex64::new(tau - rr, 0.0))) * (pref / rr)
            }
        }) as PositionFn
    });
    let spectral: Option<SpectralFn> = proxy.spectrum_fn().cloned().map(|s| {
        let pref = Complex64::new(0.0, 1.0 / (2.0 * c * c));
        Arc::new(move |k: [f64; 3]| {
            let kk = kabs(k);
            if kk == 0.0 {
                ZERO
            } else {
                s(kk) * pref / kk
            }
        }) as SpectralFn
    });
    PhysicalWavelet::new(
        format!("spherical[{}]", proxy.label()),
        Sign::Minus,
        Symmetry::Spherical,
        c,
        spectral,
        position,
    )
}

/// Kaiser's spherical wavelet of order α, tagged plus. It is the time
/// reverse of the spherical wavelet of the Kaiser proxy, so both forms
/// coincide at t = 0.
pub fn kaiser_wavelet(alpha: f64, c: f64) -> Result<PhysicalWavelet> {
    let proxy = ProxyWavelet::kaiser(alpha)?;
    Ok(time_reverse(&spherical_from_proxy(&proxy, c)?).relabeled(format!("kaiser(alpha={alpha})")))
}

/// Spherical wavelet of the proxy `exp(−2√(1−it))`; its spectrum is
/// `(i√π/c²)|k|^{−5/2} exp(−|k| − 1/|k|)`.
pub fn exp_spherical_wavelet(c: f64) -> Result<PhysicalWavelet> {
    Ok(spherical_from_proxy(&ProxyWavelet::exponential(), c)?.relabeled("exp-spherical"))
}

/// `k_x + |k|`, computed without cancellation on the negative-x side.
#[inline]
fn forward_sum(k: [f64; 3], kk: f64) -> f64 {
    if k[0] >= 0.0 {
        k[0] + kk
    } else {
        let t = k[1] * k[1] + k[2] * k[2];
        if t == 0.0 {
            0.0
        } else {
            t / (kk - k[0])
        }
    }
}

fn axial_symmetry(eps1: f64, eps2: f64) -> Symmetry {
    if eps1 == eps2 {
        Symmetry::Axial
    } else {
        Symmetry::None
    }
}

/// Bateman-type solution `φ(θ) / (√(x+ct−iε₁) √(x+ct−iε₂))` with the phase
/// `θ = x − ct + y²/(x+ct−iε₁) + z²/(x+ct−iε₂)`. Requires a progressive proxy.
pub fn bateman_from_proxy(proxy: &ProxyWavelet, eps1: f64, eps2: f64, c: f64) -> Result<PhysicalWavelet> {
    positive("eps1", eps1)?;
    positive("eps2", eps2)?;
    positive("c", c)?;
    if !proxy.is_progressive() {
        return Err(Error::NotProgressive);
    }
    if !proxy.has_profile() && !proxy.has_spectrum() {
        return Err(Error::MissingEvaluator);
    }
    let position: Option<PositionFn> = proxy.profile_fn().cloned().map(|f| {
        Arc::new(move |r: [f64; 3], t: f64| {
            let (d1, d2) = bateman_denominators(r[0], c * t, eps1, eps2);
            let theta = bateman_phase(r, c * t, d1, d2);
            f(theta) / (d1.sqrt() * d2.sqrt())
        }) as PositionFn
    });
    let spectral: Option<SpectralFn> = proxy.spectrum_fn().cloned().map(|s| {
        Arc::new(move |k: [f64; 3]| {
            let kk = kabs(k);
            if kk == 0.0 {
                return ZERO;
            }
            let sum = forward_sum(k, kk);
            if sum <= 0.0 {
                return ZERO;
            }
            let v = s(0.5 * sum);
            if v == ZERO {
                return ZERO;
            }
            let damping = (-(k[1] * k[1] * eps1 + k[2] * k[2] * eps2) / (2.0 * sum)).exp();
            v * Complex64::new(0.0, PI * damping / kk)
        }) as SpectralFn
    });
    PhysicalWavelet::new(
        format!("bateman[{}](eps1={eps1},eps2={eps2})", proxy.label()),
        Sign::Plus,
        axial_symmetry(eps1, eps2),
        c,
        spectral,
        position,
    )
}

#[inline]
fn bateman_denominators(x: f64, ct: f64, eps1: f64, eps2: f64) -> (Complex64, Complex64) {
    (Complex64::new(x + ct, -eps1), Complex64::new(x + ct, -eps2))
}

#[inline]
fn bateman_phase(r: [f64; 3], ct: f64, d1: Complex64, d2: Complex64) -> Complex64 {
    Complex64::new(r[0] - ct, 0.0) + r[1] * r[1] / d1 + r[2] * r[2] / d2
}

/// Gaussian wave packet: the Bateman solution of the proxy
/// `exp(−p√(1 − it/γ))`, with its closed-form spectrum.
pub fn gaussian_packet(p: f64, gamma: f64, eps1: f64, eps2: f64, c: f64) -> Result<PhysicalWavelet> {
    for (name, v) in [("p", p), ("gamma", gamma), ("eps1", eps1), ("eps2", eps2), ("c", c)] {
        positive(name, v)?;
    }
    let one = Complex64::new(1.0, 0.0);
    let position: PositionFn = Arc::new(move |r: [f64; 3], t: f64| {
        let (d1, d2) = bateman_denominators(r[0], c * t, eps1, eps2);
        let theta = bateman_phase(r, c * t, d1, d2);
        (-p * (one - Complex64::i() * theta / gamma).sqrt()).exp() / (d1.sqrt() * d2.sqrt())
    });
    let log_pref = 1.5 * (2.0 * PI).ln() + p.ln() - 0.5 * gamma.ln();
    let spectral: SpectralFn = Arc::new(move |k: [f64; 3]| {
        let kk = kabs(k);
        if kk == 0.0 {
            return ZERO;
        }
        let s = forward_sum(k, kk);
        if s <= 0.0 {
            return ZERO;
        }
        let e = log_pref
            - kk.ln()
            - 1.5 * s.ln()
            - 0.5 * s * gamma
            - p * p / (2.0 * gamma * s)
            - (k[1] * k[1] * eps1 + k[2] * k[2] * eps2) / (2.0 * s);
        Complex64::new(0.0, e.exp())
    });
    PhysicalWavelet::new(
        format!("gaussian-packet(p={p},gamma={gamma},eps1={eps1},eps2={eps2})"),
        Sign::Plus,
        axial_symmetry(eps1, eps2),
        c,
        Some(spectral),
        Some(position),
    )
}

/// Large-p Gaussian approximation of the packet at t = 0.
#[derive(Debug, Clone, Copy)]
pub struct MorletAsymptote {
    pub p: f64,
    pub gamma: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// The constant `C` fixed by matching the packet at the origin.
    pub c_const: Complex64,
    pub kappa: f64,
    pub sigma2: [f64; 3],
    anchor: Complex64,
}

impl MorletAsymptote {
    pub fn eval(&self, r: [f64; 3]) -> Complex64 {
        let e = Complex64::new(
            -r[0] * r[0] / (2.0 * self.sigma2[0])
                - r[1] * r[1] / (2.0 * self.sigma2[1])
                - r[2] * r[2] / (2.0 * self.sigma2[2]),
            self.kappa * r[0],
        );
        self.anchor * e.exp()
    }

    /// Largest relative deviation `|φ − m| / |φ|` between the packet and
    /// the asymptote over the box `|x|/γ, |y|/√(ε₁γ), |z|/√(ε₂γ) ≤ p^{−α}`,
    /// sampled on `n` points per axis.
    pub fn max_relative_deviation(&self, packet: &PhysicalWavelet, alpha: f64, n: usize) -> Result<f64> {
        let half = self.p.powf(-alpha);
        let widths = [self.gamma * half, (self.eps1 * self.gamma).sqrt() * half, (self.eps2 * self.gamma).sqrt() * half];
        let n = n.max(2);
        let node = |axis: usize, i: usize| widths[axis] * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
        let mut worst = 0.0f64;
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let r = [node(0, ix), node(1, iy), node(2, iz)];
                    let exact = packet.position(r, 0.0)?;
                    let approx = self.eval(r);
                    worst = worst.max((exact - approx).norm() / exact.norm());
                }
            }
        }
        Ok(worst)
    }
}

/// Gaussian-modulated plane wave with `σ_x² = 4γ²/p`, `σ_y² = γε₁/p`,
/// `σ_z² = γε₂/p`, `κ = p/2γ`, normalized to equal the packet at `r = 0`.
pub fn morlet_asymptote(p: f64, gamma: f64, eps1: f64, eps2: f64) -> Result<MorletAsymptote> {
    for (name, v) in [("p", p), ("gamma", gamma), ("eps1", eps1), ("eps2", eps2)] {
        positive(name, v)?;
    }
    let root1 = Complex64::new(0.0, -eps1).sqrt();
    let root2 = Complex64::new(0.0, -eps2).sqrt();
    let anchor = Complex64::new((-p).exp(), 0.0) / (root1 * root2);
    Ok(MorletAsymptote {
        p,
        gamma,
        eps1,
        eps2,
        c_const: anchor * root1 * root2,
        kappa: p / (2.0 * gamma),
        sigma2: [4.0 * gamma * gamma / p, gamma * eps1 / p, gamma * eps2 / p],
        anchor,
    })
}

/// A catalog wavelet name with its parameters and defaults.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static [(&'static str, &'static str)],
    pub summary: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "kaiser",
        params: &[("alpha", "3")],
        summary: "spherical, plus subspace, algebraic decay |r|^(-1-alpha)",
    },
    CatalogEntry {
        name: "exp-spherical",
        params: &[],
        summary: "spherical, minus subspace, exponential decay",
    },
    CatalogEntry {
        name: "bateman",
        params: &[("proxy", "exp"), ("eps1", "0.5"), ("eps2", "0.8"), ("alpha", "3"), ("p", "2"), ("gamma", "1")],
        summary: "Bateman substitution of a progressive proxy (exp|kaiser|packet), plus subspace",
    },
    CatalogEntry {
        name: "gaussian-packet",
        params: &[("p", "40"), ("gamma", "1"), ("eps1", "0.5"), ("eps2", "0.5")],
        summary: "Gaussian wave packet, plus subspace, axial when eps1 = eps2",
    },
];

fn lookup<'a>(entry: &CatalogEntry, params: &'a BTreeMap<String, String>, key: &str) -> Result<String> {
    if let Some(v) = params.get(key) {
        return Ok(v.clone());
    }
    entry
        .params
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v.to_string())
        .ok_or_else(|| Error::InvalidParameter(format!("missing parameter `{key}`")))
}

fn number(entry: &CatalogEntry, params: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let raw = lookup(entry, params, key)?;
    raw.parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("parameter `{key}` is not a number: `{raw}`")))
}

/// Builds a catalog wavelet by name. Missing parameters take the listed
/// defaults; unknown parameter keys are rejected.
pub fn catalog_wavelet(name: &str, params: &BTreeMap<String, String>, c: f64) -> Result<PhysicalWavelet> {
    let entry = CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown wavelet `{name}`")))?;
    if let Some(bad) = params.keys().find(|k| !entry.params.iter().any(|(p, _)| p == k)) {
        return Err(Error::InvalidParameter(format!("wavelet `{name}` has no parameter `{bad}`")));
    }
    match name {
        "kaiser" => kaiser_wavelet(number(entry, params, "alpha")?, c),
        "exp-spherical" => exp_spherical_wavelet(c),
        "bateman" => {
            let proxy = match lookup(entry, params, "proxy")?.as_str() {
                "exp" => ProxyWavelet::exponential(),
                "kaiser" => ProxyWavelet::kaiser(number(entry, params, "alpha")?)?,
                "packet" => ProxyWavelet::packet(number(entry, params, "p")?, number(entry, params, "gamma")?)?,
                other => return Err(Error::InvalidParameter(format!("unknown proxy `{other}`"))),
            };
            bateman_from_proxy(&proxy, number(entry, params, "eps1")?, number(entry, params, "eps2")?, c)
        }
        "gaussian-packet" => gaussian_packet(
            number(entry, params, "p")?,
            number(entry, params, "gamma")?,
            number(entry, params, "eps1")?,
            number(entry, params, "eps2")?,
            c,
        ),
        _ => unreachable!("catalog entry without constructor"),
    }
}
