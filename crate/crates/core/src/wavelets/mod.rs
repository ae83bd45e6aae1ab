//! Physical wavelets: exact solutions of the wave equation used as mother
//! wavelets, their similitude-group families, and the catalog of closed
//! forms.

mod catalog;
mod derived;
mod proxy;
mod rotation;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{norm3, ComplexField3, Grid3};

pub use catalog::{
    catalog_wavelet, CatalogEntry, CATALOG,
    bateman_from_proxy, exp_spherical_wavelet, gaussian_packet, kaiser_wavelet, morlet_asymptote,
    spherical_from_proxy, MorletAsymptote,
};
pub use derived::{derive_chi, derive_psi, time_reverse};
pub use proxy::ProxyWavelet;
pub use rotation::{rotation_matrix, RotationMatrix};

/// Frequency-sign subspace. `Plus` solutions evolve as `e^{-i|k|ct}`,
/// `Minus` solutions as `e^{+i|k|ct}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// The `s` in the carrier `e^{s·i|k|ct}`.
    pub fn carrier_exponent(self) -> f64 {
        match self {
            Sign::Plus => -1.0,
            Sign::Minus => 1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }

    pub fn parse(s: &str) -> Result<Sign> {
        match s {
            "plus" | "+" => Ok(Sign::Plus),
            "minus" | "-" => Ok(Sign::Minus),
            other => Err(Error::InvalidParameter(format!("unknown sign `{other}`"))),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Symmetry of a mother wavelet. Axial wavelets are symmetric about the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    Spherical,
    Axial,
    None,
}

impl Symmetry {
    pub fn as_str(self) -> &'static str {
        match self {
            Symmetry::Spherical => "spherical",
            Symmetry::Axial => "axial",
            Symmetry::None => "none",
        }
    }
}

pub type SpectralFn = Arc<dyn Fn([f64; 3]) -> Complex64 + Send + Sync>;
pub type PositionFn = Arc<dyn Fn([f64; 3], f64) -> Complex64 + Send + Sync>;

/// A mother wavelet: closed-form `φ̂(k, 0)` and optionally `φ(r, t)`.
#[derive(Clone)]
pub struct PhysicalWavelet {
    label: String,
    sign: Sign,
    symmetry: Symmetry,
    c: f64,
    spectral: Option<SpectralFn>,
    position: Option<PositionFn>,
}

impl fmt::Debug for PhysicalWavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhysicalWavelet")
            .field("label", &self.label)
            .field("sign", &self.sign)
            .field("symmetry", &self.symmetry)
            .field("c", &self.c)
            .field("spectral", &self.spectral.is_some())
            .field("position", &self.position.is_some())
            .finish()
    }
}

impl PhysicalWavelet {
    pub fn new(
        label: impl Into<String>,
        sign: Sign,
        symmetry: Symmetry,
        c: f64,
        spectral: Option<SpectralFn>,
        position: Option<PositionFn>,
    ) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("wave speed must be positive, got {c}")));
        }
        if spectral.is_none() && position.is_none() {
            return Err(Error::MissingEvaluator);
        }
        Ok(Self { label: label.into(), sign, symmetry, c, spectral, position })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn has_spectral(&self) -> bool {
        self.spectral.is_some()
    }

    pub fn has_position(&self) -> bool {
        self.position.is_some()
    }

    pub(crate) fn spectral_fn(&self) -> Result<&SpectralFn> {
        self.spectral.as_ref().ok_or_else(|| Error::MissingSpectrum(self.label.clone()))
    }

    /// `φ̂(k, 0)`.
    pub fn spectrum(&self, k: [f64; 3]) -> Result<Complex64> {
        Ok((self.spectral_fn()?)(k))
    }

    /// `φ(r, t)`.
    pub fn position(&self, r: [f64; 3], t: f64) -> Result<Complex64> {
        let f = self.position.as_ref().ok_or_else(|| Error::MissingPosition(self.label.clone()))?;
        Ok(f(r, t))
    }

    /// Samples `φ(r, t)` on every node of `grid`.
    pub fn sample(&self, grid: Grid3, t: f64) -> Result<ComplexField3> {
        let f = self.position.as_ref().ok_or_else(|| Error::MissingPosition(self.label.clone()))?;
        ComplexField3::from_fn(grid, |r| f(r, t))
    }

    /// Same wavelet under a different label.
    pub fn relabeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Family parameters ν = (a, b, ϑ₁, ϑ₂[, ϑ₃]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletParams {
    pub a: f64,
    pub b: [f64; 3],
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: Option<f64>,
}

impl WaveletParams {
    pub fn identity() -> Self {
        Self { a: 1.0, b: [0.0; 3], theta1: 0.0, theta2: 0.0, theta3: None }
    }

    pub fn dilation(a: f64) -> Self {
        Self { a, ..Self::identity() }
    }

    /// Checks ranges, and that ϑ₃ is present exactly for wavelets without symmetry.
    pub fn validate(&self, symmetry: Symmetry) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParameter(format!("dilation a = {} must be positive", self.a)));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("translation not finite".into()));
        }
        match (symmetry, self.theta3) {
            (Symmetry::None, None) => {
                return Err(Error::InvalidParameter("theta3 required for a wavelet without symmetry".into()))
            }
            (Symmetry::Spherical | Symmetry::Axial, Some(_)) => {
                return Err(Error::InvalidParameter("theta3 only applies to wavelets without symmetry".into()))
            }
            _ => {}
        }
        rotation_matrix(self.theta1, self.theta2, self.theta3).map(|_| ())
    }
}

/// Cyclic relabelling z → x → y → z, so that the polar axis of the
/// two-angle rotation becomes the x axis.
const AXIS_RELABEL: RotationMatrix =
    RotationMatrix([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);

/// Rotation applied to a mother wavelet of the given symmetry.
///
/// Spherical wavelets ignore the angles. Wavelets symmetric about the x axis
/// use the two-angle matrix written in axes where the symmetry axis plays
/// the role of z, i.e. `P M(ϑ₁, ϑ₂) P⁻¹ = R_x(ϑ₁) R_y(ϑ₂)`; this sweeps the
/// symmetry axis over the whole sphere with polar angle ϑ₂. Wavelets without
/// symmetry use the three Euler angles directly.
pub fn family_rotation(symmetry: Symmetry, theta1: f64, theta2: f64, theta3: Option<f64>) -> Result<RotationMatrix> {
    match symmetry {
        Symmetry::Spherical => Ok(RotationMatrix::IDENTITY),
        Symmetry::Axial => {
            let m = rotation_matrix(theta1, theta2, None)?;
            Ok(AXIS_RELABEL.mul(&m).mul(&AXIS_RELABEL.transpose()))
        }
        Symmetry::None => rotation_matrix(theta1, theta2, Some(theta3.unwrap_or(0.0))),
    }
}

/// `φ^ν(r, t) = a^{-3/2} φ(M⁻¹(r − b)/a, t/a)`.
pub fn family_position(phi: &PhysicalWavelet, nu: &WaveletParams, r: [f64; 3], t: f64) -> Result<Complex64> {
    nu.validate(phi.symmetry)?;
    let f = phi.position.as_ref().ok_or_else(|| Error::MissingPosition(phi.label.clone()))?;
    let m = family_rotation(phi.symmetry, nu.theta1, nu.theta2, nu.theta3)?;
    let d = [r[0] - nu.b[0], r[1] - nu.b[1], r[2] - nu.b[2]];
    let q = m.apply_inverse(d);
    let a = nu.a;
    Ok(f([q[0] / a, q[1] / a, q[2] / a], t / a) / a.powf(1.5))
}

/// `φ̂^ν(k, 0) = a^{3/2} e^{-ik·b} φ̂(a M⁻¹ k, 0)`.
pub fn family_spectral(phi: &PhysicalWavelet, nu: &WaveletParams, k: [f64; 3]) -> Result<Complex64> {
    nu.validate(phi.symmetry)?;
    let f = phi.spectral_fn()?;
    let m = family_rotation(phi.symmetry, nu.theta1, nu.theta2, nu.theta3)?;
    let q = m.apply_inverse(k);
    let a = nu.a;
    let phase = -(k[0] * nu.b[0] + k[1] * nu.b[1] + k[2] * nu.b[2]);
    Ok(Complex64::from_polar(a.powf(1.5), phase) * f([a * q[0], a * q[1], a * q[2]]))
}

/// `|k|` helper shared by the evaluators.
#[inline]
pub(crate) fn kabs(k: [f64; 3]) -> f64 {
    norm3(k)
}
