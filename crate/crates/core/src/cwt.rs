//! Discretized parameter measure and wavelet coefficients.
//!
//! For every node `(a, angles)` of a [`NuGrid`] the coefficients over all
//! lattice translations `b` are one inverse FFT:
//! `U(a, θ, ·) = ifft3(û(k) · a^{3/2} conj φ̂(a M⁻¹ k))`.
//! Coefficient slices can be stored ([`WaveletCoefficients`]) or produced on
//! demand ([`LazyCoefficients`], [`IvpCoefficients`]) when the full set does
//! not fit in memory.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissibility::c_phi;
use crate::error::{Error, Result};
use crate::fields::{ifft3_raw, ComplexField3, Grid3, SpectralField3};
use crate::quadrature::gauss_legendre;
use crate::wavelets::{family_rotation, PhysicalWavelet, RotationMatrix, Sign, SpectralFn, Symmetry};

/// Tolerance used when a constant is computed on the caller's behalf.
pub const DEFAULT_CONSTANT_TOL: f64 = 1e-8;
/// Slices processed together; reductions fold blocks in slice order.
pub(crate) const SLICE_BLOCK: usize = 16;
const MAX_STORED_VALUES: usize = 1 << 28;

/// Parameters that determine a [`NuGrid`] together with its field grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuGridSpec {
    pub symmetry: SymmetryTag,
    pub a_min: f64,
    pub a_max: f64,
    pub n_a: usize,
    pub n_theta1: usize,
    pub n_theta2: usize,
    pub n_theta3: usize,
}

/// Serializable mirror of [`Symmetry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryTag {
    Spherical,
    Axial,
    None,
}

impl From<Symmetry> for SymmetryTag {
    fn from(s: Symmetry) -> Self {
        match s {
            Symmetry::Spherical => SymmetryTag::Spherical,
            Symmetry::Axial => SymmetryTag::Axial,
            Symmetry::None => SymmetryTag::None,
        }
    }
}

impl From<SymmetryTag> for Symmetry {
    fn from(s: SymmetryTag) -> Self {
        match s {
            SymmetryTag::Spherical => Symmetry::Spherical,
            SymmetryTag::Axial => Symmetry::Axial,
            SymmetryTag::None => Symmetry::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleNode {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: Option<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleNode {
    pub a: f64,
    /// Weight for the measure `da / a⁴`.
    pub weight: f64,
}

/// One `(a, angles)` node with its rotation and composite weight.
#[derive(Debug, Clone, Copy)]
pub struct SliceNode {
    pub index: usize,
    pub a: f64,
    pub angles: AngleNode,
    pub rotation: RotationMatrix,
    /// Scale weight times angular weight; the `d³b` weight is the cell volume.
    pub weight: f64,
}

/// Quadrature for `dμ = dϑ₁ sinϑ₂ dϑ₂ [dϑ₃] da/a⁴ d³b`.
///
/// Scales are log-uniform with trapezoid weights in `ln a`. Angles use the
/// trapezoid rule in ϑ₁ (and ϑ₃) and Gauss–Legendre in `cos ϑ₂`; spherical
/// wavelets get a single angular node of weight 4π. Translations are the
/// nodes of the field grid.
///
/// The three-angle measure has total mass 8π², which is 2π times the sphere;
/// [`NuGrid::orbit_factor`] carries that factor into every normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NuGrid {
    grid: Grid3,
    spec: NuGridSpec,
    scales: Vec<ScaleNode>,
    angles: Vec<AngleNode>,
}

impl NuGrid {
    /// `n_theta3` is ignored unless the symmetry is `None`.
    pub fn new(grid: Grid3, spec: NuGridSpec) -> Result<Self> {
        let NuGridSpec { a_min, a_max, n_a, .. } = spec;
        if !(a_min > 0.0 && a_max > a_min && a_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("need 0 < a_min < a_max, got [{a_min}, {a_max}]")));
        }
        if n_a < 2 {
            return Err(Error::InvalidParameter("at least two dilation nodes are required".into()));
        }
        let ds = (a_max / a_min).ln() / (n_a - 1) as f64;
        let scales = (0..n_a)
            .map(|i| {
                let a = if i + 1 == n_a { a_max } else { a_min * (i as f64 * ds).exp() };
                let trap = if i == 0 || i + 1 == n_a { 0.5 } else { 1.0 };
                ScaleNode { a, weight: ds * trap / (a * a * a) }
            })
            .collect();
        let symmetry: Symmetry = spec.symmetry.into();
        let angles = match symmetry {
            Symmetry::Spherical => vec![AngleNode { theta1: 0.0, theta2: 0.0, theta3: None, weight: 4.0 * PI }],
            Symmetry::Axial | Symmetry::None => {
                if spec.n_theta1 == 0 || spec.n_theta2 == 0 {
                    return Err(Error::InvalidParameter("angle node counts must be positive".into()));
                }
                let n3 = if symmetry == Symmetry::None {
                    if spec.n_theta3 == 0 {
                        return Err(Error::InvalidParameter("n_theta3 must be positive".into()));
                    }
                    Some(spec.n_theta3)
                } else {
                    None
                };
                let (mu, wmu) = gauss_legendre(spec.n_theta2);
                let d1 = 2.0 * PI / spec.n_theta1 as f64;
                let mut nodes = Vec::new();
                for j in 0..spec.n_theta1 {
                    // cos ϑ₂ descending so that ϑ₂ ascends
                    for (m, w) in mu.iter().rev().zip(wmu.iter().rev()) {
                        let theta2 = m.clamp(-1.0, 1.0).acos();
                        match n3 {
                            None => nodes.push(AngleNode { theta1: j as f64 * d1, theta2, theta3: None, weight: d1 * w }),
                            Some(n3) => {
                                let d3 = 2.0 * PI / n3 as f64;
                                for l in 0..n3 {
                                    nodes.push(AngleNode {
                                        theta1: j as f64 * d1,
                                        theta2,
                                        theta3: Some(l as f64 * d3),
                                        weight: d1 * w * d3,
                                    });
                                }
                            }
                        }
                    }
                }
                nodes
            }
        };
        Ok(Self { grid, spec, scales, angles })
    }

    /// Reference resolution: 16 × 8 angles (and 8 for ϑ₃).
    pub fn with_defaults(grid: Grid3, symmetry: Symmetry, a_min: f64, a_max: f64, n_a: usize) -> Result<Self> {
        Self::new(
            grid,
            NuGridSpec { symmetry: symmetry.into(), a_min, a_max, n_a, n_theta1: 16, n_theta2: 8, n_theta3: 8 },
        )
    }

    /// Chooses `[a_min, a_max]` so that for every `|k|` in `band` the dilated
    /// wavelet captures at least `coverage` of its admissibility integral.
    pub fn covering(
        grid: Grid3,
        phi: &PhysicalWavelet,
        band: (f64, f64),
        coverage: f64,
        n_a: usize,
        angles: (usize, usize, usize),
    ) -> Result<Self> {
        let (k_lo, k_hi) = band;
        if !(k_lo > 0.0 && k_hi >= k_lo) {
            return Err(Error::InvalidParameter(format!("invalid band [{k_lo}, {k_hi}]")));
        }
        if !(coverage > 0.0 && coverage < 1.0) {
            return Err(Error::InvalidParameter(format!("coverage must lie in (0, 1), got {coverage}")));
        }
        let (q_lo, q_hi) = radial_quantiles(phi, coverage)?;
        Self::new(
            grid,
            NuGridSpec {
                symmetry: phi.symmetry().into(),
                a_min: q_lo / k_hi,
                a_max: q_hi / k_lo,
                n_a,
                n_theta1: angles.0,
                n_theta2: angles.1,
                n_theta3: angles.2,
            },
        )
    }

    /// Same range with node counts doubled.
    pub fn refined(&self) -> Result<Self> {
        let s = self.spec;
        Self::new(
            self.grid,
            NuGridSpec {
                n_a: 2 * s.n_a,
                n_theta1: 2 * s.n_theta1,
                n_theta2: 2 * s.n_theta2,
                n_theta3: 2 * s.n_theta3,
                ..s
            },
        )
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn spec(&self) -> &NuGridSpec {
        &self.spec
    }

    pub fn symmetry(&self) -> Symmetry {
        self.spec.symmetry.into()
    }

    pub fn scales(&self) -> &[ScaleNode] {
        &self.scales
    }

    pub fn angles(&self) -> &[AngleNode] {
        &self.angles
    }

    pub fn total_angular_weight(&self) -> f64 {
        self.angles.iter().map(|a| a.weight).sum()
    }

    /// Mass of the rotation measure divided by the area of the sphere.
    pub fn orbit_factor(&self) -> f64 {
        match self.symmetry() {
            Symmetry::None => 2.0 * PI,
            _ => 1.0,
        }
    }

    pub fn slice_count(&self) -> usize {
        self.scales.len() * self.angles.len()
    }

    /// Total number of coefficients (slices × translations).
    pub fn len(&self) -> usize {
        self.slice_count() * self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, index: usize) -> SliceNode {
        let ia = index / self.angles.len();
        let ang = self.angles[index % self.angles.len()];
        let scale = self.scales[ia];
        let rotation = family_rotation(self.symmetry(), ang.theta1, ang.theta2, ang.theta3)
            .expect("angle nodes lie in range");
        SliceNode { index, a: scale.a, angles: ang, rotation, weight: scale.weight * ang.weight }
    }

    fn check_wavelet(&self, phi: &PhysicalWavelet) -> Result<()> {
        if phi.symmetry() != self.symmetry() {
            return Err(Error::InvalidParameter(format!(
                "wavelet symmetry `{}` does not match the nu-grid (`{}`)",
                phi.symmetry().as_str(),
                self.symmetry().as_str()
            )));
        }
        Ok(())
    }
}

/// Quantiles of `∫ dΩ |φ̂(qω)|² dq/q` at `(1−coverage)/2` and `(1+coverage)/2`.
fn radial_quantiles(phi: &PhysicalWavelet, coverage: f64) -> Result<(f64, f64)> {
    let f = phi.spectral_fn()?;
    let (mu, wmu) = gauss_legendre(24);
    let directions: Vec<([f64; 3], f64)> = if phi.symmetry() == Symmetry::Spherical {
        vec![([1.0, 0.0, 0.0], 4.0 * PI)]
    } else {
        let n_az = 24;
        let mut d = Vec::new();
        for (m, w) in mu.iter().zip(&wmu) {
            let rho = (1.0 - m * m).sqrt();
            for j in 0..n_az {
                let az = 2.0 * PI * j as f64 / n_az as f64;
                d.push(([*m, rho * az.cos(), rho * az.sin()], w * 2.0 * PI / n_az as f64));
            }
        }
        d
    };
    let (s_lo, s_hi, n) = ((1e-6f64).ln(), (1e4f64).ln(), 8000usize);
    let ds = (s_hi - s_lo) / n as f64;
    let profile: Vec<f64> = (0..=n)
        .map(|i| {
            let q = (s_lo + i as f64 * ds).exp();
            directions.iter().map(|(w, wt)| f([q * w[0], q * w[1], q * w[2]]).norm_sqr() * wt).sum()
        })
        .collect();
    let mut cumulative = vec![0.0; n + 1];
    for i in 1..=n {
        cumulative[i] = cumulative[i - 1] + 0.5 * ds * (profile[i - 1] + profile[i]);
    }
    let total = cumulative[n];
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Inadmissible("radial profile is not integrable on [1e-6, 1e4]".into()));
    }
    let quantile = |level: f64| {
        let target = level * total;
        let i = cumulative.partition_point(|c| *c < target).clamp(1, n);
        let (c0, c1) = (cumulative[i - 1], cumulative[i]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        (s_lo + (i as f64 - 1.0 + frac) * ds).exp()
    };
    let tail = 0.5 * (1.0 - coverage);
    Ok((quantile(tail), quantile(1.0 - tail)))
}

/// Precomputed `a^{3/2} φ̂(a M⁻¹ k)` evaluator on a lattice.
pub(crate) struct SliceSpectra<'a> {
    f: &'a SpectralFn,
    wavevectors: Vec<[f64; 3]>,
}

impl<'a> SliceSpectra<'a> {
    pub(crate) fn new(phi: &'a PhysicalWavelet, grid: &Grid3) -> Result<Self> {
        Ok(Self { f: phi.spectral_fn()?, wavevectors: grid.wavevectors() })
    }

    /// Family spectrum on the lattice; entries with `mask[i] == false` are left zero.
    pub(crate) fn eval(&self, node: &SliceNode, mask: Option<&[bool]>) -> Vec<Complex64> {
        let a = node.a;
        let pref = a.powf(1.5);
        self.wavevectors
            .iter()
            .enumerate()
            .map(|(i, k)| {
                if mask.is_some_and(|m| !m[i]) {
                    return Complex64::new(0.0, 0.0);
                }
                let q = node.rotation.apply_inverse(*k);
                (self.f)([a * q[0], a * q[1], a * q[2]]) * pref
            })
            .collect()
    }
}

/// Producer of coefficient slices over the translation lattice.
pub trait CoefficientSource: Sync {
    fn nu_grid(&self) -> &NuGrid;
    fn sign(&self) -> Sign;
    /// Normalization constant for synthesis with the analysing wavelet.
    fn c_const(&self) -> Complex64;
    /// `U(a, angles, b)` for all lattice `b` of slice `index`.
    fn slice(&self, index: usize) -> Vec<Complex64>;
}

/// Stored coefficients, ordered by slice (a slowest, then ϑ₁, ϑ₂, ϑ₃) and
/// then by translation in field order.
#[derive(Debug, Clone)]
pub struct WaveletCoefficients {
    pub nu_grid: NuGrid,
    pub values: Vec<Complex64>,
    pub sign: Sign,
    pub c_const: Complex64,
    pub wavelet: String,
}

impl WaveletCoefficients {
    pub fn new(nu_grid: NuGrid, values: Vec<Complex64>, sign: Sign, c_const: Complex64, wavelet: String) -> Result<Self> {
        if values.len() != nu_grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                nu_grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !(c_const.is_finite() && c_const.norm() > 0.0) {
            return Err(Error::ZeroConstant);
        }
        Ok(Self { nu_grid, values, sign, c_const, wavelet })
    }

    /// Materializes any source.
    pub fn collect(source: &dyn CoefficientSource, wavelet: String) -> Result<Self> {
        let g = source.nu_grid();
        if g.len() > MAX_STORED_VALUES {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients exceed the storage limit; use a lazy source",
                g.len()
            )));
        }
        let slices: Vec<Vec<Complex64>> = (0..g.slice_count()).into_par_iter().map(|i| source.slice(i)).collect();
        let values = slices.concat();
        Self::new(g.clone(), values, source.sign(), source.c_const(), wavelet)
    }

    pub fn slice_values(&self, index: usize) -> &[Complex64] {
        let n = self.nu_grid.grid().len();
        &self.values[index * n..(index + 1) * n]
    }

    /// Linear combination `α·self + β·other` on the same nu-grid.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        if self.nu_grid != other.nu_grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
        Self::new(self.nu_grid.clone(), values, self.sign, self.c_const, self.wavelet.clone())
    }
}

impl CoefficientSource for WaveletCoefficients {
    fn nu_grid(&self) -> &NuGrid {
        &self.nu_grid
    }
    fn sign(&self) -> Sign {
        self.sign
    }
    fn c_const(&self) -> Complex64 {
        self.c_const
    }
    fn slice(&self, index: usize) -> Vec<Complex64> {
        self.slice_values(index).to_vec()
    }
}

/// Coefficients of one spectral field against one wavelet, computed per
/// slice on request.
pub struct LazyCoefficients<'a> {
    data: Vec<Complex64>,
    mask: Vec<bool>,
    spectra: SliceSpectra<'a>,
    nu_grid: NuGrid,
    sign: Sign,
    c_const: Complex64,
    /// `conj φ̂(k, t)` relative to `conj φ̂(k, 0)`, for snapshot analysis.
    carrier: Option<Vec<Complex64>>,
}

impl<'a> LazyCoefficients<'a> {
    /// Analysis of `û(k, 0)` of a solution in the `sign` subspace.
    pub fn new(part: &SpectralField3, sign: Sign, phi: &'a PhysicalWavelet, g: &NuGrid, c_const: Complex64) -> Result<Self> {
        if phi.sign() != sign {
            return Err(Error::SignMismatch { expected: sign.as_str(), found: phi.sign().as_str() });
        }
        Self::unchecked(part, sign, phi, g, c_const)
    }

    /// Analysis of arbitrary data (initial values), ignoring the sign tag of `phi`.
    pub(crate) fn unchecked(part: &SpectralField3, sign: Sign, phi: &'a PhysicalWavelet, g: &NuGrid, c_const: Complex64) -> Result<Self> {
        if part.grid() != g.grid() {
            return Err(Error::GridMismatch);
        }
        g.check_wavelet(phi)?;
        let data = part.values().to_vec();
        let mask = data.iter().map(|v| v.norm_sqr() > 0.0).collect();
        Ok(Self {
            data,
            mask,
            spectra: SliceSpectra::new(phi, g.grid())?,
            nu_grid: g.clone(),
            sign,
            c_const,
            carrier: None,
        })
    }

    fn with_snapshot_time(mut self, c: f64, t: f64) -> Self {
        // ⟨u(t), φ^ν(t)⟩: conj of φ̂ e^{s i|k|ct} is conj φ̂ e^{−s i|k|ct}
        let s = self.sign.carrier_exponent();
        let carrier = self
            .spectra
            .wavevectors
            .iter()
            .map(|k| Complex64::from_polar(1.0, -s * crate::fields::norm3(*k) * c * t))
            .collect();
        self.carrier = Some(carrier);
        self
    }
}

impl CoefficientSource for LazyCoefficients<'_> {
    fn nu_grid(&self) -> &NuGrid {
        &self.nu_grid
    }
    fn sign(&self) -> Sign {
        self.sign
    }
    fn c_const(&self) -> Complex64 {
        self.c_const
    }
    fn slice(&self, index: usize) -> Vec<Complex64> {
        let node = self.nu_grid.slice(index);
        let spectrum = self.spectra.eval(&node, Some(&self.mask));
        let mut product: Vec<Complex64> = self.data.iter().zip(&spectrum).map(|(u, w)| u * w.conj()).collect();
        if let Some(carrier) = &self.carrier {
            for (p, e) in product.iter_mut().zip(carrier) {
                *p *= e;
            }
        }
        ifft3_raw(self.nu_grid.grid(), product)
    }
}

fn constant_for(phi: &PhysicalWavelet) -> Result<Complex64> {
    c_phi(phi, DEFAULT_CONSTANT_TOL)?.require()
}

/// Coefficients of the `sign` part `û(k, 0)` against `phi` over `g`.
/// The admissibility constant is computed to [`DEFAULT_CONSTANT_TOL`].
pub fn analyze(part: &SpectralField3, sign: Sign, phi: &PhysicalWavelet, g: &NuGrid) -> Result<WaveletCoefficients> {
    let c = constant_for(phi)?;
    analyze_with_constant(part, sign, phi, g, c)
}

pub fn analyze_with_constant(
    part: &SpectralField3,
    sign: Sign,
    phi: &PhysicalWavelet,
    g: &NuGrid,
    c_const: Complex64,
) -> Result<WaveletCoefficients> {
    let lazy = LazyCoefficients::new(part, sign, phi, g, c_const)?;
    WaveletCoefficients::collect(&lazy, phi.label().to_string())
}

/// Lazy variant of [`analyze_with_constant`].
pub fn analyze_lazy<'a>(
    part: &SpectralField3,
    sign: Sign,
    phi: &'a PhysicalWavelet,
    g: &NuGrid,
    c_const: Complex64,
) -> Result<LazyCoefficients<'a>> {
    LazyCoefficients::new(part, sign, phi, g, c_const)
}

/// Coefficients `⟨u(·, t), φ^ν(·, t)⟩` from the spectrum of a snapshot at
/// time `t` of a solution in the `sign` subspace. Equal to the `t = 0`
/// coefficients for a solution of that subspace.
pub fn analyze_snapshot<'a>(
    snapshot: &SpectralField3,
    t: f64,
    sign: Sign,
    phi: &'a PhysicalWavelet,
    g: &NuGrid,
    c_const: Complex64,
) -> Result<LazyCoefficients<'a>> {
    Ok(LazyCoefficients::new(snapshot, sign, phi, g, c_const)?.with_snapshot_time(phi.c(), t))
}

/// `W± = ⟨w, φ±^ν⟩` and `V± = ⟨v, ψ±^ν⟩`.
#[derive(Debug, Clone)]
pub struct InitialDataCoefficients {
    pub w_plus: WaveletCoefficients,
    pub w_minus: WaveletCoefficients,
    pub v_plus: WaveletCoefficients,
    pub v_minus: WaveletCoefficients,
}

/// The wavelet pair used for one subspace of an initial-value problem.
pub struct BranchWavelets<'a> {
    pub phi: &'a PhysicalWavelet,
    pub psi: &'a PhysicalWavelet,
}

fn check_branch(branch: &BranchWavelets<'_>, sign: Sign) -> Result<()> {
    for w in [branch.phi, branch.psi] {
        if w.sign() != sign {
            return Err(Error::SignMismatch { expected: sign.as_str(), found: w.sign().as_str() });
        }
    }
    Ok(())
}

/// Stored transforms of the initial data against `φ±` and `ψ±`.
pub fn analyze_initial_data(
    w: &ComplexField3,
    v: &ComplexField3,
    plus: BranchWavelets<'_>,
    minus: BranchWavelets<'_>,
    g: &NuGrid,
) -> Result<InitialDataCoefficients> {
    check_branch(&plus, Sign::Plus)?;
    check_branch(&minus, Sign::Minus)?;
    let w_hat = crate::fields::fft3(w)?;
    let v_hat = crate::fields::fft3(v)?;
    let c_plus = constant_for(plus.phi)?;
    let c_minus = constant_for(minus.phi)?;
    let run = |data: &SpectralField3, wavelet: &PhysicalWavelet, sign: Sign, c: Complex64| {
        let lazy = LazyCoefficients::unchecked(data, sign, wavelet, g, c)?;
        WaveletCoefficients::collect(&lazy, wavelet.label().to_string())
    };
    Ok(InitialDataCoefficients {
        w_plus: run(&w_hat, plus.phi, Sign::Plus, c_plus)?,
        w_minus: run(&w_hat, minus.phi, Sign::Minus, c_minus)?,
        v_plus: run(&v_hat, plus.psi, Sign::Plus, c_plus)?,
        v_minus: run(&v_hat, minus.psi, Sign::Minus, c_minus)?,
    })
}

impl InitialDataCoefficients {
    /// `U± = ½W± ∓ (a/2)V±`.
    pub fn solution_coefficients(&self, sign: Sign) -> Result<WaveletCoefficients> {
        let (w, v) = match sign {
            Sign::Plus => (&self.w_plus, &self.v_plus),
            Sign::Minus => (&self.w_minus, &self.v_minus),
        };
        let g = &w.nu_grid;
        let n = g.grid().len();
        let mut values = Vec::with_capacity(w.values.len());
        for i in 0..g.slice_count() {
            let a = g.slice(i).a;
            combine_ivp(&w.values[i * n..(i + 1) * n], &v.values[i * n..(i + 1) * n], a, sign, &mut values);
        }
        WaveletCoefficients::new(g.clone(), values, sign, w.c_const, w.wavelet.clone())
    }
}

fn combine_ivp(w: &[Complex64], v: &[Complex64], a: f64, sign: Sign, out: &mut Vec<Complex64>) {
    // ∓ a/2 with the upper sign for the plus subspace
    let va = 0.5 * a * sign.carrier_exponent();
    out.extend(w.iter().zip(v).map(|(w, v)| 0.5 * w + va * v));
}

/// `U± = ½W± ∓ (a/2)V±` evaluated slice by slice without storage.
pub struct IvpCoefficients<'a> {
    w: LazyCoefficients<'a>,
    v: LazyCoefficients<'a>,
}

impl<'a> IvpCoefficients<'a> {
    pub fn new(
        w_hat: &SpectralField3,
        v_hat: &SpectralField3,
        sign: Sign,
        branch: BranchWavelets<'a>,
        g: &NuGrid,
        c_const: Complex64,
    ) -> Result<Self> {
        check_branch(&branch, sign)?;
        Ok(Self {
            w: LazyCoefficients::unchecked(w_hat, sign, branch.phi, g, c_const)?,
            v: LazyCoefficients::unchecked(v_hat, sign, branch.psi, g, c_const)?,
        })
    }
}

impl CoefficientSource for IvpCoefficients<'_> {
    fn nu_grid(&self) -> &NuGrid {
        self.w.nu_grid()
    }
    fn sign(&self) -> Sign {
        self.w.sign()
    }
    fn c_const(&self) -> Complex64 {
        self.w.c_const()
    }
    fn slice(&self, index: usize) -> Vec<Complex64> {
        let a = self.nu_grid().slice(index).a;
        let (w, v) = (self.w.slice(index), self.v.slice(index));
        let mut out = Vec::with_capacity(w.len());
        combine_ivp(&w, &v, a, self.sign(), &mut out);
        out
    }
}

/// `(1/C) ∫ dμ U conj(V)` by the nu-grid weights and the cell volume.
pub fn coefficient_pairing(u: &dyn CoefficientSource, v: &dyn CoefficientSource) -> Result<Complex64> {
    Ok(weighted_pairings(u, v)?.0)
}

/// Returns `(pairing, scale)` where `scale = √(‖U‖²‖V‖²)` in the same measure.
fn weighted_pairings(u: &dyn CoefficientSource, v: &dyn CoefficientSource) -> Result<(Complex64, f64)> {
    let g = u.nu_grid();
    if g != v.nu_grid() {
        return Err(Error::GridMismatch);
    }
    if u.sign() != v.sign() {
        return Err(Error::SignMismatch { expected: u.sign().as_str(), found: v.sign().as_str() });
    }
    let c = u.c_const();
    if !(c.is_finite() && c.norm() > 0.0) {
        return Err(Error::ZeroConstant);
    }
    let cell = g.grid().cell_volume();
    let same = std::ptr::addr_eq(u, v);
    let mut total = Complex64::new(0.0, 0.0);
    let (mut uu, mut vv) = (0.0, 0.0);
    let count = g.slice_count();
    for start in (0..count).step_by(SLICE_BLOCK) {
        let end = (start + SLICE_BLOCK).min(count);
        let parts: Vec<(Complex64, f64, f64)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let w = g.slice(i).weight * cell;
                let a = u.slice(i);
                let b = if same { a.clone() } else { v.slice(i) };
                let mut s = Complex64::new(0.0, 0.0);
                let (mut na, mut nb) = (0.0, 0.0);
                for (x, y) in a.iter().zip(&b) {
                    s += x * y.conj();
                    na += x.norm_sqr();
                    nb += y.norm_sqr();
                }
                (s * w, na * w, nb * w)
            })
            .collect();
        for (s, na, nb) in parts {
            total += s;
            uu += na;
            vv += nb;
        }
    }
    let norm = c * g.orbit_factor();
    Ok((total / norm, (uu * vv).sqrt() / norm.norm()))
}

/// `|(1/C)∫dμ U·conj(V) − ref| / |ref|`; absolute when `ref` is negligible
/// against the coefficient norms.
pub fn isometry_defect(u: &dyn CoefficientSource, v: &dyn CoefficientSource, reference: Complex64) -> Result<f64> {
    let (pairing, scale) = weighted_pairings(u, v)?;
    let diff = (pairing - reference).norm();
    if reference.norm() <= 1e-12 * scale || reference.norm() == 0.0 {
        Ok(diff)
    } else {
        Ok(diff / reference.norm())
    }
}

/// `m(k) = (1/(C·orbit)) Σ w a³ |φ̂(a M⁻¹ k)|²` on every lattice wavevector:
/// the factor by which analysis followed by synthesis multiplies `û(k)`.
pub fn frame_multiplier(phi: &PhysicalWavelet, g: &NuGrid, c_const: Complex64) -> Result<Vec<f64>> {
    g.check_wavelet(phi)?;
    let spectra = SliceSpectra::new(phi, g.grid())?;
    let n = g.grid().len();
    let mut acc = vec![0.0; n];
    let count = g.slice_count();
    for start in (0..count).step_by(SLICE_BLOCK) {
        let end = (start + SLICE_BLOCK).min(count);
        let parts: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let node = g.slice(i);
                spectra.eval(&node, None).iter().map(|v| v.norm_sqr() * node.weight).collect()
            })
            .collect();
        for p in parts {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
    }
    let norm = c_const.re * g.orbit_factor();
    Ok(acc.into_iter().map(|v| v / norm).collect())
}
