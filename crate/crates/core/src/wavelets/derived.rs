use std::sync::Arc;

use num_complex::Complex64;

use super::{kabs, PhysicalWavelet, PositionFn, SpectralFn};

/// `ψ̂(k) = φ̂(k) / (−ic|k|)`, zero at k = 0. Spectral form only.
pub fn derive_psi(phi: &PhysicalWavelet) -> PhysicalWavelet {
    let c = phi.c();
    let spectral: Option<SpectralFn> = phi.spectral.clone().map(|f| {
        Arc::new(move |k: [f64; 3]| {
            let kk = kabs(k);
            if kk == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                f(k) * Complex64::new(0.0, 1.0 / (c * kk))
            }
        }) as SpectralFn
    });
    PhysicalWavelet {
        label: format!("psi[{}]", phi.label()),
        sign: phi.sign(),
        symmetry: phi.symmetry(),
        c,
        spectral,
        position: None,
    }
}

/// `χ̂(k) = −ic|k| φ̂(k)`. Spectral form only.
pub fn derive_chi(phi: &PhysicalWavelet) -> PhysicalWavelet {
    let c = phi.c();
    let spectral: Option<SpectralFn> = phi.spectral.clone().map(|f| {
        Arc::new(move |k: [f64; 3]| f(k) * Complex64::new(0.0, -c * kabs(k))) as SpectralFn
    });
    PhysicalWavelet {
        label: format!("chi[{}]", phi.label()),
        sign: phi.sign(),
        symmetry: phi.symmetry(),
        c,
        spectral,
        position: None,
    }
}

/// `φ(r, t) → φ(r, −t)`: the stored `φ̂(k, 0)` is kept, the sign tag flips.
pub fn time_reverse(phi: &PhysicalWavelet) -> PhysicalWavelet {
    let position: Option<PositionFn> = phi
        .position
        .clone()
        .map(|f| Arc::new(move |r: [f64; 3], t: f64| f(r, -t)) as PositionFn);
    PhysicalWavelet {
        label: reversed_label(phi.label()),
        sign: phi.sign().flip(),
        symmetry: phi.symmetry(),
        c: phi.c(),
        spectral: phi.spectral.clone(),
        position,
    }
}

fn reversed_label(label: &str) -> String {
    match label.strip_prefix("reversed[").and_then(|s| s.strip_suffix(']')) {
        Some(inner) => inner.to_string(),
        None => format!("reversed[{label}]"),
    }
}
