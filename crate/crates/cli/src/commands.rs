use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use wavecwt::admissibility::c_phi;
use wavecwt::cwt::{analyze_lazy, analyze_with_constant, isometry_defect, NuGrid, NuGridSpec, DEFAULT_CONSTANT_TOL};
use wavecwt::fields::{fft3, ifft3, ComplexField3, Grid3, SpectralField3};
use wavecwt::format::{read_wcf, read_wfld, write_wcf, write_wfld, WfldHeader};
use wavecwt::oracle::{compare, dalembert_residual, fourier_ivp};
use wavecwt::synthesis::{reconstruct, solve_ivp, IvpWavelets};
use wavecwt::wavelets::{catalog_wavelet, time_reverse, PhysicalWavelet, Sign, CATALOG};
use wavecwt::Error;

use crate::manifest::Recorder;
use crate::{
    AdmissibilityArgs, AnalyzeArgs, CompareArgs, Failure, FieldKind, IsometryArgs, IvpArgs, IvpMethod, MakeFieldArgs,
    NuGridArgs, ResidualArgs, SignArg, SynthesizeArgs,
};

const REVERSED: &str = "reversed:";
/// Relative spectral level above which a wavenumber counts as occupied.
const BAND_THRESHOLD: f64 = 1e-6;

fn emit(value: Value) {
    println!("{value}");
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, String>, Failure> {
    raw.iter()
        .map(|p| match p.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => Err(Failure::Usage(format!("--param expects KEY=VALUE, got `{p}`"))),
        })
        .collect()
}

/// Catalog wavelet with an optional `reversed:` prefix, plus its descriptor.
fn build_wavelet(spec: &str, params: &[String], c: f64) -> Result<(PhysicalWavelet, Value), Failure> {
    let params = parse_params(params)?;
    let (reversed, name) = match spec.strip_prefix(REVERSED) {
        Some(rest) => (true, rest),
        None => (false, spec),
    };
    let base = catalog_wavelet(name, &params, c)?;
    let phi = if reversed { time_reverse(&base) } else { base };
    let descriptor = json!({
        "name": name,
        "reversed": reversed,
        "params": params,
        "c": c,
        "label": phi.label(),
        "sign": phi.sign().as_str(),
    });
    Ok((phi, descriptor))
}

fn read_field(path: &str) -> Result<(ComplexField3, WfldHeader), Failure> {
    let mut r = BufReader::new(File::open(path)?);
    Ok(read_wfld(&mut r)?)
}

fn write_field(path: &str, field: &ComplexField3, c: Option<f64>) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path)?);
    write_wfld(&mut w, field, c)?;
    Ok(())
}

fn band_of(spectra: &[&SpectralField3]) -> Result<(f64, f64), Failure> {
    let mut band: Option<(f64, f64)> = None;
    for s in spectra {
        if let Some((lo, hi)) = s.occupied_band(BAND_THRESHOLD) {
            band = Some(match band {
                Some((a, b)) => (a.min(lo), b.max(hi)),
                None => (lo, hi),
            });
        }
    }
    band.ok_or_else(|| Failure::Domain(Error::InvalidParameter("input has no nonzero wavenumbers".into())))
}

fn build_nu_grid(args: &NuGridArgs, grid: Grid3, phi: &PhysicalWavelet, band: (f64, f64)) -> Result<NuGrid, Failure> {
    let angles = (args.n_theta1, args.n_theta2, args.n_theta3);
    match (args.a_min, args.a_max) {
        (Some(a_min), Some(a_max)) => Ok(NuGrid::new(
            grid,
            NuGridSpec {
                symmetry: phi.symmetry().into(),
                a_min,
                a_max,
                n_a: args.n_a,
                n_theta1: angles.0,
                n_theta2: angles.1,
                n_theta3: angles.2,
            },
        )?),
        (None, None) => Ok(NuGrid::covering(grid, phi, band, args.coverage, args.n_a, angles)?),
        _ => Err(Failure::Usage("--a-min and --a-max must be given together".into())),
    }
}

fn complex_json(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn nu_json(g: &NuGrid) -> Value {
    json!({
        "symmetry": g.symmetry().as_str(),
        "a_min": g.spec().a_min,
        "a_max": g.spec().a_max,
        "n_a": g.spec().n_a,
        "angles": g.angles().len(),
        "slices": g.slice_count(),
    })
}

pub fn catalog() -> Result<(), Failure> {
    for entry in CATALOG {
        let params: BTreeMap<&str, &str> = entry.params.iter().copied().collect();
        emit(json!({ "name": entry.name, "params": params, "summary": entry.summary }));
    }
    Ok(())
}

pub fn admissibility(args: &AdmissibilityArgs) -> Result<(), Failure> {
    let (phi, descriptor) = build_wavelet(&args.wavelet.wavelet, &args.wavelet.params, args.c)?;
    let report = c_phi(&phi, args.tol)?;
    emit(json!({
        "wavelet": descriptor,
        "tol": args.tol,
        "constant": complex_json(report.constant),
        "converged": report.converged,
        "quadrature_error_estimate": report.quadrature_error_estimate,
        "divergence_reason": report.divergence_reason,
    }));
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let rec = Recorder::begin("analyze", args, &[&args.input])?;
    let (field, header) = read_field(&args.input)?;
    let c = args.c.or(header.c).unwrap_or(1.0);
    let (phi, descriptor) = build_wavelet(&args.wavelet.wavelet, &args.wavelet.params, c)?;
    let sign = match args.sign {
        Some(SignArg::Plus) => Sign::Plus,
        Some(SignArg::Minus) => Sign::Minus,
        None => phi.sign(),
    };
    let u_hat = fft3(&field)?;
    let g = build_nu_grid(&args.nu, *field.grid(), &phi, band_of(&[&u_hat])?)?;
    let constant = c_phi(&phi, DEFAULT_CONSTANT_TOL)?.require()?;
    let coeffs = analyze_with_constant(&u_hat, sign, &phi, &g, constant)?;
    {
        let mut w = BufWriter::new(File::create(&args.out)?);
        write_wcf(&mut w, &coeffs, descriptor)?;
    }
    let digest = rec.finish(&args.out)?;
    emit(json!({
        "command": "analyze",
        "out": args.out,
        "sha256": digest,
        "nu_grid": nu_json(&g),
        "coefficients": coeffs.values.len(),
        "c_const": complex_json(constant),
    }));
    Ok(())
}

pub fn synthesize(args: &SynthesizeArgs) -> Result<(), Failure> {
    let rec = Recorder::begin("synthesize", args, &[&args.coeffs])?;
    let (coeffs, header) = {
        let mut r = BufReader::new(File::open(&args.coeffs)?);
        read_wcf(&mut r)?
    };
    let stored_c = header.wavelet.get("c").and_then(Value::as_f64);
    let c = args.c.or(stored_c).unwrap_or(1.0);
    let phi = match &args.wavelet {
        Some(spec) => build_wavelet(spec, &args.params, c)?.0,
        None => {
            let name = header.wavelet.get("name").and_then(Value::as_str).ok_or_else(|| {
                Failure::Usage("coefficient file names no wavelet; pass --wavelet".into())
            })?;
            let reversed = header.wavelet.get("reversed").and_then(Value::as_bool).unwrap_or(false);
            let mut params: Vec<String> = header
                .wavelet
                .get("params")
                .and_then(Value::as_object)
                .map(|m| m.iter().map(|(k, v)| format!("{k}={}", v.as_str().unwrap_or_default())).collect())
                .unwrap_or_default();
            params.extend(args.params.iter().cloned());
            let spec = if reversed { format!("{REVERSED}{name}") } else { name.to_string() };
            build_wavelet(&spec, &params, c)?.0
        }
    };
    let field = reconstruct(&coeffs, &phi, args.t)?;
    write_field(&args.out, &field, Some(c))?;
    let digest = rec.finish(&args.out)?;
    emit(json!({ "command": "synthesize", "out": args.out, "sha256": digest, "t": args.t, "wavelet": phi.label() }));
    Ok(())
}

pub fn ivp(args: &IvpArgs) -> Result<(), Failure> {
    let rec = Recorder::begin("ivp", args, &[&args.w, &args.v])?;
    let (w, _) = read_field(&args.w)?;
    let (v, _) = read_field(&args.v)?;
    if w.grid() != v.grid() {
        return Err(Error::GridMismatch.into());
    }
    let (field, detail) = match args.method {
        IvpMethod::Fourier => (fourier_ivp(&w, &v, args.c, args.t)?, Value::Null),
        IvpMethod::Wavelet => {
            let (plus, _) = build_wavelet(&args.wavelet_plus, &args.params, args.c)?;
            let minus_spec = args.wavelet_minus.clone().unwrap_or_else(|| match args.wavelet_plus.strip_prefix(REVERSED) {
                Some(rest) => rest.to_string(),
                None => format!("{REVERSED}{}", args.wavelet_plus),
            });
            let (minus, _) = build_wavelet(&minus_spec, &args.params, args.c)?;
            let (w_hat, v_hat) = (fft3(&w)?, fft3(&v)?);
            let g = build_nu_grid(&args.nu, *w.grid(), &plus, band_of(&[&w_hat, &v_hat])?)?;
            let u = solve_ivp(&w, &v, IvpWavelets { plus: &plus, minus: &minus }, &g, args.t)?;
            (u, nu_json(&g))
        }
    };
    write_field(&args.out, &field, Some(args.c))?;
    let digest = rec.finish(&args.out)?;
    emit(json!({ "command": "ivp", "method": args.method, "out": args.out, "sha256": digest, "t": args.t, "nu_grid": detail }));
    Ok(())
}

fn check_result(pass: bool, what: &str) -> Result<(), Failure> {
    if pass {
        Ok(())
    } else {
        Err(Failure::CheckFailed(format!("{what} check exceeded its tolerance")))
    }
}

pub fn verify_compare(args: &CompareArgs) -> Result<(), Failure> {
    let (a, _) = read_field(&args.a)?;
    let (b, _) = read_field(&args.b)?;
    let r = compare(&a, &b)?;
    let pass = r.rel_l2 <= args.tol;
    emit(json!({ "check": "compare", "rel_l2": r.rel_l2, "max_abs": r.max_abs, "tol": args.tol, "pass": pass }));
    check_result(pass, "compare")
}

pub fn verify_residual(args: &ResidualArgs) -> Result<(), Failure> {
    if let Some(paths) = &args.snapshots {
        let dt = args.dt.ok_or_else(|| Failure::Usage("--snapshots needs --dt".into()))?;
        let fields = paths.iter().map(|p| read_field(p).map(|f| f.0)).collect::<Result<Vec<_>, _>>()?;
        let r = dalembert_residual([&fields[0], &fields[1], &fields[2]], args.c, dt)?;
        let pass = r.rel_l2 <= args.tol;
        emit(json!({ "check": "residual", "rel_l2": r.rel_l2, "max_abs": r.max_abs, "dt": dt, "tol": args.tol, "pass": pass }));
        return check_result(pass, "residual");
    }
    let spec = args.wavelet.as_deref().ok_or_else(|| Failure::Usage("give --snapshots or --wavelet".into()))?;
    if args.levels == 0 {
        return Err(Failure::Usage("--levels must be at least 1".into()));
    }
    let (phi, _) = build_wavelet(spec, &args.params, args.c)?;
    let mut residuals = Vec::new();
    for level in 0..args.levels {
        let n = args.n << level;
        let grid = Grid3::centered_cube(n, args.length)?;
        let h = grid.h()[0];
        let dt = 0.5 * h / args.c;
        let snaps =
            [args.t - dt, args.t, args.t + dt].iter().map(|&s| phi.sample(grid, s)).collect::<Result<Vec<_>, _>>()?;
        let r = dalembert_residual([&snaps[0], &snaps[1], &snaps[2]], args.c, dt)?;
        emit(json!({ "check": "residual", "level": level, "n": n, "h": h, "dt": dt, "rel_l2": r.rel_l2 }));
        residuals.push(r.rel_l2);
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let finest = *residuals.last().expect("at least one level");
    let pass = finest <= args.tol;
    emit(json!({ "check": "residual", "wavelet": phi.label(), "rel_l2": finest, "ratios": ratios, "tol": args.tol, "pass": pass }));
    check_result(pass, "residual")
}

pub fn verify_isometry(args: &IsometryArgs) -> Result<(), Failure> {
    let (field, header) = read_field(&args.input)?;
    let c = args.c.or(header.c).unwrap_or(1.0);
    let (phi, _) = build_wavelet(&args.wavelet.wavelet, &args.wavelet.params, c)?;
    let u_hat = fft3(&field)?;
    let g = build_nu_grid(&args.nu, *field.grid(), &phi, band_of(&[&u_hat])?)?;
    let constant = c_phi(&phi, DEFAULT_CONSTANT_TOL)?.require()?;
    let source = analyze_lazy(&u_hat, phi.sign(), &phi, &g, constant)?;
    let reference = u_hat.inner_product(&u_hat)?;
    let defect = isometry_defect(&source, &source, reference)?;
    let pass = defect <= args.tol;
    emit(json!({ "check": "isometry", "defect": defect, "nu_grid": nu_json(&g), "tol": args.tol, "pass": pass }));
    check_result(pass, "isometry")
}

pub fn make_field(args: &MakeFieldArgs) -> Result<(), Failure> {
    for (flag, got, want) in [("--mode", args.mode.len(), 3), ("--center", args.center.len(), 3), ("--band", args.band.len(), 2)] {
        if got != want {
            return Err(Failure::Usage(format!("{flag} takes {want} comma-separated values, got {got}")));
        }
    }
    let rec = Recorder::begin("make-field", args, &[])?;
    let length = args.length.unwrap_or(2.0 * PI);
    let grid = Grid3::centered_cube(args.n, length)?;
    let dk = 2.0 * PI / length;
    let field = match args.kind {
        FieldKind::Tone => {
            let k = [args.mode[0] as f64 * dk, args.mode[1] as f64 * dk, args.mode[2] as f64 * dk];
            ComplexField3::from_fn(grid, |r| Complex64::from_polar(1.0, k[0] * r[0] + k[1] * r[1] + k[2] * r[2]))?
        }
        FieldKind::Gaussian => {
            if !(args.sigma > 0.0) {
                return Err(Error::InvalidParameter("--sigma must be positive".into()).into());
            }
            let c = &args.center;
            ComplexField3::from_fn(grid, |r| {
                let d2 = (r[0] - c[0]).powi(2) + (r[1] - c[1]).powi(2) + (r[2] - c[2]).powi(2);
                Complex64::new((-d2 / (2.0 * args.sigma * args.sigma)).exp(), 0.0)
            })?
        }
        FieldKind::Shell => {
            let (lo, hi) = (args.band[0] * dk, args.band[1] * dk);
            if !(lo >= 0.0 && hi >= lo) {
                return Err(Error::InvalidParameter("--band must satisfy 0 <= lo <= hi".into()).into());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let values = grid
                .wavevectors()
                .into_iter()
                .map(|k| {
                    let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
                    if kk >= lo && kk <= hi && kk > 0.0 {
                        z
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            ifft3(&SpectralField3::new(grid, values)?)?
        }
        FieldKind::Wavelet => {
            let spec = args.wavelet.as_deref().ok_or_else(|| Failure::Usage("--kind wavelet needs --wavelet".into()))?;
            let (phi, _) = build_wavelet(spec, &args.params, args.c)?;
            if args.time_derivative {
                // eighth-order central difference on the scale of one cell crossing
                let step = 0.05 * grid.h()[0] / args.c;
                let weights = [(1.0, 4.0 / 5.0), (2.0, -1.0 / 5.0), (3.0, 4.0 / 105.0), (4.0, -1.0 / 280.0)];
                let mut out = ComplexField3::zeros(grid);
                for (m, w) in weights {
                    let diff = phi.sample(grid, args.t + m * step)?.sub(&phi.sample(grid, args.t - m * step)?)?;
                    out = out.add(&diff.scale(Complex64::new(w / step, 0.0)))?;
                }
                out
            } else {
                phi.sample(grid, args.t)?
            }
        }
    };
    write_field(&args.out, &field, Some(args.c))?;
    let digest = rec.finish(&args.out)?;
    emit(json!({ "command": "make-field", "kind": args.kind, "out": args.out, "sha256": digest, "n": args.n, "length": length }));
    Ok(())
}
