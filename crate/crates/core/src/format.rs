//! Binary file formats.
//!
//! Both formats start with a single-line JSON header. WFLD v1 ends the header
//! with `"\n\0"`, WCF v1 with `"\0"`. The payload is little-endian `f64`
//! pairs `(re, im)`; fields are stored x fastest, coefficients slice by slice
//! (a slowest, then ϑ₁, ϑ₂, ϑ₃) with translations in field order.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cwt::{NuGrid, NuGridSpec, WaveletCoefficients};
use crate::error::{Error, Result};
use crate::fields::{ComplexField3, Grid3};
use crate::wavelets::Sign;

pub const DTYPE: &str = "c128le";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub n: [usize; 3],
    pub h: [f64; 3],
    pub origin: [f64; 3],
}

impl GridHeader {
    pub fn of(grid: &Grid3) -> Self {
        Self { n: grid.n(), h: grid.h(), origin: grid.origin() }
    }

    pub fn grid(&self) -> Result<Grid3> {
        Grid3::new(self.n, self.h, self.origin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfldHeader {
    pub version: u32,
    pub kind: String,
    #[serde(flatten)]
    pub grid: GridHeader,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub dtype: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WcfHeader {
    pub version: u32,
    pub kind: String,
    pub grid: GridHeader,
    pub nu_grid: NuGridSpec,
    pub sign: String,
    pub c_const: ComplexValue,
    /// Free-form description of the analysing wavelet.
    pub wavelet: serde_json::Value,
    pub count: usize,
    pub dtype: String,
}

fn write_values<W: Write>(out: &mut W, values: &[Complex64]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 * 4096);
    for chunk in values.chunks(4096) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_values<R: Read>(input: &mut R, count: usize) -> Result<Vec<Complex64>> {
    let mut values = Vec::with_capacity(count);
    let mut buf = vec![0u8; 16 * 4096];
    let mut remaining = count;
    while remaining > 0 {
        let take = remaining.min(4096);
        let bytes = &mut buf[..16 * take];
        input.read_exact(bytes).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format(format!("payload truncated: expected {count} values")),
            _ => Error::Io(e),
        })?;
        for pair in bytes.chunks_exact(16) {
            let re = f64::from_le_bytes(pair[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(pair[8..].try_into().expect("8 bytes"));
            values.push(Complex64::new(re, im));
        }
        remaining -= take;
    }
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(values)
}

fn read_header<R: BufRead>(input: &mut R) -> Result<Vec<u8>> {
    let mut header = Vec::new();
    input.read_until(0, &mut header)?;
    if header.pop() != Some(0) {
        return Err(Error::Format("missing NUL header terminator".into()));
    }
    Ok(header)
}

fn check_common(version: u32, dtype: &str, kind: &str, expected: &str) -> Result<()> {
    if version != 1 {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    if dtype != DTYPE {
        return Err(Error::Format(format!("unsupported dtype `{dtype}`")));
    }
    if kind != expected {
        return Err(Error::Format(format!("expected kind `{expected}`, found `{kind}`")));
    }
    Ok(())
}

pub fn write_wfld<W: Write>(out: &mut W, field: &ComplexField3, c: Option<f64>) -> Result<()> {
    let header = WfldHeader {
        version: 1,
        kind: "wfld".into(),
        grid: GridHeader::of(field.grid()),
        c,
        dtype: DTYPE.into(),
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n\0")?;
    write_values(out, field.values())?;
    out.flush()?;
    Ok(())
}

pub fn read_wfld<R: BufRead>(input: &mut R) -> Result<(ComplexField3, WfldHeader)> {
    let mut raw = read_header(input)?;
    if raw.pop() != Some(b'\n') {
        return Err(Error::Format("WFLD header must end with a newline before NUL".into()));
    }
    let header: WfldHeader = serde_json::from_slice(&raw)?;
    check_common(header.version, &header.dtype, &header.kind, "wfld")?;
    let grid = header.grid.grid()?;
    let values = read_values(input, grid.len())?;
    Ok((ComplexField3::new(grid, values)?, header))
}

pub fn write_wcf<W: Write>(out: &mut W, coeffs: &WaveletCoefficients, wavelet: serde_json::Value) -> Result<()> {
    let header = WcfHeader {
        version: 1,
        kind: "wcf".into(),
        grid: GridHeader::of(coeffs.nu_grid.grid()),
        nu_grid: *coeffs.nu_grid.spec(),
        sign: coeffs.sign.as_str().into(),
        c_const: ComplexValue { re: coeffs.c_const.re, im: coeffs.c_const.im },
        wavelet,
        count: coeffs.values.len(),
        dtype: DTYPE.into(),
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\0")?;
    write_values(out, &coeffs.values)?;
    out.flush()?;
    Ok(())
}

pub fn read_wcf<R: BufRead>(input: &mut R) -> Result<(WaveletCoefficients, WcfHeader)> {
    let raw = read_header(input)?;
    let header: WcfHeader = serde_json::from_slice(&raw)?;
    check_common(header.version, &header.dtype, &header.kind, "wcf")?;
    let nu_grid = NuGrid::new(header.grid.grid()?, header.nu_grid)?;
    if header.count != nu_grid.len() {
        return Err(Error::Format(format!("count {} does not match the nu-grid ({})", header.count, nu_grid.len())));
    }
    let values = read_values(input, header.count)?;
    let sign = Sign::parse(&header.sign)?;
    let label = header
        .wavelet
        .get("label")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .unwrap_or_default();
    let c = Complex64::new(header.c_const.re, header.c_const.im);
    Ok((WaveletCoefficients::new(nu_grid, values, sign, c, label)?, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cwt::SymmetryTag;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_values(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex64::new(rng.gen::<f64>() * 1e3 - 5e2, rng.gen::<f64>() * 1e-7)).collect()
    }

    #[test]
    fn wfld_round_trip_is_bit_exact() {
        let grid = Grid3::new([8, 10, 12], [0.1, 0.2, 0.3], [-1.0, 0.5, 2.0]).unwrap();
        let field = ComplexField3::new(grid, random_values(grid.len(), 1)).unwrap();
        let mut buf = Vec::new();
        write_wfld(&mut buf, &field, Some(1.5)).unwrap();
        assert_eq!(buf.len() - buf.iter().position(|b| *b == 0).unwrap() - 1, 16 * grid.len());
        let (back, header) = read_wfld(&mut buf.as_slice()).unwrap();
        assert_eq!(header.c, Some(1.5));
        assert_eq!(back.grid(), field.grid());
        for (a, b) in back.values().iter().zip(field.values()) {
            assert_eq!((a.re.to_bits(), a.im.to_bits()), (b.re.to_bits(), b.im.to_bits()));
        }
    }

    #[test]
    fn wfld_layout_is_x_fastest_little_endian() {
        let grid = Grid3::centered_cube(8, 1.0).unwrap();
        let field = ComplexField3::from_fn(grid, |r| Complex64::new(r[0], r[2])).unwrap();
        let mut buf = Vec::new();
        write_wfld(&mut buf, &field, None).unwrap();
        let start = buf.iter().position(|b| *b == 0).unwrap() + 1;
        assert_eq!(&buf[start - 2..start], b"\n\0");
        let second_re = f64::from_le_bytes(buf[start + 16..start + 24].try_into().unwrap());
        assert_eq!(second_re, grid.position(1)[0]);
        assert!(grid.position(1)[0] > grid.position(0)[0]);
        let text = std::str::from_utf8(&buf[..start - 2]).unwrap();
        assert!(!text.contains("\"c\""));
    }

    #[test]
    fn wcf_round_trip_is_bit_exact() {
        let grid = Grid3::centered_cube(8, 2.0).unwrap();
        let spec = NuGridSpec {
            symmetry: SymmetryTag::Axial,
            a_min: 0.2,
            a_max: 1.7,
            n_a: 3,
            n_theta1: 2,
            n_theta2: 2,
            n_theta3: 0,
        };
        let g = NuGrid::new(grid, spec).unwrap();
        let coeffs =
            WaveletCoefficients::new(g.clone(), random_values(g.len(), 2), Sign::Minus, Complex64::new(3.5, -1e-9), "w".into())
                .unwrap();
        let mut buf = Vec::new();
        write_wcf(&mut buf, &coeffs, serde_json::json!({"name": "gaussian-packet", "label": "w"})).unwrap();
        let (back, header) = read_wcf(&mut buf.as_slice()).unwrap();
        assert_eq!(header.wavelet["name"], "gaussian-packet");
        assert_eq!(back.nu_grid, coeffs.nu_grid);
        assert_eq!((back.sign, back.c_const, back.wavelet.as_str()), (Sign::Minus, coeffs.c_const, "w"));
        assert!(back.values.iter().zip(&coeffs.values).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    }

    #[test]
    fn malformed_files_are_format_errors() {
        let grid = Grid3::centered_cube(8, 1.0).unwrap();
        let field = ComplexField3::zeros(grid);
        let mut buf = Vec::new();
        write_wfld(&mut buf, &field, None).unwrap();

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_wfld(&mut &truncated[..]), Err(Error::Format(_))));
        let mut longer = buf.clone();
        longer.push(7);
        assert!(matches!(read_wfld(&mut longer.as_slice()), Err(Error::Format(_))));
        let no_nul: Vec<u8> = buf.iter().copied().take_while(|b| *b != 0).collect();
        assert!(matches!(read_wfld(&mut no_nul.as_slice()), Err(Error::Format(_))));
        let wrong = String::from_utf8_lossy(&buf).replace("\"version\":1", "\"version\":2").into_bytes();
        assert!(read_wfld(&mut wrong.as_slice()).is_err());
        assert!(matches!(read_wcf(&mut buf.as_slice()), Err(Error::Json(_) | Error::Format(_))));
    }
}
