//! File formats: CNT1 tensors, binary PGM images, CSV series, and CSV
//! exports of spectra.
//!
//! CNT1 layout, all little-endian: the bytes `CNT1`, a `u32` order, one
//! `u64` per dimension, then the `f64` entries with the first index
//! varying fastest.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::ComplexTensor;
use crate::tensor::{DenseTensor, SamplingMask, Shape};

const CNT1_MAGIC: &[u8; 4] = b"CNT1";

fn format_err(context: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Format { context: context.into(), reason: reason.into() }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn encode_cnt1(x: &DenseTensor) -> Vec<u8> {
    let dims = x.dims();
    let mut out = Vec::with_capacity(8 + 8 * dims.len() + 8 * x.len());
    out.extend_from_slice(CNT1_MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in x.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_cnt1(bytes: &[u8]) -> Result<DenseTensor> {
    let ctx = "CNT1";
    if bytes.len() < 8 || &bytes[..4] != CNT1_MAGIC {
        return Err(format_err(ctx, "missing CNT1 magic at offset 0"));
    }
    let order = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    if order == 0 {
        return Err(format_err(ctx, "order 0 at offset 4"));
    }
    let header = order
        .checked_mul(8)
        .and_then(|n| n.checked_add(8))
        .filter(|&n| n <= bytes.len())
        .ok_or_else(|| format_err(ctx, format!("truncated header: order {order} needs {} bytes", 8 + 8 * order)))?;
    let dims = (0..order)
        .map(|j| {
            let at = 8 + 8 * j;
            let d = u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
            usize::try_from(d).map_err(|_| format_err(ctx, format!("dimension {d} at offset {at} does not fit in memory")))
        })
        .collect::<Result<Vec<_>>>()?;
    let shape = Shape::new(dims).map_err(|e| format_err(ctx, e.to_string()))?;
    let need = shape.len().checked_mul(8).and_then(|n| n.checked_add(header));
    if need != Some(bytes.len()) {
        return Err(format_err(
            ctx,
            format!("expected {} data bytes after offset {header}, found {}", shape.len() * 8, bytes.len() - header),
        ));
    }
    let data = bytes[header..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    DenseTensor::new(shape, data)
}

pub fn write_cnt1(path: &Path, x: &DenseTensor) -> Result<()> {
    write_atomic(path, &encode_cnt1(x))
}

pub fn read_cnt1(path: &Path) -> Result<DenseTensor> {
    decode_cnt1(&fs::read(path)?).map_err(|e| with_path(e, path))
}

/// A CNT1 file of zeros and ones.
pub fn read_mask(path: &Path) -> Result<SamplingMask> {
    SamplingMask::from_indicator(read_cnt1(path)?).map_err(|e| with_path(e, path))
}

pub fn write_mask(path: &Path, mask: &SamplingMask) -> Result<()> {
    write_cnt1(path, mask.indicator())
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { reason, .. } => format_err(path.display().to_string(), reason),
        Error::InvalidArgument(reason) => format_err(path.display().to_string(), reason),
        other => other,
    }
}

/// Parses 8-bit binary PGM (`P5`) into a `height × width` tensor in `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<DenseTensor> {
    let ctx = "PGM";
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(ctx, format!("header ends early at offset {pos}")));
        }
        fields.push((start, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
    }
    if fields[0].1 != "P5" {
        return Err(format_err(ctx, format!("unsupported magic {:?}, only binary P5 is read", fields[0].1)));
    }
    let num = |i: usize| -> Result<usize> {
        let (at, ref text) = fields[i];
        text.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| format_err(ctx, format!("bad header value {text:?} at offset {at}")))
    };
    let (width, height, maxval) = (num(1)?, num(2)?, num(3)?);
    if maxval > 255 {
        return Err(format_err(ctx, format!("maxval {maxval} needs 16-bit samples, only 8-bit is read")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != width * height {
        return Err(format_err(
            ctx,
            format!("expected {} pixel bytes after offset {pos}, found {}", width * height, raster.len()),
        ));
    }
    let scale = maxval as f64;
    let shape = Shape::new(vec![height, width])?;
    Ok(DenseTensor::from_fn(shape, |idx| raster[(idx[0] - 1) * width + (idx[1] - 1)] as f64 / scale))
}

/// Encodes an order-2 tensor as 8-bit `P5`, clamping to `[0, 1]` and rounding.
pub fn encode_pgm(x: &DenseTensor) -> Result<Vec<u8>> {
    let dims = x.dims();
    if dims.len() != 2 {
        return Err(Error::InvalidArgument(format!("PGM needs an order-2 tensor, got order {}", dims.len())));
    }
    let (height, width) = (dims[0], dims[1]);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for r in 0..height {
        for c in 0..width {
            let v = x.data()[r + c * height];
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            out.push((v * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn read_pgm(path: &Path) -> Result<DenseTensor> {
    decode_pgm(&fs::read(path)?).map_err(|e| with_path(e, path))
}

pub fn write_pgm(path: &Path, x: &DenseTensor) -> Result<()> {
    write_atomic(path, &encode_pgm(x)?)
}

/// One number per line. A first line that does not parse is taken as a
/// header; blank lines are skipped.
pub fn parse_series_csv(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => return Err(format_err("CSV", format!("line {}: non-finite value {field:?}", n + 1))),
            Err(_) if n == 0 => continue,
            Err(_) => return Err(format_err("CSV", format!("line {}: cannot parse {field:?} as a number", n + 1))),
        }
    }
    if values.is_empty() {
        return Err(format_err("CSV", "no values"));
    }
    Ok(values)
}

pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    parse_series_csv(&fs::read_to_string(path)?).map_err(|e| with_path(e, path))
}

/// Header `value`, then one number per line.
pub fn series_to_csv(values: &[f64]) -> String {
    let mut out = String::from("value\n");
    for v in values {
        out += &format!("{v}\n");
    }
    out
}

/// Columns `index,re,im,mag`; `index` is the 1-based linear position.
pub fn dft_to_csv(z: &ComplexTensor) -> String {
    let mut out = String::from("index,re,im,mag\n");
    for (i, c) in z.data().iter().enumerate() {
        out += &format!("{},{},{},{}\n", i + 1, c.re, c.im, c.norm());
    }
    out
}

/// Columns `index,sigma`, 1-based.
pub fn sigma_to_csv(sigma: &[f64]) -> String {
    let mut out = String::from("index,sigma\n");
    for (i, s) in sigma.iter().enumerate() {
        out += &format!("{},{s}\n", i + 1);
    }
    out
}

/// Plot data for a univariate forecast: `t,kind,value` with `kind` either
/// `observed` or `predicted`.
pub fn forecast_plot_csv(history: &[f64], predicted: &[f64]) -> String {
    let mut out = String::from("t,kind,value\n");
    for (t, v) in history.iter().enumerate() {
        out += &format!("{},observed,{v}\n", t + 1);
    }
    for (t, v) in predicted.iter().enumerate() {
        out += &format!("{},predicted,{v}\n", history.len() + t + 1);
    }
    out
}
