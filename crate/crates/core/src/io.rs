//! File formats: binary PGM masks, raw f64 grids, LKRN kernel files and CSV
//! loss traces. Multi-byte values are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lithosim::KernelSet;

pub const LKRN_MAGIC: &[u8; 4] = b"LKRN";
pub const LKRN_VERSION: u32 = 1;
/// Header of a raw grid: width u32, height u32, pixel_size f64.
pub const RAW_HEADER_LEN: usize = 16;

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Format(format!("{}: unexpected end", self.what))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// 8-bit binary PGM (P5): 0 background, 255 feature.
pub fn encode_pgm(mask: &ScalarField) -> Result<Vec<u8>> {
    if !mask.is_binary() {
        return Err(Error::param("mask", "PGM output needs a binary mask"));
    }
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.data().iter().map(|&v| if v == 1.0 { 255u8 } else { 0 }));
    Ok(out)
}

/// Parses a P5 PGM; values at or above half of maxval are features.
pub fn decode_pgm(bytes: &[u8], pixel_size: f64) -> Result<ScalarField> {
    let bad = |m: &str| Error::Format(format!("PGM: {m}"));
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("unexpected end")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(bad("not a binary (P5) graymap"));
    }
    let mut number = || -> Result<usize> { token()?.parse().map_err(|_| bad("bad header number")) };
    let (width, height, maxval) = (number()?, number()?, number()?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit graymaps are supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let n = width.checked_mul(height).ok_or_else(|| bad("dimensions overflow"))?;
    let raster = bytes
        .get(start..)
        .filter(|r| r.len() >= n)
        .ok_or_else(|| bad("unexpected end"))?;
    let data = raster[..n]
        .iter()
        .map(|&b| if 2 * b as usize >= maxval { 1.0 } else { 0.0 })
        .collect();
    ScalarField::new(width, height, pixel_size, data)
}

/// Raw grid: 16-byte header then row-major f64 values.
pub fn encode_raw(field: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + 8 * field.data().len());
    out.extend((field.width() as u32).to_le_bytes());
    out.extend((field.height() as u32).to_le_bytes());
    out.extend(field.pixel_size().to_le_bytes());
    for v in field.data() {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<ScalarField> {
    let mut r = Reader::new(bytes, "raw grid");
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let pixel_size = r.f64()?;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("raw grid: dimensions overflow".into()))?;
    if bytes.len() < RAW_HEADER_LEN + 8 * n {
        return Err(Error::Format("raw grid: unexpected end".into()));
    }
    let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    ScalarField::new(width, height, pixel_size, data)
}

/// LKRN kernel file for one defocus condition.
pub fn encode_kernels(set: &KernelSet) -> Vec<u8> {
    let s = set.kernel_size();
    let mut out = Vec::with_capacity(32 + 8 * set.count() + 16 * set.count() * s * s);
    out.extend(LKRN_MAGIC);
    out.extend(LKRN_VERSION.to_le_bytes());
    out.extend((set.count() as u32).to_le_bytes());
    out.extend((s as u32).to_le_bytes());
    out.extend(set.pixel_size().to_le_bytes());
    out.extend(set.defocus().to_le_bytes());
    for w in set.weights() {
        out.extend(w.to_le_bytes());
    }
    for kernel in set.kernels() {
        for c in kernel {
            out.extend(c.re.to_le_bytes());
            out.extend(c.im.to_le_bytes());
        }
    }
    out
}

pub fn decode_kernels(bytes: &[u8]) -> Result<KernelSet> {
    let mut r = Reader::new(bytes, "LKRN");
    if r.take(4)? != LKRN_MAGIC {
        return Err(Error::Format("LKRN: bad magic".into()));
    }
    let version = r.u32()?;
    if version != LKRN_VERSION {
        return Err(Error::Format(format!("LKRN: unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let size = r.u32()? as usize;
    let pixel_size = r.f64()?;
    let defocus = r.f64()?;
    let payload = count
        .checked_mul(8)
        .and_then(|w| count.checked_mul(size)?.checked_mul(size)?.checked_mul(16)?.checked_add(w));
    if payload.is_none_or(|p| bytes.len() - r.pos < p) {
        return Err(Error::Format("LKRN: unexpected end".into()));
    }
    let weights = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let kernels = (0..count)
        .map(|_| {
            (0..size * size)
                .map(|_| Ok(Complex64::new(r.f64()?, r.f64()?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    KernelSet::new(defocus, size, pixel_size, weights, kernels)
        .map_err(|e| Error::Format(format!("LKRN: {e}")))
}

/// `iteration,loss` rows; values use the shortest round-trip form.
pub fn encode_trace(trace: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{v:?}\n"));
    }
    out
}

pub fn decode_trace(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("iteration,loss") {
        return Err(Error::Format("trace: missing header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let (it, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("trace: line {}: expected two columns", i + 2)))?;
            if it.trim().parse::<usize>().ok() != Some(i) {
                return Err(Error::Format(format!("trace: line {}: iteration out of order", i + 2)));
            }
            v.trim()
                .parse()
                .map_err(|_| Error::Format(format!("trace: line {}: bad loss", i + 2)))
        })
        .collect()
}

pub fn read_pgm(path: &Path, pixel_size: f64) -> Result<ScalarField> {
    decode_pgm(&fs::read(path)?, pixel_size)
}

pub fn write_pgm(path: &Path, mask: &ScalarField) -> Result<()> {
    write_atomic(path, &encode_pgm(mask)?)
}

pub fn read_raw(path: &Path) -> Result<ScalarField> {
    decode_raw(&fs::read(path)?)
}

pub fn write_raw(path: &Path, field: &ScalarField) -> Result<()> {
    write_atomic(path, &encode_raw(field))
}

pub fn read_kernels(path: &Path) -> Result<KernelSet> {
    decode_kernels(&fs::read(path)?)
}

pub fn write_kernels(path: &Path, set: &KernelSet) -> Result<()> {
    write_atomic(path, &encode_kernels(set))
}
