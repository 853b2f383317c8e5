//! On-disk spectrum cache.
//!
//! Layout (little endian): magic `TFIMSPEC`, format version `u32`, `L: u32`,
//! `J: f64`, `h: f64`, symmetry flag `u8`, sector count `u32`, then per sector
//! `kx: u32, ky: u32, parity: i8` (`u32::MAX` for the full basis), `dim: u32`,
//! `dim` eigenvalues and `dim * dim` eigenvector entries as `(re, im)` pairs in
//! column-major order. Sector bases are rebuilt from the lattice on load.

use std::io::Read;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{SectorBases, SectorLabel, SectorSpectrum};
use crate::error::{Error, Result};
use crate::lattice::ModelParams;

const MAGIC: &[u8; 8] = b"TFIMSPEC";
pub const FORMAT_VERSION: u32 = 1;

/// File name keyed by `(L, J, h, symmetry)`; exact bit patterns of the couplings.
pub fn cache_file_name(l: usize, params: &ModelParams, use_symmetry: bool) -> String {
    format!(
        "spectrum-v{FORMAT_VERSION}-L{l}-J{:016x}-h{:016x}-{}.bin",
        params.j.to_bits(),
        params.h.to_bits(),
        if use_symmetry { "sym" } else { "dense" }
    )
}

pub fn write_spectra(path: &Path, bases: &SectorBases, spectra: &[SectorSpectrum]) -> Result<()> {
    let params = spectra
        .first()
        .map(|s| s.params)
        .ok_or_else(|| Error::invalid("no spectra to write"))?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(bases.lattice.l() as u32).to_le_bytes());
    buf.extend_from_slice(&params.j.to_le_bytes());
    buf.extend_from_slice(&params.h.to_le_bytes());
    buf.push(bases.use_symmetry as u8);
    buf.extend_from_slice(&(spectra.len() as u32).to_le_bytes());
    for s in spectra {
        let (kx, ky, p) = match s.label() {
            SectorLabel::Full => (u32::MAX, u32::MAX, 0i8),
            SectorLabel::Momentum { kx, ky, parity } => (kx as u32, ky as u32, parity),
        };
        buf.extend_from_slice(&kx.to_le_bytes());
        buf.extend_from_slice(&ky.to_le_bytes());
        buf.push(p as u8);
        buf.extend_from_slice(&(s.dim() as u32).to_le_bytes());
        for e in &s.eigenvalues {
            buf.extend_from_slice(&e.to_le_bytes());
        }
        for z in s.eigenvectors.iter() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    crate::io::cache::store(path, &buf)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::CacheFormat {
                path: self.path.to_path_buf(),
                reason: "truncated file".into(),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn read_spectra(path: &Path, bases: &SectorBases) -> Result<Vec<SectorSpectrum>> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let bad = |reason: &str| Error::CacheFormat {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut c = Cursor { data: &data, pos: 0, path };
    if c.take(8)? != MAGIC {
        return Err(bad("bad magic"));
    }
    if c.u32()? != FORMAT_VERSION {
        return Err(bad("unsupported format version"));
    }
    if c.u32()? as usize != bases.lattice.l() {
        return Err(bad("lattice size mismatch"));
    }
    let params = ModelParams { j: c.f64()?, h: c.f64()? };
    if (c.u8()? != 0) != bases.use_symmetry {
        return Err(bad("symmetry flag mismatch"));
    }
    let n_sectors = c.u32()? as usize;
    if n_sectors != bases.bases.len() {
        return Err(bad("sector count mismatch"));
    }
    let mut out = Vec::with_capacity(n_sectors);
    for basis in &bases.bases {
        let (kx, ky, p) = (c.u32()?, c.u32()?, c.u8()? as i8);
        let label = if kx == u32::MAX {
            SectorLabel::Full
        } else {
            SectorLabel::Momentum {
                kx: kx as usize,
                ky: ky as usize,
                parity: p,
            }
        };
        let dim = c.u32()? as usize;
        if label != basis.label || dim != basis.dim() {
            return Err(bad("sector layout mismatch"));
        }
        let eigenvalues = (0..dim).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        let mut entries = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            entries.push(Complex64::new(c.f64()?, c.f64()?));
        }
        out.push(SectorSpectrum {
            basis: basis.clone(),
            params,
            eigenvalues,
            eigenvectors: DMatrix::from_vec(dim, dim, entries),
            n_sites: bases.lattice.n_sites(),
        });
    }
    if c.pos != data.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(out)
}

/// Loads spectra from `dir` when present, otherwise diagonalizes and stores them.
pub fn load_or_compute(dir: &Path, bases: &SectorBases, params: &ModelParams) -> Result<Vec<SectorSpectrum>> {
    let path: PathBuf = dir.join(cache_file_name(bases.lattice.l(), params, bases.use_symmetry));
    if path.exists() {
        if let Ok(s) = read_spectra(&path, bases) {
            return Ok(s);
        }
    }
    let spectra = bases.diagonalize(params)?;
    std::fs::create_dir_all(dir)?;
    write_spectra(&path, bases, &spectra)?;
    Ok(spectra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ed::EdLimits;
    use crate::lattice::build_lattice;

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let lat = build_lattice(3).unwrap();
        let bases = SectorBases::new(&lat, true, &EdLimits::default()).unwrap();
        let params = ModelParams::new(1.0, 2.0).unwrap();
        let first = load_or_compute(dir.path(), &bases, &params).unwrap();
        let again = load_or_compute(dir.path(), &bases, &params).unwrap();
        for (a, b) in first.iter().zip(&again) {
            assert_eq!(a.label(), b.label());
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(a.eigenvectors, b.eigenvectors);
        }
        let recomputed = bases.diagonalize(&params).unwrap();
        for (a, b) in first.iter().zip(&recomputed) {
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn corrupt_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let lat = build_lattice(2).unwrap();
        let bases = SectorBases::new(&lat, true, &EdLimits::default()).unwrap();
        let params = ModelParams::new(1.0, 0.5).unwrap();
        load_or_compute(dir.path(), &bases, &params).unwrap();
        let path = dir.path().join(cache_file_name(2, &params, true));
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_spectra(&path, &bases), Err(Error::CacheFormat { .. })));
    }
}
