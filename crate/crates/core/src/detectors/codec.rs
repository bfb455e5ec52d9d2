//! Binary detector file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "OODD"
//! 4       2           format version (u16, currently 1)
//! 6       1           variant tag (u8, see `Variant::tag`)
//! 7       1           reserved, 0
//! 8       8           K, number of classes (u64)
//! 16      8           d, embedding dimension (u64)
//! 24      8           start_index (u64, 1-based)
//! 32      8           ridge (f64, relative)
//! 40      8           ridge_shift (f64, absolute diagonal shift applied)
//! 48      8           eigenvalue floor (f64)
//! 56      8*K         per-class training counts (u64)
//! ...     8*K*d       class means, row-major (f64)
//! ...     8*d         global mean (f64)
//! ...     8*d*d       covariance including ridge, row-major (f64)
//! ...     8*d         eigenvalues, descending (f64)
//! ...     8*d*d       eigenvectors as columns, stored row-major (f64)
//! ```

use std::fs;
use std::path::Path;

use crate::detectors::mahalanobis::{MahalanobisDetector, Variant};
use crate::error::{Error, Result};
use crate::linalg::{CovarianceModel, Matrix, SymmetricEigen};

pub const DETECTOR_MAGIC: &[u8; 4] = b"OODD";
pub const DETECTOR_VERSION: u16 = 1;

pub fn encode_detector(det: &MahalanobisDetector) -> Vec<u8> {
    let cov = det.covariance();
    let k = cov.num_classes();
    let d = cov.dim();
    let mut out = Vec::with_capacity(56 + 8 * (k + k * d + 2 * d + 2 * d * d));
    out.extend_from_slice(DETECTOR_MAGIC);
    out.extend_from_slice(&DETECTOR_VERSION.to_le_bytes());
    out.push(det.variant().tag());
    out.push(0);
    for v in [k, d, det.start_index()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in [cov.ridge, cov.ridge_shift, det.eigen_floor()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &c in &cov.counts {
        out.extend_from_slice(&(c as u64).to_le_bytes());
    }
    let arrays: [&[f64]; 5] = [
        cov.class_means.as_slice(),
        &cov.global_mean,
        cov.sigma.as_slice(),
        &det.eigen().eigenvalues,
        det.eigen().eigenvectors.as_slice(),
    ];
    for arr in arrays {
        for v in arr {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_detector(bytes: &[u8]) -> Result<MahalanobisDetector> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != DETECTOR_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"OODD\""));
    }
    let version = r.u16()?;
    if version != DETECTOR_VERSION {
        return Err(Error::format(4, format!("unsupported detector version {version}")));
    }
    let tag = r.u8()?;
    let variant =
        Variant::from_tag(tag).ok_or_else(|| Error::format(6, format!("unknown variant tag {tag}")))?;
    let reserved = r.u8()?;
    if reserved != 0 {
        return Err(Error::format(7, "reserved byte must be 0"));
    }
    let k = r.len()?;
    let d = r.len()?;
    let start_index = r.len()?;
    let ridge = r.f64()?;
    let ridge_shift = r.f64()?;
    let floor = r.f64()?;

    let needed = k
        .checked_mul(d).zip(d.checked_mul(d))
        .and_then(|(kd, dd)| {
            k.checked_add(kd)?.checked_add(d.checked_mul(2)?)?.checked_add(dd.checked_mul(2)?)
        })
        .and_then(|words| words.checked_mul(8));
    match needed {
        Some(n) if n == bytes.len() - r.pos => {}
        Some(n) if n > bytes.len() - r.pos => {
            return Err(Error::format(bytes.len() as u64, "truncated detector file"));
        }
        _ => {
            return Err(Error::format(r.pos as u64, "payload size does not match header"));
        }
    }

    let counts = (0..k).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
    let class_means = r.matrix(k, d)?;
    let global_mean = r.f64s(d)?;
    let sigma = r.matrix(d, d)?;
    let eigenvalues = r.f64s(d)?;
    let eigenvectors = r.matrix(d, d)?;

    let cov = CovarianceModel::from_parts(class_means, global_mean, sigma, ridge, ridge_shift, counts)?;
    MahalanobisDetector::from_parts(
        cov,
        SymmetricEigen { eigenvalues, eigenvectors },
        variant,
        start_index,
        floor,
    )
}

pub fn write_detector(path: &Path, det: &MahalanobisDetector) -> Result<()> {
    fs::write(path, encode_detector(det)).map_err(|e| Error::file(path, e))
}

pub fn read_detector(path: &Path) -> Result<MahalanobisDetector> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_detector(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(self.pos as u64, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        let at = self.pos;
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::format(at as u64, "length overflows usize"))
    }

    fn f64(&mut self) -> Result<f64> {
        let at = self.pos;
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(at as u64, "non-finite value"));
        }
        Ok(v)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        Matrix::new(rows, cols, self.f64s(rows * cols)?)
    }
}
