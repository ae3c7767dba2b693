//! MNNT binary tensors and plain CSV matrices.
//!
//! MNNT layout: the ASCII magic `MNNT`, a `u8` version (1), a `u8` rank (2
//! or 3), that many little-endian `u64` dimensions, then the product of the
//! dimensions as little-endian `f64` values with the first index varying
//! fastest. A rank-3 file holds an `h x w x b` stack; a rank-2 file holds a
//! matrix, so the payload of `unfold3(s)` written as a matrix is identical
//! to the payload of `s`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{fold3, unfold3, DenseMatrix, ImageStack};
use crate::error::{MnnError, Result};

const MAGIC: &[u8; 4] = b"MNNT";
const VERSION: u8 = 1;

fn encode(dims: &[usize], values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(6 + 8 * dims.len() + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(path: &Path, bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    let fmt = |reason: &str| MnnError::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(fmt("missing MNNT magic"));
    }
    if bytes.len() < 6 {
        return Err(MnnError::Truncation {
            path: path.to_path_buf(),
            expected: 6,
            found: bytes.len() as u64,
        });
    }
    if bytes[4] != VERSION {
        return Err(fmt(&format!("unsupported version {}", bytes[4])));
    }
    let ndim = bytes[5] as usize;
    if ndim != 2 && ndim != 3 {
        return Err(fmt(&format!("unsupported rank {ndim}")));
    }
    let header = 6 + 8 * ndim;
    if bytes.len() < header {
        return Err(MnnError::Truncation {
            path: path.to_path_buf(),
            expected: header as u64,
            found: bytes.len() as u64,
        });
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut count: u64 = 1;
    for k in 0..ndim {
        let off = 6 + 8 * k;
        let d = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        if d == 0 {
            return Err(fmt("zero dimension"));
        }
        count = count
            .checked_mul(d)
            .ok_or_else(|| fmt("dimension product overflows"))?;
        dims.push(d as usize);
    }
    let expected = (header as u64)
        .checked_add(count.checked_mul(8).ok_or_else(|| fmt("payload size overflows"))?)
        .ok_or_else(|| fmt("payload size overflows"))?;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(MnnError::Truncation {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(fmt("trailing bytes after payload"));
    }
    let values: Vec<f64> = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(fmt("non-finite value in payload"));
    }
    Ok((dims, values))
}

fn read_raw(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| MnnError::io(path, e))?;
    decode(path, &bytes)
}

fn write_raw(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| MnnError::io(path, e))?;
    f.write_all(bytes).map_err(|e| MnnError::io(path, e))
}

/// Reads an MNNT file as an image stack. A rank-2 `rows x cols` file is
/// returned as a `rows x 1 x cols` stack, whose unfolding is that matrix.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<ImageStack<f64>> {
    let path = path.as_ref();
    let (dims, values) = read_raw(path)?;
    match dims[..] {
        [h, w, b] => ImageStack::new(h, w, b, values),
        [r, c] => ImageStack::new(r, 1, c, values),
        _ => unreachable!("rank validated in decode"),
    }
}

pub fn write_tensor(path: impl AsRef<Path>, stack: &ImageStack<f64>) -> Result<()> {
    let (h, w, b) = stack.dims();
    write_raw(path.as_ref(), &encode(&[h, w, b], stack.as_slice()))
}

/// Reads an MNNT file of either rank as a matrix (rank-3 stacks are
/// unfolded along the band axis).
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix<f64>> {
    Ok(unfold3(&read_tensor(path)?))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix<f64>) -> Result<()> {
    let payload = fold3(m, m.rows(), 1)?;
    write_raw(
        path.as_ref(),
        &encode(&[m.rows(), m.cols()], payload.as_slice()),
    )
}

/// Reads a headerless CSV matrix, one row per line.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DenseMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MnnError::io(path, e))?;
    let fmt = |reason: String| MnnError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut n = 0;
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| fmt(format!("line {}: bad number {field:?}", lineno + 1)))?;
            data.push(v);
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(fmt(format!(
                    "line {}: expected {c} fields, found {n}",
                    lineno + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| fmt("empty file".into()))?;
    DenseMatrix::new(rows, cols, data)
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DenseMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_raw(path.as_ref(), out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stack(h: usize, w: usize, b: usize, seed: u64) -> ImageStack<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * b).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        ImageStack::new(h, w, b, data).unwrap()
    }

    #[test]
    fn tensor_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.mnnt");
        let s = random_stack(3, 4, 2, 1);
        write_tensor(&p, &s).unwrap();
        let back = read_tensor(&p).unwrap();
        assert_eq!(
            back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            s.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(back.dims(), s.dims());
    }

    #[test]
    fn header_layout() {
        let s = ImageStack::new(1, 1, 1, vec![1.5]).unwrap();
        let bytes = encode(&[1, 1, 1], s.as_slice());
        assert_eq!(&bytes[..6], b"MNNT\x01\x03");
        assert_eq!(bytes.len(), 6 + 24 + 8);
    }

    #[test]
    fn matrix_file_payload_matches_stack_payload() {
        let dir = tempfile::tempdir().unwrap();
        let s = random_stack(2, 3, 4, 2);
        let ps = dir.path().join("s.mnnt");
        let pm = dir.path().join("m.mnnt");
        write_tensor(&ps, &s).unwrap();
        write_matrix(&pm, &unfold3(&s)).unwrap();
        let bs = fs::read(&ps).unwrap();
        let bm = fs::read(&pm).unwrap();
        assert_eq!(bs[6 + 24..], bm[6 + 16..]);
        assert_eq!(read_matrix(&pm).unwrap(), unfold3(&s));
        assert_eq!(read_matrix(&ps).unwrap(), unfold3(&s));
    }

    #[test]
    fn bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.mnnt");
        fs::write(&p, b"NOPE\x01\x02").unwrap();
        assert!(matches!(read_tensor(&p), Err(MnnError::Format { .. })));

        let mut bytes = encode(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        bytes.truncate(bytes.len() - 8);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_tensor(&p), Err(MnnError::Truncation { .. })));

        let missing = dir.path().join("missing.mnnt");
        match read_tensor(&missing) {
            Err(MnnError::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("expected Io error, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = unfold3(&random_stack(3, 1, 4, 3));
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(MnnError::Format { .. })));
    }
}
