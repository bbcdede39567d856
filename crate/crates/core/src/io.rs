//! JSON file formats and atomic, round-trip-exact output.
//!
//! * matrix: `{"n": 2, "re": [[..], [..]], "im": [[..], [..]]}`
//! * subspace: `{"n": 2, "basis": [<matrix>, ...]}`
//! * curve: `[{"t": 0.0, "matrix": <matrix>, "speed": 1.0}, ...]`
//! * report: `{"checks": [...], "config": {...}}`
//!
//! Floats are written with 17 significant digits so that every `f64` reads
//! back to the same value.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::convexity::HermSubspace;
use crate::error::{Error, Result};
use crate::geometry::CurveSample;
use crate::matcore::{CMat, HermMatrix, PosDefMatrix};
use crate::oracle::{CheckReport, Ensemble};

/// Asymmetry accepted when loading a Hermitian matrix.
pub const HERMITIAN_LOAD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMat) -> Self {
        let n = m.nrows();
        MatrixFile {
            n,
            re: (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.n;
        for part in [&self.re, &self.im] {
            if part.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: part.len() });
            }
            if let Some(row) = part.iter().find(|r| r.len() != n) {
                return Err(Error::NotSquare { rows: n, cols: row.len() });
            }
        }
        Ok(CMat::from_fn(n, n, |i, j| Complex64::new(self.re[i][j], self.im[i][j])))
    }

    /// Validate Hermitian-ness within [`HERMITIAN_LOAD_TOL`], then symmetrize.
    pub fn to_herm(&self) -> Result<HermMatrix> {
        HermMatrix::new_checked(self.to_matrix()?, HERMITIAN_LOAD_TOL)
    }
}

impl From<&HermMatrix> for MatrixFile {
    fn from(h: &HermMatrix) -> Self {
        MatrixFile::from_matrix(h.as_matrix())
    }
}

impl From<&PosDefMatrix> for MatrixFile {
    fn from(a: &PosDefMatrix) -> Self {
        MatrixFile::from_matrix(a.as_matrix())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFile {
    pub n: usize,
    pub basis: Vec<MatrixFile>,
}

impl SubspaceFile {
    pub fn from_subspace(h: &HermSubspace) -> Self {
        SubspaceFile {
            n: h.ambient_dim(),
            basis: h.basis().iter().map(MatrixFile::from).collect(),
        }
    }

    /// Orthonormalized subspace and the number of given elements.
    pub fn to_subspace(&self) -> Result<(HermSubspace, usize)> {
        let gens: Vec<HermMatrix> = self.basis.iter().map(|m| m.to_herm()).collect::<Result<_>>()?;
        Ok((HermSubspace::from_spanning(self.n, &gens)?, gens.len()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub t: f64,
    pub matrix: MatrixFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportFile<'a> {
    pub checks: &'a [CheckReport],
    pub config: &'a Ensemble,
}

/// Compact JSON formatter that prints floats as `{:.16e}`.
struct RoundTrip;

impl serde_json::ser::Formatter for RoundTrip {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize with 17 significant digits, followed by a newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, RoundTrip);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Write `contents` to a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_herm(path: &Path) -> Result<HermMatrix> {
    read_json::<MatrixFile>(path)?.to_herm()
}

pub fn load_posdef(path: &Path) -> Result<PosDefMatrix> {
    PosDefMatrix::new(load_herm(path)?)
}

pub fn save_matrix(path: &Path, m: &CMat) -> Result<()> {
    write_json(path, &MatrixFile::from_matrix(m))
}

/// Subspace and the number of elements listed in the file.
pub fn load_subspace(path: &Path) -> Result<(HermSubspace, usize)> {
    read_json::<SubspaceFile>(path)?.to_subspace()
}

pub fn save_subspace(path: &Path, h: &HermSubspace) -> Result<()> {
    write_json(path, &SubspaceFile::from_subspace(h))
}

pub fn load_curve(path: &Path) -> Result<Vec<CurveSample>> {
    let recs: Vec<CurveRecord> = read_json(path)?;
    recs.into_iter()
        .map(|r| {
            Ok(CurveSample {
                t: r.t,
                point: PosDefMatrix::new(r.matrix.to_herm()?)?,
            })
        })
        .collect()
}

pub fn save_report(path: &Path, checks: &[CheckReport], config: &Ensemble) -> Result<()> {
    write_json(path, &ReportFile { checks, config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    #[test]
    fn floats_round_trip() {
        let mut values = vec![0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0, -0.0];
        let mut rng = sampling::rng_for(50, 0);
        values.extend(sampling::ginibre(&mut rng, 40).iter().map(|z| z.re));
        let text = to_json(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits(), "{text}");
        }
    }

    #[test]
    fn matrix_round_trip() {
        let mut rng = sampling::rng_for(51, 0);
        let x = sampling::hermitian(&mut rng, 4, 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        save_matrix(&path, x.as_matrix()).unwrap();
        let y = load_herm(&path).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn rejects_non_hermitian_and_bad_shapes() {
        let bad = MatrixFile {
            n: 2,
            re: vec![vec![1.0, 2.0], vec![0.0, 1.0]],
            im: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        assert!(matches!(bad.to_herm(), Err(Error::NotHermitian { .. })));
        let ragged = MatrixFile {
            n: 2,
            re: vec![vec![1.0], vec![0.0, 1.0]],
            im: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        assert!(ragged.to_herm().is_err());
        let slight = MatrixFile {
            n: 2,
            re: vec![vec![1.0, 0.5 + 1e-12], vec![0.5, 1.0]],
            im: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        let h = slight.to_herm().unwrap();
        assert_eq!(h.as_matrix()[(0, 1)], h.as_matrix()[(1, 0)].conj());
    }

    #[test]
    fn subspace_reports_rank() {
        let d = HermMatrix::from_diagonal(&[1.0, 2.0]);
        let file = SubspaceFile {
            n: 2,
            basis: vec![MatrixFile::from(&d), MatrixFile::from(&d.scale(3.0))],
        };
        let (h, given) = file.to_subspace().unwrap();
        assert_eq!(given, 2);
        assert_eq!(h.dim(), 1);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn malformed_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{ not json").unwrap();
        assert!(load_herm(&path).unwrap_err().is_io());
        assert!(load_herm(&dir.path().join("missing.json")).unwrap_err().is_io());
    }
}
