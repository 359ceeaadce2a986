//! Instance JSON files and instance sources.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sdcheck_core::bench::InstanceSpec;
use sdcheck_core::dense::Mat;
use sdcheck_core::spectra::{Certificate, FaceRep, LinearMapA, Spectrahedron};
use sdcheck_core::SymMatrix;

use crate::error::{CliError, Result};

/// On-disk instance: `mats` hold each constraint matrix row-major and flat,
/// certificate matrices are lists of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    pub n: usize,
    pub m: usize,
    pub mats: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateFile>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    #[serde(default)]
    pub sd_true: Option<usize>,
    #[serde(default)]
    pub max_rank_true: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singleton_solution: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution_face: Option<FaceFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposing_chain: Option<Vec<ChainStepFile>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceFile {
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStepFile {
    pub y: Vec<f64>,
    #[serde(rename = "Z")]
    pub z: Vec<Vec<f64>>,
}

pub fn rows_of(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn sym_rows(x: &SymMatrix) -> Vec<Vec<f64>> {
    rows_of(x.as_mat())
}

/// Matrix from a list of rows. `cols` is needed when there are no rows or
/// the rows are empty.
fn mat_from_rows(rows: &[Vec<f64>], nrows: usize, what: &str) -> Result<Mat<f64>> {
    if rows.len() != nrows {
        return Err(CliError::Invalid(format!("{what}: expected {nrows} rows, found {}", rows.len())));
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Invalid(format!("{what}: ragged rows")));
    }
    Ok(Mat::from_vec(nrows, cols, rows.concat()))
}

fn sym_from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<SymMatrix> {
    let m = mat_from_rows(rows, n, what)?;
    if m.cols() != n {
        return Err(CliError::Invalid(format!("{what}: expected {n} columns")));
    }
    Ok(SymMatrix::new(n, m.into_vec())?)
}

impl InstanceFile {
    pub fn from_spectrahedron(f: &Spectrahedron, spec: Option<String>) -> Self {
        let cert = f.certificate.as_ref().map(|c| CertificateFile {
            sd_true: c.sd_true,
            max_rank_true: c.max_rank_true,
            singleton_solution: c.singleton_solution.as_ref().map(sym_rows),
            solution_face: c.solution_face.as_ref().map(|face| FaceFile {
                v: rows_of(face.v()),
                w: sym_rows(face.w()),
            }),
            exposing_chain: c.exposing_chain.as_ref().map(|chain| {
                chain
                    .iter()
                    .map(|(y, z)| ChainStepFile {
                        y: y.clone(),
                        z: sym_rows(z),
                    })
                    .collect()
            }),
        });
        InstanceFile {
            spec,
            n: f.n(),
            m: f.m(),
            mats: f.map.mats().iter().map(|a| a.as_slice().to_vec()).collect(),
            b: f.map.b().to_vec(),
            certificate: cert,
        }
    }

    /// Rebuilds the instance and checks the certificate against it.
    pub fn to_spectrahedron(&self) -> Result<Spectrahedron> {
        let n = self.n;
        if self.mats.len() != self.m || self.b.len() != self.m {
            return Err(CliError::Invalid(format!(
                "m = {} but {} matrices and {} right-hand sides",
                self.m,
                self.mats.len(),
                self.b.len()
            )));
        }
        let mats = self
            .mats
            .iter()
            .map(|a| {
                if a.len() != n * n {
                    return Err(CliError::Invalid(format!("constraint matrix has {} entries, expected {}", a.len(), n * n)));
                }
                Ok(SymMatrix::new(n, a.clone())?)
            })
            .collect::<Result<Vec<_>>>()?;
        let map = LinearMapA::new(n, mats, self.b.clone())?;
        let Some(c) = &self.certificate else {
            return Ok(Spectrahedron::new(map));
        };
        let solution_face = match &c.solution_face {
            Some(face) => {
                let v = mat_from_rows(&face.v, n, "solution_face.V")?;
                let w = sym_from_rows(&face.w, n, "solution_face.W")?;
                Some(FaceRep::new(v, w)?)
            }
            None => None,
        };
        let singleton_solution = match &c.singleton_solution {
            Some(rows) => Some(sym_from_rows(rows, n, "singleton_solution")?),
            None => None,
        };
        let exposing_chain = match &c.exposing_chain {
            Some(chain) => Some(
                chain
                    .iter()
                    .map(|s| {
                        let k = s.z.len();
                        Ok((s.y.clone(), sym_from_rows(&s.z, k, "exposing_chain.Z")?))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let cert = Certificate {
            sd_true: c.sd_true,
            max_rank_true: c.max_rank_true,
            solution_face,
            singleton_solution,
            exposing_chain,
        };
        cert.validate(&map)?;
        Ok(Spectrahedron::with_certificate(map, cert))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &crate::json::to_string(self))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Where an instance comes from: a generator recipe or a JSON file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Spec(InstanceSpec),
    File(PathBuf),
}

impl Source {
    /// `from_file:PATH`, any argument ending in `.json`, or a generator spec
    /// such as `worst_case:n=5`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        for prefix in ["from_file:", "from-file:"] {
            if let Some(p) = t.strip_prefix(prefix) {
                return Ok(Source::File(PathBuf::from(p)));
            }
        }
        if t.ends_with(".json") {
            return Ok(Source::File(PathBuf::from(t)));
        }
        Ok(Source::Spec(InstanceSpec::parse(t)?))
    }

    /// Replaces every generator seed, children included.
    pub fn with_seed(self, seed: u64) -> Self {
        fn reseed(s: InstanceSpec, seed: u64) -> InstanceSpec {
            match s {
                InstanceSpec::Slater { n, m, .. } => InstanceSpec::Slater { n, m, seed },
                InstanceSpec::RankRSd1 { n, r, .. } => InstanceSpec::RankRSd1 { n, r, seed },
                InstanceSpec::DirectSum(c) => InstanceSpec::DirectSum(c.into_iter().map(|s| reseed(s, seed)).collect()),
                w @ InstanceSpec::WorstCase { .. } => w,
            }
        }
        match self {
            Source::Spec(s) => Source::Spec(reseed(s, seed)),
            f @ Source::File(_) => f,
        }
    }

    pub fn load(&self) -> Result<Spectrahedron> {
        match self {
            Source::Spec(s) => Ok(s.generate()?),
            Source::File(p) => InstanceFile::read(p)?.to_spectrahedron(),
        }
    }

    /// File-system friendly name.
    pub fn slug(&self) -> String {
        let raw = match self {
            Source::Spec(s) => s.to_string(),
            Source::File(p) => p.file_stem().map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned()),
        };
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() || "=._-".contains(c) { c } else { '_' })
            .collect()
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Spec(s) => write!(f, "{s}"),
            Source::File(p) => write!(f, "from_file:{}", p.display()),
        }
    }
}
