//! Embedding matrices, pair indices and their on-disk formats.
//!
//! EMB1 layout (all integers little endian):
//!
//! | bytes  | content                         |
//! |--------|---------------------------------|
//! | 0..4   | magic `EMB1`                    |
//! | 4..6   | version `u16` = 1               |
//! | 6      | dtype `u8` (0 = f32, 1 = f64)   |
//! | 7      | reserved = 0                    |
//! | 8..16  | row count `u64`                 |
//! | 16..20 | column count `u32`              |
//! | 20..28 | reserved = 0                    |
//! | 28..   | values, row-major               |

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

pub const EMB_MAGIC: [u8; 4] = *b"EMB1";
pub const EMB_VERSION: u16 = 1;
pub const EMB_HEADER_LEN: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }
}

/// An `n x d` matrix of embeddings for one modality.
///
/// Values are always held as `f64`; `dtype` records the on-disk width so a
/// load/save cycle reproduces the file bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: DMatrix<f64>,
    pub modality: String,
    pub dtype: Dtype,
}

impl EmbeddingMatrix {
    pub fn new(values: DMatrix<f64>, modality: impl Into<String>, dtype: Dtype) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "embedding matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        // Column-major index -> row-major index for the error report.
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::NonFinite { index: r * values.ncols() + c });
        }
        Ok(Self { values, modality: modality.into(), dtype })
    }

    pub fn from_rows(n: usize, d: usize, row_major: &[f64], modality: &str) -> Result<Self> {
        if row_major.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {n}x{d} matrix",
                row_major.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, d, row_major), modality, Dtype::F64)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.d(), |r, c| self.values[(rows[r], c)])
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let modality = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_embeddings(&bytes, &modality)
}

pub fn decode_embeddings(bytes: &[u8], modality: &str) -> Result<EmbeddingMatrix> {
    if bytes.len() < 4 || bytes[0..4] != EMB_MAGIC {
        return Err(Error::BadMagic {
            expected: EMB_MAGIC,
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    if bytes.len() < EMB_HEADER_LEN {
        return Err(Error::TruncatedFile {
            expected: EMB_HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != EMB_VERSION {
        return Err(Error::Unsupported { what: "EMB1 version", value: version as u64 });
    }
    let dtype = match bytes[6] {
        0 => Dtype::F32,
        1 => Dtype::F64,
        other => return Err(Error::Unsupported { what: "EMB1 dtype", value: other as u64 }),
    };
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as u64;
    let expected = EMB_HEADER_LEN as u64 + n * d * dtype.width() as u64;
    if (bytes.len() as u64) < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() as u64 });
    }
    let payload = &bytes[EMB_HEADER_LEN..expected as usize];
    let values: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (n, d) = (n as usize, d as usize);
    EmbeddingMatrix::new(DMatrix::from_row_slice(n, d, &values), modality, dtype)
}

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let (n, d) = (m.n(), m.d());
    let mut out = Vec::with_capacity(EMB_HEADER_LEN + n * d * m.dtype.width());
    out.extend_from_slice(&EMB_MAGIC);
    out.extend_from_slice(&EMB_VERSION.to_le_bytes());
    out.push(m.dtype.code());
    out.push(0);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for r in 0..n {
        for c in 0..d {
            let v = m.values[(r, c)];
            match m.dtype {
                Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    out
}

pub fn save_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_embeddings(m)).map_err(|e| Error::io(path, e))
}

/// Cross-modal correspondences `(index into A, index into B)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairIndex {
    pub pairs: Vec<(usize, usize)>,
}

impl PairIndex {
    pub fn new(pairs: Vec<(usize, usize)>, n_a: usize, n_b: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for (line, &(i, j)) in pairs.iter().enumerate() {
            if i >= n_a {
                return Err(Error::IndexOutOfRange { line: line + 1, index: i, bound: n_a });
            }
            if j >= n_b {
                return Err(Error::IndexOutOfRange { line: line + 1, index: j, bound: n_b });
            }
            if !seen.insert((i, j)) {
                return Err(Error::DuplicatePair { line: line + 1, i, j });
            }
        }
        Ok(Self { pairs })
    }

    /// Row `i` paired with row `i` for every `i < n`.
    pub fn identity(n: usize) -> Self {
        Self { pairs: (0..n).map(|i| (i, i)).collect() }
    }

    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn a_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn b_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }
}

pub fn load_pairs(path: impl AsRef<Path>, n_a: usize, n_b: usize) -> Result<PairIndex> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text, n_a, n_b)
}

pub fn parse_pairs(text: &str, n_a: usize, n_b: usize) -> Result<PairIndex> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse { line, message: format!("expected 'i<TAB>j', got {raw:?}") });
        };
        let parse = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| Error::Parse {
                line,
                message: format!("bad index {s:?}: {e}"),
            })
        };
        let (i, j) = (parse(a)?, parse(b)?);
        if i >= n_a {
            return Err(Error::IndexOutOfRange { line, index: i, bound: n_a });
        }
        if j >= n_b {
            return Err(Error::IndexOutOfRange { line, index: j, bound: n_b });
        }
        if !seen.insert((i, j)) {
            return Err(Error::DuplicatePair { line, i, j });
        }
        pairs.push((i, j));
    }
    Ok(PairIndex { pairs })
}

pub fn format_pairs(pairs: &PairIndex) -> String {
    let mut out = String::new();
    for (i, j) in &pairs.pairs {
        out.push_str(&format!("{i}\t{j}\n"));
    }
    out
}

pub fn save_pairs(pairs: &PairIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_pairs(pairs)).map_err(|e| Error::io(path, e))
}

/// Scales every nonzero row to unit L2 norm.
///
/// Zero rows pass through unchanged; their indices are returned so callers
/// can warn about them.
pub fn l2_normalize(m: &EmbeddingMatrix) -> (EmbeddingMatrix, Vec<usize>) {
    let mut out = m.clone();
    let mut zero_rows = Vec::new();
    for (r, mut row) in out.values.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm == 0.0 {
            zero_rows.push(r);
        } else {
            row /= norm;
        }
    }
    (out, zero_rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub latent_dim: usize,
    pub n_points: usize,
    pub d_a: usize,
    pub d_b: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.n_points == 0 || self.d_a == 0 || self.d_b == 0 {
            return Err(Error::InvalidConfig(
                "latent_dim, n_points, d_a and d_b must be positive".into(),
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise_std {} must be >= 0", self.noise_std)));
        }
        Ok(())
    }
}

/// Two nonlinear views `tanh(G z) + noise` of a shared Gaussian latent.
///
/// Mixing matrices have entries `N(0, 1/latent_dim)` so the pre-activations
/// have unit variance and `tanh` stays out of saturation.
pub fn synth_paired_dataset(
    cfg: &SynthConfig,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix, PairIndex)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mix = Normal::new(0.0, (1.0 / cfg.latent_dim as f64).sqrt()).unwrap();
    let g_a = DMatrix::from_fn(cfg.d_a, cfg.latent_dim, |_, _| mix.sample(&mut rng));
    let g_b = DMatrix::from_fn(cfg.d_b, cfg.latent_dim, |_, _| mix.sample(&mut rng));
    let z: DMatrix<f64> = DMatrix::from_fn(cfg.n_points, cfg.latent_dim, |_, _| {
        StandardNormal.sample(&mut rng)
    });
    let mut view = |g: &DMatrix<f64>, d: usize| {
        let mut out = (&z * g.transpose()).map(f64::tanh);
        if cfg.noise_std > 0.0 {
            let noise = Normal::new(0.0, cfg.noise_std).unwrap();
            // Row-major fill keeps the draw order independent of storage layout.
            for r in 0..cfg.n_points {
                for c in 0..d {
                    out[(r, c)] += noise.sample(&mut rng);
                }
            }
        }
        out
    };
    let a = view(&g_a, cfg.d_a);
    let b = view(&g_b, cfg.d_b);
    Ok((
        EmbeddingMatrix::new(a, "synth_a", Dtype::F32)?,
        EmbeddingMatrix::new(b, "synth_b", Dtype::F32)?,
        PairIndex::identity(cfg.n_points),
    ))
}
