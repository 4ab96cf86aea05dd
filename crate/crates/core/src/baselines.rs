//! Reference alignments: orthogonal Procrustes and anchor-relative (ASIF)
//! representations.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const PROCRUSTES_MAGIC: [u8; 4] = *b"PRC1";

/// Rotation mapping zero-padded A rows onto zero-padded B rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesModel {
    pub rotation: DMatrix<f64>,
    pub pad_a: usize,
    pub pad_b: usize,
}

fn pad_columns(m: &DMatrix<f64>, width: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), width);
    out.columns_mut(0, m.ncols()).copy_from(m);
    out
}

impl ProcrustesModel {
    pub fn dim(&self) -> usize {
        self.rotation.nrows()
    }

    /// `pad(A) * R`, in the shared padded space.
    pub fn map_a(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.ncols() + self.pad_a != self.dim() {
            return Err(Error::ShapeMismatch(format!("{} columns for a {}-d rotation", a.ncols(), self.dim())));
        }
        Ok(pad_columns(a, self.dim()) * &self.rotation)
    }

    pub fn map_b(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.ncols() + self.pad_b != self.dim() {
            return Err(Error::ShapeMismatch(format!("{} columns for a {}-d rotation", b.ncols(), self.dim())));
        }
        Ok(pad_columns(b, self.dim()))
    }

    pub fn objective(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
        Ok((self.map_a(a)? - self.map_b(b)?).norm())
    }

    pub fn orthogonality_error(&self) -> f64 {
        (self.rotation.tr_mul(&self.rotation) - DMatrix::identity(self.dim(), self.dim())).norm()
    }
}

/// Orthogonal `R` minimizing `|pad(A) R - pad(B)|_F`.
///
/// With `pad(A)^T pad(B) = U S V^T`, the minimizer is `R = U V^T`.
pub fn procrustes_fit(paired_a: &DMatrix<f64>, paired_b: &DMatrix<f64>) -> Result<ProcrustesModel> {
    if paired_a.nrows() != paired_b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} paired rows",
            paired_a.nrows(),
            paired_b.nrows()
        )));
    }
    if paired_a.nrows() < 2 {
        return Err(Error::DegenerateInput("procrustes needs at least 2 pairs".into()));
    }
    let d = paired_a.ncols().max(paired_b.ncols());
    let a = pad_columns(paired_a, d);
    let b = pad_columns(paired_b, d);
    let cross = a.tr_mul(&b);
    if cross.norm() == 0.0 {
        return Err(Error::DegenerateInput("cross-covariance is zero".into()));
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    Ok(ProcrustesModel {
        rotation: u * v_t,
        pad_a: d - paired_a.ncols(),
        pad_b: d - paired_b.ncols(),
    })
}

pub fn encode_procrustes(model: &ProcrustesModel) -> Vec<u8> {
    let d = model.dim();
    let mut out = Vec::with_capacity(8 + d * d * 8);
    out.extend_from_slice(&PROCRUSTES_MAGIC);
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for r in 0..d {
        for c in 0..d {
            out.extend_from_slice(&model.rotation[(r, c)].to_le_bytes());
        }
    }
    out
}

/// Padding is not stored; it is recovered from the two modality widths.
pub fn decode_procrustes(bytes: &[u8], d_a: usize, d_b: usize) -> Result<ProcrustesModel> {
    if bytes.len() < 4 || bytes[..4] != PROCRUSTES_MAGIC {
        return Err(Error::BadMagic { expected: PROCRUSTES_MAGIC, found: bytes[..bytes.len().min(4)].to_vec() });
    }
    if bytes.len() < 8 {
        return Err(Error::TruncatedFile { expected: 8, found: bytes.len() as u64 });
    }
    let d = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + (d * d * 8) as u64;
    if (bytes.len() as u64) < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() as u64 });
    }
    if d_a > d || d_b > d {
        return Err(Error::ShapeMismatch(format!("rotation of size {d} for widths {d_a} and {d_b}")));
    }
    let values: Vec<f64> = bytes[8..expected as usize]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ProcrustesModel {
        rotation: DMatrix::from_row_slice(d, d, &values),
        pad_a: d - d_a,
        pad_b: d - d_b,
    })
}

pub fn save_procrustes(model: &ProcrustesModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_procrustes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_procrustes(path: impl AsRef<Path>, d_a: usize, d_b: usize) -> Result<ProcrustesModel> {
    let path = path.as_ref();
    decode_procrustes(&fs::read(path).map_err(|e| Error::io(path, e))?, d_a, d_b)
}

/// Anchor set shared by both modalities: row `i` of `anchors_a` and of
/// `anchors_b` form one training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AsifModel {
    pub anchors_a: DMatrix<f64>,
    pub anchors_b: DMatrix<f64>,
    pub k: usize,
    pub p: f64,
}

impl AsifModel {
    pub const DEFAULT_K: usize = 800;
    pub const DEFAULT_P: f64 = 8.0;

    pub fn new(anchors_a: DMatrix<f64>, anchors_b: DMatrix<f64>, k: usize, p: f64) -> Result<Self> {
        if anchors_a.nrows() != anchors_b.nrows() || anchors_a.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} vs {} anchors",
                anchors_a.nrows(),
                anchors_b.nrows()
            )));
        }
        if k == 0 || k > anchors_a.nrows() {
            return Err(Error::InvalidConfig(format!("need 1 <= k <= {}, got {k}", anchors_a.nrows())));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidConfig(format!("need p >= 1, got {p}")));
        }
        Ok(Self { anchors_a, anchors_b, k, p })
    }

    pub fn m(&self) -> usize {
        self.anchors_a.nrows()
    }

    pub fn encode_a(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        asif_encode_rows(rows, &self.anchors_a, self.k, self.p)
    }

    pub fn encode_b(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        asif_encode_rows(rows, &self.anchors_b, self.k, self.p)
    }
}

/// Rows scaled to unit norm; zero rows stay zero.
pub(crate) fn unit_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    out
}

/// Sparsify to the `k` largest magnitudes (ties to the smaller index),
/// apply `sign(v)|v|^p` and normalize, in place.
fn sparsify_sharpen(sims: &mut [f64], k: usize, p: f64) -> Result<()> {
    let mut order: Vec<usize> = (0..sims.len()).collect();
    let cmp = |&i: &usize, &j: &usize| sims[j].abs().total_cmp(&sims[i].abs()).then(i.cmp(&j));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
    }
    let mut keep = vec![false; sims.len()];
    for &i in &order[..k.min(order.len())] {
        keep[i] = true;
    }
    for (v, kept) in sims.iter_mut().zip(keep) {
        *v = if kept { v.signum() * v.abs().powf(p) } else { 0.0 };
    }
    let norm = sims.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroVectorRow { row: 0 });
    }
    sims.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}

/// Relative representation of `x` against `anchors` (`M x d`).
pub fn asif_encode(x: &[f64], anchors: &DMatrix<f64>, k: usize, p: f64) -> Result<Vec<f64>> {
    if x.len() != anchors.ncols() {
        return Err(Error::ShapeMismatch(format!("{}-d query for {}-d anchors", x.len(), anchors.ncols())));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroVectorRow { row: 0 });
    }
    let mut sims: Vec<f64> = anchors
        .row_iter()
        .map(|a| {
            let an = a.norm();
            if an > 0.0 {
                a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() / (an * norm)
            } else {
                0.0
            }
        })
        .collect();
    sparsify_sharpen(&mut sims, k.clamp(1, anchors.nrows()), p)?;
    Ok(sims)
}

/// Row-wise [`asif_encode`] with one matrix product for the similarities.
pub fn asif_encode_rows(rows: &DMatrix<f64>, anchors: &DMatrix<f64>, k: usize, p: f64) -> Result<DMatrix<f64>> {
    if rows.ncols() != anchors.ncols() {
        return Err(Error::ShapeMismatch(format!("{}-d rows for {}-d anchors", rows.ncols(), anchors.ncols())));
    }
    let sims = unit_rows(rows) * unit_rows(anchors).transpose();
    let mut out = DMatrix::zeros(rows.nrows(), anchors.nrows());
    let mut buf = vec![0.0; anchors.nrows()];
    for r in 0..rows.nrows() {
        buf.iter_mut().zip(sims.row(r).iter()).for_each(|(b, s)| *b = *s);
        sparsify_sharpen(&mut buf, k.clamp(1, anchors.nrows()), p)
            .map_err(|_| Error::ZeroVectorRow { row: r })?;
        for (c, v) in buf.iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    Ok(out)
}

/// Gallery indices by descending dot product with `query_rep`, ties to the
/// smaller index.
pub fn asif_retrieve(query_rep: &[f64], gallery_reps: &DMatrix<f64>) -> Result<Vec<usize>> {
    if query_rep.len() != gallery_reps.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{}-d query for {}-d gallery",
            query_rep.len(),
            gallery_reps.ncols()
        )));
    }
    let scores: Vec<f64> = gallery_reps
        .row_iter()
        .map(|g| g.iter().zip(query_rep).map(|(a, b)| a * b).sum())
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    Ok(order)
}
