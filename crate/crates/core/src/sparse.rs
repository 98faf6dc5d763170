//! Compressed sparse row matrices and diagonal scalings.
//!
//! Both the design matrix `X` and the structure matrix `R` live here. The
//! solvers never densify them; they only need `Ax`, `Aᵀx` and a couple of
//! diagonal reductions.

use crate::error::{check_len, Error, Result};

/// Row-compressed sparse matrix.
///
/// Column indices are strictly increasing inside each row. Explicit zeros
/// are allowed and treated as ordinary entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfBounds {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite matrix entry at ({r}, {c})"
                )));
            }
            entries.push((r, c, v));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from raw CSR arrays, validating every invariant.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_len("row pointer array", nrows + 1, row_ptr.len())?;
        check_len("CSR values", col_idx.len(), values.len())?;
        if row_ptr[0] != 0 || row_ptr[nrows] != col_idx.len() {
            return Err(Error::InvalidArgument(
                "row pointers must start at 0 and end at nnz".into(),
            ));
        }
        for r in 0..nrows {
            let (start, end) = (row_ptr[r], row_ptr[r + 1]);
            if start > end {
                return Err(Error::InvalidArgument(format!(
                    "row pointers decrease at row {r}"
                )));
            }
            let cols = &col_idx[start..end];
            for (k, &c) in cols.iter().enumerate() {
                if c >= ncols {
                    return Err(Error::IndexOutOfBounds {
                        row: r,
                        col: c,
                        nrows,
                        ncols,
                    });
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::InvalidArgument(format!(
                        "column indices not strictly increasing in row {r}"
                    )));
                }
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite matrix value at position {i}"
            )));
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Dense row-major input; exact zeros are dropped.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            check_len("dense row", ncols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, triplets)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// An `nrows × ncols` matrix with no stored entries.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// True when the matrix is structurally the identity: square, one
    /// entry per row on the diagonal, equal to 1.
    pub fn is_identity(&self) -> bool {
        self.nrows == self.ncols
            && self.nnz() == self.nrows
            && (0..self.nrows).all(|i| {
                let (cols, vals) = self.row(i);
                cols == [i] && vals == [1.0]
            })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] += v;
        }
        out
    }

    /// `out ← A x`
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("matvec input", self.ncols, x.len())?;
        check_len("matvec output", self.nrows, out.len())?;
        for (i, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *o = cols
                .iter()
                .zip(vals)
                .fold(0.0, |acc, (&j, &v)| acc + v * x[j]);
        }
        Ok(())
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.nrows];
        self.matvec_into(x, &mut out)?;
        Ok(out)
    }

    /// `out ← Aᵀ x`, scattering row by row.
    pub fn matvec_t_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("transposed matvec input", self.nrows, x.len())?;
        check_len("transposed matvec output", self.ncols, out.len())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[j] += v * xi;
            }
        }
        Ok(())
    }

    /// `Aᵀ x`
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.ncols];
        self.matvec_t_into(x, &mut out)?;
        Ok(out)
    }

    /// `diag(AᵀA)` with every entry floored at `floor`.
    pub fn column_sq_norms(&self, floor: f64) -> Result<DiagonalScaling> {
        if !(floor > 0.0) || !floor.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scaling floor must be positive, got {floor}"
            )));
        }
        let mut d = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            d[j] += v * v;
        }
        d.iter_mut().for_each(|x| *x = x.max(floor));
        Ok(DiagonalScaling { entries: d })
    }

    /// `diag(A D⁻¹ Aᵀ)`, computed row by row.
    pub fn row_gram_diag(&self, d: &DiagonalScaling) -> Result<Vec<f64>> {
        check_len("row_gram_diag scaling", self.ncols, d.len())?;
        Ok((0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .fold(0.0, |acc, (&j, &v)| acc + v * v / d.entries[j])
            })
            .collect())
    }

    /// Copy of the matrix with row `i` multiplied by `weights[i]`.
    pub fn scale_rows(&self, weights: &[f64]) -> Result<Self> {
        check_len("row weights", self.nrows, weights.len())?;
        let mut out = self.clone();
        for (i, w) in weights.iter().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            out.values[s..e].iter_mut().for_each(|v| *v *= w);
        }
        Ok(out)
    }

    /// Stacks matrices with a common column count on top of each other.
    pub fn vstack(blocks: &[&SparseMatrix]) -> Result<Self> {
        let ncols = blocks.first().map_or(0, |b| b.ncols);
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for b in blocks {
            check_len("stacked block columns", ncols, b.ncols)?;
            let offset = col_idx.len();
            row_ptr.extend(b.row_ptr[1..].iter().map(|p| p + offset));
            col_idx.extend_from_slice(&b.col_idx);
            values.extend_from_slice(&b.values);
        }
        Ok(Self {
            nrows: row_ptr.len() - 1,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }
}

/// Positive diagonal matrix, used for the proximal metric `D` and for
/// Jacobi preconditioners.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalScaling {
    entries: Vec<f64>,
}

impl DiagonalScaling {
    /// Fails unless every entry is finite and at least `min_entry > 0`.
    pub fn new(entries: Vec<f64>, min_entry: f64) -> Result<Self> {
        if !(min_entry > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "minimum diagonal entry must be positive, got {min_entry}"
            )));
        }
        if let Some(i) = entries
            .iter()
            .position(|&v| !v.is_finite() || v < min_entry)
        {
            return Err(Error::InvalidArgument(format!(
                "diagonal entry {i} = {} is below {min_entry}",
                entries[i]
            )));
        }
        Ok(Self { entries })
    }

    /// Floors each entry at `floor` instead of rejecting small ones.
    pub fn floored(entries: Vec<f64>, floor: f64) -> Result<Self> {
        let entries = entries.into_iter().map(|v| v.max(floor)).collect();
        Self::new(entries, floor)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|v| v * factor).collect(),
        }
    }

    /// `D x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.entries.iter().zip(x).map(|(d, v)| d * v).collect()
    }

    /// `D⁻¹ x`
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        self.entries.iter().zip(x).map(|(d, v)| v / d).collect()
    }

    pub fn is_all_ones(&self) -> bool {
        self.entries.iter().all(|&v| v == 1.0)
    }
}
