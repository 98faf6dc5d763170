//! Structure matrices `R` for the common penalties.
//!
//! Grids are linearized row-major (last index fastest): on an `m × n` grid
//! pixel `(i, j)` is coordinate `i·n + j`, and on an `m × n × p` volume
//! voxel `(i, j, k)` is `(i·n + j)·p + k`. Every difference row has `−1` on
//! the lower coordinate and `+1` on the higher one.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Dimensions of a 1, 2 or 3 dimensional grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridShape {
    dims: Vec<usize>,
}

impl GridShape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs 1 to 3 dimensions, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "grid dimensions must be positive, got {dims:?}"
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }
}

fn difference_rows(ncols: usize, pairs: &[(usize, usize)]) -> Result<SparseMatrix> {
    let triplets = pairs
        .iter()
        .enumerate()
        .flat_map(|(row, &(lo, hi))| [(row, lo, -1.0), (row, hi, 1.0)]);
    SparseMatrix::from_triplets(pairs.len(), ncols, triplets)
}

/// `R = I`, the plain lasso.
pub fn build_identity(p: usize) -> Result<SparseMatrix> {
    if p == 0 {
        return Err(Error::InvalidArgument("identity penalty needs p ≥ 1".into()));
    }
    Ok(SparseMatrix::identity(p))
}

/// `(p−1) × p` first differences: row `i` is `β_{i+1} − β_i`.
pub fn build_diff_1d(p: usize) -> Result<SparseMatrix> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "1D difference penalty needs p ≥ 2, got {p}"
        )));
    }
    let pairs: Vec<_> = (0..p - 1).map(|i| (i, i + 1)).collect();
    difference_rows(p, &pairs)
}

/// Anisotropic total variation on an `m × n` image, one row per term of
///
/// `Σ_{i<m,j<n} (|β_{i,j}−β_{i+1,j}| + |β_{i,j}−β_{i,j+1}|)
///  + Σ_{i<m} |β_{i,n}−β_{i+1,n}| + Σ_{j<n} |β_{m,j}−β_{m,j+1}|`
///
/// which is every vertical and horizontal neighbor pair. A `1 × n` or
/// `m × 1` grid reduces to [`build_diff_1d`].
pub fn build_tv_2d(shape: &GridShape) -> Result<SparseMatrix> {
    let &[m, n] = shape.dims() else {
        return Err(Error::InvalidArgument(format!(
            "2D penalty needs a 2D shape, got {:?}",
            shape.dims()
        )));
    };
    if m * n < 2 {
        return Err(Error::InvalidArgument(
            "2D penalty needs at least two pixels".into(),
        ));
    }
    let at = |i: usize, j: usize| i * n + j;
    let mut pairs = Vec::with_capacity(m * (n - 1) + n * (m - 1));
    for i in 0..m.saturating_sub(1) {
        for j in 0..n - 1 {
            pairs.push((at(i, j), at(i + 1, j)));
            pairs.push((at(i, j), at(i, j + 1)));
        }
    }
    for i in 0..m.saturating_sub(1) {
        pairs.push((at(i, n - 1), at(i + 1, n - 1)));
    }
    for j in 0..n - 1 {
        pairs.push((at(m - 1, j), at(m - 1, j + 1)));
    }
    difference_rows(m * n, &pairs)
}

/// Total variation on an `m × n × p` volume: one row for every pair of
/// voxels adjacent along one axis, grouped by axis.
pub fn build_tv_3d(shape: &GridShape) -> Result<SparseMatrix> {
    let &[m, n, p] = shape.dims() else {
        return Err(Error::InvalidArgument(format!(
            "3D penalty needs a 3D shape, got {:?}",
            shape.dims()
        )));
    };
    if m < 2 || n < 2 || p < 2 {
        return Err(Error::InvalidArgument(format!(
            "3D penalty needs every dimension ≥ 2, got {m}×{n}×{p}"
        )));
    }
    let at = |i: usize, j: usize, k: usize| (i * n + j) * p + k;
    let mut pairs = Vec::with_capacity((m - 1) * n * p + m * (n - 1) * p + m * n * (p - 1));
    for i in 0..m - 1 {
        for j in 0..n {
            for k in 0..p {
                pairs.push((at(i, j, k), at(i + 1, j, k)));
            }
        }
    }
    for i in 0..m {
        for j in 0..n - 1 {
            for k in 0..p {
                pairs.push((at(i, j, k), at(i, j + 1, k)));
            }
        }
    }
    for i in 0..m {
        for j in 0..n {
            for k in 0..p - 1 {
                pairs.push((at(i, j, k), at(i, j, k + 1)));
            }
        }
    }
    difference_rows(m * n * p, &pairs)
}

/// `[w₁R₁; w₂R₂; …]`, so that `‖Rβ‖₁ = Σ wᵢ‖Rᵢβ‖₁`.
pub fn build_stacked(blocks: &[(f64, SparseMatrix)]) -> Result<SparseMatrix> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("stacked penalty needs a block".into()));
    }
    let scaled = blocks
        .iter()
        .map(|(w, r)| {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "stacking weights must be positive, got {w}"
                )));
            }
            r.scale_rows(&vec![*w; r.nrows()])
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SparseMatrix> = scaled.iter().collect();
    SparseMatrix::vstack(&refs)
}
