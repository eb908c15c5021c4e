//! Three-way tensor containers and the multilinear products used by the model.
//!
//! Dense tensors are stored row-major with the third (cell) axis slowest, so
//! `values[(k * d1 + i) * d2 + j]` holds entry `(i, j, k)` and every frontal
//! slice is contiguous.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, ZitsError};

pub type Mat = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl DenseTensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d1, d2, d3),
            values: vec![0.0; d1 * d2 * d3],
        }
    }

    pub fn from_fn(
        d1: usize,
        d2: usize,
        d3: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(d1 * d2 * d3);
        for k in 0..d3 {
            for i in 0..d1 {
                for j in 0..d2 {
                    values.push(f(i, j, k));
                }
            }
        }
        Self {
            dims: (d1, d2, d3),
            values,
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.0 * dims.1 * dims.2 {
            return Err(ZitsError::DimensionMismatch(format!(
                "tensor of dims {:?} needs {} values, got {}",
                dims,
                dims.0 * dims.1 * dims.2,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (i, j, k) = unravel(dims, pos);
            return Err(ZitsError::NonFinite {
                i,
                j,
                k,
                what: "dense tensor value".into(),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims.0 + i) * self.dims.1 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.values[idx] = v;
    }

    /// Frontal slice `k` as a `d1 x d2` slice of the backing storage.
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.dims.0 * self.dims.1;
        &self.values[k * n..(k + 1) * n]
    }

    pub fn slice_matrix(&self, k: usize) -> Mat {
        let (d1, d2, _) = self.dims;
        Mat::from_fn(d1, d2, |i, j| self.get(i, j, k))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self {
            dims: self.dims,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        if self.dims != other.dims {
            return Err(ZitsError::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric_12(&self) -> bool {
        let (d1, d2, d3) = self.dims;
        if d1 != d2 {
            return false;
        }
        (0..d3).all(|k| (0..d1).all(|i| (0..i).all(|j| self.get(i, j, k) == self.get(j, i, k))))
    }
}

fn unravel(dims: (usize, usize, usize), pos: usize) -> (usize, usize, usize) {
    let j = pos % dims.1;
    let i = (pos / dims.1) % dims.0;
    let k = pos / (dims.0 * dims.1);
    (i, j, k)
}

/// Sparse symmetric count tensor. Only the upper triangle `i <= j` is stored;
/// absent cells read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTensor {
    n_loci: usize,
    n_cells: usize,
    // sorted by (k, i, j)
    entries: Vec<(usize, usize, usize, u64)>,
    // pairs with j - i < excluded_band are not modelled
    excluded_band: usize,
}

impl CountTensor {
    /// Builds a tensor from `(i, j, k, c)` triplets. Entries with `i > j` are
    /// folded onto the upper triangle; a duplicate cell after folding is an error.
    pub fn new(
        n_loci: usize,
        n_cells: usize,
        entries: impl IntoIterator<Item = (usize, usize, usize, u64)>,
    ) -> Result<Self> {
        if n_loci == 0 || n_cells == 0 {
            return Err(ZitsError::InvalidData(format!(
                "tensor dims must be positive, got N = {n_loci}, K = {n_cells}"
            )));
        }
        let mut out: Vec<(usize, usize, usize, u64)> = Vec::new();
        for (i, j, k, c) in entries {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            if j >= n_loci || k >= n_cells {
                return Err(ZitsError::InvalidData(format!(
                    "entry ({i}, {j}, {k}) outside N = {n_loci}, K = {n_cells}"
                )));
            }
            if c == 0 {
                return Err(ZitsError::InvalidData(format!(
                    "entry ({i}, {j}, {k}) has count 0; zeros must be omitted"
                )));
            }
            out.push((i, j, k, c));
        }
        out.sort_unstable_by_key(|&(i, j, k, _)| (k, i, j));
        if let Some(w) = out
            .windows(2)
            .find(|w| (w[0].0, w[0].1, w[0].2) == (w[1].0, w[1].1, w[1].2))
        {
            return Err(ZitsError::InvalidData(format!(
                "duplicate entry ({}, {}, {})",
                w[0].0, w[0].1, w[0].2
            )));
        }
        Ok(Self {
            n_loci,
            n_cells,
            entries: out,
            excluded_band: 0,
        })
    }

    /// Excludes the band `|i - j| < band` from modelling; stored entries inside
    /// the band are dropped. `band = 0` keeps everything, `band = 1` drops the
    /// main diagonal.
    pub fn with_excluded_band(mut self, band: usize) -> Self {
        self.entries.retain(|&(i, j, _, _)| j - i >= band);
        self.excluded_band = band;
        self
    }

    pub fn without_diagonal(self) -> Self {
        self.with_excluded_band(1)
    }

    pub fn excluded_band(&self) -> usize {
        self.excluded_band
    }

    /// Whether the pair `(i, j)` takes part in the likelihood.
    pub fn is_modelled(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) >= self.excluded_band
    }

    pub fn n_loci(&self) -> usize {
        self.n_loci
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn include_diagonal(&self) -> bool {
        self.excluded_band == 0
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Upper-triangle entries `(i, j, k, c)` with `i <= j`, ordered by `(k, i, j)`.
    pub fn iter_upper(&self) -> impl Iterator<Item = (usize, usize, usize, u64)> + '_ {
        self.entries.iter().copied()
    }

    /// Both orientations of every stored entry; diagonal cells appear once.
    pub fn iter_full(&self) -> impl Iterator<Item = (usize, usize, usize, u64)> + '_ {
        self.entries.iter().flat_map(|&(i, j, k, c)| {
            let mirrored = if i != j { Some((j, i, k, c)) } else { None };
            std::iter::once((i, j, k, c)).chain(mirrored)
        })
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries
            .binary_search_by_key(&(k, i, j), |&(a, b, c, _)| (c, a, b))
            .map(|pos| self.entries[pos].3)
            .unwrap_or(0)
    }

    /// Dense symmetric realization with counts as reals.
    pub fn to_dense(&self) -> DenseTensor3 {
        let n = self.n_loci;
        let mut t = DenseTensor3::zeros(n, n, self.n_cells);
        for (i, j, k, c) in self.iter_full() {
            t.set(i, j, k, c as f64);
        }
        t
    }

    /// Number of upper-triangle cells `(i <= j, k)` that take part in the model.
    pub fn n_cells_upper(&self) -> usize {
        let n = self.n_loci;
        let b = self.excluded_band.min(n);
        // pairs with j - i >= b
        let pairs = (n - b) * (n - b + 1) / 2;
        pairs * self.n_cells
    }

    /// Returns a copy with every positive count replaced by 1.
    pub fn binarized(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|&(i, j, k, _)| (i, j, k, 1))
                .collect(),
            ..self.clone()
        }
    }

    /// Sub-tensor keeping the listed cells, renumbered in the given order.
    pub fn select_cells(&self, cells: &[usize]) -> Result<Self> {
        let mut remap = vec![usize::MAX; self.n_cells];
        for (new, &old) in cells.iter().enumerate() {
            if old >= self.n_cells {
                return Err(ZitsError::InvalidData(format!(
                    "cell {old} outside K = {}",
                    self.n_cells
                )));
            }
            remap[old] = new;
        }
        let entries = self
            .entries
            .iter()
            .filter(|e| remap[e.2] != usize::MAX)
            .map(|&(i, j, k, c)| (i, j, remap[k], c));
        Ok(Self::new(self.n_loci, cells.len(), entries)?.with_excluded_band(self.excluded_band))
    }

    pub fn max_count(&self) -> u64 {
        self.entries.iter().map(|e| e.3).max().unwrap_or(0)
    }
}

/// Mode-`mode` product `t x_mode a` where `a` has as many columns as the size of
/// `t` along `mode` (1, 2 or 3).
pub fn mode_product(t: &DenseTensor3, a: &Mat, mode: usize) -> Result<DenseTensor3> {
    let (d1, d2, d3) = t.dims();
    let along = match mode {
        1 => d1,
        2 => d2,
        3 => d3,
        _ => {
            return Err(ZitsError::InvalidParameter(format!(
                "mode must be 1, 2 or 3, got {mode}"
            )))
        }
    };
    if a.ncols() != along {
        return Err(ZitsError::DimensionMismatch(format!(
            "mode-{mode} product of tensor {:?} with matrix {}x{}",
            t.dims(),
            a.nrows(),
            a.ncols()
        )));
    }
    if a.is_square() && is_exact_identity(a) {
        return Ok(t.clone());
    }
    let m = a.nrows();
    match mode {
        1 => {
            let mut out = DenseTensor3::zeros(m, d2, d3);
            let slab = m * d2;
            out.values
                .par_chunks_mut(slab)
                .enumerate()
                .for_each(|(k, chunk)| {
                    let src = t.slice(k);
                    for r in 0..m {
                        let row = &mut chunk[r * d2..(r + 1) * d2];
                        for i in 0..d1 {
                            let w = a[(r, i)];
                            if w == 0.0 {
                                continue;
                            }
                            let srow = &src[i * d2..(i + 1) * d2];
                            for (o, s) in row.iter_mut().zip(srow) {
                                *o += w * s;
                            }
                        }
                    }
                });
            Ok(out)
        }
        2 => {
            let mut out = DenseTensor3::zeros(d1, m, d3);
            let slab = d1 * m;
            out.values
                .par_chunks_mut(slab)
                .enumerate()
                .for_each(|(k, chunk)| {
                    let src = t.slice(k);
                    for i in 0..d1 {
                        let srow = &src[i * d2..(i + 1) * d2];
                        for r in 0..m {
                            let mut acc = 0.0;
                            for (j, s) in srow.iter().enumerate() {
                                acc += s * a[(r, j)];
                            }
                            chunk[i * m + r] = acc;
                        }
                    }
                });
            Ok(out)
        }
        _ => {
            let mut out = DenseTensor3::zeros(d1, d2, m);
            let slab = d1 * d2;
            out.values
                .par_chunks_mut(slab)
                .enumerate()
                .for_each(|(r, chunk)| {
                    for k in 0..d3 {
                        let w = a[(r, k)];
                        if w == 0.0 {
                            continue;
                        }
                        for (o, s) in chunk.iter_mut().zip(t.slice(k)) {
                            *o += w * s;
                        }
                    }
                });
            Ok(out)
        }
    }
}

fn is_exact_identity(a: &Mat) -> bool {
    (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| a[(i, j)] == if i == j { 1.0 } else { 0.0 }))
}

/// Symmetric CP reconstruction `I x_1 alpha x_2 alpha x_3 w`, i.e.
/// `out[i, j, k] = sum_d alpha[i, d] * alpha[j, d] * w[k, d]`.
pub fn cp3_sym(alpha: &Mat, w: &Mat) -> Result<DenseTensor3> {
    if alpha.ncols() != w.ncols() {
        return Err(ZitsError::DimensionMismatch(format!(
            "alpha is {}x{} but w is {}x{}",
            alpha.nrows(),
            alpha.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let n = alpha.nrows();
    let d = alpha.ncols();
    let k_dim = w.nrows();
    // pairwise products alpha[i, d] * alpha[j, d] for i <= j
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut outer = vec![0.0; pairs.len() * d];
    for (p, &(i, j)) in pairs.iter().enumerate() {
        for dd in 0..d {
            outer[p * d + dd] = alpha[(i, dd)] * alpha[(j, dd)];
        }
    }
    let mut out = DenseTensor3::zeros(n, n, k_dim);
    out.values
        .par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(k, chunk)| {
            let wk: Vec<f64> = (0..d).map(|dd| w[(k, dd)]).collect();
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let mut acc = 0.0;
                for dd in 0..d {
                    acc += outer[p * d + dd] * wk[dd];
                }
                chunk[i * n + j] = acc;
                chunk[j * n + i] = acc;
            }
        });
    Ok(out)
}

/// Row-wise Kronecker product: row `k` of the result is `a_k (x) b_k`.
pub fn khatri_rao_rows(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != b.nrows() {
        return Err(ZitsError::DimensionMismatch(format!(
            "row counts differ: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let (r, l) = (a.ncols(), b.ncols());
    Ok(Mat::from_fn(a.nrows(), r * l, |k, c| {
        a[(k, c / l)] * b[(k, c % l)]
    }))
}

/// Diagonals of the frontal slices: `out[i, k] = t[i, i, k]`.
pub fn diag_frontal(t: &DenseTensor3) -> Result<Mat> {
    let (d1, d2, d3) = t.dims();
    if d1 != d2 {
        return Err(ZitsError::DimensionMismatch(format!(
            "frontal diagonal needs d1 = d2, got {:?}",
            t.dims()
        )));
    }
    Ok(Mat::from_fn(d1, d3, |i, k| t.get(i, i, k)))
}

/// Diagonals of the horizontal slices: `out[q, l] = t[q, l, l]`.
pub fn diag_horizontal(t: &DenseTensor3) -> Result<Mat> {
    let (d1, d2, d3) = t.dims();
    if d2 != d3 {
        return Err(ZitsError::DimensionMismatch(format!(
            "horizontal diagonal needs d2 = d3, got {:?}",
            t.dims()
        )));
    }
    Ok(Mat::from_fn(d1, d2, |q, l| t.get(q, l, l)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, d1: usize, d2: usize, d3: usize) -> DenseTensor3 {
        DenseTensor3::from_fn(d1, d2, d3, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn loop_mode_product(t: &DenseTensor3, a: &Mat, mode: usize) -> DenseTensor3 {
        let (d1, d2, d3) = t.dims();
        let m = a.nrows();
        match mode {
            1 => DenseTensor3::from_fn(m, d2, d3, |r, j, k| {
                (0..d1).map(|i| t.get(i, j, k) * a[(r, i)]).sum()
            }),
            2 => DenseTensor3::from_fn(d1, m, d3, |i, r, k| {
                (0..d2).map(|j| t.get(i, j, k) * a[(r, j)]).sum()
            }),
            _ => DenseTensor3::from_fn(d1, d2, m, |i, j, r| {
                (0..d3).map(|k| t.get(i, j, k) * a[(r, k)]).sum()
            }),
        }
    }

    fn assert_close(a: &DenseTensor3, b: &DenseTensor3, rel: f64) {
        assert_eq!(a.dims(), b.dims());
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= rel * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn mode_product_scalar() {
        let t = DenseTensor3::from_vec((1, 1, 1), vec![2.0]).unwrap();
        let a = Mat::from_element(1, 1, 3.0);
        for mode in 1..=3 {
            assert_eq!(mode_product(&t, &a, mode).unwrap().values(), &[6.0]);
        }
    }

    #[test]
    fn mode_product_identity_is_exact_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tensor(&mut rng, 3, 3, 3);
        for mode in 1..=3 {
            assert_eq!(mode_product(&t, &Mat::identity(3, 3), mode).unwrap(), t);
        }
        let ones = DenseTensor3::from_fn(2, 2, 2, |_, _, _| 1.0);
        assert_eq!(mode_product(&ones, &Mat::identity(2, 2), 2).unwrap(), ones);
    }

    #[test]
    fn mode_product_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_tensor(&mut rng, 3, 4, 2);
        let a = random_mat(&mut rng, 5, 4);
        assert_close(
            &mode_product(&t, &a, 2).unwrap(),
            &loop_mode_product(&t, &a, 2),
            1e-12,
        );
        for (d1, d2, d3) in [(2, 3, 4), (6, 6, 6), (1, 5, 3)] {
            let t = random_tensor(&mut rng, d1, d2, d3);
            for (mode, along) in [(1, d1), (2, d2), (3, d3)] {
                let a = random_mat(&mut rng, 4, along);
                assert_close(
                    &mode_product(&t, &a, mode).unwrap(),
                    &loop_mode_product(&t, &a, mode),
                    1e-12,
                );
            }
        }
    }

    #[test]
    fn mode_product_shape_error_names_both_shapes() {
        let t = DenseTensor3::zeros(2, 3, 4);
        let err = mode_product(&t, &Mat::zeros(2, 5), 2)
            .unwrap_err()
            .to_string();
        assert!(err.contains("(2, 3, 4)") && err.contains("2x5"), "{err}");
    }

    #[test]
    fn cp3_sym_cases() {
        let ones = cp3_sym(&Mat::from_element(4, 1, 1.0), &Mat::from_element(3, 1, 1.0)).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));

        // indicator case: rows select a single component
        let alpha = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let w = Mat::identity(2, 2);
        let t = cp3_sym(&alpha, &w).unwrap();
        let sel = [0, 1, 0];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..2 {
                    let expect = if sel[i] == k && sel[j] == k { 1.0 } else { 0.0 };
                    assert_eq!(t.get(i, j, k), expect);
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, k, d) in [(4, 3, 2), (6, 6, 3), (5, 2, 6)] {
            let alpha = random_mat(&mut rng, n, d);
            let w = random_mat(&mut rng, k, d);
            let got = cp3_sym(&alpha, &w).unwrap();
            let oracle = DenseTensor3::from_fn(n, n, k, |i, j, kk| {
                (0..d)
                    .map(|dd| alpha[(i, dd)] * alpha[(j, dd)] * w[(kk, dd)])
                    .sum()
            });
            assert_close(&got, &oracle, 1e-12);
            assert!(got.is_symmetric_12());
        }
    }

    #[test]
    fn khatri_rao_cases() {
        let a = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let b = Mat::from_row_slice(1, 2, &[5.0, 7.0]);
        assert_eq!(
            khatri_rao_rows(&a, &b).unwrap(),
            Mat::from_row_slice(1, 4, &[5.0, 7.0, 0.0, 0.0])
        );

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = random_mat(&mut rng, 2, 3);
        assert_eq!(
            khatri_rao_rows(&Mat::from_element(2, 1, 1.0), &b).unwrap(),
            b
        );

        let a = random_mat(&mut rng, 3, 2);
        let b = random_mat(&mut rng, 3, 3);
        let got = khatri_rao_rows(&a, &b).unwrap();
        for k in 0..3 {
            let kron = a.row(k).kronecker(&b.row(k));
            assert_eq!(got.row(k).into_owned(), kron);
        }
        assert!(khatri_rao_rows(&a, &Mat::zeros(2, 2)).is_err());
    }

    #[test]
    fn diag_operators() {
        let t = DenseTensor3::from_vec((2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            diag_frontal(&t).unwrap(),
            Mat::from_column_slice(2, 1, &[1.0, 4.0])
        );
        // a 1x2x2 tensor whose (l1, l2) entries read [[1, 2], [3, 4]]
        let h = DenseTensor3::from_fn(1, 2, 2, |_, a, b| [[1.0, 2.0], [3.0, 4.0]][a][b]);
        assert_eq!(
            diag_horizontal(&h).unwrap(),
            Mat::from_row_slice(1, 2, &[1.0, 4.0])
        );

        assert_eq!(
            diag_frontal(&DenseTensor3::zeros(3, 3, 2)).unwrap(),
            Mat::zeros(3, 2)
        );
        assert_eq!(
            diag_horizontal(&DenseTensor3::zeros(2, 3, 3)).unwrap(),
            Mat::zeros(2, 3)
        );

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_tensor(&mut rng, 5, 5, 3);
        let d = diag_frontal(&t).unwrap();
        for i in 0..5 {
            for k in 0..3 {
                assert_eq!(d[(i, k)], t.values()[(k * 5 + i) * 5 + i]);
            }
        }
        let t = random_tensor(&mut rng, 4, 3, 3);
        let d = diag_horizontal(&t).unwrap();
        for q in 0..4 {
            for l in 0..3 {
                assert_eq!(d[(q, l)], t.values()[(l * 4 + q) * 3 + l]);
            }
        }
        assert!(diag_frontal(&DenseTensor3::zeros(2, 3, 1)).is_err());
        assert!(diag_horizontal(&DenseTensor3::zeros(2, 3, 2)).is_err());
    }

    #[test]
    fn count_tensor_symmetry_and_validation() {
        let t = CountTensor::new(3, 2, vec![(0, 1, 0, 4), (2, 1, 1, 2), (2, 2, 0, 1)]).unwrap();
        assert_eq!(t.get(1, 0, 0), 4);
        assert_eq!(t.get(0, 1, 0), 4);
        assert_eq!(t.get(1, 2, 1), 2);
        assert_eq!(t.get(0, 0, 1), 0);
        assert_eq!(t.iter_full().count(), 5);
        assert!(t.to_dense().is_symmetric_12());

        assert!(CountTensor::new(3, 2, vec![(0, 1, 0, 1), (1, 0, 0, 2)]).is_err());
        assert!(CountTensor::new(3, 2, vec![(0, 3, 0, 1)]).is_err());
        assert!(CountTensor::new(3, 2, vec![(0, 1, 2, 1)]).is_err());
        assert!(CountTensor::new(3, 2, vec![(0, 1, 0, 0)]).is_err());
    }
}
