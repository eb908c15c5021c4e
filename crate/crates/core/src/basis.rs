use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, ZitsError};
use crate::tensor::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    CubicBspline,
    Fourier,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::CubicBspline => "cubic_bspline",
            BasisKind::Fourier => "fourier",
        })
    }
}

impl FromStr for BasisKind {
    type Err = ZitsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cubic_bspline" | "bspline" => Ok(BasisKind::CubicBspline),
            "fourier" => Ok(BasisKind::Fourier),
            other => Err(ZitsError::InvalidParameter(format!(
                "unknown basis kind '{other}' (expected cubic_bspline or fourier)"
            ))),
        }
    }
}

/// An `N × Q` matrix with orthonormal columns realizing smooth functions on
/// the locus grid `i / N`, `i = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    h: Mat,
    kind: BasisKind,
}

impl BasisMatrix {
    pub fn h(&self) -> &Mat {
        &self.h
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n_loci(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_basis(&self) -> usize {
        self.h.ncols()
    }

    /// Wraps an externally supplied matrix, checking orthonormality.
    pub fn from_matrix(h: Mat, kind: BasisKind) -> Result<Self> {
        let gram = h.transpose() * &h;
        let eye = Mat::identity(h.ncols(), h.ncols());
        if (gram - eye).amax() > 1e-10 {
            return Err(ZitsError::InvalidParameter(
                "basis matrix columns are not orthonormal".into(),
            ));
        }
        Ok(Self { h, kind })
    }

    /// The identity basis (`Q = N`), under which `Γ` is the loci embedding itself.
    pub fn identity(n: usize) -> Self {
        Self {
            h: Mat::identity(n, n),
            kind: BasisKind::CubicBspline,
        }
    }
}

pub fn build_basis(n_loci: usize, n_basis: usize, kind: BasisKind) -> Result<BasisMatrix> {
    if n_basis == 0 || n_basis > n_loci {
        return Err(ZitsError::InvalidParameter(format!(
            "basis size Q = {n_basis} must satisfy 1 <= Q <= N = {n_loci}"
        )));
    }
    let grid: Vec<f64> = (1..=n_loci).map(|i| i as f64 / n_loci as f64).collect();
    let raw = match kind {
        BasisKind::CubicBspline => bspline_design(&grid, n_basis),
        BasisKind::Fourier => fourier_design(&grid, n_basis),
    };
    let h = orthonormalize(raw)?;
    Ok(BasisMatrix { h, kind })
}

/// Clamped B-spline design matrix on `[grid[0], grid[last]]` with `q` columns.
/// The degree is 3 when `q >= 4` and `q - 1` otherwise.
fn bspline_design(grid: &[f64], q: usize) -> Mat {
    let n = grid.len();
    if q == 1 {
        return Mat::from_element(n, 1, 1.0);
    }
    let degree = (q - 1).min(3);
    let (a, b) = (grid[0], grid[n - 1]);
    let n_interior = q - degree - 1;
    let mut knots = vec![a; degree + 1];
    for s in 1..=n_interior {
        knots.push(a + (b - a) * s as f64 / (n_interior + 1) as f64);
    }
    knots.extend(std::iter::repeat_n(b, degree + 1));

    Mat::from_fn(n, q, |row, col| {
        bspline_value(&knots, degree, col, grid[row])
    })
}

/// Cox–de Boor recursion; the right end of the domain belongs to the last span.
fn bspline_value(knots: &[f64], degree: usize, idx: usize, x: f64) -> f64 {
    let last = *knots.last().unwrap();
    let n_basis = knots.len() - degree - 1;
    // degree-0 indicators over all spans
    let mut vals: Vec<f64> = (0..knots.len() - 1)
        .map(|s| {
            let (lo, hi) = (knots[s], knots[s + 1]);
            let inside = if x == last {
                hi == last && lo < hi
            } else {
                lo <= x && x < hi
            };
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for d in 1..=degree {
        for s in 0..knots.len() - 1 - d {
            let left_den = knots[s + d] - knots[s];
            let right_den = knots[s + d + 1] - knots[s + 1];
            let left = if left_den > 0.0 {
                (x - knots[s]) / left_den * vals[s]
            } else {
                0.0
            };
            let right = if right_den > 0.0 {
                (knots[s + d + 1] - x) / right_den * vals[s + 1]
            } else {
                0.0
            };
            vals[s] = left + right;
        }
    }
    debug_assert!(idx < n_basis);
    vals[idx]
}

fn fourier_design(grid: &[f64], q: usize) -> Mat {
    Mat::from_fn(grid.len(), q, |row, col| {
        if col == 0 {
            return 1.0;
        }
        let freq = col.div_ceil(2) as f64;
        let arg = 2.0 * PI * freq * grid[row];
        if col % 2 == 1 {
            arg.cos()
        } else {
            arg.sin()
        }
    })
}

fn orthonormalize(raw: Mat) -> Result<Mat> {
    let q = raw.ncols();
    let qr = raw.qr();
    let r = qr.r();
    let scale = (0..q).map(|d| r[(d, d)].abs()).fold(0.0, f64::max);
    for d in 0..q {
        if r[(d, d)].abs() <= 1e-10 * scale {
            return Err(ZitsError::Numerical(format!(
                "raw basis is rank deficient at column {d}"
            )));
        }
    }
    let mut h = qr.q();
    for mut col in h.column_iter_mut() {
        let pivot = col
            .iter()
            .cloned()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    Ok(h)
}
