//! Dense vectors, point clouds and small symmetric matrices.
//!
//! Everything here is sized for the alignment problem: Gram matrices of a few
//! dozen to a few hundred anchored points. The symmetric eigensolver is a
//! cyclic Jacobi iteration, which is accurate to working precision for such
//! sizes and has no external dependencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted by [`GramMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues below `-PSD_TOL * largest` are treated as genuine indefiniteness.
pub const PSD_TOL: f64 = 1e-9;
/// Jacobi stops once the off-diagonal Frobenius norm drops below this fraction of `||G||_F`.
pub const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

/// A finite point of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorD(Vec<f64>);

impl VectorD {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("coordinate {i} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }
}

impl AsRef<[f64]> for VectorD {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent accumulators let the loop vectorize.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// A nonempty, uniformly dimensioned set of points stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
    label: String,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or_else(|| {
            Error::Contract("point cloud must contain at least one point".into())
        })?;
        let mut data = Vec::with_capacity(dim * points.len());
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(dim, data, label)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if data.is_empty() {
            return Err(Error::Contract("point cloud must contain at least one point".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("point cloud has a non-finite coordinate".into()));
        }
        Ok(Self {
            dim,
            data,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Applies `f` to every point, keeping the label.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let pts = self.points().map(&mut f).collect();
        Self::new(pts, self.label.clone())
    }

    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: shift.len(),
            });
        }
        self.map_points(|p| p.iter().zip(shift).map(|(x, t)| x + t).collect())
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let pts = indices.iter().map(|&i| self.point(i).to_vec()).collect();
        Self::new(pts, self.label.clone())
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(squared_distance(self.point(i), self.point(j)));
            }
        }
        best.sqrt()
    }
}

/// Dense symmetric `m x m` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    m: usize,
    data: Vec<f64>,
}

impl GramMatrix {
    /// Validates symmetry to [`SYMMETRY_TOL`] (relative to the largest entry).
    pub fn new(m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("matrix has a non-finite entry".into()));
        }
        let scale = data.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
        for i in 0..m {
            for j in i + 1..m {
                if (data[i * m + j] - data[j * m + i]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Contract(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { m, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let mut data = Vec::with_capacity(m * m);
        for r in rows {
            if r.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(m, data)
    }

    pub fn identity(m: usize) -> Self {
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            data[i * m + i] = 1.0;
        }
        Self { m, data }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let m = diag.len();
        let mut data = vec![0.0; m * m];
        for (i, v) in diag.iter().enumerate() {
            data[i * m + i] = *v;
        }
        Self { m, data }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.get(i, j)).collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.m, other.m, "matmul size mismatch");
        let m = self.m;
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out[i * m + j] += a * other.data[k * m + j];
                }
            }
        }
        Self { m, data: out }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.m, other.m, "sub size mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { m: self.m, data }
    }
}

/// Eigenpairs of a symmetric matrix. `vectors` is row-major with eigenvectors
/// stored as columns, in the same order as `values`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

/// Cyclic Jacobi eigendecomposition.
pub fn symmetric_eigen(g: &GramMatrix) -> SymmetricEigen {
    let m = g.m;
    let mut a = g.data.clone();
    let mut v = GramMatrix::identity(m).data;
    let total = g.frobenius();
    if m <= 1 || total == 0.0 {
        return SymmetricEigen {
            values: (0..m).map(|i| a[i * m + i]).collect(),
            vectors: v,
        };
    }
    let target = JACOBI_TOL * total;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * m + j] * a[i * m + j])
            .sum::<f64>()
            .sqrt();
        if off < target {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - s * vkq;
                    v[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymmetricEigen {
        values: (0..m).map(|i| a[i * m + i]).collect(),
        vectors: v,
    }
}

/// Gram matrix of `x_i - x_base` over all non-base points, in cloud order.
pub fn gram_from_cloud(cloud: &PointCloud, base_index: usize) -> Result<GramMatrix> {
    if base_index >= cloud.len() {
        return Err(Error::Contract(format!(
            "base index {base_index} out of range for cloud of {} points",
            cloud.len()
        )));
    }
    let base = cloud.point(base_index);
    let shifted: Vec<Vec<f64>> = (0..cloud.len())
        .filter(|&i| i != base_index)
        .map(|i| cloud.point(i).iter().zip(base).map(|(x, b)| x - b).collect())
        .collect();
    let m = shifted.len();
    let mut data = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let v = dot(&shifted[i], &shifted[j]);
            data[i * m + j] = v;
            data[j * m + i] = v;
        }
    }
    Ok(GramMatrix { m, data })
}

/// Symmetric PSD square root. Eigenvalues within noise of zero are clamped.
pub fn psd_sqrt(g: &GramMatrix) -> Result<GramMatrix> {
    let m = g.m;
    let eig = symmetric_eigen(g);
    let max_eig = eig.values.iter().cloned().fold(0.0f64, f64::max);
    let min_eig = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if m > 0 && min_eig < -PSD_TOL * max_eig.max(0.0) && min_eig < 0.0 {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eig,
            max_eigenvalue: max_eig,
        });
    }
    let roots: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let v = &eig.vectors;
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let s: f64 = (0..m).map(|k| v[i * m + k] * roots[k] * v[j * m + k]).sum();
            out[i * m + j] = s;
            out[j * m + i] = s;
        }
    }
    Ok(GramMatrix { m, data: out })
}
