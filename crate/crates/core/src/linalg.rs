//! Dense linear algebra used by the method.
//!
//! Matrices are column-major: element `(i, j)` of a `rows x cols` matrix is
//! `data[i + j * rows]`. Products go through `matrixmultiply`; the symmetric
//! eigensolver (Householder tridiagonalisation followed by implicit QL) and
//! the one-sided Jacobi SVD are implemented here.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out.data[i + i * n] = 1.0;
        }
        out
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                what: "matrix buffer",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices; handy for small literals.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut out = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: ncols,
                    actual: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                out.data[i + j * nrows] = x;
            }
        }
        Ok(out)
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut out = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            out.data[i + i * n] = v;
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.data[j + i * self.cols] = self.data[i + j * self.rows];
            }
        }
        out
    }

    /// Copies rows `start..end`.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        let mut out = Self::zeros(end - start, self.cols);
        for j in 0..self.cols {
            out.col_mut(j).copy_from_slice(&self.col(j)[start..end]);
        }
        out
    }

    /// Keeps the first `cols` columns.
    pub fn leading_cols(&self, cols: usize) -> Self {
        Self {
            rows: self.rows,
            cols,
            data: self.data[..self.rows * cols].to_vec(),
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// `max |self - other|`; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn view(&self) -> MatView<'_> {
        MatView {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
            row_stride: 1,
            col_stride: self.rows,
        }
    }
}

/// Borrowed strided matrix: element `(i, j)` is `data[i * row_stride + j * col_stride]`.
#[derive(Debug, Clone, Copy)]
pub struct MatView<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: usize,
    col_stride: usize,
}

impl<'a> MatView<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize, row_stride: usize, col_stride: usize) -> Result<Self> {
        if rows > 0 && cols > 0 {
            let last = (rows - 1) * row_stride + (cols - 1) * col_stride;
            if last >= data.len() {
                return Err(Error::DimensionMismatch {
                    what: "matrix view extent",
                    expected: last + 1,
                    actual: data.len(),
                });
            }
        }
        Ok(Self {
            data,
            rows,
            cols,
            row_stride,
            col_stride,
        })
    }

    /// Column-major view of `rows` leading rows of a buffer whose columns are `ld` apart.
    pub fn col_major(data: &'a [f64], rows: usize, cols: usize, ld: usize) -> Result<Self> {
        Self::new(data, rows, cols, 1, ld)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.row_stride + j * self.col_stride]
    }

    /// Rows `start..end` of this view.
    pub fn row_range(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.rows, "row range out of bounds");
        let offset = if end > start { start * self.row_stride } else { 0 };
        Self {
            data: &self.data[offset..],
            rows: end - start,
            cols: self.cols,
            row_stride: self.row_stride,
            col_stride: self.col_stride,
        }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    pub fn to_owned(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.data[i + j * self.rows] = self.get(i, j);
            }
        }
        out
    }
}

/// `c = alpha * a * b + beta * c`.
pub fn gemm(alpha: f64, a: MatView<'_>, b: MatView<'_>, beta: f64, c: &mut DenseMatrix) -> Result<()> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            what: "inner dimension",
            expected: a.cols,
            actual: b.rows,
        });
    }
    if c.rows != a.rows || c.cols != b.cols {
        return Err(Error::DimensionMismatch {
            what: "product shape",
            expected: a.rows * b.cols,
            actual: c.rows * c.cols,
        });
    }
    if c.data.is_empty() {
        return Ok(());
    }
    if a.cols == 0 {
        c.scale(beta);
        return Ok(());
    }
    // SAFETY: both views were bounds-checked at construction, `c` is an owned
    // column-major buffer of exactly `a.rows * b.cols` elements and does not
    // alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.data.as_mut_ptr(),
            1,
            c.rows as isize,
        );
    }
    Ok(())
}

/// Standard matrix product `a * b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            what: "inner dimension",
            expected: a.cols,
            actual: b.rows,
        });
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    gemm(1.0, a.view(), b.view(), 0.0, &mut out)?;
    Ok(out)
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigResult {
    pub eigenvalues: Vec<f64>,
    /// Column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: DenseMatrix,
}

impl EigResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Relative asymmetry accepted by [`eig_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric eigendecomposition.
///
/// Eigenvalues come back in descending order; equal eigenvalues keep the
/// order the QL iteration produced. Each eigenvector is flipped so that its
/// largest-magnitude entry (the first one on ties) is positive.
pub fn eig_symmetric(c: &DenseMatrix) -> Result<EigResult> {
    let n = c.rows;
    if c.cols != n {
        return Err(Error::NotSquare { rows: c.rows, cols: c.cols });
    }
    if c.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("eigenproblem input"));
    }
    let scale = c.max_abs();
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            asym = asym.max((c.get(i, j) - c.get(j, i)).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    if n == 0 {
        return Ok(EigResult {
            eigenvalues: Vec::new(),
            eigenvectors: DenseMatrix::zeros(0, 0),
        });
    }

    // Row-major working copy for the Householder reduction.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = c.get(i, j);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);

    // The QL sweeps rotate pairs of columns, so switch to column-major.
    let mut cols = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cols[j * n + i] = v[i * n + j];
        }
    }
    tql2(n, &mut cols, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));

    let mut vectors = DenseMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(d[src]);
        let col = &cols[src * n..(src + 1) * n];
        let flip = sign_flip(col);
        for (o, &x) in vectors.col_mut(dst).iter_mut().zip(col) {
            *o = if flip { -x } else { x };
        }
    }
    Ok(EigResult {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// True when the largest-magnitude entry (first on ties) is negative.
fn sign_flip(v: &[f64]) -> bool {
    let mut best = 0.0f64;
    let mut neg = false;
    for &x in v {
        if x.abs() > best {
            best = x.abs();
            neg = x < 0.0;
        }
    }
    neg
}

// Householder tridiagonalisation (tred2 of Bowdler, Martin, Reinsch and
// Wilkinson, as in EISPACK/JAMA). `v` is row-major and ends up holding the
// accumulated orthogonal transform.
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e); `cols` is column-major and receives
// the eigenvectors.
fn tql2(n: usize, cols: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    const MAX_ITER: usize = 64;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_ITER {
                    return Err(Error::NoConvergence("symmetric QL iteration"));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = cols.split_at_mut((i + 1) * n);
                    let vi = &mut left[i * n..];
                    let vi1 = &mut right[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Singular values (descending, `min(rows, cols)` of them) and the matching
/// left singular vectors of `q`, by one-sided Jacobi rotations.
///
/// Left vectors belonging to zero singular values are returned as zero
/// columns. Meant as an independent check on the Gram-matrix route, not for
/// production-size matrices.
pub fn svd_oracle(q: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if q.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    if q.rows < q.cols {
        // Left vectors of q are right vectors of q^T; rotate the rows instead.
        let (values, _, right) = jacobi(&q.transpose())?;
        return Ok((values, right));
    }
    let (values, left, _) = jacobi(q)?;
    Ok((values, left))
}

/// Returns (singular values, left vectors, right vectors) for a tall matrix.
fn jacobi(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix, DenseMatrix)> {
    const MAX_SWEEPS: usize = 80;
    let rows = a.rows;
    let cols = a.cols;
    let mut u = a.clone();
    let mut v = DenseMatrix::identity(cols);
    let tol = f64::EPSILON * rows.max(1) as f64;
    let mut converged = cols < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let (alpha, beta, gamma) = {
                    let ci = u.col(i);
                    let cj = u.col(j);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in ci.iter().zip(cj) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= tol * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_cols(&mut u, i, j, c, s);
                rotate_cols(&mut v, i, j, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence("one-sided Jacobi SVD"));
    }
    let mut norms: Vec<f64> = (0..cols)
        .map(|j| libm::sqrt(u.col(j).iter().map(|x| x * x).sum()))
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut left = DenseMatrix::zeros(rows, cols);
    let mut right = DenseMatrix::zeros(cols, cols);
    let mut values = Vec::with_capacity(cols);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        values.push(sigma);
        if sigma > 0.0 {
            for (o, x) in left.col_mut(dst).iter_mut().zip(u.col(src)) {
                *o = x / sigma;
            }
        }
        right.col_mut(dst).copy_from_slice(v.col(src));
    }
    norms.clear();
    Ok((values, left, right))
}

fn rotate_cols(m: &mut DenseMatrix, i: usize, j: usize, c: f64, s: f64) {
    let rows = m.rows;
    let (head, tail) = m.data.split_at_mut(j * rows);
    let ci = &mut head[i * rows..(i + 1) * rows];
    let cj = &mut tail[..rows];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small deterministic pseudo-random fill for tests.
    fn filled(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = crate::synth::SplitMix64::new(seed);
        let data = (0..rows * cols).map(|_| rng.normal()).collect();
        DenseMatrix::from_col_major(rows, cols, data).unwrap()
    }

    fn symmetric(n: usize, seed: u64) -> DenseMatrix {
        let a = filled(n, n, seed);
        let mut s = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
            }
        }
        s
    }

    fn check_decomposition(c: &DenseMatrix, eig: &EigResult) {
        let n = c.rows();
        let v = &eig.eigenvectors;
        let vtv = matmul(&v.transpose(), v).unwrap();
        assert!(vtv.max_abs_diff(&DenseMatrix::identity(n)) <= 1e-10);
        let recon = matmul(&matmul(v, &DenseMatrix::diag(&eig.eigenvalues)).unwrap(), &v.transpose()).unwrap();
        assert!(recon.max_abs_diff(c) <= 1e-9 * c.max_abs().max(1.0));
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn diagonal_eigenpairs_are_reordered_axes() {
        let eig = eig_symmetric(&DenseMatrix::diag(&[1.0, 2.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![2.0, 1.0]);
        assert_eq!(eig.eigenvectors, DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap());
    }

    #[test]
    fn two_by_two_by_hand() {
        // det([[2-l, 1], [1, 2-l]]) = (l-3)(l-1)
        let c = DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let eig = eig_symmetric(&c).unwrap();
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let v = &eig.eigenvectors;
        assert!((v.get(0, 0) - r).abs() < 1e-14 && (v.get(1, 0) - r).abs() < 1e-14);
        // largest |entry| ties, so the first entry is made positive
        assert!((v.get(0, 1) - r).abs() < 1e-14 && (v.get(1, 1) + r).abs() < 1e-14);
    }

    #[test]
    fn identity_gives_unit_eigenvalues() {
        let c = DenseMatrix::identity(3);
        let eig = eig_symmetric(&c).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0, 1.0]);
        check_decomposition(&c, &eig);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(eig_symmetric(&DenseMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
        let c = DenseMatrix::from_rows(&[[1.0, 2.0], [2.1, 1.0]]).unwrap();
        assert!(matches!(eig_symmetric(&c), Err(Error::NotSymmetric { .. })));
        let c = DenseMatrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(eig_symmetric(&c).is_err());
    }

    #[test]
    fn random_symmetric_reconstruction() {
        for (n, seed) in [(1, 1), (5, 2), (37, 3), (128, 4), (512, 5)] {
            let c = symmetric(n, seed);
            let eig = eig_symmetric(&c).unwrap();
            check_decomposition(&c, &eig);
        }
    }

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let c = symmetric(20, 9);
        let eig = eig_symmetric(&c).unwrap();
        for j in 0..20 {
            let col = eig.eigenvectors.col(j);
            let (idx, _) = col
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) });
            assert!(col[idx] > 0.0);
        }
    }

    #[test]
    fn svd_of_diagonal_and_rank_one() {
        let (s, _) = svd_oracle(&DenseMatrix::diag(&[3.0, 4.0])).unwrap();
        assert_eq!(s, vec![4.0, 3.0]);

        // |u| = 2, |v| = 5
        let u = [2.0, 0.0, 0.0];
        let v = [3.0, 4.0];
        let mut q = DenseMatrix::zeros(3, 2);
        for i in 0..3 {
            for j in 0..2 {
                q.set(i, j, u[i] * v[j]);
            }
        }
        let (s, left) = svd_oracle(&q).unwrap();
        assert!((s[0] - 10.0).abs() < 1e-13);
        assert!(s[1].abs() < 1e-13);
        assert!((left.get(0, 0).abs() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn svd_matches_gram_eigenvalues() {
        let q = filled(6, 3, 11);
        let k = 3.0;
        let (s, left) = svd_oracle(&q).unwrap();
        let mut gram = matmul(&q.transpose(), &q).unwrap();
        gram.scale(1.0 / k);
        let eig = eig_symmetric(&gram).unwrap();
        for (sv, lam) in s.iter().zip(&eig.eigenvalues) {
            let sq = sv * sv / k;
            assert!((sq - lam).abs() <= 1e-10 * lam.abs());
        }
        let utu = matmul(&left.transpose(), &left).unwrap();
        assert!(utu.max_abs_diff(&DenseMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn svd_of_wide_matrix_pads_to_min_dimension() {
        let q = filled(3, 7, 5);
        let (s, left) = svd_oracle(&q).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!((left.rows(), left.cols()), (3, 3));
        let (st, _) = svd_oracle(&q.transpose()).unwrap();
        for (a, b) in s.iter().zip(&st) {
            assert!((a - b).abs() < 1e-12 * s[0]);
        }
    }

    #[test]
    fn matmul_by_hand_and_identity() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[1.0], [1.0]]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap(), DenseMatrix::from_rows(&[[3.0], [7.0]]).unwrap());
        let r = filled(4, 5, 3);
        assert_eq!(matmul(&DenseMatrix::identity(4), &r).unwrap(), r);
        assert!(matches!(matmul(&a, &r), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn matmul_is_associative() {
        let (a, b, c) = (filled(4, 4, 1), filled(4, 4, 2), filled(4, 4, 3));
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        assert!(left.max_abs_diff(&right) <= 1e-12);
    }

    #[test]
    fn strided_views_transpose_without_copy() {
        let a = filled(3, 4, 8);
        let mut out = DenseMatrix::zeros(4, 3);
        gemm(1.0, a.view().t(), DenseMatrix::identity(3).view(), 0.0, &mut out).unwrap();
        assert_eq!(out, a.transpose());
        assert!(MatView::new(&[0.0; 5], 2, 3, 1, 2).is_err());
    }
}
