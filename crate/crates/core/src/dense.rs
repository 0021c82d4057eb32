//! Dense linear-algebra kernels: column-major matrices, symmetric
//! eigendecomposition, Cholesky (dense and banded), pivoted LU, Gram-Schmidt
//! QR and a one-sided Jacobi SVD.
//!
//! Everything here operates on `f64` and is self-contained; the hierarchical
//! and tensor layers are built on these kernels.

use crate::error::{Error, Result};

/// Dense column-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl std::fmt::Debug for Mat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Mat({}x{})", self.nrows, self.ncols)
    }
}

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from a closure `f(i, j)`.
    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Wrap a column-major buffer.
    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(nrows * ncols, data.len(), "buffer length mismatch");
        Mat { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.nrows == 0 || self.ncols == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    /// Copy of columns `js.start..js.end`.
    pub fn cols(&self, js: std::ops::Range<usize>) -> Mat {
        let nc = js.end - js.start;
        Mat {
            nrows: self.nrows,
            ncols: nc,
            data: self.data[js.start * self.nrows..js.end * self.nrows].to_vec(),
        }
    }

    /// Copy of the sub-block `rows × cols`.
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Mat {
        let mut out = Mat::zeros(rows.end - rows.start, cols.end - cols.start);
        for (jo, j) in cols.enumerate() {
            let src = &self.col(j)[rows.clone()];
            out.col_mut(jo).copy_from_slice(src);
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat) {
        for j in 0..b.ncols {
            let nr = self.nrows;
            let dst = &mut self.col_mut(c0 + j)[r0..r0 + b.nrows];
            dst.copy_from_slice(b.col(j));
            let _ = nr;
        }
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> Mat {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y;
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat {
            nrows: self.nrows,
            ncols: self.ncols,
            data,
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `self * b`.
    pub fn matmul(&self, b: &Mat) -> Mat {
        assert_eq!(self.ncols, b.nrows, "matmul: inner dimensions differ");
        let mut c = Mat::zeros(self.nrows, b.ncols);
        for j in 0..b.ncols {
            let cj = &mut c.data[j * self.nrows..(j + 1) * self.nrows];
            for k in 0..self.ncols {
                let bkj = b[(k, j)];
                if bkj == 0.0 {
                    continue;
                }
                let ak = &self.data[k * self.nrows..(k + 1) * self.nrows];
                for (ci, ai) in cj.iter_mut().zip(ak) {
                    *ci += bkj * ai;
                }
            }
        }
        c
    }

    /// `selfᵀ * b`.
    pub fn matmul_transa(&self, b: &Mat) -> Mat {
        assert_eq!(self.nrows, b.nrows, "matmul_transa: row counts differ");
        let mut c = Mat::zeros(self.ncols, b.ncols);
        for j in 0..b.ncols {
            let bj = b.col(j);
            for i in 0..self.ncols {
                let ai = self.col(i);
                c[(i, j)] = dot(ai, bj);
            }
        }
        c
    }

    /// `self * bᵀ`.
    pub fn matmul_transb(&self, b: &Mat) -> Mat {
        assert_eq!(self.ncols, b.ncols, "matmul_transb: column counts differ");
        let mut c = Mat::zeros(self.nrows, b.nrows);
        for k in 0..self.ncols {
            let ak = self.col(k);
            for j in 0..b.nrows {
                let bjk = b[(j, k)];
                if bjk == 0.0 {
                    continue;
                }
                let cj = &mut c.data[j * self.nrows..(j + 1) * self.nrows];
                for (ci, ai) in cj.iter_mut().zip(ak) {
                    *ci += bjk * ai;
                }
            }
        }
        c
    }

    /// Horizontal concatenation `[self | b]`.
    pub fn hcat(&self, b: &Mat) -> Mat {
        assert_eq!(self.nrows, b.nrows, "hcat: row counts differ");
        let mut data = Vec::with_capacity(self.data.len() + b.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&b.data);
        Mat {
            nrows: self.nrows,
            ncols: self.ncols + b.ncols,
            data,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let scale = self.max_abs().max(1e-300);
        for j in 0..self.ncols {
            for i in 0..j {
                if (self[(i, j)] - self[(j, i)]).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (Householder tridiagonalization + implicit QL)
// ---------------------------------------------------------------------------

/// Eigendecomposition of a symmetric matrix: `A = S diag(d) Sᵀ` with
/// eigenvalues ascending and orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigPair {
    pub vectors: Mat,
    pub values: Vec<f64>,
}

/// Symmetric eigendecomposition. The strict lower triangle is taken as the
/// symmetric part; the input is not checked for symmetry here.
pub fn sym_eig(a: &Mat) -> Result<EigPair> {
    assert_eq!(a.nrows, a.ncols, "sym_eig: matrix must be square");
    let n = a.nrows;
    if n == 0 {
        return Ok(EigPair {
            vectors: Mat::zeros(0, 0),
            values: vec![],
        });
    }
    let mut z = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut d, &mut e, Some(&mut z))?;
    sort_eig(&mut d, Some(&mut z));
    Ok(EigPair {
        vectors: z,
        values: d,
    })
}

/// Eigenvalues of a symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e.len() == d.len() - 1`), ascending.
pub fn tridiag_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(n == 0 || off.len() == n - 1);
    if n == 0 {
        return Ok(vec![]);
    }
    let mut d = diag.to_vec();
    // tql2 expects e[i] = element coupling d[i-1] and d[i]; e[0] unused.
    let mut e = vec![0.0; n];
    e[1..].copy_from_slice(off);
    tql2(&mut d, &mut e, None)?;
    sort_eig(&mut d, None);
    Ok(d)
}

fn sort_eig(d: &mut [f64], mut z: Option<&mut Mat>) {
    let n = d.len();
    for i in 0..n {
        let mut k = i;
        for j in i + 1..n {
            if d[j] < d[k] {
                k = j;
            }
        }
        if k != i {
            d.swap(i, k);
            if let Some(z) = z.as_deref_mut() {
                for r in 0..z.nrows {
                    let tmp = z[(r, i)];
                    z[(r, i)] = z[(r, k)];
                    z[(r, k)] = tmp;
                }
            }
        }
    }
}

/// Householder reduction to tridiagonal form, accumulating the orthogonal
/// transformation in `a` (EISPACK tred2).
fn tred2(a: &mut Mat, d: &mut [f64], e: &mut [f64]) {
    let n = a.nrows;
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let mut f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                f = 0.0;
                for j in 0..=l {
                    a[(j, i)] = a[(i, j)] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in j + 1..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * a[(i, k)];
                        a[(j, k)] -= delta;
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[(i, k)] * a[(k, j)];
                }
                for k in 0..i {
                    let delta = g * a[(k, i)];
                    a[(k, j)] -= delta;
                }
            }
        }
        d[i] = a[(i, i)];
        a[(i, i)] = 1.0;
        for j in 0..i {
            a[(j, i)] = 0.0;
            a[(i, j)] = 0.0;
        }
    }
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix
/// (EISPACK tql2). `e[i]` is the subdiagonal below `d[i]`; `e[n-1]` unused.
fn tql2(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Mat>) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigNoConvergence { iters: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..z.nrows {
                        f = z[(k, i + 1)];
                        z[(k, i + 1)] = s * z[(k, i)] + c * f;
                        z[(k, i)] = c * z[(k, i)] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

/// Lower Cholesky factor of an SPD matrix. Fails with the offending pivot
/// index when a nonpositive pivot is hit.
pub fn cholesky(a: &Mat) -> std::result::Result<Mat, usize> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    let mut l = a.clone();
    for j in 0..n {
        let mut djj = l[(j, j)];
        for k in 0..j {
            let ljk = l[(j, k)];
            djj -= ljk * ljk;
        }
        if djj <= 0.0 || !djj.is_finite() {
            return Err(j);
        }
        let djj = djj.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut v = l[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
        for i in 0..j {
            l[(i, j)] = 0.0;
        }
    }
    Ok(l)
}

/// Solve `L Lᵀ X = B` given the lower Cholesky factor.
pub fn chol_solve(l: &Mat, b: &Mat) -> Mat {
    let n = l.nrows;
    assert_eq!(b.nrows, n);
    let mut x = b.clone();
    for col in 0..x.ncols {
        let xc = x.col_mut(col);
        // forward
        for i in 0..n {
            let mut v = xc[i];
            for k in 0..i {
                v -= l[(i, k)] * xc[k];
            }
            xc[i] = v / l[(i, i)];
        }
        // backward (Lᵀ)
        for i in (0..n).rev() {
            let mut v = xc[i];
            for k in i + 1..n {
                v -= l[(k, i)] * xc[k];
            }
            xc[i] = v / l[(i, i)];
        }
    }
    x
}

// ---------------------------------------------------------------------------
// LU with partial pivoting
// ---------------------------------------------------------------------------

pub struct Lu {
    lu: Mat,
    piv: Vec<usize>,
}

pub fn lu_factor(a: &Mat) -> Result<Lu> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut pmax = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if pmax == 0.0 {
            return Err(Error::SingularOperator { value: 0.0 });
        }
        if p != k {
            piv.swap(k, p);
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        // multipliers into column k, then a column-wise rank-1 update
        {
            let ck = lu.col_mut(k);
            for x in ck[k + 1..].iter_mut() {
                *x /= pivot;
            }
        }
        let (head, tail) = lu.data.split_at_mut((k + 1) * n);
        let ck = &head[k * n + k + 1..k * n + n];
        for (jj, cj) in tail.chunks_exact_mut(n).enumerate() {
            let s = cj[k];
            if s == 0.0 {
                continue;
            }
            let _ = jj;
            for (x, m) in cj[k + 1..].iter_mut().zip(ck) {
                *x -= m * s;
            }
        }
    }
    Ok(Lu { lu, piv })
}

pub fn lu_solve(f: &Lu, b: &Mat) -> Mat {
    let n = f.lu.nrows;
    assert_eq!(b.nrows, n);
    let mut x = Mat::zeros(n, b.ncols);
    for col in 0..b.ncols {
        let bc = b.col(col);
        let mut xc: Vec<f64> = (0..n).map(|i| bc[f.piv[i]]).collect();
        // column-oriented forward (unit lower) and backward (upper) sweeps
        for k in 0..n {
            let s = xc[k];
            if s != 0.0 {
                let ck = &f.lu.col(k)[k + 1..];
                for (xi, lik) in xc[k + 1..].iter_mut().zip(ck) {
                    *xi -= lik * s;
                }
            }
        }
        for k in (0..n).rev() {
            let s = xc[k] / f.lu[(k, k)];
            xc[k] = s;
            if s != 0.0 {
                let ck = &f.lu.col(k)[..k];
                for (xi, uik) in xc[..k].iter_mut().zip(ck) {
                    *xi -= uik * s;
                }
            }
        }
        x.col_mut(col).copy_from_slice(&xc);
    }
    x
}

// ---------------------------------------------------------------------------
// Gram-Schmidt QR
// ---------------------------------------------------------------------------

/// Thin QR by modified Gram-Schmidt with one reorthogonalization pass.
/// Columns whose norm falls below `drop_tol` times the original column norm
/// are deflated (columns beyond the space dimension always are), so `Q` has
/// `r ≤ min(nrows, ncols)` orthonormal columns and `R` is `r × ncols` with
/// `A = Q R`.
pub fn mgs_qr(a: &Mat, drop_tol: f64) -> (Mat, Mat) {
    let m = a.nrows;
    let n = a.ncols;
    let mut q_cols: Vec<Vec<f64>> = Vec::new();
    let mut r = Mat::zeros(n, n); // trimmed below
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..n {
        let mut v = a.col(j).to_vec();
        let orig_norm = dot(&v, &v).sqrt();
        for _pass in 0..2 {
            for (qi, q) in q_cols.iter().enumerate() {
                let h = dot(q, &v);
                axpy(-h, q, &mut v);
                r[(kept[qi], j)] += h;
            }
        }
        if q_cols.len() >= m {
            continue; // space exhausted; residual is rounding noise
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm <= drop_tol * orig_norm.max(1e-300) || nrm == 0.0 {
            continue; // deflate
        }
        for x in &mut v {
            *x /= nrm;
        }
        r[(j, j)] = nrm;
        kept.push(j);
        q_cols.push(v);
    }
    let rank = q_cols.len();
    let mut q = Mat::zeros(m, rank);
    for (k, col) in q_cols.iter().enumerate() {
        q.col_mut(k).copy_from_slice(col);
    }
    let mut r_out = Mat::zeros(rank, n);
    for (new_i, &old_i) in kept.iter().enumerate() {
        for j in 0..n {
            r_out[(new_i, j)] = r[(old_i, j)];
        }
    }
    (q, r_out)
}

/// Column-pivoted QR truncated when the pivot column norm drops below
/// `tol_rel` times the largest, or at `max_rank` columns. Returns `(Q, S)`
/// with `A ≈ Q S`, `Q` orthonormal `m × r`, `S = Rᵀ-permuted` of size `r × n`.
pub fn pivoted_qr(a: &Mat, tol_rel: f64, max_rank: usize) -> (Mat, Mat) {
    let m = a.nrows;
    let n = a.ncols;
    let rmax = max_rank.min(m).min(n);
    let mut work = a.clone();
    let mut norms: Vec<f64> = (0..n).map(|j| dot(work.col(j), work.col(j))).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut q = Mat::zeros(m, rmax);
    let mut r = Mat::zeros(rmax, n); // in permuted order, unpermuted at the end
    let norm0 = norms.iter().cloned().fold(0.0f64, f64::max).sqrt();
    let mut rank = 0;
    for k in 0..rmax {
        // pivot: largest remaining column
        let (p, &pn) = norms[k..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, v)| (i + k, v))
            .unwrap();
        if pn.sqrt() <= tol_rel * norm0.max(1e-300) {
            break;
        }
        if p != k {
            perm.swap(k, p);
            norms.swap(k, p);
            for i in 0..m {
                let tmp = work[(i, k)];
                work[(i, k)] = work[(i, p)];
                work[(i, p)] = tmp;
            }
            for i in 0..k {
                let tmp = r[(i, k)];
                r[(i, k)] = r[(i, p)];
                r[(i, p)] = tmp;
            }
        }
        let mut v = work.col(k).to_vec();
        // re-orthogonalize against previous Q columns for stability
        for qi in 0..k {
            let h = dot(q.col(qi), &v);
            axpy(-h, q.col(qi), &mut v);
            r[(qi, k)] += h;
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm == 0.0 {
            break;
        }
        for x in &mut v {
            *x /= nrm;
        }
        r[(k, k)] = nrm;
        q.col_mut(k).copy_from_slice(&v);
        rank = k + 1;
        // eliminate from remaining columns
        for j in k + 1..n {
            let h = dot(&v, work.col(j));
            r[(k, j)] = h;
            axpy(-h, &v, work.col_mut(j));
            norms[j] = dot(work.col(j), work.col(j));
        }
    }
    let q = q.cols(0..rank);
    // undo permutation: S[:, perm[j]] = R[:, j]
    let mut s = Mat::zeros(rank, n);
    for j in 0..n {
        for i in 0..rank {
            s[(i, perm[j])] = r[(i, j)];
        }
    }
    (q, s)
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD
// ---------------------------------------------------------------------------

/// Thin SVD `A = U diag(s) Vᵀ` by one-sided Jacobi rotations; singular values
/// descending, zero singular values dropped. Intended for small core
/// matrices; cost is O(m n² · sweeps). Wide inputs are transposed first so
/// the rotations never chase more columns than the rank allows.
pub fn jacobi_svd(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    if a.ncols > a.nrows {
        let (v, s, u) = jacobi_svd(&a.transpose());
        return (u, s, v);
    }
    let m = a.nrows;
    let n = a.ncols;
    let mut u = a.clone();
    let mut v = Mat::identity(n);
    let eps = f64::EPSILON;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let up = u.col(p);
                let uq = u.col(q);
                let alpha = dot(up, up);
                let beta = dot(uq, uq);
                let gamma = dot(up, uq);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let norm = (alpha * beta).sqrt();
                off = off.max(gamma.abs() / norm);
                if gamma.abs() <= eps * norm {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let uip = u[(i, p)];
                    let uiq = u[(i, q)];
                    u[(i, p)] = c * uip - s * uiq;
                    u[(i, q)] = s * uip + c * uiq;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
        if off <= 4.0 * eps {
            break;
        }
    }
    // extract singular values, normalize U, sort descending
    let mut order: Vec<usize> = (0..n).collect();
    let sigmas: Vec<f64> = (0..n).map(|j| dot(u.col(j), u.col(j)).sqrt()).collect();
    order.sort_by(|&a, &b| sigmas[b].partial_cmp(&sigmas[a]).unwrap());
    let rank = order.iter().filter(|&&j| sigmas[j] > 0.0).count();
    let mut uo = Mat::zeros(m, rank);
    let mut vo = Mat::zeros(n, rank);
    let mut so = Vec::with_capacity(rank);
    for (k, &j) in order.iter().take(rank).enumerate() {
        let sj = sigmas[j];
        so.push(sj);
        for i in 0..m {
            uo[(i, k)] = u[(i, j)] / sj;
        }
        for i in 0..n {
            vo[(i, k)] = v[(i, j)];
        }
    }
    (uo, so, vo)
}

// ---------------------------------------------------------------------------
// Symmetric banded matrices
// ---------------------------------------------------------------------------

/// Symmetric band matrix stored by sub-diagonals: `bands[k][i] = A[i+k, i]`
/// for `k = 0..=bw`.
#[derive(Clone, Debug)]
pub struct BandMat {
    pub n: usize,
    pub bw: usize,
    bands: Vec<Vec<f64>>,
}

impl BandMat {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        let bands = (0..=bw).map(|k| vec![0.0; n - k]).collect();
        BandMat { n, bw, bands }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i >= j { (j, i) } else { (i, j) };
        let k = hi - lo;
        if k > self.bw {
            0.0
        } else {
            self.bands[k][lo]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i >= j { (j, i) } else { (i, j) };
        let k = hi - lo;
        assert!(k <= self.bw, "entry outside band");
        self.bands[k][lo] = v;
    }

    /// Extract the principal sub-block `range × range` as a band matrix.
    pub fn sub_block(&self, range: std::ops::Range<usize>) -> BandMat {
        let n = range.end - range.start;
        let mut out = BandMat::zeros(n, self.bw.min(n.saturating_sub(1)));
        for k in 0..=out.bw {
            for i in 0..n - k {
                out.bands[k][i] = self.bands[k][range.start + i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..(i + self.bw + 1).min(self.n) {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    pub fn add_diag(&mut self, sigma: f64) {
        for x in &mut self.bands[0] {
            *x += sigma;
        }
    }

    /// `self * X` for dense multi-column `X`.
    pub fn matmul(&self, x: &Mat) -> Mat {
        assert_eq!(x.nrows(), self.n);
        let mut y = Mat::zeros(self.n, x.ncols());
        for col in 0..x.ncols() {
            let xc = x.col(col);
            let yc = y.col_mut(col);
            for i in 0..self.n {
                let mut v = self.bands[0][i] * xc[i];
                for k in 1..=self.bw {
                    if i >= k {
                        v += self.bands[k][i - k] * xc[i - k];
                    }
                    if i + k < self.n {
                        v += self.bands[k][i] * xc[i + k];
                    }
                }
                yc[i] = v;
            }
        }
        y
    }

    /// Banded Cholesky `A = L Lᵀ`; fails with the offending pivot index.
    pub fn cholesky(&self) -> std::result::Result<BandChol, usize> {
        let mut l = self.clone();
        let n = self.n;
        let bw = self.bw;
        for j in 0..n {
            let mut d = l.bands[0][j];
            for k in 1..=bw.min(j) {
                let v = l.bands[k][j - k];
                d -= v * v;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(j);
            }
            let d = d.sqrt();
            l.bands[0][j] = d;
            for i in j + 1..(j + bw + 1).min(n) {
                let mut v = if i - j <= bw { l.bands[i - j][j] } else { 0.0 };
                // sum over k < j with both (i,k) and (j,k) in band
                let kmin = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in kmin..j {
                    v -= l.bands[i - k][k] * l.bands[j - k][k];
                }
                l.bands[i - j][j] = v / d;
            }
        }
        Ok(BandChol { l })
    }
}

/// Banded lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct BandChol {
    l: BandMat,
}

impl BandChol {
    pub fn solve(&self, b: &Mat) -> Mat {
        let n = self.l.n;
        let bw = self.l.bw;
        assert_eq!(b.nrows(), n);
        let mut x = b.clone();
        for col in 0..x.ncols() {
            let xc = x.col_mut(col);
            for i in 0..n {
                let mut v = xc[i];
                for k in 1..=bw.min(i) {
                    v -= self.l.bands[k][i - k] * xc[i - k];
                }
                xc[i] = v / self.l.bands[0][i];
            }
            for i in (0..n).rev() {
                let mut v = xc[i];
                for k in 1..=bw.min(n - 1 - i) {
                    v -= self.l.bands[k][i] * xc[i + k];
                }
                xc[i] = v / self.l.bands[0][i];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_mat(m: usize, n: usize, rng: &mut ChaCha12Rng) -> Mat {
        Mat::from_fn(m, n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn random_spd(n: usize, rng: &mut ChaCha12Rng) -> Mat {
        let g = random_mat(n, n, rng);
        let mut a = g.matmul_transb(&g);
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        a
    }

    #[test]
    fn matmul_small() {
        let a = Mat::from_fn(2, 3, |i, j| (i * 3 + j) as f64);
        let b = Mat::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let c = a.matmul(&b);
        // row 0 of a = [0,1,2]; col 0 of b = [0,2,4] -> 10
        assert_eq!(c[(0, 0)], 10.0);
        assert_eq!(c[(1, 0)], 28.0);
        assert_eq!(c[(1, 1)], 40.0);
    }

    #[test]
    fn sym_eig_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for &n in &[1usize, 2, 3, 10, 40, 111] {
            let a = random_spd(n, &mut rng);
            let eig = sym_eig(&a).unwrap();
            let s = &eig.vectors;
            // orthogonality
            let sts = s.matmul_transa(s);
            let mut err = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    err = err.max((sts[(i, j)] - target).abs());
                }
            }
            assert!(err < 1e-12, "orthogonality failed at n={n}: {err}");
            // reconstruction
            let mut sd = s.clone();
            for j in 0..n {
                let lam = eig.values[j];
                for i in 0..n {
                    sd[(i, j)] *= lam;
                }
            }
            let rec = sd.matmul_transb(s);
            let diff = rec.sub(&a).frob_norm() / a.frob_norm();
            assert!(diff < 1e-13, "reconstruction failed at n={n}: {diff}");
            // ascending
            for w in eig.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn sym_eig_laplacian_matches_formula() {
        let n = 64usize;
        let a = Mat::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let eig = sym_eig(&a).unwrap();
        // eigenvalues 2 + 2cos(pi j/(n+1)), j = 1..n, sorted ascending
        let mut expect: Vec<f64> = (1..=n)
            .map(|j| 2.0 + 2.0 * (std::f64::consts::PI * j as f64 / (n as f64 + 1.0)).cos())
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in eig.values.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn cholesky_and_solve() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 37;
        let a = random_spd(n, &mut rng);
        let l = cholesky(&a).unwrap();
        let b = random_mat(n, 3, &mut rng);
        let x = chol_solve(&l, &b);
        let res = a.matmul(&x).sub(&b).frob_norm() / b.frob_norm();
        assert!(res < 1e-13, "residual {res}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = Mat::identity(4);
        a[(2, 2)] = -1.0;
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn lu_solves() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let n = 25;
        let a = random_mat(n, n, &mut rng);
        let f = lu_factor(&a).unwrap();
        let b = random_mat(n, 2, &mut rng);
        let x = lu_solve(&f, &b);
        let res = a.matmul(&x).sub(&b).frob_norm() / b.frob_norm();
        assert!(res < 1e-11, "residual {res}");
    }

    #[test]
    fn mgs_qr_orthonormal_and_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let a = random_mat(30, 8, &mut rng);
        let (q, r) = mgs_qr(&a, 1e-12);
        assert_eq!(q.ncols(), 8);
        let qtq = q.matmul_transa(&q);
        let err = qtq.sub(&Mat::identity(8)).max_abs();
        assert!(err < 1e-13);
        let diff = q.matmul(&r).sub(&a).frob_norm() / a.frob_norm();
        assert!(diff < 1e-13);
    }

    #[test]
    fn mgs_qr_deflates_duplicates() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let u = random_mat(20, 1, &mut rng);
        let a = u.hcat(&u);
        let (q, r) = mgs_qr(&a, 1e-12);
        assert_eq!(q.ncols(), 1);
        let diff = q.matmul(&r).sub(&a).frob_norm() / a.frob_norm();
        assert!(diff < 1e-13);
    }

    #[test]
    fn pivoted_qr_reveals_rank() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let u = random_mat(40, 5, &mut rng);
        let v = random_mat(30, 5, &mut rng);
        let a = u.matmul_transb(&v);
        let (q, s) = pivoted_qr(&a, 1e-12, 40);
        assert_eq!(q.ncols(), 5, "rank should be 5, got {}", q.ncols());
        let diff = q.matmul(&s).sub(&a).frob_norm() / a.frob_norm();
        assert!(diff < 1e-12);
    }

    #[test]
    fn jacobi_svd_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let a = random_mat(25, 12, &mut rng);
        let (u, s, v) = jacobi_svd(&a);
        let mut us = u.clone();
        for j in 0..s.len() {
            for i in 0..u.nrows() {
                us[(i, j)] *= s[j];
            }
        }
        let rec = us.matmul_transb(&v);
        let diff = rec.sub(&a).frob_norm() / a.frob_norm();
        assert!(diff < 1e-13, "svd reconstruction error {diff}");
        for w in s.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // singular values match eigenvalues of AᵀA
        let gram = a.matmul_transa(&a);
        let eig = sym_eig(&gram).unwrap();
        let mut lam: Vec<f64> = eig.values.iter().map(|x| x.max(0.0).sqrt()).collect();
        lam.reverse();
        for (si, li) in s.iter().zip(&lam) {
            assert!((si - li).abs() < 1e-10 * lam[0].max(1.0));
        }
    }

    #[test]
    fn band_cholesky_matches_dense() {
        let n = 50;
        let mut b = BandMat::zeros(n, 2);
        for i in 0..n {
            b.set(i, i, 4.0);
            if i + 1 < n {
                b.set(i + 1, i, -1.0);
            }
            if i + 2 < n {
                b.set(i + 2, i, 0.5);
            }
        }
        let dense = b.to_dense();
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let rhs = random_mat(n, 3, &mut rng);
        let f = b.cholesky().unwrap();
        let x = f.solve(&rhs);
        let res = dense.matmul(&x).sub(&rhs).frob_norm() / rhs.frob_norm();
        assert!(res < 1e-13, "band solve residual {res}");
        let y = b.matmul(&rhs);
        let y2 = dense.matmul(&rhs);
        assert!(y.sub(&y2).frob_norm() < 1e-13 * y2.frob_norm());
    }

    #[test]
    fn tridiag_eigenvalues_match_dense() {
        let n = 33;
        let d: Vec<f64> = (0..n).map(|i| 2.0 + (i as f64) * 0.1).collect();
        let e: Vec<f64> = (0..n - 1).map(|i| -1.0 + 0.01 * i as f64).collect();
        let a = Mat::from_fn(n, n, |i, j| {
            if i == j {
                d[i]
            } else if i.abs_diff(j) == 1 {
                e[i.min(j)]
            } else {
                0.0
            }
        });
        let lam1 = tridiag_eigenvalues(&d, &e).unwrap();
        let lam2 = sym_eig(&a).unwrap().values;
        for (a, b) in lam1.iter().zip(&lam2) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
