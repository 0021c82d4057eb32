//! Dense d-dimensional tensors with mode products, matricizations, block
//! extraction and Kronecker-sum application.
//!
//! Layout: column-major with mode 0 fastest, i.e. the linear index of
//! element `(i_0, …, i_{d-1})` is `i_0 + n_0·(i_1 + n_1·(i_2 + …))`. With
//! this convention the mode-0 matricization is a reinterpretation of the
//! buffer with no data movement.

use crate::dense::Mat;
use crate::error::{Error, Result};

/// Symmetric linear operator interface shared by dense matrices, banded
/// matrices and hierarchical matrices.
pub trait SymOp {
    /// Matrix dimension (the operator is square).
    fn dim(&self) -> usize;
    /// `A * X` for multi-column `X`.
    fn apply(&self, x: &Mat) -> Mat;
}

impl SymOp for Mat {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &Mat) -> Mat {
        self.matmul(x)
    }
}

impl SymOp for crate::dense::BandMat {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &Mat) -> Mat {
        self.matmul(x)
    }
}

/// Dense real tensor of order `d ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(!dims.is_empty(), "tensor order must be at least 1");
        assert!(dims.iter().all(|&n| n >= 1), "all dimensions must be positive");
        let len: usize = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_data(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || data.len() != len {
            return Err(Error::dim(
                "tensor construction",
                format!("product(dims) = {len}, dims positive"),
                format!("dims {:?}, data length {}", dims, data.len()),
            ));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Tensor::zeros(dims);
        let mut idx = vec![0usize; dims.len()];
        for pos in 0..t.data.len() {
            t.data[pos] = f(&idx);
            // increment multi-index, mode 0 fastest
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < dims[k] {
                    break;
                }
                *i = 0;
            }
        }
        t
    }

    /// Order-2 tensor sharing the matrix layout (both column-major).
    pub fn from_mat(m: &Mat) -> Self {
        Tensor {
            dims: vec![m.nrows(), m.ncols()],
            data: m.data().to_vec(),
        }
    }

    /// View an order-2 tensor as a matrix.
    pub fn to_mat(&self) -> Mat {
        assert_eq!(self.order(), 2, "to_mat requires an order-2 tensor");
        Mat::from_col_major(self.dims[0], self.dims[1], self.data.clone())
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: f64) {
        let p = self.linear_index(idx);
        self.data[p] = v;
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut pos = 0usize;
        let mut stride = 1usize;
        for (i, &n) in idx.iter().zip(&self.dims) {
            debug_assert!(*i < n);
            pos += i * stride;
            stride *= n;
        }
        pos
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.dims, other.dims);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y;
        }
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.dims, other.dims);
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    fn check_mode(&self, t: usize) -> Result<()> {
        if t >= self.dims.len() {
            return Err(Error::ModeOutOfRange {
                mode: t,
                order: self.dims.len(),
            });
        }
        Ok(())
    }

    /// Mode-`t` product `Y = X ×_t A` with a dense matrix `A` of shape
    /// `m × n_t`: every mode-`t` fiber is multiplied by `A`.
    pub fn mode_product(&self, t: usize, a: &Mat) -> Result<Tensor> {
        self.check_mode(t)?;
        let nt = self.dims[t];
        if a.ncols() != nt {
            return Err(Error::dim(
                format!("mode_product along mode {t}"),
                format!("matrix with {nt} columns"),
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        let m = a.nrows();
        let n_left: usize = self.dims[..t].iter().product();
        let n_right: usize = self.dims[t + 1..].iter().product();
        let mut out_dims = self.dims.clone();
        out_dims[t] = m;
        let mut out = vec![0.0; n_left * m * n_right];
        if t == 0 {
            // whole tensor is an n_t × n_right column-major matrix
            for r in 0..n_right {
                let x = &self.data[r * nt..(r + 1) * nt];
                let y = &mut out[r * m..(r + 1) * m];
                for (k, &xk) in x.iter().enumerate() {
                    if xk == 0.0 {
                        continue;
                    }
                    let ac = a.col(k);
                    for (yi, ai) in y.iter_mut().zip(ac) {
                        *yi += xk * ai;
                    }
                }
            }
        } else {
            // slab r is a contiguous n_left × n_t column-major block
            let in_slab = n_left * nt;
            let out_slab = n_left * m;
            for r in 0..n_right {
                let x = &self.data[r * in_slab..(r + 1) * in_slab];
                let y = &mut out[r * out_slab..(r + 1) * out_slab];
                // Y = X · Aᵀ  (n_left × m)
                for k in 0..nt {
                    let xk = &x[k * n_left..(k + 1) * n_left];
                    for j in 0..m {
                        let ajk = a[(j, k)];
                        if ajk == 0.0 {
                            continue;
                        }
                        let yj = &mut y[j * n_left..(j + 1) * n_left];
                        for (yi, xi) in yj.iter_mut().zip(xk) {
                            *yi += ajk * xi;
                        }
                    }
                }
            }
        }
        Ok(Tensor {
            dims: out_dims,
            data: out,
        })
    }

    /// Mode-`t` product with an abstract operator (goes through the
    /// matricization).
    pub fn mode_product_op(&self, t: usize, a: &dyn SymOp) -> Result<Tensor> {
        self.check_mode(t)?;
        if a.dim() != self.dims[t] {
            return Err(Error::dim(
                format!("mode_product along mode {t}"),
                format!("operator of size {}", self.dims[t]),
                format!("{}", a.dim()),
            ));
        }
        let m = self.matricize(t)?;
        let y = a.apply(&m);
        tensorize(&y, t, &self.dims)
    }

    /// Mode-`t` matricization: `n_t × ∏_{j≠t} n_j` matrix whose columns are
    /// the mode-`t` fibers, ordered with the remaining modes in their natural
    /// order (lower modes fastest).
    pub fn matricize(&self, t: usize) -> Result<Mat> {
        self.check_mode(t)?;
        let nt = self.dims[t];
        let n_left: usize = self.dims[..t].iter().product();
        let n_right: usize = self.dims[t + 1..].iter().product();
        let ncols = n_left * n_right;
        let mut out = vec![0.0; nt * ncols];
        if t == 0 {
            // reinterpretation: already n_0 × (rest), same order
            out.copy_from_slice(&self.data);
        } else {
            let in_slab = n_left * nt;
            for r in 0..n_right {
                let x = &self.data[r * in_slab..(r + 1) * in_slab];
                for k in 0..nt {
                    for l in 0..n_left {
                        // column index c = l + n_left * r, row k
                        out[(l + n_left * r) * nt + k] = x[k * n_left + l];
                    }
                }
            }
        }
        Ok(Mat::from_col_major(nt, ncols, out))
    }
}

/// Inverse of [`Tensor::matricize`]: rebuild the tensor with dimensions
/// `dims` (where `dims[t]` may differ from the original if the fibers were
/// transformed) from its mode-`t` matricization.
pub fn tensorize(m: &Mat, t: usize, dims: &[usize]) -> Result<Tensor> {
    if t >= dims.len() {
        return Err(Error::ModeOutOfRange {
            mode: t,
            order: dims.len(),
        });
    }
    let mut dims = dims.to_vec();
    dims[t] = m.nrows();
    let nt = m.nrows();
    let n_left: usize = dims[..t].iter().product();
    let n_right: usize = dims[t + 1..].iter().product();
    if m.ncols() != n_left * n_right {
        return Err(Error::dim(
            format!("tensorize along mode {t}"),
            format!("{} columns", n_left * n_right),
            format!("{}", m.ncols()),
        ));
    }
    let mut data = vec![0.0; nt * n_left * n_right];
    if t == 0 {
        data.copy_from_slice(m.data());
    } else {
        let out_slab = n_left * nt;
        for r in 0..n_right {
            let y = &mut data[r * out_slab..(r + 1) * out_slab];
            for k in 0..nt {
                for l in 0..n_left {
                    y[k * n_left + l] = m[(k, l + n_left * r)];
                }
            }
        }
    }
    Tensor::from_data(&dims, data)
}

/// `Σ_t X ×_t A_t` for square operators `A_t` matching the dimensions of `X`.
pub fn kron_sum_apply(coeffs: &[&dyn SymOp], x: &Tensor) -> Result<Tensor> {
    if coeffs.len() != x.order() {
        return Err(Error::dim(
            "kron_sum_apply",
            format!("{} coefficients", x.order()),
            format!("{}", coeffs.len()),
        ));
    }
    let mut acc = Tensor::zeros(x.dims());
    for (t, a) in coeffs.iter().enumerate() {
        let term = x.mode_product_op(t, *a)?;
        acc.add_assign(&term);
    }
    Ok(acc)
}

/// Frobenius norm of `Σ_t X ×_t A_t + σ X − B`.
pub fn residual_norm_shifted(
    coeffs: &[&dyn SymOp],
    sigma: f64,
    x: &Tensor,
    b: &Tensor,
) -> Result<f64> {
    if x.dims() != b.dims() {
        return Err(Error::dim(
            "residual_norm",
            format!("{:?}", b.dims()),
            format!("{:?}", x.dims()),
        ));
    }
    let mut r = kron_sum_apply(coeffs, x)?;
    for (ri, (xi, bi)) in r.data_mut().iter_mut().zip(x.data().iter().zip(b.data())) {
        *ri += sigma * xi - bi;
    }
    Ok(r.frob_norm())
}

/// Frobenius norm of the Kronecker-sum residual `Σ_t X ×_t A_t − B`.
pub fn residual_norm(coeffs: &[&dyn SymOp], x: &Tensor, b: &Tensor) -> Result<f64> {
    residual_norm_shifted(coeffs, 0.0, x, b)
}

/// Extract the sub-tensor indexed by the Cartesian product of `ranges`.
pub fn block_view(x: &Tensor, ranges: &[std::ops::Range<usize>]) -> Result<Tensor> {
    if ranges.len() != x.order() {
        return Err(Error::dim(
            "block_view",
            format!("{} ranges", x.order()),
            format!("{}", ranges.len()),
        ));
    }
    for (t, r) in ranges.iter().enumerate() {
        if r.start >= r.end || r.end > x.dims()[t] {
            return Err(Error::dim(
                format!("block_view range for mode {t}"),
                format!("within 0..{}", x.dims()[t]),
                format!("{:?}", r),
            ));
        }
    }
    let out_dims: Vec<usize> = ranges.iter().map(|r| r.end - r.start).collect();
    let mut out = Tensor::zeros(&out_dims);
    for (block_pos, full_pos) in BlockRows::new(x.dims(), ranges) {
        let row_len = out_dims[0];
        out.data_mut()[block_pos..block_pos + row_len]
            .copy_from_slice(&x.data()[full_pos..full_pos + row_len]);
    }
    Ok(out)
}

/// Overwrite the sub-tensor of `x` indexed by `ranges` with `block`.
pub fn block_write(x: &mut Tensor, ranges: &[std::ops::Range<usize>], block: &Tensor) -> Result<()> {
    if ranges.len() != x.order() {
        return Err(Error::dim(
            "block_write",
            format!("{} ranges", x.order()),
            format!("{}", ranges.len()),
        ));
    }
    let expect: Vec<usize> = ranges.iter().map(|r| r.end - r.start).collect();
    if block.dims() != expect.as_slice() {
        return Err(Error::dim(
            "block_write",
            format!("{:?}", expect),
            format!("{:?}", block.dims()),
        ));
    }
    for (t, r) in ranges.iter().enumerate() {
        if r.start >= r.end || r.end > x.dims()[t] {
            return Err(Error::dim(
                format!("block_write range for mode {t}"),
                format!("within 0..{}", x.dims()[t]),
                format!("{:?}", r),
            ));
        }
    }
    let row_len = expect[0];
    let dims = x.dims().to_vec();
    for (block_pos, full_pos) in BlockRows::new(&dims, ranges) {
        x.data_mut()[full_pos..full_pos + row_len]
            .copy_from_slice(&block.data()[block_pos..block_pos + row_len]);
    }
    Ok(())
}

/// Iterator over the contiguous mode-0 rows of a sub-block, yielding
/// `(offset in block buffer, offset in full buffer)` pairs.
struct BlockRows {
    strides: Vec<usize>,
    starts: Vec<usize>,
    block_dims: Vec<usize>,
    idx: Vec<usize>,
    row_len: usize,
    count: usize,
    total: usize,
}

impl BlockRows {
    fn new(full_dims: &[usize], ranges: &[std::ops::Range<usize>]) -> Self {
        let d = full_dims.len();
        let mut strides = vec![1usize; d];
        for t in 1..d {
            strides[t] = strides[t - 1] * full_dims[t - 1];
        }
        let block_dims: Vec<usize> = ranges.iter().map(|r| r.end - r.start).collect();
        let total: usize = block_dims[1..].iter().product();
        BlockRows {
            strides,
            starts: ranges.iter().map(|r| r.start).collect(),
            row_len: block_dims[0],
            block_dims,
            idx: vec![0; d.saturating_sub(1)],
            count: 0,
            total,
        }
    }
}

impl Iterator for BlockRows {
    type Item = (usize, usize);
    fn next(&mut self) -> Option<(usize, usize)> {
        if self.count >= self.total {
            return None;
        }
        let mut full_pos = self.starts[0];
        for (k, &i) in self.idx.iter().enumerate() {
            full_pos += (self.starts[k + 1] + i) * self.strides[k + 1];
        }
        let block_pos = self.count * self.row_len;
        self.count += 1;
        for (k, i) in self.idx.iter_mut().enumerate() {
            *i += 1;
            if *i < self.block_dims[k + 1] {
                break;
            }
            *i = 0;
        }
        Some((block_pos, full_pos))
    }
}

/// Materialized Kronecker-sum matrix `Σ_t I ⊗ … ⊗ A_t ⊗ … ⊗ I` acting on
/// `vec(X)` with mode 0 fastest. Reference implementation for validation;
/// cost and memory are `O((∏ n_t)²)`.
pub fn kron_sum_matrix(coeffs: &[&Mat]) -> Mat {
    let dims: Vec<usize> = coeffs.iter().map(|a| a.nrows()).collect();
    let total: usize = dims.iter().product();
    let d = dims.len();
    let mut strides = vec![1usize; d];
    for t in 1..d {
        strides[t] = strides[t - 1] * dims[t - 1];
    }
    let decode = |mut p: usize| -> Vec<usize> {
        let mut idx = vec![0usize; d];
        for t in 0..d {
            idx[t] = p % dims[t];
            p /= dims[t];
        }
        idx
    };
    let mut m = Mat::zeros(total, total);
    for col in 0..total {
        let jc = decode(col);
        for (t, a) in coeffs.iter().enumerate() {
            let base = col - jc[t] * strides[t];
            for it in 0..dims[t] {
                // row index equals col with the mode-t digit replaced by it
                let row = base + it * strides[t];
                m[(row, col)] += a[(it, jc[t])];
            }
        }
    }
    m
}
