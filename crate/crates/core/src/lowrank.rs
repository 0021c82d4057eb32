//! Factored low-rank matrices `U·Vᵀ` with QR/SVD recompression.

use crate::dense::{jacobi_svd, mgs_qr, pivoted_qr, Mat};

/// Truncation rule for recompression: singular values below
/// `min(rel·σ₁, abs)` are dropped (the rounding floor `~4e-16·σ₁` is always
/// dropped). The absolute cut matters when the compressed matrix is much
/// larger than the quantity whose accuracy it protects, e.g. a Sylvester
/// update `δX` of norm `‖Ξ‖/α` whose residual budget is `ε‖Ξ‖`.
#[derive(Clone, Copy, Debug)]
pub struct Trunc {
    pub rel: f64,
    pub abs: f64,
}

impl Trunc {
    pub fn relative(rel: f64) -> Self {
        Trunc {
            rel,
            abs: f64::INFINITY,
        }
    }

    fn cut(&self, sigma1: f64) -> f64 {
        (self.rel * sigma1).min(self.abs).max(4e-16 * sigma1)
    }
}

/// Low-rank matrix in factored form `U Vᵀ`, `U: m×r`, `V: n×r`.
#[derive(Clone, Debug)]
pub struct LowRank {
    pub u: Mat,
    pub v: Mat,
}

impl LowRank {
    pub fn new(u: Mat, v: Mat) -> Self {
        assert_eq!(u.ncols(), v.ncols(), "factor column counts differ");
        LowRank { u, v }
    }

    /// Rank-0 matrix of the given shape.
    pub fn zero(m: usize, n: usize) -> Self {
        LowRank {
            u: Mat::zeros(m, 0),
            v: Mat::zeros(n, 0),
        }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    /// Represents `V Uᵀ`.
    pub fn transpose(&self) -> LowRank {
        LowRank {
            u: self.v.clone(),
            v: self.u.clone(),
        }
    }

    pub fn densify(&self) -> Mat {
        self.u.matmul_transb(&self.v)
    }

    /// `‖U Vᵀ‖_F` without forming the product, via
    /// `‖UVᵀ‖_F² = tr((UᵀU)(VᵀV))`.
    pub fn frob_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let gu = self.u.matmul_transa(&self.u);
        let gv = self.v.matmul_transa(&self.v);
        let r = self.rank();
        let mut tr = 0.0;
        for i in 0..r {
            for j in 0..r {
                tr += gu[(i, j)] * gv[(i, j)];
            }
        }
        tr.max(0.0).sqrt()
    }

    /// Recompress to the minimal rank reproducing `U Vᵀ` within relative
    /// Frobenius error `tol`: thin QR of the cheaper factor, the triangular
    /// part folded into the other side, a second thin QR, SVD of the small
    /// core, truncation at `σ_i ≥ tol·σ_1` (ties retained). The returned `v`
    /// has orthonormal columns; the singular values are folded into `u`.
    pub fn recompress(&self, tol: f64) -> LowRank {
        self.recompress_trunc(Trunc::relative(tol))
    }

    /// Recompression under a combined relative/absolute truncation rule.
    pub fn recompress_trunc(&self, rule: Trunc) -> LowRank {
        if self.is_zero() {
            return self.clone();
        }
        if self.nrows() <= self.ncols() {
            recompress_impl(&self.u, &self.v, rule, false)
        } else {
            recompress_impl(&self.v, &self.u, rule, true)
        }
    }

    /// Thin QR of `V`; the triangular factor is folded into `U` so the
    /// product is unchanged and `V` gains orthonormal columns.
    pub fn orthonormalize_v(&self) -> LowRank {
        if self.is_zero() {
            return self.clone();
        }
        let (qv, rv) = mgs_qr(&self.v, 0.0);
        LowRank {
            u: self.u.matmul_transb(&rv),
            v: qv,
        }
    }

    /// Factor concatenation: represents the sum of the two products.
    pub fn concat(&self, other: &LowRank) -> LowRank {
        assert_eq!(self.nrows(), other.nrows());
        assert_eq!(self.ncols(), other.ncols());
        LowRank {
            u: self.u.hcat(&other.u),
            v: self.v.hcat(&other.v),
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.u.scale(s);
    }
}

/// `small (tall-thin or short) side first`: QR of `a`, triangular part folded
/// into `b`, QR of the folded factor, SVD of the small core. With
/// `swapped == false` the pair is `(U, V)`, otherwise `(V, U)`.
fn recompress_impl(a: &Mat, b: &Mat, rule: Trunc, swapped: bool) -> LowRank {
    let (m, n) = if swapped {
        (b.nrows(), a.nrows())
    } else {
        (a.nrows(), b.nrows())
    };
    let (qa, ra) = mgs_qr(a, 0.0);
    if qa.ncols() == 0 {
        return LowRank::zero(m, n);
    }
    // a bᵀ = qa (b raᵀ)ᵀ ; w = b raᵀ has at most rank(a) columns
    let w = b.matmul_transb(&ra);
    // rank-revealing second reduction keeps the SVD core at the numerical
    // rank rather than the factor width; its cut sits two orders below the
    // final truncation threshold
    let wmax = (0..w.ncols())
        .map(|j| crate::dense::dot(w.col(j), w.col(j)).sqrt())
        .fold(0.0f64, f64::max);
    let pqr_tol = (rule.rel.min(rule.abs / wmax.max(1e-300))) * 1e-2;
    let (qw, rw) = pivoted_qr(&w, pqr_tol, w.ncols());
    if qw.ncols() == 0 {
        return LowRank::zero(m, n);
    }
    // a bᵀ = qa rwᵀ qwᵀ; SVD of the small core rwᵀ
    let (uc, sig, vc) = jacobi_svd(&rw.transpose());
    if sig.is_empty() || sig[0] == 0.0 {
        return LowRank::zero(m, n);
    }
    let cut = rule.cut(sig[0]);
    let keep = sig
        .iter()
        .take_while(|&&s| s >= cut && s > 0.0)
        .count()
        .max(1);
    if swapped {
        // a = V, b = U: U Vᵀ = qw (vc Σ)(qa uc)ᵀ
        let mut vs = vc.cols(0..keep);
        for j in 0..keep {
            let s = sig[j];
            for i in 0..vs.nrows() {
                vs[(i, j)] *= s;
            }
        }
        LowRank {
            u: qw.matmul(&vs),
            v: qa.matmul(&uc.cols(0..keep)),
        }
    } else {
        // U Vᵀ = qa (uc Σ)(qw vc)ᵀ
        let mut us = uc.cols(0..keep);
        for j in 0..keep {
            let s = sig[j];
            for i in 0..us.nrows() {
                us[(i, j)] *= s;
            }
        }
        LowRank {
            u: qa.matmul(&us),
            v: qw.matmul(&vc.cols(0..keep)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_mat(m: usize, n: usize, rng: &mut ChaCha12Rng) -> Mat {
        Mat::from_fn(m, n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn duplicate_columns_collapse_to_rank_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let u = random_mat(15, 1, &mut rng);
        let v = random_mat(12, 1, &mut rng);
        let lr = LowRank::new(u.hcat(&u), v.hcat(&v));
        let c = lr.recompress(1e-14);
        assert_eq!(c.rank(), 1);
        let err = c.densify().sub(&lr.densify()).frob_norm();
        assert!(err < 1e-12 * lr.frob_norm());
    }

    #[test]
    fn tol_zero_is_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let lr = LowRank::new(random_mat(20, 6, &mut rng), random_mat(17, 6, &mut rng));
        let c = lr.recompress(0.0);
        assert!(c.rank() <= 6);
        let err = c.densify().sub(&lr.densify()).frob_norm();
        assert!(err < 1e-13 * lr.frob_norm());
    }

    #[test]
    fn inflated_rank_recovered() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        // rank-5 product inflated to 20 columns by random mixing
        let u0 = random_mat(30, 5, &mut rng);
        let v0 = random_mat(25, 5, &mut rng);
        let mix = random_mat(5, 20, &mut rng);
        let lr = LowRank::new(u0.matmul(&mix), v0.matmul(&mix));
        let c = lr.recompress(1e-12);
        assert_eq!(c.rank(), 5, "recovered rank {}", c.rank());
        let err = c.densify().sub(&lr.densify()).frob_norm();
        assert!(err < 1e-11 * lr.frob_norm());
    }

    #[test]
    fn orthonormalize_preserves_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let lr = LowRank::new(random_mat(10, 4, &mut rng), random_mat(14, 4, &mut rng));
        let o = lr.orthonormalize_v();
        let err = o.densify().sub(&lr.densify()).frob_norm();
        assert!(err < 1e-13 * lr.frob_norm());
        let g = o.v.matmul_transa(&o.v);
        assert!(g.sub(&Mat::identity(o.rank())).max_abs() < 1e-13);
    }

    #[test]
    fn frob_norm_matches_dense() {
        let mut rng = ChaCha12Rng::seed_from_u64(25);
        let lr = LowRank::new(random_mat(9, 3, &mut rng), random_mat(11, 3, &mut rng));
        let a = lr.densify().frob_norm();
        let b = lr.frob_norm();
        assert!((a - b).abs() < 1e-12 * a);
        assert_eq!(LowRank::zero(5, 5).frob_norm(), 0.0);
    }
}
