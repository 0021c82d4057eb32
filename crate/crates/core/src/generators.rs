//! Test-problem generators: 1D Laplacian stencils, the Grünwald-Letnikov
//! fractional Laplacian, seeded random SPD matrices with bounded
//! hierarchical rank, and the worst-case right-hand sides used in the
//! residual-versus-conditioning experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{cholesky, mgs_qr, BandMat, Mat};
use crate::error::{Error, Result};

/// Tridiagonal `(2, -1)` finite-difference 1D Laplacian in band form.
pub fn laplace1d(n: usize) -> BandMat {
    assert!(n >= 1);
    let mut b = BandMat::zeros(n, if n > 1 { 1 } else { 0 });
    for i in 0..n {
        b.set(i, i, 2.0);
        if i + 1 < n {
            b.set(i + 1, i, -1.0);
        }
    }
    b
}

/// 1D Laplacian shifted by `shift` (must keep the matrix SPD).
pub fn shifted_laplace(n: usize, shift: f64) -> Result<BandMat> {
    let mut b = laplace1d(n);
    b.add_diag(shift);
    if shift <= -laplace_eigenvalues(n)[n - 1] {
        return Err(Error::InvalidConfig(format!(
            "shift {shift} makes the shifted Laplacian indefinite"
        )));
    }
    Ok(b)
}

/// Eigenvalues `2 + 2cos(πj/(n+1))`, `j = 1..n` (decreasing in `j`).
pub fn laplace_eigenvalues(n: usize) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    (1..=n)
        .map(|j| 2.0 + 2.0 * (pi * j as f64 / (n as f64 + 1.0)).cos())
        .collect()
}

/// Orthonormal eigenvectors of the 1D Laplacian paired with
/// [`laplace_eigenvalues`]: the eigenvalue `2 + 2cos(πj/(n+1))` belongs to
/// the sine vector with frequency `n+1-j`.
pub fn laplace_eigenvectors(n: usize) -> Mat {
    let pi = std::f64::consts::PI;
    let scale = (2.0 / (n as f64 + 1.0)).sqrt();
    Mat::from_fn(n, n, |i, j| {
        scale * ((i as f64 + 1.0) * (n - j) as f64 * pi / (n as f64 + 1.0)).sin()
    })
}

/// The same eigenvector matrix in its natural frequency order (column `j`
/// has frequency `j+1`, eigenvalues increasing along the diagonal).
pub fn laplace_eigenvectors_ascending(n: usize) -> Mat {
    let pi = std::f64::consts::PI;
    let scale = (2.0 / (n as f64 + 1.0)).sqrt();
    Mat::from_fn(n, n, |i, j| {
        scale * ((i as f64 + 1.0) * (j as f64 + 1.0) * pi / (n as f64 + 1.0)).sin()
    })
}

/// Shift that brings the 1D Laplacian's condition number to `kappa`.
pub fn laplace_shift_for_kappa(n: usize, kappa: f64) -> f64 {
    let ev = laplace_eigenvalues(n);
    let (lam_min, lam_max) = (ev[n - 1], ev[0]);
    (lam_max - kappa * lam_min) / (kappa - 1.0)
}

/// Grünwald-Letnikov weights `g_0 = 1`, `g_k = g_{k-1}·(k-1-order)/k`.
pub fn gl_weights(n: usize, order: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(n);
    g.push(1.0);
    for k in 1..n {
        let prev = g[k - 1];
        g.push(prev * (k as f64 - 1.0 - order) / k as f64);
    }
    g
}

/// Symmetric Riesz / Grünwald-Letnikov discretization of the 1D fractional
/// Laplacian of the given order in `(1, 2)`:
/// `A = -(T + Tᵀ)/2` with `T` the Toeplitz matrix whose first column is
/// `(g_1, g_2, …)` and first row `(g_1, g_0, 0, …)`. Positive definiteness
/// is verified by a Cholesky probe; the weights are used unscaled so the
/// spectrum stays `O(1)` across sizes.
pub fn fractional_gl(n: usize, order: f64) -> Result<Mat> {
    if !(1.0 < order && order < 2.0) {
        return Err(Error::InvalidConfig(format!(
            "fractional order must be in (1, 2), got {order}"
        )));
    }
    let g = gl_weights(n + 1, order);
    // T[i][j] = g[i - j + 1] for i + 1 >= j, incl. one superdiagonal g_0
    let a = Mat::from_fn(n, n, |i, j| {
        let t_ij = if i + 1 >= j { g[i + 1 - j] } else { 0.0 };
        let t_ji = if j + 1 >= i { g[j + 1 - i] } else { 0.0 };
        -0.5 * (t_ij + t_ji)
    });
    if cholesky(&a).is_err() {
        return Err(Error::InvalidConfig(format!(
            "fractional GL matrix of size {n}, order {order} failed the SPD probe"
        )));
    }
    Ok(a)
}

/// Random orthogonal matrix with lower bandwidth `band`: the Q factor of a
/// seeded random matrix that is upper triangular plus `band` subdiagonals.
/// Gram-Schmidt preserves the lower profile, so `Q D Qᵀ` has hierarchical
/// rank bounded by `band`.
pub fn banded_orthogonal(n: usize, band: usize, seed: u64) -> Mat {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut m = Mat::zeros(n, n);
    // column-major fill for reproducibility independent of layout tricks
    for j in 0..n {
        for i in 0..n {
            let x: f64 = normal.sample(&mut rng);
            if i <= j + band {
                m[(i, j)] = x;
            }
        }
    }
    let (q, _) = mgs_qr(&m, 1e-12);
    assert_eq!(q.ncols(), n, "random banded matrix was rank deficient");
    q
}

/// `A = Q Dᵖ Qᵀ` with `D` the 1D Laplacian eigenvalues and `Q` a seeded
/// banded orthogonal factor; the condition number is `κ(D)ᵖ` and the
/// hierarchical rank is bounded by `band`. Returns `(A, Q)`.
pub fn random_spd_hss_with_q(n: usize, power: f64, band: usize, seed: u64) -> (Mat, Mat) {
    let q = banded_orthogonal(n, band, seed);
    let d = laplace_eigenvalues(n);
    // A = Q D^p Qᵀ, symmetrized against rounding
    let mut qd = q.clone();
    for j in 0..n {
        let s = d[j].powf(power);
        for i in 0..n {
            qd[(i, j)] *= s;
        }
    }
    let a0 = qd.matmul_transb(&q);
    let mut a = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = 0.5 * (a0[(i, j)] + a0[(j, i)]);
        }
    }
    (a, q)
}

pub fn random_spd_hss(n: usize, power: f64, band: usize, seed: u64) -> Mat {
    random_spd_hss_with_q(n, power, band, seed).0
}

/// Right-hand side `C = Q S Qᵀ` with `S_ii = (i/(n-1))^10`, weighting the
/// components aligned with the smallest eigenvectors of the operator (the
/// eigenvalues paired with `Q` decrease along the diagonal).
pub fn worst_case_rhs(q: &Mat) -> Mat {
    let n = q.nrows();
    let mut qs = q.clone();
    for j in 0..n {
        let s = if n == 1 {
            1.0
        } else {
            (j as f64 / (n as f64 - 1.0)).powi(10)
        };
        for i in 0..n {
            qs[(i, j)] *= s;
        }
    }
    qs.matmul_transb(q)
}

/// Seeded dense Gaussian matrix.
pub fn randn_mat(m: usize, n: usize, seed: u64) -> Mat {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    Mat::from_fn(m, n, |_, _| normal.sample(&mut rng))
}

/// Seeded dense Gaussian tensor.
pub fn randn_tensor(dims: &[usize], seed: u64) -> crate::tensor::Tensor {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    crate::tensor::Tensor::from_fn(dims, |_| normal.sample(&mut rng))
}
