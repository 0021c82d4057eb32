//! Low-rank right-hand-side Sylvester solvers for
//! `A₁ δX + δX A₂ = U Vᵀ` with SPD coefficients: factored ADI, rational
//! Krylov projection, extended Krylov, and the inexact-solve probes used to
//! study error propagation in nested calls.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{sym_eig, EigPair, Mat};
use crate::error::{Error, Result};
use crate::hmatrix::{HMatrix, NodeFactors, SpectralInterval};
use crate::lowrank::{LowRank, Trunc};
use crate::par;
use crate::zolotarev::ShiftSet;

/// One side of a Sylvester equation: a symmetric positive definite operator
/// supporting products and shifted solves `(A + τI)⁻¹` for `τ ≥ 0`.
pub trait SylvSide: Sync {
    fn size(&self) -> usize;
    /// `A · X`.
    fn apply(&self, x: &Mat) -> Mat;
    /// Enclosure of the spectrum.
    fn interval(&self) -> SpectralInterval;
    /// Factored handle for `(A + τI)⁻¹`; the factorization is reused across
    /// all columns passed to the returned closure.
    fn solver_at(&self, tau: f64) -> Result<ShiftedSolveFn<'_>>;
}

pub type ShiftedSolveFn<'a> = Box<dyn Fn(&Mat) -> Result<Mat> + Send + Sync + 'a>;

/// Dense SPD side backed by an eigendecomposition; used for small blocks,
/// oracles and diagnostics.
pub struct DenseSide {
    a: Mat,
    eig: EigPair,
    interval: SpectralInterval,
}

impl DenseSide {
    pub fn new(a: Mat) -> Result<Self> {
        let eig = sym_eig(&a)?;
        let lo = eig.values[0];
        let hi = *eig.values.last().unwrap();
        if lo <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                block: 0..a.nrows(),
                shift: 0.0,
            });
        }
        Ok(DenseSide {
            a,
            interval: SpectralInterval::new(lo, hi),
            eig,
        })
    }

    pub fn eig(&self) -> &EigPair {
        &self.eig
    }

    pub fn matrix(&self) -> &Mat {
        &self.a
    }
}

impl SylvSide for DenseSide {
    fn size(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, x: &Mat) -> Mat {
        self.a.matmul(x)
    }

    fn interval(&self) -> SpectralInterval {
        self.interval
    }

    fn solver_at(&self, tau: f64) -> Result<ShiftedSolveFn<'_>> {
        if self.interval.alpha + tau <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                block: 0..self.size(),
                shift: tau,
            });
        }
        Ok(Box::new(move |b: &Mat| {
            let mut c = self.eig.vectors.matmul_transa(b);
            for j in 0..c.ncols() {
                for i in 0..c.nrows() {
                    c[(i, j)] /= self.eig.values[i] + tau;
                }
            }
            Ok(self.eig.vectors.matmul(&c))
        }))
    }
}

/// Hierarchical-matrix side: a diagonal block of an `HMatrix` plus a fixed
/// extra diagonal shift.
pub struct HmatSide<'a> {
    h: &'a HMatrix,
    node: usize,
    interval: SpectralInterval,
    extra: f64,
}

impl<'a> HmatSide<'a> {
    pub fn new(h: &'a HMatrix, node: usize, interval: SpectralInterval, extra: f64) -> Self {
        HmatSide {
            h,
            node,
            interval: interval.shifted(extra),
            extra,
        }
    }
}

impl SylvSide for HmatSide<'_> {
    fn size(&self) -> usize {
        self.h.node_size(self.node)
    }

    fn apply(&self, x: &Mat) -> Mat {
        let mut y = self.h.matvec_node(self.node, x);
        if self.extra != 0.0 {
            for (yi, xi) in y.data_mut().iter_mut().zip(x.data()) {
                *yi += self.extra * xi;
            }
        }
        y
    }

    fn interval(&self) -> SpectralInterval {
        self.interval
    }

    fn solver_at(&self, tau: f64) -> Result<ShiftedSolveFn<'_>> {
        let f: NodeFactors = self.h.factorize_node(self.node, self.extra + tau)?;
        let node = self.node;
        let h = self.h;
        Ok(Box::new(move |b: &Mat| Ok(h.solve_factored(&f, node, b))))
    }
}

// ---------------------------------------------------------------------------
// factored ADI
// ---------------------------------------------------------------------------

/// The `W` half of the fADI recursion on a (possibly concatenated) block of
/// right-hand-side columns; one shifted factorization per step, applied to
/// every column.
pub(crate) fn fadi_w_sequence_pub(a: &dyn SylvSide, u: &Mat, shifts: &ShiftSet) -> Result<Vec<Mat>> {
    fadi_w_sequence(a, u, shifts, None)
}

/// The `Y` half of the fADI recursion on a block of columns.
pub(crate) fn fadi_y_sequence_pub(b: &dyn SylvSide, v: &Mat, shifts: &ShiftSet) -> Result<Vec<Mat>> {
    fadi_y_sequence(b, v, shifts)
}

fn fadi_w_sequence(
    a: &dyn SylvSide,
    u: &Mat,
    shifts: &ShiftSet,
    mut inject: Option<(&mut ChaCha12Rng, f64, &mut Vec<f64>)>,
) -> Result<Vec<Mat>> {
    let s = shifts.len();
    let u_norm = u.frob_norm();
    let mut out = Vec::with_capacity(s);
    let mut w: Option<Mat> = None;
    for j in 0..s {
        // rhs of the j-th shifted system
        let mut rhs = match &w {
            None => u.clone(),
            Some(wj) => {
                let mut r = a.apply(wj);
                let p = shifts.p[j - 1];
                for (ri, wi) in r.data_mut().iter_mut().zip(wj.data()) {
                    *ri -= p * wi;
                }
                r
            }
        };
        if let Some((rng, eps, record)) = inject.as_mut() {
            if *eps > 0.0 {
                let normal = StandardNormal;
                let mut eta = Mat::from_fn(rhs.nrows(), rhs.ncols(), |_, _| normal.sample(*rng));
                let scale = *eps * u_norm / eta.frob_norm().max(1e-300);
                eta.scale(scale);
                record.push(eta.frob_norm());
                rhs.add_assign(&eta);
            } else {
                record.push(0.0);
            }
        }
        let solve = a.solver_at(-shifts.q[j]).map_err(|e| e.at_step(j + 1))?;
        let next = solve(&rhs).map_err(|e| e.at_step(j + 1))?;
        out.push(next.clone());
        w = Some(next);
    }
    Ok(out)
}

fn fadi_y_sequence(b: &dyn SylvSide, v: &Mat, shifts: &ShiftSet) -> Result<Vec<Mat>> {
    let s = shifts.len();
    let mut out = Vec::with_capacity(s);
    let mut y: Option<Mat> = None;
    for j in 0..s {
        let rhs = match &y {
            None => v.scaled(-1.0),
            Some(yj) => {
                let mut r = b.apply(yj);
                let q = shifts.q[j - 1];
                for (ri, yi) in r.data_mut().iter_mut().zip(yj.data()) {
                    *ri += q * yi;
                }
                r
            }
        };
        let solve = b.solver_at(shifts.p[j]).map_err(|e| e.at_step(j + 1))?;
        let next = solve(&rhs).map_err(|e| e.at_step(j + 1))?;
        out.push(next.clone());
        y = Some(next);
    }
    Ok(out)
}

fn fadi_assemble(
    w_seq: Vec<Mat>,
    y_seq: Vec<Mat>,
    shifts: &ShiftSet,
    rhs: &LowRank,
    trunc: Trunc,
) -> LowRank {
    let k = rhs.rank();
    let s = w_seq.len();
    let mut u_all = Mat::zeros(rhs.nrows(), s * k);
    let mut v_all = Mat::zeros(rhs.ncols(), s * k);
    for (j, (mut wj, yj)) in w_seq.into_iter().zip(y_seq).enumerate() {
        wj.scale(shifts.q[j] - shifts.p[j]);
        u_all.set_block(0, j * k, &wj);
        v_all.set_block(0, j * k, &yj);
    }
    LowRank::new(u_all, v_all).recompress_trunc(trunc)
}

/// Factored ADI for `A δX + δX B = U Vᵀ` with the given Zolotarev shifts:
/// `W₁ = (A - q₁I)⁻¹U`, `W_{j+1} = (A - q_{j+1}I)⁻¹(A - p_j I)W_j`, the `Y`
/// recursion mirrored on `B`, and `δX_s = Σ_j (q_j - p_j) W_j Y_jᵀ`. The two
/// recursions share no state and run concurrently when `parallel` is set.
/// The caller provides `rhs` with orthonormal `v`.
pub fn fadi(
    a: &dyn SylvSide,
    b: &dyn SylvSide,
    rhs: &LowRank,
    shifts: &ShiftSet,
    trunc: Trunc,
    parallel: bool,
) -> Result<LowRank> {
    if rhs.is_zero() || shifts.is_empty() {
        return Ok(LowRank::zero(a.size(), b.size()));
    }
    let (w_seq, y_seq) = par::join(
        parallel,
        || fadi_w_sequence(a, &rhs.u, shifts, None),
        || fadi_y_sequence(b, &rhs.v, shifts),
    );
    Ok(fadi_assemble(w_seq?, y_seq?, shifts, rhs, trunc))
}

/// Perturbation schedule for the inexact-fADI experiments: every solve in
/// the `W` recursion is polluted by an additive residual of Frobenius norm
/// `eps_inject · ‖U‖_F`.
#[derive(Clone, Copy, Debug)]
pub struct InexactnessProbe {
    pub eps_inject: f64,
    pub seed: u64,
}

/// Record of one inexact fADI run: the injected perturbation norms and the
/// perturbed `W̃_j` iterates, kept for checking the perturbation-propagation
/// bounds.
pub struct InexactRecord {
    pub eta_norms: Vec<f64>,
    pub w_seq: Vec<Mat>,
}

/// As [`fadi`], but the `W` recursion is run with injected perturbations
/// `η_j` (`‖η_j‖_F = eps_inject·‖U‖_F`); returns the probe record alongside
/// the solution.
pub fn fadi_inexact(
    a: &dyn SylvSide,
    b: &dyn SylvSide,
    rhs: &LowRank,
    shifts: &ShiftSet,
    probe: InexactnessProbe,
    trunc: Trunc,
) -> Result<(LowRank, InexactRecord)> {
    if rhs.is_zero() || shifts.is_empty() {
        return Ok((
            LowRank::zero(a.size(), b.size()),
            InexactRecord {
                eta_norms: vec![],
                w_seq: vec![],
            },
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(probe.seed);
    let mut record = Vec::new();
    let w_seq = fadi_w_sequence(
        a,
        &rhs.u,
        shifts,
        Some((&mut rng, probe.eps_inject, &mut record)),
    )?;
    let y_seq = fadi_y_sequence(b, &rhs.v, shifts)?;
    let solution = fadi_assemble(w_seq.clone(), y_seq, shifts, rhs, trunc);
    Ok((
        solution,
        InexactRecord {
            eta_norms: record,
            w_seq,
        },
    ))
}

/// Closed-form fADI residual norm
/// `‖r_s(A₁) U Vᵀ r_s(-A₂)⁻¹‖_F` evaluated through dense
/// eigendecompositions; a cross-validation oracle for [`fadi`].
pub fn fadi_residual_exact(a1: &Mat, a2: &Mat, rhs: &LowRank, shifts: &ShiftSet) -> Result<f64> {
    let e1 = sym_eig(a1)?;
    let e2 = sym_eig(a2)?;
    let ut = e1.vectors.matmul_transa(&rhs.u);
    let vt = e2.vectors.matmul_transa(&rhs.v);
    let mut m = ut.matmul_transb(&vt);
    let r_eval = |z: f64| -> f64 {
        shifts
            .p
            .iter()
            .zip(&shifts.q)
            .map(|(&p, &q)| (z - p) / (z - q))
            .product()
    };
    for i in 0..m.nrows() {
        let ri = r_eval(e1.values[i]);
        for j in 0..m.ncols() {
            m[(i, j)] *= ri / r_eval(-e2.values[j]);
        }
    }
    Ok(m.frob_norm())
}

// ---------------------------------------------------------------------------
// projected solvers: rational and extended Krylov
// ---------------------------------------------------------------------------

/// Deflation threshold for rank-deficient basis blocks.
const DEFLATE_TOL: f64 = 1e-12;

/// Orthogonalize the columns of `block` against `basis` (two passes) and
/// among themselves, appending the surviving directions to `basis`.
/// Columns whose residual falls below `DEFLATE_TOL` times their original
/// norm lie numerically in the span and are dropped; the basis never grows
/// past the space dimension.
fn absorb_block(basis: &mut Mat, block: &Mat) {
    if block.ncols() == 0 || basis.ncols() >= basis.nrows() {
        return;
    }
    let norms0: Vec<f64> = (0..block.ncols())
        .map(|j| crate::dense::dot(block.col(j), block.col(j)).sqrt())
        .collect();
    let mut work = block.clone();
    for _ in 0..2 {
        if basis.ncols() > 0 {
            let coef = basis.matmul_transa(&work);
            let corr = basis.matmul(&coef);
            work = work.sub(&corr);
        }
    }
    let survivors: Vec<usize> = (0..work.ncols())
        .filter(|&j| {
            let nrm = crate::dense::dot(work.col(j), work.col(j)).sqrt();
            nrm > DEFLATE_TOL * norms0[j].max(1e-300)
        })
        .collect();
    if survivors.is_empty() {
        return;
    }
    let mut kept = Mat::zeros(work.nrows(), survivors.len());
    for (jo, &j) in survivors.iter().enumerate() {
        kept.col_mut(jo).copy_from_slice(work.col(j));
    }
    let (q, _) = crate::dense::mgs_qr(&kept, DEFLATE_TOL);
    let room = basis.nrows() - basis.ncols();
    let take = q.ncols().min(room);
    if take > 0 {
        *basis = basis.hcat(&q.cols(0..take));
    }
}

/// Solve the dense Sylvester equation `H₁ Y + Y H₂ = C` with symmetric
/// `H₁, H₂` by diagonalization.
pub fn dense_sylv_2d(h1: &Mat, h2: &Mat, c: &Mat) -> Result<Mat> {
    let e1 = sym_eig(h1)?;
    let e2 = sym_eig(h2)?;
    let mut d = e1.vectors.matmul_transa(&c.matmul(&e2.vectors));
    for j in 0..d.ncols() {
        for i in 0..d.nrows() {
            let den = e1.values[i] + e2.values[j];
            if den <= 0.0 {
                return Err(Error::SingularOperator { value: den });
            }
            d[(i, j)] /= den;
        }
    }
    Ok(e1.vectors.matmul(&d.matmul_transb(&e2.vectors)))
}

/// Galerkin rational Krylov solver: bases
/// `span{U, (A₁ - q₁I)⁻¹U, …}` and `span{V, (A₂ + p₁I)⁻¹V, …}` (the same
/// SPD shifted solves fADI performs), full reorthogonalization with
/// deflation, projected equation solved by diagonalization, solution lifted
/// and recompressed.
pub fn rk_solve(
    a: &dyn SylvSide,
    b: &dyn SylvSide,
    rhs: &LowRank,
    shifts: &ShiftSet,
    trunc: Trunc,
    parallel: bool,
) -> Result<LowRank> {
    if rhs.is_zero() || shifts.is_empty() {
        return Ok(LowRank::zero(a.size(), b.size()));
    }
    let build_basis = |side: &dyn SylvSide, seed: &Mat, taus: Vec<f64>| -> Result<Mat> {
        let mut basis = Mat::zeros(side.size(), 0);
        absorb_block(&mut basis, seed);
        for (j, tau) in taus.into_iter().enumerate() {
            let solve = side.solver_at(tau).map_err(|e| e.at_step(j + 1))?;
            let block = solve(seed).map_err(|e| e.at_step(j + 1))?;
            absorb_block(&mut basis, &block);
        }
        Ok(basis)
    };
    let (q1, q2) = par::join(
        parallel,
        || build_basis(a, &rhs.u, shifts.q.iter().map(|&q| -q).collect()),
        || build_basis(b, &rhs.v, shifts.p.clone()),
    );
    let (q1, q2) = (q1?, q2?);
    let aq1 = a.apply(&q1);
    let bq2 = b.apply(&q2);
    let h1 = symmetrize(&q1.matmul_transa(&aq1));
    let h2 = symmetrize(&q2.matmul_transa(&bq2));
    let c = q1
        .matmul_transa(&rhs.u)
        .matmul_transb(&q2.matmul_transa(&rhs.v));
    let y = dense_sylv_2d(&h1, &h2, &c)?;
    Ok(LowRank::new(q1.matmul(&y), q2).recompress_trunc(trunc))
}

fn symmetrize(m: &Mat) -> Mat {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    out
}

/// Result of an extended Krylov run.
pub struct EkOutcome {
    pub solution: LowRank,
    pub converged: bool,
    pub iterations: usize,
    /// Best relative residual seen (the reported sequence is the running
    /// minimum, hence non-increasing).
    pub residual: f64,
    /// Reported (running-minimum) relative residual per iteration.
    pub history: Vec<f64>,
}

/// Extended Krylov solver: shifts alternate between 0 and ∞, so each side
/// needs one zero-shift factorization (reused across all iterations) plus
/// products. The residual is monitored every iteration in factored form;
/// the iteration stops at `tol` or `max_iter`, returning the best iterate
/// with a convergence flag.
pub fn ek_solve(
    a: &dyn SylvSide,
    b: &dyn SylvSide,
    rhs: &LowRank,
    tol: f64,
    max_iter: usize,
    trunc: Trunc,
) -> Result<EkOutcome> {
    if rhs.is_zero() {
        return Ok(EkOutcome {
            solution: LowRank::zero(a.size(), b.size()),
            converged: true,
            iterations: 0,
            residual: 0.0,
            history: vec![],
        });
    }
    let rhs_norm = rhs.frob_norm();
    let inv_a = a.solver_at(0.0)?;
    let inv_b = b.solver_at(0.0)?;
    let mut q1 = Mat::zeros(a.size(), 0);
    let mut q2 = Mat::zeros(b.size(), 0);
    absorb_block(&mut q1, &rhs.u);
    absorb_block(&mut q2, &rhs.v);
    // per-side frontier blocks for the two shift directions
    let mut plus1 = q1.clone();
    let mut minus1 = q1.clone();
    let mut plus2 = q2.clone();
    let mut minus2 = q2.clone();
    let mut best: Option<(f64, LowRank)> = None;
    let mut reported = f64::INFINITY;
    let mut history = Vec::new();
    for it in 1..=max_iter {
        // extend the left space
        {
            let old = q1.ncols();
            let grown = a.apply(&plus1);
            absorb_block(&mut q1, &grown);
            let mid = q1.ncols();
            let grown = inv_a(&minus1)?;
            absorb_block(&mut q1, &grown);
            let end = q1.ncols();
            plus1 = q1.cols(old..mid);
            minus1 = q1.cols(mid..end);
        }
        // extend the right space
        {
            let old = q2.ncols();
            let grown = b.apply(&plus2);
            absorb_block(&mut q2, &grown);
            let mid = q2.ncols();
            let grown = inv_b(&minus2)?;
            absorb_block(&mut q2, &grown);
            let end = q2.ncols();
            plus2 = q2.cols(old..mid);
            minus2 = q2.cols(mid..end);
        }
        // projected Galerkin solve
        let aq1 = a.apply(&q1);
        let bq2 = b.apply(&q2);
        let h1 = symmetrize(&q1.matmul_transa(&aq1));
        let h2 = symmetrize(&q2.matmul_transa(&bq2));
        let c = q1
            .matmul_transa(&rhs.u)
            .matmul_transb(&q2.matmul_transa(&rhs.v));
        let y = dense_sylv_2d(&h1, &h2, &c)?;
        // residual in factored form:
        // R = (A Q1 Y) Q2ᵀ + (Q1 Y)(B Q2)ᵀ − U Vᵀ
        let q1y = q1.matmul(&y);
        let aq1y = aq1.matmul(&y);
        let ru = aq1y.hcat(&q1y).hcat(&rhs.u.scaled(-1.0));
        let rv = q2.hcat(&bq2).hcat(&rhs.v);
        let res = LowRank::new(ru, rv).frob_norm() / rhs_norm;
        if best.as_ref().is_none_or(|(r, _)| res < *r) {
            best = Some((res, LowRank::new(q1y, q2.clone())));
        }
        reported = reported.min(res);
        history.push(reported);
        if reported <= tol {
            let (residual, sol) = best.unwrap();
            return Ok(EkOutcome {
                solution: sol.recompress_trunc(trunc),
                converged: true,
                iterations: it,
                residual,
                history,
            });
        }
        if q1.ncols() >= a.size() && q2.ncols() >= b.size() && it > 2 {
            break; // spaces are full; no further progress possible
        }
    }
    let (residual, sol) = best.expect("at least one EK iteration runs");
    Ok(EkOutcome {
        solution: sol.recompress_trunc(trunc),
        converged: residual <= tol,
        iterations: max_iter,
        residual,
        history,
    })
}
