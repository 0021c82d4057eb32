//! Acceptance suite: end-to-end checks of the solver stack, one criterion
//! per section, run sequentially in one test so the timing-sensitive parts
//! are not polluted by concurrent tests. Each criterion prints a PASS/FAIL
//! line; the test asserts at the end so every criterion is evaluated.

use std::time::Instant;

use teq_core::dense::Mat;
use teq_core::dnc::{
    lyap2d_dnc, lyapnd_diag, lyapnd_dnc, Backend, Coeff, ShiftPolicy, SolverConfig,
    SylvesterProblem,
};
use teq_core::generators;
use teq_core::hmatrix::HMatrix;
use teq_core::lowrank::{LowRank, Trunc};
use teq_core::sylv::{fadi, fadi_inexact, fadi_residual_exact, DenseSide, InexactnessProbe, SylvSide};
use teq_core::tensor::{block_view, block_write, residual_norm, SymOp, Tensor};
use teq_core::zolotarev::{
    grid_ratio, log_grid, shift_count_adi, zolotarev_bound, zolotarev_shifts, IntervalPair,
};

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

fn cfg(eps: f64, n_min: usize) -> SolverConfig {
    SolverConfig {
        eps,
        n_min,
        n_min_inner: None,
        backend: Backend::Fadi,
        parallel: false,
        shift_policy: ShiftPolicy::APriori,
        seed: 0,
    }
}

fn coeff_band(b: &teq_core::dense::BandMat, n_min: usize, seed: u64) -> Coeff {
    Coeff::new(HMatrix::from_banded(b, n_min), seed).unwrap()
}

fn coeff_dense(a: &Mat, n_min: usize, seed: u64) -> Coeff {
    Coeff::new(HMatrix::from_dense(a, n_min, 1e-12, a.nrows() / 2 + 8).unwrap(), seed).unwrap()
}

fn problem_kappa(coeffs: &[&Coeff]) -> f64 {
    let (mut lo, mut hi) = (0.0, 0.0);
    for c in coeffs {
        let iv = c.spectra.root();
        lo += iv.alpha;
        hi += iv.beta;
    }
    hi / lo
}

fn max_depth(coeffs: &[&Coeff]) -> f64 {
    coeffs.iter().map(|c| c.h.depth()).max().unwrap() as f64
}

// -- criterion 1: oracle equivalence over seeded random instances -----------

fn c1_oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let eps = 1e-8;
    let mut worst_err = 0.0f64;
    let mut worst_res = 0.0f64;
    let mut failures = Vec::new();
    let mut run = |idx: u64, coeffs: Vec<&Coeff>, dense: Vec<&Mat>, n_min: usize| {
        let dims: Vec<usize> = coeffs.iter().map(|c| c.n()).collect();
        let b = generators::randn_tensor(&dims, 9000 + idx);
        let sol = if dims.len() == 2 {
            lyap2d_dnc(coeffs[0], coeffs[1], &b.to_mat(), &cfg(eps, n_min)).unwrap()
        } else {
            let p = SylvesterProblem::new(coeffs.clone(), b.clone()).unwrap();
            lyapnd_dnc(&p, &cfg(eps, n_min)).unwrap()
        };
        let oracle = lyapnd_diag(&dense, &b).unwrap();
        let err = sol.x.sub(&oracle).frob_norm() / oracle.frob_norm();
        let ops: Vec<&dyn SymOp> = coeffs.iter().map(|c| &c.h as &dyn SymOp).collect();
        let res = residual_norm(&ops, &sol.x, &b).unwrap();
        let ell = max_depth(&coeffs);
        let gate = (ell + 1.0).powi(2) * problem_kappa(&coeffs) * eps * b.frob_norm();
        worst_err = worst_err.max(err);
        worst_res = worst_res.max(res / gate);
        if err > 1e-5 || res > gate {
            failures.push(format!("instance {idx}: err {err:.2e}, res/gate {:.2e}", res / gate));
        }
    };
    // 30 two-dimensional instances: banded M-matrices and dense random HSS
    for i in 0..30u64 {
        let n1 = 32 + ((i * 13) % 97) as usize;
        let n2 = 32 + ((i * 29) % 97) as usize;
        if i % 2 == 0 {
            let b1 = generators::shifted_laplace(n1, 0.1 + 0.02 * i as f64).unwrap();
            let b2 = generators::laplace1d(n2);
            let c1 = coeff_band(&b1, 16, i);
            let c2 = coeff_band(&b2, 16, i + 1);
            let d1 = b1.to_dense();
            let d2 = b2.to_dense();
            run(i, vec![&c1, &c2], vec![&d1, &d2], 16);
        } else {
            let p = 1.0 + 0.05 * (i % 12) as f64;
            let band = 2 + (i % 4) as usize * 2;
            let a1 = generators::random_spd_hss(n1, p, band, 100 + i);
            let a2 = generators::random_spd_hss(n2, p, band, 200 + i);
            let c1 = coeff_dense(&a1, 16, i);
            let c2 = coeff_dense(&a2, 16, i + 1);
            run(i, vec![&c1, &c2], vec![&a1, &a2], 16);
        }
    }
    // 20 three-dimensional instances with n ≤ 16 per mode
    for i in 0..20u64 {
        let sizes = [
            8 + ((i * 3) % 9) as usize,
            8 + ((i * 5) % 9) as usize,
            8 + ((i * 7) % 9) as usize,
        ];
        let mats: Vec<Mat> = (0..3)
            .map(|t| {
                if i % 2 == 0 {
                    generators::shifted_laplace(sizes[t], 0.05).unwrap().to_dense()
                } else {
                    generators::random_spd_hss(sizes[t], 1.2, 2, 300 + 3 * i + t as u64)
                }
            })
            .collect();
        let coeffs: Vec<Coeff> = mats
            .iter()
            .enumerate()
            .map(|(t, a)| coeff_dense(a, 4, 400 + 3 * i + t as u64))
            .collect();
        run(
            1000 + i,
            coeffs.iter().collect(),
            mats.iter().collect(),
            4,
        );
    }
    let elapsed = t0.elapsed();
    check(
        "1 oracle equivalence (50 seeded instances, d=2 and d=3)",
        failures.is_empty() && elapsed.as_secs() < 120,
        format!(
            "worst error {worst_err:.2e} (≤ 1e-5), worst residual/gate {worst_res:.2e} (≤ 1), {:?}{}",
            elapsed,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

// -- criterion 2: Zolotarev machinery ----------------------------------------

fn c2_zolotarev() -> Outcome {
    let t0 = Instant::now();
    let geometries = [
        IntervalPair::symmetric(1.0, 100.0).unwrap(),
        IntervalPair::new(0.7, 80.0, 1.3, 120.0).unwrap(),
        IntervalPair::symmetric(1.0, 1e6).unwrap(),
    ];
    let mut worst_ratio = 0.0f64;
    let mut worst_prop = 0.0f64;
    let mut pass = true;
    for pair in &geometries {
        for s in 1..=12usize {
            let shifts = zolotarev_shifts(s, pair).unwrap();
            let ratio = grid_ratio(&shifts, 10_000);
            let bound = zolotarev_bound(s, pair);
            worst_ratio = worst_ratio.max(ratio / bound);
            if ratio > bound * (1.0 + 1e-8) {
                pass = false;
            }
            for z in log_grid(pair.a1, pair.b1, 10_000) {
                let v = shifts.eval_abs(z);
                worst_prop = worst_prop.max(v);
                if v > 1.0 + 1e-12 {
                    pass = false;
                }
            }
        }
    }
    let elapsed = t0.elapsed();
    check(
        "2 Zolotarev shifts: grid ratio within bound, |r| ≤ 1 on E",
        pass && elapsed.as_secs() < 10,
        format!(
            "max ratio/bound {worst_ratio:.6}, max |r| on E {worst_prop:.12}, {:?}",
            elapsed
        ),
    )
}

// -- criterion 3: fADI correctness -------------------------------------------

fn c3_fadi() -> Outcome {
    let t0 = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    // closed-form residual agreement on n=64 dense instances
    for (seed, mat) in [
        (1u64, generators::laplace1d(64).to_dense()),
        (2, generators::random_spd_hss(64, 1.2, 4, 7)),
    ] {
        let s1 = DenseSide::new(mat.clone()).unwrap();
        let s2 = DenseSide::new(mat.clone()).unwrap();
        let iv = s1.interval();
        let pair = IntervalPair::new(iv.alpha, iv.beta, iv.alpha, iv.beta).unwrap();
        let rhs = LowRank::new(
            generators::randn_mat(64, 2, seed),
            generators::randn_mat(64, 2, seed + 10),
        )
        .orthonormalize_v();
        for s in [2usize, 4] {
            let shifts = zolotarev_shifts(s, &pair).unwrap();
            let x = fadi(&s1, &s2, &rhs, &shifts, Trunc::relative(1e-14), false).unwrap();
            let xd = x.densify();
            let mut r = mat.matmul(&xd);
            r.add_assign(&xd.matmul(&mat));
            let meas = r.sub(&rhs.densify()).frob_norm();
            let exact = fadi_residual_exact(&mat, &mat, &rhs, &shifts).unwrap();
            let agree = (meas - exact).abs() / exact;
            if agree > 1e-10 {
                pass = false;
            }
            details.push(format!("s={s}: agreement {agree:.1e}"));
        }
    }
    // n=256 2D Laplacian with the a priori count at 1e-8, true spectrum
    {
        let n = 256;
        let mat = generators::laplace1d(n).to_dense();
        let ev = generators::laplace_eigenvalues(n);
        let pair = IntervalPair::symmetric(ev[n - 1], ev[0]).unwrap();
        let s = shift_count_adi(1e-8, &pair);
        let shifts = zolotarev_shifts(s, &pair).unwrap();
        let s1 = DenseSide::new(mat.clone()).unwrap();
        let s2 = DenseSide::new(mat.clone()).unwrap();
        let rhs = LowRank::new(
            generators::randn_mat(n, 3, 77),
            generators::randn_mat(n, 3, 78),
        )
        .orthonormalize_v();
        let x = fadi(&s1, &s2, &rhs, &shifts, Trunc::relative(1e-12), false).unwrap();
        let xd = x.densify();
        let mut r = mat.matmul(&xd);
        r.add_assign(&xd.matmul(&mat));
        let res = r.sub(&rhs.densify()).frob_norm() / rhs.frob_norm();
        if res > 1e-8 {
            pass = false;
        }
        details.push(format!("laplace256 s={s}: rel residual {res:.2e} (≤ 1e-8)"));
    }
    let elapsed = t0.elapsed();
    check(
        "3 fADI: closed-form residual match and a priori count",
        pass && elapsed.as_secs() < 30,
        format!("{}; {:?}", details.join(", "), elapsed),
    )
}

// -- criterion 4: inexact fADI ------------------------------------------------

fn c4_inexact_fadi() -> Outcome {
    let t0 = Instant::now();
    let n = 64;
    let mat = generators::laplace1d(n).to_dense();
    let s1 = DenseSide::new(mat.clone()).unwrap();
    let s2 = DenseSide::new(mat.clone()).unwrap();
    let eig = teq_core::dense::sym_eig(&mat).unwrap();
    let iv = s1.interval();
    let pair = IntervalPair::new(iv.alpha, iv.beta, iv.alpha, iv.beta).unwrap();
    let rhs = LowRank::new(
        generators::randn_mat(n, 2, 5),
        generators::randn_mat(n, 2, 6),
    )
    .orthonormalize_v();
    let u_norm = rhs.u.frob_norm();
    let mut pass = true;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_m = 0.0f64;
    for &eps_inject in &[1e-4f64, 1e-6] {
        for &s in &[4usize, 8] {
            let shifts = zolotarev_shifts(s, &pair).unwrap();
            let exact = fadi(&s1, &s2, &rhs, &shifts, Trunc::relative(1e-14), false).unwrap();
            let res_of = |x: &LowRank| {
                let xd = x.densify();
                let mut r = mat.matmul(&xd);
                r.add_assign(&xd.matmul(&mat));
                r.sub(&rhs.densify()).frob_norm()
            };
            let res_exact = res_of(&exact);
            let (xi, record) = fadi_inexact(
                &s1,
                &s2,
                &rhs,
                &shifts,
                InexactnessProbe {
                    eps_inject,
                    seed: 1234 + s as u64,
                },
                Trunc::relative(1e-14),
            )
            .unwrap();
            let res_inexact = res_of(&xi);
            // ‖V‖₂ = 1 after orthonormalization
            let bound = res_exact + 2.0 * s as f64 * eps_inject * u_norm;
            worst_gap = worst_gap.max(res_inexact - bound);
            if res_inexact > bound {
                pass = false;
            }
            // per-step propagation: ‖(A - p_j I) W̃_j − r_j(A) U‖ ≤ j ε ‖U‖
            for (jm1, wj) in record.w_seq.iter().enumerate() {
                let j = jm1 + 1;
                let mut lhs = mat.matmul(wj);
                for (li, wi) in lhs.data_mut().iter_mut().zip(wj.data()) {
                    *li -= shifts.p[jm1] * wi;
                }
                // r_j(A) U through the eigendecomposition
                let mut c = eig.vectors.matmul_transa(&rhs.u);
                for col in 0..c.ncols() {
                    for row in 0..c.nrows() {
                        let lam = eig.values[row];
                        let rj: f64 = shifts.p[..j]
                            .iter()
                            .zip(&shifts.q[..j])
                            .map(|(&p, &q)| (lam - p) / (lam - q))
                            .product();
                        c[(row, col)] *= rj;
                    }
                }
                let rju = eig.vectors.matmul(&c);
                let m_norm = lhs.sub(&rju).frob_norm();
                let m_bound = j as f64 * eps_inject * u_norm;
                worst_m = worst_m.max(m_norm / m_bound.max(1e-300));
                if m_norm > m_bound * (1.0 + 1e-6) {
                    pass = false;
                }
            }
        }
    }
    let elapsed = t0.elapsed();
    check(
        "4 inexact fADI: residual and per-step perturbation bounds",
        pass && elapsed.as_secs() < 30,
        format!(
            "max (residual − bound) {worst_gap:.2e}, max ‖M_j‖/bound {worst_m:.3}, {:?}",
            elapsed
        ),
    )
}

// -- criterion 5: residual versus conditioning sweep --------------------------

fn c5_kappa_sweep() -> Outcome {
    let t0 = Instant::now();
    let n = 256;
    let n_min = 32;
    let eps = 1e-6;
    let runs = 20;
    let points = 6;
    let mut pass = true;
    let mut detail = Vec::new();
    // general SPD family: worst-case right-hand side, κ = κ(D)^p
    let mut kappas = Vec::new();
    let mut max_res = Vec::new();
    let ev = generators::laplace_eigenvalues(n);
    let kappa_d = ev[0] / ev[n - 1];
    for pt in 0..points {
        let p = 1.0 + 1.15 * pt as f64 / (points - 1) as f64;
        let kappa = kappa_d.powf(p);
        let mut worst = 0.0f64;
        for run in 0..runs {
            let seed = (7000 + pt * runs + run) as u64;
            let (a, q) = generators::random_spd_hss_with_q(n, p, 8, seed);
            let c_rhs = generators::worst_case_rhs(&q);
            let coeff = coeff_dense(&a, n_min, seed);
            let sol = lyap2d_dnc(&coeff, &coeff, &c_rhs, &cfg(eps, n_min)).unwrap();
            let bt = Tensor::from_mat(&c_rhs);
            let res = residual_norm(&[&coeff.h as &dyn SymOp, &coeff.h], &sol.x, &bt).unwrap()
                / bt.frob_norm();
            let ell = coeff.h.depth() as f64;
            let envelope = (ell + 1.0).powi(2) * problem_kappa(&[&coeff, &coeff]) * eps;
            if res > envelope {
                pass = false;
                detail.push(format!("general κ={kappa:.1e}: res {res:.1e} > envelope"));
            }
            worst = worst.max(res);
        }
        kappas.push(kappa);
        max_res.push(worst);
    }
    // log-log upper-envelope fit
    let xs: Vec<f64> = kappas.iter().map(|k| k.log10()).collect();
    let ys: Vec<f64> = max_res.iter().map(|r| r.log10()).collect();
    let nn = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    if slope > 0.6 {
        pass = false;
    }
    detail.push(format!("general-SPD envelope slope {slope:.3} (≤ 0.6)"));
    // M-matrix family: residuals flat and ≤ 1e-5 everywhere
    let mut m_worst = 0.0f64;
    for pt in 0..points {
        let kappa = 1e4 * (1e9f64 / 1e4).powf(pt as f64 / (points - 1) as f64);
        let shift = generators::laplace_shift_for_kappa(n, kappa);
        let band = generators::shifted_laplace(n, shift).unwrap();
        let q = generators::laplace_eigenvectors_ascending(n);
        let c_rhs = generators::worst_case_rhs(&q);
        for run in 0..runs {
            let seed = (8000 + pt * runs + run) as u64;
            let coeff = coeff_band(&band, n_min, seed);
            let sol = lyap2d_dnc(&coeff, &coeff, &c_rhs, &cfg(eps, n_min)).unwrap();
            let bt = Tensor::from_mat(&c_rhs);
            let res = residual_norm(&[&coeff.h as &dyn SymOp, &coeff.h], &sol.x, &bt).unwrap()
                / bt.frob_norm();
            m_worst = m_worst.max(res);
            if res > 1e-5 {
                pass = false;
                detail.push(format!("M-matrix κ={kappa:.1e}: res {res:.1e} > 1e-5"));
            }
        }
    }
    detail.push(format!("M-matrix max residual {m_worst:.2e} (≤ 1e-5)"));
    let elapsed = t0.elapsed();
    check(
        "5 residual-vs-κ sweep (general SPD √κ envelope, flat M-matrix)",
        pass && elapsed.as_secs() < 600,
        format!("{}; {:?}", detail.join("; "), elapsed),
    )
}

// -- criterion 6: residual magnitude at tight target --------------------------

fn c6_tight_target() -> Outcome {
    let t0 = Instant::now();
    let n = 1024;
    let band = generators::laplace1d(n);
    let c1 = coeff_band(&band, 256, 1);
    let c2 = coeff_band(&band, 256, 2);
    let x_ref = generators::randn_mat(n, n, 42);
    let mut b = band.to_dense().matmul(&x_ref);
    b.add_assign(&x_ref.matmul(&band.to_dense()));
    let sol = lyap2d_dnc(&c1, &c2, &b, &cfg(1e-10, 256)).unwrap();
    let bt = Tensor::from_mat(&b);
    let res = residual_norm(&[&c1.h as &dyn SymOp, &c2.h], &sol.x, &bt).unwrap() / bt.frob_norm();
    let elapsed = t0.elapsed();
    check(
        "6 2D Laplace n=1024, n_min=256, target 1e-10",
        res <= 1e-9 && elapsed.as_secs() < 120,
        format!("relative residual {res:.2e} (≤ 1e-9), {:?}", elapsed),
    )
}

// -- criterion 7: 3D solves ----------------------------------------------------

fn c7_3d() -> Outcome {
    let t0 = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [64usize, 128] {
        let band = generators::laplace1d(n);
        let c1 = coeff_band(&band, 16, 1);
        let c2 = coeff_band(&band, 16, 2);
        let c3 = coeff_band(&band, 16, 3);
        let b = generators::randn_tensor(&[n, n, n], 64 + n as u64);
        let p = SylvesterProblem::new(vec![&c1, &c2, &c3], b.clone()).unwrap();
        let sol = lyapnd_dnc(&p, &cfg(1e-6, 16)).unwrap();
        let res =
            residual_norm(&[&c1.h as &dyn SymOp, &c2.h, &c3.h], &sol.x, &b).unwrap()
                / b.frob_norm();
        if res > 1e-6 {
            pass = false;
        }
        detail.push(format!("n={n}: residual {res:.2e}"));
    }
    let elapsed = t0.elapsed();
    check(
        "7 3D Laplace n=64,128 at eps=1e-6",
        pass && elapsed.as_secs() < 300,
        format!("{} (≤ 1e-6); {:?}", detail.join(", "), elapsed),
    )
}

// -- criterion 8: complexity scaling -------------------------------------------

fn run_2d_once(n: usize) -> f64 {
    let band = generators::laplace1d(n);
    let c1 = coeff_band(&band, 64, 1);
    let c2 = coeff_band(&band, 64, 2);
    let b = generators::randn_mat(n, n, n as u64);
    let t0 = Instant::now();
    let _ = lyap2d_dnc(&c1, &c2, &b, &cfg(1e-6, 64)).unwrap();
    t0.elapsed().as_secs_f64()
}

fn run_3d_once(n: usize) -> f64 {
    // n_min = 4 keeps at least three recursion levels at every tested size,
    // so all three sit in the asymptotic regime
    let band = generators::laplace1d(n);
    let c1 = coeff_band(&band, 4, 1);
    let c2 = coeff_band(&band, 4, 2);
    let c3 = coeff_band(&band, 4, 3);
    let b = generators::randn_tensor(&[n, n, n], n as u64);
    let p = SylvesterProblem::new(vec![&c1, &c2, &c3], b.clone()).unwrap();
    let t0 = Instant::now();
    let _ = lyapnd_dnc(&p, &cfg(1e-6, 4)).unwrap();
    t0.elapsed().as_secs_f64()
}

fn c8_scaling() -> Outcome {
    let t0 = Instant::now();
    // interleaved rounds so each size's best sample sees comparable machine
    // conditions; ratios of minima are robust against load drift
    let (mut t512, mut t1024, mut t2048) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..3 {
        t512 = t512.min(run_2d_once(512));
        t1024 = t1024.min(run_2d_once(1024));
        t2048 = t2048.min(run_2d_once(2048));
    }
    let r2a = t1024 / t512;
    let r2b = t2048 / t1024;
    let (mut u32t, mut u64t, mut u128t) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for round in 0..6 {
        u32t = u32t.min(run_3d_once(32));
        u64t = u64t.min(run_3d_once(64));
        if round < 2 {
            u128t = u128t.min(run_3d_once(128));
        }
    }
    let r3a = u64t / u32t;
    let r3b = u128t / u64t;
    let pass = r2a <= 5.0 && r2b <= 5.0 && r3a <= 10.0 && r3b <= 10.0;
    let elapsed = t0.elapsed();
    check(
        "8 scaling: quasi-quadratic 2D, quasi-cubic 3D (single thread)",
        pass,
        format!(
            "2D {t512:.2}s/{t1024:.2}s/{t2048:.2}s ratios {r2a:.2},{r2b:.2} (≤ 5); \
             3D {u32t:.2}s/{u64t:.2}s/{u128t:.2}s ratios {r3a:.2},{r3b:.2} (≤ 10); {:?}",
            elapsed
        ),
    )
}

// -- criterion 9: decoupling exactness ------------------------------------------

fn c9_decoupling() -> Outcome {
    let t0 = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    // d = 2
    {
        let n = 32;
        let half = n / 2;
        let a_half = generators::random_spd_hss(half, 1.1, 3, 3);
        let mut a = Mat::zeros(n, n);
        a.set_block(0, 0, &a_half);
        a.set_block(half, half, &a_half);
        let c = coeff_dense(&a, half, 1);
        let ch = coeff_dense(&a_half, half, 1);
        let b = generators::randn_mat(n, n, 9);
        let sol = lyap2d_dnc(&c, &c, &b, &cfg(1e-8, half)).unwrap();
        let mut composed = Tensor::zeros(&[n, n]);
        for ri in [0..half, half..n] {
            for rj in [0..half, half..n] {
                let sub_b = b.block(ri.clone(), rj.clone());
                let sub = lyap2d_dnc(&ch, &ch, &sub_b, &cfg(1e-8, half)).unwrap();
                block_write(&mut composed, &[ri.clone(), rj.clone()], &sub.x).unwrap();
            }
        }
        let ok = sol.x.data() == composed.data();
        pass &= ok;
        detail.push(format!("d=2 bit-identical: {ok}"));
    }
    // d = 3
    {
        let n = 16;
        let half = n / 2;
        let a_half = generators::random_spd_hss(half, 1.1, 2, 5);
        let mut a = Mat::zeros(n, n);
        a.set_block(0, 0, &a_half);
        a.set_block(half, half, &a_half);
        let c = coeff_dense(&a, half, 2);
        let ch = coeff_dense(&a_half, half, 2);
        let b = generators::randn_tensor(&[n, n, n], 11);
        let p = SylvesterProblem::new(vec![&c, &c, &c], b.clone()).unwrap();
        let sol = lyapnd_dnc(&p, &cfg(1e-8, half)).unwrap();
        let mut composed = Tensor::zeros(&[n, n, n]);
        for r1 in [0..half, half..n] {
            for r2 in [0..half, half..n] {
                for r3 in [0..half, half..n] {
                    let ranges = [r1.clone(), r2.clone(), r3.clone()];
                    let sub_b = block_view(&b, &ranges).unwrap();
                    let sp = SylvesterProblem::new(vec![&ch, &ch, &ch], sub_b).unwrap();
                    let sub = lyapnd_dnc(&sp, &cfg(1e-8, half)).unwrap();
                    block_write(&mut composed, &ranges, &sub.x).unwrap();
                }
            }
        }
        let ok = sol.x.data() == composed.data();
        pass &= ok;
        detail.push(format!("d=3 bit-identical: {ok}"));
    }
    let elapsed = t0.elapsed();
    check(
        "9 decoupling exactness (block-diagonal coefficients)",
        pass && elapsed.as_secs() < 10,
        format!("{}; {:?}", detail.join(", "), elapsed),
    )
}

#[test]
fn acceptance_criteria() {
    let results = vec![
        c1_oracle_equivalence(),
        c2_zolotarev(),
        c3_fadi(),
        c4_inexact_fadi(),
        c5_kappa_sweep(),
        c6_tight_target(),
        c7_3d(),
        c8_scaling(),
        c9_decoupling(),
    ];
    let mut all_pass = true;
    for r in &results {
        println!(
            "[{}] criterion {}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        all_pass &= r.pass;
    }
    assert!(all_pass, "one or more acceptance criteria failed (see lines above)");
}
