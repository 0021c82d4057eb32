//! Optimal rational (Zolotarev) shift generation on two disjoint real
//! intervals, the associated decay bound, and a priori shift-count formulas.
//!
//! The third Zolotarev problem asks for the rational function `r` of degree
//! `s` minimizing `max_E |r| / min_F |r|` over disjoint intervals
//! `E ⊂ ℝ⁺`, `F ⊂ ℝ⁻`. Its zeros and poles are the optimal ADI / rational
//! Krylov shifts. They are computed here in closed form: the interval pair is
//! mapped by a Möbius transformation onto a symmetric configuration
//! `[-â, -1] ∪ [1, â]`, where the extremal function is explicit in terms of
//! Jacobi elliptic functions, and mapped back.

use crate::error::{Error, Result};

/// A pair of disjoint real intervals `E = [a1, b1] ⊂ ℝ⁺` and
/// `F = [-b2, -a2] ⊂ ℝ⁻`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalPair {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl IntervalPair {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Self> {
        if !(a1 > 0.0 && b1 >= a1 && a2 > 0.0 && b2 >= a2)
            || !(a1.is_finite() && b1.is_finite() && a2.is_finite() && b2.is_finite())
        {
            return Err(Error::DegenerateIntervals {
                context: format!("E=[{a1},{b1}], F=[-{b2},-{a2}]"),
            });
        }
        Ok(IntervalPair { a1, b1, a2, b2 })
    }

    /// Symmetric configuration `E = [a, b]`, `F = [-b, -a]`.
    pub fn symmetric(a: f64, b: f64) -> Result<Self> {
        IntervalPair::new(a, b, a, b)
    }

    /// Cross-ratio `γ = (a1+b2)(a2+b1) / ((a1+a2)(b1+b2)) ≥ 1` measuring the
    /// separation of the two intervals.
    pub fn gamma(&self) -> f64 {
        (self.a1 + self.b2) * (self.a2 + self.b1) / ((self.a1 + self.a2) * (self.b1 + self.b2))
    }
}

/// Zeros `p_j ∈ E` and poles `q_j ∈ F` of the degree-`s` extremal rational
/// function `r_s(z) = Π_j (z - p_j)/(z - q_j)`, ordered by ascending `|p_j|`.
#[derive(Clone, Debug)]
pub struct ShiftSet {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub source: IntervalPair,
}

impl ShiftSet {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `|r_s(z)| = Π_j |z - p_j| / |z - q_j|`.
    pub fn eval_abs(&self, z: f64) -> f64 {
        let mut v = 1.0;
        for (&p, &q) in self.p.iter().zip(&self.q) {
            v *= (z - p).abs() / (z - q).abs();
        }
        v
    }
}

/// Complete elliptic integral of the first kind `K(k)` in the modulus
/// convention (`K(k) = ∫₀^{π/2} dθ / √(1 - k² sin²θ)`), evaluated by the
/// arithmetic-geometric mean: `K(k) = π / (2 AGM(1, k'))`.
pub fn elliptic_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::InvalidConfig(format!(
            "elliptic_k requires 0 <= k < 1, got {k}"
        )));
    }
    let kp = ((1.0 - k) * (1.0 + k)).sqrt();
    Ok(std::f64::consts::PI / (2.0 * agm(1.0, kp)))
}

/// `K(k)` given the complementary modulus `k' = √(1-k²)`; avoids cancellation
/// when `k` is close to 1.
pub fn elliptic_k_from_kp(kp: f64) -> Result<f64> {
    if !(kp > 0.0 && kp <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "elliptic_k_from_kp requires 0 < k' <= 1, got {kp}"
        )));
    }
    Ok(std::f64::consts::PI / (2.0 * agm(1.0, kp)))
}

fn agm(a0: f64, b0: f64) -> f64 {
    let (mut a, mut b) = (a0, b0);
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        if (a - b).abs() <= 4.0 * f64::EPSILON * an {
            return an;
        }
        a = an;
        b = bn;
    }
    0.5 * (a + b)
}

/// Jacobi elliptic function `dn(u, k)` (modulus convention), via the
/// Gauss/Landen transformation scheme of Bulirsch. Also returns `sn`, `cn`.
pub fn jacobi_sncndn(u: f64, k: f64) -> (f64, f64, f64) {
    // complementary parameter m_c = 1 - k²
    let mc = (1.0 - k) * (1.0 + k);
    sncndn_mc(u, mc)
}

/// `dn(u, k)`.
pub fn jacobi_dn(u: f64, k: f64) -> f64 {
    jacobi_sncndn(u, k).2
}

/// Bulirsch's sncndn with the complementary parameter `mc = 1 - k²` given
/// directly (important when `k` is within rounding of 1).
fn sncndn_mc(uu: f64, mc_in: f64) -> (f64, f64, f64) {
    const CA: f64 = 1.0e-8; // error is O(CA²), below double rounding
    let mut emc = mc_in;
    let mut u = uu;
    if emc == 0.0 {
        // k = 1: degenerate hyperbolic case
        let cn = 1.0 / u.cosh();
        return (u.tanh(), cn, cn);
    }
    let bo = emc < 0.0;
    let mut d = 0.0;
    if bo {
        d = 1.0 - emc;
        emc /= -1.0 / d;
        d = d.sqrt();
        u *= d;
    }
    let mut a = 1.0f64;
    let mut dn = 1.0f64;
    let mut em = [0.0f64; 16];
    let mut en = [0.0f64; 16];
    let mut l = 0usize;
    let mut c = 0.0f64;
    for i in 0..16 {
        l = i;
        em[i] = a;
        emc = emc.sqrt();
        en[i] = emc;
        c = 0.5 * (a + emc);
        if (a - emc).abs() <= CA * a {
            break;
        }
        emc *= a;
        a = c;
    }
    u *= c;
    let mut sn = u.sin();
    let mut cn = u.cos();
    if sn != 0.0 {
        a = cn / sn;
        c *= a;
        for i in (0..=l).rev() {
            let b = em[i];
            a *= c;
            c *= dn;
            dn = (en[i] + a) / (b + a);
            a = c / b;
        }
        a = 1.0 / (c * c + 1.0).sqrt();
        sn = if sn >= 0.0 { a } else { -a };
        cn = c * sn;
    }
    if bo {
        std::mem::swap(&mut dn, &mut cn);
        sn /= d;
    }
    (sn, cn, dn)
}

/// Upper bound `Z_j(E, F) ≤ 4 ρ^{-2j}` with
/// `ρ = exp(π² / (2 log(16 γ)))` on the third Zolotarev problem.
pub fn zolotarev_bound(j: usize, pair: &IntervalPair) -> f64 {
    let gamma = pair.gamma();
    let rho = (std::f64::consts::PI.powi(2) / (2.0 * (16.0 * gamma).ln())).exp();
    4.0 * rho.powi(-2 * j as i32)
}

/// Smallest `s` with `s ≥ (1/π²) log(4/ε) log(16γ)` (fADI residual target
/// `ε‖UVᵀ‖_F`), clamped to at least 1.
pub fn shift_count_adi(eps: f64, pair: &IntervalPair) -> usize {
    assert!(eps > 0.0 && eps < 1.0, "eps must be in (0,1)");
    let gamma = pair.gamma();
    let s = (4.0 / eps).ln() * (16.0 * gamma).ln() / std::f64::consts::PI.powi(2);
    (s.ceil() as usize).max(1)
}

/// Smallest `s` with
/// `s ≥ (1/π²) log(8(a1+a2+b1+b2)/(ε(a1+a2))) log(16γ)` (rational Krylov
/// residual target), clamped to at least 1.
pub fn shift_count_rk(eps: f64, pair: &IntervalPair) -> usize {
    assert!(eps > 0.0 && eps < 1.0, "eps must be in (0,1)");
    let gamma = pair.gamma();
    let num = 8.0 * (pair.a1 + pair.a2 + pair.b1 + pair.b2) / (eps * (pair.a1 + pair.a2));
    let s = num.ln() * (16.0 * gamma).ln() / std::f64::consts::PI.powi(2);
    (s.ceil() as usize).max(1)
}

/// Shift count for the d-dimensional nested regime with common spectral
/// interval `[alpha, beta]` per coefficient:
/// `s ≥ (1/π²) log(2dκ/ε) log(8(α+(d-1)β)(α+β)/(dαβ))`, `κ = β/α`.
pub fn shift_count_tensor(eps: f64, d: usize, alpha: f64, beta: f64) -> usize {
    assert!(eps > 0.0 && eps < 1.0, "eps must be in (0,1)");
    assert!(d >= 2 && alpha > 0.0 && beta >= alpha);
    let kappa = beta / alpha;
    let lhs = (2.0 * d as f64 * kappa / eps).ln();
    let rhs = (8.0 * (alpha + (d as f64 - 1.0) * beta) * (alpha + beta) / (d as f64 * alpha * beta)).ln();
    ((lhs * rhs / std::f64::consts::PI.powi(2)).ceil() as usize).max(1)
}

/// Zeros and poles of the extremal rational function for `Z_s(E, F)`.
///
/// The configuration is mapped by the Möbius transformation sending
/// `(-â, -1, 1, â)` to `(a1, b1, -b2, -a2)`, where the symmetric parameter
/// `â` is fixed by matching cross-ratios, and the symmetric-domain shifts
/// `±â·dn((2j-1)K/(2s), κ)` with `κ' = 1/â` are mapped back.
pub fn zolotarev_shifts(s: usize, pair: &IntervalPair) -> Result<ShiftSet> {
    if s == 0 {
        return Err(Error::InvalidConfig("shift count must be at least 1".into()));
    }
    let &IntervalPair { a1, b1, a2, b2 } = pair;
    IntervalPair::new(a1, b1, a2, b2)?;
    let gamma = pair.gamma();
    if gamma < 1.0 + 1e-9 {
        // At least one interval is (numerically) a point: place all zeros at
        // the geometric mean of E and all poles at minus that of F. For a
        // point E the rational function vanishes identically on E, which is
        // optimal.
        let p = (a1 * b1).sqrt();
        let q = -(a2 * b2).sqrt();
        return Ok(ShiftSet {
            p: vec![p; s],
            q: vec![q; s],
            source: *pair,
        });
    }
    // symmetric parameter: cross-ratio of (-â,-1,1,â) equals γ
    let ahat = 2.0 * gamma - 1.0 + 2.0 * (gamma * (gamma - 1.0)).sqrt();
    // elliptic modulus κ with κ' = 1/â, complementary parameter mc = 1/â²
    let mc = 1.0 / (ahat * ahat);
    let kk = elliptic_k_from_kp(1.0 / ahat)?;
    // Möbius transform sending (-â, -1, 1, â) to (a1, b1, -b2, -a2); three
    // correspondences pin it down, the fourth holds by the cross-ratio match.
    let t = MobiusMap::through(&[(-ahat, a1), (-1.0, b1), (1.0, -b2)]);
    let mut shifts: Vec<(f64, f64)> = (0..s)
        .map(|j| {
            let u = (2.0 * j as f64 + 1.0) * kk / (2.0 * s as f64);
            let (_, _, dn) = sncndn_mc(u, mc);
            let zp = -ahat * dn; // symmetric-domain zero in [-â, -1]
            let zq = ahat * dn; // symmetric-domain pole in [1, â]
            let p = t.apply(zp).clamp(a1, b1);
            let q = t.apply(zq).clamp(-b2, -a2);
            (p, q)
        })
        .collect();
    shifts.sort_by(|x, y| x.0.abs().partial_cmp(&y.0.abs()).unwrap());
    Ok(ShiftSet {
        p: shifts.iter().map(|x| x.0).collect(),
        q: shifts.iter().map(|x| x.1).collect(),
        source: *pair,
    })
}

/// Möbius transformation `z ↦ (Az + B)/(Cz + D)`.
struct MobiusMap {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl MobiusMap {
    /// The unique Möbius map through three `(z, w)` correspondences.
    fn through(pts: &[(f64, f64); 3]) -> Self {
        let det3 = |m: [[f64; 3]; 3]| -> f64 {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let [(z1, w1), (z2, w2), (z3, w3)] = *pts;
        let a = det3([[z1 * w1, w1, 1.0], [z2 * w2, w2, 1.0], [z3 * w3, w3, 1.0]]);
        let b = det3([[z1 * w1, z1, w1], [z2 * w2, z2, w2], [z3 * w3, z3, w3]]);
        let c = det3([[z1, w1, 1.0], [z2, w2, 1.0], [z3, w3, 1.0]]);
        let d = det3([[z1 * w1, z1, 1.0], [z2 * w2, z2, 1.0], [z3 * w3, z3, 1.0]]);
        MobiusMap { a, b, c, d }
    }

    fn apply(&self, z: f64) -> f64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }
}

/// Logarithmically spaced grid of `n` points on `[lo, hi]`, `0 < lo ≤ hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let ratio = hi / lo;
    (0..n)
        .map(|i| lo * ratio.powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Grid-evaluated `max_E |r_s| / min_F |r_s|` for a shift set, using
/// logarithmically spaced grids of `n` points per interval.
pub fn grid_ratio(shifts: &ShiftSet, n: usize) -> f64 {
    let pair = &shifts.source;
    let max_e = log_grid(pair.a1, pair.b1, n)
        .into_iter()
        .map(|z| shifts.eval_abs(z))
        .fold(0.0f64, f64::max);
    let min_f = log_grid(pair.a2, pair.b2, n)
        .into_iter()
        .map(|z| shifts.eval_abs(-z))
        .fold(f64::INFINITY, f64::min);
    max_e / min_f
}
