//! Cluster trees and the hierarchical low-rank representation of the SPD
//! coefficients: matrix-vector products, shifted SPD solves, per-level
//! diagonal/off-diagonal splitting, and spectra estimation over the tree.
//!
//! The representation stores dense symmetric blocks at the leaves and a
//! factored low-rank block `A_{12} = U Vᵀ` per internal node (the symmetric
//! counterpart `A_{21} = V Uᵀ` is implied). Shifted solves use recursive
//! block elimination with a Woodbury correction for the off-diagonal
//! coupling; matrices built from a band keep the band and solve through a
//! banded Cholesky instead.

use std::ops::Range;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dense::{
    cholesky, chol_solve, jacobi_svd, lu_factor, lu_solve, pivoted_qr, sym_eig, tridiag_eigenvalues,
    BandChol, BandMat, Lu, Mat,
};
use crate::error::{Error, Result};
use crate::lowrank::LowRank;
use crate::tensor::SymOp;

// ---------------------------------------------------------------------------
// Cluster tree
// ---------------------------------------------------------------------------

/// Binary tree of contiguous index ranges obtained by repeated halving until
/// blocks are no larger than `n_min`.
#[derive(Clone, Debug)]
pub struct ClusterTree {
    n: usize,
    n_min: usize,
    nodes: Vec<TreeNode>,
    depth: usize,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub range: Range<usize>,
    pub children: Option<(usize, usize)>,
    pub level: usize,
}

pub const ROOT: usize = 0;

pub fn build_cluster_tree(n: usize, n_min: usize) -> ClusterTree {
    assert!(n >= 1 && n_min >= 1);
    let mut nodes = Vec::new();
    nodes.push(TreeNode {
        range: 0..n,
        children: None,
        level: 0,
    });
    let mut depth = 0;
    let mut head = 0;
    while head < nodes.len() {
        let (range, level) = (nodes[head].range.clone(), nodes[head].level);
        let len = range.end - range.start;
        if len > n_min {
            let mid = range.start + len.div_ceil(2);
            let c1 = nodes.len();
            nodes.push(TreeNode {
                range: range.start..mid,
                children: None,
                level: level + 1,
            });
            let c2 = nodes.len();
            nodes.push(TreeNode {
                range: mid..range.end,
                children: None,
                level: level + 1,
            });
            nodes[head].children = Some((c1, c2));
            depth = depth.max(level + 1);
        }
        head += 1;
    }
    ClusterTree {
        n,
        n_min,
        nodes,
        depth,
    }
}

impl ClusterTree {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_none()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.is_leaf(i)).collect()
    }

    /// Node ids of the diagonal blocks at level `h` (in index order). Leaves
    /// shallower than `h` stay themselves, matching the convention that
    /// trailing levels of an unbalanced tree use the trivial partition.
    pub fn nodes_at_level(&self, h: usize) -> Vec<usize> {
        fn rec(t: &ClusterTree, id: usize, h: usize, out: &mut Vec<usize>) {
            let node = &t.nodes[id];
            if node.level == h || node.children.is_none() {
                out.push(id);
                return;
            }
            let (c1, c2) = node.children.unwrap();
            rec(t, c1, h, out);
            rec(t, c2, h, out);
        }
        let mut out = Vec::new();
        rec(self, ROOT, h, &mut out);
        out
    }
}

// ---------------------------------------------------------------------------
// Spectral intervals
// ---------------------------------------------------------------------------

/// Interval `[alpha, beta]`, `0 < alpha ≤ beta`, enclosing a block spectrum.
#[derive(Clone, Copy, Debug)]
pub struct SpectralInterval {
    pub alpha: f64,
    pub beta: f64,
}

impl SpectralInterval {
    pub fn new(alpha: f64, beta: f64) -> Self {
        assert!(alpha > 0.0 && beta >= alpha, "invalid interval [{alpha}, {beta}]");
        SpectralInterval { alpha, beta }
    }

    pub fn shifted(&self, sigma: f64) -> SpectralInterval {
        SpectralInterval::new(self.alpha + sigma, self.beta + sigma)
    }
}

/// Per-node spectral enclosures for one hierarchical matrix.
#[derive(Clone, Debug)]
pub struct SpectraCache {
    intervals: Vec<SpectralInterval>,
}

impl SpectraCache {
    pub fn interval(&self, node: usize) -> SpectralInterval {
        self.intervals[node]
    }

    pub fn root(&self) -> SpectralInterval {
        self.intervals[ROOT]
    }
}

// ---------------------------------------------------------------------------
// HMatrix
// ---------------------------------------------------------------------------

enum HNode {
    Leaf(Mat),
    /// `A_{12} = u vᵀ`; the transposed block is implied by symmetry.
    Branch {
        u: Mat,
        v: Mat,
    },
}

/// Symmetric positive definite matrix in hierarchical low-rank form.
pub struct HMatrix {
    tree: ClusterTree,
    nodes: Vec<HNode>,
    band: Option<BandMat>,
    hss_rank: usize,
    truncation_warning: bool,
}

/// Compress a dense block to `U Vᵀ` with `σ_{r+1} ≤ tol·σ_1`, rank capped.
fn compress_block(block: &Mat, tol: f64, max_rank: usize) -> (Mat, Mat, bool) {
    let probe = max_rank.min(block.nrows()).min(block.ncols());
    let (q, s) = pivoted_qr(block, (tol * 1e-2).min(1e-15), probe + 4);
    if q.ncols() == 0 {
        return (
            Mat::zeros(block.nrows(), 0),
            Mat::zeros(block.ncols(), 0),
            false,
        );
    }
    // SVD of the slim factor: s is r0 × n, decompose sᵀ = V Σ Uᵀ
    let (vs, sig, us) = jacobi_svd(&s.transpose());
    let keep_tol = sig.iter().take_while(|&&x| x >= tol * sig[0] && x > 0.0).count();
    let keep = keep_tol.min(max_rank);
    let warn = keep_tol > max_rank;
    let mut u = q.matmul(&us.cols(0..keep));
    for j in 0..keep {
        let sj = sig[j];
        for i in 0..u.nrows() {
            u[(i, j)] *= sj;
        }
    }
    (u, vs.cols(0..keep), warn)
}

impl HMatrix {
    /// Compress a dense symmetric matrix. Off-diagonal blocks are truncated
    /// at relative tolerance `tol` and rank cap `max_rank`; when the cap
    /// prevents reaching `tol` the result carries a warning flag.
    pub fn from_dense(a: &Mat, n_min: usize, tol: f64, max_rank: usize) -> Result<HMatrix> {
        if a.nrows() != a.ncols() {
            return Err(Error::dim(
                "hmatrix_from_dense",
                "square matrix",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if !a.is_symmetric(1e-12) {
            return Err(Error::NotSymmetric {
                context: format!("hmatrix_from_dense on {}x{} input", a.nrows(), a.ncols()),
            });
        }
        let tree = build_cluster_tree(a.nrows(), n_min);
        let mut nodes = Vec::with_capacity(tree.num_nodes());
        let mut hss_rank = 0;
        let mut warn = false;
        for id in 0..tree.num_nodes() {
            let node = tree.node(id);
            match node.children {
                None => nodes.push(HNode::Leaf(a.block(node.range.clone(), node.range.clone()))),
                Some((c1, c2)) => {
                    let r1 = tree.node(c1).range.clone();
                    let r2 = tree.node(c2).range.clone();
                    let block = a.block(r1, r2);
                    let (u, v, w) = compress_block(&block, tol, max_rank);
                    hss_rank = hss_rank.max(u.ncols());
                    warn |= w;
                    nodes.push(HNode::Branch { u, v });
                }
            }
        }
        Ok(HMatrix {
            tree,
            nodes,
            band: None,
            hss_rank,
            truncation_warning: warn,
        })
    }

    /// Exact hierarchical representation of a symmetric band matrix;
    /// off-diagonal ranks are at most the bandwidth, solves go through a
    /// banded Cholesky.
    pub fn from_banded(band: &BandMat, n_min: usize) -> HMatrix {
        let tree = build_cluster_tree(band.n, n_min);
        let mut nodes = Vec::with_capacity(tree.num_nodes());
        let mut hss_rank = 0;
        for id in 0..tree.num_nodes() {
            let node = tree.node(id);
            match node.children {
                None => nodes.push(HNode::Leaf(band.sub_block(node.range.clone()).to_dense())),
                Some((c1, c2)) => {
                    let r1 = tree.node(c1).range.clone();
                    let r2 = tree.node(c2).range.clone();
                    let n1 = r1.end - r1.start;
                    let n2 = r2.end - r2.start;
                    let r = band.bw.min(n1).min(n2);
                    // the nonzeros of A12 live in its bottom-left r×r corner
                    let mut u = Mat::zeros(n1, r);
                    let mut v = Mat::zeros(n2, r);
                    for j in 0..r {
                        v[(j, j)] = 1.0;
                        for i in n1 - r..n1 {
                            u[(i, j)] = band.get(r1.start + i, r2.start + j);
                        }
                    }
                    // drop zero columns (bandwidth may exceed actual coupling)
                    let lr = LowRank::new(u, v).recompress(0.0);
                    hss_rank = hss_rank.max(lr.rank());
                    nodes.push(HNode::Branch { u: lr.u, v: lr.v });
                }
            }
        }
        HMatrix {
            tree,
            nodes,
            band: Some(band.clone()),
            hss_rank,
            truncation_warning: false,
        }
    }

    pub fn n(&self) -> usize {
        self.tree.n
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn depth(&self) -> usize {
        self.tree.depth
    }

    pub fn hss_rank(&self) -> usize {
        self.hss_rank
    }

    pub fn truncation_warning(&self) -> bool {
        self.truncation_warning
    }

    pub fn is_banded(&self) -> bool {
        self.band.is_some()
    }

    pub fn node_size(&self, node: usize) -> usize {
        let r = &self.tree.node(node).range;
        r.end - r.start
    }

    pub fn leaf_block(&self, node: usize) -> Option<&Mat> {
        match &self.nodes[node] {
            HNode::Leaf(m) => Some(m),
            _ => None,
        }
    }

    /// Off-diagonal factors `(U, V)` with `A_{12} = U Vᵀ` at a branch node.
    pub fn off_factors(&self, node: usize) -> Option<(&Mat, &Mat)> {
        match &self.nodes[node] {
            HNode::Branch { u, v } => Some((u, v)),
            _ => None,
        }
    }

    /// Dense reconstruction of the diagonal block rooted at `node`.
    pub fn densify_node(&self, node: usize) -> Mat {
        let n = self.node_size(node);
        match &self.nodes[node] {
            HNode::Leaf(m) => m.clone(),
            HNode::Branch { u, v } => {
                let (c1, c2) = self.tree.node(node).children.unwrap();
                let d1 = self.densify_node(c1);
                let d2 = self.densify_node(c2);
                let n1 = d1.nrows();
                let mut out = Mat::zeros(n, n);
                out.set_block(0, 0, &d1);
                out.set_block(n1, n1, &d2);
                let a12 = u.matmul_transb(v);
                out.set_block(0, n1, &a12);
                out.set_block(n1, 0, &a12.transpose());
                out
            }
        }
    }

    pub fn densify(&self) -> Mat {
        self.densify_node(ROOT)
    }

    /// `A_node · X` for the diagonal block rooted at `node`.
    pub fn matvec_node(&self, node: usize, x: &Mat) -> Mat {
        assert_eq!(x.nrows(), self.node_size(node), "matvec: size mismatch");
        match &self.nodes[node] {
            HNode::Leaf(m) => m.matmul(x),
            HNode::Branch { u, v } => {
                let (c1, c2) = self.tree.node(node).children.unwrap();
                let n1 = self.node_size(c1);
                let n = x.nrows();
                let x1 = x.block(0..n1, 0..x.ncols());
                let x2 = x.block(n1..n, 0..x.ncols());
                let mut y1 = self.matvec_node(c1, &x1);
                let mut y2 = self.matvec_node(c2, &x2);
                if u.ncols() > 0 {
                    y1.add_assign(&u.matmul(&v.matmul_transa(&x2)));
                    y2.add_assign(&v.matmul(&u.matmul_transa(&x1)));
                }
                let mut y = Mat::zeros(n, x.ncols());
                y.set_block(0, 0, &y1);
                y.set_block(n1, 0, &y2);
                y
            }
        }
    }

    pub fn matvec(&self, x: &Mat) -> Mat {
        self.matvec_node(ROOT, x)
    }

    /// `(U, V)` with `A − blockdiag(A₁₁, A₂₂) = U Vᵀ`, rank ≤ 2k.
    pub fn top_offdiag_factor(&self) -> Result<LowRank> {
        self.node_offdiag_factor(ROOT)
    }

    /// Symmetric completion of the off-diagonal block at `node`:
    /// `[[0, A12],[A12ᵀ, 0]] = P Qᵀ` with
    /// `P = [[u,0],[0,v]]`, `Q = [[0,u],[v,0]]`.
    pub fn node_offdiag_factor(&self, node: usize) -> Result<LowRank> {
        let (u, v) = self.off_factors(node).ok_or_else(|| Error::InvalidConfig(
            "off-diagonal factor requested on a leaf-only matrix".into(),
        ))?;
        let (c1, c2) = self.tree.node(node).children.unwrap();
        let n1 = self.node_size(c1);
        let n2 = self.node_size(c2);
        let k = u.ncols();
        let mut p = Mat::zeros(n1 + n2, 2 * k);
        let mut q = Mat::zeros(n1 + n2, 2 * k);
        p.set_block(0, 0, u);
        p.set_block(n1, k, v);
        q.set_block(n1, 0, v);
        q.set_block(0, k, u);
        Ok(LowRank::new(p, q))
    }

    /// Split at level `h`: the diagonal blocks `A^{(h)}` as stand-alone
    /// hierarchical matrices, plus the off-diagonal coupling newly uncovered
    /// at level `h` as `(node id, A12 factors)` for every branch at level
    /// `h-1`.
    pub fn level_split(&self, h: usize) -> Result<(Vec<HMatrix>, Vec<(usize, LowRank)>)> {
        if h > self.tree.depth {
            return Err(Error::InvalidConfig(format!(
                "level {h} exceeds tree depth {}",
                self.tree.depth
            )));
        }
        let diag = self
            .tree
            .nodes_at_level(h)
            .into_iter()
            .map(|id| self.sub_hmatrix(id))
            .collect();
        let mut off = Vec::new();
        if h > 0 {
            for id in self.tree.nodes_at_level(h - 1) {
                if let Some((u, v)) = self.off_factors(id) {
                    off.push((id, LowRank::new(u.clone(), v.clone())));
                }
            }
        }
        Ok((diag, off))
    }

    /// Extract the diagonal block rooted at `node` as its own HMatrix.
    pub fn sub_hmatrix(&self, node: usize) -> HMatrix {
        let offset = self.tree.node(node).range.start;
        let base_level = self.tree.node(node).level;
        let mut nodes = Vec::new();
        let mut tree_nodes = Vec::new();
        let mut map = std::collections::HashMap::new();
        let mut order = Vec::new();
        fn collect(h: &HMatrix, id: usize, order: &mut Vec<usize>) {
            order.push(id);
            if let Some((c1, c2)) = h.tree.node(id).children {
                collect(h, c1, order);
                collect(h, c2, order);
            }
        }
        collect(self, node, &mut order);
        for (new_id, &old_id) in order.iter().enumerate() {
            map.insert(old_id, new_id);
        }
        let mut depth = 0;
        for &old_id in &order {
            let t = self.tree.node(old_id);
            let level = t.level - base_level;
            depth = depth.max(level);
            tree_nodes.push(TreeNode {
                range: t.range.start - offset..t.range.end - offset,
                children: t.children.map(|(a, b)| (map[&a], map[&b])),
                level,
            });
            nodes.push(match &self.nodes[old_id] {
                HNode::Leaf(m) => HNode::Leaf(m.clone()),
                HNode::Branch { u, v } => HNode::Branch {
                    u: u.clone(),
                    v: v.clone(),
                },
            });
        }
        let n = self.node_size(node);
        HMatrix {
            tree: ClusterTree {
                n,
                n_min: self.tree.n_min,
                nodes: tree_nodes,
                depth,
            },
            nodes,
            band: self.band.as_ref().map(|b| b.sub_block(offset..offset + n)),
            hss_rank: self.hss_rank,
            truncation_warning: self.truncation_warning,
        }
    }

    // -- shifted solves -----------------------------------------------------

    /// Factorize `A_node + σI` for solves at `node` (the Woodbury scheme
    /// factorizes the whole subtree; a banded matrix only needs the one
    /// banded Cholesky).
    pub fn factorize_node(&self, node: usize, sigma: f64) -> Result<NodeFactors> {
        let mut slots = Vec::new();
        self.fill_factors(node, sigma, &mut slots, false)?;
        Ok(NodeFactors { sigma, slots })
    }

    /// Factorize every diagonal block in the subtree (spectra estimation
    /// solves at interior nodes directly).
    pub fn factorize_subtree(&self, node: usize, sigma: f64) -> Result<NodeFactors> {
        let mut slots = Vec::new();
        self.fill_factors(node, sigma, &mut slots, true)?;
        Ok(NodeFactors { sigma, slots })
    }

    fn fill_factors(
        &self,
        node: usize,
        sigma: f64,
        slots: &mut Vec<(usize, FactorSlot)>,
        deep: bool,
    ) -> Result<()> {
        let range = self.tree.node(node).range.clone();
        if let Some(band) = &self.band {
            let mut sub = band.sub_block(range.clone());
            sub.add_diag(sigma);
            let chol = sub.cholesky().map_err(|piv| Error::NotPositiveDefinite {
                block: range.start + piv..range.end,
                shift: sigma,
            })?;
            slots.push((node, FactorSlot::Band(chol)));
            if deep {
                if let Some((c1, c2)) = self.tree.node(node).children {
                    self.fill_factors(c1, sigma, slots, deep)?;
                    self.fill_factors(c2, sigma, slots, deep)?;
                }
            }
            return Ok(());
        }
        match &self.nodes[node] {
            HNode::Leaf(m) => {
                let mut shifted = m.clone();
                for i in 0..shifted.nrows() {
                    shifted[(i, i)] += sigma;
                }
                let chol = cholesky(&shifted).map_err(|piv| Error::NotPositiveDefinite {
                    block: range.start + piv..range.end,
                    shift: sigma,
                })?;
                slots.push((node, FactorSlot::LeafChol(chol)));
            }
            HNode::Branch { u, v } => {
                let (c1, c2) = self.tree.node(node).children.unwrap();
                self.fill_factors(c1, sigma, slots, deep)?;
                self.fill_factors(c2, sigma, slots, deep)?;
                let k = u.ncols();
                if k == 0 {
                    slots.push((node, FactorSlot::Branch {
                        z: Mat::zeros(0, 0),
                        core: None,
                    }));
                    return Ok(());
                }
                let n1 = self.node_size(c1);
                let n2 = self.node_size(c2);
                // X = blkdiag(u, v); Z = (D + σ)⁻¹ X; core S = I + Yᵀ Z with
                // Y = [[0, u], [v, 0]].
                let z1 = self.solve_slots(slots, c1, u);
                let z2 = self.solve_slots(slots, c2, v);
                let mut z = Mat::zeros(n1 + n2, 2 * k);
                z.set_block(0, 0, &z1);
                z.set_block(n1, k, &z2);
                let mut s = Mat::identity(2 * k);
                // Yᵀ Z = [[0, vᵀ z2], [uᵀ z1, 0]]
                let vtz2 = v.matmul_transa(&z2);
                let utz1 = u.matmul_transa(&z1);
                s.set_block(0, k, &vtz2);
                s.set_block(k, 0, &utz1);
                let lu = lu_factor(&s).map_err(|_| Error::NotPositiveDefinite {
                    block: range,
                    shift: sigma,
                })?;
                slots.push((node, FactorSlot::Branch { z, core: Some(lu) }));
            }
        }
        Ok(())
    }

    fn solve_slots(&self, slots: &[(usize, FactorSlot)], node: usize, b: &Mat) -> Mat {
        let slot = slots
            .iter()
            .find(|(id, _)| *id == node)
            .map(|(_, s)| s)
            .expect("factor slot missing");
        match slot {
            FactorSlot::Band(chol) => chol.solve(b),
            FactorSlot::LeafChol(l) => chol_solve(l, b),
            FactorSlot::Branch { z, core } => {
                let (c1, c2) = self.tree.node(node).children.unwrap();
                let n1 = self.node_size(c1);
                let n = b.nrows();
                let b1 = b.block(0..n1, 0..b.ncols());
                let b2 = b.block(n1..n, 0..b.ncols());
                let w1 = self.solve_slots(slots, c1, &b1);
                let w2 = self.solve_slots(slots, c2, &b2);
                let mut w = Mat::zeros(n, b.ncols());
                w.set_block(0, 0, &w1);
                w.set_block(n1, 0, &w2);
                if let Some(lu) = core {
                    let (u, v) = self.off_factors(node).unwrap();
                    let k = u.ncols();
                    // t = Yᵀ w = [vᵀ w2; uᵀ w1]
                    let mut t = Mat::zeros(2 * k, b.ncols());
                    t.set_block(0, 0, &v.matmul_transa(&w2));
                    t.set_block(k, 0, &u.matmul_transa(&w1));
                    let s = lu_solve(lu, &t);
                    let corr = z.matmul(&s);
                    let mut wd = w;
                    for (wi, ci) in wd.data_mut().iter_mut().zip(corr.data()) {
                        *wi -= ci;
                    }
                    return wd;
                }
                w
            }
        }
    }

    /// Solve `(A_node + σI) X = B` with a previously computed factorization.
    pub fn solve_factored(&self, f: &NodeFactors, node: usize, b: &Mat) -> Mat {
        self.solve_slots(&f.slots, node, b)
    }

    /// Solve `(A + σI) X = B`. The shifted matrix must be SPD; a Cholesky
    /// failure reports the offending block.
    pub fn shifted_solve(&self, sigma: f64, b: &Mat) -> Result<Mat> {
        let f = self.factorize_node(ROOT, sigma)?;
        Ok(self.solve_factored(&f, ROOT, b))
    }

    // -- spectra ------------------------------------------------------------

    /// Spectral enclosures for every diagonal block at every level: Lanczos
    /// extremal estimates (on the block for β, on the factored inverse for α)
    /// widened by a safety margin, intersected with a certain Gershgorin-type
    /// upper bound, then merged bottom-up so parents enclose children.
    pub fn estimate_spectra(&self, seed: u64) -> Result<SpectraCache> {
        let zero = self.factorize_subtree(ROOT, 0.0)?;
        self.estimate_spectra_with(&zero, seed)
    }

    /// As [`estimate_spectra`](Self::estimate_spectra) but reusing an
    /// existing zero-shift factorization.
    pub fn estimate_spectra_with(&self, zero: &NodeFactors, seed: u64) -> Result<SpectraCache> {
        const LANCZOS_ITERS: usize = 30;
        let nn = self.tree.num_nodes();
        let mut intervals = vec![SpectralInterval::new(1.0, 1.0); nn];
        for node in 0..nn {
            let n = self.node_size(node);
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (node as u64).wrapping_mul(0x9e37_79b9));
            let (mut alpha, mut beta);
            if n <= 64 {
                let eig = sym_eig(&self.densify_node(node))?;
                alpha = eig.values[0];
                beta = eig.values[n - 1];
            } else {
                let hi = lanczos_extreme(n, LANCZOS_ITERS, &mut rng, |x| {
                    self.matvec_node(node, x)
                })?;
                let inv_hi = lanczos_extreme(n, LANCZOS_ITERS, &mut rng, |x| {
                    self.solve_factored(zero, node, x)
                })?;
                beta = hi;
                alpha = 1.0 / inv_hi;
            }
            if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0) {
                // Gershgorin fallback
                let dense = self.densify_node(node);
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        if j != i {
                            row += dense[(i, j)].abs();
                        }
                    }
                    lo = lo.min(dense[(i, i)] - row);
                    hi = hi.max(dense[(i, i)] + row);
                }
                alpha = lo.max(1e-300);
                beta = hi;
            }
            // safety widening; cap β by a certain upper bound
            alpha *= 0.95;
            beta = (beta * 1.05).min(self.certain_upper_bound(node));
            intervals[node] = SpectralInterval::new(alpha.max(1e-300), beta.max(alpha));
        }
        // parents enclose children (eigenvalue interlacing holds exactly;
        // enforce it on the estimates)
        for node in (0..nn).rev() {
            if let Some((c1, c2)) = self.tree.node(node).children {
                let a = intervals[node]
                    .alpha
                    .min(intervals[c1].alpha)
                    .min(intervals[c2].alpha);
                let b = intervals[node]
                    .beta
                    .max(intervals[c1].beta)
                    .max(intervals[c2].beta);
                intervals[node] = SpectralInterval::new(a, b);
            }
        }
        Ok(SpectraCache { intervals })
    }

    /// Cheap upper bound on `λ_max`: Gershgorin at leaves, children plus the
    /// coupling norm bound at branches.
    fn certain_upper_bound(&self, node: usize) -> f64 {
        match &self.nodes[node] {
            HNode::Leaf(m) => {
                let n = m.nrows();
                let mut hi = f64::NEG_INFINITY;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        if j != i {
                            row += m[(i, j)].abs();
                        }
                    }
                    hi = hi.max(m[(i, i)] + row);
                }
                hi
            }
            HNode::Branch { u, v } => {
                let (c1, c2) = self.tree.node(node).children.unwrap();
                let children = self
                    .certain_upper_bound(c1)
                    .max(self.certain_upper_bound(c2));
                children + u.frob_norm() * v.frob_norm()
            }
        }
    }
}

impl SymOp for HMatrix {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply(&self, x: &Mat) -> Mat {
        self.matvec(x)
    }
}

/// Per-node factorization of `A + σI` over a subtree, stored as a compact
/// association list (banded factorizations hold one entry).
pub struct NodeFactors {
    pub sigma: f64,
    slots: Vec<(usize, FactorSlot)>,
}

enum FactorSlot {
    LeafChol(Mat),
    Band(BandChol),
    Branch { z: Mat, core: Option<Lu> },
}

/// Largest Ritz value of a symmetric operator after `iters` Lanczos steps
/// with full reorthogonalization and a random start.
fn lanczos_extreme(
    n: usize,
    iters: usize,
    rng: &mut ChaCha12Rng,
    op: impl Fn(&Mat) -> Mat,
) -> Result<f64> {
    let mut q = Mat::from_fn(n, 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let nrm = q.frob_norm();
    q.scale(1.0 / nrm);
    let mut basis: Vec<Vec<f64>> = vec![q.col(0).to_vec()];
    let mut diag: Vec<f64> = Vec::new();
    let mut off: Vec<f64> = Vec::new();
    let m = iters.min(n);
    for j in 0..m {
        let w = op(&q);
        let mut w = w.col(0).to_vec();
        let alpha = crate::dense::dot(&w, &basis[j]);
        diag.push(alpha);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for b in &basis {
                let h = crate::dense::dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= h * bi;
                }
            }
        }
        let beta = crate::dense::dot(&w, &w).sqrt();
        if j + 1 == m || beta < 1e-13 * alpha.abs().max(1.0) {
            break;
        }
        off.push(beta);
        for wi in &mut w {
            *wi /= beta;
        }
        q = Mat::from_col_major(n, 1, w.clone());
        basis.push(w);
    }
    let vals = tridiag_eigenvalues(&diag, &off[..diag.len() - 1])?;
    Ok(*vals.last().unwrap())
}
