//! Solver library for linear systems with Kronecker-sum structure
//! `(A_1 ⊗ I ⊗ … ⊗ I + … + I ⊗ … ⊗ I ⊗ A_d) x = b`, equivalently tensor
//! Sylvester equations `Σ_t X ×_t A_t = B`, where each symmetric positive
//! definite coefficient has hierarchically low-rank off-diagonal blocks.
//!
//! The solver is a nested divide-and-conquer scheme: the equation is split
//! along the block structure of the coefficients, the decoupled diagonal
//! sub-equations are solved recursively (dense diagonalization at the base)
//! and the coupling is restored through low-rank update equations solved by
//! factored ADI, rational Krylov or extended Krylov iterations driven by
//! optimal Zolotarev shifts.

pub mod dense;
pub mod dnc;
pub mod error;
pub mod generators;
pub mod hmatrix;
pub mod io;
pub mod lowrank;
pub mod par;
pub mod sylv;
pub mod tensor;
pub mod zolotarev;

pub use dense::{EigPair, Mat};
pub use error::{Error, Result};
pub use tensor::{block_view, block_write, kron_sum_apply, residual_norm, tensorize, Tensor};
