//! Exact master-equation backends.
//!
//! * Dicke: the `j = N/2` manifold, collective decay only.
//! * Perm: permutation-invariant blocks `j = N/2, N/2 − 1, …`, independent decay only.
//! * Full: the `2^N` space with per-site operators, both decay channels (N ≤ 8).
//!
//! States are stored block by block, each block column-major. Perm blocks hold
//! `d_j·ρ_j`, the multiplicity-weighted block, so the trace is the sum of block
//! traces and collective expectation values are `Σ_j Tr(d_j ρ_j A_j)`.

mod basis;
mod density;
pub mod embed;
mod evolve;
pub mod io;
mod liouvillian;
mod steady;

pub use basis::{degeneracy_exact, ln_degeneracy, Basis, BasisKind, Block};
pub use density::DensityMatrix;
pub use evolve::{evolve, StateTrajectory};
pub use liouvillian::{
    brute_force_liouvillian, build_liouvillian_collective, build_liouvillian_independent, Liouvillian,
    FULL_MAX_ATOMS,
};
pub use steady::{default_time_cap, steady_state, SteadyMethod, SteadyOptions, SteadyState};
