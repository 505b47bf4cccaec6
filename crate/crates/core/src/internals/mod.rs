//! Exact verification of the martingale construction for finite-support
//! 1-dependent chains.
//!
//! The partial-sum process `Σ_{k≤i} Y_k` is called `partial_sum` and the
//! truncated coordinates `(X_i/σ)1{|X_i| > cσ} − E(…)` are called
//! `trunc_part`.

pub mod chain;
pub mod checks;
pub mod trace;

pub use chain::{random_chain, FiniteChain, Q};
pub use checks::{
    check_partial_sum_martingale, check_vg8uj2, random_sweep, run_suite, stopping_time_tau, truncation_split,
    verify_identities, ChainReport, CheckResult,
};
pub use trace::{martingale_decompose, MartingaleTrace, Mutation};
