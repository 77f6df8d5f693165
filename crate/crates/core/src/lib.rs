//! Gaussian-optimal constants for the unified entropy-power / Brascamp–Lieb
//! inequality, and Monte Carlo machinery that replays its transport proof.
//!
//! For nonnegative `c_i`, `d_j`, a block partition `r` of `n = Σ r_i` and
//! surjective maps `A_j : ℝⁿ → ℝ^{n_j}`, the inequality reads
//!
//! ```text
//!   Σ c_i h(X_i) − Σ d_j h(A_j X)  ≤  M_g
//!   M_g = sup_{B_i ≻ 0}  ½ Σ c_i log det B_i − ½ Σ d_j log det(A_j B A_jᵀ)
//! ```
//!
//! for `X = (X_1, …, X_k)` with independent blocks. The crate is organised as
//!
//! | module | contents |
//! |--------|----------|
//! | [`datum`] | the inequality data and its validation |
//! | [`matkernels`] | log-det, PD square root, positive-diagonal QR |
//! | [`objective`] | `F(B)` and its block gradient |
//! | [`solver`] | ascent for `M_g` with unboundedness detection |
//! | [`transport`] | Brenier maps from the standard Gaussian |
//! | [`entropy`] | closed-form, plug-in and Kozachenko–Leonenko entropies |
//! | [`verifier`] | lemma / theorem checks with error bars |
//! | [`cli`] | the `blepi` command-line front end |

pub mod cli;
pub mod datum;
pub mod entropy;
pub mod error;
pub mod matkernels;
pub mod objective;
pub mod solver;
pub mod transport;
pub mod verifier;

mod serde_ext;

pub use datum::{builtin_datum, validate_datum, BLDatum, Builtin, ValidationReport};
pub use entropy::{gaussian_entropy, knn_entropy, plugin_entropy, EntropyEstimate, EntropyMethod, KnnOptions, Points};
pub use error::{Error, Result};
pub use matkernels::{logdet_pd, pd_sqrt, qr_pos_diag, QRSplit};
pub use objective::{gradient, objective, scale_invariance_defect, BlockPDMatrix, BlockSymMatrix};
pub use solver::{certify_lower_bound, solve_mg, stationarity_residual, MgResult, MgStatus, SolverOptions};
pub use transport::{gaussian_brenier, jacobian, monotone_1d_map, product_map, Distribution, StdNormalSampler, TransportMap};
pub use verifier::{lemma1_check, proof_chain_audit, theorem_check_sampled, theorem_gap_gaussian, AuditReport, LemmaReport, TheoremReport};

/// Crate version echoed into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
