//! Classical desk-scale simulator of quantum-statistical-query (QSQ) learning
//! for periodic neurons of the form
//!
//! ```text
//! g_w(x) = Σ_{j=1}^{D} β_j cos(2πj · xᵀw),        ‖β‖₁ = 1,
//! ```
//!
//! together with the measurements that witness why the same task is hard for
//! classical correlational-query learners.
//!
//! The crate is organized around the pipeline a QSQ learner runs:
//!
//! - [`concepts`] — problem instances (hidden direction `w*`, harmonic weights
//!   `β*`), input distributions, the constrained-sphere packing net, and
//!   distribution-assumption audits.
//! - [`discretizer`] — the truncated, discretized target `h` that the quantum
//!   example state encodes, plus pseudoperiodicity measurement.
//! - [`qsq_oracle`] — simulated QSQ oracles for the two observable families the
//!   learner uses (Fourier sampling and shift correlation), with an exact
//!   brute-force backend, a closed-form analytic backend, and seeded bounded
//!   noise.
//! - [`period_finder`] — draw one or two Fourier samples per attempt, take
//!   continued-fraction convergents, generate candidate periods, verify them
//!   with threshold tests on shift-correlation queries, amplify, and
//!   reconstruct `ŵ`.
//! - [`beta_learner`] — gradient descent on the squared loss using closed-form
//!   trigonometric moments of the input distribution.
//! - [`hardness_bench`] — average-correlation and gradient-concentration
//!   measurements over the packing net.
//! - [`runner`] — deterministic end-to-end orchestration and report types used
//!   by the `qsq` command-line driver.
//!
//! All randomness is derived from explicit 64-bit seeds; every operation is
//! reproducible bit-for-bit given the same inputs.

pub mod beta_learner;
pub mod concepts;
pub mod discretizer;
pub mod exact;
pub mod hardness_bench;
pub mod jsonfmt;
pub(crate) mod numeric;
pub mod period_finder;
pub mod qsq_oracle;
pub mod runner;
