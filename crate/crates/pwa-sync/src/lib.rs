//! Master-slave synchronization for a two-mode piecewise-affine
//! mass-spring-damper model of two robots handling one object.
//!
//! The crate builds the coupled plant, assembles the strict LMI feasibility
//! conditions that certify exponential synchronization, solves them with a
//! self-contained eigenvalue-margin solver, extracts the feedback gain
//! K = R S^-1, and verifies the result in a switching-aware closed-loop
//! simulation.
//!
//! Start from the runnable examples:
//!
//! ```bash
//! cargo run --example build_model
//! cargo run --example synthesize_gain
//! cargo run --example simulate_published_gain
//! cargo run --example verify_gain
//! cargo run --example compare_gains
//! cargo run --example feasibility_solver
//! ```
//!
//! or from the thin CLI: `pwa-sync {synthesize,simulate,verify,compare}`.

pub mod analysis;
pub mod io;
pub mod lmi;
pub mod model;
pub mod sdp;
pub mod sim;

pub use analysis::{closed_loop_eigenvalues, compare_gains, settling_metrics};
pub use lmi::{synthesize, SynthesisConfig, SynthesisResult};
pub use model::{build_coupled_system, Convention, MassSpringParams, PwaSystem};
pub use sim::{simulate, SimConfig, Trajectory};
