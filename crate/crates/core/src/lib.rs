//! Formal local-robustness verification for small feedforward ReLU image
//! classifiers.
//!
//! The crate decides, for a classifier and an anchor image, whether any
//! perturbed input inside a parameterized set flips the predicted class.
//! Three perturbation families are supported: per-pixel noise (an
//! l-infinity ball), global brightness shifts, and contrast rescaling
//! around a fixed mean. Brightness and contrast are reduced to plain box
//! queries by prepending an affine input layer to the network, so the same
//! branch-and-bound verifier handles all three.
//!
//! Sweeps over parameter grids exploit monotonicity: a counterexample for a
//! small perturbation bound is also one for every larger bound, and
//! robustness at a large bound implies robustness below it. The sweep
//! scheduler walks the grid so that most cells are deduced from neighbours
//! instead of being verified from scratch.
//!
//! Module map:
//! - [`nn`]: network representation, evaluation, JSON serialization.
//! - [`ingest`]: grayscale image loading, downscaling, synthetic datasets.
//! - [`perturb`]: perturbation specs and their encodings into box queries.
//! - [`verifier`]: complete branch-and-bound decision procedure with exact
//!   rational leaf checks, plus an enumeration oracle for testing.
//! - [`falsify`]: cheap sampling-based counterexample search.
//! - [`sweep`]: incremental grid walk and contrast binary search.
//! - [`report`]: batch driver, CSV/JSON outputs, summaries.

pub mod falsify;
pub mod ingest;
pub mod nn;
pub mod perturb;
pub mod report;
pub mod sweep;
pub mod verifier;

pub use nn::{InputBox, Layer, Network, OutputProperty};
pub use perturb::{PerturbationSpec, VerificationQuery};
pub use verifier::{Budget, Status, Verdict};
