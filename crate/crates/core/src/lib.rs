//! Local and global indicators of spatial association on graphs, with
//! permutation-test p-values obtained analytically from Khintchine-type
//! concentration bounds.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] builds graphs from edge lists and binary k-nearest-neighbour
//!   weight matrices.
//! * [`specfun`] is the numeric kernel (log-gamma, incomplete beta and gamma).
//! * [`assoc`] computes proximity rows, local gamma indices, the named LISA/GISA
//!   statistics and their randomization moments.
//! * [`inference`] turns gamma summaries into analytic p-values.
//! * [`perm`] is the Monte Carlo and exhaustive permutation reference.
//! * [`sim`] reproduces null-uniformity and power studies.

pub mod assoc;
pub mod error;
pub mod graph;
pub mod inference;
pub mod perm;
pub mod rng;
pub mod sim;
pub mod specfun;

pub use assoc::{LocalRowSummary, MomentSummary, ObservationVector, ProximityKind, Statistic};
pub use error::{Error, ExclusionReason, Result};
pub use graph::{ConnectivityClass, Graph, WeightMatrix};
pub use inference::{GlobalTestResult, LocalTestResult, Tail, ThresholdMode};
pub use perm::{PermutationMode, PermutationPlan};
