//! Subtractive random forests: vertex `n >= 1` attaches to `n - Z_n` for
//! i.i.d. positive steps `Z_n`, and every integer `i <= 0` is a root.
//!
//! * [`dist`]: step distributions (pmf, tail, truncated mean, sampler).
//! * [`forest`]: one realization and its statistics.
//! * [`exact`]: deterministic recursions, expectations and probability bounds.
//! * [`oracle`]: exhaustive enumeration over finite supports.
//! * [`harness`]: Monte Carlo experiments and the verification suite.
//! * [`trace`]: binary dump of one realization.

pub mod dist;
pub mod error;
pub mod exact;
pub mod forest;
pub mod harness;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod trace;

pub use dist::{make_dist, MeanInfo, StepDistribution};
pub use error::{Result, SurfError};
pub use forest::{Forest, ForestStats};
pub use rng::SurfRng;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
