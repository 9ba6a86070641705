//! Semi-device-independent certification of pure bipartite entangled states
//! through quantum steering.
//!
//! The crate is organised bottom-up:
//!
//! * [`qmath`]: dense complex linear algebra (tensor products, partial
//!   traces, Schmidt decomposition, trace norm, purification).
//! * [`assemblage`]: measurement sets, assemblages and the ideal
//!   certifying assemblage structure.
//! * [`tsi`]: the tilted steering inequality with its local and quantum
//!   bounds, each paired with an independent numerical check.
//! * [`certify`]: the subspace certification protocol and the
//!   Fourier-based SWAP isometry.
//! * [`robust`]: controlled noise, ε estimation and the robustness bounds
//!   for maximally entangled targets.
//! * [`steerweight`]: steerable weight by a small dense interior-point SDP.
//! * [`io`]: JSON schemas for states, measurements and assemblages.

pub mod assemblage;
pub mod certify;
pub mod error;
pub mod io;
pub mod qmath;
pub mod robust;
pub mod steerweight;
pub mod tsi;

pub use error::{Error, Result};
