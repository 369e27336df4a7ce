//! Fundamental solution, convolution algebra, solvers and a priori bounds for
//! the FitzHugh-Rinzel reaction-diffusion system
//!
//! ```text
//! u_t = D u_xx - w + y + u (a - u)(u - 1)
//! w_t = eps (-beta w + c + u)
//! y_t = delta (-u + h - d y)
//! ```

pub mod bounds;
pub mod convolution;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod ode;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod solver;
pub mod specfun;

pub use bounds::{BoundReport, DataSups, KernelBounds, L1Bounds, ReportStatus, SolutionBounds};
pub use convolution::{IdentityReport, SpectralKernel, TimeSignal};
pub use error::{Degeneracy, Error, Result};
pub use grid::{Field, Grid};
pub use kernel::{KernelKind, KernelTable};
pub use params::{BoundConstants, Constant, DecayRates, Envelope, ModelParams, ValidatedParams};
pub use quadrature::QuadratureSpec;
pub use solver::{FdmOptions, InitialData, PicardSpec, Profile, Representation, SolutionField};
pub use specfun::BesselAccuracy;
