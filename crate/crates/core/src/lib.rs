//! Boundary-controlled optimal mixing of a passive scalar in a 2D periodic channel.
//!
//! The domain is `[0, Lx) x [0, Ly]`, periodic in x with two physical walls at
//! `y = 0` and `y = Ly`. An unsteady Stokes flow is driven through Navier-slip
//! wall controls; a passive scalar is advected by the flow and its mixedness at
//! the final time is measured in the `(H^1)'` mix-norm. Optimal wall controls
//! are computed by gradient descent on the diffusivity-regularized problem,
//! with gradients assembled from exact discrete adjoints so finite-difference
//! checks hold to near machine precision.

pub mod adjoint;
pub mod error;
pub mod field;
pub mod grid;
pub mod mixnorm;
pub mod optimize;
pub mod snapshot;
pub mod spectral;
pub mod stokes;
pub mod transport;

pub use error::{Error, Result};
pub use field::{BoundarySlice, ScalarField, VectorField};
pub use grid::Grid;
pub use mixnorm::CostReport;
pub use stokes::{ControlTrajectory, StokesConfig, VelocityTrajectory};
pub use transport::ScalarTrajectory;
