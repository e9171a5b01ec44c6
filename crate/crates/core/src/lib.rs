//! Numerical laboratory for the transaction-cost Black-Scholes Delta equation.
//!
//! The library solves the regularized Delta equation
//!
//! ```text
//! u_t = (a0(x,t,u_x) u_x)_x + (r - q) x u_x - q u,
//! a0  = 0.5 sigma^2 x^2 (1 + e^{rt} a^2 x^2 u_x) + eps
//! ```
//!
//! on `[0, b] x [0, T]` with `u(0,t) = 0`, `u(b,t) = 1` and a quintic-smoothed
//! step as initial data, using a conservative finite-volume discretization,
//! upwinded advection and fully implicit time marching. On top of the solver
//! sit the building blocks the model needs: the Barles-Soner transaction-cost
//! ODE, discrete Sobolev norms of the shifted solution with viscosity-scaling
//! fits, price reconstruction from the Delta field, and an acceptance suite
//! wiring everything together.

pub mod acceptance;
pub mod config;
pub mod csvio;
pub mod error;
pub mod fv;
pub mod grid;
pub mod model;
pub mod norms;
pub mod pricer;
pub mod psi;
pub mod smoothing;
pub mod stepper;

pub use config::RunConfig;
pub use error::Error;
pub use grid::{Grid, GridKind, SolutionField};
pub use model::{DomainParams, MarketParams, RegularizationParams};
pub use stepper::{SolverOptions, Trajectory};

/// Configures the global thread pool used by the parallel sweep.
///
/// No-op when the `parallel` feature is disabled or a pool already exists.
pub fn set_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}
