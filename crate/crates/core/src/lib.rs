//! Structure-preserving integrators for conformally Hamiltonian systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`]: conformal systems `(H, N)`, the altered Hamiltonian
//!   `K_E = N (H - E)` and the phi-simple reduction of the nonholonomic
//!   particle.
//! * [`variational`]: the five midpoint/trapezoidal discrete Lagrangians, the
//!   implicit symplectic step `Psi_{h,E}` and an RK4 reference integrator.
//! * [`series`]: second-order modified altered Hamiltonian, modified
//!   conformal Hamiltonian and modified conformal factor, and the integrator
//!   that fixes `E` to the modified energy of the initial point.
//! * [`bea`]: numerical backward error analysis of arbitrary one-step maps.
//! * [`measure`]: point clouds, Monte Carlo convex-hull volumes with respect
//!   to weighted measures, and volume time series.

pub mod bea;
pub mod dynamics;
pub mod error;
pub mod jet;
pub mod measure;
pub mod series;
pub mod state;
pub mod variational;

pub use error::{Error, Result};
pub use state::{PhaseState, Tangent};
