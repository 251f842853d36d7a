//! Numerical toolkit for the concave-convex two-point boundary value problem
//!
//!   -v''(r) = h_lambda(r, v(r), |v'(r)|)  in (0, 1),   v(0) = v(1) = 0,
//!
//! and its radial annulus ancestor, where the model nonlinearity is
//! g_lambda(z) = lambda |z|^{q-2} z + |z|^{p-2} z with 1 < q < 2 < p.
//!
//! The crate provides, in order of dependency:
//! - [`params`]: exponents, nonlinearities, pinching constants, energies;
//! - [`transform`]: the radial diffeomorphism between the annulus problem and
//!   the interval problem, with pullback and residual verification;
//! - [`timemap`]: singular quadrature for T_lambda, its derivative, inverse
//!   problems, the fold values Lambda_j and the dead-core thresholds lambda_{j*};
//! - [`solutions`]: exact construction and classification of nodal, threshold,
//!   and dead-core solutions of the autonomous problem;
//! - [`shooting`]: an adaptive Runge-Kutta shooting solver with event-detected
//!   node counting for general nonlinearities, plus the Green's-function
//!   residual operator;
//! - [`continuation`]: pseudo-arclength tracing of the solution continua with
//!   fold detection, producing bifurcation-diagram data;
//! - [`apriori`]: independent verification of the a-priori estimates with all
//!   proof-derived constants tabulated.

pub mod apriori;
pub mod continuation;
pub mod error;
pub mod ode;
pub mod params;
pub mod quad;
pub mod roots;
pub mod shooting;
pub mod solutions;
pub mod timemap;
pub mod trace;
pub mod transform;

pub use error::{Error, Result};
pub use params::{Exponents, NonlinearitySpec, PinchingBounds};
pub use trace::Trace;
