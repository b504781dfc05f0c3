//! Free-final-time 6-DoF powered descent guidance by successive
//! convexification: the nonlinear landing problem is discretized and
//! linearized into a sequence of second-order cone programs, solved with a
//! built-in primal-dual interior-point method, and the converged trajectory
//! is validated against the exact nonlinear dynamics.

pub mod constraints;
pub mod discretizer;
pub mod dynamics;
pub mod math;
pub mod ode;
pub mod scenario;
pub mod scvx;
pub mod socp;
pub mod validator;

pub use scenario::{default_scenario, load_scenario, save_scenario, Scenario};
