//! Regime characterization of simulated trajectories.

pub mod beats;
pub mod bifurcation;
pub mod lyapunov;
pub mod poincare;
