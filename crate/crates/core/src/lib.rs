//! Autonomous mobility-on-demand: the discrete-time fleet model, the
//! receding-horizon MILP controllers, four baseline dispatchers, and a
//! closed-loop simulator with demand generation and metrics.

pub mod dispatch;
pub mod model;
pub mod mpc;
pub mod sim;
