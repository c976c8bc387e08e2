//! Topology identification for networked RC thermal models.
//!
//! The crate simulates zone temperatures of a resistor-capacitor network driven
//! by wide-sense-stationary heat inputs and recovers the undirected interaction
//! graph from the temperature series alone. Recovery fits two-sided
//! multivariate Wiener filters, keeps every pair whose filter has a large
//! H-infinity norm (the moral graph), then removes pairs whose phase response
//! sits at pi across the band where the filter carries its energy: those are
//! nodes that only share a neighbour.
//!
//! Module map:
//!
//! * [`network`] – RC network description, validation and forward-Euler discretization.
//! * [`simulate`] – white or colored input generation and state rollout.
//! * [`panel`] – the temperature panel type and its CSV form.
//! * [`wiener`] – finite-lag Wiener filter estimation (plain and L1-penalized).
//! * [`oracle`] – exact Wiener filters from a known model, per frequency.
//! * [`topology`] – moral graph, phase pruning, reconstruction error.
//! * [`baselines`] – one-step regression and graphical lasso comparisons.
//! * [`cli`] – configuration and the `rctopo` subcommands.

pub mod baselines;
pub mod cli;
mod error;
pub mod graph;
pub mod lasso;
pub mod network;
pub mod oracle;
pub mod panel;
pub mod simulate;
pub mod topology;
pub mod wiener;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeSet};
pub use network::{DiscreteDynamics, RcNetwork};
pub use panel::TimeSeriesPanel;
pub use simulate::NoisePlan;
pub use topology::{GraphEstimate, LearnParams};
pub use wiener::{FilterBank, FrequencyGrid};
