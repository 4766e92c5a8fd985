//! Career path recommendation as a labor-market MDP.
//!
//! The crate is organised the way the simulator is assembled:
//!
//! * [`market`] holds the work-experience, vacancy and application data, its
//!   preprocessing, plausible-job selection and a seeded synthetic generator.
//! * [`forest`] is a from-scratch random forest (Gini classifier and MSE
//!   regressor).
//! * [`models`] turns the data into the transition (hire probability) and
//!   reward (salary) models under either state representation.
//! * [`env`] is the episodic quarterly MDP built on top of those models.
//! * [`approx`] is a small dense network with backpropagation and Adam.
//! * [`agents`] contains Sarsa, Q-learning, DQN, A2C and the two greedy
//!   baselines.
//! * [`eval`] implements factual/counterfactual income, the comparison report,
//!   the permutation test, distribution reports and an exact finite-horizon
//!   oracle for small MDPs.

pub mod agents;
pub mod approx;
pub mod env;
pub mod eval;
pub mod forest;
pub mod market;
pub mod models;
pub mod rng;

pub use agents::{Algorithm, Policy, QTable};
pub use env::{Env, EnvConfig, State, StepOutcome};
pub use eval::{ComparisonReport, ObservedPath};
pub use market::{JobId, MarketDataset, SynthConfig};
pub use models::{SalaryModel, StateRepresentation, TransitionModel};
pub use rng::SimRng;
