//! Indoor visible-light positioning under non-line-of-sight propagation.
//!
//! The crate simulates received optical power from ceiling LEDs, including
//! single-bounce wall reflections, and implements three position estimators
//! on top of it: k-NN fingerprinting, LOS-model nonlinear least squares
//! (NLS), and database-assisted NLS (DA-NLS), which replaces the LOS model by
//! a received-power model learned from a fingerprint database.
//!
//! Module map:
//!
//! * [`scene`]: room, LEDs, photodetector, channel and noise parameters.
//! * [`channel`]: LOS/NLOS gains and noisy power measurements.
//! * [`database`]: fingerprint collection and the database file format.
//! * [`regression`]: inverse-distance-weighted k-NN.
//! * [`optimizer`]: particle swarm minimization.
//! * [`estimators`]: FP, NLS and DA-NLS.
//! * [`bench`]: Monte Carlo RMSE experiments and result files.

pub mod bench;
pub mod channel;
pub mod database;
pub mod estimators;
pub mod optimizer;
pub mod regression;
pub mod rng;
pub mod scene;

pub use channel::{Channel, GainBreakdown, NlosCache};
pub use database::{Database, Fingerprint, PowerVector};
pub use estimators::{Estimate, EstimatorInput, Method};
pub use optimizer::{PsoConfig, SearchRegion};
pub use scene::{load_scene, Scene, Vec3};
