//! Point-scatterer radar simulator.
//!
//! Every marker is an isotropic scatterer. The simulated baseband return is
//! `iq(t) = Σ_m a_m·exp(-j·4π·d_m(t)/λ) + n(t)` with `d_m` the marker-radar
//! distance, so a target closing on the radar produces a positive Doppler
//! frequency `2v/λ`. The same trajectories sampled at the MoCap rate give
//! the paired marker stream, which makes the simulator an exact oracle for
//! the preprocessing pipeline and a source of learnable training data.

mod recipe;
mod scene;

pub use recipe::{make_dataset, Manifest, PointParams, Recipe, SceneKind, Trial, TrialEntry};
pub use scene::{
    simulate, GaitParams, Scatterer, ScattererScene, Trajectory, SPEED_OF_LIGHT,
};
