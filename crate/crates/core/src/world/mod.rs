//! The navigation world: recorded scenes, state extraction, sensing,
//! termination and reward.

mod grid;
mod scene;
mod state;

pub use grid::OccupancyGrid;
pub use scene::{
    load_trajectories, parse_trajectories, render_trajectories, EnvironmentSpec, PedestrianId, SceneManifest,
    Trajectory,
};
pub use state::{
    check_termination, compute_p_obs, compute_p_ped, observe_com, observe_obs, observe_peds, state_dim,
    FieldOfView, ObstacleFeatures, Observation, PolarPair, RewardModel, SensorModel, TerminationCause,
    TerminationThresholds, WorldState,
};
