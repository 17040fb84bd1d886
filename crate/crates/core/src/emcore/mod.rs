//! Time-domain field solver for grounded two-element patch scenes.

mod cpml;
pub mod pulse;
pub mod scene;
pub mod solver;

pub use pulse::Pulse;
pub use scene::{
    build_scene, build_scene_with, Axis, Boundary, LatticeSpec, MaterialStack, Placement, Port, Scene, SceneBuilder,
    Substrate,
};
pub use solver::{
    courant_dt, courant_dt_for, leapfrog_energy, run_fdtd, run_fdtd_with, total_field_energy, EnergySample, Fields,
    RunOptions, Solver, TimeSeries, CFL,
};
