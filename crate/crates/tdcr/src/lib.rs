//! placeholder while modules land
pub mod error;
pub mod gait;
pub mod geometry;
pub mod io;
pub mod nlp;
pub mod statics;
pub mod tendon;
pub use error::{Error, Result};
pub use gait::{GaitSequence, Handedness, HelixFit, HelixSpec};
pub use geometry::{ChainFrames, JointState, Pose, RobotGeometry, TendonRouting, Vec3};
pub use nlp::{NlpConfig, NlpProblem, NlpSolution};
pub use statics::{
    ActuationCommand, CalibrationGrid, CalibrationResult, CalibrationSample, SolveResult,
    SolverConfig,
};
pub use tendon::{FrictionParams, JointMoments, TendonPath};
