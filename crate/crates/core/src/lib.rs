//! Post-processing toolkit for diver-collected underwater cave data.
//!
//! Fuses visual-inertial SLAM trajectories with dive-computer depth,
//! co-registers independent SLAM runs through a shared fiducial target,
//! reduces the result to a centerline with wall distances, adjusts caveline
//! surveys, and exports pose priors for dense reconstruction.

pub mod align;
pub mod cloud;
pub mod depth;
pub mod error;
pub mod geom;
pub mod mst;
pub mod pipeline;
pub mod recon;
pub mod skeleton;
pub mod survey;
pub mod synth;
mod textio;
pub mod trajectory;

pub use align::{FrameTransform, TargetEstimate, TargetObservation};
pub use cloud::PointCloud;
pub use depth::{DepthCorrection, DepthLog, UniformSeries};
pub use error::{Error, Result};
pub use geom::{EulerAngles, Pose};
pub use mst::Edge;
pub use pipeline::{PipelineConfig, PipelineReport};
pub use recon::{AreaMember, AreaSelection};
pub use skeleton::{CaveSkeleton, CenterlineNode, SkeletonParams};
pub use survey::{StickMap, SurveyNetwork, SurveySegment};
pub use synth::{Bundle, CorridorSpec, GroundTruth};
pub use trajectory::{Keyframe, Trajectory};

pub use textio::{read_file, write_file};
