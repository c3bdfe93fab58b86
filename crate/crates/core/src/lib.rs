//! Category-level 6D object pose estimation from a sparse set of posed
//! reference views: semantic feature matching ranked by cyclical distance,
//! best-reference selection, lifting of reference matches to 3D from depth,
//! and gradient-based refinement of the query pose against the 2D matches.
//!
//! [`synth`] provides analytic scenes with known ground truth so every stage
//! can be checked end to end, and [`io`] defines the on-disk formats.

pub mod geometry;
pub mod matching;

pub use geometry::{CameraIntrinsics, GeometryError, RigidPose, Rotation6D, SphericalCamera};
pub use matching::{FeatureMap, Match, MatchError, MatchSet, Metric};
pub mod refinement;

pub use refinement::{
    refine_pose, Correspondence2D3D, OptimizerConfig, RefineError, RefinementProblem, RefinementResult,
};
pub mod synth;
pub mod io;
pub mod eval;
pub mod pipeline;

pub use eval::{summarize, EvalRecord, EvalSummary};
pub use io::{DatasetManifest, FormatError};
pub use synth::{DepthMap, SyntheticScene};
