//! Problem adapters: residual functions and standard non-minimal solvers
//! for the five built-in spatial perception problems.

pub mod category;
pub mod pose_graph;
pub mod registration;
pub mod rotation_averaging;
pub mod rotation_search;

pub use category::{CategoryAdapter, CategoryCorrespondence};
pub use pose_graph::{EdgeKind, PoseEdge, PoseGraph, PoseGraphAdapter};
pub use registration::RegistrationAdapter;
pub use rotation_averaging::RotationAveragingAdapter;
pub use rotation_search::RotationSearchAdapter;
