//! Continuous selections of convex-valued correspondences that are
//! pointwise Lipschitz on dense separation sets, and the homogeneous right
//! inverses of linear surjections they produce.
//!
//! Everything works on finite samples: a [`SampledMetricSpace`] carries the
//! domain, a [`Correspondence`] assigns a [`ConvexBody`] to every sample
//! point, and [`selection::run_iteration`] builds the sequence of
//! selections round by round, keeping the evidence needed to recheck it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bartle_graves;
pub mod convex;
pub mod correspondence;
pub mod error;
pub mod linalg;
pub mod lipschitz;
pub mod metric;
pub mod par;
pub mod report;
pub mod selection;
pub mod vector;

pub use bartle_graves::{build_right_inverse, verify_right_inverse, BartleGravesConfig, RightInverse};
pub use convex::{AffineFlat, Ball, ConvexBody, Halfspace, Polytope};
pub use correspondence::Correspondence;
pub use error::{Error, Result};
pub use linalg::LinearSurjection;
pub use lipschitz::{PlipProfile, SphereTable};
pub use metric::{MetricKind, PointId, SampledMetricSpace, SeparationHierarchy};
pub use selection::{run_iteration, IterationConfig, Selection, SelectionSequence};
