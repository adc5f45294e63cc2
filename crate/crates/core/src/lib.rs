//! Smooth path planning through unions of axis-aligned boxes.
//!
//! A planning query runs in three phases. An offline line graph over
//! box intersections gives a shortest polygonal curve; the polygonal
//! phase shortens it and inserts boxes where a dual test says the box
//! sequence is suboptimal; the smooth phase fits a piecewise Bézier path
//! to the final sequence and tunes its traversal times.

pub mod bezier;
pub mod conic;
pub mod error;
pub mod geometry;
pub mod linegraph;
pub mod oracle;
pub mod planner;
pub mod polygonal;
pub mod scene_io;
pub mod smooth;

pub use error::{PlanError, Result};
pub use geometry::{AxisBox, BoxSet};
pub use linegraph::LineGraph;
pub use planner::{Plan, PlanOutcome, Planner};
pub use polygonal::PolygonalCurve;
pub use smooth::{PiecewiseBezierPath, PlanningQuery, SmoothParams};
