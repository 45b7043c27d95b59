//! Differentiable forward warping.
//!
//! Summation, average, linear and softmax splatting with analytic
//! gradients, bilinear backward warping, a brightness-constancy importance
//! metric, independent verification oracles, and a frame-interpolation
//! pipeline built on top of them.
//!
//! Flow vectors are in pixels and add to integer pixel coordinates, with
//! `(0, 0)` at the center of the top-left pixel: source pixel `q` lands at
//! `q + flow[q]`.

pub mod bench;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod metric;
pub mod oracle;
pub mod pipeline;
pub mod real;
pub mod sample;
pub mod scene;
pub mod splat;

pub use error::{Result, WarpError};
pub use grid::{
    make_grid, scale_flow, FlowField, GradientBundle, ImageGrid, ImportanceMap, WarpOutput,
};
pub use metric::{
    brightness_constancy, brightness_constancy_backward, MetricGradients, MetricParams,
};
pub use oracle::{gather_oracle, zbuffer_oracle};
pub use pipeline::{
    interpolate, temporal_sweep, FusionOutput, Importance, InterpolationRequest, SweepRecord,
};
pub use real::{Precision, Real};
pub use sample::{backward_warp, backward_warp_backward};
pub use scene::{make_scene, Scene, SceneKind};
pub use splat::{
    splat, splat_average, splat_average_backward, splat_backward, splat_linear,
    splat_linear_backward, splat_softmax, splat_softmax_backward, splat_summation,
    splat_summation_backward, Exec, SplatMode,
};
