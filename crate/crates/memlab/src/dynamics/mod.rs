//! Gradient and heavy-ball flows on the exponential-sum loss, hitting times,
//! the two-rate plateau system and the quadratic saddle example.

pub mod flow;
pub mod planar;
pub mod plateau;
pub mod quadratic;

pub use flow::{
    escape_bound, gradient_flow, heavy_ball_flow, hitting_times, linearized_escape_prediction, EscapePrediction,
    FlowConfig, FlowTrajectory, HittingTimes,
};
pub use planar::{flow_2d_symmetric, PlanarOptions, PlanarResult};
pub use plateau::{detect_plateau, Plateau, PlateauRule};
pub use quadratic::{predicted_escape, quadratic_escape, QuadraticMethod};
