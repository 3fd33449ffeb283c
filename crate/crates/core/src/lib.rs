//! Combinatorial train tracks and symbolically-represented geodesic
//! laminations: the combinatorial ultrametric, its log transform, zipper
//! family enumeration with counting bounds, and box-counting dimension
//! estimates on a concrete punctured-torus model.

pub mod dimension;
pub mod lamination;
pub mod metrics;
pub mod path;
pub mod torus;
pub mod track;
pub mod weights;
pub mod zippers;

pub use path::{DirectedEdge, EdgePath};
pub use track::TrainTrack;
