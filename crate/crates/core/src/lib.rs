pub mod controller;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod policy;
pub mod qp;
pub mod sim;
pub mod train;
pub mod types;

pub use error::{Error, Result};
pub use geometry::Vec2;
