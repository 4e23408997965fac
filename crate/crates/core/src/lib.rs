//! Limited-view parallel-beam CT: acquisition simulation, classical
//! reconstruction, and streak removal with a dilated dense network and its
//! convolutional-GRU counterpart.

pub mod error;
pub mod geometry;
pub mod gru;
pub mod io;
pub mod metrics;
pub mod msd;
pub mod nn;
pub mod noise;
pub mod phantom;
pub mod pipeline;
pub mod projector;
pub mod recon;

pub use error::{Error, Result};
pub use geometry::{make_parallel_geometry, Geometry, Image, Sinogram};
