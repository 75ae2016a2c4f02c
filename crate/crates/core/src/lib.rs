pub mod adapter;
pub mod error;
pub mod features;
pub mod frame_io;
pub mod homography;
pub mod motion;
pub mod oracle;
pub mod score;
pub mod warp;

pub use error::{Error, Result};
