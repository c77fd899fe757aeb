//! Conference review scoring, calibration and acceptance ranking.

pub mod dequantize;
pub mod review_data;
pub mod scoring;
pub mod assignment;
pub mod calibration;
pub mod reports;
pub mod stats;
pub mod synthetic;
