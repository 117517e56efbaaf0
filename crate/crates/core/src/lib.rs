pub mod distort;
pub mod features;
pub mod filters;
pub mod harness;
pub mod media;
pub mod nn;
pub mod pipeline;
pub mod quality;
pub mod sampler;
pub mod stats;
