pub mod audit;
pub mod config;
pub mod dataset;
pub mod features;
pub mod lmm;
pub mod mice;
pub mod pipeline;
pub mod report;
pub mod spls;
pub mod synth;
