pub mod bessel;
pub mod distribution;
pub mod ewt;
pub mod fbse;
pub mod features;
pub mod fusion;
pub mod metrics;
pub mod mlp;
pub mod pipeline;
pub mod windowing;
