//! Single-edge graph injection attacks against graph neural networks.
//!
//! The crate covers the full pipeline: sparse attributed graphs, linear
//! surrogates (SGC and its similarity-pruned variant) plus a two-layer GCN
//! victim, layered neighborhood sampling, reverse-convolution feature
//! synthesis, the single-edge attack itself, and the homophily-pruning
//! defender with its evaluation metrics.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the gradient checks assume.

pub mod attack;
pub mod defense;
pub mod error;
pub mod graph;
pub mod sampler;
pub mod scalar;
pub mod sparse;
pub mod surrogate;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Graph = graph::AttributedGraph<f64>;
pub type GraphF32 = graph::AttributedGraph<f32>;
pub type View = graph::GraphView<f64>;
pub type Model = surrogate::SurrogateModel<f64>;
pub type ModelF32 = surrogate::SurrogateModel<f32>;
pub type Generator = synth::ReverseConvGenerator<f64>;
pub type Plan = attack::InjectionPlan<f64>;
pub type Attacked = attack::AttackedGraph<f64>;
pub type Profile = defense::HomophilyProfile<f64>;

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed for a sub-run at `coords` under a base seed (splitmix64 chaining).
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    coords.iter().fold(mix(base), |acc, &c| mix(acc ^ mix(c)))
}
