pub mod active;
pub mod bench;
pub mod config;
pub mod covariance;
pub mod dynamic;
pub mod error;
pub mod eval;
pub mod field;
pub mod geometry;
pub mod io;
pub mod local;
pub mod observation;
pub mod oracle;
pub mod predictor;
pub mod rays;
pub mod reconstruct;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ray-model.md")]
    mod ray_model {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    mod prediction {}
    #[doc = include_str!("../../../book/src/local-kernel.md")]
    mod local_kernel {}
    #[doc = include_str!("../../../book/src/active-sampling.md")]
    mod active_sampling {}
    #[doc = include_str!("../../../book/src/dynamic.md")]
    mod dynamic {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
