//! Picard iteration of the fixed-point map, the common-noise uniqueness
//! study and Monte Carlo ensembles.

use rayon::prelude::*;

use crate::dynamics::{ModelParams, SchemeConfig};
use crate::noise::NoiseSpec;
use crate::spectral_basis::SpectralBasis;

pub mod ensemble;
pub mod fixed_point;
pub mod uniqueness;

pub use ensemble::{ensemble, EnsembleReport, PathFailure};
pub use fixed_point::{apply_t, picard_iterate, seminorm_distance, FixedPointConfig, FixedPointReport, Trajectory};
pub use uniqueness::{uniqueness_study, StoppingSpec, UniquenessReport};

/// Read-only inputs shared by every trajectory of an experiment.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub basis: &'a SpectralBasis,
    pub params: &'a ModelParams,
    pub noise: &'a NoiseSpec,
    pub scheme: &'a SchemeConfig,
}

/// Environment variable capping the worker count; `0` or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "GMSPDE_THREADS";

pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Parallel map whose output order is the input order, independent of the
/// number of workers.
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build();
    match pool {
        Ok(pool) => pool.install(|| items.into_par_iter().map(&f).collect()),
        Err(_) => items.into_iter().map(f).collect(),
    }
}
