//! Kernels, bandwidth search and single-bandwidth geographically weighted regression.

pub(crate) mod gwr;
mod kernel;
mod neighbors;
mod search;

pub use gwr::{aicc, gwr_fit, gwr_score, select_gwr_bandwidth, GwrFit, LocalSolve};
pub use kernel::{kernel_weight, BandwidthMode, KernelFamily, KernelSpec, ADAPTIVE_PAD};
pub use neighbors::{Neighborhoods, DISTANCE_CACHE_MAX_N};
pub use search::{
    golden_section, golden_section_integer, SearchResult, CONTINUOUS_REL_TOL,
};
