//! Spatial weights, global Moran's I, OLS, GWR and spatial-lag multiscale GWR.
//!
//! Heavy loops (per-location solves, permutations, neighbour searches) run on
//! rayon when the default `parallel` feature is enabled and sequentially
//! otherwise; results are identical either way.

pub mod autocorr;
pub mod data;
pub mod dist;
pub mod error;
pub mod io;
pub mod local;
pub mod mgwr;
pub mod ols;
pub mod par;
pub mod simulate;
pub mod weights;

pub use error::{Error, Result};
