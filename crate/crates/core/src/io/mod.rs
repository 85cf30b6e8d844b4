//! File formats, text reports and the end-to-end pipeline.
//!
//! All coordinates are taken as projected planar values; nothing here
//! reprojects geographic (longitude/latitude) input.

mod config;
mod csv_input;
mod geojson;
mod pipeline;
mod report;
mod weights_file;

pub use config::{
    InputConfig, MgwrOptions, MoranOptions, PipelineConfig, WeightsMethod, WeightsSpec,
};
pub use csv_input::{load_points_csv, CsvSchema};
pub use geojson::{
    export_surfaces_geojson, load_polygons_geojson, read_surfaces_geojson, Geometry,
    SurfaceTable,
};
pub use pipeline::{run_pipeline, RunManifest, ARTIFACTS};
pub use report::{
    diagnostics_block, gwr_block, mgwr_block, moran_block, ols_block, format_p_value,
};
pub use weights_file::{read_weights, write_weights};
