//! Configuration, tabular output and plots.

pub mod config;
pub mod csv;
pub mod plot;

pub use config::{parse_config, ConfigError, ConfigErrorKind, RunConfig};
pub use csv::{spectrum_table, table_to_spectrum, trajectory_table, CsvError, Table};
pub use plot::{render_svg, Series};
