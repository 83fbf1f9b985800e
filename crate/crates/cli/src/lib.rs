//! Command-line front end of `fieldlab`: preset experiments, flat configs,
//! binary field dumps, CSV tables and PPM heatmaps.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod dump;
pub mod error;
pub mod image;
pub mod presets;
pub mod random;
pub mod table;

pub use commands::main_with;
pub use config::Config;
pub use dump::{decode_dump, encode_dump, read_dump, read_header, write_dump, DumpHeader};
pub use error::{CliError, CliResult};
pub use presets::{execute, ExperimentPreset, PresetName, PresetReport};
pub use random::{random_initial, InitialKind, RandomSpec};
pub use table::Table;

/// Environment variable naming the output base directory.
pub const OUT_ENV: &str = "FIELDLAB_OUT";
