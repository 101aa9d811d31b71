//! Configuration, mesh files, reports and figure export.

pub mod config;
pub mod export;
pub mod meshfile;
pub mod report;

pub use config::{FieldSpec, GridSpec, RunConfig};
pub use export::{export_svg, export_vtk, ExportFormat};
pub use meshfile::{read_mesh, write_mesh};
pub use report::{build_report, Report, ReportOptions};
