//! `isomesh`: optimize, inspect and export metric-adapted subdivided meshes.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
//! numerical failures. `ISOMESH_LOG` sets the log filter (default `warn`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isomesh::geodesic::{geodesic_deviation, ShootingOptions};
use isomesh::io::config::{FieldSpec, RunConfig};
use isomesh::io::export::{export_svg, export_vtk, ExportFormat};
use isomesh::io::meshfile::load_mesh;
use isomesh::io::report::{build_report, subtriangle_qualities, ReportOptions};
use isomesh::measures::TriangleQuadrature;
use isomesh::metric::MetricField;
use isomesh::pipeline::{optimize, stage_log, write_outputs};
use isomesh::{Error, Point};
use log::{info, warn};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "isomesh",
    version,
    about = "Isometric triangulations for analytic metric fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the mesh described by a JSON config; writes mesh.txt, report.json and run.log.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the geodesic between the endpoints of every macroedge and compare.
    Geodesics {
        #[arg(long)]
        mesh: PathBuf,
        /// Catalog id (`s1`..`s6`, `identity`) or an inline JSON field object.
        #[arg(long)]
        field: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quality, edge-length, quotient and unitness report of a mesh file, as JSON.
    Report {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a mesh file as legacy VTK or SVG.
    Export {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        format: ExportFormat,
        /// Field used to color subtriangles by quality.
        #[arg(long)]
        field: Option<String>,
        /// Overlay written by `geodesics`, drawn over the SVG.
        #[arg(long)]
        geodesics: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::Parse { .. } | Error::Json(_) | Error::Io(_) => 2,
            Error::OutsideDomain(_)
            | Error::Degenerate(_)
            | Error::NoConvergence(_)
            | Error::Infeasible(_) => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct OverlayEdge {
    vertices: [usize; 2],
    /// Euclidean deviation between the macroedge and the geodesic.
    deviation: Option<f64>,
    relative_deviation: Option<f64>,
    geodesic: Vec<Point>,
    error: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Overlay {
    field: String,
    max_deviation: f64,
    failures: usize,
    edges: Vec<OverlayEdge>,
}

fn parse_field(arg: &str) -> Result<MetricField, Failure> {
    let spec: FieldSpec = if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(Error::from)?
    } else {
        FieldSpec::catalog(arg)
    };
    Ok(spec.build()?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::from(e).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Optimize { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let result = optimize(&cfg, &ReportOptions::default())?;
            write_outputs(&out, &result)?;
            print!("{}", stage_log(&result.stats));
            if result.stats.failed() {
                return Err(Failure {
                    code: 3,
                    message: format!(
                        "optimizer stage failed; partial results in {}",
                        out.display()
                    ),
                });
            }
            info!("wrote results to {}", out.display());
        }
        Command::Geodesics { mesh, field, out } => {
            let m = load_mesh(&mesh)?;
            let f = parse_field(&field)?;
            let opts = ShootingOptions::default();
            let edges: Vec<OverlayEdge> = m
                .macro_edges()
                .iter()
                .map(|e| {
                    let pts: Vec<Point> = e.path.iter().map(|&v| m.vertices[v]).collect();
                    let vertices = [e.path[0], e.path[e.path.len() - 1]];
                    let chord = (pts[pts.len() - 1] - pts[0]).norm();
                    match geodesic_deviation(&pts, &f, &opts) {
                        Ok((d, geo)) => OverlayEdge {
                            vertices,
                            deviation: Some(d),
                            relative_deviation: Some(d / chord),
                            geodesic: geo.points,
                            error: None,
                        },
                        Err(err) => {
                            warn!("macroedge {vertices:?}: {err}");
                            OverlayEdge {
                                vertices,
                                deviation: None,
                                relative_deviation: None,
                                geodesic: Vec::new(),
                                error: Some(err.to_string()),
                            }
                        }
                    }
                })
                .collect();
            let overlay = Overlay {
                field,
                max_deviation: edges.iter().filter_map(|e| e.deviation).fold(0.0, f64::max),
                failures: edges.iter().filter(|e| e.error.is_some()).count(),
                edges,
            };
            emit(
                Some(&out),
                &serde_json::to_string_pretty(&overlay).map_err(Error::from)?,
            )?;
            println!(
                "{} macroedges, max deviation {:.3e}, {} unsolved",
                overlay.edges.len(),
                overlay.max_deviation,
                overlay.failures
            );
        }
        Command::Report { mesh, config, out } => {
            let cfg = RunConfig::load(&config)?;
            let field = cfg.field.build()?;
            let m = load_mesh(&mesh)?;
            let report = build_report(&m, &field, None, &ReportOptions::default())?;
            let mut text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
            text.push('\n');
            emit(out.as_deref(), &text)?;
        }
        Command::Export {
            mesh,
            format,
            field,
            geodesics,
            out,
        } => {
            let m = load_mesh(&mesh)?;
            let qualities = match field {
                Some(f) => Some(subtriangle_qualities(
                    &m,
                    &parse_field(&f)?,
                    TriangleQuadrature::default(),
                )?),
                None => None,
            };
            let text = match format {
                ExportFormat::Vtk => export_vtk(&m, qualities.as_deref())?,
                ExportFormat::Svg => {
                    let overlays = match geodesics {
                        Some(path) => {
                            let text = std::fs::read_to_string(&path).map_err(Error::from)?;
                            let o: Overlay = serde_json::from_str(&text).map_err(Error::from)?;
                            o.edges
                                .into_iter()
                                .map(|e| e.geodesic)
                                .filter(|g| !g.is_empty())
                                .collect()
                        }
                        None => Vec::new(),
                    };
                    export_svg(&m, qualities.as_deref(), &overlays)?
                }
            };
            emit(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ISOMESH_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("isomesh: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_errors_map_to_3_and_input_errors_to_2() {
        let code = |e: Error| Failure::from(e).code;
        assert_eq!(code(Error::Infeasible("x".into())), 3);
        assert_eq!(code(Error::NoConvergence("x".into())), 3);
        assert_eq!(code(Error::Degenerate("x".into())), 3);
        assert_eq!(code(Error::OutsideDomain(Point::new(0.0, 0.0))), 3);
        assert_eq!(code(Error::InvalidArgument("x".into())), 2);
        assert_eq!(
            code(Error::Parse {
                line: 1,
                msg: "x".into()
            }),
            2
        );
    }

    #[test]
    fn field_argument_accepts_ids_and_json() {
        assert!(parse_field("s5").is_ok());
        assert!(parse_field(r#"{"id":"s6","smoothing":1e-8}"#).is_ok());
        assert_eq!(parse_field("nope").err().map(|f| f.code), Some(2));
    }
}
