//! End-to-end run: build, subdivide, classify, constrain, rotate, optimize, report.

use std::fmt::Write as _;
use std::path::Path;

use crate::io::config::RunConfig;
use crate::io::meshfile::write_mesh;
use crate::io::report::{build_report, Report, ReportOptions};
use crate::mesh::{MacroMesh, SubdividedMesh};
use crate::metric::MetricField;
use crate::objective::TargetSpec;
use crate::optimizer::{continuation_run, RunStats};
use crate::Result;

pub struct RunOutput {
    pub mesh: SubdividedMesh,
    pub field: MetricField,
    pub stats: RunStats,
    pub report: Report,
}

/// The initial subdivided mesh of a config, before optimization.
pub fn build_mesh(cfg: &RunConfig) -> Result<(SubdividedMesh, MetricField)> {
    cfg.validate()?;
    let field = cfg.field.build()?;
    let domain = cfg.domain();
    let macros = MacroMesh::uniform_grid(domain, cfg.grid.nx, cfg.grid.ny)?;
    let mut mesh = SubdividedMesh::subdivide(&macros, cfg.n)?;
    mesh.classify_edges(cfg.tiling);
    mesh.apply_constraint_mode(cfg.constraints, &domain);
    if cfg.initial_rotation_degrees != 0.0 {
        mesh.rotate(cfg.initial_rotation_degrees.to_radians(), domain.center());
    }
    Ok((mesh, field))
}

/// Optimizes the config's mesh. A failed stage is reported through
/// [`RunStats::failed`], not as an error, so partial results survive.
pub fn optimize(cfg: &RunConfig, report: &ReportOptions) -> Result<RunOutput> {
    let (mut mesh, field) = build_mesh(cfg)?;
    let targets = TargetSpec::new(cfg.tiling, cfg.n);
    let stats = continuation_run(
        &mut mesh,
        &field,
        targets,
        &cfg.termination,
        &cfg.lbfgs,
        &cfg.continuation,
    )?;
    let report = build_report(&mesh, &field, Some(stats.clone()), report)?;
    Ok(RunOutput {
        mesh,
        field,
        stats,
        report,
    })
}

pub fn stage_log(stats: &RunStats) -> String {
    let mut s = String::new();
    for (k, st) in stats.stages.iter().enumerate() {
        let _ = writeln!(
            s,
            "stage {k} eps={:.6} iters={} E0={:.6e} E={:.6e} |g|inf={:.3e} min_area_ratio={:.6} stop={}",
            st.epsilon, st.iterations, st.e_initial, st.e_final, st.grad_max_norm, st.min_area_ratio, st.reason
        );
    }
    let _ = writeln!(s, "wall_time_s={:.3}", stats.wall_time_s);
    s
}

/// Writes `mesh.txt`, `report.json` and `run.log` into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("mesh.txt"), write_mesh(&out.mesh)?)?;
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&out.report)?,
    )?;
    std::fs::write(dir.join("run.log"), stage_log(&out.stats))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::{FieldSpec, GridSpec};
    use crate::mesh::Tiling;
    use crate::metric::{MetricTensor, Rect};

    #[test]
    fn target_tiling_is_a_fixed_point() {
        let mut cfg = RunConfig::new(FieldSpec {
            metric: Some(MetricTensor::IDENTITY),
            ..FieldSpec::catalog("constant")
        });
        cfg.domain = Some(Rect::new(0.0, 4.0, 0.0, 4.0));
        cfg.grid = GridSpec { nx: 4, ny: 4 };
        cfg.n = 1;
        cfg.tiling = Tiling::Right;
        let out = optimize(&cfg, &ReportOptions::minimal()).unwrap();
        assert_eq!(out.stats.e_final(), 0.0);
        assert_eq!(out.stats.stages[0].iterations, 0);
        assert!(!out.stats.failed());
    }

    #[test]
    fn rotation_is_about_the_domain_center() {
        let mut cfg = RunConfig::new(FieldSpec::catalog("s1"));
        cfg.n = 2;
        cfg.initial_rotation_degrees = 90.0;
        let (m, _) = build_mesh(&cfg).unwrap();
        // Corner (0, 0) of the unit square goes to (1, 0).
        assert!((m.vertices[0] - crate::Point::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn outputs_are_written() {
        let mut cfg = RunConfig::new(FieldSpec::catalog("s1"));
        cfg.n = 2;
        cfg.grid = GridSpec { nx: 1, ny: 1 };
        let out = optimize(&cfg, &ReportOptions::minimal()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &out).unwrap();
        for f in ["mesh.txt", "report.json", "run.log"] {
            assert!(dir.path().join(f).is_file());
        }
        assert_eq!(
            std::fs::read_to_string(dir.path().join("run.log"))
                .unwrap()
                .lines()
                .count(),
            7
        );
    }
}
