use isomesh::io::config::RunConfig;
use isomesh::io::export::{export_svg, export_vtk};
use isomesh::io::meshfile::{load_mesh, write_mesh};
use isomesh::io::report::{build_report, ReportOptions};
use isomesh::mesh::ConstraintTag;
use isomesh::pipeline::{build_mesh, optimize, write_outputs};
use isomesh::unitness::{unitness_report, UnitnessOptions, Verdict};

fn config(json: &str) -> RunConfig {
    RunConfig::from_json(json).unwrap()
}

#[test]
fn optimized_mesh_survives_a_file_round_trip() {
    let cfg = config(r#"{"field":{"id":"s2"},"n":4,"grid":{"nx":2,"ny":1}}"#);
    let out = optimize(&cfg, &ReportOptions::minimal()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &out).unwrap();

    let mesh = load_mesh(&dir.path().join("mesh.txt")).unwrap();
    assert_eq!(mesh.vertices, out.mesh.vertices);
    assert_eq!(write_mesh(&mesh).unwrap(), write_mesh(&out.mesh).unwrap());

    // Reporting on the reloaded mesh reproduces the saved report.
    let again = build_report(
        &mesh,
        &out.field,
        Some(out.stats.clone()),
        &ReportOptions::minimal(),
    )
    .unwrap();
    assert_eq!(again.qualities, out.report.qualities);
    assert_eq!(again.edge_lengths, out.report.edge_lengths);

    let log = std::fs::read_to_string(dir.path().join("run.log")).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("stage")).count(), 6);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["n"], 4);
}

#[test]
fn runs_are_deterministic() {
    let cfg = config(
        r#"{"field":{"id":"s3"},"n":3,"grid":{"nx":2,"ny":1},"initial_rotation_degrees":15}"#,
    );
    let a = optimize(&cfg, &ReportOptions::minimal()).unwrap();
    let b = optimize(&cfg, &ReportOptions::minimal()).unwrap();
    assert_eq!(a.mesh.vertices, b.mesh.vertices);
    assert_eq!(
        a.report.to_json_without_timing().unwrap(),
        b.report.to_json_without_timing().unwrap()
    );
}

#[test]
fn slide_boundary_keeps_boundary_vertices_on_the_domain() {
    let cfg = config(
        r#"{"field":{"id":"s4"},"n":4,"grid":{"nx":2,"ny":2},"constraints":"slide_boundary"}"#,
    );
    let domain = cfg.domain();
    let out = optimize(&cfg, &ReportOptions::minimal()).unwrap();
    for (p, c) in out.mesh.vertices.iter().zip(&out.mesh.constraints) {
        match c {
            ConstraintTag::Fixed => assert!(domain.contains(p)),
            ConstraintTag::SlideX => assert!(p.y == domain.y0 || p.y == domain.y1),
            ConstraintTag::SlideY => assert!(p.x == domain.x0 || p.x == domain.x1),
            ConstraintTag::Free => {}
        }
    }
}

#[test]
fn flat_optimum_is_unit_by_every_test() {
    let cfg = config(r#"{"field":{"id":"s1"},"n":4,"grid":{"nx":2,"ny":2}}"#);
    let out = optimize(&cfg, &ReportOptions::minimal()).unwrap();
    assert!(out.stats.e_final() < 1e-12);
    for m in 0..out.mesh.macros().len() {
        let r = unitness_report(&out.mesh, m, &out.field, &UnitnessOptions::default()).unwrap();
        assert!(r.qu1.pass, "macro {m}");
        assert_eq!(r.qu2.verdict, Verdict::Pass, "macro {m}");
    }
}

#[test]
fn exports_cover_every_subtriangle() {
    let cfg = config(r#"{"field":{"id":"s5"},"n":2,"grid":{"nx":2,"ny":2}}"#);
    let (mesh, _) = build_mesh(&cfg).unwrap();
    let vtk = export_vtk(&mesh, None).unwrap();
    assert!(vtk.contains(&format!("CELLS {} ", mesh.subtriangles().len())));
    let svg = export_svg(&mesh, None, &[]).unwrap();
    assert_eq!(svg.matches("<polygon").count(), mesh.subtriangles().len());
}
