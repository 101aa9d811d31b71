//! Legacy VTK and SVG figures of a subdivided mesh.

use std::fmt::Write as _;

use crate::mesh::SubdividedMesh;
use crate::{Error, Point, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Vtk,
    Svg,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vtk" => Ok(ExportFormat::Vtk),
            "svg" => Ok(ExportFormat::Svg),
            _ => Err(Error::InvalidArgument(format!(
                "unknown export format `{s}`"
            ))),
        }
    }
}

fn check(mesh: &SubdividedMesh, qualities: Option<&[f64]>) -> Result<()> {
    if mesh.subtriangles().is_empty() {
        return Err(Error::InvalidArgument("mesh has no elements".into()));
    }
    if qualities.is_some_and(|q| q.len() != mesh.subtriangles().len()) {
        return Err(Error::InvalidArgument(
            "one quality per subtriangle expected".into(),
        ));
    }
    Ok(())
}

/// ASCII legacy VTK unstructured grid with owner and, if given, quality cell data.
pub fn export_vtk(mesh: &SubdividedMesh, qualities: Option<&[f64]>) -> Result<String> {
    check(mesh, qualities)?;
    let tris = mesh.subtriangles();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(
        s,
        "isomesh N={} tiling={}",
        mesh.n(),
        mesh.tiling().as_str()
    );
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?} 0", p.x, p.y);
    }
    let _ = writeln!(s, "CELLS {} {}", tris.len(), 4 * tris.len());
    for t in tris {
        let [a, b, c] = t.vertices;
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    let _ = writeln!(s, "CELL_TYPES {}", tris.len());
    for _ in tris {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {}", tris.len());
    s.push_str("SCALARS owner int 1\nLOOKUP_TABLE default\n");
    for t in tris {
        let _ = writeln!(s, "{}", t.owner);
    }
    if let Some(q) = qualities {
        s.push_str("SCALARS quality double 1\nLOOKUP_TABLE default\n");
        for v in q {
            let _ = writeln!(s, "{:?}", v);
        }
    }
    Ok(s)
}

/// Piecewise-linear blue-to-yellow colormap on `[0, 1]`.
pub fn colormap(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.25, [59.0, 82.0, 139.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (0.75, [94.0, 201.0, 98.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let k = STOPS.iter().position(|s| s.0 >= t).unwrap_or(4).max(1);
    let (t0, c0) = STOPS[k - 1];
    let (t1, c1) = STOPS[k];
    let u = (t - t0) / (t1 - t0);
    let mix = |i: usize| (c0[i] + u * (c1[i] - c0[i])).round() as u8;
    (mix(0), mix(1), mix(2))
}

/// SVG figure: quality-colored subtriangles, bold macroedges and optional
/// geodesic overlays.
pub fn export_svg(
    mesh: &SubdividedMesh,
    qualities: Option<&[f64]>,
    overlays: &[Vec<Point>],
) -> Result<String> {
    check(mesh, qualities)?;
    let all = mesh.vertices.iter().chain(overlays.iter().flatten());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in all {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let size = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let scale = 800.0 / size;
    let pad = 10.0;
    let (w, h) = ((x1 - x0) * scale + 2.0 * pad, (y1 - y0) * scale + 2.0 * pad);
    let map = |p: &Point| ((p.x - x0) * scale + pad, (y1 - p.y) * scale + pad);
    let points = |pts: &mut dyn Iterator<Item = &Point>| {
        pts.map(|p| {
            let (x, y) = map(p);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    s.push_str("<g class=\"subtriangles\" stroke=\"#555\" stroke-width=\"0.4\">\n");
    for (k, t) in mesh.subtriangles().iter().enumerate() {
        let fill = match qualities {
            Some(q) => {
                let (r, g, b) = colormap(q[k]);
                format!("#{r:02x}{g:02x}{b:02x}")
            }
            None => "none".into(),
        };
        let pts = mesh.triangle_points(t);
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{fill}"/>"#,
            points(&mut pts.iter())
        );
    }
    s.push_str("</g>\n<g class=\"macroedges\" fill=\"none\" stroke=\"#000\" stroke-width=\"2\">\n");
    for e in mesh.macro_edges() {
        let pts: Vec<Point> = e.path.iter().map(|&v| mesh.vertices[v]).collect();
        let _ = writeln!(s, r#"<polyline points="{}"/>"#, points(&mut pts.iter()));
    }
    s.push_str("</g>\n");
    if !overlays.is_empty() {
        s.push_str("<g class=\"geodesics\" fill=\"none\" stroke=\"#e4202c\" stroke-width=\"1.2\" stroke-dasharray=\"4 3\">\n");
        for g in overlays {
            let _ = writeln!(s, r#"<polyline points="{}"/>"#, points(&mut g.iter()));
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{MacroMesh, Tiling};
    use crate::metric::Rect;

    fn mesh() -> SubdividedMesh {
        let m = MacroMesh::uniform_grid(Rect::new(0.0, 1.0, 0.0, 1.0), 1, 1).unwrap();
        SubdividedMesh::subdivide(&m, 2).unwrap()
    }

    #[test]
    fn vtk_layout() {
        let s = mesh();
        let q = vec![0.5; 8];
        let text = export_vtk(&s, Some(&q)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        assert_eq!(lines[4], "POINTS 9 double");
        assert!(text.contains("\nCELLS 8 32\n"));
        assert!(text.contains("\nCELL_TYPES 8\n"));
        assert!(text.contains("\nCELL_DATA 8\n"));
        assert!(text.contains("SCALARS quality double 1\nLOOKUP_TABLE default\n0.5\n"));
        assert_eq!(text.lines().filter(|l| *l == "5").count(), 8);
    }

    #[test]
    fn svg_has_one_overlay_per_geodesic() {
        let s = mesh();
        let overlays: Vec<Vec<Point>> = s
            .macro_edges()
            .iter()
            .map(|e| e.path.iter().map(|&v| s.vertices[v]).collect())
            .collect();
        let text = export_svg(&s, None, &overlays).unwrap();
        let geo = text.split("<g class=\"geodesics\"").nth(1).unwrap();
        assert_eq!(geo.matches("<polyline").count(), 5);
        assert_eq!(text.matches("<polygon").count(), 8);
        assert!(text.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_mesh_and_bad_format_are_errors() {
        let empty =
            SubdividedMesh::from_parts(1, Tiling::Right, vec![], vec![], vec![], vec![], vec![])
                .unwrap();
        assert!(export_vtk(&empty, None).is_err());
        assert!(export_svg(&empty, None, &[]).is_err());
        assert!("png".parse::<ExportFormat>().is_err());
        assert_eq!("VTK".parse::<ExportFormat>().unwrap(), ExportFormat::Vtk);
        assert!(export_vtk(&mesh(), Some(&[1.0])).is_err());
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), (68, 1, 84));
        assert_eq!(colormap(1.0), (253, 231, 37));
        assert_eq!(colormap(2.0), colormap(1.0));
    }
}
