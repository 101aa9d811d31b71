//! Versioned plain-text mesh format.
//!
//! ```text
//! isomesh-mesh 1
//! SUBDIVISION <n>
//! TILING <equilateral|right>
//! VERTICES <count>
//! <id> <x> <y> <constraint>
//! MACROS <count>
//! <id> <v1> <v2> <v3>
//! SUBTRIS <count>
//! <id> <owner> <local> <v1> <v2> <v3>
//! SUBEDGES <count>
//! <id> <v1> <v2> <class>
//! END
//! ```
//!
//! Coordinates use the shortest representation that parses back to the
//! same `f64`, so write, read, write is byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::{SubEdge, SubTriangle, SubdividedMesh};
use crate::{Error, Point, Result};

pub const FORMAT_HEADER: &str = "isomesh-mesh 1";

pub fn write_mesh(mesh: &SubdividedMesh) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "{FORMAT_HEADER}");
    let _ = writeln!(s, "SUBDIVISION {}", mesh.n());
    let _ = writeln!(s, "TILING {}", mesh.tiling().as_str());
    let _ = writeln!(s, "VERTICES {}", mesh.vertices.len());
    for (i, (p, c)) in mesh.vertices.iter().zip(&mesh.constraints).enumerate() {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidArgument(format!("vertex {i} is not finite")));
        }
        let _ = writeln!(s, "{i} {:?} {:?} {}", p.x, p.y, c.as_str());
    }
    let _ = writeln!(s, "MACROS {}", mesh.macros().len());
    for (i, [a, b, c]) in mesh.macros().iter().enumerate() {
        let _ = writeln!(s, "{i} {a} {b} {c}");
    }
    let _ = writeln!(s, "SUBTRIS {}", mesh.subtriangles().len());
    for (i, t) in mesh.subtriangles().iter().enumerate() {
        let [a, b, c] = t.vertices;
        let _ = writeln!(s, "{i} {} {} {a} {b} {c}", t.owner, t.local);
    }
    let _ = writeln!(s, "SUBEDGES {}", mesh.subedges().len());
    for (i, e) in mesh.subedges().iter().enumerate() {
        let [a, b] = e.vertices;
        let _ = writeln!(s, "{i} {a} {b} {}", e.class.as_str());
    }
    s.push_str("END\n");
    Ok(s)
}

pub fn save_mesh(mesh: &SubdividedMesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh(mesh)?)?;
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<SubdividedMesh> {
    read_mesh(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    /// Next non-blank, non-comment line split into fields.
    fn next(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            return Ok(l.split_whitespace().collect());
        }
        Err(self.err("unexpected end of file"))
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.err(format!("invalid {what} `{s}`")))
    }

    fn keyword(&mut self, key: &str) -> Result<usize> {
        let f = self.next()?;
        match f.as_slice() {
            [k, v] if *k == key => self.parse(v, "count"),
            _ => Err(self.err(format!("expected `{key} <value>`"))),
        }
    }

    /// A section row with its leading id checked against `expected`.
    fn row(&mut self, expected: usize, width: usize) -> Result<Vec<&'a str>> {
        let f = self.next()?;
        if f.len() != width {
            return Err(self.err(format!("expected {width} fields, found {}", f.len())));
        }
        let id: usize = self.parse(f[0], "id")?;
        if id != expected {
            return Err(self.err(format!("expected id {expected}, found {id}")));
        }
        Ok(f)
    }
}

pub fn read_mesh(text: &str) -> Result<SubdividedMesh> {
    let mut r = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = r.next()?.join(" ");
    if header != FORMAT_HEADER {
        return Err(r.err(format!("unsupported header `{header}`")));
    }
    let n = r.keyword("SUBDIVISION")?;
    let f = r.next()?;
    let tiling = match f.as_slice() {
        ["TILING", t] => t
            .parse()
            .map_err(|_| r.err(format!("unknown tiling `{t}`")))?,
        _ => return Err(r.err("expected `TILING <name>`")),
    };

    let count = r.keyword("VERTICES")?;
    let mut vertices = Vec::with_capacity(count);
    let mut constraints = Vec::with_capacity(count);
    for i in 0..count {
        let f = r.row(i, 4)?;
        let x: f64 = r.parse(f[1], "coordinate")?;
        let y: f64 = r.parse(f[2], "coordinate")?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(r.err("coordinates must be finite"));
        }
        vertices.push(Point::new(x, y));
        constraints.push(
            f[3].parse()
                .map_err(|_| r.err(format!("unknown constraint `{}`", f[3])))?,
        );
    }

    let count = r.keyword("MACROS")?;
    let mut macros = Vec::with_capacity(count);
    for i in 0..count {
        let f = r.row(i, 4)?;
        macros.push([
            r.parse(f[1], "vertex")?,
            r.parse(f[2], "vertex")?,
            r.parse(f[3], "vertex")?,
        ]);
    }

    let count = r.keyword("SUBTRIS")?;
    let mut subtriangles = Vec::with_capacity(count);
    for i in 0..count {
        let f = r.row(i, 6)?;
        subtriangles.push(SubTriangle {
            owner: r.parse(f[1], "owner")?,
            local: r.parse(f[2], "local index")?,
            vertices: [
                r.parse(f[3], "vertex")?,
                r.parse(f[4], "vertex")?,
                r.parse(f[5], "vertex")?,
            ],
        });
    }

    let count = r.keyword("SUBEDGES")?;
    let mut subedges = Vec::with_capacity(count);
    for i in 0..count {
        let f = r.row(i, 4)?;
        subedges.push(SubEdge {
            vertices: [r.parse(f[1], "vertex")?, r.parse(f[2], "vertex")?],
            class: f[3]
                .parse()
                .map_err(|_| r.err(format!("unknown edge class `{}`", f[3])))?,
            diagonal: false,
        });
    }
    if r.next()? != ["END"] {
        return Err(r.err("expected END"));
    }
    SubdividedMesh::from_parts(
        n,
        tiling,
        vertices,
        constraints,
        macros,
        subtriangles,
        subedges,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{ConstraintMode, MacroMesh, Tiling};
    use crate::metric::Rect;
    use proptest::prelude::*;

    fn sample(n: usize, tiling: Tiling) -> SubdividedMesh {
        let d = Rect::new(-1.0, 1.0, 0.0, 1.0);
        let m = MacroMesh::uniform_grid(d, 2, 1).unwrap();
        let mut s = SubdividedMesh::subdivide(&m, n).unwrap();
        s.classify_edges(tiling);
        s.apply_constraint_mode(ConstraintMode::SlideBoundary, &d);
        s
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for tiling in [Tiling::Equilateral, Tiling::Right] {
            let mut s = sample(3, tiling);
            s.vertices[7] += Point::new(0.1, 1e-17);
            let a = write_mesh(&s).unwrap();
            let back = read_mesh(&a).unwrap();
            assert_eq!(write_mesh(&back).unwrap(), a);
            assert_eq!(back.vertices, s.vertices);
            assert_eq!(back.constraints, s.constraints);
            assert_eq!(back.subedges(), s.subedges());
            assert_eq!(back.tiling(), tiling);
        }
    }

    #[test]
    fn header_and_sections() {
        let text = write_mesh(&sample(1, Tiling::Right)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "isomesh-mesh 1");
        assert_eq!(lines[1], "SUBDIVISION 1");
        assert_eq!(lines[2], "TILING right");
        assert_eq!(lines[3], "VERTICES 6");
        assert!(text.contains("\nMACROS 4\n"));
        assert!(text.contains("\nSUBTRIS 4\n"));
        assert!(text.contains("\nSUBEDGES 9\n"));
        assert!(text.ends_with("END\n"));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = write_mesh(&sample(2, Tiling::Equilateral)).unwrap();
        let noisy = text.replace("MACROS", "\n# macro triangles\nMACROS");
        assert_eq!(write_mesh(&read_mesh(&noisy).unwrap()).unwrap(), text);
    }

    #[test]
    fn malformed_files_report_line_numbers() {
        let text = write_mesh(&sample(1, Tiling::Equilateral)).unwrap();
        let cases = [
            (text.replace("isomesh-mesh 1", "isomesh-mesh 2"), 1),
            (text.replace("TILING equilateral", "TILING square"), 3),
            (text.replacen(" fixed", " stuck", 1), 5),
            (text.replace("END\n", ""), 0),
        ];
        for (bad, line) in cases {
            match read_mesh(&bad) {
                Err(Error::Parse { line: l, .. }) => {
                    if line > 0 {
                        assert_eq!(l, line, "{bad}");
                    }
                }
                other => panic!("expected parse error, got {other:?}"),
            }
        }
        // Connectivity that disagrees with the lattice is caught on assembly.
        let swapped = text.replacen("SUBEDGES 9\n0 ", "SUBEDGES 9\n0 5 ", 1);
        assert!(read_mesh(&swapped).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_coordinates_round_trip(
            n in 1usize..4,
            xs in prop::collection::vec(-1e6f64..1e6, 64),
            right in any::<bool>(),
        ) {
            let tiling = if right { Tiling::Right } else { Tiling::Equilateral };
            let mut s = sample(n, tiling);
            for (v, x) in s.vertices.iter_mut().zip(xs.chunks(2)) {
                *v = Point::new(x[0], x[1]);
            }
            let a = write_mesh(&s).unwrap();
            let b = write_mesh(&read_mesh(&a).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
