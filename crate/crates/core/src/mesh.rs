//! Macro triangulations and their uniform N x N subdivision.
//!
//! Macrotriangles are stored with the vertex opposite the square's diagonal
//! first, so that vertex 0 sits at the right angle of the reference triangle
//! `(0,0), (1,0), (0,1)`. Each macrotriangle carries a barycentric lattice
//! `(i, j)`, `i + j <= N`, mapped to `a + i/N (b - a) + j/N (c - a)`.
//! Subtriangles keep the same orientation convention, so every subtriangle
//! is homologous to the ideal triangle with its vertices in stored order.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::metric::{rotation, Rect};
use crate::{Error, Point, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tiling {
    Equilateral,
    Right,
}

impl Tiling {
    /// Vertices of the ideal triangle, right angle first for `Right`.
    pub fn ideal(self) -> [Point; 3] {
        match self {
            Tiling::Equilateral => [
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.5, 0.75f64.sqrt()),
            ],
            Tiling::Right => [
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
        }
    }

    /// Inner angles of the ideal triangle at its three vertices.
    pub fn ideal_angles(self) -> [f64; 3] {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};
        match self {
            Tiling::Equilateral => [FRAC_PI_3; 3],
            Tiling::Right => [FRAC_PI_2, FRAC_PI_4, FRAC_PI_4],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tiling::Equilateral => "equilateral",
            Tiling::Right => "right",
        }
    }
}

impl std::str::FromStr for Tiling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equilateral" => Ok(Tiling::Equilateral),
            "right" => Ok(Tiling::Right),
            _ => Err(Error::InvalidArgument(format!("unknown tiling `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    Unit,
    Leg,
    Hypotenuse,
}

impl EdgeClass {
    /// Ideal length of an edge of this class on the unit-scale tiling.
    pub fn ideal_length(self) -> f64 {
        match self {
            EdgeClass::Unit | EdgeClass::Leg => 1.0,
            EdgeClass::Hypotenuse => SQRT_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeClass::Unit => "unit",
            EdgeClass::Leg => "leg",
            EdgeClass::Hypotenuse => "hypotenuse",
        }
    }
}

impl std::str::FromStr for EdgeClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(EdgeClass::Unit),
            "leg" => Ok(EdgeClass::Leg),
            "hypotenuse" => Ok(EdgeClass::Hypotenuse),
            _ => Err(Error::InvalidArgument(format!("unknown edge class `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintTag {
    Free,
    Fixed,
    /// Moves along x only (lies on a boundary `y = const`).
    SlideX,
    /// Moves along y only (lies on a boundary `x = const`).
    SlideY,
}

impl ConstraintTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintTag::Free => "free",
            ConstraintTag::Fixed => "fixed",
            ConstraintTag::SlideX => "slide_x",
            ConstraintTag::SlideY => "slide_y",
        }
    }

    /// Zero the gradient components this tag forbids.
    pub fn project(self, g: &mut Point) {
        match self {
            ConstraintTag::Free => {}
            ConstraintTag::Fixed => *g = Point::zeros(),
            ConstraintTag::SlideX => g.y = 0.0,
            ConstraintTag::SlideY => g.x = 0.0,
        }
    }
}

impl std::str::FromStr for ConstraintTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(ConstraintTag::Free),
            "fixed" => Ok(ConstraintTag::Fixed),
            "slide_x" => Ok(ConstraintTag::SlideX),
            "slide_y" => Ok(ConstraintTag::SlideY),
            _ => Err(Error::InvalidArgument(format!("unknown constraint `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    #[default]
    Free,
    PinCorners,
    SlideBoundary,
}

/// Signed Euclidean area of a triangle, positive for counter-clockwise order.
pub fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

#[derive(Clone, Debug)]
pub struct MacroMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: BTreeSet<(usize, usize)>,
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl MacroMesh {
    /// Uniform `nx x ny` grid of squares, each split along its
    /// lower-left to upper-right diagonal.
    pub fn uniform_grid(domain: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("grid needs nx, ny >= 1".into()));
        }
        let (w, h) = (domain.width(), domain.height());
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "degenerate rectangle {domain:?}"
            )));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // Pin the last row/column to the exact bounds.
                let x = if i == nx {
                    domain.x1
                } else {
                    domain.x0 + w * i as f64 / nx as f64
                };
                let y = if j == ny {
                    domain.y1
                } else {
                    domain.y0 + h * j as f64 / ny as f64
                };
                vertices.push(Point::new(x, y));
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([v10, v11, v00]);
                triangles.push([v01, v00, v11]);
            }
        }
        let mut boundary_edges = BTreeSet::new();
        for i in 0..nx {
            boundary_edges.insert(sorted_pair(id(i, 0), id(i + 1, 0)));
            boundary_edges.insert(sorted_pair(id(i, ny), id(i + 1, ny)));
        }
        for j in 0..ny {
            boundary_edges.insert(sorted_pair(id(0, j), id(0, j + 1)));
            boundary_edges.insert(sorted_pair(id(nx, j), id(nx, j + 1)));
        }
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
        })
    }

    pub fn single_triangle(a: Point, b: Point, c: Point) -> Result<Self> {
        if signed_area(&a, &b, &c) <= 0.0 {
            return Err(Error::InvalidArgument(
                "triangle must be counter-clockwise".into(),
            ));
        }
        Ok(Self {
            vertices: vec![a, b, c],
            triangles: vec![[0, 1, 2]],
            boundary_edges: [(0, 1), (1, 2), (0, 2)].into_iter().collect(),
        })
    }

    pub fn incident_triangle_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                counts[v] += 1;
            }
        }
        counts
    }
}

/// Lattice coordinates `(i, j)` of a point of the barycentric subgrid.
pub type LatticePoint = (usize, usize);

pub fn lattice_len(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

pub fn lattice_index(n: usize, (i, j): LatticePoint) -> usize {
    j * (n + 1) - j * j.saturating_sub(1) / 2 + i
}

/// The N^2 subtriangles of the lattice, in local index order.
pub fn lattice_triangles(n: usize) -> Vec<[LatticePoint; 3]> {
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n - j {
            out.push([(i, j), (i + 1, j), (i, j + 1)]);
            if i + j + 2 <= n {
                out.push([(i + 1, j + 1), (i, j + 1), (i + 1, j)]);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubTriangle {
    pub vertices: [usize; 3],
    pub owner: usize,
    /// Index into [`lattice_triangles`].
    pub local: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubEdge {
    pub vertices: [usize; 2],
    pub class: EdgeClass,
    /// Parallel to the hypotenuse of the reference lattice.
    pub diagonal: bool,
}

/// A macroedge as the chain of subvertices from one corner to the other.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacroEdge {
    pub path: Vec<usize>,
    pub class: EdgeClass,
}

/// Macrotriangulation refined into N^2 subtriangles per macrotriangle.
///
/// Connectivity is fixed once built; only `vertices` moves.
#[derive(Clone, Debug)]
pub struct SubdividedMesh {
    n: usize,
    tiling: Tiling,
    pub vertices: Vec<Point>,
    pub constraints: Vec<ConstraintTag>,
    macros: Vec<[usize; 3]>,
    subtriangles: Vec<SubTriangle>,
    subedges: Vec<SubEdge>,
    lattice: Vec<Vec<usize>>,
}

#[derive(Hash, PartialEq, Eq)]
enum VertexKey {
    Corner(usize),
    Edge(usize, usize, usize),
    Interior(usize, usize, usize),
}

impl SubdividedMesh {
    /// Uniform barycentric subdivision with shared subvertices on macroedges.
    /// Macro vertex `v` keeps subvertex id `v`. All edges start as `Unit`.
    pub fn subdivide(mesh: &MacroMesh, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "subdivision count must be >= 1".into(),
            ));
        }
        let mut vertices = mesh.vertices.clone();
        let mut ids: HashMap<VertexKey, usize> = (0..vertices.len())
            .map(|v| (VertexKey::Corner(v), v))
            .collect();
        let mut lattice = Vec::with_capacity(mesh.triangles.len());
        let nf = n as f64;
        for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
            let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
            let mut table = vec![usize::MAX; lattice_len(n)];
            for j in 0..=n {
                for i in 0..=n - j {
                    let key = match (i, j) {
                        (0, 0) => VertexKey::Corner(a),
                        (i, 0) if i == n => VertexKey::Corner(b),
                        (0, j) if j == n => VertexKey::Corner(c),
                        (i, 0) => edge_key(a, b, i, n),
                        (0, j) => edge_key(a, c, j, n),
                        (i, j) if i + j == n => edge_key(b, c, j, n),
                        (i, j) => VertexKey::Interior(t, i, j),
                    };
                    let next = vertices.len();
                    let id = *ids.entry(key).or_insert(next);
                    if id == next {
                        let (u, w) = (i as f64 / nf, j as f64 / nf);
                        vertices.push(pa + (pb - pa) * u + (pc - pa) * w);
                    }
                    table[lattice_index(n, (i, j))] = id;
                }
            }
            lattice.push(table);
        }
        let macros = mesh.triangles.clone();
        let constraints = vec![ConstraintTag::Free; vertices.len()];
        let subtriangles = build_subtriangles(n, &lattice);
        let subedges = build_subedges(n, &lattice);
        Ok(Self {
            n,
            tiling: Tiling::Equilateral,
            vertices,
            constraints,
            macros,
            subtriangles,
            subedges,
            lattice,
        })
    }

    /// Reassemble a mesh from stored connectivity, checking it against the
    /// lattice structure implied by each subtriangle's local index.
    pub fn from_parts(
        n: usize,
        tiling: Tiling,
        vertices: Vec<Point>,
        constraints: Vec<ConstraintTag>,
        macros: Vec<[usize; 3]>,
        subtriangles: Vec<SubTriangle>,
        subedges: Vec<SubEdge>,
    ) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(msg);
        if n == 0 {
            return Err(bad("subdivision count must be >= 1".into()));
        }
        if constraints.len() != vertices.len() {
            return Err(bad("constraint count differs from vertex count".into()));
        }
        if subtriangles.len() != macros.len() * n * n {
            return Err(bad(format!(
                "expected {} subtriangles, found {}",
                macros.len() * n * n,
                subtriangles.len()
            )));
        }
        let local = lattice_triangles(n);
        let mut lattice = vec![vec![usize::MAX; lattice_len(n)]; macros.len()];
        for st in &subtriangles {
            let pts = local
                .get(st.local)
                .ok_or_else(|| bad(format!("local index {} out of range", st.local)))?;
            let table = lattice
                .get_mut(st.owner)
                .ok_or_else(|| bad(format!("owner {} out of range", st.owner)))?;
            for (k, &lp) in pts.iter().enumerate() {
                let v = st.vertices[k];
                if v >= vertices.len() {
                    return Err(bad(format!("vertex {v} out of range")));
                }
                let slot = &mut table[lattice_index(n, lp)];
                if *slot != usize::MAX && *slot != v {
                    return Err(bad(format!("inconsistent lattice in macro {}", st.owner)));
                }
                *slot = v;
            }
        }
        for (m, corners) in macros.iter().enumerate() {
            let t = &lattice[m];
            let expect = [
                t[lattice_index(n, (0, 0))],
                t[lattice_index(n, (n, 0))],
                t[lattice_index(n, (0, n))],
            ];
            if expect != *corners {
                return Err(bad(format!(
                    "macro {m} corners do not match its subtriangles"
                )));
            }
        }
        let rebuilt = build_subedges(n, &lattice);
        let stored: BTreeSet<(usize, usize)> = subedges
            .iter()
            .map(|e| sorted_pair(e.vertices[0], e.vertices[1]))
            .collect();
        let expected: BTreeSet<(usize, usize)> = rebuilt
            .iter()
            .map(|e| sorted_pair(e.vertices[0], e.vertices[1]))
            .collect();
        if stored != expected || stored.len() != subedges.len() {
            return Err(bad("subedges do not match subtriangle connectivity".into()));
        }
        let diag: HashMap<(usize, usize), bool> = rebuilt
            .iter()
            .map(|e| (sorted_pair(e.vertices[0], e.vertices[1]), e.diagonal))
            .collect();
        let subedges = subedges
            .into_iter()
            .map(|e| SubEdge {
                diagonal: diag[&sorted_pair(e.vertices[0], e.vertices[1])],
                ..e
            })
            .collect();
        Ok(Self {
            n,
            tiling,
            vertices,
            constraints,
            macros,
            subtriangles,
            subedges,
            lattice,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tiling(&self) -> Tiling {
        self.tiling
    }

    pub fn macros(&self) -> &[[usize; 3]] {
        &self.macros
    }

    pub fn subtriangles(&self) -> &[SubTriangle] {
        &self.subtriangles
    }

    pub fn subedges(&self) -> &[SubEdge] {
        &self.subedges
    }

    pub fn lattice_vertex(&self, macro_id: usize, p: LatticePoint) -> usize {
        self.lattice[macro_id][lattice_index(self.n, p)]
    }

    pub fn triangle_points(&self, t: &SubTriangle) -> [Point; 3] {
        t.vertices.map(|v| self.vertices[v])
    }

    /// Assign edge classes for the given ideal tiling. Classes derive from
    /// the lattice and are unaffected by later vertex motion.
    pub fn classify_edges(&mut self, tiling: Tiling) {
        self.tiling = tiling;
        for e in &mut self.subedges {
            e.class = match (tiling, e.diagonal) {
                (Tiling::Equilateral, _) => EdgeClass::Unit,
                (Tiling::Right, false) => EdgeClass::Leg,
                (Tiling::Right, true) => EdgeClass::Hypotenuse,
            };
        }
    }

    pub fn rotate(&mut self, theta: f64, center: Point) {
        if theta == 0.0 {
            return;
        }
        let r = rotation(theta);
        for p in &mut self.vertices {
            *p = center + r * (*p - center);
        }
    }

    /// Number of subtriangles sharing each subedge, in subedge order.
    pub fn subedge_incidence(&self) -> Vec<usize> {
        let index: HashMap<(usize, usize), usize> = self
            .subedges
            .iter()
            .enumerate()
            .map(|(k, e)| (sorted_pair(e.vertices[0], e.vertices[1]), k))
            .collect();
        let mut counts = vec![0; self.subedges.len()];
        for t in &self.subtriangles {
            let v = t.vertices;
            for k in 0..3 {
                counts[index[&sorted_pair(v[k], v[(k + 1) % 3])]] += 1;
            }
        }
        counts
    }

    pub fn boundary_vertices(&self) -> BTreeSet<usize> {
        self.subedge_incidence()
            .iter()
            .zip(&self.subedges)
            .filter(|(&c, _)| c == 1)
            .flat_map(|(_, e)| e.vertices)
            .collect()
    }

    /// Tag boundary subvertices of a mesh built on `domain`.
    pub fn apply_constraint_mode(&mut self, mode: ConstraintMode, domain: &Rect) {
        self.constraints.fill(ConstraintTag::Free);
        if mode == ConstraintMode::Free {
            return;
        }
        let tol = 1e-9 * domain.width().max(domain.height());
        for v in self.boundary_vertices() {
            let p = self.vertices[v];
            let on_x = (p.x - domain.x0).abs() < tol || (p.x - domain.x1).abs() < tol;
            let on_y = (p.y - domain.y0).abs() < tol || (p.y - domain.y1).abs() < tol;
            self.constraints[v] = match (mode, on_x, on_y) {
                (_, true, true) => ConstraintTag::Fixed,
                (ConstraintMode::SlideBoundary, true, false) => ConstraintTag::SlideY,
                (ConstraintMode::SlideBoundary, false, true) => ConstraintTag::SlideX,
                _ => ConstraintTag::Free,
            };
        }
    }

    /// Unique macroedges with their subvertex chains.
    pub fn macro_edges(&self) -> Vec<MacroEdge> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for m in 0..self.macros.len() {
            for path in self.macro_triangle_edges(m) {
                let key = sorted_pair(path[0], *path.last().unwrap());
                if seen.insert(key) {
                    let class = self.edge_class_between(path[0], path[1]);
                    out.push(MacroEdge { path, class });
                }
            }
        }
        out
    }

    /// The three edge chains of a macrotriangle: a->b, b->c, c->a.
    pub fn macro_triangle_edges(&self, m: usize) -> [Vec<usize>; 3] {
        let n = self.n;
        let v = |p: LatticePoint| self.lattice_vertex(m, p);
        [
            (0..=n).map(|i| v((i, 0))).collect(),
            (0..=n).map(|j| v((n - j, j))).collect(),
            (0..=n).map(|j| v((0, n - j))).collect(),
        ]
    }

    fn edge_class_between(&self, a: usize, b: usize) -> EdgeClass {
        let key = sorted_pair(a, b);
        self.subedges
            .iter()
            .find(|e| sorted_pair(e.vertices[0], e.vertices[1]) == key)
            .map(|e| e.class)
            .unwrap_or(EdgeClass::Unit)
    }
}

fn edge_key(a: usize, b: usize, k: usize, n: usize) -> VertexKey {
    if a < b {
        VertexKey::Edge(a, b, k)
    } else {
        VertexKey::Edge(b, a, n - k)
    }
}

fn build_subtriangles(n: usize, lattice: &[Vec<usize>]) -> Vec<SubTriangle> {
    let local = lattice_triangles(n);
    let mut out = Vec::with_capacity(lattice.len() * n * n);
    for (owner, table) in lattice.iter().enumerate() {
        for (k, pts) in local.iter().enumerate() {
            out.push(SubTriangle {
                vertices: pts.map(|p| table[lattice_index(n, p)]),
                owner,
                local: k,
            });
        }
    }
    out
}

fn build_subedges(n: usize, lattice: &[Vec<usize>]) -> Vec<SubEdge> {
    let local = lattice_triangles(n);
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for table in lattice {
        for pts in &local {
            for k in 0..3 {
                let (p, q) = (pts[k], pts[(k + 1) % 3]);
                let (a, b) = (table[lattice_index(n, p)], table[lattice_index(n, q)]);
                if seen.insert(sorted_pair(a, b), ()).is_none() {
                    out.push(SubEdge {
                        vertices: [a, b],
                        class: EdgeClass::Unit,
                        diagonal: p.0 != q.0 && p.1 != q.1,
                    });
                }
            }
        }
    }
    out
}

/// Window `[1/sqrt2, sqrt2]` for homologous edge length ratios.
pub const EDGE_RATIO_WINDOW: (f64, f64) = (FRAC_1_SQRT_2, SQRT_2);
