//! Square-grid domains in doubled integer coordinates.
//!
//! A point `(x2, y2)` stands for `(x2/2, y2/2)`; the parity of the two
//! coordinates tells vertices, horizontal edges, vertical edges and faces apart.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Coord2 {
    pub x2: i32,
    pub y2: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Vertex,
    HorizontalEdge,
    VerticalEdge,
    Face,
}

impl Coord2 {
    pub const fn new(x2: i32, y2: i32) -> Self {
        Coord2 { x2, y2 }
    }

    pub fn kind(self) -> CellKind {
        match (self.x2.rem_euclid(2), self.y2.rem_euclid(2)) {
            (0, 0) => CellKind::Vertex,
            (1, 0) => CellKind::HorizontalEdge,
            (0, _) => CellKind::VerticalEdge,
            _ => CellKind::Face,
        }
    }

    pub fn is_edge(self) -> bool {
        matches!(self.kind(), CellKind::HorizontalEdge | CellKind::VerticalEdge)
    }

    pub fn is_face(self) -> bool {
        self.kind() == CellKind::Face
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Coord2::new(self.x2 + dx, self.y2 + dy)
    }

    pub fn step(self, d: Dir) -> Self {
        let (dx, dy) = d.delta();
        self.offset(dx, dy)
    }

    /// The point as a complex number in lattice units.
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x2 as f64 / 2.0, self.y2 as f64 / 2.0)
    }
}

// Row-major order: by y first, then x.
impl Ord for Coord2 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y2, self.x2).cmp(&(other.y2, other.x2))
    }
}

impl PartialOrd for Coord2 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Coord2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x2, self.y2)
    }
}

impl FromStr for Coord2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split(',').map(|t| t.trim().parse::<i32>());
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x2)), Some(Ok(y2)), None) => Ok(Coord2::new(x2, y2)),
            _ => Err(Error::InvalidArgument(format!("cannot parse coordinate {s:?}"))),
        }
    }
}

/// Lattice directions, in counterclockwise order starting east.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    E = 0,
    N = 1,
    W = 2,
    S = 3,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::E, Dir::N, Dir::W, Dir::S];

    pub fn from_index(i: i32) -> Dir {
        Dir::ALL[i.rem_euclid(4) as usize]
    }

    pub fn index(self) -> i32 {
        self as i32
    }

    /// Half-step offset in doubled coordinates.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Dir::E => (1, 0),
            Dir::N => (0, 1),
            Dir::W => (-1, 0),
            Dir::S => (0, -1),
        }
    }

    pub fn opposite(self) -> Dir {
        Dir::from_index(self.index() + 2)
    }

    /// Unit complex number pointing in this direction.
    pub fn unit(self) -> Complex64 {
        match self {
            Dir::E => Complex64::new(1.0, 0.0),
            Dir::N => Complex64::new(0.0, 1.0),
            Dir::W => Complex64::new(-1.0, 0.0),
            Dir::S => Complex64::new(0.0, -1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Top,
    Bottom,
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub edge: Coord2,
    pub side: Side,
    /// Outward unit normal in lattice units.
    pub normal: (i32, i32),
}

/// Unordered pair of adjacent faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DualEdge {
    pub a: Coord2,
    pub b: Coord2,
}

impl DualEdge {
    /// The primal edge crossed by this dual edge.
    pub fn crossing(&self) -> Coord2 {
        Coord2::new((self.a.x2 + self.b.x2) / 2, (self.a.y2 + self.b.y2) / 2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RectangleSpec {
    /// Number of vertex columns, |I|.
    pub width: usize,
    /// Number of vertex rows, N + 1.
    pub height: usize,
}

impl RectangleSpec {
    pub fn new(width: usize, height: usize) -> Self {
        RectangleSpec { width, height }
    }

    /// |I*|, the number of horizontal edges per row.
    pub fn columns(&self) -> usize {
        self.width - 1
    }

    /// N, the number of face rows.
    pub fn rows(&self) -> usize {
        self.height - 1
    }

    fn validate(&self) -> Result<()> {
        if self.width < 3 {
            return Err(Error::DimensionTooSmall(format!("width {} < 3", self.width)));
        }
        if self.height < 2 {
            return Err(Error::DimensionTooSmall(format!("height {} < 2", self.height)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutSpec {
    pub row: usize,
}

/// Placement of a rectangular domain: lower-left vertex and size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RectPlacement {
    pub x0: i32,
    pub y0: i32,
    pub spec: RectangleSpec,
}

impl RectPlacement {
    /// Horizontal edges of vertex row `y` (relative to the lower-left corner), left to right.
    pub fn row_edges(&self, y: usize) -> Vec<Coord2> {
        (0..self.spec.columns()).map(|j| Coord2::new(2 * (self.x0 + j as i32) + 1, 2 * (self.y0 + y as i32))).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Domain {
    faces: Vec<Coord2>,
    face_set: HashSet<Coord2>,
    edges: Vec<Coord2>,
    edge_index: HashMap<Coord2, usize>,
    boundary: Vec<BoundaryEdge>,
    boundary_index: HashMap<Coord2, usize>,
    dual_edges: Vec<DualEdge>,
    rect: Option<RectPlacement>,
}

pub fn face_edges(face: Coord2) -> [(Dir, Coord2); 4] {
    Dir::ALL.map(|d| (d, face.step(d)))
}

/// The two faces that may touch an edge: (above, below) or (right, left).
pub fn edge_neighbors(edge: Coord2) -> [Coord2; 2] {
    match edge.kind() {
        CellKind::HorizontalEdge => [edge.offset(0, 1), edge.offset(0, -1)],
        _ => [edge.offset(1, 0), edge.offset(-1, 0)],
    }
}

impl Domain {
    pub fn faces(&self) -> &[Coord2] {
        &self.faces
    }

    pub fn edges(&self) -> &[Coord2] {
        &self.edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn dual_edges(&self) -> &[DualEdge] {
        &self.dual_edges
    }

    pub fn dual_vertices(&self) -> &[Coord2] {
        &self.faces
    }

    pub fn rectangle(&self) -> Option<RectPlacement> {
        self.rect
    }

    pub fn contains_face(&self, f: Coord2) -> bool {
        self.face_set.contains(&f)
    }

    pub fn contains_edge(&self, e: Coord2) -> bool {
        self.edge_index.contains_key(&e)
    }

    pub fn edge_index(&self, e: Coord2) -> Option<usize> {
        self.edge_index.get(&e).copied()
    }

    pub fn boundary_side(&self, e: Coord2) -> Option<Side> {
        self.boundary_index.get(&e).map(|&i| self.boundary[i].side)
    }

    pub fn is_boundary(&self, e: Coord2) -> bool {
        self.boundary_index.contains_key(&e)
    }

    /// Faces of the domain adjacent to an edge.
    pub fn adjacent_faces(&self, e: Coord2) -> Vec<Coord2> {
        edge_neighbors(e).into_iter().filter(|f| self.contains_face(*f)).collect()
    }

    pub fn vertices(&self) -> BTreeSet<Coord2> {
        let mut v = BTreeSet::new();
        for f in &self.faces {
            for (dx, dy) in [(1, 1), (-1, 1), (1, -1), (-1, -1)] {
                v.insert(f.offset(dx, dy));
            }
        }
        v
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices().len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }
}

pub fn build_rectangle(spec: RectangleSpec) -> Result<Domain> {
    build_rectangle_at(spec, 0, 0)
}

/// Rectangle whose lower-left vertex sits at lattice point `(x0, y0)`.
pub fn build_rectangle_at(spec: RectangleSpec, x0: i32, y0: i32) -> Result<Domain> {
    spec.validate()?;
    let mut faces = Vec::new();
    for y in 0..spec.rows() as i32 {
        for x in 0..spec.columns() as i32 {
            faces.push(Coord2::new(2 * (x0 + x) + 1, 2 * (y0 + y) + 1));
        }
    }
    build_from_faces(&faces)
}

pub fn build_from_faces(faces: &[Coord2]) -> Result<Domain> {
    if faces.is_empty() {
        return Err(Error::DimensionTooSmall("no faces".into()));
    }
    let mut face_set = HashSet::new();
    for &f in faces {
        if !f.is_face() {
            return Err(Error::NotAFace(f));
        }
        if !face_set.insert(f) {
            return Err(Error::DuplicateFace(f));
        }
    }
    let mut sorted: Vec<Coord2> = faces.to_vec();
    sorted.sort();

    // edge-connectivity
    let mut seen = HashSet::from([sorted[0]]);
    let mut queue = VecDeque::from([sorted[0]]);
    while let Some(f) = queue.pop_front() {
        for d in Dir::ALL {
            let g = f.step(d).step(d);
            if face_set.contains(&g) && seen.insert(g) {
                queue.push_back(g);
            }
        }
    }
    if seen.len() != sorted.len() {
        return Err(Error::Disconnected);
    }

    let mut count: HashMap<Coord2, usize> = HashMap::new();
    for f in &sorted {
        for (_, e) in face_edges(*f) {
            *count.entry(e).or_default() += 1;
        }
    }
    let mut edges: Vec<Coord2> = count.keys().copied().collect();
    edges.sort();
    let edge_index = edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();

    let mut dual_edges = Vec::new();
    for f in &sorted {
        for d in [Dir::E, Dir::N] {
            let g = f.step(d).step(d);
            if face_set.contains(&g) {
                dual_edges.push(DualEdge { a: *f, b: g });
            }
        }
    }
    dual_edges.sort_by_key(|de| de.crossing());

    let mut domain = Domain {
        faces: sorted,
        face_set,
        edges,
        edge_index,
        boundary: Vec::new(),
        boundary_index: HashMap::new(),
        dual_edges,
        rect: None,
    };
    let chi = domain.euler_characteristic();
    if chi != 1 {
        return Err(Error::NotSimplyConnected(chi));
    }

    let mut bdry: Vec<BoundaryEdge> = domain
        .edges
        .iter()
        .filter(|e| count[e] == 1)
        .map(|&e| {
            let [first, _] = edge_neighbors(e);
            let interior_first = domain.contains_face(first);
            let side = match (e.kind(), interior_first) {
                (CellKind::HorizontalEdge, true) => Side::Bottom,
                (CellKind::HorizontalEdge, false) => Side::Top,
                (_, true) => Side::Left,
                (_, false) => Side::Right,
            };
            let normal = match side {
                Side::Bottom => (0, -1),
                Side::Top => (0, 1),
                Side::Left => (-1, 0),
                Side::Right => (1, 0),
            };
            BoundaryEdge { edge: e, side, normal }
        })
        .collect();
    bdry = order_boundary_cycle(bdry)?;
    domain.boundary_index = bdry.iter().enumerate().map(|(i, b)| (b.edge, i)).collect();
    domain.boundary = bdry;
    domain.rect = detect_rectangle(&domain);
    Ok(domain)
}

// Orders boundary edges counterclockwise (interior on the left).
fn order_boundary_cycle(edges: Vec<BoundaryEdge>) -> Result<Vec<BoundaryEdge>> {
    let ends = |b: &BoundaryEdge| -> (Coord2, Coord2) {
        let e = b.edge;
        match b.side {
            Side::Bottom => (e.offset(-1, 0), e.offset(1, 0)),
            Side::Top => (e.offset(1, 0), e.offset(-1, 0)),
            Side::Left => (e.offset(0, 1), e.offset(0, -1)),
            Side::Right => (e.offset(0, -1), e.offset(0, 1)),
        }
    };
    let mut by_start: HashMap<Coord2, Vec<usize>> = HashMap::new();
    for (i, b) in edges.iter().enumerate() {
        by_start.entry(ends(b).0).or_default().push(i);
    }
    if by_start.values().any(|v| v.len() != 1) {
        return Err(Error::BoundaryNotACycle);
    }
    let mut out = Vec::with_capacity(edges.len());
    let mut visited = vec![false; edges.len()];
    let mut cur = 0;
    loop {
        if visited[cur] {
            break;
        }
        visited[cur] = true;
        out.push(edges[cur]);
        let end = ends(&edges[cur]).1;
        match by_start.get(&end) {
            Some(v) => cur = v[0],
            None => return Err(Error::BoundaryNotACycle),
        }
    }
    if out.len() != edges.len() || cur != 0 {
        return Err(Error::BoundaryNotACycle);
    }
    Ok(out)
}

fn detect_rectangle(d: &Domain) -> Option<RectPlacement> {
    let xmin = d.faces.iter().map(|f| f.x2).min()?;
    let xmax = d.faces.iter().map(|f| f.x2).max()?;
    let ymin = d.faces.iter().map(|f| f.y2).min()?;
    let ymax = d.faces.iter().map(|f| f.y2).max()?;
    let cols = ((xmax - xmin) / 2 + 1) as usize;
    let rows = ((ymax - ymin) / 2 + 1) as usize;
    if cols * rows != d.faces.len() {
        return None;
    }
    Some(RectPlacement { x0: (xmin - 1) / 2, y0: (ymin - 1) / 2, spec: RectangleSpec::new(cols + 1, rows + 1) })
}

/// Splits a rectangle along the horizontal edges of vertex row `cut.row`.
///
/// Returns the lower piece, the upper piece and the shared edges, left to right.
pub fn split_domain(d: &Domain, cut: CutSpec) -> Result<(Domain, Domain, Vec<Coord2>)> {
    let rect = d.rectangle().ok_or_else(|| Error::InvalidCut("domain is not a rectangle".into()))?;
    let n = rect.spec.rows();
    if cut.row == 0 || cut.row >= n {
        return Err(Error::InvalidCut(format!("row {} outside (0, {})", cut.row, n)));
    }
    let lower = build_rectangle_at(RectangleSpec::new(rect.spec.width, cut.row + 1), rect.x0, rect.y0)?;
    let upper =
        build_rectangle_at(RectangleSpec::new(rect.spec.width, n - cut.row + 1), rect.x0, rect.y0 + cut.row as i32)?;
    Ok((lower, upper, rect.row_edges(cut.row)))
}

/// Serialized domain description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainSpec {
    Rectangle { width: usize, height: usize },
    Faces { faces: Vec<[i32; 2]> },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainSpec::Rectangle { width, height } => build_rectangle(RectangleSpec::new(*width, *height)),
            DomainSpec::Faces { faces } => {
                let f: Vec<Coord2> = faces.iter().map(|p| Coord2::new(p[0], p[1])).collect();
                build_from_faces(&f)
            }
        }
    }
}
