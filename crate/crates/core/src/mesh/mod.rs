//! Conforming triangulations of Ω and Ω \ D̄ with tagged boundary edges.

mod cdt;
pub mod checks;
mod io;

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{polygonalize, shoelace, CavityShape, DomainSpec, GeometryError, Point};
use crate::Real;

pub use cdt::{triangulate, triangulate_matched, triangulate_with, MatchedMeshes, MeshOptions};
pub use io::{read_mesh, write_mesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("minimum angle {0} exceeds the supported maximum of 33 degrees")]
    AngleTooLarge(f64),
    #[error("target size must be positive, got {0}")]
    BadSize(f64),
    #[error("cavity polygon vertex {0:?} coincides with an existing vertex")]
    DuplicateVertex([f64; 2]),
    #[error("quality unreachable: insertion budget of {budget} exhausted near ({x:.4}, {y:.4})")]
    QualityUnreachable { budget: usize, x: f64, y: f64 },
    #[error("mesh contract violated: {0}")]
    Contract(String),
    #[error("malformed mesh file: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Outer,
    Cavity,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Outer => "outer",
            Self::Cavity => "cavity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fluid,
    Inclusion,
}

/// Boundary edge oriented so that the meshed region lies on its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    pub vertices: Vec<Point<T>>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub boundary: Vec<BoundaryEdge>,
    /// Cavity polygon edges lying inside the mesh (cavity-free twin of a matched pair).
    pub interface: Vec<[usize; 2]>,
    pub h_max: T,
    pub generation: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport<T> {
    pub min_angle: T,
    pub max_angle: T,
    pub h_max: T,
    pub h_min: T,
    pub n_vertices: usize,
    pub n_triangles: usize,
}

/// Interior angles of a triangle in degrees.
pub fn triangle_angles<T: Real>(a: Point<T>, b: Point<T>, c: Point<T>) -> [T; 3] {
    let ang = |p: Point<T>, q: Point<T>, r: Point<T>| {
        let u = q - p;
        let v = r - p;
        u.cross(v).abs().atan2(u.dot(v)).to_degrees()
    };
    [ang(a, b, c), ang(b, c, a), ang(c, a, b)]
}

impl<T: Real> Mesh<T> {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t`.
    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.corners(t);
        (b - a).cross(c - a) * T::lit(0.5)
    }

    pub fn area(&self) -> T {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary.iter().any(|e| e.tag == tag)
    }

    pub fn boundary_edges(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary.iter().filter(move |e| e.tag == tag)
    }

    /// Unique undirected edges in first-seen order over the triangles.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, out.len()).is_none() {
                    out.push([key.0, key.1]);
                }
            }
        }
        out
    }

    fn edge_length_range(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for [a, b] in self.edges() {
            let l = self.vertices[a].dist(self.vertices[b]);
            lo = lo.min(l);
            hi = hi.max(l);
        }
        (lo, hi)
    }

    pub fn quality(&self) -> QualityReport<T> {
        quality(self)
    }

    /// Fluid triangles only, with vertices renumbered in increasing original order.
    /// Interface edges become cavity boundary edges. Also returns the map from new
    /// to original vertex indices.
    pub fn fluid_part(&self) -> (Mesh<T>, Vec<usize>) {
        let keep: Vec<usize> = (0..self.n_triangles())
            .filter(|&t| self.regions[t] == Region::Fluid)
            .collect();
        let mut used = vec![false; self.n_vertices()];
        for &t in &keep {
            for &v in &self.triangles[t] {
                used[v] = true;
            }
        }
        let mut new_index = vec![usize::MAX; self.n_vertices()];
        let mut old_index = Vec::new();
        for (v, &u) in used.iter().enumerate() {
            if u {
                new_index[v] = old_index.len();
                old_index.push(v);
            }
        }
        let map = |v: usize| new_index[v];
        let triangles: Vec<[usize; 3]> = keep
            .iter()
            .map(|&t| {
                let [a, b, c] = self.triangles[t];
                [map(a), map(b), map(c)]
            })
            .collect();
        let mut boundary: Vec<BoundaryEdge> = self
            .boundary
            .iter()
            .filter(|e| used[e.v[0]] && used[e.v[1]])
            .map(|e| BoundaryEdge {
                v: [map(e.v[0]), map(e.v[1])],
                tag: e.tag,
            })
            .collect();
        // interface edges are stored oriented with the fluid on their left
        boundary.extend(self.interface.iter().map(|&[a, b]| BoundaryEdge {
            v: [map(a), map(b)],
            tag: BoundaryTag::Cavity,
        }));
        let vertices: Vec<Point<T>> = old_index.iter().map(|&v| self.vertices[v]).collect();
        let mut mesh = Mesh {
            vertices,
            regions: vec![Region::Fluid; triangles.len()],
            triangles,
            boundary,
            interface: Vec::new(),
            h_max: T::zero(),
            generation: self.generation,
        };
        mesh.h_max = mesh.edge_length_range().1;
        (mesh, old_index)
    }

    /// Uniform red refinement: each triangle is split into four congruent children.
    pub fn refine(&self) -> Mesh<T> {
        refine(self)
    }

    /// Area enclosed by the cavity boundary loops (positive).
    pub fn cavity_polygon_area(&self) -> T {
        let mut s = T::zero();
        let edges = self
            .boundary
            .iter()
            .filter(|e| e.tag == BoundaryTag::Cavity)
            .map(|e| e.v)
            .chain(self.interface.iter().copied());
        for [a, b] in edges {
            s += self.vertices[a].cross(self.vertices[b]);
        }
        (s * T::lit(0.5)).abs()
    }

    /// Expected total triangle area: |Ω| minus the meshed cavity polygon.
    pub fn expected_area(&self, domain: &DomainSpec<T>) -> T {
        if self.has_tag(BoundaryTag::Cavity) {
            domain.area() - self.cavity_polygon_area()
        } else {
            domain.area()
        }
    }
}

pub fn quality<T: Real>(mesh: &Mesh<T>) -> QualityReport<T> {
    let mut min_angle = T::lit(180.0);
    let mut max_angle = T::zero();
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.corners(t);
        for ang in triangle_angles(a, b, c) {
            min_angle = min_angle.min(ang);
            max_angle = max_angle.max(ang);
        }
    }
    let (h_min, h_max) = mesh.edge_length_range();
    QualityReport {
        min_angle,
        max_angle,
        h_max,
        h_min,
        n_vertices: mesh.n_vertices(),
        n_triangles: mesh.n_triangles(),
    }
}

pub fn refine<T: Real>(mesh: &Mesh<T>) -> Mesh<T> {
    let mut vertices = mesh.vertices.clone();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point<T>>| -> usize {
        *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
            vertices.push(vertices[a].midpoint(vertices[b]));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    let mut regions = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        regions.extend([mesh.regions[t]; 4]);
    }
    let mut boundary = Vec::with_capacity(2 * mesh.boundary.len());
    for e in &mesh.boundary {
        let m = midpoint(e.v[0], e.v[1], &mut vertices);
        boundary.push(BoundaryEdge {
            v: [e.v[0], m],
            tag: e.tag,
        });
        boundary.push(BoundaryEdge {
            v: [m, e.v[1]],
            tag: e.tag,
        });
    }
    let mut interface = Vec::with_capacity(2 * mesh.interface.len());
    for &[a, b] in &mesh.interface {
        let m = midpoint(a, b, &mut vertices);
        interface.push([a, m]);
        interface.push([m, b]);
    }
    Mesh {
        vertices,
        triangles,
        regions,
        boundary,
        interface,
        h_max: mesh.h_max * T::lit(0.5),
        generation: mesh.generation + 1,
    }
}

/// Polygon used to mesh a cavity at target size `h`: curved shapes get
/// max(64, ⌈perimeter / h⌉) segments, polygons are kept as given.
pub fn cavity_polygon<T: Real>(shape: &CavityShape<T>, h: T) -> Result<Vec<Point<T>>, MeshError> {
    if !(h > T::zero()) {
        return Err(MeshError::BadSize(h.as_f64()));
    }
    let perimeter = match shape {
        CavityShape::Circle { radius, .. } => T::TAU() * *radius,
        CavityShape::Ellipse { a, b, .. } => {
            // Ramanujan's approximation
            let (a, b) = (*a, *b);
            let three = T::lit(3.0);
            T::PI() * (three * (a + b) - ((three * a + b) * (a + three * b)).sqrt())
        }
        CavityShape::Polygon { .. } => return Ok(polygonalize(shape, 3)?),
    };
    let n = (perimeter / h).ceil().to_usize().unwrap_or(64).max(64);
    Ok(polygonalize(shape, n)?)
}

/// Closed boundary loops of one tag, each as an ordered vertex cycle.
pub fn boundary_loops<T: Real>(mesh: &Mesh<T>, tag: BoundaryTag) -> Result<Vec<Vec<usize>>, MeshError> {
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut starts = Vec::new();
    for e in mesh.boundary_edges(tag) {
        if next.insert(e.v[0], e.v[1]).is_some() {
            return Err(MeshError::Contract(format!(
                "vertex {} starts two {} boundary edges",
                e.v[0],
                tag.as_str()
            )));
        }
        starts.push(e.v[0]);
    }
    let mut visited: HashMap<usize, bool> = HashMap::new();
    let mut loops = Vec::new();
    for s in starts {
        if visited.contains_key(&s) {
            continue;
        }
        let mut cycle = vec![s];
        visited.insert(s, true);
        let mut v = s;
        loop {
            let Some(&w) = next.get(&v) else {
                return Err(MeshError::Contract(format!(
                    "{} boundary open at vertex {v}",
                    tag.as_str()
                )));
            };
            if w == s {
                break;
            }
            if visited.insert(w, true).is_some() {
                return Err(MeshError::Contract(format!(
                    "{} boundary loop revisits vertex {w}",
                    tag.as_str()
                )));
            }
            cycle.push(w);
            v = w;
        }
        loops.push(cycle);
    }
    Ok(loops)
}

/// Signed area enclosed by a vertex cycle.
pub fn loop_area<T: Real>(mesh: &Mesh<T>, cycle: &[usize]) -> T {
    let pts: Vec<Point<T>> = cycle.iter().map(|&v| mesh.vertices[v]).collect();
    shoelace(&pts)
}
