//! Constrained Delaunay triangulation of the square with an optional cavity
//! polygon, refined Ruppert-style (segment splitting on encroachment,
//! circumcenter insertion) until every triangle meets the angle and size bounds.

use std::collections::VecDeque;

use log::debug;

use super::{BoundaryEdge, BoundaryTag, Mesh, MeshError, Region};
use crate::geometry::{incircle, orient, shoelace, CavityShape, DomainSpec, GeometryError, Point};
use crate::Real;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions<T> {
    pub h_target: T,
    /// Degrees, at most 33.
    pub min_angle: T,
    /// Insertion budget as a multiple of the expected triangle count.
    pub budget_factor: usize,
    /// Split triangles whose three vertices all lie on the Dirichlet boundary,
    /// which would otherwise carry spurious Taylor-Hood pressure modes.
    pub interior_vertex_per_triangle: bool,
}

impl<T: Real> MeshOptions<T> {
    pub fn new(h_target: T) -> Self {
        Self {
            h_target,
            min_angle: T::lit(25.0),
            budget_factor: 20,
            interior_vertex_per_triangle: true,
        }
    }

    pub fn with_min_angle(mut self, deg: T) -> Self {
        self.min_angle = deg;
        self
    }
}

/// A full-domain mesh in which the cavity polygon is an internal interface,
/// together with its fluid part. Both share every vertex outside D.
#[derive(Debug, Clone)]
pub struct MatchedMeshes<T> {
    pub full: Mesh<T>,
    pub fluid: Mesh<T>,
    /// Fluid vertex index to full-mesh vertex index.
    pub fluid_to_full: Vec<usize>,
}

/// Mesh of Ω, or of Ω \ D̄ when a cavity polygon is given.
pub fn triangulate<T: Real>(
    domain: &DomainSpec<T>,
    cavity: Option<&[Point<T>]>,
    h_target: T,
    min_angle: T,
) -> Result<Mesh<T>, MeshError> {
    let opts = MeshOptions {
        min_angle,
        interior_vertex_per_triangle: false,
        ..MeshOptions::new(h_target)
    };
    triangulate_with(domain, cavity, &opts)
}

pub fn triangulate_with<T: Real>(
    domain: &DomainSpec<T>,
    cavity: Option<&[Point<T>]>,
    opts: &MeshOptions<T>,
) -> Result<Mesh<T>, MeshError> {
    let b = Builder::build(domain, cavity, opts, false)?;
    let full = b.into_mesh();
    if cavity.is_some() {
        Ok(full.fluid_part().0)
    } else {
        Ok(full)
    }
}

/// Meshes Ω with the cavity polygon as a refined internal interface and
/// returns it together with its fluid part.
pub fn triangulate_matched<T: Real>(
    domain: &DomainSpec<T>,
    cavity: &[Point<T>],
    opts: &MeshOptions<T>,
) -> Result<MatchedMeshes<T>, MeshError> {
    let b = Builder::build(domain, Some(cavity), opts, true)?;
    let full = b.into_mesh();
    let (fluid, fluid_to_full) = full.fluid_part();
    Ok(MatchedMeshes {
        full,
        fluid,
        fluid_to_full,
    })
}

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    /// Neighbor across the edge opposite `v[i]`.
    n: [usize; 3],
    seg: [Option<BoundaryTag>; 3],
    region: Region,
}

enum Loc {
    Inside(usize),
    OnEdge(usize, usize),
    OnVertex,
    Blocked(usize, usize),
}

enum Attempt {
    Inserted,
    Deferred,
    Skipped,
}

#[derive(Clone, Copy)]
enum Badness {
    Good,
    Refine,
    /// All three vertices on the Dirichlet boundary; split this edge.
    Boundary(usize),
}

struct Builder<T> {
    pts: Vec<Point<T>>,
    on_outer: Vec<bool>,
    on_cavity: Vec<bool>,
    tris: Vec<Tri>,
    vtri: Vec<usize>,
    last: usize,
    rng: u64,
    refine_inclusion: bool,
    fe_safe: bool,
    sin_min: T,
    h_target: T,
    budget: usize,
    inserted: usize,
    bad: VecDeque<usize>,
    enc: Vec<(usize, usize)>,
    touched: Vec<usize>,
    stack: Vec<(usize, usize)>,
}

#[inline]
fn nx(i: usize) -> usize {
    (i + 1) % 3
}

#[inline]
fn pv(i: usize) -> usize {
    (i + 2) % 3
}

impl<T: Real> Builder<T> {
    fn build(
        domain: &DomainSpec<T>,
        cavity: Option<&[Point<T>]>,
        opts: &MeshOptions<T>,
        refine_inclusion: bool,
    ) -> Result<Self, MeshError> {
        DomainSpec::new(domain.side, domain.corner)?;
        let h = opts.h_target;
        if !(h > T::zero()) || !h.is_finite() {
            return Err(MeshError::BadSize(h.as_f64()));
        }
        if opts.min_angle > T::lit(33.0) {
            return Err(MeshError::AngleTooLarge(opts.min_angle.as_f64()));
        }
        let expected = (T::lit(2.0) * domain.area() / (h * h)).ceil().to_usize().unwrap_or(usize::MAX / 64);
        let mut b = Builder {
            pts: Vec::new(),
            on_outer: Vec::new(),
            on_cavity: Vec::new(),
            tris: Vec::new(),
            vtri: Vec::new(),
            last: 0,
            rng: 0x9E37_79B9_7F4A_7C15,
            refine_inclusion,
            fe_safe: opts.interior_vertex_per_triangle,
            sin_min: opts.min_angle.to_radians().sin(),
            h_target: h,
            budget: opts.budget_factor.saturating_mul(expected.saturating_add(100)),
            inserted: 0,
            bad: VecDeque::new(),
            enc: Vec::new(),
            touched: Vec::new(),
            stack: Vec::new(),
        };
        b.init_square(domain);
        b.presplit_sides(domain);
        if let Some(poly) = cavity {
            b.insert_cavity(domain, poly)?;
        }
        b.refine()?;
        debug!(
            "mesh: {} vertices, {} triangles, {} insertions",
            b.pts.len(),
            b.tris.len(),
            b.inserted
        );
        Ok(b)
    }

    fn push_point(&mut self, p: Point<T>, outer: bool, cavity: bool) -> usize {
        self.pts.push(p);
        self.on_outer.push(outer);
        self.on_cavity.push(cavity);
        self.vtri.push(NONE);
        self.pts.len() - 1
    }

    fn init_square(&mut self, domain: &DomainSpec<T>) {
        for c in domain.corners() {
            self.push_point(c, true, false);
        }
        let o = Some(BoundaryTag::Outer);
        self.tris.push(Tri {
            v: [0, 1, 2],
            n: [NONE, 1, NONE],
            seg: [o, None, o],
            region: Region::Fluid,
        });
        self.tris.push(Tri {
            v: [0, 2, 3],
            n: [NONE, NONE, 0],
            seg: [o, o, None],
            region: Region::Fluid,
        });
        self.vtri = vec![0, 0, 0, 1];
    }

    fn presplit_sides(&mut self, domain: &DomainSpec<T>) {
        let m = (domain.side / self.h_target).ceil().to_usize().unwrap_or(1).max(1);
        let corners = domain.corners();
        for s in 0..4 {
            let (a, b) = (corners[s], corners[(s + 1) % 4]);
            for k in 1..m {
                let t = T::from_usize_lossy(k) / T::from_usize_lossy(m);
                // keep the constant coordinate bit-identical along each side
                let p = if a.y == b.y {
                    Point::new(a.x + (b.x - a.x) * t, a.y)
                } else {
                    Point::new(a.x, a.y + (b.y - a.y) * t)
                };
                if let Loc::OnEdge(tt, i) = self.locate(p, self.last, false) {
                    let v = self.push_point(p, true, false);
                    self.split_edge(tt, i, v);
                }
            }
        }
    }

    fn insert_cavity(&mut self, domain: &DomainSpec<T>, poly: &[Point<T>]) -> Result<(), MeshError> {
        CavityShape::Polygon {
            vertices: poly.to_vec(),
        }
        .check()?;
        if let Some(d) = poly
            .iter()
            .map(|&p| domain.inner_distance(p))
            .find(|&d| !(d > T::zero()))
        {
            return Err(GeometryError::NotInside(d.as_f64()).into());
        }
        let mut poly = poly.to_vec();
        if shoelace(&poly) < T::zero() {
            poly.reverse();
        }
        let mut ids = Vec::with_capacity(poly.len());
        for &p in &poly {
            match self.locate(p, self.last, false) {
                Loc::Inside(t) => {
                    let v = self.push_point(p, false, true);
                    self.insert_in_triangle(t, v);
                    ids.push(v);
                }
                Loc::OnEdge(t, i) => {
                    let v = self.push_point(p, false, true);
                    self.split_edge(t, i, v);
                    ids.push(v);
                }
                _ => return Err(MeshError::DuplicateVertex(p.to_f64())),
            }
        }
        let n = ids.len();
        let mut pieces = Vec::new();
        for k in 0..n {
            self.recover(ids[k], ids[(k + 1) % n], &mut pieces);
        }
        // interior of a counterclockwise polygon is left of each directed piece
        let mut queue = Vec::new();
        for &(a, b) in &pieces {
            let (t, i) = self.find_edge(a, b).expect("recovered segment present");
            let tri = &self.tris[t];
            let left = if tri.v[nx(i)] == a && tri.v[pv(i)] == b {
                t
            } else {
                tri.n[i]
            };
            queue.push(left);
        }
        while let Some(t) = queue.pop() {
            if self.tris[t].region == Region::Inclusion {
                continue;
            }
            self.tris[t].region = Region::Inclusion;
            for i in 0..3 {
                let nb = self.tris[t].n[i];
                if self.tris[t].seg[i].is_none() && nb != NONE {
                    queue.push(nb);
                }
            }
        }
        self.touched.clear();
        Ok(())
    }

    /// Makes `a -> b` a chain of constrained cavity edges, inserting midpoints
    /// while the straight edge is missing.
    fn recover(&mut self, a: usize, b: usize, pieces: &mut Vec<(usize, usize)>) {
        if let Some((t, i)) = self.find_edge(a, b) {
            self.mark_segment(t, i, BoundaryTag::Cavity);
            pieces.push((a, b));
            return;
        }
        let m = self.pts[a].midpoint(self.pts[b]);
        let v = match self.locate(m, self.vtri[a], false) {
            Loc::Inside(t) => {
                let v = self.push_point(m, false, true);
                self.insert_in_triangle(t, v);
                v
            }
            Loc::OnEdge(t, i) => {
                let v = self.push_point(m, false, true);
                self.split_edge(t, i, v);
                v
            }
            _ => unreachable!("segment midpoint coincides with a vertex"),
        };
        self.recover(a, v, pieces);
        self.recover(v, b, pieces);
    }

    fn mark_segment(&mut self, t: usize, i: usize, tag: BoundaryTag) {
        self.tris[t].seg[i] = Some(tag);
        let nb = self.tris[t].n[i];
        if nb != NONE {
            let j = self.back_index(nb, t);
            self.tris[nb].seg[j] = Some(tag);
        }
    }

    fn back_index(&self, t: usize, from: usize) -> usize {
        let n = &self.tris[t].n;
        (0..3).find(|&j| n[j] == from).expect("adjacency is symmetric")
    }

    fn vidx(&self, t: usize, v: usize) -> usize {
        let tv = &self.tris[t].v;
        (0..3).find(|&k| tv[k] == v).expect("vertex in triangle")
    }

    fn set_neighbor(&mut self, t: usize, old: usize, new: usize) {
        if t == NONE {
            return;
        }
        let j = self.back_index(t, old);
        self.tris[t].n[j] = new;
    }

    fn next_rand(&mut self) -> u64 {
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        self.rng
    }

    fn locate(&mut self, p: Point<T>, start: usize, stop_at_segments: bool) -> Loc {
        let mut t = if start < self.tris.len() { start } else { 0 };
        let max_steps = 4 * self.tris.len() + 16;
        for _ in 0..max_steps {
            let off = (self.next_rand() % 3) as usize;
            let mut moved = false;
            for k in 0..3 {
                let i = (off + k) % 3;
                let tri = &self.tris[t];
                let a = self.pts[tri.v[nx(i)]];
                let b = self.pts[tri.v[pv(i)]];
                if orient(a, b, p) < 0.0 {
                    if tri.n[i] == NONE || (stop_at_segments && tri.seg[i].is_some()) {
                        return Loc::Blocked(t, i);
                    }
                    t = tri.n[i];
                    moved = true;
                    break;
                }
            }
            if !moved {
                self.last = t;
                return self.classify(t, p);
            }
        }
        // the walk cycled; fall back to a scan
        for t in 0..self.tris.len() {
            let tri = &self.tris[t];
            let inside = (0..3).all(|i| orient(self.pts[tri.v[nx(i)]], self.pts[tri.v[pv(i)]], p) >= 0.0);
            if inside {
                return self.classify(t, p);
            }
        }
        unreachable!("point outside the triangulated square")
    }

    fn classify(&self, t: usize, p: Point<T>) -> Loc {
        let tri = &self.tris[t];
        if tri.v.iter().any(|&v| self.pts[v] == p) {
            return Loc::OnVertex;
        }
        for i in 0..3 {
            if orient(self.pts[tri.v[nx(i)]], self.pts[tri.v[pv(i)]], p) == 0.0 {
                return Loc::OnEdge(t, i);
            }
        }
        Loc::Inside(t)
    }

    /// Triangles around `v`.
    fn star(&self, v: usize) -> Vec<usize> {
        let t0 = self.vtri[v];
        let mut out = vec![t0];
        let mut t = t0;
        loop {
            let k = self.vidx(t, v);
            let n = self.tris[t].n[nx(k)];
            if n == t0 {
                return out;
            }
            if n == NONE {
                break;
            }
            out.push(n);
            t = n;
        }
        t = t0;
        loop {
            let k = self.vidx(t, v);
            let n = self.tris[t].n[pv(k)];
            if n == NONE {
                return out;
            }
            out.push(n);
            t = n;
        }
    }

    fn find_edge(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        for t in self.star(a) {
            let tv = self.tris[t].v;
            if let Some(k) = (0..3).find(|&k| tv[k] == b) {
                let ia = self.vidx(t, a);
                // edge opposite the third vertex
                return Some((t, 3 - k - ia));
            }
        }
        None
    }

    fn insert_in_triangle(&mut self, t: usize, v: usize) {
        let Tri { v: [a, b, c], n, seg, region } = self.tris[t].clone();
        let t1 = self.tris.len();
        let t2 = t1 + 1;
        self.tris[t] = Tri {
            v: [v, b, c],
            n: [n[0], t1, t2],
            seg: [seg[0], None, None],
            region,
        };
        self.tris.push(Tri {
            v: [a, v, c],
            n: [t, n[1], t2],
            seg: [None, seg[1], None],
            region,
        });
        self.tris.push(Tri {
            v: [a, b, v],
            n: [t, t1, n[2]],
            seg: [None, None, seg[2]],
            region,
        });
        self.set_neighbor(n[1], t, t1);
        self.set_neighbor(n[2], t, t2);
        self.vtri[a] = t1;
        self.vtri[b] = t;
        self.vtri[c] = t;
        self.vtri[v] = t;
        self.touched.extend([t, t1, t2]);
        self.inserted += 1;
        self.stack.extend([(t, 0), (t1, 1), (t2, 2)]);
        self.legalize(v);
    }

    /// Inserts `v` on edge `i` of `t`; a constrained edge becomes two constrained halves.
    fn split_edge(&mut self, t: usize, i: usize, v: usize) {
        let tri = self.tris[t].clone();
        let (c, a, b) = (tri.v[i], tri.v[nx(i)], tri.v[pv(i)]);
        let s = tri.seg[i];
        let nb = tri.n[i];
        let tb = self.tris.len();
        let (t_ca, t_bc) = (tri.n[pv(i)], tri.n[nx(i)]);
        let (s_ca, s_bc) = (tri.seg[pv(i)], tri.seg[nx(i)]);
        if nb == NONE {
            self.tris[t] = Tri {
                v: [c, a, v],
                n: [NONE, tb, t_ca],
                seg: [s, None, s_ca],
                region: tri.region,
            };
            self.tris.push(Tri {
                v: [c, v, b],
                n: [NONE, t_bc, t],
                seg: [s, s_bc, None],
                region: tri.region,
            });
            self.set_neighbor(t_bc, t, tb);
            self.touched.extend([t, tb]);
            self.stack.extend([(t, 2), (tb, 1)]);
        } else {
            let ntri = self.tris[nb].clone();
            let j = self.back_index(nb, t);
            let d = ntri.v[j];
            let (n_ad, n_db) = (ntri.n[nx(j)], ntri.n[pv(j)]);
            let (s_ad, s_db) = (ntri.seg[nx(j)], ntri.seg[pv(j)]);
            let nn = tb + 1;
            self.tris[t] = Tri {
                v: [c, a, v],
                n: [nn, tb, t_ca],
                seg: [s, None, s_ca],
                region: tri.region,
            };
            self.tris.push(Tri {
                v: [c, v, b],
                n: [nb, t_bc, t],
                seg: [s, s_bc, None],
                region: tri.region,
            });
            self.tris.push(Tri {
                v: [d, v, a],
                n: [t, n_ad, nb],
                seg: [s, s_ad, None],
                region: ntri.region,
            });
            self.tris[nb] = Tri {
                v: [d, b, v],
                n: [tb, nn, n_db],
                seg: [s, None, s_db],
                region: ntri.region,
            };
            self.set_neighbor(t_bc, t, tb);
            self.set_neighbor(n_ad, nb, nn);
            self.vtri[d] = nb;
            self.touched.extend([t, tb, nb, nn]);
            self.stack.extend([(t, 2), (tb, 1), (nb, 2), (nn, 1)]);
        }
        self.vtri[c] = t;
        self.vtri[a] = t;
        self.vtri[v] = t;
        self.vtri[b] = tb;
        self.inserted += 1;
        self.legalize(v);
    }

    /// Lawson flips around the freshly inserted vertex `v`.
    fn legalize(&mut self, v: usize) {
        while let Some((t, i)) = self.stack.pop() {
            let tri = &self.tris[t];
            if tri.v[i] != v || tri.seg[i].is_some() || tri.n[i] == NONE {
                continue;
            }
            let nb = tri.n[i];
            let j = self.back_index(nb, t);
            let d = self.tris[nb].v[j];
            let [p0, p1, p2] = tri.v.map(|k| self.pts[k]);
            if incircle(p0, p1, p2, self.pts[d]) > 0.0 {
                self.flip(t, i);
                let nb_new = self.tris[t].n[1];
                self.stack.push((t, 0));
                self.stack.push((nb_new, 0));
            }
        }
    }

    /// Flips edge `i` of `t`. Afterwards `t = (v, a, d)` and its neighbor across
    /// edge 1 is `(v, d, b)`, where `v = t.v[i]`.
    fn flip(&mut self, t: usize, i: usize) {
        let tri = self.tris[t].clone();
        let nb = tri.n[i];
        let ntri = self.tris[nb].clone();
        let j = self.back_index(nb, t);
        let (v, a, b) = (tri.v[i], tri.v[nx(i)], tri.v[pv(i)]);
        let d = ntri.v[j];
        let (t_bv, t_va) = (tri.n[nx(i)], tri.n[pv(i)]);
        let (s_bv, s_va) = (tri.seg[nx(i)], tri.seg[pv(i)]);
        let (n_ad, n_db) = (ntri.n[nx(j)], ntri.n[pv(j)]);
        let (s_ad, s_db) = (ntri.seg[nx(j)], ntri.seg[pv(j)]);
        self.tris[t] = Tri {
            v: [v, a, d],
            n: [n_ad, nb, t_va],
            seg: [s_ad, None, s_va],
            region: tri.region,
        };
        self.tris[nb] = Tri {
            v: [v, d, b],
            n: [n_db, t_bv, t],
            seg: [s_db, s_bv, None],
            region: tri.region,
        };
        self.set_neighbor(n_ad, nb, t);
        self.set_neighbor(t_bv, t, nb);
        self.vtri[v] = t;
        self.vtri[a] = t;
        self.vtri[d] = t;
        self.vtri[b] = nb;
        self.touched.extend([t, nb]);
    }

    fn refinable(&self, t: usize) -> bool {
        self.tris[t].region == Region::Fluid || self.refine_inclusion
    }

    fn on_dirichlet(&self, t: usize, v: usize) -> bool {
        match self.tris[t].region {
            Region::Fluid => self.on_outer[v] || self.on_cavity[v],
            Region::Inclusion => self.on_outer[v],
        }
    }

    fn badness(&self, t: usize) -> Badness {
        let tri = &self.tris[t];
        let p = tri.v.map(|k| self.pts[k]);
        let l2 = [0, 1, 2].map(|i| {
            let e = p[pv(i)] - p[nx(i)];
            e.dot(e)
        });
        let mut sorted = l2;
        sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite lengths"));
        let area2 = (p[1] - p[0]).cross(p[2] - p[0]);
        let sin_small = area2 / (sorted[1] * sorted[2]).sqrt();
        let too_big = sorted[2].sqrt() > self.h_target * T::lit(1.0 + 1e-9);
        if sin_small < self.sin_min || too_big {
            return Badness::Refine;
        }
        if self.fe_safe && tri.v.iter().all(|&v| self.on_dirichlet(t, v)) {
            let split = (0..3)
                .filter(|&i| tri.seg[i].is_none())
                .max_by(|&x, &y| l2[x].partial_cmp(&l2[y]).expect("finite lengths"));
            if let Some(i) = split {
                return Badness::Boundary(i);
            }
        }
        Badness::Good
    }

    fn is_encroached(&self, t: usize, i: usize) -> bool {
        let tri = &self.tris[t];
        let (a, b) = (self.pts[tri.v[nx(i)]], self.pts[tri.v[pv(i)]]);
        let check = |tt: usize, apex: usize| {
            if tt == NONE || !(self.refinable(tt)) {
                return false;
            }
            let c = self.pts[apex];
            let (u, w) = (a - c, b - c);
            u.dot(w) < -T::lit(1e-12) * u.norm() * w.norm()
        };
        if check(t, tri.v[i]) {
            return true;
        }
        let nb = tri.n[i];
        if nb != NONE {
            let j = self.back_index(nb, t);
            return check(nb, self.tris[nb].v[j]);
        }
        false
    }

    fn point_encroaches(&self, a: usize, b: usize, p: Point<T>) -> bool {
        let (u, w) = (self.pts[a] - p, self.pts[b] - p);
        u.dot(w) < -T::lit(1e-12) * u.norm() * w.norm()
    }

    /// Queues new triangles and any segment their apexes encroach.
    fn process_touched(&mut self) {
        let mut touched = std::mem::take(&mut self.touched);
        touched.sort_unstable();
        touched.dedup();
        for &t in &touched {
            if self.refinable(t) {
                self.bad.push_back(t);
            }
            for i in 0..3 {
                if self.tris[t].seg[i].is_some() && self.is_encroached(t, i) {
                    let tv = self.tris[t].v;
                    self.enc.push((tv[nx(i)], tv[pv(i)]));
                }
            }
        }
    }

    fn split_segment(&mut self, t: usize, i: usize) {
        let tri = &self.tris[t];
        let (a, b) = (tri.v[nx(i)], tri.v[pv(i)]);
        let tag = tri.seg[i].expect("segment");
        let m = self.pts[a].midpoint(self.pts[b]);
        let v = self.push_point(
            m,
            tag == BoundaryTag::Outer,
            tag == BoundaryTag::Cavity,
        );
        self.split_edge(t, i, v);
        self.process_touched();
    }

    fn circumcenter(&self, t: usize) -> Point<T> {
        let [a, b, c] = self.tris[t].v.map(|k| self.pts[k]);
        let (u, w) = (b - a, c - a);
        let d = T::lit(2.0) * u.cross(w);
        let (uu, ww) = (u.dot(u), w.dot(w));
        Point::new(a.x + (w.y * uu - u.y * ww) / d, a.y + (u.x * ww - w.x * uu) / d)
    }

    /// Segments whose diametral circle contains `p`, among those bounding the
    /// Delaunay cavity of `p` grown from `start`.
    fn encroached_by(&self, p: Point<T>, start: &[usize]) -> Vec<(usize, usize)> {
        let mut seen = std::collections::HashSet::new();
        let mut queue: Vec<usize> = start.to_vec();
        let mut out = Vec::new();
        while let Some(t) = queue.pop() {
            if !seen.insert(t) {
                continue;
            }
            let tri = &self.tris[t];
            for i in 0..3 {
                let (a, b) = (tri.v[nx(i)], tri.v[pv(i)]);
                if tri.seg[i].is_some() {
                    if self.point_encroaches(a, b, p) {
                        out.push((a, b));
                    }
                    continue;
                }
                let nb = tri.n[i];
                if nb != NONE && !seen.contains(&nb) {
                    let [q0, q1, q2] = self.tris[nb].v.map(|k| self.pts[k]);
                    if incircle(q0, q1, q2, p) > 0.0 {
                        queue.push(nb);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn split_pairs(&mut self, pairs: Vec<(usize, usize)>) {
        for (a, b) in pairs {
            if let Some((t, i)) = self.find_edge(a, b) {
                if self.tris[t].seg[i].is_some() {
                    self.split_segment(t, i);
                }
            }
        }
    }

    /// Tries to insert `p` on behalf of triangle `from`, splitting the
    /// segments it would encroach instead.
    fn try_insert(&mut self, p: Point<T>, from: usize) -> Attempt {
        match self.locate(p, from, true) {
            Loc::Blocked(t, i) => {
                self.split_segment(t, i);
                Attempt::Deferred
            }
            Loc::OnVertex => Attempt::Skipped,
            Loc::OnEdge(t, i) if self.tris[t].seg[i].is_some() => {
                self.split_segment(t, i);
                Attempt::Deferred
            }
            Loc::OnEdge(t, i) => {
                let nb = self.tris[t].n[i];
                let enc = self.encroached_by(p, &[t, nb]);
                if !enc.is_empty() {
                    self.split_pairs(enc);
                    return Attempt::Deferred;
                }
                let v = self.push_point(p, false, false);
                self.split_edge(t, i, v);
                self.process_touched();
                Attempt::Inserted
            }
            Loc::Inside(t) => {
                if !self.refinable(t) {
                    return Attempt::Skipped;
                }
                let enc = self.encroached_by(p, &[t]);
                if !enc.is_empty() {
                    self.split_pairs(enc);
                    return Attempt::Deferred;
                }
                let v = self.push_point(p, false, false);
                self.insert_in_triangle(t, v);
                self.process_touched();
                Attempt::Inserted
            }
        }
    }

    fn refine(&mut self) -> Result<(), MeshError> {
        self.touched.clear();
        self.bad.extend(0..self.tris.len());
        for t in 0..self.tris.len() {
            for i in 0..3 {
                if self.tris[t].seg[i].is_some() && self.is_encroached(t, i) {
                    let tv = self.tris[t].v;
                    self.enc.push((tv[nx(i)], tv[pv(i)]));
                }
            }
        }
        loop {
            if self.inserted > self.budget {
                let c = self.bad.front().map_or(Point::default(), |&t| {
                    let [a, b, c] = self.tris[t].v.map(|k| self.pts[k]);
                    (a + b + c) * T::lit(1.0 / 3.0)
                });
                return Err(MeshError::QualityUnreachable {
                    budget: self.budget,
                    x: c.x.as_f64(),
                    y: c.y.as_f64(),
                });
            }
            if let Some((a, b)) = self.enc.pop() {
                if let Some((t, i)) = self.find_edge(a, b) {
                    if self.tris[t].seg[i].is_some() && self.is_encroached(t, i) {
                        self.split_segment(t, i);
                    }
                }
                continue;
            }
            let Some(t) = self.bad.pop_front() else {
                break;
            };
            if !self.refinable(t) {
                continue;
            }
            let target = match self.badness(t) {
                Badness::Good => continue,
                Badness::Refine => self.circumcenter(t),
                Badness::Boundary(i) => {
                    let tv = self.tris[t].v;
                    self.pts[tv[nx(i)]].midpoint(self.pts[tv[pv(i)]])
                }
            };
            match self.try_insert(target, t) {
                Attempt::Deferred => self.bad.push_back(t),
                Attempt::Skipped => debug!("skipping triangle {t}: insertion point degenerate"),
                Attempt::Inserted => {}
            }
        }
        Ok(())
    }

    fn into_mesh(self) -> Mesh<T> {
        let mut boundary = Vec::new();
        let mut interface = Vec::new();
        for tri in &self.tris {
            for i in 0..3 {
                let v = [tri.v[nx(i)], tri.v[pv(i)]];
                match tri.seg[i] {
                    Some(BoundaryTag::Outer) => boundary.push(BoundaryEdge {
                        v,
                        tag: BoundaryTag::Outer,
                    }),
                    Some(BoundaryTag::Cavity) if tri.region == Region::Fluid => interface.push(v),
                    _ => {}
                }
            }
        }
        let mut mesh = Mesh {
            vertices: self.pts,
            triangles: self.tris.iter().map(|t| t.v).collect(),
            regions: self.tris.iter().map(|t| t.region).collect(),
            boundary,
            interface,
            h_max: T::zero(),
            generation: 0,
        };
        mesh.h_max = mesh.quality().h_max;
        mesh
    }
}

#[cfg(test)]
mod tests {
    use super::super::checks;
    use super::*;
    use crate::geometry::polygonalize;

    #[test]
    fn two_triangle_square() {
        let dom = DomainSpec::<f64>::unit_square();
        let m = triangulate(&dom, None, 2.0, 20.0).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert!((m.quality().min_angle - 45.0).abs() < 1e-12);
        checks::check_generated(&m, &dom, 20.0).unwrap();
    }

    #[test]
    fn cavity_edges_preserved() {
        let dom = DomainSpec::<f64>::unit_square();
        let c = CavityShape::circle(Point::new(0.5, 0.5), 0.1);
        let poly = polygonalize(&c, 64).unwrap();
        let m = triangulate(&dom, Some(&poly), 0.05, 25.0).unwrap();
        assert_eq!(m.boundary_edges(BoundaryTag::Cavity).count(), 64);
        checks::check_generated(&m, &dom, 25.0).unwrap();
    }

    #[test]
    fn rejects_steep_angle() {
        let dom = DomainSpec::<f64>::unit_square();
        assert!(matches!(
            triangulate(&dom, None, 0.1, 34.0),
            Err(MeshError::AngleTooLarge(_))
        ));
    }

    #[test]
    fn budget_exhaustion_reports_region() {
        let dom = DomainSpec::<f64>::unit_square();
        let opts = MeshOptions {
            budget_factor: 0,
            ..MeshOptions::new(0.01)
        };
        assert!(matches!(
            triangulate_with(&dom, None, &opts),
            Err(MeshError::QualityUnreachable { .. })
        ));
    }
}
