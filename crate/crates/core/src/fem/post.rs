//! Energies, boundary forces and region integrals of a solved field.

use super::assembly::FESystem;
use super::ldl::Ldl;
use super::quadrature::triangle_degree4;
use super::solve::StokesField;
use super::sparse::{dot, Triplets};
use super::{p2, FemError};
use crate::geometry::{point_in_polygon, polygonalize, shoelace, CavityShape, Point};
use crate::mesh::BoundaryTag;
use crate::Real;

/// 2μ∫|e(u)|² = uᵀAu.
pub fn strain_energy<T: Real>(system: &FESystem<T>, field: &StokesField<T>) -> T {
    dot(&field.u, &system.a.matvec(&field.u)).max(T::zero())
}

/// 2μ∫|e(u)|² summed element by element from the strain at quadrature
/// points. Equal to uᵀAu, without the cancellation of the global product.
pub fn strain_energy_of<T: Real>(system: &FESystem<T>, u: &[T]) -> T {
    let rule = triangle_degree4::<T>();
    let two = T::lit(2.0);
    let mut total = T::zero();
    for t in 0..system.mesh.n_triangles() {
        let (_, area2) = p2::barycentric_gradients(&system.mesh.corners(t));
        let mut e = T::zero();
        for (l, w) in &rule {
            let g = velocity_gradient(system, u, t, l);
            let off = (g[0][1] + g[1][0]) / two;
            e += *w * (g[0][0] * g[0][0] + g[1][1] * g[1][1] + two * off * off);
        }
        total += e * area2.abs() / two;
    }
    two * system.mu * total
}

/// Variational Cauchy force on one boundary tag: `r[k]` is
/// a(u, φ) − (p, div φ) for the two basis functions of node `nodes[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFunctional<T> {
    pub tag: BoundaryTag,
    pub nodes: Vec<usize>,
    pub r: Vec<[T; 2]>,
}

impl<T: Real> BoundaryFunctional<T> {
    /// Σ r·v over the tagged nodes.
    pub fn pair(&self, value: impl Fn(usize) -> [T; 2]) -> T {
        self.nodes.iter().zip(&self.r).fold(T::zero(), |s, (&n, r)| {
            let v = value(n);
            s + r[0] * v[0] + r[1] * v[1]
        })
    }

    /// Pairing with the constant fields e₁ and e₂.
    pub fn net_force(&self) -> [T; 2] {
        self.r.iter().fold([T::zero(); 2], |s, r| [s[0] + r[0], s[1] + r[1]])
    }

    pub fn max_abs(&self) -> T {
        self.r.iter().fold(T::zero(), |s, r| s.max(r[0].abs()).max(r[1].abs()))
    }
}

/// Full residual vector A u + Bᵀ p over every velocity dof.
pub fn residual_vector<T: Real>(system: &FESystem<T>, field: &StokesField<T>) -> Vec<T> {
    let mut r = system.a.matvec(&field.u);
    for (ri, bi) in r.iter_mut().zip(system.b.matvec_t(&field.p)) {
        *ri += bi;
    }
    r
}

pub fn boundary_residual<T: Real>(
    system: &FESystem<T>,
    field: &StokesField<T>,
    tag: BoundaryTag,
) -> Result<BoundaryFunctional<T>, FemError> {
    if !system.has_tag(tag) {
        return Err(FemError::TagAbsent(tag));
    }
    let full = residual_vector(system, field);
    let nodes = system.dofs.tag_nodes(tag);
    let r = nodes.iter().map(|&n| [full[2 * n], full[2 * n + 1]]).collect();
    Ok(BoundaryFunctional { tag, nodes, r })
}

/// Pointwise traction on a tagged boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Traction<T> {
    pub tag: BoundaryTag,
    pub nodes: Vec<usize>,
    pub points: Vec<Point<T>>,
    /// Cumulative arc length along the loops.
    pub s: Vec<T>,
    pub psi: Vec<[T; 2]>,
}

/// L² representative ψ of the functional: solves M ψ = r with the P2
/// boundary mass matrix of each loop.
pub fn cauchy_force_field<T: Real>(
    system: &FESystem<T>,
    functional: &BoundaryFunctional<T>,
) -> Result<Traction<T>, FemError> {
    let mut out = Traction {
        tag: functional.tag,
        nodes: Vec::new(),
        points: Vec::new(),
        s: Vec::new(),
        psi: Vec::new(),
    };
    let mut offset = 0;
    let mut arc = T::zero();
    for lp in system.dofs.loops_of(functional.tag) {
        let n = lp.nodes.len();
        if functional.nodes[offset..offset + n] != lp.nodes[..] {
            return Err(FemError::Internal("functional does not follow the boundary loops".into()));
        }
        let local = [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]];
        let mut t = Triplets::with_capacity(n, n, 9 * n / 2);
        for k in 0..n / 2 {
            let ids = [2 * k, 2 * k + 1, (2 * k + 2) % n];
            let len = system.nodes[lp.nodes[ids[0]]].dist(system.nodes[lp.nodes[ids[2]]]);
            for i in 0..3 {
                for j in 0..3 {
                    t.push(ids[i], ids[j], len * T::lit(local[i][j] / 30.0));
                }
            }
        }
        let mass = t.to_csr();
        let f = Ldl::factor(&mass, (0..n).collect()).map_err(|e| FemError::Internal(e.to_string()))?;
        let r = &functional.r[offset..offset + n];
        let c0 = f.solve(&r.iter().map(|v| v[0]).collect::<Vec<_>>());
        let c1 = f.solve(&r.iter().map(|v| v[1]).collect::<Vec<_>>());
        for k in 0..n {
            let node = lp.nodes[k];
            if k > 0 {
                arc += system.nodes[node].dist(system.nodes[lp.nodes[k - 1]]);
            }
            out.nodes.push(node);
            out.points.push(system.nodes[node]);
            out.s.push(arc);
            out.psi.push([c0[k], c1[k]]);
        }
        arc += system.nodes[lp.nodes[n - 1]].dist(system.nodes[lp.nodes[0]]);
        offset += n;
    }
    Ok(out)
}

impl<T: Real> Traction<T> {
    /// ∫ ψ·g over the boundary for nodal g, with the P2 mass matrix.
    pub fn pair(&self, system: &FESystem<T>, value: impl Fn(usize) -> [T; 2]) -> T {
        let mut total = T::zero();
        let mut start = 0;
        for lp in system.dofs.loops_of(self.tag) {
            let n = lp.nodes.len();
            for k in 0..n / 2 {
                let ids = [start + 2 * k, start + 2 * k + 1, start + (2 * k + 2) % n];
                let len = self.points[ids[0]].dist(self.points[ids[2]]);
                let local = [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]];
                for i in 0..3 {
                    let g = value(self.nodes[ids[i]]);
                    for j in 0..3 {
                        let w = len * T::lit(local[i][j] / 30.0);
                        let psi = self.psi[ids[j]];
                        total += w * (g[0] * psi[0] + g[1] * psi[1]);
                    }
                }
            }
            start += n;
        }
        total
    }
}

/// Velocity gradient [[∂x u1, ∂y u1], [∂x u2, ∂y u2]] inside triangle `t`.
pub fn velocity_gradient<T: Real>(system: &FESystem<T>, u: &[T], t: usize, l: &[T; 3]) -> [[T; 2]; 2] {
    let (gl, _) = p2::barycentric_gradients(&system.mesh.corners(t));
    let g = p2::gradients(l, &gl);
    let tn = &system.dofs.tri_nodes[t];
    let mut out = [[T::zero(); 2]; 2];
    for a in 0..6 {
        for k in 0..2 {
            for d in 0..2 {
                out[k][d] += u[2 * tn[a] + k] * g[a][d];
            }
        }
    }
    out
}

/// Velocity at barycentric position `l` of triangle `t`.
pub fn velocity_in<T: Real>(system: &FESystem<T>, u: &[T], t: usize, l: &[T; 3]) -> [T; 2] {
    let v = p2::values(l);
    let tn = &system.dofs.tri_nodes[t];
    let mut out = [T::zero(); 2];
    for a in 0..6 {
        out[0] += u[2 * tn[a]] * v[a];
        out[1] += u[2 * tn[a] + 1] * v[a];
    }
    out
}

fn grad_sq<T: Real>(g: &[[T; 2]; 2]) -> T {
    g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]
}

/// Clips `poly` to the half-plane left of the directed line a→b.
fn clip_half_plane<T: Real>(poly: &[Point<T>], a: Point<T>, b: Point<T>) -> Vec<Point<T>> {
    let side = |p: Point<T>| (b - a).cross(p - a);
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (sp, sq) = (side(p), side(q));
        if sp >= T::zero() {
            out.push(p);
        }
        if (sp >= T::zero()) != (sq >= T::zero()) {
            let t = sp / (sp - sq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Number of segments used to resolve curved region boundaries.
pub const REGION_SEGMENTS: usize = 4096;

/// ∫_D |∇u|² for a field on a mesh that covers D. Triangles cut by ∂D are
/// integrated exactly over their intersection with a fine polygonization of D.
pub fn gradient_energy_on_region<T: Real>(
    system: &FESystem<T>,
    field: &StokesField<T>,
    shape: &CavityShape<T>,
) -> Result<T, FemError> {
    let mut poly = polygonalize(shape, REGION_SEGMENTS)?;
    if shoelace(&poly) < T::zero() {
        poly.reverse();
    }
    let (lo, hi) = shape.bbox();
    let mesh = &system.mesh;
    let (mut mlo, mut mhi) = (mesh.vertices[0], mesh.vertices[0]);
    for v in &mesh.vertices {
        mlo = Point::new(mlo.x.min(v.x), mlo.y.min(v.y));
        mhi = Point::new(mhi.x.max(v.x), mhi.y.max(v.y));
    }
    let tol = T::lit(1e-12) * (mhi.x - mlo.x).max(mhi.y - mlo.y);
    if lo.x < mlo.x - tol || lo.y < mlo.y - tol || hi.x > mhi.x + tol || hi.y > mhi.y + tol {
        return Err(FemError::ShapeOutside);
    }
    let convex = matches!(shape, CavityShape::Circle { .. } | CavityShape::Ellipse { .. });
    let rule = triangle_degree4::<T>();
    let mut total = T::zero();
    for t in 0..mesh.n_triangles() {
        let c = mesh.corners(t);
        let tlo = Point::new(c[0].x.min(c[1].x).min(c[2].x), c[0].y.min(c[1].y).min(c[2].y));
        let thi = Point::new(c[0].x.max(c[1].x).max(c[2].x), c[0].y.max(c[1].y).max(c[2].y));
        if thi.x < lo.x || thi.y < lo.y || tlo.x > hi.x || tlo.y > hi.y {
            continue;
        }
        let (gl, _) = p2::barycentric_gradients(&c);
        let tn = &system.dofs.tri_nodes[t];
        let integrand = |x: Point<T>| {
            let l = p2::barycentric(&c, x);
            let g = p2::gradients(&l, &gl);
            let mut gr = [[T::zero(); 2]; 2];
            for a in 0..6 {
                for k in 0..2 {
                    for d in 0..2 {
                        gr[k][d] += field.u[2 * tn[a] + k] * g[a][d];
                    }
                }
            }
            grad_sq(&gr)
        };
        let region: Vec<Point<T>> = if convex && c.iter().all(|&p| point_in_polygon(&poly, p)) {
            c.to_vec()
        } else {
            let mut q = poly.clone();
            for k in 0..3 {
                q = clip_half_plane(&q, c[k], c[(k + 1) % 3]);
                if q.is_empty() {
                    break;
                }
            }
            q
        };
        if region.len() < 3 {
            continue;
        }
        // signed fan from the first vertex: exact for polynomial integrands
        let o = region[0];
        for k in 1..region.len() - 1 {
            let (a, b) = (region[k], region[k + 1]);
            let area = (a - o).cross(b - o) * T::lit(0.5);
            if area == T::zero() {
                continue;
            }
            for (l, w) in &rule {
                let x = o * l[0] + a * l[1] + b * l[2];
                total += *w * area * integrand(x);
            }
        }
    }
    Ok(total)
}
