use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::dofs::DofMap;
use super::quadrature::triangle_degree4;
use super::sparse::{CsrMatrix, Triplets};
use super::{p2, FemError};
use crate::geometry::Point;
use crate::mesh::{BoundaryTag, Mesh};
use crate::Real;

/// Assembled Taylor-Hood Stokes operator on one mesh.
#[derive(Clone, Debug)]
pub struct FESystem<T> {
    pub mesh: Arc<Mesh<T>>,
    pub mu: T,
    pub dofs: DofMap,
    /// Coordinates of every P2 node.
    pub nodes: Vec<Point<T>>,
    /// Viscous block, 2μ∫e(φᵢ):e(φⱼ).
    pub a: CsrMatrix<T>,
    /// Divergence block, −∫qᵢ div φⱼ.
    pub b: CsrMatrix<T>,
    /// ∫qᵢ.
    pub m: Vec<T>,
    /// Diagonal of the P1 mass matrix.
    pub pmass: Vec<T>,
}

type Local<T> = ([[T; 12]; 12], [[T; 12]; 3], T);

fn element<T: Real>(p: &[Point<T>; 3], mu: T) -> Option<Local<T>> {
    let (gl, area2) = p2::barycentric_gradients(p);
    if !(area2 > T::zero()) {
        return None;
    }
    let area = area2 * T::lit(0.5);
    let mut a = [[T::zero(); 12]; 12];
    let mut b = [[T::zero(); 12]; 3];
    for (l, w) in triangle_degree4::<T>() {
        let wq = w * area;
        let g = p2::gradients(&l, &gl);
        for ia in 0..6 {
            for ib in 0..6 {
                let dot = g[ia][0] * g[ib][0] + g[ia][1] * g[ib][1];
                for k in 0..2 {
                    for m in 0..2 {
                        let mut v = g[ia][m] * g[ib][k];
                        if k == m {
                            v += dot;
                        }
                        a[2 * ia + k][2 * ib + m] += wq * mu * v;
                    }
                }
            }
            for (i, &li) in l.iter().enumerate() {
                for k in 0..2 {
                    b[i][2 * ia + k] -= wq * li * g[ia][k];
                }
            }
        }
    }
    Some((a, b, area))
}

/// Assembles the viscous and divergence blocks over every triangle of `mesh`.
pub fn assemble<T: Real>(mesh: impl Into<Arc<Mesh<T>>>, mu: T) -> Result<FESystem<T>, FemError> {
    let mesh: Arc<Mesh<T>> = mesh.into();
    if !(mu > T::zero()) {
        return Err(FemError::BadViscosity(mu.as_f64()));
    }
    let dofs = DofMap::new(mesh.as_ref())?;
    let mut nodes = mesh.vertices.clone();
    nodes.extend(dofs.edges.iter().map(|e| mesh.vertices[e[0]].midpoint(mesh.vertices[e[1]])));

    let locals: Vec<Option<Local<T>>> =
        (0..mesh.n_triangles()).into_par_iter().map(|t| element(&mesh.corners(t), mu)).collect();

    let (nu, np) = (dofs.n_velocity(), dofs.n_pressure());
    let nt = mesh.n_triangles();
    let mut ta = Triplets::with_capacity(nu, nu, 144 * nt);
    let mut tb = Triplets::with_capacity(np, nu, 36 * nt);
    let mut m = vec![T::zero(); np];
    let mut pmass = vec![T::zero(); np];
    for (t, loc) in locals.into_iter().enumerate() {
        let (a, b, area) = loc.ok_or(FemError::InvertedTriangle(t))?;
        let tn = &dofs.tri_nodes[t];
        let gd = |i: usize| 2 * tn[i / 2] + i % 2;
        for i in 0..12 {
            for j in 0..12 {
                ta.push(gd(i), gd(j), a[i][j]);
            }
        }
        let tv = &mesh.triangles[t];
        for (i, row) in b.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                tb.push(tv[i], gd(j), v);
            }
            m[tv[i]] += area / T::lit(3.0);
            pmass[tv[i]] += area / T::lit(6.0);
        }
    }
    Ok(FESystem {
        a: ta.to_csr(),
        b: tb.to_csr(),
        mesh,
        mu,
        dofs,
        nodes,
        m,
        pmass,
    })
}

/// Hash key of a point's exact coordinates.
pub fn coord_key_of<T: Real>(p: Point<T>) -> (u64, u64) {
    let [x, y] = p.to_f64();
    // fold -0.0 onto 0.0
    ((x + 0.0).to_bits(), (y + 0.0).to_bits())
}

impl<T: Real> FESystem<T> {
    pub fn n_velocity(&self) -> usize {
        self.dofs.n_velocity()
    }

    pub fn n_pressure(&self) -> usize {
        self.dofs.n_pressure()
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, f: impl Fn(Point<T>) -> [T; 2]) -> Vec<T> {
        let mut u = vec![T::zero(); self.n_velocity()];
        for (n, &x) in self.nodes.iter().enumerate() {
            let v = f(x);
            u[2 * n] = v[0];
            u[2 * n + 1] = v[1];
        }
        u
    }

    /// P1 interpolant of a scalar field.
    pub fn interpolate_pressure(&self, f: impl Fn(Point<T>) -> T) -> Vec<T> {
        self.mesh.vertices.iter().map(|&x| f(x)).collect()
    }

    /// Node index keyed by exact coordinates.
    pub fn node_lookup(&self) -> HashMap<(u64, u64), usize> {
        self.nodes.iter().enumerate().map(|(i, &p)| (coord_key_of(p), i)).collect()
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.dofs.loops_of(tag).next().is_some()
    }

    /// Velocity at node `n`.
    pub fn node_value(u: &[T], n: usize) -> [T; 2] {
        [u[2 * n], u[2 * n + 1]]
    }
}
