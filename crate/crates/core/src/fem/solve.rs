use std::sync::Arc;

use super::assembly::FESystem;
use super::kkt::KktFactor;
use super::ldl::nested_dissection;
use super::sparse::{norm2, CsrMatrix, Triplets};
use super::FemError;
use crate::bdata::BoundaryDatum;
use crate::geometry::Point;
use crate::mesh::{BoundaryTag, Mesh};
use crate::Real;

/// Discrete velocity-pressure pair.
#[derive(Clone, Debug)]
pub struct StokesField<T> {
    pub mesh: Arc<Mesh<T>>,
    /// P2 coefficients, two per node.
    pub u: Vec<T>,
    /// P1 coefficients with zero mean.
    pub p: Vec<T>,
    /// Relative algebraic residual of the final iterate.
    pub residual: T,
    pub refinement_steps: usize,
}

/// Discrete flux ∫ g·n over the outer loops for nodal values on the outer nodes.
pub fn outer_flux<T: Real>(system: &FESystem<T>, value: impl Fn(usize) -> [T; 2]) -> T {
    let mut flux = T::zero();
    for lp in system.dofs.loops_of(BoundaryTag::Outer) {
        for [a, m, b] in lp.elements() {
            let (pa, pb) = (system.nodes[a], system.nodes[b]);
            // outward normal times length, domain on the left
            let nl = Point::new(pb.y - pa.y, pa.x - pb.x);
            let (ga, gm, gb) = (value(a), value(m), value(b));
            let g = |k: usize| (ga[k] + T::lit(4.0) * gm[k] + gb[k]) / T::lit(6.0);
            flux += g(0) * nl.x + g(1) * nl.y;
        }
    }
    flux
}

/// Solves the Dirichlet problem with `datum` on the outer boundary and no-slip
/// on the cavity boundary.
pub fn solve_dirichlet<T: Real>(
    system: &FESystem<T>,
    datum: &BoundaryDatum<T>,
    cavity_zero: bool,
) -> Result<StokesField<T>, FemError> {
    if system.has_tag(BoundaryTag::Cavity) && !cavity_zero {
        return Err(FemError::MissingCavityCondition);
    }
    let trace = datum.trace_on(system)?;
    solve_with_trace(system, &trace)
}

/// `trace[n]` is the prescribed velocity of boundary node `n` (cavity nodes
/// are forced to zero regardless).
pub fn solve_with_trace<T: Real>(system: &FESystem<T>, trace: &[Option<[T; 2]>]) -> Result<StokesField<T>, FemError> {
    let nn = system.dofs.n_nodes;
    assert_eq!(trace.len(), nn);
    let mut ud = vec![T::zero(); 2 * nn];
    let mut fixed = vec![false; 2 * nn];
    let mut gmax = T::zero();
    for n in 0..nn {
        match system.dofs.node_tag[n] {
            Some(BoundaryTag::Outer) => {
                let g = trace[n].ok_or(FemError::DatumMismatch(n))?;
                ud[2 * n] = g[0];
                ud[2 * n + 1] = g[1];
                gmax = gmax.max(g[0].abs()).max(g[1].abs());
                fixed[2 * n] = true;
                fixed[2 * n + 1] = true;
            }
            Some(BoundaryTag::Cavity) => {
                fixed[2 * n] = true;
                fixed[2 * n + 1] = true;
            }
            None => {}
        }
    }
    let flux = outer_flux(system, |n| [ud[2 * n], ud[2 * n + 1]]);
    let perimeter = system
        .dofs
        .loops_of(BoundaryTag::Outer)
        .flat_map(|l| l.elements())
        .fold(T::zero(), |s, [a, _, b]| s + system.nodes[a].dist(system.nodes[b]));
    if flux.abs() > T::lit(1e-10) * T::one().max(gmax * perimeter) {
        return Err(FemError::IncompatibleDatum { flux: flux.as_f64() });
    }

    let free: Vec<usize> = (0..2 * nn).filter(|&i| !fixed[i]).collect();
    let mut free_index = vec![usize::MAX; 2 * nn];
    for (k, &i) in free.iter().enumerate() {
        free_index[i] = k;
    }
    let (nf, np) = (free.len(), system.n_pressure());
    let n = nf + np + 1;

    // right-hand side from the lifted boundary values
    let aud = system.a.matvec(&ud);
    let bud = system.b.matvec(&ud);
    let mut rhs = vec![T::zero(); n];
    for (k, &i) in free.iter().enumerate() {
        rhs[k] = -aud[i];
    }
    for i in 0..np {
        rhs[nf + i] = -bud[i];
    }

    let delta = regularization(system);
    let mut t = Triplets::with_capacity(n, n, system.a.nnz() + 2 * system.b.nnz() + 3 * np);
    for (k, &i) in free.iter().enumerate() {
        for (j, v) in system.a.row(i) {
            if free_index[j] != usize::MAX {
                t.push(k, free_index[j], v);
            }
        }
    }
    for i in 0..np {
        for (j, v) in system.b.row(i) {
            let fj = free_index[j];
            if fj != usize::MAX {
                t.push(nf + i, fj, v);
                t.push(fj, nf + i, v);
            }
        }
        t.push(nf + i, nf + i, -delta);
        t.push(nf + i, n - 1, system.m[i]);
        t.push(n - 1, nf + i, system.m[i]);
    }
    t.push(n - 1, n - 1, -delta);
    let k_reg = t.to_csr();
    let mut shift = vec![T::zero(); n];
    for s in shift.iter_mut().skip(nf) {
        *s = -delta;
    }

    let mut coords = Vec::with_capacity(n);
    let mut class = Vec::with_capacity(n);
    for &i in &free {
        coords.push(system.nodes[i / 2].to_f64());
        class.push(0u8);
    }
    for v in &system.mesh.vertices {
        coords.push(v.to_f64());
        class.push(1u8);
    }
    coords.push([0.0, 0.0]);
    class.push(2u8);

    let (x, residual, steps) = solve_refined(&k_reg, &shift, &rhs, &coords, &class)?;

    let mut u = ud;
    for (k, &i) in free.iter().enumerate() {
        u[i] = x[k];
    }
    let mut p = x[nf..nf + np].to_vec();
    let total: T = system.m.iter().copied().sum();
    let mean = p.iter().zip(&system.m).fold(T::zero(), |s, (&pi, &mi)| s + pi * mi) / total;
    for pi in p.iter_mut() {
        *pi -= mean;
    }
    Ok(StokesField {
        mesh: system.mesh.clone(),
        u,
        p,
        residual,
        refinement_steps: steps,
    })
}

/// Pressure-block regularization scaled to the Schur complement.
fn regularization<T: Real>(system: &FESystem<T>) -> T {
    let np = system.n_pressure().max(1);
    let mean_mass = system.pmass.iter().copied().sum::<T>() / T::from_usize_lossy(np);
    T::lit(1e-8) * mean_mass / system.mu
}

/// Factors `k_reg` and refines against `k_reg − diag(shift)` until the
/// relative residual stops improving.
fn solve_refined<T: Real>(
    k_reg: &CsrMatrix<T>,
    shift: &[T],
    rhs: &[T],
    coords: &[[f64; 2]],
    class: &[u8],
) -> Result<(Vec<T>, T, usize), FemError> {
    let n = rhs.len();
    let bnorm = norm2(rhs);
    if bnorm == T::zero() {
        return Ok((vec![T::zero(); n], T::zero(), 0));
    }
    let t0 = std::time::Instant::now();
    let perm = nested_dissection(k_reg, coords, class, 64);
    let f = KktFactor::factor(k_reg, &perm).map_err(FemError::Singular)?;
    log::debug!("kkt n {} nnz(L) {} factored in {:?}", n, f.nnz(), t0.elapsed());
    let target = T::lit(1e4) * T::epsilon();
    let accept = T::lit(1e-10).max(T::lit(1e6) * T::epsilon());
    let residual_of = |x: &[T]| -> Vec<T> {
        let kx = k_reg.matvec(x);
        (0..n).map(|i| rhs[i] - (kx[i] - shift[i] * x[i])).collect()
    };
    let mut x = vec![T::zero(); n];
    let mut r = rhs.to_vec();
    let mut rel = T::one();
    let mut steps = 0;
    for _ in 0..60 {
        let dx = f.solve(&r);
        let trial: Vec<T> = x.iter().zip(&dx).map(|(&a, &b)| a + b).collect();
        let r_new = residual_of(&trial);
        let rel_new = norm2(&r_new) / bnorm;
        if !rel_new.is_finite() {
            break;
        }
        steps += 1;
        let improving = rel_new < rel * T::lit(0.9);
        if rel_new < rel {
            x = trial;
            r = r_new;
            rel = rel_new;
        }
        if rel <= target || !improving {
            break;
        }
    }
    if rel <= accept {
        Ok((x, rel, steps))
    } else {
        Err(FemError::NotConverged { residual: rel.as_f64() })
    }
}

impl<T: Real> StokesField<T> {
    pub fn velocity_at_node(&self, n: usize) -> [T; 2] {
        [self.u[2 * n], self.u[2 * n + 1]]
    }

    /// Pressure mean with respect to the P1 mean vector of `system`.
    pub fn pressure_mean(&self, system: &FESystem<T>) -> T {
        let total: T = system.m.iter().copied().sum();
        self.p.iter().zip(&system.m).fold(T::zero(), |s, (&p, &m)| s + p * m) / total
    }

    /// Multiplies velocity and pressure by `s`.
    pub fn scaled(&self, s: T) -> Self {
        StokesField {
            mesh: self.mesh.clone(),
            u: self.u.iter().map(|&v| v * s).collect(),
            p: self.p.iter().map(|&v| v * s).collect(),
            residual: self.residual,
            refinement_steps: self.refinement_steps,
        }
    }
}
