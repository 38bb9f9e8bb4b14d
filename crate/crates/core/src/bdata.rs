//! Dirichlet data on the outer boundary: presets, compatibility projection
//! and the zero-net-force balancing construction.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{
    assemble, boundary_residual, h32_parts, solve_dirichlet, FESystem, FemError, H32Parts, StokesField,
};
use crate::geometry::{CavityShape, DomainSpec, Point};
use crate::mesh::{cavity_polygon, triangulate_matched, BoundaryTag, MeshError, MeshOptions};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatumError {
    #[error("unknown datum preset `{0}`")]
    UnknownPreset(String),
    #[error("datum vanishes identically; no support to correct the flux on")]
    NoSupport,
    #[error("mesh has no outer boundary loop")]
    NoOuterBoundary,
    #[error("balancing needs exactly 3 data, got {0}")]
    BalanceArity(usize),
    #[error("empty combination")]
    EmptyCombination,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Constant,
    PoiseuilleTrace,
    TangentialTop,
    TangentialBottom,
    TangentialLeft,
    TangentialRight,
    TangentialTopSmooth,
    InflowOutflow,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Constant,
        Preset::PoiseuilleTrace,
        Preset::TangentialTop,
        Preset::TangentialBottom,
        Preset::TangentialLeft,
        Preset::TangentialRight,
        Preset::TangentialTopSmooth,
        Preset::InflowOutflow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Constant => "constant",
            Preset::PoiseuilleTrace => "poiseuille-trace",
            Preset::TangentialTop => "tangential-top",
            Preset::TangentialBottom => "tangential-bottom",
            Preset::TangentialLeft => "tangential-left",
            Preset::TangentialRight => "tangential-right",
            Preset::TangentialTopSmooth => "tangential-top-smooth",
            Preset::InflowOutflow => "inflow-outflow",
        }
    }

    /// Value at a boundary point of the square, amplitude one.
    pub fn eval<T: Real>(self, domain: &DomainSpec<T>, p: Point<T>) -> [T; 2] {
        let (xi, eta) = domain.local(p);
        let tol = T::lit(1e-12);
        let zero = T::zero();
        let one = T::one();
        let bump = |t: T| t * (one - t);
        let on = |v: T, at: T| (v - at).abs() <= tol;
        match self {
            Preset::Constant => [one, zero],
            Preset::PoiseuilleTrace => [bump(eta), zero],
            Preset::TangentialTop if on(eta, one) => [bump(xi), zero],
            Preset::TangentialBottom if on(eta, zero) => [bump(xi), zero],
            Preset::TangentialLeft if on(xi, zero) => [zero, bump(eta)],
            Preset::TangentialRight if on(xi, one) => [zero, bump(eta)],
            Preset::TangentialTopSmooth if on(eta, one) => [T::lit(16.0) * bump(xi) * bump(xi), zero],
            Preset::InflowOutflow if on(xi, zero) || on(xi, one) => {
                let (a, b) = (T::lit(0.25), T::lit(0.75));
                if eta > a && eta < b {
                    [T::lit(16.0) * (eta - a) * (b - eta), zero]
                } else {
                    [zero, zero]
                }
            }
            _ => [zero, zero],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = DatumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| DatumError::UnknownPreset(s.to_string()))
    }
}

/// Analytic description of a datum: a scaled preset or a linear combination.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec<T> {
    Preset { preset: Preset, amplitude: T },
    Combination(Vec<(T, DatumSpec<T>)>),
}

impl<T: Real> DatumSpec<T> {
    pub fn preset(preset: Preset, amplitude: T) -> Self {
        DatumSpec::Preset { preset, amplitude }
    }

    /// Short label for records.
    pub fn id(&self) -> String {
        match self {
            DatumSpec::Preset { preset, amplitude } => format!("{}*{}", amplitude.as_f64(), preset.name()),
            DatumSpec::Combination(terms) => terms
                .iter()
                .map(|(l, s)| format!("{:.6e}*({})", l.as_f64(), s.id()))
                .collect::<Vec<_>>()
                .join("+"),
        }
    }
}

/// Whether the (H4) requirements are met.
#[derive(Debug, Clone, PartialEq)]
pub struct H4Report<T> {
    pub vanishes_on_arc: bool,
    pub compatible: bool,
    /// Surrogate for ‖g‖_{H^{1/2}} / ‖g‖_{L²}: √(‖g‖_{H¹} / ‖g‖_{L²}).
    pub ratio: T,
    pub c0: T,
    pub ok: bool,
}

/// Default bound on the H^{1/2}/L² ratio.
pub const DEFAULT_C0: f64 = 100.0;

/// Nodal Dirichlet values on the outer boundary loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDatum<T> {
    pub spec: DatumSpec<T>,
    /// Outer boundary P2 nodes in loop order, alternating vertex and midpoint.
    pub points: Vec<Point<T>>,
    pub values: Vec<[T; 2]>,
    /// ∫ g·n of the stored values.
    pub flux_residual: T,
    /// Coefficient of the last compatibility correction.
    pub correction: T,
    /// Longest arc (start, end) in arc length where g ≡ 0.
    pub vanish_patch: Option<(T, T)>,
    pub h4: H4Report<T>,
}

fn flux<T: Real>(points: &[Point<T>], values: &[[T; 2]]) -> T {
    let n = points.len();
    let mut f = T::zero();
    for k in 0..n / 2 {
        let (a, m, b) = (2 * k, 2 * k + 1, (2 * k + 2) % n);
        let (pa, pb) = (points[a], points[b]);
        let nl = Point::new(pb.y - pa.y, pa.x - pb.x);
        let g = |c: usize| (values[a][c] + T::lit(4.0) * values[m][c] + values[b][c]) / T::lit(6.0);
        f += g(0) * nl.x + g(1) * nl.y;
    }
    f
}

/// Unit outward normal at each node; `None` at corners.
fn normals<T: Real>(points: &[Point<T>]) -> Vec<Option<Point<T>>> {
    let n = points.len();
    let elem_normal = |k: usize| {
        let (pa, pb) = (points[2 * k], points[(2 * k + 2) % n]);
        let d = pb - pa;
        Point::new(d.y, -d.x) * (T::one() / d.norm())
    };
    let ne = n / 2;
    (0..n)
        .map(|j| {
            if j % 2 == 1 {
                Some(elem_normal(j / 2))
            } else {
                let (a, b) = (elem_normal((j / 2 + ne - 1) % ne), elem_normal(j / 2));
                if (a - b).norm() <= T::lit(1e-9) {
                    Some(b)
                } else {
                    None
                }
            }
        })
        .collect()
}

fn is_zero<T: Real>(v: &[T; 2]) -> bool {
    v[0] == T::zero() && v[1] == T::zero()
}

fn vanish_patch<T: Real>(points: &[Point<T>], values: &[[T; 2]]) -> Option<(T, T)> {
    let n = points.len();
    let ne = n / 2;
    // arc length at each element start
    let mut s = vec![T::zero(); ne + 1];
    for k in 0..ne {
        s[k + 1] = s[k] + points[2 * k].dist(points[(2 * k + 2) % n]);
    }
    let zero: Vec<bool> = (0..ne)
        .map(|k| is_zero(&values[2 * k]) && is_zero(&values[2 * k + 1]) && is_zero(&values[(2 * k + 2) % n]))
        .collect();
    if zero.iter().all(|&z| z) {
        return Some((T::zero(), s[ne]));
    }
    let first = (0..ne).find(|&k| !zero[k])?;
    let mut best: Option<(T, T)> = None;
    let mut k = 1;
    while k <= ne {
        let e = (first + k) % ne;
        if zero[e] {
            let start = first + k;
            while zero[(first + k) % ne] {
                k += 1;
            }
            let end = first + k;
            let at = |j: usize| s[j % ne] + s[ne] * T::from_usize_lossy(j / ne);
            let (a, b) = (at(start), at(end));
            if best.map_or(true, |(x, y)| b - a > y - x) {
                best = Some((a, b));
            }
        }
        k += 1;
    }
    best
}

impl<T: Real> BoundaryDatum<T> {
    fn from_values(spec: DatumSpec<T>, points: Vec<Point<T>>, values: Vec<[T; 2]>, correction: T) -> Self {
        let flux_residual = flux(&points, &values);
        let vanish_patch = vanish_patch(&points, &values);
        let mut d = BoundaryDatum {
            spec,
            points,
            values,
            flux_residual,
            correction,
            vanish_patch,
            h4: H4Report {
                vanishes_on_arc: false,
                compatible: false,
                ratio: T::zero(),
                c0: T::lit(DEFAULT_C0),
                ok: false,
            },
        };
        d.h4 = d.h4_report(T::lit(DEFAULT_C0));
        d
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(is_zero)
    }

    pub fn h32_parts(&self) -> H32Parts<T> {
        h32_parts(&self.points, &self.values)
    }

    /// ‖g‖_{H^{3/2}(∂Ω)}.
    pub fn h32_norm(&self) -> T {
        self.h32_parts().norm()
    }

    pub fn h4_report(&self, c0: T) -> H4Report<T> {
        let vanishes_on_arc = matches!(self.vanish_patch, Some((a, b)) if b > a) && !self.is_zero();
        let scale = self.abs_integral().max(T::min_positive_value());
        let compatible = self.flux_residual.abs() <= T::lit(1e-12) * T::one().max(scale);
        let ratio = if self.is_zero() {
            T::infinity()
        } else {
            let parts = self.h32_parts();
            parts.h1_over_l2().sqrt()
        };
        H4Report {
            vanishes_on_arc,
            compatible,
            ratio,
            c0,
            ok: vanishes_on_arc && compatible && ratio <= c0,
        }
    }

    /// ∫|g| by Simpson's rule.
    fn abs_integral(&self) -> T {
        let n = self.points.len();
        let mag = |v: &[T; 2]| (v[0] * v[0] + v[1] * v[1]).sqrt();
        (0..n / 2).fold(T::zero(), |s, k| {
            let (a, m, b) = (2 * k, 2 * k + 1, (2 * k + 2) % n);
            let len = self.points[a].dist(self.points[b]);
            s + len * (mag(&self.values[a]) + T::lit(4.0) * mag(&self.values[m]) + mag(&self.values[b])) / T::lit(6.0)
        })
    }

    pub fn scaled(&self, s: T) -> Self {
        let values = self.values.iter().map(|v| [v[0] * s, v[1] * s]).collect();
        let spec = DatumSpec::Combination(vec![(s, self.spec.clone())]);
        let mut d = BoundaryDatum::from_values(spec, self.points.clone(), values, self.correction * s);
        d.h4.c0 = self.h4.c0;
        d.h4 = d.h4_report(self.h4.c0);
        d
    }

    /// Prescribed value for every node of `system`: the outer nodes are matched
    /// to this datum by exact coordinates.
    pub fn trace_on(&self, system: &FESystem<T>) -> Result<Vec<Option<[T; 2]>>, FemError> {
        let lookup: HashMap<(u64, u64), [T; 2]> = self
            .points
            .iter()
            .zip(&self.values)
            .map(|(&p, &v)| (crate::fem::coord_key_of(p), v))
            .collect();
        let mut out = vec![None; system.dofs.n_nodes];
        for n in system.dofs.tag_nodes(BoundaryTag::Outer) {
            let v = lookup
                .get(&crate::fem::coord_key_of(system.nodes[n]))
                .ok_or(FemError::DatumMismatch(n))?;
            out[n] = Some(*v);
        }
        Ok(out)
    }

    /// Value at outer node `n` of `system`.
    pub fn value_map(&self, system: &FESystem<T>) -> Result<Vec<[T; 2]>, FemError> {
        Ok(self.trace_on(system)?.into_iter().map(|v| v.unwrap_or([T::zero(); 2])).collect())
    }
}

fn outer_points<T: Real>(system: &FESystem<T>) -> Result<Vec<Point<T>>, DatumError> {
    let nodes = system.dofs.tag_nodes(BoundaryTag::Outer);
    if nodes.is_empty() {
        return Err(DatumError::NoOuterBoundary);
    }
    Ok(nodes.iter().map(|&n| system.nodes[n]).collect())
}

fn eval_spec<T: Real>(
    spec: &DatumSpec<T>,
    domain: &DomainSpec<T>,
    points: &[Point<T>],
) -> Result<Vec<[T; 2]>, DatumError> {
    match spec {
        DatumSpec::Preset { preset, amplitude } => {
            let raw: Vec<[T; 2]> = points
                .iter()
                .map(|&p| {
                    let v = preset.eval(domain, p);
                    [v[0] * *amplitude, v[1] * *amplitude]
                })
                .collect();
            if raw.iter().all(is_zero) {
                return Ok(raw);
            }
            Ok(project_values(points, raw)?.0)
        }
        DatumSpec::Combination(terms) => {
            if terms.is_empty() {
                return Err(DatumError::EmptyCombination);
            }
            let mut acc = vec![[T::zero(); 2]; points.len()];
            for (lambda, s) in terms {
                for (a, v) in acc.iter_mut().zip(eval_spec(s, domain, points)?) {
                    a[0] += *lambda * v[0];
                    a[1] += *lambda * v[1];
                }
            }
            Ok(acc)
        }
    }
}

/// Evaluates `spec` on the outer boundary nodes of `system`. Each preset is
/// made discretely compatible before combination.
pub fn make_datum<T: Real>(
    spec: &DatumSpec<T>,
    domain: &DomainSpec<T>,
    system: &FESystem<T>,
) -> Result<BoundaryDatum<T>, DatumError> {
    let points = outer_points(system)?;
    let values = eval_spec(spec, domain, &points)?;
    Ok(BoundaryDatum::from_values(spec.clone(), points, values, T::zero()))
}

/// Returns corrected values and the correction coefficient.
fn project_values<T: Real>(points: &[Point<T>], mut values: Vec<[T; 2]>) -> Result<(Vec<[T; 2]>, T), DatumError> {
    let nrm = normals(points);
    let weight: Vec<T> = values
        .iter()
        .zip(&nrm)
        .map(|(v, n)| if n.is_some() { (v[0] * v[0] + v[1] * v[1]).sqrt() } else { T::zero() })
        .collect();
    if weight.iter().all(|&w| w == T::zero()) {
        return Err(DatumError::NoSupport);
    }
    let f = flux(points, &values);
    let bump: Vec<[T; 2]> = weight
        .iter()
        .zip(&nrm)
        .map(|(&w, n)| match n {
            Some(n) => [n.x * w, n.y * w],
            None => [T::zero(); 2],
        })
        .collect();
    let fb = flux(points, &bump);
    // ∫|g| bounds the flux; below roundoff of that scale the datum is compatible
    if f.abs() <= T::lit(16.0) * T::epsilon() * fb.abs() || fb == T::zero() {
        return Ok((values, T::zero()));
    }
    let alpha = f / fb;
    for (v, b) in values.iter_mut().zip(&bump) {
        v[0] -= alpha * b[0];
        v[1] -= alpha * b[1];
    }
    Ok((values, alpha))
}

/// Removes the boundary flux with a normal correction proportional to |g|,
/// supported where g is nonzero away from corners.
pub fn project_compatible<T: Real>(datum: &BoundaryDatum<T>) -> Result<BoundaryDatum<T>, DatumError> {
    let (values, alpha) = project_values(&datum.points, datum.values.clone())?;
    let mut d = BoundaryDatum::from_values(datum.spec.clone(), datum.points.clone(), values, alpha);
    d.h4 = d.h4_report(datum.h4.c0);
    Ok(d)
}

/// Net force ∫σn on one boundary tag.
pub fn net_force<T: Real>(system: &FESystem<T>, field: &StokesField<T>, tag: BoundaryTag) -> Result<[T; 2], FemError> {
    Ok(boundary_residual(system, field, tag)?.net_force())
}

/// Unit null vector of the 2×3 matrix with columns `v`, and a warning when
/// the construction had to fall back.
pub fn balance_coefficients<T: Real>(v: &[[T; 2]; 3]) -> ([T; 3], Option<String>) {
    let mag: Vec<T> = v.iter().map(|f| (f[0] * f[0] + f[1] * f[1]).sqrt()).collect();
    let vmax = mag.iter().fold(T::zero(), |m, &x| m.max(x));
    let tiny = T::lit(1e3) * T::epsilon() * vmax;
    let e = |i: usize| {
        let mut l = [T::zero(); 3];
        l[i] = T::one();
        l
    };
    let smallest = (0..3).min_by(|&a, &b| mag[a].partial_cmp(&mag[b]).expect("finite forces")).unwrap_or(0);
    if vmax == T::zero() {
        return (e(0), Some("all net forces vanish; datum 1 is already balanced".into()));
    }
    if mag[smallest] <= tiny {
        return (e(smallest), None);
    }
    let r1 = [v[0][0], v[1][0], v[2][0]];
    let r2 = [v[0][1], v[1][1], v[2][1]];
    let cross = |a: [T; 3], b: [T; 3]| {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    };
    let norm3 = |a: [T; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let unit = |a: [T; 3]| {
        let n = norm3(a);
        let mut l = [a[0] / n, a[1] / n, a[2] / n];
        // deterministic sign: first nonzero entry positive
        if let Some(&first) = l.iter().find(|x| x.abs() > T::lit(1e-14)) {
            if first < T::zero() {
                for x in l.iter_mut() {
                    *x = -*x;
                }
            }
        }
        l
    };
    let c = cross(r1, r2);
    if norm3(c) > T::lit(1e-10) * norm3(r1) * norm3(r2) {
        return (unit(c), None);
    }
    // rank one: any vector orthogonal to the dominant row
    let r = if norm3(r1) >= norm3(r2) { r1 } else { r2 };
    let j = (0..3).min_by(|&a, &b| r[a].abs().partial_cmp(&r[b].abs()).expect("finite")).unwrap_or(0);
    let l = unit(cross(r, e(j)));
    (l, Some("net forces are parallel; balanced datum taken orthogonal to their direction".into()))
}

/// Outcome of the balancing construction.
#[derive(Debug, Clone)]
pub struct Balanced<T> {
    pub lambda: [T; 3],
    pub forces: [[T; 2]; 3],
    pub spec: DatumSpec<T>,
    pub warning: Option<String>,
}

/// Combines three data into one whose cavity problem has zero net force on
/// the outer boundary.
pub fn balance<T: Real>(
    specs: &[DatumSpec<T>],
    domain: &DomainSpec<T>,
    cavity: &CavityShape<T>,
    opts: &MeshOptions<T>,
) -> Result<Balanced<T>, DatumError> {
    if specs.len() != 3 {
        return Err(DatumError::BalanceArity(specs.len()));
    }
    let poly = cavity_polygon(cavity, opts.h_target)?;
    // the fluid part of the matched pair, so measurements see the same mesh
    let mesh = triangulate_matched(domain, &poly, opts)?.fluid;
    let system = assemble(mesh, T::one())?;
    let forces: Vec<[T; 2]> = specs
        .par_iter()
        .map(|s| -> Result<[T; 2], DatumError> {
            let d = make_datum(s, domain, &system)?;
            let field = solve_dirichlet(&system, &d, true)?;
            Ok(net_force(&system, &field, BoundaryTag::Outer)?)
        })
        .collect::<Result<_, _>>()?;
    let forces = [forces[0], forces[1], forces[2]];
    let (lambda, warning) = balance_coefficients(&forces);
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let spec = DatumSpec::Combination(specs.iter().cloned().zip(lambda).map(|(s, l)| (l, s)).collect());
    Ok(Balanced {
        lambda,
        forces,
        spec,
        warning,
    })
}

/// The three-datum family used by default for balancing.
pub fn default_family<T: Real>(amplitude: T) -> Vec<DatumSpec<T>> {
    vec![
        DatumSpec::preset(Preset::TangentialTop, amplitude),
        DatumSpec::preset(Preset::TangentialLeft, amplitude),
        DatumSpec::preset(Preset::InflowOutflow, amplitude),
    ]
}
