//! Energy measurements with and without the cavity, the size bounds built
//! from them, and empirical calibration of the bound constants.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bdata::{make_datum, BoundaryDatum, DatumError, DatumSpec};
use crate::fem::{
    assemble, boundary_residual, coord_key_of, gradient_energy_on_region, solve_dirichlet,
    strain_energy, FESystem, FemError, StokesField,
};
use crate::geometry::{boundary_distance, cavity_area, CavityShape, DomainSpec, GeometryError};
use crate::mesh::{cavity_polygon, triangulate_matched, triangulate_with, BoundaryTag, Mesh, MeshError, MeshOptions};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Datum(#[from] DatumError),
    #[error("cavity-free energy vanishes; the datum is zero")]
    ZeroEnergy,
    #[error("bound constant must be positive, got {0}")]
    BadConstant(f64),
    #[error("no record with a positive energy gap ({excluded} excluded)")]
    NoValidRecords { excluded: usize },
}

/// Discretization settings shared by the two solves of a measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureOptions<T> {
    pub mesh: MeshOptions<T>,
    pub mu: T,
    /// Uniform refinements applied after meshing.
    pub refine: u32,
}

impl<T: Real> MeasureOptions<T> {
    pub fn new(h: T) -> Self {
        Self {
            mesh: MeshOptions::new(h),
            mu: T::one(),
            refine: 0,
        }
    }

    /// Target size after refinement.
    pub fn effective_h(&self) -> T {
        self.mesh.h_target / T::lit(2f64.powi(self.refine as i32))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement<T> {
    /// Energy of the problem with the cavity.
    pub w: T,
    /// Energy of the cavity-free problem.
    pub w0: T,
    /// (W − W₀)/W₀.
    pub ratio: T,
    /// |(W − W₀) − ∫_∂D u₀·σ(u,p)n|, n the outward normal of D.
    pub identity_residual: T,
    pub identity_rhs: T,
    /// ∫_D |∇u₀|².
    pub grad_energy_d: T,
    /// ‖g‖²_{H^{3/2}(∂Ω)}.
    pub gnorm2: T,
    /// Target mesh size.
    pub h: T,
    pub h_max: T,
    pub datum_id: String,
    /// |D| of the exact shape, 0 without a cavity.
    pub area: T,
    /// |D| of the meshed polygon.
    pub polygon_area: T,
    pub d0: Option<T>,
    /// |pairing − energy| / (1 + energy) for the cavity and cavity-free solves.
    pub duality_gap: T,
    pub duality_gap0: T,
    pub net_force_outer: [T; 2],
    pub net_force_cavity: [T; 2],
    pub solver_residual: T,
    pub solver_residual0: T,
    /// ∫_D|∇u₀|² / (W − W₀); infinite when the gap is not positive.
    pub lemma_quotient: T,
    pub n_triangles: usize,
}

/// Fields and systems behind a measurement, kept for export.
#[derive(Debug, Clone)]
pub struct MeasuredFields<T> {
    pub system: FESystem<T>,
    pub field: StokesField<T>,
    pub system0: FESystem<T>,
    pub field0: StokesField<T>,
    pub datum: BoundaryDatum<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeEstimate<T> {
    pub lower: T,
    pub upper: T,
    pub k: T,
    pub c: T,
    pub gnorm2: T,
    pub true_area: Option<T>,
}

impl<T: Real> SizeEstimate<T> {
    /// Whether lower ≤ |D| ≤ upper, when |D| is known.
    pub fn brackets(&self) -> Option<bool> {
        self.true_area.map(|a| self.lower <= a && a <= self.upper)
    }
}

fn refined<T: Real>(mut mesh: Mesh<T>, times: u32) -> Mesh<T> {
    for _ in 0..times {
        mesh = mesh.refine();
    }
    mesh
}

fn duality_gap<T: Real>(
    system: &FESystem<T>,
    field: &StokesField<T>,
    datum: &BoundaryDatum<T>,
    w: T,
) -> Result<T, FemError> {
    let g = datum.value_map(system)?;
    let r = boundary_residual(system, field, BoundaryTag::Outer)?;
    Ok((r.pair(|n| g[n]) - w).abs() / (T::one() + w))
}

/// Solves the cavity and cavity-free problems on matched meshes and collects
/// the energies and diagnostics.
pub fn measure<T: Real>(
    domain: &DomainSpec<T>,
    cavity: Option<&CavityShape<T>>,
    spec: &DatumSpec<T>,
    opts: &MeasureOptions<T>,
) -> Result<Measurement<T>, EstimatorError> {
    Ok(measure_fields(domain, cavity, spec, opts)?.0)
}

pub fn measure_fields<T: Real>(
    domain: &DomainSpec<T>,
    cavity: Option<&CavityShape<T>>,
    spec: &DatumSpec<T>,
    opts: &MeasureOptions<T>,
) -> Result<(Measurement<T>, MeasuredFields<T>), EstimatorError> {
    let Some(shape) = cavity else {
        return measure_cavity_free(domain, spec, opts);
    };
    let d0 = boundary_distance(domain, shape)?;
    let area = cavity_area(shape)?;
    let poly = cavity_polygon(shape, opts.mesh.h_target)?;
    let matched = triangulate_matched(domain, &poly, &opts.mesh)?;
    let full = refined(matched.full, opts.refine);
    let fluid = refined(matched.fluid, opts.refine);
    let polygon_area = full.cavity_polygon_area();

    let (system0, system) = rayon::join(|| assemble(full, opts.mu), || assemble(fluid, opts.mu));
    let (system0, system) = (system0?, system?);
    let datum = make_datum(spec, domain, &system0)?;
    let (field0, field) = rayon::join(
        || solve_dirichlet(&system0, &datum, false),
        || solve_dirichlet(&system, &datum, true),
    );
    let (field0, field) = (field0?, field?);

    let w0 = strain_energy(&system0, &field0);
    let w = strain_energy(&system, &field);
    if !(w0 > T::zero()) {
        return Err(EstimatorError::ZeroEnergy);
    }
    let outer = boundary_residual(&system, &field, BoundaryTag::Outer)?;
    let cav = boundary_residual(&system, &field, BoundaryTag::Cavity)?;

    // u₀ on the cavity nodes, matched by coordinates
    let lookup = system0.node_lookup();
    let mut identity_rhs = T::zero();
    for (&n, r) in cav.nodes.iter().zip(&cav.r) {
        let m = *lookup
            .get(&coord_key_of(system.nodes[n]))
            .ok_or(FemError::Internal(format!("cavity node {n} missing from the full mesh")))?;
        let u0 = field0.velocity_at_node(m);
        // the residual carries the fluid normal, which points into D
        identity_rhs -= r[0] * u0[0] + r[1] * u0[1];
    }
    let gap = w - w0;
    let grad_energy_d = gradient_energy_on_region(&system0, &field0, shape)?;
    let lemma_quotient = if gap > T::zero() { grad_energy_d / gap } else { T::infinity() };

    let m = Measurement {
        w,
        w0,
        ratio: gap / w0,
        identity_residual: (gap - identity_rhs).abs(),
        identity_rhs,
        grad_energy_d,
        gnorm2: datum.h32_parts().squared(),
        h: opts.effective_h(),
        h_max: system.mesh.h_max,
        datum_id: spec.id(),
        area,
        polygon_area,
        d0: Some(d0),
        duality_gap: duality_gap(&system, &field, &datum, w)?,
        duality_gap0: duality_gap(&system0, &field0, &datum, w0)?,
        net_force_outer: outer.net_force(),
        net_force_cavity: cav.net_force(),
        solver_residual: field.residual,
        solver_residual0: field0.residual,
        lemma_quotient,
        n_triangles: system.mesh.n_triangles(),
    };
    Ok((
        m,
        MeasuredFields {
            system,
            field,
            system0,
            field0,
            datum,
        },
    ))
}

fn measure_cavity_free<T: Real>(
    domain: &DomainSpec<T>,
    spec: &DatumSpec<T>,
    opts: &MeasureOptions<T>,
) -> Result<(Measurement<T>, MeasuredFields<T>), EstimatorError> {
    let mesh = refined(triangulate_with(domain, None, &opts.mesh)?, opts.refine);
    let system = assemble(mesh, opts.mu)?;
    let datum = make_datum(spec, domain, &system)?;
    let field = solve_dirichlet(&system, &datum, false)?;
    let w = strain_energy(&system, &field);
    if !(w > T::zero()) {
        return Err(EstimatorError::ZeroEnergy);
    }
    let outer = boundary_residual(&system, &field, BoundaryTag::Outer)?;
    let gap = duality_gap(&system, &field, &datum, w)?;
    let m = Measurement {
        w,
        w0: w,
        ratio: T::zero(),
        identity_residual: T::zero(),
        identity_rhs: T::zero(),
        grad_energy_d: T::zero(),
        gnorm2: datum.h32_parts().squared(),
        h: opts.effective_h(),
        h_max: system.mesh.h_max,
        datum_id: spec.id(),
        area: T::zero(),
        polygon_area: T::zero(),
        d0: None,
        duality_gap: gap,
        duality_gap0: gap,
        net_force_outer: outer.net_force(),
        net_force_cavity: [T::zero(); 2],
        solver_residual: field.residual,
        solver_residual0: field.residual,
        lemma_quotient: T::infinity(),
        n_triangles: system.mesh.n_triangles(),
    };
    Ok((
        m,
        MeasuredFields {
            system0: system.clone(),
            field0: field.clone(),
            system,
            field,
            datum,
        },
    ))
}

/// (W − W₀)/W₀.
pub fn ratio<T: Real>(w: T, w0: T) -> Result<T, EstimatorError> {
    if w0 == T::zero() {
        return Err(EstimatorError::ZeroEnergy);
    }
    Ok((w - w0) / w0)
}

/// K·(W − W₀)/W₀.
pub fn upper_bound<T: Real>(m: &Measurement<T>, k: T) -> Result<T, EstimatorError> {
    if !(k > T::zero()) {
        return Err(EstimatorError::BadConstant(k.as_f64()));
    }
    Ok(k * ratio(m.w, m.w0)?)
}

/// C·(W − W₀)² / (‖g‖² W₀).
pub fn lower_bound<T: Real>(m: &Measurement<T>, c: T, gnorm2: T) -> Result<T, EstimatorError> {
    if !(c > T::zero()) {
        return Err(EstimatorError::BadConstant(c.as_f64()));
    }
    if !(gnorm2 > T::zero()) {
        return Err(EstimatorError::BadConstant(gnorm2.as_f64()));
    }
    if m.w0 == T::zero() {
        return Err(EstimatorError::ZeroEnergy);
    }
    let gap = m.w - m.w0;
    Ok(c * gap * gap / (gnorm2 * m.w0))
}

pub fn estimate<T: Real>(m: &Measurement<T>, k: T, c: T) -> Result<SizeEstimate<T>, EstimatorError> {
    Ok(SizeEstimate {
        lower: lower_bound(m, c, m.gnorm2)?,
        upper: upper_bound(m, k)?,
        k,
        c,
        gnorm2: m.gnorm2,
        true_area: (m.area > T::zero()).then_some(m.area),
    })
}

/// The identity residual of [`measure`].
pub fn identity_check<T: Real>(
    domain: &DomainSpec<T>,
    cavity: Option<&CavityShape<T>>,
    spec: &DatumSpec<T>,
    opts: &MeasureOptions<T>,
) -> Result<T, EstimatorError> {
    Ok(measure(domain, cavity, spec, opts)?.identity_residual)
}

/// Minimal data a calibration needs from one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample<T> {
    pub area: T,
    pub w: T,
    pub w0: T,
    pub gnorm2: T,
}

impl<T: Real> From<&Measurement<T>> for CalibrationSample<T> {
    fn from(m: &Measurement<T>) -> Self {
        Self {
            area: m.area,
            w: m.w,
            w0: m.w0,
            gnorm2: m.gnorm2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration<T> {
    pub k_hat: T,
    pub c_hat: T,
    pub used: usize,
    pub excluded: usize,
}

impl<T: Real> CalibrationSample<T> {
    fn ratio(&self) -> T {
        (self.w - self.w0) / self.w0
    }

    pub fn upper(&self, k: T) -> T {
        k * self.ratio()
    }

    pub fn lower(&self, c: T) -> T {
        let gap = self.w - self.w0;
        c * gap * gap / (self.gnorm2 * self.w0)
    }

    fn usable(&self) -> bool {
        let r = self.ratio();
        r.is_finite() && r > T::zero() && self.gnorm2 > T::zero() && self.area > T::zero()
    }
}

/// Smallest K and largest C that bracket every usable sample. Samples with a
/// nonpositive gap are excluded.
pub fn calibrate<T: Real>(samples: &[CalibrationSample<T>]) -> Result<Calibration<T>, EstimatorError> {
    let usable: Vec<&CalibrationSample<T>> = samples.iter().filter(|s| s.usable()).collect();
    let excluded = samples.len() - usable.len();
    if usable.is_empty() {
        return Err(EstimatorError::NoValidRecords { excluded });
    }
    let mut k = T::zero();
    let mut c = T::infinity();
    for s in &usable {
        let gap = s.w - s.w0;
        k = k.max(s.area / s.ratio());
        c = c.min(s.area * s.gnorm2 * s.w0 / (gap * gap));
    }
    // the divisions above can land one ulp on the wrong side
    let nudge = T::one() + T::lit(2.0) * T::epsilon();
    while usable.iter().any(|s| s.upper(k) < s.area) {
        k = k * nudge;
    }
    while usable.iter().any(|s| s.lower(c) > s.area) {
        c = c / nudge;
    }
    Ok(Calibration {
        k_hat: k,
        c_hat: c,
        used: usable.len(),
        excluded,
    })
}

/// Calibration within each group of samples sharing a key, in key order.
pub fn calibrate_by<T: Real, K: Ord + Clone>(
    samples: &[(K, CalibrationSample<T>)],
) -> Vec<(K, Result<Calibration<T>, EstimatorError>)> {
    let mut groups: BTreeMap<K, Vec<CalibrationSample<T>>> = BTreeMap::new();
    for (k, s) in samples {
        groups.entry(k.clone()).or_default().push(*s);
    }
    groups.into_iter().map(|(k, g)| (k, calibrate(&g))).collect()
}

/// Empirical constant of ∫_D|∇u₀|² ≤ C (W − W₀): the largest finite quotient.
pub fn lemma_constant<T: Real>(measurements: &[Measurement<T>]) -> Option<T> {
    measurements
        .iter()
        .map(|m| m.lemma_quotient)
        .filter(|q| q.is_finite())
        .fold(None, |acc: Option<T>, q| Some(acc.map_or(q, |a| a.max(q))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(area: f64, ratio: f64, gnorm2: f64) -> CalibrationSample<f64> {
        CalibrationSample {
            area,
            w: 1.0 + ratio,
            w0: 1.0,
            gnorm2,
        }
    }

    fn m(w: f64, w0: f64) -> Measurement<f64> {
        Measurement {
            w,
            w0,
            ratio: (w - w0) / w0,
            identity_residual: 0.0,
            identity_rhs: 0.0,
            grad_energy_d: 0.0,
            gnorm2: 4.0,
            h: 0.1,
            h_max: 0.1,
            datum_id: "x".into(),
            area: 0.0,
            polygon_area: 0.0,
            d0: None,
            duality_gap: 0.0,
            duality_gap0: 0.0,
            net_force_outer: [0.0; 2],
            net_force_cavity: [0.0; 2],
            solver_residual: 0.0,
            solver_residual0: 0.0,
            lemma_quotient: f64::INFINITY,
            n_triangles: 0,
        }
    }

    #[test]
    fn bound_arithmetic() {
        assert!((ratio(1.2f64, 1.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(ratio(1.0f64, 1.0).unwrap(), 0.0);
        assert!(matches!(ratio(1.0f64, 0.0), Err(EstimatorError::ZeroEnergy)));
        assert!((upper_bound(&m(1.05, 1.0), 2.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(upper_bound(&m(1.0, 1.0), 2.0).unwrap(), 0.0);
        assert!((lower_bound(&m(1.2, 1.0), 0.1, 4.0).unwrap() - 0.001).abs() < 1e-15);
        assert_eq!(lower_bound(&m(1.0, 1.0), 0.1, 4.0).unwrap(), 0.0);
        assert!(upper_bound(&m(1.1, 1.0), 0.0).is_err());
    }

    #[test]
    fn single_and_pair_calibration() {
        let c = calibrate(&[sample(0.031, 0.05, 1.0)]).unwrap();
        assert!((c.k_hat - 0.62).abs() < 1e-14);
        let c = calibrate(&[sample(0.031, 0.05, 1.0), sample(0.01, 0.01, 1.0)]).unwrap();
        assert!((c.k_hat - 1.0).abs() < 1e-14);
        assert_eq!(c.used, 2);
    }

    #[test]
    fn nonpositive_gaps_are_excluded() {
        let c = calibrate(&[sample(0.01, -0.01, 1.0), sample(0.02, 0.1, 1.0)]).unwrap();
        assert_eq!(c.excluded, 1);
        assert!(matches!(
            calibrate(&[sample(0.01, 0.0, 1.0)]),
            Err(EstimatorError::NoValidRecords { excluded: 1 })
        ));
    }

    #[test]
    fn sandwich_holds_exactly() {
        let samples: Vec<_> = (1..40)
            .map(|i| {
                let x = i as f64;
                sample(0.001 * x + 1e-4 * (x * 1.7).sin(), 0.003 * x * x + 0.01 * (x * 0.3).cos().abs(), 1.0 + 0.1 * x)
            })
            .collect();
        let c = calibrate(&samples).unwrap();
        for s in &samples {
            assert!(s.lower(c.c_hat) <= s.area && s.area <= s.upper(c.k_hat));
        }
    }

    #[test]
    fn grouped_calibration_in_key_order() {
        let s = vec![(3, sample(0.01, 0.1, 1.0)), (1, sample(0.02, 0.1, 1.0)), (3, sample(0.03, 0.1, 1.0))];
        let g = calibrate_by(&s);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].0, 1);
        assert!((g[1].1.as_ref().unwrap().k_hat - 0.3).abs() < 1e-14);
    }
}
