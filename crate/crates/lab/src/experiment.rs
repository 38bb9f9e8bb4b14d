//! Grid, sweep and convergence runs.

use std::time::Instant;

use cavlab_core::bdata::{balance, default_family, DatumSpec};
use cavlab_core::estimator::{calibrate, measure, Calibration, CalibrationSample, MeasureOptions, Measurement};
use cavlab_core::geometry::{boundary_distance, cavity_area, CavityShape, DomainSpec, Point};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Config, LabError};

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub run_id: u64,
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub area_frac: f64,
    pub d0: f64,
    pub h: f64,
    pub w0: f64,
    pub w: f64,
    pub ratio: f64,
    pub grad_energy_d: f64,
    pub identity_residual: f64,
    pub gnorm2: f64,
    pub lower: f64,
    pub upper: f64,
    pub wall_ms: f64,
}

impl ExperimentRecord {
    pub fn area(&self, domain_area: f64) -> f64 {
        self.area_frac * domain_area
    }

    pub fn sample(&self, domain_area: f64) -> CalibrationSample<f64> {
        CalibrationSample {
            area: self.area(domain_area),
            w: self.w,
            w0: self.w0,
            gnorm2: self.gnorm2,
        }
    }
}

/// Diagnostics kept alongside a record.
#[derive(Debug, Clone, Serialize)]
pub struct RunDetail {
    pub run_id: u64,
    pub datum: String,
    pub lambda: Option<[f64; 3]>,
    pub h_max: f64,
    pub n_triangles: usize,
    pub area: f64,
    pub polygon_area: f64,
    pub boundary_distance: Option<f64>,
    pub identity_rhs: f64,
    pub duality_gap: f64,
    pub duality_gap0: f64,
    pub net_force_outer: [f64; 2],
    pub net_force_cavity: [f64; 2],
    pub solver_residual: f64,
    pub solver_residual0: f64,
    pub lemma_quotient: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Skip {
    pub position: [f64; 2],
    pub fraction: f64,
    pub d0: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<ExperimentRecord>,
    pub details: Vec<RunDetail>,
    pub skipped: Vec<Skip>,
    pub calibration: Option<Calibration<f64>>,
}

/// Bound constants: in-sample calibration unless given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Constants {
    pub k: Option<f64>,
    pub c: Option<f64>,
}

struct Run {
    m: Measurement<f64>,
    lambda: Option<[f64; 3]>,
    wall_ms: f64,
}

fn run_one(
    domain: &DomainSpec<f64>,
    shape: Option<&CavityShape<f64>>,
    cfg: &Config,
    opts: &MeasureOptions<f64>,
) -> Result<Run, LabError> {
    let t = Instant::now();
    let (spec, lambda) = match (cfg.datum.balance, shape) {
        (true, Some(s)) => {
            let b = balance(&default_family(cfg.datum.amplitude), domain, s, &opts.mesh)?;
            (b.spec, Some(b.lambda))
        }
        (true, None) => {
            log::warn!("datum.balance needs a cavity; using the preset unbalanced");
            (cfg.datum_spec(), None)
        }
        _ => (cfg.datum_spec(), None),
    };
    let m = measure(domain, shape, &spec, opts)?;
    Ok(Run {
        m,
        lambda,
        wall_ms: t.elapsed().as_secs_f64() * 1e3,
    })
}

fn record(run_id: u64, shape: Option<&CavityShape<f64>>, domain: &DomainSpec<f64>, d0: f64, run: &Run) -> ExperimentRecord {
    let m = &run.m;
    let (c, radius) = match shape {
        Some(CavityShape::Circle { center, radius }) => (*center, *radius),
        Some(s) => {
            let (lo, hi) = s.bbox();
            (lo.midpoint(hi), (m.area / std::f64::consts::PI).sqrt())
        }
        None => (domain.center(), 0.0),
    };
    ExperimentRecord {
        run_id,
        cx: c.x,
        cy: c.y,
        radius,
        area_frac: m.area / domain.area(),
        d0,
        h: m.h,
        w0: m.w0,
        w: m.w,
        ratio: m.ratio,
        grad_energy_d: m.grad_energy_d,
        identity_residual: m.identity_residual,
        gnorm2: m.gnorm2,
        lower: f64::NAN,
        upper: f64::NAN,
        wall_ms: run.wall_ms,
    }
}

fn detail(run_id: u64, run: &Run) -> RunDetail {
    let m = &run.m;
    RunDetail {
        run_id,
        datum: m.datum_id.clone(),
        lambda: run.lambda,
        h_max: m.h_max,
        n_triangles: m.n_triangles,
        area: m.area,
        polygon_area: m.polygon_area,
        boundary_distance: m.d0,
        identity_rhs: m.identity_rhs,
        duality_gap: m.duality_gap,
        duality_gap0: m.duality_gap0,
        net_force_outer: m.net_force_outer,
        net_force_cavity: m.net_force_cavity,
        solver_residual: m.solver_residual,
        solver_residual0: m.solver_residual0,
        lemma_quotient: m.lemma_quotient.is_finite().then_some(m.lemma_quotient),
    }
}

/// Fills `lower` and `upper` of every record. Returns the in-sample
/// calibration when one was needed and possible.
pub fn apply_bounds(
    records: &mut [ExperimentRecord],
    domain_area: f64,
    constants: Constants,
) -> Option<Calibration<f64>> {
    let calibration = if constants.k.is_none() || constants.c.is_none() {
        let samples: Vec<_> = records.iter().map(|r| r.sample(domain_area)).collect();
        match calibrate(&samples) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("bounds left undefined: {e}");
                None
            }
        }
    } else {
        None
    };
    let k = constants.k.or(calibration.map(|c| c.k_hat));
    let c = constants.c.or(calibration.map(|c| c.c_hat));
    for r in records.iter_mut() {
        let s = r.sample(domain_area);
        r.upper = k.map_or(f64::NAN, |k| s.upper(k));
        r.lower = c.map_or(f64::NAN, |c| if s.gnorm2 > 0.0 { s.lower(c) } else { f64::NAN });
    }
    calibration
}

/// Positions × fractions × d₀ values, skipping combinations whose disk would
/// come closer to ∂Ω than the requested d₀. Each distinct disk is solved once.
pub fn run_grid(cfg: &Config, opts: &MeasureOptions<f64>, constants: Constants) -> Result<RunOutput, LabError> {
    let domain = cfg.domain_spec();
    let e = &cfg.experiment;
    let unit = cfg.d0_unit();
    let tol = 1e-12 * domain.side;
    let (nf, nd) = (e.fractions.len() as u64, e.d0_values.len() as u64);

    let mut skipped = Vec::new();
    // (position, fraction) → feasible d0 indices
    let mut jobs: Vec<(usize, usize, CavityShape<f64>, Vec<usize>)> = Vec::new();
    for (i, p) in e.positions.iter().enumerate() {
        for (j, &f) in e.fractions.iter().enumerate() {
            let shape = CavityShape::disk_with_fraction(&domain, Point::new(p[0], p[1]), f);
            let dist = boundary_distance(&domain, &shape);
            let mut ks = Vec::new();
            for (k, &mult) in e.d0_values.iter().enumerate() {
                let d0 = mult * unit;
                let reason = match &dist {
                    Err(err) => Some(err.to_string()),
                    Ok(d) if *d < d0 - tol => Some(format!("distance {d:.6e} to the boundary is below d0 = {d0:.6e}")),
                    Ok(_) => None,
                };
                match reason {
                    Some(reason) => {
                        log::info!("skip position {p:?} fraction {f} d0 {d0}: {reason}");
                        skipped.push(Skip {
                            position: *p,
                            fraction: f,
                            d0,
                            reason,
                        });
                    }
                    None => ks.push(k),
                }
            }
            if !ks.is_empty() {
                jobs.push((i, j, shape, ks));
            }
        }
    }
    if jobs.is_empty() {
        return Err(LabError::Geometry("no feasible grid combination".into()));
    }
    let runs: Vec<Run> = jobs
        .par_iter()
        .map(|(_, _, shape, _)| run_one(&domain, Some(shape), cfg, opts))
        .collect::<Result<_, _>>()?;

    let mut records = Vec::new();
    let mut details = Vec::new();
    for ((i, j, shape, ks), run) in jobs.iter().zip(&runs) {
        for &k in ks {
            let id = (*i as u64 * nf + *j as u64) * nd + k as u64;
            records.push(record(id, Some(shape), &domain, e.d0_values[k] * unit, run));
            details.push(detail(id, run));
        }
    }
    records.sort_by_key(|r| r.run_id);
    details.sort_by_key(|d| d.run_id);
    let calibration = apply_bounds(&mut records, domain.area(), constants);
    Ok(RunOutput {
        records,
        details,
        skipped,
        calibration,
    })
}

/// Concentric disks at the domain center, in radius order.
pub fn run_sweep(cfg: &Config, opts: &MeasureOptions<f64>, constants: Constants) -> Result<RunOutput, LabError> {
    let domain = cfg.domain_spec();
    let shapes: Vec<CavityShape<f64>> = cfg
        .sweep_radii()
        .into_iter()
        .map(|r| CavityShape::circle(domain.center(), r))
        .collect();
    let dists: Vec<f64> = shapes
        .iter()
        .map(|s| boundary_distance(&domain, s))
        .collect::<Result<_, _>>()?;
    let runs: Vec<Run> = shapes
        .par_iter()
        .map(|s| run_one(&domain, Some(s), cfg, opts))
        .collect::<Result<_, _>>()?;
    let mut records: Vec<ExperimentRecord> = shapes
        .iter()
        .zip(&runs)
        .zip(&dists)
        .enumerate()
        .map(|(k, ((s, run), &d))| record(k as u64, Some(s), &domain, d, run))
        .collect();
    let details = runs.iter().enumerate().map(|(k, r)| detail(k as u64, r)).collect();
    let calibration = apply_bounds(&mut records, domain.area(), constants);
    Ok(RunOutput {
        records,
        details,
        skipped: Vec::new(),
        calibration,
    })
}

/// The configured cavity (or none) measured once.
pub fn run_measure(cfg: &Config, opts: &MeasureOptions<f64>, constants: Constants) -> Result<RunOutput, LabError> {
    let domain = cfg.domain_spec();
    let shape = cfg.cavity_shape()?;
    let d0 = match &shape {
        Some(s) => {
            cavity_area(s)?;
            boundary_distance(&domain, s)?
        }
        None => 0.0,
    };
    let run = run_one(&domain, shape.as_ref(), cfg, opts)?;
    let mut records = vec![record(0, shape.as_ref(), &domain, d0, &run)];
    let calibration = apply_bounds(&mut records, domain.area(), constants);
    Ok(RunOutput {
        records,
        details: vec![detail(0, &run)],
        skipped: Vec::new(),
        calibration,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub h_max: f64,
    pub n_triangles: usize,
    pub w: f64,
    pub w0: f64,
    pub ratio: f64,
    pub identity_residual: f64,
    /// Relative change from the previous level; NaN on the first.
    pub dw: f64,
    pub dw0: f64,
    pub dratio: f64,
}

/// One measurement repeated on `levels` uniformly refined meshes.
pub fn convergence_study(
    cfg: &Config,
    opts: &MeasureOptions<f64>,
    levels: u32,
) -> Result<Vec<ConvergenceRow>, LabError> {
    if levels < 2 {
        return Err(LabError::Config(format!("a convergence study needs at least 2 levels, got {levels}")));
    }
    let domain = cfg.domain_spec();
    let shape = cfg.cavity_shape()?;
    let spec: DatumSpec<f64> = match (&shape, cfg.datum.balance) {
        (Some(s), true) => balance(&default_family(cfg.datum.amplitude), &domain, s, &opts.mesh)?.spec,
        _ => cfg.datum_spec(),
    };
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for l in 0..levels {
        let o = MeasureOptions {
            refine: opts.refine + l,
            ..opts.clone()
        };
        let m = measure(&domain, shape.as_ref(), &spec, &o)?;
        let rel = |new: f64, old: f64| (new - old).abs() / old.abs().max(f64::MIN_POSITIVE);
        let (dw, dw0, dratio) = match rows.last() {
            Some(p) => (rel(m.w, p.w), rel(m.w0, p.w0), rel(m.ratio, p.ratio)),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        log::info!("level {l}: W {:.10e} W0 {:.10e} ratio {:.6e}", m.w, m.w0, m.ratio);
        rows.push(ConvergenceRow {
            level: l,
            h: m.h,
            h_max: m.h_max,
            n_triangles: m.n_triangles,
            w: m.w,
            w0: m.w0,
            ratio: m.ratio,
            identity_residual: m.identity_residual,
            dw,
            dw0,
            dratio,
        });
    }
    Ok(rows)
}
