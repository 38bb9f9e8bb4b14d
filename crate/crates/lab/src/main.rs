use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cavlab::experiment::{Constants, RunOutput};
use cavlab::records::{calibration_report, read_csv, write_convergence, write_csv};
use cavlab::svg::{scatter, Overlay};
use cavlab::{convergence_study, run_grid, run_measure, run_sweep, Config, LabError};
use cavlab_core::bdata::{balance, default_family, make_datum};
use cavlab_core::fem::{
    assemble, boundary_residual, cauchy_force_field, solve_dirichlet, strain_energy, write_nodal_table,
    write_traction_table,
};
use cavlab_core::mesh::{cavity_polygon, triangulate_matched, triangulate_with, write_mesh, BoundaryTag, Mesh};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cavlab", version, about = "Stokes cavity-size lab: forward solves, energy gaps and size bounds")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Target mesh size, overriding fem.h.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Uniform refinements after meshing; for `converge`, the number of refined levels.
    #[arg(long, global = true)]
    refine: Option<u32>,
}

#[derive(Args, Debug, Default, Clone, Copy)]
struct Bounds {
    /// Upper-bound constant K; calibrated in sample when omitted.
    #[arg(long)]
    k: Option<f64>,
    /// Lower-bound constant C; calibrated in sample when omitted.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Mesh the domain (with the configured cavity) and write the mesh file.
    Mesh,
    /// Solve the cavity problem and export nodal and traction tables.
    Solve,
    /// Measure W, W0 and the diagnostics for the configured cavity.
    Measure(#[command(flatten)] Bounds),
    /// Run the positions x fractions x d0 grid.
    Grid(#[command(flatten)] Bounds),
    /// Run the concentric size sweep.
    Sweep(#[command(flatten)] Bounds),
    /// Repeat one measurement on uniformly refined meshes.
    Converge,
    /// Calibrate K and C from a records CSV, overall and per d0.
    Calibrate {
        /// Records CSV (default: <out>/grid.csv).
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Scatter plot of a records CSV.
    Plot {
        /// Records CSV (default: <out>/grid.csv).
        #[arg(long)]
        records: Option<PathBuf>,
        /// Draw the calibrated upper line and lower curve.
        #[arg(long)]
        overlay: bool,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>, LabError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), LabError> {
    serde_json::to_writer_pretty(create(path)?, value).map_err(|e| LabError::Io(e.to_string()))
}

fn overlay_for(records: &[cavlab::ExperimentRecord], domain_area: f64) -> Option<Overlay> {
    let samples: Vec<_> = records.iter().map(|r| r.sample(domain_area)).collect();
    let cal = cavlab_core::estimator::calibrate(&samples).ok()?;
    let mut q: Vec<f64> = records
        .iter()
        .filter(|r| r.gnorm2 > 0.0)
        .map(|r| r.w0 / r.gnorm2)
        .collect();
    q.sort_by(f64::total_cmp);
    Some(Overlay {
        k_hat: cal.k_hat,
        c_hat: cal.c_hat,
        w0_over_gnorm2: *q.get(q.len() / 2)?,
        domain_area,
    })
}

fn emit_run(out: &Path, name: &str, run: &RunOutput, domain_area: f64, plot: bool) -> Result<(), LabError> {
    let csv = out.join(format!("{name}.csv"));
    write_csv(&run.records, create(&csv)?)?;
    let cal = run.calibration.map(|c| {
        serde_json::json!({"k_hat": c.k_hat, "c_hat": c.c_hat, "used": c.used, "excluded": c.excluded})
    });
    write_json(
        &out.join(format!("{name}.json")),
        &serde_json::json!({"runs": run.details, "skipped": run.skipped, "calibration": cal}),
    )?;
    if plot {
        fs::write(out.join(format!("{name}.svg")), scatter(&run.records, overlay_for(&run.records, domain_area))?)?;
    }
    println!("{} records -> {}", run.records.len(), csv.display());
    if !run.skipped.is_empty() {
        println!("{} combinations skipped (see {name}.json)", run.skipped.len());
    }
    if let Some(c) = run.calibration {
        println!("K_hat {:.6e}  C_hat {:.6e}", c.k_hat, c.c_hat);
    }
    Ok(())
}

fn mesh_for(cfg: &Config, h: f64, refine: u32) -> Result<Mesh<f64>, LabError> {
    let domain = cfg.domain_spec();
    let opts = cfg.measure_options(Some(h), 0)?.mesh;
    let mut mesh = match cfg.cavity_shape()? {
        Some(s) => {
            cavlab_core::geometry::boundary_distance(&domain, &s)?;
            triangulate_matched(&domain, &cavity_polygon(&s, h)?, &opts)?.fluid
        }
        None => triangulate_with(&domain, None, &opts)?,
    };
    for _ in 0..refine {
        mesh = mesh.refine();
    }
    Ok(mesh)
}

fn run(cli: Cli) -> Result<(), LabError> {
    let c = &cli.common;
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(LabError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Config(e.to_string()))?;
    }
    let cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    fs::create_dir_all(&c.out).map_err(|e| LabError::Io(format!("{}: {e}", c.out.display())))?;
    let refine = c.refine.unwrap_or(0);
    let h = c.h.unwrap_or(cfg.fem.h);
    let opts = cfg.measure_options(Some(h), refine)?;
    let domain_area = cfg.domain_spec().area();
    let constants = |b: &Bounds| Constants { k: b.k, c: b.c };

    match &cli.cmd {
        Cmd::Mesh => {
            let mesh = mesh_for(&cfg, h, refine)?;
            let path = c.out.join("mesh.txt");
            write_mesh(&mesh, create(&path)?)?;
            let q = mesh.quality();
            println!(
                "{} vertices, {} triangles, min angle {:.2}, h_max {:.4e} -> {}",
                q.n_vertices,
                q.n_triangles,
                q.min_angle,
                q.h_max,
                path.display()
            );
        }
        Cmd::Solve => {
            let domain = cfg.domain_spec();
            let mesh = mesh_for(&cfg, h, refine)?;
            let system = assemble(mesh, cfg.fem.mu)?;
            let spec = match (cfg.cavity_shape()?, cfg.datum.balance) {
                (Some(s), true) => balance(&default_family(cfg.datum.amplitude), &domain, &s, &opts.mesh)?.spec,
                _ => cfg.datum_spec(),
            };
            let datum = make_datum(&spec, &domain, &system)?;
            let field = solve_dirichlet(&system, &datum, true)?;
            write_nodal_table(&system, &field, create(&c.out.join("nodal.txt"))?)?;
            let outer = boundary_residual(&system, &field, BoundaryTag::Outer)?;
            write_traction_table(&cauchy_force_field(&system, &outer)?, create(&c.out.join("traction.txt"))?)?;
            if system.has_tag(BoundaryTag::Cavity) {
                let cav = boundary_residual(&system, &field, BoundaryTag::Cavity)?;
                write_traction_table(
                    &cauchy_force_field(&system, &cav)?,
                    create(&c.out.join("traction_cavity.txt"))?,
                )?;
            }
            println!(
                "W {:.16e}  residual {:.3e}  datum {}",
                strain_energy(&system, &field),
                field.residual,
                spec.id()
            );
        }
        Cmd::Measure(b) => {
            let run = run_measure(&cfg, &opts, constants(b))?;
            let r = &run.records[0];
            println!(
                "W {:.16e}\nW0 {:.16e}\nratio {:.16e}\nidentity_residual {:.3e}\ngrad_energy_D {:.6e}\ngnorm2 {:.6e}",
                r.w, r.w0, r.ratio, r.identity_residual, r.grad_energy_d, r.gnorm2
            );
            emit_run(&c.out, "measure", &run, domain_area, false)?;
        }
        Cmd::Grid(b) => emit_run(&c.out, "grid", &run_grid(&cfg, &opts, constants(b))?, domain_area, true)?,
        Cmd::Sweep(b) => emit_run(&c.out, "sweep", &run_sweep(&cfg, &opts, constants(b))?, domain_area, true)?,
        Cmd::Converge => {
            let levels = c.refine.map_or(3, |n| n + 1);
            let base = cfg.measure_options(Some(h), 0)?;
            let rows = convergence_study(&cfg, &base, levels)?;
            let path = c.out.join("converge.csv");
            write_convergence(&rows, create(&path)?)?;
            println!("level          h              W             W0          ratio   rel_change_ratio");
            for r in &rows {
                println!(
                    "{:>5} {:>10.4e} {:>14.8e} {:>14.8e} {:>14.8e} {:>18.3e}",
                    r.level, r.h, r.w, r.w0, r.ratio, r.dratio
                );
            }
            println!("-> {}", path.display());
        }
        Cmd::Calibrate { records } => {
            let path = records.clone().unwrap_or_else(|| c.out.join("grid.csv"));
            let file = File::open(&path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
            let recs = read_csv(file)?;
            let report = calibration_report(&recs, domain_area, cfg.d0_unit(), &cfg.experiment.d0_values)?;
            let text = report.to_text();
            print!("{text}");
            fs::write(c.out.join("calibration.txt"), &text)?;
            write_json(&c.out.join("calibration.json"), &report)?;
        }
        Cmd::Plot { records, overlay } => {
            let path = records.clone().unwrap_or_else(|| c.out.join("grid.csv"));
            let file = File::open(&path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
            let recs = read_csv(file)?;
            let ov = if *overlay { overlay_for(&recs, domain_area) } else { None };
            let svg_path = c.out.join("scatter.svg");
            fs::write(&svg_path, scatter(&recs, ov)?)?;
            println!("{} markers -> {}", recs.len(), svg_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
