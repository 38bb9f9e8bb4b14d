use std::time::Instant;

use cavlab_core::bdata::{make_datum, DatumSpec, Preset};
use cavlab_core::fem::{
    assemble, boundary_residual, cauchy_force_field, gradient_energy_on_region, residual_vector, solve_dirichlet,
    strain_energy, FESystem,
};
use cavlab_core::geometry::{CavityShape, DomainSpec, Point};
use cavlab_core::mesh::{cavity_polygon, triangulate_with, BoundaryTag, MeshOptions};

fn square_system(h: f64) -> FESystem<f64> {
    let dom = DomainSpec::unit_square();
    let mesh = triangulate_with(&dom, None, &MeshOptions::new(h)).unwrap();
    assemble(mesh, 1.0).unwrap()
}

fn pairing_gap(system: &FESystem<f64>, field: &cavlab_core::fem::StokesField<f64>, datum: &cavlab_core::bdata::BoundaryDatum<f64>) -> f64 {
    let r = boundary_residual(system, field, BoundaryTag::Outer).unwrap();
    let g = datum.value_map(system).unwrap();
    let w = strain_energy(system, field);
    (r.pair(|n| g[n]) - w).abs() / (1.0 + w)
}

#[test]
fn poiseuille_is_reproduced() {
    let t0 = Instant::now();
    let dom = DomainSpec::unit_square();
    let s = square_system(1.0 / 32.0);
    let d = make_datum(&DatumSpec::preset(Preset::PoiseuilleTrace, 1.0), &dom, &s).unwrap();
    let f = solve_dirichlet(&s, &d, false).unwrap();
    let w0 = strain_energy(&s, &f);
    println!("W0 = {w0:.16e}, residual {:.3e}, steps {}, {:?}", f.residual, f.refinement_steps, t0.elapsed());
    assert!((w0 - 1.0 / 3.0).abs() < 1e-8);
    assert!(f.residual <= 1e-10);
    let exact = s.interpolate(|p| [p.y * (1.0 - p.y), 0.0]);
    let err = f.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "velocity error {err}");
    let perr = f
        .p
        .iter()
        .zip(&s.mesh.vertices)
        .map(|(p, v)| (p - (1.0 - 2.0 * v.x)).abs())
        .fold(0.0, f64::max);
    assert!(perr < 1e-8, "pressure error {perr}");
    assert!(f.pressure_mean(&s).abs() < 1e-12);
    assert!(pairing_gap(&s, &f, &d) <= 1e-10);

    // traction on x = 1 is (1, 1 - 2y)
    let r = boundary_residual(&s, &f, BoundaryTag::Outer).unwrap();
    let tr = cauchy_force_field(&s, &r).unwrap();
    let mut worst: f64 = 0.0;
    for (p, psi) in tr.points.iter().zip(&tr.psi) {
        if (p.x - 1.0).abs() < 1e-12 && p.y > 0.1 && p.y < 0.9 {
            worst = worst.max((psi[0] - 1.0).abs()).max((psi[1] - (1.0 - 2.0 * p.y)).abs());
        }
    }
    assert!(worst < 0.05, "traction error {worst}");

    // ∫_D |∇u|² on the centered disk is π r⁴; on the whole square 1/3
    let disk = CavityShape::circle(Point::new(0.5, 0.5), 0.1);
    let g = gradient_energy_on_region(&s, &f, &disk).unwrap();
    assert!((g - std::f64::consts::PI * 1e-4).abs() < 1e-6 * std::f64::consts::PI, "{g}");
    let whole = CavityShape::Polygon {
        vertices: dom.corners().to_vec(),
    };
    let g = gradient_energy_on_region(&s, &f, &whole).unwrap();
    assert!((g - 1.0 / 3.0).abs() < 1e-10, "{g}");
}

#[test]
fn constant_datum_gives_constant_field() {
    let dom = DomainSpec::unit_square();
    let s = square_system(1.0 / 16.0);
    let d = make_datum(&DatumSpec::preset(Preset::Constant, 2.0), &dom, &s).unwrap();
    assert!(!d.h4.ok);
    let f = solve_dirichlet(&s, &d, false).unwrap();
    for n in 0..s.dofs.n_nodes {
        let v = f.velocity_at_node(n);
        assert!((v[0] - 2.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }
    assert!(f.p.iter().all(|p| p.abs() < 1e-10));
    let r = boundary_residual(&s, &f, BoundaryTag::Outer).unwrap();
    assert!(r.max_abs() < 1e-12);
    assert!(strain_energy(&s, &f) < 1e-12);
}

#[test]
fn rigid_motions_have_no_energy() {
    let s = square_system(1.0 / 20.0);
    let rot = s.interpolate(|p| [-(p.y - 0.3), p.x - 0.7]);
    let tr = s.interpolate(|_| [1.5, -0.25]);
    for u in [rot, tr] {
        let e: f64 = u.iter().zip(s.a.matvec(&u)).map(|(a, b)| a * b).sum();
        assert!(e.abs() <= 1e-12, "{e}");
    }
    assert!(s.a.asymmetry() <= 1e-14);
}

#[test]
fn cavity_problem_balances_and_is_orthogonal() {
    let dom = DomainSpec::unit_square();
    let disk = CavityShape::circle(Point::new(0.5, 0.5), 0.1);
    let poly = cavity_polygon(&disk, 1.0 / 32.0).unwrap();
    let mesh = triangulate_with(&dom, Some(&poly), &MeshOptions::new(1.0 / 32.0)).unwrap();
    let s = assemble(mesh, 1.0).unwrap();
    let d = make_datum(&DatumSpec::preset(Preset::TangentialTop, 1.0), &dom, &s).unwrap();
    assert!(solve_dirichlet(&s, &d, false).is_err());
    let f = solve_dirichlet(&s, &d, true).unwrap();
    assert!(pairing_gap(&s, &f, &d) <= 1e-10);
    let outer = boundary_residual(&s, &f, BoundaryTag::Outer).unwrap().net_force();
    let cav = boundary_residual(&s, &f, BoundaryTag::Cavity).unwrap().net_force();
    assert!((outer[0] + cav[0]).abs() < 1e-10 && (outer[1] + cav[1]).abs() < 1e-10);
    // interior residual vanishes
    let r = residual_vector(&s, &f);
    let worst = (0..s.dofs.n_nodes)
        .filter(|&n| s.dofs.node_tag[n].is_none())
        .map(|n| r[2 * n].abs().max(r[2 * n + 1].abs()))
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn elementwise_energy_matches_matrix_form() {
    let s = square_system(1.0 / 12.0);
    let u = s.interpolate(|p| [p.x * p.y - p.y * p.y, (p.x - 0.2).powi(2) + 0.3 * p.y]);
    let matrix: f64 = u.iter().zip(s.a.matvec(&u)).map(|(a, b)| a * b).sum();
    let elementwise = cavlab_core::fem::strain_energy_of(&s, &u);
    assert!((matrix - elementwise).abs() <= 1e-12 * matrix, "{matrix} {elementwise}");
    let rot = s.interpolate(|p| [-(p.y - 0.3), p.x - 0.7]);
    assert!(cavlab_core::fem::strain_energy_of(&s, &rot) <= 1e-24);
}
