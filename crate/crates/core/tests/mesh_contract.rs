use cavlab_core::geometry::{polygonalize, CavityShape, DomainSpec, Point};
use cavlab_core::mesh::{checks, triangulate, triangulate_matched, BoundaryTag, MeshOptions};

fn cavity_poly(cx: f64, cy: f64, r: f64, h: f64) -> Vec<Point<f64>> {
    let n = 64usize.max((std::f64::consts::TAU * r / h).ceil() as usize);
    polygonalize(&CavityShape::circle(Point::new(cx, cy), r), n).unwrap()
}

#[test]
fn fine_square_meets_contract() {
    let dom = DomainSpec::unit_square();
    let h = 1.0 / 100.0;
    let m = triangulate(&dom, None, h, 25.0).unwrap();
    checks::check_generated(&m, &dom, 25.0).unwrap();
    let q = m.quality();
    assert!(q.h_max <= h * (1.0 + 1e-9));
    assert!(q.min_angle >= 25.0 - 1e-9);
    // same order of magnitude as a structured 100x100 split grid
    assert!(q.n_triangles > 10_000 && q.n_triangles < 80_000, "{}", q.n_triangles);
}

#[test]
fn cavity_meshes_meet_contract() {
    let dom = DomainSpec::unit_square();
    for &(cx, cy, r, h) in &[
        (0.5, 0.5, 0.1, 1.0 / 32.0),
        (0.25, 0.25, 0.15, 1.0 / 64.0),
        (0.5, 0.5, 0.45, 1.0 / 32.0),
        (0.75, 0.5, 0.0252, 1.0 / 64.0),
        (0.2, 0.5, 0.15, 1.0 / 16.0),
    ] {
        let poly = cavity_poly(cx, cy, r, h);
        let m = triangulate(&dom, Some(&poly), h, 25.0).unwrap();
        checks::check_generated(&m, &dom, 25.0).unwrap();
        assert!(m.quality().h_max <= h * (1.0 + 1e-9));
        let mm = triangulate_matched(&dom, &poly, &MeshOptions::new(h)).unwrap();
        checks::check_generated(&mm.full, &dom, 25.0).unwrap();
        checks::check_generated(&mm.fluid, &dom, 25.0).unwrap();
        for (i, &v) in mm.fluid_to_full.iter().enumerate() {
            assert_eq!(mm.fluid.vertices[i], mm.full.vertices[v]);
        }
        assert!(mm.fluid.has_tag(BoundaryTag::Cavity));
        assert!(!mm.full.has_tag(BoundaryTag::Cavity));
    }
}

#[test]
fn deterministic_output() {
    let dom = DomainSpec::unit_square();
    let poly = cavity_poly(0.3, 0.6, 0.12, 1.0 / 32.0);
    let a = triangulate(&dom, Some(&poly), 1.0 / 32.0, 25.0).unwrap();
    let b = triangulate(&dom, Some(&poly), 1.0 / 32.0, 25.0).unwrap();
    assert_eq!(a.vertices, b.vertices);
    assert_eq!(a.triangles, b.triangles);
}
