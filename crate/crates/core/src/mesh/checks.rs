//! Brute-force verification of the mesh contract.

use std::collections::{HashMap, HashSet};

use super::{boundary_loops, loop_area, triangle_angles, BoundaryTag, Mesh, MeshError};
use crate::geometry::{incircle, orient, DomainSpec};
use crate::Real;

fn fail<T>(msg: String) -> Result<T, MeshError> {
    Err(MeshError::Contract(msg))
}

/// Every triangle strictly counterclockwise.
pub fn check_orientation<T: Real>(mesh: &Mesh<T>) -> Result<(), MeshError> {
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let v = &mesh.vertices;
        if orient(v[a], v[b], v[c]) <= 0.0 {
            return fail(format!("triangle {t} is not positively oriented"));
        }
    }
    Ok(())
}

/// Edge-manifold, no hanging nodes, and the boundary edge list equals the set of
/// edges used by exactly one triangle.
pub fn check_conformity<T: Real>(mesh: &Mesh<T>) -> Result<(), MeshError> {
    let mut directed: HashSet<(usize, usize)> = HashSet::new();
    let mut used = vec![false; mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let e = (tri[k], tri[(k + 1) % 3]);
            if e.0 == e.1 {
                return fail(format!("triangle {t} repeats a vertex"));
            }
            if !directed.insert(e) {
                return fail(format!("directed edge {e:?} used twice"));
            }
            used[tri[k]] = true;
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return fail(format!("vertex {v} belongs to no triangle"));
    }
    let open: HashSet<(usize, usize)> = directed
        .iter()
        .copied()
        .filter(|&(a, b)| !directed.contains(&(b, a)))
        .collect();
    let listed: HashSet<(usize, usize)> = mesh.boundary.iter().map(|e| (e.v[0], e.v[1])).collect();
    if listed.len() != mesh.boundary.len() {
        return fail("duplicate boundary edge".into());
    }
    if open != listed {
        return fail(format!(
            "boundary list does not match the open edges ({} open, {} listed)",
            open.len(),
            listed.len()
        ));
    }
    // an interior hanging node shows up as extra open edges; on the boundary it
    // would sit on an open edge
    for &(a, b) in &open {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        for (v, &p) in mesh.vertices.iter().enumerate() {
            if v == a || v == b {
                continue;
            }
            let lo_x = pa.x.min(pb.x);
            let hi_x = pa.x.max(pb.x);
            let lo_y = pa.y.min(pb.y);
            let hi_y = pa.y.max(pb.y);
            if p.x < lo_x || p.x > hi_x || p.y < lo_y || p.y > hi_y {
                continue;
            }
            if orient(pa, pb, p) == 0.0 {
                return fail(format!("vertex {v} hangs on boundary edge ({a}, {b})"));
            }
        }
    }
    Ok(())
}

/// Empty-circumcircle test on every interior edge that is not a constraint.
pub fn check_delaunay<T: Real>(mesh: &Mesh<T>) -> Result<(), MeshError> {
    let constrained: HashSet<(usize, usize)> = mesh
        .interface
        .iter()
        .map(|&[a, b]| (a.min(b), a.max(b)))
        .collect();
    let mut owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            owner.insert((tri[k], tri[(k + 1) % 3]), (t, tri[(k + 2) % 3]));
        }
    }
    let v = &mesh.vertices;
    for (&(a, b), &(t, _)) in &owner {
        if constrained.contains(&(a.min(b), a.max(b))) {
            continue;
        }
        let Some(&(_, apex)) = owner.get(&(b, a)) else {
            continue;
        };
        let [p, q, r] = mesh.triangles[t];
        if incircle(v[p], v[q], v[r], v[apex]) > 0.0 {
            return fail(format!("edge ({a}, {b}) fails the empty-circumcircle test"));
        }
    }
    Ok(())
}

pub fn check_min_angle<T: Real>(mesh: &Mesh<T>, min_angle: T) -> Result<(), MeshError> {
    // angles come from atan2 and may sit a few ulps under an exact bound
    let tol = T::lit(1e-9);
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.corners(t);
        let m = triangle_angles(a, b, c).into_iter().fold(T::lit(180.0), T::min);
        if m + tol < min_angle {
            return fail(format!("triangle {t} has minimum angle {m}"));
        }
    }
    Ok(())
}

/// Outer loops wind counterclockwise, cavity loops clockwise.
pub fn check_loops<T: Real>(mesh: &Mesh<T>) -> Result<(), MeshError> {
    for tag in [BoundaryTag::Outer, BoundaryTag::Cavity] {
        for cycle in boundary_loops(mesh, tag)? {
            let a = loop_area(mesh, &cycle);
            let ok = match tag {
                BoundaryTag::Outer => a > T::zero(),
                BoundaryTag::Cavity => a < T::zero(),
            };
            if !ok {
                return fail(format!("{} loop has wrong winding", tag.as_str()));
            }
        }
    }
    if boundary_loops(mesh, BoundaryTag::Outer)?.len() != 1 {
        return fail("expected exactly one outer loop".into());
    }
    Ok(())
}

pub fn check_area<T: Real>(mesh: &Mesh<T>, domain: &DomainSpec<T>, rel_tol: T) -> Result<(), MeshError> {
    let want = mesh.expected_area(domain);
    let got = mesh.area();
    if ((got - want) / want).abs() > rel_tol {
        return fail(format!("area {got:e} differs from expected {want:e}"));
    }
    Ok(())
}

/// The full contract for meshes produced by the Delaunay refiner.
pub fn check_generated<T: Real>(
    mesh: &Mesh<T>,
    domain: &DomainSpec<T>,
    min_angle: T,
) -> Result<(), MeshError> {
    check_orientation(mesh)?;
    check_conformity(mesh)?;
    check_loops(mesh)?;
    check_delaunay(mesh)?;
    check_min_angle(mesh, min_angle)?;
    check_area(mesh, domain, T::lit(1e-12))
}
