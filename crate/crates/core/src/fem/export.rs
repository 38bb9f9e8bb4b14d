//! Plain-text field tables.

use std::io::Write;

use super::assembly::FESystem;
use super::post::Traction;
use super::solve::StokesField;
use crate::Real;

/// One row `x y u1 u2 p` per P2 node; midpoint pressures are edge averages.
pub fn write_nodal_table<T: Real, W: Write>(
    system: &FESystem<T>,
    field: &StokesField<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "x y u1 u2 p")?;
    let nv = system.dofs.n_vertices;
    for (n, x) in system.nodes.iter().enumerate() {
        let p = if n < nv {
            field.p[n]
        } else {
            let e = system.dofs.edges[n - nv];
            (field.p[e[0]] + field.p[e[1]]) * T::lit(0.5)
        };
        writeln!(
            out,
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            x.x.as_f64(),
            x.y.as_f64(),
            field.u[2 * n].as_f64(),
            field.u[2 * n + 1].as_f64(),
            p.as_f64()
        )?;
    }
    Ok(())
}

/// One row `s psi1 psi2` per boundary node in loop order.
pub fn write_traction_table<T: Real, W: Write>(traction: &Traction<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "s psi1 psi2")?;
    for (s, psi) in traction.s.iter().zip(&traction.psi) {
        writeln!(out, "{:.17e} {:.17e} {:.17e}", s.as_f64(), psi[0].as_f64(), psi[1].as_f64())?;
    }
    Ok(())
}
