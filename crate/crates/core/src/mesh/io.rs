//! Plain-text mesh format.
//!
//! ```text
//! vertices N triangles M edges K
//! x y                  (N rows)
//! i j k                (M rows, counterclockwise, 0-based)
//! i j tag              (K rows, tag is `outer`, `cavity` or `interface`)
//! ```

use std::io::{BufRead, Write};

use super::{BoundaryEdge, BoundaryTag, Mesh, MeshError, Region};
use crate::geometry::Point;
use crate::Real;

pub fn write_mesh<T: Real, W: Write>(mesh: &Mesh<T>, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "vertices {} triangles {} edges {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.boundary.len() + mesh.interface.len()
    )?;
    for p in &mesh.vertices {
        writeln!(out, "{:.17e} {:.17e}", p.x.as_f64(), p.y.as_f64())?;
    }
    for t in &mesh.triangles {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    for e in &mesh.boundary {
        writeln!(out, "{} {} {}", e.v[0], e.v[1], e.tag.as_str())?;
    }
    for e in &mesh.interface {
        writeln!(out, "{} {} interface", e[0], e[1])?;
    }
    Ok(())
}

fn parse_err(line: usize, what: &str) -> MeshError {
    MeshError::Parse(format!("line {line}: {what}"))
}

/// Reads the format written by [`write_mesh`]. Triangles inside the interface
/// loops are not recoverable from the file and are all marked fluid.
pub fn read_mesh<T: Real, R: BufRead>(input: R) -> Result<Mesh<T>, MeshError> {
    let mut lines = input.lines().enumerate();
    let mut next = || -> Result<(usize, String), MeshError> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((i, Err(e))) => Err(parse_err(i + 1, &e.to_string())),
            None => Err(MeshError::Parse("unexpected end of file".into())),
        }
    };
    let (ln, header) = next()?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 6 || f[0] != "vertices" || f[2] != "triangles" || f[4] != "edges" {
        return Err(parse_err(ln, "bad header"));
    }
    let count = |s: &str| s.parse::<usize>().map_err(|_| parse_err(ln, "bad count"));
    let (nv, nt, ne) = (count(f[1])?, count(f[3])?, count(f[5])?);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next()?;
        let xy: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(ln, "bad coordinate")))
            .collect::<Result<_, _>>()?;
        if xy.len() != 2 {
            return Err(parse_err(ln, "expected 2 coordinates"));
        }
        vertices.push(Point::new(T::lit(xy[0]), T::lit(xy[1])));
    }
    let index = |ln: usize, s: &str| -> Result<usize, MeshError> {
        let i = s.parse::<usize>().map_err(|_| parse_err(ln, "bad index"))?;
        if i >= nv {
            return Err(parse_err(ln, "index out of range"));
        }
        Ok(i)
    };
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = next()?;
        let ix: Vec<&str> = l.split_whitespace().collect();
        if ix.len() != 3 {
            return Err(parse_err(ln, "expected 3 indices"));
        }
        triangles.push([index(ln, ix[0])?, index(ln, ix[1])?, index(ln, ix[2])?]);
    }
    let mut boundary = Vec::new();
    let mut interface = Vec::new();
    for _ in 0..ne {
        let (ln, l) = next()?;
        let ix: Vec<&str> = l.split_whitespace().collect();
        if ix.len() != 3 {
            return Err(parse_err(ln, "expected 2 indices and a tag"));
        }
        let v = [index(ln, ix[0])?, index(ln, ix[1])?];
        match ix[2] {
            "outer" => boundary.push(BoundaryEdge {
                v,
                tag: BoundaryTag::Outer,
            }),
            "cavity" => boundary.push(BoundaryEdge {
                v,
                tag: BoundaryTag::Cavity,
            }),
            "interface" => interface.push(v),
            _ => return Err(parse_err(ln, "unknown edge tag")),
        }
    }
    let mut mesh = Mesh {
        vertices,
        regions: vec![Region::Fluid; triangles.len()],
        triangles,
        boundary,
        interface,
        h_max: T::zero(),
        generation: 0,
    };
    mesh.h_max = mesh.quality().h_max;
    Ok(mesh)
}
