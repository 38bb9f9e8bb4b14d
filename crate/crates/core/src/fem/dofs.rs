//! Node numbering for P2 velocity and P1 pressure.
//!
//! Vertices keep their mesh index; edge midpoints follow in first-seen edge
//! order. Velocity component `k` of node `n` is dof `2n + k`; pressure dof
//! `i` lives on vertex `i`.

use std::collections::HashMap;

use crate::mesh::{boundary_loops, BoundaryTag, Mesh, MeshError};
use crate::Real;

/// A closed boundary curve as alternating vertex and midpoint nodes,
/// oriented with the domain on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryLoop {
    pub tag: BoundaryTag,
    pub nodes: Vec<usize>,
}

impl BoundaryLoop {
    /// P2 boundary elements as (start vertex, midpoint, end vertex).
    pub fn elements(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let n = self.nodes.len();
        (0..n / 2).map(move |k| [self.nodes[2 * k], self.nodes[2 * k + 1], self.nodes[(2 * k + 2) % n]])
    }
}

#[derive(Clone, Debug)]
pub struct DofMap {
    pub n_vertices: usize,
    pub n_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub tri_nodes: Vec<[usize; 6]>,
    pub loops: Vec<BoundaryLoop>,
    pub node_tag: Vec<Option<BoundaryTag>>,
}

impl DofMap {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Result<Self, MeshError> {
        let nv = mesh.n_vertices();
        let edges = mesh.edges();
        let index: HashMap<(usize, usize), usize> =
            edges.iter().enumerate().map(|(k, e)| ((e[0], e[1]), nv + k)).collect();
        let mid = |a: usize, b: usize| index[&(a.min(b), a.max(b))];
        let tri_nodes = mesh
            .triangles
            .iter()
            .map(|t| [t[0], t[1], t[2], mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0])])
            .collect();
        let n_nodes = nv + edges.len();
        let mut loops = Vec::new();
        let mut node_tag = vec![None; n_nodes];
        for tag in [BoundaryTag::Outer, BoundaryTag::Cavity] {
            for cycle in boundary_loops(mesh, tag)? {
                let mut nodes = Vec::with_capacity(2 * cycle.len());
                for (k, &a) in cycle.iter().enumerate() {
                    let b = cycle[(k + 1) % cycle.len()];
                    nodes.push(a);
                    nodes.push(mid(a, b));
                }
                for &n in &nodes {
                    if let Some(t) = node_tag[n] {
                        if t != tag {
                            return Err(MeshError::Contract(format!("node {n} lies on two boundary tags")));
                        }
                    }
                    node_tag[n] = Some(tag);
                }
                loops.push(BoundaryLoop { tag, nodes });
            }
        }
        Ok(DofMap {
            n_vertices: nv,
            n_nodes,
            edges,
            tri_nodes,
            loops,
            node_tag,
        })
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.n_nodes
    }

    pub fn n_pressure(&self) -> usize {
        self.n_vertices
    }

    /// Nodes of one tag in loop order, each listed once.
    pub fn tag_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        self.loops.iter().filter(|l| l.tag == tag).flat_map(|l| l.nodes.iter().copied()).collect()
    }

    pub fn loops_of(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryLoop> {
        self.loops.iter().filter(move |l| l.tag == tag)
    }
}
