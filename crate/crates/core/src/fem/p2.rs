//! Quadratic Lagrange basis on triangles.
//!
//! Local node order: the three vertices, then the midpoints of edges
//! (0,1), (1,2) and (2,0).

use crate::geometry::Point;
use crate::Real;

pub type Grad<T> = [T; 2];

/// Constant barycentric gradients and twice the signed area.
pub fn barycentric_gradients<T: Real>(p: &[Point<T>; 3]) -> ([Grad<T>; 3], T) {
    let area2 = (p[1] - p[0]).cross(p[2] - p[0]);
    let g = |i: usize| {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        [(a.y - b.y) / area2, (b.x - a.x) / area2]
    };
    ([g(0), g(1), g(2)], area2)
}

pub fn values<T: Real>(l: &[T; 3]) -> [T; 6] {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    [
        l[0] * (two * l[0] - T::one()),
        l[1] * (two * l[1] - T::one()),
        l[2] * (two * l[2] - T::one()),
        four * l[0] * l[1],
        four * l[1] * l[2],
        four * l[2] * l[0],
    ]
}

pub fn gradients<T: Real>(l: &[T; 3], gl: &[Grad<T>; 3]) -> [Grad<T>; 6] {
    let four = T::lit(4.0);
    let vertex = |i: usize| {
        let s = four * l[i] - T::one();
        [s * gl[i][0], s * gl[i][1]]
    };
    let edge = |i: usize, j: usize| {
        [
            four * (l[i] * gl[j][0] + l[j] * gl[i][0]),
            four * (l[i] * gl[j][1] + l[j] * gl[i][1]),
        ]
    };
    [vertex(0), vertex(1), vertex(2), edge(0, 1), edge(1, 2), edge(2, 0)]
}

/// Barycentric coordinates of `x` in triangle `p`.
pub fn barycentric<T: Real>(p: &[Point<T>; 3], x: Point<T>) -> [T; 3] {
    let area2 = (p[1] - p[0]).cross(p[2] - p[0]);
    let l1 = (x - p[0]).cross(p[2] - p[0]) / area2;
    let l2 = (p[1] - p[0]).cross(x - p[0]) / area2;
    [T::one() - l1 - l2, l1, l2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_basis() {
        let p: [Point<f64>; 3] = [Point::new(0.1, 0.2), Point::new(1.3, 0.4), Point::new(0.5, 1.1)];
        let nodes = [
            p[0],
            p[1],
            p[2],
            p[0].midpoint(p[1]),
            p[1].midpoint(p[2]),
            p[2].midpoint(p[0]),
        ];
        for (i, &x) in nodes.iter().enumerate() {
            let v = values(&barycentric(&p, x));
            for (j, &vj) in v.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vj - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p: [Point<f64>; 3] = [Point::new(0.1, 0.2), Point::new(1.3, 0.4), Point::new(0.5, 1.1)];
        let (gl, _) = barycentric_gradients(&p);
        let x = Point::new(0.55, 0.5);
        let g = gradients(&barycentric(&p, x), &gl);
        let h = 1e-6;
        for k in 0..6 {
            let fx = (values(&barycentric(&p, x + Point::new(h, 0.0)))[k]
                - values(&barycentric(&p, x - Point::new(h, 0.0)))[k])
                / (2.0 * h);
            let fy = (values(&barycentric(&p, x + Point::new(0.0, h)))[k]
                - values(&barycentric(&p, x - Point::new(0.0, h)))[k])
                / (2.0 * h);
            assert!((g[k][0] - fx).abs() < 1e-8 && (g[k][1] - fy).abs() < 1e-8);
        }
    }
}
