//! Boundary Sobolev norms of piecewise quadratic data on closed loops.

use super::quadrature::gauss_legendre;
use crate::geometry::{DomainSpec, Point};
use crate::Real;

/// The three contributions to ‖g‖²_{H^{3/2}}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H32Parts<T> {
    pub l2: T,
    pub deriv: T,
    pub seminorm: T,
}

impl<T: Real> H32Parts<T> {
    pub fn squared(&self) -> T {
        self.l2 + self.deriv + self.seminorm
    }

    pub fn norm(&self) -> T {
        self.squared().sqrt()
    }

    /// ‖g‖_{H¹} / ‖g‖_{L²}.
    pub fn h1_over_l2(&self) -> T {
        ((self.l2 + self.deriv) / self.l2).sqrt()
    }
}

fn shape(t: f64) -> [f64; 3] {
    [(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)]
}

fn dshape(t: f64) -> [f64; 3] {
    [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0]
}

fn combine<T: Real>(w: [f64; 3], v: [[T; 2]; 3]) -> [T; 2] {
    let mut out = [T::zero(); 2];
    for i in 0..3 {
        out[0] += T::lit(w[i]) * v[i][0];
        out[1] += T::lit(w[i]) * v[i][1];
    }
    out
}

fn sq<T: Real>(v: [T; 2]) -> T {
    v[0] * v[0] + v[1] * v[1]
}

/// H^{3/2} parts for a closed loop of P2 elements given as alternating
/// vertex and midpoint nodes. The seminorm is the Gagliardo H^{1/2}
/// seminorm, with chord distance, of the continuous piecewise-linear
/// recovery of the arc-length derivative.
pub fn h32_parts<T: Real>(points: &[Point<T>], values: &[[T; 2]]) -> H32Parts<T> {
    let n = points.len();
    assert!(n >= 4 && n % 2 == 0 && values.len() == n, "closed P2 loop expected");
    let ne = n / 2;
    let elem = |k: usize| [2 * k, 2 * k + 1, (2 * k + 2) % n];
    let len: Vec<T> = (0..ne).map(|k| points[2 * k].dist(points[(2 * k + 2) % n])).collect();

    let g3 = gauss_legendre::<f64>(3);
    let g2 = gauss_legendre::<f64>(2);
    let mut l2 = T::zero();
    let mut deriv = T::zero();
    let mut d_start = Vec::with_capacity(ne);
    let mut d_end = Vec::with_capacity(ne);
    for k in 0..ne {
        let ids = elem(k);
        let v = [values[ids[0]], values[ids[1]], values[ids[2]]];
        for &(t, w) in &g3 {
            l2 += T::lit(w) * len[k] * sq(combine(shape(t), v));
        }
        for &(t, w) in &g2 {
            deriv += T::lit(w) * sq(combine(dshape(t), v)) / len[k];
        }
        let inv = T::one() / len[k];
        let ds = combine(dshape(0.0), v);
        let de = combine(dshape(1.0), v);
        d_start.push([ds[0] * inv, ds[1] * inv]);
        d_end.push([de[0] * inv, de[1] * inv]);
    }
    // recovered derivative at each vertex
    let half = T::lit(0.5);
    let gv: Vec<[T; 2]> = (0..ne)
        .map(|k| {
            let prev = (k + ne - 1) % ne;
            [(d_end[prev][0] + d_start[k][0]) * half, (d_end[prev][1] + d_start[k][1]) * half]
        })
        .collect();
    let seg = |k: usize| (points[2 * k], points[(2 * k + 2) % n], gv[k], gv[(k + 1) % ne]);
    let lerp = |a: [T; 2], b: [T; 2], t: T| [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];

    let far = gauss_legendre::<T>(3);
    let near = gauss_legendre::<T>(8);
    let ang = gauss_legendre::<T>(16);
    let hmax = len.iter().fold(T::zero(), |m, &l| m.max(l));
    let mut semi = T::zero();
    for e in 0..ne {
        let (xa, xb, ga, gb) = seg(e);
        semi += sq([gb[0] - ga[0], gb[1] - ga[1]]);
        for f in (e + 1)..ne {
            let (ya, yb, ha, hb) = seg(f);
            let contrib = if f == e + 1 || (e == 0 && f == ne - 1) {
                // shared vertex v; polar coordinates around it
                let (v, gv0, ex, ge, fx, gf) = if f == e + 1 {
                    (xb, gb, xa, ga, yb, hb)
                } else {
                    (xa, ga, xb, gb, ya, ha)
                };
                let (le, lf) = (ex.dist(v), fx.dist(v));
                let te = (ex - v) * (T::one() / le);
                let tf = (fx - v) * (T::one() / lf);
                let se = [(ge[0] - gv0[0]) / le, (ge[1] - gv0[1]) / le];
                let sf = [(gf[0] - gv0[0]) / lf, (gf[1] - gv0[1]) / lf];
                let c = te.dot(tf);
                let kernel = |phi: T| {
                    let (co, si) = (phi.cos(), phi.sin());
                    let num = sq([co * se[0] - si * sf[0], co * se[1] - si * sf[1]]);
                    num / (T::one() - T::lit(2.0) * co * si * c)
                };
                let split = lf.atan2(le);
                let mut s = T::zero();
                for &(t, w) in &ang {
                    let phi = split * t;
                    let r = le / phi.cos();
                    s += w * split * kernel(phi) * r * r * T::lit(0.5);
                    let phi = split + (T::FRAC_PI_2() - split) * t;
                    let r = lf / phi.sin();
                    s += w * (T::FRAC_PI_2() - split) * kernel(phi) * r * r * T::lit(0.5);
                }
                s
            } else {
                let mid_gap = xa.midpoint(xb).dist(ya.midpoint(yb));
                let rule = if mid_gap < T::lit(3.0) * hmax { &near } else { &far };
                let (le, lf) = (xa.dist(xb), ya.dist(yb));
                let mut s = T::zero();
                for &(t, wt) in rule {
                    let x = xa + (xb - xa) * t;
                    let gx = lerp(ga, gb, t);
                    for &(u, wu) in rule {
                        let y = ya + (yb - ya) * u;
                        let gy = lerp(ha, hb, u);
                        let d2 = sq([x.x - y.x, x.y - y.y]);
                        s += wt * wu * sq([gx[0] - gy[0], gx[1] - gy[1]]) / d2;
                    }
                }
                s * le * lf
            };
            // the double integral is symmetric in (e, f)
            semi += T::lit(2.0) * contrib;
        }
    }
    H32Parts {
        l2,
        deriv,
        seminorm: semi,
    }
}

/// H^{3/2} parts of an analytic boundary function sampled on a uniform loop
/// of `per_side` P2 elements per side of the square.
pub fn h32_parts_of<T: Real>(
    domain: &DomainSpec<T>,
    per_side: usize,
    g: impl Fn(Point<T>) -> [T; 2],
) -> H32Parts<T> {
    let c = domain.corners();
    let mut pts = Vec::with_capacity(8 * per_side);
    for s in 0..4 {
        let (a, b) = (c[s], c[(s + 1) % 4]);
        for k in 0..2 * per_side {
            let t = T::from_usize_lossy(k) / T::from_usize_lossy(2 * per_side);
            pts.push(a + (b - a) * t);
        }
    }
    let vals: Vec<[T; 2]> = pts.iter().map(|&p| g(p)).collect();
    h32_parts(&pts, &vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_datum() {
        let d = DomainSpec::<f64>::unit_square();
        let p = h32_parts_of(&d, 8, |_| [3.0f64, -4.0]);
        assert!((p.norm() - 5.0 * 2.0).abs() < 1e-13);
        assert_eq!(p.seminorm, 0.0);
    }

    #[test]
    fn homogeneous() {
        let d = DomainSpec::unit_square();
        let f = |p: Point<f64>| [(3.0 * p.x).sin() * p.y, p.x * p.x];
        let a = h32_parts_of(&d, 10, f).norm();
        let b = h32_parts_of(&d, 10, |p| {
            let v = f(p);
            [-2.5 * v[0], -2.5 * v[1]]
        })
        .norm();
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
    }
}
