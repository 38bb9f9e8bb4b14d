//! Quadrature rules on the reference triangle and interval.

use crate::Real;

/// Symmetric 6-point rule exact for polynomials of degree 4.
/// Entries are barycentric coordinates and weights summing to one.
pub fn triangle_degree4<T: Real>() -> [([T; 3], T); 6] {
    const A1: f64 = 0.445_948_490_915_964_886_318_329_253_883_05;
    const W1: f64 = 0.223_381_589_678_011_465_695_007_008_433_12;
    const A2: f64 = 0.091_576_213_509_770_743_459_571_463_402_20;
    const W2: f64 = 0.109_951_743_655_321_867_638_326_324_900_21;
    let (a1, b1, w1) = (T::lit(A1), T::lit(1.0 - 2.0 * A1), T::lit(W1));
    let (a2, b2, w2) = (T::lit(A2), T::lit(1.0 - 2.0 * A2), T::lit(W2));
    [
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> Vec<(T, T)> {
    assert!(n >= 1, "at least one quadrature point");
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((T::lit(0.5 * (1.0 - x)), T::lit(0.5 * w)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rule_exact_to_degree_four() {
        let rule = triangle_degree4::<f64>();
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                for c in 0..=(4 - a - b) {
                    let q: f64 = rule
                        .iter()
                        .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                        .sum();
                    // relative to the area of the reference simplex
                    let exact = 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
                    assert!((q - exact).abs() < 1e-15, "{a} {b} {c}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn gauss_exactness() {
        for n in 1..=8usize {
            let rule = gauss_legendre::<f64>(n);
            for k in 0..(2 * n) as i32 {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(k)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }
}
