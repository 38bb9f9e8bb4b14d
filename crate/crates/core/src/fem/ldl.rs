//! Sparse LDLᵀ factorization for symmetric quasi-definite matrices,
//! with a coordinate-based nested-dissection ordering.

use super::sparse::CsrMatrix;
use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LdlError {
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
    #[error("ordering is not a permutation of 0..{0}")]
    BadPermutation(usize),
}

/// Geometric nested dissection. `class[i]` orders unknowns inside each
/// block (lower first); unknowns with `class >= 2` are placed last.
/// Returns `perm` with `perm[new] = old`.
pub fn nested_dissection<T: Real>(
    a: &CsrMatrix<T>,
    coords: &[[f64; 2]],
    class: &[u8],
    leaf: usize,
) -> Vec<usize> {
    let n = a.n_rows;
    assert_eq!(coords.len(), n);
    assert_eq!(class.len(), n);
    let mut out = Vec::with_capacity(n);
    let mut stamp = vec![0u32; n];
    let mut epoch = 0u32;
    let set: Vec<usize> = (0..n).filter(|&i| class[i] < 2).collect();
    let mut stack = vec![Work::Split(set)];
    // explicit stack keeps deep recursion off the call stack
    while let Some(w) = stack.pop() {
        match w {
            Work::Emit(mut s) => {
                s.sort_by_key(|&i| (class[i], i));
                out.extend(s);
            }
            Work::Split(mut s) => {
                if s.len() <= leaf.max(1) {
                    stack.push(Work::Emit(s));
                    continue;
                }
                let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for &i in &s {
                    for k in 0..2 {
                        lo[k] = lo[k].min(coords[i][k]);
                        hi[k] = hi[k].max(coords[i][k]);
                    }
                }
                let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
                s.sort_by(|&i, &j| {
                    coords[i][axis]
                        .partial_cmp(&coords[j][axis])
                        .expect("finite coordinates")
                        .then(i.cmp(&j))
                });
                let half = s.len() / 2;
                let right = s.split_off(half);
                epoch += 1;
                for &i in &right {
                    stamp[i] = epoch;
                }
                let (sep, left): (Vec<usize>, Vec<usize>) = s
                    .into_iter()
                    .partition(|&i| a.row(i).any(|(j, _)| stamp[j] == epoch && j != i));
                // popped in reverse: left, right, then separator
                stack.push(Work::Emit(sep));
                stack.push(Work::Split(right));
                stack.push(Work::Split(left));
            }
        }
    }
    let mut tail: Vec<usize> = (0..n).filter(|&i| class[i] >= 2).collect();
    tail.sort_by_key(|&i| (class[i], i));
    out.extend(tail);
    out
}

enum Work {
    Split(Vec<usize>),
    Emit(Vec<usize>),
}

/// Up-looking LDLᵀ of P A Pᵀ.
#[derive(Clone, Debug)]
pub struct Ldl<T> {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
}

impl<T: Real> Ldl<T> {
    /// `a` holds the full symmetric matrix; only its upper part after
    /// permutation is read.
    pub fn factor(a: &CsrMatrix<T>, perm: Vec<usize>) -> Result<Self, LdlError> {
        let n = a.n_rows;
        if perm.len() != n {
            return Err(LdlError::BadPermutation(n));
        }
        let mut pinv = vec![usize::MAX; n];
        for (k, &i) in perm.iter().enumerate() {
            if i >= n || pinv[i] != usize::MAX {
                return Err(LdlError::BadPermutation(n));
            }
            pinv[i] = k;
        }
        // column k of the permuted upper triangle: rows i <= k
        let mut cp = vec![0usize; n + 1];
        for i in 0..n {
            for (j, _) in a.row(i) {
                if pinv[i] <= pinv[j] {
                    cp[pinv[j] + 1] += 1;
                }
            }
        }
        for k in 0..n {
            cp[k + 1] += cp[k];
        }
        let mut next = cp.clone();
        let mut ci = vec![0usize; cp[n]];
        let mut cx = vec![T::zero(); cp[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (pinv[i], pinv[j]);
                if pi <= pj {
                    ci[next[pj]] = pi;
                    cx[next[pj]] = v;
                    next[pj] += 1;
                }
            }
        }

        // symbolic: elimination tree and column counts
        let none = usize::MAX;
        let mut parent = vec![none; n];
        let mut flag = vec![none; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for p in cp[k]..cp[k + 1] {
                let mut i = ci[p];
                while i < k && flag[i] != k {
                    if parent[i] == none {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // numeric
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![T::zero(); lp[n]];
        let mut d = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        let mut pattern = vec![0usize; n];
        for f in flag.iter_mut() {
            *f = none;
        }
        for c in lnz.iter_mut() {
            *c = 0;
        }
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in cp[k]..cp[k + 1] {
                let mut i = ci[p];
                y[i] += cx[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = T::zero();
            while top < n {
                let i = pattern[top];
                top += 1;
                let yi = y[i];
                y[i] = T::zero();
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if d[k] == T::zero() || !d[k].is_finite() {
                return Err(LdlError::ZeroPivot(perm[k]));
            }
        }
        Ok(Ldl {
            n,
            perm,
            lp,
            li,
            lx,
            d,
        })
    }

    pub fn nnz(&self) -> usize {
        self.lx.len() + self.n
    }

    /// Number of negative pivots (the inertia's negative count).
    pub fn n_negative(&self) -> usize {
        self.d.iter().filter(|&&x| x < T::zero()).count()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<T> = self.perm.iter().map(|&i| b[i]).collect();
        for j in 0..self.n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..self.n {
            x[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![T::zero(); self.n];
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::sparse::Triplets;
    use super::*;

    fn laplacian_grid(m: usize) -> (CsrMatrix<f64>, Vec<[f64; 2]>) {
        let n = m * m;
        let mut t = Triplets::new(n, n);
        let mut xy = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                xy.push([i as f64, j as f64]);
                t.push(k, k, 4.0);
                if i + 1 < m {
                    t.push(k, k + m, -1.0);
                    t.push(k + m, k, -1.0);
                }
                if j + 1 < m {
                    t.push(k, k + 1, -1.0);
                    t.push(k + 1, k, -1.0);
                }
            }
        }
        (t.to_csr(), xy)
    }

    #[test]
    fn solves_spd_with_nd_ordering() {
        let (a, xy) = laplacian_grid(20);
        let perm = nested_dissection(&a, &xy, &vec![0; a.n_rows], 8);
        let mut seen = perm.clone();
        seen.sort();
        assert_eq!(seen, (0..a.n_rows).collect::<Vec<_>>());
        let f = Ldl::factor(&a, perm).unwrap();
        let x_true: Vec<f64> = (0..a.n_rows).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec(&x_true);
        let x = f.solve(&b);
        let err = x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        assert_eq!(f.n_negative(), 0);
    }

    #[test]
    fn quasi_definite_saddle() {
        // [2 0 1; 0 3 1; 1 1 -1]
        let mut t = Triplets::new(3, 3);
        for &(i, j, v) in &[(0, 0, 2.0f64), (1, 1, 3.0), (2, 2, -1.0), (0, 2, 1.0), (2, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)] {
            t.push(i, j, v);
        }
        let a = t.to_csr();
        let f = Ldl::factor(&a, vec![2, 0, 1]).unwrap();
        let x = f.solve(&[1.0, 2.0, 3.0]);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
        assert_eq!(f.n_negative(), 1);
    }

    #[test]
    fn zero_pivot_reported() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        let a = t.to_csr();
        assert_eq!(Ldl::factor(&a, vec![0, 1]).unwrap_err(), LdlError::ZeroPivot(0));
    }
}
