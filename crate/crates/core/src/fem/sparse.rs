//! Compressed sparse row matrices.

use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<T>,
}

/// Coordinate-format accumulator. Duplicates are summed in insertion order,
/// so the result is deterministic for a deterministic push sequence.
#[derive(Clone, Debug)]
pub struct Triplets<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> Triplets<T> {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Triplets {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Triplets {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.entries.push((i, j, v));
    }

    pub fn to_csr(&self) -> CsrMatrix<T> {
        let mut count = vec![0usize; self.n_rows + 1];
        for &(i, _, _) in &self.entries {
            count[i + 1] += 1;
        }
        for i in 0..self.n_rows {
            count[i + 1] += count[i];
        }
        // stable bucket by row
        let mut next = count.clone();
        let mut bucket = vec![(0usize, T::zero()); self.entries.len()];
        for &(i, j, v) in &self.entries {
            bucket[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut indptr = Vec::with_capacity(self.n_rows + 1);
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data = Vec::with_capacity(self.entries.len());
        indptr.push(0);
        for i in 0..self.n_rows {
            let row = &mut bucket[count[i]..count[i + 1]];
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if indices.len() > indptr[i] && *indices.last().unwrap() == j {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr,
            indices,
            data,
        }
    }
}

impl<T: Real> CsrMatrix<T> {
    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.data[r.start + k],
            Err(_) => T::zero(),
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| self.row(i).fold(T::zero(), |s, (j, v)| s + v * x[j]))
            .collect()
    }

    /// y = Aᵀ x
    pub fn matvec_t(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![T::zero(); self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix<T> {
        let mut t = Triplets::with_capacity(self.n_cols, self.n_rows, self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.to_csr()
    }

    /// Largest |A_ij − A_ji|.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = Triplets::new(2, 3);
        t.push(1, 2, 1.0);
        t.push(0, 1, 2.0);
        t.push(1, 2, 3.0);
        t.push(1, 0, -1.0);
        let a = t.to_csr();
        assert_eq!(a.indptr, vec![0, 1, 3]);
        assert_eq!(a.get(1, 2), 4.0);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![2.0, 3.0]);
        assert_eq!(a.matvec_t(&[1.0, 2.0]), vec![-2.0, 2.0, 8.0]);
        assert_eq!(a.transpose().transpose(), a);
    }
}
