//! Supernodal LDLᵀ of the symmetric indefinite saddle-point matrix.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Par, Side};

use super::sparse::CsrMatrix;
use crate::Real;

pub(crate) struct KktFactor {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

impl KktFactor {
    /// Factors the symmetric `a` in the fill-reducing order `perm`
    /// (`perm[new] = old`). Fails on an exactly zero pivot.
    pub fn factor<T: Real>(a: &CsrMatrix<T>, perm: &[usize]) -> Result<Self, String> {
        let n = a.n_rows;
        // upper triangle in compressed columns; symmetric so row i of the CSR is column i
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut rows = Vec::with_capacity(a.nnz() / 2 + n);
        let mut vals = Vec::with_capacity(a.nnz() / 2 + n);
        col_ptr.push(0);
        for j in 0..n {
            for (i, v) in a.row(j) {
                if i <= j {
                    rows.push(i);
                    vals.push(v.as_f64());
                }
            }
            col_ptr.push(rows.len());
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &rows);
        let mat = SparseColMatRef::new(sym, &vals);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let pr = PermRef::new_checked(perm, &inv, n);
        let symbolic = factorize_symbolic_cholesky(
            sym,
            Side::Upper,
            SymmetricOrdering::Custom(pr),
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| format!("{e:?}"))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let par = Par::Seq;
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Default::default()));
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                mat,
                Side::Upper,
                LdltRegularization::default(),
                par,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| format!("{e:?}"))?;
        Ok(KktFactor { symbolic, values })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve<T: Real>(&self, b: &[T]) -> Vec<T> {
        let n = b.len();
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| b[i].as_f64());
        let ldlt = faer::sparse::linalg::cholesky::LdltRef::new(&self.symbolic, &self.values);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        ldlt.solve_in_place_with_conj(faer::Conj::No, x.as_mut(), Par::Seq, MemStack::new(&mut mem));
        (0..n).map(|i| T::lit(x[(i, 0)])).collect()
    }
}
