//! Compressed-sparse-row matrices and direct solvers.
//!
//! Factorizations are delegated to the supernodal LU of `faer` (partial
//! pivoting, fill-reducing column ordering). A CSR matrix `A` is handed to
//! faer as the CSC matrix `Aᵀ` without copying indices; solves then use the
//! transposed triangular sweeps.

use std::io::Write;

use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::linalg::solvers::Solve;
use faer::MatMut;

use crate::error::{Error, Result};

/// Relative residual accepted from a direct solve (after refinement).
pub const SOLVE_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 5;

/// Square CSR matrix. Column indices are strictly increasing within a row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in entries {
            if r >= n || c >= n {
                return Err(Error::IndexOutOfRange { row: r, col: c, n });
            }
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        // bucket by row, stable in input order
        let mut next = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for &(r, c, v) in entries {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..n {
            let (lo, hi) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&k| cols[k]);
            let mut last = usize::MAX;
            for &k in &order {
                if cols[k] == last {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                    last = cols[k];
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    /// Wraps raw CSR arrays. Panics if the structure is malformed.
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(row_ptr.len(), n + 1);
        assert_eq!(col_idx.len(), values.len());
        assert_eq!(row_ptr[n], col_idx.len());
        for r in 0..n {
            let row = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            assert!(row.windows(2).all(|w| w[0] < w[1]), "row {r} not strictly increasing");
            assert!(row.iter().all(|&c| c < n));
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `(col, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Entry `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|r| x[r] * self.row(r).map(|(c, v)| v * y[c]).sum::<f64>()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self + s * other` over the union of both patterns.
    pub fn add_scaled(&self, s: f64, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.n, other.n);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        for r in 0..self.n {
            let mut a = self.row(r).peekable();
            let mut b = other.row(r).peekable();
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (Some((ca, va)), Some((cb, vb))) if ca == cb => {
                        col_idx.push(ca);
                        values.push(va + s * vb);
                        a.next();
                        b.next();
                    }
                    (Some((ca, va)), Some((cb, _))) if ca < cb => {
                        col_idx.push(ca);
                        values.push(va);
                        a.next();
                    }
                    (Some(_), Some((cb, vb))) | (None, Some((cb, vb))) => {
                        col_idx.push(cb);
                        values.push(s * vb);
                        b.next();
                    }
                    (Some((ca, va)), None) => {
                        col_idx.push(ca);
                        values.push(va);
                        a.next();
                    }
                    (None, None) => break,
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix { n: self.n, row_ptr, col_idx, values }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            trip.extend(self.row(r).map(|(c, v)| (c, r, v)));
        }
        SparseMatrix::from_triplets(self.n, &trip).expect("indices already validated")
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for &old in keep {
            buf.clear();
            buf.extend(self.row(old).filter(|(c, _)| map[*c] != usize::MAX).map(|(c, v)| (map[c], v)));
            buf.sort_by_key(|e| e.0);
            for &(c, v) in &buf {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix { n: keep.len(), row_ptr, col_idx, values }
    }

    /// Dense row-major copy, for diagnostics and small test oracles.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// MatrixMarket `coordinate real general`, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// LU factorization of a [`SparseMatrix`], reusable for many right-hand sides.
pub struct LuFactor {
    matrix: SparseMatrix,
    symbolic: SymbolicLu<usize>,
    lu: Lu<usize, f64>,
}

impl LuFactor {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        faer::set_global_parallelism(faer::Par::Seq);
        let n = a.n;
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &a.row_ptr, None, &a.col_idx);
        let symbolic = SymbolicLu::try_new(sym).map_err(|e| Error::RankDeficient(format!("{e:?}")))?;
        let mat = SparseColMatRef::new(sym, &a.values);
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), mat).map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::Singular(index),
            other => Error::RankDeficient(format!("{other:?}")),
        })?;
        Ok(Self { matrix: a.clone(), symbolic, lu })
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    /// Factors `a`, reusing the symbolic analysis when `a` has the same
    /// sparsity pattern as the matrix of `self`.
    pub fn refactor(&self, a: &SparseMatrix) -> Result<Self> {
        if a.row_ptr != self.matrix.row_ptr || a.col_idx != self.matrix.col_idx {
            return Self::new(a);
        }
        let sym = SymbolicSparseColMatRef::new_checked(a.n, a.n, &a.row_ptr, None, &a.col_idx);
        let mat = SparseColMatRef::new(sym, &a.values);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat).map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::Singular(index),
            other => Error::RankDeficient(format!("{other:?}")),
        })?;
        Ok(Self { matrix: a.clone(), symbolic: self.symbolic.clone(), lu })
    }

    fn raw_solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let mat = MatMut::from_column_major_slice_mut(rhs, n, 1);
        // the factor is of Aᵀ
        self.lu.solve_transpose_in_place(mat);
    }

    /// Solves `A x = b` with iterative refinement; returns the solution and
    /// its relative residual without checking it.
    pub fn solve_refined(&self, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: b.len() });
        }
        let bnorm = norm2(b);
        let mut x = b.to_vec();
        self.raw_solve(&mut x);
        if x.iter().any(|v| !v.is_finite()) {
            let k = x.iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(Error::Singular(k));
        }
        let rel = |r: &[f64]| if bnorm > 0.0 { norm2(r) / bnorm } else { norm2(r) };
        let mut best = (x.clone(), f64::INFINITY);
        for _ in 0..REFINEMENT_STEPS {
            let ax = self.matrix.matvec(&x);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let res = rel(&r);
            if res < best.1 {
                best = (x.clone(), res);
            }
            if res <= SOLVE_TOL * 1e-2 {
                break;
            }
            self.raw_solve(&mut r);
            x.iter_mut().zip(&r).for_each(|(xi, ri)| *xi += ri);
        }
        let ax = self.matrix.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let res = rel(&r);
        if res < best.1 {
            best = (x, res);
        }
        Ok(best)
    }

    /// Solves `A x = b`, failing if the relative residual exceeds [`SOLVE_TOL`].
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (x, res) = self.solve_refined(b)?;
        if !(res <= SOLVE_TOL) {
            return Err(Error::InaccurateSolve { residual: res, tol: SOLVE_TOL });
        }
        Ok(x)
    }
}

/// Solves `A x = b` by sparse LU.
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuFactor::new(a)?.solve(b)
}

/// `[[A, c], [cᵀ, 0]] (x, λ) = (b, γ)`.
#[derive(Clone, Debug)]
pub struct BorderedSystem {
    pub a: SparseMatrix,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: f64,
}

impl BorderedSystem {
    /// The augmented `(n+1) × (n+1)` matrix.
    pub fn augmented(&self) -> SparseMatrix {
        let n = self.a.n;
        let nzc: Vec<(usize, f64)> =
            self.c.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        let mut row_ptr = Vec::with_capacity(n + 2);
        let mut col_idx = Vec::with_capacity(self.a.nnz() + 2 * nzc.len() + 1);
        let mut values = Vec::with_capacity(col_idx.capacity());
        row_ptr.push(0);
        for r in 0..n {
            for (c, v) in self.a.row(r) {
                col_idx.push(c);
                values.push(v);
            }
            if self.c[r] != 0.0 {
                col_idx.push(n);
                values.push(self.c[r]);
            }
            row_ptr.push(col_idx.len());
        }
        for &(c, v) in &nzc {
            col_idx.push(c);
            values.push(v);
        }
        // explicit zero keeps the diagonal in the pattern
        col_idx.push(n);
        values.push(0.0);
        row_ptr.push(col_idx.len());
        SparseMatrix { n: n + 1, row_ptr, col_idx, values }
    }

    /// Block residual `‖(b − Ax − cλ, γ − cᵀx)‖ / ‖(b, γ)‖`.
    pub fn residual(&self, x: &[f64], lambda: f64) -> f64 {
        let ax = self.a.matvec(x);
        let mut s = 0.0;
        for i in 0..x.len() {
            let r = self.b[i] - ax[i] - self.c[i] * lambda;
            s += r * r;
        }
        let rc = self.gamma - dot(&self.c, x);
        s += rc * rc;
        let bn = norm2(&self.b).hypot(self.gamma);
        if bn > 0.0 {
            s.sqrt() / bn
        } else {
            s.sqrt()
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factorization of `[[A, c], [cᵀ, 0]]` for repeated solves.
///
/// The general form factors the augmented matrix directly. When `A` has a
/// known one-dimensional kernel `e` with `cᵀe ≠ 0`, [`BorderedFactor::deflated`]
/// instead factors `A` with one row and column replaced by the identity,
/// which keeps the dense border out of the sparse factorization.
pub struct BorderedFactor {
    n: usize,
    kind: BorderedKind,
}

enum BorderedKind {
    Augmented(LuFactor),
    Deflated { lu: LuFactor, a: SparseMatrix, c: Vec<f64>, e: Vec<f64>, k: usize, z: Vec<f64>, denom: f64, ce: f64 },
}

impl BorderedFactor {
    pub fn new(a: &SparseMatrix, c: &[f64]) -> Result<Self> {
        let n = a.n;
        if c.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: c.len() });
        }
        let sys = BorderedSystem { a: a.clone(), c: c.to_vec(), b: Vec::new(), gamma: 0.0 };
        let lu = LuFactor::new(&sys.augmented()).map_err(|e| match e {
            Error::Singular(k) => Error::RankDeficient(format!("zero pivot at step {k}")),
            other => other,
        })?;
        Ok(Self { n, kind: BorderedKind::Augmented(lu) })
    }

    /// `A e = 0`, `e[k] ≠ 0`, `cᵀe ≠ 0`. `previous` may supply a factor
    /// with the same sparsity pattern whose symbolic analysis is reused.
    pub fn deflated(a: &SparseMatrix, c: &[f64], e: &[f64], k: usize, previous: Option<&BorderedFactor>) -> Result<Self> {
        let n = a.n;
        if c.len() != n || e.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: c.len().min(e.len()) });
        }
        if k >= n || e[k] == 0.0 {
            return Err(Error::RankDeficient(format!("pivot {k} is not in the kernel support")));
        }
        let ce = dot(c, e);
        if ce == 0.0 {
            return Err(Error::RankDeficient("constraint is orthogonal to the kernel".into()));
        }
        let mut pinned = a.clone();
        for r in 0..n {
            for idx in pinned.row_ptr[r]..pinned.row_ptr[r + 1] {
                let col = pinned.col_idx[idx];
                if r == k || col == k {
                    pinned.values[idx] = if r == col { 1.0 } else { 0.0 };
                }
            }
        }
        if pinned.get(k, k) != 1.0 {
            pinned = pinned.add_scaled(1.0, &SparseMatrix::from_triplets(n, &[(k, k, 1.0)])?);
        }
        let prev_lu = match previous.map(|p| &p.kind) {
            Some(BorderedKind::Deflated { lu, .. }) => Some(lu),
            _ => None,
        };
        let lu = match prev_lu {
            Some(p) => p.refactor(&pinned)?,
            None => LuFactor::new(&pinned)?,
        };
        let mut cp = c.to_vec();
        cp[k] = 0.0;
        let (z, _) = lu.solve_refined(&cp)?;
        let denom = c[k] - row_dot(a, k, &z);
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::RankDeficient("bordered system is singular".into()));
        }
        Ok(Self {
            n,
            kind: BorderedKind::Deflated { lu, a: a.clone(), c: c.to_vec(), e: e.to_vec(), k, z, denom, ce },
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Returns `(x, λ)`.
    pub fn solve(&self, b: &[f64], gamma: f64) -> Result<(Vec<f64>, f64)> {
        self.solve_with_tol(b, gamma, SOLVE_TOL)
    }

    /// As [`BorderedFactor::solve`] with a caller-chosen bound on the
    /// relative block residual.
    pub fn solve_with_tol(&self, b: &[f64], gamma: f64, tol: f64) -> Result<(Vec<f64>, f64)> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        match &self.kind {
            BorderedKind::Augmented(lu) => {
                let mut rhs = b.to_vec();
                rhs.push(gamma);
                let (mut x, res) = lu.solve_refined(&rhs).map_err(|e| match e {
                    Error::Singular(k) => Error::RankDeficient(format!("non-finite solution component {k}")),
                    other => other,
                })?;
                if !(res <= tol) {
                    return Err(Error::InaccurateSolve { residual: res, tol });
                }
                let lambda = x.pop().unwrap_or(0.0);
                Ok((x, lambda))
            }
            BorderedKind::Deflated { a, c, .. } => {
                let scale = norm2(b).hypot(gamma);
                let block_res = |x: &[f64], lambda: f64| {
                    let ax = a.matvec(x);
                    let r: Vec<f64> = (0..self.n).map(|i| b[i] - ax[i] - lambda * c[i]).collect();
                    let rg = gamma - dot(c, x);
                    let res = norm2(&r).hypot(rg);
                    (r, rg, if scale > 0.0 { res / scale } else { res })
                };
                let (mut x, mut lambda) = self.deflated_solve(b, gamma)?;
                let mut best = (x.clone(), lambda, f64::INFINITY);
                for step in 0..=REFINEMENT_STEPS {
                    let (r, rg, res) = block_res(&x, lambda);
                    if res < best.2 {
                        best = (x.clone(), lambda, res);
                    }
                    if res <= SOLVE_TOL * 1e-2 || step == REFINEMENT_STEPS {
                        break;
                    }
                    let (dx, dl) = self.deflated_solve(&r, rg)?;
                    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                    lambda += dl;
                }
                if !(best.2 <= tol) {
                    return Err(Error::InaccurateSolve { residual: best.2, tol });
                }
                Ok((best.0, best.1))
            }
        }
    }

    fn deflated_solve(&self, b: &[f64], gamma: f64) -> Result<(Vec<f64>, f64)> {
        let BorderedKind::Deflated { lu, a, c, e, k, z, denom, ce } = &self.kind else {
            unreachable!("only called for the deflated form")
        };
        let mut bp = b.to_vec();
        bp[*k] = 0.0;
        let (y, _) = lu.solve_refined(&bp)?;
        let lambda = (b[*k] - row_dot(a, *k, &y)) / denom;
        let mut x: Vec<f64> = y.iter().zip(z).map(|(yi, zi)| yi - lambda * zi).collect();
        let mu = (gamma - dot(c, &x)) / ce;
        x.iter_mut().zip(e).for_each(|(xi, ei)| *xi += mu * ei);
        Ok((x, lambda))
    }
}

fn row_dot(a: &SparseMatrix, r: usize, x: &[f64]) -> f64 {
    a.row(r).map(|(c, v)| v * x[c]).sum()
}

/// Solves a bordered system, returning `(x, λ)`.
pub fn solve_bordered(sys: &BorderedSystem) -> Result<(Vec<f64>, f64)> {
    let n = sys.a.n;
    if sys.c.len() != n || sys.b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sys.c.len().min(sys.b.len()) });
    }
    let aug = sys.augmented();
    let lu = LuFactor::new(&aug).map_err(|e| match e {
        Error::Singular(k) => Error::RankDeficient(format!("zero pivot at step {k}")),
        other => other,
    })?;
    let mut rhs = sys.b.clone();
    rhs.push(sys.gamma);
    let sol = lu.solve(&rhs).map_err(|e| match e {
        Error::Singular(k) => Error::RankDeficient(format!("non-finite solution component {k}")),
        other => other,
    })?;
    let lambda = sol[n];
    let mut x = sol;
    x.truncate(n);
    Ok((x, lambda))
}
