use crate::{Error, Result};

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    /// Sorts triplets by (row, col) and sums duplicates. The summation order
    /// follows the input order, so equal inputs give bitwise-equal matrices.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(r, c, _) in &entries {
            if r >= n || c >= n {
                return Err(Error::IndexOutOfRange { row: r, col: c, n });
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(entries.len());
        let mut val: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(c);
                val.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(CsrMatrix { n, row_ptr, col, val })
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col[a..b].iter().copied().zip(self.val[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.col[a..b].binary_search(&c) {
            Ok(k) => self.val[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[r] = s;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut entries = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                entries.push((c, r, v));
            }
        }
        CsrMatrix::from_triplets(self.n, entries).expect("transpose keeps indices in range")
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> CsrMatrix {
        let mut entries = Vec::with_capacity(2 * self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                entries.push((r, c, 0.5 * v));
                entries.push((c, r, 0.5 * v));
            }
        }
        let mut m = CsrMatrix::from_triplets(self.n, entries).expect("indices in range");
        // make the result exactly symmetric regardless of summation order
        for r in 0..m.n {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                let c = m.col[k];
                if c < r {
                    m.val[k] = m.get(c, r);
                }
            }
        }
        m
    }

    /// `max |A - A^T|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.val.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Norm used for the relative residual `||b - Ax|| / ||b||`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualNorm {
    Max,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    /// Zero fill-in incomplete LU (incomplete Cholesky on symmetric input).
    Ilu0,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Relative residual target.
    pub tol: f64,
    pub norm: ResidualNorm,
    pub preconditioner: Preconditioner,
    /// Iteration cap as a multiple of the unknown count.
    pub max_iter_factor: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-4,
            norm: ResidualNorm::L2,
            preconditioner: Preconditioner::Ilu0,
            max_iter_factor: 10,
        }
    }
}

impl SolverSettings {
    pub fn with_tol(tol: f64) -> Self {
        SolverSettings {
            tol,
            ..Default::default()
        }
    }

    fn max_iters(&self, n: usize) -> usize {
        (self.max_iter_factor * n).max(10)
    }

    fn measure(&self, v: &[f64]) -> f64 {
        match self.norm {
            ResidualNorm::Max => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            ResidualNorm::L2 => norm(v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

enum Precond {
    Jacobi(Vec<f64>),
    Ilu(Ilu0),
}

impl Precond {
    fn new(a: &CsrMatrix, kind: Preconditioner) -> Self {
        match kind {
            Preconditioner::Jacobi => Precond::Jacobi(
                a.diagonal()
                    .into_iter()
                    .map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
                    .collect(),
            ),
            Preconditioner::Ilu0 => Precond::Ilu(Ilu0::new(a)),
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Jacobi(m) => {
                for k in 0..r.len() {
                    z[k] = r[k] * m[k];
                }
            }
            Precond::Ilu(f) => f.solve(r, z),
        }
    }
}

/// ILU(0) factors stored in the sparsity pattern of `A`: strict lower part
/// holds `L` (unit diagonal), the rest holds `U`.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Self {
        let n = a.n;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in lu.row_ptr[r]..lu.row_ptr[r + 1] {
                if lu.col[k] == r {
                    diag[r] = k;
                }
            }
        }
        // column position lookup for the current row
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.col[k]] = k;
            }
            for k in start..end {
                let c = lu.col[k];
                if c >= i {
                    break;
                }
                let dk = diag[c];
                let pivot = if dk == usize::MAX { 0.0 } else { lu.val[dk] };
                if pivot.abs() < 1e-300 {
                    continue;
                }
                let lik = lu.val[k] / pivot;
                lu.val[k] = lik;
                for m in dk + 1..lu.row_ptr[c + 1] {
                    let p = pos[lu.col[m]];
                    if p != usize::MAX {
                        lu.val[p] -= lik * lu.val[m];
                    }
                }
            }
            for k in start..end {
                pos[lu.col[k]] = usize::MAX;
            }
            // guard against breakdown: fall back to the original diagonal
            if diag[i] != usize::MAX && !(lu.val[diag[i]].abs() > 1e-14 * a.val[diag[i]].abs()) {
                lu.val[diag[i]] = a.val[diag[i]];
            }
        }
        Ilu0 { lu, diag }
    }

    pub fn solve(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lu.n;
        let lu = &self.lu;
        for i in 0..n {
            let mut s = r[i];
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                let c = lu.col[k];
                if c >= i {
                    break;
                }
                s -= lu.val[k] * z[c];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            let d = self.diag[i];
            if d == usize::MAX {
                continue;
            }
            for k in d + 1..lu.row_ptr[i + 1] {
                s -= lu.val[k] * z[lu.col[k]];
            }
            z[i] = s / lu.val[d];
        }
    }
}

fn residual_vec(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut ax = vec![0.0; a.n];
    a.mul_vec(x, &mut ax);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Preconditioned conjugate gradients.
pub fn pcg(a: &CsrMatrix, b: &[f64], settings: &SolverSettings) -> Result<(Vec<f64>, KrylovStats)> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let bnorm = settings.measure(b);
    if bnorm == 0.0 {
        return Ok((
            x,
            KrylovStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let m = Precond::new(a, settings.preconditioner);
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = settings.max_iters(n);
    let mut rel = 1.0;
    for it in 1..=cap {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverBreakdown {
                solver: "pcg",
                iteration: it,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rel = settings.measure(&r) / bnorm;
        if rel <= settings.tol {
            let rel = settings.measure(&residual_vec(a, &x, b)) / bnorm;
            return Ok((
                x,
                KrylovStats {
                    iterations: it,
                    residual: rel,
                },
            ));
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverDiverged {
        solver: "pcg",
        iterations: cap,
        residual: rel,
    })
}

/// Right-preconditioned BiCGSTAB for the nonsymmetric second-order system.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], settings: &SolverSettings) -> Result<(Vec<f64>, KrylovStats)> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let bnorm = settings.measure(b);
    if bnorm == 0.0 {
        return Ok((
            x,
            KrylovStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let m = Precond::new(a, settings.preconditioner);
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let cap = settings.max_iters(n);
    let mut rel = 1.0;
    let mut restarts = 0;
    for it in 1..=cap {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // restart with the current residual as shadow vector
            if restarts > 20 {
                return Err(Error::SolverBreakdown {
                    solver: "bicgstab",
                    iteration: it,
                });
            }
            restarts += 1;
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        m.apply(&p, &mut y);
        a.mul_vec(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            omega = 0.0;
            continue;
        }
        alpha = rho / rv;
        for k in 0..n {
            r[k] -= alpha * v[k];
            x[k] += alpha * y[k];
        }
        rel = settings.measure(&r) / bnorm;
        if rel <= settings.tol {
            let rel = settings.measure(&residual_vec(a, &x, b)) / bnorm;
            if rel <= settings.tol * 10.0 {
                return Ok((
                    x,
                    KrylovStats {
                        iterations: it,
                        residual: rel,
                    },
                ));
            }
        }
        m.apply(&r, &mut z);
        a.mul_vec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += omega * z[k];
            r[k] -= omega * t[k];
        }
        rel = settings.measure(&r) / bnorm;
        if rel <= settings.tol {
            let true_rel = settings.measure(&residual_vec(a, &x, b)) / bnorm;
            if true_rel <= settings.tol * 10.0 {
                return Ok((
                    x,
                    KrylovStats {
                        iterations: it,
                        residual: true_rel,
                    },
                ));
            }
            // drifted: refresh the recursive residual
            let mut ax = vec![0.0; n];
            a.mul_vec(&x, &mut ax);
            for k in 0..n {
                r[k] = b[k] - ax[k];
            }
        }
    }
    Err(Error::SolverDiverged {
        solver: "bicgstab",
        iterations: cap,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t).unwrap()
    }

    #[test]
    fn triplets_merge_and_range_check() {
        let m = CsrMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 0.5)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert!(matches!(
            CsrMatrix::from_triplets(2, vec![(2, 0, 1.0)]),
            Err(Error::IndexOutOfRange { row: 2, .. })
        ));
    }

    #[test]
    fn symmetrize_is_exact() {
        let m = CsrMatrix::from_triplets(3, vec![(0, 1, 0.3), (1, 0, 0.1), (2, 0, 1.0 / 3.0), (1, 1, 1.0)]).unwrap();
        let s = m.symmetrized();
        assert_eq!(s.asymmetry(), 0.0);
        assert!((s.get(0, 1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn solvers_meet_tolerance() {
        let n = 60;
        let a = laplacian_1d(n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for tol in [1e-4, 1e-10] {
            let s = SolverSettings::with_tol(tol);
            for (norm_kind, pre) in [
                (ResidualNorm::Max, Preconditioner::Jacobi),
                (ResidualNorm::L2, Preconditioner::Jacobi),
                (ResidualNorm::L2, Preconditioner::Ilu0),
            ] {
                let s = SolverSettings {
                    norm: norm_kind,
                    preconditioner: pre,
                    ..s
                };
                let (x, st) = pcg(&a, &b, &s).unwrap();
                assert!(st.residual <= tol * 1.01, "{st:?}");
                assert!(
                    s.measure(&residual_vec(&a, &x, &b)) / s.measure(&b) <= tol * 1.01,
                    "{st:?}"
                );
                let (x, st) = bicgstab(&a, &b, &s).unwrap();
                assert!(
                    s.measure(&residual_vec(&a, &x, &b)) / s.measure(&b) <= tol * 10.0,
                    "{st:?}"
                );
            }
        }
        let (x, st) = pcg(&a, &vec![0.0; n], &SolverSettings::default()).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
        assert_eq!(st.iterations, 0);
    }

    #[test]
    fn bicgstab_handles_nonsymmetric() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 {
                t.push((i, i - 1, -1.5));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, t).unwrap();
        let b = vec![1.0; n];
        let (x, _) = bicgstab(&a, &b, &SolverSettings::with_tol(1e-12)).unwrap();
        assert!(norm(&residual_vec(&a, &x, &b)) < 1e-10);
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        // no fill-in: ILU(0) is the exact LU factorization
        let a = laplacian_1d(30);
        let f = Ilu0::new(&a);
        let b: Vec<f64> = (0..30).map(|k| (k as f64).sin()).collect();
        let mut x = vec![0.0; 30];
        f.solve(&b, &mut x);
        assert!(norm(&residual_vec(&a, &x, &b)) < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let a = laplacian_1d(200);
        let b = vec![1.0; 200];
        let s = SolverSettings {
            tol: 1e-14,
            max_iter_factor: 0,
            preconditioner: Preconditioner::Jacobi,
            ..Default::default()
        };
        assert!(matches!(
            pcg(&a, &b, &s),
            Err(Error::SolverDiverged { iterations: 10, .. })
        ));
    }
}
