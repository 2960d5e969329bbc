//! Sparse symmetric linear algebra: CSR storage, CG and MINRES solvers, and a
//! shift-invert Lanczos eigensolver for generalized symmetric pencils.
//!
//! Everything here works on plain `Vec<f64>` vectors. Complex (Hermitian)
//! operators elsewhere in the crate are realified to symmetric matrices of
//! doubled size before they reach these routines.

use crate::error::SolveError;

/// Compressed sparse row matrix. Rows are sorted by column index and
/// duplicate entries are summed at construction.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        // accumulate duplicates in place
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            assert!(r < n_rows && c < n_cols, "triplet out of bounds");
            match merged.last_mut() {
                Some((lr, lc, lv)) if *lr == r && *lc == c => *lv += v,
                _ => merged.push((r, c, v)),
            }
        }

        let mut indptr = vec![0usize; n_rows + 1];
        for &(r, _, _) in &merged {
            indptr[r + 1] += 1;
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        let indices = merged.iter().map(|&(_, c, _)| c).collect();
        let data = merged.iter().map(|&(_, _, v)| v).collect();
        Csr {
            n_rows,
            n_cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.indices[k] == r {
                    d[r] += self.data[k];
                }
            }
        }
        d
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        match self.indices[lo..hi].binary_search(&c) {
            Ok(k) => self.data[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Largest absolute asymmetry `max |A_ij - A_ji|`; zero for matrices
    /// assembled symmetrically.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                worst = worst.max((self.data[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// `alpha * A + beta * B` entrywise (patterns may differ).
    pub fn linear_combination(alpha: f64, a: &Csr, beta: f64, b: &Csr) -> Csr {
        assert_eq!(a.n_rows, b.n_rows);
        assert_eq!(a.n_cols, b.n_cols);
        let mut triplets = Vec::with_capacity(a.nnz() + b.nnz());
        for r in 0..a.n_rows {
            for k in a.indptr[r]..a.indptr[r + 1] {
                triplets.push((r, a.indices[k], alpha * a.data[k]));
            }
            for k in b.indptr[r]..b.indptr[r + 1] {
                triplets.push((r, b.indices[k], beta * b.data[k]));
            }
        }
        Csr::from_triplets(a.n_rows, a.n_cols, triplets)
    }

    /// Entries as (row, col, value) triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(x: &mut [f64], alpha: f64) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Conjugate gradient for SPD systems with Jacobi preconditioning.
pub fn cg(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, SolveError> {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diag()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    for _ in 0..max_iter {
        a.matvec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(SolveError::LinearSolver {
                method: "cg",
                detail: "matrix not positive definite".into(),
            });
        }
        let alpha = rz / pq;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::LinearSolver {
        method: "cg",
        detail: format!("no convergence in {max_iter} iterations"),
    })
}

/// Result of a MINRES run; `rel_residual` is in the preconditioned norm.
#[derive(Debug, Clone)]
pub struct MinresOutcome {
    pub x: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// MINRES for symmetric (possibly indefinite) systems, with a positive
/// diagonal preconditioner built from |diag A|.
pub fn minres(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> MinresOutcome {
    minres_op(|x, y| a.matvec_into(x, y), &a.diag(), b, tol, max_iter)
}

/// MINRES on a matrix-free symmetric operator. `diag_hint` seeds the Jacobi
/// preconditioner (absolute values are used; zeros fall back to 1). Always
/// returns the best iterate; callers decide whether the achieved residual is
/// acceptable.
pub fn minres_op(
    apply: impl Fn(&[f64], &mut [f64]),
    diag_hint: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> MinresOutcome {
    let n = b.len();
    let inv_prec: Vec<f64> = diag_hint
        .iter()
        .map(|&d| {
            let m = d.abs();
            if m > 1e-300 {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    let precond = |r: &[f64]| -> Vec<f64> { r.iter().zip(&inv_prec).map(|(x, p)| x * p).collect() };

    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1_sq = dot(&r1, &y);
    if beta1_sq <= 0.0 {
        return MinresOutcome {
            x,
            converged: true,
            iterations: 0,
            rel_residual: 0.0,
        };
    }
    let beta1 = beta1_sq.sqrt();

    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0f64;
    let mut sn = 0.0f64;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut av = vec![0.0; n];
    let mut iterations = 0;

    for itn in 0..max_iter {
        iterations = itn + 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply(&v, &mut av);
        y.copy_from_slice(&av);
        if oldb > 0.0 {
            axpy(&mut y, -(beta / oldb), &r1);
        }
        let alfa = dot(&v, &y);
        axpy(&mut y, -(alfa / beta), &r2);
        r1.copy_from_slice(&r2);
        r2.copy_from_slice(&y);
        y = precond(&r2);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            break; // round-off broke the preconditioned inner product
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        std::mem::swap(&mut w2, &mut w);
        // w = (v - oldeps*w1 - delta*w2) / gamma, where w1 is the older of the two
        for i in 0..n {
            let w1i = w[i]; // after swap, `w` holds the older direction
            w[i] = (v[i] - oldeps * w1i - delta * w2[i]) * denom;
        }
        axpy(&mut x, phi, &w);

        if phibar <= tol * beta1 {
            return MinresOutcome {
                x,
                converged: true,
                iterations,
                rel_residual: phibar / beta1,
            };
        }
    }
    MinresOutcome {
        x,
        converged: false,
        iterations,
        rel_residual: phibar / beta1,
    }
}

/// Eigendecomposition of a symmetric tridiagonal matrix by the implicit-shift
/// QL algorithm. Returns eigenvalues ascending with matching eigenvectors
/// (columns of the returned matrix, `vectors[k][i]` = component i of pair k).
pub fn sym_tridiag_eigen(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = diag.len();
    assert_eq!(offdiag.len(), n.saturating_sub(1));
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(offdiag);
    // z[i][j]: row i, column j accumulates rotations, columns become vectors
    let mut z = vec![vec![0.0; n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 80, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| (0..n).map(|i| z[i][j]).collect())
        .collect();
    (values, vectors)
}

/// Tridiagonal LU with partial pivoting (one extra superdiagonal of fill).
#[derive(Debug, Clone)]
pub struct TridiagLu {
    d: Vec<f64>,
    dl: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swap: Vec<bool>,
}

impl TridiagLu {
    /// Factor a tridiagonal matrix given by subdiagonal `dl`, diagonal `d`,
    /// superdiagonal `du` (lengths n-1, n, n-1).
    pub fn factor(dl: &[f64], d: &[f64], du: &[f64]) -> Result<Self, SolveError> {
        let n = d.len();
        let mut d = d.to_vec();
        let mut dl = dl.to_vec();
        let mut du = du.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return Err(SolveError::LinearSolver {
                        method: "tridiag-lu",
                        detail: format!("zero pivot at row {i}"),
                    });
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
                if i + 2 < n {
                    du2[i] = 0.0;
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swap[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            return Err(SolveError::LinearSolver {
                method: "tridiag-lu",
                detail: "zero pivot at the last row".into(),
            });
        }
        Ok(TridiagLu {
            d,
            dl,
            du,
            du2,
            swap,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        debug_assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.dl[i] * b[i];
        }
        b[n - 1] /= self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Dense LU with partial pivoting for the small Schur blocks.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(matrix: Vec<Vec<f64>>) -> Result<Self, SolveError> {
        let n = matrix.len();
        let mut lu: Vec<f64> = matrix.into_iter().flatten().collect();
        assert_eq!(lu.len(), n * n);
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot = k;
            for r in k + 1..n {
                if lu[r * n + k].abs() > lu[pivot * n + k].abs() {
                    pivot = r;
                }
            }
            if lu[pivot * n + k] == 0.0 {
                return Err(SolveError::LinearSolver {
                    method: "dense-lu",
                    detail: format!("singular at column {k}"),
                });
            }
            if pivot != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot * n + c);
                }
                piv.swap(k, pivot);
            }
            let dkk = lu[k * n + k];
            for r in k + 1..n {
                let f = lu[r * n + k] / dkk;
                lu[r * n + k] = f;
                for c in k + 1..n {
                    lu[r * n + c] -= f * lu[k * n + c];
                }
            }
        }
        Ok(DenseLu { n, lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|i| b[self.piv[i]]).collect();
        for r in 1..n {
            for c in 0..r {
                x[r] -= self.lu[r * n + c] * x[c];
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                x[r] -= self.lu[r * n + c] * x[c];
            }
            x[r] /= self.lu[r * n + r];
        }
        x
    }
}

/// Exact direct solver for symmetric matrices whose unknowns split into
/// tridiagonal chains (edge-interior nodes) plus a small set of coupled dofs
/// (vertices, and optionally a constraint border): block elimination with a
/// dense Schur complement on the coupled set.
#[derive(Debug, Clone)]
pub struct ChainSolver {
    n: usize,
    chains: Vec<(usize, usize)>,
    chain_lus: Vec<TridiagLu>,
    /// (coupled position, chain dof, value), grouped arbitrarily.
    coupling: Vec<(usize, usize, f64)>,
    coupled: Vec<usize>,
    schur: DenseLu,
    chain_of: Vec<Option<usize>>,
}

impl ChainSolver {
    /// `chains` are index ranges `(start, len)` that must be tridiagonal in
    /// `a`; every other dof must be listed in `coupled`.
    pub fn new(a: &Csr, chains: &[(usize, usize)], coupled: &[usize]) -> Result<Self, SolveError> {
        let n = a.n_rows;
        let mut chain_of: Vec<Option<usize>> = vec![None; n];
        for (k, &(start, len)) in chains.iter().enumerate() {
            for i in start..start + len {
                chain_of[i] = Some(k);
            }
        }
        let mut coupled_pos: Vec<Option<usize>> = vec![None; n];
        for (pos, &i) in coupled.iter().enumerate() {
            assert!(chain_of[i].is_none(), "dof {i} is both chain and coupled");
            coupled_pos[i] = Some(pos);
        }

        let nc = coupled.len();
        let mut tri: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = chains
            .iter()
            .map(|&(_, len)| (vec![0.0; len - 1], vec![0.0; len], vec![0.0; len - 1]))
            .collect();
        let mut coupling: Vec<(usize, usize, f64)> = Vec::new();
        let mut dense = vec![vec![0.0; nc]; nc];

        for (r, c, v) in a.triplets() {
            match (chain_of[r], coupled_pos[r], chain_of[c], coupled_pos[c]) {
                (Some(k), _, Some(k2), _) => {
                    assert_eq!(k, k2, "cross-chain entry ({r},{c})");
                    let start = chains[k].0;
                    let (i, j) = (r - start, c - start);
                    let (dl, d, du) = &mut tri[k];
                    match j as isize - i as isize {
                        0 => d[i] += v,
                        1 => du[i] += v,
                        -1 => dl[j] += v,
                        _ => panic!("non-tridiagonal chain entry ({r},{c})"),
                    }
                }
                (None, Some(pr), Some(_), _) => coupling.push((pr, c, v)),
                (Some(_), _, None, Some(_)) => {
                    // recorded from the symmetric coupled-row side
                }
                (None, Some(pr), None, Some(pc)) => dense[pr][pc] += v,
                _ => panic!("dof ({r},{c}) outside the chain/coupled partition"),
            }
        }

        let chain_lus: Vec<TridiagLu> = tri
            .iter()
            .map(|(dl, d, du)| TridiagLu::factor(dl, d, du))
            .collect::<Result<_, _>>()?;

        // Schur complement: D - B^T T^-1 B, one chain solve per coupled dof
        let solve_chains = |rhs: &mut [f64], lus: &[TridiagLu]| {
            for (k, &(start, len)) in chains.iter().enumerate() {
                lus[k].solve_in_place(&mut rhs[start..start + len]);
            }
        };
        let mut columns: Vec<Vec<f64>> = vec![vec![0.0; n]; nc];
        for &(pos, cdof, v) in &coupling {
            columns[pos][cdof] += v;
        }
        let mut schur = dense;
        for j in 0..nc {
            let mut z = columns[j].clone();
            solve_chains(&mut z, &chain_lus);
            for i in 0..nc {
                let mut acc = 0.0;
                for &(pos, cdof, v) in &coupling {
                    if pos == i {
                        acc += v * z[cdof];
                    }
                }
                schur[i][j] -= acc;
            }
        }
        let schur = DenseLu::factor(schur)?;

        Ok(ChainSolver {
            n,
            chains: chains.to_vec(),
            chain_lus,
            coupling,
            coupled: coupled.to_vec(),
            schur,
            chain_of,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let nc = self.coupled.len();
        // z = T^-1 b_chain
        let mut z = b.to_vec();
        for i in 0..self.n {
            if self.chain_of[i].is_none() {
                z[i] = 0.0;
            }
        }
        for (k, &(start, len)) in self.chains.iter().enumerate() {
            self.chain_lus[k].solve_in_place(&mut z[start..start + len]);
        }
        // reduced right-hand side on the coupled set
        let mut rc = vec![0.0; nc];
        for (pos, &i) in self.coupled.iter().enumerate() {
            rc[pos] = b[i];
        }
        for &(pos, cdof, v) in &self.coupling {
            rc[pos] -= v * z[cdof];
        }
        let xc = self.schur.solve(&rc);
        // back-substitute into the chains
        let mut rhs = b.to_vec();
        for i in 0..self.n {
            if self.chain_of[i].is_none() {
                rhs[i] = 0.0;
            }
        }
        for &(pos, cdof, v) in &self.coupling {
            rhs[cdof] -= v * xc[pos];
        }
        let mut x = rhs;
        for (k, &(start, len)) in self.chains.iter().enumerate() {
            self.chain_lus[k].solve_in_place(&mut x[start..start + len]);
        }
        for (pos, &i) in self.coupled.iter().enumerate() {
            x[i] = xc[pos];
        }
        x
    }
}

/// Deterministic xorshift generator for reproducible seed vectors.
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in (-1, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    }
}

pub struct LanczosOutcome {
    /// Ritz values of the *operator* passed in (not yet mapped back through
    /// any shift-invert transform).
    pub ritz_values: Vec<f64>,
    /// Ritz vectors in the original space, same order as `ritz_values`.
    pub ritz_vectors: Vec<Vec<f64>>,
    /// Residual estimates |beta_m * last component| per Ritz pair.
    pub residuals: Vec<f64>,
}

/// Lanczos iteration for an operator self-adjoint in the inner product
/// `m_dot`, with full reorthogonalization. Returns all Ritz pairs of the
/// Krylov space, values ascending.
pub fn lanczos_self_adjoint(
    n: usize,
    steps: usize,
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>, SolveError>,
    m_dot: impl Fn(&[f64], &[f64]) -> f64,
    seed: u64,
) -> Result<LanczosOutcome, SolveError> {
    let steps = steps.min(n).max(1);
    let mut rng = SplitMix64::new(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
    let nrm = m_dot(&v, &v).sqrt();
    scale(&mut v, 1.0 / nrm);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    for j in 0..steps {
        let w0 = apply(&basis[j])?;
        let mut w = w0;
        let alpha = m_dot(&w, &basis[j]);
        alphas.push(alpha);
        axpy(&mut w, -alpha, &basis[j]);
        if j > 0 {
            let beta_prev = betas[j - 1];
            axpy(&mut w, -beta_prev, &basis[j - 1]);
        }
        // full reorthogonalization, twice for safety
        for _ in 0..2 {
            for q in &basis {
                let c = m_dot(&w, q);
                axpy(&mut w, -c, q);
            }
        }
        let beta = m_dot(&w, &w).sqrt();
        if j + 1 == steps {
            betas.push(beta);
            break;
        }
        if beta < 1e-13 {
            betas.push(0.0);
            break;
        }
        scale(&mut w, 1.0 / beta);
        betas.push(beta);
        basis.push(w);
    }

    let m = alphas.len();
    let (values, small_vecs) = sym_tridiag_eigen(&alphas, &betas[..m - 1]);
    let beta_last = betas[m - 1];
    let mut ritz_vectors = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    for sv in &small_vecs {
        let mut y = vec![0.0; n];
        for (k, q) in basis.iter().enumerate() {
            axpy(&mut y, sv[k], q);
        }
        ritz_vectors.push(y);
        residuals.push((beta_last * sv[m - 1]).abs());
    }
    Ok(LanczosOutcome {
        ritz_values: values,
        ritz_vectors,
        residuals,
    })
}

/// Smallest `k` eigenvalues of the symmetric pencil `A x = lambda M x`
/// (A symmetric positive semidefinite, M SPD) via shift-invert Lanczos at a
/// shift strictly below the spectrum.
pub fn smallest_generalized_eigenvalues(
    a: &Csr,
    m: &Csr,
    k: usize,
    shift: f64,
    steps: usize,
) -> Result<Vec<f64>, SolveError> {
    let n = a.n_rows;
    let shifted = Csr::linear_combination(1.0, a, -shift, m);
    let op = |x: &[f64]| -> Result<Vec<f64>, SolveError> {
        let rhs = m.matvec(x);
        cg(&shifted, &rhs, 1e-12, 20 * n + 200)
    };
    let m_dot = |x: &[f64], y: &[f64]| dot(&m.matvec(x), y);
    let steps = steps.max(2 * k + 10);
    let out = lanczos_self_adjoint(n, steps, op, m_dot, 0x5eed_1e17)?;
    // largest Ritz values of (A - shift M)^{-1} M map to the smallest lambda
    let mut eigs: Vec<f64> = out
        .ritz_values
        .iter()
        .rev()
        .take(k)
        .map(|&theta| shift + 1.0 / theta)
        .collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn csr_sums_duplicates_and_sorts() {
        let a = Csr::from_triplets(
            2,
            2,
            vec![(0, 1, 1.0), (0, 0, 2.0), (0, 1, 0.5), (1, 1, 3.0)],
        );
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 50;
        let a = laplacian_1d(n);
        let xtrue: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.matvec(&xtrue);
        let x = cg(&a, &b, 1e-13, 1000).unwrap();
        let err: f64 = x
            .iter()
            .zip(&xtrue)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err={err}");
    }

    #[test]
    fn minres_solves_indefinite_system() {
        let n = 40;
        // laplacian shifted to indefiniteness
        let a = laplacian_1d(n);
        let eye = Csr::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)));
        let shifted = Csr::linear_combination(1.0, &a, -1.0, &eye);
        let xtrue: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let b = shifted.matvec(&xtrue);
        let out = minres(&shifted, &b, 1e-12, 4000);
        assert!(out.converged, "rel residual {}", out.rel_residual);
        let x = out.x;
        let r = shifted.matvec(&x);
        let resid: f64 = r
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        assert!(resid < 1e-8 * norm2(&b), "resid={resid}");
    }

    #[test]
    fn tridiag_eigen_matches_known_spectrum() {
        // second-difference matrix of size n: eigenvalues 2 - 2 cos(k pi / (n+1))
        let n = 12;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        let (vals, vecs) = sym_tridiag_eigen(&d, &e);
        for (k, v) in vals.iter().enumerate() {
            let expect =
                2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((v - expect).abs() < 1e-10, "k={k} v={v} expect={expect}");
        }
        // eigenvector check A q = lambda q for the lowest pair
        let q = &vecs[0];
        for i in 0..n {
            let left = 2.0 * q[i]
                - if i > 0 { q[i - 1] } else { 0.0 }
                - if i + 1 < n { q[i + 1] } else { 0.0 };
            assert!((left - vals[0] * q[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn tridiag_lu_matches_dense_solve_on_random_systems() {
        let mut rng = SplitMix64::new(99);
        for trial in 0..50 {
            let n = 2 + (rng.next_u64() % 12) as usize;
            let d: Vec<f64> = (0..n).map(|_| rng.next_f64() * 3.0).collect();
            let dl: Vec<f64> = (0..n - 1).map(|_| rng.next_f64()).collect();
            let du: Vec<f64> = (0..n - 1).map(|_| rng.next_f64()).collect();
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                dense[i][i] = d[i];
                if i + 1 < n {
                    dense[i + 1][i] = dl[i];
                    dense[i][i + 1] = du[i];
                }
            }
            let Ok(lu) = TridiagLu::factor(&dl, &d, &du) else {
                continue;
            };
            let Ok(dlu) = DenseLu::factor(dense.clone()) else {
                continue;
            };
            let b: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let mut x = b.clone();
            lu.solve_in_place(&mut x);
            let y = dlu.solve(&b);
            for i in 0..n {
                assert!(
                    (x[i] - y[i]).abs() < 1e-8 * (1.0 + y[i].abs()),
                    "trial {trial} row {i}"
                );
            }
        }
    }

    #[test]
    fn chain_solver_matches_cg_on_a_chain_plus_coupled_system() {
        // two chains of interior dofs coupled through two "vertex" dofs,
        // SPD so CG provides the oracle
        let mut rng = SplitMix64::new(7);
        let chains = [(2usize, 6usize), (8usize, 5usize)];
        let coupled = [0usize, 1usize];
        let n = 13;
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0 + rng.next_f64()));
        }
        for &(start, len) in &chains {
            for i in start..start + len - 1 {
                let v = rng.next_f64();
                trip.push((i, i + 1, v));
                trip.push((i + 1, i, v));
            }
            // chain ends tie to the coupled dofs
            for (end, vtx) in [(start, 0usize), (start + len - 1, 1usize)] {
                let v = rng.next_f64();
                trip.push((end, vtx, v));
                trip.push((vtx, end, v));
            }
        }
        let a = Csr::from_triplets(n, n, trip);
        let solver = ChainSolver::new(&a, &chains, &coupled).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let x = solver.solve(&b);
        let oracle = cg(&a, &b, 1e-14, 10_000).unwrap();
        for i in 0..n {
            assert!(
                (x[i] - oracle[i]).abs() < 1e-9 * (1.0 + oracle[i].abs()),
                "row {i}: {} vs {}",
                x[i],
                oracle[i]
            );
        }
        // the solve is exact: residual at rounding level
        let r = a.matvec(&x);
        let resid: f64 = r
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        assert!(resid < 1e-12 * norm2(&b));
    }

    #[test]
    fn shift_invert_finds_smallest_pencil_eigenvalues() {
        let n = 60;
        let a = laplacian_1d(n);
        let m = Csr::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)));
        let eigs = smallest_generalized_eigenvalues(&a, &m, 3, -0.5, 40).unwrap();
        for (k, v) in eigs.iter().enumerate() {
            let expect =
                2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((v - expect).abs() < 1e-9, "k={k} v={v} expect={expect}");
        }
    }
}
