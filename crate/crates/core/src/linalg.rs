//! Dense complex linear algebra on small tensor-product Hilbert spaces.
//!
//! Basis convention: for `N` spins of local dimension `d`, basis index
//! `i = sum_s digit_s * d^(N-1-s)`, so spin 0 is the most significant digit.

use faer::{Mat, Side};

pub use faer::c64;

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

/// Largest Hilbert-space dimension handled densely.
pub const DIM_CAP: usize = 1 << 14;

/// Runs faer kernels on the calling thread, so results do not depend on the
/// worker count.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

pub fn checked_dim(d: usize, spins: usize) -> Result<usize> {
    let dim = (d as u128).checked_pow(spins as u32).unwrap_or(u128::MAX);
    if dim > DIM_CAP as u128 {
        return Err(Error::DimensionCap { dim, cap: DIM_CAP });
    }
    Ok(dim as usize)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn from_rows(rows: &[&[(f64, f64)]]) -> CMat {
    let n = rows.len();
    Mat::from_fn(n, rows[0].len(), |i, j| c64::new(rows[i][j].0, rows[i][j].1))
}

pub fn real_diag(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn scale(a: &CMat, s: f64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn adjoint(a: &CMat) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn trace(a: &CMat) -> c64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> c64 {
    let n = a.nrows();
    let mut acc = c64::new(0.0, 0.0);
    for k in 0..n {
        let bcol = b.col_as_slice(k);
        for (i, &bik) in bcol.iter().enumerate() {
            acc += a[(k, i)] * bik;
        }
    }
    acc
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// Largest entrywise deviation `|A_ij - conj(A_ji)|`.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_diagonal(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| {
        a.col_as_slice(j)
            .iter()
            .enumerate()
            .all(|(i, v)| i == j || (v.re == 0.0 && v.im == 0.0))
    })
}

pub fn is_real(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| a.col_as_slice(j).iter().all(|v| v.im == 0.0))
}

/// Orthonormal eigenbasis, stored in the cheapest exact form available.
#[derive(Debug, Clone)]
pub enum EigenBasis {
    /// Diagonal input: eigenvector `k` is the basis vector `perm[k]`.
    Permutation(Vec<usize>),
    Real(Mat<f64>),
    Complex(CMat),
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub basis: EigenBasis,
}

impl Eigh {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<c64> {
        let n = self.dim();
        match &self.basis {
            EigenBasis::Permutation(p) => (0..n).map(|i| c64::new(if i == p[k] { 1.0 } else { 0.0 }, 0.0)).collect(),
            EigenBasis::Real(u) => u.col_as_slice(k).iter().map(|&x| c64::new(x, 0.0)).collect(),
            EigenBasis::Complex(u) => u.col_as_slice(k).to_vec(),
        }
    }

    /// `|<u_k|psi>|^2` for every eigenvector.
    pub fn overlaps(&self, psi: &[c64]) -> Vec<f64> {
        match &self.basis {
            EigenBasis::Permutation(p) => p.iter().map(|&i| psi[i].norm_sqr()).collect(),
            EigenBasis::Real(u) => (0..self.dim())
                .map(|k| {
                    let col = u.col_as_slice(k);
                    let mut acc = c64::new(0.0, 0.0);
                    for (x, y) in col.iter().zip(psi) {
                        acc += y * *x;
                    }
                    acc.norm_sqr()
                })
                .collect(),
            EigenBasis::Complex(u) => (0..self.dim())
                .map(|k| {
                    let col = u.col_as_slice(k);
                    let mut acc = c64::new(0.0, 0.0);
                    for (x, y) in col.iter().zip(psi) {
                        acc += x.conj() * y;
                    }
                    acc.norm_sqr()
                })
                .collect(),
        }
    }

    /// `<u_k| rho |u_k>` for every eigenvector.
    pub fn diagonal_of(&self, rho: &CMat) -> Vec<f64> {
        let n = self.dim();
        match &self.basis {
            EigenBasis::Permutation(p) => p.iter().map(|&i| rho[(i, i)].re).collect(),
            EigenBasis::Real(u) => {
                // Im(rho) is antisymmetric and drops out of u^T rho u.
                let re = Mat::<f64>::from_fn(n, n, |i, j| rho[(i, j)].re);
                let t = &re * u;
                (0..n)
                    .map(|k| t.col_as_slice(k).iter().zip(u.col_as_slice(k)).map(|(a, b)| a * b).sum())
                    .collect()
            }
            EigenBasis::Complex(u) => {
                let t = rho * u;
                (0..n)
                    .map(|k| {
                        t.col_as_slice(k)
                            .iter()
                            .zip(u.col_as_slice(k))
                            .map(|(a, b)| b.conj() * a)
                            .sum::<c64>()
                            .re
                    })
                    .collect()
            }
        }
    }

    /// `U f(Λ) U^†`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.dim();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        match &self.basis {
            EigenBasis::Permutation(p) => {
                let mut out = zeros(n);
                for (k, &i) in p.iter().enumerate() {
                    out[(i, i)] = c64::new(fv[k], 0.0);
                }
                out
            }
            EigenBasis::Real(u) => {
                let scaled = Mat::<f64>::from_fn(n, n, |i, k| u[(i, k)] * fv[k]);
                let m = &scaled * u.transpose();
                Mat::from_fn(n, n, |i, j| c64::new(m[(i, j)], 0.0))
            }
            EigenBasis::Complex(u) => {
                let scaled = Mat::from_fn(n, n, |i, k| u[(i, k)] * fv[k]);
                &scaled * u.adjoint()
            }
        }
    }
}

/// Eigendecomposition of a Hermitian matrix. Diagonal and real-symmetric
/// inputs take exact or cheaper paths; ties among diagonal entries keep
/// basis order.
pub fn eigh(a: &CMat) -> Result<Eigh> {
    let n = a.nrows();
    if is_diagonal(a) {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re).then(x.cmp(&y)));
        let values = perm.iter().map(|&i| a[(i, i)].re).collect();
        return Ok(Eigh {
            values,
            basis: EigenBasis::Permutation(perm),
        });
    }
    if is_real(a) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)].re);
        let evd = re.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigensolver)?;
        let values = (0..n).map(|k| evd.S().column_vector()[k]).collect();
        return Ok(Eigh {
            values,
            basis: EigenBasis::Real(evd.U().to_owned()),
        });
    }
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigensolver)?;
    let values = (0..n).map(|k| evd.S().column_vector()[k].re).collect();
    Ok(Eigh {
        values,
        basis: EigenBasis::Complex(evd.U().to_owned()),
    })
}

pub fn eigvalsh(a: &CMat) -> Result<Vec<f64>> {
    let n = a.nrows();
    if is_diagonal(a) {
        let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        v.sort_by(f64::total_cmp);
        return Ok(v);
    }
    if is_real(a) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)].re);
        return re.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigensolver);
    }
    let v = a.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigensolver)?;
    Ok(v)
}

/// Operator norm of a Hermitian matrix.
pub fn hermitian_norm(a: &CMat) -> Result<f64> {
    let v = eigvalsh(a)?;
    Ok(v.first().map_or(0.0, |x| x.abs()).max(v.last().map_or(0.0, |x| x.abs())))
}

/// Operator norm of an arbitrary matrix via the largest eigenvalue of `A^† A`.
pub fn operator_norm(a: &CMat) -> Result<f64> {
    let g = adjoint(a) * a;
    Ok(eigvalsh(&g)?.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Index bookkeeping for an operator acting on `support` inside a register
/// of `spins` sites.
#[derive(Debug, Clone)]
pub struct Placement {
    dim: usize,
    offsets: Vec<usize>,
    strides: Vec<usize>,
    d: usize,
}

impl Placement {
    /// `support` lists positions in `0..spins`, in the order matching the
    /// operator's own tensor factors.
    pub fn new(support: &[usize], spins: usize, d: usize) -> Self {
        let dim = d.pow(spins as u32);
        let strides: Vec<usize> = support.iter().map(|&s| d.pow((spins - 1 - s) as u32)).collect();
        let local = d.pow(support.len() as u32);
        let offsets = (0..local)
            .map(|b| {
                let mut rest = b;
                let mut off = 0;
                for &stride in strides.iter().rev() {
                    off += (rest % d) * stride;
                    rest /= d;
                }
                off
            })
            .collect();
        Placement { dim, offsets, strides, d }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn local_dim(&self) -> usize {
        self.offsets.len()
    }

    /// Local index of the support digits of `i`.
    pub fn local_index(&self, i: usize) -> usize {
        self.strides.iter().fold(0, |acc, &s| acc * self.d + (i / s) % self.d)
    }

    /// Base indices: full indices whose support digits are all zero.
    pub fn bases(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).filter(move |&i| self.local_index(i) == 0)
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

/// Adds `op` acting on `support` (identity elsewhere) into `target`.
pub fn add_embedded(target: &mut CMat, op: &CMat, support: &[usize], spins: usize, d: usize) {
    let place = Placement::new(support, spins, d);
    let offs = place.offsets().to_vec();
    let bases: Vec<usize> = place.bases().collect();
    for base in bases {
        for (a, &oa) in offs.iter().enumerate() {
            for (b, &ob) in offs.iter().enumerate() {
                let v = op[(a, b)];
                if v.re != 0.0 || v.im != 0.0 {
                    target[(base + oa, base + ob)] += v;
                }
            }
        }
    }
}

pub fn embed(op: &CMat, support: &[usize], spins: usize, d: usize) -> CMat {
    let mut out = zeros(d.pow(spins as u32));
    add_embedded(&mut out, op, support, spins, d);
    out
}

/// `op` (on `support`) applied to a state vector of the register.
pub fn apply_to_vector(op: &CMat, place: &Placement, v: &[c64]) -> Vec<c64> {
    let offs = place.offsets();
    let local = offs.len();
    let mut out = vec![c64::new(0.0, 0.0); v.len()];
    let mut x = vec![c64::new(0.0, 0.0); local];
    for base in place.bases() {
        for (b, &ob) in offs.iter().enumerate() {
            x[b] = v[base + ob];
        }
        for (a, &oa) in offs.iter().enumerate() {
            let mut acc = c64::new(0.0, 0.0);
            for (b, xb) in x.iter().enumerate() {
                acc += op[(a, b)] * xb;
            }
            out[base + oa] = acc;
        }
    }
    out
}

/// `op` (on `support`) multiplied from the left onto a register operator.
pub fn apply_to_matrix(op: &CMat, place: &Placement, m: &CMat) -> CMat {
    let mut out = zeros(m.nrows());
    for j in 0..m.ncols() {
        let col = apply_to_vector(op, place, m.col_as_slice(j));
        out.col_as_slice_mut(j).copy_from_slice(&col);
    }
    out
}

pub fn mat_vec(a: &CMat, v: &[c64]) -> Vec<c64> {
    let mut out = vec![c64::new(0.0, 0.0); a.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj.re == 0.0 && vj.im == 0.0 {
            continue;
        }
        for (o, &aij) in out.iter_mut().zip(a.col_as_slice(j)) {
            *o += aij * vj;
        }
    }
    out
}

pub fn inner(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn pauli_x() -> CMat {
    real_matrix(2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> CMat {
    from_rows(&[&[(0.0, 0.0), (0.0, -1.0)], &[(0.0, 1.0), (0.0, 0.0)]])
}

pub fn pauli_z() -> CMat {
    real_matrix(2, &[1.0, 0.0, 0.0, -1.0])
}

/// Row-major real matrix.
pub fn real_matrix(n: usize, entries: &[f64]) -> CMat {
    Mat::from_fn(n, n, |i, j| c64::new(entries[i * n + j], 0.0))
}

/// Traceless Hermitian basis of `d x d` matrices (generalised Gell-Mann),
/// each rescaled to operator norm 1. For `d = 2` these are X, Y, Z.
pub fn normalized_traceless_basis(d: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut sym = Mat::<c64>::zeros(d, d);
            sym[(j, k)] = c64::new(1.0, 0.0);
            sym[(k, j)] = c64::new(1.0, 0.0);
            out.push(sym);
            let mut anti = Mat::<c64>::zeros(d, d);
            anti[(j, k)] = c64::new(0.0, -1.0);
            anti[(k, j)] = c64::new(0.0, 1.0);
            out.push(anti);
        }
    }
    for l in 1..d {
        let mut diag = vec![0.0; d];
        for v in diag.iter_mut().take(l) {
            *v = 1.0;
        }
        diag[l] = -(l as f64);
        let norm = l as f64;
        out.push(real_diag(&diag.iter().map(|x| x / norm).collect::<Vec<_>>()));
    }
    out
}

/// Projector `|j><j|` on a `d`-level system.
pub fn basis_projector(d: usize, j: usize) -> CMat {
    let mut m = Mat::<c64>::zeros(d, d);
    m[(j, j)] = c64::new(1.0, 0.0);
    m
}
