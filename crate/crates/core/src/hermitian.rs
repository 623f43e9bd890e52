//! Dense Hermitian linear algebra: minors, Schur complements, ray limits of
//! inverses and elementary symmetric functions.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Relative tolerance below which a matrix is treated as exactly Hermitian.
const HERMITIAN_TOL: f64 = 1e-12;
/// PSD classification: min eigenvalue >= -PSD_TOL * |A|.
pub const PSD_TOL: f64 = 1e-12;
/// Kernel cutoff for ray limits, relative to |V|.
pub const KERNEL_TOL: f64 = 1e-10;

/// A Hermitian coefficient matrix A_{i jbar} in a fixed frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::MatrixRepr", into = "crate::io::MatrixRepr")]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    /// Validates Hermitian symmetry and removes the rounding-level skew part.
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return input(format!("matrix must be square and nonempty, got {}x{}", m.nrows(), m.ncols()));
        }
        let skew = (&m - m.adjoint()).norm();
        let scale = m.norm().max(1.0);
        if skew > HERMITIAN_TOL * scale * 10.0 {
            return input(format!("matrix is not Hermitian: |A - A^*| = {skew:.3e}"));
        }
        Ok(Self::symmetrized(m))
    }

    /// Hermitian part (A + A^*)/2 without validation.
    pub fn symmetrized(m: CMat) -> Self {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        HermitianMatrix(h)
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(CMat::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(CMat::zeros(n, n))
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let n = d.len();
        HermitianMatrix(CMat::from_fn(n, n, |i, j| if i == j { C64::new(d[i], 0.0) } else { C64::new(0.0, 0.0) }))
    }

    pub fn from_real(n: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != n * n {
            return input("real matrix has wrong number of entries");
        }
        Self::new(CMat::from_fn(n, n, |i, j| C64::new(rows[i * n + j], 0.0)))
    }

    /// Rank-one matrix b b^*.
    pub fn outer(b: &[C64]) -> Self {
        let n = b.len();
        HermitianMatrix(CMat::from_fn(n, n, |i, j| b[i] * b[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(&self.0 * C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        HermitianMatrix(&self.0 - &other.0)
    }

    /// A + t B.
    pub fn axpy(&self, t: f64, b: &Self) -> Self {
        HermitianMatrix(&self.0 + &b.0 * C64::new(t, 0.0))
    }

    /// Frobenius norm, the matrix norm used throughout.
    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.0).0
    }

    /// Ascending eigenvalues and the matching orthonormal eigenvectors (columns).
    pub fn eigh(&self) -> (Vec<f64>, CMat) {
        eigh(&self.0)
    }

    pub fn min_eig(&self) -> f64 {
        min_eig(&self.0)
    }

    pub fn is_positive_definite(&self) -> bool {
        let n = self.dim() as f64;
        self.min_eig() > n * f64::EPSILON * self.frobenius()
    }

    pub fn is_psd(&self) -> bool {
        self.min_eig() >= -PSD_TOL * self.frobenius()
    }

    pub fn det(&self) -> f64 {
        self.0.clone().determinant().re
    }

    /// Inverse of a nonsingular Hermitian matrix.
    pub fn inverse(&self) -> Result<Self> {
        let ev = self.eigenvalues();
        let amax = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let amin = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if amin <= f64::EPSILON * amax * self.dim() as f64 || amax == 0.0 {
            return Err(Error::Singular { what: "inverse".into(), condition: amax / amin });
        }
        let inv = lu_inverse(&self.0).ok_or(Error::Singular {
            what: "inverse".into(),
            condition: amax / amin,
        })?;
        Ok(Self::symmetrized(inv))
    }

    /// Principal restriction to the given index set.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        HermitianMatrix(self.0.select_rows(idx).select_columns(idx))
    }

    /// Congruence W^* A W.
    pub fn congruence(&self, w: &CMat) -> Self {
        Self::symmetrized(w.adjoint() * &self.0 * w)
    }
}

/// Inverse through an LU factorization (the closed-form small-size inverses in
/// nalgebra lose accuracy on ill-conditioned input).
pub fn lu_inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

pub(crate) fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let e = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| e.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub(crate) fn min_eig(m: &CMat) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)].re,
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(0, 1)].norm();
            0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
        }
        _ => SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}

/// Selects a subspace either by coordinate indices or by an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub enum SubspaceSelector {
    Indices(Vec<usize>),
    Basis(CMat),
}

impl SubspaceSelector {
    pub fn indices(idx: Vec<usize>) -> Result<Self> {
        if idx.windows(2).any(|w| w[0] >= w[1]) {
            return input("subspace indices must be strictly increasing");
        }
        Ok(SubspaceSelector::Indices(idx))
    }

    pub fn basis(u: CMat) -> Result<Self> {
        let g = u.adjoint() * &u;
        let err = (g - CMat::identity(u.ncols(), u.ncols())).norm();
        if err > 1e-12 * (u.ncols().max(1) as f64) * 10.0 {
            return input(format!("basis columns not orthonormal (defect {err:.3e})"));
        }
        Ok(SubspaceSelector::Basis(u))
    }

    pub fn len(&self) -> usize {
        match self {
            SubspaceSelector::Indices(v) => v.len(),
            SubspaceSelector::Basis(u) => u.ncols(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Basis matrix (n x len) of the selected subspace.
    pub fn basis_matrix(&self, n: usize) -> Result<CMat> {
        match self {
            SubspaceSelector::Indices(v) => {
                if let Some(&bad) = v.iter().find(|&&i| i >= n) {
                    return input(format!("index {bad} out of range for dimension {n}"));
                }
                Ok(CMat::from_fn(n, v.len(), |r, c| if v[c] == r { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }))
            }
            SubspaceSelector::Basis(u) => {
                if u.nrows() != n {
                    return input(format!("basis has {} rows, expected {n}", u.nrows()));
                }
                Ok(u.clone())
            }
        }
    }
}

/// Determinant of the submatrix with rows I and columns J; 1 for empty selectors.
pub fn minor(a: &HermitianMatrix, rows: &SubspaceSelector, cols: &SubspaceSelector) -> Result<C64> {
    if rows.len() != cols.len() {
        return input(format!("minor needs |I| = |J|, got {} and {}", rows.len(), cols.len()));
    }
    let n = a.dim();
    if rows.len() > n {
        return input("minor larger than matrix");
    }
    if rows.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    let r = rows.basis_matrix(n)?;
    let c = cols.basis_matrix(n)?;
    Ok((r.adjoint() * a.matrix() * c).determinant())
}

/// Determinant of the k x k submatrix of `m` at (rows, cols) given as bitmasks.
pub(crate) fn minor_masks(m: &CMat, rows: u32, cols: u32) -> C64 {
    let ri = crate::subsets::members(rows);
    let ci = crate::subsets::members(cols);
    det_of(&ri, &ci, |i, j| m[(i, j)])
}

/// Determinant of the square array x[r[p], c[q]] for small sizes.
pub(crate) fn det_of(r: &[usize], c: &[usize], x: impl Fn(usize, usize) -> C64) -> C64 {
    match r.len() {
        0 => C64::new(1.0, 0.0),
        1 => x(r[0], c[0]),
        2 => x(r[0], c[0]) * x(r[1], c[1]) - x(r[0], c[1]) * x(r[1], c[0]),
        3 => {
            let a = |p: usize, q: usize| x(r[p], c[q]);
            a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
        }
        k => CMat::from_fn(k, k, |p, q| x(r[p], c[q])).determinant(),
    }
}

/// Blocks of the Schur decomposition of A along a coordinate split, with the
/// split indices forming the V block and the remaining ones the H block.
#[derive(Clone, Debug)]
pub struct SchurSplit {
    pub h_indices: Vec<usize>,
    pub v_indices: Vec<usize>,
    /// H - D V^{-1} D^*.
    pub h_hat: HermitianMatrix,
    /// V - D^* H^{-1} D.
    pub v_hat: HermitianMatrix,
    /// Blocks of A^{-1} assembled from the Schur complements.
    pub inv_hh: CMat,
    pub inv_hv: CMat,
    pub inv_vv: CMat,
}

impl SchurSplit {
    /// Reassemble A^{-1} in the original index order.
    pub fn assembled_inverse(&self) -> CMat {
        let n = self.h_indices.len() + self.v_indices.len();
        let mut out = CMat::zeros(n, n);
        for (p, &i) in self.h_indices.iter().enumerate() {
            for (q, &j) in self.h_indices.iter().enumerate() {
                out[(i, j)] = self.inv_hh[(p, q)];
            }
            for (q, &j) in self.v_indices.iter().enumerate() {
                out[(i, j)] = self.inv_hv[(p, q)];
                out[(j, i)] = self.inv_hv[(p, q)].conj();
            }
        }
        for (p, &i) in self.v_indices.iter().enumerate() {
            for (q, &j) in self.v_indices.iter().enumerate() {
                out[(i, j)] = self.inv_vv[(p, q)];
            }
        }
        out
    }
}

fn condition(m: &CMat) -> f64 {
    let (ev, _) = eigh(m);
    let amax = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let amin = ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    amax / amin
}

fn checked_inverse(m: &CMat, what: &str) -> Result<CMat> {
    let cond = condition(m);
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Singular { what: what.into(), condition: cond });
    }
    lu_inverse(m).ok_or(Error::Singular { what: what.into(), condition: cond })
}

/// Block inverse of A along the split (V block = `split`).
pub fn schur_split(a: &HermitianMatrix, split: &SubspaceSelector) -> Result<SchurSplit> {
    let n = a.dim();
    let v_idx = match split {
        SubspaceSelector::Indices(v) => v.clone(),
        SubspaceSelector::Basis(_) => {
            return Err(Error::Unsupported("schur_split takes a coordinate split".into()))
        }
    };
    if v_idx.is_empty() || v_idx.len() >= n || v_idx.iter().any(|&i| i >= n) {
        return input("schur split must select a proper nonempty index subset");
    }
    let h_idx: Vec<usize> = (0..n).filter(|i| !v_idx.contains(i)).collect();
    let m = a.matrix();
    let h = m.select_rows(&h_idx).select_columns(&h_idx);
    let v = m.select_rows(&v_idx).select_columns(&v_idx);
    let d = m.select_rows(&h_idx).select_columns(&v_idx);
    checked_inverse(m, "A")?;
    let v_inv = checked_inverse(&v, "V block")?;
    let h_inv = checked_inverse(&h, "H block")?;
    let h_hat = HermitianMatrix::symmetrized(&h - &d * &v_inv * d.adjoint());
    let v_hat = HermitianMatrix::symmetrized(&v - d.adjoint() * &h_inv * &d);
    let h_hat_inv = checked_inverse(h_hat.matrix(), "H - D V^-1 D^*")?;
    let inv_hv = -(&h_hat_inv * &d * &v_inv);
    let inv_vv = &v_inv + &v_inv * d.adjoint() * &h_hat_inv * &d * &v_inv;
    Ok(SchurSplit { h_indices: h_idx, v_indices: v_idx, h_hat, v_hat, inv_hh: h_hat_inv, inv_hv, inv_vv })
}

/// Orthonormal basis of the numerical kernel of a PSD matrix V.
pub fn kernel_basis(v: &HermitianMatrix) -> CMat {
    let (ev, vecs) = v.eigh();
    let scale = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let cols: Vec<usize> = (0..ev.len()).filter(|&i| ev[i] <= KERNEL_TOL * scale).collect();
    vecs.select_columns(&cols)
}

/// lim_{t -> inf} (A + tV)^{-1}: the inverse of A compressed to ker V, and the
/// zero matrix when V has trivial kernel.
pub fn mp_ray_limit(a: &HermitianMatrix, v: &HermitianMatrix) -> Result<HermitianMatrix> {
    if a.dim() != v.dim() {
        return input("dimension mismatch in ray limit");
    }
    if v.frobenius() == 0.0 {
        return input("ray direction V must be nonzero");
    }
    if !v.is_psd() {
        return input(format!("ray direction V is not PSD (min eigenvalue {:.3e})", v.min_eig()));
    }
    let u = kernel_basis(v);
    Ok(compressed_inverse(a, &u))
}

/// U (U^* A U)^{-1} U^* for an orthonormal column set U.
pub fn compressed_inverse(a: &HermitianMatrix, u: &CMat) -> HermitianMatrix {
    let n = a.dim();
    if u.ncols() == 0 {
        return HermitianMatrix::zeros(n);
    }
    let inner = u.adjoint() * a.matrix() * u;
    let inner_inv = lu_inverse(&inner).expect("compression of a positive matrix is invertible");
    HermitianMatrix::symmetrized(u * inner_inv * u.adjoint())
}

/// Elementary symmetric functions e_0..e_n of the given values.
pub fn elementary_symmetric(vals: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; vals.len() + 1];
    e[0] = 1.0;
    for (m, &x) in vals.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

/// sigma_k of the eigenvalues of A.
pub fn sigma(a: &HermitianMatrix, k: usize) -> Result<f64> {
    if k > a.dim() {
        return input(format!("sigma_k needs k <= n, got k = {k}, n = {}", a.dim()));
    }
    Ok(elementary_symmetric(&a.eigenvalues())[k])
}

/// The linearization T_{k-1}(A) of sigma_k at A, normalized so that
/// tr(T B) is the derivative of sigma_k in direction B.
pub fn sigma_linearized(a: &HermitianMatrix, k: usize) -> Result<HermitianMatrix> {
    let n = a.dim();
    if k == 0 || k > n {
        return input(format!("sigma_linearized needs 1 <= k <= n, got k = {k}"));
    }
    let (ev, q) = a.eigh();
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let rest: Vec<f64> = ev.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
            elementary_symmetric(&rest)[k - 1]
        })
        .collect();
    let d = CMat::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) });
    Ok(HermitianMatrix::symmetrized(&q * d * q.adjoint()))
}

/// tr(T B) = sum T_{ij} B_{ji}.
pub fn trace_pairing(t: &CMat, b: &CMat) -> C64 {
    let n = t.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += t[(i, j)] * b[(j, i)];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use crate::subsets::{complement, members, merge_sign, subsets};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn laplace_det(m: &CMat) -> C64 {
        let n = m.nrows();
        if n == 0 {
            return C64::new(1.0, 0.0);
        }
        let mut s = C64::new(0.0, 0.0);
        for j in 0..n {
            let rows: Vec<usize> = (1..n).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
            let sub = m.select_rows(&rows).select_columns(&cols);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s += m[(0, j)] * sign * laplace_det(&sub);
        }
        s
    }

    fn idx(v: &[usize]) -> SubspaceSelector {
        SubspaceSelector::indices(v.to_vec()).unwrap()
    }

    #[test]
    fn minor_examples() {
        let a = HermitianMatrix::from_real_diag(&[4.0, 7.0]);
        assert_eq!(minor(&a, &idx(&[0]), &idx(&[0])).unwrap().re, 4.0);
        let b = HermitianMatrix::from_real_diag(&[1.0, 2.0, 3.0]);
        assert!((minor(&b, &idx(&[0, 2]), &idx(&[0, 2])).unwrap().re - 3.0).abs() < 1e-15);
        assert_eq!(minor(&b, &idx(&[]), &idx(&[])).unwrap(), C64::new(1.0, 0.0));
        assert!(minor(&b, &idx(&[0, 5]), &idx(&[0, 1])).is_err());
    }

    #[test]
    fn minor_matches_laplace_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = sample::hermitian(4, &mut rng);
            for k in 0..=4 {
                for &i in &subsets(4, k) {
                    for &j in &subsets(4, k) {
                        let mi = members(i);
                        let mj = members(j);
                        let got = minor(&a, &idx(&mi), &idx(&mj)).unwrap();
                        let want = laplace_det(&a.matrix().select_rows(&mi).select_columns(&mj));
                        assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn complement_identity_for_inverse_minors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=5 {
            let a = sample::positive_definite(n, &mut rng);
            let m = a.inverse().unwrap();
            let det = a.det();
            for k in 0..=n {
                for &i in &subsets(n, k) {
                    for &j in &subsets(n, k) {
                        let ic = complement(n, i);
                        let jc = complement(n, j);
                        let eps = merge_sign(i, ic) * merge_sign(j, jc);
                        let lhs = minor_masks(a.matrix(), ic, jc) / det * eps;
                        let rhs = minor_masks(m.matrix(), j, i);
                        assert!((lhs - rhs).norm() < 1e-10, "n={n} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn schur_examples() {
        let a = HermitianMatrix::from_real(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let s = schur_split(&a, &idx(&[1])).unwrap();
        assert!((s.h_hat.get(0, 0).re - 1.5).abs() < 1e-15);
        assert!((s.inv_hh[(0, 0)].re - 2.0 / 3.0).abs() < 1e-15);
        let s = schur_split(&HermitianMatrix::identity(3), &idx(&[0, 2])).unwrap();
        assert!((s.h_hat.matrix() - CMat::identity(1, 1)).norm() < 1e-15);
        assert!((s.v_hat.matrix() - CMat::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn schur_block_inverse_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = sample::positive_definite(5, &mut rng);
            let s = schur_split(&a, &idx(&[1, 3, 4])).unwrap();
            let direct = a.inverse().unwrap();
            assert!((s.assembled_inverse() - direct.matrix()).camax() <= 1e-10);
            let vhat_inv = s.v_hat.inverse().unwrap();
            assert!((vhat_inv.matrix() - &s.inv_vv).camax() <= 1e-10);
            // inverse minus diag(0, V^{-1}) is PSD when the H-complement is positive
            let v = a.restrict(&s.v_indices).inverse().unwrap();
            let mut diff = direct.matrix().clone();
            for (p, &i) in s.v_indices.iter().enumerate() {
                for (q, &j) in s.v_indices.iter().enumerate() {
                    diff[(i, j)] -= v.get(p, q);
                }
            }
            assert!(min_eig(&diff) >= -1e-12);
        }
    }

    #[test]
    fn schur_singular_block_reports_condition() {
        let a = HermitianMatrix::from_real(2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        match schur_split(&a, &idx(&[1])) {
            Err(Error::Singular { condition, .. }) => assert!(condition.is_infinite() || condition > 1e14),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn ray_limit_examples() {
        let e1 = HermitianMatrix::outer(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let l = mp_ray_limit(&HermitianMatrix::identity(3), &e1).unwrap();
        assert!((l.matrix() - HermitianMatrix::from_real_diag(&[0.0, 1.0, 1.0]).matrix()).norm() < 1e-14);
        let a = HermitianMatrix::from_real(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let e1 = HermitianMatrix::outer(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let l = mp_ray_limit(&a, &e1).unwrap();
        assert!((l.matrix() - HermitianMatrix::from_real_diag(&[0.0, 0.5]).matrix()).norm() < 1e-14);
        let full = HermitianMatrix::identity(2);
        assert_eq!(mp_ray_limit(&a, &full).unwrap().frobenius(), 0.0);
        assert!(mp_ray_limit(&a, &HermitianMatrix::from_real_diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn ray_limit_matches_large_t_and_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for r in 1..4 {
            let a = sample::positive_definite(4, &mut rng);
            let v = sample::psd_well_conditioned(4, r, &mut rng);
            let lim = mp_ray_limit(&a, &v).unwrap();
            let big = a.axpy(1e6, &v).inverse().unwrap();
            assert!((big.matrix() - lim.matrix()).norm() <= 1e-4);
            let lim3 = mp_ray_limit(&a, &v.scale(3.7)).unwrap();
            assert!((lim3.matrix() - lim.matrix()).norm() <= 1e-12);
        }
    }

    #[test]
    fn sigma_examples_and_minor_oracle() {
        let a = HermitianMatrix::from_real_diag(&[1.0, 2.0, 3.0]);
        assert!((sigma(&a, 2).unwrap() - 11.0).abs() < 1e-13);
        assert_eq!(sigma(&a, 0).unwrap(), 1.0);
        assert!(sigma(&a, 4).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = sample::hermitian(5, &mut rng);
        for k in 0..=5 {
            let oracle: f64 = subsets(5, k).iter().map(|&s| minor_masks(a.matrix(), s, s).re).sum();
            let got = sigma(&a, k).unwrap();
            assert!((got - oracle).abs() <= 1e-11 * oracle.abs().max(1.0));
        }
    }

    #[test]
    fn sigma_linearized_examples() {
        let a = HermitianMatrix::from_real_diag(&[1.0, 2.0]);
        let t1 = sigma_linearized(&a, 1).unwrap();
        assert!((t1.matrix() - CMat::identity(2, 2)).norm() < 1e-14);
        let t2 = sigma_linearized(&a, 2).unwrap();
        assert!((t2.matrix() - HermitianMatrix::from_real_diag(&[2.0, 1.0]).matrix()).norm() < 1e-14);
    }

    #[test]
    fn sigma_linearized_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 1..=4 {
            let a = sample::hermitian(4, &mut rng);
            let b = sample::hermitian(4, &mut rng);
            let t = sigma_linearized(&a, k).unwrap();
            let h = 1e-5;
            let fd = (sigma(&a.axpy(h, &b), k).unwrap() - sigma(&a.axpy(-h, &b), k).unwrap()) / (2.0 * h);
            let got = trace_pairing(t.matrix(), b.matrix()).re;
            assert!((got - fd).abs() <= 1e-7 * fd.abs().max(1.0), "k={k}: {got} vs {fd}");
        }
    }
}
