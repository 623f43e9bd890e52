//! Constant-coefficient real (k,k)-forms and (k,k)-vectors.
//!
//! A component of degree k on C^n stores coefficients c_{I,J} over pairs of
//! ordered k-subsets, normalized so that the form (i/2) sum A_{ij} dz^i ^ dzbar^j
//! has coefficients A_{ij} and rho^k/k! has coefficients equal to the k x k
//! minors of rho. Top-degree coefficients are measured against the Euclidean
//! volume I^n/n!. Wedge products follow
//!
//!   (a ^ b)_{P,Q} = sum_{I u K = P, J u L = Q} sgn(I,K) sgn(J,L) a_{I,J} b_{K,L}.
//!
//! The same storage represents (k,k)-vectors; the pairing of a form c with a
//! vector v is sum c_{I,J} v_{J,I}, and the vector dual to a Hermitian matrix
//! M raised to the power k (divided by k!) has coefficients det M[J,I].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::hermitian::{eigh, minor_masks, CMat, HermitianMatrix, SubspaceSelector, C64};
use crate::sample;
use crate::subsets::{binom, complement, merge_sign, rank, subsets};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct FormComponent {
    n: usize,
    k: usize,
    coeffs: Vec<C64>,
}

impl FormComponent {
    pub fn zero(n: usize, k: usize) -> Self {
        assert!(k <= n && n <= 16, "degree {k} exceeds dimension {n}");
        let m = binom(n, k);
        FormComponent { n, k, coeffs: vec![ZERO; m * m] }
    }

    /// Degree-zero component with the given value.
    pub fn scalar(n: usize, s: f64) -> Self {
        let mut c = Self::zero(n, 0);
        c.coeffs[0] = C64::new(s, 0.0);
        c
    }

    /// The (1,1)-form whose coefficient matrix is `a`.
    pub fn from_matrix(a: &HermitianMatrix) -> Self {
        let n = a.dim();
        let mut c = Self::zero(n, 1);
        for i in 0..n {
            for j in 0..n {
                c.coeffs[i * n + j] = a.get(i, j);
            }
        }
        c
    }

    /// Top-degree component with coefficient `s` against I^n/n!.
    pub fn top(n: usize, s: f64) -> Self {
        let mut c = Self::zero(n, n);
        c.coeffs[0] = C64::new(s, 0.0);
        c
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    /// Number of k-subsets, the side length of the coefficient table.
    pub fn side(&self) -> usize {
        binom(self.n, self.k)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn at(&self, a: usize, b: usize) -> C64 {
        self.coeffs[a * self.side() + b]
    }

    pub fn set_at(&mut self, a: usize, b: usize, z: C64) {
        let m = self.side();
        self.coeffs[a * m + b] = z;
    }

    /// Coefficient at subsets given as bitmasks.
    pub fn get(&self, i: u32, j: u32) -> C64 {
        self.at(rank(self.n, i), rank(self.n, j))
    }

    pub fn set(&mut self, i: u32, j: u32, z: C64) {
        let (a, b) = (rank(self.n, i), rank(self.n, j));
        self.set_at(a, b, z);
    }

    /// Top-degree coefficient (only meaningful when k = n).
    pub fn top_coefficient(&self) -> f64 {
        debug_assert_eq!(self.k, self.n);
        self.coeffs[0].re
    }

    /// Nonzero entries as (I, J, value) with subsets as bitmasks.
    pub fn entries(&self) -> Vec<(u32, u32, C64)> {
        let s = subsets(self.n, self.k);
        let m = s.len();
        let mut out = Vec::new();
        for a in 0..m {
            for b in 0..m {
                let z = self.coeffs[a * m + b];
                if z != ZERO {
                    out.push((s[a], s[b], z));
                }
            }
        }
        out
    }

    fn check_same_shape(&self, other: &Self) {
        assert!(self.n == other.n && self.k == other.k, "shape mismatch: ({},{}) vs ({},{})", self.n, self.k, other.n, other.k);
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same_shape(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        FormComponent { n: self.n, k: self.k, coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|a| a * s).collect();
        FormComponent { n: self.n, k: self.k, coeffs }
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Deviation from the reality condition c_{I,J} = conj(c_{J,I}).
    pub fn reality_defect(&self) -> f64 {
        let m = self.side();
        let mut d: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                d = d.max((self.coeffs[a * m + b] - self.coeffs[b * m + a].conj()).norm());
            }
        }
        d
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return input("wedge of forms on different dimensions");
        }
        let n = self.n;
        let k = self.k + other.k;
        if k > n {
            return input(format!("wedge degree {k} exceeds dimension {n}"));
        }
        let mut out = Self::zero(n, k);
        let lhs = self.entries();
        let rhs = other.entries();
        for &(i, j, a) in &lhs {
            for &(kk, l, b) in &rhs {
                if i & kk != 0 || j & l != 0 {
                    continue;
                }
                let s = merge_sign(i, kk) * merge_sign(j, l);
                let (p, q) = (rank(n, i | kk), rank(n, j | l));
                let m = out.side();
                out.coeffs[p * m + q] += a * b * s;
            }
        }
        Ok(out)
    }
}

/// Coefficients of scale * rho^k / k!: the k x k minors of rho.
pub fn power_form(rho: &HermitianMatrix, k: usize, scale: f64) -> FormComponent {
    let n = rho.dim();
    let s = subsets(n, k);
    let m = s.len();
    let mut c = FormComponent::zero(n, k);
    for a in 0..m {
        for b in 0..m {
            c.coeffs[a * m + b] = minor_masks(rho.matrix(), s[a], s[b]) * scale;
        }
    }
    c
}

/// The components omega^k/k! for k = 0..=top.
pub fn exp_form(omega: &HermitianMatrix, top: usize) -> Vec<FormComponent> {
    (0..=top.min(omega.dim())).map(|k| power_form(omega, k, 1.0)).collect()
}

/// <c, chi^k/k!> where chi is the (1,1)-vector dual to `ainv`:
/// sum_{I,J} c_{I,J} det(ainv[J, I]).
pub fn pair_with_chi_power(c: &FormComponent, ainv: &HermitianMatrix) -> Result<f64> {
    if c.dim() != ainv.dim() {
        return input("pairing dimension mismatch");
    }
    let mut s = ZERO;
    for (i, j, z) in c.entries() {
        s += z * minor_masks(ainv.matrix(), j, i);
    }
    Ok(s.re)
}

/// Pairing of a form with a (k,k)-vector stored in the same layout.
pub fn pair_vector(c: &FormComponent, v: &FormComponent) -> Result<f64> {
    if c.dim() != v.dim() || c.degree() != v.degree() {
        return input("pairing shape mismatch");
    }
    let m = c.side();
    let mut s = ZERO;
    for a in 0..m {
        for b in 0..m {
            s += c.coeffs[a * m + b] * v.coeffs[b * m + a];
        }
    }
    Ok(s.re)
}

/// Decomposable strongly positive (k,k)-vector built from vectors xi_1..xi_k:
/// the wedge of the rank-one (1,1)-vectors xi xi^*.
pub fn decomposable_vector(n: usize, xis: &[Vec<C64>]) -> FormComponent {
    let mut v = FormComponent::scalar(n, 1.0);
    for xi in xis {
        v = v.wedge(&FormComponent::from_matrix(&HermitianMatrix::outer(xi))).expect("degree within range");
    }
    v
}

/// Matrix Q of a degree n-1 form alpha with alpha ^ (i/2) b ^ bbar = (b^* Q b) I^n/n!
/// for the (1,1)-form with coefficient matrix b b^*.
pub fn dual_cone_matrix(alpha: &FormComponent) -> Result<HermitianMatrix> {
    let n = alpha.dim();
    if n == 0 || alpha.degree() != n - 1 {
        return input(format!("dual cone matrix needs degree n-1 = {}, got {}", n.saturating_sub(1), alpha.degree()));
    }
    let full = (1u32 << n) - 1;
    let q = CMat::from_fn(n, n, |l, k| {
        let kc = full & !(1 << k);
        let lc = full & !(1 << l);
        alpha.get(kc, lc) * merge_sign(kc, 1 << k) * merge_sign(lc, 1 << l)
    });
    Ok(HermitianMatrix::symmetrized(q))
}

/// Evidence of how a positivity probe failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeWitness {
    /// Vectors xi_1..xi_k whose decomposable product pairs negatively.
    Decomposable(Vec<Vec<(f64, f64)>>),
    /// Covector b with alpha ^ (i/2) b ^ bbar < 0 (degree n-1).
    Covector(Vec<(f64, f64)>),
    /// Negative scalar (degree 0 or n).
    Scalar(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResult {
    pub pass: bool,
    /// True when the verdict comes from an exact eigenvalue test.
    pub exact: bool,
    /// Smallest pairing (or eigenvalue) observed.
    pub min_value: f64,
    pub witness: Option<ProbeWitness>,
    pub seed: u64,
}

fn pairs(v: &[C64]) -> Vec<(f64, f64)> {
    v.iter().map(|z| (z.re, z.im)).collect()
}

/// Tests c >= 0 against strongly positive vectors. Degrees 0, 1, n-1 and n are
/// decided exactly; other degrees are sampled with decomposable vectors.
pub fn positivity_probe(c: &FormComponent, samples: usize, seed: u64) -> ProbeResult {
    let n = c.dim();
    let k = c.degree();
    let tol = -1e-12 * c.max_abs().max(1.0);
    if k == 0 || k == n {
        let v = c.coeffs[0].re;
        return ProbeResult {
            pass: v >= tol,
            exact: true,
            min_value: v,
            witness: (v < tol).then_some(ProbeWitness::Scalar(v)),
            seed,
        };
    }
    if k == 1 || k == n - 1 {
        let m = if k == 1 {
            let s = subsets(n, 1);
            HermitianMatrix::symmetrized(CMat::from_fn(n, n, |i, j| c.get(s[i], s[j])))
        } else {
            dual_cone_matrix(c).expect("degree n-1")
        };
        let (ev, vecs) = eigh(m.matrix());
        let v = ev[0];
        let col: Vec<C64> = vecs.column(0).iter().cloned().collect();
        let witness = (v < tol).then(|| {
            if k == 1 {
                ProbeWitness::Decomposable(vec![pairs(&col)])
            } else {
                ProbeWitness::Covector(pairs(&col))
            }
        });
        return ProbeResult { pass: v >= tol, exact: true, min_value: v, witness, seed };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let mut worst = Vec::new();
    for _ in 0..samples.max(1) {
        let xis: Vec<Vec<C64>> = (0..k).map(|_| sample::unit_vector(n, &mut rng)).collect();
        let v = pair_vector(c, &decomposable_vector(n, &xis)).expect("shapes agree");
        if v < min_value {
            min_value = v;
            worst = xis;
        }
    }
    let pass = min_value >= tol;
    let witness = (!pass).then(|| ProbeWitness::Decomposable(worst.iter().map(|x| pairs(x)).collect()));
    ProbeResult { pass, exact: false, min_value, witness, seed }
}

/// The datum Lambda = sum_k Lambda^[k] + f rho^n/n! with constant components.
#[derive(Clone, Debug, PartialEq)]
pub struct FormBundle {
    n: usize,
    components: Vec<FormComponent>,
    /// Density of the top-degree part relative to rho^n/n!.
    pub f: f64,
    pub rho: HermitianMatrix,
}

impl FormBundle {
    pub fn new(rho: HermitianMatrix, components: Vec<FormComponent>, f: f64) -> Result<Self> {
        let n = rho.dim();
        let mut seen = vec![false; n + 1];
        for c in &components {
            if c.dim() != n {
                return input(format!("component of dimension {} in a bundle of dimension {n}", c.dim()));
            }
            let k = c.degree();
            if k == 0 || k >= n {
                return input(format!("bundle components must have degree 1..n-1, got {k}"));
            }
            if seen[k] {
                return input(format!("duplicate component of degree {k}"));
            }
            seen[k] = true;
            let defect = c.reality_defect();
            if defect > 1e-12 * c.max_abs().max(1.0) {
                return input(format!("degree-{k} component violates the reality condition by {defect:.3e}"));
            }
        }
        if !rho.is_positive_definite() {
            return Err(Error::NotPositive { what: "reference metric rho".into(), min_eig: rho.min_eig() });
        }
        let mut components = components;
        components.sort_by_key(|c| c.degree());
        Ok(FormBundle { n, components, f, rho })
    }

    /// Bundle with no lower-degree part.
    pub fn volume_only(rho: HermitianMatrix, f: f64) -> Self {
        Self::new(rho, Vec::new(), f).expect("valid volume-only bundle")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[FormComponent] {
        &self.components
    }

    pub fn component(&self, k: usize) -> Option<&FormComponent> {
        self.components.iter().find(|c| c.degree() == k)
    }

    /// Component of degree k, zero if absent.
    pub fn component_or_zero(&self, k: usize) -> FormComponent {
        self.component(k).cloned().unwrap_or_else(|| FormComponent::zero(self.n, k))
    }

    /// Coefficient of the top-degree part against I^n/n!.
    pub fn top_coefficient(&self) -> f64 {
        self.f * self.rho.det()
    }

    pub fn with_f(&self, f: f64) -> Self {
        FormBundle { f, ..self.clone() }
    }

    /// Scales the lower-degree components by s, leaving f alone.
    pub fn scale_lower(&self, s: f64) -> Self {
        let components = self.components.iter().map(|c| c.scale(s)).collect();
        FormBundle { components, ..self.clone() }
    }

    /// Sum of two bundles on the same rho.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return input("bundle dimension mismatch");
        }
        let comps = (1..self.n)
            .filter(|&k| self.component(k).is_some() || other.component(k).is_some())
            .map(|k| self.component_or_zero(k).add(&other.component_or_zero(k)))
            .collect();
        FormBundle::new(self.rho.clone(), comps, self.f + other.f)
    }
}

/// One block of a labeled orthogonal splitting.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitBlock {
    pub subspace: SubspaceSelector,
    pub label: usize,
}

/// Orthogonal splitting of C^n (with respect to rho) with a degree label per block.
#[derive(Clone, Debug, PartialEq)]
pub struct SplittingLabel {
    pub blocks: Vec<SplitBlock>,
}

impl SplittingLabel {
    /// Coordinate splitting from (indices, label) pairs.
    pub fn coordinate(blocks: &[(Vec<usize>, usize)]) -> Result<Self> {
        let blocks = blocks
            .iter()
            .map(|(idx, k)| Ok(SplitBlock { subspace: SubspaceSelector::indices(idx.clone())?, label: *k }))
            .collect::<Result<Vec<_>>>()?;
        Ok(SplittingLabel { blocks })
    }

    /// The single-block splitting with label k0.
    pub fn trivial(n: usize, k0: usize) -> Self {
        SplittingLabel {
            blocks: vec![SplitBlock { subspace: SubspaceSelector::Indices((0..n).collect()), label: k0 }],
        }
    }

    pub fn n_p(&self) -> usize {
        self.blocks.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.subspace.len()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.label).collect()
    }

    /// Checks block sizes, labels and rho-orthogonality.
    pub fn validate(&self, rho: &HermitianMatrix) -> Result<()> {
        let n = rho.dim();
        let total: usize = self.dims().iter().sum();
        if total != n {
            return input(format!("splitting dimensions sum to {total}, expected {n}"));
        }
        let bases = self.blocks.iter().map(|b| b.subspace.basis_matrix(n)).collect::<Result<Vec<_>>>()?;
        for (i, b) in self.blocks.iter().enumerate() {
            let d = b.subspace.len();
            if b.label == 0 || b.label > d {
                return input(format!("block {i}: label {} outside 1..={d}", b.label));
            }
            for j in 0..i {
                let cross = (bases[i].adjoint() * rho.matrix() * &bases[j]).norm();
                if cross > 1e-12 * rho.frobenius() {
                    return input(format!("blocks {j} and {i} are not rho-orthogonal (defect {cross:.3e})"));
                }
            }
        }
        Ok(())
    }

    /// The restricted-and-extended metric rho_i of block i as an n x n matrix.
    pub fn block_rho(&self, rho: &HermitianMatrix, i: usize) -> Result<HermitianMatrix> {
        let u = self.blocks[i].subspace.basis_matrix(rho.dim())?;
        let g = u.adjoint() * rho.matrix() * &u;
        let g_inv = crate::hermitian::lu_inverse(&g).ok_or_else(|| Error::Input("degenerate splitting block".into()))?;
        let ru = rho.matrix() * &u;
        Ok(HermitianMatrix::symmetrized(&ru * g_inv * ru.adjoint()))
    }

    /// Sum over blocks of rho_i^{k_i}/k_i!, grouped by degree (index = degree).
    pub fn block_power_stack(&self, rho: &HermitianMatrix) -> Result<Vec<FormComponent>> {
        let n = rho.dim();
        let mut out: Vec<FormComponent> = (0..=n).map(|k| FormComponent::zero(n, k)).collect();
        for i in 0..self.blocks.len() {
            let ri = self.block_rho(rho, i)?;
            let k = self.blocks[i].label;
            out[k] = out[k].add(&power_form(&ri, k, 1.0));
        }
        Ok(out)
    }
}

/// Sign eps(I, I^c) eps(J, J^c) pairing k-minors with complementary ones.
pub fn complement_sign(n: usize, i: u32, j: u32) -> f64 {
    merge_sign(i, complement(n, i)) * merge_sign(j, complement(n, j))
}
