//! The pointwise operator F(A) = (Lambda ^ exp w)^[n] / (exp w)^[n] and its
//! first and second variations.
//!
//! With M = A^{-1}, F(A) = sum_{k<n} sum_{I,J} c^k_{I,J} det M[J,I] + f det(rho) det M.
//! Derivatives are taken with respect to the entries A_{ij} of the holomorphic
//! extension to all complex matrices, so finite differences in any complex
//! direction can check them.

use crate::error::{input, Error, Result};
use crate::forms::{pair_with_chi_power, power_form, FormBundle, FormComponent};
use crate::hermitian::{det_of, lu_inverse, CMat, HermitianMatrix, C64};
use crate::subsets::members;

/// Bundle plus the constant kappa of the equation F(A) = kappa.
#[derive(Clone, Debug)]
pub struct OperatorContext {
    pub bundle: FormBundle,
    pub kappa: f64,
    terms: Vec<Term>,
}

/// One nonzero coefficient c_{I,J} with its index lists.
#[derive(Clone, Debug)]
struct Term {
    rows_i: Vec<usize>,
    cols_j: Vec<usize>,
    c: C64,
}

impl OperatorContext {
    pub fn new(bundle: FormBundle, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return input(format!("kappa must be finite and positive, got {kappa}"));
        }
        let terms = ring_terms(&bundle);
        Ok(OperatorContext { bundle, kappa, terms })
    }

    pub fn dim(&self) -> usize {
        self.bundle.dim()
    }

    /// Context with a replacement density f (kappa and the lower part kept).
    pub fn with_f(&self, f: f64) -> Self {
        OperatorContext { bundle: self.bundle.with_f(f), kappa: self.kappa, terms: self.terms.clone() }
    }

    /// F(A).
    pub fn f(&self, a: &HermitianMatrix) -> Result<f64> {
        let m = checked_inverse(a)?;
        Ok(self.ring_value(&m) + self.bundle.top_coefficient() * det_c(&m).re)
    }

    /// The part of F coming from the lower-degree components only.
    pub fn f_ring(&self, a: &HermitianMatrix) -> Result<f64> {
        let m = checked_inverse(a)?;
        Ok(self.ring_value(&m))
    }

    /// sum_k <Lambda^[k], chi^k/k!> for chi dual to m (any Hermitian m,
    /// including ray limits).
    pub fn ring_value(&self, m: &CMat) -> f64 {
        let mut s = C64::new(0.0, 0.0);
        for t in &self.terms {
            s += t.c * det_of(&t.cols_j, &t.rows_i, |r, c| m[(r, c)]);
        }
        s.re
    }

    /// Gradient G_{ij} = dF/dA_{ij} (Hermitian for Hermitian A).
    pub fn grad(&self, a: &HermitianMatrix) -> Result<HermitianMatrix> {
        Ok(HermitianMatrix::symmetrized(self.grad_complex(a.matrix())?))
    }

    /// Gradient of the lower-degree part only.
    pub fn grad_ring(&self, a: &HermitianMatrix) -> Result<HermitianMatrix> {
        let m = checked_inverse(a)?;
        let p = self.ring_dphi(&m);
        Ok(HermitianMatrix::symmetrized(-(m.transpose() * p * m.transpose())))
    }

    /// Gradient at an arbitrary (nonsingular) complex matrix.
    pub fn grad_complex(&self, a: &CMat) -> Result<CMat> {
        let m = lu_inverse(a).ok_or(Error::Singular { what: "gradient".into(), condition: f64::INFINITY })?;
        let mut p = self.ring_dphi(&m);
        let top = self.bundle.top_coefficient();
        if top != 0.0 {
            // d det M / dM = det(M) M^{-T} = det(M) A^T
            p += a.transpose() * (det_c(&m) * top);
        }
        Ok(-(m.transpose() * p * m.transpose()))
    }

    /// F and its (Hermitian-projected) gradient at a Hermitian point with the
    /// top coefficient f det(rho) supplied per call; None when A is singular.
    pub(crate) fn value_grad_with_top(&self, a: &CMat, top: f64) -> Option<(f64, CMat)> {
        let m = lu_inverse(a)?;
        let det_m = det_c(&m);
        let mut p = self.ring_dphi(&m);
        if top != 0.0 {
            p += a.transpose() * (det_m * top);
        }
        let value = self.ring_value(&m) + top * det_m.re;
        let g = -(m.transpose() * p * m.transpose());
        Some((value, (&g + g.adjoint()) * C64::new(0.5, 0.0)))
    }

    /// F evaluated at an arbitrary complex matrix through the same formula.
    pub fn f_complex(&self, a: &CMat) -> Result<C64> {
        let m = lu_inverse(a).ok_or(Error::Singular { what: "F".into(), condition: f64::INFINITY })?;
        let mut s = C64::new(0.0, 0.0);
        for t in &self.terms {
            s += t.c * det_of(&t.cols_j, &t.rows_i, |r, c| m[(r, c)]);
        }
        Ok(s + det_c(&m) * self.bundle.top_coefficient())
    }

    /// P_{ab} = d/dM_{ab} of sum c_{I,J} det M[J,I].
    fn ring_dphi(&self, m: &CMat) -> CMat {
        let n = m.nrows();
        let mut p = CMat::zeros(n, n);
        for t in &self.terms {
            let k = t.rows_i.len();
            for (pp, &a) in t.cols_j.iter().enumerate() {
                for (qq, &b) in t.rows_i.iter().enumerate() {
                    let rr: Vec<usize> = t.cols_j.iter().enumerate().filter(|&(x, _)| x != pp).map(|(_, &v)| v).collect();
                    let cc: Vec<usize> = t.rows_i.iter().enumerate().filter(|&(x, _)| x != qq).map(|(_, &v)| v).collect();
                    let sign = if (pp + qq) % 2 == 0 { 1.0 } else { -1.0 };
                    let cof = if k == 1 { C64::new(1.0, 0.0) } else { det_of(&rr, &cc, |r, c| m[(r, c)]) };
                    p[(a, b)] += t.c * cof * sign;
                }
            }
        }
        p
    }

    /// Second derivative D^2F[B, C] at A along complex directions B, C.
    pub fn second_derivative(&self, a: &CMat, b: &CMat, c: &CMat) -> Result<C64> {
        let n = a.nrows();
        let m = lu_inverse(a).ok_or(Error::Singular { what: "Hessian".into(), condition: f64::INFINITY })?;
        let xb = -(&m * b * &m);
        let xc = -(&m * c * &m);
        let d2m = &m * b * &m * c * &m + &m * c * &m * b * &m;
        let mut s = C64::new(0.0, 0.0);
        let full: Vec<usize> = (0..n).collect();
        let top = self.bundle.top_coefficient();
        let mut add_term = |rows: &[usize], cols: &[usize], coef: C64| {
            s += coef * second_det(&m, rows, cols, &xb, &xc);
            s += coef * first_det(&m, rows, cols, &d2m);
        };
        for t in &self.terms {
            add_term(&t.cols_j, &t.rows_i, t.c);
        }
        if top != 0.0 {
            add_term(&full, &full, C64::new(top, 0.0));
        }
        Ok(s)
    }

    /// sum F^{ij,rs} B_{ij} conj(B_{sr}) = D^2F[B, B^*].
    pub fn hess_quadratic(&self, a: &HermitianMatrix, b: &CMat) -> Result<f64> {
        checked_inverse(a)?;
        Ok(self.second_derivative(a.matrix(), b, &b.adjoint())?.re)
    }

    /// sum (F^{ij,rs} + F^{is} A^{jr}) B_{ij} conj(B_{sr}), the form shown to be
    /// nonnegative for positive Lambda.
    pub fn combined_form(&self, a: &HermitianMatrix, b: &CMat) -> Result<f64> {
        let m = checked_inverse(a)?;
        let g = self.grad_complex(a.matrix())?;
        let bmb = b * &m * b.adjoint();
        let mut s = C64::new(0.0, 0.0);
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                s += g[(i, j)] * bmb[(i, j)];
            }
        }
        Ok(self.hess_quadratic(a, b)? + s.re)
    }
}

fn ring_terms(bundle: &FormBundle) -> Vec<Term> {
    let mut out = Vec::new();
    for comp in bundle.components() {
        for (i, j, c) in comp.entries() {
            out.push(Term { rows_i: members(i), cols_j: members(j), c });
        }
    }
    out
}

fn det_c(m: &CMat) -> C64 {
    m.clone().determinant()
}

/// Inverse of A after checking positive definiteness.
pub(crate) fn checked_inverse(a: &HermitianMatrix) -> Result<CMat> {
    if !a.is_positive_definite() {
        return Err(Error::NotPositive { what: "operator argument".into(), min_eig: a.min_eig() });
    }
    lu_inverse(a.matrix()).ok_or(Error::Singular { what: "operator argument".into(), condition: f64::INFINITY })
}

/// sum_p det(Z with column p replaced by X's column p), Z = M[rows, cols].
fn first_det(m: &CMat, rows: &[usize], cols: &[usize], x: &CMat) -> C64 {
    let k = rows.len();
    let mut s = C64::new(0.0, 0.0);
    for p in 0..k {
        s += det_of(rows, cols, |r, c| if c == cols[p] { x[(r, c)] } else { m[(r, c)] });
    }
    s
}

/// sum_{p != q} det(Z with column p from X and column q from Y).
fn second_det(m: &CMat, rows: &[usize], cols: &[usize], x: &CMat, y: &CMat) -> C64 {
    let k = rows.len();
    let mut s = C64::new(0.0, 0.0);
    for p in 0..k {
        for q in 0..k {
            if p == q {
                continue;
            }
            s += det_of(rows, cols, |r, c| {
                if c == cols[p] {
                    x[(r, c)]
                } else if c == cols[q] {
                    y[(r, c)]
                } else {
                    m[(r, c)]
                }
            });
        }
    }
    s
}

/// F_k(A) = <c, chi^k/k!> for a single component.
pub fn f_k(a: &HermitianMatrix, c: &FormComponent) -> Result<f64> {
    let m = checked_inverse(a)?;
    pair_with_chi_power(c, &HermitianMatrix::symmetrized(m))
}

/// The convexity form <c, Theta_k(B, B)> built from zeta = M B^* M and
/// xi = zeta A zeta^*:
///   Theta_k = chi^{k-2}/(k-2)! ^ zeta^* ^ zeta + chi^{k-1}/(k-1)! ^ xi.
pub fn theta_form(a: &HermitianMatrix, c: &FormComponent, b: &CMat) -> Result<f64> {
    let n = a.dim();
    let k = c.degree();
    let m = HermitianMatrix::symmetrized(checked_inverse(a)?);
    if k == 0 {
        return Ok(0.0);
    }
    let zeta = m.matrix() * b.adjoint() * m.matrix();
    let xi = &zeta * a.matrix() * zeta.adjoint();
    let as_vector = |x: &CMat| {
        let mut v = FormComponent::zero(n, 1);
        for i in 0..n {
            for j in 0..n {
                v.set_at(i, j, x[(i, j)]);
            }
        }
        v
    };
    let mut theta = power_form(&m, k - 1, 1.0).wedge(&as_vector(&xi))?;
    if k >= 2 {
        let zz = as_vector(&zeta.adjoint()).wedge(&as_vector(&zeta))?;
        theta = theta.add(&power_form(&m, k - 2, 1.0).wedge(&zz)?);
    }
    crate::forms::pair_vector(c, &theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::power_form;
    use crate::sample;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn j_eq(n: usize, kappa: f64) -> OperatorContext {
        let rho = HermitianMatrix::identity(n);
        let b = FormBundle::new(rho.clone(), vec![power_form(&rho, n - 1, 1.0)], 0.0).unwrap();
        OperatorContext::new(b, kappa).unwrap()
    }

    fn random_ctx(n: usize, r: &mut ChaCha8Rng, positive: bool) -> OperatorContext {
        let rho = HermitianMatrix::identity(n);
        let comps = (1..n)
            .map(|k| if positive { sample::strongly_positive_form(n, k, r) } else { sample::real_form(n, k, r) })
            .collect();
        let f = if positive { r.gen_range(0.0..1.0) } else { r.gen_range(-1.0..1.0) };
        OperatorContext::new(FormBundle::new(rho, comps, f).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn f_examples() {
        let ctx = j_eq(2, 1.0);
        let v = ctx.f(&HermitianMatrix::from_real_diag(&[2.0, 2.0])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = ctx.f(&HermitianMatrix::from_real_diag(&[3.0, 5.0])).unwrap();
        assert!((v - (1.0 / 3.0 + 1.0 / 5.0)).abs() < 1e-15);
        let vol = OperatorContext::new(FormBundle::volume_only(HermitianMatrix::identity(3), 2.5), 1.0).unwrap();
        let a = HermitianMatrix::from_real_diag(&[1.0, 2.0, 4.0]);
        assert!((vol.f(&a).unwrap() - 2.5 / 8.0).abs() < 1e-15);
        assert!(f_k(&a, &FormComponent::zero(3, 2)).unwrap() == 0.0);
        assert!(ctx.f(&HermitianMatrix::from_real_diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn f_k_is_homogeneous_of_degree_minus_k() {
        let mut r = rng(7);
        for n in 2..=4 {
            let a = sample::positive_definite(n, &mut r);
            for k in 1..n {
                let c = sample::real_form(n, k, &mut r);
                let t: f64 = r.gen_range(0.3..3.0);
                let lhs = f_k(&a.scale(t), &c).unwrap();
                let rhs = t.powi(-(k as i32)) * f_k(&a, &c).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gradient_examples() {
        let ctx = j_eq(2, 1.0);
        let g = ctx.grad(&HermitianMatrix::from_real_diag(&[2.0, 4.0])).unwrap();
        assert!((g.get(0, 0).re + 0.25).abs() < 1e-15);
        let vol = OperatorContext::new(FormBundle::volume_only(HermitianMatrix::identity(2), 3.0), 1.0).unwrap();
        let a = HermitianMatrix::from_real(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let g = vol.grad(&a).unwrap();
        let m = a.inverse().unwrap();
        let want = m.matrix().transpose() * C64::new(-3.0 / a.det(), 0.0);
        assert!((g.matrix() - want).norm() < 1e-14);
    }

    fn fd_gradient_error(ctx: &OperatorContext, a: &HermitianMatrix) -> f64 {
        let n = a.dim();
        let g = ctx.grad_complex(a.matrix()).unwrap();
        let h = 1e-5 * (1.0 + a.frobenius());
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                    let mut e = CMat::zeros(n, n);
                    e[(i, j)] = dir * h;
                    let fp = ctx.f_complex(&(a.matrix() + &e)).unwrap();
                    let fm = ctx.f_complex(&(a.matrix() - &e)).unwrap();
                    let fd = (fp - fm) / (2.0 * h);
                    let an = g[(i, j)] * dir;
                    worst = worst.max((fd - an).norm() / g.norm().max(1e-300));
                }
            }
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng(13);
        for n in 2..=4 {
            let ctx = random_ctx(n, &mut r, false);
            let a = sample::positive_definite(n, &mut r);
            let err = fd_gradient_error(&ctx, &a);
            assert!(err <= 1e-6, "n={n} err={err}");
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let mut r = rng(14);
        for n in 2..=4 {
            let ctx = random_ctx(n, &mut r, false);
            let a = sample::positive_definite(n, &mut r);
            let b = sample::complex_matrix(n, &mut r);
            let c = sample::complex_matrix(n, &mut r);
            let h = 1e-4 * (1.0 + a.frobenius());
            let f = |x: &CMat| ctx.f_complex(x).unwrap();
            let am = a.matrix();
            let fd = (f(&(am + (&b + &c) * C64::new(h, 0.0))) - f(&(am + (&b - &c) * C64::new(h, 0.0)))
                - f(&(am + (-&b + &c) * C64::new(h, 0.0)))
                + f(&(am - (&b + &c) * C64::new(h, 0.0))))
                / (4.0 * h * h);
            let an = ctx.second_derivative(am, &b, &c).unwrap();
            assert!((fd - an).norm() <= 1e-5 * an.norm().max(1.0), "n={n}: {fd} vs {an}");
        }
    }

    #[test]
    fn theta_examples_and_identity_with_combined_form() {
        // A = I, c = rho^k/k!, B = diag(a): sum over |J| = k of (sum_{i in J} a_i)^2
        let n = 4;
        let a = HermitianMatrix::identity(n);
        let diag = [0.3, -1.2, 0.7, 2.0];
        let b = HermitianMatrix::from_real_diag(&diag).into_matrix();
        for k in 1..n {
            let c = power_form(&HermitianMatrix::identity(n), k, 1.0);
            let want: f64 = crate::subsets::subsets(n, k)
                .iter()
                .map(|&s| members(s).iter().map(|&i| diag[i]).sum::<f64>().powi(2))
                .sum();
            let got = theta_form(&a, &c, &b).unwrap();
            assert!((got - want).abs() < 1e-12, "k={k}: {got} vs {want}");
            assert_eq!(theta_form(&a, &c, &CMat::zeros(n, n)).unwrap(), 0.0);
        }
        let mut r = rng(3);
        for n in 2..=4 {
            let a = sample::positive_definite(n, &mut r);
            let b = sample::complex_matrix(n, &mut r);
            for k in 1..n {
                let c = sample::real_form(n, k, &mut r);
                let rho = HermitianMatrix::identity(n);
                let ctx = OperatorContext::new(FormBundle::new(rho, vec![c.clone()], 0.0).unwrap(), 1.0).unwrap();
                let combined = ctx.combined_form(&a, &b).unwrap();
                let theta = theta_form(&a, &c, &b).unwrap();
                assert!((combined - theta).abs() <= 1e-10 * theta.abs().max(1.0), "n={n} k={k}: {combined} vs {theta}");
            }
        }
    }

    #[test]
    fn combined_form_is_zero_for_zero_direction() {
        let mut r = rng(1);
        let ctx = random_ctx(3, &mut r, true);
        let a = sample::positive_definite(3, &mut r);
        assert_eq!(ctx.hess_quadratic(&a, &CMat::zeros(3, 3)).unwrap(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn theta_is_nonnegative_for_positive_forms(seed in any::<u64>()) {
            let mut r = rng(seed);
            let n = r.gen_range(2..=4);
            let k = r.gen_range(1..n);
            let a = sample::positive_definite(n, &mut r);
            let c = sample::strongly_positive_form(n, k, &mut r);
            let b = sample::complex_matrix(n, &mut r);
            let v = theta_form(&a, &c, &b).unwrap();
            prop_assert!(v >= -1e-12 * c.max_abs().max(1.0));
        }

        #[test]
        fn f_strictly_decreases_along_psd_directions(seed in any::<u64>()) {
            let mut r = rng(seed);
            let n = r.gen_range(2..=4);
            let ctx = random_ctx(n, &mut r, true);
            let a = sample::positive_definite(n, &mut r);
            let p = sample::psd_of_rank(n, r.gen_range(1..=n), &mut r);
            prop_assert!(ctx.f(&a.add(&p)).unwrap() < ctx.f(&a).unwrap());
        }

        #[test]
        fn ring_gradient_is_elliptic(seed in any::<u64>()) {
            let mut r = rng(seed);
            let n = r.gen_range(2..=4);
            let rho = HermitianMatrix::identity(n);
            // Lambda = rho^{k0}/k0! + positive extras is k0-uniformly positive
            let k0 = r.gen_range(1..n);
            let mut comps: Vec<FormComponent> = (1..n).map(|k| sample::strongly_positive_form(n, k, &mut r).scale(0.1)).collect();
            comps[k0 - 1] = comps[k0 - 1].add(&power_form(&rho, k0, 1.0));
            let ctx = OperatorContext::new(FormBundle::new(rho, comps, 0.0).unwrap(), 1.0).unwrap();
            let a = sample::positive_definite(n, &mut r);
            let g = ctx.grad_ring(&a).unwrap();
            prop_assert!(g.scale(-1.0).min_eig() > 0.0);
        }

        #[test]
        fn f_is_convex_along_segments(seed in any::<u64>()) {
            let mut r = rng(seed);
            let n = r.gen_range(2..=3);
            let ctx = random_ctx(n, &mut r, true);
            let a0 = sample::positive_definite(n, &mut r);
            let a1 = sample::positive_definite(n, &mut r);
            let h = 0.05;
            for i in 1..20 {
                let t = i as f64 / 20.0;
                let at = |s: f64| a0.scale(1.0 - s).add(&a1.scale(s));
                let d2 = ctx.f(&at(t + h)).unwrap() - 2.0 * ctx.f(&at(t)).unwrap() + ctx.f(&at(t - h)).unwrap();
                prop_assert!(d2 >= -1e-10);
            }
        }
    }
}
