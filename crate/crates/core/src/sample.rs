//! Seeded random generators for matrices, covectors and forms.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::forms::FormComponent;
use crate::hermitian::{CMat, HermitianMatrix, C64};

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Gaussian vector normalized to unit length.
pub fn unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n).map(|_| complex_normal(rng)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// General complex matrix with i.i.d. complex Gaussian entries.
pub fn complex_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    CMat::from_fn(n, n, |_, _| complex_normal(rng))
}

/// Hermitian matrix with Gaussian entries (indefinite in general).
pub fn hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    HermitianMatrix::symmetrized(complex_matrix(n, rng))
}

/// Positive-definite matrix G G^*/n + c I with c drawn from [0.2, 1].
pub fn positive_definite<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let g = complex_matrix(n, rng);
    let c = rng.gen_range(0.2..1.0);
    HermitianMatrix::symmetrized(&g * g.adjoint() * C64::new(1.0 / n as f64, 0.0) + CMat::identity(n, n) * C64::new(c, 0.0))
}

/// PSD matrix of the given rank: a sum of r Gaussian outer products.
pub fn psd_of_rank<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> HermitianMatrix {
    let mut m = CMat::zeros(n, n);
    for _ in 0..r {
        let v: Vec<C64> = (0..n).map(|_| complex_normal(rng)).collect();
        m += HermitianMatrix::outer(&v).matrix();
    }
    HermitianMatrix::symmetrized(m)
}

/// PSD matrix of rank r whose nonzero eigenvalues lie in [0.5, 2].
pub fn psd_well_conditioned<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> HermitianMatrix {
    let q = complex_matrix(n, rng).qr().q();
    let mut m = CMat::zeros(n, n);
    for c in 0..r {
        let col: Vec<C64> = q.column(c).iter().cloned().collect();
        m += HermitianMatrix::outer(&col).scale(rng.gen_range(0.5..2.0)).matrix();
    }
    HermitianMatrix::symmetrized(m)
}

/// Strongly positive (k,k)-form: a random positive combination of powers
/// P^k/k! of PSD matrices and wedges of (1,1)-forms from PSD matrices.
pub fn strongly_positive_form<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> FormComponent {
    let mut out = FormComponent::zero(n, k);
    for _ in 0..3 {
        let mut term = FormComponent::scalar(n, 1.0);
        for _ in 0..k {
            let p = psd_of_rank(n, rng.gen_range(1..=n), rng);
            term = term.wedge(&FormComponent::from_matrix(&p)).expect("degree within range");
        }
        out = out.add(&term.scale(rng.gen_range(0.1..1.0)));
    }
    out
}

/// Real (k,k)-form with Gaussian coefficients satisfying the reality condition.
pub fn real_form<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> FormComponent {
    let mut c = FormComponent::zero(n, k);
    let m = c.side();
    for a in 0..m {
        for b in a..m {
            if a == b {
                c.set_at(a, a, C64::new(rng.sample(StandardNormal), 0.0));
            } else {
                let z = complex_normal(rng);
                c.set_at(a, b, z);
                c.set_at(b, a, z.conj());
            }
        }
    }
    c
}
