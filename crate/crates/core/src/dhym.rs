//! Deformed Hermitian Yang-Mills front end: the global phase, the reduced
//! datum Lambda_theta and three equivalent residuals.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{check_h1, PositivityReport};
use crate::error::{input, Error, Result};
use crate::forms::{power_form, FormBundle};
use crate::hermitian::{CMat, HermitianMatrix, C64};
use crate::operator::OperatorContext;
use crate::solver::torus::TorusProblem;
use crate::solver::Grid;

/// arccot with values in (0, pi).
pub fn arccot(x: f64) -> f64 {
    0.5 * PI - x.atan()
}

/// det(omega + i rho): the top coefficient of (omega + i rho)^n/n!.
pub fn complex_volume(omega: &HermitianMatrix, rho: &HermitianMatrix) -> C64 {
    (omega.matrix() + rho.matrix() * C64::new(0.0, 1.0)).determinant()
}

/// Argument of the class integral of (omega0 + i rho)^n, in (0, pi).
pub fn global_phase(omega0: &HermitianMatrix, rho: &HermitianMatrix) -> Result<f64> {
    if omega0.dim() != rho.dim() {
        return input("omega0 and rho differ in dimension");
    }
    let z = complex_volume(omega0, rho);
    let scale = z.norm().max(f64::MIN_POSITIVE);
    if z.im.abs() <= 1e-14 * scale {
        return Err(Error::Model("degenerate phase: the imaginary part of the class volume vanishes".into()));
    }
    if z.im < 0.0 {
        return Err(Error::Model(format!("phase {:.6} lies outside (0, pi)", z.arg())));
    }
    Ok(arccot(z.re / z.im))
}

/// Coefficient sin((k-1) theta)/sin(theta) / sin(theta)^k of rho^k/k! in Lambda_theta.
pub fn lambda_theta_coefficient(theta: f64, k: usize) -> f64 {
    let s = theta.sin();
    ((k as f64 - 1.0) * theta).sin() / s / s.powi(k as i32)
}

/// Lambda_theta = sum_{k=2}^n sin((k-1)theta)/sin(theta) (rho/sin theta)^k/k!,
/// with the k = n term carried as the density f; kappa = 1.
pub fn lambda_theta_bundle(rho: &HermitianMatrix, theta: f64) -> Result<FormBundle> {
    if !(theta > 0.0 && theta < PI) {
        return input(format!("phase {theta} outside (0, pi)"));
    }
    let n = rho.dim();
    let comps = (2..n).map(|k| power_form(rho, k, lambda_theta_coefficient(theta, k))).collect();
    FormBundle::new(rho.clone(), comps, lambda_theta_coefficient(theta, n))
}

/// The phase range in which every coefficient of Lambda_theta is nonnegative.
pub fn phase_in_range(theta: f64, n: usize) -> bool {
    let bound = if n <= 1 { PI } else { PI / (n - 1) as f64 };
    theta > 0.0 && theta <= bound * (1.0 + 1e-12)
}

/// H1 with k0 = 2 for Lambda_theta, with m half the degree-2 coefficient.
/// There is nothing to check below the top degree when n = 2.
pub fn lambda_theta_h1(rho: &HermitianMatrix, omega_hat: &HermitianMatrix, theta: f64, samples: usize, seed: u64) -> Result<Option<PositivityReport>> {
    let n = rho.dim();
    if n < 3 {
        return Ok(None);
    }
    let b = lambda_theta_bundle(rho, theta)?;
    let f = b.f;
    let ctx = OperatorContext::new(b, 1.0)?;
    let m = 0.5 * lambda_theta_coefficient(theta, 2);
    Ok(Some(check_h1(&ctx, m, 2, omega_hat, f, samples, seed)?))
}

/// Eigenvalues of omega relative to rho.
pub fn relative_eigenvalues(omega: &HermitianMatrix, rho: &HermitianMatrix) -> Result<Vec<f64>> {
    let (vals, vecs) = rho.eigh();
    if vals.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositive { what: "rho".into(), min_eig: vals.iter().cloned().fold(f64::INFINITY, f64::min) });
    }
    let n = rho.dim();
    let inv_sqrt = CMat::from_fn(n, n, |i, j| if i == j { C64::new(vals[i].powf(-0.5), 0.0) } else { C64::new(0.0, 0.0) });
    let s = &vecs * inv_sqrt * vecs.adjoint();
    let w = HermitianMatrix::symmetrized(&s * omega.matrix() * &s);
    Ok(w.eigenvalues())
}

/// Residuals of one metric against the phase theta.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DhymResiduals {
    /// Re det(omega + i rho) - cot(theta) Im det(omega + i rho).
    pub direct: f64,
    /// sum arccot(lambda_i) - theta over the eigenvalues relative to rho.
    pub angle: f64,
    /// Top coefficient of exp(omega_hat) ^ (1 - Lambda_theta) with
    /// omega_hat = omega - cot(theta) rho; None when omega_hat is not positive.
    pub reduced: Option<f64>,
}

/// The three residuals. Since sin(theta) direct = sin(theta) reduced
/// identically, direct and reduced agree whenever omega_hat > 0.
pub fn dhym_residuals(omega: &HermitianMatrix, rho: &HermitianMatrix, theta: f64) -> Result<DhymResiduals> {
    let cot = theta.cos() / theta.sin();
    let z = complex_volume(omega, rho);
    let direct = z.re - cot * z.im;
    let angle = relative_eigenvalues(omega, rho)?.iter().map(|l| arccot(*l)).sum::<f64>() - theta;
    let hat = omega.axpy(-cot, rho);
    let reduced = if hat.is_positive_definite() {
        let b = lambda_theta_bundle(rho, theta)?;
        let n = rho.dim();
        let mut r = hat.det() - b.top_coefficient();
        for c in b.components() {
            r -= c.wedge(&power_form(&hat, n - c.degree(), 1.0))?.top_coefficient();
        }
        Some(r)
    } else {
        None
    };
    Ok(DhymResiduals { direct, angle, reduced })
}

/// A flat-torus dHYM instance with constant rho and reference class omega0.
#[derive(Clone, Debug)]
pub struct DhymInstance {
    pub rho: HermitianMatrix,
    pub omega0: HermitianMatrix,
    pub theta: f64,
}

impl DhymInstance {
    /// Builds the instance with the phase computed from the classes.
    pub fn from_classes(omega0: HermitianMatrix, rho: HermitianMatrix) -> Result<Self> {
        let theta = global_phase(&omega0, &rho)?;
        Ok(DhymInstance { rho, omega0, theta })
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn cot(&self) -> f64 {
        self.theta.cos() / self.theta.sin()
    }

    /// omega0 - cot(theta) rho, required positive.
    pub fn omega_hat(&self) -> Result<HermitianMatrix> {
        let hat = self.omega0.axpy(-self.cot(), &self.rho);
        if !hat.is_positive_definite() {
            return Err(Error::NotPositive { what: "omega0 - cot(theta) rho".into(), min_eig: hat.min_eig() });
        }
        Ok(hat)
    }

    /// The reduced equation on the grid: kappa = 1, reference omega_hat,
    /// datum Lambda_theta.
    pub fn torus_problem(&self, grid: Grid) -> Result<TorusProblem> {
        let b = lambda_theta_bundle(&self.rho, self.theta)?;
        let f = vec![b.f; grid.len()];
        TorusProblem::new(grid, self.omega_hat()?, b, f, Some(1.0))
    }

    /// Residual fields of omega0 + ddbar u.
    pub fn residual_fields(&self, grid: &Grid, u: &[f64]) -> Result<Vec<DhymResiduals>> {
        let h = grid.complex_hessian(u);
        (0..grid.len())
            .into_par_iter()
            .map(|q| dhym_residuals(&HermitianMatrix::symmetrized(self.omega0.matrix() + h.at(q)), &self.rho, self.theta))
            .collect()
    }
}
