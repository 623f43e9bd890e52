//! Lift of a datum on C^d to the product C^d x C^d: Lambda_x from the
//! factor datum plus rho/d on the second factor, with the Schur-complement
//! lower bound for the lifted operator and the transfer of subsolutions.

use serde::Serialize;

use crate::cone::{check_oup, p_lambda_exact, subsolution_check, ConeReport, PositivityReport, SamplerConfig};
use crate::error::{input, Error, Result};
use crate::forms::{power_form, FormBundle, FormComponent, SplittingLabel};
use crate::hermitian::{lu_inverse, CMat, HermitianMatrix, C64};
use crate::operator::OperatorContext;

/// Constant of the lifted equation 2 omega^{2d}/(2d)! = ...
pub const LIFTED_KAPPA: f64 = 2.0;

/// Copies a form on C^d into C^{2d}, on the first factor (`shift` = 0) or
/// the second (`shift` = d).
pub fn embed_component(c: &FormComponent, shift: usize) -> FormComponent {
    let d = c.dim();
    let mut out = FormComponent::zero(2 * d, c.degree());
    for (i, j, z) in c.entries() {
        out.set(i << shift, j << shift, z);
    }
    out
}

fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let (p, q) = (a.nrows(), b.nrows());
    let mut m = CMat::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a);
    m.view_mut((p, p), (q, q)).copy_from(b);
    m
}

/// The lifted datum with its factor pieces.
#[derive(Clone, Debug)]
pub struct LiftedInstance {
    pub d: usize,
    /// Factor datum (degrees 1..d-1; its density is not lifted).
    pub lhat: FormBundle,
    pub rhohat: HermitianMatrix,
    /// Lambda_x + Lambda_y on C^{2d} with rho = rhohat + rhohat and no volume part.
    pub bundle: FormBundle,
    /// Blocks (first factor, label k0) and (second factor, label 1).
    pub splitting: SplittingLabel,
    pub k0: usize,
}

impl LiftedInstance {
    /// F_1: the factor datum on the first factor.
    pub fn factor_x(&self) -> Result<OperatorContext> {
        OperatorContext::new(self.lhat.with_f(0.0), 1.0)
    }

    /// F_2: rho/d on the second factor.
    pub fn factor_y(&self) -> Result<OperatorContext> {
        let b = FormBundle::new(self.rhohat.clone(), vec![power_form(&self.rhohat, 1, 1.0 / self.d as f64)], 0.0)?;
        OperatorContext::new(b, 1.0)
    }

    pub fn lifted(&self) -> Result<OperatorContext> {
        OperatorContext::new(self.bundle.clone(), LIFTED_KAPPA)
    }

    /// The block matrix [[H, D], [D^*, V]].
    pub fn assemble(&self, h: &HermitianMatrix, d: &CMat, v: &HermitianMatrix) -> Result<HermitianMatrix> {
        let k = self.d;
        if h.dim() != k || v.dim() != k || d.nrows() != k || d.ncols() != k {
            return input("block sizes must equal the factor dimension");
        }
        let mut m = block_diag(h.matrix(), v.matrix());
        m.view_mut((0, k), (k, k)).copy_from(d);
        m.view_mut((k, 0), (k, k)).copy_from(&d.adjoint());
        Ok(HermitianMatrix::symmetrized(m))
    }

    /// O-UP of the lifted datum on the canonical splitting with constant m.
    pub fn check_oup(&self, m: f64, samples: usize, seed: u64) -> Result<PositivityReport> {
        check_oup(&self.bundle, &self.splitting, m, samples, seed)
    }
}

/// Lambda = lhat on the first factor plus rhohat/d on the second. `k0` is the
/// lowest degree carrying factor data (the label of the first block).
pub fn lift_bundle(lhat: &FormBundle, rhohat: &HermitianMatrix) -> Result<LiftedInstance> {
    let d = lhat.dim();
    if !(2..=3).contains(&d) {
        return Err(Error::Unsupported(format!("factor dimension must be 2 or 3, got {d}")));
    }
    if rhohat.dim() != d {
        return input("rhohat and the factor datum differ in dimension");
    }
    let mut comps: Vec<FormComponent> = lhat.components().iter().map(|c| embed_component(c, 0)).collect();
    let ly = embed_component(&power_form(rhohat, 1, 1.0 / d as f64), d);
    match comps.iter_mut().find(|c| c.degree() == 1) {
        Some(c) => *c = c.add(&ly),
        None => comps.push(ly),
    }
    let rho = HermitianMatrix::symmetrized(block_diag(rhohat.matrix(), rhohat.matrix()));
    let bundle = FormBundle::new(rho, comps, 0.0)?;
    let k0 = lhat.components().iter().filter(|c| c.max_abs() > 0.0).map(|c| c.degree()).min().unwrap_or(1);
    let splitting = SplittingLabel::coordinate(&[((0..d).collect(), k0), ((d..2 * d).collect(), 1)])?;
    Ok(LiftedInstance { d, lhat: lhat.clone(), rhohat: rhohat.clone(), bundle, splitting, k0 })
}

/// Both sides of the Schur-complement lower bound and its ray-limit version.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BlockBound {
    /// F of the full block matrix.
    pub lhs: f64,
    /// F_1(H - D V^{-1} D^*) + F_2(V).
    pub rhs: f64,
    /// F_1 of the Schur complement plus the second-factor term evaluated on
    /// the lower-right block of the inverse; equals lhs identically.
    pub two_term: f64,
    pub p_lhs: f64,
    pub p_rhs: f64,
}

pub fn block_lower_bound(inst: &LiftedInstance, h: &HermitianMatrix, d: &CMat, v: &HermitianMatrix) -> Result<BlockBound> {
    let a = inst.assemble(h, d, v)?;
    let vinv = lu_inverse(v.matrix()).ok_or_else(|| Error::Singular { what: "V block".into(), condition: f64::INFINITY })?;
    let schur = HermitianMatrix::symmetrized(h.matrix() - d * &vinv * d.adjoint());
    let (cx, cy, full) = (inst.factor_x()?, inst.factor_y()?, inst.lifted()?);
    let lhs = full.f_ring(&a)?;
    let rhs = cx.f_ring(&schur)? + cy.f_ring(v)?;
    let ainv = lu_inverse(a.matrix()).ok_or_else(|| Error::Singular { what: "block matrix".into(), condition: f64::INFINITY })?;
    let k = inst.d;
    let xx: CMat = ainv.view((0, 0), (k, k)).into();
    let yy: CMat = ainv.view((k, k), (k, k)).into();
    let two_term = cx.ring_value(&xx) + cy.ring_value(&yy);
    let p_lhs = p_lambda_exact(&a, &full)?;
    let p_rhs = p_lambda_exact(&schur, &cx)? + cy.f_ring(v)?;
    Ok(BlockBound { lhs, rhs, two_term, p_lhs, p_rhs })
}

/// The mixed-term matrix N = S V^{-1} - T on the second factor, where S is
/// the top coefficient of (rho/d) ^ V^{d-1}/(d-1)! and T_{lj} that of
/// (rho/d) ^ V^{d-2}/(d-2)! ^ e_{l jbar}. Contracted with D zeta on both
/// sides it bounds the mixed wedge term; it is PSD because F_2 decreases.
pub fn mixed_term_matrix(inst: &LiftedInstance, v: &HermitianMatrix) -> Result<HermitianMatrix> {
    let k = inst.d;
    let ly = power_form(&inst.rhohat, 1, 1.0 / k as f64);
    let s = ly.wedge(&power_form(v, k - 1, 1.0))?.top_coefficient();
    let base = ly.wedge(&power_form(v, k - 2, 1.0))?;
    let vinv = lu_inverse(v.matrix()).ok_or_else(|| Error::Singular { what: "V block".into(), condition: f64::INFINITY })?;
    let mut n = CMat::zeros(k, k);
    for l in 0..k {
        for j in 0..k {
            let mut e = FormComponent::zero(k, 1);
            e.set(1 << l, 1 << j, C64::new(1.0, 0.0));
            let t = base.wedge(&e)?.coeffs()[0];
            n[(l, j)] = vinv[(j, l)] * s - t;
        }
    }
    Ok(HermitianMatrix::symmetrized(n))
}

/// Cone audit of the lifted reference metric blockdiag(omega_t, rhohat).
#[derive(Clone, Debug, Serialize)]
pub struct LiftReport {
    /// Factor cone condition of omega_t for (lhat, kappa = 1).
    pub factor: ConeReport,
    /// Top coefficient of exp(omega_t) ^ (1 - lhat): the constant c det(rhohat)
    /// when omega_t solves the factor equation. The transfer uses c >= 0.
    pub factor_volume_slack: f64,
    /// Cone condition of the block metric for the lifted datum, kappa = 2.
    pub lifted: Option<ConeReport>,
    pub pass: bool,
}

pub fn lifted_subsolution_check(omega_t: &HermitianMatrix, inst: &LiftedInstance, budget: &SamplerConfig) -> Result<LiftReport> {
    if omega_t.dim() != inst.d {
        return input("omega_t must live on the factor");
    }
    let cx = inst.factor_x()?;
    let factor = subsolution_check(omega_t, &cx, budget)?;
    let factor_volume_slack = omega_t.det() * (1.0 - cx.f_ring(omega_t)?);
    if !factor.pass {
        return Ok(LiftReport { factor, factor_volume_slack, lifted: None, pass: false });
    }
    let w0 = HermitianMatrix::symmetrized(block_diag(omega_t.matrix(), inst.rhohat.matrix()));
    let lifted = subsolution_check(&w0, &inst.lifted()?, budget)?;
    let pass = lifted.pass;
    Ok(LiftReport { factor, factor_volume_slack, lifted: Some(lifted), pass })
}
