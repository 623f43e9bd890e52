//! Cone-condition certification: ray limits, the hyperplane supremum
//! P_Lambda(A), subsolution tests, the constant gamma_min and the positivity
//! thresholds derived from it, and uniform-positivity checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::forms::{dual_cone_matrix, positivity_probe, power_form, FormBundle, FormComponent, ProbeResult, SplittingLabel};
use crate::hermitian::{eigh, mp_ray_limit, CMat, HermitianMatrix, SubspaceSelector, C64};
use crate::operator::{checked_inverse, OperatorContext};
use crate::solver::ray::solve_ray;
use crate::subsets::{binom, members, subsets};

/// Verdicts with |P - kappa| below this are reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-7;

/// Ray limit F_Lambda(A : B) = <Lambda_ring, exp chi_H> for PSD B != 0; the
/// volume part does not survive the limit.
pub fn ray_limit(a: &HermitianMatrix, b: &HermitianMatrix, ctx: &OperatorContext) -> Result<f64> {
    if !a.is_positive_definite() {
        return Err(Error::NotPositive { what: "ray base point".into(), min_eig: a.min_eig() });
    }
    let lim = mp_ray_limit(a, b)?;
    Ok(ctx.ring_value(lim.matrix()))
}

/// Ray limit of (A + t v v^*)^{-1} given M = A^{-1}, in the Sherman-Morrison
/// form M - M v v^* M / (v^* M v): the inverse of A on v^perp.
pub fn hyperplane_inverse(m: &CMat, v: &[C64]) -> CMat {
    let n = v.len();
    let mv: Vec<C64> = (0..n).map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum()).collect();
    let vmv: C64 = (0..n).map(|i| v[i].conj() * mv[i]).sum();
    CMat::from_fn(n, n, |i, j| m[(i, j)] - mv[i] * mv[j].conj() / vmv.re)
}

/// Value of the hyperplane v^perp: the ray limit along v v^*.
pub(crate) fn hyperplane_value(m: &CMat, v: &[C64], ctx: &OperatorContext) -> f64 {
    ctx.ring_value(&hyperplane_inverse(m, v))
}

/// Sampling budget for the hyperplane maximization.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SamplerConfig {
    pub samples: usize,
    pub starts: usize,
    pub ascent_steps: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { samples: 4096, starts: 8, ascent_steps: 32, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig { seed, ..Self::default() }
    }
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    r
}

/// Quasi-random unit vectors in C^n: a randomly shifted Halton sequence pushed
/// through Box-Muller and normalized.
pub fn quasi_random_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<C64>> {
    assert!(2 * n <= PRIMES.len(), "dimension too large for the Halton sampler");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
    let mut out = Vec::with_capacity(count);
    let mut i: u64 = 1;
    while out.len() < count {
        let u: Vec<f64> = (0..2 * n).map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract()).collect();
        i += 1;
        let v: Vec<C64> = (0..n)
            .map(|c| {
                let (u1, u2) = (u[2 * c].max(1e-300), u[2 * c + 1]);
                let r = (-2.0 * u1.ln()).sqrt();
                let th = 2.0 * std::f64::consts::PI * u2;
                C64::new(r * th.cos(), r * th.sin())
            })
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            out.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    out
}

fn normalize(v: &[C64]) -> Vec<C64> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|z| z / norm).collect()
}

/// Outcome of the hyperplane maximization.
#[derive(Clone, Debug, Serialize)]
pub struct PLambda {
    /// Best sampled-and-refined value: a lower bound of the supremum.
    pub value: f64,
    /// Normal vector v of the maximizing hyperplane v^perp.
    pub witness: Vec<C64>,
}

/// Approximate max over hyperplanes H of <Lambda_ring, exp chi_H>.
pub fn p_lambda(a: &HermitianMatrix, ctx: &OperatorContext, budget: &SamplerConfig) -> Result<PLambda> {
    let n = a.dim();
    let m = checked_inverse(a)?;
    if n == 1 {
        return Ok(PLambda { value: 0.0, witness: vec![C64::new(1.0, 0.0)] });
    }
    let dirs = quasi_random_directions(n, budget.samples.max(1), budget.seed);
    let mut scored: Vec<(f64, usize)> = dirs.iter().enumerate().map(|(i, v)| (hyperplane_value(&m, v, ctx), i)).collect();
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut best = (scored[0].0, dirs[scored[0].1].clone());
    for &(v0, idx) in scored.iter().take(budget.starts.max(1)) {
        let (v, x) = ascend(&m, &dirs[idx], v0, ctx, budget.ascent_steps);
        if v > best.0 {
            best = (v, x);
        }
    }
    Ok(PLambda { value: best.0, witness: best.1 })
}

/// Gradient ascent on the unit sphere with backtracking; gradients by central
/// differences in the 2n real coordinates.
fn ascend(m: &CMat, start: &[C64], start_value: f64, ctx: &OperatorContext, steps: usize) -> (f64, Vec<C64>) {
    let n = start.len();
    let mut x = start.to_vec();
    let mut fx = start_value;
    let mut step = 0.1;
    let h = 1e-6;
    for _ in 0..steps {
        let mut grad = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            for (dir, slot) in [(C64::new(h, 0.0), 0), (C64::new(0.0, h), 1)] {
                let mut p = x.clone();
                p[i] += dir;
                let mut q = x.clone();
                q[i] -= dir;
                let d = (hyperplane_value(m, &normalize(&p), ctx) - hyperplane_value(m, &normalize(&q), ctx)) / (2.0 * h);
                if slot == 0 {
                    grad[i].re = d;
                } else {
                    grad[i].im = d;
                }
            }
        }
        let gnorm = grad.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if gnorm < 1e-14 {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<C64> = normalize(&x.iter().zip(&grad).map(|(a, g)| a + g * (step / gnorm)).collect::<Vec<_>>());
            let fc = hyperplane_value(m, &cand, ctx);
            if fc > fx {
                x = cand;
                fx = fc;
                step *= 2.0;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (fx, x)
}

/// Dual-cone matrix of the lower-degree data alone: Q_Lambda with
/// b^* Q_Lambda b = (Lambda_ring ^ exp A)^[n-1] ^ (i/2) b ^ bbar.
pub fn ring_dual_matrix(a: &HermitianMatrix, bundle: &FormBundle) -> Result<HermitianMatrix> {
    let n = a.dim();
    let mut alpha = FormComponent::zero(n, n - 1);
    for c in bundle.components() {
        alpha = alpha.add(&c.wedge(&power_form(a, n - 1 - c.degree(), 1.0))?);
    }
    dual_cone_matrix(&alpha)
}

/// Exact supremum over hyperplanes: the largest generalized eigenvalue of
/// Q_Lambda against adj(A), since the ray limit along b b^* equals
/// b^* Q_Lambda b / (det A * b^* A^{-1} b).
pub fn p_lambda_exact(a: &HermitianMatrix, ctx: &OperatorContext) -> Result<f64> {
    let n = a.dim();
    if n == 1 {
        return Ok(0.0);
    }
    checked_inverse(a)?;
    let q = ring_dual_matrix(a, &ctx.bundle)?;
    // adj(A) = det(A) M; whiten with A^{1/2}/sqrt(det A)
    let (ev, u) = a.eigh();
    let det: f64 = ev.iter().product();
    let half = CMat::from_fn(n, n, |i, j| if i == j { C64::new(ev[i].sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
    let s = &u * half * u.adjoint() * C64::new(1.0 / det.sqrt(), 0.0);
    let w = HermitianMatrix::symmetrized(&s * q.matrix() * &s);
    Ok(*w.eigenvalues().last().expect("nonempty"))
}

/// Result of a cone-condition audit at one point.
#[derive(Clone, Debug, Serialize)]
pub struct ConeReport {
    /// Sampled hyperplane supremum (lower bound of the true value).
    pub p_value: f64,
    /// Supremum from the generalized eigenvalue problem.
    pub p_exact: f64,
    /// Minimal eigenvalue of the dual-cone matrix of (kappa Omega - Lambda ^ Omega)^[n-1].
    pub q_min: f64,
    pub pass: bool,
    /// |P - kappa| within the marginal band.
    pub marginal: bool,
    /// The sampled and eigenvalue verdicts agree (always true when marginal).
    pub consistent: bool,
    /// Normal vector b of the worst hyperplane (ray direction b b^*).
    pub witness_covector: Option<Vec<(f64, f64)>>,
    pub radius_r: Option<f64>,
    pub seed: u64,
}

/// The degree n-1 form (kappa exp A - Lambda ^ exp A)^[n-1].
pub fn cone_form(a: &HermitianMatrix, ctx: &OperatorContext) -> Result<FormComponent> {
    let n = a.dim();
    let mut alpha = power_form(a, n - 1, ctx.kappa);
    for c in ctx.bundle.components() {
        alpha = alpha.sub(&c.wedge(&power_form(a, n - 1 - c.degree(), 1.0))?);
    }
    Ok(alpha)
}

/// Smallest eigenvalue of the dual-cone matrix of the cone form, with its
/// eigenvector.
pub fn cone_q_min(a: &HermitianMatrix, ctx: &OperatorContext) -> Result<(f64, Vec<C64>)> {
    if a.dim() == 1 {
        // the degree-0 part is kappa alone
        return Ok((ctx.kappa, vec![C64::new(1.0, 0.0)]));
    }
    let q = dual_cone_matrix(&cone_form(a, ctx)?)?;
    let (ev, vecs) = eigh(q.matrix());
    Ok((ev[0], vecs.column(0).iter().cloned().collect()))
}

/// Cone-condition audit of A: dual-cone eigenvalue test, sampled hyperplane
/// supremum and the exact supremum, cross-checked.
pub fn subsolution_check(a: &HermitianMatrix, ctx: &OperatorContext, budget: &SamplerConfig) -> Result<ConeReport> {
    let (q_min, qvec) = cone_q_min(a, ctx)?;
    let sampled = p_lambda(a, ctx, budget)?;
    let exact = p_lambda_exact(a, ctx)?;
    let kappa = ctx.kappa;
    let marginal = (exact - kappa).abs() <= MARGINAL_BAND || (sampled.value - kappa).abs() <= MARGINAL_BAND;
    let pass = q_min > 0.0 && !marginal;
    let consistent = marginal || ((q_min > 0.0) == (exact < kappa) && (sampled.value < kappa || q_min <= 0.0));
    let witness = (!pass).then(|| if q_min <= 0.0 { qvec } else { sampled.witness.clone() });
    Ok(ConeReport {
        p_value: sampled.value,
        p_exact: exact,
        q_min,
        pass,
        marginal,
        consistent,
        witness_covector: witness.map(|w| w.iter().map(|z| (z.re, z.im)).collect()),
        radius_r: None,
        seed: budget.seed,
    })
}

/// Bound R on |B| over PSD B with F(A + B) = kappa found by ray searches:
/// twice the largest root t |b b^*| over sampled unit directions b.
pub fn subsolution_radius(a: &HermitianMatrix, ctx: &OperatorContext, budget: &SamplerConfig) -> Result<f64> {
    let report = subsolution_check(a, ctx, budget)?;
    if !report.pass {
        return Err(Error::Model(format!("A is not a subsolution (q_min = {:.3e})", report.q_min)));
    }
    let n = a.dim();
    let mut dirs = quasi_random_directions(n, budget.samples.clamp(1, 512), budget.seed);
    for i in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[i] = C64::new(1.0, 0.0);
        dirs.push(e);
    }
    let mut r: f64 = 0.0;
    for b in &dirs {
        let bb = HermitianMatrix::outer(b);
        if let Some(t) = solve_ray(a, &bb, ctx)? {
            r = r.max(t * bb.frobenius());
        }
    }
    Ok(2.0 * r)
}

/// The combinatorial constant
///   min_i{C(d_i,k_i-1) C(d_i,k_i)^{1/k_i-1}} prod_i C(d_i,k_i)^{d_i/k_i}
///   / ( max_i{d_i C(d_i,k_i)^{1/k_i}} ratio^{sum d_i/k_i} sum_i ratio^{1/k_i} ).
pub fn gamma_min(ratio: f64, n_p: usize, d: &[usize], k: &[usize]) -> Result<f64> {
    if !(ratio > 0.0) || d.len() != n_p || k.len() != n_p || n_p == 0 {
        return input("gamma_min needs ratio > 0 and n_p labels");
    }
    if d.iter().zip(k).any(|(&di, &ki)| ki == 0 || ki > di) {
        return input("gamma_min needs 1 <= k_i <= d_i");
    }
    let c = |a: usize, b: usize| binom(a, b) as f64;
    let mut lead = f64::INFINITY;
    let mut prod = 1.0;
    let mut head = 0.0f64;
    let mut expo = 0.0;
    let mut tail = 0.0;
    for (&di, &ki) in d.iter().zip(k) {
        let kf = ki as f64;
        lead = lead.min(c(di, ki - 1) * c(di, ki).powf(1.0 / kf - 1.0));
        prod *= c(di, ki).powf(di as f64 / kf);
        head = head.max(di as f64 * c(di, ki).powf(1.0 / kf));
        expo += di as f64 / kf;
        tail += ratio.powf(1.0 / kf);
    }
    Ok(lead * prod / (head * ratio.powf(expo) * tail))
}

/// Named thresholds for the volume density.
#[derive(Clone, Debug, Serialize)]
pub struct PositivityThresholds {
    pub m: f64,
    /// gamma_min(kappa/m, ...) minimized over the supplied splittings.
    pub gamma_min: f64,
    /// Bound on -f for the H1 hypothesis.
    pub eps_h1: f64,
    /// Bound on -f along the continuity path.
    pub eps_h2prime: f64,
}

/// Both threshold families. `k0` is the uniform-positivity degree of the
/// H1 family; `splittings` are the labels over which the H2' constant is
/// minimized (the trivial splitting with label k0 when empty).
pub fn thresholds(ctx: &OperatorContext, k0: usize, splittings: &[SplittingLabel], m: f64, omega0: &HermitianMatrix) -> Result<PositivityThresholds> {
    if !(m > 0.0) {
        return input("uniform positivity constant m must be positive");
    }
    let n = ctx.dim();
    let kappa = ctx.kappa;
    let volume_ratio = omega0.det() / ctx.bundle.rho.det();
    let kappa0 = kappa * volume_ratio;
    let g_h1 = gamma_min(2.0 * kappa / m, 1, &[n], &[k0])?;
    let eps_h1 = (m / (4 * n + 2) as f64 * g_h1).min(kappa * volume_ratio / 2.0);
    let trivial = [SplittingLabel::trivial(n, k0)];
    let splits: &[SplittingLabel] = if splittings.is_empty() { &trivial } else { splittings };
    let mut g = f64::INFINITY;
    for s in splits {
        g = g.min(gamma_min(kappa / m, s.n_p(), &s.dims(), &s.labels())?);
    }
    let eps_h2prime = (m / (2 * n + 1) as f64 * g).min(kappa0 / 2.0);
    Ok(PositivityThresholds { m, gamma_min: g, eps_h1, eps_h2prime })
}

/// Report of a uniform-positivity check.
#[derive(Clone, Debug, Serialize)]
pub struct PositivityReport {
    pub pass: bool,
    /// Degrees below k0 carrying nonzero data (H1 only).
    pub nonzero_low_degrees: Vec<usize>,
    /// Probe per degree 1..n-1 of the shifted data.
    pub probes: Vec<(usize, ProbeResult)>,
    /// Blocks whose label is a failing degree (O-UP only).
    pub failing_blocks: Vec<usize>,
    pub f_floor: Option<f64>,
    pub eps: Option<f64>,
}

/// H1: Lambda^[l] = 0 for l < k0, Lambda_ring - m rho^{k0}/k0! >= 0, and
/// f > -eps with eps from the H1 threshold family.
pub fn check_h1(ctx: &OperatorContext, m: f64, k0: usize, omega0: &HermitianMatrix, f_min: f64, samples: usize, seed: u64) -> Result<PositivityReport> {
    let n = ctx.dim();
    if k0 == 0 || k0 >= n {
        return input(format!("k0 must lie in 1..n-1, got {k0}"));
    }
    let bundle = &ctx.bundle;
    let nonzero_low: Vec<usize> = (1..k0).filter(|&l| bundle.component(l).is_some_and(|c| c.max_abs() > 0.0)).collect();
    let mut probes = Vec::new();
    for l in k0..n {
        let mut c = bundle.component_or_zero(l);
        if l == k0 {
            c = c.sub(&power_form(&bundle.rho, k0, m));
        }
        probes.push((l, positivity_probe(&c, samples, seed.wrapping_add(l as u64))));
    }
    let eps = thresholds(ctx, k0, &[], m, omega0)?.eps_h1;
    let pass = nonzero_low.is_empty() && probes.iter().all(|(_, p)| p.pass) && f_min > -eps;
    Ok(PositivityReport { pass, nonzero_low_degrees: nonzero_low, probes, failing_blocks: Vec::new(), f_floor: Some(f_min), eps: Some(eps) })
}

/// O-UP: Lambda_ring - m sum_i rho_i^{k_i}/k_i! >= 0 degree by degree.
pub fn check_oup(bundle: &FormBundle, splitting: &SplittingLabel, m: f64, samples: usize, seed: u64) -> Result<PositivityReport> {
    splitting.validate(&bundle.rho)?;
    let n = bundle.dim();
    let stack = splitting.block_power_stack(&bundle.rho)?;
    let mut probes = Vec::new();
    let mut failing = Vec::new();
    for l in 1..n {
        let c = bundle.component_or_zero(l).sub(&stack[l].scale(m));
        let p = positivity_probe(&c, samples, seed.wrapping_add(l as u64));
        if !p.pass {
            failing.extend(splitting.blocks.iter().enumerate().filter(|(_, b)| b.label == l).map(|(i, _)| i));
        }
        probes.push((l, p));
    }
    // a block labelled n (only possible for n_p = 1) has no lower-degree part to check
    let pass = probes.iter().all(|(_, p)| p.pass);
    Ok(PositivityReport { pass, nonzero_low_degrees: Vec::new(), probes, failing_blocks: failing, f_floor: None, eps: None })
}

/// Restriction of a form to the coordinate subspace spanned by `idx`.
pub fn restrict_form(c: &FormComponent, idx: &[usize]) -> FormComponent {
    let s = idx.len();
    let k = c.degree();
    let mut out = FormComponent::zero(s, k);
    let subs = subsets(s, k);
    let lift = |mask: u32| members(mask).iter().fold(0u32, |acc, &p| acc | (1 << idx[p]));
    for (a, &i) in subs.iter().enumerate() {
        for (b, &j) in subs.iter().enumerate() {
            out.set_at(a, b, c.get(lift(i), lift(j)));
        }
    }
    out
}

/// Signed value of the class pairing on a coordinate subtorus Y (unit volume):
/// the top coefficient on Y of kappa exp(w) - Lambda ^ exp(w), with the
/// volume part present only when Y is the whole torus (`f_mean` its density).
pub fn class_positivity_subtorus(
    omega_class: &HermitianMatrix,
    bundle: &FormBundle,
    kappa: f64,
    f_mean: f64,
    subtorus: &SubspaceSelector,
) -> Result<f64> {
    let n = bundle.dim();
    let idx = match subtorus {
        SubspaceSelector::Indices(v) => v.clone(),
        SubspaceSelector::Basis(_) => return Err(Error::Unsupported("only coordinate subtori are supported".into())),
    };
    if idx.is_empty() || idx.iter().any(|&i| i >= n) {
        return input("subtorus indices out of range");
    }
    let s = idx.len();
    let w = omega_class.restrict(&idx);
    let mut value = kappa * w.det();
    for c in bundle.components() {
        let k = c.degree();
        if k > s {
            continue;
        }
        let r = restrict_form(c, &idx);
        value -= r.wedge(&power_form(&w, s - k, 1.0))?.top_coefficient();
    }
    if s == n {
        value -= f_mean * bundle.rho.det();
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use proptest::prelude::*;
    use rand::Rng;

    fn j_eq(n: usize, kappa: f64) -> OperatorContext {
        let rho = HermitianMatrix::identity(n);
        OperatorContext::new(FormBundle::new(rho.clone(), vec![power_form(&rho, n - 1, 1.0)], 0.0).unwrap(), kappa).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_positive_ctx(n: usize, r: &mut ChaCha8Rng) -> OperatorContext {
        let rho = HermitianMatrix::identity(n);
        let comps = (1..n).map(|k| sample::strongly_positive_form(n, k, r)).collect();
        OperatorContext::new(FormBundle::new(rho, comps, r.gen_range(0.0..1.0)).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn ray_limit_examples() {
        let ctx = j_eq(2, 1.0);
        let a = HermitianMatrix::from_real_diag(&[2.0, 2.0]);
        let e1 = HermitianMatrix::from_real_diag(&[1.0, 0.0]);
        assert!((ray_limit(&a, &e1, &ctx).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ray_limit(&a, &HermitianMatrix::identity(2), &ctx).unwrap(), 0.0);
        assert!(ray_limit(&a, &HermitianMatrix::zeros(2), &ctx).is_err());
    }

    #[test]
    fn ray_limit_matches_large_t() {
        let mut r = rng(6);
        for n in 2..=4 {
            let ctx = random_positive_ctx(n, &mut r);
            let a = sample::positive_definite(n, &mut r);
            let b = sample::psd_well_conditioned(n, 1, &mut r);
            let lim = ray_limit(&a, &b, &ctx).unwrap();
            let far = ctx.f(&a.axpy(1e6, &b)).unwrap();
            assert!((far - lim).abs() <= 1e-4 * lim.abs().max(1.0), "n={n}: {far} vs {lim}");
        }
    }

    #[test]
    fn hyperplane_value_equals_dual_matrix_quotient() {
        let mut r = rng(8);
        for n in 2..=4 {
            let ctx = random_positive_ctx(n, &mut r);
            let a = sample::positive_definite(n, &mut r);
            let q = ring_dual_matrix(&a, &ctx.bundle).unwrap();
            let m = a.inverse().unwrap();
            for _ in 0..10 {
                let b = sample::unit_vector(n, &mut r);
                let quad = |x: &HermitianMatrix| -> f64 {
                    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| b[i].conj() * x.get(i, j) * b[j]).sum::<C64>().re
                };
                let want = quad(&q) / (a.det() * quad(&m));
                let via_limit = ray_limit(&a, &HermitianMatrix::outer(&b), &ctx).unwrap();
                let via_sm = hyperplane_value(m.matrix(), &b, &ctx);
                assert!((via_limit - want).abs() <= 1e-10 * want.abs().max(1.0));
                assert!((via_sm - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn p_lambda_diagonal_closed_form() {
        let ctx = j_eq(2, 1.0);
        for (a, b) in [(0.7, 1.9), (2.0, 0.6), (1.3, 1.3)] {
            let m = HermitianMatrix::from_real_diag(&[a, b]);
            let p = p_lambda(&m, &ctx, &SamplerConfig::with_seed(1)).unwrap();
            let want = 1.0 / f64::min(a, b);
            assert!((p.value - want).abs() < 1e-10, "{} vs {want}", p.value);
            assert!((p_lambda_exact(&m, &ctx).unwrap() - want).abs() < 1e-12);
        }
        // rho^{n-1}-only data at A = I: every hyperplane gives 1
        let ctx = j_eq(3, 2.0);
        let p = p_lambda(&HermitianMatrix::identity(3), &ctx, &SamplerConfig::with_seed(2)).unwrap();
        assert!((p.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p_lambda_sampler_reaches_exact_value() {
        let mut r = rng(10);
        for n in 2..=4 {
            let ctx = random_positive_ctx(n, &mut r);
            let a = sample::positive_definite(n, &mut r);
            let sampled = p_lambda(&a, &ctx, &SamplerConfig::with_seed(3)).unwrap().value;
            let exact = p_lambda_exact(&a, &ctx).unwrap();
            assert!(sampled <= exact + 1e-12);
            assert!(exact - sampled <= 1e-8 * exact.abs().max(1.0), "n={n}: {sampled} vs {exact}");
        }
    }

    #[test]
    fn p_lambda_grows_on_shrinking_sequence() {
        let ctx = j_eq(3, 1.0);
        let mut prev = 0.0;
        for l in 1..8 {
            let s = 0.5f64.powi(l);
            let a = HermitianMatrix::from_real_diag(&[s, 1.0, 2.0]);
            let p = p_lambda(&a, &ctx, &SamplerConfig::with_seed(0)).unwrap().value;
            assert!(p > prev);
            prev = p;
        }
        assert!(prev > 100.0);
    }

    #[test]
    fn subsolution_examples() {
        // pure volume data: every A passes
        let vol = OperatorContext::new(FormBundle::volume_only(HermitianMatrix::identity(3), 2.0), 1.0).unwrap();
        let a = HermitianMatrix::from_real_diag(&[0.1, 1.0, 5.0]);
        let rep = subsolution_check(&a, &vol, &SamplerConfig::default()).unwrap();
        assert!(rep.pass && rep.consistent);
        let ctx = j_eq(2, 1.0);
        let rep = subsolution_check(&HermitianMatrix::from_real_diag(&[2.0, 2.0]), &ctx, &SamplerConfig::default()).unwrap();
        assert!(rep.pass && rep.consistent && (rep.p_value - 0.5).abs() < 1e-10);
        let rep = subsolution_check(&HermitianMatrix::from_real_diag(&[0.5, 2.0]), &ctx, &SamplerConfig::default()).unwrap();
        assert!(!rep.pass && rep.consistent && rep.witness_covector.is_some());
        let w = rep.witness_covector.unwrap();
        // the worst hyperplane is orthogonal to e_2: the witness lives on e_2
        assert!(w[1].0.hypot(w[1].1) > 0.999);
    }

    #[test]
    fn radius_examples() {
        let ctx = j_eq(2, 2.0);
        // kappa = F(I): every ray root is t = 0 except those that never reach kappa
        let r = subsolution_radius(&HermitianMatrix::from_real_diag(&[1.2, 1.2]), &j_eq(2, 1.0), &SamplerConfig::default()).unwrap();
        assert!(r > 0.0 && r.is_finite());
        assert!(subsolution_radius(&HermitianMatrix::from_real_diag(&[0.4, 3.0]), &ctx, &SamplerConfig::default()).is_err());
        // Monge-Ampere type data: a root exists iff F(A) >= kappa
        let vol = OperatorContext::new(FormBundle::volume_only(HermitianMatrix::identity(2), 4.0), 1.0).unwrap();
        let a = HermitianMatrix::identity(2);
        let t = solve_ray(&a, &HermitianMatrix::identity(2), &vol).unwrap().unwrap();
        assert!((t - 1.0).abs() < 1e-10);
        let vol_low = OperatorContext::new(FormBundle::volume_only(HermitianMatrix::identity(2), 0.5), 1.0).unwrap();
        assert!(solve_ray(&a, &HermitianMatrix::identity(2), &vol_low).unwrap().is_none());
    }

    #[test]
    fn radius_bounds_sampled_roots() {
        let mut r = rng(12);
        let n = 3;
        let ctx0 = random_positive_ctx(n, &mut r);
        let a = sample::positive_definite(n, &mut r);
        let kappa = 1.5 * p_lambda_exact(&a, &ctx0).unwrap().max(ctx0.f(&a).unwrap() * 0.5);
        let ctx = OperatorContext::new(ctx0.bundle.clone(), kappa).unwrap();
        let big_r = subsolution_radius(&a, &ctx, &SamplerConfig::with_seed(5)).unwrap();
        for _ in 0..20 {
            let b = HermitianMatrix::outer(&sample::unit_vector(n, &mut r));
            if let Some(t) = solve_ray(&a, &b, &ctx).unwrap() {
                assert!(t * b.frobenius() <= big_r);
            }
        }
    }

    #[test]
    fn gamma_min_examples() {
        assert!((gamma_min(1.0, 1, &[2], &[1]).unwrap() - 1.0).abs() < 1e-15);
        assert!((gamma_min(2.0, 1, &[2], &[1]).unwrap() - 0.125).abs() < 1e-15);
        assert!(gamma_min(1.0, 1, &[2], &[3]).is_err());
    }

    #[test]
    fn gamma_min_single_block_top_label_closed_form() {
        // independent simplification for d = (n), k = (n-1):
        // (n-1)/2 * n^{1/(n-1)} / ratio^{(n+1)/(n-1)}
        for n in 2..=6 {
            for &ratio in &[0.3f64, 1.0, 2.5] {
                let nf = n as f64;
                let want = (nf - 1.0) / 2.0 * nf.powf(1.0 / (nf - 1.0)) / ratio.powf((nf + 1.0) / (nf - 1.0));
                let got = gamma_min(ratio, 1, &[n], &[n - 1]).unwrap();
                assert!((got - want).abs() <= 1e-12 * want, "n={n}");
            }
        }
    }

    #[test]
    fn thresholds_example() {
        let ctx = j_eq(2, 1.0);
        let t = thresholds(&ctx, 1, &[], 1.0, &HermitianMatrix::identity(2)).unwrap();
        assert!((t.eps_h1 - 1.0 / 80.0).abs() < 1e-15);
        let small = thresholds(&ctx, 1, &[], 1e-9, &HermitianMatrix::identity(2)).unwrap();
        assert!(small.eps_h1 < 1e-12 && small.eps_h2prime < 1e-12);
    }

    #[test]
    fn thresholds_minimize_over_splittings() {
        let ctx = j_eq(4, 1.0);
        let s1 = SplittingLabel::coordinate(&[(vec![0, 1], 1), (vec![2, 3], 1)]).unwrap();
        let s2 = SplittingLabel::coordinate(&[(vec![0, 1, 2], 2), (vec![3], 1)]).unwrap();
        let both = thresholds(&ctx, 1, &[s1.clone(), s2.clone()], 0.5, &HermitianMatrix::identity(4)).unwrap();
        let g1 = gamma_min(2.0, 2, &[2, 2], &[1, 1]).unwrap();
        let g2 = gamma_min(2.0, 2, &[3, 1], &[2, 1]).unwrap();
        assert!((both.gamma_min - g1.min(g2)).abs() < 1e-15);
    }

    #[test]
    fn h1_and_oup_checks() {
        let ctx = j_eq(2, 1.0);
        let rho = HermitianMatrix::identity(2);
        assert!(check_h1(&ctx, 1.0, 1, &rho, 0.0, 100, 0).unwrap().pass);
        assert!(check_h1(&ctx, 0.5, 1, &rho, 0.0, 100, 0).unwrap().pass);
        assert!(!check_h1(&ctx, 1.5, 1, &rho, 0.0, 100, 0).unwrap().pass);
        let neg = FormBundle::new(rho.clone(), vec![power_form(&rho, 1, -0.1)], 0.0).unwrap();
        let rep = check_h1(&OperatorContext::new(neg, 1.0).unwrap(), 0.1, 1, &rho, 0.0, 100, 0).unwrap();
        assert!(!rep.pass && rep.probes[0].1.witness.is_some());
        let three = HermitianMatrix::identity(3);
        let b = FormBundle::new(three.clone(), vec![power_form(&three, 1, 1.0)], 0.0).unwrap();
        let split = SplittingLabel::coordinate(&[(vec![0], 1), (vec![1, 2], 1)]).unwrap();
        assert!(check_oup(&b, &split, 1.0, 100, 0).unwrap().pass);
        let bad = FormBundle::new(three.clone(), vec![power_form(&HermitianMatrix::from_real_diag(&[1.0, 0.2, 1.0]), 1, 1.0)], 0.0).unwrap();
        let rep = check_oup(&bad, &split, 1.0, 100, 0).unwrap();
        assert!(!rep.pass && rep.failing_blocks == vec![0, 1]);
        // trivial splitting reproduces the H1 positivity clause
        let triv = SplittingLabel::trivial(3, 1);
        assert_eq!(check_oup(&b, &triv, 0.7, 10, 0).unwrap().pass, check_h1(&OperatorContext::new(b.clone(), 1.0).unwrap(), 0.7, 1, &three, 0.0, 10, 0).unwrap().pass);
    }

    #[test]
    fn class_positivity_examples() {
        let rho = HermitianMatrix::identity(2);
        let b = FormBundle::new(rho.clone(), vec![power_form(&rho, 1, 1.0)], 0.0).unwrap();
        let w = HermitianMatrix::from_real_diag(&[2.0, 2.0]);
        let full = class_positivity_subtorus(&w, &b, 1.0, 0.0, &SubspaceSelector::Indices(vec![0, 1])).unwrap();
        assert!(full.abs() < 1e-14);
        let line = class_positivity_subtorus(&w, &b, 1.0, 0.0, &SubspaceSelector::Indices(vec![1])).unwrap();
        assert!((line - 1.0).abs() < 1e-14);
        let basis = SubspaceSelector::Basis(CMat::identity(2, 1));
        assert!(matches!(class_positivity_subtorus(&w, &b, 1.0, 0.0, &basis), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gamma_min_decreases_in_ratio() {
        let mut r = rng(14);
        for _ in 0..50 {
            let n_p = r.gen_range(1..=3);
            let d: Vec<usize> = (0..n_p).map(|_| r.gen_range(1..=4)).collect();
            let k: Vec<usize> = d.iter().map(|&di| r.gen_range(1..=di)).collect();
            let x: f64 = r.gen_range(0.1..5.0);
            let y = x * r.gen_range(1.01..3.0);
            assert!(gamma_min(y, n_p, &d, &k).unwrap() < gamma_min(x, n_p, &d, &k).unwrap());
        }
    }

    #[test]
    fn three_way_agreement_on_diagonal_j_equation() {
        // subsolution <=> every rank-one ray limit < kappa <=> every ray root exists
        let mut r = rng(16);
        for _ in 0..40 {
            let n = r.gen_range(2..=3);
            let d: Vec<f64> = (0..n).map(|_| r.gen_range(0.3..3.0)).collect();
            let kappa = r.gen_range(0.3..3.0);
            let ctx = j_eq(n, kappa);
            let a = HermitianMatrix::from_real_diag(&d);
            // closed form: the hyperplane sup of sigma_{n-1}(A^{-1}|H) drops the largest eigenvalue of A
            let dmax = d.iter().cloned().fold(f64::MIN, f64::max);
            let p = dmax / d.iter().product::<f64>();
            if (p - kappa).abs() < 1e-6 {
                continue;
            }
            let rep = subsolution_check(&a, &ctx, &SamplerConfig { samples: 512, ..SamplerConfig::default() }).unwrap();
            assert!((rep.p_exact - p).abs() < 1e-12);
            assert_eq!(rep.pass, p < kappa);
            assert!(rep.consistent);
            let all_rays_below = (0..n).all(|i| {
                let mut e = vec![C64::new(0.0, 0.0); n];
                e[i] = C64::new(1.0, 0.0);
                ray_limit(&a, &HermitianMatrix::outer(&e), &ctx).unwrap() < kappa
            });
            assert_eq!(all_rays_below, rep.pass);
            if rep.pass && ctx.f(&a).unwrap() >= kappa {
                for _ in 0..5 {
                    let b = HermitianMatrix::outer(&sample::unit_vector(n, &mut r));
                    assert!(solve_ray(&a, &b, &ctx).unwrap().is_some());
                }
            }
        }
    }

    #[test]
    fn splitting_sums_bounded_under_cone_condition() {
        let mut r = rng(18);
        let split = SplittingLabel::coordinate(&[(vec![0, 1], 1), (vec![2, 3], 2)]).unwrap();
        let n = 4;
        let rho = HermitianMatrix::identity(n);
        let stack = split.block_power_stack(&rho).unwrap();
        let split_ctx = OperatorContext::new(FormBundle::new(rho.clone(), stack[1..n].to_vec(), 0.0).unwrap(), 1.0).unwrap();
        for _ in 0..20 {
            let m = r.gen_range(0.2..2.0);
            let comps: Vec<FormComponent> = (1..n).map(|k| stack[k].scale(m).add(&sample::strongly_positive_form(n, k, &mut r).scale(0.3))).collect();
            let ctx0 = OperatorContext::new(FormBundle::new(rho.clone(), comps, 0.0).unwrap(), 1.0).unwrap();
            let a = sample::positive_definite(n, &mut r);
            let kappa = p_lambda_exact(&a, &ctx0).unwrap();
            let mm = a.inverse().unwrap();
            for _ in 0..10 {
                let b = sample::unit_vector(n, &mut r);
                assert!(hyperplane_value(mm.matrix(), &b, &split_ctx) <= kappa / m + 1e-9);
            }
            assert!(split_ctx.ring_value(mm.matrix()) <= n as f64 * kappa / m + 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn q_min_sign_matches_exact_supremum(seed in any::<u64>()) {
            let mut r = rng(seed);
            let n = r.gen_range(2..=4);
            let ctx0 = random_positive_ctx(n, &mut r);
            let a = sample::positive_definite(n, &mut r);
            let p = p_lambda_exact(&a, &ctx0).unwrap();
            let kappa = p * r.gen_range(0.5..1.5);
            let ctx = OperatorContext::new(ctx0.bundle.clone(), kappa).unwrap();
            let (q, _) = cone_q_min(&a, &ctx).unwrap();
            if (p - kappa).abs() > 1e-7 {
                prop_assert_eq!(q > 0.0, p < kappa);
            }
        }

        #[test]
        fn lower_dimensional_limits_stay_below_hyperplane_max(seed in any::<u64>()) {
            let mut r = rng(seed);
            let n = r.gen_range(3..=4);
            let ctx = random_positive_ctx(n, &mut r);
            let a = sample::positive_definite(n, &mut r);
            let p = p_lambda_exact(&a, &ctx).unwrap();
            let v = sample::psd_of_rank(n, r.gen_range(2..n), &mut r);
            prop_assert!(ray_limit(&a, &v, &ctx).unwrap() <= p + 1e-9);
        }

        #[test]
        fn supremum_properties(seed in any::<u64>()) {
            let mut r = rng(seed);
            let n = r.gen_range(2..=4);
            let ctx = random_positive_ctx(n, &mut r);
            let a0 = sample::positive_definite(n, &mut r);
            let a1 = sample::positive_definite(n, &mut r);
            let p = |a: &HermitianMatrix, c: &OperatorContext| p_lambda_exact(a, c).unwrap();
            // convex along segments
            let t: f64 = r.gen_range(0.0..1.0);
            let mid = a0.scale(1.0 - t).add(&a1.scale(t));
            prop_assert!(p(&mid, &ctx) <= (1.0 - t) * p(&a0, &ctx) + t * p(&a1, &ctx) + 1e-9);
            // antitone in A
            let bigger = a0.add(&sample::psd_of_rank(n, 1, &mut r));
            prop_assert!(p(&bigger, &ctx) <= p(&a0, &ctx) + 1e-9);
            // monotone and sublinear in Lambda
            let extra = OperatorContext::new(
                FormBundle::new(HermitianMatrix::identity(n), (1..n).map(|k| sample::strongly_positive_form(n, k, &mut r)).collect(), 0.0).unwrap(),
                1.0,
            ).unwrap();
            let sum = OperatorContext::new(ctx.bundle.add(&extra.bundle).unwrap(), 1.0).unwrap();
            prop_assert!(p(&a0, &sum) >= p(&a0, &ctx) - 1e-9);
            prop_assert!(p(&a0, &sum) <= p(&a0, &ctx) + p(&a0, &extra) + 1e-9);
            // independent of f
            let shifted = ctx.with_f(ctx.bundle.f + 7.0);
            prop_assert!((p(&a0, &shifted) - p(&a0, &ctx)).abs() <= 1e-12);
        }
    }
}
