//! Randomized checks of the sigma_k and splitting inequalities behind the
//! ellipticity estimates. Every check reports the largest normalized excess
//! of the side that should be smaller, so a value <= 0 (up to rounding) means
//! the inequality held on every instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cone::{gamma_min, hyperplane_inverse, p_lambda_exact};
use crate::forms::{FormBundle, SplittingLabel};
use crate::hermitian::{elementary_symmetric, sigma, sigma_linearized, CMat, HermitianMatrix, C64};
use crate::lift::{block_lower_bound, lift_bundle};
use crate::operator::OperatorContext;
use crate::sample;
use crate::Result;

/// Outcome of one inequality family.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub instances: usize,
    /// Largest (lhs - rhs) / max(1, |lhs|, |rhs|) over all instances, for
    /// inequalities written lhs <= rhs.
    pub max_violation: f64,
}

impl InequalityCheck {
    pub fn pass(&self, margin: f64) -> bool {
        self.max_violation <= margin
    }
}

struct Tally {
    name: &'static str,
    instances: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally { name, instances: 0, worst: f64::NEG_INFINITY }
    }

    /// Records lhs <= rhs.
    fn le(&mut self, lhs: f64, rhs: f64) {
        let scale = 1f64.max(lhs.abs()).max(rhs.abs());
        self.worst = self.worst.max((lhs - rhs) / scale);
    }

    /// Records lo <= hi in the Loewner order, normalized by the larger norm.
    fn loewner(&mut self, lo: &HermitianMatrix, hi: &HermitianMatrix) {
        let scale = 1f64.max(lo.frobenius()).max(hi.frobenius());
        self.worst = self.worst.max(-hi.sub(lo).min_eig() / scale);
    }

    fn done(self) -> InequalityCheck {
        InequalityCheck { name: self.name, instances: self.instances, max_violation: self.worst }
    }
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// An n x d matrix with orthonormal columns.
fn orthonormal_columns<R: Rng>(n: usize, d: usize, r: &mut R) -> CMat {
    let q = sample::complex_matrix(n, r).qr().q();
    q.columns(0, d).into()
}

/// Random composition of n into contiguous coordinate blocks.
fn random_blocks<R: Rng>(n: usize, r: &mut R) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let len = r.gen_range(1..=n - start);
        out.push((start..start + len).collect());
        start += len;
    }
    out
}

fn block_diagonal(a: &HermitianMatrix, blocks: &[Vec<usize>]) -> HermitianMatrix {
    let n = a.dim();
    let mut m = CMat::zeros(n, n);
    for b in blocks {
        for &i in b {
            for &j in b {
                m[(i, j)] = a.get(i, j);
            }
        }
    }
    HermitianMatrix::symmetrized(m)
}

/// sigma_l / sigma_k is decreasing in A for k >= l.
pub fn quotient_monotonicity(instances: usize, seed: u64) -> Result<InequalityCheck> {
    let mut r = rng(seed, 1);
    let mut t = Tally::new("sigma quotient decreasing");
    for _ in 0..instances {
        let n = r.gen_range(2..=5);
        let a = sample::positive_definite(n, &mut r);
        let b = sample::psd_of_rank(n, r.gen_range(1..=n), &mut r).scale(r.gen_range(0.01..2.0));
        let (ea, eb) = (elementary_symmetric(&a.eigenvalues()), elementary_symmetric(&a.add(&b).eigenvalues()));
        for k in 1..=n {
            for l in 0..k {
                t.le(eb[l] / eb[k], ea[l] / ea[k]);
            }
        }
        t.instances += 1;
    }
    Ok(t.done())
}

/// sigma_{l-r}(A|H) / sigma_{k-r}(A|H) <= sigma_l(A) / sigma_k(A) for a
/// subspace H of codimension r and k >= l >= r.
pub fn subspace_quotient(instances: usize, seed: u64) -> Result<InequalityCheck> {
    let mut r = rng(seed, 2);
    let mut t = Tally::new("restricted sigma quotient");
    for _ in 0..instances {
        let n = r.gen_range(2..=5);
        let a = sample::positive_definite(n, &mut r);
        let codim = r.gen_range(1..n);
        let u = orthonormal_columns(n, n - codim, &mut r);
        let ah = a.congruence(&u);
        let (e, eh) = (elementary_symmetric(&a.eigenvalues()), elementary_symmetric(&ah.eigenvalues()));
        for k in codim..=n {
            for l in codim..=k {
                t.le(eh[l - codim] / eh[k - codim], e[l] / e[k]);
            }
        }
        t.instances += 1;
    }
    Ok(t.done())
}

/// sigma_{r-1}(A) T_{k-1}(A) >= sigma_{k-1}(A) T_{r-1}(A) for r >= k.
pub fn linearized_ordering(instances: usize, seed: u64) -> Result<InequalityCheck> {
    let mut r = rng(seed, 3);
    let mut t = Tally::new("linearized sigma ordering");
    for _ in 0..instances {
        let n = r.gen_range(2..=5);
        let a = sample::positive_definite(n, &mut r);
        let e = elementary_symmetric(&a.eigenvalues());
        let lin = (1..=n).map(|k| sigma_linearized(&a, k)).collect::<Result<Vec<_>>>()?;
        for k in 1..=n {
            for rr in k..=n {
                t.loewner(&lin[rr - 1].scale(e[k - 1]), &lin[k - 1].scale(e[rr - 1]));
            }
        }
        t.instances += 1;
    }
    Ok(t.done())
}

/// sigma_k(A) <= sigma_k(A') for the block-diagonal part A', together with
/// the product expansion of sigma_k(A') over the blocks (checked as two-sided).
pub fn block_sigma_bound(instances: usize, seed: u64) -> Result<InequalityCheck> {
    let mut r = rng(seed, 4);
    let mut t = Tally::new("sigma_k of block-diagonal part");
    for _ in 0..instances {
        let n = r.gen_range(2..=5);
        let a = sample::positive_definite(n, &mut r);
        let blocks = random_blocks(n, &mut r);
        let ap = block_diagonal(&a, &blocks);
        let mut conv = vec![1.0];
        for b in &blocks {
            let eb = elementary_symmetric(&a.restrict(b).eigenvalues());
            let mut next = vec![0.0; conv.len() + eb.len() - 1];
            for (i, x) in conv.iter().enumerate() {
                for (j, y) in eb.iter().enumerate() {
                    next[i + j] += x * y;
                }
            }
            conv = next;
        }
        for k in 1..=n {
            let sp = sigma(&ap, k)?;
            t.le(sigma(&a, k)?, sp);
            t.le(sp, conv[k]);
            t.le(conv[k], sp);
        }
        t.instances += 1;
    }
    Ok(t.done())
}

/// T_{k-1}(A) <= 2^{(k-1)(n_p-1)} T_{k-1}(A') in the Loewner order.
pub fn block_linearized_bound(instances: usize, seed: u64) -> Result<InequalityCheck> {
    let mut r = rng(seed, 5);
    let mut t = Tally::new("linearized sigma of block-diagonal part");
    for _ in 0..instances {
        let n = r.gen_range(2..=5);
        let a = sample::positive_definite(n, &mut r);
        let blocks = random_blocks(n, &mut r);
        let ap = block_diagonal(&a, &blocks);
        let np = blocks.len() as i32;
        for k in 1..=n {
            let c = 2f64.powi((k as i32 - 1) * (np - 1));
            t.loewner(&sigma_linearized(&a, k)?, &sigma_linearized(&ap, k)?.scale(c));
        }
        t.instances += 1;
    }
    Ok(t.done())
}

/// A random instance with an O-UP datum: rho block diagonal over a coordinate
/// splitting, Lambda = m * (sum_i rho_i^{k_i}/k_i!) + strongly positive extra,
/// and kappa = P_Lambda(A), the tightest admissible value.
pub struct SplitInstance {
    pub split: SplittingLabel,
    pub rho: HermitianMatrix,
    pub m: f64,
    /// The full datum Lambda (f = 0).
    pub ctx: OperatorContext,
    /// The block datum sum_i rho_i^{k_i}/k_i!.
    pub split_ctx: OperatorContext,
    pub a: HermitianMatrix,
    pub kappa: f64,
}

impl SplitInstance {
    pub fn random<R: Rng>(n: usize, r: &mut R) -> Result<Self> {
        let blocks = random_blocks(n, r);
        let labelled: Vec<(Vec<usize>, usize)> =
            blocks.iter().map(|b| (b.clone(), r.gen_range(1..=b.len().min(n - 1)))).collect();
        let split = SplittingLabel::coordinate(&labelled)?;
        let mut rho = CMat::zeros(n, n);
        for b in &blocks {
            let rb = sample::positive_definite(b.len(), r);
            for (p, &i) in b.iter().enumerate() {
                for (q, &j) in b.iter().enumerate() {
                    rho[(i, j)] = rb.get(p, q);
                }
            }
        }
        let rho = HermitianMatrix::symmetrized(rho);
        split.validate(&rho)?;
        let stack = split.block_power_stack(&rho)?;
        let split_ctx = OperatorContext::new(FormBundle::new(rho.clone(), stack[1..n].to_vec(), 0.0)?, 1.0)?;
        let m = r.gen_range(0.2..2.0);
        let extra = r.gen_range(0.0..0.5);
        let comps = (1..n).map(|k| stack[k].scale(m).add(&sample::strongly_positive_form(n, k, r).scale(extra))).collect();
        let ctx = OperatorContext::new(FormBundle::new(rho.clone(), comps, 0.0)?, 1.0)?;
        let a = sample::positive_definite(n, r).scale(r.gen_range(0.3..3.0));
        let kappa = p_lambda_exact(&a, &ctx)?;
        Ok(SplitInstance { split, rho, m, ctx, split_ctx, a, kappa })
    }

    /// The split-datum value on the hyperplane b^perp.
    pub fn split_hyperplane_value(&self, b: &[C64]) -> Result<f64> {
        let m = self.a.inverse()?;
        Ok(self.split_ctx.ring_value(&hyperplane_inverse(m.matrix(), b)))
    }

    /// <Lambda, 2i xi ^ xibar ^ exp chi_B> for B = b^perp. The pairing is
    /// affine along rank-one updates of the dual matrix, so the difference
    /// quotient with unit step is exact.
    pub fn xi_pairing(&self, b: &[C64], xi: &[C64]) -> Result<f64> {
        let m = self.a.inverse()?;
        let mb = hyperplane_inverse(m.matrix(), b);
        let n = xi.len();
        let bumped = CMat::from_fn(n, n, |i, j| mb[(i, j)] + xi[i] * xi[j].conj());
        Ok(self.ctx.ring_value(&bumped) - self.ctx.ring_value(&mb))
    }

    /// |<xi, b>|^2 / (det A |b|^2_omega) with |b|^2_omega = b^* A^{-1} b,
    /// where det is relative to rho.
    pub fn weight(&self, b: &[C64], xi: &[C64]) -> Result<f64> {
        let m = self.a.inverse()?;
        let n = b.len();
        let bxi: C64 = (0..n).map(|i| b[i].conj() * xi[i]).sum();
        let bmb: C64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| b[i].conj() * m.get(i, j) * b[j]).sum();
        Ok(bxi.norm_sqr() / (self.a.det() / self.rho.det() * bmb.re))
    }
}

/// The splitting sums under the cone condition: on every hyperplane the
/// block datum is at most kappa/m, and at most n kappa/m on the full space.
pub fn splitting_sums(instances: usize, seed: u64) -> Result<[InequalityCheck; 2]> {
    let mut r = rng(seed, 6);
    let mut hyper = Tally::new("hyperplane splitting sum");
    let mut full = Tally::new("full splitting sum");
    for _ in 0..instances {
        let n = r.gen_range(2..=4);
        let inst = SplitInstance::random(n, &mut r)?;
        let bound = inst.kappa / inst.m;
        for _ in 0..8 {
            let b = sample::unit_vector(n, &mut r);
            hyper.le(inst.split_hyperplane_value(&b)?, bound);
        }
        full.le(inst.split_ctx.ring_value(inst.a.inverse()?.matrix()), n as f64 * bound);
        hyper.instances += 1;
        full.instances += 1;
    }
    Ok([hyper.done(), full.done()])
}

/// The constant the lower-bound argument actually produces:
///   c_0 min_i ratio^{1-1/k_i} / (ratio^{sum d_i/k_i} sum_i ratio^{-1/k_i}),
/// with c_0 the binomial prefactor shared with `gamma_min`. It agrees with
/// `gamma_min` at ratio = 1 and dominates it for ratio >= 1.
pub fn gamma_lower_bound(ratio: f64, d: &[usize], k: &[usize]) -> Result<f64> {
    let base = gamma_min(1.0, d.len(), d, k)? * d.len() as f64;
    let lead = d.iter().zip(k).map(|(_, &ki)| ratio.powf(1.0 - 1.0 / ki as f64)).fold(f64::INFINITY, f64::min);
    let expo: f64 = d.iter().zip(k).map(|(&di, &ki)| di as f64 / ki as f64).sum();
    let tail: f64 = k.iter().map(|&ki| ratio.powf(-1.0 / ki as f64)).sum();
    Ok(base * lead / (ratio.powf(expo) * tail))
}

/// The explicit lower bound for the xi-pairing on a hyperplane. The first
/// report uses `gamma_lower_bound` at kappa = P_Lambda(A); the second uses
/// `gamma_min` with kappa >= m, where the two constants are ordered.
pub fn xi_lower_bound(instances: usize, seed: u64) -> Result<[InequalityCheck; 2]> {
    let mut r = rng(seed, 7);
    let mut tight = Tally::new("xi pairing lower bound (derived constant)");
    let mut named = Tally::new("xi pairing lower bound (gamma_min, kappa >= m)");
    for _ in 0..instances {
        let n = r.gen_range(2..=4);
        let inst = SplitInstance::random(n, &mut r)?;
        let (d, k) = (inst.split.dims(), inst.split.labels());
        let g_tight = inst.m * gamma_lower_bound(inst.kappa / inst.m, &d, &k)?;
        let ratio = (inst.kappa / inst.m).max(1.0);
        let g_named = inst.m * gamma_min(ratio, d.len(), &d, &k)?;
        for _ in 0..8 {
            let b = sample::unit_vector(n, &mut r);
            let xi: Vec<C64> = (0..n).map(|_| sample::complex_normal(&mut r)).collect();
            let lhs = inst.xi_pairing(&b, &xi)?;
            let w = inst.weight(&b, &xi)?;
            tight.le(g_tight * w, lhs);
            named.le(g_named * w, lhs);
        }
        tight.instances += 1;
        named.instances += 1;
    }
    Ok([tight.done(), named.done()])
}

/// The lifted block lower bound F(A) >= F_1(H - D V^{-1} D^*) + F_2(V), with
/// the two-term identity it rests on checked two-sided.
pub fn lifted_block_bound(instances: usize, seed: u64) -> Result<InequalityCheck> {
    let mut r = rng(seed, 8);
    let mut t = Tally::new("lifted block lower bound");
    for _ in 0..instances {
        let d = r.gen_range(2..=3);
        let rho = sample::positive_definite(d, &mut r);
        let comps = (1..d).map(|k| sample::strongly_positive_form(d, k, &mut r)).collect();
        let inst = lift_bundle(&FormBundle::new(rho.clone(), comps, 0.0)?, &rho)?;
        let h = sample::positive_definite(d, &mut r).scale(2.0);
        let v = sample::positive_definite(d, &mut r).scale(2.0);
        // Couplings are resampled until A stays positive (H - D V^{-1} D^* > 0).
        let vinv = v.inverse()?;
        let dm = loop {
            let dm = sample::complex_matrix(d, &mut r) * C64::new(r.gen_range(0.0..0.5), 0.0);
            let schur = HermitianMatrix::symmetrized(h.matrix() - &dm * vinv.matrix() * dm.adjoint());
            if schur.min_eig() > 1e-3 {
                break dm;
            }
        };
        let b = block_lower_bound(&inst, &h, &dm, &v)?;
        t.le(b.rhs, b.lhs);
        t.le(b.lhs, b.two_term);
        t.le(b.two_term, b.lhs);
        t.instances += 1;
    }
    Ok(t.done())
}

/// Runs every family with the given instance count.
pub fn run_suite(instances: usize, seed: u64) -> Result<Vec<InequalityCheck>> {
    let mut out = vec![
        quotient_monotonicity(instances, seed)?,
        subspace_quotient(instances, seed)?,
        linearized_ordering(instances, seed)?,
        block_sigma_bound(instances, seed)?,
        block_linearized_bound(instances, seed)?,
    ];
    out.extend(splitting_sums(instances, seed)?);
    out.extend(xi_lower_bound(instances, seed)?);
    out.push(lifted_block_bound(instances, seed)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MARGIN: f64 = 1e-9;

    fn assert_holds(c: &InequalityCheck) {
        assert!(c.instances >= 200, "{}: {} instances", c.name, c.instances);
        assert!(c.pass(MARGIN), "{}: violation {:.3e}", c.name, c.max_violation);
    }

    #[test]
    fn sigma_inequalities_hold() {
        for c in [
            quotient_monotonicity(200, 1).unwrap(),
            subspace_quotient(200, 1).unwrap(),
            linearized_ordering(200, 1).unwrap(),
            block_sigma_bound(200, 1).unwrap(),
            block_linearized_bound(200, 1).unwrap(),
        ] {
            assert_holds(&c);
        }
    }

    #[test]
    fn splitting_inequalities_hold() {
        for c in splitting_sums(200, 2).unwrap().iter().chain(xi_lower_bound(200, 2).unwrap().iter()) {
            assert_holds(c);
        }
    }

    #[test]
    fn lifted_bound_holds() {
        assert_holds(&lifted_block_bound(200, 3).unwrap());
    }

    #[test]
    fn xi_bound_is_attained_for_the_scaled_identity() {
        // n = 2, one block with label 1, Lambda = m rho, A = 2I, b = e1:
        // the pairing is m |xi|^2 and the bound is m |xi_1|^2.
        let rho = HermitianMatrix::identity(2);
        let split = SplittingLabel::trivial(2, 1);
        let stack = split.block_power_stack(&rho).unwrap();
        let m = 0.7;
        let ctx = OperatorContext::new(FormBundle::new(rho.clone(), vec![stack[1].scale(m)], 0.0).unwrap(), 1.0).unwrap();
        let split_ctx = OperatorContext::new(FormBundle::new(rho.clone(), vec![stack[1].clone()], 0.0).unwrap(), 1.0).unwrap();
        let a = HermitianMatrix::identity(2).scale(2.0);
        let kappa = p_lambda_exact(&a, &ctx).unwrap();
        assert!((kappa - m / 2.0).abs() < 1e-14);
        let inst = SplitInstance { split, rho, m, ctx, split_ctx, a, kappa };
        let b = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let xi = [C64::new(0.3, 0.4), C64::new(0.0, 0.0)];
        let lhs = inst.xi_pairing(&b, &xi).unwrap();
        let rhs = m * gamma_lower_bound(kappa / m, &[2], &[1]).unwrap() * inst.weight(&b, &xi).unwrap();
        assert!((lhs - m * 0.25).abs() < 1e-14);
        assert!((lhs - rhs).abs() < 1e-14);
        // The named constant at the same ratio overshoots the attained value.
        let named = m * gamma_min(kappa / m, 1, &[2], &[1]).unwrap() * inst.weight(&b, &xi).unwrap();
        assert!(named > lhs * 3.9);
    }

    #[test]
    fn derived_constant_matches_gamma_min_at_unit_ratio() {
        for (d, k) in [(vec![3], vec![2]), (vec![2, 2], vec![1, 2]), (vec![1, 3], vec![1, 1])] {
            let a = gamma_lower_bound(1.0, &d, &k).unwrap();
            let b = gamma_min(1.0, d.len(), &d, &k).unwrap();
            assert!((a - b).abs() <= 1e-14 * b);
            for ratio in [1.5, 3.0, 10.0] {
                assert!(gamma_lower_bound(ratio, &d, &k).unwrap() >= gamma_min(ratio, d.len(), &d, &k).unwrap());
            }
        }
    }
}
