//! The global functional on potentials, its path integral form and second
//! variation, and regularized-maximum gluing of subsolution potentials.

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{cone_form, cone_q_min};
use crate::error::{input, Error, Result};
use crate::forms::{dual_cone_matrix, power_form, FormComponent};
use crate::hermitian::{CMat, HermitianMatrix, C64};
use crate::solver::torus::TorusProblem;

/// Top coefficient of (Lambda - kappa) ^ w for a mixed-degree form w given by
/// its components of degree 0..=n, with density f at this point.
fn pair_top(p: &TorusProblem, f: f64, w: &[FormComponent]) -> Result<f64> {
    let n = p.dim();
    let mut s = f * p.rho().det() * w[0].at(0, 0).re - p.kappa * w[n].top_coefficient();
    for c in p.bundle.components() {
        s += c.wedge(&w[n - c.degree()])?.top_coefficient();
    }
    Ok(s)
}

/// exp(omega0) ^ sum_k (ddbar phi)^k/(k+1)! by degree.
fn weighted_exponential(omega0: &HermitianMatrix, h: &HermitianMatrix) -> Result<Vec<FormComponent>> {
    let n = omega0.dim();
    let mut out: Vec<FormComponent> = (0..=n).map(|d| FormComponent::zero(n, d)).collect();
    for j in 0..=n {
        let a = power_form(omega0, j, 1.0);
        for k in 0..=(n - j) {
            out[j + k] = out[j + k].add(&a.wedge(&power_form(h, k, 1.0 / (k + 1) as f64))?);
        }
    }
    Ok(out)
}

/// The functional int phi (Lambda - kappa) ^ exp(omega0) ^ sum_k (ddbar phi)^k/(k+1)!
/// by grid quadrature.
pub fn functional(phi: &[f64], p: &TorusProblem) -> Result<f64> {
    let grid = &p.grid;
    if phi.len() != grid.len() {
        return input("potential does not match the grid");
    }
    let (h, a) = p.metrics(phi);
    let vals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|q| {
            let m = crate::hermitian::min_eig(&a[q]);
            if !(m > 0.0) {
                return Err(Error::NotPositive { what: format!("omega_phi at grid point {q}"), min_eig: m });
            }
            let w = weighted_exponential(&p.omega0, &HermitianMatrix::symmetrized(h.at(q)))?;
            Ok(phi[q] * pair_top(p, p.f_grid[q], &w)?)
        })
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / grid.len() as f64)
}

/// L2 gradient of the functional: the top coefficient of
/// (Lambda - kappa) ^ exp(omega_phi), i.e. det(A) (F(A) - kappa).
pub fn functional_gradient(phi: &[f64], p: &TorusProblem) -> Result<Vec<f64>> {
    let (_, a) = p.metrics(phi);
    let r = p.residual(phi)?;
    Ok(a.iter().zip(&r).map(|(m, r)| -m.determinant().re * r).collect())
}

/// Second derivative of the functional along phi0 + t (phi1 - phi0) at t:
/// int (kappa exp w - Lambda ^ exp w)^[n-1] ^ i dv ^ dbar v with v = phi1 - phi0.
pub fn second_variation(phi0: &[f64], phi1: &[f64], t: f64, p: &TorusProblem) -> Result<(f64, f64)> {
    let grid = &p.grid;
    let v: Vec<f64> = phi1.iter().zip(phi0).map(|(a, b)| a - b).collect();
    let phi: Vec<f64> = phi0.iter().zip(&v).map(|(a, d)| a + t * d).collect();
    let (_, a) = p.metrics(&phi);
    let dv = grid.gradient_z(&v);
    let n = p.dim();
    let per: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|q| {
            let am = HermitianMatrix::symmetrized(a[q].clone());
            let qm = dual_cone_matrix(&cone_form(&am, p.ring_context())?)?;
            let b: Vec<C64> = (0..n).map(|j| dv[j][q]).collect();
            let mut s = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    s += b[i].conj() * qm.get(i, j) * b[j];
                }
            }
            Ok((s.re, qm.min_eig()))
        })
        .collect::<Result<_>>()?;
    let value = per.iter().map(|x| x.0).sum::<f64>() / grid.len() as f64;
    let q_min = per.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    Ok((value, q_min))
}

/// One sample of a convexity scan.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexitySample {
    pub t: f64,
    pub second_variation: f64,
    /// Smallest dual-cone eigenvalue over the grid at this t.
    pub q_min: f64,
    /// The interpolated metric is a subsolution everywhere, so convexity is claimed.
    pub subsolution: bool,
}

/// Second variation at the sampled t along the segment from phi0 to phi1.
pub fn segment_convexity(phi0: &[f64], phi1: &[f64], p: &TorusProblem, ts: &[f64]) -> Result<Vec<ConvexitySample>> {
    ts.iter()
        .map(|&t| {
            let (v, q) = second_variation(phi0, phi1, t, p)?;
            Ok(ConvexitySample { t, second_variation: v, q_min: q, subsolution: q > 0.0 })
        })
        .collect()
}

/// Path of potentials given by nodes t_j with values and velocities. A node
/// repeated at the same t with a different velocity marks a corner.
#[derive(Clone, Debug)]
pub struct PotentialPath {
    pub nodes: Vec<PathNode>,
}

#[derive(Clone, Debug)]
pub struct PathNode {
    pub t: f64,
    pub phi: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl PotentialPath {
    /// Samples phi(t) and phi'(t) at `intervals + 1` equally spaced nodes.
    pub fn from_fn(intervals: usize, phi: impl Fn(f64) -> Vec<f64>, velocity: impl Fn(f64) -> Vec<f64>) -> Self {
        let nodes = (0..=intervals)
            .map(|j| {
                let t = j as f64 / intervals as f64;
                PathNode { t, phi: phi(t), velocity: velocity(t) }
            })
            .collect();
        PotentialPath { nodes }
    }

    /// t -> t phi.
    pub fn straight(phi: &[f64], intervals: usize) -> Self {
        Self::from_fn(intervals, |t| phi.iter().map(|x| t * x).collect(), |_| phi.to_vec())
    }

    /// 0 -> mid on [0, 1/2], then mid -> end on [1/2, 1]; `intervals` even.
    pub fn two_segment(mid: &[f64], end: &[f64], intervals: usize) -> Self {
        let half = intervals / 2;
        let v1: Vec<f64> = mid.iter().map(|x| 2.0 * x).collect();
        let v2: Vec<f64> = end.iter().zip(mid).map(|(e, m)| 2.0 * (e - m)).collect();
        let mut nodes = Vec::new();
        for j in 0..=half {
            let s = j as f64 / half as f64;
            nodes.push(PathNode { t: 0.5 * s, phi: mid.iter().map(|x| s * x).collect(), velocity: v1.clone() });
        }
        for j in 0..=half {
            let s = j as f64 / half as f64;
            let phi = mid.iter().zip(end).map(|(m, e)| m + s * (e - m)).collect();
            nodes.push(PathNode { t: 0.5 + 0.5 * s, phi, velocity: v2.clone() });
        }
        PotentialPath { nodes }
    }

    pub fn start(&self) -> &[f64] {
        &self.nodes[0].phi
    }

    pub fn end(&self) -> &[f64] {
        &self.nodes[self.nodes.len() - 1].phi
    }
}

/// Path integral value: plain composite trapezoid and, when every smooth
/// piece has an even number of intervals, its Richardson extrapolation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathIntegral {
    pub trapezoid: f64,
    pub richardson: Option<f64>,
}

impl PathIntegral {
    pub fn best(&self) -> f64 {
        self.richardson.unwrap_or(self.trapezoid)
    }
}

/// int_0^1 int phi' (Lambda - kappa) ^ exp(omega_phi) dt along the path.
pub fn path_functional(path: &PotentialPath, p: &TorusProblem) -> Result<PathIntegral> {
    if path.nodes.len() < 2 {
        return input("a path needs at least two nodes");
    }
    let g: Vec<f64> = path
        .nodes
        .iter()
        .map(|nd| {
            let grad = functional_gradient(&nd.phi, p)?;
            Ok(nd.velocity.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() / p.grid.len() as f64)
        })
        .collect::<Result<_>>()?;
    let mut pieces: Vec<Vec<usize>> = vec![vec![0]];
    for j in 1..path.nodes.len() {
        if path.nodes[j].t == path.nodes[j - 1].t {
            pieces.push(vec![j]);
        } else {
            pieces.last_mut().expect("nonempty").push(j);
        }
    }
    let mut trap = 0.0;
    let mut rich = Some(0.0);
    for piece in &pieces {
        let fine: f64 = piece.windows(2).map(|w| 0.5 * (path.nodes[w[1]].t - path.nodes[w[0]].t) * (g[w[0]] + g[w[1]])).sum();
        trap += fine;
        let intervals = piece.len() - 1;
        rich = match rich {
            Some(acc) if intervals % 2 == 0 && intervals > 0 => {
                let coarse: f64 = piece
                    .iter()
                    .step_by(2)
                    .collect::<Vec<_>>()
                    .windows(2)
                    .map(|w| 0.5 * (path.nodes[*w[1]].t - path.nodes[*w[0]].t) * (g[*w[0]] + g[*w[1]]))
                    .sum();
                Some(acc + (4.0 * fine - coarse) / 3.0)
            }
            Some(acc) if intervals == 0 => Some(acc),
            _ => None,
        };
    }
    Ok(PathIntegral { trapezoid: trap, richardson: rich })
}

/// |value(a) - value(b)| for two paths from 0 to phi.
pub fn path_independence_check(phi: &[f64], a: &PotentialPath, b: &PotentialPath, p: &TorusProblem) -> Result<f64> {
    for (name, path) in [("first", a), ("second", b)] {
        let end_gap = path.end().iter().zip(phi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let start_gap = path.start().iter().map(|x| x.abs()).fold(0.0, f64::max);
        if end_gap > 1e-12 || start_gap > 1e-12 {
            return input(format!("{name} path does not run from 0 to phi"));
        }
    }
    Ok((path_functional(a, p)?.best() - path_functional(b, p)?.best()).abs())
}

/// Smooth step: 0 below -1, 1 above 1, with Theta(x) + Theta(-x) = 1.
fn smooth_step(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / (1.0 + x) - 1.0 / (1.0 - x)).exp())
    }
}

/// The kernel theta = Theta': a C-infinity even bump on (-1, 1) with unit mass.
pub fn kernel(x: f64) -> f64 {
    if x <= -1.0 || x >= 1.0 {
        return 0.0;
    }
    let s = smooth_step(x);
    s * (1.0 - s) * (1.0 / ((1.0 + x) * (1.0 + x)) + 1.0 / ((1.0 - x) * (1.0 - x)))
}

const GL_NODES: usize = 64;

/// Value, gradient and Hessian of the regularized maximum.
#[derive(Clone, Debug)]
pub struct RegMax {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

fn gauss() -> &'static GaussLegendre {
    use std::sync::OnceLock;
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(GL_NODES).expect("valid degree"))
}

/// M_eta(t) = int max_j(t_j + h_j) prod_j theta(h_j/eta_j)/eta_j dh, evaluated
/// as U - int_L^U prod_j Theta((x - t_j)/eta_j) dx with U = max(t + eta) and
/// L = max(t - eta), together with its first and second derivatives.
pub fn regularized_max_full(values: &[f64], eta: &[f64]) -> Result<RegMax> {
    let k = values.len();
    if k == 0 || eta.len() != k {
        return input("regularized max needs matching nonempty values and slacks");
    }
    if eta.iter().any(|e| !(*e > 0.0)) {
        return input("slacks must be positive");
    }
    let upper = values.iter().zip(eta).map(|(t, e)| t + e).fold(f64::NEG_INFINITY, f64::max);
    let lower = values.iter().zip(eta).map(|(t, e)| t - e).fold(f64::NEG_INFINITY, f64::max);
    let mut cuts: Vec<f64> = vec![lower, upper];
    for (t, e) in values.iter().zip(eta) {
        for c in [t - e, *t, t + e] {
            if c > lower && c < upper {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let rule = gauss();
    let mut integral = 0.0;
    let mut grad = vec![0.0; k];
    let mut hess = vec![vec![0.0; k]; k];
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        for (x0, wt) in rule.iter() {
            let x = 0.5 * (a + b) + half * x0;
            let weight = wt * half;
            let steps: Vec<f64> = (0..k).map(|j| smooth_step((x - values[j]) / eta[j])).collect();
            let dens: Vec<f64> = (0..k).map(|j| kernel((x - values[j]) / eta[j]) / eta[j]).collect();
            let prod_except = |skip: &[usize]| -> f64 { (0..k).filter(|i| !skip.contains(i)).map(|i| steps[i]).product() };
            integral += weight * steps.iter().product::<f64>();
            for j in 0..k {
                if dens[j] == 0.0 {
                    continue;
                }
                grad[j] += weight * dens[j] * prod_except(&[j]);
                for l in (j + 1)..k {
                    if dens[l] != 0.0 {
                        let v = -weight * dens[j] * dens[l] * prod_except(&[j, l]);
                        hess[j][l] += v;
                        hess[l][j] += v;
                    }
                }
            }
        }
    }
    for j in 0..k {
        hess[j][j] = -(0..k).filter(|&l| l != j).map(|l| hess[j][l]).sum::<f64>();
    }
    Ok(RegMax { value: upper - integral, grad, hess })
}

pub fn regularized_max(values: &[f64], eta: &[f64]) -> Result<f64> {
    Ok(regularized_max_full(values, eta)?.value)
}

/// A potential with the grid mask of its domain.
#[derive(Clone, Debug)]
pub struct MaskedPotential {
    pub u: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Glued potential and its cone audit.
#[derive(Clone, Debug, Serialize)]
pub struct GlueReport {
    #[serde(skip)]
    pub u: Vec<f64>,
    #[serde(skip)]
    pub metrics: Vec<CMat>,
    /// Smallest dual-cone eigenvalue of the glued metric over the grid.
    pub q_min: f64,
    pub q_min_point: usize,
    /// Smallest dual-cone eigenvalue of each input over its mask.
    pub input_q_min: Vec<f64>,
}

/// Grid points of the mask with a neighbour (one step along any real axis)
/// outside it.
pub fn mask_boundary(grid: &crate::solver::Grid, mask: &[bool]) -> Vec<usize> {
    let size = grid.size();
    let axes = 2 * grid.dim();
    (0..grid.len())
        .filter(|&p| {
            mask[p]
                && (0..axes).any(|a| {
                    let stride = size.pow((axes - 1 - a) as u32);
                    let idx = (p / stride) % size;
                    let up = p - idx * stride + ((idx + 1) % size) * stride;
                    let down = p - idx * stride + ((idx + size - 1) % size) * stride;
                    !mask[up] || !mask[down]
                })
        })
        .collect()
}

/// Pointwise regularized max of potentials over the masks covering each
/// point, with the metric omega0 + ddbar(glue) from the chain rule.
/// Each potential must drop out near the edge of its mask:
/// u_b + eta_b <= max over other covering potentials of (u_a - eta_a).
pub fn glue_subsolutions(potentials: &[MaskedPotential], eta: &[f64], p: &TorusProblem) -> Result<GlueReport> {
    let grid = &p.grid;
    let len = grid.len();
    if potentials.is_empty() || eta.len() != potentials.len() {
        return input("gluing needs one slack per potential");
    }
    if potentials.iter().any(|q| q.u.len() != len || q.mask.len() != len) {
        return input("potentials and masks must match the grid");
    }
    if let Some(pt) = (0..len).find(|&x| potentials.iter().all(|q| !q.mask[x])) {
        return input(format!("grid point {pt} is not covered by any mask"));
    }
    let mut violations = Vec::new();
    for (b, pb) in potentials.iter().enumerate() {
        for z in mask_boundary(grid, &pb.mask) {
            let others = potentials
                .iter()
                .enumerate()
                .filter(|(a, pa)| *a != b && pa.mask[z])
                .map(|(a, pa)| pa.u[z] - eta[a])
                .fold(f64::NEG_INFINITY, f64::max);
            if pb.u[z] + eta[b] > others {
                violations.push(z);
            }
        }
    }
    if !violations.is_empty() {
        violations.sort_unstable();
        violations.dedup();
        return Err(Error::Domination { count: violations.len(), first: violations[0] });
    }
    let hessians: Vec<_> = potentials.iter().map(|q| grid.complex_hessian(&q.u)).collect();
    let grads: Vec<_> = potentials.iter().map(|q| grid.gradient_z(&q.u)).collect();
    let n = p.dim();
    let ring = p.ring_context();
    let per: Vec<(f64, CMat, f64)> = (0..len)
        .into_par_iter()
        .map(|x| {
            let active: Vec<usize> = (0..potentials.len()).filter(|&i| potentials[i].mask[x]).collect();
            let vals: Vec<f64> = active.iter().map(|&i| potentials[i].u[x]).collect();
            let etas: Vec<f64> = active.iter().map(|&i| eta[i]).collect();
            let rm = regularized_max_full(&vals, &etas)?;
            let mut a = p.omega0.matrix().clone();
            for (ja, &j) in active.iter().enumerate() {
                a += hessians[j].at(x) * C64::new(rm.grad[ja], 0.0);
                for (la, &l) in active.iter().enumerate() {
                    let c = rm.hess[ja][la];
                    if c != 0.0 {
                        a += CMat::from_fn(n, n, |r, s| grads[j][r][x] * grads[l][s][x].conj()) * C64::new(c, 0.0);
                    }
                }
            }
            let a = HermitianMatrix::symmetrized(a);
            let q = cone_q_min(&a, ring)?.0;
            Ok((rm.value, a.into_matrix(), q))
        })
        .collect::<Result<_>>()?;
    let input_q_min = potentials
        .iter()
        .enumerate()
        .map(|(i, pot)| {
            let qs: Vec<f64> = (0..len)
                .into_par_iter()
                .filter(|&x| pot.mask[x])
                .map(|x| cone_q_min(&HermitianMatrix::symmetrized(p.omega0.matrix() + hessians[i].at(x)), ring).map(|r| r.0))
                .collect::<Result<_>>()?;
            Ok(qs.into_iter().fold(f64::INFINITY, f64::min))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut q_min = f64::INFINITY;
    let mut q_min_point = 0;
    for (x, item) in per.iter().enumerate() {
        if item.2 < q_min {
            q_min = item.2;
            q_min_point = x;
        }
    }
    let (u, metrics): (Vec<f64>, Vec<CMat>) = per.into_iter().map(|(v, a, _)| (v, a)).unzip();
    Ok(GlueReport { u, metrics, q_min, q_min_point, input_q_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::FormBundle;
    use crate::solver::{torus::manufactured_problem, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn j_problem(size: usize) -> (TorusProblem, Vec<f64>) {
        let grid = Grid::new(2, size).unwrap();
        let rho = HermitianMatrix::identity(2);
        let b = FormBundle::new(rho.clone(), vec![power_form(&rho, 1, 1.0)], 0.0).unwrap();
        let u = grid.sample(|x| 0.03 * (2.0 * PI * (x[0] + x[3])).sin() + 0.02 * (2.0 * PI * x[1]).cos());
        (manufactured_problem(grid, &u, b, HermitianMatrix::identity(2), 3.0).unwrap(), u)
    }

    fn random_field(grid: &Grid, r: &mut ChaCha8Rng, amp: f64) -> Vec<f64> {
        let c: Vec<f64> = (0..6).map(|_| r.gen_range(-1.0..1.0)).collect();
        grid.sample(|x| {
            amp * (c[0] * (2.0 * PI * x[0]).sin() + c[1] * (2.0 * PI * (x[1] - x[2])).cos() + c[2] * (2.0 * PI * x[3]).sin() + c[3] * (2.0 * PI * (x[0] + x[2])).cos() + c[4] + c[5] * (2.0 * PI * x[1]).sin())
        })
    }

    #[test]
    fn functional_zero_and_constants() {
        let (p, _) = j_problem(8);
        let len = p.grid.len();
        assert_eq!(functional(&vec![0.0; len], &p).unwrap(), 0.0);
        assert!(functional(&vec![0.7; len], &p).unwrap().abs() < 1e-12);
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let phi = random_field(&p.grid, &mut r, 0.02);
        let shifted: Vec<f64> = phi.iter().map(|x| x + 1.3).collect();
        assert!((functional(&phi, &p).unwrap() - functional(&shifted, &p).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn straight_path_matches_closed_form() {
        let (p, _) = j_problem(8);
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let phi = random_field(&p.grid, &mut r, 0.02);
        let closed = functional(&phi, &p).unwrap();
        let path = path_functional(&PotentialPath::straight(&phi, 64), &p).unwrap();
        assert!((path.best() - closed).abs() <= 1e-8 * closed.abs().max(1e-12));
    }

    #[test]
    fn gradient_matches_directional_derivative() {
        let (p, _) = j_problem(8);
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let phi = random_field(&p.grid, &mut r, 0.02);
        let grad = functional_gradient(&phi, &p).unwrap();
        for _ in 0..3 {
            let mut v = random_field(&p.grid, &mut r, 1.0);
            p.grid.remove_mean(&mut v);
            let h = 1e-5;
            let plus: Vec<f64> = phi.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = phi.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let fd = (functional(&plus, &p).unwrap() - functional(&minus, &p).unwrap()) / (2.0 * h);
            let an = v.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() / p.grid.len() as f64;
            assert!((fd - an).abs() <= 1e-7 * an.abs().max(1e-9), "{fd} vs {an}");
        }
    }

    #[test]
    fn second_variation_matches_finite_difference() {
        let (p, _) = j_problem(8);
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let phi0 = random_field(&p.grid, &mut r, 0.02);
        let phi1 = random_field(&p.grid, &mut r, 0.02);
        let at = |t: f64| -> f64 {
            let phi: Vec<f64> = phi0.iter().zip(&phi1).map(|(a, b)| a + t * (b - a)).collect();
            functional(&phi, &p).unwrap()
        };
        let t = 0.4;
        let h = 1e-3;
        let fd = (at(t + h) - 2.0 * at(t) + at(t - h)) / (h * h);
        let (an, q) = second_variation(&phi0, &phi1, t, &p).unwrap();
        assert!(q > 0.0 && an > 0.0);
        assert!((fd - an).abs() <= 1e-5 * an, "{fd} vs {an}");
    }

    #[test]
    fn convexity_scan_and_constant_shift() {
        let (p, _) = j_problem(8);
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let phi0 = random_field(&p.grid, &mut r, 0.02);
        let phi1 = random_field(&p.grid, &mut r, 0.02);
        let ts: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        for s in segment_convexity(&phi0, &phi1, &p, &ts).unwrap() {
            assert!(s.subsolution && s.second_variation >= -1e-10);
        }
        let shifted: Vec<f64> = phi0.iter().map(|x| x + 2.0).collect();
        for s in segment_convexity(&phi0, &shifted, &p, &ts).unwrap() {
            assert!(s.second_variation.abs() < 1e-14);
        }
    }

    #[test]
    fn path_independence_examples() {
        let (p, _) = j_problem(8);
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let phi = random_field(&p.grid, &mut r, 0.02);
        let mid = random_field(&p.grid, &mut r, 0.02);
        let straight = PotentialPath::straight(&phi, 64);
        let bent = PotentialPath::two_segment(&mid, &phi, 64);
        assert!(path_independence_check(&phi, &straight, &bent, &p).unwrap() <= 1e-7);
        // reparametrized straight path t -> t^2 phi
        let repar = PotentialPath::from_fn(64, |t| phi.iter().map(|x| t * t * x).collect(), |t| phi.iter().map(|x| 2.0 * t * x).collect());
        assert!(path_independence_check(&phi, &straight, &repar, &p).unwrap() <= 1e-9);
        assert!(path_independence_check(&mid, &straight, &repar, &p).is_err());
    }

    #[test]
    fn trapezoid_error_is_second_order() {
        let (p, _) = j_problem(8);
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let phi = random_field(&p.grid, &mut r, 0.02);
        let exact = functional(&phi, &p).unwrap();
        let curved = |m: usize| {
            PotentialPath::from_fn(m, |t| phi.iter().map(|x| (0.5 * PI * t).sin() * x).collect(), |t| phi.iter().map(|x| 0.5 * PI * (0.5 * PI * t).cos() * x).collect())
        };
        let e1 = (path_functional(&curved(16), &p).unwrap().trapezoid - exact).abs();
        let e2 = (path_functional(&curved(32), &p).unwrap().trapezoid - exact).abs();
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn kernel_has_unit_mass_and_zero_moment() {
        let rule = GaussLegendre::new(200).unwrap();
        let mass = rule.integrate(-1.0, 1.0, kernel);
        let moment = rule.integrate(-1.0, 1.0, |x| x * kernel(x));
        assert!((mass - 1.0).abs() < 1e-10 && moment.abs() < 1e-14);
    }

    #[test]
    fn regularized_max_properties() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        assert!((regularized_max(&[0.37], &[0.2]).unwrap() - 0.37).abs() < 1e-15);
        for _ in 0..200 {
            let k = r.gen_range(1..=4);
            let t: Vec<f64> = (0..k).map(|_| r.gen_range(-1.0..1.0)).collect();
            let e: Vec<f64> = (0..k).map(|_| r.gen_range(0.05..0.5)).collect();
            let m = regularized_max(&t, &e).unwrap();
            let lo = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let hi = t.iter().zip(&e).map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
            assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
            let c = r.gen_range(-3.0..3.0);
            let shifted: Vec<f64> = t.iter().map(|x| x + c).collect();
            assert!((regularized_max(&shifted, &e).unwrap() - m - c).abs() < 1e-12);
        }
    }

    #[test]
    fn regularized_max_derivatives_match_finite_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let k = r.gen_range(2..=3);
            let t: Vec<f64> = (0..k).map(|_| r.gen_range(-0.2..0.2)).collect();
            let e: Vec<f64> = (0..k).map(|_| r.gen_range(0.1..0.5)).collect();
            let full = regularized_max_full(&t, &e).unwrap();
            assert!((full.grad.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let h = 1e-5;
            for j in 0..k {
                let mut tp = t.clone();
                tp[j] += h;
                let mut tm = t.clone();
                tm[j] -= h;
                let fp = regularized_max_full(&tp, &e).unwrap();
                let fm = regularized_max_full(&tm, &e).unwrap();
                assert!(((fp.value - fm.value) / (2.0 * h) - full.grad[j]).abs() < 1e-7);
                for l in 0..k {
                    assert!(((fp.grad[l] - fm.grad[l]) / (2.0 * h) - full.hess[j][l]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn dominated_argument_drops_out() {
        let mut r = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let k = r.gen_range(2..=4);
            let mut t: Vec<f64> = (0..k).map(|_| r.gen_range(-1.0..1.0)).collect();
            let e: Vec<f64> = (0..k).map(|_| r.gen_range(0.05..0.3)).collect();
            let top = (1..k).map(|j| t[j] - e[j]).fold(f64::NEG_INFINITY, f64::max);
            t[0] = top - e[0] - r.gen_range(0.0..0.5);
            let with = regularized_max(&t, &e).unwrap();
            let without = regularized_max(&t[1..], &e[1..]).unwrap();
            assert!((with - without).abs() <= 1e-12);
        }
    }

    #[test]
    fn glue_two_shifted_subsolutions() {
        let (p, _) = j_problem(8);
        let grid = &p.grid;
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let base = random_field(grid, &mut r, 0.01);
        // u1 dominates on x1 < 1/2, u2 on x1 >= 1/2, with a smooth crossover
        let bump = grid.sample(|x| 0.3 * (2.0 * PI * x[0]).sin() * 0.02);
        let u1: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let u2: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a - b).collect();
        let full = vec![true; grid.len()];
        let pots = vec![MaskedPotential { u: u1.clone(), mask: full.clone() }, MaskedPotential { u: u2, mask: full }];
        let rep = glue_subsolutions(&pots, &[0.002, 0.002], &p).unwrap();
        assert!(rep.q_min >= rep.input_q_min.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-8);
        // gluing a potential with itself shifts it by at most eta
        let twin = vec![MaskedPotential { u: u1.clone(), mask: vec![true; grid.len()] }, MaskedPotential { u: u1.clone(), mask: vec![true; grid.len()] }];
        let rep = glue_subsolutions(&twin, &[0.01, 0.01], &p).unwrap();
        assert!(rep.u.iter().zip(&u1).all(|(g, u)| g - u >= -1e-12 && g - u <= 0.01 + 1e-12));
    }

    #[test]
    fn glue_refuses_non_dominated_inputs() {
        let (p, _) = j_problem(8);
        let len = p.grid.len();
        let half: Vec<bool> = (0..len).map(|x| p.grid.coords(x)[0] < 0.5).collect();
        let pots = vec![
            MaskedPotential { u: vec![0.0; len], mask: vec![true; len] },
            MaskedPotential { u: vec![1.0; len], mask: half },
        ];
        match glue_subsolutions(&pots, &[0.1, 0.1], &p) {
            Err(Error::Domination { count, .. }) => assert!(count > 0),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn regularized_max_is_monotone_and_convex() {
        let mut r = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let k = r.gen_range(2..=4);
            let t: Vec<f64> = (0..k).map(|_| r.gen_range(-0.3..0.3)).collect();
            let e: Vec<f64> = (0..k).map(|_| r.gen_range(0.05..0.4)).collect();
            let full = regularized_max_full(&t, &e).unwrap();
            assert!(full.grad.iter().all(|g| *g >= -1e-14));
            for _ in 0..5 {
                let v: Vec<f64> = (0..k).map(|_| r.gen_range(-1.0..1.0)).collect();
                let q: f64 = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| v[i] * full.hess[i][j] * v[j]).sum();
                assert!(q >= -1e-10, "{q}");
            }
        }
    }

    mod props {
        use super::super::regularized_max;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn regularized_max_is_bracketed_and_shift_equivariant(
                t in prop::collection::vec(-2.0f64..2.0, 1..5),
                e in prop::collection::vec(0.01f64..0.5, 5),
                c in -3.0f64..3.0,
            ) {
                let e = &e[..t.len()];
                let m = regularized_max(&t, e).unwrap();
                let lo = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let hi = t.iter().zip(e).map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo - 1e-12 <= m && m <= hi + 1e-12);
                let moved: Vec<f64> = t.iter().map(|x| x + c).collect();
                prop_assert!((regularized_max(&moved, e).unwrap() - m - c).abs() <= 1e-12);
            }
        }
    }
}
