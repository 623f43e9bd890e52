//! Constant-coefficient problems on flat tori and the continuity-method
//! Newton solver for the potential u with omega = omega0 + ddbar u.

use rayon::prelude::*;
use serde::Serialize;

use super::krylov::bicgstab;
use super::spectral::{Grid, HessianField};
use crate::cone::{cone_q_min, thresholds, PositivityThresholds};
use crate::error::{input, Error, Result};
use crate::forms::{power_form, FormBundle};
use crate::hermitian::{min_eig, CMat, HermitianMatrix, C64};
use crate::operator::OperatorContext;
use crate::variational::functional;

/// kappa from kappa int exp(omega0) = int Lambda ^ exp(omega0) on the unit
/// torus, with the volume density entering through its mean.
pub fn kappa_from_classes(omega0: &HermitianMatrix, bundle: &FormBundle, f_mean: f64) -> Result<f64> {
    let n = bundle.dim();
    if omega0.dim() != n {
        return input("omega0 and bundle dimensions differ");
    }
    let mut num = f_mean * bundle.rho.det();
    for c in bundle.components() {
        num += c.wedge(&power_form(omega0, n - c.degree(), 1.0))?.top_coefficient();
    }
    let kappa = num / omega0.det();
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::Model(format!("class normalization gives kappa = {kappa:.6e}, which is not positive")));
    }
    Ok(kappa)
}

/// The equation kappa omega^n/n! = sum_k Lambda^[k] ^ omega^{n-k}/(n-k)! + f rho^n/n!
/// on a periodic grid with constant rho, omega0 and lower-degree data.
#[derive(Clone, Debug)]
pub struct TorusProblem {
    pub grid: Grid,
    pub omega0: HermitianMatrix,
    /// Lower-degree components; `bundle.f` holds the mean of `f_grid`.
    pub bundle: FormBundle,
    pub f_grid: Vec<f64>,
    pub kappa: f64,
    ring: OperatorContext,
}

impl TorusProblem {
    /// Builds a problem, computing kappa from the classes when absent and
    /// checking the normalization to 1e-10 relative otherwise.
    pub fn new(grid: Grid, omega0: HermitianMatrix, bundle: FormBundle, f_grid: Vec<f64>, kappa: Option<f64>) -> Result<Self> {
        let n = grid.dim();
        if bundle.dim() != n || omega0.dim() != n {
            return input(format!("problem data must have dimension {n}"));
        }
        if f_grid.len() != grid.len() {
            return input(format!("f has {} values, grid has {}", f_grid.len(), grid.len()));
        }
        if !omega0.is_positive_definite() {
            return Err(Error::NotPositive { what: "omega0".into(), min_eig: omega0.min_eig() });
        }
        let f_mean = grid.mean(&f_grid);
        let bundle = bundle.with_f(f_mean);
        let from_classes = kappa_from_classes(&omega0, &bundle, f_mean)?;
        let kappa = match kappa {
            Some(k) if (k - from_classes).abs() > 1e-10 * from_classes.abs() => {
                return input(format!("kappa = {k} violates the class normalization (expected {from_classes})"));
            }
            Some(k) => k,
            None => from_classes,
        };
        let ring = OperatorContext::new(bundle.with_f(0.0), kappa)?;
        Ok(TorusProblem { grid, omega0, bundle, f_grid, kappa, ring })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn rho(&self) -> &HermitianMatrix {
        &self.bundle.rho
    }

    /// kappa_0 with kappa [omega0]^n = kappa_0 [rho]^n.
    pub fn kappa0(&self) -> f64 {
        self.kappa * self.omega0.det() / self.rho().det()
    }

    pub fn f_mean(&self) -> f64 {
        self.bundle.f
    }

    pub fn f_floor(&self) -> f64 {
        self.f_grid.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Operator context with the lower-degree data and kappa (no volume part).
    pub fn ring_context(&self) -> &OperatorContext {
        &self.ring
    }

    /// The problem on the continuity path at t: lower part scaled by t and
    /// density t f + (1 - t) kappa_0. kappa is unchanged.
    pub fn at(&self, t: f64) -> Result<TorusProblem> {
        if t == 1.0 {
            return Ok(self.clone());
        }
        let k0 = self.kappa0();
        let f_t: Vec<f64> = self.f_grid.iter().map(|f| t * f + (1.0 - t) * k0).collect();
        TorusProblem::new(self.grid.clone(), self.omega0.clone(), self.bundle.scale_lower(t), f_t, Some(self.kappa))
    }

    /// omega0 + ddbar u at every grid point, with the Hessian field.
    pub fn metrics(&self, u: &[f64]) -> (HessianField, Vec<CMat>) {
        let h = self.grid.complex_hessian(u);
        let a = (0..self.grid.len()).into_par_iter().map(|p| self.omega0.matrix() + h.at(p)).collect();
        (h, a)
    }

    fn point_state(&self, a: &CMat, p: usize) -> Result<PointState> {
        let lam = min_eig(a);
        if !(lam > 0.0) {
            return Err(Error::NotPositive { what: format!("omega at grid point {p}"), min_eig: lam });
        }
        let top = self.f_grid[p] * self.rho().det();
        let (value, grad) = self
            .ring
            .value_grad_with_top(a, top)
            .ok_or(Error::Singular { what: format!("omega at grid point {p}"), condition: f64::INFINITY })?;
        let minv = crate::hermitian::lu_inverse(a).expect("checked nonsingular above");
        let det = a.clone().determinant().re;
        Ok(PointState { value, grad, minv, det, min_eig: lam })
    }

    fn states(&self, u: &[f64]) -> Result<Vec<PointState>> {
        let (_, a) = self.metrics(u);
        a.par_iter().enumerate().map(|(p, m)| self.point_state(m, p)).collect()
    }

    /// Pointwise kappa - F(omega0 + ddbar u) with the local density.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.states(u)?.iter().map(|s| self.kappa - s.value).collect())
    }

    /// Smallest dual-cone eigenvalue over the grid with its location.
    pub fn cone_margin(&self, u: &[f64]) -> Result<(f64, usize)> {
        let (_, a) = self.metrics(u);
        let q: Vec<f64> = a
            .par_iter()
            .map(|m| cone_q_min(&HermitianMatrix::symmetrized(m.clone()), &self.ring).map(|x| x.0))
            .collect::<Result<_>>()?;
        Ok(argmin(&q))
    }

    /// Damped Newton iteration at fixed data from u0.
    pub fn newton_solve(&self, u0: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, NewtonStats)> {
        self.newton_with(u0, opts, false)
    }

    /// Newton with convergence measured either on sup|kappa - F| or, for
    /// problems inside the continuity path, on the part of det(A)(kappa - F)
    /// the Nyquist-free unknowns can reach. Aliased products leave an
    /// unreachable remainder there that vanishes only at t = 1.
    fn newton_with(&self, u0: &[f64], opts: &SolveOptions, projected: bool) -> Result<(Vec<f64>, NewtonStats)> {
        let measure = |st: &[PointState]| -> f64 {
            if projected {
                let raw: Vec<f64> = st.iter().map(|s| s.det * (self.kappa - s.value)).collect();
                self.grid.project(&raw).iter().map(|x| x.abs()).fold(0.0, f64::max)
            } else {
                sup_residual(st, self.kappa)
            }
        };
        let grid = &self.grid;
        let mut u = u0.to_vec();
        grid.remove_mean(&mut u);
        let mut states = self.states(&u)?;
        let mut rsup = measure(&states);
        let mut stats = NewtonStats { iterations: 0, krylov_iterations: 0, residual_sup: rsup, min_eig: min_of(&states) };
        while rsup > opts.tol {
            if stats.iterations >= opts.max_newton {
                return Err(Error::Stagnation { t: f64::NAN, reason: format!("no convergence in {} Newton steps (residual {rsup:.3e})", opts.max_newton) });
            }
            // linearization of N(u) = det(A) (kappa - F(A))
            let kappa = self.kappa;
            let coeffs: Vec<CMat> = states
                .par_iter()
                .map(|s| {
                    let k = s.minv.map(|z| z.conj()) * C64::new(kappa - s.value, 0.0) - &s.grad;
                    k * C64::new(s.det, 0.0)
                })
                .collect();
            let rhs_raw: Vec<f64> = states.iter().map(|s| -s.det * (kappa - s.value)).collect();
            let rhs = grid.project(&rhs_raw);
            let mut kbar = CMat::zeros(self.dim(), self.dim());
            for k in &coeffs {
                kbar += k;
            }
            kbar /= C64::new(coeffs.len() as f64, 0.0);
            let apply = |v: &[f64]| -> Vec<f64> {
                let h = grid.complex_hessian(v);
                let lv: Vec<f64> = (0..grid.len()).into_par_iter().map(|p| h.contract(p, &coeffs[p])).collect();
                grid.project(&lv)
            };
            let (delta, kstats) = bicgstab(apply, |y: &[f64]| grid.solve_constant(&kbar, y), &rhs, opts.krylov_tol, opts.krylov_max);
            stats.krylov_iterations += kstats.iterations;
            // backtracking on sup|residual| inside a trust region for the metric
            let mut lambda = 1.0;
            let floor = opts.trust * min_of(&states);
            let mut accepted = None;
            for _ in 0..opts.max_backtracks {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
                if let Ok(ts) = self.states(&trial) {
                    let r = measure(&ts);
                    if min_of(&ts) >= floor && r <= (1.0 - 1e-4 * lambda) * rsup {
                        accepted = Some((trial, ts, r));
                        break;
                    }
                }
                lambda *= opts.armijo;
            }
            let Some((trial, ts, r)) = accepted else {
                return Err(Error::Stagnation { t: f64::NAN, reason: format!("line search failed at residual {rsup:.3e}") });
            };
            u = trial;
            grid.remove_mean(&mut u);
            states = ts;
            rsup = r;
            stats.iterations += 1;
            stats.residual_sup = rsup;
            stats.min_eig = min_of(&states);
        }
        Ok((u, stats))
    }
}

struct PointState {
    value: f64,
    grad: CMat,
    minv: CMat,
    det: f64,
    min_eig: f64,
}

fn sup_residual(states: &[PointState], kappa: f64) -> f64 {
    states.iter().map(|s| (kappa - s.value).abs()).fold(0.0, f64::max)
}

fn min_of(states: &[PointState]) -> f64 {
    states.iter().map(|s| s.min_eig).fold(f64::INFINITY, f64::min)
}

fn argmin(v: &[f64]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, &x) in v.iter().enumerate() {
        if x < best.0 {
            best = (x, i);
        }
    }
    best
}

/// Manufactured problem: f is back-solved so that u_star is an exact discrete
/// solution.
pub fn manufactured_problem(grid: Grid, u_star: &[f64], bundle: FormBundle, omega0: HermitianMatrix, kappa: f64) -> Result<TorusProblem> {
    if u_star.len() != grid.len() {
        return input("u_star does not match the grid");
    }
    let ring = OperatorContext::new(bundle.with_f(0.0), kappa)?;
    let h = grid.complex_hessian(u_star);
    let det_rho = bundle.rho.det();
    let f: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let a = omega0.matrix() + h.at(p);
            let lam = min_eig(&a);
            if !(lam > 0.0) {
                return Err(Error::Input(format!("u_star is not admissible at grid point {p} (min eigenvalue {lam:.3e})")));
            }
            let m = crate::hermitian::lu_inverse(&a).ok_or_else(|| Error::Input("singular metric".into()))?;
            Ok((kappa - ring.ring_value(&m)) * a.determinant().re / det_rho)
        })
        .collect::<Result<_>>()?;
    TorusProblem::new(grid, omega0, bundle, f, Some(kappa))
}

/// Solver tolerances and schedule.
#[derive(Clone, Debug, Serialize)]
pub struct SolveOptions {
    /// Target sup|kappa - F| at t = 1.
    pub tol: f64,
    /// Target for the projected residual strictly inside the path.
    pub path_tol: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub max_newton: usize,
    pub max_backtracks: usize,
    pub armijo: f64,
    /// Accepted steps keep min eig(omega) above trust times its previous value.
    pub trust: f64,
    pub krylov_tol: f64,
    pub krylov_max: usize,
    /// Optional (m, k0) for reporting the density thresholds.
    pub uniform_positivity: Option<(f64, usize)>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            path_tol: 1e-10,
            dt0: 0.1,
            dt_min: 1e-4,
            max_newton: 20,
            max_backtracks: 12,
            armijo: 0.5,
            trust: 0.1,
            krylov_tol: 1e-10,
            krylov_max: 400,
            uniform_positivity: None,
        }
    }
}

/// Newton statistics at one value of t.
#[derive(Clone, Debug, Serialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub krylov_iterations: usize,
    pub residual_sup: f64,
    pub min_eig: f64,
}

/// One accepted continuity step.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub newton_iters: usize,
    pub krylov_iters: usize,
    pub residual_sup: f64,
    pub min_eig: f64,
    pub q_min: f64,
    pub functional: f64,
}

/// Hypotheses evaluated before solving (reported, not enforced).
#[derive(Clone, Debug, Serialize)]
pub struct Preflight {
    pub kappa: f64,
    pub kappa0: f64,
    pub f_mean: f64,
    pub f_floor: f64,
    /// Dual-cone margin of omega0 for the target data.
    pub omega0_q_min: f64,
    pub thresholds: Option<PositivityThresholds>,
    /// f_floor > -eps_h2prime when thresholds are available.
    pub density_ok: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    ConeExit { t: f64, point: usize, q_min: f64 },
    Stagnation { t: f64, reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveTrace {
    pub preflight: Preflight,
    pub steps: Vec<StepRecord>,
    pub total_newton: usize,
    pub status: SolveStatus,
}

/// Solution field and trace; `u` is the last accepted iterate.
#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub u: Vec<f64>,
    pub trace: SolveTrace,
}

impl SolveOutput {
    pub fn converged(&self) -> bool {
        matches!(self.trace.status, SolveStatus::Converged)
    }

    /// The field on convergence, the matching error otherwise.
    pub fn into_result(self) -> Result<Vec<f64>> {
        match self.trace.status {
            SolveStatus::Converged => Ok(self.u),
            SolveStatus::ConeExit { t, point, q_min } => Err(Error::ConeExit { t, point, q_min }),
            SolveStatus::Stagnation { t, reason } => Err(Error::Stagnation { t, reason }),
        }
    }
}

pub fn preflight(p: &TorusProblem, opts: &SolveOptions) -> Result<Preflight> {
    let (q, _) = cone_q_min(&p.omega0, p.ring_context())?;
    let th = match opts.uniform_positivity {
        Some((m, k0)) => Some(thresholds(p.ring_context(), k0, &[], m, &p.omega0)?),
        None => None,
    };
    let density_ok = th.as_ref().map(|t| p.f_floor() > -t.eps_h2prime);
    Ok(Preflight { kappa: p.kappa, kappa0: p.kappa0(), f_mean: p.f_mean(), f_floor: p.f_floor(), omega0_q_min: q, thresholds: th, density_ok })
}

fn record(p: &TorusProblem, t: f64, u: &[f64], stats: &NewtonStats) -> Result<(StepRecord, usize)> {
    let (q, point) = p.cone_margin(u)?;
    let rec = StepRecord {
        t,
        newton_iters: stats.iterations,
        krylov_iters: stats.krylov_iterations,
        residual_sup: stats.residual_sup,
        min_eig: stats.min_eig,
        q_min: q,
        functional: functional(u, p)?,
    };
    Ok((rec, point))
}

/// Continuity method along Lambda_t = t Lambda_ring + (t f + (1 - t) kappa_0) rho^n/n!
/// from u = 0 at t = 0. With `initial` the solver first tries Newton at t = 1
/// from that field and falls back to the path on failure or when the root
/// found violates the cone condition.
pub fn continuity_solve(p: &TorusProblem, opts: &SolveOptions, initial: Option<&[f64]>) -> Result<SolveOutput> {
    let pre = preflight(p, opts)?;
    let mut steps = Vec::new();
    let mut total = 0;
    let finish = |u: Vec<f64>, steps: Vec<StepRecord>, total: usize, status: SolveStatus| SolveOutput {
        u,
        trace: SolveTrace { preflight: pre.clone(), steps, total_newton: total, status },
    };
    if let Some(u0) = initial {
        if u0.len() != p.grid.len() {
            return input("initial field does not match the grid");
        }
        // a root outside the cone is not the admissible solution: use the path
        if let Ok((u, stats)) = p.newton_solve(u0, opts) {
            let (rec, _) = record(p, 1.0, &u, &stats)?;
            total += stats.iterations;
            if rec.q_min > 0.0 {
                return Ok(finish(u, vec![rec], total, SolveStatus::Converged));
            }
        }
    }
    let mut u = vec![0.0; p.grid.len()];
    let start = p.at(0.0)?;
    match start.newton_solve(&u, opts) {
        Ok((u0, stats)) => {
            total += stats.iterations;
            let (rec, point) = record(&start, 0.0, &u0, &stats)?;
            let q = rec.q_min;
            steps.push(rec);
            if q <= 0.0 {
                return Ok(finish(u0, steps, total, SolveStatus::ConeExit { t: 0.0, point, q_min: q }));
            }
            u = u0;
        }
        Err(Error::Stagnation { reason, .. }) => return Ok(finish(u, steps, total, SolveStatus::Stagnation { t: 0.0, reason })),
        Err(e) => return Err(e),
    }
    let mut t = 0.0;
    let mut dt = opts.dt0;
    while t < 1.0 {
        let t_try = if t + dt >= 1.0 - 1e-12 { 1.0 } else { t + dt };
        let pt = p.at(t_try)?;
        let inner = t_try < 1.0;
        let step_opts = if inner { SolveOptions { tol: opts.path_tol, ..opts.clone() } } else { opts.clone() };
        match pt.newton_with(&u, &step_opts, inner) {
            Ok((u_new, stats)) => {
                total += stats.iterations;
                let (rec, point) = record(&pt, t_try, &u_new, &stats)?;
                let q = rec.q_min;
                let iters = rec.newton_iters;
                if q <= 0.0 {
                    // the cone is lost somewhere in (t, t_try]: bisect towards it
                    dt *= 0.5;
                    if dt < opts.dt_min {
                        steps.push(rec);
                        return Ok(finish(u_new, steps, total, SolveStatus::ConeExit { t: t_try, point, q_min: q }));
                    }
                    continue;
                }
                steps.push(rec);
                u = u_new;
                t = t_try;
                if iters <= 2 {
                    dt = (2.0 * dt).min(0.5);
                }
            }
            Err(Error::Stagnation { reason, .. }) | Err(Error::NotPositive { what: reason, .. }) => {
                dt *= 0.5;
                if dt < opts.dt_min {
                    // distinguish loss of the cone condition from plain stagnation
                    let (q, point) = pt.cone_margin(&u)?;
                    let status = if q <= 0.0 {
                        SolveStatus::ConeExit { t: t_try, point, q_min: q }
                    } else {
                        SolveStatus::Stagnation { t: t_try, reason }
                    };
                    return Ok(finish(u, steps, total, status));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(finish(u, steps, total, SolveStatus::Converged))
}

/// Observational monitors for the a priori estimates.
#[derive(Clone, Debug, Serialize)]
pub struct MonitorReport {
    pub sup_u: f64,
    /// sup |ddbar u| measured in rho.
    pub sup_ddbar: f64,
    pub threshold: f64,
    pub mu: f64,
    /// Points with |ddbar u|_rho > threshold and the value of
    /// F^{i jbar} u_{i jbar} - mu (1 - sum F^{i ibar}) there.
    pub flagged: Vec<(usize, f64)>,
}

pub fn monitor_estimates(u: &[f64], p: &TorusProblem, threshold: f64, mu: f64) -> Result<MonitorReport> {
    let (h, _) = p.metrics(u);
    let rho = p.rho().matrix();
    let rho_inv = crate::hermitian::lu_inverse(rho).ok_or_else(|| Error::Input("singular rho".into()))?;
    let states = p.states(u)?;
    let sup_u = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let norms: Vec<f64> = (0..p.grid.len())
        .into_par_iter()
        .map(|q| {
            let x = &rho_inv * h.at(q);
            (&x * &x).trace().re.max(0.0).sqrt()
        })
        .collect();
    let sup_ddbar = norms.iter().cloned().fold(0.0, f64::max);
    let mut flagged = Vec::new();
    for (q, &nrm) in norms.iter().enumerate() {
        if nrm > threshold {
            let g = &states[q].grad;
            let lin = h.contract(q, g);
            let tr: f64 = (0..p.dim()).flat_map(|i| (0..p.dim()).map(move |j| (i, j))).map(|(i, j)| (g[(i, j)] * rho[(i, j)]).re).sum();
            flagged.push((q, lin - mu * (1.0 - tr)));
        }
    }
    Ok(MonitorReport { sup_u, sup_ddbar, threshold, mu, flagged })
}
