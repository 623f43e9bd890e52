//! Right-preconditioned BiCGStab for real linear systems given as closures.

/// Outcome of a Krylov solve.
#[derive(Clone, Debug)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves A x = b starting from x = 0, with right preconditioner P
/// (A P y = b, x = P y). Stops at relative residual `tol` or `max_iter`.
pub fn bicgstab(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, KrylovStats) {
    let len = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return (x, KrylovStats { iterations: 0, relative_residual: 0.0, converged: true });
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; len];
    let mut p = vec![0.0; len];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            return (x, KrylovStats { iterations: it, relative_residual: rel, converged: false });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..len {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precondition(&p);
        v = apply(&p_hat);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm(&s) / bnorm <= tol {
            for i in 0..len {
                x[i] += alpha * p_hat[i];
            }
            rel = norm(&s) / bnorm;
            return (x, KrylovStats { iterations: it, relative_residual: rel, converged: true });
        }
        let s_hat = precondition(&s);
        let t = apply(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..len {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return (x, KrylovStats { iterations: it, relative_residual: rel, converged: true });
        }
        if omega == 0.0 {
            break;
        }
    }
    (x, KrylovStats { iterations: max_iter, relative_residual: rel, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 40;
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 4.0 + i as f64 * 0.1 } else { r.gen_range(-0.1..0.1) }).collect())
            .collect();
        let x_true: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let apply = |x: &[f64]| -> Vec<f64> { a.iter().map(|row| dot(row, x)).collect() };
        let b = apply(&x_true);
        let diag: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        let (x, stats) = bicgstab(apply, |y: &[f64]| y.iter().zip(&diag).map(|(v, d)| v / d).collect(), &b, 1e-12, 200);
        assert!(stats.converged);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let (x, stats) = bicgstab(|y: &[f64]| y.to_vec(), |y: &[f64]| y.to_vec(), &[0.0; 5], 1e-10, 10);
        assert!(stats.converged && x.iter().all(|v| *v == 0.0));
    }
}
