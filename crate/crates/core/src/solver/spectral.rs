//! Periodic grids on the flat torus C^n / (Z^n + iZ^n) and spectral
//! differentiation.
//!
//! Real axes are ordered (x_1, y_1, ..., x_n, y_n) with z_j = x_j + i y_j and
//! unit period on each axis; the last axis varies fastest in flat indices.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{input, Result};
use crate::hermitian::{CMat, C64};

/// Uniform periodic grid with N points per real axis.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    size: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    backward: Arc<dyn Fft<f64>>,
    /// Complex wave vector w_j = k_{x_j} + i k_{y_j} per mode; None on
    /// Nyquist modes, which spectral derivatives discard.
    modes: Vec<Option<Vec<C64>>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("size", &self.size).finish()
    }
}

impl Grid {
    pub fn new(n: usize, size: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return input(format!("torus dimension must be 1..=3, got {n}"));
        }
        if size < 4 || !size.is_multiple_of(2) {
            return input(format!("grid size must be even and at least 4, got {size}"));
        }
        if n == 3 && size > 8 {
            return input("n = 3 grids are limited to N <= 8");
        }
        if n == 2 && size > 64 {
            return input("n = 2 grids are limited to N <= 64");
        }
        let len = size.pow(2 * n as u32);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let backward = planner.plan_fft_inverse(size);
        let mut g = Grid { n, size, len, forward, backward, modes: Vec::new() };
        g.modes = (0..len)
            .map(|p| {
                let idx = g.multi_index(p);
                if idx.iter().any(|&m| 2 * m == size) {
                    return None;
                }
                let k: Vec<f64> = idx.iter().map(|&m| g.wavenumber(m)).collect();
                Some((0..n).map(|j| C64::new(k[2 * j], k[2 * j + 1])).collect())
            })
            .collect();
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Points per real axis.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Total number of grid points N^{2n}.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn wavenumber(&self, m: usize) -> f64 {
        if 2 * m < self.size {
            m as f64
        } else {
            m as f64 - self.size as f64
        }
    }

    /// Per-axis indices of flat index p.
    pub fn multi_index(&self, mut p: usize) -> Vec<usize> {
        let axes = 2 * self.n;
        let mut idx = vec![0; axes];
        for a in (0..axes).rev() {
            idx[a] = p % self.size;
            p /= self.size;
        }
        idx
    }

    /// Real coordinates (x_1, y_1, ...) of grid point p in [0, 1)^{2n}.
    pub fn coords(&self, p: usize) -> Vec<f64> {
        self.multi_index(p).iter().map(|&m| m as f64 / self.size as f64).collect()
    }

    /// Samples g at every grid point.
    pub fn sample(&self, g: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        (0..self.len).into_par_iter().map(|p| g(&self.coords(p))).collect()
    }

    pub fn mean(&self, u: &[f64]) -> f64 {
        u.iter().sum::<f64>() / self.len as f64
    }

    /// Subtracts the mean in place.
    pub fn remove_mean(&self, u: &mut [f64]) {
        let m = self.mean(u);
        u.iter_mut().for_each(|x| *x -= m);
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let axes = 2 * self.n;
        let size = self.size;
        let mut line = vec![C64::new(0.0, 0.0); size];
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for a in 0..axes {
            let stride = size.pow((axes - 1 - a) as u32);
            let block = stride * size;
            for b in 0..self.len / block {
                for inner in 0..stride {
                    let start = b * block + inner;
                    for (m, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + m * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (m, v) in line.iter().enumerate() {
                        data[start + m * stride] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform of a real field.
    pub fn forward(&self, u: &[f64]) -> Vec<C64> {
        let mut data: Vec<C64> = u.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform including the 1/len normalization.
    pub fn inverse(&self, mut data: Vec<C64>) -> Vec<C64> {
        self.transform(&mut data, &self.backward);
        let s = 1.0 / self.len as f64;
        data.iter_mut().for_each(|z| *z *= s);
        data
    }

    /// Complex Hessian u_{i jbar} of a real periodic field, with symbol
    /// -pi^2 conj(w_i) w_j and Nyquist modes dropped.
    pub fn complex_hessian(&self, u: &[f64]) -> HessianField {
        let hat = self.forward(u);
        let n = self.n;
        let mut entries = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let spec: Vec<C64> = hat
                    .iter()
                    .zip(&self.modes)
                    .map(|(h, w)| match w {
                        Some(w) => h * w[i].conj() * w[j] * (-PI * PI),
                        None => C64::new(0.0, 0.0),
                    })
                    .collect();
                let mut field = self.inverse(spec);
                if i == j {
                    field.iter_mut().for_each(|z| z.im = 0.0);
                }
                entries.push(field);
            }
        }
        HessianField { n, entries }
    }

    /// Holomorphic gradient (du/dz_1, ..., du/dz_n) with symbol pi i conj(w_j).
    pub fn gradient_z(&self, u: &[f64]) -> Vec<Vec<C64>> {
        let hat = self.forward(u);
        (0..self.n)
            .map(|j| {
                let spec: Vec<C64> = hat
                    .iter()
                    .zip(&self.modes)
                    .map(|(h, w)| match w {
                        Some(w) => h * w[j].conj() * C64::new(0.0, PI),
                        None => C64::new(0.0, 0.0),
                    })
                    .collect();
                self.inverse(spec)
            })
            .collect()
    }

    /// Solves sum K_{ij} v_{i jbar} = r for mean-zero v with constant Hermitian
    /// K; the mean and Nyquist content of r are discarded.
    pub fn solve_constant(&self, k: &CMat, r: &[f64]) -> Vec<f64> {
        let hat = self.forward(r);
        let spec: Vec<C64> = hat
            .iter()
            .zip(&self.modes)
            .map(|(h, w)| match w {
                Some(w) if w.iter().any(|z| z.norm_sqr() > 0.0) => {
                    let mut q = C64::new(0.0, 0.0);
                    for i in 0..self.n {
                        for j in 0..self.n {
                            q += w[i].conj() * k[(i, j)] * w[j];
                        }
                    }
                    h / (q.re * -PI * PI)
                }
                _ => C64::new(0.0, 0.0),
            })
            .collect();
        self.inverse(spec).iter().map(|z| z.re).collect()
    }

    /// Drops the mean and Nyquist modes of a real field.
    pub fn project(&self, r: &[f64]) -> Vec<f64> {
        let hat = self.forward(r);
        let spec: Vec<C64> = hat
            .iter()
            .zip(&self.modes)
            .enumerate()
            .map(|(p, (h, w))| if p == 0 || w.is_none() { C64::new(0.0, 0.0) } else { *h })
            .collect();
        self.inverse(spec).iter().map(|z| z.re).collect()
    }
}

/// The upper triangle (i <= j, row-major) of a Hermitian matrix field.
#[derive(Clone, Debug)]
pub struct HessianField {
    n: usize,
    entries: Vec<Vec<C64>>,
}

impl HessianField {
    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        // position of (i, j), i <= j, in the packed upper triangle
        i * self.n - i * (i + 1) / 2 + j
    }

    /// Entry (i, j) at grid point p.
    pub fn get(&self, p: usize, i: usize, j: usize) -> C64 {
        if i <= j {
            self.entries[self.slot(i, j)][p]
        } else {
            self.entries[self.slot(j, i)][p].conj()
        }
    }

    /// Matrix at grid point p.
    pub fn at(&self, p: usize) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.get(p, i, j))
    }

    /// sum_{ij} K_{ij}(p) H_{ij}(p), real for Hermitian K.
    pub fn contract(&self, p: usize, k: &CMat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += (k[(i, j)] * self.get(p, i, j)).re;
            }
        }
        s
    }

    /// Largest Frobenius norm over the grid.
    pub fn sup_norm(&self) -> f64 {
        let len = self.entries[0].len();
        (0..len).map(|p| self.at(p).norm()).fold(0.0, f64::max)
    }
}
