//! Small dependency-free linear solvers: Jacobi-preconditioned conjugate
//! gradients for the symmetric elliptic problems, and a banded LU with
//! partial pivoting for the nonsymmetric Newton systems of the time stepper.

use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Outcome of a conjugate gradient solve.
#[derive(Debug, Clone)]
pub(crate) struct CgSolution {
    pub x: Vec<f64>,
    #[allow(dead_code)]
    pub iterations: usize,
}

/// Preconditioned conjugate gradients for `A x = b` with `A` symmetric
/// positive (semi)definite.
///
/// With `mean_zero`, the iteration is restricted to mean-zero vectors: the
/// right-hand side and every preconditioned residual are projected, which
/// makes the singular Neumann operators definite on the iteration space.
/// Stops when the Euclidean residual norm is at most `abs_tol`.
pub(crate) fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    rhs: &[f64],
    abs_tol: f64,
    mean_zero: bool,
) -> Result<CgSolution> {
    let n = rhs.len();
    let max_iter = 20 * n + 200;
    let mut b = rhs.to_vec();
    if mean_zero {
        remove_mean(&mut b);
    }
    let mut x = vec![0.0; n];
    let mut r = b;
    let mut rnorm = dot(&r, &r).sqrt();
    if rnorm <= abs_tol {
        return Ok(CgSolution { x, iterations: 0 });
    }
    let precondition = |r: &[f64], z: &mut [f64]| {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(diag) {
            *zi = if *di > 0.0 { ri / di } else { *ri };
        }
        if mean_zero {
            remove_mean(z);
        }
    };
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::ConvergenceFailure {
                what: "conjugate gradients (loss of definiteness)",
                iterations: it,
                residual: rnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= abs_tol {
            if mean_zero {
                remove_mean(&mut x);
            }
            return Ok(CgSolution { x, iterations: it });
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::ConvergenceFailure {
        what: "conjugate gradients",
        iterations: max_iter,
        residual: rnorm,
    })
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored
/// row-wise with `kl` extra super-diagonals reserved for pivoting fill-in.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; n * ld],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.ld + (j + self.kl - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::ConvergenceFailure {
                    what: "banded LU (singular Jacobian)",
                    iterations: k,
                    residual: best,
                });
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let l = self.get(i, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                self.set(i, k, l);
                for j in k + 1..=last_col {
                    let v = self.get(i, j) - l * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= m.get(i, k) * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= m.get(i, j) * b[j];
            }
            b[i] = s / m.get(i, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn banded_lu_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, kl, ku) in &[(1, 0, 0), (7, 1, 1), (20, 3, 2), (30, 5, 5), (12, 0, 3)] {
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    // weak diagonal forces pivoting
                    let v: f64 = rng.random_range(-1.0..1.0) + if i == j { 0.05 } else { 0.0 };
                    band.add(i, j, v);
                    dense[(i, j)] = v;
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut x = rhs.clone();
            band.factor().unwrap().solve_in_place(&mut x);
            let expected = dense.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
            for i in 0..n {
                assert!((x[i] - expected[i]).abs() <= 1e-9 * (1.0 + expected[i].abs()), "n={n} i={i}");
            }
        }
    }

    #[test]
    fn singular_band_is_reported() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.add(0, 0, 1.0);
        band.add(2, 2, 1.0);
        assert!(band.factor().is_err());
    }

    #[test]
    fn pcg_solves_spd_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 3.0 * x[i] - left - right;
            }
        };
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let sol = pcg(apply, &vec![3.0; n], &rhs, 1e-12, false).unwrap();
        let mut check = vec![0.0; n];
        apply(&sol.x, &mut check);
        for i in 0..n {
            assert!((check[i] - rhs[i]).abs() < 1e-11);
        }
    }
}
