//! Generalized symmetric eigenproblems `S x = λ W x` with diagonal `W > 0`
//! and `S` positive semidefinite with the constants as its kernel.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Problems up to this size are solved densely.
pub const DENSE_LIMIT: usize = 1024;

const BLOCK: usize = 6;
const MAX_OUTER: usize = 200;

/// Smallest eigenvalue of `S x = λ W x` orthogonal to the constants.
pub fn first_nonzero_eigenvalue(stiffness: &dyn Fn(&[f64]) -> Vec<f64>, mass: &[f64]) -> Result<f64> {
    check_mass(mass)?;
    if mass.len() <= DENSE_LIMIT {
        dense(stiffness, mass)
    } else {
        iterative(stiffness, mass)
    }
}

fn check_mass(mass: &[f64]) -> Result<()> {
    if mass.len() < 2 {
        return Err(Error::Eigen("need at least two unknowns".into()));
    }
    if let Some(p) = mass.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Eigen(format!("mass weight {p} is not positive")));
    }
    Ok(())
}

/// Unit vector spanning the kernel of `W^{-1/2} S W^{-1/2}`.
fn kernel(mass: &[f64]) -> Vec<f64> {
    let norm = mass.iter().sum::<f64>().sqrt();
    mass.iter().map(|w| w.sqrt() / norm).collect()
}

struct Operator<'a> {
    stiffness: &'a dyn Fn(&[f64]) -> Vec<f64>,
    inv_sqrt: Vec<f64>,
    q: Vec<f64>,
}

impl<'a> Operator<'a> {
    fn new(stiffness: &'a dyn Fn(&[f64]) -> Vec<f64>, mass: &[f64]) -> Self {
        Operator {
            stiffness,
            inv_sqrt: mass.iter().map(|w| 1.0 / w.sqrt()).collect(),
            q: kernel(mass),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y: Vec<f64> = x.iter().zip(&self.inv_sqrt).map(|(a, s)| a * s).collect();
        let mut out: Vec<f64> = (self.stiffness)(&y).iter().zip(&self.inv_sqrt).map(|(a, s)| a * s).collect();
        self.project(&mut out);
        out
    }

    fn project(&self, x: &mut [f64]) {
        let c = dot(x, &self.q);
        for (a, q) in x.iter_mut().zip(&self.q) {
            *a -= c * q;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dense(stiffness: &dyn Fn(&[f64]) -> Vec<f64>, mass: &[f64]) -> Result<f64> {
    let n = mass.len();
    let op = Operator::new(stiffness, mass);
    let mut b = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let y: Vec<f64> = e.iter().zip(&op.inv_sqrt).map(|(a, s)| a * s).collect();
        let col = stiffness(&y);
        for i in 0..n {
            b[(i, j)] = col[i] * op.inv_sqrt[i];
        }
        e[j] = 0.0;
    }
    let b = (&b + b.transpose()) * 0.5;
    let shift = (0..n)
        .map(|i| b.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let q = nalgebra::DVector::from_vec(op.q.clone());
    let deflated = b + &q * q.transpose() * shift;
    let eig = SymmetricEigen::try_new(deflated, 1e-14, 10_000)
        .ok_or_else(|| Error::Eigen("dense symmetric eigensolve did not converge".into()))?;
    let lam = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !lam.is_finite() {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok(lam)
}

/// Conjugate gradients for `B y = x` on the complement of the kernel.
fn cg(op: &Operator, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let mut y = vec![0.0; n];
    let mut r = x.to_vec();
    op.project(&mut r);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tol * tol * rr;
    if rr == 0.0 {
        return Ok(y);
    }
    for _ in 0..20 * n {
        let bp = op.apply(&p);
        let alpha = rr / dot(&p, &bp);
        for i in 0..n {
            y[i] += alpha * p[i];
            r[i] -= alpha * bp[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new <= target {
            op.project(&mut y);
            return Ok(y);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::Eigen("inner conjugate-gradient solve did not converge".into()))
}

fn orthonormalize(op: &Operator, block: &mut Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for mut v in block.drain(..) {
        for _ in 0..2 {
            op.project(&mut v);
            for u in &out {
                let c = dot(&v, u);
                for (a, b) in v.iter_mut().zip(u) {
                    *a -= c * b;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-300 {
            out.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    *block = out;
}

/// Block inverse iteration with Rayleigh–Ritz, for problems too large to
/// assemble.
pub(crate) fn iterative(stiffness: &dyn Fn(&[f64]) -> Vec<f64>, mass: &[f64]) -> Result<f64> {
    check_mass(mass)?;
    let n = mass.len();
    let op = Operator::new(stiffness, mass);
    let p = BLOCK.min(n - 1);
    let mut block: Vec<Vec<f64>> = (0..p)
        .map(|k| {
            (0..n)
                .map(|i| ((k + 1) as f64 * 0.731 * i as f64 + k as f64).sin() + 0.1 * ((i * (k + 2)) % 7) as f64)
                .collect()
        })
        .collect();
    orthonormalize(&op, &mut block);
    let mut prev = f64::INFINITY;
    for it in 0..MAX_OUTER {
        let mut next = Vec::with_capacity(block.len());
        for v in &block {
            next.push(cg(&op, v, 1e-12)?);
        }
        orthonormalize(&op, &mut next);
        let applied: Vec<Vec<f64>> = next.iter().map(|v| op.apply(v)).collect();
        let m = next.len();
        let h = DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&next[i], &applied[j]) + dot(&next[j], &applied[i])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let lam = eig.eigenvalues[order[0]];
        block = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (r, x) in next.iter().enumerate() {
                    let w = eig.eigenvectors[(r, c)];
                    for i in 0..n {
                        v[i] += w * x[i];
                    }
                }
                v
            })
            .collect();
        if it > 1 && (lam - prev).abs() <= 1e-13 * lam.abs() {
            return Ok(lam);
        }
        prev = lam;
    }
    Err(Error::Eigen(format!("block inverse iteration stalled after {MAX_OUTER} sweeps")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ring(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| 2.0 * x[i] - x[(i + 1) % n] - x[(i + n - 1) % n])
            .collect()
    }

    #[test]
    fn ring_spectrum() {
        let n = 40;
        let lam = first_nonzero_eigenvalue(&ring, &vec![1.0; n]).unwrap();
        assert_relative_eq!(lam, 4.0 * (PI / n as f64).sin().powi(2), max_relative = 1e-12);
    }

    #[test]
    fn iterative_matches_dense() {
        let n = 60;
        let mass: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * (i as f64 * 0.2).sin()).collect();
        let d = dense(&ring, &mass).unwrap();
        let it = iterative(&ring, &mass).unwrap();
        assert_relative_eq!(d, it, max_relative = 1e-10);
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(first_nonzero_eigenvalue(&ring, &[1.0, 0.0, 1.0]).is_err());
    }
}
