//! Periodic stencil helpers shared by the grid backends.

#[inline]
pub(crate) fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Periodic 1-D centered first derivative.
pub(crate) fn d1(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| (u[(i + 1) % n] - u[(i + n - 1) % n]) / (2.0 * h))
        .collect()
}

/// Periodic 1-D centered second derivative.
pub(crate) fn d2(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| (u[(i + 1) % n] - 2.0 * u[i] + u[(i + n - 1) % n]) / (h * h))
        .collect()
}

/// Row-major `n × n` periodic grid; index `j * n + i` with `i` along x.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Square {
    pub n: usize,
    pub h: f64,
}

impl Square {
    pub fn new(n: usize) -> Self {
        Square { n, h: 1.0 / n as f64 }
    }

    #[inline]
    pub fn idx(&self, i: isize, j: isize) -> usize {
        wrap(j, self.n) * self.n + wrap(i, self.n)
    }

    /// Centered `(∂x, ∂y)`.
    pub fn gradient(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as isize;
        let mut gx = vec![0.0; u.len()];
        let mut gy = vec![0.0; u.len()];
        for j in 0..n {
            for i in 0..n {
                let p = self.idx(i, j);
                gx[p] = (u[self.idx(i + 1, j)] - u[self.idx(i - 1, j)]) / (2.0 * self.h);
                gy[p] = (u[self.idx(i, j + 1)] - u[self.idx(i, j - 1)]) / (2.0 * self.h);
            }
        }
        (gx, gy)
    }

    /// Centered `(∂xx, ∂xy, ∂yy)`.
    pub fn second_derivatives(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n as isize;
        let h2 = self.h * self.h;
        let mut xx = vec![0.0; u.len()];
        let mut xy = vec![0.0; u.len()];
        let mut yy = vec![0.0; u.len()];
        for j in 0..n {
            for i in 0..n {
                let p = self.idx(i, j);
                xx[p] = (u[self.idx(i + 1, j)] - 2.0 * u[p] + u[self.idx(i - 1, j)]) / h2;
                yy[p] = (u[self.idx(i, j + 1)] - 2.0 * u[p] + u[self.idx(i, j - 1)]) / h2;
                xy[p] = (u[self.idx(i + 1, j + 1)] - u[self.idx(i + 1, j - 1)] - u[self.idx(i - 1, j + 1)]
                    + u[self.idx(i - 1, j - 1)])
                    / (4.0 * h2);
            }
        }
        (xx, xy, yy)
    }

    /// Five-point flat Laplacian.
    pub fn flat_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n as isize;
        let h2 = self.h * self.h;
        let mut out = vec![0.0; u.len()];
        for j in 0..n {
            for i in 0..n {
                let p = self.idx(i, j);
                out[p] = (u[self.idx(i + 1, j)] + u[self.idx(i - 1, j)] + u[self.idx(i, j + 1)] + u[self.idx(i, j - 1)]
                    - 4.0 * u[p])
                    / h2;
            }
        }
        out
    }

    /// Conservative flux difference `Σ_d c_{p+½d}(u_{p+d}-u_p) - c_{p-½d}(u_p-u_{p-d})`
    /// with edge coefficients from the arithmetic mean of `c`.
    pub fn flux_divergence(&self, c: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.n as isize;
        let mut out = vec![0.0; u.len()];
        for j in 0..n {
            for i in 0..n {
                let p = self.idx(i, j);
                let mut acc = 0.0;
                for (di, dj) in [(1, 0), (0, 1)] {
                    let q = self.idx(i + di, j + dj);
                    let m = self.idx(i - di, j - dj);
                    let cp = 0.5 * (c[p] + c[q]);
                    let cm = 0.5 * (c[p] + c[m]);
                    acc += cp * (u[q] - u[p]) - cm * (u[p] - u[m]);
                }
                out[p] = acc;
            }
        }
        out
    }

    /// Edge sum `Σ_edges c_e (u_q-u_p)(v_q-v_p)`, the adjoint partner of
    /// [`Square::flux_divergence`].
    pub fn edge_form(&self, c: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let n = self.n as isize;
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let p = self.idx(i, j);
                for (di, dj) in [(1, 0), (0, 1)] {
                    let q = self.idx(i + di, j + dj);
                    acc += 0.5 * (c[p] + c[q]) * (u[q] - u[p]) * (v[q] - v[p]);
                }
            }
        }
        acc
    }
}

/// 1-D analogues on a periodic ring.
pub(crate) fn ring_flux_divergence(c: &[f64], u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
            0.5 * (c[i] + c[ip]) * (u[ip] - u[i]) - 0.5 * (c[i] + c[im]) * (u[i] - u[im])
        })
        .collect()
}

pub(crate) fn ring_edge_form(c: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    (0..n)
        .map(|i| {
            let ip = (i + 1) % n;
            0.5 * (c[i] + c[ip]) * (u[ip] - u[i]) * (v[ip] - v[i])
        })
        .sum()
}

/// Ratio of the largest second difference to the field oscillation. A single
/// mode with fewer than four samples per wavelength exceeds 2.
pub(crate) fn roughness(u: &[f64], neighbours: impl Fn(usize) -> Vec<(usize, usize)>) -> f64 {
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let amp = u.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    if amp == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for p in 0..u.len() {
        for (a, b) in neighbours(p) {
            worst = worst.max((u[a] - 2.0 * u[p] + u[b]).abs());
        }
    }
    worst / amp
}

pub(crate) const ROUGHNESS_LIMIT: f64 = 2.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_divergence_is_adjoint_to_edge_form() {
        let sq = Square::new(8);
        let c: Vec<f64> = (0..64).map(|p| 1.0 + 0.1 * (p as f64).sin()).collect();
        let u: Vec<f64> = (0..64).map(|p| (0.3 * p as f64).cos()).collect();
        let v: Vec<f64> = (0..64).map(|p| (0.7 * p as f64).sin()).collect();
        let lhs: f64 = sq.flux_divergence(&c, &u).iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((lhs + sq.edge_form(&c, &u, &v)).abs() < 1e-12);
        let lhs1: f64 = ring_flux_divergence(&c[..16], &u[..16])
            .iter()
            .zip(&v[..16])
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs1 + ring_edge_form(&c[..16], &u[..16], &v[..16])).abs() < 1e-12);
    }

    #[test]
    fn wrap_handles_negative_indices() {
        assert_eq!(wrap(-1, 5), 4);
        assert_eq!(wrap(5, 5), 0);
    }
}
