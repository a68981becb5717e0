//! Cumulative integrals of samples on a uniform grid.

/// `F[k] = ∫_{t_0}^{t_k} f` from samples `f[k]` spaced by `dt`.
///
/// Each interval uses the cubic through four neighbouring samples, shifted
/// inward at the ends, so the result is fourth-order accurate. Two samples
/// fall back to the trapezoid and three to the quadratic rule.
pub fn cumulative(f: &[f64], dt: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    let interval = |k: usize| -> f64 {
        match n {
            2 => 0.5 * (f[0] + f[1]),
            3 if k == 0 => (5.0 * f[0] + 8.0 * f[1] - f[2]) / 12.0,
            3 => (-f[0] + 8.0 * f[1] + 5.0 * f[2]) / 12.0,
            _ if k == 0 => (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0,
            _ if k == n - 2 => (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]) / 24.0,
            _ => (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]) / 24.0,
        }
    };
    for k in 0..n - 1 {
        out[k + 1] = out[k] + dt * interval(k);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_for_cubics() {
        let dt = 0.1;
        let f: Vec<f64> = (0..11).map(|k| {
            let t = k as f64 * dt;
            1.0 - 2.0 * t + 3.0 * t * t - t * t * t
        }).collect();
        let big_f = cumulative(&f, dt);
        for (k, v) in big_f.iter().enumerate() {
            let t = k as f64 * dt;
            let exact = t - t * t + t * t * t - 0.25 * t.powi(4);
            assert!((v - exact).abs() < 1e-14, "{k}: {v} vs {exact}");
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let f: Vec<f64> = (0..=n).map(|k| (3.0 * k as f64 * dt).exp()).collect();
            (cumulative(&f, dt)[n] - ((3.0f64).exp() - 1.0) / 3.0).abs()
        };
        let order = (err(40) / err(80)).log2();
        assert!(order > 3.8, "{order}");
    }

    #[test]
    fn short_inputs() {
        assert_eq!(cumulative(&[], 1.0), Vec::<f64>::new());
        assert_eq!(cumulative(&[2.0], 1.0), vec![0.0]);
        assert_eq!(cumulative(&[1.0, 3.0], 0.5), vec![0.0, 1.0]);
        let q = cumulative(&[0.0, 1.0, 4.0], 1.0);
        assert_relative_eq!(q[2], 8.0 / 3.0, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn linear_in_the_integrand(a in proptest::collection::vec(-10.0f64..10.0, 2..30), s in -3.0f64..3.0) {
            let b: Vec<f64> = a.iter().map(|v| s * v + 1.0).collect();
            let fa = cumulative(&a, 0.1);
            let fb = cumulative(&b, 0.1);
            for k in 0..a.len() {
                let expect = s * fa[k] + 0.1 * k as f64;
                prop_assert!((fb[k] - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
            }
        }
    }
}
