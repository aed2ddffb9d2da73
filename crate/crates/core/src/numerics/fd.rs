//! Finite-difference weights on arbitrary (nonuniform) stencils.

/// Fornberg's algorithm: weights for derivatives `0..=order` at `x0` from
/// samples at `xs`. Returns `w[m][j]`, the weight of `f(xs[j])` in the
/// `m`-th derivative.
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First derivative of sampled data at every node using a `width`-point
/// stencil, centred where the data allow and one-sided near the ends.
pub fn derivative(xs: &[f64], ys: &[f64], width: usize) -> Vec<f64> {
    let n = xs.len();
    assert_eq!(n, ys.len());
    let width = width.min(n);
    let half = width / 2;
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - width);
            let stencil = &xs[start..start + width];
            let w = fornberg_weights(xs[i], stencil, 1);
            w[1].iter()
                .zip(&ys[start..start + width])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_second_difference() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn nonuniform_derivative_of_quartic_is_exact() {
        let xs: Vec<f64> = (0..12).map(|i| (i as f64 * 0.3).powf(1.3)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(4) - x).collect();
        let d = derivative(&xs, &ys, 5);
        for (x, dx) in xs.iter().zip(d) {
            let exact = 4.0 * x.powi(3) - 1.0;
            assert!((dx - exact).abs() < 1e-9 * (1.0 + exact.abs()));
        }
    }
}
