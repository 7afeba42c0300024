//! Composite quadrature weights on uniform grids.

/// Composite Simpson weights for `n_nodes` uniformly spaced nodes `h` apart.
///
/// Even interval counts get plain composite Simpson. Odd counts (>= 3
/// intervals) close with a 3/8 rule on the final three intervals so
/// fourth-order accuracy holds throughout; a single interval degrades to the
/// trapezoid rule. All weights are nonnegative.
pub fn simpson_weights(n_nodes: usize, h: f64) -> Vec<f64> {
    assert!(n_nodes >= 1, "quadrature needs at least one node");
    let m = n_nodes - 1; // intervals
    let mut w = vec![0.0; n_nodes];
    match m {
        0 => {}
        1 => {
            w[0] = h / 2.0;
            w[1] = h / 2.0;
        }
        _ => {
            let simpson_intervals = if m.is_multiple_of(2) { m } else { m - 3 };
            if simpson_intervals > 0 {
                w[0] += h / 3.0;
                w[simpson_intervals] += h / 3.0;
                for (k, wk) in w.iter_mut().enumerate().take(simpson_intervals).skip(1) {
                    *wk += if k % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
                }
            }
            if !m.is_multiple_of(2) {
                let s = m - 3;
                w[s] += 3.0 * h / 8.0;
                w[s + 1] += 9.0 * h / 8.0;
                w[s + 2] += 9.0 * h / 8.0;
                w[s + 3] += 3.0 * h / 8.0;
            }
        }
    }
    w
}

/// Composite trapezoid weights for `n_nodes` nodes `h` apart.
pub fn trapezoid_weights(n_nodes: usize, h: f64) -> Vec<f64> {
    assert!(n_nodes >= 1, "quadrature needs at least one node");
    let mut w = vec![h; n_nodes];
    if n_nodes == 1 {
        w[0] = 0.0;
        return w;
    }
    w[0] = h / 2.0;
    w[n_nodes - 1] = h / 2.0;
    w
}

/// Trapezoid mass of a piecewise-linear density given by (nodes, values).
pub fn trapezoid_mass(nodes: &[f64], values: &[f64]) -> f64 {
    nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, f)| (t[1] - t[0]) * (f[0] + f[1]) / 2.0)
        .sum()
}
