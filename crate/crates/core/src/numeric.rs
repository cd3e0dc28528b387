//! Finite differences and composite trapezoid quadrature.

/// Derivative of `f` at `x` by central differences, falling back to a
/// one-sided difference when `x ± h` would leave `[lo, hi]`.
pub fn derivative<E>(f: impl Fn(f64) -> Result<f64, E>, x: f64, h: f64, lo: f64, hi: f64) -> Result<f64, E> {
    let (down, up) = (x - h >= lo, x + h <= hi);
    Ok(match (down, up) {
        (true, true) => (f(x + h)? - f(x - h)?) / (2.0 * h),
        (false, true) => (f(x + h)? - f(x)?) / h,
        (true, false) => (f(x)? - f(x - h)?) / h,
        (false, false) => 0.0,
    })
}

/// Running integral of sampled `ys` over abscissae `xs` by the composite
/// trapezoid rule; the first entry is zero.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..xs.len() {
        acc += 0.5 * (xs[k] - xs[k - 1]) * (ys[k] + ys[k - 1]);
        out.push(acc);
    }
    out
}

/// Refines the sorted knots so that no piece is longer than `h`. Returns the
/// mesh and, for each knot, its position in the mesh.
pub fn refine(knots: &[f64], h: f64) -> (Vec<f64>, Vec<usize>) {
    let mut mesh = Vec::new();
    let mut at = Vec::with_capacity(knots.len());
    for (k, &x) in knots.iter().enumerate() {
        if k > 0 {
            let a = knots[k - 1];
            let pieces = (((x - a) / h) - 1e-9).ceil().max(1.0) as usize;
            for p in 1..pieces {
                mesh.push(a + (x - a) * p as f64 / pieces as f64);
            }
        }
        at.push(mesh.len());
        mesh.push(x);
    }
    (mesh, at)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_converges_quadratically() {
        // ∫_0^1 e^x dx = e - 1
        let exact = std::f64::consts::E - 1.0;
        let err = |h: f64| {
            let (xs, _) = refine(&[0.0, 1.0], h);
            let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
            (cumulative_trapezoid(&xs, &ys).last().unwrap() - exact).abs()
        };
        let (e1, e2) = (err(0.01), err(0.005));
        assert!(e1 < 2e-5);
        assert!((e1 / e2 - 4.0).abs() < 0.05);
    }

    #[test]
    fn trapezoid_exact_on_lines() {
        let xs = [0.0, 0.3, 1.0, 2.5];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let c = cumulative_trapezoid(&xs, &ys);
        assert!((c[3] - (2.5f64 * 2.5 + 2.5)).abs() < 1e-12);
    }

    #[test]
    fn derivative_one_sided_at_ends() {
        let f = |x: f64| Ok::<_, ()>(x * x);
        assert!((derivative(f, 0.5, 1e-4, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-8);
        // forward at the left end
        assert!((derivative(f, 0.0, 1e-4, 0.0, 1.0).unwrap() - 1e-4).abs() < 1e-12);
        // backward at the right end
        assert!((derivative(f, 1.0, 1e-4, 0.0, 1.0).unwrap() - (2.0 - 1e-4)).abs() < 1e-9);
    }

    #[test]
    fn refine_keeps_knots() {
        let (mesh, at) = refine(&[0.0, 0.25, 0.5, 1.0], 0.1);
        assert_eq!(at.len(), 4);
        for (k, &i) in at.iter().enumerate() {
            assert_eq!(mesh[i], [0.0, 0.25, 0.5, 1.0][k]);
        }
        assert!(mesh.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.1 + 1e-12));
    }
}
