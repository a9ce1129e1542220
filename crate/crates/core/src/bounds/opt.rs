//! Scalar optimisation over a time window: a log-uniform scan followed by
//! golden-section refinement of the best bracket. The objectives here are
//! smooth with one interior optimum (or are monotone), so this is robust and
//! resolves the optimum far below the scan spacing.

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Minimise `f` on `[lo, hi]`; returns (argmin, min).
pub fn minimize_over_time(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n_grid: usize) -> (f64, f64) {
    assert!(hi > lo && lo > 0.0, "optimisation window must satisfy 0 < lo < hi");
    let n = n_grid.max(8);
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    let mut ts = Vec::with_capacity(n);
    let mut t = lo;
    for i in 0..n {
        ts.push(t.min(hi));
        let v = f(ts[i]);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
        t *= ratio;
    }
    let mut a = ts[best_i.saturating_sub(1)];
    let mut b = ts[(best_i + 1).min(n - 1)];
    if a >= b {
        return (ts[best_i], best_v);
    }
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..120 {
        if b - a < 1e-12 * b.max(1.0) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    let (xm, fm) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if fm <= best_v {
        (xm, fm)
    } else {
        (ts[best_i], best_v)
    }
}

/// Maximise `f` on `[lo, hi]`; returns (argmax, max).
pub fn maximize_over_time(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n_grid: usize) -> (f64, f64) {
    let (t, v) = minimize_over_time(|t| -f(t), lo, hi, n_grid);
    (t, -v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum_of_smooth_function() {
        // t^{-1/2} c + t^{1/2} is minimised at t = c.
        let c = 2.5f64.ln();
        let (t, _) = minimize_over_time(|t| c / t.sqrt() + t.sqrt(), 0.01, 10.0, 512);
        assert!((t - c).abs() < 1e-6, "argmin {t} vs {c}");
    }

    #[test]
    fn matches_dense_grid_scan() {
        let f = |t: f64| (t - 3.3).powi(2) + 0.1 * t;
        let (t_opt, v_opt) = minimize_over_time(f, 0.5, 8.0, 512);
        let mut best = f64::INFINITY;
        let mut best_t = 0.0;
        for i in 0..10_000 {
            let t = 0.5 + (8.0 - 0.5) * i as f64 / 9_999.0;
            if f(t) < best {
                best = f(t);
                best_t = t;
            }
        }
        assert!((t_opt - best_t).abs() < (8.0 - 0.5) / 9_999.0 * 2.0);
        assert!(v_opt <= best + 1e-12);
    }

    #[test]
    fn handles_boundary_maximum() {
        // Increasing objective: maximum sits at the right endpoint.
        let (t, v) = maximize_over_time(|t| t.tanh(), 0.01, 5.0, 64);
        assert!((t - 5.0).abs() < 1e-9);
        assert!((v - 5.0f64.tanh()).abs() < 1e-12);
    }
}
