//! Scalar search primitives shared by the rate limit and the optimizer.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximisation of `f` on `[lo, hi]`.
///
/// Returns the best abscissa seen together with its value. Stops once the
/// bracket is narrower than `x_tol` (absolute) or after `max_iter` steps.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, x_tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= x_tol {
            break;
        }
        // >= keeps the lower point on ties
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `points` values spaced evenly in log10 between `lo` and `hi` (inclusive).
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0, "log grid needs positive bounds");
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            let step = (b - a) / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i == points - 1 {
                        hi
                    } else {
                        10f64.powf(a + step * i as f64)
                    }
                })
                .collect()
        }
    }
}

pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| if i == points - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Maximise `f` over `[lo, hi]` in log space: coarse grid, then golden
/// section between the neighbours of the best grid point.
pub fn maximize_log_scale<F>(mut f: F, lo: f64, hi: f64, grid_points: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let grid = log_grid(lo, hi, grid_points.max(3));
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    let a = grid[best.saturating_sub(1)].ln();
    let b = grid[(best + 1).min(grid.len() - 1)].ln();
    let (y, fy) = golden_section_max(|y| f(y.exp()), a, b, 1e-10, 200);
    if fy > best_val {
        (y.exp(), fy)
    } else {
        (grid[best], best_val)
    }
}
