//! Small numerical helpers shared across the pipeline.

use statrs::distribution::{ContinuousCDF, Normal};

/// Least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for a perfect fit (or constant data).
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r2 = if syy <= f64::MIN_POSITIVE { 1.0 } else { 1.0 - ss_res / syy };
    Some(LineFit { slope, intercept, r2 })
}

/// Neumaier-compensated sum. Order of the input is respected, so the result
/// is reproducible for a fixed ordering.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    if !sum.is_finite() {
        return sum;
    }
    sum + comp
}

/// `Σ a_i b_i` with eight interleaved accumulators: fast, and fixed in
/// its rounding for given inputs.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Three-point Gauss–Legendre rule on `[a, b]`; exact for quintics.
pub fn gauss3<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    const NODE: f64 = 0.774_596_669_241_483_4;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * (5.0 / 9.0 * f(mid - half * NODE) + 8.0 / 9.0 * f(mid) + 5.0 / 9.0 * f(mid + half * NODE))
}

/// `n` points spaced geometrically between `lo` and `hi` (both included).
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Solve `g(x) = target` for a monotone `g` on `[lo, hi]`.
///
/// `eval` returns `(g(x), g'(x))`. Newton steps are taken while they stay
/// inside the current bracket, bisection otherwise. The bracket always
/// shrinks, so the result lies in `[lo, hi]` even when the target is not
/// attained.
pub fn invert_monotone<F>(mut eval: F, lo: f64, hi: f64, target: f64, increasing: bool, tol: f64) -> f64
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let (g, dg) = eval(x);
        let below = if increasing { g < target } else { g > target };
        if g == target {
            return x;
        }
        if below {
            a = x;
        } else {
            b = x;
        }
        let newton = x - (g - target) / dg;
        x = if dg.is_finite() && dg != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        // Newton can stall on one side of the root; force progress when the
        // bracket is barely shrinking.
        if (x - a).min(b - x) < 1e-3 * (b - a) {
            let step = 1e-3 * (b - a);
            x = x.clamp(a + step, b - step);
        }
        if !(x > a && x < b) {
            // No representable point left inside the bracket.
            break;
        }
    }
    x.clamp(lo, hi)
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    // Normal::new(0, 1) cannot fail.
    Normal::new(0.0, 1.0).expect("standard normal").cdf(x)
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `samples` and the continuous CDF `cdf`. Sorts a copy of the samples.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d.clamp(0.0, 1.0)
}

/// Sample mean and unbiased variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, ss / (n - 1) as f64)
}
