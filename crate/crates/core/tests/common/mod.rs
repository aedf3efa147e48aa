//! Independent oracles. Nothing here calls into the special-function or
//! matrix code under test.

#![allow(dead_code)]

/// Composite Simpson's rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Two-tailed Student-t probability by quadrature of the unnormalized
/// density `(1 + u²/ν)^(-(ν+1)/2)`. The normalizing constant is also found
/// by quadrature, so no gamma function is involved.
pub fn t_two_tailed_by_quadrature(t: f64, df: f64) -> f64 {
    let kernel = |u: f64| (1.0 + u * u / df).powf(-(df + 1.0) / 2.0);
    // Past |u| = 60 the kernel is negligible for the df used here (≥ 100).
    let total = simpson(kernel, 0.0, 60.0, 600_000);
    let inner = simpson(kernel, 0.0, t.abs(), 200_000);
    1.0 - inner / total
}

/// Upper chi-square tail by quadrature of `x^(k/2-1) e^(-x/2)`, normalized
/// by quadrature. Substituting `x = v²` gives the smooth integrand
/// `2 v^(k-1) e^(-v²/2)` for every k ≥ 1.
pub fn chi_square_upper_by_quadrature(x: f64, k: f64) -> f64 {
    let kernel = |v: f64| 2.0 * v.powf(k - 1.0) * (-v * v / 2.0).exp();
    let upper = (40.0 * k + 400.0).sqrt();
    let total = simpson(kernel, 0.0, upper, 800_000);
    let lower = simpson(kernel, 0.0, x.sqrt(), 200_000);
    1.0 - lower / total
}

/// Naive triple-loop product of row-major square matrices.
pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn printed_rows() -> Vec<Vec<f64>> {
    vec![
        vec![0.333, 0.167, 0.167, 0.333, 0.0],
        vec![0.5, 0.0, 0.0, 0.5, 0.0],
        vec![0.0, 1.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
    ]
}

/// Successive powers by the naive product; returns the first n ≤ max whose
/// per-column spread is below `tol`.
pub fn first_equilibrium_power(p: &[Vec<f64>], tol: f64, max: usize) -> Option<usize> {
    let mut m = p.to_vec();
    for n in 1..=max {
        let spread = (0..m.len())
            .map(|j| {
                let col: Vec<f64> = m.iter().map(|r| r[j]).collect();
                col.iter().cloned().fold(f64::MIN, f64::max)
                    - col.iter().cloned().fold(f64::MAX, f64::min)
            })
            .fold(0.0, f64::max);
        if spread < tol {
            return Some(n);
        }
        m = matmul(&m, p);
    }
    None
}

/// Builds samples of sizes n1, n2 whose pooled t statistic is `t`.
/// Spread patterns are fixed; sample 1 is shifted to hit the target.
pub fn samples_with_t(n1: usize, n2: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let pattern = |n: usize, phase: f64| -> Vec<f64> {
        (0..n)
            .map(|i| 0.6 * ((i as f64) * 0.7 + phase).sin())
            .collect()
    };
    let center = |v: Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.into_iter().map(|x| x - m).collect::<Vec<_>>()
    };
    let z1 = center(pattern(n1, 0.3));
    let z2 = center(pattern(n2, 1.1));
    let ss: f64 = z1.iter().chain(&z2).map(|x| x * x).sum();
    let sp2 = ss / (n1 + n2 - 2) as f64;
    let se = (sp2 * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let shift = t * se;
    let female_mean = 3.20;
    (
        z1.into_iter().map(|z| female_mean + shift + z).collect(),
        z2.into_iter().map(|z| female_mean + z).collect(),
    )
}
