//! Shared test oracles: Kolmogorov–Smirnov distances and small numeric
//! helpers, independent of the implementation paths they check.

/// One-sample KS distance against U(0, 1); input: the sample mapped to
/// [0, 1] by the hypothesized CDF.
pub fn ks_uniform(mut us: Vec<f64>) -> f64 {
    us.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = us.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, &u) in us.iter().enumerate() {
        ks = ks
            .max(((i + 1) as f64 / n - u).abs())
            .max((u - i as f64 / n).abs());
    }
    ks
}

/// Two-sample KS distance.
pub fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut ks: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        ks = ks.max((i as f64 / na - j as f64 / nb).abs());
    }
    ks
}
