//! Special functions used by the closed forms.

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

// B_{2k} / (2k)! for k = 1..=7.
const BERNOULLI_OVER_FACTORIAL: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
];

const DIRECT_TERMS: u64 = 32;

/// `sum_{n=a}^{b} n^{-s}` for integers `1 <= a`, with `b = None` meaning the
/// infinite sum (requires `s > 1`). Uses direct summation for the first terms
/// and Euler-Maclaurin for the remainder.
pub fn power_sum(s: f64, a: u64, b: Option<u64>) -> f64 {
    assert!(a >= 1, "power_sum starts at n >= 1");
    if let Some(b) = b {
        if b < a {
            return 0.0;
        }
    } else {
        assert!(s > 1.0, "infinite power sum diverges for s <= 1");
    }
    let direct_end = match b {
        Some(b) => b.min(a + DIRECT_TERMS - 1),
        None => a + DIRECT_TERMS - 1,
    };
    let mut total = 0.0;
    // Smallest terms first.
    for n in (a..=direct_end).rev() {
        total += (n as f64).powf(-s);
    }
    let start = direct_end + 1;
    match b {
        Some(b) if b < start => total,
        _ => total + euler_maclaurin_tail(s, start as f64, b.map(|b| b as f64)),
    }
}

/// `sum_{n=N}^{B} n^{-s}` via Euler-Maclaurin with seven correction terms.
fn euler_maclaurin_tail(s: f64, n0: f64, upper: Option<f64>) -> f64 {
    let f = |x: f64| x.powf(-s);
    let integral = match upper {
        Some(b) => {
            if (s - 1.0).abs() < 1e-15 {
                (b / n0).ln()
            } else {
                (b.powf(1.0 - s) - n0.powf(1.0 - s)) / (1.0 - s)
            }
        }
        None => n0.powf(1.0 - s) / (s - 1.0),
    };
    let endpoints = 0.5 * (f(n0) + upper.map_or(0.0, f));
    // f^{(m)}(x) = (-1)^m s(s+1)...(s+m-1) x^{-s-m}
    let derivative = |m: usize, x: f64| -> f64 {
        let mut rising = 1.0;
        for i in 0..m {
            rising *= s + i as f64;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sign * rising * x.powf(-s - m as f64)
    };
    let mut corrections = 0.0;
    for (k, coef) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let m = 2 * k + 1;
        let at_upper = upper.map_or(0.0, |b| derivative(m, b));
        corrections += coef * (at_upper - derivative(m, n0));
    }
    integral + endpoints + corrections
}
