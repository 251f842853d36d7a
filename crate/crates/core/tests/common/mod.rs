//! Independent oracles for the acceptance tests. These deliberately share no
//! code with the library's quadrature or root-finding paths: tanh-sinh
//! quadrature, a Lanczos Beta function, and plain bisection.

/// Tanh-sinh quadrature of f over (a, b); robust to integrable endpoint
/// singularities. Levels are doubled until two consecutive results agree.
///
/// Node positions are computed as stable offsets from the nearest endpoint
/// (1 -+ tanh v evaluated in exponential form), which preserves full relative
/// accuracy for integrands singular at the endpoints.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let half = 0.5 * (b - a);
    let t_max = 4.0_f64;
    let eval = |t: f64| -> f64 {
        // v = (pi/2) sinh t; offset from the nearer endpoint:
        // 1 - tanh v = 2 e^{-2v} / (1 + e^{-2v})
        let v = std::f64::consts::FRAC_PI_2 * t.sinh();
        let e = (-2.0 * v.abs()).exp();
        let offset = half * 2.0 * e / (1.0 + e);
        let w = half * std::f64::consts::FRAC_PI_2 * t.cosh()
            * (4.0 * e / ((1.0 + e) * (1.0 + e)));
        if offset <= 0.0 || !w.is_finite() {
            return 0.0;
        }
        // node on the side the sign of t selects
        let x = if t >= 0.0 { b - offset } else { a + offset };
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    // weight identity: (pi/2) cosh t / cosh^2 v = (pi/2) cosh t sech^2 v and
    // sech^2 v = 4 e^{-2|v|} / (1 + e^{-2|v|})^2, used above.
    let mut h = 1.0_f64;
    // level 0: all integer nodes within the truncation window
    let mut total = eval(0.0);
    let mut k = 1i64;
    while (k as f64) * h <= t_max {
        total += eval(k as f64) + eval(-(k as f64));
        k += 1;
    }
    total *= h;
    for level in 0..16 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1i64;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            add += eval(t) + eval(-t);
            k += 2;
        }
        let new_total = 0.5 * total + h * add;
        if (new_total - total).abs() <= tol * new_total.abs().max(1.0) && level >= 5 {
            return new_total;
        }
        total = new_total;
    }
    total
}

/// Lanczos log-gamma for positive arguments (g = 7, n = 9 coefficients).
pub fn ln_gamma(z: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    assert!(z > 0.0);
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// Beta(a, b) = Gamma(a) Gamma(b) / Gamma(a + b).
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// int_0^1 (1 - s^x)^{-1/2} ds = (1/x) B(1/x, 1/2), by the Beta oracle.
pub fn singular_moment_oracle(x: f64) -> f64 {
    beta(1.0 / x, 0.5) / x
}

/// Plain bisection to relative tolerance; panics on a bad bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let flo = f(lo);
    let fhi = f(hi);
    assert!(
        flo.signum() != fhi.signum(),
        "bisect oracle needs a sign change: f({lo}) = {flo}, f({hi}) = {fhi}"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_tol * mid.abs().max(1.0) {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[allow(dead_code)]
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}
