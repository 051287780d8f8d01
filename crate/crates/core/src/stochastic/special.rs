//! Gamma, Gauss hypergeometric ₂F₁ on the negative real axis, the
//! Volterra kernel of fractional Brownian motion, and Gauss–Legendre rules.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Γ(x) by the Lanczos approximation, with reflection below 1/2.
/// Returns ±∞ at the poles.
pub fn gamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return f64::INFINITY;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// 1/Γ(x), zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

const SERIES_TOL: f64 = 1e-15;
const SERIES_CAP: usize = 500;

/// Gauss series `Σ (a)_n (b)_n / ((c)_n n!) zⁿ` for `|z| < 1`.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if is_nonpositive_integer(c) {
        return Err(Error::Domain(format!("2F1 undefined for c = {c}")));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..SERIES_CAP {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term.abs() <= SERIES_TOL * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Precision(format!(
        "2F1({a}, {b}; {c}; {z}) series did not converge in {SERIES_CAP} terms"
    )))
}

/// ₂F₁(a, b; c; w) for `0 ≤ w < 1`, switching to the `1 − w` connection
/// formula above 1/2 when `c − a − b` is not an integer.
fn hyp2f1_unit_interval(a: f64, b: f64, c: f64, w: f64) -> Result<f64> {
    let s = c - a - b;
    if w <= 0.5 || (s - s.round()).abs() < 1e-12 {
        return hyp2f1_series(a, b, c, w);
    }
    let first = gamma(c) * gamma(s) * rgamma(c - a) * rgamma(c - b);
    let second = gamma(c) * gamma(-s) * rgamma(a) * rgamma(b);
    let mut value = 0.0;
    if first != 0.0 {
        value += first * hyp2f1_series(a, b, 1.0 - s, 1.0 - w)?;
    }
    if second != 0.0 {
        value += second * (1.0 - w).powf(s) * hyp2f1_series(c - a, c - b, s + 1.0, 1.0 - w)?;
    }
    Ok(value)
}

/// Pfaff route: `₂F₁(a,b;c;z) = (1−z)^{−a}·₂F₁(a, c−b; c; z/(z−1))`, `z < 0`.
pub fn hyp2f1_pfaff(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if z >= 0.0 {
        return Err(Error::Domain(format!("Pfaff branch needs z < 0, got {z}")));
    }
    let w = z / (z - 1.0);
    Ok((1.0 - z).powf(-a) * hyp2f1_unit_interval(a, c - b, c, w)?)
}

/// Gauss hypergeometric function for `c > 0` and `z ≤ 0`.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("2F1 requires c > 0, got {c}")));
    }
    if !(z <= 0.0) {
        return Err(Error::Domain(format!("2F1 is only evaluated for z <= 0, got {z}")));
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    if z >= -0.5 {
        hyp2f1_series(a, b, c, z)
    } else {
        hyp2f1_pfaff(a, b, c, z)
    }
}

/// `K_H(t,s) = (t−s)^{H−½}/Γ(H+½)·₂F₁(H−½, ½−H; H+½; 1−t/s)` for `0 < s < t`.
pub fn kernel_kh(t: f64, s: f64, hurst: f64) -> Result<f64> {
    if !(s > 0.0 && s < t) {
        return Err(Error::Domain(format!("kernel needs 0 < s < t, got s = {s}, t = {t}")));
    }
    let h = hurst;
    let f = hyp2f1(h - 0.5, 0.5 - h, h + 0.5, 1.0 - t / s)?;
    Ok((t - s).powf(h - 0.5) / gamma(h + 0.5) * f)
}

/// Variance factor `V_H = Γ(2−2H)·cos(πH)/(πH(1−2H))` of the process
/// `∫ K_H(t,s) dB(s)`, whose variance is `V_H·t^{2H}`.
pub fn kernel_variance_factor(hurst: f64) -> f64 {
    if (hurst - 0.5).abs() < 1e-12 {
        return 1.0;
    }
    gamma(2.0 - 2.0 * hurst) * (PI * hurst).cos() / (PI * hurst * (1.0 - 2.0 * hurst))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// The 32-point rule used for kernel segment integrals.
pub fn gauss_legendre_32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}
