//! Oscillatory simplex kernels built from divided differences of f(x) = e^{−itx}.
//!
//! phi1(a, b; t) = ∫₀ᵗ e^{−i(t−u)a} e^{−iub} du = i·f[a, b]
//! phi2(a, b, c; t) = ∬_{u₁+u₂≤t} e^{−iu₂a} e^{−i(t−u₁−u₂)b} e^{−iu₁c} = −f[a, b, c]

use super::{C64, I};

/// Below this value of |gap|·t the kernels switch to their confluent Taylor series.
pub const CONFLUENCE_THETA: f64 = 1e-4;

/// sin(w)/w for small complex w.
fn sinc_series(w: C64) -> C64 {
    let w2 = w * w;
    1.0 - w2 / 6.0 + w2 * w2 / 120.0 - w2 * w2 * w2 / 5040.0
}

/// First divided difference of e^{−itx}.
fn divided_difference1(a: C64, b: C64, t: f64) -> C64 {
    let delta = a - b;
    let half = 0.5 * t * delta;
    let mid = 0.5 * (a + b);
    if delta.norm() * t < CONFLUENCE_THETA {
        return -I * t * (-I * t * mid).exp() * sinc_series(half);
    }
    if half.im.abs() > 20.0 {
        return ((-I * t * a).exp() - (-I * t * b).exp()) / delta;
    }
    -I * t * (-I * t * mid).exp() * (half.sin() / half)
}

pub fn phi1(a: C64, b: C64, t: f64) -> C64 {
    I * divided_difference1(a, b, t)
}

/// Complete homogeneous symmetric polynomials h_0..=h_max of three variables.
fn complete_homogeneous(x: [C64; 3], max: usize) -> Vec<C64> {
    let mut h = vec![C64::new(0.0, 0.0); max + 1];
    let mut p = C64::new(1.0, 0.0);
    for v in h.iter_mut() {
        *v = p;
        p *= x[0];
    }
    for &xi in &x[1..] {
        for j in 1..=max {
            let prev = h[j - 1];
            h[j] += xi * prev;
        }
    }
    h
}

/// Second divided difference f[a, b, c] of f(x) = e^{−itx}.
pub fn divided_difference2(a: C64, b: C64, c: C64, t: f64) -> C64 {
    let gaps = [(a - c).norm(), (a - b).norm(), (b - c).norm()];
    let widest = gaps.iter().cloned().fold(0.0, f64::max);
    if widest * t < CONFLUENCE_THETA {
        let m = (a + b + c) / 3.0;
        let h = complete_homogeneous([a - m, b - m, c - m], 6);
        let mut sum = C64::new(0.0, 0.0);
        let mut coef = C64::new(1.0, 0.0);
        for k in 1..=8usize {
            coef *= -I * t / k as f64;
            if k >= 2 {
                sum += coef * h[k - 2];
            }
        }
        return (-I * t * m).exp() * sum;
    }
    if gaps[0] >= gaps[1] && gaps[0] >= gaps[2] {
        (divided_difference1(a, b, t) - divided_difference1(b, c, t)) / (a - c)
    } else if gaps[1] >= gaps[2] {
        (divided_difference1(a, c, t) - divided_difference1(c, b, t)) / (a - b)
    } else {
        (divided_difference1(b, a, t) - divided_difference1(a, c, t)) / (b - c)
    }
}

pub fn phi2(a: C64, b: C64, c: C64, t: f64) -> C64 {
    -divided_difference2(a, b, c, t)
}
