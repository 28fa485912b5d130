//! Globally adaptive Gauss–Kronrod (7, 15) quadrature for matrix-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::linalg::{frobenius, CMatrix};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Panel {
    a: f64,
    b: f64,
    value: CMatrix,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> CMatrix>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc.map(|v| v * WGK[7]);
    let mut gauss = fc.map(|v| v * WG[3]);
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += s.map(|v| v * WGK[i]);
        if i % 2 == 1 {
            gauss += s.map(|v| v * WG[i / 2]);
        }
    }
    let value = kronrod.map(|v| v * h);
    let error = frobenius(&(&value - gauss.map(|v| v * h)));
    Panel { a, b, value, error }
}

/// ∫_a^b f with absolute error estimate ≤ tol. Returns (value, error estimate, converged).
pub fn integrate<F: Fn(f64) -> CMatrix>(f: &F, a: f64, b: f64, tol: f64, max_panels: usize) -> (CMatrix, f64, bool) {
    let first = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    let mut total_err = first.error;
    heap.push(first);
    while total_err > tol && heap.len() < max_panels {
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        let left = gk15(f, worst.a, mid);
        let right = gk15(f, mid, worst.b);
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    let total_err: f64 = heap.iter().map(|p| p.error).sum();
    let mut iter = heap.into_iter();
    let mut value = iter.next().map(|p| p.value).expect("at least one panel");
    for p in iter {
        value += p.value;
    }
    (value, total_err, total_err <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn integrates_lorentzian_mass() {
        let f = |x: f64| CMatrix::from_element(1, 1, C64::new(1.0 / (std::f64::consts::PI * (1.0 + x * x)), 0.0));
        let (v, err, ok) = integrate(&f, -200.0, 200.0, 1e-12, 2000);
        let exact = 2.0 / std::f64::consts::PI * 200f64.atan();
        assert!(ok && err < 1e-12);
        assert!((v[(0, 0)].re - exact).abs() < 1e-12);
    }
}
