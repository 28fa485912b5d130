//! Eigensolver for a Hermitian arrowhead matrix [[α, z*],[z, diag(p)]].
//!
//! Roots of the secular function f(μ) = μ − α + Σ|z_i|²/(p_i − μ) are stored as
//! (origin pole, offset) so that differences μ_k − p_i keep full relative accuracy.
//! The coupling is recomputed from the roots (Gu–Eisenstat) which makes the implicit
//! eigenvectors [1; ẑ_i/(μ_k − p_i)] numerically orthogonal.

use rayon::prelude::*;

use super::C64;

const EPS: f64 = f64::EPSILON;

/// Complex Givens rotation acting on the pole coordinates (i, j):
/// x_i ← c·x_i − s·x_j, x_j ← s̄·x_i + c·x_j.
#[derive(Debug, Clone, Copy)]
struct Rotation {
    i: usize,
    j: usize,
    c: f64,
    s: C64,
}

impl Rotation {
    fn forward(&self, x: &mut [C64]) {
        let (xi, xj) = (x[self.i], x[self.j]);
        x[self.i] = self.c * xi - self.s * xj;
        x[self.j] = self.s.conj() * xi + self.c * xj;
    }

    fn backward(&self, x: &mut [C64]) {
        let (xi, xj) = (x[self.i], x[self.j]);
        x[self.i] = self.c * xi + self.s * xj;
        x[self.j] = -self.s.conj() * xi + self.c * xj;
    }
}

#[derive(Debug, Clone, Copy)]
struct Root {
    origin: usize,
    offset: f64,
}

/// One arrowhead eigendecomposition. Eigen coordinates are ordered as the
/// secular roots (ascending) followed by the deflated pole coordinates.
#[derive(Debug, Clone)]
pub(crate) struct ArrowStage {
    m: usize,
    rotations: Vec<Rotation>,
    active: Vec<usize>,
    deflated: Vec<usize>,
    poles: Vec<f64>,
    zhat: Vec<C64>,
    roots: Vec<Root>,
    inv_norms: Vec<f64>,
    pub(crate) eigenvalues: Vec<f64>,
}

struct Secular<'a> {
    alpha: f64,
    poles: &'a [f64],
    w2: &'a [f64],
}

struct Eval {
    f: f64,
    psi_l: f64,
    dpsi_l: f64,
    psi_r: f64,
    dpsi_r: f64,
}

impl Secular<'_> {
    fn eval(&self, origin: usize, tau: f64, split: usize) -> Eval {
        let po = self.poles[origin];
        let (mut psi_l, mut dpsi_l, mut psi_r, mut dpsi_r) = (0.0, 0.0, 0.0, 0.0);
        for (i, (&p, &w)) in self.poles.iter().zip(self.w2).enumerate() {
            let del = (p - po) - tau;
            let term = w / del;
            if i < split {
                psi_l += term;
                dpsi_l += term / del;
            } else {
                psi_r += term;
                dpsi_r += term / del;
            }
        }
        let f = (po - self.alpha) + tau + psi_l + psi_r;
        Eval { f, psi_l, dpsi_l, psi_r, dpsi_r }
    }

    fn converged(&self, origin: usize, tau: f64, ev: &Eval) -> bool {
        let bound = 8.0 * EPS * (self.poles[origin].abs() + self.alpha.abs() + tau.abs() + ev.psi_r - ev.psi_l);
        ev.f.abs() <= bound
    }

    /// Root strictly between poles k−1 and k.
    fn inner_root(&self, k: usize) -> Root {
        let gap = self.poles[k] - self.poles[k - 1];
        let mid = self.eval(k - 1, 0.5 * gap, k);
        let (origin, mut lo, mut hi, mut tau) =
            if mid.f >= 0.0 { (k - 1, 0.0, 0.5 * gap, 0.5 * gap) } else { (k, -0.5 * gap, 0.0, -0.5 * gap) };
        let dl0 = self.poles[k - 1] - self.poles[origin];
        let dr0 = self.poles[k] - self.poles[origin];
        for _ in 0..200 {
            let ev = self.eval(origin, tau, k);
            if self.converged(origin, tau, &ev) || ev.f == 0.0 {
                break;
            }
            if ev.f < 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            if hi - lo <= 2.0 * EPS * lo.abs().max(hi.abs()) {
                break;
            }
            let dl = dl0 - tau;
            let dr = dr0 - tau;
            let sl = ev.dpsi_l * dl * dl;
            let sr = (ev.dpsi_r + 1.0) * dr * dr;
            let c = ev.f - sl / dl - sr / dr;
            let step = middle_way_step(c, dl, dr, sl, sr);
            let mut next = tau + step.unwrap_or(f64::NAN);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            tau = next;
        }
        Root { origin, offset: tau }
    }

    /// Root above the largest pole.
    fn upper_root(&self, znorm: f64) -> Root {
        let s = self.poles.len();
        let origin = s - 1;
        let reach = (self.alpha - self.poles[origin]).max(0.0) + znorm;
        let (mut lo, mut hi) = (0.0, reach * (1.0 + 4.0 * EPS) + EPS * self.poles[origin].abs());
        let mut tau = hi;
        for _ in 0..200 {
            let ev = self.eval(origin, tau, s);
            if self.converged(origin, tau, &ev) || ev.f == 0.0 {
                break;
            }
            if ev.f < 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            if hi - lo <= 2.0 * EPS * hi.abs() {
                break;
            }
            let dl = -tau;
            let sl = ev.dpsi_l * dl * dl;
            let a = ev.f - sl / dl;
            let b = -(dl - a);
            let cc = -(a * dl + sl);
            let disc = (b * b - 4.0 * cc).max(0.0).sqrt();
            let h = if b > 0.0 { -2.0 * cc / (b + disc) } else { 0.5 * (-b + disc) };
            let mut next = tau + h;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            tau = next;
        }
        Root { origin, offset: tau }
    }

    /// Root below the smallest pole.
    fn lower_root(&self, znorm: f64) -> Root {
        let reach = (self.poles[0] - self.alpha).max(0.0) + znorm;
        let (mut lo, mut hi) = (-(reach * (1.0 + 4.0 * EPS) + EPS * self.poles[0].abs()), 0.0);
        let mut tau = lo;
        for _ in 0..200 {
            let ev = self.eval(0, tau, 0);
            if self.converged(0, tau, &ev) || ev.f == 0.0 {
                break;
            }
            if ev.f < 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            if hi - lo <= 2.0 * EPS * lo.abs() {
                break;
            }
            let dr = -tau;
            let sr = ev.dpsi_r * dr * dr;
            let a = ev.f - sr / dr;
            let b = -(dr - a);
            let cc = -(a * dr + sr);
            let disc = (b * b - 4.0 * cc).max(0.0).sqrt();
            let h = if b < 0.0 { 2.0 * cc / (-b + disc) } else { 0.5 * (-b - disc) };
            let mut next = tau + h;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            tau = next;
        }
        Root { origin: 0, offset: tau }
    }
}

/// Step h solving c + sl/(dl − h) + sr/(dr − h) = 0 with dl < h < dr.
fn middle_way_step(c: f64, dl: f64, dr: f64, sl: f64, sr: f64) -> Option<f64> {
    let a = c;
    let b = -(c * (dl + dr) + sl + sr);
    let cc = c * dl * dr + sl * dr + sr * dl;
    let inside = |h: f64| h.is_finite() && h > dl && h < dr;
    if a.abs() <= EPS * (b.abs() + cc.abs() / dl.abs().max(dr.abs())) {
        let h = -cc / b;
        return inside(h).then_some(h);
    }
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let h1 = q / a;
    let h2 = cc / q;
    if inside(h1) {
        Some(h1)
    } else if inside(h2) {
        Some(h2)
    } else {
        None
    }
}

impl ArrowStage {
    pub(crate) fn solve(alpha: f64, z: &[C64], d: &[f64]) -> ArrowStage {
        let m = d.len();
        assert_eq!(z.len(), m);
        let znorm_all = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let dmax = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut scale = alpha.abs().max(dmax).max(znorm_all);
        if scale == 0.0 {
            scale = 1.0;
        }
        let tol = 8.0 * EPS * scale;

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        let mut zc = z.to_vec();
        let mut rotations = Vec::new();
        let mut deflated = Vec::new();
        let mut active: Vec<usize> = Vec::new();
        for &idx in &order {
            if zc[idx].norm() <= tol {
                deflated.push(idx);
                continue;
            }
            if let Some(&p) = active.last() {
                if d[idx] - d[p] <= tol {
                    let (zi, zj) = (zc[p], zc[idx]);
                    let r = (zi.norm_sqr() + zj.norm_sqr()).sqrt();
                    let c = zj.norm() / r;
                    let s = zi * zj.conj() / (r * zj.norm());
                    let rot = Rotation { i: p, j: idx, c, s };
                    rot.forward(&mut zc);
                    zc[p] = C64::new(0.0, 0.0);
                    rotations.push(rot);
                    active.pop();
                    deflated.push(p);
                }
            }
            active.push(idx);
        }

        let poles: Vec<f64> = active.iter().map(|&i| d[i]).collect();
        let zs: Vec<C64> = active.iter().map(|&i| zc[i]).collect();
        let w2: Vec<f64> = zs.iter().map(|v| v.norm_sqr()).collect();
        let s = poles.len();
        let znorm = w2.iter().sum::<f64>().sqrt();

        let (roots, zhat, inv_norms) = if s == 0 {
            (vec![Root { origin: 0, offset: alpha }], vec![], vec![1.0])
        } else {
            let sec = Secular { alpha, poles: &poles, w2: &w2 };
            let roots: Vec<Root> = (0..=s)
                .into_par_iter()
                .map(|k| {
                    if k == 0 {
                        sec.lower_root(znorm)
                    } else if k == s {
                        sec.upper_root(znorm)
                    } else {
                        sec.inner_root(k)
                    }
                })
                .collect();
            // μ_k − p_i evaluated through the root's origin pole.
            let diff = |k: usize, i: usize| -> f64 {
                let r = roots[k];
                r.offset - (poles[i] - poles[r.origin])
            };
            let zhat: Vec<C64> = (0..s)
                .into_par_iter()
                .map(|i| {
                    // |ẑ_i|² = (μ_s − p_i)(p_i − μ_0) Π_{k≠i} (μ_k − p_i)/(p_k − p_i) with interlacing pairs.
                    let mut prod = diff(s, i) * (-diff(0, i));
                    for k in 0..s {
                        if k == i {
                            continue;
                        }
                        // pair root k+1 (for k < i) or root k (for k > i) with pole k
                        let root = if k < i { k + 1 } else { k };
                        prod *= diff(root, i) / (poles[k] - poles[i]);
                    }
                    let mag = if prod > 0.0 && prod.is_finite() { prod.sqrt() } else { zs[i].norm() };
                    zs[i] * (mag / zs[i].norm())
                })
                .collect();
            let inv_norms: Vec<f64> = (0..=s)
                .into_par_iter()
                .map(|k| {
                    let mut acc = 1.0;
                    for i in 0..s {
                        let q = zhat[i].norm() / diff(k, i);
                        acc += q * q;
                    }
                    1.0 / acc.sqrt()
                })
                .collect();
            (roots, zhat, inv_norms)
        };

        let mut eigenvalues: Vec<f64> =
            if s == 0 { vec![alpha] } else { roots.iter().map(|r| poles[r.origin] + r.offset).collect() };
        for &j in &deflated {
            eigenvalues.push(d[j]);
        }
        ArrowStage { m, rotations, active, deflated, poles, zhat, roots, inv_norms, eigenvalues }
    }

    fn diff(&self, k: usize, i: usize) -> f64 {
        let r = self.roots[k];
        r.offset - (self.poles[i] - self.poles[r.origin])
    }

    /// Stage coordinates [border; poles] → eigen coefficients.
    pub(crate) fn adjoint_apply(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(x.len(), self.m + 1);
        let mut xp = x[1..].to_vec();
        for rot in &self.rotations {
            rot.forward(&mut xp);
        }
        let s = self.active.len();
        let xa: Vec<C64> = self.active.iter().map(|&i| xp[i]).collect();
        let mut out: Vec<C64> = if s == 0 {
            vec![x[0]]
        } else {
            (0..s + 1)
                .into_par_iter()
                .with_min_len(64)
                .map(|k| {
                    let mut acc = x[0];
                    for i in 0..s {
                        acc += self.zhat[i].conj() * xa[i] / self.diff(k, i);
                    }
                    acc * self.inv_norms[k]
                })
                .collect()
        };
        out.extend(self.deflated.iter().map(|&j| xp[j]));
        out
    }

    /// Eigen coefficients → stage coordinates [border; poles].
    pub(crate) fn apply(&self, c: &[C64]) -> Vec<C64> {
        debug_assert_eq!(c.len(), self.m + 1);
        let s = self.active.len();
        let weighted: Vec<C64> = (0..=s).map(|k| c[k] * self.inv_norms[k]).collect();
        let mut out = vec![C64::new(0.0, 0.0); self.m + 1];
        out[0] = weighted.iter().sum();
        if s > 0 {
            let vals: Vec<C64> = (0..s)
                .into_par_iter()
                .with_min_len(64)
                .map(|i| {
                    let mut acc = C64::new(0.0, 0.0);
                    for (k, w) in weighted.iter().enumerate() {
                        acc += w / self.diff(k, i);
                    }
                    self.zhat[i] * acc
                })
                .collect();
            for (i, v) in vals.into_iter().enumerate() {
                out[1 + self.active[i]] = v;
            }
        }
        let offset = s + 1;
        for (n, &j) in self.deflated.iter().enumerate() {
            out[1 + j] = c[offset + n];
        }
        let mut xp = out.split_off(1);
        for rot in self.rotations.iter().rev() {
            rot.backward(&mut xp);
        }
        out.extend(xp);
        out
    }
}
