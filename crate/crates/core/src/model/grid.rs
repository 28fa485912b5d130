//! λ-adapted reservoir grids and the discretized Hamiltonian H_λ.
//!
//! The asymptotic grid Y = {y_j = jΔy, |j| ≤ K/Δy} is the master object. Near each
//! eigenvalue e the physical grid carries the exact images x = e + λ²y_j with
//! weights λ²Δy; the rest of the window is filled with uniform midpoint cells.

use sha2::{Digest, Sha256};

use super::{FriedrichsModel, ModelError, Result};
use crate::linalg::bordered::BorderedHermitian;
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct GridPolicy {
    pub dy: f64,
    pub extent: f64,
    /// Background spacing; `None` picks window length / N_Y.
    pub h_bg: Option<f64>,
    /// Keep only the part of Y whose image fits in Ĩ_e instead of failing.
    pub allow_spill: bool,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy { dy: 0.05, extent: 200.0, h_bg: None, allow_spill: false }
    }
}

impl GridPolicy {
    pub fn asymptotic(&self) -> AsymptoticGrid {
        AsymptoticGrid::new(self.dy, self.extent)
    }
}

/// Uniform symmetric grid y_j = (j − M)Δy, j = 0..=2M, with weights Δy.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticGrid {
    pub dy: f64,
    pub half: usize,
    pub ys: Vec<f64>,
}

impl AsymptoticGrid {
    pub fn new(dy: f64, extent: f64) -> Self {
        let half = (extent / dy).round() as usize;
        let ys = (0..=2 * half).map(|j| (j as f64 - half as f64) * dy).collect();
        AsymptoticGrid { dy, half, ys }
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn extent(&self) -> f64 {
        self.half as f64 * self.dy
    }

    pub fn weight(&self) -> f64 {
        self.dy
    }

    /// Indices with |y_j| ≤ k.
    pub fn within(&self, k: f64) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.ys[j].abs() <= k * (1.0 + 1e-12)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOrigin {
    Background,
    Scaled { sector: usize, index: usize },
}

#[derive(Debug, Clone)]
pub struct ReservoirGrid {
    pub lambda: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub fiber_dims: Vec<usize>,
    pub cells: Vec<usize>,
    pub origins: Vec<NodeOrigin>,
    pub asymptotic: AsymptoticGrid,
    pub fingerprint: String,
}

impl ReservoirGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// (asymptotic index, node index) pairs of the scaled nodes of one sector, ascending in y.
    pub fn scaled_nodes(&self, sector: usize) -> Vec<(usize, usize)> {
        self.origins
            .iter()
            .enumerate()
            .filter_map(|(n, o)| match *o {
                NodeOrigin::Scaled { sector: s, index } if s == sector => Some((index, n)),
                _ => None,
            })
            .collect()
    }

    /// Row offsets of each node's fiber block (length nodes + 1).
    pub fn row_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.len() + 1);
        let mut acc = 0;
        off.push(0);
        for &f in &self.fiber_dims {
            acc += f;
            off.push(acc);
        }
        off
    }

    /// Largest spacing between consecutive nodes within distance `r` of `e`.
    pub fn local_spacing(&self, e: f64, r: f64) -> f64 {
        let mut h: f64 = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            if (self.nodes[j] - e).abs() <= r {
                h = h.max(*w);
            }
        }
        h
    }
}

/// Scaled-node index range for one sector: asymptotic indices whose midpoint cell maps inside Ĩ_e.
fn scaled_range(e: f64, nb: (f64, f64), lambda: f64, y: &AsymptoticGrid) -> Vec<usize> {
    let l2 = lambda * lambda;
    let half_cell = 0.5 * y.dy;
    (0..y.len())
        .filter(|&j| {
            let lo = e + l2 * (y.ys[j] - half_cell);
            let hi = e + l2 * (y.ys[j] + half_cell);
            lo >= nb.0 && hi <= nb.1
        })
        .collect()
}

pub fn build_grid(model: &FriedrichsModel, lambda: f64, policy: &GridPolicy) -> Result<ReservoirGrid> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ModelError::Invalid(format!("grid needs lambda > 0, got {lambda}")));
    }
    if !(policy.dy > 0.0) || !(policy.extent >= policy.dy) {
        return Err(ModelError::Invalid(format!("bad asymptotic grid dy={} K={}", policy.dy, policy.extent)));
    }
    let y = policy.asymptotic();
    let l2 = lambda * lambda;
    let (wa, wb) = model.partition.window;

    let mut points: Vec<(f64, f64, NodeOrigin)> = Vec::new();
    let mut zones: Vec<(f64, f64)> = Vec::new();
    for (s, &e) in model.small.eigenvalues.iter().enumerate() {
        let nb = model.neighborhoods[s];
        let range = scaled_range(e, nb, lambda, &y);
        if range.len() < y.len() && !policy.allow_spill {
            return Err(ModelError::GridConflict(format!(
                "λ²K = {:.4} exceeds the radius {:.4} of the neighbourhood of e = {e}",
                l2 * y.extent(),
                model.radius(s)
            )));
        }
        if range.is_empty() {
            continue;
        }
        let first = range[0];
        let last = range[range.len() - 1];
        zones.push((e + l2 * (y.ys[first] - 0.5 * y.dy), e + l2 * (y.ys[last] + 0.5 * y.dy)));
        for j in range {
            points.push((e + l2 * y.ys[j], l2 * y.dy, NodeOrigin::Scaled { sector: s, index: j }));
        }
    }

    let h = policy.h_bg.unwrap_or((wb - wa) / y.len() as f64);
    if !(h > 0.0) {
        return Err(ModelError::Invalid(format!("background spacing must be positive, got {h}")));
    }
    let mut cuts: Vec<f64> = vec![wa, wb];
    cuts.extend(model.partition.breakpoints());
    for &(a, b) in &zones {
        cuts.push(a.max(wa).min(wb));
        cuts.push(b.max(wa).min(wb));
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let tiny = 1e-13 * (wb - wa);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        if b - a <= tiny || zones.iter().any(|&(za, zb)| mid > za && mid < zb) {
            continue;
        }
        let n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
        let step = (b - a) / n as f64;
        for i in 0..n {
            points.push((a + (i as f64 + 0.5) * step, step, NodeOrigin::Background));
        }
    }
    points.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut cells = Vec::with_capacity(points.len());
    let mut fiber_dims = Vec::with_capacity(points.len());
    for p in &points {
        let c = model
            .partition
            .cell_of(p.0)
            .ok_or_else(|| ModelError::Invalid(format!("node {} lies in no partition cell", p.0)))?;
        cells.push(c);
        fiber_dims.push(model.partition.cells[c].fiber_dim);
    }
    let nodes: Vec<f64> = points.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = points.iter().map(|p| p.1).collect();
    let origins: Vec<NodeOrigin> = points.iter().map(|p| p.2).collect();
    let fingerprint = fingerprint(lambda, &nodes, &weights, &fiber_dims);
    Ok(ReservoirGrid { lambda, nodes, weights, fiber_dims, cells, origins, asymptotic: y, fingerprint })
}

fn fingerprint(lambda: f64, nodes: &[f64], weights: &[f64], fibers: &[usize]) -> String {
    let mut h = Sha256::new();
    h.update(lambda.to_bits().to_le_bytes());
    for ((x, w), f) in nodes.iter().zip(weights).zip(fibers) {
        h.update(x.to_bits().to_le_bytes());
        h.update(w.to_bits().to_le_bytes());
        h.update((*f as u64).to_le_bytes());
    }
    let digest = h.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// H_λ = [[E, λV*],[λV, diag(x)]] kept in bordered form.
#[derive(Debug, Clone)]
pub struct DiscretizedFriedrichs {
    pub lambda: f64,
    pub e: CMatrix,
    /// V with node-j block rows sqrt(w_j)·v(x_j).
    pub coupling: CMatrix,
    /// Reservoir diagonal, one entry per fiber row.
    pub row_values: Vec<f64>,
    pub row_offsets: Vec<usize>,
    pub grid: ReservoirGrid,
}

impl DiscretizedFriedrichs {
    pub fn small_dim(&self) -> usize {
        self.e.nrows()
    }

    pub fn dim(&self) -> usize {
        self.small_dim() + self.row_values.len()
    }

    /// s·(H_λ − shift) as a bordered matrix.
    pub fn bordered(&self, shift: f64, scale: f64) -> BorderedHermitian {
        let d = self.small_dim();
        let core = (&self.e - CMatrix::from_diagonal_element(d, d, C64::new(shift, 0.0))).map(|v| v * scale);
        let poles = self.row_values.iter().map(|x| scale * (x - shift)).collect();
        let border = self.coupling.map(|v| v * (scale * self.lambda));
        BorderedHermitian { core, poles, border }
    }

    pub fn hamiltonian_dense(&self) -> CMatrix {
        self.bordered(0.0, 1.0).to_dense()
    }
}

pub fn coupling_matrix(model: &FriedrichsModel, grid: &ReservoirGrid) -> Result<CMatrix> {
    let d = model.small_dim();
    let offsets = grid.row_offsets();
    let rows = offsets[grid.len()];
    let mut v = CMatrix::zeros(rows, d);
    for j in 0..grid.len() {
        let block = model.coupling.evaluate(grid.nodes[j], grid.cells[j], grid.fiber_dims[j], d);
        if block.nrows() != grid.fiber_dims[j] || block.ncols() != d {
            return Err(ModelError::DimensionMismatch(format!(
                "v({}) is {}x{}, expected {}x{}",
                grid.nodes[j],
                block.nrows(),
                block.ncols(),
                grid.fiber_dims[j],
                d
            )));
        }
        let sw = grid.weights[j].sqrt();
        for r in 0..block.nrows() {
            for a in 0..d {
                v[(offsets[j] + r, a)] = block[(r, a)] * sw;
            }
        }
    }
    Ok(v)
}

pub fn assemble(model: &FriedrichsModel, grid: &ReservoirGrid, lambda: f64) -> Result<DiscretizedFriedrichs> {
    if !(lambda >= 0.0) {
        return Err(ModelError::Invalid(format!("assemble needs lambda >= 0, got {lambda}")));
    }
    let coupling = coupling_matrix(model, grid)?;
    let row_offsets = grid.row_offsets();
    let mut row_values = Vec::with_capacity(coupling.nrows());
    for j in 0..grid.len() {
        for _ in 0..grid.fiber_dims[j] {
            row_values.push(grid.nodes[j]);
        }
    }
    Ok(DiscretizedFriedrichs {
        lambda,
        e: model.small.e.clone(),
        coupling,
        row_values,
        row_offsets,
        grid: grid.clone(),
    })
}
