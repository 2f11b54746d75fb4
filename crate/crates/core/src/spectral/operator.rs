use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use super::grid::{validate_grid, GridSpec};
use super::SpectralError;
use crate::model::DriftModel;

/// Compressed sparse rows; enough for the repeated mat-vecs of the
/// eigensolver and the time stepper.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            *yi = acc;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&k| self.col[k] == j)
            .map_or(0.0, |k| self.val[k])
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    /// Factors `shift·I + scale·A`.
    pub fn factor_affine(&self, shift: f64, scale: f64) -> Result<SparseLu, SpectralError> {
        let mut trip = Vec::with_capacity(self.val.len());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k];
                let mut v = scale * self.val[k];
                if i == j {
                    v += shift;
                }
                trip.push(Triplet::new(i, j, v));
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &trip)
            .map_err(|e| SpectralError::Factorization(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| SpectralError::Factorization(format!("{e:?}")))?;
        Ok(SparseLu { lu, n: self.n })
    }
}

/// Sparse LU factorization (faer) with dense right-hand sides.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(m.as_mut());
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = m[(i, 0)];
        }
    }

    /// Solves for every column of `cols` (each of length `n`).
    pub fn solve_columns(&self, cols: &mut [Vec<f64>]) {
        let k = cols.len();
        let mut m = Mat::<f64>::from_fn(self.n, k, |i, j| cols[j][i]);
        self.lu.solve_in_place(m.as_mut());
        for (j, c) in cols.iter_mut().enumerate() {
            for (i, v) in c.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
    }
}

/// Central-difference discretization of
/// `A = εΔ + ⟨F, ∇⟩ − ε⁻¹W₀ − W₁` on the interior nodes of a Dirichlet grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedOperator {
    pub alpha: f64,
    pub eps: f64,
    pub grid: GridSpec,
    pub matrix: Csr,
    /// `W₀` at each interior node.
    pub w0: Vec<f64>,
    /// `W₁` at each interior node.
    pub w1: Vec<f64>,
    /// Nodes with `W₀ < −1e-9`.
    pub negative_potential_nodes: usize,
    /// Shift for the shift-invert eigensolver, to the right of the spectrum.
    pub shift: f64,
}

/// `F = (1 − 2α) b`.
pub fn advection(model: &DriftModel, alpha: f64, x: &[f64], out: &mut [f64]) {
    model.field(x, out);
    for v in out.iter_mut() {
        *v *= 1.0 - 2.0 * alpha;
    }
}

/// `(W₀, W₁)` with `W₀ = ¼|∇V|² − ½⟨b, ∇V⟩ + α(1 − α)|b|²` and
/// `W₁ = −½ΔV + α div b`.
pub fn potentials(model: &DriftModel, alpha: f64, x: &[f64]) -> (f64, f64) {
    let n = model.dim();
    let mut g = [0.0; crate::model::MAX_DIM];
    let mut b = [0.0; crate::model::MAX_DIM];
    model.grad_potential(x, &mut g[..n]);
    model.field(x, &mut b[..n]);
    let g2: f64 = g[..n].iter().map(|v| v * v).sum();
    let b2: f64 = b[..n].iter().map(|v| v * v).sum();
    let bg: f64 = g[..n].iter().zip(&b[..n]).map(|(u, v)| u * v).sum();
    let w0 = 0.25 * g2 - 0.5 * bg + alpha * (1.0 - alpha) * b2;
    let w1 = -0.5 * model.laplacian_potential(x) + alpha * model.div_field(x);
    (w0, w1)
}

/// Assembles the operator after checking the grid against the ground-state widths.
pub fn assemble(model: &DriftModel, alpha: f64, eps: f64, grid: &GridSpec) -> Result<DeformedOperator, SpectralError> {
    validate_grid(model, alpha, eps, grid)?;
    assemble_unchecked(model, alpha, eps, grid)
}

/// Assembles without the width checks (for convergence studies on coarse grids).
pub fn assemble_unchecked(
    model: &DriftModel,
    alpha: f64,
    eps: f64,
    grid: &GridSpec,
) -> Result<DeformedOperator, SpectralError> {
    if !(eps > 0.0) {
        return Err(SpectralError::InvalidGrid("eps must be positive".into()));
    }
    if grid.dim() != model.dim() {
        return Err(SpectralError::InvalidGrid("grid dimension differs from model dimension".into()));
    }
    if grid.dim() == 3 {
        log::warn!("three-dimensional grid with {} unknowns; memory use grows quickly", grid.n_unknowns());
    }
    let dim = grid.dim();
    let shape = grid.interior_shape();
    let n = grid.n_unknowns();
    let h: Vec<f64> = (0..dim).map(|d| grid.spacing(d)).collect();
    let mut stride = vec![1usize; dim];
    for d in 1..dim {
        stride[d] = stride[d - 1] * shape[d - 1];
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col = Vec::with_capacity(n * (2 * dim + 1));
    let mut val = Vec::with_capacity(n * (2 * dim + 1));
    let mut w0s = Vec::with_capacity(n);
    let mut w1s = Vec::with_capacity(n);
    let mut negative = 0;
    let mut x = vec![0.0; dim];
    let mut f = vec![0.0; dim];
    let mut idx = vec![0usize; dim];
    row_ptr.push(0);
    for k in 0..n {
        let mut rem = k;
        for d in 0..dim {
            idx[d] = rem % shape[d];
            rem /= shape[d];
        }
        grid.node(k, &mut x);
        advection(model, alpha, &x, &mut f);
        let (w0, w1) = potentials(model, alpha, &x);
        if w0 < -1e-9 {
            negative += 1;
        }
        w0s.push(w0);
        w1s.push(w1);

        let mut diag = -w0 / eps - w1;
        // Entries in increasing column order: lower neighbours, diagonal, upper neighbours.
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * dim + 1);
        for d in 0..dim {
            let diff = eps / (h[d] * h[d]);
            let adv = f[d] / (2.0 * h[d]);
            diag -= 2.0 * diff;
            if idx[d] > 0 {
                entries.push((k - stride[d], diff - adv));
            }
            if idx[d] + 1 < shape[d] {
                entries.push((k + stride[d], diff + adv));
            }
        }
        entries.push((k, diag));
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            col.push(c);
            val.push(v);
        }
        row_ptr.push(col.len());
    }
    if negative > 0 {
        log::warn!("NegativePotential: W0 < -1e-9 at {negative} grid nodes (alpha = {alpha})");
    }
    let shift = super::eigen::default_shift(model, alpha, eps, grid, &w0s, &w1s);
    Ok(DeformedOperator {
        alpha,
        eps,
        grid: grid.clone(),
        matrix: Csr { n, row_ptr, col, val },
        w0: w0s,
        w1: w1s,
        negative_potential_nodes: negative,
        shift,
    })
}
