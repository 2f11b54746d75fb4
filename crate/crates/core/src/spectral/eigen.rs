use nalgebra::DMatrix;

use super::grid::{GridPolicy, GridSpec};
use super::operator::{assemble, DeformedOperator};
use super::SpectralError;
use crate::model::{find_critical_points, DriftModel, SeedGrid};
use crate::riccati::leading_eig_linear;

/// Shift right of the spectrum: `maxⱼ eⱼ(α) + 1`, or, when no Riccati
/// value is available, `1 + max(−W₀/ε − W₁)` over the nodes nearest the
/// critical points.
pub fn default_shift(model: &DriftModel, alpha: f64, eps: f64, grid: &GridSpec, w0: &[f64], w1: &[f64]) -> f64 {
    let points = find_critical_points(model, &SeedGrid::for_model(model))
        .map(|s| s.points)
        .unwrap_or_default();
    let semiclassical = points
        .iter()
        .filter_map(|p| leading_eig_linear(&p.linearization(), alpha).ok())
        .fold(f64::NEG_INFINITY, f64::max);
    if semiclassical.is_finite() {
        return semiclassical + 1.0;
    }
    let fallback = points
        .iter()
        .map(|p| grid.nearest_node(p.location.as_slice()))
        .map(|k| -w0[k] / eps - w1[k])
        .fold(f64::NEG_INFINITY, f64::max);
    if fallback.is_finite() {
        1.0 + fallback
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigOptions {
    /// Target for `‖Aψ − λψ‖ / ‖ψ‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Subspace dimension; more than one vector separates near-degenerate
    /// Perron pairs (e.g. symmetric double wells).
    pub block: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions { tol: 1e-9, max_iter: 400, block: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub lambda: f64,
    /// Imaginary part of the selected Ritz value.
    pub imag: f64,
    /// Right eigenvector, normalized to max 1.
    pub eigvec: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub grid: GridSpec,
}

/// Entries below `-SIGN_TOL` (relative to the max) count as a sign change.
/// Tails of the ground state underflow to rounding noise, so exact
/// positivity is not observable there.
pub const SIGN_TOL: f64 = 1e-8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormalizes columns in place (twice-repeated modified Gram–Schmidt).
/// Columns that collapse are replaced by fresh deterministic vectors.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    for j in 0..cols.len() {
        for _ in 0..2 {
            for i in 0..j {
                let (head, tail) = cols.split_at_mut(j);
                let c = dot(&head[i], &tail[0]);
                for (t, h) in tail[0].iter_mut().zip(&head[i]) {
                    *t -= c * h;
                }
            }
        }
        let nrm = norm(&cols[j]);
        if nrm > 1e-300 {
            cols[j].iter_mut().for_each(|v| *v /= nrm);
        } else {
            let n = cols[j].len();
            cols[j] = (0..n).map(|k| ((k * (j + 3)) as f64 * 0.7548776662).sin()).collect();
            let nrm = norm(&cols[j]);
            cols[j].iter_mut().for_each(|v| *v /= nrm);
        }
    }
}

fn start_block(op: &DeformedOperator, block: usize) -> Vec<Vec<f64>> {
    let n = op.matrix.n;
    let dim = op.grid.dim();
    let nodes = op.grid.nodes();
    (0..block)
        .map(|j| {
            if j == 0 {
                vec![1.0; n]
            } else if j <= dim {
                (0..n).map(|k| nodes[k * dim + j - 1]).collect()
            } else {
                (0..n).map(|k| ((k * (j + 1)) as f64 * 0.6180339887).cos()).collect()
            }
        })
        .collect()
}

/// Rightmost eigenpair by shift-inverted subspace iteration with
/// Rayleigh–Ritz extraction, started from a positive vector.
pub fn leading_eigpair(op: &DeformedOperator, opts: &EigOptions) -> Result<SpectralResult, SpectralError> {
    let a = &op.matrix;
    let n = a.n;
    let p = opts.block.clamp(1, n);
    let lu = a.factor_affine(-op.shift, 1.0)?;

    let mut q = start_block(op, p);
    orthonormalize(&mut q);
    let mut aq = vec![vec![0.0; n]; p];
    let mut last = (f64::NAN, f64::NAN, f64::INFINITY);
    for iter in 1..=opts.max_iter {
        lu.solve_columns(&mut q);
        orthonormalize(&mut q);
        for j in 0..p {
            a.matvec(&q[j], &mut aq[j]);
        }
        let h = DMatrix::from_fn(p, p, |i, j| dot(&q[i], &aq[j]));
        let Ok(eig) = crate::riccati::eigenvalues(&h) else {
            continue;
        };
        let (best, _) = eig
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.re.total_cmp(&y.1.re))
            .expect("nonempty block");
        let lam = eig[best];
        if lam.im.abs() > 1e-9 * lam.re.abs().max(1.0) {
            last = (lam.re, lam.im, f64::INFINITY);
            continue;
        }
        let lam = lam.re;
        let shifted = &h - DMatrix::identity(p, p) * lam;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.expect("requested");
        let kmin = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let y: Vec<f64> = (0..p).map(|j| vt[(kmin, j)]).collect();
        let mut psi = vec![0.0; n];
        let mut apsi = vec![0.0; n];
        for j in 0..p {
            for k in 0..n {
                psi[k] += y[j] * q[j][k];
                apsi[k] += y[j] * aq[j][k];
            }
        }
        let res = apsi.iter().zip(&psi).map(|(u, v)| (u - lam * v).powi(2)).sum::<f64>().sqrt() / norm(&psi);
        last = (lam, 0.0, res);
        if res <= opts.tol {
            let (kmax, _) = psi
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .expect("nonempty");
            let scale = psi[kmax];
            psi.iter_mut().for_each(|v| *v /= scale);
            let min = psi.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -SIGN_TOL {
                return Err(SpectralError::SignFlip { min_entry: min, lambda: lam });
            }
            return Ok(SpectralResult {
                lambda: lam,
                imag: 0.0,
                eigvec: psi,
                residual: res,
                iterations: iter,
                grid: op.grid.clone(),
            });
        }
    }
    Err(SpectralError::NoConvergence { iterations: opts.max_iter, lambda: last.0, imag: last.1, residual: last.2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub lambda: f64,
    pub residual: f64,
    /// `|λ(ε) − maxⱼ eⱼ(α)|`.
    pub error: f64,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub alpha: f64,
    /// `maxⱼ eⱼ(α)`.
    pub reference: f64,
    pub rows: Vec<SweepRow>,
    /// Errors nonincreasing within 20% slack.
    pub monotone: bool,
}

/// Grid eigenvalue for each `ε` (decreasing), regridded per `ε` by the
/// policy, compared with the vanishing-noise value.
pub fn e_eps_sweep(
    model: &DriftModel,
    alpha: f64,
    eps_list: &[f64],
    policy: &GridPolicy,
    opts: &EigOptions,
) -> Result<Sweep, SpectralError> {
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(SpectralError::InvalidGrid("eps list must be strictly decreasing".into()));
    }
    let points = find_critical_points(model, &SeedGrid::for_model(model))?.points;
    let mut reference = f64::NEG_INFINITY;
    for p in &points {
        reference = reference.max(leading_eig_linear(&p.linearization(), alpha)?);
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let grid = policy.grid_for(model, alpha, eps)?;
        log::info!("sweep eps = {eps}: grid {:?} points", grid.n);
        let op = assemble(model, alpha, eps, &grid)?;
        let res = leading_eigpair(&op, opts)?;
        rows.push(SweepRow {
            eps,
            lambda: res.lambda,
            residual: res.residual,
            error: (res.lambda - reference).abs(),
            grid,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].error <= 1.2 * w[0].error);
    Ok(Sweep { alpha, reference, rows, monotone })
}
