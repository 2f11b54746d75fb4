use nalgebra::DVector;

use super::SpectralError;
use crate::model::{check_assumptions, find_critical_points, DriftModel, SeedGrid};
use crate::riccati::{build_coeffs, solve_are};

/// Minimum number of points per dimension.
pub const MIN_POINTS: usize = 32;

/// Tensor grid on a box with Dirichlet boundary. Only interior nodes carry
/// unknowns; node `(i₁, …, i_N)` counts boundary points, so interior
/// indices run over `1..n-1` in each dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per dimension including both boundary points.
    pub n: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n: Vec<usize>) -> Result<Self, SpectralError> {
        if lo.len() != hi.len() || lo.len() != n.len() || lo.is_empty() {
            return Err(SpectralError::InvalidGrid("lo, hi and n must share the model dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(SpectralError::InvalidGrid("box must have hi > lo in every dimension".into()));
        }
        if let Some(&bad) = n.iter().find(|&&k| k < MIN_POINTS) {
            return Err(SpectralError::InvalidGrid(format!("{bad} points per dimension, need at least {MIN_POINTS}")));
        }
        Ok(GridSpec { lo, hi, n })
    }

    /// Square box `[lo, hi]^dim` with `n` points per dimension.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self, SpectralError> {
        GridSpec::new(vec![lo; dim], vec![hi; dim], vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn spacing(&self, d: usize) -> f64 {
        (self.hi[d] - self.lo[d]) / (self.n[d] - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|d| self.spacing(d)).fold(0.0, f64::max)
    }

    pub fn interior_shape(&self) -> Vec<usize> {
        self.n.iter().map(|k| k - 2).collect()
    }

    pub fn n_unknowns(&self) -> usize {
        self.interior_shape().iter().product()
    }

    /// Coordinates of interior unknown `idx`; dimension 0 varies fastest.
    pub fn node(&self, mut idx: usize, out: &mut [f64]) {
        for d in 0..self.dim() {
            let m = self.n[d] - 2;
            let i = idx % m;
            idx /= m;
            out[d] = self.lo[d] + (i + 1) as f64 * self.spacing(d);
        }
    }

    /// All interior node coordinates, flattened in unknown order.
    pub fn nodes(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut out = vec![0.0; self.n_unknowns() * dim];
        for (k, chunk) in out.chunks_mut(dim).enumerate() {
            self.node(k, chunk);
        }
        out
    }

    /// Interior unknown closest to `x`.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for d in 0..self.dim() {
            let m = self.n[d] - 2;
            let i = ((x[d] - self.lo[d]) / self.spacing(d)).round() as i64 - 1;
            let i = i.clamp(0, m as i64 - 1) as usize;
            idx += i * stride;
            stride *= m;
        }
        idx
    }

    /// Product of spacings, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.spacing(d)).product()
    }
}

/// Localization width `√(ε / λ_min(Xⱼ))` of the ground state at each
/// critical point, from the Riccati solution at `alpha`.
pub fn critical_widths(model: &DriftModel, alpha: f64, eps: f64) -> Result<Vec<(DVector<f64>, f64)>, SpectralError> {
    let set = find_critical_points(model, &SeedGrid::for_model(model))?;
    let mut out = Vec::new();
    for p in set.points {
        match solve_are(&build_coeffs(&p.linearization(), alpha)) {
            Ok(sol) => {
                let lam = sol.x.symmetric_eigenvalues().min();
                if lam > 0.0 {
                    out.push((p.location, (eps / lam).sqrt()));
                } else {
                    log::warn!("Riccati solution at {:?} is not positive definite; width skipped", p.location.as_slice());
                }
            }
            Err(e) => log::warn!("no Riccati width at {:?}: {e}", p.location.as_slice()),
        }
    }
    Ok(out)
}

/// Checks spacing `h ≤ width/6` and a margin of four widths around every
/// critical point.
pub fn validate_grid(model: &DriftModel, alpha: f64, eps: f64, grid: &GridSpec) -> Result<(), SpectralError> {
    if grid.dim() != model.dim() {
        return Err(SpectralError::InvalidGrid("grid dimension differs from model dimension".into()));
    }
    let widths = critical_widths(model, alpha, eps)?;
    let Some(min_width) = widths.iter().map(|w| w.1).reduce(f64::min) else {
        return Ok(());
    };
    let max_width = widths.iter().map(|w| w.1).fold(0.0, f64::max);
    let h = grid.max_spacing();
    if h > min_width / 6.0 {
        return Err(SpectralError::GridTooCoarse { spacing: h, width: min_width });
    }
    for (loc, _) in &widths {
        for d in 0..grid.dim() {
            let margin = (loc[d] - grid.lo[d]).min(grid.hi[d] - loc[d]);
            if margin < 4.0 * max_width {
                return Err(SpectralError::BoxTooSmall { margin, required: 4.0 * max_width });
            }
        }
    }
    Ok(())
}

/// Rule for sizing a grid from `(model, α, ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPolicy {
    /// Box margin around the critical points, in widths.
    pub margin_widths: f64,
    /// Grid points per smallest width.
    pub points_per_width: f64,
    /// Upper bound on the cell Péclet number `|F| h / (2ε)`; keeps the
    /// central-difference operator's off-diagonals nonnegative.
    pub max_peclet: f64,
    pub max_points_per_dim: usize,
    /// Faces are pulled in to where the Agmon bound on the ground state
    /// drops below `e^{−decay_exponent}`; never closer than four widths.
    pub decay_exponent: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy { margin_widths: 6.0, points_per_width: 8.0, max_peclet: 0.9, max_points_per_dim: 1200, decay_exponent: 20.0 }
    }
}

impl GridPolicy {
    pub fn grid_for(&self, model: &DriftModel, alpha: f64, eps: f64) -> Result<GridSpec, SpectralError> {
        let widths = critical_widths(model, alpha, eps)?;
        if widths.is_empty() {
            return Err(SpectralError::InvalidGrid("no critical point with a usable width".into()));
        }
        let dim = model.dim();
        let max_w = widths.iter().map(|w| w.1).fold(0.0, f64::max);
        let min_w = widths.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for (loc, _) in &widths {
            for d in 0..dim {
                lo[d] = lo[d].min(loc[d] - self.margin_widths * max_w);
                hi[d] = hi[d].max(loc[d] + self.margin_widths * max_w);
            }
        }
        let cap = self.trim_box(model, alpha, eps, &widths, max_w, &mut lo, &mut hi);
        let mut h = min_w / self.points_per_width;
        let fmax = max_advection(model, alpha, &lo, &hi, cap);
        if fmax > 0.0 {
            h = h.min(self.max_peclet * 2.0 * eps / fmax);
        }
        let n: Vec<usize> = (0..dim)
            .map(|d| (((hi[d] - lo[d]) / h).ceil() as usize + 1).max(MIN_POINTS))
            .collect();
        if let Some(&big) = n.iter().find(|&&k| k > self.max_points_per_dim) {
            return Err(SpectralError::InvalidGrid(format!(
                "policy asks for {big} points per dimension (limit {})",
                self.max_points_per_dim
            )));
        }
        GridSpec::new(lo, hi, n)
    }
}

impl GridPolicy {
    /// For `α ∈ [0, 1]`, `W₀ ≥ (¼ − ½k_b)|∇V|²`, so the ground state decays
    /// at least like `exp(−√(1 − 2k_b)(V − V_c)/(2ε))` with `V_c` the largest
    /// critical value. Each face moves inward while that factor stays below
    /// `e^{−L}` on the whole (sampled) face. Returns the potential cap
    /// `V_c + level/2` (bound `e^{−L/2}`) beyond which the Péclet limit is
    /// not enforced, or `None` when the bound does not apply.
    #[allow(clippy::too_many_arguments)]
    fn trim_box(
        &self,
        model: &DriftModel,
        alpha: f64,
        eps: f64,
        widths: &[(DVector<f64>, f64)],
        max_w: f64,
        lo: &mut [f64],
        hi: &mut [f64],
    ) -> Option<f64> {
        if !(0.0..=1.0).contains(&alpha) || !(self.decay_exponent > 0.0) {
            return None;
        }
        let k_b = check_assumptions(model, 4000, 0).k_b_hat;
        if !(k_b < 0.5) {
            return None;
        }
        let v_c = widths
            .iter()
            .map(|(loc, _)| model.potential(loc.as_slice()))
            .fold(f64::NEG_INFINITY, f64::max);
        let level = 2.0 * eps * self.decay_exponent / (1.0 - 2.0 * k_b).sqrt();
        let dim = lo.len();
        let mut inner_lo = vec![f64::INFINITY; dim];
        let mut inner_hi = vec![f64::NEG_INFINITY; dim];
        for (loc, _) in widths {
            for d in 0..dim {
                inner_lo[d] = inner_lo[d].min(loc[d] - 4.0 * max_w - 1e-9);
                inner_hi[d] = inner_hi[d].max(loc[d] + 4.0 * max_w + 1e-9);
            }
        }
        // Faces are tested against the current box, one side at a time.
        let face_clear = |lo: &[f64], hi: &[f64], d: usize, at: f64| -> bool {
            let per = 33usize;
            let total = per.pow(dim as u32 - 1);
            let mut x = vec![0.0; dim];
            for flat in 0..total {
                let mut rem = flat;
                for e in 0..dim {
                    if e == d {
                        x[e] = at;
                        continue;
                    }
                    x[e] = lo[e] + (hi[e] - lo[e]) * (rem % per) as f64 / (per - 1) as f64;
                    rem /= per;
                }
                if model.potential(&x) - v_c < level {
                    return false;
                }
            }
            true
        };
        for d in 0..dim {
            for upper in [false, true] {
                let (mut inside, mut outside) = if upper { (inner_hi[d], hi[d]) } else { (inner_lo[d], lo[d]) };
                if (upper && inside >= outside) || (!upper && inside <= outside) || !face_clear(lo, hi, d, outside) {
                    continue;
                }
                if face_clear(lo, hi, d, inside) {
                    outside = inside;
                } else {
                    for _ in 0..40 {
                        let mid = 0.5 * (inside + outside);
                        if face_clear(lo, hi, d, mid) {
                            outside = mid;
                        } else {
                            inside = mid;
                        }
                    }
                }
                if upper {
                    hi[d] = outside;
                } else {
                    lo[d] = outside;
                }
            }
        }
        Some(v_c + 0.5 * level)
    }
}

/// Largest `|(1 − 2α) b|` sampled on a 64ᴺ lattice over the box, skipping
/// points with `V` above `cap`.
fn max_advection(model: &DriftModel, alpha: f64, lo: &[f64], hi: &[f64], cap: Option<f64>) -> f64 {
    let dim = model.dim();
    let per = 64usize;
    let total = per.pow(dim as u32);
    let mut x = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    let mut best: f64 = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        for d in 0..dim {
            x[d] = lo[d] + (hi[d] - lo[d]) * (rem % per) as f64 / (per - 1) as f64;
            rem /= per;
        }
        if cap.is_some_and(|c| model.potential(&x) > c) {
            continue;
        }
        model.field(&x, &mut b);
        best = best.max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    best * (1.0 - 2.0 * alpha).abs()
}
