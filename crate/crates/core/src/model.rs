//! Drift models `dX = (-∇V + b) dt + sqrt(2ε) dW`.
//!
//! A [`DriftModel`] bundles a potential `V` and a nonconservative field `b`
//! together with their first and second derivatives. Only the builtin
//! families are supported; every evaluator is an analytic formula.
//!
//! This module also locates and classifies the critical points of `V` and
//! runs sampled checks of the standing growth assumptions on `(V, b)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::riccati::LocalLinearization;

/// Largest dimension supported by the builtin families.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate critical point at {location:?} (|det D²V| = {det:e})")]
    DegenerateCritical { location: Vec<f64>, det: f64 },
}

/// Builtin model families.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `V = ½⟨x, Cx⟩`, `b = Bm x`.
    Linear { hess: DMatrix<f64>, jac: DMatrix<f64> },
    /// `V = ½|x|²`, `b = ωJx` in two dimensions.
    Rotation { omega: f64 },
    /// `V = ¼(x₁² − 1)² + ½x₂²`, `b = ω(1 + βx₁) J∇V`, tapered to zero far out.
    TwoWell { omega: f64, beta: f64 },
}

/// Smooth cutoff `τ(|x|)`: 1 inside `inner`, 0 outside `outer`, C² in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taper {
    pub inner: f64,
    pub outer: f64,
}

impl Taper {
    fn value_and_slope(&self, r: f64) -> (f64, f64) {
        if r <= self.inner {
            return (1.0, 0.0);
        }
        if r >= self.outer {
            return (0.0, 0.0);
        }
        let w = self.outer - self.inner;
        let u = (r - self.inner) / w;
        let step = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        let dstep = 30.0 * u * u * (1.0 - u) * (1.0 - u);
        (1.0 - step, -dstep / w)
    }
}

impl Default for Taper {
    fn default() -> Self {
        Taper { inner: 25.0, outer: 35.0 }
    }
}

/// Evaluable bundle `(V, ∇V, D²V, b, Db, div b)`.
///
/// Immutable after construction; all evaluators are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftModel {
    builtin: Builtin,
    dim: usize,
    check_radius: f64,
    taper: Taper,
}

// Rotation generator: J(x₁, x₂) = (−x₂, x₁).
#[inline]
fn rot(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

impl DriftModel {
    pub fn linear(hess: DMatrix<f64>, jac: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = hess.nrows();
        if n == 0 || n > MAX_DIM || !hess.is_square() {
            return Err(ModelError::InvalidParams(format!(
                "C must be square with dimension 1..={MAX_DIM}"
            )));
        }
        if jac.shape() != (n, n) {
            return Err(ModelError::InvalidParams("Bm must have the shape of C".into()));
        }
        if (&hess - hess.transpose()).amax() > 1e-12 * hess.amax().max(1.0) {
            return Err(ModelError::InvalidParams("C must be symmetric".into()));
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        if hess.clone().cholesky().is_none() {
            return Err(ModelError::InvalidParams("C must be positive definite".into()));
        }
        Ok(DriftModel {
            builtin: Builtin::Linear { hess, jac },
            dim: n,
            check_radius: 3.0,
            taper: Taper::default(),
        })
    }

    pub fn rotation(omega: f64) -> Self {
        DriftModel {
            builtin: Builtin::Rotation { omega },
            dim: 2,
            check_radius: 3.0,
            taper: Taper::default(),
        }
    }

    pub fn twowell(omega: f64, beta: f64) -> Self {
        DriftModel {
            builtin: Builtin::TwoWell { omega, beta },
            dim: 2,
            check_radius: 3.0,
            taper: Taper::default(),
        }
    }

    pub fn with_check_radius(mut self, radius: f64) -> Result<Self, ModelError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(ModelError::InvalidParams("check_radius must be positive".into()));
        }
        self.check_radius = radius;
        Ok(self)
    }

    pub fn with_taper(mut self, taper: Taper) -> Result<Self, ModelError> {
        if !(taper.inner > 0.0 && taper.outer > taper.inner) {
            return Err(ModelError::InvalidParams("taper needs 0 < inner < outer".into()));
        }
        self.taper = taper;
        Ok(self)
    }

    pub fn builtin(&self) -> &Builtin {
        &self.builtin
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn check_radius(&self) -> f64 {
        self.check_radius
    }

    pub fn taper(&self) -> Taper {
        self.taper
    }

    /// Hessian of `V` when `V` is an exact quadratic form centred at 0.
    pub fn quadratic_hessian(&self) -> Option<DMatrix<f64>> {
        match &self.builtin {
            Builtin::Linear { hess, .. } => Some(hess.clone()),
            Builtin::Rotation { .. } => Some(DMatrix::identity(2, 2)),
            Builtin::TwoWell { .. } => None,
        }
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        match &self.builtin {
            Builtin::Linear { hess, .. } => {
                let mut acc = 0.0;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        acc += x[i] * hess[(i, j)] * x[j];
                    }
                }
                0.5 * acc
            }
            Builtin::Rotation { .. } => 0.5 * (x[0] * x[0] + x[1] * x[1]),
            Builtin::TwoWell { .. } => {
                let q = x[0] * x[0] - 1.0;
                0.25 * q * q + 0.5 * x[1] * x[1]
            }
        }
    }

    pub fn grad_potential(&self, x: &[f64], out: &mut [f64]) {
        match &self.builtin {
            Builtin::Linear { hess, .. } => {
                for i in 0..self.dim {
                    out[i] = (0..self.dim).map(|j| hess[(i, j)] * x[j]).sum();
                }
            }
            Builtin::Rotation { .. } => {
                out[0] = x[0];
                out[1] = x[1];
            }
            Builtin::TwoWell { .. } => {
                out[0] = (x[0] * x[0] - 1.0) * x[0];
                out[1] = x[1];
            }
        }
    }

    pub fn hess_potential(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.builtin {
            Builtin::Linear { hess, .. } => hess.clone(),
            Builtin::Rotation { .. } => DMatrix::identity(2, 2),
            Builtin::TwoWell { .. } => {
                DMatrix::from_row_slice(2, 2, &[3.0 * x[0] * x[0] - 1.0, 0.0, 0.0, 1.0])
            }
        }
    }

    pub fn laplacian_potential(&self, x: &[f64]) -> f64 {
        match &self.builtin {
            Builtin::Linear { hess, .. } => hess.trace(),
            Builtin::Rotation { .. } => 2.0,
            Builtin::TwoWell { .. } => 3.0 * x[0] * x[0],
        }
    }

    /// Scalar prefactor `s(x) = ω(1 + βx₁)τ(|x|)` of the two-well field and its gradient.
    fn twowell_scale(&self, omega: f64, beta: f64, x: &[f64]) -> (f64, [f64; 2]) {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let (tau, dtau) = self.taper.value_and_slope(r);
        let lin = 1.0 + beta * x[0];
        let s = omega * lin * tau;
        let mut grad = [omega * beta * tau, 0.0];
        if dtau != 0.0 {
            grad[0] += omega * lin * dtau * x[0] / r;
            grad[1] += omega * lin * dtau * x[1] / r;
        }
        (s, grad)
    }

    pub fn field(&self, x: &[f64], out: &mut [f64]) {
        match &self.builtin {
            Builtin::Linear { jac, .. } => {
                for i in 0..self.dim {
                    out[i] = (0..self.dim).map(|j| jac[(i, j)] * x[j]).sum();
                }
            }
            Builtin::Rotation { omega } => {
                let j = rot([x[0], x[1]]);
                out[0] = omega * j[0];
                out[1] = omega * j[1];
            }
            Builtin::TwoWell { omega, beta } => {
                let (s, _) = self.twowell_scale(*omega, *beta, x);
                let j = rot([(x[0] * x[0] - 1.0) * x[0], x[1]]);
                out[0] = s * j[0];
                out[1] = s * j[1];
            }
        }
    }

    pub fn jac_field(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.builtin {
            Builtin::Linear { jac, .. } => jac.clone(),
            Builtin::Rotation { omega } => {
                DMatrix::from_row_slice(2, 2, &[0.0, -omega, *omega, 0.0])
            }
            Builtin::TwoWell { omega, beta } => {
                let (s, ds) = self.twowell_scale(*omega, *beta, x);
                let h = self.hess_potential(x);
                let jmat = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
                let jg = rot([(x[0] * x[0] - 1.0) * x[0], x[1]]);
                // D(sJ∇V) = s J D²V + (J∇V)(∇s)ᵀ
                let mut out = (jmat * h) * s;
                for i in 0..2 {
                    for k in 0..2 {
                        out[(i, k)] += jg[i] * ds[k];
                    }
                }
                out
            }
        }
    }

    pub fn div_field(&self, x: &[f64]) -> f64 {
        match &self.builtin {
            Builtin::Linear { jac, .. } => jac.trace(),
            Builtin::Rotation { .. } => 0.0,
            Builtin::TwoWell { omega, beta } => {
                // tr(J D²V) = 0, leaving ⟨∇s, J∇V⟩.
                let (_, ds) = self.twowell_scale(*omega, *beta, x);
                let jg = rot([(x[0] * x[0] - 1.0) * x[0], x[1]]);
                ds[0] * jg[0] + ds[1] * jg[1]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CriticalKind {
    LocalMin,
    Saddle,
    LocalMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub location: DVector<f64>,
    /// `D²V` at the point.
    pub hess: DMatrix<f64>,
    /// `Db` at the point.
    pub jac: DMatrix<f64>,
    pub kind: CriticalKind,
    /// `|b|` at the point; zero up to rounding when the model is consistent.
    pub b_norm: f64,
}

impl CriticalPoint {
    pub fn linearization(&self) -> LocalLinearization<f64> {
        LocalLinearization::new(self.hess.clone(), self.jac.clone())
    }

    pub fn is_local_min(&self) -> bool {
        self.kind == CriticalKind::LocalMin
    }
}

/// Regular grid of Newton seeds covering the check ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedGrid {
    pub per_dim: usize,
    pub radius: f64,
}

impl SeedGrid {
    pub fn for_model(model: &DriftModel) -> Self {
        SeedGrid { per_dim: 11, radius: model.check_radius() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSet {
    /// Sorted lexicographically by location.
    pub points: Vec<CriticalPoint>,
    /// Seeds whose Newton iteration did not converge.
    pub discarded_seeds: usize,
}

const NEWTON_MAX_ITER: usize = 100;
const DEDUP_RADIUS: f64 = 1e-6;
const DET_FLOOR: f64 = 1e-10;

fn newton_root(model: &DriftModel, seed: &[f64]) -> Option<DVector<f64>> {
    let n = model.dim();
    let mut x = DVector::from_column_slice(seed);
    let mut g = vec![0.0; n];
    for _ in 0..NEWTON_MAX_ITER {
        model.grad_potential(x.as_slice(), &mut g);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !gnorm.is_finite() {
            return None;
        }
        if gnorm <= 1e-13 {
            return Some(x);
        }
        let h = model.hess_potential(x.as_slice());
        let step = h.lu().solve(&DVector::from_column_slice(&g))?;
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        x -= &step;
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            model.grad_potential(x.as_slice(), &mut g);
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            return (gnorm <= 1e-10).then_some(x);
        }
    }
    None
}

fn classify(hess: &DMatrix<f64>) -> CriticalKind {
    let eig = hess.clone().symmetric_eigenvalues();
    if eig.iter().all(|&v| v > 0.0) {
        CriticalKind::LocalMin
    } else if eig.iter().all(|&v| v < 0.0) {
        CriticalKind::LocalMax
    } else {
        CriticalKind::Saddle
    }
}

/// Locates the critical points of `V` inside the check ball by Newton's
/// method on `∇V = 0` from every seed of `grid`.
pub fn find_critical_points(model: &DriftModel, grid: &SeedGrid) -> Result<CriticalSet, ModelError> {
    let n = model.dim();
    let per = grid.per_dim.max(1);
    let total = per.pow(n as u32);
    let coord = |k: usize| {
        if per == 1 {
            0.0
        } else {
            -grid.radius + 2.0 * grid.radius * k as f64 / (per - 1) as f64
        }
    };

    let mut roots: Vec<DVector<f64>> = Vec::new();
    let mut discarded = 0;
    let mut seed = vec![0.0; n];
    for flat in 0..total {
        let mut rem = flat;
        for s in seed.iter_mut() {
            *s = coord(rem % per);
            rem /= per;
        }
        match newton_root(model, &seed) {
            Some(root) => {
                if root.norm() > model.check_radius() * (1.0 + 1e-9) {
                    continue;
                }
                if roots.iter().all(|r| (r - &root).norm() > DEDUP_RADIUS) {
                    roots.push(root);
                }
            }
            None => discarded += 1,
        }
    }
    if discarded > 0 {
        log::warn!("{discarded} Newton seeds did not converge and were discarded");
    }

    roots.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut points = Vec::with_capacity(roots.len());
    let mut bvec = vec![0.0; n];
    for location in roots {
        let x = location.as_slice();
        let hess = model.hess_potential(x);
        let det = hess.determinant();
        if det.abs() < DET_FLOOR {
            return Err(ModelError::DegenerateCritical { location: x.to_vec(), det });
        }
        model.field(x, &mut bvec);
        let b_norm = bvec.iter().map(|v| v * v).sum::<f64>().sqrt();
        points.push(CriticalPoint {
            kind: classify(&hess),
            jac: model.jac_field(x),
            hess,
            b_norm,
            location,
        });
    }
    Ok(CriticalSet { points, discarded_seeds: discarded })
}

/// Sampled estimates of the growth constants of `(V, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Sampled sup of `⟨b, ∇V⟩ / |∇V|²`, clamped at 0.
    pub k_b_hat: f64,
    /// Sampled sup of `|b|² / |∇V|²`.
    pub h_b_hat: f64,
    /// Sampled inf of `⟨∇V − b, x⟩ − |x|²` (identity weight matrix).
    pub l1_margin: f64,
    /// Smallest constant making the dissipation bound hold on the samples.
    pub l1_constant: f64,
    pub n_samples: usize,
    pub pass_rb: bool,
}

const CRITICAL_EXCLUSION: f64 = 1e-3;

/// Samples the check ball uniformly and reports worst-case ratios.
///
/// A sampled check can refute the growth assumptions but never prove them.
pub fn check_assumptions(model: &DriftModel, n_samples: usize, rng_seed: u64) -> AssumptionReport {
    let n = model.dim();
    let radius = model.check_radius();
    let critical: Vec<DVector<f64>> = find_critical_points(model, &SeedGrid::for_model(model))
        .map(|set| set.points.into_iter().map(|p| p.location).collect())
        .unwrap_or_default();

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut k_b: f64 = 0.0;
    let mut h_b: f64 = 0.0;
    let mut l1 = f64::INFINITY;
    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut taken = 0;
    while taken < n_samples.max(1) {
        let mut norm = 0.0;
        for xi in x.iter_mut() {
            *xi = rng.sample::<f64, _>(StandardNormal);
            norm += *xi * *xi;
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
        for xi in x.iter_mut() {
            *xi *= r / norm;
        }
        let near_critical = critical.iter().any(|c| {
            c.iter().zip(&x).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt() < CRITICAL_EXCLUSION
        });
        if near_critical {
            continue;
        }
        taken += 1;
        model.grad_potential(&x, &mut g);
        model.field(&x, &mut b);
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let bg: f64 = b.iter().zip(&g).map(|(u, v)| u * v).sum();
        let b2: f64 = b.iter().map(|v| v * v).sum();
        if g2 > 0.0 {
            k_b = k_b.max(bg / g2);
            h_b = h_b.max(b2 / g2);
        }
        let x2: f64 = x.iter().map(|v| v * v).sum();
        let dissip: f64 = (0..n).map(|i| (g[i] - b[i]) * x[i]).sum();
        l1 = l1.min(dissip - x2);
    }
    AssumptionReport {
        k_b_hat: k_b,
        h_b_hat: h_b,
        l1_margin: l1,
        l1_constant: (-l1).max(0.0),
        n_samples: taken,
        pass_rb: k_b < 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_points(n: usize, dim: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-radius..radius)).collect())
            .collect()
    }

    fn builtins() -> Vec<DriftModel> {
        vec![
            DriftModel::rotation(1.3),
            DriftModel::twowell(1.0, 0.3),
            DriftModel::twowell(2.0, -0.2).with_taper(Taper { inner: 1.5, outer: 2.5 }).unwrap(),
            DriftModel::linear(
                DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]),
                DMatrix::from_row_slice(3, 3, &[0.1, -1.0, 0.2, 1.0, 0.0, 0.5, -0.3, 0.2, -0.1]),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn gradients_match_finite_differences() {
        for model in builtins() {
            let n = model.dim();
            for x in random_points(100, n, 3.0, 7) {
                let mut g = vec![0.0; n];
                model.grad_potential(&x, &mut g);
                let h = 1e-5;
                let mut xp = x.clone();
                for i in 0..n {
                    xp[i] = x[i] + h;
                    let vp = model.potential(&xp);
                    xp[i] = x[i] - h;
                    let vm = model.potential(&xp);
                    xp[i] = x[i];
                    let fd = (vp - vm) / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "{fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn hessian_and_jacobian_match_finite_differences() {
        for model in builtins() {
            let n = model.dim();
            for x in random_points(50, n, 2.4, 11) {
                let hess = model.hess_potential(&x);
                let jac = model.jac_field(&x);
                assert_abs_diff_eq!((&hess - hess.transpose()).amax(), 0.0);
                assert_abs_diff_eq!(model.div_field(&x), jac.trace(), epsilon = 1e-10);
                assert_abs_diff_eq!(model.laplacian_potential(&x), hess.trace(), epsilon = 1e-12);
                let h = 1e-6;
                let mut xp = x.clone();
                let (mut gp, mut gm, mut bp, mut bm) =
                    (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
                for k in 0..n {
                    xp[k] = x[k] + h;
                    model.grad_potential(&xp, &mut gp);
                    model.field(&xp, &mut bp);
                    xp[k] = x[k] - h;
                    model.grad_potential(&xp, &mut gm);
                    model.field(&xp, &mut bm);
                    xp[k] = x[k];
                    for i in 0..n {
                        let scale = 1.0 + hess[(i, k)].abs() + jac[(i, k)].abs();
                        assert!(((gp[i] - gm[i]) / (2.0 * h) - hess[(i, k)]).abs() < 1e-6 * scale);
                        assert!(((bp[i] - bm[i]) / (2.0 * h) - jac[(i, k)]).abs() < 1e-6 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn linear_identity_rotation_equals_rotation() {
        let w = 0.7;
        let lin = DriftModel::linear(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0]),
        )
        .unwrap();
        let rot = DriftModel::rotation(w);
        for x in random_points(20, 2, 3.0, 3) {
            assert_eq!(lin.potential(&x), rot.potential(&x));
            let (mut a, mut b) = (vec![0.0; 2], vec![0.0; 2]);
            lin.grad_potential(&x, &mut a);
            rot.grad_potential(&x, &mut b);
            assert_eq!(a, b);
            lin.field(&x, &mut a);
            rot.field(&x, &mut b);
            assert_eq!(a, b);
            assert_eq!(lin.hess_potential(&x), rot.hess_potential(&x));
            assert_eq!(lin.jac_field(&x), rot.jac_field(&x));
            assert_eq!(lin.div_field(&x), rot.div_field(&x));
        }
    }

    #[test]
    fn linear_rejects_indefinite_hessian() {
        let err = DriftModel::linear(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            DMatrix::zeros(2, 2),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::InvalidParams(_)));
    }

    #[test]
    fn twowell_critical_points() {
        let model = DriftModel::twowell(1.0, 0.0);
        let set = find_critical_points(&model, &SeedGrid::for_model(&model)).unwrap();
        let got: Vec<(f64, f64, CriticalKind)> = set
            .points
            .iter()
            .map(|p| (p.location[0], p.location[1], p.kind))
            .collect();
        assert_eq!(got.len(), 3);
        let expected = [
            (-1.0, 0.0, CriticalKind::LocalMin),
            (0.0, 0.0, CriticalKind::Saddle),
            (1.0, 0.0, CriticalKind::LocalMin),
        ];
        for (g, e) in got.iter().zip(expected) {
            assert_abs_diff_eq!(g.0, e.0, epsilon = 1e-12);
            assert_abs_diff_eq!(g.1, e.1, epsilon = 1e-12);
            assert_eq!(g.2, e.2);
        }
        for p in &set.points {
            let mut g = vec![0.0; 2];
            model.grad_potential(p.location.as_slice(), &mut g);
            assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-9);
            assert!(p.b_norm <= 1e-8);
        }
    }

    #[test]
    fn quadratic_models_have_single_minimum() {
        let lin = DriftModel::linear(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 2.0, 0.1]),
        )
        .unwrap();
        for model in [lin, DriftModel::rotation(2.0)] {
            let set = find_critical_points(&model, &SeedGrid::for_model(&model)).unwrap();
            assert_eq!(set.points.len(), 1);
            assert_eq!(set.points[0].kind, CriticalKind::LocalMin);
            assert!(set.points[0].location.norm() < 1e-12);
        }
    }

    #[test]
    fn twowell_field_vanishes_at_critical_points_and_jacobians_differ() {
        let model = DriftModel::twowell(1.0, 0.3);
        let set = find_critical_points(&model, &SeedGrid::for_model(&model)).unwrap();
        assert!(set.points.iter().all(|p| p.b_norm <= 1e-12));
        let left = &set.points[0];
        let right = &set.points[2];
        assert!((&left.jac - &right.jac).amax() > 0.1);
        // Db = ω(1 + βx₁) J D²V at a critical point.
        let jmat = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let expected = (&jmat * &right.hess) * 1.3;
        assert_abs_diff_eq!((&right.jac - expected).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn assumption_report_rotation() {
        let model = DriftModel::rotation(1.7);
        let rep = check_assumptions(&model, 2000, 42);
        assert!(rep.k_b_hat <= 1e-12);
        assert_abs_diff_eq!(rep.h_b_hat, 1.7 * 1.7, epsilon = 1e-10);
        assert!(rep.pass_rb);
        assert_eq!(rep.n_samples, 2000);
        assert!(rep.l1_constant <= 1e-12);
    }

    #[test]
    fn assumption_report_gradient_case() {
        let model = DriftModel::linear(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let rep = check_assumptions(&model, 500, 1);
        assert_eq!(rep.k_b_hat, 0.0);
        assert_eq!(rep.h_b_hat, 0.0);
    }

    #[test]
    fn assumption_report_twowell_orthogonal_field() {
        let omega = 1.0;
        let beta = 0.3;
        let model = DriftModel::twowell(omega, beta);
        let rep = check_assumptions(&model, 5000, 9);
        assert!(rep.k_b_hat <= 1e-12);
        // sup of (ω(1 + βx₁))² over the ball of radius 3 is (1.9)².
        let sup = (omega * (1.0 + beta * 3.0)).powi(2);
        assert!(rep.h_b_hat <= sup + 1e-12);
        assert!(rep.h_b_hat > 0.9 * sup);
    }
}
