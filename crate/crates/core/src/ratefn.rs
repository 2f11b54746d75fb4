//! Vanishing-noise cumulant-generating function `e(α) = maxⱼ eⱼ(α)`, its
//! Legendre transform `e₊(ς)`, mean entropy-production diagnostics and the
//! `(α, p)` admissibility region.

use nalgebra::DVector;
use thiserror::Error;

use crate::model::{self, find_critical_points, CriticalKind, DriftModel, ModelError, SeedGrid};
use crate::riccati::{self, RiccatiError};
use crate::LocalLinearization;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("Riccati failure at critical point {location:?}, alpha = {alpha}: {source}")]
    Riccati { location: Vec<f64>, alpha: f64, source: RiccatiError },
    #[error("curve is not convex near alpha = {alpha} (second difference {defect:e})")]
    NonConvexInput { alpha: f64, defect: f64 },
    #[error("mean rate needs a local minimum (C positive definite)")]
    NotLocalMinimum,
    #[error("no local minimum inside the check radius")]
    NoLocalMinima,
    #[error("invalid growth constants: k_b = {k_b}, h_b = {h_b} (need k_b < 1/2, h_b >= 0)")]
    InvalidConstants { k_b: f64, h_b: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Sampled `e(α)` together with the per-critical-point curves.
#[derive(Debug, Clone, PartialEq)]
pub struct CgfCurve {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    /// Index of the critical point achieving the max at each `α`.
    pub argmax: Vec<usize>,
    /// `per_point[j][k] = eⱼ(alphas[k])`.
    pub per_point: Vec<Vec<f64>>,
    pub locations: Vec<DVector<f64>>,
    pub kinds: Vec<CriticalKind>,
    pub linearizations: Vec<LocalLinearization>,
}

impl CgfCurve {
    /// Wraps a single sampled curve (e.g. grid-spectral output) with no
    /// per-point decomposition.
    pub fn from_samples(alphas: Vec<f64>, values: Vec<f64>) -> Result<Self, RateError> {
        check_grid(&alphas)?;
        if values.len() != alphas.len() {
            return Err(RateError::InvalidGrid("values and alphas differ in length".into()));
        }
        Ok(CgfCurve {
            argmax: vec![0; alphas.len()],
            per_point: vec![values.clone()],
            alphas,
            values,
            locations: Vec::new(),
            kinds: Vec::new(),
            linearizations: Vec::new(),
        })
    }

    /// Linear interpolation of `e`; `None` outside the grid.
    pub fn interpolate(&self, alpha: f64) -> Option<f64> {
        interp(&self.alphas, &self.values, alpha)
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return Some(ys[0]);
    }
    if k == n {
        return Some(ys[n - 1]);
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    Some(ys[k - 1] * (1.0 - w) + ys[k] * w)
}

fn check_grid(alphas: &[f64]) -> Result<(), RateError> {
    if alphas.len() < 3 {
        return Err(RateError::InvalidGrid("need at least three alpha points".into()));
    }
    if alphas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(RateError::InvalidGrid("alpha grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `e(α)` on `alphas` from the Riccati curves of the given critical points.
pub fn cgf_from_points(points: &[model::CriticalPoint], alphas: &[f64]) -> Result<CgfCurve, RateError> {
    check_grid(alphas)?;
    if points.is_empty() {
        return Err(RateError::NoLocalMinima);
    }
    let mut per_point = Vec::with_capacity(points.len());
    let mut linearizations = Vec::with_capacity(points.len());
    for p in points {
        let lin = p.linearization();
        let mut curve = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            let v = riccati::leading_eig_linear(&lin, alpha).map_err(|source| RateError::Riccati {
                location: p.location.as_slice().to_vec(),
                alpha,
                source,
            })?;
            curve.push(v);
        }
        per_point.push(curve);
        linearizations.push(lin);
    }
    let mut values = Vec::with_capacity(alphas.len());
    let mut argmax = Vec::with_capacity(alphas.len());
    for k in 0..alphas.len() {
        let (j, v) = per_point
            .iter()
            .enumerate()
            .map(|(j, c)| (j, c[k]))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        values.push(v);
        argmax.push(j);
    }
    Ok(CgfCurve {
        alphas: alphas.to_vec(),
        values,
        argmax,
        per_point,
        locations: points.iter().map(|p| p.location.clone()).collect(),
        kinds: points.iter().map(|p| p.kind).collect(),
        linearizations,
    })
}

/// `e(α) = maxⱼ eⱼ(α)` over every critical point of the model.
pub fn semiclassical_cgf(model: &DriftModel, alphas: &[f64]) -> Result<CgfCurve, RateError> {
    let set = find_critical_points(model, &SeedGrid::for_model(model))?;
    cgf_from_points(&set.points, alphas)
}

/// Outer estimate `(½ − r, ½ + r)`, `r = ½√(1 + (1 − 2k_b)/h_b)`, of the
/// admissible `α` interval from the growth constants. Unbounded when
/// `h_b = 0`.
pub fn alpha_interval(k_b: f64, h_b: f64) -> Result<(f64, f64), RateError> {
    if !(k_b < 0.5) || !(h_b >= 0.0) {
        return Err(RateError::InvalidConstants { k_b, h_b });
    }
    if h_b == 0.0 {
        return Ok((f64::NEG_INFINITY, f64::INFINITY));
    }
    let r = 0.5 * (1.0 + (1.0 - 2.0 * k_b) / h_b).sqrt();
    Ok((0.5 - r, 0.5 + r))
}

/// Number of points in the default `α` grid.
pub const DEFAULT_ALPHA_POINTS: usize = 201;

/// Fraction of the admissible half-width actually used by the default grid;
/// the Hamiltonian split degenerates at the endpoints.
pub const ALPHA_INTERIOR_FRACTION: f64 = 0.98;

/// 201-point grid symmetric about ½, inside `(½ − r, ½ + r)`.
///
/// When `r ≥ ½` the spacing is `½/k₀` for an integer `k₀`, so `0`, `½` and
/// `1` are grid points and `α ↔ 1 − α` maps the grid onto itself.
pub fn symmetric_alpha_grid(half_width: f64) -> Vec<f64> {
    let n = DEFAULT_ALPHA_POINTS;
    let mid = (n / 2) as i64;
    let r = half_width.min(1.5);
    if r >= 0.5 {
        let k0 = (mid as f64 * 0.5 / r).ceil();
        let delta = 0.5 / k0;
        (0..n as i64).map(|k| 0.5 + (k - mid) as f64 * delta).collect()
    } else {
        (0..n as i64).map(|k| 0.5 + r * (k - mid) as f64 / mid as f64).collect()
    }
}

/// Admissible half-width used for the default grid of a model.
///
/// Intersects the sampled growth-constant estimate with `[−1, 2]` and with
/// the interval on which every critical point's `K(α)` stays definite.
pub fn default_half_width(model: &DriftModel) -> Result<f64, RateError> {
    let rep = model::check_assumptions(model, 4000, 0);
    let mut r = 1.5_f64;
    match alpha_interval(rep.k_b_hat, rep.h_b_hat) {
        Ok((lo, hi)) => r = r.min(0.5 - lo).min(hi - 0.5),
        Err(e) => log::warn!("sampled constants unusable ({e}); using local intervals only"),
    }
    let set = find_critical_points(model, &SeedGrid::for_model(model))?;
    for p in &set.points {
        match riccati::k_definite_interval(&p.linearization()) {
            Some((lo, hi)) => r = r.min(0.5 - lo).min(hi - 0.5),
            None => r = r.min(0.0),
        }
    }
    Ok(ALPHA_INTERIOR_FRACTION * r)
}

pub fn default_alpha_grid(model: &DriftModel) -> Result<Vec<f64>, RateError> {
    let r = default_half_width(model)?;
    if r <= 0.0 {
        return Err(RateError::InvalidGrid("empty admissible alpha interval".into()));
    }
    Ok(symmetric_alpha_grid(r))
}

/// Sampled Legendre transform `e₊(ς) = max_α (−ας − e(α))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    pub sigmas: Vec<f64>,
    pub values: Vec<f64>,
    /// `[min, max]` of `−De` over the α grid.
    pub domain: (f64, f64),
    /// `[min mⱼ, max mⱼ]` over local minima when the mⱼ differ.
    pub flat_interval: Option<(f64, f64)>,
    pub curve: CgfCurve,
}

impl RateFunction {
    /// Evaluates the transform at an arbitrary `ς` by rescanning the source curve.
    pub fn eval(&self, sigma: f64) -> f64 {
        conjugate(&self.curve.alphas, &self.curve.values, sigma)
    }
}

fn conjugate(alphas: &[f64], values: &[f64], sigma: f64) -> f64 {
    alphas
        .iter()
        .zip(values)
        .map(|(a, v)| -a * sigma - v)
        .fold(f64::NEG_INFINITY, f64::max)
}

const CONVEXITY_TOL: f64 = 1e-6;

/// Largest convexity violation: most negative second difference, with
/// spacing normalization for non-uniform grids. Returns `(alpha, value)`.
pub fn min_second_difference(alphas: &[f64], values: &[f64]) -> (f64, f64) {
    let mut worst = (f64::NAN, f64::INFINITY);
    for k in 1..alphas.len().saturating_sub(1) {
        let s0 = (values[k] - values[k - 1]) / (alphas[k] - alphas[k - 1]);
        let s1 = (values[k + 1] - values[k]) / (alphas[k + 1] - alphas[k]);
        let d2 = (s1 - s0) * 0.5 * (alphas[k + 1] - alphas[k - 1]);
        if d2 < worst.1 {
            worst = (alphas[k], d2);
        }
    }
    worst
}

/// `[min, max]` of `−De` from one-sided differences at the grid ends.
pub fn derivative_range(curve: &CgfCurve) -> (f64, f64) {
    let a = &curve.alphas;
    let v = &curve.values;
    let n = a.len();
    let first = (v[1] - v[0]) / (a[1] - a[0]);
    let last = (v[n - 1] - v[n - 2]) / (a[n - 1] - a[n - 2]);
    (-last, -first)
}

/// Sigma grid of step 1/20 covering `domain`, containing 0 when the domain does.
pub fn default_sigma_grid(domain: (f64, f64)) -> Vec<f64> {
    let lo = (domain.0 * 20.0).ceil() as i64;
    let hi = (domain.1 * 20.0).floor() as i64;
    (lo..=hi).map(|k| k as f64 / 20.0).collect()
}

pub fn legendre(curve: &CgfCurve, sigma_grid: &[f64]) -> Result<RateFunction, RateError> {
    check_grid(&curve.alphas)?;
    let (alpha, defect) = min_second_difference(&curve.alphas, &curve.values);
    if defect < -CONVEXITY_TOL {
        return Err(RateError::NonConvexInput { alpha, defect });
    }
    let domain = derivative_range(curve);
    let sigmas: Vec<f64> = sigma_grid
        .iter()
        .copied()
        .filter(|s| *s >= domain.0 && *s <= domain.1)
        .collect();
    let values = sigmas.iter().map(|&s| conjugate(&curve.alphas, &curve.values, s)).collect();
    let flat_interval = flat_from_curve(curve)?;
    Ok(RateFunction { sigmas, values, domain, flat_interval, curve: curve.clone() })
}

fn flat_from_curve(curve: &CgfCurve) -> Result<Option<(f64, f64)>, RateError> {
    let means: Vec<f64> = curve
        .kinds
        .iter()
        .zip(&curve.linearizations)
        .filter(|(k, _)| **k == CriticalKind::LocalMin)
        .map(|(_, lin)| mean_ep_local(lin))
        .collect::<Result<_, _>>()?;
    Ok(bracket(&means))
}

fn bracket(means: &[f64]) -> Option<(f64, f64)> {
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (means.len() > 1 && hi - lo > 1e-9).then_some((lo, hi))
}

const MEAN_FD_STEP: f64 = 1e-5;

/// `mⱼ = −eⱼ'(0)` by Richardson-extrapolated central differences.
pub fn mean_ep_local(lin: &LocalLinearization) -> Result<f64, RateError> {
    if lin.c().clone().cholesky().is_none() {
        return Err(RateError::NotLocalMinimum);
    }
    let e = |a: f64| {
        riccati::leading_eig_linear(lin, a).map_err(|source| RateError::Riccati {
            location: Vec::new(),
            alpha: a,
            source,
        })
    };
    let h = MEAN_FD_STEP;
    let d_h = (e(h)? - e(-h)?) / (2.0 * h);
    let d_h2 = (e(h / 2.0)? - e(-h / 2.0)?) / h;
    Ok(-(4.0 * d_h2 - d_h) / 3.0)
}

/// Mean rates `mⱼ` of every local minimum, in critical-point order.
pub fn local_means(model: &DriftModel) -> Result<Vec<(DVector<f64>, f64)>, RateError> {
    let set = find_critical_points(model, &SeedGrid::for_model(model))?;
    let mut out = Vec::new();
    for p in set.points.iter().filter(|p| p.is_local_min()) {
        out.push((p.location.clone(), mean_ep_local(&p.linearization())?));
    }
    if out.is_empty() {
        return Err(RateError::NoLocalMinima);
    }
    Ok(out)
}

/// `[min mⱼ, max mⱼ]` over local minima, `None` when they coincide.
pub fn flat_interval(model: &DriftModel) -> Result<Option<(f64, f64)>, RateError> {
    let means: Vec<f64> = local_means(model)?.into_iter().map(|(_, m)| m).collect();
    if means.len() == 1 {
        return Ok(None);
    }
    Ok(bracket(&means))
}

/// `max |e(α) − e(1 − α)|` over grid points whose reflection lies in the grid range.
pub fn gc_defect(curve: &CgfCurve) -> f64 {
    let mut worst: f64 = 0.0;
    for (&a, &v) in curve.alphas.iter().zip(&curve.values) {
        let mirror = 1.0 - a;
        let k = curve.alphas.partition_point(|&x| x < mirror - 1e-12);
        let reflected = if k < curve.alphas.len() && (curve.alphas[k] - mirror).abs() <= 1e-12 {
            Some(curve.values[k])
        } else {
            curve.interpolate(mirror)
        };
        if let Some(r) = reflected {
            worst = worst.max((v - r).abs());
        }
    }
    worst
}

/// `max |e₊(ς) − e₊(−ς) + ς|` over grid `ς` with `±ς ∈ Σ`.
pub fn rate_gc_defect(rf: &RateFunction) -> f64 {
    let (lo, hi) = rf.domain;
    rf.sigmas
        .iter()
        .zip(&rf.values)
        .filter(|(s, _)| -**s >= lo && -**s <= hi)
        .map(|(&s, &v)| (v - rf.eval(-s) + s).abs())
        .fold(0.0, f64::max)
}

/// Lower convex envelope of points sorted by abscissa (Andrew's monotone chain).
fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Deviation between `legendre(curve)` and the lower convex envelope of the
/// per-point transforms `(eⱼ)₊`.
///
/// The envelope is computed exactly: each `(eⱼ)₊` is piecewise linear with
/// kinks at the negated secant slopes of `eⱼ`, and every vertex of the
/// envelope is one of those kinks.
pub fn convex_hull_check(curve: &CgfCurve, sigma_grid: &[f64]) -> Result<f64, RateError> {
    let rf = legendre(curve, sigma_grid)?;
    if rf.sigmas.is_empty() {
        return Ok(0.0);
    }
    let a = &curve.alphas;
    let mut knots: Vec<f64> = rf.sigmas.clone();
    for ej in &curve.per_point {
        for k in 0..a.len() - 1 {
            knots.push(-(ej[k + 1] - ej[k]) / (a[k + 1] - a[k]));
        }
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));

    let lower_env: Vec<(f64, f64)> = knots
        .iter()
        .map(|&s| {
            let m = curve
                .per_point
                .iter()
                .map(|ej| conjugate(a, ej, s))
                .fold(f64::INFINITY, f64::min);
            (s, m)
        })
        .collect();
    let hull = lower_hull(&lower_env);
    let hx: Vec<f64> = hull.iter().map(|p| p.0).collect();
    let hy: Vec<f64> = hull.iter().map(|p| p.1).collect();
    let mut worst: f64 = 0.0;
    for (&s, &v) in rf.sigmas.iter().zip(&rf.values) {
        let h = interp(&hx, &hy, s).unwrap_or(f64::NAN);
        worst = worst.max((h - v).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityQuery {
    pub k_b: f64,
    pub h_b: f64,
    pub alpha: f64,
    pub p: f64,
}

/// Sufficient condition for the pair `(α, p)` to be admissible given the
/// growth constants `(k_b, h_b)`.
pub fn admissible_pair(q: &AdmissibilityQuery) -> bool {
    let AdmissibilityQuery { k_b, h_b, alpha, p } = *q;
    if !(p > 1.0) || !p.is_finite() {
        return false;
    }
    let lin = 1.0 - 2.0 * alpha + alpha * p;
    if lin < 0.0 {
        return false;
    }
    let base = 1.0 - 1.0 / p - lin * k_b;
    if alpha * (1.0 - alpha) >= 0.0 {
        base > 0.0
    } else {
        base - p * alpha * (alpha - 1.0) * h_b > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub k_b: f64,
    pub h_b: f64,
    pub alphas: Vec<f64>,
    pub ps: Vec<f64>,
    /// `cells[ip * alphas.len() + ia]`.
    pub cells: Vec<bool>,
}

impl Raster {
    pub fn get(&self, ia: usize, ip: usize) -> bool {
        self.cells[ip * self.alphas.len() + ia]
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

pub fn region_raster(
    k_b: f64,
    h_b: f64,
    alpha_range: (f64, f64),
    p_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<Raster, RateError> {
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(RateError::InvalidGrid("raster resolution must be at least 2 per axis".into()));
    }
    let alphas = linspace(alpha_range.0, alpha_range.1, resolution.0);
    let ps = linspace(p_range.0, p_range.1, resolution.1);
    let mut cells = Vec::with_capacity(alphas.len() * ps.len());
    for &p in &ps {
        for &alpha in &alphas {
            cells.push(admissible_pair(&AdmissibilityQuery { k_b, h_b, alpha, p }));
        }
    }
    Ok(Raster { k_b, h_b, alphas, ps, cells })
}
