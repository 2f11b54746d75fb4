//! Euler–Maruyama ensembles with the entropy production accumulated along
//! every path, and estimators of its mean rate and finite-time MGF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{DriftModel, MAX_DIM};
use crate::spectral::BoundaryTerm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("path {path} left the ball of radius {limit} at t = {time}")]
    Blowup { path: u64, time: f64, limit: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

/// Law of `X₀`.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Point(Vec<f64>),
    /// Run the dynamics from `from` for `duration` before recording.
    BurnIn { from: Vec<f64>, duration: f64 },
    /// Exact `N(0, εC⁻¹)` draw; quadratic `V` only.
    Mu0Gaussian,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub eps: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub init: Init,
    pub g: BoundaryTerm,
    /// Number of equally spaced times at which `E|X|²` is recorded.
    pub moment_checkpoints: usize,
}

impl SimConfig {
    pub fn new(eps: f64, dt: f64, horizon: f64, n_paths: usize, seed: u64, init: Init) -> Self {
        SimConfig { eps, dt, horizon, n_paths, seed, init, g: BoundaryTerm::Constant, moment_checkpoints: 20 }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn validate(&self, model: &DriftModel) -> Result<(), McError> {
        if !(self.eps > 0.0) {
            return Err(McError::InvalidConfig("eps must be positive".into()));
        }
        if !(self.dt > 0.0) || !(self.horizon > 0.0) || self.dt > self.horizon / 100.0 {
            return Err(McError::InvalidConfig("need 0 < dt <= horizon/100".into()));
        }
        if self.n_paths == 0 {
            return Err(McError::InvalidConfig("n_paths must be at least 1".into()));
        }
        let dim = model.dim();
        match &self.init {
            Init::Point(x) | Init::BurnIn { from: x, .. } if x.len() != dim => {
                Err(McError::InvalidConfig(format!("initial point must have {dim} coordinates")))
            }
            Init::BurnIn { duration, .. } if !(*duration >= 0.0) => {
                Err(McError::InvalidConfig("burn-in duration must be nonnegative".into()))
            }
            Init::Mu0Gaussian if model.quadratic_hessian().is_none() => {
                Err(McError::InvalidConfig("mu0 Gaussian initial law needs a quadratic potential".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpEnsemble {
    /// Itô-channel `S_t` per path.
    pub samples: Vec<f64>,
    /// Midpoint (Stratonovich) channel `S_t` per path.
    pub strat_samples: Vec<f64>,
    pub final_states: Vec<Vec<f64>>,
    /// `(time, mean |X_time|²)`, starting at time 0.
    pub second_moments: Vec<(f64, f64)>,
    pub config: SimConfig,
}

struct PathOutcome {
    s_ito: f64,
    s_strat: f64,
    x_final: Vec<f64>,
    sq_norms: Vec<f64>,
}

/// Sum in a fixed binary-tree order, independent of scheduling.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn draw_mu0(model: &DriftModel, eps: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c = model.quadratic_hessian().expect("validated");
    let n = c.nrows();
    let l = c.cholesky().expect("C positive definite").l();
    let z = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    // Lᵀx = √ε z gives Cov x = ε (LLᵀ)⁻¹.
    let x = l.transpose().solve_upper_triangular(&z).expect("nonsingular") * eps.sqrt();
    x.as_slice().to_vec()
}

/// One Euler–Maruyama step; returns the Itô and midpoint increments.
#[inline]
fn em_step(model: &DriftModel, eps: f64, dt: f64, x: &mut [f64], rng: &mut ChaCha8Rng) -> (f64, f64) {
    let n = x.len();
    let mut g = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    let mut dw = [0.0; MAX_DIM];
    let mut xn = [0.0; MAX_DIM];
    let mut mid = [0.0; MAX_DIM];
    model.grad_potential(x, &mut g[..n]);
    model.field(x, &mut b[..n]);
    let div = model.div_field(x);
    let sq = dt.sqrt();
    let noise = (2.0 * eps).sqrt();
    let mut b2 = 0.0;
    let mut bg = 0.0;
    let mut bdw = 0.0;
    for i in 0..n {
        dw[i] = sq * rng.sample::<f64, _>(StandardNormal);
        xn[i] = x[i] + (b[i] - g[i]) * dt + noise * dw[i];
        b2 += b[i] * b[i];
        bg += b[i] * g[i];
        bdw += b[i] * dw[i];
    }
    let ito = (b2 - bg) / eps * dt + div * dt + (2.0 / eps).sqrt() * bdw;
    for i in 0..n {
        mid[i] = 0.5 * (x[i] + xn[i]);
    }
    let mut bm = [0.0; MAX_DIM];
    model.field(&mid[..n], &mut bm[..n]);
    let strat: f64 = (0..n).map(|i| bm[i] * (xn[i] - x[i])).sum::<f64>() / eps;
    x.copy_from_slice(&xn[..n]);
    (ito, strat)
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn run_path(model: &DriftModel, cfg: &SimConfig, path: u64) -> Result<PathOutcome, McError> {
    let mut rng = path_rng(cfg.seed, path);
    let limit = 100.0 * model.check_radius();
    let mut x = match &cfg.init {
        Init::Point(x0) => x0.clone(),
        Init::Mu0Gaussian => draw_mu0(model, cfg.eps, &mut rng),
        Init::BurnIn { from, duration } => {
            let mut x = from.clone();
            let steps = (duration / cfg.dt).round() as usize;
            for k in 0..steps {
                em_step(model, cfg.eps, cfg.dt, &mut x, &mut rng);
                if norm2(&x).sqrt() > limit {
                    return Err(McError::Blowup { path, time: (k + 1) as f64 * cfg.dt - duration, limit });
                }
            }
            x
        }
    };
    let steps = cfg.steps();
    let every = (steps / cfg.moment_checkpoints.max(1)).max(1);
    let mut sq_norms = vec![norm2(&x)];
    let boundary0 = cfg.g.log_eval(&x);
    let mut s_ito = 0.0;
    let mut s_strat = 0.0;
    for k in 1..=steps {
        let (di, ds) = em_step(model, cfg.eps, cfg.dt, &mut x, &mut rng);
        s_ito += di;
        s_strat += ds;
        let r2 = norm2(&x);
        if !(r2.sqrt() <= limit) {
            return Err(McError::Blowup { path, time: k as f64 * cfg.dt, limit });
        }
        if k % every == 0 {
            sq_norms.push(r2);
        }
    }
    let boundary = boundary0 - cfg.g.log_eval(&x);
    Ok(PathOutcome { s_ito: s_ito + boundary, s_strat: s_strat + boundary, x_final: x, sq_norms })
}

/// Simulates `n_paths` independent paths. Path `i` draws from stream `i`
/// of the master seed, so the ensemble does not depend on the thread count.
pub fn simulate(model: &DriftModel, cfg: &SimConfig) -> Result<EpEnsemble, McError> {
    cfg.validate(model)?;
    let outcomes: Vec<Result<PathOutcome, McError>> =
        (0..cfg.n_paths as u64).into_par_iter().map(|p| run_path(model, cfg, p)).collect();
    let mut paths = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        paths.push(o?);
    }
    let steps = cfg.steps();
    let every = (steps / cfg.moment_checkpoints.max(1)).max(1);
    let n_checks = paths[0].sq_norms.len();
    let second_moments = (0..n_checks)
        .map(|c| {
            let col: Vec<f64> = paths.iter().map(|p| p.sq_norms[c]).collect();
            ((c * every) as f64 * cfg.dt, pairwise_sum(&col) / col.len() as f64)
        })
        .collect();
    Ok(EpEnsemble {
        samples: paths.iter().map(|p| p.s_ito).collect(),
        strat_samples: paths.iter().map(|p| p.s_strat).collect(),
        final_states: paths.into_iter().map(|p| p.x_final).collect(),
        second_moments,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(v: &[f64]) -> MeanEstimate {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() < 2 {
        return MeanEstimate { mean, se: f64::NAN };
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    MeanEstimate { mean, se: (var / n).sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    /// `S_t / t` over the ensemble (Itô channel).
    pub mean_ep_rate: MeanEstimate,
    /// Same from the midpoint channel.
    pub mean_ep_rate_strat: MeanEstimate,
    /// `E|X_t|²`.
    pub second_moment: MeanEstimate,
}

pub fn estimate_mean_ep(ens: &EpEnsemble) -> Estimates {
    let t = ens.config.horizon;
    let rates: Vec<f64> = ens.samples.iter().map(|s| s / t).collect();
    let strat: Vec<f64> = ens.strat_samples.iter().map(|s| s / t).collect();
    let sq: Vec<f64> = ens.final_states.iter().map(|x| norm2(x)).collect();
    Estimates { mean_ep_rate: mean_and_se(&rates), mean_ep_rate_strat: mean_and_se(&strat), second_moment: mean_and_se(&sq) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryEstimate {
    pub value: f64,
    /// Batch-means standard error (20 batches).
    pub se: f64,
    pub n_steps: usize,
}

/// Ergodic average of `ε⁻¹(|b|² − ⟨b, ∇V⟩) + div b` along one long path
/// started at the origin after a burn-in of `burn_in` time units.
pub fn estimate_mean_ep_stationary(
    model: &DriftModel,
    eps: f64,
    t_long: f64,
    dt: f64,
    seed: u64,
    burn_in: f64,
) -> Result<StationaryEstimate, McError> {
    if !(eps > 0.0 && dt > 0.0 && t_long >= 100.0 * dt) {
        return Err(McError::InvalidConfig("need eps > 0, dt > 0, t_long >= 100 dt".into()));
    }
    if burn_in < 10.0 {
        log::warn!("burn-in {burn_in} is shorter than 10 time units");
    }
    let n = model.dim();
    let limit = 100.0 * model.check_radius();
    let mut rng = path_rng(seed, 0);
    let mut x = vec![0.0; n];
    let burn_steps = (burn_in / dt).round() as usize;
    for k in 0..burn_steps {
        em_step(model, eps, dt, &mut x, &mut rng);
        if !(norm2(&x).sqrt() <= limit) {
            return Err(McError::Blowup { path: 0, time: k as f64 * dt - burn_in, limit });
        }
    }
    let steps = (t_long / dt).round() as usize;
    let batches = 20;
    let per_batch = (steps / batches).max(1);
    let mut batch_means = Vec::with_capacity(batches);
    let mut acc = 0.0;
    let mut count = 0;
    let mut g = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    for k in 0..steps {
        model.grad_potential(&x, &mut g[..n]);
        model.field(&x, &mut b[..n]);
        let b2: f64 = b[..n].iter().map(|v| v * v).sum();
        let bg: f64 = b[..n].iter().zip(&g[..n]).map(|(u, v)| u * v).sum();
        acc += (b2 - bg) / eps + model.div_field(&x);
        count += 1;
        if count == per_batch {
            batch_means.push(acc / count as f64);
            acc = 0.0;
            count = 0;
        }
        em_step(model, eps, dt, &mut x, &mut rng);
        if !(norm2(&x).sqrt() <= limit) {
            return Err(McError::Blowup { path: 0, time: (k + 1) as f64 * dt, limit });
        }
    }
    let est = mean_and_se(&batch_means);
    Ok(StationaryEstimate { value: est.mean, se: est.se, n_steps: steps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfEstimate {
    pub alpha: f64,
    /// `(1/t) log mean exp(−α S_t)`.
    pub log_rate: f64,
    /// Jackknife standard error of `log_rate`.
    pub se: f64,
    /// Set when one path carries more than half of the exponential mass.
    pub degenerate: bool,
}

impl MgfEstimate {
    /// `χ̂_t(α) = exp(t · log_rate)`.
    pub fn chi(&self, t: f64) -> f64 {
        (t * self.log_rate).exp()
    }
}

pub fn estimate_mgf(ens: &EpEnsemble, alphas: &[f64]) -> Vec<MgfEstimate> {
    let t = ens.config.horizon;
    let n = ens.samples.len();
    alphas
        .iter()
        .map(|&alpha| {
            if !(0.0..=1.0).contains(&alpha) {
                log::warn!("MGF estimate at alpha = {alpha} outside [0, 1]: estimator variance grows exponentially");
            }
            let a: Vec<f64> = ens.samples.iter().map(|s| -alpha * s).collect();
            let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
            let total = pairwise_sum(&w);
            let log_mean = m + total.ln() - (n as f64).ln();
            let degenerate = w.iter().any(|&wi| wi > 0.5 * total);
            if degenerate {
                log::warn!("DegenerateWeights at alpha = {alpha}: one path carries over half of the mass");
            }
            let se = if n >= 2 {
                let loo: Vec<f64> = w
                    .iter()
                    .map(|&wi| m + (total - wi).max(f64::MIN_POSITIVE).ln() - ((n - 1) as f64).ln())
                    .collect();
                let mean = pairwise_sum(&loo) / n as f64;
                let dev: Vec<f64> = loo.iter().map(|l| (l - mean) * (l - mean)).collect();
                ((n - 1) as f64 / n as f64 * pairwise_sum(&dev)).sqrt() / t
            } else {
                f64::NAN
            };
            MgfEstimate { alpha, log_rate: log_mean / t, se, degenerate }
        })
        .collect()
}

/// Empirical rate proxy: rows `(bin midpoint, −(1/t) log frequency)` of
/// `S_t / t`; empty bins are skipped.
pub fn tail_histogram(ens: &EpEnsemble, bins: usize) -> Vec<(f64, f64)> {
    let t = ens.config.horizon;
    let rates: Vec<f64> = ens.samples.iter().map(|s| s / t).collect();
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    if !(width > 0.0) {
        return vec![(lo, 0.0)];
    }
    let mut counts = vec![0usize; bins];
    for r in &rates {
        let k = (((r - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = rates.len() as f64;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (lo + (k as f64 + 0.5) * width, -(c as f64 / n).ln() / t))
        .collect()
}
