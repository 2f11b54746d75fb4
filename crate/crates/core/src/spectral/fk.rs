use std::fmt;
use std::sync::Arc;

use super::grid::GridSpec;
use super::operator::assemble_unchecked;
use super::SpectralError;
use crate::model::DriftModel;

/// Positive boundary-term function `g` of the entropy functional.
pub type BoundaryFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryTerm {
    /// `g ≡ 1`.
    Constant,
    /// `g(x) = 1 + a·exp(−|x|²)`.
    GaussianBump { amplitude: f64 },
    Custom(BoundaryFn),
}

impl BoundaryTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BoundaryTerm::Constant => 1.0,
            BoundaryTerm::GaussianBump { amplitude } => {
                1.0 + amplitude * (-x.iter().map(|v| v * v).sum::<f64>()).exp()
            }
            BoundaryTerm::Custom(f) => f(x),
        }
    }

    pub fn log_eval(&self, x: &[f64]) -> f64 {
        match self {
            BoundaryTerm::Constant => 0.0,
            _ => self.eval(x).ln(),
        }
    }
}

impl fmt::Debug for BoundaryTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryTerm::Constant => write!(f, "Constant"),
            BoundaryTerm::GaussianBump { amplitude } => write!(f, "GaussianBump({amplitude})"),
            BoundaryTerm::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Initial law `λ` of the MGF.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialMeasure {
    /// Unit mass at the interior node nearest the point.
    PointMass(Vec<f64>),
    /// Reference measure `∝ e^{−V/ε}`, normalized over the grid nodes.
    Mu0,
    /// Explicit nonnegative weights per interior node.
    NodeWeights(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FkResult {
    /// `χ_t(α)` at each requested time.
    pub chi: Vec<f64>,
    pub times: Vec<f64>,
    pub dt: f64,
    /// `dt > 1e-2`: accuracy advisory only.
    pub cfl_warning: bool,
}

pub const DEFAULT_DT: f64 = 1e-3;

/// `χ_t(α) = Σ λᵢ g^{−α}(xᵢ) (e^{tΛ} g^α)(xᵢ)`.
///
/// The propagation runs in the conjugated frame `u = e^{−V/2ε} g^α` under
/// the discretized operator `A` (Crank–Nicolson), and the weight
/// `e^{V/2ε}` is restored at the end.
#[allow(clippy::too_many_arguments)]
pub fn fk_propagate(
    model: &DriftModel,
    alpha: f64,
    eps: f64,
    grid: &GridSpec,
    g: &BoundaryTerm,
    lam: &InitialMeasure,
    t: f64,
    dt: f64,
) -> Result<f64, SpectralError> {
    Ok(fk_trajectory(model, alpha, eps, grid, g, lam, &[t], dt)?.chi[0])
}

/// As [`fk_propagate`] for several nondecreasing horizons in one run.
#[allow(clippy::too_many_arguments)]
pub fn fk_trajectory(
    model: &DriftModel,
    alpha: f64,
    eps: f64,
    grid: &GridSpec,
    g: &BoundaryTerm,
    lam: &InitialMeasure,
    times: &[f64],
    dt: f64,
) -> Result<FkResult, SpectralError> {
    if !(dt > 0.0) || times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(SpectralError::InvalidGrid("need dt > 0 and nondecreasing horizons >= 0".into()));
    }
    let cfl_warning = dt > 1e-2;
    if cfl_warning {
        log::warn!("CflWarning: dt = {dt} > 1e-2; Crank-Nicolson is stable but inaccurate");
    }
    let op = assemble_unchecked(model, alpha, eps, grid)?;
    let n = op.matrix.n;
    let dim = grid.dim();
    let nodes = grid.nodes();
    let x = |k: usize| &nodes[k * dim..(k + 1) * dim];

    // log of λᵢ e^{V/2ε} g^{−α}; combined in logs to avoid overflow of e^{V/2ε}.
    let log_w: Vec<f64> = match lam {
        InitialMeasure::PointMass(x0) => {
            if x0.len() != dim {
                return Err(SpectralError::InvalidGrid("point mass has wrong dimension".into()));
            }
            let k0 = grid.nearest_node(x0);
            (0..n).map(|k| if k == k0 { 0.0 } else { f64::NEG_INFINITY }).collect()
        }
        InitialMeasure::Mu0 => {
            let logs: Vec<f64> = (0..n).map(|k| -model.potential(x(k)) / eps).collect();
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            logs.iter().map(|l| l - z).collect()
        }
        InitialMeasure::NodeWeights(w) => {
            if w.len() != n || w.iter().any(|v| !(*v >= 0.0)) {
                return Err(SpectralError::InvalidGrid("node weights must be nonnegative, one per interior node".into()));
            }
            w.iter().map(|v| v.ln()).collect()
        }
    };
    let log_out: Vec<f64> = (0..n)
        .map(|k| log_w[k] + model.potential(x(k)) / (2.0 * eps) - alpha * g.log_eval(x(k)))
        .collect();
    let mut u: Vec<f64> = (0..n)
        .map(|k| (-model.potential(x(k)) / (2.0 * eps) + alpha * g.log_eval(x(k))).exp())
        .collect();

    let readout = |u: &[f64]| -> f64 {
        u.iter()
            .zip(&log_out)
            .filter(|(_, l)| l.is_finite())
            .map(|(v, l)| v * l.exp())
            .sum()
    };

    let lu = op.matrix.factor_affine(1.0, -0.5 * dt)?;
    let mut au = vec![0.0; n];
    let mut chi = Vec::with_capacity(times.len());
    let mut now = 0.0;
    let mut step = 0usize;
    for &t in times {
        let steps = ((t - now) / dt).round() as usize;
        if ((t - now) - steps as f64 * dt).abs() > 1e-9 * t.max(1.0) {
            log::warn!("horizon {t} is not a multiple of dt = {dt}; rounded to {} steps", steps);
        }
        for _ in 0..steps {
            op.matrix.matvec(&u, &mut au);
            for (ui, ai) in u.iter_mut().zip(&au) {
                *ui += 0.5 * dt * ai;
            }
            lu.solve_in_place(&mut u);
            step += 1;
            let max = u.iter().copied().fold(0.0, f64::max);
            let min = u.iter().copied().fold(f64::INFINITY, f64::min);
            if !(max > 0.0) || min < -1e-10 * max {
                return Err(SpectralError::PositivityLoss { time: step as f64 * dt, min, max });
            }
        }
        now += steps as f64 * dt;
        chi.push(readout(&u));
    }
    Ok(FkResult { chi, times: times.to_vec(), dt, cfl_warning })
}
