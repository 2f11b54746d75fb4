//! Algebraic Riccati equation `X² − ½BᵀX − ½XB − K = 0` attached to the
//! linearization of the dynamics at a critical point, and the local
//! cumulant curves `eⱼ(α)` built from its maximal solution.
//!
//! Generic over the scalar type so the certificates can be re-run in
//! higher precision; the rest of the crate uses the `f64` aliases.

use nalgebra::{convert, linalg::Schur, DMatrix, RealField};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiccatiError {
    #[error("Hamiltonian has no clean N/N split: {n_positive} of {n} eigenvalues in Re > 0, min |Re λ| = {min_abs_re:e}")]
    SpectralSplitFailure { n: usize, n_positive: usize, min_abs_re: f64 },
    #[error("invariant subspace basis is ill-conditioned (cond = {cond:e})")]
    SingularBasis { cond: f64 },
    #[error("solution asymmetric before symmetrization (max |X − Xᵀ| = {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },
    #[error("matrix sign iteration did not converge")]
    SignIterationFailed,
    #[error("Schur iteration did not converge")]
    EigenvalueFailure,
}

const SPLIT_TOL: f64 = 1e-10;
const COND_MAX: f64 = 1e12;
const ASYM_TOL: f64 = 1e-8;

fn to_f64<T: RealField + Copy>(x: T) -> f64 {
    // RealField: SupersetOf<f64>, so the reverse cast is always defined.
    nalgebra::try_convert::<T, f64>(x).unwrap_or(f64::NAN)
}

/// Quadratic data `(C, Bm) = (D²V, Db)` at a critical point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinearization<T: RealField + Copy> {
    c: DMatrix<T>,
    bm: DMatrix<T>,
}

impl<T: RealField + Copy> LocalLinearization<T> {
    /// Symmetrizes `c`. Panics if the shapes disagree.
    pub fn new(c: DMatrix<T>, bm: DMatrix<T>) -> Self {
        assert!(c.is_square() && bm.shape() == c.shape(), "C and Bm must be N×N");
        let half: T = convert(0.5);
        let c = (&c + c.transpose()) * half;
        LocalLinearization { c, bm }
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }

    pub fn bm(&self) -> &DMatrix<T> {
        &self.bm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreCoefficients<T: RealField + Copy> {
    pub alpha: T,
    /// `(1 − 2α) Bm`.
    pub b: DMatrix<T>,
    /// `¼C² − ¼(BmᵀC + C Bm) + α(1 − α) BmᵀBm`, symmetric.
    pub k: DMatrix<T>,
}

pub fn build_coeffs<T: RealField + Copy>(lin: &LocalLinearization<T>, alpha: T) -> AreCoefficients<T> {
    let one = T::one();
    let two: T = convert(2.0);
    let quarter: T = convert(0.25);
    let (c, bm) = (&lin.c, &lin.bm);
    let btc = bm.transpose() * c;
    let k = (c * c) * quarter - (&btc + btc.transpose()) * quarter
        + (bm.transpose() * bm) * (alpha * (one - alpha));
    let half: T = convert(0.5);
    let k = (&k + k.transpose()) * half;
    AreCoefficients { alpha, b: bm * (one - two * alpha), k }
}

/// The 2N×2N matrix `[[−½B, I], [K, ½Bᵀ]]`.
pub fn hamiltonian<T: RealField + Copy>(coeffs: &AreCoefficients<T>) -> DMatrix<T> {
    let n = coeffs.b.nrows();
    let half: T = convert(0.5);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&(&coeffs.b * -half));
    h.view_mut((0, n), (n, n)).fill_with_identity();
    h.view_mut((n, 0), (n, n)).copy_from(&coeffs.k);
    h.view_mut((n, n), (n, n)).copy_from(&(coeffs.b.transpose() * half));
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreSolution<T: RealField + Copy> {
    /// Maximal symmetric solution.
    pub x: DMatrix<T>,
    /// Frobenius norm of `X² − ½BᵀX − ½XB − K`.
    pub residual: T,
    /// Largest real part in the spectrum of `−X + ½B`; negative certifies maximality.
    pub stability_margin: T,
}

pub fn are_residual<T: RealField + Copy>(coeffs: &AreCoefficients<T>, x: &DMatrix<T>) -> DMatrix<T> {
    let half: T = convert(0.5);
    x * x - (coeffs.b.transpose() * x) * half - (x * &coeffs.b) * half - &coeffs.k
}

/// Eigenvalues through a capped real Schur iteration.
///
/// Unshifted QR can stall on repeated complex pairs (the rotation Hamiltonian
/// has them); each retry works on a Householder-reflected copy, which has the
/// same spectrum but a different iteration path.
pub fn eigenvalues<T: RealField + Copy>(m: &DMatrix<T>) -> Result<Vec<nalgebra::Complex<T>>, RiccatiError> {
    let n = m.nrows();
    let eps = T::default_epsilon();
    let mut work = m.clone();
    for attempt in 0..4 {
        if let Some(schur) = Schur::try_new(work.clone(), eps, 5000) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
        let v = nalgebra::DVector::<T>::from_fn(n, |i, _| convert(1.0 + 0.37 * (i + attempt) as f64 / (1 + attempt) as f64))
            .normalize();
        let q = DMatrix::<T>::identity(n, n) - (&v * v.transpose()) * convert::<f64, T>(2.0);
        work = &q * m * &q;
    }
    Err(RiccatiError::EigenvalueFailure)
}

/// Checks that the Hamiltonian spectrum splits N/N across the imaginary axis.
fn check_split<T: RealField + Copy>(h: &DMatrix<T>) -> Result<Vec<T>, RiccatiError> {
    let n2 = h.nrows();
    let eig = eigenvalues(h)?;
    let re: Vec<T> = eig.iter().map(|z| z.re).collect();
    let tol: T = convert(SPLIT_TOL);
    let min_abs = re.iter().map(|v| v.abs()).fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(b));
    let n_positive = re.iter().filter(|&&v| v > tol).count();
    if min_abs < tol || n_positive * 2 != n2 {
        return Err(RiccatiError::SpectralSplitFailure {
            n: n2 / 2,
            n_positive,
            min_abs_re: to_f64(min_abs),
        });
    }
    Ok(re)
}

/// Matrix sign function by scaled Newton iteration; requires no eigenvalues
/// on the imaginary axis.
fn matrix_sign<T: RealField + Copy>(h: &DMatrix<T>) -> Result<DMatrix<T>, RiccatiError> {
    let m = h.nrows();
    let half: T = convert(0.5);
    let tol: T = convert(1e-14);
    let floor: T = convert(1e-8);
    let mut s = h.clone();
    let mut prev = T::max_value().unwrap_or(convert(f64::MAX));
    for iter in 0..100 {
        let inv = s.clone().try_inverse().ok_or(RiccatiError::SignIterationFailed)?;
        // Determinant scaling accelerates the early iterations.
        let scale = if iter < 10 {
            let det = s.determinant().abs();
            let p: T = convert(-1.0 / m as f64);
            if det > T::zero() { det.powf(p) } else { T::one() }
        } else {
            T::one()
        };
        let next = (&s * scale + inv / scale) * half;
        let delta = (&next - &s).norm();
        let size = next.norm();
        s = next;
        // Second clause: quadratic convergence has stalled at roundoff.
        if delta <= tol * size || (iter >= 10 && delta <= floor * size && delta > half * prev) {
            return Ok(s);
        }
        prev = delta;
    }
    Err(RiccatiError::SignIterationFailed)
}

/// Solves the Sylvester system `AᵀΔ + ΔA = R` via the Kronecker form.
fn lyapunov<T: RealField + Copy>(a: &DMatrix<T>, r: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let at = a.transpose();
    let mut big = DMatrix::<T>::zeros(n * n, n * n);
    // Column-major vec: vec(AᵀΔ) = (I ⊗ Aᵀ) vec Δ and vec(ΔA) = (Aᵀ ⊗ I) vec Δ.
    for bj in 0..n {
        for i in 0..n {
            for k in 0..n {
                big[(bj * n + i, bj * n + k)] += at[(i, k)];
            }
        }
    }
    for bj in 0..n {
        for bk in 0..n {
            let v = at[(bj, bk)];
            for i in 0..n {
                big[(bj * n + i, bk * n + i)] += v;
            }
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(r.as_slice());
    let sol = big.lu().solve(&rhs)?;
    Some(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// Maximal symmetric solution via the anti-stable invariant subspace of
/// the Hamiltonian, followed by Newton refinement on the residual.
pub fn solve_are<T: RealField + Copy>(coeffs: &AreCoefficients<T>) -> Result<AreSolution<T>, RiccatiError> {
    let n = coeffs.b.nrows();
    let h = hamiltonian(coeffs);
    check_split(&h)?;

    let sign = matrix_sign(&h)?;
    let half: T = convert(0.5);
    // The anti-stable subspace is ker(S − I); writing it as the graph of X
    // gives the overdetermined system [S12; S22 − I] X = −[S11 − I; S21].
    let mut lhs = DMatrix::<T>::zeros(2 * n, n);
    let mut rhs = DMatrix::<T>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&sign.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(sign.view((n, n), (n, n)) - DMatrix::<T>::identity(n, n)));
    rhs.view_mut((0, 0), (n, n)).copy_from(&(DMatrix::<T>::identity(n, n) - sign.view((0, 0), (n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-sign.view((n, 0), (n, n))));

    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > T::zero() { to_f64(smax / smin) } else { f64::INFINITY };
    if !(cond <= COND_MAX) {
        return Err(RiccatiError::SingularBasis { cond });
    }
    let x_raw = svd.solve(&rhs, T::zero()).map_err(|_| RiccatiError::SignIterationFailed)?;

    let asym = to_f64((&x_raw - x_raw.transpose()).amax());
    let scale = to_f64(x_raw.amax()).max(1.0);
    if asym > ASYM_TOL * scale {
        return Err(RiccatiError::Asymmetric { asymmetry: asym });
    }
    let mut x = (&x_raw + x_raw.transpose()) * half;

    let mut res = are_residual(coeffs, &x);
    let mut res_norm = res.norm();
    for _ in 0..3 {
        let a = &x - &coeffs.b * half;
        let Some(delta) = lyapunov(&a, &(-&res)) else { break };
        let cand = &x + (&delta + delta.transpose()) * half;
        let cand_res = are_residual(coeffs, &cand);
        let cand_norm = cand_res.norm();
        if cand_norm < res_norm {
            x = cand;
            res = cand_res;
            res_norm = cand_norm;
        } else {
            break;
        }
    }

    let closed = -&x + &coeffs.b * half;
    let stability_margin = eigenvalues(&closed)?
        .iter()
        .map(|z| z.re)
        .fold(T::min_value().unwrap_or(-T::one()), |a, b| a.max(b));
    Ok(AreSolution { x, residual: res_norm, stability_margin })
}

/// `tr X` from Hamiltonian eigenvalues alone: `½(Σ|Re λ| + tr B)`.
pub fn trace_via_hamiltonian<T: RealField + Copy>(coeffs: &AreCoefficients<T>) -> Result<T, RiccatiError> {
    let re = check_split(&hamiltonian(coeffs))?;
    let half: T = convert(0.5);
    let sum = re.iter().fold(T::zero(), |acc, v| acc + v.abs());
    Ok((sum + coeffs.b.trace()) * half)
}

/// `eⱼ(α) = −tr X + ½ tr C − α tr Bm`.
pub fn leading_eig_linear<T: RealField + Copy>(lin: &LocalLinearization<T>, alpha: T) -> Result<T, RiccatiError> {
    let sol = solve_are(&build_coeffs(lin, alpha))?;
    let half: T = convert(0.5);
    Ok(-sol.x.trace() + lin.c.trace() * half - alpha * lin.bm.trace())
}

/// Interval of `α` on which `K(α)` is positive definite.
///
/// `K(α) = ¼(C − Bm)ᵀ(C − Bm) − (α − ½)² BmᵀBm`, so the interval is
/// `½ ± ½/√μ` with `μ` the largest generalized eigenvalue of `BmᵀBm`
/// relative to `(C − Bm)ᵀ(C − Bm)`. Returns `None` when `C − Bm` is
/// singular (then `K(½)` is not definite) and an unbounded interval when
/// `Bm = 0`.
pub fn k_definite_interval<T: RealField + Copy>(lin: &LocalLinearization<T>) -> Option<(T, T)> {
    let diff = &lin.c - &lin.bm;
    let m = diff.transpose() * &diff;
    let chol = m.cholesky()?;
    let l = chol.l();
    let l_inv = l.try_inverse()?;
    let btb = lin.bm.transpose() * &lin.bm;
    let g = &l_inv * btb * l_inv.transpose();
    let half: T = convert(0.5);
    let g = (&g + g.transpose()) * half;
    let mu = g.symmetric_eigenvalues().max();
    if mu <= T::zero() {
        let inf = T::max_value().unwrap_or(convert(f64::MAX));
        return Some((-inf, inf));
    }
    let r = half / mu.sqrt();
    Some((half - r, half + r))
}
