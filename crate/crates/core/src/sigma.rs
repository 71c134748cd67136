//! Indicator-covariance engine and evaluation of the explicit rate bounds.
//!
//! `Sigma_x` is the covariance of `n^{-1/2} sum_i Y_i` where `Y_{i,k}` is the
//! centered indicator of `X_i <= m_k + x_k / (theta_k sqrt(n))`. For i.i.d.
//! models and jointly Gaussian dependent models the matrix is computed in
//! closed form (pairwise indicator covariances reduce to the bivariate
//! normal CDF); every other model goes through the Monte Carlo estimator,
//! which reports standard errors.

use rayon::prelude::*;

use crate::gauss::CovMatrix;
use crate::model::DependencyModel;
use crate::quantile::QuantileGrid;
use crate::rng::derive_stream;
use crate::special::{binorm_cdf, std_normal_cdf};
use crate::{Error, Result};

/// Thresholds `a_k = m_k + x_k / (theta_k sqrt(n))`.
pub fn thresholds(grid: &QuantileGrid, x: &[f64], n: usize) -> Result<Vec<f64>> {
    if x.len() != grid.len() {
        return Err(Error::dimension(format!(
            "displacement has {} coordinates, grid has {}",
            x.len(),
            grid.len()
        )));
    }
    let sqrt_n = (n as f64).sqrt();
    Ok(grid
        .anchors()
        .iter()
        .zip(grid.thetas())
        .zip(x)
        .map(|((m, th), xi)| m + xi / (th * sqrt_n))
        .collect())
}

/// Exact `Sigma_x`: closed form for i.i.d. models (any continuous marginal)
/// and for jointly Gaussian dependent models. Entry `(s, t)` is
/// `(1/n) sum_{i, j in N_i} Cov(1{X_i <= a_s}, 1{X_j <= a_t})`.
pub fn sigma_exact(
    model: &DependencyModel,
    grid: &QuantileGrid,
    x: &[f64],
    n: usize,
) -> Result<CovMatrix> {
    if n < 3 {
        return Err(Error::domain("sample length must be at least 3"));
    }
    let range = model.dependence_range();
    if range >= n {
        return Err(Error::domain(format!(
            "dependence range {range} exceeds sample length {n}"
        )));
    }
    let a = thresholds(grid, x, n)?;
    let fam = model.marginal_family();
    let probs: Vec<f64> = a.iter().map(|&t| fam.cdf(t)).collect();
    if probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::domain(
            "a threshold falls outside the marginal support",
        ));
    }

    if range == 0 {
        // Independent coordinates: F(a_{s/\t}) - F(a_s) F(a_t).
        return CovMatrix::from_fn(grid.len(), |s, t| {
            fam.cdf(a[s].min(a[t])) - probs[s] * probs[t]
        });
    }

    let rho = model.lag_correlations().ok_or_else(|| {
        Error::model(
            "exact covariance needs an i.i.d. or jointly Gaussian model; use the Monte Carlo estimator",
        )
    })?;
    // Standardize thresholds against the (Gaussian) marginal.
    let (mean, sd) = match fam {
        crate::marginal::Family::StandardNormal => (0.0, 1.0),
        crate::marginal::Family::Normal { mean, variance } => (*mean, variance.sqrt()),
        other => {
            return Err(Error::model(format!(
                "exact covariance unsupported for marginal {other:?}"
            )))
        }
    };
    let l = grid.len();
    let z: Vec<f64> = a.iter().map(|&t| (t - mean) / sd).collect();
    let phi: Vec<f64> = z.iter().map(|&u| std_normal_cdf(u)).collect();
    let mut pair = vec![vec![0.0; l * l]; range + 1];
    for h in 1..=range {
        for s in 0..l {
            for t in 0..l {
                pair[h][s * l + t] = binorm_cdf(z[s], z[t], rho[h])? - phi[s] * phi[t];
            }
        }
    }
    CovMatrix::from_fn(l, |s, t| {
        let same = std_normal_cdf(z[s].min(z[t])) - phi[s] * phi[t];
        let cross: f64 = (1..=range)
            .map(|h| 2.0 * (1.0 - h as f64 / n as f64) * pair[h][s * l + t])
            .sum();
        same + cross
    })
}

/// Monte Carlo estimate of `Sigma_x` with entrywise standard errors.
#[derive(Debug, Clone)]
pub struct SigmaEstimate {
    pub matrix: CovMatrix,
    /// Row-major standard errors, same shape as the matrix.
    pub std_errors: Vec<f64>,
    pub reps: usize,
}

impl SigmaEstimate {
    pub fn std_error(&self, s: usize, t: usize) -> f64 {
        self.std_errors[s * self.matrix.dim() + t]
    }
}

/// Unbiased plug-in estimate of `Sigma_x` from `reps` independent length-`n`
/// paths. Replication `r` draws from the derived stream `(seed, r)`, and the
/// fixed block reduction makes the output independent of worker count.
pub fn sigma_empirical(
    model: &DependencyModel,
    grid: &QuantileGrid,
    x: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<SigmaEstimate> {
    if reps < 1_000 {
        return Err(Error::domain(format!(
            "covariance estimation needs at least 1000 replications, got {reps}"
        )));
    }
    if n < 3 {
        return Err(Error::domain("sample length must be at least 3"));
    }
    let a = thresholds(grid, x, n)?;
    let fam = *model.marginal_family();
    let expected: Vec<f64> = a.iter().map(|&t| (n as f64) * fam.cdf(t)).collect();
    let l = grid.len();
    let n_pairs = l * l;
    let sqrt_n = (n as f64).sqrt();

    const BLOCK: usize = 256;
    let n_blocks = reps.div_ceil(BLOCK);
    // Per-block partial sums of u_s u_t and its square, in fixed block order.
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_blocks)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), vec![0.0; l]),
            |(buf, scratch, u), b| {
                let mut sum = vec![0.0; n_pairs];
                let mut sumsq = vec![0.0; n_pairs];
                let lo = b * BLOCK;
                let hi = ((b + 1) * BLOCK).min(reps);
                for r in lo..hi {
                    model.generate_into(n, derive_stream(seed, r as u64), buf, scratch);
                    for (k, uk) in u.iter_mut().enumerate() {
                        let count = buf.iter().filter(|&&v| v <= a[k]).count();
                        *uk = (count as f64 - expected[k]) / sqrt_n;
                    }
                    for s in 0..l {
                        for t in 0..l {
                            let m = u[s] * u[t];
                            sum[s * l + t] += m;
                            sumsq[s * l + t] += m * m;
                        }
                    }
                }
                (sum, sumsq)
            },
        )
        .collect();

    let mut sum = vec![0.0; n_pairs];
    let mut sumsq = vec![0.0; n_pairs];
    for (ps, pq) in &partials {
        for i in 0..n_pairs {
            sum[i] += ps[i];
            sumsq[i] += pq[i];
        }
    }
    let r = reps as f64;
    let mean: Vec<f64> = sum.iter().map(|v| v / r).collect();
    let std_errors: Vec<f64> = (0..n_pairs)
        .map(|i| ((sumsq[i] / r - mean[i] * mean[i]).max(0.0) / r).sqrt())
        .collect();
    let matrix = CovMatrix::from_fn(l, |s, t| mean[s * l + t])?;
    Ok(SigmaEstimate {
        matrix,
        std_errors,
        reps,
    })
}

/// `Sigma_x` by the exact engine when the model admits it, otherwise by the
/// Monte Carlo estimator with the given replication budget.
pub fn sigma_auto(
    model: &DependencyModel,
    grid: &QuantileGrid,
    x: &[f64],
    n: usize,
    mc_reps: usize,
    mc_seed: u64,
) -> Result<CovMatrix> {
    if model.dependence_range() == 0 || model.is_gaussian() {
        sigma_exact(model, grid, x, n)
    } else {
        Ok(sigma_empirical(model, grid, x, n, mc_reps, mc_seed)?.matrix)
    }
}

/// Gaussian-gap bound
/// `3 A l / min_k theta_k * ||Sigma_0^{-1}||_op * D1 ||x||_inf / sqrt(n)`
/// on `d_TV(N(0, Sigma_x), N(0, Sigma_0))`.
pub fn gsgap_bound(
    model: &DependencyModel,
    grid: &QuantileGrid,
    x: &[f64],
    n: usize,
    sigma0: &CovMatrix,
) -> Result<f64> {
    if x.len() != grid.len() || sigma0.dim() != grid.len() {
        return Err(Error::dimension(
            "grid, displacement, and Sigma_0 must agree",
        ));
    }
    let spec = model.marginal_spec(grid.levels())?;
    let x_inf = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(gsgap_bound_raw(
        spec.bound_a(),
        grid.len(),
        grid.theta_min(),
        sigma0.op_norm_inverse()?,
        model.meta().d1,
        x_inf,
        n,
    ))
}

/// The same bound from raw ingredients.
pub fn gsgap_bound_raw(
    bound_a: f64,
    ell: usize,
    theta_min: f64,
    op_norm_sigma0_inv: f64,
    d1: usize,
    x_inf: f64,
    n: usize,
) -> f64 {
    3.0 * bound_a * ell as f64 / theta_min
        * op_norm_sigma0_inv
        * (d1 as f64 * x_inf / (n as f64).sqrt())
}

/// Evaluation of a rate bound with unit constants: the hidden absolute
/// constants of the theorems are set to one, so only the shape (decay order
/// and parameter dependence) is contractually meaningful.
#[derive(Debug, Clone)]
pub struct BoundReport {
    /// Smoothness/Gaussian-difference/tail term, of order `log n / sqrt(n)`.
    pub term1: f64,
    /// CLT term from the dependency-graph normal approximation.
    pub term2: f64,
    /// Unit-constant sum of the terms.
    pub total: f64,
    pub inputs: BoundInputs,
}

/// Echo of the ingredients a bound was evaluated from.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
    pub ell: usize,
    pub bound_a: f64,
    pub theta_min: f64,
    /// Univariate: `sigma^2 = Sigma_0` at the median.
    pub sigma_sq: Option<f64>,
    /// Multivariate: largest diagonal entry of `Sigma_0`.
    pub sigma_max_sq: Option<f64>,
    /// Multivariate: `||Sigma_0^{-1}||_op`.
    pub op_norm_sigma_inv: Option<f64>,
}

/// Univariate median bound: `(A/theta^2)(1 v D1/sigma^2) log n/sqrt(n)
/// + D1 (D2 + D3) / (sigma sqrt(n))`, with `sigma^2` supplied by one of the
/// covariance engines at `x = 0`.
pub fn univ_bound_rhs(
    model: &DependencyModel,
    grid: &QuantileGrid,
    n: usize,
    sigma_sq: f64,
) -> Result<BoundReport> {
    if grid.len() != 1 || (grid.levels()[0] - 0.5).abs() > 1e-12 {
        return Err(Error::domain(
            "univariate bound needs a median-only grid (level 0.5)",
        ));
    }
    if !(sigma_sq > 0.0) {
        return Err(Error::domain(format!(
            "sigma^2 must be positive, got {sigma_sq}"
        )));
    }
    let spec = model.marginal_spec(grid.levels())?;
    let theta = grid.thetas()[0];
    if !(theta > 0.0) {
        return Err(Error::domain("theta must be positive"));
    }
    let meta = model.meta();
    let a = spec.bound_a();
    let nf = n as f64;
    let term1 = a / (theta * theta) * 1.0_f64.max(meta.d1 as f64 / sigma_sq) * nf.ln() / nf.sqrt();
    let term2 = meta.d1 as f64 * (meta.d2 + meta.d3) as f64 / (sigma_sq.sqrt() * nf.sqrt());
    Ok(BoundReport {
        term1,
        term2,
        total: term1 + term2,
        inputs: BoundInputs {
            n,
            d1: meta.d1,
            d2: meta.d2,
            d3: meta.d3,
            ell: 1,
            bound_a: a,
            theta_min: theta,
            sigma_sq: Some(sigma_sq),
            sigma_max_sq: None,
            op_norm_sigma_inv: None,
        },
    })
}

/// Multivariate quantile bound:
/// `(A/min theta_k^2) l ||Sigma^{-1}||_op (D1 v sigma_max^2) log n/sqrt(n)
/// + (l^{1/4}/sqrt(n)) ||Sigma^{-1}||_op^{1/2} D1 (D2 + D3/l)`.
pub fn multi_bound_rhs(
    model: &DependencyModel,
    grid: &QuantileGrid,
    n: usize,
    sigma0: &CovMatrix,
) -> Result<BoundReport> {
    if sigma0.dim() != grid.len() {
        return Err(Error::dimension(format!(
            "Sigma_0 is {}x{} but the grid has {} levels",
            sigma0.dim(),
            sigma0.dim(),
            grid.len()
        )));
    }
    let spec = model.marginal_spec(grid.levels())?;
    let op_inv = sigma0.op_norm_inverse()?;
    let meta = model.meta();
    let ell = grid.len() as f64;
    let a = spec.bound_a();
    let theta_min = grid.theta_min();
    let sigma_max_sq = sigma0.max_diagonal();
    let nf = n as f64;
    let term1 = a / (theta_min * theta_min)
        * ell
        * op_inv
        * (meta.d1 as f64).max(sigma_max_sq)
        * nf.ln()
        / nf.sqrt();
    let term2 = ell.powf(0.25) / nf.sqrt()
        * op_inv.sqrt()
        * meta.d1 as f64
        * (meta.d2 as f64 + meta.d3 as f64 / ell);
    Ok(BoundReport {
        term1,
        term2,
        total: term1 + term2,
        inputs: BoundInputs {
            n,
            d1: meta.d1,
            d2: meta.d2,
            d3: meta.d3,
            ell: grid.len(),
            bound_a: a,
            theta_min,
            sigma_sq: None,
            sigma_max_sq: Some(sigma_max_sq),
            op_norm_sigma_inv: Some(op_inv),
        },
    })
}

/// Dependency-graph Hoeffding bound `exp(-2 n t^2 / (D1 sum |b_i - a_i|^2))`
/// on `P(sum X_i >= t sqrt(n))`, clamped to 1.
pub fn hoeffding_bound(d1: usize, ranges: &[f64], t: f64, n: usize) -> Result<f64> {
    if d1 == 0 || n == 0 {
        return Err(Error::domain("D1 and n must be positive"));
    }
    if ranges.len() != n {
        return Err(Error::dimension(format!(
            "need one range per coordinate: {} vs n = {n}",
            ranges.len()
        )));
    }
    if ranges.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::domain("ranges must be positive"));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "threshold t must be positive, got {t}"
        )));
    }
    let sum_sq: f64 = ranges.iter().map(|r| r * r).sum();
    Ok((-2.0 * n as f64 * t * t / (d1 as f64 * sum_sq))
        .exp()
        .min(1.0))
}
