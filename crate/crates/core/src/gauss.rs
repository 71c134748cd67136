//! Distances and bounds between centered Gaussian laws, plus the small
//! symmetric eigenproblems they require.
//!
//! All total-variation outputs are on the TV scale (square roots already
//! taken), so exact values, eigenvalue bounds, and Frobenius relaxations are
//! directly comparable.

use crate::rng::CounterRng;
use crate::special::{binorm_cdf, std_normal_cdf};
use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// Symmetric covariance matrix of dimension at most 8, with PSD and
/// invertibility flags computed at construction. Symmetry is exact; PSD is
/// checked against a tolerance of 1e-10 relative to the trace; invertibility
/// requires the smallest eigenvalue to reach 1e-10.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    dim: usize,
    data: Vec<f64>,
    psd: bool,
    invertible: bool,
    min_eigenvalue: f64,
}

impl CovMatrix {
    /// Builds from row-major entries; rejects asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<CovMatrix> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::dimension("covariance matrix must be square"));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::matrix("covariance entries must be finite"));
            }
            data.extend_from_slice(r);
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(Error::matrix(format!(
                        "asymmetric input at ({i},{j}): {} vs {}",
                        data[i * dim + j],
                        data[j * dim + i]
                    )));
                }
            }
        }
        Ok(Self::from_flat_unchecked(dim, data))
    }

    /// Builds a symmetric matrix from `f(s, t)` evaluated on `s <= t` and
    /// mirrored, so symmetry holds bit-exactly.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<CovMatrix> {
        if dim == 0 {
            return Err(Error::dimension("covariance matrix must be nonempty"));
        }
        let mut data = vec![0.0; dim * dim];
        for s in 0..dim {
            for t in s..dim {
                let v = f(s, t);
                if !v.is_finite() {
                    return Err(Error::matrix("covariance entries must be finite"));
                }
                data[s * dim + t] = v;
                data[t * dim + s] = v;
            }
        }
        Ok(Self::from_flat_unchecked(dim, data))
    }

    pub fn identity(dim: usize) -> CovMatrix {
        Self::from_fn(dim, |s, t| if s == t { 1.0 } else { 0.0 }).unwrap()
    }

    pub fn diag(values: &[f64]) -> Result<CovMatrix> {
        Self::from_fn(values.len(), |s, t| if s == t { values[s] } else { 0.0 })
    }

    fn from_flat_unchecked(dim: usize, data: Vec<f64>) -> CovMatrix {
        let mut m = CovMatrix {
            dim,
            data,
            psd: false,
            invertible: false,
            min_eigenvalue: f64::NEG_INFINITY,
        };
        let eig = jacobi_values(&m);
        let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let trace: f64 = (0..dim).map(|i| m.data[i * dim + i]).sum();
        m.min_eigenvalue = min;
        m.psd = min >= -1e-10 * trace.abs().max(1.0);
        m.invertible = min >= 1e-10;
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn is_psd(&self) -> bool {
        self.psd
    }

    pub fn is_invertible(&self) -> bool {
        self.invertible
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest diagonal entry (`sigma_max^2` in the rate bounds).
    pub fn max_diagonal(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.get(i, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Operator norm of the inverse, `1 / lambda_min`.
    pub fn op_norm_inverse(&self) -> Result<f64> {
        if !self.invertible {
            return Err(Error::matrix(
                "matrix is singular within tolerance",
            ));
        }
        Ok(1.0 / self.min_eigenvalue)
    }

    fn require_psd(&self) -> Result<()> {
        if !self.psd {
            return Err(Error::matrix(format!(
                "matrix is not PSD (min eigenvalue {})",
                self.min_eigenvalue
            )));
        }
        Ok(())
    }

    fn require_invertible(&self) -> Result<()> {
        self.require_psd()?;
        if !self.invertible {
            return Err(Error::matrix(format!(
                "matrix is singular within tolerance (min eigenvalue {})",
                self.min_eigenvalue
            )));
        }
        Ok(())
    }
}

/// Eigendecomposition of a symmetric matrix: eigenvalues in descending order
/// with matching unit eigenvectors (`vectors[k]` pairs with `values[k]`).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

// Cyclic Jacobi rotations; returns (eigenvalues, eigenvector columns),
// unsorted. Dimensions here are tiny, so the quadratic sweeps are cheap and
// orthogonality comes out at machine precision.
fn jacobi_raw(m: &CovMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.dim;
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let anorm = m.frobenius_norm();
    let tol = 1e-15 * anorm.max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q].abs();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| v[i * n + j]).collect())
        .collect();
    (values, vectors)
}

fn jacobi_values(m: &CovMatrix) -> Vec<f64> {
    jacobi_raw(m).0
}

/// Full eigendecomposition, eigenvalues descending.
pub fn jacobi_eigen(m: &CovMatrix) -> Eigen {
    let (values, vectors) = jacobi_raw(m);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    Eigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: order.iter().map(|&i| vectors[i].clone()).collect(),
    }
}

/// Exact total variation distance between `N(0, rho^2)` and `N(0, 1)`,
/// `2 (Phi(x*) - Phi(x*/rho))` at the crossing point of the densities.
pub fn tv_normal_exact(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if rho == 1.0 {
        return Ok(0.0);
    }
    let x_star = (2.0 * rho.ln() / (1.0 - rho.powi(-2))).sqrt();
    Ok(2.0 * (std_normal_cdf(x_star) - std_normal_cdf(x_star / rho)))
}

/// Closed-form upper bounds on the same distance: the tight bound
/// `(2/sqrt(pi)) (rho-1) sqrt(log rho/(rho^2-1)) exp(-log rho/(rho^2-1))`
/// and its relaxation `sqrt(2/(pi e)) (rho-1)`.
pub fn tv_normal_bounds(rho: f64) -> Result<(f64, f64)> {
    check_rho(rho)?;
    if rho == 1.0 {
        return Ok((0.0, 0.0));
    }
    let u = rho.ln() / (rho * rho - 1.0);
    let tight = 2.0 / PI.sqrt() * (rho - 1.0) * u.sqrt() * (-u).exp();
    let simple = (2.0 / (PI * std::f64::consts::E)).sqrt() * (rho - 1.0);
    Ok((tight, simple))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(Error::domain(format!(
            "variance ratio must satisfy rho >= 1 (rescale the pair first), got {rho}"
        )));
    }
    Ok(())
}

/// Squared Hellinger affinity `(int sqrt(f g))^2` between `N(0, I)` and
/// `N(0, Sigma)`: the eigenvalue product `prod 2 sqrt(l_i)/(1 + l_i)`.
/// Equals 1 exactly when `Sigma = I`.
pub fn hellinger_affinity_sq(sigma: &CovMatrix) -> Result<f64> {
    sigma.require_invertible()?;
    let eig = jacobi_eigen(sigma);
    Ok(eig
        .values
        .iter()
        .map(|&l| 2.0 * l.sqrt() / (1.0 + l))
        .product())
}

/// Hellinger affinity `int sqrt(f g)`.
pub fn hellinger_affinity(sigma: &CovMatrix) -> Result<f64> {
    Ok(hellinger_affinity_sq(sigma)?.sqrt())
}

/// Eigenvalue bound on the TV distance between `N(0, I)` and `N(0, Sigma)`,
/// with its Frobenius relaxation; both on the TV scale.
#[derive(Debug, Clone, Copy)]
pub struct MvnTvBound {
    /// `sqrt( sum (sqrt(l_i) - 1)^2 / (l_i + 1) )`
    pub eigen_bound: f64,
    /// `|| Sigma - I ||_F`
    pub frobenius_bound: f64,
}

/// TV bound between `N(0, I)` and `N(0, Sigma)` via eigenvalues; the
/// eigenvalue bound never exceeds the Frobenius relaxation.
pub fn tv_mvn_bound(sigma: &CovMatrix) -> Result<MvnTvBound> {
    sigma.require_invertible()?;
    let eig = jacobi_eigen(sigma);
    let inner: f64 = eig
        .values
        .iter()
        .map(|&l| {
            let d = l.sqrt() - 1.0;
            d * d / (l + 1.0)
        })
        .sum();
    let n = sigma.dim();
    let mut frob_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = sigma.get(i, j) - if i == j { 1.0 } else { 0.0 };
            frob_sq += d * d;
        }
    }
    Ok(MvnTvBound {
        eigen_bound: inner.sqrt(),
        frobenius_bound: frob_sq.sqrt(),
    })
}

/// `|| Sigma1^{-1/2} Sigma2 Sigma1^{-1/2} ||_F` via the eigendecomposition
/// of `Sigma1`; bounded by `||Sigma1^{-1}||_op ||Sigma2||_F`.
pub fn whitened_frobenius(sigma1: &CovMatrix, sigma2: &CovMatrix) -> Result<f64> {
    sigma1.require_invertible()?;
    if sigma1.dim() != sigma2.dim() {
        return Err(Error::dimension(format!(
            "whitening dimension {} vs {}",
            sigma1.dim(),
            sigma2.dim()
        )));
    }
    let n = sigma1.dim();
    let eig = jacobi_eigen(sigma1);
    // B[i][j] = u_i^T Sigma2 u_j / sqrt(l_i l_j); ||B||_F is the target.
    let mut sum = 0.0;
    for i in 0..n {
        let ui = &eig.vectors[i];
        // w = Sigma2 u_i
        let w: Vec<f64> = (0..n)
            .map(|r| (0..n).map(|c| sigma2.get(r, c) * ui[c]).sum())
            .collect();
        for j in 0..n {
            let uj = &eig.vectors[j];
            let b: f64 = (0..n).map(|r| uj[r] * w[r]).sum::<f64>()
                / (eig.values[i] * eig.values[j]).sqrt();
            sum += b * b;
        }
    }
    Ok(sum.sqrt())
}

/// Whitened matrix `Sigma0^{-1/2} Sigma Sigma0^{-1/2}`, using the symmetric
/// inverse square root of `Sigma0`; reduces a general Gaussian pair to the
/// `(I, Sigma)` form the TV bounds expect.
pub fn whiten(sigma0: &CovMatrix, sigma: &CovMatrix) -> Result<CovMatrix> {
    sigma0.require_invertible()?;
    if sigma0.dim() != sigma.dim() {
        return Err(Error::dimension(format!(
            "whitening dimension {} vs {}",
            sigma0.dim(),
            sigma.dim()
        )));
    }
    let n = sigma0.dim();
    let eig = jacobi_eigen(sigma0);
    let mut root_inv = vec![0.0; n * n];
    for k in 0..n {
        let w = 1.0 / eig.values[k].sqrt();
        let u = &eig.vectors[k];
        for i in 0..n {
            for j in 0..n {
                root_inv[i * n + j] += w * u[i] * u[j];
            }
        }
    }
    CovMatrix::from_fn(n, |s, t| {
        (0..n)
            .map(|a| {
                root_inv[s * n + a]
                    * (0..n)
                        .map(|b| sigma.get(a, b) * root_inv[t * n + b])
                        .sum::<f64>()
            })
            .sum()
    })
}

/// Rectangle probability `P(Sigma^{1/2} Z <= x)` with an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct RectProb {
    pub value: f64,
    pub std_error: f64,
}

/// `P(Sigma^{1/2} Z <= x)` for standard normal `Z`: exact through the normal
/// CDF for `l = 1`, through the bivariate CDF for `l = 2`, Monte Carlo with
/// the requested standard error beyond that. Dimension is capped at 8.
pub fn mvn_rect_prob(
    sigma: &CovMatrix,
    x: &[f64],
    precision: f64,
    seed: u64,
) -> Result<RectProb> {
    sigma.require_psd()?;
    let l = sigma.dim();
    if x.len() != l {
        return Err(Error::dimension(format!(
            "threshold has {} coordinates, matrix is {l}x{l}",
            x.len()
        )));
    }
    if l > 8 {
        return Err(Error::dimension(format!(
            "rectangle probabilities support dimension <= 8, got {l}"
        )));
    }
    if !(precision > 0.0) {
        return Err(Error::domain("precision target must be positive"));
    }
    match l {
        1 => {
            let s = sigma.get(0, 0).max(0.0).sqrt();
            let value = if s > 0.0 {
                std_normal_cdf(x[0] / s)
            } else if x[0] >= 0.0 {
                1.0
            } else {
                0.0
            };
            Ok(RectProb {
                value,
                std_error: 0.0,
            })
        }
        2 => {
            let s1 = sigma.get(0, 0).max(0.0).sqrt();
            let s2 = sigma.get(1, 1).max(0.0).sqrt();
            if s1 == 0.0 || s2 == 0.0 {
                // Degenerate coordinate: point mass at zero.
                let p1 = if s1 > 0.0 {
                    std_normal_cdf(x[0] / s1)
                } else if x[0] >= 0.0 {
                    1.0
                } else {
                    0.0
                };
                let p2 = if s2 > 0.0 {
                    std_normal_cdf(x[1] / s2)
                } else if x[1] >= 0.0 {
                    1.0
                } else {
                    0.0
                };
                return Ok(RectProb {
                    value: p1 * p2,
                    std_error: 0.0,
                });
            }
            let r = (sigma.get(0, 1) / (s1 * s2)).clamp(-1.0, 1.0);
            Ok(RectProb {
                value: binorm_cdf(x[0] / s1, x[1] / s2, r)?,
                std_error: 0.0,
            })
        }
        _ => mvn_rect_prob_mc(sigma, x, precision, seed),
    }
}

fn mvn_rect_prob_mc(sigma: &CovMatrix, x: &[f64], precision: f64, seed: u64) -> Result<RectProb> {
    let l = sigma.dim();
    // Symmetric square root, clamping tiny negative eigenvalues.
    let eig = jacobi_eigen(sigma);
    let mut root = vec![0.0; l * l];
    for k in 0..l {
        let s = eig.values[k].max(0.0).sqrt();
        let u = &eig.vectors[k];
        for i in 0..l {
            for j in 0..l {
                root[i * l + j] += s * u[i] * u[j];
            }
        }
    }
    let mut rng = CounterRng::new(seed);
    let mut cache = None;
    let mut z = vec![0.0; l];
    let mut hits = 0u64;
    let mut total = 0u64;
    const BATCH: u64 = 1 << 16;
    const MAX_SAMPLES: u64 = 1 << 27;
    loop {
        for _ in 0..BATCH {
            for zi in z.iter_mut() {
                *zi = rng.next_std_normal(&mut cache);
            }
            let inside = (0..l).all(|i| {
                let yi: f64 = (0..l).map(|j| root[i * l + j] * z[j]).sum();
                yi <= x[i]
            });
            if inside {
                hits += 1;
            }
        }
        total += BATCH;
        let p = hits as f64 / total as f64;
        let se = (p * (1.0 - p) / total as f64).sqrt();
        if (se <= precision && total >= 4 * BATCH) || total >= MAX_SAMPLES {
            return Ok(RectProb {
                value: p,
                std_error: se.max(1.0 / total as f64),
            });
        }
    }
}
