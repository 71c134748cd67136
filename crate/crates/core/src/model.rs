//! Generators of locally dependent sequences with exact dependency-graph
//! metadata and analytic marginals.
//!
//! Three kinds are supported: i.i.d. draws from any [`Family`], the moving
//! average MA(q) `X_t = mu + sum_i c_i z_{t-i} + z_t`, and an unnormalized
//! moving window sum of `m + 1` innovations. The MA and window models accept
//! innovations whose independent sums stay in closed form (normal, Cauchy),
//! so each model carries the exact law of its coordinates.

use crate::marginal::{Family, MarginalSpec};
use crate::quantile::QuantileGrid;
use crate::rng::CounterRng;
use crate::{Error, Result};

/// Innovation law for the dependent models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Innovation {
    StandardNormal,
    StandardCauchy,
}

/// Model configuration; the variant is the model kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Iid {
        marginal: Family,
    },
    MovingAverage {
        mu: f64,
        coeffs: Vec<f64>,
        innovation: Innovation,
    },
    WindowSum {
        width: usize,
        innovation: Innovation,
    },
}

/// Dependency graph parameters: maximal sizes of the first-, pair-, and
/// triple-order neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DependencyMeta {
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
}

/// A validated model: configuration, the exact marginal family of each
/// coordinate, dependency metadata, and the dependence range `r` such that
/// `X_i` is independent of `X_j` whenever `|i - j| > r`.
#[derive(Debug, Clone)]
pub struct DependencyModel {
    config: ModelConfig,
    marginal_family: Family,
    meta: DependencyMeta,
    range: usize,
}

/// Builds a model from a configuration, deriving the marginal law and the
/// dependency metadata from first principles: i.i.d. gives `(1, 2, 3)`;
/// interval models of range `r >= 1` give `(2r+1, 3r+1, 4r+1)` (worst-case
/// interval-union sizes, consistent with `D2 <= 2 D1` and `D3 <= 3 D1`).
pub fn build_model(config: ModelConfig) -> Result<DependencyModel> {
    let (marginal_family, range) = match &config {
        ModelConfig::Iid { marginal } => {
            // Validate parameters by anchoring at the median.
            MarginalSpec::new(*marginal, &[0.5])?;
            (*marginal, 0usize)
        }
        ModelConfig::MovingAverage {
            mu,
            coeffs,
            innovation,
        } => {
            if !mu.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::model("MA parameters must be finite"));
            }
            let family = match innovation {
                Innovation::StandardNormal => Family::Normal {
                    mean: *mu,
                    variance: 1.0 + coeffs.iter().map(|c| c * c).sum::<f64>(),
                },
                Innovation::StandardCauchy => Family::Cauchy {
                    location: *mu,
                    scale: 1.0 + coeffs.iter().map(|c| c.abs()).sum::<f64>(),
                },
            };
            (family, coeffs.len())
        }
        ModelConfig::WindowSum { width, innovation } => {
            let m = *width as f64;
            let family = match innovation {
                Innovation::StandardNormal => Family::Normal {
                    mean: 0.0,
                    variance: m + 1.0,
                },
                Innovation::StandardCauchy => Family::Cauchy {
                    location: 0.0,
                    scale: m + 1.0,
                },
            };
            (family, *width)
        }
    };
    let meta = interval_meta(range);
    Ok(DependencyModel {
        config,
        marginal_family,
        meta,
        range,
    })
}

fn interval_meta(range: usize) -> DependencyMeta {
    if range == 0 {
        DependencyMeta {
            d1: 1,
            d2: 2,
            d3: 3,
        }
    } else {
        DependencyMeta {
            d1: 2 * range + 1,
            d2: 3 * range + 1,
            d3: 4 * range + 1,
        }
    }
}

impl DependencyModel {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Exact law of each coordinate.
    pub fn marginal_family(&self) -> &Family {
        &self.marginal_family
    }

    pub fn meta(&self) -> DependencyMeta {
        self.meta
    }

    /// `X_i` is independent of `X_j` whenever `|i - j|` exceeds this.
    pub fn dependence_range(&self) -> usize {
        self.range
    }

    /// Marginal anchored at the given quantile levels.
    pub fn marginal_spec(&self, levels: &[f64]) -> Result<MarginalSpec> {
        MarginalSpec::new(self.marginal_family, levels)
    }

    /// Quantile grid (levels, anchors, densities) for this model's marginal.
    pub fn grid(&self, levels: &[f64]) -> Result<QuantileGrid> {
        let spec = self.marginal_spec(levels)?;
        QuantileGrid::from_marginal(&spec)
    }

    /// Whether all coordinates are jointly Gaussian (so pairwise indicator
    /// covariances reduce to the bivariate normal CDF).
    pub fn is_gaussian(&self) -> bool {
        match &self.config {
            ModelConfig::Iid { marginal } => matches!(
                marginal,
                Family::StandardNormal | Family::Normal { .. }
            ),
            ModelConfig::MovingAverage { innovation, .. }
            | ModelConfig::WindowSum { innovation, .. } => {
                *innovation == Innovation::StandardNormal
            }
        }
    }

    /// Lag correlations `rho_0, ..., rho_range` for jointly Gaussian models.
    pub fn lag_correlations(&self) -> Option<Vec<f64>> {
        if !self.is_gaussian() {
            return None;
        }
        match &self.config {
            ModelConfig::Iid { .. } => Some(vec![1.0]),
            ModelConfig::MovingAverage { coeffs, .. } => {
                // c_0 = 1; gamma_h = sum_i c_i c_{i+h}.
                let mut c = Vec::with_capacity(coeffs.len() + 1);
                c.push(1.0);
                c.extend_from_slice(coeffs);
                let gamma0: f64 = c.iter().map(|v| v * v).sum();
                let mut rho = Vec::with_capacity(c.len());
                for h in 0..c.len() {
                    let g: f64 = (0..c.len() - h).map(|i| c[i] * c[i + h]).sum();
                    rho.push(g / gamma0);
                }
                Some(rho)
            }
            ModelConfig::WindowSum { width, .. } => {
                let m1 = (*width + 1) as f64;
                Some((0..=*width).map(|h| 1.0 - h as f64 / m1).collect())
            }
        }
    }

    /// Generates `n` coordinates deterministically from `(self, n, seed)`.
    pub fn generate(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut scratch = Vec::new();
        self.generate_into(n, seed, &mut out, &mut scratch);
        out
    }

    /// Buffer-reusing variant of [`generate`](Self::generate) for hot loops.
    /// Output depends only on `(self, n, seed)`, never on buffer contents.
    pub fn generate_into(
        &self,
        n: usize,
        seed: u64,
        out: &mut Vec<f64>,
        scratch: &mut Vec<f64>,
    ) {
        let mut rng = CounterRng::new(seed);
        let mut cache = None;
        out.clear();
        match &self.config {
            ModelConfig::Iid { marginal } => {
                out.extend((0..n).map(|_| marginal.sample(&mut rng, &mut cache)));
            }
            ModelConfig::MovingAverage {
                mu,
                coeffs,
                innovation,
            } => {
                let q = coeffs.len();
                fill_innovations(scratch, n + q, *innovation, &mut rng, &mut cache);
                out.extend((0..n).map(|t| {
                    let mut x = *mu + scratch[t + q];
                    for (i, c) in coeffs.iter().enumerate() {
                        x += c * scratch[t + q - (i + 1)];
                    }
                    x
                }));
            }
            ModelConfig::WindowSum { width, innovation } => {
                let m = *width;
                fill_innovations(scratch, n + m, *innovation, &mut rng, &mut cache);
                out.extend((0..n).map(|t| scratch[t..=t + m].iter().sum::<f64>()));
            }
        }
    }

    /// Average marginal density at each grid anchor (`theta_k`); since the
    /// coordinates are identically distributed this is `F'(m_k)`.
    pub fn theta(&self, grid: &QuantileGrid) -> Result<Vec<f64>> {
        let spec = self.marginal_spec(grid.levels())?;
        for (m, &alpha) in grid.anchors().iter().zip(grid.levels()) {
            if (spec.cdf(*m) - alpha).abs() > 1e-9 {
                return Err(Error::model(format!(
                    "grid anchor {m} is not the marginal's {alpha}-quantile"
                )));
            }
        }
        let thetas: Vec<f64> = grid.anchors().iter().map(|&m| spec.pdf(m)).collect();
        if thetas.iter().any(|&t| t <= f64::EPSILON) {
            return Err(Error::model(
                "marginal density vanishes at a quantile anchor",
            ));
        }
        Ok(thetas)
    }
}

fn fill_innovations(
    buf: &mut Vec<f64>,
    len: usize,
    innovation: Innovation,
    rng: &mut CounterRng,
    cache: &mut Option<f64>,
) {
    buf.clear();
    match innovation {
        Innovation::StandardNormal => {
            buf.extend((0..len).map(|_| rng.next_std_normal(cache)))
        }
        Innovation::StandardCauchy => buf.extend((0..len).map(|_| rng.next_std_cauchy())),
    }
}
