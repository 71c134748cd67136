//! End-to-end experiments: Monte Carlo verification of the quantile CLTs,
//! the exact i.i.d. median oracle, and convergence-rate regression.
//!
//! Replication `r` of the run for the `i`-th sample length draws from the
//! stream derived as `(seed -> i -> r)`, so results are bit-identical across
//! worker counts and reruns. Monte Carlo standardization uses the exact
//! covariance engine whenever the model admits it.

use rayon::prelude::*;

use crate::gauss::{mvn_rect_prob, CovMatrix};
use crate::marginal::MarginalSpec;
use crate::model::{build_model, DependencyModel, ModelConfig};
use crate::quantile::{
    empirical_rect_prob, joint_quantiles_in_place, ks_statistic, QuantileGrid, SimResult,
};
use crate::rng::derive_stream;
use crate::sigma::{sigma_auto, univ_bound_rhs, BoundReport};
use crate::special::{reg_inc_beta, std_normal_cdf};
use crate::{Error, Result};

/// Standard-error target for Gaussian rectangle probabilities in the joint
/// experiment (dimension >= 3 falls back to Monte Carlo).
const RECT_PRECISION: f64 = 2.5e-4;

/// Full description of an experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub model: ModelConfig,
    /// Quantile levels (the grid is derived from the model's marginal).
    pub levels: Vec<f64>,
    /// Sample lengths, strictly increasing.
    pub n_list: Vec<usize>,
    /// Replications per sample length.
    pub reps: usize,
    pub seed: u64,
    /// Per-axis threshold values for the joint experiment; the x-grid is the
    /// l-fold cross product of this list.
    pub x_axis: Vec<f64>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::domain("n-list must be nonempty"));
        }
        for w in self.n_list.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::domain("n-list must be strictly increasing"));
            }
        }
        if self.n_list[0] < 3 {
            return Err(Error::domain("sample lengths must be at least 3"));
        }
        if self.reps < 1_000 {
            return Err(Error::domain(format!(
                "KS runs need at least 1000 replications, got {}",
                self.reps
            )));
        }
        Ok(())
    }

    fn build(&self) -> Result<(DependencyModel, QuantileGrid)> {
        self.validate()?;
        let model = build_model(self.model.clone())?;
        let grid = model.grid(&self.levels)?;
        Ok((model, grid))
    }
}

// Stream roots: replication r of the i-th n uses (seed -> i -> r); the
// covariance estimator and the Gaussian rectangle sampler get reserved
// top-level indices so no stream is ever shared.
fn run_master(seed: u64, n_index: usize) -> u64 {
    derive_stream(seed, n_index as u64)
}

const SIGMA_STREAM: u64 = u64::MAX;
const RECT_STREAM: u64 = u64::MAX - 1;

/// Per-`n` result of the univariate median experiment plus the inputs used
/// for standardization.
#[derive(Debug, Clone)]
pub struct MedianRun {
    pub n: usize,
    pub result: SimResult,
    pub sigma_sq: f64,
    pub theta: f64,
    /// Theorem right-hand side evaluated with the same ingredients.
    pub bound: BoundReport,
}

/// Runs the median experiment: for each `n`, the standardized statistic
/// `theta sqrt(n) (M_n - m) / sigma` over all replications and its KS
/// distance to the standard normal CDF.
pub fn run_median_experiment(plan: &ExperimentPlan) -> Result<Vec<MedianRun>> {
    let (model, grid) = plan.build()?;
    if grid.len() != 1 || (grid.levels()[0] - 0.5).abs() > 1e-12 {
        return Err(Error::domain(
            "median experiment needs the single level 0.5",
        ));
    }
    let theta = grid.thetas()[0];
    let anchor = grid.anchors()[0];

    plan.n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let master = run_master(plan.seed, i);
            let sigma_sq = sigma_auto(
                &model,
                &grid,
                &[0.0],
                n,
                plan.reps.max(10_000),
                derive_stream(master, SIGMA_STREAM),
            )?
            .get(0, 0);
            if !(sigma_sq > 0.0) {
                return Err(Error::domain("estimated sigma^2 is not positive"));
            }
            let scale = theta * (n as f64).sqrt() / sigma_sq.sqrt();
            let stats: Vec<f64> = (0..plan.reps)
                .into_par_iter()
                .map_init(
                    || (Vec::new(), Vec::new()),
                    |(buf, scratch), r| {
                        model.generate_into(n, derive_stream(master, r as u64), buf, scratch);
                        let k = n / 2; // (floor(n/2)+1)-th order statistic
                        let (_, med, _) = buf.select_nth_unstable_by(k, f64::total_cmp);
                        scale * (*med - anchor)
                    },
                )
                .collect();
            let ks = ks_statistic(&stats, std_normal_cdf)?;
            let bound = univ_bound_rhs(&model, &grid, n, sigma_sq)?;
            Ok(MedianRun {
                n,
                result: SimResult::new(stats, plan.reps, plan.seed, ks, None)?,
                sigma_sq,
                theta,
                bound,
            })
        })
        .collect()
}

/// One row of the joint-experiment table.
#[derive(Debug, Clone)]
pub struct JointRow {
    pub x: Vec<f64>,
    pub empirical: f64,
    pub gaussian: f64,
    pub gaussian_se: f64,
    pub gap: f64,
}

/// Per-`n` result of the joint quantile experiment.
#[derive(Debug, Clone)]
pub struct JointRun {
    pub n: usize,
    pub rows: Vec<JointRow>,
    pub max_gap: f64,
    pub sigma0: CovMatrix,
}

/// Runs the joint experiment: rectangle probabilities of the standardized
/// quantile vector `sqrt(n) Theta (Q_n - mu)` against `P(Sigma_0^{1/2} Z <= x)`
/// over the full x-grid.
pub fn run_joint_experiment(plan: &ExperimentPlan) -> Result<Vec<JointRun>> {
    let (model, grid) = plan.build()?;
    let l = grid.len();
    if l < 2 {
        return Err(Error::domain("joint experiment needs at least two levels"));
    }
    if plan.x_axis.is_empty() {
        return Err(Error::domain("joint experiment needs an x-grid"));
    }
    let x_grid = cross_product(&plan.x_axis, l);

    plan.n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let master = run_master(plan.seed, i);
            let sigma0 = sigma_auto(
                &model,
                &grid,
                &vec![0.0; l],
                n,
                plan.reps.max(10_000),
                derive_stream(master, SIGMA_STREAM),
            )?;
            let sqrt_n = (n as f64).sqrt();
            let vectors: Vec<Vec<f64>> = (0..plan.reps)
                .into_par_iter()
                .map_init(
                    || (Vec::new(), Vec::new()),
                    |(buf, scratch), r| {
                        model.generate_into(n, derive_stream(master, r as u64), buf, scratch);
                        let q = joint_quantiles_in_place(buf, grid.levels())
                            .expect("validated grid");
                        q.iter()
                            .zip(grid.anchors())
                            .zip(grid.thetas())
                            .map(|((qk, mk), th)| th * sqrt_n * (qk - mk))
                            .collect::<Vec<f64>>()
                    },
                )
                .collect();
            let mut rows = Vec::with_capacity(x_grid.len());
            let mut max_gap: f64 = 0.0;
            for (j, x) in x_grid.iter().enumerate() {
                let empirical = empirical_rect_prob(&vectors, x)?;
                let gauss = mvn_rect_prob(
                    &sigma0,
                    x,
                    RECT_PRECISION,
                    derive_stream(derive_stream(master, RECT_STREAM), j as u64),
                )?;
                let gap = (empirical - gauss.value).abs();
                max_gap = max_gap.max(gap);
                rows.push(JointRow {
                    x: x.clone(),
                    empirical,
                    gaussian: gauss.value,
                    gaussian_se: gauss.std_error,
                    gap,
                });
            }
            Ok(JointRun {
                n,
                rows,
                max_gap,
                sigma0,
            })
        })
        .collect()
}

fn cross_product(axis: &[f64], l: usize) -> Vec<Vec<f64>> {
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..l {
        let mut next = Vec::with_capacity(grid.len() * axis.len());
        for prefix in &grid {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        grid = next;
    }
    grid
}

/// Exact CDF of the sample median of `n = 2m + 1` i.i.d. draws:
/// `P(M_n <= t) = I_{F(t)}(m + 1, m + 1)`.
pub fn iid_median_cdf_exact(marginal: &MarginalSpec, n: usize, t: f64) -> Result<f64> {
    if n % 2 == 0 {
        return Err(Error::domain(format!(
            "exact median law needs odd n, got {n}"
        )));
    }
    let m = (n - 1) / 2;
    reg_inc_beta(marginal.cdf(t), m as f64 + 1.0, m as f64 + 1.0)
}

/// `sqrt(n) sup_x |P(theta sqrt(n) (M_n - m) / sigma <= x) - Phi(x)|` for the
/// i.i.d. median, with `sigma = 1/2`, evaluated from the exact Beta law on an
/// adaptive grid (512 points over +-6, then bisection around the running
/// argmax until the scaled supremum is stable to 1e-4).
pub fn scaled_ks_exact(marginal: &MarginalSpec, n: usize) -> Result<f64> {
    if n % 2 == 0 {
        return Err(Error::domain(format!("oracle needs odd n, got {n}")));
    }
    let anchor = marginal.quantile(0.5)?;
    let theta = marginal.pdf(anchor);
    if !(theta > 0.0) {
        return Err(Error::domain("marginal density vanishes at the median"));
    }
    let sqrt_n = (n as f64).sqrt();
    let gap = |x: f64| -> Result<f64> {
        let t = anchor + 0.5 * x / (theta * sqrt_n);
        Ok((iid_median_cdf_exact(marginal, n, t)? - std_normal_cdf(x)).abs())
    };

    let mut best_x = 0.0;
    let mut best = 0.0_f64;
    let (lo, hi, pts) = (-6.0, 6.0, 512);
    let mut step = (hi - lo) / pts as f64;
    for i in 0..=pts {
        let x = lo + step * i as f64;
        let g = gap(x)?;
        if g > best {
            best = g;
            best_x = x;
        }
    }
    loop {
        let prev = best;
        step /= 2.0;
        // Refine on 32 points around the running argmax.
        for i in 0..=32 {
            let x = best_x - 16.0 * step + step * i as f64;
            let g = gap(x)?;
            if g > best {
                best = g;
                best_x = x;
            }
        }
        if sqrt_n * (best - prev) < 1e-4 || step < 1e-12 {
            break;
        }
    }
    Ok(sqrt_n * best)
}

/// The limiting constant `1/sqrt(8 pi e) * |F''(m)| / F'(m)^2` for the scaled
/// KS distance of the i.i.d. median.
pub fn limit_constant(marginal: &MarginalSpec) -> Result<f64> {
    let anchor = marginal.quantile(0.5)?;
    let theta = marginal.pdf(anchor);
    if !(theta > 0.0) {
        return Err(Error::domain("marginal density vanishes at the median"));
    }
    let curvature = marginal.pdf_deriv(anchor).abs();
    Ok(curvature / (theta * theta) / (8.0 * std::f64::consts::PI * std::f64::consts::E).sqrt())
}

/// Log-log least squares fit of KS values against sample lengths.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual in log space.
    pub max_residual: f64,
}

/// Ordinary least squares of `log ks` on `log n`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::domain(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, ks)| !(n > 0.0 && ks > 0.0)) {
        return Err(Error::domain(
            "rate fit needs positive sample sizes and KS values",
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, k)| (n.ln(), k.ln())).collect();
    let m = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    if denom.abs() <= 1e-12 * sxx.abs().max(1.0) {
        return Err(Error::domain("sample sizes are degenerate for a fit"));
    }
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    let max_residual = logs
        .iter()
        .map(|&(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0_f64, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::Family;
    use crate::model::Innovation;

    fn median_plan(model: ModelConfig, n_list: Vec<usize>, reps: usize, seed: u64) -> ExperimentPlan {
        ExperimentPlan {
            model,
            levels: vec![0.5],
            n_list,
            reps,
            seed,
            x_axis: vec![],
        }
    }

    #[test]
    fn median_cdf_exact_examples() {
        // Any symmetric marginal at its median gives exactly 1/2.
        for fam in [
            Family::StandardNormal,
            Family::Uniform { a: -0.5, b: 0.5 },
        ] {
            let spec = MarginalSpec::new(fam, &[0.5]).unwrap();
            let m = spec.anchors()[0];
            for n in [3usize, 11, 101] {
                assert!((iid_median_cdf_exact(&spec, n, m).unwrap() - 0.5).abs() <= 1e-12);
            }
        }
        // Uniform(0,1), n = 3: P(M <= t) = 3t^2 - 2t^3.
        let spec = MarginalSpec::new(Family::Uniform { a: 0.0, b: 1.0 }, &[0.5]).unwrap();
        let v = iid_median_cdf_exact(&spec, 3, 0.25).unwrap();
        assert!((v - 0.15625).abs() <= 1e-14);
        // n = 1 reduces to F itself.
        let v = iid_median_cdf_exact(&spec, 1, 0.3).unwrap();
        assert!((v - 0.3).abs() <= 1e-14);
        assert!(iid_median_cdf_exact(&spec, 4, 0.3).is_err());
    }

    #[test]
    fn scaled_ks_symmetric_marginals_vanish() {
        // F''(median) = 0 makes the limit zero; residuals are higher order.
        let uni = MarginalSpec::new(Family::Uniform { a: -0.5, b: 0.5 }, &[0.5]).unwrap();
        let v = scaled_ks_exact(&uni, 100_001).unwrap();
        assert!(v <= 0.02, "uniform scaled KS {v}");
        let norm = MarginalSpec::new(Family::StandardNormal, &[0.5]).unwrap();
        let v = scaled_ks_exact(&norm, 100_001).unwrap();
        assert!(v <= 0.02, "normal scaled KS {v}");
    }

    #[test]
    fn scaled_ks_shifted_exponential_sequence() {
        // Frozen from the exact Beta-law computation (independently verified
        // against the curvature limit |F''|/(4 F'^2) * sup x^2 phi(x)).
        let spec = MarginalSpec::new(
            Family::shifted_exponential_median(1.0).unwrap(),
            &[0.5],
        )
        .unwrap();
        let expect = [
            (1_001usize, 0.150_608),
            (10_001, 0.147_975),
            (100_001, 0.147_146),
        ];
        for (n, val) in expect {
            let v = scaled_ks_exact(&spec, n).unwrap();
            assert!(
                (v - val).abs() <= 5e-4,
                "n={n}: scaled KS {v} vs frozen {val}"
            );
        }
        // Converges to the curvature limit, not the paper's printed constant:
        // sup_x x^2 phi(x) = 2 e^{-1} / sqrt(2 pi) at x = sqrt(2).
        let sup_x2_phi = 2.0 * (-1.0_f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let curvature_limit = 2.0 / 4.0 * sup_x2_phi;
        let v = scaled_ks_exact(&spec, 100_001).unwrap();
        assert!(
            (v - curvature_limit).abs() / curvature_limit <= 0.02,
            "scaled KS {v} vs curvature limit {curvature_limit}"
        );
    }

    #[test]
    fn scaled_ks_beta21() {
        // |F''(m)|/F'(m)^2 = 1 at the median of F(x) = x^2.
        let spec = MarginalSpec::new(Family::Beta21, &[0.5]).unwrap();
        let v = scaled_ks_exact(&spec, 100_001).unwrap();
        assert!((v - 0.073_79).abs() <= 5e-4, "beta21 scaled KS {v}");
    }

    #[test]
    fn limit_constant_formula_values() {
        let norm = MarginalSpec::new(Family::StandardNormal, &[0.5]).unwrap();
        assert_eq!(limit_constant(&norm).unwrap(), 0.0);
        let sexp = MarginalSpec::new(
            Family::shifted_exponential_median(1.0).unwrap(),
            &[0.5],
        )
        .unwrap();
        let v = limit_constant(&sexp).unwrap();
        assert!((v - 0.241_970_724_519_143_37).abs() <= 1e-12);
        let b21 = MarginalSpec::new(Family::Beta21, &[0.5]).unwrap();
        let v = limit_constant(&b21).unwrap();
        assert!((v - 0.120_985_362_259_571_68).abs() <= 1e-12);
    }

    #[test]
    fn fit_rate_examples() {
        // Exact power law.
        let pts: Vec<(f64, f64)> = [1_000.0, 10_000.0, 100_000.0, 1_000_000.0_f64]
            .iter()
            .map(|&n| (n, 3.0 / n.sqrt()))
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() <= 1e-12);
        assert!(fit.max_residual <= 1e-12);
        // Logarithmic factor flattens the fitted slope.
        let pts: Vec<(f64, f64)> = (0..7)
            .map(|i| {
                let n = 1_000.0 * 10.0_f64.powf(i as f64 * 0.5);
                (n, n.ln() / n.sqrt())
            })
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!(
            fit.slope > -0.5 && fit.slope < -0.35,
            "flattened slope {}",
            fit.slope
        );
        assert!(fit_rate(&pts[..2]).is_err());
        assert!(fit_rate(&[(10.0, 0.1), (20.0, 0.0), (30.0, 0.1)]).is_err());
    }

    #[test]
    fn median_experiment_iid_normal() {
        let plan = median_plan(
            ModelConfig::Iid {
                marginal: Family::StandardNormal,
            },
            vec![1_001],
            20_000,
            42,
        );
        let runs = run_median_experiment(&plan).unwrap();
        assert_eq!(runs.len(), 1);
        let run = &runs[0];
        assert!(run.result.ks <= 0.03, "KS {}", run.result.ks);
        assert!((run.sigma_sq - 0.25).abs() <= 1e-12);
        // Same plan, same bits.
        let rerun = run_median_experiment(&plan).unwrap();
        assert_eq!(run.result.stats, rerun[0].result.stats);
        assert_eq!(run.result.ks.to_bits(), rerun[0].result.ks.to_bits());
    }

    #[test]
    fn median_experiment_matches_exact_oracle() {
        // Empirical law of the raw median vs the exact Beta law, and the MC
        // KS vs the oracle KS, both within the 2/sqrt(R) envelope.
        let n = 101;
        let spec = MarginalSpec::new(Family::StandardNormal, &[0.5]).unwrap();
        for reps in [10_000usize, 100_000] {
            let plan = median_plan(
                ModelConfig::Iid {
                    marginal: Family::StandardNormal,
                },
                vec![n],
                reps,
                7,
            );
            let run = &run_median_experiment(&plan).unwrap()[0];
            let budget = 2.0 / (reps as f64).sqrt();
            // Undo the standardization to recover medians.
            let scale = run.theta * (n as f64).sqrt() / run.sigma_sq.sqrt();
            let medians: Vec<f64> = run.result.stats.iter().map(|w| w / scale).collect();
            let ks_raw = ks_statistic(&medians, |t| {
                iid_median_cdf_exact(&spec, n, t).unwrap()
            })
            .unwrap();
            assert!(ks_raw <= budget, "R={reps}: oracle KS {ks_raw} > {budget}");
            let exact_sup = scaled_ks_exact(&spec, n).unwrap() / (n as f64).sqrt();
            assert!(
                (run.result.ks - exact_sup).abs() <= budget,
                "R={reps}: MC KS {} vs exact {exact_sup}",
                run.result.ks
            );
        }
    }

    #[test]
    fn median_experiment_invariant_to_worker_count() {
        let plan = median_plan(
            ModelConfig::MovingAverage {
                mu: 0.0,
                coeffs: vec![0.6],
                innovation: Innovation::StandardNormal,
            },
            vec![200, 400],
            2_000,
            11,
        );
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_median_experiment(&plan).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_median_experiment(&plan).unwrap());
        for (a, b) in one.iter().zip(four.iter()) {
            assert_eq!(a.result.stats, b.result.stats);
            assert_eq!(a.result.ks.to_bits(), b.result.ks.to_bits());
        }
    }

    #[test]
    fn joint_experiment_small_run() {
        let plan = ExperimentPlan {
            model: ModelConfig::Iid {
                marginal: Family::Uniform { a: -0.5, b: 0.5 },
            },
            levels: vec![0.25, 0.5, 0.75],
            n_list: vec![400],
            reps: 4_000,
            seed: 3,
            x_axis: vec![-1.0, 0.0, 1.0, f64::INFINITY],
        };
        let runs = run_joint_experiment(&plan).unwrap();
        let run = &runs[0];
        assert_eq!(run.rows.len(), 64);
        // The all-infinite corner has probability 1 on both sides.
        let corner = run
            .rows
            .iter()
            .find(|r| r.x.iter().all(|v| v.is_infinite()))
            .unwrap();
        assert_eq!(corner.empirical, 1.0);
        assert!((corner.gaussian - 1.0).abs() <= 2.0 * RECT_PRECISION + 1e-9);
        assert!(run.max_gap <= 0.2, "max gap {}", run.max_gap);
        // Deterministic rerun.
        let rerun = run_joint_experiment(&plan).unwrap();
        assert_eq!(run.max_gap.to_bits(), rerun[0].max_gap.to_bits());
    }

    #[test]
    fn plan_validation() {
        let mut plan = median_plan(
            ModelConfig::Iid {
                marginal: Family::StandardNormal,
            },
            vec![100, 100],
            2_000,
            1,
        );
        assert!(plan.validate().is_err());
        plan.n_list = vec![100, 200];
        assert!(plan.validate().is_ok());
        plan.reps = 10;
        assert!(plan.validate().is_err());
    }
}
