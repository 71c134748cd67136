//! Sample quantiles, empirical CDF distances, and rectangle probabilities.
//!
//! The sample quantile at level `alpha` is the `(floor(n alpha) + 1)`-th
//! order statistic, which realizes the supremum in the max-based definition
//! and reduces to the classical middle value for odd `n` at `alpha = 1/2`.

use crate::marginal::MarginalSpec;
use crate::{Error, Result};

/// Quantile levels with their anchors and marginal densities.
#[derive(Debug, Clone)]
pub struct QuantileGrid {
    levels: Vec<f64>,
    anchors: Vec<f64>,
    thetas: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(levels: Vec<f64>, anchors: Vec<f64>, thetas: Vec<f64>) -> Result<QuantileGrid> {
        if levels.is_empty() || levels.len() != anchors.len() || levels.len() != thetas.len() {
            return Err(Error::dimension(format!(
                "grid needs matching nonempty levels/anchors/thetas, got {}/{}/{}",
                levels.len(),
                anchors.len(),
                thetas.len()
            )));
        }
        if levels.iter().any(|&a| !(0.0 < a && a < 1.0)) {
            return Err(Error::domain("levels must lie in (0,1)"));
        }
        for w in levels.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::domain("levels must be strictly increasing"));
            }
        }
        for w in anchors.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::domain("anchors must be strictly increasing"));
            }
        }
        if thetas.iter().any(|&t| !(t > f64::EPSILON)) {
            return Err(Error::domain(
                "densities at the anchors must be positive",
            ));
        }
        Ok(QuantileGrid {
            levels,
            anchors,
            thetas,
        })
    }

    /// Grid induced by an anchored marginal: `m_k` are its quantiles and
    /// `theta_k = F'(m_k)`.
    pub fn from_marginal(spec: &MarginalSpec) -> Result<QuantileGrid> {
        let thetas = spec.anchors().iter().map(|&m| spec.pdf(m)).collect();
        QuantileGrid::new(spec.levels().to_vec(), spec.anchors().to_vec(), thetas)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn theta_min(&self) -> f64 {
        self.thetas.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// Monte Carlo output of one experiment setting.
#[derive(Debug, Clone)]
pub struct SimResult {
    /// Standardized statistic per replication.
    pub stats: Vec<f64>,
    /// Replication count.
    pub reps: usize,
    /// Master seed of the run.
    pub seed: u64,
    /// Kolmogorov-Smirnov distance of `stats` to the reference law.
    pub ks: f64,
    /// Optional `(x-grid point, empirical probability)` table.
    pub rect_table: Option<Vec<(Vec<f64>, f64)>>,
}

impl SimResult {
    pub fn new(
        stats: Vec<f64>,
        reps: usize,
        seed: u64,
        ks: f64,
        rect_table: Option<Vec<(Vec<f64>, f64)>>,
    ) -> Result<SimResult> {
        if reps == 0 {
            return Err(Error::domain("replication count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&ks) {
            return Err(Error::domain(format!("KS value {ks} outside [0,1]")));
        }
        if let Some(table) = &rect_table {
            if table.iter().any(|(_, p)| !(0.0..=1.0).contains(p)) {
                return Err(Error::domain("rectangle probability outside [0,1]"));
            }
        }
        Ok(SimResult {
            stats,
            reps,
            seed,
            ks,
            rect_table,
        })
    }
}

// 0-based index of the (floor(n alpha) + 1)-th order statistic.
fn order_index(n: usize, alpha: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::domain("sample must be nonempty"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "quantile level must lie in (0,1), got {alpha}"
        )));
    }
    let k = (n as f64 * alpha).floor() as usize;
    // floor(n alpha) + 1 <= n is automatic for alpha < 1.
    assert!(k < n, "order statistic index out of range");
    Ok(k)
}

/// Sample quantile: the `(floor(n alpha) + 1)`-th order statistic.
pub fn sample_quantile(sample: &[f64], alpha: f64) -> Result<f64> {
    let k = order_index(sample.len(), alpha)?;
    let mut buf = sample.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*v)
}

/// Joint sample quantiles along a grid; the output is nondecreasing.
pub fn joint_quantiles(sample: &[f64], grid: &QuantileGrid) -> Result<Vec<f64>> {
    let mut buf = sample.to_vec();
    joint_quantiles_in_place(&mut buf, grid.levels())
}

/// Same as [`joint_quantiles`] but consumes a scratch buffer.
pub fn joint_quantiles_in_place(buf: &mut [f64], levels: &[f64]) -> Result<Vec<f64>> {
    let n = buf.len();
    let mut out = Vec::with_capacity(levels.len());
    let mut floor_idx = 0usize;
    for &alpha in levels {
        let k = order_index(n, alpha)?;
        // Earlier selections guarantee buf[..floor_idx] <= buf[floor_idx..],
        // so later (larger) order statistics live in the tail slice.
        let rel = k - floor_idx;
        let (_, v, _) = buf[floor_idx..].select_nth_unstable_by(rel, f64::total_cmp);
        out.push(*v);
        floor_idx = k;
    }
    Ok(out)
}

/// Exact Kolmogorov-Smirnov distance between the empirical CDF of `values`
/// and a reference CDF, evaluating both one-sided gaps at every sorted value.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], reference_cdf: F) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("KS statistic of an empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let r = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = reference_cdf(x);
        let upper = (i + 1) as f64 / r - f;
        let lower = f - i as f64 / r;
        sup = sup.max(upper).max(lower);
    }
    Ok(sup)
}

/// Fraction of vectors `v` with `v_k <= x_k` for every coordinate.
pub fn empirical_rect_prob(vectors: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    if vectors.is_empty() {
        return Err(Error::domain("rectangle probability of an empty set"));
    }
    let mut count = 0usize;
    for v in vectors {
        if v.len() != x.len() {
            return Err(Error::dimension(format!(
                "vector has {} coordinates, threshold has {}",
                v.len(),
                x.len()
            )));
        }
        if v.iter().zip(x.iter()).all(|(a, b)| a <= b) {
            count += 1;
        }
    }
    Ok(count as f64 / vectors.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::Family;
    use crate::rng::CounterRng;
    use crate::special::{std_normal_cdf, std_normal_inv_cdf};

    fn grid_for(levels: &[f64]) -> QuantileGrid {
        let spec = MarginalSpec::new(Family::Uniform { a: 0.0, b: 10.0 }, levels).unwrap();
        QuantileGrid::from_marginal(&spec).unwrap()
    }

    #[test]
    fn sample_quantile_examples() {
        assert_eq!(sample_quantile(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
        assert_eq!(sample_quantile(&[5.0, 1.0, 4.0, 2.0], 0.5).unwrap(), 4.0);
        assert_eq!(sample_quantile(&[5.0, 1.0, 4.0, 2.0], 0.25).unwrap(), 2.0);
    }

    #[test]
    fn odd_median_is_middle_order_statistic() {
        let mut r = CounterRng::new(1);
        for m in [1usize, 5, 20] {
            let n = 2 * m + 1;
            let sample: Vec<f64> = (0..n).map(|_| r.next_open01()).collect();
            let mut sorted = sample.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            assert_eq!(sample_quantile(&sample, 0.5).unwrap(), sorted[m]);
        }
    }

    #[test]
    fn quantile_permutation_invariant_and_monotone() {
        let mut r = CounterRng::new(7);
        for _ in 0..50 {
            let n = 3 + (r.next_u64() % 40) as usize;
            let sample: Vec<f64> = (0..n).map(|_| r.next_open01() * 10.0 - 5.0).collect();
            let mut shuffled = sample.clone();
            // Fisher-Yates with the test stream.
            for i in (1..n).rev() {
                let j = (r.next_u64() % (i as u64 + 1)) as usize;
                shuffled.swap(i, j);
            }
            let mut prev = f64::NEG_INFINITY;
            for &alpha in &[0.1, 0.25, 0.5, 0.75, 0.9] {
                let a = sample_quantile(&sample, alpha).unwrap();
                let b = sample_quantile(&shuffled, alpha).unwrap();
                assert_eq!(a, b);
                assert!(a >= prev);
                prev = a;
            }
        }
    }

    #[test]
    fn joint_quantiles_examples() {
        let g = grid_for(&[0.25, 0.5, 0.75]);
        let q = joint_quantiles(&[1.0, 2.0, 3.0, 4.0], &g).unwrap();
        assert_eq!(q, vec![2.0, 3.0, 4.0]);

        let g1 = grid_for(&[0.5]);
        let q1 = joint_quantiles(&[3.0, 1.0, 2.0], &g1).unwrap();
        assert_eq!(q1[0], sample_quantile(&[3.0, 1.0, 2.0], 0.5).unwrap());
    }

    #[test]
    fn joint_quantiles_sorted_on_random_input() {
        let g = grid_for(&[0.1, 0.3, 0.5, 0.7, 0.9]);
        let mut r = CounterRng::new(3);
        for _ in 0..100 {
            let n = 5 + (r.next_u64() % 200) as usize;
            let sample: Vec<f64> = (0..n).map(|_| r.next_open01()).collect();
            let q = joint_quantiles(&sample, &g).unwrap();
            for w in q.windows(2) {
                assert!(w[0] <= w[1]);
            }
            // Against the one-shot definition.
            for (k, &alpha) in g.levels().iter().enumerate() {
                assert_eq!(q[k], sample_quantile(&sample, alpha).unwrap());
            }
        }
    }

    #[test]
    fn ks_hand_enumerated_example() {
        // values {-1, 0, 1} vs Phi: the maximum one-sided gap is
        // 1/3 - Phi(-1) = 0.17467807940187624.
        let ks = ks_statistic(&[-1.0, 0.0, 1.0], std_normal_cdf).unwrap();
        let expect = 1.0 / 3.0 - std_normal_cdf(-1.0);
        assert!((ks - expect).abs() <= 1e-15);
        assert!((ks - 0.174_678_079_401_876_24).abs() <= 1e-12);
    }

    #[test]
    fn ks_quantile_lattice_is_small() {
        let r = 1_000usize;
        let values: Vec<f64> = (0..r)
            .map(|i| std_normal_inv_cdf((i as f64 + 0.5) / r as f64).unwrap())
            .collect();
        let ks = ks_statistic(&values, std_normal_cdf).unwrap();
        assert!(ks <= 0.5 / r as f64 + 1e-9, "lattice KS {ks}");
    }

    #[test]
    fn ks_point_mass_at_median() {
        let ks = ks_statistic(&[0.0; 10], std_normal_cdf).unwrap();
        assert!((ks - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn ks_against_own_ecdf_is_jump_size() {
        // With a step reference sharing the jump points, the two-sided
        // formula resolves to the granularity 1/R.
        let values = [0.3, 1.2, 2.0, 5.5];
        let sorted = values.to_vec();
        let ecdf = move |x: f64| sorted.iter().filter(|&&v| v <= x).count() as f64 / 4.0;
        let ks = ks_statistic(&values, ecdf).unwrap();
        assert!(ks <= 0.25 + 1e-15);
    }

    #[test]
    fn rect_prob_examples() {
        let vectors = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![-1.0, 2.0],
            vec![2.0, -1.0],
        ];
        assert_eq!(
            empirical_rect_prob(&vectors, &[f64::INFINITY, f64::INFINITY]).unwrap(),
            1.0
        );
        assert_eq!(empirical_rect_prob(&vectors, &[-5.0, -5.0]).unwrap(), 0.0);
        assert_eq!(empirical_rect_prob(&vectors, &[0.5, 0.5]).unwrap(), 0.25);
        assert!(empirical_rect_prob(&vectors, &[0.5]).is_err());
    }

    #[test]
    fn rect_prob_monotone_in_threshold() {
        let mut r = CounterRng::new(12);
        let vectors: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![r.next_open01(), r.next_open01(), r.next_open01()])
            .collect();
        let mut prev = 0.0;
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let p = empirical_rect_prob(&vectors, &[t, t, t]).unwrap();
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn grid_validation() {
        assert!(QuantileGrid::new(vec![0.5], vec![0.0], vec![0.4]).is_ok());
        assert!(QuantileGrid::new(vec![], vec![], vec![]).is_err());
        assert!(QuantileGrid::new(vec![0.5, 0.4], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(QuantileGrid::new(vec![0.4, 0.5], vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(QuantileGrid::new(vec![0.5], vec![0.0], vec![0.0]).is_err());
        assert!(QuantileGrid::new(vec![1.5], vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn quantile_domain_errors() {
        assert!(sample_quantile(&[], 0.5).is_err());
        assert!(sample_quantile(&[1.0], 0.0).is_err());
        assert!(sample_quantile(&[1.0], 1.0).is_err());
    }
}
