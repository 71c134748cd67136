//! One-dimensional laws with evaluable CDF, density, and density derivative,
//! plus the quantile anchors and smoothness budget `(A, eps)` that the rate
//! bounds consume.
//!
//! The family list covers the three regimes the experiments need: symmetric
//! laws whose second derivative vanishes at the median (normal, uniform),
//! asymmetric laws with a nonzero second derivative there (shifted
//! exponential, `F(x) = x^2` on `[0,1]`), and a heavy-tailed law without a
//! mean (Cauchy).

use crate::rng::CounterRng;
use crate::special::{std_normal_cdf, std_normal_inv_cdf, std_normal_pdf};
use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// Analytic distribution family with parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    StandardNormal,
    Normal { mean: f64, variance: f64 },
    Uniform { a: f64, b: f64 },
    ShiftedExponential { rate: f64, shift: f64 },
    /// `F(x) = x^2` on `[0, 1]`.
    Beta21,
    Cauchy { location: f64, scale: f64 },
}

impl Family {
    /// Shifted exponential with its median placed at zero.
    pub fn shifted_exponential_median(rate: f64) -> Result<Family> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::domain(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(Family::ShiftedExponential {
            rate,
            shift: -std::f64::consts::LN_2 / rate,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Family::StandardNormal => std_normal_cdf(x),
            Family::Normal { mean, variance } => std_normal_cdf((x - mean) / variance.sqrt()),
            Family::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Family::ShiftedExponential { rate, shift } => {
                if x <= shift {
                    0.0
                } else {
                    -(-rate * (x - shift)).exp_m1()
                }
            }
            Family::Beta21 => x.clamp(0.0, 1.0).powi(2),
            Family::Cauchy { location, scale } => {
                0.5 + ((x - location) / scale).atan() / PI
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Family::StandardNormal => std_normal_pdf(x),
            Family::Normal { mean, variance } => {
                let s = variance.sqrt();
                std_normal_pdf((x - mean) / s) / s
            }
            Family::Uniform { a, b } => {
                if x >= a && x <= b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Family::ShiftedExponential { rate, shift } => {
                if x <= shift {
                    0.0
                } else {
                    rate * (-rate * (x - shift)).exp()
                }
            }
            Family::Beta21 => {
                if (0.0..=1.0).contains(&x) {
                    2.0 * x
                } else {
                    0.0
                }
            }
            Family::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                1.0 / (PI * scale * (1.0 + z * z))
            }
        }
    }

    /// Derivative of the density (i.e. `F''`).
    pub fn pdf_deriv(&self, x: f64) -> f64 {
        match *self {
            Family::StandardNormal => -x * std_normal_pdf(x),
            Family::Normal { mean, variance } => {
                let s = variance.sqrt();
                let z = (x - mean) / s;
                -z * std_normal_pdf(z) / (s * s)
            }
            Family::Uniform { .. } => 0.0,
            Family::ShiftedExponential { rate, shift } => {
                if x <= shift {
                    0.0
                } else {
                    -rate * rate * (-rate * (x - shift)).exp()
                }
            }
            Family::Beta21 => {
                if (0.0..=1.0).contains(&x) {
                    2.0
                } else {
                    0.0
                }
            }
            Family::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                let d = 1.0 + z * z;
                -2.0 * z / (PI * scale * scale * d * d)
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!(
                "quantile level must lie in (0,1), got {p}"
            )));
        }
        Ok(match *self {
            Family::StandardNormal => std_normal_inv_cdf(p)?,
            Family::Normal { mean, variance } => mean + variance.sqrt() * std_normal_inv_cdf(p)?,
            Family::Uniform { a, b } => a + (b - a) * p,
            Family::ShiftedExponential { rate, shift } => shift - (-p).ln_1p() / rate,
            Family::Beta21 => p.sqrt(),
            Family::Cauchy { location, scale } => location + scale * (PI * (p - 0.5)).tan(),
        })
    }

    /// One draw by inverse transform (closed forms; normals use Box-Muller).
    #[inline]
    pub fn sample(&self, rng: &mut CounterRng, cache: &mut Option<f64>) -> f64 {
        match *self {
            Family::StandardNormal => rng.next_std_normal(cache),
            Family::Normal { mean, variance } => {
                mean + variance.sqrt() * rng.next_std_normal(cache)
            }
            Family::Uniform { a, b } => a + (b - a) * rng.next_open01(),
            Family::ShiftedExponential { rate, shift } => {
                shift - rng.next_open01().ln() / rate
            }
            Family::Beta21 => rng.next_open01().sqrt(),
            Family::Cauchy { location, scale } => location + scale * rng.next_std_cauchy(),
        }
    }

    /// Support interval (used to keep smoothness windows interior).
    fn support(&self) -> (f64, f64) {
        match *self {
            Family::Uniform { a, b } => (a, b),
            Family::ShiftedExponential { shift, .. } => (shift, f64::INFINITY),
            Family::Beta21 => (0.0, 1.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Family::StandardNormal | Family::Beta21 => true,
            Family::Normal { mean, variance } => mean.is_finite() && variance > 0.0,
            Family::Uniform { a, b } => a.is_finite() && b.is_finite() && a < b,
            Family::ShiftedExponential { rate, shift } => rate > 0.0 && shift.is_finite(),
            Family::Cauchy { location, scale } => location.is_finite() && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid family parameters: {self:?}")))
        }
    }
}

/// A marginal law anchored at a set of quantile levels, carrying the exact
/// anchors `m_k` and a smoothness budget `A`, `eps` valid on every window
/// `[m_k - eps, m_k + eps]`.
#[derive(Debug, Clone)]
pub struct MarginalSpec {
    family: Family,
    levels: Vec<f64>,
    anchors: Vec<f64>,
    bound_a: f64,
    window_eps: f64,
}

impl MarginalSpec {
    pub fn new(family: Family, levels: &[f64]) -> Result<MarginalSpec> {
        family.validate()?;
        if levels.is_empty() {
            return Err(Error::domain("at least one quantile level required"));
        }
        for w in levels.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::domain(format!(
                    "levels must be strictly increasing, got {:?}",
                    levels
                )));
            }
        }
        let anchors = levels
            .iter()
            .map(|&p| family.quantile(p))
            .collect::<Result<Vec<_>>>()?;
        let (bound_a, window_eps) = smoothness_budget(&family, &anchors)?;
        Ok(MarginalSpec {
            family,
            levels: levels.to_vec(),
            anchors,
            bound_a,
            window_eps,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Quantile anchors `m_k`, one per level.
    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    /// Uniform bound `A` on `|F'|` and `|F''|` over the anchor windows.
    pub fn bound_a(&self) -> f64 {
        self.bound_a
    }

    /// Half-width of the smoothness windows.
    pub fn window_eps(&self) -> f64 {
        self.window_eps
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.family.cdf(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.family.pdf(x)
    }

    pub fn pdf_deriv(&self, x: f64) -> f64 {
        self.family.pdf_deriv(x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.family.quantile(p)
    }
}

// (A, eps) valid on [m_k - eps, m_k + eps] for each anchor, computed from the
// closed-form extrema of F' and F'' per family.
fn smoothness_budget(family: &Family, anchors: &[f64]) -> Result<(f64, f64)> {
    let phi0 = std_normal_pdf(0.0);
    let phi1 = std_normal_pdf(1.0);
    let (a, eps) = match *family {
        Family::StandardNormal => (phi0, 0.5),
        Family::Normal { variance, .. } => {
            let s = variance.sqrt();
            ((phi0 / s).max(phi1 / (s * s)), 0.5 * s)
        }
        Family::Uniform { a, b } => {
            let margin = interior_margin(family, anchors)?;
            (1.0 / (b - a), 0.5 * margin)
        }
        Family::ShiftedExponential { rate, shift } => {
            let q_min = anchors
                .iter()
                .map(|m| m - shift)
                .fold(f64::INFINITY, f64::min);
            if q_min <= 0.0 {
                return Err(Error::domain("anchor at the support edge"));
            }
            let eps = 0.5 * q_min;
            let peak = (-rate * (q_min - eps)).exp();
            (rate.max(rate * rate) * peak, eps)
        }
        Family::Beta21 => {
            let margin = interior_margin(family, anchors)?;
            (2.0, 0.5 * margin)
        }
        Family::Cauchy { scale, .. } => {
            let sup_pdf = 1.0 / (PI * scale);
            let sup_pdf_deriv = 9.0 / (8.0 * 3.0_f64.sqrt() * PI * scale * scale);
            (sup_pdf.max(sup_pdf_deriv), 0.5 * scale)
        }
    };
    Ok((a, eps))
}

fn interior_margin(family: &Family, anchors: &[f64]) -> Result<f64> {
    let (lo, hi) = family.support();
    let margin = anchors
        .iter()
        .map(|m| (m - lo).min(hi - m))
        .fold(f64::INFINITY, f64::min);
    if margin <= 0.0 {
        return Err(Error::domain("anchor at the support edge"));
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_families() -> Vec<Family> {
        vec![
            Family::StandardNormal,
            Family::Normal {
                mean: 1.5,
                variance: 1.36,
            },
            Family::Uniform { a: -0.5, b: 0.5 },
            Family::shifted_exponential_median(1.0).unwrap(),
            Family::Beta21,
            Family::Cauchy {
                location: 0.3,
                scale: 1.5,
            },
        ]
    }

    #[test]
    fn anchors_hit_levels() {
        let levels = [0.1, 0.25, 0.5, 0.75, 0.9];
        for fam in all_families() {
            let spec = MarginalSpec::new(fam, &levels).unwrap();
            for (m, &alpha) in spec.anchors().iter().zip(levels.iter()) {
                assert!(
                    (spec.cdf(*m) - alpha).abs() <= 1e-12,
                    "{fam:?}: cdf({m}) != {alpha}"
                );
            }
        }
    }

    #[test]
    fn smoothness_budget_holds_on_windows() {
        let levels = [0.25, 0.5, 0.75];
        for fam in all_families() {
            let spec = MarginalSpec::new(fam, &levels).unwrap();
            let (a, eps) = (spec.bound_a(), spec.window_eps());
            assert!(a > 0.0 && eps > 0.0);
            for &m in spec.anchors() {
                for i in 0..=200 {
                    let x = m - eps + 2.0 * eps * (i as f64) / 200.0;
                    assert!(
                        spec.pdf(x) <= a * (1.0 + 1e-12),
                        "{fam:?}: pdf({x}) = {} > A = {a}",
                        spec.pdf(x)
                    );
                    assert!(
                        spec.pdf_deriv(x).abs() <= a * (1.0 + 1e-12),
                        "{fam:?}: |pdf'({x})| = {} > A = {a}",
                        spec.pdf_deriv(x).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn pdf_matches_cdf_derivative() {
        // Central finite differences on a grid covering every anchor window.
        let levels = [0.25, 0.5, 0.75];
        let h = 1e-5;
        for fam in all_families() {
            let spec = MarginalSpec::new(fam, &levels).unwrap();
            let eps = spec.window_eps();
            for &m in spec.anchors() {
                for i in 0..1_000 {
                    let x = m - eps + 2.0 * eps * (i as f64 + 0.5) / 1_000.0;
                    let fd = (spec.cdf(x + h) - spec.cdf(x - h)) / (2.0 * h);
                    assert!(
                        (fd - spec.pdf(x)).abs() <= 1e-6,
                        "{fam:?} at {x}: fd {fd} vs pdf {}",
                        spec.pdf(x)
                    );
                }
            }
        }
    }

    #[test]
    fn pdf_deriv_matches_pdf_derivative() {
        let levels = [0.5];
        let h = 1e-5;
        for fam in all_families() {
            let spec = MarginalSpec::new(fam, &levels).unwrap();
            let m = spec.anchors()[0];
            let eps = spec.window_eps();
            for i in 0..200 {
                let x = m - eps + 2.0 * eps * (i as f64 + 0.5) / 200.0;
                let fd = (spec.pdf(x + h) - spec.pdf(x - h)) / (2.0 * h);
                assert!(
                    (fd - spec.pdf_deriv(x)).abs() <= 1e-5,
                    "{fam:?} at {x}: fd {fd} vs pdf' {}",
                    spec.pdf_deriv(x)
                );
            }
        }
    }

    #[test]
    fn quantile_round_trip() {
        for fam in all_families() {
            for &p in &[0.01, 0.2, 0.5, 0.8, 0.99] {
                let x = fam.quantile(p).unwrap();
                assert!(
                    (fam.cdf(x) - p).abs() <= 1e-12,
                    "{fam:?}: cdf(quantile({p})) = {}",
                    fam.cdf(x)
                );
            }
        }
    }

    #[test]
    fn rejects_bad_levels_and_params() {
        assert!(MarginalSpec::new(Family::StandardNormal, &[]).is_err());
        assert!(MarginalSpec::new(Family::StandardNormal, &[0.5, 0.5]).is_err());
        assert!(MarginalSpec::new(Family::StandardNormal, &[0.7, 0.2]).is_err());
        assert!(MarginalSpec::new(
            Family::Normal {
                mean: 0.0,
                variance: -1.0
            },
            &[0.5]
        )
        .is_err());
        assert!(MarginalSpec::new(Family::Uniform { a: 1.0, b: 0.0 }, &[0.5]).is_err());
        assert!(Family::shifted_exponential_median(0.0).is_err());
    }

    #[test]
    fn shifted_exponential_median_at_zero() {
        let fam = Family::shifted_exponential_median(1.0).unwrap();
        assert!((fam.cdf(0.0) - 0.5).abs() <= 1e-15);
        // F(x) = 1 - exp(-(x + ln 2)), so F'(0) = 1/2 and F''(0) = -1/2.
        assert!((fam.pdf(0.0) - 0.5).abs() <= 1e-15);
        assert!((fam.pdf_deriv(0.0) + 0.5).abs() <= 1e-15);
    }

    #[test]
    fn sampling_matches_quantile_transform() {
        // Same stream, two paths: Exp/Beta/Cauchy draws are the quantile
        // transform of (1 - u) or u; normals use Box-Muller so only the
        // distribution (not the path) is checked elsewhere.
        use crate::rng::CounterRng;
        let fam = Family::Beta21;
        let mut r1 = CounterRng::new(11);
        let mut r2 = CounterRng::new(11);
        let mut cache = None;
        for _ in 0..100 {
            let s = fam.sample(&mut r1, &mut cache);
            let u = r2.next_open01();
            assert_eq!(s, u.sqrt());
        }
    }
}
