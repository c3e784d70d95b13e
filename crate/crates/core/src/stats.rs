//! Distribution-free statistics: empirical CDFs, DKW bands, copula bounds and
//! the p-RSR bounds used by the detector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Empirical CDF over a sorted multiset of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    samples: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        Self::from_vec(values.to_vec())
    }

    pub fn from_vec(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySamples);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { samples: values })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let count = self.samples.partition_point(|&s| s <= x);
        count as f64 / self.n() as f64
    }

    /// Generalized inverse `inf{c : F(c) >= q}`: `-inf` for `q <= 0`,
    /// `+inf` for `q > 1`.
    pub fn quantile(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if q > 1.0 || q.is_nan() {
            return f64::INFINITY;
        }
        self.samples[self.rank(q) - 1]
    }

    /// Like [`Ecdf::quantile`], but levels above 1 map to the largest sample.
    pub fn quantile_saturating(&self, q: f64) -> f64 {
        if q > 1.0 {
            return self.samples[self.n() - 1];
        }
        self.quantile(q)
    }

    /// Smallest k in 1..=n with k/n >= q, evaluated with the same division
    /// as [`Ecdf::eval`] so the two stay exactly consistent.
    fn rank(&self, q: f64) -> usize {
        let n = self.n();
        let nf = n as f64;
        let mut k = ((q * nf).ceil() as usize).clamp(1, n);
        while k > 1 && (k - 1) as f64 / nf >= q {
            k -= 1;
        }
        while k < n && (k as f64 / nf) < q {
            k += 1;
        }
        k
    }
}

/// DKW half-width `sqrt(ln(2/alpha) / (2n))`.
pub fn dkw_epsilon(alpha: f64, n: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    Ok(((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt())
}

/// Lower and upper Fréchet–Hoeffding copula bounds at `(u, v)`.
pub fn frechet_bounds(u: f64, v: f64) -> Result<(f64, f64)> {
    for (name, x) in [("u", u), ("v", v)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::param(format!("{name} must lie in [0, 1], got {x}")));
        }
    }
    Ok(((u + v - 1.0).max(0.0), u.min(v)))
}

/// How quantile levels above 1 are handled when composing the CDFs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileTail {
    /// Levels above 1 evaluate at the largest sample. For continuous costs the
    /// largest of n draws exceeds the p-quantile with probability 1 - p^n.
    #[default]
    Saturate,
    /// Levels above 1 give +inf, so the upper composed bound becomes 1.
    Strict,
}

impl QuantileTail {
    fn quantile(self, e: &Ecdf, q: f64) -> f64 {
        match self {
            QuantileTail::Saturate => e.quantile_saturating(q),
            QuantileTail::Strict => e.quantile(q),
        }
    }
}

fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// Bounds on `F_B(F_A^{-1}(p))` from the two empirical CDFs: `(v_low, v_high)`.
pub fn v_bounds(a: &Ecdf, b: &Ecdf, p: f64, alpha: f64, tail: QuantileTail) -> Result<(f64, f64)> {
    if a.n() != b.n() {
        return Err(Error::SampleCountMismatch {
            left: a.n(),
            right: b.n(),
        });
    }
    check_unit_open("p", p)?;
    let eps = dkw_epsilon(alpha, a.n())?;
    let v_high = (b.eval(tail.quantile(a, p + eps)) + eps).clamp(0.0, 1.0);
    let v_low = (b.eval(tail.quantile(a, p - eps)) - eps).clamp(0.0, 1.0);
    Ok((v_low, v_high))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBounds {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub v_low: f64,
    pub v_high: f64,
}

impl RiskBounds {
    fn from_v(p: f64, epsilon: f64, v_low: f64, v_high: f64) -> Self {
        let lower = (1.0 - p.min(v_high) / p).clamp(0.0, 1.0);
        let upper = (1.0 - (p + v_low - 1.0).max(0.0) / p).clamp(0.0, 1.0);
        Self {
            lower,
            upper: upper.max(lower),
            epsilon,
            v_low,
            v_high,
        }
    }
}

/// PAC bounds on the p-RSR from two equal-size sample sets.
pub fn rsr_bounds(a: &[f64], b: &[f64], p: f64, alpha: f64) -> Result<RiskBounds> {
    rsr_bounds_with(a, b, p, alpha, QuantileTail::default())
}

pub fn rsr_bounds_with(
    a: &[f64],
    b: &[f64],
    p: f64,
    alpha: f64,
    tail: QuantileTail,
) -> Result<RiskBounds> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::param("at least 2 samples per set are required"));
    }
    rsr_bounds_ecdf(&Ecdf::new(a)?, &Ecdf::new(b)?, p, alpha, tail)
}

pub fn rsr_bounds_ecdf(
    a: &Ecdf,
    b: &Ecdf,
    p: f64,
    alpha: f64,
    tail: QuantileTail,
) -> Result<RiskBounds> {
    let (v_low, v_high) = v_bounds(a, b, p, alpha, tail)?;
    let eps = dkw_epsilon(alpha, a.n())?;
    Ok(RiskBounds::from_v(p, eps, v_low, v_high))
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
struct RawDetectorParams {
    p: f64,
    gamma: f64,
    alpha: f64,
    n: usize,
    #[serde(default)]
    tail: QuantileTail,
}

/// Risk aversion `p`, alarm threshold `gamma`, confidence `1 - alpha` and
/// samples per scene `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDetectorParams")]
pub struct DetectorParams {
    p: f64,
    gamma: f64,
    alpha: f64,
    n: usize,
    tail: QuantileTail,
}

impl TryFrom<RawDetectorParams> for DetectorParams {
    type Error = Error;

    fn try_from(raw: RawDetectorParams) -> Result<Self> {
        Self::new(raw.p, raw.gamma, raw.alpha, raw.n).map(|d| d.with_tail(raw.tail))
    }
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            p: 0.99,
            gamma: 0.9,
            alpha: 0.1,
            n: 1000,
            tail: QuantileTail::Saturate,
        }
    }
}

impl DetectorParams {
    pub fn new(p: f64, gamma: f64, alpha: f64, n: usize) -> Result<Self> {
        check_unit_open("p", p)?;
        check_unit_open("gamma", gamma)?;
        check_unit_open("alpha", alpha)?;
        if n < 2 {
            return Err(Error::param(format!("n must be at least 2, got {n}")));
        }
        Ok(Self {
            p,
            gamma,
            alpha,
            n,
            tail: QuantileTail::default(),
        })
    }

    pub fn with_tail(mut self, tail: QuantileTail) -> Self {
        self.tail = tail;
        self
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tail(&self) -> QuantileTail {
        self.tail
    }

    pub fn epsilon(&self) -> f64 {
        dkw_epsilon(self.alpha, self.n).expect("validated at construction")
    }

    /// The alarm rule on precomputed bounds: `min(p, v_high) < p (1 - gamma)`.
    pub fn fires(&self, bounds: &RiskBounds) -> bool {
        self.p.min(bounds.v_high) < self.p * (1.0 - self.gamma)
    }

    pub fn bounds(&self, a: &Ecdf, b: &Ecdf) -> Result<RiskBounds> {
        if a.n() != self.n || b.n() != self.n {
            return Err(Error::param(format!(
                "expected {} samples per set, got {} and {}",
                self.n,
                a.n(),
                b.n()
            )));
        }
        rsr_bounds_ecdf(a, b, self.p, self.alpha, self.tail)
    }
}

/// True when the perceived-vs-plausible sample sets indicate a task-relevant
/// failure.
pub fn detect(a: &[f64], b: &[f64], params: &DetectorParams) -> Result<bool> {
    let bounds = params.bounds(&Ecdf::new(a)?, &Ecdf::new(b)?)?;
    Ok(params.fires(&bounds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Ecdf {
        Ecdf::new(v).unwrap()
    }

    #[test]
    fn build_sorts_and_keeps_ties() {
        assert_eq!(e(&[3.0, 1.0, 2.0]).samples(), &[1.0, 2.0, 3.0]);
        assert_eq!(e(&[5.0]).n(), 1);
        assert_eq!(e(&[1.0, 1.0, 2.0]).samples(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(Ecdf::new(&[]).unwrap_err().to_string(), "empty sample set");
        assert!(matches!(
            Ecdf::new(&[1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(Ecdf::new(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn eval_examples() {
        let f = e(&[1.0, 2.0, 3.0]);
        assert_eq!(f.eval(2.0), 2.0 / 3.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(f64::INFINITY), 1.0);
        assert_eq!(f.eval(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn quantile_examples() {
        let f = e(&[1.0, 2.0, 3.0]);
        assert_eq!(f.quantile(0.5), 2.0);
        assert_eq!(f.quantile(1.0), 3.0);
        assert_eq!(f.quantile(1.2), f64::INFINITY);
        assert_eq!(f.quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(f.quantile(1.0 / 3.0), 1.0);
        assert_eq!(f.quantile_saturating(1.2), 3.0);
        assert_eq!(f.quantile_saturating(-0.2), f64::NEG_INFINITY);
    }

    #[test]
    fn epsilon_examples() {
        let eps = dkw_epsilon(0.1, 1000).unwrap();
        assert!((eps - 0.038_702_275_602_049_494).abs() < 1e-12);
        let alpha = 2.0 / std::f64::consts::E.powi(2);
        assert!((dkw_epsilon(alpha, 1).unwrap() - 1.0).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for n in [1, 2, 10, 100, 1000, 100_000] {
            let cur = dkw_epsilon(0.05, n).unwrap();
            assert!(cur < prev);
            prev = cur;
        }
        assert!(dkw_epsilon(0.0, 10).is_err());
        assert!(dkw_epsilon(1.0, 10).is_err());
        assert!(dkw_epsilon(0.1, 0).is_err());
    }

    #[test]
    fn frechet_examples() {
        let (w, m) = frechet_bounds(0.3, 0.9).unwrap();
        assert!((w - 0.2).abs() < 1e-15);
        assert_eq!(m, 0.3);
        assert_eq!(frechet_bounds(0.4, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(frechet_bounds(1.0, 0.7).unwrap(), (0.7, 0.7));
        assert!(frechet_bounds(1.1, 0.5).is_err());
        assert!(frechet_bounds(0.5, -0.1).is_err());
    }

    fn linspace(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn v_bounds_identical_sets() {
        let a = e(&linspace(1000));
        let eps = dkw_epsilon(0.1, 1000).unwrap();
        for p in [0.1, 0.5, 0.9, 0.95] {
            let (lo, hi) = v_bounds(&a, &a, p, 0.1, QuantileTail::Strict).unwrap();
            assert!(hi >= (p + 2.0 * eps).min(1.0) - 1e-12, "p={p} hi={hi}");
            assert!(lo <= hi);
        }
    }

    #[test]
    fn v_bounds_separated_sets() {
        let a: Vec<f64> = linspace(1000);
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        let eps = dkw_epsilon(0.1, 1000).unwrap();
        let (lo, hi) = v_bounds(&e(&a), &e(&b), 0.5, 0.1, QuantileTail::Strict).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - eps).abs() < 1e-15);
    }

    #[test]
    fn v_bounds_strict_tail_saturates_to_one() {
        let a: Vec<f64> = linspace(1000);
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        let (_, hi) = v_bounds(&e(&a), &e(&b), 0.99, 0.1, QuantileTail::Strict).unwrap();
        assert_eq!(hi, 1.0);
        let eps = dkw_epsilon(0.1, 1000).unwrap();
        let (_, hi) = v_bounds(&e(&a), &e(&b), 0.99, 0.1, QuantileTail::Saturate).unwrap();
        assert!((hi - eps).abs() < 1e-15);
    }

    #[test]
    fn v_bounds_rejects_mismatched_counts() {
        assert!(matches!(
            v_bounds(&e(&[1.0, 2.0]), &e(&[1.0, 2.0, 3.0]), 0.5, 0.1, QuantileTail::Saturate),
            Err(Error::SampleCountMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn rsr_examples() {
        let a = linspace(1000);
        let r = rsr_bounds(&a, &a, 0.9, 0.1).unwrap();
        assert_eq!(r.lower, 0.0);

        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        let r = rsr_bounds(&a, &b, 0.99, 0.1).unwrap();
        let eps = dkw_epsilon(0.1, 1000).unwrap();
        assert!((r.lower - (1.0 - eps / 0.99)).abs() < 1e-12);
        assert!((r.lower - 0.960_906_792_321_162).abs() < 1e-12);
        assert_eq!(r.v_low, 0.0);
        assert_eq!(r.upper, 1.0);
    }

    #[test]
    fn detect_examples() {
        let params = DetectorParams::new(0.99, 0.9, 0.1, 1000).unwrap();
        let a = linspace(1000);
        assert!(!detect(&a, &a, &params).unwrap());
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert!(detect(&a, &b, &params).unwrap());
        let near_one = DetectorParams::new(0.99, 1.0 - 1e-12, 0.1, 1000).unwrap();
        assert!(!detect(&a, &b, &near_one).unwrap());
        assert!(detect(&a[..10], &b[..10], &params).is_err());
    }

    #[test]
    fn detector_params_validated() {
        assert!(DetectorParams::new(1.0, 0.9, 0.1, 10).is_err());
        assert!(DetectorParams::new(0.5, 0.0, 0.1, 10).is_err());
        assert!(DetectorParams::new(0.5, 0.5, 1.0, 10).is_err());
        assert!(DetectorParams::new(0.5, 0.5, 0.1, 1).is_err());
        let parsed: std::result::Result<DetectorParams, _> =
            serde_json::from_str(r#"{"p":1.5,"gamma":0.9,"alpha":0.1,"n":10}"#);
        assert!(parsed.is_err());
        let parsed: DetectorParams =
            serde_json::from_str(r#"{"p":0.9,"gamma":0.9,"alpha":0.1,"n":10,"tail":"strict"}"#)
                .unwrap();
        assert_eq!(parsed.tail(), QuantileTail::Strict);
    }
}
