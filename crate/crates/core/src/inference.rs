//! Fisher information (continuous, marginal, discrete, quantum), Cramér–Rao
//! and resolution quantities, and the displacement estimators with their
//! variances.

use std::cell::RefCell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::detection::{
    classify_split, split_slope, OutcomeDistribution, OutcomeLabel, SplitOutcome,
};
use crate::error::{Error, Result};
use crate::model::{BiphotonModel, PhotonPair};
use crate::numerics::{integrate_1d, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FisherSource {
    Analytic,
    Quadrature,
    Discrete,
    Quantum,
}

/// Outcomes whose probability vanishes while its slope does not.
///
/// Near such a point `I ≈ coefficient / P`, with `P` the vanishing probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub outcomes: Vec<OutcomeLabel>,
    /// Sum of `(∂P)²` over the vanishing outcomes.
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    /// Information for the stated number of events (length⁻²). `+∞` when divergent.
    pub value: f64,
    pub source: FisherSource,
    pub model: Option<BiphotonModel>,
    pub divergence: Option<Divergence>,
}

impl FisherReport {
    fn finite(value: f64, source: FisherSource, model: Option<BiphotonModel>) -> Self {
        Self {
            value,
            source,
            model,
            divergence: None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        self.divergence.is_some()
    }
}

/// Per-pair information with perfect position resolution: `4/ε²`.
pub fn fisher_continuous(m: &BiphotonModel) -> Result<FisherReport> {
    m.require_finite_epsilon("fisher_continuous")?;
    let e = m.epsilon();
    Ok(FisherReport::finite(
        4.0 / (e * e),
        FisherSource::Analytic,
        Some(*m),
    ))
}

/// Information in one photon's marginal: `4/(ε² + σ²)`.
pub fn fisher_marginal(m: &BiphotonModel) -> FisherReport {
    FisherReport::finite(4.0 / m.width_sq(), FisherSource::Analytic, Some(*m))
}

/// Split-detection information in the small-displacement limit:
/// `16 / ((ε²+σ²)(π + 2 asin ξ))`.
pub fn fisher_split(m: &BiphotonModel) -> Result<FisherReport> {
    m.require_finite_epsilon("fisher_split")?;
    let xi = m.correlation_coefficient();
    let value = 16.0 / (m.width_sq() * (PI + 2.0 * xi.asin()));
    Ok(FisherReport::finite(
        value,
        FisherSource::Analytic,
        Some(*m),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Continuous,
    Split,
}

/// Gain over uncorrelated photons in the same mode.
pub fn fisher_ratio(m: &BiphotonModel, scheme: Scheme) -> Result<f64> {
    m.require_finite_epsilon("fisher_ratio")?;
    Ok(match scheme {
        Scheme::Continuous => (m.sigma() / m.epsilon()).powi(2),
        Scheme::Split => PI / (PI + 2.0 * m.correlation_coefficient().asin()),
    })
}

/// `n_events · Σ (∂P)²/P` over a complete outcome table.
///
/// Outcomes with `P = 0` and `∂P = 0` contribute nothing; `P = 0` with a
/// nonzero slope makes the result divergent (value `+∞`, with the leading
/// coefficient recorded).
pub fn fisher_discrete(dist: &OutcomeDistribution, n_events: f64) -> Result<FisherReport> {
    if !(n_events >= 0.0 && n_events.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "event count must be non-negative, got {n_events}"
        )));
    }
    let mut total = 0.0;
    let mut vanishing = Vec::new();
    let mut coefficient = 0.0;
    for o in dist.outcomes() {
        if o.probability > 0.0 {
            total += o.derivative * o.derivative / o.probability;
        } else if o.derivative != 0.0 {
            vanishing.push(o.label);
            coefficient += o.derivative * o.derivative;
        }
    }
    if vanishing.is_empty() {
        Ok(FisherReport::finite(
            n_events * total,
            FisherSource::Discrete,
            None,
        ))
    } else {
        Ok(FisherReport {
            value: f64::INFINITY,
            source: FisherSource::Discrete,
            model: None,
            divergence: Some(Divergence {
                outcomes: vanishing,
                coefficient: n_events * coefficient,
            }),
        })
    }
}

/// Information of the two-outcome model `P(success) = α + βd`:
/// `β²ν / ((α+βd)(1−α−βd))`.
pub fn fisher_alpha_beta(alpha: f64, beta: f64, d: f64, nu: f64) -> Result<FisherReport> {
    let p = alpha + beta * d;
    if !(0.0..1.0).contains(&p) || !beta.is_finite() || !(nu >= 0.0) {
        return Err(Error::Domain(format!(
            "alpha + beta*d = {p} must lie in [0, 1) (alpha {alpha}, beta {beta}, d {d}, nu {nu})"
        )));
    }
    if p == 0.0 {
        return Ok(FisherReport {
            value: f64::INFINITY,
            source: FisherSource::Analytic,
            model: None,
            divergence: Some(Divergence {
                outcomes: vec![OutcomeLabel::Split(SplitOutcome::PlusTwo)],
                coefficient: nu * beta * beta,
            }),
        });
    }
    Ok(FisherReport::finite(
        beta * beta * nu / (p * (1.0 - p)),
        FisherSource::Analytic,
        None,
    ))
}

/// Pieces of the quantum Fisher information of the real amplitude `√p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumFisherTerms {
    /// `⟨ψ|ψ⟩`
    pub norm: f64,
    /// `⟨∂ψ|ψ⟩`
    pub overlap: f64,
    /// `⟨∂ψ|∂ψ⟩`
    pub derivative_norm: f64,
}

impl QuantumFisherTerms {
    pub fn value(&self) -> f64 {
        4.0 * (self.derivative_norm - self.overlap * self.overlap)
    }
}

/// Evaluates the three inner products by nested quadrature over the sum and
/// difference coordinates, each rescaled by its own width so the integrand
/// sits at the origin of the unit Gaussian. `∂ψ = ψ · (x1 + x2 − 2d)/ε²`.
pub fn qfi_terms(m: &BiphotonModel, spec: &QuadratureSpec) -> Result<QuantumFisherTerms> {
    m.require_finite_epsilon("qfi_numeric")?;
    let (sigma, eps, d) = (m.sigma(), m.epsilon(), m.d());
    let amplitude = |x1: f64, x2: f64| m.joint_pdf(x1, x2).map(f64::sqrt).unwrap_or(0.0);

    // x1 = (u+v)/2, x2 = (u−v)/2 with u = 2d + ε s, v = σ t; dx1 dx2 = εσ/2 ds dt.
    let jac = 0.5 * eps * sigma;
    let inner = |weight: &dyn Fn(f64, f64) -> f64, spec: &QuadratureSpec| -> Result<f64> {
        let failure = RefCell::new(None);
        let outer = integrate_1d(
            |s| {
                let r = integrate_1d(
                    |t| {
                        let u = 2.0 * d + eps * s;
                        let v = sigma * t;
                        let (x1, x2) = (0.5 * (u + v), 0.5 * (u - v));
                        let psi = amplitude(x1, x2);
                        let dpsi = psi * (x1 + x2 - 2.0 * d) / (eps * eps);
                        weight(psi, dpsi)
                    },
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    spec,
                );
                r.unwrap_or_else(|e| {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                })
            },
            f64::NEG_INFINITY,
            f64::INFINITY,
            spec,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(jac * outer?)
    };

    // The overlap vanishes, so measure its error against the 1/ε scale.
    let overlap_spec = QuadratureSpec {
        abs_tol: spec.abs_tol.max(spec.rel_tol / eps),
        ..*spec
    };
    Ok(QuantumFisherTerms {
        norm: inner(&|psi, _| psi * psi, spec)?,
        overlap: inner(&|psi, dpsi| psi * dpsi, &overlap_spec)?,
        derivative_norm: inner(&|_, dpsi| dpsi * dpsi, spec)?,
    })
}

pub fn qfi_numeric(m: &BiphotonModel, spec: &QuadratureSpec) -> Result<FisherReport> {
    let terms = qfi_terms(m, spec)?;
    Ok(FisherReport::finite(
        terms.value(),
        FisherSource::Quantum,
        Some(*m),
    ))
}

/// Minimum resolvable displacement from the Cramér–Rao bound: `1/√(νI)`.
pub fn crb_dmin(fisher_per_event: f64, nu: f64) -> Result<f64> {
    if !(fisher_per_event > 0.0) || !(nu >= 1.0) {
        return Err(Error::Domain(format!(
            "need positive Fisher information and nu >= 1, got ({fisher_per_event}, {nu})"
        )));
    }
    Ok(1.0 / (nu * fisher_per_event).sqrt())
}

/// Signal-to-noise ratio `d √I` for total information `I`.
pub fn snr(d: f64, fisher_total: f64) -> Result<f64> {
    if !(fisher_total >= 0.0) {
        return Err(Error::Domain(format!(
            "Fisher information must be non-negative, got {fisher_total}"
        )));
    }
    Ok(d * fisher_total.sqrt())
}

/// Displacement at which the two-outcome model reaches unit SNR after `nu`
/// events.
pub fn dmin_alpha_beta(alpha: f64, beta: f64, nu: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) || !(beta > 0.0) || !(nu >= 1.0) {
        return Err(Error::Domain(format!(
            "need 0 <= alpha < 1, beta > 0, nu >= 1; got ({alpha}, {beta}, {nu})"
        )));
    }
    let a = 1.0 - 2.0 * alpha;
    Ok((a + (a * a + 4.0 * alpha * (1.0 - alpha) * nu).sqrt()) / (2.0 * beta * nu))
}

/// Event count below which split detection keeps Heisenberg scaling, `πσ/(4ε)`.
pub fn heisenberg_event_bound(m: &BiphotonModel) -> f64 {
    PI * m.sigma() / (4.0 * m.epsilon())
}

/// Point estimate with its reported variance and the Cramér–Rao bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimate: f64,
    /// Variance of `estimate` (per-event variance divided by `n_events`).
    pub variance: f64,
    /// `1/(n_events · I)`
    pub crb: f64,
    pub n_events: u64,
}

impl EstimateResult {
    pub fn is_efficient(&self, tol: f64) -> bool {
        self.variance <= self.crb * (1.0 + tol)
    }
}

/// Unbiased sample variance of a set of equally weighted values, given their
/// sum, sum of squares and count. Zero for a single value.
fn sample_variance(sum: f64, sum_sq: f64, n: f64) -> f64 {
    if n < 2.0 {
        return 0.0;
    }
    let mean = sum / n;
    ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
}

/// Averages the per-pair centroid `(x1 + x2)/2`.
pub fn estimate_mean(pairs: &[PhotonPair], m: &BiphotonModel) -> Result<EstimateResult> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(PhotonPair::mean_position).sum::<f64>() / n;
    // Centred second pass.
    let ss: f64 = pairs
        .iter()
        .map(|p| (p.mean_position() - mean).powi(2))
        .sum();
    let per_event = if pairs.len() > 1 { ss / (n - 1.0) } else { 0.0 };
    Ok(EstimateResult {
        estimate: mean,
        variance: per_event / n,
        crb: m.epsilon() * m.epsilon() / (4.0 * n),
        n_events: pairs.len() as u64,
    })
}

/// Event counts of a split detector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub minus2: u64,
    pub zero: u64,
    pub plus2: u64,
}

impl SplitCounts {
    pub fn total(&self) -> u64 {
        self.minus2 + self.zero + self.plus2
    }

    pub fn record(&mut self, outcome: SplitOutcome) {
        match outcome {
            SplitOutcome::MinusTwo => self.minus2 += 1,
            SplitOutcome::Zero => self.zero += 1,
            SplitOutcome::PlusTwo => self.plus2 += 1,
        }
    }

    pub fn from_pairs(pairs: &[PhotonPair]) -> Self {
        let mut c = Self::default();
        for p in pairs {
            c.record(classify_split(p));
        }
        c
    }
}

/// `√(π(σ²+ε²)/8)`, the scale turning count imbalance into displacement.
pub fn split_scale(m: &BiphotonModel) -> f64 {
    (PI * m.width_sq() / 8.0).sqrt()
}

/// `scale · (n₊ − n₋)/n` and the unbiased variance of that mean for a
/// per-event statistic taking values `±scale` and `0`.
fn scaled_imbalance(scale: f64, plus: u64, minus: u64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let diff = plus as f64 - minus as f64;
    let sum_sq = (plus + minus) as f64;
    let per_event = scale * scale * sample_variance(diff, sum_sq, nf);
    (scale * diff / nf, per_event / nf)
}

/// Scaled split-detection estimator `√(π(σ²+ε²)/8)·(n₊₂ − n₋₂)/ν`.
pub fn estimate_split(counts: &SplitCounts, m: &BiphotonModel) -> Result<EstimateResult> {
    m.require_finite_epsilon("estimate_split")?;
    let n = counts.total();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let (estimate, variance) = scaled_imbalance(split_scale(m), counts.plus2, counts.minus2, n);
    Ok(EstimateResult {
        estimate,
        variance,
        crb: 1.0 / (n as f64 * fisher_split(m)?.value),
        n_events: n,
    })
}

/// Split-marginal MLE for one photon: `√(π(σ²+ε²)/8)·(N₊ − N₋)/(N₊ + N₋)`.
pub fn estimate_marginal_mle(
    n_plus: u64,
    n_minus: u64,
    m: &BiphotonModel,
) -> Result<EstimateResult> {
    let n = n_plus + n_minus;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let (estimate, variance) = scaled_imbalance(split_scale(m), n_plus, n_minus, n);
    Ok(EstimateResult {
        estimate,
        variance,
        crb: PI * m.width_sq() / (8.0 * n as f64),
        n_events: n,
    })
}

/// Joint split readings of both photons: `pm` means photon 1 right, photon 2 left.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl QuadrantCounts {
    pub fn total(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }

    pub fn record(&mut self, pair: &PhotonPair) {
        match (pair.x1 >= 0.0, pair.x2 >= 0.0) {
            (true, true) => self.pp += 1,
            (true, false) => self.pm += 1,
            (false, true) => self.mp += 1,
            (false, false) => self.mm += 1,
        }
    }

    pub fn from_pairs(pairs: &[PhotonPair]) -> Self {
        let mut c = Self::default();
        for p in pairs {
            c.record(p);
        }
        c
    }

    /// `(N₊, N₋)` for photon 1.
    pub fn photon1(&self) -> (u64, u64) {
        (self.pp + self.pm, self.mp + self.mm)
    }

    /// `(N₊, N₋)` for photon 2.
    pub fn photon2(&self) -> (u64, u64) {
        (self.pp + self.mp, self.pm + self.mm)
    }
}

/// Marginal estimates of both photons.
pub fn marginal_estimates(
    counts: &QuadrantCounts,
    m: &BiphotonModel,
) -> Result<(EstimateResult, EstimateResult)> {
    let (p1, m1) = counts.photon1();
    let (p2, m2) = counts.photon2();
    Ok((
        estimate_marginal_mle(p1, m1, m)?,
        estimate_marginal_mle(p2, m2, m)?,
    ))
}

/// Predicted variance of `w1·d̂₁ + w2·d̂₂` from `n_events` pairs.
pub fn averaged_marginal_variance(m: &BiphotonModel, n_events: f64, w1: f64, w2: f64) -> f64 {
    let xi = m.correlation_coefficient();
    PI * m.width_sq() / (8.0 * n_events) * (1.0 - 2.0 * w1 * w2 * (1.0 - 2.0 / PI * xi.asin()))
}

/// Weighted average of the two photons' marginal estimates.
///
/// `variance` is the predicted variance for the given weights; `crb` is the
/// split-detection bound for the same number of pairs. Weights may be any
/// reals summing to one.
pub fn averaged_marginal_estimator(
    counts: &QuadrantCounts,
    m: &BiphotonModel,
    w1: f64,
    w2: f64,
) -> Result<EstimateResult> {
    if !((w1 + w2 - 1.0).abs() <= 1e-12) {
        return Err(Error::Weight(w1 + w2));
    }
    let (d1, d2) = marginal_estimates(counts, m)?;
    let n = counts.total() as f64;
    let xi = m.correlation_coefficient();
    Ok(EstimateResult {
        estimate: w1 * d1.estimate + w2 * d2.estimate,
        variance: averaged_marginal_variance(m, n, w1, w2),
        crb: PI * m.width_sq() / (8.0 * n) * (0.5 + xi.asin() / PI),
        n_events: counts.total(),
    })
}

/// `Cov(d̂₁, d̂₂) = (σ²+ε²) asin ξ / (4N)`.
pub fn covariance_marginal_estimators(m: &BiphotonModel, n_events: f64) -> Result<f64> {
    if !(n_events >= 1.0) {
        return Err(Error::Domain(format!(
            "need at least one event, got {n_events}"
        )));
    }
    Ok(m.width_sq() * m.correlation_coefficient().asin() / (4.0 * n_events))
}

/// Slope-matched success probability for the split detector; re-exported for
/// callers building the two-outcome model by hand.
pub fn split_success_slope(m: &BiphotonModel) -> f64 {
    split_slope(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{split_probabilities_delta, split_probabilities_linearized};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn model(s: f64, e: f64, d: f64) -> BiphotonModel {
        BiphotonModel::new(s, e, d).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(fisher_continuous(&model(1.0, 1.0, 0.0)).unwrap().value, 4.0);
        assert_eq!(
            fisher_continuous(&model(3.0, 0.5, 0.2)).unwrap().value,
            16.0
        );
        assert_eq!(fisher_marginal(&model(1.0, 1.0, 0.0)).value, 2.0);
        assert_eq!(fisher_marginal(&model(1.0, 0.0, 0.0)).value, 4.0);
        assert_abs_diff_eq!(
            fisher_split(&model(1.0, 1.0, 0.0)).unwrap().value,
            8.0 / PI,
            epsilon = 1e-15
        );
        let v = fisher_split(&model(1.0, 0.5, 0.0)).unwrap().value;
        assert_abs_diff_eq!(
            v,
            16.0 / (1.25 * (PI + 2.0 * (-0.6f64).asin())),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(v, 6.902, epsilon = 1e-3);
        assert!(matches!(
            fisher_continuous(&model(1.0, 0.0, 0.0)),
            Err(Error::DeltaLimit(_))
        ));
    }

    #[test]
    fn split_information_halves_for_positive_correlation() {
        // σ → 0 at fixed ε drives ξ → 1.
        let m = model(1e-6, 1.0, 0.0);
        let uncorrelated = 16.0 / (PI * m.width_sq());
        assert_relative_eq!(
            fisher_split(&m).unwrap().value / uncorrelated,
            0.5,
            max_relative = 1e-5
        );
    }

    #[test]
    fn ratios() {
        let m = model(1.0, 1.0, 0.0);
        assert_eq!(fisher_ratio(&m, Scheme::Continuous).unwrap(), 1.0);
        assert_eq!(fisher_ratio(&m, Scheme::Split).unwrap(), 1.0);
        assert_abs_diff_eq!(
            fisher_ratio(&model(1.0, 0.1, 0.0), Scheme::Continuous).unwrap(),
            100.0,
            epsilon = 1e-10
        );
        let r = fisher_ratio(&model(1.0, 0.5, 0.0), Scheme::Split).unwrap();
        assert_abs_diff_eq!(r, PI / (PI + 2.0 * (-0.6f64).asin()), epsilon = 1e-15);
        assert_abs_diff_eq!(r, 1.694, epsilon = 1e-3);
    }

    #[test]
    fn classical_equivalent_is_twice_the_gain() {
        let m = model(1.0, 0.3, 0.0);
        let nu = 40.0;
        assert_abs_diff_eq!(
            m.classical_resource_equivalent(nu).unwrap() / nu,
            2.0 * fisher_ratio(&m, Scheme::Continuous).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn discrete_information_of_linearized_uncorrelated_table() {
        let t = split_probabilities_linearized(&model(1.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(
            fisher_discrete(&t, 1.0).unwrap().value,
            8.0 / PI,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            fisher_discrete(&t, 10.0).unwrap().value,
            80.0 / PI,
            epsilon = 1e-13
        );
    }

    #[test]
    fn delta_table_information_follows_inverse_d() {
        let t = split_probabilities_delta(1.0, 0.01).unwrap();
        let v = fisher_discrete(&t, 1.0).unwrap().value;
        let asymptote = (8.0 / PI).sqrt() / 0.01;
        assert!((v / asymptote - 1.0).abs() < 0.02, "{v} vs {asymptote}");
    }

    #[test]
    fn delta_table_at_zero_is_divergent() {
        let t = split_probabilities_delta(1.0, 0.0).unwrap();
        let r = fisher_discrete(&t, 3.0).unwrap();
        assert!(r.value.is_infinite());
        let div = r.divergence.unwrap();
        assert_eq!(
            div.outcomes,
            vec![OutcomeLabel::Split(SplitOutcome::PlusTwo)]
        );
        assert_abs_diff_eq!(div.coefficient, 3.0 * 8.0 / PI, epsilon = 1e-12);
    }

    #[test]
    fn alpha_beta_information() {
        let v = fisher_alpha_beta(0.25, 1.0 / PI.sqrt(), 0.0, 1.0)
            .unwrap()
            .value;
        assert_abs_diff_eq!(v, 16.0 / (3.0 * PI), epsilon = 1e-14);
        // Independent recomputation for a near-Heisenberg operating point.
        let (a, b, d, nu) = (0.003183, 0.7979, 0.001, 1000.0);
        let p: f64 = a + b * d;
        let expect = b * b * nu / (p * (1.0 - p));
        assert_relative_eq!(
            fisher_alpha_beta(a, b, d, nu).unwrap().value,
            expect,
            max_relative = 1e-14
        );
        // α = 0: information grows as 1/d.
        let i1 = fisher_alpha_beta(0.0, 1.0, 1e-3, 1.0).unwrap().value;
        let i2 = fisher_alpha_beta(0.0, 1.0, 1e-4, 1.0).unwrap().value;
        assert_relative_eq!(i2 / i1, 10.0, max_relative = 1e-3);
        assert!(fisher_alpha_beta(0.0, 1.0, 0.0, 1.0)
            .unwrap()
            .is_divergent());
        assert!(fisher_alpha_beta(0.9, 1.0, 0.2, 1.0).is_err());
        assert!(fisher_alpha_beta(0.0, 1.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn quantum_information_equals_classical() {
        let spec = QuadratureSpec::default();
        for &(e, d) in &[(0.5, 0.0), (0.25, 0.2)] {
            let m = model(1.0, e, d);
            let terms = qfi_terms(&m, &spec).unwrap();
            assert_abs_diff_eq!(terms.norm, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(terms.overlap, 0.0, epsilon = 1e-8);
            assert_relative_eq!(terms.value(), 4.0 / (e * e), max_relative = 1e-4);
        }
    }

    #[test]
    fn qfi_reports_inner_nonconvergence() {
        let spec = QuadratureSpec::new(1e-15, 0.0, 1).unwrap();
        assert!(matches!(
            qfi_numeric(&model(1.0, 0.5, 0.0), &spec),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn continuous_information_by_quadrature() {
        // 2D integral of p (∂ ln p)², with ∂ ln p = 2(x1+x2−2d)/ε².
        let m = model(1.0, 0.5, 0.1);
        let spec = QuadratureSpec::default();
        let lim = 9.0;
        let score = |x1: f64, x2: f64| 2.0 * (x1 + x2 - 2.0 * m.d()) / (m.epsilon() * m.epsilon());
        let v = integrate_1d(
            |x1| {
                // Integrand in x2 is concentrated near 2d − x1 with width ε/√2-ish.
                let c = 2.0 * m.d() - x1;
                integrate_1d(
                    |x2| m.joint_pdf(x1, x2).unwrap() * score(x1, x2).powi(2),
                    c - 6.0,
                    c + 6.0,
                    &spec,
                )
                .unwrap()
            },
            -lim,
            lim,
            &spec,
        )
        .unwrap();
        assert_relative_eq!(v, fisher_continuous(&m).unwrap().value, max_relative = 1e-6);
    }

    #[test]
    fn crb_and_snr() {
        assert_abs_diff_eq!(crb_dmin(4.0 / 0.04, 100.0).unwrap(), 0.01, epsilon = 1e-15);
        let a = crb_dmin(3.0, 25.0).unwrap();
        assert_abs_diff_eq!(crb_dmin(3.0, 100.0).unwrap(), a / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            crb_dmin(8.0 / PI, 1.0).unwrap(),
            (PI / 8.0).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(crb_dmin(8.0 / PI, 1.0).unwrap(), 0.6267, epsilon = 1e-4);
        assert!(crb_dmin(0.0, 10.0).is_err());
        assert!(crb_dmin(1.0, 0.0).is_err());

        assert_eq!(snr(0.0, 5.0).unwrap(), 0.0);
        // SQL: unit SNR at 1/√(ν I₁).
        let (i1, nu) = (2.5f64, 400.0f64);
        assert_abs_diff_eq!(
            snr(1.0 / (nu * i1).sqrt(), nu * i1).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        // Delta limit: I = √(8/π)ν/d, unit SNR at d = √(π/8)/ν.
        let nu = 50.0;
        let d = (PI / 8.0).sqrt() / nu;
        assert_abs_diff_eq!(
            snr(d, (8.0 / PI).sqrt() * nu / d).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert!(snr(1.0, -1.0).is_err());
    }

    #[test]
    fn dmin_alpha_beta_limits() {
        assert_abs_diff_eq!(
            dmin_alpha_beta(0.0, 1.0, 100.0).unwrap(),
            0.01,
            epsilon = 1e-15
        );
        let (a, b, nu) = (0.25, 1.0 / PI.sqrt(), 1e4f64);
        let direct = (0.5 + (0.25 + 4.0 * 0.1875 * nu).sqrt()) / (2.0 * b * nu);
        let v = dmin_alpha_beta(a, b, nu).unwrap();
        assert_relative_eq!(v, direct, max_relative = 1e-14);
        assert!((v - 7.7e-3).abs() < 1e-4, "{v}");
        // Unit SNR up to the O(1/ν) term dropped by the closed form.
        let i = fisher_alpha_beta(a, b, v, nu).unwrap().value;
        assert_abs_diff_eq!(snr(v, i).unwrap(), 1.0, epsilon = 1.0 / nu);
        assert!(dmin_alpha_beta(1.0, 1.0, 10.0).is_err());
        assert!(dmin_alpha_beta(0.1, 0.0, 10.0).is_err());

        let m = model(1.0, 0.01, 0.0);
        assert_abs_diff_eq!(heisenberg_event_bound(&m), 78.539_816, epsilon = 1e-5);
    }

    #[test]
    fn mean_estimator() {
        let m = model(1.0, 0.2, 0.0);
        let pairs: Vec<_> = (0..10)
            .map(|k| PhotonPair::new(k as f64, -(k as f64)))
            .collect();
        let r = estimate_mean(&pairs, &m).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.variance, 0.0);
        assert_abs_diff_eq!(r.crb, 0.04 / 40.0, epsilon = 1e-18);
        assert!(r.is_efficient(0.0));
        assert_eq!(estimate_mean(&[], &m), Err(Error::EmptyInput));
    }

    #[test]
    fn split_estimator_examples() {
        let m = model(1.0, 1.0, 0.0);
        let c = SplitCounts {
            minus2: 200,
            zero: 500,
            plus2: 300,
        };
        let r = estimate_split(&c, &m).unwrap();
        assert_abs_diff_eq!(r.estimate, (PI / 4.0).sqrt() * 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(r.estimate, 0.08862, epsilon = 1e-5);
        // Per-event values ±k, 0: unbiased variance by hand.
        let k2 = PI / 4.0;
        let mean = 0.1;
        let per_event = k2 * (500.0 / 1000.0 - mean * mean) * 1000.0 / 999.0;
        assert_relative_eq!(r.variance, per_event / 1000.0, max_relative = 1e-12);
        assert_abs_diff_eq!(r.crb, PI / 8.0 / 1000.0, epsilon = 1e-15);

        let sym = SplitCounts {
            minus2: 7,
            zero: 3,
            plus2: 7,
        };
        assert_eq!(estimate_split(&sym, &m).unwrap().estimate, 0.0);
        assert_eq!(
            estimate_split(&SplitCounts::default(), &m),
            Err(Error::EmptyInput)
        );
        assert!(matches!(
            estimate_split(&c, &model(1.0, 0.0, 0.0)),
            Err(Error::DeltaLimit(_))
        ));
    }

    #[test]
    fn marginal_estimator_examples() {
        let m = model(1.0, 1.0, 0.0);
        let r = estimate_marginal_mle(550, 450, &m).unwrap();
        assert_abs_diff_eq!(r.estimate, (PI / 4.0).sqrt() * 0.1, epsilon = 1e-15);
        assert_eq!(estimate_marginal_mle(12, 12, &m).unwrap().estimate, 0.0);
        assert_eq!(estimate_marginal_mle(0, 0, &m), Err(Error::EmptyInput));
        assert_abs_diff_eq!(r.crb, PI * 2.0 / 8000.0, epsilon = 1e-15);
    }

    #[test]
    fn averaged_estimator_reduces_and_predicts() {
        let m = model(1.0, 0.5, 0.0);
        let c = QuadrantCounts {
            pp: 120,
            pm: 380,
            mp: 350,
            mm: 150,
        };
        let only1 = averaged_marginal_estimator(&c, &m, 1.0, 0.0).unwrap();
        let (p1, m1) = c.photon1();
        assert_eq!(
            only1.estimate,
            estimate_marginal_mle(p1, m1, &m).unwrap().estimate
        );
        assert_abs_diff_eq!(only1.variance, PI * 1.25 / 8000.0, epsilon = 1e-15);

        let half = averaged_marginal_estimator(&c, &m, 0.5, 0.5).unwrap();
        let xi = m.correlation_coefficient();
        assert_abs_diff_eq!(
            half.variance,
            PI * 1.25 / 8000.0 * (0.5 + xi.asin() / PI),
            epsilon = 1e-15
        );
        // The minimum coincides with the split-detection bound.
        assert_relative_eq!(
            half.crb,
            1.0 / (1000.0 * fisher_split(&m).unwrap().value),
            max_relative = 1e-13
        );

        assert!(matches!(
            averaged_marginal_estimator(&c, &m, 0.6, 0.6),
            Err(Error::Weight(_))
        ));
        assert!(averaged_marginal_estimator(&c, &m, 1.5, -0.5).is_ok());

        let perfect = model(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(
            averaged_marginal_variance(&perfect, 100.0, 0.5, 0.5),
            0.0,
            epsilon = 1e-18
        );
    }

    #[test]
    fn averaged_variance_is_minimal_at_equal_weights() {
        for &e in &[0.2, 0.5, 1.0, 2.0] {
            let m = model(1.0, e, 0.0);
            let best = averaged_marginal_variance(&m, 100.0, 0.5, 0.5);
            for k in -10..=20 {
                let w = k as f64 / 10.0;
                assert!(averaged_marginal_variance(&m, 100.0, w, 1.0 - w) >= best - 1e-18);
            }
        }
        // ξ = 0: minimum is the uncorrelated split bound π σ²/(8N).
        let m = model(1.3, 1.3, 0.0);
        let v = averaged_marginal_variance(&m, 50.0, 0.5, 0.5);
        assert_relative_eq!(v, PI * 1.69 / (8.0 * 50.0), max_relative = 1e-14);
        assert_relative_eq!(v, 1.0 / (50.0 * 8.0 / (PI * 1.69)), max_relative = 1e-14);
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(
            covariance_marginal_estimators(&model(1.0, 1.0, 0.0), 10.0).unwrap(),
            0.0
        );
        let c = covariance_marginal_estimators(&model(1.0, 0.5, 0.0), 1000.0).unwrap();
        assert_abs_diff_eq!(c, 1.25 * (-0.6f64).asin() / 4000.0, epsilon = 1e-18);
        assert_abs_diff_eq!(c, -2.011e-4, epsilon = 1e-7);
        assert!(covariance_marginal_estimators(&model(1.0, 0.5, 0.0), 0.0).is_err());
    }

    #[test]
    fn quadrant_marginals() {
        let mut c = QuadrantCounts::default();
        for p in [
            (1.0, 1.0),
            (1.0, -1.0),
            (-1.0, 1.0),
            (-1.0, -1.0),
            (0.0, -0.5),
        ] {
            c.record(&PhotonPair::new(p.0, p.1));
        }
        assert_eq!(
            c,
            QuadrantCounts {
                pp: 1,
                pm: 2,
                mp: 1,
                mm: 1
            }
        );
        assert_eq!(c.photon1(), (3, 2));
        assert_eq!(c.photon2(), (2, 3));
    }
}
