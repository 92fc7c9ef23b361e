//! Detector outcomes: event classification and outcome probability tables
//! (exact, linearized and delta-limit) for split and N-pixel detectors.
//!
//! Tables carry `∂P/∂d` next to each probability so Fisher information can be
//! read straight off them. Exact tables differentiate numerically with a
//! Richardson-extrapolated central difference; cell probabilities are
//! integrated to relative accuracy (the caller's absolute tolerance is
//! replaced by a 1e-300 floor) because far-off cells are tiny yet still enter
//! `(∂P)²/P`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BiphotonModel, PhotonPair};
use crate::numerics::{bvn_rect_prob, erf, erfc, normal_interval, QuadratureSpec, Rect};

/// Split-detector event: both photons left, one on each side, both right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitOutcome {
    MinusTwo,
    Zero,
    PlusTwo,
}

impl SplitOutcome {
    /// Net signal step contributed by the event.
    pub fn step(self) -> i64 {
        match self {
            SplitOutcome::MinusTwo => -2,
            SplitOutcome::Zero => 0,
            SplitOutcome::PlusTwo => 2,
        }
    }
}

/// Homogeneous, gapless detector of width `extent` centred on `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelDetector {
    n_pixels: usize,
    extent: f64,
}

impl PixelDetector {
    pub fn new(n_pixels: usize, extent: f64) -> Result<Self> {
        if n_pixels < 2 {
            return Err(Error::InvalidParameter(format!(
                "a pixel detector needs at least 2 pixels, got {n_pixels}"
            )));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "extent must be positive, got {extent}"
            )));
        }
        Ok(Self { n_pixels, extent })
    }

    /// Default geometry: `10σ` wide.
    pub fn with_default_extent(n_pixels: usize, sigma: f64) -> Result<Self> {
        Self::new(n_pixels, 10.0 * sigma)
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn pixel_width(&self) -> f64 {
        self.extent / self.n_pixels as f64
    }

    /// Left edge of pixel `i` (1-based); `edge(n_pixels + 1)` is the right boundary.
    pub fn edge(&self, i: usize) -> f64 {
        // Exact at both ends regardless of rounding in the pixel width.
        if i == self.n_pixels + 1 {
            return 0.5 * self.extent;
        }
        -0.5 * self.extent + (i - 1) as f64 * self.pixel_width()
    }

    /// 1-based pixel containing `x`, or `None` outside `[−extent/2, extent/2)`.
    pub fn pixel_of(&self, x: f64) -> Option<usize> {
        let half = 0.5 * self.extent;
        if !(x >= -half && x < half) {
            return None;
        }
        let mut k = ((x + half) / self.pixel_width()).floor() as usize + 1;
        k = k.clamp(1, self.n_pixels);
        // Floating-point division can land one pixel off near an edge.
        if x < self.edge(k) {
            k -= 1;
        } else if k < self.n_pixels && x >= self.edge(k + 1) {
            k += 1;
        }
        Some(k)
    }
}

/// Event-level detector reading for an N-pixel detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoincidenceBin {
    /// Unordered pixel pair, stored with `i ≤ j`.
    Pixels { i: usize, j: usize },
    /// At least one photon landed outside the detector.
    Miss,
}

/// Name of one row in an [`OutcomeDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeLabel {
    Split(SplitOutcome),
    Bin(CoincidenceBin),
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeLabel::Split(SplitOutcome::MinusTwo) => write!(f, "-2"),
            OutcomeLabel::Split(SplitOutcome::Zero) => write!(f, "0"),
            OutcomeLabel::Split(SplitOutcome::PlusTwo) => write!(f, "+2"),
            OutcomeLabel::Bin(CoincidenceBin::Pixels { i, j }) => write!(f, "{i}-{j}"),
            OutcomeLabel::Bin(CoincidenceBin::Miss) => write!(f, "miss"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: OutcomeLabel,
    pub probability: f64,
    /// `∂P/∂d`
    pub derivative: f64,
}

/// Complete, immutable table of outcome probabilities and their d-derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    outcomes: Vec<Outcome>,
}

impl OutcomeDistribution {
    pub const PROBABILITY_SUM_TOL: f64 = 1e-9;
    pub const DERIVATIVE_SUM_TOL: f64 = 1e-7;

    pub fn new(outcomes: Vec<Outcome>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Domain("empty outcome table".into()));
        }
        if let Some(o) = outcomes
            .iter()
            .find(|o| !(o.probability >= 0.0) || !o.derivative.is_finite())
        {
            return Err(Error::Domain(format!(
                "outcome {} has probability {} and derivative {}",
                o.label, o.probability, o.derivative
            )));
        }
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        if (total - 1.0).abs() > Self::PROBABILITY_SUM_TOL {
            return Err(Error::Domain(format!("probabilities sum to {total}")));
        }
        let slope: f64 = outcomes.iter().map(|o| o.derivative).sum();
        if slope.abs() > Self::DERIVATIVE_SUM_TOL {
            return Err(Error::Domain(format!("derivatives sum to {slope}")));
        }
        Ok(Self { outcomes })
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn get(&self, label: OutcomeLabel) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| o.label == label)
    }

    pub fn probability(&self, label: OutcomeLabel) -> f64 {
        self.get(label).map_or(0.0, |o| o.probability)
    }

    pub fn derivative(&self, label: OutcomeLabel) -> f64 {
        self.get(label).map_or(0.0, |o| o.derivative)
    }

    pub fn split(&self, outcome: SplitOutcome) -> f64 {
        self.probability(OutcomeLabel::Split(outcome))
    }
}

/// Split-detector reading. `x = 0` belongs to the right half.
pub fn classify_split(pair: &PhotonPair) -> SplitOutcome {
    match (pair.x1 >= 0.0, pair.x2 >= 0.0) {
        (true, true) => SplitOutcome::PlusTwo,
        (false, false) => SplitOutcome::MinusTwo,
        _ => SplitOutcome::Zero,
    }
}

pub fn classify_pixels(pair: &PhotonPair, det: &PixelDetector) -> CoincidenceBin {
    match (det.pixel_of(pair.x1), det.pixel_of(pair.x2)) {
        (Some(a), Some(b)) => CoincidenceBin::Pixels {
            i: a.min(b),
            j: a.max(b),
        },
        _ => CoincidenceBin::Miss,
    }
}

/// Finite-difference step used for `∂P/∂d`.
pub fn derivative_step(m: &BiphotonModel) -> f64 {
    (1e-6 * m.sigma()).max(1e-3 * m.d().abs())
}

/// Value at `d` and Richardson-extrapolated central difference of `f`.
fn value_and_slope<F>(m: &BiphotonModel, f: F) -> Result<(f64, f64)>
where
    F: Fn(&BiphotonModel) -> Result<f64>,
{
    let h = derivative_step(m);
    let d = m.d();
    let at = |x: f64| m.with_d(x).and_then(|mm| f(&mm));
    let value = f(m)?;
    let d1 = (at(d + h)? - at(d - h)?) / (2.0 * h);
    let d2 = (at(d + 2.0 * h)? - at(d - 2.0 * h)?) / (4.0 * h);
    Ok((value, (4.0 * d1 - d2) / 3.0))
}

/// Mean, common standard deviation and correlation of `(x1, x2)`.
fn position_moments(m: &BiphotonModel) -> (f64, f64, f64) {
    (m.d(), m.marginal_std(), m.correlation_coefficient())
}

/// `P[(x1, x2) ∈ rect]` under the model's bivariate normal.
pub fn rect_probability(m: &BiphotonModel, rect: &Rect, spec: &QuadratureSpec) -> Result<f64> {
    m.require_finite_epsilon("rect_probability")?;
    let (mu, s, rho) = position_moments(m);
    bvn_rect_prob(mu, mu, s, s, rho, rect, &spec.relative_only())
}

fn split_outcomes(minus: (f64, f64), zero: (f64, f64), plus: (f64, f64)) -> Vec<Outcome> {
    [
        (SplitOutcome::MinusTwo, minus),
        (SplitOutcome::Zero, zero),
        (SplitOutcome::PlusTwo, plus),
    ]
    .into_iter()
    .map(|(o, (p, dp))| Outcome {
        label: OutcomeLabel::Split(o),
        probability: p,
        derivative: dp,
    })
    .collect()
}

/// Split-detector probabilities by quadrature.
pub fn split_probabilities_exact(
    m: &BiphotonModel,
    spec: &QuadratureSpec,
) -> Result<OutcomeDistribution> {
    m.require_finite_epsilon("split_probabilities_exact")?;
    let right = Rect::new(0.0, f64::INFINITY, 0.0, f64::INFINITY)?;
    let left = Rect::new(f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, 0.0)?;
    let plus = value_and_slope(m, |mm| rect_probability(mm, &right, spec))?;
    let minus = value_and_slope(m, |mm| rect_probability(mm, &left, spec))?;
    let zero = (1.0 - plus.0 - minus.0, -plus.1 - minus.1);
    OutcomeDistribution::new(split_outcomes(minus, zero, plus))
}

/// `atan(ε/2σ − σ/2ε)`, the constant that sets the d = 0 split probabilities.
pub fn split_phase(m: &BiphotonModel) -> f64 {
    let (s, e) = (m.sigma(), m.epsilon());
    (e / (2.0 * s) - s / (2.0 * e)).atan()
}

/// Slope of `P(+2)` at `d = 0` for finite ε: `√(2/(π(σ²+ε²)))`.
pub fn split_slope(m: &BiphotonModel) -> f64 {
    (2.0 / (PI * m.width_sq())).sqrt()
}

/// Whether the small-displacement expansion applies (`|d| < ε`).
pub fn is_linear_regime(m: &BiphotonModel) -> bool {
    m.d().abs() < m.epsilon()
}

/// First-order expansion of the split probabilities in `d`.
pub fn split_probabilities_linearized(m: &BiphotonModel) -> Result<OutcomeDistribution> {
    m.require_finite_epsilon("split_probabilities_linearized")?;
    if !is_linear_regime(m) {
        log::warn!(
            "linearized split probabilities used outside |d| < epsilon (d = {}, epsilon = {})",
            m.d(),
            m.epsilon()
        );
    }
    let phase = split_phase(m);
    let beta = split_slope(m);
    let base = 0.25 + phase / (2.0 * PI);
    OutcomeDistribution::new(split_outcomes(
        (base - m.d() * beta, -beta),
        (0.5 - phase / PI, 0.0),
        (base + m.d() * beta, beta),
    ))
}

/// Exact split table in the delta-correlation limit (`ε = 0`).
///
/// Only the side the beam moved towards can collect both photons. At `d = 0`
/// the `d > 0` branch is used, so `P(+2)` carries the one-sided slope.
pub fn split_probabilities_delta(sigma: f64, d: f64) -> Result<OutcomeDistribution> {
    if !(sigma > 0.0 && sigma.is_finite()) || !d.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need sigma > 0 and finite d, got ({sigma}, {d})"
        )));
    }
    let arg = SQRT_2 * d.abs() / sigma;
    let both = erf(arg);
    let slope = 2.0 * SQRT_2 / (sigma * PI.sqrt()) * (-2.0 * d * d / (sigma * sigma)).exp();
    let zero = (erfc(arg), if d >= 0.0 { -slope } else { slope });
    let (minus, plus) = if d >= 0.0 {
        ((0.0, 0.0), (both, slope))
    } else {
        ((both, -slope), (0.0, 0.0))
    };
    OutcomeDistribution::new(split_outcomes(minus, zero, plus))
}

/// Exact split table for any model, switching to the closed form at `ε = 0`.
pub fn split_probabilities(
    m: &BiphotonModel,
    spec: &QuadratureSpec,
) -> Result<OutcomeDistribution> {
    if m.is_delta_limit() {
        split_probabilities_delta(m.sigma(), m.d())
    } else {
        split_probabilities_exact(m, spec)
    }
}

/// Probability that a photon pair misses the detector.
///
/// Summed from disjoint pieces (photon 1 outside; photon 1 inside and photon 2
/// outside) rather than `1 − P(inside)`, so it stays accurate when tiny.
fn miss_probability(m: &BiphotonModel, det: &PixelDetector, spec: &QuadratureSpec) -> Result<f64> {
    let half = 0.5 * det.extent();
    let s = m.marginal_std();
    let first_out = normal_interval(f64::NEG_INFINITY, (-half - m.d()) / s)
        + normal_interval((half - m.d()) / s, f64::INFINITY);
    let below = Rect::new(-half, half, f64::NEG_INFINITY, -half)?;
    let above = Rect::new(-half, half, half, f64::INFINITY)?;
    Ok(first_out + rect_probability(m, &below, spec)? + rect_probability(m, &above, spec)?)
}

/// All coincidence probabilities `P_ij` (`i ≤ j`) for an N-pixel detector, plus
/// the probability of missing the detector.
pub fn pixel_probabilities(
    m: &BiphotonModel,
    det: &PixelDetector,
    spec: &QuadratureSpec,
) -> Result<OutcomeDistribution> {
    m.require_finite_epsilon("pixel_probabilities")?;
    let n = det.n_pixels();
    let cells: Vec<(usize, usize)> = (1..=n).flat_map(|i| (i..=n).map(move |j| (i, j))).collect();

    let mut outcomes = cells
        .par_iter()
        .map(|&(i, j)| {
            let rect = Rect::new(det.edge(i), det.edge(i + 1), det.edge(j), det.edge(j + 1))?;
            // The density is symmetric under x1 <-> x2, so the mirrored cell has equal mass.
            let weight = if i == j { 1.0 } else { 2.0 };
            let (p, dp) = value_and_slope(m, |mm| rect_probability(mm, &rect, spec))?;
            Ok(Outcome {
                label: OutcomeLabel::Bin(CoincidenceBin::Pixels { i, j }),
                probability: weight * p,
                derivative: weight * dp,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (miss, dmiss) = value_and_slope(m, |mm| miss_probability(mm, det, spec))?;
    outcomes.push(Outcome {
        label: OutcomeLabel::Bin(CoincidenceBin::Miss),
        probability: miss,
        derivative: dmiss,
    });
    OutcomeDistribution::new(outcomes)
}

/// Success-probability expansion `P(+2) ≈ α + βd` ("success" = both photons on
/// the positive half).
///
/// For `ε = 0` the delta-limit slope applies: `α = 0`, `β = 2√2/(σ√π)`.
pub fn alpha_beta_linearization(m: &BiphotonModel) -> (f64, f64) {
    if m.is_delta_limit() {
        return (0.0, 2.0 * SQRT_2 / (m.sigma() * PI.sqrt()));
    }
    let alpha = 0.25 + m.correlation_coefficient().asin() / (2.0 * PI);
    (alpha, split_slope(m))
}
