//! Seeded studies: random walks, pixel sweeps, event-count crossover, scaling
//! of the resolution with event number, marginal averaging, QFI checks.
//!
//! Monte Carlo work is split into fixed blocks, each with its own
//! [`RandomStream::substream`], and reduced in block order, so results do not
//! depend on the rayon pool size.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{
    alpha_beta_linearization, classify_pixels, classify_split, pixel_probabilities,
    split_probabilities, OutcomeDistribution, OutcomeLabel, PixelDetector, SplitOutcome,
};
use crate::error::{Error, Result};
use crate::inference::{
    averaged_marginal_variance, covariance_marginal_estimators, dmin_alpha_beta, estimate_mean,
    estimate_split, fisher_continuous, fisher_discrete, fisher_split, marginal_estimates,
    qfi_numeric, EstimateResult, QuadrantCounts, SplitCounts,
};
use crate::model::{BiphotonModel, PhotonPair, RandomStream};
use crate::numerics::QuadratureSpec;

const EXP_WALK: u64 = 1;
const EXP_SCALING: u64 = 2;
const EXP_APPENDIX_A: u64 = 3;
const EXP_EFFICIENCY: u64 = 4;
const EXP_FREQUENCY: u64 = 5;
const EXP_SAMPLE: u64 = 6;

/// Events per random-number block.
const BLOCK: usize = 1 << 16;

/// Correlation ratios ε/σ of the event-count crossover family. Both 0.05 and
/// 0.01 are included.
pub const CROSSOVER_EPSILON_RATIOS: [f64; 6] = [1.0, 0.5, 0.1, 0.05, 0.01, 0.0];

/// Default displacement of the random-walk study, in units of σ.
pub const RANDOM_WALK_DEFAULT_D: f64 = 0.1;

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub sigma: f64,
    pub epsilon: f64,
    pub d: f64,
    pub pixels: Option<usize>,
    pub nu: Option<f64>,
    pub seed: Option<u64>,
    pub statistic: String,
    pub value: f64,
    /// Zero for deterministic rows.
    pub std_error: f64,
}

impl ExperimentRecord {
    pub fn new(
        experiment: &str,
        m: &BiphotonModel,
        statistic: impl Into<String>,
        value: f64,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            sigma: m.sigma(),
            epsilon: m.epsilon(),
            d: m.d(),
            pixels: None,
            nu: None,
            seed: None,
            statistic: statistic.into(),
            value,
            std_error: 0.0,
        }
    }

    pub fn pixels(mut self, n: usize) -> Self {
        self.pixels = Some(n);
        self
    }

    pub fn nu(mut self, nu: f64) -> Self {
        self.nu = Some(nu);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn std_error(mut self, se: f64) -> Self {
        self.std_error = se;
        self
    }
}

/// Draws `n` pairs from one substream.
pub fn sample_pairs(m: &BiphotonModel, n: usize, seed: u64) -> Vec<PhotonPair> {
    let mut rng = RandomStream::substream(seed, EXP_SAMPLE, 0);
    (0..n).map(|_| m.sample_pair(&mut rng)).collect()
}

/// Calls `f` on every event of `n` simulated pairs, one block per substream,
/// and returns the per-block results in block order.
fn per_block<T, F>(m: &BiphotonModel, n: usize, seed: u64, experiment: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut dyn Iterator<Item = PhotonPair>) -> T + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK.min(n - b * BLOCK);
            let mut rng = RandomStream::substream(seed, experiment, b as u64);
            let mut it = (0..len).map(|_| m.sample_pair(&mut rng));
            f(&mut it)
        })
        .collect()
}

/// Per-event split steps and the running net signal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomWalkTrace {
    pub steps: Vec<i64>,
    pub cumulative: Vec<i64>,
}

impl RandomWalkTrace {
    pub fn final_signal(&self) -> i64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn counts(&self) -> SplitCounts {
        let mut c = SplitCounts::default();
        for &s in &self.steps {
            c.record(match s {
                -2 => SplitOutcome::MinusTwo,
                0 => SplitOutcome::Zero,
                _ => SplitOutcome::PlusTwo,
            });
        }
        c
    }

    /// `|step| ∈ {0, 2}` and the running sum matches the steps.
    pub fn is_consistent(&self) -> bool {
        self.steps.len() == self.cumulative.len()
            && self.steps.iter().all(|s| matches!(s, -2 | 0 | 2))
            && self
                .steps
                .iter()
                .scan(0i64, |acc, s| {
                    *acc += s;
                    Some(*acc)
                })
                .eq(self.cumulative.iter().copied())
    }
}

/// Net split-detector signal over `n_events` pairs.
pub fn run_random_walk(m: &BiphotonModel, n_events: usize, seed: u64) -> RandomWalkTrace {
    let blocks = per_block(m, n_events, seed, EXP_WALK, |it| {
        it.map(|p| classify_split(&p).step()).collect::<Vec<_>>()
    });
    let steps: Vec<i64> = blocks.into_iter().flatten().collect();
    let cumulative = steps
        .iter()
        .scan(0i64, |acc, s| {
            *acc += s;
            Some(*acc)
        })
        .collect();
    RandomWalkTrace { steps, cumulative }
}

/// Discrete Fisher information for each `(ε, N)` plus the `4/ε²` reference and
/// the small-displacement split formula.
pub fn sweep_npixel_fisher(
    sigma: f64,
    d: f64,
    pixel_counts: &[usize],
    extent: f64,
    eps_grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<ExperimentRecord>> {
    for &e in eps_grid {
        if !(e > 0.0 && e <= sigma) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {e} outside (0, sigma = {sigma}]"
            )));
        }
    }
    let detectors = pixel_counts
        .iter()
        .map(|&n| PixelDetector::new(n, extent))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(f64, &PixelDetector)> = eps_grid
        .iter()
        .flat_map(|&e| detectors.iter().map(move |det| (e, det)))
        .collect();
    let pixel_rows = jobs
        .par_iter()
        .map(|&(e, det)| {
            let m = BiphotonModel::new(sigma, e, d)?;
            let table = pixel_probabilities(&m, det, spec)?;
            let info = fisher_discrete(&table, 1.0)?;
            Ok(
                ExperimentRecord::new("npixel-sweep", &m, "fisher_discrete", info.value)
                    .pixels(det.n_pixels()),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(pixel_rows.len() + 2 * eps_grid.len());
    for (k, &e) in eps_grid.iter().enumerate() {
        let m = BiphotonModel::new(sigma, e, d)?;
        let per = detectors.len();
        out.extend_from_slice(&pixel_rows[k * per..(k + 1) * per]);
        out.push(ExperimentRecord::new(
            "npixel-sweep",
            &m,
            "fisher_continuous",
            fisher_continuous(&m)?.value,
        ));
        out.push(ExperimentRecord::new(
            "npixel-sweep",
            &m,
            "fisher_split_small_d",
            fisher_split(&m)?.value,
        ));
    }
    Ok(out)
}

/// Events needed for split detection to reach `target_snr` at displacement
/// `d`: `⌈snr² / (d² I₁(d))⌉` with `I₁` from the exact outcome table.
///
/// In the delta limit the table's information is replaced by its leading
/// `√(8/π)/(σd)` term, giving `⌈√(π/8) σ snr² / d⌉`.
pub fn crossover_events_for_snr(
    m: &BiphotonModel,
    d: f64,
    target_snr: f64,
    spec: &QuadratureSpec,
) -> Result<u64> {
    if !(d > 0.0 && d.is_finite()) || !(target_snr > 0.0 && target_snr.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need d > 0 and target SNR > 0, got ({d}, {target_snr})"
        )));
    }
    let nu = if m.is_delta_limit() {
        (PI / 8.0).sqrt() * m.sigma() * target_snr * target_snr / d
    } else {
        let table = split_probabilities(&m.with_d(d)?, spec)?;
        let i1 = fisher_discrete(&table, 1.0)?.value;
        target_snr * target_snr / (d * d * i1)
    };
    Ok(nu.ceil() as u64)
}

/// Crossover counts over a displacement grid for each ε/σ ratio.
pub fn crossover_curves(
    sigma: f64,
    eps_ratios: &[f64],
    d_grid: &[f64],
    target_snr: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<ExperimentRecord>> {
    let jobs: Vec<(f64, f64)> = eps_ratios
        .iter()
        .flat_map(|&r| d_grid.iter().map(move |&d| (r, d)))
        .collect();
    jobs.par_iter()
        .map(|&(r, d)| {
            let m = BiphotonModel::new(sigma, r * sigma, d)?;
            let nu = crossover_events_for_snr(&m, d, target_snr, spec)?;
            Ok(ExperimentRecord::new(
                "crossover",
                &m,
                "events_for_snr",
                nu as f64,
            ))
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "slope fit needs at least two matched points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Thresholds of one replication of `nu` events: the pair lands on `+2`
/// iff `d ≥ a` and on `−2` iff `d < b`, with `a`, `b` fixed by the draws.
/// Only thresholds inside `(0, window]` are kept; the rest are counted.
struct Thresholds {
    plus_below: u64,
    plus: Vec<f64>,
    minus_above: u64,
    minus: Vec<f64>,
}

impl Thresholds {
    fn draw(m: &BiphotonModel, nu: u64, window: f64, rng: &mut RandomStream) -> Self {
        let (eps, sigma) = (m.epsilon(), m.sigma());
        let mut t = Thresholds {
            plus_below: 0,
            plus: Vec::new(),
            minus_above: 0,
            minus: Vec::new(),
        };
        for _ in 0..nu {
            let zu = rng.standard_normal();
            let zv = rng.standard_normal();
            // Offsets from d of the two photons.
            let w1 = 0.5 * (eps * zu + sigma * zv);
            let w2 = 0.5 * (eps * zu - sigma * zv);
            let a = -w1.min(w2);
            let b = -w1.max(w2);
            if a <= 0.0 {
                t.plus_below += 1;
            } else if a <= window {
                t.plus.push(a);
            }
            if b > window {
                t.minus_above += 1;
            } else if b > 0.0 {
                t.minus.push(b);
            }
        }
        t.plus.sort_by(f64::total_cmp);
        t.minus.sort_by(f64::total_cmp);
        t
    }

    /// `n₊₂ − n₋₂` at displacement `d ∈ [0, window]`.
    fn imbalance(&self, d: f64) -> f64 {
        let plus = self.plus_below + self.plus.partition_point(|&a| a <= d) as u64;
        let minus =
            self.minus_above + (self.minus.len() - self.minus.partition_point(|&b| b <= d)) as u64;
        plus as f64 - minus as f64
    }
}

/// `mean/std` of the split estimator over replications (the scale factor cancels).
fn empirical_snr(reps: &[Thresholds], d: f64) -> f64 {
    let n = reps.len() as f64;
    let vals: Vec<f64> = reps.iter().map(|r| r.imbalance(d)).collect();
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return if mean > 0.0 { f64::INFINITY } else { 0.0 };
    }
    mean / var.sqrt()
}

/// Monte Carlo and analytic resolution at one event count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub nu: f64,
    pub dmin: f64,
    pub dmin_std_error: f64,
    pub dmin_alpha_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub model: BiphotonModel,
    pub seed: u64,
    pub replications: usize,
    pub points: Vec<ScalingPoint>,
}

impl ScalingStudy {
    /// Log-log slope of the Monte Carlo `d_min` over `nu ∈ [lo, hi]`.
    pub fn slope(&self, lo: f64, hi: f64) -> Result<f64> {
        let pts: Vec<_> = self
            .points
            .iter()
            .filter(|p| p.nu >= lo && p.nu <= hi)
            .collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.nu).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.dmin).collect();
        fit_loglog_slope(&xs, &ys)
    }

    /// Event count where the straight-line fits over `[lo1, hi1]` and
    /// `[lo2, hi2]` intersect.
    pub fn transition(&self, low: (f64, f64), high: (f64, f64)) -> Result<f64> {
        let line = |(lo, hi): (f64, f64)| -> Result<(f64, f64)> {
            let pts: Vec<_> = self
                .points
                .iter()
                .filter(|p| p.nu >= lo && p.nu <= hi)
                .collect();
            let lx: Vec<f64> = pts.iter().map(|p| p.nu.ln()).collect();
            let ly: Vec<f64> = pts.iter().map(|p| p.dmin.ln()).collect();
            let s = fit_loglog_slope(
                &pts.iter().map(|p| p.nu).collect::<Vec<_>>(),
                &pts.iter().map(|p| p.dmin).collect::<Vec<_>>(),
            )?;
            let n = lx.len() as f64;
            let c = ly.iter().sum::<f64>() / n - s * lx.iter().sum::<f64>() / n;
            Ok((s, c))
        };
        let (s1, c1) = line(low)?;
        let (s2, c2) = line(high)?;
        if s1 == s2 {
            return Err(Error::Domain("parallel fits do not intersect".into()));
        }
        Ok(((c2 - c1) / (s1 - s2)).exp())
    }

    pub fn records(&self) -> Result<Vec<ExperimentRecord>> {
        let m = &self.model;
        let mut out = Vec::new();
        for p in &self.points {
            out.push(
                ExperimentRecord::new("scaling", m, "dmin_monte_carlo", p.dmin)
                    .nu(p.nu)
                    .seed(self.seed)
                    .std_error(p.dmin_std_error),
            );
            out.push(
                ExperimentRecord::new("scaling", m, "dmin_alpha_beta", p.dmin_alpha_beta).nu(p.nu),
            );
        }
        if self.points.len() >= 2 {
            let lo = self
                .points
                .iter()
                .map(|p| p.nu)
                .fold(f64::INFINITY, f64::min);
            let hi = self.points.iter().map(|p| p.nu).fold(0.0, f64::max);
            out.push(
                ExperimentRecord::new("scaling", m, "loglog_slope", self.slope(lo, hi)?)
                    .seed(self.seed),
            );
        }
        Ok(out)
    }
}

/// Resolution versus event count. For each `nu` the replications share their
/// random draws across all `d`, and `d_min` is the smallest `d` at which the
/// split estimator's `mean/std` over replications reaches 1.
pub fn scaling_study(
    m: &BiphotonModel,
    nu_grid: &[u64],
    replications: usize,
    seed: u64,
) -> Result<ScalingStudy> {
    if replications < 50 {
        return Err(Error::InvalidParameter(format!(
            "need at least 50 replications, got {replications}"
        )));
    }
    if nu_grid.contains(&0) {
        return Err(Error::InvalidParameter(
            "event counts must be positive".into(),
        ));
    }
    let (alpha, beta) = alpha_beta_linearization(m);
    let mut points = Vec::with_capacity(nu_grid.len());
    for &nu in nu_grid {
        let nuf = nu as f64;
        let analytic = dmin_alpha_beta(alpha, beta, nuf.max(1.0))?;
        let mut window = 8.0 * analytic;
        let (dmin, se) = loop {
            let reps: Vec<Thresholds> = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let mut rng = RandomStream::substream(seed, EXP_SCALING ^ (nu << 8), r as u64);
                    Thresholds::draw(m, nu, window, &mut rng)
                })
                .collect();
            if empirical_snr(&reps, window) < 1.0 {
                window *= 4.0;
                continue;
            }
            let (mut lo, mut hi) = (0.0, window);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if empirical_snr(&reps, mid) >= 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            // Delta-method error: the SNR estimate has standard error
            // √((1 + snr²/2)/R); convert through the local slope of the curve.
            let (dl, dh) = (0.8 * hi, (1.2 * hi).min(window));
            let slope = (empirical_snr(&reps, dh) - empirical_snr(&reps, dl)) / (dh - dl);
            let se_snr = (1.5 / replications as f64).sqrt();
            let se = if slope > 0.0 && slope.is_finite() {
                se_snr / slope
            } else {
                f64::NAN
            };
            break (hi, se);
        };
        log::debug!("scaling: nu = {nu}, dmin = {dmin:e}");
        points.push(ScalingPoint {
            nu: nuf,
            dmin,
            dmin_std_error: se,
            dmin_alpha_beta: analytic,
        });
    }
    Ok(ScalingStudy {
        model: *m,
        seed,
        replications,
        points,
    })
}

/// Variance of the weighted marginal estimator at one weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub w1: f64,
    pub variance: f64,
    pub std_error: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixAStudy {
    pub model: BiphotonModel,
    pub n_events: u64,
    pub replications: usize,
    pub seed: u64,
    pub covariance: f64,
    pub covariance_std_error: f64,
    pub predicted_covariance: f64,
    pub weights: Vec<WeightRow>,
}

impl AppendixAStudy {
    /// Row with the smallest empirical variance.
    pub fn best(&self) -> &WeightRow {
        self.weights
            .iter()
            .min_by(|a, b| a.variance.total_cmp(&b.variance))
            .expect("weight grid is non-empty")
    }

    pub fn records(&self) -> Vec<ExperimentRecord> {
        let m = &self.model;
        let nu = self.n_events as f64;
        let rec = |stat: String, v: f64| {
            ExperimentRecord::new("appendix-a", m, stat, v)
                .nu(nu)
                .seed(self.seed)
        };
        let mut out = vec![
            rec("covariance".into(), self.covariance).std_error(self.covariance_std_error),
            rec("covariance_predicted".into(), self.predicted_covariance),
        ];
        for w in &self.weights {
            out.push(rec(format!("variance_w1={}", w.w1), w.variance).std_error(w.std_error));
            out.push(rec(format!("variance_predicted_w1={}", w.w1), w.predicted));
        }
        out
    }
}

/// Replicated marginal estimates of both photons, their covariance and the
/// variance of their weighted average over a grid of weights.
pub fn appendix_a_study(
    m: &BiphotonModel,
    n_events: u64,
    replications: usize,
    weight_grid: &[f64],
    seed: u64,
) -> Result<AppendixAStudy> {
    if !weight_grid.contains(&0.5) {
        return Err(Error::InvalidParameter(
            "weight grid must contain 1/2".into(),
        ));
    }
    if replications < 2 || n_events == 0 {
        return Err(Error::InvalidParameter(
            "need at least 2 replications and 1 event".into(),
        ));
    }
    let estimates = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = RandomStream::substream(seed, EXP_APPENDIX_A, r as u64);
            let mut c = QuadrantCounts::default();
            for _ in 0..n_events {
                c.record(&m.sample_pair(&mut rng));
            }
            let (d1, d2) = marginal_estimates(&c, m)?;
            Ok((d1.estimate, d2.estimate))
        })
        .collect::<Result<Vec<_>>>()?;

    let r = replications as f64;
    let m1 = estimates.iter().map(|e| e.0).sum::<f64>() / r;
    let m2 = estimates.iter().map(|e| e.1).sum::<f64>() / r;
    let products: Vec<f64> = estimates.iter().map(|e| (e.0 - m1) * (e.1 - m2)).collect();
    let covariance = products.iter().sum::<f64>() / (r - 1.0);
    let pm = products.iter().sum::<f64>() / r;
    let covariance_std_error =
        (products.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt();

    let nf = n_events as f64;
    let weights = weight_grid
        .iter()
        .map(|&w1| {
            let w2 = 1.0 - w1;
            let vals: Vec<f64> = estimates.iter().map(|e| w1 * e.0 + w2 * e.1).collect();
            let mean = vals.iter().sum::<f64>() / r;
            let variance = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
            WeightRow {
                w1,
                variance,
                std_error: variance * (2.0 / (r - 1.0)).sqrt(),
                predicted: averaged_marginal_variance(m, nf, w1, w2),
            }
        })
        .collect();

    Ok(AppendixAStudy {
        model: *m,
        n_events,
        replications,
        seed,
        covariance,
        covariance_std_error,
        predicted_covariance: covariance_marginal_estimators(m, nf)?,
        weights,
    })
}

/// Quantum versus classical continuous information for each model.
pub fn qfi_vs_cfi_check(
    models: &[BiphotonModel],
    spec: &QuadratureSpec,
) -> Result<Vec<ExperimentRecord>> {
    let rows = models
        .par_iter()
        .map(|m| {
            let q = qfi_numeric(m, spec)?.value;
            let c = fisher_continuous(m)?.value;
            Ok(vec![
                ExperimentRecord::new("qfi-check", m, "qfi_numeric", q),
                ExperimentRecord::new("qfi-check", m, "fisher_continuous", c),
                ExperimentRecord::new("qfi-check", m, "relative_difference", (q - c).abs() / c),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Mean, split and both marginal estimators from one run of `nu` events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRun {
    pub mean: EstimateResult,
    pub split: EstimateResult,
    pub marginal1: EstimateResult,
    pub marginal2: EstimateResult,
}

/// Runs every estimator on the same `nu` simulated pairs.
pub fn efficiency_run(m: &BiphotonModel, nu: usize, seed: u64) -> Result<EfficiencyRun> {
    let blocks = per_block(m, nu, seed, EXP_EFFICIENCY, |it| it.collect::<Vec<_>>());
    let pairs: Vec<PhotonPair> = blocks.into_iter().flatten().collect();
    let (marginal1, marginal2) = marginal_estimates(&QuadrantCounts::from_pairs(&pairs), m)?;
    Ok(EfficiencyRun {
        mean: estimate_mean(&pairs, m)?,
        split: estimate_split(&SplitCounts::from_pairs(&pairs), m)?,
        marginal1,
        marginal2,
    })
}

/// Observed count and expected probability of one outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub label: OutcomeLabel,
    pub count: u64,
    pub probability: f64,
}

impl FrequencyRow {
    /// `(count − nP)/√(nP(1−P))`; zero when both sides vanish.
    pub fn z_score(&self, n: u64) -> f64 {
        let n = n as f64;
        let expect = n * self.probability;
        let sd = (expect * (1.0 - self.probability)).sqrt();
        if sd == 0.0 {
            if self.count as f64 == expect {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.count as f64 - expect) / sd
        }
    }
}

/// Standardized deviations after merging every outcome with expected count
/// below `min_expected` into one pooled outcome (appended last, if any).
pub fn pooled_z_scores(rows: &[FrequencyRow], n: u64, min_expected: f64) -> Vec<f64> {
    let nf = n as f64;
    let (sparse, dense): (Vec<&FrequencyRow>, Vec<&FrequencyRow>) =
        rows.iter().partition(|r| nf * r.probability < min_expected);
    let mut z: Vec<f64> = dense.iter().map(|r| r.z_score(n)).collect();
    if !sparse.is_empty() {
        let pooled = FrequencyRow {
            label: sparse[0].label,
            count: sparse.iter().map(|r| r.count).sum(),
            probability: sparse.iter().map(|r| r.probability).sum(),
        };
        z.push(pooled.z_score(n));
    }
    z
}

/// Simulates `n_events` pairs, classifies them (split detector when `det` is
/// `None`) and pairs the counts with the analytic table.
pub fn outcome_frequencies(
    m: &BiphotonModel,
    det: Option<&PixelDetector>,
    n_events: usize,
    seed: u64,
    spec: &QuadratureSpec,
) -> Result<Vec<FrequencyRow>> {
    let table: OutcomeDistribution = match det {
        None => split_probabilities(m, spec)?,
        Some(det) => pixel_probabilities(m, det, spec)?,
    };
    let blocks = per_block(m, n_events, seed, EXP_FREQUENCY, |it| {
        let mut counts: HashMap<OutcomeLabel, u64> = HashMap::new();
        for p in it {
            let label = match det {
                None => OutcomeLabel::Split(classify_split(&p)),
                Some(det) => OutcomeLabel::Bin(classify_pixels(&p, det)),
            };
            *counts.entry(label).or_default() += 1;
        }
        counts
    });
    let mut counts: HashMap<OutcomeLabel, u64> = HashMap::new();
    for b in blocks {
        for (k, v) in b {
            *counts.entry(k).or_default() += v;
        }
    }
    Ok(table
        .outcomes()
        .iter()
        .map(|o| FrequencyRow {
            label: o.label,
            count: counts.get(&o.label).copied().unwrap_or(0),
            probability: o.probability,
        })
        .collect())
}
