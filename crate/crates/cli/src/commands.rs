use std::f64::consts::PI;

use biphoton_core::detection::{
    alpha_beta_linearization, pixel_probabilities, split_probabilities, OutcomeDistribution,
    PixelDetector,
};
use biphoton_core::experiments::{
    appendix_a_study, crossover_curves, crossover_events_for_snr, qfi_vs_cfi_check,
    run_random_walk, sample_pairs, scaling_study, sweep_npixel_fisher, ExperimentRecord,
    CROSSOVER_EPSILON_RATIOS, RANDOM_WALK_DEFAULT_D,
};
use biphoton_core::inference::{
    fisher_alpha_beta, fisher_continuous, fisher_discrete, fisher_marginal, fisher_ratio,
    fisher_split, qfi_numeric, Scheme,
};
use biphoton_core::{BiphotonModel, Error};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{self, ProbabilityRow, SampleRow, WalkRow};

const DEFAULT_SAMPLE_COUNT: u64 = 1000;
const DEFAULT_WALK_EVENTS: u64 = 10_000;
const DEFAULT_SWEEP_D: f64 = 0.05;
const DEFAULT_APPENDIX_D: f64 = 0.01;
const DEFAULT_APPENDIX_EVENTS: u64 = 10_000;
const DEFAULT_APPENDIX_REPLICATIONS: usize = 1000;
const DEFAULT_SCALING_REPLICATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fisher,
    Probabilities,
    Sample,
    RandomWalk,
    NpixelSweep,
    Crossover,
    Scaling,
    AppendixA,
    QfiCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fisher => "fisher",
            Command::Probabilities => "probabilities",
            Command::Sample => "sample",
            Command::RandomWalk => "random-walk",
            Command::NpixelSweep => "npixel-sweep",
            Command::Crossover => "crossover",
            Command::Scaling => "scaling",
            Command::AppendixA => "appendix-a",
            Command::QfiCheck => "qfi-check",
        }
    }
}

/// Geometric grid of `n` points from `lo` to `hi`.
fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

fn model(cfg: &RunConfig, d_default: f64) -> Result<BiphotonModel, CliError> {
    Ok(BiphotonModel::new(
        cfg.sigma(),
        cfg.epsilon()?,
        cfg.params.d.unwrap_or(d_default),
    )?)
}

struct Emit<T> {
    rows: Vec<T>,
    notes: Vec<String>,
}

impl<T> From<Vec<T>> for Emit<T> {
    fn from(rows: Vec<T>) -> Self {
        Self {
            rows,
            notes: Vec::new(),
        }
    }
}

fn emit<T: serde::Serialize>(cfg: &RunConfig, e: Emit<T>) -> Result<(), CliError> {
    let mut out = output::open(cfg.params.out.as_deref())?;
    output::write_rows(&mut *out, cfg.format, &cfg.summary(), &e.notes, &e.rows)
}

/// Skips rows that only exist for finite ε.
fn push_unless_delta(
    out: &mut Vec<ExperimentRecord>,
    row: Result<ExperimentRecord, Error>,
) -> Result<(), CliError> {
    match row {
        Ok(r) => out.push(r),
        Err(Error::DeltaLimit(_)) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn fisher(cfg: &RunConfig) -> Result<Emit<ExperimentRecord>, CliError> {
    let m = model(cfg, 0.0)?;
    let spec = &cfg.spec;
    let rec = |stat: &str, v: f64| ExperimentRecord::new("fisher", &m, stat, v);
    let mut rows = Vec::new();
    push_unless_delta(
        &mut rows,
        fisher_continuous(&m).map(|r| rec("fisher_continuous", r.value)),
    )?;
    rows.push(rec("fisher_marginal", fisher_marginal(&m).value));
    push_unless_delta(
        &mut rows,
        fisher_split(&m).map(|r| rec("fisher_split_small_d", r.value)),
    )?;
    push_unless_delta(
        &mut rows,
        fisher_ratio(&m, Scheme::Continuous).map(|v| rec("ratio_continuous", v)),
    )?;
    push_unless_delta(
        &mut rows,
        fisher_ratio(&m, Scheme::Split).map(|v| rec("ratio_split", v)),
    )?;
    rows.push(rec("correlation", m.correlation_coefficient()));

    let split = fisher_discrete(&split_probabilities(&m, spec)?, 1.0)?;
    rows.push(rec("fisher_discrete_split", split.value));
    if let Some(div) = &split.divergence {
        rows.push(rec("divergence_coefficient_split", div.coefficient));
    }
    if let Some(n) = cfg.params.pixels {
        if !m.is_delta_limit() {
            let det = PixelDetector::new(n, cfg.extent())?;
            let v = fisher_discrete(&pixel_probabilities(&m, &det, spec)?, 1.0)?.value;
            rows.push(rec("fisher_discrete_pixels", v).pixels(n));
        }
    }
    let (alpha, beta) = alpha_beta_linearization(&m);
    rows.push(rec("alpha", alpha));
    rows.push(rec("beta", beta));
    if m.d() >= 0.0 && alpha + beta * m.d() < 1.0 {
        let ab = fisher_alpha_beta(alpha, beta, m.d(), 1.0)?;
        rows.push(rec("fisher_alpha_beta", ab.value));
    }
    push_unless_delta(
        &mut rows,
        qfi_numeric(&m, spec).map(|r| rec("qfi_numeric", r.value)),
    )?;
    Ok(rows.into())
}

fn table_rows(detector: &str, t: &OutcomeDistribution) -> Vec<ProbabilityRow> {
    t.outcomes()
        .iter()
        .map(|o| ProbabilityRow {
            detector: detector.to_string(),
            outcome: o.label.to_string(),
            probability: o.probability,
            derivative: o.derivative,
        })
        .collect()
}

fn probabilities(cfg: &RunConfig) -> Result<Emit<ProbabilityRow>, CliError> {
    let m = model(cfg, 0.0)?;
    let mut rows = table_rows("split", &split_probabilities(&m, &cfg.spec)?);
    if let Some(n) = cfg.params.pixels {
        let det = PixelDetector::new(n, cfg.extent())?;
        rows.extend(table_rows(
            &format!("pixels-{n}"),
            &pixel_probabilities(&m, &det, &cfg.spec)?,
        ));
    }
    Ok(rows.into())
}

fn sample(cfg: &RunConfig) -> Result<Emit<SampleRow>, CliError> {
    let m = model(cfg, 0.0)?;
    let n = cfg.params.nu.unwrap_or(DEFAULT_SAMPLE_COUNT);
    let pairs = sample_pairs(&m, n as usize, cfg.seed()?);
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(k, p)| SampleRow {
            index: k as u64,
            x1: p.x1,
            x2: p.x2,
        })
        .collect::<Vec<_>>()
        .into())
}

fn random_walk(cfg: &RunConfig) -> Result<Emit<WalkRow>, CliError> {
    let m = model(cfg, RANDOM_WALK_DEFAULT_D * cfg.sigma())?;
    let n = cfg.params.nu.unwrap_or(DEFAULT_WALK_EVENTS);
    let trace = run_random_walk(&m, n as usize, cfg.seed()?);
    let rows: Vec<WalkRow> = trace
        .steps
        .iter()
        .zip(&trace.cumulative)
        .enumerate()
        .map(|(k, (&step, &net_signal))| WalkRow {
            event: k as u64 + 1,
            step,
            net_signal,
        })
        .collect();
    let mut e = Emit::from(rows);
    if cfg.params.d.is_none() {
        e.notes
            .push(format!("d defaults to {RANDOM_WALK_DEFAULT_D} sigma"));
    }
    Ok(e)
}

fn npixel_sweep(cfg: &RunConfig) -> Result<Emit<ExperimentRecord>, CliError> {
    let sigma = cfg.sigma();
    let d = cfg.params.d.unwrap_or(DEFAULT_SWEEP_D * sigma);
    let pixels = match cfg.params.pixels {
        Some(n) => vec![n],
        None => vec![2, 10, 50],
    };
    let eps = match cfg.params.epsilon {
        Some(e) => vec![e],
        None => geomspace(0.01 * sigma, sigma, 20),
    };
    Ok(sweep_npixel_fisher(sigma, d, &pixels, cfg.extent(), &eps, &cfg.spec)?.into())
}

fn crossover(cfg: &RunConfig) -> Result<Emit<ExperimentRecord>, CliError> {
    let sigma = cfg.sigma();
    let snr = cfg.params.snr.unwrap_or(1.0);
    match (cfg.params.epsilon, cfg.params.d) {
        (Some(e), Some(d)) => {
            let m = BiphotonModel::new(sigma, e, d)?;
            let nu = crossover_events_for_snr(&m, d, snr, &cfg.spec)?;
            Ok(vec![ExperimentRecord::new(
                "crossover",
                &m,
                "events_for_snr",
                nu as f64,
            )]
            .into())
        }
        (eps, d) => {
            let ratios: Vec<f64> = match eps {
                Some(e) => vec![e / sigma],
                None => CROSSOVER_EPSILON_RATIOS.to_vec(),
            };
            let ds = match d {
                Some(d) => vec![d],
                None => geomspace(1e-3 * sigma, 0.1 * sigma, 30),
            };
            let mut e = Emit::from(crossover_curves(sigma, &ratios, &ds, snr, &cfg.spec)?);
            if eps.is_none() {
                e.notes.push(
                    "epsilon/sigma family includes both 0.05 and 0.01; the figure caption lists 0.05 while its text names 0.01"
                        .into(),
                );
            }
            Ok(e)
        }
    }
}

fn scaling(cfg: &RunConfig) -> Result<Emit<ExperimentRecord>, CliError> {
    let m = model(cfg, 0.0)?;
    let grid: Vec<u64> = match cfg.params.nu {
        Some(nu) => vec![nu],
        None => vec![
            10, 15, 20, 30, 50, 100, 300, 1000, 3000, 10_000, 30_000, 100_000,
        ],
    };
    let reps = cfg
        .params
        .replications
        .unwrap_or(DEFAULT_SCALING_REPLICATIONS);
    let study = scaling_study(&m, &grid, reps, cfg.seed()?)?;
    let mut e = Emit::from(study.records()?);
    if !m.is_delta_limit() {
        e.notes.push(format!(
            "heisenberg event bound pi*sigma/(4*epsilon) = {}",
            PI * m.sigma() / (4.0 * m.epsilon())
        ));
    }
    Ok(e)
}

fn appendix_a(cfg: &RunConfig) -> Result<Emit<ExperimentRecord>, CliError> {
    let m = model(cfg, DEFAULT_APPENDIX_D * cfg.sigma())?;
    let n = cfg.params.nu.unwrap_or(DEFAULT_APPENDIX_EVENTS);
    let reps = cfg
        .params
        .replications
        .unwrap_or(DEFAULT_APPENDIX_REPLICATIONS);
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    Ok(appendix_a_study(&m, n, reps, &grid, cfg.seed()?)?
        .records()
        .into())
}

fn qfi_check(cfg: &RunConfig) -> Result<Emit<ExperimentRecord>, CliError> {
    let models = match cfg.params.epsilon {
        Some(e) => {
            let ds = match cfg.params.d {
                Some(d) => vec![d],
                None => vec![0.0, 0.1, 0.5],
            };
            ds.into_iter()
                .map(|d| BiphotonModel::new(cfg.sigma(), e, d))
                .collect::<Result<Vec<_>, _>>()?
        }
        None => [0.25, 0.5, 1.0]
            .iter()
            .flat_map(|&e| [0.0, 0.2].map(|d| BiphotonModel::new(cfg.sigma(), e * cfg.sigma(), d)))
            .collect::<Result<Vec<_>, _>>()?,
    };
    Ok(qfi_vs_cfi_check(&models, &cfg.spec)?.into())
}

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> Result<(), CliError> {
    log::info!("running {}", cmd.name());
    match cmd {
        Command::Fisher => emit(cfg, fisher(cfg)?),
        Command::Probabilities => emit(cfg, probabilities(cfg)?),
        Command::Sample => emit(cfg, sample(cfg)?),
        Command::RandomWalk => emit(cfg, random_walk(cfg)?),
        Command::NpixelSweep => emit(cfg, npixel_sweep(cfg)?),
        Command::Crossover => emit(cfg, crossover(cfg)?),
        Command::Scaling => emit(cfg, scaling(cfg)?),
        Command::AppendixA => emit(cfg, appendix_a(cfg)?),
        Command::QfiCheck => emit(cfg, qfi_check(cfg)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Params;

    fn cfg(cmd: &str, p: Params) -> RunConfig {
        RunConfig::resolve(cmd, p).unwrap()
    }

    #[test]
    fn grid() {
        let g = geomspace(0.01, 1.0, 3);
        assert_eq!(g.len(), 3);
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert_eq!(geomspace(2.0, 5.0, 1), vec![2.0]);
    }

    #[test]
    fn fisher_rows_include_analytic_value() {
        let c = cfg(
            "fisher",
            Params {
                epsilon: Some(0.5),
                ..Params::default()
            },
        );
        let rows = fisher(&c).unwrap().rows;
        let cont = rows
            .iter()
            .find(|r| r.statistic == "fisher_continuous")
            .unwrap();
        assert_eq!(cont.value, 16.0);
    }

    #[test]
    fn fisher_in_delta_limit_skips_undefined_rows() {
        let c = cfg(
            "fisher",
            Params {
                epsilon: Some(0.0),
                d: Some(0.01),
                ..Params::default()
            },
        );
        let rows = fisher(&c).unwrap().rows;
        assert!(rows.iter().all(|r| r.statistic != "fisher_continuous"));
        assert!(rows.iter().any(|r| r.statistic == "fisher_discrete_split"));
    }

    #[test]
    fn crossover_single_point() {
        let c = cfg(
            "crossover",
            Params {
                epsilon: Some(0.0),
                d: Some(0.01),
                snr: Some(1.0),
                ..Params::default()
            },
        );
        let rows = crossover(&c).unwrap().rows;
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].value, 63.0);
    }

    #[test]
    fn stochastic_commands_need_a_seed() {
        let c = cfg(
            "sample",
            Params {
                epsilon: Some(0.5),
                ..Params::default()
            },
        );
        assert!(matches!(sample(&c), Err(CliError::Usage(_))));
    }
}
