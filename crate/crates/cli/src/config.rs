//! Run configuration: command-line flags layered over an optional
//! `key = value` file, layered over defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use biphoton_core::QuadratureSpec;
use clap::{Args, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    #[value(name = "json-lines")]
    JsonLines,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::JsonLines => "json-lines",
        })
    }
}

/// Parameters shared by every subcommand. All optional so that a config file
/// can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    /// Pump width σ (default 1)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    /// Correlation width ε
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// Displacement d
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub d: Option<f64>,
    /// Number of detector pixels
    #[arg(long, global = true)]
    pub pixels: Option<usize>,
    /// Detector width (default 10σ)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub extent: Option<f64>,
    /// Number of events ν
    #[arg(long, global = true)]
    pub nu: Option<u64>,
    /// Monte Carlo replications
    #[arg(long, global = true)]
    pub replications: Option<usize>,
    /// Random seed (required for stochastic subcommands)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Target signal-to-noise ratio
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    /// Output file (default stdout)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Config file with `key = value` lines
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Quadrature relative tolerance
    #[arg(long = "rel-tol", global = true)]
    pub rel_tol: Option<f64>,
    /// Quadrature absolute tolerance
    #[arg(long = "abs-tol", global = true)]
    pub abs_tol: Option<f64>,
    /// Quadrature subdivision budget
    #[arg(long = "max-subdivisions", global = true)]
    pub max_subdivisions: Option<usize>,
}

fn parse<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Validation(format!("config key `{key}`: cannot parse `{raw}`")))
}

impl Params {
    /// Reads a config file. Keys are the long flag names.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut p = Params::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "config line {}: expected `key = value`",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "sigma" => p.sigma = Some(parse(key, value)?),
                "epsilon" => p.epsilon = Some(parse(key, value)?),
                "d" => p.d = Some(parse(key, value)?),
                "pixels" => p.pixels = Some(parse(key, value)?),
                "extent" => p.extent = Some(parse(key, value)?),
                "nu" => p.nu = Some(parse(key, value)?),
                "replications" => p.replications = Some(parse(key, value)?),
                "seed" => p.seed = Some(parse(key, value)?),
                "snr" => p.snr = Some(parse(key, value)?),
                "out" => p.out = Some(PathBuf::from(value)),
                "format" => p.format = Some(parse(key, value)?),
                "rel-tol" => p.rel_tol = Some(parse(key, value)?),
                "abs-tol" => p.abs_tol = Some(parse(key, value)?),
                "max-subdivisions" => p.max_subdivisions = Some(parse(key, value)?),
                "config" => {
                    return Err(CliError::Usage(
                        "config files cannot include other config files".into(),
                    ))
                }
                _ => {
                    return Err(CliError::Usage(format!(
                        "config line {}: unknown key `{key}`",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(p)
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Params) -> Params {
        Params {
            sigma: self.sigma.or(base.sigma),
            epsilon: self.epsilon.or(base.epsilon),
            d: self.d.or(base.d),
            pixels: self.pixels.or(base.pixels),
            extent: self.extent.or(base.extent),
            nu: self.nu.or(base.nu),
            replications: self.replications.or(base.replications),
            seed: self.seed.or(base.seed),
            snr: self.snr.or(base.snr),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            config: self.config.or(base.config),
            rel_tol: self.rel_tol.or(base.rel_tol),
            abs_tol: self.abs_tol.or(base.abs_tol),
            max_subdivisions: self.max_subdivisions.or(base.max_subdivisions),
        }
    }
}

/// Effective configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub params: Params,
    pub format: Format,
    pub spec: QuadratureSpec,
}

impl RunConfig {
    pub fn resolve(command: &str, flags: Params) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => Params::from_file(path)?,
            None => Params::default(),
        };
        let params = flags.over(file);
        let defaults = QuadratureSpec::default();
        let spec = QuadratureSpec::new(
            params.rel_tol.unwrap_or(defaults.rel_tol),
            params.abs_tol.unwrap_or(defaults.abs_tol),
            params.max_subdivisions.unwrap_or(defaults.max_subdivisions),
        )
        .map_err(CliError::from)?;
        let cfg = Self {
            command: command.to_string(),
            format: params.format.unwrap_or(Format::Csv),
            params,
            spec,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        let bad = |msg: String| Err(CliError::Validation(msg));
        if !(self.sigma() > 0.0 && self.sigma().is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma()));
        }
        if let Some(e) = p.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return bad(format!("epsilon must be non-negative, got {e}"));
            }
        }
        if let Some(d) = p.d {
            if !d.is_finite() {
                return bad(format!("d must be finite, got {d}"));
            }
        }
        if let Some(n) = p.pixels {
            if n < 2 {
                return bad(format!("pixels must be at least 2, got {n}"));
            }
        }
        if let Some(x) = p.extent {
            if !(x > 0.0 && x.is_finite()) {
                return bad(format!("extent must be positive, got {x}"));
            }
        }
        if let Some(s) = p.snr {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("snr must be positive, got {s}"));
            }
        }
        if p.nu == Some(0) {
            return bad("nu must be positive".into());
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.params.sigma.unwrap_or(1.0)
    }

    pub fn extent(&self) -> f64 {
        self.params.extent.unwrap_or(10.0 * self.sigma())
    }

    pub fn epsilon(&self) -> Result<f64, CliError> {
        self.params
            .epsilon
            .ok_or_else(|| CliError::Usage(format!("`{}` needs --epsilon", self.command)))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.params.seed.ok_or_else(|| {
            CliError::Usage(format!("`{}` is stochastic and needs --seed", self.command))
        })
    }

    /// Effective settings, for echoing into output metadata.
    pub fn summary(&self) -> BTreeMap<&'static str, String> {
        let p = &self.params;
        let mut m = BTreeMap::new();
        m.insert("command", self.command.clone());
        m.insert("sigma", self.sigma().to_string());
        m.insert("extent", self.extent().to_string());
        m.insert("format", self.format.to_string());
        m.insert("rel-tol", self.spec.rel_tol.to_string());
        m.insert("abs-tol", self.spec.abs_tol.to_string());
        m.insert("max-subdivisions", self.spec.max_subdivisions.to_string());
        let mut opt = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k, v);
            }
        };
        opt("epsilon", p.epsilon.map(|v| v.to_string()));
        opt("d", p.d.map(|v| v.to_string()));
        opt("pixels", p.pixels.map(|v| v.to_string()));
        opt("nu", p.nu.map(|v| v.to_string()));
        opt("replications", p.replications.map(|v| v.to_string()));
        opt("seed", p.seed.map(|v| v.to_string()));
        opt("snr", p.snr.map(|v| v.to_string()));
        opt("config", p.config.as_ref().map(|v| v.display().to_string()));
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_text() {
        let p = Params::from_text("# comment\nsigma = 2\nepsilon=0.5 # trailing\n\nformat = json-lines\nmax-subdivisions = 50\n")
            .unwrap();
        assert_eq!(p.sigma, Some(2.0));
        assert_eq!(p.epsilon, Some(0.5));
        assert_eq!(p.format, Some(Format::JsonLines));
        assert_eq!(p.max_subdivisions, Some(50));
        assert!(p.d.is_none());
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            Params::from_text("sigma 2"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            Params::from_text("colour = red"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            Params::from_text("sigma = abc"),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn flags_override_file() {
        let file = Params::from_text("sigma = 2\nepsilon = 0.5\nseed = 4").unwrap();
        let flags = Params {
            epsilon: Some(0.25),
            ..Params::default()
        };
        let p = flags.over(file);
        assert_eq!(p.sigma, Some(2.0));
        assert_eq!(p.epsilon, Some(0.25));
        assert_eq!(p.seed, Some(4));
    }

    #[test]
    fn defaults_and_validation() {
        let cfg = RunConfig::resolve("fisher", Params::default()).unwrap();
        assert_eq!(cfg.sigma(), 1.0);
        assert_eq!(cfg.extent(), 10.0);
        assert_eq!(cfg.format, Format::Csv);
        assert!(matches!(cfg.seed(), Err(CliError::Usage(_))));
        let neg = Params {
            sigma: Some(-1.0),
            ..Params::default()
        };
        assert!(matches!(
            RunConfig::resolve("fisher", neg),
            Err(CliError::Validation(_))
        ));
        let tol = Params {
            rel_tol: Some(0.0),
            ..Params::default()
        };
        assert!(matches!(
            RunConfig::resolve("fisher", tol),
            Err(CliError::Validation(_))
        ));
    }
}
