//! The biphoton joint position distribution and its marginals, correlation
//! measures, physical helpers, and seeded event sampling.
//!
//! With `u = x1 + x2` and `v = x1 − x2` the joint density factorizes into
//! `u ~ N(2d, ε²)` and `v ~ N(0, σ²)`; sampling and the quantum Fisher
//! information both work in those coordinates.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the biphoton position distribution.
///
/// `sigma` is the pump waist (spread of `x1 − x2`), `epsilon` the correlation
/// width (spread of `x1 + x2`) and `d` the displacement being estimated.
/// `epsilon = 0` is the delta-correlation limit: it can be represented and
/// sampled, but has no joint density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiphotonModel {
    sigma: f64,
    epsilon: f64,
    d: f64,
}

impl BiphotonModel {
    pub fn new(sigma: f64, epsilon: f64, d: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be non-negative, got {epsilon}"
            )));
        }
        if !d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "d must be finite, got {d}"
            )));
        }
        Ok(Self { sigma, epsilon, d })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Same correlation structure, different displacement.
    pub fn with_d(&self, d: f64) -> Result<Self> {
        Self::new(self.sigma, self.epsilon, d)
    }

    pub fn is_delta_limit(&self) -> bool {
        self.epsilon == 0.0
    }

    pub(crate) fn require_finite_epsilon(&self, what: &'static str) -> Result<()> {
        if self.is_delta_limit() {
            Err(Error::DeltaLimit(what))
        } else {
            Ok(())
        }
    }

    /// `σ² + ε²`, the combination that sets every marginal quantity.
    pub fn width_sq(&self) -> f64 {
        self.sigma * self.sigma + self.epsilon * self.epsilon
    }

    pub fn sum_diff(&self) -> SumDiffDecomposition {
        SumDiffDecomposition {
            u_mean: 2.0 * self.d,
            u_std: self.epsilon,
            v_mean: 0.0,
            v_std: self.sigma,
        }
    }

    /// Joint density `p(x1, x2 | d)`.
    pub fn joint_pdf(&self, x1: f64, x2: f64) -> Result<f64> {
        self.require_finite_epsilon("joint_pdf")?;
        let (s, e) = (self.sigma, self.epsilon);
        let diff = x1 - x2;
        let sum = x1 + x2 - 2.0 * self.d;
        Ok((-diff * diff / (2.0 * s * s) - sum * sum / (2.0 * e * e)).exp() / (PI * s * e))
    }

    /// Density of either photon alone: normal with mean `d`, variance `(ε²+σ²)/4`.
    pub fn marginal_pdf(&self, x: f64) -> f64 {
        let w = self.width_sq();
        let r = x - self.d;
        (2.0 / (PI * w)).sqrt() * (-2.0 * r * r / w).exp()
    }

    pub fn marginal_std(&self) -> f64 {
        0.5 * self.width_sq().sqrt()
    }

    /// Pearson correlation of `x1` and `x2`: `(ε² − σ²)/(ε² + σ²)`.
    pub fn correlation_coefficient(&self) -> f64 {
        let (s2, e2) = (self.sigma * self.sigma, self.epsilon * self.epsilon);
        (e2 - s2) / (e2 + s2)
    }

    pub fn sample_pair(&self, rng: &mut RandomStream) -> PhotonPair {
        self.sum_diff().sample(rng)
    }

    /// Independent photons needed classically to match `nu` pairs: `2ν σ²/ε²`.
    pub fn classical_resource_equivalent(&self, nu: f64) -> Result<f64> {
        self.require_finite_epsilon("classical_resource_equivalent")?;
        if !(nu >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nu must be non-negative, got {nu}"
            )));
        }
        Ok(2.0 * nu * self.sigma * self.sigma / (self.epsilon * self.epsilon))
    }
}

/// One coincidence event: transverse positions of both photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonPair {
    pub x1: f64,
    pub x2: f64,
}

impl PhotonPair {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn mean_position(&self) -> f64 {
        0.5 * (self.x1 + self.x2)
    }
}

/// Independent sum and difference coordinates, `u = x1 + x2`, `v = x1 − x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumDiffDecomposition {
    pub u_mean: f64,
    pub u_std: f64,
    pub v_mean: f64,
    pub v_std: f64,
}

impl SumDiffDecomposition {
    pub fn to_pair(u: f64, v: f64) -> PhotonPair {
        PhotonPair::new(0.5 * (u + v), 0.5 * (u - v))
    }

    /// Draw `(u, v)` and map back. Takes the two standard normal variates in a
    /// fixed order so a stream always yields the same pairs.
    pub fn sample(&self, rng: &mut RandomStream) -> PhotonPair {
        let zu = rng.standard_normal();
        let zv = rng.standard_normal();
        self.pair_from_normals(zu, zv)
    }

    pub fn pair_from_normals(&self, zu: f64, zv: f64) -> PhotonPair {
        Self::to_pair(self.u_mean + self.u_std * zu, self.v_mean + self.v_std * zv)
    }
}

/// Smallest attainable correlation width for a crystal of width `w` pumped at
/// wavelength `lambda_p`: `√(9 w λp / 10π)`.
pub fn epsilon_min(crystal_width: f64, pump_wavelength: f64) -> Result<f64> {
    if !(crystal_width >= 0.0) || !(pump_wavelength > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need w >= 0 and lambda_p > 0, got ({crystal_width}, {pump_wavelength})"
        )));
    }
    Ok((9.0 * crystal_width * pump_wavelength / (10.0 * PI)).sqrt())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded, counter-based random stream (ChaCha8).
///
/// Parallel work gets one [`RandomStream::substream`] per `(experiment, index)`
/// so results never depend on scheduling. A stream must not be shared between
/// threads.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0, 0)
    }

    pub fn substream(seed: u64, experiment: u64, index: u64) -> Self {
        let key = splitmix64(seed ^ splitmix64(experiment));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(index);
        Self { rng }
    }

    /// Ziggurat standard normal variate.
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
