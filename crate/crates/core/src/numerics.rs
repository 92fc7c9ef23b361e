//! Special functions and deterministic quadrature.
//!
//! Everything here is pure and reentrant. The adaptive integrator is a global
//! Gauss–Kronrod (7/15) scheme with interval bisection; infinite limits are
//! mapped onto a finite domain before integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standardized normal arguments beyond this magnitude contribute nothing
/// representable (the density is below 1e-305).
const Z_CUT: f64 = 37.5;

/// Tolerances and budget for [`integrate_1d`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same budget with the absolute floor dropped to 1e-300, so that tiny
    /// probabilities keep their significant digits.
    pub fn relative_only(self) -> Self {
        Self {
            abs_tol: 1e-300,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if !(self.abs_tol >= 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "abs_tol must be non-negative, got {}",
                self.abs_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidParameter(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle `[x_lo, x_hi] × [y_lo, y_hi]`; bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let ok = |lo: f64, hi: f64| !lo.is_nan() && !hi.is_nan() && lo < hi;
        if !ok(x_lo, x_hi) || !ok(y_lo, y_hi) {
            return Err(Error::InvalidParameter(format!(
                "degenerate rectangle [{x_lo}, {x_hi}] x [{y_lo}, {y_hi}]"
            )));
        }
        Ok(Self {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        })
    }

    pub fn plane() -> Self {
        Self {
            x_lo: f64::NEG_INFINITY,
            x_hi: f64::INFINITY,
            y_lo: f64::NEG_INFINITY,
            y_hi: f64::INFINITY,
        }
    }

    /// The same rectangle with the coordinates exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            x_lo: self.y_lo,
            x_hi: self.y_hi,
            y_lo: self.x_lo,
            y_hi: self.x_hi,
        }
    }
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `Φ(b) − Φ(a)` for `a ≤ b`, evaluated on whichever tail keeps relative accuracy.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a >= 0.0 {
        0.5 * (erfc(a * FRAC_1_SQRT_2) - erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * FRAC_1_SQRT_2) - erfc(-a * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * erfc(b * FRAC_1_SQRT_2) - 0.5 * erfc(-a * FRAC_1_SQRT_2)
    }
}

// 15-point Kronrod abscissae on [-1, 1] (non-negative half, descending) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// 7-point Gauss weights for the odd-indexed Kronrod nodes and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_centre = f(centre);

    let mut kronrod = f_centre * WGK[7];
    let mut gauss = f_centre * WG[3];
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (f_centre - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let scale = half.abs();
    let value = kronrod * half;
    res_abs *= scale;
    res_asc *= scale;

    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }

    Segment { a, b, value, error }
}

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral> {
    let first = gauss_kronrod_15(f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 0;

    loop {
        if !value.is_finite() || error.is_nan() {
            return Err(Error::Domain(format!(
                "integrand is not finite on [{a}, {b}]"
            )));
        }
        let tol = spec.abs_tol.max(spec.rel_tol * value.abs());
        if error <= tol {
            return Ok(Integral {
                value,
                error,
                subdivisions,
            });
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::NonConvergence {
                subdivisions,
                estimate: value,
                error,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval collapsed to adjacent floats; nothing more to gain.
            return Err(Error::NonConvergence {
                subdivisions,
                estimate: value,
                error,
            });
        }
        let left = gauss_kronrod_15(f, worst.a, mid);
        let right = gauss_kronrod_15(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;

        // Re-sum occasionally so the running totals do not drift.
        if subdivisions % 32 == 0 {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
}

/// Adaptive integral with error information. Handles infinite limits by the
/// substitutions `x = t/(1−t²)`, `x = a + t/(1−t)` and `x = b − (1−t)/t`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    spec.validate()?;
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidParameter("NaN integration limit".into()));
    }
    if lo == hi {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    if lo > hi {
        let r = integrate_adaptive(f, hi, lo, spec)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }

    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(&f, lo, hi, spec),
        (false, false) => {
            let g = |t: f64| {
                let q = 1.0 - t * t;
                let x = t / q;
                f(x) * (1.0 + t * t) / (q * q)
            };
            adaptive(&g, -1.0, 1.0, spec)
        }
        (true, false) => {
            let g = |t: f64| {
                let q = 1.0 - t;
                f(lo + t / q) / (q * q)
            };
            adaptive(&g, 0.0, 1.0, spec)
        }
        (false, true) => {
            let g = |t: f64| f(hi - (1.0 - t) / t) / (t * t);
            adaptive(&g, 0.0, 1.0, spec)
        }
    }
}

/// `∫_lo^hi f(x) dx` to within `max(abs_tol, rel_tol·|result|)`.
pub fn integrate_1d<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    integrate_adaptive(f, lo, hi, spec).map(|r| r.value)
}

/// Probability that a bivariate normal with means `(mu1, mu2)`, standard
/// deviations `(s1, s2)` and correlation `rho` falls inside `rect`.
///
/// Conditions the second coordinate on the first, leaving a one-dimensional
/// integral of `φ(z)·[Φ(b(z)) − Φ(a(z))]`. The integration range is trimmed to
/// where the integrand is representable and split at the conditional step
/// locations so that narrow ridges (|rho| near 1) are never stepped over.
pub fn bvn_rect_prob(
    mu1: f64,
    mu2: f64,
    s1: f64,
    s2: f64,
    rho: f64,
    rect: &Rect,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "standard deviations must be positive and finite, got ({s1}, {s2})"
        )));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "correlation must satisfy |rho| < 1, got {rho}"
        )));
    }
    if !mu1.is_finite() || !mu2.is_finite() {
        return Err(Error::InvalidParameter("means must be finite".into()));
    }

    let mut a = ((rect.x_lo - mu1) / s1).max(-Z_CUT);
    let mut b = ((rect.x_hi - mu1) / s1).min(Z_CUT);
    let w_lo = (rect.y_lo - mu2) / s2;
    let w_hi = (rect.y_hi - mu2) / s2;
    let c = ((1.0 - rho) * (1.0 + rho)).sqrt();

    let mut breaks = vec![0.0];
    if rho != 0.0 {
        // Outside these limits the conditional interval lies beyond Z_CUT.
        let lower = (w_lo - Z_CUT * c) / rho;
        let upper = (w_hi + Z_CUT * c) / rho;
        let (zmin, zmax) = if rho > 0.0 {
            (lower, upper)
        } else {
            (upper, lower)
        };
        a = a.max(zmin);
        b = b.min(zmax);
        breaks.push(w_lo / rho);
        breaks.push(w_hi / rho);
    }
    if !(a < b) {
        return Ok(0.0);
    }

    let mut nodes = vec![a];
    nodes.extend(
        breaks
            .into_iter()
            .filter(|z| z.is_finite() && *z > a && *z < b),
    );
    nodes.push(b);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    let integrand =
        |z: f64| normal_pdf(z) * normal_interval((w_lo - rho * z) / c, (w_hi - rho * z) / c);
    let mut total = 0.0;
    for w in nodes.windows(2) {
        total += integrate_1d(integrand, w[0], w[1], spec)?;
    }
    Ok(total.clamp(0.0, 1.0))
}
