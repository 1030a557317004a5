//! Local randomizers: finite-alphabet mechanisms for the exhaustive oracle
//! and gradient randomizers (clip + noise) for the protocol simulator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::LocalSpec;
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// DiscreteMechanism
// ---------------------------------------------------------------------------

/// A mechanism over finite ordered input/output sets, given as a
/// row-stochastic table `table[input][output] = Pr[output | input]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMechanism {
    table: Vec<Vec<f64>>,
}

impl DiscreteMechanism {
    /// Validate and wrap a probability table.  Every row must sum to 1
    /// within 1e-12.
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        if table.is_empty() || table[0].is_empty() {
            return Err(Error::invalid("table", "must have at least one row and column"));
        }
        let width = table[0].len();
        for (i, row) in table.iter().enumerate() {
            if row.len() != width {
                return Err(Error::invalid("table", format!("row {i} is not length {width}")));
            }
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::invalid(
                        "table",
                        format!("row {i} contains an invalid probability {p}"),
                    ));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(
                    "table",
                    format!("row {i} sums to {sum}, expected 1 within 1e-12"),
                ));
            }
        }
        Ok(DiscreteMechanism { table })
    }

    /// Binary randomized response with `Pr[keep] = e^{eps0} / (1 + e^{eps0})`.
    /// The measured epsilon of the table equals the target up to float
    /// rounding.
    pub fn randomized_response(epsilon0: f64) -> Result<Self> {
        if !epsilon0.is_finite() || epsilon0 <= 0.0 {
            return Err(Error::invalid(
                "epsilon0",
                format!("must be positive, got {epsilon0}"),
            ));
        }
        // p >= 1/2, so 1 - p is exact and each row sums to exactly 1.
        let p = 1.0 / (1.0 + (-epsilon0).exp());
        let q = 1.0 - p;
        Self::new(vec![vec![p, q], vec![q, p]])
    }

    pub fn n_inputs(&self) -> usize {
        self.table.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.table[0].len()
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.table[input]
    }

    /// The pure-DP parameter of the table: the largest
    /// `log(Pr[o|x] / Pr[o|x'])` over outputs and input pairs; infinite if
    /// some output has probability zero under one input but not another.
    pub fn measured_epsilon(&self) -> f64 {
        let mut worst = 0.0f64;
        for o in 0..self.n_outputs() {
            let mut min = f64::INFINITY;
            let mut max = 0.0f64;
            for row in &self.table {
                min = min.min(row[o]);
                max = max.max(row[o]);
            }
            if max > 0.0 {
                worst = worst.max(if min > 0.0 { (max / min).ln() } else { f64::INFINITY });
            }
        }
        worst
    }

    /// Sample an output index for the given input.
    pub fn sample<R: Rng>(&self, input: usize, rng: &mut R) -> usize {
        let row = &self.table[input];
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (o, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return o;
            }
        }
        row.len() - 1
    }
}

// ---------------------------------------------------------------------------
// GradientRandomizer
// ---------------------------------------------------------------------------

/// Noise family applied after clipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    Gaussian,
    Laplace,
}

/// Gradient clipping followed by i.i.d. per-coordinate noise.
///
/// `noise_scale` is the Gaussian standard deviation or the Laplace scale;
/// zero is permitted as the noiseless limit used by deterministic baseline
/// runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientRandomizer {
    pub clip_norm: f64,
    pub noise_scale: f64,
    pub kind: NoiseKind,
    pub dimension: usize,
}

impl GradientRandomizer {
    pub fn new(clip_norm: f64, noise_scale: f64, kind: NoiseKind, dimension: usize) -> Result<Self> {
        if !clip_norm.is_finite() || clip_norm <= 0.0 {
            return Err(Error::invalid(
                "clip_norm",
                format!("must be positive, got {clip_norm}"),
            ));
        }
        if !noise_scale.is_finite() || noise_scale < 0.0 {
            return Err(Error::invalid(
                "noise_scale",
                format!("must be nonnegative, got {noise_scale}"),
            ));
        }
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be at least 1"));
        }
        Ok(GradientRandomizer {
            clip_norm,
            noise_scale,
            kind,
            dimension,
        })
    }

    /// Laplace randomizer calibrated for eps0-DP under replace-one
    /// neighbors: per-coordinate scale `2 L sqrt(p) / eps0`.  Conservative:
    /// the L2 sensitivity `2L` is passed through the L2 -> L1 norm bound.
    pub fn laplace_for_epsilon(clip_norm: f64, dimension: usize, epsilon0: f64) -> Result<Self> {
        if !epsilon0.is_finite() || epsilon0 <= 0.0 {
            return Err(Error::invalid(
                "epsilon0",
                format!("must be positive, got {epsilon0}"),
            ));
        }
        let scale = 2.0 * clip_norm * (dimension as f64).sqrt() / epsilon0;
        Self::new(clip_norm, scale, NoiseKind::Laplace, dimension)
    }

    /// Rescale to norm at most `clip_norm`; idempotent and contractive.
    pub fn clip(&self, gradient: &[f64]) -> Vec<f64> {
        let norm = l2_norm(gradient);
        if norm > self.clip_norm {
            let s = self.clip_norm / norm;
            gradient.iter().map(|x| x * s).collect()
        } else {
            gradient.to_vec()
        }
    }

    /// Clip then add noise.  Draws no randomness when `noise_scale` is 0.
    pub fn privatize_gradient<R: Rng>(&self, gradient: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if gradient.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: gradient.len(),
            });
        }
        let mut out = self.clip(gradient);
        if self.noise_scale > 0.0 {
            match self.kind {
                NoiseKind::Gaussian => {
                    let normal = rand_distr::Normal::new(0.0, self.noise_scale)
                        .expect("validated scale");
                    for x in &mut out {
                        *x += rng.sample(normal);
                    }
                }
                NoiseKind::Laplace => {
                    for x in &mut out {
                        *x += sample_laplace(self.noise_scale, rng);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Local DP parameters of the Gaussian randomizer by the classical
    /// Gaussian-mechanism bound with replace-one sensitivity `2 clip_norm`:
    /// `eps0 = (2 L / sigma) sqrt(2 ln(1.25 / delta0))`, valid only when the
    /// result is at most 1.  (Tighter analytic calibrations exist; this one
    /// is deliberately the textbook bound.)
    pub fn gaussian_local_spec(&self, delta0: f64) -> Result<LocalSpec> {
        if self.kind != NoiseKind::Gaussian {
            return Err(Error::Precondition(
                "gaussian_local_spec applies to Gaussian randomizers".into(),
            ));
        }
        if !delta0.is_finite() || delta0 <= 0.0 || delta0 >= 1.0 {
            return Err(Error::invalid(
                "delta0",
                format!("must lie in (0, 1), got {delta0}"),
            ));
        }
        if self.noise_scale == 0.0 {
            return Err(Error::Precondition(
                "noiseless randomizer has no finite local DP parameter".into(),
            ));
        }
        let sensitivity = 2.0 * self.clip_norm;
        let eps0 = sensitivity / self.noise_scale * (2.0 * (1.25 / delta0).ln()).sqrt();
        if eps0 > 1.0 {
            return Err(Error::Precondition(format!(
                "classical Gaussian bound requires eps0 <= 1, got eps0 = {eps0}; increase sigma"
            )));
        }
        LocalSpec::new(eps0, delta0)
    }

    /// Pure local DP parameter of the calibrated Laplace randomizer.
    pub fn laplace_local_spec(&self) -> Result<LocalSpec> {
        if self.kind != NoiseKind::Laplace {
            return Err(Error::Precondition(
                "laplace_local_spec applies to Laplace randomizers".into(),
            ));
        }
        if self.noise_scale == 0.0 {
            return Err(Error::Precondition(
                "noiseless randomizer has no finite local DP parameter".into(),
            ));
        }
        let eps0 = 2.0 * self.clip_norm * (self.dimension as f64).sqrt() / self.noise_scale;
        LocalSpec::pure(eps0)
    }
}

fn sample_laplace<R: Rng>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        let t = 1.0 - 2.0 * u.abs();
        if t > 0.0 {
            return -scale * u.signum() * t.ln();
        }
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
