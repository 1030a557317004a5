//! Closed-form central-DP accounting for random check-in protocols.
//!
//! Every amplification bound (fixed window, sliding window, averaged
//! updates, shuffling, swapping, random replacement, bins) and every
//! composition formula (heterogeneous advanced composition, its closed-form
//! relaxation, classical advanced composition, epoch repetition) is a pure
//! function of its parameters.  All fast-path arithmetic is 64-bit floating
//! point with `exp_m1`-style evaluation to avoid cancellation at small
//! `eps0`; frozen reference values in the tests come from an independent
//! 60-digit evaluation of the same expressions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// A central differential privacy guarantee (epsilon, delta).
///
/// `vacuous` records whether epsilon failed to improve on the reference
/// local epsilon it was compared against (the grey-line convention of the
/// amplification plots).  Bounds produced by the amplification operations
/// set the flag automatically: against `eps0` on the pure branch and
/// against `8 * eps0` on the approximate branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyPair {
    pub epsilon: f64,
    pub delta: f64,
    pub vacuous: bool,
}

impl PrivacyPair {
    /// Build a pair, validating `epsilon >= 0` and `delta` in [0, 1].
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::invalid(
                "epsilon",
                format!("must be a finite nonnegative real, got {epsilon}"),
            ));
        }
        if !delta.is_finite() || !(0.0..=1.0).contains(&delta) {
            return Err(Error::invalid(
                "delta",
                format!("must lie in [0, 1], got {delta}"),
            ));
        }
        Ok(PrivacyPair {
            epsilon,
            delta,
            vacuous: false,
        })
    }

    /// Flag the pair as vacuous relative to a caller-supplied reference
    /// epsilon (vacuous iff `epsilon >= reference`).
    pub fn with_vacuous_reference(mut self, reference_eps0: f64) -> Self {
        self.vacuous = self.epsilon >= reference_eps0;
        self
    }
}

/// Local randomizer parameters (eps0, delta0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSpec {
    pub epsilon0: f64,
    pub delta0: f64,
}

impl LocalSpec {
    /// A pure eps0-DP local randomizer.
    pub fn pure(epsilon0: f64) -> Result<Self> {
        Self::new(epsilon0, 0.0)
    }

    /// An (eps0, delta0)-DP local randomizer.  Bounds consuming a spec with
    /// `delta0 > 0` check the conversion threshold before use.
    pub fn new(epsilon0: f64, delta0: f64) -> Result<Self> {
        if !epsilon0.is_finite() || epsilon0 < 0.0 {
            return Err(Error::invalid(
                "epsilon0",
                format!("must be a finite nonnegative real, got {epsilon0}"),
            ));
        }
        if !delta0.is_finite() || !(0.0..1.0).contains(&delta0) {
            return Err(Error::invalid(
                "delta0",
                format!("must lie in [0, 1), got {delta0}"),
            ));
        }
        Ok(LocalSpec { epsilon0, delta0 })
    }
}

/// Parameters of the fixed-window check-in protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedWindowParams {
    /// Number of clients.
    pub n: u64,
    /// Number of time slots (the shared check-in window).
    pub m: u64,
    /// Per-client check-in probability.
    pub p0: f64,
    /// Target delta of the amplified guarantee.
    pub delta: f64,
    /// Total-variation budget per randomizer call; required iff the paired
    /// local spec has `delta0 > 0`.
    pub delta1: Option<f64>,
}

impl FixedWindowParams {
    pub fn new(n: u64, m: u64, p0: f64, delta: f64, delta1: Option<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if m == 0 {
            return Err(Error::invalid("m", "must be at least 1"));
        }
        if !p0.is_finite() || !(0.0..=1.0).contains(&p0) {
            return Err(Error::invalid("p0", format!("must lie in [0, 1], got {p0}")));
        }
        validate_open_unit("delta", delta)?;
        if let Some(d1) = delta1 {
            validate_open_unit("delta1", d1)?;
        }
        Ok(FixedWindowParams {
            n,
            m,
            p0,
            delta,
            delta1,
        })
    }
}

/// Parameters of the averaged-updates check-in protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvgParams {
    pub n: u64,
    pub m: u64,
    /// Target delta of the amplified guarantee.
    pub delta: f64,
    /// Failure probability of the bin-load conditioning event.
    pub delta2: f64,
    pub delta1: Option<f64>,
}

impl AvgParams {
    pub fn new(n: u64, m: u64, delta: f64, delta2: f64, delta1: Option<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if m == 0 {
            return Err(Error::invalid("m", "must be at least 1"));
        }
        validate_open_unit("delta", delta)?;
        validate_open_unit("delta2", delta2)?;
        if let Some(d1) = delta1 {
            validate_open_unit("delta1", d1)?;
        }
        Ok(AvgParams {
            n,
            m,
            delta,
            delta2,
            delta1,
        })
    }
}

/// An ordered list of per-mechanism epsilons for heterogeneous composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionSchedule {
    eps: Vec<f64>,
}

impl CompositionSchedule {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::invalid("eps_list", "must be nonempty"));
        }
        for (i, &e) in eps.iter().enumerate() {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::invalid(
                    "eps_list",
                    format!("entry {i} must be a finite nonnegative real, got {e}"),
                ));
            }
        }
        Ok(CompositionSchedule { eps })
    }

    pub fn entries(&self) -> &[f64] {
        &self.eps
    }

    /// The per-step schedule from the fixed-window analysis:
    /// `eps_i = log(1 + w_max e^{eps0}(e^{eps0}-1) / (i-1 + e^{eps0}(m-i+1)))`.
    pub fn fixed_window(epsilon0: f64, m: u64, w_max: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "must be at least 1"));
        }
        let e = epsilon0.exp();
        let em1 = epsilon0.exp_m1();
        let eps = (1..=m)
            .map(|i| {
                let i = i as f64;
                let m = m as f64;
                (w_max * e * em1 / (i - 1.0 + e * (m - i + 1.0))).ln_1p()
            })
            .collect();
        Self::new(eps)
    }
}

/// Bin sizes for the bins protocol; entries must sum to the dataset size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSizes {
    ell: Vec<u64>,
    n: u64,
}

impl BinSizes {
    pub fn new(ell: Vec<u64>, n: u64) -> Result<Self> {
        if ell.is_empty() {
            return Err(Error::invalid("ell", "must be nonempty"));
        }
        let sum: u64 = ell.iter().sum();
        if sum != n {
            return Err(Error::invalid(
                "ell",
                format!("bin sizes sum to {sum}, expected n = {n}"),
            ));
        }
        Ok(BinSizes { ell, n })
    }

    pub fn sizes(&self) -> &[u64] {
        &self.ell
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn l2_norm(&self) -> f64 {
        self.ell
            .iter()
            .map(|&l| (l as f64) * (l as f64))
            .sum::<f64>()
            .sqrt()
    }
}

fn validate_open_unit(name: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 || x >= 1.0 {
        return Err(Error::invalid(name, format!("must lie in (0, 1), got {x}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Pure/approximate branch selection
// ---------------------------------------------------------------------------

enum Branch {
    Pure,
    Approximate { delta1: f64 },
}

impl Branch {
    /// The effective local epsilon the bound formula sees: `eps0` on the
    /// pure branch, `8 * eps0` after conversion on the approximate branch.
    fn effective_eps0(&self, spec: &LocalSpec) -> f64 {
        match self {
            Branch::Pure => spec.epsilon0,
            Branch::Approximate { .. } => 8.0 * spec.epsilon0,
        }
    }
}

/// Decide the branch and gate the approximate one on the admissibility
/// threshold for `delta0`.
fn select_branch(spec: &LocalSpec, delta1: Option<f64>) -> Result<Branch> {
    if spec.delta0 > 0.0 {
        let d1 = delta1.ok_or_else(|| {
            Error::invalid("delta1", "required when the local spec has delta0 > 0")
        })?;
        let threshold = cheu_delta_threshold(spec.epsilon0, d1)?;
        if spec.delta0 > threshold {
            return Err(Error::InadmissibleDelta0 {
                eps0: spec.epsilon0,
                delta0: spec.delta0,
                delta1: d1,
                threshold,
            });
        }
        Ok(Branch::Approximate { delta1: d1 })
    } else if delta1.is_some() {
        Err(Error::invalid(
            "delta1",
            "only meaningful when the local spec has delta0 > 0",
        ))
    } else {
        Ok(Branch::Pure)
    }
}

fn log_inv(delta: f64) -> f64 {
    -delta.ln()
}

// ---------------------------------------------------------------------------
// Amplification bounds
// ---------------------------------------------------------------------------

/// Shared two-term bound for one random replacement among `m` slots with
/// maximum replacement weight `w_max`.  The fixed-window bound is the
/// `w_max = p0` instance and the sliding-window bound the `w_max = 1`
/// instance, so both delegate here and agree with it bit for bit.
fn replacement_epsilon(eps0: f64, m: u64, w_max: f64, delta: f64) -> f64 {
    let m = m as f64;
    let e = eps0.exp();
    let em1 = eps0.exp_m1();
    w_max * w_max * e * em1 * em1 / (2.0 * m)
        + w_max * em1 * (2.0 * e * log_inv(delta) / m).sqrt()
}

/// Amplification via one random replacement.
pub fn replacement_bound(
    spec: &LocalSpec,
    m: u64,
    w_max: f64,
    delta: f64,
    delta1: Option<f64>,
) -> Result<PrivacyPair> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    if !w_max.is_finite() || !(0.0..=1.0).contains(&w_max) {
        return Err(Error::invalid(
            "w_max",
            format!("must lie in [0, 1], got {w_max}"),
        ));
    }
    validate_open_unit("delta", delta)?;
    let branch = select_branch(spec, delta1)?;
    let eff = branch.effective_eps0(spec);
    let eps = replacement_epsilon(eff, m, w_max, delta);
    let delta_total = match branch {
        Branch::Pure => delta,
        Branch::Approximate { delta1 } => delta + (m as f64) * (eps.exp() + 1.0) * delta1,
    };
    Ok(PrivacyPair::new(eps, delta_total)?.with_vacuous_reference(eff))
}

/// Amplification via random check-ins into a fixed window.
pub fn fixed_window_bound(spec: &LocalSpec, params: &FixedWindowParams) -> Result<PrivacyPair> {
    replacement_bound(spec, params.m, params.p0, params.delta, params.delta1)
}

/// Simplified fixed-window bound `7 p0 eps0 sqrt(log(1/delta)/m)`, valid
/// for `eps0 <= 1`, `delta <= 1/100`, pure local randomizers.
pub fn fixed_window_simplified(spec: &LocalSpec, params: &FixedWindowParams) -> Result<PrivacyPair> {
    if spec.delta0 > 0.0 {
        return Err(Error::Precondition(
            "simplified bound requires a pure local randomizer (delta0 = 0)".into(),
        ));
    }
    if params.delta1.is_some() {
        return Err(Error::invalid(
            "delta1",
            "only meaningful when the local spec has delta0 > 0",
        ));
    }
    if spec.epsilon0 > 1.0 {
        return Err(Error::Precondition(format!(
            "simplified bound requires eps0 <= 1, got {}",
            spec.epsilon0
        )));
    }
    if params.delta > 0.01 {
        return Err(Error::Precondition(format!(
            "simplified bound requires delta <= 1/100, got {}",
            params.delta
        )));
    }
    let eps =
        7.0 * params.p0 * spec.epsilon0 * (log_inv(params.delta) / params.m as f64).sqrt();
    Ok(PrivacyPair::new(eps, params.delta)?.with_vacuous_reference(spec.epsilon0))
}

/// Amplification via random check-ins with sliding windows of width `m`
/// over a horizon of `n` clients.
pub fn sliding_window_bound(
    spec: &LocalSpec,
    n: u64,
    m: u64,
    delta: f64,
    delta1: Option<f64>,
) -> Result<PrivacyPair> {
    if m == 0 || m > n {
        return Err(Error::invalid(
            "m",
            format!("window must satisfy 1 <= m <= n, got m = {m}, n = {n}"),
        ));
    }
    replacement_bound(spec, m, 1.0, delta, delta1)
}

fn swap_epsilon(eps0: f64, n: u64, delta: f64) -> f64 {
    let n = n as f64;
    let em1 = eps0.exp_m1();
    (3.0 * eps0).exp() * em1 * em1 / (2.0 * n)
        + (1.5 * eps0).exp() * em1 * (2.0 * log_inv(delta) / n).sqrt()
}

/// Amplification by swapping the first element with a uniformly random one.
pub fn swap_bound(spec: &LocalSpec, n: u64, delta: f64, delta1: Option<f64>) -> Result<PrivacyPair> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    validate_open_unit("delta", delta)?;
    let branch = select_branch(spec, delta1)?;
    let eff = branch.effective_eps0(spec);
    let eps = swap_epsilon(eff, n, delta);
    let delta_total = match branch {
        Branch::Pure => delta,
        Branch::Approximate { delta1 } => delta + (n as f64) * (eps.exp() + 1.0) * delta1,
    };
    Ok(PrivacyPair::new(eps, delta_total)?.with_vacuous_reference(eff))
}

/// Amplification by shuffling, via the reduction to swapping; identical to
/// [`swap_bound`] by construction.
pub fn shuffle_bound_new(
    spec: &LocalSpec,
    n: u64,
    delta: f64,
    delta1: Option<f64>,
) -> Result<PrivacyPair> {
    swap_bound(spec, n, delta, delta1)
}

/// The earlier shuffling guarantee, quoted for comparison; pure local
/// randomizers only.
pub fn shuffle_bound_old(spec: &LocalSpec, n: u64, delta: f64) -> Result<PrivacyPair> {
    if spec.delta0 > 0.0 {
        return Err(Error::Precondition(
            "comparison bound is stated for pure local randomizers (delta0 = 0)".into(),
        ));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    validate_open_unit("delta", delta)?;
    let t = 2.0 * (2.0 * spec.epsilon0).exp() * spec.epsilon0.exp_m1();
    let eps = t * (t / n as f64).exp_m1() + t * (2.0 * log_inv(delta) / n as f64).sqrt();
    Ok(PrivacyPair::new(eps, delta)?.with_vacuous_reference(spec.epsilon0))
}

/// Amplification via random check-ins with averaged updates.
pub fn avg_bound(spec: &LocalSpec, params: &AvgParams) -> Result<PrivacyPair> {
    let branch = select_branch(spec, params.delta1)?;
    let eff = branch.effective_eps0(spec);
    let n = params.n as f64;
    let m = params.m as f64;
    let eps1 = (1.0 / n + 1.0 / m).sqrt() + (log_inv(params.delta2) / n).sqrt();
    let em1 = eff.exp_m1();
    let eps = (4.0 * eff).exp() * em1 * em1 * eps1 * eps1 / 2.0
        + (2.0 * eff).exp() * em1 * eps1 * (2.0 * log_inv(params.delta)).sqrt();
    let delta_total = match branch {
        Branch::Pure => params.delta + params.delta2,
        Branch::Approximate { delta1 } => {
            params.delta + params.delta2 + m * (eps.exp() + 1.0) * delta1
        }
    };
    Ok(PrivacyPair::new(eps, delta_total)?.with_vacuous_reference(eff))
}

/// Central guarantee at index 1 of the bins protocol after one random swap.
pub fn bin_sgd_bound(
    spec: &LocalSpec,
    bins: &BinSizes,
    delta: f64,
    delta1: Option<f64>,
) -> Result<PrivacyPair> {
    validate_open_unit("delta", delta)?;
    let branch = select_branch(spec, delta1)?;
    let eff = branch.effective_eps0(spec);
    let n = bins.n() as f64;
    let l2 = bins.l2_norm();
    let em1 = eff.exp_m1();
    let eps = l2 * l2 * (4.0 * eff).exp() * em1 * em1 / (2.0 * n * n)
        + l2 * (2.0 * eff).exp() * em1 * (2.0 * log_inv(delta)).sqrt() / n;
    let delta_total = match branch {
        Branch::Pure => delta,
        Branch::Approximate { delta1 } => {
            delta + (bins.sizes().len() as f64) * (eps.exp() + 1.0) * delta1
        }
    };
    Ok(PrivacyPair::new(eps, delta_total)?.with_vacuous_reference(eff))
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

/// Closed-form k-fold adaptive composition for per-step budgets
/// `eps_i <= log(1 + a / (k - b(i-1)))`:
/// `eps = a^2 / (2k(1-b)) + sqrt(2 a^2 log(1/delta) / (k(1-b)))`.
pub fn het_composition(a: f64, b: f64, k: u64, delta: f64) -> Result<PrivacyPair> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::invalid("a", format!("must be positive, got {a}")));
    }
    if !b.is_finite() || b <= 0.0 || b >= 1.0 {
        return Err(Error::invalid("b", format!("must lie in (0, 1), got {b}")));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    validate_open_unit("delta", delta)?;
    let k = k as f64;
    let eps = a * a / (2.0 * k * (1.0 - b)) + (2.0 * a * a * log_inv(delta) / (k * (1.0 - b))).sqrt();
    PrivacyPair::new(eps, delta)
}

/// Heterogeneous advanced composition:
/// `eps = sum_i (e^{eps_i}-1) eps_i / (e^{eps_i}+1) + sqrt(2 log(1/delta) sum_i eps_i^2)`.
pub fn kov_composition(schedule: &CompositionSchedule, delta: f64) -> Result<PrivacyPair> {
    validate_open_unit("delta", delta)?;
    let mut linear = 0.0;
    let mut squares = 0.0;
    for &e in schedule.entries() {
        linear += e.exp_m1() * e / (e.exp() + 1.0);
        squares += e * e;
    }
    let eps = linear + (2.0 * log_inv(delta) * squares).sqrt();
    PrivacyPair::new(eps, delta)
}

/// Classical advanced composition of `k` copies of a per-step guarantee:
/// `eps = eps1 sqrt(2k log(1/delta_slack)) + k eps1 (e^{eps1}-1)`,
/// `delta = k delta1 + delta_slack`.
pub fn advanced_composition(
    per_step: &PrivacyPair,
    k: u64,
    delta_slack: f64,
) -> Result<PrivacyPair> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    validate_open_unit("delta_slack", delta_slack)?;
    let e1 = per_step.epsilon;
    let kf = k as f64;
    let eps = e1 * (2.0 * kf * log_inv(delta_slack)).sqrt() + kf * e1 * e1.exp_m1();
    PrivacyPair::new(eps, kf * per_step.delta + delta_slack)
}

/// Guarantee for `floor(n/m)` adaptive repetitions of the fixed-window
/// protocol at `p0 = m/n`, composed via [`advanced_composition`].
///
/// When `m` does not divide `n` the trailing `n mod m` update budget is
/// dropped: only `floor(n/m)` repetitions run and the leftover clients do
/// not participate.
pub fn epoch_composition(
    spec: &LocalSpec,
    n: u64,
    m: u64,
    beta_fail: f64,
    delta_slack: f64,
) -> Result<PrivacyPair> {
    if spec.delta0 > 0.0 {
        return Err(Error::Precondition(
            "epoch composition is stated for pure local randomizers (delta0 = 0)".into(),
        ));
    }
    if m == 0 || n < m {
        return Err(Error::invalid(
            "m",
            format!("must satisfy 1 <= m <= n, got m = {m}, n = {n}"),
        ));
    }
    validate_open_unit("beta_fail", beta_fail)?;
    validate_open_unit("delta_slack", delta_slack)?;
    let nf = n as f64;
    let mf = m as f64;
    let eps0_cap = 2.0 / 3.0 * (nf / (8.0 * mf.sqrt())).ln();
    if spec.epsilon0 > eps0_cap {
        return Err(Error::Precondition(format!(
            "requires eps0 <= (2/3) log(n / (8 sqrt(m))) = {eps0_cap}, got eps0 = {}",
            spec.epsilon0
        )));
    }
    let em1 = spec.epsilon0.exp_m1();
    let n_floor = em1 * em1 * spec.epsilon0.exp() * mf.sqrt() * log_inv(beta_fail);
    if nf < n_floor {
        return Err(Error::Precondition(format!(
            "requires n >= (e^eps0 - 1)^2 e^eps0 sqrt(m) log(1/beta) = {n_floor}, got n = {n}"
        )));
    }
    let p0 = mf / nf;
    let per_step = fixed_window_bound(
        spec,
        &FixedWindowParams::new(n, m, p0, beta_fail, None)?,
    )?;
    let reps = n / m;
    Ok(advanced_composition(&per_step, reps, delta_slack)?
        .with_vacuous_reference(spec.epsilon0))
}

// ---------------------------------------------------------------------------
// Supporting formulas
// ---------------------------------------------------------------------------

/// Largest `delta0` admitting conversion of an (eps0, delta0)-DP randomizer
/// into an `8 eps0`-DP one within total-variation distance `delta1`:
/// `(1 - e^{-eps0}) delta1 / (4 e^{eps0} (2 + ln(2/delta1) / ln(1/(1 - e^{-5 eps0}))))`.
pub fn cheu_delta_threshold(epsilon0: f64, delta1: f64) -> Result<f64> {
    if !epsilon0.is_finite() || epsilon0 < 0.0 {
        return Err(Error::invalid(
            "epsilon0",
            format!("must be a finite nonnegative real, got {epsilon0}"),
        ));
    }
    validate_open_unit("delta1", delta1)?;
    let one_minus = -(-epsilon0).exp_m1(); // 1 - e^{-eps0}
    let tail = (2.0f64 / delta1).ln() / (1.0 / -(-5.0 * epsilon0).exp_m1()).ln();
    Ok(one_minus * delta1 / (4.0 * epsilon0.exp() * (2.0 + tail)))
}

/// Worst-case ratio `e^{eps0} / (1 + q(e^{eps0}-1))` between a randomizer
/// run on a fixed record and on a `q`-biased sample containing it.
pub fn biased_sampling_ratio(epsilon0: f64, q: f64) -> Result<f64> {
    if !epsilon0.is_finite() || epsilon0 < 0.0 {
        return Err(Error::invalid(
            "epsilon0",
            format!("must be a finite nonnegative real, got {epsilon0}"),
        ));
    }
    if !q.is_finite() || !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("q", format!("must lie in [0, 1], got {q}")));
    }
    Ok(epsilon0.exp() / (1.0 + q * epsilon0.exp_m1()))
}

/// Posterior bound `q_i <= e^{eps0} / (i-1 + e^{eps0}(m-i+1))` on the
/// planted index in the replacement analysis.
pub fn posterior_bound_fixed(epsilon0: f64, m: u64, i: u64) -> Result<f64> {
    if i == 0 || i > m {
        return Err(Error::invalid(
            "i",
            format!("must lie in [1, m] with m = {m}, got {i}"),
        ));
    }
    let e = epsilon0.exp();
    let (i, m) = (i as f64, m as f64);
    Ok(e / (i - 1.0 + e * (m - i + 1.0)))
}

/// Posterior bound `q_i <= e^{2 eps0} / (e^{2 eps0} + i-1 + (n-i) e^{eps0})`
/// on the swapped index in the swapping analysis.
pub fn posterior_bound_swap(epsilon0: f64, n: u64, i: u64) -> Result<f64> {
    if i == 0 || i > n {
        return Err(Error::invalid(
            "i",
            format!("must lie in [1, n] with n = {n}, got {i}"),
        ));
    }
    let e = epsilon0.exp();
    let e2 = (2.0 * epsilon0).exp();
    let (i, n) = (i as f64, n as f64);
    Ok(e2 / (e2 + i - 1.0 + (n - i) * e))
}

/// Expected dummy updates of the fixed-window protocol: `m (1 - p0/m)^n`.
pub fn expected_dummy_fixed(n: u64, m: u64, p0: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    if !p0.is_finite() || !(0.0..=1.0).contains(&p0) {
        return Err(Error::invalid("p0", format!("must lie in [0, 1], got {p0}")));
    }
    Ok(m as f64 * ((n as f64) * (-p0 / m as f64).ln_1p()).exp())
}

/// Expected dummy updates of the sliding-window protocol:
/// `(n - m + 1)(1 - 1/m)^m`.
pub fn expected_dummy_sliding(n: u64, m: u64) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::invalid(
            "m",
            format!("must satisfy 1 <= m <= n, got m = {m}, n = {n}"),
        ));
    }
    let mf = m as f64;
    Ok((n - m + 1) as f64 * (mf * (-1.0 / mf).ln_1p()).exp())
}

/// High-probability bound on the L2 norm of bin loads when `n` clients
/// check into `m` slots uniformly: `sqrt(n + n^2/m) + sqrt(n log(1/delta))`.
pub fn bin_load_l2_bound(n: u64, m: u64, delta: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("n", "n and m must be at least 1"));
    }
    if !delta.is_finite() || delta <= 0.0 || delta > 1.0 {
        return Err(Error::invalid(
            "delta",
            format!("must lie in (0, 1], got {delta}"),
        ));
    }
    let nf = n as f64;
    Ok((nf + nf * nf / m as f64).sqrt() + (nf * log_inv(delta)).sqrt())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
