//! Executable simulations of the random check-in protocols (fixed window,
//! averaged updates, sliding window) and the appendix reference protocols
//! (replacement, swap, shuffle, bins).
//!
//! A single run is sequential; the RNG draw order is part of the contract:
//! clients draw their check-in choices in index order, then the server
//! processes slots in order, drawing a selection only when a slot holds
//! more than one client.  Identical (config, data, seed) therefore yields
//! an identical trace.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::BinSizes;
use crate::error::{Error, Result};
use crate::randomizers::{l2_norm, GradientRandomizer};

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

/// Per-client gradient source with model-space projection.
pub trait Objective {
    fn dimension(&self) -> usize;
    /// Dataset size: one datum per client index.
    fn n_clients(&self) -> usize;
    /// Gradient of the loss at `theta` on the given client's datum.
    fn gradient(&self, client: usize, theta: &[f64]) -> Vec<f64>;
    /// Project `theta` back onto the model space; identity if unconstrained.
    fn project(&self, theta: &mut [f64]);
}

/// Unconstrained objective with identically zero gradients; used by load
/// and dummy-count experiments where the model content is irrelevant.
#[derive(Debug, Clone)]
pub struct ZeroObjective {
    pub dimension: usize,
    pub n_clients: usize,
}

impl Objective for ZeroObjective {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn n_clients(&self) -> usize {
        self.n_clients
    }
    fn gradient(&self, _client: usize, _theta: &[f64]) -> Vec<f64> {
        vec![0.0; self.dimension]
    }
    fn project(&self, _theta: &mut [f64]) {}
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Learning-rate schedule evaluated at 1-based step indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSize {
    Constant(f64),
    /// `InvSqrt(c)` is `c / sqrt(i)`.
    InvSqrt(f64),
}

impl StepSize {
    pub fn at(&self, step: usize) -> f64 {
        debug_assert!(step >= 1);
        match *self {
            StepSize::Constant(c) => c,
            StepSize::InvSqrt(c) => c / (step as f64).sqrt(),
        }
    }
}

/// Which check-in policy the clients follow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Every client independently abstains with probability `1 - p0`, else
    /// checks into a uniform slot of the shared window.
    Fixed { p0: f64 },
    /// Client `j` checks into a uniform slot of `{j, ..., j + window - 1}`.
    Sliding { window: usize },
    /// Every client checks into a uniform slot; the server averages all
    /// checked-in updates per slot.
    Avg,
}

/// Full simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_clients: usize,
    pub n_slots: usize,
    pub batch_size: usize,
    pub policy: PolicyKind,
    pub randomizer: GradientRandomizer,
    pub step_size: StepSize,
    /// Multiply client updates by `1 / (1 - 2 e^{-n p0 / m})`; fixed-window
    /// policy only, off by default.
    pub debias: bool,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::invalid("n_slots", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        match self.policy {
            PolicyKind::Fixed { p0 } => {
                if !p0.is_finite() || !(0.0..=1.0).contains(&p0) {
                    return Err(Error::invalid("p0", format!("must lie in [0, 1], got {p0}")));
                }
            }
            PolicyKind::Sliding { window } => {
                if window == 0 || window > self.n_clients {
                    return Err(Error::invalid(
                        "window",
                        format!(
                            "must satisfy 1 <= window <= n_clients, got {window} with n = {}",
                            self.n_clients
                        ),
                    ));
                }
                if self.n_slots != self.n_clients {
                    return Err(Error::invalid(
                        "n_slots",
                        "sliding-window horizon equals the number of clients",
                    ));
                }
                if self.batch_size != 1 {
                    return Err(Error::invalid("batch_size", "sliding protocol uses unit batches"));
                }
            }
            PolicyKind::Avg => {
                if self.batch_size != 1 {
                    return Err(Error::invalid("batch_size", "averaged protocol uses unit batches"));
                }
            }
        }
        if self.debias && !matches!(self.policy, PolicyKind::Fixed { .. }) {
            return Err(Error::invalid("debias", "only defined for the fixed-window policy"));
        }
        Ok(())
    }

    /// The RNG stream owned by a run of this configuration.
    pub fn rng(&self) -> ChaCha20Rng {
        use rand::SeedableRng;
        ChaCha20Rng::seed_from_u64(self.seed)
    }
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

/// What the server recorded for one update slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    /// 1-based global slot index.
    pub slot: usize,
    /// Clients checked into this slot, in client-index order.
    pub checked_in: Vec<usize>,
    /// The client whose update was used, if any.
    pub selected: Option<usize>,
    /// Slot was empty and a dummy gradient was injected.
    pub dummy: bool,
    /// Slot was empty and skipped (averaged protocol).
    pub skipped: bool,
}

/// Full record of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub slots: Vec<SlotRecord>,
    /// Model after each server step, in step order.
    pub iterates: Vec<Vec<f64>>,
    pub dummy_count: usize,
    pub skipped_count: usize,
    /// Number of check-ins per served slot.
    pub bin_loads: Vec<usize>,
}

/// Aggregates for CSV summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub dummy_count: usize,
    pub skipped_count: usize,
    pub max_bin_load: usize,
    pub bin_load_l2: f64,
}

impl ProtocolTrace {
    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            dummy_count: self.dummy_count,
            skipped_count: self.skipped_count,
            max_bin_load: self.bin_loads.iter().copied().max().unwrap_or(0),
            bin_load_l2: (self.bin_loads.iter().map(|&l| (l * l) as f64).sum::<f64>()).sqrt(),
        }
    }

    pub fn final_model(&self) -> Option<&[f64]> {
        self.iterates.last().map(|v| v.as_slice())
    }

    /// Mean of the iterates (the averaged-iterate estimator).
    pub fn average_iterate(&self) -> Option<Vec<f64>> {
        let last = self.iterates.last()?;
        let mut avg = vec![0.0; last.len()];
        for it in &self.iterates {
            for (a, x) in avg.iter_mut().zip(it) {
                *a += x;
            }
        }
        let k = self.iterates.len() as f64;
        for a in &mut avg {
            *a /= k;
        }
        Some(avg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serialization")
    }
}

fn check_data(config: &SimConfig, data: &dyn Objective) -> Result<()> {
    config.validate()?;
    if data.n_clients() != config.n_clients {
        return Err(Error::invalid(
            "dataset",
            format!(
                "dataset holds {} clients, config expects {}",
                data.n_clients(),
                config.n_clients
            ),
        ));
    }
    if data.dimension() != config.randomizer.dimension {
        return Err(Error::DimensionMismatch {
            expected: config.randomizer.dimension,
            actual: data.dimension(),
        });
    }
    Ok(())
}

fn uniform_pick<R: Rng>(len: usize, rng: &mut R) -> usize {
    if len == 1 {
        0
    } else {
        rng.gen_range(0..len)
    }
}

fn axpy(theta: &mut [f64], scale: f64, g: &[f64]) {
    for (t, x) in theta.iter_mut().zip(g) {
        *t -= scale * x;
    }
}

// ---------------------------------------------------------------------------
// Main protocols
// ---------------------------------------------------------------------------

/// Distributed DP-SGD with random check-ins into a fixed window.
pub fn run_fixed(config: &SimConfig, data: &dyn Objective, rng: &mut ChaCha20Rng) -> Result<ProtocolTrace> {
    check_data(config, data)?;
    let PolicyKind::Fixed { p0 } = config.policy else {
        return Err(Error::invalid("policy", "run_fixed requires the fixed policy"));
    };
    let (n, m, b) = (config.n_clients, config.n_slots, config.batch_size);
    let dim = data.dimension();

    let debias_factor = if config.debias {
        let f = 1.0 - 2.0 * (-(n as f64) * p0 / m as f64).exp();
        if f <= 0.0 {
            return Err(Error::Precondition(format!(
                "debiasing factor 1 - 2 e^(-n p0 / m) = {f} is nonpositive"
            )));
        }
        1.0 / f
    } else {
        1.0
    };

    // Client side: independent check-in choices in index order.
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); m];
    for client in 0..n {
        if rng.gen::<f64>() < p0 {
            let slot = rng.gen_range(0..m);
            slots[slot].push(client);
        }
    }

    // Server side.
    let mut trace_slots = Vec::with_capacity(m);
    let mut iterates = Vec::with_capacity(m);
    let mut theta = vec![0.0; dim];
    let mut accumulator = vec![0.0; dim];
    let mut dummy_count = 0;

    for i in 1..=m {
        let checked_in = &slots[i - 1];
        let (selected, noisy) = if checked_in.is_empty() {
            dummy_count += 1;
            (None, config.randomizer.privatize_gradient(&vec![0.0; dim], rng)?)
        } else {
            let j = checked_in[uniform_pick(checked_in.len(), rng)];
            let grad = data.gradient(j, &theta);
            let mut noisy = config.randomizer.privatize_gradient(&grad, rng)?;
            if debias_factor != 1.0 {
                for x in &mut noisy {
                    *x *= debias_factor;
                }
            }
            (Some(j), noisy)
        };
        for (a, x) in accumulator.iter_mut().zip(&noisy) {
            *a += x;
        }
        if i % b == 0 {
            let eta = config.step_size.at(i);
            axpy(&mut theta, eta / b as f64, &accumulator);
            data.project(&mut theta);
            accumulator.iter_mut().for_each(|a| *a = 0.0);
        }
        iterates.push(theta.clone());
        trace_slots.push(SlotRecord {
            slot: i,
            checked_in: checked_in.clone(),
            selected,
            dummy: selected.is_none(),
            skipped: false,
        });
    }

    let bin_loads = slots.iter().map(|s| s.len()).collect();
    Ok(ProtocolTrace {
        slots: trace_slots,
        iterates,
        dummy_count,
        skipped_count: 0,
        bin_loads,
    })
}

/// Distributed DP-SGD with random check-ins and averaged updates.
pub fn run_avg(config: &SimConfig, data: &dyn Objective, rng: &mut ChaCha20Rng) -> Result<ProtocolTrace> {
    check_data(config, data)?;
    if !matches!(config.policy, PolicyKind::Avg) {
        return Err(Error::invalid("policy", "run_avg requires the averaged policy"));
    }
    let (n, m) = (config.n_clients, config.n_slots);
    let dim = data.dimension();

    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); m];
    for client in 0..n {
        let slot = rng.gen_range(0..m);
        slots[slot].push(client);
    }

    let mut trace_slots = Vec::with_capacity(m);
    let mut iterates = Vec::with_capacity(m);
    let mut theta = vec![0.0; dim];
    let mut skipped_count = 0;

    for i in 1..=m {
        let checked_in = &slots[i - 1];
        if checked_in.is_empty() {
            skipped_count += 1;
            trace_slots.push(SlotRecord {
                slot: i,
                checked_in: Vec::new(),
                selected: None,
                dummy: false,
                skipped: true,
            });
        } else {
            let mut sum = vec![0.0; dim];
            for &j in checked_in {
                let grad = data.gradient(j, &theta);
                let noisy = config.randomizer.privatize_gradient(&grad, rng)?;
                for (s, x) in sum.iter_mut().zip(&noisy) {
                    *s += x;
                }
            }
            let eta = config.step_size.at(i);
            axpy(&mut theta, eta / checked_in.len() as f64, &sum);
            data.project(&mut theta);
            trace_slots.push(SlotRecord {
                slot: i,
                checked_in: checked_in.clone(),
                selected: None,
                dummy: false,
                skipped: false,
            });
        }
        iterates.push(theta.clone());
    }

    let bin_loads = slots.iter().map(|s| s.len()).collect();
    Ok(ProtocolTrace {
        slots: trace_slots,
        iterates,
        dummy_count: 0,
        skipped_count,
        bin_loads,
    })
}

/// Distributed DP-SGD with random check-ins into per-client sliding
/// windows.  Client `j` (1-based) wakes at slot `j` and checks into a
/// uniform slot of `{j, ..., j + window - 1}`; the server serves slots
/// `window ..= n`, one update each, after a warm-up with no output.
pub fn run_sliding(config: &SimConfig, data: &dyn Objective, rng: &mut ChaCha20Rng) -> Result<ProtocolTrace> {
    check_data(config, data)?;
    let PolicyKind::Sliding { window } = config.policy else {
        return Err(Error::invalid("policy", "run_sliding requires the sliding policy"));
    };
    let n = config.n_clients;
    let dim = data.dimension();

    // Check-ins can land in slots up to n + window - 1; clients scheduled
    // past the horizon never serve.
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); n + window];
    for client in 0..n {
        let slot = client + rng.gen_range(0..window);
        slots[slot].push(client);
    }

    let served = n - window + 1;
    let mut trace_slots = Vec::with_capacity(served);
    let mut iterates = Vec::with_capacity(served);
    let mut bin_loads = Vec::with_capacity(served);
    let mut theta = vec![0.0; dim];
    let mut dummy_count = 0;

    for (step, slot_idx) in ((window - 1)..n).enumerate() {
        let checked_in = &slots[slot_idx];
        let (selected, noisy) = if checked_in.is_empty() {
            dummy_count += 1;
            (None, config.randomizer.privatize_gradient(&vec![0.0; dim], rng)?)
        } else {
            let j = checked_in[uniform_pick(checked_in.len(), rng)];
            let grad = data.gradient(j, &theta);
            (Some(j), config.randomizer.privatize_gradient(&grad, rng)?)
        };
        let eta = config.step_size.at(step + 1);
        axpy(&mut theta, eta, &noisy);
        data.project(&mut theta);
        iterates.push(theta.clone());
        bin_loads.push(checked_in.len());
        trace_slots.push(SlotRecord {
            slot: slot_idx + 1,
            checked_in: checked_in.clone(),
            selected,
            dummy: selected.is_none(),
            skipped: false,
        });
    }

    Ok(ProtocolTrace {
        slots: trace_slots,
        iterates,
        dummy_count,
        skipped_count: 0,
        bin_loads,
    })
}

// ---------------------------------------------------------------------------
// Appendix reference protocols
// ---------------------------------------------------------------------------

/// Noisy local responses together with the model iterates they induced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResponseRun {
    pub outputs: Vec<Vec<f64>>,
    pub iterates: Vec<Vec<f64>>,
}

/// DP-SGD with one random replacement: datum `0` is planted at a uniform
/// slot `I` with probability `weights[I]`, on top of the base sequence
/// `(replacement, d_2, ..., d_m)`.
pub fn run_replacement(
    data: &dyn Objective,
    weights: &[f64],
    w_max: f64,
    replacement: usize,
    step: StepSize,
    randomizer: &GradientRandomizer,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<Vec<f64>>> {
    let m = weights.len();
    if m == 0 || m > data.n_clients() {
        return Err(Error::invalid("weights", "need 1 <= m <= dataset size"));
    }
    if replacement >= data.n_clients() {
        return Err(Error::invalid("replacement", "replacement index out of range"));
    }
    if !(0.0..=1.0).contains(&w_max) {
        return Err(Error::invalid("w_max", format!("must lie in [0, 1], got {w_max}")));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 || w > w_max {
            return Err(Error::invalid(
                "weights",
                format!("w[{i}] = {w} outside [0, w_max = {w_max}]"),
            ));
        }
    }

    // Base sequence G = (replacement, d_2, ..., d_m); slot I reverts to the
    // planted first datum with probability w_I.
    let mut sequence: Vec<usize> = (0..m).collect();
    sequence[0] = replacement;
    let planted_slot = uniform_pick(m, rng);
    if rng.gen::<f64>() < weights[planted_slot] {
        sequence[planted_slot] = 0;
    }

    let dim = data.dimension();
    let mut theta = vec![0.0; dim];
    let mut iterates = Vec::with_capacity(m);
    for (i, &datum) in sequence.iter().enumerate() {
        let grad = data.gradient(datum, &theta);
        let noisy = randomizer.privatize_gradient(&grad, rng)?;
        axpy(&mut theta, step.at(i + 1), &noisy);
        data.project(&mut theta);
        iterates.push(theta.clone());
    }
    Ok(iterates)
}

/// Local responses with one swap: datum 0 trades places with a uniformly
/// random datum, then adaptive randomized responses run in order.
pub fn run_swap(
    data: &dyn Objective,
    step: StepSize,
    randomizer: &GradientRandomizer,
    rng: &mut ChaCha20Rng,
) -> Result<LocalResponseRun> {
    let n = data.n_clients();
    if n == 0 {
        return Err(Error::invalid("dataset", "must be nonempty"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let swap_to = uniform_pick(n, rng);
    order.swap(0, swap_to);
    respond_in_order(data, &order, step, randomizer, rng)
}

/// Local responses with shuffling: a uniform permutation of the dataset,
/// then adaptive randomized responses in order.
pub fn run_shuffle(
    data: &dyn Objective,
    step: StepSize,
    randomizer: &GradientRandomizer,
    rng: &mut ChaCha20Rng,
) -> Result<LocalResponseRun> {
    let n = data.n_clients();
    if n == 0 {
        return Err(Error::invalid("dataset", "must be nonempty"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Fisher-Yates, matching rand's SliceRandom but written out so the
    // draw order is pinned by this module.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    respond_in_order(data, &order, step, randomizer, rng)
}

fn respond_in_order(
    data: &dyn Objective,
    order: &[usize],
    step: StepSize,
    randomizer: &GradientRandomizer,
    rng: &mut ChaCha20Rng,
) -> Result<LocalResponseRun> {
    let dim = data.dimension();
    let mut theta = vec![0.0; dim];
    let mut outputs = Vec::with_capacity(order.len());
    let mut iterates = Vec::with_capacity(order.len());
    for (i, &datum) in order.iter().enumerate() {
        let grad = data.gradient(datum, &theta);
        let noisy = randomizer.privatize_gradient(&grad, rng)?;
        axpy(&mut theta, step.at(i + 1), &noisy);
        data.project(&mut theta);
        outputs.push(noisy);
        iterates.push(theta.clone());
    }
    Ok(LocalResponseRun { outputs, iterates })
}

/// DP-SGD with bins: the dataset is consumed in consecutive bins of the
/// given sizes, averaging the privatized gradients within each bin and
/// keeping the model unchanged on empty bins.
pub fn run_bins(
    data: &dyn Objective,
    bins: &BinSizes,
    step: StepSize,
    randomizer: &GradientRandomizer,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<Vec<f64>>> {
    if bins.n() != data.n_clients() as u64 {
        return Err(Error::invalid(
            "bins",
            format!("bin sizes sum to {}, dataset holds {}", bins.n(), data.n_clients()),
        ));
    }
    let dim = data.dimension();
    let mut theta = vec![0.0; dim];
    let mut iterates = Vec::with_capacity(bins.sizes().len());
    let mut next = 0usize;
    for (i, &ell) in bins.sizes().iter().enumerate() {
        if ell == 0 {
            iterates.push(theta.clone());
            continue;
        }
        let mut sum = vec![0.0; dim];
        for k in next..next + ell as usize {
            let noisy = randomizer.privatize_gradient(&data.gradient(k, &theta), rng)?;
            for (s, x) in sum.iter_mut().zip(&noisy) {
                *s += x;
            }
        }
        next += ell as usize;
        axpy(&mut theta, step.at(i + 1) / ell as f64, &sum);
        data.project(&mut theta);
        iterates.push(theta.clone());
    }
    Ok(iterates)
}

/// L2 norm of integer bin loads.
pub fn bin_load_l2(loads: &[usize]) -> f64 {
    l2_norm(&loads.iter().map(|&l| l as f64).collect::<Vec<_>>())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomizers::NoiseKind;
    use rand::SeedableRng;

    fn randomizer(dim: usize, sigma: f64) -> GradientRandomizer {
        GradientRandomizer::new(1.0, sigma, NoiseKind::Gaussian, dim).unwrap()
    }

    fn fixed_config(n: usize, m: usize, p0: f64, seed: u64) -> SimConfig {
        SimConfig {
            n_clients: n,
            n_slots: m,
            batch_size: 1,
            policy: PolicyKind::Fixed { p0 },
            randomizer: randomizer(2, 0.1),
            step_size: StepSize::InvSqrt(0.5),
            debias: false,
            seed,
        }
    }

    #[test]
    fn fixed_all_dummy_when_p0_zero() {
        let config = fixed_config(50, 20, 0.0, 1);
        let data = ZeroObjective { dimension: 2, n_clients: 50 };
        let trace = run_fixed(&config, &data, &mut config.rng()).unwrap();
        assert_eq!(trace.dummy_count, 20);
        assert!(trace.slots.iter().all(|s| s.dummy && s.selected.is_none()));
        assert_eq!(trace.iterates.len(), 20);
        // theta evolves by noise only; with sigma > 0 it moves
        assert!(l2_norm(trace.final_model().unwrap()) > 0.0);
    }

    #[test]
    fn fixed_conservation_and_uniqueness() {
        let config = fixed_config(200, 40, 0.6, 7);
        let data = ZeroObjective { dimension: 2, n_clients: 200 };
        let trace = run_fixed(&config, &data, &mut config.rng()).unwrap();
        let selected = trace.slots.iter().filter(|s| s.selected.is_some()).count();
        assert_eq!(selected + trace.dummy_count, 40);
        for s in &trace.slots {
            assert!(s.dummy != s.selected.is_some());
        }
        // no client appears in two different slots
        let mut seen = std::collections::HashSet::new();
        for s in &trace.slots {
            for &c in &s.checked_in {
                assert!(seen.insert(c), "client {c} checked in twice");
            }
        }
    }

    #[test]
    fn fixed_deterministic_given_seed() {
        let config = fixed_config(100, 30, 0.4, 99);
        let data = ZeroObjective { dimension: 2, n_clients: 100 };
        let a = run_fixed(&config, &data, &mut config.rng()).unwrap();
        let b = run_fixed(&config, &data, &mut config.rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_batched_updates_change_model_only_on_batch_boundaries() {
        let mut config = fixed_config(100, 12, 1.0, 3);
        config.batch_size = 4;
        let data = ZeroObjective { dimension: 2, n_clients: 100 };
        let trace = run_fixed(&config, &data, &mut config.rng()).unwrap();
        assert_eq!(trace.iterates.len(), 12);
        let mut prev = vec![0.0; 2];
        for (i, it) in trace.iterates.iter().enumerate() {
            let slot = i + 1;
            if slot % 4 == 0 {
                assert_ne!(*it, prev, "slot {slot} should update");
            } else {
                assert_eq!(*it, prev, "slot {slot} should not update");
            }
            prev = it.clone();
        }
    }

    #[test]
    fn fixed_mean_dummies_tracks_expectation() {
        // small Monte Carlo; the acceptance suite runs the full-size one
        let n = 500;
        let m = 20;
        let p0 = 0.04;
        let mut total = 0usize;
        let trials = 400;
        for seed in 0..trials {
            let config = fixed_config(n, m, p0, seed);
            let data = ZeroObjective { dimension: 2, n_clients: n };
            total += run_fixed(&config, &data, &mut config.rng()).unwrap().dummy_count;
        }
        let mean = total as f64 / trials as f64;
        let expect =
            crate::accountant::expected_dummy_fixed(n as u64, m as u64, p0).unwrap();
        assert!((mean - expect).abs() / expect < 0.05, "mean {mean} expect {expect}");
    }

    #[test]
    fn avg_empty_dataset_skips_everything() {
        let config = SimConfig {
            n_clients: 0,
            n_slots: 10,
            batch_size: 1,
            policy: PolicyKind::Avg,
            randomizer: randomizer(2, 0.1),
            step_size: StepSize::Constant(0.1),
            debias: false,
            seed: 5,
        };
        let data = ZeroObjective { dimension: 2, n_clients: 0 };
        let trace = run_avg(&config, &data, &mut config.rng()).unwrap();
        assert_eq!(trace.skipped_count, 10);
        assert!(trace.iterates.iter().all(|t| t == &vec![0.0, 0.0]));
    }

    #[test]
    fn avg_loads_sum_to_n_and_flags_are_consistent() {
        let config = SimConfig {
            n_clients: 150,
            n_slots: search_m(),
            batch_size: 1,
            policy: PolicyKind::Avg,
            randomizer: randomizer(2, 0.1),
            step_size: StepSize::InvSqrt(0.3),
            debias: false,
            seed: 11,
        };
        let data = ZeroObjective { dimension: 2, n_clients: 150 };
        let trace = run_avg(&config, &data, &mut config.rng()).unwrap();
        assert_eq!(trace.bin_loads.iter().sum::<usize>(), 150);
        assert_eq!(trace.dummy_count, 0);
        for s in &trace.slots {
            assert!(!s.dummy);
            assert_eq!(s.skipped, s.checked_in.is_empty());
        }
        let updated = trace.slots.iter().filter(|s| !s.skipped).count();
        assert_eq!(updated + trace.skipped_count, search_m());
    }

    fn search_m() -> usize {
        40
    }

    #[test]
    fn sliding_window_one_is_deterministic_schedule() {
        let config = SimConfig {
            n_clients: 25,
            n_slots: 25,
            batch_size: 1,
            policy: PolicyKind::Sliding { window: 1 },
            randomizer: randomizer(2, 0.1),
            step_size: StepSize::Constant(0.1),
            debias: false,
            seed: 2,
        };
        let data = ZeroObjective { dimension: 2, n_clients: 25 };
        let trace = run_sliding(&config, &data, &mut config.rng()).unwrap();
        assert_eq!(trace.dummy_count, 0);
        assert_eq!(trace.iterates.len(), 25);
        for (i, s) in trace.slots.iter().enumerate() {
            assert_eq!(s.selected, Some(i));
        }
    }

    #[test]
    fn sliding_emits_exactly_n_minus_m_plus_one_iterates() {
        let config = SimConfig {
            n_clients: 60,
            n_slots: 60,
            batch_size: 1,
            policy: PolicyKind::Sliding { window: 15 },
            randomizer: randomizer(2, 0.1),
            step_size: StepSize::InvSqrt(0.2),
            debias: false,
            seed: 8,
        };
        let data = ZeroObjective { dimension: 2, n_clients: 60 };
        let trace = run_sliding(&config, &data, &mut config.rng()).unwrap();
        assert_eq!(trace.iterates.len(), 60 - 15 + 1);
        assert_eq!(trace.slots.len(), 46);
    }

    #[test]
    fn sliding_mean_dummies_tracks_expectation() {
        let (n, w) = (300usize, 10usize);
        let trials = 400;
        let mut total = 0usize;
        for seed in 0..trials {
            let config = SimConfig {
                n_clients: n,
                n_slots: n,
                batch_size: 1,
                policy: PolicyKind::Sliding { window: w },
                randomizer: randomizer(2, 0.0),
                step_size: StepSize::Constant(0.1),
                debias: false,
                seed,
            };
            let data = ZeroObjective { dimension: 2, n_clients: n };
            total += run_sliding(&config, &data, &mut config.rng()).unwrap().dummy_count;
        }
        let mean = total as f64 / trials as f64;
        let expect = crate::accountant::expected_dummy_sliding(n as u64, w as u64).unwrap();
        assert!((mean - expect).abs() / expect < 0.05, "mean {mean} expect {expect}");
    }

    #[test]
    fn replacement_weight_zero_never_plants() {
        // With all weights zero the planted datum's gradient never enters;
        // with sigma = 0 the run is a deterministic function of the base
        // sequence only.
        struct Marker;
        impl Objective for Marker {
            fn dimension(&self) -> usize {
                1
            }
            fn n_clients(&self) -> usize {
                4
            }
            fn gradient(&self, client: usize, _theta: &[f64]) -> Vec<f64> {
                vec![if client == 0 { 1.0 } else { 0.0 }]
            }
            fn project(&self, _theta: &mut [f64]) {}
        }
        let r = randomizer(1, 0.0);
        for seed in 0..50 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let iterates =
                run_replacement(&Marker, &[0.0; 4], 0.0, 3, StepSize::Constant(1.0), &r, &mut rng)
                    .unwrap();
            assert!(iterates.iter().all(|t| t[0] == 0.0));
        }
    }

    #[test]
    fn replacement_m1_w1_always_plants() {
        struct Marker;
        impl Objective for Marker {
            fn dimension(&self) -> usize {
                1
            }
            fn n_clients(&self) -> usize {
                2
            }
            fn gradient(&self, client: usize, _theta: &[f64]) -> Vec<f64> {
                vec![if client == 0 { 1.0 } else { 0.0 }]
            }
            fn project(&self, _theta: &mut [f64]) {}
        }
        let r = randomizer(1, 0.0);
        for seed in 0..20 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let iterates =
                run_replacement(&Marker, &[1.0], 1.0, 1, StepSize::Constant(1.0), &r, &mut rng)
                    .unwrap();
            assert_eq!(iterates[0][0], -1.0);
        }
    }

    #[test]
    fn replacement_rejects_weight_above_w_max() {
        let data = ZeroObjective { dimension: 1, n_clients: 5 };
        let r = randomizer(1, 0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(run_replacement(&data, &[0.5, 0.9], 0.6, 2, StepSize::Constant(0.1), &r, &mut rng)
            .is_err());
    }

    #[test]
    fn swap_on_singleton_is_identity() {
        let data = ZeroObjective { dimension: 1, n_clients: 1 };
        let r = randomizer(1, 0.2);
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let run = run_swap(&data, StepSize::Constant(0.1), &r, &mut rng).unwrap();
        assert_eq!(run.outputs.len(), 1);
        // the swap index draw consumes nothing for n = 1, so the output
        // equals a direct privatize call on the same stream
        let mut rng2 = ChaCha20Rng::seed_from_u64(77);
        let direct = r.privatize_gradient(&[0.0], &mut rng2).unwrap();
        assert_eq!(run.outputs[0], direct);
    }

    #[test]
    fn swap_and_shuffle_deterministic() {
        let data = ZeroObjective { dimension: 2, n_clients: 6 };
        let r = randomizer(2, 0.3);
        let a = run_shuffle(&data, StepSize::Constant(0.1), &r, &mut ChaCha20Rng::seed_from_u64(5))
            .unwrap();
        let b = run_shuffle(&data, StepSize::Constant(0.1), &r, &mut ChaCha20Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.outputs.len(), 6);
    }

    #[test]
    fn bins_skip_empty_and_consume_in_order() {
        struct Linear;
        impl Objective for Linear {
            fn dimension(&self) -> usize {
                1
            }
            fn n_clients(&self) -> usize {
                6
            }
            fn gradient(&self, client: usize, _theta: &[f64]) -> Vec<f64> {
                vec![client as f64]
            }
            fn project(&self, _theta: &mut [f64]) {}
        }
        let bins = BinSizes::new(vec![2, 0, 4], 6).unwrap();
        let r = randomizer(1, 0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let iterates = run_bins(&Linear, &bins, StepSize::Constant(1.0), &r, &mut rng).unwrap();
        assert_eq!(iterates.len(), 3);
        // bin 1: mean(0, 1) = 0.5 -> theta = -0.5 ; bin 2 empty ; bin 3:
        // mean(2,3,4,5) = 3.5 (clipped to 1 each... clip_norm = 1 clips
        // gradients 2..5 to 1) -> mean 1 -> theta = -1.5
        assert_eq!(iterates[0], vec![-0.5]);
        assert_eq!(iterates[1], vec![-0.5]);
        assert_eq!(iterates[2], vec![-1.5]);
    }

    #[test]
    fn trace_summary_and_json_round_trip() {
        let config = fixed_config(80, 16, 0.5, 13);
        let data = ZeroObjective { dimension: 2, n_clients: 80 };
        let trace = run_fixed(&config, &data, &mut config.rng()).unwrap();
        let summary = trace.summary();
        assert_eq!(summary.dummy_count, trace.dummy_count);
        assert!(summary.bin_load_l2 > 0.0);
        let json = trace.to_json();
        let decoded: ProtocolTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(trace, decoded);
    }
}
