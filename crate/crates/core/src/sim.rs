//! Monte Carlo simulation of the data-hiding protocols, with exact
//! enumeration as a noise-free reference.
//!
//! In the broadcast scheme the hider draws `c⃗` from `η^{⊗L}`, hands over
//! `ρ_c⃗` and broadcasts `z = x + ω(c⃗) mod n`; the receiver recovers `x` by
//! guessing `ω(c⃗)`. In the direct encoding the hider prepares a component of
//! `ρ_x^(L)` for uniformly random `x` and the receiver guesses `x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrimination::{two_state_projector_povm, Objective, Povm};
use crate::ensemble::{coarse_probabilities, IndexVector, StateEnsemble};
use crate::error::{Error, Result};
use crate::operator::{BipartiteDims, HermitianOperator};

/// Largest number of `(c⃗, outcome)` pairs the exact oracle enumerates.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;
pub const DEFAULT_TRIALS: u64 = 100_000;

/// Eigenvalues above this (relative to the largest) span a state's support.
const SUPPORT_TOL: f64 = 1e-10;

/// How the receiver turns a quantum state into a guess.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    /// Measure each copy with the same `n`-outcome measurement and guess the
    /// modulo-`n` sum of the outcomes.
    PerCopy { povm: Povm },
    /// One `n`-outcome measurement on the whole `L`-copy system.
    Global { povm: Povm },
    /// Ignore the state and guess uniformly at random.
    RandomGuess,
}

impl Strategy {
    /// Per-copy parity strategy with the two-outcome projector measurement
    /// onto the non-negative and negative eigenspaces of
    /// `η_0 ρ_0^PT − η_1 ρ_1^PT`.
    pub fn default_parity(ensemble: &StateEnsemble) -> Result<Self> {
        Ok(Strategy::PerCopy {
            povm: two_state_projector_povm(ensemble, Objective::PartialTranspose)?,
        })
    }

    /// Per-copy projection onto the supports of the single-copy states.
    ///
    /// For mutually orthogonal states this identifies every `c_l`, and its
    /// parity measurement coincides with the projectors onto the supports
    /// of the coarse-grained states, so it realizes the global optimum of 1.
    pub fn global_orthogonal(ensemble: &StateEnsemble) -> Result<Self> {
        let dims = ensemble.dims();
        let supports: Vec<HermitianOperator> = ensemble
            .items()
            .iter()
            .map(|item| {
                let spectrum = item.rho.spectrum();
                let cut = SUPPORT_TOL * spectrum.max().max(0.0);
                HermitianOperator::hermitian_part_of(dims, &spectrum.map(|x| if x > cut { 1.0 } else { 0.0 }))
            })
            .collect();
        let covered = supports.iter().fold(HermitianOperator::zeros(dims), |acc, p| &acc + p);
        let rest = &HermitianOperator::identity(dims) - &covered;
        let mut elements = supports;
        elements[0] = &elements[0] + &rest;
        let povm = Povm::new(elements)
            .map_err(|e| Error::InvalidParameter(format!("state supports overlap, so they do not form a measurement: {e}")))?;
        Ok(Strategy::PerCopy { povm })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::PerCopy { .. } => "per-copy",
            Strategy::Global { .. } => "global",
            Strategy::RandomGuess => "random-guess",
        }
    }

    /// The `L`-copy measurement `M_i^(L) = Σ_{ω(o⃗)=i} ⊗_l M_{o_l}` that a
    /// per-copy strategy implements.
    pub fn parity_povm(&self, l: usize, cap: usize) -> Result<Povm> {
        let Strategy::PerCopy { povm } = self else {
            return Err(Error::InvalidParameter("only per-copy strategies have a parity measurement".into()));
        };
        let n = povm.len();
        let count = checked_power(n, l)?;
        let mut elements: Vec<Option<HermitianOperator>> = vec![None; n];
        for index in 0..count {
            let o = IndexVector::from_linear(n, l, index);
            let mut term = povm.element(o.entries()[0]).clone();
            for &k in &o.entries()[1..] {
                term = term.tensor(povm.element(k), cap)?;
            }
            let slot = &mut elements[o.omega()];
            *slot = Some(match slot.take() {
                Some(acc) => &acc + &term,
                None => term,
            });
        }
        Povm::from_elements_unchecked(elements.into_iter().map(|e| e.expect("every residue occurs")).collect())
    }
}

fn checked_power(n: usize, l: usize) -> Result<usize> {
    let value = (n as u128).checked_pow(u32::try_from(l).unwrap_or(u32::MAX));
    match value {
        Some(v) if v <= ENUMERATION_LIMIT => Ok(v as usize),
        _ => Err(Error::EnumerationTooLarge {
            requested: value.unwrap_or(u128::MAX),
            limit: ENUMERATION_LIMIT,
        }),
    }
}

/// Which protocol to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scheme {
    /// `withhold_z` suppresses the broadcast; the receiver then answers as
    /// if `z = 0`.
    Broadcast { withhold_z: bool },
    /// The encoded value is uniform unless `fixed_x` pins it.
    DirectEncoding { fixed_x: Option<usize> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub l: usize,
    pub trials: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub cap: usize,
}

impl ProtocolConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.l == 0 || self.trials == 0 {
            return Err(Error::InvalidParameter("need at least one copy and one trial".into()));
        }
        if let Scheme::DirectEncoding { fixed_x: Some(x) } = self.scheme {
            if x >= n {
                return Err(Error::IndexOutOfRange { value: x, modulus: n });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub empirical_success: f64,
    /// `sqrt(p̂(1 − p̂)/trials)`.
    pub stderr: f64,
    pub successes: u64,
    pub trials: u64,
    pub l: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub strategy: &'static str,
    pub analytic_reference: Option<f64>,
    /// `(p̂ − reference)/stderr`; absent without a reference or when the
    /// standard error vanishes.
    pub z_score: Option<f64>,
}

impl SimResult {
    pub fn with_reference(mut self, reference: f64) -> Self {
        self.analytic_reference = Some(reference);
        self.z_score = (self.stderr > 0.0).then(|| (self.empirical_success - reference) / self.stderr);
        self
    }

    /// `|p̂ − reference| ≤ k·stderr`, treating a vanishing stderr as exact.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.empirical_success - reference).abs() <= k * self.stderr + 1e-12
    }
}

/// Draws an index from a discrete distribution; the last index absorbs
/// rounding in the tail.
pub fn sample_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probabilities.iter().enumerate() {
        acc += p.max(0.0);
        if u < acc {
            return k;
        }
    }
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(probabilities.len() - 1)
}

/// Born probabilities with tiny negative rounding clipped away and the
/// total renormalized to one.
fn born(povm: &Povm, rho: &HermitianOperator) -> Vec<f64> {
    let mut p: Vec<f64> = povm.outcome_probabilities(rho).into_iter().map(|x| x.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

/// Everything a trial needs, precomputed once.
enum Receiver {
    /// `table[c][k] = Tr(ρ_c M_k)`.
    PerCopy {
        table: Vec<Vec<f64>>,
    },
    /// `table[linear index of c⃗][k] = Tr(ρ_c⃗ M_k)`.
    Global {
        table: Vec<Vec<f64>>,
    },
    Random,
}

impl Receiver {
    fn build(ensemble: &StateEnsemble, strategy: &Strategy, l: usize, cap: usize) -> Result<Self> {
        let n = ensemble.len();
        match strategy {
            Strategy::PerCopy { povm } => {
                check_povm(povm, ensemble.dims(), n)?;
                Ok(Receiver::PerCopy {
                    table: ensemble.items().iter().map(|it| born(povm, &it.rho)).collect(),
                })
            }
            Strategy::Global { povm } => {
                let folded_dims = power_dims(ensemble.dims(), l);
                check_povm(povm, folded_dims, n)?;
                let count = checked_power(n, l)?;
                let table = (0..count)
                    .into_par_iter()
                    .map(|index| {
                        let c = IndexVector::from_linear(n, l, index);
                        let mut rho = ensemble.state(c.entries()[0]).clone();
                        for &k in &c.entries()[1..] {
                            rho = rho.tensor(ensemble.state(k), cap)?;
                        }
                        Ok(born(povm, &rho))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Receiver::Global { table })
            }
            Strategy::RandomGuess => Ok(Receiver::Random),
        }
    }

    fn guess<R: Rng + ?Sized>(&self, c: &[usize], n: usize, rng: &mut R) -> usize {
        match self {
            Receiver::PerCopy { table } => c.iter().map(|&ci| sample_index(&table[ci], rng)).sum::<usize>() % n,
            Receiver::Global { table } => sample_index(&table[linear_index(c, n)], rng),
            Receiver::Random => rng.random_range(0..n),
        }
    }

    /// `P(guess = g | c⃗)` for every `g`.
    fn guess_distribution(&self, c: &[usize], n: usize) -> Vec<f64> {
        match self {
            Receiver::PerCopy { table } => {
                let mut acc = vec![0.0; n];
                acc[0] = 1.0;
                for &ci in c {
                    let mut next = vec![0.0; n];
                    for (a, &x) in acc.iter().enumerate() {
                        for (o, &p) in table[ci].iter().enumerate() {
                            next[(a + o) % n] += x * p;
                        }
                    }
                    acc = next;
                }
                acc
            }
            Receiver::Global { table } => table[linear_index(c, n)].clone(),
            Receiver::Random => vec![1.0 / n as f64; n],
        }
    }
}

fn check_povm(povm: &Povm, dims: BipartiteDims, n: usize) -> Result<()> {
    if povm.len() != n {
        return Err(Error::WrongSize {
            what: "strategy measurement",
            expected: n,
            got: povm.len(),
        });
    }
    if povm.dims() != dims {
        return Err(Error::DimsMismatch {
            left: dims,
            right: povm.dims(),
        });
    }
    povm.check()
}

fn power_dims(dims: BipartiteDims, l: usize) -> BipartiteDims {
    (1..l).fold(dims, |acc, _| acc.compose(&dims))
}

fn linear_index(c: &[usize], n: usize) -> usize {
    c.iter().fold(0, |acc, &x| acc * n + x)
}

/// `suffix[l][r]`: total weight of `(c_l, …, c_L)` whose sum is `r mod n`.
struct ConditionalSampler {
    etas: Vec<f64>,
    suffix: Vec<Vec<f64>>,
}

impl ConditionalSampler {
    fn new(etas: &[f64], l: usize) -> Self {
        let n = etas.len();
        let mut suffix = vec![vec![0.0; n]; l + 1];
        suffix[l][0] = 1.0;
        for pos in (0..l).rev() {
            for r in 0..n {
                suffix[pos][r] = (0..n).map(|c| etas[c] * suffix[pos + 1][(r + n - c) % n]).sum();
            }
        }
        ConditionalSampler {
            etas: etas.to_vec(),
            suffix,
        }
    }

    /// Samples `c⃗ ~ η^{⊗L}` conditioned on `ω(c⃗) = x`.
    fn sample<R: Rng + ?Sized>(&self, x: usize, rng: &mut R, out: &mut Vec<usize>) {
        let n = self.etas.len();
        let l = self.suffix.len() - 1;
        out.clear();
        let mut residue = x;
        for pos in 0..l {
            let weights: Vec<f64> = (0..n).map(|c| self.etas[c] * self.suffix[pos + 1][(residue + n - c) % n]).collect();
            let total: f64 = weights.iter().sum();
            let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let c = sample_index(&probabilities, rng);
            out.push(c);
            residue = (residue + n - c) % n;
        }
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `cfg.trials` independent rounds of the configured scheme. Each
/// trial owns the RNG stream `(seed, trial)`, so results do not depend on
/// scheduling.
pub fn simulate(ensemble: &StateEnsemble, strategy: &Strategy, cfg: &ProtocolConfig) -> Result<SimResult> {
    let n = ensemble.len();
    cfg.validate(n)?;
    let receiver = Receiver::build(ensemble, strategy, cfg.l, cfg.cap)?;
    let etas = ensemble.etas();
    let conditional = match cfg.scheme {
        Scheme::DirectEncoding { .. } => {
            let bins = coarse_probabilities(&etas, cfg.l);
            if let Some(index) = bins.iter().position(|&p| p <= 0.0) {
                return Err(Error::EmptyBin { index });
            }
            Some(ConditionalSampler::new(&etas, cfg.l))
        }
        Scheme::Broadcast { .. } => None,
    };
    let successes: u64 = (0..cfg.trials)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(cfg.l),
            |c, trial| {
                let mut rng = trial_rng(cfg.seed, trial);
                let won = match cfg.scheme {
                    Scheme::Broadcast { withhold_z } => {
                        c.clear();
                        c.extend((0..cfg.l).map(|_| sample_index(&etas, &mut rng)));
                        let y = c.iter().sum::<usize>() % n;
                        let x = rng.random_range(0..n);
                        let z = if withhold_z { 0 } else { (x + y) % n };
                        let y_hat = receiver.guess(c, n, &mut rng);
                        (z + n - y_hat) % n == x
                    }
                    Scheme::DirectEncoding { fixed_x } => {
                        let x = fixed_x.unwrap_or_else(|| rng.random_range(0..n));
                        conditional.as_ref().expect("built above").sample(x, &mut rng, c);
                        receiver.guess(c, n, &mut rng) == x
                    }
                };
                u64::from(won)
            },
        )
        .sum();
    let p = successes as f64 / cfg.trials as f64;
    Ok(SimResult {
        empirical_success: p,
        stderr: (p * (1.0 - p) / cfg.trials as f64).sqrt(),
        successes,
        trials: cfg.trials,
        l: cfg.l,
        seed: cfg.seed,
        scheme: cfg.scheme,
        strategy: strategy.name(),
        analytic_reference: None,
        z_score: None,
    })
}

/// Broadcast scheme with `z` delivered unless `withhold_z`.
pub fn simulate_broadcast_scheme(
    ensemble: &StateEnsemble,
    strategy: &Strategy,
    l: usize,
    trials: u64,
    seed: u64,
    withhold_z: bool,
    cap: usize,
) -> Result<SimResult> {
    simulate(
        ensemble,
        strategy,
        &ProtocolConfig {
            l,
            trials,
            seed,
            scheme: Scheme::Broadcast { withhold_z },
            cap,
        },
    )
}

/// Direct encoding of uniformly random (or fixed) `x`.
pub fn simulate_direct_encoding(
    ensemble: &StateEnsemble,
    strategy: &Strategy,
    l: usize,
    trials: u64,
    seed: u64,
    fixed_x: Option<usize>,
    cap: usize,
) -> Result<SimResult> {
    simulate(
        ensemble,
        strategy,
        &ProtocolConfig {
            l,
            trials,
            seed,
            scheme: Scheme::DirectEncoding { fixed_x },
            cap,
        },
    )
}

/// Exact success probability by enumerating every `c⃗` and every outcome
/// pattern the strategy can produce.
pub fn exact_strategy_success(ensemble: &StateEnsemble, strategy: &Strategy, l: usize, scheme: Scheme, cap: usize) -> Result<f64> {
    let n = ensemble.len();
    if l == 0 {
        return Err(Error::InvalidParameter("need at least one copy".into()));
    }
    let count = checked_power(n, l)?;
    let outcome_patterns = match strategy {
        Strategy::PerCopy { .. } => count as u128,
        Strategy::Global { .. } | Strategy::RandomGuess => n as u128,
    };
    let pairs = count as u128 * outcome_patterns;
    if pairs > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            requested: pairs,
            limit: ENUMERATION_LIMIT,
        });
    }
    let receiver = Receiver::build(ensemble, strategy, l, cap)?;
    let etas = ensemble.etas();
    let bins = coarse_probabilities(&etas, l);
    let mut total = 0.0;
    for index in 0..count {
        let c = IndexVector::from_linear(n, l, index);
        let y = c.omega();
        let eta_c: f64 = c.entries().iter().map(|&k| etas[k]).product();
        if eta_c == 0.0 {
            continue;
        }
        let guesses = match &receiver {
            // Enumerate outcome patterns explicitly rather than convolving.
            Receiver::PerCopy { table } => {
                let mut g = vec![0.0; n];
                for pattern in 0..count {
                    let o = IndexVector::from_linear(n, l, pattern);
                    let p: f64 = c.entries().iter().zip(o.entries()).map(|(&ci, &oi)| table[ci][oi]).product();
                    g[o.omega()] += p;
                }
                g
            }
            other => other.guess_distribution(c.entries(), n),
        };
        total += match scheme {
            Scheme::Broadcast { withhold_z: false } => eta_c * guesses[y],
            // x is uniform and independent of everything the receiver sees.
            Scheme::Broadcast { withhold_z: true } => eta_c / n as f64,
            Scheme::DirectEncoding { fixed_x: None } => eta_c / (n as f64 * bins[y]) * guesses[y],
            Scheme::DirectEncoding { fixed_x: Some(x) } => {
                if x >= n {
                    return Err(Error::IndexOutOfRange { value: x, modulus: n });
                }
                if y == x {
                    eta_c / bins[y] * guesses[y]
                } else {
                    0.0
                }
            }
        };
    }
    Ok(total)
}
