//! State ensembles `{η_i, ρ_i}`, their L-fold products and the modulo-sum
//! coarse graining.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{BipartiteDims, HermitianOperator};

pub const PROBABILITY_SUM_TOL: f64 = 1e-12;
pub const STATE_PSD_TOL: f64 = 1e-9;
pub const STATE_TRACE_TOL: f64 = 1e-10;
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleItem {
    pub eta: f64,
    pub rho: HermitianOperator,
}

/// Ordered list of prepared states with prior probabilities.
///
/// Construction through [`StateEnsemble::from_items`] only checks structure;
/// [`StateEnsemble::new`] additionally enforces the probability and
/// density-operator invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleJson")]
pub struct StateEnsemble {
    dims: BipartiteDims,
    items: Vec<EnsembleItem>,
}

#[derive(Deserialize)]
struct EnsembleJson {
    dims: BipartiteDims,
    items: Vec<EnsembleItem>,
}

impl TryFrom<EnsembleJson> for StateEnsemble {
    type Error = Error;

    fn try_from(json: EnsembleJson) -> Result<Self> {
        let ensemble = StateEnsemble::from_items(json.items)?;
        if ensemble.dims != json.dims {
            return Err(Error::DimsMismatch {
                left: json.dims,
                right: ensemble.dims,
            });
        }
        Ok(ensemble)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StateCheck {
    pub index: usize,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub dims: BipartiteDims,
    pub probability_sum: f64,
    pub min_probability: f64,
    pub states: Vec<StateCheck>,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl StateEnsemble {
    pub fn from_items(items: Vec<EnsembleItem>) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidEnsemble("ensemble has no states".into()))?;
        let dims = first.rho.dims();
        for (i, item) in items.iter().enumerate() {
            if item.rho.dims() != dims {
                return Err(Error::InvalidEnsemble(format!(
                    "state {i} has dims {} but state 0 has {dims}",
                    item.rho.dims()
                )));
            }
            if !item.eta.is_finite() {
                return Err(Error::InvalidEnsemble(format!("probability {i} is not finite")));
            }
        }
        Ok(StateEnsemble { dims, items })
    }

    /// Builds and validates.
    pub fn new(items: Vec<EnsembleItem>) -> Result<Self> {
        let ensemble = Self::from_items(items)?;
        ensemble.ensure_valid()?;
        Ok(ensemble)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, HermitianOperator)>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(eta, rho)| EnsembleItem { eta, rho }).collect())
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    /// Number of states `n`.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[EnsembleItem] {
        &self.items
    }

    pub fn etas(&self) -> Vec<f64> {
        self.items.iter().map(|it| it.eta).collect()
    }

    pub fn state(&self, i: usize) -> &HermitianOperator {
        &self.items[i].rho
    }

    pub fn eta(&self, i: usize) -> f64 {
        self.items[i].eta
    }

    /// `η_i ρ_i`, or `η_i ρ_i^PT` when `pt` is set.
    pub fn weighted_state(&self, i: usize, pt: bool) -> HermitianOperator {
        let rho = if pt {
            self.items[i].rho.partial_transpose()
        } else {
            self.items[i].rho.clone()
        };
        rho.scaled(self.items[i].eta)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut failures = Vec::new();
        let probability_sum: f64 = self.items.iter().map(|it| it.eta).sum();
        let min_probability = self.items.iter().map(|it| it.eta).fold(f64::INFINITY, f64::min);
        if (probability_sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            failures.push(format!(
                "probabilities sum to {probability_sum} (off by {:e})",
                probability_sum - 1.0
            ));
        }
        for (i, item) in self.items.iter().enumerate() {
            if !(0.0..=1.0).contains(&item.eta) {
                failures.push(format!("probability {i} = {} is outside [0, 1]", item.eta));
            }
        }
        let states: Vec<StateCheck> = self
            .items
            .iter()
            .enumerate()
            .map(|(index, item)| StateCheck {
                index,
                trace: item.rho.trace(),
                min_eigenvalue: item.rho.min_eigenvalue(),
            })
            .collect();
        for s in &states {
            if s.min_eigenvalue < -STATE_PSD_TOL {
                failures.push(format!("state {} is not PSD (min eigenvalue {:e})", s.index, s.min_eigenvalue));
            }
            if (s.trace - 1.0).abs() > STATE_TRACE_TOL {
                failures.push(format!("state {} has trace {}", s.index, s.trace));
            }
        }
        ValidationReport {
            n: self.len(),
            dims: self.dims,
            probability_sum,
            min_probability,
            states,
            failures,
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.passed() {
            Ok(())
        } else {
            Err(Error::InvalidEnsemble(report.failures.join("; ")))
        }
    }

    /// Largest `Tr(ρ_i ρ_j)` over `i ≠ j`; zero for single-state ensembles.
    pub fn max_pairwise_overlap(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                worst = worst.max(self.items[i].rho.inner(&self.items[j].rho));
            }
        }
        worst
    }

    pub fn is_mutually_orthogonal(&self, tol: f64) -> bool {
        self.max_pairwise_overlap() <= tol
    }

    /// `E^{⊗L}`: items indexed by `c⃗ ∈ Z_n^L` in lexicographic order with
    /// `c_1` most significant.
    pub fn fold(&self, l: usize, cap: usize) -> Result<StateEnsemble> {
        check_level(l)?;
        check_power_cap(self.dims.total(), l, cap)?;
        let mut current: Vec<EnsembleItem> = self.items.clone();
        for _ in 1..l {
            let mut next = Vec::with_capacity(current.len() * self.len());
            for prefix in &current {
                for item in &self.items {
                    next.push(EnsembleItem {
                        eta: prefix.eta * item.eta,
                        rho: prefix.rho.tensor(&item.rho, cap)?,
                    });
                }
            }
            current = next;
        }
        StateEnsemble::from_items(current)
    }

    /// `E^{(L)}`: the n-state ensemble of `ω_n(c⃗)` classes of `E^{⊗L}`.
    pub fn coarse_grain(&self, l: usize, cap: usize) -> Result<StateEnsemble> {
        check_level(l)?;
        check_power_cap(self.dims.total(), l, cap)?;
        let n = self.len();
        let weighted: Vec<HermitianOperator> = (0..n).map(|i| self.weighted_state(i, false)).collect();
        // bins[i] = Σ_{ω(c⃗)=i} η_c⃗ ρ_c⃗ over prefixes, extended one factor at a time.
        let mut bins = weighted.clone();
        for _ in 1..l {
            let mut next: Vec<Option<HermitianOperator>> = vec![None; n];
            for (prev, bin) in bins.iter().enumerate() {
                for (j, w) in weighted.iter().enumerate() {
                    let term = bin.tensor(w, cap)?;
                    let slot = &mut next[(prev + j) % n];
                    *slot = Some(match slot.take() {
                        Some(acc) => &acc + &term,
                        None => term,
                    });
                }
            }
            bins = next.into_iter().map(|b| b.expect("every residue is reached")).collect();
        }
        let exact = coarse_probabilities(&self.etas(), l);
        let mut items = Vec::with_capacity(n);
        for (i, (bin, eta)) in bins.into_iter().zip(exact).enumerate() {
            let mass = bin.trace();
            if eta <= 0.0 || mass <= 0.0 {
                return Err(Error::EmptyBin { index: i });
            }
            // Priors come from the exact product weights; the state is
            // normalized by its own trace so that Tr ρ = 1 up to rounding.
            items.push(EnsembleItem {
                eta,
                rho: bin.scaled(1.0 / mass),
            });
        }
        StateEnsemble::from_items(items)
    }
}

/// `η_i^{(L)} = Σ_{ω_n(c⃗)=i} Π_l η_{c_l}` by cyclic convolution.
pub fn coarse_probabilities(etas: &[f64], l: usize) -> Vec<f64> {
    let n = etas.len();
    let mut dist = etas.to_vec();
    for _ in 1..l {
        let mut next = vec![0.0; n];
        for (a, pa) in dist.iter().enumerate() {
            for (b, pb) in etas.iter().enumerate() {
                next[(a + b) % n] += pa * pb;
            }
        }
        dist = next;
    }
    dist
}

/// Index vector `c⃗ ∈ Z_n^L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexVector {
    modulus: usize,
    entries: Vec<usize>,
}

impl IndexVector {
    pub fn new(modulus: usize, entries: Vec<usize>) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidParameter(format!("modulus must be at least 2, got {modulus}")));
        }
        if let Some(&value) = entries.iter().find(|&&c| c >= modulus) {
            return Err(Error::IndexOutOfRange { value, modulus });
        }
        Ok(IndexVector { modulus, entries })
    }

    /// The `index`-th vector of `Z_n^L` in lexicographic order.
    pub fn from_linear(modulus: usize, len: usize, mut index: usize) -> Self {
        let mut entries = vec![0; len];
        for slot in entries.iter_mut().rev() {
            *slot = index % modulus;
            index /= modulus;
        }
        IndexVector { modulus, entries }
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    /// `ω_n(c⃗) = Σ c_l mod n`.
    pub fn omega(&self) -> usize {
        self.entries.iter().fold(0, |acc, &c| (acc + c) % self.modulus)
    }
}

/// `ω_n(c⃗)` for a raw slice, validating the entries.
pub fn omega(n: usize, entries: &[usize]) -> Result<usize> {
    Ok(IndexVector::new(n, entries.to_vec())?.omega())
}

pub(crate) fn check_level(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidParameter("L must be at least 1".into()));
    }
    Ok(())
}

fn check_power_cap(d: usize, l: usize, cap: usize) -> Result<()> {
    let requested = (d as u128).checked_pow(l as u32).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::DimensionCap {
            requested: requested.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    Ok(())
}
