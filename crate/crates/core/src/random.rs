//! Seeded random operators, states, ensembles and measurements.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::discrimination::Povm;
use crate::ensemble::{EnsembleItem, StateEnsemble};
use crate::operator::{BipartiteDims, HermitianOperator};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Hermitian matrix with i.i.d. Gaussian entries.
pub fn hermitian<R: Rng + ?Sized>(dims: BipartiteDims, rng: &mut R) -> HermitianOperator {
    let d = dims.total();
    let g = ginibre(d, d, rng);
    HermitianOperator::hermitian_part_of(dims, &g)
}

/// Density operator `G G† / Tr(G G†)` with a `d × rank` Ginibre factor;
/// `rank = d` gives the Hilbert-Schmidt measure.
pub fn density<R: Rng + ?Sized>(dims: BipartiteDims, rank: usize, rng: &mut R) -> HermitianOperator {
    let d = dims.total();
    let g = ginibre(d, rank.clamp(1, d), rng);
    let rho = HermitianOperator::hermitian_part_of(dims, &(&g * g.adjoint()));
    let tr = rho.trace();
    rho.scaled(1.0 / tr)
}

/// Haar-random pure state.
pub fn pure_state<R: Rng + ?Sized>(dims: BipartiteDims, rng: &mut R) -> HermitianOperator {
    density(dims, 1, rng)
}

/// Ensemble of full-rank random states with priors drawn uniformly from the
/// simplex.
pub fn ensemble<R: Rng + ?Sized>(dims: BipartiteDims, n: usize, rng: &mut R) -> StateEnsemble {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut etas: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // Pin the sum to one exactly so validation never trips on rounding.
    let head: f64 = etas[..n - 1].iter().sum();
    etas[n - 1] = 1.0 - head;
    let items = etas
        .into_iter()
        .map(|eta| EnsembleItem {
            eta,
            rho: density(dims, dims.total(), rng),
        })
        .collect();
    StateEnsemble::new(items).expect("random ensemble is valid by construction")
}

/// Two random mixed states with `η_0 ~ U(0, 1)`.
pub fn two_state_ensemble<R: Rng + ?Sized>(dims: BipartiteDims, rng: &mut R) -> StateEnsemble {
    let eta0: f64 = rng.random_range(0.0..1.0);
    let rho0 = density(dims, dims.total(), rng);
    let rho1 = density(dims, dims.total(), rng);
    StateEnsemble::new(vec![
        EnsembleItem { eta: eta0, rho: rho0 },
        EnsembleItem {
            eta: 1.0 - eta0,
            rho: rho1,
        },
    ])
    .expect("random ensemble is valid by construction")
}

/// Random `n`-outcome measurement `S^{-1/2} P_i S^{-1/2}` with `S = Σ P_i`.
pub fn povm<R: Rng + ?Sized>(dims: BipartiteDims, n: usize, rng: &mut R) -> Povm {
    let d = dims.total();
    let parts: Vec<DMatrix<Complex64>> = (0..n)
        .map(|_| {
            let g = ginibre(d, d, rng);
            &g * g.adjoint()
        })
        .collect();
    let sum = parts.iter().fold(DMatrix::zeros(d, d), |acc, p| acc + p);
    let s = HermitianOperator::hermitian_part_of(dims, &sum).spectrum();
    let inv_sqrt = s.map(|x| 1.0 / x.sqrt());
    let elements = parts
        .iter()
        .map(|p| HermitianOperator::hermitian_part_of(dims, &(&inv_sqrt * p * &inv_sqrt)))
        .collect();
    Povm::from_elements_unchecked(elements).expect("shared dims")
}
