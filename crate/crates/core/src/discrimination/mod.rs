//! Guessing probabilities, the partial-transpose bound `q_G`, optimality
//! certificates and dual upper bounds.

mod commuting;
mod solver;

pub use commuting::{CommutingEnsemble, CommutingSolution, MAX_COMMUTING_BLOCKS};
pub use solver::{solve_optimal_value, Algorithm, OptimalityReport, SolveMethod, SolverOptions, StepSchedule};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::StateEnsemble;
use crate::error::{Error, Result};
use crate::operator::{BipartiteDims, HermitianOperator};

pub const POVM_PSD_TOL: f64 = 1e-9;
pub const POVM_COMPLETENESS_TOL: f64 = 1e-9;
pub const CERTIFICATE_TOL: f64 = 1e-8;
const ZERO_EIGENVALUE_TOL: f64 = 1e-12;

/// Which operators the guessing objective pairs with the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `Σ η_i Tr(ρ_i^PT M_i)`, whose maximum is `q_G`.
    PartialTranspose,
    /// `Σ η_i Tr(ρ_i M_i)`, whose maximum is `p_G`.
    Global,
}

impl Objective {
    pub fn from_use_pt(use_pt: bool) -> Self {
        if use_pt {
            Objective::PartialTranspose
        } else {
            Objective::Global
        }
    }

    pub fn uses_pt(self) -> bool {
        self == Objective::PartialTranspose
    }
}

/// The objective blocks `η_i A_i` with `A_i = ρ_i^PT` or `ρ_i`.
pub fn objective_blocks(ensemble: &StateEnsemble, objective: Objective) -> Vec<HermitianOperator> {
    (0..ensemble.len())
        .map(|i| ensemble.weighted_state(i, objective.uses_pt()))
        .collect()
}

/// Positive operators summing to the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmJson")]
pub struct Povm {
    dims: BipartiteDims,
    elements: Vec<HermitianOperator>,
}

#[derive(Deserialize)]
struct PovmJson {
    dims: BipartiteDims,
    elements: Vec<HermitianOperator>,
}

impl TryFrom<PovmJson> for Povm {
    type Error = Error;

    fn try_from(json: PovmJson) -> Result<Self> {
        let povm = Povm::new(json.elements)?;
        if povm.dims != json.dims {
            return Err(Error::DimsMismatch {
                left: json.dims,
                right: povm.dims,
            });
        }
        Ok(povm)
    }
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let povm = Self::from_elements_unchecked(elements)?;
        povm.check()?;
        Ok(povm)
    }

    /// Only checks that the elements share dims.
    pub fn from_elements_unchecked(elements: Vec<HermitianOperator>) -> Result<Self> {
        let dims = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("measurement has no elements".into()))?
            .dims();
        if let Some(bad) = elements.iter().find(|m| m.dims() != dims) {
            return Err(Error::DimsMismatch {
                left: dims,
                right: bad.dims(),
            });
        }
        Ok(Povm { dims, elements })
    }

    /// `M_k = 𝟙` and every other element zero: always guess `k`.
    pub fn constant_guess(dims: BipartiteDims, n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::IndexOutOfRange { value: k, modulus: n });
        }
        let elements = (0..n)
            .map(|i| {
                if i == k {
                    HermitianOperator::identity(dims)
                } else {
                    HermitianOperator::zeros(dims)
                }
            })
            .collect();
        Ok(Povm { dims, elements })
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &HermitianOperator {
        &self.elements[i]
    }

    /// Frobenius distance of `Σ M_i` from the identity.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dims.total();
        let mut sum = DMatrix::<Complex64>::zeros(d, d);
        for m in &self.elements {
            sum += m.matrix();
        }
        for i in 0..d {
            sum[(i, i)] -= Complex64::new(1.0, 0.0);
        }
        sum.norm()
    }

    pub fn check(&self) -> Result<()> {
        for (i, m) in self.elements.iter().enumerate() {
            let check = m.psd_check(POVM_PSD_TOL);
            if !check.psd {
                return Err(Error::InvalidPovm(format!(
                    "element {i} is not PSD (min eigenvalue {:e})",
                    check.min_eigenvalue
                )));
            }
        }
        let residual = self.completeness_residual();
        let limit = POVM_COMPLETENESS_TOL * self.dims.total() as f64;
        if residual > limit {
            return Err(Error::InvalidPovm(format!(
                "elements sum to the identity only within {residual:e} (limit {limit:e})"
            )));
        }
        Ok(())
    }

    /// Born probabilities `Tr(ρ M_k)` of every outcome.
    pub fn outcome_probabilities(&self, rho: &HermitianOperator) -> Vec<f64> {
        self.elements.iter().map(|m| rho.inner(m)).collect()
    }
}

fn check_sizes(ensemble: &StateEnsemble, povm: &Povm) -> Result<()> {
    if povm.len() != ensemble.len() {
        return Err(Error::WrongSize {
            what: "measurement",
            expected: ensemble.len(),
            got: povm.len(),
        });
    }
    if povm.dims() != ensemble.dims() {
        return Err(Error::DimsMismatch {
            left: ensemble.dims(),
            right: povm.dims(),
        });
    }
    Ok(())
}

/// `Σ η_i Tr(A_i M_i)` with `A_i = ρ_i^PT` or `ρ_i` depending on `objective`.
pub fn success_probability(ensemble: &StateEnsemble, povm: &Povm, objective: Objective) -> Result<f64> {
    check_sizes(ensemble, povm)?;
    Ok(objective_blocks(ensemble, objective)
        .iter()
        .zip(povm.elements())
        .map(|(g, m)| g.inner(m))
        .sum())
}

fn require_two(ensemble: &StateEnsemble) -> Result<()> {
    if ensemble.len() != 2 {
        return Err(Error::WrongSize {
            what: "two-state closed form",
            expected: 2,
            got: ensemble.len(),
        });
    }
    Ok(())
}

/// `η_0 A_0 − η_1 A_1` for a two-state ensemble.
pub fn two_state_difference(ensemble: &StateEnsemble, objective: Objective) -> Result<HermitianOperator> {
    require_two(ensemble)?;
    let blocks = objective_blocks(ensemble, objective);
    Ok(&blocks[0] - &blocks[1])
}

/// `q_G = ½ + ½ Tr|η_0 ρ_0^PT − η_1 ρ_1^PT|`.
pub fn qg_two_state(ensemble: &StateEnsemble) -> Result<f64> {
    Ok(0.5 + 0.5 * two_state_difference(ensemble, Objective::PartialTranspose)?.trace_norm())
}

/// Helstrom value `½ + ½ Tr|η_0 ρ_0 − η_1 ρ_1|`.
pub fn helstrom_two_state(ensemble: &StateEnsemble) -> Result<f64> {
    Ok(0.5 + 0.5 * two_state_difference(ensemble, Objective::Global)?.trace_norm())
}

/// Projectors onto the non-negative and negative eigenspaces of
/// `η_0 A_0 − η_1 A_1`; optimal for the two-state problem.
pub fn two_state_projector_povm(ensemble: &StateEnsemble, objective: Objective) -> Result<Povm> {
    let delta = two_state_difference(ensemble, objective)?;
    let spectrum = delta.spectrum();
    let dims = delta.dims();
    // Eigenvalues that are zero up to rounding belong to the non-negative
    // side; otherwise kernel noise leaks into M_1.
    let tol = ZERO_EIGENVALUE_TOL * (1.0 + spectrum.max().abs().max(spectrum.min().abs()));
    let m0 = HermitianOperator::hermitian_part_of(dims, &spectrum.map(|x| if x >= -tol { 1.0 } else { 0.0 }));
    let m1 = HermitianOperator::hermitian_part_of(dims, &spectrum.map(|x| if x >= -tol { 0.0 } else { 1.0 }));
    Povm::from_elements_unchecked(vec![m0, m1])
}

/// Per-state residuals of the optimality condition
/// `Σ_j η_j A_j M_j − η_i A_i ⪰ 0`.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// Smallest eigenvalue of the Hermitian part of each residual.
    pub residual_min_eigs: Vec<f64>,
    /// Spectral norm of the anti-Hermitian part of `Σ_j η_j A_j M_j`;
    /// zero at an exact optimum.
    pub asymmetry: f64,
    pub tol: f64,
    pub optimal: bool,
}

impl Certificate {
    pub fn worst_residual(&self) -> f64 {
        self.residual_min_eigs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `Σ_j η_j A_j M_j` as a general matrix.
pub(crate) fn weighted_product_sum(blocks: &[HermitianOperator], povm: &Povm) -> DMatrix<Complex64> {
    let d = povm.dims().total();
    let mut z = DMatrix::<Complex64>::zeros(d, d);
    for (g, m) in blocks.iter().zip(povm.elements()) {
        z += g.matrix() * m.matrix();
    }
    z
}

pub fn certify_optimal(ensemble: &StateEnsemble, povm: &Povm, objective: Objective, tol: f64) -> Result<Certificate> {
    check_sizes(ensemble, povm)?;
    let blocks = objective_blocks(ensemble, objective);
    Ok(certify_blocks(&blocks, povm, tol))
}

pub(crate) fn certify_blocks(blocks: &[HermitianOperator], povm: &Povm, tol: f64) -> Certificate {
    let dims = povm.dims();
    let z = weighted_product_sum(blocks, povm);
    let anti = (&z - z.adjoint()) * Complex64::new(0.0, -0.5);
    let asymmetry = HermitianOperator::hermitian_part_of(dims, &anti)
        .eigenvalues()
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let z = HermitianOperator::hermitian_part_of(dims, &z);
    let residual_min_eigs: Vec<f64> = blocks.iter().map(|g| (&z - g).min_eigenvalue()).collect();
    let optimal = residual_min_eigs.iter().all(|&x| x >= -tol);
    Certificate {
        residual_min_eigs,
        asymmetry,
        tol,
        optimal,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum DualBound {
    /// `H − η_i A_i ⪰ −tol` for all `i`; `Tr H` bounds the optimum.
    Feasible { bound: f64, worst_min_eigenvalue: f64 },
    /// The first state whose constraint fails.
    Rejected { index: usize, min_eigenvalue: f64 },
}

/// Upper bound `Tr H ≥ q_G` for any `H` with `H ⪰ η_i A_i` for all `i`.
pub fn dual_bound(ensemble: &StateEnsemble, h: &HermitianOperator, objective: Objective, tol: f64) -> Result<DualBound> {
    h.check_same_dims(ensemble.state(0))?;
    let mut worst = f64::INFINITY;
    for (index, g) in objective_blocks(ensemble, objective).iter().enumerate() {
        let min_eigenvalue = (h - g).min_eigenvalue();
        if min_eigenvalue < -tol {
            return Ok(DualBound::Rejected { index, min_eigenvalue });
        }
        worst = worst.min(min_eigenvalue);
    }
    Ok(DualBound::Feasible {
        bound: h.trace(),
        worst_min_eigenvalue: worst,
    })
}

/// `Σ_i (η_i A_i)^(+)`, a feasible dual point for any ensemble.
pub fn positive_part_dual(ensemble: &StateEnsemble, objective: Objective) -> HermitianOperator {
    objective_blocks(ensemble, objective)
        .iter()
        .map(HermitianOperator::positive_part)
        .reduce(|a, b| &a + &b)
        .expect("ensembles are non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{bell_singlet, example1};

    fn basis(dims: BipartiteDims, k: usize) -> HermitianOperator {
        let mut diag = vec![0.0; dims.total()];
        diag[k] = 1.0;
        HermitianOperator::from_real_diagonal(dims, &diag).unwrap()
    }

    fn product_pair() -> StateEnsemble {
        let dims = BipartiteDims::new(2, 2).unwrap();
        StateEnsemble::from_pairs([(0.5, basis(dims, 0)), (0.5, basis(dims, 1))]).unwrap()
    }

    #[test]
    fn constant_guess_returns_prior() {
        let e = example1(&bell_singlet()).unwrap().ensemble;
        let m = Povm::constant_guess(e.dims(), 2, 0).unwrap();
        for objective in [Objective::Global, Objective::PartialTranspose] {
            let p = success_probability(&e, &m, objective).unwrap();
            assert!((p - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_projectors_succeed_with_certainty() {
        let e = product_pair();
        let dims = e.dims();
        let rest = HermitianOperator::from_real_diagonal(dims, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        let m = Povm::new(vec![&basis(dims, 0) + &rest, basis(dims, 1)]).unwrap();
        assert!((success_probability(&e, &m, Objective::Global).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let e = product_pair();
        let m = Povm::constant_guess(e.dims(), 3, 0).unwrap();
        assert!(matches!(
            success_probability(&e, &m, Objective::Global),
            Err(Error::WrongSize { .. })
        ));
    }

    #[test]
    fn two_state_closed_forms() {
        let dims = BipartiteDims::new(2, 2).unwrap();
        let rho = basis(dims, 2);
        let same = StateEnsemble::from_pairs([(0.5, rho.clone()), (0.5, rho)]).unwrap();
        assert!((qg_two_state(&same).unwrap() - 0.5).abs() < 1e-15);
        assert!((helstrom_two_state(&same).unwrap() - 0.5).abs() < 1e-15);
        // |00⟩ and |01⟩ stay orthogonal product states after PT.
        let e = product_pair();
        assert!((qg_two_state(&e).unwrap() - 1.0).abs() < 1e-14);
        assert!((helstrom_two_state(&e).unwrap() - 1.0).abs() < 1e-14);
        let bell = example1(&bell_singlet()).unwrap().ensemble;
        assert!((qg_two_state(&bell).unwrap() - 0.75).abs() < 1e-12);
        assert!((helstrom_two_state(&bell).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_need_two_states() {
        let dims = BipartiteDims::new(1, 3).unwrap();
        let e = StateEnsemble::from_pairs((0..3).map(|k| (1.0 / 3.0, basis(dims, k)))).unwrap();
        assert!(matches!(qg_two_state(&e), Err(Error::WrongSize { expected: 2, got: 3, .. })));
        assert!(helstrom_two_state(&e).is_err());
    }

    #[test]
    fn projector_measurement_certifies_and_swap_fails() {
        let e = example1(&bell_singlet()).unwrap().ensemble;
        let m = two_state_projector_povm(&e, Objective::PartialTranspose).unwrap();
        m.check().unwrap();
        let cert = certify_optimal(&e, &m, Objective::PartialTranspose, CERTIFICATE_TOL).unwrap();
        assert!(cert.optimal, "{cert:?}");
        assert!(cert.asymmetry < 1e-12);
        let swapped = Povm::new(vec![m.element(1).clone(), m.element(0).clone()]).unwrap();
        let cert = certify_optimal(&e, &swapped, Objective::PartialTranspose, CERTIFICATE_TOL).unwrap();
        assert!(!cert.optimal);
        assert!(cert.worst_residual() < -CERTIFICATE_TOL);
    }

    #[test]
    fn dual_bound_rejects_zero() {
        let e = product_pair();
        let zero = HermitianOperator::zeros(e.dims());
        match dual_bound(&e, &zero, Objective::PartialTranspose, 1e-9).unwrap() {
            DualBound::Rejected { index, min_eigenvalue } => {
                assert_eq!(index, 0);
                assert!((min_eigenvalue + 0.5).abs() < 1e-12);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn positive_part_dual_is_feasible() {
        let e = example1(&bell_singlet()).unwrap().ensemble;
        let h = positive_part_dual(&e, Objective::PartialTranspose);
        match dual_bound(&e, &h, Objective::PartialTranspose, 1e-9).unwrap() {
            DualBound::Feasible { bound, .. } => assert!(bound >= qg_two_state(&e).unwrap() - 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn povm_validation() {
        let dims = BipartiteDims::new(1, 2).unwrap();
        let half = HermitianOperator::identity(dims).scaled(0.5);
        assert!(Povm::new(vec![half.clone(), half.clone()]).is_ok());
        assert!(Povm::new(vec![half.clone(), half.scaled(0.5)]).is_err());
        let neg = HermitianOperator::from_real_diagonal(dims, &[1.5, 1.0]).unwrap();
        let rest = HermitianOperator::from_real_diagonal(dims, &[-0.5, 0.0]).unwrap();
        assert!(Povm::new(vec![neg, rest]).is_err());
    }
}
