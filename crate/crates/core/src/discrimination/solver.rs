//! First-order solvers for `max Σ_i Tr(G_i M_i)` over measurements, with
//! `G_i = η_i ρ_i^PT` (or `η_i ρ_i`).
//!
//! Two algorithms share the feasible set `{M_i ⪰ 0, Σ M_i = 𝟙}`:
//!
//! * projected gradient: an ascent step `M_i + t·G_i`, then Dykstra's
//!   projection alternating blockwise eigenvalue clipping with the affine
//!   correction `M_i − (Σ_j M_j − 𝟙)/n`;
//! * ADMM (the default): the same clipping and affine correction, applied
//!   once each per iteration to a split copy of the iterate.
//!
//! Every few iterations the iterate is repaired into an exact measurement
//! and paired with a dual point `H + λ𝟙`, where `H` is either
//! `Herm(Σ_j G_j M_j)` or the multiplier of the completeness constraint, and
//! `λ = max_i λ_max(G_i − H)`. Such a point is always dual feasible, so
//! `Tr H + λD − value` is a valid optimality gap at every check.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::commuting::{joint_diagonalization, solve_diagonal};
use super::{certify_blocks, objective_blocks, Objective, Povm};
use crate::ensemble::StateEnsemble;
use crate::error::{Error, Result};
use crate::operator::{complex_identity, BipartiteDims, HermitianOperator, DEFAULT_DIM_CAP};

type CMat = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `t = 1/‖(G_i)_i‖_F` at every iteration.
    Fixed,
    /// `t_k = t_0 · min(factor^k, max_scale)` with `t_0 = 1/‖(G_i)_i‖_F`.
    Growing { factor: f64, max_scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Admm,
    ProjectedGradient,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    pub gap_tol: f64,
    /// Projected gradient only.
    pub step: StepSchedule,
    pub dykstra_max_iters: usize,
    /// Dykstra stops once the clipped iterate violates completeness by less
    /// than this (Frobenius norm).
    pub dykstra_tol: f64,
    /// Nesterov momentum on the shared Dykstra shift.
    pub dykstra_momentum: bool,
    /// Iterations between dual-gap evaluations.
    pub check_every: usize,
    /// Eigenvalues below this are zeroed when clipping.
    pub clip_tol: f64,
    /// Solve jointly diagonalizable problems in their common eigenbasis.
    pub reduce_commuting: bool,
    pub cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            algorithm: Algorithm::Admm,
            max_iters: 20000,
            gap_tol: 1e-6,
            step: StepSchedule::Growing {
                factor: 2.0,
                max_scale: 1e8,
            },
            dykstra_max_iters: 400,
            dykstra_tol: 1e-9,
            dykstra_momentum: false,
            check_every: 5,
            clip_tol: 0.0,
            reduce_commuting: true,
            cap: DEFAULT_DIM_CAP,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.gap_tol) || self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::InvalidParameter(
                "solver needs gap_tol > 0, max_iters >= 1 and check_every >= 1".into(),
            ));
        }
        if let StepSchedule::Growing { factor, max_scale } = self.step {
            if !(factor >= 1.0 && max_scale >= 1.0) {
                return Err(Error::InvalidParameter("growing step needs factor >= 1 and max_scale >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    pub objective: Objective,
    /// Objective value attained by `povm`.
    pub value: f64,
    pub povm: Povm,
    #[serde(rename = "dual_H")]
    pub dual_h: HermitianOperator,
    /// `Tr dual_H − value`.
    pub gap: f64,
    pub residual_min_eigs: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Best objective value seen by each dual check, so non-decreasing.
    pub history: Vec<f64>,
    pub method: SolveMethod,
}

impl OptimalityReport {
    pub fn upper_bound(&self) -> f64 {
        self.value + self.gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Admm,
    ProjectedGradient,
    CommutingReduction,
}

/// Maximizes the guessing objective over all measurements.
///
/// Non-convergence is reported through `converged = false`; the returned
/// measurement and dual operator are still valid and bracket the optimum.
pub fn solve_optimal_value(ensemble: &StateEnsemble, objective: Objective, opts: &SolverOptions) -> Result<OptimalityReport> {
    opts.validate()?;
    let dims = ensemble.dims();
    if dims.total() > opts.cap {
        return Err(Error::DimensionCap {
            requested: dims.total(),
            cap: opts.cap,
        });
    }
    let blocks = objective_blocks(ensemble, objective);
    if opts.reduce_commuting && blocks.len() > 1 {
        if let Some(basis) = joint_diagonalization(&blocks) {
            let diag = solve_diagonal(&basis.weights, &vec![1; dims.total()]);
            let elements: Vec<CMat> = diag.measurement.iter().map(|m| basis.expand(m)).collect();
            let povm = repair(dims, &elements);
            return Ok(Incumbent::new(&blocks, povm).report(&blocks, objective, opts, 0, SolveMethod::CommutingReduction));
        }
    }
    Ok(match opts.algorithm {
        Algorithm::Admm => admm(&blocks, objective, opts),
        Algorithm::ProjectedGradient => projected_gradient(&blocks, objective, opts),
    })
}

/// `H + λ𝟙` with the smallest `λ` making it dominate every block.
fn lift(blocks: &[HermitianOperator], h: &HermitianOperator) -> HermitianOperator {
    let shift = blocks.iter().map(|g| (g - h).max_eigenvalue()).fold(f64::NEG_INFINITY, f64::max);
    h + &HermitianOperator::identity(h.dims()).scaled(shift)
}

fn objective_value(blocks: &[HermitianOperator], povm: &Povm) -> f64 {
    blocks.iter().zip(povm.elements()).map(|(g, m)| g.inner(m)).sum()
}

/// Best measurement and best dual point seen so far. Both are valid on their
/// own, so the gap between them only shrinks.
struct Incumbent {
    povm: Povm,
    value: f64,
    dual: HermitianOperator,
    history: Vec<f64>,
}

impl Incumbent {
    fn new(blocks: &[HermitianOperator], povm: Povm) -> Self {
        let value = objective_value(blocks, &povm);
        let z = HermitianOperator::hermitian_part_of(povm.dims(), &super::weighted_product_sum(blocks, &povm));
        let dual = lift(blocks, &z);
        Incumbent {
            povm,
            value,
            dual,
            history: vec![value],
        }
    }

    /// Offers a repaired iterate and, optionally, a dual candidate; the
    /// measurement's own `Herm(Σ_j G_j M_j)` is always tried as well.
    fn offer(&mut self, blocks: &[HermitianOperator], povm: Povm, candidate: Option<&HermitianOperator>) {
        let value = objective_value(blocks, &povm);
        let z = HermitianOperator::hermitian_part_of(povm.dims(), &super::weighted_product_sum(blocks, &povm));
        for h in std::iter::once(&z).chain(candidate) {
            let dual = lift(blocks, h);
            if dual.trace() < self.dual.trace() {
                self.dual = dual;
            }
        }
        if value > self.value {
            self.value = value;
            self.povm = povm;
        }
        self.history.push(self.value);
    }

    /// Weak duality makes the gap non-negative up to rounding.
    fn gap(&self) -> f64 {
        (self.dual.trace() - self.value).max(0.0)
    }

    fn report(
        self,
        blocks: &[HermitianOperator],
        objective: Objective,
        opts: &SolverOptions,
        iterations: usize,
        method: SolveMethod,
    ) -> OptimalityReport {
        let gap = self.gap();
        let cert = certify_blocks(blocks, &self.povm, 10.0 * opts.gap_tol);
        OptimalityReport {
            objective,
            value: self.value,
            converged: gap <= opts.gap_tol,
            gap,
            dual_h: self.dual,
            residual_min_eigs: cert.residual_min_eigs,
            povm: self.povm,
            iterations,
            history: self.history,
            method,
        }
    }
}

fn uniform_start(n: usize, d: usize) -> Vec<CMat> {
    (0..n).map(|_| complex_identity(d).unscale(n as f64)).collect()
}

fn projected_gradient(blocks: &[HermitianOperator], objective: Objective, opts: &SolverOptions) -> OptimalityReport {
    let n = blocks.len();
    let dims = blocks[0].dims();
    let d = dims.total();
    let grads: Vec<CMat> = blocks.iter().map(|g| g.matrix().clone()).collect();
    let grad_norm = grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
    let mut iterate = uniform_start(n, d);
    let mut incumbent = Incumbent::new(blocks, repair(dims, &iterate));
    if grad_norm == 0.0 {
        return incumbent.report(blocks, objective, opts, 0, SolveMethod::ProjectedGradient);
    }
    let base_step = 1.0 / grad_norm;

    let mut projection = DykstraState::new(d);
    let mut iterations = 0;
    let mut previous_step = base_step;
    for k in 0..opts.max_iters {
        iterations = k + 1;
        let step = match opts.step {
            StepSchedule::Fixed => base_step,
            StepSchedule::Growing { factor, max_scale } => base_step * factor.powi(k.min(i32::MAX as usize) as i32).min(max_scale),
        };
        let shifted: Vec<CMat> = iterate.iter().zip(&grads).map(|(m, g)| m + g * Complex64::new(step, 0.0)).collect();
        // The optimal shift grows linearly with the step once the iterate
        // settles, so rescale the warm start accordingly.
        projection.shift.scale_mut(step / previous_step);
        previous_step = step;
        iterate = projection.project(&shifted, opts);

        if k % opts.check_every == 0 || k + 1 == opts.max_iters {
            // At a fixed point M_i = P_+(M_i + t G_i − Λ), so Λ/t − G_i ⪰ 0:
            // the scaled shift is itself a dual candidate.
            let multiplier = HermitianOperator::hermitian_part_of(dims, &projection.shift.unscale(step));
            incumbent.offer(blocks, repair(dims, &iterate), Some(&multiplier));
            if incumbent.gap() <= opts.gap_tol {
                break;
            }
        }
    }
    incumbent.report(blocks, objective, opts, iterations, SolveMethod::ProjectedGradient)
}

/// ADMM on the split `M_i = N_i`, with `Σ M_i = 𝟙` on the `M` side and
/// `N_i ⪰ 0` on the `N` side. The `M` update is the closed-form affine
/// projection, whose multiplier `−ρ·C` is a dual candidate.
fn admm(blocks: &[HermitianOperator], objective: Objective, opts: &SolverOptions) -> OptimalityReport {
    let n = blocks.len();
    let dims = blocks[0].dims();
    let d = dims.total();
    let grads: Vec<CMat> = blocks.iter().map(|g| g.matrix().clone()).collect();
    let mut split = uniform_start(n, d);
    let mut incumbent = Incumbent::new(blocks, repair(dims, &split));
    let scale = grads.iter().map(|g| g.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return incumbent.report(blocks, objective, opts, 0, SolveMethod::Admm);
    }
    let mut rho = scale;
    let mut dual: Vec<CMat> = vec![CMat::zeros(d, d); n];
    let mut iterations = 0;
    for k in 0..opts.max_iters {
        iterations = k + 1;
        let v: Vec<CMat> = split
            .iter()
            .zip(&dual)
            .zip(&grads)
            .map(|((z, u), g)| z - u + g.unscale(rho))
            .collect();
        let mut correction = v.iter().fold(CMat::zeros(d, d), |acc, x| acc + x);
        for i in 0..d {
            correction[(i, i)] -= Complex64::new(1.0, 0.0);
        }
        let correction = correction.unscale(n as f64);
        let primal: Vec<CMat> = v.iter().map(|x| x - &correction).collect();
        let previous = std::mem::take(&mut split);
        split = primal.iter().zip(&dual).map(|(m, u)| psd_clip(&(m + u), opts.clip_tol)).collect();
        let mut r2 = 0.0;
        let mut s2 = 0.0;
        for i in 0..n {
            let residual = &primal[i] - &split[i];
            r2 += residual.norm_squared();
            s2 += (&split[i] - &previous[i]).norm_squared();
            dual[i] += residual;
        }

        if k % opts.check_every == 0 || k + 1 == opts.max_iters {
            let multiplier = HermitianOperator::hermitian_part_of(dims, &(&correction * Complex64::new(-rho, 0.0)));
            incumbent.offer(blocks, repair(dims, &split), Some(&multiplier));
            if incumbent.gap() <= opts.gap_tol {
                break;
            }
        }
        // Residual balancing keeps the primal and dual residuals comparable.
        let (r, s) = (r2.sqrt(), rho * s2.sqrt());
        if r > 10.0 * s {
            rho *= 2.0;
            dual.iter_mut().for_each(|u| *u = u.unscale(2.0));
        } else if s > 10.0 * r {
            rho /= 2.0;
            dual.iter_mut().for_each(|u| *u *= Complex64::new(2.0, 0.0));
        }
    }
    incumbent.report(blocks, objective, opts, iterations, SolveMethod::Admm)
}

/// Cyclic Dykstra between the per-block PSD cone and the completeness plane.
///
/// The affine projection subtracts the same `(Σ_j M_j − 𝟙)/n` from every
/// block, so the PSD increments all collapse to one shared shift `Λ`: each
/// sweep clips `Y_i − Λ` and then moves `Λ` by the completeness excess over
/// `n`. Keeping `Λ` explicit lets consecutive projections warm-start, and
/// optional momentum accelerates the sweep.
pub(crate) struct DykstraState {
    shift: CMat,
}

impl DykstraState {
    pub fn new(d: usize) -> Self {
        DykstraState { shift: CMat::zeros(d, d) }
    }

    pub fn project(&mut self, target: &[CMat], opts: &SolverOptions) -> Vec<CMat> {
        let n = target.len();
        let d = self.shift.nrows();
        let mut lookahead = self.shift.clone();
        let mut previous = self.shift.clone();
        let mut result = Vec::new();
        for sweep in 0..opts.dykstra_max_iters.max(1) {
            let clipped: Vec<CMat> = target.iter().map(|t| psd_clip(&(t - &lookahead), opts.clip_tol)).collect();
            let mut excess = clipped.iter().fold(CMat::zeros(d, d), |acc, c| acc + c);
            for i in 0..d {
                excess[(i, i)] -= Complex64::new(1.0, 0.0);
            }
            let correction = excess.unscale(n as f64);
            let next = &lookahead + &correction;
            result = clipped.into_iter().map(|c| c - &correction).collect();
            if excess.norm() <= opts.dykstra_tol {
                self.shift = next;
                break;
            }
            lookahead = if opts.dykstra_momentum {
                let beta = sweep as f64 / (sweep as f64 + 3.0);
                &next + (&next - &previous) * Complex64::new(beta, 0.0)
            } else {
                next.clone()
            };
            previous = next;
            self.shift = previous.clone();
        }
        result
    }
}

fn psd_clip(m: &CMat, clip_tol: f64) -> CMat {
    let h = hermitize(m);
    let eig = h.symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let keep = if lambda > clip_tol { lambda } else { 0.0 };
        scaled.column_mut(k).scale_mut(keep);
    }
    hermitize(&(scaled * eig.eigenvectors.adjoint()))
}

fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).unscale(2.0)
}

/// Turns an approximate iterate into an exact measurement: clip each block
/// to PSD, then conjugate by `S^{-1/2}` with `S = Σ_i M_i`.
pub(crate) fn repair(dims: BipartiteDims, iterate: &[CMat]) -> Povm {
    let d = dims.total();
    let clipped: Vec<CMat> = iterate.iter().map(|m| psd_clip(m, 0.0)).collect();
    let sum = clipped.iter().fold(CMat::zeros(d, d), |acc, c| acc + c);
    let spectrum = HermitianOperator::hermitian_part_of(dims, &sum).spectrum();
    let elements = if spectrum.min() > 1e-6 {
        let inv_sqrt = spectrum.map(|x| 1.0 / x.sqrt());
        clipped
            .iter()
            .map(|c| HermitianOperator::hermitian_part_of(dims, &(&inv_sqrt * c * &inv_sqrt)))
            .collect()
    } else {
        // Degenerate iterate: fall back to the uniform measurement.
        let n = iterate.len() as f64;
        (0..iterate.len())
            .map(|_| HermitianOperator::identity(dims).scaled(1.0 / n))
            .collect()
    };
    Povm::from_elements_unchecked(elements).expect("shared dims")
}
