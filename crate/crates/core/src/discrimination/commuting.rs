//! Discrimination problems whose objective blocks share an eigenbasis.
//!
//! If every `η_i A_i = Σ_k w_ik P_k` for one family of orthogonal projectors
//! `P_k` of rank `r_k`, the optimum is `Σ_k r_k max_i w_ik`, attained by
//! assigning each `P_k` to a maximizing index. The same structure survives
//! the modulo-sum coarse graining, which keeps product ensembles tractable
//! long after their explicit matrices stop fitting in memory.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::ensemble::check_level;
use crate::error::{Error, Result};
use crate::operator::{BipartiteDims, HermitianOperator};
use crate::random;

type CMat = DMatrix<Complex64>;

/// Largest number of projector blocks a coarse graining may produce.
pub const MAX_COMMUTING_BLOCKS: usize = 1 << 20;

const COMMUTATOR_TOL: f64 = 1e-10;
const OFF_DIAGONAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutingEnsemble {
    dims: BipartiteDims,
    ranks: Vec<usize>,
    /// `weights[i][k]`: eigenvalue of `η_i A_i` on the `k`-th projector.
    weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutingSolution {
    pub value: f64,
    /// Trace of the dual point `Σ_k (max_i w_ik) P_k`.
    pub dual_bound: f64,
    pub gap: f64,
    /// `measurement[i][k] ∈ {0, 1}`: whether outcome `i` claims projector `k`.
    pub measurement: Vec<Vec<f64>>,
    /// Smallest eigenvalue of `Σ_j w_j M_j − w_i` per outcome `i`.
    pub residual_min_eigs: Vec<f64>,
}

impl CommutingEnsemble {
    pub fn new(dims: BipartiteDims, ranks: Vec<usize>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidEnsemble("no blocks".into()));
        }
        if let Some(row) = weights.iter().find(|row| row.len() != ranks.len()) {
            return Err(Error::WrongSize {
                what: "block weights",
                expected: ranks.len(),
                got: row.len(),
            });
        }
        let total: usize = ranks.iter().sum();
        if total != dims.total() || ranks.contains(&0) {
            return Err(Error::InvalidEnsemble(format!(
                "projector ranks sum to {total}, expected {} with every rank positive",
                dims.total()
            )));
        }
        if weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::InvalidEnsemble("non-finite block weight".into()));
        }
        Ok(CommutingEnsemble { dims, ranks, weights })
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// `Tr(η_i A_i)`, which is `η_i` for states and their partial transposes.
    pub fn priors(&self) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(&self.ranks).map(|(w, &r)| w * r as f64).sum())
            .collect()
    }

    /// Objective value of a diagonal measurement `measurement[i][k]`.
    pub fn objective(&self, measurement: &[Vec<f64>]) -> Result<f64> {
        if measurement.len() != self.len() || measurement.iter().any(|row| row.len() != self.ranks.len()) {
            return Err(Error::WrongSize {
                what: "diagonal measurement",
                expected: self.len(),
                got: measurement.len(),
            });
        }
        let mut value = 0.0;
        for (w_row, m_row) in self.weights.iter().zip(measurement) {
            for ((w, m), &r) in w_row.iter().zip(m_row).zip(&self.ranks) {
                value += r as f64 * w * m;
            }
        }
        Ok(value)
    }

    pub fn solve(&self) -> CommutingSolution {
        solve_diagonal(&self.weights, &self.ranks)
    }

    /// The coarse graining of the `l`-fold product: block `(k_1,…,k_l)` has
    /// rank `Π r_{k_j}` and bin weights given by the cyclic convolution of
    /// the per-copy weight vectors. Block order is lexicographic.
    pub fn coarse_grain(&self, l: usize) -> Result<CommutingEnsemble> {
        check_level(l)?;
        let k = self.ranks.len();
        let blocks = (k as u128).checked_pow(l as u32).unwrap_or(u128::MAX);
        if blocks > MAX_COMMUTING_BLOCKS as u128 {
            return Err(Error::EnumerationTooLarge {
                requested: blocks,
                limit: MAX_COMMUTING_BLOCKS as u128,
            });
        }
        let mut side_a = 1usize;
        let mut side_b = 1usize;
        for _ in 0..l {
            side_a = side_a
                .checked_mul(self.dims.da)
                .ok_or_else(|| Error::InvalidParameter("coarse-grained dimension overflows".into()))?;
            side_b = side_b
                .checked_mul(self.dims.db)
                .ok_or_else(|| Error::InvalidParameter("coarse-grained dimension overflows".into()))?;
        }
        let dims = BipartiteDims::new(side_a, side_b)?;
        let n = self.len();
        let blocks = blocks as usize;
        let mut ranks = Vec::with_capacity(blocks);
        let mut weights = vec![Vec::with_capacity(blocks); n];
        let mut digits = vec![0usize; l];
        for _ in 0..blocks {
            let mut rank = 1usize;
            let mut acc = vec![0.0; n];
            acc[0] = 1.0;
            for &kj in &digits {
                rank *= self.ranks[kj];
                let mut next = vec![0.0; n];
                for (a, &x) in acc.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    for (c, row) in self.weights.iter().enumerate() {
                        next[(a + c) % n] += x * row[kj];
                    }
                }
                acc = next;
            }
            ranks.push(rank);
            for (row, x) in weights.iter_mut().zip(acc) {
                row.push(x);
            }
            for pos in (0..l).rev() {
                digits[pos] += 1;
                if digits[pos] < k {
                    break;
                }
                digits[pos] = 0;
            }
        }
        CommutingEnsemble::new(dims, ranks, weights)
    }

    /// Dense `Σ_k w_ik P_k` for each `i`, given the projectors.
    pub fn dense_blocks(&self, projectors: &[HermitianOperator]) -> Result<Vec<HermitianOperator>> {
        if projectors.len() != self.ranks.len() {
            return Err(Error::WrongSize {
                what: "projectors",
                expected: self.ranks.len(),
                got: projectors.len(),
            });
        }
        self.weights
            .iter()
            .map(|row| {
                let mut acc = HermitianOperator::zeros(self.dims);
                for (p, &w) in projectors.iter().zip(row) {
                    acc = acc.checked_add(&p.scaled(w))?;
                }
                Ok(acc)
            })
            .collect()
    }
}

/// Exact optimum of the diagonal problem; ties go to the lowest index.
pub(crate) fn solve_diagonal(weights: &[Vec<f64>], ranks: &[usize]) -> CommutingSolution {
    let n = weights.len();
    let mut measurement = vec![vec![0.0; ranks.len()]; n];
    let mut value = 0.0;
    let mut best = Vec::with_capacity(ranks.len());
    for (k, &r) in ranks.iter().enumerate() {
        let (arg, max) = (0..n)
            .map(|i| (i, weights[i][k]))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        measurement[arg][k] = 1.0;
        value += r as f64 * max;
        best.push(max);
    }
    let residual_min_eigs = (0..n)
        .map(|i| best.iter().zip(&weights[i]).map(|(b, w)| b - w).fold(f64::INFINITY, f64::min))
        .collect();
    CommutingSolution {
        value,
        dual_bound: value,
        gap: 0.0,
        measurement,
        residual_min_eigs,
    }
}

/// A unitary that diagonalizes every block, with the resulting diagonals.
pub(crate) struct JointBasis {
    unitary: CMat,
    /// `weights[i][k]`: `k`-th diagonal entry of `U† G_i U`.
    pub weights: Vec<Vec<f64>>,
}

impl JointBasis {
    pub fn expand(&self, diagonal: &[f64]) -> CMat {
        let mut scaled = self.unitary.clone();
        for (k, &x) in diagonal.iter().enumerate() {
            scaled.column_mut(k).scale_mut(x);
        }
        &scaled * self.unitary.adjoint()
    }
}

/// Finds a common eigenbasis when the blocks pairwise commute, using the
/// eigenvectors of a generic real combination of them.
pub(crate) fn joint_diagonalization(blocks: &[HermitianOperator]) -> Option<JointBasis> {
    let scale = blocks.iter().map(|g| g.frobenius_norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return None;
    }
    for (i, a) in blocks.iter().enumerate() {
        for b in &blocks[i + 1..] {
            let (am, bm) = (a.matrix(), b.matrix());
            if (am * bm - bm * am).norm() > COMMUTATOR_TOL * scale * scale {
                return None;
            }
        }
    }
    let d = blocks[0].dim();
    let mut rng = random::seeded(0x5eed);
    let mut mix = CMat::zeros(d, d);
    for g in blocks {
        mix += g.matrix() * Complex64::new(rng.random_range(0.5..1.5), 0.0);
    }
    let unitary = HermitianOperator::hermitian_part_of(blocks[0].dims(), &mix).spectrum().eigenvectors;
    let mut weights = Vec::with_capacity(blocks.len());
    for g in blocks {
        let rotated = unitary.adjoint() * g.matrix() * &unitary;
        let mut off = 0.0;
        for r in 0..d {
            for c in 0..d {
                if r != c {
                    off += rotated[(r, c)].norm_sqr();
                }
            }
        }
        if off.sqrt() > OFF_DIAGONAL_TOL * scale {
            return None;
        }
        weights.push((0..d).map(|k| rotated[(k, k)].re).collect());
    }
    Some(JointBasis { unitary, weights })
}
