//! Randomized operator checks shared by the property tests and the
//! acceptance run.

#![allow(dead_code)]

use qhide::discrimination::Povm;
use qhide::operator::DEFAULT_DIM_CAP;
use qhide::random;
use qhide::{BipartiteDims, HermitianOperator};

pub fn dims(da: usize, db: usize) -> BipartiteDims {
    BipartiteDims::new(da, db).unwrap()
}

/// Largest entry of `A − B` in absolute value.
pub fn max_diff(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    (a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius_diff(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    (a.matrix() - b.matrix()).norm()
}

pub type Check = Result<(), String>;

pub fn pt_involution(seed: u64, da: usize, db: usize) -> Check {
    let e = random::hermitian(dims(da, db), &mut random::seeded(seed));
    let back = e.partial_transpose().partial_transpose();
    if back.matrix() == e.matrix() {
        Ok(())
    } else {
        Err(format!("(A^PT)^PT differs from A by {:e}", max_diff(&back, &e)))
    }
}

pub fn pt_trace_and_hermiticity(seed: u64, da: usize, db: usize) -> Check {
    let e = random::hermitian(dims(da, db), &mut random::seeded(seed));
    let pt = e.partial_transpose();
    let (t, tp) = (e.trace(), pt.trace());
    if (t - tp).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(format!("Tr A = {t}, Tr A^PT = {tp}"));
    }
    HermitianOperator::new(pt.dims(), pt.matrix().clone())
        .map(|_| ())
        .map_err(|e| format!("A^PT fails the Hermiticity check: {e}"))
}

pub fn positive_negative_parts(seed: u64, da: usize, db: usize) -> Check {
    let e = random::hermitian(dims(da, db), &mut random::seeded(seed));
    let (p, m) = (e.positive_part(), e.negative_part());
    let d = e.dim() as f64;
    let fro = e.frobenius_norm();
    let residual = frobenius_diff(&(&p - &m), &e);
    if residual > 1e-9 * d {
        return Err(format!("‖E⁺ − E⁻ − E‖_F = {residual:e}"));
    }
    for (name, part) in [("E⁺", &p), ("E⁻", &m)] {
        let low = part.min_eigenvalue();
        if low < -1e-9 * fro {
            return Err(format!("λ_min({name}) = {low:e}"));
        }
    }
    Ok(())
}

/// `Tr|A⊗B| = Tr|A|·Tr|B|` with the left side from the explicit product.
pub fn trace_norm_multiplicativity(seed: u64, left: BipartiteDims, right: BipartiteDims) -> Check {
    let mut rng = random::seeded(seed);
    let a = random::hermitian(left, &mut rng);
    let b = random::hermitian(right, &mut rng);
    let product = a.tensor(&b, DEFAULT_DIM_CAP).map_err(|e| e.to_string())?;
    let expected = a.trace_norm() * b.trace_norm();
    let got = product.trace_norm();
    if (got - expected).abs() > 1e-8 * expected {
        return Err(format!("Tr|A⊗B| = {got}, Tr|A|·Tr|B| = {expected}"));
    }
    Ok(())
}

/// Dimension pairs whose product is at most 16.
pub fn small_factor_pair(k: u64) -> (BipartiteDims, BipartiteDims) {
    const SHAPES: [(usize, usize); 4] = [(1, 2), (2, 1), (2, 2), (1, 3)];
    const PAIRS: [(usize, usize); 8] = [(0, 0), (0, 1), (1, 2), (2, 0), (2, 2), (3, 3), (3, 0), (1, 1)];
    let (i, j) = PAIRS[(k % PAIRS.len() as u64) as usize];
    let (a, b) = (SHAPES[i], SHAPES[j]);
    (dims(a.0, a.1), dims(b.0, b.1))
}

/// Local dimensions cycling through 1..=4 on each side.
pub fn local_dims(k: u64) -> (usize, usize) {
    ((k % 4) as usize + 1, ((k / 4) % 4) as usize + 1)
}

/// `M_k = Σ_{a+b ≡ k} A_a ⊗ B_b` from random local two-outcome measurements.
pub fn local_parity_measurement(seed: u64) -> Povm {
    let mut rng = random::seeded(seed);
    let alice = random::povm(dims(2, 1), 2, &mut rng);
    let bob = random::povm(dims(1, 2), 2, &mut rng);
    let mut elements = vec![HermitianOperator::zeros(dims(2, 2)), HermitianOperator::zeros(dims(2, 2))];
    for a in 0..2 {
        for b in 0..2 {
            let term = alice.element(a).tensor(bob.element(b), DEFAULT_DIM_CAP).unwrap();
            elements[(a + b) % 2] = &elements[(a + b) % 2] + &term;
        }
    }
    Povm::new(elements).unwrap()
}
