//! Builders for the two worked ensembles: the NPT-state pair built from
//! `|σ^PT| ± σ^PT`, and products of extreme Werner states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::discrimination::{CommutingEnsemble, Povm};
use crate::ensemble::{EnsembleItem, StateEnsemble};
use crate::error::{Error, Result};
use crate::operator::{BipartiteDims, HermitianOperator};
use crate::random;

/// `σ` must have `λ_min(σ^PT)` below this to count as NPT.
pub const NPT_TOL: f64 = 1e-9;

fn two_qudit(d: usize) -> Result<BipartiteDims> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("local dimension must be at least 2, got {d}")));
    }
    BipartiteDims::new(d, d)
}

fn real_matrix(d: usize, f: impl Fn(usize, usize) -> f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |r, c| Complex64::new(f(r, c), 0.0))
}

/// `|ψ⁻⟩⟨ψ⁻|` with `|ψ⁻⟩ = (|01⟩ − |10⟩)/√2`.
pub fn bell_singlet() -> HermitianOperator {
    let dims = BipartiteDims::new(2, 2).expect("2x2");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = [0.0, s, -s, 0.0].map(|x| Complex64::new(x, 0.0));
    HermitianOperator::pure_state(dims, &psi).expect("unit vector")
}

/// Flip operator `F|ij⟩ = |ji⟩` on `d ⊗ d`.
pub fn flip_operator(d: usize) -> Result<HermitianOperator> {
    let dims = two_qudit(d)?;
    let mat = real_matrix(d * d, |r, c| if r == (c % d) * d + c / d { 1.0 } else { 0.0 });
    HermitianOperator::new(dims, mat)
}

/// `Π_0 = (1/d) Σ_ij |ii⟩⟨jj|` and `Π_1 = 𝟙 − Π_0`.
pub fn werner_projectors(d: usize) -> Result<(HermitianOperator, HermitianOperator)> {
    let dims = two_qudit(d)?;
    let diagonal = |k: usize| k.is_multiple_of(d + 1);
    let p0 = real_matrix(d * d, |r, c| if diagonal(r) && diagonal(c) { 1.0 / d as f64 } else { 0.0 });
    let p0 = HermitianOperator::new(dims, p0)?;
    let p1 = &HermitianOperator::identity(dims) - &p0;
    Ok((p0, p1))
}

/// `p Φ + (1 − p) 𝟙/d²` with `Φ` the maximally entangled projector; NPT
/// exactly when `p > 1/(d + 1)`.
pub fn isotropic_state(d: usize, p: f64) -> Result<HermitianOperator> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("mixing weight {p} is outside [0, 1]")));
    }
    let (phi, _) = werner_projectors(d)?;
    let dims = phi.dims();
    let noise = HermitianOperator::identity(dims).scaled((1.0 - p) / (d * d) as f64);
    Ok(&phi.scaled(p) + &noise)
}

/// Haar-random pure state on `d ⊗ d`, redrawn until it is NPT.
pub fn random_npt_state(d: usize, seed: u64) -> Result<HermitianOperator> {
    let dims = two_qudit(d)?;
    let mut rng = random::seeded(seed);
    loop {
        let sigma = random::pure_state(dims, &mut rng);
        if sigma.partial_transpose().min_eigenvalue() < -NPT_TOL {
            return Ok(sigma);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Example1 {
    pub ensemble: StateEnsemble,
    /// `T = Tr|σ^PT|`.
    pub trace_norm: f64,
    /// `(T + 1)/(2T)`, which is also `q_G` and `p_L` of the ensemble.
    pub eta0: f64,
}

/// Two orthogonal states from the positive and negative parts of `σ^PT`:
/// `η_0 = (T+1)/(2T)`, `ρ_0 = (|σ^PT| + σ^PT)/(T+1)`,
/// `η_1 = (T−1)/(2T)`, `ρ_1 = (|σ^PT| − σ^PT)/(T−1)`.
pub fn example1(sigma: &HermitianOperator) -> Result<Example1> {
    let check = StateEnsemble::new(vec![EnsembleItem {
        eta: 1.0,
        rho: sigma.clone(),
    }]);
    if let Err(e) = check {
        return Err(Error::InvalidParameter(format!("σ is not a density operator: {e}")));
    }
    let sigma_pt = sigma.partial_transpose();
    let spectrum = sigma_pt.spectrum();
    let min_eigenvalue = spectrum.min();
    if min_eigenvalue >= -NPT_TOL {
        return Err(Error::NotNpt { min_eigenvalue });
    }
    let dims = sigma.dims();
    let t: f64 = spectrum.eigenvalues.iter().map(|x| x.abs()).sum();
    let plus = HermitianOperator::hermitian_part_of(dims, &spectrum.map(|x| x.max(0.0)));
    let minus = HermitianOperator::hermitian_part_of(dims, &spectrum.map(|x| (-x).max(0.0)));
    // |σ^PT| ± σ^PT = 2 (σ^PT)^(±); normalizing by the parts' own traces
    // keeps Tr ρ_i = 1 to rounding.
    let (tp, tm) = (plus.trace(), minus.trace());
    let eta0 = (t + 1.0) / (2.0 * t);
    let ensemble = StateEnsemble::new(vec![
        EnsembleItem {
            eta: eta0,
            rho: plus.scaled(1.0 / tp),
        },
        EnsembleItem {
            eta: 1.0 - eta0,
            rho: minus.scaled(1.0 / tm),
        },
    ])?;
    Ok(Example1 {
        ensemble,
        trace_norm: t,
        eta0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WernerParams {
    pub m: usize,
    pub n: usize,
    pub d: usize,
}

impl WernerParams {
    pub fn new(m: usize, n: usize, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("d must be at least 2, got {d}")));
        }
        if !(1..=62).contains(&m) {
            return Err(Error::InvalidParameter(format!("m must lie in 1..=62, got {m}")));
        }
        if !(1usize << (m - 1) < n && n <= 1usize << m) {
            return Err(Error::InvalidParameter(format!(
                "n must satisfy 2^(m-1) < n <= 2^m; got m={m}, n={n}"
            )));
        }
        Ok(WernerParams { m, n, d })
    }

    /// Parses `m,n,d`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("expected m,n,d as integers in {s:?}: {e}")))?;
        match parts[..] {
            [m, n, d] => WernerParams::new(m, n, d),
            _ => Err(Error::InvalidParameter(format!("expected three values m,n,d, got {s:?}"))),
        }
    }
}

/// Digits `b_1(i), …, b_m(i)` of `i`, least significant first.
pub fn bits(i: usize, m: usize) -> Vec<u8> {
    (0..m).map(|k| ((i >> k) & 1) as u8).collect()
}

/// `(2^{1/m} + 1)/(2^{1/m} − 1)`: from this `d` on, the Werner-product
/// ensemble has `q_G < 2/n`.
pub fn d_threshold(m: usize) -> f64 {
    let r = 2f64.powf(1.0 / m as f64);
    (r + 1.0) / (r - 1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Example2 {
    pub params: WernerParams,
    /// `Π_k (d² + (−1)^{b_k(i)} d)` for each `i < n`.
    pub weight_numerators: Vec<u128>,
    /// Sum of the numerators.
    pub normalization: u128,
    pub etas: Vec<f64>,
    /// `(d² + d)^m / N`, equal to `q_G` of the ensemble.
    pub eta0: f64,
    /// `(1/n)(1 + 2/(d − 1))^m`, a strict upper bound on `eta0`.
    pub qg_bound: f64,
    pub d_threshold: f64,
    pub meets_threshold: bool,
    /// `ρ_0` is a product of separable Werner states; recorded, not checked.
    pub rho0_separable: bool,
    /// `None` when `(d²)^m` exceeds the dimension cap.
    pub ensemble: Option<StateEnsemble>,
}

impl Example2 {
    pub fn formulas_only(&self) -> bool {
        self.ensemble.is_none()
    }

    /// The measurement `M_0 = 𝟙`, `M_i = 0` otherwise.
    pub fn guess_zero_povm(&self) -> Option<Povm> {
        let e = self.ensemble.as_ref()?;
        Some(Povm::constant_guess(e.dims(), self.params.n, 0).expect("n >= 1"))
    }
}

fn numerator(d: usize, b: &[u8]) -> Result<u128> {
    let d = d as u128;
    let overflow = || Error::InvalidParameter("normalization overflows 128-bit integers".into());
    let sq = d.checked_mul(d).ok_or_else(overflow)?;
    b.iter().try_fold(1u128, |acc, &bit| {
        let factor = if bit == 0 { sq + d } else { sq - d };
        acc.checked_mul(factor).ok_or_else(overflow)
    })
}

/// Ensemble of `m`-fold products of `(𝟙 ± F)/(d² ± d)` with signs from the
/// binary digits of `i`, plus its reference values. Matrices are built only
/// when `(d²)^m ≤ cap`.
pub fn example2(params: WernerParams, cap: usize) -> Result<Example2> {
    let WernerParams { m, n, d } = params;
    let weight_numerators = (0..n).map(|i| numerator(d, &bits(i, m))).collect::<Result<Vec<_>>>()?;
    let normalization = weight_numerators
        .iter()
        .try_fold(0u128, |acc, &w| acc.checked_add(w))
        .ok_or_else(|| Error::InvalidParameter("normalization overflows 128-bit integers".into()))?;
    let etas: Vec<f64> = weight_numerators.iter().map(|&w| w as f64 / normalization as f64).collect();
    let eta0 = etas[0];
    let qg_bound = (1.0 + 2.0 / (d as f64 - 1.0)).powi(m as i32) / n as f64;
    let threshold = d_threshold(m);

    let side = (d as u128).checked_pow(2 * m as u32);
    let ensemble = match side {
        Some(s) if s <= cap as u128 => Some(build_example2(params, &etas, cap)?),
        _ => None,
    };
    Ok(Example2 {
        params,
        weight_numerators,
        normalization,
        etas,
        eta0,
        qg_bound,
        d_threshold: threshold,
        meets_threshold: d as f64 >= threshold,
        rho0_separable: true,
        ensemble,
    })
}

fn build_example2(params: WernerParams, etas: &[f64], cap: usize) -> Result<StateEnsemble> {
    let WernerParams { m, n, d } = params;
    let flip = flip_operator(d)?;
    let identity = HermitianOperator::identity(flip.dims());
    let dd = (d * d) as f64;
    let sym = (&identity + &flip).scaled(1.0 / (dd + d as f64));
    let anti = (&identity - &flip).scaled(1.0 / (dd - d as f64));
    let items = (0..n)
        .map(|i| {
            let factors: Vec<&HermitianOperator> = bits(i, m).iter().map(|&b| if b == 0 { &sym } else { &anti }).collect();
            let mut rho = factors[0].clone();
            for f in &factors[1..] {
                rho = rho.tensor(f, cap)?;
            }
            Ok(EnsembleItem { eta: etas[i], rho })
        })
        .collect::<Result<Vec<_>>>()?;
    // Priors are rounded rationals; renormalize the last one so the sum
    // check sees exactly one.
    let mut items = items;
    let head: f64 = items[..n - 1].iter().map(|it| it.eta).sum();
    items[n - 1].eta = 1.0 - head;
    StateEnsemble::new(items)
}

/// `Π_a⃗ = ⊗_k Π_{a_k}` for `a⃗ ∈ {0,1}^m` in lexicographic order with `a_1`
/// most significant, matching the factor order of the explicit states.
pub fn example2_projectors(params: WernerParams, cap: usize) -> Result<Vec<HermitianOperator>> {
    let (p0, p1) = werner_projectors(params.d)?;
    let m = params.m;
    (0..1usize << m)
        .map(|idx| {
            let pick = |k: usize| if (idx >> (m - 1 - k)) & 1 == 0 { &p0 } else { &p1 };
            let mut acc = pick(0).clone();
            for k in 1..m {
                acc = acc.tensor(pick(k), cap)?;
            }
            Ok(acc)
        })
        .collect()
}

/// `η_i ρ_i^PT = (1/N) Σ_a⃗ s_a⃗^(i) Π_a⃗` as a commuting-block ensemble, with
/// `s_0^(0) = 1 + d`, `s_0^(1) = 1 − d` and `s_1^(·) = 1` per factor.
pub fn example2_pt_blocks(params: WernerParams) -> Result<CommutingEnsemble> {
    let WernerParams { m, n, d } = params;
    let reference = example2(params, 0)?;
    let norm = reference.normalization as f64;
    let df = d as f64;
    let count = 1usize << m;
    let dims = BipartiteDims::new(d.pow(m as u32), d.pow(m as u32))?;
    let ranks: Vec<usize> = (0..count)
        .map(|idx| (0..m).map(|k| if (idx >> (m - 1 - k)) & 1 == 0 { 1 } else { d * d - 1 }).product())
        .collect();
    let weights = (0..n)
        .map(|i| {
            let b = bits(i, m);
            (0..count)
                .map(|idx| {
                    let s: f64 = (0..m)
                        .map(|k| match ((idx >> (m - 1 - k)) & 1, b[k]) {
                            (0, 0) => 1.0 + df,
                            (0, _) => 1.0 - df,
                            _ => 1.0,
                        })
                        .product();
                    s / norm
                })
                .collect()
        })
        .collect();
    CommutingEnsemble::new(dims, ranks, weights)
}
