//! Closed forms and bounds for the coarse-grained multi-copy ensemble, the
//! hiding condition, and decay curves.

use serde::{Deserialize, Serialize};

use crate::discrimination::{self, solve_optimal_value, Objective, OptimalityReport, SolverOptions};
use crate::ensemble::{StateEnsemble, ORTHOGONALITY_TOL};
use crate::error::{Error, Result};

/// Slack allowed when checking `q ∈ [1/n, 1]`.
pub const QG_RANGE_TOL: f64 = 1e-12;

fn check_level(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidParameter("the number of copies must be at least 1".into()));
    }
    Ok(())
}

fn check_qg(qg: f64, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least two states, got n = {n}")));
    }
    let floor = 1.0 / n as f64;
    // q_G can exceed 1 for NPT states; only the chance floor is structural.
    if !qg.is_finite() || qg < floor - QG_RANGE_TOL {
        return Err(Error::InvalidParameter(format!("q_G = {qg} lies below 1/n = {floor}")));
    }
    Ok(())
}

fn powi(x: f64, l: usize) -> f64 {
    x.powi(i32::try_from(l).unwrap_or(i32::MAX))
}

/// `Tr|η_0 ρ_0^PT − η_1 ρ_1^PT|` of a two-state ensemble.
pub fn pt_difference_trace_norm(ensemble: &StateEnsemble) -> Result<f64> {
    Ok(discrimination::two_state_difference(ensemble, Objective::PartialTranspose)?.trace_norm())
}

/// `q_G(E^(L)) = ½ + ½ t^L` with `t = Tr|η_0 ρ_0^PT − η_1 ρ_1^PT|`.
pub fn qg_level_two_state(ensemble: &StateEnsemble, l: usize) -> Result<f64> {
    check_level(l)?;
    Ok(0.5 + 0.5 * powi(pt_difference_trace_norm(ensemble)?, l))
}

/// `1/n + ((n−1)/n)(n q − 1)^L`, an upper bound on `q_G(E^(L))`.
pub fn qg_level_upper_bound(qg: f64, n: usize, l: usize) -> Result<f64> {
    Ok(1.0 / n as f64 + coarse_excess(qg, n, l)?)
}

fn coarse_excess(qg: f64, n: usize, l: usize) -> Result<f64> {
    check_level(l)?;
    check_qg(qg, n)?;
    let n = n as f64;
    Ok((n - 1.0) / n * powi((n * qg - 1.0).max(0.0), l))
}

/// `1/n + ((n−1)(n²−n+2)/(2n))(n q − 1)^L`, an upper bound on the LOCC
/// guessing probability of `{1/n, ρ_i^(L)}`.
pub fn uniform_encoding_bound(qg: f64, n: usize, l: usize) -> Result<f64> {
    Ok(1.0 / n as f64 + uniform_excess(qg, n, l)?)
}

fn uniform_excess(qg: f64, n: usize, l: usize) -> Result<f64> {
    check_level(l)?;
    check_qg(qg, n)?;
    let n = n as f64;
    Ok((n - 1.0) * (n * n - n + 2.0) / (2.0 * n) * powi((n * qg - 1.0).max(0.0), l))
}

/// Exact LOCC guessing probability `½ + ½ t^L` of a two-state `E^(L)`.
///
/// Only valid when `p_L(E) = q_G(E)`, which cannot be checked here, so the
/// caller must assert it explicitly.
pub fn pl_exact_two_state_level(ensemble: &StateEnsemble, l: usize, local_optimum_asserted: bool) -> Result<f64> {
    if !local_optimum_asserted {
        return Err(Error::MissingAssertion(
            "the single-copy LOCC optimum must equal q_G; pass the assertion only when that is known",
        ));
    }
    qg_level_two_state(ensemble, l)
}

/// `q_G(E^(L))` by explicit coarse graining and the numerical solver.
pub fn qg_level_solved(ensemble: &StateEnsemble, l: usize, opts: &SolverOptions) -> Result<OptimalityReport> {
    let coarse = ensemble.coarse_grain(l, opts.cap)?;
    solve_optimal_value(&coarse, Objective::PartialTranspose, opts)
}

/// Where a `q_G` value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QgSource {
    ClosedForm,
    Solver,
}

/// `q_G` with an upper bound on its error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QgEstimate {
    pub value: f64,
    /// `value ≤ q_G ≤ value + gap`; zero for the closed form.
    pub gap: f64,
    pub converged: bool,
    pub source: QgSource,
}

impl QgEstimate {
    pub fn upper(&self) -> f64 {
        self.value + self.gap
    }
}

/// Closed form for two states, solver otherwise.
pub fn estimate_qg(ensemble: &StateEnsemble, opts: &SolverOptions) -> Result<QgEstimate> {
    if ensemble.len() == 2 {
        return Ok(QgEstimate {
            value: discrimination::qg_two_state(ensemble)?,
            gap: 0.0,
            converged: true,
            source: QgSource::ClosedForm,
        });
    }
    let report = solve_optimal_value(ensemble, Objective::PartialTranspose, opts)?;
    Ok(QgEstimate {
        value: report.value,
        gap: report.gap,
        converged: report.converged,
        source: QgSource::Solver,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Passes,
    Fails,
    /// The solver did not certify `q_G` tightly enough to decide.
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct HidingReport {
    pub n: usize,
    pub orthogonal: bool,
    pub max_overlap: f64,
    pub qg: QgEstimate,
    /// `2/n`.
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Checks that the states are mutually orthogonal and `q_G < 2/n`, using the
/// certified bracket `[value, value + gap]` of the `q_G` estimate.
pub fn hiding_condition(ensemble: &StateEnsemble, opts: &SolverOptions) -> Result<HidingReport> {
    let n = ensemble.len();
    let threshold = 2.0 / n as f64;
    let max_overlap = ensemble.max_pairwise_overlap();
    let orthogonal = ensemble.is_mutually_orthogonal(ORTHOGONALITY_TOL);
    let qg = estimate_qg(ensemble, opts)?;
    let verdict = classify(orthogonal, &qg, threshold);
    Ok(HidingReport {
        n,
        orthogonal,
        max_overlap,
        qg,
        threshold,
        verdict,
    })
}

fn classify(orthogonal: bool, qg: &QgEstimate, threshold: f64) -> Verdict {
    if !orthogonal || qg.value >= threshold {
        Verdict::Fails
    } else if qg.upper() < threshold {
        Verdict::Passes
    } else {
        Verdict::Indeterminate
    }
}

/// Which bound a decay curve plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayKind {
    /// Bound on `q_G(E^(L))`, hence on the LOCC value of the broadcast scheme.
    Coarse,
    /// Bound for the direct encoding `{1/n, ρ_i^(L)}`.
    Uniform,
}

impl std::str::FromStr for DecayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(DecayKind::Coarse),
            "uniform" => Ok(DecayKind::Uniform),
            other => Err(Error::InvalidParameter(format!(
                "unknown bound {other:?}; expected coarse or uniform"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub l: usize,
    pub lower: f64,
    pub upper: f64,
    /// `upper − lower`, computed directly so it keeps full relative precision.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub n: usize,
    pub qg: f64,
    pub kind: DecayKind,
    pub points: Vec<DecayPoint>,
}

impl DecayCurve {
    pub fn from_qg(qg: f64, n: usize, l_max: usize, kind: DecayKind) -> Result<Self> {
        check_level(l_max)?;
        let lower = 1.0 / n as f64;
        let points = (1..=l_max)
            .map(|l| {
                let excess = match kind {
                    DecayKind::Coarse => coarse_excess(qg, n, l)?,
                    DecayKind::Uniform => uniform_excess(qg, n, l)?,
                };
                Ok(DecayPoint {
                    l,
                    lower,
                    upper: lower + excess,
                    excess,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DecayCurve { n, qg, kind, points })
    }

    /// Non-increasing upper values.
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].upper <= w[0].upper)
    }

    /// Least-squares line through `(L, ln(upper − lower))`.
    pub fn log_linear_fit(&self) -> Option<LogLinearFit> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.excess > 0.0)
            .map(|p| (p.l as f64, p.excess.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let max_residual = pts.iter().map(|p| (p.1 - (intercept + slope * p.0)).abs()).fold(0.0, f64::max);
        Some(LogLinearFit {
            slope,
            intercept,
            max_residual,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Decay curve of an ensemble, using the certified upper end of its `q_G`.
pub fn decay_curve(ensemble: &StateEnsemble, l_max: usize, kind: DecayKind, opts: &SolverOptions) -> Result<DecayCurve> {
    let qg = estimate_qg(ensemble, opts)?;
    if !qg.converged {
        return Err(Error::InvalidParameter(format!(
            "q_G did not converge (gap {:e}); the curve would not be a bound",
            qg.gap
        )));
    }
    DecayCurve::from_qg(qg.upper().min(1.0), ensemble.len(), l_max, kind)
}
