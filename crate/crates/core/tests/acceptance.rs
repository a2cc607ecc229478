//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use qhide::constructions::{bell_singlet, d_threshold, example1, example2, example2_projectors, example2_pt_blocks, WernerParams};
use qhide::discrimination::{
    certify_optimal, qg_two_state, solve_optimal_value, two_state_projector_povm, OptimalityReport, CERTIFICATE_TOL,
};
use qhide::multifold::{
    estimate_qg, pl_exact_two_state_level, qg_level_two_state, qg_level_upper_bound, uniform_encoding_bound, DecayCurve, DecayKind,
};
use qhide::operator::DEFAULT_DIM_CAP;
use qhide::sim::{self, exact_strategy_success, Scheme, Strategy};
use qhide::{random, HermitianOperator, Objective, SolverOptions, StateEnsemble};

type Outcome = Result<String, String>;

const SEED: u64 = 20_240_601;
const TWO_STATE_INSTANCES: usize = 200;
const LEVEL_INSTANCES: usize = 50;
const MC_TRIALS: u64 = 100_000;
const PROPERTY_CASES: u64 = 1000;

fn tight() -> SolverOptions {
    SolverOptions {
        gap_tol: 1e-8,
        ..SolverOptions::default()
    }
}

fn qubit_pairs(count: usize, stream: u64) -> Vec<StateEnsemble> {
    let mut rng = random::seeded(SEED ^ stream);
    (0..count).map(|_| random::two_state_ensemble(dims(2, 2), &mut rng)).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: qhide::Error) -> String {
    e.to_string()
}

/// Solves shared by the first two criteria.
struct SingleCopyRuns {
    ensembles: Vec<StateEnsemble>,
    reports: Vec<OptimalityReport>,
    seconds: f64,
}

fn single_copy_runs() -> Result<SingleCopyRuns, String> {
    let ensembles = qubit_pairs(TWO_STATE_INSTANCES, 1);
    let opts = tight();
    let start = Instant::now();
    let reports = ensembles
        .iter()
        .map(|e| solve_optimal_value(e, Objective::PartialTranspose, &opts).map_err(err))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SingleCopyRuns {
        ensembles,
        reports,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn solver_matches_closed_form(runs: &SingleCopyRuns) -> Outcome {
    let mut worst = 0.0f64;
    for (k, (e, r)) in runs.ensembles.iter().zip(&runs.reports).enumerate() {
        let diff = (r.value - qg_two_state(e).map_err(err)?).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-5, || format!("instance {k}: |solver − closed form| = {diff:e}"))?;
    }
    ensure(runs.seconds < 60.0, || format!("took {:.1} s", runs.seconds))?;
    let iterations = runs.reports.iter().map(|r| r.iterations).max().unwrap_or(0);
    Ok(format!(
        "{} instances, worst deviation {worst:.2e}, at most {iterations} iterations, {:.2} s",
        runs.ensembles.len(),
        runs.seconds
    ))
}

fn certificates_are_sound(runs: &SingleCopyRuns) -> Outcome {
    let mut converged = 0;
    let mut lowest = f64::INFINITY;
    for (k, r) in runs.reports.iter().enumerate() {
        if !r.converged {
            continue;
        }
        converged += 1;
        let low = r.residual_min_eigs.iter().copied().fold(f64::INFINITY, f64::min);
        lowest = lowest.min(low);
        ensure(low >= -1e-7, || format!("instance {k}: residual λ_min = {low:e}"))?;
    }
    for (k, e) in runs.ensembles.iter().enumerate() {
        let m = two_state_projector_povm(e, Objective::PartialTranspose).map_err(err)?;
        let cert = certify_optimal(e, &m, Objective::PartialTranspose, CERTIFICATE_TOL).map_err(err)?;
        ensure(cert.optimal, || {
            format!("projector measurement on instance {k}: {:?}", cert.residual_min_eigs)
        })?;
    }
    Ok(format!(
        "{converged}/{} runs converged, lowest residual {lowest:.2e}; projector measurement certified on all",
        runs.reports.len()
    ))
}

fn mixing_identity_residual(e: &StateEnsemble, coarse: &StateEnsemble, l: usize) -> Result<f64, String> {
    let (w0, w1) = (e.weighted_state(0, false), e.weighted_state(1, false));
    let sum = (&w0 + &w1).tensor_power(l, DEFAULT_DIM_CAP).map_err(err)?;
    let diff = (&w0 - &w1).tensor_power(l, DEFAULT_DIM_CAP).map_err(err)?;
    let mut worst = 0.0f64;
    for (i, sign) in [(0, 1.0), (1, -1.0)] {
        let expected: HermitianOperator = (&sum + &diff.scaled(sign)).scaled(0.5);
        worst = worst.max(frobenius_diff(&coarse.weighted_state(i, false), &expected));
    }
    Ok(worst)
}

struct LevelCase {
    l: usize,
    closed: f64,
    qg: f64,
}

fn levels_match_brute_force(cases: &mut Vec<LevelCase>) -> Outcome {
    let opts = tight();
    let (mut worst_value, mut worst_identity) = (0.0f64, 0.0f64);
    for (k, e) in qubit_pairs(LEVEL_INSTANCES, 2).iter().enumerate() {
        for l in [2, 3] {
            let coarse = e.coarse_grain(l, DEFAULT_DIM_CAP).map_err(err)?;
            let closed = qg_level_two_state(e, l).map_err(err)?;
            let solved = solve_optimal_value(&coarse, Objective::PartialTranspose, &opts).map_err(err)?;
            let diff = (solved.value - closed).abs();
            worst_value = worst_value.max(diff);
            ensure(diff <= 1e-5, || format!("instance {k}, L = {l}: |closed − solved| = {diff:e}"))?;
            let identity = mixing_identity_residual(e, &coarse, l)?;
            worst_identity = worst_identity.max(identity);
            ensure(identity <= 1e-9, || {
                format!("instance {k}, L = {l}: mixing identity off by {identity:e}")
            })?;
            cases.push(LevelCase {
                l,
                closed,
                qg: qg_two_state(e).map_err(err)?,
            });
        }
    }
    Ok(format!(
        "{} cases, worst value deviation {worst_value:.2e}, worst identity residual {worst_identity:.2e}",
        cases.len()
    ))
}

fn sandwich_holds(cases: &[LevelCase]) -> Outcome {
    ensure(!cases.is_empty(), || "no level cases available".into())?;
    for (k, c) in cases.iter().enumerate() {
        let bound = qg_level_upper_bound(c.qg, 2, c.l).map_err(err)?;
        ensure(c.closed <= bound + 1e-12, || format!("case {k}: {} > {bound}", c.closed))?;
    }

    let params = WernerParams::new(2, 3, 3).map_err(err)?;
    let explicit = example2(params, DEFAULT_DIM_CAP).map_err(err)?;
    let ensemble = explicit.ensemble.ok_or("explicit (2,3,3) matrices were not built")?;
    let blocks = example2_pt_blocks(params).map_err(err)?;
    let dense = blocks
        .dense_blocks(&example2_projectors(params, DEFAULT_DIM_CAP).map_err(err)?)
        .map_err(err)?;
    let mut block_residual = 0.0f64;
    for (i, b) in dense.iter().enumerate() {
        block_residual = block_residual.max(max_diff(&ensemble.weighted_state(i, true), b));
    }
    ensure(block_residual <= 1e-12, || {
        format!("block form differs from explicit matrices by {block_residual:e}")
    })?;

    let single = estimate_qg(&ensemble, &tight()).map_err(err)?;
    ensure(single.converged, || "single-copy (2,3,3) solve did not converge".into())?;
    let level = blocks.coarse_grain(2).map_err(err)?.solve();
    let bound = qg_level_upper_bound(single.upper(), 3, 2).map_err(err)?;
    ensure(level.value <= bound + 1e-5, || format!("(2,3,3) L = 2: {} > {bound}", level.value))?;
    Ok(format!(
        "{} two-state cases; (2,3,3): q_G = {:.6}, L = 2 value {:.6} ≤ bound {bound:.6}",
        cases.len(),
        single.value,
        level.value
    ))
}

fn bell_example() -> Outcome {
    let ex = example1(&bell_singlet()).map_err(err)?;
    let e = &ex.ensemble;
    ensure(e.validate().passed(), || format!("{:?}", e.validate().failures))?;
    ensure(e.is_mutually_orthogonal(qhide::ensemble::ORTHOGONALITY_TOL), || {
        "states are not orthogonal".into()
    })?;
    let qg = estimate_qg(e, &tight()).map_err(err)?.value;
    ensure((qg - 0.75).abs() <= 1e-10, || format!("q_G = {qg}"))?;
    let closed = qg_two_state(e).map_err(err)?;
    ensure((closed - 0.75).abs() <= 1e-10, || format!("closed-form q_G = {closed}"))?;
    for l in 1..=20 {
        let p = pl_exact_two_state_level(e, l, true).map_err(err)?;
        let expected = 0.5 + 0.5 * 0.5f64.powi(l as i32);
        ensure((p - expected).abs() <= 1e-15, || format!("L = {l}: {p} vs {expected}"))?;
    }
    Ok(format!("valid, orthogonal, q_G = {qg:.12}, p_L closed form exact for L ≤ 20"))
}

fn werner_references() -> Outcome {
    let ex = example2(WernerParams::new(2, 3, 6).map_err(err)?, DEFAULT_DIM_CAP).map_err(err)?;
    ensure(ex.normalization == 4284 && ex.weight_numerators[0] == 1764, || {
        format!("N = {}, numerator = {}", ex.normalization, ex.weight_numerators[0])
    })?;
    ensure(ex.eta0 == 1764.0 / 4284.0, || format!("η0 = {}", ex.eta0))?;

    let mut residuals = Vec::new();
    for (m, n, d) in [(1, 2, 3), (2, 3, 3)] {
        let ex = example2(WernerParams::new(m, n, d).map_err(err)?, DEFAULT_DIM_CAP).map_err(err)?;
        let e = ex.ensemble.as_ref().ok_or("explicit matrices were not built")?;
        let m0 = ex.guess_zero_povm().ok_or("guess-zero measurement unavailable")?;
        let cert = certify_optimal(e, &m0, Objective::PartialTranspose, 1e-9).map_err(err)?;
        let worst = cert.worst_residual();
        ensure(worst >= -1e-9, || format!("({m},{n},{d}): residual λ_min = {worst:e}"))?;
        residuals.push(worst);
    }

    ensure(ex.meets_threshold, || format!("(2,3,6) misses its threshold {}", ex.d_threshold))?;
    let two = d_threshold(2);
    ensure((two - 5.828_427_124_746_19).abs() < 1e-12, || format!("two-factor threshold {two}"))?;
    ensure(3.0 < two, || "(1,2,3) classified as passing against 5.828".into())?;
    let own = example2(WernerParams::new(1, 2, 3).map_err(err)?, 0).map_err(err)?;
    Ok(format!(
        "N = 4284, η0 = 1764/4284; guess-zero residuals {:.1e}, {:.1e}; (2,3,6) meets d ≥ {:.3}; (1,2,3) fails d ≥ {two:.3} \
         (note: its own single-factor threshold is {:.3}, which d = 3 meets, with q_G = {:.4} < 2/n)",
        residuals[0], residuals[1], ex.d_threshold, own.d_threshold, own.eta0
    ))
}

fn decay_curves() -> Outcome {
    let start = Instant::now();
    let mut slopes = Vec::new();
    for (m, n, d) in [(2, 3, 6), (3, 6, 9), (4, 9, 12)] {
        let ex = example2(WernerParams::new(m, n, d).map_err(err)?, 0).map_err(err)?;
        ensure(ex.formulas_only(), || format!("({m},{n},{d}) built matrices"))?;
        let curve = DecayCurve::from_qg(ex.eta0, n, 60, DecayKind::Coarse).map_err(err)?;
        ensure(curve.is_monotone(), || format!("({m},{n},{d}) curve is not monotone"))?;
        let last = curve.points.last().ok_or("empty curve")?;
        let floor = 1.0 / n as f64;
        ensure(last.upper - floor < 1e-12 && last.upper >= floor, || {
            format!("({m},{n},{d}) ends at {} instead of approaching {floor}", last.upper)
        })?;
        let fit = curve.log_linear_fit().ok_or("fit unavailable")?;
        let expected = (n as f64 * ex.eta0 - 1.0).ln();
        ensure((fit.slope - expected).abs() <= 1e-9, || {
            format!("({m},{n},{d}) slope {} vs {expected}", fit.slope)
        })?;
        slopes.push(format!("{:.6}", fit.slope));
    }
    let seconds = start.elapsed().as_secs_f64();
    ensure(seconds < 1.0, || format!("took {seconds:.3} s"))?;
    Ok(format!("slopes [{}], {:.1} ms", slopes.join(", "), seconds * 1e3))
}

fn monte_carlo_concordance() -> Outcome {
    let e = example1(&bell_singlet()).map_err(err)?.ensemble;
    let strategy = Strategy::default_parity(&e).map_err(err)?;
    let mut zs = Vec::new();
    for l in 1..=5 {
        let reference = 0.5 + 0.5 * 0.5f64.powi(l as i32);
        let mc = sim::simulate_broadcast_scheme(&e, &strategy, l, MC_TRIALS, SEED + l as u64, false, DEFAULT_DIM_CAP).map_err(err)?;
        ensure(mc.within(reference, 4.0), || {
            format!("L = {l}: {} vs {reference} (stderr {})", mc.empirical_success, mc.stderr)
        })?;
        let exact = exact_strategy_success(&e, &strategy, l, Scheme::Broadcast { withhold_z: false }, DEFAULT_DIM_CAP).map_err(err)?;
        ensure(mc.within(exact, 4.0), || {
            format!("L = {l}: {} vs enumeration {exact}", mc.empirical_success)
        })?;
        zs.push(format!("{:+.2}", (mc.empirical_success - reference) / mc.stderr));

        let masked =
            sim::simulate_broadcast_scheme(&e, &strategy, l, MC_TRIALS, SEED + 100 + l as u64, true, DEFAULT_DIM_CAP).map_err(err)?;
        ensure(masked.within(0.5, 5.0), || {
            format!("L = {l} with z withheld: {}", masked.empirical_success)
        })?;
    }
    Ok(format!("z-scores [{}]; masked runs within 5σ of 1/2", zs.join(", ")))
}

fn direct_encoding_bound() -> Outcome {
    let e = example1(&bell_singlet()).map_err(err)?.ensemble;
    let qg = qg_two_state(&e).map_err(err)?;
    let mut strategies = vec![Strategy::default_parity(&e).map_err(err)?, Strategy::RandomGuess];
    strategies.extend((0..3).map(|k| Strategy::PerCopy {
        povm: local_parity_measurement(k),
    }));
    let mut checks = 0;
    for (k, strategy) in strategies.iter().enumerate() {
        for l in 1..=5 {
            let bound = uniform_encoding_bound(qg, 2, l).map_err(err)?;
            let seed = SEED + 1000 * k as u64 + l as u64;
            let mc = sim::simulate_direct_encoding(&e, strategy, l, MC_TRIALS, seed, None, DEFAULT_DIM_CAP).map_err(err)?;
            ensure(mc.empirical_success <= bound + 5.0 * mc.stderr, || {
                format!("strategy {k}, L = {l}: {} > {bound} + 5σ", mc.empirical_success)
            })?;
            checks += 1;
        }
    }
    Ok(format!("{checks} strategy/L pairs under the bound"))
}

fn operator_properties() -> Outcome {
    let mut failures = Vec::new();
    for k in 0..PROPERTY_CASES {
        let (da, db) = local_dims(k);
        let (left, right) = small_factor_pair(k);
        let seed = SEED.wrapping_add(k);
        let results = [
            pt_involution(seed, da, db),
            pt_trace_and_hermiticity(seed, da, db),
            positive_negative_parts(seed, da, db),
            trace_norm_multiplicativity(seed, left, right),
        ];
        failures.extend(results.into_iter().filter_map(|r| r.err()).map(|e| format!("case {k}: {e}")));
    }
    ensure(failures.is_empty(), || {
        format!("{} failures, first: {}", failures.len(), failures[0])
    })?;
    Ok(format!("{PROPERTY_CASES} cases × 4 properties, zero failures"))
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("[PASS] {id:>2} {name}: {detail} ({secs:.1} s)");
            true
        }
        Err(detail) => {
            println!("[FAIL] {id:>2} {name}: {detail} ({secs:.1} s)");
            false
        }
    }
}

fn main() -> ExitCode {
    let runs = single_copy_runs();
    let mut cases = Vec::new();
    let results = [
        report(1, "single-copy solver equals two-state closed form", || {
            solver_matches_closed_form(runs.as_ref()?)
        }),
        report(2, "optimality certificates", || certificates_are_sound(runs.as_ref()?)),
        report(3, "coarse-grained levels against brute force", || {
            levels_match_brute_force(&mut cases)
        }),
        report(4, "level upper bound sandwich", || sandwich_holds(&cases)),
        report(5, "Bell-state hiding ensemble", bell_example),
        report(6, "Werner-product reference values", werner_references),
        report(7, "decay curves", decay_curves),
        report(8, "Monte Carlo concordance", monte_carlo_concordance),
        report(9, "direct-encoding bound", direct_encoding_bound),
        report(10, "operator property suite", operator_properties),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
