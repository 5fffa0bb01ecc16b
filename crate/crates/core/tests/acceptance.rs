//! Acceptance suite. Runs every criterion, prints one result line each and
//! exits non-zero if any hard criterion fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use qredist::channels::RegisterState;
use qredist::measures::{
    concurrence, decompose_residual, monogamy_check, pair_marginal, tangle_lower_bound, tangle_pure,
    tangle_quasipure, TangleEstimator, TangleReport, DICKE_WITNESS_THRESHOLD,
};
use qredist::pipeline::{sweep, thresholds, GridSpec, SweepConfig, SweepRow, THRESHOLD_TOL};
use qredist::qcore::{fidelity_pure, DensityMatrix, Partition, SubsystemLabel::*};
use qredist::tomography::{mle_reconstruct, simulate_counts};

const ALPHA2: f64 = 1.0 / 7.0;

enum Verdict {
    Pass,
    Fail,
    /// Informational only; never fails the run.
    Report,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn ab() -> (f64, f64) {
    (ALPHA2.sqrt(), (1.0 - ALPHA2).sqrt())
}

fn canonical(points: usize) -> (Vec<SweepRow>, Duration) {
    let start = Instant::now();
    let rows = sweep(&SweepConfig::pure_family(ALPHA2, GridSpec::uniform(points))).expect("sweep");
    (rows, start.elapsed())
}

fn reports(rows: &[SweepRow]) -> Vec<&TangleReport> {
    rows.iter().map(|r| r.report.as_ref().expect("row evaluated")).collect()
}

fn c1_esd() -> Outcome {
    let (rows, elapsed) = canonical(1001);
    let esd = thresholds(&rows, THRESHOLD_TOL).unwrap().esd;
    let target = 1.0 / 6f64.sqrt();
    let pass = esd.is_some_and(|e| (e - target).abs() <= 1e-3) && elapsed < Duration::from_secs(10);
    check(pass, format!("ESD = {esd:?}, target {target:.5} ± 0.001, sweep took {elapsed:.2?} (< 10 s)"))
}

fn c2_esb() -> Outcome {
    let (rows, _) = canonical(1001);
    let esb = thresholds(&rows, THRESHOLD_TOL).unwrap().esb;
    let target = 1.0 - 1.0 / 6f64.sqrt();
    check(
        esb.is_some_and(|e| (e - target).abs() <= 1e-3),
        format!("ESB = {esb:?}, target {target:.5} ± 0.001"),
    )
}

fn c3_experimental_band() -> Outcome {
    let (pure_rows, _) = canonical(1001);
    let pure = thresholds(&pure_rows, THRESHOLD_TOL).unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mixed_sweep.json");
    let mut cfg = SweepConfig::from_file(&fixture).unwrap();
    cfg.grid = GridSpec::uniform(1001);
    let mixed = thresholds(&sweep(&cfg).unwrap(), THRESHOLD_TOL).unwrap();

    // twice the quoted error bars, widened to include the pure-theory value
    let band = |centre: f64, err: f64, theory: f64| ((centre - 2.0 * err).min(theory), (centre + 2.0 * err).max(theory));
    let esd_band = band(0.34, 0.04, pure.esd.unwrap());
    let esb_band = band(0.67, 0.05, pure.esb.unwrap());
    let inside = |v: Option<f64>, (lo, hi): (f64, f64)| v.is_some_and(|v| (lo..=hi).contains(&v));
    Outcome {
        verdict: Verdict::Report,
        detail: format!(
            "pure ESD {:.4} in [{:.3}, {:.3}]: {}; pure ESB {:.4} in [{:.3}, {:.3}]: {}; \
             mixed fixture (purity 0.82) ESD {:?} in band: {}, ESB {:?} in band: {}",
            pure.esd.unwrap(),
            esd_band.0,
            esd_band.1,
            inside(pure.esd, esd_band),
            pure.esb.unwrap(),
            esb_band.0,
            esb_band.1,
            inside(pure.esb, esb_band),
            mixed.esd,
            inside(mixed.esd, esd_band),
            mixed.esb,
            inside(mixed.esb, esb_band),
        ),
    }
}

fn c4_conservation() -> Outcome {
    let (rows, _) = canonical(101);
    let target = 24.0 / 49.0;
    let worst = reports(&rows).iter().map(|t| (t.c2_pair - target).abs()).fold(0.0, f64::max);
    check(worst < 1e-9, format!("max |C²_S1E1|S2E2 − 24/49| = {worst:.3e} (< 1e-9)"))
}

fn c5_effective_taus() -> Outcome {
    let (rows, _) = canonical(101);
    let worst = reports(&rows)
        .iter()
        .flat_map(|t| [t.tau_effective.s1e1_s2e2, t.tau_effective.s2e2_s1e1])
        .map(|v| v.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    check(worst < 1e-6, format!("max effective 3-tangle = {worst:.3e} (< 1e-6)"))
}

fn c6_symmetry() -> Outcome {
    let (rows, _) = canonical(101);
    let (mut s, mut e) = (0.0f64, 0.0f64);
    for t in reports(&rows) {
        let u = t.tau_underline.expect("rank-two pure family");
        s = s.max((u.s1 - u.s2).abs());
        e = e.max((u.e1 - u.e2).abs());
    }
    check(
        s < 1e-6 && e < 1e-6,
        format!("max |τ_S1 − τ_S2| = {s:.3e}, max |τ_E1 − τ_E2| = {e:.3e} (< 1e-6)"),
    )
}

fn c7_decomposition() -> Outcome {
    let mut worst = 0.0f64;
    let mut errors = 0;
    let mut record = |psi: &qredist::qcore::PureState| match decompose_residual(psi) {
        Ok(d) => worst = worst.max((d.residual - d.half_sum).abs()),
        Err(e) => {
            eprintln!("  decomposition error: {e}");
            errors += 1;
        }
    };
    let (a, b) = ab();
    for k in 0..=100 {
        let p = k as f64 / 100.0;
        record(&qredist::channels::closed_form_state(a, b, p).unwrap());
    }
    let mut r = rng(7);
    for _ in 0..100 {
        record(&channel_family_state(&mut r));
    }
    check(
        errors == 0 && worst < 1e-6,
        format!("max |R − ½Σ| = {worst:.3e} over 101 grid + 100 random states, {errors} errors (< 1e-6)"),
    )
}

fn c8_monogamy() -> Outcome {
    let start = Instant::now();
    let mut r = rng(8);
    let mut one_to_three = f64::INFINITY;
    for _ in 0..500 {
        let rep = monogamy_check(&RegisterState::Pure(haar_state(4, &mut r)), TangleEstimator::LowerBound).unwrap();
        one_to_three = rep.one_vs_rest.iter().map(|(_, v)| *v).fold(one_to_three, f64::min);
    }
    let mut two_to_two = f64::INFINITY;
    let mut evaluated = 0;
    for _ in 0..200 {
        let rep = monogamy_check(&RegisterState::Pure(channel_family_state(&mut r)), TangleEstimator::LowerBound).unwrap();
        let cut = rep.pair_cuts.iter().find(|c| c.cut == "S1E1|S2E2").unwrap();
        if let Some(s) = cut.slack {
            evaluated += 1;
            two_to_two = two_to_two.min(s);
        }
    }
    let elapsed = start.elapsed();
    check(
        one_to_three >= -1e-6 && two_to_two >= -1e-6 && evaluated == 200 && elapsed < Duration::from_secs(60),
        format!(
            "min 1:3 slack = {one_to_three:.3e} (500 Haar), min 2:2 slack = {two_to_two:.3e} ({evaluated}/200 channel states), {elapsed:.2?} (< 60 s)"
        ),
    )
}

fn crossing(series: &[(f64, f64)], level: f64) -> Vec<f64> {
    series
        .windows(2)
        .filter(|w| (w[0].1 - level) * (w[1].1 - level) < 0.0)
        .map(|w| w[0].0 + (level - w[0].1) / (w[1].1 - w[0].1) * (w[1].0 - w[0].0))
        .collect()
}

fn c9_dicke() -> Outcome {
    let (a, b) = ab();
    let (rows, _) = canonical(1001);
    let mid = reports(&rows)[500];
    let f_half = mid.dicke_fidelity;
    let oracle_half = oracle_dicke_fidelity(a, b, 0.5);
    let series: Vec<(f64, f64)> = reports(&rows).iter().map(|t| (t.p, t.dicke_fidelity)).collect();
    let roots = crossing(&series, DICKE_WITNESS_THRESHOLD);
    let oracle_lo = bisect(|p| oracle_dicke_fidelity(a, b, p) - 2.0 / 3.0, 0.0, 0.5);
    let oracle_hi = bisect(|p| oracle_dicke_fidelity(a, b, p) - 2.0 / 3.0, 0.5, 1.0);
    let (lo, hi) = match roots[..] {
        [lo, hi] => (lo, hi),
        _ => return check(false, format!("expected two crossings of 2/3, found {roots:?}")),
    };
    let pass = (f_half - 0.8285).abs() <= 1e-3
        && (f_half - oracle_half).abs() < 1e-12
        && (lo - 0.17).abs() <= 0.01
        && (hi - 0.83).abs() <= 0.01
        && lo <= 0.27
        && hi >= 0.73;
    check(
        pass,
        format!(
            "F(1/2) = {f_half:.5} (0.8285 ± 1e-3), interval [{lo:.4}, {hi:.4}] (oracle [{oracle_lo:.4}, {oracle_hi:.4}]) ⊇ [0.27, 0.73]"
        ),
    )
}

fn c10_dead_zone() -> Outcome {
    let (rows, _) = canonical(101);
    let th = thresholds(&rows, THRESHOLD_TOL).unwrap();
    let (esd, esb) = (th.esd.unwrap(), th.esb.unwrap());
    let inside: Vec<&TangleReport> = reports(&rows).into_iter().filter(|t| t.p > esd && t.p < esb).collect();
    let max_pair = inside.iter().map(|t| t.c2_s1s2.max(t.c2_e1e2)).fold(0.0, f64::max);
    let min_res = inside.iter().map(|t| t.residual_pair).fold(f64::INFINITY, f64::min);
    check(
        !inside.is_empty() && max_pair == 0.0 && min_res > 0.1,
        format!(
            "{} grid points in ({esd:.4}, {esb:.4}): max pair tangle {max_pair:.3e}, min R_S1E1|S2E2 {min_res:.4} (> 0.1)",
            inside.len()
        ),
    )
}

fn c11_gamma_sign() -> Outcome {
    let (rows, _) = canonical(101);
    let th = thresholds(&rows, THRESHOLD_TOL).unwrap();
    let (esd, esb) = (th.esd.unwrap(), th.esb.unwrap());
    let reps = reports(&rows);
    let bad_e: Vec<(f64, f64)> = reps
        .iter()
        .filter(|t| t.p < esb - 0.01 && !(t.gamma_e1e2 < 0.0))
        .map(|t| (t.p, t.gamma_e1e2))
        .collect();
    let bad_s: Vec<(f64, f64)> = reps
        .iter()
        .filter(|t| t.p > esd + 0.01 && !(t.gamma_s1s2 < 0.0))
        .map(|t| (t.p, t.gamma_s1s2))
        .collect();
    // Γ of a pure product marginal is exactly zero: ρ_E1E2 at p = 0, ρ_S1S2 at p = 1.
    let interior_ok = reps
        .iter()
        .filter(|t| t.p > 0.0 && t.p < esb - 0.01)
        .all(|t| t.gamma_e1e2 < 0.0)
        && reps.iter().filter(|t| t.p < 1.0 && t.p > esd + 0.01).all(|t| t.gamma_s1s2 < 0.0);
    check(
        bad_e.is_empty() && bad_s.is_empty(),
        format!(
            "violations Γ_E1E2 ≥ 0: {bad_e:?}; Γ_S1S2 ≥ 0: {bad_s:?}; strictly negative on the open interior: {interior_ok}"
        ),
    )
}

fn c12_tomography() -> Outcome {
    let start = Instant::now();
    let (a, b) = ab();
    let psi = qredist::channels::closed_form_state(a, b, 0.5).unwrap();
    let truth = RegisterState::Pure(psi.clone());
    let counts = simulate_counts(&psi.to_density(), 1_000_000, 2024).unwrap();
    let fit = mle_reconstruct(&counts, 30_000, 1e-8).unwrap();
    let fidelity = fidelity_pure(&fit.rho, &psi).unwrap();
    let fitted = RegisterState::Mixed(fit.rho);
    let c = |s: &RegisterState, x, y| concurrence(&pair_marginal(s, x, y).unwrap()).unwrap();
    let err_s = (c(&fitted, S1, S2) - c(&truth, S1, S2)).abs();
    let err_e = (c(&fitted, E1, E2) - c(&truth, E1, E2)).abs();
    let err_se = (c(&fitted, S1, E1) - c(&truth, S1, E1)).abs();
    let elapsed = start.elapsed();
    check(
        fidelity >= 0.999 && err_s < 0.01 && err_e < 0.01 && elapsed < Duration::from_secs(300),
        format!(
            "fidelity {fidelity:.5} (≥ 0.999), |ΔC_S1S2| = {err_s:.2e}, |ΔC_E1E2| = {err_e:.2e} (< 0.01; |ΔC_S1E1| = {err_se:.2e}), \
             {} MLE iterations, converged {}, {elapsed:.2?} (< 5 min)",
            fit.iterations, fit.converged
        ),
    )
}

fn c13_estimator_ordering() -> Outcome {
    let cuts: [(&str, Vec<usize>); 2] = [("S1E1|S2E2", vec![0, 2]), ("S1|S2E1E2", vec![0])];
    let mut r = rng(13);
    let (mut lb_qp, mut qp_roof, mut lb_roof) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut lb_above_qp = 0;
    for k in 0..100 {
        let rho = random_rank2(4, &mut r);
        for (_, side) in &cuts {
            let part = Partition::split(4, side).unwrap();
            let lb = tangle_lower_bound(&rho, &part).unwrap();
            let qp = tangle_quasipure(&rho, &part).unwrap();
            let roof = convex_roof_oracle(rho.matrix(), 4, side, 2000, 1000 + k);
            lb_qp = lb_qp.min(qp + 1e-6 - lb);
            qp_roof = qp_roof.min(roof + 1e-6 - qp);
            lb_roof = lb_roof.min(roof + 1e-6 - lb);
            lb_above_qp += usize::from(lb > qp + 1e-6);
        }
    }
    let mut pure_gap = 0.0f64;
    for k in 0..20 {
        let psi = haar_state(4, &mut r);
        let rho: DensityMatrix = psi.to_density();
        for (_, side) in &cuts {
            let part = Partition::split(4, side).unwrap();
            let exact = tangle_pure(&psi, &part).unwrap();
            let roof = convex_roof_oracle(rho.matrix(), 4, side, 50, 5000 + k);
            for v in [tangle_lower_bound(&rho, &part).unwrap(), tangle_quasipure(&rho, &part).unwrap(), roof] {
                pure_gap = pure_gap.max((v - exact).abs());
            }
        }
    }
    check(
        lb_qp >= 0.0 && qp_roof >= 0.0 && pure_gap < 1e-6,
        format!(
            "min (QP + 1e-6 − LB) = {lb_qp:.3e} (LB > QP in {lb_above_qp}/200), min (roof + 1e-6 − QP) = {qp_roof:.3e}, \
             min (roof + 1e-6 − LB) = {lb_roof:.3e} over 100 rank-2 states × 2 cuts; pure-state spread {pure_gap:.3e} (< 1e-6)"
        ),
    )
}

fn c14_werner() -> Outcome {
    let mut worst = 0.0f64;
    for v in [0.0, 0.2, 1.0 / 3.0, 0.5, 1.0] {
        let rho = DensityMatrix::new(werner(v)).unwrap();
        let expected = ((3.0 * v - 1.0) / 2.0f64).max(0.0);
        worst = worst.max((concurrence(&rho).unwrap() - expected).abs());
    }
    check(worst < 1e-9, format!("max |C − max(0, (3v−1)/2)| = {worst:.3e} (< 1e-9)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("ESD threshold", c1_esd),
        ("ESB threshold", c2_esb),
        ("experimental-band consistency", c3_experimental_band),
        ("tangle conservation", c4_conservation),
        ("vanishing effective tangles", c5_effective_taus),
        ("underline symmetry", c6_symmetry),
        ("residual decomposition identity", c7_decomposition),
        ("monogamy suite", c8_monogamy),
        ("Dicke witness", c9_dicke),
        ("dead-zone structure", c10_dead_zone),
        ("Γ sign behaviour", c11_gamma_sign),
        ("tomography round trip", c12_tomography),
        ("estimator ordering", c13_estimator_ordering),
        ("Wootters oracle", c14_werner),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        let out = run();
        let tag = match out.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed.push(id);
                "FAIL"
            }
            Verdict::Report => "REPORT",
        };
        println!("acceptance {id:>2} {tag:<6} {name}: {}", out.detail);
    }
    if failed.is_empty() {
        println!("acceptance: all hard criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
