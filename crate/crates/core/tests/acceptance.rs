//! Acceptance battery. Prints one PASS/FAIL line per criterion, plus `info`
//! lines for quantities that are reported but not gated.
//!
//! Failing criteria are reported, not fatal, so the rest of the workspace
//! tests still run. Set `QCONGEST_ACCEPTANCE_STRICT=1` to exit non-zero on
//! any FAIL.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use qcongest::harness::{
    clusters_halve, fit_points, grover_oracle_deviation, invalid_rate, means_by_n, phase_oracle_deviation, run_sweep,
    Column, Execution, Protocol, RunConfig, RunRecord, Scaled,
};
use qcongest::qprims::{
    approx_count, count_estimate, counting_phase, counting_resolution, grover_search, phase_estimation_distribution,
    SearchConstants,
};
use qcongest::{Charge, OracleSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ORACLE_TOL: f64 = 1e-9;
const ORACLE_MAX_LEAVES: usize = 8;
const ORACLE_MAX_T: usize = 8;
const ORACLE_MAX_P: usize = 16;

const GROVER_SAMPLES: u64 = 100_000;
const COUNT_SAMPLES: u64 = 10_000;
const SIGMAS: f64 = 3.0;

const TRIALS: u64 = 200;
const MIN_VALID_RATE: f64 = 0.95;
const SEED: u64 = 2024;

const ALG1_SLOPE: (f64, f64) = (0.28, 0.48);
const ALG1_TRADEOFF_FACTOR: f64 = 0.5;
const ALG3_SLOPE: (f64, f64) = (0.58, 0.82);
const ALG4_SLOPE: (f64, f64) = (0.18, 0.35);
const CONSTANT_SPREAD: f64 = 2.0;

const CHECK: Charge = Charge::new(2, 2);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn pow2(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|e| 1usize << e).collect()
}

fn records(runs: &[Execution]) -> Vec<RunRecord> {
    runs.iter().map(|e| e.record.clone()).collect()
}

fn per_n<'a>(runs: &'a [Execution], n: usize) -> Vec<&'a Execution> {
    runs.iter().filter(|e| e.record.n == n).collect()
}

/// Lowest per-n valid rate, with its n.
fn worst_rate(runs: &[Execution], sizes: &[usize]) -> (usize, f64) {
    sizes
        .iter()
        .map(|&n| {
            let group: Vec<Execution> = per_n(runs, n).into_iter().cloned().collect();
            (n, 1.0 - invalid_rate(&group))
        })
        .fold((sizes[0], f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
}

fn sweep(protocol: Protocol, sizes: &[usize], configure: impl FnOnce(&mut RunConfig)) -> Vec<Execution> {
    let mut config = RunConfig::new(protocol, sizes.to_vec(), TRIALS, SEED);
    configure(&mut config);
    run_sweep(&config).expect("sweep runs")
}

/// Slope of mean/polylog(n): the exponent left once the polylog factor is
/// divided out.
fn normalized_slope(runs: &[Execution], polylog: impl Fn(f64) -> f64) -> f64 {
    let pts: Vec<(usize, f64)> = means_by_n(&records(runs), Column::TotalMsgs)
        .into_iter()
        .map(|(n, y)| (n, y / polylog(n as f64)))
        .collect();
    fit_points(&pts, Column::TotalMsgs).map(|f| f.slope).unwrap_or(f64::NAN)
}

/// Max/min ratio of mean/bound(n) over the grid, and the constants.
fn constant_spread(runs: &[Execution], bound: impl Fn(&Execution) -> f64) -> (f64, Vec<(usize, f64)>) {
    let mut sizes: Vec<usize> = runs.iter().map(|e| e.record.n).collect();
    sizes.dedup();
    let cs: Vec<(usize, f64)> = sizes
        .iter()
        .map(|&n| {
            let group = per_n(runs, n);
            let mean = group.iter().map(|e| e.record.total_msgs as f64).sum::<f64>() / group.len() as f64;
            (n, mean / bound(group[0]))
        })
        .collect();
    let hi = cs.iter().map(|c| c.1).fold(f64::MIN, f64::max);
    let lo = cs.iter().map(|c| c.1).fold(f64::MAX, f64::min);
    (hi / lo, cs)
}

fn fmt_constants(cs: &[(usize, f64)]) -> String {
    cs.iter().map(|(n, c)| format!("{n}:{c:.3}")).collect::<Vec<_>>().join(" ")
}

fn oracle_equivalence() -> Outcome {
    let g = grover_oracle_deviation(ORACLE_MAX_LEAVES, ORACLE_MAX_T).expect("grover oracle");
    let p = phase_oracle_deviation(ORACLE_MAX_LEAVES, ORACLE_MAX_P).expect("phase oracle");
    outcome(
        g <= ORACLE_TOL && p <= ORACLE_TOL,
        format!("grover max dev {g:.2e}, phase estimation max dev {p:.2e} (tol {ORACLE_TOL:e})"),
    )
}

fn grover_contract() -> Outcome {
    let consts = SearchConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_margin = f64::INFINITY;
    let mut failures = Vec::new();
    let mut false_positives = 0u64;
    let mut points = 0;
    for domain in [16u64, 64, 1000] {
        for t in [1, domain / 8, domain / 2, domain] {
            let oracle = OracleSpec::new(domain, 0..t, CHECK).unwrap();
            let fraction = t as f64 / domain as f64;
            for eps in [1.0 / domain as f64, fraction] {
                for alpha in [0.01, 0.1] {
                    points += 1;
                    let mut hits = 0u64;
                    for _ in 0..GROVER_SAMPLES {
                        if let Some(x) = grover_search(&oracle, eps, alpha, &consts, &mut rng).unwrap().found {
                            hits += 1;
                            false_positives += (x >= t) as u64;
                        }
                    }
                    let rate = hits as f64 / GROVER_SAMPLES as f64;
                    let sigma = (alpha * (1.0 - alpha) / GROVER_SAMPLES as f64).sqrt();
                    let floor = 1.0 - alpha - SIGMAS * sigma;
                    worst_margin = worst_margin.min(rate - floor);
                    if rate < floor {
                        failures.push(format!("|X|={domain} t={t} eps={eps:.4} alpha={alpha}: {rate:.4}"));
                    }
                }
            }
        }
    }
    let empty = OracleSpec::new(64, std::iter::empty(), CHECK).unwrap();
    for _ in 0..GROVER_SAMPLES {
        false_positives += grover_search(&empty, 1.0 / 64.0, 0.01, &consts, &mut rng).unwrap().found.is_some() as u64;
    }
    outcome(
        failures.is_empty() && false_positives == 0,
        format!(
            "{points} grid points x {GROVER_SAMPLES} samples, worst margin {worst_margin:+.4}, false positives {false_positives}{}",
            if failures.is_empty() { String::new() } else { format!(", below floor: {}", failures.join("; ")) }
        ),
    )
}

fn approx_count_contract() -> Outcome {
    const DOMAIN: u64 = 64;
    const ALPHA: f64 = 0.05;
    let consts = SearchConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut ok = true;
    let mut worst_rate: f64 = 1.0;
    let mut worst_band: f64 = 1.0;
    for c in [0.05, 0.1] {
        for t in [0u64, 8, 16, 32] {
            let oracle = OracleSpec::new(DOMAIN, 0..t, CHECK).unwrap();
            let band = c * DOMAIN as f64;
            let good = (0..COUNT_SAMPLES)
                .filter(|_| {
                    let est = approx_count(&oracle, c, ALPHA, &consts, &mut rng).unwrap().estimate;
                    ((est as f64) - t as f64).abs() < band
                })
                .count();
            let rate = good as f64 / COUNT_SAMPLES as f64;
            let sigma = (ALPHA * (1.0 - ALPHA) / COUNT_SAMPLES as f64).sqrt();
            ok &= rate >= 1.0 - ALPHA - SIGMAS * sigma;
            worst_rate = worst_rate.min(rate);

            let p = counting_resolution(c);
            let dist = phase_estimation_distribution(counting_phase(DOMAIN, t), p);
            let mass: f64 = (0..p)
                .filter(|&m| ((count_estimate(DOMAIN, p, m) as f64) - t as f64).abs() < band)
                .map(|m| dist[m])
                .sum();
            ok &= mass >= 8.0 / (PI * PI);
            worst_band = worst_band.min(mass);
        }
    }
    outcome(
        ok,
        format!(
            "worst in-band rate {worst_rate:.4} over {COUNT_SAMPLES} runs, worst single-run mass {worst_band:.4} (>= {:.4})",
            8.0 / (PI * PI)
        ),
    )
}

fn alg1() -> Outcome {
    let sizes = pow2(8, 14);
    let runs = sweep(Protocol::Complete, &sizes, |_| {});
    let (wn, wr) = worst_rate(&runs, &sizes);
    let fit = fit_points(&means_by_n(&records(&runs), Column::TotalMsgs), Column::TotalMsgs).unwrap();

    let big = pow2(12, 14);
    let tradeoff = sweep(Protocol::Complete, &big, |c| c.k = Scaled::Power(5.0 / 12.0));
    let (tn, tr) = worst_rate(&tradeoff, &big);
    let means = means_by_n(&records(&tradeoff), Column::TotalMsgs);
    let ratios: Vec<String> = means
        .iter()
        .map(|&(n, m)| {
            let nf = n as f64;
            format!("{n}:{:.1}", m / (nf.sqrt() * nf.ln().powi(2)))
        })
        .collect();
    let below = means.iter().all(|&(n, m)| {
        let nf = n as f64;
        m < ALG1_TRADEOFF_FACTOR * nf.sqrt() * nf.ln().powi(2)
    });

    let slope_ok = (ALG1_SLOPE.0..=ALG1_SLOPE.1).contains(&fit.slope);
    let largest = per_n(&runs, 1 << 14);
    let q = largest.iter().map(|e| e.record.quantum_msgs as f64).sum::<f64>() / largest.len() as f64;
    let nf = (1u64 << 14) as f64;
    info(format!(
        "alg1 mean quantum msgs at n=16384: {q:.3e} vs classical bound sqrt(n) ln n = {:.3e}",
        nf.sqrt() * nf.ln()
    ));
    info(format!(
        "alg1 slope after dividing out ln^2 n: {:.3}",
        normalized_slope(&runs, |n| n.ln().powi(2))
    ));
    outcome(
        wr >= MIN_VALID_RATE && tr >= MIN_VALID_RATE && slope_ok && below,
        format!(
            "min valid rate {wr:.3} (n={wn}), slope {:.3} in [{}, {}]: {slope_ok}; k=n^(5/12): min valid rate {tr:.3} (n={tn}), msgs/(sqrt(n) ln^2 n) {} (< {ALG1_TRADEOFF_FACTOR}): {below}",
            fit.slope,
            ALG1_SLOPE.0,
            ALG1_SLOPE.1,
            ratios.join(" ")
        ),
    )
}

fn alg2() -> Outcome {
    let sizes = pow2(8, 12);
    let runs = sweep(Protocol::RandomWalk, &sizes, |_| {});
    let (wn, wr) = worst_rate(&runs, &sizes);
    let (spread, cs) = constant_spread(&runs, |e| {
        let n = e.record.n as f64;
        let tau = e.record.tau.expect("tau recorded") as f64;
        tau.powf(5.0 / 3.0) * n.cbrt() * n.ln().powi(2)
    });
    outcome(
        wr >= MIN_VALID_RATE && spread <= CONSTANT_SPREAD,
        format!(
            "min valid rate {wr:.3} (n={wn}), C = msgs/(tau^(5/3) n^(1/3) ln^2 n): {} spread {spread:.3} (<= {CONSTANT_SPREAD})",
            fmt_constants(&cs)
        ),
    )
}

fn alg3() -> Outcome {
    let sizes = pow2(8, 12);
    let runs = sweep(Protocol::Diameter2, &sizes, |_| {});
    let (wn, wr) = worst_rate(&runs, &sizes);
    let kept = runs.iter().all(|e| e.observations.top_candidate_kept != Some(false));
    let fit = fit_points(&means_by_n(&records(&runs), Column::TotalMsgs), Column::TotalMsgs).unwrap();
    let slope_ok = (ALG3_SLOPE.0..=ALG3_SLOPE.1).contains(&fit.slope);
    info(format!(
        "alg3 slope after dividing out ln^5 n: {:.3}",
        normalized_slope(&runs, |n| n.ln().powi(5))
    ));
    let largest = per_n(&runs, 4096);
    let q = largest.iter().map(|e| e.record.quantum_msgs as f64).sum::<f64>() / largest.len() as f64;
    info(format!("alg3 mean quantum msgs at n=4096: {q:.3e} vs classical bound n = 4096"));
    outcome(
        wr >= MIN_VALID_RATE && kept && slope_ok,
        format!(
            "min valid rate {wr:.3} (n={wn}), top rank never eliminated: {kept}, slope {:.3} in [{}, {}]: {slope_ok}",
            fit.slope, ALG3_SLOPE.0, ALG3_SLOPE.1
        ),
    )
}

fn tree_merging() -> Outcome {
    let sizes = pow2(8, 12);
    let runs = sweep(Protocol::TreeMerging, &sizes, |_| {});
    let (wn, wr) = worst_rate(&runs, &sizes);
    let halves = runs.iter().all(|e| clusters_halve(&e.observations.cluster_counts));
    let (spread, cs) = constant_spread(&runs, |e| {
        let n = e.record.n as f64;
        (e.record.m as f64 * n).sqrt() * n.ln()
    });
    let largest = per_n(&runs, 4096);
    let q = largest.iter().map(|e| e.record.quantum_msgs as f64).sum::<f64>() / largest.len() as f64;
    info(format!(
        "tree-merging mean quantum msgs at n=4096: {q:.3e} vs classical bound m = {}",
        largest[0].record.m
    ));
    outcome(
        wr >= MIN_VALID_RATE && halves && spread <= CONSTANT_SPREAD,
        format!(
            "min valid rate {wr:.3} (n={wn}), every phase halves: {halves}, C = msgs/(sqrt(mn) ln n): {} spread {spread:.3} (<= {CONSTANT_SPREAD})",
            fmt_constants(&cs)
        ),
    )
}

fn agreement() -> Outcome {
    let sizes = pow2(8, 12);
    let runs = sweep(Protocol::Agreement, &sizes, |_| {});
    let (wn, wr) = worst_rate(&runs, &sizes);
    let safe = runs
        .iter()
        .filter(|e| e.record.valid)
        .all(|e| !e.observations.disagreement && !e.observations.foreign_value);
    let fit = fit_points(&means_by_n(&records(&runs), Column::TotalMsgs), Column::TotalMsgs).unwrap();
    let slope_ok = (ALG4_SLOPE.0..=ALG4_SLOPE.1).contains(&fit.slope);

    let mut undecided_ok = true;
    let mut rates = Vec::new();
    for &n in &sizes {
        let group = per_n(&runs, n);
        let eps = group[0].record.eps.expect("eps recorded");
        let flags: Vec<bool> = group
            .iter()
            .filter(|e| e.observations.estimates_accurate == Some(true))
            .flat_map(|e| e.observations.undecided_iterations.iter().copied())
            .collect();
        let bound = (4.0 * eps).min(1.0);
        let rate = flags.iter().filter(|&&u| u).count() as f64 / flags.len().max(1) as f64;
        let sigma = (bound * (1.0 - bound) / flags.len().max(1) as f64).sqrt();
        undecided_ok &= rate <= bound + SIGMAS * sigma;
        rates.push(format!("{n}:{rate:.3}/{bound:.3}"));
    }
    info(format!(
        "agreement slope after dividing out ln^2 n: {:.3}",
        normalized_slope(&runs, |n| n.ln().powi(2))
    ));
    outcome(
        wr >= MIN_VALID_RATE && safe && slope_ok && undecided_ok,
        format!(
            "min valid rate {wr:.3} (n={wn}), no disagreement: {safe}, slope {:.3} in [{}, {}]: {slope_ok}, undecided rate/bound {}: {undecided_ok}",
            fit.slope,
            ALG4_SLOPE.0,
            ALG4_SLOPE.1,
            rates.join(" ")
        ),
    )
}

fn info(line: String) {
    println!("info {line}");
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; a name filter that matches nothing skips the battery.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 grover contract", grover_contract),
        ("3 approximate counting contract", approx_count_contract),
        ("4 complete network election", alg1),
        ("5 random-walk election on hypercubes", alg2),
        ("6 diameter-2 election", alg3),
        ("7 tree-merging election", tree_merging),
        ("8 implicit agreement", agreement),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        failed += !o.passed as usize;
        println!(
            "{} criterion {name} ({:.1} s): {}",
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    let strict = std::env::var("QCONGEST_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
