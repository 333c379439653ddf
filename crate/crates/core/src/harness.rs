//! Experiment driver: sweeps over network sizes, CSV records, log-log
//! scaling fits, validation suites and SVG plots.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{param, Error, Result};
use crate::graphs::{mixing_time_for, GraphSpec};
use crate::netmodel::{Graph, RandomSource, Status};
use crate::protocols::{
    quantum_agreement, quantum_general_le, quantum_le_complete, quantum_qw_le, quantum_rw_le, recount,
    AgreementOutcome, AgreementParams, LEOutcome, Tuning,
};
use crate::qprims::{grover_phase_distribution, grover_success_probability};
use crate::statevec::{grover_star_exact, phase_estimation_exact_distribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Complete network, Grover over referees.
    Complete,
    /// Random-walk referees on a network with known mixing time.
    RandomWalk,
    /// Quantum walk over referee subsets on diameter-2 networks.
    Diameter2,
    /// Explicit election by cluster merging on arbitrary networks.
    TreeMerging,
    /// Implicit agreement on the complete network.
    Agreement,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Complete,
        Protocol::RandomWalk,
        Protocol::Diameter2,
        Protocol::TreeMerging,
        Protocol::Agreement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Complete => "complete",
            Protocol::RandomWalk => "random-walk",
            Protocol::Diameter2 => "diameter2",
            Protocol::TreeMerging => "tree-merging",
            Protocol::Agreement => "agreement",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "complete" | "alg1" => Ok(Protocol::Complete),
            "random-walk" | "rw" | "alg2" => Ok(Protocol::RandomWalk),
            "diameter2" | "qw" | "alg3" => Ok(Protocol::Diameter2),
            "tree-merging" | "tree" => Ok(Protocol::TreeMerging),
            "agreement" | "alg4" => Ok(Protocol::Agreement),
            other => param(format!("unknown protocol '{other}'")),
        }
    }
}

/// A parameter that is chosen by the protocol, fixed, or a power of n.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Scaled {
    #[default]
    Auto,
    Fixed(f64),
    /// n^x
    Power(f64),
}

impl Scaled {
    pub fn resolve(self, n: usize) -> Option<f64> {
        match self {
            Scaled::Auto => None,
            Scaled::Fixed(x) => Some(x),
            Scaled::Power(x) => Some((n as f64).powf(x)),
        }
    }

    fn count(self, n: usize) -> Option<usize> {
        self.resolve(n).map(|x| x.ceil() as usize)
    }
}

impl FromStr for Scaled {
    type Err = Error;

    /// `auto`, a number, or `n^x`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Scaled::Auto);
        }
        let (power, text) = match s.strip_prefix("n^") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let x: f64 = match text.split_once('/') {
            Some((a, b)) => {
                let a: f64 = a.trim().parse().map_err(|_| Error::Parameter(format!("bad number '{s}'")))?;
                let b: f64 = b.trim().parse().map_err(|_| Error::Parameter(format!("bad number '{s}'")))?;
                a / b
            }
            None => text.trim().parse().map_err(|_| Error::Parameter(format!("bad number '{s}'")))?,
        };
        if !x.is_finite() {
            return param(format!("bad number '{s}'"));
        }
        Ok(if power { Scaled::Power(x) } else { Scaled::Fixed(x) })
    }
}

/// Everything needed to run one grid of trials.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub sizes: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub k: Scaled,
    pub tau: Scaled,
    pub eps: Scaled,
    pub gamma: Scaled,
    /// TV tolerance of the mixing-time estimate used when τ is automatic.
    pub mixing_tolerance: Scaled,
    /// Edge probability of the diameter-2 graphs.
    pub diameter2_p: f64,
    /// G(n, m) graphs of the tree-merging protocol use m = ⌈n^x⌉.
    pub edge_exponent: f64,
    pub tuning: Tuning,
    /// Fill `wall_ms`. Off by default so CSVs are reproducible.
    pub timing: bool,
}

impl RunConfig {
    pub fn new(protocol: Protocol, sizes: Vec<usize>, trials: u64, seed: u64) -> Self {
        Self {
            protocol,
            sizes,
            trials,
            seed,
            k: Scaled::Auto,
            tau: Scaled::Auto,
            eps: Scaled::Auto,
            gamma: Scaled::Auto,
            mixing_tolerance: Scaled::Power(-2.0),
            diameter2_p: 0.5,
            edge_exponent: 1.5,
            tuning: Tuning::default(),
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return param("no network sizes given");
        }
        if self.trials == 0 {
            return param("trials must be positive");
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n < 2) {
            return param(format!("network size must be at least 2, got {n}"));
        }
        self.tuning.search.validate()?;
        if self.tuning.walk_factor == 0 {
            return param("walk_factor must be positive");
        }
        let relevant = |used: bool, s: Scaled, name: &str| {
            if !used && s != Scaled::Auto {
                param(format!("{name} does not apply to protocol {}", self.protocol))
            } else {
                Ok(())
            }
        };
        let p = self.protocol;
        relevant(matches!(p, Protocol::Complete | Protocol::RandomWalk | Protocol::Diameter2), self.k, "k")?;
        relevant(p == Protocol::RandomWalk, self.tau, "tau")?;
        relevant(p == Protocol::Agreement, self.eps, "eps")?;
        relevant(p == Protocol::Agreement, self.gamma, "gamma")?;
        match self.mixing_tolerance {
            Scaled::Fixed(t) if t > 0.0 && t < 1.0 => Ok(()),
            Scaled::Power(x) if x < 0.0 => Ok(()),
            _ => param("mixing tolerance must be a number in (0, 1) or n^x with x < 0"),
        }
    }

    /// Network family used by the protocol at size `n`.
    pub fn graph_spec(&self, n: usize) -> Result<GraphSpec> {
        Ok(match self.protocol {
            Protocol::Complete | Protocol::Agreement => GraphSpec::Complete { n },
            Protocol::RandomWalk => {
                if !n.is_power_of_two() {
                    return param(format!("random-walk runs on hypercubes; n = {n} is not a power of two"));
                }
                GraphSpec::Hypercube { dim: n.trailing_zeros() }
            }
            Protocol::Diameter2 => GraphSpec::Diameter2Random {
                n,
                p: Some(self.diameter2_p),
            },
            Protocol::TreeMerging => {
                let max = n * (n - 1) / 2;
                let m = ((n as f64).powf(self.edge_exponent).ceil() as usize).clamp(n - 1, max);
                GraphSpec::Gnm { n, m }
            }
        })
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub protocol: Protocol,
    pub n: usize,
    pub m: usize,
    pub k: Option<usize>,
    pub tau: Option<usize>,
    pub eps: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub valid: bool,
    pub rounds: u64,
    pub classical_msgs: u64,
    pub quantum_msgs: u64,
    pub total_msgs: u64,
    pub wall_ms: u64,
}

/// What a single run showed beyond its CSV row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observations {
    /// Ledger equals the recount of the trace.
    pub ledger_matches_trace: bool,
    /// Candidates were sampled.
    pub had_candidates: bool,
    /// The highest-ranked candidate did not end NonElected.
    pub top_candidate_kept: Option<bool>,
    /// Cluster count per phase (tree merging).
    pub cluster_counts: Vec<usize>,
    /// Every node ended with a decided status.
    pub all_decided: bool,
    /// Agreement: two decided nodes disagree.
    pub disagreement: bool,
    /// Agreement: some decided value is nobody's input.
    pub foreign_value: bool,
    pub estimates_accurate: Option<bool>,
    pub undecided_iterations: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub record: RunRecord,
    pub observations: Observations,
}

/// Run seed: first 8 bytes of SHA-256 over the master seed, protocol,
/// size and trial index.
pub fn derive_seed(master: u64, protocol: Protocol, n: usize, trial: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(protocol.name().as_bytes());
    h.update((n as u64).to_le_bytes());
    h.update(trial.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// A network size with its graph and resolved parameters.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub n: usize,
    pub graph: Graph,
    pub k: Option<usize>,
    pub tau: Option<usize>,
    pub agreement: Option<AgreementParams>,
}

/// Builds the network for size `n` (one graph per size, seeded from trial
/// index `u64::MAX`) and resolves k, τ, ε and γ.
pub fn prepare(config: &RunConfig, n: usize) -> Result<GridPoint> {
    let spec = config.graph_spec(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, config.protocol, n, u64::MAX));
    let graph = spec.generate(&mut rng)?;
    let nf = n as f64;
    let mut point = GridPoint {
        n,
        graph,
        k: None,
        tau: None,
        agreement: None,
    };
    match config.protocol {
        Protocol::Complete => point.k = Some(config.k.count(n).unwrap_or(nf.cbrt().ceil() as usize)),
        Protocol::RandomWalk => {
            let tau = match config.tau.count(n) {
                Some(t) => t,
                None => {
                    let tol = config.mixing_tolerance.resolve(n).expect("tolerance is never auto");
                    mixing_time_for(&spec, &point.graph, tol)?
                }
            };
            let k = config
                .k
                .count(n)
                .unwrap_or(((tau as f64).powf(2.0 / 3.0) * nf.cbrt()).ceil() as usize)
                .min(n);
            point.tau = Some(tau);
            point.k = Some(k);
        }
        Protocol::Diameter2 => point.k = Some(config.k.count(n).unwrap_or(nf.powf(2.0 / 3.0).ceil() as usize)),
        Protocol::TreeMerging => {}
        Protocol::Agreement => {
            let defaults = AgreementParams::for_size(n);
            point.agreement = Some(AgreementParams {
                eps: config.eps.resolve(n).unwrap_or(defaults.eps),
                gamma: config.gamma.resolve(n).unwrap_or(defaults.gamma),
            });
        }
    }
    Ok(point)
}

/// Alternating inputs: even nodes hold 1.
pub fn mixed_inputs(n: usize) -> Vec<bool> {
    (0..n).map(|v| v % 2 == 0).collect()
}

fn observe_election(out: &LEOutcome, tuning: &Tuning) -> Result<Observations> {
    let top_kept = out.top_candidate().map(|v| out.statuses[v] != Status::NonElected);
    Ok(Observations {
        ledger_matches_trace: recount(&out.trace, &tuning.search)? == out.ledger,
        had_candidates: !out.candidates.is_empty() || !out.cluster_counts.is_empty(),
        top_candidate_kept: top_kept,
        cluster_counts: out.cluster_counts.clone(),
        all_decided: out.statuses.iter().all(|&s| s != Status::Undecided),
        ..Default::default()
    })
}

fn observe_agreement(out: &AgreementOutcome, inputs: &[bool], tuning: &Tuning) -> Result<Observations> {
    let mut values = out.decisions.iter().flatten();
    let disagreement = match values.next() {
        Some(&first) => values.any(|&v| v != first),
        None => false,
    };
    Ok(Observations {
        ledger_matches_trace: recount(&out.trace, &tuning.search)? == out.ledger,
        had_candidates: !out.candidates.is_empty(),
        all_decided: out.decisions.iter().any(|d| d.is_some()),
        disagreement,
        foreign_value: out.decisions.iter().flatten().any(|d| !inputs.contains(d)),
        estimates_accurate: Some(out.estimates_accurate),
        undecided_iterations: out.undecided_iterations.clone(),
        ..Default::default()
    })
}

/// Runs trial `trial` at a prepared grid point.
pub fn run_trial(config: &RunConfig, point: &GridPoint, trial: u64) -> Result<Execution> {
    let n = point.n;
    let seed = derive_seed(config.seed, config.protocol, n, trial);
    let mut rng = RandomSource::new(seed, n);
    let tuning = &config.tuning;
    let start = Instant::now();
    let mut record = RunRecord {
        protocol: config.protocol,
        n,
        m: point.graph.edge_count(),
        k: point.k,
        tau: point.tau,
        eps: point.agreement.map(|a| a.eps),
        gamma: point.agreement.map(|a| a.gamma),
        seed,
        valid: false,
        rounds: 0,
        classical_msgs: 0,
        quantum_msgs: 0,
        total_msgs: 0,
        wall_ms: 0,
    };
    let (ledger, valid, observations) = match config.protocol {
        Protocol::Agreement => {
            let inputs = mixed_inputs(n);
            let params = point.agreement.expect("agreement parameters are resolved");
            let out = quantum_agreement(&point.graph, &inputs, &params, tuning, &mut rng)?;
            (out.ledger, out.valid, observe_agreement(&out, &inputs, tuning)?)
        }
        p => {
            let out = match p {
                Protocol::Complete => quantum_le_complete(&point.graph, point.k.unwrap_or(1), tuning, &mut rng)?,
                Protocol::RandomWalk => quantum_rw_le(
                    &point.graph,
                    point.tau.unwrap_or(1),
                    point.k.unwrap_or(1),
                    tuning,
                    &mut rng,
                )?,
                Protocol::Diameter2 => quantum_qw_le(&point.graph, point.k.unwrap_or(1), tuning, &mut rng)?,
                _ => quantum_general_le(&point.graph, tuning, &mut rng)?,
            };
            (out.ledger, out.valid, observe_election(&out, tuning)?)
        }
    };
    record.valid = valid;
    record.rounds = ledger.rounds;
    record.classical_msgs = ledger.classical_messages;
    record.quantum_msgs = ledger.quantum_messages;
    record.total_msgs = ledger.total_messages();
    if config.timing {
        record.wall_ms = start.elapsed().as_millis() as u64;
    }
    Ok(Execution { record, observations })
}

/// Runs every (n, trial) pair. Trials run in parallel; the result is in
/// (n, trial) order.
pub fn run_sweep(config: &RunConfig) -> Result<Vec<Execution>> {
    config.validate()?;
    let mut all = Vec::with_capacity(config.sizes.len() * config.trials as usize);
    for &n in &config.sizes {
        let point = prepare(config, n)?;
        let runs: Vec<Execution> = (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, &point, t))
            .collect::<Result<_>>()?;
        all.extend(runs);
    }
    Ok(all)
}

pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Numeric CSV columns that can be fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Rounds,
    ClassicalMsgs,
    QuantumMsgs,
    TotalMsgs,
    WallMs,
}

impl Column {
    pub fn get(self, r: &RunRecord) -> u64 {
        match self {
            Column::Rounds => r.rounds,
            Column::ClassicalMsgs => r.classical_msgs,
            Column::QuantumMsgs => r.quantum_msgs,
            Column::TotalMsgs => r.total_msgs,
            Column::WallMs => r.wall_ms,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Column::Rounds => "rounds",
            Column::ClassicalMsgs => "classical_msgs",
            Column::QuantumMsgs => "quantum_msgs",
            Column::TotalMsgs => "total_msgs",
            Column::WallMs => "wall_ms",
        }
    }
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rounds" => Ok(Column::Rounds),
            "classical_msgs" => Ok(Column::ClassicalMsgs),
            "quantum_msgs" => Ok(Column::QuantumMsgs),
            "total_msgs" => Ok(Column::TotalMsgs),
            "wall_ms" => Ok(Column::WallMs),
            other => param(format!("unknown column '{other}'")),
        }
    }
}

/// Mean of `column` per distinct n, in increasing n.
pub fn means_by_n(records: &[RunRecord], column: Column) -> Vec<(usize, f64)> {
    let mut sums: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for r in records {
        let e = sums.entry(r.n).or_default();
        e.0 += column.get(r) as f64;
        e.1 += 1;
    }
    sums.into_iter().map(|(n, (s, c))| (n, s / c as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log₂ residuals.
    pub residual: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub column: Column,
}

impl ScalingFit {
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.slope * n.log2()).exp2()
    }
}

/// Least-squares line through (log₂ n, log₂ mean) points.
pub fn fit_points(points: &[(usize, f64)], column: Column) -> Result<ScalingFit> {
    if points.len() < 3 {
        return param(format!("a scaling fit needs at least 3 distinct n, got {}", points.len()));
    }
    if let Some((n, _)) = points.iter().find(|(_, y)| !(*y > 0.0 && y.is_finite())) {
        return param(format!("mean of {} at n = {n} is not positive", column.name()));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y.log2()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(ScalingFit {
        slope,
        intercept,
        residual,
        n_min: points[0].0,
        n_max: points[points.len() - 1].0,
        column,
    })
}

pub fn fit_scaling(records: &[RunRecord], column: Column) -> Result<ScalingFit> {
    fit_points(&means_by_n(records, column), column)
}

/// Log-log scatter of per-n means with the fitted line.
pub fn plot_svg(points: &[(usize, f64)], fit: &ScalingFit, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 56.0;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y.max(f64::MIN_POSITIVE).log2()).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let escape = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");

    let mut svg = String::new();
    svg += &format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += &format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    svg += &format!(
        "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - PAD,
        W - PAD
    );
    svg += &format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">log2 n</text>\n",
        W / 2.0,
        H - 16.0
    );
    svg += &format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">log2 {}</text>\n",
        H / 2.0,
        H / 2.0,
        fit.column.name()
    );
    let fx = |x: f64| fit.intercept + fit.slope * x;
    svg += &format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n",
        sx(x0),
        sy(fx(x0)),
        sx(x1),
        sy(fx(x1))
    );
    for (x, y) in xs.iter().zip(&ys) {
        svg += &format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#2c3e50\"/>\n", sx(*x), sy(*y));
    }
    svg += &format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">slope {:.4}  rms {:.4}</text>\n",
        PAD + 8.0,
        PAD + 8.0,
        fit.slope,
        fit.residual
    );
    svg += "</svg>\n";
    svg
}

/// A sweep file: the run configuration plus output paths.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub run: RunConfig,
    pub out: Option<String>,
    pub plot: Option<String>,
    pub column: Column,
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    // "256, 512, 1024" or "2^8..2^12" (powers of two).
    if let Some((a, b)) = s.split_once("..") {
        let exp = |t: &str| -> Result<u32> {
            t.trim()
                .strip_prefix("2^")
                .and_then(|e| e.parse().ok())
                .ok_or_else(|| Error::Parameter(format!("range bound '{t}' must look like 2^k")))
        };
        let (lo, hi) = (exp(a)?, exp(b)?);
        if lo > hi || hi > 40 {
            return param(format!("bad size range '{s}'"));
        }
        return Ok((lo..=hi).map(|e| 1usize << e).collect());
    }
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t.strip_prefix("2^") {
                Some(e) => e.parse::<u32>().ok().filter(|&e| e <= 40).map(|e| 1usize << e),
                None => t.parse().ok(),
            }
            .ok_or_else(|| Error::Parameter(format!("bad size '{t}'")))
        })
        .collect()
}

impl Sweep {
    /// Parses a `[section]` / `key = value` file. Recognized sections are
    /// `sweep`, `params` and `tuning`; `#` and `;` start comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut protocol = None;
        let mut entries: Vec<(usize, String, String, String)> = Vec::new();
        let mut section = String::from("sweep");
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config { line: line_no, msg: "unterminated section header".into() })?;
                section = name.trim().to_ascii_lowercase();
                if !matches!(section.as_str(), "sweep" | "params" | "tuning") {
                    return Err(Error::Config { line: line_no, msg: format!("unknown section [{section}]") });
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config { line: line_no, msg: format!("expected key = value, got '{line}'") })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if section == "sweep" && key == "protocol" {
                protocol = Some(
                    value
                        .parse::<Protocol>()
                        .map_err(|e| Error::Config { line: line_no, msg: e.to_string() })?,
                );
            }
            entries.push((line_no, section.clone(), key, value));
        }
        let protocol = protocol.ok_or(Error::Config { line: 0, msg: "missing protocol in [sweep]".into() })?;

        let mut run = RunConfig::new(protocol, Vec::new(), 1, 0);
        let mut sweep = Sweep {
            run: run.clone(),
            out: None,
            plot: None,
            column: Column::TotalMsgs,
        };
        let mut last_line = 0;
        let mut saw_sizes = false;
        for (line, section, key, value) in entries {
            let fail = |e: Error| Error::Config { line, msg: e.to_string() };
            let num = |v: &str| -> Result<f64> {
                v.parse().map_err(|_| Error::Parameter(format!("bad number '{v}' for {key}")))
            };
            let int = |v: &str| -> Result<u64> {
                v.parse().map_err(|_| Error::Parameter(format!("bad integer '{v}' for {key}")))
            };
            match (section.as_str(), key.as_str()) {
                ("sweep", "protocol") => {}
                ("sweep", "n") | ("sweep", "sizes") => {
                    run.sizes = parse_sizes(&value).map_err(fail)?;
                    saw_sizes = true;
                }
                ("sweep", "trials") => run.trials = int(&value).map_err(fail)?,
                ("sweep", "seed") => run.seed = int(&value).map_err(fail)?,
                ("sweep", "out") => sweep.out = Some(value),
                ("sweep", "plot") => sweep.plot = Some(value),
                ("sweep", "column") => sweep.column = value.parse().map_err(fail)?,
                ("sweep", "timing") => {
                    run.timing = value.parse().map_err(|_| fail(Error::Parameter(format!("bad flag '{value}'"))))?
                }
                ("params", name @ ("k" | "tau" | "eps" | "gamma")) => {
                    let v: Scaled = value.parse().map_err(fail)?;
                    let mut probe = RunConfig::new(protocol, vec![2], 1, 0);
                    match name {
                        "k" => probe.k = v,
                        "tau" => probe.tau = v,
                        "eps" => probe.eps = v,
                        _ => probe.gamma = v,
                    }
                    probe.validate().map_err(fail)?;
                    match name {
                        "k" => run.k = v,
                        "tau" => run.tau = v,
                        "eps" => run.eps = v,
                        _ => run.gamma = v,
                    }
                }
                ("params", "mixing_tolerance") => run.mixing_tolerance = value.parse().map_err(fail)?,
                ("params", "diameter2_p") => run.diameter2_p = num(&value).map_err(fail)?,
                ("params", "edge_exponent") => run.edge_exponent = num(&value).map_err(fail)?,
                ("tuning", "a") => run.tuning.search.a = num(&value).map_err(fail)?,
                ("tuning", "b") => run.tuning.search.b = num(&value).map_err(fail)?,
                ("tuning", "c_pe") => run.tuning.search.c_pe = num(&value).map_err(fail)?,
                ("tuning", "walk_factor") => run.tuning.walk_factor = int(&value).map_err(fail)? as usize,
                ("tuning", "qw_iterations") => run.tuning.qw_iterations = Some(int(&value).map_err(fail)?),
                ("tuning", "qw_active_inverse") => run.tuning.qw_active_inverse = Some(int(&value).map_err(fail)?),
                _ => {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown key '{key}' in [{section}]"),
                    })
                }
            }
            last_line = line;
        }
        if !saw_sizes {
            return Err(Error::Config { line: 0, msg: "missing n in [sweep]".into() });
        }
        run.validate().map_err(|e| Error::Config { line: last_line, msg: e.to_string() })?;
        sweep.run = run;
        Ok(sweep)
    }
}

/// Validation suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    QprimsOracle,
    ProtocolInvariants,
    Scaling,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "qprims-oracle" => Ok(Suite::QprimsOracle),
            "protocol-invariants" => Ok(Suite::ProtocolInvariants),
            "scaling" => Ok(Suite::Scaling),
            other => param(format!("unknown suite '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Largest deviation between the closed-form Grover success probability
/// and the star-network state vector, over stars with up to `max_leaves`
/// leaves, every marked count and t ≤ `max_t`.
pub fn grover_oracle_deviation(max_leaves: usize, max_t: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for leaves in 1..=max_leaves {
        for marked in 0..=leaves {
            let set: Vec<usize> = (0..marked).collect();
            for t in 0..=max_t {
                let exact = grover_star_exact(leaves, &set, t)?;
                let closed = grover_success_probability(leaves as u64, marked as u64, t as u64)?;
                worst = worst.max((exact - closed).abs());
            }
        }
    }
    Ok(worst)
}

/// Same comparison for phase-estimation distributions with P ≤ `max_p`.
pub fn phase_oracle_deviation(max_leaves: usize, max_p: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for leaves in 1..=max_leaves {
        for marked in 0..=leaves {
            let set: Vec<usize> = (0..marked).collect();
            for p in 1..=max_p {
                let exact = phase_estimation_exact_distribution(leaves, &set, p)?;
                let closed = grover_phase_distribution(leaves as u64, marked as u64, p)?;
                for (a, b) in exact.iter().zip(&closed) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn oracle_suite() -> Result<Vec<Check>> {
    let g = grover_oracle_deviation(8, 8)?;
    let p = phase_oracle_deviation(8, 16)?;
    Ok(vec![
        Check::new("grover-closed-form", g <= 1e-9, format!("max deviation {g:.3e}")),
        Check::new("phase-estimation-closed-form", p <= 1e-9, format!("max deviation {p:.3e}")),
    ])
}

/// Fraction of invalid runs.
pub fn invalid_rate(runs: &[Execution]) -> f64 {
    runs.iter().filter(|e| !e.record.valid).count() as f64 / runs.len().max(1) as f64
}

/// Whether every phase that starts with two or more clusters ends with at
/// most half of them (rounded up).
pub fn clusters_halve(counts: &[usize]) -> bool {
    counts.windows(2).all(|w| w[0] < 2 || w[1] <= w[0].div_ceil(2))
}

fn invariant_suite() -> Result<Vec<Check>> {
    const N: usize = 256;
    const TRIALS: u64 = 40;
    const BUDGET: f64 = 0.05;
    let mut checks = Vec::new();
    for protocol in Protocol::ALL {
        let mut config = RunConfig::new(protocol, vec![N], TRIALS, 7);
        if protocol == Protocol::Agreement {
            // Largest ε covered by the agreement analysis.
            config.eps = Scaled::Fixed(1.0 / 20.0);
        }
        let runs = run_sweep(&config)?;
        let rate = invalid_rate(&runs);
        checks.push(Check::new(
            format!("{protocol}/invalid-rate"),
            rate <= BUDGET,
            format!("{rate:.3} over {TRIALS} runs at n = {N}"),
        ));
        let recounted = runs.iter().all(|e| e.observations.ledger_matches_trace);
        checks.push(Check::new(format!("{protocol}/ledger-recount"), recounted, ""));
        match protocol {
            Protocol::Diameter2 => {
                let kept = runs.iter().all(|e| e.observations.top_candidate_kept != Some(false));
                checks.push(Check::new(format!("{protocol}/top-rank-kept"), kept, ""));
            }
            Protocol::TreeMerging => {
                let halves = runs.iter().all(|e| clusters_halve(&e.observations.cluster_counts));
                checks.push(Check::new(format!("{protocol}/clusters-halve"), halves, ""));
            }
            Protocol::Agreement => {
                let safe = runs
                    .iter()
                    .all(|e| !e.observations.disagreement && !e.observations.foreign_value);
                checks.push(Check::new(format!("{protocol}/safety"), safe, ""));
            }
            _ => {}
        }
    }
    Ok(checks)
}

fn scaling_suite() -> Result<Vec<Check>> {
    const LIMIT_SECS: f64 = 120.0;
    let start = Instant::now();
    let mut checks = Vec::new();
    for protocol in Protocol::ALL {
        let config = RunConfig::new(protocol, vec![64, 128, 256], 4, 11);
        let runs = run_sweep(&config)?;
        let records: Vec<RunRecord> = runs.into_iter().map(|e| e.record).collect();
        let fit = fit_scaling(&records, Column::TotalMsgs)?;
        checks.push(Check::new(
            format!("{protocol}/fit"),
            fit.slope.is_finite() && fit.residual.is_finite(),
            format!("slope {:.3}, rms {:.3}", fit.slope, fit.residual),
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    checks.push(Check::new("runtime", secs < LIMIT_SECS, format!("{secs:.1} s")));
    Ok(checks)
}

pub fn validate(suite: Suite) -> Result<Report> {
    let checks = match suite {
        Suite::QprimsOracle => oracle_suite()?,
        Suite::ProtocolInvariants => invariant_suite()?,
        Suite::Scaling => scaling_suite()?,
    };
    Ok(Report {
        suite,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, exps: std::ops::RangeInclusive<u32>) -> Vec<(usize, f64)> {
        exps.map(|e| {
            let n = 1usize << e;
            (n, f(n as f64))
        })
        .collect()
    }

    #[test]
    fn exact_power_law() {
        let fit = fit_points(&synthetic(|n| n.cbrt(), 8..=14), Column::TotalMsgs).unwrap();
        assert!((fit.slope - 1.0 / 3.0).abs() < 1e-6);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn polylog_inflated_power_law() {
        let fit = fit_points(&synthetic(|n| 5.0 * n.cbrt() * n.ln().powi(2), 8..=14), Column::TotalMsgs).unwrap();
        assert!((fit.slope - 0.60091).abs() < 1e-4, "{}", fit.slope);
    }

    #[test]
    fn constant_column() {
        let fit = fit_points(&synthetic(|_| 42.0, 8..=12), Column::Rounds).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn degenerate_grids() {
        assert!(fit_points(&synthetic(|n| n, 8..=9), Column::Rounds).is_err());
        assert!(fit_points(&[(4, 1.0), (8, 0.0), (16, 2.0)], Column::Rounds).is_err());
    }

    #[test]
    fn scaled_values() {
        assert_eq!("auto".parse::<Scaled>().unwrap(), Scaled::Auto);
        assert_eq!("12".parse::<Scaled>().unwrap(), Scaled::Fixed(12.0));
        assert_eq!("n^-0.2".parse::<Scaled>().unwrap(), Scaled::Power(-0.2));
        assert_eq!("2/15".parse::<Scaled>().unwrap(), Scaled::Fixed(2.0 / 15.0));
        assert!("n^x".parse::<Scaled>().is_err());
        assert_eq!(Scaled::Power(0.5).count(100), Some(10));
    }

    #[test]
    fn size_lists() {
        assert_eq!(parse_sizes("2^8..2^10").unwrap(), vec![256, 512, 1024]);
        assert_eq!(parse_sizes("16, 2^5").unwrap(), vec![16, 32]);
        assert!(parse_sizes("2^9..2^8").is_err());
        assert!(parse_sizes("ten").is_err());
    }

    #[test]
    fn seeds_differ_by_every_field() {
        let s = derive_seed(1, Protocol::Complete, 256, 0);
        assert_eq!(s, derive_seed(1, Protocol::Complete, 256, 0));
        assert_ne!(s, derive_seed(2, Protocol::Complete, 256, 0));
        assert_ne!(s, derive_seed(1, Protocol::Agreement, 256, 0));
        assert_ne!(s, derive_seed(1, Protocol::Complete, 512, 0));
        assert_ne!(s, derive_seed(1, Protocol::Complete, 256, 1));
    }

    #[test]
    fn halving_rule() {
        assert!(clusters_halve(&[256, 128, 40, 3, 1, 1]));
        assert!(clusters_halve(&[5, 3, 2, 1]));
        assert!(!clusters_halve(&[5, 4, 1]));
    }
}
