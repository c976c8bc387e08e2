//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{output_dir, resolve_network, ResolvedNetwork, RunConfig};
use super::sweep::{summarize, Experiment};
use super::*;
use crate::baselines::{best_over_threshold, fit_glasso, fit_regression};
use crate::graph::{Edge, EdgeSet};
use crate::oracle::{analytic_wiener_at, check_pathology_conditions, PathologyReport, ZDomainModel};
use crate::panel::TimeSeriesPanel;
use crate::simulate::simulate;
use crate::topology::{estimate_from_bank, reconstruction_error};
use crate::wiener::{fit_all, sample_floor, FrequencyGrid};
use crate::Error;

type CliResult<T = ()> = anyhow::Result<T>;

/// Twelve significant digits.
fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct NetworkRecord {
    source: String,
    sha256: String,
    dt: f64,
    nodes: usize,
}

impl NetworkRecord {
    fn new(resolved: &ResolvedNetwork) -> Self {
        Self {
            source: resolved.source.clone(),
            sha256: resolved.network.content_hash(),
            dt: resolved.dt,
            nodes: resolved.network.node_count(),
        }
    }
}

#[derive(Serialize)]
struct FileRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    network: Option<NetworkRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<NetworkRecord>,
    seeds: Vec<u64>,
    inputs: Vec<FileRecord>,
    outputs: Vec<String>,
    notes: Vec<String>,
}

impl<'a> Manifest<'a> {
    fn new(command: &'static str, config: &'a RunConfig) -> Self {
        Self {
            tool: "rctopo",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            network: None,
            truth: None,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> CliResult {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    fn write(&self, dir: &Path) -> CliResult {
        let text = serde_json::to_string_pretty(self)?;
        write_file(dir, "manifest.json", &text)?;
        Ok(())
    }
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn apply_network(config: &mut RunConfig, args: &NetworkArgs) {
    if let Some(n) = &args.network {
        config.network = n.clone();
    }
    if args.dt.is_some() {
        config.dt = args.dt;
    }
}

fn apply_noise(config: &mut RunConfig, args: &NoiseArgs) {
    let n = &mut config.noise;
    if let Some(k) = args.noise {
        n.kind = k;
    }
    if let Some(v) = args.variance {
        n.variance = v;
    }
    if let Some(a) = args.ar_coefficient {
        n.coefficient = a;
    }
    if let Some(t) = &args.fir_taps {
        n.taps = t.clone();
    }
    if let Some(s) = args.seed {
        n.seed = s;
    }
}

fn apply_learn(config: &mut RunConfig, args: &LearnParamArgs) {
    let l = &mut config.learn;
    if let Some(f) = args.lag_order {
        l.lag_order = f;
    }
    if let Some(g) = args.gamma {
        l.gamma = g;
    }
    if let Some(r) = args.rho {
        l.rho = r;
    }
    if let Some(t) = args.tau {
        l.tau = t;
    }
    if let Some(f) = args.magnitude_floor {
        l.magnitude_floor = f;
    }
    if let Some(g) = args.grid_points {
        l.grid_points = g;
    }
}

fn apply_baseline(config: &mut RunConfig, args: &BaselineParamArgs) {
    let b = &mut config.baseline;
    if let Some(g) = args.regression_gamma {
        b.regression_gamma = g;
    }
    if let Some(l) = args.glasso_lambda {
        b.glasso_lambda = l;
    }
    if let Some(t) = args.threshold {
        b.threshold = t;
    }
}

pub fn run(cli: Cli) -> CliResult {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => cmd_simulate(config, a),
        Command::Learn(a) => cmd_learn(config, a),
        Command::Baseline(a) => cmd_baseline(config, a),
        Command::Sweep(a) => cmd_sweep(config, a),
        Command::Oracle(a) => cmd_oracle(config, a),
        Command::Eval(a) => cmd_eval(config, a),
    }
}

fn cmd_simulate(mut config: RunConfig, args: SimulateArgs) -> CliResult {
    apply_network(&mut config, &args.network);
    apply_noise(&mut config, &args.noise);
    if let Some(n) = args.samples {
        config.samples = n;
    }
    if let Some(b) = args.burn_in {
        config.burn_in = b;
    }
    config.check()?;
    let resolved = resolve_network(&config.network, config.dt)?;
    let dynamics = resolved.network.discretize(resolved.dt)?;
    let plan = config.noise.plan(resolved.network.node_count());
    let panel = simulate(&dynamics, &resolved.network.labels(), &plan, config.samples, config.burn_in)?;

    let dir = output_dir(args.out.as_deref(), &config, "simulate");
    create_dir(&dir)?;
    let path = dir.join("panel.csv");
    panel.export_csv(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut manifest = Manifest::new("simulate", &config);
    manifest.network = Some(NetworkRecord::new(&resolved));
    manifest.seeds.push(plan.seed);
    manifest.outputs.push("panel.csv".into());
    manifest.write(&dir)?;
    println!("{}", path.display());
    Ok(())
}

fn import_panel(path: &Path, dt: Option<f64>) -> CliResult<TimeSeriesPanel> {
    TimeSeriesPanel::import_csv(path, dt.unwrap_or(1.0)).map_err(Into::into)
}

fn truth_edges(reference: &str, labels: &[String]) -> CliResult<(ResolvedNetwork, EdgeSet)> {
    let resolved = resolve_network(reference, None)?;
    let net_labels = resolved.network.labels();
    let mut edges = EdgeSet::new();
    for e in resolved.network.true_edge_set().iter() {
        let (a, b) = e.endpoints();
        let find = |l: &String| {
            labels
                .iter()
                .position(|x| x == l)
                .with_context(|| format!("truth network node '{l}' is not a panel column"))
        };
        edges.insert(Edge::new(find(&net_labels[a])?, find(&net_labels[b])?));
    }
    if resolved.network.node_count() != labels.len() {
        bail!(
            "truth network has {} nodes but the panel has {} columns",
            resolved.network.node_count(),
            labels.len()
        );
    }
    Ok((resolved, edges))
}

fn cmd_learn(mut config: RunConfig, args: LearnArgs) -> CliResult {
    apply_learn(&mut config, &args.params);
    if args.dt.is_some() {
        config.dt = args.dt;
    }
    let panel = import_panel(&args.panel, config.dt)?;
    let m = panel.node_count();
    let n = panel.len();
    let mut manifest_notes = Vec::new();

    let requested = config.learn.lag_order;
    let lag_order = (0..=requested)
        .rev()
        .find(|&f| n >= sample_floor(m, f))
        .ok_or(Error::InsufficientSamples {
            required: sample_floor(m, 0),
            available: n,
        })?;
    if lag_order < requested {
        let note = format!(
            "{n} samples are too few for lag order {requested} on {m} nodes; using lag order {lag_order}"
        );
        eprintln!("warning: {note}");
        manifest_notes.push(note);
        config.learn.lag_order = lag_order;
    }
    let params = config.learn.params(m, n);
    params.check()?;
    let grid = params.grid()?;
    let bank = fit_all(&panel, params.lag_order, params.gamma)?;
    let mut estimate = estimate_from_bank(&bank, &grid, &params);

    let mut truth_record = None;
    if let Some(reference) = &args.truth {
        let (resolved, truth) = truth_edges(reference, panel.labels())?;
        estimate.score(&truth)?;
        truth_record = Some(NetworkRecord::new(&resolved));
    }

    let dir = output_dir(args.out.as_deref(), &config, "learn");
    create_dir(&dir)?;
    write_file(&dir, "estimate.json", &estimate.to_json())?;
    write_file(&dir, "filters.json", &bank.to_json())?;
    let mut manifest = Manifest::new("learn", &config);
    manifest.input(&args.panel)?;
    manifest.truth = truth_record;
    manifest.outputs = vec!["estimate.json".into(), "filters.json".into()];
    manifest.notes = manifest_notes;
    manifest.write(&dir)?;

    let mut out = String::new();
    writeln!(out, "moral_edges {}", format_edges(&estimate.moral_edges, panel.labels()))?;
    writeln!(out, "edges {}", format_edges(&estimate.edges, panel.labels()))?;
    if let Some(e) = estimate.error {
        writeln!(out, "error {}", num(e))?;
    }
    print!("{out}");
    Ok(())
}

fn format_edges(edges: &EdgeSet, labels: &[String]) -> String {
    let parts: Vec<String> = edges
        .iter()
        .map(|e| {
            let (a, b) = e.endpoints();
            format!("({},{})", labels[a], labels[b])
        })
        .collect();
    format!("{{{}}}", parts.join(","))
}

#[derive(Serialize)]
struct BaselineDocument {
    method: &'static str,
    labels: Vec<String>,
    penalty: f64,
    threshold: f64,
    /// Lag-1 coefficients (regression) or precision matrix (glasso), row-major.
    matrix: Vec<Vec<f64>>,
    edges: Vec<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_threshold_error: Option<f64>,
}

fn cmd_baseline(mut config: RunConfig, args: BaselineArgs) -> CliResult {
    apply_baseline(&mut config, &args.params);
    let panel = import_panel(&args.panel, config.dt)?;
    let labels = panel.labels().to_vec();
    let b = &config.baseline;
    let (name, penalty, matrix, scores) = match args.method {
        BaselineMethod::Regression => {
            let fit = fit_regression(&panel, b.regression_gamma, b.threshold)?;
            ("regression", b.regression_gamma, fit.coefficients.clone(), fit.scores())
        }
        BaselineMethod::Glasso => {
            let fit = fit_glasso(&panel, b.glasso_lambda, b.threshold)?;
            ("glasso", b.glasso_lambda, fit.precision.clone(), fit.scores())
        }
    };
    let edges = scores.edges_above(b.threshold);
    let (mut error, mut best) = (None, None);
    let mut truth_record = None;
    if let Some(reference) = &args.truth {
        let (resolved, truth) = truth_edges(reference, &labels)?;
        error = Some(reconstruction_error(&edges, &truth)?);
        best = Some(best_over_threshold(&scores, &truth)?);
        truth_record = Some(NetworkRecord::new(&resolved));
    }
    let doc = BaselineDocument {
        method: name,
        labels: labels.clone(),
        penalty,
        threshold: b.threshold,
        matrix: matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
        edges: edges
            .iter()
            .map(|e| {
                let (a, c) = e.endpoints();
                (labels[a].clone(), labels[c].clone())
            })
            .collect(),
        error,
        best_threshold_error: best,
    };
    let dir = output_dir(args.out.as_deref(), &config, "baseline");
    create_dir(&dir)?;
    write_file(&dir, "baseline.json", &serde_json::to_string_pretty(&doc)?)?;
    let mut manifest = Manifest::new("baseline", &config);
    manifest.input(&args.panel)?;
    manifest.truth = truth_record;
    manifest.outputs.push("baseline.json".into());
    manifest.write(&dir)?;
    println!("edges {}", format_edges(&edges, &labels));
    if let Some(e) = error {
        println!("error {}", num(e));
    }
    if let Some(e) = best {
        println!("best_threshold_error {}", num(e));
    }
    Ok(())
}

fn cmd_sweep(mut config: RunConfig, args: SweepArgs) -> CliResult {
    apply_network(&mut config, &args.network);
    apply_learn(&mut config, &args.params);
    apply_baseline(&mut config, &args.baseline);
    let s = &mut config.sweep;
    if let Some(v) = &args.samples {
        s.samples = v.clone();
    }
    if let Some(t) = args.trials {
        s.trials = t;
        s.seeds.clear();
    }
    if let Some(v) = &args.seeds {
        s.seeds = v.clone();
    }
    if let Some(v) = &args.methods {
        s.methods = v.clone();
    }
    if let Some(v) = &args.inputs {
        s.inputs = v.clone();
    }
    if let Some(a) = args.ar_coefficient {
        s.ar_coefficient = a;
    }
    if let Some(w) = args.workers {
        s.workers = w;
    }
    if let Some(v) = args.variance {
        config.noise.variance = v;
    }
    if let Some(b) = args.burn_in {
        config.burn_in = b;
    }
    config.check()?;
    let resolved = resolve_network(&config.network, config.dt)?;
    let experiment = Experiment {
        dynamics: resolved.network.discretize(resolved.dt)?,
        labels: resolved.network.labels(),
        truth: resolved.network.true_edge_set(),
        burn_in: config.burn_in,
        variance: config.noise.variance,
        ar_coefficient: config.sweep.ar_coefficient,
        learn: config.learn.clone(),
        baseline: config.baseline.clone(),
    };
    let rows = experiment.sweep(&config.sweep)?;

    let mut results = String::from("method,input,samples,seed,status,error,best_threshold_error,message\n");
    let mut timings = String::from("method,input,samples,seed,seconds\n");
    let mut failures = 0;
    for r in &rows {
        let (status, error, best, message) = match &r.outcome {
            Ok(o) => ("ok", num(o.error), opt_num(o.best_error), String::new()),
            Err(msg) => {
                failures += 1;
                ("failed", String::new(), String::new(), msg.replace(['"', '\n'], "'"))
            }
        };
        let key = format!("{},{},{},{}", r.method.name(), r.input.name(), r.samples, r.seed);
        writeln!(results, "{key},{status},{error},{best},\"{message}\"")?;
        writeln!(timings, "{key},{:.6}", r.seconds)?;
    }
    let mut summary =
        String::from("method,input,samples,trials,failures,exact_recoveries,median_error,median_best_threshold_error\n");
    for s in summarize(&rows) {
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            s.method.name(),
            s.input.name(),
            s.samples,
            s.trials,
            s.failures,
            s.exact_recoveries,
            opt_num(s.median_error),
            opt_num(s.median_best_error)
        )?;
    }

    let dir = output_dir(args.out.as_deref(), &config, "sweep");
    create_dir(&dir)?;
    write_file(&dir, "results.csv", &results)?;
    write_file(&dir, "summary.csv", &summary)?;
    write_file(&dir, "timings.csv", &timings)?;
    let mut manifest = Manifest::new("sweep", &config);
    manifest.network = Some(NetworkRecord::new(&resolved));
    manifest.seeds = config.sweep.resolved_seeds();
    manifest.outputs = vec!["results.csv".into(), "summary.csv".into(), "timings.csv".into()];
    if failures > 0 {
        let note = format!("{failures} trial(s) failed; see the status column of results.csv");
        eprintln!("warning: {note}");
        manifest.notes.push(note);
    }
    manifest.write(&dir)?;
    print!("{summary}");
    Ok(())
}

#[derive(Serialize)]
struct OracleReport<'a> {
    target: &'a str,
    source: &'a str,
    conditions: &'a PathologyReport,
    singular_frequencies: Vec<f64>,
}

fn cmd_oracle(mut config: RunConfig, args: OracleArgs) -> CliResult {
    apply_network(&mut config, &args.network);
    apply_noise(&mut config, &args.noise);
    if let Some(g) = args.grid_points {
        config.learn.grid_points = g;
    }
    if args.pair.len() != 2 {
        bail!("--pair takes exactly two node labels, TARGET,SOURCE");
    }
    let resolved = resolve_network(&config.network, config.dt)?;
    let labels = resolved.network.labels();
    let find = |l: &str| {
        labels
            .iter()
            .position(|x| x == l)
            .with_context(|| format!("network has no node '{l}' (nodes: {})", labels.join(", ")))
    };
    let (j, i) = (find(&args.pair[0])?, find(&args.pair[1])?);
    if i == j {
        bail!("--pair needs two distinct nodes");
    }
    let dynamics = resolved.network.discretize(resolved.dt)?;
    let model = ZDomainModel::new(&dynamics, config.noise.plan(labels.len()))?;
    let grid = FrequencyGrid::uniform(config.learn.grid_points)?;

    let mut table = String::from("omega,magnitude,phase,abs_phase\n");
    let mut singular = Vec::new();
    for &w in grid.omegas() {
        match analytic_wiener_at(&model, j, i, w) {
            Ok(z) => {
                let phase = z.arg();
                writeln!(table, "{},{},{},{}", num(w), num(z.norm()), num(phase), num(phase.abs()))?;
            }
            Err(e @ Error::SingularAtFrequency { .. }) => {
                eprintln!("warning: {e}");
                singular.push(w);
                writeln!(table, "{},nan,nan,nan", num(w))?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let conditions = check_pathology_conditions(&model, j, i, &grid)?;
    let report = OracleReport {
        target: &labels[j],
        source: &labels[i],
        conditions: &conditions,
        singular_frequencies: singular,
    };
    let summary = format!(
        "pair ({},{}): relation {}, phase-pi conditions hold at {}/{} frequencies, pathological: {}",
        labels[j],
        labels[i],
        serde_json::to_value(conditions.relation)?.as_str().unwrap_or("?"),
        conditions.frequencies_holding(),
        grid.len(),
        conditions.pathological
    );
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            write_file(dir, "oracle.csv", &table)?;
            write_file(dir, "conditions.json", &serde_json::to_string_pretty(&report)?)?;
            let mut manifest = Manifest::new("oracle", &config);
            manifest.network = Some(NetworkRecord::new(&resolved));
            manifest.outputs = vec!["oracle.csv".into(), "conditions.json".into()];
            manifest.write(dir)?;
            println!("{summary}");
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(table.as_bytes())?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct EdgeListDocument {
    labels: Vec<String>,
    edges: Vec<(String, String)>,
}

fn cmd_eval(config: RunConfig, args: EvalArgs) -> CliResult {
    let text = fs::read_to_string(&args.estimate).with_context(|| format!("reading {}", args.estimate.display()))?;
    let doc: EdgeListDocument = serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
        path: args.estimate.clone(),
        detail: e.to_string(),
    })?;
    let index = |l: &str| {
        doc.labels
            .iter()
            .position(|x| x == l)
            .with_context(|| format!("edge endpoint '{l}' is not among the estimate's labels"))
    };
    let mut estimate = EdgeSet::new();
    for (a, b) in &doc.edges {
        estimate.insert(Edge::new(index(a)?, index(b)?));
    }
    let reference = args.truth.as_deref().unwrap_or(&config.network);
    let (_, truth) = truth_edges(reference, &doc.labels)?;
    let error = reconstruction_error(&estimate, &truth)?;
    let missing: EdgeSet = truth.difference(&estimate).collect();
    let spurious: EdgeSet = estimate.difference(&truth).collect();
    println!("missing {}", format_edges(&missing, &doc.labels));
    println!("spurious {}", format_edges(&spurious, &doc.labels));
    println!("error {}", num(error));
    Ok(())
}
