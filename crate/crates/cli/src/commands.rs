use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use direct_core::metrics::{corrected_rand, count_clusters};
use direct_core::posterior::DirichletWeights;
use direct_core::simulate::{generate_dataset, Scenario, Simulated};
use direct_core::{infer, run_chain, ChainConfig, Dataset, Labeling, PosteriorOptions, Trace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{echo, merge};
use crate::{EvalArgs, FitArgs, PosteriorArgs, SimulateArgs, Usage};

fn flags(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn required<'a>(v: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    v.as_deref().ok_or_else(|| Usage(format!("missing --{name}")).into())
}

fn out_dir(v: &Option<PathBuf>) -> Result<&Path> {
    let dir = required(v, "out")?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn require_seed(merged: &Map<String, Value>) -> Result<()> {
    if merged.get("seed").is_none_or(Value::is_null) {
        return Err(Usage("a seed is required (--seed or `seed` in the config file)".into()).into());
    }
    Ok(())
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct SimulateSettings {
    scenario: Option<String>,
    scenario_file: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let (s, merged): (SimulateSettings, _) = merge(
        a.config.as_deref(),
        flags(&[
            ("scenario", json!(a.scenario)),
            ("scenario_file", json!(a.scenario_file)),
            ("seed", json!(a.seed)),
            ("out", json!(a.out)),
        ]),
    )?;
    require_seed(&merged)?;
    let scenario = match (&s.scenario, &s.scenario_file) {
        (Some(id), None) => Scenario::builtin(id)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?
        }
        _ => return Err(Usage("give exactly one of --scenario or --scenario-file".into()).into()),
    };
    let dir = out_dir(&s.out)?;
    let sim = generate_dataset(&scenario, &mut ChaCha8Rng::seed_from_u64(s.seed.unwrap_or_default()))?;
    sim.data.write_csv(dir.join("data.csv"))?;
    Labeling::from_zero_based(sim.data.items().to_vec(), sim.truth.labels())?.write_csv(dir.join("truth.csv"))?;
    write_truth_params(&sim, &dir.join("truth_params.csv"))?;
    echo(dir, "simulate", &s)?;
    eprintln!(
        "{}: {} items, {} clusters, {} time points x {} replicates",
        scenario.name,
        sim.data.n_items(),
        sim.params.len(),
        sim.data.n_times(),
        sim.data.n_replicates()
    );
    Ok(())
}

fn write_truth_params(sim: &Simulated, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let j = sim.data.n_times();
    let mut header: Vec<String> = ["cluster", "size", "sd_within", "sd_cond", "sd_resid"].map(String::from).to_vec();
    header.extend((1..=j).map(|t| format!("theta_{t}")));
    w.write_record(&header)?;
    for (k, p) in sim.params.iter().enumerate() {
        let mut row = vec![(k + 1).to_string(), sim.truth.size(k).to_string()];
        row.extend(p.sds().iter().map(|v| v.to_string()));
        row.extend(p.theta.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct FitSettings {
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    chains: usize,
    #[serde(flatten)]
    chain: ChainConfig,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { data: None, out: None, chains: 1, chain: ChainConfig::default() }
    }
}

fn parse_alpha_prior(s: &str) -> Result<Value> {
    let bad = || Usage(format!("alpha prior `{s}`: expected gamma:SHAPE,RATE or uniform:UPPER"));
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> = rest.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
    match (kind, nums.as_slice()) {
        ("gamma", [shape, rate]) => Ok(json!({"kind": "gamma", "shape": shape, "rate": rate})),
        ("uniform", [upper]) => Ok(json!({"kind": "uniform", "upper": upper})),
        _ => Err(bad().into()),
    }
}

fn trace_name(chain: usize, chains: usize) -> String {
    if chains == 1 {
        "trace.jsonl".into()
    } else {
        format!("trace_{}.jsonl", chain + 1)
    }
}

pub fn fit(a: FitArgs) -> Result<()> {
    let alpha = a.alpha_prior.as_deref().map(parse_alpha_prior).transpose()?;
    let (s, merged): (FitSettings, _) = merge(
        a.config.as_deref(),
        flags(&[
            ("data", json!(a.data)),
            ("out", json!(a.out)),
            ("seed", json!(a.seed)),
            ("iterations", json!(a.iterations)),
            ("burn_in", json!(a.burn_in)),
            ("thin", json!(a.thin)),
            ("chains", json!(a.chains)),
            ("kernel", json!(a.kernel)),
            ("alpha_prior", json!(alpha)),
            ("lambda_upper", json!(a.lambda_upper)),
            ("mean_prior_sd", json!(a.mean_prior_sd)),
            ("init_clusters", json!(a.init_clusters)),
        ]),
    )?;
    require_seed(&merged)?;
    if s.chains == 0 {
        return Err(Usage("--chains must be at least 1".into()).into());
    }
    s.chain.validate()?;
    let data = Dataset::read_csv(required(&s.data, "data")?)
        .with_context(|| format!("reading {}", s.data.as_ref().unwrap().display()))?;
    let dir = out_dir(&s.out)?;
    let traces: Vec<Result<Trace>> = std::thread::scope(|sc| {
        let handles: Vec<_> = (0..s.chains)
            .map(|c| {
                let cfg = ChainConfig { seed: s.chain.seed.wrapping_add(c as u64), ..s.chain.clone() };
                let data = &data;
                sc.spawn(move || Ok(run_chain(data, &cfg)?))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    for (c, trace) in traces.into_iter().enumerate() {
        let trace = trace?;
        let name = trace_name(c, s.chains);
        trace.save(dir.join(&name))?;
        let last = trace.snapshots.last().map(|x| x.state.k()).unwrap_or(0);
        eprintln!("{name}: {} snapshots, final K = {last}", trace.len());
    }
    echo(dir, "fit", &s)?;
    Ok(())
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct PosteriorSettings {
    data: Option<PathBuf>,
    trace: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: u64,
    weights: DirichletWeights,
    threads: Option<usize>,
}

pub fn posterior(a: PosteriorArgs) -> Result<()> {
    let (s, _): (PosteriorSettings, _) = merge(
        a.config.as_deref(),
        flags(&[
            ("data", json!(a.data)),
            ("trace", json!(a.trace)),
            ("out", json!(a.out)),
            ("seed", json!(a.seed)),
            ("weights", json!(a.weights)),
            ("threads", json!(a.threads)),
        ]),
    )?;
    let data_path = required(&s.data, "data")?;
    let trace_path = required(&s.trace, "trace")?;
    let data = Dataset::read_csv(data_path).with_context(|| format!("reading {}", data_path.display()))?;
    let trace = Trace::load(trace_path).with_context(|| format!("reading {}", trace_path.display()))?;
    let dir = out_dir(&s.out)?;
    let post = infer(&trace, &data, &PosteriorOptions { weights: s.weights, seed: s.seed, threads: s.threads })?;
    post.write_dir(dir, &data)?;
    echo(dir, "posterior", &s)?;
    eprintln!(
        "{} snapshots, {} columns, {} occupied clusters, relabeling converged in {} rounds",
        trace.len(),
        post.p().n_columns(),
        post.summary.n_occupied(),
        post.relabeling.rounds()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct EvalSettings {
    assignments: Option<PathBuf>,
    truth: Option<PathBuf>,
    out: Option<PathBuf>,
    dataset: Option<String>,
    method: String,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { assignments: None, truth: None, out: None, dataset: None, method: "DIRECT".into() }
    }
}

const METRICS_HEADER: [&str; 5] = ["dataset", "method", "ARI", "NS", "S"];

pub fn eval(a: EvalArgs) -> Result<()> {
    let (s, _): (EvalSettings, _) = merge(
        a.config.as_deref(),
        flags(&[
            ("assignments", json!(a.assignments)),
            ("truth", json!(a.truth)),
            ("out", json!(a.out)),
            ("dataset", json!(a.dataset)),
            ("method", json!(a.method)),
        ]),
    )?;
    let truth_path = required(&s.truth, "truth")?;
    let assigned_path = required(&s.assignments, "assignments")?;
    let truth = Labeling::read_csv(truth_path).with_context(|| format!("reading {}", truth_path.display()))?;
    let assigned =
        Labeling::read_csv(assigned_path).with_context(|| format!("reading {}", assigned_path.display()))?;
    let predicted = truth.aligned(&assigned)?;
    let ari = corrected_rand(&predicted, &truth.clusters)?;
    let (ns, sing) = count_clusters(&predicted);
    let dataset = s.dataset.clone().unwrap_or_else(|| {
        truth_path
            .canonicalize()
            .ok()
            .and_then(|p| p.parent().and_then(|d| d.file_name()).map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "dataset".into())
    });
    let dir = out_dir(&s.out)?;
    let path = dir.join("metrics.csv");
    let mut rows: Vec<Vec<String>> = Vec::new();
    if path.exists() {
        let mut r = csv::Reader::from_path(&path)?;
        for rec in r.records() {
            let rec = rec?;
            if rec.get(0) != Some(dataset.as_str()) || rec.get(1) != Some(s.method.as_str()) {
                rows.push(rec.iter().map(String::from).collect());
            }
        }
    }
    rows.push(vec![dataset.clone(), s.method.clone(), ari.to_string(), ns.to_string(), sing.to_string()]);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(METRICS_HEADER)?;
    for r in &rows {
        w.write_record(r)?;
    }
    w.flush()?;
    echo(dir, "eval", &s)?;
    println!("{dataset},{},{ari:.4},{ns},{sing}", s.method);
    Ok(())
}
