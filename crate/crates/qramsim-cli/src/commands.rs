//! Subcommand configuration records and handlers.
//!
//! Each handler deserializes its own record from the TOML config (unknown
//! keys are rejected), runs the library operation and returns JSON plus an
//! optional CSV rendering.

use std::path::{Path, PathBuf};

use qramsim::boolfn::{degree, read_table, DataTable, SignedDataTable};
use qramsim::classical::{
    bench_classical as run_bench, build_shallow_ur_circuit, CircuitEngine, FwhtEngine,
    NaiveEngine, PackedEngine, UrEngine, BENCH_CSV_HEADER, MAX_CIRCUIT_BITS,
};
use qramsim::distill::{
    iterated_swap_test, qpca_recursive, qpca_simple, qpca_simple_repeated, CopySource,
    DEFAULT_COPY_BUDGET,
};
use qramsim::qcore::{random_density, resource_state as ideal_resource, DensityMatrix};
use qramsim::rng::stream;
use qramsim::teleport::{
    choi_gap, estimate_costs, run_protocol, run_trajectories, teleport_once,
    teleport_outcome_probabilities, BranchMode, DeviceSpec, EncodingSpec, ProtocolConfig,
    ProtocolOutcome, Target, TraceStatus,
};
use qramsim::twirlset::{twirled_state_with, TwirlMode};
use qramsim::Error;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: 2, message: msg.into() }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError { code: 4, message: msg.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Budget { .. } | Error::SizeCap(_) | Error::Overflow(_) => 3,
            Error::Numerical(_) => 4,
            _ => 2,
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

pub struct Output {
    pub json: Value,
    pub csv: Option<String>,
    pub exit_code: u8,
}

/// Parsed configuration plus the directory relative paths resolve against.
pub struct Context {
    table: toml::Table,
    seed: Option<u64>,
    base: PathBuf,
}

impl Context {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> CliResult<Self> {
        let (table, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                let table: toml::Table = text
                    .parse()
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (table, base)
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        Ok(Context { table, seed, base })
    }

    /// Deserialize the record, with `--seed` written into `seed_table`
    /// (the top level when `None`).
    fn parse<T: DeserializeOwned>(&self, seed_table: Option<&str>) -> CliResult<T> {
        let mut table = self.table.clone();
        if let Some(seed) = self.seed {
            let target = match seed_table {
                None => &mut table,
                Some(key) => table
                    .entry(key)
                    .or_insert_with(|| toml::Value::Table(Default::default()))
                    .as_table_mut()
                    .ok_or_else(|| CliError::config(format!("'{key}' must be a table")))?,
            };
            let seed = i64::try_from(seed).map_err(|_| CliError::config("seed above 2^63"))?;
            target.insert("seed".into(), toml::Value::Integer(seed));
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(format!("config: {}", e.message())))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

/// Where the dataset comes from: inline bits (address 0 first), a
/// `QRAMTBL v1` file, or random from the seed when neither is given.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSource {
    bits: Option<String>,
    file: Option<PathBuf>,
}

impl DatasetSource {
    fn load_signed(&self, ctx: &Context, n: usize, b: usize, seed: u64) -> CliResult<SignedDataTable> {
        let f = match (&self.bits, &self.file) {
            (Some(_), Some(_)) => return Err(CliError::config("dataset: give bits or file, not both")),
            (Some(bits), None) => {
                if b != 0 {
                    return Err(CliError::config("dataset.bits only describes b = 0 tables"));
                }
                SignedDataTable::new(DataTable::from_bit_string(bits)?, Vec::new())?
            }
            (None, Some(file)) => {
                let path = ctx.resolve(file);
                let reader = std::fs::File::open(&path)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                read_table(std::io::BufReader::new(reader))?
            }
            (None, None) => SignedDataTable::random(n, b, &mut stream(seed, u64::MAX)),
        };
        if (f.n, f.b) != (n, b) {
            return Err(CliError::config(format!(
                "dataset has n = {}, b = {}; config says n = {n}, b = {b}",
                f.n, f.b
            )));
        }
        Ok(f)
    }

    fn load(&self, ctx: &Context, n: usize, seed: u64) -> CliResult<DataTable> {
        Ok(self.load_signed(ctx, n, 0, seed)?.sign)
    }
}

fn default_twirl_exact() -> TwirlMode {
    TwirlMode::ExactEnumeration
}

fn no_twirl() -> TwirlMode {
    TwirlMode::None
}

fn spectrum_csv(values: &[f64]) -> String {
    let mut s = String::from("index,eigenvalue\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

fn descending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// A resource state as prepared on a device: noise, encoding noise, twirl.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResourceConfig {
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    dataset: DatasetSource,
    #[serde(default)]
    device: DeviceSpec,
    #[serde(default)]
    encoding: EncodingSpec,
    #[serde(default = "no_twirl")]
    twirl: TwirlMode,
}

struct Prepared {
    g: DataTable,
    untwirled: DensityMatrix,
    state: DensityMatrix,
    terms: usize,
    mean_term_fidelity: f64,
    min_term_fidelity: f64,
}

impl ResourceConfig {
    fn prepare(&self, ctx: &Context) -> CliResult<Prepared> {
        let g = self.dataset.load(ctx, self.n, self.seed)?;
        let device = self.device.build(self.n)?;
        let encoding = self.encoding.build(self.n)?;
        let untwirled = encoding.apply(&device.noisy_resource_state(&g)?)?;
        let tw = twirled_state_with(&g, self.twirl, |h| {
            encoding.apply(&device.noisy_resource_state(h)?)
        })?;
        Ok(Prepared {
            g,
            untwirled,
            state: tw.state,
            terms: tw.terms,
            mean_term_fidelity: tw.mean_term_fidelity,
            min_term_fidelity: tw.min_term_fidelity,
        })
    }
}

pub fn resource_state(ctx: &Context) -> CliResult<Output> {
    let cfg: ResourceConfig = ctx.parse(None)?;
    if cfg.twirl != TwirlMode::None {
        return Err(CliError::config("resource-state takes no twirl; use twirl-spectrum"));
    }
    let p = cfg.prepare(ctx)?;
    let fidelity = p.state.fidelity_pure(&ideal_resource(&p.g)?)?;
    let spectrum = descending(p.state.eigenvalues());
    let csv = spectrum_csv(&spectrum);
    Ok(Output {
        json: json!({
            "n": cfg.n,
            "dataset": p.g.to_bit_string(),
            "device": cfg.device,
            "fidelity": fidelity,
            "purity": p.state.purity(),
            "spectrum": spectrum,
        }),
        csv: Some(csv),
        exit_code: 0,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TwirlConfig {
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    dataset: DatasetSource,
    #[serde(default)]
    device: DeviceSpec,
    #[serde(default)]
    encoding: EncodingSpec,
    #[serde(default = "default_twirl_exact")]
    twirl: TwirlMode,
}

pub fn twirl_spectrum(ctx: &Context) -> CliResult<Output> {
    let c: TwirlConfig = ctx.parse(None)?;
    let cfg = ResourceConfig {
        n: c.n,
        seed: c.seed,
        dataset: c.dataset,
        device: c.device,
        encoding: c.encoding,
        twirl: c.twirl,
    };
    let p = cfg.prepare(ctx)?;
    let psi = ideal_resource(&p.g)?;
    let lambda = p.state.fidelity_pure(&psi)?;
    // ‖φΨ − λΨ‖: zero when Ψ(g) is an eigenvector.
    let amps = psi.amplitudes();
    let phi = p.state.matrix();
    let residual = (0..phi.rows())
        .map(|r| {
            let row: qramsim::qcore::C64 = (0..phi.cols()).map(|c| phi[(r, c)] * amps[c]).sum();
            (row - amps[r] * lambda).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    let spectrum = descending(p.state.eigenvalues());
    let skip = spectrum
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - lambda).abs().total_cmp(&(b.1 - lambda).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let max_other = spectrum
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let csv = spectrum_csv(&spectrum);
    Ok(Output {
        json: json!({
            "n": c.n,
            "dataset": p.g.to_bit_string(),
            "mode": cfg.twirl,
            "terms": p.terms,
            "fidelity_before": p.untwirled.fidelity_pure(&psi)?,
            "mean_term_fidelity": p.mean_term_fidelity,
            "min_term_fidelity": p.min_term_fidelity,
            "psi_eigenvalue": lambda,
            "psi_residual": residual,
            "max_other_eigenvalue": if spectrum.len() > 1 { Some(max_other) } else { None },
            "spectrum": spectrum,
        }),
        csv: Some(csv),
        exit_code: 0,
    })
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SourceSpec {
    /// A diagonal state with these weights (normalized by the library).
    Spectral { weights: Vec<f64> },
    Resource {
        n: usize,
        #[serde(default)]
        dataset: DatasetSource,
        #[serde(default)]
        device: DeviceSpec,
        #[serde(default)]
        encoding: EncodingSpec,
        #[serde(default = "no_twirl")]
        twirl: TwirlMode,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum DistillSpec {
    SwapTest { levels: usize },
    /// A single postselected pass, reporting its exact success probability.
    QpcaSimple { gamma: f64, eps_dist: f64 },
    /// Passes repeated until one succeeds.
    QpcaSimpleRepeated { gamma: f64, eps_dist: f64 },
    QpcaRecursive { gamma: f64, alpha: f64, eps_dist: f64 },
}

fn default_budget() -> u64 {
    DEFAULT_COPY_BUDGET
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistillConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_budget")]
    copy_budget: u64,
    source: SourceSpec,
    distiller: DistillSpec,
}

pub fn distill(ctx: &Context) -> CliResult<Output> {
    let cfg: DistillConfig = ctx.parse(None)?;
    let src = match cfg.source {
        SourceSpec::Spectral { weights } => CopySource::spectral(weights)?,
        SourceSpec::Resource { n, dataset, device, encoding, twirl } => {
            let rc = ResourceConfig { n, seed: cfg.seed, dataset, device, encoding, twirl };
            CopySource::dense(rc.prepare(ctx)?.state)
        }
    };
    let mut src = src.with_budget(cfg.copy_budget);
    let mut rng = stream(cfg.seed, 0);
    let report = match cfg.distiller {
        DistillSpec::SwapTest { levels } => iterated_swap_test(&mut src, levels, &mut rng)?,
        DistillSpec::QpcaSimple { gamma, eps_dist } => qpca_simple(&mut src, gamma, eps_dist)?,
        DistillSpec::QpcaSimpleRepeated { gamma, eps_dist } => {
            qpca_simple_repeated(&mut src, gamma, eps_dist, &mut rng)?
        }
        DistillSpec::QpcaRecursive { gamma, alpha, eps_dist } => {
            qpca_recursive(&mut src, gamma, alpha, eps_dist, &mut rng)?
        }
    };
    let commutator = report.output.as_ref().map(|o| src.commutator_norm(o));
    let exit_code = if report.exhausted { 3 } else { 0 };
    Ok(Output {
        json: json!({
            "input_principal_eigenvalue": src.spectrum()[0],
            "report": report,
            "commutator_norm": commutator,
        }),
        csv: None,
        exit_code,
    })
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TeleportConfig {
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    dataset: DatasetSource,
    #[serde(default)]
    device: DeviceSpec,
    #[serde(default)]
    encoding: EncodingSpec,
    #[serde(default = "no_twirl")]
    twirl: TwirlMode,
    #[serde(default = "default_trials")]
    trials: usize,
}

pub fn teleport_run(ctx: &Context) -> CliResult<Output> {
    let cfg: TeleportConfig = ctx.parse(None)?;
    let rc = ResourceConfig {
        n: cfg.n,
        seed: cfg.seed,
        dataset: cfg.dataset,
        device: cfg.device,
        encoding: cfg.encoding,
        twirl: cfg.twirl,
    };
    let p = rc.prepare(ctx)?;
    let psi = ideal_resource(&p.g)?.to_density();
    let mut rng = stream(cfg.seed, 1);
    let input = random_density(cfg.n, &mut rng);
    let probs = teleport_outcome_probabilities(&input, &p.state)?;
    let outcomes = (0..cfg.trials)
        .map(|_| teleport_once(&input, &p.state, &mut rng).map(|(m, _)| m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Output {
        json: json!({
            "n": cfg.n,
            "dataset": p.g.to_bit_string(),
            "choi_gap": choi_gap(&p.state, &p.g)?,
            "trace_distance_bound": psi.trace_distance(&p.state)?,
            "outcome_probabilities": probs,
            "outcomes": outcomes,
        }),
        csv: None,
        exit_code: 0,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolCommand {
    protocol: ProtocolConfig,
    #[serde(default)]
    dataset: DatasetSource,
    #[serde(default = "default_trials")]
    trials: usize,
}

pub fn protocol(ctx: &Context) -> CliResult<Output> {
    let cmd: ProtocolCommand = ctx.parse(Some("protocol"))?;
    let cfg = &cmd.protocol;
    let f = cmd.dataset.load_signed(ctx, cfg.n, cfg.b, cfg.seed)?;
    let dataset = json!({
        "sign": f.sign.to_bit_string(),
        "planes": f.planes.iter().map(|p| p.to_bit_string()).collect::<Vec<_>>(),
    });
    let target = if cfg.b == 0 { Target::Phase(f.sign) } else { Target::Signed(f) };
    let outcomes: Vec<ProtocolOutcome> = match cfg.branch_mode {
        BranchMode::EnumerateBranches => vec![run_protocol(&target, cfg)?],
        BranchMode::Trajectory => run_trajectories(&target, cfg, cmd.trials)?
            .into_iter()
            .map(|(a, t)| ProtocolOutcome {
                action: qramsim::teleport::EffectiveAction::Trajectory(a),
                traces: vec![t],
            })
            .collect(),
    };
    let mut csv = String::from("trial,round,degree,m_hex,copies,overlap\n");
    let mut exhausted = false;
    for (i, t) in outcomes.iter().flat_map(|o| &o.traces).enumerate() {
        exhausted |= t.status == TraceStatus::BudgetExhausted;
        for line in t.to_csv().lines().skip(1) {
            csv.push_str(&format!("{i},{line}\n"));
        }
    }
    Ok(Output {
        json: json!({
            "config": cfg,
            "dataset": dataset,
            "outcomes": outcomes,
        }),
        csv: Some(csv),
        exit_code: if exhausted { 3 } else { 0 },
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UpdateRuleConfig {
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    dataset: DatasetSource,
    /// Random when absent.
    m: Option<u64>,
}

pub fn update_rule(ctx: &Context) -> CliResult<Output> {
    let cfg: UpdateRuleConfig = ctx.parse(None)?;
    let g = cfg.dataset.load(ctx, cfg.n, cfg.seed)?;
    let m = match cfg.m {
        Some(m) => m,
        None => rand::Rng::random_range(&mut stream(cfg.seed, 0), 0..1u64 << cfg.n),
    };
    let mut engines: Vec<Box<dyn UrEngine>> =
        vec![Box::new(NaiveEngine), Box::new(PackedEngine), Box::new(FwhtEngine)];
    if cfg.n <= MAX_CIRCUIT_BITS {
        engines.push(Box::new(CircuitEngine(build_shallow_ur_circuit(cfg.n)?)));
    }
    let outputs = engines
        .iter()
        .map(|e| e.update(&g, m))
        .collect::<Result<Vec<_>, _>>()?;
    let agree = outputs.iter().all(|o| *o == outputs[0]);
    if !agree {
        return Err(CliError::numerical("update-rule engines disagree"));
    }
    let h = &outputs[0];
    let csv = format!(
        "engine,agrees\n{}",
        engines.iter().map(|e| format!("{},true\n", e.name())).collect::<String>()
    );
    Ok(Output {
        json: json!({
            "n": cfg.n,
            "m": m,
            "dataset": g.to_bit_string(),
            "output": h.to_bit_string(),
            "degree_in": degree(&g).to_string(),
            "degree_out": degree(h).to_string(),
            "engines": engines.iter().map(|e| e.name()).collect::<Vec<_>>(),
            "engines_agree": agree,
        }),
        csv: Some(csv),
        exit_code: 0,
    })
}

fn default_bench_ns() -> Vec<usize> {
    (4..=16).step_by(2).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_bench_ns")]
    ns: Vec<usize>,
}

pub fn bench_classical(ctx: &Context) -> CliResult<Output> {
    let cfg: BenchConfig = ctx.parse(None)?;
    let rows = run_bench(&cfg.ns, cfg.seed)?;
    let mut csv = format!("{BENCH_CSV_HEADER}\n");
    rows.iter().for_each(|r| {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    });
    Ok(Output {
        json: json!({ "rows": rows }),
        csv: Some(csv),
        exit_code: 0,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostsConfig {
    #[serde(default)]
    seed: u64,
    n: Vec<usize>,
    #[serde(default)]
    b: Vec<usize>,
    fidelity: Vec<f64>,
    eps: Vec<f64>,
}

pub fn costs(ctx: &Context) -> CliResult<Output> {
    let cfg: CostsConfig = ctx.parse(None)?;
    let _ = cfg.seed;
    let bs = if cfg.b.is_empty() { vec![0] } else { cfg.b.clone() };
    let mut rows = Vec::new();
    for &n in &cfg.n {
        for &b in &bs {
            for &f in &cfg.fidelity {
                for &e in &cfg.eps {
                    rows.push(estimate_costs(n, b, f, e)?);
                }
            }
        }
    }
    let mut csv = String::from("n,b,fidelity,eps,q,q_prime,nonclifford\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n, r.b, r.fidelity, r.eps, r.q, r.q_prime, r.nonclifford
        ));
    }
    Ok(Output {
        json: json!({ "rows": rows }),
        csv: Some(csv),
        exit_code: 0,
    })
}
