//! The adaptive protocol: prepare, twirl, distill, teleport, update, repeat.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::shifted_resource;
use crate::boolfn::{degree, hat_function, update_rule, DataTable, Degree, SignedDataTable};
use crate::device::{Axis, EncodingNoise, NoisyDevice};
use crate::distill::{
    iterated_swap_test, qpca_recursive, qpca_simple_repeated, swap_test_step, CopySource,
    DistillReport,
};
use crate::error::{Error, Result};
use crate::qcore::{
    hadamard_on, resource_state, DensityMatrix, Mat, PauliString, C64, MAX_REGISTER_QUBITS,
};
use crate::rng::{derive_seed, stream};
use crate::twirlset::{twirled_state_with, TwirlMode};

/// Largest register (address plus bus) for exact branch enumeration.
pub const MAX_ENUMERATION_QUBITS: usize = 4;
/// Trajectories count as reproducing the target above this Choi fidelity.
pub const TRAJECTORY_MATCH_FIDELITY: f64 = 0.99;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeviceSpec {
    #[default]
    Noiseless,
    GlobalDepolarizing {
        p: f64,
    },
    PerQubitDephasing {
        p: f64,
    },
    DeadRouter {
        dead: Vec<u64>,
    },
    CoherentRotation {
        theta: f64,
        axis: Axis,
    },
}

impl DeviceSpec {
    pub fn build(&self, n: usize) -> Result<NoisyDevice> {
        match self {
            DeviceSpec::Noiseless => NoisyDevice::noiseless(n),
            DeviceSpec::GlobalDepolarizing { p } => NoisyDevice::global_depolarizing(n, *p),
            DeviceSpec::PerQubitDephasing { p } => NoisyDevice::per_qubit_dephasing(n, *p),
            DeviceSpec::DeadRouter { dead } => NoisyDevice::dead_router(n, dead),
            DeviceSpec::CoherentRotation { theta, axis } => {
                NoisyDevice::coherent_rotation(n, *theta, *axis)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncodingSpec {
    #[default]
    None,
    Depolarizing {
        q: f64,
    },
    /// Identity weight `w`, the rest spread evenly over the other Paulis.
    IdentityWeight {
        w: f64,
    },
}

impl EncodingSpec {
    pub fn build(&self, n: usize) -> Result<EncodingNoise> {
        match self {
            EncodingSpec::None => Ok(EncodingNoise::none(n)),
            EncodingSpec::Depolarizing { q } => EncodingNoise::depolarizing(n, *q),
            EncodingSpec::IdentityWeight { w } => {
                let others = PauliString::unsigned(n).count() - 1;
                EncodingNoise::with_identity_weight(n, *w, &vec![1.0; others])
            }
        }
    }
}

fn default_max_levels() -> usize {
    40
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistillerSpec {
    #[default]
    None,
    /// Streaming swap test with the fewest levels whose exact output has
    /// principal-eigenvalue deficit at most `eps_dist`.
    SwapTest {
        eps_dist: f64,
        #[serde(default = "default_max_levels")]
        max_levels: usize,
    },
    QpcaSimple {
        gamma: f64,
        eps_dist: f64,
    },
    QpcaRecursive {
        gamma: f64,
        alpha: f64,
        eps_dist: f64,
    },
}

impl DistillerSpec {
    pub fn eps_dist(&self) -> Option<f64> {
        match self {
            DistillerSpec::None => None,
            DistillerSpec::SwapTest { eps_dist, .. }
            | DistillerSpec::QpcaSimple { eps_dist, .. }
            | DistillerSpec::QpcaRecursive { eps_dist, .. } => Some(*eps_dist),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMode {
    #[default]
    Trajectory,
    EnumerateBranches,
}

fn default_twirl() -> TwirlMode {
    TwirlMode::None
}

fn default_budget() -> u64 {
    crate::distill::DEFAULT_COPY_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n: usize,
    /// Data bits per address; 0 for the phase oracle `V(f)`.
    #[serde(default)]
    pub b: usize,
    #[serde(default)]
    pub device: DeviceSpec,
    #[serde(default)]
    pub encoding: EncodingSpec,
    #[serde(default = "default_twirl")]
    pub twirl: TwirlMode,
    #[serde(default)]
    pub distiller: DistillerSpec,
    /// Defaults to `n` (`n + 1` when `b > 0`).
    #[serde(default)]
    pub max_rounds: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub branch_mode: BranchMode,
    /// Copy budget per distillation call.
    #[serde(default = "default_budget")]
    pub copy_budget: u64,
}

impl ProtocolConfig {
    pub fn noiseless(n: usize, b: usize, branch_mode: BranchMode) -> Self {
        ProtocolConfig {
            n,
            b,
            device: DeviceSpec::Noiseless,
            encoding: EncodingSpec::None,
            twirl: TwirlMode::None,
            distiller: DistillerSpec::None,
            max_rounds: None,
            seed: 0,
            branch_mode,
            copy_budget: default_budget(),
        }
    }

    /// Qubits the resource states live on.
    pub fn total_qubits(&self) -> usize {
        self.n + self.b
    }

    fn required_rounds(&self) -> usize {
        if self.b > 0 {
            self.n + 1
        } else {
            self.n
        }
    }

    pub fn rounds_limit(&self) -> usize {
        self.max_rounds.unwrap_or_else(|| self.required_rounds())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Precondition("n must be at least 1".into()));
        }
        if self.total_qubits() > MAX_REGISTER_QUBITS {
            return Err(Error::SizeCap(format!("n + b = {}", self.total_qubits())));
        }
        if self.rounds_limit() < self.required_rounds() {
            return Err(Error::Precondition(format!(
                "max_rounds = {} below {}",
                self.rounds_limit(),
                self.required_rounds()
            )));
        }
        if let Some(e) = self.distiller.eps_dist() {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Precondition(format!("eps_dist = {e} outside (0, 1)")));
            }
        }
        if self.branch_mode == BranchMode::EnumerateBranches
            && (self.n > 3 || self.total_qubits() > MAX_ENUMERATION_QUBITS)
        {
            return Err(Error::SizeCap(format!(
                "branch enumeration on n = {}, n + b = {}",
                self.n,
                self.total_qubits()
            )));
        }
        Ok(())
    }
}

/// The dataset a run targets: a phase oracle `V(f)` or a signed `b`-bit
/// table, served through `f̂` in the Hadamard frame of the bus.
#[derive(Clone, Debug)]
pub enum Target {
    Phase(DataTable),
    Signed(SignedDataTable),
}

impl From<DataTable> for Target {
    fn from(f: DataTable) -> Self {
        Target::Phase(f)
    }
}

impl From<SignedDataTable> for Target {
    fn from(f: SignedDataTable) -> Self {
        Target::Signed(f)
    }
}

impl Target {
    fn shape(&self) -> (usize, usize) {
        match self {
            Target::Phase(f) => (f.n(), 0),
            Target::Signed(f) => (f.n, f.b),
        }
    }

    /// The phase function actually teleported.
    pub fn phase_function(&self) -> Result<DataTable> {
        match self {
            Target::Phase(f) => Ok(f.clone()),
            Target::Signed(f) => hat_function(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    /// ANF degree of the dataset used this round; −1 encodes the zero function.
    pub degree: i64,
    pub m: u64,
    pub copies: u64,
    /// `⟨Ψ(g)|φ|Ψ(g)⟩` of the resource actually teleported.
    pub overlap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Completed,
    MaxRounds,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolTrace {
    pub rounds: Vec<RoundRecord>,
    /// Value of the final constant dataset, when the run completed.
    pub terminal: Option<u8>,
    /// `−1` when the final dataset is the constant one (an unphysical
    /// global sign, never applied).
    pub global_sign: i8,
    /// Resource-state copies consumed.
    pub q_used: u64,
    /// Transversal CNOTs plus distiller steps.
    pub gates_used: u64,
    pub status: TraceStatus,
}

fn degree_code(d: Degree) -> i64 {
    match d {
        Degree::NegInf => -1,
        Degree::Deg(k) => k as i64,
    }
}

impl ProtocolTrace {
    /// CSV with one row per round: `round,degree,m_hex,copies,overlap`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("round,degree,m_hex,copies,overlap\n");
        for r in &self.rounds {
            s.push_str(&format!("{},{},{:x},{},{}\n", r.round, r.degree, r.m, r.copies, r.overlap));
        }
        s
    }

    /// Recorded degrees, followed by the terminal one, strictly decrease.
    pub fn degrees_strictly_decreasing(&self) -> bool {
        let mut seq: Vec<i64> = self.rounds.iter().map(|r| r.degree).collect();
        if self.status == TraceStatus::Completed {
            seq.push(if self.terminal == Some(1) { 0 } else { -1 });
        }
        seq.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryAction {
    /// `|⟨V(f̂), D⟩|² / (2^n ‖D‖²)` for the net diagonal `D` applied.
    pub fidelity: f64,
    pub matches_target: bool,
    pub global_sign: i8,
    /// Signs of `D` relative to its first entry, when `D` is a phase times a
    /// `±1` vector.
    pub sign_pattern: Option<Vec<i8>>,
    #[serde(skip)]
    pub diagonal: Vec<C64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnumeratedAction {
    /// The composed channel is `ρ ↦ ρ ∘ M` (in the bus Hadamard frame when
    /// `b > 0`).
    #[serde(skip)]
    pub multiplier: Mat,
    pub n: usize,
    pub b: usize,
    /// Choi gap between the composed channel and the target action.
    pub choi_gap: f64,
    pub branches: u64,
    pub max_rounds: usize,
    /// `max |Pr[m] − 2^{−n}|` over all input states and rounds.
    pub outcome_bias: f64,
}

impl EnumeratedAction {
    /// Dense normalized Choi state of the composed channel, undoing the bus
    /// Hadamard frame for `b > 0`.
    pub fn channel_choi(&self) -> Mat {
        let q = self.n + self.b;
        let d = 1usize << q;
        let bus: Vec<usize> = (self.n..q).collect();
        let h = hadamard_on(q, &bus);
        let mut out = Mat::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let x = Mat::outer(&h.column(i), &h.column(j));
                let y = h.matmul(&x.schur(&self.multiplier)).matmul(&h);
                for r in 0..d {
                    for c in 0..d {
                        out[(i + d * r, j + d * c)] = y[(r, c)] / d as f64;
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EffectiveAction {
    Trajectory(TrajectoryAction),
    Enumerated(EnumeratedAction),
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolOutcome {
    pub action: EffectiveAction,
    /// One trace per trajectory, or one per leaf branch when enumerating.
    pub traces: Vec<ProtocolTrace>,
}

/// A distilled resource for one dataset.
#[derive(Clone, Debug)]
struct Resource {
    state: DensityMatrix,
    copies: u64,
    steps: u64,
    overlap: f64,
}

struct Pipeline {
    device: NoisyDevice,
    encoding: EncodingNoise,
    twirl: TwirlMode,
    distiller: DistillerSpec,
    budget: u64,
}

impl Pipeline {
    fn new(cfg: &ProtocolConfig) -> Result<Self> {
        let q = cfg.total_qubits();
        Ok(Pipeline {
            device: cfg.device.build(q)?,
            encoding: cfg.encoding.build(q)?,
            twirl: cfg.twirl,
            distiller: cfg.distiller.clone(),
            budget: cfg.copy_budget,
        })
    }

    /// Noisy preparation, encoding noise, twirl and distillation for `g`.
    fn prepare(&self, g: &DataTable, seed: u64) -> Result<Resource> {
        let mode = match self.twirl {
            TwirlMode::MonteCarlo { samples, .. } => TwirlMode::MonteCarlo {
                samples,
                seed: derive_seed(seed, 0),
            },
            m => m,
        };
        let twirled = twirled_state_with(g, mode, |h| {
            self.encoding.apply(&self.device.noisy_resource_state(h)?)
        })?
        .state;
        let mut rng = stream(seed, 1);
        let mut src = CopySource::dense(twirled.clone()).with_budget(self.budget);
        let report: Option<DistillReport> = match &self.distiller {
            DistillerSpec::None => None,
            DistillerSpec::SwapTest {
                eps_dist,
                max_levels,
            } => {
                let k = swap_levels(&src, &twirled, *eps_dist, *max_levels)?;
                Some(iterated_swap_test(&mut src, k, &mut rng)?)
            }
            DistillerSpec::QpcaSimple { gamma, eps_dist } => {
                Some(qpca_simple_repeated(&mut src, *gamma, *eps_dist, &mut rng)?)
            }
            DistillerSpec::QpcaRecursive {
                gamma,
                alpha,
                eps_dist,
            } => Some(qpca_recursive(&mut src, *gamma, *alpha, *eps_dist, &mut rng)?),
        };
        let (state, copies, steps) = match report {
            None => (twirled, 1, 0),
            Some(r) if r.exhausted || !r.success => {
                return Err(Error::Budget {
                    budget: self.budget,
                })
            }
            Some(r) => {
                let state = r
                    .output_density()
                    .cloned()
                    .ok_or_else(|| Error::Numerical("distiller produced no state".into()))?;
                (state, r.copies, r.steps)
            }
        };
        let overlap = state.fidelity_pure(&resource_state(g)?)?;
        Ok(Resource {
            state,
            copies,
            steps,
            overlap,
        })
    }
}

/// Fewest swap-test levels whose exact output reaches the target deficit.
fn swap_levels(src: &CopySource, rho: &DensityMatrix, eps: f64, max_levels: usize) -> Result<usize> {
    let mut state = rho.clone();
    for k in 0..=max_levels {
        let deficit = 1.0 - src.overlap(&crate::distill::SourceState::Dense(state.clone()));
        if deficit <= eps {
            return Ok(k);
        }
        state = swap_test_step(&state).1;
    }
    Err(Error::Precondition(format!(
        "swap test does not reach deficit {eps} within {max_levels} levels"
    )))
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w.max(0.0);
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// One trajectory. The distilled resource of each round is unravelled into
/// its eigenvectors: a pure resource `|v⟩` teleports the diagonal Kraus
/// operator `√d · diag(v(x ⊕ m))`, and outcomes are drawn for the maximally
/// entangled input, so the accumulated diagonal is a faithful witness of the
/// net action.
fn run_trajectory<R: Rng + ?Sized>(
    f_hat: &DataTable,
    cfg: &ProtocolConfig,
    pipeline: &Pipeline,
    rng: &mut R,
) -> Result<(TrajectoryAction, ProtocolTrace)> {
    let q = f_hat.n();
    let d = 1usize << q;
    let sd = (d as f64).sqrt();
    let mut acc = vec![C64::new(1.0, 0.0); d];
    let mut g = f_hat.clone();
    let mut trace = ProtocolTrace {
        rounds: Vec::new(),
        terminal: None,
        global_sign: 1,
        q_used: 0,
        gates_used: 0,
        status: TraceStatus::Completed,
    };
    loop {
        let deg = degree(&g);
        if deg.is_constant() {
            break;
        }
        if trace.rounds.len() == cfg.rounds_limit() {
            trace.status = TraceStatus::MaxRounds;
            break;
        }
        let res = match pipeline.prepare(&g, rng.next_u64()) {
            Ok(r) => r,
            Err(Error::Budget { .. }) => {
                trace.status = TraceStatus::BudgetExhausted;
                break;
            }
            Err(e) => return Err(e),
        };
        let e = res.state.eigh();
        let v = e.vector(sample_index(&e.values, rng));
        let probs: Vec<f64> = (0..d)
            .map(|m| (0..d).map(|x| acc[x].norm_sqr() * v[x ^ m].norm_sqr()).sum())
            .collect();
        let m = sample_index(&probs, rng);
        for (x, a) in acc.iter_mut().enumerate() {
            *a *= v[x ^ m] * sd;
        }
        let nrm = (acc.iter().map(|a| a.norm_sqr()).sum::<f64>() / d as f64).sqrt();
        acc.iter_mut().for_each(|a| *a /= nrm);
        trace.rounds.push(RoundRecord {
            round: trace.rounds.len() + 1,
            degree: degree_code(deg),
            m: m as u64,
            copies: res.copies,
            overlap: res.overlap,
        });
        trace.q_used += res.copies;
        trace.gates_used += q as u64 + res.steps;
        g = update_rule(&g, m as u64)?;
    }
    if trace.status == TraceStatus::Completed {
        let value = g.constant_value().expect("loop exits on a constant dataset");
        trace.terminal = Some(value as u8);
        trace.global_sign = if value { -1 } else { 1 };
    }
    let target = f_hat.signs();
    let overlap: C64 = target.iter().zip(&acc).map(|(t, a)| a * *t).sum();
    let norm2: f64 = acc.iter().map(|a| a.norm_sqr()).sum();
    let fidelity = overlap.norm_sqr() / (d as f64 * norm2);
    let sign_pattern = {
        let ratios: Vec<C64> = acc.iter().map(|a| a / acc[0]).collect();
        if ratios.iter().all(|r| r.im.abs() < 1e-9 && (r.re.abs() - 1.0).abs() < 1e-9) {
            Some(ratios.iter().map(|r| if r.re > 0.0 { 1 } else { -1 }).collect())
        } else {
            None
        }
    };
    let action = TrajectoryAction {
        fidelity,
        matches_target: trace.status == TraceStatus::Completed
            && fidelity >= TRAJECTORY_MATCH_FIDELITY,
        global_sign: trace.global_sign,
        sign_pattern,
        diagonal: acc,
    };
    Ok((action, trace))
}

struct Enumerator<'a> {
    cfg: &'a ProtocolConfig,
    pipeline: &'a Pipeline,
    resources: HashMap<DataTable, Resource>,
    multipliers: HashMap<DataTable, Mat>,
    outcome_bias: f64,
}

impl Enumerator<'_> {
    fn resource(&mut self, g: &DataTable) -> Result<Resource> {
        if let Some(r) = self.resources.get(g) {
            return Ok(r.clone());
        }
        let seed = derive_seed(self.cfg.seed, self.resources.len() as u64);
        let r = self.pipeline.prepare(g, seed)?;
        let d = r.state.dim();
        let bias = (0..d)
            .map(|x| (r.state.matrix()[(x, x)].re - 1.0 / d as f64).abs())
            .fold(0.0, f64::max);
        self.outcome_bias = self.outcome_bias.max(bias);
        self.resources.insert(g.clone(), r.clone());
        Ok(r)
    }

    /// `M(g) = Σ_m Φ_m(g) ∘ M(UR(g, m))`, with `M = J` (all ones) on constants.
    fn multiplier(&mut self, g: &DataTable, depth: usize) -> Result<Mat> {
        let d = 1usize << g.n();
        if degree(g).is_constant() {
            return Ok(Mat::from_fn(d, d, |_, _| C64::new(1.0, 0.0)));
        }
        if depth == self.cfg.rounds_limit() {
            return Err(Error::Precondition("max_rounds reached on a branch".into()));
        }
        if let Some(m) = self.multipliers.get(g) {
            return Ok(m.clone());
        }
        let phi = self.resource(g)?.state.into_matrix();
        let mut sum = Mat::zeros(d, d);
        for m in 0..d {
            let child = self.multiplier(&update_rule(g, m as u64)?, depth + 1)?;
            sum.add_scaled(&shifted_resource(&phi, m).schur(&child), C64::new(1.0, 0.0));
        }
        self.multipliers.insert(g.clone(), sum.clone());
        Ok(sum)
    }

    fn traces(&mut self, g: &DataTable, prefix: &mut ProtocolTrace, out: &mut Vec<ProtocolTrace>) -> Result<()> {
        let deg = degree(g);
        if deg.is_constant() {
            let mut t = prefix.clone();
            let value = g.constant_value().unwrap();
            t.terminal = Some(value as u8);
            t.global_sign = if value { -1 } else { 1 };
            out.push(t);
            return Ok(());
        }
        let res = self.resource(g)?;
        let q = g.n();
        for m in 0..1u64 << q {
            prefix.rounds.push(RoundRecord {
                round: prefix.rounds.len() + 1,
                degree: degree_code(deg),
                m,
                copies: res.copies,
                overlap: res.overlap,
            });
            prefix.q_used += res.copies;
            prefix.gates_used += q as u64 + res.steps;
            self.traces(&update_rule(g, m)?, prefix, out)?;
            prefix.rounds.pop();
            prefix.q_used -= res.copies;
            prefix.gates_used -= q as u64 + res.steps;
        }
        Ok(())
    }
}

fn enumerate(f_hat: &DataTable, cfg: &ProtocolConfig, pipeline: &Pipeline) -> Result<ProtocolOutcome> {
    let mut en = Enumerator {
        cfg,
        pipeline,
        resources: HashMap::new(),
        multipliers: HashMap::new(),
        outcome_bias: 0.0,
    };
    let multiplier = en.multiplier(f_hat, 0)?;
    let mut traces = Vec::new();
    let mut prefix = ProtocolTrace {
        rounds: Vec::new(),
        terminal: None,
        global_sign: 1,
        q_used: 0,
        gates_used: 0,
        status: TraceStatus::Completed,
    };
    en.traces(f_hat, &mut prefix, &mut traces)?;

    let d = multiplier.rows();
    let v = f_hat.signs();
    let ideal = Mat::from_fn(d, d, |x, y| C64::new(v[x] * v[y], 0.0));
    let choi_gap = 0.5 * (&multiplier - &ideal).trace_norm_hermitian() / d as f64;
    let action = EnumeratedAction {
        multiplier,
        n: cfg.n,
        b: cfg.b,
        choi_gap,
        branches: traces.len() as u64,
        max_rounds: traces.iter().map(|t| t.rounds.len()).max().unwrap_or(0),
        outcome_bias: en.outcome_bias,
    };
    Ok(ProtocolOutcome {
        action: EffectiveAction::Enumerated(action),
        traces,
    })
}

fn setup(target: &Target, cfg: &ProtocolConfig) -> Result<(DataTable, Pipeline)> {
    cfg.validate()?;
    let (n, b) = target.shape();
    if (n, b) != (cfg.n, cfg.b) {
        return Err(Error::Precondition(format!(
            "dataset has (n, b) = ({n}, {b}), config ({}, {})",
            cfg.n, cfg.b
        )));
    }
    Ok((target.phase_function()?, Pipeline::new(cfg)?))
}

/// Run the protocol once (trajectory mode: trajectory 0 of the seed's
/// streams) or enumerate every outcome branch.
pub fn run_protocol(target: &Target, cfg: &ProtocolConfig) -> Result<ProtocolOutcome> {
    let (f_hat, pipeline) = setup(target, cfg)?;
    match cfg.branch_mode {
        BranchMode::EnumerateBranches => enumerate(&f_hat, cfg, &pipeline),
        BranchMode::Trajectory => {
            let (action, trace) = run_trajectory(&f_hat, cfg, &pipeline, &mut stream(cfg.seed, 0))?;
            Ok(ProtocolOutcome {
                action: EffectiveAction::Trajectory(action),
                traces: vec![trace],
            })
        }
    }
}

/// Independent trajectories `0..trials`, each on its own seeded stream.
pub fn run_trajectories(
    target: &Target,
    cfg: &ProtocolConfig,
    trials: usize,
) -> Result<Vec<(TrajectoryAction, ProtocolTrace)>> {
    let (f_hat, pipeline) = setup(target, cfg)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&f_hat, cfg, &pipeline, &mut stream(cfg.seed, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::shift;
    use crate::qcore::{qram_unitary, QuantumChannel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn config_defaults_and_validation() {
        let cfg: ProtocolConfig = serde_json::from_str(r#"{"n": 3}"#).unwrap();
        assert_eq!(cfg.rounds_limit(), 3);
        assert_eq!(cfg.twirl, TwirlMode::None);
        assert!(cfg.validate().is_ok());
        let bad: std::result::Result<ProtocolConfig, _> = serde_json::from_str(r#"{"n": 3, "bogus": 1}"#);
        assert!(bad.is_err());
        let mut cfg = ProtocolConfig::noiseless(2, 2, BranchMode::Trajectory);
        assert_eq!(cfg.rounds_limit(), 3);
        cfg.max_rounds = Some(2);
        assert!(cfg.validate().is_err());
        let cfg = ProtocolConfig::noiseless(4, 0, BranchMode::EnumerateBranches);
        assert!(matches!(cfg.validate(), Err(Error::SizeCap(_))));
        let cfg: ProtocolConfig = serde_json::from_str(
            r#"{"n": 2, "distiller": {"type": "swap_test", "eps_dist": 0.02},
                "device": {"type": "dead_router", "dead": [1]},
                "twirl": {"type": "monte_carlo", "samples": 10, "seed": 1}}"#,
        )
        .unwrap();
        assert_eq!(cfg.distiller, DistillerSpec::SwapTest { eps_dist: 0.02, max_levels: 40 });
    }

    #[test]
    fn correction_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=4 {
            let g = DataTable::random(n, &mut rng);
            for m in 0..1u64 << n {
                let next = qram_unitary(&update_rule(&g, m).unwrap()).unwrap();
                let applied = qram_unitary(&shift(&g, m).unwrap()).unwrap();
                let full = qram_unitary(&g).unwrap();
                for x in 0..1 << n {
                    assert_eq!(next[x] * applied[x], full[x]);
                }
            }
        }
    }

    #[test]
    fn noiseless_enumeration_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = ProtocolConfig::noiseless(3, 0, BranchMode::EnumerateBranches);
        for _ in 0..5 {
            let f = DataTable::random(3, &mut rng);
            let out = run_protocol(&f.clone().into(), &cfg).unwrap();
            let EffectiveAction::Enumerated(a) = &out.action else { unreachable!() };
            assert!(a.choi_gap < 1e-10);
            assert!(a.max_rounds <= 3);
            assert!(a.outcome_bias < 1e-12);
            let v = Mat::from_real_diag(&qram_unitary(&f).unwrap());
            let ideal = QuantumChannel::unitary(v).choi().unwrap();
            assert!(a.channel_choi().max_abs_diff(&ideal) < 1e-12);
            assert!(out.traces.iter().all(|t| t.degrees_strictly_decreasing()));
        }
    }

    #[test]
    fn constant_dataset_needs_no_rounds() {
        let cfg = ProtocolConfig::noiseless(2, 0, BranchMode::Trajectory);
        let out = run_protocol(&DataTable::constant(2, true).into(), &cfg).unwrap();
        assert!(out.traces[0].rounds.is_empty());
        assert_eq!(out.traces[0].global_sign, -1);
        let EffectiveAction::Trajectory(a) = &out.action else { unreachable!() };
        assert!(a.matches_target);
    }

    #[test]
    fn noiseless_trajectories_apply_the_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = DataTable::random(4, &mut rng);
        let mut cfg = ProtocolConfig::noiseless(4, 0, BranchMode::Trajectory);
        cfg.seed = 5;
        for (a, t) in run_trajectories(&f.clone().into(), &cfg, 20).unwrap() {
            assert!((a.fidelity - 1.0).abs() < 1e-9);
            let signs = f.signs();
            let pattern = a.sign_pattern.unwrap();
            for x in 0..16 {
                assert_eq!(pattern[x] as f64, signs[x] * signs[0]);
            }
            assert!(t.degrees_strictly_decreasing() && t.rounds.len() <= 4);
        }
    }

    #[test]
    fn signed_enumeration_matches_controlled_data_load() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = ProtocolConfig::noiseless(2, 1, BranchMode::EnumerateBranches);
        let f = SignedDataTable::random(2, 1, &mut rng);
        let out = run_protocol(&f.clone().into(), &cfg).unwrap();
        let EffectiveAction::Enumerated(a) = &out.action else { unreachable!() };
        assert!(a.max_rounds <= 3);
        let d = 8;
        let u = Mat::from_fn(d, d, |r, c| {
            let (x, bus) = (c & 3, c >> 2);
            let target = x | ((bus ^ f.data_value(x as u64) as usize) << 2);
            let s = if f.sign.get(x as u64) { -1.0 } else { 1.0 };
            C64::new(if r == target { s } else { 0.0 }, 0.0)
        });
        let ideal = QuantumChannel::unitary(u).choi().unwrap();
        assert!(a.channel_choi().max_abs_diff(&ideal) < 1e-12);
    }

    #[test]
    fn trace_csv_layout() {
        let t = ProtocolTrace {
            rounds: vec![RoundRecord { round: 1, degree: 2, m: 10, copies: 3, overlap: 0.5 }],
            terminal: Some(0),
            global_sign: 1,
            q_used: 3,
            gates_used: 5,
            status: TraceStatus::Completed,
        };
        assert_eq!(t.to_csv(), "round,degree,m_hex,copies,overlap\n1,2,a,3,0.5\n");
    }
}
