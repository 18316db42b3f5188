//! Scenario files and the end-to-end run pipeline.
//!
//! A scenario bundles a world, a population (cohort templates; a count-1
//! cohort is an explicit per-agent record), a network topology, an evidence
//! stream, and the propagation knobs. [`run`] drives the whole pipeline
//! deterministically from one master seed and returns the step history plus
//! a summary; [`write_outputs`] lands the artifacts atomically. Three
//! scenarios ship bundled: `consensus`, `tribes`, and `stickiness`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{Agent, BiasConfig, Interventions, VirtueProfile};
use crate::lattice::{EvaluationBudget, TrustPolicy, Verdict};
use crate::moral::{mac_to_emft, EmftProfile, MacEmftMap, MacProfile};
use crate::profiler::bundled_templates;
use crate::seeds;
use crate::tribes::{
    propagate, tribe_fitness, ClusterParams, Network, PropagationParams, SimHistory,
    TribeAssignment,
};
use crate::world::{generate_evidence_stream, EvidenceItem, StreamConfig, World};
use crate::{Error, Result};

/// Starting shape of the social graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    /// Everyone linked to everyone.
    Complete,
    /// Ring lattice: each agent linked to its `k` nearest on each side.
    Ring { k: usize },
    /// Each pair linked independently with probability `p`.
    Random { p: f64 },
}

impl NetworkSpec {
    /// Materialize the graph for `n` agents.
    pub fn build(&self, n: usize, seed: u64) -> Result<Network> {
        match *self {
            NetworkSpec::Complete => Ok(Network::complete(n)),
            NetworkSpec::Ring { k } => Network::ring(n, k),
            NetworkSpec::Random { p } => Network::random(n, p, seed),
        }
    }
}

/// A population slice sharing one configuration. `count` members are
/// minted as `{name}_{ix}`; a count-1 cohort keeps the bare name, which is
/// how explicit per-agent records are written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub name: String,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Std-dev of the Gaussian jitter applied per member to the moral
    /// weight layers and virtues; 0 clones the cohort profile exactly.
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub group_tag: String,
    /// Bundled tribe template supplying the mac/emft layers.
    #[serde(default)]
    pub template: Option<String>,
    /// Explicit domain weights; take precedence over the template.
    #[serde(default)]
    pub mac: Option<MacProfile>,
    /// Explicit foundation weights; when absent they fall back to the
    /// template's, or derive from the domain weights via the canonical map.
    #[serde(default)]
    pub emft: Option<EmftProfile>,
    #[serde(default)]
    pub virtues: VirtueProfile,
    #[serde(default)]
    pub biases: BiasConfig,
    #[serde(default)]
    pub policy: TrustPolicy,
    #[serde(default)]
    pub interventions: Interventions,
    /// Per-domain competence of every member.
    #[serde(default)]
    pub competence: BTreeMap<String, f64>,
    #[serde(default)]
    pub accepted_authorities: BTreeSet<String>,
    #[serde(default)]
    pub rival_authorities: BTreeSet<String>,
    /// Statements held as convictions from the start.
    #[serde(default)]
    pub beliefs: BTreeSet<String>,
    #[serde(default)]
    pub pre_trusted: BTreeSet<String>,
    /// Claims every member evaluates once before the stream starts.
    #[serde(default)]
    pub seed_claims: Vec<String>,
    #[serde(default)]
    pub stickiness_threshold: Option<u64>,
}

fn default_count() -> usize {
    1
}

fn default_fitness_weight() -> f64 {
    0.5
}

/// Everything one run needs, loadable from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Name echoed into summaries.
    pub name: String,
    /// Master seed; a caller-supplied override takes precedence.
    #[serde(default)]
    pub seed: u64,
    pub steps: u64,
    pub world: World,
    pub cohorts: Vec<CohortSpec>,
    pub network: NetworkSpec,
    pub stream: StreamConfig,
    #[serde(default)]
    pub budget: EvaluationBudget,
    /// Homophily rewiring rate per step.
    #[serde(default)]
    pub rewire_rate: f64,
    #[serde(default)]
    pub cluster: ClusterParams,
    /// Accuracy weight in per-tribe fitness.
    #[serde(default = "default_fitness_weight")]
    pub fitness_weight: f64,
}

impl ScenarioConfig {
    /// Check every cross-reference and numeric range, naming the offender.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("scenario name must not be empty".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        self.world.validate()?;
        self.stream.validate(&self.world)?;
        self.cluster.validate()?;
        for (field, v) in [("rewire_rate", self.rewire_rate), ("fitness_weight", self.fitness_weight)] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::Config(format!("{field} out of [0,1]: {v}")));
            }
        }
        if self.budget.max_nodes == 0 {
            return Err(Error::Config("budget.max_nodes must be at least 1".into()));
        }
        if let NetworkSpec::Random { p } = self.network {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::Config(format!("network.p out of [0,1]: {p}")));
            }
        }
        if self.cohorts.is_empty() {
            return Err(Error::Config("scenario declares no cohorts".into()));
        }
        let template_names: BTreeSet<String> =
            bundled_templates().into_iter().map(|t| t.name).collect();
        let mut cohort_names = BTreeSet::new();
        for cohort in &self.cohorts {
            let who = &cohort.name;
            if who.is_empty() {
                return Err(Error::Config("cohort name must not be empty".into()));
            }
            if !cohort_names.insert(who.clone()) {
                return Err(Error::Config(format!("duplicate cohort name: {who}")));
            }
            if cohort.count == 0 {
                return Err(Error::Config(format!("cohort {who} count must be at least 1")));
            }
            if !cohort.noise_std.is_finite() || cohort.noise_std < 0.0 {
                return Err(Error::Config(format!(
                    "cohort {who} noise_std must be finite and non-negative: {}",
                    cohort.noise_std
                )));
            }
            if let Some(t) = &cohort.template {
                if !template_names.contains(t) {
                    return Err(Error::UnknownId { kind: "template", id: t.clone() });
                }
            }
            if let Some(mac) = &cohort.mac {
                mac.validate()?;
            }
            if let Some(emft) = &cohort.emft {
                emft.validate()?;
            }
            cohort.virtues.validate()?;
            cohort.biases.validate()?;
            cohort.policy.validate()?;
            for (domain, v) in &cohort.competence {
                if !self.world.domains.iter().any(|d| d == domain) {
                    return Err(Error::Config(format!(
                        "cohort {who} competence references undeclared domain {domain}"
                    )));
                }
                if !(0.0..=1.0).contains(v) || v.is_nan() {
                    return Err(Error::Config(format!(
                        "cohort {who} competence[{domain}] out of [0,1]: {v}"
                    )));
                }
            }
            for (field, ids) in [
                ("accepted_authorities", &cohort.accepted_authorities),
                ("rival_authorities", &cohort.rival_authorities),
            ] {
                for id in ids {
                    if self.world.source(id).is_none() {
                        return Err(Error::Config(format!(
                            "cohort {who} {field} references unknown source {id}"
                        )));
                    }
                }
            }
            for (field, ids) in [("beliefs", &cohort.beliefs), ("pre_trusted", &cohort.pre_trusted)] {
                for id in ids {
                    if self.world.claim(id).is_none() && self.world.evidence_item(id).is_none() {
                        return Err(Error::Config(format!(
                            "cohort {who} {field} references unknown statement {id}"
                        )));
                    }
                }
            }
            for id in &cohort.seed_claims {
                if self.world.claim(id).is_none() {
                    return Err(Error::Config(format!(
                        "cohort {who} seed_claims references unknown claim {id}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total population size.
    pub fn agent_count(&self) -> usize {
        self.cohorts.iter().map(|c| c.count).sum()
    }
}

/// Load a scenario from a JSON file; parse errors surface as configuration
/// errors so the caller can treat them as invalid input rather than
/// runtime failure.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("scenario file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("scenario file {}: {e}", path.display())))
}

/// Names of the scenarios compiled into the library.
pub const BUNDLED_SCENARIOS: [&str; 3] = ["consensus", "tribes", "stickiness"];

/// One of the compiled-in scenarios by name.
pub fn bundled_scenario(name: &str) -> Result<ScenarioConfig> {
    let text = match name {
        "consensus" => include_str!("../data/scenarios/consensus.json"),
        "tribes" => include_str!("../data/scenarios/tribes.json"),
        "stickiness" => include_str!("../data/scenarios/stickiness.json"),
        _ => return Err(Error::UnknownId { kind: "scenario", id: name.to_string() }),
    };
    serde_json::from_str(text).map_err(|e| Error::Config(format!("bundled scenario {name}: {e}")))
}

/// Gaussian-jitter a weight vector and renormalize; the base survives when
/// the draw degenerates to zero mass.
fn jittered_weights<const N: usize>(base: [f64; N], noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> [f64; N] {
    let mut out = base;
    for v in &mut out {
        *v = (*v + noise.sample(rng)).max(0.0);
    }
    let sum: f64 = out.iter().sum();
    if sum <= 0.0 {
        return base;
    }
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Expand the cohort declarations into concrete agents, jittered and with
/// their seed claims already evaluated. Deterministic in the master seed.
pub fn build_population(config: &ScenarioConfig, master_seed: u64) -> Result<Vec<Agent>> {
    let templates = bundled_templates();
    let map = MacEmftMap::default_map();
    let mut agents = Vec::with_capacity(config.agent_count());
    for (cix, cohort) in config.cohorts.iter().enumerate() {
        let template = cohort
            .template
            .as_ref()
            .map(|name| templates.iter().find(|t| &t.name == name).expect("validated template name"));
        let base_mac = cohort.mac.or(template.map(|t| t.mac)).unwrap_or_else(MacProfile::uniform);
        let base_emft = cohort.emft.or(template.map(|t| t.emft));
        for i in 0..cohort.count {
            let id = if cohort.count == 1 {
                cohort.name.clone()
            } else {
                format!("{}_{i:02}", cohort.name)
            };
            let mut agent = Agent::new(id);
            agent.group_tag = cohort.group_tag.clone();
            agent.mac = base_mac;
            agent.virtues = cohort.virtues;
            if cohort.noise_std > 0.0 {
                let noise = Normal::new(0.0, cohort.noise_std)
                    .map_err(|e| Error::Config(format!("cohort {} noise_std: {e}", cohort.name)))?;
                let mut rng = seeds::rng(master_seed, &[seeds::tag("cohort"), cix as u64, i as u64]);
                agent.mac = MacProfile(jittered_weights(base_mac.0, &noise, &mut rng));
                if let Some(emft) = base_emft {
                    agent.emft = EmftProfile(jittered_weights(emft.0, &noise, &mut rng));
                }
                let v = &mut agent.virtues;
                for dial in [
                    &mut v.humility,
                    &mut v.courage,
                    &mut v.openness,
                    &mut v.attentiveness,
                    &mut v.perseverance,
                ] {
                    *dial = (*dial + noise.sample(&mut rng)).clamp(0.0, 1.0);
                }
            } else if let Some(emft) = base_emft {
                agent.emft = emft;
            }
            if base_emft.is_none() {
                agent.emft = mac_to_emft(&agent.mac, &map)?;
            }
            agent.biases = cohort.biases;
            agent.policy = cohort.policy.clone();
            agent.interventions = cohort.interventions;
            agent.competence = cohort.competence.clone();
            agent.accepted_authorities = cohort.accepted_authorities.clone();
            agent.rival_authorities = cohort.rival_authorities.clone();
            agent.beliefs = cohort.beliefs.clone();
            agent.pre_trusted = cohort.pre_trusted.clone();
            if let Some(s) = cohort.stickiness_threshold {
                agent.stickiness_threshold = s;
            }
            for claim_id in &cohort.seed_claims {
                let claim = config.world.claim(claim_id).expect("validated seed claim");
                let fb_seed = seeds::derive(master_seed, &[seeds::tag("seed_claims"), seeds::tag(claim_id)]);
                agent.form_belief(claim, &config.world, config.budget, fb_seed)?;
            }
            agents.push(agent);
        }
    }
    Ok(agents)
}

/// One tribe in the final population, by member agent id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TribeSummary {
    pub id: usize,
    pub members: Vec<String>,
    pub fitness: f64,
}

/// Verdict tallies over the population for one claim.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTally {
    pub accepted: usize,
    pub rejected: usize,
    pub undecided: usize,
}

/// End-of-run report: final polarization metrics, the tribe assignment with
/// per-tribe fitness, event counts, and the provenance hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    /// SHA-256 of the canonical JSON serialization of the effective config.
    pub config_sha256: String,
    pub steps: u64,
    pub agent_count: usize,
    pub tribe_count: usize,
    pub within_agreement: f64,
    pub cross_agreement: f64,
    pub polarization_index: f64,
    /// Rejected share of all truth-aligned corrections over the whole run.
    pub rejected_correction_rate: f64,
    pub corrections_seen: u64,
    pub corrections_rejected: u64,
    pub conviction_corrections_seen: u64,
    pub conviction_corrections_rejected: u64,
    pub evidence_corrections_seen: u64,
    pub evidence_corrections_rejected: u64,
    pub stop_loss_events: u64,
    pub deference_events: u64,
    pub tribes: Vec<TribeSummary>,
    /// Per-claim verdict tallies across the population.
    pub labels: BTreeMap<String, LabelTally>,
}

/// Everything a finished run hands back.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub history: SimHistory,
    pub agents: Vec<Agent>,
    pub network: Network,
    pub assignment: TribeAssignment,
}

/// Hex SHA-256 of the canonical JSON serialization. Struct field order is
/// fixed and maps are sorted, so the hash is platform-stable.
pub fn config_hash(config: &ScenarioConfig) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

/// Execute a scenario end to end. `seed_override` replaces the file's seed
/// when given; everything downstream derives from the effective seed.
pub fn run(config: &ScenarioConfig, seed_override: Option<u64>) -> Result<RunOutput> {
    config.validate()?;
    let mut effective = config.clone();
    effective.seed = seed_override.unwrap_or(config.seed);
    let seed = effective.seed;
    let world = &effective.world;

    let mut agents = build_population(&effective, seed)?;
    let mut network = effective
        .network
        .build(agents.len(), seeds::derive(seed, &[seeds::tag("net")]))?;
    let stream = generate_evidence_stream(
        world,
        &effective.stream,
        effective.steps as usize,
        seeds::derive(seed, &[seeds::tag("stream")]),
    )?;
    let params = PropagationParams {
        budget: effective.budget,
        rewire_rate: effective.rewire_rate,
        cluster: effective.cluster,
    };
    let per_step = effective.stream.items_per_step;

    let mut history = SimHistory::default();
    let mut shares: Vec<(usize, EvidenceItem)> = Vec::new();
    let mut assignment = None;
    for step in 0..effective.steps {
        let lo = step as usize * per_step;
        let chunk = &stream[lo..lo + per_step];
        let out = propagate(world, &mut agents, &mut network, chunk, &shares, &params, step, seed)?;
        shares = out.shares;
        history.push(out.record);
        assignment = Some(out.assignment);
    }
    let assignment = assignment.expect("steps >= 1 is validated");
    let summary = summarize(&effective, &agents, &history, &assignment)?;
    Ok(RunOutput { summary, history, agents, network, assignment })
}

fn summarize(
    config: &ScenarioConfig,
    agents: &[Agent],
    history: &SimHistory,
    assignment: &TribeAssignment,
) -> Result<RunSummary> {
    let last = history.last().expect("at least one step was recorded");
    let (seen, rejected) = history.correction_totals();
    let (conviction_seen, conviction_rejected) = history.conviction_correction_totals();
    let (evidence_seen, evidence_rejected) = history.evidence_correction_totals();
    let mut tribes = Vec::with_capacity(assignment.tribe_count());
    for (id, members) in assignment.tribes.iter().enumerate() {
        tribes.push(TribeSummary {
            id,
            members: members.iter().map(|&ix| agents[ix].id.clone()).collect(),
            fitness: tribe_fitness(members, agents, &config.world, config.fitness_weight)?,
        });
    }
    let mut labels = BTreeMap::new();
    for claim in &config.world.claims {
        let mut tally = LabelTally::default();
        for agent in agents {
            match agent.own_label(&claim.id) {
                Verdict::Accepted => tally.accepted += 1,
                Verdict::Rejected => tally.rejected += 1,
                Verdict::Undecided => tally.undecided += 1,
            }
        }
        labels.insert(claim.id.clone(), tally);
    }
    Ok(RunSummary {
        scenario: config.name.clone(),
        seed: config.seed,
        config_sha256: config_hash(config)?,
        steps: config.steps,
        agent_count: agents.len(),
        tribe_count: last.tribe_count,
        within_agreement: last.within_agreement,
        cross_agreement: last.cross_agreement,
        polarization_index: last.polarization_index,
        rejected_correction_rate: if seen == 0 { 0.0 } else { rejected as f64 / seen as f64 },
        corrections_seen: seen,
        corrections_rejected: rejected,
        conviction_corrections_seen: conviction_seen,
        conviction_corrections_rejected: conviction_rejected,
        evidence_corrections_seen: evidence_seen,
        evidence_corrections_rejected: evidence_rejected,
        stop_loss_events: agents.iter().map(|a| a.events.stop_loss).sum(),
        deference_events: agents.iter().map(|a| a.events.deference).sum(),
        tribes,
        labels,
    })
}

/// Fraction of the population's accepted claims that are actually true
/// (0 when nothing is accepted).
pub fn population_accuracy(agents: &[Agent], world: &World) -> Result<f64> {
    let mut accepted = 0u64;
    let mut correct = 0u64;
    for agent in agents {
        for claim in &world.claims {
            if agent.own_label(&claim.id) == Verdict::Accepted {
                accepted += 1;
                if crate::world::ground_truth(world, &claim.id)? {
                    correct += 1;
                }
            }
        }
    }
    Ok(if accepted == 0 { 0.0 } else { correct as f64 / accepted as f64 })
}

/// The same scenario with every intervention switched off — the paired
/// control arm for intervention experiments.
pub fn without_interventions(config: &ScenarioConfig) -> ScenarioConfig {
    let mut c = config.clone();
    for cohort in &mut c.cohorts {
        cohort.interventions = Interventions::default();
    }
    c
}

/// The same scenario with both interventions switched on everywhere.
pub fn with_all_interventions(config: &ScenarioConfig) -> ScenarioConfig {
    let mut c = config.clone();
    for cohort in &mut c.cohorts {
        cohort.interventions = Interventions { stop_loss: true, adversarial_deference: true };
    }
    c
}

/// The paired baseline for bias experiments: every bias dial zeroed and
/// out-group rejection disabled; topology, stream, and moral layers stay.
pub fn without_biases(config: &ScenarioConfig) -> ScenarioConfig {
    let mut c = config.clone();
    for cohort in &mut c.cohorts {
        cohort.biases = BiasConfig::default();
        cohort.policy.out_group_rejection = false;
    }
    c
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub metrics_csv: PathBuf,
    pub summary_json: PathBuf,
    pub lattices_json: Option<PathBuf>,
}

/// Write a file through a same-directory temp name and rename, so readers
/// never observe a half-written artifact.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Land the run artifacts in `dir`: `metrics.csv` (per-step table),
/// `summary.json`, and optionally `lattices.json` (every agent's final
/// lattices and labels). All writes are atomic.
pub fn write_outputs(dir: impl AsRef<Path>, output: &RunOutput, dump_lattices: bool) -> Result<OutputPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let metrics_csv = dir.join("metrics.csv");
    write_atomic(&metrics_csv, &output.history.to_csv())?;
    let summary_json = dir.join("summary.json");
    let mut summary_text = serde_json::to_string_pretty(&output.summary)?;
    summary_text.push('\n');
    write_atomic(&summary_json, &summary_text)?;
    let lattices_json = if dump_lattices {
        let path = dir.join("lattices.json");
        let mut dump = serde_json::Map::new();
        for agent in &output.agents {
            let mut lattices = serde_json::Map::new();
            for (claim, lattice) in &agent.lattices {
                lattices.insert(claim.clone(), lattice.dump());
            }
            dump.insert(
                agent.id.clone(),
                serde_json::json!({
                    "labels": agent.labels,
                    "lattices": serde_json::Value::Object(lattices),
                }),
            );
        }
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(dump))?;
        text.push('\n');
        write_atomic(&path, &text)?;
        Some(path)
    } else {
        None
    };
    Ok(OutputPaths { metrics_csv, summary_json, lattices_json })
}
