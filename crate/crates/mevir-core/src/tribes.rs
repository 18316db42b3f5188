//! Population dynamics: networks, propagation, tribes, and polarization.
//!
//! A [`Network`] connects agents with weighted undirected edges. Each
//! [`propagate`] step delivers a stream chunk and the previous step's
//! neighbor shares into per-agent inboxes, routes every new item through
//! belief formation or revision, re-shares what was accepted, optionally
//! rewires edges toward similar profiles, and measures the population:
//! tribe detection by single-linkage clustering over a blended
//! profile/label distance, within- and cross-tribe agreement, and the
//! polarization index.
//!
//! Delivery uses one random draw per item id, shared by every agent
//! (common random numbers): agents differ in what they receive only
//! through their own salience and edge weights, so identical agents follow
//! bit-identical trajectories.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::lattice::{evaluate, revise, AgentContext, AnchorKind, EvaluationBudget, RevisionOutcome, Verdict};
use crate::moral::{frame_salience, profile_distance, LayerWeights};
use crate::world::{statement_truth, EvidenceItem, Polarity, World};
use crate::{seeds, Error, Result};

/// Undirected weighted graph over agent indices, with deterministic
/// iteration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    n: usize,
    edges: BTreeMap<(usize, usize), f64>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Network {
    /// An edgeless network over `n` nodes.
    pub fn empty(n: usize) -> Network {
        Network { n, edges: BTreeMap::new() }
    }

    /// Every pair connected at weight 1.
    pub fn complete(n: usize) -> Network {
        let mut net = Network::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                net.edges.insert((i, j), 1.0);
            }
        }
        net
    }

    /// A ring where each node links to its `k` nearest neighbors on each
    /// side (weight 1). Collapses to complete when `2k ≥ n − 1`.
    pub fn ring(n: usize, k: usize) -> Result<Network> {
        if k == 0 {
            return Err(Error::Config("ring neighbor count k must be at least 1".into()));
        }
        let mut net = Network::empty(n);
        for i in 0..n {
            for step in 1..=k {
                let j = (i + step) % n;
                if i != j {
                    net.edges.insert(edge_key(i, j), 1.0);
                }
            }
        }
        Ok(net)
    }

    /// Seeded Erdős–Rényi graph: each pair connected independently with
    /// probability `p` (weight 1).
    pub fn random(n: usize, p: f64, seed: u64) -> Result<Network> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::OutOfRange { field: "network.p".into(), value: p });
        }
        let mut rng = seeds::rng(seed, &[seeds::tag("net")]);
        let mut net = Network::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < p {
                    net.edges.insert((i, j), 1.0);
                }
            }
        }
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains_key(&edge_key(a, b))
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    /// Insert or update an edge. Self-loops, out-of-range nodes, and
    /// weights outside (0, 1] are refused.
    pub fn add_edge(&mut self, a: usize, b: usize, weight: f64) -> Result<()> {
        if a == b {
            return Err(Error::Config(format!("self-loop on node {a}")));
        }
        if a >= self.n || b >= self.n {
            return Err(Error::Config(format!("edge ({a}, {b}) outside a {}-node network", self.n)));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::OutOfRange { field: "edge weight".into(), value: weight });
        }
        self.edges.insert(edge_key(a, b), weight);
        Ok(())
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) -> bool {
        self.edges.remove(&edge_key(a, b)).is_some()
    }

    /// Neighbors of `i` with edge weights, ascending by index.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self
            .edges
            .iter()
            .filter_map(|(&(a, b), &w)| {
                if a == i {
                    Some((b, w))
                } else if b == i {
                    Some((a, w))
                } else {
                    None
                }
            })
            .collect();
        out.sort_by_key(|&(j, _)| j);
        out
    }

    /// All edges as `((low, high), weight)`, ascending by key.
    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.edges.iter().map(|(&k, &w)| (k, w))
    }
}

/// Parameters of tribe detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterParams {
    /// Blend between profile distance (λ) and label disagreement (1 − λ).
    pub lambda: f64,
    /// Single-linkage threshold: pairs closer than this share a tribe.
    pub tau: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams { lambda: 0.5, tau: 0.2 }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) || self.lambda.is_nan() {
            return Err(Error::OutOfRange { field: "cluster.lambda".into(), value: self.lambda });
        }
        if !(self.tau > 0.0 && self.tau <= 2.0) {
            return Err(Error::OutOfRange { field: "cluster.tau".into(), value: self.tau });
        }
        Ok(())
    }
}

/// Result of one tribe-detection pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TribeAssignment {
    /// Member indices per tribe; tribes ordered by smallest member, members
    /// ascending.
    pub tribes: Vec<Vec<usize>>,
    /// Tribe id per agent index.
    pub by_agent: Vec<usize>,
}

impl TribeAssignment {
    pub fn tribe_count(&self) -> usize {
        self.tribes.len()
    }

    pub fn same_tribe(&self, a: usize, b: usize) -> bool {
        self.by_agent[a] == self.by_agent[b]
    }
}

/// Fraction of the world's claims on which two agents hold different
/// verdicts (unevaluated claims count as undecided).
pub fn label_disagreement(a: &Agent, b: &Agent, world: &World) -> f64 {
    if world.claims.is_empty() {
        return 0.0;
    }
    let differing = world
        .claims
        .iter()
        .filter(|c| a.own_label(&c.id) != b.own_label(&c.id))
        .count();
    differing as f64 / world.claims.len() as f64
}

/// Complement of [`label_disagreement`]: fraction of claims labeled alike.
pub fn pair_agreement(a: &Agent, b: &Agent, world: &World) -> f64 {
    1.0 - label_disagreement(a, b, world)
}

/// Group agents into tribes by single-linkage clustering.
///
/// Pairwise distance is `λ·profile_distance + (1 − λ)·label_disagreement`;
/// tribes are the connected components of the graph joining pairs closer
/// than τ. Deterministic: tribe ids follow the smallest member index.
pub fn detect_tribes(agents: &[Agent], world: &World, params: &ClusterParams) -> Result<TribeAssignment> {
    params.validate()?;
    if agents.is_empty() {
        return Err(Error::Config("cannot detect tribes over an empty population".into()));
    }
    let n = agents.len();
    let weights = LayerWeights::default();
    let profiles: Vec<_> = agents.iter().map(|a| a.profiles()).collect();
    let mut close = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d_profile = profile_distance(&profiles[i], &profiles[j], &weights)?;
            let d_labels = label_disagreement(&agents[i], &agents[j], world);
            let d = params.lambda * d_profile + (1.0 - params.lambda) * d_labels;
            if d < params.tau {
                close[i][j] = true;
                close[j][i] = true;
            }
        }
    }
    let mut by_agent = vec![usize::MAX; n];
    let mut tribes: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if by_agent[start] != usize::MAX {
            continue;
        }
        let id = tribes.len();
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        by_agent[start] = id;
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for j in 0..n {
                if close[i][j] && by_agent[j] == usize::MAX {
                    by_agent[j] = id;
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        tribes.push(members);
    }
    Ok(TribeAssignment { tribes, by_agent })
}

/// Agreement structure of a partitioned population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationStats {
    /// Mean agreement of same-tribe pairs (1 when no such pair exists).
    pub within_agreement: f64,
    /// Mean agreement of cross-tribe pairs (1 when no such pair exists).
    pub cross_agreement: f64,
    /// `max(0, within − cross)`; 0 for a single tribe.
    pub index: f64,
}

/// Measure within/cross-tribe agreement and the polarization index.
pub fn polarization_stats(
    agents: &[Agent],
    assignment: &TribeAssignment,
    world: &World,
) -> PolarizationStats {
    let n = agents.len();
    let (mut within, mut within_n) = (0.0, 0u64);
    let (mut cross, mut cross_n) = (0.0, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let agree = pair_agreement(&agents[i], &agents[j], world);
            if assignment.same_tribe(i, j) {
                within += agree;
                within_n += 1;
            } else {
                cross += agree;
                cross_n += 1;
            }
        }
    }
    let within_agreement = if within_n == 0 { 1.0 } else { within / within_n as f64 };
    let cross_agreement = if cross_n == 0 { 1.0 } else { cross / cross_n as f64 };
    PolarizationStats {
        within_agreement,
        cross_agreement,
        index: (within_agreement - cross_agreement).max(0.0),
    }
}

/// Convenience wrapper returning only the index.
pub fn polarization_index(agents: &[Agent], assignment: &TribeAssignment, world: &World) -> f64 {
    polarization_stats(agents, assignment, world).index
}

/// Fitness of one tribe: `w·accuracy + (1 − w)·cohesion`.
///
/// Accuracy is the truth rate of the members' accepted claims (0 when none
/// are accepted); cohesion is the mean pairwise agreement among members
/// (1 for a singleton).
pub fn tribe_fitness(
    members: &[usize],
    agents: &[Agent],
    world: &World,
    accuracy_weight: f64,
) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::Config("tribe_fitness over an empty tribe".into()));
    }
    if !(0.0..=1.0).contains(&accuracy_weight) || accuracy_weight.is_nan() {
        return Err(Error::OutOfRange { field: "fitness_weight".into(), value: accuracy_weight });
    }
    for &ix in members {
        if ix >= agents.len() {
            return Err(Error::Config(format!("tribe member index {ix} out of range")));
        }
    }
    let mut accepted = 0u64;
    let mut correct = 0u64;
    for &ix in members {
        for claim in &world.claims {
            if agents[ix].own_label(&claim.id) == Verdict::Accepted {
                accepted += 1;
                if crate::world::ground_truth(world, &claim.id)? {
                    correct += 1;
                }
            }
        }
    }
    let accuracy = if accepted == 0 { 0.0 } else { correct as f64 / accepted as f64 };
    let cohesion = if members.len() < 2 {
        1.0
    } else {
        let mut sum = 0.0;
        let mut pairs = 0u64;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[(a + 1)..] {
                sum += pair_agreement(&agents[i], &agents[j], world);
                pairs += 1;
            }
        }
        sum / pairs as f64
    };
    Ok(accuracy_weight * accuracy + (1.0 - accuracy_weight) * cohesion)
}

/// An agent's estimate of how widely its own verdict on a claim is shared.
///
/// Blends the agent's neighborhood rate with the true population rate by
/// the false-consensus dial: `bias·neighbor_fraction +
/// (1 − bias)·population_fraction`. An isolated agent's neighborhood
/// fraction is 1 (its bubble is itself).
pub fn perceived_consensus(
    agents: &[Agent],
    network: &Network,
    who: usize,
    claim_id: &str,
) -> Result<f64> {
    if who >= agents.len() {
        return Err(Error::Config(format!("agent index {who} out of range")));
    }
    let own = agents[who].own_label(claim_id);
    let neighbors = network.neighbors(who);
    let neighbor_fraction = if neighbors.is_empty() {
        1.0
    } else {
        let matching = neighbors.iter().filter(|(j, _)| agents[*j].own_label(claim_id) == own).count();
        matching as f64 / neighbors.len() as f64
    };
    let others = agents.len() - 1;
    let population_fraction = if others == 0 {
        1.0
    } else {
        let matching = agents
            .iter()
            .enumerate()
            .filter(|(ix, a)| *ix != who && a.own_label(claim_id) == own)
            .count();
        matching as f64 / others as f64
    };
    let bias = agents[who].biases.false_consensus;
    Ok(bias * neighbor_fraction + (1.0 - bias) * population_fraction)
}

/// One homophily pass: each edge rewires with probability
/// `rate × profile_distance`, keeping a random endpoint and reconnecting it
/// to a random strictly-closer, not-yet-connected agent. The edge count and
/// the moved edge's weight are preserved; a pass never increases the total
/// profile distance across edges. Returns how many edges moved.
pub fn rewire_homophily(
    network: &mut Network,
    agents: &[Agent],
    rate: f64,
    seed: u64,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&rate) || rate.is_nan() {
        return Err(Error::OutOfRange { field: "rewire_rate".into(), value: rate });
    }
    if network.node_count() != agents.len() {
        return Err(Error::Config(format!(
            "network has {} nodes but the population has {} agents",
            network.node_count(),
            agents.len()
        )));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let n = agents.len();
    let weights = LayerWeights::default();
    let profiles: Vec<_> = agents.iter().map(|a| a.profiles()).collect();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = profile_distance(&profiles[i], &profiles[j], &weights)?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut rng = seeds::rng(seed, &[seeds::tag("rewire")]);
    let snapshot: Vec<((usize, usize), f64)> = network.edges().collect();
    let mut rewired = 0;
    for ((i, j), w) in snapshot {
        if !network.has_edge(i, j) {
            continue;
        }
        let d = dist[i][j];
        if rng.gen::<f64>() >= rate * d {
            continue;
        }
        let keeper = if rng.gen::<bool>() { i } else { j };
        let candidates: Vec<usize> = (0..n)
            .filter(|&k| k != i && k != j && !network.has_edge(keeper, k) && dist[keeper][k] < d)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let pick = candidates[rng.gen_range(0..candidates.len())];
        network.remove_edge(i, j);
        network.add_edge(keeper, pick, w)?;
        rewired += 1;
    }
    Ok(rewired)
}

/// Per-step knobs of the propagation loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub budget: EvaluationBudget,
    /// Homophily rewiring rate per step (0 disables rewiring).
    pub rewire_rate: f64,
    pub cluster: ClusterParams,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            budget: EvaluationBudget::default(),
            rewire_rate: 0.0,
            cluster: ClusterParams::default(),
        }
    }
}

/// One row of the simulation history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub tribe_count: usize,
    pub within_agreement: f64,
    pub cross_agreement: f64,
    pub polarization_index: f64,
    /// Rejected share of this step's truth-aligned corrections (0 when none
    /// arrived).
    pub rejected_correction_rate: f64,
    pub stop_loss_events: u64,
    pub deference_events: u64,
    /// Truth-aligned corrections processed this step (not a CSV column).
    pub corrections_seen: u64,
    /// Of those, how many the stickiness rule refused (not a CSV column).
    pub corrections_rejected: u64,
    /// Corrections whose target was held as a conviction — a belief- or
    /// pre-trust-anchored node — when they arrived (not a CSV column).
    pub conviction_corrections_seen: u64,
    pub conviction_corrections_rejected: u64,
    /// Corrections aimed at ordinary evidence or unanchored nodes.
    pub evidence_corrections_seen: u64,
    pub evidence_corrections_rejected: u64,
}

impl StepRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
            self.step,
            self.tribe_count,
            self.within_agreement,
            self.cross_agreement,
            self.polarization_index,
            self.rejected_correction_rate,
            self.stop_loss_events,
            self.deference_events
        )
    }
}

/// The recorded trajectory of one simulation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimHistory {
    pub records: Vec<StepRecord>,
}

impl SimHistory {
    pub const CSV_HEADER: &'static str = "step,tribe_count,within_agreement,cross_agreement,polarization_index,rejected_correction_rate,stop_loss_events,deference_events";

    pub fn push(&mut self, record: StepRecord) {
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    /// Render the metrics table; one row per step, eight columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// Total truth-aligned corrections seen and rejected across all steps.
    pub fn correction_totals(&self) -> (u64, u64) {
        self.records
            .iter()
            .fold((0, 0), |(s, r), rec| (s + rec.corrections_seen, r + rec.corrections_rejected))
    }

    /// Correction totals restricted to conviction-held targets.
    pub fn conviction_correction_totals(&self) -> (u64, u64) {
        self.records.iter().fold((0, 0), |(s, r), rec| {
            (s + rec.conviction_corrections_seen, r + rec.conviction_corrections_rejected)
        })
    }

    /// Correction totals restricted to ordinary-evidence targets.
    pub fn evidence_correction_totals(&self) -> (u64, u64) {
        self.records.iter().fold((0, 0), |(s, r), rec| {
            (s + rec.evidence_corrections_seen, r + rec.evidence_corrections_rejected)
        })
    }
}

/// What one propagation step hands back to the driver.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub record: StepRecord,
    /// Items accepted this step, to be offered to neighbors next step.
    pub shares: Vec<(usize, EvidenceItem)>,
    pub assignment: TribeAssignment,
}

/// True when a veracious item pushes toward the truth of its target:
/// supporting a true statement or attacking a false one.
fn truth_aligned(item: &EvidenceItem, world: &World) -> bool {
    match statement_truth(world, &item.target) {
        Some(true) => item.polarity == Polarity::Supports,
        Some(false) => item.polarity == Polarity::Attacks,
        None => false,
    }
}

/// Advance the population by one step.
///
/// Delivery: every agent receives each stream item with probability
/// `0.5 + 0.5·salience` and each neighbor-shared item with that probability
/// times the strongest sharing edge's weight, all judged against one shared
/// draw per item. Processing: new items (memory deduplicates) pass the
/// reactance filter, then revise the lattice of the claim they bear on —or
/// trigger belief formation when the agent has none— and items the agent's
/// lattice accepts are shared onward. Afterwards the network optionally
/// rewires by homophily and the population is measured.
#[allow(clippy::too_many_arguments)]
pub fn propagate(
    world: &World,
    agents: &mut [Agent],
    network: &mut Network,
    stream_chunk: &[EvidenceItem],
    prev_shares: &[(usize, EvidenceItem)],
    params: &PropagationParams,
    step: u64,
    seed: u64,
) -> Result<StepOutcome> {
    if agents.is_empty() {
        return Err(Error::Config("cannot propagate over an empty population".into()));
    }
    if network.node_count() != agents.len() {
        return Err(Error::Config(format!(
            "network has {} nodes but the population has {} agents",
            network.node_count(),
            agents.len()
        )));
    }
    let stop_before: u64 = agents.iter().map(|a| a.events.stop_loss).sum();
    let deference_before: u64 = agents.iter().map(|a| a.events.deference).sum();

    // Shared items: per id, the strongest edge over which each receiver is
    // offered the item.
    let mut offered: BTreeMap<String, (EvidenceItem, BTreeMap<usize, f64>)> = BTreeMap::new();
    for (sharer, item) in prev_shares {
        let entry = offered.entry(item.id.clone()).or_insert_with(|| (item.clone(), BTreeMap::new()));
        for (receiver, w) in network.neighbors(*sharer) {
            let best = entry.1.entry(receiver).or_insert(0.0);
            if w > *best {
                *best = w;
            }
        }
    }

    // Delivery with one common draw per item id.
    let mut inboxes: Vec<Vec<EvidenceItem>> = vec![Vec::new(); agents.len()];
    let receive_draw = |id: &str| -> f64 {
        seeds::rng(seed, &[seeds::tag("recv"), step, seeds::tag(id)]).gen()
    };
    for item in stream_chunk {
        let u = receive_draw(&item.id);
        for (ix, agent) in agents.iter().enumerate() {
            let salience = frame_salience(&item.framing, &agent.emft)?;
            if u < 0.5 + 0.5 * salience {
                inboxes[ix].push(item.clone());
            }
        }
    }
    for (id, (item, receivers)) in &offered {
        let u = receive_draw(id);
        for (&ix, &w) in receivers {
            let salience = frame_salience(&item.framing, &agents[ix].emft)?;
            if u < w * (0.5 + 0.5 * salience) {
                inboxes[ix].push(item.clone());
            }
        }
    }

    // Processing, agent by agent in index order. Inboxes were fixed above,
    // so within-step mutations cannot leak between agents.
    let mut corrections_seen = 0u64;
    let mut corrections_rejected = 0u64;
    let mut conviction_seen = 0u64;
    let mut conviction_rejected = 0u64;
    let mut evidence_seen = 0u64;
    let mut evidence_rejected = 0u64;
    let mut shares: Vec<(usize, EvidenceItem)> = Vec::new();
    for (ix, inbox) in inboxes.into_iter().enumerate() {
        let agent = &mut agents[ix];
        agent.current_step = step;
        for item in inbox {
            if !agent.memory.insert(item.clone(), step) {
                continue; // already seen: deduplication damps echo loops
            }
            let filter_seed = seeds::derive(seed, &[seeds::tag("filter"), step, seeds::tag(&item.id)]);
            let item = agent.filter_item(item, filter_seed);
            let Some(root) = world.root_claim_of(&item.target) else {
                continue; // bears on nothing the world knows about
            };
            let root_id = root.id.clone();
            let mut accepted_in_lattice = false;
            if let Some(lattice) = agent.lattices.get(&root_id) {
                let Some(target_ix) = lattice.index_of(&item.target) else {
                    continue; // bears on a statement the agent never weighed
                };
                let conviction_target = matches!(
                    lattice.node(target_ix).anchor,
                    Some(AnchorKind::Belief | AnchorKind::PreTrusted)
                );
                let is_correction = item.veracity && truth_aligned(&item, world);
                if is_correction {
                    corrections_seen += 1;
                    if conviction_target {
                        conviction_seen += 1;
                    } else {
                        evidence_seen += 1;
                    }
                }
                let lattice = lattice.clone();
                let policy = agent.policy.clone();
                let mut archive = std::mem::take(&mut agent.archive);
                let outcome = revise(agent, &lattice, &item, &policy, world, &mut archive);
                agent.archive = archive;
                match outcome? {
                    RevisionOutcome::AcceptedRevision { lattice, labels, .. }
                    | RevisionOutcome::ArchivedSwap { lattice, labels } => {
                        if let Some(l) = labels.get(&item.id) {
                            accepted_in_lattice = l.verdict == Verdict::Accepted;
                        }
                        let root_label = labels[&root_id];
                        agent.lattices.insert(root_id.clone(), lattice);
                        agent.apply_verdict(&root_id, root_label);
                    }
                    RevisionOutcome::RejectedCorrection { .. } => {
                        if is_correction {
                            corrections_rejected += 1;
                            if conviction_target {
                                conviction_rejected += 1;
                            } else {
                                evidence_rejected += 1;
                            }
                        }
                    }
                }
            } else {
                let fb_seed = seeds::derive(seed, &[seeds::tag("form"), seeds::tag(&root_id)]);
                let (_, lattice) = agent.form_belief(root, world, params.budget, fb_seed)?;
                if lattice.index_of(&item.id).is_some() {
                    let labels = evaluate(&lattice, &agent.policy)?;
                    accepted_in_lattice = labels[&item.id].verdict == Verdict::Accepted;
                }
            }
            if accepted_in_lattice {
                shares.push((ix, item));
            }
        }
    }

    if params.rewire_rate > 0.0 {
        let rewire_seed = seeds::derive(seed, &[seeds::tag("rewire"), step]);
        rewire_homophily(network, agents, params.rewire_rate, rewire_seed)?;
    }

    let assignment = detect_tribes(agents, world, &params.cluster)?;
    for (ix, agent) in agents.iter_mut().enumerate() {
        agent.tribe_id = Some(assignment.by_agent[ix]);
    }
    let stats = polarization_stats(agents, &assignment, world);
    let stop_after: u64 = agents.iter().map(|a| a.events.stop_loss).sum();
    let deference_after: u64 = agents.iter().map(|a| a.events.deference).sum();
    let record = StepRecord {
        step,
        tribe_count: assignment.tribe_count(),
        within_agreement: stats.within_agreement,
        cross_agreement: stats.cross_agreement,
        polarization_index: stats.index,
        rejected_correction_rate: if corrections_seen == 0 {
            0.0
        } else {
            corrections_rejected as f64 / corrections_seen as f64
        },
        stop_loss_events: stop_after - stop_before,
        deference_events: deference_after - deference_before,
        corrections_seen,
        corrections_rejected,
        conviction_corrections_seen: conviction_seen,
        conviction_corrections_rejected: conviction_rejected,
        evidence_corrections_seen: evidence_seen,
        evidence_corrections_rejected: evidence_rejected,
    };
    Ok(StepOutcome { record, shares, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{AcceptanceLabel, Verdict};
    use crate::moral::{mac_to_emft, FramingVector, MacDomain, MacEmftMap, MacProfile};
    use crate::world::{Claim, EvidenceKind, Source, TruthMakerFact};

    fn two_claim_world() -> World {
        let mk = |id: &str| Claim {
            id: id.into(),
            text_tag: id.into(),
            domain: "d".into(),
            framing: FramingVector::zero(),
            violation: 0.0,
        };
        World {
            domains: vec!["d".into()],
            claims: vec![mk("c1"), mk("c2")],
            facts: vec![
                TruthMakerFact { claim_id: "c1".into(), truth_value: true, proxy_fidelity: 1.0 },
                TruthMakerFact { claim_id: "c2".into(), truth_value: false, proxy_fidelity: 1.0 },
            ],
            sources: vec![Source::new("s")],
            evidence: vec![],
        }
    }

    fn label(verdict: Verdict) -> AcceptanceLabel {
        let score = match verdict {
            Verdict::Accepted => 1.0,
            Verdict::Rejected => -1.0,
            Verdict::Undecided => 0.0,
        };
        AcceptanceLabel { verdict, score }
    }

    /// An agent whose moral layers are the pure `domain` profile.
    fn tribal_agent(id: &str, domain: MacDomain) -> Agent {
        let mut a = Agent::new(id);
        a.mac = MacProfile::pure(domain);
        a.emft = mac_to_emft(&a.mac, &MacEmftMap::default_map()).unwrap();
        a
    }

    // ---- network ----

    #[test]
    fn network_topologies_have_expected_shape() {
        let complete = Network::complete(5);
        assert_eq!(complete.edge_count(), 10);
        assert!(complete.has_edge(0, 4) && complete.has_edge(4, 0));

        let ring = Network::ring(6, 1).unwrap();
        assert_eq!(ring.edge_count(), 6);
        assert!(ring.has_edge(0, 1) && ring.has_edge(0, 5) && !ring.has_edge(0, 3));
        assert_eq!(ring.neighbors(0), vec![(1, 1.0), (5, 1.0)]);

        assert_eq!(Network::random(8, 0.0, 1).unwrap().edge_count(), 0);
        assert_eq!(Network::random(8, 1.0, 1).unwrap().edge_count(), 28);
        // Seeded: same seed, same graph.
        assert_eq!(Network::random(8, 0.4, 7).unwrap(), Network::random(8, 0.4, 7).unwrap());
    }

    #[test]
    fn network_rejects_bad_edges() {
        let mut net = Network::empty(3);
        assert!(net.add_edge(0, 0, 1.0).is_err());
        assert!(net.add_edge(0, 7, 1.0).is_err());
        assert!(net.add_edge(0, 1, 0.0).is_err());
        assert!(net.add_edge(0, 1, 1.5).is_err());
        assert!(net.add_edge(0, 1, 0.8).is_ok());
        assert_eq!(net.weight(1, 0), Some(0.8));
    }

    // ---- tribes & polarization ----

    #[test]
    fn two_moral_cohorts_form_two_tribes() {
        let world = two_claim_world();
        let mut agents: Vec<Agent> = Vec::new();
        for i in 0..4 {
            let mut a = tribal_agent(&format!("kin{i}"), MacDomain::Kin);
            a.apply_verdict("c1", label(Verdict::Accepted));
            agents.push(a);
        }
        for i in 0..4 {
            let mut a = tribal_agent(&format!("prop{i}"), MacDomain::Property);
            a.apply_verdict("c1", label(Verdict::Rejected));
            agents.push(a);
        }
        let assignment = detect_tribes(&agents, &world, &ClusterParams::default()).unwrap();
        assert_eq!(assignment.tribe_count(), 2);
        assert_eq!(assignment.tribes[0], vec![0, 1, 2, 3]);
        assert_eq!(assignment.tribes[1], vec![4, 5, 6, 7]);
    }

    #[test]
    fn identical_population_is_one_tribe_with_zero_polarization() {
        let world = two_claim_world();
        let agents: Vec<Agent> = (0..5).map(|i| tribal_agent(&format!("a{i}"), MacDomain::Kin)).collect();
        let assignment = detect_tribes(&agents, &world, &ClusterParams::default()).unwrap();
        assert_eq!(assignment.tribe_count(), 1);
        let stats = polarization_stats(&agents, &assignment, &world);
        assert_eq!(stats.index, 0.0);
        assert_eq!(stats.within_agreement, 1.0);
        assert_eq!(stats.cross_agreement, 1.0);
    }

    #[test]
    fn mutually_distant_agents_are_singletons() {
        let world = two_claim_world();
        let domains = [MacDomain::Kin, MacDomain::Property, MacDomain::Pathogen, MacDomain::Deference];
        let agents: Vec<Agent> =
            domains.iter().enumerate().map(|(i, &d)| tribal_agent(&format!("a{i}"), d)).collect();
        let assignment = detect_tribes(&agents, &world, &ClusterParams::default()).unwrap();
        assert_eq!(assignment.tribe_count(), 4);
        assert!(assignment.tribes.iter().all(|t| t.len() == 1));
    }

    #[test]
    fn perfectly_opposed_tribes_score_full_polarization() {
        let world = two_claim_world();
        let mut agents = Vec::new();
        for i in 0..3 {
            let mut a = tribal_agent(&format!("kin{i}"), MacDomain::Kin);
            a.apply_verdict("c1", label(Verdict::Accepted));
            a.apply_verdict("c2", label(Verdict::Accepted));
            agents.push(a);
        }
        for i in 0..3 {
            let mut a = tribal_agent(&format!("prop{i}"), MacDomain::Property);
            a.apply_verdict("c1", label(Verdict::Rejected));
            a.apply_verdict("c2", label(Verdict::Rejected));
            agents.push(a);
        }
        let assignment = detect_tribes(&agents, &world, &ClusterParams::default()).unwrap();
        assert_eq!(assignment.tribe_count(), 2);
        let stats = polarization_stats(&agents, &assignment, &world);
        assert_eq!(stats.within_agreement, 1.0);
        assert_eq!(stats.cross_agreement, 0.0);
        assert_eq!(stats.index, 1.0);
    }

    #[test]
    fn detection_matches_brute_force_components_on_small_populations() {
        // Independent oracle: the finest partition in which every pair
        // closer than τ shares a block, found by enumerating all set
        // partitions.
        let world = two_claim_world();
        let domains = [MacDomain::Kin, MacDomain::Property, MacDomain::Group, MacDomain::Pathogen];
        let mut rng = crate::seeds::rng(11, &[2]);
        for trial in 0..25 {
            let n = rng.gen_range(2..6);
            let mut agents = Vec::new();
            for i in 0..n {
                let d = domains[rng.gen_range(0..domains.len())];
                let mut a = tribal_agent(&format!("t{trial}_{i}"), d);
                if rng.gen::<bool>() {
                    a.apply_verdict("c1", label(Verdict::Accepted));
                }
                agents.push(a);
            }
            let params = ClusterParams::default();
            let got = detect_tribes(&agents, &world, &params).unwrap();

            // Recompute the distance matrix independently of detect_tribes'
            // adjacency, then enumerate partitions.
            let weights = LayerWeights::default();
            let mut d = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let p = profile_distance(&agents[i].profiles(), &agents[j].profiles(), &weights)
                            .unwrap();
                        let l = label_disagreement(&agents[i], &agents[j], &world);
                        d[i][j] = params.lambda * p + (1.0 - params.lambda) * l;
                    }
                }
            }
            let valid = |partition: &Vec<usize>| -> bool {
                for i in 0..n {
                    for j in (i + 1)..n {
                        if d[i][j] < params.tau && partition[i] != partition[j] {
                            return false;
                        }
                    }
                }
                true
            };
            // Enumerate all partitions as restricted growth strings.
            let mut best: Option<Vec<usize>> = None;
            let mut best_blocks = 0;
            let mut stack: Vec<(Vec<usize>, usize)> = vec![(vec![0], 1)];
            while let Some((prefix, blocks)) = stack.pop() {
                if prefix.len() == n {
                    if valid(&prefix) && blocks > best_blocks {
                        best_blocks = blocks;
                        best = Some(prefix);
                    }
                    continue;
                }
                for b in 0..=blocks {
                    let mut next = prefix.clone();
                    next.push(b);
                    stack.push((next, blocks.max(b + 1)));
                }
            }
            let oracle = best.unwrap();
            // Same blocks ⇔ same co-membership relation.
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(
                        got.by_agent[i] == got.by_agent[j],
                        oracle[i] == oracle[j],
                        "trial {trial}: agents {i},{j} disagree with oracle"
                    );
                }
            }
        }
    }

    #[test]
    fn fitness_weighs_accuracy_against_cohesion() {
        let world = two_claim_world();
        let mut a = tribal_agent("a", MacDomain::Kin);
        a.apply_verdict("c1", label(Verdict::Accepted)); // true claim
        a.apply_verdict("c2", label(Verdict::Accepted)); // false claim
        let mut b = tribal_agent("b", MacDomain::Kin);
        b.apply_verdict("c1", label(Verdict::Accepted));
        b.apply_verdict("c2", label(Verdict::Rejected));
        let agents = vec![a, b];

        // Accuracy only: a's accepted set is half right, b's fully right;
        // pooled over members: 3 accepted, 2 true.
        let acc = tribe_fitness(&[0, 1], &agents, &world, 1.0).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
        // Cohesion only: the pair agrees on c1, disagrees on c2.
        let coh = tribe_fitness(&[0, 1], &agents, &world, 0.0).unwrap();
        assert!((coh - 0.5).abs() < 1e-12);
        // Singleton cohesion is 1; no accepted claims means zero accuracy.
        let lone = tribal_agent("c", MacDomain::Kin);
        let agents = vec![lone];
        assert_eq!(tribe_fitness(&[0], &agents, &world, 0.0).unwrap(), 1.0);
        assert_eq!(tribe_fitness(&[0], &agents, &world, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn perceived_consensus_blends_bubble_and_population() {
        let mut agents: Vec<Agent> = (0..5).map(|i| tribal_agent(&format!("a{i}"), MacDomain::Kin)).collect();
        // Agent 0 and its sole neighbor agree; the wider population does not.
        agents[0].apply_verdict("c1", label(Verdict::Accepted));
        agents[1].apply_verdict("c1", label(Verdict::Accepted));
        for a in agents.iter_mut().skip(2) {
            a.apply_verdict("c1", label(Verdict::Rejected));
        }
        let mut net = Network::empty(5);
        net.add_edge(0, 1, 1.0).unwrap();

        // Unbiased: true share among the other four is 1/4.
        assert!((perceived_consensus(&agents, &net, 0, "c1").unwrap() - 0.25).abs() < 1e-12);
        // Fully biased: the bubble is unanimous.
        agents[0].biases.false_consensus = 1.0;
        assert_eq!(perceived_consensus(&agents, &net, 0, "c1").unwrap(), 1.0);
        // Half bias: midpoint.
        agents[0].biases.false_consensus = 0.5;
        assert!((perceived_consensus(&agents, &net, 0, "c1").unwrap() - 0.625).abs() < 1e-12);
        // Isolated agent: neighborhood fraction defaults to 1.
        agents[2].biases.false_consensus = 1.0;
        assert_eq!(perceived_consensus(&agents, &net, 2, "c1").unwrap(), 1.0);
    }

    // ---- rewiring ----

    #[test]
    fn rewiring_preserves_edge_count_and_reduces_total_distance() {
        let mut agents = Vec::new();
        for i in 0..3 {
            agents.push(tribal_agent(&format!("kin{i}"), MacDomain::Kin));
        }
        for i in 0..3 {
            agents.push(tribal_agent(&format!("prop{i}"), MacDomain::Property));
        }
        let weights = LayerWeights::default();
        let total_distance = |net: &Network| -> f64 {
            net.edges()
                .map(|((i, j), _)| {
                    profile_distance(&agents[i].profiles(), &agents[j].profiles(), &weights).unwrap()
                })
                .sum()
        };
        let mut net = Network::ring(6, 1).unwrap();
        let mut moved_any = 0;
        let mut last = total_distance(&net);
        for pass in 0..40 {
            moved_any += rewire_homophily(&mut net, &agents, 1.0, pass).unwrap();
            assert_eq!(net.edge_count(), 6, "edge count must be conserved");
            let now = total_distance(&net);
            assert!(now <= last + 1e-12, "total edge distance must not increase");
            last = now;
        }
        assert!(moved_any > 0, "expected at least one rewire across 40 passes");
    }

    #[test]
    fn zero_rate_never_rewires() {
        let agents: Vec<Agent> = (0..4).map(|i| tribal_agent(&format!("a{i}"), MacDomain::Kin)).collect();
        let mut net = Network::complete(4);
        let before = net.clone();
        assert_eq!(rewire_homophily(&mut net, &agents, 0.0, 3).unwrap(), 0);
        assert_eq!(net, before);
    }

    // ---- propagation ----

    /// A world whose single honest institutional source every agent accepts.
    fn stream_world() -> World {
        let mut world = two_claim_world();
        world.sources = vec![Source {
            competence: [("d".to_string(), 0.9)].into(),
            ..Source::new("inst")
        }];
        // Full framing so delivery probability is 1 for every profile.
        for c in &mut world.claims {
            c.framing = FramingVector([1.0; 7]);
        }
        world
    }

    fn stream_item(
        id: &str,
        target: &str,
        polarity: Polarity,
        strength: f64,
        veracity: bool,
    ) -> EvidenceItem {
        EvidenceItem {
            id: id.into(),
            author: "inst".into(),
            target: target.into(),
            polarity,
            strength,
            vividness: 0.5,
            recency: 0,
            framing: FramingVector([1.0; 7]),
            veracity,
            kind: EvidenceKind::Testimony,
            coercive: false,
            reactance_mark: false,
        }
    }

    fn trusting_agent(id: &str) -> Agent {
        let mut a = Agent::new(id);
        a.competence.insert("d".into(), 0.9);
        a.accepted_authorities.insert("inst".into());
        a.virtues.attentiveness = 1.0;
        a
    }

    #[test]
    fn identical_agents_stay_bit_identical_under_propagation() {
        let world = stream_world();
        let mut agents: Vec<Agent> = (0..5).map(|i| trusting_agent(&format!("a{i}"))).collect();
        let mut network = Network::complete(5);
        let params = PropagationParams::default();
        let chunk = vec![
            stream_item("stream_00000", "c1", Polarity::Supports, 0.8, true),
            stream_item("stream_00001", "c1", Polarity::Supports, 0.7, true),
        ];
        let out1 = propagate(&world, &mut agents, &mut network, &chunk, &[], &params, 0, 42).unwrap();
        let out2 =
            propagate(&world, &mut agents, &mut network, &[], &out1.shares, &params, 1, 42).unwrap();
        // Common random numbers: identical agents, identical trajectories.
        for a in &agents[1..] {
            assert_eq!(a.labels, agents[0].labels);
            assert_eq!(a.beliefs, agents[0].beliefs);
        }
        // Authority-backed support accepted the claim everywhere.
        assert_eq!(agents[0].own_label("c1"), Verdict::Accepted);
        assert_eq!(out2.record.tribe_count, 1);
        assert_eq!(out2.record.polarization_index, 0.0);
    }

    #[test]
    fn propagation_is_deterministic_across_runs() {
        let world = stream_world();
        let chunk = vec![
            stream_item("stream_00000", "c1", Polarity::Supports, 0.8, true),
            stream_item("stream_00001", "c2", Polarity::Attacks, 0.6, true),
        ];
        let run = || {
            let mut agents: Vec<Agent> = (0..4).map(|i| trusting_agent(&format!("a{i}"))).collect();
            let mut network = Network::ring(4, 1).unwrap();
            let params = PropagationParams::default();
            let mut shares = Vec::new();
            let mut records = Vec::new();
            for step in 0..3 {
                let chunk = if step == 0 { chunk.clone() } else { Vec::new() };
                let out = propagate(&world, &mut agents, &mut network, &chunk, &shares, &params, step, 7)
                    .unwrap();
                shares = out.shares;
                records.push(out.record);
            }
            (agents, records)
        };
        let (agents_a, records_a) = run();
        let (agents_b, records_b) = run();
        assert_eq!(agents_a, agents_b);
        assert_eq!(records_a, records_b);
    }

    #[test]
    fn accepted_items_are_shared_onward_and_deduplicated() {
        let world = stream_world();
        let mut agents: Vec<Agent> = (0..2).map(|i| trusting_agent(&format!("a{i}"))).collect();
        let mut network = Network::complete(2);
        let params = PropagationParams::default();
        let chunk = vec![stream_item("stream_00000", "c1", Polarity::Supports, 0.8, true)];
        let out1 = propagate(&world, &mut agents, &mut network, &chunk, &[], &params, 0, 5).unwrap();
        // Both accepted it, both share it.
        assert_eq!(out1.shares.len(), 2);
        // Next step the share bounces back but memory deduplication keeps
        // agents from reprocessing (and re-sharing) it.
        let out2 = propagate(&world, &mut agents, &mut network, &[], &out1.shares, &params, 1, 5).unwrap();
        assert!(out2.shares.is_empty());
    }

    #[test]
    fn rejected_true_corrections_are_counted() {
        let world = stream_world();
        // A dogmatist who already believes the false claim c2 outright: the
        // belief anchor makes any flip cost 100 > stickiness 3.
        let mut agents = vec![trusting_agent("dogma")];
        agents[0].beliefs.insert("c2".into());
        let mut network = Network::empty(1);
        let params = PropagationParams::default();
        // Seed the lattice for c2 (short-circuits to a believed root).
        let seed_chunk = vec![stream_item("stream_00000", "c2", Polarity::Supports, 0.3, false)];
        let out1 =
            propagate(&world, &mut agents, &mut network, &seed_chunk, &[], &params, 0, 9).unwrap();
        assert_eq!(out1.record.corrections_seen, 0);
        // A veracious attack on the false claim is a truth-aligned
        // correction; the belief anchor rejects it.
        let correction = vec![stream_item("stream_00001", "c2", Polarity::Attacks, 0.9, true)];
        let out2 =
            propagate(&world, &mut agents, &mut network, &correction, &[], &params, 1, 9).unwrap();
        assert_eq!(out2.record.corrections_seen, 1);
        assert_eq!(out2.record.corrections_rejected, 1);
        assert_eq!(out2.record.rejected_correction_rate, 1.0);
        // The target was the believed claim itself: a conviction correction.
        assert_eq!(out2.record.conviction_corrections_seen, 1);
        assert_eq!(out2.record.conviction_corrections_rejected, 1);
        assert_eq!(out2.record.evidence_corrections_seen, 0);
        assert_eq!(agents[0].own_label("c2"), Verdict::Accepted);
    }

    #[test]
    fn csv_has_exactly_eight_columns_per_row() {
        let world = stream_world();
        let mut agents = vec![trusting_agent("a")];
        let mut network = Network::empty(1);
        let params = PropagationParams::default();
        let chunk = vec![stream_item("stream_00000", "c1", Polarity::Supports, 0.8, true)];
        let out = propagate(&world, &mut agents, &mut network, &chunk, &[], &params, 0, 1).unwrap();
        let mut history = SimHistory::default();
        history.push(out.record);
        let csv = history.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], SimHistory::CSV_HEADER);
        assert_eq!(lines[0].split(',').count(), 8);
        assert_eq!(lines[1].split(',').count(), 8);
        assert!(lines[1].starts_with("0,1,"));
    }
}
