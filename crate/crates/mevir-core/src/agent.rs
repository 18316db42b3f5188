//! Agents: virtue and bias dials over the trust machinery.
//!
//! An [`Agent`] owns a moral profile (domain + foundation weights), a
//! [`VirtueProfile`], a [`BiasConfig`] in which every dial at 0 is the
//! unbiased identity, a [`TrustPolicy`], anchor sets (beliefs, pre-trusted
//! statements, accepted authorities), a bounded evidence [`Memory`], and a
//! lattice per claim it has evaluated.
//!
//! [`Agent::form_belief`] orchestrates one evaluation: intuitive alarm
//! (optionally cut by the stop-loss intervention), path choice between
//! direct elaboration and deference, authority selection under corrupting
//! biases, bias-weighted evidence sampling with reactance filtering, and
//! gradual evaluation of the resulting lattice. Accepted claims enter the
//! belief store, where the revision cost model makes them sticky.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{
    elaborate, evaluate, AcceptanceLabel, AgentContext, AnchorKind, EvaluationBudget,
    LatticeArchive, TrustLattice, TrustPolicy, Verdict, authority_info_for,
};
use crate::moral::{moral_alarm, AgentProfiles, EmftProfile, MacProfile};
use crate::world::{pick_weighted, Claim, EvidenceItem, Polarity, Source, StatementId, World};
use crate::{seeds, Error, Result};

/// Default capacity of the evidence memory buffer.
pub const DEFAULT_MEMORY_CAPACITY: usize = 64;

/// Epistemic character traits, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VirtueProfile {
    /// Willingness to discount one's own competence; raises the bar for
    /// going direct.
    pub humility: f64,
    /// Willingness to hold unpopular labels (profile/distance layer only).
    pub courage: f64,
    /// Receptivity to revision (profile/distance layer only).
    pub openness: f64,
    /// Scales how much of the evidence pool is actually examined.
    pub attentiveness: f64,
    /// Staying power on long evaluations (profile/distance layer only).
    pub perseverance: f64,
}

impl Default for VirtueProfile {
    fn default() -> Self {
        VirtueProfile { humility: 0.5, courage: 0.5, openness: 0.5, attentiveness: 0.5, perseverance: 0.5 }
    }
}

/// Bias dials, each in [0, 1]; 0 is the unbiased identity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasConfig {
    /// Inflates perceived own competence toward 1.
    pub overconfidence: f64,
    /// Preference for authorities that agree with one's prior.
    pub confirmation: f64,
    /// Preference for vivid, recent evidence when sampling.
    pub availability: f64,
    /// Extra weight on the first-presented item (up to ×10).
    pub anchoring: f64,
    /// Preference for widely followed authorities.
    pub bandwagon: f64,
    /// Probability of explaining acts asymmetrically by group.
    pub attribution_asymmetry: f64,
    /// Probability of inverting coercive messages from non-authorities.
    pub reactance: f64,
    /// Preference for prestigious authorities regardless of domain.
    pub halo: f64,
    /// Overweights one's neighborhood when estimating consensus.
    pub false_consensus: f64,
}

impl BiasConfig {
    /// Range-check all dials.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("overconfidence", self.overconfidence),
            ("confirmation", self.confirmation),
            ("availability", self.availability),
            ("anchoring", self.anchoring),
            ("bandwagon", self.bandwagon),
            ("attribution_asymmetry", self.attribution_asymmetry),
            ("reactance", self.reactance),
            ("halo", self.halo),
            ("false_consensus", self.false_consensus),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::Config(format!("bias {name} out of [0,1]: {v}")));
            }
        }
        Ok(())
    }
}

impl VirtueProfile {
    /// Range-check all traits.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("humility", self.humility),
            ("courage", self.courage),
            ("openness", self.openness),
            ("attentiveness", self.attentiveness),
            ("perseverance", self.perseverance),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::Config(format!("virtue {name} out of [0,1]: {v}")));
            }
        }
        Ok(())
    }
}

/// Corrective interventions an agent can run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Interventions {
    /// Suppress intuition when alarm crosses the agent's alarm threshold.
    pub stop_loss: bool,
    /// Provisionally consult the strongest rival-tribe authority.
    pub adversarial_deference: bool,
}

/// Counters for intervention activity, read by the simulation metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentEvents {
    pub stop_loss: u64,
    pub deference: u64,
}

/// Bounded evidence buffer ordered by receipt; eviction drops the oldest,
/// least vivid entry first, so recent and vivid items survive.
#[derive(Debug, Clone, PartialEq)]
pub struct Memory {
    capacity: usize,
    entries: Vec<MemoryEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub item: EvidenceItem,
    pub received_at: u64,
}

impl Default for Memory {
    fn default() -> Self {
        Memory::new(DEFAULT_MEMORY_CAPACITY)
    }
}

impl Memory {
    pub fn new(capacity: usize) -> Memory {
        Memory { capacity: capacity.max(1), entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|e| e.item.id == id)
    }

    /// Store an item; returns false on duplicate id. Evicts the entry with
    /// the lowest (received_at, vividness, id) key when over capacity.
    pub fn insert(&mut self, item: EvidenceItem, step: u64) -> bool {
        if self.contains(&item.id) {
            return false;
        }
        self.entries.push(MemoryEntry { item, received_at: step });
        if self.entries.len() > self.capacity {
            let evict = self
                .entries
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (a.received_at, a.item.vividness.to_bits(), &a.item.id)
                        .cmp(&(b.received_at, b.item.vividness.to_bits(), &b.item.id))
                })
                .map(|(i, _)| i)
                .unwrap();
            self.entries.remove(evict);
        }
        true
    }

    /// Remembered items bearing on `stmt`, with recency aged to `now`.
    pub fn targeting(&self, stmt: &str, now: u64) -> Vec<EvidenceItem> {
        self.entries
            .iter()
            .filter(|e| e.item.target == stmt)
            .map(|e| {
                let mut item = e.item.clone();
                item.recency = item.recency + now.saturating_sub(e.received_at);
                item
            })
            .collect()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }
}

/// Direct evaluation vs deference to an authority.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathChoice {
    Direct,
    Defer,
}

/// Valence of an observed act.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActValence {
    Positive,
    Negative,
}

/// Causal story assigned to an observed act.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribution {
    Situational,
    Dispositional,
}

/// One simulated agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: String,
    /// Group membership for in/out-group treatment; usually the cohort name.
    pub group_tag: String,
    pub mac: MacProfile,
    pub emft: EmftProfile,
    pub virtues: VirtueProfile,
    pub biases: BiasConfig,
    pub policy: TrustPolicy,
    /// Statements accepted unconditionally; flipping one costs the belief
    /// flip constant during revision.
    pub beliefs: BTreeSet<StatementId>,
    /// Axiomatic statements; revision can never demote them.
    pub pre_trusted: BTreeSet<StatementId>,
    /// Sources whose statements anchor as authority testimony.
    pub accepted_authorities: BTreeSet<String>,
    /// Rival-tribe sources available to the adversarial-deference
    /// intervention (filled by the population builder).
    pub rival_authorities: BTreeSet<String>,
    /// Own per-domain competence in [0, 1].
    pub competence: BTreeMap<String, f64>,
    pub memory: Memory,
    pub archive: LatticeArchive,
    /// Maximum revision cost the agent absorbs without rejecting.
    pub stickiness_threshold: u64,
    pub interventions: Interventions,
    /// Tribe assignment from the most recent detection pass.
    pub tribe_id: Option<usize>,
    /// Bar for going direct before humility adjustment.
    pub competence_threshold: f64,
    /// Alarm level at which the stop-loss intervention cuts intuition.
    pub alarm_threshold: f64,
    /// Evidence sampled per lattice node before attentiveness scaling.
    pub branching: usize,
    /// Simulation clock, drives memory recency aging.
    pub current_step: u64,
    pub events: AgentEvents,
    /// Current lattice per evaluated claim.
    pub lattices: BTreeMap<StatementId, TrustLattice>,
    /// Current root label per evaluated claim.
    pub labels: BTreeMap<StatementId, AcceptanceLabel>,
}

impl Agent {
    /// An agent with neutral defaults: uniform profiles, mid virtues,
    /// unbiased dials, default policy.
    pub fn new(id: impl Into<String>) -> Agent {
        Agent {
            id: id.into(),
            group_tag: String::new(),
            mac: MacProfile::uniform(),
            emft: EmftProfile::uniform(),
            virtues: VirtueProfile::default(),
            biases: BiasConfig::default(),
            policy: TrustPolicy::default(),
            beliefs: BTreeSet::new(),
            pre_trusted: BTreeSet::new(),
            accepted_authorities: BTreeSet::new(),
            rival_authorities: BTreeSet::new(),
            competence: BTreeMap::new(),
            memory: Memory::default(),
            archive: LatticeArchive::default(),
            stickiness_threshold: 3,
            interventions: Interventions::default(),
            tribe_id: None,
            competence_threshold: 0.5,
            alarm_threshold: 0.7,
            branching: 4,
            current_step: 0,
            events: AgentEvents::default(),
            lattices: BTreeMap::new(),
            labels: BTreeMap::new(),
        }
    }

    /// The dial vector compared by the conduct layer of profile distance.
    pub fn conduct_vector(&self) -> Vec<f64> {
        vec![
            self.virtues.humility,
            self.virtues.courage,
            self.virtues.openness,
            self.virtues.attentiveness,
            self.virtues.perseverance,
            self.biases.overconfidence,
            self.biases.confirmation,
            self.biases.availability,
            self.biases.anchoring,
            self.biases.bandwagon,
            self.biases.attribution_asymmetry,
            self.biases.reactance,
            self.biases.halo,
            self.biases.false_consensus,
        ]
    }

    /// The three layers compared by profile distance.
    pub fn profiles(&self) -> AgentProfiles {
        AgentProfiles { mac: self.mac, emft: self.emft, conduct: self.conduct_vector() }
    }

    /// Decide between direct evaluation and deference for a claim's domain.
    ///
    /// Perceived competence inflates with overconfidence
    /// (`actual + overconfidence·(1 − actual)`); the bar rises with humility
    /// (`threshold·(1 + humility)/2 + 0.25·humility`). Direct when perceived
    /// clears the adjusted bar. Errors on a domain the world never declared.
    pub fn choose_path(&self, claim: &Claim, world: &World) -> Result<PathChoice> {
        if !world.domains.iter().any(|d| *d == claim.domain) {
            return Err(Error::UnknownId { kind: "domain", id: claim.domain.clone() });
        }
        let actual = self.competence.get(&claim.domain).copied().unwrap_or(0.0);
        let perceived = actual + self.biases.overconfidence * (1.0 - actual);
        let bar = self.competence_threshold * (1.0 + self.virtues.humility) / 2.0
            + 0.25 * self.virtues.humility;
        Ok(if perceived >= bar { PathChoice::Direct } else { PathChoice::Defer })
    }

    /// Stance of a source toward a claim, from its authored evidence:
    /// the sign of the strength-weighted polarity sum.
    fn stance(source: &Source, claim: &Claim, world: &World) -> Option<Polarity> {
        let mut sum = 0.0;
        for e in world.evidence_targeting(&claim.id) {
            if e.author == source.id {
                match e.polarity {
                    Polarity::Supports => sum += e.strength,
                    Polarity::Attacks => sum -= e.strength,
                }
            }
        }
        if sum > 1e-12 {
            Some(Polarity::Supports)
        } else if sum < -1e-12 {
            Some(Polarity::Attacks)
        } else {
            None
        }
    }

    /// The agent's prior verdict on a claim: its current label, or accepted
    /// when the claim is already believed.
    fn prior(&self, claim: &Claim) -> Verdict {
        if let Some(label) = self.labels.get(&claim.id) {
            return label.verdict;
        }
        if self.beliefs.contains(&claim.id) || self.pre_trusted.contains(&claim.id) {
            return Verdict::Accepted;
        }
        Verdict::Undecided
    }

    /// Pick one authority from `candidates` for a claim.
    ///
    /// Each source scores `(1 − β)·competence + β·mix`, where β is the
    /// strongest active corrupting bias and `mix` blends the active biases'
    /// targets: confirmation rewards agreement with the agent's prior, halo
    /// rewards prestige, bandwagon rewards normalized follower counts.
    /// Hypocrites score 0 outright; out-group sources score 0 under the
    /// rejection policy unless listed in `bypass`. Ties break to the lowest
    /// source id. Errors on an empty candidate set.
    pub fn select_authority<'a>(
        &self,
        candidates: &[&'a Source],
        claim: &Claim,
        world: &World,
        bypass: &BTreeSet<String>,
    ) -> Result<&'a Source> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates("select_authority"));
        }
        let conf = self.biases.confirmation;
        let halo = self.biases.halo;
        let band = self.biases.bandwagon;
        let beta = conf.max(halo).max(band);
        let max_followers = candidates.iter().map(|s| s.follower_count).max().unwrap_or(0);
        let prior = self.prior(claim);
        let score = |s: &Source| -> f64 {
            if s.hypocrisy_flag {
                return 0.0;
            }
            let out_group = !s.group_tag.is_empty() && s.group_tag != self.group_tag;
            if self.policy.out_group_rejection && out_group && !bypass.contains(&s.id) {
                return 0.0;
            }
            let base = s.competence_in(&claim.domain);
            let mix_den = conf + halo + band;
            let mix = if mix_den > 0.0 {
                let agreement = match (prior, Self::stance(s, claim, world)) {
                    (Verdict::Accepted, Some(Polarity::Supports))
                    | (Verdict::Rejected, Some(Polarity::Attacks)) => 1.0,
                    (Verdict::Accepted, Some(Polarity::Attacks))
                    | (Verdict::Rejected, Some(Polarity::Supports)) => 0.0,
                    _ => 0.5,
                };
                let followers = if max_followers == 0 {
                    0.0
                } else {
                    s.follower_count as f64 / max_followers as f64
                };
                (conf * agreement + halo * s.prestige + band * followers) / mix_den
            } else {
                0.0
            };
            (1.0 - beta) * base + beta * mix
        };
        let mut sorted: Vec<&&Source> = candidates.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let mut best = sorted[0];
        let mut best_score = score(best);
        for s in &sorted[1..] {
            let sc = score(s);
            if sc > best_score {
                best = s;
                best_score = sc;
            }
        }
        Ok(*best)
    }

    /// Bias-weighted selection of up to `k` items without replacement.
    ///
    /// Attentiveness scales the draw count to
    /// `ceil(k·(0.25 + 0.75·attentiveness))`. With availability α, item
    /// weight is `(1 − α) + α·vividness·recency_decay` (decay `1/(1+age)`),
    /// so α = 0 samples uniformly and α = 1 proportionally to vivid recency.
    /// Anchoring multiplies the first-presented item's weight by
    /// `1 + 9·anchoring`. Deterministic for a fixed seed.
    pub fn sample_evidence(&self, available: &[EvidenceItem], k: usize, seed: u64) -> Vec<EvidenceItem> {
        if available.is_empty() || k == 0 {
            return Vec::new();
        }
        let k_eff = ((k as f64) * (0.25 + 0.75 * self.virtues.attentiveness)).ceil() as usize;
        let k_eff = k_eff.clamp(1, available.len());
        let alpha = self.biases.availability;
        let mut weights: Vec<f64> = available
            .iter()
            .map(|e| {
                let decay = 1.0 / (1.0 + e.recency as f64);
                (1.0 - alpha) + alpha * e.vividness * decay
            })
            .collect();
        weights[0] *= 1.0 + 9.0 * self.biases.anchoring;
        let mut rng = seeds::rng(seed, &[seeds::tag("sample")]);
        let mut remaining: Vec<usize> = (0..available.len()).collect();
        let mut picked = Vec::with_capacity(k_eff);
        while picked.len() < k_eff && !remaining.is_empty() {
            let live: Vec<f64> = remaining.iter().map(|&i| weights[i]).collect();
            let at = match pick_weighted(&mut rng, &live) {
                Some(at) => at,
                // All weights vanished: fall back to presentation order.
                None => 0,
            };
            let ix = remaining.remove(at);
            picked.push(available[ix].clone());
        }
        picked
    }

    /// Defiance filter for coercive messages: when the item is coercive, its
    /// author is not an accepted authority, and a seeded draw lands under
    /// the reactance dial, the item's polarity inverts and it is marked.
    pub fn reactance_filter(&self, mut item: EvidenceItem, coercive: bool, seed: u64) -> EvidenceItem {
        if !coercive || self.accepted_authorities.contains(&item.author) {
            return item;
        }
        let mut rng = seeds::rng(seed, &[seeds::tag("reactance")]);
        if rng.gen::<f64>() < self.biases.reactance {
            item.polarity = item.polarity.inverted();
            item.reactance_mark = true;
        }
        item
    }

    /// Explain an observed act. With probability equal to the asymmetry
    /// dial, explanations split by group: negative in-group acts (and
    /// positive out-group acts) are circumstances, negative out-group acts
    /// (and positive in-group acts) are character. The unbiased baseline
    /// explains everything situationally.
    pub fn attribute_behavior(
        &self,
        actor_group: &str,
        valence: ActValence,
        seed: u64,
    ) -> Attribution {
        let mut rng = seeds::rng(seed, &[seeds::tag("attribution")]);
        if rng.gen::<f64>() < self.biases.attribution_asymmetry {
            let in_group = actor_group == self.group_tag;
            match (valence, in_group) {
                (ActValence::Negative, true) | (ActValence::Positive, false) => Attribution::Situational,
                (ActValence::Negative, false) | (ActValence::Positive, true) => Attribution::Dispositional,
            }
        } else {
            Attribution::Situational
        }
    }

    /// Stop-loss pass over an intuition weight: when the intervention is on
    /// and alarm reaches the agent's alarm threshold, the intuition is cut
    /// to zero and the event logged; otherwise the weight passes through.
    pub fn moral_stop_loss(&mut self, intuition_weight: f64, alarm: f64) -> f64 {
        if self.interventions.stop_loss && alarm >= self.alarm_threshold {
            self.events.stop_loss += 1;
            0.0
        } else {
            intuition_weight
        }
    }

    /// Adversarial-deference pass over a consulted-source set: when the
    /// intervention is on, rivals exist, and none is already consulted, the
    /// highest-competence rival (ties to lowest id) is added and the event
    /// logged. Returns the added source id, if any.
    pub fn adversarial_deference(
        &mut self,
        rival_sources: &[&Source],
        consulted: &BTreeSet<String>,
        domain: &str,
    ) -> Option<String> {
        if !self.interventions.adversarial_deference || rival_sources.is_empty() {
            return None;
        }
        if rival_sources.iter().any(|s| consulted.contains(&s.id)) {
            return None;
        }
        let mut best: Option<&&Source> = None;
        for s in rival_sources {
            let better = match best {
                None => true,
                Some(b) => {
                    let (sc, bc) = (s.competence_in(domain), b.competence_in(domain));
                    sc > bc || (sc == bc && s.id < b.id)
                }
            };
            if better {
                best = Some(s);
            }
        }
        let chosen = best.unwrap().id.clone();
        self.events.deference += 1;
        Some(chosen)
    }

    /// Evaluate one claim end to end; returns the root label and lattice,
    /// both also recorded on the agent.
    ///
    /// Order of operations: anchor short-circuit (believed or pre-trusted
    /// claims yield a single-node lattice), intuitive alarm with stop-loss,
    /// path choice, then either direct elaboration or deference — authority
    /// selection over the agent's accepted sources (all sources when none
    /// are accepted), with adversarial deference able to attach one
    /// bypassing rival's testimony alongside. High surviving alarm adds a
    /// belief-anchored intuition node attacking the root with weight equal
    /// to the alarm. Accepted roots enter the belief store; rejected ones
    /// leave it.
    pub fn form_belief(
        &mut self,
        claim: &Claim,
        world: &World,
        budget: EvaluationBudget,
        seed: u64,
    ) -> Result<(AcceptanceLabel, TrustLattice)> {
        // Anchor short-circuit: already settled statements need no lattice.
        if self.pre_trusted.contains(&claim.id) || self.beliefs.contains(&claim.id) {
            let anchor = if self.pre_trusted.contains(&claim.id) {
                AnchorKind::PreTrusted
            } else {
                AnchorKind::Belief
            };
            let mut lattice = TrustLattice::new(claim.id.clone(), 1.0);
            lattice.set_anchor(lattice.root(), Some(anchor));
            return self.record(claim, lattice);
        }

        let alarm = moral_alarm(&claim.framing, &self.emft, claim.violation)?;
        let intuition_weight = self.moral_stop_loss(alarm, alarm);

        let mut lattice = match self.choose_path(claim, world)? {
            PathChoice::Direct => elaborate(self, claim, world, budget, seed)?,
            PathChoice::Defer => {
                let consulted: BTreeSet<String> = self
                    .accepted_authorities
                    .iter()
                    .filter(|id| world.source(id).is_some())
                    .cloned()
                    .collect();
                let rivals: Vec<&Source> = self
                    .rival_authorities
                    .iter()
                    .filter_map(|id| world.source(id))
                    .collect();
                let added = self.adversarial_deference(&rivals, &consulted, &claim.domain);
                let candidates: Vec<&Source> = if consulted.is_empty() {
                    world.sources.iter().collect()
                } else {
                    consulted.iter().filter_map(|id| world.source(id)).collect()
                };
                let chosen = self.select_authority(&candidates, claim, world, &BTreeSet::new())?;
                let mut lattice = TrustLattice::new(claim.id.clone(), 1.0);
                self.attach_testimony(&mut lattice, chosen, claim, world, &BTreeSet::new(), seed)?;
                if let Some(rid) = &added {
                    // The rival is consulted in addition to — never instead
                    // of — the agent's own authority.
                    if rid != &chosen.id {
                        let rival = world.source(rid).expect("rival resolved from world");
                        let bypass: BTreeSet<String> = [rid.clone()].into();
                        self.attach_testimony(&mut lattice, rival, claim, world, &bypass, seed)?;
                    }
                }
                lattice
            }
        };

        if intuition_weight > 0.0 {
            let ix = lattice.add_node(format!("intuition:{}", claim.id), 1.0, Some(AnchorKind::Belief))?;
            lattice.add_edge(ix, lattice.root(), Polarity::Attacks, intuition_weight)?;
        }
        self.record(claim, lattice)
    }

    /// Add one authority's testimony on `claim` as an anchored node.
    ///
    /// The asserted polarity is the source's stance from its authored
    /// evidence when it has one; otherwise the source asserts the true
    /// polarity with probability `0.5 + competence·(honesty − 0.5)` under
    /// the call's seeded stream. Bypassing sources are snapshotted as
    /// in-group so out-group rejection does not zero them.
    fn attach_testimony(
        &self,
        lattice: &mut TrustLattice,
        source: &Source,
        claim: &Claim,
        world: &World,
        bypass: &BTreeSet<String>,
        seed: u64,
    ) -> Result<()> {
        let polarity = match Self::stance(source, claim, world) {
            Some(p) => p,
            None => {
                let truth = crate::world::ground_truth(world, &claim.id)?;
                let p_correct = 0.5 + source.competence_in(&claim.domain) * (source.honesty - 0.5);
                let mut rng = seeds::rng(
                    seed,
                    &[seeds::tag("testimony"), seeds::tag(&source.id), seeds::tag(&claim.id)],
                );
                let asserted = if rng.gen::<f64>() < p_correct { truth } else { !truth };
                if asserted {
                    Polarity::Supports
                } else {
                    Polarity::Attacks
                }
            }
        };
        let stmt = format!("testimony:{}:{}", source.id, claim.id);
        let weight = self
            .policy
            .standard_multiplier(crate::world::EvidenceKind::Testimony)
            .clamp(0.0, 1.0);
        let ix = lattice.add_node(stmt, 1.0, Some(AnchorKind::AcceptedAuthority(source.id.clone())))?;
        lattice.add_edge(ix, lattice.root(), polarity, weight)?;
        let mut info = authority_info_for(source, &claim.domain, &self.group_tag);
        if bypass.contains(&source.id) {
            info.out_group = false;
        }
        lattice.record_authority(source.id.clone(), info);
        Ok(())
    }

    /// Evaluate a finished lattice, store it and its root label, and sync
    /// the belief store with the verdict.
    fn record(&mut self, claim: &Claim, lattice: TrustLattice) -> Result<(AcceptanceLabel, TrustLattice)> {
        let labels = evaluate(&lattice, &self.policy)?;
        let label = labels[&claim.id];
        self.apply_verdict(&claim.id, label);
        self.lattices.insert(claim.id.clone(), lattice.clone());
        Ok((label, lattice))
    }

    /// Record a claim's label and keep the belief store consistent with it.
    pub fn apply_verdict(&mut self, claim_id: &str, label: AcceptanceLabel) {
        self.labels.insert(claim_id.to_string(), label);
        match label.verdict {
            Verdict::Accepted => {
                self.beliefs.insert(claim_id.to_string());
            }
            Verdict::Rejected | Verdict::Undecided => {
                if !self.pre_trusted.contains(claim_id) {
                    self.beliefs.remove(claim_id);
                }
            }
        }
    }

    /// Perceived share of others holding the agent's own label on a claim.
    /// See [`crate::tribes::perceived_consensus`] for the blended estimate.
    pub fn own_label(&self, claim_id: &str) -> Verdict {
        self.labels.get(claim_id).map(|l| l.verdict).unwrap_or(Verdict::Undecided)
    }
}

impl AgentContext for Agent {
    fn group_tag(&self) -> &str {
        &self.group_tag
    }

    fn policy(&self) -> &TrustPolicy {
        &self.policy
    }

    fn pre_trusted(&self) -> &BTreeSet<StatementId> {
        &self.pre_trusted
    }

    fn beliefs(&self) -> &BTreeSet<StatementId> {
        &self.beliefs
    }

    fn accepted_authorities(&self) -> &BTreeSet<String> {
        &self.accepted_authorities
    }

    fn stickiness_threshold(&self) -> u64 {
        self.stickiness_threshold
    }

    fn branching(&self) -> usize {
        self.branching
    }

    /// World-pool items first (authored order), then remembered items by
    /// receipt order, deduplicated by id, recency aged to the current step.
    fn available_evidence(&self, world: &World, statement: &str) -> Vec<EvidenceItem> {
        let mut out: Vec<EvidenceItem> = world.evidence_targeting(statement).cloned().collect();
        let seen: BTreeSet<String> = out.iter().map(|e| e.id.clone()).collect();
        for item in self.memory.targeting(statement, self.current_step) {
            if !seen.contains(&item.id) {
                out.push(item);
            }
        }
        out
    }

    fn sample_evidence(&self, available: &[EvidenceItem], k: usize, seed: u64) -> Vec<EvidenceItem> {
        Agent::sample_evidence(self, available, k, seed)
    }

    fn filter_item(&self, item: EvidenceItem, seed: u64) -> EvidenceItem {
        let coercive = item.coercive;
        self.reactance_filter(item, coercive, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moral::FramingVector;
    use crate::world::{EvidenceKind, TruthMakerFact};

    fn claim(id: &str, domain: &str) -> Claim {
        Claim {
            id: id.into(),
            text_tag: id.into(),
            domain: domain.into(),
            framing: FramingVector::zero(),
            violation: 0.0,
        }
    }

    fn world_with_sources(sources: Vec<Source>) -> World {
        World {
            domains: vec!["d".into()],
            claims: vec![claim("c", "d")],
            facts: vec![TruthMakerFact { claim_id: "c".into(), truth_value: true, proxy_fidelity: 1.0 }],
            sources,
            evidence: vec![],
        }
    }

    fn item(id: &str, author: &str, target: &str, polarity: Polarity, strength: f64) -> EvidenceItem {
        EvidenceItem {
            id: id.into(),
            author: author.into(),
            target: target.into(),
            polarity,
            strength,
            vividness: 0.5,
            recency: 0,
            framing: FramingVector::zero(),
            veracity: true,
            kind: EvidenceKind::Testimony,
            coercive: false,
            reactance_mark: false,
        }
    }

    // ---- choose_path ----

    #[test]
    fn competent_agents_go_direct() {
        let world = world_with_sources(vec![Source::new("s")]);
        let mut a = Agent::new("a");
        a.competence.insert("d".into(), 0.9);
        a.virtues.humility = 0.5;
        // bar = 0.5·0.75 + 0.125 = 0.5; 0.9 ≥ 0.5
        assert_eq!(a.choose_path(&world.claims[0], &world).unwrap(), PathChoice::Direct);
    }

    #[test]
    fn humble_incompetent_agents_defer() {
        let world = world_with_sources(vec![Source::new("s")]);
        let mut a = Agent::new("a");
        a.competence.insert("d".into(), 0.1);
        a.virtues.humility = 0.8;
        // bar = 0.5·0.9 + 0.2 = 0.65 > 0.1
        assert_eq!(a.choose_path(&world.claims[0], &world).unwrap(), PathChoice::Defer);
    }

    #[test]
    fn full_overconfidence_always_goes_direct() {
        let world = world_with_sources(vec![Source::new("s")]);
        for humility in [0.0, 0.5, 1.0] {
            let mut a = Agent::new("a");
            a.competence.insert("d".into(), 0.1);
            a.biases.overconfidence = 1.0;
            a.virtues.humility = humility;
            // perceived = 1.0; max bar = 0.5·1 + 0.25 = 0.75
            assert_eq!(a.choose_path(&world.claims[0], &world).unwrap(), PathChoice::Direct);
        }
    }

    #[test]
    fn humility_monotonically_raises_the_bar() {
        let world = world_with_sources(vec![Source::new("s")]);
        let mut last_direct = true;
        for i in 0..=10 {
            let mut a = Agent::new("a");
            a.competence.insert("d".into(), 0.55);
            a.virtues.humility = i as f64 / 10.0;
            let direct = a.choose_path(&world.claims[0], &world).unwrap() == PathChoice::Direct;
            // Once deferring, higher humility never flips back to direct.
            assert!(last_direct || !direct);
            last_direct = direct;
        }
    }

    #[test]
    fn unknown_domain_is_an_error() {
        let world = world_with_sources(vec![Source::new("s")]);
        let a = Agent::new("a");
        let ghost = claim("x", "not_a_domain");
        assert!(a.choose_path(&ghost, &world).is_err());
    }

    // ---- select_authority ----

    fn src(id: &str, competence: f64, prestige: f64, followers: u64) -> Source {
        Source {
            competence: [("d".to_string(), competence)].into(),
            prestige,
            follower_count: followers,
            ..Source::new(id)
        }
    }

    #[test]
    fn unbiased_selection_maximizes_competence() {
        let world = world_with_sources(vec![]);
        let a = Agent::new("a");
        let s1 = src("s1", 0.4, 0.9, 500);
        let s2 = src("s2", 0.8, 0.1, 5);
        let got = a.select_authority(&[&s1, &s2], &world.claims[0], &world, &BTreeSet::new()).unwrap();
        assert_eq!(got.id, "s2");
    }

    #[test]
    fn confirmation_prefers_agreement_over_competence() {
        let agreeing = src("agree", 0.2, 0.0, 0);
        let contrary = src("contra", 0.9, 0.0, 0);
        let mut world = world_with_sources(vec![agreeing.clone(), contrary.clone()]);
        world.evidence = vec![
            item("e_pro", "agree", "c", Polarity::Supports, 0.9),
            item("e_con", "contra", "c", Polarity::Attacks, 0.9),
        ];
        let mut a = Agent::new("a");
        a.beliefs.insert("c".into()); // prior: accepted
        a.biases.confirmation = 1.0;
        let got = a
            .select_authority(&[&agreeing, &contrary], &world.claims[0], &world, &BTreeSet::new())
            .unwrap();
        assert_eq!(got.id, "agree");
    }

    #[test]
    fn halo_prefers_prestige_outside_the_domain() {
        let world = world_with_sources(vec![]);
        let celebrity = src("celebrity", 0.0, 0.95, 0);
        let expert = src("expert", 0.9, 0.1, 0);
        let mut a = Agent::new("a");
        a.biases.halo = 1.0;
        let got = a
            .select_authority(&[&celebrity, &expert], &world.claims[0], &world, &BTreeSet::new())
            .unwrap();
        assert_eq!(got.id, "celebrity");
    }

    #[test]
    fn bandwagon_prefers_the_most_followed() {
        let world = world_with_sources(vec![]);
        let crowd = src("crowd", 0.1, 0.0, 100_000);
        let expert = src("expert", 0.9, 0.0, 10);
        let mut a = Agent::new("a");
        a.biases.bandwagon = 1.0;
        let got = a
            .select_authority(&[&crowd, &expert], &world.claims[0], &world, &BTreeSet::new())
            .unwrap();
        assert_eq!(got.id, "crowd");
    }

    #[test]
    fn hypocrites_score_zero_regardless() {
        let world = world_with_sources(vec![]);
        let mut saint = src("saint", 0.3, 0.0, 0);
        let mut preacher = src("preacher", 0.9, 0.9, 9999);
        preacher.hypocrisy_flag = true;
        saint.hypocrisy_flag = false;
        let a = Agent::new("a");
        let got = a
            .select_authority(&[&preacher, &saint], &world.claims[0], &world, &BTreeSet::new())
            .unwrap();
        assert_eq!(got.id, "saint");
    }

    #[test]
    fn out_group_sources_are_zeroed_only_under_rejection() {
        let world = world_with_sources(vec![]);
        let mut outsider = src("outsider", 0.9, 0.0, 0);
        outsider.group_tag = "them".into();
        let insider = src("insider", 0.3, 0.0, 0);
        let mut a = Agent::new("a");
        a.group_tag = "us".into();

        let got = a
            .select_authority(&[&outsider, &insider], &world.claims[0], &world, &BTreeSet::new())
            .unwrap();
        assert_eq!(got.id, "outsider");

        a.policy.out_group_rejection = true;
        let got = a
            .select_authority(&[&outsider, &insider], &world.claims[0], &world, &BTreeSet::new())
            .unwrap();
        assert_eq!(got.id, "insider");

        // A bypass restores the outsider.
        let bypass: BTreeSet<String> = ["outsider".to_string()].into();
        let got = a.select_authority(&[&outsider, &insider], &world.claims[0], &world, &bypass).unwrap();
        assert_eq!(got.id, "outsider");
    }

    #[test]
    fn ties_break_to_the_lowest_id() {
        let world = world_with_sources(vec![]);
        let s1 = src("beta", 0.5, 0.0, 0);
        let s2 = src("alpha", 0.5, 0.0, 0);
        let a = Agent::new("a");
        let got = a.select_authority(&[&s1, &s2], &world.claims[0], &world, &BTreeSet::new()).unwrap();
        assert_eq!(got.id, "alpha");
    }

    #[test]
    fn empty_candidates_error() {
        let world = world_with_sources(vec![]);
        let a = Agent::new("a");
        assert!(a.select_authority(&[], &world.claims[0], &world, &BTreeSet::new()).is_err());
    }

    // ---- sample_evidence ----

    fn pool(n: usize) -> Vec<EvidenceItem> {
        (0..n)
            .map(|i| {
                let mut e = item(&format!("e{i}"), "s", "c", Polarity::Supports, 0.5);
                e.vividness = 0.1 + 0.2 * (i % 5) as f64;
                e.recency = (i % 3) as u64;
                e
            })
            .collect()
    }

    #[test]
    fn attentiveness_scales_sample_size() {
        let available = pool(16);
        let mut a = Agent::new("a");
        a.virtues.attentiveness = 1.0;
        assert_eq!(a.sample_evidence(&available, 8, 1).len(), 8);
        a.virtues.attentiveness = 0.0;
        assert_eq!(a.sample_evidence(&available, 8, 1).len(), 2); // ceil(8·0.25)
    }

    #[test]
    fn sampling_is_deterministic_and_without_replacement() {
        let available = pool(10);
        let a = Agent::new("a");
        let x = a.sample_evidence(&available, 6, 42);
        let y = a.sample_evidence(&available, 6, 42);
        assert_eq!(x, y);
        let mut ids: Vec<&str> = x.iter().map(|e| e.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), x.len());
    }

    #[test]
    fn anchoring_overweights_the_first_presented_item() {
        let available = pool(4);
        let mut anchored = Agent::new("a");
        anchored.biases.anchoring = 1.0;
        let neutral = Agent::new("b");
        let trials = 400;
        let count_first = |agent: &Agent| {
            (0..trials)
                .filter(|&s| agent.sample_evidence(&available, 4, s)[0].id == "e0")
                .count()
        };
        // First item carries weight 10 vs 1: expected first-draw share
        // 10/13 ≈ 0.77 against the uniform 0.25.
        let with_bias = count_first(&anchored);
        let without = count_first(&neutral);
        assert!(with_bias as f64 / trials as f64 > 0.6, "{with_bias}/{trials}");
        assert!((without as f64 / trials as f64) < 0.4, "{without}/{trials}");
    }

    #[test]
    fn availability_prefers_vivid_recent_items() {
        let mut dull = item("dull", "s", "c", Polarity::Supports, 0.5);
        dull.vividness = 0.01;
        dull.recency = 9;
        let mut vivid = item("vivid", "s", "c", Polarity::Supports, 0.5);
        vivid.vividness = 1.0;
        vivid.recency = 0;
        let available = vec![dull, vivid];
        let mut a = Agent::new("a");
        a.biases.availability = 1.0;
        let trials = 300;
        let vivid_first = (0..trials)
            .filter(|&s| a.sample_evidence(&available, 1, s)[0].id == "vivid")
            .count();
        assert!(vivid_first as f64 / trials as f64 > 0.95, "{vivid_first}/{trials}");
    }

    // ---- reactance_filter ----

    #[test]
    fn full_reactance_inverts_coercive_non_authority_items() {
        let mut a = Agent::new("a");
        a.biases.reactance = 1.0;
        let it = item("e", "stranger", "c", Polarity::Supports, 0.5);
        let out = a.reactance_filter(it.clone(), true, 7);
        assert_eq!(out.polarity, Polarity::Attacks);
        assert!(out.reactance_mark);
        // Non-coercive delivery passes through.
        let out = a.reactance_filter(it.clone(), false, 7);
        assert_eq!(out.polarity, Polarity::Supports);
        assert!(!out.reactance_mark);
    }

    #[test]
    fn zero_reactance_never_inverts() {
        let a = Agent::new("a");
        for seed in 0..50 {
            let out = a.reactance_filter(item("e", "stranger", "c", Polarity::Supports, 0.5), true, seed);
            assert_eq!(out.polarity, Polarity::Supports);
        }
    }

    #[test]
    fn accepted_authorities_do_not_trigger_reactance() {
        let mut a = Agent::new("a");
        a.biases.reactance = 1.0;
        a.accepted_authorities.insert("boss".into());
        let out = a.reactance_filter(item("e", "boss", "c", Polarity::Supports, 0.5), true, 7);
        assert_eq!(out.polarity, Polarity::Supports);
    }

    // ---- attribute_behavior ----

    #[test]
    fn full_asymmetry_splits_explanations_by_group() {
        let mut a = Agent::new("a");
        a.group_tag = "us".into();
        a.biases.attribution_asymmetry = 1.0;
        assert_eq!(a.attribute_behavior("us", ActValence::Negative, 1), Attribution::Situational);
        assert_eq!(a.attribute_behavior("them", ActValence::Negative, 1), Attribution::Dispositional);
        assert_eq!(a.attribute_behavior("us", ActValence::Positive, 1), Attribution::Dispositional);
        assert_eq!(a.attribute_behavior("them", ActValence::Positive, 1), Attribution::Situational);
    }

    #[test]
    fn zero_asymmetry_is_group_blind() {
        let mut a = Agent::new("a");
        a.group_tag = "us".into();
        for seed in 0..30 {
            for group in ["us", "them"] {
                for v in [ActValence::Positive, ActValence::Negative] {
                    assert_eq!(a.attribute_behavior(group, v, seed), Attribution::Situational);
                }
            }
        }
    }

    // ---- moral_stop_loss ----

    #[test]
    fn stop_loss_cuts_high_alarm_and_logs() {
        let mut a = Agent::new("a");
        a.interventions.stop_loss = true;
        assert_eq!(a.moral_stop_loss(0.9, 0.9), 0.0);
        assert_eq!(a.events.stop_loss, 1);
        // Below threshold: untouched.
        assert_eq!(a.moral_stop_loss(0.69, 0.69), 0.69);
        assert_eq!(a.events.stop_loss, 1);
    }

    #[test]
    fn stop_loss_disabled_passes_through() {
        let mut a = Agent::new("a");
        assert_eq!(a.moral_stop_loss(0.9, 0.9), 0.9);
        assert_eq!(a.events.stop_loss, 0);
    }

    // ---- adversarial_deference ----

    #[test]
    fn deference_adds_the_strongest_rival_once() {
        let mut a = Agent::new("a");
        a.interventions.adversarial_deference = true;
        let weak = src("weak_rival", 0.3, 0.0, 0);
        let strong = src("strong_rival", 0.9, 0.0, 0);
        let consulted: BTreeSet<String> = ["mine".to_string()].into();
        let got = a.adversarial_deference(&[&weak, &strong], &consulted, "d");
        assert_eq!(got.as_deref(), Some("strong_rival"));
        assert_eq!(a.events.deference, 1);

        // Already consulting a rival: no-op.
        let consulted: BTreeSet<String> = ["strong_rival".to_string()].into();
        assert_eq!(a.adversarial_deference(&[&weak, &strong], &consulted, "d"), None);
        assert_eq!(a.events.deference, 1);
    }

    #[test]
    fn deference_disabled_is_identity() {
        let mut a = Agent::new("a");
        let rival = src("rival", 0.9, 0.0, 0);
        assert_eq!(a.adversarial_deference(&[&rival], &BTreeSet::new(), "d"), None);
        assert_eq!(a.events.deference, 0);
    }

    // ---- form_belief ----

    /// Three-claim fixture: an institutional source the agent accepts as an
    /// authority, supporting the true claims and attacking the false one.
    fn fixture_world() -> World {
        let framing = FramingVector::zero();
        let mk_claim = |id: &str| Claim {
            id: id.into(),
            text_tag: id.into(),
            domain: "d".into(),
            framing,
            violation: 0.0,
        };
        World {
            domains: vec!["d".into()],
            claims: vec![mk_claim("t1"), mk_claim("t2"), mk_claim("f1")],
            facts: vec![
                TruthMakerFact { claim_id: "t1".into(), truth_value: true, proxy_fidelity: 1.0 },
                TruthMakerFact { claim_id: "t2".into(), truth_value: true, proxy_fidelity: 1.0 },
                TruthMakerFact { claim_id: "f1".into(), truth_value: false, proxy_fidelity: 1.0 },
            ],
            sources: vec![Source {
                competence: [("d".to_string(), 0.8)].into(),
                ..Source::new("inst")
            }],
            evidence: vec![
                item("t1_a", "inst", "t1", Polarity::Supports, 0.6),
                item("t1_b", "inst", "t1", Polarity::Supports, 0.7),
                item("t2_a", "inst", "t2", Polarity::Supports, 0.9),
                item("f1_a", "inst", "f1", Polarity::Attacks, 0.8),
                item("f1_b", "inst", "f1", Polarity::Attacks, 0.5),
            ],
        }
    }

    fn competent_agent() -> Agent {
        let mut a = Agent::new("a");
        a.competence.insert("d".into(), 0.9);
        a.accepted_authorities.insert("inst".into());
        a
    }

    #[test]
    fn unbiased_competent_agent_tracks_ground_truth() {
        // Oracle: hand-computed lattices. Authority-anchored leaves carry
        // trust 0.8, so root scores are 0.8·Σ(±strength).
        let world = fixture_world();
        let mut a = competent_agent();
        let budget = EvaluationBudget::default();

        let (l1, lat1) = a.form_belief(&world.claims[0], &world, budget, 1).unwrap();
        assert_eq!(l1.verdict, Verdict::Accepted);
        // 0.8·(0.6 + 0.7) = 1.04, clamped to the score ceiling.
        assert_eq!(l1.score, 1.0);
        assert!(lat1.leaves_anchored());

        let (l2, _) = a.form_belief(&world.claims[1], &world, budget, 1).unwrap();
        assert_eq!(l2.verdict, Verdict::Accepted);
        assert!((l2.score - 0.8 * 0.9).abs() < 1e-12);

        let (l3, _) = a.form_belief(&world.claims[2], &world, budget, 1).unwrap();
        assert_eq!(l3.verdict, Verdict::Rejected);
        // −0.8·(0.8 + 0.5) = −1.04, clamped to the floor.
        assert_eq!(l3.score, -1.0);

        // Accepted claims entered the belief store; rejected ones did not.
        assert!(a.beliefs.contains("t1") && a.beliefs.contains("t2"));
        assert!(!a.beliefs.contains("f1"));
    }

    #[test]
    fn believed_claims_short_circuit_to_single_node() {
        let world = fixture_world();
        let mut a = competent_agent();
        a.beliefs.insert("t1".into());
        let (label, lat) = a.form_belief(&world.claims[0], &world, EvaluationBudget::default(), 1).unwrap();
        assert_eq!(lat.len(), 1);
        assert_eq!(lat.node(lat.root()).anchor, Some(AnchorKind::Belief));
        assert_eq!(label.verdict, Verdict::Accepted);
        assert_eq!(label.score, 1.0);
    }

    #[test]
    fn deference_tracks_a_competent_honest_authority() {
        let world = fixture_world();
        let mut a = Agent::new("a");
        a.competence.insert("d".into(), 0.1);
        a.virtues.humility = 0.8; // defers
        a.accepted_authorities.insert("inst".into());
        let (label, lat) = a.form_belief(&world.claims[0], &world, EvaluationBudget::default(), 1).unwrap();
        // Single testimony node, stance from authored evidence (supports).
        assert_eq!(lat.len(), 2);
        assert_eq!(label.verdict, Verdict::Accepted);
        assert!((label.score - 0.8).abs() < 1e-12);
    }

    #[test]
    fn high_alarm_without_stop_loss_rejects_despite_evidence() {
        // Homeostasis: the intuition node outweighs thin contrary evidence.
        let mut world = fixture_world();
        world.claims[0].framing = FramingVector([1.0; 7]);
        world.claims[0].violation = 0.9; // alarm = 0.9·1.0 = 0.9
        world.evidence.retain(|e| e.id == "t1_a");
        world.evidence[0].strength = 0.3;
        let mut a = competent_agent();
        let (label, lat) = a.form_belief(&world.claims[0], &world, EvaluationBudget::default(), 1).unwrap();
        // Root: 0.8·0.3 − 0.9 = −0.66 → rejected.
        assert_eq!(label.verdict, Verdict::Rejected);
        assert!(lat.index_of("intuition:t1").is_some());
        assert!(!a.beliefs.contains("t1"));
    }

    #[test]
    fn stop_loss_suppresses_the_intuition_node() {
        let mut world = fixture_world();
        world.claims[0].framing = FramingVector([1.0; 7]);
        world.claims[0].violation = 0.9;
        world.evidence.retain(|e| e.id == "t1_a");
        world.evidence[0].strength = 0.3;
        let mut a = competent_agent();
        a.interventions.stop_loss = true;
        let (label, lat) = a.form_belief(&world.claims[0], &world, EvaluationBudget::default(), 1).unwrap();
        assert!(lat.index_of("intuition:t1").is_none());
        assert_eq!(a.events.stop_loss, 1);
        // Evidence alone: 0.8·0.3 = 0.24 → undecided rather than rejected.
        assert_eq!(label.verdict, Verdict::Undecided);
    }

    #[test]
    fn adversarial_deference_consults_a_bypassing_rival() {
        let mut world = fixture_world();
        world.sources.push(Source {
            competence: [("d".to_string(), 0.9)].into(),
            group_tag: "them".into(),
            ..Source::new("rival")
        });
        let mut a = Agent::new("a");
        a.group_tag = "us".into();
        a.competence.insert("d".into(), 0.1);
        a.virtues.humility = 0.8; // defers
        a.accepted_authorities.insert("inst".into());
        a.rival_authorities.insert("rival".into());
        a.policy.out_group_rejection = true;
        a.interventions.adversarial_deference = true;
        let (_, lat) = a.form_belief(&world.claims[0], &world, EvaluationBudget::default(), 1).unwrap();
        // Both the chosen authority's and the rival's testimony are present,
        // and the rival is snapshotted as bypassing out-group rejection.
        assert!(lat.index_of("testimony:inst:t1").is_some());
        assert!(lat.index_of("testimony:rival:t1").is_some());
        assert!(!lat.authorities()["rival"].out_group);
        assert_eq!(a.events.deference, 1);
    }

    #[test]
    fn form_belief_is_deterministic() {
        let world = fixture_world();
        let budget = EvaluationBudget::default();
        let mut a1 = competent_agent();
        let mut a2 = competent_agent();
        let r1 = a1.form_belief(&world.claims[0], &world, budget, 99).unwrap();
        let r2 = a2.form_belief(&world.claims[0], &world, budget, 99).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(a1.labels, a2.labels);
    }

    // ---- memory ----

    #[test]
    fn memory_dedupes_and_evicts_the_stalest() {
        let mut m = Memory::new(2);
        let mut old = item("old", "s", "c", Polarity::Supports, 0.5);
        old.vividness = 0.9;
        let mut mid = item("mid", "s", "c", Polarity::Supports, 0.5);
        mid.vividness = 0.1;
        let mut new = item("new", "s", "c", Polarity::Supports, 0.5);
        new.vividness = 0.5;
        assert!(m.insert(old.clone(), 0));
        assert!(!m.insert(old, 0));
        assert!(m.insert(mid, 1));
        assert!(m.insert(new, 2));
        // Oldest receipt evicted first.
        assert!(!m.contains("old"));
        assert!(m.contains("mid") && m.contains("new"));
    }

    #[test]
    fn memory_ages_recency() {
        let mut m = Memory::new(4);
        m.insert(item("e", "s", "c", Polarity::Supports, 0.5), 3);
        let aged = m.targeting("c", 10);
        assert_eq!(aged[0].recency, 7);
    }
}
