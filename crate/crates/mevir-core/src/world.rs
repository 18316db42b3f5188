//! Shared ontology: claims, ground truth, sources, and evidence.
//!
//! A [`World`] is the fixed backdrop of a run. Claims carry a framing vector
//! and sit in a domain; exactly one [`TruthMakerFact`] pins each claim's
//! actual truth value (agents never read it directly — only evidence
//! correlated with it). Sources author [`EvidenceItem`]s that support or
//! attack statements, where a statement is either a claim or another
//! evidence item, so chains of testimony about testimony are expressible.
//!
//! [`generate_evidence_stream`] turns a world into the ordered sequence of
//! items a simulation feeds to agents, with a configurable misinformation
//! rate: veracious items push toward the target's actual truth, fabricated
//! ones push away from it.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::moral::FramingVector;
use crate::{seeds, Error, Result};

/// Statements are identified by string ids drawn from one shared namespace
/// covering claims and evidence items.
pub type StatementId = String;

/// Direction of an evidentiary bearing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Supports,
    Attacks,
}

impl Polarity {
    /// The opposite direction.
    pub fn inverted(self) -> Polarity {
        match self {
            Polarity::Supports => Polarity::Attacks,
            Polarity::Attacks => Polarity::Supports,
        }
    }
}

/// Kind of evidence, used by per-agent evidentiary standards to re-weight
/// what counts (anecdote-first cultures vs statistics-first cultures).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Anecdote,
    Testimony,
    Statistic,
    Document,
}

impl Default for EvidenceKind {
    fn default() -> Self {
        EvidenceKind::Testimony
    }
}

/// A contestable proposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub id: StatementId,
    /// Short human-readable handle used in reports.
    pub text_tag: String,
    /// Domain the claim belongs to; must be declared in the world.
    pub domain: String,
    /// Which foundations the claim's usual wording appeals to.
    pub framing: FramingVector,
    /// How strongly the claim's content reads as a norm violation, in [0, 1].
    /// Drives intuitive alarm in agents whose profiles resonate with the
    /// framing; 0 means the claim is morally inert.
    #[serde(default)]
    pub violation: f64,
}

/// The world's own record of whether a claim holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthMakerFact {
    pub claim_id: StatementId,
    pub truth_value: bool,
    /// How faithfully available evidence tracks the fact, in [0, 1].
    pub proxy_fidelity: f64,
}

/// An information source (person, outlet, institution).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub id: String,
    /// Per-domain competence in [0, 1]; missing domains read as 0.
    #[serde(default)]
    pub competence: BTreeMap<String, f64>,
    /// Group membership tag; compared against an agent's own tag for
    /// in-group/out-group treatment. Empty means unaffiliated.
    #[serde(default)]
    pub group_tag: String,
    /// Status independent of competence (drives halo effects).
    #[serde(default)]
    pub prestige: f64,
    /// Audience size (drives bandwagon effects).
    #[serde(default)]
    pub follower_count: u64,
    /// Propensity to assert what the world record supports, in [0, 1].
    #[serde(default = "default_honesty")]
    pub honesty: f64,
    /// Set when the source's conduct contradicts its preaching; flagged
    /// sources lose all authority-anchor trust.
    #[serde(default)]
    pub hypocrisy_flag: bool,
}

fn default_honesty() -> f64 {
    1.0
}

impl Source {
    /// A source with neutral defaults (used in tests and builders).
    pub fn new(id: &str) -> Source {
        Source {
            id: id.to_string(),
            competence: BTreeMap::new(),
            group_tag: String::new(),
            prestige: 0.0,
            follower_count: 0,
            honesty: 1.0,
            hypocrisy_flag: false,
        }
    }

    /// Competence in one domain (0 when undeclared).
    pub fn competence_in(&self, domain: &str) -> f64 {
        self.competence.get(domain).copied().unwrap_or(0.0)
    }
}

/// One piece of evidence bearing on a statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceItem {
    pub id: StatementId,
    /// Authoring source id.
    pub author: String,
    /// Statement this item bears on: a claim id or another evidence id.
    pub target: StatementId,
    pub polarity: Polarity,
    /// Evidential force in [0, 1]; becomes the lattice edge weight.
    pub strength: f64,
    /// Emotional vividness in [0, 1]; drives availability-biased sampling.
    pub vividness: f64,
    /// Age in steps at the time of observation.
    #[serde(default)]
    pub recency: u64,
    /// Foundations the item's wording appeals to.
    pub framing: FramingVector,
    /// Whether the item is consistent with the truth makers (true) or
    /// fabricated (false). Hidden from agents; used for accuracy metrics.
    pub veracity: bool,
    #[serde(default)]
    pub kind: EvidenceKind,
    /// Whether the item arrives as a demand rather than an offer of reasons;
    /// coercive items can trigger reactance.
    #[serde(default)]
    pub coercive: bool,
    /// Set by the reactance filter when an agent flipped the item's polarity
    /// in defiance; never authored.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reactance_mark: bool,
}

/// The immutable backdrop of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    #[serde(default)]
    pub domains: Vec<String>,
    #[serde(default)]
    pub claims: Vec<Claim>,
    #[serde(default)]
    pub facts: Vec<TruthMakerFact>,
    #[serde(default)]
    pub sources: Vec<Source>,
    #[serde(default)]
    pub evidence: Vec<EvidenceItem>,
}

fn in_unit(field: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || v.is_nan() {
        return Err(Error::Config(format!("{field} out of [0,1]: {v}")));
    }
    Ok(())
}

impl World {
    /// Check referential integrity and numeric ranges.
    ///
    /// Rules: unique ids (claims and evidence share one statement
    /// namespace), every claim's domain declared, exactly one fact per
    /// claim, evidence authors and targets resolvable, all unit-interval
    /// fields in range, and no authored id in the reserved `stream_` space.
    pub fn validate(&self) -> Result<()> {
        let mut domains = BTreeSet::new();
        for d in &self.domains {
            if !domains.insert(d.as_str()) {
                return Err(Error::Config(format!("duplicate domain: {d}")));
            }
        }
        let mut statements = BTreeSet::new();
        for c in &self.claims {
            if !statements.insert(c.id.as_str()) {
                return Err(Error::Config(format!("duplicate statement id: {}", c.id)));
            }
            if !domains.contains(c.domain.as_str()) {
                return Err(Error::Config(format!("claim {} references undeclared domain {}", c.id, c.domain)));
            }
            c.framing.validate()?;
            in_unit(&format!("claim {} violation", c.id), c.violation)?;
        }
        let mut fact_claims = BTreeSet::new();
        for f in &self.facts {
            if self.claim(&f.claim_id).is_none() {
                return Err(Error::Config(format!("fact references unknown claim {}", f.claim_id)));
            }
            if !fact_claims.insert(f.claim_id.as_str()) {
                return Err(Error::Config(format!("multiple facts for claim {}", f.claim_id)));
            }
            in_unit(&format!("fact {} proxy_fidelity", f.claim_id), f.proxy_fidelity)?;
        }
        for c in &self.claims {
            if !fact_claims.contains(c.id.as_str()) {
                return Err(Error::Config(format!("claim {} has no truth-maker fact", c.id)));
            }
        }
        let mut source_ids = BTreeSet::new();
        for s in &self.sources {
            if !source_ids.insert(s.id.as_str()) {
                return Err(Error::Config(format!("duplicate source id: {}", s.id)));
            }
            in_unit(&format!("source {} prestige", s.id), s.prestige)?;
            in_unit(&format!("source {} honesty", s.id), s.honesty)?;
            for (d, v) in &s.competence {
                if !domains.contains(d.as_str()) {
                    return Err(Error::Config(format!("source {} competence references undeclared domain {d}", s.id)));
                }
                in_unit(&format!("source {} competence[{d}]", s.id), *v)?;
            }
        }
        for e in &self.evidence {
            if e.id.starts_with("stream_") {
                return Err(Error::Config(format!("evidence id {} uses the reserved stream_ prefix", e.id)));
            }
            if !statements.insert(e.id.as_str()) {
                return Err(Error::Config(format!("duplicate statement id: {}", e.id)));
            }
            if !source_ids.contains(e.author.as_str()) {
                return Err(Error::Config(format!("evidence {} authored by unknown source {}", e.id, e.author)));
            }
            in_unit(&format!("evidence {} strength", e.id), e.strength)?;
            in_unit(&format!("evidence {} vividness", e.id), e.vividness)?;
            e.framing.validate()?;
        }
        for e in &self.evidence {
            if !statements.contains(e.target.as_str()) {
                return Err(Error::Config(format!("evidence {} targets unknown statement {}", e.id, e.target)));
            }
        }
        Ok(())
    }

    /// Claim by id.
    pub fn claim(&self, id: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.id == id)
    }

    /// Source by id.
    pub fn source(&self, id: &str) -> Option<&Source> {
        self.sources.iter().find(|s| s.id == id)
    }

    /// Authored evidence item by id.
    pub fn evidence_item(&self, id: &str) -> Option<&EvidenceItem> {
        self.evidence.iter().find(|e| e.id == id)
    }

    /// Authored items bearing on a statement, in authored order.
    pub fn evidence_targeting<'a>(&'a self, stmt: &'a str) -> impl Iterator<Item = &'a EvidenceItem> {
        self.evidence.iter().filter(move |e| e.target == stmt)
    }

    /// Walk an evidence chain up to the claim it ultimately bears on.
    /// Returns `None` for unknown ids or cyclic authored chains.
    pub fn root_claim_of(&self, stmt: &str) -> Option<&Claim> {
        let mut current = stmt.to_string();
        let mut seen = BTreeSet::new();
        loop {
            if let Some(c) = self.claim(&current) {
                return Some(c);
            }
            if !seen.insert(current.clone()) {
                return None;
            }
            current = self.evidence_item(&current)?.target.clone();
        }
    }
}

/// The actual truth value of a claim, per the world's truth makers.
pub fn ground_truth(world: &World, claim_id: &str) -> Result<bool> {
    world
        .facts
        .iter()
        .find(|f| f.claim_id == claim_id)
        .map(|f| f.truth_value)
        .ok_or_else(|| Error::UnknownId { kind: "claim", id: claim_id.to_string() })
}

/// Truth value of an arbitrary statement: a claim's fact, or an evidence
/// item's veracity flag.
pub fn statement_truth(world: &World, stmt: &str) -> Option<bool> {
    if let Ok(t) = ground_truth(world, stmt) {
        return Some(t);
    }
    world.evidence_item(stmt).map(|e| e.veracity)
}

/// Configuration of a generated evidence stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    /// Items emitted per simulation step.
    pub items_per_step: usize,
    /// Probability that an item is fabricated (pushes away from truth).
    #[serde(default)]
    pub misinformation_rate: f64,
    /// Probability that an item arrives as a coercive demand.
    #[serde(default)]
    pub coercive_rate: f64,
    /// Uniform range for evidential strength.
    #[serde(default = "default_strength_range")]
    pub strength: [f64; 2],
    /// Uniform range for vividness.
    #[serde(default = "default_vividness_range")]
    pub vividness: [f64; 2],
    /// Statements items may target; empty means all claims.
    #[serde(default)]
    pub targets: Vec<StatementId>,
    /// Kinds items are drawn from, uniformly.
    #[serde(default = "default_kinds")]
    pub kinds: Vec<EvidenceKind>,
}

fn default_strength_range() -> [f64; 2] {
    [0.3, 0.9]
}

fn default_vividness_range() -> [f64; 2] {
    [0.2, 1.0]
}

fn default_kinds() -> Vec<EvidenceKind> {
    vec![EvidenceKind::Testimony]
}

impl StreamConfig {
    /// Check rates and ranges.
    pub fn validate(&self, world: &World) -> Result<()> {
        in_unit("stream.misinformation_rate", self.misinformation_rate)?;
        in_unit("stream.coercive_rate", self.coercive_rate)?;
        for (name, r) in [("stream.strength", self.strength), ("stream.vividness", self.vividness)] {
            in_unit(name, r[0])?;
            in_unit(name, r[1])?;
            if r[0] > r[1] {
                return Err(Error::Config(format!("{name} range inverted: [{}, {}]", r[0], r[1])));
            }
        }
        if self.kinds.is_empty() {
            return Err(Error::Config("stream.kinds must not be empty".into()));
        }
        for t in &self.targets {
            if world.claim(t).is_none() && world.evidence_item(t).is_none() {
                return Err(Error::Config(format!("stream.targets references unknown statement {t}")));
            }
        }
        Ok(())
    }
}

fn uniform_in(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.gen_range(range[0]..range[1])
    }
}

/// Generate the ordered item sequence a simulation will feed to agents:
/// `steps × items_per_step` items, deterministic for fixed inputs.
///
/// Each item picks a target (uniform over `config.targets`, or all claims),
/// is fabricated with probability `misinformation_rate`, and gets a polarity
/// consistent with its veracity: veracious items push toward the target's
/// truth, fabricated ones away. Authors are drawn weighted by honesty for
/// veracious items and by dishonesty for fabricated ones. Item framing is
/// inherited from the claim the target chain roots in.
pub fn generate_evidence_stream(
    world: &World,
    config: &StreamConfig,
    steps: usize,
    seed: u64,
) -> Result<Vec<EvidenceItem>> {
    config.validate(world)?;
    if world.sources.is_empty() {
        return Err(Error::Config("world has no sources to author the stream".into()));
    }
    let targets: Vec<StatementId> = if config.targets.is_empty() {
        world.claims.iter().map(|c| c.id.clone()).collect()
    } else {
        config.targets.clone()
    };
    if targets.is_empty() {
        return Err(Error::Config("world has no claims for the stream to target".into()));
    }
    let mut rng = seeds::rng(seed, &[seeds::tag("stream")]);
    let total = steps * config.items_per_step;
    let mut items = Vec::with_capacity(total);
    for i in 0..total {
        let target = targets[rng.gen_range(0..targets.len())].clone();
        let veracious = rng.gen::<f64>() >= config.misinformation_rate;
        let target_truth = statement_truth(world, &target).unwrap_or(true);
        let polarity = match (veracious, target_truth) {
            (true, true) | (false, false) => Polarity::Supports,
            (true, false) | (false, true) => Polarity::Attacks,
        };
        let weights: Vec<f64> = world
            .sources
            .iter()
            .map(|s| if veracious { s.honesty } else { 1.0 - s.honesty })
            .collect();
        let author = pick_weighted(&mut rng, &weights).map(|ix| world.sources[ix].id.clone())
            .unwrap_or_else(|| world.sources[rng.gen_range(0..world.sources.len())].id.clone());
        let framing = world
            .root_claim_of(&target)
            .map(|c| c.framing)
            .unwrap_or_else(FramingVector::zero);
        let kind = config.kinds[rng.gen_range(0..config.kinds.len())];
        let coercive = rng.gen::<f64>() < config.coercive_rate;
        items.push(EvidenceItem {
            id: format!("stream_{i:05}"),
            author,
            target,
            polarity,
            strength: uniform_in(&mut rng, config.strength),
            vividness: uniform_in(&mut rng, config.vividness),
            recency: 0,
            framing,
            veracity: veracious,
            kind,
            coercive,
            reactance_mark: false,
        });
    }
    Ok(items)
}

/// Index of a weighted draw, or `None` when all weights vanish.
pub(crate) fn pick_weighted(rng: &mut impl Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut draw = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw < 0.0 {
            return Some(i);
        }
    }
    Some(weights.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moral::Foundation;

    pub(crate) fn tiny_world() -> World {
        let framing = FramingVector::from_pairs(&[(Foundation::Care, 0.6)]);
        World {
            domains: vec!["health".into()],
            claims: vec![
                Claim { id: "c_true".into(), text_tag: "true claim".into(), domain: "health".into(), framing, violation: 0.0 },
                Claim { id: "c_false".into(), text_tag: "false claim".into(), domain: "health".into(), framing, violation: 0.0 },
            ],
            facts: vec![
                TruthMakerFact { claim_id: "c_true".into(), truth_value: true, proxy_fidelity: 0.9 },
                TruthMakerFact { claim_id: "c_false".into(), truth_value: false, proxy_fidelity: 0.9 },
            ],
            sources: vec![
                Source { competence: [("health".to_string(), 0.9)].into(), ..Source::new("honest") },
                Source { honesty: 0.0, ..Source::new("liar") },
            ],
            evidence: vec![EvidenceItem {
                id: "e1".into(),
                author: "honest".into(),
                target: "c_true".into(),
                polarity: Polarity::Supports,
                strength: 0.8,
                vividness: 0.5,
                recency: 0,
                framing,
                veracity: true,
                kind: EvidenceKind::Statistic,
                coercive: false,
                reactance_mark: false,
            }],
        }
    }

    #[test]
    fn valid_world_passes() {
        tiny_world().validate().unwrap();
    }

    #[test]
    fn validation_names_the_offender() {
        let mut w = tiny_world();
        w.evidence[0].target = "missing".into();
        let err = w.validate().unwrap_err().to_string();
        assert!(err.contains("missing"), "{err}");

        let mut w = tiny_world();
        w.claims[0].violation = 1.5;
        assert!(w.validate().is_err());

        let mut w = tiny_world();
        w.facts.pop();
        let err = w.validate().unwrap_err().to_string();
        assert!(err.contains("c_false"), "{err}");
    }

    #[test]
    fn ground_truth_reads_facts() {
        let w = tiny_world();
        assert!(ground_truth(&w, "c_true").unwrap());
        assert!(!ground_truth(&w, "c_false").unwrap());
        assert!(ground_truth(&w, "nope").is_err());
    }

    #[test]
    fn root_claim_follows_chains() {
        let mut w = tiny_world();
        w.evidence.push(EvidenceItem { id: "e2".into(), target: "e1".into(), ..w.evidence[0].clone() });
        w.validate().unwrap();
        assert_eq!(w.root_claim_of("e2").unwrap().id, "c_true");
        assert_eq!(w.root_claim_of("c_false").unwrap().id, "c_false");
        assert!(w.root_claim_of("ghost").is_none());
    }

    fn stream_cfg(rate: f64) -> StreamConfig {
        StreamConfig {
            items_per_step: 10,
            misinformation_rate: rate,
            coercive_rate: 0.0,
            strength: default_strength_range(),
            vividness: default_vividness_range(),
            targets: vec![],
            kinds: default_kinds(),
        }
    }

    #[test]
    fn zero_misinformation_yields_only_veracious_items() {
        let w = tiny_world();
        let items = generate_evidence_stream(&w, &stream_cfg(0.0), 5, 42).unwrap();
        assert_eq!(items.len(), 50);
        assert!(items.iter().all(|e| e.veracity));
        // Veracious polarity tracks the target's truth.
        for e in &items {
            let truth = ground_truth(&w, &e.target).unwrap();
            assert_eq!(e.polarity == Polarity::Supports, truth);
        }
    }

    #[test]
    fn full_misinformation_yields_only_fabricated_items() {
        let w = tiny_world();
        let items = generate_evidence_stream(&w, &stream_cfg(1.0), 5, 42).unwrap();
        assert!(items.iter().all(|e| !e.veracity));
        for e in &items {
            let truth = ground_truth(&w, &e.target).unwrap();
            assert_eq!(e.polarity == Polarity::Attacks, truth);
        }
    }

    #[test]
    fn stream_is_deterministic_per_seed() {
        let w = tiny_world();
        let a = generate_evidence_stream(&w, &stream_cfg(0.3), 8, 7).unwrap();
        let b = generate_evidence_stream(&w, &stream_cfg(0.3), 8, 7).unwrap();
        let c = generate_evidence_stream(&w, &stream_cfg(0.3), 8, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_world_is_rejected() {
        let w = World::default();
        assert!(generate_evidence_stream(&w, &stream_cfg(0.0), 1, 1).is_err());
    }

    #[test]
    fn out_of_range_rate_is_rejected() {
        let w = tiny_world();
        assert!(generate_evidence_stream(&w, &stream_cfg(1.5), 1, 1).is_err());
    }

    #[test]
    fn dishonest_sources_author_the_misinformation() {
        let w = tiny_world();
        let items = generate_evidence_stream(&w, &stream_cfg(0.5), 40, 3).unwrap();
        assert!(items.iter().filter(|e| !e.veracity).all(|e| e.author == "liar"));
        assert!(items.iter().filter(|e| e.veracity).all(|e| e.author == "honest"));
    }
}
