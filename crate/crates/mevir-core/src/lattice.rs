//! Trust lattices: justification DAGs grounded in anchors.
//!
//! A [`TrustLattice`] holds one root claim and the statements an agent has
//! recruited to justify or contest it. Edges run from a child statement to
//! the statement it bears on, signed with a polarity. Chains terminate in
//! *anchors* — the five ways elaboration stops, in fixed priority order:
//!
//! 1. [`AnchorKind::PreTrusted`] — axiomatic for this agent, never demoted;
//! 2. [`AnchorKind::Belief`] — accepted unconditionally, expensive to flip;
//! 3. [`AnchorKind::AcceptedAuthority`] — "an accepted authority said so";
//! 4. [`AnchorKind::EvidenceExhaustion`] — nothing further bears on it;
//! 5. [`AnchorKind::ResourceExhaustion`] — the agent ran out of budget.
//!
//! [`evaluate`] runs gradual bottom-up scoring (anchors contribute
//! `base_weight × anchor trust`; internal nodes clamp the signed sum of
//! child contributions) and thresholds scores into accept/reject/undecided
//! labels. [`revise`] accommodates a new item under a minimal-change rule
//! whose cost model makes beliefs sticky and pre-trusted anchors immovable,
//! and archives defeated lattices so a retraction can reinstate them
//! exactly.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::world::{Claim, EvidenceItem, EvidenceKind, Polarity, Source, StatementId, World};
use crate::{seeds, Error, Result};

/// Why elaboration stopped at a node. Priority runs top to bottom: when
/// several kinds apply, the highest wins.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorKind {
    PreTrusted,
    Belief,
    AcceptedAuthority(String),
    EvidenceExhaustion,
    ResourceExhaustion,
}

/// Trust facts about a source, snapshotted into the lattice when an
/// authority anchor is created so evaluation stays a pure function of
/// (lattice, policy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuthorityInfo {
    /// Perceived reliability (competence in the root claim's domain).
    pub reliability: f64,
    /// Whether the source sits outside the evaluating agent's group.
    pub out_group: bool,
    /// Whether the source is flagged as a hypocrite.
    pub hypocritical: bool,
}

/// Acceptance thresholds and evidentiary standards an agent evaluates with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustPolicy {
    /// Sources below this reliability contribute no authority trust.
    pub source_reliability_threshold: f64,
    /// θ: scores ≥ θ are accepted, ≤ −θ rejected, else undecided.
    pub acceptance_threshold: f64,
    /// Multiplier on attacking contributions (paranoia dial).
    pub attack_weight_multiplier: f64,
    /// When set, out-group sources contribute no authority trust.
    pub out_group_rejection: bool,
    /// Per-kind edge-weight multipliers (absent kinds count as 1.0).
    pub evidence_standard: BTreeMap<EvidenceKind, f64>,
    /// Cost of flipping a Belief-anchored node during revision.
    pub belief_flip_cost: u64,
}

impl Default for TrustPolicy {
    fn default() -> Self {
        TrustPolicy {
            source_reliability_threshold: 0.2,
            acceptance_threshold: 0.5,
            attack_weight_multiplier: 1.0,
            out_group_rejection: false,
            evidence_standard: BTreeMap::new(),
            belief_flip_cost: 100,
        }
    }
}

impl TrustPolicy {
    /// Range-check thresholds and multipliers.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("policy.source_reliability_threshold", self.source_reliability_threshold),
            ("policy.acceptance_threshold", self.acceptance_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::Config(format!("{name} out of [0,1]: {v}")));
            }
        }
        if self.attack_weight_multiplier < 0.0 || self.attack_weight_multiplier.is_nan() {
            return Err(Error::Config(format!(
                "policy.attack_weight_multiplier must be non-negative: {}",
                self.attack_weight_multiplier
            )));
        }
        for (k, v) in &self.evidence_standard {
            if *v < 0.0 || v.is_nan() {
                return Err(Error::Config(format!("policy.evidence_standard[{k:?}] must be non-negative: {v}")));
            }
        }
        Ok(())
    }

    /// Edge-weight multiplier for an evidence kind.
    pub fn standard_multiplier(&self, kind: EvidenceKind) -> f64 {
        self.evidence_standard.get(&kind).copied().unwrap_or(1.0)
    }
}

/// Node and depth budget for one elaboration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationBudget {
    pub max_nodes: usize,
    pub max_depth: usize,
}

impl Default for EvaluationBudget {
    fn default() -> Self {
        EvaluationBudget { max_nodes: 32, max_depth: 4 }
    }
}

/// Remaining budget seen by [`classify_anchor`].
#[derive(Debug, Clone, Copy)]
pub struct BudgetState {
    pub nodes_remaining: usize,
    pub at_depth_limit: bool,
}

/// One statement in a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub statement: StatementId,
    /// Intrinsic weight in [0, 1]; multiplies anchor trust.
    pub base_weight: f64,
    pub anchor: Option<AnchorKind>,
}

/// A signed, weighted bearing from a child statement to its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub polarity: Polarity,
    pub weight: f64,
}

/// Verdict attached to a node after evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected,
    Undecided,
}

/// Verdict plus the gradual score that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceLabel {
    pub verdict: Verdict,
    pub score: f64,
}

impl AcceptanceLabel {
    /// Threshold a score: accepted at or above θ, rejected at or below −θ.
    pub fn from_score(score: f64, threshold: f64) -> AcceptanceLabel {
        let verdict = if score >= threshold {
            Verdict::Accepted
        } else if score <= -threshold {
            Verdict::Rejected
        } else {
            Verdict::Undecided
        };
        AcceptanceLabel { verdict, score }
    }
}

/// Evaluation result, keyed by statement id.
pub type Labels = BTreeMap<StatementId, AcceptanceLabel>;

/// A justification DAG for one root claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustLattice {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    root: usize,
    /// Source facts snapshotted for authority anchors.
    #[serde(default)]
    authorities: BTreeMap<String, AuthorityInfo>,
}

impl TrustLattice {
    /// A lattice containing only the (unanchored) root statement.
    pub fn new(root_statement: impl Into<StatementId>, base_weight: f64) -> TrustLattice {
        TrustLattice {
            nodes: vec![Node { statement: root_statement.into(), base_weight, anchor: None }],
            edges: Vec::new(),
            root: 0,
            authorities: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_statement(&self) -> &str {
        &self.nodes[self.root].statement
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, ix: usize) -> &Node {
        &self.nodes[ix]
    }

    /// Index of the node holding a statement, if present.
    pub fn index_of(&self, statement: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.statement == statement)
    }

    /// Snapshot of authority facts referenced by anchors.
    pub fn authorities(&self) -> &BTreeMap<String, AuthorityInfo> {
        &self.authorities
    }

    /// Add a statement node. Statements are unique within a lattice.
    pub fn add_node(
        &mut self,
        statement: impl Into<StatementId>,
        base_weight: f64,
        anchor: Option<AnchorKind>,
    ) -> Result<usize> {
        let statement = statement.into();
        if self.index_of(&statement).is_some() {
            return Err(Error::Config(format!("duplicate lattice statement: {statement}")));
        }
        if !(0.0..=1.0).contains(&base_weight) || base_weight.is_nan() {
            return Err(Error::OutOfRange { field: "base_weight", value: base_weight });
        }
        self.nodes.push(Node { statement, base_weight, anchor });
        Ok(self.nodes.len() - 1)
    }

    /// Set or replace a node's anchor.
    pub fn set_anchor(&mut self, ix: usize, anchor: Option<AnchorKind>) {
        self.nodes[ix].anchor = anchor;
    }

    /// Record the trust facts backing an authority anchor.
    pub fn record_authority(&mut self, source_id: impl Into<String>, info: AuthorityInfo) {
        self.authorities.insert(source_id.into(), info);
    }

    /// True when `to` is reachable from `from` along directed edges.
    fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut stack = vec![from];
        let mut seen = vec![false; self.nodes.len()];
        seen[from] = true;
        while let Some(n) = stack.pop() {
            for e in self.edges.iter().filter(|e| e.from == n) {
                if e.to == to {
                    return true;
                }
                if !seen[e.to] {
                    seen[e.to] = true;
                    stack.push(e.to);
                }
            }
        }
        false
    }

    /// Add a bearing from `from` onto `to`. Refuses edges that would close a
    /// directed cycle, keeping the lattice a DAG.
    pub fn add_edge(&mut self, from: usize, to: usize, polarity: Polarity, weight: f64) -> Result<()> {
        if from >= self.nodes.len() || to >= self.nodes.len() {
            return Err(Error::Config("edge endpoint out of range".into()));
        }
        if !(0.0..=1.0).contains(&weight) || weight.is_nan() {
            return Err(Error::OutOfRange { field: "edge weight", value: weight });
        }
        if self.reaches(to, from) {
            return Err(Error::CyclicLattice(self.nodes[from].statement.clone()));
        }
        self.edges.push(Edge { from, to, polarity, weight });
        Ok(())
    }

    /// Every childless node must carry an anchor (elaboration invariant).
    pub fn leaves_anchored(&self) -> bool {
        (0..self.nodes.len()).all(|ix| {
            self.edges.iter().any(|e| e.to == ix) || self.nodes[ix].anchor.is_some()
        })
    }

    /// JSON dump used by `--dump-lattices` and inspection tooling:
    /// `root`, `nodes` (id, base_weight, anchor), `edges` (from, to,
    /// polarity, weight), plus the authority snapshot when present.
    pub fn dump(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|n| {
                json!({
                    "id": n.statement,
                    "base_weight": n.base_weight,
                    "anchor": n.anchor,
                })
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                json!({
                    "from": self.nodes[e.from].statement,
                    "to": self.nodes[e.to].statement,
                    "polarity": e.polarity,
                    "weight": e.weight,
                })
            })
            .collect();
        let mut out = json!({
            "root": self.root_statement(),
            "nodes": nodes,
            "edges": edges,
        });
        if !self.authorities.is_empty() {
            out["authorities"] = serde_json::to_value(&self.authorities).unwrap();
        }
        out
    }
}

/// Trust contributed by an anchor under a policy: pre-trusted and belief
/// anchors are fully trusted; authority anchors contribute the source's
/// reliability unless thresholded out, hypocritical, or rejected as
/// out-group; exhaustion anchors contribute nothing.
pub fn anchor_trust(
    anchor: &AnchorKind,
    policy: &TrustPolicy,
    authorities: &BTreeMap<String, AuthorityInfo>,
) -> f64 {
    match anchor {
        AnchorKind::PreTrusted | AnchorKind::Belief => 1.0,
        AnchorKind::AcceptedAuthority(source_id) => {
            let info = match authorities.get(source_id) {
                Some(i) => *i,
                None => return 0.0,
            };
            if info.hypocritical {
                return 0.0;
            }
            if policy.out_group_rejection && info.out_group {
                return 0.0;
            }
            if info.reliability < policy.source_reliability_threshold {
                return 0.0;
            }
            info.reliability
        }
        AnchorKind::EvidenceExhaustion | AnchorKind::ResourceExhaustion => 0.0,
    }
}

/// Score every node bottom-up and threshold into labels.
///
/// A node's score is `clamp(anchor_contribution + Σ supports·w −
/// attack_multiplier · Σ attacks·w, −1, 1)`, where the anchor contribution
/// is `base_weight × anchor trust` (zero for unanchored nodes) and each
/// child contributes its own score times the edge weight. Scores depend
/// only on the DAG structure: contributions are summed in a canonical order
/// so node insertion order cannot perturb floating-point results. Errors on
/// cyclic input.
pub fn evaluate(lattice: &TrustLattice, policy: &TrustPolicy) -> Result<Labels> {
    policy.validate()?;
    let n = lattice.nodes.len();
    // Children grouped per target, in canonical (statement, polarity, weight) order.
    let mut children: Vec<Vec<&Edge>> = vec![Vec::new(); n];
    for e in &lattice.edges {
        children[e.to].push(e);
    }
    for list in &mut children {
        list.sort_by(|a, b| {
            let ka = (&lattice.nodes[a.from].statement, a.polarity, a.weight.to_bits());
            let kb = (&lattice.nodes[b.from].statement, b.polarity, b.weight.to_bits());
            ka.cmp(&kb)
        });
    }
    // Kahn order: a node is ready once all its children are scored.
    let mut pending: Vec<usize> = children.iter().map(|c| c.len()).collect();
    let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &lattice.edges {
        parents_of[e.from].push(e.to);
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(ix) = queue.pop_front() {
        order.push(ix);
        for &p in &parents_of[ix] {
            pending[p] -= 1;
            if pending[p] == 0 {
                queue.push_back(p);
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).find(|i| pending[*i] > 0).unwrap();
        return Err(Error::CyclicLattice(lattice.nodes[stuck].statement.clone()));
    }
    let mut scores = vec![0.0_f64; n];
    for &ix in &order {
        let node = &lattice.nodes[ix];
        let mut score = node
            .anchor
            .as_ref()
            .map(|a| node.base_weight * anchor_trust(a, policy, &lattice.authorities))
            .unwrap_or(0.0);
        for e in &children[ix] {
            let contribution = scores[e.from] * e.weight;
            match e.polarity {
                Polarity::Supports => score += contribution,
                Polarity::Attacks => score -= policy.attack_weight_multiplier * contribution,
            }
        }
        scores[ix] = score.clamp(-1.0, 1.0);
    }
    Ok(lattice
        .nodes
        .iter()
        .enumerate()
        .map(|(ix, node)| {
            (node.statement.clone(), AcceptanceLabel::from_score(scores[ix], policy.acceptance_threshold))
        })
        .collect())
}

/// What an agent exposes to elaboration and revision: its anchor sets, its
/// policy, and its bias-weighted evidence handling.
pub trait AgentContext {
    /// The agent's group tag (for out-group treatment of sources).
    fn group_tag(&self) -> &str;
    fn policy(&self) -> &TrustPolicy;
    fn pre_trusted(&self) -> &BTreeSet<StatementId>;
    fn beliefs(&self) -> &BTreeSet<StatementId>;
    fn accepted_authorities(&self) -> &BTreeSet<String>;
    /// Maximum revision cost the agent will absorb.
    fn stickiness_threshold(&self) -> u64;
    /// Per-node branching width before attentiveness scaling.
    fn branching(&self) -> usize;
    /// Items visible to the agent bearing on a statement, deterministic order.
    fn available_evidence(&self, world: &World, statement: &str) -> Vec<EvidenceItem>;
    /// Bias-weighted selection of up to `k` items (seeded).
    fn sample_evidence(&self, available: &[EvidenceItem], k: usize, seed: u64) -> Vec<EvidenceItem>;
    /// Reactance pass over an incoming item (seeded); may invert polarity.
    fn filter_item(&self, item: EvidenceItem, seed: u64) -> EvidenceItem;
}

/// Trust facts for treating `source` as an authority on `domain`, as seen
/// by an agent in `agent_group`.
pub fn authority_info_for(source: &Source, domain: &str, agent_group: &str) -> AuthorityInfo {
    AuthorityInfo {
        reliability: source.competence_in(domain),
        out_group: !source.group_tag.is_empty() && source.group_tag != agent_group,
        hypocritical: source.hypocrisy_flag,
    }
}

/// Decide whether elaboration stops at `statement`, and why.
///
/// Checks run in anchor priority order: pre-trusted, then belief, then
/// authority authorship, then evidence exhaustion (nothing bears on the
/// statement), then resource exhaustion (no node or depth budget left).
/// Returns `None` when the statement should be expanded instead.
pub fn classify_anchor(
    statement: &str,
    author: Option<&str>,
    evidence_available: bool,
    ctx: &dyn AgentContext,
    state: BudgetState,
) -> Option<AnchorKind> {
    if ctx.pre_trusted().contains(statement) {
        return Some(AnchorKind::PreTrusted);
    }
    if ctx.beliefs().contains(statement) {
        return Some(AnchorKind::Belief);
    }
    if let Some(author) = author {
        if ctx.accepted_authorities().contains(author) {
            return Some(AnchorKind::AcceptedAuthority(author.to_string()));
        }
    }
    if !evidence_available {
        return Some(AnchorKind::EvidenceExhaustion);
    }
    if state.nodes_remaining == 0 || state.at_depth_limit {
        return Some(AnchorKind::ResourceExhaustion);
    }
    None
}

/// Build a lattice for `claim` by breadth-first elaboration.
///
/// Each frontier statement is anchored by [`classify_anchor`] or expanded
/// with a bias-sampled, reactance-filtered subset of the evidence bearing on
/// it. Edge weights are `strength ×` the agent's evidentiary-standard
/// multiplier for the item's kind, clamped to [0, 1]. A statement sampled
/// again under another parent is reused (shared sub-chains); an edge that
/// would close a cycle is refused, and a statement left with no usable
/// children is anchored as evidence exhaustion (all candidates were
/// back-edges) or resource exhaustion (the budget blocked them).
pub fn elaborate(
    ctx: &dyn AgentContext,
    claim: &Claim,
    world: &World,
    budget: EvaluationBudget,
    seed: u64,
) -> Result<TrustLattice> {
    if budget.max_nodes == 0 {
        return Err(Error::Config("budget.max_nodes must be at least 1".into()));
    }
    let mut lattice = TrustLattice::new(claim.id.clone(), 1.0);
    let mut items: BTreeMap<usize, EvidenceItem> = BTreeMap::new(); // node → item that introduced it
    let mut nodes_used = 1;
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    queue.push_back((lattice.root(), 0));
    while let Some((ix, depth)) = queue.pop_front() {
        let statement = lattice.node(ix).statement.clone();
        let author_owned = items.get(&ix).map(|i| i.author.clone());
        let available = ctx.available_evidence(world, &statement);
        // Candidates that would close a cycle are not usable evidence here.
        let usable: Vec<&EvidenceItem> = available
            .iter()
            .filter(|item| match lattice.index_of(&item.id) {
                Some(existing) => !lattice.reaches(ix, existing),
                None => item.id != statement,
            })
            .collect();
        let state = BudgetState {
            nodes_remaining: budget.max_nodes - nodes_used,
            at_depth_limit: depth >= budget.max_depth,
        };
        if let Some(anchor) =
            classify_anchor(&statement, author_owned.as_deref(), !usable.is_empty(), ctx, state)
        {
            if let AnchorKind::AcceptedAuthority(src) = &anchor {
                if let Some(source) = world.source(src) {
                    lattice.record_authority(src.clone(), authority_info_for(source, &claim.domain, ctx.group_tag()));
                }
            }
            lattice.set_anchor(ix, Some(anchor));
            continue;
        }
        let usable_owned: Vec<EvidenceItem> = usable.into_iter().cloned().collect();
        let sampled = ctx.sample_evidence(
            &usable_owned,
            ctx.branching(),
            seeds::derive(seed, &[seeds::tag(&statement)]),
        );
        let mut added = 0usize;
        let mut budget_blocked = false;
        for item in sampled {
            let item_seed = seeds::derive(seed, &[seeds::tag(&item.id)]);
            let item = ctx.filter_item(item, item_seed);
            let weight = (item.strength * ctx.policy().standard_multiplier(item.kind)).clamp(0.0, 1.0);
            match lattice.index_of(&item.id) {
                Some(existing) => {
                    if lattice.add_edge(existing, ix, item.polarity, weight).is_ok() {
                        added += 1;
                    }
                }
                None => {
                    if nodes_used >= budget.max_nodes {
                        budget_blocked = true;
                        continue;
                    }
                    let child = lattice.add_node(item.id.clone(), 1.0, None)?;
                    lattice.add_edge(child, ix, item.polarity, weight)?;
                    nodes_used += 1;
                    queue.push_back((child, depth + 1));
                    items.insert(child, item);
                    added += 1;
                }
            }
        }
        if added == 0 {
            // Expansion produced nothing usable; anchor by what blocked it.
            let anchor = if budget_blocked {
                AnchorKind::ResourceExhaustion
            } else {
                AnchorKind::EvidenceExhaustion
            };
            lattice.set_anchor(ix, Some(anchor));
        }
    }
    Ok(lattice)
}

/// Cost of a revision: a flip count, or impossible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RevisionCost {
    Finite(u64),
    Infinite,
}

impl RevisionCost {
    /// True when the cost is finite and within a threshold.
    pub fn within(&self, threshold: u64) -> bool {
        matches!(self, RevisionCost::Finite(c) if *c <= threshold)
    }
}

/// A lattice and its insertion point for a new item, before re-evaluation.
fn with_item(
    lattice: &TrustLattice,
    item: &EvidenceItem,
    anchor: AnchorKind,
    authority: Option<(String, AuthorityInfo)>,
    policy: &TrustPolicy,
) -> Result<TrustLattice> {
    let target_ix = lattice
        .index_of(&item.target)
        .ok_or_else(|| Error::UnknownId { kind: "lattice statement", id: item.target.clone() })?;
    let mut candidate = lattice.clone();
    if candidate.index_of(&item.id).is_some() {
        // Already accommodated; nothing to insert.
        return Ok(candidate);
    }
    let weight = (item.strength * policy.standard_multiplier(item.kind)).clamp(0.0, 1.0);
    let ix = candidate.add_node(item.id.clone(), 1.0, Some(anchor))?;
    candidate.add_edge(ix, target_ix, item.polarity, weight)?;
    if let Some((src, info)) = authority {
        candidate.record_authority(src, info);
    }
    Ok(candidate)
}

fn flip_cost(lattice: &TrustLattice, old: &Labels, new: &Labels, policy: &TrustPolicy) -> RevisionCost {
    let mut cost = 0u64;
    for node in lattice.nodes() {
        let before = old.get(&node.statement).map(|l| l.verdict);
        let after = new.get(&node.statement).map(|l| l.verdict);
        if before == after {
            continue;
        }
        match node.anchor {
            Some(AnchorKind::PreTrusted) => return RevisionCost::Infinite,
            Some(AnchorKind::Belief) => cost += policy.belief_flip_cost,
            _ => cost += 1,
        }
    }
    RevisionCost::Finite(cost)
}

/// Minimal cost of consistently accommodating `new_item`.
///
/// The item enters as a fully trusted observation (Belief anchor) bearing on
/// its target; gradual semantics then admits exactly one consistent
/// post-insertion labeling, so the minimal flip set is the label diff.
/// Flipping an unanchored or exhaustion-anchored node costs 1, a
/// Belief-anchored node costs `policy.belief_flip_cost`, and a PreTrusted
/// anchor cannot be demoted at any price (infinite). The item must target a
/// statement present in the lattice.
pub fn revision_cost(
    lattice: &TrustLattice,
    labels: &Labels,
    new_item: &EvidenceItem,
    policy: &TrustPolicy,
) -> Result<RevisionCost> {
    let candidate = with_item(lattice, new_item, AnchorKind::Belief, None, policy)?;
    let new_labels = evaluate(&candidate, policy)?;
    Ok(flip_cost(lattice, labels, &new_labels, policy))
}

/// Outcome of accommodating one incoming item.
#[derive(Debug, Clone, PartialEq)]
pub enum RevisionOutcome {
    /// The flip set was affordable; the lattice absorbed the item.
    AcceptedRevision {
        lattice: TrustLattice,
        labels: Labels,
        cost: u64,
        flipped: Vec<StatementId>,
    },
    /// The flip set exceeded the agent's stickiness threshold; state unchanged.
    RejectedCorrection { cost: RevisionCost },
    /// The item defeated the root outright; the old lattice was archived and
    /// the post-insertion lattice swapped in.
    ArchivedSwap { lattice: TrustLattice, labels: Labels },
}

/// One archived lattice, with the labels it carried and the item that
/// defeated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedLattice {
    pub lattice: TrustLattice,
    pub labels: Labels,
    pub defeated_by: StatementId,
}

/// Stack of defeated lattices, most recent on top.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatticeArchive(pub Vec<ArchivedLattice>);

impl LatticeArchive {
    pub fn push(&mut self, entry: ArchivedLattice) {
        self.0.push(entry);
    }

    pub fn top(&self) -> Option<&ArchivedLattice> {
        self.0.last()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Anchor an incoming item the way elaboration would: pre-trusted and
/// believed statements keep their standing, authority authorship is honored
/// (with trust facts snapshotted), and anything the agent cannot ground
/// enters as evidence exhaustion — recorded, but carrying no trust.
fn classify_incoming(
    item: &EvidenceItem,
    ctx: &dyn AgentContext,
    world: &World,
    lattice: &TrustLattice,
) -> (AnchorKind, Option<(String, AuthorityInfo)>) {
    if ctx.pre_trusted().contains(&item.id) {
        return (AnchorKind::PreTrusted, None);
    }
    if ctx.beliefs().contains(&item.id) {
        return (AnchorKind::Belief, None);
    }
    if ctx.accepted_authorities().contains(&item.author) {
        if let Some(source) = world.source(&item.author) {
            let domain = world
                .root_claim_of(lattice.root_statement())
                .map(|c| c.domain.clone())
                .unwrap_or_default();
            let info = authority_info_for(source, &domain, ctx.group_tag());
            return (AnchorKind::AcceptedAuthority(item.author.clone()), Some((item.author.clone(), info)));
        }
    }
    (AnchorKind::EvidenceExhaustion, None)
}

/// Accommodate `new_item` under the minimal-change rule.
///
/// The unique consistent post-insertion labeling is computed and its flip
/// set costed (ties among minimum-cost sets cannot arise under gradual
/// semantics, so the farthest-from-root/lowest-id preference is moot). If
/// the item flips the root from accepted to rejected, the old lattice is
/// pushed onto the archive with the defeating item id and the new lattice
/// swapped in. Otherwise the revision is applied when its cost is within
/// the agent's stickiness threshold and rejected when it is not.
pub fn revise(
    ctx: &dyn AgentContext,
    lattice: &TrustLattice,
    new_item: &EvidenceItem,
    policy: &TrustPolicy,
    world: &World,
    archive: &mut LatticeArchive,
) -> Result<RevisionOutcome> {
    let old_labels = evaluate(lattice, policy)?;
    let (anchor, authority) = classify_incoming(new_item, ctx, world, lattice);
    let candidate = with_item(lattice, new_item, anchor, authority, policy)?;
    let new_labels = evaluate(&candidate, policy)?;

    let root_stmt = lattice.root_statement();
    let root_before = old_labels.get(root_stmt).map(|l| l.verdict);
    let root_after = new_labels.get(root_stmt).map(|l| l.verdict);
    if root_before == Some(Verdict::Accepted) && root_after == Some(Verdict::Rejected) {
        archive.push(ArchivedLattice {
            lattice: lattice.clone(),
            labels: old_labels,
            defeated_by: new_item.id.clone(),
        });
        return Ok(RevisionOutcome::ArchivedSwap { lattice: candidate, labels: new_labels });
    }

    let cost = flip_cost(lattice, &old_labels, &new_labels, policy);
    if cost.within(ctx.stickiness_threshold()) {
        let flipped: Vec<StatementId> = lattice
            .nodes()
            .iter()
            .filter(|n| {
                old_labels.get(&n.statement).map(|l| l.verdict)
                    != new_labels.get(&n.statement).map(|l| l.verdict)
            })
            .map(|n| n.statement.clone())
            .collect();
        let cost = match cost {
            RevisionCost::Finite(c) => c,
            RevisionCost::Infinite => unreachable!("infinite cost is never within a threshold"),
        };
        Ok(RevisionOutcome::AcceptedRevision { lattice: candidate, labels: new_labels, cost, flipped })
    } else {
        Ok(RevisionOutcome::RejectedCorrection { cost })
    }
}

/// Pop and return the archived lattice defeated by `retracted_item_id`, if
/// it is on top of the archive. Its stored labels reproduce exactly under
/// re-evaluation with the same policy.
pub fn reinstate(archive: &mut LatticeArchive, retracted_item_id: &str) -> Option<ArchivedLattice> {
    if archive.top().map(|e| e.defeated_by.as_str()) == Some(retracted_item_id) {
        archive.0.pop()
    } else {
        None
    }
}
