//! Narrative profiling: lexicon-based foundation scoring, tribe matching,
//! and four-level document reports.
//!
//! The pipeline is deliberately mechanical: a [`Lexicon`] maps lowercased
//! terms (single tokens or multi-token phrases) to foundation weights;
//! [`score_foundations`] sums the matched contributions into a raw score
//! vector and a normalized [`EmftProfile`]; [`match_tribe`] ranks bundled
//! [`TribeTemplate`]s by L1 distance; and [`analyze`] wraps everything in a
//! [`ProfileReport`] whose first three levels are cue-term heuristics
//! (narrative style, trust-anchor hints, bias flags). Every score is
//! traceable to the listed hits, and no statistical language model is
//! involved anywhere.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::lattice::AnchorKind;
use crate::moral::{
    EmftProfile, Foundation, FramingVector, MacDomain, MacProfile, FOUNDATIONS, FOUNDATION_COUNT,
};
use crate::{Error, Result};

/// Term → foundation-weight table, parsed from a TSV file.
///
/// Terms are matched case-insensitively; multi-token phrases take
/// precedence over their constituent tokens (longest match first). A term
/// appearing on several rows accumulates all its contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, [f64; FOUNDATION_COUNT]>,
    rows: usize,
    max_phrase_tokens: usize,
}

impl Lexicon {
    /// Parse TSV content with columns `term`, `foundation`, `weight`.
    ///
    /// Blank lines and `#` comments are skipped, as is an optional literal
    /// header row. Foundation names are the canonical lowercase ones;
    /// weights must be finite and non-negative. Errors name the offending
    /// line.
    pub fn parse(tsv: &str) -> Result<Lexicon> {
        let mut entries: BTreeMap<String, [f64; FOUNDATION_COUNT]> = BTreeMap::new();
        let mut rows = 0;
        let mut max_phrase_tokens = 1;
        for (number, line) in tsv.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Config(format!(
                    "lexicon line {}: expected 3 tab-separated columns, found {}",
                    number + 1,
                    cols.len()
                )));
            }
            if cols == ["term", "foundation", "weight"] {
                continue; // header
            }
            let term = cols[0].to_lowercase();
            let term = term.split_whitespace().collect::<Vec<_>>().join(" ");
            if term.is_empty() {
                return Err(Error::Config(format!("lexicon line {}: empty term", number + 1)));
            }
            let Some(foundation) = Foundation::parse(cols[1]) else {
                return Err(Error::Config(format!(
                    "lexicon line {}: unknown foundation {:?}",
                    number + 1,
                    cols[1]
                )));
            };
            let weight: f64 = cols[2].parse().map_err(|_| {
                Error::Config(format!("lexicon line {}: bad weight {:?}", number + 1, cols[2]))
            })?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::Config(format!(
                    "lexicon line {}: weight must be finite and non-negative, got {weight}",
                    number + 1
                )));
            }
            max_phrase_tokens = max_phrase_tokens.max(term.split(' ').count());
            entries.entry(term).or_insert([0.0; FOUNDATION_COUNT])[foundation.index()] += weight;
            rows += 1;
        }
        Ok(Lexicon { entries, rows, max_phrase_tokens })
    }

    /// Read and parse a lexicon file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Lexicon> {
        let text = std::fs::read_to_string(path)?;
        Lexicon::parse(&text)
    }

    /// The lexicon shipped with the crate (~200 entries drawn from the
    /// moral-foundations-dictionary tradition).
    pub fn bundled() -> Lexicon {
        Lexicon::parse(include_str!("../data/lexicon.tsv")).expect("bundled lexicon parses")
    }

    /// Number of data rows parsed (duplicate terms still count).
    pub fn row_count(&self) -> usize {
        self.rows
    }

    /// Number of distinct terms.
    pub fn term_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Contribution vector for an exact lowercased term.
    pub fn contribution(&self, term: &str) -> Option<&[f64; FOUNDATION_COUNT]> {
        self.entries.get(term)
    }
}

/// Lowercase a document and split it into alphanumeric tokens
/// (word-internal apostrophes survive; all other punctuation separates).
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|s| s.trim_matches('\'').to_lowercase())
        .filter(|s| !s.is_empty())
        .collect()
}

/// One matched lexicon term, aggregated over the document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermHit {
    pub term: String,
    pub foundation: Foundation,
    /// Weight contributed per occurrence.
    pub weight: f64,
    /// Occurrences in the document.
    pub count: u64,
}

/// Greedy longest-phrase-first matching: at each position the longest
/// known phrase wins and consumes its tokens; unknown tokens are skipped.
fn match_counts(tokens: &[String], lexicon: &Lexicon) -> BTreeMap<String, u64> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = lexicon.max_phrase_tokens.min(tokens.len() - i);
        let mut advanced = false;
        for len in (1..=longest).rev() {
            let phrase = tokens[i..i + len].join(" ");
            if lexicon.entries.contains_key(&phrase) {
                *counts.entry(phrase).or_insert(0) += 1;
                i += len;
                advanced = true;
                break;
            }
        }
        if !advanced {
            i += 1;
        }
    }
    counts
}

/// Score a token stream against a lexicon, keeping the hits that produced
/// each score.
///
/// Returns the per-foundation raw weighted sums (as a [`FramingVector`];
/// components are unnormalized totals) and, when any term matched, the
/// sums normalized into an [`EmftProfile`].
pub fn score_with_hits(
    tokens: &[String],
    lexicon: &Lexicon,
) -> Result<(Vec<TermHit>, FramingVector, Option<EmftProfile>)> {
    if lexicon.is_empty() {
        return Err(Error::Config("lexicon is empty".into()));
    }
    let counts = match_counts(tokens, lexicon);
    let mut hits = Vec::new();
    let mut scores = [0.0; FOUNDATION_COUNT];
    for (term, count) in counts {
        let contribution = lexicon.entries[&term];
        for f in FOUNDATIONS {
            let weight = contribution[f.index()];
            if weight > 0.0 {
                scores[f.index()] += weight * count as f64;
                hits.push(TermHit { term: term.clone(), foundation: f, weight, count });
            }
        }
    }
    let total: f64 = scores.iter().sum();
    let profile = if total > 0.0 { Some(EmftProfile::new(scores)?) } else { None };
    Ok((hits, FramingVector(scores), profile))
}

/// [`score_with_hits`] without the audit trail.
pub fn score_foundations(
    tokens: &[String],
    lexicon: &Lexicon,
) -> Result<(FramingVector, Option<EmftProfile>)> {
    let (_, scores, profile) = score_with_hits(tokens, lexicon)?;
    Ok((scores, profile))
}

/// A canned tribe: moral signature plus descriptive tags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TribeTemplate {
    pub name: String,
    pub emft: EmftProfile,
    pub mac: MacProfile,
    /// Anchor kinds this tribe's narratives lean on.
    pub anchors: Vec<AnchorKind>,
    /// Descriptive tags for the voices the tribe treats as authoritative.
    pub authorities: Vec<String>,
    /// Descriptive tags for its typical emotional register.
    pub strategies: Vec<String>,
}

fn template(
    name: &str,
    emft: &[(Foundation, f64)],
    mac: &[MacDomain],
    anchors: Vec<AnchorKind>,
    authorities: &[&str],
    strategies: &[&str],
) -> TribeTemplate {
    TribeTemplate {
        name: name.into(),
        emft: EmftProfile::from_pairs(emft).expect("template profile is valid"),
        mac: MacProfile::over(mac),
        anchors,
        authorities: authorities.iter().map(|s| s.to_string()).collect(),
        strategies: strategies.iter().map(|s| s.to_string()).collect(),
    }
}

/// The six tribes bundled with the crate.
pub fn bundled_templates() -> Vec<TribeTemplate> {
    use Foundation::*;
    use MacDomain::*;
    vec![
        template(
            "sovereignty_purity",
            &[(Care, 0.15), (Liberty, 0.50), (Purity, 0.35)],
            &[Property, Deference],
            vec![AnchorKind::Belief],
            &["dissident clinicians", "independent researchers"],
            &["contamination disgust", "anger at coercion", "defiant pride"],
        ),
        template(
            "community_health",
            &[(Care, 0.50), (FairnessEquity, 0.30), (Loyalty, 0.05), (Authority, 0.15)],
            &[Kin, Group, Reciprocity],
            vec![AnchorKind::AcceptedAuthority("public health institutions".into())],
            &["health agencies", "medical associations"],
            &["protective concern", "shared responsibility"],
        ),
        template(
            "economic_liberty",
            &[(FairnessProportionality, 0.25), (Liberty, 0.45), (Loyalty, 0.30)],
            &[Group, Fairness, Property],
            vec![AnchorKind::AcceptedAuthority("market commentators".into()), AnchorKind::Belief],
            &["industry analysts", "business leaders"],
            &["resentment of regulation", "national pride in enterprise"],
        ),
        template(
            "global_responsibility",
            &[(Care, 0.35), (FairnessEquity, 0.25), (Loyalty, 0.10), (Authority, 0.30)],
            &[Kin, Group, Reciprocity, Fairness],
            vec![AnchorKind::AcceptedAuthority("scientific assessment bodies".into())],
            &["research consortia", "international panels"],
            &["urgency", "duty to those not yet born"],
        ),
        template(
            "doomer",
            &[(Care, 0.40), (Liberty, 0.25), (Purity, 0.35)],
            &[Kin, Group],
            vec![AnchorKind::Belief, AnchorKind::EvidenceExhaustion],
            &["safety researchers", "whistleblowers"],
            &["dread", "catastrophic urgency"],
        ),
        template(
            "accelerationist",
            &[
                (Care, 0.25),
                (FairnessEquity, 0.15),
                (FairnessProportionality, 0.15),
                (Liberty, 0.30),
                (Authority, 0.15),
            ],
            &[Group, Heroism],
            vec![AnchorKind::AcceptedAuthority("frontier builders".into())],
            &["technologists", "founders"],
            &["heroic optimism", "impatience with gatekeepers"],
        ),
    ]
}

/// One row of a tribe ranking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TribeMatch {
    pub name: String,
    /// L1 distance between the document profile and the template profile.
    pub distance: f64,
}

/// Rank templates by L1 distance to `profile`, ascending; ties break by
/// name, so the ranking is a total order.
pub fn match_tribe(profile: &EmftProfile, templates: &[TribeTemplate]) -> Result<Vec<TribeMatch>> {
    if templates.is_empty() {
        return Err(Error::EmptyCandidates("tribe templates"));
    }
    let mut matches: Vec<TribeMatch> = templates
        .iter()
        .map(|t| {
            let distance: f64 =
                profile.0.iter().zip(t.emft.0.iter()).map(|(a, b)| (a - b).abs()).sum();
            TribeMatch { name: t.name.clone(), distance }
        })
        .collect();
    matches.sort_by(|a, b| {
        a.distance.partial_cmp(&b.distance).unwrap().then_with(|| a.name.cmp(&b.name))
    });
    Ok(matches)
}

/// A labeled set of cue terms (single tokens or phrases).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CueList {
    pub label: String,
    pub terms: Vec<String>,
}

/// Cue terms that hint at a trust-anchor kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorCue {
    pub anchor: AnchorKind,
    pub terms: Vec<String>,
}

/// Cue-term rules for report levels 1–3. These are transparent keyword
/// heuristics, not inference; reports carry every rule that fired.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CueRules {
    /// Level 1: narrative-style markers (anecdote vs statistic).
    pub narrative: Vec<CueList>,
    /// Level 2: authority-citation and conviction markers.
    pub anchors: Vec<AnchorCue>,
    /// Level 3: bias markers (crowd appeal, vividness, certainty...).
    pub biases: Vec<CueList>,
}

fn cue(label: &str, terms: &[&str]) -> CueList {
    CueList { label: label.into(), terms: terms.iter().map(|s| s.to_string()).collect() }
}

impl CueRules {
    /// The rules shipped with the crate.
    pub fn default_rules() -> CueRules {
        CueRules {
            narrative: vec![
                cue(
                    "anecdote",
                    &[
                        "story",
                        "my cousin",
                        "my neighbor",
                        "my friend",
                        "i heard",
                        "i met",
                        "happened to me",
                        "i know someone",
                    ],
                ),
                cue(
                    "statistic",
                    &[
                        "percent",
                        "data",
                        "dataset",
                        "study",
                        "studies",
                        "trial",
                        "trials",
                        "survey",
                        "rate",
                        "average",
                        "statistics",
                    ],
                ),
            ],
            anchors: vec![
                AnchorCue {
                    anchor: AnchorKind::AcceptedAuthority("cited expertise".into()),
                    terms: [
                        "according to",
                        "experts",
                        "scientists",
                        "officials",
                        "researchers",
                        "consensus",
                        "guidelines",
                        "peer reviewed",
                    ]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                },
                AnchorCue {
                    anchor: AnchorKind::Belief,
                    terms: [
                        "i believe",
                        "in my heart",
                        "everyone knows",
                        "common sense",
                        "obviously",
                        "self evident",
                    ]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                },
                AnchorCue {
                    anchor: AnchorKind::PreTrusted,
                    terms: ["scripture", "the constitution", "founding", "sacred text"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                },
            ],
            biases: vec![
                cue(
                    "bandwagon",
                    &["everyone", "everybody", "millions of people", "most people", "join us"],
                ),
                cue("availability", &["shocking", "horrifying", "imagine", "picture this"]),
                cue(
                    "overconfidence",
                    &["certainly", "undeniable", "no doubt", "beyond question", "guaranteed"],
                ),
                cue("reactance", &["they can't make us", "shoved down", "dictate to us"]),
            ],
        }
    }
}

/// One cue rule that fired.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CueHit {
    pub label: String,
    pub term: String,
    pub count: u64,
}

/// One anchor cue that fired.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorHit {
    pub anchor: AnchorKind,
    pub term: String,
    pub count: u64,
}

/// Count occurrences of each cue term (greedy phrase matching, like the
/// lexicon pass but over an independent term set).
fn count_cue_terms(tokens: &[String], terms: &[String]) -> Vec<(String, u64)> {
    let mut set: BTreeMap<String, [f64; FOUNDATION_COUNT]> = BTreeMap::new();
    let mut max_tokens = 1;
    for t in terms {
        let t = t.to_lowercase();
        max_tokens = max_tokens.max(t.split(' ').count());
        set.insert(t, [0.0; FOUNDATION_COUNT]);
    }
    let mini = Lexicon { entries: set, rows: terms.len(), max_phrase_tokens: max_tokens };
    match_counts(tokens, &mini).into_iter().collect()
}

/// Level-1 notes: detected framing and narrative-style cues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FramingNotes {
    /// Canonical name of the highest-scoring foundation, if any matched.
    pub dominant_foundation: Option<String>,
    pub narrative_cues: Vec<CueHit>,
    /// Reminder that these notes are keyword heuristics.
    pub method: String,
}

/// Level-2 notes: trust-anchor hints from citation/conviction cues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorNotes {
    pub cues: Vec<AnchorHit>,
}

/// Level-3 notes: bias-pattern flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasNotes {
    pub flags: Vec<CueHit>,
}

/// Level-4 profile: scores, hits, normalized profile, and tribe ranking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoralProfileNotes {
    pub hits: Vec<TermHit>,
    /// Raw per-foundation weighted sums.
    pub scores: FramingVector,
    pub profile: Option<EmftProfile>,
    pub matches: Vec<TribeMatch>,
    /// Set when no lexicon term matched; the profile is then empty.
    pub no_signal: bool,
}

/// The full four-level narrative report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub level1: FramingNotes,
    pub level2: AnchorNotes,
    pub level3: BiasNotes,
    pub level4: MoralProfileNotes,
}

/// Run the whole pipeline over one document.
///
/// The document must contain at least one non-whitespace character.
/// Levels 1–3 list every cue rule that fired; level 4 embeds
/// [`score_with_hits`] and [`match_tribe`] output (the ranking is empty and
/// `no_signal` is set when nothing matched).
pub fn analyze(
    document: &str,
    lexicon: &Lexicon,
    templates: &[TribeTemplate],
    cues: &CueRules,
) -> Result<ProfileReport> {
    if document.trim().is_empty() {
        return Err(Error::Config("document is empty".into()));
    }
    let tokens = tokenize(document);
    let (hits, scores, profile) = score_with_hits(&tokens, lexicon)?;
    let matches = match &profile {
        Some(p) => match_tribe(p, templates)?,
        None => Vec::new(),
    };
    let dominant_foundation = FOUNDATIONS
        .iter()
        .copied()
        .filter(|f| scores.get(*f) > 0.0)
        .max_by(|a, b| scores.get(*a).partial_cmp(&scores.get(*b)).unwrap())
        .map(|f| f.name().to_string());

    let mut narrative_cues = Vec::new();
    for list in &cues.narrative {
        for (term, count) in count_cue_terms(&tokens, &list.terms) {
            narrative_cues.push(CueHit { label: list.label.clone(), term, count });
        }
    }
    let mut anchor_cues = Vec::new();
    for rule in &cues.anchors {
        for (term, count) in count_cue_terms(&tokens, &rule.terms) {
            anchor_cues.push(AnchorHit { anchor: rule.anchor.clone(), term, count });
        }
    }
    let mut bias_flags = Vec::new();
    for list in &cues.biases {
        for (term, count) in count_cue_terms(&tokens, &list.terms) {
            bias_flags.push(CueHit { label: list.label.clone(), term, count });
        }
    }

    let no_signal = profile.is_none();
    Ok(ProfileReport {
        level1: FramingNotes {
            dominant_foundation,
            narrative_cues,
            method: "keyword-cue heuristic".into(),
        },
        level2: AnchorNotes { cues: anchor_cues },
        level3: BiasNotes { flags: bias_flags },
        level4: MoralProfileNotes { hits, scores, profile, matches, no_signal },
    })
}

impl ProfileReport {
    /// Human-readable rendering (the CLI's text format).
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "narrative profile");
        let _ = writeln!(out, "  level 1 - framing ({})", self.level1.method);
        match &self.level1.dominant_foundation {
            Some(f) => {
                let _ = writeln!(out, "    dominant foundation: {f}");
            }
            None => {
                let _ = writeln!(out, "    dominant foundation: none");
            }
        }
        for c in &self.level1.narrative_cues {
            let _ = writeln!(out, "    {} cue: {:?} x{}", c.label, c.term, c.count);
        }
        let _ = writeln!(out, "  level 2 - trust anchor hints");
        if self.level2.cues.is_empty() {
            let _ = writeln!(out, "    none");
        }
        for c in &self.level2.cues {
            let _ = writeln!(out, "    {:?} -> {:?} x{}", c.term, c.anchor, c.count);
        }
        let _ = writeln!(out, "  level 3 - bias flags");
        if self.level3.flags.is_empty() {
            let _ = writeln!(out, "    none");
        }
        for c in &self.level3.flags {
            let _ = writeln!(out, "    {}: {:?} x{}", c.label, c.term, c.count);
        }
        let _ = writeln!(out, "  level 4 - moral profile");
        if self.level4.no_signal {
            let _ = writeln!(out, "    no signal: no lexicon term matched");
            return out;
        }
        let _ = writeln!(out, "    foundation scores:");
        for f in FOUNDATIONS {
            let v = self.level4.scores.get(f);
            if v > 0.0 {
                let _ = writeln!(out, "      {:<24} {:.2}", f.name(), v);
            }
        }
        let _ = writeln!(out, "    tribe matches (L1 distance, best first):");
        for (rank, m) in self.level4.matches.iter().enumerate() {
            let _ = writeln!(out, "      {}. {:<24} {:.4}", rank + 1, m.name, m.distance);
        }
        let _ = writeln!(out, "    lexicon hits:");
        for h in &self.level4.hits {
            let _ = writeln!(
                out,
                "      {:?} x{} -> {} {:.2}",
                h.term,
                h.count,
                h.foundation.name(),
                h.weight
            );
        }
        out
    }
}
