//! Moral profiles and game-theoretic primitives.
//!
//! Two coordinate systems describe an agent's moral outlook:
//!
//! - eight cooperation *domains* ([`MacDomain`]) rooted in recurrent social
//!   games (kin care, mutualism, exchange, contest, division, possession,
//!   pathogen avoidance, hero displays);
//! - seven intuitive *foundations* ([`Foundation`]) that messages can appeal
//!   to (care, the two fairness facets, liberty, loyalty, authority, purity).
//!
//! A row-stochastic matrix ([`MacEmftMap`]) translates domain weights into
//! foundation weights. Game primitives ([`hamilton_cooperate`],
//! [`hawk_dove_ess`]) pin the domain layer to evolutionary ground truth, and
//! [`frame_salience`] / [`moral_alarm`] connect the foundation layer to
//! message framing. [`profile_distance`] compares whole agents layer by
//! layer.

use serde::{Deserialize, Serialize};

use crate::world::Source;
use crate::{Error, Result};

/// Number of intuitive foundations.
pub const FOUNDATION_COUNT: usize = 7;
/// Number of cooperation domains.
pub const MAC_DOMAIN_COUNT: usize = 8;

/// Intuitive moral foundations, in the fixed order used by every
/// seven-element vector in the crate (framing vectors, lexicon columns,
/// profile arrays).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Foundation {
    Care,
    FairnessEquity,
    FairnessProportionality,
    Liberty,
    Loyalty,
    Authority,
    Purity,
}

/// All foundations in canonical order.
pub const FOUNDATIONS: [Foundation; FOUNDATION_COUNT] = [
    Foundation::Care,
    Foundation::FairnessEquity,
    Foundation::FairnessProportionality,
    Foundation::Liberty,
    Foundation::Loyalty,
    Foundation::Authority,
    Foundation::Purity,
];

impl Foundation {
    /// Position in the canonical order.
    pub fn index(self) -> usize {
        FOUNDATIONS.iter().position(|f| *f == self).unwrap()
    }

    /// Canonical lowercase name (matches serialization and lexicon files).
    pub fn name(self) -> &'static str {
        match self {
            Foundation::Care => "care",
            Foundation::FairnessEquity => "fairness_equity",
            Foundation::FairnessProportionality => "fairness_proportionality",
            Foundation::Liberty => "liberty",
            Foundation::Loyalty => "loyalty",
            Foundation::Authority => "authority",
            Foundation::Purity => "purity",
        }
    }

    /// Parse a canonical name.
    pub fn parse(s: &str) -> Option<Foundation> {
        FOUNDATIONS.iter().copied().find(|f| f.name() == s)
    }
}

/// Cooperation domains, in the fixed order used by eight-element vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacDomain {
    Kin,
    Group,
    Reciprocity,
    Heroism,
    Deference,
    Fairness,
    Property,
    Pathogen,
}

/// All domains in canonical order.
pub const MAC_DOMAINS: [MacDomain; MAC_DOMAIN_COUNT] = [
    MacDomain::Kin,
    MacDomain::Group,
    MacDomain::Reciprocity,
    MacDomain::Heroism,
    MacDomain::Deference,
    MacDomain::Fairness,
    MacDomain::Property,
    MacDomain::Pathogen,
];

impl MacDomain {
    /// Position in the canonical order.
    pub fn index(self) -> usize {
        MAC_DOMAINS.iter().position(|d| *d == self).unwrap()
    }
}

fn check_unit_interval(field: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || v.is_nan() {
        return Err(Error::OutOfRange { field, value: v });
    }
    Ok(())
}

/// Weights over the eight cooperation domains, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacProfile(pub [f64; MAC_DOMAIN_COUNT]);

/// Weights over the seven foundations, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmftProfile(pub [f64; FOUNDATION_COUNT]);

/// Per-foundation appeal strengths of a message, each in [0, 1]
/// (not normalized; an all-zero vector is a frameless message).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramingVector(pub [f64; FOUNDATION_COUNT]);

fn normalized<const N: usize>(raw: [f64; N], field: &'static str) -> Result<[f64; N]> {
    let mut sum = 0.0;
    for &v in &raw {
        if v < 0.0 || v.is_nan() {
            return Err(Error::OutOfRange { field, value: v });
        }
        sum += v;
    }
    if sum <= 0.0 {
        return Err(Error::OutOfRange { field, value: sum });
    }
    let mut out = raw;
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

impl MacProfile {
    /// Build from non-negative weights, normalizing to sum 1.
    pub fn new(raw: [f64; MAC_DOMAIN_COUNT]) -> Result<Self> {
        Ok(MacProfile(normalized(raw, "mac")?))
    }

    /// Uniform weight on every domain.
    pub fn uniform() -> Self {
        MacProfile([1.0 / MAC_DOMAIN_COUNT as f64; MAC_DOMAIN_COUNT])
    }

    /// All weight on a single domain.
    pub fn pure(d: MacDomain) -> Self {
        let mut w = [0.0; MAC_DOMAIN_COUNT];
        w[d.index()] = 1.0;
        MacProfile(w)
    }

    /// Uniform weight over the given domains.
    pub fn over(domains: &[MacDomain]) -> Self {
        let mut w = [0.0; MAC_DOMAIN_COUNT];
        for d in domains {
            w[d.index()] = 1.0;
        }
        MacProfile(normalized(w, "mac").expect("non-empty domain list"))
    }

    /// Weight for one domain.
    pub fn get(&self, d: MacDomain) -> f64 {
        self.0[d.index()]
    }

    /// Check the normalization invariant (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.0.iter().sum();
        if self.0.iter().any(|v| *v < 0.0 || v.is_nan()) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("mac profile not normalized (sum {sum})")));
        }
        Ok(())
    }
}

impl EmftProfile {
    /// Build from non-negative weights, normalizing to sum 1.
    pub fn new(raw: [f64; FOUNDATION_COUNT]) -> Result<Self> {
        Ok(EmftProfile(normalized(raw, "emft")?))
    }

    /// Uniform weight on every foundation.
    pub fn uniform() -> Self {
        EmftProfile([1.0 / FOUNDATION_COUNT as f64; FOUNDATION_COUNT])
    }

    /// Build from (foundation, weight) pairs, normalizing.
    pub fn from_pairs(pairs: &[(Foundation, f64)]) -> Result<Self> {
        let mut w = [0.0; FOUNDATION_COUNT];
        for (f, v) in pairs {
            w[f.index()] += *v;
        }
        EmftProfile::new(w)
    }

    /// Weight for one foundation.
    pub fn get(&self, f: Foundation) -> f64 {
        self.0[f.index()]
    }

    /// Check the normalization invariant (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.0.iter().sum();
        if self.0.iter().any(|v| *v < 0.0 || v.is_nan()) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("emft profile not normalized (sum {sum})")));
        }
        Ok(())
    }
}

impl FramingVector {
    /// The all-zero (frameless) vector.
    pub fn zero() -> Self {
        FramingVector([0.0; FOUNDATION_COUNT])
    }

    /// Build from (foundation, strength) pairs.
    pub fn from_pairs(pairs: &[(Foundation, f64)]) -> Self {
        let mut w = [0.0; FOUNDATION_COUNT];
        for (f, v) in pairs {
            w[f.index()] = *v;
        }
        FramingVector(w)
    }

    /// Strength for one foundation.
    pub fn get(&self, f: Foundation) -> f64 {
        self.0[f.index()]
    }

    /// Check every entry lies in [0, 1].
    pub fn validate(&self) -> Result<()> {
        for &v in &self.0 {
            check_unit_interval("framing", v)?;
        }
        Ok(())
    }
}

/// Row-stochastic 8×7 matrix mapping domain weights to foundation weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacEmftMap(pub [[f64; FOUNDATION_COUNT]; MAC_DOMAIN_COUNT]);

impl MacEmftMap {
    /// The default translation, one row per domain:
    /// kin care maps to care; mutualism to loyalty; exchange and division
    /// split across the two fairness facets; hero displays split loyalty and
    /// care; contest splits authority (the dove reading) and liberty (the
    /// coalition-against-dominance reading); possession maps to liberty;
    /// pathogen avoidance to purity.
    pub fn default_map() -> Self {
        use Foundation::*;
        use MacDomain::*;
        let mut m = [[0.0; FOUNDATION_COUNT]; MAC_DOMAIN_COUNT];
        let mut set = |d: MacDomain, pairs: &[(Foundation, f64)]| {
            for (f, v) in pairs {
                m[d.index()][f.index()] = *v;
            }
        };
        set(Kin, &[(Care, 1.0)]);
        set(Group, &[(Loyalty, 1.0)]);
        set(Reciprocity, &[(FairnessEquity, 0.5), (FairnessProportionality, 0.5)]);
        set(Heroism, &[(Loyalty, 0.5), (Care, 0.5)]);
        set(Deference, &[(Authority, 0.5), (Liberty, 0.5)]);
        set(Fairness, &[(FairnessEquity, 0.5), (FairnessProportionality, 0.5)]);
        set(Property, &[(Liberty, 1.0)]);
        set(Pathogen, &[(Purity, 1.0)]);
        MacEmftMap(m)
    }

    /// Check that every row is a distribution over foundations.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.0.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|v| *v < 0.0 || v.is_nan()) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("map row {i} not normalized (sum {sum})")));
            }
        }
        Ok(())
    }
}

/// Translate a domain profile into a foundation profile via the map.
///
/// With a normalized profile and a row-stochastic map the result already
/// sums to 1; it is renormalized anyway to absorb rounding.
pub fn mac_to_emft(mac: &MacProfile, map: &MacEmftMap) -> Result<EmftProfile> {
    mac.validate()?;
    map.validate()?;
    let mut out = [0.0; FOUNDATION_COUNT];
    for (d, row) in map.0.iter().enumerate() {
        for (f, w) in row.iter().enumerate() {
            out[f] += mac.0[d] * w;
        }
    }
    EmftProfile::new(out)
}

/// Parameters of the kin-care game: relatedness `r`, benefit `b`, cost `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinGameParams {
    pub r: f64,
    pub b: f64,
    pub c: f64,
}

/// Helping pays off iff `r·b > c` (strict; ties favor defection).
pub fn hamilton_cooperate(p: KinGameParams) -> Result<bool> {
    check_unit_interval("r", p.r)?;
    if p.b < 0.0 || p.c < 0.0 || p.b.is_nan() || p.c.is_nan() {
        return Err(Error::OutOfRange { field: "b/c", value: if p.b < 0.0 { p.b } else { p.c } });
    }
    Ok(p.r * p.b > p.c)
}

/// Parameters of the contest game: resource value `v`, injury cost `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContestGameParams {
    pub v: f64,
    pub c: f64,
}

/// Evolutionarily stable hawk share of the hawk–dove contest: `min(1, v/c)`.
///
/// Requires `c > 0`. When `v ≥ c` escalation is unchecked and the ESS is
/// pure hawk.
pub fn hawk_dove_ess(p: ContestGameParams) -> Result<f64> {
    if !(p.c > 0.0) || p.v < 0.0 || p.v.is_nan() {
        return Err(Error::OutOfRange { field: "v/c", value: if p.v < 0.0 || p.v.is_nan() { p.v } else { p.c } });
    }
    Ok((p.v / p.c).min(1.0))
}

/// Expected payoff of playing hawk against a population with hawk share `p`.
pub fn hawk_payoff(g: ContestGameParams, p: f64) -> f64 {
    p * (g.v - g.c) / 2.0 + (1.0 - p) * g.v
}

/// Expected payoff of playing dove against a population with hawk share `p`.
pub fn dove_payoff(g: ContestGameParams, p: f64) -> f64 {
    (1.0 - p) * g.v / 2.0
}

/// How loudly a message speaks to a profile: `Σ framing_i · profile_i`.
///
/// Requires a normalized profile; the result then lies in [0, 1].
pub fn frame_salience(framing: &FramingVector, profile: &EmftProfile) -> Result<f64> {
    framing.validate()?;
    profile.validate()?;
    Ok(framing.0.iter().zip(profile.0.iter()).map(|(f, p)| f * p).sum())
}

/// Intuitive alarm raised by content: `violation × salience`.
///
/// A severe violation framed in foundations the profile ignores stays
/// quiet, and vice versa.
pub fn moral_alarm(framing: &FramingVector, profile: &EmftProfile, violation: f64) -> Result<f64> {
    check_unit_interval("violation", violation)?;
    Ok(violation * frame_salience(framing, profile)?)
}

/// Trust penalty for norm entrepreneurs who preach one thing and do another:
/// total (1.0) when the source is flagged, none otherwise.
pub fn hypocrisy_penalty(source: &Source) -> f64 {
    if source.hypocrisy_flag {
        1.0
    } else {
        0.0
    }
}

/// The comparable layers of one agent: domain weights, foundation weights,
/// and the concatenated virtue/bias dial vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentProfiles {
    pub mac: MacProfile,
    pub emft: EmftProfile,
    pub conduct: Vec<f64>,
}

/// Relative importance of the three layers in [`profile_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub mac: f64,
    pub emft: f64,
    pub conduct: f64,
}

impl Default for LayerWeights {
    fn default() -> Self {
        LayerWeights { mac: 1.0 / 3.0, emft: 1.0 / 3.0, conduct: 1.0 / 3.0 }
    }
}

fn total_variation<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

/// Layerwise distance between two agents in [0, 1].
///
/// The two profile layers use total variation (half L1); the conduct layer
/// uses mean absolute difference so its contribution also stays in [0, 1].
/// Weighted average over layers; a pseudo-metric (distinct dial settings can
/// coincide per layer).
pub fn profile_distance(a: &AgentProfiles, b: &AgentProfiles, w: &LayerWeights) -> Result<f64> {
    if a.conduct.len() != b.conduct.len() {
        return Err(Error::Config(format!(
            "conduct vectors differ in length ({} vs {})",
            a.conduct.len(),
            b.conduct.len()
        )));
    }
    if w.mac < 0.0 || w.emft < 0.0 || w.conduct < 0.0 {
        return Err(Error::Config("layer weights must be non-negative".into()));
    }
    let total = w.mac + w.emft + w.conduct;
    if total <= 0.0 {
        return Err(Error::Config("layer weights sum to zero".into()));
    }
    let d_mac = total_variation(&a.mac.0, &b.mac.0);
    let d_emft = total_variation(&a.emft.0, &b.emft.0);
    let d_conduct = if a.conduct.is_empty() {
        0.0
    } else {
        a.conduct
            .iter()
            .zip(b.conduct.iter())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / a.conduct.len() as f64
    };
    Ok((w.mac * d_mac + w.emft * d_emft + w.conduct * d_conduct) / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map_rows_are_stochastic() {
        MacEmftMap::default_map().validate().unwrap();
    }

    #[test]
    fn pure_kin_maps_to_pure_care() {
        let e = mac_to_emft(&MacProfile::pure(MacDomain::Kin), &MacEmftMap::default_map()).unwrap();
        assert_eq!(e.get(Foundation::Care), 1.0);
        assert_eq!(e.0.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn uniform_mac_matches_hand_multiplication() {
        // Independently computed matrix-vector product for the uniform profile.
        let e = mac_to_emft(&MacProfile::uniform(), &MacEmftMap::default_map()).unwrap();
        let expected = [
            0.1875, // care: kin 1/8 + heroism 1/16
            0.125,  // fairness_equity: reciprocity 1/16 + fairness 1/16
            0.125,  // fairness_proportionality: same split
            0.1875, // liberty: deference 1/16 + property 1/8
            0.1875, // loyalty: group 1/8 + heroism 1/16
            0.0625, // authority: deference 1/16
            0.125,  // purity: pathogen 1/8
        ];
        for (got, want) in e.0.iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn hamilton_rule_is_strict() {
        assert!(hamilton_cooperate(KinGameParams { r: 0.5, b: 10.0, c: 4.0 }).unwrap());
        assert!(!hamilton_cooperate(KinGameParams { r: 0.5, b: 8.0, c: 4.0 }).unwrap());
        assert!(!hamilton_cooperate(KinGameParams { r: 0.0, b: 100.0, c: 0.1 }).unwrap());
    }

    #[test]
    fn hawk_dove_ess_values() {
        assert_eq!(hawk_dove_ess(ContestGameParams { v: 2.0, c: 4.0 }).unwrap(), 0.5);
        assert_eq!(hawk_dove_ess(ContestGameParams { v: 5.0, c: 5.0 }).unwrap(), 1.0);
        assert_eq!(hawk_dove_ess(ContestGameParams { v: 6.0, c: 4.0 }).unwrap(), 1.0);
        assert!(hawk_dove_ess(ContestGameParams { v: 1.0, c: 0.0 }).is_err());
    }

    #[test]
    fn ess_matches_payoff_indifference_search() {
        // Oracle: bisection on the hawk-dove payoff gap, which is strictly
        // decreasing in the hawk share when v < c.
        let grid = [0.5, 1.0, 1.7, 2.3, 3.0, 3.9];
        for &v in &grid {
            for &c in &grid {
                if v >= c {
                    continue;
                }
                let g = ContestGameParams { v, c };
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                for _ in 0..80 {
                    let mid = (lo + hi) / 2.0;
                    if hawk_payoff(g, mid) - dove_payoff(g, mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let indifferent = (lo + hi) / 2.0;
                assert!((hawk_dove_ess(g).unwrap() - indifferent).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn salience_weights_framing_by_profile() {
        let profile = EmftProfile::from_pairs(&[
            (Foundation::Liberty, 0.5),
            (Foundation::Purity, 0.3),
            (Foundation::Care, 0.2),
        ])
        .unwrap();
        let framing =
            FramingVector::from_pairs(&[(Foundation::Liberty, 1.0), (Foundation::Purity, 0.8)]);
        let s = frame_salience(&framing, &profile).unwrap();
        assert!((s - 0.74).abs() < 1e-12);

        // Orthogonal pairs are silent.
        let deaf = EmftProfile::from_pairs(&[(Foundation::Loyalty, 1.0)]).unwrap();
        assert_eq!(frame_salience(&framing, &deaf).unwrap(), 0.0);
        assert_eq!(frame_salience(&FramingVector::zero(), &profile).unwrap(), 0.0);
    }

    #[test]
    fn salience_requires_normalized_profile() {
        let mut p = EmftProfile::uniform();
        p.0[0] = 0.9; // break normalization
        assert!(frame_salience(&FramingVector::zero(), &p).is_err());
    }

    #[test]
    fn alarm_is_multiplicative() {
        let profile = EmftProfile::from_pairs(&[
            (Foundation::Liberty, 0.5),
            (Foundation::Purity, 0.3),
            (Foundation::Care, 0.2),
        ])
        .unwrap();
        let framing =
            FramingVector::from_pairs(&[(Foundation::Liberty, 1.0), (Foundation::Purity, 0.8)]);
        let a = moral_alarm(&framing, &profile, 1.0).unwrap();
        assert!((a - 0.74).abs() < 1e-12);
        assert_eq!(moral_alarm(&framing, &profile, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn hypocrisy_penalty_is_total_or_absent() {
        let mut s = Source::new("s1");
        assert_eq!(hypocrisy_penalty(&s), 0.0);
        s.hypocrisy_flag = true;
        assert_eq!(hypocrisy_penalty(&s), 1.0);
    }

    fn profiles(mac: MacProfile) -> AgentProfiles {
        AgentProfiles { mac, emft: EmftProfile::uniform(), conduct: vec![0.5; 14] }
    }

    #[test]
    fn distance_is_zero_on_identical_agents() {
        let a = profiles(MacProfile::uniform());
        assert_eq!(profile_distance(&a, &a, &LayerWeights::default()).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_mac_layers_contribute_one_third() {
        let a = profiles(MacProfile::pure(MacDomain::Kin));
        let b = profiles(MacProfile::pure(MacDomain::Property));
        let d = profile_distance(&a, &b, &LayerWeights::default()).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn distance_is_symmetric_and_bounded() {
        // Seeded sweep over random profile pairs.
        use rand::Rng;
        let mut rng = crate::seeds::rng(11, &[99]);
        for _ in 0..200 {
            let mut raw_a = [0.0; MAC_DOMAIN_COUNT];
            let mut raw_b = [0.0; MAC_DOMAIN_COUNT];
            for v in &mut raw_a {
                *v = rng.gen::<f64>();
            }
            for v in &mut raw_b {
                *v = rng.gen::<f64>();
            }
            let a = AgentProfiles {
                mac: MacProfile::new(raw_a).unwrap(),
                emft: EmftProfile::uniform(),
                conduct: (0..14).map(|_| rng.gen::<f64>()).collect(),
            };
            let b = AgentProfiles {
                mac: MacProfile::new(raw_b).unwrap(),
                emft: EmftProfile::uniform(),
                conduct: (0..14).map(|_| rng.gen::<f64>()).collect(),
            };
            let ab = profile_distance(&a, &b, &LayerWeights::default()).unwrap();
            let ba = profile_distance(&b, &a, &LayerWeights::default()).unwrap();
            assert_eq!(ab, ba);
            assert!((0.0..=1.0).contains(&ab));
        }
    }
}
