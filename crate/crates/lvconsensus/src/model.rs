//! Reaction system for a pair of competing species.
//!
//! The state is a pair of non-negative counts `(x0, x1)`. Five reaction
//! families act on it:
//!
//! * birth of species i at rate `beta * x_i`
//! * death of species i at rate `delta * x_i`
//! * interspecific competition `X_i + X_{1-i}` at rate `alpha_i * x0 * x1`
//! * intraspecific competition `X_i + X_i` at rate `gamma_i * x_i * (x_i - 1) / 2`
//!
//! Interspecific and intraspecific events resolve according to the
//! competition mode: self-destructive encounters kill both participants,
//! non-self-destructive encounters kill only the opponent (one participant
//! for intraspecific pairs).
//!
//! Counts are held as `u64` and converted to `f64` for propensities; the
//! conversion is exact below [`MAX_COUNT`], and anything larger is reported
//! as an overflow rather than silently rounded.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest per-species count accepted by the propensity arithmetic.
///
/// Below 2^26 the pair products `x0 * x1` and `x * (x - 1) / 2` stay under
/// 2^52 and are exactly representable in `f64`.
pub const MAX_COUNT: u64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    Zero = 0,
    One = 1,
}

impl Species {
    pub fn other(self) -> Species {
        match self {
            Species::Zero => Species::One,
            Species::One => Species::Zero,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// How a competitive encounter resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Both participants of a competitive pair die.
    SelfDestructive,
    /// The aggressor survives; only its opponent dies (one member of an
    /// intraspecific pair).
    NonSelfDestructive,
}

/// Rate constants plus the competition mode. All rates must be finite and
/// non-negative; zero rates simply switch a reaction family off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub mode: Mode,
}

impl ModelSpec {
    /// Checks every rate for finiteness and sign. Returns the spec unchanged
    /// so construction can be written as `spec.validated()?`.
    pub fn validated(self) -> Result<ModelSpec> {
        for (name, value) in [
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("beta", self.beta),
            ("delta", self.delta),
            ("gamma0", self.gamma0),
            ("gamma1", self.gamma1),
        ] {
            if !value.is_finite() {
                return Err(Error::NonFiniteRate { name, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeRate { name, value });
            }
        }
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha0 + self.alpha1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma0 + self.gamma1
    }

    /// Total per-capita individual rate `beta + delta`.
    pub fn theta(&self) -> f64 {
        self.beta + self.delta
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha0.min(self.alpha1)
    }

    /// Neither species is favored: swapping labels leaves the law unchanged.
    pub fn is_neutral(&self) -> bool {
        self.alpha0 == self.alpha1 && self.gamma0 == self.gamma1
    }

    /// The same dynamics with species labels exchanged.
    pub fn swapped(&self) -> ModelSpec {
        ModelSpec {
            alpha0: self.alpha1,
            alpha1: self.alpha0,
            gamma0: self.gamma1,
            gamma1: self.gamma0,
            ..*self
        }
    }

    /// Parses the flat key-value format used by config files and the CLI.
    ///
    /// Entries are separated by commas or newlines; `#` starts a comment
    /// line. Keys: `alpha0 alpha1 beta delta gamma0 gamma1` (decimal, default
    /// 0) and `mode` (`sd` or `nsd`, required).
    pub fn parse(text: &str) -> Result<ModelSpec> {
        let mut rates: [Option<f64>; 6] = [None; 6];
        let mut mode: Option<Mode> = None;
        const KEYS: [&str; 6] = ["alpha0", "alpha1", "beta", "delta", "gamma0", "gamma1"];

        for raw in text.split(|ch| ch == ',' || ch == '\n') {
            let entry = raw.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            let (key, value) = entry
                .split_once('=')
                .ok_or_else(|| Error::SpecParse(format!("expected key=value, got `{entry}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "mode" {
                let parsed = match value {
                    "sd" => Mode::SelfDestructive,
                    "nsd" => Mode::NonSelfDestructive,
                    other => {
                        return Err(Error::SpecParse(format!(
                            "mode must be `sd` or `nsd`, got `{other}`"
                        )))
                    }
                };
                if mode.replace(parsed).is_some() {
                    return Err(Error::SpecParse("duplicate key `mode`".into()));
                }
                continue;
            }
            let slot = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::SpecParse(format!("unknown key `{key}`")))?;
            let parsed: f64 = value
                .parse()
                .map_err(|_| Error::SpecParse(format!("invalid decimal for `{key}`: `{value}`")))?;
            if rates[slot].replace(parsed).is_some() {
                return Err(Error::SpecParse(format!("duplicate key `{key}`")));
            }
        }

        let mode = mode.ok_or_else(|| Error::SpecParse("missing required key `mode`".into()))?;
        let spec = ModelSpec {
            alpha0: rates[0].unwrap_or(0.0),
            alpha1: rates[1].unwrap_or(0.0),
            beta: rates[2].unwrap_or(0.0),
            delta: rates[3].unwrap_or(0.0),
            gamma0: rates[4].unwrap_or(0.0),
            gamma1: rates[5].unwrap_or(0.0),
            mode,
        };
        spec.validated()
    }

    /// Canonical single-line form accepted back by [`ModelSpec::parse`].
    pub fn to_inline(&self) -> String {
        format!(
            "alpha0={},alpha1={},beta={},delta={},gamma0={},gamma1={},mode={}",
            self.alpha0,
            self.alpha1,
            self.beta,
            self.delta,
            self.gamma0,
            self.gamma1,
            match self.mode {
                Mode::SelfDestructive => "sd",
                Mode::NonSelfDestructive => "nsd",
            }
        )
    }
}

/// Markov state: one count per species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Config {
    pub x0: u64,
    pub x1: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consensus {
    NotReached,
    Winner(Species),
    BothExtinct,
}

impl Config {
    pub fn new(x0: u64, x1: u64) -> Config {
        Config { x0, x1 }
    }

    pub fn count(&self, s: Species) -> u64 {
        match s {
            Species::Zero => self.x0,
            Species::One => self.x1,
        }
    }

    pub fn total(&self) -> u64 {
        self.x0 + self.x1
    }

    /// Signed gap `x0 - x1`. Species 0 holds the initial majority under the
    /// run convention, so this is the majority lead.
    pub fn gap(&self) -> i64 {
        self.x0 as i64 - self.x1 as i64
    }

    pub fn min_count(&self) -> u64 {
        self.x0.min(self.x1)
    }

    pub fn consensus_state(&self) -> Consensus {
        match (self.x0, self.x1) {
            (0, 0) => Consensus::BothExtinct,
            (_, 0) => Consensus::Winner(Species::Zero),
            (0, _) => Consensus::Winner(Species::One),
            _ => Consensus::NotReached,
        }
    }

    pub fn is_consensus(&self) -> bool {
        self.x0 == 0 || self.x1 == 0
    }

    pub fn swapped(&self) -> Config {
        Config {
            x0: self.x1,
            x1: self.x0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReactionKind {
    Birth(Species),
    Death(Species),
    Inter(Species),
    Intra(Species),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventFamily {
    Individual,
    Competitive,
}

impl ReactionKind {
    /// Fixed reaction order used everywhere a deterministic iteration or
    /// cumulative sum matters (selection, mass accumulation).
    pub const ALL: [ReactionKind; 8] = [
        ReactionKind::Birth(Species::Zero),
        ReactionKind::Birth(Species::One),
        ReactionKind::Death(Species::Zero),
        ReactionKind::Death(Species::One),
        ReactionKind::Inter(Species::Zero),
        ReactionKind::Inter(Species::One),
        ReactionKind::Intra(Species::Zero),
        ReactionKind::Intra(Species::One),
    ];

    pub fn family(self) -> EventFamily {
        match self {
            ReactionKind::Birth(_) | ReactionKind::Death(_) => EventFamily::Individual,
            ReactionKind::Inter(_) | ReactionKind::Intra(_) => EventFamily::Competitive,
        }
    }

    pub fn species(self) -> Species {
        match self {
            ReactionKind::Birth(s)
            | ReactionKind::Death(s)
            | ReactionKind::Inter(s)
            | ReactionKind::Intra(s) => s,
        }
    }

    /// Short code used in trajectory dumps.
    pub fn code(self) -> &'static str {
        match self {
            ReactionKind::Birth(Species::Zero) => "birth0",
            ReactionKind::Birth(Species::One) => "birth1",
            ReactionKind::Death(Species::Zero) => "death0",
            ReactionKind::Death(Species::One) => "death1",
            ReactionKind::Inter(Species::Zero) => "inter0",
            ReactionKind::Inter(Species::One) => "inter1",
            ReactionKind::Intra(Species::Zero) => "intra0",
            ReactionKind::Intra(Species::One) => "intra1",
        }
    }

    pub fn from_code(code: &str) -> Option<ReactionKind> {
        ReactionKind::ALL.into_iter().find(|k| k.code() == code)
    }
}

/// Per-event labels relative to the state the event fires from.
///
/// `tag` partitions events into four disjoint classes:
///
/// * `Good`: the currently smaller species loses members.
/// * `BadNonCompetitive` / `BadCompetitive`: the lead of the currently
///   larger species shrinks while the smaller species is still alive,
///   split by event family.
/// * `Neutral`: everything else.
///
/// At a tie the "larger" label goes to species 0, which keeps the class
/// masses continuous functions of the counts (see
/// [`ModelSpec::prob_bad_noncomp`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventTag {
    Good,
    BadNonCompetitive,
    BadCompetitive,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventClass {
    pub family: EventFamily,
    /// Change of the majority lead `x0 - x1`, taken before minus after, so a
    /// shrinking lead is positive. Species 0 is the initial majority under
    /// the run convention.
    pub d_gap_initial: i32,
    pub tag: EventTag,
}

impl EventTag {
    pub fn code(self) -> &'static str {
        match self {
            EventTag::Good => "good",
            EventTag::BadNonCompetitive => "bad-noncomp",
            EventTag::BadCompetitive => "bad-comp",
            EventTag::Neutral => "neutral",
        }
    }

    pub fn from_code(code: &str) -> Option<EventTag> {
        [
            EventTag::Good,
            EventTag::BadNonCompetitive,
            EventTag::BadCompetitive,
            EventTag::Neutral,
        ]
        .into_iter()
        .find(|t| t.code() == code)
    }
}

/// All eight reaction rates in [`ReactionKind::ALL`] order plus their sum.
#[derive(Debug, Clone, Copy)]
pub struct Propensities {
    pub rates: [f64; 8],
    pub total: f64,
}

impl Propensities {
    pub fn rate(&self, k: ReactionKind) -> f64 {
        self.rates[reaction_slot(k)]
    }
}

fn reaction_slot(k: ReactionKind) -> usize {
    match k {
        ReactionKind::Birth(s) => s.index(),
        ReactionKind::Death(s) => 2 + s.index(),
        ReactionKind::Inter(s) => 4 + s.index(),
        ReactionKind::Intra(s) => 6 + s.index(),
    }
}

/// Total rate split by event class, all divided by nothing: these are raw
/// rate masses. `total` is the full propensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventMasses {
    pub total: f64,
    pub good_individual: f64,
    pub good_competitive: f64,
    pub bad_noncompetitive: f64,
    pub bad_competitive: f64,
    pub neutral: f64,
}

impl EventMasses {
    pub fn good(&self) -> f64 {
        self.good_individual + self.good_competitive
    }
}

impl ModelSpec {
    fn check_counts(&self, c: Config) -> Result<()> {
        for count in [c.x0, c.x1] {
            if count > MAX_COUNT {
                return Err(Error::CountOverflow {
                    count,
                    limit: MAX_COUNT,
                });
            }
        }
        Ok(())
    }

    /// All eight reaction rates at `c`, in fixed order. The sum runs over
    /// that order, so it is reproducible bit for bit.
    pub fn propensities_raw(&self, c: Config) -> Result<Propensities> {
        self.check_counts(c)?;
        let x0 = c.x0 as f64;
        let x1 = c.x1 as f64;
        let pair = x0 * x1;
        let rates = [
            self.beta * x0,
            self.beta * x1,
            self.delta * x0,
            self.delta * x1,
            self.alpha0 * pair,
            self.alpha1 * pair,
            if c.x0 >= 2 {
                self.gamma0 * (x0 * (x0 - 1.0) * 0.5)
            } else {
                0.0
            },
            if c.x1 >= 2 {
                self.gamma1 * (x1 * (x1 - 1.0) * 0.5)
            } else {
                0.0
            },
        ];
        let mut total = 0.0;
        for r in rates {
            total += r;
        }
        Ok(Propensities { rates, total })
    }

    /// Feasible reactions (positive propensity) with their rates.
    pub fn propensities(&self, c: Config) -> Result<Vec<(ReactionKind, f64)>> {
        let p = self.propensities_raw(c)?;
        Ok(ReactionKind::ALL
            .into_iter()
            .zip(p.rates)
            .filter(|(_, r)| *r > 0.0)
            .collect())
    }

    pub fn total_propensity(&self, c: Config) -> Result<f64> {
        Ok(self.propensities_raw(c)?.total)
    }

    /// State change of reaction `k`, without touching the rate. Callers must
    /// have checked feasibility; count arithmetic is still guarded by the
    /// structural requirements (a selected reaction always has the members
    /// it consumes).
    pub(crate) fn apply_unchecked(&self, c: Config, k: ReactionKind) -> Config {
        match (k, self.mode) {
            (ReactionKind::Birth(Species::Zero), _) => Config::new(c.x0 + 1, c.x1),
            (ReactionKind::Birth(Species::One), _) => Config::new(c.x0, c.x1 + 1),
            (ReactionKind::Death(Species::Zero), _) => Config::new(c.x0 - 1, c.x1),
            (ReactionKind::Death(Species::One), _) => Config::new(c.x0, c.x1 - 1),
            (ReactionKind::Inter(_), Mode::SelfDestructive) => Config::new(c.x0 - 1, c.x1 - 1),
            (ReactionKind::Inter(Species::Zero), Mode::NonSelfDestructive) => {
                Config::new(c.x0, c.x1 - 1)
            }
            (ReactionKind::Inter(Species::One), Mode::NonSelfDestructive) => {
                Config::new(c.x0 - 1, c.x1)
            }
            (ReactionKind::Intra(Species::Zero), Mode::SelfDestructive) => {
                Config::new(c.x0 - 2, c.x1)
            }
            (ReactionKind::Intra(Species::One), Mode::SelfDestructive) => {
                Config::new(c.x0, c.x1 - 2)
            }
            (ReactionKind::Intra(Species::Zero), Mode::NonSelfDestructive) => {
                Config::new(c.x0 - 1, c.x1)
            }
            (ReactionKind::Intra(Species::One), Mode::NonSelfDestructive) => {
                Config::new(c.x0, c.x1 - 1)
            }
        }
    }

    /// Applies `k` to `c`. The reaction must have positive propensity.
    pub fn apply_reaction(&self, c: Config, k: ReactionKind) -> Result<Config> {
        let p = self.propensities_raw(c)?;
        if !(p.rate(k) > 0.0) {
            return Err(Error::InfeasibleReaction {
                reaction: k.code(),
                x0: c.x0,
                x1: c.x1,
            });
        }
        Ok(self.apply_unchecked(c, k))
    }

    /// Classification of a feasible event fired from `c`; see [`EventClass`].
    pub fn classify(&self, c: Config, k: ReactionKind) -> Result<EventClass> {
        let p = self.propensities_raw(c)?;
        if !(p.rate(k) > 0.0) {
            return Err(Error::InfeasibleReaction {
                reaction: k.code(),
                x0: c.x0,
                x1: c.x1,
            });
        }
        Ok(self.classify_applied(c, k, self.apply_unchecked(c, k)))
    }

    /// Classification given the already-applied successor state.
    pub(crate) fn classify_applied(&self, c: Config, k: ReactionKind, after: Config) -> EventClass {
        let family = k.family();
        let d_gap_initial = (c.gap() - after.gap()) as i32;
        // Running-majority labeling; ties put the "larger" label on species 0.
        let min_label = if c.x1 <= c.x0 {
            Species::One
        } else {
            Species::Zero
        };
        let max_label = min_label.other();
        let min_before = c.count(min_label);
        let lead_before = c.count(max_label) as i64 - min_before as i64;
        let lead_after = after.count(max_label) as i64 - after.count(min_label) as i64;
        let tag = if after.count(min_label) < min_before {
            EventTag::Good
        } else if min_before > 0 && lead_after < lead_before {
            match family {
                EventFamily::Individual => EventTag::BadNonCompetitive,
                EventFamily::Competitive => EventTag::BadCompetitive,
            }
        } else {
            EventTag::Neutral
        };
        EventClass {
            family,
            d_gap_initial,
            tag,
        }
    }

    /// Rate mass of each event class at `c`, accumulated in fixed reaction
    /// order.
    pub fn event_masses(&self, c: Config) -> Result<EventMasses> {
        let p = self.propensities_raw(c)?;
        let mut m = EventMasses {
            total: p.total,
            good_individual: 0.0,
            good_competitive: 0.0,
            bad_noncompetitive: 0.0,
            bad_competitive: 0.0,
            neutral: 0.0,
        };
        for (k, rate) in ReactionKind::ALL.into_iter().zip(p.rates) {
            if !(rate > 0.0) {
                continue;
            }
            let class = self.classify_applied(c, k, self.apply_unchecked(c, k));
            match (class.tag, class.family) {
                (EventTag::Good, EventFamily::Individual) => m.good_individual += rate,
                (EventTag::Good, EventFamily::Competitive) => m.good_competitive += rate,
                (EventTag::BadNonCompetitive, _) => m.bad_noncompetitive += rate,
                (EventTag::BadCompetitive, _) => m.bad_competitive += rate,
                (EventTag::Neutral, _) => m.neutral += rate,
            }
        }
        Ok(m)
    }

    /// Probability that the next jump is a bad non-competitive event: an
    /// individual event that shrinks the current leader's margin while the
    /// smaller species is alive. For `gamma = 0` and `x0 = a >= b = x1 >= 1`
    /// this equals `(delta*a + beta*b) / (alpha*a*b + theta*(a+b))`.
    pub fn prob_bad_noncomp(&self, c: Config) -> Result<f64> {
        let m = self.event_masses(c)?;
        if !(m.total > 0.0) {
            return Err(Error::ZeroPropensity { x0: c.x0, x1: c.x1 });
        }
        Ok(m.bad_noncompetitive / m.total)
    }

    /// Probability that the next jump shrinks the smaller species.
    pub fn prob_good(&self, c: Config) -> Result<f64> {
        let m = self.event_masses(c)?;
        if !(m.total > 0.0) {
            return Err(Error::ZeroPropensity { x0: c.x0, x1: c.x1 });
        }
        Ok(m.good() / m.total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neutral_spec(mode: Mode) -> ModelSpec {
        ModelSpec {
            alpha0: 0.5,
            alpha1: 0.5,
            beta: 1.0,
            delta: 1.0,
            gamma0: 0.0,
            gamma1: 0.0,
            mode,
        }
        .validated()
        .unwrap()
    }

    #[test]
    fn validation_flags_and_derived_rates() {
        let spec = neutral_spec(Mode::SelfDestructive);
        assert!(spec.is_neutral());
        assert_eq!(spec.theta(), 2.0);
        assert_eq!(spec.alpha(), 1.0);
        assert_eq!(spec.alpha_min(), 0.5);

        let bad = ModelSpec {
            delta: -1.0,
            ..spec
        };
        assert!(matches!(
            bad.validated(),
            Err(Error::NegativeRate { name: "delta", .. })
        ));
        let nan = ModelSpec {
            gamma1: f64::NAN,
            ..spec
        };
        assert!(matches!(
            nan.validated(),
            Err(Error::NonFiniteRate { name: "gamma1", .. })
        ));
    }

    #[test]
    fn total_propensity_at_two_three_is_sixteen() {
        let spec = neutral_spec(Mode::SelfDestructive);
        let phi = spec.total_propensity(Config::new(2, 3)).unwrap();
        assert_eq!(phi, 16.0);
    }

    #[test]
    fn empty_state_has_no_reactions() {
        let spec = neutral_spec(Mode::SelfDestructive);
        assert!(spec.propensities(Config::new(0, 0)).unwrap().is_empty());
        assert_eq!(spec.total_propensity(Config::new(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn lone_species_with_only_intra_rate() {
        let spec = ModelSpec {
            alpha0: 0.0,
            alpha1: 0.0,
            beta: 0.0,
            delta: 0.0,
            gamma0: 1.0,
            gamma1: 0.0,
            mode: Mode::SelfDestructive,
        }
        .validated()
        .unwrap();
        let feasible = spec.propensities(Config::new(3, 0)).unwrap();
        assert_eq!(
            feasible,
            vec![(ReactionKind::Intra(Species::Zero), 3.0)],
            "x*(x-1)/2 = 3 pairs"
        );
    }

    #[test]
    fn count_overflow_is_reported() {
        let spec = neutral_spec(Mode::SelfDestructive);
        let err = spec
            .propensities_raw(Config::new(MAX_COUNT + 1, 1))
            .unwrap_err();
        assert!(matches!(err, Error::CountOverflow { .. }));
    }

    #[test]
    fn interspecific_resolution_by_mode() {
        let sd = neutral_spec(Mode::SelfDestructive);
        assert_eq!(
            sd.apply_reaction(Config::new(1, 1), ReactionKind::Inter(Species::Zero))
                .unwrap(),
            Config::new(0, 0)
        );

        let nsd = neutral_spec(Mode::NonSelfDestructive);
        assert_eq!(
            nsd.apply_reaction(Config::new(4, 2), ReactionKind::Inter(Species::One))
                .unwrap(),
            Config::new(3, 2),
            "species 1 survives, species 0 loses a member"
        );
    }

    #[test]
    fn intraspecific_resolution_by_mode() {
        let sd = ModelSpec {
            gamma0: 1.0,
            gamma1: 1.0,
            ..neutral_spec(Mode::SelfDestructive)
        };
        assert_eq!(
            sd.apply_reaction(Config::new(5, 3), ReactionKind::Intra(Species::Zero))
                .unwrap(),
            Config::new(3, 3)
        );
        let nsd = ModelSpec {
            mode: Mode::NonSelfDestructive,
            ..sd
        };
        assert_eq!(
            nsd.apply_reaction(Config::new(5, 3), ReactionKind::Intra(Species::Zero))
                .unwrap(),
            Config::new(4, 3)
        );
    }

    #[test]
    fn infeasible_reactions_are_rejected() {
        let spec = neutral_spec(Mode::SelfDestructive);
        // No members of species 1 to kill.
        assert!(matches!(
            spec.apply_reaction(Config::new(3, 0), ReactionKind::Death(Species::One)),
            Err(Error::InfeasibleReaction { .. })
        ));
        // Interspecific competition needs both species present.
        assert!(matches!(
            spec.apply_reaction(Config::new(3, 0), ReactionKind::Inter(Species::Zero)),
            Err(Error::InfeasibleReaction { .. })
        ));
        // gamma = 0 switches intraspecific reactions off entirely.
        assert!(matches!(
            spec.apply_reaction(Config::new(3, 3), ReactionKind::Intra(Species::Zero)),
            Err(Error::InfeasibleReaction { .. })
        ));
    }

    #[test]
    fn consensus_states() {
        assert_eq!(
            Config::new(3, 0).consensus_state(),
            Consensus::Winner(Species::Zero)
        );
        assert_eq!(Config::new(0, 0).consensus_state(), Consensus::BothExtinct);
        assert_eq!(Config::new(2, 5).consensus_state(), Consensus::NotReached);
    }

    #[test]
    fn classify_worked_examples() {
        let sd = neutral_spec(Mode::SelfDestructive);
        let c = Config::new(4, 2);

        let inter = sd.classify(c, ReactionKind::Inter(Species::Zero)).unwrap();
        assert_eq!(inter.family, EventFamily::Competitive);
        assert_eq!(inter.d_gap_initial, 0, "both species lose one member");
        assert_eq!(inter.tag, EventTag::Good);

        let death_major = sd.classify(c, ReactionKind::Death(Species::Zero)).unwrap();
        assert_eq!(death_major.family, EventFamily::Individual);
        assert_eq!(death_major.d_gap_initial, 1);
        assert_eq!(death_major.tag, EventTag::BadNonCompetitive);

        let nsd = neutral_spec(Mode::NonSelfDestructive);
        let aggressor_minor = nsd.classify(c, ReactionKind::Inter(Species::One)).unwrap();
        assert_eq!(aggressor_minor.family, EventFamily::Competitive);
        assert_eq!(aggressor_minor.d_gap_initial, 1);
        assert_eq!(aggressor_minor.tag, EventTag::BadCompetitive);
    }

    #[test]
    fn self_destructive_interspecific_events_never_move_the_gap() {
        let sd = neutral_spec(Mode::SelfDestructive);
        for a in 1..20u64 {
            for b in 1..20u64 {
                for s in [Species::Zero, Species::One] {
                    let class = sd
                        .classify(Config::new(a, b), ReactionKind::Inter(s))
                        .unwrap();
                    assert_eq!(class.d_gap_initial, 0, "at ({a}, {b})");
                }
            }
        }
    }

    #[test]
    fn self_destructive_intra_moves_gap_by_two() {
        let sd = ModelSpec {
            gamma0: 1.0,
            gamma1: 1.0,
            ..neutral_spec(Mode::SelfDestructive)
        };
        let up = sd
            .classify(Config::new(5, 3), ReactionKind::Intra(Species::Zero))
            .unwrap();
        assert_eq!(up.d_gap_initial, 2);
        let down = sd
            .classify(Config::new(5, 3), ReactionKind::Intra(Species::One))
            .unwrap();
        assert_eq!(down.d_gap_initial, -2);
    }

    #[test]
    fn bad_noncompetitive_mass_at_two_one() {
        let spec = neutral_spec(Mode::SelfDestructive);
        let p = spec.prob_bad_noncomp(Config::new(2, 1)).unwrap();
        // death of the leader (rate 2) plus birth of the trailer (rate 1)
        // over total 8.
        assert_eq!(p, 3.0 / 8.0);
    }

    #[test]
    fn bad_noncompetitive_mass_at_a_tie_counts_one_leader() {
        // Both labelings agree at a tie: one species contributes its death
        // rate, the other its birth rate.
        let spec = neutral_spec(Mode::SelfDestructive);
        let c = Config::new(1, 1);
        let p = spec.prob_bad_noncomp(c).unwrap();
        let phi = spec.total_propensity(c).unwrap();
        assert_eq!(p, (spec.delta + spec.beta) / phi);

        let swapped = spec.swapped().prob_bad_noncomp(c.swapped()).unwrap();
        assert_eq!(p, swapped);
    }

    #[test]
    fn good_mass_depends_on_mode() {
        let sd = neutral_spec(Mode::SelfDestructive);
        // Interspecific events (1 + 1) plus trailer death (1) over 8.
        assert_eq!(sd.prob_good(Config::new(2, 1)).unwrap(), 3.0 / 8.0);

        let nsd = neutral_spec(Mode::NonSelfDestructive);
        // Only the trailer-killing interspecific reaction (1) plus trailer
        // death (1) over 8.
        assert_eq!(nsd.prob_good(Config::new(2, 1)).unwrap(), 2.0 / 8.0);
    }

    #[test]
    fn class_masses_partition_the_total() {
        for mode in [Mode::SelfDestructive, Mode::NonSelfDestructive] {
            let spec = ModelSpec {
                alpha0: 0.3,
                alpha1: 0.7,
                beta: 0.9,
                delta: 1.1,
                gamma0: 0.2,
                gamma1: 0.4,
                mode,
            }
            .validated()
            .unwrap();
            for (a, b) in [(1u64, 1u64), (2, 1), (5, 5), (7, 3), (1, 6), (40, 39)] {
                let m = spec.event_masses(Config::new(a, b)).unwrap();
                let sum = m.good() + m.bad_noncompetitive + m.bad_competitive + m.neutral;
                assert!(
                    (sum - m.total).abs() <= 1e-12 * m.total,
                    "partition failed at ({a}, {b}): {sum} vs {}",
                    m.total
                );
            }
        }
    }

    #[test]
    fn zero_propensity_probabilities_are_errors() {
        let spec = neutral_spec(Mode::SelfDestructive);
        assert!(matches!(
            spec.prob_good(Config::new(0, 0)),
            Err(Error::ZeroPropensity { .. })
        ));
    }

    #[test]
    fn parse_inline_and_file_forms() {
        let inline =
            ModelSpec::parse("alpha0=0.5,alpha1=0.5,beta=1,delta=1,gamma0=0,gamma1=0,mode=sd")
                .unwrap();
        assert_eq!(inline, neutral_spec(Mode::SelfDestructive));

        let file = ModelSpec::parse(
            "# competition setup\nalpha0 = 0.5\nalpha1 = 0.5\nbeta = 1\ndelta = 1\nmode = nsd\n",
        )
        .unwrap();
        assert_eq!(file, neutral_spec(Mode::NonSelfDestructive));

        let roundtrip = ModelSpec::parse(&inline.to_inline()).unwrap();
        assert_eq!(roundtrip, inline);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(ModelSpec::parse("alpha0=0.5").is_err(), "mode is required");
        assert!(ModelSpec::parse("mode=sd,alpha9=1").is_err());
        assert!(ModelSpec::parse("mode=sd,beta=-2").is_err());
        assert!(ModelSpec::parse("mode=maybe").is_err());
        assert!(ModelSpec::parse("mode=sd,beta=1,beta=2").is_err());
        assert!(ModelSpec::parse("mode=sd,beta=abc").is_err());
    }
}
