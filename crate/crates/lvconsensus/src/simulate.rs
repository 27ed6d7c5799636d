//! Trajectory runners over the embedded jump chain and the continuous-time
//! chain, with per-event accounting.
//!
//! Runs start from a state whose slot 0 holds the (weak) majority; callers
//! with a reversed state swap species labels first. A run ends at consensus:
//! one count is zero (including both at once, which counts as a failure for
//! majority-win purposes).

use crate::error::{Error, Result};
use crate::model::{Config, Consensus, EventClass, EventFamily, EventTag, ModelSpec, Propensities, ReactionKind, Species};
use crate::rng::TrialStream;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    /// Species 0 (initial majority) is the sole survivor.
    MajorityWon,
    /// Species 1 is the sole survivor.
    MinorityWon,
    BothExtinct,
    /// Step cap hit before consensus.
    Censored,
}

/// Per-run accounting.
///
/// * `steps` is the consensus time of the jump chain.
/// * `individual` / `competitive` split the steps by event family.
/// * `bad_noncomp` counts individual events that shrank the current
///   leader's margin while both species were alive.
/// * `f_*` hold the accumulated gap loss (initial-majority lead, before
///   minus after, summed), split by family. The total telescopes: it equals
///   initial gap minus final gap.
/// * `hit_tie` is set when any state strictly before consensus had equal
///   counts.
/// * `max_total` is the peak population over the consensus trajectory.
/// * `elapsed` is continuous time at consensus, only for continuous-time
///   runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub steps: u64,
    pub outcome: Outcome,
    pub individual: u64,
    pub competitive: u64,
    pub bad_noncomp: u64,
    pub f_total: i64,
    pub f_individual: i64,
    pub f_competitive: i64,
    pub hit_tie: bool,
    pub max_total: u64,
    pub elapsed: Option<f64>,
}

/// Step cap used when callers do not pick one: generous linear headroom in
/// the initial population plus a flat floor.
pub fn default_max_steps(n: u64) -> u64 {
    1000 * (n + 1) + 1_000_000
}

/// One jump of the embedded chain. Returns the fired reaction and the
/// successor state.
pub fn jump_step(spec: &ModelSpec, c: Config, stream: &mut TrialStream) -> Result<(ReactionKind, Config)> {
    let props = spec.propensities_raw(c)?;
    if !(props.total > 0.0) {
        return Err(Error::ZeroPropensity { x0: c.x0, x1: c.x1 });
    }
    let k = select_reaction(&props, stream.xi());
    Ok((k, spec.apply_unchecked(c, k)))
}

/// Walks the fixed reaction order and picks the category containing
/// `u * total`. `u` lives in [0, 1); accumulated rounding can leave the
/// target marginally past the last positive rate, which then wins.
pub(crate) fn select_reaction(props: &Propensities, u: f64) -> ReactionKind {
    let target = u * props.total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (slot, rate) in props.rates.iter().enumerate() {
        if *rate > 0.0 {
            acc += rate;
            last_positive = Some(slot);
            if target < acc {
                return ReactionKind::ALL[slot];
            }
        }
    }
    ReactionKind::ALL[last_positive.expect("select_reaction needs positive total")]
}

struct Accounting {
    stats: TrajectoryStats,
}

impl Accounting {
    fn new(init: Config) -> Accounting {
        Accounting {
            stats: TrajectoryStats {
                steps: 0,
                outcome: Outcome::Censored,
                individual: 0,
                competitive: 0,
                bad_noncomp: 0,
                f_total: 0,
                f_individual: 0,
                f_competitive: 0,
                hit_tie: false,
                max_total: init.total(),
                elapsed: None,
            },
        }
    }

    /// Called with the pre-event state already checked non-consensus.
    fn before_step(&mut self, c: Config) {
        if c.gap() == 0 {
            self.stats.hit_tie = true;
        }
    }

    fn record(&mut self, class: &EventClass, after: Config) {
        let s = &mut self.stats;
        s.steps += 1;
        let d = class.d_gap_initial as i64;
        s.f_total += d;
        match class.family {
            EventFamily::Individual => {
                s.individual += 1;
                s.f_individual += d;
            }
            EventFamily::Competitive => {
                s.competitive += 1;
                s.f_competitive += d;
            }
        }
        if class.tag == EventTag::BadNonCompetitive {
            s.bad_noncomp += 1;
        }
        s.max_total = s.max_total.max(after.total());
    }

    fn finish(&mut self, c: Config) {
        self.stats.outcome = match c.consensus_state() {
            Consensus::Winner(Species::Zero) => Outcome::MajorityWon,
            Consensus::Winner(Species::One) => Outcome::MinorityWon,
            Consensus::BothExtinct => Outcome::BothExtinct,
            Consensus::NotReached => Outcome::Censored,
        };
    }
}

fn check_init(init: Config) -> Result<()> {
    if init.x0 < init.x1 {
        return Err(Error::InvalidInit {
            x0: init.x0,
            x1: init.x1,
        });
    }
    Ok(())
}

/// Runs the jump chain from `init` until consensus or `max_steps`.
pub fn run_to_consensus(
    spec: &ModelSpec,
    init: Config,
    stream: &mut TrialStream,
    max_steps: u64,
) -> Result<TrajectoryStats> {
    run_with(spec, init, stream, max_steps, |_, _, _, _| ())
}

/// Same as [`run_to_consensus`] with a per-event observer
/// `(step, reaction, state_after, class)`; used by trajectory dumps.
pub fn run_with<F>(
    spec: &ModelSpec,
    init: Config,
    stream: &mut TrialStream,
    max_steps: u64,
    mut on_event: F,
) -> Result<TrajectoryStats>
where
    F: FnMut(u64, ReactionKind, Config, &EventClass),
{
    check_init(init)?;
    let mut acc = Accounting::new(init);
    let mut c = init;
    loop {
        if c.is_consensus() || acc.stats.steps >= max_steps {
            acc.finish(c);
            return Ok(acc.stats);
        }
        acc.before_step(c);
        let props = spec.propensities_raw(c)?;
        if !(props.total > 0.0) {
            return Err(Error::ZeroPropensity { x0: c.x0, x1: c.x1 });
        }
        let k = select_reaction(&props, stream.xi());
        let after = spec.apply_unchecked(c, k);
        let class = spec.classify_applied(c, k, after);
        acc.record(&class, after);
        on_event(acc.stats.steps, k, after, &class);
        c = after;
    }
}

/// A continuous-time run: the jump-chain statistics up to consensus plus
/// per-species extinction times. The run keeps going after consensus until
/// both species are extinct, a zero-propensity rest state, or `max_events`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GillespieRun {
    pub stats: TrajectoryStats,
    /// Continuous time each species hit zero; `None` when it was still
    /// alive at the end of the run.
    pub extinct_time: [Option<f64>; 2],
    /// Total events over the whole run, including past consensus.
    pub events: u64,
    /// Continuous time at the end of the run.
    pub elapsed_total: f64,
}

/// Exponential-clock run. Selection draws come from the same substream as
/// [`run_to_consensus`], so for an identical stream key the embedded state
/// sequence matches the jump runner step for step.
pub fn gillespie_run(
    spec: &ModelSpec,
    init: Config,
    stream: &mut TrialStream,
    max_events: u64,
) -> Result<GillespieRun> {
    check_init(init)?;
    let mut acc = Accounting::new(init);
    let mut c = init;
    let mut t = 0.0_f64;
    let mut events = 0u64;
    let mut extinct: [Option<f64>; 2] = [None, None];
    let mut at_consensus = c.is_consensus();
    if c.x0 == 0 {
        extinct[0] = Some(0.0);
    }
    if c.x1 == 0 {
        extinct[1] = Some(0.0);
    }
    if at_consensus {
        acc.finish(c);
        acc.stats.elapsed = Some(0.0);
    }

    while !(c.x0 == 0 && c.x1 == 0) && events < max_events {
        if !at_consensus {
            acc.before_step(c);
        }
        let props = spec.propensities_raw(c)?;
        if !(props.total > 0.0) {
            if at_consensus {
                // Survivor has no reactions left (all its rates are zero);
                // nothing more can happen.
                break;
            }
            return Err(Error::ZeroPropensity { x0: c.x0, x1: c.x1 });
        }
        t += -stream.aux_open().ln() / props.total;
        let k = select_reaction(&props, stream.xi());
        let after = spec.apply_unchecked(c, k);
        events += 1;
        if !at_consensus {
            let class = spec.classify_applied(c, k, after);
            acc.record(&class, after);
        }
        if after.x0 == 0 && extinct[0].is_none() {
            extinct[0] = Some(t);
        }
        if after.x1 == 0 && extinct[1].is_none() {
            extinct[1] = Some(t);
        }
        if !at_consensus && after.is_consensus() {
            at_consensus = true;
            acc.finish(after);
            acc.stats.elapsed = Some(t);
        }
        c = after;
    }
    if !at_consensus {
        acc.finish(c); // censored
    }
    Ok(GillespieRun {
        stats: acc.stats,
        extinct_time: extinct,
        events,
        elapsed_total: t,
    })
}

/// Writes one dump line per event: `step kind x0 x1 dGap tag`, state taken
/// after the event.
pub fn write_dump_line<W: Write>(
    w: &mut W,
    step: u64,
    kind: ReactionKind,
    after: Config,
    class: &EventClass,
) -> std::io::Result<()> {
    writeln!(
        w,
        "{} {} {} {} {} {}",
        step,
        kind.code(),
        after.x0,
        after.x1,
        class.d_gap_initial,
        class.tag.code()
    )
}

/// One parsed trajectory dump line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpEvent {
    pub step: u64,
    pub kind: ReactionKind,
    pub after: Config,
    pub d_gap_initial: i32,
    pub tag: EventTag,
}

/// Parses the dump format written by [`write_dump_line`]. Blank lines and
/// `#` comments are skipped.
pub fn parse_dump(text: &str) -> Result<Vec<DumpEvent>> {
    let mut events = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let fail = |detail: &str| Error::SpecParse(format!("dump line {}: {detail}", lineno + 1));
        if fields.len() != 6 {
            return Err(fail("expected 6 fields"));
        }
        let step = fields[0].parse().map_err(|_| fail("bad step"))?;
        let kind = ReactionKind::from_code(fields[1]).ok_or_else(|| fail("bad reaction code"))?;
        let x0 = fields[2].parse().map_err(|_| fail("bad x0"))?;
        let x1 = fields[3].parse().map_err(|_| fail("bad x1"))?;
        let d_gap_initial = fields[4].parse().map_err(|_| fail("bad dGap"))?;
        let tag = EventTag::from_code(fields[5]).ok_or_else(|| fail("bad tag"))?;
        events.push(DumpEvent {
            step,
            kind,
            after: Config::new(x0, x1),
            d_gap_initial,
            tag,
        });
    }
    Ok(events)
}
