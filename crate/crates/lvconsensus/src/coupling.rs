//! Coupled construction of the two-species jump chain and its dominating
//! birth-death chain on one shared uniform stream.
//!
//! Both processes read the same uniform `xi` each step. The birth-death
//! walker tracks the minority count: it moves up when `xi < p(m)`, down when
//! `xi >= 1 - q(m)`, and holds otherwise. The two-species pair moves in
//! lockstep only while its minority count equals the walker ("unfrozen");
//! it then samples an event *conditioned* on the category that `xi` selects:
//!
//! * `xi` in `[0, P)` picks a bad non-competitive event (the minority grows
//!   or the majority shrinks by an individual event),
//! * `xi` in `[1 - Q, 1)` picks a good event (the minority shrinks),
//! * anything between picks one of the remaining events.
//!
//! `P` and `Q` are the model's category masses at the current state divided
//! by the total rate, so the conditional law composes back to the plain jump
//! chain, while the walker's rule thresholds dominate them pointwise
//! (`P <= p(m)`, `Q >= q(m)`, checked at every unfrozen step). A second
//! stream picks the concrete reaction inside the selected category. While
//! the two minority counts differ the pair is frozen and only the walker
//! moves.
//!
//! The run records meeting times, bad-event and birth counters, and
//! invariant violations (which stay zero unless the construction itself is
//! broken; they are counted, not asserted, so a breach shows up in reports).

use crate::birth_death::{dominating_chain, NiceChainSpec};
use crate::error::{Error, Result};
use crate::model::{Config, EventClass, EventFamily, EventMasses, EventTag, ModelSpec, ReactionKind};
use crate::rng::TrialStream;
use crate::simulate::DumpEvent;

/// Options for [`coupled_run`] and [`replay_coupled_run`].
#[derive(Debug, Clone, Copy)]
pub struct CouplingOptions {
    /// Step cap; `None` derives [`default_coupling_cap`] from the initial
    /// total population.
    pub cap: Option<u64>,
    /// Narrow the good category to competitive events only. Individual good
    /// events then fall into the middle band. The down rule still holds:
    /// the competitive good mass alone dominates `q(m)`, because the rule's
    /// witness is built from the interaction rates, so the cross-checks stay
    /// on in this reading too.
    pub good_competitive_only: bool,
    /// How many meeting-time states to keep verbatim in the report.
    pub snapshot_limit: usize,
}

impl Default for CouplingOptions {
    fn default() -> CouplingOptions {
        CouplingOptions {
            cap: None,
            good_competitive_only: false,
            snapshot_limit: 8,
        }
    }
}

/// Default step cap for a coupled run started at total population `n`.
pub fn default_coupling_cap(n: u64) -> u64 {
    100_000 * (n + 1)
}

/// Outcome of one coupled run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingReport {
    /// Shared steps taken (both processes see one `xi` per step).
    pub steps: u64,
    /// Steps on which the pair was unfrozen and sampled an event.
    pub unfrozen_steps: u64,
    /// Steps after which the pair's minority exceeded the walker.
    pub violations_min: u64,
    /// Steps after which the pair's bad-event count exceeded the walker's
    /// birth count.
    pub violations_j: u64,
    /// Times at which the minority counts met (always starts with 0).
    pub tau: Vec<u64>,
    /// The pair's state at the first few meeting times.
    pub tau_states: Vec<(u64, Config)>,
    /// Bad non-competitive events sampled by the pair.
    pub j_final: u64,
    /// Up moves taken by the walker.
    pub b_final: u64,
    /// Pair state when the run stopped.
    pub s_final: Config,
    /// Walker state when the run stopped.
    pub n_final: u64,
    /// True when the cap stopped the run before both processes absorbed.
    pub censored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Bad,
    Good,
    Middle,
}

impl Category {
    fn name(self) -> &'static str {
        match self {
            Category::Bad => "bad",
            Category::Good => "good",
            Category::Middle => "middle",
        }
    }
}

fn category_of(class: &EventClass, good_competitive_only: bool) -> Category {
    match class.tag {
        EventTag::BadNonCompetitive => Category::Bad,
        EventTag::Good => {
            if good_competitive_only && class.family == EventFamily::Individual {
                Category::Middle
            } else {
                Category::Good
            }
        }
        _ => Category::Middle,
    }
}

/// Selection intervals at one state: `(P, Q, middle mass)` where `P` and `Q`
/// are probabilities and the middle mass is a rate.
fn interval_fractions(
    masses: &EventMasses,
    good_competitive_only: bool,
    state: Config,
) -> Result<(f64, f64, f64)> {
    if !(masses.total > 0.0) {
        return Err(Error::ZeroPropensity {
            x0: state.x0,
            x1: state.x1,
        });
    }
    let good_mass = if good_competitive_only {
        masses.good_competitive
    } else {
        masses.good()
    };
    let middle_mass = masses.neutral
        + masses.bad_competitive
        + if good_competitive_only {
            masses.good_individual
        } else {
            0.0
        };
    let p = masses.bad_noncompetitive / masses.total;
    let q = good_mass / masses.total;
    if p + q > 1.0 + 1e-12 {
        return Err(Error::RuleIntervals {
            x0: state.x0,
            x1: state.x1,
            p,
            q,
        });
    }
    Ok((p, q, middle_mass))
}

/// Category selected by `xi` at one state. The middle band can be a pure
/// rounding sliver (its mass underflows to zero while `P + Q` rounds below
/// one); a hit there is redirected to the adjacent nonempty category so the
/// selection always lands on a reaction with positive rate.
fn decide_category(
    masses: &EventMasses,
    good_competitive_only: bool,
    xi: f64,
    state: Config,
) -> Result<(Category, f64)> {
    let (p, q, middle_mass) = interval_fractions(masses, good_competitive_only, state)?;
    let good_mass = if good_competitive_only {
        masses.good_competitive
    } else {
        masses.good()
    };
    if xi < p {
        return Ok((Category::Bad, masses.bad_noncompetitive));
    }
    if xi >= 1.0 - q {
        return Ok((Category::Good, good_mass));
    }
    if middle_mass > 0.0 {
        return Ok((Category::Middle, middle_mass));
    }
    if good_mass > 0.0 {
        Ok((Category::Good, good_mass))
    } else {
        Ok((Category::Bad, masses.bad_noncompetitive))
    }
}

/// Picks the reaction at position `u * category_mass` inside `category`,
/// walking the fixed reaction order. Rounding at the upper boundary falls
/// back to the category's last member.
fn select_in_category(
    spec: &ModelSpec,
    c: Config,
    category: Category,
    category_mass: f64,
    good_competitive_only: bool,
    u: f64,
) -> Result<(ReactionKind, Config, EventClass)> {
    let props = spec.propensities_raw(c)?;
    let target = u * category_mass;
    let mut acc = 0.0;
    let mut last = None;
    for (k, rate) in ReactionKind::ALL.into_iter().zip(props.rates) {
        if !(rate > 0.0) {
            continue;
        }
        let after = spec.apply_unchecked(c, k);
        let class = spec.classify_applied(c, k, after);
        if category_of(&class, good_competitive_only) != category {
            continue;
        }
        acc += rate;
        last = Some((k, after, class));
        if target < acc {
            break;
        }
    }
    last.ok_or(Error::RuleIntervals {
        x0: c.x0,
        x1: c.x1,
        p: f64::NAN,
        q: f64::NAN,
    })
}

fn check_premises(p: f64, q: f64, chain: &NiceChainSpec, m: u64, state: Config) -> Result<()> {
    if let Some((which, actual, bound)) = premise_violation(p, q, chain.p(m), chain.q(m)) {
        return Err(Error::NotDominating {
            x0: state.x0,
            x1: state.x1,
            which,
            actual,
            bound,
        });
    }
    Ok(())
}

/// The two domination premises at one minority count, compared exactly: the
/// model's bad probability must not exceed the walker's up rule, and its
/// good probability must not fall below the down rule.
fn premise_violation(p: f64, q: f64, p_bound: f64, q_bound: f64) -> Option<(&'static str, f64, f64)> {
    if p > p_bound {
        return Some(("bad probability above the up rule", p, p_bound));
    }
    if q < q_bound {
        return Some(("good probability below the down rule", q, q_bound));
    }
    None
}

struct Progress {
    report: CouplingReport,
    snapshot_limit: usize,
}

impl Progress {
    fn new(init: Config, n: u64, snapshot_limit: usize) -> Progress {
        let mut p = Progress {
            report: CouplingReport {
                steps: 0,
                unfrozen_steps: 0,
                violations_min: 0,
                violations_j: 0,
                tau: Vec::new(),
                tau_states: Vec::new(),
                j_final: 0,
                b_final: 0,
                s_final: init,
                n_final: n,
                censored: false,
            },
            snapshot_limit,
        };
        p.meet(0, init);
        p
    }

    fn meet(&mut self, t: u64, s: Config) {
        self.report.tau.push(t);
        if self.report.tau_states.len() < self.snapshot_limit {
            self.report.tau_states.push((t, s));
        }
    }

    fn after_step(&mut self, t: u64, s: Config, n: u64) {
        self.report.steps = t;
        if s.min_count() > n {
            self.report.violations_min += 1;
        }
        if self.report.j_final > self.report.b_final {
            self.report.violations_j += 1;
        }
        if !s.is_consensus() && s.min_count() == n {
            self.meet(t, s);
        }
    }

    fn finish(mut self, s: Config, n: u64, censored: bool) -> CouplingReport {
        self.report.s_final = s;
        self.report.n_final = n;
        self.report.censored = censored;
        self.report
    }
}

/// Runs the coupled pair until the two-species chain reaches consensus, or
/// until the cap. See the module docs for the construction.
///
/// Stopping at pair consensus loses nothing: domination keeps the pair's
/// minimum at or below the walker, so the pair absorbs no later than the
/// walker, and afterwards its minimum is pinned at zero and its bad count
/// frozen while the walker's birth count only grows; neither invariant can
/// break again. Waiting for the walker itself to die can also take
/// astronomically long (its rule constants give it an uphill-drift well at
/// small states), so it is not simulated past the pair's consensus.
///
/// The walker consumes one `xi` per step; the event substream is consumed
/// only on unfrozen steps. Initial states need not put species 0 in the
/// majority; the walker starts at `init.min_count()`.
pub fn coupled_run(
    spec: &ModelSpec,
    init: Config,
    stream: &mut TrialStream,
    options: CouplingOptions,
) -> Result<CouplingReport> {
    coupled_run_with(spec, init, stream, options, |_, _, _| ())
}

/// [`coupled_run`] with a per-step observer `(step, xi, sampled event)`.
/// Steps are 1-based; the event is `None` on frozen steps. Trajectory and
/// `xi` dumps are written through this hook.
pub fn coupled_run_with<F>(
    spec: &ModelSpec,
    init: Config,
    stream: &mut TrialStream,
    options: CouplingOptions,
    mut on_step: F,
) -> Result<CouplingReport>
where
    F: FnMut(u64, f64, Option<(ReactionKind, Config, &EventClass)>),
{
    let spec = spec.validated()?;
    let chain = dominating_chain(&spec)?;
    let cap = options
        .cap
        .unwrap_or_else(|| default_coupling_cap(init.total()));
    let mut s = init;
    let mut n = init.min_count();
    let mut progress = Progress::new(init, n, options.snapshot_limit);
    let mut t: u64 = 0;
    while !s.is_consensus() {
        if t >= cap {
            return Ok(progress.finish(s, n, true));
        }
        let xi = stream.xi();
        let up = xi < chain.p(n);
        let down = !up && xi >= 1.0 - chain.q(n);
        let unfrozen = !s.is_consensus() && s.min_count() == n;
        let mut sampled = None;
        if unfrozen {
            let masses = spec.event_masses(s)?;
            let (p, q, _) = interval_fractions(&masses, options.good_competitive_only, s)?;
            check_premises(p, q, &chain, n, s)?;
            let (category, category_mass) =
                decide_category(&masses, options.good_competitive_only, xi, s)?;
            let (kind, after, class) = select_in_category(
                &spec,
                s,
                category,
                category_mass,
                options.good_competitive_only,
                stream.aux(),
            )?;
            if class.tag == EventTag::BadNonCompetitive {
                progress.report.j_final += 1;
            }
            progress.report.unfrozen_steps += 1;
            sampled = Some((kind, after, class));
        }
        if up {
            progress.report.b_final += 1;
            n += 1;
        } else if down {
            n = n.saturating_sub(1);
        }
        if let Some((_, after, _)) = sampled {
            s = after;
        }
        t += 1;
        match &sampled {
            Some((kind, after, class)) => on_step(t, xi, Some((*kind, *after, class))),
            None => on_step(t, xi, None),
        }
        progress.after_step(t, s, n);
    }
    Ok(progress.finish(s, n, false))
}

/// Re-runs a coupled trajectory from its recorded `xi` values and event
/// dump, verifying at every unfrozen step that the recorded event exists,
/// matches its recorded successor and tag, and falls in the category its
/// `xi` selects. Returns the reconstructed report, which must equal the
/// original's bit for bit.
///
/// Runs out of `xi` values before absorption: censored report. Runs out of
/// events, or any disagreement: [`Error::ReplayMismatch`].
pub fn replay_coupled_run(
    spec: &ModelSpec,
    init: Config,
    xis: &[f64],
    events: &[DumpEvent],
    options: CouplingOptions,
) -> Result<CouplingReport> {
    let spec = spec.validated()?;
    let chain = dominating_chain(&spec)?;
    let cap = options
        .cap
        .unwrap_or_else(|| default_coupling_cap(init.total()));
    let mut s = init;
    let mut n = init.min_count();
    let mut progress = Progress::new(init, n, options.snapshot_limit);
    let mut next_event = 0usize;
    let mut t: u64 = 0;
    while !s.is_consensus() {
        if t >= cap || t as usize >= xis.len() {
            return Ok(progress.finish(s, n, true));
        }
        let xi = xis[t as usize];
        let mismatch = |detail: String| Error::ReplayMismatch { step: t + 1, detail };
        if !(0.0..1.0).contains(&xi) {
            return Err(mismatch(format!("xi {xi} outside [0, 1)")));
        }
        let unfrozen = !s.is_consensus() && s.min_count() == n;
        if unfrozen {
            let ev = *events
                .get(next_event)
                .ok_or_else(|| mismatch("event dump ended while the pair was unfrozen".into()))?;
            next_event += 1;
            let masses = spec.event_masses(s)?;
            let (p, q, _) = interval_fractions(&masses, options.good_competitive_only, s)?;
            check_premises(p, q, &chain, n, s)?;
            let (category, _) = decide_category(&masses, options.good_competitive_only, xi, s)?;
            let class = spec
                .classify(s, ev.kind)
                .map_err(|e| mismatch(format!("recorded event infeasible: {e}")))?;
            let after = spec.apply_unchecked(s, ev.kind);
            if after != ev.after {
                return Err(mismatch(format!(
                    "successor mismatch for {}: recorded ({}, {}), recomputed ({}, {})",
                    ev.kind.code(),
                    ev.after.x0,
                    ev.after.x1,
                    after.x0,
                    after.x1
                )));
            }
            if class.tag != ev.tag || class.d_gap_initial != ev.d_gap_initial {
                return Err(mismatch(format!(
                    "classification mismatch for {}: recorded ({}, dGap {}), recomputed ({}, dGap {})",
                    ev.kind.code(),
                    ev.tag.code(),
                    ev.d_gap_initial,
                    class.tag.code(),
                    class.d_gap_initial
                )));
            }
            let recorded_category = category_of(&class, options.good_competitive_only);
            if recorded_category != category {
                return Err(mismatch(format!(
                    "event {} is in the {} category but xi {} selects {}",
                    ev.kind.code(),
                    recorded_category.name(),
                    xi,
                    category.name()
                )));
            }
            if class.tag == EventTag::BadNonCompetitive {
                progress.report.j_final += 1;
            }
            progress.report.unfrozen_steps += 1;
            s = after;
        }
        if xi < chain.p(n) {
            progress.report.b_final += 1;
            n += 1;
        } else if xi >= 1.0 - chain.q(n) {
            n = n.saturating_sub(1);
        }
        t += 1;
        progress.after_step(t, s, n);
    }
    if next_event < events.len() {
        return Err(Error::ReplayMismatch {
            step: t,
            detail: format!(
                "{} recorded events left after the coupled pair absorbed",
                events.len() - next_event
            ),
        });
    }
    Ok(progress.finish(s, n, false))
}

/// One state at which a domination premise failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominationViolation {
    pub x0: u64,
    pub x1: u64,
    pub which: &'static str,
    pub actual: f64,
    pub bound: f64,
}

/// Result of sweeping the domination premises over a state box.
#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub amax: u64,
    pub states_checked: u64,
    pub violations: u64,
    /// First few violations, for diagnostics (capped at 10).
    pub examples: Vec<DominationViolation>,
}

/// Checks both domination premises exactly at every state `(a, b)` with
/// `1 <= a, b <= amax`, both orientations: the model's bad probability never
/// exceeds the walker's up rule at the minority count, and its good
/// probability never falls below the down rule. The comparisons carry no
/// tolerance; the underlying inequalities hold with real margin wherever
/// they are strict, and as exact float equality where they degenerate.
pub fn check_domination_premises(spec: &ModelSpec, amax: u64) -> Result<DominationReport> {
    let spec = spec.validated()?;
    let chain = dominating_chain(&spec)?;
    let mut report = DominationReport {
        amax,
        states_checked: 0,
        violations: 0,
        examples: Vec::new(),
    };
    for a in 1..=amax {
        for b in 1..=amax {
            let state = Config::new(a, b);
            let masses = spec.event_masses(state)?;
            let (p, q, _) = interval_fractions(&masses, false, state)?;
            let m = state.min_count();
            report.states_checked += 1;
            if let Some((which, actual, bound)) = premise_violation(p, q, chain.p(m), chain.q(m)) {
                report.violations += 1;
                if report.examples.len() < 10 {
                    report.examples.push(DominationViolation {
                        x0: a,
                        x1: b,
                        which,
                        actual,
                        bound,
                    });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mode;

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
    }

    /// Small individual rates give a walker with downhill drift everywhere,
    /// so coupled runs absorb quickly. The neutral spec above instead yields
    /// a walker that hovers (`p(1) = 2/3` vs `q = 0.1`), which freezes the
    /// pair for astronomically long stretches; runs with it are useful as
    /// windowed invariant checks but never complete at desk scale.
    fn fast_spec(mode: Mode) -> ModelSpec {
        ModelSpec {
            beta: 0.05,
            delta: 0.05,
            ..neutral_spec(mode)
        }
    }

    #[test]
    fn meets_at_time_zero() {
        let spec = neutral_spec(Mode::SelfDestructive);
        let mut stream = TrialStream::from_seed(7);
        let report = coupled_run(&spec, Config::new(3, 2), &mut stream, CouplingOptions::default())
            .expect("coupled run");
        assert_eq!(report.tau[0], 0, "first meeting must be at time zero");
        assert_eq!(report.tau_states[0], (0, Config::new(3, 2)));
    }

    #[test]
    fn consensus_start_is_a_zero_step_run() {
        let spec = neutral_spec(Mode::SelfDestructive);
        let mut stream = TrialStream::from_seed(1);
        let report = coupled_run(&spec, Config::new(4, 0), &mut stream, CouplingOptions::default())
            .expect("coupled run");
        assert_eq!(report.steps, 0);
        assert_eq!(report.n_final, 0);
        assert_eq!(report.s_final, Config::new(4, 0));
        assert!(!report.censored);
    }

    #[test]
    fn completed_runs_absorb_with_zero_violations() {
        for mode in [Mode::SelfDestructive, Mode::NonSelfDestructive] {
            let spec = fast_spec(mode);
            for seed in 0..40 {
                let mut stream = TrialStream::from_seed(seed);
                let report =
                    coupled_run(&spec, Config::new(8, 5), &mut stream, CouplingOptions::default())
                        .expect("coupled run");
                assert!(!report.censored, "seed {seed} censored");
                assert_eq!(report.violations_min, 0, "seed {seed} broke min domination");
                assert_eq!(report.violations_j, 0, "seed {seed} broke the J <= B bound");
                assert!(report.j_final <= report.b_final);
                assert!(report.s_final.is_consensus());
                assert!(
                    report.tau.windows(2).all(|w| w[0] < w[1]),
                    "meeting times must be strictly increasing"
                );
                assert!(report.tau_states.len() <= 8);
            }
        }
    }

    #[test]
    fn windowed_runs_with_a_hovering_walker_stay_violation_free() {
        for mode in [Mode::SelfDestructive, Mode::NonSelfDestructive] {
            let spec = neutral_spec(mode);
            for seed in 0..10 {
                let mut stream = TrialStream::from_seed(seed);
                let options = CouplingOptions {
                    cap: Some(50_000),
                    ..CouplingOptions::default()
                };
                let report = coupled_run(&spec, Config::new(8, 5), &mut stream, options)
                    .expect("coupled run");
                assert_eq!(report.violations_min, 0, "seed {seed} broke min domination");
                assert_eq!(report.violations_j, 0, "seed {seed} broke the J <= B bound");
                assert!(report.j_final <= report.b_final);
                assert!(
                    report.censored || report.s_final.is_consensus(),
                    "a run either absorbs or reports its window honestly"
                );
            }
        }
    }

    #[test]
    fn lockstep_follows_rule_thresholds() {
        let spec = neutral_spec(Mode::SelfDestructive);
        let chain = dominating_chain(&spec).expect("chain");
        let mut stream = TrialStream::from_seed(11);
        let mut s = Config::new(6, 4);
        let mut n = s.min_count();
        let report = coupled_run_with(
            &spec,
            s,
            &mut stream,
            CouplingOptions::default(),
            |_, xi, event| {
                let unfrozen = !s.is_consensus() && s.min_count() == n;
                assert_eq!(
                    event.is_some(),
                    unfrozen,
                    "pair must sample exactly on unfrozen steps"
                );
                if let Some((_, after, class)) = event {
                    if class.tag == EventTag::BadNonCompetitive {
                        assert!(
                            xi < chain.p(n),
                            "a bad event needs xi {xi} under the up rule {}",
                            chain.p(n)
                        );
                    }
                    s = after;
                }
                if xi < chain.p(n) {
                    n += 1;
                } else if xi >= 1.0 - chain.q(n) {
                    n -= 1;
                }
            },
        )
        .expect("coupled run");
        assert_eq!(report.s_final, s, "observer mirror must track the pair");
        assert_eq!(report.n_final, n, "observer mirror must track the walker");
    }

    #[test]
    fn cap_censors_and_reports() {
        let spec = neutral_spec(Mode::SelfDestructive);
        let mut stream = TrialStream::from_seed(3);
        let options = CouplingOptions {
            cap: Some(3),
            ..CouplingOptions::default()
        };
        let report =
            coupled_run(&spec, Config::new(50, 50), &mut stream, options).expect("coupled run");
        assert!(report.censored);
        assert_eq!(report.steps, 3);
    }

    #[test]
    fn replay_reproduces_the_original_report() {
        for mode in [Mode::SelfDestructive, Mode::NonSelfDestructive] {
            let spec = fast_spec(mode);
            let init = Config::new(7, 5);
            let mut xis = Vec::new();
            let mut events = Vec::new();
            let mut stream = TrialStream::from_seed(21);
            let original = coupled_run_with(
                &spec,
                init,
                &mut stream,
                CouplingOptions::default(),
                |step, xi, event| {
                    xis.push(xi);
                    if let Some((kind, after, class)) = event {
                        events.push(DumpEvent {
                            step,
                            kind,
                            after,
                            d_gap_initial: class.d_gap_initial,
                            tag: class.tag,
                        });
                    }
                },
            )
            .expect("coupled run");
            let replayed =
                replay_coupled_run(&spec, init, &xis, &events, CouplingOptions::default())
                    .expect("replay");
            assert_eq!(replayed, original, "replay must reproduce the report");
        }
    }

    #[test]
    fn replay_rejects_tampered_events() {
        let spec = fast_spec(Mode::SelfDestructive);
        let init = Config::new(7, 5);
        let mut xis = Vec::new();
        let mut events = Vec::new();
        let mut stream = TrialStream::from_seed(21);
        coupled_run_with(
            &spec,
            init,
            &mut stream,
            CouplingOptions::default(),
            |step, xi, event| {
                xis.push(xi);
                if let Some((kind, after, class)) = event {
                    events.push(DumpEvent {
                        step,
                        kind,
                        after,
                        d_gap_initial: class.d_gap_initial,
                        tag: class.tag,
                    });
                }
            },
        )
        .expect("coupled run");

        let mut wrong_state = events.clone();
        wrong_state[0].after = Config::new(99, 99);
        let err = replay_coupled_run(&spec, init, &xis, &wrong_state, CouplingOptions::default())
            .expect_err("tampered successor must fail");
        assert!(matches!(err, Error::ReplayMismatch { .. }), "got {err}");

        let truncated = &events[..events.len() - 1];
        let err = replay_coupled_run(&spec, init, &xis, truncated, CouplingOptions::default())
            .expect_err("truncated dump must fail");
        assert!(matches!(err, Error::ReplayMismatch { .. }), "got {err}");

        let mut extra = events.clone();
        extra.push(events[events.len() - 1]);
        let err = replay_coupled_run(&spec, init, &xis, &extra, CouplingOptions::default())
            .expect_err("leftover events must fail");
        assert!(matches!(err, Error::ReplayMismatch { .. }), "got {err}");
    }

    #[test]
    fn replay_with_short_xi_stream_is_censored() {
        let spec = fast_spec(Mode::SelfDestructive);
        let init = Config::new(7, 5);
        let mut xis = Vec::new();
        let mut events = Vec::new();
        let mut stream = TrialStream::from_seed(21);
        coupled_run_with(
            &spec,
            init,
            &mut stream,
            CouplingOptions::default(),
            |step, xi, event| {
                xis.push(xi);
                if let Some((kind, after, class)) = event {
                    events.push(DumpEvent {
                        step,
                        kind,
                        after,
                        d_gap_initial: class.d_gap_initial,
                        tag: class.tag,
                    });
                }
            },
        )
        .expect("coupled run");
        let report = replay_coupled_run(&spec, init, &xis[..2], &events, CouplingOptions::default())
            .expect("short replay");
        assert!(report.censored);
        assert_eq!(report.steps, 2);
    }

    #[test]
    fn premises_hold_on_a_desk_scale_box() {
        for mode in [Mode::SelfDestructive, Mode::NonSelfDestructive] {
            let report = check_domination_premises(&neutral_spec(mode), 60).expect("check");
            assert_eq!(report.states_checked, 3600);
            assert_eq!(report.violations, 0, "violations: {:?}", report.examples);
        }
    }

    #[test]
    fn premises_hold_for_an_asymmetric_spec() {
        let spec = ModelSpec {
            alpha0: 0.7,
            alpha1: 0.2,
            beta: 0.3,
            delta: 1.1,
            gamma0: 0.0,
            gamma1: 0.0,
            mode: Mode::NonSelfDestructive,
        };
        let report = check_domination_premises(&spec, 40).expect("check");
        assert_eq!(report.violations, 0, "violations: {:?}", report.examples);
    }

    #[test]
    fn premise_comparison_detects_breaches() {
        assert_eq!(premise_violation(0.2, 0.4, 0.3, 0.3), None);
        assert_eq!(premise_violation(0.3, 0.4, 0.3, 0.3), None, "equality is allowed");
        let (which, actual, bound) =
            premise_violation(0.31, 0.4, 0.3, 0.3).expect("bad probability breach");
        assert!(which.contains("up rule"));
        assert_eq!((actual, bound), (0.31, 0.3));
        let (which, ..) = premise_violation(0.2, 0.29, 0.3, 0.3).expect("good probability breach");
        assert!(which.contains("down rule"));
    }

    #[test]
    fn premise_check_rejects_intra_rates() {
        let mut spec = neutral_spec(Mode::SelfDestructive);
        spec.gamma0 = 0.5;
        spec.gamma1 = 0.5;
        let err = check_domination_premises(&spec, 10).expect_err("intra rates break the rules");
        assert!(matches!(err, Error::RequiresNoIntra), "got {err}");
    }

    #[test]
    fn good_competitive_only_narrows_the_good_band() {
        let spec = neutral_spec(Mode::SelfDestructive);
        let state = Config::new(2, 1);
        let masses = spec.event_masses(state).expect("masses");
        // Rates at (2, 1): births 3, deaths 3, inter 2. Good mass counts the
        // inter pair kill plus the minority death; competitive-only drops
        // the death.
        let (_, q_all, _) = interval_fractions(&masses, false, state).expect("intervals");
        let (_, q_comp, _) = interval_fractions(&masses, true, state).expect("intervals");
        assert!((q_all - 3.0 / 8.0).abs() < 1e-15, "q_all {q_all}");
        assert!((q_comp - 2.0 / 8.0).abs() < 1e-15, "q_comp {q_comp}");
        let xi = 0.7;
        let (cat, _) = decide_category(&masses, false, xi, state).expect("category");
        assert_eq!(cat, Category::Good);
        let (cat, _) = decide_category(&masses, true, xi, state).expect("category");
        assert_eq!(cat, Category::Middle);
    }

    #[test]
    fn narrowed_reading_still_respects_min_domination() {
        let spec = fast_spec(Mode::SelfDestructive);
        let options = CouplingOptions {
            good_competitive_only: true,
            ..CouplingOptions::default()
        };
        for seed in 0..20 {
            let mut stream = TrialStream::from_seed(seed);
            let report =
                coupled_run(&spec, Config::new(6, 4), &mut stream, options).expect("coupled run");
            assert!(!report.censored, "seed {seed} censored");
            assert_eq!(report.violations_min, 0, "seed {seed} broke min domination");
            assert_eq!(report.violations_j, 0, "seed {seed} broke the J <= B bound");
            assert!(report.j_final <= report.b_final);
        }
    }

    #[test]
    fn default_cap_scales_with_population() {
        assert_eq!(default_coupling_cap(0), 100_000);
        assert_eq!(default_coupling_cap(9), 1_000_000);
    }
}
