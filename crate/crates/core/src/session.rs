//! The cue / oracle learning protocol.
//!
//! A session starts from a context whose attributes are declared (objects are
//! optional) in the `Belief` phase under a uniform prior. Each measurement cue
//! is an [`Implication`]:
//!
//! * if the current context already refutes it, the session answers itself
//!   and is `Conscious` of the failure;
//! * otherwise the oracle is asked. Acceptance makes the session `Conscious`;
//!   a counterexample makes it `Uncertain` until the counterexample object is
//!   learnt through [`Session::resolve`], one granule later.
//!
//! Every step appends a [`TraceEvent`]; the event stream is enough to rebuild
//! the session with [`Session::from_trace`].

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::context::{ContextError, FormalContext, TimeGranule};
use crate::ensemble::{BeliefState, EnsembleError};
use crate::lattice::{self, check, is_counterexample, ConceptLattice, Implication, LatticeError, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("context declares no attributes")]
    EmptyBasis,
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("`{name}` is not a counterexample to {implication}")]
    NotACounterexample { name: String, implication: Implication },
    #[error("granule {requested} is beyond the current granule {current}")]
    UnknownGranule { requested: u64, current: u64 },
    #[error("reference object `{0}` is already known with a different intent")]
    InconsistentReference(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("malformed trace: {0}")]
    Trace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Belief,
    Conscious,
    Uncertain,
    Terminal,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Belief => "belief",
            Phase::Conscious => "conscious",
            Phase::Uncertain => "uncertain",
            Phase::Terminal => "terminal",
        })
    }
}

/// Lifecycle edges produced by cues, answers and resolutions.
pub fn is_lifecycle_transition(from: Phase, to: Phase) -> bool {
    use Phase::*;
    matches!(
        (from, to),
        (Belief, Conscious | Uncertain) | (Uncertain, Conscious | Uncertain) | (Conscious, Conscious | Uncertain | Terminal)
    )
}

/// Edges only an explicit give-up can add.
pub fn is_give_up_transition(from: Phase, to: Phase) -> bool {
    to == Phase::Terminal && from != Phase::Terminal
}

/// An object together with its full intent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportingObject {
    pub intent: Vec<String>,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleAnswer {
    Accept,
    Counterexample(SupportingObject),
    GiveUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Scripted,
    Interactive,
}

/// Something that can confirm or refute a measurement cue.
pub trait Oracle {
    fn kind(&self) -> OracleKind;

    fn answer(&mut self, current: &FormalContext, cue: &Implication) -> Result<OracleAnswer, SessionError>;
}

/// Answers from a fixed reference context.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    reference: FormalContext,
}

impl ScriptedOracle {
    pub fn new(reference: FormalContext) -> Self {
        ScriptedOracle { reference }
    }

    pub fn reference(&self) -> &FormalContext {
        &self.reference
    }
}

impl Oracle for ScriptedOracle {
    fn kind(&self) -> OracleKind {
        OracleKind::Scripted
    }

    /// Accepts iff the cue holds (possibly vacuously) in the reference.
    /// Otherwise names the first violating reference object, in declaration
    /// order, that the learner does not know yet.
    fn answer(&mut self, current: &FormalContext, cue: &Implication) -> Result<OracleAnswer, SessionError> {
        let reference = &self.reference;
        let (premise, conclusion) = cue.resolve(reference)?;
        if check(reference, &premise, &conclusion).is_true() {
            return Ok(OracleAnswer::Accept);
        }
        let mut known_violator = None;
        for (g, name) in reference.objects().iter().enumerate() {
            if !is_counterexample(reference.row(g), &premise, &conclusion) {
                continue;
            }
            if current.object_position(name).is_some() {
                known_violator.get_or_insert(name);
                continue;
            }
            return Ok(OracleAnswer::Counterexample(SupportingObject {
                intent: reference.attribute_names(reference.row(g)),
                name: name.clone(),
            }));
        }
        Err(SessionError::InconsistentReference(known_violator.cloned().unwrap_or_default()))
    }
}

/// What the oracle said, as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleReply {
    Accept,
    Counterexample(SupportingObject),
    GiveUp,
}

impl From<&OracleAnswer> for OracleReply {
    fn from(a: &OracleAnswer) -> Self {
        match a {
            OracleAnswer::Accept => OracleReply::Accept,
            OracleAnswer::Counterexample(obj) => OracleReply::Counterexample(obj.clone()),
            OracleAnswer::GiveUp => OracleReply::GiveUp,
        }
    }
}

/// One protocol step. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub granule: u64,
    /// The object learnt at this step, if any.
    pub learning_cue: Option<SupportingObject>,
    pub measurement_cue: Option<Implication>,
    /// Verdict of the cue against the context as it stands after this step's learning.
    pub local_verdict: Option<Verdict>,
    /// Absent when the oracle was not consulted.
    pub oracle_answer: Option<OracleReply>,
    pub resulting_phase: Phase,
}

impl TraceEvent {
    /// `-` unless the oracle supplied a counterexample.
    pub fn supporting_cue(&self) -> Option<&str> {
        match &self.oracle_answer {
            Some(OracleReply::Counterexample(obj)) => Some(&obj.name),
            _ => None,
        }
    }

    /// A measurement cue answered by this step, rather than a start or resolution.
    pub fn is_cue(&self) -> bool {
        self.measurement_cue.is_some() && self.learning_cue.is_none()
    }
}

/// One event per line.
pub fn trace_to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
        out.push('\n');
    }
    out
}

pub fn trace_from_jsonl(text: &str) -> Result<Vec<TraceEvent>, SessionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| SessionError::Trace(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Outcome of opening a cue before any oracle is asked.
#[derive(Debug, Clone, PartialEq)]
pub enum CueOpening {
    /// The current context refutes the cue; no oracle needed.
    Settled(TraceEvent),
    /// The context cannot refute the cue; an oracle answer is required.
    AwaitingOracle { local_verdict: Verdict },
}

/// Serializable view of where a session stands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionState {
    pub phase: Phase,
    pub granule: u64,
    pub objects: usize,
    /// Cue rejected by the oracle and not yet resolved.
    pub pending: Option<Implication>,
    /// Cue waiting for an oracle answer.
    pub awaiting: Option<Implication>,
    /// The oracle's counterexample for `pending`.
    pub counterexample: Option<SupportingObject>,
}

#[derive(Debug, Clone)]
pub struct Session {
    oracle_kind: OracleKind,
    initial: FormalContext,
    lattice: ConceptLattice,
    phase: Phase,
    granule: TimeGranule,
    // whether a cue has already been posed at `granule`
    row_used: bool,
    awaiting: Option<(Implication, Verdict)>,
    pending: Option<(Implication, SupportingObject)>,
    accepted: Vec<Implication>,
    trace: Vec<TraceEvent>,
}

impl Session {
    pub fn start(initial: FormalContext, oracle_kind: OracleKind) -> Result<Session, SessionError> {
        if initial.attribute_count() == 0 {
            return Err(SessionError::EmptyBasis);
        }
        let granule = initial.latest_granule().unwrap_or_default();
        let lattice = ConceptLattice::enumerate(&initial);
        let start = TraceEvent {
            granule: granule.0,
            learning_cue: None,
            measurement_cue: None,
            local_verdict: None,
            oracle_answer: None,
            resulting_phase: Phase::Belief,
        };
        Ok(Session {
            oracle_kind,
            initial,
            lattice,
            phase: Phase::Belief,
            granule,
            row_used: false,
            awaiting: None,
            pending: None,
            accepted: Vec::new(),
            trace: vec![start],
        })
    }

    pub fn oracle_kind(&self) -> OracleKind {
        self.oracle_kind
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn granule(&self) -> TimeGranule {
        self.granule
    }

    pub fn context(&self) -> &FormalContext {
        self.lattice.context()
    }

    pub fn initial_context(&self) -> &FormalContext {
        &self.initial
    }

    pub fn lattice(&self) -> &ConceptLattice {
        &self.lattice
    }

    pub fn pending(&self) -> Option<&Implication> {
        self.pending.as_ref().map(|(imp, _)| imp)
    }

    /// The oracle's counterexample to the pending cue.
    pub fn pending_counterexample(&self) -> Option<&SupportingObject> {
        self.pending.as_ref().map(|(_, obj)| obj)
    }

    pub fn awaiting(&self) -> Option<&Implication> {
        self.awaiting.as_ref().map(|(imp, _)| imp)
    }

    pub fn accepted(&self) -> &[Implication] {
        &self.accepted
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            phase: self.phase,
            granule: self.granule.0,
            objects: self.context().object_count(),
            pending: self.pending().cloned(),
            awaiting: self.awaiting().cloned(),
            counterexample: self.pending_counterexample().cloned(),
        }
    }

    /// Every posed cue is settled and nothing is uncertain.
    pub fn is_conscious(&self) -> bool {
        self.phase == Phase::Conscious && self.pending.is_none() && self.awaiting.is_none()
    }

    /// Current belief state: support-weighted amplitudes, or the uniform prior
    /// while no incidence has been learnt.
    pub fn ensemble(&self) -> Result<BeliefState, SessionError> {
        ensemble_of(self.context())
    }

    fn ensure_can_cue(&self) -> Result<(), SessionError> {
        match self.phase {
            Phase::Uncertain => Err(SessionError::ProtocolViolation("a cue is pending resolution".into())),
            Phase::Terminal => Err(SessionError::ProtocolViolation("session has terminated".into())),
            _ if self.awaiting.is_some() => Err(SessionError::ProtocolViolation("a cue is awaiting the oracle".into())),
            _ => Ok(()),
        }
    }

    /// First half of a cue: checks it locally and, if the context refutes
    /// it, settles it without an oracle.
    pub fn open_cue(&mut self, cue: Implication) -> Result<CueOpening, SessionError> {
        self.ensure_can_cue()?;
        let verdict = lattice::holds(self.context(), &cue)?;
        if self.row_used {
            self.granule = self.granule.next();
        }
        self.row_used = true;
        if verdict.is_true() {
            self.awaiting = Some((cue, verdict.clone()));
            return Ok(CueOpening::AwaitingOracle { local_verdict: verdict });
        }
        self.phase = Phase::Conscious;
        let event = TraceEvent {
            granule: self.granule.0,
            learning_cue: None,
            measurement_cue: Some(cue),
            local_verdict: Some(verdict),
            oracle_answer: None,
            resulting_phase: self.phase,
        };
        self.trace.push(event.clone());
        Ok(CueOpening::Settled(event))
    }

    /// Second half of a cue: applies the oracle's answer to the awaited cue.
    /// A counterexample is checked before anything changes.
    pub fn answer(&mut self, answer: OracleAnswer) -> Result<TraceEvent, SessionError> {
        let Some((cue, verdict)) = self.awaiting.clone() else {
            return Err(SessionError::ProtocolViolation("no cue is awaiting an answer".into()));
        };
        if let OracleAnswer::Counterexample(obj) = &answer {
            self.validate_counterexample(&cue, obj)?;
        }
        self.awaiting = None;
        let reply = OracleReply::from(&answer);
        match answer {
            OracleAnswer::Accept => {
                self.phase = Phase::Conscious;
                self.accepted.push(cue.clone());
            }
            OracleAnswer::Counterexample(obj) => {
                self.phase = Phase::Uncertain;
                self.pending = Some((cue.clone(), obj));
            }
            OracleAnswer::GiveUp => self.phase = Phase::Terminal,
        }
        let event = TraceEvent {
            granule: self.granule.0,
            learning_cue: None,
            measurement_cue: Some(cue),
            local_verdict: Some(verdict),
            oracle_answer: Some(reply),
            resulting_phase: self.phase,
        };
        self.trace.push(event.clone());
        Ok(event)
    }

    /// Poses a cue and lets `oracle` answer it when the context cannot.
    pub fn pose_cue(&mut self, cue: Implication, oracle: &mut dyn Oracle) -> Result<TraceEvent, SessionError> {
        match self.open_cue(cue)? {
            CueOpening::Settled(event) => Ok(event),
            CueOpening::AwaitingOracle { .. } => {
                let cue = self.awaiting().cloned().expect("cue is awaiting");
                let answer = oracle.answer(self.context(), &cue)?;
                self.answer(answer)
            }
        }
    }

    fn validate_counterexample(&self, cue: &Implication, obj: &SupportingObject) -> Result<BitSet, SessionError> {
        let ctx = self.context();
        if ctx.object_position(&obj.name).is_some() {
            return Err(ContextError::DuplicateName(obj.name.clone()).into());
        }
        let (premise, conclusion) = cue.resolve(ctx)?;
        let row = ctx.attribute_set(&obj.intent)?;
        if !is_counterexample(&row, &premise, &conclusion) {
            return Err(SessionError::NotACounterexample { name: obj.name.clone(), implication: cue.clone() });
        }
        Ok(row)
    }

    /// Learns `supporting` one granule later. It must refute the pending cue,
    /// after which the session is conscious of the cue's failure.
    pub fn resolve(&mut self, supporting: SupportingObject) -> Result<TraceEvent, SessionError> {
        let Some((cue, _)) = self.pending.clone() else {
            return Err(SessionError::ProtocolViolation("no uncertainty to resolve".into()));
        };
        self.validate_counterexample(&cue, &supporting)?;
        let granule = self.granule.next();
        let lattice = self.lattice.insert_object(&supporting.name, &supporting.intent, granule)?;
        let verdict = lattice::holds(lattice.context(), &cue)?;
        self.lattice = lattice;
        self.granule = granule;
        self.row_used = false;
        if verdict.is_true() {
            // unreachable while counterexamples are validated; kept as the recursion point
            self.phase = Phase::Uncertain;
        } else {
            self.phase = Phase::Conscious;
            self.pending = None;
        }
        let event = TraceEvent {
            granule: granule.0,
            learning_cue: Some(supporting),
            measurement_cue: Some(cue),
            local_verdict: Some(verdict),
            oracle_answer: None,
            resulting_phase: self.phase,
        };
        self.trace.push(event.clone());
        Ok(event)
    }

    /// Resolves with the counterexample the oracle supplied.
    pub fn resolve_with_oracle_counterexample(&mut self) -> Result<TraceEvent, SessionError> {
        let obj = self
            .pending_counterexample()
            .cloned()
            .ok_or_else(|| SessionError::ProtocolViolation("no uncertainty to resolve".into()))?;
        self.resolve(obj)
    }

    /// Ends the session from any live phase.
    pub fn give_up(&mut self) -> Result<TraceEvent, SessionError> {
        if self.awaiting.is_some() {
            return self.answer(OracleAnswer::GiveUp);
        }
        if self.phase == Phase::Terminal {
            return Err(SessionError::ProtocolViolation("session has terminated".into()));
        }
        self.phase = Phase::Terminal;
        let event = TraceEvent {
            granule: self.granule.0,
            learning_cue: None,
            measurement_cue: self.pending().cloned(),
            local_verdict: None,
            oracle_answer: Some(OracleReply::GiveUp),
            resulting_phase: Phase::Terminal,
        };
        self.pending = None;
        self.trace.push(event.clone());
        Ok(event)
    }

    /// The least implication `A -> {b}` that holds in the current context but
    /// is not yet implied by accepted cues.
    ///
    /// Premises range over sets closed under the accepted implications,
    /// ordered by size and then lexicographically on the attribute order;
    /// `b` is the first attribute of `closure(A)` outside the accepted
    /// closure of `A`. Past 24 attributes only premises of up to three
    /// attributes are searched.
    pub fn suggest_cue(&self) -> Option<Implication> {
        if self.ensure_can_cue().is_err() {
            return None;
        }
        let ctx = self.context();
        let n = ctx.attribute_count();
        let accepted: Vec<(BitSet, BitSet)> = self.accepted.iter().filter_map(|imp| imp.resolve(ctx).ok()).collect();
        let max_size = if n > 24 { 3.min(n) } else { n };
        for size in 0..=max_size {
            let mut found = None;
            for_each_combination(n, size, &mut |members| {
                let premise = BitSet::from_indices(n, members.iter().copied());
                if implicational_closure(&accepted, &premise) != premise {
                    return false;
                }
                let target = lattice::closure(ctx, &premise);
                if let Some(b) = target.difference(&premise).iter().next() {
                    found = Some((premise, b));
                    return true;
                }
                false
            });
            if let Some((premise, b)) = found {
                return Some(Implication {
                    premise: ctx.attribute_names(&premise),
                    conclusion: vec![ctx.attributes()[b].clone()],
                });
            }
        }
        None
    }

    /// Lattice and belief state as of `granule`.
    pub fn snapshot(&self, granule: TimeGranule) -> Result<(ConceptLattice, BeliefState), SessionError> {
        if granule > self.granule {
            return Err(SessionError::UnknownGranule { requested: granule.0, current: self.granule.0 });
        }
        let ctx = self.context().as_of(granule);
        let ensemble = ensemble_of(&ctx)?;
        Ok((ConceptLattice::enumerate(&ctx), ensemble))
    }

    /// Rebuilds a session from its initial context and recorded events.
    pub fn from_trace(initial: FormalContext, oracle_kind: OracleKind, events: &[TraceEvent]) -> Result<Session, SessionError> {
        let mut session = Session::start(initial, oracle_kind)?;
        let Some((first, rest)) = events.split_first() else {
            return Err(SessionError::Trace("trace has no start event".into()));
        };
        if first != &session.trace[0] {
            return Err(SessionError::Trace("start event does not match the initial context".into()));
        }
        for (i, e) in rest.iter().enumerate() {
            let produced = match (&e.learning_cue, &e.measurement_cue, &e.oracle_answer) {
                (Some(obj), _, _) => session.resolve(obj.clone())?,
                (None, _, Some(OracleReply::GiveUp)) if session.awaiting.is_none() => session.give_up()?,
                (None, Some(cue), reply) => match session.open_cue(cue.clone())? {
                    CueOpening::Settled(ev) => ev,
                    CueOpening::AwaitingOracle { .. } => {
                        let answer = match reply {
                            Some(OracleReply::Accept) => OracleAnswer::Accept,
                            Some(OracleReply::Counterexample(obj)) => OracleAnswer::Counterexample(obj.clone()),
                            Some(OracleReply::GiveUp) => OracleAnswer::GiveUp,
                            None => return Err(SessionError::Trace(format!("event {} lacks an oracle answer", i + 1))),
                        };
                        session.answer(answer)?
                    }
                },
                _ => return Err(SessionError::Trace(format!("event {} is neither a cue nor a resolution", i + 1))),
            };
            if &produced != e {
                return Err(SessionError::Trace(format!("event {} does not reproduce", i + 1)));
            }
        }
        Ok(session)
    }
}

fn ensemble_of(ctx: &FormalContext) -> Result<BeliefState, SessionError> {
    match BeliefState::reinforce_from_support(ctx) {
        Err(EnsembleError::EmptyContext) => Ok(BeliefState::uniform_prior(ctx.attributes().to_vec())?),
        other => Ok(other?),
    }
}

fn implicational_closure(implications: &[(BitSet, BitSet)], set: &BitSet) -> BitSet {
    let mut out = set.clone();
    let mut used: HashSet<usize> = HashSet::new();
    loop {
        let mut changed = false;
        for (i, (premise, conclusion)) in implications.iter().enumerate() {
            if !used.contains(&i) && premise.is_subset(&out) {
                used.insert(i);
                if !conclusion.is_subset(&out) {
                    out.union_with(conclusion);
                    changed = true;
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Visits the `k`-subsets of `0..n` in lexicographic order until `f` returns true.
fn for_each_combination(n: usize, k: usize, f: &mut dyn FnMut(&[usize]) -> bool) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        if f(&idx) {
            return;
        }
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Snapshot of one granule of a replayed run.
#[derive(Debug, Clone)]
pub struct GranuleSnapshot {
    pub granule: u64,
    pub lattice: ConceptLattice,
    pub ensemble: BeliefState,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub snapshots: Vec<GranuleSnapshot>,
    pub session: Session,
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        trace_to_jsonl(&self.events)
    }

    pub fn final_context(&self) -> &FormalContext {
        self.session.context()
    }

    /// Counterexample names of the cue events, `None` where the oracle did not
    /// supply one.
    pub fn supporting_cues(&self) -> Vec<Option<String>> {
        self.events.iter().filter(|e| e.is_cue()).map(|e| e.supporting_cue().map(String::from)).collect()
    }
}

/// Runs `script` against a scripted oracle over `reference`, starting from
/// the reference's attributes alone. Every rejected cue is resolved with the
/// oracle's counterexample.
pub fn replay(reference: &FormalContext, script: &[Implication]) -> Result<Trace, SessionError> {
    replay_from(reference.without_objects(), reference, script)
}

pub fn replay_from(initial: FormalContext, reference: &FormalContext, script: &[Implication]) -> Result<Trace, SessionError> {
    let mut oracle = ScriptedOracle::new(reference.clone());
    let mut session = Session::start(initial, OracleKind::Scripted)?;
    for cue in script {
        session.pose_cue(cue.clone(), &mut oracle)?;
        if session.phase() == Phase::Uncertain {
            session.resolve_with_oracle_counterexample()?;
        }
    }
    let start = session.initial_context().latest_granule().unwrap_or_default().0;
    let snapshots = (start..=session.granule().0)
        .map(|g| {
            let (lattice, ensemble) = session.snapshot(TimeGranule(g))?;
            Ok(GranuleSnapshot { granule: g, lattice, ensemble })
        })
        .collect::<Result<_, SessionError>>()?;
    Ok(Trace { events: session.trace().to_vec(), snapshots, session })
}
