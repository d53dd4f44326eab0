//! Human oversight: proposals awaiting a decision, the shared queue remote
//! sessions decide through, per-scenario preferences, and an oracle that
//! decides from those preferences so runs can go unattended.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::memory::{Lexicon, TemplateAtom};
use crate::parser::{parse_goal, render, Atom, GoalExpr, InterpretationFailure, NounPhrase};
use crate::verify::VerificationReport;
use crate::world::{GroundAtom, GroundedGoal, LocId, ObjId, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Viable but makes no sense, e.g. food into the sink.
    Nonsensical,
    /// Plausible, but not where this user wants it.
    WrongPreference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject { reason: RejectReason },
    Modify { goal: GoalExpr },
}

impl Decision {
    pub fn reject(reason: RejectReason) -> Self {
        Decision::Reject { reason }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProposalId(pub u64);

impl fmt::Display for ProposalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    /// Confirm a verified model response.
    Review,
    /// The model failed; ask the human for the goal outright.
    GoalRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalState {
    Pending,
    Decided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt: String,
    pub response: String,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: ProposalId,
    pub kind: ProposalKind,
    pub task: String,
    pub object: ObjId,
    pub noun: String,
    /// Rendered goal sentence; empty for goal requests.
    pub sentence: String,
    pub goal: Option<GoalExpr>,
    pub grounded: Option<GroundedGoal>,
    pub provenance: Option<Provenance>,
    pub state: ProposalState,
    pub decision: Option<Decision>,
}

impl Proposal {
    /// Proposal to confirm the goal in `report`; refused unless viable.
    pub fn review(
        task: &str,
        object: ObjId,
        noun: &str,
        prompt: &str,
        report: &VerificationReport,
    ) -> Result<Self, OversightError> {
        let (Some(goal), Some(grounded)) = (report.goal_expr(), report.grounded_goal()) else {
            return Err(OversightError::NotViable);
        };
        if !report.viable {
            return Err(OversightError::NotViable);
        }
        Ok(Self {
            id: ProposalId(0),
            kind: ProposalKind::Review,
            task: task.to_string(),
            object,
            noun: noun.to_string(),
            sentence: render(goal).unwrap_or_default(),
            goal: Some(goal.clone()),
            grounded: Some(grounded.clone()),
            provenance: Some(Provenance {
                prompt: prompt.to_string(),
                response: report.response.clone(),
                report: report.clone(),
            }),
            state: ProposalState::Pending,
            decision: None,
        })
    }

    pub fn goal_request(task: &str, object: ObjId, noun: &str) -> Self {
        Self {
            id: ProposalId(0),
            kind: ProposalKind::GoalRequest,
            task: task.to_string(),
            object,
            noun: noun.to_string(),
            sentence: String::new(),
            goal: None,
            grounded: None,
            provenance: None,
            state: ProposalState::Pending,
            decision: None,
        }
    }

    pub fn is_pending(&self) -> bool {
        self.state == ProposalState::Pending
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OversightError {
    #[error("only viable responses can be proposed")]
    NotViable,
    #[error("unknown proposal {0}")]
    UnknownProposal(ProposalId),
    #[error("proposal {0} is already decided")]
    AlreadyDecided(ProposalId),
    #[error("no decision on proposal {0} before the timeout")]
    Timeout(ProposalId),
    #[error("a goal request can only be answered with a goal")]
    NeedsGoal,
    #[error("no preference for \"{noun}\" in task \"{task}\"")]
    NoPreference { task: String, noun: String },
    #[error("oversight channel closed: {0}")]
    Closed(String),
}

type Listener = Box<dyn Fn(&Proposal) + Send + Sync>;

#[derive(Default)]
struct QueueInner {
    next: u64,
    proposals: BTreeMap<ProposalId, Proposal>,
}

/// Pending proposals shared between the agent and remote deciders.
/// Waiting releases the lock, so decisions can arrive while the agent waits.
#[derive(Default)]
pub struct OversightQueue {
    inner: Mutex<QueueInner>,
    decided: Condvar,
    listeners: Mutex<Vec<Listener>>,
}

impl fmt::Debug for OversightQueue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OversightQueue")
            .field("proposals", &self.list(None).len())
            .finish()
    }
}

impl OversightQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Called with each proposal as it is submitted or decided.
    pub fn on_change(&self, f: impl Fn(&Proposal) + Send + Sync + 'static) {
        self.listeners.lock().unwrap().push(Box::new(f));
    }

    fn notify(&self, p: &Proposal) {
        for l in self.listeners.lock().unwrap().iter() {
            l(p);
        }
    }

    pub fn submit(&self, mut proposal: Proposal) -> Result<ProposalId, OversightError> {
        if proposal.kind == ProposalKind::Review && proposal.grounded.is_none() {
            return Err(OversightError::NotViable);
        }
        let snapshot = {
            let mut inner = self.inner.lock().unwrap();
            inner.next += 1;
            proposal.id = ProposalId(inner.next);
            proposal.state = ProposalState::Pending;
            proposal.decision = None;
            inner.proposals.insert(proposal.id, proposal.clone());
            proposal
        };
        self.notify(&snapshot);
        Ok(snapshot.id)
    }

    pub fn decide(&self, id: ProposalId, decision: Decision) -> Result<Proposal, OversightError> {
        let snapshot = {
            let mut inner = self.inner.lock().unwrap();
            let p = inner
                .proposals
                .get_mut(&id)
                .ok_or(OversightError::UnknownProposal(id))?;
            if !p.is_pending() {
                return Err(OversightError::AlreadyDecided(id));
            }
            if p.kind == ProposalKind::GoalRequest && !matches!(decision, Decision::Modify { .. }) {
                return Err(OversightError::NeedsGoal);
            }
            p.state = ProposalState::Decided;
            p.decision = Some(decision);
            p.clone()
        };
        self.decided.notify_all();
        self.notify(&snapshot);
        Ok(snapshot)
    }

    /// Block until `id` is decided; on timeout the proposal stays pending.
    pub fn await_decision(
        &self,
        id: ProposalId,
        timeout: Duration,
    ) -> Result<Decision, OversightError> {
        let deadline = Instant::now() + timeout;
        let mut inner = self.inner.lock().unwrap();
        loop {
            let p = inner
                .proposals
                .get(&id)
                .ok_or(OversightError::UnknownProposal(id))?;
            if let Some(d) = &p.decision {
                return Ok(d.clone());
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(OversightError::Timeout(id));
            }
            inner = self.decided.wait_timeout(inner, deadline - now).unwrap().0;
        }
    }

    pub fn get(&self, id: ProposalId) -> Option<Proposal> {
        self.inner.lock().unwrap().proposals.get(&id).cloned()
    }

    /// All proposals in id order, optionally filtered by state.
    pub fn list(&self, state: Option<ProposalState>) -> Vec<Proposal> {
        self.inner
            .lock()
            .unwrap()
            .proposals
            .values()
            .filter(|p| state.is_none_or(|s| p.state == s))
            .cloned()
            .collect()
    }
}

/// On-disk preference file for one task.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceDocument {
    pub v: u32,
    pub task: String,
    /// Object noun → preferred goal sentence.
    pub preferences: BTreeMap<String, String>,
    /// Object noun (or `*` for any) → location names that make no sense.
    #[serde(default)]
    pub nonsensical: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreferenceError {
    #[error("preference file: {0}")]
    Malformed(String),
    #[error("preference for \"{noun}\" does not parse: {failure}")]
    Uninterpretable {
        noun: String,
        failure: InterpretationFailure,
    },
    #[error("preference for \"{noun}\" names \"{referent}\", which is not a unique location")]
    Ungroundable { noun: String, referent: String },
    #[error("preference for \"{noun}\" must describe the {noun} itself")]
    ForeignObject { noun: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Preferred {
    expr: GoalExpr,
    template: Vec<TemplateAtom>,
}

/// Preferences bound to one scenario's locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceModel {
    document: PreferenceDocument,
    preferred: BTreeMap<(String, String), Preferred>,
    blocked: BTreeMap<String, BTreeSet<LocId>>,
}

fn unique_location(world: &WorldState, np: &NounPhrase) -> Option<LocId> {
    let mut found = world
        .locations
        .values()
        .filter(|l| np.adjectives.is_empty() && l.name == np.noun);
    match (found.next(), found.next()) {
        (Some(l), None) => Some(l.id.clone()),
        _ => None,
    }
}

impl PreferenceModel {
    pub fn parse(text: &str, world: &WorldState, lexicon: &Lexicon) -> Result<Self, PreferenceError> {
        let doc: PreferenceDocument =
            serde_json::from_str(text).map_err(|e| PreferenceError::Malformed(e.to_string()))?;
        Self::from_document(doc, world, lexicon)
    }

    pub fn from_document(
        document: PreferenceDocument,
        world: &WorldState,
        lexicon: &Lexicon,
    ) -> Result<Self, PreferenceError> {
        let task = document.task.to_lowercase();
        let mut preferred = BTreeMap::new();
        for (noun, sentence) in &document.preferences {
            let expr = parse_goal(sentence, lexicon).map_err(|failure| {
                PreferenceError::Uninterpretable {
                    noun: noun.clone(),
                    failure,
                }
            })?;
            let template = Self::template(noun, &expr, world)?;
            preferred.insert((task.clone(), noun.clone()), Preferred { expr, template });
        }
        let mut blocked = BTreeMap::new();
        for (noun, names) in &document.nonsensical {
            let mut ids = BTreeSet::new();
            for name in names {
                let id = unique_location(world, &NounPhrase::new(name.as_str())).ok_or_else(|| {
                    PreferenceError::Ungroundable {
                        noun: noun.clone(),
                        referent: name.clone(),
                    }
                })?;
                ids.insert(id);
            }
            blocked.insert(noun.clone(), ids);
        }
        Ok(Self {
            document,
            preferred,
            blocked,
        })
    }

    fn template(
        noun: &str,
        expr: &GoalExpr,
        world: &WorldState,
    ) -> Result<Vec<TemplateAtom>, PreferenceError> {
        let loc = |np: &NounPhrase| {
            unique_location(world, np).ok_or_else(|| PreferenceError::Ungroundable {
                noun: noun.to_string(),
                referent: np.to_string(),
            })
        };
        let foreign = || PreferenceError::ForeignObject {
            noun: noun.to_string(),
        };
        expr.conjuncts
            .iter()
            .map(|atom| match atom {
                Atom::In(s, p) if s.noun == noun => Ok(TemplateAtom::In(loc(p)?)),
                Atom::On(s, p) if s.noun == noun => Ok(TemplateAtom::On(loc(p)?)),
                Atom::StateIs(s, adj) if s.noun == noun => Ok(TemplateAtom::Has(adj.clone())),
                Atom::StateIs(s, adj) => Ok(TemplateAtom::LocState(loc(s)?, adj.clone())),
                _ => Err(foreign()),
            })
            .collect()
    }

    pub fn document(&self) -> &PreferenceDocument {
        &self.document
    }

    pub fn covers(&self, task: &str, noun: &str) -> bool {
        self.preferred
            .contains_key(&(task.to_lowercase(), noun.to_string()))
    }

    /// The preferred goal sentence's interpretation.
    pub fn preferred_expr(&self, task: &str, noun: &str) -> Option<&GoalExpr> {
        self.preferred
            .get(&(task.to_lowercase(), noun.to_string()))
            .map(|p| &p.expr)
    }

    /// The preferred goal instantiated for `object`.
    pub fn preferred_goal(&self, task: &str, noun: &str, object: &ObjId) -> Option<GroundedGoal> {
        let p = self.preferred.get(&(task.to_lowercase(), noun.to_string()))?;
        Some(GroundedGoal::new(
            p.template
                .iter()
                .map(|t| match t {
                    TemplateAtom::In(l) => GroundAtom::In(object.clone(), l.clone()),
                    TemplateAtom::On(l) => GroundAtom::On(object.clone(), l.clone()),
                    TemplateAtom::Has(a) => GroundAtom::ObjHas(object.clone(), a.clone()),
                    TemplateAtom::LocState(l, s) => GroundAtom::LocState(l.clone(), s.clone()),
                })
                .collect(),
        ))
    }

    /// True if the goal puts `object` somewhere blocked for its noun.
    pub fn is_nonsensical(&self, noun: &str, object: &ObjId, goal: &GroundedGoal) -> bool {
        let blocked: Vec<&BTreeSet<LocId>> = [noun, "*"]
            .iter()
            .filter_map(|k| self.blocked.get(*k))
            .collect();
        goal.atoms.iter().any(|a| match a {
            GroundAtom::In(o, l) | GroundAtom::On(o, l) if o == object => {
                blocked.iter().any(|b| b.contains(l))
            }
            _ => false,
        })
    }
}

/// Decide a proposal as the preference file's owner would.
pub fn oracle_decide(proposal: &Proposal, prefs: &PreferenceModel) -> Result<Decision, OversightError> {
    let missing = || OversightError::NoPreference {
        task: proposal.task.clone(),
        noun: proposal.noun.clone(),
    };
    match proposal.kind {
        ProposalKind::GoalRequest => prefs
            .preferred_expr(&proposal.task, &proposal.noun)
            .map(|g| Decision::Modify { goal: g.clone() })
            .ok_or_else(missing),
        ProposalKind::Review => {
            let goal = proposal.grounded.as_ref().ok_or(OversightError::NotViable)?;
            if prefs.is_nonsensical(&proposal.noun, &proposal.object, goal) {
                return Ok(Decision::reject(RejectReason::Nonsensical));
            }
            let want = prefs
                .preferred_goal(&proposal.task, &proposal.noun, &proposal.object)
                .ok_or_else(missing)?;
            Ok(if goal.equivalent(&want) {
                Decision::Accept
            } else {
                Decision::reject(RejectReason::WrongPreference)
            })
        }
    }
}

/// Where the agent sends proposals for a decision.
pub trait OversightChannel {
    fn consult(&mut self, proposal: Proposal) -> Result<Decision, OversightError>;
}

/// Decides immediately from a preference model.
#[derive(Debug, Clone)]
pub struct OracleOversight {
    pub prefs: PreferenceModel,
}

impl OracleOversight {
    pub fn new(prefs: PreferenceModel) -> Self {
        Self { prefs }
    }
}

impl OversightChannel for OracleOversight {
    fn consult(&mut self, proposal: Proposal) -> Result<Decision, OversightError> {
        oracle_decide(&proposal, &self.prefs)
    }
}

pub const DEFAULT_INTERACTIVE_TIMEOUT: Duration = Duration::from_secs(300);

/// Posts proposals to a shared queue and waits for a remote decision.
#[derive(Debug, Clone)]
pub struct QueueOversight {
    pub queue: Arc<OversightQueue>,
    pub timeout: Duration,
}

impl QueueOversight {
    pub fn new(queue: Arc<OversightQueue>, timeout: Duration) -> Self {
        Self { queue, timeout }
    }
}

impl OversightChannel for QueueOversight {
    fn consult(&mut self, proposal: Proposal) -> Result<Decision, OversightError> {
        let id = self.queue.submit(proposal)?;
        self.queue.await_decision(id, self.timeout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::verify::{verify_goal, ResponseKind};
    use std::thread;

    fn pantry() -> (WorldState, crate::world::Embodiment, Lexicon, PreferenceModel) {
        let s = bundled::pantry_scenario();
        let lex = Lexicon::from_scenario(&s).unwrap();
        let prefs = PreferenceModel::parse(bundled::PANTRY_PREFS, &s.world, &lex).unwrap();
        (s.world, s.embodiment, lex, prefs)
    }

    fn proposal_for(sentence: &str) -> Proposal {
        let (w, emb, lex, _) = pantry();
        let r = verify_goal(sentence, &w, &emb, &lex, 12);
        assert_eq!(r.kind, ResponseKind::Goal);
        Proposal::review("stock pantry", "beans".into(), "beans", "", &r).unwrap()
    }

    #[test]
    fn beans_triple() {
        let (_, _, _, prefs) = pantry();
        let d = |s: &str| oracle_decide(&proposal_for(s), &prefs).unwrap();
        assert_eq!(d("The goal is that the beans is in the pantry."), Decision::Accept);
        assert_eq!(
            d("The goal is that the beans is in the cupboard."),
            Decision::reject(RejectReason::WrongPreference)
        );
        assert_eq!(
            d("The goal is that the beans is in the sink."),
            Decision::reject(RejectReason::Nonsensical)
        );
    }

    #[test]
    fn goal_request_gets_preferred_goal() {
        let (_, _, _, prefs) = pantry();
        let req = Proposal::goal_request("Stock Pantry", "beans".into(), "beans");
        match oracle_decide(&req, &prefs).unwrap() {
            Decision::Modify { goal } => assert_eq!(goal.conjuncts.len(), 1),
            other => panic!("{other:?}"),
        }
        let req = Proposal::goal_request("stock pantry", "x".into(), "lamp");
        assert!(matches!(
            oracle_decide(&req, &prefs),
            Err(OversightError::NoPreference { .. })
        ));
    }

    #[test]
    fn unviable_report_is_not_proposable() {
        let (w, emb, lex, _) = pantry();
        let r = verify_goal("The goal is that the beans is in the attic.", &w, &emb, &lex, 12);
        assert_eq!(
            Proposal::review("t", "beans".into(), "beans", "", &r),
            Err(OversightError::NotViable)
        );
    }

    #[test]
    fn submit_decide_await() {
        let q = OversightQueue::new();
        let id = q.submit(proposal_for("The goal is that the beans is in the pantry.")).unwrap();
        assert_eq!(q.list(Some(ProposalState::Pending)).len(), 1);
        q.decide(id, Decision::Accept).unwrap();
        assert_eq!(q.await_decision(id, Duration::ZERO), Ok(Decision::Accept));
        assert_eq!(
            q.decide(id, Decision::reject(RejectReason::Nonsensical)),
            Err(OversightError::AlreadyDecided(id))
        );
        assert_eq!(q.get(id).unwrap().decision, Some(Decision::Accept));
        assert!(q.list(Some(ProposalState::Pending)).is_empty());
        assert_eq!(
            q.decide(ProposalId(99), Decision::Accept),
            Err(OversightError::UnknownProposal(ProposalId(99)))
        );
    }

    #[test]
    fn timeout_leaves_pending() {
        let q = OversightQueue::new();
        let id = q.submit(proposal_for("The goal is that the beans is in the pantry.")).unwrap();
        assert_eq!(
            q.await_decision(id, Duration::from_millis(20)),
            Err(OversightError::Timeout(id))
        );
        assert!(q.get(id).unwrap().is_pending());
    }

    #[test]
    fn await_does_not_block_intake() {
        let q = Arc::new(OversightQueue::new());
        let seen = Arc::new(Mutex::new(0));
        let counter = seen.clone();
        q.on_change(move |_| *counter.lock().unwrap() += 1);
        let mut chan = QueueOversight::new(q.clone(), Duration::from_secs(5));
        let decider = {
            let q = q.clone();
            thread::spawn(move || loop {
                if let Some(p) = q.list(Some(ProposalState::Pending)).first() {
                    q.decide(p.id, Decision::reject(RejectReason::WrongPreference)).unwrap();
                    break;
                }
                thread::sleep(Duration::from_millis(2));
            })
        };
        let d = chan
            .consult(proposal_for("The goal is that the beans is in the cupboard."))
            .unwrap();
        decider.join().unwrap();
        assert_eq!(d, Decision::reject(RejectReason::WrongPreference));
        assert_eq!(*seen.lock().unwrap(), 2);
    }

    #[test]
    fn goal_request_needs_goal() {
        let q = OversightQueue::new();
        let id = q.submit(Proposal::goal_request("t", "beans".into(), "beans")).unwrap();
        assert_eq!(q.decide(id, Decision::Accept), Err(OversightError::NeedsGoal));
        assert!(q.get(id).unwrap().is_pending());
    }

    #[test]
    fn bad_preference_file_is_rejected() {
        let (w, _, lex, _) = pantry();
        let doc = r#"{"v":1,"task":"stock pantry","preferences":{"beans":"The goal is that the beans is in the attic."}}"#;
        assert!(matches!(
            PreferenceModel::parse(doc, &w, &lex),
            Err(PreferenceError::Ungroundable { .. })
        ));
        assert!(matches!(
            PreferenceModel::parse("{}", &w, &lex),
            Err(PreferenceError::Malformed(_))
        ));
    }

    #[test]
    fn decision_wire_format() {
        let j = serde_json::to_string(&Decision::reject(RejectReason::WrongPreference)).unwrap();
        assert_eq!(j, r#"{"decision":"reject","reason":"wrong_preference"}"#);
        let d: Decision = serde_json::from_str(r#"{"decision":"accept"}"#).unwrap();
        assert_eq!(d, Decision::Accept);
    }
}
