//! Response analysis by internal simulation: is the response interpretable,
//! can its referents be grounded in the current situation, and can this
//! body achieve it? Checks run in that order and stop at the first failure,
//! whose category becomes the issue for a repair prompt.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::memory::Lexicon;
use crate::oversight::{Decision, RejectReason};
use crate::parser::{
    parse_action, parse_goal, ActionStep, Atom, FailureKind, GoalExpr, InterpretationFailure,
    NounPhrase, Preposition,
};
use crate::planner::plan;
use crate::world::{
    apply_action, Action, Embodiment, GroundAtom, GroundedGoal, LocId, ObjId,
    WorldState,
};

/// Why a response needs repair; rendered into the repair prompt's issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    UnknownWord(String),
    UnrecognizedStructure(usize),
    EmptyResponse,
    Ungroundable(String),
    Ambiguous(String),
    Unaffordable(String),
    Rejected(RejectReason),
}

impl FailureCategory {
    pub fn describe(&self) -> String {
        match self {
            FailureCategory::UnknownWord(w) => format!("the word \"{w}\" is unknown"),
            FailureCategory::UnrecognizedStructure(p) => {
                format!("the sentence structure is not understood at word {}", p + 1)
            }
            FailureCategory::EmptyResponse => "the response is empty".to_string(),
            FailureCategory::Ungroundable(r) => format!("the \"{r}\" cannot be found here"),
            FailureCategory::Ambiguous(r) => {
                format!("the \"{r}\" is ambiguous, more than one matches")
            }
            FailureCategory::Unaffordable(why) => format!("the goal cannot be achieved: {why}"),
            FailureCategory::Rejected(RejectReason::Nonsensical) => {
                "the user says this goal does not make sense".to_string()
            }
            FailureCategory::Rejected(RejectReason::WrongPreference) => {
                "the user prefers a different goal".to_string()
            }
        }
    }
}

impl From<&InterpretationFailure> for FailureCategory {
    fn from(f: &InterpretationFailure) -> Self {
        match &f.kind {
            FailureKind::UnknownWord(w) => FailureCategory::UnknownWord(w.clone()),
            FailureKind::UnrecognizedStructure(p) => FailureCategory::UnrecognizedStructure(*p),
            FailureKind::EmptyResponse => FailureCategory::EmptyResponse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingFailureKind {
    NotFound,
    Ambiguous,
    NotAnObject,
    NotALocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("cannot ground \"{referent}\": {kind:?}")]
pub struct GroundingFailure {
    pub referent: String,
    pub kind: GroundingFailureKind,
}

impl GroundingFailure {
    pub fn category(&self) -> FailureCategory {
        match self.kind {
            GroundingFailureKind::Ambiguous => FailureCategory::Ambiguous(self.referent.clone()),
            _ => FailureCategory::Ungroundable(self.referent.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityRef {
    Object(ObjId),
    Location(LocId),
}

/// Response phrase → world entity.
pub type Bindings = BTreeMap<String, EntityRef>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{reason}")]
pub struct AffordanceFailure {
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Goal,
    Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    Goal(GoalExpr),
    Action(ActionStep),
}

/// An action step with its phrases bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedStep {
    pub verb: String,
    pub object: Option<ObjId>,
    pub target: Option<(Preposition, LocId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundedResponse {
    Goal { bindings: Bindings, goal: GroundedGoal },
    Action { bindings: Bindings, step: GroundedStep },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affordance {
    /// Goal reachable by a plan of this many steps.
    Plan { length: usize },
    Action(Action),
}

/// Outcome of the check pipeline for one response. Later checks are `None`
/// whenever an earlier one failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub response: String,
    pub kind: ResponseKind,
    pub interpretable: Result<Interpretation, InterpretationFailure>,
    pub grounded: Option<Result<GroundedResponse, GroundingFailure>>,
    pub affordable: Option<Result<Affordance, AffordanceFailure>>,
    pub viable: bool,
    pub repair_issue: Option<FailureCategory>,
}

impl VerificationReport {
    pub fn goal_expr(&self) -> Option<&GoalExpr> {
        match &self.interpretable {
            Ok(Interpretation::Goal(g)) => Some(g),
            _ => None,
        }
    }

    pub fn grounded_goal(&self) -> Option<&GroundedGoal> {
        match &self.grounded {
            Some(Ok(GroundedResponse::Goal { goal, .. })) => Some(goal),
            _ => None,
        }
    }

    pub fn action(&self) -> Option<&Action> {
        match &self.affordable {
            Some(Ok(Affordance::Action(a))) => Some(a),
            _ => None,
        }
    }

    /// Index of the first failed check (0, 1, 2), or `None` when viable.
    pub fn failed_stage(&self) -> Option<usize> {
        if self.interpretable.is_err() {
            Some(0)
        } else if matches!(self.grounded, Some(Err(_))) {
            Some(1)
        } else if matches!(self.affordable, Some(Err(_))) {
            Some(2)
        } else {
            None
        }
    }
}

fn np_matches_object(np: &NounPhrase, world: &WorldState) -> Vec<ObjId> {
    world
        .objects
        .values()
        .filter(|o| o.noun == np.noun && np.adjectives.iter().all(|a| o.adjectives.contains(a)))
        .map(|o| o.id.clone())
        .collect()
}

fn np_matches_location(np: &NounPhrase, world: &WorldState) -> Vec<LocId> {
    if !np.adjectives.is_empty() {
        return Vec::new();
    }
    world
        .locations
        .values()
        .filter(|l| l.name == np.noun)
        .map(|l| l.id.clone())
        .collect()
}

struct Grounder<'a> {
    world: &'a WorldState,
    focus: Option<&'a (ObjId, String)>,
    bindings: Bindings,
}

impl Grounder<'_> {
    fn fail(np: &NounPhrase, kind: GroundingFailureKind) -> GroundingFailure {
        GroundingFailure {
            referent: np.to_string(),
            kind,
        }
    }

    fn object(&mut self, np: &NounPhrase) -> Result<ObjId, GroundingFailure> {
        if let Some((id, noun)) = self.focus {
            if &np.noun == noun {
                self.bindings
                    .insert(np.to_string(), EntityRef::Object(id.clone()));
                return Ok(id.clone());
            }
        }
        let found = np_matches_object(np, self.world);
        match found.as_slice() {
            [one] => {
                self.bindings
                    .insert(np.to_string(), EntityRef::Object(one.clone()));
                Ok(one.clone())
            }
            [] if !np_matches_location(np, self.world).is_empty() => {
                Err(Self::fail(np, GroundingFailureKind::NotAnObject))
            }
            [] => Err(Self::fail(np, GroundingFailureKind::NotFound)),
            _ => Err(Self::fail(np, GroundingFailureKind::Ambiguous)),
        }
    }

    fn location(&mut self, np: &NounPhrase) -> Result<LocId, GroundingFailure> {
        let found = np_matches_location(np, self.world);
        match found.as_slice() {
            [one] => {
                self.bindings
                    .insert(np.to_string(), EntityRef::Location(one.clone()));
                Ok(one.clone())
            }
            [] if !np_matches_object(np, self.world).is_empty() => {
                Err(Self::fail(np, GroundingFailureKind::NotALocation))
            }
            [] => Err(Self::fail(np, GroundingFailureKind::NotFound)),
            _ => Err(Self::fail(np, GroundingFailureKind::Ambiguous)),
        }
    }

    fn either(&mut self, np: &NounPhrase) -> Result<EntityRef, GroundingFailure> {
        let is_focus = self.focus.is_some_and(|(_, n)| *n == np.noun);
        if is_focus || !np_matches_object(np, self.world).is_empty() {
            self.object(np).map(EntityRef::Object)
        } else {
            self.location(np).map(EntityRef::Location)
        }
    }
}

/// Bind every referent of `goal` to a unique entity in `world`.
pub fn ground(
    goal: &GoalExpr,
    world: &WorldState,
) -> Result<(Bindings, GroundedGoal), GroundingFailure> {
    ground_with_focus(goal, world, None)
}

/// As [`ground`], but phrases naming `focus`'s noun bind straight to it.
pub fn ground_with_focus(
    goal: &GoalExpr,
    world: &WorldState,
    focus: Option<&ObjId>,
) -> Result<(Bindings, GroundedGoal), GroundingFailure> {
    let focus_pair = focus.and_then(|id| world.object(id).map(|o| (id.clone(), o.noun.clone())));
    let mut g = Grounder {
        world,
        focus: focus_pair.as_ref(),
        bindings: Bindings::new(),
    };
    let mut atoms = Vec::with_capacity(goal.conjuncts.len());
    for atom in &goal.conjuncts {
        atoms.push(match atom {
            Atom::In(s, p) => {
                let o = g.object(s)?;
                GroundAtom::In(o, g.location(p)?)
            }
            Atom::On(s, p) => {
                let o = g.object(s)?;
                GroundAtom::On(o, g.location(p)?)
            }
            Atom::StateIs(s, adj) => match g.either(s)? {
                EntityRef::Object(o) => GroundAtom::ObjHas(o, adj.clone()),
                EntityRef::Location(l) => GroundAtom::LocState(l, adj.clone()),
            },
        });
    }
    Ok((g.bindings, GroundedGoal::new(atoms)))
}

pub fn ground_action(
    step: &ActionStep,
    world: &WorldState,
) -> Result<(Bindings, GroundedStep), GroundingFailure> {
    let mut g = Grounder {
        world,
        focus: None,
        bindings: Bindings::new(),
    };
    // receptacles are what open and close act on
    if matches!(step.verb.as_str(), "open" | "close") && step.target.is_none() {
        if let Some(np) = &step.object {
            let loc = g.location(np)?;
            return Ok((
                g.bindings,
                GroundedStep {
                    verb: step.verb.clone(),
                    object: None,
                    target: Some((Preposition::To, loc)),
                },
            ));
        }
    }
    let object = step.object.as_ref().map(|np| g.object(np)).transpose()?;
    let target = match &step.target {
        Some((p, np)) => Some((*p, g.location(np)?)),
        None => None,
    };
    Ok((
        g.bindings,
        GroundedStep {
            verb: step.verb.clone(),
            object,
            target,
        },
    ))
}

/// Passes iff a plan of at most `depth_cap` steps achieves the goal.
pub fn check_affordable(
    goal: &GroundedGoal,
    world: &WorldState,
    emb: &Embodiment,
    depth_cap: usize,
) -> Result<Vec<Action>, AffordanceFailure> {
    plan(world, emb, goal, depth_cap).ok_or_else(|| AffordanceFailure {
        reason: format!("no plan within depth {depth_cap}"),
    })
}

fn schema_for(step: &GroundedStep) -> Result<Action, AffordanceFailure> {
    let gap = |reason: &str| AffordanceFailure {
        reason: reason.to_string(),
    };
    let need_object = || step.object.clone().ok_or_else(|| gap("the step names no object"));
    let target = |want: &[Preposition]| match &step.target {
        Some((p, l)) if want.contains(p) => Ok(l.clone()),
        _ => Err(gap("the step names no suitable target")),
    };
    match step.verb.as_str() {
        "pick up" => {
            if step.target.is_some() {
                return Err(gap("pick up takes no target"));
            }
            Ok(Action::PickUp(need_object()?))
        }
        "put" | "place" => {
            let o = need_object()?;
            match &step.target {
                Some((Preposition::In, l)) => Ok(Action::PutIn(o, l.clone())),
                Some((Preposition::On, l)) => Ok(Action::PutOn(o, l.clone())),
                _ => Err(gap("the step names no suitable target")),
            }
        }
        "open" | "close" => {
            if step.object.is_some() {
                return Err(gap("only receptacles open and close"));
            }
            let l = target(&[Preposition::To])
                .map_err(|_| gap("the step names nothing to open or close"))?;
            Ok(if step.verb == "open" {
                Action::Open(l)
            } else {
                Action::Close(l)
            })
        }
        "move" | "go" => {
            if step.object.is_some() {
                return Err(gap("moving carries nothing"));
            }
            Ok(Action::MoveTo(target(&[Preposition::To])?))
        }
        _ => Err(gap("verb not in repertoire")),
    }
}

/// Maps a grounded step onto an action schema in the repertoire and checks
/// its preconditions in `world`.
pub fn check_action_affordable(
    step: &GroundedStep,
    world: &WorldState,
    emb: &Embodiment,
) -> Result<Action, AffordanceFailure> {
    let action = schema_for(step)?;
    if !emb.repertoire.contains(&action.kind()) {
        return Err(AffordanceFailure {
            reason: "verb not in repertoire".to_string(),
        });
    }
    apply_action(world, emb, &action).map_err(|e| AffordanceFailure {
        reason: e.to_string(),
    })?;
    Ok(action)
}

fn report(
    text: &str,
    kind: ResponseKind,
    interpretable: Result<Interpretation, InterpretationFailure>,
) -> VerificationReport {
    let repair_issue = interpretable.as_ref().err().map(FailureCategory::from);
    VerificationReport {
        response: text.to_string(),
        kind,
        viable: false,
        interpretable,
        grounded: None,
        affordable: None,
        repair_issue,
    }
}

pub fn verify_goal(
    text: &str,
    world: &WorldState,
    emb: &Embodiment,
    lexicon: &Lexicon,
    depth_cap: usize,
) -> VerificationReport {
    let parsed = parse_goal(text, lexicon);
    let expr = parsed.clone().ok();
    let mut rep = report(text, ResponseKind::Goal, parsed.map(Interpretation::Goal));
    let Some(expr) = expr else {
        return rep;
    };
    let (bindings, goal) = match ground(&expr, world) {
        Ok(b) => b,
        Err(f) => {
            rep.repair_issue = Some(f.category());
            rep.grounded = Some(Err(f));
            return rep;
        }
    };
    let afford = check_affordable(&goal, world, emb, depth_cap);
    rep.grounded = Some(Ok(GroundedResponse::Goal { bindings, goal }));
    match afford {
        Ok(p) => {
            rep.affordable = Some(Ok(Affordance::Plan { length: p.len() }));
            rep.viable = true;
        }
        Err(f) => {
            rep.repair_issue = Some(FailureCategory::Unaffordable(f.reason.clone()));
            rep.affordable = Some(Err(f));
        }
    }
    rep
}

pub fn verify_action(
    text: &str,
    world: &WorldState,
    emb: &Embodiment,
    lexicon: &Lexicon,
) -> VerificationReport {
    let parsed = parse_action(text, lexicon);
    let step = parsed.clone().ok();
    let mut rep = report(text, ResponseKind::Action, parsed.map(Interpretation::Action));
    let Some(step) = step else {
        return rep;
    };
    let (bindings, grounded) = match ground_action(&step, world) {
        Ok(b) => b,
        Err(f) => {
            rep.repair_issue = Some(f.category());
            rep.grounded = Some(Err(f));
            return rep;
        }
    };
    let afford = check_action_affordable(&grounded, world, emb);
    rep.grounded = Some(Ok(GroundedResponse::Action {
        bindings,
        step: grounded,
    }));
    match afford {
        Ok(a) => {
            rep.affordable = Some(Ok(Affordance::Action(a)));
            rep.viable = true;
        }
        Err(f) => {
            rep.repair_issue = Some(FailureCategory::Unaffordable(f.reason.clone()));
            rep.affordable = Some(Err(f));
        }
    }
    rep
}

/// Run the full pipeline for a response of the given kind.
pub fn verify(
    text: &str,
    kind: ResponseKind,
    world: &WorldState,
    emb: &Embodiment,
    lexicon: &Lexicon,
    depth_cap: usize,
) -> VerificationReport {
    match kind {
        ResponseKind::Goal => verify_goal(text, world, emb, lexicon, depth_cap),
        ResponseKind::Action => verify_action(text, world, emb, lexicon),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseCategory {
    Unviable,
    ViableNotReasonable,
    Reasonable,
    SituationallyRelevant,
}

impl ResponseCategory {
    pub const ALL: [ResponseCategory; 4] = [
        ResponseCategory::Unviable,
        ResponseCategory::ViableNotReasonable,
        ResponseCategory::Reasonable,
        ResponseCategory::SituationallyRelevant,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ResponseCategory::Unviable => "unviable",
            ResponseCategory::ViableNotReasonable => "viable_not_reasonable",
            ResponseCategory::Reasonable => "reasonable",
            ResponseCategory::SituationallyRelevant => "situationally_relevant",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ResponseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("viable response has no oversight decision")]
pub struct MissingDecision;

/// Category of a verified response given the human (or oracle) decision.
/// Whether a viable goal matches preference is decided upstream by whoever
/// produced `decision`.
pub fn categorize(
    report: &VerificationReport,
    decision: Option<&Decision>,
) -> Result<ResponseCategory, MissingDecision> {
    if !report.viable {
        return Ok(ResponseCategory::Unviable);
    }
    Ok(match decision.ok_or(MissingDecision)? {
        Decision::Accept => ResponseCategory::SituationallyRelevant,
        Decision::Reject {
            reason: RejectReason::Nonsensical,
        } => ResponseCategory::ViableNotReasonable,
        Decision::Reject {
            reason: RejectReason::WrongPreference,
        }
        | Decision::Modify { .. } => ResponseCategory::Reasonable,
    })
}
