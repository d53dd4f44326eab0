//! The learning loop: notice a missing goal, ask the model, verify and
//! repair, get a decision, plan and act, then compile a rule.

use std::collections::BTreeSet;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::llm::{GenerationParams, LedgerSnapshot, LlmError, LlmGateway};
use crate::memory::{
    EpisodeError, EpisodeId, EpisodeLog, EpisodeRecord, Lexicon, PromptRecord, ResponseRecord,
    RuleId, RuleStore, WorkingContext, EPISODE_SCHEMA_VERSION,
};
use crate::oversight::{Decision, OversightChannel, OversightError, Proposal};
use crate::parser::{ActionStep, GoalExpr};
use crate::planner::{execute, plan, retrospect_compile, ExecutionError, Trace, DEFAULT_DEPTH_CAP};
use crate::prompt::{build_repair, instantiate, KnowledgeGap, PromptBank, PromptError, PromptInstance, TemplateKind};
use crate::verify::{
    categorize, check_affordable, ground_with_focus, verify_action, verify_goal, FailureCategory,
    Interpretation, ResponseCategory, VerificationReport,
};
use crate::world::{
    goal_holds, perceive, Action, Embodiment, GroundedGoal, ObjId, Placement, WorldState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub max_repairs: usize,
    pub use_planner_first: bool,
    pub llm_before_human: bool,
    pub depth_cap: usize,
    /// Upper bound on action prompts per object when the planner is not used.
    pub max_action_steps: usize,
    pub params: GenerationParams,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_repairs: 3,
            use_planner_first: true,
            llm_before_human: true,
            depth_cap: DEFAULT_DEPTH_CAP,
            max_action_steps: 16,
            params: GenerationParams::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Oversight(#[from] OversightError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Execution(#[from] ExecutionError),
    #[error("object {0} is not in the world")]
    NoSuchObject(ObjId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalSource {
    Rule,
    Llm,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OutcomeStatus {
    Achieved,
    /// Waiting on an oversight decision; rerun the object to resume.
    Suspended,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectOutcome {
    pub object: ObjId,
    pub status: OutcomeStatus,
    pub source: Option<GoalSource>,
    pub goal: Option<GroundedGoal>,
    pub llm_calls: usize,
    pub repairs: usize,
    pub action_prompts: usize,
    pub decisions: usize,
    /// One per goal response, in the order received.
    pub categories: Vec<ResponseCategory>,
    pub action_responses: usize,
    pub steps: usize,
    pub rule: Option<RuleId>,
    pub episode: EpisodeId,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTally {
    pub unviable: usize,
    pub viable_not_reasonable: usize,
    pub reasonable: usize,
    pub situationally_relevant: usize,
}

impl CategoryTally {
    pub fn add(&mut self, c: ResponseCategory) {
        *self.slot(c) += 1;
    }

    fn slot(&mut self, c: ResponseCategory) -> &mut usize {
        match c {
            ResponseCategory::Unviable => &mut self.unviable,
            ResponseCategory::ViableNotReasonable => &mut self.viable_not_reasonable,
            ResponseCategory::Reasonable => &mut self.reasonable,
            ResponseCategory::SituationallyRelevant => &mut self.situationally_relevant,
        }
    }

    pub fn get(&self, c: ResponseCategory) -> usize {
        match c {
            ResponseCategory::Unviable => self.unviable,
            ResponseCategory::ViableNotReasonable => self.viable_not_reasonable,
            ResponseCategory::Reasonable => self.reasonable,
            ResponseCategory::SituationallyRelevant => self.situationally_relevant,
        }
    }

    pub fn total(&self) -> usize {
        self.unviable + self.viable_not_reasonable + self.reasonable + self.situationally_relevant
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskReport {
    pub v: u32,
    pub task: String,
    pub objects_processed: usize,
    pub outcomes: Vec<ObjectOutcome>,
    pub llm_calls: usize,
    pub repairs: usize,
    pub action_prompts: usize,
    pub oversight_decisions: usize,
    pub rules_compiled: usize,
    pub tally: CategoryTally,
    pub action_responses: usize,
    pub ledger: LedgerSnapshot,
    pub suspended: bool,
    pub final_digest: String,
}

impl TaskReport {
    fn new(task: &str) -> Self {
        Self {
            v: 1,
            task: task.to_string(),
            objects_processed: 0,
            outcomes: Vec::new(),
            llm_calls: 0,
            repairs: 0,
            action_prompts: 0,
            oversight_decisions: 0,
            rules_compiled: 0,
            tally: CategoryTally::default(),
            action_responses: 0,
            ledger: LedgerSnapshot::default(),
            suspended: false,
            final_digest: String::new(),
        }
    }

    fn absorb(&mut self, o: ObjectOutcome) {
        self.objects_processed += 1;
        self.llm_calls += o.llm_calls;
        self.repairs += o.repairs;
        self.action_prompts += o.action_prompts;
        self.oversight_decisions += o.decisions;
        self.rules_compiled += usize::from(o.rule.is_some());
        self.action_responses += o.action_responses;
        for c in &o.categories {
            self.tally.add(*c);
        }
        self.suspended |= o.status == OutcomeStatus::Suspended;
        self.outcomes.push(o);
    }
}

/// Objects and their placements, for status displays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSummary {
    pub agent_at: String,
    pub holding: Vec<ObjId>,
    pub objects: Vec<ObjectSummary>,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub id: ObjId,
    pub phrase: String,
    pub at: String,
}

impl From<&WorldState> for WorldSummary {
    fn from(w: &WorldState) -> Self {
        let name = |l| w.location(l).map_or_else(|| "?".to_string(), |l| l.name.clone());
        Self {
            agent_at: name(&w.agent_at),
            holding: w.holding.clone(),
            objects: w
                .objects
                .values()
                .map(|o| ObjectSummary {
                    id: o.id.clone(),
                    phrase: o.phrase(),
                    at: match &o.at {
                        Placement::In(l) => format!("in {}", name(l)),
                        Placement::On(l) => format!("on {}", name(l)),
                        Placement::Held => "held".to_string(),
                    },
                })
                .collect(),
            digest: w.digest(),
        }
    }
}

/// Loop transitions, for live monitoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LoopEvent {
    ObjectStarted { object: ObjId },
    RuleMatched { object: ObjId, rule: RuleId },
    PromptIssued { object: ObjId, kind: TemplateKind },
    ResponseVerified { object: ObjId, response: String, viable: bool, issue: Option<String> },
    Decided { object: ObjId, decision: Decision },
    HumanFallback { object: ObjId },
    Executed { object: ObjId, steps: usize, world: WorldSummary },
    RuleCompiled { object: ObjId, rule: RuleId },
    ObjectFinished { object: ObjId, status: OutcomeStatus },
}

/// `None` when a rule already supplies the goal.
pub fn detect_gap(ctx: &WorkingContext, rules: &RuleStore) -> Option<KnowledgeGap> {
    match rules.best_match(ctx) {
        Some(_) => None,
        None => Some(KnowledgeGap::MissingGoal),
    }
}

type EventSink = Box<dyn Fn(&LoopEvent) + Send + Sync>;

/// Everything the loop reads and writes besides the world itself.
pub struct Agent {
    pub cfg: LoopConfig,
    pub bank: PromptBank,
    pub lexicon: Lexicon,
    pub gateway: LlmGateway,
    pub oversight: Box<dyn OversightChannel + Send>,
    pub rules: RuleStore,
    pub episodes: EpisodeLog,
    events: Option<EventSink>,
}

/// Per-object scratch state while a gap is being resolved.
struct Attempt {
    prompts: Vec<PromptRecord>,
    responses: Vec<ResponseRecord>,
    outcome: ObjectOutcome,
    start_ledger: LedgerSnapshot,
}

enum GoalOutcome {
    Found(GroundedGoal, GoalSource),
    Suspended,
    Failed(String),
}

impl Agent {
    pub fn new(
        cfg: LoopConfig,
        bank: PromptBank,
        lexicon: Lexicon,
        gateway: LlmGateway,
        oversight: Box<dyn OversightChannel + Send>,
    ) -> Self {
        Self {
            cfg,
            bank,
            lexicon,
            gateway,
            oversight,
            rules: RuleStore::new(),
            episodes: EpisodeLog::in_memory(),
            events: None,
        }
    }

    pub fn on_event(&mut self, f: impl Fn(&LoopEvent) + Send + Sync + 'static) {
        self.events = Some(Box::new(f));
    }

    fn emit(&self, e: LoopEvent) {
        if let Some(f) = &self.events {
            f(&e);
        }
    }

    /// Learn (or recall) and achieve a goal for every perceived object, in
    /// id order. Stops early if oversight suspends an object.
    pub fn run_task(
        &mut self,
        world: &mut WorldState,
        emb: &Embodiment,
        task: &str,
    ) -> Result<TaskReport, AgentError> {
        self.run_task_skipping(world, emb, task, &BTreeSet::new())
    }

    /// As [`Agent::run_task`], skipping objects already handled in an
    /// earlier, suspended run.
    pub fn run_task_skipping(
        &mut self,
        world: &mut WorldState,
        emb: &Embodiment,
        task: &str,
        done: &BTreeSet<ObjId>,
    ) -> Result<TaskReport, AgentError> {
        let start = self.gateway.ledger().snapshot();
        let mut report = TaskReport::new(task);
        let objects: Vec<ObjId> = perceive(world, emb)
            .into_iter()
            .map(|p| p.object)
            .filter(|o| !done.contains(o))
            .collect();
        for obj in objects {
            let outcome = self.learn_object(world, emb, task, &obj)?;
            let suspended = outcome.status == OutcomeStatus::Suspended;
            report.absorb(outcome);
            if suspended {
                break;
            }
        }
        let end = self.gateway.ledger().snapshot();
        report.ledger = LedgerSnapshot {
            sent: end.sent - start.sent,
            received: end.received - start.received,
            calls: end.calls - start.calls,
        };
        report.final_digest = world.digest();
        Ok(report)
    }

    /// Resolve and act on the goal for one object, updating `world`.
    pub fn learn_object(
        &mut self,
        world: &mut WorldState,
        emb: &Embodiment,
        task: &str,
        object: &ObjId,
    ) -> Result<ObjectOutcome, AgentError> {
        let mut ctx = WorkingContext::for_object(task, world, object)
            .ok_or_else(|| AgentError::NoSuchObject(object.clone()))?;
        self.emit(LoopEvent::ObjectStarted {
            object: object.clone(),
        });
        let mut at = Attempt {
            prompts: Vec::new(),
            responses: Vec::new(),
            outcome: ObjectOutcome {
                object: object.clone(),
                status: OutcomeStatus::Achieved,
                source: None,
                goal: None,
                llm_calls: 0,
                repairs: 0,
                action_prompts: 0,
                decisions: 0,
                categories: Vec::new(),
                action_responses: 0,
                steps: 0,
                rule: None,
                episode: self.episodes.next_id(),
            },
            start_ledger: self.gateway.ledger().snapshot(),
        };

        let resolved = match detect_gap(&ctx, &self.rules) {
            None => {
                let rule = self.rules.best_match(&ctx).expect("gap detection saw a rule");
                self.emit(LoopEvent::RuleMatched {
                    object: object.clone(),
                    rule: rule.id,
                });
                Ok(GoalOutcome::Found(rule.instantiate(object), GoalSource::Rule))
            }
            Some(_) => self.resolve_goal(world, emb, &ctx, &mut at),
        };
        let resolved = match resolved {
            Ok(r) => r,
            Err(e) => {
                at.outcome.status = OutcomeStatus::Failed {
                    reason: e.to_string(),
                };
                self.record(&ctx, &mut at)?;
                return Err(e);
            }
        };
        let (goal, source) = match resolved {
            GoalOutcome::Found(g, s) => (g, s),
            GoalOutcome::Suspended => {
                at.outcome.status = OutcomeStatus::Suspended;
                return self.finish(&ctx, at);
            }
            GoalOutcome::Failed(reason) => {
                at.outcome.status = OutcomeStatus::Failed { reason };
                return self.finish(&ctx, at);
            }
        };
        at.outcome.source = Some(source);
        at.outcome.goal = Some(goal.clone());

        let before = world.clone();
        let planned = if self.cfg.use_planner_first {
            plan(world, emb, &goal, self.cfg.depth_cap)
        } else {
            None
        };
        let trace = match planned {
            Some(seq) => {
                let (after, trace) = execute(world, emb, &seq)?;
                *world = after;
                Some(trace)
            }
            None => match self.act_by_prompting(world, emb, &mut ctx, &goal, &mut at) {
                Ok(Some(actions)) => Some(execute(&before, emb, &actions)?.1),
                Ok(None) => None,
                Err(e) => {
                    at.outcome.status = OutcomeStatus::Failed {
                        reason: e.to_string(),
                    };
                    self.record(&ctx, &mut at)?;
                    return Err(e);
                }
            },
        };
        let Some(trace) = trace else {
            at.outcome.status = OutcomeStatus::Failed {
                reason: "goal not reached".to_string(),
            };
            return self.finish(&ctx, at);
        };
        at.outcome.steps = trace.steps.len();
        self.emit(LoopEvent::Executed {
            object: object.clone(),
            steps: trace.steps.len(),
            world: WorldSummary::from(&*world),
        });

        if source != GoalSource::Rule {
            self.compile(&trace, &ctx, &goal, &mut at);
        }
        self.finish(&ctx, at)
    }

    fn compile(&mut self, trace: &Trace, ctx: &WorkingContext, goal: &GroundedGoal, at: &mut Attempt) {
        // rules are keyed on the situation the object was found in
        let mut origin = ctx.clone();
        origin.steps_so_far.clear();
        match retrospect_compile(trace, &origin, goal) {
            Ok(draft) => {
                let id = self
                    .rules
                    .insert(draft.conditions, draft.goal, Some(at.outcome.episode));
                at.outcome.rule = Some(id);
                self.emit(LoopEvent::RuleCompiled {
                    object: at.outcome.object.clone(),
                    rule: id,
                });
            }
            Err(e) => log::warn!("no rule compiled for {}: {e}", at.outcome.object),
        }
    }

    fn finish(&mut self, ctx: &WorkingContext, mut at: Attempt) -> Result<ObjectOutcome, AgentError> {
        self.record(ctx, &mut at)?;
        self.emit(LoopEvent::ObjectFinished {
            object: at.outcome.object.clone(),
            status: at.outcome.status.clone(),
        });
        Ok(at.outcome)
    }

    fn record(&mut self, ctx: &WorkingContext, at: &mut Attempt) -> Result<(), AgentError> {
        let end = self.gateway.ledger().snapshot();
        let source = match (&at.outcome.status, at.outcome.source) {
            (OutcomeStatus::Suspended, _) => "suspended",
            (_, Some(GoalSource::Rule)) => "rule",
            (_, Some(GoalSource::Llm)) => "llm",
            (_, Some(GoalSource::Human)) => "human",
            (_, None) => "none",
        };
        let rec = EpisodeRecord {
            v: EPISODE_SCHEMA_VERSION,
            id: at.outcome.episode,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            task: ctx.task_name.clone(),
            object: at.outcome.object.clone(),
            source: source.to_string(),
            prompts: std::mem::take(&mut at.prompts),
            responses: std::mem::take(&mut at.responses),
            goal: at.outcome.goal.clone(),
            tokens_sent: end.sent - at.start_ledger.sent,
            tokens_received: end.received - at.start_ledger.received,
            rule_id: at.outcome.rule,
        };
        self.episodes.record(rec)?;
        Ok(())
    }

    fn ask(&mut self, prompt: &PromptInstance, at: &mut Attempt) -> Result<Vec<String>, AgentError> {
        self.emit(LoopEvent::PromptIssued {
            object: at.outcome.object.clone(),
            kind: prompt.kind,
        });
        at.prompts.push(PromptRecord {
            kind: prompt.kind.name().to_string(),
            text: prompt.text.clone(),
        });
        at.outcome.llm_calls += 1;
        Ok(self.gateway.complete(prompt)?)
    }

    fn consult(&mut self, proposal: Proposal, at: &mut Attempt) -> Result<Option<Decision>, AgentError> {
        match self.oversight.consult(proposal) {
            Ok(d) => {
                at.outcome.decisions += 1;
                self.emit(LoopEvent::Decided {
                    object: at.outcome.object.clone(),
                    decision: d.clone(),
                });
                Ok(Some(d))
            }
            Err(OversightError::Timeout(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// A human-supplied goal must itself ground and be achievable.
    fn check_modified(
        &self,
        goal: &GoalExpr,
        world: &WorldState,
        emb: &Embodiment,
        focus: &ObjId,
    ) -> Result<GroundedGoal, FailureCategory> {
        let (_, g) = ground_with_focus(goal, world, Some(focus)).map_err(|f| f.category())?;
        check_affordable(&g, world, emb, self.cfg.depth_cap)
            .map_err(|f| FailureCategory::Unaffordable(f.reason))?;
        Ok(g)
    }

    fn resolve_goal(
        &mut self,
        world: &WorldState,
        emb: &Embodiment,
        ctx: &WorkingContext,
        at: &mut Attempt,
    ) -> Result<GoalOutcome, AgentError> {
        let focus = ctx.focus_object.clone().expect("context built for an object");
        if self.cfg.llm_before_human {
            let mut prompt = instantiate(&self.bank.goal, ctx, self.cfg.params)?;
            for round in 0..=self.cfg.max_repairs {
                let prompt_index = at.prompts.len();
                let texts = self.ask(&prompt, at)?;
                let mut chosen = None;
                let mut first_issue: Option<(String, FailureCategory)> = None;
                for text in texts {
                    let report =
                        verify_goal(&text, world, emb, &self.lexicon, self.cfg.depth_cap);
                    self.emit(LoopEvent::ResponseVerified {
                        object: focus.id.clone(),
                        response: text.clone(),
                        viable: report.viable,
                        issue: report.repair_issue.as_ref().map(FailureCategory::describe),
                    });
                    let mut decision = None;
                    let mut issue = report.repair_issue.clone();
                    if report.viable && chosen.is_none() {
                        let proposal =
                            Proposal::review(&ctx.task_name, focus.id.clone(), &focus.noun, &prompt.text, &report)?;
                        match self.consult(proposal, at)? {
                            None => {
                                self.log_response(at, prompt_index, &report, None, None);
                                return Ok(GoalOutcome::Suspended);
                            }
                            Some(d) => decision = Some(d),
                        }
                        match &decision {
                            Some(Decision::Accept) => {
                                chosen = report.grounded_goal().cloned();
                            }
                            Some(Decision::Modify { goal }) => {
                                match self.check_modified(goal, world, emb, &focus.id) {
                                    Ok(g) => chosen = Some(g),
                                    Err(i) => issue = Some(i),
                                }
                            }
                            Some(Decision::Reject { reason }) => {
                                issue = Some(FailureCategory::Rejected(*reason));
                            }
                            None => {}
                        }
                    } else if report.viable {
                        // a later sample once one is already chosen: still
                        // put to the human so every viable sample is judged
                        let proposal =
                            Proposal::review(&ctx.task_name, focus.id.clone(), &focus.noun, &prompt.text, &report)?;
                        decision = self.consult(proposal, at)?;
                    }
                    let category = match (&decision, report.viable) {
                        (None, true) => None,
                        _ => Some(categorize(&report, decision.as_ref()).expect("decision present")),
                    };
                    if let (Some(i), None) = (&issue, &first_issue) {
                        first_issue = Some((text.clone(), i.clone()));
                    }
                    self.log_response(at, prompt_index, &report, category, decision);
                }
                if let Some(g) = chosen {
                    return Ok(GoalOutcome::Found(g, GoalSource::Llm));
                }
                let Some((failed, issue)) = first_issue else {
                    break;
                };
                if round < self.cfg.max_repairs {
                    prompt = build_repair(&self.bank.repair, &prompt, &failed, &issue);
                    at.outcome.repairs += 1;
                }
            }
        }

        self.emit(LoopEvent::HumanFallback {
            object: focus.id.clone(),
        });
        let request = Proposal::goal_request(&ctx.task_name, focus.id.clone(), &focus.noun);
        match self.consult(request, at)? {
            None => Ok(GoalOutcome::Suspended),
            Some(Decision::Modify { goal }) => match self.check_modified(&goal, world, emb, &focus.id) {
                Ok(g) => Ok(GoalOutcome::Found(g, GoalSource::Human)),
                Err(i) => Ok(GoalOutcome::Failed(format!("human goal rejected: {}", i.describe()))),
            },
            Some(_) => Ok(GoalOutcome::Failed("no goal supplied".to_string())),
        }
    }

    fn log_response(
        &self,
        at: &mut Attempt,
        prompt_index: usize,
        report: &VerificationReport,
        category: Option<ResponseCategory>,
        decision: Option<Decision>,
    ) {
        if let Some(c) = category {
            at.outcome.categories.push(c);
        }
        at.responses.push(ResponseRecord {
            prompt_index,
            text: report.response.clone(),
            report: report.clone(),
            category,
            decision,
        });
    }

    /// Ask for one action at a time until the goal holds. Returns the
    /// executed actions, or `None` if the model ran out of useful steps.
    fn act_by_prompting(
        &mut self,
        world: &mut WorldState,
        emb: &Embodiment,
        ctx: &mut WorkingContext,
        goal: &GroundedGoal,
        at: &mut Attempt,
    ) -> Result<Option<Vec<Action>>, AgentError> {
        let mut done = Vec::new();
        for _ in 0..self.cfg.max_action_steps {
            if goal_holds(world, goal) {
                return Ok(Some(done));
            }
            let mut prompt = instantiate(&self.bank.action, ctx, self.cfg.params)?;
            let mut next: Option<(Action, ActionStep)> = None;
            for round in 0..=self.cfg.max_repairs {
                let prompt_index = at.prompts.len();
                at.outcome.action_prompts += usize::from(round == 0);
                let texts = self.ask(&prompt, at)?;
                let mut first_issue = None;
                for text in texts {
                    let report = verify_action(&text, world, emb, &self.lexicon);
                    at.outcome.action_responses += 1;
                    if next.is_none() {
                        if let (Some(a), Ok(Interpretation::Action(step))) =
                            (report.action(), &report.interpretable)
                        {
                            next = Some((a.clone(), step.clone()));
                        }
                    }
                    if first_issue.is_none() {
                        first_issue = report.repair_issue.clone().map(|i| (text.clone(), i));
                    }
                    at.responses.push(ResponseRecord {
                        prompt_index,
                        text: text.clone(),
                        report,
                        category: None,
                        decision: None,
                    });
                }
                if next.is_some() {
                    break;
                }
                match first_issue {
                    Some((failed, issue)) if round < self.cfg.max_repairs => {
                        prompt = build_repair(&self.bank.repair, &prompt, &failed, &issue);
                        at.outcome.repairs += 1;
                    }
                    _ => break,
                }
            }
            let Some((action, step)) = next else {
                return Ok(None);
            };
            let (after, _) = execute(world, emb, std::slice::from_ref(&action))?;
            *world = after;
            done.push(action);
            ctx.steps_so_far.push(step);
        }
        Ok(goal_holds(world, goal).then_some(done))
    }
}
