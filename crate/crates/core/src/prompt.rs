//! Templated few-shot prompts in a single-line, parenthesized-marker
//! format, plus the repair prompts that chain onto them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::llm::GenerationParams;
use crate::memory::WorkingContext;
use crate::parser::render_step_phrase;
use crate::verify::FailureCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Goal,
    Action,
    Repair,
}

impl TemplateKind {
    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::Goal => "goal",
            TemplateKind::Action => "action",
            TemplateKind::Repair => "repair",
        }
    }

    fn allowed_slots(self) -> &'static [&'static str] {
        match self {
            TemplateKind::Goal => &["task_name", "agent_room", "focus_object", "focus_containment"],
            TemplateKind::Action => &[
                "task_name",
                "agent_room",
                "focus_object",
                "focus_containment",
                "steps_so_far",
            ],
            TemplateKind::Repair => &["prior_prompt", "failed_response", "issue"],
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KnowledgeGap {
    MissingGoal,
    MissingAction,
    RepairNeeded(FailureCategory),
}

pub fn select_template(gap: &KnowledgeGap) -> TemplateKind {
    match gap {
        KnowledgeGap::MissingGoal => TemplateKind::Goal,
        KnowledgeGap::MissingAction => TemplateKind::Action,
        KnowledgeGap::RepairNeeded(_) => TemplateKind::Repair,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExample {
    pub task: String,
    pub room: String,
    /// Everything after `Aware of`, e.g. `package addressed to Gary; package is in mailroom`.
    pub aware_of: String,
    #[serde(default)]
    pub steps: Option<String>,
    pub result: String,
}

impl FewShotExample {
    fn render(&self) -> String {
        let steps = match &self.steps {
            Some(s) => format!(" Steps so far: {s}."),
            None => String::new(),
        };
        format!(
            "(TASK)Task name: {}. Task context: I am in {}. Aware of {}.{steps}(RESULT){}(END RESULT)(END TASK)",
            self.task, self.room, self.aware_of, self.result
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    #[serde(skip, default = "goal_kind")]
    pub kind: TemplateKind,
    pub skeleton: String,
    #[serde(default)]
    pub examples: Vec<FewShotExample>,
}

fn goal_kind() -> TemplateKind {
    TemplateKind::Goal
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt bank: {0}")]
    Malformed(String),
    #[error("{kind} template uses slot `{slot}`, which it does not allow")]
    ForeignSlot { kind: TemplateKind, slot: String },
    #[error("{0} template needs at least one example")]
    NoExamples(TemplateKind),
    #[error("context has no value for slot `{0}`")]
    MissingSlot(&'static str),
    #[error("a {0} template cannot be instantiated from a context")]
    NotContextual(TemplateKind),
}

fn slots(skeleton: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = skeleton;
    while let Some(start) = rest.find('{') {
        let tail = &rest[start + 1..];
        match tail.find('}') {
            Some(end) => {
                out.push(&tail[..end]);
                rest = &tail[end + 1..];
            }
            None => break,
        }
    }
    out
}

fn fill(skeleton: &str, value: impl Fn(&str) -> String) -> String {
    let mut out = String::with_capacity(skeleton.len() * 2);
    let mut rest = skeleton;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let tail = &rest[start + 1..];
        let Some(end) = tail.find('}') else {
            rest = &rest[start..];
            break;
        };
        out.push_str(&value(&tail[..end]));
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    out
}

/// Make a value safe to embed: one line, no markers, no slot braces.
fn sanitize(value: &str) -> String {
    let cleaned: String = value
        .chars()
        .map(|c| match c {
            '(' | ')' | '{' | '}' => ' ',
            c if c.is_whitespace() => ' ',
            c => c,
        })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The three templates, usually loaded from `prompt_bank.json`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBank {
    pub goal: PromptTemplate,
    pub action: PromptTemplate,
    pub repair: PromptTemplate,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBank {
    #[allow(dead_code)]
    v: u32,
    goal: PromptTemplate,
    action: PromptTemplate,
    repair: PromptTemplate,
}

impl PromptBank {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let raw: RawBank =
            serde_json::from_str(text).map_err(|e| PromptError::Malformed(e.to_string()))?;
        let mut bank = PromptBank {
            goal: raw.goal,
            action: raw.action,
            repair: raw.repair,
        };
        bank.goal.kind = TemplateKind::Goal;
        bank.action.kind = TemplateKind::Action;
        bank.repair.kind = TemplateKind::Repair;
        for t in [&bank.goal, &bank.action, &bank.repair] {
            for slot in slots(&t.skeleton) {
                if !t.kind.allowed_slots().contains(&slot) {
                    return Err(PromptError::ForeignSlot {
                        kind: t.kind,
                        slot: slot.to_string(),
                    });
                }
            }
            if t.kind != TemplateKind::Repair && t.examples.is_empty() {
                return Err(PromptError::NoExamples(t.kind));
            }
        }
        Ok(bank)
    }

    /// The bank shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(crate::bundled::PROMPT_BANK).expect("bundled prompt bank is valid")
    }

    pub fn template(&self, kind: TemplateKind) -> &PromptTemplate {
        match kind {
            TemplateKind::Goal => &self.goal,
            TemplateKind::Action => &self.action,
            TemplateKind::Repair => &self.repair,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub kind: TemplateKind,
    pub text: String,
    pub params: GenerationParams,
}

/// Fill a goal or action template from the working context.
pub fn instantiate(
    template: &PromptTemplate,
    ctx: &WorkingContext,
    params: GenerationParams,
) -> Result<PromptInstance, PromptError> {
    if template.kind == TemplateKind::Repair {
        return Err(PromptError::NotContextual(template.kind));
    }
    let mut values: Vec<(&'static str, String)> = Vec::new();
    for &slot in template.kind.allowed_slots() {
        let v = match slot {
            "task_name" => sanitize(&ctx.task_name),
            "agent_room" => sanitize(&ctx.agent_room),
            "focus_object" => sanitize(
                &ctx.focus_object
                    .as_ref()
                    .map(|f| f.phrase())
                    .unwrap_or_default(),
            ),
            "focus_containment" => sanitize(&ctx.focus_containment),
            "steps_so_far" => {
                if ctx.steps_so_far.is_empty() {
                    "none".to_string()
                } else {
                    let phrases: Vec<String> =
                        ctx.steps_so_far.iter().map(render_step_phrase).collect();
                    sanitize(&phrases.join(", "))
                }
            }
            _ => unreachable!("slot list is fixed"),
        };
        if v.is_empty() && slots(&template.skeleton).contains(&slot) {
            return Err(PromptError::MissingSlot(slot));
        }
        values.push((slot, v));
    }
    let live = fill(&template.skeleton, |slot| {
        values
            .iter()
            .find(|(s, _)| *s == slot)
            .map(|(_, v)| v.clone())
            .unwrap_or_default()
    });
    let mut text = String::from("(EXAMPLES)");
    for ex in &template.examples {
        text.push_str(&ex.render());
    }
    text.push_str("(END EXAMPLES)");
    text.push_str(&live);
    Ok(PromptInstance {
        kind: template.kind,
        text,
        params,
    })
}

/// Chain a failed response and its issue onto the prompt that produced it.
pub fn build_repair(
    repair: &PromptTemplate,
    prior: &PromptInstance,
    failed: &str,
    issue: &FailureCategory,
) -> PromptInstance {
    let failed = sanitize(failed);
    let issue = sanitize(&issue.describe());
    let text = fill(&repair.skeleton, |slot| match slot {
        "prior_prompt" => prior.text.clone(),
        "failed_response" => failed.clone(),
        "issue" => issue.clone(),
        _ => String::new(),
    });
    PromptInstance {
        kind: TemplateKind::Repair,
        text,
        params: prior.params,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MarkerError {
    #[error("prompt contains a line break")]
    LineBreak,
    #[error("unresolved slot `{0}`")]
    UnresolvedSlot(String),
    #[error("unknown marker `{0}`")]
    UnknownMarker(String),
    #[error("marker `{found}` where {expected} was expected")]
    Unexpected { found: String, expected: &'static str },
    #[error("prompt ends early; {0} was expected")]
    Truncated(&'static str),
}

const MARKERS: [&str; 10] = [
    "EXAMPLES",
    "END EXAMPLES",
    "TASK",
    "END TASK",
    "RESULT",
    "END RESULT",
    "FAILED RESPONSE",
    "END FAILED RESPONSE",
    "ISSUE",
    "END ISSUE",
];

/// Check that a prompt is one line, has no leftover slots, and its markers
/// follow the example-block / live-task / repair-chain structure.
pub fn check_markers(text: &str) -> Result<(), MarkerError> {
    if text.contains(['\n', '\r']) {
        return Err(MarkerError::LineBreak);
    }
    if let Some(slot) = slots(text).into_iter().next() {
        return Err(MarkerError::UnresolvedSlot(slot.to_string()));
    }
    let mut found = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('(') {
        let tail = &rest[start + 1..];
        let end = tail
            .find(')')
            .ok_or_else(|| MarkerError::UnknownMarker(tail.to_string()))?;
        let m = &tail[..end];
        if !MARKERS.contains(&m) {
            return Err(MarkerError::UnknownMarker(m.to_string()));
        }
        found.push(m);
        rest = &tail[end + 1..];
    }
    let mut it = found.into_iter().peekable();
    let expect = |want: &'static str, it: &mut std::iter::Peekable<std::vec::IntoIter<&str>>| {
        match it.next() {
            Some(m) if m == want => Ok(()),
            Some(m) => Err(MarkerError::Unexpected {
                found: m.to_string(),
                expected: want,
            }),
            None => Err(MarkerError::Truncated(want)),
        }
    };
    expect("EXAMPLES", &mut it)?;
    while it.peek() == Some(&"TASK") {
        for m in ["TASK", "RESULT", "END RESULT", "END TASK"] {
            expect(m, &mut it)?;
        }
    }
    expect("END EXAMPLES", &mut it)?;
    expect("TASK", &mut it)?;
    expect("RESULT", &mut it)?;
    while it.peek().is_some() {
        for m in ["FAILED RESPONSE", "END FAILED RESPONSE", "ISSUE", "END ISSUE", "RESULT"] {
            expect(m, &mut it)?;
        }
    }
    Ok(())
}
