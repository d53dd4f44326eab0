//! Compiled procedural knowledge: condition → goal rules that answer a
//! knowledge gap without consulting the language model.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpisodeId, WorkingContext};
use crate::world::{GroundAtom, GroundedGoal, LocId, ObjId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleId(pub u64);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule-{}", self.0)
    }
}

/// Goal atom with the matched object abstracted to a variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateAtom {
    /// The matched object is in the location.
    In(LocId),
    On(LocId),
    /// The matched object has the property.
    Has(String),
    LocState(LocId, String),
}

impl TemplateAtom {
    fn instantiate(&self, focus: &ObjId) -> GroundAtom {
        match self {
            TemplateAtom::In(l) => GroundAtom::In(focus.clone(), l.clone()),
            TemplateAtom::On(l) => GroundAtom::On(focus.clone(), l.clone()),
            TemplateAtom::Has(a) => GroundAtom::ObjHas(focus.clone(), a.clone()),
            TemplateAtom::LocState(l, s) => GroundAtom::LocState(l.clone(), s.clone()),
        }
    }

    /// Abstract `atom` over `focus`; atoms about other objects have no
    /// template form.
    pub fn abstract_over(atom: &GroundAtom, focus: &ObjId) -> Option<Self> {
        match atom {
            GroundAtom::In(o, l) if o == focus => Some(TemplateAtom::In(l.clone())),
            GroundAtom::On(o, l) if o == focus => Some(TemplateAtom::On(l.clone())),
            GroundAtom::ObjHas(o, a) if o == focus => Some(TemplateAtom::Has(a.clone())),
            GroundAtom::LocState(l, s) => Some(TemplateAtom::LocState(l.clone(), s.clone())),
            _ => None,
        }
    }

    pub fn location(&self) -> Option<&LocId> {
        match self {
            TemplateAtom::In(l) | TemplateAtom::On(l) | TemplateAtom::LocState(l, _) => Some(l),
            TemplateAtom::Has(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleConditions {
    pub task_name: String,
    pub noun: String,
    /// Must all be present on the object; empty matches any.
    pub adjectives: Vec<String>,
    /// Containment phrase the object must be found in, if any.
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProceduralRule {
    pub id: RuleId,
    pub conditions: RuleConditions,
    pub goal: Vec<TemplateAtom>,
    pub provenance: Option<EpisodeId>,
}

impl ProceduralRule {
    pub fn matches(&self, ctx: &WorkingContext) -> bool {
        let Some(focus) = &ctx.focus_object else {
            return false;
        };
        let c = &self.conditions;
        c.task_name.eq_ignore_ascii_case(&ctx.task_name)
            && c.noun == focus.noun
            && c.adjectives.iter().all(|a| focus.adjectives.contains(a))
            && c.source.as_ref().is_none_or(|s| *s == ctx.focus_containment)
    }

    pub fn instantiate(&self, focus: &ObjId) -> GroundedGoal {
        GroundedGoal::new(self.goal.iter().map(|t| t.instantiate(focus)).collect())
    }

    /// Higher is more specific.
    fn specificity(&self) -> (usize, bool) {
        (
            self.conditions.adjectives.len(),
            self.conditions.source.is_some(),
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuleStoreError {
    #[error("rule store I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("rule store format: {0}")]
    Format(#[from] serde_json::Error),
}

/// Insert-only rule memory. Rules never change once stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleStore {
    rules: Vec<ProceduralRule>,
}

impl RuleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        conditions: RuleConditions,
        goal: Vec<TemplateAtom>,
        provenance: Option<EpisodeId>,
    ) -> RuleId {
        let id = RuleId(self.rules.len() as u64 + 1);
        self.rules.push(ProceduralRule {
            id,
            conditions,
            goal,
            provenance,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ProceduralRule> {
        self.rules.iter()
    }

    pub fn get(&self, id: RuleId) -> Option<&ProceduralRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Most specific matching rule: more adjectives first, then a source
    /// condition, then earliest inserted.
    pub fn best_match(&self, ctx: &WorkingContext) -> Option<&ProceduralRule> {
        let mut best: Option<&ProceduralRule> = None;
        for rule in self.rules.iter().filter(|r| r.matches(ctx)) {
            // strict comparison keeps the earliest among equals
            if best.is_none_or(|b| rule.specificity() > b.specificity()) {
                best = Some(rule);
            }
        }
        best
    }

    pub fn save(&self, path: &Path) -> Result<(), RuleStoreError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RuleStoreError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Goal from the best matching rule, bound to the context's focus object.
pub fn match_rules(rules: &RuleStore, ctx: &WorkingContext) -> Option<GroundedGoal> {
    let focus = ctx.focus_object.as_ref()?;
    rules.best_match(ctx).map(|r| r.instantiate(&focus.id))
}
