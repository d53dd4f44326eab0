//! Bounded breadth-first planning, plan execution, and retrospective
//! compilation of achieved goals into rules.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::memory::{RuleConditions, TemplateAtom, WorkingContext};
use crate::world::{
    apply_action, goal_holds, legal_actions, Action, ActionError, Embodiment, GroundedGoal,
    WorldState,
};

/// Longest plan the agent will consider.
pub const DEFAULT_DEPTH_CAP: usize = 12;

/// Shortest action sequence making `goal` hold, or `None` if no plan of at
/// most `depth_cap` steps exists.
///
/// States are deduplicated by digest and successors expanded in sorted
/// action order, so among equal-length plans the lexicographically
/// smallest is returned. Search runs over the world projected onto the
/// goal's objects.
pub fn plan(
    world: &WorldState,
    emb: &Embodiment,
    goal: &GroundedGoal,
    depth_cap: usize,
) -> Option<Vec<Action>> {
    let start = world.project(&goal.objects());
    if goal_holds(&start, goal) {
        return Some(Vec::new());
    }
    // (parent index, action) per discovered node; index 0 is the root
    let mut nodes: Vec<(usize, Option<Action>)> = vec![(0, None)];
    let mut visited: HashSet<String> = HashSet::from([start.digest()]);
    let mut queue: VecDeque<(WorldState, usize, usize)> = VecDeque::from([(start, 0, 0)]);

    while let Some((state, idx, depth)) = queue.pop_front() {
        if depth >= depth_cap {
            continue;
        }
        for action in legal_actions(&state, emb) {
            let next = match apply_action(&state, emb, &action) {
                Ok(n) => n,
                Err(_) => continue,
            };
            if !visited.insert(next.digest()) {
                continue;
            }
            nodes.push((idx, Some(action)));
            let node = nodes.len() - 1;
            if goal_holds(&next, goal) {
                return Some(reconstruct(&nodes, node));
            }
            queue.push_back((next, node, depth + 1));
        }
    }
    None
}

fn reconstruct(nodes: &[(usize, Option<Action>)], mut node: usize) -> Vec<Action> {
    let mut path = Vec::new();
    while node != 0 {
        let (parent, action) = &nodes[node];
        path.extend(action.clone());
        node = *parent;
    }
    path.reverse();
    path
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Digest of the state the action was applied to.
    pub before: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub final_state: WorldState,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("step {step} failed (stale plan?): {source}")]
pub struct ExecutionError {
    pub step: usize,
    #[source]
    pub source: ActionError,
}

/// Apply `seq` in order, recording each step.
pub fn execute(
    world: &WorldState,
    emb: &Embodiment,
    seq: &[Action],
) -> Result<(WorldState, Trace), ExecutionError> {
    let mut state = world.clone();
    let mut steps = Vec::with_capacity(seq.len());
    for (i, action) in seq.iter().enumerate() {
        let next = apply_action(&state, emb, action)
            .map_err(|source| ExecutionError { step: i, source })?;
        steps.push(TraceStep {
            before: state.digest(),
            action: action.clone(),
        });
        state = next;
    }
    Ok((
        state.clone(),
        Trace {
            steps,
            final_state: state,
        },
    ))
}

/// Rule contents produced by retrospection, before the store assigns an id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDraft {
    pub conditions: RuleConditions,
    pub goal: Vec<TemplateAtom>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("trace does not achieve the goal")]
    GoalNotAchieved,
    #[error("context has no focus object")]
    NoFocus,
    #[error("goal says nothing about the focus object's placement or state")]
    EmptyTemplate,
}

/// Review a finished trace and abstract its goal into a rule keyed on the
/// task, the object's noun, its source containment, and its adjectives when
/// the noun alone was ambiguous.
pub fn retrospect_compile(
    trace: &Trace,
    ctx: &WorkingContext,
    goal: &GroundedGoal,
) -> Result<RuleDraft, CompileError> {
    let focus = ctx.focus_object.as_ref().ok_or(CompileError::NoFocus)?;
    if !goal_holds(&trace.final_state, goal) {
        return Err(CompileError::GoalNotAchieved);
    }
    let template: Vec<TemplateAtom> = goal
        .atoms
        .iter()
        .filter_map(|a| TemplateAtom::abstract_over(a, &focus.id))
        .collect();
    if template.is_empty() {
        return Err(CompileError::EmptyTemplate);
    }
    let same_noun = trace
        .final_state
        .objects
        .values()
        .filter(|o| o.noun == focus.noun)
        .count();
    let adjectives = if same_noun > 1 {
        focus.adjectives.clone()
    } else {
        Vec::new()
    };
    Ok(RuleDraft {
        conditions: RuleConditions {
            task_name: ctx.task_name.clone(),
            noun: focus.noun.clone(),
            adjectives,
            source: Some(ctx.focus_containment.clone()),
        },
        goal: template,
    })
}
