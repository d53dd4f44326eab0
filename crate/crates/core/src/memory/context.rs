use serde::{Deserialize, Serialize};

use crate::parser::ActionStep;
use crate::world::{ObjId, ObjectInstance, Placement, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FocusObject {
    pub id: ObjId,
    pub noun: String,
    pub adjectives: Vec<String>,
}

impl FocusObject {
    pub fn phrase(&self) -> String {
        let mut words: Vec<&str> = self.adjectives.iter().map(String::as_str).collect();
        words.push(&self.noun);
        words.join(" ")
    }
}

impl From<&ObjectInstance> for FocusObject {
    fn from(o: &ObjectInstance) -> Self {
        Self {
            id: o.id.clone(),
            noun: o.noun.clone(),
            adjectives: o.adjectives.clone(),
        }
    }
}

/// What the agent is attending to right now; every field renders into a
/// prompt slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct WorkingContext {
    pub task_name: String,
    pub agent_room: String,
    pub focus_object: Option<FocusObject>,
    /// e.g. `in dish rack`
    pub focus_containment: String,
    pub steps_so_far: Vec<ActionStep>,
}

impl WorkingContext {
    /// Context for attending to `object` in `world`; `None` if no such object.
    pub fn for_object(task_name: &str, world: &WorldState, object: &ObjId) -> Option<Self> {
        let obj = world.object(object)?;
        let agent_room = world.location(&world.agent_at)?.name.clone();
        let focus_containment = match &obj.at {
            Placement::In(l) => format!("in {}", world.location(l)?.name),
            Placement::On(l) => format!("on {}", world.location(l)?.name),
            Placement::Held => "held".to_string(),
        };
        Some(Self {
            task_name: task_name.to_string(),
            agent_room,
            focus_object: Some(obj.into()),
            focus_containment,
            steps_so_far: Vec::new(),
        })
    }
}
