//! Deterministic simulated household: locations, objects, the agent's
//! body, and the state transitions its actions produce.
//!
//! Every operation here takes a `WorldState` by reference and returns a new
//! value; nothing mutates shared state, so worlds can be cloned freely into
//! search frontiers and concurrent evaluation runs.

mod action;
mod goal;
mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use action::{apply_action, legal_actions, Action, ActionError, ActionKind, Condition};
pub use goal::{goal_holds, GroundAtom, GroundedGoal};
pub use scenario::{load_scenario, Scenario, ScenarioError, Vocabulary};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_newtype!(
    /// Identifier of a room or receptacle.
    LocId
);
id_newtype!(
    /// Identifier of a movable object.
    ObjId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Room,
    Receptacle,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub id: LocId,
    pub name: String,
    pub kind: LocationKind,
    pub openable: bool,
    /// Only meaningful when `openable`.
    pub is_open: bool,
    /// Surfaces (tables, counters) take `put-on`; everything else takes `put-in`.
    pub surface: bool,
    /// Receptacles live in a room; rooms have no parent.
    pub parent: Option<LocId>,
}

impl Location {
    /// Non-openable locations are always treated as open.
    pub fn is_accessible(&self) -> bool {
        !self.openable || self.is_open
    }

    pub fn is_room(&self) -> bool {
        self.kind == LocationKind::Room
    }
}

/// Where an object currently is.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    In(LocId),
    On(LocId),
    Held,
}

impl Placement {
    pub fn location(&self) -> Option<&LocId> {
        match self {
            Placement::In(l) | Placement::On(l) => Some(l),
            Placement::Held => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjId,
    pub noun: String,
    pub adjectives: Vec<String>,
    pub at: Placement,
}

impl ObjectInstance {
    /// Surface phrase: adjectives followed by the noun, e.g. `dirty mug`.
    pub fn phrase(&self) -> String {
        let mut words: Vec<&str> = self.adjectives.iter().map(String::as_str).collect();
        words.push(&self.noun);
        words.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PerceptionRange {
    #[default]
    #[serde(rename = "current-room")]
    CurrentRoom,
    #[serde(rename = "global")]
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embodiment {
    pub gripper_capacity: usize,
    pub repertoire: BTreeSet<ActionKind>,
    pub perception: PerceptionRange,
}

impl Default for Embodiment {
    fn default() -> Self {
        Self {
            gripper_capacity: 1,
            repertoire: ActionKind::ALL.iter().copied().collect(),
            perception: PerceptionRange::CurrentRoom,
        }
    }
}

/// Invariant violation found by [`WorldState::validate`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("world invariant violated: {0}")]
pub struct InvariantViolation(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub locations: BTreeMap<LocId, Location>,
    pub objects: BTreeMap<ObjId, ObjectInstance>,
    pub agent_at: LocId,
    /// Sorted ids of held objects; each is marked `Placement::Held`.
    pub holding: Vec<ObjId>,
    /// Undirected room adjacency. `None` means every room reaches every other.
    pub doors: Option<BTreeSet<(LocId, LocId)>>,
}

impl WorldState {
    pub fn location(&self, id: &LocId) -> Option<&Location> {
        self.locations.get(id)
    }

    pub fn object(&self, id: &ObjId) -> Option<&ObjectInstance> {
        self.objects.get(id)
    }

    pub fn rooms(&self) -> impl Iterator<Item = &Location> {
        self.locations.values().filter(|l| l.is_room())
    }

    /// The room a location belongs to (itself for rooms).
    pub fn room_of(&self, id: &LocId) -> Option<&LocId> {
        let loc = self.locations.get(id)?;
        match loc.kind {
            LocationKind::Room => Some(&loc.id),
            LocationKind::Receptacle => loc.parent.as_ref(),
        }
    }

    /// The room an object is in. Held objects travel with the agent.
    pub fn object_room(&self, id: &ObjId) -> Option<&LocId> {
        let obj = self.objects.get(id)?;
        match obj.at.location() {
            Some(loc) => self.room_of(loc),
            None => Some(&self.agent_at),
        }
    }

    pub fn connected(&self, a: &LocId, b: &LocId) -> bool {
        match &self.doors {
            None => true,
            Some(doors) => {
                let key = if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                };
                doors.contains(&key)
            }
        }
    }

    pub fn is_holding(&self, id: &ObjId) -> bool {
        self.holding.binary_search(id).is_ok()
    }

    /// Canonical text of the mutable state: agent position, held objects,
    /// open receptacles, and every object's placement, all in id order.
    pub fn digest(&self) -> String {
        let mut out = format!("at={}|hold=", self.agent_at);
        out.push_str(
            &self
                .holding
                .iter()
                .map(ObjId::as_str)
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push_str("|open=");
        out.push_str(
            &self
                .locations
                .values()
                .filter(|l| l.openable && l.is_open)
                .map(|l| l.id.as_str())
                .collect::<Vec<_>>()
                .join(","),
        );
        for obj in self.objects.values() {
            out.push('|');
            out.push_str(obj.id.as_str());
            out.push('=');
            match &obj.at {
                Placement::In(l) => {
                    out.push_str("in:");
                    out.push_str(l.as_str());
                }
                Placement::On(l) => {
                    out.push_str("on:");
                    out.push_str(l.as_str());
                }
                Placement::Held => out.push_str("held"),
            }
        }
        out
    }

    /// Copy of the world keeping only `keep` plus whatever is held.
    ///
    /// No precondition depends on an object the agent is neither holding nor
    /// manipulating, so search over the projection finds exactly the plans
    /// that search over the full world would.
    pub fn project(&self, keep: &BTreeSet<ObjId>) -> WorldState {
        let objects = self
            .objects
            .iter()
            .filter(|(id, _)| keep.contains(*id) || self.is_holding(id))
            .map(|(id, o)| (id.clone(), o.clone()))
            .collect();
        WorldState {
            locations: self.locations.clone(),
            objects,
            agent_at: self.agent_at.clone(),
            holding: self.holding.clone(),
            doors: self.doors.clone(),
        }
    }

    pub fn validate(&self, emb: &Embodiment) -> Result<(), InvariantViolation> {
        let fail = |msg: String| Err(InvariantViolation(msg));
        for loc in self.locations.values() {
            match (loc.kind, &loc.parent) {
                (LocationKind::Room, Some(_)) => {
                    return fail(format!("room {} has a parent", loc.id));
                }
                (LocationKind::Receptacle, None) => {
                    return fail(format!("receptacle {} has no room", loc.id));
                }
                (LocationKind::Receptacle, Some(p)) => {
                    if !self.locations.get(p).is_some_and(Location::is_room) {
                        return fail(format!("receptacle {} parent {} is not a room", loc.id, p));
                    }
                }
                (LocationKind::Room, None) => {}
            }
        }
        if !self.locations.get(&self.agent_at).is_some_and(Location::is_room) {
            return fail(format!("agent location {} is not a room", self.agent_at));
        }
        let mut held: Vec<ObjId> = Vec::new();
        for obj in self.objects.values() {
            match obj.at.location() {
                Some(l) if !self.locations.contains_key(l) => {
                    return fail(format!("object {} at unknown location {}", obj.id, l));
                }
                Some(_) => {}
                None => held.push(obj.id.clone()),
            }
        }
        if held != self.holding {
            return fail("holding list disagrees with held objects".to_string());
        }
        if self.holding.len() > emb.gripper_capacity {
            return fail("gripper over capacity".to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Percept {
    pub object: ObjId,
    pub phrase: String,
    pub placement: Placement,
    /// Name of the containing location; `None` when held.
    pub location_name: Option<String>,
}

impl Percept {
    /// Containment phrase as used in prompts: `in dish rack`, `on table`, `held`.
    pub fn containment(&self) -> String {
        match (&self.placement, &self.location_name) {
            (Placement::In(_), Some(name)) => format!("in {name}"),
            (Placement::On(_), Some(name)) => format!("on {name}"),
            _ => "held".to_string(),
        }
    }
}

/// Objects visible to the agent, ordered by object id.
pub fn perceive(world: &WorldState, emb: &Embodiment) -> Vec<Percept> {
    world
        .objects
        .values()
        .filter(|obj| match emb.perception {
            PerceptionRange::Global => true,
            PerceptionRange::CurrentRoom => world.object_room(&obj.id) == Some(&world.agent_at),
        })
        .map(|obj| Percept {
            object: obj.id.clone(),
            phrase: obj.phrase(),
            placement: obj.at.clone(),
            location_name: obj
                .at
                .location()
                .and_then(|l| world.location(l))
                .map(|l| l.name.clone()),
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::test_worlds::small_kitchen;
    use super::*;

    #[test]
    fn perceive_current_room_includes_rack_contents() {
        let (world, emb) = small_kitchen();
        let p = perceive(&world, &emb);
        let mug = p.iter().find(|p| p.object.as_str() == "mug").unwrap();
        assert_eq!(mug.containment(), "in dish rack");
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn perceive_is_ordered_and_pure() {
        let (world, emb) = small_kitchen();
        let a = perceive(&world, &emb);
        let b = perceive(&world, &emb);
        assert_eq!(a, b);
        let ids: Vec<_> = a.iter().map(|p| p.object.as_str()).collect();
        assert_eq!(ids, vec!["mug", "plate"]);
    }

    #[test]
    fn perceive_excludes_other_rooms_unless_global() {
        let text = r#"{
          "rooms": [{"id": "kitchen", "name": "kitchen"}, {"id": "mailroom", "name": "mailroom"}],
          "receptacles": [],
          "objects": [{"id": "package", "name": "package", "noun": "package", "adjectives": [], "in": "mailroom"}],
          "agent": {"in": "kitchen"},
          "embodiment": {}
        }"#;
        let mut s = load_scenario(text).unwrap();
        assert!(perceive(&s.world, &s.embodiment).is_empty());
        s.embodiment.perception = PerceptionRange::Global;
        assert_eq!(perceive(&s.world, &s.embodiment).len(), 1);
    }

    #[test]
    fn digest_tracks_mutable_state() {
        let (world, emb) = small_kitchen();
        let after = apply_action(&world, &emb, &Action::Open("cupboard".into())).unwrap();
        assert_ne!(world.digest(), after.digest());
        assert!(after.digest().contains("open=cupboard"));
    }

    #[test]
    fn projection_keeps_held_objects() {
        let (world, emb) = small_kitchen();
        let w = apply_action(&world, &emb, &Action::PickUp("plate".into())).unwrap();
        let keep: BTreeSet<ObjId> = [ObjId::from("mug")].into_iter().collect();
        let p = w.project(&keep);
        assert_eq!(p.objects.len(), 2);
        let p = world.project(&keep);
        assert_eq!(p.objects.len(), 1);
    }
}
