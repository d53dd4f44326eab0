use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Embodiment, LocId, Location, ObjId, Placement, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    #[serde(rename = "close")]
    Close,
    #[serde(rename = "move-to")]
    MoveTo,
    #[serde(rename = "open")]
    Open,
    #[serde(rename = "pick-up")]
    PickUp,
    #[serde(rename = "put-in")]
    PutIn,
    #[serde(rename = "put-on")]
    PutOn,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        ActionKind::Close,
        ActionKind::MoveTo,
        ActionKind::Open,
        ActionKind::PickUp,
        ActionKind::PutIn,
        ActionKind::PutOn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Close => "close",
            ActionKind::MoveTo => "move-to",
            ActionKind::Open => "open",
            ActionKind::PickUp => "pick-up",
            ActionKind::PutIn => "put-in",
            ActionKind::PutOn => "put-on",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A grounded action instance.
///
/// Variants are declared in action-name order so the derived `Ord` sorts by
/// name first and argument ids second.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Close(LocId),
    MoveTo(LocId),
    Open(LocId),
    PickUp(ObjId),
    PutIn(ObjId, LocId),
    PutOn(ObjId, LocId),
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Close(..) => ActionKind::Close,
            Action::MoveTo(..) => ActionKind::MoveTo,
            Action::Open(..) => ActionKind::Open,
            Action::PickUp(..) => ActionKind::PickUp,
            Action::PutIn(..) => ActionKind::PutIn,
            Action::PutOn(..) => ActionKind::PutOn,
        }
    }

    /// Precondition atoms, in the order they are checked.
    pub fn preconditions(&self) -> Vec<Condition> {
        use Condition::*;
        match self {
            Action::MoveTo(target) => vec![
                IsRoom(target.clone()),
                NotAt(target.clone()),
                Connected(target.clone()),
            ],
            Action::PickUp(object) => vec![
                NotHeld(object.clone()),
                ObjectInAgentRoom(object.clone()),
                ObjectAccessible(object.clone()),
                GripperFree,
            ],
            Action::PutIn(object, target) => vec![
                Holding(object.clone()),
                InAgentRoom(target.clone()),
                IsContainer(target.clone()),
                Accessible(target.clone()),
            ],
            Action::PutOn(object, target) => vec![
                Holding(object.clone()),
                InAgentRoom(target.clone()),
                IsSurface(target.clone()),
            ],
            Action::Open(target) => vec![
                InAgentRoom(target.clone()),
                Openable(target.clone()),
                IsClosed(target.clone()),
            ],
            Action::Close(target) => vec![
                InAgentRoom(target.clone()),
                Openable(target.clone()),
                IsOpenNow(target.clone()),
            ],
        }
    }

    /// Compact form such as `put-in(mug, cupboard)`.
    pub fn signature(&self) -> String {
        match self {
            Action::MoveTo(target) | Action::Open(target) | Action::Close(target) => {
                format!("{}({})", self.kind(), target)
            }
            Action::PickUp(object) => format!("{}({})", self.kind(), object),
            Action::PutIn(object, target) | Action::PutOn(object, target) => {
                format!("{}({}, {})", self.kind(), object, target)
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.signature())
    }
}

/// A precondition atom decidable against any world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    IsRoom(LocId),
    NotAt(LocId),
    Connected(LocId),
    NotHeld(ObjId),
    ObjectInAgentRoom(ObjId),
    ObjectAccessible(ObjId),
    GripperFree,
    Holding(ObjId),
    InAgentRoom(LocId),
    IsContainer(LocId),
    IsSurface(LocId),
    Accessible(LocId),
    Openable(LocId),
    IsClosed(LocId),
    IsOpenNow(LocId),
}

impl Condition {
    pub fn holds(&self, world: &WorldState, emb: &Embodiment) -> bool {
        let loc = |id: &LocId| world.location(id);
        match self {
            Condition::IsRoom(l) => loc(l).is_some_and(Location::is_room),
            Condition::NotAt(l) => &world.agent_at != l,
            Condition::Connected(l) => world.connected(&world.agent_at, l),
            Condition::NotHeld(o) => world.object(o).is_some_and(|o| o.at != Placement::Held),
            Condition::ObjectInAgentRoom(o) => world.object_room(o) == Some(&world.agent_at),
            Condition::ObjectAccessible(o) => world
                .object(o)
                .and_then(|o| o.at.location())
                .and_then(&loc)
                .is_some_and(Location::is_accessible),
            Condition::GripperFree => world.holding.len() < emb.gripper_capacity,
            Condition::Holding(o) => world.is_holding(o),
            Condition::InAgentRoom(l) => world.room_of(l) == Some(&world.agent_at),
            Condition::IsContainer(l) => loc(l).is_some_and(|l| !l.surface),
            Condition::IsSurface(l) => loc(l).is_some_and(|l| l.surface),
            Condition::Accessible(l) => loc(l).is_some_and(Location::is_accessible),
            Condition::Openable(l) => loc(l).is_some_and(|l| l.openable),
            Condition::IsClosed(l) => loc(l).is_some_and(|l| l.openable && !l.is_open),
            Condition::IsOpenNow(l) => loc(l).is_some_and(|l| l.openable && l.is_open),
        }
    }

    /// What the failure looks like to a reader, e.g. `cupboard not open`.
    pub fn failure_text(&self, world: &WorldState) -> String {
        let lname = |id: &LocId| {
            world
                .location(id)
                .map(|l| l.name.clone())
                .unwrap_or_else(|| id.to_string())
        };
        let oname = |id: &ObjId| {
            world
                .object(id)
                .map(|o| o.phrase())
                .unwrap_or_else(|| id.to_string())
        };
        match self {
            Condition::IsRoom(l) => format!("{} is not a room", lname(l)),
            Condition::NotAt(l) => format!("already in {}", lname(l)),
            Condition::Connected(l) => format!("no way to reach {}", lname(l)),
            Condition::NotHeld(o) => format!("{} already held", oname(o)),
            Condition::ObjectInAgentRoom(o) => format!("{} not within reach", oname(o)),
            Condition::ObjectAccessible(o) => format!("{} is inside something closed", oname(o)),
            Condition::GripperFree => "gripper occupied".to_string(),
            Condition::Holding(o) => format!("not holding {}", oname(o)),
            Condition::InAgentRoom(l) => format!("{} not within reach", lname(l)),
            Condition::IsContainer(l) => format!("{} cannot contain things", lname(l)),
            Condition::IsSurface(l) => format!("{} is not a surface", lname(l)),
            Condition::Accessible(l) => format!("{} not open", lname(l)),
            Condition::Openable(l) => format!("{} cannot be opened or closed", lname(l)),
            Condition::IsClosed(l) => format!("{} already open", lname(l)),
            Condition::IsOpenNow(l) => format!("{} already closed", lname(l)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionError {
    #[error("{0} is not in the action repertoire")]
    NotInRepertoire(ActionKind),
    #[error("{action}: precondition failed: {message}")]
    Precondition {
        action: String,
        failed: Condition,
        message: String,
    },
}

fn check(world: &WorldState, emb: &Embodiment, act: &Action) -> Result<(), ActionError> {
    if !emb.repertoire.contains(&act.kind()) {
        return Err(ActionError::NotInRepertoire(act.kind()));
    }
    for cond in act.preconditions() {
        if !cond.holds(world, emb) {
            return Err(ActionError::Precondition {
                action: act.signature(),
                message: cond.failure_text(world),
                failed: cond,
            });
        }
    }
    Ok(())
}

/// Apply `act` to a copy of `world`.
pub fn apply_action(
    world: &WorldState,
    emb: &Embodiment,
    act: &Action,
) -> Result<WorldState, ActionError> {
    check(world, emb, act)?;
    let mut next = world.clone();
    match act {
        Action::MoveTo(target) => next.agent_at = target.clone(),
        Action::PickUp(object) => {
            if let Some(o) = next.objects.get_mut(object) {
                o.at = Placement::Held;
            }
            let pos = next.holding.binary_search(object).unwrap_or_else(|p| p);
            next.holding.insert(pos, object.clone());
        }
        Action::PutIn(object, target) | Action::PutOn(object, target) => {
            if let Some(o) = next.objects.get_mut(object) {
                o.at = if matches!(act, Action::PutIn(..)) {
                    Placement::In(target.clone())
                } else {
                    Placement::On(target.clone())
                };
            }
            next.holding.retain(|h| h != object);
        }
        Action::Open(target) | Action::Close(target) => {
            if let Some(l) = next.locations.get_mut(target) {
                l.is_open = matches!(act, Action::Open(..));
            }
        }
    }
    Ok(next)
}

/// Every precondition-satisfying grounding, sorted by action name then ids.
/// Moving to the current room is never legal.
pub fn legal_actions(world: &WorldState, emb: &Embodiment) -> Vec<Action> {
    let mut candidates = Vec::new();
    for loc in world.locations.values() {
        if loc.is_room() {
            candidates.push(Action::MoveTo(loc.id.clone()));
        }
        if loc.openable {
            candidates.push(Action::Open(loc.id.clone()));
            candidates.push(Action::Close(loc.id.clone()));
        }
    }
    for obj in world.objects.values() {
        candidates.push(Action::PickUp(obj.id.clone()));
    }
    for held in &world.holding {
        for loc in world.locations.values() {
            candidates.push(Action::PutIn(held.clone(), loc.id.clone()));
            candidates.push(Action::PutOn(held.clone(), loc.id.clone()));
        }
    }
    let mut legal: Vec<Action> = candidates
        .into_iter()
        .filter(|a| check(world, emb, a).is_ok())
        .collect();
    legal.sort();
    legal
}

#[cfg(test)]
mod tests {
    use super::super::load_scenario;
    use super::super::test_worlds::small_kitchen;
    use super::*;

    #[test]
    fn pick_up_with_free_gripper() {
        let (world, emb) = small_kitchen();
        let next = apply_action(&world, &emb, &Action::PickUp("mug".into())).unwrap();
        assert_eq!(next.holding, vec![ObjId::from("mug")]);
        assert_eq!(next.objects[&ObjId::from("mug")].at, Placement::Held);
        // input untouched
        assert!(world.holding.is_empty());
    }

    #[test]
    fn pick_up_while_full_names_gripper() {
        let (world, emb) = small_kitchen();
        let w = apply_action(&world, &emb, &Action::PickUp("mug".into())).unwrap();
        let err = apply_action(&w, &emb, &Action::PickUp("plate".into())).unwrap_err();
        match err {
            ActionError::Precondition { failed, message, .. } => {
                assert_eq!(failed, Condition::GripperFree);
                assert_eq!(message, "gripper occupied");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn put_in_closed_cupboard_fails() {
        let (world, emb) = small_kitchen();
        let w = apply_action(&world, &emb, &Action::PickUp("mug".into())).unwrap();
        let err = apply_action(&w, &emb, &Action::PutIn("mug".into(), "cupboard".into()))
            .unwrap_err();
        assert!(err.to_string().contains("cupboard not open"), "{err}");
    }

    #[test]
    fn action_outside_repertoire() {
        let (world, mut emb) = small_kitchen();
        emb.repertoire.remove(&ActionKind::Open);
        let err = apply_action(&world, &emb, &Action::Open("cupboard".into())).unwrap_err();
        assert_eq!(err, ActionError::NotInRepertoire(ActionKind::Open));
    }

    #[test]
    fn legal_actions_hand_enumerated() {
        // one room, one object, one open receptacle, gripper empty
        let text = r#"{
          "rooms": [{"id": "kitchen", "name": "kitchen"}],
          "receptacles": [{"id": "bin", "name": "bin", "in_room": "kitchen", "openable": true, "open": true}],
          "objects": [{"id": "cup", "name": "cup", "noun": "cup", "adjectives": [], "in": "kitchen"}],
          "agent": {"in": "kitchen"},
          "embodiment": {}
        }"#;
        let s = load_scenario(text).unwrap();
        let legal = legal_actions(&s.world, &s.embodiment);
        assert_eq!(
            legal,
            vec![Action::Close("bin".into()), Action::PickUp("cup".into())]
        );
        let held = apply_action(&s.world, &s.embodiment, &Action::PickUp("cup".into())).unwrap();
        assert_eq!(
            legal_actions(&held, &s.embodiment),
            vec![
                Action::Close("bin".into()),
                Action::PutIn("cup".into(), "bin".into()),
                Action::PutIn("cup".into(), "kitchen".into()),
            ]
        );
    }

    #[test]
    fn no_objects_one_room_has_no_legal_actions() {
        let text = r#"{"rooms": [{"id": "r", "name": "room"}], "receptacles": [], "objects": [],
                      "agent": {"in": "r"}, "embodiment": {}}"#;
        let s = load_scenario(text).unwrap();
        assert!(legal_actions(&s.world, &s.embodiment).is_empty());
    }

    #[test]
    fn at_capacity_no_pick_up() {
        let (world, emb) = small_kitchen();
        let w = apply_action(&world, &emb, &Action::PickUp("mug".into())).unwrap();
        assert!(legal_actions(&w, &emb)
            .iter()
            .all(|a| a.kind() != ActionKind::PickUp));
    }

    #[test]
    fn open_close_inverse_restores_state() {
        let (world, emb) = small_kitchen();
        let w = apply_action(&world, &emb, &Action::Open("cupboard".into())).unwrap();
        let w = apply_action(&w, &emb, &Action::Close("cupboard".into())).unwrap();
        assert_eq!(w, world);
        let w = apply_action(&world, &emb, &Action::PickUp("mug".into())).unwrap();
        let w = apply_action(&w, &emb, &Action::PutIn("mug".into(), "rack".into())).unwrap();
        assert_eq!(w, world);
    }
}
