use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{LocId, ObjId, Placement, WorldState};

/// A goal atom over world ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundAtom {
    /// Object directly in a receptacle, or anywhere inside a room.
    In(ObjId, LocId),
    On(ObjId, LocId),
    /// `open` / `closed` state of a location.
    LocState(LocId, String),
    /// Static property of an object.
    ObjHas(ObjId, String),
}

impl GroundAtom {
    pub fn object(&self) -> Option<&ObjId> {
        match self {
            GroundAtom::In(o, _) | GroundAtom::On(o, _) | GroundAtom::ObjHas(o, _) => Some(o),
            GroundAtom::LocState(..) => None,
        }
    }

    pub fn holds(&self, world: &WorldState) -> bool {
        match self {
            GroundAtom::In(o, l) => {
                let Some(obj) = world.object(o) else {
                    return false;
                };
                let Some(loc) = world.location(l) else {
                    return false;
                };
                match &obj.at {
                    Placement::Held => false,
                    Placement::In(at) if at == l => true,
                    Placement::In(at) | Placement::On(at) => {
                        loc.is_room() && world.room_of(at) == Some(l)
                    }
                }
            }
            GroundAtom::On(o, l) => world
                .object(o)
                .is_some_and(|obj| obj.at == Placement::On(l.clone())),
            GroundAtom::LocState(l, state) => world.location(l).is_some_and(|loc| {
                match state.as_str() {
                    "open" => loc.is_accessible(),
                    "closed" => loc.openable && !loc.is_open,
                    _ => false,
                }
            }),
            GroundAtom::ObjHas(o, adj) => world
                .object(o)
                .is_some_and(|obj| obj.adjectives.iter().any(|a| a == adj)),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundAtom::In(o, l) => write!(f, "in({o}, {l})"),
            GroundAtom::On(o, l) => write!(f, "on({o}, {l})"),
            GroundAtom::LocState(l, s) => write!(f, "{s}({l})"),
            GroundAtom::ObjHas(o, s) => write!(f, "{s}({o})"),
        }
    }
}

/// Conjunction of atoms bound to world ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GroundedGoal {
    pub atoms: Vec<GroundAtom>,
}

impl GroundedGoal {
    pub fn new(atoms: Vec<GroundAtom>) -> Self {
        Self { atoms }
    }

    /// Conjunct set, for order-insensitive comparison.
    pub fn conjunct_set(&self) -> BTreeSet<&GroundAtom> {
        self.atoms.iter().collect()
    }

    pub fn equivalent(&self, other: &GroundedGoal) -> bool {
        self.conjunct_set() == other.conjunct_set()
    }

    pub fn objects(&self) -> BTreeSet<ObjId> {
        self.atoms.iter().filter_map(|a| a.object().cloned()).collect()
    }

    pub fn locations(&self) -> BTreeSet<LocId> {
        self.atoms
            .iter()
            .filter_map(|a| match a {
                GroundAtom::In(_, l) | GroundAtom::On(_, l) | GroundAtom::LocState(l, _) => {
                    Some(l.clone())
                }
                GroundAtom::ObjHas(..) => None,
            })
            .collect()
    }
}

impl fmt::Display for GroundedGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        let parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join(" & "))
    }
}

/// True iff every conjunct holds; the empty conjunction holds vacuously.
///
/// Panics if the goal names an id absent from the world: grounded goals
/// are bound against the world before they are tested.
pub fn goal_holds(world: &WorldState, goal: &GroundedGoal) -> bool {
    goal.atoms.iter().all(|atom| {
        if let Some(o) = atom.object() {
            assert!(world.object(o).is_some(), "unbound object {o} in goal");
        }
        if let GroundAtom::In(_, l) | GroundAtom::On(_, l) | GroundAtom::LocState(l, _) = atom {
            assert!(world.location(l).is_some(), "unbound location {l} in goal");
        }
        atom.holds(world)
    })
}
