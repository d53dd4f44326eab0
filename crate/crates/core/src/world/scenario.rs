//! Scenario documents: JSON with `rooms`, `receptacles`, `objects`, `agent`
//! and `embodiment`. Optional `task`, `doors` and `vocabulary` keys extend
//! the base format.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    ActionKind, Embodiment, LocId, Location, LocationKind, ObjId, ObjectInstance,
    PerceptionRange, Placement, WorldState,
};

const HELD: &str = "HELD";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("malformed scenario at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: duplicate id `{id}`")]
    Duplicate { field: String, id: String },
    #[error("{field}: unknown id `{id}`")]
    Dangling { field: String, id: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    task: Option<String>,
    rooms: Vec<RawRoom>,
    #[serde(default)]
    doors: Option<Vec<(String, String)>>,
    receptacles: Vec<RawReceptacle>,
    objects: Vec<RawObject>,
    agent: RawAgent,
    embodiment: RawEmbodiment,
    #[serde(default)]
    vocabulary: Vocabulary,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoom {
    id: String,
    name: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReceptacle {
    id: String,
    name: String,
    in_room: String,
    openable: bool,
    open: bool,
    #[serde(default)]
    surface: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    id: String,
    #[allow(dead_code)]
    name: String,
    noun: String,
    #[serde(default)]
    adjectives: Vec<String>,
    #[serde(rename = "in")]
    location: String,
    /// `in` (default) or `on`.
    #[serde(default)]
    relation: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct RawAgent {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    name: Option<String>,
    #[serde(rename = "in")]
    location: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmbodiment {
    #[serde(default = "default_capacity")]
    gripper_capacity: usize,
    #[serde(default)]
    actions: Option<Vec<String>>,
    #[serde(default)]
    perception: PerceptionRange,
}

fn default_capacity() -> usize {
    1
}

/// Extra words the agent knows beyond the scenario's own entity names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vocabulary {
    #[serde(default)]
    pub nouns: Vec<String>,
    #[serde(default)]
    pub adjectives: Vec<String>,
    #[serde(default)]
    pub verbs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub task: Option<String>,
    pub world: WorldState,
    pub embodiment: Embodiment,
    pub vocabulary: Vocabulary,
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Malformed {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(raw)
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

fn build(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let mut locations: BTreeMap<LocId, Location> = BTreeMap::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut claim = |field: String, id: &str| -> Result<(), ScenarioError> {
        if id.trim().is_empty() {
            return Err(invalid(field, "empty id"));
        }
        if !seen.insert(id.to_string()) || id == HELD {
            return Err(ScenarioError::Duplicate {
                field,
                id: id.to_string(),
            });
        }
        Ok(())
    };

    for (i, room) in raw.rooms.iter().enumerate() {
        claim(format!("rooms[{i}].id"), &room.id)?;
        locations.insert(
            LocId::new(&room.id),
            Location {
                id: LocId::new(&room.id),
                name: room.name.trim().to_lowercase(),
                kind: LocationKind::Room,
                openable: false,
                is_open: true,
                surface: false,
                parent: None,
            },
        );
    }
    if locations.is_empty() {
        return Err(invalid("rooms", "at least one room is required"));
    }
    for (i, r) in raw.receptacles.iter().enumerate() {
        claim(format!("receptacles[{i}].id"), &r.id)?;
        let parent = LocId::new(&r.in_room);
        if !locations.get(&parent).is_some_and(Location::is_room) {
            return Err(ScenarioError::Dangling {
                field: format!("receptacles[{i}].in_room"),
                id: r.in_room.clone(),
            });
        }
        if r.surface && r.openable {
            return Err(invalid(
                format!("receptacles[{i}]"),
                "a surface cannot be openable",
            ));
        }
        locations.insert(
            LocId::new(&r.id),
            Location {
                id: LocId::new(&r.id),
                name: r.name.trim().to_lowercase(),
                kind: LocationKind::Receptacle,
                openable: r.openable,
                is_open: if r.openable { r.open } else { true },
                surface: r.surface,
                parent: Some(parent),
            },
        );
    }

    let doors = match raw.doors {
        None => None,
        Some(pairs) => {
            let mut set = BTreeSet::new();
            for (i, (a, b)) in pairs.into_iter().enumerate() {
                for end in [&a, &b] {
                    if !locations.get(&LocId::new(end)).is_some_and(Location::is_room) {
                        return Err(ScenarioError::Dangling {
                            field: format!("doors[{i}]"),
                            id: end.clone(),
                        });
                    }
                }
                let (a, b) = (LocId::new(a), LocId::new(b));
                set.insert(if a <= b { (a, b) } else { (b, a) });
            }
            Some(set)
        }
    };

    let mut objects = BTreeMap::new();
    let mut holding = Vec::new();
    for (i, o) in raw.objects.iter().enumerate() {
        claim(format!("objects[{i}].id"), &o.id)?;
        if o.noun.trim().is_empty() {
            return Err(invalid(format!("objects[{i}].noun"), "empty noun"));
        }
        let id = ObjId::new(&o.id);
        let at = if o.location == HELD {
            holding.push(id.clone());
            Placement::Held
        } else {
            let loc = LocId::new(&o.location);
            let Some(target) = locations.get(&loc) else {
                return Err(ScenarioError::Dangling {
                    field: format!("objects[{i}].in"),
                    id: o.location.clone(),
                });
            };
            match o.relation.as_deref().unwrap_or("in") {
                "in" => Placement::In(loc),
                "on" if target.surface => Placement::On(loc),
                "on" => {
                    return Err(invalid(
                        format!("objects[{i}].relation"),
                        format!("`{}` is not a surface", o.location),
                    ))
                }
                other => {
                    return Err(invalid(
                        format!("objects[{i}].relation"),
                        format!("expected `in` or `on`, got `{other}`"),
                    ))
                }
            }
        };
        objects.insert(
            id.clone(),
            ObjectInstance {
                id,
                noun: o.noun.trim().to_lowercase(),
                adjectives: o
                    .adjectives
                    .iter()
                    .map(|a| a.trim().to_lowercase())
                    .collect(),
                at,
            },
        );
    }
    holding.sort();

    let agent_at = LocId::new(&raw.agent.location);
    match locations.get(&agent_at) {
        None => {
            return Err(ScenarioError::Dangling {
                field: "agent.in".into(),
                id: raw.agent.location.clone(),
            })
        }
        Some(l) if !l.is_room() => return Err(invalid("agent.in", "the agent must be in a room")),
        Some(_) => {}
    }

    let repertoire: BTreeSet<ActionKind> = match &raw.embodiment.actions {
        None => ActionKind::ALL.iter().copied().collect(),
        Some(names) => {
            let mut set = BTreeSet::new();
            for (i, n) in names.iter().enumerate() {
                let kind = ActionKind::from_name(n).ok_or_else(|| {
                    invalid(format!("embodiment.actions[{i}]"), format!("unknown action `{n}`"))
                })?;
                set.insert(kind);
            }
            set
        }
    };
    if repertoire.is_empty() {
        return Err(invalid("embodiment.actions", "repertoire must not be empty"));
    }
    if raw.embodiment.gripper_capacity == 0 {
        return Err(invalid("embodiment.gripper_capacity", "must be at least 1"));
    }
    let embodiment = Embodiment {
        gripper_capacity: raw.embodiment.gripper_capacity,
        repertoire,
        perception: raw.embodiment.perception,
    };

    let world = WorldState {
        locations,
        objects,
        agent_at,
        holding,
        doors,
    };
    world
        .validate(&embodiment)
        .map_err(|e| invalid("objects", e.0))?;

    Ok(Scenario {
        task: raw.task,
        world,
        embodiment,
        vocabulary: raw.vocabulary,
    })
}
