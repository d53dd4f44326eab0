//! Scenarios, preferences, prompt bank and corpus shipped with the crate.

use crate::world::{load_scenario, Scenario};

pub const PROMPT_BANK: &str = include_str!("../data/prompt_bank.json");
pub const GOLDEN_PROMPT: &str = include_str!("../data/golden_prompt.txt");

pub const KITCHEN35_SCENARIO: &str = include_str!("../data/kitchen35/scenario.json");
pub const KITCHEN35_PREFS: &str = include_str!("../data/kitchen35/prefs.json");
pub const KITCHEN35_CORPUS: &str = include_str!("../data/kitchen35/corpus.ndjson");

pub const PANTRY_SCENARIO: &str = include_str!("../data/pantry/scenario.json");
pub const PANTRY_PREFS: &str = include_str!("../data/pantry/prefs.json");

pub const MAILROOM_SCENARIO: &str = include_str!("../data/mailroom/scenario.json");

pub fn kitchen35_scenario() -> Scenario {
    load_scenario(KITCHEN35_SCENARIO).expect("bundled kitchen35 scenario is valid")
}

pub fn pantry_scenario() -> Scenario {
    load_scenario(PANTRY_SCENARIO).expect("bundled pantry scenario is valid")
}

pub fn mailroom_scenario() -> Scenario {
    load_scenario(MAILROOM_SCENARIO).expect("bundled mailroom scenario is valid")
}
