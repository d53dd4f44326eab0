//! Regenerates `data/kitchen35/corpus.ndjson`.
//!
//! Each object gets a scripted response sequence with hand labels. The
//! sequences are played through the real agent loop with a recording
//! backend, so every stored prompt (including repair prompts) is exactly
//! what the agent sends on replay. Labels are checked against the loop's
//! own categorization before anything is written.
//!
//! Run with `cargo run -p kextract-core --example build_kitchen35_corpus`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use kextract_core::agent::{Agent, LoopConfig};
use kextract_core::bundled;
use kextract_core::llm::{
    read_corpus, write_corpus, LlmGateway, RecordBackend, ScriptedBackend, TokenLedger,
};
use kextract_core::memory::Lexicon;
use kextract_core::oversight::{OracleOversight, PreferenceModel};
use kextract_core::prompt::PromptBank;
use kextract_core::verify::ResponseCategory::{self, *};

/// Response shapes per object.
#[derive(Clone, Copy)]
enum Pattern {
    /// three failures, then the preferred goal
    A,
    /// two failures, a plausible but unwanted goal, then the preferred goal
    B,
    /// failure, a nonsensical goal, failure, preferred goal
    C,
    /// four failures; the human supplies the goal
    D,
    /// two failures, then the preferred goal
    E,
    /// the golden prompt's stored answer, then the preferred goal
    Golden,
}

fn pattern(id: &str) -> Pattern {
    match id {
        "mug" => Pattern::Golden,
        "bowl" | "cup" | "glass" | "knife" | "spoon" => Pattern::B,
        "butter" | "cereal" | "plate" | "fork" | "rice" => Pattern::C,
        "banana_peel" | "egg_carton" | "lettuce" | "napkin" | "orange_juice" | "tea_bag"
        | "yogurt" => Pattern::D,
        "sponge" | "dish_soap" | "whisk" => Pattern::E,
        _ => Pattern::A,
    }
}

struct Failures {
    next: usize,
}

impl Failures {
    /// A rotating catalogue of responses that fail one of the checks.
    fn take(&mut self, noun: &str, dest: &str) -> String {
        const ABSENT: [&str; 5] = ["pantry", "closet", "dishwasher", "oven", "cabinet"];
        const SURFACES: [&str; 3] = ["counter", "shelf", "table"];
        let k = self.next;
        self.next += 1;
        match k % 9 {
            0 => format!("The goal is that the {noun} is in the credenza."),
            1 => format!("The goal is that the {noun} is in the {}.", ABSENT[(k / 9) % 5]),
            2 => format!("The goal is that the {noun} is on the {}.", SURFACES[(k / 9) % 3]),
            3 => format!("The goal is that the {noun} is on the {dest}."),
            4 => format!("The goal is that the {noun} is clean."),
            5 => format!("The {noun} is in the {dest}."),
            6 => format!("The goal is that the {noun} is put away."),
            7 => format!(
                "The goal is that the {noun} is in the dish rack and the dish rack is closed."
            ),
            _ => String::new(),
        }
    }
}

fn main() {
    let scenario = bundled::kitchen35_scenario();
    let lexicon = Lexicon::from_scenario(&scenario).expect("lexicon");
    let prefs = PreferenceModel::parse(bundled::KITCHEN35_PREFS, &scenario.world, &lexicon)
        .expect("preferences");
    let doc = prefs.document().clone();
    let task = doc.task.clone();

    let mut script = Vec::new();
    let mut labels: Vec<(String, ResponseCategory)> = Vec::new();
    let mut failures = Failures { next: 0 };
    for obj in scenario.world.objects.values() {
        let noun = obj.noun.as_str();
        let preferred = doc.preferences[noun].clone();
        let after = preferred
            .split_once(" is in the ")
            .expect("preferred goal names a destination")
            .1;
        let dest = after.split(" and ").next().unwrap().trim_end_matches('.').to_string();
        let blocked = doc.nonsensical.get(noun).map(|b| b[0].clone());
        let mut u = || (failures.take(noun, &dest), Unviable);
        let plausible = if dest == "cupboard" {
            format!("The goal is that the {noun} is in the drawer and the drawer is closed.")
        } else {
            format!("The goal is that the {noun} is in the cupboard and the cupboard is closed.")
        };
        let seq: Vec<(String, ResponseCategory)> = match pattern(obj.id.as_str()) {
            Pattern::A => vec![u(), u(), u(), (preferred, SituationallyRelevant)],
            Pattern::B => vec![u(), u(), (plausible, Reasonable), (preferred, SituationallyRelevant)],
            Pattern::C => {
                let bad = format!(
                    "The goal is that the {noun} is in the {}.",
                    blocked.expect("nonsensical location listed")
                );
                let first = u();
                let third = u();
                vec![first, (bad, ViableNotReasonable), third, (preferred, SituationallyRelevant)]
            }
            Pattern::D => vec![u(), u(), u(), u()],
            Pattern::E => vec![u(), u(), (preferred, SituationallyRelevant)],
            Pattern::Golden => vec![
                ("The goal is that the mug is in the cupboard.".to_string(), Reasonable),
                (preferred, SituationallyRelevant),
            ],
        };
        for (text, label) in seq {
            script.push(text.clone());
            labels.push((obj.id.as_str().to_string(), label));
        }
    }

    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/kitchen35/corpus.ndjson");
    let tmp = std::env::temp_dir().join("kitchen35_corpus.recording");
    let _ = std::fs::remove_file(&tmp);
    let gateway = LlmGateway::new(
        Box::new(RecordBackend::new(ScriptedBackend::new(script), &tmp)),
        Arc::new(TokenLedger::new()),
    );
    let mut agent = Agent::new(
        LoopConfig::default(),
        PromptBank::bundled(),
        lexicon,
        gateway,
        Box::new(OracleOversight::new(prefs)),
    );
    let mut world = scenario.world.clone();
    let report = agent
        .run_task(&mut world, &scenario.embodiment, &task)
        .expect("scripted run completes");

    let observed: Vec<ResponseCategory> =
        report.outcomes.iter().flat_map(|o| o.categories.clone()).collect();
    let expected: Vec<ResponseCategory> = labels.iter().map(|(_, l)| *l).collect();
    assert_eq!(observed, expected, "labels disagree with the loop's categorization");
    assert_eq!(report.action_prompts, 0);

    let mut records = read_corpus(&tmp).expect("recording readable");
    assert_eq!(records.len(), labels.len());
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (rec, (object, label)) in records.iter_mut().zip(&labels) {
        let n = seen.entry(object.clone()).or_default();
        rec.kind = Some(if *n == 0 { "goal" } else { "repair" }.to_string());
        *n += 1;
        rec.object = Some(object.clone());
        rec.task = Some(task.clone());
        rec.labels = Some(vec![*label]);
    }
    write_corpus(&out, &records).expect("corpus written");
    let _ = std::fs::remove_file(&tmp);

    let t = report.tally;
    println!(
        "{} records: unviable {}, viable-not-reasonable {}, reasonable {}, situationally relevant {}",
        records.len(),
        t.unviable,
        t.viable_not_reasonable,
        t.reasonable,
        t.situationally_relevant
    );
}
