//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! binary exits non-zero if any check fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use kextract_core::agent::{Agent, GoalSource, LoopConfig, OutcomeStatus};
use kextract_core::bundled;
use kextract_core::eval::run_corpus;
use kextract_core::llm::{
    parse_corpus, LlmGateway, ReplayBackend, ScriptedBackend, TokenLedger,
};
use kextract_core::memory::{FocusObject, Lexicon, WorkingContext};
use kextract_core::oversight::{oracle_decide, OracleOversight, PreferenceModel, Proposal};
use kextract_core::parser::{parse_action, parse_goal, render, Atom, NounPhrase};
use kextract_core::planner::{plan, DEFAULT_DEPTH_CAP};
use kextract_core::prompt::{check_markers, instantiate, PromptBank};
use kextract_core::verify::{categorize, verify, FailureCategory, ResponseCategory, ResponseKind};
use kextract_core::world::{
    apply_action, goal_holds, load_scenario, Action, Embodiment, GroundAtom, GroundedGoal,
    Scenario, WorldState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn kitchen35() -> (Scenario, Lexicon, PreferenceModel) {
    let s = bundled::kitchen35_scenario();
    let lex = Lexicon::from_scenario(&s).unwrap();
    let prefs = PreferenceModel::parse(bundled::KITCHEN35_PREFS, &s.world, &lex).unwrap();
    (s, lex, prefs)
}

fn agent_with(
    backend: Box<dyn kextract_core::llm::Backend>,
    lex: Lexicon,
    prefs: PreferenceModel,
) -> Agent {
    Agent::new(
        LoopConfig::default(),
        PromptBank::bundled(),
        lex,
        LlmGateway::new(backend, Arc::new(TokenLedger::new())),
        Box::new(OracleOversight::new(prefs)),
    )
}

/// The expected goal prompt for the mug in the dish rack.
const EXPECTED_PROMPT: &str = "(EXAMPLES)(TASK)Task name: store object. Task context: I am in mailroom. Aware of package of office supplies; package is in mailroom.(RESULT)The goal is that the package is in the closet and the closet is closed.(END RESULT)(END TASK)(TASK)Task name: deliver package. Task context: I am in mailroom. Aware of package addressed to Gary; package is in mailroom.(RESULT)The goal is that the package is in Gary\u{2019}s office.(END RESULT)(END TASK)(END EXAMPLES)(TASK)Task name: tidy kitchen. Task context: I am in kitchen. Aware of mug in dish rack.(RESULT)";

fn golden_prompt() -> Check {
    let ctx = WorkingContext {
        task_name: "tidy kitchen".into(),
        agent_room: "kitchen".into(),
        focus_object: Some(FocusObject {
            id: "mug".into(),
            noun: "mug".into(),
            adjectives: vec![],
        }),
        focus_containment: "in dish rack".into(),
        steps_so_far: vec![],
    };
    let bank = PromptBank::bundled();
    let p = instantiate(&bank.goal, &ctx, Default::default()).map_err(|e| e.to_string())?;
    ensure(bundled::GOLDEN_PROMPT == EXPECTED_PROMPT, "bundled golden file differs from expected text")?;
    ensure(p.text == bundled::GOLDEN_PROMPT, "instantiated prompt differs from golden")?;
    check_markers(&p.text).map_err(|e| e.to_string())?;
    ensure(!p.text.contains('\n'), "prompt has a line break")?;
    Ok(format!("{} bytes identical", p.text.len()))
}

fn parser_fidelity() -> Check {
    let s = bundled::mailroom_scenario();
    let lex = Lexicon::from_scenario(&s).unwrap();
    let text = "The goal is that the package is in the closet and the closet is closed.";
    let g = parse_goal(text, &lex).map_err(|e| e.to_string())?;
    let want = vec![
        Atom::In(NounPhrase::new("package"), NounPhrase::new("closet")),
        Atom::StateIs(NounPhrase::new("closet"), "closed".into()),
    ];
    ensure(g.conjuncts == want, format!("parsed {:?}", g.conjuncts))?;
    let rendered = render(&g).map_err(|e| e.to_string())?;
    ensure(rendered == text, "render is not the source sentence")?;
    ensure(parse_goal(&rendered, &lex).as_ref() == Ok(&g), "render/parse not a fixed point")?;

    let (_, klex, _) = kitchen35();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut faults = 0;
    for _ in 0..10_000 {
        let len = rng.gen_range(0..64);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let input = String::from_utf8_lossy(&bytes).into_owned();
        let ok = catch_unwind(AssertUnwindSafe(|| {
            let _ = parse_goal(&input, &klex);
            let _ = parse_action(&input, &klex);
        }));
        faults += usize::from(ok.is_err());
    }
    ensure(faults == 0, format!("{faults} fuzz faults"))?;
    Ok("2 conjuncts, fixed point, 10000 fuzz inputs, 0 faults".into())
}

fn verification_matrix() -> Check {
    let s = load_scenario(
        r#"{
      "rooms": [{"id": "kitchen", "name": "kitchen"}],
      "receptacles": [
        {"id": "rack", "name": "dish rack", "in_room": "kitchen", "openable": false, "open": true},
        {"id": "cupboard", "name": "cupboard", "in_room": "kitchen", "openable": true, "open": false}
      ],
      "objects": [
        {"id": "mug_red", "name": "mug", "noun": "mug", "adjectives": ["red"], "in": "rack"},
        {"id": "mug_blue", "name": "mug", "noun": "mug", "adjectives": ["blue"], "in": "rack"},
        {"id": "plate", "name": "plate", "noun": "plate", "in": "rack"}
      ],
      "agent": {"in": "kitchen"},
      "embodiment": {},
      "vocabulary": {"nouns": ["pantry"]}
    }"#,
    )
    .unwrap();
    let lex = Lexicon::from_scenario(&s).unwrap();
    // (kind, response, failing stage, expected issue); Unaffordable matches any reason
    let unaff = FailureCategory::Unaffordable(String::new());
    let cases: Vec<(ResponseKind, &str, Option<usize>, Option<FailureCategory>)> = vec![
        (ResponseKind::Goal, "The goal is that the plate is in the credenza.", Some(0), Some(FailureCategory::UnknownWord("credenza".into()))),
        (ResponseKind::Goal, "The plate is in the cupboard.", Some(0), Some(FailureCategory::UnrecognizedStructure(1))),
        (ResponseKind::Goal, "The goal is that the plate is in the pantry.", Some(1), Some(FailureCategory::Ungroundable("pantry".into()))),
        (ResponseKind::Goal, "The goal is that the mug is in the cupboard.", Some(1), Some(FailureCategory::Ambiguous("mug".into()))),
        (ResponseKind::Goal, "The goal is that the plate is on the cupboard.", Some(2), Some(unaff.clone())),
        (ResponseKind::Goal, "The goal is that the plate is in the cupboard and the cupboard is closed.", None, None),
        (ResponseKind::Action, "Pick up the credenza.", Some(0), Some(FailureCategory::UnknownWord("credenza".into()))),
        (ResponseKind::Action, "The plate.", Some(0), Some(FailureCategory::UnrecognizedStructure(0))),
        (ResponseKind::Action, "Put the plate in the pantry.", Some(1), Some(FailureCategory::Ungroundable("pantry".into()))),
        (ResponseKind::Action, "Pick up the mug.", Some(1), Some(FailureCategory::Ambiguous("mug".into()))),
        (ResponseKind::Action, "Put the plate in the cupboard.", Some(2), Some(unaff.clone())),
        (ResponseKind::Action, "Pick up the plate.", None, None),
    ];
    for (kind, text, stage, issue) in &cases {
        let r = verify(text, *kind, &s.world, &s.embodiment, &lex, DEFAULT_DEPTH_CAP);
        ensure(r.failed_stage() == *stage, format!("{text}: stage {:?}", r.failed_stage()))?;
        // early exit: nothing after the failing stage was evaluated
        let shape_ok = match stage {
            Some(0) => r.grounded.is_none() && r.affordable.is_none(),
            Some(1) => r.interpretable.is_ok() && r.affordable.is_none(),
            Some(_) => r.interpretable.is_ok() && matches!(r.grounded, Some(Ok(_))),
            None => r.viable && matches!(r.affordable, Some(Ok(_))),
        };
        ensure(shape_ok, format!("{text}: report shape"))?;
        let issue_ok = match (issue, &r.repair_issue) {
            (Some(FailureCategory::Unaffordable(_)), Some(FailureCategory::Unaffordable(_))) => true,
            (a, b) => a.as_ref() == b.as_ref(),
        };
        ensure(issue_ok, format!("{text}: issue {:?}", r.repair_issue))?;
    }
    Ok(format!("{} cases", cases.len()))
}

fn category_distribution() -> Check {
    let started = Instant::now();
    let (s, lex, prefs) = kitchen35();
    let corpus = parse_corpus(bundled::KITCHEN35_CORPUS).map_err(|e| e.to_string())?;
    ensure(corpus.len() >= 40, format!("only {} records", corpus.len()))?;
    let r = run_corpus(&corpus, &s.world, &s.embodiment, &lex, &prefs, DEFAULT_DEPTH_CAP)
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    // headline straight from the hand labels
    let labels: Vec<ResponseCategory> =
        corpus.iter().flat_map(|c| c.labels.clone().unwrap()).collect();
    let unviable_labels = labels.iter().filter(|l| **l == ResponseCategory::Unviable).count();
    let label_share = 100.0 * unviable_labels as f64 / labels.len() as f64;
    ensure(r.viability_agreement == r.responses, format!("agreement {}/{}", r.viability_agreement, r.responses))?;
    ensure(r.unviable_share > 70.0, format!("unviable share {}", r.unviable_share))?;
    ensure((r.unviable_share - label_share).abs() <= 0.05, "headline differs from labels")?;
    let sum: f64 = r.percentages.iter().sum();
    ensure((sum - 100.0).abs() <= 0.1, format!("percentages sum {sum}"))?;
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} records, agreement {}/{}, unviable {:.1}%, {:?}",
        corpus.len(),
        r.viability_agreement,
        r.responses,
        r.unviable_share,
        elapsed
    ))
}

fn repair_efficacy() -> Check {
    let (s, lex, prefs) = kitchen35();
    let failed = "The goal is that the mug is in the credenza.";
    let good = prefs.document().preferences["mug"].clone();
    let mut agent = agent_with(
        Box::new(ScriptedBackend::new([failed.to_string(), good])),
        lex,
        prefs,
    );
    let mut w = s.world.clone();
    let out = agent
        .learn_object(&mut w, &s.embodiment, "tidy kitchen", &"mug".into())
        .map_err(|e| e.to_string())?;
    let calls = agent.gateway.ledger().snapshot().calls;
    ensure(calls == 2, format!("{calls} calls"))?;
    ensure(out.repairs == 1, format!("{} repairs", out.repairs))?;
    ensure(out.status == OutcomeStatus::Achieved && out.rule.is_some(), "not learned")?;
    let ep = &agent.episodes.records()[0];
    let repairs: Vec<_> = ep.prompts.iter().filter(|p| p.kind == "repair").collect();
    ensure(repairs.len() == 1, "expected one repair prompt")?;
    ensure(repairs[0].text.contains(failed), "repair prompt lacks failed response")?;
    ensure(
        repairs[0].text.contains("the word \"credenza\" is unknown"),
        "repair prompt lacks issue",
    )?;
    Ok("2 calls, 1 repair, rule compiled".into())
}

fn run_kitchen35(agent: &mut Agent, s: &Scenario) -> Result<(WorldState, kextract_core::agent::TaskReport), String> {
    let mut w = s.world.clone();
    let report = agent
        .run_task(&mut w, &s.embodiment, "tidy kitchen")
        .map_err(|e| e.to_string())?;
    Ok((w, report))
}

fn planning_and_chunking() -> (Check, Check) {
    let started = Instant::now();
    let (s, lex, prefs) = kitchen35();
    let corpus = parse_corpus(bundled::KITCHEN35_CORPUS).unwrap();
    let mut agent = agent_with(Box::new(ReplayBackend::new(corpus)), lex, prefs);
    let first = run_kitchen35(&mut agent, &s);
    let elapsed = started.elapsed();
    let planning = (|| {
        let (w, report) = first.as_ref().map_err(Clone::clone)?;
        ensure(report.objects_processed == 35, format!("{} objects", report.objects_processed))?;
        ensure(
            report.outcomes.iter().all(|o| o.status == OutcomeStatus::Achieved),
            "not every object achieved",
        )?;
        let action_prompts = agent
            .episodes
            .records()
            .iter()
            .flat_map(|e| &e.prompts)
            .filter(|p| p.kind == "action")
            .count();
        ensure(action_prompts == 0, format!("{action_prompts} action prompts"))?;
        ensure(report.action_prompts == 0, "report counts action prompts")?;
        ensure(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
        let _ = w;
        Ok(format!(
            "35 objects, {} llm calls, 0 action prompts, {:?}",
            report.llm_calls, elapsed
        ))
    })();
    let chunking = (|| {
        let (w1, _) = first.as_ref().map_err(Clone::clone)?;
        let before = agent.gateway.ledger().snapshot().calls;
        let (w2, report) = run_kitchen35(&mut agent, &s)?;
        let after = agent.gateway.ledger().snapshot().calls;
        ensure(after == before && report.llm_calls == 0, format!("{} new calls", after - before))?;
        ensure(
            report.outcomes.iter().all(|o| o.source == Some(GoalSource::Rule)),
            "some goal not from a rule",
        )?;
        ensure(w1.digest() == w2.digest(), "final states differ")?;
        Ok(format!("{} rules, 0 calls, digests equal", agent.rules.len()))
    })();
    (planning, chunking)
}

/// Every action over every entity, legal or not.
fn all_actions(w: &WorldState) -> Vec<Action> {
    let mut out = Vec::new();
    for l in w.locations.values() {
        out.push(Action::Open(l.id.clone()));
        out.push(Action::Close(l.id.clone()));
        out.push(Action::MoveTo(l.id.clone()));
        for o in w.objects.keys() {
            out.push(Action::PutIn(o.clone(), l.id.clone()));
            out.push(Action::PutOn(o.clone(), l.id.clone()));
        }
    }
    for o in w.objects.keys() {
        out.push(Action::PickUp(o.clone()));
    }
    out
}

fn dls(w: &WorldState, emb: &Embodiment, goal: &GroundedGoal, depth: usize) -> bool {
    if goal_holds(w, goal) {
        return true;
    }
    if depth == 0 {
        return false;
    }
    all_actions(w).iter().any(|a| match apply_action(w, emb, a) {
        Ok(next) => dls(&next, emb, goal, depth - 1),
        Err(_) => false,
    })
}

/// Shortest plan length by iterative deepening over the unprojected world.
fn iddfs_len(w: &WorldState, emb: &Embodiment, goal: &GroundedGoal, cap: usize) -> Option<usize> {
    (0..=cap).find(|&d| dls(w, emb, goal, d))
}

fn planner_optimality() -> Check {
    let small_kitchen = load_scenario(
        r#"{
      "rooms": [{"id": "kitchen", "name": "kitchen"}],
      "receptacles": [
        {"id": "rack", "name": "dish rack", "in_room": "kitchen", "openable": false, "open": true},
        {"id": "cupboard", "name": "cupboard", "in_room": "kitchen", "openable": true, "open": false},
        {"id": "drawer", "name": "drawer", "in_room": "kitchen", "openable": true, "open": true}
      ],
      "objects": [
        {"id": "mug", "name": "mug", "noun": "mug", "in": "rack"},
        {"id": "fork", "name": "fork", "noun": "fork", "in": "drawer"}
      ],
      "agent": {"in": "kitchen"},
      "embodiment": {}
    }"#,
    )
    .map_err(|e| e.to_string())?;
    let fixtures = [bundled::pantry_scenario(), bundled::mailroom_scenario(), small_kitchen];
    let mut compared = 0;
    for s in &fixtures {
        let w = &s.world;
        ensure(w.locations.len() + w.objects.len() <= 6, "fixture too large")?;
        let mut goals = Vec::new();
        for o in w.objects.keys() {
            for l in w.locations.values() {
                goals.push(GroundedGoal::new(vec![GroundAtom::In(o.clone(), l.id.clone())]));
                if l.openable {
                    goals.push(GroundedGoal::new(vec![
                        GroundAtom::In(o.clone(), l.id.clone()),
                        GroundAtom::LocState(l.id.clone(), "closed".into()),
                    ]));
                }
                if l.surface {
                    goals.push(GroundedGoal::new(vec![GroundAtom::On(o.clone(), l.id.clone())]));
                }
            }
        }
        for goal in &goals {
            let oracle = iddfs_len(w, &s.embodiment, goal, 6);
            let planned = plan(w, &s.embodiment, goal, DEFAULT_DEPTH_CAP).map(|p| p.len());
            let agree = match oracle {
                Some(n) => planned == Some(n),
                None => planned.is_none_or(|n| n > 6),
            };
            ensure(agree, format!("{goal}: planner {planned:?}, oracle {oracle:?}"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} goals on {} fixtures", fixtures.len()))
}

fn beans_triple() -> Check {
    let s = bundled::pantry_scenario();
    let lex = Lexicon::from_scenario(&s).unwrap();
    let prefs = PreferenceModel::parse(bundled::PANTRY_PREFS, &s.world, &lex).unwrap();
    let cases = [
        ("pantry", ResponseCategory::SituationallyRelevant),
        ("cupboard", ResponseCategory::Reasonable),
        ("sink", ResponseCategory::ViableNotReasonable),
    ];
    for (place, want) in cases {
        let text = format!("The goal is that the beans is in the {place}.");
        let r = verify(&text, ResponseKind::Goal, &s.world, &s.embodiment, &lex, DEFAULT_DEPTH_CAP);
        ensure(r.viable, format!("{place} not viable"))?;
        let p = Proposal::review("stock pantry", "beans".into(), "beans", "", &r).map_err(|e| e.to_string())?;
        let d = oracle_decide(&p, &prefs).map_err(|e| e.to_string())?;
        let got = categorize(&r, Some(&d)).map_err(|e| e.to_string())?;
        ensure(got == want, format!("{place}: {got}"))?;
    }
    Ok("pantry/cupboard/sink as expected".into())
}

fn main() -> ExitCode {
    let (planning, chunking) = planning_and_chunking();
    let results: Vec<(&str, Check)> = vec![
        ("golden prompt reproduction", golden_prompt()),
        ("parser fidelity", parser_fidelity()),
        ("verification pipeline ordering", verification_matrix()),
        ("response categorization on labeled corpus", category_distribution()),
        ("repair efficacy", repair_efficacy()),
        ("planning eliminates action prompts", planning),
        ("chunking reuse", chunking),
        ("planner optimality", planner_optimality()),
        ("oversight categorization", beans_triple()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} acceptance checks passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
