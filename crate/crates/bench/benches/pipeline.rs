use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kextract_bench::Kitchen;
use kextract_core::bundled;
use kextract_core::eval::run_corpus;
use kextract_core::llm::GenerationParams;
use kextract_core::parser::parse_goal;
use kextract_core::planner::{plan, DEFAULT_DEPTH_CAP};
use kextract_core::prompt::{instantiate, PromptBank};
use kextract_core::verify::{verify, ResponseKind};
use kextract_core::world::{GroundAtom, GroundedGoal};

const MUG_GOAL: &str = "The goal is that the mug is in the cupboard and the cupboard is closed.";

fn prompting(c: &mut Criterion) {
    let k = Kitchen::load();
    let bank = PromptBank::bundled();
    let ctx = k.mug_context();
    c.bench_function("instantiate goal prompt", |b| {
        b.iter(|| instantiate(&bank.goal, black_box(&ctx), GenerationParams::default()).unwrap())
    });
}

fn interpretation(c: &mut Criterion) {
    let k = Kitchen::load();
    c.bench_function("parse goal", |b| {
        b.iter(|| parse_goal(black_box(MUG_GOAL), &k.lexicon).unwrap())
    });
    c.bench_function("verify goal", |b| {
        b.iter(|| {
            verify(
                black_box(MUG_GOAL),
                ResponseKind::Goal,
                &k.scenario.world,
                &k.scenario.embodiment,
                &k.lexicon,
                DEFAULT_DEPTH_CAP,
            )
        })
    });
}

fn planning(c: &mut Criterion) {
    let k = Kitchen::load();
    let mug = GroundedGoal::new(vec![
        GroundAtom::In("mug".into(), "cupboard".into()),
        GroundAtom::LocState("cupboard".into(), "closed".into()),
    ]);
    c.bench_function("plan kitchen35 mug", |b| {
        b.iter(|| plan(&k.scenario.world, &k.scenario.embodiment, black_box(&mug), DEFAULT_DEPTH_CAP).unwrap())
    });
    let mail = bundled::mailroom_scenario();
    let letter = GroundedGoal::new(vec![GroundAtom::On("letter".into(), "desk".into())]);
    c.bench_function("plan mailroom letter", |b| {
        b.iter(|| plan(&mail.world, &mail.embodiment, black_box(&letter), DEFAULT_DEPTH_CAP).unwrap())
    });
}

fn evaluation(c: &mut Criterion) {
    let k = Kitchen::load();
    c.bench_function("run_corpus kitchen35", |b| {
        b.iter(|| {
            run_corpus(
                black_box(&k.corpus),
                &k.scenario.world,
                &k.scenario.embodiment,
                &k.lexicon,
                &k.prefs,
                DEFAULT_DEPTH_CAP,
            )
            .unwrap()
        })
    });
    let mut group = c.benchmark_group("agent");
    group.sample_size(10);
    group.bench_function("kitchen35 replay run", |b| {
        b.iter(|| {
            let mut agent = k.replay_agent();
            let mut world = k.scenario.world.clone();
            agent.run_task(&mut world, &k.scenario.embodiment, "tidy kitchen").unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, prompting, interpretation, planning, evaluation);
criterion_main!(benches);
