//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use kextract_core::agent::{Agent, LoopConfig};
use kextract_core::bundled;
use kextract_core::llm::{parse_corpus, CorpusRecord, LlmGateway, ReplayBackend, TokenLedger};
use kextract_core::memory::{Lexicon, WorkingContext};
use kextract_core::oversight::{OracleOversight, PreferenceModel};
use kextract_core::prompt::PromptBank;
use kextract_core::world::Scenario;

pub struct Kitchen {
    pub scenario: Scenario,
    pub lexicon: Lexicon,
    pub prefs: PreferenceModel,
    pub corpus: Vec<CorpusRecord>,
}

impl Kitchen {
    pub fn load() -> Self {
        let scenario = bundled::kitchen35_scenario();
        let lexicon = Lexicon::from_scenario(&scenario).expect("bundled lexicon");
        let prefs = PreferenceModel::parse(bundled::KITCHEN35_PREFS, &scenario.world, &lexicon)
            .expect("bundled preferences");
        let corpus = parse_corpus(bundled::KITCHEN35_CORPUS).expect("bundled corpus");
        Self {
            scenario,
            lexicon,
            prefs,
            corpus,
        }
    }

    pub fn mug_context(&self) -> WorkingContext {
        WorkingContext::for_object("tidy kitchen", &self.scenario.world, &"mug".into())
            .expect("mug is in the scenario")
    }

    /// A fresh agent answering from the bundled corpus and preferences.
    pub fn replay_agent(&self) -> Agent {
        Agent::new(
            LoopConfig::default(),
            PromptBank::bundled(),
            self.lexicon.clone(),
            LlmGateway::new(
                Box::new(ReplayBackend::new(self.corpus.clone())),
                Arc::new(TokenLedger::new()),
            ),
            Box::new(OracleOversight::new(self.prefs.clone())),
        )
    }
}
