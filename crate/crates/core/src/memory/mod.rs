//! Lexicon, working context, compiled rules and the episode log.

mod context;
mod episodes;
mod lexicon;
mod rules;

pub use context::{FocusObject, WorkingContext};
pub use episodes::{
    EpisodeError, EpisodeId, EpisodeLog, EpisodeRecord, PromptRecord, ResponseRecord,
    EPISODE_SCHEMA_VERSION,
};
pub use lexicon::{
    Lexicon, LexiconConflict, PartOfSpeech, BASE_VERBS, SHARED_TOKENS, STATE_ADJECTIVES,
    STRUCTURE_WORDS,
};
pub use rules::{match_rules, ProceduralRule, RuleConditions, RuleId, RuleStore, TemplateAtom};
