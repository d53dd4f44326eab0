use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::world::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartOfSpeech {
    Noun,
    Verb,
    Adjective,
}

/// Closed-class words the grammar itself uses.
pub const STRUCTURE_WORDS: &[&str] = &["the", "a", "an", "goal", "is", "that", "and", "in", "on", "to"];

/// Verbs every agent understands.
pub const BASE_VERBS: &[&str] = &["pick up", "put", "place", "open", "close", "move", "go"];

/// Adjectives describing receptacle state.
pub const STATE_ADJECTIVES: &[&str] = &["open", "closed"];

/// Tokens allowed to appear under more than one part of speech.
pub const SHARED_TOKENS: &[&str] = &["open"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{word}` is both a {first:?} and a {second:?}")]
pub struct LexiconConflict {
    pub word: String,
    pub first: PartOfSpeech,
    pub second: PartOfSpeech,
}

/// The agent's linguistic knowledge. Entries are lowercase and may span
/// several words (`dish rack`, `pick up`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    nouns: BTreeSet<String>,
    verbs: BTreeSet<String>,
    adjectives: BTreeSet<String>,
}

fn normalize(word: &str) -> String {
    word.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Lexicon {
    /// Base verbs and state adjectives, no nouns.
    pub fn new() -> Self {
        let mut lex = Self::default();
        for v in BASE_VERBS {
            lex.verbs.insert(v.to_string());
        }
        for a in STATE_ADJECTIVES {
            lex.adjectives.insert(a.to_string());
        }
        lex
    }

    /// Seeded from every entity name in the scenario plus its vocabulary.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, LexiconConflict> {
        let mut lex = Self::new();
        for loc in scenario.world.locations.values() {
            lex.insert(PartOfSpeech::Noun, &loc.name);
        }
        for obj in scenario.world.objects.values() {
            lex.insert(PartOfSpeech::Noun, &obj.noun);
            for a in &obj.adjectives {
                lex.insert(PartOfSpeech::Adjective, a);
            }
        }
        let v = &scenario.vocabulary;
        for n in &v.nouns {
            lex.insert(PartOfSpeech::Noun, n);
        }
        for a in &v.adjectives {
            lex.insert(PartOfSpeech::Adjective, a);
        }
        for verb in &v.verbs {
            lex.insert(PartOfSpeech::Verb, verb);
        }
        lex.check_disjoint()?;
        Ok(lex)
    }

    pub fn insert(&mut self, pos: PartOfSpeech, word: &str) {
        let word = normalize(word);
        if word.is_empty() {
            return;
        }
        self.set_mut(pos).insert(word);
    }

    fn set(&self, pos: PartOfSpeech) -> &BTreeSet<String> {
        match pos {
            PartOfSpeech::Noun => &self.nouns,
            PartOfSpeech::Verb => &self.verbs,
            PartOfSpeech::Adjective => &self.adjectives,
        }
    }

    fn set_mut(&mut self, pos: PartOfSpeech) -> &mut BTreeSet<String> {
        match pos {
            PartOfSpeech::Noun => &mut self.nouns,
            PartOfSpeech::Verb => &mut self.verbs,
            PartOfSpeech::Adjective => &mut self.adjectives,
        }
    }

    /// Case-insensitive membership.
    pub fn lookup(&self, token: &str, pos: PartOfSpeech) -> bool {
        let t = normalize(token);
        !t.is_empty() && self.set(pos).contains(&t)
    }

    /// True if the single word appears in the grammar or in any entry.
    pub fn knows_word(&self, word: &str) -> bool {
        let w = word.to_lowercase();
        if w.is_empty() {
            return false;
        }
        STRUCTURE_WORDS.contains(&w.as_str())
            || [&self.nouns, &self.verbs, &self.adjectives]
                .iter()
                .any(|set| set.iter().any(|e| e.split(' ').any(|part| part == w)))
    }

    pub fn entries(&self, pos: PartOfSpeech) -> impl Iterator<Item = &str> {
        self.set(pos).iter().map(String::as_str)
    }

    /// Longest entry of `pos` matching a prefix of `words`, as a word count.
    pub fn longest_match(&self, words: &[&str], pos: PartOfSpeech) -> Option<usize> {
        let set = self.set(pos);
        let max = set.iter().map(|e| e.split(' ').count()).max().unwrap_or(0);
        (1..=max.min(words.len()))
            .rev()
            .find(|&n| set.contains(&words[..n].join(" ")))
    }

    pub fn check_disjoint(&self) -> Result<(), LexiconConflict> {
        let sets = [
            (PartOfSpeech::Noun, &self.nouns),
            (PartOfSpeech::Verb, &self.verbs),
            (PartOfSpeech::Adjective, &self.adjectives),
        ];
        for (i, (p1, s1)) in sets.iter().enumerate() {
            for (p2, s2) in &sets[i + 1..] {
                if let Some(w) = s1
                    .intersection(s2)
                    .find(|w| !SHARED_TOKENS.contains(&w.as_str()))
                {
                    return Err(LexiconConflict {
                        word: w.clone(),
                        first: *p1,
                        second: *p2,
                    });
                }
            }
        }
        Ok(())
    }
}
