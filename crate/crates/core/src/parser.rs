//! Restricted-grammar interpretation of model responses.
//!
//! Goal sentences:
//!
//! ```text
//! The goal is that <clause> ( and <clause> )* [.]
//! clause := the <np> is (in|on) the <np>
//!         | the <np> is <adjective>
//! np     := <adjective>* <noun>
//! ```
//!
//! Action steps:
//!
//! ```text
//! <verb> [the <np>] [(in|on|to) the <np>] [.]
//! ```
//!
//! Matching is case-insensitive and nouns are matched greedily against the
//! lexicon so `dish rack` wins over `dish`. Text after the first `(` is
//! dropped: completions often run on into the prompt's closing markers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::memory::{Lexicon, PartOfSpeech};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NounPhrase {
    pub adjectives: Vec<String>,
    pub noun: String,
}

impl NounPhrase {
    pub fn new(noun: impl Into<String>) -> Self {
        Self {
            adjectives: Vec::new(),
            noun: noun.into(),
        }
    }

    pub fn with_adjectives(mut self, adjectives: &[&str]) -> Self {
        self.adjectives = adjectives.iter().map(|a| a.to_string()).collect();
        self
    }
}

impl fmt::Display for NounPhrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.adjectives {
            write!(f, "{a} ")?;
        }
        f.write_str(&self.noun)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    In(NounPhrase, NounPhrase),
    On(NounPhrase, NounPhrase),
    StateIs(NounPhrase, String),
}

/// A goal as interpreted from text: a conjunction of atoms over phrases.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GoalExpr {
    pub conjuncts: Vec<Atom>,
}

impl GoalExpr {
    pub fn new(conjuncts: Vec<Atom>) -> Self {
        Self { conjuncts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preposition {
    In,
    On,
    To,
}

impl Preposition {
    pub fn as_str(self) -> &'static str {
        match self {
            Preposition::In => "in",
            Preposition::On => "on",
            Preposition::To => "to",
        }
    }
}

/// One imperative step, e.g. `Put the mug in the cupboard.`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionStep {
    pub verb: String,
    pub object: Option<NounPhrase>,
    pub target: Option<(Preposition, NounPhrase)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    UnknownWord(String),
    /// Token index at which the grammar stopped matching.
    UnrecognizedStructure(usize),
    EmptyResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpretationFailure {
    pub kind: FailureKind,
    /// Byte range of the offending text within the response.
    pub span: (usize, usize),
}

impl fmt::Display for InterpretationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FailureKind::UnknownWord(w) => write!(f, "unknown word \"{w}\""),
            FailureKind::UnrecognizedStructure(p) => {
                write!(f, "unrecognized structure at word {}", p + 1)
            }
            FailureKind::EmptyResponse => f.write_str("empty response"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("an empty goal has no surface form")]
pub struct VacuousGoal;

#[derive(Debug, Clone)]
struct Token {
    text: String,
    start: usize,
    end: usize,
    word: bool,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}' || c == '-'
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        if c.is_whitespace() {
            continue;
        }
        if is_word_char(c) {
            let mut end = start + c.len_utf8();
            while let Some(&(i, n)) = iter.peek() {
                if !is_word_char(n) {
                    break;
                }
                end = i + n.len_utf8();
                iter.next();
            }
            out.push(Token {
                text: text[start..end].to_lowercase(),
                start,
                end,
                word: true,
            });
        } else {
            out.push(Token {
                text: c.to_string(),
                start,
                end: start + c.len_utf8(),
                word: false,
            });
        }
    }
    out
}

fn failure(kind: FailureKind, span: (usize, usize)) -> InterpretationFailure {
    InterpretationFailure { kind, span }
}

/// Shared front half: trim, drop run-on markers, tokenize, reject unknown
/// words (which take priority over structural problems), then reject stray
/// punctuation.
fn prepare(text: &str, lexicon: &Lexicon) -> Result<Vec<Token>, InterpretationFailure> {
    let body = match text.find('(') {
        Some(i) => &text[..i],
        None => text,
    };
    let mut tokens = tokenize(body);
    if tokens.last().is_some_and(|t| !t.word && t.text == ".") {
        tokens.pop();
    }
    if tokens.is_empty() {
        return Err(failure(FailureKind::EmptyResponse, (0, 0)));
    }
    if let Some(t) = tokens.iter().find(|t| t.word && !lexicon.knows_word(&t.text)) {
        return Err(failure(
            FailureKind::UnknownWord(t.text.clone()),
            (t.start, t.end),
        ));
    }
    if let Some((i, t)) = tokens.iter().enumerate().find(|(_, t)| !t.word) {
        return Err(failure(
            FailureKind::UnrecognizedStructure(i),
            (t.start, t.end),
        ));
    }
    Ok(tokens)
}

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
    lexicon: &'a Lexicon,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.tokens.get(self.pos).map(|t| t.text.as_str())
    }

    fn fail(&self) -> InterpretationFailure {
        let span = match self.tokens.get(self.pos) {
            Some(t) => (t.start, t.end),
            None => {
                let end = self.tokens.last().map_or(0, |t| t.end);
                (end, end)
            }
        };
        failure(FailureKind::UnrecognizedStructure(self.pos), span)
    }

    fn expect(&mut self, word: &str) -> Result<(), InterpretationFailure> {
        if self.peek() == Some(word) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.fail())
        }
    }

    fn accept(&mut self, word: &str) -> bool {
        if self.peek() == Some(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn rest(&self) -> Vec<&'a str> {
        self.tokens[self.pos..]
            .iter()
            .map(|t| t.text.as_str())
            .collect()
    }

    fn noun_phrase(&mut self) -> Result<NounPhrase, InterpretationFailure> {
        let mut adjectives = Vec::new();
        loop {
            let rest = self.rest();
            if let Some(n) = self.lexicon.longest_match(&rest, PartOfSpeech::Noun) {
                self.pos += n;
                return Ok(NounPhrase {
                    adjectives,
                    noun: rest[..n].join(" "),
                });
            }
            match rest.first() {
                Some(w) if self.lexicon.lookup(w, PartOfSpeech::Adjective) => {
                    adjectives.push(w.to_string());
                    self.pos += 1;
                }
                _ => return Err(self.fail()),
            }
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.tokens.len()
    }
}

/// Interpret a goal sentence.
pub fn parse_goal(text: &str, lexicon: &Lexicon) -> Result<GoalExpr, InterpretationFailure> {
    let tokens = prepare(text, lexicon)?;
    let mut cur = Cursor {
        tokens: &tokens,
        pos: 0,
        lexicon,
    };
    for w in ["the", "goal", "is", "that"] {
        cur.expect(w)?;
    }
    let mut conjuncts = Vec::new();
    loop {
        cur.expect("the")?;
        let subject = cur.noun_phrase()?;
        cur.expect("is")?;
        let atom = match cur.peek() {
            Some(rel @ ("in" | "on")) => {
                cur.pos += 1;
                cur.expect("the")?;
                let place = cur.noun_phrase()?;
                if rel == "in" {
                    Atom::In(subject, place)
                } else {
                    Atom::On(subject, place)
                }
            }
            Some(adj) if lexicon.lookup(adj, PartOfSpeech::Adjective) => {
                cur.pos += 1;
                Atom::StateIs(subject, adj.to_string())
            }
            _ => return Err(cur.fail()),
        };
        conjuncts.push(atom);
        if cur.at_end() {
            break;
        }
        cur.expect("and")?;
    }
    Ok(GoalExpr { conjuncts })
}

/// Interpret an imperative action step.
pub fn parse_action(text: &str, lexicon: &Lexicon) -> Result<ActionStep, InterpretationFailure> {
    let tokens = prepare(text, lexicon)?;
    let mut cur = Cursor {
        tokens: &tokens,
        pos: 0,
        lexicon,
    };
    let rest = cur.rest();
    let Some(n) = lexicon.longest_match(&rest, PartOfSpeech::Verb) else {
        return Err(cur.fail());
    };
    let verb = rest[..n].join(" ");
    cur.pos += n;

    let object = if cur.accept("the") {
        Some(cur.noun_phrase()?)
    } else {
        None
    };
    let prep = match cur.peek() {
        Some("in") => Some(Preposition::In),
        Some("on") => Some(Preposition::On),
        Some("to") => Some(Preposition::To),
        _ => None,
    };
    let target = match prep {
        Some(p) => {
            cur.pos += 1;
            cur.expect("the")?;
            Some((p, cur.noun_phrase()?))
        }
        None => None,
    };
    if !cur.at_end() || (object.is_none() && target.is_none()) {
        return Err(cur.fail());
    }
    Ok(ActionStep {
        verb,
        object,
        target,
    })
}

fn clause(atom: &Atom) -> String {
    match atom {
        Atom::In(s, p) => format!("the {s} is in the {p}"),
        Atom::On(s, p) => format!("the {s} is on the {p}"),
        Atom::StateIs(s, adj) => format!("the {s} is {adj}"),
    }
}

/// Canonical goal sentence.
pub fn render(goal: &GoalExpr) -> Result<String, VacuousGoal> {
    if goal.conjuncts.is_empty() {
        return Err(VacuousGoal);
    }
    let clauses: Vec<String> = goal.conjuncts.iter().map(clause).collect();
    Ok(format!("The goal is that {}.", clauses.join(" and ")))
}

/// Step without capital or period, as used in `steps so far` lists.
pub fn render_step_phrase(step: &ActionStep) -> String {
    let mut out = step.verb.clone();
    if let Some(o) = &step.object {
        out.push_str(&format!(" the {o}"));
    }
    if let Some((p, t)) = &step.target {
        out.push_str(&format!(" {} the {t}", p.as_str()));
    }
    out
}

/// Canonical imperative sentence, e.g. `Pick up the mug.`
pub fn render_action(step: &ActionStep) -> String {
    let phrase = render_step_phrase(step);
    let mut chars = phrase.chars();
    match chars.next() {
        Some(c) => format!("{}{}.", c.to_uppercase(), chars.as_str()),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn office_lexicon() -> Lexicon {
        let mut lex = Lexicon::new();
        for n in [
            "package", "closet", "mug", "cupboard", "dish rack", "dish", "kitchen", "laundry",
            "office",
        ] {
            lex.insert(PartOfSpeech::Noun, n);
        }
        lex.insert(PartOfSpeech::Adjective, "dirty");
        lex
    }

    #[test]
    fn package_in_closed_closet() {
        let g = parse_goal(
            "The goal is that the package is in the closet and the closet is closed.",
            &office_lexicon(),
        )
        .unwrap();
        assert_eq!(
            g.conjuncts,
            vec![
                Atom::In(NounPhrase::new("package"), NounPhrase::new("closet")),
                Atom::StateIs(NounPhrase::new("closet"), "closed".into()),
            ]
        );
    }

    #[test]
    fn unknown_word_reported_with_span() {
        let text = "The goal is that the mug is in the credenza.";
        let err = parse_goal(text, &office_lexicon()).unwrap_err();
        assert_eq!(err.kind, FailureKind::UnknownWord("credenza".into()));
        assert_eq!(&text[err.span.0..err.span.1], "credenza");
    }

    #[test]
    fn empty_and_whitespace() {
        for t in ["", "   ", ".", "(END RESULT)"] {
            assert_eq!(
                parse_goal(t, &office_lexicon()).unwrap_err().kind,
                FailureKind::EmptyResponse
            );
        }
    }

    #[test]
    fn incidentals_are_ignored() {
        let lex = office_lexicon();
        let a = parse_goal("  the GOAL is that the mug is in the cupboard  ", &lex).unwrap();
        let b = parse_goal("The goal is that the mug is in the cupboard.(END RESULT)(END TASK)", &lex)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn greedy_multiword_noun() {
        let g = parse_goal(
            "The goal is that the dirty mug is in the dish rack.",
            &office_lexicon(),
        )
        .unwrap();
        assert_eq!(
            g.conjuncts[0],
            Atom::In(
                NounPhrase::new("mug").with_adjectives(&["dirty"]),
                NounPhrase::new("dish rack")
            )
        );
    }

    #[test]
    fn unknown_word_beats_structure() {
        // both "belongs" (unknown) and the missing "goal is that" apply
        let err = parse_goal("The mug belongs in the cupboard.", &office_lexicon()).unwrap_err();
        assert_eq!(err.kind, FailureKind::UnknownWord("belongs".into()));
    }

    #[test]
    fn structure_failures() {
        let lex = office_lexicon();
        let err = parse_goal("The goal is that the mug in the cupboard.", &lex).unwrap_err();
        assert_eq!(err.kind, FailureKind::UnrecognizedStructure(6));
        let err = parse_goal("The goal is that the mug is in the cupboard, and", &lex).unwrap_err();
        assert!(matches!(err.kind, FailureKind::UnrecognizedStructure(_)));
        let err = parse_goal("Put the mug in the cupboard.", &lex).unwrap_err();
        assert_eq!(err.kind, FailureKind::UnrecognizedStructure(0));
    }

    #[test]
    fn actions() {
        let lex = office_lexicon();
        assert_eq!(
            parse_action("Pick up the mug.", &lex).unwrap(),
            ActionStep {
                verb: "pick up".into(),
                object: Some(NounPhrase::new("mug")),
                target: None
            }
        );
        assert_eq!(
            parse_action("Put the mug in the cupboard.", &lex).unwrap(),
            ActionStep {
                verb: "put".into(),
                object: Some(NounPhrase::new("mug")),
                target: Some((Preposition::In, NounPhrase::new("cupboard")))
            }
        );
        assert_eq!(
            parse_action("Go to the office", &lex).unwrap().target,
            Some((Preposition::To, NounPhrase::new("office")))
        );
        // "fold" is not in the kitchen lexicon; "laundry" is
        assert_eq!(
            parse_action("Fold the laundry.", &lex).unwrap_err().kind,
            FailureKind::UnknownWord("fold".into())
        );
        // known noun in verb position
        assert_eq!(
            parse_action("Mug the laundry.", &lex).unwrap_err().kind,
            FailureKind::UnrecognizedStructure(0)
        );
        assert!(parse_action("Open.", &lex).is_err());
    }

    #[test]
    fn render_canonical() {
        let g = GoalExpr::new(vec![Atom::In(NounPhrase::new("mug"), NounPhrase::new("cupboard"))]);
        assert_eq!(render(&g).unwrap(), "The goal is that the mug is in the cupboard.");
        assert_eq!(render(&GoalExpr::default()), Err(VacuousGoal));
    }

    #[test]
    fn render_parse_fixed_point() {
        let lex = office_lexicon();
        let text = "the GOAL is that the package is in the closet and the closet is closed";
        let once = render(&parse_goal(text, &lex).unwrap()).unwrap();
        let twice = render(&parse_goal(&once, &lex).unwrap()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn action_render_roundtrip() {
        let lex = office_lexicon();
        for t in ["Pick up the mug.", "Put the mug in the cupboard.", "Go to the office."] {
            assert_eq!(render_action(&parse_action(t, &lex).unwrap()), t);
        }
    }
}
