//! Resolving scenario, preference and corpus arguments. An argument is a
//! path if one exists, otherwise the name of a bundled fixture.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kextract_core::bundled;
use kextract_core::llm::{parse_corpus, CorpusRecord};
use kextract_core::memory::Lexicon;
use kextract_core::oversight::PreferenceModel;
use kextract_core::world::{load_scenario, Scenario};

pub const BUNDLED: &[&str] = &["kitchen35", "pantry", "mailroom"];

pub struct LoadedScenario {
    pub name: String,
    pub scenario: Scenario,
    pub lexicon: Lexicon,
    /// Preference text shipped alongside the scenario, if any.
    pub default_prefs: Option<String>,
    /// Labeled corpus shipped alongside the scenario, if any.
    pub default_corpus: Option<String>,
}

impl LoadedScenario {
    pub fn task(&self, explicit: Option<&str>) -> Result<String> {
        match explicit.map(str::to_string).or_else(|| self.scenario.task.clone()) {
            Some(t) => Ok(t),
            None => bail!("scenario {} names no task; pass --task", self.name),
        }
    }

    /// Preferences from `path`, or the scenario's own when `path` is `None`.
    pub fn preferences(&self, path: Option<&Path>) -> Result<Option<PreferenceModel>> {
        let text = match path {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .with_context(|| format!("reading preferences {}", p.display()))?,
            ),
            None => self.default_prefs.clone(),
        };
        text.map(|t| {
            PreferenceModel::parse(&t, &self.scenario.world, &self.lexicon)
                .context("loading preferences")
        })
        .transpose()
    }

    /// Corpus from `path`, or the scenario's own when `path` is `None`.
    pub fn corpus(&self, path: Option<&Path>) -> Result<Vec<CorpusRecord>> {
        match path {
            Some(p) => load_corpus(&p.to_string_lossy()),
            None => match &self.default_corpus {
                Some(text) => Ok(parse_corpus(text)?),
                None => bail!("scenario {} ships no corpus; pass --corpus", self.name),
            },
        }
    }
}

fn read_optional(path: PathBuf) -> Result<Option<String>> {
    if path.exists() {
        Ok(Some(std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?))
    } else {
        Ok(None)
    }
}

pub fn load_scenario_arg(arg: &str) -> Result<LoadedScenario> {
    let path = Path::new(arg);
    let (name, text, default_prefs, default_corpus) = if path.is_dir() {
        let text = std::fs::read_to_string(path.join("scenario.json"))
            .with_context(|| format!("reading {}/scenario.json", path.display()))?;
        (
            arg.to_string(),
            text,
            read_optional(path.join("prefs.json"))?,
            read_optional(path.join("corpus.ndjson"))?,
        )
    } else if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        (arg.to_string(), text, None, None)
    } else {
        let (text, prefs, corpus) = match arg {
            "kitchen35" => (
                bundled::KITCHEN35_SCENARIO,
                Some(bundled::KITCHEN35_PREFS),
                Some(bundled::KITCHEN35_CORPUS),
            ),
            "pantry" => (bundled::PANTRY_SCENARIO, Some(bundled::PANTRY_PREFS), None),
            "mailroom" => (bundled::MAILROOM_SCENARIO, None, None),
            _ => bail!(
                "no scenario file `{arg}` and no bundled scenario by that name (bundled: {})",
                BUNDLED.join(", ")
            ),
        };
        (
            arg.to_string(),
            text.to_string(),
            prefs.map(str::to_string),
            corpus.map(str::to_string),
        )
    };
    let scenario = load_scenario(&text).with_context(|| format!("loading scenario {name}"))?;
    let lexicon = Lexicon::from_scenario(&scenario).context("building lexicon")?;
    Ok(LoadedScenario {
        name,
        scenario,
        lexicon,
        default_prefs,
        default_corpus,
    })
}

pub fn load_corpus(arg: &str) -> Result<Vec<CorpusRecord>> {
    let path = Path::new(arg);
    let text = if path.exists() {
        std::fs::read_to_string(path).with_context(|| format!("reading corpus {arg}"))?
    } else if arg == "kitchen35" {
        bundled::KITCHEN35_CORPUS.to_string()
    } else {
        bail!("no corpus file `{arg}` and no bundled corpus by that name (bundled: kitchen35)");
    };
    Ok(parse_corpus(&text)?)
}

/// A script file: a JSON array of strings, or one response per line.
pub fn load_script(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading script {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).context("script is not a JSON string array");
    }
    Ok(text.lines().map(str::to_string).collect())
}
