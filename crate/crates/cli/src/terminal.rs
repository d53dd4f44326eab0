//! Oversight by a person at the terminal.

use std::io::{BufRead, Write};

use kextract_core::memory::Lexicon;
use kextract_core::oversight::{
    Decision, OversightChannel, OversightError, Proposal, ProposalKind, RejectReason,
};
use kextract_core::parser::parse_goal;

pub struct TerminalOversight<R, W> {
    input: R,
    output: W,
    lexicon: Lexicon,
}

impl<R: BufRead, W: Write> TerminalOversight<R, W> {
    pub fn new(input: R, output: W, lexicon: Lexicon) -> Self {
        Self {
            input,
            output,
            lexicon,
        }
    }

    fn say(&mut self, text: &str) -> Result<(), OversightError> {
        write!(self.output, "{text}")
            .and_then(|_| self.output.flush())
            .map_err(|e| OversightError::Closed(e.to_string()))
    }

    fn read_line(&mut self) -> Result<String, OversightError> {
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) => Err(OversightError::Closed("end of input".into())),
            Ok(_) => Ok(line.trim().to_string()),
            Err(e) => Err(OversightError::Closed(e.to_string())),
        }
    }

    fn modify(&mut self, sentence: &str) -> Result<Option<Decision>, OversightError> {
        match parse_goal(sentence, &self.lexicon) {
            Ok(goal) => Ok(Some(Decision::Modify { goal })),
            Err(e) => {
                self.say(&format!("  cannot use that goal: {e}\n"))?;
                Ok(None)
            }
        }
    }
}

fn check_line(p: &Proposal) -> String {
    let Some(prov) = &p.provenance else {
        return String::new();
    };
    let r = &prov.report;
    let mark = |ok: Option<bool>| match ok {
        Some(true) => "ok",
        Some(false) => "failed",
        None => "not checked",
    };
    format!(
        "  checks: interpretable {}, groundable {}, affordable {}\n",
        mark(Some(r.interpretable.is_ok())),
        mark(r.grounded.as_ref().map(Result::is_ok)),
        mark(r.affordable.as_ref().map(Result::is_ok)),
    )
}

impl<R: BufRead, W: Write> OversightChannel for TerminalOversight<R, W> {
    fn consult(&mut self, proposal: Proposal) -> Result<Decision, OversightError> {
        match proposal.kind {
            ProposalKind::GoalRequest => {
                self.say(&format!(
                    "\nNo usable goal for the {} in task \"{}\".\n",
                    proposal.noun, proposal.task
                ))?;
                loop {
                    self.say("goal sentence> ")?;
                    let line = self.read_line()?;
                    if let Some(d) = self.modify(&line)? {
                        return Ok(d);
                    }
                }
            }
            ProposalKind::Review => {
                let response = proposal
                    .provenance
                    .as_ref()
                    .map(|p| p.response.clone())
                    .unwrap_or_default();
                self.say(&format!(
                    "\nProposed goal for the {} (task \"{}\"):\n  {}\n  response: {}\n{}",
                    proposal.noun,
                    proposal.task,
                    proposal.sentence,
                    response,
                    check_line(&proposal)
                ))?;
                loop {
                    self.say("[a]ccept, [w]rong preference, [n]onsensical, [m]odify <sentence>> ")?;
                    let line = self.read_line()?;
                    let (cmd, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
                    match cmd {
                        "a" | "accept" => return Ok(Decision::Accept),
                        "w" | "wrong" => return Ok(Decision::reject(RejectReason::WrongPreference)),
                        "n" | "nonsensical" => {
                            return Ok(Decision::reject(RejectReason::Nonsensical))
                        }
                        "m" | "modify" => {
                            if let Some(d) = self.modify(rest.trim())? {
                                return Ok(d);
                            }
                        }
                        _ => self.say("  unrecognized choice\n")?,
                    }
                }
            }
        }
    }
}
