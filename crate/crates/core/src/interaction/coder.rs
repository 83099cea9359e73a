use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use crate::model::CommCode;

#[derive(Debug, thiserror::Error)]
pub enum CoderError {
    #[error("utterance text is empty")]
    EmptyText,
    #[error("external coder returned {0:?}, not a code name")]
    BadReply(String),
    #[error("external coder: {0}")]
    Io(#[from] std::io::Error),
}

/// Text in, one of six codes out.
pub trait UtteranceCoder: Send + Sync {
    fn code(&self, text: &str) -> Result<CommCode, CoderError>;
}

const ESCALATION: &[&str] = &["met", "rapid response", "call the doctor", "emergency"];
const HANDOVER: &[&str] = &["handover", "isbar", "situation is", "background is"];
const TASK_ALLOCATION: &[&str] = &["can you", "could you", "you do", "take the", "go and"];
const INTERROGATIVES: &[&str] = &[
    "what", "where", "when", "who", "whom", "whose", "why", "which", "how", "is", "are", "am",
    "was", "were", "do", "does", "did", "can", "could", "will", "would", "should", "shall",
    "may", "might", "have", "has", "had",
];
const ACKNOWLEDGEMENTS: &[&str] = &["ok", "okay", "got it", "yes", "yep", "sure", "thanks"];

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn contains_phrase(toks: &[String], phrase: &str) -> bool {
    let words: Vec<&str> = phrase.split(' ').collect();
    toks.windows(words.len())
        .any(|w| w.iter().zip(&words).all(|(a, b)| a == b))
}

fn starts_with_phrase(toks: &[String], phrase: &str) -> bool {
    let words: Vec<&str> = phrase.split(' ').collect();
    toks.len() >= words.len() && toks.iter().zip(&words).all(|(a, b)| a == b)
}

/// Ordered first-match rule table. Phrases match on word boundaries,
/// ignoring case.
pub fn code_utterance(text: &str) -> Result<CommCode, CoderError> {
    let toks = tokens(text);
    if toks.is_empty() {
        return Err(CoderError::EmptyText);
    }
    let any = |lexicon: &[&str]| lexicon.iter().any(|p| contains_phrase(&toks, p));
    let code = if any(ESCALATION) {
        CommCode::Escalation
    } else if any(HANDOVER) {
        CommCode::Handover
    } else if any(TASK_ALLOCATION) {
        CommCode::TaskAllocation
    } else if text.trim_end().ends_with('?') || INTERROGATIVES.contains(&toks[0].as_str()) {
        CommCode::Questioning
    } else if ACKNOWLEDGEMENTS.iter().any(|p| starts_with_phrase(&toks, p)) {
        CommCode::Acknowledging
    } else {
        CommCode::SharingInformation
    };
    Ok(code)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleCoder;

impl UtteranceCoder for RuleCoder {
    fn code(&self, text: &str) -> Result<CommCode, CoderError> {
        code_utterance(text)
    }
}

/// Line protocol with a child process: one utterance per line on its stdin,
/// one code name per line back on its stdout.
pub struct ExternalCoder {
    child: Mutex<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl ExternalCoder {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, CoderError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalCoder {
            child: Mutex::new((child, stdin, stdout)),
        })
    }
}

impl UtteranceCoder for ExternalCoder {
    fn code(&self, text: &str) -> Result<CommCode, CoderError> {
        if text.trim().is_empty() {
            return Err(CoderError::EmptyText);
        }
        let mut guard = self.child.lock().unwrap_or_else(|e| e.into_inner());
        let (_, stdin, stdout) = &mut *guard;
        writeln!(stdin, "{}", text.replace(['\n', '\r'], " "))?;
        stdin.flush()?;
        let mut line = String::new();
        if stdout.read_line(&mut line)? == 0 {
            return Err(CoderError::BadReply(String::new()));
        }
        let reply = line.trim();
        reply
            .parse()
            .map_err(|_| CoderError::BadReply(reply.to_owned()))
    }
}

impl Drop for ExternalCoder {
    fn drop(&mut self) {
        let guard = self.child.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = guard.0.kill();
        let _ = guard.0.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CommCode::*;

    #[test]
    fn table_examples() {
        assert_eq!(code_utterance("I'm calling a MET.").unwrap(), Escalation);
        assert_eq!(
            code_utterance("Can you do a set of obs on bed two?").unwrap(),
            TaskAllocation
        );
        assert_eq!(code_utterance("Okay.").unwrap(), Acknowledging);
    }

    #[test]
    fn rule_order() {
        assert_eq!(code_utterance("ISBAR handover for the doctor").unwrap(), Handover);
        assert_eq!(code_utterance("Handover: call the doctor now").unwrap(), Escalation);
        assert_eq!(code_utterance("What is her blood pressure").unwrap(), Questioning);
        assert_eq!(code_utterance("her pressure is low?").unwrap(), Questioning);
        assert_eq!(code_utterance("Yep, on it").unwrap(), Acknowledging);
        assert_eq!(code_utterance("Got it.").unwrap(), Acknowledging);
        assert_eq!(code_utterance("Sats are 88 percent").unwrap(), SharingInformation);
    }

    #[test]
    fn whole_words_only() {
        assert_eq!(code_utterance("something metallic here").unwrap(), SharingInformation);
        assert_eq!(code_utterance("okayish").unwrap(), SharingInformation);
    }

    #[test]
    fn empty_text() {
        assert!(matches!(code_utterance("   "), Err(CoderError::EmptyText)));
        assert!(matches!(code_utterance("?!."), Err(CoderError::EmptyText)));
    }

    #[cfg(unix)]
    #[test]
    fn external_coder_round_trip() {
        let coder = ExternalCoder::spawn(
            "sh",
            &["-c".into(), "while read l; do echo HANDOVER; done".into()],
        )
        .unwrap();
        assert_eq!(coder.code("anything").unwrap(), Handover);
        assert_eq!(coder.code("again").unwrap(), Handover);
        let bad = ExternalCoder::spawn("sh", &["-c".into(), "read l; echo nope".into()]).unwrap();
        assert!(matches!(bad.code("x"), Err(CoderError::BadReply(r)) if r == "nope"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn total_on_nonblank_text(text in "[a-zA-Z ?.,']{1,60}") {
                let has_word = text.chars().any(|c| c.is_alphanumeric());
                prop_assert_eq!(code_utterance(&text).is_ok(), has_word);
            }

            #[test]
            fn order_independent(corpus in proptest::collection::vec("[a-z ?]{1,30}", 1..20)) {
                let forward: Vec<_> = corpus.iter().map(|t| code_utterance(t).ok()).collect();
                let mut backward: Vec<_> = corpus.iter().rev().map(|t| code_utterance(t).ok()).collect();
                backward.reverse();
                prop_assert_eq!(forward, backward);
            }
        }
    }
}
