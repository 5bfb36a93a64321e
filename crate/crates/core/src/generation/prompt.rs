// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

pub const INSTRUCTION: &str =
    "Answer only using the provided context. If the context is insufficient, output 'NONE'.";

/// The user turn: context block, then question.
pub fn user_message(question: &str, context: &str) -> String {
    format!("Context:\n{context}\n\nQuestion: {question}\nAnswer:")
}

/// Full single-string prompt: instruction, context block, question.
pub fn render_prompt(question: &str, context: &str) -> Result<String> {
    if question.trim().is_empty() {
        return Err(Error::domain("question is empty"));
    }
    Ok(format!(
        "{INSTRUCTION}\n\n{}",
        user_message(question, context)
    ))
}

/// True when `text` is an abstention: "none" after trimming whitespace and
/// trailing punctuation and case-folding.
pub fn is_abstention(text: &str) -> bool {
    let t = text
        .trim()
        .trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .trim_start();
    t.eq_ignore_ascii_case("none")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instruction_first() {
        let p = render_prompt("Q?", "ctx").unwrap();
        assert!(p.starts_with(INSTRUCTION));
        let (ci, qi) = (p.find("ctx").unwrap(), p.find("Q?").unwrap());
        assert!(ci < qi);
    }

    #[test]
    fn empty_context_legal() {
        let p = render_prompt("Q?", "").unwrap();
        assert!(p.contains("Context:\n\n\nQuestion: Q?"));
        assert!(render_prompt("  ", "ctx").is_err());
    }

    #[test]
    fn golden() {
        let p = render_prompt("Who wrote Hamlet?", "Hamlet is a play by Shakespeare.").unwrap();
        assert_eq!(p, include_str!("../../tests/fixtures/prompt_golden.txt"));
    }

    #[test]
    fn abstention_rule() {
        assert!(is_abstention("NONE"));
        assert!(is_abstention(" none.\n"));
        assert!(is_abstention("None!"));
        assert!(!is_abstention("nonexistent"));
        assert!(!is_abstention("none of them"));
        assert!(!is_abstention(""));
    }
}
