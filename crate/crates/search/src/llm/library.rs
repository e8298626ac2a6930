use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tensopt_core::dsl::{parse_kernel, print_kernel};

use super::{Backend, Completion, LlmError, Phase};
use crate::prompts::{normalize_option, MENU_HEADER};

/// A known rewrite: applying `option` as described by `plan` to `from` yields `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub option: String,
    pub plan: String,
    pub to: String,
}

/// Answers prompts from a fixed set of transitions, the way a model that
/// knows exactly those rewrites would. A plan request picks, among the
/// transitions that start from the prompt's current code and whose option is
/// on the offered menu, one chosen by a hash of the seed and prompt text; a
/// code request returns the target of the transition whose plan it carries.
pub struct LibraryBackend {
    name: String,
    seed: u64,
    transitions: Vec<Transition>,
}

const NOTHING_TO_DO: &str = "OPTIMIZATION: other methods not listed here\nNo applicable transformation was found.";

impl LibraryBackend {
    /// Source kernels are canonicalized so they match the code shown in prompts.
    pub fn new(name: impl Into<String>, seed: u64, transitions: Vec<Transition>) -> Result<LibraryBackend, String> {
        let transitions = transitions
            .into_iter()
            .map(|mut t| {
                let p = parse_kernel(&t.from).map_err(|d| format!("transition '{}': source does not parse: {d:?}", t.plan))?;
                t.from = print_kernel(&p);
                Ok(t)
            })
            .collect::<Result<_, String>>()?;
        Ok(LibraryBackend { name: name.into(), seed, transitions })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    fn pick(&self, prompt: &str, n: usize) -> usize {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(prompt.as_bytes());
        let d = h.finalize();
        (u64::from_le_bytes(d[..8].try_into().unwrap()) % n as u64) as usize
    }
}

/// Normalized option lines of the menu section, if the prompt has one.
fn offered_options(prompt: &str) -> Option<Vec<String>> {
    let start = prompt.find(MENU_HEADER)? + MENU_HEADER.len();
    Some(prompt[start..].lines().skip_while(|l| l.trim().is_empty()).take_while(|l| !l.trim().is_empty()).map(normalize_option).collect())
}

impl Backend for LibraryBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, phase: Phase, prompt: &str) -> Result<Completion, LlmError> {
        match phase {
            Phase::Plan => {
                let menu = offered_options(prompt);
                let fits: Vec<&Transition> = self
                    .transitions
                    .iter()
                    .filter(|t| prompt.contains(&t.from))
                    .filter(|t| menu.as_ref().is_none_or(|m| m.contains(&normalize_option(&t.option))))
                    .collect();
                if fits.is_empty() {
                    return Ok(Completion::text(NOTHING_TO_DO));
                }
                let t = fits[self.pick(prompt, fits.len())];
                Ok(Completion::text(format!("OPTIMIZATION: {}\n{}", t.option, t.plan)))
            }
            Phase::Code => {
                let hit = self.transitions.iter().find(|t| prompt.contains(&t.from) && prompt.contains(&t.plan));
                Ok(Completion::text(match hit {
                    Some(t) => format!("Here is the transformed code.\n```c\n{}\n```\n", t.to.trim_end()),
                    None => "I could not apply this plan to the code.".to_string(),
                }))
            }
        }
    }

    fn complete_batch(&self, phase: Phase, prompts: &[String]) -> Vec<Result<Completion, LlmError>> {
        prompts.iter().map(|p| self.complete(phase, p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K0: &str = "void test(int8_t A[16][16]) { fence(); }";
    const K1: &str = "void test(int8_t A[16][16]) { }";

    fn backend() -> LibraryBackend {
        let t = |option: &str, plan: &str| Transition { from: K0.into(), option: option.into(), plan: plan.into(), to: K1.into() };
        LibraryBackend::new("lib", 3, vec![t("loop unrolling", "unroll it"), t("double buffering", "buffer it")]).unwrap()
    }

    fn prompt(menu: &[&str]) -> String {
        let code = print_kernel(&parse_kernel(K0).unwrap());
        let lines: Vec<String> = menu.iter().enumerate().map(|(i, m)| format!("{}. {m}", i + 1)).collect();
        format!("code:\n{code}\n\n{MENU_HEADER}\n{}\n\nrules", lines.join("\n"))
    }

    #[test]
    fn plans_only_use_offered_options() {
        let b = backend();
        let r = b.complete(Phase::Plan, &prompt(&["double buffering", "other methods not listed here"])).unwrap();
        assert_eq!(r.text, "OPTIMIZATION: double buffering\nbuffer it");
        let r = b.complete(Phase::Plan, &prompt(&["fuse loops"])).unwrap();
        assert_eq!(r.text, NOTHING_TO_DO);
    }

    #[test]
    fn code_follows_the_plan() {
        let b = backend();
        let r = b.complete(Phase::Code, &format!("{}\nplan: unroll it", prompt(&[]))).unwrap();
        assert!(r.text.contains("```c\nvoid test(int8_t A[16][16]) { }\n```"));
        let r = b.complete(Phase::Code, &format!("{}\nplan: something else", prompt(&[]))).unwrap();
        assert!(!r.text.contains("```"));
    }
}
