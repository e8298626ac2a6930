//! Planning and code-generation prompts, the optimization menu and plan parsing.

use rand::Rng;
use serde::{Deserialize, Serialize};
use tensopt_core::sim::{compute_feedback, AcceleratorConfig};

use crate::config::SearchConfig;
use crate::search::Candidate;

pub const MENU_HEADER: &str = "<optimizations>:";

/// Tag for plans whose chosen option could not be identified.
pub const OTHER: &str = "other";

/// Text assets the prompts are assembled from. Templates use `{{NAME}}`
/// placeholders; a blank-line-separated block whose placeholder is disabled
/// is left out entirely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptAssets {
    pub isa: String,
    pub rules: String,
    pub icl_tiling: String,
    pub plan_template: String,
    pub code_template: String,
}

impl Default for PromptAssets {
    fn default() -> Self {
        PromptAssets {
            isa: include_str!("../assets/isa.txt").into(),
            rules: include_str!("../assets/rules.txt").into(),
            icl_tiling: include_str!("../assets/icl_tiling.txt").into(),
            plan_template: include_str!("../assets/plan_prompt.txt").into(),
            code_template: include_str!("../assets/code_prompt.txt").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuConfig {
    pub options: Vec<String>,
    /// Options never dropped out.
    pub always_keep: Vec<String>,
}

impl Default for MenuConfig {
    fn default() -> Self {
        MenuConfig::gemm()
    }
}

impl MenuConfig {
    /// Reads a numbered list, one option per line. The last option is kept
    /// unconditionally.
    pub fn parse(text: &str) -> Result<MenuConfig, String> {
        let options: Vec<String> =
            text.lines().map(str::trim).filter(|l| !l.is_empty() && *l != MENU_HEADER).map(|l| strip_number(l).to_string()).collect();
        let Some(last) = options.last().cloned() else {
            return Err("menu has no options".into());
        };
        Ok(MenuConfig { options, always_keep: vec![last] })
    }

    /// Menu for GEMM and convolution kernels.
    pub fn gemm() -> MenuConfig {
        Self::parse(include_str!("../assets/menu_gemm.txt")).expect("bundled menu")
    }

    /// Menu for fine-grained linear algebra such as the TinyMPC forward pass.
    pub fn fine_grained() -> MenuConfig {
        Self::parse(include_str!("../assets/menu_finegrained.txt")).expect("bundled menu")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.options.is_empty() {
            return Err("menu has no options".into());
        }
        match self.always_keep.iter().find(|k| !self.options.contains(k)) {
            Some(k) => Err(format!("always-kept option '{k}' is not on the menu")),
            None => Ok(()),
        }
    }

    fn droppable(&self, i: usize) -> bool {
        !self.always_keep.contains(&self.options[i])
    }

    /// Finds the menu option a free-text name refers to.
    pub fn lookup(&self, name: &str) -> Option<&str> {
        let n = normalize_option(name);
        self.options.iter().find(|o| normalize_option(o) == n).map(String::as_str)
    }
}

fn strip_number(line: &str) -> &str {
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 && line[digits..].starts_with('.') {
        line[digits + 1..].trim_start()
    } else {
        line
    }
}

/// Canonical form of an option name: no numbering, markup, case or trailing period.
pub fn normalize_option(s: &str) -> String {
    let s = strip_number(s.trim().trim_matches(|c| matches!(c, '*' | '`' | '"' | '\'')).trim());
    let s = s.trim_end_matches(|c: char| c == '.' || c.is_whitespace());
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Indices of the options that survive dropout. Each droppable option is
/// dropped independently with probability `p`; if every droppable option
/// drops, one of them is drawn uniformly and kept.
pub fn sample_menu(menu: &MenuConfig, p: f64, rng: &mut impl Rng) -> Vec<usize> {
    let p = p.clamp(0.0, 1.0);
    let droppable: Vec<usize> = (0..menu.options.len()).filter(|&i| menu.droppable(i)).collect();
    let mut keep: Vec<bool> = (0..menu.options.len()).map(|i| !menu.droppable(i)).collect();
    let mut any = false;
    for &i in &droppable {
        if !rng.gen_bool(p) {
            keep[i] = true;
            any = true;
        }
    }
    if !any && !droppable.is_empty() {
        keep[droppable[rng.gen_range(0..droppable.len())]] = true;
    }
    (0..keep.len()).filter(|&i| keep[i]).collect()
}

fn numbered<'a>(options: impl Iterator<Item = &'a str>) -> String {
    let mut s = String::from(MENU_HEADER);
    for (n, o) in options.enumerate() {
        s.push_str(&format!("\n{}. {o}", n + 1));
    }
    s
}

/// Menu text after dropout, renumbered from 1.
pub fn render_menu(menu: &MenuConfig, p: f64, rng: &mut impl Rng) -> String {
    numbered(sample_menu(menu, p, rng).into_iter().map(|i| menu.options[i].as_str()))
}

/// Restricts planning to one recorded option during schedule reuse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseConstraint {
    pub menu_option: String,
    /// Plan text recorded for this step on the original workload.
    pub plan_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    /// The menu line selected, or [`OTHER`].
    pub menu_option: String,
    pub plan_text: String,
    pub raw_response: String,
}

/// Reads the `OPTIMIZATION: <option>` header of a planning response. Without
/// a recognizable header the earliest menu option mentioned in the response
/// is used.
pub fn parse_plan(response: &str, menu: &MenuConfig) -> Plan {
    let raw_response = response.to_string();
    let mut lines = response.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().unwrap_or("");
    let header = first.trim().trim_start_matches(['#', '*', ' ']);
    if header.get(..13).is_some_and(|h| h.eq_ignore_ascii_case("optimization:")) {
        let name = &header[13..];
        let plan_text = lines.collect::<Vec<_>>().join("\n").trim().to_string();
        let chosen = menu.lookup(name).map(str::to_string).or_else(|| mentioned(name, menu));
        if let Some(menu_option) = chosen {
            return Plan { menu_option, plan_text, raw_response };
        }
    }
    let menu_option = mentioned(response, menu).unwrap_or_else(|| OTHER.to_string());
    Plan { menu_option, plan_text: response.trim().to_string(), raw_response }
}

/// Menu option occurring earliest in `text`, preferring the longest at a tie.
fn mentioned(text: &str, menu: &MenuConfig) -> Option<String> {
    let hay = text.to_lowercase();
    menu.options
        .iter()
        .filter_map(|o| {
            let n = normalize_option(o);
            hay.find(&n).map(|at| (at, std::cmp::Reverse(n.len()), o))
        })
        .min()
        .map(|(_, _, o)| o.clone())
}

/// Substitutes `{{NAME}}` placeholders. Blocks (separated by blank lines)
/// containing a placeholder mapped to `None` are removed.
fn fill(template: &str, values: &[(&str, Option<&str>)]) -> String {
    let mut blocks = Vec::new();
    'block: for block in template.trim_end().split("\n\n") {
        let mut out = String::new();
        let mut rest = block;
        while let Some(open) = rest.find("{{") {
            let Some(len) = rest[open..].find("}}") else { break };
            let key = &rest[open + 2..open + len];
            out.push_str(&rest[..open]);
            match values.iter().find(|(k, _)| *k == key) {
                Some((_, None)) => continue 'block,
                Some((_, Some(v))) => out.push_str(v.trim_end()),
                None => out.push_str(&rest[open..open + len + 2]),
            }
            rest = &rest[open + len + 2..];
        }
        out.push_str(rest);
        blocks.push(out);
    }
    blocks.join("\n\n") + "\n"
}

fn menu_section(sc: &SearchConfig, rng: &mut impl Rng, reuse: Option<&ReuseConstraint>) -> Option<String> {
    if let Some(r) = reuse {
        let mut s = numbered(std::iter::once(r.menu_option.as_str()));
        if let Some(hint) = r.plan_hint.as_deref().filter(|_| sc.reuse_hint) {
            s.push_str("\n\nThis optimization was applied to a similar workload with the following plan:\n");
            s.push_str(hint.trim());
        }
        return Some(s);
    }
    if !sc.ablations.include_menu {
        return None;
    }
    let p = if sc.ablations.enable_dropout { sc.dropout_prob } else { 0.0 };
    Some(render_menu(&sc.menu, p, rng))
}

/// The phase-one prompt asking for one optimization and a plan for it.
pub fn build_plan_prompt(
    cand: &Candidate,
    sc: &SearchConfig,
    cfg: &AcceleratorConfig,
    rng: &mut impl Rng,
    reuse: Option<&ReuseConstraint>,
) -> String {
    let a = &sc.ablations;
    let feedback = cand.verdict.perf.as_ref().map(|p| compute_feedback(p, cfg));
    let menu = menu_section(sc, rng, reuse);
    let instruction = if menu.is_some() {
        "Select exactly one optimization from the menu and output a corresponding transformation plan."
    } else {
        "Select one optimization and output a corresponding transformation plan."
    };
    let summary = cfg.summary();
    fill(
        &sc.prompts.plan_template,
        &[
            ("ISA", a.include_isa.then_some(sc.prompts.isa.as_str())),
            ("CODE", Some(&cand.code)),
            ("FEEDBACK", feedback.as_deref().filter(|_| a.include_feedback)),
            ("MENU", menu.as_deref()),
            ("ACCEL_SUMMARY", Some(&summary)),
            ("INSTRUCTION", Some(instruction)),
            ("RULES", Some(&sc.prompts.rules)),
        ],
    )
}

/// Whether the code prompt for `plan` carries the tiling example.
pub fn wants_tiling_example(plan: &Plan) -> bool {
    [&plan.plan_text, &plan.menu_option].iter().any(|s| s.to_lowercase().contains("tiling"))
}

/// The phase-two prompt asking for code implementing `plan`.
pub fn build_code_prompt(cand: &Candidate, plan: &Plan, sc: &SearchConfig, cfg: &AcceleratorConfig) -> String {
    let summary = cfg.summary();
    fill(
        &sc.prompts.code_template,
        &[
            ("ISA", sc.ablations.include_isa.then_some(sc.prompts.isa.as_str())),
            ("CODE", Some(&cand.code)),
            ("PLAN", Some(plan.raw_response.trim())),
            ("ICL", wants_tiling_example(plan).then_some(sc.prompts.icl_tiling.as_str())),
            ("ACCEL_SUMMARY", Some(&summary)),
            ("RULES", Some(&sc.prompts.rules)),
        ],
    )
}
