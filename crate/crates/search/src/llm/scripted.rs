use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, Completion, LlmError, Phase};

/// One canned response. `response_file` is resolved relative to the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub phase: Phase,
    /// Substring the prompt must contain for this entry to answer it.
    #[serde(default, rename = "match", skip_serializing_if = "Option::is_none")]
    pub matches: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptManifest {
    pub entries: Vec<ScriptEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("entry {0}: exactly one of response and response_file must be given")]
    Response(usize),
}

impl ScriptManifest {
    /// Reads a manifest and inlines every `response_file`.
    pub fn load(path: &Path) -> Result<ScriptManifest, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.into(), source })?;
        let mut m: ScriptManifest = serde_json::from_str(&text).map_err(|source| ManifestError::Json { path: path.into(), source })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for (i, e) in m.entries.iter_mut().enumerate() {
            match (&e.response, e.response_file.take()) {
                (Some(_), None) => {}
                (None, Some(f)) => {
                    let f = dir.join(f);
                    let body = std::fs::read_to_string(&f).map_err(|source| ManifestError::Io { path: f, source })?;
                    e.response = Some(body);
                }
                _ => return Err(ManifestError::Response(i)),
            }
        }
        Ok(m)
    }
}

/// Replays a manifest. Each request takes the first unconsumed entry of its
/// phase whose `match` (if any) occurs in the prompt; entries are used once.
pub struct ScriptedBackend {
    name: String,
    entries: Vec<(Phase, Option<String>, String)>,
    used: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>, manifest: &ScriptManifest) -> ScriptedBackend {
        let entries: Vec<_> =
            manifest.entries.iter().map(|e| (e.phase, e.matches.clone(), e.response.clone().unwrap_or_default())).collect();
        let used = Mutex::new(vec![false; entries.len()]);
        ScriptedBackend { name: name.into(), entries, used }
    }

    /// Entries not yet consumed, per phase.
    pub fn remaining(&self, phase: Phase) -> usize {
        let used = self.used.lock().unwrap();
        self.entries.iter().zip(used.iter()).filter(|((p, _, _), u)| *p == phase && !**u).count()
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, phase: Phase, prompt: &str) -> Result<Completion, LlmError> {
        let mut used = self.used.lock().unwrap();
        let hit = self
            .entries
            .iter()
            .enumerate()
            .position(|(i, (p, m, _))| !used[i] && *p == phase && m.as_deref().is_none_or(|m| prompt.contains(m)));
        match hit {
            Some(i) => {
                used[i] = true;
                Ok(Completion::text(self.entries[i].2.clone()))
            }
            None => Err(LlmError::ScriptExhausted(phase)),
        }
    }

    fn complete_batch(&self, phase: Phase, prompts: &[String]) -> Vec<Result<Completion, LlmError>> {
        prompts.iter().map(|p| self.complete(phase, p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(phase: Phase, matches: Option<&str>, response: &str) -> ScriptEntry {
        ScriptEntry { phase, matches: matches.map(Into::into), response: Some(response.into()), response_file: None }
    }

    #[test]
    fn phases_have_independent_cursors() {
        let m = ScriptManifest {
            entries: vec![
                entry(Phase::Plan, None, "OPTIMIZATION: loop unrolling\nunroll j"),
                entry(Phase::Code, None, "code one"),
                entry(Phase::Plan, None, "second plan"),
            ],
        };
        let b = ScriptedBackend::new("s", &m);
        assert_eq!(b.complete(Phase::Code, "x").unwrap().text, "code one");
        assert_eq!(b.complete(Phase::Plan, "x").unwrap().text, "OPTIMIZATION: loop unrolling\nunroll j");
        assert_eq!(b.complete(Phase::Plan, "x").unwrap().text, "second plan");
        assert_eq!(b.complete(Phase::Plan, "x"), Err(LlmError::ScriptExhausted(Phase::Plan)));
    }

    #[test]
    fn match_skips_entries_for_other_prompts() {
        let m = ScriptManifest { entries: vec![entry(Phase::Plan, Some("alpha"), "A"), entry(Phase::Plan, Some("beta"), "B")] };
        let b = ScriptedBackend::new("s", &m);
        assert_eq!(b.complete(Phase::Plan, "has beta").unwrap().text, "B");
        assert_eq!(b.complete(Phase::Plan, "has beta"), Err(LlmError::ScriptExhausted(Phase::Plan)));
        assert_eq!(b.complete(Phase::Plan, "alpha").unwrap().text, "A");
        assert_eq!(b.remaining(Phase::Plan), 0);
    }

    #[test]
    fn manifest_inlines_response_files() {
        let dir = std::env::temp_dir().join(format!("tensopt-script-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("r.txt"), "from file").unwrap();
        std::fs::write(
            dir.join("m.json"),
            r#"{"entries":[{"phase":"code","response_file":"r.txt"},{"phase":"plan","match":"x","response":"p"}]}"#,
        )
        .unwrap();
        let m = ScriptManifest::load(&dir.join("m.json")).unwrap();
        assert_eq!(m.entries[0].response.as_deref(), Some("from file"));
        assert_eq!(m.entries[1].matches.as_deref(), Some("x"));
        std::fs::write(dir.join("bad.json"), r#"{"entries":[{"phase":"code"}]}"#).unwrap();
        assert!(matches!(ScriptManifest::load(&dir.join("bad.json")), Err(ManifestError::Response(0))));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
