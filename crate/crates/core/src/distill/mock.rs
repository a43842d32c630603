//! Scripted chat client replaying fixture transcripts.
//!
//! A fixture directory holds one JSON file per problem, named
//! `<problem_id>.json`, containing an ordered array of turns:
//!
//! ```json
//! [
//!   {"expect_substring": "step by step", "reply": "Bob keeps 20 - 2 ..."},
//!   {"reply": "x = 20 - 12 - 2 - 2"}
//! ]
//! ```
//!
//! Turns are consumed strictly in order across the problem's whole
//! distillation run (fresh attempts included). A non-empty
//! `expect_substring` must occur in the latest user message, otherwise
//! the call fails; a turn with `"error": true` simulates one transport
//! failure. Identical fixtures always produce identical runs.

use super::client::{ChatClient, ChatMessage, ClientError, Role, SendOptions};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockTurn {
    #[serde(default)]
    pub expect_substring: String,
    #[serde(default)]
    pub reply: String,
    /// Simulate a transport failure instead of replying.
    #[serde(default)]
    pub error: bool,
}

impl MockTurn {
    pub fn reply(text: impl Into<String>) -> MockTurn {
        MockTurn {
            reply: text.into(),
            ..MockTurn::default()
        }
    }

    pub fn expect(expect: impl Into<String>, text: impl Into<String>) -> MockTurn {
        MockTurn {
            expect_substring: expect.into(),
            reply: text.into(),
            error: false,
        }
    }
}

pub struct MockChatClient {
    scripts: HashMap<String, Vec<MockTurn>>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl MockChatClient {
    pub fn from_scripts(scripts: HashMap<String, Vec<MockTurn>>) -> MockChatClient {
        MockChatClient {
            scripts,
            cursors: Mutex::new(HashMap::new()),
        }
    }

    /// Loads every `*.json` file in `dir`; the file stem is the problem id.
    pub fn from_dir(dir: &Path) -> std::io::Result<MockChatClient> {
        let mut scripts = HashMap::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        entries.sort();
        for path in entries {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let data = std::fs::read_to_string(&path)?;
            let turns: Vec<MockTurn> = serde_json::from_str(&data).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("bad fixture {}: {e}", path.display()),
                )
            })?;
            scripts.insert(stem, turns);
        }
        Ok(MockChatClient { scripts, cursors: Mutex::new(HashMap::new()) })
    }

    pub fn problem_ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self.scripts.keys().cloned().collect();
        ids.sort();
        ids
    }
}

impl ChatClient for MockChatClient {
    fn send(&self, conversation: &[ChatMessage], options: &SendOptions) -> Result<String, ClientError> {
        let script = self
            .scripts
            .get(&options.tag)
            .ok_or_else(|| ClientError::Fixture(format!("no fixture for problem `{}`", options.tag)))?;
        let turn = {
            let mut cursors = self.cursors.lock().expect("mock cursor poisoned");
            let pos = cursors.entry(options.tag.clone()).or_insert(0);
            let turn = script.get(*pos).cloned().ok_or_else(|| {
                ClientError::Fixture(format!(
                    "fixture for problem `{}` exhausted after {} turns",
                    options.tag, *pos
                ))
            })?;
            *pos += 1;
            turn
        };
        if turn.error {
            return Err(ClientError::Transport(format!(
                "scripted failure for problem `{}`",
                options.tag
            )));
        }
        if !turn.expect_substring.is_empty() {
            let last_user = conversation
                .iter()
                .rev()
                .find(|m| m.role == Role::User)
                .map(|m| m.content.as_str())
                .unwrap_or_default();
            if !last_user.contains(&turn.expect_substring) {
                return Err(ClientError::Fixture(format!(
                    "problem `{}`: expected prompt containing {:?}, got {:?}",
                    options.tag,
                    turn.expect_substring,
                    last_user.chars().take(120).collect::<String>()
                )));
            }
        }
        Ok(turn.reply)
    }
}
