use serde::{Deserialize, Serialize};

use super::DialogueError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Router,
    Goal,
    StateDesign,
    Reply,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Router, Stage::Goal, Stage::StateDesign, Stage::Reply];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Router => "router",
            Stage::Goal => "goal",
            Stage::StateDesign => "state_design",
            Stage::Reply => "reply",
        }
    }

    /// The raw template, with `{env_name}`, `{env_desc}` and `{env_list}`
    /// placeholders and `{{` / `}}` for literal braces.
    pub fn template(self) -> &'static str {
        match self {
            Stage::Router => include_str!("../../assets/prompts/router.txt"),
            Stage::Goal => include_str!("../../assets/prompts/goal.txt"),
            Stage::StateDesign => include_str!("../../assets/prompts/state_design.txt"),
            Stage::Reply => include_str!("../../assets/prompts/reply.txt"),
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Values substituted into a template.
#[derive(Clone, Debug, Default)]
pub struct PromptVars<'a> {
    pub env_name: Option<&'a str>,
    pub env_desc: Option<&'a str>,
    pub env_list: Option<&'a str>,
}

/// Format-string substitution: `{name}` is replaced by the named variable,
/// `{{` and `}}` become literal braces. Unknown or missing names are errors.
pub fn fill(template: &str, vars: &PromptVars<'_>) -> Result<String, DialogueError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut chars = template.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '{' if chars.peek().map(|p| p.1) == Some('{') => {
                chars.next();
                out.push('{');
            }
            '}' if chars.peek().map(|p| p.1) == Some('}') => {
                chars.next();
                out.push('}');
            }
            '{' => {
                let rest = &template[i + 1..];
                let end = rest.find('}').ok_or_else(|| DialogueError::Template(format!("unclosed '{{' at byte {i}")))?;
                let name = &rest[..end];
                let value = match name {
                    "env_name" => vars.env_name,
                    "env_desc" => vars.env_desc,
                    "env_list" => vars.env_list,
                    _ => return Err(DialogueError::Template(format!("unknown placeholder '{{{name}}}'"))),
                };
                out.push_str(value.ok_or_else(|| DialogueError::Template(format!("no value for '{{{name}}}'")))?);
                for _ in 0..=end {
                    chars.next();
                }
            }
            '}' => return Err(DialogueError::Template(format!("stray '}}' at byte {i}"))),
            _ => out.push(c),
        }
    }
    Ok(out)
}
