//! Reply grammars the planner imposes on the chat model.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::types::{ParadigmKind, Subtask};

fn item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?s)(?:^|\s)(\d+)\s*[.)]\s+(.+?)\s*\(\s*depends\s*:\s*([^)]*)\)").unwrap()
    })
}

/// Parses `<n>. <description> (depends: none | <n>, <n>...)` items. Items may
/// share a line. Returns `None` when nothing matches or a dependency list is
/// malformed.
pub fn parse_decomposition(reply: &str) -> Option<Vec<Subtask>> {
    let mut out: Vec<Subtask> = Vec::new();
    let mut seen = BTreeSet::new();
    for cap in item_re().captures_iter(reply) {
        let id = cap[1].trim_start_matches('0').to_owned();
        let id = if id.is_empty() { "0".to_owned() } else { id };
        if !seen.insert(id.clone()) {
            return None;
        }
        let description = cap[2].split_whitespace().collect::<Vec<_>>().join(" ");
        if description.is_empty() {
            return None;
        }
        let deps_text = cap[3].trim();
        let mut subtask = Subtask::new(id, description);
        if !deps_text.eq_ignore_ascii_case("none") && !deps_text.is_empty() {
            for part in deps_text.split(|c: char| c == ',' || c.is_whitespace()) {
                let part = part.trim().trim_start_matches('#');
                if part.is_empty() || part.eq_ignore_ascii_case("and") {
                    continue;
                }
                let n: u64 = part.parse().ok()?;
                subtask.depends_on.insert(n.to_string());
            }
        }
        out.push(subtask);
    }
    (!out.is_empty()).then_some(out)
}

/// First integer in the reply.
pub fn parse_rating(reply: &str) -> Option<i64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"-?\d+").unwrap());
    re.find(reply).and_then(|m| m.as_str().parse().ok())
}

/// `<Kind>[: justification]` on the first non-empty line.
pub fn parse_paradigm_choice(reply: &str) -> Option<(ParadigmKind, String)> {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty())?;
    let (head, rest) = match line.split_once(':') {
        Some((h, r)) => (h, r.trim()),
        None => (line, ""),
    };
    let kind = ParadigmKind::parse(head.trim().trim_matches(|c| c == '*' || c == '`'))?;
    Some((kind, rest.to_owned()))
}

/// Text after the `FINAL:` marker, when present.
pub fn final_answer(reply: &str) -> Option<&str> {
    reply.find(super::FINAL_MARKER).map(|i| reply[i + super::FINAL_MARKER.len()..].trim())
}
