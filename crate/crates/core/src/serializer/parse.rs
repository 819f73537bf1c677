//! Extraction of the `action = {user_id: channel_id}` dictionary from
//! generated text.
//!
//! Grammar, applied to the last fenced code block (or the whole text when
//! there is none):
//!
//! ```text
//! action := "action" ws "=" ws "{" ws [ entry ( ws "," ws entry )* ws [","] ] ws "}"
//! entry  := uint ws ":" ws uint
//! uint   := [0-9]+            (must fit in u32)
//! ```
//!
//! The last `action = {` occurrence wins. Duplicate keys keep the last value.
//! Nothing is evaluated; any other token inside the braces is an error.

use std::fmt::Write;

use thiserror::Error;

use crate::allocation::RawAction;
use crate::netenv::{ChannelId, UserId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no `action = {{...}}` dictionary found")]
    NoActionFound,
    #[error("malformed action entry at byte {position}: {reason}")]
    MalformedEntry { position: usize, reason: String },
}

/// Body of the last complete ``` fence, without its info string.
fn last_fenced_block(text: &str) -> Option<&str> {
    let fences: Vec<usize> = text.match_indices("```").map(|(i, _)| i).collect();
    let pairs = fences.len() / 2;
    if pairs == 0 {
        return None;
    }
    let open = fences[2 * (pairs - 1)] + 3;
    let close = fences[2 * (pairs - 1) + 1];
    let body = &text[open..close];
    // Drop the info string (e.g. "python") on the opening line.
    Some(body.find('\n').map_or(body, |nl| &body[nl + 1..]))
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Byte offset of the `{` that opens the last `action = {` literal.
fn find_action_open(src: &str) -> Option<usize> {
    let bytes = src.as_bytes();
    let mut found = None;
    for (start, _) in src.match_indices("action") {
        let end = start + "action".len();
        if start > 0 && is_ident_byte(bytes[start - 1]) {
            continue;
        }
        if bytes.get(end).is_some_and(|&b| is_ident_byte(b)) {
            continue;
        }
        let mut i = skip_ws(bytes, end);
        if bytes.get(i) != Some(&b'=') {
            continue;
        }
        i = skip_ws(bytes, i + 1);
        if bytes.get(i) == Some(&b'{') {
            found = Some(i);
        }
    }
    found
}

fn skip_ws(bytes: &[u8], mut i: usize) -> usize {
    while bytes.get(i).is_some_and(u8::is_ascii_whitespace) {
        i += 1;
    }
    i
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Offset of `bytes` within the original text, for error positions.
    base: usize,
}

impl Cursor<'_> {
    fn error(&self, reason: &str) -> ParseError {
        ParseError::MalformedEntry {
            position: self.base + self.pos,
            reason: reason.to_string(),
        }
    }

    fn ws(&mut self) {
        self.pos = skip_ws(self.bytes, self.pos);
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn uint(&mut self) -> Result<u32, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a non-negative integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are ascii")
            .parse()
            .map_err(|_| ParseError::MalformedEntry {
                position: self.base + start,
                reason: "integer out of range".into(),
            })
    }

    fn dict(&mut self) -> Result<RawAction, ParseError> {
        let mut out = RawAction::new();
        self.expect(b'{', "`{`")?;
        self.ws();
        if self.peek() == Some(b'}') {
            return Ok(out);
        }
        loop {
            let key = self.uint()?;
            self.ws();
            self.expect(b':', "`:`")?;
            self.ws();
            let value = self.uint()?;
            out.insert(UserId(key), ChannelId(value));
            self.ws();
            match self.peek() {
                Some(b'}') => return Ok(out),
                Some(b',') => {
                    self.pos += 1;
                    self.ws();
                    if self.peek() == Some(b'}') {
                        return Ok(out);
                    }
                }
                None => return Err(self.error("unterminated dictionary")),
                Some(_) => return Err(self.error("expected `,` or `}`")),
            }
        }
    }
}

pub fn parse_action(text: &str) -> Result<RawAction, ParseError> {
    let (src, base) = match last_fenced_block(text) {
        Some(block) => (block, block.as_ptr() as usize - text.as_ptr() as usize),
        None => (text, 0),
    };
    let open = find_action_open(src).ok_or(ParseError::NoActionFound)?;
    Cursor {
        bytes: src.as_bytes(),
        pos: open,
        base,
    }
    .dict()
}

/// Canonical one-line rendering, e.g. `action = {0: 3, 1: 5}`.
pub fn render_action(action: &RawAction) -> String {
    let mut out = String::from("action = {");
    for (i, (u, c)) in action.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write!(out, "{u}: {c}").expect("writing to a String");
    }
    out.push('}');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(u32, u32)]) -> RawAction {
        pairs.iter().map(|&(u, c)| (UserId(u), ChannelId(c))).collect()
    }

    #[test]
    fn canonical_and_empty() {
        assert_eq!(parse_action("action = {0: 3, 1: 5}").unwrap(), map(&[(0, 3), (1, 5)]));
        assert_eq!(parse_action("action = {}").unwrap(), RawAction::new());
        assert_eq!(parse_action("action={ }").unwrap(), RawAction::new());
    }

    #[test]
    fn prose_has_no_action() {
        assert_eq!(
            parse_action("I would assign the strongest user first."),
            Err(ParseError::NoActionFound)
        );
        assert_eq!(parse_action("reaction = {1: 2}"), Err(ParseError::NoActionFound));
        assert_eq!(parse_action("action_list = {1: 2}"), Err(ParseError::NoActionFound));
    }

    #[test]
    fn fenced_block_with_trailing_comma() {
        let text = "Reasoning first.\n```python\n# pick\naction = {\n  0 : 3 ,\n  1:5,\n}\n```\n";
        assert_eq!(parse_action(text).unwrap(), map(&[(0, 3), (1, 5)]));
    }

    #[test]
    fn last_block_and_last_action_win() {
        let text = "```\naction = {0: 1}\n```\ntext\n```py\naction = {0: 2}\naction = {0: 4}\n```";
        assert_eq!(parse_action(text).unwrap(), map(&[(0, 4)]));
    }

    #[test]
    fn duplicate_keys_keep_last() {
        assert_eq!(parse_action("action = {2: 1, 2: 7}").unwrap(), map(&[(2, 7)]));
    }

    #[test]
    fn malformed_entries() {
        for bad in [
            "action = {0: 'a'}",
            "action = {-1: 2}",
            "action = {0: 1.5}",
            "action = {0: 1",
            "action = {0 1}",
            "action = {0: 99999999999}",
            "action = {,}",
        ] {
            assert!(
                matches!(parse_action(bad), Err(ParseError::MalformedEntry { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn render_is_canonical() {
        assert_eq!(render_action(&map(&[(1, 5), (0, 3)])), "action = {0: 3, 1: 5}");
        assert_eq!(render_action(&RawAction::new()), "action = {}");
    }
}
