//! A small regex subset used to *generate* field values rather than match
//! them. Supported syntax: literals, escaped punctuation, character classes
//! with ranges and negation, `.`, alternation, groups, and the quantifiers
//! `?`, `*`, `+`, `{n}`, `{m,n}`. Unbounded repetition is capped at
//! [`REPEAT_CAP`]; anchors, class escapes like `\d`, backreferences,
//! `(?...)` groups, lazy quantifiers, `{m,}`, and POSIX classes are
//! rejected up front so a template never silently generates the wrong
//! language.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use rand_core::RngCore;

/// Upper bound applied to `*` and `+` so generation always terminates.
pub const REPEAT_CAP: u32 = 8;

const PRINTABLE_LO: u8 = 0x20;
const PRINTABLE_HI: u8 = 0x7E;
const MAX_EXPLICIT_REPEAT: u32 = 999;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("unsupported regex feature at byte {pos}: {feature}")]
    Unsupported { pos: usize, feature: String },
    #[error("regex syntax error at byte {pos}: {reason}")]
    Syntax { pos: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Literal(u8),
    /// `.` — any printable ASCII character.
    Any,
    /// A resolved character class: the concrete candidate bytes.
    Class(Vec<u8>),
    Concat(Vec<Node>),
    Alternate(Vec<Node>),
    Repeat { node: Box<Node>, min: u32, max: u32 },
}

/// A parsed generation pattern. Parsing validates the whole pattern, so
/// [`Pattern::generate`] itself cannot fail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    source: String,
    root: Node,
}

impl Pattern {
    pub fn parse(source: &str) -> Result<Pattern, PatternError> {
        let mut parser = Parser {
            bytes: source.as_bytes(),
            pos: 0,
        };
        let root = parser.alternation()?;
        match parser.peek() {
            None => Ok(Pattern {
                source: String::from(source),
                root,
            }),
            Some(b')') => Err(PatternError::Syntax {
                pos: parser.pos,
                reason: String::from("unbalanced ')'"),
            }),
            Some(_) => Err(PatternError::Syntax {
                pos: parser.pos,
                reason: String::from("unexpected trailing input"),
            }),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Draws one string from the pattern's language, choosing uniformly
    /// among alternation branches, repetition counts, and class members.
    pub fn generate(&self, rng: &mut dyn RngCore) -> String {
        let mut out = String::new();
        gen_node(&self.root, rng, &mut out);
        out
    }
}

fn gen_node(node: &Node, rng: &mut dyn RngCore, out: &mut String) {
    match node {
        Node::Literal(b) => out.push(*b as char),
        Node::Any => {
            let span = (PRINTABLE_HI - PRINTABLE_LO + 1) as usize;
            out.push((PRINTABLE_LO + gen_below(rng, span) as u8) as char);
        }
        Node::Class(set) => out.push(set[gen_below(rng, set.len())] as char),
        Node::Concat(items) => {
            for item in items {
                gen_node(item, rng, out);
            }
        }
        Node::Alternate(branches) => {
            gen_node(&branches[gen_below(rng, branches.len())], rng, out)
        }
        Node::Repeat { node, min, max } => {
            let count = min + gen_below(rng, (max - min + 1) as usize) as u32;
            for _ in 0..count {
                gen_node(node, rng, out);
            }
        }
    }
}

/// Uniform draw from `0..n` via rejection sampling, so no modulo bias.
fn gen_below(rng: &mut dyn RngCore, n: usize) -> usize {
    debug_assert!(n > 0 && n <= u32::MAX as usize);
    if n == 1 {
        return 0;
    }
    let n = n as u64;
    let zone = ((1u64 << 32) / n) * n;
    loop {
        let v = rng.next_u32() as u64;
        if v < zone {
            return (v % n) as usize;
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.bytes.get(self.pos + offset).copied()
    }

    fn unsupported(&self, pos: usize, feature: &str) -> PatternError {
        PatternError::Unsupported {
            pos,
            feature: String::from(feature),
        }
    }

    fn syntax(&self, pos: usize, reason: &str) -> PatternError {
        PatternError::Syntax {
            pos,
            reason: String::from(reason),
        }
    }

    fn alternation(&mut self) -> Result<Node, PatternError> {
        let mut branches = alloc::vec![self.concat()?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            branches.push(self.concat()?);
        }
        if branches.len() == 1 {
            Ok(branches.pop().expect("one branch"))
        } else {
            Ok(Node::Alternate(branches))
        }
    }

    fn concat(&mut self) -> Result<Node, PatternError> {
        let mut items = Vec::new();
        loop {
            match self.peek() {
                None | Some(b'|') | Some(b')') => break,
                _ => items.push(self.repeat()?),
            }
        }
        if items.len() == 1 {
            Ok(items.pop().expect("one item"))
        } else {
            Ok(Node::Concat(items))
        }
    }

    fn repeat(&mut self) -> Result<Node, PatternError> {
        let atom = self.atom()?;
        let quant_pos = self.pos;
        let bounds = match self.peek() {
            Some(b'?') => {
                self.pos += 1;
                Some((0, 1))
            }
            Some(b'*') => {
                self.pos += 1;
                Some((0, REPEAT_CAP))
            }
            Some(b'+') => {
                self.pos += 1;
                Some((1, REPEAT_CAP))
            }
            Some(b'{') => Some(self.brace_quantifier()?),
            _ => None,
        };
        match bounds {
            None => Ok(atom),
            Some((min, max)) => {
                if self.peek() == Some(b'?') {
                    return Err(self.unsupported(self.pos, "lazy quantifier"));
                }
                let _ = quant_pos;
                Ok(Node::Repeat {
                    node: Box::new(atom),
                    min,
                    max,
                })
            }
        }
    }

    fn brace_quantifier(&mut self) -> Result<(u32, u32), PatternError> {
        let open = self.pos;
        self.pos += 1; // '{'
        let min = self.repeat_count(open)?;
        match self.peek() {
            Some(b'}') => {
                self.pos += 1;
                Ok((min, min))
            }
            Some(b',') => {
                self.pos += 1;
                if self.peek() == Some(b'}') {
                    return Err(self.unsupported(open, "open-ended repetition {m,}"));
                }
                let max = self.repeat_count(open)?;
                if self.peek() != Some(b'}') {
                    return Err(self.syntax(open, "unterminated repetition spec"));
                }
                self.pos += 1;
                if min > max {
                    return Err(self.syntax(open, "repetition minimum exceeds maximum"));
                }
                Ok((min, max))
            }
            _ => Err(self.syntax(open, "unterminated repetition spec")),
        }
    }

    fn repeat_count(&mut self, open: usize) -> Result<u32, PatternError> {
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(b @ b'0'..=b'9') = self.peek() {
            value = value * 10 + (b - b'0') as u32;
            if value > MAX_EXPLICIT_REPEAT {
                return Err(self.syntax(open, "repetition count too large"));
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.syntax(open, "repetition spec needs a count"));
        }
        Ok(value)
    }

    fn atom(&mut self) -> Result<Node, PatternError> {
        let pos = self.pos;
        match self.peek() {
            None => Err(self.syntax(pos, "expected an atom")),
            Some(b'(') => {
                if self.peek_at(1) == Some(b'?') {
                    return Err(self.unsupported(pos, "(?...) group"));
                }
                self.pos += 1;
                let inner = self.alternation()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax(pos, "unbalanced '('"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'[') => self.class(),
            Some(b'.') => {
                self.pos += 1;
                Ok(Node::Any)
            }
            Some(b'^') | Some(b'$') => Err(self.unsupported(pos, "anchor")),
            Some(b'*') | Some(b'+') | Some(b'?') | Some(b'{') => {
                Err(self.syntax(pos, "quantifier with nothing to repeat"))
            }
            Some(b'\\') => {
                let b = self.escape(pos)?;
                Ok(Node::Literal(b))
            }
            Some(b) if (PRINTABLE_LO..=PRINTABLE_HI).contains(&b) => {
                self.pos += 1;
                Ok(Node::Literal(b))
            }
            Some(_) => Err(self.syntax(pos, "pattern must be printable ASCII")),
        }
    }

    /// Consumes a backslash escape and returns the literal byte it denotes.
    fn escape(&mut self, pos: usize) -> Result<u8, PatternError> {
        self.pos += 1; // '\\'
        match self.peek() {
            None => Err(self.syntax(pos, "trailing backslash")),
            Some(b @ b'1'..=b'9') => {
                let _ = b;
                Err(self.unsupported(pos, "backreference"))
            }
            Some(b) if b.is_ascii_alphanumeric() => {
                // covers \d \w \s \b and friends
                Err(self.unsupported(pos, "escape class"))
            }
            Some(b) if (PRINTABLE_LO..=PRINTABLE_HI).contains(&b) => {
                self.pos += 1;
                Ok(b)
            }
            Some(_) => Err(self.syntax(pos, "pattern must be printable ASCII")),
        }
    }

    fn class(&mut self) -> Result<Node, PatternError> {
        let open = self.pos;
        self.pos += 1; // '['
        let negated = if self.peek() == Some(b'^') {
            self.pos += 1;
            true
        } else {
            false
        };
        let mut member = [false; 128];
        let mut saw_any = false;
        loop {
            match self.peek() {
                None => return Err(self.syntax(open, "unterminated character class")),
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                Some(b'[') if self.peek_at(1) == Some(b':') => {
                    return Err(self.unsupported(self.pos, "POSIX character class"));
                }
                _ => {
                    let lo = self.class_char(open)?;
                    // a '-' forms a range unless it is the last char before ']'
                    if self.peek() == Some(b'-') && self.peek_at(1).is_some_and(|b| b != b']') {
                        let dash = self.pos;
                        self.pos += 1;
                        let hi = self.class_char(open)?;
                        if lo > hi {
                            return Err(self.syntax(dash, "range lower bound exceeds upper"));
                        }
                        for b in lo..=hi {
                            member[b as usize] = true;
                        }
                    } else {
                        member[lo as usize] = true;
                    }
                    saw_any = true;
                }
            }
        }
        if !saw_any {
            return Err(self.syntax(open, "empty character class"));
        }
        let set: Vec<u8> = (PRINTABLE_LO..=PRINTABLE_HI)
            .filter(|&b| member[b as usize] != negated)
            .collect();
        if set.is_empty() {
            return Err(self.syntax(open, "class matches no printable character"));
        }
        Ok(Node::Class(set))
    }

    fn class_char(&mut self, open: usize) -> Result<u8, PatternError> {
        match self.peek() {
            None => Err(self.syntax(open, "unterminated character class")),
            Some(b'\\') => self.escape(self.pos),
            Some(b) if (PRINTABLE_LO..=PRINTABLE_HI).contains(&b) => {
                self.pos += 1;
                Ok(b)
            }
            Some(_) => Err(self.syntax(self.pos, "pattern must be printable ASCII")),
        }
    }
}
