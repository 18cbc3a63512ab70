//! Text format for pulse sequences.
//!
//! ```text
//! # Hahn echo, 1 us total
//! p2 y
//! wait 0.5us
//! pi x
//! wait 0.5us
//! p2 y
//! ```
//!
//! Statements are separated by `;` or newlines; `#` starts a comment that
//! runs to the end of the line. Keywords, axes and units are
//! case-insensitive.
//!
//! | statement                | meaning                                 |
//! |--------------------------|-----------------------------------------|
//! | `p2 <axis> [dur]`        | π/2 pulse                               |
//! | `pi <axis> [dur]`        | π pulse                                 |
//! | `rot <angle> <axis> [dur]` | rotation by `angle` radians           |
//! | `wait <num><unit>`       | free evolution; unit is ns, us, ms or s |
//!
//! Axes are `x` and `y`. An optional pulse duration uses the same unit
//! rules as `wait`; without it the pulse is ideal.

use std::fmt;

use super::{Event, Pulse, PulseAxis, PulseKind, PulseSequence};

#[derive(Clone, Debug, PartialEq)]
pub enum ParseErrorKind {
    Syntax(String),
    NonPositiveDelay(f64),
    UnknownAxis(String),
    MissingUnit(String),
    UnknownUnit(String),
}

/// A diagnostic with a 1-based line and column.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::NonPositiveDelay(v) => {
                write!(f, "non-positive delay: {v} s (waits must be > 0)")
            }
            ParseErrorKind::UnknownAxis(a) => write!(f, "unknown axis '{a}' (expected x or y)"),
            ParseErrorKind::MissingUnit(t) => {
                write!(f, "duration '{t}' has no unit (use ns, us, ms or s)")
            }
            ParseErrorKind::UnknownUnit(u) => {
                write!(f, "unknown time unit '{u}' (use ns, us, ms or s)")
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(statement: &str, offset: usize) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in statement.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &statement[s..i],
                    column: offset + statement[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &statement[s..],
            column: offset + statement[..s].chars().count() + 1,
        });
    }
    out
}

struct Cursor {
    line: usize,
}

impl Cursor {
    fn err(&self, column: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column,
            kind,
        }
    }

    fn axis(&self, tok: Token) -> Result<PulseAxis, ParseError> {
        match tok.text.to_ascii_lowercase().as_str() {
            "x" => Ok(PulseAxis::X),
            "y" => Ok(PulseAxis::Y),
            other => Err(self.err(tok.column, ParseErrorKind::UnknownAxis(other.to_string()))),
        }
    }

    /// Reads a duration from one token (`1us`) or two (`1 us`); returns the
    /// value in seconds and the number of tokens consumed.
    fn duration(&self, toks: &[Token]) -> Result<(f64, usize), ParseError> {
        let first = toks[0];
        let (number, unit_text, used) = match split_number(first.text) {
            Some((v, rest)) if !rest.is_empty() => (v, rest.to_string(), 1),
            Some((v, _)) => match toks.get(1) {
                Some(next) => (v, next.text.to_string(), 2),
                None => {
                    return Err(self.err(first.column, ParseErrorKind::MissingUnit(first.text.into())))
                }
            },
            None => {
                return Err(self.err(
                    first.column,
                    ParseErrorKind::Syntax(format!("expected a duration, found '{}'", first.text)),
                ))
            }
        };
        let divisor = match unit_text.to_lowercase().as_str() {
            "s" => 1.0,
            "ms" => 1e3,
            "us" | "µs" => 1e6,
            "ns" => 1e9,
            _ => {
                let column = if used == 2 { toks[1].column } else { first.column };
                return Err(self.err(column, ParseErrorKind::UnknownUnit(unit_text)));
            }
        };
        Ok((number / divisor, used))
    }

    fn pulse(&self, kind: PulseKind, rest: &[Token], keyword: Token) -> Result<Event, ParseError> {
        let Some(&axis_tok) = rest.first() else {
            return Err(self.err(
                keyword.column,
                ParseErrorKind::Syntax(format!("'{}' needs an axis", keyword.text)),
            ));
        };
        let axis = self.axis(axis_tok)?;
        let mut duration = 0.0;
        if rest.len() > 1 {
            let (d, used) = self.duration(&rest[1..])?;
            if rest.len() > 1 + used {
                return Err(self.trailing(rest[1 + used]));
            }
            if !(d >= 0.0) || !d.is_finite() {
                return Err(self.err(
                    rest[1].column,
                    ParseErrorKind::Syntax(format!("pulse duration must be >= 0, got {d}")),
                ));
            }
            duration = d;
        }
        Ok(Event::Pulse(Pulse { kind, axis, duration }))
    }

    fn trailing(&self, tok: Token) -> ParseError {
        self.err(tok.column, ParseErrorKind::Syntax(format!("unexpected '{}'", tok.text)))
    }

    fn statement(&self, toks: &[Token]) -> Result<Event, ParseError> {
        let keyword = toks[0];
        let rest = &toks[1..];
        match keyword.text.to_ascii_lowercase().as_str() {
            "p2" => self.pulse(PulseKind::PiHalf, rest, keyword),
            "pi" => self.pulse(PulseKind::Pi, rest, keyword),
            "rot" => {
                let Some(&angle_tok) = rest.first() else {
                    return Err(self.err(
                        keyword.column,
                        ParseErrorKind::Syntax("'rot' needs an angle and an axis".into()),
                    ));
                };
                let angle: f64 = angle_tok
                    .text
                    .parse()
                    .ok()
                    .filter(|a: &f64| a.is_finite())
                    .ok_or_else(|| {
                        self.err(
                            angle_tok.column,
                            ParseErrorKind::Syntax(format!(
                                "expected an angle in radians, found '{}'",
                                angle_tok.text
                            )),
                        )
                    })?;
                self.pulse(PulseKind::Arbitrary(angle), &rest[1..], angle_tok)
            }
            "wait" => {
                if rest.is_empty() {
                    return Err(self.err(
                        keyword.column,
                        ParseErrorKind::Syntax("'wait' needs a duration".into()),
                    ));
                }
                let (d, used) = self.duration(rest)?;
                if rest.len() > used {
                    return Err(self.trailing(rest[used]));
                }
                if !(d > 0.0) || !d.is_finite() {
                    return Err(self.err(rest[0].column, ParseErrorKind::NonPositiveDelay(d)));
                }
                Ok(Event::Delay(d))
            }
            other => Err(self.err(
                keyword.column,
                ParseErrorKind::Syntax(format!(
                    "unknown statement '{other}' (expected p2, pi, rot or wait)"
                )),
            )),
        }
    }
}

fn split_number(text: &str) -> Option<(f64, &str)> {
    let end = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || ((c == '+' || c == '-') && (i == 0 || matches!(&text[i - 1..i], "e" | "E")))
                || ((c == 'e' || c == 'E')
                    && text[i + 1..]
                        .trim_start_matches(['+', '-'])
                        .starts_with(|d: char| d.is_ascii_digit())))
        })
        .map_or(text.len(), |(i, _)| i);
    let value = text[..end].parse().ok()?;
    Some((value, &text[end..]))
}

/// Parses DSL text into a sequence. Structural validation only; use
/// [`PulseSequence::validate_sensing`] to check π/2 bracketing.
pub fn parse_sequence(text: &str) -> Result<PulseSequence, ParseError> {
    let mut events = Vec::new();
    for (index, raw_line) in text.lines().enumerate() {
        let cursor = Cursor { line: index + 1 };
        let line = raw_line.split('#').next().unwrap_or("");
        let mut offset = 0;
        for statement in line.split(';') {
            let toks = tokens(statement, offset);
            offset += statement.chars().count() + 1;
            if toks.is_empty() {
                continue;
            }
            events.push(cursor.statement(&toks)?);
        }
    }
    Ok(PulseSequence::new(events).expect("parser only emits valid events"))
}

fn axis_name(axis: PulseAxis) -> &'static str {
    match axis {
        PulseAxis::X => "x",
        PulseAxis::Y => "y",
    }
}

/// Writes one statement per line. Durations are written in seconds in the
/// shortest form that parses back to the same value.
pub fn format_sequence(seq: &PulseSequence) -> String {
    let mut out = String::new();
    for event in seq.events() {
        match event {
            Event::Delay(d) => out.push_str(&format!("wait {d:e}s")),
            Event::Pulse(p) => {
                match p.kind {
                    PulseKind::PiHalf => out.push_str("p2 "),
                    PulseKind::Pi => out.push_str("pi "),
                    PulseKind::Arbitrary(a) => out.push_str(&format!("rot {a:e} ")),
                }
                out.push_str(axis_name(p.axis));
                if p.duration > 0.0 {
                    out.push_str(&format!(" {:e}s", p.duration));
                }
            }
        }
        out.push('\n');
    }
    out
}
