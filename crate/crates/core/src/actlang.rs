//! The Act-line call language.
//!
//! ```text
//! line    = [ ident "=" ] tool "(" [ arg { "," arg } ] ")"
//! arg     = string | number | list | ident
//! list    = "[" [ (number | list) { "," (number | list) } ] "]"
//! string  = "'" chars "'" | '"' chars '"' | "'''" chars "'''"
//! number  = [ "-" ] digits [ "." digits ]
//! ident   = letter { letter | digit | "_" }
//! ```
//!
//! Whitespace is free between tokens. Single and double quoted strings end
//! at the next matching quote and may not span lines. A triple-quoted string
//! ends at the last three quotes of the first run of three or more, so it may
//! hold newlines, commas and quotes (but not three quotes in a row).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::ToolLookup;
use crate::value::{format_number, Box2D, BoxList, Value, VariableStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Arg {
    Str(String),
    Num(f64),
    List(Vec<Arg>),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub assign: Option<String>,
    pub tool: String,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CallErrorKind {
    Syntax,
    UnknownTool,
    UnknownVariable,
    ArityMismatch,
    TypeMismatch,
    /// Assignment to a name that is already bound.
    DuplicateVariable,
}

impl CallErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CallErrorKind::Syntax => "Syntax",
            CallErrorKind::UnknownTool => "UnknownTool",
            CallErrorKind::UnknownVariable => "UnknownVariable",
            CallErrorKind::ArityMismatch => "ArityMismatch",
            CallErrorKind::TypeMismatch => "TypeMismatch",
            CallErrorKind::DuplicateVariable => "DuplicateVariable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct CallError {
    pub kind: CallErrorKind,
    pub message: String,
}

impl CallError {
    fn new(kind: CallErrorKind, message: String) -> Self {
        Self { kind, message }
    }

    pub fn syntax(detail: impl fmt::Display) -> Self {
        Self::new(CallErrorKind::Syntax, format!("#ERROR#: Syntax error: {detail}."))
    }

    pub fn unknown_tool(name: &str) -> Self {
        Self::new(
            CallErrorKind::UnknownTool,
            format!("#ERROR#: Tool {name} is not registered."),
        )
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), CallError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(CallError::syntax(format_args!("expected '{c}' at column {}", self.pos + 1)))
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        if !rest.chars().next().is_some_and(is_ident_start) {
            return None;
        }
        let len = rest.find(|c: char| !is_ident_char(c)).unwrap_or(rest.len());
        self.pos += len;
        Some(&rest[..len])
    }

    fn string(&mut self) -> Result<String, CallError> {
        let rest = self.rest();
        if let Some(body) = rest.strip_prefix("'''") {
            let mut i = 0;
            let bytes = body.as_bytes();
            while i < bytes.len() {
                if bytes[i] == b'\'' {
                    let run = bytes[i..].iter().take_while(|b| **b == b'\'').count();
                    if run >= 3 {
                        let end = i + run - 3;
                        self.pos += 3 + i + run;
                        return Ok(body[..end].to_string());
                    }
                    i += run;
                } else {
                    i += 1;
                }
            }
            return Err(CallError::syntax("unterminated triple-quoted string"));
        }
        let quote = rest.chars().next().expect("caller checked quote");
        let body = &rest[1..];
        match body.find([quote, '\n']) {
            Some(end) if body[end..].starts_with(quote) => {
                self.pos += end + 2;
                Ok(body[..end].to_string())
            }
            _ => Err(CallError::syntax("unbalanced quotes")),
        }
    }

    fn number(&mut self) -> Result<f64, CallError> {
        let rest = self.rest();
        let mut len = usize::from(rest.starts_with('-'));
        let digits = |s: &str| s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
        let int = digits(&rest[len..]);
        if int == 0 {
            return Err(CallError::syntax(format_args!("bad number at column {}", self.pos + 1)));
        }
        len += int;
        if rest[len..].starts_with('.') {
            let frac = digits(&rest[len + 1..]);
            if frac == 0 {
                return Err(CallError::syntax(format_args!("bad number at column {}", self.pos + 1)));
            }
            len += 1 + frac;
        }
        self.pos += len;
        rest[..len]
            .parse()
            .map_err(|_| CallError::syntax("bad number"))
    }

    fn list(&mut self) -> Result<Vec<Arg>, CallError> {
        self.expect('[')?;
        let mut items = Vec::new();
        if self.eat(']') {
            return Ok(items);
        }
        loop {
            self.skip_ws();
            let item = match self.peek() {
                Some('[') => Arg::List(self.list()?),
                Some(c) if c == '-' || c.is_ascii_digit() => Arg::Num(self.number()?),
                _ => return Err(CallError::syntax("list elements must be numbers or lists")),
            };
            items.push(item);
            if self.eat(']') {
                return Ok(items);
            }
            self.expect(',')?;
        }
    }

    fn arg(&mut self) -> Result<Arg, CallError> {
        self.skip_ws();
        match self.peek() {
            Some('\'' | '"') => Ok(Arg::Str(self.string()?)),
            Some('[') => Ok(Arg::List(self.list()?)),
            Some(c) if c == '-' || c.is_ascii_digit() => Ok(Arg::Num(self.number()?)),
            Some(c) if is_ident_start(c) => Ok(Arg::Var(self.ident().unwrap().to_string())),
            Some(c) => Err(CallError::syntax(format_args!("unexpected '{c}'"))),
            None => Err(CallError::syntax("unexpected end of line")),
        }
    }
}

/// Parse the text after `[Act]: `.
pub fn parse_act_line(line: &str) -> Result<ToolCall, CallError> {
    let mut p = Parser { src: line, pos: 0 };
    let first = p
        .ident()
        .ok_or_else(|| CallError::syntax("missing tool name"))?;
    let (assign, tool) = if p.eat('=') {
        let tool = p
            .ident()
            .ok_or_else(|| CallError::syntax("missing tool name"))?;
        (Some(first.to_string()), tool)
    } else {
        (None, first)
    };
    p.expect('(')?;
    let mut args = Vec::new();
    if !p.eat(')') {
        loop {
            args.push(p.arg()?);
            if p.eat(')') {
                break;
            }
            p.expect(',')?;
        }
    }
    p.skip_ws();
    if !p.rest().is_empty() {
        return Err(CallError::syntax(format_args!("trailing input '{}'", p.rest())));
    }
    Ok(ToolCall {
        assign,
        tool: tool.to_string(),
        args,
    })
}

fn render_str(s: &str) -> String {
    if s.contains('\'') || s.contains('\n') {
        format!("'''{s}'''")
    } else {
        format!("'{s}'")
    }
}

fn render_arg(arg: &Arg) -> String {
    match arg {
        Arg::Str(s) => render_str(s),
        Arg::Num(n) => format_number(*n),
        Arg::Var(v) => v.clone(),
        Arg::List(items) => format!(
            "[{}]",
            items.iter().map(render_arg).collect::<Vec<_>>().join(", ")
        ),
    }
}

/// Canonical form: `name = Tool(a, b)`.
pub fn render_call(call: &ToolCall) -> String {
    let args = call.args.iter().map(render_arg).collect::<Vec<_>>().join(", ");
    match &call.assign {
        Some(a) => format!("{a} = {}({args})", call.tool),
        None => format!("{}({args})", call.tool),
    }
}

impl fmt::Display for ToolCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_call(self))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedCall {
    pub call: ToolCall,
    pub args: Vec<Value>,
}

fn as_box(items: &[Arg]) -> Option<Box2D> {
    let nums: Vec<f64> = items
        .iter()
        .map(|a| match a {
            Arg::Num(n) if n.fract() == 0.0 => Some(*n),
            _ => None,
        })
        .collect::<Option<_>>()?;
    match nums[..] {
        [l, t, w, h] if w >= 0.0 && h >= 0.0 => Some(Box2D::new(l as i64, t as i64, w as i64, h as i64)),
        _ => None,
    }
}

/// Value of a literal argument: a flat 4-list is a box, a list of 4-lists
/// a box list.
fn literal_value(arg: &Arg) -> Option<Value> {
    match arg {
        Arg::Str(s) => Some(Value::Text(s.clone())),
        Arg::Num(n) => Some(Value::Number(*n)),
        Arg::List(items) => {
            if let Some(b) = as_box(items) {
                return Some(Value::Box(b));
            }
            let boxes = items
                .iter()
                .map(|i| match i {
                    Arg::List(inner) => as_box(inner),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()?;
            Some(Value::BoxList(BoxList::unlabeled(boxes)))
        }
        Arg::Var(_) => None,
    }
}

fn describe(arg: &Arg) -> &'static str {
    match arg {
        Arg::Str(_) => "text",
        Arg::Num(_) => "number",
        Arg::List(_) => "list",
        Arg::Var(_) => "variable",
    }
}

/// Static checks only; never runs the tool.
pub fn validate(
    call: &ToolCall,
    tools: &dyn ToolLookup,
    store: &VariableStore,
) -> Result<ValidatedCall, CallError> {
    let info = tools
        .lookup(&call.tool)
        .ok_or_else(|| CallError::unknown_tool(&call.tool))?;
    let sig = &info.signature;
    let n = call.args.len();
    if n < sig.min_args || n > sig.max_args() {
        let expects = if sig.min_args == sig.max_args() {
            format!("{}", sig.min_args)
        } else {
            format!("{} to {}", sig.min_args, sig.max_args())
        };
        return Err(CallError::new(
            CallErrorKind::ArityMismatch,
            format!("#ERROR#: Tool {} expects {expects} arguments but got {n}.", call.tool),
        ));
    }
    let mut args = Vec::with_capacity(n);
    for (i, (arg, param)) in call.args.iter().zip(&sig.params).enumerate() {
        let value = match arg {
            Arg::Var(name) => store.get(name).cloned().ok_or_else(|| {
                CallError::new(
                    CallErrorKind::UnknownVariable,
                    format!("#ERROR#: Variable {name} is not defined."),
                )
            })?,
            other => literal_value(other).ok_or_else(|| {
                CallError::new(
                    CallErrorKind::TypeMismatch,
                    format!(
                        "#ERROR#: Argument {} of {} must be {}, got {}.",
                        i + 1,
                        call.tool,
                        param.ty.as_str(),
                        describe(other)
                    ),
                )
            })?,
        };
        if !param.ty.accepts(value.tag()) {
            return Err(CallError::new(
                CallErrorKind::TypeMismatch,
                format!(
                    "#ERROR#: Argument {} of {} must be {}, got {}.",
                    i + 1,
                    call.tool,
                    param.ty.as_str(),
                    value.tag()
                ),
            ));
        }
        args.push(value);
    }
    if let Some(name) = &call.assign {
        if store.contains(name) {
            return Err(CallError::new(
                CallErrorKind::DuplicateVariable,
                format!("#ERROR#: Variable {name} is already defined."),
            ));
        }
        if !crate::value::is_valid_name(name) {
            return Err(CallError::syntax(format_args!("invalid variable name {name}")));
        }
    }
    Ok(ValidatedCall {
        call: call.clone(),
        args,
    })
}
