//! Filter expression tree and its JSON-shaped wire format:
//!
//! ```text
//! node := {"and": [node, ...]} | {"or": [node, ...]}
//!       | {"field": name, "op": operator, "args": [literal, ...]}
//! ```

use std::fmt;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::schema::{Arity, Operator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combinator {
    And,
    Or,
}

impl Combinator {
    pub fn as_str(self) -> &'static str {
        match self {
            Combinator::And => "and",
            Combinator::Or => "or",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Int(i64),
    Text(String),
}

impl Literal {
    pub fn kind(&self) -> &'static str {
        match self {
            Literal::Int(_) => "integer",
            Literal::Text(_) => "text",
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Literal::Int(v) => json!(v),
            Literal::Text(s) => json!(s),
        }
    }
}

impl From<i64> for Literal {
    fn from(v: i64) -> Self {
        Literal::Int(v)
    }
}

impl From<&str> for Literal {
    fn from(v: &str) -> Self {
        Literal::Text(v.to_string())
    }
}

impl From<String> for Literal {
    fn from(v: String) -> Self {
        Literal::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Condition {
    /// Source or display name.
    pub field: String,
    pub op: Operator,
    pub args: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FilterExpr {
    Group {
        combinator: Combinator,
        children: Vec<FilterExpr>,
    },
    Condition(Condition),
}

impl FilterExpr {
    pub fn and(children: Vec<FilterExpr>) -> FilterExpr {
        FilterExpr::Group {
            combinator: Combinator::And,
            children,
        }
    }

    pub fn or(children: Vec<FilterExpr>) -> FilterExpr {
        FilterExpr::Group {
            combinator: Combinator::Or,
            children,
        }
    }

    pub fn condition(field: impl Into<String>, op: Operator, args: Vec<Literal>) -> FilterExpr {
        FilterExpr::Condition(Condition {
            field: field.into(),
            op,
            args,
        })
    }

    /// Group nesting depth: a lone condition is 0, a flat group is 1.
    pub fn depth(&self) -> usize {
        match self {
            FilterExpr::Condition(_) => 0,
            FilterExpr::Group { children, .. } => {
                1 + children.iter().map(FilterExpr::depth).max().unwrap_or(0)
            }
        }
    }

    pub fn condition_count(&self) -> usize {
        match self {
            FilterExpr::Condition(_) => 1,
            FilterExpr::Group { children, .. } => children.iter().map(FilterExpr::condition_count).sum(),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            FilterExpr::Group {
                combinator,
                children,
            } => {
                let mut m = Map::new();
                m.insert(
                    combinator.as_str().to_string(),
                    Json::Array(children.iter().map(FilterExpr::to_json).collect()),
                );
                Json::Object(m)
            }
            FilterExpr::Condition(c) => json!({
                "field": c.field,
                "op": c.op.as_str(),
                "args": c.args.iter().map(Literal::to_json).collect::<Vec<_>>(),
            }),
        }
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

impl serde::Serialize for FilterExpr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Shape { path: String, message: String },
    #[error("{path}: unknown operator {op:?}")]
    UnknownOperator { path: String, op: String },
    #[error("{path}: empty group")]
    EmptyGroup { path: String },
    #[error("{path}: operator {op} takes {expected} argument(s), got {got}")]
    Arity {
        path: String,
        op: Operator,
        expected: Arity,
        got: usize,
    },
    #[error("{path}: {message}")]
    Literal { path: String, message: String },
}

impl ParseError {
    pub fn path(&self) -> Option<&str> {
        match self {
            ParseError::Syntax { .. } => None,
            ParseError::Shape { path, .. }
            | ParseError::UnknownOperator { path, .. }
            | ParseError::EmptyGroup { path }
            | ParseError::Arity { path, .. }
            | ParseError::Literal { path, .. } => Some(path),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "syntax_error",
            ParseError::Shape { .. } => "malformed_node",
            ParseError::UnknownOperator { .. } => "unknown_operator",
            ParseError::EmptyGroup { .. } => "empty_group",
            ParseError::Arity { .. } => "arity",
            ParseError::Literal { .. } => "bad_literal",
        }
    }
}

/// Parses the textual wire format.
pub fn parse_filter(text: &str) -> Result<FilterExpr, ParseError> {
    let json: Json = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    parse_filter_json(&json)
}

/// Parses an already-decoded JSON node.
pub fn parse_filter_json(json: &Json) -> Result<FilterExpr, ParseError> {
    parse_node(json, "$")
}

fn shape(path: &str, message: impl Into<String>) -> ParseError {
    ParseError::Shape {
        path: path.to_string(),
        message: message.into(),
    }
}

fn parse_node(json: &Json, path: &str) -> Result<FilterExpr, ParseError> {
    let obj = json
        .as_object()
        .ok_or_else(|| shape(path, "expected an object node"))?;
    for key in ["and", "or"] {
        if let Some(children) = obj.get(key) {
            if obj.len() != 1 {
                return Err(shape(path, format!("group node must have only the {key:?} key")));
            }
            let combinator = if key == "and" {
                Combinator::And
            } else {
                Combinator::Or
            };
            let list = children
                .as_array()
                .ok_or_else(|| shape(path, format!("{key:?} must hold an array")))?;
            if list.is_empty() {
                return Err(ParseError::EmptyGroup {
                    path: path.to_string(),
                });
            }
            let children = list
                .iter()
                .enumerate()
                .map(|(i, c)| parse_node(c, &format!("{path}.{key}[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(FilterExpr::Group {
                combinator,
                children,
            });
        }
    }

    if let Some(extra) = obj.keys().find(|k| !matches!(k.as_str(), "field" | "op" | "args")) {
        return Err(shape(path, format!("unexpected key {extra:?}")));
    }
    let field = obj
        .get("field")
        .ok_or_else(|| shape(path, "condition needs \"field\""))?
        .as_str()
        .ok_or_else(|| shape(path, "\"field\" must be a string"))?;
    let op_text = obj
        .get("op")
        .ok_or_else(|| shape(path, "condition needs \"op\""))?
        .as_str()
        .ok_or_else(|| shape(path, "\"op\" must be a string"))?;
    let op: Operator = op_text.parse().map_err(|_| ParseError::UnknownOperator {
        path: path.to_string(),
        op: op_text.to_string(),
    })?;
    let args = match obj.get("args") {
        None => Vec::new(),
        Some(Json::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| parse_literal(v, &format!("{path}.args[{i}]")))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(shape(path, "\"args\" must be an array")),
    };
    if !op.arity().accepts(args.len()) {
        return Err(ParseError::Arity {
            path: path.to_string(),
            op,
            expected: op.arity(),
            got: args.len(),
        });
    }
    Ok(FilterExpr::Condition(Condition {
        field: field.to_string(),
        op,
        args,
    }))
}

fn parse_literal(json: &Json, path: &str) -> Result<Literal, ParseError> {
    let bad = |message: &str| ParseError::Literal {
        path: path.to_string(),
        message: message.to_string(),
    };
    match json {
        Json::String(s) => Ok(Literal::Text(s.clone())),
        Json::Number(n) => n
            .as_i64()
            .map(Literal::Int)
            .ok_or_else(|| bad("numbers must be integers within the 64-bit range")),
        _ => Err(bad("arguments must be strings or integers")),
    }
}
