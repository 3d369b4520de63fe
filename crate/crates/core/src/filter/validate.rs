use std::fmt;

use serde::Serialize;

use super::ast::{Combinator, Condition, FilterExpr, Literal};
use crate::schema::{Arity, DataType, Operator, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationError {
    /// Location in the expression, e.g. `$.and[1].or[0]`.
    pub path: String,
    pub code: &'static str,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ValidationError {}

/// Condition with its field resolved and operands typed for the column.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Operands {
    None,
    Int(Vec<i64>),
    Text(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Plan {
    And(Vec<Plan>),
    Or(Vec<Plan>),
    Cond {
        column: usize,
        op: Operator,
        operands: Operands,
    },
}

/// Checks fields, operator admissibility, arity and literal types. An empty
/// result means the expression can be evaluated.
pub fn validate(expr: &FilterExpr, schema: &Schema) -> Vec<ValidationError> {
    match compile(expr, schema) {
        Ok(_) => Vec::new(),
        Err(errors) => errors,
    }
}

pub(crate) fn compile(expr: &FilterExpr, schema: &Schema) -> Result<Plan, Vec<ValidationError>> {
    let mut errors = Vec::new();
    let plan = compile_node(expr, schema, "$", &mut errors);
    match plan {
        Some(p) if errors.is_empty() => Ok(p),
        _ => Err(errors),
    }
}

fn compile_node(
    expr: &FilterExpr,
    schema: &Schema,
    path: &str,
    errors: &mut Vec<ValidationError>,
) -> Option<Plan> {
    match expr {
        FilterExpr::Group {
            combinator,
            children,
        } => {
            if children.is_empty() {
                errors.push(ValidationError {
                    path: path.to_string(),
                    code: "empty_group",
                    message: "empty group".into(),
                });
                return None;
            }
            let key = combinator.as_str();
            let plans: Vec<Option<Plan>> = children
                .iter()
                .enumerate()
                .map(|(i, c)| compile_node(c, schema, &format!("{path}.{key}[{i}]"), errors))
                .collect();
            let plans: Option<Vec<Plan>> = plans.into_iter().collect();
            plans.map(|p| match combinator {
                Combinator::And => Plan::And(p),
                Combinator::Or => Plan::Or(p),
            })
        }
        FilterExpr::Condition(c) => compile_condition(c, schema, path, errors),
    }
}

fn compile_condition(
    c: &Condition,
    schema: &Schema,
    path: &str,
    errors: &mut Vec<ValidationError>,
) -> Option<Plan> {
    let before = errors.len();
    let mut err = |code: &'static str, message: String| {
        errors.push(ValidationError {
            path: path.to_string(),
            code,
            message,
        })
    };
    let Some(column) = schema.index_of(&c.field) else {
        err("unknown_field", format!("unknown field {:?}", c.field));
        return None;
    };
    let field = schema.field_at(column);
    if !field.data_type.allows(c.op) {
        err(
            "operator_not_allowed",
            format!(
                "operator {} not allowed for {} (field {})",
                c.op, field.data_type, field.display_name
            ),
        );
    }
    let arity: Arity = c.op.arity();
    if !arity.accepts(c.args.len()) {
        err(
            "arity",
            format!(
                "operator {} takes {arity} argument(s), got {}",
                c.op,
                c.args.len()
            ),
        );
    }
    let want_int = field.data_type == DataType::Integer;
    for (i, lit) in c.args.iter().enumerate() {
        let ok = matches!((want_int, lit), (true, Literal::Int(_)) | (false, Literal::Text(_)));
        if !ok {
            err(
                "literal_type",
                format!(
                    "argument {i} is {} but field {} is {}",
                    lit.kind(),
                    field.display_name,
                    field.data_type
                ),
            );
        }
    }
    if errors.len() != before {
        return None;
    }
    let operands = if c.args.is_empty() {
        Operands::None
    } else if want_int {
        Operands::Int(
            c.args
                .iter()
                .map(|l| match l {
                    Literal::Int(v) => *v,
                    Literal::Text(_) => unreachable!(),
                })
                .collect(),
        )
    } else {
        Operands::Text(
            c.args
                .iter()
                .map(|l| match l {
                    Literal::Text(s) => s.clone(),
                    Literal::Int(_) => unreachable!(),
                })
                .collect(),
        )
    };
    Some(Plan::Cond {
        column,
        op: c.op,
        operands,
    })
}
