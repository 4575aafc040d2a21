//! Scalar expressions over the ambient coordinates `x0, x1, ...`.
//!
//! An [`Expression`] is an immutable, reference-counted tree. Cloning is
//! cheap, and all operations are pure, so expressions can be shared freely
//! between threads. The node set is closed under differentiation: powers are
//! restricted to nonnegative integer exponents.

mod calculus;
mod parse;

use std::fmt;
use std::sync::Arc;

pub use calculus::{add, div, mul, pow, sub};
pub use parse::parse;

use crate::error::ExprError;

/// One node of an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Add(Expression, Expression),
    Sub(Expression, Expression),
    Mul(Expression, Expression),
    Div(Expression, Expression),
    Pow(Expression, u32),
    Sin(Expression),
    Cos(Expression),
    Exp(Expression),
}

/// A smooth scalar function of the coordinates.
#[derive(Clone, PartialEq)]
pub struct Expression(Arc<Node>);

impl Expression {
    pub fn new(node: Node) -> Self {
        Expression(Arc::new(node))
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Node::Const(value))
    }

    pub fn var(index: usize) -> Self {
        Self::new(Node::Var(index))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Evaluates the expression at `point`.
    ///
    /// Fails on division by zero and on variables outside `point`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        Ok(match self.node() {
            Node::Const(c) => *c,
            Node::Var(i) => *point.get(*i).ok_or(ExprError::VariableOutOfRange {
                index: *i,
                dimension: point.len(),
            })?,
            Node::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Node::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Node::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Node::Div(a, b) => {
                let den = b.eval(point)?;
                if den == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                a.eval(point)? / den
            }
            Node::Pow(b, n) => b.eval(point)?.powi(*n as i32),
            Node::Sin(a) => a.eval(point)?.sin(),
            Node::Cos(a) => a.eval(point)?.cos(),
            Node::Exp(a) => a.eval(point)?.exp(),
        })
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
            Node::Pow(a, _) | Node::Sin(a) | Node::Cos(a) | Node::Exp(a) => a.max_var(),
        }
    }

    /// Polynomial degree in variable `var`, or `None` when the expression is
    /// not polynomial in it. This is the structural degree: cancellations
    /// between terms are not detected.
    pub fn degree_in(&self, var: usize) -> Option<u32> {
        match self.node() {
            Node::Const(_) => Some(0),
            Node::Var(i) => Some(u32::from(*i == var)),
            Node::Add(a, b) | Node::Sub(a, b) => Some(a.degree_in(var)?.max(b.degree_in(var)?)),
            Node::Mul(a, b) => Some(a.degree_in(var)? + b.degree_in(var)?),
            Node::Div(a, b) => match b.degree_in(var)? {
                0 => a.degree_in(var),
                _ => None,
            },
            Node::Pow(a, n) => Some(a.degree_in(var)? * n),
            Node::Sin(a) | Node::Cos(a) | Node::Exp(a) => match a.degree_in(var)? {
                0 => Some(0),
                _ => None,
            },
        }
    }

    /// Number of nodes in the tree (shared subtrees counted each time).
    pub fn size(&self) -> usize {
        1 + match self.node() {
            Node::Const(_) | Node::Var(_) => 0,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.size() + b.size()
            }
            Node::Pow(a, _) | Node::Sin(a) | Node::Cos(a) | Node::Exp(a) => a.size(),
        }
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Pow(..) => 4,
            _ => 5,
        }
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expression, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // `{:?}` is the shortest round-tripping form; it may use exponent notation.
    let s = format!("{c:?}");
    if c < 0.0 {
        write!(f, "({s})")
    } else {
        f.write_str(&s)
    }
}

/// Canonical printer. The output parses back to an equivalent tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write_number(f, *c),
            Node::Var(i) => write!(f, "x{i}"),
            Node::Add(a, b) => {
                write_operand(f, a, 1)?;
                f.write_str(" + ")?;
                write_operand(f, b, 2)
            }
            Node::Sub(a, b) => {
                write_operand(f, a, 1)?;
                f.write_str(" - ")?;
                write_operand(f, b, 2)
            }
            Node::Mul(a, b) => {
                write_operand(f, a, 2)?;
                f.write_str(" * ")?;
                write_operand(f, b, 3)
            }
            Node::Div(a, b) => {
                write_operand(f, a, 2)?;
                f.write_str(" / ")?;
                write_operand(f, b, 3)
            }
            Node::Pow(a, n) => {
                write_operand(f, a, 5)?;
                write!(f, "^{n}")
            }
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
        }
    }
}
