//! Radial expressions.
//!
//! Every bound function of a constellation (the warping `w`, and the
//! bounds `g`, `lambda`, `h`) is a smooth function of the radial variable
//! `r` alone. They are written in a small expression language, parsed
//! once into an immutable tree, and evaluated with exact first and second
//! derivatives by forward-mode propagation of [`Jet2`] triplets.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := unary ("^" factor)?
//! unary  := "-"? atom
//! atom   := number | "r" | ident "(" expr ")" | "(" expr ")"
//! ```
//!
//! Note that unary minus binds tighter than `^`, so `-r^2` is `(-r)^2`.

mod jet;
mod parse;

use std::fmt;
use std::str::FromStr;

pub use jet::Jet2;

use crate::error::{Error, Result};

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Coth,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Coth,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Coth => "coth",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Expression tree over the radial variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn num(v: f64) -> Node {
        Node::Num(v)
    }

    pub fn neg(a: Node) -> Node {
        Node::Neg(Box::new(a))
    }

    pub fn binary(op: BinOp, a: Node, b: Node) -> Node {
        Node::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Node) -> Node {
        Node::Call(f, Box::new(a))
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Num(_) | Node::Var => 1,
            Node::Neg(a) | Node::Call(_, a) => 1 + a.depth(),
            Node::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    // Binding levels used by the printer: sums 1, products 2, powers 3,
    // unary minus 4, atoms 5.
    fn level(&self) -> u8 {
        match self {
            Node::Num(v) if *v < 0.0 || v.is_sign_negative() => 4,
            Node::Num(_) | Node::Var | Node::Call(..) => 5,
            Node::Neg(_) => 4,
            Node::Binary(BinOp::Pow, ..) => 3,
            Node::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Node::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_level: u8) -> fmt::Result {
        if self.level() < min_level {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Node::Num(v) if v.is_sign_negative() => {
                // Only reachable for hand-built trees; the parser never
                // produces negative literals.
                write!(f, "-")?;
                Node::Num(-v).write_at(f, 5)
            }
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var => write!(f, "r"),
            Node::Neg(a) => {
                write!(f, "-")?;
                a.write_at(f, 5)
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_at(f, 0)?;
                write!(f, ")")
            }
            Node::Binary(op, a, b) => {
                let (left, right) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (4, 3),
                };
                a.write_at(f, left)?;
                match op {
                    BinOp::Pow => write!(f, "^")?,
                    _ => write!(f, " {} ", op.symbol())?,
                }
                b.write_at(f, right)
            }
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

/// A parsed radial function `r -> f(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialExpr {
    root: Node,
}

impl RadialExpr {
    pub fn parse(text: &str) -> Result<Self> {
        parse::parse(text).map(|root| RadialExpr { root })
    }

    pub fn from_node(root: Node) -> Self {
        RadialExpr { root }
    }

    pub fn constant(v: f64) -> Self {
        RadialExpr { root: Node::Num(v) }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    /// Value and first two derivatives at `r`.
    pub fn eval_jet2(&self, r: f64) -> Result<Jet2> {
        jet::eval(&self.root, r)
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        self.eval_jet2(r).map(|j| j.value)
    }

    /// True when the tree contains no occurrence of `r`.
    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Binary(_, a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.root)
    }
}

impl FromStr for RadialExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RadialExpr::parse(s)
    }
}

impl fmt::Display for RadialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
