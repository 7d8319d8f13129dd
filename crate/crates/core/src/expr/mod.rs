//! Scalar expressions over a declared coordinate list.
//!
//! Every function a user hands to the toolkit (Hamiltonians, generating
//! functions, Casimirs, bivector entries, coordinate maps) is an
//! [`Expression`]. Values, gradients and Hessians are propagated exactly
//! through the tree by forward-mode differentiation (see [`jet`]), never by
//! finite differences.

mod jet;
mod parser;
mod predicate;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use jet::{Jet1, Jet2};
pub use parser::{parse, parse_predicate, validate_coordinates};
pub use predicate::{Comparison, Predicate};

/// Built-in function names. These may not be used as coordinate names.
pub const FUNCTIONS: [&str; 7] = ["sin", "cos", "tan", "exp", "ln", "sqrt", "atan2"];

/// Identifiers that are reserved by the grammar.
pub const RESERVED: [&str; 3] = ["pi", "and", "or"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("function `{function}` takes {expected} argument(s), got {got}")]
    Arity {
        function: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid coordinate list: {0}")]
    InvalidCoordinates(String),
    #[error("`{node}` is undefined at z = {point:?}")]
    Domain { node: String, point: Vec<f64> },
    #[error("expected a point of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Unary function nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Constant(f64),
    Coordinate(usize),
    Negate(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    Atan2(Box<Node>, Box<Node>),
}

impl Node {
    pub fn neg(a: Node) -> Node {
        Node::Negate(Box::new(a))
    }
    pub fn add(a: Node, b: Node) -> Node {
        Node::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Node, b: Node) -> Node {
        Node::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: Node, b: Node) -> Node {
        Node::Mul(Box::new(a), Box::new(b))
    }
    pub fn div(a: Node, b: Node) -> Node {
        Node::Div(Box::new(a), Box::new(b))
    }
    pub fn pow(a: Node, b: Node) -> Node {
        Node::Pow(Box::new(a), Box::new(b))
    }
    pub fn call(f: Func, a: Node) -> Node {
        Node::Call(f, Box::new(a))
    }
    pub fn atan2(y: Node, x: Node) -> Node {
        Node::Atan2(Box::new(y), Box::new(x))
    }

    /// True when the subtree references no coordinate.
    pub fn is_constant(&self) -> bool {
        match self {
            Node::Constant(_) => true,
            Node::Coordinate(_) => false,
            Node::Negate(a) | Node::Call(_, a) => a.is_constant(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b)
            | Node::Atan2(a, b) => a.is_constant() && b.is_constant(),
        }
    }

    fn max_coordinate(&self) -> Option<usize> {
        match self {
            Node::Constant(_) => None,
            Node::Coordinate(i) => Some(*i),
            Node::Negate(a) | Node::Call(_, a) => a.max_coordinate(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b)
            | Node::Atan2(a, b) => a.max_coordinate().max(b.max_coordinate()),
        }
    }

    fn map_coordinates(&self, f: &dyn Fn(usize) -> Node) -> Node {
        let m = |n: &Node| Box::new(n.map_coordinates(f));
        match self {
            Node::Constant(c) => Node::Constant(*c),
            Node::Coordinate(i) => f(*i),
            Node::Negate(a) => Node::Negate(m(a)),
            Node::Call(g, a) => Node::Call(*g, m(a)),
            Node::Add(a, b) => Node::Add(m(a), m(b)),
            Node::Sub(a, b) => Node::Sub(m(a), m(b)),
            Node::Mul(a, b) => Node::Mul(m(a), m(b)),
            Node::Div(a, b) => Node::Div(m(a), m(b)),
            Node::Pow(a, b) => Node::Pow(m(a), m(b)),
            Node::Atan2(a, b) => Node::Atan2(m(a), m(b)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Constant(_) | Node::Coordinate(_) => 1,
            Node::Negate(a) | Node::Call(_, a) => 1 + a.depth(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b)
            | Node::Atan2(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// A parsed scalar formula over `arity` coordinates.
///
/// The tree is shared behind an `Arc`, so clones are cheap and an expression
/// can be evaluated from many threads at once.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Arc<Node>,
    arity: usize,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity && self.root == other.root
    }
}

impl Expression {
    /// Wrap a node. Fails if the node references a coordinate `>= arity`.
    pub fn new(root: Node, arity: usize) -> Result<Self, ExprError> {
        if let Some(i) = root.max_coordinate() {
            if i >= arity {
                return Err(ExprError::InvalidCoordinates(format!(
                    "coordinate index {i} out of range for arity {arity}"
                )));
            }
        }
        Ok(Expression {
            root: Arc::new(root),
            arity,
        })
    }

    pub fn constant(value: f64, arity: usize) -> Self {
        Expression {
            root: Arc::new(Node::Constant(value)),
            arity,
        }
    }

    /// The `index`-th coordinate function.
    pub fn coordinate(index: usize, arity: usize) -> Self {
        assert!(index < arity, "coordinate {index} out of range for arity {arity}");
        Expression {
            root: Arc::new(Node::Coordinate(index)),
            arity,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }

    /// Rewrite coordinate `i` as coordinate `map[i]` of a space of dimension `arity`.
    pub fn reindex(&self, map: &[usize], arity: usize) -> Result<Self, ExprError> {
        if map.len() != self.arity {
            return Err(ExprError::Dimension {
                expected: self.arity,
                got: map.len(),
            });
        }
        Expression::new(self.root.map_coordinates(&|i| Node::Coordinate(map[i])), arity)
    }

    /// Substitute `args[i]` for coordinate `i`; the result lives on the
    /// common arity of the arguments.
    pub fn compose(&self, args: &[Expression]) -> Result<Self, ExprError> {
        if args.len() != self.arity {
            return Err(ExprError::Dimension {
                expected: self.arity,
                got: args.len(),
            });
        }
        let arity = match args.first() {
            Some(a) => a.arity,
            None => 0,
        };
        if args.iter().any(|a| a.arity != arity) {
            return Err(ExprError::InvalidCoordinates(
                "composition arguments have different arities".into(),
            ));
        }
        let root = self.root.map_coordinates(&|i| (*args[i].root).clone());
        Expression::new(root, arity)
    }

    /// Value only. Square roots at zero are allowed here.
    pub fn eval(&self, z: &[f64]) -> Result<f64, ExprError> {
        self.check_point(z)?;
        jet::evaluate::<f64>(&self.root, z)
    }

    /// Value and gradient.
    pub fn eval_jet1(&self, z: &[f64]) -> Result<Jet1, ExprError> {
        self.check_point(z)?;
        jet::evaluate::<Jet1>(&self.root, z)
    }

    /// Value, gradient and Hessian.
    pub fn eval_jet2(&self, z: &[f64]) -> Result<Jet2, ExprError> {
        self.check_point(z)?;
        jet::evaluate::<Jet2>(&self.root, z)
    }

    fn check_point(&self, z: &[f64]) -> Result<(), ExprError> {
        if z.len() != self.arity {
            return Err(ExprError::Dimension {
                expected: self.arity,
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Render with the given coordinate names; the output re-parses to the
    /// same tree whenever all constants are non-negative (true for every
    /// parser output).
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay {
            node: &self.root,
            names: Some(names),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        ExprDisplay {
            node: &self.root,
            names: None,
        }
        .fmt(f)
    }
}

/// Printer returned by [`Expression::display_with`]. Without names,
/// coordinates print as `x0, x1, ...`.
pub struct ExprDisplay<'a> {
    node: &'a Node,
    names: Option<&'a [String]>,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, self.node, self.names, 0)
    }
}

// precedence levels: 1 additive, 2 multiplicative, 3 unary minus, 4 power, 5 atom
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Negate(_) => 3,
        Node::Pow(..) => 4,
        Node::Constant(c) if *c < 0.0 || c.is_sign_negative() => 3,
        _ => 5,
    }
}

fn write_node(
    f: &mut fmt::Formatter<'_>,
    node: &Node,
    names: Option<&[String]>,
    min_prec: u8,
) -> fmt::Result {
    if precedence(node) < min_prec {
        f.write_str("(")?;
        write_node(f, node, names, 0)?;
        return f.write_str(")");
    }
    match node {
        Node::Constant(c) => {
            if *c == std::f64::consts::PI {
                f.write_str("pi")
            } else if c.is_sign_negative() {
                write!(f, "-{:?}", -c)
            } else {
                write!(f, "{c:?}")
            }
        }
        Node::Coordinate(i) => match names {
            Some(n) => f.write_str(&n[*i]),
            None => write!(f, "x{i}"),
        },
        Node::Negate(a) => {
            f.write_str("-")?;
            write_node(f, a, names, 3)
        }
        Node::Add(a, b) => binary(f, a, " + ", b, names, 1),
        Node::Sub(a, b) => binary(f, a, " - ", b, names, 1),
        Node::Mul(a, b) => binary(f, a, "*", b, names, 2),
        Node::Div(a, b) => binary(f, a, "/", b, names, 2),
        Node::Pow(a, b) => {
            write_node(f, a, names, 5)?;
            f.write_str("^")?;
            write_node(f, b, names, 3)
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, names, 0)?;
            f.write_str(")")
        }
        Node::Atan2(y, x) => {
            f.write_str("atan2(")?;
            write_node(f, y, names, 0)?;
            f.write_str(", ")?;
            write_node(f, x, names, 0)?;
            f.write_str(")")
        }
    }
}

fn binary(
    f: &mut fmt::Formatter<'_>,
    a: &Node,
    op: &str,
    b: &Node,
    names: Option<&[String]>,
    prec: u8,
) -> fmt::Result {
    write_node(f, a, names, prec)?;
    f.write_str(op)?;
    write_node(f, b, names, prec + 1)
}
