use super::Span;

/// A set of learned action functions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.iter().map(|f| f.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub span: Span,
    /// The function's own text, from its `def` line through its last body line.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    /// Optional annotation: `str`, `list`, `int`, `bool`, or a domain type
    /// (which is checked as `str`).
    pub ty: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Call { name: String, args: Vec<Expr> },
    For { vars: Vec<String>, iter: Expr, body: Vec<Stmt> },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    Let { name: String, value: Expr },
    Break,
    Assert { cond: Expr, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Len,
    Zip,
    Reverse,
    Slice,
    Pairs,
    /// `list(xs)`: a copy of a list, accepted for Python familiarity.
    List,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "len" => Builtin::Len,
            "zip" => Builtin::Zip,
            "reverse" | "reversed" => Builtin::Reverse,
            "slice" => Builtin::Slice,
            "pairs" => Builtin::Pairs,
            "list" => Builtin::List,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Len => "len",
            Builtin::Zip => "zip",
            Builtin::Reverse => "reverse",
            Builtin::Slice => "slice",
            Builtin::Pairs => "pairs",
            Builtin::List => "list",
        }
    }

    /// Accepted argument counts, inclusive.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Builtin::Len | Builtin::Reverse | Builtin::Pairs | Builtin::List => (1, 1),
            Builtin::Zip => (2, 2),
            Builtin::Slice => (2, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Str(String),
    Int(i64),
    Bool(bool),
    List(Vec<Expr>),
    Var(String),
    Index(Box<Expr>, Box<Expr>),
    Slice(Box<Expr>, Option<Box<Expr>>, Option<Box<Expr>>),
    Builtin(Builtin, Vec<Expr>),
    /// Membership test of a ground atom in the current state.
    Query { predicate: String, args: Vec<Expr> },
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}
