//! A mini SSA intermediate representation and a parser for a restricted
//! subset of LLVM-IR text.

mod lexer;
mod parser;
mod printer;
mod types;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parser::parse_module;
pub use printer::print_module;
pub use types::{DataType, TypeError};
pub use validate::validate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValueId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstrId(pub u32);

/// Index of a block within its function's block list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FuncId(pub u32);

impl ValueId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl FuncId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    Variable,
    Constant,
}

/// Payload of a constant. Floats are stored as raw bits so constants can be
/// interned by equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstPayload {
    Int(i64),
    Float(u64),
    /// Address of a global variable, a link-time constant.
    Symbol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    Global,
    Function(FuncId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Value {
    pub id: ValueId,
    pub kind: ValueKind,
    pub dtype: DataType,
    pub literal: Option<ConstPayload>,
    pub scope: Scope,
    /// Source name without sigil, for variables.
    pub name: Option<String>,
    /// For global symbols, the initialiser constant.
    pub init: Option<ValueId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Opcode {
    Add,
    Sub,
    Mul,
    SDiv,
    UDiv,
    SRem,
    And,
    Or,
    Xor,
    Shl,
    LShr,
    AShr,
    FAdd,
    FSub,
    FMul,
    FDiv,
    ICmp,
    FCmp,
    Load,
    Store,
    Alloca,
    GetElementPtr,
    Call,
    Phi,
    Br,
    Switch,
    Ret,
}

impl Opcode {
    pub const ALL: [Opcode; 27] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::SDiv,
        Opcode::UDiv,
        Opcode::SRem,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Shl,
        Opcode::LShr,
        Opcode::AShr,
        Opcode::FAdd,
        Opcode::FSub,
        Opcode::FMul,
        Opcode::FDiv,
        Opcode::ICmp,
        Opcode::FCmp,
        Opcode::Load,
        Opcode::Store,
        Opcode::Alloca,
        Opcode::GetElementPtr,
        Opcode::Call,
        Opcode::Phi,
        Opcode::Br,
        Opcode::Switch,
        Opcode::Ret,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::SDiv => "sdiv",
            Opcode::UDiv => "udiv",
            Opcode::SRem => "srem",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Xor => "xor",
            Opcode::Shl => "shl",
            Opcode::LShr => "lshr",
            Opcode::AShr => "ashr",
            Opcode::FAdd => "fadd",
            Opcode::FSub => "fsub",
            Opcode::FMul => "fmul",
            Opcode::FDiv => "fdiv",
            Opcode::ICmp => "icmp",
            Opcode::FCmp => "fcmp",
            Opcode::Load => "load",
            Opcode::Store => "store",
            Opcode::Alloca => "alloca",
            Opcode::GetElementPtr => "getelementptr",
            Opcode::Call => "call",
            Opcode::Phi => "phi",
            Opcode::Br => "br",
            Opcode::Switch => "switch",
            Opcode::Ret => "ret",
        }
    }

    pub fn from_name(name: &str) -> Option<Opcode> {
        Opcode::ALL.into_iter().find(|op| op.as_str() == name)
    }

    pub fn is_binary(self) -> bool {
        matches!(
            self,
            Opcode::Add
                | Opcode::Sub
                | Opcode::Mul
                | Opcode::SDiv
                | Opcode::UDiv
                | Opcode::SRem
                | Opcode::And
                | Opcode::Or
                | Opcode::Xor
                | Opcode::Shl
                | Opcode::LShr
                | Opcode::AShr
                | Opcode::FAdd
                | Opcode::FSub
                | Opcode::FMul
                | Opcode::FDiv
        )
    }

    pub fn is_terminator(self) -> bool {
        matches!(self, Opcode::Br | Opcode::Switch | Opcode::Ret)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: InstrId,
    pub opcode: Opcode,
    /// Comparison predicate for `icmp`/`fcmp`.
    pub predicate: Option<String>,
    pub operands: Vec<ValueId>,
    pub result: Option<ValueId>,
    pub block: BlockId,
    /// Control successors, terminators only. `br` lists true then false;
    /// `switch` lists the default then each case.
    pub successors: Vec<BlockId>,
    pub callee: Option<FuncId>,
    /// Incoming blocks of a `phi`, parallel to `operands`.
    pub incoming: Vec<BlockId>,
    /// Source element type of `getelementptr` and allocated type of `alloca`.
    pub elem_type: Option<DataType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    /// Empty for an unnamed entry block.
    pub label: String,
    pub instructions: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Function {
    pub id: FuncId,
    pub name: String,
    pub ret_type: DataType,
    pub params: Vec<ValueId>,
    /// Parameter types; for declarations these are the only record of arity.
    pub param_types: Vec<DataType>,
    pub blocks: Vec<Block>,
    pub external: bool,
    pub externally_visible: bool,
}

impl Function {
    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.blocks.iter().flat_map(|b| b.instructions.iter())
    }

    pub fn entry_block(&self) -> Option<&Block> {
        self.blocks.first()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IrModule {
    pub functions: Vec<Function>,
    /// Global symbols, in definition order.
    pub globals: Vec<ValueId>,
    /// Value arena indexed by [`ValueId`].
    pub values: Vec<Value>,
    pub source_id: String,
}

impl IrModule {
    pub fn value(&self, id: ValueId) -> &Value {
        &self.values[id.index()]
    }

    pub fn function(&self, id: FuncId) -> &Function {
        &self.functions[id.index()]
    }

    pub fn function_by_name(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn instruction_count(&self) -> usize {
        self.functions.iter().map(|f| f.instructions().count()).sum()
    }
}

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    SyntaxError,
    SsaViolation,
    UnknownOpcode,
    DanglingReference,
    DuplicateFunction,
    EmptyFunction,
    MissingTerminator,
    MisplacedTerminator,
    MissingReturn,
    EntryHasPredecessors,
    UnreachableBlock,
    SelfLoop,
    ArityMismatch,
    ScopeViolation,
    TypeMismatch,
}

/// Where in a module a diagnostic applies.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Location {
    pub function: Option<String>,
    pub block: Option<String>,
    pub instruction: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    pub span: Option<Span>,
    pub location: Location,
}

impl Diagnostic {
    pub fn at(kind: DiagnosticKind, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            message: message.into(),
            span: Some(span),
            location: Location::default(),
        }
    }

    /// Renders as `file:line:col: kind: message`.
    pub fn render(&self, file: &str) -> String {
        let (line, col) = self.span.map_or((0, 0), |s| (s.line, s.col));
        let mut out = format!("{file}:{line}:{col}: {:?}: {}", self.kind, self.message);
        if let Some(f) = &self.location.function {
            out.push_str(&format!(" (in @{f}"));
            if let Some(b) = &self.location.block {
                out.push_str(&format!(", block `{b}`"));
            }
            if let Some(i) = self.location.instruction {
                out.push_str(&format!(", instruction {i}"));
            }
            out.push(')');
        }
        out
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render("<input>"))
    }
}
