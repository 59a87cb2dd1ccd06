use std::collections::HashMap;
#[cfg(test)]
use std::collections::HashSet;

use super::lexer::{tokenize, Tok, Token};
use super::types::{is_base_name, DataType};
use super::validate::{check, Finding};
use super::{
    Block, BlockId, ConstPayload, Diagnostic, DiagnosticKind, FuncId, Function, InstrId, Instruction, IrModule, Opcode,
    Scope, Span, Value, ValueId, ValueKind,
};

const PLACEHOLDER: ValueId = ValueId(u32::MAX);
const NO_BLOCK: BlockId = BlockId(u32::MAX);
const NO_FUNC: FuncId = FuncId(u32::MAX);

/// Parses restricted LLVM-IR text into a validated module.
///
/// On failure every diagnostic found is returned: syntax errors stop the
/// parse, while reference, SSA and structural problems are collected.
pub fn parse_module(text: &str, source_id: &str) -> Result<IrModule, Vec<Diagnostic>> {
    let tokens = tokenize(text).map_err(|d| vec![d])?;
    let mut parser = Parser::new(&tokens, source_id);
    if let Err(d) = parser.parse_top_level() {
        parser.diags.push(d);
        return Err(parser.diags);
    }
    parser.resolve_module_refs();
    if !parser.diags.is_empty() {
        return Err(parser.diags);
    }
    let findings = check(&parser.module);
    if findings.is_empty() {
        Ok(parser.module)
    } else {
        Err(findings.into_iter().map(|f| parser.attach_span(f)).collect())
    }
}

enum Operand {
    Resolved(ValueId),
    Local(String, Span),
    Global(String, Span),
}

#[derive(Clone, Copy)]
enum Slot {
    Operand(usize),
    Successor(usize),
    Incoming(usize),
}

struct LocalFixup {
    block: usize,
    instr: usize,
    slot: Slot,
    name: String,
    span: Span,
}

struct ModuleFixup {
    func: FuncId,
    block: usize,
    instr: usize,
    slot: ModuleSlot,
    name: String,
    span: Span,
}

enum ModuleSlot {
    Operand(usize),
    Callee,
}

/// Per-function name tables.
#[derive(Default)]
struct FnScope {
    locals: HashMap<String, ValueId>,
    labels: HashMap<String, BlockId>,
    fixups: Vec<LocalFixup>,
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    module: IrModule,
    diags: Vec<Diagnostic>,
    constants: HashMap<(DataType, ConstPayload), ValueId>,
    functions: HashMap<String, FuncId>,
    globals: HashMap<String, ValueId>,
    fixups: Vec<ModuleFixup>,
    instr_spans: HashMap<InstrId, Span>,
    func_spans: HashMap<FuncId, Span>,
    block_spans: HashMap<(FuncId, BlockId), Span>,
    next_instr: u32,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'t> Parser<'t> {
    fn new(toks: &'t [Token], source_id: &str) -> Self {
        Parser {
            toks,
            pos: 0,
            module: IrModule {
                source_id: source_id.to_string(),
                ..IrModule::default()
            },
            diags: Vec::new(),
            constants: HashMap::new(),
            functions: HashMap::new(),
            globals: HashMap::new(),
            fixups: Vec::new(),
            instr_spans: HashMap::new(),
            func_spans: HashMap::new(),
            block_spans: HashMap::new(),
            next_instr: 0,
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::at(DiagnosticKind::SyntaxError, self.span(), msg))
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Local(n) => format!("`%{n}`"),
            Tok::Global(n) => format!("`@{n}`"),
            Tok::Ident(n) => format!("`{n}`"),
            Tok::Label(n) => format!("label `{n}:`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Float(v) => format!("`{v}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Star => "`*`".into(),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect(&mut self, want: Tok) -> PResult<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!(
                "expected {}, found {}",
                Self::describe(&want),
                Self::describe(self.peek())
            ))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", Self::describe(self.peek())))
        }
    }

    fn expect_local(&mut self) -> PResult<(String, Span)> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Local(n) => {
                self.bump();
                Ok((n, span))
            }
            other => self.error(format!("expected a local name, found {}", Self::describe(&other))),
        }
    }

    fn parse_type(&mut self) -> PResult<DataType> {
        let mut text = match self.peek().clone() {
            Tok::Ident(name) if is_base_name(&name) => {
                self.bump();
                name
            }
            Tok::LBracket => {
                self.bump();
                let len = match self.peek().clone() {
                    Tok::Int(n) if n >= 0 => n,
                    other => return self.error(format!("expected array length, found {}", Self::describe(&other))),
                };
                self.bump();
                self.expect_keyword("x")?;
                let elem = self.parse_type()?;
                self.expect(Tok::RBracket)?;
                format!("[{len} x {elem}]")
            }
            other => return self.error(format!("expected a type, found {}", Self::describe(&other))),
        };
        while *self.peek() == Tok::Star {
            if text == "void" || text == "label" {
                return self.error(format!("pointer to `{text}` is not a valid type"));
            }
            self.bump();
            text.push('*');
        }
        Ok(DataType::from_canonical(text))
    }

    fn skip_align(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Comma && matches!(self.peek_at(1), Tok::Ident(w) if w == "align") {
            self.bump();
            self.bump();
            match self.peek() {
                Tok::Int(_) => {
                    self.bump();
                }
                _ => return self.error("expected alignment value"),
            }
        }
        Ok(())
    }

    // ---- values ----

    fn new_value(&mut self, value: Value) -> ValueId {
        let id = ValueId(self.module.values.len() as u32);
        self.module.values.push(Value { id, ..value });
        id
    }

    fn intern_constant(&mut self, dtype: DataType, payload: ConstPayload) -> ValueId {
        if let Some(&id) = self.constants.get(&(dtype.clone(), payload.clone())) {
            return id;
        }
        let id = self.new_value(Value {
            id: PLACEHOLDER,
            kind: ValueKind::Constant,
            dtype: dtype.clone(),
            literal: Some(payload.clone()),
            scope: Scope::Global,
            name: None,
            init: None,
        });
        self.constants.insert((dtype, payload), id);
        id
    }

    fn parse_literal(&mut self, ty: &DataType) -> PResult<Option<ValueId>> {
        let span = self.span();
        let payload = match self.peek().clone() {
            Tok::Int(v) => {
                if ty.is_float() {
                    ConstPayload::Float((v as f64).to_bits())
                } else if ty.is_integer() {
                    ConstPayload::Int(v)
                } else {
                    return Err(Diagnostic::at(
                        DiagnosticKind::TypeMismatch,
                        span,
                        format!("integer literal for type `{ty}`"),
                    ));
                }
            }
            Tok::Float(v) => {
                if !ty.is_float() {
                    return Err(Diagnostic::at(
                        DiagnosticKind::TypeMismatch,
                        span,
                        format!("float literal for type `{ty}`"),
                    ));
                }
                ConstPayload::Float(v.to_bits())
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                if ty.as_str() != "i1" {
                    return Err(Diagnostic::at(
                        DiagnosticKind::TypeMismatch,
                        span,
                        format!("boolean literal for type `{ty}`"),
                    ));
                }
                ConstPayload::Int(i64::from(w == "true"))
            }
            _ => return Ok(None),
        };
        self.bump();
        Ok(Some(self.intern_constant(ty.clone(), payload)))
    }

    fn parse_operand(&mut self, ty: &DataType, scope: &FnScope) -> PResult<Operand> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Local(name) => {
                self.bump();
                Ok(match scope.locals.get(&name) {
                    Some(&id) => Operand::Resolved(id),
                    None => Operand::Local(name, span),
                })
            }
            Tok::Global(name) => {
                self.bump();
                Ok(match self.globals.get(&name) {
                    Some(&id) => Operand::Resolved(id),
                    None => Operand::Global(name, span),
                })
            }
            Tok::Ident(w) if w == "undef" || w == "poison" || w == "null" || w == "zeroinitializer" => {
                Err(Diagnostic::at(
                    DiagnosticKind::SyntaxError,
                    span,
                    format!("`{w}` values are not supported"),
                ))
            }
            _ => match self.parse_literal(ty)? {
                Some(id) => Ok(Operand::Resolved(id)),
                None => self.error(format!("expected an operand, found {}", Self::describe(self.peek()))),
            },
        }
    }

    // ---- top level ----

    fn parse_top_level(&mut self) -> PResult<()> {
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(()),
                Tok::Ident(w) if w == "define" => self.parse_define()?,
                Tok::Ident(w) if w == "declare" => self.parse_declare()?,
                Tok::Global(_) => self.parse_global()?,
                other => {
                    return self.error(format!(
                        "expected `define`, `declare` or a global, found {}",
                        Self::describe(&other)
                    ))
                }
            }
        }
    }

    fn parse_global(&mut self) -> PResult<()> {
        let span = self.span();
        let Tok::Global(name) = self.bump().tok else {
            unreachable!()
        };
        self.expect(Tok::Eq)?;
        let _ = self.eat_keyword("internal") || self.eat_keyword("private");
        if !(self.eat_keyword("global") || self.eat_keyword("constant")) {
            return self.error("expected `global` or `constant`");
        }
        let ty = self.parse_type()?;
        let init = match self.parse_literal(&ty)? {
            Some(id) => id,
            None => return self.error("expected an integer or float initialiser"),
        };
        self.skip_align()?;
        if self.globals.contains_key(&name) || self.functions.contains_key(&name) {
            self.diags.push(Diagnostic::at(
                DiagnosticKind::SsaViolation,
                span,
                format!("global `@{name}` redefined"),
            ));
            return Ok(());
        }
        let id = self.new_value(Value {
            id: PLACEHOLDER,
            kind: ValueKind::Constant,
            dtype: ty.pointer_to(),
            literal: Some(ConstPayload::Symbol(name.clone())),
            scope: Scope::Global,
            name: Some(name.clone()),
            init: Some(init),
        });
        self.globals.insert(name, id);
        self.module.globals.push(id);
        Ok(())
    }

    fn register_function(&mut self, name: &str, span: Span) -> FuncId {
        let id = FuncId(self.module.functions.len() as u32);
        if self.functions.contains_key(name) || self.globals.contains_key(name) {
            self.diags.push(Diagnostic::at(
                DiagnosticKind::DuplicateFunction,
                span,
                format!("function `@{name}` defined more than once"),
            ));
        } else {
            self.functions.insert(name.to_string(), id);
        }
        self.func_spans.insert(id, span);
        id
    }

    fn parse_declare(&mut self) -> PResult<()> {
        self.expect_keyword("declare")?;
        let ret_type = self.parse_type()?;
        let span = self.span();
        let name = match self.bump().tok {
            Tok::Global(n) => n,
            other => {
                return Err(Diagnostic::at(
                    DiagnosticKind::SyntaxError,
                    span,
                    format!("expected a function name, found {}", Self::describe(&other)),
                ))
            }
        };
        self.expect(Tok::LParen)?;
        let mut param_types = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                param_types.push(self.parse_type()?);
                if let Tok::Local(_) = self.peek() {
                    self.bump();
                }
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let id = self.register_function(&name, span);
        self.module.functions.push(Function {
            id,
            name,
            ret_type,
            params: Vec::new(),
            param_types,
            blocks: Vec::new(),
            external: true,
            externally_visible: true,
        });
        Ok(())
    }

    fn parse_define(&mut self) -> PResult<()> {
        self.expect_keyword("define")?;
        let mut externally_visible = true;
        loop {
            if self.eat_keyword("internal") || self.eat_keyword("private") {
                externally_visible = false;
            } else if !(self.eat_keyword("external") || self.eat_keyword("dso_local")) {
                break;
            }
        }
        let ret_type = self.parse_type()?;
        let span = self.span();
        let name = match self.bump().tok {
            Tok::Global(n) => n,
            other => {
                return Err(Diagnostic::at(
                    DiagnosticKind::SyntaxError,
                    span,
                    format!("expected a function name, found {}", Self::describe(&other)),
                ))
            }
        };
        let func = self.register_function(&name, span);
        let mut scope = FnScope::default();
        let mut params = Vec::new();
        let mut param_types = Vec::new();
        self.expect(Tok::LParen)?;
        if *self.peek() != Tok::RParen {
            loop {
                let ty = self.parse_type()?;
                let (pname, pspan) = self.expect_local()?;
                if scope.locals.contains_key(&pname) {
                    self.diags.push(Diagnostic::at(
                        DiagnosticKind::SsaViolation,
                        pspan,
                        format!("parameter `%{pname}` defined twice"),
                    ));
                }
                let id = self.new_value(Value {
                    id: PLACEHOLDER,
                    kind: ValueKind::Variable,
                    dtype: ty.clone(),
                    literal: None,
                    scope: Scope::Function(func),
                    name: Some(pname.clone()),
                    init: None,
                });
                scope.locals.insert(pname, id);
                params.push(id);
                param_types.push(ty);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;

        let mut blocks: Vec<Block> = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Label(label) => {
                    let lspan = self.span();
                    self.bump();
                    let id = BlockId(blocks.len() as u32);
                    if scope.labels.insert(label.clone(), id).is_some() {
                        return Err(Diagnostic::at(
                            DiagnosticKind::SyntaxError,
                            lspan,
                            format!("block label `{label}` defined twice"),
                        ));
                    }
                    self.block_spans.insert((func, id), lspan);
                    blocks.push(Block {
                        id,
                        label,
                        instructions: Vec::new(),
                    });
                }
                Tok::Eof => return self.error("unexpected end of input inside function body"),
                _ => {
                    if blocks.is_empty() {
                        self.block_spans.insert((func, BlockId(0)), self.span());
                        blocks.push(Block {
                            id: BlockId(0),
                            label: String::new(),
                            instructions: Vec::new(),
                        });
                    }
                    let block_index = blocks.len() - 1;
                    let instr_index = blocks[block_index].instructions.len();
                    let instr = self.parse_instruction(func, block_index, instr_index, &mut scope)?;
                    blocks[block_index].instructions.push(instr);
                }
            }
        }

        for fix in std::mem::take(&mut scope.fixups) {
            let instr = &mut blocks[fix.block].instructions[fix.instr];
            match fix.slot {
                Slot::Operand(k) => match scope.locals.get(&fix.name) {
                    Some(&id) => instr.operands[k] = id,
                    None => self.diags.push(Diagnostic::at(
                        DiagnosticKind::DanglingReference,
                        fix.span,
                        format!("use of undefined value `%{}`", fix.name),
                    )),
                },
                Slot::Successor(k) | Slot::Incoming(k) => match scope.labels.get(&fix.name) {
                    Some(&id) => {
                        if let Slot::Successor(_) = fix.slot {
                            instr.successors[k] = id;
                        } else {
                            instr.incoming[k] = id;
                        }
                    }
                    None => self.diags.push(Diagnostic::at(
                        DiagnosticKind::DanglingReference,
                        fix.span,
                        format!("reference to undefined label `%{}`", fix.name),
                    )),
                },
            }
        }

        self.module.functions.push(Function {
            id: func,
            name,
            ret_type,
            params,
            param_types,
            blocks,
            external: false,
            externally_visible,
        });
        Ok(())
    }

    fn parse_label_ref(&mut self) -> PResult<(String, Span)> {
        self.expect_keyword("label")?;
        self.expect_local()
    }

    fn parse_instruction(
        &mut self,
        func: FuncId,
        block_index: usize,
        instr_index: usize,
        scope: &mut FnScope,
    ) -> PResult<Instruction> {
        let start = self.span();
        let id = InstrId(self.next_instr);
        self.next_instr += 1;
        self.instr_spans.insert(id, start);

        let mut result = None;
        if let Tok::Local(name) = self.peek().clone() {
            if *self.peek_at(1) == Tok::Eq {
                self.bump();
                self.bump();
                if scope.locals.contains_key(&name) {
                    self.diags.push(Diagnostic::at(
                        DiagnosticKind::SsaViolation,
                        start,
                        format!("value `%{name}` is defined more than once"),
                    ));
                } else {
                    let vid = self.new_value(Value {
                        id: PLACEHOLDER,
                        kind: ValueKind::Variable,
                        dtype: DataType::void(),
                        literal: None,
                        scope: Scope::Function(func),
                        name: Some(name.clone()),
                        init: None,
                    });
                    scope.locals.insert(name.clone(), vid);
                    result = Some(vid);
                }
                // A redefinition still needs its instruction parsed; track it
                // with a throwaway value so parsing can continue.
                if result.is_none() {
                    result = Some(PLACEHOLDER);
                }
            }
        }

        let op_span = self.span();
        let opname = match self.peek().clone() {
            Tok::Ident(w) => w,
            other => return self.error(format!("expected an opcode, found {}", Self::describe(&other))),
        };
        let opcode = match Opcode::from_name(&opname) {
            Some(op) => op,
            None => {
                return Err(Diagnostic::at(
                    DiagnosticKind::UnknownOpcode,
                    op_span,
                    format!("unknown or unsupported opcode `{opname}`"),
                ))
            }
        };
        self.bump();

        let mut instr = Instruction {
            id,
            opcode,
            predicate: None,
            operands: Vec::new(),
            result: None,
            block: BlockId(block_index as u32),
            successors: Vec::new(),
            callee: None,
            incoming: Vec::new(),
            elem_type: None,
        };
        let mut operands: Vec<Operand> = Vec::new();
        let mut successors: Vec<(String, Span)> = Vec::new();
        let mut incoming: Vec<(String, Span)> = Vec::new();
        let mut callee: Option<(String, Span)> = None;
        let result_type: Option<DataType>;

        match opcode {
            op if op.is_binary() => {
                while [
                    "nsw", "nuw", "exact", "fast", "nnan", "ninf", "nsz", "arcp", "contract", "reassoc",
                ]
                .iter()
                .any(|f| self.is_keyword(f))
                {
                    self.bump();
                }
                let ty = self.parse_type()?;
                operands.push(self.parse_operand(&ty, scope)?);
                self.expect(Tok::Comma)?;
                operands.push(self.parse_operand(&ty, scope)?);
                result_type = Some(ty);
            }
            Opcode::ICmp | Opcode::FCmp => {
                let pred = match self.peek().clone() {
                    Tok::Ident(p) => p,
                    _ => return self.error("expected a comparison predicate"),
                };
                let valid: &[&str] = if opcode == Opcode::ICmp {
                    &["eq", "ne", "ugt", "uge", "ult", "ule", "sgt", "sge", "slt", "sle"]
                } else {
                    &[
                        "false", "oeq", "ogt", "oge", "olt", "ole", "one", "ord", "ueq", "ugt", "uge", "ult", "ule",
                        "une", "uno", "true",
                    ]
                };
                if !valid.contains(&pred.as_str()) {
                    return self.error(format!("invalid {opcode} predicate `{pred}`"));
                }
                self.bump();
                instr.predicate = Some(pred);
                let ty = self.parse_type()?;
                operands.push(self.parse_operand(&ty, scope)?);
                self.expect(Tok::Comma)?;
                operands.push(self.parse_operand(&ty, scope)?);
                result_type = Some(DataType::int(1));
            }
            Opcode::Load => {
                let ty = self.parse_type()?;
                self.expect(Tok::Comma)?;
                let pty = self.parse_type()?;
                operands.push(self.parse_operand(&pty, scope)?);
                self.skip_align()?;
                result_type = Some(ty);
            }
            Opcode::Store => {
                let vty = self.parse_type()?;
                operands.push(self.parse_operand(&vty, scope)?);
                self.expect(Tok::Comma)?;
                let pty = self.parse_type()?;
                operands.push(self.parse_operand(&pty, scope)?);
                self.skip_align()?;
                result_type = None;
            }
            Opcode::Alloca => {
                let ty = self.parse_type()?;
                self.skip_align()?;
                result_type = Some(ty.pointer_to());
                instr.elem_type = Some(ty);
            }
            Opcode::GetElementPtr => {
                self.eat_keyword("inbounds");
                let src = self.parse_type()?;
                self.expect(Tok::Comma)?;
                let pty = self.parse_type()?;
                operands.push(self.parse_operand(&pty, scope)?);
                let mut elem = src.clone();
                let mut first = true;
                while *self.peek() == Tok::Comma {
                    self.bump();
                    let ity = self.parse_type()?;
                    operands.push(self.parse_operand(&ity, scope)?);
                    if !first {
                        elem = match elem.array_element() {
                            Some(e) => e,
                            None => return self.error(format!("cannot index into `{elem}`")),
                        };
                    }
                    first = false;
                }
                result_type = Some(if pty.as_str() == "ptr" {
                    pty.clone()
                } else {
                    elem.pointer_to()
                });
                instr.elem_type = Some(src);
            }
            Opcode::Call => {
                let rty = self.parse_type()?;
                let cspan = self.span();
                let name = match self.peek().clone() {
                    Tok::Global(n) => n,
                    other => return self.error(format!("expected a callee name, found {}", Self::describe(&other))),
                };
                self.bump();
                callee = Some((name, cspan));
                self.expect(Tok::LParen)?;
                if *self.peek() != Tok::RParen {
                    loop {
                        let ty = self.parse_type()?;
                        operands.push(self.parse_operand(&ty, scope)?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
                result_type = if rty.is_void() { None } else { Some(rty) };
            }
            Opcode::Phi => {
                let ty = self.parse_type()?;
                loop {
                    self.expect(Tok::LBracket)?;
                    operands.push(self.parse_operand(&ty, scope)?);
                    self.expect(Tok::Comma)?;
                    incoming.push(self.expect_local()?);
                    self.expect(Tok::RBracket)?;
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                result_type = Some(ty);
            }
            Opcode::Br => {
                if self.is_keyword("label") {
                    successors.push(self.parse_label_ref()?);
                } else {
                    let ty = self.parse_type()?;
                    if ty.as_str() != "i1" {
                        return self.error(format!("branch condition must be `i1`, found `{ty}`"));
                    }
                    operands.push(self.parse_operand(&ty, scope)?);
                    self.expect(Tok::Comma)?;
                    successors.push(self.parse_label_ref()?);
                    self.expect(Tok::Comma)?;
                    successors.push(self.parse_label_ref()?);
                }
                result_type = None;
            }
            Opcode::Switch => {
                let ty = self.parse_type()?;
                operands.push(self.parse_operand(&ty, scope)?);
                self.expect(Tok::Comma)?;
                successors.push(self.parse_label_ref()?);
                self.expect(Tok::LBracket)?;
                while *self.peek() != Tok::RBracket {
                    let cty = self.parse_type()?;
                    match self.parse_literal(&cty)? {
                        Some(c) => operands.push(Operand::Resolved(c)),
                        None => return self.error("switch case values must be constants"),
                    }
                    self.expect(Tok::Comma)?;
                    successors.push(self.parse_label_ref()?);
                }
                self.bump();
                result_type = None;
            }
            Opcode::Ret => {
                if self.eat_keyword("void") {
                } else {
                    let ty = self.parse_type()?;
                    operands.push(self.parse_operand(&ty, scope)?);
                }
                result_type = None;
            }
            _ => unreachable!("binary opcodes handled above"),
        }

        match (result, result_type) {
            (Some(vid), Some(ty)) => {
                if vid != PLACEHOLDER {
                    self.module.values[vid.index()].dtype = ty;
                    instr.result = Some(vid);
                }
            }
            (Some(_), None) => {
                return Err(Diagnostic::at(
                    DiagnosticKind::SyntaxError,
                    start,
                    format!("`{opcode}` does not produce a value here"),
                ))
            }
            (None, Some(_)) if opcode != Opcode::Call => {
                return Err(Diagnostic::at(
                    DiagnosticKind::SyntaxError,
                    start,
                    format!("the result of `{opcode}` must be named"),
                ))
            }
            _ => {}
        }

        for (k, op) in operands.into_iter().enumerate() {
            match op {
                Operand::Resolved(v) => instr.operands.push(v),
                Operand::Local(name, span) => {
                    instr.operands.push(PLACEHOLDER);
                    scope.fixups.push(LocalFixup {
                        block: block_index,
                        instr: instr_index,
                        slot: Slot::Operand(k),
                        name,
                        span,
                    });
                }
                Operand::Global(name, span) => {
                    instr.operands.push(PLACEHOLDER);
                    self.fixups.push(ModuleFixup {
                        func,
                        block: block_index,
                        instr: instr_index,
                        slot: ModuleSlot::Operand(k),
                        name,
                        span,
                    });
                }
            }
        }
        for (k, (name, span)) in successors.into_iter().enumerate() {
            instr.successors.push(NO_BLOCK);
            scope.fixups.push(LocalFixup {
                block: block_index,
                instr: instr_index,
                slot: Slot::Successor(k),
                name,
                span,
            });
        }
        for (k, (name, span)) in incoming.into_iter().enumerate() {
            instr.incoming.push(NO_BLOCK);
            scope.fixups.push(LocalFixup {
                block: block_index,
                instr: instr_index,
                slot: Slot::Incoming(k),
                name,
                span,
            });
        }
        if let Some((name, span)) = callee {
            match self.functions.get(&name) {
                Some(&f) => instr.callee = Some(f),
                None => {
                    instr.callee = Some(NO_FUNC);
                    self.fixups.push(ModuleFixup {
                        func,
                        block: block_index,
                        instr: instr_index,
                        slot: ModuleSlot::Callee,
                        name,
                        span,
                    });
                }
            }
        }
        Ok(instr)
    }

    fn resolve_module_refs(&mut self) {
        for fix in std::mem::take(&mut self.fixups) {
            let resolved = match fix.slot {
                ModuleSlot::Operand(_) => self.globals.get(&fix.name).map(|v| v.0),
                ModuleSlot::Callee => self.functions.get(&fix.name).map(|f| f.0),
            };
            let Some(target) = resolved else {
                let what = match fix.slot {
                    ModuleSlot::Operand(_) => "global",
                    ModuleSlot::Callee => "function",
                };
                self.diags.push(Diagnostic::at(
                    DiagnosticKind::DanglingReference,
                    fix.span,
                    format!("reference to undefined {what} `@{}`", fix.name),
                ));
                continue;
            };
            let instr = &mut self.module.functions[fix.func.index()].blocks[fix.block].instructions[fix.instr];
            match fix.slot {
                ModuleSlot::Operand(k) => instr.operands[k] = ValueId(target),
                ModuleSlot::Callee => instr.callee = Some(FuncId(target)),
            }
        }
    }

    fn attach_span(&self, finding: Finding) -> Diagnostic {
        let mut diag = finding.diagnostic;
        diag.span = finding
            .instr
            .and_then(|i| self.instr_spans.get(&i).copied())
            .or_else(|| finding.block.and_then(|b| self.block_spans.get(&b).copied()))
            .or_else(|| finding.func.and_then(|f| self.func_spans.get(&f).copied()));
        diag
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::print_module;

    const FIB: &str = include_str!("../../tests/fixtures/fib.ll");

    #[test]
    fn minimal_module() {
        let m = parse_module("define i32 @f() { ret i32 0 }", "t").unwrap();
        assert_eq!(m.functions.len(), 1);
        assert_eq!(m.instruction_count(), 1);
        assert_eq!(m.values.len(), 1);
        let c = &m.values[0];
        assert_eq!(c.kind, ValueKind::Constant);
        assert_eq!(c.dtype.as_str(), "i32");
        assert_eq!(c.literal, Some(ConstPayload::Int(0)));
    }

    #[test]
    fn fibonacci_opcodes() {
        let m = parse_module(FIB, "fib").unwrap();
        assert_eq!(m.functions.len(), 1);
        let ops: HashSet<&str> = m.functions[0].instructions().map(|i| i.opcode.as_str()).collect();
        for op in ["icmp", "br", "add", "call", "ret"] {
            assert!(ops.contains(op), "missing {op}");
        }
    }

    #[test]
    fn redefinition_is_ssa_violation() {
        let err = parse_module(
            "define i32 @f() { %a = add i32 1, 2 %a = add i32 %a, 1 ret i32 %a }",
            "t",
        )
        .unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].kind, DiagnosticKind::SsaViolation);
        assert_eq!(err[0].span, Some(Span { line: 1, col: 37 }));
    }

    #[test]
    fn unknown_opcode() {
        let err = parse_module(
            "define i32 @f(i32 %x) {\n  %y = frobnicate i32 %x\n  ret i32 %y\n}",
            "t",
        )
        .unwrap_err();
        assert_eq!(err[0].kind, DiagnosticKind::UnknownOpcode);
        assert_eq!(err[0].span, Some(Span { line: 2, col: 8 }));
    }

    #[test]
    fn dangling_value_and_label() {
        let err = parse_module("define i32 @f() {\n  br label %x\n}", "t").unwrap_err();
        assert_eq!(err[0].kind, DiagnosticKind::DanglingReference);
        let err = parse_module("define i32 @f() {\n  ret i32 %nope\n}", "t").unwrap_err();
        assert_eq!(err[0].kind, DiagnosticKind::DanglingReference);
        let err = parse_module("define i32 @f() {\n  %r = call i32 @g()\n  ret i32 %r\n}", "t").unwrap_err();
        assert_eq!(err[0].kind, DiagnosticKind::DanglingReference);
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_module("define i32 @f() {\n  ret i32 %x,\n", "t").unwrap_err();
        assert_eq!(err[0].kind, DiagnosticKind::SyntaxError);
        assert_eq!(err[0].span.unwrap().line, 2);
    }

    #[test]
    fn unsupported_constructs_fail_loudly() {
        assert!(parse_module("define i32 @f() { ret i32 undef }", "t").is_err());
        assert!(parse_module("define i32 @f() #0 { ret i32 0 }", "t").is_err());
        assert!(parse_module("define i32 @f(i32 %x) { %y = sext i32 %x to i64 ret i32 %x }", "t").is_err());
    }

    #[test]
    fn constants_are_interned_by_type_and_value() {
        let m = parse_module(
            "define i64 @f(i32 %x) {\n %a = add i32 %x, 1\n %b = mul i32 %a, 1\n %c = add i64 1, 1\n ret i64 %c\n}",
            "t",
        )
        .unwrap();
        let consts: Vec<_> = m.values.iter().filter(|v| v.kind == ValueKind::Constant).collect();
        assert_eq!(consts.len(), 2);
    }

    #[test]
    fn value_ids_follow_lexical_definition_order() {
        let m = parse_module(FIB, "fib").unwrap();
        let names: Vec<String> = m
            .values
            .iter()
            .map(|v| match &v.literal {
                Some(ConstPayload::Int(i)) => format!("c{i}"),
                _ => v.name.clone().unwrap(),
            })
            .collect();
        assert_eq!(
            names,
            ["0", "2", "c2", "4", "c-1", "5", "6", "c-2", "7", "8", "10", "c1"]
        );
    }

    #[test]
    fn globals_switch_gep_and_memory() {
        let text = "\
@g = global i32 7

define void @h(i32 %x) {
entry:
  %p = alloca [4 x i32]
  %q = getelementptr inbounds [4 x i32], [4 x i32]* %p, i64 0, i64 1
  store i32 %x, i32* %q, align 4
  %v = load i32, i32* @g
  switch i32 %v, label %d [ i32 0, label %a i32 1, label %b ]
a:
  br label %d
b:
  br label %d
d:
  ret void
}
";
        let m = parse_module(text, "t").unwrap();
        let f = &m.functions[0];
        let gep = &f.blocks[0].instructions[1];
        assert_eq!(m.value(gep.result.unwrap()).dtype.as_str(), "i32*");
        let sw = &f.blocks[0].instructions[4];
        assert_eq!(sw.successors.len(), 3);
        assert_eq!(sw.operands.len(), 3);
        let reparsed = parse_module(&print_module(&m), "t").unwrap();
        assert_eq!(reparsed, m);
    }

    #[test]
    fn fibonacci_round_trips() {
        let m = parse_module(FIB, "fib").unwrap();
        let printed = print_module(&m);
        let again = parse_module(&printed, "fib").unwrap();
        assert_eq!(again, m);
        assert_eq!(print_module(&again), printed);
    }

    #[test]
    fn parse_is_deterministic() {
        assert_eq!(parse_module(FIB, "a").unwrap(), parse_module(FIB, "a").unwrap());
    }
}
