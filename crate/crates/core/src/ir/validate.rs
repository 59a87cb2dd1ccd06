use std::collections::{HashMap, HashSet, VecDeque};

use super::{
    BlockId, Diagnostic, DiagnosticKind, FuncId, Function, InstrId, IrModule, Location, Opcode, Scope, ValueId,
    ValueKind,
};

/// A diagnostic plus the ids needed to map it back to source positions.
pub(crate) struct Finding {
    pub diagnostic: Diagnostic,
    pub func: Option<FuncId>,
    pub block: Option<(FuncId, BlockId)>,
    pub instr: Option<InstrId>,
}

/// Checks every module, function and instruction invariant.
///
/// Returns an empty list iff the module is well formed.
pub fn validate(module: &IrModule) -> Vec<Diagnostic> {
    check(module).into_iter().map(|f| f.diagnostic).collect()
}

struct Checker<'m> {
    module: &'m IrModule,
    out: Vec<Finding>,
}

impl<'m> Checker<'m> {
    fn report(
        &mut self,
        kind: DiagnosticKind,
        func: &Function,
        block: Option<BlockId>,
        instr: Option<(usize, InstrId)>,
        message: String,
    ) {
        let location = Location {
            function: Some(func.name.clone()),
            block: block.and_then(|b| func.blocks.get(b.index())).map(|b| b.label.clone()),
            instruction: instr.map(|(i, _)| i),
        };
        self.out.push(Finding {
            diagnostic: Diagnostic {
                kind,
                message,
                span: None,
                location,
            },
            func: Some(func.id),
            block: block.map(|b| (func.id, b)),
            instr: instr.map(|(_, id)| id),
        });
    }

    fn value_ok(&self, v: ValueId) -> bool {
        v.index() < self.module.values.len()
    }
}

pub(crate) fn check(module: &IrModule) -> Vec<Finding> {
    let mut c = Checker {
        module,
        out: Vec::new(),
    };

    let mut seen_names = HashSet::new();
    for f in &module.functions {
        if !seen_names.insert(f.name.as_str()) {
            c.report(
                DiagnosticKind::DuplicateFunction,
                f,
                None,
                None,
                format!("function `@{}` defined more than once", f.name),
            );
        }
    }

    // SSA: every variable has exactly one definition site.
    let mut def_count: HashMap<ValueId, usize> = HashMap::new();
    for f in &module.functions {
        for &p in &f.params {
            *def_count.entry(p).or_default() += 1;
        }
        for i in f.instructions() {
            if let Some(r) = i.result {
                *def_count.entry(r).or_default() += 1;
            }
        }
    }

    for (fi, f) in module.functions.iter().enumerate() {
        if f.id.index() != fi {
            c.report(
                DiagnosticKind::DanglingReference,
                f,
                None,
                None,
                format!("function id {} does not match its position {fi}", f.id.0),
            );
        }
        if f.external {
            if !f.blocks.is_empty() {
                c.report(
                    DiagnosticKind::SyntaxError,
                    f,
                    None,
                    None,
                    "a declaration cannot have a body".into(),
                );
            }
            continue;
        }
        check_function(&mut c, f, &def_count);
    }
    c.out
}

fn expected_arity(op: Opcode) -> Option<(usize, Option<usize>)> {
    // (min, max) operand counts; `None` max means variadic.
    Some(match op {
        o if o.is_binary() => (2, Some(2)),
        Opcode::ICmp | Opcode::FCmp => (2, Some(2)),
        Opcode::Load => (1, Some(1)),
        Opcode::Store => (2, Some(2)),
        Opcode::Alloca => (0, Some(0)),
        Opcode::GetElementPtr => (1, None),
        Opcode::Call => (0, None),
        Opcode::Phi => (1, None),
        Opcode::Br => (0, Some(1)),
        Opcode::Switch => (1, None),
        Opcode::Ret => (0, Some(1)),
        _ => return None,
    })
}

fn check_function(c: &mut Checker<'_>, f: &Function, def_count: &HashMap<ValueId, usize>) {
    let module = c.module;
    if f.blocks.is_empty() {
        c.report(
            DiagnosticKind::EmptyFunction,
            f,
            None,
            None,
            format!("function `@{}` has no blocks", f.name),
        );
        return;
    }
    let nblocks = f.blocks.len();
    let mut has_ret = false;
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); nblocks];

    for (bi, block) in f.blocks.iter().enumerate() {
        let bid = BlockId(bi as u32);
        if block.id != bid {
            c.report(
                DiagnosticKind::DanglingReference,
                f,
                Some(bid),
                None,
                format!("block id {} does not match its position {bi}", block.id.0),
            );
        }
        match block.instructions.last() {
            Some(last) if last.opcode.is_terminator() => {}
            _ => c.report(
                DiagnosticKind::MissingTerminator,
                f,
                Some(bid),
                None,
                format!("block `{}` does not end with a terminator", block.label),
            ),
        }
        let n = block.instructions.len();
        for (ii, instr) in block.instructions.iter().enumerate() {
            let at = Some((ii, instr.id));
            if instr.block != bid {
                c.report(
                    DiagnosticKind::DanglingReference,
                    f,
                    Some(bid),
                    at,
                    "instruction records the wrong owning block".into(),
                );
            }
            if instr.opcode.is_terminator() && ii + 1 != n {
                c.report(
                    DiagnosticKind::MisplacedTerminator,
                    f,
                    Some(bid),
                    at,
                    format!("terminator `{}` is not the last instruction of its block", instr.opcode),
                );
            }
            if !instr.opcode.is_terminator() && !instr.successors.is_empty() {
                c.report(
                    DiagnosticKind::MisplacedTerminator,
                    f,
                    Some(bid),
                    at,
                    format!("non-terminator `{}` has control successors", instr.opcode),
                );
            }
            if instr.opcode == Opcode::Ret {
                has_ret = true;
            }
            if let Some((min, max)) = expected_arity(instr.opcode) {
                let k = instr.operands.len();
                if k < min || max.is_some_and(|m| k > m) {
                    c.report(
                        DiagnosticKind::ArityMismatch,
                        f,
                        Some(bid),
                        at,
                        format!("`{}` has {k} operands", instr.opcode),
                    );
                }
            }
            match instr.opcode {
                Opcode::Br => {
                    let ok = (instr.operands.is_empty() && instr.successors.len() == 1)
                        || (instr.operands.len() == 1 && instr.successors.len() == 2);
                    if !ok {
                        c.report(
                            DiagnosticKind::ArityMismatch,
                            f,
                            Some(bid),
                            at,
                            "malformed branch".into(),
                        );
                    }
                }
                Opcode::Switch if instr.successors.len() != instr.operands.len() => {
                    c.report(
                        DiagnosticKind::ArityMismatch,
                        f,
                        Some(bid),
                        at,
                        "switch needs one successor per case plus a default".into(),
                    );
                }
                Opcode::Phi if instr.incoming.len() != instr.operands.len() => {
                    c.report(
                        DiagnosticKind::ArityMismatch,
                        f,
                        Some(bid),
                        at,
                        "phi needs one incoming block per value".into(),
                    );
                }
                Opcode::Call => match instr.callee {
                    Some(callee) if callee.index() < module.functions.len() => {
                        let target = &module.functions[callee.index()];
                        if target.param_types.len() != instr.operands.len() {
                            c.report(
                                DiagnosticKind::ArityMismatch,
                                f,
                                Some(bid),
                                at,
                                format!(
                                    "call to `@{}` passes {} arguments, expected {}",
                                    target.name,
                                    instr.operands.len(),
                                    target.param_types.len()
                                ),
                            );
                        }
                        if instr.result.is_some() == target.ret_type.is_void() {
                            c.report(
                                DiagnosticKind::TypeMismatch,
                                f,
                                Some(bid),
                                at,
                                format!("result use does not match the return type of `@{}`", target.name),
                            );
                        }
                    }
                    _ => c.report(
                        DiagnosticKind::DanglingReference,
                        f,
                        Some(bid),
                        at,
                        "call without a valid callee".into(),
                    ),
                },
                _ => {}
            }
            for &s in instr.successors.iter().chain(instr.incoming.iter()) {
                if s.index() >= nblocks {
                    c.report(
                        DiagnosticKind::DanglingReference,
                        f,
                        Some(bid),
                        at,
                        "reference to an undefined block".into(),
                    );
                }
            }
            for &s in &instr.successors {
                if s.index() < nblocks {
                    preds[s.index()].push(bi);
                }
            }
            for &v in &instr.operands {
                if !c.value_ok(v) {
                    c.report(
                        DiagnosticKind::DanglingReference,
                        f,
                        Some(bid),
                        at,
                        "operand refers to an undefined value".into(),
                    );
                    continue;
                }
                let value = module.value(v);
                if value.kind == ValueKind::Variable {
                    if value.scope != Scope::Function(f.id) {
                        c.report(
                            DiagnosticKind::ScopeViolation,
                            f,
                            Some(bid),
                            at,
                            "operand is a variable of another function".into(),
                        );
                    } else if def_count.get(&v).copied().unwrap_or(0) != 1 {
                        c.report(
                            DiagnosticKind::SsaViolation,
                            f,
                            Some(bid),
                            at,
                            "operand variable does not have exactly one definition".into(),
                        );
                    }
                } else if value.literal.is_none() {
                    c.report(
                        DiagnosticKind::DanglingReference,
                        f,
                        Some(bid),
                        at,
                        "constant operand without a literal".into(),
                    );
                }
            }
            if let Some(r) = instr.result {
                if !c.value_ok(r) {
                    c.report(
                        DiagnosticKind::DanglingReference,
                        f,
                        Some(bid),
                        at,
                        "result refers to an undefined value".into(),
                    );
                } else if def_count.get(&r).copied().unwrap_or(0) != 1 {
                    c.report(
                        DiagnosticKind::SsaViolation,
                        f,
                        Some(bid),
                        at,
                        "value is defined more than once".into(),
                    );
                }
            }
        }
        if let [only] = block.instructions.as_slice() {
            if only.successors.contains(&bid) {
                c.report(
                    DiagnosticKind::SelfLoop,
                    f,
                    Some(bid),
                    Some((0, only.id)),
                    format!("block `{}` is a single instruction branching to itself", block.label),
                );
            }
        }
    }

    if !has_ret {
        c.report(
            DiagnosticKind::MissingReturn,
            f,
            None,
            None,
            format!("function `@{}` has no `ret`", f.name),
        );
    }
    if !preds[0].is_empty() {
        c.report(
            DiagnosticKind::EntryHasPredecessors,
            f,
            Some(BlockId(0)),
            None,
            "the entry block is a branch target".into(),
        );
    }

    let mut seen = vec![false; nblocks];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(b) = queue.pop_front() {
        if let Some(term) = f.blocks[b].instructions.last() {
            for s in &term.successors {
                let s = s.index();
                if s < nblocks && !seen[s] {
                    seen[s] = true;
                    queue.push_back(s);
                }
            }
        }
    }
    for (bi, reached) in seen.iter().enumerate() {
        if !reached {
            c.report(
                DiagnosticKind::UnreachableBlock,
                f,
                Some(BlockId(bi as u32)),
                None,
                format!("block `{}` is unreachable from the entry", f.blocks[bi].label),
            );
        }
    }
}
