use std::fmt::Write;

use super::{ConstPayload, Function, Instruction, IrModule, Opcode, ValueId, ValueKind};

/// Renders a module as text accepted by [`super::parse_module`].
///
/// Globals come first, then functions in module order, so parsing the
/// output of a module that was itself parsed from this layout reproduces
/// the same ids.
pub fn print_module(module: &IrModule) -> String {
    let mut out = String::new();
    for &g in &module.globals {
        let v = module.value(g);
        let ty = v.dtype.pointee().map(|t| t.to_string()).unwrap_or_else(|| "i32".into());
        let init = v.init.map(|i| operand(module, i)).unwrap_or_else(|| "0".into());
        let _ = writeln!(out, "@{} = global {ty} {init}", v.name.as_deref().unwrap_or("?"));
    }
    if !module.globals.is_empty() {
        out.push('\n');
    }
    for f in &module.functions {
        print_function(module, f, &mut out);
    }
    out
}

fn operand(module: &IrModule, id: ValueId) -> String {
    let v = module.value(id);
    match (&v.kind, &v.literal) {
        (ValueKind::Constant, Some(ConstPayload::Int(i))) => i.to_string(),
        (ValueKind::Constant, Some(ConstPayload::Float(bits))) => {
            let f = f64::from_bits(*bits);
            if f.is_finite() {
                format!("{f:?}")
            } else {
                format!("0x{bits:016X}")
            }
        }
        (_, Some(ConstPayload::Symbol(name))) => format!("@{name}"),
        _ => format!("%{}", v.name.as_deref().unwrap_or("?")),
    }
}

fn typed(module: &IrModule, id: ValueId) -> String {
    format!("{} {}", module.value(id).dtype, operand(module, id))
}

fn print_function(module: &IrModule, f: &Function, out: &mut String) {
    if f.external {
        let params: Vec<String> = f.param_types.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(out, "declare {} @{}({})\n", f.ret_type, f.name, params.join(", "));
        return;
    }
    let params: Vec<String> = f.params.iter().map(|&p| typed(module, p)).collect();
    let linkage = if f.externally_visible { "" } else { "internal " };
    let _ = writeln!(
        out,
        "define {linkage}{} @{}({}) {{",
        f.ret_type,
        f.name,
        params.join(", ")
    );
    for block in &f.blocks {
        if !block.label.is_empty() {
            let _ = writeln!(out, "{}:", block.label);
        }
        for instr in &block.instructions {
            let _ = writeln!(out, "  {}", instruction(module, f, instr));
        }
    }
    out.push_str("}\n\n");
}

fn instruction(module: &IrModule, f: &Function, i: &Instruction) -> String {
    let label = |b: &super::BlockId| format!("label %{}", f.blocks[b.index()].label);
    let ops = &i.operands;
    let body = match i.opcode {
        op if op.is_binary() => format!(
            "{op} {} {}, {}",
            module.value(ops[0]).dtype,
            operand(module, ops[0]),
            operand(module, ops[1])
        ),
        Opcode::ICmp | Opcode::FCmp => format!(
            "{} {} {} {}, {}",
            i.opcode,
            i.predicate.as_deref().unwrap_or("eq"),
            module.value(ops[0]).dtype,
            operand(module, ops[0]),
            operand(module, ops[1])
        ),
        Opcode::Load => format!(
            "load {}, {}",
            i.result.map(|r| module.value(r).dtype.to_string()).unwrap_or_default(),
            typed(module, ops[0])
        ),
        Opcode::Store => format!("store {}, {}", typed(module, ops[0]), typed(module, ops[1])),
        Opcode::Alloca => format!(
            "alloca {}",
            i.elem_type.as_ref().map(|t| t.to_string()).unwrap_or_default()
        ),
        Opcode::GetElementPtr => {
            let mut s = format!(
                "getelementptr {}",
                i.elem_type.as_ref().map(|t| t.to_string()).unwrap_or_default()
            );
            for &o in ops {
                let _ = write!(s, ", {}", typed(module, o));
            }
            s
        }
        Opcode::Call => {
            let callee = &module.functions[i.callee.map_or(0, |c| c.index())];
            let args: Vec<String> = ops.iter().map(|&o| typed(module, o)).collect();
            format!("call {} @{}({})", callee.ret_type, callee.name, args.join(", "))
        }
        Opcode::Phi => {
            let ty = i.result.map(|r| module.value(r).dtype.to_string()).unwrap_or_default();
            let arms: Vec<String> = ops
                .iter()
                .zip(&i.incoming)
                .map(|(&v, b)| format!("[ {}, %{} ]", operand(module, v), f.blocks[b.index()].label))
                .collect();
            format!("phi {ty} {}", arms.join(", "))
        }
        Opcode::Br => match ops.first() {
            None => format!("br {}", label(&i.successors[0])),
            Some(&c) => format!(
                "br {}, {}, {}",
                typed(module, c),
                label(&i.successors[0]),
                label(&i.successors[1])
            ),
        },
        Opcode::Switch => {
            let mut s = format!("switch {}, {} [", typed(module, ops[0]), label(&i.successors[0]));
            for (c, b) in ops[1..].iter().zip(&i.successors[1..]) {
                let _ = write!(s, " {}, {}", typed(module, *c), label(b));
            }
            s.push_str(" ]");
            s
        }
        Opcode::Ret => match ops.first() {
            None => "ret void".to_string(),
            Some(&v) => format!("ret {}", typed(module, v)),
        },
        _ => unreachable!(),
    };
    match i.result {
        Some(r) => format!("%{} = {body}", module.value(r).name.as_deref().unwrap_or("?")),
        None => body,
    }
}
