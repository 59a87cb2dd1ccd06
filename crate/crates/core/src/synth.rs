//! Random well-formed programs.
//!
//! Programs are built from structured regions (straight-line code,
//! conditionals with a joining `phi`, counted loops) so every use is
//! dominated by its definition. Expressions are sometimes recomputed, with
//! commuted operands where legal, so common subexpressions occur.

use rand_core::RngCore;

use crate::ir::{parse_module, IrModule};
use crate::rng::{below, chance, pick, seeded, SplitMix64};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    /// Upper bound on defined functions.
    pub max_functions: usize,
    /// Upper bound on instructions across all defined functions.
    pub max_instructions: usize,
    /// Upper bound on declared external functions.
    pub max_externals: usize,
    /// Maximum nesting of conditionals and loops.
    pub max_depth: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_functions: 3,
            max_instructions: 30,
            max_externals: 2,
            max_depth: 2,
        }
    }
}

const BINOPS: [&str; 8] = ["add", "sub", "mul", "and", "or", "xor", "shl", "sdiv"];
const COMMUTATIVE: [&str; 5] = ["add", "mul", "and", "or", "xor"];
const PREDICATES: [&str; 6] = ["eq", "ne", "slt", "sgt", "sle", "uge"];

struct Callee {
    name: String,
    arity: usize,
}

#[derive(Clone)]
struct Expr {
    op: String,
    a: String,
    b: String,
    i1: bool,
}

#[derive(Clone, Default)]
struct Scope {
    ints: Vec<String>,
    bools: Vec<String>,
    exprs: Vec<Expr>,
}

struct FunctionGen<'a> {
    rng: &'a mut SplitMix64,
    callees: &'a [Callee],
    lines: Vec<String>,
    block: String,
    next_value: usize,
    next_block: usize,
    used: usize,
    max_depth: usize,
}

impl FunctionGen<'_> {
    fn value(&mut self) -> String {
        self.next_value += 1;
        format!("%v{}", self.next_value)
    }

    fn label(&mut self) -> String {
        self.next_block += 1;
        format!("b{}", self.next_block)
    }

    fn emit(&mut self, text: String) {
        self.lines.push(format!("  {text}"));
        self.used += 1;
    }

    fn start_block(&mut self, label: String) {
        self.lines.push(format!("{label}:"));
        self.block = label;
    }

    fn operand(&mut self, scope: &Scope) -> String {
        if !scope.ints.is_empty() && chance(self.rng, 0.8) {
            pick(self.rng, &scope.ints).clone()
        } else {
            (below(self.rng, 9) as i64 - 1).to_string()
        }
    }

    fn condition(&mut self, scope: &mut Scope) -> String {
        if !scope.bools.is_empty() && chance(self.rng, 0.3) {
            return pick(self.rng, &scope.bools).clone();
        }
        self.compare(scope)
    }

    fn compare(&mut self, scope: &mut Scope) -> String {
        let pred = *pick(self.rng, &PREDICATES);
        let (a, b) = (self.operand(scope), self.operand(scope));
        self.expression(scope, format!("icmp {pred}"), a, b, true)
    }

    fn expression(&mut self, scope: &mut Scope, op: String, a: String, b: String, i1: bool) -> String {
        let v = self.value();
        let (mnemonic, rest) = op.split_once(' ').map_or((op.as_str(), ""), |(m, r)| (m, r));
        let spaced = if rest.is_empty() {
            String::new()
        } else {
            format!(" {rest}")
        };
        self.emit(format!("{v} = {mnemonic}{spaced} i32 {a}, {b}"));
        scope.exprs.push(Expr { op, a, b, i1 });
        if i1 {
            scope.bools.push(v.clone());
        } else {
            scope.ints.push(v.clone());
        }
        v
    }

    /// One straight-line instruction, or three for a memory round trip.
    fn simple(&mut self, scope: &mut Scope, room: usize) {
        let roll = below(self.rng, 100);
        if roll < 20 && !scope.exprs.is_empty() {
            let e = pick(self.rng, &scope.exprs).clone();
            let symmetric = COMMUTATIVE.contains(&e.op.as_str()) || e.op == "icmp eq" || e.op == "icmp ne";
            let (a, b) = if symmetric && chance(self.rng, 0.5) {
                (e.b, e.a)
            } else {
                (e.a, e.b)
            };
            self.expression(scope, e.op, a, b, e.i1);
        } else if roll < 32 && !self.callees.is_empty() {
            let callee = pick(self.rng, self.callees);
            let args: Vec<String> = (0..callee.arity)
                .map(|_| format!("i32 {}", self.operand(scope)))
                .collect();
            let text = format!("call i32 @{}({})", callee.name, args.join(", "));
            let v = self.value();
            self.emit(format!("{v} = {text}"));
            scope.ints.push(v);
        } else if roll < 40 && room >= 3 {
            let p = self.value();
            self.emit(format!("{p} = alloca i32"));
            let x = self.operand(scope);
            self.emit(format!("store i32 {x}, i32* {p}"));
            let l = self.value();
            self.emit(format!("{l} = load i32, i32* {p}"));
            scope.ints.push(l);
        } else if roll < 52 {
            self.compare(scope);
        } else {
            let op = pick(self.rng, &BINOPS).to_string();
            let (a, b) = (self.operand(scope), self.operand(scope));
            self.expression(scope, op, a, b, false);
        }
    }

    /// Fills the current block and any nested regions with at most `cap`
    /// instructions; leaves the current block open.
    fn body(&mut self, scope: &mut Scope, cap: usize, depth: usize) {
        let end = self.used + cap;
        while self.used < end {
            let room = end - self.used;
            let nest = depth < self.max_depth;
            let roll = below(self.rng, 100);
            if nest && room >= 8 && roll < 18 {
                self.conditional(scope, room, depth);
            } else if nest && room >= 9 && roll < 32 {
                self.counted_loop(scope, room, depth);
            } else if roll < 92 || self.used == 0 {
                self.simple(scope, room);
            } else {
                break;
            }
        }
    }

    fn conditional(&mut self, scope: &mut Scope, room: usize, depth: usize) {
        let cond = self.condition(scope);
        let (then_l, else_l, join_l) = (self.label(), self.label(), self.label());
        let has_else = chance(self.rng, 0.6);
        let other = if has_else { &else_l } else { &join_l };
        self.emit(format!("br i1 {cond}, label %{then_l}, label %{other}"));
        let pred_block = self.block.clone();

        // br + arms (each ending in br) + phi.
        let arms = room - 1 - 1 - usize::from(has_else) - 1;
        let then_cap = 1 + below(self.rng, (arms / 2).max(1));
        let else_cap = if has_else {
            1 + below(self.rng, (arms - then_cap).max(1))
        } else {
            0
        };

        self.start_block(then_l);
        let mut inner = scope.clone();
        self.body(&mut inner, then_cap, depth + 1);
        let then_value = self.operand(&inner);
        let then_end = self.block.clone();
        self.emit(format!("br label %{join_l}"));

        let (else_value, else_end) = if has_else {
            self.start_block(else_l);
            let mut inner = scope.clone();
            self.body(&mut inner, else_cap, depth + 1);
            let v = self.operand(&inner);
            let end = self.block.clone();
            self.emit(format!("br label %{join_l}"));
            (v, end)
        } else {
            (self.operand(scope), pred_block)
        };

        self.start_block(join_l);
        let v = self.value();
        self.emit(format!(
            "{v} = phi i32 [ {then_value}, %{then_end} ], [ {else_value}, %{else_end} ]"
        ));
        scope.ints.push(v);
    }

    fn counted_loop(&mut self, scope: &mut Scope, room: usize, depth: usize) {
        let (head, body, exit) = (self.label(), self.label(), self.label());
        let init = self.operand(scope);
        let bound = self.operand(scope);
        let pre = self.block.clone();
        self.emit(format!("br label %{head}"));

        self.start_block(head.clone());
        let i = self.value();
        let next = self.value();
        let phi_line = self.lines.len();
        self.emit(String::new());
        let c = self.value();
        self.emit(format!("{c} = icmp slt i32 {i}, {bound}"));
        self.emit(format!("br i1 {c}, label %{body}, label %{exit}"));

        self.start_block(body);
        let mut inner = scope.clone();
        inner.ints.push(i.clone());
        let cap = 1 + below(self.rng, room - 8);
        self.body(&mut inner, cap, depth + 1);
        let step = self.operand(&inner);
        self.emit(format!("{next} = add i32 {i}, {step}"));
        let latch = self.block.clone();
        self.emit(format!("br label %{head}"));
        self.lines[phi_line] = format!("  {i} = phi i32 [ {init}, %{pre} ], [ {next}, %{latch} ]");

        self.start_block(exit);
        scope.ints.push(i);
        scope.bools.push(c);
    }
}

/// Text of a random program drawn from `seed`.
pub fn synth_program(seed: u64, config: &SynthConfig) -> String {
    let mut rng = seeded(seed);
    let n_functions = 1 + below(&mut rng, config.max_functions.max(1));
    let n_externals = below(&mut rng, config.max_externals + 1);

    let mut callees = Vec::new();
    let mut out = String::new();
    for e in 0..n_externals {
        let arity = 1 + below(&mut rng, 2);
        let params = vec!["i32"; arity].join(", ");
        out.push_str(&format!("declare i32 @ext{e}({params})\n"));
        callees.push(Callee {
            name: format!("ext{e}"),
            arity,
        });
    }
    let arities: Vec<usize> = (0..n_functions).map(|_| 1 + below(&mut rng, 3)).collect();
    for (f, &arity) in arities.iter().enumerate() {
        callees.push(Callee {
            name: format!("f{f}"),
            arity,
        });
    }

    // Split the budget unevenly; each function keeps one slot for `ret`.
    let total = config.max_instructions.max(n_functions);
    let mut shares = vec![1usize; n_functions];
    for _ in n_functions..total {
        if chance(&mut rng, 0.85) {
            let f = below(&mut rng, n_functions);
            shares[f] += 1;
        }
    }

    for (f, &arity) in arities.iter().enumerate() {
        let linkage = if f > 0 && chance(&mut rng, 0.5) {
            "internal "
        } else {
            ""
        };
        let params: Vec<String> = (0..arity).map(|p| format!("i32 %a{p}")).collect();
        out.push_str(&format!("\ndefine {linkage}i32 @f{f}({}) {{\n", params.join(", ")));
        let mut gen = FunctionGen {
            rng: &mut rng,
            callees: &callees,
            lines: vec!["entry:".to_string()],
            block: "entry".to_string(),
            next_value: 0,
            next_block: 0,
            used: 0,
            max_depth: config.max_depth,
        };
        let mut scope = Scope {
            ints: (0..arity).map(|p| format!("%a{p}")).collect(),
            ..Scope::default()
        };
        gen.body(&mut scope, shares[f] - 1, 0);
        let r = gen.operand(&scope);
        gen.emit(format!("ret i32 {r}"));
        for line in &gen.lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("}\n");
    }
    out
}

/// A parsed random program. The generator only emits valid modules.
pub fn synth_module(seed: u64, config: &SynthConfig, source_id: &str) -> IrModule {
    let text = synth_program(seed, config);
    match parse_module(&text, source_id) {
        Ok(m) => m,
        Err(diags) => panic!("generator emitted an invalid module: {:?}\n{text}", diags),
    }
}

/// `count` random programs with source ids `{prefix}{i:05}`.
pub fn synth_corpus(seed: u64, count: usize, config: &SynthConfig, prefix: &str) -> Vec<IrModule> {
    let mut rng = seeded(seed);
    (0..count)
        .map(|i| {
            let s = rng.next_u64();
            synth_module(s, config, &format!("{prefix}{i:05}"))
        })
        .collect()
}
