//! Random generator of small well-typed programs, used by fuzzing and the
//! property tests.
//!
//! Contracts are named `A`, `B`, `C`, ... and share a fixed pool of method
//! signatures, so calls through `sender` resolve to every contract that
//! declares the name. Contract `i` creates its peers `j > i` in its
//! constructor; back references come from contract-typed parameters and
//! from `sender`. Most bodies put their external calls last, after every
//! write, which the checker accepts; the rest interleave freely.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct ProgenOptions {
    pub max_contracts: usize,
    pub max_methods: usize,
    /// Probability that a method body keeps its calls after its writes.
    pub cei_bias: f64,
    /// Declare a list datatype and use it from contract fields.
    pub lists: bool,
}

impl Default for ProgenOptions {
    fn default() -> Self {
        ProgenOptions {
            max_contracts: 3,
            max_methods: 3,
            cei_bias: 0.75,
            lists: true,
        }
    }
}

/// Name, parameter count and whether the method returns an int.
const SIGNATURES: &[(&str, usize, bool)] = &[
    ("ping", 1, false),
    ("pong", 0, false),
    ("poke", 2, true),
    ("run", 0, true),
];

const LIST: &str = "datatype ListInt {
    constructor { nil | cons(int v, ListInt tail) }

    ListInt add(ListInt l, int e) {
        return cons(e, l);
    }

    int length(ListInt l) {
        switch (l) {
            case nil: return 0;
            case cons(v, tail): return 1 + length(tail);
        }
    }

    int indexOf(ListInt l, int n) {
        switch (l) {
            case nil: return -1;
            case cons(v, tail):
                if (v == n) { return 0; }
                else {
                    int idx = indexOf(tail, n);
                    if (idx == -1) { return -1; } else { return idx + 1; }
                }
        }
    }
}

";

struct Contract {
    name: String,
    ints: Vec<(String, bool)>,
    list: bool,
    /// Indices of contracts held in fields.
    peers: Vec<usize>,
    /// Indices into `SIGNATURES`, and an optional contract parameter.
    methods: Vec<(usize, Option<usize>)>,
    ctor_param: bool,
}

struct Scope {
    ints: Vec<String>,
    contracts: Vec<(String, usize)>,
    fresh: usize,
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    opts: &'a ProgenOptions,
    contracts: Vec<Contract>,
}

fn indent(out: &mut String, depth: usize) {
    out.push_str(&"    ".repeat(depth));
}

impl Gen<'_> {
    fn int_expr(&mut self, c: usize, sc: &Scope, depth: usize) -> String {
        let choice = self.rng.gen_range(0..if depth == 0 { 4 } else { 6 });
        match choice {
            0 => self.rng.gen_range(0..5).to_string(),
            1 if !sc.ints.is_empty() => sc.ints.choose(&mut self.rng).unwrap().clone(),
            2 => self.contracts[c].ints.choose(&mut self.rng).unwrap().0.clone(),
            3 => {
                if self.rng.gen_bool(0.5) {
                    "@amount".into()
                } else if self.contracts[c].list {
                    "log.length()".into()
                } else {
                    "balance".into()
                }
            }
            4 | 5 => {
                let op = ["+", "-", "*"].choose(&mut self.rng).unwrap();
                let l = self.int_expr(c, sc, depth - 1);
                let r = self.int_expr(c, sc, depth - 1);
                format!("({l} {op} {r})")
            }
            _ => "1".into(),
        }
    }

    fn bool_expr(&mut self, c: usize, sc: &Scope) -> String {
        match self.rng.gen_range(0..5) {
            0 => ["true", "false"].choose(&mut self.rng).unwrap().to_string(),
            1 if self.contracts[c].list => {
                let e = self.int_expr(c, sc, 0);
                format!("log.indexOf(log, {e}) == -1")
            }
            2 => {
                let e = self.bool_expr(c, sc);
                format!("!({e})")
            }
            _ => {
                let op = ["<", "<=", "==", "!=", ">"].choose(&mut self.rng).unwrap();
                let l = self.int_expr(c, sc, 1);
                let r = self.int_expr(c, sc, 1);
                format!("{l} {op} {r}")
            }
        }
    }

    fn args(&mut self, c: usize, sc: &Scope, sig: usize) -> String {
        let n = SIGNATURES[sig].1;
        (0..n).map(|_| self.int_expr(c, sc, 1)).collect::<Vec<_>>().join(", ")
    }

    /// A state update of `c`.
    fn effect(&mut self, c: usize, sc: &mut Scope, out: &mut String, depth: usize, nest: usize) {
        indent(out, depth);
        let k = self.rng.gen_range(0..if nest == 0 { 4 } else { 7 });
        match k {
            0 | 1 => {
                let f = self.contracts[c].ints.choose(&mut self.rng).unwrap().0.clone();
                let e = self.int_expr(c, sc, 2);
                let _ = writeln!(out, "{f} = {e};");
            }
            2 => {
                let v = format!("v{}", sc.fresh);
                sc.fresh += 1;
                let e = self.int_expr(c, sc, 2);
                let _ = writeln!(out, "int {v} = {e};");
                sc.ints.push(v);
            }
            3 if self.contracts[c].list => {
                let e = self.int_expr(c, sc, 1);
                let _ = writeln!(out, "log.add({e});");
            }
            3 => {
                let b = self.bool_expr(c, sc);
                let _ = writeln!(out, "assert({b});");
            }
            4 => {
                let b = self.bool_expr(c, sc);
                let _ = writeln!(out, "if ({b}) {{");
                self.block(c, sc, out, depth + 1, nest - 1, false);
                indent(out, depth);
                out.push_str("} else {\n");
                self.block(c, sc, out, depth + 1, nest - 1, false);
                indent(out, depth);
                out.push_str("}\n");
            }
            5 => {
                let i = format!("i{}", sc.fresh);
                sc.fresh += 1;
                let bound = self.rng.gen_range(1..4);
                let _ = writeln!(out, "int {i} = 0;");
                indent(out, depth);
                let _ = writeln!(out, "while ({i} < {bound}) {{");
                self.block(c, sc, out, depth + 1, nest - 1, false);
                indent(out, depth + 1);
                let _ = writeln!(out, "{i} = {i} + 1;");
                indent(out, depth);
                out.push_str("}\n");
            }
            _ => {
                let b = self.bool_expr(c, sc);
                let _ = writeln!(out, "if ({b}) {{ throw \"stop\"; }}");
            }
        }
    }

    /// A call leaving `c`, or an internal one.
    fn interaction(&mut self, c: usize, sc: &mut Scope, out: &mut String, depth: usize) {
        // (receiver, contract index if known)
        let mut receivers: Vec<(String, Option<usize>)> = vec![("sender".into(), None), ("this".into(), Some(c))];
        for &p in &self.contracts[c].peers {
            receivers.push((format!("p{}", self.contracts[p].name), Some(p)));
        }
        for (v, t) in &sc.contracts {
            receivers.push((v.clone(), Some(*t)));
        }
        let (recv, target) = receivers.choose(&mut self.rng).unwrap().clone();
        let sigs: Vec<usize> = match target {
            Some(t) => self.contracts[t].methods.iter().map(|m| m.0).collect(),
            None => self
                .contracts
                .iter()
                .flat_map(|k| k.methods.iter().map(|m| m.0))
                .collect(),
        };
        let Some(&sig) = sigs.choose(&mut self.rng) else {
            return;
        };
        // contract parameters are filled from the caller's scope
        let cparam = target.and_then(|t| self.contracts[t].methods.iter().find(|m| m.0 == sig).and_then(|m| m.1));
        if target.is_none()
            && self
                .contracts
                .iter()
                .any(|k| k.methods.iter().any(|m| m.0 == sig && m.1.is_some()))
        {
            return;
        }
        let mut args = self.args(c, sc, sig);
        if let Some(want) = cparam {
            let have: Vec<String> = sc
                .contracts
                .iter()
                .filter(|(_, t)| *t == want)
                .map(|(v, _)| v.clone())
                .collect();
            let arg = if want == c {
                "this".to_string()
            } else if let Some(v) = have.choose(&mut self.rng) {
                v.clone()
            } else if self.contracts[c].peers.contains(&want) {
                format!("p{}", self.contracts[want].name)
            } else {
                return;
            };
            args = if args.is_empty() { arg } else { format!("{args}, {arg}") };
        }
        let name = SIGNATURES[sig].0;
        let value = if recv != "this" && self.rng.gen_bool(0.2) {
            "$1"
        } else {
            ""
        };
        let call = format!("{recv}{value}.{name}({args})");
        indent(out, depth);
        match self.rng.gen_range(0..4) {
            0 if recv != "this" => {
                let _ = writeln!(out, "try {call} abort {{ skip; }} success {{ skip; }}");
            }
            1 if SIGNATURES[sig].2 && target.is_some() => {
                let v = format!("r{}", sc.fresh);
                sc.fresh += 1;
                let _ = writeln!(out, "int {v} = {call};");
                sc.ints.push(v);
            }
            _ => {
                let _ = writeln!(out, "{call};");
            }
        }
    }

    fn block(&mut self, c: usize, sc: &mut Scope, out: &mut String, depth: usize, nest: usize, calls: bool) {
        let saved = (sc.ints.len(), sc.contracts.len());
        let n = self.rng.gen_range(1..4);
        for _ in 0..n {
            if calls && self.rng.gen_bool(0.3) {
                self.interaction(c, sc, out, depth);
            } else {
                self.effect(c, sc, out, depth, nest);
            }
        }
        sc.ints.truncate(saved.0);
        sc.contracts.truncate(saved.1);
    }

    fn method(&mut self, c: usize, m: usize, out: &mut String) {
        let (sig, cparam) = self.contracts[c].methods[m];
        let (name, arity, returns) = SIGNATURES[sig];
        let mut sc = Scope {
            ints: (0..arity).map(|i| format!("a{i}")).collect(),
            contracts: Vec::new(),
            fresh: 0,
        };
        let mut params: Vec<String> = sc.ints.iter().map(|a| format!("int {a}")).collect();
        if let Some(t) = cparam {
            params.push(format!("{} who", self.contracts[t].name));
            sc.contracts.push(("who".into(), t));
        }
        let head = if returns { "int" } else { "function" };
        let _ = writeln!(out, "    {head} {name}({}) {{", params.join(", "));
        let mut body = String::new();
        if self.rng.gen_bool(self.opts.cei_bias) {
            let n = self.rng.gen_range(1..4);
            for _ in 0..n {
                self.effect(c, &mut sc, &mut body, 2, 2);
            }
            // a second call would count as an access after the first
            if self.rng.gen_bool(0.8) {
                self.interaction(c, &mut sc, &mut body, 2);
            }
        } else {
            self.block(c, &mut sc, &mut body, 2, 2, true);
            for _ in 0..self.rng.gen_range(1..3) {
                self.interaction(c, &mut sc, &mut body, 2);
                self.effect(c, &mut sc, &mut body, 2, 1);
            }
        }
        out.push_str(&body);
        if returns {
            let e = self.int_expr(c, &sc, 1);
            let _ = writeln!(out, "        return {e};");
        }
        out.push_str("    }\n");
    }

    fn program(&mut self) -> String {
        let n = self.rng.gen_range(1..=self.opts.max_contracts.clamp(1, 26));
        for i in 0..n {
            let ints = (0..self.rng.gen_range(1..4))
                .map(|k| (format!("x{k}"), self.rng.gen_bool(0.25)))
                .collect();
            let peers = (0..n).filter(|&j| j != i && self.rng.gen_bool(0.6)).collect();
            let mut sigs: Vec<usize> = (0..SIGNATURES.len()).collect();
            sigs.shuffle(&mut self.rng);
            sigs.truncate(self.rng.gen_range(1..=self.opts.max_methods.clamp(1, SIGNATURES.len())));
            let methods = sigs.into_iter().map(|s| (s, None)).collect();
            self.contracts.push(Contract {
                name: ((b'A' + i as u8) as char).to_string(),
                ints,
                list: self.opts.lists && self.rng.gen_bool(0.5),
                peers,
                methods,
                ctor_param: self.rng.gen_bool(0.3),
            });
        }
        // `sender` calls need one signature per name, so contract
        // parameters are added per name across all contracts
        for sig in 0..SIGNATURES.len() {
            if self.rng.gen_bool(0.25) {
                let t = self.rng.gen_range(0..n);
                for k in &mut self.contracts {
                    for m in &mut k.methods {
                        if m.0 == sig {
                            m.1 = Some(t);
                        }
                    }
                }
            }
        }
        let mut out = String::new();
        if self.contracts.iter().any(|c| c.list) {
            out.push_str(LIST);
        }
        for c in 0..n {
            self.contract(c, &mut out);
        }
        out
    }

    fn contract(&mut self, c: usize, out: &mut String) {
        let k = &self.contracts[c];
        let _ = writeln!(out, "contract {} {{", k.name);
        for (f, irr) in &k.ints {
            let _ = writeln!(out, "    {}int {f};", if *irr { "irrelevant " } else { "" });
        }
        if k.list {
            out.push_str("    ListInt log;\n");
        }
        for &p in &k.peers {
            let name = &self.contracts[p].name;
            let _ = writeln!(out, "    {name} p{name};");
        }
        let created: Vec<usize> = k.peers.iter().copied().filter(|&p| p > c).collect();
        if k.ctor_param || !created.is_empty() {
            let param = if k.ctor_param { "int init" } else { "" };
            let _ = writeln!(out, "    constructor({param}) {{");
            if k.ctor_param {
                let _ = writeln!(out, "        this.{} = init;", k.ints[0].0);
            }
            for p in created {
                let q = &self.contracts[p];
                let arg = if q.ctor_param { "1" } else { "" };
                let _ = writeln!(out, "        this.p{} = new {}({arg});", q.name, q.name);
            }
            out.push_str("    }\n");
        }
        for m in 0..self.contracts[c].methods.len() {
            self.method(c, m, out);
        }
        out.push_str("}\n\n");
    }
}

/// Source text of a random program, deterministic in `seed`.
pub fn generate(seed: u64, opts: &ProgenOptions) -> String {
    Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        opts,
        contracts: Vec::new(),
    }
    .program()
}
