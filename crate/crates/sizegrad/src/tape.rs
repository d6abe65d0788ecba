//! Reverse-mode automatic differentiation on a flat scalar tape.
//!
//! Every recorded operation stores its operand indices and local partial
//! derivatives, so a single backward sweep yields the gradient of one output
//! with respect to every variable on the tape. The tape also carries the
//! sizing round operation ([`Tape::ste_round`]), whose backward rule is the
//! straight-through estimator: the incoming gradient passes through with
//! multiplier 1, except at a clamped boundary where the outward component is
//! dropped.
//!
//! Gradient sign convention: the taped output is treated as a quantity to
//! *increase* (slack-like). "Outward" at the lower boundary therefore means a
//! negative adjoint (pushing the size below index 0), and at the upper
//! boundary a positive adjoint.

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Leaf or operation with precomputed local partials.
    Plain,
    /// Straight-through round, interior point.
    SteInterior,
    /// Straight-through round, clamped at the lower index bound.
    SteLow,
    /// Straight-through round, clamped at the upper index bound.
    SteHigh,
}

/// Backward behaviour of the round estimator. [`SteBackward::Zero`] is a
/// fault-injection hook used by `verify --break-ste`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteBackward {
    #[default]
    Unit,
    Zero,
}

#[derive(Clone, Copy)]
struct Node {
    value: f64,
    pa: u32,
    pb: u32,
    da: f64,
    db: f64,
    kind: Kind,
}

const NONE: u32 = u32::MAX;

/// Gradients of one taped output with respect to every node.
pub struct Gradients(Vec<f64>);

impl Gradients {
    /// Gradient with respect to `v`.
    pub fn wrt(&self, v: Var) -> f64 {
        self.0[v.0 as usize]
    }
}

/// Flat reverse-mode tape.
pub struct Tape {
    nodes: Vec<Node>,
    ste_backward: SteBackward,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            ste_backward: SteBackward::Unit,
        }
    }

    pub fn with_ste_backward(mode: SteBackward) -> Self {
        Tape {
            nodes: Vec::new(),
            ste_backward: mode,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: f64, pa: u32, pb: u32, da: f64, db: f64, kind: Kind) -> Var {
        debug_assert!(self.nodes.len() < NONE as usize);
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            value,
            pa,
            pb,
            da,
            db,
            kind,
        });
        Var(idx)
    }

    /// Record an independent variable.
    pub fn var(&mut self, value: f64) -> Var {
        self.push(value, NONE, NONE, 0.0, 0.0, Kind::Plain)
    }

    /// Record a constant (no gradient flows into it).
    pub fn c(&mut self, value: f64) -> Var {
        self.push(value, NONE, NONE, 0.0, 0.0, Kind::Plain)
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0 as usize].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, a.0, b.0, 1.0, 1.0, Kind::Plain)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, a.0, b.0, 1.0, -1.0, Kind::Plain)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(va * vb, a.0, b.0, vb, va, Kind::Plain)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(va / vb, a.0, b.0, 1.0 / vb, -va / (vb * vb), Kind::Plain)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.push(v, a.0, NONE, -1.0, 0.0, Kind::Plain)
    }

    /// `a + k` for a plain constant `k`.
    pub fn addc(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.push(v, a.0, NONE, 1.0, 0.0, Kind::Plain)
    }

    /// `a * k` for a plain constant `k`.
    pub fn mulc(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, a.0, NONE, k, 0.0, Kind::Plain)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.push(v, a.0, NONE, v, 0.0, Kind::Plain)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let va = self.value(a);
        self.push(va.ln(), a.0, NONE, 1.0 / va, 0.0, Kind::Plain)
    }

    /// Numerically stable `ln(1 + exp(a))`; derivative is the logistic function.
    pub fn softplus(&mut self, a: Var) -> Var {
        let z = self.value(a);
        let v = z.max(0.0) + (-z.abs()).exp().ln_1p();
        let d = 1.0 / (1.0 + (-z).exp());
        self.push(v, a.0, NONE, d, 0.0, Kind::Plain)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let va = self.value(a);
        if va > 0.0 {
            self.push(va, a.0, NONE, 1.0, 0.0, Kind::Plain)
        } else {
            self.push(0.0, a.0, NONE, 0.0, 0.0, Kind::Plain)
        }
    }

    /// Hard `min(a, b)`; the subgradient goes to the smaller operand
    /// (to `a` on ties).
    pub fn min2(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        if va <= vb {
            self.push(va, a.0, b.0, 1.0, 0.0, Kind::Plain)
        } else {
            self.push(vb, a.0, b.0, 0.0, 1.0, Kind::Plain)
        }
    }

    /// Hard `max(a, b)`; the subgradient goes to the larger operand
    /// (to `a` on ties).
    pub fn max2(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        if va >= vb {
            self.push(va, a.0, b.0, 1.0, 0.0, Kind::Plain)
        } else {
            self.push(vb, a.0, b.0, 0.0, 1.0, Kind::Plain)
        }
    }

    /// Hard `min(0, a)`: zero for nonnegative inputs, identity below zero.
    pub fn min0(&mut self, a: Var) -> Var {
        let va = self.value(a);
        if va < 0.0 {
            self.push(va, a.0, NONE, 1.0, 0.0, Kind::Plain)
        } else {
            self.push(0.0, a.0, NONE, 0.0, 0.0, Kind::Plain)
        }
    }

    /// Left-associated sum of a slice of values.
    pub fn sum(&mut self, vs: &[Var]) -> Var {
        let mut it = vs.iter();
        let first = match it.next() {
            Some(&v) => v,
            None => return self.c(0.0),
        };
        it.fold(first, |acc, &v| self.add(acc, v))
    }

    /// Round a continuous size coordinate to the nearest integer index in
    /// `[0, n_sizes - 1]` (half away from zero). The backward rule passes the
    /// gradient through with multiplier 1; at a clamped boundary the outward
    /// component is zeroed so the estimator cannot push a size out of the
    /// library's table.
    pub fn ste_round(&mut self, a: Var, n_sizes: usize) -> Var {
        assert!(n_sizes >= 1);
        let hi = (n_sizes - 1) as f64;
        let va = self.value(a);
        let rounded = va.round().clamp(0.0, hi);
        let kind = if va <= 0.0 {
            Kind::SteLow
        } else if va >= hi {
            Kind::SteHigh
        } else {
            Kind::SteInterior
        };
        self.push(rounded, a.0, NONE, 1.0, 0.0, kind)
    }

    /// Reverse sweep from `output`; returns the adjoint of every node.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut adj = vec![0.0_f64; self.nodes.len()];
        adj[output.0 as usize] = 1.0;
        for i in (0..=output.0 as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = self.nodes[i];
            match node.kind {
                Kind::Plain => {
                    if node.pa != NONE && node.da != 0.0 {
                        adj[node.pa as usize] += node.da * a;
                    }
                    if node.pb != NONE && node.db != 0.0 {
                        adj[node.pb as usize] += node.db * a;
                    }
                }
                Kind::SteInterior | Kind::SteLow | Kind::SteHigh => {
                    let passed = match self.ste_backward {
                        SteBackward::Zero => 0.0,
                        SteBackward::Unit => match node.kind {
                            Kind::SteLow if a < 0.0 => 0.0,
                            Kind::SteHigh if a > 0.0 => 0.0,
                            _ => a,
                        },
                    };
                    if passed != 0.0 {
                        adj[node.pa as usize] += passed;
                    }
                }
            }
        }
        Gradients(adj)
    }
}

/// Arithmetic over either plain `f64` or taped variables. Shared numeric
/// routines (delay models, slack sums) are written once against this trait so
/// the golden and differentiable evaluations perform bit-identical float
/// operation sequences.
pub trait Engine {
    type V: Copy;
    fn c(&mut self, value: f64) -> Self::V;
    fn add(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn sub(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn addc(&mut self, a: Self::V, k: f64) -> Self::V;
    fn mulc(&mut self, a: Self::V, k: f64) -> Self::V;
    fn min0(&mut self, a: Self::V) -> Self::V;
    fn min2(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn val(&self, a: Self::V) -> f64;
}

/// Zero-cost engine over plain `f64`.
pub struct Plain;

impl Engine for Plain {
    type V = f64;
    fn c(&mut self, value: f64) -> f64 {
        value
    }
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn addc(&mut self, a: f64, k: f64) -> f64 {
        a + k
    }
    fn mulc(&mut self, a: f64, k: f64) -> f64 {
        a * k
    }
    fn min0(&mut self, a: f64) -> f64 {
        if a < 0.0 {
            a
        } else {
            0.0
        }
    }
    fn min2(&mut self, a: f64, b: f64) -> f64 {
        if a <= b {
            a
        } else {
            b
        }
    }
    fn val(&self, a: f64) -> f64 {
        a
    }
}

impl Engine for Tape {
    type V = Var;
    fn c(&mut self, value: f64) -> Var {
        Tape::c(self, value)
    }
    fn add(&mut self, a: Var, b: Var) -> Var {
        Tape::add(self, a, b)
    }
    fn sub(&mut self, a: Var, b: Var) -> Var {
        Tape::sub(self, a, b)
    }
    fn mul(&mut self, a: Var, b: Var) -> Var {
        Tape::mul(self, a, b)
    }
    fn addc(&mut self, a: Var, k: f64) -> Var {
        Tape::addc(self, a, k)
    }
    fn mulc(&mut self, a: Var, k: f64) -> Var {
        Tape::mulc(self, a, k)
    }
    fn min0(&mut self, a: Var) -> Var {
        Tape::min0(self, a)
    }
    fn min2(&mut self, a: Var, b: Var) -> Var {
        Tape::min2(self, a, b)
    }
    fn val(&self, a: Var) -> f64 {
        self.value(a)
    }
}

/// One randomly generated smooth expression, evaluable both on the tape and
/// in plain arithmetic. Used by the gradient-check suite: the finite
/// difference oracle runs on the plain path and never touches the backward
/// sweep it is checking.
#[derive(Debug, Clone)]
enum Expr {
    Input(usize),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log1pSq(Box<Expr>),
    SmoothMax(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn eval_plain(&self, xs: &[f64]) -> f64 {
        match self {
            Expr::Input(i) => xs[*i],
            Expr::Const(k) => *k,
            Expr::Add(a, b) => a.eval_plain(xs) + b.eval_plain(xs),
            Expr::Sub(a, b) => a.eval_plain(xs) - b.eval_plain(xs),
            Expr::Mul(a, b) => a.eval_plain(xs) * b.eval_plain(xs),
            Expr::Exp(a) => (0.25 * a.eval_plain(xs)).exp(),
            Expr::Log1pSq(a) => {
                let v = a.eval_plain(xs);
                (1.0 + v * v).ln()
            }
            Expr::SmoothMax(a, b) => {
                let (va, vb) = (a.eval_plain(xs), b.eval_plain(xs));
                let m = va.max(vb);
                m + ((va - m).exp() + (vb - m).exp()).ln()
            }
        }
    }

    fn eval_tape(&self, tape: &mut Tape, xs: &[Var]) -> Var {
        match self {
            Expr::Input(i) => xs[*i],
            Expr::Const(k) => tape.c(*k),
            Expr::Add(a, b) => {
                let (va, vb) = (a.eval_tape(tape, xs), b.eval_tape(tape, xs));
                tape.add(va, vb)
            }
            Expr::Sub(a, b) => {
                let (va, vb) = (a.eval_tape(tape, xs), b.eval_tape(tape, xs));
                tape.sub(va, vb)
            }
            Expr::Mul(a, b) => {
                let (va, vb) = (a.eval_tape(tape, xs), b.eval_tape(tape, xs));
                tape.mul(va, vb)
            }
            Expr::Exp(a) => {
                let va = a.eval_tape(tape, xs);
                let scaled = tape.mulc(va, 0.25);
                tape.exp(scaled)
            }
            Expr::Log1pSq(a) => {
                let va = a.eval_tape(tape, xs);
                let sq = tape.mul(va, va);
                let shifted = tape.addc(sq, 1.0);
                tape.ln(shifted)
            }
            Expr::SmoothMax(a, b) => {
                let (va, vb) = (a.eval_tape(tape, xs), b.eval_tape(tape, xs));
                let m = tape.val(va).max(tape.val(vb));
                let ea = tape.addc(va, -m);
                let eb = tape.addc(vb, -m);
                let (xa, xb) = (tape.exp(ea), tape.exp(eb));
                let s = tape.add(xa, xb);
                let l = tape.ln(s);
                tape.addc(l, m)
            }
        }
    }
}

fn random_expr(rng: &mut rand_chacha::ChaCha20Rng, depth: usize, n_inputs: usize) -> Expr {
    use rand::Rng;
    if depth == 0 {
        if rng.gen_bool(0.7) {
            Expr::Input(rng.gen_range(0..n_inputs))
        } else {
            Expr::Const(rng.gen_range(-1.5..1.5))
        }
    } else {
        let mut sub = |rng: &mut rand_chacha::ChaCha20Rng| {
            Box::new(random_expr(rng, depth - 1, n_inputs))
        };
        match rng.gen_range(0..6) {
            0 => Expr::Add(sub(rng), sub(rng)),
            1 => Expr::Sub(sub(rng), sub(rng)),
            2 => Expr::Mul(sub(rng), sub(rng)),
            3 => Expr::Exp(sub(rng)),
            4 => Expr::Log1pSq(sub(rng)),
            _ => Expr::SmoothMax(sub(rng), sub(rng)),
        }
    }
}

/// Check backward gradients of `count` random smooth expressions against
/// central finite differences (relative tolerance 1e-4), then check the
/// straight-through identity (the adjoint at the round estimator's input
/// equals the adjoint at its output, bitwise) at interior points. Returns the
/// first failure as an error message. Also exercised by `verify`.
pub fn gradcheck_random_expressions(
    count: usize,
    seed: u64,
    ste_backward: SteBackward,
) -> Result<(), String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    for case in 0..count {
        let n_inputs = rng.gen_range(2..5);
        let expr = random_expr(&mut rng, 3, n_inputs);
        let xs: Vec<f64> = (0..n_inputs).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut tape = Tape::with_ste_backward(ste_backward);
        let vars: Vec<Var> = xs.iter().map(|&x| tape.var(x)).collect();
        let out = expr.eval_tape(&mut tape, &vars);
        let grads = tape.backward(out);

        let h = 1e-5;
        for i in 0..n_inputs {
            let mut lo = xs.clone();
            let mut hi = xs.clone();
            lo[i] -= h;
            hi[i] += h;
            let fd = (expr.eval_plain(&hi) - expr.eval_plain(&lo)) / (2.0 * h);
            let got = grads.wrt(vars[i]);
            let denom = fd.abs().max(1e-6);
            if ((got - fd) / denom).abs() > 1e-4 {
                return Err(format!("case {case}: d/dx{i} tape={got:.9} fd={fd:.9}"));
            }
        }
    }

    // Straight-through identity at interior coordinates.
    for case in 0..count {
        let coord = rng.gen_range(0.6..6.4);
        let slope = rng.gen_range(0.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut tape = Tape::with_ste_backward(ste_backward);
        let g = tape.var(coord);
        let idx = tape.ste_round(g, 8);
        let out = tape.mulc(idx, slope);
        let grads = tape.backward(out);
        if grads.wrt(g).to_bits() != grads.wrt(idx).to_bits() {
            return Err(format!(
                "ste case {case}: adjoint at input {} != adjoint at output {}",
                grads.wrt(g),
                grads.wrt(idx)
            ));
        }
    }
    Ok(())
}
