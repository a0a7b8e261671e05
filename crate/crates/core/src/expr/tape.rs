use super::{average, int_pow, Expr, ExprError, SubgradientBundle};

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Var(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i32),
    Max(Vec<usize>),
}

/// Post-order tape of an expression; the last slot is the root.
///
/// Forward mode carries a dense gradient per slot, so one pass yields the
/// value and gradient of every subexpression.
#[derive(Debug, Clone)]
pub struct Compiled {
    ops: Vec<Op>,
    needed: usize,
}

struct Forward {
    vals: Vec<f64>,
    grads: Vec<f64>,
    dim: usize,
}

impl Forward {
    fn grad(&self, slot: usize) -> &[f64] {
        &self.grads[slot * self.dim..(slot + 1) * self.dim]
    }
}

impl Compiled {
    pub fn new(expr: &Expr) -> Self {
        let mut ops = Vec::new();
        push(expr, &mut ops);
        Compiled { ops, needed: expr.max_var().map_or(0, |i| i + 1) }
    }

    /// Minimum point length accepted.
    pub fn arity(&self) -> usize {
        self.needed
    }

    fn check(&self, x: &[f64]) -> Result<(), ExprError> {
        if x.len() < self.needed {
            Err(ExprError::Dimension { needed: self.needed, got: x.len() })
        } else {
            Ok(())
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.check(x)?;
        let mut vals: Vec<f64> = Vec::with_capacity(self.ops.len());
        for (k, op) in self.ops.iter().enumerate() {
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(i) => x[*i],
                Op::Neg(a) => -vals[*a],
                Op::Add(a, b) => vals[*a] + vals[*b],
                Op::Sub(a, b) => vals[*a] - vals[*b],
                Op::Mul(a, b) => vals[*a] * vals[*b],
                Op::Div(a, b) => {
                    if vals[*b] == 0.0 {
                        return Err(ExprError::DivisionByZero { node: self.render(k) });
                    }
                    vals[*a] / vals[*b]
                }
                Op::Pow(a, p) => {
                    if vals[*a] == 0.0 && *p < 0 {
                        return Err(ExprError::DivisionByZero { node: self.render(k) });
                    }
                    int_pow(vals[*a], *p)
                }
                Op::Max(cs) => cs.iter().map(|c| vals[*c]).fold(f64::NEG_INFINITY, f64::max),
            };
            if !v.is_finite() {
                return Err(ExprError::Overflow { node: self.render(k) });
            }
            vals.push(v);
        }
        Ok(*vals.last().expect("tape is never empty"))
    }

    fn forward(&self, x: &[f64], active_tol: f64) -> Result<Forward, ExprError> {
        self.check(x)?;
        let dim = x.len();
        let n = self.ops.len();
        let mut f = Forward { vals: vec![0.0; n], grads: vec![0.0; n * dim], dim };
        for (k, op) in self.ops.iter().enumerate() {
            let (done, rest) = f.grads.split_at_mut(k * dim);
            let g = &mut rest[..dim];
            let gd = |s: usize| &done[s * dim..(s + 1) * dim];
            let vals = &f.vals;
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(i) => {
                    g[*i] = 1.0;
                    x[*i]
                }
                Op::Neg(a) => {
                    for (gi, ai) in g.iter_mut().zip(gd(*a)) {
                        *gi = -ai;
                    }
                    -vals[*a]
                }
                Op::Add(a, b) => {
                    for ((gi, ai), bi) in g.iter_mut().zip(gd(*a)).zip(gd(*b)) {
                        *gi = ai + bi;
                    }
                    vals[*a] + vals[*b]
                }
                Op::Sub(a, b) => {
                    for ((gi, ai), bi) in g.iter_mut().zip(gd(*a)).zip(gd(*b)) {
                        *gi = ai - bi;
                    }
                    vals[*a] - vals[*b]
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (vals[*a], vals[*b]);
                    for ((gi, ai), bi) in g.iter_mut().zip(gd(*a)).zip(gd(*b)) {
                        *gi = ai * vb + va * bi;
                    }
                    va * vb
                }
                Op::Div(a, b) => {
                    let (va, vb) = (vals[*a], vals[*b]);
                    if vb == 0.0 {
                        return Err(ExprError::DivisionByZero { node: self.render(k) });
                    }
                    let q = va / vb;
                    for ((gi, ai), bi) in g.iter_mut().zip(gd(*a)).zip(gd(*b)) {
                        *gi = (ai - q * bi) / vb;
                    }
                    q
                }
                Op::Pow(a, p) => {
                    let va = vals[*a];
                    if va == 0.0 && *p < 0 {
                        return Err(ExprError::DivisionByZero { node: self.render(k) });
                    }
                    let d = if *p == 0 { 0.0 } else { *p as f64 * int_pow(va, p - 1) };
                    for (gi, ai) in g.iter_mut().zip(gd(*a)) {
                        *gi = d * ai;
                    }
                    int_pow(va, *p)
                }
                Op::Max(cs) => {
                    let top = cs.iter().map(|c| vals[*c]).fold(f64::NEG_INFINITY, f64::max);
                    let active: Vec<usize> = cs.iter().copied().filter(|c| vals[*c] >= top - active_tol).collect();
                    if active.is_empty() {
                        return Err(ExprError::EmptyActiveSet { node: self.render(k) });
                    }
                    let w = 1.0 / active.len() as f64;
                    for c in &active {
                        for (gi, ci) in g.iter_mut().zip(gd(*c)) {
                            *gi += w * ci;
                        }
                    }
                    top
                }
            };
            if !v.is_finite() || g.iter().any(|d| !d.is_finite()) {
                return Err(ExprError::Overflow { node: self.render(k) });
            }
            f.vals[k] = v;
        }
        Ok(f)
    }

    /// Value and selected (sub)gradient; nested `max` nodes use the uniform average.
    pub fn value_grad(&self, x: &[f64], active_tol: f64) -> Result<(f64, Vec<f64>), ExprError> {
        let f = self.forward(x, active_tol)?;
        let root = self.ops.len() - 1;
        Ok((f.vals[root], f.grad(root).to_vec()))
    }

    /// Value and Clarke bundle at `x`; see [`super::clarke_subgradient`].
    pub fn bundle(&self, x: &[f64], active_tol: f64) -> Result<SubgradientBundle, ExprError> {
        self.value_bundle(x, active_tol).map(|(_, b)| b)
    }

    pub fn value_bundle(&self, x: &[f64], active_tol: f64) -> Result<(f64, SubgradientBundle), ExprError> {
        let f = self.forward(x, active_tol)?;
        let root = self.ops.len() - 1;
        let value = f.vals[root];
        let bundle = match &self.ops[root] {
            Op::Max(cs) => {
                let (active_indices, generators): (Vec<usize>, Vec<Vec<f64>>) = cs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| f.vals[**c] >= value - active_tol)
                    .map(|(i, c)| (i, f.grad(*c).to_vec()))
                    .unzip();
                let selection = average(&generators);
                SubgradientBundle { active_indices, generators, selection }
            }
            _ => {
                let g = f.grad(root).to_vec();
                SubgradientBundle { active_indices: vec![0], selection: g.clone(), generators: vec![g] }
            }
        };
        Ok((value, bundle))
    }

    fn render(&self, slot: usize) -> String {
        to_expr(&self.ops, slot).to_string()
    }
}

fn push(e: &Expr, ops: &mut Vec<Op>) -> usize {
    let op = match e {
        Expr::Const(c) => Op::Const(*c),
        Expr::Var(i) => Op::Var(*i),
        Expr::Neg(a) => Op::Neg(push(a, ops)),
        Expr::Add(a, b) => {
            let (a, b) = (push(a, ops), push(b, ops));
            Op::Add(a, b)
        }
        Expr::Sub(a, b) => {
            let (a, b) = (push(a, ops), push(b, ops));
            Op::Sub(a, b)
        }
        Expr::Mul(a, b) => {
            let (a, b) = (push(a, ops), push(b, ops));
            Op::Mul(a, b)
        }
        Expr::Div(a, b) => {
            let (a, b) = (push(a, ops), push(b, ops));
            Op::Div(a, b)
        }
        Expr::Pow(a, k) => Op::Pow(push(a, ops), *k),
        Expr::Max(cs) => Op::Max(cs.iter().map(|c| push(c, ops)).collect()),
    };
    ops.push(op);
    ops.len() - 1
}

fn to_expr(ops: &[Op], slot: usize) -> Expr {
    let b = |s: usize| Box::new(to_expr(ops, s));
    match &ops[slot] {
        Op::Const(c) => Expr::Const(*c),
        Op::Var(i) => Expr::Var(*i),
        Op::Neg(a) => Expr::Neg(b(*a)),
        Op::Add(x, y) => Expr::Add(b(*x), b(*y)),
        Op::Sub(x, y) => Expr::Sub(b(*x), b(*y)),
        Op::Mul(x, y) => Expr::Mul(b(*x), b(*y)),
        Op::Div(x, y) => Expr::Div(b(*x), b(*y)),
        Op::Pow(x, k) => Expr::Pow(b(*x), *k),
        Op::Max(cs) => Expr::Max(cs.iter().map(|c| to_expr(ops, *c)).collect()),
    }
}
