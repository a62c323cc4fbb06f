//! Scalar reverse-mode tape for losses given as arbitrary closures.
//!
//! Every operation records its inputs and local partial derivatives; the
//! adjoint sweep walks the record backwards once.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [(usize, f64); 2],
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, value: f64, parents: [(usize, f64); 2]) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents });
        Var {
            tape: self,
            index: nodes.len() - 1,
            value,
        }
    }

    /// An independent input.
    pub fn var(&self, value: f64) -> Var<'_> {
        // self-loops with zero weight mark leaves
        let i = self.nodes.borrow().len();
        self.push(value, [(i, 0.0), (i, 0.0)])
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.var(value)
    }

    /// Adjoints of every recorded node with respect to `output`.
    pub fn adjoints(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[output.index] = 1.0;
        for i in (0..=output.index).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            for &(p, w) in &nodes[i].parents {
                if p != i {
                    adj[p] += w * a;
                }
            }
        }
        adj
    }

    /// Value and gradient of `f` at `x`, where `f` builds its result on a fresh tape.
    pub fn gradient<F>(f: F, x: &[f64]) -> (f64, Vec<f64>)
    where
        F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
    {
        let tape = Tape::new();
        let inputs: Vec<Var<'_>> = x.iter().map(|&v| tape.var(v)).collect();
        let out = f(&tape, &inputs);
        let adj = tape.adjoints(out);
        let grad = inputs.iter().map(|v| adj[v.index]).collect();
        (out.value, grad)
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    fn unary(self, value: f64, partial: f64) -> Self {
        self.tape
            .push(value, [(self.index, partial), (self.index, 0.0)])
    }

    pub fn sin(self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }

    pub fn powi(self, n: i32) -> Self {
        self.unary(self.value.powi(n), n as f64 * self.value.powi(n - 1))
    }

    pub fn scale(self, c: f64) -> Self {
        self.unary(self.value * c, c)
    }

    pub fn shift(self, c: f64) -> Self {
        self.unary(self.value + c, 1.0)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.tape
            .push(self.value + o.value, [(self.index, 1.0), (o.index, 1.0)])
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.tape
            .push(self.value - o.value, [(self.index, 1.0), (o.index, -1.0)])
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.tape.push(
            self.value * o.value,
            [(self.index, o.value), (o.index, self.value)],
        )
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.value / o.value;
        self.tape
            .push(q, [(self.index, 1.0 / o.value), (o.index, -q / o.value)])
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}
