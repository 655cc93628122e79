//! A minimal reverse-mode differentiation tape over `f64` scalars.
//!
//! Every node stores at most two parents together with the local partial
//! derivatives with respect to them. The partials of nonsmooth primitives at
//! their kinks are taken from a [`KinkPolicy`], so the adjoint returned by
//! [`Tape::gradient`] is the chain-rule element of a conservative field,
//! exactly what an AD framework computes.

use alloc::vec;
use alloc::vec::Vec;

use super::KinkPolicy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Var {
    index: usize,
    value: f64,
}

impl Var {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [usize; 2],
    partials: [f64; 2],
    arity: u8,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: f64, parents: [usize; 2], partials: [f64; 2], arity: u8) -> Var {
        let index = self.nodes.len();
        self.nodes.push(Node {
            parents,
            partials,
            arity,
        });
        Var { index, value }
    }

    /// An independent variable (or a constant whose adjoint is ignored).
    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(value, [0, 0], [0.0, 0.0], 0)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(a.value + b.value, [a.index, b.index], [1.0, 1.0], 2)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push(a.value - b.value, [a.index, b.index], [1.0, -1.0], 2)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push(a.value * b.value, [a.index, b.index], [b.value, a.value], 2)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.push(c * a.value, [a.index, 0], [c, 0.0], 1)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.push(a.value + c, [a.index, 0], [1.0, 0.0], 1)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.push(a.value * a.value, [a.index, 0], [2.0 * a.value, 0.0], 1)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = libm::exp(a.value);
        self.push(e, [a.index, 0], [e, 0.0], 1)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.push(libm::log(a.value), [a.index, 0], [1.0 / a.value, 0.0], 1)
    }

    /// `max(a, 0)` with `relu'(0) = policy.relu_at_zero`.
    pub fn relu(&mut self, a: Var, policy: &KinkPolicy) -> Var {
        self.push(
            a.value.max(0.0),
            [a.index, 0],
            [policy.relu_derivative(a.value), 0.0],
            1,
        )
    }

    /// `max(a, slope·a)` for `slope` in `[0, 1)`. At zero the derivative is
    /// the point of `[slope, 1]` given by `relu_at_zero`.
    pub fn leaky_relu(&mut self, a: Var, slope: f64, policy: &KinkPolicy) -> Var {
        let d = if a.value > 0.0 {
            1.0
        } else if a.value < 0.0 {
            slope
        } else {
            slope + policy.relu_at_zero * (1.0 - slope)
        };
        let value = if a.value >= 0.0 {
            a.value
        } else {
            slope * a.value
        };
        self.push(value, [a.index, 0], [d, 0.0], 1)
    }

    /// `|a|` with `|·|'(0) = policy.abs_at_zero`.
    pub fn abs(&mut self, a: Var, policy: &KinkPolicy) -> Var {
        self.push(
            a.value.abs(),
            [a.index, 0],
            [policy.abs_derivative(a.value), 0.0],
            1,
        )
    }

    /// Sum of a slice of variables (a left fold of binary additions).
    pub fn sum(&mut self, vars: &[Var]) -> Var {
        let mut it = vars.iter().copied();
        let first = it.next().unwrap_or_else(|| self.leaf(0.0));
        it.fold(first, |acc, v| self.add(acc, v))
    }

    /// Adjoints `d output / d node` for every node on the tape.
    pub fn gradient(&self, output: Var) -> Vec<f64> {
        let mut adj = vec![0.0; self.nodes.len()];
        adj[output.index] = 1.0;
        for idx in (0..=output.index).rev() {
            let a = adj[idx];
            if a == 0.0 {
                continue;
            }
            let node = self.nodes[idx];
            for p in 0..node.arity as usize {
                adj[node.parents[p]] += a * node.partials[p];
            }
        }
        adj
    }
}
