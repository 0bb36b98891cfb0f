//! Reverse-mode accumulation over a flat parameter vector.
//!
//! A [`Tape`] records every scalar operation as a node with at most two parents
//! and the local partial derivatives. Parameters occupy the first node slots, so
//! the reverse sweep leaves their adjoints at the front of the adjoint buffer.
//!
//! Large vectorised sub-computations (the network's jet pass) are recorded as
//! opaque [`Block`]s: a head node followed by one node per block output. The
//! block supplies its own vector-Jacobian product into the parameter adjoints.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::jet::Scalar;
use super::AutodiffError;

/// A recorded sub-computation whose inputs are tape parameters only.
pub trait Block {
    /// Adds `d(outputs)/d(params)^T * output_adjoints` into `param_adjoints`.
    fn backward(&self, params: &[f64], output_adjoints: &[f64], param_adjoints: &mut [f64]);
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Leaf,
    Unary { a: u32, da: f64 },
    Binary { a: u32, b: u32, da: f64, db: f64 },
    BlockHead { block: u32, first: u32, len: u32 },
}

/// Differentiable evaluation context bound to one parameter vector.
///
/// Single-use per step and confined to one thread; build a fresh tape for each
/// evaluation.
pub struct Tape {
    params: Vec<f64>,
    nodes: RefCell<Vec<Node>>,
    blocks: RefCell<Vec<Box<dyn Block>>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("params", &self.params.len())
            .field("nodes", &self.nodes.borrow().len())
            .field("blocks", &self.blocks.borrow().len())
            .finish()
    }
}

impl Tape {
    pub fn new(params: &[f64]) -> Self {
        Self::with_capacity(params, 0)
    }

    pub fn with_capacity(params: &[f64], extra_nodes: usize) -> Self {
        let mut nodes = Vec::with_capacity(params.len() + extra_nodes);
        nodes.resize(params.len(), Node::Leaf);
        Self { params: params.to_vec(), nodes: RefCell::new(nodes), blocks: RefCell::new(Vec::new()) }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn param_values(&self) -> &[f64] {
        &self.params
    }

    pub fn param(&self, i: usize) -> Var<'_> {
        assert!(i < self.params.len(), "parameter index {i} out of range");
        Var { tape: self, idx: i as u32, val: self.params[i] }
    }

    pub fn params(&self) -> Vec<Var<'_>> {
        (0..self.params.len()).map(|i| self.param(i)).collect()
    }

    /// A value with no dependence on the parameters.
    pub fn constant(&self, val: f64) -> Var<'_> {
        self.push(Node::Leaf, val)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node, val: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(node);
        Var { tape: self, idx, val }
    }

    fn unary(&self, a: u32, da: f64, val: f64) -> Var<'_> {
        self.push(Node::Unary { a, da }, val)
    }

    fn binary(&self, a: u32, b: u32, da: f64, db: f64, val: f64) -> Var<'_> {
        self.push(Node::Binary { a, b, da, db }, val)
    }

    /// Records an opaque block and returns one variable per output value.
    pub fn push_block(&self, block: Box<dyn Block>, outputs: &[f64]) -> Vec<Var<'_>> {
        let block_idx = {
            let mut blocks = self.blocks.borrow_mut();
            blocks.push(block);
            (blocks.len() - 1) as u32
        };
        let mut nodes = self.nodes.borrow_mut();
        let first = nodes.len() as u32 + 1;
        nodes.push(Node::BlockHead { block: block_idx, first, len: outputs.len() as u32 });
        nodes.extend(std::iter::repeat_n(Node::Leaf, outputs.len()));
        drop(nodes);
        outputs.iter().enumerate().map(|(k, &val)| Var { tape: self, idx: first + k as u32, val }).collect()
    }

    /// Exact gradient of `loss` with respect to every parameter, in parameter order.
    pub fn gradient(&self, loss: Var<'_>) -> Result<Vec<f64>, AutodiffError> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(AutodiffError::ForeignValue);
        }
        let nodes = self.nodes.borrow();
        let blocks = self.blocks.borrow();
        let n_params = self.params.len();
        let mut adj = vec![0.0; loss.idx as usize + 1];
        adj[loss.idx as usize] = 1.0;
        for i in (n_params..adj.len()).rev() {
            match nodes[i] {
                Node::Leaf => {}
                Node::Unary { a, da } => {
                    let g = adj[i];
                    if g != 0.0 {
                        adj[a as usize] += da * g;
                    }
                }
                Node::Binary { a, b, da, db } => {
                    let g = adj[i];
                    if g != 0.0 {
                        adj[a as usize] += da * g;
                        adj[b as usize] += db * g;
                    }
                }
                Node::BlockHead { block, first, len } => {
                    let (front, back) = adj.split_at_mut(n_params);
                    let start = first as usize - n_params;
                    let end = (start + len as usize).min(back.len());
                    let mut out_adj = back[start..end].to_vec();
                    // outputs recorded after the loss carry no adjoint
                    out_adj.resize(len as usize, 0.0);
                    if out_adj.iter().any(|&g| g != 0.0) {
                        blocks[block as usize].backward(&self.params, &out_adj, front);
                    }
                }
            }
        }
        adj.truncate(n_params);
        adj.resize(n_params, 0.0);
        Ok(adj)
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} = {})", self.idx, self.val)
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.val
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    #[inline]
    fn same_tape(self, other: Var<'t>) {
        assert!(std::ptr::eq(self.tape, other.tape), "combined variables from different tapes");
    }

    pub fn square(self) -> Self {
        self.tape.unary(self.idx, 2.0 * self.val, self.val * self.val)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.same_tape(rhs);
        self.tape.binary(self.idx, rhs.idx, 1.0, 1.0, self.val + rhs.val)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.same_tape(rhs);
        self.tape.binary(self.idx, rhs.idx, 1.0, -1.0, self.val - rhs.val)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self.same_tape(rhs);
        self.tape.binary(self.idx, rhs.idx, rhs.val, self.val, self.val * rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn neg(self) -> Self {
        self.tape.unary(self.idx, -1.0, -self.val)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, c: f64) -> Self {
        self.tape.unary(self.idx, 1.0, self.val + c)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, c: f64) -> Self {
        self.tape.unary(self.idx, 1.0, self.val - c)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, c: f64) -> Self {
        self.tape.unary(self.idx, c, self.val * c)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v * self
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    #[inline]
    fn add(self, v: Var<'t>) -> Var<'t> {
        v + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, v: Var<'t>) -> Var<'t> {
        v.tape.unary(v.idx, -1.0, self - v.val)
    }
}

impl Scalar for Var<'_> {
    #[inline]
    fn value(self) -> f64 {
        self.val
    }

    fn tanh(self) -> Self {
        let y = self.val.tanh();
        self.tape.unary(self.idx, 1.0 - y * y, y)
    }

    fn sin(self) -> Self {
        self.tape.unary(self.idx, self.val.cos(), self.val.sin())
    }

    fn cos(self) -> Self {
        self.tape.unary(self.idx, -self.val.sin(), self.val.cos())
    }
}
