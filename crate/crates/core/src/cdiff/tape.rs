//! Reverse-mode tape over complex scalars with Wirtinger partials.
//!
//! Every node stores, for each parent `a`, the pair `(dw/da, dw/d conj(a))`.
//! Holomorphic primitives have an identically zero second entry. The reverse
//! sweep propagates `G = dL/d conj(w)` for a real loss `L` using
//!
//! ```text
//! G_a += conj(G_w) * dw/d conj(a) + G_w * conj(dw/da)
//! ```
//!
//! and reports gradients as `g = 2 G = dL/dx + i dL/dy`, so a descent step on
//! the real and imaginary parts of a parameter is plain real gradient descent.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::{Field, Holo, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Primitive operations that can be recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    Exp,
    Log,
    Powi(i32),
    Conj,
    Re,
    Im,
    Abs2,
    /// Multiplication by a fixed complex constant.
    Scale(C64),
}

impl Primitive {
    pub fn arity(&self) -> usize {
        match self {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => 2,
            _ => 1,
        }
    }

    pub fn is_holomorphic(&self) -> bool {
        !matches!(
            self,
            Primitive::Conj | Primitive::Re | Primitive::Im | Primitive::Abs2
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Div => "div",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Powi(_) => "powi",
            Primitive::Conj => "conj",
            Primitive::Re => "re",
            Primitive::Im => "im",
            Primitive::Abs2 => "abs2",
            Primitive::Scale(_) => "scale",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Param,
    Leaf,
    Constant,
    Op(Primitive),
}

#[derive(Debug, Clone, Copy)]
pub struct TapeNode {
    pub kind: NodeKind,
    pub parents: [u32; 2],
    pub arity: u8,
    pub d_z: [C64; 2],
    pub d_zbar: [C64; 2],
    pub value: C64,
}

impl TapeNode {
    fn source(kind: NodeKind, value: C64) -> Self {
        TapeNode {
            kind,
            parents: [0; 2],
            arity: 0,
            d_z: [ZERO; 2],
            d_zbar: [ZERO; 2],
            value,
        }
    }
}

/// A recorded computation. Rebuilt per training step; use [`Tape::clear`] to
/// reuse the allocation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<TapeNode>>,
    params: RefCell<Vec<u32>>,
    fault: RefCell<Option<Error>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}({})", self.idx, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(n)),
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
        self.params.get_mut().clear();
        *self.fault.get_mut() = None;
    }

    fn push(&self, node: TapeNode) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        (nodes.len() - 1) as u32
    }

    /// Trainable leaf. Its gradient is reported by [`Gradients::params`] in
    /// registration order.
    pub fn param(&self, value: C64) -> Var<'_> {
        let idx = self.push(TapeNode::source(NodeKind::Param, value));
        self.params.borrow_mut().push(idx);
        Var { tape: self, idx }
    }

    /// Input leaf whose adjoint can be queried with [`Gradients::wrt`].
    pub fn leaf(&self, value: C64) -> Var<'_> {
        let idx = self.push(TapeNode::source(NodeKind::Leaf, value));
        Var { tape: self, idx }
    }

    pub fn constant(&self, value: C64) -> Var<'_> {
        let idx = self.push(TapeNode::source(NodeKind::Constant, value));
        Var { tape: self, idx }
    }

    pub fn node(&self, v: Var<'_>) -> TapeNode {
        self.nodes.borrow()[v.idx as usize]
    }

    /// First non-finite evaluation recorded through the operator overloads.
    pub fn check(&self) -> Result<()> {
        match &*self.fault.borrow() {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    /// Appends one node for `primitive` applied to `operands`.
    pub fn record<'t>(&'t self, primitive: Primitive, operands: &[Var<'t>]) -> Result<Var<'t>> {
        if operands.len() != primitive.arity() {
            return Err(Error::Contract(format!(
                "`{}` takes {} operand(s), got {}",
                primitive.name(),
                primitive.arity(),
                operands.len()
            )));
        }
        if operands.iter().any(|v| !std::ptr::eq(v.tape, self)) {
            return Err(Error::Contract("operand belongs to another tape".into()));
        }
        let (node, ok) = self.build(primitive, operands);
        let idx = self.push(node);
        if !ok {
            return Err(Error::diverged(
                primitive.name(),
                format!("non-finite result {}", node.value),
            ));
        }
        Ok(Var { tape: self, idx })
    }

    fn record_sticky<'t>(&'t self, primitive: Primitive, operands: &[Var<'t>]) -> Var<'t> {
        let (node, ok) = self.build(primitive, operands);
        let idx = self.push(node);
        if !ok {
            let mut fault = self.fault.borrow_mut();
            if fault.is_none() {
                *fault = Some(Error::diverged(
                    primitive.name(),
                    format!("non-finite result {}", node.value),
                ));
            }
        }
        Var { tape: self, idx }
    }

    fn build(&self, primitive: Primitive, operands: &[Var<'_>]) -> (TapeNode, bool) {
        let nodes = self.nodes.borrow();
        let a = nodes[operands[0].idx as usize].value;
        let b = operands
            .get(1)
            .map(|v| nodes[v.idx as usize].value)
            .unwrap_or(ZERO);
        drop(nodes);
        let half = C64::new(0.5, 0.0);
        let (value, d_z, d_zbar) = match primitive {
            Primitive::Add => (a + b, [ONE, ONE], [ZERO; 2]),
            Primitive::Sub => (a - b, [ONE, -ONE], [ZERO; 2]),
            Primitive::Mul => (a * b, [b, a], [ZERO; 2]),
            Primitive::Div => {
                let q = a / b;
                (q, [ONE / b, -q / b], [ZERO; 2])
            }
            Primitive::Exp => {
                let e = a.exp();
                (e, [e, ZERO], [ZERO; 2])
            }
            Primitive::Log => (a.ln(), [ONE / a, ZERO], [ZERO; 2]),
            Primitive::Powi(n) => {
                let v = a.powi(n);
                let d = match n {
                    0 => ZERO,
                    1 => ONE,
                    _ => a.powi(n - 1) * n as f64,
                };
                (v, [d, ZERO], [ZERO; 2])
            }
            Primitive::Conj => (a.conj(), [ZERO; 2], [ONE, ZERO]),
            Primitive::Re => (C64::new(a.re, 0.0), [half, ZERO], [half, ZERO]),
            Primitive::Im => (
                C64::new(a.im, 0.0),
                [C64::new(0.0, -0.5), ZERO],
                [C64::new(0.0, 0.5), ZERO],
            ),
            Primitive::Abs2 => (C64::new(a.norm_sqr(), 0.0), [a.conj(), ZERO], [a, ZERO]),
            Primitive::Scale(c) => (a * c, [c, ZERO], [ZERO; 2]),
        };
        let ok = value.is_finite()
            && d_z.iter().all(|d| d.is_finite())
            && d_zbar.iter().all(|d| d.is_finite());
        let mut parents = [0u32; 2];
        for (slot, v) in parents.iter_mut().zip(operands) {
            *slot = v.idx;
        }
        (
            TapeNode {
                kind: NodeKind::Op(primitive),
                parents,
                arity: operands.len() as u8,
                d_z,
                d_zbar,
                value,
            },
            ok,
        )
    }

    /// Reverse sweep from a real-valued `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        self.check()?;
        let nodes = self.nodes.borrow();
        let n = loss.idx as usize + 1;
        let lv = nodes[loss.idx as usize].value;
        if lv.im.abs() > 1e-12 * (1.0 + lv.re.abs()) {
            return Err(Error::Contract(format!(
                "backward requires a real loss, got {lv}"
            )));
        }
        let mut adj = vec![ZERO; n];
        adj[n - 1] = C64::new(0.5, 0.0);
        for i in (0..n).rev() {
            let g = adj[i];
            if g == ZERO {
                continue;
            }
            let node = &nodes[i];
            for p in 0..node.arity as usize {
                let parent = node.parents[p] as usize;
                adj[parent] += g.conj() * node.d_zbar[p] + g * node.d_z[p].conj();
            }
        }
        Ok(Gradients {
            adj,
            params: self.params.borrow().clone(),
        })
    }
}

/// Adjoints of one reverse sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    adj: Vec<C64>,
    params: Vec<u32>,
}

impl Gradients {
    /// `dL/dx + i dL/dy` with respect to the node behind `v`.
    pub fn wrt(&self, v: Var<'_>) -> C64 {
        self.adj
            .get(v.idx as usize)
            .map(|g| g * 2.0)
            .unwrap_or(ZERO)
    }

    /// Gradients of all parameters in registration order.
    pub fn params(&self) -> Vec<C64> {
        self.params
            .iter()
            .map(|&i| self.adj.get(i as usize).map(|g| g * 2.0).unwrap_or(ZERO))
            .collect()
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> C64 {
        self.tape.nodes.borrow()[self.idx as usize].value
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, p: Primitive) -> Self {
        self.tape.record_sticky(p, &[self])
    }

    fn binary(self, p: Primitive, rhs: Self) -> Self {
        debug_assert!(std::ptr::eq(self.tape, rhs.tape));
        self.tape.record_sticky(p, &[self, rhs])
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.binary(Primitive::Add, rhs)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.binary(Primitive::Sub, rhs)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.binary(Primitive::Mul, rhs)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        self.binary(Primitive::Div, rhs)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(Primitive::Scale(-ONE))
    }
}

impl<'t> Holo for Var<'t> {
    fn value(&self) -> C64 {
        Var::value(self)
    }

    fn lift(&self, c: C64) -> Self {
        self.tape.constant(c)
    }

    fn exp(self) -> Self {
        self.unary(Primitive::Exp)
    }

    fn ln(self) -> Self {
        self.unary(Primitive::Log)
    }

    fn powi(self, n: i32) -> Self {
        self.unary(Primitive::Powi(n))
    }

    fn scaled(self, c: C64) -> Self {
        self.unary(Primitive::Scale(c))
    }
}

impl<'t> Field for Var<'t> {
    fn conj(self) -> Self {
        self.unary(Primitive::Conj)
    }

    fn real(self) -> Self {
        self.unary(Primitive::Re)
    }

    fn imag(self) -> Self {
        self.unary(Primitive::Im)
    }

    fn abs2(self) -> Self {
        self.unary(Primitive::Abs2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mul_partials_follow_product_rule() {
        let tape = Tape::new();
        let z = tape.leaf(c(1.0, 1.0));
        let w = tape.record(Primitive::Mul, &[z, z]).unwrap();
        assert_eq!(w.value(), c(0.0, 2.0));
        let node = tape.node(w);
        assert_eq!(node.d_z[0] + node.d_z[1], c(2.0, 2.0));
        assert_eq!(node.d_zbar, [ZERO; 2]);
    }

    #[test]
    fn conj_is_purely_antiholomorphic() {
        let tape = Tape::new();
        let z = tape.leaf(c(0.3, -2.0));
        let w = tape.record(Primitive::Conj, &[z]).unwrap();
        let node = tape.node(w);
        assert_eq!(node.d_z[0], ZERO);
        assert_eq!(node.d_zbar[0], ONE);
    }

    #[test]
    fn exp_at_zero() {
        let tape = Tape::new();
        let z = tape.leaf(ZERO);
        let w = tape.record(Primitive::Exp, &[z]).unwrap();
        let node = tape.node(w);
        assert_eq!(node.value, ONE);
        assert_eq!(node.d_z[0], ONE);
        assert_eq!(node.d_zbar[0], ZERO);
    }

    #[test]
    fn non_finite_results_name_the_primitive() {
        let tape = Tape::new();
        let z = tape.leaf(ZERO);
        match tape.record(Primitive::Log, &[z]) {
            Err(Error::Diverged { primitive, .. }) => assert_eq!(primitive, "log"),
            other => panic!("expected divergence, got {other:?}"),
        }
        let big = tape.leaf(c(800.0, 0.0));
        assert!(matches!(
            tape.record(Primitive::Exp, &[big]),
            Err(Error::Diverged { .. })
        ));
        let one = tape.leaf(ONE);
        assert!(tape.record(Primitive::Div, &[one, z]).is_err());
    }

    #[test]
    fn sticky_fault_surfaces_in_backward() {
        let tape = Tape::new();
        let z = tape.param(ZERO);
        let l = Holo::ln(z).real();
        assert!(tape.check().is_err());
        assert!(tape.backward(l).is_err());
    }

    #[test]
    fn arity_and_tape_mismatch_are_contract_errors() {
        let a = Tape::new();
        let b = Tape::new();
        let x = a.leaf(ONE);
        let y = b.leaf(ONE);
        assert!(matches!(a.record(Primitive::Add, &[x]), Err(Error::Contract(_))));
        assert!(matches!(a.record(Primitive::Add, &[x, y]), Err(Error::Contract(_))));
    }

    #[test]
    fn abs2_gradient_is_twice_z() {
        let tape = Tape::new();
        let z = tape.param(c(3.0, 4.0));
        let l = z.abs2();
        let g = tape.backward(l).unwrap();
        assert_eq!(g.params(), vec![c(6.0, 8.0)]);
    }

    #[test]
    fn real_part_gradient_is_one() {
        for z0 in [c(0.0, 0.0), c(-2.0, 5.0), c(1e3, -1e-3)] {
            let tape = Tape::new();
            let z = tape.param(z0);
            let g = tape.backward(z.real()).unwrap();
            assert_eq!(g.params(), vec![ONE]);
        }
    }

    #[test]
    fn imaginary_part_gradient_points_along_i() {
        let tape = Tape::new();
        let z = tape.param(c(0.7, 0.2));
        let g = tape.backward(z.imag()).unwrap();
        assert_eq!(g.params(), vec![c(0.0, 1.0)]);
    }

    #[test]
    fn complex_loss_is_rejected() {
        let tape = Tape::new();
        let z = tape.param(c(0.0, 1.0));
        assert!(matches!(tape.backward(z), Err(Error::Contract(_))));
    }

    #[test]
    fn clear_resets_everything() {
        let mut tape = Tape::new();
        {
            let z = tape.param(ZERO);
            let _ = Holo::ln(z);
        }
        assert!(tape.check().is_err());
        tape.clear();
        assert!(tape.is_empty());
        assert!(tape.check().is_ok());
    }
}
