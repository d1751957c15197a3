//! The tape: nodes hold forward values, an optional gradient accumulator and
//! the rule linking them to their inputs. Nodes are created in topological
//! order by construction, so one reverse sweep over node ids is a valid
//! backward schedule.
//!
//! Parameters live below a persistent watermark; `reset` truncates the tape
//! back to it between training steps and invalidates handles to scratch
//! nodes from earlier steps.

use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use crate::error::{AdError, Result};
use crate::real::Real;

#[derive(Debug, Clone)]
pub(crate) enum Op<T: Real> {
    Leaf,
    Matmul { a: usize, b: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: T },
    Sigmoid { a: usize },
    Softmax { a: usize },
    Gelu { a: usize },
    LayerNorm { a: usize, gain: usize, bias: usize, eps: f64 },
    Lookup { table: usize, indices: Arc<Vec<usize>> },
    Concat { inputs: Vec<usize>, axis: usize },
    Gather { a: usize, indices: Arc<Vec<u32>> },
    Reshape { a: usize },
    Mean { a: usize },
    Sum { a: usize },
    MaskedFill { a: usize, mask: Arc<Vec<bool>> },
    ThresholdKeep { a: usize, alpha: T },
    NonzeroMean { inputs: Vec<usize> },
    EltMax { inputs: Vec<usize> },
    ScatterSum { a: usize, cells: Arc<Vec<Vec<u32>>> },
    BceMean { logits: usize, targets: Arc<Vec<T>>, mask: Arc<Vec<bool>> },
}

#[derive(Debug)]
pub(crate) struct Node<T: Real> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub grad: Option<Vec<T>>,
    pub op: Op<T>,
}

#[derive(Debug)]
pub(crate) struct GraphInner<T: Real> {
    pub nodes: Vec<Node<T>>,
    pub persistent: usize,
    pub epoch: u64,
    pub parallel: bool,
}

/// Shared handle to one tape.
#[derive(Debug, Clone)]
pub struct Graph<T: Real>(pub(crate) Rc<RefCell<GraphInner<T>>>);

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph(Rc::new(RefCell::new(GraphInner {
            nodes: Vec::new(),
            persistent: 0,
            epoch: 0,
            parallel: true,
        })))
    }

    /// Gate row-parallel kernels. Results are bitwise identical either way;
    /// the switch exists for fully serial reproducibility runs.
    pub fn set_parallel(&self, on: bool) {
        self.0.borrow_mut().parallel = on;
    }

    /// Create an input node.
    pub fn leaf(&self, shape: Vec<usize>, data: Vec<T>) -> Tensor<T> {
        assert_eq!(numel(&shape), data.len(), "leaf data does not match shape");
        self.push(shape, data, Op::Leaf)
    }

    pub fn scalar(&self, v: T) -> Tensor<T> {
        self.leaf(vec![1], vec![v])
    }

    pub fn zeros(&self, shape: Vec<usize>) -> Tensor<T> {
        let n = numel(&shape);
        self.leaf(shape, vec![T::ZERO; n])
    }

    /// Everything created so far survives `reset`.
    pub fn mark_persistent(&self) {
        let mut g = self.0.borrow_mut();
        g.persistent = g.nodes.len();
    }

    /// Drop all scratch nodes created since `mark_persistent`. Handles to
    /// dropped nodes become invalid.
    pub fn reset(&self) {
        let mut g = self.0.borrow_mut();
        let keep = g.persistent;
        g.nodes.truncate(keep);
        g.epoch += 1;
    }

    pub fn zero_all_grads(&self) {
        let mut g = self.0.borrow_mut();
        for n in &mut g.nodes {
            n.grad = None;
        }
    }

    pub fn len(&self) -> usize {
        self.0.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn push(&self, shape: Vec<usize>, data: Vec<T>, op: Op<T>) -> Tensor<T> {
        let mut g = self.0.borrow_mut();
        let id = g.nodes.len();
        let epoch = g.epoch;
        g.nodes.push(Node { shape: shape.clone(), data, grad: None, op });
        Tensor { graph: self.clone(), id, shape, epoch }
    }
}

/// Handle to one tape node.
#[derive(Debug, Clone)]
pub struct Tensor<T: Real> {
    pub(crate) graph: Graph<T>,
    pub(crate) id: usize,
    pub(crate) shape: Vec<usize>,
    pub(crate) epoch: u64,
}

impl<T: Real> Tensor<T> {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        numel(&self.shape)
    }

    pub(crate) fn check_live(&self) {
        let g = self.graph.0.borrow();
        assert!(
            self.id < g.persistent || self.epoch == g.epoch,
            "tensor handle outlived a graph reset"
        );
        assert!(self.id < g.nodes.len(), "tensor id out of range");
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Vec<T> {
        self.check_live();
        self.graph.0.borrow().nodes[self.id].data.clone()
    }

    /// Read the forward value without copying.
    pub fn with_value<R>(&self, f: impl FnOnce(&[T]) -> R) -> R {
        self.check_live();
        f(&self.graph.0.borrow().nodes[self.id].data)
    }

    /// The single element of a scalar tensor.
    pub fn item(&self) -> T {
        self.check_live();
        let g = self.graph.0.borrow();
        assert_eq!(g.nodes[self.id].data.len(), 1, "item() on a non-scalar");
        g.nodes[self.id].data[0]
    }

    /// Copy of the accumulated gradient, if any backward pass reached it.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.check_live();
        self.graph.0.borrow().nodes[self.id].grad.clone()
    }

    pub fn zero_grad(&self) {
        self.check_live();
        self.graph.0.borrow_mut().nodes[self.id].grad = None;
    }

    /// Overwrite the forward value in place (optimizer updates).
    pub fn set_value(&self, data: &[T]) {
        self.check_live();
        let mut g = self.graph.0.borrow_mut();
        assert_eq!(g.nodes[self.id].data.len(), data.len(), "set_value length mismatch");
        g.nodes[self.id].data.copy_from_slice(data);
    }

    /// Reverse sweep from this scalar. Gradients of every node reached are
    /// accumulated additively into their `grad` stores, so calling twice
    /// doubles them.
    pub fn backward(&self) -> Result<()> {
        self.check_live();
        if self.numel() != 1 {
            return Err(AdError::NotScalar { numel: self.numel() });
        }
        let mut scratch: Vec<Option<Vec<T>>>;
        {
            let g = self.graph.0.borrow();
            scratch = vec![None; self.id + 1];
            scratch[self.id] = Some(vec![T::ONE]);
            for id in (0..=self.id).rev() {
                if scratch[id].is_none() {
                    continue;
                }
                crate::backward::apply(&g, id, &mut scratch);
            }
        }
        let mut g = self.graph.0.borrow_mut();
        for (id, sg) in scratch.into_iter().enumerate() {
            let Some(sg) = sg else { continue };
            let node = &mut g.nodes[id];
            match &mut node.grad {
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&sg) {
                        *a += *b;
                    }
                }
                None => node.grad = Some(sg),
            }
        }
        Ok(())
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}
