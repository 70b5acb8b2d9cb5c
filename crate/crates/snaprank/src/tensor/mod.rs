//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation whose inputs are tracked. Calling
//! [`backward`] on a scalar output walks the tape in reverse topological
//! order and accumulates gradients for every tracked leaf. The op set is
//! deliberately small: exactly what the scoring pipeline needs (matrix
//! multiply, elementwise nonlinearities, softmax, 1D convolution, sparse
//! adjacency multiply, row gather/pad, reductions, dropout).

pub mod checkpoint;
pub mod gradcheck;

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use rand::Rng as _;
use thiserror::Error;

/// Seedable RNG used everywhere randomness is needed. Counter-based
/// (ChaCha), owned by the caller; the library never touches global state.
pub type SeedRng = rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("operands belong to different tapes")]
    MixedTapes,
    #[error("backward requires a scalar output, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("dropout rate must be in [0, 1), got {0}")]
    InvalidDropoutRate(f64),
    #[error("kernel length {kernel} exceeds input length {input}")]
    KernelTooLong { kernel: usize, input: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

type Result<T> = std::result::Result<T, TensorError>;

type BackFn = Box<dyn Fn(&[f64]) -> Vec<f64>>;

struct Node {
    parents: Vec<usize>,
    backs: Vec<BackFn>,
    len: usize,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
}

/// Records operations for one differentiation session.
#[derive(Clone, Default)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn record(&self, parents: Vec<usize>, backs: Vec<BackFn>, len: usize) -> usize {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node { parents, backs, len });
        inner.nodes.len() - 1
    }

    fn same_tape(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    /// Creates a tracked leaf tensor (a differentiation variable).
    pub fn leaf(&self, shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "leaf data length must match shape"
        );
        let id = self.record(vec![], vec![], data.len());
        Tensor {
            shape,
            data: Rc::new(data),
            node: Some((self.clone(), id)),
        }
    }
}

/// Dense row-major tensor. Cloning is cheap (shared data buffer).
#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Rc<Vec<f64>>,
    node: Option<(Tape, usize)>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .field("tracked", &self.node.is_some())
            .finish()
    }
}

impl Tensor {
    /// Constant (untracked) tensor.
    pub fn constant(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "data length must match shape"
        );
        Tensor {
            shape,
            data: Rc::new(data),
            node: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor::constant(vec![], vec![value])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_tracked(&self) -> bool {
        self.node.is_some()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.len() <= 1
    }

    /// Value of a scalar tensor.
    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item() on non-scalar tensor");
        self.data[0]
    }

    fn node_id(&self) -> Option<usize> {
        self.node.as_ref().map(|(_, id)| *id)
    }

    /// Gradient of this tensor from a finished backward pass, if tracked
    /// and reached by the output.
    pub fn grad<'g>(&self, grads: &'g Gradients) -> Option<&'g [f64]> {
        let id = self.node_id()?;
        grads.by_node.get(id).and_then(|g| g.as_deref())
    }
}

/// Per-node gradients produced by [`backward`].
pub struct Gradients {
    by_node: Vec<Option<Vec<f64>>>,
}

/// Reverse-mode sweep from a scalar output. Each tape node is visited
/// exactly once, in reverse insertion order (a valid reverse topological
/// order since parents are always recorded before children).
pub fn backward(output: &Tensor) -> Result<Gradients> {
    if !(output.data.len() == 1) {
        return Err(TensorError::NonScalarOutput(output.shape.clone()));
    }
    let (tape, out_id) = output
        .node
        .as_ref()
        .ok_or(TensorError::NonScalarOutput(output.shape.clone()))?;
    let inner = tape.inner.borrow();
    let mut by_node: Vec<Option<Vec<f64>>> = vec![None; inner.nodes.len()];
    by_node[*out_id] = Some(vec![1.0]);
    for id in (0..=*out_id).rev() {
        let Some(grad) = by_node[id].take() else {
            continue;
        };
        let node = &inner.nodes[id];
        for (pi, parent) in node.parents.iter().enumerate() {
            let contribution = (node.backs[pi])(&grad);
            debug_assert_eq!(contribution.len(), inner.nodes[*parent].len);
            let slot = &mut by_node[*parent];
            match slot {
                Some(acc) => {
                    for (a, c) in acc.iter_mut().zip(&contribution) {
                        *a += c;
                    }
                }
                None => *slot = Some(contribution),
            }
        }
        // leaves keep their gradient
        if node.parents.is_empty() {
            by_node[id] = Some(grad);
        }
    }
    Ok(Gradients { by_node })
}

/// Resolves the common tape of a set of operands, if any is tracked.
fn joint_tape(inputs: &[&Tensor]) -> Result<Option<Tape>> {
    let mut tape: Option<Tape> = None;
    for t in inputs {
        if let Some((tp, _)) = &t.node {
            match &tape {
                None => tape = Some(tp.clone()),
                Some(existing) if existing.same_tape(tp) => {}
                Some(_) => return Err(TensorError::MixedTapes),
            }
        }
    }
    Ok(tape)
}

/// Builds the output tensor, recording backward rules for tracked parents.
fn make_result(
    inputs: &[&Tensor],
    shape: Vec<usize>,
    data: Vec<f64>,
    mut backs: Vec<Option<BackFn>>,
) -> Result<Tensor> {
    debug_assert_eq!(inputs.len(), backs.len());
    let tape = joint_tape(inputs)?;
    let node = match tape {
        Some(tape) => {
            let mut parents = Vec::new();
            let mut kept = Vec::new();
            for (i, t) in inputs.iter().enumerate() {
                if let Some(id) = t.node_id() {
                    parents.push(id);
                    kept.push(backs[i].take().expect("backward rule for tracked input"));
                }
            }
            let id = tape.record(parents, kept, data.len());
            Some((tape, id))
        }
        None => None,
    };
    Ok(Tensor {
        shape,
        data: Rc::new(data),
        node,
    })
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape.as_slice() {
        &[r, c] => Ok((r, c)),
        other => Err(TensorError::ShapeMismatch(format!(
            "{what} must be 2-D, got {other:?}"
        ))),
    }
}

/// Matrix product of two 2-D tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, ka) = dims2(a, "matmul lhs")?;
    let (kb, n) = dims2(b, "matmul rhs")?;
    if ka != kb {
        return Err(TensorError::ShapeMismatch(format!(
            "matmul inner dims {ka} vs {kb}"
        )));
    }
    let k = ka;
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += av * b.data[p * n + j];
            }
        }
    }
    let ad = a.data.clone();
    let bd = b.data.clone();
    let (ad2, bd2) = (ad.clone(), bd.clone());
    make_result(
        &[a, b],
        vec![m, n],
        out,
        vec![
            Some(Box::new(move |g: &[f64]| {
                // dL/dA = g · Bᵀ
                let mut ga = vec![0.0; m * k];
                for i in 0..m {
                    for p in 0..k {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += g[i * n + j] * bd2[p * n + j];
                        }
                        ga[i * k + p] = acc;
                    }
                }
                ga
            })),
            Some(Box::new(move |g: &[f64]| {
                // dL/dB = Aᵀ · g
                let mut gb = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let av = ad2[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            gb[p * n + j] += av * g[i * n + j];
                        }
                    }
                }
                gb
            })),
        ],
    )
}

/// Elementwise sum of two tensors of identical shape.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape != b.shape {
        return Err(TensorError::ShapeMismatch(format!(
            "add {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    let out = a.data.iter().zip(b.data.iter()).map(|(x, y)| x + y).collect();
    make_result(
        &[a, b],
        a.shape.clone(),
        out,
        vec![
            Some(Box::new(|g: &[f64]| g.to_vec())),
            Some(Box::new(|g: &[f64]| g.to_vec())),
        ],
    )
}

/// Adds a length-c row vector to every row of an m×c matrix.
pub fn add_row(a: &Tensor, row: &Tensor) -> Result<Tensor> {
    let (m, c) = dims2(a, "add_row matrix")?;
    if row.shape != [c] {
        return Err(TensorError::ShapeMismatch(format!(
            "add_row bias {:?}, expected [{c}]",
            row.shape
        )));
    }
    let mut out = a.data.to_vec();
    for i in 0..m {
        for j in 0..c {
            out[i * c + j] += row.data[j];
        }
    }
    make_result(
        &[a, row],
        vec![m, c],
        out,
        vec![
            Some(Box::new(|g: &[f64]| g.to_vec())),
            Some(Box::new(move |g: &[f64]| {
                let mut gr = vec![0.0; c];
                for i in 0..m {
                    for j in 0..c {
                        gr[j] += g[i * c + j];
                    }
                }
                gr
            })),
        ],
    )
}

/// Multiplication by a compile-time constant.
pub fn scale(a: &Tensor, factor: f64) -> Result<Tensor> {
    let out = a.data.iter().map(|x| x * factor).collect();
    make_result(
        &[a],
        a.shape.clone(),
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            g.iter().map(|x| x * factor).collect()
        }))],
    )
}

/// Elementwise product, identical shapes.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape != b.shape {
        return Err(TensorError::ShapeMismatch(format!(
            "mul {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    let out = a.data.iter().zip(b.data.iter()).map(|(x, y)| x * y).collect();
    let ad = a.data.clone();
    let bd = b.data.clone();
    make_result(
        &[a, b],
        a.shape.clone(),
        out,
        vec![
            Some(Box::new(move |g: &[f64]| {
                g.iter().zip(bd.iter()).map(|(x, y)| x * y).collect()
            })),
            Some(Box::new(move |g: &[f64]| {
                g.iter().zip(ad.iter()).map(|(x, y)| x * y).collect()
            })),
        ],
    )
}

pub fn relu(a: &Tensor) -> Result<Tensor> {
    let out = a.data.iter().map(|&x| x.max(0.0)).collect();
    let ad = a.data.clone();
    make_result(
        &[a],
        a.shape.clone(),
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            g.iter()
                .zip(ad.iter())
                .map(|(gv, &x)| if x > 0.0 { *gv } else { 0.0 })
                .collect()
        }))],
    )
}

/// Elementwise max with a constant floor. The gradient passes through only
/// where the input sits above the floor, so downstream `ln` calls stay
/// finite when a probability underflows to zero.
pub fn clamp_min(a: &Tensor, floor: f64) -> Result<Tensor> {
    let out = a.data.iter().map(|&x| x.max(floor)).collect();
    let ad = a.data.clone();
    make_result(
        &[a],
        a.shape.clone(),
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            g.iter()
                .zip(ad.iter())
                .map(|(gv, &x)| if x > floor { *gv } else { 0.0 })
                .collect()
        }))],
    )
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(a: &Tensor) -> Result<Tensor> {
    let out: Vec<f64> = a.data.iter().map(|&x| sigmoid_scalar(x)).collect();
    let saved = out.clone();
    make_result(
        &[a],
        a.shape.clone(),
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            g.iter()
                .zip(saved.iter())
                .map(|(gv, s)| gv * s * (1.0 - s))
                .collect()
        }))],
    )
}

fn softplus_scalar(x: f64) -> f64 {
    // large-argument branch: x + log(1 + exp(-x))
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// log(1 + exp(x)), elementwise, overflow-safe.
pub fn softplus(a: &Tensor) -> Result<Tensor> {
    let out = a.data.iter().map(|&x| softplus_scalar(x)).collect();
    let ad = a.data.clone();
    make_result(
        &[a],
        a.shape.clone(),
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            g.iter()
                .zip(ad.iter())
                .map(|(gv, &x)| gv * sigmoid_scalar(x))
                .collect()
        }))],
    )
}

/// Elementwise natural logarithm.
pub fn ln(a: &Tensor) -> Result<Tensor> {
    let out = a.data.iter().map(|x| x.ln()).collect();
    let ad = a.data.clone();
    make_result(
        &[a],
        a.shape.clone(),
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            g.iter().zip(ad.iter()).map(|(gv, x)| gv / x).collect()
        }))],
    )
}

/// Elementwise exponential.
pub fn exp(a: &Tensor) -> Result<Tensor> {
    let out: Vec<f64> = a.data.iter().map(|x| x.exp()).collect();
    let saved = out.clone();
    make_result(
        &[a],
        a.shape.clone(),
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            g.iter().zip(saved.iter()).map(|(gv, e)| gv * e).collect()
        }))],
    )
}

/// Softmax over a 1-D tensor, max-shifted for stability.
pub fn softmax(a: &Tensor) -> Result<Tensor> {
    if a.shape.len() != 1 || a.data.is_empty() {
        return Err(TensorError::ShapeMismatch(format!(
            "softmax expects nonempty 1-D tensor, got {:?}",
            a.shape
        )));
    }
    let max = a.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = a.data.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let out: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let saved = out.clone();
    make_result(
        &[a],
        a.shape.clone(),
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            let dot: f64 = g.iter().zip(saved.iter()).map(|(gv, y)| gv * y).sum();
            g.iter()
                .zip(saved.iter())
                .map(|(gv, y)| y * (gv - dot))
                .collect()
        }))],
    )
}

/// Sum of all elements, producing a scalar.
pub fn sum(a: &Tensor) -> Result<Tensor> {
    let total: f64 = a.data.iter().sum();
    let len = a.data.len();
    make_result(
        &[a],
        vec![],
        vec![total],
        vec![Some(Box::new(move |g: &[f64]| vec![g[0]; len]))],
    )
}

/// Column means of an m×c matrix, producing a length-c vector.
pub fn mean_rows(a: &Tensor) -> Result<Tensor> {
    let (m, c) = dims2(a, "mean_rows")?;
    if m == 0 {
        return Err(TensorError::ShapeMismatch("mean_rows on empty matrix".into()));
    }
    let mut out = vec![0.0; c];
    for i in 0..m {
        for j in 0..c {
            out[j] += a.data[i * c + j];
        }
    }
    for v in &mut out {
        *v /= m as f64;
    }
    make_result(
        &[a],
        vec![c],
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            let mut ga = vec![0.0; m * c];
            for i in 0..m {
                for j in 0..c {
                    ga[i * c + j] = g[j] / m as f64;
                }
            }
            ga
        }))],
    )
}

/// 1D convolution. `input` is len×in_ch, `kernels` is k_size×in_ch×out_ch
/// (row-major). Output is out_len×out_ch with out_len = (len-k)/stride + 1.
pub fn conv1d(input: &Tensor, kernels: &Tensor, stride: usize) -> Result<Tensor> {
    let (len, in_ch) = dims2(input, "conv1d input")?;
    let (k_size, kin, kout) = match kernels.shape.as_slice() {
        &[k, i, o] => (k, i, o),
        other => {
            return Err(TensorError::ShapeMismatch(format!(
                "conv1d kernels must be 3-D, got {other:?}"
            )))
        }
    };
    if kin != in_ch {
        return Err(TensorError::ShapeMismatch(format!(
            "conv1d channels: input {in_ch}, kernel {kin}"
        )));
    }
    if k_size > len {
        return Err(TensorError::KernelTooLong {
            kernel: k_size,
            input: len,
        });
    }
    assert!(stride >= 1, "stride must be positive");
    let out_len = (len - k_size) / stride + 1;
    let mut out = vec![0.0; out_len * kout];
    for t in 0..out_len {
        for j in 0..k_size {
            let pos = t * stride + j;
            for i in 0..in_ch {
                let xv = input.data[pos * in_ch + i];
                if xv == 0.0 {
                    continue;
                }
                for o in 0..kout {
                    out[t * kout + o] += xv * kernels.data[(j * in_ch + i) * kout + o];
                }
            }
        }
    }
    let xd = input.data.clone();
    let kd = kernels.data.clone();
    make_result(
        &[input, kernels],
        vec![out_len, kout],
        out,
        vec![
            Some(Box::new(move |g: &[f64]| {
                let mut gx = vec![0.0; len * in_ch];
                for t in 0..out_len {
                    for j in 0..k_size {
                        let pos = t * stride + j;
                        for i in 0..in_ch {
                            let mut acc = 0.0;
                            for o in 0..kout {
                                acc += g[t * kout + o] * kd[(j * in_ch + i) * kout + o];
                            }
                            gx[pos * in_ch + i] += acc;
                        }
                    }
                }
                gx
            })),
            Some(Box::new(move |g: &[f64]| {
                let mut gk = vec![0.0; k_size * in_ch * kout];
                for t in 0..out_len {
                    for j in 0..k_size {
                        let pos = t * stride + j;
                        for i in 0..in_ch {
                            let xv = xd[pos * in_ch + i];
                            if xv == 0.0 {
                                continue;
                            }
                            for o in 0..kout {
                                gk[(j * in_ch + i) * kout + o] += xv * g[t * kout + o];
                            }
                        }
                    }
                }
                gk
            })),
        ],
    )
}

/// Train/eval switch for dropout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout: in train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); eval mode is the identity.
pub fn dropout(a: &Tensor, rate: f64, mode: Mode, rng: &mut SeedRng) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(TensorError::InvalidDropoutRate(rate));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return make_result(
            &[a],
            a.shape.clone(),
            a.data.to_vec(),
            vec![Some(Box::new(|g: &[f64]| g.to_vec()))],
        );
    }
    let keep = 1.0 - rate;
    let mask: Vec<f64> = a
        .data
        .iter()
        .map(|_| {
            if rng.gen::<f64>() < rate {
                0.0
            } else {
                1.0 / keep
            }
        })
        .collect();
    let out = a.data.iter().zip(mask.iter()).map(|(x, m)| x * m).collect();
    make_result(
        &[a],
        a.shape.clone(),
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            g.iter().zip(mask.iter()).map(|(gv, m)| gv * m).collect()
        }))],
    )
}

/// Sparse matrix in triplet form, used as a constant operand.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    /// (row, col, value) triplets.
    pub entries: Vec<(usize, usize, f64)>,
}

/// Sparse-dense product S·X where S is a constant. Cost is O(nnz·c),
/// which keeps GCN propagation linear in the edge count.
pub fn spmm(s: &SparseMatrix, x: &Tensor) -> Result<Tensor> {
    let (n, c) = dims2(x, "spmm dense operand")?;
    if s.cols != n {
        return Err(TensorError::ShapeMismatch(format!(
            "spmm: sparse is {}x{}, dense is {n}x{c}",
            s.rows, s.cols
        )));
    }
    let rows = s.rows;
    let mut out = vec![0.0; rows * c];
    for &(i, j, v) in &s.entries {
        for ch in 0..c {
            out[i * c + ch] += v * x.data[j * c + ch];
        }
    }
    let entries = s.entries.clone();
    make_result(
        &[x],
        vec![rows, c],
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            // dL/dX = Sᵀ·g
            let mut gx = vec![0.0; n * c];
            for &(i, j, v) in &entries {
                for ch in 0..c {
                    gx[j * c + ch] += v * g[i * c + ch];
                }
            }
            gx
        }))],
    )
}

/// Selects rows of an n×c matrix by index, in the given order.
pub fn gather_rows(a: &Tensor, indices: &[usize]) -> Result<Tensor> {
    let (n, c) = dims2(a, "gather_rows")?;
    for &i in indices {
        if i >= n {
            return Err(TensorError::IndexOutOfRange { index: i, len: n });
        }
    }
    let mut out = Vec::with_capacity(indices.len() * c);
    for &i in indices {
        out.extend_from_slice(&a.data[i * c..(i + 1) * c]);
    }
    let idx = indices.to_vec();
    make_result(
        &[a],
        vec![indices.len(), c],
        out,
        vec![Some(Box::new(move |g: &[f64]| {
            let mut ga = vec![0.0; n * c];
            for (r, &i) in idx.iter().enumerate() {
                for ch in 0..c {
                    ga[i * c + ch] += g[r * c + ch];
                }
            }
            ga
        }))],
    )
}

/// Appends zero rows to an m×c matrix until it has `rows` rows.
pub fn pad_rows(a: &Tensor, rows: usize) -> Result<Tensor> {
    let (m, c) = dims2(a, "pad_rows")?;
    if rows < m {
        return Err(TensorError::ShapeMismatch(format!(
            "pad_rows target {rows} smaller than input rows {m}"
        )));
    }
    let mut out = a.data.to_vec();
    out.resize(rows * c, 0.0);
    make_result(
        &[a],
        vec![rows, c],
        out,
        vec![Some(Box::new(move |g: &[f64]| g[..m * c].to_vec()))],
    )
}

/// Horizontal concatenation of matrices sharing a row count.
pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(TensorError::ShapeMismatch("concat_cols of nothing".into()));
    }
    let (m, _) = dims2(parts[0], "concat_cols")?;
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let (pm, pc) = dims2(p, "concat_cols part")?;
        if pm != m {
            return Err(TensorError::ShapeMismatch(format!(
                "concat_cols row counts {m} vs {pm}"
            )));
        }
        widths.push(pc);
    }
    let total: usize = widths.iter().sum();
    let mut out = vec![0.0; m * total];
    let mut offset = 0;
    for (p, &w) in parts.iter().zip(&widths) {
        for i in 0..m {
            out[i * total + offset..i * total + offset + w]
                .copy_from_slice(&p.data[i * w..(i + 1) * w]);
        }
        offset += w;
    }
    let backs = {
        let mut backs: Vec<Option<BackFn>> = Vec::with_capacity(parts.len());
        let mut offset = 0;
        for &w in &widths {
            let start = offset;
            backs.push(Some(Box::new(move |g: &[f64]| {
                let mut gp = vec![0.0; m * w];
                for i in 0..m {
                    gp[i * w..(i + 1) * w]
                        .copy_from_slice(&g[i * total + start..i * total + start + w]);
                }
                gp
            })));
            offset += w;
        }
        backs
    };
    make_result(parts, vec![m, total], out, backs)
}

/// Stacks scalar tensors into a 1-D vector.
pub fn stack_scalars(parts: &[&Tensor]) -> Result<Tensor> {
    for p in parts {
        if !(p.data.len() == 1) {
            return Err(TensorError::ShapeMismatch(format!(
                "stack_scalars expects scalars, got {:?}",
                p.shape
            )));
        }
    }
    let out: Vec<f64> = parts.iter().map(|p| p.data[0]).collect();
    let backs: Vec<Option<BackFn>> = (0..parts.len())
        .map(|i| {
            Some(Box::new(move |g: &[f64]| vec![g[i]]) as BackFn)
        })
        .collect();
    make_result(parts, vec![parts.len()], out, backs)
}

/// Extracts element `i` of a 1-D tensor as a scalar.
pub fn get(a: &Tensor, i: usize) -> Result<Tensor> {
    if a.shape.len() != 1 {
        return Err(TensorError::ShapeMismatch(format!(
            "get expects 1-D tensor, got {:?}",
            a.shape
        )));
    }
    let len = a.data.len();
    if i >= len {
        return Err(TensorError::IndexOutOfRange { index: i, len });
    }
    let v = a.data[i];
    make_result(
        &[a],
        vec![],
        vec![v],
        vec![Some(Box::new(move |g: &[f64]| {
            let mut ga = vec![0.0; len];
            ga[i] = g[0];
            ga
        }))],
    )
}

/// a − b for identical shapes.
pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    add(a, &scale(b, -1.0)?)
}

/// Shape change without data movement.
pub fn reshape(a: &Tensor, shape: Vec<usize>) -> Result<Tensor> {
    if shape.iter().product::<usize>() != a.data.len() {
        return Err(TensorError::ShapeMismatch(format!(
            "reshape {:?} to {:?}",
            a.shape, shape
        )));
    }
    make_result(
        &[a],
        shape,
        a.data.to_vec(),
        vec![Some(Box::new(|g: &[f64]| g.to_vec()))],
    )
}
