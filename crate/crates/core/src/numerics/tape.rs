use super::ops::{affine_batch_into, axpy, sigmoid_scalar};
use super::{Matrix, NumericsError, ParamGrads, ParamId, ParameterSet, Result};

/// Handle to an intermediate value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Operand of a recorded operation: either a parameter tensor or an
/// intermediate node.
#[derive(Debug, Clone, Copy)]
pub enum Src {
    Param(ParamId),
    Node(NodeId),
}

impl From<ParamId> for Src {
    fn from(p: ParamId) -> Self {
        Src::Param(p)
    }
}

impl From<NodeId> for Src {
    fn from(n: NodeId) -> Self {
        Src::Node(n)
    }
}

struct Node {
    value: Matrix,
    needs_grad: bool,
}

enum Op {
    /// `out = x W^T (+ h U^T) + b`, broadcast over batch rows.
    Affine {
        w: ParamId,
        x: Src,
        uh: Option<(ParamId, Src)>,
        b: ParamId,
        out: usize,
    },
    Sigmoid {
        x: Src,
        out: usize,
    },
    Tanh {
        x: Src,
        out: usize,
    },
    /// Elementwise product.
    Mul {
        a: Src,
        b: Src,
        out: usize,
    },
    /// Elementwise sum.
    Add {
        a: Src,
        b: Src,
        out: usize,
    },
    /// Convex blend `out = (1 - z) a + z b`, the gated-cell mixing step.
    Blend {
        z: Src,
        a: Src,
        b: Src,
        out: usize,
    },
    /// Scalar `sum(mask * (pred - target)^2) / sum(mask)`; 0 for an
    /// all-zero mask. `target` and `mask` are constants.
    MseMasked {
        pred: Src,
        target: Matrix,
        mask: Matrix,
        count: f64,
        out: usize,
    },
}

/// Wengert tape: records primitive operations during an eager forward pass
/// over a borrowed [`ParameterSet`], then traverses them in reverse to
/// accumulate exact parameter gradients.
///
/// Recording is append-only and values are computed at record time, so a
/// tape is also the forward pass. [`Tape::replay_forward`] re-executes the
/// recorded operations and checks the stored outputs bit-for-bit.
pub struct Tape<'p> {
    params: &'p ParameterSet,
    nodes: Vec<Node>,
    ops: Vec<Op>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParameterSet) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            ops: Vec::new(),
        }
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    /// Registers a constant leaf (observation window rows, initial state).
    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.push_node(value, false)
    }

    pub fn value(&self, n: NodeId) -> &Matrix {
        &self.nodes[n.0].value
    }

    /// Value of the given scalar (1x1) node.
    pub fn scalar(&self, n: NodeId) -> f64 {
        let v = &self.nodes[n.0].value;
        assert_eq!(v.shape(), (1, 1), "scalar() on non-scalar node");
        v.get(0, 0)
    }

    fn push_node(&mut self, value: Matrix, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn val(&self, s: Src) -> &Matrix {
        match s {
            Src::Param(p) => self.params.get(p),
            Src::Node(n) => &self.nodes[n.0].value,
        }
    }

    fn src_needs_grad(&self, s: Src) -> bool {
        match s {
            Src::Param(_) => true,
            Src::Node(n) => self.nodes[n.0].needs_grad,
        }
    }

    /// Records `x W^T (+ h U^T) + b` with batch rows in `x` (and `h`).
    /// `w` is `m x n` against `x` rows of length `n`; `b` is a `1 x m` row.
    pub fn affine(
        &mut self,
        w: ParamId,
        x: impl Into<Src>,
        uh: Option<(ParamId, Src)>,
        b: ParamId,
    ) -> NodeId {
        let x = x.into();
        let (xv, wv, bv) = (self.val(x), self.params.get(w), self.params.get(b));
        assert_eq!(wv.cols(), xv.cols(), "affine: W cols vs x dim");
        assert_eq!(bv.shape(), (1, wv.rows()), "affine: bias shape");
        let batch = xv.rows();
        let mut out = Matrix::zeros(batch, wv.rows());
        match uh {
            None => affine_batch_into(&mut out, wv, xv, None, bv.row(0)),
            Some((u, h)) => {
                let (uv, hv) = (self.params.get(u), self.val(h));
                assert_eq!(uv.cols(), hv.cols(), "affine: U cols vs h dim");
                assert_eq!(uv.rows(), wv.rows(), "affine: U rows vs W rows");
                assert_eq!(hv.rows(), batch, "affine: h batch vs x batch");
                affine_batch_into(&mut out, wv, xv, Some((uv, hv)), bv.row(0));
            }
        }
        let out = self.push_node(out, true);
        self.ops.push(Op::Affine {
            w,
            x,
            uh,
            b,
            out: out.0,
        });
        out
    }

    pub fn sigmoid(&mut self, x: impl Into<Src>) -> NodeId {
        let x = x.into();
        let xv = self.val(x);
        let mut out = Matrix::zeros(xv.rows(), xv.cols());
        for (o, &v) in out.as_mut_slice().iter_mut().zip(xv.as_slice()) {
            *o = sigmoid_scalar(v);
        }
        let ng = self.src_needs_grad(x);
        let out = self.push_node(out, ng);
        self.ops.push(Op::Sigmoid { x, out: out.0 });
        out
    }

    pub fn tanh(&mut self, x: impl Into<Src>) -> NodeId {
        let x = x.into();
        let xv = self.val(x);
        let mut out = Matrix::zeros(xv.rows(), xv.cols());
        for (o, &v) in out.as_mut_slice().iter_mut().zip(xv.as_slice()) {
            *o = v.tanh();
        }
        let ng = self.src_needs_grad(x);
        let out = self.push_node(out, ng);
        self.ops.push(Op::Tanh { x, out: out.0 });
        out
    }

    pub fn mul(&mut self, a: impl Into<Src>, b: impl Into<Src>) -> NodeId {
        let (a, b) = (a.into(), b.into());
        let (av, bv) = (self.val(a), self.val(b));
        assert!(av.same_shape(bv), "mul: shape mismatch");
        let mut out = Matrix::zeros(av.rows(), av.cols());
        for ((o, &x), &y) in out
            .as_mut_slice()
            .iter_mut()
            .zip(av.as_slice())
            .zip(bv.as_slice())
        {
            *o = x * y;
        }
        let ng = self.src_needs_grad(a) || self.src_needs_grad(b);
        let out = self.push_node(out, ng);
        self.ops.push(Op::Mul { a, b, out: out.0 });
        out
    }

    pub fn add(&mut self, a: impl Into<Src>, b: impl Into<Src>) -> NodeId {
        let (a, b) = (a.into(), b.into());
        let (av, bv) = (self.val(a), self.val(b));
        assert!(av.same_shape(bv), "add: shape mismatch");
        let mut out = Matrix::zeros(av.rows(), av.cols());
        for ((o, &x), &y) in out
            .as_mut_slice()
            .iter_mut()
            .zip(av.as_slice())
            .zip(bv.as_slice())
        {
            *o = x + y;
        }
        let ng = self.src_needs_grad(a) || self.src_needs_grad(b);
        let out = self.push_node(out, ng);
        self.ops.push(Op::Add { a, b, out: out.0 });
        out
    }

    /// `(1 - z) a + z b`.
    pub fn blend(
        &mut self,
        z: impl Into<Src>,
        a: impl Into<Src>,
        b: impl Into<Src>,
    ) -> NodeId {
        let (z, a, b) = (z.into(), a.into(), b.into());
        let (zv, av, bv) = (self.val(z), self.val(a), self.val(b));
        assert!(
            zv.same_shape(av) && zv.same_shape(bv),
            "blend: shape mismatch"
        );
        let mut out = Matrix::zeros(zv.rows(), zv.cols());
        for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
            let (zi, ai, bi) = (zv.as_slice()[i], av.as_slice()[i], bv.as_slice()[i]);
            *o = (1.0 - zi) * ai + zi * bi;
        }
        let ng =
            self.src_needs_grad(z) || self.src_needs_grad(a) || self.src_needs_grad(b);
        let out = self.push_node(out, ng);
        self.ops.push(Op::Blend {
            z,
            a,
            b,
            out: out.0,
        });
        out
    }

    /// Scalar masked mean-squared error against constant targets.
    pub fn mse_masked(&mut self, pred: impl Into<Src>, target: Matrix, mask: Matrix) -> NodeId {
        let pred = pred.into();
        let pv = self.val(pred);
        assert!(
            pv.same_shape(&target) && pv.same_shape(&mask),
            "mse_masked: shape mismatch"
        );
        let count: f64 = mask.as_slice().iter().sum();
        let loss = if count == 0.0 {
            0.0
        } else {
            let mut s = 0.0;
            for ((&p, &t), &m) in pv
                .as_slice()
                .iter()
                .zip(target.as_slice())
                .zip(mask.as_slice())
            {
                s += m * (p - t) * (p - t);
            }
            s / count
        };
        // A non-finite loss is recorded as-is; backward() rejects it, which
        // is the signal training uses to abort the run as diverged.
        let mut node = Matrix::zeros(1, 1);
        node.set(0, 0, loss);
        let ng = self.src_needs_grad(pred);
        let out = self.push_node(node, ng);
        self.ops.push(Op::MseMasked {
            pred,
            target,
            mask,
            count,
            out: out.0,
        });
        out
    }

    /// Reverse pass from a scalar terminal node with seed gradient 1.
    /// Returns the gradient of that scalar with respect to every parameter
    /// (exactly zero for parameters the value does not depend on).
    pub fn backward(&self, terminal: NodeId) -> Result<ParamGrads> {
        if self.ops.is_empty() {
            return Err(NumericsError::NoScalarTerminal);
        }
        let tv = &self.nodes[terminal.0].value;
        if tv.shape() != (1, 1) {
            return Err(NumericsError::NoScalarTerminal);
        }
        if !tv.all_finite() {
            return Err(NumericsError::NonFinite("terminal value"));
        }
        let seed = Matrix::from_vec(1, 1, vec![1.0]).expect("seed");
        Ok(self.backward_seeded(terminal, seed))
    }

    /// Reverse pass with an explicit seed gradient on `node` (shape must
    /// match that node's value).
    pub fn backward_seeded(&self, node: NodeId, seed: Matrix) -> ParamGrads {
        assert!(
            seed.same_shape(&self.nodes[node.0].value),
            "seed gradient shape mismatch"
        );
        let mut node_grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        node_grads[node.0] = Some(seed);
        let mut pgrads = ParamGrads::zeros_like(self.params);

        for op in self.ops.iter().rev() {
            match op {
                Op::Affine { w, x, uh, b, out } => {
                    let Some(d_out) = node_grads[*out].take() else {
                        continue;
                    };
                    let xv = self.val(*x);
                    let wv = self.params.get(*w);
                    let batch = xv.rows();
                    // dW[j] += sum_r d_out[r,j] * x[r];  db[j] += sum_r d_out[r,j]
                    {
                        let wg = pgrads.get_mut(*w);
                        for r in 0..batch {
                            let dr = d_out.row(r);
                            for (j, &dj) in dr.iter().enumerate() {
                                if dj != 0.0 {
                                    axpy(wg.row_mut(j), dj, xv.row(r));
                                }
                            }
                        }
                    }
                    {
                        let bg = pgrads.get_mut(*b).row_mut(0);
                        for r in 0..batch {
                            axpy(bg, 1.0, d_out.row(r));
                        }
                    }
                    // dx[r] += sum_j d_out[r,j] * W[j]
                    if self.src_needs_grad(*x) {
                        let mut dx = Matrix::zeros(batch, wv.cols());
                        for r in 0..batch {
                            let dr = d_out.row(r);
                            let dxr = dx.row_mut(r);
                            for (j, &dj) in dr.iter().enumerate() {
                                if dj != 0.0 {
                                    axpy(dxr, dj, wv.row(j));
                                }
                            }
                        }
                        accum_src(*x, dx, &mut node_grads, &mut pgrads);
                    }
                    if let Some((u, h)) = uh {
                        let (uv, hv) = (self.params.get(*u), self.val(*h));
                        {
                            let ug = pgrads.get_mut(*u);
                            for r in 0..batch {
                                let dr = d_out.row(r);
                                for (j, &dj) in dr.iter().enumerate() {
                                    if dj != 0.0 {
                                        axpy(ug.row_mut(j), dj, hv.row(r));
                                    }
                                }
                            }
                        }
                        if self.src_needs_grad(*h) {
                            let mut dh = Matrix::zeros(batch, uv.cols());
                            for r in 0..batch {
                                let dr = d_out.row(r);
                                let dhr = dh.row_mut(r);
                                for (j, &dj) in dr.iter().enumerate() {
                                    if dj != 0.0 {
                                        axpy(dhr, dj, uv.row(j));
                                    }
                                }
                            }
                            accum_src(*h, dh, &mut node_grads, &mut pgrads);
                        }
                    }
                }
                Op::Sigmoid { x, out } => {
                    let Some(d_out) = node_grads[*out].take() else {
                        continue;
                    };
                    if !self.src_needs_grad(*x) {
                        continue;
                    }
                    let y = &self.nodes[*out].value;
                    let mut dx = d_out;
                    for (d, &yi) in dx.as_mut_slice().iter_mut().zip(y.as_slice()) {
                        *d *= yi * (1.0 - yi);
                    }
                    accum_src(*x, dx, &mut node_grads, &mut pgrads);
                }
                Op::Tanh { x, out } => {
                    let Some(d_out) = node_grads[*out].take() else {
                        continue;
                    };
                    if !self.src_needs_grad(*x) {
                        continue;
                    }
                    let y = &self.nodes[*out].value;
                    let mut dx = d_out;
                    for (d, &yi) in dx.as_mut_slice().iter_mut().zip(y.as_slice()) {
                        *d *= 1.0 - yi * yi;
                    }
                    accum_src(*x, dx, &mut node_grads, &mut pgrads);
                }
                Op::Mul { a, b, out } => {
                    let Some(d_out) = node_grads[*out].take() else {
                        continue;
                    };
                    if self.src_needs_grad(*a) {
                        let mut da = d_out.clone();
                        for (d, &bi) in da.as_mut_slice().iter_mut().zip(self.val(*b).as_slice())
                        {
                            *d *= bi;
                        }
                        accum_src(*a, da, &mut node_grads, &mut pgrads);
                    }
                    if self.src_needs_grad(*b) {
                        let mut db = d_out;
                        for (d, &ai) in db.as_mut_slice().iter_mut().zip(self.val(*a).as_slice())
                        {
                            *d *= ai;
                        }
                        accum_src(*b, db, &mut node_grads, &mut pgrads);
                    }
                }
                Op::Add { a, b, out } => {
                    let Some(d_out) = node_grads[*out].take() else {
                        continue;
                    };
                    if self.src_needs_grad(*a) {
                        accum_src(*a, d_out.clone(), &mut node_grads, &mut pgrads);
                    }
                    if self.src_needs_grad(*b) {
                        accum_src(*b, d_out, &mut node_grads, &mut pgrads);
                    }
                }
                Op::Blend { z, a, b, out } => {
                    let Some(d_out) = node_grads[*out].take() else {
                        continue;
                    };
                    let zv = self.val(*z);
                    if self.src_needs_grad(*z) {
                        let mut dz = d_out.clone();
                        for ((d, &ai), &bi) in dz
                            .as_mut_slice()
                            .iter_mut()
                            .zip(self.val(*a).as_slice())
                            .zip(self.val(*b).as_slice())
                        {
                            *d *= bi - ai;
                        }
                        accum_src(*z, dz, &mut node_grads, &mut pgrads);
                    }
                    if self.src_needs_grad(*a) {
                        let mut da = d_out.clone();
                        for (d, &zi) in da.as_mut_slice().iter_mut().zip(zv.as_slice()) {
                            *d *= 1.0 - zi;
                        }
                        accum_src(*a, da, &mut node_grads, &mut pgrads);
                    }
                    if self.src_needs_grad(*b) {
                        let mut db = d_out;
                        for (d, &zi) in db.as_mut_slice().iter_mut().zip(zv.as_slice()) {
                            *d *= zi;
                        }
                        accum_src(*b, db, &mut node_grads, &mut pgrads);
                    }
                }
                Op::MseMasked {
                    pred,
                    target,
                    mask,
                    count,
                    out,
                } => {
                    let Some(d_out) = node_grads[*out].take() else {
                        continue;
                    };
                    if !self.src_needs_grad(*pred) || *count == 0.0 {
                        continue;
                    }
                    let scale = 2.0 * d_out.get(0, 0) / count;
                    let pv = self.val(*pred);
                    let mut dp = Matrix::zeros(pv.rows(), pv.cols());
                    for (i, d) in dp.as_mut_slice().iter_mut().enumerate() {
                        let (p, t, m) = (
                            pv.as_slice()[i],
                            target.as_slice()[i],
                            mask.as_slice()[i],
                        );
                        *d = scale * m * (p - t);
                    }
                    accum_src(*pred, dp, &mut node_grads, &mut pgrads);
                }
            }
        }
        pgrads
    }

    /// Re-executes every recorded operation from the stored leaves and
    /// parameters and compares against the recorded outputs. True iff all
    /// outputs reproduce bit-exactly.
    pub fn replay_forward(&self) -> bool {
        for op in &self.ops {
            let (out_idx, recomputed) = match op {
                Op::Affine { w, x, uh, b, out } => {
                    let xv = self.val(*x);
                    let wv = self.params.get(*w);
                    let bv = self.params.get(*b);
                    let mut o = Matrix::zeros(xv.rows(), wv.rows());
                    match uh {
                        None => affine_batch_into(&mut o, wv, xv, None, bv.row(0)),
                        Some((u, h)) => affine_batch_into(
                            &mut o,
                            wv,
                            xv,
                            Some((self.params.get(*u), self.val(*h))),
                            bv.row(0),
                        ),
                    }
                    (*out, o)
                }
                Op::Sigmoid { x, out } => {
                    let xv = self.val(*x);
                    let mut o = Matrix::zeros(xv.rows(), xv.cols());
                    for (oo, &v) in o.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        *oo = sigmoid_scalar(v);
                    }
                    (*out, o)
                }
                Op::Tanh { x, out } => {
                    let xv = self.val(*x);
                    let mut o = Matrix::zeros(xv.rows(), xv.cols());
                    for (oo, &v) in o.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        *oo = v.tanh();
                    }
                    (*out, o)
                }
                Op::Mul { a, b, out } => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    let mut o = Matrix::zeros(av.rows(), av.cols());
                    for ((oo, &x), &y) in o
                        .as_mut_slice()
                        .iter_mut()
                        .zip(av.as_slice())
                        .zip(bv.as_slice())
                    {
                        *oo = x * y;
                    }
                    (*out, o)
                }
                Op::Add { a, b, out } => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    let mut o = Matrix::zeros(av.rows(), av.cols());
                    for ((oo, &x), &y) in o
                        .as_mut_slice()
                        .iter_mut()
                        .zip(av.as_slice())
                        .zip(bv.as_slice())
                    {
                        *oo = x + y;
                    }
                    (*out, o)
                }
                Op::Blend { z, a, b, out } => {
                    let (zv, av, bv) = (self.val(*z), self.val(*a), self.val(*b));
                    let mut o = Matrix::zeros(zv.rows(), zv.cols());
                    for (i, oo) in o.as_mut_slice().iter_mut().enumerate() {
                        let (zi, ai, bi) =
                            (zv.as_slice()[i], av.as_slice()[i], bv.as_slice()[i]);
                        *oo = (1.0 - zi) * ai + zi * bi;
                    }
                    (*out, o)
                }
                Op::MseMasked {
                    pred,
                    target,
                    mask,
                    count,
                    out,
                } => {
                    let pv = self.val(*pred);
                    let loss = if *count == 0.0 {
                        0.0
                    } else {
                        let mut s = 0.0;
                        for ((&p, &t), &m) in pv
                            .as_slice()
                            .iter()
                            .zip(target.as_slice())
                            .zip(mask.as_slice())
                        {
                            s += m * (p - t) * (p - t);
                        }
                        s / *count
                    };
                    let mut node = Matrix::zeros(1, 1);
                    node.set(0, 0, loss);
                    (*out, node)
                }
            };
            let stored = &self.nodes[out_idx].value;
            if stored.as_slice().len() != recomputed.as_slice().len()
                || stored
                    .as_slice()
                    .iter()
                    .zip(recomputed.as_slice())
                    .any(|(a, b)| a.to_bits() != b.to_bits())
            {
                return false;
            }
        }
        true
    }
}

fn accum_src(
    src: Src,
    delta: Matrix,
    node_grads: &mut [Option<Matrix>],
    pgrads: &mut ParamGrads,
) {
    match src {
        Src::Param(p) => pgrads.get_mut(p).add_assign(&delta),
        Src::Node(n) => match &mut node_grads[n.0] {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        },
    }
}
