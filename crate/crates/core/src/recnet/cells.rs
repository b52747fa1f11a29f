//! The three recurrent cell types. Each cell exists twice: as a pure
//! step function over vectors (action selection) and as a tape-recorded
//! builder over batch matrices (training). Both go through the same
//! numeric kernels, so for a batch of one they agree bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::numerics::{
    affine, sigmoid, Matrix, NodeId, ParamId, ParameterSet, Result as NumResult, Src, Tape,
};

use super::{RecnetError, Result};

/// Parameter handles for one LSTM layer: input/forget/output gates and the
/// candidate write, each `W x + U h + b`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LstmIds {
    pub w_i: ParamId,
    pub u_i: ParamId,
    pub b_i: ParamId,
    pub w_f: ParamId,
    pub u_f: ParamId,
    pub b_f: ParamId,
    pub w_o: ParamId,
    pub u_o: ParamId,
    pub b_o: ParamId,
    pub w_c: ParamId,
    pub u_c: ParamId,
    pub b_c: ParamId,
}

/// Parameter handles for one GRU layer: update gate `z`, reset gate `r`,
/// and the candidate activation `W x + U (r h)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GruIds {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

/// Parameter handles for one MUT1 layer. The update gate reads the input
/// only (no recurrent matrix), and the candidate adds `tanh(x)` unweighted,
/// so the cell requires `input_dim == hidden_dim`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Mut1Ids {
    pub w_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub b_r: ParamId,
    pub w_hat: ParamId,
    pub b_hat: ParamId,
}

fn register(
    params: &mut ParameterSet,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<ParamId> {
    Ok(params.register(name, Matrix::zeros(rows, cols))?)
}

impl LstmIds {
    pub fn register(
        params: &mut ParameterSet,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
    ) -> Result<Self> {
        let (h, n) = (hidden, input_dim);
        Ok(LstmIds {
            w_i: register(params, &format!("{prefix}.w_i"), h, n)?,
            u_i: register(params, &format!("{prefix}.u_i"), h, h)?,
            b_i: register(params, &format!("{prefix}.b_i"), 1, h)?,
            w_f: register(params, &format!("{prefix}.w_f"), h, n)?,
            u_f: register(params, &format!("{prefix}.u_f"), h, h)?,
            b_f: register(params, &format!("{prefix}.b_f"), 1, h)?,
            w_o: register(params, &format!("{prefix}.w_o"), h, n)?,
            u_o: register(params, &format!("{prefix}.u_o"), h, h)?,
            b_o: register(params, &format!("{prefix}.b_o"), 1, h)?,
            w_c: register(params, &format!("{prefix}.w_c"), h, n)?,
            u_c: register(params, &format!("{prefix}.u_c"), h, h)?,
            b_c: register(params, &format!("{prefix}.b_c"), 1, h)?,
        })
    }
}

impl GruIds {
    pub fn register(
        params: &mut ParameterSet,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
    ) -> Result<Self> {
        let (h, n) = (hidden, input_dim);
        Ok(GruIds {
            w_z: register(params, &format!("{prefix}.w_z"), h, n)?,
            u_z: register(params, &format!("{prefix}.u_z"), h, h)?,
            b_z: register(params, &format!("{prefix}.b_z"), 1, h)?,
            w_r: register(params, &format!("{prefix}.w_r"), h, n)?,
            u_r: register(params, &format!("{prefix}.u_r"), h, h)?,
            b_r: register(params, &format!("{prefix}.b_r"), 1, h)?,
            w_h: register(params, &format!("{prefix}.w_h"), h, n)?,
            u_h: register(params, &format!("{prefix}.u_h"), h, h)?,
            b_h: register(params, &format!("{prefix}.b_h"), 1, h)?,
        })
    }
}

impl Mut1Ids {
    pub fn register(
        params: &mut ParameterSet,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
    ) -> Result<Self> {
        if input_dim != hidden {
            return Err(RecnetError::BadDims(
                "mut1 requires input_dim == hidden_dim for its tanh(x) term",
            ));
        }
        let (h, n) = (hidden, input_dim);
        Ok(Mut1Ids {
            w_z: register(params, &format!("{prefix}.w_z"), h, n)?,
            b_z: register(params, &format!("{prefix}.b_z"), 1, h)?,
            w_r: register(params, &format!("{prefix}.w_r"), h, n)?,
            w_h: register(params, &format!("{prefix}.w_h"), h, h)?,
            b_r: register(params, &format!("{prefix}.b_r"), 1, h)?,
            w_hat: register(params, &format!("{prefix}.w_hat"), h, h)?,
            b_hat: register(params, &format!("{prefix}.b_hat"), 1, h)?,
        })
    }
}

// ---- pure step functions ---------------------------------------------

/// One LSTM step: gates from `W x + U h + b`, cell write
/// `c = f c_prev + i c_tilde`, output `h = o tanh(c)`.
pub fn lstm_step(
    params: &ParameterSet,
    ids: &LstmIds,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> NumResult<(Vec<f64>, Vec<f64>)> {
    let gate = |w, u, b: ParamId| -> NumResult<Vec<f64>> {
        sigmoid(&affine(
            params.get(w),
            x,
            Some((params.get(u), h_prev)),
            params.get(b).row(0),
        )?)
    };
    let i = gate(ids.w_i, ids.u_i, ids.b_i)?;
    let f = gate(ids.w_f, ids.u_f, ids.b_f)?;
    let o = gate(ids.w_o, ids.u_o, ids.b_o)?;
    let c_tilde: Vec<f64> = affine(
        params.get(ids.w_c),
        x,
        Some((params.get(ids.u_c), h_prev)),
        params.get(ids.b_c).row(0),
    )?
    .iter()
    .map(|v| v.tanh())
    .collect();
    let mut c = vec![0.0; c_prev.len()];
    for j in 0..c.len() {
        let fc = f[j] * c_prev[j];
        let ic = i[j] * c_tilde[j];
        c[j] = fc + ic;
    }
    let h: Vec<f64> = o
        .iter()
        .zip(&c)
        .map(|(oj, cj)| oj * cj.tanh())
        .collect();
    Ok((h, c))
}

/// One GRU step: `h = (1 - z) h_prev + z tanh(W x + U (r h_prev))`.
pub fn gru_step(
    params: &ParameterSet,
    ids: &GruIds,
    x: &[f64],
    h_prev: &[f64],
) -> NumResult<Vec<f64>> {
    let gate = |w, u, b: ParamId| -> NumResult<Vec<f64>> {
        sigmoid(&affine(
            params.get(w),
            x,
            Some((params.get(u), h_prev)),
            params.get(b).row(0),
        )?)
    };
    let z = gate(ids.w_z, ids.u_z, ids.b_z)?;
    let r = gate(ids.w_r, ids.u_r, ids.b_r)?;
    let x_tilde: Vec<f64> = r.iter().zip(h_prev).map(|(rj, hj)| rj * hj).collect();
    let h_tilde: Vec<f64> = affine(
        params.get(ids.w_h),
        x,
        Some((params.get(ids.u_h), &x_tilde)),
        params.get(ids.b_h).row(0),
    )?
    .iter()
    .map(|v| v.tanh())
    .collect();
    Ok(blend_vec(&z, h_prev, &h_tilde))
}

/// One MUT1 step: `z` from the input alone, `r` from input and state,
/// candidate `tanh(W (r h_prev) + tanh(x) + b)`, GRU-style mixing.
pub fn mut1_step(
    params: &ParameterSet,
    ids: &Mut1Ids,
    x: &[f64],
    h_prev: &[f64],
) -> NumResult<Vec<f64>> {
    let z = sigmoid(&affine(
        params.get(ids.w_z),
        x,
        None,
        params.get(ids.b_z).row(0),
    )?)?;
    let r = sigmoid(&affine(
        params.get(ids.w_r),
        x,
        Some((params.get(ids.w_h), h_prev)),
        params.get(ids.b_r).row(0),
    )?)?;
    let h_hat: Vec<f64> = r.iter().zip(h_prev).map(|(rj, hj)| rj * hj).collect();
    let pre = affine(
        params.get(ids.w_hat),
        &h_hat,
        None,
        params.get(ids.b_hat).row(0),
    )?;
    let h_tilde: Vec<f64> = pre
        .iter()
        .zip(x)
        .map(|(p, xj)| {
            let tx = xj.tanh();
            (p + tx).tanh()
        })
        .collect();
    Ok(blend_vec(&z, h_prev, &h_tilde))
}

/// `(1 - z) a + z b`, the same expression the tape's blend op applies.
fn blend_vec(z: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(a)
        .zip(b)
        .map(|((zi, ai), bi)| (1.0 - zi) * ai + zi * bi)
        .collect()
}

// ---- taped builders ----------------------------------------------------

pub(super) fn lstm_step_taped(
    tape: &mut Tape<'_>,
    ids: &LstmIds,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> (NodeId, NodeId) {
    let gate = |tape: &mut Tape<'_>, w, u, b| {
        let a = tape.affine(w, x, Some((u, Src::Node(h_prev))), b);
        tape.sigmoid(a)
    };
    let i = gate(tape, ids.w_i, ids.u_i, ids.b_i);
    let f = gate(tape, ids.w_f, ids.u_f, ids.b_f);
    let o = gate(tape, ids.w_o, ids.u_o, ids.b_o);
    let a_c = tape.affine(ids.w_c, x, Some((ids.u_c, Src::Node(h_prev))), ids.b_c);
    let c_tilde = tape.tanh(a_c);
    let fc = tape.mul(f, c_prev);
    let ic = tape.mul(i, c_tilde);
    let c = tape.add(fc, ic);
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc);
    (h, c)
}

pub(super) fn gru_step_taped(
    tape: &mut Tape<'_>,
    ids: &GruIds,
    x: NodeId,
    h_prev: NodeId,
) -> NodeId {
    let a_z = tape.affine(ids.w_z, x, Some((ids.u_z, Src::Node(h_prev))), ids.b_z);
    let z = tape.sigmoid(a_z);
    let a_r = tape.affine(ids.w_r, x, Some((ids.u_r, Src::Node(h_prev))), ids.b_r);
    let r = tape.sigmoid(a_r);
    let x_tilde = tape.mul(r, h_prev);
    let a_h = tape.affine(ids.w_h, x, Some((ids.u_h, Src::Node(x_tilde))), ids.b_h);
    let h_tilde = tape.tanh(a_h);
    tape.blend(z, h_prev, h_tilde)
}

pub(super) fn mut1_step_taped(
    tape: &mut Tape<'_>,
    ids: &Mut1Ids,
    x: NodeId,
    h_prev: NodeId,
) -> NodeId {
    let a_z = tape.affine(ids.w_z, x, None, ids.b_z);
    let z = tape.sigmoid(a_z);
    let a_r = tape.affine(ids.w_r, x, Some((ids.w_h, Src::Node(h_prev))), ids.b_r);
    let r = tape.sigmoid(a_r);
    let h_hat = tape.mul(r, h_prev);
    let pre = tape.affine(ids.w_hat, h_hat, None, ids.b_hat);
    let tx = tape.tanh(x);
    let sum = tape.add(pre, tx);
    let h_tilde = tape.tanh(sum);
    tape.blend(z, h_prev, h_tilde)
}
