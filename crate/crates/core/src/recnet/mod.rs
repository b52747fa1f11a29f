//! Value-network architectures: a feed-forward baseline and three
//! recurrent cells behind a shared topology of
//! `input -> dense tanh -> (recurrent cell) -> dense linear readout`.
//!
//! Networks map a fixed-length window of observation vectors to one value
//! per action. The feed-forward baseline reads only the final observation
//! of the window; the recurrent variants run the whole window through a
//! zero-initialized state.

mod cells;

pub use cells::{gru_step, lstm_step, mut1_step, GruIds, LstmIds, Mut1Ids};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

use crate::numerics::{
    affine, Matrix, NodeId, NumericsError, ParamId, ParameterSet, RmsProp, Tape,
};

#[derive(Debug, Error)]
pub enum RecnetError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("unknown architecture tag `{0}`")]
    UnknownArch(String),
    #[error("window length {got}, expected {want}")]
    WindowLength { got: usize, want: usize },
    #[error("observation dimension {got}, expected {want}")]
    ObsDim { got: usize, want: usize },
    #[error("action index {got} out of range (|A| = {actions})")]
    BadAction { got: usize, actions: usize },
    #[error("invalid dimensions: {0}")]
    BadDims(&'static str),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RecnetError>;

/// Architecture tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Nnet,
    Lstm,
    Gru,
    Mut1,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Nnet, Arch::Lstm, Arch::Gru, Arch::Mut1];

    pub fn tag(self) -> &'static str {
        match self {
            Arch::Nnet => "nnet",
            Arch::Lstm => "lstm",
            Arch::Gru => "gru",
            Arch::Mut1 => "mut1",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "nnet" => Ok(Arch::Nnet),
            "lstm" => Ok(Arch::Lstm),
            "gru" => Ok(Arch::Gru),
            "mut1" => Ok(Arch::Mut1),
            other => Err(RecnetError::UnknownArch(other.to_string())),
        }
    }

    pub fn is_recurrent(self) -> bool {
        !matches!(self, Arch::Nnet)
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// One unit of batch training data: an observation window, the action
/// taken at its final step, and the scalar regression target for that
/// action's output.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSample {
    pub window: Vec<Vec<f64>>,
    pub action: usize,
    pub target: f64,
}

/// Recurrent layer state, zero-initialized at the start of every window
/// evaluation. The memory vector exists only for LSTM.
#[derive(Debug, Clone)]
pub struct RecurrentState {
    pub h: Vec<f64>,
    pub c: Option<Vec<f64>>,
}

impl RecurrentState {
    fn zeros(arch: Arch, hidden: usize) -> Self {
        RecurrentState {
            h: vec![0.0; hidden],
            c: matches!(arch, Arch::Lstm).then(|| vec![0.0; hidden]),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum CellIds {
    None,
    Lstm(LstmIds),
    Gru(GruIds),
    Mut1(Mut1Ids),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerIds {
    tanh_w: ParamId,
    tanh_b: ParamId,
    cell: CellIds,
    out_w: ParamId,
    out_b: ParamId,
}

/// A windowed action-value network: architecture tag, dimensions, and the
/// parameter set holding every weight matrix and bias vector.
#[derive(Debug, Clone)]
pub struct ValueNetwork {
    arch: Arch,
    input_dim: usize,
    hidden: usize,
    actions: usize,
    window: usize,
    params: ParameterSet,
    ids: LayerIds,
}

/// Builds a seeded network. Weight matrices are uniform on
/// `+-sqrt(6 / (fan_in + fan_out))`, biases zero; the draw order is the
/// registration order, so a fixed seed gives bit-identical parameters.
pub fn init_network(
    arch: Arch,
    input_dim: usize,
    hidden: usize,
    actions: usize,
    window: usize,
    seed: u64,
) -> Result<ValueNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_network_with(arch, input_dim, hidden, actions, window, &mut rng)
}

/// As [`init_network`], drawing from a caller-provided generator.
pub fn init_network_with(
    arch: Arch,
    input_dim: usize,
    hidden: usize,
    actions: usize,
    window: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ValueNetwork> {
    if input_dim == 0 || hidden == 0 || actions == 0 || window == 0 {
        return Err(RecnetError::BadDims("all dimensions must be positive"));
    }
    let mut params = ParameterSet::new();
    let tanh_w = params.register("tanh.w", Matrix::zeros(hidden, input_dim))?;
    let tanh_b = params.register("tanh.b", Matrix::zeros(1, hidden))?;
    let cell = match arch {
        Arch::Nnet => CellIds::None,
        Arch::Lstm => CellIds::Lstm(LstmIds::register(&mut params, "lstm", hidden, hidden)?),
        Arch::Gru => CellIds::Gru(GruIds::register(&mut params, "gru", hidden, hidden)?),
        Arch::Mut1 => CellIds::Mut1(Mut1Ids::register(&mut params, "mut1", hidden, hidden)?),
    };
    let out_w = params.register("out.w", Matrix::zeros(actions, hidden))?;
    let out_b = params.register("out.b", Matrix::zeros(1, actions))?;
    let ids = LayerIds {
        tanh_w,
        tanh_b,
        cell,
        out_w,
        out_b,
    };
    let mut net = ValueNetwork {
        arch,
        input_dim,
        hidden,
        actions,
        window,
        params,
        ids,
    };
    for id in net.weight_ids() {
        let t = net.params.get_mut(id);
        let bound = (6.0 / (t.rows() + t.cols()) as f64).sqrt();
        for v in t.as_mut_slice() {
            *v = (2.0 * rng.gen::<f64>() - 1.0) * bound;
        }
    }
    Ok(net)
}

impl ValueNetwork {
    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    /// Total scalar parameter count; a pure function of architecture and
    /// layer sizes.
    pub fn parameter_count(&self) -> usize {
        self.params.entry_count()
    }

    fn weight_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.ids.tanh_w];
        match &self.ids.cell {
            CellIds::None => {}
            CellIds::Lstm(c) => {
                ids.extend([c.w_i, c.u_i, c.w_f, c.u_f, c.w_o, c.u_o, c.w_c, c.u_c])
            }
            CellIds::Gru(c) => ids.extend([c.w_z, c.u_z, c.w_r, c.u_r, c.w_h, c.u_h]),
            CellIds::Mut1(c) => ids.extend([c.w_z, c.w_r, c.w_h, c.w_hat]),
        }
        ids.push(self.ids.out_w);
        ids
    }

    fn check_window(&self, window: &[Vec<f64>]) -> Result<()> {
        if window.len() != self.window {
            return Err(RecnetError::WindowLength {
                got: window.len(),
                want: self.window,
            });
        }
        for obs in window {
            if obs.len() != self.input_dim {
                return Err(RecnetError::ObsDim {
                    got: obs.len(),
                    want: self.input_dim,
                });
            }
        }
        Ok(())
    }

    /// Action values for one observation window. Recurrent architectures
    /// run every step through a zero-initialized state; the feed-forward
    /// baseline reads only the final observation.
    pub fn forward(&self, window: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_window(window)?;
        let p = &self.params;
        let tanh_layer = |obs: &[f64]| -> Result<Vec<f64>> {
            Ok(affine(
                p.get(self.ids.tanh_w),
                obs,
                None,
                p.get(self.ids.tanh_b).row(0),
            )?
            .iter()
            .map(|v| v.tanh())
            .collect())
        };
        let readout = |h: &[f64]| -> Result<Vec<f64>> {
            Ok(affine(
                p.get(self.ids.out_w),
                h,
                None,
                p.get(self.ids.out_b).row(0),
            )?)
        };
        match &self.ids.cell {
            CellIds::None => {
                let z = tanh_layer(window.last().expect("window non-empty"))?;
                readout(&z)
            }
            CellIds::Lstm(c) => {
                let mut state = RecurrentState::zeros(self.arch, self.hidden);
                for obs in window {
                    let x = tanh_layer(obs)?;
                    let (h, cc) =
                        lstm_step(p, c, &x, &state.h, state.c.as_ref().expect("lstm state"))?;
                    state.h = h;
                    state.c = Some(cc);
                }
                readout(&state.h)
            }
            CellIds::Gru(c) => {
                let mut state = RecurrentState::zeros(self.arch, self.hidden);
                for obs in window {
                    let x = tanh_layer(obs)?;
                    state.h = gru_step(p, c, &x, &state.h)?;
                }
                readout(&state.h)
            }
            CellIds::Mut1(c) => {
                let mut state = RecurrentState::zeros(self.arch, self.hidden);
                for obs in window {
                    let x = tanh_layer(obs)?;
                    state.h = mut1_step(p, c, &x, &state.h)?;
                }
                readout(&state.h)
            }
        }
    }

    /// Records the batched window forward pass on `tape`, returning the
    /// `(batch x actions)` prediction node.
    pub fn record_predictions<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        batch: &[&TargetSample],
    ) -> Result<NodeId> {
        for s in batch {
            self.check_window(&s.window)?;
            if s.action >= self.actions {
                return Err(RecnetError::BadAction {
                    got: s.action,
                    actions: self.actions,
                });
            }
        }
        let b = batch.len();
        let step_input = |t: usize| -> Matrix {
            let mut m = Matrix::zeros(b, self.input_dim);
            for (r, s) in batch.iter().enumerate() {
                m.row_mut(r).copy_from_slice(&s.window[t]);
            }
            m
        };
        let q = match &self.ids.cell {
            CellIds::None => {
                let x = tape.input(step_input(self.window - 1));
                let a = tape.affine(self.ids.tanh_w, x, None, self.ids.tanh_b);
                let z = tape.tanh(a);
                tape.affine(self.ids.out_w, z, None, self.ids.out_b)
            }
            cell => {
                let mut h = tape.input(Matrix::zeros(b, self.hidden));
                let mut c_state = match cell {
                    CellIds::Lstm(_) => Some(tape.input(Matrix::zeros(b, self.hidden))),
                    _ => None,
                };
                for t in 0..self.window {
                    let x = tape.input(step_input(t));
                    let a = tape.affine(self.ids.tanh_w, x, None, self.ids.tanh_b);
                    let z = tape.tanh(a);
                    match cell {
                        CellIds::Lstm(ids) => {
                            let (nh, nc) = cells::lstm_step_taped(
                                tape,
                                ids,
                                z,
                                h,
                                c_state.expect("lstm state"),
                            );
                            h = nh;
                            c_state = Some(nc);
                        }
                        CellIds::Gru(ids) => h = cells::gru_step_taped(tape, ids, z, h),
                        CellIds::Mut1(ids) => h = cells::mut1_step_taped(tape, ids, z, h),
                        CellIds::None => unreachable!(),
                    }
                }
                tape.affine(self.ids.out_w, h, None, self.ids.out_b)
            }
        };
        Ok(q)
    }

    /// Records predictions plus the action-masked mean-squared-error loss
    /// node for `batch`.
    pub fn record_loss<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        batch: &[&TargetSample],
    ) -> Result<NodeId> {
        let q = self.record_predictions(tape, batch)?;
        let b = batch.len();
        let mut mask = Matrix::zeros(b, self.actions);
        let mut target = Matrix::zeros(b, self.actions);
        for (r, s) in batch.iter().enumerate() {
            mask.set(r, s.action, 1.0);
            target.set(r, s.action, s.target);
        }
        Ok(tape.mse_masked(q, target, mask))
    }

    /// Two-epoch, size-10-batch training (both configurable): per epoch,
    /// shuffle the samples, then for each batch take one optimizer step on
    /// the loss masked to each sample's taken action. Returns the mean
    /// masked loss per epoch. Empty input or zero epochs is a no-op.
    pub fn train_batch(
        &mut self,
        samples: &[TargetSample],
        epochs: usize,
        batch_size: usize,
        opt: &mut RmsProp,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>> {
        if samples.is_empty() || epochs == 0 {
            return Ok(Vec::new());
        }
        if batch_size == 0 {
            return Err(RecnetError::BadDims("batch_size must be positive"));
        }
        for s in samples {
            if !s.target.is_finite() {
                return Err(RecnetError::Numerics(NumericsError::NonFinite(
                    "training target",
                )));
            }
        }
        let mut losses = Vec::with_capacity(epochs);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for _ in 0..epochs {
            shuffle(&mut order, rng);
            let mut loss_sum = 0.0;
            for chunk in order.chunks(batch_size) {
                let batch: Vec<&TargetSample> = chunk.iter().map(|&i| &samples[i]).collect();
                let grads = {
                    let mut tape = Tape::new(&self.params);
                    let loss = self.record_loss(&mut tape, &batch)?;
                    loss_sum += tape.scalar(loss) * batch.len() as f64;
                    tape.backward(loss)?
                };
                opt.update(&mut self.params, &grads)?;
            }
            losses.push(loss_sum / samples.len() as f64);
        }
        Ok(losses)
    }

    /// Serializes the network (dimensions header plus every named tensor)
    /// as versioned JSON.
    pub fn save_checkpoint(&self, mut w: impl Write) -> Result<()> {
        let dump = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            arch: self.arch.tag().to_string(),
            input_dim: self.input_dim,
            hidden: self.hidden,
            actions: self.actions,
            window: self.window,
            tensors: self
                .params
                .iter()
                .map(|(_, name, t)| TensorDump {
                    name: name.to_string(),
                    rows: t.rows(),
                    cols: t.cols(),
                    data: t.as_slice().to_vec(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &dump)
            .map_err(|e| RecnetError::Checkpoint(e.to_string()))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// Loads a checkpoint written by [`ValueNetwork::save_checkpoint`].
    pub fn load_checkpoint(r: impl Read) -> Result<Self> {
        let dump: Checkpoint =
            serde_json::from_reader(r).map_err(|e| RecnetError::Checkpoint(e.to_string()))?;
        if dump.format != CHECKPOINT_FORMAT {
            return Err(RecnetError::Checkpoint(format!(
                "unknown format `{}`",
                dump.format
            )));
        }
        if dump.version != CHECKPOINT_VERSION {
            return Err(RecnetError::Checkpoint(format!(
                "unsupported version {}",
                dump.version
            )));
        }
        let arch = Arch::from_tag(&dump.arch)?;
        let mut net = init_network(arch, dump.input_dim, dump.hidden, dump.actions, dump.window, 0)?;
        if dump.tensors.len() != net.params.len() {
            return Err(RecnetError::Checkpoint(format!(
                "expected {} tensors, found {}",
                net.params.len(),
                dump.tensors.len()
            )));
        }
        for td in &dump.tensors {
            let Some((id, existing)) = net.params.by_name(&td.name) else {
                return Err(RecnetError::Checkpoint(format!(
                    "unexpected tensor `{}`",
                    td.name
                )));
            };
            if existing.shape() != (td.rows, td.cols) {
                return Err(RecnetError::Checkpoint(format!(
                    "tensor `{}` has shape {}x{}, expected {}x{}",
                    td.name,
                    td.rows,
                    td.cols,
                    existing.rows(),
                    existing.cols()
                )));
            }
            *net.params.get_mut(id) = Matrix::from_vec(td.rows, td.cols, td.data.clone())?;
        }
        Ok(net)
    }
}

const CHECKPOINT_FORMAT: &str = "recurq-net";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    arch: String,
    input_dim: usize,
    hidden: usize,
    actions: usize,
    window: usize,
    tensors: Vec<TensorDump>,
}

#[derive(Serialize, Deserialize)]
struct TensorDump {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Fisher-Yates, driven by the run's generator so epoch order is part of
/// the seeded determinism contract.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn window_of(dim: usize, len: usize, fill: f64) -> Vec<Vec<f64>> {
        vec![vec![fill; dim]; len]
    }

    fn random_window(dim: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..len)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn same_seed_gives_bit_identical_parameters() {
        for arch in Arch::ALL {
            let a = init_network(arch, 15, 8, 4, 10, 42).unwrap();
            let b = init_network(arch, 15, 8, 4, 10, 42).unwrap();
            for ((_, _, ta), (_, _, tb)) in a.params().iter().zip(b.params().iter()) {
                for (x, y) in ta.as_slice().iter().zip(tb.as_slice()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            let c = init_network(arch, 15, 8, 4, 10, 43).unwrap();
            let differs = a
                .params()
                .iter()
                .zip(c.params().iter())
                .any(|((_, _, ta), (_, _, tc))| ta != tc);
            assert!(differs, "different seeds should differ for {arch}");
        }
    }

    #[test]
    fn parameter_counts_match_closed_forms() {
        let (input, h, a) = (15, 100, 4);
        let tanh_count = h * input + h;
        let out_count = a * h + a;
        let expect = |cell: usize| tanh_count + cell + out_count;
        assert_eq!(
            init_network(Arch::Nnet, input, h, a, 10, 0).unwrap().parameter_count(),
            expect(0)
        );
        assert_eq!(
            init_network(Arch::Lstm, input, h, a, 10, 0).unwrap().parameter_count(),
            expect(4 * (2 * h * h + h))
        );
        assert_eq!(
            init_network(Arch::Gru, input, h, a, 10, 0).unwrap().parameter_count(),
            expect(3 * (2 * h * h + h))
        );
        assert_eq!(
            init_network(Arch::Mut1, input, h, a, 10, 0).unwrap().parameter_count(),
            expect(4 * h * h + 3 * h)
        );
    }

    #[test]
    fn gru_recurrent_layer_count_is_60300_at_hidden_100() {
        let net = init_network(Arch::Gru, 15, 100, 4, 10, 0).unwrap();
        let gru_entries: usize = net
            .params()
            .iter()
            .filter(|(_, name, _)| name.starts_with("gru."))
            .map(|(_, _, t)| t.len())
            .sum();
        assert_eq!(gru_entries, 60_300);

        let mut1 = init_network(Arch::Mut1, 15, 100, 4, 10, 0).unwrap();
        let mut1_entries: usize = mut1
            .params()
            .iter()
            .filter(|(_, name, _)| name.starts_with("mut1."))
            .map(|(_, _, t)| t.len())
            .sum();
        assert!(mut1_entries < gru_entries);
        assert_eq!(mut1_entries, 4 * 100 * 100 + 3 * 100);
    }

    #[test]
    fn zero_parameters_give_zero_outputs() {
        for arch in Arch::ALL {
            let mut net = init_network(arch, 6, 5, 4, 10, 1).unwrap();
            net.params_mut().zero();
            let q = net.forward(&window_of(6, 10, 0.7)).unwrap();
            assert_eq!(q, vec![0.0; 4], "{arch}");
        }
    }

    #[test]
    fn nnet_ignores_all_but_the_final_observation() {
        let net = init_network(Arch::Nnet, 6, 5, 4, 10, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w1 = random_window(6, 10, &mut rng);
        let w2 = random_window(6, 10, &mut rng);
        let q2_final_same = {
            let mut w = w2;
            w[9] = w1[9].clone();
            net.forward(&w).unwrap()
        };
        let q1 = net.forward(&w1).unwrap();
        for (a, b) in q1.iter().zip(&q2_final_same) {
            assert_eq!(a.to_bits(), b.to_bits(), "nnet must be window-invariant");
        }
        // And changing the final observation does change the output.
        w1[9][0] += 0.5;
        let q1b = net.forward(&w1).unwrap();
        assert_ne!(q1, q1b);
    }

    #[test]
    fn recurrent_nets_distinguish_early_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for arch in [Arch::Lstm, Arch::Gru, Arch::Mut1] {
            let net = init_network(arch, 6, 5, 4, 10, 21).unwrap();
            let w1 = random_window(6, 10, &mut rng);
            let mut w2 = random_window(6, 10, &mut rng);
            w2[9] = w1[9].clone();
            let q1 = net.forward(&w1).unwrap();
            let q2 = net.forward(&w2).unwrap();
            assert_ne!(q1, q2, "{arch} should see early history");
        }
    }

    #[test]
    fn forward_validates_window_shape() {
        let net = init_network(Arch::Gru, 6, 5, 4, 10, 2).unwrap();
        assert!(matches!(
            net.forward(&window_of(6, 9, 0.0)),
            Err(RecnetError::WindowLength { .. })
        ));
        assert!(matches!(
            net.forward(&window_of(5, 10, 0.0)),
            Err(RecnetError::ObsDim { .. })
        ));
    }

    #[test]
    fn taped_forward_matches_pure_forward_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for arch in Arch::ALL {
            let net = init_network(arch, 7, 6, 4, 10, 33).unwrap();
            let sample = TargetSample {
                window: random_window(7, 10, &mut rng),
                action: 2,
                target: 1.0,
            };
            let pure = net.forward(&sample.window).unwrap();
            let mut tape = Tape::new(net.params());
            let q = net.record_predictions(&mut tape, &[&sample]).unwrap();
            let taped = tape.value(q).row(0);
            for (a, b) in pure.iter().zip(taped) {
                assert_eq!(a.to_bits(), b.to_bits(), "{arch} paths disagree");
            }
        }
    }

    #[test]
    fn masked_loss_sends_no_gradient_to_other_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let net = init_network(Arch::Gru, 5, 4, 4, 10, 11).unwrap();
        let sample = TargetSample {
            window: random_window(5, 10, &mut rng),
            action: 1,
            target: 3.0,
        };
        let mut tape = Tape::new(net.params());
        let loss = net.record_loss(&mut tape, &[&sample]).unwrap();
        let grads = tape.backward(loss).unwrap();
        let (out_w, _) = net.params().by_name("out.w").unwrap();
        let (out_b, _) = net.params().by_name("out.b").unwrap();
        let gw = grads.get(out_w);
        let gb = grads.get(out_b);
        for a in 0..4 {
            let row_zero = gw.row(a).iter().all(|&v| v == 0.0) && gb.get(0, a) == 0.0;
            if a == 1 {
                assert!(!row_zero, "taken action must receive gradient");
            } else {
                assert!(row_zero, "non-taken action {a} must get exactly zero");
            }
        }
    }

    #[test]
    fn train_batch_no_ops_on_empty_or_zero_epochs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut net = init_network(Arch::Gru, 5, 4, 4, 10, 3).unwrap();
        let before = net.params().clone();
        let mut opt = RmsProp::default_config();
        let losses = net
            .train_batch(&[], 2, 10, &mut opt, &mut rng)
            .unwrap();
        assert!(losses.is_empty());
        let sample = TargetSample {
            window: random_window(5, 10, &mut rng),
            action: 0,
            target: 0.5,
        };
        let losses = net
            .train_batch(&[sample], 0, 10, &mut opt, &mut rng)
            .unwrap();
        assert!(losses.is_empty());
        assert_eq!(&before, net.params(), "network must be unchanged");
    }

    #[test]
    fn targets_equal_to_predictions_give_zero_loss_and_zero_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut net = init_network(Arch::Lstm, 5, 4, 4, 10, 13).unwrap();
        let mut samples = Vec::new();
        for _ in 0..7 {
            let window = random_window(5, 10, &mut rng);
            let q = net.forward(&window).unwrap();
            let action = 3;
            samples.push(TargetSample {
                window,
                action,
                target: q[action],
            });
        }
        let before = net.params().clone();
        let mut opt = RmsProp::default_config();
        let losses = net.train_batch(&samples, 2, 10, &mut opt, &mut rng).unwrap();
        for l in &losses {
            assert_eq!(*l, 0.0, "loss must be exactly zero");
        }
        assert_eq!(&before, net.params(), "zero gradient, zero step");
    }

    #[test]
    fn repeated_training_on_one_sample_converges_to_its_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut net = init_network(Arch::Gru, 5, 8, 4, 10, 19).unwrap();
        let window = random_window(5, 10, &mut rng);
        let action = 2;
        let target = net.forward(&window).unwrap()[action] + 0.1;
        let sample = TargetSample {
            window: window.clone(),
            action,
            target,
        };
        let mut opt = RmsProp::default_config();
        net.train_batch(std::slice::from_ref(&sample), 200, 10, &mut opt, &mut rng)
            .unwrap();
        let q = net.forward(&window).unwrap();
        assert!(
            (q[action] - target).abs() < 0.01,
            "prediction {} should be within 0.01 of target {target}",
            q[action]
        );
    }

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for arch in Arch::ALL {
            let net = init_network(arch, 15, 6, 4, 10, 101).unwrap();
            let mut buf = Vec::new();
            net.save_checkpoint(&mut buf).unwrap();
            let loaded = ValueNetwork::load_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(net.params(), loaded.params());
            assert_eq!(net.arch(), loaded.arch());
            let w = random_window(15, 10, &mut rng);
            let a = net.forward(&w).unwrap();
            let b = loaded.forward(&w).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn checkpoint_rejects_mangled_input() {
        let net = init_network(Arch::Gru, 5, 4, 4, 10, 7).unwrap();
        let mut buf = Vec::new();
        net.save_checkpoint(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let wrong_version = text.replace("\"version\":1", "\"version\":9");
        assert!(ValueNetwork::load_checkpoint(wrong_version.as_bytes()).is_err());
        let wrong_format = text.replace("recurq-net", "something-else");
        assert!(ValueNetwork::load_checkpoint(wrong_format.as_bytes()).is_err());
        assert!(ValueNetwork::load_checkpoint(&b"not json"[..]).is_err());
    }
}
