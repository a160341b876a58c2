//! Dense and recurrent layer primitives with hand-written backward passes.
//!
//! Everything is double precision and sequential so that training is
//! bit-reproducible. Sequences are handled time-major: a sequence batch is a
//! slice of `(batch, width)` matrices, one per timestep.
//!
//! The LSTM uses the standard formulation with gate order input, forget,
//! cell candidate, output (`i, f, g, o`), packed side by side in the weight
//! matrices: `w_input` is `(input_dim, 4*hidden)`, `w_hidden` is
//! `(hidden, 4*hidden)`, `bias` is `(1, 4*hidden)`. Initial hidden and cell
//! states are zero.

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Uniform Glorot initialization: bounds derived from the receptive fan of
/// the full matrix.
fn glorot(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Fully connected layer `y = x W + b` applied row-wise.
#[derive(Debug, Clone)]
pub struct Linear {
    /// `(input_dim, output_dim)`
    pub weight: Array2<f64>,
    /// `(1, output_dim)`, broadcast over the batch.
    pub bias: Array2<f64>,
}

/// Gradients of a [`Linear`] layer, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
}

impl Linear {
    pub fn init(rng: &mut ChaCha20Rng, input_dim: usize, output_dim: usize) -> Linear {
        Linear { weight: glorot(rng, input_dim, output_dim), bias: Array2::zeros((1, output_dim)) }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Backward for a single application; returns parameter gradients and the
    /// gradient w.r.t. the input.
    pub fn backward(&self, x: &Array2<f64>, d_out: &Array2<f64>) -> (LinearGrads, Array2<f64>) {
        let grads = LinearGrads {
            weight: x.t().dot(d_out),
            bias: d_out.sum_axis(Axis(0)).insert_axis(Axis(0)),
        };
        (grads, d_out.dot(&self.weight.t()))
    }

    /// Applies the layer independently to every timestep.
    pub fn forward_seq(&self, xs: &[Array2<f64>]) -> Vec<Array2<f64>> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    /// Backward over a sequence: parameter gradients accumulate across
    /// timesteps in forward time order.
    pub fn backward_seq(
        &self,
        xs: &[Array2<f64>],
        d_outs: &[Array2<f64>],
    ) -> (LinearGrads, Vec<Array2<f64>>) {
        debug_assert_eq!(xs.len(), d_outs.len());
        let mut grads = LinearGrads {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array2::zeros(self.bias.raw_dim()),
        };
        let mut d_xs = Vec::with_capacity(xs.len());
        for (x, d_out) in xs.iter().zip(d_outs) {
            let (step, d_x) = self.backward(x, d_out);
            grads.weight += &step.weight;
            grads.bias += &step.bias;
            d_xs.push(d_x);
        }
        (grads, d_xs)
    }
}

/// Single recurrent layer processing a time-major sequence batch.
#[derive(Debug, Clone)]
pub struct Lstm {
    /// `(input_dim, 4*hidden)`
    pub w_input: Array2<f64>,
    /// `(hidden, 4*hidden)`
    pub w_hidden: Array2<f64>,
    /// `(1, 4*hidden)`
    pub bias: Array2<f64>,
}

/// Gradients of an [`Lstm`], same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_input: Array2<f64>,
    pub w_hidden: Array2<f64>,
    pub bias: Array2<f64>,
}

/// Per-timestep activations recorded during the forward pass, consumed by
/// [`Lstm::backward`].
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub gate_i: Vec<Array2<f64>>,
    pub gate_f: Vec<Array2<f64>>,
    pub gate_g: Vec<Array2<f64>>,
    pub gate_o: Vec<Array2<f64>>,
    pub cell: Vec<Array2<f64>>,
    pub cell_tanh: Vec<Array2<f64>>,
    pub hidden: Vec<Array2<f64>>,
}

impl LstmTrace {
    pub fn steps(&self) -> usize {
        self.hidden.len()
    }
}

impl Lstm {
    /// Glorot-uniform weights; biases zero except the forget gate, which
    /// starts at 1.0 so early training does not erase the cell state.
    pub fn init(rng: &mut ChaCha20Rng, input_dim: usize, hidden_dim: usize) -> Lstm {
        let mut bias = Array2::zeros((1, 4 * hidden_dim));
        bias.slice_mut(s![.., hidden_dim..2 * hidden_dim]).fill(1.0);
        Lstm {
            w_input: glorot(rng, input_dim, 4 * hidden_dim),
            w_hidden: glorot(rng, hidden_dim, 4 * hidden_dim),
            bias,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.nrows()
    }

    /// Runs the recurrence over every timestep, recording all activations.
    pub fn forward(&self, inputs: &[Array2<f64>]) -> LstmTrace {
        let hidden_dim = self.hidden_dim();
        let batch = inputs.first().map_or(0, |x| x.nrows());
        let mut h = Array2::zeros((batch, hidden_dim));
        let mut c: Array2<f64> = Array2::zeros((batch, hidden_dim));
        let mut trace = LstmTrace {
            gate_i: Vec::with_capacity(inputs.len()),
            gate_f: Vec::with_capacity(inputs.len()),
            gate_g: Vec::with_capacity(inputs.len()),
            gate_o: Vec::with_capacity(inputs.len()),
            cell: Vec::with_capacity(inputs.len()),
            cell_tanh: Vec::with_capacity(inputs.len()),
            hidden: Vec::with_capacity(inputs.len()),
        };
        for x in inputs {
            let mut z = x.dot(&self.w_input) + h.dot(&self.w_hidden);
            z += &self.bias;
            let gate_i = z.slice(s![.., 0..hidden_dim]).mapv(sigmoid);
            let gate_f = z.slice(s![.., hidden_dim..2 * hidden_dim]).mapv(sigmoid);
            let gate_g = z.slice(s![.., 2 * hidden_dim..3 * hidden_dim]).mapv(f64::tanh);
            let gate_o = z.slice(s![.., 3 * hidden_dim..4 * hidden_dim]).mapv(sigmoid);
            c = &gate_f * &c + &gate_i * &gate_g;
            let cell_tanh = c.mapv(f64::tanh);
            h = &gate_o * &cell_tanh;
            trace.gate_i.push(gate_i);
            trace.gate_f.push(gate_f);
            trace.gate_g.push(gate_g);
            trace.gate_o.push(gate_o);
            trace.cell.push(c.clone());
            trace.cell_tanh.push(cell_tanh);
            trace.hidden.push(h.clone());
        }
        trace
    }

    /// Backpropagation through time. `d_hidden` carries the upstream
    /// gradient on each timestep's hidden output (zero matrices where a step
    /// is unused). Returns parameter gradients and per-timestep input
    /// gradients.
    pub fn backward(
        &self,
        inputs: &[Array2<f64>],
        trace: &LstmTrace,
        d_hidden: &[Array2<f64>],
    ) -> (LstmGrads, Vec<Array2<f64>>) {
        debug_assert_eq!(inputs.len(), trace.steps());
        debug_assert_eq!(d_hidden.len(), trace.steps());
        let hidden_dim = self.hidden_dim();
        let batch = inputs.first().map_or(0, |x| x.nrows());
        let mut grads = LstmGrads {
            w_input: Array2::zeros(self.w_input.raw_dim()),
            w_hidden: Array2::zeros(self.w_hidden.raw_dim()),
            bias: Array2::zeros(self.bias.raw_dim()),
        };
        let mut d_inputs = vec![Array2::zeros((batch, self.input_dim())); inputs.len()];
        let mut dh_next: Array2<f64> = Array2::zeros((batch, hidden_dim));
        let mut dc_next: Array2<f64> = Array2::zeros((batch, hidden_dim));
        let zeros = Array2::zeros((batch, hidden_dim));
        for t in (0..inputs.len()).rev() {
            let gate_i = &trace.gate_i[t];
            let gate_f = &trace.gate_f[t];
            let gate_g = &trace.gate_g[t];
            let gate_o = &trace.gate_o[t];
            let cell_tanh = &trace.cell_tanh[t];
            let cell_prev = if t == 0 { &zeros } else { &trace.cell[t - 1] };
            let hidden_prev = if t == 0 { &zeros } else { &trace.hidden[t - 1] };

            let dh = &d_hidden[t] + &dh_next;
            let d_cell = &dh * gate_o * &cell_tanh.mapv(|v| 1.0 - v * v) + &dc_next;
            // Pre-activation gate gradients, in packed column order.
            let dz_i = &d_cell * gate_g * gate_i * &gate_i.mapv(|v| 1.0 - v);
            let dz_f = &d_cell * cell_prev * gate_f * &gate_f.mapv(|v| 1.0 - v);
            let dz_g = &d_cell * gate_i * &gate_g.mapv(|v| 1.0 - v * v);
            let dz_o = &dh * cell_tanh * gate_o * &gate_o.mapv(|v| 1.0 - v);
            dc_next = &d_cell * gate_f;

            let mut dz = Array2::zeros((batch, 4 * hidden_dim));
            dz.slice_mut(s![.., 0..hidden_dim]).assign(&dz_i);
            dz.slice_mut(s![.., hidden_dim..2 * hidden_dim]).assign(&dz_f);
            dz.slice_mut(s![.., 2 * hidden_dim..3 * hidden_dim]).assign(&dz_g);
            dz.slice_mut(s![.., 3 * hidden_dim..4 * hidden_dim]).assign(&dz_o);

            grads.w_input += &inputs[t].t().dot(&dz);
            grads.w_hidden += &hidden_prev.t().dot(&dz);
            grads.bias += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
            d_inputs[t] = dz.dot(&self.w_input.t());
            dh_next = dz.dot(&self.w_hidden.t());
        }
        (grads, d_inputs)
    }
}
