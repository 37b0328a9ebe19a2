use rand::Rng;

use super::{ParamId, ParamStore, Tape, Var};
use crate::{Error, Result};

/// `y = x · weightᵀ + bias`, batched over the rows of `x`.
pub fn linear_forward(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    weight: ParamId,
    bias: Option<ParamId>,
) -> Result<Var> {
    let w = tape.param(store, weight);
    let y = tape.matmul_t(x, w)?;
    match bias {
        Some(b) => {
            let b = tape.param(store, b);
            tape.add_row(y, b)
        }
        None => Ok(y),
    }
}

/// Fully connected layer.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        with_bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_weight(format!("{name}.weight"), out_dim, in_dim, rng)?;
        let bias = if with_bias {
            Some(store.add_bias(format!("{name}.bias"), out_dim)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let cols = tape.value(x).cols();
        if cols != self.in_dim {
            return Err(Error::config(format!(
                "linear layer expects input width {}, got {cols}",
                self.in_dim
            )));
        }
        linear_forward(tape, store, x, self.weight, self.bias)
    }
}

/// Stack of linear layers, each followed by ReLU.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config("an MLP needs at least input and output sizes"));
        }
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], true, rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, mut x: Var) -> Result<Var> {
        for layer in &self.layers {
            let y = layer.forward(tape, store, x)?;
            x = tape.relu(y);
        }
        Ok(x)
    }
}

/// Gated recurrent unit with sigmoid reset/update gates and a tanh candidate:
///
/// ```text
/// r  = σ(W_ir x + b_ir + W_hr h + b_hr)
/// z  = σ(W_iz x + b_iz + W_hz h + b_hz)
/// n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
///
/// The three gate matrices are stored stacked (`[r; z; n]`).
#[derive(Clone, Debug)]
pub struct GruCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Output of one GRU step; gate activations are kept for introspection.
#[derive(Clone, Copy, Debug)]
pub struct GruStep {
    pub hidden: Var,
    pub reset: Var,
    pub update: Var,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            w_ih: store.add_weight(format!("{name}.w_ih"), 3 * hidden_dim, input_dim, rng)?,
            w_hh: store.add_weight(format!("{name}.w_hh"), 3 * hidden_dim, hidden_dim, rng)?,
            b_ih: store.add_bias(format!("{name}.b_ih"), 3 * hidden_dim)?,
            b_hh: store.add_bias(format!("{name}.b_hh"), 3 * hidden_dim)?,
            input_dim,
            hidden_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var) -> Result<GruStep> {
        let (xv, hv) = (tape.value(x).shape(), tape.value(h).shape());
        if xv.1 != self.input_dim || hv.1 != self.hidden_dim || xv.0 != hv.0 {
            return Err(Error::config(format!(
                "GRU expects inputs (n, {}) and (n, {}), got {xv:?} and {hv:?}",
                self.input_dim, self.hidden_dim
            )));
        }
        let hd = self.hidden_dim;
        let gi = linear_forward(tape, store, x, self.w_ih, Some(self.b_ih))?;
        let gh = linear_forward(tape, store, h, self.w_hh, Some(self.b_hh))?;

        let gi_r = tape.slice_cols(gi, 0, hd)?;
        let gh_r = tape.slice_cols(gh, 0, hd)?;
        let pre_r = tape.add(gi_r, gh_r)?;
        let reset = tape.sigmoid(pre_r);

        let gi_z = tape.slice_cols(gi, hd, hd)?;
        let gh_z = tape.slice_cols(gh, hd, hd)?;
        let pre_z = tape.add(gi_z, gh_z)?;
        let update = tape.sigmoid(pre_z);

        let gi_n = tape.slice_cols(gi, 2 * hd, hd)?;
        let gh_n = tape.slice_cols(gh, 2 * hd, hd)?;
        let gated = tape.mul(reset, gh_n)?;
        let pre_n = tape.add(gi_n, gated)?;
        let cand = tape.tanh(pre_n);

        // h' = n + z ⊙ (h - n)
        let diff = tape.sub(h, cand)?;
        let keep = tape.mul(update, diff)?;
        let hidden = tape.add(cand, keep)?;
        Ok(GruStep {
            hidden,
            reset,
            update,
        })
    }
}
