//! Network building blocks. Each layer only stores [`ParamId`]s; values live
//! in a [`ParamStore`] and computation happens on a [`Graph`].

use rand::Rng;

use crate::error::{Result, TensorError};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Affine map `x W + b` on row vectors.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_xavier(format!("{name}.weight"), in_dim, out_dim, rng)?;
        let bias = if bias {
            Some(store.add_zeros(format!("{name}.bias"), &[1, out_dim])?)
        } else {
            None
        };
        Ok(Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let w = g.param(self.weight);
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add(y, b)
            }
            None => Ok(y),
        }
    }
}

/// Token embedding table, uniformly initialised in `[-0.1, 0.1]`.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        vocab: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let table = store.add_uniform(format!("{name}.table"), &[vocab, dim], 0.1, rng)?;
        Ok(Embedding { table, vocab, dim })
    }

    /// `[ids.len() x dim]`
    pub fn forward(&self, g: &mut Graph, ids: &[usize]) -> Result<Var> {
        let t = g.param(self.table);
        g.rows(t, ids)
    }
}

/// Standard LSTM cell (no peepholes). Gate order in the fused weight is
/// input, forget, candidate, output.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w_input = store.add_xavier(format!("{name}.w_input"), input_dim, 4 * hidden, rng)?;
        let w_hidden = store.add_xavier(format!("{name}.w_hidden"), hidden, 4 * hidden, rng)?;
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        let bias = store.add(format!("{name}.bias"), Tensor::row(b))?;
        Ok(LstmCell {
            w_input,
            w_hidden,
            bias,
            input_dim,
            hidden,
        })
    }

    pub fn zero_state(&self, g: &mut Graph) -> LstmState {
        LstmState {
            h: g.input(Tensor::zeros(&[1, self.hidden])),
            c: g.input(Tensor::zeros(&[1, self.hidden])),
        }
    }

    pub fn step(&self, g: &mut Graph, x: Var, state: LstmState) -> Result<LstmState> {
        let hd = self.hidden;
        let wi = g.param(self.w_input);
        let wh = g.param(self.w_hidden);
        let b = g.param(self.bias);
        let xi = g.matmul(x, wi)?;
        let hh = g.matmul(state.h, wh)?;
        let pre = g.add(xi, hh)?;
        let pre = g.add(pre, b)?;
        let i = g.slice_cols(pre, 0, hd)?;
        let f = g.slice_cols(pre, hd, hd)?;
        let cand = g.slice_cols(pre, 2 * hd, hd)?;
        let o = g.slice_cols(pre, 3 * hd, hd)?;
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let cand = g.tanh(cand);
        let o = g.sigmoid(o);
        let keep = g.mul(f, state.c)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok(LstmState { h, c })
    }

    /// Runs over the rows of `xs` and returns the stacked hidden states
    /// `[T x hidden]` together with the final state.
    pub fn run(
        &self,
        g: &mut Graph,
        xs: Var,
        init: Option<LstmState>,
        reverse: bool,
    ) -> Result<(Var, LstmState)> {
        let len = g.value(xs).rows();
        if len == 0 {
            return Err(TensorError::InvalidArgument("LSTM over empty sequence".into()));
        }
        let mut state = match init {
            Some(s) => s,
            None => self.zero_state(g),
        };
        let mut outs = vec![state.h; len];
        let order: Vec<usize> = if reverse {
            (0..len).rev().collect()
        } else {
            (0..len).collect()
        };
        for t in order {
            let x = g.row(xs, t)?;
            state = self.step(g, x, state)?;
            outs[t] = state.h;
        }
        Ok((g.concat_rows(&outs)?, state))
    }
}

/// Forward and backward LSTMs with concatenated outputs.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

pub struct BiLstmOutput {
    /// `[T x 2*hidden]`
    pub states: Var,
    /// Final forward state (after the last row).
    pub last_forward: LstmState,
    /// Final backward state (after the first row).
    pub last_backward: LstmState,
}

impl BiLstm {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiLstm {
            forward: LstmCell::new(store, &format!("{name}.fwd"), input_dim, hidden, rng)?,
            backward: LstmCell::new(store, &format!("{name}.bwd"), input_dim, hidden, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden
    }

    pub fn run(&self, g: &mut Graph, xs: Var) -> Result<BiLstmOutput> {
        let (fwd, last_forward) = self.forward.run(g, xs, None, false)?;
        let (bwd, last_backward) = self.backward.run(g, xs, None, true)?;
        Ok(BiLstmOutput {
            states: g.concat_cols(&[fwd, bwd])?,
            last_forward,
            last_backward,
        })
    }
}

/// Temporal convolution with max-over-time pooling: for each window width
/// a bank of filters is slid over the token sequence, passed through tanh
/// and max-pooled; the pooled vectors of all widths are concatenated.
#[derive(Debug, Clone)]
pub struct ConvEncoder {
    pub banks: Vec<ConvBank>,
    pub input_dim: usize,
}

#[derive(Debug, Clone)]
pub struct ConvBank {
    pub width: usize,
    pub filters: ParamId,
    pub bias: ParamId,
    pub count: usize,
}

impl ConvEncoder {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        widths: &[usize],
        filters_per_width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.is_empty() || widths.contains(&0) {
            return Err(TensorError::InvalidArgument(format!(
                "convolution widths must be non-empty and positive, got {widths:?}"
            )));
        }
        let mut banks = Vec::with_capacity(widths.len());
        for &w in widths {
            banks.push(ConvBank {
                width: w,
                filters: store.add_xavier(
                    format!("{name}.w{w}.filters"),
                    w * input_dim,
                    filters_per_width,
                    rng,
                )?,
                bias: store.add_zeros(format!("{name}.w{w}.bias"), &[1, filters_per_width])?,
                count: filters_per_width,
            });
        }
        Ok(ConvEncoder { banks, input_dim })
    }

    pub fn output_dim(&self) -> usize {
        self.banks.iter().map(|b| b.count).sum()
    }

    /// `tokens` is `[T x d]`; returns `[1 x output_dim]`.
    pub fn forward(&self, g: &mut Graph, tokens: Var) -> Result<Var> {
        if g.value(tokens).rows() == 0 {
            return Err(TensorError::InvalidArgument(
                "convolution over an empty token sequence".into(),
            ));
        }
        let mut pooled = Vec::with_capacity(self.banks.len());
        for bank in &self.banks {
            let windows = g.unfold(tokens, bank.width)?;
            let f = g.param(bank.filters);
            let b = g.param(bank.bias);
            let z = g.matmul(windows, f)?;
            let z = g.add(z, b)?;
            let a = g.tanh(z);
            pooled.push(g.max_rows(a)?);
        }
        g.concat_cols(&pooled)
    }
}

/// Additive attention scores `v · tanh(W_q q + W_k k_j)` over the rows of
/// `keys`, returned as a `[1 x n]` row of logits.
#[derive(Debug, Clone)]
pub struct AdditiveAttention {
    pub query: Linear,
    pub key: Linear,
    pub v: ParamId,
}

impl AdditiveAttention {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        query_dim: usize,
        key_dim: usize,
        attn_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(AdditiveAttention {
            query: Linear::new(store, &format!("{name}.query"), query_dim, attn_dim, true, rng)?,
            key: Linear::new(store, &format!("{name}.key"), key_dim, attn_dim, false, rng)?,
            v: store.add_xavier(format!("{name}.v"), attn_dim, 1, rng)?,
        })
    }

    /// Projects keys once; reuse the result across decoder steps.
    pub fn project_keys(&self, g: &mut Graph, keys: Var) -> Result<Var> {
        self.key.forward(g, keys)
    }

    pub fn logits(&self, g: &mut Graph, query: Var, projected_keys: Var) -> Result<Var> {
        let q = self.query.forward(g, query)?;
        let z = g.add(projected_keys, q)?;
        let z = g.tanh(z);
        let v = g.param(self.v);
        let s = g.matmul(z, v)?;
        Ok(g.transpose(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_lstm_gives_zero_hidden() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = LstmCell::new(&mut store, "l", 3, 4, &mut rng).unwrap();
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::row(vec![0.3, -0.7, 1.1]));
        let s0 = cell.zero_state(&mut g);
        let s1 = cell.step(&mut g, x, s0).unwrap();
        assert!(g.value(s1.h).data().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn lstm_is_deterministic() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = LstmCell::new(&mut store, "l", 3, 3, &mut rng).unwrap();
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::row(vec![0.1, 0.2, 0.3]));
        let s0 = cell.zero_state(&mut g);
        let a = cell.step(&mut g, x, s0).unwrap();
        let b = cell.step(&mut g, x, s0).unwrap();
        assert_eq!(g.value(a.h), g.value(b.h));
        assert_eq!(g.value(a.c), g.value(b.c));
    }

    #[test]
    fn conv_single_token_unit_filter() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conv = ConvEncoder::new(&mut store, "c", 3, &[1], 1, &mut rng).unwrap();
        let bank = &conv.banks[0];
        store.get_mut(bank.filters).value = Tensor::matrix(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::row(vec![0.5, -0.8, 2.0]));
        let y = conv.forward(&mut g, x).unwrap();
        assert_eq!(g.value(y).data(), &[(-0.8f64).tanh()]);
    }

    #[test]
    fn conv_constant_input_equals_single_window() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = ConvEncoder::new(&mut store, "c", 2, &[1, 2], 3, &mut rng).unwrap();
        let mut g = Graph::new(&store);
        let long = g.input(Tensor::matrix(5, 2, [0.4, -0.3].repeat(5)).unwrap());
        let short = g.input(Tensor::matrix(2, 2, [0.4, -0.3].repeat(2)).unwrap());
        let a = conv.forward(&mut g, long).unwrap();
        let b = conv.forward(&mut g, short).unwrap();
        assert_eq!(g.value(a), g.value(b));
    }

    #[test]
    fn conv_rejects_empty_sequence() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let conv = ConvEncoder::new(&mut store, "c", 2, &[1], 1, &mut rng).unwrap();
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::zeros(&[0, 2]));
        assert!(conv.forward(&mut g, x).is_err());
    }
}
