//! Recurrent cells, bidirectional runners, additive attention, pooling and
//! the three-way classifier head.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{glorot_bound, Graph, ParamId, ParamStore, Tensor, Var};

/// Standalone row lookup; an empty id list yields a `0 × d` matrix.
pub fn embed(token_ids: &[usize], embedding_matrix: &Tensor) -> Result<Tensor> {
    if embedding_matrix.rank() != 2 {
        return Err(Error::shape(
            "embed",
            format!("table {:?}", embedding_matrix.shape()),
        ));
    }
    let rows: Result<Vec<&[f64]>> = token_ids
        .iter()
        .map(|&id| {
            if id < embedding_matrix.rows() {
                Ok(embedding_matrix.row(id))
            } else {
                Err(Error::OutOfRange {
                    what: "embedding lookup",
                    index: id,
                    size: embedding_matrix.rows(),
                })
            }
        })
        .collect();
    Tensor::from_rows(&rows?, embedding_matrix.cols())
}

/// Gated recurrent unit with the reset gate applied to the previous state
/// before the candidate's recurrent product:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
/// h' = (1 − z) ⊙ h + z ⊙ n
/// ```
#[derive(Clone, Debug)]
pub struct GruCellParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `[W_z; W_r; W_n]`, `3H × D`
    pub w: ParamId,
    /// `[U_z; U_r]`, `2H × H`
    pub u_zr: ParamId,
    pub u_n: ParamId,
    /// `[b_z; b_r; b_n]`
    pub b: ParamId,
}

impl GruCellParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let h = hidden_dim;
        Ok(GruCellParams {
            input_dim,
            hidden_dim,
            w: store.add_uniform(
                format!("{prefix}.w"),
                3 * h,
                input_dim,
                glorot_bound(h, input_dim),
                rng,
            )?,
            u_zr: store.add_uniform(format!("{prefix}.u_zr"), 2 * h, h, glorot_bound(h, h), rng)?,
            u_n: store.add_uniform(format!("{prefix}.u_n"), h, h, glorot_bound(h, h), rng)?,
            b: store.add_zeros(format!("{prefix}.b"), &[3 * h])?,
        })
    }

    pub fn step(&self, g: &mut Graph<'_>, x: Var, h_prev: Var) -> Result<Var> {
        let h = self.hidden_dim;
        let (w, u_zr, u_n, b) = (g.param(self.w), g.param(self.u_zr), g.param(self.u_n), g.param(self.b));
        let xw = g.affine(w, x, b)?;
        let hu = g.matvec(u_zr, h_prev)?;
        let xz = g.slice(xw, 0, h)?;
        let xr = g.slice(xw, h, h)?;
        let xn = g.slice(xw, 2 * h, h)?;
        let hz = g.slice(hu, 0, h)?;
        let hr = g.slice(hu, h, h)?;
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z);
        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r);
        let rh = g.mul(r, h_prev)?;
        let un = g.matvec(u_n, rh)?;
        let n = g.add(xn, un)?;
        let n = g.tanh(n);
        let keep = g.one_minus(z);
        let a = g.mul(keep, h_prev)?;
        let c = g.mul(z, n)?;
        g.add(a, c)
    }
}

/// LSTM cell; gate blocks are stacked in the order input, forget, cell, output.
#[derive(Clone, Debug)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

impl LstmCellParams {
    /// Forget-gate bias starts at 1.0; all other biases at zero.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let h = hidden_dim;
        let mut bias = vec![0.0; 4 * h];
        bias[h..2 * h].fill(1.0);
        Ok(LstmCellParams {
            input_dim,
            hidden_dim,
            w: store.add_uniform(
                format!("{prefix}.w"),
                4 * h,
                input_dim,
                glorot_bound(h, input_dim),
                rng,
            )?,
            u: store.add_uniform(format!("{prefix}.u"), 4 * h, h, glorot_bound(h, h), rng)?,
            b: store.add(format!("{prefix}.b"), Tensor::vector(bias))?,
        })
    }

    /// One step; returns `(h, c)`.
    pub fn step(&self, g: &mut Graph<'_>, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        let h = self.hidden_dim;
        let (w, u, b) = (g.param(self.w), g.param(self.u), g.param(self.b));
        let xw = g.affine(w, x, b)?;
        let hu = g.matvec(u, h_prev)?;
        let pre = g.add(xw, hu)?;
        let i = g.slice(pre, 0, h)?;
        let f = g.slice(pre, h, h)?;
        let cand = g.slice(pre, 2 * h, h)?;
        let o = g.slice(pre, 3 * h, h)?;
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let cand = g.tanh(cand);
        let o = g.sigmoid(o);
        let fc = g.mul(f, c_prev)?;
        let ig = g.mul(i, cand)?;
        let c = g.add(fc, ig)?;
        let tc = g.tanh(c);
        let h_new = g.mul(o, tc)?;
        Ok((h_new, c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

pub struct LstmOutput {
    /// Hidden state per input position, in input order.
    pub states: Vec<Var>,
    /// State after the last consumed input; zeros for an empty sequence.
    pub last: Var,
}

pub fn run_lstm(
    g: &mut Graph<'_>,
    inputs: &[Var],
    cell: &LstmCellParams,
    direction: Direction,
) -> Result<LstmOutput> {
    for &x in inputs {
        if g.value(x).len() != cell.input_dim || g.value(x).rank() != 1 {
            return Err(Error::shape(
                "run_lstm",
                format!("input {:?}, cell expects [{}]", g.value(x).shape(), cell.input_dim),
            ));
        }
    }
    let zero = g.input(Tensor::zeros(&[cell.hidden_dim]));
    let (mut h, mut c) = (zero, zero);
    let mut states = vec![zero; inputs.len()];
    let order: Vec<usize> = match direction {
        Direction::Forward => (0..inputs.len()).collect(),
        Direction::Backward => (0..inputs.len()).rev().collect(),
    };
    for i in order {
        let (nh, nc) = cell.step(g, inputs[i], h, c)?;
        h = nh;
        c = nc;
        states[i] = h;
    }
    Ok(LstmOutput { states, last: h })
}

fn run_gru(g: &mut Graph<'_>, rows: &[Var], cell: &GruCellParams, direction: Direction) -> Result<Vec<Var>> {
    let zero = g.input(Tensor::zeros(&[cell.hidden_dim]));
    let mut h = zero;
    let mut states = vec![zero; rows.len()];
    let order: Vec<usize> = match direction {
        Direction::Forward => (0..rows.len()).collect(),
        Direction::Backward => (0..rows.len()).rev().collect(),
    };
    for i in order {
        h = cell.step(g, rows[i], h)?;
        states[i] = h;
    }
    Ok(states)
}

/// Bidirectional GRU over an `n × d` matrix; row `i` of the `n × 2H` result is
/// the forward state after `inputs[..=i]` followed by the backward state after
/// `inputs[i..]` (consumed right to left).
pub fn run_bigru(g: &mut Graph<'_>, inputs: Var, fwd: &GruCellParams, bwd: &GruCellParams) -> Result<Var> {
    let t = g.value(inputs);
    if t.rank() != 2 || t.rows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "bigru needs a non-empty sequence, got {:?}",
            t.shape()
        )));
    }
    if t.cols() != fwd.input_dim || t.cols() != bwd.input_dim {
        return Err(Error::shape(
            "run_bigru",
            format!(
                "input width {} vs cells {}/{}",
                t.cols(),
                fwd.input_dim,
                bwd.input_dim
            ),
        ));
    }
    let rows = g.rows(inputs)?;
    let f = run_gru(g, &rows, fwd, Direction::Forward)?;
    let b = run_gru(g, &rows, bwd, Direction::Backward)?;
    let joined = f
        .into_iter()
        .zip(b)
        .map(|(a, c)| g.concat(&[a, c]))
        .collect::<Result<Vec<_>>>()?;
    g.stack_rows(&joined)
}

/// `score_i = vᵀ tanh(W [key_i; query] + b)`
#[derive(Clone, Debug)]
pub struct AttentionParams {
    pub key_dim: usize,
    pub query_dim: usize,
    pub attn_dim: usize,
    pub w: ParamId,
    pub b: ParamId,
    pub v: ParamId,
}

impl AttentionParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        key_dim: usize,
        query_dim: usize,
        attn_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(AttentionParams {
            key_dim,
            query_dim,
            attn_dim,
            w: store.add_glorot(format!("{prefix}.w"), attn_dim, key_dim + query_dim, rng)?,
            b: store.add_zeros(format!("{prefix}.b"), &[attn_dim])?,
            v: {
                let bound = glorot_bound(1, attn_dim);
                let data = (0..attn_dim).map(|_| rng.random_range(-bound..=bound)).collect();
                store.add(format!("{prefix}.v"), Tensor::vector(data))?
            },
        })
    }
}

pub struct Attended {
    pub alpha: Var,
    pub pooled: Var,
}

pub fn additive_attention(
    g: &mut Graph<'_>,
    keys: &[Var],
    query: Var,
    params: &AttentionParams,
) -> Result<Attended> {
    if keys.is_empty() {
        return Err(Error::InvalidArgument("attention over an empty sequence".into()));
    }
    let (w, b, v) = (g.param(params.w), g.param(params.b), g.param(params.v));
    let mut scores = Vec::with_capacity(keys.len());
    for &k in keys {
        let kq = g.concat(&[k, query])?;
        let hidden = g.affine(w, kq, b)?;
        let hidden = g.tanh(hidden);
        scores.push(g.dot(v, hidden)?);
    }
    let scores = g.concat(&scores)?;
    let alpha = g.softmax(scores)?;
    let key_matrix = g.stack_rows(keys)?;
    let pooled = g.weighted_rows(key_matrix, alpha)?;
    Ok(Attended { alpha, pooled })
}

/// Affine map to the three polarity logits.
#[derive(Clone, Debug)]
pub struct ClassifierHead {
    pub input_dim: usize,
    pub w: ParamId,
    pub b: ParamId,
}

pub const NUM_CLASSES: usize = 3;

impl ClassifierHead {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input_dim: usize, rng: &mut R) -> Result<Self> {
        Ok(ClassifierHead {
            input_dim,
            w: store.add_glorot(format!("{prefix}.w"), NUM_CLASSES, input_dim, rng)?,
            b: store.add_zeros(format!("{prefix}.b"), &[NUM_CLASSES])?,
        })
    }
}

pub fn classify(g: &mut Graph<'_>, features: Var, head: &ClassifierHead) -> Result<Var> {
    if g.value(features).len() != head.input_dim {
        return Err(Error::shape(
            "classify",
            format!(
                "features {:?}, head expects [{}]",
                g.value(features).shape(),
                head.input_dim
            ),
        ));
    }
    let (w, b) = (g.param(head.w), g.param(head.b));
    g.affine(w, features, b)
}

pub fn max_pool_rows(g: &mut Graph<'_>, states: Var) -> Result<Var> {
    if g.value(states).rows() == 0 || g.value(states).rank() != 2 {
        return Err(Error::InvalidArgument("max pool over zero rows".into()));
    }
    g.max_rows(states)
}
