//! Hand-written LSTM cell and multi-layer bidirectional stack with full
//! backpropagation through time. Everything is f64 so gradients can be
//! checked against central finite differences.

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One LSTM cell. Gate order inside the packed dimension is
/// [input, forget, cell, output], each of width `hidden`.
#[derive(Debug, Clone)]
pub struct LstmCell {
    /// (4h, in)
    pub w_input: Array2<f64>,
    /// (4h, h)
    pub w_rec: Array2<f64>,
    /// (4h,)
    pub bias: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmCell {
    /// Uniform ±1/sqrt(fan_in) weights, zero biases except the forget gate
    /// slice, which starts at 1.
    pub fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> LstmCell {
        let mut w_input = Array2::zeros((4 * hidden, input));
        let bound = 1.0 / (input as f64).sqrt();
        for v in w_input.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let mut w_rec = Array2::zeros((4 * hidden, hidden));
        let bound = 1.0 / (hidden as f64).sqrt();
        for v in w_rec.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let mut bias = Array1::zeros(4 * hidden);
        bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        LstmCell {
            w_input,
            w_rec,
            bias,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> LstmCell {
        LstmCell {
            w_input: Array2::zeros((4 * hidden, input)),
            w_rec: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    pub fn zeros_like(&self) -> LstmCell {
        LstmCell {
            w_input: Array2::zeros(self.w_input.raw_dim()),
            w_rec: Array2::zeros(self.w_rec.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn hidden(&self) -> usize {
        self.bias.len() / 4
    }

    pub fn input_size(&self) -> usize {
        self.w_input.ncols()
    }

    /// Run the cell over a sequence (rows of `xs`), starting from zero
    /// state.
    pub fn forward(&self, xs: &Array2<f64>) -> CellCache {
        let t_len = xs.nrows();
        let h = self.hidden();
        let mut gates = Array2::zeros((t_len, 4 * h));
        let mut cells = Array2::zeros((t_len, h));
        let mut hs = Array2::zeros((t_len, h));

        let mut h_prev = Array1::zeros(h);
        let mut c_prev = Array1::<f64>::zeros(h);
        for t in 0..t_len {
            let z = self.w_input.dot(&xs.row(t)) + self.w_rec.dot(&h_prev) + &self.bias;
            let mut c_t = Array1::zeros(h);
            let mut h_t = Array1::zeros(h);
            for j in 0..h {
                let i_g = sigmoid(z[j]);
                let f_g = sigmoid(z[h + j]);
                let g_g = z[2 * h + j].tanh();
                let o_g = sigmoid(z[3 * h + j]);
                gates[(t, j)] = i_g;
                gates[(t, h + j)] = f_g;
                gates[(t, 2 * h + j)] = g_g;
                gates[(t, 3 * h + j)] = o_g;
                c_t[j] = f_g * c_prev[j] + i_g * g_g;
                h_t[j] = o_g * c_t[j].tanh();
            }
            cells.row_mut(t).assign(&c_t);
            hs.row_mut(t).assign(&h_t);
            h_prev = h_t;
            c_prev = c_t;
        }
        CellCache {
            xs: xs.clone(),
            gates,
            cells,
            hs,
        }
    }

    /// Backpropagate `d_hs` (gradient w.r.t. every hidden output) through
    /// the cached forward pass. Returns parameter gradients and the gradient
    /// w.r.t. the inputs.
    pub fn backward(&self, cache: &CellCache, d_hs: &Array2<f64>) -> (LstmCell, Array2<f64>) {
        let t_len = cache.xs.nrows();
        let h = self.hidden();
        let mut grads = self.zeros_like();
        let mut d_xs = Array2::zeros(cache.xs.raw_dim());

        let mut dh_rec = Array1::<f64>::zeros(h);
        let mut dc_next = Array1::<f64>::zeros(h);
        for t in (0..t_len).rev() {
            let mut dz = Array1::zeros(4 * h);
            for j in 0..h {
                let i_g = cache.gates[(t, j)];
                let f_g = cache.gates[(t, h + j)];
                let g_g = cache.gates[(t, 2 * h + j)];
                let o_g = cache.gates[(t, 3 * h + j)];
                let c_t = cache.cells[(t, j)];
                let c_prev = if t > 0 { cache.cells[(t - 1, j)] } else { 0.0 };
                let tc = c_t.tanh();

                let dh = d_hs[(t, j)] + dh_rec[j];
                let d_o = dh * tc;
                let dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];

                let d_i = dc * g_g;
                let d_f = dc * c_prev;
                let d_g = dc * i_g;
                dc_next[j] = dc * f_g;

                dz[j] = d_i * i_g * (1.0 - i_g);
                dz[h + j] = d_f * f_g * (1.0 - f_g);
                dz[2 * h + j] = d_g * (1.0 - g_g * g_g);
                dz[3 * h + j] = d_o * o_g * (1.0 - o_g);
            }

            // dW += dz ⊗ x_t; dU += dz ⊗ h_{t-1}; db += dz
            let x_t = cache.xs.row(t);
            for r in 0..4 * h {
                let dz_r = dz[r];
                if dz_r == 0.0 {
                    continue;
                }
                for c in 0..x_t.len() {
                    grads.w_input[(r, c)] += dz_r * x_t[c];
                }
                if t > 0 {
                    for c in 0..h {
                        grads.w_rec[(r, c)] += dz_r * cache.hs[(t - 1, c)];
                    }
                }
                grads.bias[r] += dz_r;
            }

            // dx_t = W^T dz; dh_{t-1} = U^T dz
            d_xs.row_mut(t).assign(&self.w_input.t().dot(&dz));
            dh_rec = self.w_rec.t().dot(&dz);
        }
        (grads, d_xs)
    }
}

/// Forward-pass cache of one cell over one sequence.
#[derive(Debug, Clone)]
pub struct CellCache {
    pub xs: Array2<f64>,
    /// (T, 4h), post-nonlinearity gate activations [i, f, g, o].
    pub gates: Array2<f64>,
    /// (T, h) cell states.
    pub cells: Array2<f64>,
    /// (T, h) hidden states.
    pub hs: Array2<f64>,
}

/// One bidirectional layer: a forward cell and a cell run over the reversed
/// sequence, outputs concatenated per position.
#[derive(Debug, Clone)]
pub struct BiLstmLayer {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

pub struct BiLayerCache {
    fwd: CellCache,
    bwd: CellCache,
}

fn reverse_rows(a: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(a.raw_dim());
    let t_len = a.nrows();
    for t in 0..t_len {
        out.row_mut(t).assign(&a.row(t_len - 1 - t));
    }
    out
}

impl BiLstmLayer {
    pub fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> BiLstmLayer {
        BiLstmLayer {
            fwd: LstmCell::init(input, hidden, rng),
            bwd: LstmCell::init(input, hidden, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> BiLstmLayer {
        BiLstmLayer {
            fwd: LstmCell::zeros(input, hidden),
            bwd: LstmCell::zeros(input, hidden),
        }
    }

    pub fn zeros_like(&self) -> BiLstmLayer {
        BiLstmLayer {
            fwd: self.fwd.zeros_like(),
            bwd: self.bwd.zeros_like(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden()
    }

    /// Output (T, 2h): forward hidden states, then backward hidden states
    /// re-aligned to input positions.
    pub fn forward(&self, xs: &Array2<f64>) -> (Array2<f64>, BiLayerCache) {
        let t_len = xs.nrows();
        let h = self.hidden();
        let fwd = self.fwd.forward(xs);
        let bwd = self.bwd.forward(&reverse_rows(xs));
        let mut out = Array2::zeros((t_len, 2 * h));
        for t in 0..t_len {
            out.slice_mut(s![t, ..h]).assign(&fwd.hs.row(t));
            out.slice_mut(s![t, h..]).assign(&bwd.hs.row(t_len - 1 - t));
        }
        (out, BiLayerCache { fwd, bwd })
    }

    pub fn backward(&self, cache: &BiLayerCache, d_out: &Array2<f64>) -> (BiLstmLayer, Array2<f64>) {
        let t_len = d_out.nrows();
        let h = self.hidden();
        let d_fwd_hs = d_out.slice(s![.., ..h]).to_owned();
        let mut d_bwd_hs = Array2::zeros((t_len, h));
        for t in 0..t_len {
            d_bwd_hs
                .row_mut(t)
                .assign(&d_out.slice(s![t_len - 1 - t, h..]));
        }
        let (g_fwd, dx_fwd) = self.fwd.backward(&cache.fwd, &d_fwd_hs);
        let (g_bwd, dx_bwd_rev) = self.bwd.backward(&cache.bwd, &d_bwd_hs);
        let d_xs = dx_fwd + reverse_rows(&dx_bwd_rev);
        (
            BiLstmLayer {
                fwd: g_fwd,
                bwd: g_bwd,
            },
            d_xs,
        )
    }
}

/// Multi-layer bidirectional stack. Layer k > 0 consumes the (2h)-wide
/// output of layer k-1; the stack output concatenates every layer's hidden
/// units: width 2h * layers.
#[derive(Debug, Clone)]
pub struct BiLstmStack {
    pub layers: Vec<BiLstmLayer>,
}

pub struct StackCache {
    layer_caches: Vec<BiLayerCache>,
    /// Inverted-dropout masks applied to each layer's output (train only).
    masks: Vec<Option<Array2<f64>>>,
}

impl BiLstmStack {
    pub fn init(input: usize, hidden: usize, layers: usize, rng: &mut ChaCha8Rng) -> BiLstmStack {
        assert!(layers >= 1);
        let mut v = Vec::with_capacity(layers);
        v.push(BiLstmLayer::init(input, hidden, rng));
        for _ in 1..layers {
            v.push(BiLstmLayer::init(2 * hidden, hidden, rng));
        }
        BiLstmStack { layers: v }
    }

    pub fn zeros(input: usize, hidden: usize, layers: usize) -> BiLstmStack {
        assert!(layers >= 1);
        let mut v = Vec::with_capacity(layers);
        v.push(BiLstmLayer::zeros(input, hidden));
        for _ in 1..layers {
            v.push(BiLstmLayer::zeros(2 * hidden, hidden));
        }
        BiLstmStack { layers: v }
    }

    pub fn zeros_like(&self) -> BiLstmStack {
        BiLstmStack {
            layers: self.layers.iter().map(|l| l.zeros_like()).collect(),
        }
    }

    pub fn output_width(&self) -> usize {
        2 * self.layers[0].hidden() * self.layers.len()
    }

    /// Forward pass; `dropout` is (probability, rng) during training.
    /// Inverted dropout is applied to each layer's output, feeding both the
    /// next layer and the concatenated stack output.
    pub fn forward(
        &self,
        xs: &Array2<f64>,
        mut dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> (Array2<f64>, StackCache) {
        let t_len = xs.nrows();
        let h = self.layers[0].hidden();
        let mut out = Array2::zeros((t_len, self.output_width()));
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());

        let mut input = xs.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let (mut o, cache) = layer.forward(&input);
            let mask = match &mut dropout {
                Some((p, rng)) if *p > 0.0 => {
                    let m = dropout_mask(o.raw_dim(), *p, rng);
                    o *= &m;
                    Some(m)
                }
                _ => None,
            };
            out.slice_mut(s![.., 2 * h * k..2 * h * (k + 1)]).assign(&o);
            layer_caches.push(cache);
            masks.push(mask);
            input = o;
        }
        (out, StackCache {
            layer_caches,
            masks,
        })
    }

    pub fn backward(&self, cache: &StackCache, d_out: &Array2<f64>) -> (BiLstmStack, Array2<f64>) {
        let h = self.layers[0].hidden();
        let mut grads: Vec<Option<BiLstmLayer>> = vec![None; self.layers.len()];
        // Gradient flowing into each layer's (post-dropout) output: its slice
        // of the concatenation plus, for non-top layers, the next layer's
        // input gradient.
        let mut d_from_above: Option<Array2<f64>> = None;
        for k in (0..self.layers.len()).rev() {
            let mut d_o = d_out.slice(s![.., 2 * h * k..2 * h * (k + 1)]).to_owned();
            if let Some(up) = d_from_above.take() {
                d_o += &up;
            }
            if let Some(mask) = &cache.masks[k] {
                d_o *= mask;
            }
            let (g, d_in) = self.layers[k].backward(&cache.layer_caches[k], &d_o);
            grads[k] = Some(g);
            d_from_above = Some(d_in);
        }
        let d_xs = d_from_above.expect("at least one layer");
        (
            BiLstmStack {
                layers: grads.into_iter().map(|g| g.unwrap()).collect(),
            },
            d_xs,
        )
    }
}

pub(crate) fn dropout_mask(
    dim: ndarray::Dim<[usize; 2]>,
    p: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let keep = 1.0 - p;
    let mut m = Array2::zeros(dim);
    for v in m.iter_mut() {
        *v = if rng.random_range(0.0..1.0) < keep {
            1.0 / keep
        } else {
            0.0
        };
    }
    m
}
