//! Forward and backward passes over a flat parameter vector.
//!
//! Every matrix lives in one `Vec<f64>` according to a [`Layout`]; gradients
//! use the same layout, which keeps Adam, persistence and finite-difference
//! checks layout-agnostic.

use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A named `rows × cols` block of the parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub len: usize,
}

impl Layout {
    pub(crate) fn push(&mut self, name: String, rows: usize, cols: usize) -> usize {
        self.blocks.push(Block { name, offset: self.len, rows, cols });
        self.len += rows * cols;
        self.blocks.len() - 1
    }

    pub(crate) fn view<'a>(&self, id: usize, p: &'a [f64]) -> ArrayView2<'a, f64> {
        let b = &self.blocks[id];
        ArrayView2::from_shape((b.rows, b.cols), &p[b.offset..b.offset + b.rows * b.cols]).expect("block shape")
    }

    pub(crate) fn view_mut<'a>(&self, id: usize, p: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        let b = &self.blocks[id];
        ArrayViewMut2::from_shape((b.rows, b.cols), &mut p[b.offset..b.offset + b.rows * b.cols]).expect("block shape")
    }

    pub(crate) fn slice<'a>(&self, id: usize, p: &'a [f64]) -> &'a [f64] {
        let b = &self.blocks[id];
        &p[b.offset..b.offset + b.rows * b.cols]
    }

    pub(crate) fn slice_mut<'a>(&self, id: usize, p: &'a mut [f64]) -> &'a mut [f64] {
        let b = &self.blocks[id];
        &mut p[b.offset..b.offset + b.rows * b.cols]
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row-wise softmax in place.
pub(crate) fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Mean cross-entropy of softmax(`logits`) against `targets`; returns the
/// loss and overwrites `logits` with d(loss)/d(logits).
pub(crate) fn softmax_xent(logits: &mut Array2<f64>, targets: &[usize]) -> f64 {
    softmax_rows(logits);
    let n = targets.len() as f64;
    let mut loss = 0.0;
    for (mut row, &t) in logits.rows_mut().into_iter().zip(targets) {
        loss -= row[t].max(1e-300).ln();
        row[t] -= 1.0;
        row.mapv_inplace(|v| v / n);
    }
    loss / n
}

/// Inverted-dropout mask (entries 0 or 1/(1−p)); `None` when inactive.
fn dropout_mask<R: Rng>(rows: usize, cols: usize, p: f64, rng: Option<&mut R>) -> Option<Array2<f64>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(Array2::from_shape_fn((rows, cols), |_| if rng.gen::<f64>() < p { 0.0 } else { keep }))
}

/// Dense layer with optional dropout on its input and optional ReLU on its output.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    w: usize,
    b: usize,
    relu: bool,
    dropout_in: f64,
}

pub(crate) struct DenseCache {
    input: Array2<f64>,
    mask: Option<Array2<f64>>,
    out: Array2<f64>,
}

impl Dense {
    pub(crate) fn new(layout: &mut Layout, name: &str, inp: usize, out: usize, relu: bool, dropout_in: f64) -> Self {
        let w = layout.push(format!("{name}.w"), inp, out);
        let b = layout.push(format!("{name}.b"), 1, out);
        Dense { w, b, relu, dropout_in }
    }

    pub(crate) fn fan_in(&self, layout: &Layout) -> usize {
        layout.blocks[self.w].rows
    }

    pub(crate) fn blocks(&self) -> [usize; 2] {
        [self.w, self.b]
    }

    pub(crate) fn forward<R: Rng>(&self, l: &Layout, p: &[f64], x: Array2<f64>, rng: Option<&mut R>) -> (Array2<f64>, DenseCache) {
        let mask = dropout_mask(x.nrows(), x.ncols(), self.dropout_in, rng);
        let input = match &mask {
            Some(m) => x * m,
            None => x,
        };
        let mut out = input.dot(&l.view(self.w, p)) + &l.view(self.b, p);
        if self.relu {
            out.mapv_inplace(relu);
        }
        (out.clone(), DenseCache { input, mask, out })
    }

    /// Accumulates parameter gradients into `g`; returns d(loss)/d(input before dropout).
    pub(crate) fn backward(&self, l: &Layout, p: &[f64], g: &mut [f64], c: &DenseCache, mut dy: Array2<f64>) -> Array2<f64> {
        if self.relu {
            dy.zip_mut_with(&c.out, |d, &o| {
                if o <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        l.view_mut(self.w, g).scaled_add(1.0, &c.input.t().dot(&dy));
        l.view_mut(self.b, g).scaled_add(1.0, &dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let dx = dy.dot(&l.view(self.w, p).t());
        match &c.mask {
            Some(m) => dx * m,
            None => dx,
        }
    }
}

/// Chain of dense layers; the last one has no activation (logits).
#[derive(Debug, Clone)]
pub(crate) struct Mlp {
    pub(crate) layers: Vec<Dense>,
}

impl Mlp {
    pub(crate) fn forward<R: Rng>(&self, l: &Layout, p: &[f64], mut x: Array2<f64>, mut rng: Option<&mut R>) -> (Array2<f64>, Vec<DenseCache>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        for d in &self.layers {
            let (y, c) = d.forward(l, p, x, rng.as_deref_mut());
            caches.push(c);
            x = y;
        }
        (x, caches)
    }

    pub(crate) fn backward(&self, l: &Layout, p: &[f64], g: &mut [f64], caches: &[DenseCache], mut dy: Array2<f64>) -> Array2<f64> {
        for (d, c) in self.layers.iter().zip(caches).rev() {
            dy = d.backward(l, p, g, c, dy);
        }
        dy
    }
}

/// One LSTM layer; gate order in the fused matrices is input, forget, cell, output.
#[derive(Debug, Clone)]
pub(crate) struct Lstm {
    wx: usize,
    wh: usize,
    b: usize,
    pub(crate) hidden: usize,
}

pub(crate) struct LstmStep {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    /// Activated gates, `B × 4H`.
    gates: Array2<f64>,
    tanh_c: Array2<f64>,
}

impl Lstm {
    pub(crate) fn new(layout: &mut Layout, name: &str, inp: usize, hidden: usize) -> Self {
        let wx = layout.push(format!("{name}.wx"), inp, 4 * hidden);
        let wh = layout.push(format!("{name}.wh"), hidden, 4 * hidden);
        let b = layout.push(format!("{name}.b"), 1, 4 * hidden);
        Lstm { wx, wh, b, hidden }
    }

    pub(crate) fn blocks(&self) -> [usize; 3] {
        [self.wx, self.wh, self.b]
    }

    /// One time step; returns (h, c) and the cache for backpropagation.
    pub(crate) fn step(
        &self,
        l: &Layout,
        p: &[f64],
        x: &Array2<f64>,
        h_prev: &Array2<f64>,
        c_prev: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, LstmStep) {
        let h = self.hidden;
        let mut z = x.dot(&l.view(self.wx, p)) + h_prev.dot(&l.view(self.wh, p)) + &l.view(self.b, p);
        z.slice_mut(s![.., 0..2 * h]).mapv_inplace(sigmoid);
        z.slice_mut(s![.., 2 * h..3 * h]).mapv_inplace(f64::tanh);
        z.slice_mut(s![.., 3 * h..4 * h]).mapv_inplace(sigmoid);
        let i = z.slice(s![.., 0..h]);
        let f = z.slice(s![.., h..2 * h]);
        let g = z.slice(s![.., 2 * h..3 * h]);
        let o = z.slice(s![.., 3 * h..4 * h]);
        let c = &f * c_prev + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        let h_new = &o * &tanh_c;
        let cache = LstmStep { x: x.clone(), h_prev: h_prev.clone(), c_prev: c_prev.clone(), gates: z, tanh_c };
        (h_new, c, cache)
    }

    /// Backpropagation through time. `dh` holds d(loss)/d(h_t) from above for
    /// every step; returns d(loss)/d(x_t) for every step.
    pub(crate) fn backward(&self, l: &Layout, p: &[f64], g: &mut [f64], steps: &[LstmStep], dh: &[Array2<f64>]) -> Vec<Array2<f64>> {
        let h = self.hidden;
        let batch = dh[0].nrows();
        let mut dh_next = Array2::<f64>::zeros((batch, h));
        let mut dc_next = Array2::<f64>::zeros((batch, h));
        let mut dxs = vec![Array2::<f64>::zeros((0, 0)); steps.len()];
        let wx = l.view(self.wx, p);
        let wh = l.view(self.wh, p);
        let mut dwx = Array2::<f64>::zeros(wx.raw_dim());
        let mut dwh = Array2::<f64>::zeros(wh.raw_dim());
        let mut db = Array2::<f64>::zeros((1, 4 * h));
        for t in (0..steps.len()).rev() {
            let st = &steps[t];
            let i = st.gates.slice(s![.., 0..h]);
            let f = st.gates.slice(s![.., h..2 * h]);
            let gg = st.gates.slice(s![.., 2 * h..3 * h]);
            let o = st.gates.slice(s![.., 3 * h..4 * h]);
            let dht = &dh[t] + &dh_next;
            let d_o = &dht * &st.tanh_c;
            let dc = &dht * &o * &st.tanh_c.mapv(|v| 1.0 - v * v) + &dc_next;
            let mut dz = Array2::<f64>::zeros((batch, 4 * h));
            dz.slice_mut(s![.., 0..h]).assign(&(&dc * &gg * &i * &i.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., h..2 * h]).assign(&(&dc * &st.c_prev * &f * &f.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., 2 * h..3 * h]).assign(&(&dc * &i * &gg.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![.., 3 * h..4 * h]).assign(&(&d_o * &o * &o.mapv(|v| 1.0 - v)));
            dc_next = &dc * &f;
            dwx += &st.x.t().dot(&dz);
            dwh += &st.h_prev.t().dot(&dz);
            db += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
            dxs[t] = dz.dot(&wx.t());
            dh_next = dz.dot(&wh.t());
        }
        l.view_mut(self.wx, g).scaled_add(1.0, &dwx);
        l.view_mut(self.wh, g).scaled_add(1.0, &dwh);
        l.view_mut(self.b, g).scaled_add(1.0, &db);
        dxs
    }
}
