use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{Burst, BurstDataset, ExplicitParams, QoiVector};

/// Per-component affine map between physical and normalized QoI values.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(n_v: usize) -> Self {
        Self {
            mean: vec![0.0; n_v],
            std: vec![1.0; n_v],
        }
    }

    /// Per-component mean and population standard deviation over every
    /// entry of every burst. Degenerate components get unit scale.
    pub fn fit(dataset: &BurstDataset) -> Self {
        let n_v = dataset.n_v;
        let mut sum = vec![0.0; n_v];
        let mut count = 0usize;
        for b in &dataset.bursts {
            for q in b.entries() {
                for (s, v) in sum.iter_mut().zip(q.as_slice()) {
                    *s += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Self::identity(n_v);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; n_v];
        for b in &dataset.bursts {
            for q in b.entries() {
                for ((s, v), m) in sq.iter_mut().zip(q.as_slice()).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
        }
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / count as f64).sqrt();
                if sd > 1e-12 * (1.0 + m.abs()) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    #[inline]
    pub fn normalize(&self, c: usize, v: f64) -> f64 {
        (v - self.mean[c]) / self.std[c]
    }

    #[inline]
    pub fn denormalize(&self, c: usize, z: f64) -> f64 {
        z * self.std[c] + self.mean[c]
    }
}

/// The learned flow map with memory: `(n_M + 1)` consecutive QoI vectors
/// plus explicit parameters in, the next QoI vector out.
///
/// Hidden layers use `tanh`, the output layer is linear. Parameters are
/// stored flat, layer by layer: the row-major `out x in` weight matrix
/// followed by its bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMapModel {
    pub(crate) n_v: usize,
    pub(crate) n_gamma: usize,
    pub(crate) n_m: usize,
    pub(crate) widths: Vec<usize>,
    pub(crate) params: Vec<f64>,
    pub(crate) norm: Normalization,
    pub(crate) dt: Option<f64>,
    pub(crate) residual: bool,
}

pub(crate) fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

/// Layer widths for a model with the given inputs and hidden layers.
pub fn layer_widths(n_v: usize, n_gamma: usize, n_m: usize, hidden: &[usize]) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push((n_m + 1) * n_v + n_gamma);
    w.extend_from_slice(hidden);
    w.push(n_v);
    w
}

impl FlowMapModel {
    /// Glorot-uniform weights, zero biases, identity normalization.
    pub fn init(n_v: usize, n_gamma: usize, n_m: usize, hidden_widths: &[usize], seed: u64) -> Result<Self> {
        if n_v == 0 {
            return Err(Error::Config("n_V must be >= 1".into()));
        }
        if hidden_widths.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        if let Some(i) = hidden_widths.iter().position(|&w| w == 0) {
            return Err(Error::Config(format!("hidden layer {i} has zero width")));
        }
        let widths = layer_widths(n_v, n_gamma, n_m, hidden_widths);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(&widths));
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| a * (2.0 * rng.gen::<f64>() - 1.0)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            n_v,
            n_gamma,
            n_m,
            widths,
            params,
            norm: Normalization::identity(n_v),
            dt: None,
            residual: false,
        })
    }

    /// Builds a model from explicit parts, checking every shape.
    pub fn from_parts(
        n_v: usize,
        n_gamma: usize,
        n_m: usize,
        widths: Vec<usize>,
        params: Vec<f64>,
        norm: Normalization,
    ) -> Result<Self> {
        let m = Self {
            n_v,
            n_gamma,
            n_m,
            widths,
            params,
            norm,
            dt: None,
            residual: false,
        };
        m.check()?;
        Ok(m)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Config(s));
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return bad(format!("invalid layer widths {:?}", self.widths));
        }
        if self.widths[0] != (self.n_m + 1) * self.n_v + self.n_gamma {
            return bad(format!(
                "input width {} != (n_M+1)*n_V + n_gamma = {}",
                self.widths[0],
                (self.n_m + 1) * self.n_v + self.n_gamma
            ));
        }
        if *self.widths.last().unwrap() != self.n_v {
            return bad(format!("output width {} != n_V = {}", self.widths.last().unwrap(), self.n_v));
        }
        if self.params.len() != param_count(&self.widths) {
            return bad(format!(
                "{} parameters given, widths {:?} need {}",
                self.params.len(),
                self.widths,
                param_count(&self.widths)
            ));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return bad("non-finite weight".into());
        }
        if self.norm.mean.len() != self.n_v || self.norm.std.len() != self.n_v {
            return bad("normalization length differs from n_V".into());
        }
        if self.norm.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || self.norm.mean.iter().any(|m| !m.is_finite()) {
            return bad("normalization scales must be finite and > 0".into());
        }
        Ok(())
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_gamma(&self) -> usize {
        self.n_gamma
    }

    pub fn n_m(&self) -> usize {
        self.n_m
    }

    /// Number of QoI vectors in a memory window, `n_M + 1`.
    pub fn window_len(&self) -> usize {
        self.n_m + 1
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn set_normalization(&mut self, norm: Normalization) -> Result<()> {
        let old = std::mem::replace(&mut self.norm, norm);
        if let Err(e) = self.check() {
            self.norm = old;
            return Err(e);
        }
        Ok(())
    }

    /// QoI recording step of the data the model was trained on, if known.
    pub fn dt(&self) -> Option<f64> {
        self.dt
    }

    /// Whether the network predicts the increment over the newest window
    /// entry (`V_{n+1} = V_n + N(...)`) instead of the next entry itself.
    pub fn residual(&self) -> bool {
        self.residual
    }

    pub fn set_residual(&mut self, residual: bool) {
        self.residual = residual;
    }

    /// Builder form of [`set_residual`](Self::set_residual).
    pub fn with_residual(mut self, residual: bool) -> Self {
        self.residual = residual;
        self
    }

    pub fn set_dt(&mut self, dt: Option<f64>) {
        self.dt = dt;
    }

    fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.widths[..=l])
    }

    pub(crate) fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let off = self.layer_offset(l);
        let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[off..off + fan_in * fan_out]).unwrap();
        let b = ArrayView1::from(&self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out]);
        (w, b)
    }

    fn layer_grad<'a>(&self, grad: &'a mut [f64], l: usize) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let off = self.layer_offset(l);
        let (w, b) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
        (
            ArrayViewMut2::from_shape((fan_out, fan_in), w).unwrap(),
            ArrayViewMut1::from(b),
        )
    }

    /// Applies the network to a batch of normalized inputs (one row each).
    /// Returns the activations entering each layer and the output.
    fn forward_batch(&self, x: Array2<f64>) -> (Vec<Array2<f64>>, Array2<f64>) {
        let mut acts = Vec::with_capacity(self.n_layers());
        let mut a = x;
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let mut z = a.dot(&w.t());
            z += &b;
            if l + 1 < self.n_layers() {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(a);
            a = z;
        }
        (acts, a)
    }

    /// Reverse pass for one forward batch. Accumulates parameter gradients
    /// into `grad` and returns the gradient with respect to the input rows
    /// when `want_input` is set.
    fn backward_batch(&self, acts: &[Array2<f64>], dy: Array2<f64>, grad: &mut [f64], want_input: bool) -> Option<Array2<f64>> {
        let mut dz = dy;
        for l in (0..self.n_layers()).rev() {
            let (w, _) = self.layer(l);
            {
                let (mut gw, mut gb) = self.layer_grad(grad, l);
                general_mat_mul(1.0, &dz.t(), &acts[l], 1.0, &mut gw);
                gb += &dz.sum_axis(Axis(0));
            }
            if l == 0 && !want_input {
                return None;
            }
            let mut da = dz.dot(&w);
            if l > 0 {
                da.zip_mut_with(&acts[l], |d, a| *d *= 1.0 - a * a);
                dz = da;
            } else {
                return Some(da);
            }
        }
        None
    }

    fn check_window(&self, window: &[QoiVector], gamma: &ExplicitParams) -> Result<()> {
        if window.len() != self.window_len() {
            return Err(Error::Config(format!(
                "memory window has {} entries, model needs n_M + 1 = {}",
                window.len(),
                self.window_len()
            )));
        }
        if let Some(i) = window.iter().position(|q| q.len() != self.n_v) {
            return Err(Error::Config(format!(
                "window entry {i} has {} components, model needs n_V = {}",
                window[i].len(),
                self.n_v
            )));
        }
        if gamma.len() != self.n_gamma {
            return Err(Error::Config(format!(
                "gamma has {} entries, model needs {}",
                gamma.len(),
                self.n_gamma
            )));
        }
        Ok(())
    }

    /// One application of the flow map to a window ordered oldest first.
    pub fn forward(&self, window: &[QoiVector], gamma: &ExplicitParams) -> Result<QoiVector> {
        let mut out = self.rollout(window, gamma, 1)?;
        Ok(out.pop().unwrap())
    }

    /// Marches the map forward `k` steps, feeding each prediction back into
    /// the sliding memory window.
    pub fn rollout(&self, prefix: &[QoiVector], gamma: &ExplicitParams, k: usize) -> Result<Vec<QoiVector>> {
        self.check_window(prefix, gamma)?;
        if k == 0 {
            return Err(Error::Config("rollout length must be >= 1".into()));
        }
        let (n_v, w_len) = (self.n_v, self.window_len());
        let in_dim = self.widths[0];
        // Normalized history; predictions are appended in normalized space.
        let mut hist: Vec<f64> = Vec::with_capacity((w_len + k) * n_v);
        for q in prefix {
            hist.extend(q.as_slice().iter().enumerate().map(|(c, v)| self.norm.normalize(c, *v)));
        }
        let mut out = Vec::with_capacity(k);
        let mut x = Array2::zeros((1, in_dim));
        for step in 0..k {
            {
                let row = x.as_slice_mut().unwrap();
                row[..w_len * n_v].copy_from_slice(&hist[step * n_v..(step + w_len) * n_v]);
                row[w_len * n_v..].copy_from_slice(gamma.as_slice());
            }
            let (_, mut y) = self.forward_batch(x.clone());
            if self.residual {
                let newest = &hist[(step + w_len - 1) * n_v..(step + w_len) * n_v];
                y.row_mut(0).iter_mut().zip(newest).for_each(|(z, v)| *z += v);
            }
            let z = y.row(0);
            let v: Vec<f64> = z.iter().enumerate().map(|(c, z)| self.norm.denormalize(c, *z)).collect();
            if z.iter().chain(&v).any(|v| !v.is_finite()) {
                return Err(Error::RolloutDivergence { step: step + 1 });
            }
            hist.extend(z.iter());
            out.push(QoiVector::new(v)?);
        }
        Ok(out)
    }

    /// Packs bursts into normalized tensors.
    pub fn normalize_batch(&self, bursts: &[Burst]) -> Result<NormalizedBatch> {
        let first = bursts
            .first()
            .ok_or_else(|| Error::Data("empty batch".into()))?;
        let n_l = first.len();
        if n_l < self.n_m + 2 {
            return Err(Error::Data(format!(
                "bursts of length {n_l} are too short for n_M = {}",
                self.n_m
            )));
        }
        let mut seq = Array3::zeros((bursts.len(), n_l, self.n_v));
        let mut gamma = Array2::zeros((bursts.len(), self.n_gamma));
        for (j, b) in bursts.iter().enumerate() {
            if b.len() != n_l {
                return Err(Error::Data(format!("burst {j} has length {}, expected {n_l}", b.len())));
            }
            if b.gamma().len() != self.n_gamma {
                return Err(Error::Data(format!("burst {j} has wrong gamma length")));
            }
            for (t, q) in b.entries().iter().enumerate() {
                if q.len() != self.n_v {
                    return Err(Error::Data(format!("burst {j} entry {t} has wrong n_V")));
                }
                for (c, v) in q.as_slice().iter().enumerate() {
                    seq[[j, t, c]] = self.norm.normalize(c, *v);
                }
            }
            for (g, v) in gamma.row_mut(j).iter_mut().zip(b.gamma().as_slice()) {
                *g = *v;
            }
        }
        Ok(NormalizedBatch { seq, gamma })
    }

    /// Builds the input rows for rollout step `k` (1-based) from the
    /// extended sequence.
    fn step_inputs(&self, seq: &Array3<f64>, gamma: &Array2<f64>, k: usize) -> Array2<f64> {
        let b = seq.len_of(Axis(0));
        let (n_v, w_len) = (self.n_v, self.window_len());
        let mut x = Array2::zeros((b, self.widths[0]));
        for j in 0..b {
            let mut row = x.row_mut(j);
            let window = seq.slice(s![j, k - 1..k - 1 + w_len, ..]);
            for (dst, src) in row.iter_mut().zip(window.iter()) {
                *dst = *src;
            }
            for (dst, src) in row.slice_mut(s![w_len * n_v..]).iter_mut().zip(gamma.row(j)) {
                *dst = *src;
            }
        }
        x
    }

    /// Multi-step loss and, optionally, its exact gradient (backpropagation
    /// through the whole rollout).
    pub fn loss_and_gradient_normalized(&self, batch: &NormalizedBatch, want_grad: bool) -> (f64, Option<Vec<f64>>) {
        let (b, n_l, n_v) = batch.seq.dim();
        let n_r = n_l - self.window_len();
        let w_len = self.window_len();
        let mut ext = batch.seq.clone();
        let mut caches = Vec::with_capacity(n_r);
        let mut residuals = Vec::with_capacity(n_r);
        let mut loss = 0.0;
        for k in 1..=n_r {
            let x = self.step_inputs(&ext, &batch.gamma, k);
            let (acts, mut y) = self.forward_batch(x);
            if self.residual {
                y += &ext.slice(s![.., self.n_m + k - 1, ..]);
            }
            let target = batch.seq.slice(s![.., self.n_m + k, ..]);
            let r = &y - &target;
            let mut lk = 0.0;
            for v in r.iter() {
                lk += v * v;
            }
            loss += lk / b as f64;
            ext.slice_mut(s![.., self.n_m + k, ..]).assign(&y);
            if want_grad {
                caches.push(acts);
                residuals.push(r);
            }
        }
        let loss = loss / n_r as f64;
        if !want_grad {
            return (loss, None);
        }

        let mut grad = vec![0.0; self.params.len()];
        // d loss / d (predicted entry), indexed like the extended sequence.
        let mut dseq = Array3::<f64>::zeros((b, n_l, n_v));
        let scale = 2.0 / (b as f64 * n_r as f64);
        for k in (1..=n_r).rev() {
            let mut dy = residuals.pop().unwrap();
            dy.mapv_inplace(|r| scale * r);
            dy += &dseq.slice(s![.., self.n_m + k, ..]);
            let acts = caches.pop().unwrap();
            if self.residual && k >= 2 {
                let mut dst = dseq.slice_mut(s![.., self.n_m + k - 1, ..]);
                dst += &dy;
            }
            let dx = self.backward_batch(&acts, dy, &mut grad, k >= 2);
            if let Some(dx) = dx {
                // Window slot p holds sequence index k-1+p; only predicted
                // entries (index > n_M) carry gradient back.
                for p in 0..w_len {
                    let idx = k - 1 + p;
                    if idx > self.n_m {
                        let src = dx.slice(s![.., p * n_v..(p + 1) * n_v]);
                        let mut dst = dseq.slice_mut(s![.., idx, ..]);
                        dst += &src;
                    }
                }
            }
        }
        (loss, Some(grad))
    }

    /// `L = (1/n_R) sum_k L_k`, evaluated in normalized QoI space.
    pub fn loss_multi_step(&self, batch: &[Burst]) -> Result<f64> {
        let nb = self.normalize_batch(batch)?;
        Ok(self.loss_and_gradient_normalized(&nb, false).0)
    }

    /// Mean squared one-step mismatch, using only the first `n_M + 2`
    /// entries of each burst.
    pub fn loss_one_step(&self, batch: &[Burst]) -> Result<f64> {
        let mut nb = self.normalize_batch(batch)?;
        nb.seq = nb.seq.slice(s![.., ..self.n_m + 2, ..]).to_owned();
        Ok(self.loss_and_gradient_normalized(&nb, false).0)
    }

    /// Gradient of [`loss_multi_step`](Self::loss_multi_step) with respect
    /// to every weight and bias, in flat parameter order.
    pub fn backward(&self, batch: &[Burst]) -> Result<Vec<f64>> {
        let nb = self.normalize_batch(batch)?;
        Ok(self.loss_and_gradient_normalized(&nb, true).1.unwrap())
    }
}

/// A batch of bursts in normalized space: `seq` is `(batch, n_L, n_V)`,
/// `gamma` is `(batch, n_gamma)`.
#[derive(Debug, Clone)]
pub struct NormalizedBatch {
    pub seq: Array3<f64>,
    pub gamma: Array2<f64>,
}

impl NormalizedBatch {
    pub fn len(&self) -> usize {
        self.seq.len_of(Axis(0))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gather(&self, idx: &[usize]) -> NormalizedBatch {
        NormalizedBatch {
            seq: self.seq.select(Axis(0), idx),
            gamma: self.gamma.select(Axis(0), idx),
        }
    }
}
