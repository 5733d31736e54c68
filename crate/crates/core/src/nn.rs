//! Minimal dense networks with residual blocks and exact gradients.
//!
//! A network is an affine adapter into a fixed width, one or two residual
//! blocks (two dense layers each, ELU inside, skip connection around), and
//! an affine head. Parameters live in one flat vector addressed through a
//! layout table, which keeps the optimizer and the checkpoint format
//! trivial. `backward` returns the exact gradient of
//! `sum_ij cotangent[i][j] * output[i][j]` with respect to both the
//! parameters and the inputs; the input gradient is what lets the
//! transport objectives chain through the exponential map.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Architecture of one network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetSpec {
    pub input_dim: usize,
    /// Number of residual blocks, 1 or 2.
    pub block_count: usize,
    /// Width of every block layer.
    pub block_width: usize,
    pub output_dim: usize,
}

impl NetSpec {
    pub fn new(input_dim: usize, block_count: usize, block_width: usize, output_dim: usize) -> Result<Self> {
        let spec = NetSpec {
            input_dim,
            block_count,
            block_width,
            output_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.block_width == 0 || self.output_dim == 0 {
            return Err(Error::contract("network dimensions must be at least 1"));
        }
        if !(1..=2).contains(&self.block_count) {
            return Err(Error::contract(format!(
                "block count must be 1 or 2, got {}",
                self.block_count
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let w = self.block_width;
        let mut segs = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize, offset: &mut usize| {
            let seg = Seg {
                name,
                offset: *offset,
                rows,
                cols,
            };
            *offset += rows * cols;
            segs.push(seg);
        };
        push("w_in".into(), w, self.input_dim, &mut offset);
        push("b_in".into(), w, 1, &mut offset);
        for k in 0..self.block_count {
            push(format!("w{k}a"), w, w, &mut offset);
            push(format!("b{k}a"), w, 1, &mut offset);
            push(format!("w{k}b"), w, w, &mut offset);
            push(format!("b{k}b"), w, 1, &mut offset);
        }
        push("w_out".into(), self.output_dim, w, &mut offset);
        push("b_out".into(), self.output_dim, 1, &mut offset);
        Layout {
            segs,
            total: offset,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

/// One contiguous parameter segment (a weight matrix or a bias vector).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seg {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Maps named segments into the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub segs: Vec<Seg>,
    pub total: usize,
}

impl Layout {
    pub fn seg(&self, name: &str) -> &Seg {
        self.segs
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("no segment named {name}"))
    }

    fn weight<'a>(&self, params: &'a [f64], name: &str) -> ArrayView2<'a, f64> {
        let s = self.seg(name);
        ArrayView2::from_shape((s.rows, s.cols), &params[s.offset..s.offset + s.rows * s.cols])
            .expect("segment shape")
    }

    fn bias<'a>(&self, params: &'a [f64], name: &str) -> ArrayView1<'a, f64> {
        let s = self.seg(name);
        ArrayView1::from_shape(s.rows, &params[s.offset..s.offset + s.rows]).expect("segment shape")
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn elu_deriv(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// A network: architecture plus its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub spec: NetSpec,
    pub params: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
pub struct Cache {
    input: Array2<f64>,
    /// acts[0] is the adapter output, acts[k] the output of block k.
    acts: Vec<Array2<f64>>,
    /// Pre-activation of each block's first layer.
    pre: Vec<Array2<f64>>,
    /// ELU output of each block's first layer.
    hid: Vec<Array2<f64>>,
}

impl Net {
    /// Initialize parameters: hidden weights uniform on
    /// `[-a, a], a = sqrt(6 / (fan_in + fan_out))`, biases zero, and the
    /// head zeroed so the network starts as the constant zero function.
    pub fn init(spec: NetSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        let mut params = vec![0.0; layout.total];
        for seg in &layout.segs {
            if seg.name.starts_with('b') || seg.name == "w_out" {
                continue;
            }
            let a = (6.0 / (seg.cols + seg.rows) as f64).sqrt();
            for p in params[seg.offset..seg.offset + seg.rows * seg.cols].iter_mut() {
                *p = rng.random_range(-a..a);
            }
        }
        Ok(Net { spec, params })
    }

    pub fn layout(&self) -> Layout {
        self.spec.layout()
    }

    fn check_batch(&self, batch: &Array2<f64>) -> Result<()> {
        if batch.ncols() != self.spec.input_dim {
            return Err(Error::contract(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    /// Evaluate the network on a batch of input rows.
    pub fn forward(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(batch)?.0)
    }

    /// Evaluate and keep the intermediates needed by [`Net::backward`].
    pub fn forward_cached(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, Cache)> {
        self.check_batch(batch)?;
        let layout = self.layout();
        let p = &self.params;
        let mut acts = Vec::with_capacity(self.spec.block_count + 1);
        let mut pre = Vec::with_capacity(self.spec.block_count);
        let mut hid = Vec::with_capacity(self.spec.block_count);

        let a0 = batch.dot(&layout.weight(p, "w_in").t()) + &layout.bias(p, "b_in");
        acts.push(a0);
        for k in 0..self.spec.block_count {
            let prev = acts.last().unwrap();
            let pk = prev.dot(&layout.weight(p, &format!("w{k}a")).t())
                + &layout.bias(p, &format!("b{k}a"));
            let hk = pk.mapv(elu);
            let ak = prev
                + &(hk.dot(&layout.weight(p, &format!("w{k}b")).t())
                    + &layout.bias(p, &format!("b{k}b")));
            pre.push(pk);
            hid.push(hk);
            acts.push(ak);
        }
        let out = acts.last().unwrap().dot(&layout.weight(p, "w_out").t())
            + &layout.bias(p, "b_out");
        Ok((
            out,
            Cache {
                input: batch.clone(),
                acts,
                pre,
                hid,
            },
        ))
    }

    /// Exact gradient of `sum(cotangent * output)` with respect to the
    /// parameters and the batch inputs.
    pub fn backward(&self, cache: &Cache, cotangent: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        if cotangent.ncols() != self.spec.output_dim || cotangent.nrows() != cache.input.nrows() {
            return Err(Error::contract(format!(
                "cotangent shape {:?} does not match output shape ({}, {})",
                cotangent.dim(),
                cache.input.nrows(),
                self.spec.output_dim
            )));
        }
        let layout = self.layout();
        let p = &self.params;
        let mut grads = vec![0.0; layout.total];

        fn write(layout: &Layout, grads: &mut [f64], name: &str, value: &Array2<f64>) {
            let s = layout.seg(name);
            for (slot, v) in grads[s.offset..s.offset + s.rows * s.cols]
                .iter_mut()
                .zip(value.iter())
            {
                *slot = *v;
            }
        }
        fn write_bias(layout: &Layout, grads: &mut [f64], name: &str, value: &Array1<f64>) {
            let s = layout.seg(name);
            for (slot, v) in grads[s.offset..s.offset + s.rows].iter_mut().zip(value.iter()) {
                *slot = *v;
            }
        }

        let a_last = cache.acts.last().unwrap();
        write(&layout, &mut grads, "w_out", &cotangent.t().dot(a_last));
        write_bias(&layout, &mut grads, "b_out", &cotangent.sum_axis(Axis(0)));
        let mut g = cotangent.dot(&layout.weight(p, "w_out"));

        for k in (0..self.spec.block_count).rev() {
            let prev = &cache.acts[k];
            let hk = &cache.hid[k];
            let pk = &cache.pre[k];
            write(&layout, &mut grads, &format!("w{k}b"), &g.t().dot(hk));
            write_bias(&layout, &mut grads, &format!("b{k}b"), &g.sum_axis(Axis(0)));
            let dh = g.dot(&layout.weight(p, &format!("w{k}b")));
            let dp = &dh * &pk.mapv(elu_deriv);
            write(&layout, &mut grads, &format!("w{k}a"), &dp.t().dot(prev));
            write_bias(&layout, &mut grads, &format!("b{k}a"), &dp.sum_axis(Axis(0)));
            g = g + dp.dot(&layout.weight(p, &format!("w{k}a")));
        }

        write(&layout, &mut grads, "w_in", &g.t().dot(&cache.input));
        write_bias(&layout, &mut grads, "b_in", &g.sum_axis(Axis(0)));
        let input_grads = g.dot(&layout.weight(p, "w_in"));
        Ok((grads, input_grads))
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Adam optimizer state for one parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::contract(format!(
            "adam length mismatch: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CKPT_MAGIC: &[u8; 16] = b"MANIFOLD-OT-CKPT";

/// Write a network checkpoint: magic, spec echo, layout descriptor, then
/// the parameter vector as little-endian f64.
pub fn save_checkpoint(path: &Path, net: &Net) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    for dim in [
        net.spec.input_dim,
        net.spec.block_count,
        net.spec.block_width,
        net.spec.output_dim,
    ] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    let layout = net.layout();
    buf.extend_from_slice(&(layout.segs.len() as u32).to_le_bytes());
    for seg in &layout.segs {
        buf.extend_from_slice(&(seg.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(seg.name.as_bytes());
        buf.extend_from_slice(&(seg.offset as u64).to_le_bytes());
        buf.extend_from_slice(&(seg.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(seg.cols as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
    for p in &net.params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::contract("checkpoint file truncated"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Read a checkpoint written by [`save_checkpoint`], validating the magic
/// header and that the stored layout matches the stored spec.
pub fn load_checkpoint(path: &Path) -> Result<Net> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let mut r = Reader { data: &data, pos: 0 };
    if r.take(16)? != CKPT_MAGIC {
        return Err(Error::contract(format!(
            "{} is not a checkpoint file (bad magic)",
            path.display()
        )));
    }
    let spec = NetSpec::new(
        r.u32()? as usize,
        r.u32()? as usize,
        r.u32()? as usize,
        r.u32()? as usize,
    )?;
    let n_segs = r.u32()? as usize;
    let mut segs = Vec::with_capacity(n_segs);
    for _ in 0..n_segs {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::contract("checkpoint segment name is not UTF-8"))?;
        let offset = r.u64()? as usize;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        segs.push(Seg {
            name,
            offset,
            rows,
            cols,
        });
    }
    let expected = spec.layout();
    if segs != expected.segs {
        return Err(Error::contract("checkpoint layout does not match its spec"));
    }
    let len = r.u64()? as usize;
    if len != expected.total {
        return Err(Error::contract(format!(
            "checkpoint has {len} parameters, spec needs {}",
            expected.total
        )));
    }
    let mut params = Vec::with_capacity(len);
    for _ in 0..len {
        params.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
    }
    Ok(Net { spec, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;

    fn random_batch(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    fn randomize_all(net: &mut Net, rng: &mut impl Rng) {
        for p in net.params.iter_mut() {
            *p = rng.random_range(-0.5..0.5);
        }
    }

    /// Rig the parameters so the network computes `head * x` exactly:
    /// adapter passes the input through, blocks are zero.
    fn rig_affine(net: &mut Net, head: &[f64], head_bias: f64) {
        let layout = net.layout();
        net.params.iter_mut().for_each(|p| *p = 0.0);
        let w_in = layout.seg("w_in");
        for i in 0..net.spec.input_dim {
            net.params[w_in.offset + i * w_in.cols + i] = 1.0;
        }
        let w_out = layout.seg("w_out");
        for (j, h) in head.iter().enumerate() {
            net.params[w_out.offset + j] = *h;
        }
        let b_out = layout.seg("b_out");
        net.params[b_out.offset] = head_bias;
    }

    #[test]
    fn init_determinism() {
        let spec = NetSpec::new(4, 2, 32, 3).unwrap();
        let a = Net::init(spec, &mut rng::from_seed(1)).unwrap();
        let b = Net::init(spec, &mut rng::from_seed(1)).unwrap();
        assert_eq!(a.params, b.params);

        for seed in 0..10u64 {
            let a = Net::init(spec, &mut rng::from_seed(seed)).unwrap();
            let b = Net::init(spec, &mut rng::from_seed(seed + 100)).unwrap();
            let nonzero: Vec<usize> = (0..a.params.len())
                .filter(|&i| a.params[i] != 0.0 || b.params[i] != 0.0)
                .collect();
            let differing = nonzero.iter().filter(|&&i| a.params[i] != b.params[i]).count();
            assert!(differing as f64 >= 0.99 * nonzero.len() as f64);
        }
    }

    #[test]
    fn zero_head_means_zero_output() {
        let spec = NetSpec::new(3, 1, 16, 2).unwrap();
        let net = Net::init(spec, &mut rng::from_seed(2)).unwrap();
        let x = random_batch(&mut rng::from_seed(3), 20, 3);
        let out = net.forward(&x).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_rig() {
        let spec = NetSpec::new(2, 1, 8, 2).unwrap();
        let mut net = Net::init(spec, &mut rng::from_seed(4)).unwrap();
        let layout = net.layout();
        net.params.iter_mut().for_each(|p| *p = 0.0);
        let w_in = layout.seg("w_in");
        net.params[w_in.offset] = 1.0;
        net.params[w_in.offset + w_in.cols + 1] = 1.0;
        let w_out = layout.seg("w_out");
        net.params[w_out.offset] = 1.0;
        net.params[w_out.offset + w_out.cols + 1] = 1.0;
        let x = random_batch(&mut rng::from_seed(5), 10, 2);
        let out = net.forward(&x).unwrap();
        assert!(out
            .iter()
            .zip(x.iter())
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn rows_are_independent() {
        let spec = NetSpec::new(4, 2, 16, 3).unwrap();
        let mut net = Net::init(spec, &mut rng::from_seed(6)).unwrap();
        randomize_all(&mut net, &mut rng::from_seed(7));
        let x = random_batch(&mut rng::from_seed(8), 64, 4);
        let batch_out = net.forward(&x).unwrap();
        for i in [0usize, 17, 63] {
            let row = x.row(i).insert_axis(ndarray::Axis(0)).to_owned();
            let single = net.forward(&row).unwrap();
            for j in 0..3 {
                assert_abs_diff_eq!(single[(0, j)], batch_out[(i, j)], epsilon = 1e-12);
            }
        }
        // Perturbing one row leaves every other output row untouched.
        let mut x2 = x.clone();
        x2[(5, 2)] += 0.37;
        let out2 = net.forward(&x2).unwrap();
        for i in 0..64 {
            for j in 0..3 {
                if i == 5 {
                    continue;
                }
                assert_eq!(out2[(i, j)], batch_out[(i, j)]);
            }
        }
        assert!((0..3).any(|j| out2[(5, j)] != batch_out[(5, j)]));
    }

    #[test]
    fn linear_layer_gradient_closed_form() {
        let spec = NetSpec::new(3, 1, 8, 1).unwrap();
        let mut net = Net::init(spec, &mut rng::from_seed(9)).unwrap();
        rig_affine(&mut net, &[0.5, -1.0, 2.0], 0.25);
        let x = Array2::from_shape_vec((1, 3), vec![1.5, -0.5, 2.0]).unwrap();
        let (out, cache) = net.forward_cached(&x).unwrap();
        assert_abs_diff_eq!(out[(0, 0)], 0.5 * 1.5 + 1.0 * 0.5 + 2.0 * 2.0 + 0.25, epsilon = 1e-14);
        let cot = Array2::from_elem((1, 1), 1.0);
        let (grads, _) = net.backward(&cache, &cot).unwrap();
        let layout = net.layout();
        let w_out = layout.seg("w_out");
        // d(w.x + b)/dw = x (the adapter passes coordinates through).
        assert_abs_diff_eq!(grads[w_out.offset], 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(grads[w_out.offset + 1], -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(grads[w_out.offset + 2], 2.0, epsilon = 1e-14);
        let b_out = layout.seg("b_out");
        assert_abs_diff_eq!(grads[b_out.offset], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_cotangent_zero_grads() {
        let spec = NetSpec::new(4, 2, 16, 2).unwrap();
        let mut net = Net::init(spec, &mut rng::from_seed(10)).unwrap();
        randomize_all(&mut net, &mut rng::from_seed(11));
        let x = random_batch(&mut rng::from_seed(12), 8, 4);
        let (_, cache) = net.forward_cached(&x).unwrap();
        let cot = Array2::zeros((8, 2));
        let (grads, input_grads) = net.backward(&cache, &cot).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
        assert!(input_grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        for (blocks, in_dim, out_dim) in [(1usize, 2usize, 1usize), (2, 4, 3), (2, 9, 3)] {
            let spec = NetSpec::new(in_dim, blocks, 16, out_dim).unwrap();
            let mut net = Net::init(spec, &mut rng::from_seed(13)).unwrap();
            randomize_all(&mut net, &mut rng::from_seed(14));
            let mut r = rng::from_seed(15);
            let x = random_batch(&mut r, 6, in_dim);
            let cot = random_batch(&mut r, 6, out_dim);
            let (_, cache) = net.forward_cached(&x).unwrap();
            let (grads, input_grads) = net.backward(&cache, &cot).unwrap();

            let scalar = |net: &Net, x: &Array2<f64>| -> f64 {
                (net.forward(x).unwrap() * &cot).sum()
            };
            for _ in 0..40 {
                let dir: Vec<f64> = (0..net.params.len())
                    .map(|_| r.random_range(-1.0..1.0))
                    .collect();
                let analytic: f64 = grads.iter().zip(dir.iter()).map(|(g, d)| g * d).sum();
                let h = 1e-5;
                let mut plus = net.clone();
                let mut minus = net.clone();
                for i in 0..dir.len() {
                    plus.params[i] += h * dir[i];
                    minus.params[i] -= h * dir[i];
                }
                let fd = (scalar(&plus, &x) - scalar(&minus, &x)) / (2.0 * h);
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (analytic - fd).abs() / denom < 1e-4,
                    "param grad mismatch: {analytic} vs {fd}"
                );
            }
            // Input gradients against finite differences too.
            for _ in 0..20 {
                let dir = random_batch(&mut r, 6, in_dim);
                let analytic: f64 = (&input_grads * &dir).sum();
                let h = 1e-5;
                let plus = &x + &(&dir * h);
                let minus = &x - &(&dir * h);
                let fd = (scalar(&net, &plus) - scalar(&net, &minus)) / (2.0 * h);
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (analytic - fd).abs() / denom < 1e-4,
                    "input grad mismatch: {analytic} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn residual_identity_reduction() {
        let spec = NetSpec::new(3, 2, 16, 2).unwrap();
        let mut net = Net::init(spec, &mut rng::from_seed(16)).unwrap();
        randomize_all(&mut net, &mut rng::from_seed(17));
        let layout = net.layout();
        for k in 0..2 {
            for name in [format!("w{k}a"), format!("b{k}a"), format!("w{k}b"), format!("b{k}b")] {
                let s = layout.seg(&name);
                for p in net.params[s.offset..s.offset + s.rows * s.cols.max(1)].iter_mut() {
                    *p = 0.0;
                }
            }
        }
        let x = random_batch(&mut rng::from_seed(18), 12, 3);
        let out = net.forward(&x).unwrap();
        // Manual affine composition head(adapter(x)).
        let w_in = layout.weight(&net.params, "w_in").to_owned();
        let b_in = layout.bias(&net.params, "b_in").to_owned();
        let w_out = layout.weight(&net.params, "w_out").to_owned();
        let b_out = layout.bias(&net.params, "b_out").to_owned();
        let manual = (x.dot(&w_in.t()) + &b_in).dot(&w_out.t()) + &b_out;
        assert!((out - manual).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut params = vec![1.0, -2.0, 0.5];
        let grads = vec![0.3, -0.7, 1.1];
        let mut state = AdamState::new(3, 1e-3);
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(state.t, 1);
        for (i, (p, g)) in [1.0, -2.0, 0.5].iter().zip(grads.iter()).enumerate() {
            let expected = p - 1e-3 * g.signum();
            assert!((params[i] - expected).abs() < 1e-6 * 1e-3 + 1e-12);
        }
    }

    #[test]
    fn adam_zero_grad_fixed_point() {
        let mut params = vec![0.4, -1.2];
        let mut state = AdamState::new(2, 1e-3);
        adam_step(&mut params, &[0.0, 0.0], &mut state).unwrap();
        assert_eq!(params, vec![0.4, -1.2]);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        // Adam moves roughly lr per step, so lr = 1e-2 can cover the
        // distance of 3 and settle within 2000 steps.
        let mut p = vec![0.0];
        let mut state = AdamState::new(1, 1e-2);
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 3.0)];
            adam_step(&mut p, &g, &mut state).unwrap();
        }
        assert!((p[0] - 3.0).abs() < 1e-2, "p = {}", p[0]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let spec = NetSpec::new(5, 2, 32, 3).unwrap();
        let mut net = Net::init(spec, &mut rng::from_seed(19)).unwrap();
        randomize_all(&mut net, &mut rng::from_seed(20));
        save_checkpoint(&path, &net).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.spec, net.spec);
        assert_eq!(loaded.params, net.params);

        // Corrupt magic.
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
