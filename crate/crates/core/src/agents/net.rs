//! Two-layer tanh trunk with modulation, frame-count and value heads.
//!
//! Parameters live in one flat vector; [`NetShape::layout`] names the tensor
//! views. Gradients use the same flat layout.

use rand::Rng;

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub input: usize,
    pub hidden: usize,
    pub n_mod: usize,
    pub n_frames: usize,
}

impl NetShape {
    pub fn new(hidden: usize, n_frames: usize) -> Self {
        Self {
            input: 2,
            hidden,
            n_mod: 4,
            n_frames,
        }
    }

    pub fn layout(&self) -> Vec<TensorSpec> {
        let (i, h) = (self.input, self.hidden);
        let shapes: [(&'static str, Vec<usize>); 10] = [
            ("trunk.0.weight", vec![h, i]),
            ("trunk.0.bias", vec![h]),
            ("trunk.1.weight", vec![h, h]),
            ("trunk.1.bias", vec![h]),
            ("mod_head.weight", vec![self.n_mod, h]),
            ("mod_head.bias", vec![self.n_mod]),
            ("frame_head.weight", vec![self.n_frames, h]),
            ("frame_head.bias", vec![self.n_frames]),
            ("value_head.weight", vec![1, h]),
            ("value_head.bias", vec![1]),
        ];
        let mut offset = 0;
        shapes
            .into_iter()
            .map(|(name, shape)| {
                let spec = TensorSpec { name, shape, offset };
                offset += spec.len();
                spec
            })
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.layout().iter().map(TensorSpec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

// Offsets into the flat parameter vector, in layout order.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wm: usize,
    bm: usize,
    wf: usize,
    bf: usize,
    wv: usize,
    bv: usize,
}

impl Offsets {
    fn of(shape: &NetShape) -> Self {
        let o: Vec<usize> = shape.layout().iter().map(|t| t.offset).collect();
        Self {
            w1: o[0],
            b1: o[1],
            w2: o[2],
            b2: o[3],
            wm: o[4],
            bm: o[5],
            wf: o[6],
            bf: o[7],
            wv: o[8],
            bv: o[9],
        }
    }
}

/// Outputs of a forward pass plus the activations backprop needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T> {
    pub mod_logits: Vec<T>,
    pub frame_logits: Vec<T>,
    pub value: T,
    input: Vec<T>,
    h1: Vec<T>,
    h2: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueNet<T> {
    shape: NetShape,
    offsets: Offsets,
    params: Vec<T>,
}

/// `out[o] = b[o] + sum_i w[o, i] x[i]`
fn affine<T: Real>(w: &[T], b: &[T], x: &[T], out: &mut Vec<T>) {
    let n_in = x.len();
    out.clear();
    out.extend(b.iter().enumerate().map(|(o, &bias)| {
        let row = &w[o * n_in..(o + 1) * n_in];
        row.iter().zip(x).fold(bias, |acc, (&wi, &xi)| acc + wi * xi)
    }));
}

impl<T: Real> PolicyValueNet<T> {
    pub fn zeros(shape: NetShape) -> Self {
        Self {
            shape,
            offsets: Offsets::of(&shape),
            params: vec![T::zero(); shape.n_params()],
        }
    }

    /// Uniform Glorot init for the trunk, small policy heads so the initial
    /// policy is near-uniform, unit-scale value head, zero biases.
    pub fn init<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Self {
        let mut net = Self::zeros(shape);
        for spec in shape.layout() {
            if spec.shape.len() != 2 {
                continue;
            }
            let (fan_out, fan_in) = (spec.shape[0], spec.shape[1]);
            let gain = match spec.name {
                "mod_head.weight" | "frame_head.weight" => 0.01,
                _ => 1.0,
            };
            let limit = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[spec.range()] {
                *p = T::lit(rng.random_range(-limit..limit));
            }
        }
        net
    }

    pub fn from_params(shape: NetShape, params: Vec<T>) -> Result<Self> {
        if params.len() != shape.n_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                shape.n_params(),
                params.len()
            )));
        }
        Ok(Self {
            shape,
            offsets: Offsets::of(&shape),
            params,
        })
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn tensor(&self, name: &str) -> Option<&[T]> {
        self.shape
            .layout()
            .into_iter()
            .find(|t| t.name == name)
            .map(|t| &self.params[t.range()])
    }

    pub fn forward(&self, input: &[T]) -> Result<Forward<T>> {
        let s = &self.shape;
        if input.len() != s.input {
            return Err(Error::Shape(format!(
                "expected {} input features, got {}",
                s.input,
                input.len()
            )));
        }
        let o = &self.offsets;
        let p = &self.params;
        let (h, i) = (s.hidden, s.input);

        let mut h1 = Vec::with_capacity(h);
        affine(&p[o.w1..o.w1 + h * i], &p[o.b1..o.b1 + h], input, &mut h1);
        h1.iter_mut().for_each(|z| *z = z.tanh());

        let mut h2 = Vec::with_capacity(h);
        affine(&p[o.w2..o.w2 + h * h], &p[o.b2..o.b2 + h], &h1, &mut h2);
        h2.iter_mut().for_each(|z| *z = z.tanh());

        let mut mod_logits = Vec::with_capacity(s.n_mod);
        affine(&p[o.wm..o.wm + s.n_mod * h], &p[o.bm..o.bm + s.n_mod], &h2, &mut mod_logits);
        let mut frame_logits = Vec::with_capacity(s.n_frames);
        affine(&p[o.wf..o.wf + s.n_frames * h], &p[o.bf..o.bf + s.n_frames], &h2, &mut frame_logits);
        let mut value = Vec::with_capacity(1);
        affine(&p[o.wv..o.wv + h], &p[o.bv..o.bv + 1], &h2, &mut value);

        Ok(Forward {
            mod_logits,
            frame_logits,
            value: value[0],
            input: input.to_vec(),
            h1,
            h2,
        })
    }

    /// Accumulates into `grad` the parameter gradient of a scalar loss whose
    /// derivatives with respect to the three head outputs are given.
    pub fn backward(&self, fwd: &Forward<T>, d_mod: &[T], d_frame: &[T], d_value: T, grad: &mut [T]) -> Result<()> {
        let s = &self.shape;
        if grad.len() != self.params.len() || d_mod.len() != s.n_mod || d_frame.len() != s.n_frames {
            return Err(Error::Shape("gradient buffer does not match network".into()));
        }
        let o = &self.offsets;
        let p = &self.params;
        let h = s.hidden;

        let mut dh2 = vec![T::zero(); h];
        let mut head = |w_off: usize, b_off: usize, d_out: &[T], grad: &mut [T]| {
            for (k, &g) in d_out.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                grad[b_off + k] = grad[b_off + k] + g;
                let row = w_off + k * h;
                for j in 0..h {
                    grad[row + j] = grad[row + j] + g * fwd.h2[j];
                    dh2[j] = dh2[j] + g * p[row + j];
                }
            }
        };
        head(o.wm, o.bm, d_mod, grad);
        head(o.wf, o.bf, d_frame, grad);
        head(o.wv, o.bv, &[d_value], grad);

        let dz2: Vec<T> = dh2
            .iter()
            .zip(&fwd.h2)
            .map(|(&d, &a)| d * (T::one() - a * a))
            .collect();
        let mut dh1 = vec![T::zero(); h];
        for (k, &g) in dz2.iter().enumerate() {
            grad[o.b2 + k] = grad[o.b2 + k] + g;
            let row = o.w2 + k * h;
            for j in 0..h {
                grad[row + j] = grad[row + j] + g * fwd.h1[j];
                dh1[j] = dh1[j] + g * p[row + j];
            }
        }

        let n_in = s.input;
        for k in 0..h {
            let g = dh1[k] * (T::one() - fwd.h1[k] * fwd.h1[k]);
            grad[o.b1 + k] = grad[o.b1 + k] + g;
            let row = o.w1 + k * n_in;
            for j in 0..n_in {
                grad[row + j] = grad[row + j] + g * fwd.input[j];
            }
        }
        Ok(())
    }
}
