//! Fixed-topology dense networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat `Vec<f64>` (per layer: row-major weights,
//! then biases), which keeps the optimizer, checksums and checkpoint I/O
//! trivial.

use std::io::{Read, Write};

use rand::Rng;

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
            Activation::Softmax => 2,
        }
    }

    fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            2 => Some(Activation::Softmax),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerShape {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl LayerShape {
    fn weight_count(&self) -> usize {
        self.input * self.output + self.output
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Post-activation values of every layer, input included.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has layers")
    }
}

impl Mlp {
    /// Dense net over `dims` with ReLU hidden layers and the given output
    /// activation. Weights are fan-in-scaled uniform, biases zero.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Self {
        let mut net = Self::zeros(dims, output);
        let mut offset = 0;
        for shape in &net.shapes {
            let bound = 1.0 / (shape.input as f64).sqrt();
            for w in &mut net.params[offset..offset + shape.input * shape.output] {
                *w = rng.random_range(-bound..bound);
            }
            offset += shape.weight_count();
        }
        net
    }

    pub fn zeros(dims: &[usize], output: Activation) -> Self {
        assert!(dims.len() >= 2, "an mlp needs at least one layer");
        let mut shapes = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let last = i == dims.len() - 2;
            shapes.push(LayerShape {
                input: pair[0],
                output: pair[1],
                activation: if last { output } else { Activation::Relu },
            });
        }
        let count = shapes.iter().map(LayerShape::weight_count).sum();
        Self {
            shapes,
            params: vec![0.0; count],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.shapes.first().expect("layers").input
    }

    pub fn output_dim(&self) -> usize {
        self.shapes.last().expect("layers").output
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    /// FNV-1a over the parameter bit patterns; any training step changes it.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for b in p.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut trace = self.forward_trace(x)?;
        Ok(trace.activations.pop().expect("trace has layers"))
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace, NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.shapes.len() + 1);
        activations.push(x.to_vec());
        let mut offset = 0;
        for shape in &self.shapes {
            let prev = activations.last().expect("input pushed");
            let weights = &self.params[offset..offset + shape.input * shape.output];
            let biases =
                &self.params[offset + shape.input * shape.output..offset + shape.weight_count()];
            let mut z = vec![0.0; shape.output];
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &weights[i * shape.input..(i + 1) * shape.input];
                *zi = biases[i]
                    + row
                        .iter()
                        .zip(prev.iter())
                        .map(|(w, a)| w * a)
                        .sum::<f64>();
            }
            apply_activation(shape.activation, &mut z);
            activations.push(z);
            offset += shape.weight_count();
        }
        Ok(Trace { activations })
    }

    /// Accumulate dL/dparams into `grads` given dL/d(output) in `upstream`;
    /// returns dL/d(input).
    pub fn backward_into(
        &self,
        trace: &Trace,
        upstream: &[f64],
        grads: &mut [f64],
    ) -> Result<Vec<f64>, NnError> {
        if upstream.len() != self.output_dim() {
            return Err(NnError::DimMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(NnError::ShapeMismatch {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        let mut g_out = upstream.to_vec();
        let mut offsets = Vec::with_capacity(self.shapes.len());
        let mut acc = 0;
        for s in &self.shapes {
            offsets.push(acc);
            acc += s.weight_count();
        }
        for (l, shape) in self.shapes.iter().enumerate().rev() {
            let y = &trace.activations[l + 1];
            let a_prev = &trace.activations[l];
            // dL/dz from dL/dy through the activation.
            let g_z: Vec<f64> = match shape.activation {
                Activation::Linear => g_out.clone(),
                Activation::Relu => g_out
                    .iter()
                    .zip(y.iter())
                    .map(|(g, y)| if *y > 0.0 { *g } else { 0.0 })
                    .collect(),
                Activation::Softmax => {
                    let dot: f64 = g_out.iter().zip(y.iter()).map(|(g, y)| g * y).sum();
                    g_out
                        .iter()
                        .zip(y.iter())
                        .map(|(g, y)| y * (g - dot))
                        .collect()
                }
            };
            let offset = offsets[l];
            let w_len = shape.input * shape.output;
            let (w_grads, b_grads) = grads[offset..offset + shape.weight_count()]
                .split_at_mut(w_len);
            for (i, gz) in g_z.iter().enumerate() {
                let row = &mut w_grads[i * shape.input..(i + 1) * shape.input];
                for (wg, a) in row.iter_mut().zip(a_prev.iter()) {
                    *wg += gz * a;
                }
                b_grads[i] += gz;
            }
            // dL/d(a_prev).
            let weights = &self.params[offset..offset + w_len];
            let mut g_prev = vec![0.0; shape.input];
            for (i, gz) in g_z.iter().enumerate() {
                let row = &weights[i * shape.input..(i + 1) * shape.input];
                for (gp, w) in g_prev.iter_mut().zip(row.iter()) {
                    *gp += gz * w;
                }
            }
            g_out = g_prev;
        }
        Ok(g_out)
    }

    /// Flat binary layout: magic, version, layer shapes, then parameters as
    /// little-endian f64.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), NnError> {
        w.write_all(b"RLNB")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.shapes.len() as u32).to_le_bytes())?;
        for s in &self.shapes {
            w.write_all(&(s.input as u32).to_le_bytes())?;
            w.write_all(&(s.output as u32).to_le_bytes())?;
            w.write_all(&[s.activation.tag()])?;
        }
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, NnError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"RLNB" {
            return Err(NnError::BadCheckpoint("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != 1 {
            return Err(NnError::BadCheckpoint(format!("unknown version {version}")));
        }
        let n_layers = read_u32(r)? as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(NnError::BadCheckpoint(format!("implausible layer count {n_layers}")));
        }
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let input = read_u32(r)? as usize;
            let output = read_u32(r)? as usize;
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag)?;
            let activation = Activation::from_tag(tag[0])
                .ok_or_else(|| NnError::BadCheckpoint(format!("bad activation tag {}", tag[0])))?;
            shapes.push(LayerShape {
                input,
                output,
                activation,
            });
        }
        for pair in shapes.windows(2) {
            if pair[0].output != pair[1].input {
                return Err(NnError::BadCheckpoint("layer dims do not chain".into()));
            }
        }
        let count: usize = shapes.iter().map(LayerShape::weight_count).sum();
        let mut params = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            params.push(f64::from_le_bytes(buf));
        }
        Ok(Self { shapes, params })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn apply_activation(act: Activation, z: &mut [f64]) {
    match act {
        Activation::Linear => {}
        Activation::Relu => {
            for v in z.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Activation::Softmax => {
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in z.iter_mut() {
                *v = (*v - m).exp();
                sum += *v;
            }
            for v in z.iter_mut() {
                *v /= sum;
            }
        }
    }
}

