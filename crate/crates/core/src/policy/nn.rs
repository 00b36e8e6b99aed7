//! Dense building blocks over row-major `f64` buffers. A weight matrix for
//! a layer with `input` inputs and `output` outputs is stored `[input][output]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Weight { fan_in: usize },
    Bias,
    Gain,
}

/// One contiguous block of a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub name: &'static str,
    pub len: usize,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn weight(name: &'static str, input: usize, output: usize) -> Self {
        Self {
            name,
            len: input * output,
            kind: SegmentKind::Weight { fan_in: input },
        }
    }

    pub fn bias(name: &'static str, len: usize) -> Self {
        Self {
            name,
            len,
            kind: SegmentKind::Bias,
        }
    }

    pub fn gain(name: &'static str, len: usize) -> Self {
        Self {
            name,
            len,
            kind: SegmentKind::Gain,
        }
    }
}

/// Gaussian weights with std `1/sqrt(fan_in)`, zero biases, unit gains.
pub fn init_segments(segments: &[Segment], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(segments.iter().map(|s| s.len).sum());
    for s in segments {
        match s.kind {
            SegmentKind::Weight { fan_in } => {
                let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("finite std");
                out.extend((0..s.len).map(|_| normal.sample(&mut rng)));
            }
            SegmentKind::Bias => out.extend(std::iter::repeat_n(0.0, s.len)),
            SegmentKind::Gain => out.extend(std::iter::repeat_n(1.0, s.len)),
        }
    }
    out
}

/// Hands out consecutive slices of a parameter vector.
pub struct Cursor<'a> {
    data: &'a [f64],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(data: &'a [f64]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn take(&mut self, len: usize) -> &'a [f64] {
        let s = &self.data[self.pos..self.pos + len];
        self.pos += len;
        s
    }

    pub fn finished(&self) -> bool {
        self.pos == self.data.len()
    }
}

#[derive(Clone, Copy)]
pub struct Dense<'a> {
    pub weight: &'a [f64],
    pub bias: &'a [f64],
}

impl<'a> Dense<'a> {
    pub fn read(cursor: &mut Cursor<'a>, input: usize, output: usize) -> Self {
        let weight = cursor.take(input * output);
        let bias = cursor.take(output);
        Self { weight, bias }
    }

    pub fn output(&self) -> usize {
        self.bias.len()
    }

    /// `x` holds `rows` rows of width `weight.len() / output`.
    pub fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let out = self.output();
        let input = self.weight.len() / out;
        debug_assert_eq!(x.len(), rows * input);
        let mut y = Vec::with_capacity(rows * out);
        for r in 0..rows {
            y.extend_from_slice(self.bias);
            let yr = &mut y[r * out..];
            for (i, &xi) in x[r * input..(r + 1) * input].iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let w = &self.weight[i * out..(i + 1) * out];
                for (yj, wj) in yr.iter_mut().zip(w) {
                    *yj += xi * wj;
                }
            }
        }
        y
    }
}

pub fn relu_in_place(x: &mut [f64]) {
    for v in x {
        *v = v.max(0.0);
    }
}

/// Row-wise layer normalization of a `rows x width` buffer.
pub fn layer_norm_in_place(x: &mut [f64], width: usize, gain: &[f64], bias: &[f64], eps: f64) {
    for row in x.chunks_mut(width) {
        let mean = row.iter().sum::<f64>() / width as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for ((v, g), b) in row.iter_mut().zip(gain).zip(bias) {
            *v = (*v - mean) * inv * g + b;
        }
    }
}

pub fn add_in_place(x: &mut [f64], y: &[f64]) {
    for (a, b) in x.iter_mut().zip(y) {
        *a += b;
    }
}
