//! Spline codes and what a code pins down.
//!
//! A [`LayerSpan`] selects layers `L..=L+K`. The polytopes it induces live in
//! the input space of layer `L`; every `Relu` neuron in the span contributes
//! one bit (1 iff its pre-activation is strictly positive). Fixing the bits
//! fixes which rows survive each ReLU, so the span collapses to one affine
//! map ([`RegionAffine`]) and the bits themselves become halfspace
//! constraints in span-input coordinates ([`RegionConstraints`]).
//!
//! # Text form
//!
//! A code serializes as `L=<L> K=<K> M=<M> offsets=<o0,o1,..> bits=<hex>`.
//! Bits are packed eight per byte, bit 0 of the code in the most significant
//! position of the first byte; unused trailing positions are zero.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, Matrix};
use crate::net::{is_active, ActivationKind, ActivationTrace, Layer, PwlNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerSpan {
    start: usize,
    k: usize,
}

impl LayerSpan {
    /// Span over layers `start..=start + k`.
    pub fn new(start: usize, k: usize) -> Self {
        Self { start, k }
    }

    /// Span from `start` through the network's final layer.
    pub fn to_output(net: &PwlNetwork, start: usize) -> Result<Self> {
        if start >= net.layer_count() {
            return Err(Error::InvalidSpan(format!(
                "start layer {start} but network has {} layers",
                net.layer_count()
            )));
        }
        Ok(Self::new(start, net.layer_count() - 1 - start))
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Last covered layer (inclusive).
    pub fn end(&self) -> usize {
        self.start + self.k
    }

    pub fn layers(&self) -> RangeInclusive<usize> {
        self.start..=self.end()
    }

    pub fn validate(&self, net: &PwlNetwork) -> Result<()> {
        if self.end() >= net.layer_count() {
            return Err(Error::InvalidSpan(format!(
                "span {}..={} exceeds network with {} layers",
                self.start,
                self.end(),
                net.layer_count()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self, net: &PwlNetwork) -> Result<usize> {
        self.validate(net)?;
        net.dim_into(self.start)
    }

    pub fn output_dim(&self, net: &PwlNetwork) -> Result<usize> {
        self.validate(net)?;
        Ok(net.layers()[self.end()].fan_out())
    }

    /// Bit offsets of each Relu layer in the span, plus the total length `M`.
    pub fn layout(&self, net: &PwlNetwork) -> Result<(Vec<usize>, usize)> {
        self.validate(net)?;
        Ok(offsets_for(
            self.layers()
                .map(|l| (net.layers()[l].activation(), net.layers()[l].fan_out())),
        ))
    }

    pub fn code_length(&self, net: &PwlNetwork) -> Result<usize> {
        Ok(self.layout(net)?.1)
    }
}

fn offsets_for(layers: impl Iterator<Item = (ActivationKind, usize)>) -> (Vec<usize>, usize) {
    let mut offsets = Vec::new();
    let mut m = 0;
    for (act, width) in layers {
        if act == ActivationKind::Relu {
            offsets.push(m);
            m += width;
        }
    }
    (offsets, m)
}

/// Binary activation pattern over a span, packed 64 bits per word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplineCode {
    words: Vec<u64>,
    len: usize,
    span: LayerSpan,
    layer_offsets: Vec<usize>,
}

impl SplineCode {
    pub fn from_bits(bits: &[bool], span: LayerSpan, layer_offsets: Vec<usize>) -> Result<Self> {
        let strictly_increasing = layer_offsets.windows(2).all(|w| w[0] < w[1]);
        let starts_at_zero = layer_offsets.first().is_none_or(|&o| o == 0);
        let fits = layer_offsets.last().is_none_or(|&o| o < bits.len().max(1));
        if !(strictly_increasing && starts_at_zero && fits) {
            return Err(Error::InvalidArgument(format!(
                "invalid layer offsets {layer_offsets:?} for {} bits",
                bits.len()
            )));
        }
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(Self {
            words,
            len: bits.len(),
            span,
            layer_offsets,
        })
    }

    /// Length `M`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn span(&self) -> LayerSpan {
        self.span
    }

    pub fn layer_offsets(&self) -> &[usize] {
        &self.layer_offsets
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index out of range");
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of differing bits; codes must share span and length.
    pub fn hamming(&self, other: &SplineCode) -> Result<usize> {
        if self.span != other.span || self.len != other.len {
            return Err(Error::SpanMismatch(format!(
                "codes over {:?}/{} and {:?}/{} bits",
                self.span, self.len, other.span, other.len
            )));
        }
        Ok(hamming_words(&self.words, &other.words))
    }

    /// MSB-first hex packing of the bits.
    pub fn to_hex(&self) -> String {
        let mut bytes = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.bit(i) {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        hex::encode(bytes)
    }

    pub fn from_hex(
        text: &str,
        len: usize,
        span: LayerSpan,
        layer_offsets: Vec<usize>,
    ) -> Result<Self> {
        let bytes = hex::decode(text).map_err(|e| Error::Parse(format!("code hex: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Parse(format!(
                "code hex has {} bytes, expected {} for M={len}",
                bytes.len(),
                len.div_ceil(8)
            )));
        }
        let bits: Vec<bool> = (0..len)
            .map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0)
            .collect();
        Self::from_bits(&bits, span, layer_offsets)
    }
}

#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum()
}

impl fmt::Display for SplineCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let offsets: Vec<String> = self.layer_offsets.iter().map(ToString::to_string).collect();
        write!(
            f,
            "L={} K={} M={} offsets={} bits={}",
            self.span.start,
            self.span.k,
            self.len,
            offsets.join(","),
            self.to_hex()
        )
    }
}

impl FromStr for SplineCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for part in s.split_whitespace() {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("code field {part:?} lacks '='")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("code is missing field {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Parse(format!("code field {k} is not an integer")))
        };
        let offsets = match get("offsets")? {
            "" => Vec::new(),
            list => list
                .split(',')
                .map(|o| {
                    o.parse()
                        .map_err(|_| Error::Parse(format!("bad offset {o:?}")))
                })
                .collect::<Result<Vec<usize>>>()?,
        };
        Self::from_hex(
            get("bits")?,
            num("M")?,
            LayerSpan::new(num("L")?, num("K")?),
            offsets,
        )
    }
}

/// Reads the code of `span` off a trace that covers it.
pub fn extract_code(trace: &ActivationTrace, span: LayerSpan) -> Result<SplineCode> {
    let last_traced = trace.first_layer + trace.pre_activation.len();
    if span.start < trace.first_layer || span.end() >= last_traced {
        return Err(Error::InvalidSpan(format!(
            "span {}..={} not covered by trace of layers {}..{}",
            span.start,
            span.end(),
            trace.first_layer,
            last_traced
        )));
    }
    let rel = span.start - trace.first_layer..=span.end() - trace.first_layer;
    let (offsets, m) = offsets_for(
        rel.clone()
            .map(|i| (trace.activations[i], trace.pre_activation[i].len())),
    );
    let mut bits = Vec::with_capacity(m);
    for i in rel {
        if trace.activations[i] == ActivationKind::Relu {
            bits.extend(trace.pre_activation[i].iter().map(|&z| is_active(z)));
        }
    }
    SplineCode::from_bits(&bits, span, offsets)
}

/// Code of a span-input vector `h` (a point in layer `span.start`'s input space).
///
/// Evaluates only the span's layers.
pub fn code_at(net: &PwlNetwork, span: LayerSpan, h: &[f64]) -> Result<SplineCode> {
    span.validate(net)?;
    check_dim(net.dim_into(span.start)?, h.len())?;
    let (offsets, m) = span.layout(net)?;
    let mut words = vec![0u64; m.div_ceil(64)];
    let mut bit = 0;
    let mut cur = h.to_vec();
    for l in span.layers() {
        let layer = &net.layers()[l];
        let pre = layer.pre_activation(&cur);
        if layer.activation() == ActivationKind::Relu {
            for &z in &pre {
                if is_active(z) {
                    words[bit / 64] |= 1 << (bit % 64);
                }
                bit += 1;
            }
        }
        cur = layer.activate(&pre);
    }
    Ok(SplineCode {
        words,
        len: m,
        span,
        layer_offsets: offsets,
    })
}

/// Output of the span's last layer for span-input `h`.
pub fn span_output(net: &PwlNetwork, span: LayerSpan, h: &[f64]) -> Result<Vec<f64>> {
    span.validate(net)?;
    check_dim(net.dim_into(span.start)?, h.len())?;
    let mut cur = h.to_vec();
    for l in span.layers() {
        let layer = &net.layers()[l];
        cur = layer.activate(&layer.pre_activation(&cur));
    }
    Ok(cur)
}

pub fn hamming(c1: &SplineCode, c2: &SplineCode) -> Result<usize> {
    c1.hamming(c2)
}

/// The affine map `x ↦ A·x + b` a span implements on one polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAffine {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub span: LayerSpan,
}

impl RegionAffine {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.a.cols(), x.len())?;
        let mut y = self.a.matvec(x);
        for (yi, bi) in y.iter_mut().zip(&self.b) {
            *yi += bi;
        }
        Ok(y)
    }
}

pub fn apply_region_affine(ra: &RegionAffine, x: &[f64]) -> Result<Vec<f64>> {
    ra.apply(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `normal·x + offset > 0`
    Positive,
    /// `normal·x + offset ≤ 0`
    NonPositive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub sense: Sense,
}

impl Halfspace {
    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) + self.offset
    }

    pub fn satisfied(&self, x: &[f64]) -> bool {
        let v = self.value(x);
        match self.sense {
            Sense::Positive => v > 0.0,
            Sense::NonPositive => v <= 0.0,
        }
    }
}

/// One halfspace per code bit, in span-input coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionConstraints {
    pub halfspaces: Vec<Halfspace>,
    pub span: LayerSpan,
}

impl RegionConstraints {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.satisfied(x))
    }
}

fn check_code(net: &PwlNetwork, code: &SplineCode) -> Result<()> {
    let (offsets, m) = code.span.layout(net)?;
    if m != code.len || offsets != code.layer_offsets {
        return Err(Error::SpanMismatch(format!(
            "code has {} bits but span {:?} of this network needs {m}",
            code.len, code.span
        )));
    }
    Ok(())
}

/// Composes the span's layers with inactive rows zeroed, collecting the
/// pre-activation of every Relu neuron as an affine function of span input.
fn masked_composition(net: &PwlNetwork, code: &SplineCode) -> Result<(RegionAffine, Vec<Halfspace>)> {
    check_code(net, code)?;
    let span = code.span;
    let dim = net.dim_into(span.start)?;
    let mut a = Matrix::identity(dim);
    let mut b = vec![0.0; dim];
    let mut halfspaces = Vec::with_capacity(code.len);
    let mut bit = 0;
    for l in span.layers() {
        let layer = &net.layers()[l];
        let mut next_a = layer.weights().matmul(&a);
        let mut next_b = layer.pre_activation(&b);
        if layer.activation() == ActivationKind::Relu {
            for (r, offset) in next_b.iter_mut().enumerate() {
                let on = code.bit(bit);
                bit += 1;
                halfspaces.push(Halfspace {
                    normal: next_a.row(r).to_vec(),
                    offset: *offset,
                    sense: if on { Sense::Positive } else { Sense::NonPositive },
                });
                if !on {
                    next_a.row_mut(r).iter_mut().for_each(|v| *v = 0.0);
                    *offset = 0.0;
                }
            }
        }
        a = next_a;
        b = next_b;
    }
    Ok((RegionAffine { a, b, span }, halfspaces))
}

/// Affine map of the polytope named by `code`.
///
/// Computed algebraically, so codes no input realizes still get a map.
pub fn region_affine(net: &PwlNetwork, code: &SplineCode) -> Result<RegionAffine> {
    Ok(masked_composition(net, code)?.0)
}

pub fn region_constraints(net: &PwlNetwork, code: &SplineCode) -> Result<RegionConstraints> {
    let (ra, halfspaces) = masked_composition(net, code)?;
    Ok(RegionConstraints {
        halfspaces,
        span: ra.span,
    })
}

/// Frobenius distance between two region maps, counting the bias as an
/// extra column.
pub fn region_affine_distance(r1: &RegionAffine, r2: &RegionAffine) -> Result<f64> {
    if r1.a.rows() != r2.a.rows() || r1.a.cols() != r2.a.cols() || r1.b.len() != r2.b.len() {
        return Err(Error::DimensionMismatch {
            expected: r1.a.rows() * r1.a.cols(),
            got: r2.a.rows() * r2.a.cols(),
        });
    }
    let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    Ok((sq(r1.a.as_slice(), r2.a.as_slice()) + sq(&r1.b, &r2.b)).sqrt())
}

/// Per-neuron membership probabilities of the active piece.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCode {
    pub probabilities: Vec<f64>,
    pub temperature: f64,
    pub span: LayerSpan,
}

impl SoftCode {
    /// Rounds at 0.5; exactly 0.5 rounds to inactive like a zero pre-activation.
    pub fn round(&self, layer_offsets: Vec<usize>) -> Result<SplineCode> {
        let bits: Vec<bool> = self.probabilities.iter().map(|&p| p > 0.5).collect();
        SplineCode::from_bits(&bits, self.span, layer_offsets)
    }
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "temperature must be positive and finite, got {t}"
        )))
    }
}

/// `probability_i = logistic(β · pre_i)` for every Relu neuron in the span.
pub fn soft_code(trace: &ActivationTrace, span: LayerSpan, temperature: f64) -> Result<SoftCode> {
    check_temperature(temperature)?;
    // Validates coverage the same way hard extraction does.
    extract_code(trace, span)?;
    let probabilities = span
        .layers()
        .map(|l| l - trace.first_layer)
        .filter(|&i| trace.activations[i] == ActivationKind::Relu)
        .flat_map(|i| trace.pre_activation[i].iter())
        .map(|&z| logistic(temperature * z))
        .collect();
    Ok(SoftCode {
        probabilities,
        temperature,
        span,
    })
}

/// Soft ReLU layer: each output is the active piece weighted by its
/// membership probability, `p_i · (w_i·x + b_i)`.
pub fn soft_region_map(layer: &Layer, x: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    if layer.activation() != ActivationKind::Relu {
        return Err(Error::InvalidArgument(
            "soft region map needs a Relu layer".into(),
        ));
    }
    check_dim(layer.fan_in(), x.len())?;
    Ok(layer
        .pre_activation(x)
        .into_iter()
        .map(|z| logistic(temperature * z) * z)
        .collect())
}
