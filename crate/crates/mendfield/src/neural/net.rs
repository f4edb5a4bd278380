//! The autodecoder MLP: input `[code ‖ point]`, ReLU hidden layers with one
//! skip re-concatenation of the input, and three heads — an occupancy logit
//! (sigmoid), an SDF bounded to the label clamp range by a scaled tanh, and
//! a normalized normal field.
//!
//! All parameters live in one flat `f64` vector with a fixed layout derived
//! from the [`Architecture`], which keeps the optimizer, checkpoints, and
//! finite-difference tests trivial. Batched layer products go through
//! `matrixmultiply`; every reduction is sequential, so outputs are
//! bit-reproducible.

use matrixmultiply::dgemm;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::sampling::SDF_CLAMP;

/// Divisor floor for normal-head normalization.
const NF_NORM_EPS: f64 = 1e-8;

/// MLP shape: everything needed to lay out the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// Latent-code length `p` (the network input is `p + 3` wide).
    pub code_dim: usize,
    pub hidden_width: usize,
    /// Number of hidden layers.
    pub depth: usize,
    /// The hidden layer (0-based) whose input is `[activation ‖ input]`.
    pub skip_layer: usize,
}

impl Architecture {
    /// Full-scale shape for the complete-shape network.
    pub fn complete_default() -> Self {
        Architecture {
            code_dim: 128,
            hidden_width: 512,
            depth: 8,
            skip_layer: 4,
        }
    }

    /// Full-scale shape for the break-shape network.
    pub fn break_default() -> Self {
        Architecture {
            code_dim: 64,
            ..Architecture::complete_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.code_dim == 0 || self.hidden_width == 0 || self.depth == 0 {
            return Err(Error::InvalidConfig(format!(
                "network architecture must have positive dimensions, got {self:?}"
            )));
        }
        if !(1..self.depth).contains(&self.skip_layer) {
            return Err(Error::InvalidConfig(format!(
                "skip layer {} must name an interior hidden layer (1..{})",
                self.skip_layer, self.depth
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.code_dim + 3
    }

    /// (in, out) of each hidden layer, in order.
    fn hidden_dims(&self) -> Vec<(usize, usize)> {
        let d = self.input_dim();
        let w = self.hidden_width;
        (0..self.depth)
            .map(|i| {
                let input = if i == 0 {
                    d
                } else if i == self.skip_layer {
                    w + d
                } else {
                    w
                };
                (input, w)
            })
            .collect()
    }

    /// All linear layers in parameter-vector order: hidden layers, then the
    /// occupancy, SDF, and normal heads.
    fn layer_views(&self) -> Vec<View> {
        let mut views = Vec::with_capacity(self.depth + 3);
        let mut offset = 0;
        let mut push = |offset: &mut usize, in_dim: usize, out_dim: usize| {
            let v = View {
                w_off: *offset,
                b_off: *offset + in_dim * out_dim,
                in_dim,
                out_dim,
            };
            *offset += in_dim * out_dim + out_dim;
            views.push(v);
        };
        for (in_dim, out_dim) in self.hidden_dims() {
            push(&mut offset, in_dim, out_dim);
        }
        push(&mut offset, self.hidden_width, 1); // occ
        push(&mut offset, self.hidden_width, 1); // sdf
        push(&mut offset, self.hidden_width, 3); // nf
        views
    }

    pub fn param_count(&self) -> usize {
        let last = self.layer_views();
        let v = last.last().unwrap();
        v.b_off + v.out_dim
    }
}

/// One linear layer's slice positions inside the flat parameter vector.
/// Weights are row-major `[out][in]`, followed by the bias.
#[derive(Debug, Clone, Copy)]
struct View {
    w_off: usize,
    b_off: usize,
    in_dim: usize,
    out_dim: usize,
}

/// Which heads participate in forward outputs and losses. Disabled heads
/// return sentinels (occupancy ½, SDF 0, normal +z) and receive no
/// gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureMask {
    pub occ: bool,
    pub sdf: bool,
    pub nf: bool,
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask {
            occ: true,
            sdf: true,
            nf: true,
        }
    }
}

impl FeatureMask {
    pub fn all() -> Self {
        FeatureMask::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.occ || self.sdf || self.nf) {
            return Err(Error::InvalidConfig(
                "feature mask disables every head; nothing to learn".into(),
            ));
        }
        Ok(())
    }
}

/// The autodecoder network: architecture plus the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    params: Vec<f64>,
}

/// Batched forward outputs plus the activation caches backward needs.
pub struct Forward {
    n: usize,
    mask: FeatureMask,
    /// `n × input_dim` input rows `[z ‖ x]`.
    input: Vec<f64>,
    /// Post-ReLU activations per hidden layer (`n × width`); empty when the
    /// forward was evaluation-only.
    hidden: Vec<Vec<f64>>,
    /// Occupancy logits (pre-sigmoid).
    pub occ_logit: Vec<f64>,
    /// Occupancies in (0, 1).
    pub occ: Vec<f64>,
    /// Bounded SDF predictions.
    pub sdf: Vec<f64>,
    nf_raw: Vec<f64>,
    /// Normalized normals, `n × 3` row-major.
    pub nf: Vec<f64>,
}

impl Forward {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mask(&self) -> FeatureMask {
        self.mask
    }

    pub fn nf_at(&self, i: usize) -> Vec3 {
        Vec3::new(self.nf[3 * i], self.nf[3 * i + 1], self.nf[3 * i + 2])
    }

    /// A cache-free `Forward` with the given head outputs, for exercising
    /// loss code against hand-picked predictions. Occupancies are derived
    /// from the logits; `backward` cannot run on it.
    pub fn synthetic(mask: FeatureMask, occ_logit: Vec<f64>, sdf: Vec<f64>, nf: Vec<f64>) -> Forward {
        let n = sdf.len();
        assert_eq!(occ_logit.len(), n);
        assert_eq!(nf.len(), 3 * n);
        let occ = occ_logit.iter().map(|&u| crate::math::sigmoid(u)).collect();
        Forward {
            n,
            mask,
            input: Vec::new(),
            hidden: Vec::new(),
            occ_logit,
            occ,
            sdf,
            nf_raw: Vec::new(),
            nf,
        }
    }
}

/// Loss gradients with respect to the head outputs, ready for the backward
/// pass: occupancy per logit, SDF per bounded output, normals per
/// normalized output (`n × 3` row-major). Disabled heads are ignored.
pub struct HeadGrads {
    pub d_occ_logit: Vec<f64>,
    pub d_sdf: Vec<f64>,
    pub d_nf: Vec<f64>,
}

impl HeadGrads {
    pub fn zeros(n: usize) -> Self {
        HeadGrads {
            d_occ_logit: vec![0.0; n],
            d_sdf: vec![0.0; n],
            d_nf: vec![0.0; 3 * n],
        }
    }

    /// Accumulates another loss term's head gradients over the same batch.
    pub fn add(&mut self, other: &HeadGrads) {
        assert_eq!(self.d_occ_logit.len(), other.d_occ_logit.len());
        for (a, b) in self.d_occ_logit.iter_mut().zip(&other.d_occ_logit) {
            *a += b;
        }
        for (a, b) in self.d_sdf.iter_mut().zip(&other.d_sdf) {
            *a += b;
        }
        for (a, b) in self.d_nf.iter_mut().zip(&other.d_nf) {
            *a += b;
        }
    }
}

/// Gradients mirrored to a network's parameters plus one latent code.
pub struct Gradients {
    pub params: Vec<f64>,
    pub code: Vec<f64>,
}

impl Network {
    /// Initializes with Normal(0, 1/√fan_in) weights and zero biases.
    pub fn init<R: Rng>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut params = vec![0.0; arch.param_count()];
        for view in arch.layer_views() {
            let std = 1.0 / (view.in_dim as f64).sqrt();
            for w in &mut params[view.w_off..view.b_off] {
                *w = rng.sample::<f64, _>(StandardNormal) * std;
            }
        }
        Ok(Network { arch, params })
    }

    /// Rebuilds a network from stored parameters.
    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: arch.param_count(),
                got: params.len(),
                context: "network parameter vector".into(),
            });
        }
        Ok(Network { arch, params })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check_code(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.arch.code_dim {
            return Err(Error::DimensionMismatch {
                expected: self.arch.code_dim,
                got: z.len(),
                context: "latent code".into(),
            });
        }
        Ok(())
    }

    /// Single-point forward: (occupancy, SDF, unit normal).
    pub fn forward_one(&self, z: &[f64], p: Vec3, mask: FeatureMask) -> Result<(f64, f64, Vec3)> {
        let fwd = self.forward_eval(z, &[p], mask)?;
        Ok((fwd.occ[0], fwd.sdf[0], fwd.nf_at(0)))
    }

    /// Batched forward keeping the activation caches for [`Network::backward`].
    pub fn forward_batch(&self, z: &[f64], points: &[Vec3], mask: FeatureMask) -> Result<Forward> {
        self.forward_impl(z, points, mask, true)
    }

    /// Batched forward without caches — for inference-time field queries.
    pub fn forward_eval(&self, z: &[f64], points: &[Vec3], mask: FeatureMask) -> Result<Forward> {
        self.forward_impl(z, points, mask, false)
    }

    fn forward_impl(
        &self,
        z: &[f64],
        points: &[Vec3],
        mask: FeatureMask,
        keep: bool,
    ) -> Result<Forward> {
        self.check_code(z)?;
        let n = points.len();
        let d = self.arch.input_dim();
        let w = self.arch.hidden_width;
        let views = self.arch.layer_views();

        let mut input = Vec::with_capacity(n * d);
        for p in points {
            input.extend_from_slice(z);
            input.extend_from_slice(&[p.x, p.y, p.z]);
        }

        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(if keep { self.arch.depth } else { 0 });
        let mut scratch = Vec::new(); // previous activation when not keeping
        let mut concat = Vec::new();
        for (i, view) in views[..self.arch.depth].iter().enumerate() {
            let x: &[f64] = if i == 0 {
                &input
            } else if i == self.arch.skip_layer {
                // [h ‖ input] rows.
                let prev: &[f64] = if keep { &hidden[i - 1] } else { &scratch };
                concat.clear();
                concat.reserve(n * (w + d));
                for r in 0..n {
                    concat.extend_from_slice(&prev[r * w..(r + 1) * w]);
                    concat.extend_from_slice(&input[r * d..(r + 1) * d]);
                }
                &concat
            } else if keep {
                &hidden[i - 1]
            } else {
                &scratch
            };
            let mut y = self.linear(x, n, view);
            for v in &mut y {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            if keep {
                hidden.push(y);
            } else {
                scratch = y;
            }
        }
        let last: &[f64] = if keep {
            &hidden[self.arch.depth - 1]
        } else {
            &scratch
        };

        let (mut occ_logit, mut occ) = (vec![0.0; n], vec![0.5; n]);
        if mask.occ {
            occ_logit = self.linear(last, n, &views[self.arch.depth]);
            for (o, u) in occ.iter_mut().zip(&occ_logit) {
                *o = crate::math::sigmoid(*u);
            }
        }

        let mut sdf = vec![0.0; n];
        if mask.sdf {
            let sdf_raw = self.linear(last, n, &views[self.arch.depth + 1]);
            for (s, u) in sdf.iter_mut().zip(&sdf_raw) {
                *s = SDF_CLAMP * (u / SDF_CLAMP).tanh();
            }
        }

        let mut nf_raw = vec![0.0; 3 * n];
        let mut nf = vec![0.0; 3 * n];
        for row in nf.chunks_exact_mut(3) {
            row[2] = 1.0;
        }
        if mask.nf {
            nf_raw = self.linear(last, n, &views[self.arch.depth + 2]);
            for (out, raw) in nf.chunks_exact_mut(3).zip(nf_raw.chunks_exact(3)) {
                let m = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2])
                    .sqrt()
                    .max(NF_NORM_EPS);
                out[0] = raw[0] / m;
                out[1] = raw[1] / m;
                out[2] = raw[2] / m;
            }
        }

        Ok(Forward {
            n,
            mask,
            input,
            hidden,
            occ_logit,
            occ,
            sdf,
            nf_raw,
            nf,
        })
    }

    /// Exact reverse-mode gradients of a scalar loss whose head-output
    /// derivatives are given, for the parameters and the shared latent code.
    /// The forward must have been produced by [`Network::forward_batch`].
    pub fn backward(&self, fwd: &Forward, head: &HeadGrads) -> Gradients {
        assert!(
            !fwd.hidden.is_empty(),
            "backward needs a forward pass that kept its caches"
        );
        let n = fwd.n;
        let d = self.arch.input_dim();
        let w = self.arch.hidden_width;
        let views = self.arch.layer_views();
        let mut grads = vec![0.0; self.params.len()];
        let last = &fwd.hidden[self.arch.depth - 1];

        // Chain each head's output gradient through its activation, then
        // through its linear layer into the last hidden activation.
        let mut d_last = vec![0.0; n * w];
        if fwd.mask.occ {
            self.linear_backward(
                &head.d_occ_logit,
                last,
                n,
                &views[self.arch.depth],
                &mut grads,
                &mut d_last,
            );
        }
        if fwd.mask.sdf {
            let mut du = vec![0.0; n];
            for i in 0..n {
                let t = fwd.sdf[i] / SDF_CLAMP; // tanh(u / clamp)
                du[i] = head.d_sdf[i] * (1.0 - t * t);
            }
            self.linear_backward(&du, last, n, &views[self.arch.depth + 1], &mut grads, &mut d_last);
        }
        if fwd.mask.nf {
            let mut dv = vec![0.0; 3 * n];
            for i in 0..n {
                let raw = &fwd.nf_raw[3 * i..3 * i + 3];
                let out = &fwd.nf[3 * i..3 * i + 3];
                let dn = &head.d_nf[3 * i..3 * i + 3];
                let m2 = raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2];
                let m = m2.sqrt();
                if m > NF_NORM_EPS {
                    let dot = out[0] * dn[0] + out[1] * dn[1] + out[2] * dn[2];
                    for k in 0..3 {
                        dv[3 * i + k] = (dn[k] - out[k] * dot) / m;
                    }
                } else {
                    for k in 0..3 {
                        dv[3 * i + k] = dn[k] / NF_NORM_EPS;
                    }
                }
            }
            self.linear_backward(&dv, last, n, &views[self.arch.depth + 2], &mut grads, &mut d_last);
        }

        // Walk the hidden stack in reverse. d_input accumulates both the
        // first layer's contribution and the skip concatenation's.
        let mut d_input = vec![0.0; n * d];
        let mut d_out = d_last;
        for i in (0..self.arch.depth).rev() {
            // ReLU: the stored activation is post-ReLU, so zero output means
            // zero gradient.
            let h = &fwd.hidden[i];
            for (g, &a) in d_out.iter_mut().zip(h) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            let view = &views[i];
            if i == 0 {
                let mut dx = vec![0.0; n * d];
                self.linear_backward(&d_out, &fwd.input, n, view, &mut grads, &mut dx);
                for (acc, g) in d_input.iter_mut().zip(&dx) {
                    *acc += g;
                }
            } else if i == self.arch.skip_layer {
                // Rebuild the concatenated input rows, then split the
                // incoming gradient back into the two halves.
                let prev = &fwd.hidden[i - 1];
                let mut concat = Vec::with_capacity(n * (w + d));
                for r in 0..n {
                    concat.extend_from_slice(&prev[r * w..(r + 1) * w]);
                    concat.extend_from_slice(&fwd.input[r * d..(r + 1) * d]);
                }
                let mut dcat = vec![0.0; n * (w + d)];
                self.linear_backward(&d_out, &concat, n, view, &mut grads, &mut dcat);
                let mut dprev = vec![0.0; n * w];
                for r in 0..n {
                    dprev[r * w..(r + 1) * w].copy_from_slice(&dcat[r * (w + d)..r * (w + d) + w]);
                    for k in 0..d {
                        d_input[r * d + k] += dcat[r * (w + d) + w + k];
                    }
                }
                d_out = dprev;
            } else {
                let prev = &fwd.hidden[i - 1];
                let mut dprev = vec![0.0; n * w];
                self.linear_backward(&d_out, prev, n, view, &mut grads, &mut dprev);
                d_out = dprev;
            }
        }

        // The code occupies the first `code_dim` entries of every input row.
        let mut code = vec![0.0; self.arch.code_dim];
        for r in 0..n {
            for (k, c) in code.iter_mut().enumerate() {
                *c += d_input[r * d + k];
            }
        }
        Gradients {
            params: grads,
            code,
        }
    }

    /// `y = x · Wᵀ + b` for `n` row-major rows.
    fn linear(&self, x: &[f64], n: usize, view: &View) -> Vec<f64> {
        let (iw, ow) = (view.in_dim, view.out_dim);
        debug_assert_eq!(x.len(), n * iw);
        let w = &self.params[view.w_off..view.b_off];
        let b = &self.params[view.b_off..view.b_off + ow];
        let mut y = vec![0.0; n * ow];
        if n > 0 {
            unsafe {
                dgemm(
                    n,
                    iw,
                    ow,
                    1.0,
                    x.as_ptr(),
                    iw as isize,
                    1,
                    w.as_ptr(),
                    1,
                    iw as isize,
                    0.0,
                    y.as_mut_ptr(),
                    ow as isize,
                    1,
                );
            }
        }
        for row in y.chunks_exact_mut(ow) {
            for (v, bias) in row.iter_mut().zip(b) {
                *v += bias;
            }
        }
        y
    }

    /// Given dL/dy and the layer input, accumulates dL/dW and dL/db into
    /// `grads` and dL/dx into `dx` (added, not overwritten).
    fn linear_backward(
        &self,
        dy: &[f64],
        x: &[f64],
        n: usize,
        view: &View,
        grads: &mut [f64],
        dx: &mut [f64],
    ) {
        let (iw, ow) = (view.in_dim, view.out_dim);
        debug_assert_eq!(dy.len(), n * ow);
        debug_assert_eq!(x.len(), n * iw);
        debug_assert_eq!(dx.len(), n * iw);
        if n == 0 {
            return;
        }
        let (dw, rest) = grads[view.w_off..].split_at_mut(iw * ow);
        let db = &mut rest[..ow];
        unsafe {
            // dW += dyᵀ · x  (out × in)
            dgemm(
                ow,
                n,
                iw,
                1.0,
                dy.as_ptr(),
                1,
                ow as isize,
                x.as_ptr(),
                iw as isize,
                1,
                1.0,
                dw.as_mut_ptr(),
                iw as isize,
                1,
            );
            // dx += dy · W  (n × in)
            let w = &self.params[view.w_off..view.b_off];
            dgemm(
                n,
                ow,
                iw,
                1.0,
                dy.as_ptr(),
                ow as isize,
                1,
                w.as_ptr(),
                iw as isize,
                1,
                1.0,
                dx.as_mut_ptr(),
                iw as isize,
                1,
            );
        }
        for row in dy.chunks_exact(ow) {
            for (acc, g) in db.iter_mut().zip(row) {
                *acc += g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small_arch() -> Architecture {
        Architecture {
            code_dim: 6,
            hidden_width: 16,
            depth: 4,
            skip_layer: 2,
        }
    }

    fn random_points(rng: &mut ChaCha20Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                )
            })
            .collect()
    }

    fn random_code(rng: &mut ChaCha20Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-0.05..0.05)).collect()
    }

    #[test]
    fn architecture_validation() {
        assert!(Architecture::complete_default().validate().is_ok());
        assert!(Architecture::break_default().validate().is_ok());
        let bad = Architecture {
            skip_layer: 0,
            ..small_arch()
        };
        assert!(bad.validate().is_err());
        let bad = Architecture {
            skip_layer: 4,
            ..small_arch()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn param_count_matches_layout() {
        let a = small_arch();
        let d = a.input_dim(); // 9
        let w = a.hidden_width; // 16
        let expected = (d * w + w)        // layer 0
            + (w * w + w)                 // layer 1
            + ((w + d) * w + w)           // layer 2 (skip)
            + (w * w + w)                 // layer 3
            + (w + 1)                     // occ head
            + (w + 1)                     // sdf head
            + (w * 3 + 3); // nf head
        assert_eq!(a.param_count(), expected);
    }

    #[test]
    fn zero_network_outputs_sentinel_values() {
        let arch = small_arch();
        let net = Network::from_params(arch, vec![0.0; arch.param_count()]).unwrap();
        let z = vec![0.0; arch.code_dim];
        let (occ, sdf, _nf) = net
            .forward_one(&z, Vec3::new(0.1, 0.2, 0.3), FeatureMask::all())
            .unwrap();
        assert_relative_eq!(occ, 0.5);
        assert_relative_eq!(sdf, 0.0);
    }

    #[test]
    fn nf_outputs_are_unit() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let net = Network::init(small_arch(), &mut rng).unwrap();
        let z = random_code(&mut rng, 6);
        let fwd = net
            .forward_eval(&z, &random_points(&mut rng, 64), FeatureMask::all())
            .unwrap();
        for i in 0..fwd.len() {
            assert_relative_eq!(fwd.nf_at(i).norm(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn sdf_outputs_stay_in_clamp_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut net = Network::init(small_arch(), &mut rng).unwrap();
        // Inflate parameters to force saturation.
        for p in net.params_mut() {
            *p *= 100.0;
        }
        let z = random_code(&mut rng, 6);
        let fwd = net
            .forward_eval(&z, &random_points(&mut rng, 64), FeatureMask::all())
            .unwrap();
        for &s in &fwd.sdf {
            assert!(s.abs() <= SDF_CLAMP, "sdf {s} out of range");
            assert!(s.is_finite());
        }
        for &o in &fwd.occ {
            assert!((0.0..=1.0).contains(&o) && o.is_finite());
        }
    }

    #[test]
    fn forward_is_reproducible() {
        let mut r1 = ChaCha20Rng::seed_from_u64(7);
        let mut r2 = ChaCha20Rng::seed_from_u64(7);
        let n1 = Network::init(small_arch(), &mut r1).unwrap();
        let n2 = Network::init(small_arch(), &mut r2).unwrap();
        assert_eq!(n1, n2);
        let z = vec![0.01; 6];
        let p = Vec3::new(0.3, -0.2, 0.1);
        let a = n1.forward_one(&z, p, FeatureMask::all()).unwrap();
        let b = n2.forward_one(&z, p, FeatureMask::all()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_forward_matches_single_points() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let net = Network::init(small_arch(), &mut rng).unwrap();
        let z = random_code(&mut rng, 6);
        let points = random_points(&mut rng, 17);
        let fwd = net.forward_batch(&z, &points, FeatureMask::all()).unwrap();
        for (i, p) in points.iter().enumerate() {
            let (occ, sdf, nf) = net.forward_one(&z, *p, FeatureMask::all()).unwrap();
            assert_relative_eq!(occ, fwd.occ[i], epsilon = 1e-12);
            assert_relative_eq!(sdf, fwd.sdf[i], epsilon = 1e-12);
            assert_relative_eq!((nf - fwd.nf_at(i)).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn wrong_code_length_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let net = Network::init(small_arch(), &mut rng).unwrap();
        let err = net
            .forward_one(&[0.0; 5], Vec3::zeros(), FeatureMask::all())
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    /// Scalar functional linear in the head outputs, so its head gradients
    /// are the fixed coefficient vectors.
    fn linear_functional(fwd: &Forward, co: &[f64], cs: &[f64], cn: &[f64]) -> f64 {
        let mut l = 0.0;
        for i in 0..fwd.len() {
            l += co[i] * fwd.occ_logit[i] + cs[i] * fwd.sdf[i];
            for k in 0..3 {
                l += cn[3 * i + k] * fwd.nf[3 * i + k];
            }
        }
        l
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let arch = small_arch();
        let mut net = Network::init(arch, &mut rng).unwrap();
        let z = random_code(&mut rng, arch.code_dim);
        let points = random_points(&mut rng, 24);
        let n = points.len();
        let co: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cn: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let fwd = net.forward_batch(&z, &points, FeatureMask::all()).unwrap();
        let head = HeadGrads {
            d_occ_logit: co.clone(),
            d_sdf: cs.clone(),
            d_nf: cn.clone(),
        };
        let grads = net.backward(&fwd, &head);

        let h = 1e-5;
        let n_params = net.param_count();
        for trial in 0..100 {
            let idx = (trial * 7919 + 13) % n_params;
            let orig = net.params()[idx];
            net.params_mut()[idx] = orig + h;
            let lp = linear_functional(
                &net.forward_batch(&z, &points, FeatureMask::all()).unwrap(),
                &co,
                &cs,
                &cn,
            );
            net.params_mut()[idx] = orig - h;
            let lm = linear_functional(
                &net.forward_batch(&z, &points, FeatureMask::all()).unwrap(),
                &co,
                &cs,
                &cn,
            );
            net.params_mut()[idx] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let an = grads.params[idx];
            let scale = fd.abs().max(an.abs()).max(1e-6);
            assert!(
                (fd - an).abs() / scale < 1e-3,
                "param {idx}: fd {fd} vs analytic {an}"
            );
        }

        // Latent-code gradient the same way.
        let mut z_var = z.clone();
        for k in 0..arch.code_dim {
            let orig = z_var[k];
            z_var[k] = orig + h;
            let lp = linear_functional(
                &net.forward_batch(&z_var, &points, FeatureMask::all()).unwrap(),
                &co,
                &cs,
                &cn,
            );
            z_var[k] = orig - h;
            let lm = linear_functional(
                &net.forward_batch(&z_var, &points, FeatureMask::all()).unwrap(),
                &co,
                &cs,
                &cn,
            );
            z_var[k] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let an = grads.code[k];
            let scale = fd.abs().max(an.abs()).max(1e-6);
            assert!(
                (fd - an).abs() / scale < 1e-3,
                "code {k}: fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn disabled_heads_get_sentinels_and_zero_gradients() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let arch = small_arch();
        let net = Network::init(arch, &mut rng).unwrap();
        let z = random_code(&mut rng, arch.code_dim);
        let points = random_points(&mut rng, 8);
        let mask = FeatureMask {
            occ: false,
            sdf: true,
            nf: false,
        };
        let fwd = net.forward_batch(&z, &points, mask).unwrap();
        for i in 0..fwd.len() {
            assert_eq!(fwd.occ[i], 0.5);
            assert_eq!(fwd.nf_at(i), Vec3::new(0.0, 0.0, 1.0));
        }

        let mut head = HeadGrads::zeros(points.len());
        head.d_sdf.iter_mut().for_each(|g| *g = 1.0);
        // Even nonzero upstream values on disabled heads must be ignored.
        head.d_occ_logit.iter_mut().for_each(|g| *g = 5.0);
        head.d_nf.iter_mut().for_each(|g| *g = 5.0);
        let grads = net.backward(&fwd, &head);

        let views = arch.layer_views();
        let occ_view = &views[arch.depth];
        let nf_view = &views[arch.depth + 2];
        let occ_region = occ_view.w_off..occ_view.b_off + occ_view.out_dim;
        let nf_region = nf_view.w_off..nf_view.b_off + nf_view.out_dim;
        assert!(grads.params[occ_region].iter().all(|&g| g == 0.0));
        assert!(grads.params[nf_region].iter().all(|&g| g == 0.0));
        // The sdf path still produces gradient somewhere.
        assert!(grads.params.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn empty_feature_mask_is_invalid() {
        let mask = FeatureMask {
            occ: false,
            sdf: false,
            nf: false,
        };
        assert!(matches!(mask.validate(), Err(Error::InvalidConfig(_))));
    }
}
