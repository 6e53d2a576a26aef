use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AgeNormalizer, FeatureLayout, ModelConfig};
use crate::error::{Error, Result};
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln(1 + e^v)` without overflow.
#[inline]
pub fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn inverse_softplus(w: f64) -> f64 {
    w + (-(-w).exp_m1()).ln()
}

/// Fully connected layer; `weight` is `n_out x n_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            n_in,
            n_out,
            weight: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn random(n_in: usize, n_out: usize, scale: f64, rng: &mut Rng) -> Self {
        let std = scale * (2.0 / n_in as f64).sqrt();
        let weight = (0..n_in * n_out)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Dense {
            n_in,
            n_out,
            weight,
            bias: vec![0.0; n_out],
        }
    }

    #[inline]
    pub fn forward(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weight.chunks_exact(self.n_in).zip(&self.bias))
        {
            *o = b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients into `grad` and, if requested,
    /// writes the gradient with respect to `input` into `grad_in`.
    #[inline]
    fn backward(&self, input: &[f64], grad_out: &[f64], grad: &mut Dense, grad_in: Option<&mut [f64]>) {
        for ((g, gw), gb) in grad_out
            .iter()
            .zip(grad.weight.chunks_exact_mut(self.n_in))
            .zip(grad.bias.iter_mut())
        {
            if *g == 0.0 {
                continue;
            }
            *gb += g;
            for (w, x) in gw.iter_mut().zip(input) {
                *w += g * x;
            }
        }
        if let Some(gi) = grad_in {
            gi.iter_mut().for_each(|v| *v = 0.0);
            for (g, row) in grad_out.iter().zip(self.weight.chunks_exact(self.n_in)) {
                if *g == 0.0 {
                    continue;
                }
                for (acc, w) in gi.iter_mut().zip(row) {
                    *acc += g * w;
                }
            }
        }
    }

    fn blocks(&self) -> [&Vec<f64>; 2] {
        [&self.weight, &self.bias]
    }

    fn blocks_mut(&mut self) -> [&mut Vec<f64>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// All learned parameters. Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Hidden encoder layers; the first takes `[x, normalized t]`.
    pub encoder: Vec<Dense>,
    pub mu_head: Dense,
    pub log_var_head: Dense,
    /// Unconstrained monotone coefficients, indexed `[j][k][s]`
    /// (path feature, rate dimension, degree); the coefficient itself is
    /// `softplus` of this value.
    pub monotone_raw: Vec<f64>,
    pub monotone_bias: Vec<f64>,
    /// Hidden layers of the network path; the first takes normalized
    /// biological ages.
    pub decoder: Vec<Dense>,
    pub decoder_out: Dense,
    /// Per-feature log-variance of the observation noise.
    pub noise_log_var: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig, layout: &FeatureLayout) -> Self {
        let m = layout.n_features();
        let mut encoder = Vec::new();
        let mut width = m + 1;
        for &w in &cfg.encoder_widths {
            encoder.push(Dense::zeros(width, w));
            width = w;
        }
        let mu_head = Dense::zeros(width, cfg.n_dims);
        let log_var_head = Dense::zeros(width, cfg.n_dims);
        let mut decoder = Vec::new();
        let mut width = cfg.n_dims;
        for &w in &cfg.decoder_widths {
            decoder.push(Dense::zeros(width, w));
            width = w;
        }
        ModelParams {
            encoder,
            mu_head,
            log_var_head,
            monotone_raw: vec![0.0; layout.monotone.len() * cfg.n_dims * cfg.poly_degrees.len()],
            monotone_bias: vec![0.0; layout.monotone.len()],
            decoder,
            decoder_out: Dense::zeros(width, layout.network.len()),
            noise_log_var: vec![0.0; m],
        }
    }

    /// He-scaled random layers, small output heads, equal-share monotone
    /// coefficients with jitter, and monotone biases that centre the
    /// initial reconstruction over the given scaled ages.
    pub fn init(
        cfg: &ModelConfig,
        layout: &FeatureLayout,
        t_train: &[f64],
        rng: &mut Rng,
    ) -> Self {
        let mut p = ModelParams::zeros(cfg, layout);
        for layer in &mut p.encoder {
            *layer = Dense::random(layer.n_in, layer.n_out, 1.0, rng);
        }
        p.mu_head = Dense::random(p.mu_head.n_in, p.mu_head.n_out, 0.1, rng);
        p.log_var_head = Dense::random(p.log_var_head.n_in, p.log_var_head.n_out, 0.1, rng);
        for layer in &mut p.decoder {
            *layer = Dense::random(layer.n_in, layer.n_out, 1.0, rng);
        }
        p.decoder_out = Dense::random(p.decoder_out.n_in, p.decoder_out.n_out, 0.5, rng);

        let share = inverse_softplus(1.0 / cfg.n_dims as f64);
        for v in &mut p.monotone_raw {
            *v = share + rng.random_range(-0.5..0.5);
        }
        let per_feature = cfg.n_dims * cfg.poly_degrees.len();
        let mean_basis: Vec<f64> = cfg
            .poly_degrees
            .iter()
            .map(|s| {
                t_train.iter().map(|t| signed_pow(*t, *s)).sum::<f64>() / t_train.len().max(1) as f64
            })
            .collect();
        for (jj, sign) in layout.signs.iter().enumerate() {
            let coeffs = &p.monotone_raw[jj * per_feature..(jj + 1) * per_feature];
            let mean_out: f64 = coeffs
                .chunks_exact(cfg.poly_degrees.len())
                .map(|per_dim| {
                    per_dim
                        .iter()
                        .zip(&mean_basis)
                        .map(|(v, b)| softplus(*v) * b)
                        .sum::<f64>()
                })
                .sum();
            p.monotone_bias[jj] = -sign * mean_out;
        }
        p
    }

    pub fn check_shapes(&self, cfg: &ModelConfig, layout: &FeatureLayout) -> Result<()> {
        let want = ModelParams::zeros(cfg, layout);
        let got: Vec<usize> = self.blocks().iter().map(|b| b.len()).collect();
        let exp: Vec<usize> = want.blocks().iter().map(|b| b.len()).collect();
        if got != exp {
            return Err(Error::InvalidInput(
                "parameter shapes do not match the model configuration".into(),
            ));
        }
        Ok(())
    }

    fn blocks(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for l in &self.encoder {
            out.extend(l.blocks());
        }
        out.extend(self.mu_head.blocks());
        out.extend(self.log_var_head.blocks());
        out.push(&self.monotone_raw);
        out.push(&self.monotone_bias);
        for l in &self.decoder {
            out.extend(l.blocks());
        }
        out.extend(self.decoder_out.blocks());
        out.push(&self.noise_log_var);
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for l in &mut self.encoder {
            out.extend(l.blocks_mut());
        }
        out.extend(self.mu_head.blocks_mut());
        out.extend(self.log_var_head.blocks_mut());
        out.push(&mut self.monotone_raw);
        out.push(&mut self.monotone_bias);
        for l in &mut self.decoder {
            out.extend(l.blocks_mut());
        }
        out.extend(self.decoder_out.blocks_mut());
        out.push(&mut self.noise_log_var);
        out
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for b in self.blocks() {
            out.extend_from_slice(b);
        }
        out
    }

    pub fn assign(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for b in self.blocks_mut() {
            let n = b.len();
            b.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    pub fn fill(&mut self, value: f64) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|v| *v = value);
        }
    }

    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Nonnegative monotone coefficients `w[j][k][s]`.
    pub fn monotone_coefficients(&self) -> Vec<f64> {
        self.monotone_raw.iter().map(|v| softplus(*v)).collect()
    }
}

#[inline]
fn signed_pow(u: f64, s: f64) -> f64 {
    u.signum() * u.abs().powf(s)
}

/// Per-batch constants derived from the parameters.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mono_w: Vec<f64>,
    pub mono_dw: Vec<f64>,
    pub inv_noise_var: Vec<f64>,
}

impl Prepared {
    pub fn new(p: &ModelParams) -> Self {
        Prepared {
            mono_w: p.monotone_raw.iter().map(|v| softplus(*v)).collect(),
            mono_dw: p.monotone_raw.iter().map(|v| sigmoid(*v)).collect(),
            inv_noise_var: p.noise_log_var.iter().map(|v| (-v).exp()).collect(),
        }
    }
}

/// Scratch buffers for one row's forward and backward pass.
#[derive(Debug, Clone)]
pub struct Workspace {
    enc: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
    z: Vec<f64>,
    pub r: Vec<f64>,
    a: Vec<f64>,
    basis: Vec<f64>,
    dbasis: Vec<f64>,
    dec: Vec<Vec<f64>>,
    net_out: Vec<f64>,
    pub xhat: Vec<f64>,
    g_xhat: Vec<f64>,
    g_a: Vec<f64>,
    g_net_out: Vec<f64>,
    g_dec: Vec<Vec<f64>>,
    g_enc: Vec<Vec<f64>>,
    g_mu: Vec<f64>,
    g_lv: Vec<f64>,
    g_tmp: Vec<f64>,
}

impl Workspace {
    pub fn new(params: &ModelParams, n_dims: usize, n_degrees: usize, n_features: usize) -> Self {
        let mut enc = vec![vec![0.0; params.encoder.first().map_or(params.mu_head.n_in, |l| l.n_in)]];
        enc.extend(params.encoder.iter().map(|l| vec![0.0; l.n_out]));
        let mut dec = vec![vec![0.0; n_dims]];
        dec.extend(params.decoder.iter().map(|l| vec![0.0; l.n_out]));
        let g_enc = enc.iter().map(|v| vec![0.0; v.len()]).collect();
        let g_dec = dec.iter().map(|v| vec![0.0; v.len()]).collect();
        let last_enc = enc.last().map_or(0, Vec::len);
        Workspace {
            enc,
            mu: vec![0.0; n_dims],
            log_var: vec![0.0; n_dims],
            z: vec![0.0; n_dims],
            r: vec![0.0; n_dims],
            a: vec![0.0; n_dims],
            basis: vec![0.0; n_dims * n_degrees],
            dbasis: vec![0.0; n_dims * n_degrees],
            dec,
            net_out: vec![0.0; params.decoder_out.n_out],
            xhat: vec![0.0; n_features],
            g_xhat: vec![0.0; n_features],
            g_a: vec![0.0; n_dims],
            g_net_out: vec![0.0; params.decoder_out.n_out],
            g_dec,
            g_enc,
            g_mu: vec![0.0; n_dims],
            g_lv: vec![0.0; n_dims],
            g_tmp: vec![0.0; last_enc],
        }
    }
}

/// Mean per-row loss terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Network structure needed to run the parameters.
pub(crate) struct Net<'a> {
    pub cfg: &'a ModelConfig,
    pub layout: &'a FeatureLayout,
    pub age_norm: AgeNormalizer,
    pub params: &'a ModelParams,
}

impl Net<'_> {
    pub fn workspace(&self) -> Workspace {
        Workspace::new(
            self.params,
            self.cfg.n_dims,
            self.cfg.poly_degrees.len(),
            self.layout.n_features(),
        )
    }

    /// Encoder pass; leaves `mu` and `log_var` in the workspace.
    pub fn encode(&self, x: &[f64], t: f64, ws: &mut Workspace) {
        let m = x.len();
        ws.enc[0][..m].copy_from_slice(x);
        ws.enc[0][m] = self.age_norm.apply(t);
        for (l, layer) in self.params.encoder.iter().enumerate() {
            let (prev, next) = ws.enc.split_at_mut(l + 1);
            layer.forward(&prev[l], &mut next[0]);
            next[0].iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let h = ws.enc.last().expect("encoder input");
        self.params.mu_head.forward(h, &mut ws.mu);
        self.params.log_var_head.forward(h, &mut ws.log_var);
    }

    /// Decoder pass from the rates already in `ws.r`; fills `ws.xhat`.
    pub fn decode(&self, t: f64, prep: &Prepared, ws: &mut Workspace) {
        let d = self.cfg.n_dims;
        let degrees = &self.cfg.poly_degrees;
        let n_s = degrees.len();
        for k in 0..d {
            let a = ws.r[k] * t;
            ws.a[k] = a;
            let abs = a.abs();
            for (si, s) in degrees.iter().enumerate() {
                let p = abs.powf(*s);
                ws.basis[k * n_s + si] = a.signum() * p;
                ws.dbasis[k * n_s + si] = if abs > 0.0 { s * p / abs } else { 0.0 };
            }
        }
        let per_feature = d * n_s;
        for (jj, (&j, sign)) in self.layout.monotone.iter().zip(&self.layout.signs).enumerate() {
            let w = &prep.mono_w[jj * per_feature..(jj + 1) * per_feature];
            let acc: f64 = w.iter().zip(&ws.basis).map(|(w, b)| w * b).sum();
            ws.xhat[j] = sign * acc + self.params.monotone_bias[jj];
        }
        if !self.layout.network.is_empty() {
            for k in 0..d {
                ws.dec[0][k] = self.age_norm.apply(ws.a[k]);
            }
            for (l, layer) in self.params.decoder.iter().enumerate() {
                let (prev, next) = ws.dec.split_at_mut(l + 1);
                layer.forward(&prev[l], &mut next[0]);
                next[0].iter_mut().for_each(|v| *v = v.max(0.0));
            }
            self.params
                .decoder_out
                .forward(ws.dec.last().expect("decoder input"), &mut ws.net_out);
            for (oo, &j) in self.layout.network.iter().enumerate() {
                ws.xhat[j] = ws.net_out[oo];
            }
        }
    }

    /// Full pass for one row: encode, reparameterize with `eps` (the
    /// posterior mean when `None`), decode. Returns `(recon, kl)`.
    pub fn forward(&self, x: &[f64], t: f64, eps: Option<&[f64]>, prep: &Prepared, ws: &mut Workspace) -> (f64, f64) {
        self.encode(x, t, ws);
        let sigma_r = self.cfg.sigma_r;
        for k in 0..self.cfg.n_dims {
            let z = match eps {
                Some(e) => ws.mu[k] + (0.5 * ws.log_var[k]).exp() * e[k],
                None => ws.mu[k],
            };
            ws.z[k] = z;
            ws.r[k] = (sigma_r * z).exp();
        }
        self.decode(t, prep, ws);
        let mut recon = 0.0;
        for (j, xj) in x.iter().enumerate() {
            let diff = xj - ws.xhat[j];
            recon += 0.5 * (LN_2PI + self.params.noise_log_var[j] + diff * diff * prep.inv_noise_var[j]);
        }
        let kl: f64 = ws
            .mu
            .iter()
            .zip(&ws.log_var)
            .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
            .sum();
        (recon, kl)
    }

    /// Reverse pass for the row last seen by `forward`, accumulating
    /// `d(recon + kl)/d(params)` into `grad`.
    pub fn backward(&self, x: &[f64], t: f64, eps: Option<&[f64]>, prep: &Prepared, ws: &mut Workspace, grad: &mut ModelParams) {
        let d = self.cfg.n_dims;
        let n_s = self.cfg.poly_degrees.len();
        let per_feature = d * n_s;

        for (j, xj) in x.iter().enumerate() {
            let diff = xj - ws.xhat[j];
            ws.g_xhat[j] = -diff * prep.inv_noise_var[j];
            grad.noise_log_var[j] += 0.5 * (1.0 - diff * diff * prep.inv_noise_var[j]);
        }

        ws.g_a.iter_mut().for_each(|v| *v = 0.0);
        for (jj, (&j, sign)) in self.layout.monotone.iter().zip(&self.layout.signs).enumerate() {
            let g = ws.g_xhat[j];
            grad.monotone_bias[jj] += g;
            let gs = g * sign;
            let range = jj * per_feature..(jj + 1) * per_feature;
            let w = &prep.mono_w[range.clone()];
            let dw = &prep.mono_dw[range.clone()];
            let graw = &mut grad.monotone_raw[range];
            for k in 0..d {
                let mut ga = 0.0;
                for si in 0..n_s {
                    let idx = k * n_s + si;
                    graw[idx] += gs * ws.basis[idx] * dw[idx];
                    ga += w[idx] * ws.dbasis[idx];
                }
                ws.g_a[k] += gs * ga;
            }
        }

        if !self.layout.network.is_empty() {
            for (oo, &j) in self.layout.network.iter().enumerate() {
                ws.g_net_out[oo] = ws.g_xhat[j];
            }
            let n_hidden = self.params.decoder.len();
            self.params.decoder_out.backward(
                &ws.dec[n_hidden],
                &ws.g_net_out,
                &mut grad.decoder_out,
                Some(&mut ws.g_dec[n_hidden]),
            );
            for l in (0..n_hidden).rev() {
                // ReLU mask from the layer output.
                for (g, h) in ws.g_dec[l + 1].iter_mut().zip(&ws.dec[l + 1]) {
                    if *h <= 0.0 {
                        *g = 0.0;
                    }
                }
                let (lower, upper) = ws.g_dec.split_at_mut(l + 1);
                self.params.decoder[l].backward(&ws.dec[l], &upper[0], &mut grad.decoder[l], Some(&mut lower[l]));
            }
            for k in 0..d {
                ws.g_a[k] += ws.g_dec[0][k] / self.age_norm.spread;
            }
        }

        let sigma_r = self.cfg.sigma_r;
        for k in 0..d {
            let g_z = ws.g_a[k] * t * sigma_r * ws.r[k];
            let mu = ws.mu[k];
            let lv = ws.log_var[k];
            ws.g_mu[k] = g_z + mu;
            let g_noise = match eps {
                Some(e) => g_z * e[k] * 0.5 * (0.5 * lv).exp(),
                None => 0.0,
            };
            ws.g_lv[k] = g_noise + 0.5 * (lv.exp() - 1.0);
        }

        let n_hidden = self.params.encoder.len();
        self.params.mu_head.backward(&ws.enc[n_hidden], &ws.g_mu, &mut grad.mu_head, Some(&mut ws.g_enc[n_hidden]));
        self.params.log_var_head.backward(&ws.enc[n_hidden], &ws.g_lv, &mut grad.log_var_head, Some(&mut ws.g_tmp));
        for (a, b) in ws.g_enc[n_hidden].iter_mut().zip(&ws.g_tmp) {
            *a += b;
        }
        for l in (0..n_hidden).rev() {
            for (g, h) in ws.g_enc[l + 1].iter_mut().zip(&ws.enc[l + 1]) {
                if *h <= 0.0 {
                    *g = 0.0;
                }
            }
            let (lower, upper) = ws.g_enc.split_at_mut(l + 1);
            let grad_in = if l > 0 { Some(&mut lower[l][..]) } else { None };
            self.params.encoder[l].backward(&ws.enc[l], &upper[0], &mut grad.encoder[l], grad_in);
        }
    }
}
