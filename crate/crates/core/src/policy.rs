//! Linear-softmax policy over a token vocabulary.
//!
//! Logits are an affine function of a sparse binary feature vector built from
//! the trailing context: one one-hot block per position of the last `window`
//! tokens (PAD-filled before the sequence start), optionally followed by a
//! hashed one-hot of the last `span` tokens taken jointly. Because the model is
//! linear in its parameters, log-probabilities, their gradients, the exact
//! categorical KL and the entropy all have closed forms.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::TokenId;
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &str = "treerpo-policy";
const CHECKPOINT_VERSION: u32 = 1;

/// Joint-context block: the last `span` tokens hashed into `buckets` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedContext {
    pub span: usize,
    pub buckets: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    vocab_size: usize,
    window: usize,
    pad: TokenId,
    hashed: Option<HashedContext>,
}

impl FeatureMap {
    pub fn new(vocab_size: usize, window: usize, pad: TokenId) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::config("vocab_size", "need at least two tokens"));
        }
        if window == 0 {
            return Err(Error::config("window", "must be at least 1"));
        }
        if pad >= vocab_size {
            return Err(Error::config("pad", "PAD id outside the vocabulary"));
        }
        Ok(FeatureMap { vocab_size, window, pad, hashed: None })
    }

    pub fn with_hashed_context(mut self, span: usize, buckets: usize) -> Result<Self> {
        if span == 0 {
            return Err(Error::config("hashed_span", "must be at least 1"));
        }
        if buckets == 0 {
            return Err(Error::config("hashed_buckets", "must be at least 1"));
        }
        self.hashed = Some(HashedContext { span, buckets });
        Ok(self)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn pad(&self) -> TokenId {
        self.pad
    }

    pub fn hashed(&self) -> Option<HashedContext> {
        self.hashed
    }

    /// `window * vocab_size`, plus the hashed buckets when enabled.
    pub fn feature_dim(&self) -> usize {
        self.window * self.vocab_size + self.hashed.map_or(0, |h| h.buckets)
    }

    /// Indices of the non-zero (unit) features for `context`.
    pub fn active(&self, context: &[TokenId]) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.window + 1);
        self.active_into(context, &mut out);
        out
    }

    pub fn active_into(&self, context: &[TokenId], out: &mut Vec<usize>) {
        out.clear();
        let n = context.len();
        for pos in 0..self.window {
            let tok = if pos < n { context[n - 1 - pos] } else { self.pad };
            out.push(pos * self.vocab_size + tok);
        }
        if let Some(h) = self.hashed {
            let mut acc: u64 = 0xCBF2_9CE4_8422_2325;
            for pos in 0..h.span {
                let tok = if pos < n { context[n - 1 - pos] } else { self.pad };
                acc ^= tok as u64 + 1;
                acc = acc.wrapping_mul(0x0000_0100_0000_01B3);
            }
            let slot = (crate::rng::mix64(acc) % h.buckets as u64) as usize;
            out.push(self.window * self.vocab_size + slot);
        }
    }
}

/// Policy parameters: `weights` is `[vocab_size, feature_dim]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    features: FeatureMap,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradient with the same layout as [`PolicyParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl PolicyGrad {
    pub fn zeros_like(params: &PolicyParams) -> Self {
        PolicyGrad { weights: vec![0.0; params.weights.len()], bias: vec![0.0; params.bias.len()] }
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.bias[i - self.weights.len()]
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|g| *g *= s);
    }

    pub fn add_scaled(&mut self, other: &PolicyGrad, s: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += s * b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += s * b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().chain(&self.bias).map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }
}

/// A categorical distribution over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    pub logits: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl TokenDistribution {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let lse = logsumexp(&logits);
        let log_probs = logits.iter().map(|z| z - lse).collect();
        TokenDistribution { logits, log_probs }
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn entropy(&self) -> f64 {
        -self.log_probs.iter().map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { l.exp() * l }).sum::<f64>()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TokenId {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (i, &l) in self.log_probs.iter().enumerate() {
            let p = l.exp();
            if p > 0.0 {
                last_positive = i;
            }
            cum += p;
            if u < cum {
                return i;
            }
        }
        last_positive
    }
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Exact categorical KL(p || q) from log-probabilities.
pub fn categorical_kl(log_p: &[f64], log_q: &[f64]) -> f64 {
    log_p.iter().zip(log_q).map(|(&lp, &lq)| if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() * (lp - lq) }).sum()
}

impl PolicyParams {
    pub fn zeros(features: FeatureMap) -> Self {
        PolicyParams {
            features,
            weights: vec![0.0; features.vocab_size * features.feature_dim()],
            bias: vec![0.0; features.vocab_size],
        }
    }

    /// Weights uniform in `(-scale, scale)`, zero bias.
    pub fn init_uniform<R: Rng + ?Sized>(features: FeatureMap, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(features);
        if scale > 0.0 {
            for w in &mut p.weights {
                *w = rng.gen_range(-scale..scale);
            }
        }
        p
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn vocab_size(&self) -> usize {
        self.features.vocab_size
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Flat view: weights first, then bias.
    pub fn get(&self, i: usize) -> f64 {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.bias[i - self.weights.len()]
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        if i < self.weights.len() {
            self.weights[i] = v;
        } else {
            let j = i - self.weights.len();
            self.bias[j] = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// Deep copy used as a frozen rollout or reference policy.
    pub fn snapshot(&self) -> PolicyParams {
        self.clone()
    }

    /// Temperature-1 logits for a precomputed active feature set.
    pub fn logits_for(&self, active: &[usize]) -> Vec<f64> {
        let dim = self.features.feature_dim();
        (0..self.vocab_size())
            .map(|v| {
                let row = &self.weights[v * dim..(v + 1) * dim];
                self.bias[v] + active.iter().map(|&j| row[j]).sum::<f64>()
            })
            .collect()
    }

    pub fn distribution(&self, context: &[TokenId], temperature: f64) -> TokenDistribution {
        assert!(temperature > 0.0, "temperature must be positive");
        let mut logits = self.logits_for(&self.features.active(context));
        if temperature != 1.0 {
            logits.iter_mut().for_each(|z| *z /= temperature);
        }
        TokenDistribution::from_logits(logits)
    }

    pub fn sample_token<R: Rng + ?Sized>(&self, context: &[TokenId], temperature: f64, rng: &mut R) -> TokenId {
        self.distribution(context, temperature).sample(rng)
    }

    /// `out[t] = log pi(segment[t] | context ++ segment[..t])` at temperature 1.
    pub fn sequence_logprob(&self, context: &[TokenId], segment: &[TokenId]) -> Vec<f64> {
        let mut path = context.to_vec();
        let mut active = Vec::new();
        let mut out = Vec::with_capacity(segment.len());
        for &tok in segment {
            self.features.active_into(&path, &mut active);
            let dist = TokenDistribution::from_logits(self.logits_for(&active));
            out.push(dist.log_probs[tok]);
            path.push(tok);
        }
        out
    }

    /// Gradient of `sum_t token_weights[t] * log pi(segment[t] | ...)`, along
    /// with the per-token log-probs.
    pub fn logprob_grad(
        &self,
        context: &[TokenId],
        segment: &[TokenId],
        token_weights: &[f64],
    ) -> (PolicyGrad, Vec<f64>) {
        assert_eq!(segment.len(), token_weights.len(), "one weight per token");
        let mut grad = PolicyGrad::zeros_like(self);
        let mut path = context.to_vec();
        let mut active = Vec::new();
        let mut logps = Vec::with_capacity(segment.len());
        let mut dlogits = vec![0.0; self.vocab_size()];
        for (&tok, &w) in segment.iter().zip(token_weights) {
            self.features.active_into(&path, &mut active);
            let dist = TokenDistribution::from_logits(self.logits_for(&active));
            logps.push(dist.log_probs[tok]);
            if w != 0.0 {
                for (d, lp) in dlogits.iter_mut().zip(&dist.log_probs) {
                    *d = -w * lp.exp();
                }
                dlogits[tok] += w;
                self.backprop_logits(&active, &dlogits, &mut grad);
            }
            path.push(tok);
        }
        (grad, logps)
    }

    /// Adds `d(objective)/d(theta)` given `d(objective)/d(logits)` at one context.
    pub fn backprop_logits(&self, active: &[usize], dlogits: &[f64], grad: &mut PolicyGrad) {
        let dim = self.features.feature_dim();
        for (v, &d) in dlogits.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.bias[v] += d;
            let row = &mut grad.weights[v * dim..(v + 1) * dim];
            for &j in active {
                row[j] += d;
            }
        }
    }

    /// Entropy of the temperature-1 distribution at `context`.
    pub fn entropy(&self, context: &[TokenId]) -> f64 {
        self.distribution(context, 1.0).entropy()
    }

    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        let f = &self.features;
        writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
        writeln!(out, "vocab {}", f.vocab_size)?;
        writeln!(out, "window {}", f.window)?;
        writeln!(out, "pad {}", f.pad)?;
        match f.hashed {
            Some(h) => writeln!(out, "hashed {} {}", h.span, h.buckets)?,
            None => writeln!(out, "hashed 0 0")?,
        }
        writeln!(out, "weights")?;
        let dim = f.feature_dim();
        for row in self.weights.chunks(dim.max(1)) {
            writeln!(out, "{}", join_f64(row))?;
        }
        writeln!(out, "bias")?;
        writeln!(out, "{}", join_f64(&self.bias))?;
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::parse(0, format!("unexpected end of file, expected {what}"))),
            }
        };
        let (n, header) = next("header")?;
        let version = header
            .strip_prefix(CHECKPOINT_MAGIC)
            .map(str::trim)
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| Error::parse(n, "not a policy checkpoint"))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::parse(n, format!("unsupported version {version}")));
        }
        let mut keyed = |key: &str| -> Result<Vec<usize>> {
            let (n, l) = next(key)?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::parse(n, format!("expected `{key}`")));
            }
            parts.map(|p| p.parse().map_err(|_| Error::parse(n, format!("bad {key} value `{p}`")))).collect()
        };
        let vocab = single(keyed("vocab")?, "vocab")?;
        let window = single(keyed("window")?, "window")?;
        let pad = single(keyed("pad")?, "pad")?;
        let hashed = keyed("hashed")?;
        let mut features = FeatureMap::new(vocab, window, pad)?;
        if hashed.len() != 2 {
            return Err(Error::parse(5, "expected `hashed <span> <buckets>`"));
        }
        if hashed[0] > 0 {
            features = features.with_hashed_context(hashed[0], hashed[1])?;
        }
        let mut params = PolicyParams::zeros(features);
        let dim = features.feature_dim();
        let (n, l) = next("weights")?;
        if l.trim() != "weights" {
            return Err(Error::parse(n, "expected `weights`"));
        }
        for v in 0..vocab {
            let (n, l) = next("weight row")?;
            let row = parse_f64_row(&l, n, dim)?;
            params.weights[v * dim..(v + 1) * dim].copy_from_slice(&row);
        }
        let (n, l) = next("bias")?;
        if l.trim() != "bias" {
            return Err(Error::parse(n, "expected `bias`"));
        }
        let (n, l) = next("bias values")?;
        params.bias = parse_f64_row(&l, n, vocab)?;
        if !params.is_finite() {
            return Err(Error::parse(n, "non-finite parameter"));
        }
        Ok(params)
    }
}

fn single(v: Vec<usize>, key: &str) -> Result<usize> {
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(Error::parse(0, format!("`{key}` takes one value"))),
    }
}

// `{}` on f64 prints the shortest string that parses back to the same bits.
fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")
}

fn parse_f64_row(line: &str, lineno: usize, expected: usize) -> Result<Vec<f64>> {
    let row: Vec<f64> = line
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|_| Error::parse(lineno, format!("bad number `{s}`"))))
        .collect::<Result<_>>()?;
    if row.len() != expected {
        return Err(Error::parse(lineno, format!("expected {expected} values, found {}", row.len())));
    }
    Ok(row)
}

/// Exact KL(pi_a(.|context) || pi_b(.|context)) at temperature 1.
pub fn kl_divergence(a: &PolicyParams, b: &PolicyParams, context: &[TokenId]) -> f64 {
    let pa = a.distribution(context, 1.0);
    let pb = b.distribution(context, 1.0);
    categorical_kl(&pa.log_probs, &pb.log_probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn fmap(v: usize, k: usize) -> FeatureMap {
        FeatureMap::new(v, k, v - 1).unwrap()
    }

    #[test]
    fn feature_dim_and_padding() {
        let f = fmap(5, 3);
        assert_eq!(f.feature_dim(), 15);
        // last token first; missing positions take PAD (= 4)
        assert_eq!(f.active(&[2]), vec![2, 5 + 4, 10 + 4]);
        assert_eq!(f.active(&[0, 1, 2, 3]), vec![3, 5 + 2, 10 + 1]);
        let h = f.with_hashed_context(2, 7).unwrap();
        assert_eq!(h.feature_dim(), 22);
        let a = h.active(&[1, 2]);
        assert_eq!(a.len(), 4);
        assert!((15..22).contains(&a[3]));
    }

    #[test]
    fn zero_params_are_uniform() {
        let p = PolicyParams::zeros(fmap(20, 4));
        let d = p.distribution(&[1, 2, 3], 1.0);
        for q in d.probs() {
            assert!((q - 0.05).abs() < 1e-15);
        }
        let lp = p.sequence_logprob(&[1], &[3, 4, 5]);
        for l in lp {
            assert!((l - (1.0f64 / 20.0).ln()).abs() < 1e-12);
        }
        assert!((p.entropy(&[0]) - 20f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bias_ln2_doubles_first_token() {
        let mut p = PolicyParams::zeros(fmap(6, 1));
        p.bias[0] = 2f64.ln();
        let probs = p.distribution(&[], 1.0).probs();
        // probs proportional to [2, 1, 1, 1, 1, 1]
        assert!((probs[0] - 2.0 / 7.0).abs() < 1e-12);
        for q in &probs[1..] {
            assert!((q - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_temperature_is_uniform() {
        let mut r = rng::from_seed(3);
        let p = PolicyParams::init_uniform(fmap(17, 4), 3.0, &mut r);
        let probs = p.distribution(&[1, 2, 3, 4], 1e6).probs();
        for q in probs {
            assert!((q - 1.0 / 17.0).abs() < 1e-5);
        }
    }

    #[test]
    fn degenerate_distribution_always_samples_its_token() {
        let mut p = PolicyParams::zeros(fmap(8, 2));
        p.bias[5] = 1e4;
        let mut r = rng::from_seed(1);
        for _ in 0..200 {
            assert_eq!(p.sample_token(&[0], 1.0, &mut r), 5);
        }
        assert!(p.entropy(&[0]).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_zero_gradient() {
        let mut r = rng::from_seed(2);
        let p = PolicyParams::init_uniform(fmap(7, 2), 1.0, &mut r);
        let (g, lp) = p.logprob_grad(&[1, 2], &[3, 4], &[0.0, 0.0]);
        assert!(g.iter().all(|&x| x == 0.0));
        assert_eq!(lp, p.sequence_logprob(&[1, 2], &[3, 4]));
    }

    #[test]
    fn kl_identity_and_uniform_closed_form() {
        let mut r = rng::from_seed(4);
        let f = fmap(9, 2);
        let a = PolicyParams::init_uniform(f, 1.0, &mut r);
        assert!(kl_divergence(&a, &a, &[1, 2]).abs() < 1e-12);

        let uniform = PolicyParams::zeros(f);
        let ctx = [3, 4];
        let q = a.distribution(&ctx, 1.0).probs();
        let v = 9.0f64;
        let direct: f64 = q.iter().map(|qv| (1.0 / v) * ((1.0 / v).ln() - qv.ln())).sum();
        assert!((kl_divergence(&uniform, &a, &ctx) - direct).abs() < 1e-12);
    }

    #[test]
    fn snapshot_is_independent() {
        let mut r = rng::from_seed(5);
        let mut live = PolicyParams::init_uniform(fmap(6, 2), 1.0, &mut r);
        let snap = live.snapshot();
        let before = snap.sequence_logprob(&[1], &[2, 3]);
        assert_eq!(before, live.sequence_logprob(&[1], &[2, 3]));
        live.weights.iter_mut().for_each(|w| *w += 0.5);
        live.bias[0] = 3.0;
        assert_eq!(snap.sequence_logprob(&[1], &[2, 3]), before);
        assert_ne!(live.sequence_logprob(&[1], &[2, 3]), before);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let mut r = rng::from_seed(6);
        let f = fmap(7, 3).with_hashed_context(4, 11).unwrap();
        let mut p = PolicyParams::init_uniform(f, 1.0, &mut r);
        p.bias = vec![0.1, -0.0, 1e-300, -2.5e17, 3.0, f64::MIN_POSITIVE, 1.0 / 3.0];
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf).unwrap();
        let back = PolicyParams::read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.features(), p.features());
        let bits = |x: &PolicyParams| x.weights.iter().chain(&x.bias).map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&p));
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(PolicyParams::read_checkpoint("hello\n".as_bytes()).is_err());
        assert!(PolicyParams::read_checkpoint("treerpo-policy 9\n".as_bytes()).is_err());
    }
}
