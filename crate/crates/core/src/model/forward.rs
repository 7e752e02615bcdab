//! The network, recorded on a [`Tape`].
//!
//! Stages, in order: four-branch encoding, cross-attention fusion, the
//! reconstruction auto-encoder (training only), attention-based
//! aggregation, post-processing, and the composite loss.

use cadren_autodiff::{BoundParams, Tape, Tensor, Var};

use super::config::ModelConfig;
use super::inputs::ExampleInputs;
use super::params::{fuse_name, STREAMS};
use super::ModelError;

type Result<T> = std::result::Result<T, ModelError>;

/// The four projected embedding matrices.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub ca_sem: Var,
    pub ca_str: Var,
    pub bg_sem: Var,
    pub bg_str: Var,
}

impl Encoded {
    fn streams(&self) -> [Var; 4] {
        [self.ca_sem, self.ca_str, self.bg_sem, self.bg_str]
    }
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let h = tape.matmul(x, w)?;
    Ok(tape.add_row(h, b)?)
}

/// Projects semantic and structural inputs to `d_model`. Anchor rows reuse
/// the background projection of the same nodes; with `enable_ca` off they
/// are zero matrices.
pub fn four_branch_encode(tape: &mut Tape, p: &BoundParams, x: &ExampleInputs, cfg: &ModelConfig) -> Result<Encoded> {
    let sem_in = tape.constant(x.semantic.clone());
    let str_in = tape.constant(x.structural.clone());
    let bg_sem = linear(tape, sem_in, p.get("proj.sem.w")?, p.get("proj.sem.b")?)?;
    let bg_str = linear(tape, str_in, p.get("proj.str.w")?, p.get("proj.str.b")?)?;
    let (ca_sem, ca_str) = if cfg.enable_ca {
        let ca_sem_in = tape.constant(x.gather_ca(&x.semantic));
        let ca_str_in = tape.constant(x.gather_ca(&x.structural));
        (
            linear(tape, ca_sem_in, p.get("proj.sem.w")?, p.get("proj.sem.b")?)?,
            linear(tape, ca_str_in, p.get("proj.str.w")?, p.get("proj.str.b")?)?,
        )
    } else {
        let zeros = Tensor::zeros(&[x.ca.len(), cfg.d_model]);
        (tape.constant(zeros.clone()), tape.constant(zeros))
    };
    Ok(Encoded {
        ca_sem,
        ca_str,
        bg_sem,
        bg_str,
    })
}

/// One transformer-style block: the target stream queries the row-wise
/// concatenation of the other streams, then residual + layer norm,
/// feed-forward, residual + layer norm.
fn fusion_block(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &ModelConfig,
    layer: usize,
    stream: &str,
    target: Var,
    context: Var,
) -> Result<Var> {
    let mut heads = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let q = tape.matmul(target, p.get(&fuse_name(layer, stream, &format!("q.{h}")))?)?;
        let k = tape.matmul(context, p.get(&fuse_name(layer, stream, &format!("k.{h}")))?)?;
        let v = tape.matmul(context, p.get(&fuse_name(layer, stream, &format!("v.{h}")))?)?;
        heads.push(tape.attention(q, k, v)?);
    }
    let joined = if heads.len() == 1 { heads[0] } else { tape.concat(&heads, 1)? };
    let attended = tape.matmul(joined, p.get(&fuse_name(layer, stream, "o"))?)?;
    let res = tape.add(target, attended)?;
    let h1 = tape.layer_norm(res)?;
    let ff = linear(
        tape,
        h1,
        p.get(&fuse_name(layer, stream, "ff1.w"))?,
        p.get(&fuse_name(layer, stream, "ff1.b"))?,
    )?;
    let ff = tape.relu(ff)?;
    let ff = linear(
        tape,
        ff,
        p.get(&fuse_name(layer, stream, "ff2.w"))?,
        p.get(&fuse_name(layer, stream, "ff2.b"))?,
    )?;
    let res = tape.add(h1, ff)?;
    Ok(tape.layer_norm(res)?)
}

/// Fuses all four streams `n_fusion_layers` times and returns the two
/// background streams `(F_bg_sem, F_bg_str)`.
pub fn cross_attention_fuse(tape: &mut Tape, p: &BoundParams, enc: &Encoded, cfg: &ModelConfig) -> Result<(Var, Var)> {
    let mut streams = enc.streams();
    for layer in 0..cfg.n_fusion_layers {
        let mut next = streams;
        for (s, name) in STREAMS.iter().enumerate() {
            let others: Vec<Var> = (0..4).filter(|&j| j != s).map(|j| streams[j]).collect();
            let context = tape.concat(&others, 0)?;
            next[s] = fusion_block(tape, p, cfg, layer, name, streams[s], context)?;
        }
        streams = next;
    }
    Ok((streams[2], streams[3]))
}

/// Replaces the masked rows of `[F_sem | F_str]` by a learned placeholder,
/// reconstructs every row with a one-hidden-layer MLP, and returns the mean
/// squared error over masked rows. `None` when nothing is masked.
pub fn reconstruction_ae(tape: &mut Tape, p: &BoundParams, f_sem: Var, f_str: Var, mask: &[bool]) -> Result<Option<Var>> {
    let masked = mask.iter().filter(|&&m| m).count();
    if masked == 0 {
        return Ok(None);
    }
    let x = tape.concat(&[f_sem, f_str], 1)?;
    let (n, w) = (tape.shape(x)[0], tape.shape(x)[1]);
    if mask.len() != n {
        return Err(ModelError::Config(format!("mask has {} entries for {n} nodes", mask.len())));
    }
    let keep: Vec<f64> = mask.iter().flat_map(|&m| std::iter::repeat_n(if m { 0.0 } else { 1.0 }, w)).collect();
    let drop: Vec<f64> = keep.iter().map(|k| 1.0 - k).collect();
    let indicator: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();

    let keep = tape.constant(Tensor::new(vec![n, w], keep)?);
    let drop = tape.constant(Tensor::new(vec![n, w], drop)?);
    let indicator = tape.constant(Tensor::new(vec![n, 1], indicator)?);

    let kept = tape.hadamard(x, keep)?;
    let filled = tape.matmul(indicator, p.get("ae.placeholder")?)?;
    let corrupted = tape.add(kept, filled)?;
    let h = linear(tape, corrupted, p.get("ae.enc.w")?, p.get("ae.enc.b")?)?;
    let h = tape.relu(h)?;
    let recon = linear(tape, h, p.get("ae.dec.w")?, p.get("ae.dec.b")?)?;
    let diff = tape.sub(recon, x)?;
    let diff = tape.hadamard(diff, drop)?;
    let sq = tape.hadamard(diff, diff)?;
    let total = tape.sum(sq)?;
    Ok(Some(tape.scalar_mul(total, 1.0 / (masked * w) as f64)?))
}

fn key_encoder(tape: &mut Tape, p: &BoundParams, x: Var, channel: &str) -> Result<Var> {
    let h = linear(
        tape,
        x,
        p.get(&format!("agg.key.{channel}.w1"))?,
        p.get(&format!("agg.key.{channel}.b1"))?,
    )?;
    let h = tape.relu(h)?;
    linear(
        tape,
        h,
        p.get(&format!("agg.key.{channel}.w2"))?,
        p.get(&format!("agg.key.{channel}.b2"))?,
    )
}

/// Produces `(I_init [N,1], channel scores [N,2])`.
///
/// The two key encoders give `[N, 2, d]` keys; the aggregation matrix maps
/// the mean fused embedding to `[N, 2d]`, read as `[N, 2, d]` queries. Their
/// Hadamard product reduced over `d` gives one semantic and one structural
/// score per node, which a per-node softmax over the two channels combines.
/// With `enable_aa` off the scores are plain row means of the keys and are
/// averaged.
pub fn attention_aggregate(
    tape: &mut Tape,
    p: &BoundParams,
    f_sem: Var,
    f_str: Var,
    cfg: &ModelConfig,
) -> Result<(Var, Var)> {
    let d = tape.shape(f_sem)[1];
    let k_sem = key_encoder(tape, p, f_sem, "sem")?;
    let k_str = key_encoder(tape, p, f_str, "str")?;
    if !cfg.enable_aa {
        let s_sem = tape.sum_axis(k_sem, 1)?;
        let s_sem = tape.scalar_mul(s_sem, 1.0 / d as f64)?;
        let s_str = tape.sum_axis(k_str, 1)?;
        let s_str = tape.scalar_mul(s_str, 1.0 / d as f64)?;
        let scores = tape.concat(&[s_sem, s_str], 1)?;
        let total = tape.sum_axis(scores, 1)?;
        return Ok((tape.scalar_mul(total, 0.5)?, scores));
    }
    let mixed = tape.add(f_sem, f_str)?;
    let mixed = tape.scalar_mul(mixed, 0.5)?;
    let query = tape.matmul(mixed, p.get("agg.matrix")?)?;
    let q_sem = tape.slice_cols(query, 0, d)?;
    let q_str = tape.slice_cols(query, d, 2 * d)?;
    let scale = 1.0 / (d as f64).sqrt();
    let s_sem = tape.hadamard(k_sem, q_sem)?;
    let s_sem = tape.sum_axis(s_sem, 1)?;
    let s_str = tape.hadamard(k_str, q_str)?;
    let s_str = tape.sum_axis(s_str, 1)?;
    let scores = tape.concat(&[s_sem, s_str], 1)?;
    let scores = tape.scalar_mul(scores, scale)?;
    let weights = tape.softmax(scores, 1)?;
    let weighted = tape.hadamard(weights, scores)?;
    Ok((tape.sum_axis(weighted, 1)?, scores))
}

/// `sigmoid(alpha * I_init + beta * S_sem + gamma * S_str)`.
pub fn post_process(
    tape: &mut Tape,
    i_init: Var,
    s_sem: Var,
    s_str: Var,
    alpha: Var,
    beta: Var,
    gamma: Var,
) -> Result<Var> {
    let a = tape.scale(i_init, alpha)?;
    let b = tape.scale(s_sem, beta)?;
    let c = tape.scale(s_str, gamma)?;
    let z = tape.add(a, b)?;
    let z = tape.add(z, c)?;
    Ok(tape.sigmoid(z)?)
}

/// Scalar loss weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub mu: f64,
    pub nu: f64,
    pub recon: f64,
}

/// `B(I_gt, I_final) + mu B(S_sem*I_gt, I_final) + nu B(S_str*I_gt, I_final) + lambda recon`.
pub fn total_loss(
    tape: &mut Tape,
    i_final: Var,
    target: &[f64],
    s_sem: &[f64],
    s_str: &[f64],
    recon: Option<Var>,
    w: LossWeights,
) -> Result<Var> {
    let shape = tape.shape(i_final).to_vec();
    let n = target.len();
    if s_sem.len() != n || s_str.len() != n || tape.value(i_final).numel() != n {
        return Err(ModelError::Config(format!(
            "loss inputs disagree in length: pred {:?}, target {n}, s_sem {}, s_str {}",
            shape,
            s_sem.len(),
            s_str.len()
        )));
    }
    let t = |v: Vec<f64>| Tensor::new(shape.clone(), v);
    let gt = t(target.to_vec())?;
    let sem_t = t(s_sem.iter().zip(target).map(|(s, g)| s * g).collect())?;
    let str_t = t(s_str.iter().zip(target).map(|(s, g)| s * g).collect())?;

    let mut loss = tape.bce(i_final, &gt)?;
    if w.mu != 0.0 {
        let l = tape.bce(i_final, &sem_t)?;
        let l = tape.scalar_mul(l, w.mu)?;
        loss = tape.add(loss, l)?;
    }
    if w.nu != 0.0 {
        let l = tape.bce(i_final, &str_t)?;
        let l = tape.scalar_mul(l, w.nu)?;
        loss = tape.add(loss, l)?;
    }
    if let (Some(r), true) = (recon, w.recon != 0.0) {
        let l = tape.scalar_mul(r, w.recon)?;
        loss = tape.add(loss, l)?;
    }
    Ok(loss)
}

/// Handles to the interesting intermediate values of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub fused_sem: Var,
    pub fused_str: Var,
    pub channel_scores: Var,
    pub i_init: Var,
    pub i_final: Var,
    pub recon: Option<Var>,
}

/// Full forward pass. `mask` selects rows for the auto-encoder; pass `None`
/// (or an all-false mask) at inference.
pub fn forward(
    tape: &mut Tape,
    p: &BoundParams,
    x: &ExampleInputs,
    cfg: &ModelConfig,
    mask: Option<&[bool]>,
) -> Result<ForwardVars> {
    let n = x.len();
    let enc = four_branch_encode(tape, p, x, cfg)?;
    let (fused_sem, fused_str) = cross_attention_fuse(tape, p, &enc, cfg)?;
    let recon = match (mask, cfg.enable_ae) {
        (Some(m), true) => reconstruction_ae(tape, p, fused_sem, fused_str, m)?,
        _ => None,
    };
    let (i_init, channel_scores) = attention_aggregate(tape, p, fused_sem, fused_str, cfg)?;
    let i_final = if cfg.enable_pp {
        let s_sem = tape.constant(Tensor::new(vec![n, 1], x.s_sem.clone())?);
        let s_str = tape.constant(Tensor::new(vec![n, 1], x.s_str.clone())?);
        post_process(
            tape,
            i_init,
            s_sem,
            s_str,
            p.get("pp.alpha")?,
            p.get("pp.beta")?,
            p.get("pp.gamma")?,
        )?
    } else {
        tape.sigmoid(i_init)?
    };
    Ok(ForwardVars {
        fused_sem,
        fused_str,
        channel_scores,
        i_init,
        i_final,
        recon,
    })
}

/// Forward pass plus loss for one training example.
pub fn training_loss(
    tape: &mut Tape,
    p: &BoundParams,
    x: &ExampleInputs,
    target: &[f64],
    cfg: &ModelConfig,
    mask: &[bool],
) -> Result<(ForwardVars, Var)> {
    let fv = forward(tape, p, x, cfg, Some(mask))?;
    let loss = total_loss(
        tape,
        fv.i_final,
        target,
        &x.s_sem,
        &x.s_str,
        fv.recon,
        LossWeights {
            mu: cfg.mu,
            nu: cfg.nu,
            recon: cfg.effective_ae_weight(),
        },
    )?;
    Ok((fv, loss))
}

/// Values of a forward pass, detached from the tape.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub i_init: Vec<f64>,
    pub i_final: Vec<f64>,
    pub recon_loss: f64,
    pub fused_sem: Tensor,
    pub fused_str: Tensor,
    pub channel_scores: Tensor,
}

impl ForwardOutput {
    pub fn collect(tape: &Tape, fv: &ForwardVars) -> Self {
        Self {
            i_init: tape.value(fv.i_init).data().to_vec(),
            i_final: tape.value(fv.i_final).data().to_vec(),
            recon_loss: fv.recon.map_or(0.0, |r| tape.value(r).item()),
            fused_sem: tape.value(fv.fused_sem).clone(),
            fused_str: tape.value(fv.fused_str).clone(),
            channel_scores: tape.value(fv.channel_scores).clone(),
        }
    }
}
