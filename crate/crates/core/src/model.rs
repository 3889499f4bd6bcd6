//! Encoder–decoder with a lexicon gate and an adversarially trained lexicon
//! probe, plus the two ablation variants.
//!
//! All forward computation is expressed through tape operations, so training,
//! validation, and inference share one code path bit for bit.

use crate::autodiff::{fan_in_bound, Tape, Tensor, Value};
use crate::data::Vocabulary;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    LlaLstm,
    LlaNoAdversary,
    PlainLstm,
}

impl ModelVariant {
    /// Lexicon gate participates in decoding.
    pub fn uses_lexicon(self) -> bool {
        !matches!(self, ModelVariant::PlainLstm)
    }

    /// Adversary loss participates in training.
    pub fn uses_adversary(self) -> bool {
        matches!(self, ModelVariant::LlaLstm)
    }

    pub fn tag(self) -> u8 {
        match self {
            ModelVariant::LlaLstm => 0,
            ModelVariant::LlaNoAdversary => 1,
            ModelVariant::PlainLstm => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ModelVariant::LlaLstm),
            1 => Ok(ModelVariant::LlaNoAdversary),
            2 => Ok(ModelVariant::PlainLstm),
            other => Err(Error::Checkpoint(format!("unknown variant tag {other}"))),
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lla" => Ok(ModelVariant::LlaLstm),
            "lla-noadv" => Ok(ModelVariant::LlaNoAdversary),
            "plain" => Ok(ModelVariant::PlainLstm),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelVariant::LlaLstm => "lla",
            ModelVariant::LlaNoAdversary => "lla-noadv",
            ModelVariant::PlainLstm => "plain",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub hidden: usize,
    pub embed: usize,
    pub adversary_hidden: usize,
    pub variant: ModelVariant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden: 300, embed: 300, adversary_hidden: 1000, variant: ModelVariant::LlaLstm }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.embed == 0 || self.adversary_hidden == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Unpacked per-gate LSTM parameters: input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_xi: Tensor,
    pub w_hi: Tensor,
    pub b_i: Tensor,
    pub w_xf: Tensor,
    pub w_hf: Tensor,
    pub b_f: Tensor,
    pub w_xg: Tensor,
    pub w_hg: Tensor,
    pub b_g: Tensor,
    pub w_xo: Tensor,
    pub w_ho: Tensor,
    pub b_o: Tensor,
}

impl LstmParams {
    pub(crate) fn init<R: Rng>(hidden: usize, input_dim: usize, rng: &mut R) -> Self {
        let bx = fan_in_bound(input_dim);
        let bh = fan_in_bound(hidden);
        let gate = |rng: &mut R| {
            (
                Tensor::uniform(vec![hidden, input_dim], bx, rng),
                Tensor::uniform(vec![hidden, hidden], bh, rng),
                Tensor::uniform(vec![hidden], bh, rng),
            )
        };
        let (w_xi, w_hi, b_i) = gate(rng);
        let (w_xf, w_hf, b_f) = gate(rng);
        let (w_xg, w_hg, b_g) = gate(rng);
        let (w_xo, w_ho, b_o) = gate(rng);
        LstmParams { w_xi, w_hi, b_i, w_xf, w_hf, b_f, w_xg, w_hg, b_g, w_xo, w_ho, b_o }
    }

    fn fields(&self) -> [(&'static str, &Tensor); 12] {
        [
            ("w_xi", &self.w_xi),
            ("w_hi", &self.w_hi),
            ("b_i", &self.b_i),
            ("w_xf", &self.w_xf),
            ("w_hf", &self.w_hf),
            ("b_f", &self.b_f),
            ("w_xg", &self.w_xg),
            ("w_hg", &self.w_hg),
            ("b_g", &self.b_g),
            ("w_xo", &self.w_xo),
            ("w_ho", &self.w_ho),
            ("b_o", &self.b_o),
        ]
    }

    fn fields_mut(&mut self) -> [(&'static str, &mut Tensor); 12] {
        [
            ("w_xi", &mut self.w_xi),
            ("w_hi", &mut self.w_hi),
            ("b_i", &mut self.b_i),
            ("w_xf", &mut self.w_xf),
            ("w_hf", &mut self.w_hf),
            ("b_f", &mut self.b_f),
            ("w_xg", &mut self.w_xg),
            ("w_hg", &mut self.w_hg),
            ("b_g", &mut self.b_g),
            ("w_xo", &mut self.w_xo),
            ("w_ho", &mut self.w_ho),
            ("b_o", &mut self.b_o),
        ]
    }
}

/// Two-layer adversary probing the encoder state for lexical content.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryParams {
    /// (2H → A)
    pub w1: Tensor,
    /// (A → |V_out|)
    pub w2: Tensor,
}

/// Final encoder hidden and cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// The full model. `lexicon` and `adversary` exist only for the variants that
/// use them; shared parameters are drawn before the adversary so all variants
/// start from the same bits under one seed.
#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    pub input_vocab: Vocabulary,
    pub output_vocab: Vocabulary,
    /// (|V_in| × d_emb); the virtual out-of-vocabulary id embeds as zeros.
    pub input_embedding: Tensor,
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    /// Output projection (H → |V_out|), stored row-major (|V_out| × H).
    pub output_projection: Tensor,
    /// (|V_in| × |V_out|) gate rows; zero-initialized so σ starts neutral.
    pub lexicon: Option<Tensor>,
    pub adversary: Option<AdversaryParams>,
}

impl Seq2SeqModel {
    pub fn new(
        config: ModelConfig,
        input_vocab: Vocabulary,
        output_vocab: Vocabulary,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        if input_vocab.is_empty() || output_vocab.is_empty() {
            return Err(Error::Config("empty vocabulary".into()));
        }
        if output_vocab.stop_id().is_none() {
            return Err(Error::Config("output vocabulary lacks the stop token".into()));
        }
        let (v_in, v_out) = (input_vocab.len(), output_vocab.len());
        let input_embedding =
            Tensor::uniform(vec![v_in, config.embed], fan_in_bound(config.embed), rng);
        let encoder = LstmParams::init(config.hidden, config.embed, rng);
        let decoder = LstmParams::init(config.hidden, config.embed, rng);
        let output_projection =
            Tensor::uniform(vec![v_out, config.hidden], fan_in_bound(config.hidden), rng);
        let lexicon = config.variant.uses_lexicon().then(|| {
            let mut t = Tensor::zeros(vec![v_in, v_out]);
            t.requires_grad = true;
            t
        });
        let adversary = config.variant.uses_adversary().then(|| AdversaryParams {
            w1: Tensor::uniform(
                vec![config.adversary_hidden, 2 * config.hidden],
                fan_in_bound(2 * config.hidden),
                rng,
            ),
            w2: Tensor::uniform(
                vec![v_out, config.adversary_hidden],
                fan_in_bound(config.adversary_hidden),
                rng,
            ),
        });
        Ok(Seq2SeqModel {
            config,
            input_vocab,
            output_vocab,
            input_embedding,
            encoder,
            decoder,
            output_projection,
            lexicon,
            adversary,
        })
    }

    /// Stable parameter enumeration used by the optimizer and checkpoints.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![("e_in".into(), &self.input_embedding)];
        for (name, t) in self.encoder.fields() {
            out.push((format!("enc.{name}"), t));
        }
        for (name, t) in self.decoder.fields() {
            out.push((format!("dec.{name}"), t));
        }
        out.push(("w".into(), &self.output_projection));
        if let Some(lex) = &self.lexicon {
            out.push(("lex".into(), lex));
        }
        if let Some(adv) = &self.adversary {
            out.push(("adv.w1".into(), &adv.w1));
            out.push(("adv.w2".into(), &adv.w2));
        }
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![("e_in".into(), &mut self.input_embedding)];
        for (name, t) in self.encoder.fields_mut() {
            out.push((format!("enc.{name}"), t));
        }
        for (name, t) in self.decoder.fields_mut() {
            out.push((format!("dec.{name}"), t));
        }
        out.push(("w".into(), &mut self.output_projection));
        if let Some(lex) = &mut self.lexicon {
            out.push(("lex".into(), lex));
        }
        if let Some(adv) = &mut self.adversary {
            out.push(("adv.w1".into(), &mut adv.w1));
            out.push(("adv.w2".into(), &mut adv.w2));
        }
        out
    }

    fn check_input_ids(&self, tokens: &[usize]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::Precondition { op: "encode", msg: "empty input sequence".into() });
        }
        let unk = self.input_vocab.unk_id();
        for &id in tokens {
            if id > unk {
                return Err(Error::UnknownId { id, size: unk });
            }
        }
        Ok(())
    }

    /// Copies parameters onto `tape` as leaves. The lexicon table is never
    /// bound here: during the main stage it acts through a detached constant
    /// gate, and its own training binds individual rows.
    pub fn bind(&self, tape: &mut Tape, bind_adversary: bool) -> Result<BoundModel> {
        let bind_lstm = |tape: &mut Tape, p: &LstmParams| -> Result<BoundLstm> {
            Ok(BoundLstm {
                w_xi: tape.tensor(&p.w_xi)?,
                w_hi: tape.tensor(&p.w_hi)?,
                b_i: tape.tensor(&p.b_i)?,
                w_xf: tape.tensor(&p.w_xf)?,
                w_hf: tape.tensor(&p.w_hf)?,
                b_f: tape.tensor(&p.b_f)?,
                w_xg: tape.tensor(&p.w_xg)?,
                w_hg: tape.tensor(&p.w_hg)?,
                b_g: tape.tensor(&p.b_g)?,
                w_xo: tape.tensor(&p.w_xo)?,
                w_ho: tape.tensor(&p.w_ho)?,
                b_o: tape.tensor(&p.b_o)?,
            })
        };
        let e_in = tape.tensor(&self.input_embedding)?;
        let encoder = bind_lstm(tape, &self.encoder)?;
        let decoder = bind_lstm(tape, &self.decoder)?;
        let w = tape.tensor(&self.output_projection)?;
        let adversary = if bind_adversary {
            let adv = self.adversary.as_ref().ok_or_else(|| {
                Error::Config("variant has no adversary to bind".into())
            })?;
            Some((tape.tensor(&adv.w1)?, tape.tensor(&adv.w2)?))
        } else {
            None
        };
        Ok(BoundModel { e_in, encoder, decoder, w, adversary })
    }

    /// Writes tape gradients back into the parameter tensors, in
    /// `named_params` order. Parameters the tape never touched keep a `None`
    /// gradient.
    pub fn harvest_grads(&mut self, tape: &Tape, bound: &BoundModel) {
        let pairs = bound.value_pairs();
        let mut lookup = std::collections::BTreeMap::new();
        for (name, value) in pairs {
            lookup.insert(name, value);
        }
        for (name, tensor) in self.named_params_mut() {
            if let Some(value) = lookup.get(name.as_str()) {
                if let Some(g) = tape.grad(*value) {
                    tensor.accumulate_grad(g);
                }
            }
        }
    }

    fn embed_on_tape(&self, tape: &mut Tape, bound: &BoundModel, id: usize) -> Result<Value> {
        if id == self.input_vocab.unk_id() {
            Ok(tape.zeros(self.config.embed))
        } else {
            tape.select_row(bound.e_in, id)
        }
    }

    fn lstm_step(
        tape: &mut Tape,
        p: &BoundLstm,
        x: Value,
        h: Value,
        c: Value,
    ) -> Result<(Value, Value)> {
        let pre = |tape: &mut Tape, wx: Value, wh: Value, b: Value| -> Result<Value> {
            let xp = tape.matmul(wx, x)?;
            let hp = tape.matmul(wh, h)?;
            let s = tape.add(xp, hp)?;
            tape.add(s, b)
        };
        let i_pre = pre(tape, p.w_xi, p.w_hi, p.b_i)?;
        let i = tape.sigmoid(i_pre);
        let f_pre = pre(tape, p.w_xf, p.w_hf, p.b_f)?;
        let f = tape.sigmoid(f_pre);
        let g_pre = pre(tape, p.w_xg, p.w_hg, p.b_g)?;
        let g = tape.tanh(g_pre);
        let o_pre = pre(tape, p.w_xo, p.w_ho, p.b_o)?;
        let o = tape.sigmoid(o_pre);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let tanh_c = tape.tanh(c_next);
        let h_next = tape.mul(o, tanh_c)?;
        Ok((h_next, c_next))
    }

    /// Runs the encoder over `tokens`, returning the final (h, c) values.
    pub fn encode_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        tokens: &[usize],
    ) -> Result<(Value, Value)> {
        self.check_input_ids(tokens)?;
        let mut h = tape.zeros(self.config.hidden);
        let mut c = tape.zeros(self.config.hidden);
        for &id in tokens {
            let x = self.embed_on_tape(tape, bound, id)?;
            let (h2, c2) = Self::lstm_step(tape, &bound.encoder, x, h, c)?;
            h = h2;
            c = c2;
        }
        Ok((h, c))
    }

    /// Convenience wrapper producing a plain-data encoder state.
    pub fn encoder_state(&self, tokens: &[usize]) -> Result<EncoderState> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false)?;
        let (h, c) = self.encode_on_tape(&mut tape, &bound, tokens)?;
        Ok(EncoderState { h: tape.data(h).to_vec(), c: tape.data(c).to_vec() })
    }

    /// One decoder step from (h, c). The decoder consumes a fixed zero input
    /// vector; the recurrence is driven by state alone. Returns the next
    /// state and the raw distribution o_t.
    pub fn decode_step_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        h: Value,
        c: Value,
    ) -> Result<(Value, Value, Value)> {
        let x = tape.zeros(self.config.embed);
        let (h2, c2) = Self::lstm_step(tape, &bound.decoder, x, h, c)?;
        let logits = tape.matmul(bound.w, h2)?;
        let o = tape.softmax(logits)?;
        Ok((h2, c2, o))
    }

    /// Decoder outputs for a fixed number of steps. `gate` must be present
    /// exactly when the variant uses the lexicon; it multiplies o_t into the
    /// gated distribution o'_t.
    pub fn decode_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        state: (Value, Value),
        gate: Option<Value>,
        steps: usize,
    ) -> Result<Vec<DecoderStep>> {
        if steps == 0 {
            return Err(Error::Precondition { op: "decode", msg: "steps must be >= 1".into() });
        }
        if gate.is_some() != self.config.variant.uses_lexicon() {
            return Err(Error::Precondition {
                op: "decode",
                msg: format!("gate presence does not match variant {}", self.config.variant),
            });
        }
        let (mut h, mut c) = state;
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let (h2, c2, o) = self.decode_step_on_tape(tape, bound, h, c)?;
            let o_gated = match gate {
                Some(g) => tape.mul(g, o)?,
                None => o,
            };
            out.push(DecoderStep { h: h2, o, o_gated });
            h = h2;
            c = c2;
        }
        Ok(out)
    }

    /// Adversary prediction from the encoder state: the state passes through
    /// gradient reversal, so its training signal reaches the encoder with
    /// factor -lambda.
    pub fn adversary_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        state: (Value, Value),
        lambda: f64,
    ) -> Result<Value> {
        let Some((w1, w2)) = bound.adversary else {
            return Err(Error::Config("adversary not bound".into()));
        };
        let joint = tape.concat(&[state.0, state.1])?;
        if tape.shape(w1)[1] != tape.data(joint).len() {
            return Err(Error::Config(format!(
                "adversary input dimension {} does not match state dimension {}",
                tape.shape(w1)[1],
                tape.data(joint).len()
            )));
        }
        let reversed = tape.grad_reverse(joint, lambda)?;
        let a1 = tape.matmul(w1, reversed)?;
        let hidden = tape.relu(a1);
        let a2 = tape.matmul(w2, hidden)?;
        Ok(tape.sigmoid(a2))
    }

    /// Gate value l = σ(elementwise-max of the lexicon rows of `tokens`).
    /// Order- and duplication-invariant. Out-of-vocabulary ids contribute
    /// nothing; with no in-vocabulary token the gate is neutral (all 0.5).
    pub fn lexicon_gate(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        self.check_input_ids(tokens)?;
        let lex = self
            .lexicon
            .as_ref()
            .ok_or_else(|| Error::Config("variant has no lexicon".into()))?;
        let v_out = self.output_vocab.len();
        let rows = self.participating_rows(tokens);
        let mut pooled = vec![0.0f64; v_out];
        if let Some((&first, rest)) = rows.split_first() {
            pooled.copy_from_slice(&lex.data[first * v_out..(first + 1) * v_out]);
            for &r in rest {
                for (p, &v) in pooled.iter_mut().zip(&lex.data[r * v_out..(r + 1) * v_out]) {
                    if v > *p {
                        *p = v;
                    }
                }
            }
        }
        Ok(pooled.into_iter().map(crate::autodiff::stable_sigmoid).collect())
    }

    /// Distinct in-vocabulary row ids in first-occurrence order.
    pub fn participating_rows(&self, tokens: &[usize]) -> Vec<usize> {
        let unk = self.input_vocab.unk_id();
        let mut seen = vec![false; unk];
        let mut rows = Vec::new();
        for &id in tokens {
            if id < unk && !seen[id] {
                seen[id] = true;
                rows.push(id);
            }
        }
        rows
    }

    /// Stage-1 graph: binds each participating lexicon row as a trainable
    /// leaf and returns them with the gate value σ(maxpool(rows)).
    pub fn lexicon_gate_on_tape(
        &self,
        tape: &mut Tape,
        tokens: &[usize],
    ) -> Result<(Vec<(usize, Value)>, Value)> {
        self.check_input_ids(tokens)?;
        let lex = self
            .lexicon
            .as_ref()
            .ok_or_else(|| Error::Config("variant has no lexicon".into()))?;
        let v_out = self.output_vocab.len();
        let rows = self.participating_rows(tokens);
        if rows.is_empty() {
            return Err(Error::Precondition {
                op: "lexicon_gate_on_tape",
                msg: "no in-vocabulary tokens".into(),
            });
        }
        let mut bound = Vec::with_capacity(rows.len());
        for &r in &rows {
            let v = tape.leaf(&[v_out], &lex.data[r * v_out..(r + 1) * v_out], true)?;
            bound.push((r, v));
        }
        let values: Vec<Value> = bound.iter().map(|(_, v)| *v).collect();
        let pooled = tape.maxpool(&values)?;
        let gate = tape.sigmoid(pooled);
        Ok((bound, gate))
    }

    /// Greedy decode on a caller-managed tape (so batch evaluation can share
    /// one parameter binding). Stops at the stop token or after `max_len`
    /// emissions; the returned ids exclude the stop token.
    pub fn greedy_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        tokens: &[usize],
        max_len: usize,
    ) -> Result<Vec<usize>> {
        if max_len == 0 {
            return Err(Error::Precondition {
                op: "greedy_translate",
                msg: "max_len must be >= 1".into(),
            });
        }
        let stop = self
            .output_vocab
            .stop_id()
            .ok_or_else(|| Error::Config("output vocabulary lacks the stop token".into()))?;
        let gate = if self.config.variant.uses_lexicon() {
            let g = self.lexicon_gate(tokens)?;
            Some(tape.constant(&[g.len()], &g)?)
        } else {
            None
        };
        let (mut h, mut c) = self.encode_on_tape(tape, bound, tokens)?;
        let mut out = Vec::new();
        for _ in 0..max_len {
            let (h2, c2, o) = self.decode_step_on_tape(tape, bound, h, c)?;
            let dist = match gate {
                Some(g) => tape.mul(g, o)?,
                None => o,
            };
            let tok = argmax(tape.data(dist));
            h = h2;
            c = c2;
            if tok == stop {
                break;
            }
            out.push(tok);
        }
        Ok(out)
    }

    /// Greedy translation on a private tape.
    pub fn greedy_translate(&self, tokens: &[usize], max_len: usize) -> Result<Vec<usize>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false)?;
        self.greedy_on_tape(&mut tape, &bound, tokens, max_len)
    }
}

/// Lowest index wins ties, making decoding deterministic.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Indicator vector over the output vocabulary: 1 at every id present in
/// `output_ids` (the ingested stop token included), else 0.
pub fn lexicon_target(output_ids: &[usize], v_out: usize) -> Result<Vec<f64>> {
    let mut t = vec![0.0; v_out];
    for &id in output_ids {
        if id >= v_out {
            return Err(Error::UnknownId { id, size: v_out });
        }
        t[id] = 1.0;
    }
    Ok(t)
}

/// Tape handles for one model binding.
#[derive(Debug, Clone)]
pub struct BoundLstm {
    pub w_xi: Value,
    pub w_hi: Value,
    pub b_i: Value,
    pub w_xf: Value,
    pub w_hf: Value,
    pub b_f: Value,
    pub w_xg: Value,
    pub w_hg: Value,
    pub b_g: Value,
    pub w_xo: Value,
    pub w_ho: Value,
    pub b_o: Value,
}

impl BoundLstm {
    fn value_pairs(&self, prefix: &'static str) -> Vec<(String, Value)> {
        [
            ("w_xi", self.w_xi),
            ("w_hi", self.w_hi),
            ("b_i", self.b_i),
            ("w_xf", self.w_xf),
            ("w_hf", self.w_hf),
            ("b_f", self.b_f),
            ("w_xg", self.w_xg),
            ("w_hg", self.w_hg),
            ("b_g", self.b_g),
            ("w_xo", self.w_xo),
            ("w_ho", self.w_ho),
            ("b_o", self.b_o),
        ]
        .into_iter()
        .map(|(n, v)| (format!("{prefix}.{n}"), v))
        .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BoundModel {
    pub e_in: Value,
    pub encoder: BoundLstm,
    pub decoder: BoundLstm,
    pub w: Value,
    pub adversary: Option<(Value, Value)>,
}

impl BoundModel {
    pub fn value_pairs(&self) -> Vec<(String, Value)> {
        let mut out = vec![("e_in".to_string(), self.e_in)];
        out.extend(self.encoder.value_pairs("enc"));
        out.extend(self.decoder.value_pairs("dec"));
        out.push(("w".to_string(), self.w));
        if let Some((w1, w2)) = self.adversary {
            out.push(("adv.w1".to_string(), w1));
            out.push(("adv.w2".to_string(), w2));
        }
        out
    }
}

/// One decoder step's handles: hidden state, raw distribution, gated
/// distribution (identical to `o` for the plain variant).
#[derive(Debug, Clone, Copy)]
pub struct DecoderStep {
    pub h: Value,
    pub o: Value,
    pub o_gated: Value,
}
