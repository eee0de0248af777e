"""Two-layer LSTM encoder over EAT vectors and an attention decoder over words.

Everything is implemented on numpy arrays: forward pass, backpropagation
through time, additive attention, Adam, and the checkpoint container.  The
backward pass is verified against central finite differences by
``grad_check``.

Training uses teacher forcing with a masked negative-log-likelihood loss
(per-token mean).  Dropout (inverted) applies between recurrent layers and on
the output-projection input, only while training.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagic,
    CorruptTensor,
    DimensionMismatch,
    EmptyCorpus,
    NonFiniteLoss,
    VersionMismatch,
)

MAGIC = b"EATSEQ"
FORMAT_VERSION = 1

PAD, BOS, EOS, UNK, EMPTY_TOKEN = "<pad>", "<s>", "</s>", "<unk>", "<empty>"
SPECIALS = (PAD, BOS, EOS, UNK, EMPTY_TOKEN)


class Vocabulary:
    """Dense token<->id mapping with reserved ids for the special tokens."""

    def __init__(self, tokens=()):
        self.id2tok = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.tok2id = {t: i for i, t in enumerate(self.id2tok)}
        if len(self.tok2id) != len(self.id2tok):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.id2tok)

    @property
    def pad_id(self):
        return 0

    @property
    def bos_id(self):
        return 1

    @property
    def eos_id(self):
        return 2

    @property
    def unk_id(self):
        return 3

    @classmethod
    def build(cls, token_lists) -> "Vocabulary":
        counts = {}
        for tokens in token_lists:
            for t in tokens:
                counts[t] = counts.get(t, 0) + 1
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        return cls(ordered)

    def encode(self, tokens) -> list:
        return [self.tok2id.get(t, self.unk_id) for t in tokens]

    def decode(self, ids, strip_specials: bool = True) -> list:
        toks = [self.id2tok[i] for i in ids]
        if strip_specials:
            toks = [t for t in toks if t not in (PAD, BOS, EOS)]
        return toks


@dataclass
class ModelConfig:
    input_dim: int
    hidden_units: int = 600
    layers: int = 2
    vocab_size: int = 0
    attention_length: int = 9
    dropout_prob: float = 0.1
    max_output_len: int = 20
    embed_dim: int = 0  # 0 = same as hidden_units

    def __post_init__(self):
        if self.embed_dim == 0:
            self.embed_dim = self.hidden_units


@dataclass
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 1e-3
    dropped_learning_rate: float = 1e-4
    lr_drop_epoch: int = 5  # learning rate drops after this many epochs
    epochs: int = 10
    seed: int = 0


@dataclass
class EncodedInput:
    """Encoder output: final state plus the attention memory."""

    state: dict
    memory: np.ndarray  # (attention_length, H), zero-padded
    mask: np.ndarray    # (attention_length,)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_softmax(x, axis=-1):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


class Seq2SeqModel:
    """Encoder/decoder parameters plus the vocabulary and configuration."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary,
                 seed: int = 0, dtype=np.float32):
        if config.vocab_size == 0:
            config.vocab_size = len(vocab)
        if config.vocab_size != len(vocab):
            raise DimensionMismatch("config vocab_size disagrees with vocabulary")
        self.config = config
        self.vocab = vocab
        self.dtype = dtype
        self.params = self._init_params(np.random.default_rng(seed))

    # -- parameters ----------------------------------------------------------

    def _init_params(self, rng) -> dict:
        cfg = self.config
        H, D, E, V = cfg.hidden_units, cfg.input_dim, cfg.embed_dim, cfg.vocab_size
        A = H

        def mat(fan_in, fan_out):
            r = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-r, r, size=(fan_in, fan_out)).astype(self.dtype)

        def lstm_bias():
            b = np.zeros(4 * H, dtype=self.dtype)
            b[H:2 * H] = 1.0  # forget-gate bias
            return b

        params = {}
        in_dim = D
        for layer in range(cfg.layers):
            params[f"enc_l{layer}_W"] = mat(in_dim + H, 4 * H)
            params[f"enc_l{layer}_b"] = lstm_bias()
            in_dim = H
        params["dec_embed"] = mat(V, E)
        in_dim = E + H  # embedding plus attention context
        for layer in range(cfg.layers):
            params[f"dec_l{layer}_W"] = mat(in_dim + H, 4 * H)
            params[f"dec_l{layer}_b"] = lstm_bias()
            in_dim = H
        params["att_wq"] = mat(H, A)
        params["att_wk"] = mat(H, A)
        params["att_v"] = rng.uniform(-np.sqrt(6.0 / (A + 1)),
                                      np.sqrt(6.0 / (A + 1)),
                                      size=A).astype(self.dtype)
        params["att_b"] = np.zeros(A, dtype=self.dtype)
        params["out_W"] = mat(2 * H, V)
        params["out_b"] = np.zeros(V, dtype=self.dtype)
        return params

    def zero_grads(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    # -- cells ----------------------------------------------------------------

    def _cell_forward(self, name, x, h_prev, c_prev):
        H = self.config.hidden_units
        W, b = self.params[f"{name}_W"], self.params[f"{name}_b"]
        xc = np.concatenate([x, h_prev], axis=1)
        z = xc @ W + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        cache = (name, xc, i, f, g, o, c_prev, tc)
        return h, c, cache

    def _cell_backward(self, dh, dc_in, cache, grads):
        name, xc, i, f, g, o, c_prev, tc = cache
        H = self.config.hidden_units
        W = self.params[f"{name}_W"]
        do = dh * tc
        dc = dc_in + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_prev = dc * f
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=1)
        grads[f"{name}_W"] += xc.T @ dz
        grads[f"{name}_b"] += dz.sum(axis=0)
        dxc = dz @ W.T
        dx = dxc[:, :-H]
        dh_prev = dxc[:, -H:]
        return dx, dh_prev, dc_prev

    # -- attention --------------------------------------------------------------

    def _attend(self, s, keys, memory, mask):
        """Additive attention: s (B,H), keys (B,L,A), memory (B,L,H), mask (B,L)."""
        qa = s @ self.params["att_wq"]                       # (B,A)
        u = np.tanh(qa[:, None, :] + keys + self.params["att_b"])
        scores = u @ self.params["att_v"]                    # (B,L)
        scores = np.where(mask > 0, scores, -1e30)
        alpha = np.exp(scores - scores.max(axis=1, keepdims=True))
        alpha = alpha * mask
        denom = alpha.sum(axis=1, keepdims=True)
        denom = np.where(denom == 0, 1.0, denom)
        alpha = alpha / denom
        context = np.einsum("bl,blh->bh", alpha, memory)
        return context, (s, u, alpha)

    def _attend_backward(self, dcontext, cache, memory, grads, dmemory, dkeys):
        s, u, alpha = cache
        dalpha = np.einsum("bh,blh->bl", dcontext, memory)
        dmemory += alpha[:, :, None] * dcontext[:, None, :]
        dscores = alpha * (dalpha - np.sum(alpha * dalpha, axis=1, keepdims=True))
        du = dscores[:, :, None] * self.params["att_v"][None, None, :]
        dun = du * (1.0 - u * u)
        grads["att_v"] += np.einsum("blh,bl->h", u, dscores)
        grads["att_b"] += dun.sum(axis=(0, 1))
        dqa = dun.sum(axis=1)
        dkeys += dun
        grads["att_wq"] += s.T @ dqa
        ds = dqa @ self.params["att_wq"].T
        return ds

    # -- full forward/backward ---------------------------------------------------

    def forward_backward(self, xs, xmask, yin, ytgt, ymask,
                         compute_grads=True, dropout_rng=None):
        """Teacher-forced NLL over a padded batch; optionally backprop.

        xs (B,Tin,D) float, xmask (B,Tin), yin/ytgt (B,Tout) int,
        ymask (B,Tout).  Returns (loss, grads-or-None).
        """
        cfg = self.config
        H, L = cfg.hidden_units, cfg.attention_length
        nlayers = cfg.layers
        B, Tin, D = xs.shape
        if D != cfg.input_dim:
            raise DimensionMismatch(f"input vectors of length {D}, expected {cfg.input_dim}")
        Tout = yin.shape[1]
        keep = 1.0 - cfg.dropout_prob
        use_dropout = dropout_rng is not None and cfg.dropout_prob > 0.0

        def dropout_mask(shape):
            if not use_dropout:
                return None
            return (dropout_rng.random(shape) < keep).astype(self.dtype) / keep

        # ---- encoder ----
        h = [np.zeros((B, H), dtype=self.dtype) for _ in range(nlayers)]
        c = [np.zeros((B, H), dtype=self.dtype) for _ in range(nlayers)]
        enc_caches = []
        enc_top = np.zeros((B, max(Tin, 1), H), dtype=self.dtype)
        for t in range(Tin):
            m = xmask[:, t:t + 1].astype(self.dtype)
            inp = xs[:, t, :]
            step = []
            for layer in range(nlayers):
                h_prev, c_prev = h[layer], c[layer]
                hn, cn, cache = self._cell_forward(f"enc_l{layer}", inp, h_prev, c_prev)
                h[layer] = m * hn + (1.0 - m) * h_prev
                c[layer] = m * cn + (1.0 - m) * c_prev
                dmask = dropout_mask((B, H)) if layer < nlayers - 1 else None
                inp = h[layer] if dmask is None else h[layer] * dmask
                step.append((cache, h_prev, c_prev, m, dmask))
            enc_caches.append(step)
            enc_top[:, t, :] = h[-1]

        memory = np.zeros((B, L, H), dtype=self.dtype)
        att_mask = np.zeros((B, L), dtype=self.dtype)
        steps = min(Tin, L)
        memory[:, :steps, :] = enc_top[:, :steps, :]
        att_mask[:, :steps] = xmask[:, :steps]
        keys = np.einsum("blh,ha->bla", memory, self.params["att_wk"])

        # ---- decoder ----
        dh_state = [hi.copy() for hi in h]
        dc_state = [ci.copy() for ci in c]
        s = dh_state[-1]
        dec_caches = []
        total_tokens = float(ymask.sum())
        loss = 0.0
        dlogits_steps = []
        embed = self.params["dec_embed"]
        for t in range(Tout):
            context, att_cache = self._attend(s, keys, memory, att_mask)
            ids = yin[:, t]
            emb = embed[ids]
            inp = np.concatenate([emb, context], axis=1)
            step = []
            for layer in range(nlayers):
                h_prev, c_prev = dh_state[layer], dc_state[layer]
                hn, cn, cache = self._cell_forward(f"dec_l{layer}", inp, h_prev, c_prev)
                dh_state[layer], dc_state[layer] = hn, cn
                dmask = dropout_mask((B, H)) if layer < nlayers - 1 else None
                inp = hn if dmask is None else hn * dmask
                step.append((cache, h_prev, c_prev, dmask))
            proj_in = np.concatenate([dh_state[-1], context], axis=1)
            pmask = dropout_mask((B, 2 * H))
            proj_used = proj_in if pmask is None else proj_in * pmask
            logits = proj_used @ self.params["out_W"] + self.params["out_b"]
            logp = log_softmax(logits, axis=1)
            m = ymask[:, t].astype(self.dtype)
            picked = logp[np.arange(B), ytgt[:, t]]
            loss -= float(np.sum(picked * m))
            if compute_grads:
                probs = np.exp(logp)
                dlog = probs
                dlog[np.arange(B), ytgt[:, t]] -= 1.0
                dlog *= m[:, None]
                dlogits_steps.append(dlog)
            dec_caches.append((att_cache, ids, step, proj_used, pmask))
            s = dh_state[-1]

        if total_tokens == 0:
            loss = 0.0
            return (loss, self.zero_grads()) if compute_grads else (loss, None)
        loss /= total_tokens
        if not compute_grads:
            return loss, None

        # ---- backward ----
        grads = self.zero_grads()
        scale = 1.0 / total_tokens
        dh_acc = [np.zeros((B, H), dtype=self.dtype) for _ in range(nlayers)]
        dc_acc = [np.zeros((B, H), dtype=self.dtype) for _ in range(nlayers)]
        ds_next = np.zeros((B, H), dtype=self.dtype)
        dmemory = np.zeros_like(memory)
        dkeys = np.zeros_like(keys)
        for t in range(Tout - 1, -1, -1):
            att_cache, ids, step, proj_used, pmask = dec_caches[t]
            dlog = dlogits_steps[t] * scale
            grads["out_W"] += proj_used.T @ dlog
            grads["out_b"] += dlog.sum(axis=0)
            dproj = dlog @ self.params["out_W"].T
            if pmask is not None:
                dproj = dproj * pmask
            dh_top = dproj[:, :H] + dh_acc[-1] + ds_next
            dcontext = dproj[:, H:]
            dh_acc[-1] = np.zeros((B, H), dtype=self.dtype)
            dinp = None
            for layer in range(nlayers - 1, -1, -1):
                cache, h_prev, c_prev, dmask = step[layer]
                dh_layer = dh_top if layer == nlayers - 1 else dh_acc[layer]
                if dinp is not None:
                    if dmask is not None:
                        dinp = dinp * dmask
                    dh_layer = dh_layer + dinp
                dx, dh_prev, dc_prev = self._cell_backward(
                    dh_layer, dc_acc[layer], cache, grads)
                dh_acc[layer] = dh_prev
                dc_acc[layer] = dc_prev
                dinp = dx
            demb = dinp[:, :self.config.embed_dim]
            dcontext = dcontext + dinp[:, self.config.embed_dim:]
            np.add.at(grads["dec_embed"], ids, demb)
            ds_next = self._attend_backward(dcontext, att_cache, memory,
                                            grads, dmemory, dkeys)

        # initial decoder state grads flow into the encoder finals; the last
        # attention query gradient lands on the encoder's final top state too.
        dh_acc[-1] += ds_next
        grads["att_wk"] += np.einsum("blh,bla->ha", memory, dkeys)
        dmemory += np.einsum("bla,ha->blh", dkeys, self.params["att_wk"])

        denc_h = dh_acc
        denc_c = dc_acc
        for t in range(Tin - 1, -1, -1):
            step = enc_caches[t]
            dtop_extra = dmemory[:, t, :] if t < L else 0.0
            dinp = None
            for layer in range(nlayers - 1, -1, -1):
                cache, h_prev, c_prev, m, dmask = step[layer]
                dh_layer = denc_h[layer].copy()
                if layer == nlayers - 1:
                    dh_layer += dtop_extra
                if dinp is not None:
                    if dmask is not None:
                        dinp = dinp * dmask
                    dh_layer = dh_layer + dinp
                dc_layer = denc_c[layer]
                dh_new = dh_layer * m
                dc_new = dc_layer * m
                dh_carry = dh_layer * (1.0 - m)
                dc_carry = dc_layer * (1.0 - m)
                dx, dh_prev, dc_prev = self._cell_backward(dh_new, dc_new, cache, grads)
                denc_h[layer] = dh_carry + dh_prev
                denc_c[layer] = dc_carry + dc_prev
                dinp = dx
        return loss, grads

    # -- inference -------------------------------------------------------------

    def encode(self, matrix) -> EncodedInput:
        """Run the encoder over one EAT-vector matrix (T, input_dim)."""
        xs = np.asarray(matrix, dtype=self.dtype)
        if xs.ndim == 1:
            xs = xs[None, :]
        if xs.ndim != 2 or xs.shape[0] == 0:
            raise DimensionMismatch("encoder input must be a non-empty (T, D) matrix")
        if xs.shape[1] != self.config.input_dim:
            raise DimensionMismatch(
                f"input vectors of length {xs.shape[1]}, "
                f"expected {self.config.input_dim}")
        cfg = self.config
        H, L = cfg.hidden_units, cfg.attention_length
        T = xs.shape[0]
        h = [np.zeros((1, H), dtype=self.dtype) for _ in range(cfg.layers)]
        c = [np.zeros((1, H), dtype=self.dtype) for _ in range(cfg.layers)]
        top = []
        for t in range(T):
            inp = xs[t:t + 1, :]
            for layer in range(cfg.layers):
                h[layer], c[layer], _ = self._cell_forward(
                    f"enc_l{layer}", inp, h[layer], c[layer])
                inp = h[layer]
            top.append(h[-1][0])
        memory = np.zeros((L, H), dtype=self.dtype)
        mask = np.zeros(L, dtype=self.dtype)
        steps = min(T, L)
        memory[:steps] = np.stack(top[:steps])
        mask[:steps] = 1.0
        state = {"h": [hi.copy() for hi in h], "c": [ci.copy() for ci in c]}
        return EncodedInput(state=state, memory=memory, mask=mask)

    def decode_step(self, state: dict, prev_token_id: int, enc: EncodedInput):
        """One decoder step; returns (logits over the vocabulary, new state)."""
        cfg = self.config
        s = state["h"][-1]
        context, att_cache = self._attend(
            s, (enc.memory[None] @ self.params["att_wk"]),
            enc.memory[None], enc.mask[None])
        emb = self.params["dec_embed"][np.array([prev_token_id])]
        inp = np.concatenate([emb, context], axis=1)
        new_h, new_c = [], []
        for layer in range(cfg.layers):
            hn, cn, _ = self._cell_forward(
                f"dec_l{layer}", inp, state["h"][layer], state["c"][layer])
            new_h.append(hn)
            new_c.append(cn)
            inp = hn
        proj_in = np.concatenate([new_h[-1], context], axis=1)
        logits = proj_in @ self.params["out_W"] + self.params["out_b"]
        new_state = {"h": new_h, "c": new_c}
        return logits[0], new_state, att_cache[2][0]

    def initial_state(self, enc: EncodedInput) -> dict:
        return {"h": [h.copy() for h in enc.state["h"]],
                "c": [c.copy() for c in enc.state["c"]]}


def greedy_decode(model: Seq2SeqModel, matrix, max_len: int | None = None) -> list:
    """Argmax decoding; returns surface tokens without special symbols."""
    enc = model.encode(matrix)
    state = model.initial_state(enc)
    max_len = max_len or model.config.max_output_len
    prev = model.vocab.bos_id
    out = []
    for _ in range(max_len):
        logits, state, _ = model.decode_step(state, prev, enc)
        prev = int(np.argmax(logits))
        if prev == model.vocab.eos_id:
            break
        out.append(prev)
    return model.vocab.decode(out)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

class _Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction = np.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for k in params:
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * (g * g)
            params[k] -= lr * correction * self.m[k] / (np.sqrt(self.v[k]) + self.eps)


def _prepare_example(item, model, store):
    source, tokens = item
    if isinstance(source, np.ndarray):
        matrix = source
    else:
        from .vectorizer import sequence_to_matrix
        if store is None:
            raise EmptyCorpus("EAT sequences in the corpus require an embedding store")
        matrix = sequence_to_matrix(source, store)
    if len(tokens) > model.config.max_output_len:
        raise DimensionMismatch(
            f"target sentence of {len(tokens)} tokens exceeds "
            f"max_output_len={model.config.max_output_len}")
    ids = model.vocab.encode(tokens) + [model.vocab.eos_id]
    return matrix.astype(model.dtype), ids


def _make_batch(examples, model):
    B = len(examples)
    Tin = max(m.shape[0] for m, _ in examples)
    Tout = max(len(ids) for _, ids in examples)
    D = model.config.input_dim
    xs = np.zeros((B, Tin, D), dtype=model.dtype)
    xmask = np.zeros((B, Tin), dtype=model.dtype)
    yin = np.zeros((B, Tout), dtype=np.int64)
    ytgt = np.zeros((B, Tout), dtype=np.int64)
    ymask = np.zeros((B, Tout), dtype=model.dtype)
    for i, (matrix, ids) in enumerate(examples):
        t = matrix.shape[0]
        xs[i, :t] = matrix
        xmask[i, :t] = 1.0
        yin[i, 0] = model.vocab.bos_id
        yin[i, 1:len(ids)] = ids[:-1]
        ytgt[i, :len(ids)] = ids
        ymask[i, :len(ids)] = 1.0
    return xs, xmask, yin, ytgt, ymask


def _epoch_loss(model, examples, batch_size):
    total, count = 0.0, 0.0
    for start in range(0, len(examples), batch_size):
        batch = examples[start:start + batch_size]
        xs, xmask, yin, ytgt, ymask = _make_batch(batch, model)
        loss, _ = model.forward_backward(xs, xmask, yin, ytgt, ymask,
                                         compute_grads=False)
        tokens = float(ymask.sum())
        total += loss * tokens
        count += tokens
    return total / max(count, 1.0)


def train(corpus, model: Seq2SeqModel, tc: TrainConfig,
          store=None, val_corpus=None, log_fn=None):
    """Teacher-forced training with Adam and the epoch-based LR schedule.

    Returns ``(model, log)`` where the log holds one dict per epoch with the
    learning rate and the training (and optional validation) loss.
    """
    if not corpus:
        raise EmptyCorpus("training corpus is empty")
    examples = [_prepare_example(item, model, store) for item in corpus]
    val_examples = ([_prepare_example(item, model, store) for item in val_corpus]
                    if val_corpus else None)
    rng = np.random.default_rng(tc.seed)
    dropout_rng = np.random.default_rng(tc.seed + 1)
    adam = _Adam(model.params)
    log = []
    for epoch in range(1, tc.epochs + 1):
        lr = tc.learning_rate if epoch <= tc.lr_drop_epoch else tc.dropped_learning_rate
        order = rng.permutation(len(examples))
        total, count = 0.0, 0.0
        for start in range(0, len(examples), tc.batch_size):
            batch = [examples[i] for i in order[start:start + tc.batch_size]]
            xs, xmask, yin, ytgt, ymask = _make_batch(batch, model)
            loss, grads = model.forward_backward(
                xs, xmask, yin, ytgt, ymask,
                compute_grads=True, dropout_rng=dropout_rng)
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch {start // tc.batch_size}"
                    f" (lr={lr})")
            adam.step(model.params, grads, lr)
            tokens = float(ymask.sum())
            total += loss * tokens
            count += tokens
        entry = {"epoch": epoch, "lr": lr, "train_loss": total / max(count, 1.0)}
        if val_examples:
            entry["val_loss"] = _epoch_loss(model, val_examples, tc.batch_size)
        log.append(entry)
        if log_fn:
            log_fn(entry)
    return model, log


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def grad_check(model: Seq2SeqModel, sample, epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``sample`` is ``(matrix, target_ids)``; the model should be small and use
    float64 for the comparison to be meaningful.
    """
    matrix, ids = sample
    xs = np.asarray(matrix, dtype=model.dtype)[None, :, :]
    xmask = np.ones((1, xs.shape[1]), dtype=model.dtype)
    ids = list(ids)
    Tout = max(len(ids), 1)
    yin = np.zeros((1, Tout), dtype=np.int64)
    ytgt = np.zeros((1, Tout), dtype=np.int64)
    ymask = np.zeros((1, Tout), dtype=model.dtype)
    if ids:
        yin[0, 0] = model.vocab.bos_id
        yin[0, 1:len(ids)] = ids[:-1]
        ytgt[0, :len(ids)] = ids
        ymask[0, :len(ids)] = 1.0

    _, grads = model.forward_backward(xs, xmask, yin, ytgt, ymask,
                                      compute_grads=True)

    def loss_only():
        loss, _ = model.forward_backward(xs, xmask, yin, ytgt, ymask,
                                         compute_grads=False)
        return loss

    worst = 0.0
    for name in sorted(model.params):
        tensor = model.params[name]
        flat = tensor.reshape(-1)
        gflat = grads[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            up = loss_only()
            flat[idx] = orig - epsilon
            down = loss_only()
            flat[idx] = orig
            numeric = (up - down) / (2.0 * epsilon)
            denom = max(abs(numeric) + abs(gflat[idx]), 1e-8)
            worst = max(worst, abs(numeric - gflat[idx]) / denom)
    return worst


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------

def _config_header(model: Seq2SeqModel, extra: dict | None = None) -> bytes:
    cfg = model.config
    items = {
        "attention_length": cfg.attention_length,
        "dropout_prob": cfg.dropout_prob,
        "embed_dim": cfg.embed_dim,
        "hidden_units": cfg.hidden_units,
        "input_dim": cfg.input_dim,
        "layers": cfg.layers,
        "max_output_len": cfg.max_output_len,
        "vocab_size": cfg.vocab_size,
    }
    if extra:
        items.update(extra)
    text = "".join(f"{k}={items[k]}\n" for k in sorted(items))
    return text.encode("utf-8")


def save_checkpoint(model: Seq2SeqModel, path, extra_config: dict | None = None):
    """Write the container: magic, version, config header, tensors, vocabulary."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        header = _config_header(model, extra_config)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        names = sorted(model.params)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            tensor = np.ascontiguousarray(model.params[name], dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", tensor.ndim))
            for dim in tensor.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(tensor.tobytes())
        fh.write(struct.pack("<I", len(model.vocab)))
        for token in model.vocab.id2tok:
            encoded = token.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CorruptTensor(f"unexpected end of file while reading {what}")
    return data


def load_checkpoint(path) -> tuple:
    """Read a container back; returns ``(model, extra_config)``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise BadMagic(f"{path}: not a checkpoint file")
        version = struct.unpack("<I", _read_exact(fh, 4, "version"))[0]
        if version != FORMAT_VERSION:
            raise VersionMismatch(
                f"{path}: container version {version}, expected {FORMAT_VERSION}")
        hlen = struct.unpack("<I", _read_exact(fh, 4, "header length"))[0]
        header = _read_exact(fh, hlen, "config header").decode("utf-8")
        config_items = {}
        for line in header.splitlines():
            if "=" in line:
                key, value = line.split("=", 1)
                config_items[key] = value

        def intval(key):
            try:
                return int(config_items[key])
            except (KeyError, ValueError):
                raise CorruptTensor(f"bad or missing config key {key!r}") from None

        tensors = {}
        n_tensors = struct.unpack("<I", _read_exact(fh, 4, "tensor count"))[0]
        for _ in range(n_tensors):
            nlen = struct.unpack("<I", _read_exact(fh, 4, "tensor name length"))[0]
            name = _read_exact(fh, nlen, "tensor name").decode("utf-8")
            ndim = struct.unpack("<I", _read_exact(fh, 4, "tensor rank"))[0]
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4, "tensor dim"))[0]
                for _ in range(ndim))
            count = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, 4 * count, f"tensor {name}")
            tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        vsize = struct.unpack("<I", _read_exact(fh, 4, "vocabulary size"))[0]
        tokens = []
        for _ in range(vsize):
            tlen = struct.unpack("<I", _read_exact(fh, 4, "token length"))[0]
            tokens.append(_read_exact(fh, tlen, "token").decode("utf-8"))
        if fh.read(1):
            raise CorruptTensor(f"{path}: trailing bytes after vocabulary")

    if tokens[:len(SPECIALS)] != list(SPECIALS):
        raise CorruptTensor("vocabulary does not start with the reserved tokens")
    vocab = Vocabulary(tokens[len(SPECIALS):])
    config = ModelConfig(
        input_dim=intval("input_dim"),
        hidden_units=intval("hidden_units"),
        layers=intval("layers"),
        vocab_size=intval("vocab_size"),
        attention_length=intval("attention_length"),
        dropout_prob=float(config_items.get("dropout_prob", 0.1)),
        max_output_len=intval("max_output_len"),
        embed_dim=intval("embed_dim"),
    )
    if config.vocab_size != len(vocab):
        raise CorruptTensor("vocab_size in header disagrees with vocabulary")
    model = Seq2SeqModel(config, vocab, seed=0)
    for name, value in tensors.items():
        if name not in model.params:
            raise CorruptTensor(f"unknown tensor {name!r}")
        if model.params[name].shape != value.shape:
            raise CorruptTensor(
                f"tensor {name!r} has shape {value.shape}, "
                f"expected {model.params[name].shape}")
        model.params[name] = value
    if set(tensors) != set(model.params):
        raise CorruptTensor("checkpoint is missing parameter tensors")
    extra = {k: v for k, v in config_items.items()
             if k not in ("attention_length", "dropout_prob", "embed_dim",
                          "hidden_units", "input_dim", "layers",
                          "max_output_len", "vocab_size")}
    return model, extra
