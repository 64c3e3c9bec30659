"""From-scratch detector architectures over standardized windows.

Four trainable families map a 150-step sequence to 3-class logits:

* lstm    -- single recurrent layer, final hidden state -> dense
* bilstm  -- forward + backward recurrent passes, concatenated -> dense
* tcn     -- stacked dilated causal 1-D convolutions with residual
             connections and ReLU, global average pool -> dense
* ae_mlp  -- recurrent encoder to a small latent, recurrent decoder
             reconstructing the window, and an MLP classifying
             [latent || reconstruction-MSE]

Parameters live in flat name->array dicts; every architecture exposes
``init`` / ``predict_proba`` / ``loss_grads`` with hand-derived
backpropagation, validated by :func:`gradient_check` against central
finite differences.  The recurrent time loop runs on the selected
kernel backend (compiled or pure NumPy).
"""

import numpy as np

from .. import kernels
from ..errors import ParameterError, ShapeError

N_CLASSES = 3

#: Weight added by ae_mlp to the window-reconstruction MSE term.
RECON_LOSS_WEIGHT = 0.5


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def cross_entropy(logits, y_idx):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=-1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - logsum
    n = len(y_idx)
    loss = -logp[np.arange(n), y_idx].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y_idx] -= 1.0
    return loss, dlogits / n


def _uniform(rng, shape, fan_in):
    k = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-k, k, size=shape)


def _as_seq(x):
    """(B, T) batch -> contiguous (T, B, 1) kernel input."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("expected a (batch, time) array of windows")
    return np.ascontiguousarray(x.T[:, :, None])


def _lstm_init(rng, n_in, hid, prefix):
    k = 1.0 / np.sqrt(hid)
    wx = rng.uniform(-k, k, size=(n_in, 4 * hid))
    wh = rng.uniform(-k, k, size=(hid, 4 * hid))
    b = rng.uniform(-k, k, size=4 * hid)
    b[hid:2 * hid] += 1.0  # forget-gate bias offset stabilizes early training
    return {f"{prefix}.wx": wx, f"{prefix}.wh": wh, f"{prefix}.b": b}


def _zeros_state(batch, hid):
    return np.zeros((batch, hid)), np.zeros((batch, hid))


# ---------------------------------------------------------------------------
# lstm


class LstmArch:
    name = "lstm"

    def init(self, config, rng):
        hid = config.hidden
        params = _lstm_init(rng, 1, hid, "lstm")
        params["out.w"] = _uniform(rng, (hid, N_CLASSES), hid)
        params["out.b"] = _uniform(rng, (N_CLASSES,), hid)
        return params

    def _logits(self, config, params, x, want_cache):
        xs = _as_seq(x)
        hid = params["lstm.wh"].shape[0]
        h0, c0 = _zeros_state(xs.shape[1], hid)
        if want_cache:
            h, c, gates = kernels.lstm_forward(
                xs, params["lstm.wx"], params["lstm.wh"], params["lstm.b"], h0, c0)
            cache = (xs, h0, c0, h, c, gates)
        else:
            h = kernels.lstm_infer(
                xs, params["lstm.wx"], params["lstm.wh"], params["lstm.b"], h0, c0)
            cache = None
        logits = h[-1] @ params["out.w"] + params["out.b"]
        return logits, h, cache

    def predict_proba(self, config, params, x):
        logits, _, _ = self._logits(config, params, x, want_cache=False)
        return softmax(logits)

    def loss_grads(self, config, params, x, y_idx):
        logits, h, cache = self._logits(config, params, x, want_cache=True)
        loss, dlogits = cross_entropy(logits, y_idx)
        xs, h0, c0, h, c, gates = cache

        grads = {
            "out.w": h[-1].T @ dlogits,
            "out.b": dlogits.sum(axis=0),
        }
        dh = np.zeros_like(h)
        dh[-1] = dlogits @ params["out.w"].T
        _, dwx, dwh, db, _, _ = kernels.lstm_backward(
            xs, params["lstm.wx"], params["lstm.wh"], h0, c0, h, c, gates,
            dh, np.zeros_like(h0))
        grads["lstm.wx"] = dwx
        grads["lstm.wh"] = dwh
        grads["lstm.b"] = db
        return loss, grads, softmax(logits)


# ---------------------------------------------------------------------------
# bilstm


class BiLstmArch:
    name = "bilstm"

    def init(self, config, rng):
        hid = config.hidden
        params = _lstm_init(rng, 1, hid, "fwd")
        params.update(_lstm_init(rng, 1, hid, "bwd"))
        params["out.w"] = _uniform(rng, (2 * hid, N_CLASSES), 2 * hid)
        params["out.b"] = _uniform(rng, (N_CLASSES,), 2 * hid)
        return params

    def predict_proba(self, config, params, x):
        xs = _as_seq(x)
        xr = np.ascontiguousarray(xs[::-1])
        hid = params["fwd.wh"].shape[0]
        h0, c0 = _zeros_state(xs.shape[1], hid)
        hf = kernels.lstm_infer(xs, params["fwd.wx"], params["fwd.wh"],
                                params["fwd.b"], h0, c0)
        hb = kernels.lstm_infer(xr, params["bwd.wx"], params["bwd.wh"],
                                params["bwd.b"], h0, c0)
        feat = np.concatenate([hf[-1], hb[-1]], axis=1)
        return softmax(feat @ params["out.w"] + params["out.b"])

    def loss_grads(self, config, params, x, y_idx):
        xs = _as_seq(x)
        xr = np.ascontiguousarray(xs[::-1])
        hid = params["fwd.wh"].shape[0]
        h0, c0 = _zeros_state(xs.shape[1], hid)
        hf, cf, gf = kernels.lstm_forward(xs, params["fwd.wx"], params["fwd.wh"],
                                          params["fwd.b"], h0, c0)
        hb, cb, gb = kernels.lstm_forward(xr, params["bwd.wx"], params["bwd.wh"],
                                          params["bwd.b"], h0, c0)
        feat = np.concatenate([hf[-1], hb[-1]], axis=1)
        logits = feat @ params["out.w"] + params["out.b"]
        loss, dlogits = cross_entropy(logits, y_idx)

        grads = {
            "out.w": feat.T @ dlogits,
            "out.b": dlogits.sum(axis=0),
        }
        dfeat = dlogits @ params["out.w"].T
        dhf = np.zeros_like(hf)
        dhf[-1] = dfeat[:, :hid]
        dhb = np.zeros_like(hb)
        dhb[-1] = dfeat[:, hid:]
        _, dwx, dwh, db, _, _ = kernels.lstm_backward(
            xs, params["fwd.wx"], params["fwd.wh"], h0, c0, hf, cf, gf,
            dhf, np.zeros_like(h0))
        grads["fwd.wx"], grads["fwd.wh"], grads["fwd.b"] = dwx, dwh, db
        _, dwx, dwh, db, _, _ = kernels.lstm_backward(
            xr, params["bwd.wx"], params["bwd.wh"], h0, c0, hb, cb, gb,
            dhb, np.zeros_like(h0))
        grads["bwd.wx"], grads["bwd.wh"], grads["bwd.b"] = dwx, dwh, db
        return loss, grads, softmax(logits)


# ---------------------------------------------------------------------------
# tcn


def _causal_conv(x, w, b, dilation):
    """Dilated causal conv1d: x (B, Cin, T), w (Cout, Cin, K) -> (B, Cout, T)."""
    ksize = w.shape[2]
    pad = dilation * (ksize - 1)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, 0)))
    t_len = x.shape[2]
    y = np.zeros((x.shape[0], w.shape[0], t_len))
    for k in range(ksize):
        y += np.einsum("bct,oc->bot", xp[:, :, k * dilation:k * dilation + t_len],
                       w[:, :, k])
    return y + b[None, :, None], xp


def _causal_conv_backward(dy, xp, w, dilation):
    """Gradients of :func:`_causal_conv` w.r.t. (x, w, b)."""
    ksize = w.shape[2]
    pad = dilation * (ksize - 1)
    t_len = dy.shape[2]
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for k in range(ksize):
        sl = slice(k * dilation, k * dilation + t_len)
        dw[:, :, k] = np.einsum("bot,bct->oc", dy, xp[:, :, sl])
        dxp[:, :, sl] += np.einsum("bot,oc->bct", dy, w[:, :, k])
    return dxp[:, :, pad:], dw, dy.sum(axis=(0, 2))


class TcnArch:
    name = "tcn"

    def init(self, config, rng):
        chans = config.tcn_channels
        ksize = config.kernel
        params = {}
        in_ch = 1
        for lvl, _ in enumerate(config.tcn_dilations):
            params[f"conv{lvl}.w"] = _uniform(rng, (chans, in_ch, ksize),
                                              in_ch * ksize)
            params[f"conv{lvl}.b"] = _uniform(rng, (chans,), in_ch * ksize)
            if in_ch != chans:
                params[f"conv{lvl}.proj"] = _uniform(rng, (chans, in_ch), in_ch)
            in_ch = chans
        params["out.w"] = _uniform(rng, (chans, N_CLASSES), chans)
        params["out.b"] = _uniform(rng, (N_CLASSES,), chans)
        return params

    def _forward(self, config, params, x):
        dilations = tuple(config.tcn_dilations)
        cur = np.asarray(x, dtype=np.float64)[:, None, :]
        caches = []
        for lvl, dil in enumerate(dilations):
            y, xp = _causal_conv(cur, params[f"conv{lvl}.w"],
                                 params[f"conv{lvl}.b"], dil)
            z = np.maximum(y, 0.0)
            proj = params.get(f"conv{lvl}.proj")
            res = cur if proj is None else np.einsum("bit,oi->bot", cur, proj)
            caches.append((cur, xp, y > 0, proj))
            cur = z + res
        feat = cur.mean(axis=2)
        logits = feat @ params["out.w"] + params["out.b"]
        return logits, feat, caches, cur.shape[2]

    def predict_proba(self, config, params, x):
        logits, _, _, _ = self._forward(config, params, x)
        return softmax(logits)

    def loss_grads(self, config, params, x, y_idx):
        logits, feat, caches, t_len = self._forward(config, params, x)
        dilations = tuple(config.tcn_dilations)
        loss, dlogits = cross_entropy(logits, y_idx)
        grads = {
            "out.w": feat.T @ dlogits,
            "out.b": dlogits.sum(axis=0),
        }
        dfeat = dlogits @ params["out.w"].T
        dcur = np.repeat(dfeat[:, :, None], t_len, axis=2) / t_len
        for lvl in range(len(dilations) - 1, -1, -1):
            cur_in, xp, relu_mask, proj = caches[lvl]
            dz = dcur
            dy = dz * relu_mask
            dx, dw, db = _causal_conv_backward(dy, xp, params[f"conv{lvl}.w"],
                                               dilations[lvl])
            grads[f"conv{lvl}.w"] = dw
            grads[f"conv{lvl}.b"] = db
            if proj is None:
                dcur = dx + dz
            else:
                grads[f"conv{lvl}.proj"] = np.einsum("bot,bit->oi", dz, cur_in)
                dcur = dx + np.einsum("bot,oi->bit", dz, proj)
        return loss, grads, softmax(logits)


# ---------------------------------------------------------------------------
# ae_mlp


class AeMlpArch:
    name = "ae_mlp"

    def init(self, config, rng):
        hid, lat, mlp = config.hidden, config.latent, config.mlp_hidden
        params = _lstm_init(rng, 1, hid, "enc")
        params["lat.w"] = _uniform(rng, (hid, lat), hid)
        params["lat.b"] = _uniform(rng, (lat,), hid)
        params.update(_lstm_init(rng, lat, hid, "dec"))
        params["rec.w"] = _uniform(rng, (hid, 1), hid)
        params["rec.b"] = _uniform(rng, (1,), hid)
        params["mlp1.w"] = _uniform(rng, (lat + 1, mlp), lat + 1)
        params["mlp1.b"] = _uniform(rng, (mlp,), lat + 1)
        params["mlp2.w"] = _uniform(rng, (mlp, mlp), mlp)
        params["mlp2.b"] = _uniform(rng, (mlp,), mlp)
        params["out.w"] = _uniform(rng, (mlp, N_CLASSES), mlp)
        params["out.b"] = _uniform(rng, (N_CLASSES,), mlp)
        return params

    def _forward(self, config, params, x, want_cache):
        x = np.asarray(x, dtype=np.float64)
        xs = _as_seq(x)
        t_len, batch, _ = xs.shape
        hid = params["enc.wh"].shape[0]
        h0, c0 = _zeros_state(batch, hid)

        if want_cache:
            he, ce, ge = kernels.lstm_forward(xs, params["enc.wx"],
                                              params["enc.wh"], params["enc.b"],
                                              h0, c0)
        else:
            he = kernels.lstm_infer(xs, params["enc.wx"], params["enc.wh"],
                                    params["enc.b"], h0, c0)
        latent = he[-1] @ params["lat.w"] + params["lat.b"]

        # The decoder consumes the latent vector at every step.
        xd = np.ascontiguousarray(np.broadcast_to(latent[None, :, :],
                                                  (t_len, batch, latent.shape[1])))
        if want_cache:
            hd, cd, gd = kernels.lstm_forward(xd, params["dec.wx"],
                                              params["dec.wh"], params["dec.b"],
                                              h0, c0)
        else:
            hd = kernels.lstm_infer(xd, params["dec.wx"], params["dec.wh"],
                                    params["dec.b"], h0, c0)
        recon = (hd @ params["rec.w"] + params["rec.b"])[:, :, 0].T  # (B, T)

        err = recon - x
        mse = (err * err).mean(axis=1, keepdims=True)  # (B, 1)
        feat = np.concatenate([latent, mse], axis=1)
        z1 = feat @ params["mlp1.w"] + params["mlp1.b"]
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ params["mlp2.w"] + params["mlp2.b"]
        a2 = np.maximum(z2, 0.0)
        logits = a2 @ params["out.w"] + params["out.b"]

        if not want_cache:
            return logits, None
        cache = dict(x=x, xs=xs, h0=h0, c0=c0, he=he, ce=ce, ge=ge,
                     latent=latent, xd=xd, hd=hd, cd=cd, gd=gd, recon=recon,
                     err=err, mse=mse, feat=feat, a1=a1, z1=z1, a2=a2, z2=z2)
        return logits, cache

    def predict_proba(self, config, params, x):
        logits, _ = self._forward(config, params, x, want_cache=False)
        return softmax(logits)

    def reconstruction_mse(self, config, params, x):
        """Per-window reconstruction error (diagnostic)."""
        _, cache = self._forward(config, params, x, want_cache=True)
        return cache["mse"][:, 0]

    def loss_grads(self, config, params, x, y_idx):
        logits, cache = self._forward(config, params, x, want_cache=True)
        ce_loss, dlogits = cross_entropy(logits, y_idx)
        batch, t_len = cache["x"].shape
        recon_loss = float((cache["err"] ** 2).mean())
        loss = ce_loss + RECON_LOSS_WEIGHT * recon_loss

        grads = {}
        # MLP head
        grads["out.w"] = cache["a2"].T @ dlogits
        grads["out.b"] = dlogits.sum(axis=0)
        da2 = dlogits @ params["out.w"].T
        dz2 = da2 * (cache["z2"] > 0)
        grads["mlp2.w"] = cache["a1"].T @ dz2
        grads["mlp2.b"] = dz2.sum(axis=0)
        da1 = dz2 @ params["mlp2.w"].T
        dz1 = da1 * (cache["z1"] > 0)
        grads["mlp1.w"] = cache["feat"].T @ dz1
        grads["mlp1.b"] = dz1.sum(axis=0)
        dfeat = dz1 @ params["mlp1.w"].T

        lat_dim = cache["latent"].shape[1]
        dlatent = dfeat[:, :lat_dim].copy()
        dmse = dfeat[:, lat_dim:]  # (B, 1)

        # recon gradient: from the MSE feature and from the joint loss term
        drecon = dmse * 2.0 * cache["err"] / t_len
        drecon += cache["err"] * (2.0 * RECON_LOSS_WEIGHT / (batch * t_len))

        # decoder output layer
        dhd = np.zeros_like(cache["hd"])
        drec_seq = drecon.T[:, :, None]  # (T, B, 1)
        grads["rec.w"] = np.einsum("tbh,tbo->ho", cache["hd"], drec_seq)
        grads["rec.b"] = drec_seq.sum(axis=(0, 1))
        dhd += np.einsum("tbo,ho->tbh", drec_seq, params["rec.w"])

        dxd, dwx, dwh, db, _, _ = kernels.lstm_backward(
            cache["xd"], params["dec.wx"], params["dec.wh"], cache["h0"],
            cache["c0"], cache["hd"], cache["cd"], cache["gd"], dhd,
            np.zeros_like(cache["h0"]))
        grads["dec.wx"], grads["dec.wh"], grads["dec.b"] = dwx, dwh, db
        dlatent += dxd.sum(axis=0)

        # latent projection and encoder
        grads["lat.w"] = cache["he"][-1].T @ dlatent
        grads["lat.b"] = dlatent.sum(axis=0)
        dhe = np.zeros_like(cache["he"])
        dhe[-1] = dlatent @ params["lat.w"].T
        _, dwx, dwh, db, _, _ = kernels.lstm_backward(
            cache["xs"], params["enc.wx"], params["enc.wh"], cache["h0"],
            cache["c0"], cache["he"], cache["ce"], cache["ge"], dhe,
            np.zeros_like(cache["h0"]))
        grads["enc.wx"], grads["enc.wh"], grads["enc.b"] = dwx, dwh, db
        return loss, grads, softmax(logits)


# ---------------------------------------------------------------------------
# linear (degenerate 0-hidden case, used by the gradient checker)


class LinearArch:
    name = "linear"

    def init(self, config, rng, n_features=None):
        n = n_features if n_features is not None else 150
        return {"out.w": _uniform(rng, (n, N_CLASSES), n),
                "out.b": _uniform(rng, (N_CLASSES,), n)}

    def predict_proba(self, config, params, x):
        return softmax(np.asarray(x, dtype=np.float64) @ params["out.w"]
                       + params["out.b"])

    def loss_grads(self, config, params, x, y_idx):
        x = np.asarray(x, dtype=np.float64)
        logits = x @ params["out.w"] + params["out.b"]
        loss, dlogits = cross_entropy(logits, y_idx)
        grads = {"out.w": x.T @ dlogits, "out.b": dlogits.sum(axis=0)}
        return loss, grads, softmax(logits)


ARCHS = {a.name: a for a in (LstmArch(), BiLstmArch(), TcnArch(), AeMlpArch())}
ARCH_NAMES = tuple(ARCHS)


def get_arch(name):
    if name not in ARCHS:
        raise ParameterError(
            f"unknown architecture {name!r}; valid: {', '.join(ARCH_NAMES)}")
    return ARCHS[name]
