"""Capture residual-stream activations from a TransformerLens model into an MSCT cache.

Usage:
    python model_tap.py --model gpt2 --layer 1 --templates templates.txt --out cache/

Each template holds a "{date}" placeholder that is filled with every day of the
requested range ("January 1" ... "December 31"). Activations are read at
blocks.L.hook_resid_post before any layer norm.
"""

from __future__ import annotations

import argparse
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from msct import Cache, MsctError

SITE = "blocks.{}.hook_resid_post"


@dataclass
class TapSpec:
    model: str
    layer: int
    templates: list[str]
    out: str
    doy_range: tuple[int, int] = (1, 365)
    positions: list[int] = field(default_factory=lambda: [-1])
    layers: list[int] = field(default_factory=list)
    gradients: bool = True
    batch_size: int = 32
    seed: int = 0

    def capture_layers(self) -> list[int]:
        return sorted(set(self.layers) | {self.layer})

    def validate(self, n_layers: int) -> None:
        if not self.templates:
            raise MsctError("no prompt templates")
        if any("{date}" not in t for t in self.templates):
            raise MsctError("every template needs a {date} placeholder")
        lo, hi = self.doy_range
        if not 1 <= lo <= hi <= 365:
            raise MsctError(f"bad day range {self.doy_range}")
        for layer in self.capture_layers():
            if not 0 <= layer < n_layers:
                raise MsctError(f"layer {layer} outside model depth {n_layers}")
        if not self.positions:
            raise MsctError("no positions to capture")
        if self.batch_size < 1:
            raise MsctError("batch size must be positive")


def date_text(doy: int) -> str:
    d = dt.date(2023, 1, 1) + dt.timedelta(days=doy - 1)
    return f"{d.strftime('%B')} {d.day}"


def build_prompts(spec: TapSpec) -> tuple[list[str], list[int]]:
    prompts, doy = [], []
    lo, hi = spec.doy_range
    for t in spec.templates:
        for day in range(lo, hi + 1):
            prompts.append(t.replace("{date}", date_text(day)))
            doy.append(day)
    return prompts, doy


def _is_oom(e: BaseException) -> bool:
    return "out of memory" in str(e).lower()


def _run_group(model, tokens, spec: TapSpec):
    """Activations at every captured layer and position, plus the gradient of
    the argmax-token NLL at the last position with respect to the L* residual."""
    import torch

    layers = spec.capture_layers()
    store: dict[int, "torch.Tensor"] = {}

    def keep(act, hook):
        layer = int(hook.name.split(".")[1])
        if layer == spec.layer and spec.gradients:
            act.retain_grad()
        store[layer] = act
        return act

    hooks = [(SITE.format(layer), keep) for layer in layers]
    with torch.set_grad_enabled(spec.gradients):
        logits = model.run_with_hooks(tokens, fwd_hooks=hooks)
    last = logits[:, -1, :].float()
    labels = last.argmax(dim=-1)
    grad = None
    if spec.gradients:
        nll = torch.nn.functional.cross_entropy(last, labels, reduction="sum")
        model.zero_grad(set_to_none=True)
        nll.backward()
        grad = store[spec.layer].grad[:, -1, :].detach().double().cpu().numpy()
    acts = {
        layer: store[layer][:, spec.positions, :].detach().double().cpu().numpy() for layer in layers
    }
    return acts, labels.cpu().numpy(), grad


def extract_activations(
    spec: TapSpec,
    model=None,
    tokenize: Callable[[Sequence[str]], "np.ndarray"] | None = None,
) -> Cache:
    """Runs the model over every (template, day) prompt and returns the cache.

    model defaults to HookedTransformer.from_pretrained(spec.model). tokenize
    maps a list of prompts to token ids; it defaults to model.to_tokens.
    """
    import torch

    torch.manual_seed(spec.seed)
    if model is None:
        from transformer_lens import HookedTransformer

        model = HookedTransformer.from_pretrained(spec.model)
    model.eval()
    cfg = model.cfg
    spec.validate(cfg.n_layers)
    prompts, doy = build_prompts(spec)
    if tokenize is None:
        def tokenize(ps):
            return model.to_tokens(list(ps))

    # Group prompts by token length so no padding reaches the last position.
    token_rows = [np.asarray(tokenize([p]))[0] for p in prompts]
    by_len: dict[int, list[int]] = {}
    for i, row in enumerate(token_rows):
        by_len.setdefault(len(row), []).append(i)
    if min(by_len) < max(-p if p < 0 else p + 1 for p in spec.positions):
        raise MsctError("a prompt is shorter than the requested positions")

    n, d = len(prompts), cfg.d_model
    layers = spec.capture_layers()
    acts = {layer: np.zeros((n, len(spec.positions), d)) for layer in layers}
    labels = np.zeros(n, dtype=np.int64)
    grads = np.zeros((n, d)) if spec.gradients else None
    device = next(model.parameters()).device

    for length in sorted(by_len):
        idx = by_len[length]
        start, batch = 0, spec.batch_size
        while start < len(idx):
            chunk = idx[start:start + batch]
            tokens = torch.tensor(np.stack([token_rows[i] for i in chunk]), device=device)
            try:
                a, y, g = _run_group(model, tokens, spec)
            except (RuntimeError, MemoryError) as e:
                if not _is_oom(e) and not isinstance(e, MemoryError):
                    raise
                if batch == 1:
                    raise MsctError("out of memory at batch size 1") from e
                batch = max(1, batch // 2)
                continue
            for layer in layers:
                acts[layer][chunk] = a[layer]
            labels[chunk] = y
            if grads is not None:
                grads[chunk] = g
            start += len(chunk)

    last = spec.positions.index(-1) if -1 in spec.positions else len(spec.positions) - 1
    x = acts[spec.layer][:, last, :]
    doy_arr = np.asarray(doy, dtype=np.int64)
    means = np.full((365, d), np.nan)
    for day in range(spec.doy_range[0], spec.doy_range[1] + 1):
        means[day - 1] = x[doy_arr == day].mean(axis=0)

    cache = Cache({
        "d": int(d),
        "model": spec.model,
        "layer": int(spec.layer),
        "layers": layers,
        "site": SITE.format(spec.layer),
        "positions": list(spec.positions),
        "n_templates": len(spec.templates),
        "doy_range": list(spec.doy_range),
        "seed": int(spec.seed),
    })
    cache.put("activations", x)
    cache.put("doy", doy_arr)
    cache.put("labels", labels)
    cache.put("doy_means", means)
    for layer in layers:
        cache.put(f"resid.L{layer}", acts[layer])
    if grads is not None:
        cache.put("gradients", grads)

    # W_Q, W_K are (layer, head, d_model, d_head); the cache stores d_head x d rows.
    wq = model.W_Q.detach().double().cpu().numpy()
    wk = model.W_K.detach().double().cpu().numpy()
    lh = [(layer, h) for layer in layers for h in range(cfg.n_heads)]
    cache.put("qk.wq", np.stack([wq[layer, h].T for layer, h in lh]))
    cache.put("qk.wk", np.stack([wk[layer, h].T for layer, h in lh]))
    cache.put("qk.layer_head", np.asarray(lh, dtype=np.int64))
    return cache


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", required=True)
    ap.add_argument("--layer", type=int, required=True)
    ap.add_argument("--layers", type=int, nargs="*", default=[], help="extra layers to capture")
    ap.add_argument("--templates", required=True, help="file with one template per line")
    ap.add_argument("--doy-range", type=int, nargs=2, default=[1, 365])
    ap.add_argument("--positions", type=int, nargs="+", default=[-1])
    ap.add_argument("--no-gradients", action="store_true")
    ap.add_argument("--batch-size", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", required=True)
    a = ap.parse_args(argv)
    templates = [t for t in Path(a.templates).read_text(encoding="utf-8").splitlines() if t.strip()]
    spec = TapSpec(model=a.model, layer=a.layer, templates=templates, out=a.out, doy_range=tuple(a.doy_range),
                   positions=a.positions, layers=a.layers, gradients=not a.no_gradients,
                   batch_size=a.batch_size, seed=a.seed)
    try:
        cache = extract_activations(spec)
    except MsctError as e:
        print(f"model_tap: {e}")
        return 2
    cache.save(spec.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
