"""Proxy registry and batch evaluation of one architecture."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ..archspace import (
    CellSpec,
    MacroConfig,
    count_flops,
    count_params,
    instantiate,
    network_topologies,
    nn_degree,
    nn_mass,
    parse_arch,
)
from ..tensor_core import RngState
from . import gradient, regions, spectral
from .config import ProxyConfig, ProxyError, ProxyScore, Sentinel, fingerprint, make_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProxyInfo:
    name: str
    higher_is_better: bool = True
    needs_network: bool = True


PROXIES: dict[str, ProxyInfo] = {p.name: p for p in [
    ProxyInfo("grad_norm"), ProxyInfo("snip"), ProxyInfo("synflow"), ProxyInfo("grasp"),
    ProxyInfo("gradsign"), ProxyInfo("fisher"), ProxyInfo("jacob_cov"), ProxyInfo("zen"),
    ProxyInfo("ntk_cond", higher_is_better=False), ProxyInfo("regions"), ProxyInfo("logdet"),
    ProxyInfo("nn_mass", needs_network=False), ProxyInfo("nn_degree", needs_network=False),
    ProxyInfo("params", needs_network=False), ProxyInfo("flops", needs_network=False),
]}

# proxies computed from one shared forward/backward with the configured loss
_SHARED = ("grad_norm", "snip", "fisher")


def build_network(spec: CellSpec, macro: MacroConfig, cfg: ProxyConfig):
    """The network every proxy of a (spec, macro, cfg) job is evaluated on."""
    return instantiate(spec, macro, RngState(cfg.seed).derive("init"))


def structural_proxy(name: str, spec: CellSpec, macro: MacroConfig) -> float:
    if name == "params":
        return float(count_params(spec, macro))
    if name == "flops":
        return float(count_flops(spec, macro))
    if name == "nn_mass":
        return nn_mass(network_topologies(spec, macro))
    if name == "nn_degree":
        return nn_degree(network_topologies(spec, macro))
    raise KeyError(name)


def network_proxy(name: str, net, cfg: ProxyConfig, diagnostics: dict):
    if name == "grad_norm":
        return gradient.grad_norm(net, cfg)
    if name == "snip":
        return gradient.snip(net, cfg)
    if name == "fisher":
        dead: list[str] = []
        value = gradient.fisher(net, cfg, flags=dead)
        if dead:
            diagnostics["dead_layers"] = dead
        return value
    if name == "synflow":
        return gradient.synflow(net, cfg)
    if name == "grasp":
        return gradient.grasp(net, cfg)
    if name == "gradsign":
        return gradient.gradsign(net, cfg)
    if name == "jacob_cov":
        return spectral.jacob_cov(net, cfg)
    if name == "zen":
        return spectral.zen_score(net, cfg, diagnostics)
    if name == "ntk_cond":
        return spectral.ntk_cond(net, cfg, diagnostics)
    if name == "regions":
        return regions.num_linear_regions(net, cfg)
    if name == "logdet":
        return regions.logdet_score(net, cfg)
    raise KeyError(name)


def _score(arch: str, name: str, value, cfg: ProxyConfig, fp: str, diagnostics: dict) -> ProxyScore:
    if isinstance(value, Sentinel):
        return ProxyScore(arch, name, None, fp, cfg.seed, sentinel=value.value, diagnostics=diagnostics)
    return ProxyScore(arch, name, float(value), fp, cfg.seed, diagnostics=diagnostics)


def evaluate_all(spec: CellSpec | str, cfg: ProxyConfig | None = None, proxies=None,
                 macro: MacroConfig | None = None) -> list[ProxyScore]:
    """Score one architecture with each requested proxy.

    Every proxy sees the same freshly initialised network (parameters are
    restored between proxies) and the same seeded batch, so each score equals
    the standalone call. Failures are recorded per proxy, never raised.
    """
    cfg = cfg or ProxyConfig()
    macro = macro or MacroConfig()
    spec = parse_arch(spec) if isinstance(spec, str) else spec
    arch = str(spec)
    proxies = list(proxies) if proxies is not None else list(PROXIES)
    unknown = [p for p in proxies if p not in PROXIES]
    if unknown:
        raise KeyError(f"unknown proxies: {unknown}")
    mdict = macro.to_dict()
    out: list[ProxyScore] = []
    net, snap = None, None
    shared = None
    for name in proxies:
        fp = fingerprint(name, arch, mdict, cfg)
        diagnostics: dict = {}
        try:
            if not PROXIES[name].needs_network:
                value = structural_proxy(name, spec, macro)
            else:
                if net is None:
                    net = build_network(spec, macro, cfg)
                    snap = net.snapshot()
                else:
                    net.restore(snap)
                if name in _SHARED:
                    if shared is None:
                        batch = make_batch(cfg, net.input_shape, net.num_classes)
                        shared = gradient.gradient_pass(net, cfg, batch, keep_activations="fisher" in proxies)
                    if name == "grad_norm":
                        value = gradient.grad_norm_from(shared)
                    elif name == "snip":
                        value = gradient.snip_from(shared)
                    else:
                        value, dead = gradient.fisher_from_activations(shared.activations)
                        if dead:
                            diagnostics["dead_layers"] = dead
                    if shared.trace.bn_clamped:
                        diagnostics["bn_clamped"] = {k: v.tolist() for k, v in shared.trace.bn_clamped}
                else:
                    value = network_proxy(name, net, cfg, diagnostics)
            out.append(_score(arch, name, value, cfg, fp, diagnostics))
        except (ProxyError, ArithmeticError, ValueError, RuntimeError) as exc:
            log.warning("proxy %s failed on %s: %s", name, arch, exc)
            diagnostics.update(getattr(exc, "diagnostics", {}))
            out.append(ProxyScore(arch, name, None, fp, cfg.seed, error=f"{type(exc).__name__}: {exc}",
                                  diagnostics=diagnostics))
    return out


def score_one(spec: CellSpec | str, proxy: str, cfg: ProxyConfig | None = None,
              macro: MacroConfig | None = None) -> ProxyScore:
    return evaluate_all(spec, cfg, [proxy], macro)[0]


def rank_value(score: ProxyScore) -> float | None:
    """Value oriented for ranking: sentinels map to the worst end for their proxy.

    Unknown proxy names fall back on the sentinel kind: an ill-conditioned
    NTK is lower-is-better (+inf), a singular kernel higher-is-better (-inf).
    """
    if score.error is not None:
        return None
    if score.sentinel is not None:
        info = PROXIES.get(score.proxy)
        higher = info.higher_is_better if info else score.sentinel != Sentinel.ILL_CONDITIONED.value
        return float("-inf") if higher else float("inf")
    return score.value


__all__ = ["PROXIES", "ProxyInfo", "ProxyError", "build_network", "evaluate_all", "rank_value", "score_one",
           "structural_proxy"]
