"""Binary cache for factorization data.

One cache entry per (model content hash, dt, stationarity threshold):
a ``.npz`` with the arrays (short-time map and inverse, spectral data,
stationarity history) plus a ``.json`` sidecar with scalars.  Entries
are reused across CLI runs; a hash mismatch on load is an error, never
a silent recompute.
"""

import json
import os

import numpy as np

from .errors import ValidationError
from .maps import (
    DynamicalMap,
    FactorizationData,
    MemoryTimeEstimate,
    SpectralDecomposition,
    SuperOperator,
)


def cache_key(model, dt, threshold):
    return f"{model.content_hash[:20]}-dt{dt:.6g}-thr{threshold:.3e}"


def save_factorization_data(fdata, cache_dir):
    os.makedirs(cache_dir, exist_ok=True)
    key = cache_key(fdata.model, fdata.dt, fdata.threshold)
    base = os.path.join(cache_dir, key)
    np.savez(
        base + ".npz",
        e_tauc=fdata.e_tauc.matrix,
        e_tauc_inv=fdata.e_tauc_inv,
        rates=fdata.spec.rates,
        right=fdata.spec.right,
        left=fdata.spec.left,
        norm_history=fdata.memory.norm_history,
    )
    meta = {
        "model_hash": fdata.model.content_hash,
        "model_label": fdata.model.label,
        "env_hash": fdata.model.env_hash,
        "dt": fdata.dt,
        "threshold": fdata.threshold,
        "tau_c": fdata.tau_c,
        "converged": fdata.memory.converged,
        "e_tauc_cond": fdata.e_tauc_cond,
        "spectral_cond": fdata.spec.eig_cond,
        "steady_index": fdata.spec.steady_index,
        "eigencount": fdata.eigencount,
    }
    with open(base + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return base


def load_factorization_data(model, dt, threshold, cache_dir):
    """Load a cached entry for this exact model/dt/threshold, or None."""
    base = os.path.join(cache_dir, cache_key(model, dt, threshold))
    if not (os.path.exists(base + ".npz") and os.path.exists(base + ".json")):
        return None
    with open(base + ".json") as fh:
        meta = json.load(fh)
    if meta["model_hash"] != model.content_hash:
        raise ValidationError(
            f"cache entry {base} was produced by a different model "
            f"({meta['model_hash'][:12]} != {model.content_hash[:12]})"
        )
    data = np.load(base + ".npz")
    memory = MemoryTimeEstimate(
        tau_c=meta["tau_c"],
        threshold=meta["threshold"],
        dt=meta["dt"],
        converged=meta["converged"],
        norm_history=data["norm_history"],
    )
    sysspace = model.space.system()
    e_tauc = DynamicalMap(
        superop=SuperOperator(data["e_tauc"], sysspace),
        t_start=0.0,
        t_end=meta["tau_c"],
        env_state_hash=meta["env_hash"],
    )
    spec = SpectralDecomposition(
        rates=data["rates"],
        right=data["right"],
        left=data["left"],
        dt=meta["dt"],
        steady_index=meta["steady_index"],
        eig_cond=meta["spectral_cond"],
    )
    return FactorizationData(
        model=model,
        dt=meta["dt"],
        threshold=meta["threshold"],
        memory=memory,
        e_tauc=e_tauc,
        e_tauc_inv=data["e_tauc_inv"],
        e_tauc_cond=meta["e_tauc_cond"],
        spec=spec,
        eigencount=meta["eigencount"],
    )
