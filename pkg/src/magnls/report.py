"""Report rendering: delimited tables, JSON summaries and figures.

Every JSON report embeds the config hash, toolkit version and the Lambda
exponent convention in force, and is written atomically (temp + rename).
Floats pass through repr, so identical inputs give byte-identical files.
Figures are PNG files written next to the tables.
"""

from __future__ import annotations

import hashlib
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import __version__  # noqa: E402


def config_hash(config):
    """sha256 of the canonical JSON form of the configuration."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_atomic(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path, payload, config=None, convention=None):
    body = dict(to_jsonable(payload))
    if config is not None:
        body["config_hash"] = config_hash(config)
    body["version"] = __version__
    if convention is not None:
        body["convention"] = convention
    write_atomic(path, json.dumps(body, sort_keys=True, indent=2) + "\n")


def write_csv(path, header, rows):
    """Frozen column order; floats at 17 significant digits."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(f"{float(v):.17g}")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    write_atomic(path, "\n".join(lines) + "\n")


# --- figures ----------------------------------------------------------------

_META = {"Software": "magnls"}


def plot_profile(profile, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.plot(profile.radii, profile.values, lw=1.2)
    ax1.set_xlabel("r")
    ax1.set_ylabel("U(r)")
    ax1.set_title(f"ground state n={profile.n}, p={profile.p:g}")
    ax2.semilogy(profile.radii, profile.values, lw=1.2)
    ax2.set_xlabel("r")
    ax2.set_ylabel("U(r)")
    ax2.set_title(f"decay rate {profile.decay_rate:.4f}")
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_META)
    plt.close(fig)


def plot_landscape(spec, p, box, manifolds, path, convention="derived",
                   samples=160):
    from .landscape import lambda_eval
    if spec.n != 2:
        return
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    xs = np.linspace(lo[0], hi[0], samples)
    ys = np.linspace(lo[1], hi[1], samples)
    Z = np.empty((samples, samples))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            try:
                Z[j, i] = lambda_eval(spec, np.array([x, y]), p,
                                      convention).value
            except Exception:
                Z[j, i] = np.nan
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    cs = ax.contourf(xs, ys, Z, levels=30, cmap="viridis")
    fig.colorbar(cs, ax=ax, label="Lambda")
    colors = {"min": "white", "max": "red", "saddle": "orange",
              "degenerate": "gray"}
    for man in manifolds:
        pts = np.array([cp.x for cp in man.points])
        kinds = [cp.kind for cp in man.points]
        ax.scatter(pts[:, 0], pts[:, 1], s=18,
                   c=[colors.get(k, "black") for k in kinds],
                   edgecolors="black", linewidths=0.4,
                   label=f"{man.shape} (bound {man.multiplicity_bound})")
    ax.legend(loc="upper right", fontsize=7)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_META)
    plt.close(fig)


def plot_ladders(eps, series, path, title="scaling ladders"):
    """series: dict name -> values aligned with eps."""
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for name, vals in series.items():
        vals = np.asarray(vals, dtype=float)
        good = vals > 0
        if good.any():
            ax.loglog(np.asarray(eps)[good], vals[good], "o-", label=name,
                      lw=1.1, ms=4)
    ax.set_xlabel("eps")
    ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_META)
    plt.close(fig)


def plot_solution(field, path):
    grid = field.grid
    vals = np.abs(field.values)
    fig, axes = plt.subplots(1, 2, figsize=(8.6, 3.4))
    if grid.n == 1:
        axes[0].plot(grid.axis(0), vals, lw=1.2)
        axes[0].set_xlabel("x")
        axes[0].set_ylabel("|u|")
        axes[1].plot(grid.axis(0), np.angle(field.values), lw=1.0)
        axes[1].set_ylabel("arg u")
    else:
        k = np.unravel_index(int(np.argmax(vals)), vals.shape)
        sl = vals[(slice(None), slice(None)) + k[2:]] if grid.n == 3 \
            else vals
        ext = [grid.axis(0)[0], grid.axis(0)[-1],
               grid.axis(1)[0], grid.axis(1)[-1]]
        im = axes[0].imshow(sl.T, origin="lower", extent=ext, cmap="magma",
                            aspect="equal")
        fig.colorbar(im, ax=axes[0], label="|u|")
        line = vals[(slice(None),) + k[1:]]
        axes[1].plot(grid.axis(0), line, lw=1.2)
        axes[1].set_xlabel("x1 through the peak")
        axes[1].set_ylabel("|u|")
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_META)
    plt.close(fig)


def plot_sweep(report, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.6, 3.4))
    eps = np.asarray(report.eps_ladder, dtype=float)
    n_seeds = max((len(report.entries_for(e)) for e in eps), default=0)
    for idx in range(n_seeds):
        ds, es = [], []
        for e in eps:
            entries = report.entries_for(e)
            if idx < len(entries) and entries[idx].dist_to_critical \
                    is not None:
                es.append(e)
                ds.append(max(entries[idx].dist_to_critical, 1e-16))
        if ds:
            ax1.loglog(es, ds, "o-", lw=1.1, ms=4, label=f"seed {idx}")
    ax1.set_xlabel("eps")
    ax1.set_ylabel("dist(eps x*, critical set)")
    ax1.invert_xaxis()
    ax1.grid(True, which="both", alpha=0.3)
    ax1.legend(fontsize=8)
    counts = [report.distinct_orbits.get(float(e), 0) for e in eps]
    ax2.plot(eps, counts, "s-")
    ax2.set_xlabel("eps")
    ax2.set_ylabel("distinct orbits")
    ax2.invert_xaxis()
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_META)
    plt.close(fig)
