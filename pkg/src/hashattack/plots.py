"""Static report figures: loss curves, t-MAP bars, perturbation heatmaps."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TRACE_KEYS = ("distance", "path", "recon", "attention", "total")


def loss_curves(traces, path):
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.6))
    for key in TRACE_KEYS:
        rows = [t[key] for t in traces.values() if t.get(key)]
        if rows:
            axes[0].plot(np.arange(1, len(rows[0]) + 1), np.mean(rows, axis=0), label=key)
    axes[0].set_yscale("symlog", linthresh=1e-3)
    axes[0].set_xlabel("step")
    axes[0].set_title("mean loss per step")
    if axes[0].lines:
        axes[0].legend(fontsize=8)
    ham = [t["hamming"] for t in traces.values() if t.get("hamming")]
    if ham:
        axes[1].plot(np.arange(1, len(ham[0]) + 1), np.mean(ham, axis=0))
    axes[1].set_xlabel("step")
    axes[1].set_title("mean latent-path Hamming distance to target")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def tmap_bars(report, path):
    names = ["chance", "benign", "adversarial"]
    vals = [report.t_map_chance, report.t_map_benign, report.t_map_adversarial]
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.bar(names, vals, color=["0.7", "tab:blue", "tab:red"])
    for i, v in enumerate(vals):
        ax.text(i, v, f"{v:.3f}", ha="center", va="bottom")
    ax.set_ylabel(f"t-MAP@{report.K}")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def perturbation_grid(benign, adversarial, ids, path):
    """Columns per query: benign image, adversarial image, mean |difference| heatmap."""
    n = len(ids)
    fig, axes = plt.subplots(3, n, figsize=(2.1 * n, 6.3), squeeze=False)
    for j, qid in enumerate(ids):
        x, xa = benign[j], adversarial[j]
        diff = np.abs(xa - x).mean(axis=0)
        axes[0, j].imshow(x.transpose(1, 2, 0))
        axes[0, j].set_title(qid, fontsize=8)
        axes[1, j].imshow(np.clip(xa, 0, 1).transpose(1, 2, 0))
        im = axes[2, j].imshow(diff, cmap="magma")
        fig.colorbar(im, ax=axes[2, j], fraction=0.046)
        for i in range(3):
            axes[i, j].set_xticks([])
            axes[i, j].set_yticks([])
    axes[0, 0].set_ylabel("benign")
    axes[1, 0].set_ylabel("adversarial")
    axes[2, 0].set_ylabel("|diff|")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def emit_plots(ws, report, max_examples=6):
    out = ws.path("plots")
    out.mkdir(exist_ok=True)
    paths = []
    if report.traces:
        paths.append(out / "loss_curves.png")
        loss_curves(report.traces, paths[-1])
    paths.append(out / "tmap.png")
    tmap_bars(report, paths[-1])
    adv = ws.adversarial()
    by_id = {q.id: q for q in ws.dataset[1]}
    ids = adv["query_ids"][:max_examples]
    paths.append(out / "perturbations.png")
    perturbation_grid([by_id[q].pixels for q in ids], adv["pixels"][: len(ids)], ids, paths[-1])
    return [str(p) for p in paths]
