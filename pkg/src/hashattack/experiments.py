"""Two-stage pipeline orchestration: data, surrogate hashing, alignment, attack, evaluation.

A :class:`Workspace` binds a config to an output directory. Each stage method
persists its artifacts there and keeps the live objects cached, so the CLI can
run stages one process at a time while :func:`run_pipeline` and
:func:`ablation_sweep` chain them in memory.
"""

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import checkpoint
from .align_net import (
    RandomHead,
    build_han,
    image_targets,
    ImageFeatureProjector,
    mean_guide_distance,
    train_alignment,
)
from .attack import LatentProjection, attack_config_dict, run_attack
from .backend import ToyBackend
from .config import ExperimentConfig, dump_config, load_config
from .data import (
    ConfigError,
    ImageSample,
    _make,
    generate_dataset,
    load_dataset,
    save_dataset,
    stack_labels,
)
from .hash_model import hash_codes, hash_model_meta, load_hash_model, train_hash_model
from .hash_space import (
    RetrievalIndex,
    average_precision,
    load_index,
    save_index,
    t_map_at_k,
)
from .text import (
    HTTPCaptionProvider,
    MockCaptionProvider,
    MockSimilarityScorer,
    RetryingProvider,
    encode_text,
    guide_text,
    load_caption_cache,
    save_caption_cache,
)

log = logging.getLogger(__name__)

TABLE_COMBOS = [(15, 0, 0), (0, 1, 0), (0, 0, 8), (15, 1, 0), (0, 1, 8), (15, 0, 8), (15, 1, 8)]
STAGES = ("gen-data", "train-hash", "train-align", "attack", "eval", "report")


class PipelineError(RuntimeError):
    """A stage failed; ``report`` holds whatever was finished before it."""

    def __init__(self, stage, cause, report=None):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.report = report


class MissingArtifact(FileNotFoundError):
    pass


def chance_t_map(index, target_labels, K, trials=200, seed=0):
    """Expected t-MAP@K of a retrieval that ranks the database uniformly at random."""
    rng = np.random.default_rng(seed)
    rel_all = (index.labels.astype(np.int64) @ np.asarray(target_labels, dtype=np.int64).T) > 0
    K = min(K, len(index))
    aps = []
    for _ in range(trials):
        perm = rng.permutation(len(index))[:K]
        aps.append(np.mean([average_precision(rel_all[perm, j]) for j in range(rel_all.shape[1])]))
    return float(np.mean(aps))


@dataclass
class RunReport:
    t_map_benign: float = None
    t_map_adversarial: float = None
    t_map_chance: float = None
    t_map_own: float = None  # benign queries scored against their own labels (sanity check)
    K: int = None
    queries: list = field(default_factory=list)  # one dict per attacked query
    traces: dict = field(default_factory=dict)
    alignment: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)  # stage -> seconds, in execution order
    elapsed: dict = field(default_factory=dict)  # stage -> cumulative seconds at its end
    mean_attack_seconds: float = None
    config_text: str = ""
    artifacts: dict = field(default_factory=dict)
    status: str = "ok"
    failed_stage: str = None
    error: str = None

    _volatile = ("timings", "elapsed", "mean_attack_seconds", "artifacts")

    def to_dict(self):
        return dataclasses.asdict(self)

    def numerics(self):
        """Everything except wall-clock fields and file locations."""
        d = self.to_dict()
        for k in self._volatile:
            d.pop(k)
        for q in d["queries"]:
            q.pop("seconds", None)
        return d

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls(**json.load(f))

    def table(self):
        rows = [
            ("t-MAP@%s chance (random ranking)" % self.K, self.t_map_chance),
            ("t-MAP@%s benign queries" % self.K, self.t_map_benign),
            ("t-MAP@%s adversarial queries" % self.K, self.t_map_adversarial),
            ("own-label mAP@%s (hash model)" % self.K, self.t_map_own),
            ("mean attack seconds per image", self.mean_attack_seconds),
        ]
        lines = [f"status: {self.status}" + (f" (failed at {self.failed_stage}: {self.error})" if self.error else "")]
        lines += [f"{name:<40s} {'-' if v is None else f'{v:.4f}'}" for name, v in rows]
        if self.alignment:
            a = self.alignment
            lines.append(
                f"{'guide-code Hamming, untrained -> trained':<40s} "
                f"{a['held_out_before']:.3f} -> {a['held_out_after']:.3f}"
            )
        if self.timings:
            lines.append("")
            lines.append("stage timings (s):")
            lines += [f"  {k:<12s} {v:8.2f}" for k, v in self.timings.items()]
        if self.queries:
            lines.append("")
            lines.append(f"{'query':<8s} {'target':>6s} {'AP benign':>10s} {'AP adv':>8s} {'dH latent':>10s} {'dH image':>9s}")
            for q in self.queries:
                lines.append(
                    f"{q['query_id']:<8s} {q['target_class']:>6d} {q['ap_benign']:>10.4f} {q['ap_adversarial']:>8.4f} "
                    f"{q['latent_hamming']:>10.1f} {q['decoded_hamming']:>9.1f}"
                )
        return "\n".join(lines) + "\n"


class Workspace:
    """Lazily loaded, persisted pipeline state for one config and output directory."""

    def __init__(self, cfg, out):
        self.cfg = cfg if isinstance(cfg, ExperimentConfig) else load_config(cfg)
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self._cache = {}
        self.timings = {}

    # ---- paths ----

    def path(self, name):
        return self.out / name

    def _need(self, name, stage):
        p = self.path(name)
        if not p.exists():
            raise MissingArtifact(f"{p} not found; run the {stage!r} stage first")
        return p

    def _timed(self, stage, fn):
        t0 = time.perf_counter()
        out = fn()
        self.timings[stage] = self.timings.get(stage, 0.0) + time.perf_counter() - t0
        self._save_timings()
        return out

    def _save_timings(self):
        p = self.path("timings.json")
        old = json.loads(p.read_text()) if p.exists() else {}
        old.update(self.timings)
        p.write_text(json.dumps(old, indent=1))

    def write_config(self):
        text = self.cfg.source_text if self.cfg.source_text is not None else dump_config(self.cfg)
        with open(self.path("config.ini"), "w", newline="") as f:
            f.write(text)

    # ---- stage: data ----

    DERIVED = (
        "hash_model.npz", "index.tsv", "captions.jsonl", "han.npz", "alignment.json", "alignment_log.csv",
        "backend.npz", "projection.npz", "adversarial.npz", "traces.json", "metrics.json", "timings.json",
    )

    def gen_data(self):
        # a fresh dataset invalidates everything downstream
        for name in self.DERIVED:
            self.path(name).unlink(missing_ok=True)
        self._cache.clear()

        def go():
            db, q, tg = generate_dataset(self.cfg.dataset, self.cfg.pairing_seed)
            save_dataset(self.path("dataset.npz"), db, q, tg)
            self.write_config()
            return db, q, tg

        self._cache["dataset"] = self._timed("gen-data", go)
        return self._cache["dataset"]

    @property
    def dataset(self):
        if "dataset" not in self._cache:
            self._cache["dataset"] = load_dataset(self._need("dataset.npz", "gen-data"))
        return self._cache["dataset"]

    # ---- stage: surrogate hash model ----

    def train_hash(self):
        def go():
            db = self.dataset[0]
            h = self.cfg.hash_model
            model = train_hash_model(
                db, h.k, seed=h.seed, epochs=h.epochs, lr=h.lr, batch_size=h.batch_size,
                quant_weight=h.quant_weight, width=h.width, augment_data=h.augment,
            )
            checkpoint.save_module(self.path("hash_model.npz"), model, hash_model_meta(model))
            index = RetrievalIndex([s.id for s in db], hash_codes(model, db), stack_labels(db))
            save_index(index, self.path("index.tsv"))
            return model, index

        self._cache["hash_model"], self._cache["index"] = self._timed("train-hash", go)
        return self._cache["hash_model"]

    @property
    def hash_model(self):
        if "hash_model" not in self._cache:
            state, meta = checkpoint.load_state_dict(self._need("hash_model.npz", "train-hash"))
            self._cache["hash_model"] = load_hash_model(state, meta)
        return self._cache["hash_model"]

    @property
    def index(self):
        if "index" not in self._cache:
            self._cache["index"] = load_index(self._need("index.tsv", "train-hash"))
        return self._cache["index"]

    # ---- text ----

    def _provider(self):
        t = self.cfg.text
        if t.provider == "http":
            return RetryingProvider(HTTPCaptionProvider(t.endpoint, t.model, t.timeout, t.token_env), retries=t.retries)
        return MockCaptionProvider(self.cfg.dataset.num_classes, self.cfg.caption_seed)

    @property
    def captions(self):
        if "captions" not in self._cache:
            p = self.path("captions.jsonl")
            self._cache["captions"] = load_caption_cache(p) if p.exists() else {}
        return self._cache["captions"]

    def text_latents(self, images):
        """Guide-text latent per image, captioning through the on-disk cache."""
        e = self.cfg.evaluation
        provider, scorer = self._provider(), MockSimilarityScorer(self.cfg.dataset.num_classes)
        n_before = len(self.captions)
        out = np.stack([
            encode_text(guide_text(provider, scorer, im, e.n_captions, e.caption_threshold, self.captions))
            for im in images
        ])
        if len(self.captions) != n_before:
            save_caption_cache(self.captions, self.path("captions.jsonl"))
        return out

    # ---- stage: alignment ----

    def train_align(self):
        def go():
            db = self.dataset[0]
            model = self.hash_model
            cfg = self.cfg.alignment
            z_db = self.text_latents(db)
            han = build_han(self.cfg.hash_model.k, cfg.seed)
            projector = ImageFeatureProjector(model.feature_dim, seed=cfg.seed)
            # every 8th database image is held out to measure alignment
            held = np.arange(len(db)) % 8 == 7
            train_pairs = [(z, im) for z, im, h in zip(z_db, db, held) if not h]
            _, codes_held = image_targets(model, projector, [im for im, h in zip(db, held) if h])
            before = mean_guide_distance(han, z_db[held], codes_held)
            han, history = train_alignment(
                han, train_pairs, model, cfg, projector, log_path=self.path("alignment_log.csv")
            )
            for p in han.parameters():
                p.requires_grad_(False)
            after = mean_guide_distance(han, z_db[held], codes_held)
            summary = {"held_out_before": before, "held_out_after": after, "final_loss": history[-1][3] if history else None}
            checkpoint.save_module(self.path("han.npz"), han, {"kind": "han", "k": han.k, "in_dim": han.in_dim})
            self.path("alignment.json").write_text(json.dumps(summary, indent=1))
            return han, summary

        self._cache["han"], self._cache["alignment"] = self._timed("train-align", go)
        return self._cache["han"]

    @property
    def han(self):
        if "han" not in self._cache:
            state, meta = checkpoint.load_state_dict(self._need("han.npz", "train-align"))
            han = build_han(meta["k"], in_dim=meta["in_dim"])
            han.load_state_dict(state)
            for p in han.parameters():
                p.requires_grad_(False)
            self._cache["han"] = han
        return self._cache["han"]

    @property
    def alignment(self):
        if "alignment" not in self._cache:
            p = self.path("alignment.json")
            self._cache["alignment"] = json.loads(p.read_text()) if p.exists() else {}
        return self._cache["alignment"]

    # ---- latent backend and latent reader ----

    @property
    def backend(self):
        if "backend" not in self._cache:
            p = self.path("backend.npz")
            if p.exists():
                arrays, _ = checkpoint.load_arrays(p)
                self._cache["backend"] = ToyBackend.from_arrays(arrays, self.cfg.backend)
            else:
                b = ToyBackend.fit(self.dataset[0], self.cfg.backend)
                checkpoint.save_arrays(p, b.state_arrays(), dataclasses.asdict(self.cfg.backend))
                self._cache["backend"] = b
        return self._cache["backend"]

    @property
    def projection(self):
        if "projection" not in self._cache:
            p = self.path("projection.npz")
            if p.exists():
                arrays, _ = checkpoint.load_arrays(p)
                proj = LatentProjection(arrays["weight"], arrays["z_mean"], arrays["t_mean"])
            else:
                db = self.dataset[0]
                with torch.no_grad():
                    lat = torch.stack([self.backend.encode_latent(im).z for im in db]).numpy()
                proj = LatentProjection.fit(lat, self.text_latents(db), self.cfg.evaluation.projection_ridge)
                checkpoint.save_module(p, proj, {"kind": "latent_projection"})
            self._cache["projection"] = proj
        return self._cache["projection"]

    # ---- stage: attack ----

    def _target_override(self, qi, query, label):
        C = self.cfg.dataset.num_classes
        if not 0 <= label < C:
            raise ConfigError(f"target label {label} outside 0..{C - 1}")
        if query.labels[label]:
            raise ConfigError(f"target label {label} overlaps query {query.id}'s own labels")
        rng = np.random.default_rng([self.cfg.pairing_seed, 2, qi, label])
        onehot = np.zeros(C, dtype=np.int8)
        onehot[label] = 1
        img = _make("t", qi, [label], rng, self.cfg.dataset)
        return ImageSample(f"{img.id}c{label}", img.pixels, img.labels), onehot

    def attack(self, query_ids=None, target_label=None, head=None, attack_cfg=None, save=True):
        """Attack the selected queries (all by default). Returns ``{query_id: (AttackResult, target_label)}``."""
        def go():
            _, queries, targets = self.dataset
            pos = {q.id: i for i, q in enumerate(queries)}
            ids = [q.id for q in queries] if query_ids is None else list(query_ids)
            for qid in ids:
                if qid not in pos:
                    raise ConfigError(f"unknown query id {qid!r}")
            cfg = attack_cfg or self.cfg.attack
            model, backend, proj = self.hash_model, self.backend, self.projection
            h = self.han if head is None else head
            results = {}
            for qid in ids:
                i = pos[qid]
                query = queries[i]
                timg, tlab = targets[i] if target_label is None else self._target_override(i, query, target_label)
                z_b, z_t = self.text_latents([query, timg])
                res = run_attack(query, z_b, z_t, h, proj, backend, cfg, hash_model=model)
                results[qid] = (res, np.asarray(tlab, dtype=np.int8))
                if save:
                    res.save(self.path("attacks"), qid)
            if save:
                self._merge_adversarial(results)
            return results

        return self._timed("attack", go)

    def _merge_adversarial(self, results):
        p = self.path("adversarial.npz")
        rows = {}
        if p.exists():
            arrays, _ = checkpoint.load_arrays(p)
            for j, qid in enumerate(arrays["query_ids"]):
                rows[str(qid)] = {k: arrays[k][j] for k in arrays if k != "query_ids"}
        for qid, (res, tlab) in results.items():
            rows[qid] = {
                "codes": res.code,
                "pixels": res.pixels,
                "target_labels": tlab,
                "latent_hamming": np.float64(res.trace["hamming"][-1] if res.trace["hamming"] else res.baseline_hamming),
                "baseline_hamming": np.float64(res.baseline_hamming),
                "decoded_hamming": np.float64(res.trace["decoded_hamming"]),
                "seconds": np.float64(res.seconds),
            }
        ids = sorted(rows)
        arrays = {"query_ids": np.array(ids)}
        for key in rows[ids[0]]:
            arrays[key] = np.stack([rows[q][key] for q in ids])
        checkpoint.save_arrays(p, arrays, {"kind": "adversarial"})
        traces_p = self.path("traces.json")
        traces = json.loads(traces_p.read_text()) if traces_p.exists() else {}
        traces.update({qid: res.trace for qid, (res, _) in results.items()})
        traces_p.write_text(json.dumps(dict(sorted(traces.items()))))

    def adversarial(self):
        arrays, _ = checkpoint.load_arrays(self._need("adversarial.npz", "attack"))
        arrays["query_ids"] = [str(q) for q in arrays["query_ids"]]
        return arrays

    # ---- stage: evaluation ----

    def evaluate(self, adv=None):
        """t-MAP of benign and adversarial codes for the attacked queries, same index and targets."""
        def go():
            a = self.adversarial() if adv is None else adv
            _, queries, _ = self.dataset
            by_id = {q.id: q for q in queries}
            qs = [by_id[qid] for qid in a["query_ids"]]
            K = self.cfg.evaluation.K
            index = self.index
            benign_codes = hash_codes(self.hash_model, qs)
            tl = a["target_labels"]
            t_b, ap_b = t_map_at_k(index, zip(benign_codes, tl), K, return_per_query=True)
            t_a, ap_a = t_map_at_k(index, zip(a["codes"], tl), K, return_per_query=True)
            own = t_map_at_k(index, [(c, q.labels) for c, q in zip(benign_codes, qs)], K)
            chance = chance_t_map(index, tl, K, self.cfg.evaluation.chance_trials, self.cfg.pairing_seed)
            per_query = [
                {
                    "query_id": qid,
                    "target_class": int(np.flatnonzero(tl[j])[0]),
                    "ap_benign": ap_b[j],
                    "ap_adversarial": ap_a[j],
                    "baseline_hamming": float(a["baseline_hamming"][j]),
                    "latent_hamming": float(a["latent_hamming"][j]),
                    "decoded_hamming": float(a["decoded_hamming"][j]),
                    "seconds": float(a["seconds"][j]),
                }
                for j, qid in enumerate(a["query_ids"])
            ]
            metrics = {
                "K": K,
                "t_map_benign": t_b,
                "t_map_adversarial": t_a,
                "t_map_chance": chance,
                "t_map_own": own,
                "queries": per_query,
            }
            self.path("metrics.json").write_text(json.dumps(metrics, indent=1))
            return metrics

        return self._timed("eval", go)

    # ---- stage: report ----

    def report(self, status="ok", failed_stage=None, error=None):
        t0 = time.perf_counter()
        rep = RunReport(status=status, failed_stage=failed_stage, error=error)
        cfg_p = self.path("config.ini")
        if cfg_p.exists():
            with open(cfg_p, newline="") as f:
                rep.config_text = f.read()
        m_p = self.path("metrics.json")
        if m_p.exists():
            m = json.loads(m_p.read_text())
            rep.K = m["K"]
            rep.t_map_benign, rep.t_map_adversarial = m["t_map_benign"], m["t_map_adversarial"]
            rep.t_map_chance, rep.t_map_own = m["t_map_chance"], m["t_map_own"]
            rep.queries = m["queries"]
            rep.mean_attack_seconds = float(np.mean([q["seconds"] for q in m["queries"]]))
        tr_p = self.path("traces.json")
        if tr_p.exists():
            rep.traces = json.loads(tr_p.read_text())
        rep.alignment = self.alignment
        plots = []
        if status == "ok" and m_p.exists():
            from .plots import emit_plots

            plots = emit_plots(self, rep)
        t_p = self.path("timings.json")
        timings = json.loads(t_p.read_text()) if t_p.exists() else {}
        timings["report"] = timings.get("report", 0.0) + time.perf_counter() - t0
        t_p.write_text(json.dumps(timings, indent=1))
        order = [s for s in STAGES if s in timings] + [s for s in timings if s not in STAGES]
        rep.timings = {s: timings[s] for s in order}
        total = 0.0
        for s in order:
            total += rep.timings[s]
            rep.elapsed[s] = total
        rep.artifacts = {
            p.name: str(p)
            for p in sorted(self.out.iterdir())
            if p.is_file() and p.name not in ("report.json", "report.txt")
        }
        rep.artifacts.update({f"plots/{Path(p).name}": str(p) for p in plots})
        if self.path("attacks").exists():
            rep.artifacts["attacks/"] = str(self.path("attacks"))
        rep.artifacts["report.json"] = str(self.path("report.json"))
        rep.artifacts["report.txt"] = str(self.path("report.txt"))
        rep.save(self.path("report.json"))
        self.path("report.txt").write_text(rep.table())
        return rep


def run_pipeline(cfg, out):
    """Run every stage in order and return the :class:`RunReport`.

    On failure the partial report (tagged with the failing stage) is written
    and attached to the raised :class:`PipelineError`.
    """
    ws = Workspace(cfg, out)
    steps = [
        ("gen-data", ws.gen_data),
        ("train-hash", ws.train_hash),
        ("train-align", ws.train_align),
        ("attack", ws.attack),
        ("eval", ws.evaluate),
    ]
    for stage, fn in steps:
        try:
            fn()
        except Exception as e:
            log.error("stage %s failed: %s", stage, e)
            rep = ws.report(status="failed", failed_stage=stage, error=f"{type(e).__name__}: {e}")
            raise PipelineError(stage, e, rep) from e
    return ws.report()


# ---- ablation ----

@dataclass
class AblationTable:
    K: int
    seeds: list
    benign: dict  # seed -> benign t-MAP
    rows: list  # {"kappa": [k1,k2,k3], "han": {seed: t}, "no_han": {seed: t}}

    @staticmethod
    def _mean(d):
        return float(np.mean(list(d.values())))

    def lookup(self, kappa, variant="han"):
        for r in self.rows:
            if tuple(r["kappa"]) == tuple(float(k) for k in kappa):
                return self._mean(r[variant])
        raise KeyError(kappa)

    @property
    def benign_mean(self):
        return self._mean(self.benign)

    def to_dict(self):
        return dataclasses.asdict(self)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)

    def render(self):
        lines = [
            f"t-MAP@{self.K}, mean over seeds {self.seeds}; benign baseline {self.benign_mean:.4f}",
            f"{'k1':>5s} {'k2':>5s} {'k3':>5s} | {'w/ HAN':>8s} {'w/o HAN':>8s}",
        ]
        for r in self.rows:
            k1, k2, k3 = r["kappa"]
            lines.append(f"{k1:5g} {k2:5g} {k3:5g} | {self._mean(r['han']):8.4f} {self._mean(r['no_han']):8.4f}")
        return "\n".join(lines) + "\n"


def ablation_sweep(cfg, combos=None, out=None, seeds=None):
    """t-MAP per loss-weight combo, with and without the trained alignment head.

    Models, index and backend are trained once per seed and shared; only the
    attack stage is re-run. The "without" variant swaps the alignment network
    for a fixed random tanh head on the same latent projection.
    """
    if isinstance(cfg, (str, Path)):
        cfg = load_config(cfg)
    combos = [tuple(float(k) for k in c) for c in (combos or TABLE_COMBOS)]
    if not combos:
        raise ValueError("ablation needs at least one combo")
    seeds = list(cfg.evaluation.ablation_seeds if seeds is None else seeds)
    out = Path(out) if out is not None else None
    rows = [{"kappa": list(c), "han": {}, "no_han": {}} for c in combos]
    benign = {}
    for seed in seeds:
        scfg = cfg.with_seed(seed)
        if out is None:
            import tempfile

            tmp = tempfile.TemporaryDirectory()
            ws_dir = tmp.name
        else:
            ws_dir = out / f"seed{seed}"
        ws = Workspace(scfg, ws_dir)
        ws.gen_data()
        ws.train_hash()
        ws.train_align()
        no_han = RandomHead(scfg.hash_model.k, seed=seed)
        for row in rows:
            acfg = dataclasses.replace(scfg.attack, kappa1=row["kappa"][0], kappa2=row["kappa"][1], kappa3=row["kappa"][2])
            for variant, head in (("han", None), ("no_han", no_han)):
                res = ws.attack(head=head, attack_cfg=acfg, save=False)
                adv = _results_to_arrays(res)
                m = ws.evaluate(adv)
                row[variant][str(seed)] = m["t_map_adversarial"]
                benign[str(seed)] = m["t_map_benign"]
                log.info("seed %s kappa %s %s: %.4f", seed, row["kappa"], variant, m["t_map_adversarial"])
    table = AblationTable(cfg.evaluation.K, seeds, benign, rows)
    if out is not None:
        table.save(out / "ablation.json")
        (out / "ablation.txt").write_text(table.render())
    return table


def _results_to_arrays(results):
    ids = sorted(results)
    rs = [results[q][0] for q in ids]
    return {
        "query_ids": ids,
        "codes": np.stack([r.code for r in rs]),
        "target_labels": np.stack([results[q][1] for q in ids]),
        "baseline_hamming": np.array([r.baseline_hamming for r in rs]),
        "latent_hamming": np.array([r.trace["hamming"][-1] if r.trace["hamming"] else r.baseline_hamming for r in rs]),
        "decoded_hamming": np.array([r.trace["decoded_hamming"] for r in rs]),
        "seconds": np.array([r.seconds for r in rs]),
    }


def attack_settings(cfg):
    return attack_config_dict(cfg.attack)
