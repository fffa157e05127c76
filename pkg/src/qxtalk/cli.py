"""Config-driven command line for the full pipeline and its stages.

``run`` executes ingest -> encode -> prune -> search -> tune -> ablate ->
export in one process; the stage subcommands persist their outputs under
the run directory so later stages can resume from the written artifacts.
Configuration is a flat ``key = value`` text file, overridable first by
``QXTALK_<KEY>`` environment variables and then by command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ingest, prune, search, synth, tune
from .cost import CostReport, Problem, evaluate
from .ingest import GeneSelection, TargetDistribution
from .qsim import GateSpec, RegisterLayout, Topology, from_amplitudes, tensor
from .search import SearchConfig, SearchResult
from .tune import AngleVector, ContributionTable

log = logging.getLogger("qxtalk")

ENV_PREFIX = "QXTALK_"
STRATEGIES = ("local", "multi-epoch", "qubo-exact", "qubo-annealing", "qubo-vqe", "qubo-qaoa")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


class PipelineError(Exception):
    """Domain failure tagged with the pipeline stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class RunConfig:
    """Flat run settings; field names double as config-file keys."""

    synthetic: bool = False
    five_gene_ct2: bool = False
    mono_ct1: str = ""
    mono_ct2: str = ""
    co_ct1: str = ""
    co_ct2: str = ""
    delimiter: str = ""
    ct1_label: str = "CT1"
    ct2_label: str = "CT2"
    ct1_genes: list[str] = field(default_factory=list)
    ct2_genes: list[str] = field(default_factory=list)
    threshold: float = 0.01
    strategy: str = "multi-epoch"
    kl_tol: float = 0.01
    eps_prune: float = 1e-4
    n_choose: int = 2
    n_epochs: int = 0  # 0 -> one epoch per candidate
    max_depth: int = 12
    eval_mode: str = "exact"
    nshots: int = 8192
    seed: int = 0
    top_k: int = 4
    workers: int = 1
    out: str = "runs/latest"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.eval_mode not in ("exact", "shots"):
            raise ValueError("eval_mode must be 'exact' or 'shots'")


@dataclass
class RunReport:
    """Everything a finished run reports; serialized to report.json/report.txt."""

    config: dict
    ct1_genes: list[str]
    ct2_genes: list[str]
    baseline: CostReport
    candidate_pairs: list[tuple[int, int]]
    search_result: SearchResult
    angles: AngleVector
    tuned: CostReport
    contributions: ContributionTable
    edges: list[tune.NetworkEdge]
    wall_time_s: float


# --- configuration handling ----------------------------------------------

_LIST_FIELDS = {"ct1_genes", "ct2_genes"}
_BOOL_FIELDS = {"synthetic", "five_gene_ct2"}
_INT_FIELDS = {"n_choose", "n_epochs", "max_depth", "nshots", "seed", "top_k", "workers"}
_FLOAT_FIELDS = {"threshold", "kl_tol", "eps_prune"}


def _coerce(key: str, raw: str):
    value = raw.strip()
    if key in _BOOL_FIELDS:
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {key!r}: expected a boolean, got {value!r}")
    if key in _INT_FIELDS:
        try:
            return int(value)
        except ValueError:
            raise ValueError(f"config key {key!r}: expected an integer, got {value!r}") from None
    if key in _FLOAT_FIELDS:
        try:
            return float(value)
        except ValueError:
            raise ValueError(f"config key {key!r}: expected a number, got {value!r}") from None
    if key in _LIST_FIELDS:
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` document; '#' starts a comment, blank lines ignored."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValueError(f"config file not found: {path}") from None
    values: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{line_no}: expected 'key = value', got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ValueError(f"{path}:{line_no}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    values: dict = {}
    for f in dataclasses.fields(RunConfig):
        raw = environ.get(ENV_PREFIX + f.name.upper())
        if raw is not None:
            values[f.name] = _coerce(f.name, raw)
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge precedence: defaults < config file < environment < flags."""
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    values.update(env_overrides())
    flag_map = {
        "strategy": "strategy",
        "seed": "seed",
        "threshold": "threshold",
        "kl_tol": "kl_tol",
        "nshots": "nshots",
        "workers": "workers",
        "out": "out",
    }
    for attr, key in flag_map.items():
        flag = getattr(args, attr, None)
        if flag is not None:
            values[key] = flag
    if getattr(args, "exact", False):
        values["eval_mode"] = "exact"
    if getattr(args, "synthetic", False):
        values["synthetic"] = True
    return RunConfig(**values)


# --- shared pipeline pieces ----------------------------------------------


def _stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except ValueError as exc:
        raise PipelineError(stage, str(exc)) from exc


def _drop_empty_cells(matrix: ingest.ExpressionMatrix, name: str) -> ingest.ExpressionMatrix:
    totals = matrix.values.sum(axis=1)
    keep = totals > 0
    dropped = int((~keep).sum())
    if dropped:
        log.warning("%s: dropping %d cell(s) with zero total count", name, dropped)
        return ingest.ExpressionMatrix(values=matrix.values[keep], gene_names=matrix.gene_names)
    return matrix


def _cells_of(output: synth.TissueOutput, groups: tuple[str, ...]) -> ingest.ExpressionMatrix:
    mask = np.array([lab in groups for lab in output.cell_labels])
    return ingest.ExpressionMatrix(
        values=output.observed[:, mask].T.astype(np.float64), gene_names=list(output.gene_names)
    )


def synthetic_matrices(cfg: RunConfig):
    """Benchmark tissues for both conditions, split into the four input matrices."""
    tissue_cfg, (ct1_sel, ct2_sel), truth = synth.benchmark_preset(
        five_gene_ct2=cfg.five_gene_ct2, seed=cfg.seed
    )
    mono = synth.simulate(tissue_cfg, interaction_enabled=False)
    co = synth.simulate(tissue_cfg, interaction_enabled=True)
    sender_groups = (synth.GROUP_INTERACTING_SENDER, synth.GROUP_LONE_SENDER)
    receiver_groups = (synth.GROUP_INTERACTING_RECEIVER, synth.GROUP_LONE_RECEIVER)
    matrices = {
        "mono_ct1": _cells_of(mono, sender_groups),
        "mono_ct2": _cells_of(mono, receiver_groups),
        "co_ct1": _cells_of(co, (synth.GROUP_INTERACTING_SENDER,)),
        "co_ct2": _cells_of(co, (synth.GROUP_INTERACTING_RECEIVER,)),
    }
    return matrices, (ct1_sel, ct2_sel), truth, mono, co


def load_matrices(cfg: RunConfig):
    """The four input matrices plus gene selections, from files or the preset."""
    if cfg.synthetic:
        matrices, (ct1_sel, ct2_sel), _, _, _ = synthetic_matrices(cfg)
        if cfg.ct1_genes:
            ct1_sel = GeneSelection(cell_type_label=cfg.ct1_label, genes=list(cfg.ct1_genes))
        if cfg.ct2_genes:
            ct2_sel = GeneSelection(cell_type_label=cfg.ct2_label, genes=list(cfg.ct2_genes))
        return matrices, ct1_sel, ct2_sel
    paths = {
        "mono_ct1": cfg.mono_ct1,
        "mono_ct2": cfg.mono_ct2,
        "co_ct1": cfg.co_ct1,
        "co_ct2": cfg.co_ct2,
    }
    missing = [key for key, path in paths.items() if not path]
    if missing:
        raise ValueError(
            f"missing input matrix path(s) {missing}; set them in the config or use synthetic = true"
        )
    if not cfg.ct1_genes or not cfg.ct2_genes:
        raise ValueError("ct1_genes and ct2_genes must be set for file inputs")
    delim = cfg.delimiter or None
    matrices = {key: ingest.load_matrix(path, delimiter=delim) for key, path in paths.items()}
    ct1_sel = GeneSelection(cell_type_label=cfg.ct1_label, genes=list(cfg.ct1_genes))
    ct2_sel = GeneSelection(cell_type_label=cfg.ct2_label, genes=list(cfg.ct2_genes))
    return matrices, ct1_sel, ct2_sel


@dataclass
class EncodedInputs:
    """Everything downstream stages need: histograms, amplitudes and targets."""

    ct1_sel: GeneSelection
    ct2_sel: GeneSelection
    layout: RegisterLayout
    hist_mono_ct1: ingest.StateHistogram
    hist_mono_ct2: ingest.StateHistogram
    hist_co_ct1: ingest.StateHistogram
    hist_co_ct2: ingest.StateHistogram

    @property
    def gene_map(self) -> dict[int, str]:
        names = list(self.ct1_sel.genes) + list(self.ct2_sel.genes)
        return dict(enumerate(names))


def encode_inputs(matrices: dict, ct1_sel: GeneSelection, ct2_sel: GeneSelection) -> EncodedInputs:
    layout = RegisterLayout(n_ct1=len(ct1_sel.genes), n_ct2=len(ct2_sel.genes))
    hists = {}
    for key, sel in (
        ("mono_ct1", ct1_sel),
        ("mono_ct2", ct2_sel),
        ("co_ct1", ct1_sel),
        ("co_ct2", ct2_sel),
    ):
        prepared = ingest.log_normalize(_drop_empty_cells(matrices[key], key))
        hists[key] = ingest.binarize(prepared, sel)
    return EncodedInputs(
        ct1_sel=ct1_sel,
        ct2_sel=ct2_sel,
        layout=layout,
        hist_mono_ct1=hists["mono_ct1"],
        hist_mono_ct2=hists["mono_ct2"],
        hist_co_ct1=hists["co_ct1"],
        hist_co_ct2=hists["co_ct2"],
    )


def build_problem(enc: EncodedInputs, cfg: RunConfig) -> Problem:
    mono_state = tensor(
        from_amplitudes(ingest.amplitudes(enc.hist_mono_ct1)),
        from_amplitudes(ingest.amplitudes(enc.hist_mono_ct2)),
        enc.layout,
    )
    return Problem(
        initial_state=mono_state,
        layout=enc.layout,
        target_ct1=ingest.target_distribution(enc.hist_co_ct1),
        target_ct2=ingest.target_distribution(enc.hist_co_ct2),
        eval_mode=cfg.eval_mode,
        nshots=cfg.nshots,
        shots_seed=cfg.seed,
    )


def extract_candidate_pairs(enc: EncodedInputs, cfg: RunConfig) -> prune.CandidateSet:
    mono_state = tensor(
        from_amplitudes(ingest.amplitudes(enc.hist_mono_ct1)),
        from_amplitudes(ingest.amplitudes(enc.hist_mono_ct2)),
        enc.layout,
    )
    co_state = tensor(
        from_amplitudes(ingest.amplitudes(enc.hist_co_ct1)),
        from_amplitudes(ingest.amplitudes(enc.hist_co_ct2)),
        enc.layout,
    )
    dr = prune.delta_rho(mono_state, co_state)
    return prune.extract_candidates(dr, enc.layout, threshold=cfg.threshold)


def search_config(cfg: RunConfig) -> SearchConfig:
    return SearchConfig(
        kl_tol=cfg.kl_tol,
        eps_prune=cfg.eps_prune,
        n_choose=cfg.n_choose,
        n_epochs=cfg.n_epochs if cfg.n_epochs > 0 else None,
        max_depth=cfg.max_depth,
        shuffle_seed=cfg.seed,
    )


def run_strategy(problem: Problem, cands: prune.CandidateSet, cfg: RunConfig) -> SearchResult:
    scfg = search_config(cfg)
    if cfg.strategy == "local":
        return search.local_search(problem, cands, scfg)
    if cfg.strategy == "multi-epoch":
        return search.multi_epoch(problem, cands, scfg)
    solver = cfg.strategy.split("-", 1)[1]
    if solver in ("vqe", "qaoa"):
        try:
            return search.qubo_search(
                problem, cands, scfg, solver=solver, seed=cfg.seed, top_k=cfg.top_k
            )
        except ValueError as exc:
            log.warning("%s solver unavailable (%s); falling back to annealing", solver, exc)
            solver = "annealing"
    return search.qubo_search(problem, cands, scfg, solver=solver, seed=cfg.seed, top_k=cfg.top_k)


def run_pipeline(cfg: RunConfig) -> RunReport:
    """Full pipeline on one configuration; deterministic for exact evaluation."""
    started = time.perf_counter()
    matrices, ct1_sel, ct2_sel = _stage("ingest", load_matrices, cfg)
    enc = _stage("encode", encode_inputs, matrices, ct1_sel, ct2_sel)
    problem = _stage("encode", build_problem, enc, cfg)
    cands = _stage("prune", extract_candidate_pairs, enc, cfg)
    baseline = evaluate(problem, Topology(()))
    result = _stage("search", run_strategy, problem, cands, cfg)
    angles, tuned = _stage("tune", tune.optimize_angles, problem, result.topology)
    if tuned.total > result.cost.total and len(result.topology) > 0:
        # The zero-start optimizer landed above the discrete search point;
        # polish from the searched fixed angles instead so tuning never regresses.
        log.info("zero-start tuning landed at %.6f (search found %.6f); re-tuning "
                 "from the searched angles", tuned.total, result.cost.total)
        searched = AngleVector(
            values=np.array([g.angle for g in result.topology], dtype=np.float64)
        )
        angles, tuned = _stage(
            "tune", tune.optimize_angles, problem, result.topology, searched
        )
        if tuned.total > result.cost.total:
            angles, tuned = searched, result.cost
    contributions = _stage(
        "ablate", tune.contribution_analysis, problem, result.topology, angles, enc.gene_map
    )
    edges = _stage("export", tune.export_network, result.topology, angles, enc.gene_map, enc.layout)
    wall = time.perf_counter() - started
    return RunReport(
        config=dataclasses.asdict(cfg),
        ct1_genes=list(ct1_sel.genes),
        ct2_genes=list(ct2_sel.genes),
        baseline=baseline,
        candidate_pairs=list(cands.pairs),
        search_result=result,
        angles=angles,
        tuned=tuned,
        contributions=contributions,
        edges=edges,
        wall_time_s=wall,
    )


# --- serialization --------------------------------------------------------


def gate_to_dict(gate: GateSpec) -> dict:
    return {"kind": gate.kind, "control": gate.control, "target": gate.target, "angle": gate.angle}


def gate_from_dict(data: dict) -> GateSpec:
    return GateSpec(
        kind=data["kind"], target=data["target"], control=data.get("control"), angle=data.get("angle")
    )


def _cost_dict(report: CostReport) -> dict:
    return {"total": report.total, "kl_ct1": report.kl_ct1, "kl_ct2": report.kl_ct2}


def report_to_dict(report: RunReport) -> dict:
    return {
        "config": report.config,
        "registers": {"ct1_genes": report.ct1_genes, "ct2_genes": report.ct2_genes},
        "baseline": _cost_dict(report.baseline),
        "candidates": [list(p) for p in report.candidate_pairs],
        "search": {
            "strategy": report.config["strategy"],
            "cost": _cost_dict(report.search_result.cost),
            "evaluations": report.search_result.evaluations,
            "topology": [gate_to_dict(g) for g in report.search_result.topology],
        },
        "tuned": {
            "cost": _cost_dict(report.tuned),
            "angles": [float(a) for a in report.angles.values],
        },
        "contributions": {
            "baseline_kl": report.contributions.baseline_kl,
            "rows": [dataclasses.asdict(r) for r in report.contributions.rows],
        },
        "edges": [dataclasses.asdict(e) for e in report.edges],
        "timing": {"wall_time_s": report.wall_time_s},
    }


def _format_report_text(report: RunReport) -> str:
    lines = []
    lines.append("qxtalk run report")
    lines.append(f"registers: CT1={report.ct1_genes} CT2={report.ct2_genes}")
    lines.append(
        f"baseline KL: total={report.baseline.total:.6f} "
        f"(ct1={report.baseline.kl_ct1:.6f}, ct2={report.baseline.kl_ct2:.6f})"
    )
    lines.append(f"candidate pairs: {report.candidate_pairs}")
    lines.append(
        f"searched topology ({len(report.search_result.topology)} gates, "
        f"{report.search_result.evaluations} evaluations): total={report.search_result.cost.total:.6f}"
    )
    for gate in report.search_result.topology:
        lines.append(f"  CRX control=q{gate.control} target=q{gate.target}")
    lines.append(f"tuned cost: total={report.tuned.total:.6f}")
    lines.append("contributions (per gate):")
    for row in report.contributions.rows:
        lines.append(
            f"  {row.source} -> {row.target}: angle={row.angle:.4f} "
            f"kl={row.kl_after_prefix:.6f} delta={row.kl_delta:+.6f} ({row.percent_contribution:.1f}%)"
        )
    lines.append("edges:")
    for edge in report.edges:
        lines.append(f"  {edge.source} -> {edge.target} [{edge.edge_class}] angle={edge.angle:.4f}")
    return "\n".join(lines) + "\n"


def write_matrix_csv(path: Path, matrix: ingest.ExpressionMatrix) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(matrix.gene_names)
        for row in matrix.values:
            writer.writerow([("%g" % v) for v in row])


def write_report_files(report: RunReport, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    payload = report_to_dict(report)
    (outdir / "report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (outdir / "report.txt").write_text(_format_report_text(report), encoding="utf-8")
    with (outdir / "edges.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "angle", "edge_class"])
        for edge in report.edges:
            writer.writerow([edge.source, edge.target, repr(edge.angle), edge.edge_class])
    with (outdir / "contributions.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["source", "target", "angle", "kl_after_prefix", "kl_delta", "percent_contribution"]
        )
        for row in report.contributions.rows:
            writer.writerow(
                [row.source, row.target, repr(row.angle), repr(row.kl_after_prefix),
                 repr(row.kl_delta), repr(row.percent_contribution)]
            )
    write_trace(report.search_result, outdir / "trace.jsonl")
    topo_payload = {
        "topology": [gate_to_dict(g) for g in report.search_result.topology],
        "cost": _cost_dict(report.search_result.cost),
        "evaluations": report.search_result.evaluations,
    }
    (outdir / "topology.json").write_text(
        json.dumps(topo_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    tuned_payload = {
        "angles": [float(a) for a in report.angles.values],
        "cost": _cost_dict(report.tuned),
    }
    (outdir / "tuned.json").write_text(
        json.dumps(tuned_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_trace(result: SearchResult, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for entry in result.history:
            record = {
                "phase": entry.phase,
                "cost": entry.cost.total,
                "sequence": [[g.kind, g.control, g.target, g.angle] for g in entry.topology],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


# --- stage subcommands ----------------------------------------------------


def _outdir(cfg: RunConfig) -> Path:
    return Path(cfg.out)


def _require_artifact(path: Path, producer: str) -> None:
    if not path.exists():
        raise ValueError(f"missing artifact {path.name} (run the {producer} stage first)")


def cmd_run(cfg: RunConfig, args: argparse.Namespace) -> int:
    report = run_pipeline(cfg)
    outdir = _outdir(cfg)
    if cfg.synthetic:
        cmd_simulate(cfg, args, quiet=True)
    write_report_files(report, outdir)
    print(_format_report_text(report), end="")
    print(f"wall time: {report.wall_time_s:.2f}s")
    print(f"report written to {outdir / 'report.json'}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args: argparse.Namespace, quiet: bool = False) -> int:
    if not cfg.synthetic:
        raise PipelineError("simulate", "simulate requires synthetic = true")
    matrices, _, truth, mono, co = _stage("simulate", synthetic_matrices, cfg)
    outdir = _outdir(cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    for key, matrix in matrices.items():
        write_matrix_csv(outdir / f"{key}.csv", matrix)
    with (outdir / "labels.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_index", "group", "x", "y"])
        for i, (label, pos) in enumerate(zip(co.cell_labels, co.positions)):
            writer.writerow([i, label, repr(float(pos[0])), repr(float(pos[1]))])
    with (outdir / "ground_truth.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "kind"])
        for edge in truth:
            writer.writerow([edge.source, edge.target, edge.kind])
    if not quiet:
        sparsity = float((co.observed == 0).mean())
        print(f"wrote {len(matrices)} matrices to {outdir} (co-run sparsity {sparsity:.1%})")
    return EXIT_OK


def _encoded_payload(enc: EncodedInputs) -> dict:
    def hist_dict(h: ingest.StateHistogram) -> dict:
        return {"num_genes": h.num_genes, "counts": h.counts}

    return {
        "ct1": {"label": enc.ct1_sel.cell_type_label, "genes": enc.ct1_sel.genes},
        "ct2": {"label": enc.ct2_sel.cell_type_label, "genes": enc.ct2_sel.genes},
        "histograms": {
            "mono_ct1": hist_dict(enc.hist_mono_ct1),
            "mono_ct2": hist_dict(enc.hist_mono_ct2),
            "co_ct1": hist_dict(enc.hist_co_ct1),
            "co_ct2": hist_dict(enc.hist_co_ct2),
        },
    }


def _encoded_from_payload(data: dict) -> EncodedInputs:
    def hist(key: str) -> ingest.StateHistogram:
        raw = data["histograms"][key]
        return ingest.StateHistogram(
            num_genes=raw["num_genes"], counts={k: int(v) for k, v in raw["counts"].items()}
        )

    ct1 = GeneSelection(cell_type_label=data["ct1"]["label"], genes=list(data["ct1"]["genes"]))
    ct2 = GeneSelection(cell_type_label=data["ct2"]["label"], genes=list(data["ct2"]["genes"]))
    return EncodedInputs(
        ct1_sel=ct1,
        ct2_sel=ct2,
        layout=RegisterLayout(n_ct1=len(ct1.genes), n_ct2=len(ct2.genes)),
        hist_mono_ct1=hist("mono_ct1"),
        hist_mono_ct2=hist("mono_ct2"),
        hist_co_ct1=hist("co_ct1"),
        hist_co_ct2=hist("co_ct2"),
    )


def _load_encoded(cfg: RunConfig) -> EncodedInputs:
    path = _outdir(cfg) / "encoded.json"
    _require_artifact(path, "encode")
    return _encoded_from_payload(json.loads(path.read_text(encoding="utf-8")))


def cmd_encode(cfg: RunConfig, args: argparse.Namespace) -> int:
    outdir = _outdir(cfg)
    if cfg.synthetic:
        paths = {key: outdir / f"{key}.csv" for key in ("mono_ct1", "mono_ct2", "co_ct1", "co_ct2")}
        for path in paths.values():
            _stage("encode", _require_artifact, path, "simulate")
        file_cfg = dataclasses.replace(
            cfg,
            synthetic=False,
            mono_ct1=str(paths["mono_ct1"]),
            mono_ct2=str(paths["mono_ct2"]),
            co_ct1=str(paths["co_ct1"]),
            co_ct2=str(paths["co_ct2"]),
        )
        if not cfg.ct1_genes or not cfg.ct2_genes:
            _, (ct1_sel, ct2_sel), _ = synth.benchmark_preset(
                five_gene_ct2=cfg.five_gene_ct2, seed=cfg.seed
            )
            file_cfg = dataclasses.replace(
                file_cfg, ct1_genes=list(ct1_sel.genes), ct2_genes=list(ct2_sel.genes)
            )
        matrices, ct1_sel, ct2_sel = _stage("ingest", load_matrices, file_cfg)
    else:
        matrices, ct1_sel, ct2_sel = _stage("ingest", load_matrices, cfg)
    enc = _stage("encode", encode_inputs, matrices, ct1_sel, ct2_sel)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "encoded.json").write_text(
        json.dumps(_encoded_payload(enc), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"encoded histograms written to {outdir / 'encoded.json'}")
    return EXIT_OK


def cmd_prune(cfg: RunConfig, args: argparse.Namespace) -> int:
    enc = _stage("prune", _load_encoded, cfg)
    cands = _stage("prune", extract_candidate_pairs, enc, cfg)
    outdir = _outdir(cfg)
    payload = {"threshold": cands.threshold_used, "pairs": [list(p) for p in cands.pairs]}
    (outdir / "candidates.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    gene_map = enc.gene_map
    with (outdir / "candidates.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["control_gene", "target_gene"])
        for control, target in cands.pairs:
            writer.writerow([gene_map[control], gene_map[target]])
    print(f"{len(cands.pairs)} candidate pair(s) written to {outdir / 'candidates.json'}")
    return EXIT_OK


def cmd_search(cfg: RunConfig, args: argparse.Namespace) -> int:
    enc = _stage("search", _load_encoded, cfg)
    cand_path = _outdir(cfg) / "candidates.json"
    _stage("search", _require_artifact, cand_path, "prune")
    raw = json.loads(cand_path.read_text(encoding="utf-8"))
    cands = prune.CandidateSet(
        pairs=[tuple(p) for p in raw["pairs"]], threshold_used=raw["threshold"]
    )
    problem = _stage("search", build_problem, enc, cfg)
    result = _stage("search", run_strategy, problem, cands, cfg)
    outdir = _outdir(cfg)
    payload = {
        "topology": [gate_to_dict(g) for g in result.topology],
        "cost": _cost_dict(result.cost),
        "evaluations": result.evaluations,
    }
    (outdir / "topology.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_trace(result, outdir / "trace.jsonl")
    print(
        f"{cfg.strategy} selected {len(result.topology)} gate(s) at cost "
        f"{result.cost.total:.6f} ({result.evaluations} evaluations)"
    )
    return EXIT_OK


def _load_topology(cfg: RunConfig) -> Topology:
    path = _outdir(cfg) / "topology.json"
    _require_artifact(path, "search")
    data = json.loads(path.read_text(encoding="utf-8"))
    return Topology(gates=tuple(gate_from_dict(g) for g in data["topology"]))


def cmd_tune(cfg: RunConfig, args: argparse.Namespace) -> int:
    enc = _stage("tune", _load_encoded, cfg)
    topology = _stage("tune", _load_topology, cfg)
    problem = _stage("tune", build_problem, enc, cfg)
    angles, tuned = _stage("tune", tune.optimize_angles, problem, topology)
    outdir = _outdir(cfg)
    payload = {"angles": [float(a) for a in angles.values], "cost": _cost_dict(tuned)}
    (outdir / "tuned.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"tuned cost {tuned.total:.6f} written to {outdir / 'tuned.json'}")
    return EXIT_OK


def cmd_ablate(cfg: RunConfig, args: argparse.Namespace) -> int:
    enc = _stage("ablate", _load_encoded, cfg)
    topology = _stage("ablate", _load_topology, cfg)
    tuned_path = _outdir(cfg) / "tuned.json"
    _stage("ablate", _require_artifact, tuned_path, "tune")
    tuned_data = json.loads(tuned_path.read_text(encoding="utf-8"))
    angles = AngleVector(values=np.array(tuned_data["angles"], dtype=np.float64))
    problem = _stage("ablate", build_problem, enc, cfg)
    table = _stage("ablate", tune.contribution_analysis, problem, topology, angles, enc.gene_map)
    outdir = _outdir(cfg)
    with (outdir / "contributions.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["source", "target", "angle", "kl_after_prefix", "kl_delta", "percent_contribution"]
        )
        for row in table.rows:
            writer.writerow(
                [row.source, row.target, repr(row.angle), repr(row.kl_after_prefix),
                 repr(row.kl_delta), repr(row.percent_contribution)]
            )
    print(f"contribution table written to {outdir / 'contributions.csv'}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "simulate": cmd_simulate,
    "encode": cmd_encode,
    "prune": cmd_prune,
    "search": cmd_search,
    "tune": cmd_tune,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--strategy", choices=STRATEGIES, help="search strategy")
    common.add_argument("--seed", type=int, help="master seed (shuffle, shots, solvers)")
    common.add_argument("--threshold", type=float, help="candidate extraction threshold")
    common.add_argument("--kl-tol", dest="kl_tol", type=float, help="search acceptance tolerance")
    common.add_argument("--nshots", type=int, help="shots per evaluation in shots mode")
    common.add_argument("--exact", action="store_true", help="force exact evaluation mode")
    common.add_argument("--workers", type=int, help="worker count for batched evaluation")
    common.add_argument("--out", help="run directory for artifacts")
    common.add_argument("--synthetic", action="store_true", help="use the built-in benchmark tissue")
    parser = argparse.ArgumentParser(
        prog="qxtalk",
        description="Learn cell-cell interaction circuits from binarized expression states.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "full pipeline: ingest, encode, prune, search, tune, ablate, export"),
        ("simulate", "generate the synthetic benchmark tissue matrices"),
        ("encode", "binarize and encode the input matrices"),
        ("prune", "extract candidate gate pairs from the density-matrix difference"),
        ("search", "run the configured topology search"),
        ("tune", "optimize rotation angles of the searched topology"),
        ("ablate", "per-gate contribution analysis of the tuned circuit"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except PipelineError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
