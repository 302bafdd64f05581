"""Command-line front end: JSONL ingest, batch scoring, evaluation and reports.

Every command writes one JSON report (sorted keys, no timestamps) so that two
runs over the same corpus with warm caches produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import random
import sys
from collections import Counter, defaultdict
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from tarkit import __version__
from tarkit.align import exact_assign, greedy_assign, semantic_matrix, temporal_matrix
from tarkit.embed import (
    REFERENCE_PROVIDER,
    CachedEmbedder,
    EmbeddingProvider,
    HashingEmbedder,
    RemoteEmbedder,
)
from tarkit.errors import (
    GroupTooSmall,
    MissingReference,
    SchemaError,
    TarkitError,
    TransportError,
    ValidationError,
)
from tarkit.judge.gateway import (
    DEFAULT_JUDGE_MODEL,
    HttpChatTransport,
    JudgeGateway,
    PromptKind,
    VasScore,
    render_prompt,
)
from tarkit.metrics import SampleEval, judge_stability, tac, tac_all, vas_summary
from tarkit.model import (
    GateMode,
    MatchConfig,
    RewardWeights,
    TraceRecord,
    validate_claimset,
)
from tarkit.reward import (
    accuracy_reward,
    consistency_gate,
    group_advantages,
    predicted_claims,
    reference_claims,
    score_candidate,
)
from tarkit.store import FileStore
from tarkit.trace import segment

logger = logging.getLogger("tarkit")

GROUP_KEY = "group"
BENCHMARK_KEY = "benchmark"
CATEGORY_KEY = "category"
UNSPECIFIED = "unspecified"

# --------------------------------------------------------------------------- config


@dataclass(frozen=True)
class RunConfig:
    match: MatchConfig = field(default_factory=MatchConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    judge_url: str | None = None
    judge_model: str = DEFAULT_JUDGE_MODEL
    secondary_judge_url: str | None = None
    secondary_judge_model: str | None = None
    embed_url: str | None = None
    embed_model: str | None = None
    embed_dim: int = 384
    cache_dir: str | None = None
    replay: bool = False
    fallback: bool = True
    jobs: int = 4
    seed: int = 0
    group_size: int = 8

    def echo(self) -> dict[str, Any]:
        """The settings that affect results, for the report header."""
        return {
            "delta_seconds": self.match.delta_seconds,
            "tau": self.match.tau,
            "matching_mode": self.match.matching_mode.value,
            "tar_variant": self.match.tar_variant.value,
            "gate_mode": self.match.gate_mode.value,
            "tac_mode": self.match.tac_mode.value,
            "claims_source": self.match.claims_source.value,
            "lambda_acc": self.weights.lambda_acc,
            "lambda_fmt": self.weights.lambda_fmt,
            "lambda_tar": self.weights.lambda_tar,
            "lambda_tac": self.weights.lambda_tac,
            "judge_model": self.judge_model,
            "secondary_judge_model": self.secondary_judge_model,
            "embedder": self.embed_model or HashingEmbedder().provider_id,
            "replay": self.replay,
            "fallback": self.fallback,
            "seed": self.seed,
            "group_size": self.group_size,
        }


# Flat config-file keys and the type each must have.
_CONFIG_KEYS: dict[str, type | tuple[type, ...]] = {
    "delta": int,
    "tau": (int, float),
    "lambda_acc": (int, float),
    "lambda_fmt": (int, float),
    "lambda_tar": (int, float),
    "lambda_tac": (int, float),
    "gate_mode": str,
    "tac_mode": str,
    "tar_variant": str,
    "matching": str,
    "claims_source": str,
    "judge_url": str,
    "judge_model": str,
    "secondary_judge_url": str,
    "secondary_judge_model": str,
    "embed_url": str,
    "embed_model": str,
    "embed_dim": int,
    "cache_dir": str,
    "replay": bool,
    "fallback": bool,
    "jobs": int,
    "seed": int,
    "group_size": int,
}


class ConfigError(TarkitError):
    pass


def load_config_file(path: str | os.PathLike[str]) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat JSON object")
    for key, value in data.items():
        expected = _CONFIG_KEYS.get(key)
        if expected is None:
            raise ConfigError(f"{path}: unknown key {key!r}")
        if isinstance(value, bool) and expected is not bool:
            raise ConfigError(f"{path}: {key} has the wrong type")
        if value is not None and not isinstance(value, expected):
            raise ConfigError(f"{path}: {key} has the wrong type")
    return data


def build_run_config(settings: dict[str, Any]) -> RunConfig:
    try:
        match = MatchConfig(
            delta_seconds=settings.get("delta", 2),
            tau=float(settings.get("tau", 0.75)),
            matching_mode=settings.get("matching", "greedy"),
            tar_variant=settings.get("tar_variant", "precision"),
            gate_mode=settings.get("gate_mode", "llm_judge"),
            tac_mode=settings.get("tac_mode", "string_compare"),
            claims_source=settings.get("claims_source", "think"),
        )
        weights = RewardWeights(
            float(settings.get("lambda_acc", 1.0)),
            float(settings.get("lambda_fmt", 1.0)),
            float(settings.get("lambda_tar", 1.0)),
            float(settings.get("lambda_tac", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    jobs = settings.get("jobs", 4)
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return RunConfig(
        match=match,
        weights=weights,
        judge_url=settings.get("judge_url"),
        judge_model=settings.get("judge_model") or DEFAULT_JUDGE_MODEL,
        secondary_judge_url=settings.get("secondary_judge_url"),
        secondary_judge_model=settings.get("secondary_judge_model"),
        embed_url=settings.get("embed_url"),
        embed_model=settings.get("embed_model"),
        embed_dim=settings.get("embed_dim", 384),
        cache_dir=settings.get("cache_dir"),
        replay=bool(settings.get("replay", False)),
        fallback=bool(settings.get("fallback", True)),
        jobs=jobs,
        seed=settings.get("seed", 0),
        group_size=settings.get("group_size", 8),
    )


# --------------------------------------------------------------------------- ingest


_REQUIRED = ("id", "question", "answer_gt", "response_text")
_OPTIONAL = ("options", "reference_reasoning", "reference_claims", "meta")


def _string_field(obj: dict, name: str, line: int, *, required: bool) -> str | None:
    value = obj.get(name)
    if value is None:
        if required:
            raise SchemaError(line, name, "missing required field")
        return None
    if name == "id" and isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    if not isinstance(value, str):
        raise SchemaError(line, name, f"expected a string, got {type(value).__name__}")
    return value


def _options(value: Any, line: int) -> tuple[tuple[str, str], ...] | None:
    if value is None:
        return None
    if isinstance(value, dict):
        pairs = list(value.items())
    elif isinstance(value, list):
        pairs = []
        for item in value:
            if not (isinstance(item, list) and len(item) == 2):
                raise SchemaError(line, "options", "list entries must be [letter, text] pairs")
            pairs.append((item[0], item[1]))
    else:
        raise SchemaError(line, "options", "expected an object or a list of pairs")
    if not pairs:
        return None
    for letter, text in pairs:
        if not isinstance(letter, str) or not isinstance(text, str):
            raise SchemaError(line, "options", "letters and texts must be strings")
    return tuple(pairs)


def _meta(value: Any, line: int) -> dict[str, str]:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise SchemaError(line, "meta", "expected an object")
    out = {}
    for key, item in value.items():
        if isinstance(item, (dict, list)) or item is None:
            raise SchemaError(line, "meta", f"value for {key!r} must be a scalar")
        out[str(key)] = str(item).lower() if isinstance(item, bool) else str(item)
    return out


def parse_record(obj: Any, line: int) -> TraceRecord:
    if not isinstance(obj, dict):
        raise SchemaError(line, None, "expected a JSON object")
    unknown = sorted(set(obj) - set(_REQUIRED) - set(_OPTIONAL))
    if unknown:
        raise SchemaError(line, unknown[0], "unknown field")
    values = {name: _string_field(obj, name, line, required=True) for name in _REQUIRED}
    reference_reasoning = _string_field(obj, "reference_reasoning", line, required=False)
    reference = None
    if obj.get("reference_claims") is not None:
        raw = obj["reference_claims"]
        if not isinstance(raw, dict) or not all(isinstance(v, str) for v in raw.values()):
            raise SchemaError(line, "reference_claims", "expected an object of timestamp -> sentence")
        try:
            reference = validate_claimset(raw)
        except ValidationError as exc:
            raise SchemaError(line, "reference_claims", str(exc)) from exc
    try:
        return TraceRecord(
            id=values["id"],
            question=values["question"],
            answer_gt=values["answer_gt"],
            response_text=values["response_text"],
            options=_options(obj.get("options"), line),
            reference_reasoning=reference_reasoning,
            reference_claims=reference,
            meta=_meta(obj.get("meta"), line),
        )
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        field_name = "answer_gt" if "answer_gt" in str(exc) else "options"
        raise SchemaError(line, field_name, str(exc)) from exc


def iter_records(path: str | os.PathLike[str]) -> Iterator[tuple[int, TraceRecord | SchemaError]]:
    """Yield ``(line, record)`` or ``(line, error)`` for each non-blank line."""
    with open(path, encoding="utf-8") as fh:
        for number, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                yield number, SchemaError(number, None, f"invalid JSON: {exc.msg}")
                continue
            try:
                yield number, parse_record(obj, number)
            except SchemaError as exc:
                yield number, exc


def ingest(path: str | os.PathLike[str]) -> list[TraceRecord]:
    """Load every record, raising on the first schema error."""
    records = []
    for _, item in iter_records(path):
        if isinstance(item, SchemaError):
            raise item
        records.append(item)
    return records


# --------------------------------------------------------------------------- services


@dataclass
class Services:
    judge: JudgeGateway | None
    secondary: JudgeGateway | None
    embedder: EmbeddingProvider


def _store(cache_dir: str | None, name: str) -> FileStore | None:
    return FileStore(Path(cache_dir) / name) if cache_dir else None


def build_services(cfg: RunConfig) -> Services:
    judge_store = _store(cfg.cache_dir, "judge")

    def gateway(url: str | None, model: str) -> JudgeGateway | None:
        if url is None and judge_store is None:
            return None
        transport = None if (url is None or cfg.replay) else HttpChatTransport(url)
        return JudgeGateway(
            transport, model=model, store=judge_store, replay=cfg.replay, max_in_flight=cfg.jobs
        )

    judge = gateway(cfg.judge_url, cfg.judge_model)
    secondary = None
    if cfg.secondary_judge_model:
        secondary = gateway(cfg.secondary_judge_url or cfg.judge_url, cfg.secondary_judge_model)

    embedder: EmbeddingProvider = HashingEmbedder()
    if cfg.embed_url:
        if not cfg.embed_model:
            raise ConfigError("embed_url needs embed_model")
        embedder = RemoteEmbedder(cfg.embed_url, model=cfg.embed_model, dim=cfg.embed_dim)
    identity = cfg.embed_model if cfg.embed_url else embedder.provider_id
    if identity != REFERENCE_PROVIDER:
        logger.warning(
            "tau=%s was calibrated for %s; similarities from %s are on a different scale",
            cfg.match.tau, REFERENCE_PROVIDER, identity,
        )
    embedder = CachedEmbedder(embedder, _store(cfg.cache_dir, "embed"))
    return Services(judge, secondary, embedder)


# --------------------------------------------------------------------------- per-record work


def _error_row(line: int | None, record_id: str | None, exc: BaseException) -> dict[str, Any]:
    row: dict[str, Any] = {"line": line, "id": record_id, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SchemaError):
        row["field"] = exc.field
    return row


def _fan_out(
    items: Sequence[tuple[int, TraceRecord | SchemaError]],
    work: Callable[[TraceRecord], dict[str, Any]],
    jobs: int,
) -> tuple[list[dict[str, Any]], list[dict[str, Any]]]:
    """Run ``work`` on each record in a bounded pool, isolating failures."""

    def guarded(item: tuple[int, TraceRecord | SchemaError]) -> tuple[bool, dict[str, Any]]:
        line, record = item
        if isinstance(record, SchemaError):
            return False, _error_row(line, None, record)
        try:
            row = work(record)
        except (TarkitError, ValueError) as exc:
            logger.warning("line %d (%s): %s", line, record.id, exc)
            return False, _error_row(line, record.id, exc)
        row.setdefault("line", line)
        return True, row

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        outcomes = list(pool.map(guarded, items))
    rows = [row for ok, row in outcomes if ok]
    errors = [row for ok, row in outcomes if not ok]
    return rows, errors


def _score_row(record: TraceRecord, cfg: RunConfig, svc: Services) -> dict[str, Any]:
    scored = score_candidate(
        record, record.response_text, cfg.match, cfg.weights,
        judge=svc.judge, embedder=svc.embedder, fallback=cfg.fallback,
    )
    row: dict[str, Any] = {
        "id": record.id,
        "group": record.meta.get(GROUP_KEY),
        "reward": scored.breakdown.to_dict(),
        "gate_source": scored.gate.source.value,
        "n_predicted": len(scored.predicted),
        "n_reference": None if scored.reference is None else len(scored.reference),
        "think_count": scored.segment.think_count,
        "well_formed": scored.segment.well_formed,
    }
    if scored.alignment is not None:
        row["matches"] = [
            [scored.predicted[i].key, scored.reference[j].key] for i, j in scored.alignment.assignment
        ]
    return row


def vas_score(record: TraceRecord, judge: JudgeGateway | None) -> int | None:
    """Raw 0-10 VAS, or ``None`` when the judge is unavailable or keeps replying out of format."""
    seg = segment(record.response_text)
    if not seg.think_text:
        return 0
    if judge is None:
        return None
    request = render_prompt(PromptKind.VAS_SCORE, record, seg)
    try:
        verdict = judge.invoke(request)
        if not isinstance(verdict.payload, VasScore):
            verdict = judge.invoke(request, refresh=True)
    except TransportError as exc:
        logger.warning("VAS unavailable for %s: %s", record.id, exc)
        return None
    if isinstance(verdict.payload, VasScore):
        return verdict.payload.vas_raw
    logger.warning("VAS reply for %s malformed twice; scored absent", record.id)
    return None


def _evaluate_row(record: TraceRecord, cfg: RunConfig, svc: Services) -> dict[str, Any]:
    seg = segment(record.response_text)
    correct = accuracy_reward(record, seg, judge=svc.judge, fallback=cfg.fallback)
    mode = cfg.match.tac_mode if cfg.match.gate_mode is GateMode.DISABLED else cfg.match.gate_mode
    decision = consistency_gate(record, seg, mode, judge=svc.judge, fallback=cfg.fallback)
    reward = None
    try:
        reward = score_candidate(
            record, record.response_text, cfg.match, cfg.weights,
            judge=svc.judge, embedder=svc.embedder, fallback=cfg.fallback,
        ).breakdown.to_dict()
    except MissingReference:
        pass
    row = {
        "id": record.id,
        "benchmark": record.meta.get(BENCHMARK_KEY, UNSPECIFIED),
        "category": record.meta.get(CATEGORY_KEY),
        "correct": bool(correct),
        "tac_bit": decision.g,
        "tac_source": decision.source.value,
        "vas_raw": vas_score(record, svc.judge),
        "reward": reward,
    }
    if svc.secondary is not None:
        row["vas_raw_secondary"] = vas_score(record, svc.secondary)
    return row


def _extract_row(record: TraceRecord, cfg: RunConfig, svc: Services) -> dict[str, Any]:
    seg = segment(record.response_text)
    reference = reference_claims(record, judge=svc.judge, fallback=cfg.fallback)
    predicted = predicted_claims(
        seg, record.response_text, cfg.match.claims_source, judge=svc.judge, fallback=cfg.fallback
    )
    return {
        "id": record.id,
        "reference_claims": None if reference is None else reference.to_dict(),
        "predicted_claims": predicted.to_dict(),
    }


# --------------------------------------------------------------------------- aggregation


def _mean(values: Sequence[float]) -> float | None:
    return float(np.mean(values)) if values else None


def _aggregate(rows: Sequence[dict[str, Any]]) -> dict[str, Any]:
    evals = [
        SampleEval(r["id"], r["correct"], r["tac_bit"], r["vas_raw"]) for r in rows
    ]
    summary = vas_summary(evals)
    totals = [r["reward"]["total"] for r in rows if r["reward"] is not None]
    return {
        "n": len(rows),
        "accuracy": _mean([float(e.correct) for e in evals]),
        "tac": tac(evals),
        "tac_all": tac_all(evals),
        "vas": summary.value,
        "vas_scored": summary.scored,
        "mean_total_reward": _mean(totals),
        "n_rewarded": len(totals),
    }


_ROLLUP_FIELDS = ("accuracy", "tac", "tac_all", "vas", "mean_total_reward")


def _macro(blocks: Sequence[dict[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {"n_benchmarks": len(blocks)}
    for name in _ROLLUP_FIELDS:
        out[name] = _mean([b[name] for b in blocks if b[name] is not None])
    return out


def evaluation_report(rows: Sequence[dict[str, Any]]) -> dict[str, Any]:
    by_benchmark: dict[str, list[dict[str, Any]]] = defaultdict(list)
    category_of: dict[str, str] = {}
    for row in rows:
        by_benchmark[row["benchmark"]].append(row)
        if row.get("category"):
            category_of.setdefault(row["benchmark"], row["category"])
    benchmarks = {name: _aggregate(group) for name, group in sorted(by_benchmark.items())}
    categories: dict[str, Any] = {}
    for category in sorted(set(category_of.values())):
        members = [b for b, c in category_of.items() if c == category]
        block = _macro([benchmarks[b] for b in sorted(members)])
        block["benchmarks"] = sorted(members)
        categories[category] = block
    report: dict[str, Any] = {
        "benchmarks": benchmarks,
        "categories": categories,
        "overall": _macro(list(benchmarks.values())),
        "corpus": _aggregate(rows),
    }
    if any("vas_raw_secondary" in r for r in rows):
        report["judge_stability"] = _stability(rows, "vas_raw", "vas_raw_secondary")
    return report


def _stability(rows: Sequence[dict[str, Any]], a: str, b: str) -> dict[str, Any]:
    def block(subset: Sequence[dict[str, Any]]) -> dict[str, Any]:
        result = judge_stability({r["id"]: r.get(a) for r in subset}, {r["id"]: r.get(b) for r in subset})
        return {
            "pcc": result.pcc,
            "n_common": result.n_common,
            "n_primary": result.n_primary,
            "n_secondary": result.n_secondary,
            "error": result.error,
        }

    by_benchmark: dict[str, list[dict[str, Any]]] = defaultdict(list)
    for row in rows:
        by_benchmark[row.get("benchmark", UNSPECIFIED)].append(row)
    return {
        "overall": block(rows),
        "benchmarks": {name: block(group) for name, group in sorted(by_benchmark.items())},
    }


def attach_advantages(rows: list[dict[str, Any]], group_size: int) -> list[dict[str, Any]]:
    """Add group-normalised advantages to rows sharing a ``group`` metadata value."""
    groups: dict[str, list[dict[str, Any]]] = defaultdict(list)
    for row in rows:
        row["advantage"] = None
        if row.get("group") is not None:
            groups[row["group"]].append(row)
    warnings = []
    for name, members in sorted(groups.items()):
        try:
            advantages = group_advantages([m["reward"]["total"] for m in members])
        except GroupTooSmall as exc:
            warnings.append({"group": name, "warning": str(exc)})
            continue
        if len(members) != group_size:
            warnings.append({"group": name, "warning": f"group has {len(members)} candidates, expected {group_size}"})
        for member, value in zip(members, advantages):
            member["advantage"] = value
    return warnings


# --------------------------------------------------------------------------- oracle check


def _random_instance(rng: random.Random) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, m = rng.randint(0, 10), rng.randint(0, 10)
    density = rng.random()
    T = np.array([[rng.random() < density for _ in range(m)] for _ in range(n)], dtype=bool).reshape(n, m)
    sims = np.array([[rng.random() for _ in range(m)] for _ in range(n)], dtype=float).reshape(n, m)
    S = sims >= 0.5
    return T, S, sims


def _gap_row(name: str, T: np.ndarray, S: np.ndarray, sims: np.ndarray) -> dict[str, Any]:
    greedy = len(greedy_assign(T, S, sims))
    exact = len(exact_assign(T, S))
    return {"id": name, "n": int(T.shape[0]), "m": int(T.shape[1]), "greedy": greedy, "exact": exact, "gap": exact - greedy}


def _oracle_row(record: TraceRecord, cfg: RunConfig, svc: Services) -> dict[str, Any]:
    seg = segment(record.response_text)
    reference = reference_claims(record, judge=svc.judge, fallback=cfg.fallback)
    if reference is None:
        raise MissingReference(f"record {record.id!r} has no reference claims or reasoning")
    predicted = predicted_claims(
        seg, record.response_text, cfg.match.claims_source, judge=svc.judge, fallback=cfg.fallback
    )
    T = temporal_matrix(predicted, reference, cfg.match.delta_seconds)
    S, sims = semantic_matrix(predicted, reference, svc.embedder, cfg.match.tau)
    return _gap_row(record.id, T, S, sims)


def oracle_report(rows: Sequence[dict[str, Any]]) -> dict[str, Any]:
    histogram = Counter(r["gap"] for r in rows)
    return {
        "n": len(rows),
        "gap_histogram": {str(k): histogram[k] for k in sorted(histogram)},
        "max_gap": max((r["gap"] for r in rows), default=0),
        "greedy_total": sum(r["greedy"] for r in rows),
        "exact_total": sum(r["exact"] for r in rows),
    }


# --------------------------------------------------------------------------- output


def dump_report(report: dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _flatten(row: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in row.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, list):
            flat[name] = json.dumps(value, sort_keys=True)
        else:
            flat[name] = value
    return flat


def rows_to_csv(rows: Sequence[dict[str, Any]]) -> str:
    flat = [_flatten(r) for r in rows]
    columns = sorted({c for r in flat for c in r})
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(flat)
    return buffer.getvalue()


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


# --------------------------------------------------------------------------- commands


def _load(path: str) -> list[tuple[int, TraceRecord | SchemaError]]:
    return list(iter_records(path))


def cmd_score(cfg: RunConfig, corpus: str) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    svc = build_services(cfg)
    rows, errors = _fan_out(_load(corpus), lambda r: _score_row(r, cfg, svc), cfg.jobs)
    warnings = attach_advantages(rows, cfg.group_size)
    totals = [r["reward"]["total"] for r in rows]
    report = {
        "command": "score",
        "summary": {"n": len(rows), "n_errors": len(errors), "mean_total_reward": _mean(totals)},
        "samples": rows,
        "warnings": warnings,
        "errors": errors,
    }
    return report, rows


def cmd_evaluate(cfg: RunConfig, corpus: str) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    svc = build_services(cfg)
    rows, errors = _fan_out(_load(corpus), lambda r: _evaluate_row(r, cfg, svc), cfg.jobs)
    report: dict[str, Any] = {"command": "evaluate", "samples": rows, "errors": errors}
    if not rows:
        report["errors"].append({"line": None, "id": None, "error": "EmptyCorpus", "message": "no scorable samples"})
        return report, rows
    report.update(evaluation_report(rows))
    report["vas_available"] = svc.judge is not None
    return report, rows


def cmd_extract_claims(cfg: RunConfig, corpus: str) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    svc = build_services(cfg)
    rows, errors = _fan_out(_load(corpus), lambda r: _extract_row(r, cfg, svc), cfg.jobs)
    return {"command": "extract-claims", "samples": rows, "errors": errors}, rows


def cmd_oracle_check(
    cfg: RunConfig, corpus: str | None, n_random: int | None
) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    errors: list[dict[str, Any]] = []
    if n_random is not None:
        rng = random.Random(cfg.seed)
        rows = [_gap_row(f"random-{k}", *_random_instance(rng)) for k in range(n_random)]
    else:
        svc = build_services(cfg)
        rows, errors = _fan_out(_load(corpus), lambda r: _oracle_row(r, cfg, svc), cfg.jobs)
    report = {"command": "oracle-check", "samples": rows, "errors": errors}
    report.update(oracle_report(rows))
    return report, rows


def cmd_judge_stability(first: str, second: str) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    """PCC between the VAS columns of two ``evaluate`` reports."""
    reports = []
    for path in (first, second):
        with open(path, encoding="utf-8") as fh:
            reports.append(json.load(fh))
    primary = {s["id"]: s for s in reports[0].get("samples", [])}
    secondary = {s["id"]: s for s in reports[1].get("samples", [])}
    rows = []
    for sample_id in sorted(primary.keys() | secondary.keys()):
        a, b = primary.get(sample_id, {}), secondary.get(sample_id, {})
        rows.append({
            "id": sample_id,
            "benchmark": a.get("benchmark") or b.get("benchmark") or UNSPECIFIED,
            "vas_raw": a.get("vas_raw"),
            "vas_raw_secondary": b.get("vas_raw"),
        })
    report = {"command": "judge-stability", "judge_stability": _stability(rows, "vas_raw", "vas_raw_secondary"), "errors": []}
    return report, rows


# --------------------------------------------------------------------------- argparse


def _common_flags(parser: argparse.ArgumentParser) -> None:
    add = parser.add_argument
    add("--config", help="flat JSON config file; flags override its keys")
    add("--delta", type=int, help="temporal tolerance in seconds (default 2)")
    add("--tau", type=float, help="cosine similarity threshold (default 0.75)")
    add("--lambda-acc", type=float, dest="lambda_acc")
    add("--lambda-fmt", type=float, dest="lambda_fmt")
    add("--lambda-tar", type=float, dest="lambda_tar")
    add("--lambda-tac", type=float, dest="lambda_tac")
    add("--gate-mode", choices=[m.value for m in GateMode], dest="gate_mode")
    add("--tac-mode", choices=["llm_judge", "string_compare"], dest="tac_mode")
    add("--tar-variant", choices=["precision", "f1"], dest="tar_variant")
    add("--matching", choices=["greedy", "exact_oracle"])
    add("--claims-source", choices=["think", "response"], dest="claims_source")
    add("--judge-url", dest="judge_url", help="OpenAI-compatible base URL of the judge")
    add("--judge-model", dest="judge_model")
    add("--secondary-judge-url", dest="secondary_judge_url")
    add("--secondary-judge-model", dest="secondary_judge_model", help="second VAS judge for stability PCC")
    add("--embed-url", dest="embed_url")
    add("--embed-model", dest="embed_model")
    add("--embed-dim", type=int, dest="embed_dim")
    add("--replay", action="store_true", default=None, help="serve judge replies from cache only")
    add("--no-fallback", action="store_false", dest="fallback", default=None,
        help="fail instead of using offline fallbacks when the judge is unavailable")
    add("--cache-dir", dest="cache_dir", help="judge/embedding cache (env TARKIT_CACHE_DIR)")
    add("--jobs", type=int, help="worker threads (default 4)")
    add("--seed", type=int)
    add("--group-size", type=int, dest="group_size")
    add("--out", help="report path (default stdout)")
    add("--csv", help="also write per-sample rows as CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tarkit", description="Temporal alignment rewards and reasoning metrics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("extract-claims", "extract reference and predicted claims"),
        ("score", "score every response and add group advantages"),
        ("evaluate", "TAC, TAC-All, VAS and reward aggregates"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("corpus", help="JSONL corpus")
        _common_flags(p)
    p = sub.add_parser("oracle-check", help="greedy vs exact matching gap")
    p.add_argument("corpus", nargs="?", help="JSONL corpus (omit with --random)")
    p.add_argument("--random", type=int, metavar="N", help="check N seeded random instances instead")
    _common_flags(p)
    p = sub.add_parser("judge-stability", help="VAS PCC between two evaluate reports")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--out")
    p.add_argument("--csv")
    return parser


def resolve_settings(args: argparse.Namespace, environ: dict[str, str] | None = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    settings: dict[str, Any] = {}
    if getattr(args, "config", None):
        settings.update(load_config_file(args.config))
    if environ.get("TARKIT_CACHE_DIR"):
        settings["cache_dir"] = environ["TARKIT_CACHE_DIR"]
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "judge-stability":
            report, rows = cmd_judge_stability(args.first, args.second)
        else:
            cfg = build_run_config(resolve_settings(args))
            if args.command == "oracle-check":
                if args.corpus is None and args.random is None:
                    parser.error("oracle-check needs a corpus or --random N")
                report, rows = cmd_oracle_check(cfg, args.corpus, args.random)
            else:
                command = {"score": cmd_score, "evaluate": cmd_evaluate, "extract-claims": cmd_extract_claims}
                report, rows = command[args.command](cfg, args.corpus)
            report["config"] = cfg.echo()
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"tarkit: {exc}", file=sys.stderr)
        return 2
    _write(args.out, dump_report(report))
    if args.csv:
        _write(args.csv, rows_to_csv(rows))
    return 1 if report.get("errors") else 0


if __name__ == "__main__":
    sys.exit(main())
