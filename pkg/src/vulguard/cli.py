"""Command-line entry point: mining, training, evaluating, inference.

    python -m vulguard.cli mining -dg_save_folder out -mode local \\
        -repo_name demo -repo_path path/to/repo -repo_language C
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, NoReturn

from . import __version__
from .commit_filter import filter_stream, language_extensions
from .dataset import DEFAULT_RATIOS, Role, annotate, chronological_split, drop_roles, read_split, write_split
from .errors import VulGuardError
from .features import build_features, read_feature_file, write_feature_file
from .jsonl import atomic_write_text, iter_jsonl, write_jsonl
from .metrics import RANKINGS, report
from .models import (
    Hyperparameters,
    ModelKind,
    import_external_scores,
    load_artifact,
    predict,
    save_artifact,
    train,
    write_predictions,
)
from .repo import CommitRecord, Language, enumerate_commits, open_repo
from .szz import SzzAlgorithm, run_szz
from .vfc import MatchLevel, identify_vfcs, load_manual_patches, write_vfcs

log = logging.getLogger("vulguard")

SUBCOMMANDS = ("mining", "training", "evaluating", "inference")
_LANGUAGES = tuple(lang.value for lang in Language)


class CliError(Exception):
    """A user-facing failure; the message goes to stderr and the exit code is 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    command: str
    save_folder: Path
    repo_name: str
    repo_path: Path | None
    repo_language: Language
    model: ModelKind
    epochs: int
    workers: int
    szz_variant: SzzAlgorithm
    split_ratios: tuple[float, float, float]
    threshold: float
    manual_patch_file: Path | None
    regex_level: MatchLevel
    merge_regex: bool
    seed: int
    score_file: Path | None
    input: Path | None
    output: Path | None
    extensions: tuple[str, ...]
    setting: str
    ranking: str
    class_weight: bool

    @property
    def project_dir(self) -> Path:
        return self.save_folder / self.repo_name

    @property
    def model_path(self) -> Path:
        return self.project_dir / "models" / f"{self.model.value}.artifact"

    @property
    def results_dir(self) -> Path:
        return self.project_dir / "results" / self.model.value

    def manifest_config(self) -> dict[str, Any]:
        """Settings that affect outputs; paths and worker counts are left out."""
        return {
            "command": self.command,
            "repo_name": self.repo_name,
            "repo_language": self.repo_language.value,
            "model": self.model.value,
            "epochs": self.epochs,
            "szz_variant": self.szz_variant.value,
            "split_ratios": list(self.split_ratios),
            "threshold": self.threshold,
            "regex_level": self.regex_level.value,
            "merge_regex": self.merge_regex,
            "seed": self.seed,
            "extensions": list(self.extensions),
            "setting": self.setting,
            "ranking": self.ranking,
            "class_weight": self.class_weight,
        }


def _flag(parser: argparse.ArgumentParser, name: str, **kwargs: Any) -> None:
    """Register ``-name`` with a ``--name`` alias (underscores also as dashes)."""
    spellings = [f"-{name}", f"--{name}"]
    dashed = f"--{name.replace('_', '-')}"
    if dashed not in spellings:
        spellings.append(dashed)
    parser.add_argument(*spellings, **kwargs)


def _ratios(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three fractions, e.g. 0.75,0.05,0.20")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numbers: {text}") from None
    if min(values) < 0 or values[0] <= 0 or abs(sum(values) - 1.0) > 1e-9:
        raise argparse.ArgumentTypeError("fractions must be non-negative, train positive, and sum to 1")
    return values  # type: ignore[return-value]


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _language(text: str) -> Language:
    try:
        return Language.parse(text)
    except VulGuardError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vulguard", description="Commit-level vulnerability prediction toolkit.")
    parser.add_argument("--version", action="version", version=f"vulguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    kinds = ", ".join(k.value for k in ModelKind)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, allow_abbrev=False)
        _flag(p, "dg_save_folder", dest="save_folder", required=True, type=Path, help="output root")
        _flag(p, "repo_name", required=True)
        _flag(p, "repo_language", type=_language, required=True, help=f"one of {', '.join(_LANGUAGES)}")
        _flag(p, "extensions", default=None, help="comma-separated file extensions overriding the language default")
        _flag(p, "verbose", action="store_true")
        if name == "mining":
            _flag(p, "mode", default="local", help='only "local" is supported')
            _flag(p, "repo_path", required=True, type=Path)
            _flag(p, "workers", type=_positive_int, default=50)
            _flag(p, "szz_variant", choices=[a.value for a in SzzAlgorithm], default="v")
            _flag(p, "split_ratios", type=_ratios, default=DEFAULT_RATIOS)
            _flag(p, "manual_patch_file", type=Path, default=None)
            _flag(p, "regex_level", choices=[m.value for m in MatchLevel], default="strong_only")
            _flag(p, "merge_regex", action="store_true", help="add regex hits to a manual patch list")
        else:
            _flag(p, "model", required=True, help=f"one of {kinds}")
            _flag(p, "seed", type=int, default=0)
        if name == "training":
            _flag(p, "epochs", type=_positive_int, default=Hyperparameters.epochs)
            _flag(p, "no_class_weight", action="store_true", help="disable inverse class-frequency weights")
        if name in ("training", "evaluating"):
            _flag(p, "setting", choices=["realistic", "ideal"], default="realistic",
                  help="ideal keeps only VIC and VFC commits")
        if name == "evaluating":
            _flag(p, "threshold", type=float, default=0.5)
            _flag(p, "ranking", choices=RANKINGS, default="density")
            _flag(p, "score_file", type=Path, default=None, help="external prediction JSONL (model external)")
        if name == "inference":
            _flag(p, "input", type=Path, required=True, help="feature JSONL of new commits")
            _flag(p, "output", type=Path, default=None)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    get = lambda key, default=None: getattr(ns, key, default)  # noqa: E731
    if get("mode", "local") != "local":
        raise CliError(f'unsupported mode {ns.mode!r}: only "local" is available')
    model_name = get("model", "lr")
    try:
        model = ModelKind(model_name)
    except ValueError:
        raise CliError(
            f"unknown model {model_name!r}; supported: {', '.join(k.value for k in ModelKind)}"
        ) from None
    exts = get("extensions")
    if exts:
        extensions = tuple(sorted({e if e.startswith(".") else f".{e}" for e in exts.split(",") if e}))
    else:
        extensions = tuple(sorted(language_extensions(ns.repo_language)))
    return RunConfig(
        command=ns.command,
        save_folder=ns.save_folder,
        repo_name=ns.repo_name,
        repo_path=get("repo_path"),
        repo_language=ns.repo_language,
        model=model,
        epochs=get("epochs", Hyperparameters.epochs),
        workers=get("workers", 1),
        szz_variant=SzzAlgorithm(get("szz_variant", "v")),
        split_ratios=tuple(get("split_ratios", DEFAULT_RATIOS)),  # type: ignore[arg-type]
        threshold=get("threshold", 0.5),
        manual_patch_file=get("manual_patch_file"),
        regex_level=MatchLevel(get("regex_level", "strong_only")),
        merge_regex=get("merge_regex", False),
        seed=get("seed", 0),
        score_file=get("score_file"),
        input=get("input"),
        output=get("output"),
        extensions=extensions,
        setting=get("setting", "realistic"),
        ranking=get("ranking", "density"),
        class_weight=not get("no_class_weight", False),
    )


# -- manifest ------------------------------------------------------------------


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, folder: Path, inputs: dict[str, str], outputs: Sequence[Path]) -> None:
    manifest = {
        "tool": "vulguard",
        "version": __version__,
        "config": cfg.manifest_config(),
        "inputs": inputs,
        "outputs": {p.name: file_digest(p) for p in outputs},
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    atomic_write_text(folder / f"manifest.{cfg.command}.json", text)


# -- subcommands ---------------------------------------------------------------


def commit_summary(c: CommitRecord) -> dict[str, Any]:
    return {
        "commit_id": c.id,
        "parents": list(c.parent_ids),
        "author": c.author_id,
        "author_time": c.author_time,
        "commit_time": c.commit_time,
        "message": c.message,
        "files": [f.path for f in c.files],
        "la": sum(f.lines_added for f in c.files),
        "ld": sum(f.lines_removed for f in c.files),
    }


def cmd_mining(cfg: RunConfig) -> int:
    assert cfg.repo_path is not None
    handle = open_repo(cfg.repo_path, cfg.repo_language)
    head = handle.git("rev-parse", "HEAD", check=False).stdout.decode().strip()
    commits = enumerate_commits(handle, workers=cfg.workers)
    log.info("enumerated %d commits", len(commits))
    kept, dropped = filter_stream(commits, cfg.repo_language, cfg.extensions)
    log.info("kept %d commits, dropped %d", len(kept), len(dropped))

    manual = load_manual_patches(cfg.manual_patch_file) if cfg.manual_patch_file else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        vfcs = identify_vfcs(commits, level=cfg.regex_level, manual=manual, merge_regex=cfg.merge_regex)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    by_id = {c.id: c for c in commits}
    traces = run_szz(handle, [by_id[v.commit_id] for v in vfcs], cfg.szz_variant, cfg.workers, cfg.extensions)
    kept_ids = {c.id for c in kept}
    vic_ids = {vic for t in traces for vic in t.vic_ids} & kept_ids
    vfc_ids = {v.commit_id for v in vfcs} & kept_ids

    features = build_features(handle, kept, cfg.extensions, cfg.workers)
    annotated = annotate(features, vic_ids, vfc_ids)
    split = chronological_split(annotated, cfg.split_ratios)

    out = cfg.project_dir
    write_jsonl(out / "commits.jsonl", (commit_summary(c) for c in kept))
    write_feature_file((replace(r, label=a.label) for r, a in zip(features, annotated)), out / "features.jsonl")
    write_vfcs(vfcs, out / "vfcs.jsonl")
    write_jsonl(out / "traces.jsonl", (t.to_json() for t in traces))
    write_split(split, out)
    outputs = [out / f"{n}.jsonl" for n in ("commits", "features", "vfcs", "traces", "train", "valid", "test")]
    inputs = {"repository_head": head}
    if cfg.manual_patch_file:
        inputs["manual_patch_file"] = file_digest(cfg.manual_patch_file)
    write_manifest(cfg, out, inputs, outputs)
    counts = {r: sum(1 for a in annotated if a.role is r) for r in Role}
    print(
        f"mined {len(kept)} commits ({counts[Role.VIC]} VIC, {counts[Role.VFC]} VFC, {counts[Role.VNC]} VNC) "
        f"into {out}"
    )
    return 0


def _load_texts(cfg: RunConfig) -> dict[str, str]:
    path = cfg.project_dir / "commits.jsonl"
    if not path.exists():
        return {}
    return {obj["commit_id"]: obj.get("message", "") for _, obj in iter_jsonl(path)}


def _setting_filter(records, setting: str):
    return drop_roles(records, [Role.VNC]) if setting == "ideal" else list(records)


def cmd_training(cfg: RunConfig) -> int:
    if cfg.model is ModelKind.EXTERNAL:
        raise CliError("external models are not trained here; pass their scores to evaluating -score_file")
    split = read_split(cfg.project_dir)
    train_set = _setting_filter(split.train, cfg.setting)
    valid_set = _setting_filter(split.valid, cfg.setting)
    hyper = Hyperparameters(seed=cfg.seed, epochs=cfg.epochs, class_weight=cfg.class_weight)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        texts = _load_texts(cfg) if cfg.model is ModelKind.VCC_LINEAR else None
        artifact = train(cfg.model, train_set, valid_set, hyper, texts)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    save_artifact(artifact, cfg.model_path)
    inputs = {n: file_digest(cfg.project_dir / f"{n}.jsonl") for n in ("train", "valid")}
    write_manifest(cfg, cfg.model_path.parent, inputs, [cfg.model_path])
    print(f"trained {cfg.model.value} on {len(train_set)} commits -> {cfg.model_path}")
    return 0


def cmd_evaluating(cfg: RunConfig) -> int:
    out = cfg.results_dir
    if cfg.model is ModelKind.EXTERNAL:
        if cfg.score_file is None:
            raise CliError("model external needs -score_file")
        predictions = import_external_scores(cfg.score_file)
        inputs = {"score_file": file_digest(cfg.score_file)}
    else:
        if not cfg.model_path.exists():
            raise CliError(f"artifact not found: {cfg.model_path} (run training first)")
        artifact = load_artifact(cfg.model_path)
        test_path = cfg.project_dir / "test.jsonl"
        split = read_split(cfg.project_dir)
        test = _setting_filter(split.test, cfg.setting)
        texts = _load_texts(cfg) if cfg.model is ModelKind.VCC_LINEAR else None
        predictions = predict(artifact, test, texts)
        inputs = {"artifact": file_digest(cfg.model_path), "test": file_digest(test_path)}
    rep = report(predictions, cfg.threshold, cfg.ranking)
    write_predictions(predictions, out / "predictions.jsonl")
    atomic_write_text(out / "metrics.json", json.dumps(rep.to_json(), indent=2) + "\n")
    write_manifest(cfg, out, inputs, [out / "predictions.jsonl", out / "metrics.json"])
    for flag in rep.flags:
        print(f"note: {flag}", file=sys.stderr)
    print(json.dumps(rep.to_json(), indent=2))
    return 0


def cmd_inference(cfg: RunConfig) -> int:
    if cfg.model is ModelKind.EXTERNAL:
        raise CliError("external models cannot score new commits")
    if not cfg.model_path.exists():
        raise CliError(f"artifact not found: {cfg.model_path} (run training first)")
    assert cfg.input is not None
    artifact = load_artifact(cfg.model_path)
    records = read_feature_file(cfg.input)
    texts = _load_texts(cfg) if cfg.model is ModelKind.VCC_LINEAR else None
    predictions = predict(artifact, records, texts)
    out = cfg.output or cfg.results_dir / "inference.jsonl"
    write_predictions(predictions, out)
    inputs = {"artifact": file_digest(cfg.model_path), "input": file_digest(cfg.input)}
    write_manifest(cfg, out.parent, inputs, [out])
    print(f"scored {len(predictions)} commits -> {out}")
    return 0


COMMANDS = {
    "mining": cmd_mining,
    "training": cmd_training,
    "evaluating": cmd_evaluating,
    "inference": cmd_inference,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if ns.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.command](cfg)
    except (CliError, VulGuardError, OSError, ValueError) as exc:
        print(f"vulguard {ns.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
