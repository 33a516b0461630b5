"""Command-line surface: validate, interpret, train, eval, ablate, corr.

Every artifact embeds the resolved run configuration and a SHA-256 hash of
the input CSVs, so outputs are self-describing and byte-identical across
reruns with the same inputs and seed.  Exit codes: 0 success, 1 domain
error, 2 I/O error.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import evaluation, learn, lexicon
from .engine import RsaConfig, interpret
from .errors import Error, UnknownCategoryError
from .lexicon import MetaphorItem
from .metrics import top_k_indices

_DATASET_FILES = ("typicality.csv", "metaphors.csv", "human.csv")


def dataset_sha256(data_dir) -> str:
    digest = hashlib.sha256()
    for name in _DATASET_FILES:
        digest.update(name.encode())
        digest.update(b"\0")
        digest.update((Path(data_dir) / name).read_bytes())
    return digest.hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one command run; echoed into every artifact."""

    data_dir: str
    output_dir: str | None
    mode: str
    lam: float
    lambda_source: str
    split_seed: int
    objective: str
    jsd_base: float
    utterances: str
    category_prior: str
    goal_prior: str
    raw_ratings: bool
    ks: tuple[int, ...]
    grid: tuple[float, float, int]

    def to_dict(self) -> dict:
        return {
            "data_dir": self.data_dir,
            "output_dir": self.output_dir,
            "mode": self.mode,
            "lambda": self.lam,
            "lambda_source": self.lambda_source,
            "split_seed": self.split_seed,
            "objective": self.objective,
            "jsd_base": self.jsd_base,
            "utterances": self.utterances,
            "category_prior": self.category_prior,
            "goal_prior": self.goal_prior,
            "raw_ratings": self.raw_ratings,
            "k": list(self.ks),
            "grid": list(self.grid),
        }

    def rsa_config(self) -> RsaConfig:
        return RsaConfig(
            lam=self.lam,
            utterances=self.utterances,
            category_prior=self.category_prior,
            goal_prior=self.goal_prior,
            mode=self.mode,
        )


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Error as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except BrokenPipeError:
            # downstream consumer (e.g. head) closed the pipe: die quietly
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
            sys.exit(1)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(sorted({int(part) for part in text.split(",") if part.strip()}))
    except ValueError:
        raise Error(f"invalid --k value {text!r}; expected e.g. '1,3'") from None
    if not ks or any(k < 1 for k in ks):
        raise Error(f"invalid --k value {text!r}; k values must be >= 1")
    return ks


def _parse_grid(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise Error(f"invalid --grid value {text!r}; expected 'start:stop:count'") from None
    if start <= 0 or stop < start or count < 1:
        raise Error(f"invalid --grid value {text!r}; need 0 < start <= stop, count >= 1")
    return start, stop, count


def _resolve_lambda(text: str, output_dir: str | None) -> tuple[float, str]:
    if text == "learned":
        if output_dir is None:
            raise Error("--lambda learned needs --output-dir to locate params.json")
        params_path = Path(output_dir) / "params.json"
        if not params_path.exists():
            raise Error(f"--lambda learned: {params_path} not found; run train first")
        params = json.loads(params_path.read_text(encoding="utf-8"))
        return float(params["lambda"]), "learned"
    try:
        return float(text), "value"
    except ValueError:
        raise Error(f"invalid --lambda value {text!r}; expected a number or 'learned'") from None


def _edit_distance(a: str, b: str, cap: int = 3) -> int:
    if abs(len(a) - len(b)) >= cap:
        return cap
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return min(prev[-1], cap)


def _require_category(noun: str, table: lexicon.TypicalityTable) -> None:
    if noun in table:
        return
    near = sorted(
        (c for c in table.categories if _edit_distance(noun, c) <= 2),
        key=lambda c: (_edit_distance(noun, c), c),
    )
    raise UnknownCategoryError(noun, suggestions=near[:5])


class ArtifactWriter:
    """Writes artifacts to the output directory; removes partial output on failure."""

    def __init__(self, output_dir, config: RunConfig, data_hash: str):
        self.dir = Path(output_dir)
        self.envelope = {"config": config.to_dict(), "dataset_sha256": data_hash}
        self._written: list[Path] = []

    def __enter__(self):
        self.dir.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for path in self._written:
                path.unlink(missing_ok=True)
        return False

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.dir / name
        body = dict(self.envelope)
        body.update(payload)
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self._written.append(path)
        return path

    def write_csv(self, name: str, rows: list[list[str]]) -> Path:
        path = self.dir / name
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.envelope, sort_keys=True, separators=(",", ":")) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows(rows)
        path.write_text(buf.getvalue(), encoding="utf-8")
        self._written.append(path)
        return path


def _dataset_options(fn):
    fn = click.option(
        "--raw-ratings", is_flag=True,
        help="Treat typicality.csv values as 1-7 Likert means and normalize them.",
    )(fn)
    fn = click.option(
        "--data-dir", required=True, type=click.Path(file_okay=False),
        help="Directory holding typicality.csv, metaphors.csv, human.csv.",
    )(fn)
    return fn


def _engine_options(fn):
    for option in (
        click.option("--mode", type=click.Choice(["full", "fast"]), default="full",
                     show_default=True, help="Full recursion or the reduced fast path."),
        click.option("--lambda", "lam_text", default="1.0", show_default=True,
                     help="Speaker rationality: a number, or 'learned' to read params.json."),
        click.option("--utterances", type=click.Choice(["all", "pair"]), default="all",
                     show_default=True, help="Speaker's utterance alternative set."),
        click.option("--category-prior", type=click.Choice(["topic", "uniform"]),
                     default="topic", show_default=True),
        click.option("--goal-prior", type=click.Choice(["relevance", "uniform"]),
                     default="relevance", show_default=True),
    ):
        fn = option(fn)
    return fn


def _eval_options(fn):
    for option in (
        click.option("--seed", "split_seed", type=int, default=0, show_default=True,
                     help="Seed for the stratified train/test split."),
        click.option("--objective", type=click.Choice(["mean", "pooled"]), default="mean",
                     show_default=True, help="Mean per-metaphor Pearson or one pooled correlation."),
        click.option("--jsd-base", type=click.Choice(["2", "e"]), default="2",
                     show_default=True),
        click.option("--k", "k_text", default="1,3", show_default=True,
                     help="Comma-separated k values for k-agreement."),
        click.option("--grid", "grid_text", default="0.5:100:200", show_default=True,
                     help="start:stop:count log-spaced grid for the grid-lambda ablation."),
    ):
        fn = option(fn)
    return fn


def _build_config(
    data_dir, output_dir, mode, lam_text, utterances, category_prior, goal_prior,
    raw_ratings, split_seed=0, objective="mean", jsd_base="2", k_text="1,3",
    grid_text="0.5:100:200",
) -> RunConfig:
    lam, lam_source = _resolve_lambda(lam_text, output_dir)
    return RunConfig(
        data_dir=str(data_dir),
        output_dir=None if output_dir is None else str(output_dir),
        mode=mode,
        lam=lam,
        lambda_source=lam_source,
        split_seed=split_seed,
        objective=objective,
        jsd_base=2.0 if jsd_base == "2" else 2.718281828459045,
        utterances=utterances,
        category_prior=category_prior,
        goal_prior=goal_prior,
        raw_ratings=raw_ratings,
        ks=_parse_ks(k_text),
        grid=_parse_grid(grid_text),
    )


@click.group()
def main():
    """RSA metaphor interpretation: inference, learning, and evaluation."""


@main.command()
@_dataset_options
@_handle_errors
def validate(data_dir, raw_ratings):
    """Check dataset invariants; print violations and exit non-zero if any."""
    table, items, human = lexicon.read_dataset(data_dir, raw_ratings=raw_ratings)
    report = lexicon.validate(table, items, human)
    if not report.ok:
        click.echo(str(report), err=True)
        sys.exit(1)
    click.echo(
        f"dataset OK: {len(table.categories)} categories, "
        f"{table.n} features, {len(items)} metaphors"
    )


@main.command("interpret")
@_dataset_options
@_engine_options
@click.option("--topic", required=True, help="Topic noun (the X in 'X are Y').")
@click.option("--vehicle", required=True, help="Vehicle noun (the Y in 'X are Y').")
@click.option("--k", "k_text", default="3", show_default=True,
              help="Size of the top-k summary line.")
@click.option("--output-dir", type=click.Path(file_okay=False), default=None,
              help="Where to find params.json when --lambda learned is used.")
@_handle_errors
def cmd_interpret(data_dir, raw_ratings, mode, lam_text, utterances,
                  category_prior, goal_prior, topic, vehicle, k_text, output_dir):
    """Print the ranked feature distribution for one topic-vehicle pair."""
    table, _, _ = lexicon.load_dataset(data_dir, raw_ratings=raw_ratings)
    _require_category(topic, table)
    _require_category(vehicle, table)
    config = _build_config(
        data_dir, output_dir, mode, lam_text, utterances, category_prior,
        goal_prior, raw_ratings,
    )
    item = MetaphorItem(id=f"{topic}-{vehicle}", topic=topic, vehicle=vehicle)
    dist = interpret(item, config.rsa_config(), table)
    probs = dist.p
    k = max(_parse_ks(k_text))
    if k > table.n:
        raise Error(f"--k {k} exceeds the {table.n}-feature vocabulary")
    order = top_k_indices(probs, table.n)
    click.echo(f"interpretation of '{topic} are {vehicle}' "
               f"(lambda={config.lam:.12g}, mode={config.mode}):")
    for i in order:
        click.echo(f"  {table.vocab.features[i]}  {probs[i]:.12g}")
    top = [table.vocab.features[i] for i in order[:k]]
    click.echo(f"top-{k}: " + ", ".join(top))


@main.command()
@_dataset_options
@_engine_options
@_eval_options
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@_handle_errors
def train(data_dir, raw_ratings, mode, lam_text, utterances, category_prior,
          goal_prior, split_seed, objective, jsd_base, k_text, grid_text, output_dir):
    """Fit the rationality parameter on the train split; write params.json."""
    config = _build_config(
        data_dir, output_dir, mode, lam_text, utterances, category_prior, goal_prior,
        raw_ratings, split_seed, objective, jsd_base, k_text, grid_text,
    )
    table, items, human = lexicon.load_dataset(data_dir, raw_ratings=raw_ratings)
    split = learn.make_split(items, split_seed)
    by_id = {item.id: item for item in items}
    train_items = tuple(by_id[i] for i in split.train)
    fit = learn.learn_lambda_multistart(
        train_items, human, config.rsa_config(), table, kind=objective,
    )
    with ArtifactWriter(output_dir, config, dataset_sha256(data_dir)) as writer:
        path = writer.write_json("params.json", {
            "lambda": fit.lambda_hat,
            "objective": fit.objective_value,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "stop_reason": fit.stop_reason,
            "gradient_norm": fit.gradient_norm_at_convergence,
            "trace": [[k, lam, value] for k, lam, value in fit.trace],
            "split_seed": split_seed,
            "train_ids": list(split.train),
            "test_ids": list(split.test),
        })
    click.echo(f"learned lambda={fit.lambda_hat:.6g} "
               f"(objective={fit.objective_value:.6g}, {fit.stop_reason}) -> {path}")


@main.command("eval")
@_dataset_options
@_engine_options
@_eval_options
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@_handle_errors
def cmd_eval(data_dir, raw_ratings, mode, lam_text, utterances, category_prior,
             goal_prior, split_seed, objective, jsd_base, k_text, grid_text, output_dir):
    """Evaluate the model against human data; write report.json and report.csv."""
    config = _build_config(
        data_dir, output_dir, mode, lam_text, utterances, category_prior, goal_prior,
        raw_ratings, split_seed, objective, jsd_base, k_text, grid_text,
    )
    table, items, human = lexicon.load_dataset(data_dir, raw_ratings=raw_ratings)
    split = None
    try:
        split = learn.make_split(items, split_seed)
    except Error:
        pass  # datasets without the 24-item stratified layout get no split groups
    report = evaluation.evaluate(
        items, human, config.rsa_config(), table,
        ks=config.ks, jsd_base=config.jsd_base, split=split,
    )
    with ArtifactWriter(output_dir, config, dataset_sha256(data_dir)) as writer:
        writer.write_json("report.json", {"report": evaluation.report_to_dict(report)})
        writer.write_csv("report.csv", evaluation.report_csv_rows(report))
    stats = report.groups["all"]
    click.echo(f"mean r={stats.mean_pearson:.4f}, mean JSD={stats.mean_jsd:.4f}, "
               f"top-1 matches {stats.top1_match_count}/{stats.n_items}")


@main.command()
@_dataset_options
@_engine_options
@_eval_options
@click.option("--kind", type=click.Choice(["no-relevance", "grid-lambda"]), required=True)
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@_handle_errors
def ablate(data_dir, raw_ratings, mode, lam_text, utterances, category_prior,
           goal_prior, split_seed, objective, jsd_base, k_text, grid_text, kind,
           output_dir):
    """Run one ablation (uniform goal prior, or grid-searched lambda)."""
    config = _build_config(
        data_dir, output_dir, mode, lam_text, utterances, category_prior, goal_prior,
        raw_ratings, split_seed, objective, jsd_base, k_text, grid_text,
    )
    table, items, human = lexicon.load_dataset(data_dir, raw_ratings=raw_ratings)
    with ArtifactWriter(output_dir, config, dataset_sha256(data_dir)) as writer:
        if kind == "no-relevance":
            report = evaluation.ablate_relevance(
                items, human, config.rsa_config(), table,
                ks=config.ks, jsd_base=config.jsd_base,
            )
            payload = {"report": evaluation.report_to_dict(report)}
            path = writer.write_json("ablation_no_relevance.json", payload)
        else:
            split = learn.make_split(items, split_seed)
            by_id = {item.id: item for item in items}
            train_items = tuple(by_id[i] for i in split.train)
            grid = evaluation.lambda_grid(*config.grid)
            best, report = evaluation.ablate_lambda_interpolation(
                items, human, config.rsa_config(), table,
                grid=grid, train=train_items, objective_kind=objective,
                ks=config.ks, jsd_base=config.jsd_base,
            )
            payload = {"best_lambda": best, "report": evaluation.report_to_dict(report)}
            path = writer.write_json("ablation_grid_lambda.json", payload)
    stats = report.groups["all"]
    click.echo(f"ablation {kind}: mean r={stats.mean_pearson:.4f} -> {path}")


@main.command()
@_dataset_options
@_engine_options
@_eval_options
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@_handle_errors
def corr(data_dir, raw_ratings, mode, lam_text, utterances, category_prior,
         goal_prior, split_seed, objective, jsd_base, k_text, grid_text, output_dir):
    """Write model- and human-side feature correlation matrices as CSV."""
    config = _build_config(
        data_dir, output_dir, mode, lam_text, utterances, category_prior, goal_prior,
        raw_ratings, split_seed, objective, jsd_base, k_text, grid_text,
    )
    table, items, human = lexicon.load_dataset(data_dir, raw_ratings=raw_ratings)
    features = table.vocab.features
    model_matrix = evaluation.feature_correlation_matrix(
        items, "model", config.rsa_config(), table,
    )
    human_matrix = evaluation.feature_correlation_matrix(
        items, "human", config.rsa_config(), table, human=human,
    )
    with ArtifactWriter(output_dir, config, dataset_sha256(data_dir)) as writer:
        writer.write_csv("corr_model.csv", evaluation.matrix_csv_rows(model_matrix, features))
        writer.write_csv("corr_human.csv", evaluation.matrix_csv_rows(human_matrix, features))
    click.echo(f"wrote corr_model.csv and corr_human.csv to {output_dir}")


if __name__ == "__main__":
    main()
