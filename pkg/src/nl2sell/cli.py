"""Operator command line.

Exit codes: 0 success, 1 domain error (bad SELL, validation failure,
backend trouble), 2 configuration error. ``--json`` switches machine
output; ``--seed`` pins every random draw.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path
from typing import Optional

import click

from .catalog import load_catalog
from .config import AppConfig, ConfigError, load_config, make_backend, make_embedder
from .gateway import CompletionRequest, GatewayError
from .metrics import evaluate_benchmark, render_report_table
from .prompts import build_predict_prompt, load_instructions
from .retrieval import build_library, load_library, save_library
from .sell.cards import to_card
from .sell.parser import SellParseError, find_sell, parse
from .sell.printer import extract_structure, print_sell
from .sell.validation import validate
from .synth import (
    AnswerMismatchError,
    CorpusMode,
    Rejection,
    SchemaMismatchError,
    TEMPLATES,
    TrainSample,
    emit_corpus,
    generate_demand,
    generate_reasoning,
    load_samples,
    save_samples,
    split_rng,
    synthesize_answer,
    write_review_queue,
)
from .sell.ast import to_json_obj as ast_to_json_obj
from .targeting import export_segment, load_user_db, select_users


def _echo_json(obj) -> None:
    click.echo(json.dumps(obj, ensure_ascii=False, indent=2))


def handle_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except (SellParseError, GatewayError, ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Path to the YAML configuration file.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.option("--seed", default="0", show_default=True, help="Seed for every random draw.")
@click.pass_context
def main(ctx, config_path: Optional[str], as_json: bool, seed: str):
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["json"] = as_json
    ctx.obj["seed"] = seed


def _config(ctx, require_files: bool = True) -> AppConfig:
    return load_config(ctx.obj["config_path"], require_files=require_files)


def _need(config: AppConfig, name: str) -> Path:
    value = getattr(config.paths, name)
    if value is None:
        raise ConfigError(f"this command needs paths.{name} in the config")
    return value


@main.command("parse")
@click.argument("sell_text")
@click.pass_context
@handle_errors
def parse_cmd(ctx, sell_text: str):
    """Parse SELL text and print its canonical form."""
    expr = parse(sell_text)
    if ctx.obj["json"]:
        _echo_json({"sell": print_sell(expr), "ast": ast_to_json_obj(expr),
                    "card": to_card(expr).to_json_obj()})
    else:
        click.echo(print_sell(expr))


@main.command("validate")
@click.argument("sell_text")
@click.pass_context
@handle_errors
def validate_cmd(ctx, sell_text: str):
    """Validate SELL text against the configured catalog."""
    config = _config(ctx)
    catalog = load_catalog(_need(config, "catalog"))
    expr = parse(sell_text)
    report = validate(expr, catalog)
    if ctx.obj["json"]:
        _echo_json(report.to_json_obj())
    elif report.ok:
        click.echo("ok")
    else:
        for issue in report.issues:
            click.echo(f"{'.'.join(map(str, issue.path)) or '<root>'}: {issue.code}: {issue.message}")
    if not report.ok:
        sys.exit(1)


@main.command("structure")
@click.argument("sell_text")
@click.pass_context
@handle_errors
def structure_cmd(ctx, sell_text: str):
    """Print the logic skeleton of SELL text."""
    skeleton = extract_structure(sell_text)
    if ctx.obj["json"]:
        _echo_json({"skeleton": skeleton})
    else:
        click.echo(skeleton)


@main.command("translate")
@click.argument("demand")
@click.option("--k", type=int, default=None, help="Override the number of demonstrations.")
@click.option("--n", type=int, default=None, help="Override the tag-list size.")
@click.pass_context
@handle_errors
def translate_cmd(ctx, demand: str, k: Optional[int], n: Optional[int]):
    """Translate a natural-language demand into SELL."""
    config = _config(ctx)
    catalog = load_catalog(_need(config, "catalog"))
    library = load_library(_need(config, "library"))
    embedder = make_embedder(config)
    backend = make_backend(config)
    instructions = load_instructions(config.paths.templates)
    bundle = build_predict_prompt(
        demand, library, catalog, embedder, instructions,
        k=config.retrieval.k if k is None else k,
        n=config.retrieval.n if n is None else n)
    result = backend.complete(CompletionRequest(prompt=bundle.rendered, model=config.llm.model))
    expr = find_sell(result.text)
    if expr is None:
        raise ValueError(f"model completion contains no SELL expression: {result.text[:120]!r}")
    report = validate(expr, catalog)
    if ctx.obj["json"]:
        _echo_json({
            "sell": print_sell(expr),
            "card": to_card(expr).to_json_obj(),
            "validation": report.to_json_obj(),
            "prompt_provenance": bundle.provenance,
        })
    else:
        click.echo(print_sell(expr))
        if not report.ok:
            for issue in report.issues:
                click.echo(f"warning: {issue.code}: {issue.message}", err=True)


@main.command("build-library")
@click.argument("seeds_file", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
@handle_errors
def build_library_cmd(ctx, seeds_file: str, out_path: str):
    """Build the reasoning library from seed records (JSONL: demand, tags, reasoning, sell)."""
    config = _config(ctx, require_files=False)
    catalog = load_catalog(_need(config, "catalog"))
    embedder = make_embedder(config)
    records = []
    with open(seeds_file, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    report = build_library(records, embedder, catalog)
    save_library(report.library, out_path)
    if ctx.obj["json"]:
        _echo_json({
            "built": len(report.library),
            "rejected": [{"index": r.index, "demand": r.demand, "reason": r.reason}
                         for r in report.rejected],
            "out": str(out_path),
        })
    else:
        click.echo(f"built {len(report.library)} entries -> {out_path}")
        for r in report.rejected:
            click.echo(f"rejected record {r.index}: {r.reason}", err=True)


@main.group("synth")
def synth_group():
    """Training-data synthesis pipelines."""


@synth_group.command("answers")
@click.option("--count", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
@handle_errors
def synth_answers_cmd(ctx, count: int, out_path: str):
    """Sample SELL answers from the logic templates (cycled, seeded)."""
    config = _config(ctx)
    catalog = load_catalog(_need(config, "catalog"))
    seed = ctx.obj["seed"]
    rows = []
    for i in range(count):
        template = TEMPLATES[i % len(TEMPLATES)]
        expr = synthesize_answer(template, catalog, split_rng(seed, i))
        rows.append({
            "id": f"syn-{i + 1:05d}",
            "demand": "",
            "sell": print_sell(expr),
            "reasoning": None,
            "source": "answer_to_demand",
            "verified": False,
            "template_id": template.template_id,
        })
    with open(out_path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            f.write("\n")
    if ctx.obj["json"]:
        _echo_json({"count": len(rows), "out": str(out_path)})
    else:
        click.echo(f"wrote {len(rows)} answers -> {out_path}")


@synth_group.command("demands")
@click.option("--answers", "answers_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
@handle_errors
def synth_demands_cmd(ctx, answers_path: str, out_path: str):
    """Ask the model to write demands for synthesized answers."""
    config = _config(ctx)
    library = load_library(_need(config, "library"))
    backend = make_backend(config)
    instructions = load_instructions(config.paths.templates)
    samples = load_samples(answers_path)
    out = []
    for sample in samples:
        generated = generate_demand(parse(sample.sell), library, backend, instructions,
                                    model=config.llm.model)
        out.append(TrainSample(
            sample_id=sample.sample_id,
            demand=generated.demand,
            sell=sample.sell,
            reasoning=sample.reasoning,
            source="answer_to_demand",
            verified=sample.verified,
        ))
    save_samples(out, out_path)
    if ctx.obj["json"]:
        _echo_json({"count": len(out), "out": str(out_path)})
    else:
        click.echo(f"wrote {len(out)} demands -> {out_path}")


@synth_group.command("reasoning")
@click.option("--samples", "samples_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--review", "review_path", type=click.Path(), default=None,
              help="Where rejected completions go (JSONL).")
@click.pass_context
@handle_errors
def synth_reasoning_cmd(ctx, samples_path: str, out_path: str, review_path: Optional[str]):
    """Generate and check the four reasoning steps for each sample."""
    config = _config(ctx)
    library = load_library(_need(config, "library"))
    backend = make_backend(config)
    instructions = load_instructions(config.paths.templates)
    samples = load_samples(samples_path)
    out = []
    rejections = []
    for sample in samples:
        try:
            reasoning = generate_reasoning(sample.demand, parse(sample.sell), library,
                                           backend, instructions, model=config.llm.model)
        except (SchemaMismatchError, AnswerMismatchError) as exc:
            rejections.append(Rejection(demand=sample.demand, completion="",
                                        code=type(exc).__name__, reason=str(exc)))
            continue
        out.append(TrainSample(
            sample_id=sample.sample_id,
            demand=sample.demand,
            sell=sample.sell,
            reasoning=reasoning,
            source=sample.source,
            verified=sample.verified,
        ))
    save_samples(out, out_path)
    if review_path is not None and rejections:
        write_review_queue(rejections, review_path)
    if ctx.obj["json"]:
        _echo_json({"accepted": len(out), "rejected": len(rejections), "out": str(out_path)})
    else:
        click.echo(f"wrote {len(out)} samples -> {out_path} ({len(rejections)} rejected)")


@synth_group.command("corpus")
@click.option("--samples", "samples_path", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice([m.value for m in CorpusMode]), default="multitask",
              show_default=True)
@click.option("--k", type=int, default=None, help="Override the number of demonstrations.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
@handle_errors
def synth_corpus_cmd(ctx, samples_path: str, mode: str, k: Optional[int], out_path: str):
    """Emit training records for fine-tuning."""
    config = _config(ctx)
    catalog = load_catalog(_need(config, "catalog"))
    library = load_library(_need(config, "library"))
    embedder = make_embedder(config)
    instructions = load_instructions(config.paths.templates)
    samples = load_samples(samples_path)
    records = emit_corpus(samples, library, catalog, embedder, instructions,
                          CorpusMode(mode),
                          k=config.retrieval.k if k is None else k,
                          n=config.retrieval.n, path=out_path)
    if ctx.obj["json"]:
        _echo_json({"records": len(records), "mode": mode, "out": str(out_path)})
    else:
        click.echo(f"wrote {len(records)} records ({mode}) -> {out_path}")


@main.command("eval")
@click.option("--predictions", "predictions_path", type=click.Path(exists=True), required=True)
@click.option("--testset", "testset_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Also write the full JSON report here.")
@click.pass_context
@handle_errors
def eval_cmd(ctx, predictions_path: str, testset_path: str, out_path: Optional[str]):
    """Score a predictions file against a testset file."""
    report = evaluate_benchmark(predictions_path, testset_path)
    if out_path is not None:
        Path(out_path).write_text(
            json.dumps(report.to_json_obj(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8")
    if ctx.obj["json"]:
        _echo_json(report.to_json_obj())
    else:
        click.echo(render_report_table(report))


@main.command("select")
@click.argument("sell_text")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--format", "format_", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.pass_context
@handle_errors
def select_cmd(ctx, sell_text: str, out_path: Optional[str], format_: str):
    """Select matching users from the configured database."""
    config = _config(ctx)
    catalog = load_catalog(_need(config, "catalog"))
    user_db = load_user_db(_need(config, "user_db"), catalog)
    expr = parse(sell_text)
    ids = select_users(expr, user_db)
    if out_path is not None:
        export_segment(ids, out_path, format_)
    if ctx.obj["json"]:
        _echo_json({"user_ids": ids, "count": len(ids)})
    else:
        for uid in ids:
            click.echo(uid)
        click.echo(f"count: {len(ids)}", err=True)


@main.command("serve")
@click.option("--host", default=None, help="Override the configured bind host.")
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.pass_context
@handle_errors
def serve_cmd(ctx, host: Optional[str], port: Optional[int]):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    config = _config(ctx)
    app = create_app(config)
    uvicorn.run(app,
                host=config.service.host if host is None else host,
                port=config.service.port if port is None else port)


if __name__ == "__main__":
    main()
