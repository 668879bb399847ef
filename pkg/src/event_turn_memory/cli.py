"""
Command Line Interface for the event-turn memory engine.
"""
import sys
import tempfile
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .config.settings import AppConfig, get_config
from .exceptions import DatasetError
from .llm.prompts import CATEGORIES
from .llm.usage import UsageLedger
from .utils.logging import memory_logger, setup_logging

SNAPSHOT_SUFFIX = ".etm"


def _abort(action: str, error: Exception):
    """Print a failure line and exit 2 for input errors, 1 otherwise."""
    code = 2 if isinstance(error, (DatasetError, FileNotFoundError)) else 1
    if code == 1:
        memory_logger.log_error(error, context=action)
    click.echo(f"❌ {action} failed: {error}", err=True)
    sys.exit(code)


def _settings(ctx, provider: Optional[str] = None, encoder: Optional[str] = None,
              window: Optional[int] = None, tau: Optional[int] = None,
              hierarchy: Optional[bool] = None) -> AppConfig:
    settings: AppConfig = ctx.obj["settings"]
    memory = {key: value for key, value in (("window_size", window), ("tau", tau))
              if value is not None}
    updates = {}
    if memory:
        updates["memory"] = settings.memory.model_validate({**settings.memory.model_dump(), **memory})
    if provider:
        updates["llm"] = settings.llm.model_copy(update={"provider": provider})
    if encoder:
        updates["encoder"] = settings.encoder.model_copy(update={"kind": encoder})
    if hierarchy is not None:
        updates["retrieval"] = settings.retrieval.model_copy(update={"hierarchy_enabled": hierarchy})
    return settings.model_copy(update=updates)


def _echo_call_log(ctx, ledger: UsageLedger):
    if not ctx.obj["verbose"]:
        return
    click.echo("\n🔎 Gateway call log:")
    for record in ledger.calls:
        status = "ok" if record.ok else "invalid"
        click.echo(f"   {record.family:<28} {record.stage:<20} "
                   f"{record.prompt_tokens}+{record.completion_tokens} tokens "
                   f"attempt {record.attempt} {status}")


def _snapshot_paths(store: Path):
    if store.is_dir():
        return sorted(store.glob(f"*{SNAPSHOT_SUFFIX}"))
    if not store.exists():
        raise FileNotFoundError(f"store not found: {store}")
    return [store]


def _fmt(value, digits: int = 4) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


@click.group()
@click.version_option(version=__version__, prog_name="Event-Turn Memory")
@click.option('--verbose', '-v', is_flag=True, help='Enable debug logging and print the gateway call log')
@click.pass_context
def main(ctx, verbose):
    """🧠 Event-Turn Memory - two-level conversational memory with LLM-guided retrieval."""
    ctx.ensure_object(dict)
    ctx.obj['verbose'] = verbose
    settings = get_config()
    ctx.obj['settings'] = settings

    log_config = settings.logging
    if verbose:
        log_config = log_config.model_copy(update={"level": "DEBUG"})
    setup_logging(log_config)


@main.command()
@click.option('--dataset', '-d', required=True, help='Dataset JSON file')
@click.option('--store', '-s', required=True, help='Directory for the per-conversation snapshots')
@click.option('--provider', type=click.Choice(['stub', 'http']), help='LLM provider')
@click.option('--encoder', type=click.Choice(['hashing', 'noise']), help='Embedding encoder')
@click.option('--window', type=click.IntRange(min=1), help='Turn analysis window m')
@click.option('--tau', type=click.IntRange(min=1), help='Adaptive update threshold τ')
@click.pass_context
def ingest(ctx, dataset, store, provider, encoder, window, tau):
    """Ingest every conversation of a dataset into its own snapshot."""
    try:
        from .evaluation.dataset import load_dataset
        from .system import ConversationMemory

        settings = _settings(ctx, provider=provider, encoder=encoder, window=window, tau=tau)
        data = load_dataset(dataset)
        click.echo(f"📚 Loaded {len(data.conversations)} conversations from {dataset}")

        out_dir = Path(store)
        out_dir.mkdir(parents=True, exist_ok=True)
        ledger = UsageLedger()
        totals = {"turn_count": 0, "event_count": 0, "link_count": 0}
        for conversation in data.conversations:
            memory = ConversationMemory(settings, ledger=ledger,
                                        conversation_id=conversation.conversation_id)
            memory.add_turns(conversation.dialogue_turns(), progress=ctx.obj['verbose'])
            path = memory.save(out_dir / f"{conversation.conversation_id}{SNAPSHOT_SUFFIX}")
            stats = memory.store.stats()
            for key in totals:
                totals[key] += stats[key]
            click.echo(f"   💾 {conversation.conversation_id}: {stats['turn_count']} turns, "
                       f"{stats['event_count']} events → {path}")

        usage = ledger.report()["total"]
        click.echo(f"\n✅ Ingested {totals['turn_count']} turns into {totals['event_count']} events "
                   f"({totals['link_count']} links) | tokens {usage['prompt_tokens']} in / "
                   f"{usage['completion_tokens']} out over {usage['call_count']} calls")
        _echo_call_log(ctx, ledger)

    except click.ClickException:
        raise
    except Exception as e:
        _abort("Ingestion", e)


@main.command()
@click.option('--store', '-s', required=True, help='Snapshot file of one conversation')
@click.option('--question', '-q', required=True, help='Question text')
@click.option('--category', '-c', default='single_hop', type=click.Choice(list(CATEGORIES)),
              help='Question category')
@click.option('--distractor', help='Candidate answer for adversarial questions')
@click.option('--no-hierarchy', is_flag=True, help='Flat single-layer retrieval, no event layer')
@click.option('--provider', type=click.Choice(['stub', 'http']), help='LLM provider')
@click.pass_context
def query(ctx, store, question, category, distractor, no_hierarchy, provider):
    """Answer one question against a stored conversation."""
    if category == "adversarial" and not distractor:
        raise click.UsageError("--distractor is required for adversarial questions")
    try:
        from .system import ConversationMemory

        settings = _settings(ctx, provider=provider, hierarchy=not no_hierarchy)
        memory = ConversationMemory.load(store, settings=settings)
        mode = "flat" if no_hierarchy else "full"
        result = memory.ask(question, category=category, distractor=distractor, mode=mode)

        click.echo(f"🔍 Evidence ({mode}, {len(result.trace.final)} turns):")
        for item in result.trace.final:
            click.echo(f"   [{item.provenance.value}] {item.turn.render()}")
        click.echo(f"\n💬 Answer: {result.answer}")
        _echo_call_log(ctx, memory.ledger)

    except click.ClickException:
        raise
    except Exception as e:
        _abort("Query", e)


@main.command(name="eval")
@click.option('--dataset', '-d', required=True, help='Dataset JSON file')
@click.option('--provider', type=click.Choice(['stub', 'http']), help='LLM provider')
@click.option('--encoder', type=click.Choice(['hashing', 'noise']), help='Embedding encoder')
@click.option('--mode', '-m', 'modes', multiple=True, default=['full'],
              type=click.Choice(['full', 'no-hierarchy', 'flat', 'vector']),
              help='Retrieval mode; repeat to compare modes on the same memories')
@click.option('--fixed-k', 'fixed_k', multiple=True, type=click.IntRange(min=1),
              help='Also run the fixed-K truncation sweep at these K values')
@click.option('--pricing', type=click.Path(dir_okay=False), help='Pricing JSON for cost lines')
@click.option('--workers', type=click.IntRange(min=1), help='Threads per conversation')
@click.option('--out', '-o', required=True, help='Report JSON path')
@click.pass_context
def evaluate(ctx, dataset, provider, encoder, modes, fixed_k, pricing, workers, out):
    """Run the benchmark and write a report."""
    try:
        from .evaluation.benchmark import (
            build_memories,
            comparison_table,
            fixed_k_sweep,
            pricing_from_config,
            run_benchmark,
        )
        from .evaluation.dataset import load_dataset
        from .llm.usage import PricingTable

        settings = _settings(ctx, provider=provider, encoder=encoder)
        data = load_dataset(dataset)
        pricing_table = PricingTable.from_file(pricing) if pricing else pricing_from_config(settings)

        click.echo(f"🧪 Ingesting {len(data.conversations)} conversations...")
        bank = build_memories(data, settings, progress=ctx.obj['verbose'])

        reports = {}
        out_path = Path(out)
        for mode in dict.fromkeys(modes):
            report = run_benchmark(data, mode, settings, pricing=pricing_table, bank=bank,
                                   workers=workers)
            target = out_path if len(modes) == 1 else \
                out_path.with_name(f"{out_path.stem}.{mode}{out_path.suffix}")
            report.write(target)
            reports[mode] = report
            click.echo(f"💾 [{mode}] report written to {target}")

        click.echo("\n📊 Results:")
        table = comparison_table(reports)
        click.echo(table.to_string(float_format=lambda value: f"{value:.4f}"))

        for mode, report in reports.items():
            if report.failures:
                click.echo(f"⚠️ [{mode}] {report.failures} question(s) failed")
            cost = report.usage["cost"]
            click.echo(f"💰 [{mode}] Cost: {cost['total']}")
            for line in cost["lines"]:
                click.echo(f"   {line['label']:<40} {line['model']:<14} "
                           f"{line['prompt_tokens']:>10,} in {line['completion_tokens']:>9,} out  {line['cost']}")

        if fixed_k:
            sweep = fixed_k_sweep(data, sorted(set(fixed_k)), settings, bank=bank)
            sweep_path = out_path.with_name(f"{out_path.stem}.fixed_k.csv")
            sweep.to_csv(sweep_path, index=False)
            click.echo("\n📐 Fixed-K truncation:")
            click.echo(sweep.to_string(index=False, float_format=lambda value: f"{value:.4f}"))
            click.echo(f"💾 Sweep written to {sweep_path}")

        click.echo("\n✅ Evaluation completed successfully!")

    except click.ClickException:
        raise
    except Exception as e:
        _abort("Evaluation", e)


@main.command()
@click.option('--store', '-s', required=True, help='Snapshot file or directory of snapshots')
def stats(store):
    """Show turn, event and link counts of stored conversations."""
    try:
        from .store import MemoryStore

        for path in _snapshot_paths(Path(store)):
            memory_store = MemoryStore.load(path)
            counts = memory_store.stats()
            header = MemoryStore.read_header(path)
            click.echo(f"📦 {path.name} ({header['conversation_id']})")
            click.echo(f"   Turns: {counts['turn_count']:,}")
            click.echo(f"   Events: {counts['event_count']:,}")
            click.echo(f"   Links: {counts['link_count']:,}")
            click.echo(f"   Serialized: {counts['serialized_bytes'] / 1024:.1f} KB")

    except click.ClickException:
        raise
    except Exception as e:
        _abort("Stats", e)


@main.command(name="scale-bench")
@click.option('--sizes', default='100,10000,100000', help='Comma-separated store sizes in turns')
@click.option('--queries', type=click.IntRange(min=1), help='Queries timed per size')
@click.option('--out', '-o', help='CSV output path')
@click.pass_context
def scale_bench(ctx, sizes, queries, out):
    """Measure snapshot size, event overhead and top-k latency per store size."""
    try:
        counts = [int(size) for size in sizes.split(",") if size.strip()]
    except ValueError:
        raise click.BadParameter(f"sizes must be integers: {sizes}", param_hint="--sizes")
    if not counts or min(counts) < 1:
        raise click.BadParameter("sizes must be positive", param_hint="--sizes")
    try:
        from .evaluation.scaling import scaling_harness

        queries = queries or ctx.obj["settings"].evaluation.scaling_queries
        click.echo(f"📏 Scaling over {', '.join(f'{count:,}' for count in counts)} turns...")
        table = scaling_harness(counts, queries=queries, progress=ctx.obj['verbose'])
        click.echo(table.to_string(index=False, float_format=lambda value: f"{value:.4f}"))
        if out:
            table.to_csv(out, index=False)
            click.echo(f"\n💾 Table saved to {out}")

    except click.ClickException:
        raise
    except Exception as e:
        _abort("Scaling benchmark", e)


@main.command()
@click.option('--store', '-s', required=True, help='Snapshot file')
@click.option('--out', '-o', help='Write a copy of the snapshot here')
@click.option('--verify', is_flag=True, help='Check that a save/reload round trip is lossless')
def snapshot(store, out, verify):
    """Inspect, copy and verify a snapshot."""
    try:
        from .store import MemoryStore

        memory_store = MemoryStore.load(store)
        header = MemoryStore.read_header(store)
        click.echo(f"📦 {store}")
        click.echo(f"   Format: {header['format']} v{header['version']}")
        click.echo(f"   Encoder: {header['encoder']}")
        for key, value in memory_store.stats().items():
            click.echo(f"   {key}: {value:,}")

        if out:
            memory_store.snapshot(out)
            click.echo(f"💾 Copy written to {out}")

        if verify:
            with tempfile.TemporaryDirectory() as directory:
                target = Path(out) if out else Path(directory) / f"verify{SNAPSHOT_SUFFIX}"
                if not out:
                    memory_store.snapshot(target)
                reloaded = MemoryStore.load(target)
            problems = reloaded.check_links()
            if reloaded != memory_store or problems:
                click.echo(f"❌ Round trip mismatch {problems or ''}", err=True)
                sys.exit(1)
            click.echo("✅ Round trip verified")

    except click.ClickException:
        raise
    except Exception as e:
        _abort("Snapshot", e)


if __name__ == '__main__':
    main()
