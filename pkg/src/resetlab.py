#!/usr/bin/env python3
"""
resetlab command line.

    resetlab parse FILE...                     validate circuits, print their census
    resetlab simulate FILE [--map MAP]         noisy shots -> counts table, split per part
                      [--reference FILE...]  per-part TVD against direct runs
    resetlab splice FILE... [--copies N]       composite circuit + map sidecar
    resetlab bill [FILE] --model NAME          price one task from the catalog
    resetlab report RECEIPTS.csv               cost and savings table
    resetlab detect FILE [--billed AMOUNT]     abuse findings
    resetlab mix NAME | --size N               list or splice a benchmark mix

Exit codes: 0 ok, 2 malformed circuit/receipt/catalog input, 3 bad configuration.
"""
import argparse
import csv
import io
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

import benchlib
import billing
import circuit_text
import guardrails
from circuit_core import Circuit, census
from config import config
from errors import CatalogError, ParseError, ReceiptError, ResetLabError
from sim_engine import NoiseModel, run_shots, write_counts
from dist_metrics import tvd_per_part, tvd_summary
from splice import SpliceSpec, read_map, splice, splice_copies, split_counts, write_map

logger = logging.getLogger("resetlab")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3

TVD_WARNING = 0.02

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class RunConfig(BaseModel):
    """Validated flags of one invocation."""

    model_config = ConfigDict(frozen=True)

    subcommand: str
    inputs: Tuple[Path, ...] = ()
    shots: int = Field(default=config.default_shots, ge=1)
    seed: int = Field(default=config.default_seed, ge=0, lt=2 ** 64)
    resets: int = Field(default=config.default_resets, ge=0)
    noise: NoiseModel = Field(default_factory=NoiseModel)
    catalog: Path = Path(config.catalog_path)
    out: Optional[Path] = Path(config.out_dir) if config.out_dir else None
    model: Optional[str] = None
    wall_time: int = Field(default=0, ge=0)
    parts: int = Field(default=1, ge=1)
    prefixes: Optional[Tuple[str, ...]] = None
    label: Optional[str] = None
    copies: int = Field(default=1, ge=1)
    billed: Optional[str] = None
    threshold: float = Field(default=config.audit_threshold, ge=0)
    baseline_per_shot: str = config.baseline_cost_per_shot
    mix: Optional[str] = None
    size: Optional[int] = None
    list_only: bool = False
    map_path: Optional[Path] = None
    references: Tuple[Path, ...] = ()

    @field_validator("inputs", "references")
    @classmethod
    def _readable(cls, paths: Tuple[Path, ...]) -> Tuple[Path, ...]:
        for path in paths:
            if not path.is_file():
                raise ValueError(f"cannot read {path}")
        return paths


def parse_noise(spec: Optional[str], noiseless: bool) -> NoiseModel:
    """`eps_read=F,eps_condx=F` (also eps_read_1to0 / eps_read_0to1) on top of the configured defaults."""
    if noiseless:
        if spec:
            raise ValueError("--noiseless and --noise are mutually exclusive")
        return NoiseModel.noiseless()
    if not spec:
        return NoiseModel()
    fields: Dict[str, float] = {}
    for item in spec.split(","):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise ValueError(f"--noise expects KEY=VALUE pairs, got {item!r}")
        if key == "eps_read":
            fields["eps_read_1to0"] = fields["eps_read_0to1"] = float(value)
        elif key in ("eps_read_1to0", "eps_read_0to1", "eps_condx"):
            fields[key] = float(value)
        else:
            raise ValueError(f"unknown noise parameter '{key}'")
    return NoiseModel(**fields)


def _emit(text: str, run: RunConfig, filename: str) -> None:
    """Data goes to stdout, or into the output directory when --out is given."""
    if run.out is None:
        sys.stdout.write(text)
        return
    run.out.mkdir(parents=True, exist_ok=True)
    path = run.out / filename
    path.write_text(text, encoding="utf-8", newline="\n")
    print(f"✅ Wrote {path}", file=sys.stderr)


def _csv(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return out.getvalue()


def _load_model(run: RunConfig, default: str) -> Tuple[str, billing.PricingModel]:
    catalog = billing.load_catalog(run.catalog)
    name = run.model or default
    if name not in catalog:
        raise ValueError(f"model '{name}' not in {run.catalog} (have: {', '.join(catalog)})")
    return name, catalog[name]


def cmd_parse(run: RunConfig) -> int:
    rows = []
    for path in run.inputs:
        circuit = circuit_text.load(path)
        c = census(circuit)
        rows.append([circuit.label, circuit.width, len(circuit.ops), c.n_1q, c.n_2q, c.n_meas, c.n_reset, c.depth])
        if run.out is not None:
            run.out.mkdir(parents=True, exist_ok=True)
            circuit_text.dump(circuit, run.out / f"{path.stem}.qct")
    sys.stdout.write(_csv(["label", "width", "ops", "n_1q", "n_2q", "n_meas", "n_reset", "depth"], rows))
    return EXIT_OK


def _write_counts(counts, run: RunConfig, filename: str) -> None:
    if run.out is None:
        sys.stdout.write(counts.to_text())
        return
    run.out.mkdir(parents=True, exist_ok=True)
    path = write_counts(counts, run.out / filename)
    print(f"✅ Wrote {path}", file=sys.stderr)


def cmd_simulate(run: RunConfig) -> int:
    if len(run.inputs) != 1:
        raise ValueError("simulate takes exactly one circuit")
    if run.references and run.map_path is None:
        raise ValueError("--reference needs --map to split the composite record")
    circuit = circuit_text.load(run.inputs[0])
    counts = run_shots(circuit, run.noise, run.shots, run.seed)
    if run.map_path is None:
        _write_counts(counts, run, f"{circuit.label}.counts")
        return EXIT_OK

    splice_map = read_map(run.map_path)
    parts = split_counts(counts, splice_map)
    if not run.references:
        for span, table in zip(splice_map.parts, parts):
            if run.out is None:
                sys.stdout.write(f"## part={span.index} label={span.label or '-'}\n")
            _write_counts(table, run, f"{circuit.label}.part{span.index}.counts")
        return EXIT_OK

    if run.out is not None:
        for span, table in zip(splice_map.parts, parts):
            _write_counts(table, run, f"{circuit.label}.part{span.index}.counts")
    baselines = [run_shots(circuit_text.load(path), run.noise, run.shots, run.seed) for path in run.references]
    distances = tvd_per_part(parts, baselines[0] if len(baselines) == 1 else baselines)
    mean, worst = tvd_summary(distances)
    rows = [[span.index, span.label, f"{d:.6f}"] for span, d in zip(splice_map.parts, distances)]
    rows += [["mean", "", f"{mean:.6f}"], ["max", "", f"{worst:.6f}"]]
    sys.stdout.write(_csv(["part", "label", "tvd"], rows))
    print(f"{'✅' if worst <= TVD_WARNING else '⚠️'} {len(parts)} part(s), max TVD {worst:.4f} "
          f"against direct runs", file=sys.stderr)
    return EXIT_OK


def _write_composite(composite: Circuit, splice_map, run: RunConfig) -> None:
    out = run.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    qct = circuit_text.dump(composite, out / f"{composite.label}.qct")
    sidecar = write_map(splice_map, out / f"{composite.label}.map")
    print(f"✅ Wrote {qct} and {sidecar}", file=sys.stderr)
    sys.stdout.write(_csv(
        ["label", "parts", "width", "n_reset", "effective_shots"],
        [[composite.label, len(splice_map.parts), composite.width, census(composite).n_reset,
          splice_map.effective_shots(run.shots)]]))


def cmd_splice(run: RunConfig) -> int:
    if not run.inputs:
        raise ValueError("splice needs at least one circuit")
    parts = [circuit_text.load(path) for path in run.inputs]
    labels = [p.label for p in parts]
    duplicates = sorted({label for label in labels if labels.count(label) > 1})
    if duplicates:
        raise ValueError(f"duplicate part label(s): {', '.join(duplicates)} (use --copies to repeat one part)")
    if run.copies > 1:
        if len(parts) != 1:
            raise ValueError("--copies takes exactly one circuit")
        composite, splice_map = splice_copies(parts[0], run.copies, run.resets)
        if run.label:
            composite = composite.with_label(run.label)
    else:
        composite, splice_map = splice(SpliceSpec(tuple(parts), run.resets, run.prefixes, run.label or ""))
    _write_composite(composite, splice_map, run)
    return EXIT_OK


def cmd_bill(run: RunConfig) -> int:
    name, model = _load_model(run, billing.TARGET_MACHINE)
    if run.inputs:
        receipt = billing.receipt_for(circuit_text.load(run.inputs[0]), run.shots, run.wall_time, run.parts)
    else:
        receipt = billing.TaskReceipt(run.shots, run.wall_time, parts=run.parts)
    cost = billing.price(model, receipt)
    sys.stdout.write(_csv(
        ["model", "kind", "currency", "shots", "parts", "wall_time_s", "cost"],
        [[name, model.kind, model.currency, run.shots, run.parts, run.wall_time, cost.format(6)]]))
    return EXIT_OK


def cmd_report(run: RunConfig) -> int:
    if len(run.inputs) != 1:
        raise ValueError("report takes exactly one receipts CSV")
    _, model = _load_model(run, billing.TARGET_MACHINE)
    rows = billing.read_receipts(run.inputs[0].read_text(encoding="utf-8"))
    baseline = billing.Money.parse(run.baseline_per_shot, model.currency)
    _emit(billing.format_report(rows, model, baseline), run, f"{run.inputs[0].stem}_report.csv")
    return EXIT_OK


def cmd_detect(run: RunConfig) -> int:
    if len(run.inputs) != 1:
        raise ValueError("detect takes exactly one circuit")
    circuit = circuit_text.load(run.inputs[0])
    billed = fair = None
    if run.billed is not None:
        _, fair = _load_model(run, billing.TARGET_PER_GATE)
        billed = billing.Money.parse(run.billed, fair.currency)
    findings = guardrails.scan(circuit, billed, fair, run.threshold)
    sys.stdout.write(guardrails.format_findings(findings))
    print(f"{'⚠️' if findings else '✅'} {len(findings)} finding(s) in '{circuit.label}'", file=sys.stderr)
    return EXIT_OK


def cmd_mix(run: RunConfig) -> int:
    if (run.mix is None) == (run.size is None):
        raise ValueError("mix takes either a mix name or --size")
    if run.mix is not None:
        kinds = list(benchlib.load_mix(run.mix))
        label = run.label or benchlib.mix_label(run.mix)
    else:
        spec = benchlib.preset_mix(run.size)
        if "seed" in run.model_fields_set:
            spec = benchlib.MixSpec(spec.pool, spec.count, run.seed)
        kinds = benchlib.generate_mix(spec)
        label = run.label or f"mix_{run.size}_seed{spec.seed}"
    if run.list_only:
        sys.stdout.write(_csv(["index", "kind", "title"], [[i, k.name, k.title] for i, k in enumerate(kinds)]))
        return EXIT_OK
    composite, splice_map = benchlib.build_mix(kinds, run.resets, label=label)
    _write_composite(composite, splice_map, run)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "parse": cmd_parse,
    "simulate": cmd_simulate,
    "splice": cmd_splice,
    "bill": cmd_bill,
    "report": cmd_report,
    "detect": cmd_detect,
    "mix": cmd_mix,
}


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 3)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"❌ {self.prog}: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--shots", type=int, help=f"shots per task (default {config.default_shots})")
    common.add_argument("--seed", type=int, help=f"RNG seed (default {config.default_seed})")
    common.add_argument("--resets", type=int, help=f"resets between spliced parts (default {config.default_resets})")
    common.add_argument("--noiseless", action="store_true", help="disable readout and conditional-X errors")
    common.add_argument("--noise", help="noise overrides, e.g. eps_read=0.03,eps_condx=0.002")
    common.add_argument("--catalog", type=Path, help=f"pricing catalog (default {config.catalog_path})")
    common.add_argument("--out", type=Path, help="output directory (default: stdout)")
    common.add_argument("--model", help="pricing model name from the catalog")
    common.add_argument("--wall-time", type=int, help="task wall time in whole seconds")
    common.add_argument("--parts", type=int, help="spliced parts billed in one task")
    common.add_argument("--prefixes", help="comma-separated register prefixes, one per part")
    common.add_argument("--label", help="label of the composite circuit")
    common.add_argument("--log-level", default=None, help=f"logging level (default {config.log_level})")

    parser = _ArgumentParser(prog="resetlab", description="Reset-splice billing laboratory")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("parse", parents=[common], help="validate circuits and print their census")
    p.add_argument("inputs", nargs="+", type=Path)
    p = sub.add_parser("simulate", parents=[common], help="run noisy shots")
    p.add_argument("inputs", nargs=1, type=Path)
    p.add_argument("--map", dest="map_path", type=Path, help="splice map; split the record into one table per part")
    p.add_argument("--reference", dest="references", type=Path, action="append",
                   help="circuit run directly as the baseline for every part (repeat for one per part)")
    p = sub.add_parser("splice", parents=[common], help="splice circuits with all-qubit resets")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--copies", type=int, help="repeat a single circuit N times")
    p = sub.add_parser("bill", parents=[common], help="price one task")
    p.add_argument("inputs", nargs="?", type=Path)
    p = sub.add_parser("report", parents=[common], help="cost and savings table from receipts")
    p.add_argument("inputs", nargs=1, type=Path)
    p.add_argument("--baseline-per-shot", help=f"baseline cost per shot (default {config.baseline_cost_per_shot})")
    p = sub.add_parser("detect", parents=[common], help="screen a circuit for splice abuse")
    p.add_argument("inputs", nargs=1, type=Path)
    p.add_argument("--billed", help="amount billed for the task, in the fair model's currency")
    p.add_argument("--threshold", type=float, help=f"audit threshold (default {config.audit_threshold})")
    p = sub.add_parser("mix", parents=[common], help="list or splice a benchmark mix")
    p.add_argument("mix", nargs="?", help="mix name from the fixtures, e.g. 'Mix 8'")
    p.add_argument("--size", type=int, help="generate a seeded mix of this preset size instead")
    p.add_argument("--list", dest="list_only", action="store_true", help="only list the kinds")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if v is not None}
    values.pop("log_level", None)
    values.pop("noiseless", None)
    values.pop("noise", None)
    inputs = values.pop("inputs", None)
    if isinstance(inputs, Path):
        inputs = [inputs]
    prefixes = values.pop("prefixes", None)
    return RunConfig(
        subcommand=values.pop("command"),
        inputs=tuple(inputs or ()),
        noise=parse_noise(args.noise, args.noiseless),
        prefixes=tuple(p.strip() for p in prefixes.split(",")) if prefixes else None,
        wall_time=values.pop("wall_time", 0),
        **values,
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)

    level = (args.log_level or ("DEBUG" if config.debug else config.log_level)).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, level, logging.INFO))

    try:
        run = _run_config(args)
        return COMMANDS[run.subcommand](run)
    except (ParseError, ReceiptError, CatalogError, UnicodeDecodeError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ValidationError, ValueError, OSError, MemoryError, ResetLabError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
