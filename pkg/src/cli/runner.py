"""Command implementations behind main.py, with coloured console reports."""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
from colorama import Fore, Style

from src.cli.run_config import ABLATIONS, RunConfig
from src.exporter.json_exporter import JsonExporter, write_json
from src.metrics.evaluate import EvalReport, evaluate
from src.model.mmtg import MMTGModel
from src.parser.dataset_parser import load_dataset
from src.schema.models import EPassage
from src.synth.generator import generate_corpus
from src.training.gradcheck_suite import GROUPS, GradcheckReport, run_gradcheck, self_test
from src.training.trainer import TrainResult, train
from src.utils.seeding import derive_seed
from src.validator.data_validator import DataValidator

logger = logging.getLogger(__name__)

EVAL_COLUMNS = (("B.-2", "bleu2"), ("Dist.-2", "distinct2"), ("NNR-1", "nnr1"), ("NNR-2", "nnr2"))


class ExperimentRunner:
    """Runs one command for one run configuration."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.exporter = JsonExporter()

    def print_header(self, title: str):
        """Print a section header."""
        click.echo(f"\n{Fore.CYAN}{'━' * 45}")
        click.echo(f"{Fore.CYAN}{title}")
        click.echo(f"{Fore.CYAN}{'━' * 45}{Style.RESET_ALL}\n")

    def print_table(self, headers: Sequence[str], rows: Sequence[Sequence[Any]]):
        """Plain aligned table; floats with four decimals."""
        cells = [[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row] for row in rows]
        widths = [
            max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
            for i, h in enumerate(headers)
        ]
        click.echo(f"{Fore.CYAN}" + "  ".join(h.ljust(w) for h, w in zip(headers, widths)))
        click.echo(f"{Fore.CYAN}" + "  ".join("-" * w for w in widths))
        for row in cells:
            click.echo("  ".join(c.ljust(w) for c, w in zip(row, widths)))

    # ------------------------------------------------------------------ #
    # gen-data
    # ------------------------------------------------------------------ #

    def gen_data(self, out_dir: Path) -> Dict[str, Any]:
        self.print_header("Generate Synthetic Corpus")
        corpus = generate_corpus(self.config.to_synth_config())
        out_dir = Path(out_dir)
        self.exporter.save_dataset(out_dir / "train.jsonl", corpus.curriculum())
        self.exporter.save_dataset(out_dir / "test.jsonl", corpus.test)
        stats = corpus.stats()
        write_json(out_dir / "stats.json", stats)

        click.echo(f"{Fore.GREEN}✅ Corpus written to {out_dir}")
        self.print_table(["statistic", "value"], [[k, v] for k, v in stats.items()])
        return stats

    # ------------------------------------------------------------------ #
    # train
    # ------------------------------------------------------------------ #

    def train(
        self,
        data_path: Path,
        checkpoint_path: Path,
        trace_path: Optional[Path] = None,
        config: Optional[RunConfig] = None,
    ) -> TrainResult:
        config = config or self.config
        self.print_header("Train")
        dataset = load_dataset(data_path)
        model = MMTGModel.initialize(config.to_model_config())
        active = model.flags.active()
        n_params = sum(p.size for p in model.parameters())
        click.echo(f"{Fore.CYAN}Records: {len(dataset)}  Parameters: {n_params}")
        click.echo(
            f"{Fore.CYAN}Flags: {active or 'full model'}  no_cl={config.no_cl}  no_neg={config.no_neg}"
        )

        result = train(
            dataset,
            model,
            config.to_train_config(),
            trace_path=trace_path,
            checkpoint_path=checkpoint_path,
        )

        click.echo(f"{Fore.GREEN}✅ Trained {result.steps} steps")
        if result.trace:
            last = result.trace[-1]
            click.echo(
                f"{Fore.GREEN}   Final loss: {last.loss:.4f}  perplexity: {last.perplexity:.3f}"
            )
        click.echo(f"{Fore.GREEN}   Phases: {' → '.join(result.phases)}")
        click.echo(f"{Fore.GREEN}   Checkpoint: {checkpoint_path}")
        return result

    # ------------------------------------------------------------------ #
    # generate
    # ------------------------------------------------------------------ #

    def generate(
        self, checkpoint_path: Path, input_path: Path, out_path: Path
    ) -> List[Dict[str, Any]]:
        self.print_header("Generate")
        model = MMTGModel.load(checkpoint_path)
        gen_cfg = self.config.to_generation_config()
        gen_cfg.validate()
        inputs: List[EPassage] = load_dataset(input_path, require_targets=False)
        validator = DataValidator(model.config, max_len=gen_cfg.max_len)
        validator.ensure_valid(inputs, require_targets=False)

        generations = []
        for record in inputs:
            for index in range(gen_cfg.samples_per_input):
                seed = derive_seed(gen_cfg.seed, "generate", record.sample_id, index)
                passage = model.generate(record.input, gen_cfg, seed=seed)
                generations.append(
                    {"sample_id": record.sample_id, "index": index, "passage": passage}
                )
            logger.info(f"Generated {gen_cfg.samples_per_input} passages for {record.sample_id}")

        self.exporter.save_passages(out_path, generations)
        click.echo(
            f"{Fore.GREEN}✅ {len(generations)} passages for {len(inputs)} inputs → {out_path}"
        )
        return generations

    # ------------------------------------------------------------------ #
    # evaluate
    # ------------------------------------------------------------------ #

    def evaluate(self, checkpoint_path: Path, test_path: Path, report_path: Path) -> EvalReport:
        self.print_header("Evaluate")
        model = MMTGModel.load(checkpoint_path)
        report = self._evaluate_model(model, load_dataset(test_path))
        self.exporter.save_report(report_path, report.to_dict())
        self.print_eval_table([("MMTG", report)])
        click.echo(f"\n{Fore.GREEN}Report: {report_path}")
        return report

    def _evaluate_model(self, model: MMTGModel, testset: Sequence[EPassage]) -> EvalReport:
        gen_cfg = self.config.to_generation_config()
        DataValidator(model.config, max_len=gen_cfg.max_len).ensure_valid(testset)
        return evaluate(
            model,
            testset,
            gen_cfg,
            derangement=self.config.derangement,
            paired_seeds=self.config.paired_seeds,
        )

    def print_eval_table(self, rows: Sequence[tuple]):
        self.print_table(
            ["Model"] + [label for label, _ in EVAL_COLUMNS],
            [[name] + [getattr(report, field) for _, field in EVAL_COLUMNS] for name, report in rows],
        )

    # ------------------------------------------------------------------ #
    # gradcheck
    # ------------------------------------------------------------------ #

    def gradcheck(self, tol: float, eps: float, seeds: int, run_self_test: bool = False) -> bool:
        self.print_header("Gradient Check")
        if run_self_test:
            error = self_test(eps=eps, tolerance=tol)
            detected = error > tol
            color = Fore.GREEN if detected else Fore.RED
            click.echo(f"{color}Wrong-gradient stub: relative error {error:.2e} (tol {tol:.0e})")
            verdict = "✅ Checker detects the bug" if detected else "❌ Checker missed the bug"
            click.echo(f"{color}{verdict}")
            return detected

        report: GradcheckReport = run_gradcheck(seeds=seeds, eps=eps, tolerance=tol)
        rows = []
        for group in GROUPS:
            err = report.errors.get(group, 0.0)
            rows.append([group, f"{err:.2e}", "PASS" if err < tol else "FAIL"])
        self.print_table(["group", "max rel err", "result"], rows)
        if report.passed:
            click.echo(
                f"\n{Fore.GREEN}✅ All {len(GROUPS)} groups pass at tol {tol:.0e} over {seeds} seeds"
            )
        else:
            click.echo(f"\n{Fore.RED}❌ Failed groups: {', '.join(report.failures())}")
        return report.passed

    # ------------------------------------------------------------------ #
    # ablate
    # ------------------------------------------------------------------ #

    def ablate(
        self,
        data_path: Path,
        test_path: Path,
        out_dir: Path,
        variants: Optional[Sequence[str]] = None,
    ) -> Dict[str, EvalReport]:
        """Train and evaluate each variant from the same data and seed."""
        variants = list(variants or ABLATIONS)
        out_dir = Path(out_dir)
        testset = load_dataset(test_path)
        reports: Dict[str, EvalReport] = {}
        for name in variants:
            config = self.config.variant(name)
            checkpoint = out_dir / f"{name}.ckpt"
            self.train(data_path, checkpoint, trace_path=out_dir / f"{name}.trace.jsonl", config=config)
            reports[name] = self._evaluate_model(MMTGModel.load(checkpoint), testset)

        write_json(out_dir / "ablation.json", {name: r.to_dict() for name, r in reports.items()})
        self.print_header("Ablation Results")
        self.print_eval_table(list(reports.items()))
        return reports
