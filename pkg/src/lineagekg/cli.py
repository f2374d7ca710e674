"""Pipeline orchestrator: scenarios -> graphs -> lineage -> paths -> model -> report.

Every stage writes its artifacts plus a checksum sidecar and is skipped on
re-runs while its recorded inputs and outputs are unchanged; once any stage
actually runs, every downstream stage runs too.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import convert, metrics, paths, scenario, siamese
from .kgstore import KnowledgeGraph, parse_ntriples, serialize_ntriples
from .ontology import export_profile, vocabulary
from .reldb import northwind_fixture

STAGES = ("gen-scenarios", "build-kg", "resolve-lineage", "sample-paths",
          "train", "evaluate", "report")

PRESETS = {
    "desk": dict(rows_per_table=10, scenarios_per_task=7, train_scenarios=5,
                 eval_negatives=200, walk_budget=24),
    "paper": dict(rows_per_table=50, scenarios_per_task=20, train_scenarios=17,
                  eval_negatives=4000, walk_budget=64),
}


class ManifestError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunManifest:
    out_dir: str
    seed: int = 0
    profile: str = "both"  # baseline | rddl | both
    tasks: list[str] = field(default_factory=lambda: ["all"])
    rows_per_table: int = 10
    scenarios_per_task: int = 7
    train_scenarios: int = 5
    eval_negatives: int = 200
    num_paths: int = 3
    max_length: int = 6
    walk_budget: int = 24
    restart_prob: float = 0.2
    k_negatives: int = 1
    embed_dim: int = 32
    hidden_dim: int = 32
    layers: int = 2
    fusion_dim: int = 64
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 3
    deterministic: bool = True

    def validate(self) -> None:
        if self.profile not in ("baseline", "rddl", "both"):
            raise ManifestError(f"unknown profile: {self.profile!r}")
        for task in self.expanded_tasks():
            if task not in scenario.TASK_NAMES:
                raise ManifestError(f"unknown task: {task!r}")
        if not 0 < self.train_scenarios < self.scenarios_per_task:
            raise ManifestError(
                f"train_scenarios must split {self.scenarios_per_task} scenarios"
            )
        if self.rows_per_table < 2:
            raise ManifestError("rows_per_table must be >= 2")

    def expanded_tasks(self) -> list[str]:
        if self.tasks == ["all"]:
            return list(scenario.TASK_NAMES)
        return list(self.tasks)

    def profiles(self) -> list[str]:
        return ["baseline", "rddl"] if self.profile == "both" else [self.profile]

    def sampler_config(self) -> paths.SamplerConfig:
        return paths.SamplerConfig(
            num_paths=self.num_paths, max_length=self.max_length,
            walk_budget=self.walk_budget, restart_prob=self.restart_prob,
            seed=self.seed,
        )

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(asdict(self), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**data)


def canonical_relations(profile_name: str) -> list[str]:
    """The shared relation registry order for all graphs of a profile."""
    profile = vocabulary(profile_name)
    return ["rdf:type"] + sorted(profile.property_names())


def _parse_graph(path, profile_name: str) -> KnowledgeGraph:
    g = parse_ntriples(
        Path(path).read_text(encoding="utf-8"),
        relations=tuple(canonical_relations(profile_name)),
    )
    if g.num_nodes:
        g.namespace = g.node_iri(0).split(":", 1)[0]
    g.meta["namespace"] = g.namespace
    g.meta["profile"] = profile_name
    return g


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Pipeline:
    def __init__(self, manifest: RunManifest, echo=print):
        self.m = manifest
        self.out = Path(manifest.out_dir)
        self.force = False
        self.echo = echo
        self.ran: list[str] = []
        self.skipped: list[str] = []

    # -- stage bookkeeping ----------------------------------------------------

    def _ok_path(self, stage: str, task: str = "", profile: str = "") -> Path:
        parts = [p for p in (task, profile) if p]
        root = self.out.joinpath(*parts) if parts else self.out
        return root / f".stage_{stage}.ok"

    def _config_digest(self, stage: str, task: str, profile: str) -> str:
        payload = json.dumps(
            {"stage": stage, "task": task, "profile": profile,
             "manifest": asdict(self.m)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _should_skip(self, stage: str, task: str, profile: str,
                     outputs: list[Path]) -> bool:
        if self.force:
            return False
        ok_path = self._ok_path(stage, task, profile)
        if not ok_path.is_file():
            return False
        try:
            record = json.loads(ok_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return False
        if record.get("config") != self._config_digest(stage, task, profile):
            return False
        recorded = record.get("outputs", {})
        for output in outputs:
            if not output.is_file():
                return False
            if recorded.get(str(output.relative_to(self.out))) != _sha256(output):
                return False
        return True

    def _mark_done(self, stage: str, task: str, profile: str,
                   outputs: list[Path]) -> None:
        record = {
            "config": self._config_digest(stage, task, profile),
            "outputs": {
                str(p.relative_to(self.out)): _sha256(p) for p in outputs
            },
        }
        ok_path = self._ok_path(stage, task, profile)
        ok_path.parent.mkdir(parents=True, exist_ok=True)
        ok_path.write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")

    def _run_stage(self, stage: str, task: str, profile: str,
                   outputs: list[Path], fn) -> None:
        label = "/".join(p for p in (stage, task, profile) if p)
        if self._should_skip(stage, task, profile, outputs):
            self.skipped.append(label)
            self.echo(f"[skip] {label}")
            return
        self.force = True
        self.echo(f"[run ] {label}")
        try:
            fn()
        except Exception as exc:
            raise StageError(label, exc) from exc
        self._mark_done(stage, task, profile, outputs)
        self.ran.append(label)

    # -- stages -----------------------------------------------------------------

    def scenarios_dir(self, task: str) -> Path:
        return self.out / task / "scenarios"

    def kg_dir(self, task: str, profile: str) -> Path:
        return self.out / task / profile / "kg"

    def samples_dir(self, task: str, profile: str) -> Path:
        return self.out / task / profile / "samples"

    def model_dir(self, task: str, profile: str) -> Path:
        return self.out / task / profile / "model"

    def eval_dir(self, task: str, profile: str) -> Path:
        return self.out / task / profile / "eval"

    def _database(self):
        return northwind_fixture(self.m.rows_per_table, self.m.seed)

    def stage_scenarios(self, task: str) -> None:
        target = self.scenarios_dir(task)
        outputs = [target / "manifest.tsv"]

        def build():
            db = self._database()
            kind = scenario.task_by_name(task)
            suite = scenario.ScenarioSuite(seed=self.m.seed, db=db)
            suite.scenarios[task] = [
                scenario.generate_scenario(db, kind, self.m.seed, idx)
                for idx in range(self.m.scenarios_per_task)
            ]
            scenario.save_suite(suite, target)

        self._run_stage("gen-scenarios", task, "", outputs, build)

    def _load_suite(self, task: str) -> scenario.ScenarioSuite:
        return scenario.load_suite(self.scenarios_dir(task),
                                   db=self._database(), seed=self.m.seed)

    def stage_build_kg(self, task: str, profile: str) -> None:
        kg = self.kg_dir(task, profile)
        outputs = [kg / "train_base.nt", kg / "test.nt", kg / "ground_truth.csv",
                   kg / "counts_train.txt", kg / "counts_test.txt", kg / "schema.nt"]

        def build():
            kg.mkdir(parents=True, exist_ok=True)
            suite = self._load_suite(task)
            scenarios = suite.scenarios_for(task)
            n_train = self.m.train_scenarios
            cfg = convert.ConvertConfig(profile=profile, use_data=True)
            base_ns = profile

            def populate(group, suffix):
                db, _ = scenario.execute_scenarios(suite.db, group)
                g = KnowledgeGraph()
                report = convert.populate_kg(
                    g, db,
                    replace(cfg, namespace=f"{base_ns}.{suffix}"),
                    executions=convert._executions_for(group),
                )
                return g, report

            train_g, train_report = populate(scenarios[:n_train], "train")
            test_g, test_report = populate(scenarios[n_train:], "test")
            test_tuples = [t for s in scenarios[n_train:] for t in s.all_tuples()]
            evidence = tuple(f for f in convert.LINEAGE_FAMILIES
                             if f != "rowDerivedFrom")
            resolution = convert.resolve_lineage_detailed(
                test_g, test_tuples, materialize=evidence)
            (kg / "train_base.nt").write_text(
                serialize_ntriples(train_g), encoding="utf-8")
            (kg / "test.nt").write_text(serialize_ntriples(test_g), encoding="utf-8")
            split = convert.SplitResult(
                train=train_g, test=test_g,
                ground_truth=list(resolution.row_pairs),
                train_report=train_report, test_report=test_report)
            convert.write_ground_truth(kg / "ground_truth.csv", split)
            convert.write_report(kg / "counts_train.txt", train_report)
            convert.write_report(kg / "counts_test.txt",
                                 convert.population_report(test_g))
            (kg / "schema.nt").write_text(
                export_profile(vocabulary(profile)), encoding="utf-8")

        self._run_stage("build-kg", task, profile, outputs, build)

    def stage_resolve(self, task: str, profile: str) -> None:
        kg = self.kg_dir(task, profile)
        outputs = [kg / "train.nt", kg / "resolve_counts.txt"]

        def build():
            suite = self._load_suite(task)
            scenarios = suite.scenarios_for(task)[:self.m.train_scenarios]
            tuples = [t for s in scenarios for t in s.all_tuples()]
            g = _parse_graph(kg / "train_base.nt", profile)
            result = convert.resolve_lineage_detailed(g, tuples)
            (kg / "train.nt").write_text(serialize_ntriples(g), encoding="utf-8")
            convert.write_report(kg / "resolve_counts.txt", result.added)

        self._run_stage("resolve-lineage", task, profile, outputs, build)

    def stage_sample(self, task: str, profile: str) -> None:
        kg = self.kg_dir(task, profile)
        out = self.samples_dir(task, profile)
        outputs = [out / "train.txt", out / "eval_pos.txt", out / "eval_neg.txt",
                   out / "vocab.txt"]

        def build():
            out.mkdir(parents=True, exist_ok=True)
            cfg = self.m.sampler_config()
            train_g = _parse_graph(kg / "train.nt", profile).freeze()
            test_g = _parse_graph(kg / "test.nt", profile).freeze()
            vocab = paths.EdgeVocabulary(train_g.relation_names())
            if vocab.relation_names != test_g.relation_names():
                raise ManifestError("train/test relation registries differ")
            train_samples = list(paths.build_training_set(
                train_g, cfg, k_negatives=self.m.k_negatives))
            paths.save_samples(out / "train.txt", train_samples)
            ground_truth = convert.read_ground_truth(kg / "ground_truth.csv", test_g)
            pos, neg = paths.build_eval_set(
                test_g, ground_truth, cfg, num_negatives=self.m.eval_negatives)
            paths.save_samples(out / "eval_pos.txt", pos)
            paths.save_samples(out / "eval_neg.txt", neg)
            vocab.save(out / "vocab.txt")

        self._run_stage("sample-paths", task, profile, outputs, build)

    def _model_config(self, vocab: paths.EdgeVocabulary) -> siamese.ModelConfig:
        return siamese.ModelConfig(
            vocab_size=vocab.size,
            num_relations=len(vocab.relation_names),
            embed_dim=self.m.embed_dim,
            hidden_dim=self.m.hidden_dim,
            layers=self.m.layers,
            fusion_dim=self.m.fusion_dim,
            learning_rate=self.m.learning_rate,
            batch_size=self.m.batch_size,
            epochs=self.m.epochs,
            seed=self.m.seed,
        )

    def stage_train(self, task: str, profile: str) -> None:
        out = self.model_dir(task, profile)
        samples_dir = self.samples_dir(task, profile)
        outputs = [out / "checkpoint.bin", out / "losses.txt"]

        def build():
            out.mkdir(parents=True, exist_ok=True)
            vocab = paths.EdgeVocabulary.load(samples_dir / "vocab.txt")
            samples = paths.load_samples(
                samples_dir / "train.txt", self.m.num_paths, self.m.max_length)
            cfg = self._model_config(vocab)
            params = siamese.init_parameters(cfg)
            result = siamese.train(params, samples, cfg)
            siamese.save_checkpoint(params, out / "checkpoint.bin")
            lines = [f"epoch {i} mean_loss {loss!r}"
                     for i, loss in enumerate(result.epoch_losses)]
            (out / "losses.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

        self._run_stage("train", task, profile, outputs, build)

    def stage_evaluate(self, task: str, profile: str) -> None:
        out = self.eval_dir(task, profile)
        samples_dir = self.samples_dir(task, profile)
        outputs = [out / "scores.tsv", out / "result.tsv"]

        def build():
            out.mkdir(parents=True, exist_ok=True)
            params = siamese.load_checkpoint(
                self.model_dir(task, profile) / "checkpoint.bin")
            pos = paths.load_samples(
                samples_dir / "eval_pos.txt", self.m.num_paths, self.m.max_length)
            neg = paths.load_samples(
                samples_dir / "eval_neg.txt", self.m.num_paths, self.m.max_length)
            pos_scores = siamese.predict(params, pos)
            neg_scores = siamese.predict(params, neg)
            with (out / "scores.tsv").open("w", encoding="utf-8") as fh:
                fh.write("label\tscore\n")
                for score in pos_scores:
                    fh.write(f"1\t{score!r}\n")
                for score in neg_scores:
                    fh.write(f"0\t{score!r}\n")
            scored = [(s, 1) for s in pos_scores] + [(s, 0) for s in neg_scores]
            precision, recall = metrics.precision_recall(scored)
            result = metrics.TaskResult(
                task=task, profile=profile, precision=precision, recall=recall,
                pr_auc=metrics.pr_auc(scored),
                hits_at_10=metrics.hits_at_k(pos_scores, neg_scores, 10),
                positives=len(pos_scores), negatives=len(neg_scores),
                seed=self.m.seed)
            metrics.write_results(out / "result.tsv", [result])

        self._run_stage("evaluate", task, profile, outputs, build)

    def stage_report(self) -> None:
        outputs = [self.out / "results.tsv", self.out / "report.txt"]

        def build():
            results = []
            for task in self.m.expanded_tasks():
                for profile in self.m.profiles():
                    results.extend(metrics.read_results(
                        self.eval_dir(task, profile) / "result.tsv"))
            metrics.write_results(self.out / "results.tsv", results)
            if set(self.m.profiles()) == {"baseline", "rddl"}:
                text = metrics.report(results)
            else:
                lines = ["task\tprofile\tprecision\trecall\tpr_auc\thits_at_10"]
                for r in results:
                    lines.append(
                        f"{r.task}\t{r.profile}\t{r.precision:.4f}\t{r.recall:.4f}"
                        f"\t{r.pr_auc:.4f}\t{r.hits_at_10:.4f}")
                text = "\n".join(lines) + "\n"
            (self.out / "report.txt").write_text(text, encoding="utf-8")

        self._run_stage("report", "", "", outputs, build)

    # -- full run ------------------------------------------------------------------

    def run(self, only_stage: Optional[str] = None) -> None:
        self.m.validate()
        self.out.mkdir(parents=True, exist_ok=True)
        self.m.save(self.out / "manifest.json")
        per_profile = {
            "build-kg": self.stage_build_kg,
            "resolve-lineage": self.stage_resolve,
            "sample-paths": self.stage_sample,
            "train": self.stage_train,
            "evaluate": self.stage_evaluate,
        }
        for task in self.m.expanded_tasks():
            if only_stage in (None, "gen-scenarios"):
                self.stage_scenarios(task)
            for profile in self.m.profiles():
                for stage, fn in per_profile.items():
                    if only_stage in (None, stage):
                        fn(task, profile)
        if only_stage in (None, "report"):
            self.stage_report()


def run_pipeline(manifest: RunManifest, echo=print,
                 only_stage: Optional[str] = None) -> tuple[int, Optional[Path]]:
    """Returns (exit status, results path)."""
    pipeline = Pipeline(manifest, echo=echo)
    try:
        pipeline.run(only_stage)
    except ManifestError as exc:
        echo(f"validation error: {exc}")
        return 1, None
    except StageError as exc:
        echo(str(exc))
        return 2, None
    return 0, pipeline.out / "results.tsv"


def _build_manifest(args) -> RunManifest:
    if args.manifest:
        manifest = RunManifest.load(args.manifest)
        if args.out:
            manifest.out_dir = args.out
    else:
        if not args.out:
            raise ManifestError("--out is required without --manifest")
        manifest = RunManifest(out_dir=args.out)
    if args.preset:
        for key, value in PRESETS[args.preset].items():
            setattr(manifest, key, value)
    if args.profile:
        manifest.profile = args.profile
    if args.task:
        manifest.tasks = ["all"] if args.task == "all" else [args.task]
    if args.seed is not None:
        manifest.seed = args.seed
    if args.deterministic:
        manifest.deterministic = True
    manifest.validate()
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lineagekg",
        description="Lineage link prediction pipeline over ontology-grounded graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("run",):
        cmd = sub.add_parser(name)
        cmd.add_argument("--manifest", default=None)
        cmd.add_argument("--preset", choices=sorted(PRESETS), default=None)
        cmd.add_argument("--profile", choices=["baseline", "rddl", "both"],
                         default=None)
        cmd.add_argument("--task", default=None)
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--out", default=None)
        cmd.add_argument("--deterministic", action="store_true")
    args = parser.parse_args(argv)
    try:
        manifest = _build_manifest(args)
    except (ManifestError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    only = None if args.command == "run" else args.command
    status, results = run_pipeline(manifest, only_stage=only)
    if status == 0 and results is not None and args.command in ("run", "report"):
        print(f"results: {results}")
    return status


if __name__ == "__main__":
    sys.exit(main())
