"""Experiment pipeline: assumptions, simulation, solve, truncation study, oracle and checks."""
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from src import __version__
from src.bsde.picard import picard_subinterval
from src.bsde.solution import BsdeSolution
from src.bsde.solver import solve_lsmc
from src.bsde.truncation import truncation_study
from src.cli.check_runners import RunContext, validate_check
from src.cli.config import ExperimentConfig
from src.fd_oracle import solve_fd
from src.levy import quadrature
from src.levy.measure import truncate
from src.model.assumptions import check_assumptions
from src.model.spec import as_points
from src.sde_sim import simulator
from src.storage import ArtifactStore, RunRegistry, content_key, run_registry
from src.utils import attach_run_log, detach_run_log, logger, settings
from src.utils.errors import JumpBsdeError
from src.verify import CheckReport, SolveSettings

EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1

# column documentation for the fixed tables; check tables list their columns only
COLUMN_DOCS: Dict[str, Dict[str, str]] = {
    "diagnostics.csv": {
        "step": "backward step index j (regression on X_{t_j})",
        "condition": "condition number of the regression design",
        "residual": "root-mean-square regression residual of y_{j+1}",
        "field_residual": "root-mean-square residual of the node value field at X_{t_j}",
        "implicit_passes": "fixed-point passes of the implicit y update",
    },
    "solution.csv": {
        "component": "index i of the BSDE component",
        "y0": "Monte Carlo mean of Y^i at the first node",
        "standard_error": "standard error of y0",
    },
    "truncation.csv": {
        "k": "truncation level (jumps with |e| >= 1/k)",
        "tail_mass": "integral of (1 ∧ |e|²) over |e| < 1/k",
        "e_X": "E sup_s |X^k_s - X^K_s|² including left limits",
        "e_Y": "E sup_s |Y^k_s - Y^K_s|²",
        "e_Z": "E ∫ |Z^k_s - Z^K_s|² ds",
        "e_U": "E ∫ |q^k_s - q^K_s|² ds",
        "bound": "fitted C times tail_mass",
        "y0_<i>": "y0 of component i at level k",
    },
}


def _document(name: str, columns: List[str]) -> Dict[str, str]:
    docs = COLUMN_DOCS.get(Path(name).name, {})
    return {c: docs.get("y0_<i>" if c.startswith("y0_") else c, "") for c in columns}


class ExperimentPipeline:
    """Runs one experiment config end to end and writes everything under its output directory."""

    def __init__(self, config: ExperimentConfig, store: Optional[ArtifactStore] = None,
                 registry: Optional[RunRegistry] = None):
        self.config = config
        self.store = store or ArtifactStore(root=config.output_dir)
        self.registry = registry or run_registry
        self.logger = logger

        self.spec = config.build_model()
        self.measure = self.spec.measure
        self.x = as_points(config.grid.x, self.spec.dims.k)
        self.st = SolveSettings(
            n_paths=config.grid.n_paths,
            n_steps=config.grid.n_steps,
            truncation_k=config.truncation.k,
            seed=config.seed,
            basis=config.solver.basis.build(),
            estimator=config.solver.estimator,
            oracle_L=config.oracle.L,
            oracle_nx=config.oracle.nx,
            oracle_nt=config.oracle.nt,
            abs_tol=config.abs_tol,
        )
        self.ctx = RunContext(spec=self.spec, measure=self.measure, st=self.st, t=config.grid.t, x=self.x,
                              x_ladder=config.grid.x_ladder, ks=config.truncation.ks)

        self.assumption_report = None
        self.stages: List[Dict[str, Any]] = []
        self.reports: List[CheckReport] = []
        self.tables: Dict[str, List[str]] = {}
        self.error: Optional[Dict[str, Any]] = None
        self.exit_code = EXIT_PASS

    @property
    def config_hash(self) -> str:
        return content_key(self.config.echo(), self.config.seed)

    def _save_table(self, frame: pd.DataFrame, filename: str, subdirectory: Optional[str] = None):
        self.store.save_table(frame, filename, subdirectory)
        name = f"{subdirectory}/{filename}" if subdirectory else filename
        self.tables[name] = list(frame.columns)

    def _stage(self, name: str, title: str, body: Callable[[], Dict[str, Any]]) -> bool:
        self.logger.info("=" * 80)
        self.logger.info(title)
        self.logger.info("=" * 80)
        started = time.perf_counter()
        try:
            detail = body() or {}
            self.stages.append({"stage": name, "status": "complete",
                                "wall_seconds": time.perf_counter() - started, "detail": detail})
            self.logger.info(f"✓ {title} complete")
            return True
        except JumpBsdeError as e:
            self.logger.error(f"✗ {title} failed: {e}", exc_info=True)
            self.error = {"stage": name, **e.to_dict()}
            self.exit_code = e.exit_code
        except Exception as e:
            self.logger.error(f"✗ {title} failed: {e}", exc_info=True)
            self.error = {"stage": name, "error": type(e).__name__, "message": str(e), "context": {}}
            self.exit_code = 3
        self.stages.append({"stage": name, "status": "failed", "wall_seconds": time.perf_counter() - started})
        return False

    # stages

    def check_model(self) -> Dict[str, Any]:
        validation = quadrature.validate(self.measure)
        self.store.save_json(validation.to_dict(), "measure.json")
        self.assumption_report = check_assumptions(self.spec, seed=self.config.seed)
        self.store.save_json(self.assumption_report.to_dict(), "assumptions.json")
        for failure in self.assumption_report.failures():
            self.logger.warning(f"assumption {failure.name} not met on the sampled box: {failure.detail}")
        return {"assumptions_passed": self.assumption_report.passed,
                "failures": [c.name for c in self.assumption_report.failures()]}

    def simulate(self) -> Dict[str, Any]:
        section = self.config.section("grid", "truncation")
        bundle = self.store.cached_bundle(section, self.config.seed)
        cached = bundle is not None
        if not cached:
            grid = self.st.grid(self.spec, self.config.grid.t)
            tm = truncate(self.measure, self.st.truncation_k)
            bundle = simulator.simulate(self.spec, tm, self.config.grid.t, self.x, grid, self.st.n_paths,
                                        self.config.seed)
            self.store.store_bundle(section, self.config.seed, bundle)
        self.store.save_bundle(bundle, "bundle.jbsd", "artifacts")
        self.ctx.bundle = bundle
        return {"cached": cached, "jumps": int(len(bundle.jump_path)), "n_paths": bundle.n_paths}

    def solve(self) -> Dict[str, Any]:
        solver = self.config.solver
        if solver.method == "picard":
            solution = picard_subinterval(self.spec, self.ctx.bundle, self.st.basis, solver.picard.delta,
                                          solver.estimator, self.assumption_report, solver.picard.tol,
                                          solver.picard.max_iter)
        else:
            solution = solve_lsmc(self.spec, self.ctx.bundle, self.st.basis, solver.estimator,
                                  self.assumption_report)
        self.ctx.solution = solution
        self._write_solution(solution)
        return {"y0": solution.y0.tolist(), "y0_standard_error": solution.y0_standard_error.tolist()}

    def _write_solution(self, solution: BsdeSolution):
        self.store.save_json(solution.summary(), "solution.json")
        self._save_table(pd.DataFrame({"component": np.arange(solution.m), "y0": solution.y0,
                                       "standard_error": solution.y0_standard_error}), "solution.csv")
        self._save_table(pd.DataFrame([d.to_dict() for d in solution.diagnostics]), "diagnostics.csv")
        self.store.save_field(solution.u_fields, "u_fields.jbsd", "artifacts",
                              meta={"model": self.spec.name, "seed": solution.seed})

    def truncation(self) -> Dict[str, Any]:
        table = truncation_study(self.spec, self.config.grid.t, self.x, self.st.grid(self.spec, self.config.grid.t),
                                 self.config.truncation.ks, self.st.n_paths, self.config.seed, self.st.basis,
                                 self.st.estimator)
        frame = table.to_frame()
        y0 = np.array(frame.pop("y0").tolist(), dtype=float)
        for i in range(y0.shape[1]):
            frame[f"y0_{i}"] = y0[:, i]
        self._save_table(frame, "truncation.csv")
        self.store.save_json({"fitted_C": table.fitted_C, "spearman": table.spearman, "seed": table.seed,
                              "n_paths": table.n_paths}, "truncation.json")
        return {"fitted_C": table.fitted_C, "spearman": table.spearman}

    def oracle(self) -> Dict[str, Any]:
        section = self.config.section("oracle")
        field = self.store.cached_field(section, self.config.seed)
        cached = field is not None
        if not cached:
            field = solve_fd(self.st.oracle(self.spec))
            self.store.store_field(section, self.config.seed, field)
        self.store.save_field(field, "oracle_field.jbsd", "artifacts", meta={"model": self.spec.name})
        self.ctx.oracle_field = field
        at_x = field(self.config.grid.t, self.x[None, :])[0]
        return {"cached": cached, "u_at_x": at_x.tolist()}

    def run_checks(self) -> Dict[str, Any]:
        outcome = {}
        for index, entry in enumerate(self.config.check_entries()):
            runner = validate_check(index, entry.name, entry.options)
            report = runner(self.ctx, **entry.options)
            report.gated = entry.gated
            self.reports.append(report)
            self.store.save_json(report.to_dict(), f"{entry.name}.json", "checks")
            for table_name, frame in sorted(report.tables.items()):
                self._save_table(frame, f"{entry.name}_{table_name}.csv", "checks")
            outcome[entry.name] = report.passed
        return outcome

    def _oracle_applicable(self) -> bool:
        dims = self.spec.dims
        return self.config.oracle.enabled and dims.k == dims.d == dims.l == 1 and dims.m <= 2

    def run(self) -> int:
        sink = attach_run_log(self.store.root)
        try:
            return self._run()
        finally:
            detach_run_log(sink)

    def _run(self) -> int:
        self.logger.info(f"🚀 Experiment '{self.config.name}' (seed {self.config.seed}, "
                         f"{self.st.n_paths} paths, {self.config.threads} thread(s))")
        self.logger.info(f"Outputs will be stored in: {self.store.root}")
        settings.n_threads = self.config.threads
        run_id = self.registry.start_run(self.config_hash, self.config.seed)

        plan = [
            ("model", "Model and measure assumptions", self.check_model),
            ("simulate", "Forward simulation", self.simulate),
            ("solve", f"Backward solve ({self.config.solver.method})", self.solve),
        ]
        if self.config.truncation.ks:
            plan.append(("truncation", "Truncation study", self.truncation))
        if self._oracle_applicable():
            plan.append(("oracle", "Finite-difference oracle", self.oracle))
        if self.config.checks:
            plan.append(("checks", "Checks", self.run_checks))

        results = {}
        for name, title, body in plan:
            results[name] = self._stage(name, title, body)
            if not results[name]:
                break

        for report in self.reports:
            self.registry.record_check(run_id, report)
        if self.error is None and any(r.gated and not r.passed for r in self.reports):
            self.exit_code = EXIT_CHECK_FAILURE

        manifest_path = self.store.save_json(self.manifest(), "manifest.json")
        self.registry.finish_run(run_id, self.exit_code, str(manifest_path))
        self._log_summary(results)
        return self.exit_code

    def manifest(self) -> Dict[str, Any]:
        tables = {name: _document(name, columns) for name, columns in self.tables.items()}
        return {
            "library_version": __version__,
            "config": self.config.echo(),
            "config_hash": self.config_hash,
            "seed": self.config.seed,
            "n_paths": self.st.n_paths,
            "threads": self.config.threads,
            "stages": self.stages,
            "checks": [{"name": r.name, "passed": r.passed, "gated": r.gated, "seed": r.seed,
                        r.sample_size_key: r.sample_size, "digest": r.digest} for r in self.reports],
            "tables": tables,
            "exit_code": self.exit_code,
            "error": self.error,
        }

    def _log_summary(self, results: Dict[str, bool]):
        self.logger.info("=" * 80)
        self.logger.info("EXPERIMENT SUMMARY")
        self.logger.info("=" * 80)
        for stage, success in results.items():
            status = "✓ SUCCESS" if success else "✗ FAILED"
            self.logger.info(f"{stage.upper():15} : {status}")
        for report in self.reports:
            status = "✓ PASS" if report.passed else ("✗ FAIL" if report.gated else "✗ FAIL (ungated)")
            size = f"{report.sample_size_key}={report.sample_size}"
            self.logger.info(f"{report.name:35} : {status} (seed={report.seed}, {size})")
        if self.exit_code == EXIT_PASS:
            self.logger.info("🎉 All gated checks passed")
        else:
            self.logger.warning(f"⚠️  exit code {self.exit_code}. Check {self.store.root / 'manifest.json'}")


def run_experiment(config: ExperimentConfig) -> int:
    return ExperimentPipeline(config).run()
