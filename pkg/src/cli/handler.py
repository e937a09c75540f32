"""Command handler: turns a scenario into library calls and result files."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import sparse
from structlog import get_logger

from ..config import Config, get_config
from ..models.core import Configuration, LatticeGeometry
from ..models.errors import ScenarioError, SimulationError
from ..models.operator import SparseOperator
from ..models.state import BasisEnumeration, QuantumState
from ..services.dynamics import build_hamiltonian, evolve_series
from ..services.operators import (
    StepOperator,
    compile_ruleset,
    enumerate_reachable,
    full_basis,
    to_matrix,
)
from ..services.tasks import TaskSpec, classical_trace, completion_curve
from ..services.validators import ViolationReport, validate_operator
from .catalogue import TaskCatalogue
from .functions import get_command_specs
from .io import (
    AMPLITUDE_COLUMNS,
    COMPLETION_COLUMNS,
    MARGINAL_COLUMNS,
    amplitude_rows,
    marginal_rows,
    write_csv,
    write_jsonl,
)
from .models import (
    CommandInvocation,
    CommandResponse,
    CommandStatus,
    Scenario,
    to_complex,
)

logger = get_logger(__name__)

INTERNAL_ERROR_EXIT = 70
VIOLATIONS_EXIT = 1


class PreparedScenario(BaseModel):
    """A loaded scenario with its effective configuration and compiled operator."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    scenario: Scenario
    config: Config
    geometry: LatticeGeometry
    seed: int
    task: Optional[TaskSpec] = None
    step: Optional[StepOperator] = None
    explicit: Optional[SparseOperator] = None


class ScenarioHandler:
    """Handler for the qrobot subcommands."""

    def __init__(self, config: Optional[Config] = None):
        """Initialize the handler.

        Args:
            config: Base configuration; scenario fields and flags override it
        """
        self.config = config or get_config()
        self.catalogue = TaskCatalogue()

    def execute(self, invocation: CommandInvocation) -> CommandResponse:
        """Run one subcommand, mapping failures to exit statuses.

        Args:
            invocation: Subcommand name and option values

        Returns:
            CommandResponse: Outcome with exit code, summary and files written
        """
        if invocation.command not in get_command_specs():
            return CommandResponse(
                status=CommandStatus.ERROR,
                exit_code=ScenarioError.exit_code,
                error=f"Unknown command: {invocation.command}",
            )
        method = getattr(self, invocation.command)
        try:
            logger.info(
                "executing_command",
                command=invocation.command,
                parameters=invocation.parameters,
            )
            return method(**invocation.parameters)
        except SimulationError as e:
            logger.error(
                "command_failed",
                command=invocation.command,
                error_type=type(e).__name__,
                detail=e.detail,
                exit_code=e.exit_code,
            )
            return CommandResponse(
                status=CommandStatus.ERROR,
                exit_code=e.exit_code,
                error=f"{type(e).__name__}: {e.detail}",
            )
        except Exception as e:
            logger.exception(
                "unexpected_error",
                command=invocation.command,
                error=str(e),
            )
            return CommandResponse(
                status=CommandStatus.ERROR,
                exit_code=INTERNAL_ERROR_EXIT,
                error=f"Internal error: {str(e)}",
            )

    def run(
        self,
        scenario: str,
        out: str = ".",
        method: Optional[str] = None,
        tol: Optional[float] = None,
        max_dim: Optional[int] = None,
        strict: bool = False,
        seed: Optional[int] = None,
    ) -> CommandResponse:
        """Evolve the start state to each scenario time and write the results."""
        prepared = self._prepare(
            scenario, method=method, tol=tol, max_dim=max_dim, seed=seed
        )
        config = prepared.config
        outputs = prepared.scenario.outputs
        out_dir = Path(out)
        state = self._initial_state(prepared)
        basis = self._reachable(prepared, state)
        total, action, computation = self._realize(prepared, basis)
        reports = validate_operator(action, computation, config=config)
        if reports:
            if strict:
                return self._violations(reports, out_dir / outputs.violations)
            logger.warning(
                "structural_violations",
                count=len(reports),
                first=reports[0].condition.value,
            )
        hamiltonian = build_hamiltonian(total, config=config)
        result = evolve_series(
            hamiltonian,
            state,
            prepared.scenario.times,
            method=config.evolution.method,
            tol=config.evolution.tolerance,
            config=config,
        )
        files = [out_dir / outputs.amplitudes, out_dir / outputs.marginals]
        write_csv(files[0], AMPLITUDE_COLUMNS, amplitude_rows(result))
        marginals = marginal_rows(result, prepared.scenario.selectors)
        write_csv(files[1], MARGINAL_COLUMNS, marginals)
        summary: Dict[str, Any] = {
            "dimension": hamiltonian.dimension,
            "method": result.method.value,
            "times": result.times,
            "max_norm_drift": max(result.norm_drift, default=0.0),
            "violations": len(reports),
        }
        task = prepared.task
        if task is not None and task.final_outputs:
            curve = completion_curve(result, task)
            files.append(out_dir / outputs.completion)
            write_csv(files[-1], COMPLETION_COLUMNS, curve)
            summary["completion"] = curve[-1][1] if curve else 0.0
        return CommandResponse(
            status=CommandStatus.SUCCESS,
            result=summary,
            files=[str(path) for path in files],
        )

    def validate(
        self, scenario: str, out: str = ".", max_dim: Optional[int] = None
    ) -> CommandResponse:
        """Scan the operator for structural violations; exit 1 if any are found."""
        prepared = self._prepare(scenario, max_dim=max_dim)
        if prepared.explicit is not None:
            basis = prepared.explicit.basis
        elif prepared.scenario.basis == "full" or (
            prepared.task is None and prepared.scenario.initial is None
        ):
            basis = full_basis(prepared.geometry, config=prepared.config)
        else:
            basis = self._reachable(prepared, self._initial_state(prepared))
        _, action, computation = self._realize(prepared, basis)
        reports = validate_operator(action, computation, config=prepared.config)
        path = Path(out) / prepared.scenario.outputs.violations
        if reports:
            return self._violations(reports, path, dimension=len(basis))
        write_jsonl(path, [])
        return CommandResponse(
            status=CommandStatus.SUCCESS,
            result={"dimension": len(basis), "violations": 0},
            files=[str(path)],
        )

    def trace(
        self, scenario: str, out: str = ".", max_steps: Optional[int] = None
    ) -> CommandResponse:
        """Follow the rules classically and write the trace as JSON lines."""
        prepared = self._prepare(scenario)
        if prepared.step is None:
            raise ScenarioError(
                "trace needs a task or inline rules, not an explicit operator"
            )
        start = self._start_configuration(prepared)
        task = prepared.task or self._inline_task(prepared, start)
        steps = prepared.scenario.max_steps if max_steps is None else max_steps
        trace = classical_trace(task, start, steps, prepared.config)
        amplitudes = [1.0 + 0j, *trace.amplitudes]
        records: List[Dict[str, Any]] = [
            {
                "step": position,
                "configuration": cfg.to_text(),
                "control": cfg.i,
                "amplitude": [amp.real, amp.imag],
            }
            for position, (cfg, amp) in enumerate(zip(trace.configurations, amplitudes))
        ]
        flags = {
            "steps": trace.steps,
            "terminated": trace.terminated,
            "truncated": trace.truncated,
            "stalled": trace.stalled,
        }
        records.append({"end": True, **flags})
        path = Path(out) / prepared.scenario.outputs.trace
        write_jsonl(path, records)
        return CommandResponse(
            status=CommandStatus.SUCCESS, result=flags, files=[str(path)]
        )

    def tasks(self) -> CommandResponse:
        """Describe every built-in task."""
        return CommandResponse(
            status=CommandStatus.SUCCESS, result=self.catalogue.describe()
        )

    def _prepare(
        self,
        path: str,
        method: Optional[str] = None,
        tol: Optional[float] = None,
        max_dim: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> PreparedScenario:
        scenario = Scenario.load(path)
        config = self._configure(scenario, method, tol, max_dim)
        seed = scenario.seed if seed is None else seed
        if scenario.task is not None:
            task = self.catalogue.build(scenario.task.name, scenario.task.parameters)
            return PreparedScenario(
                scenario=scenario,
                config=config,
                geometry=task.geometry,
                seed=seed,
                task=task,
                step=task.step_operator(config),
            )
        geometry = scenario.geometry
        assert geometry is not None
        if scenario.rules is not None:
            step = compile_ruleset(
                scenario.rules.computation,
                scenario.rules.action,
                geometry,
                config=config,
            )
            return PreparedScenario(
                scenario=scenario,
                config=config,
                geometry=geometry,
                seed=seed,
                step=step,
            )
        return PreparedScenario(
            scenario=scenario,
            config=config,
            geometry=geometry,
            seed=seed,
            explicit=self._explicit_operator(scenario, geometry),
        )

    def _configure(
        self,
        scenario: Scenario,
        method: Optional[str],
        tol: Optional[float],
        max_dim: Optional[int],
    ) -> Config:
        """Flags override scenario fields, which override the base configuration."""
        evolution: Dict[str, Any] = {}
        if scenario.coupling is not None:
            evolution["coupling"] = scenario.coupling
        if (method or scenario.method) is not None:
            evolution["method"] = method or scenario.method
        if (tol or scenario.tolerance) is not None:
            evolution["tolerance"] = tol or scenario.tolerance
        basis: Dict[str, Any] = {}
        if (max_dim or scenario.max_dim) is not None:
            basis["max_dim"] = max_dim or scenario.max_dim
        return self.config.model_copy(
            update={
                "evolution": self.config.evolution.model_copy(update=evolution),
                "basis": self.config.basis.model_copy(update=basis),
            }
        )

    @staticmethod
    def _explicit_operator(
        scenario: Scenario, geometry: LatticeGeometry
    ) -> SparseOperator:
        elements = {
            (
                Configuration.from_text(element.row, geometry),
                Configuration.from_text(element.column, geometry),
            ): to_complex(element.value)
            for element in scenario.operator or []
        }
        configurations = {cfg for pair in elements for cfg in pair}
        initial = scenario.initial
        if initial is not None and initial.configuration is not None:
            configurations.add(Configuration.from_text(initial.configuration, geometry))
        if initial is not None and initial.amplitudes is not None:
            configurations.update(
                Configuration.from_text(entry.configuration, geometry)
                for entry in initial.amplitudes
            )
        basis = BasisEnumeration.from_configurations(geometry, configurations)
        return SparseOperator.from_elements(basis, elements)

    def _initial_state(self, prepared: PreparedScenario) -> QuantumState:
        geometry = prepared.geometry
        initial = prepared.scenario.initial
        task = prepared.task
        if initial is None:
            if task is None:
                raise ScenarioError("initial state is required without a task")
            return task.initial_state()
        if initial.configuration is not None:
            return QuantumState.basis_state(
                geometry, Configuration.from_text(initial.configuration, geometry)
            )
        if initial.amplitudes is not None:
            state = QuantumState.from_amplitudes(
                geometry,
                {
                    Configuration.from_text(entry.configuration, geometry): to_complex(
                        entry.amplitude
                    )
                    for entry in initial.amplitudes
                },
            )
            return state.normalize()
        if task is None:
            raise ScenarioError(
                "environment amplitudes need a task to supply the robot state"
            )
        if initial.environments is not None:
            return task.superposition(
                {env: to_complex(amp) for env, amp in initial.environments.items()}
            )
        environments = initial.random_environments or []
        rng = np.random.default_rng(prepared.seed)
        count = len(environments)
        draws = rng.normal(size=count) + 1j * rng.normal(size=count)
        return task.superposition(dict(zip(environments, draws)))

    def _start_configuration(self, prepared: PreparedScenario) -> Configuration:
        initial = prepared.scenario.initial
        if initial is None and prepared.task is not None:
            return prepared.task.initial
        if initial is not None and initial.configuration is not None:
            return Configuration.from_text(initial.configuration, prepared.geometry)
        raise ScenarioError("trace needs a single basis configuration as its start")

    @staticmethod
    def _inline_task(prepared: PreparedScenario, start: Configuration) -> TaskSpec:
        rules = prepared.scenario.rules
        assert rules is not None
        return TaskSpec(
            name=prepared.scenario.name or "inline",
            geometry=prepared.geometry,
            computation=rules.computation,
            action=rules.action,
            initial=start,
            final_outputs=tuple(rules.final_outputs),
        )

    @staticmethod
    def _reachable(prepared: PreparedScenario, state: QuantumState) -> BasisEnumeration:
        if prepared.explicit is not None:
            basis = prepared.explicit.basis
            for cfg in state.support:
                basis.index(cfg)
            return basis
        assert prepared.step is not None
        return enumerate_reachable(state.support, prepared.step, config=prepared.config)

    @staticmethod
    def _realize(
        prepared: PreparedScenario, basis: BasisEnumeration
    ) -> Tuple[SparseOperator, SparseOperator, SparseOperator]:
        """T with its action and computation parts over ``basis``."""
        if prepared.explicit is not None:
            total = prepared.explicit
            gate = np.array([cfg.i for cfg in basis.configurations])
            on = sparse.diags((gate == 1).astype(complex))
            off = sparse.diags((gate == 0).astype(complex))
            action = total.with_matrix(total.matrix @ on)
            computation = total.with_matrix(total.matrix @ off)
            return total, action, computation
        step = prepared.step
        assert step is not None
        config = prepared.config
        return (
            to_matrix(step, basis, check=False, config=config),
            to_matrix(step.action_part(), basis, check=False, config=config),
            to_matrix(step.computation_part(), basis, check=False, config=config),
        )

    @staticmethod
    def _violations(
        reports: List[ViolationReport], path: Path, **summary: Any
    ) -> CommandResponse:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            for report in reports:
                handle.write(report.to_json_line() + "\n")
        logger.info("violations_written", path=str(path), count=len(reports))
        return CommandResponse(
            status=CommandStatus.VIOLATIONS,
            exit_code=VIOLATIONS_EXIT,
            result={
                **summary,
                "violations": len(reports),
                "conditions": sorted({report.condition.value for report in reports}),
            },
            error=f"{len(reports)} structural violation(s)",
            files=[str(path)],
        )
