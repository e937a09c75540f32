"""Tests for the matrix-level structural validators."""

import itertools
import json
import math

import numpy as np
import pytest
from structlog.testing import capture_logs

from src.models import (
    BasisClosureError,
    BasisEnumeration,
    Boundary,
    LatticeGeometry,
    LookupTable,
    PreconditionError,
    SparseOperator,
    make_configuration,
)
from src.models.core import set_bit
from src.services.operators import full_basis, to_matrix
from src.services.tasks import (
    make_cleanup_task,
    make_conditional_rotate_task,
    make_copy_task,
    make_lookup_task,
    make_rotate_task,
    make_search_zeros_task,
    make_shift_task,
    make_walk_task,
    rotation_matrix,
)
from src.services.validators import (
    Condition,
    Lattice,
    check_distinct_path,
    check_env_locality,
    check_gating_and_diagonality,
    check_homogeneity,
    check_onboard_locality,
    check_unitarity,
    validate_operator,
)


def _bits(length):
    return ["".join(bits) for bits in itertools.product("01", repeat=length)]


def _shift(env_size, boundary=Boundary.CYCLIC, planted=None):
    """Operator moving h1 one site right on every environment string."""
    geometry = LatticeGeometry(
        env_size=env_size,
        env_boundary=boundary,
        onboard_size=1,
        head_states=1,
        register_dim=1,
    )
    base = make_configuration(
        geometry, p=0, k=0, t="0", l1=0, l2=0, i=1, j=0, s="0" * env_size
    )
    configurations = [
        base.evolve(j=j, s=s) for j in range(env_size) for s in _bits(env_size)
    ]
    basis = BasisEnumeration.from_configurations(geometry, configurations)
    elements = {}
    for cfg in configurations:
        j = geometry.env_step(cfg.j, 1)
        if j is not None:
            elements[(cfg.evolve(j=j), cfg)] = 0.5 if cfg == planted else 1.0
    return SparseOperator.from_elements(basis, elements), base


@pytest.fixture
def geometry():
    """Cyclic geometry large enough to plant every kind of defect."""
    return LatticeGeometry(env_size=4, onboard_size=4, head_states=2, register_dim=2)


@pytest.fixture
def base(geometry):
    """Computation-phase configuration at the origin."""
    return make_configuration(
        geometry, p=0, k=0, t="0000", l1=0, l2=0, i=0, j=0, s="0000"
    )


def _parts(geometry, part, row, column):
    basis = BasisEnumeration.from_configurations(geometry, {row, column})
    planted = SparseOperator.from_elements(basis, {(row, column): 1.0})
    empty = SparseOperator.zero(basis)
    return (planted, empty) if part == "action" else (empty, planted)


@pytest.mark.parametrize(
    "part,column_update,row_update,condition",
    [
        ("action", {"i": 1}, {"i": 1, "j": 2}, Condition.ENV_LOCALITY),
        ("action", {"i": 1}, {"i": 1, "s": "0010"}, Condition.ENV_LOCALITY),
        ("computation", {}, {"i": 1, "k": 2}, Condition.ONBOARD_LOCALITY),
        ("computation", {}, {"i": 1, "t": "0100"}, Condition.ONBOARD_LOCALITY),
        ("computation", {"i": 1}, {}, Condition.COMPUTATION_GATING),
        ("computation", {}, {"i": 1, "s": "1000"}, Condition.COMPUTATION_ENV_DIAGONAL),
        ("action", {}, {"j": 1}, Condition.ACTION_GATING),
        ("action", {"i": 1}, {"i": 1, "l2": 1}, Condition.ACTION_REGISTER_DIAGONAL),
        ("action", {"i": 1}, {"i": 1, "p": 1}, Condition.ACTION_ONBOARD_INVARIANCE),
    ],
)
def test_planted_defect_is_reported(
    part, column_update, row_update, condition, geometry, base
):
    """Test a single defective element yields exactly one witness for its condition."""
    column = base.evolve(**column_update)
    row = base.evolve(**row_update)
    action, computation = _parts(geometry, part, row, column)

    reports = validate_operator(action, computation, check_homogeneity_flag=False)

    assert [report.condition for report in reports] == [condition]
    assert reports[0].row == row
    assert reports[0].column == column
    assert reports[0].value == 1.0


def test_env_locality_allows_one_site_moves(geometry, base):
    """Test a one-site move writing under h1 passes and a two-site hop does not."""
    column = base.evolve(i=1)
    step = base.evolve(i=1, j=1, s="1000")
    hop = base.evolve(i=1, j=2)
    basis = BasisEnumeration.from_configurations(geometry, {column, step, hop})
    operator = SparseOperator.from_elements(
        basis, {(step, column): 1.0, (hop, column): 1.0}
    )

    (report,) = check_env_locality(operator)

    assert report.row == hop
    assert "hops 2 sites" in report.explanation


def test_onboard_locality_names_stray_qubits(geometry, base):
    """Test a write away from h2 is reported with the sites it touched."""
    row = base.evolve(k=1, t="0010")
    basis = BasisEnumeration.from_configurations(geometry, {row, base})
    operator = SparseOperator.from_elements(basis, {(row, base): 1.0})

    (report,) = check_onboard_locality(operator)

    assert report.condition is Condition.ONBOARD_LOCALITY
    assert "[2]" in report.explanation


def test_gating_and_diagonality_reports_every_broken_condition(geometry, base):
    """Test a register write breaks two action conditions but is a legal computation."""
    row = base.evolve(l1=1)
    action, computation = _parts(geometry, "action", row, base)

    reports = check_gating_and_diagonality(action, computation)

    assert {report.condition for report in reports} == {
        Condition.ACTION_GATING,
        Condition.ACTION_REGISTER_DIAGONAL,
    }
    assert check_gating_and_diagonality(computation, action) == []


def test_validate_operator_logs_violation_count(geometry, base):
    """Test validation emits a structured summary event."""
    action, computation = _parts(
        geometry, "action", base.evolve(i=1, p=1), base.evolve(i=1)
    )

    with capture_logs() as logs:
        validate_operator(action, computation, check_homogeneity_flag=False)

    assert {"event": "operator_validated", "violations": 1}.items() <= logs[-1].items()


def test_violation_report_json_line(geometry, base):
    """Test the JSON Lines form of a witness."""
    action, computation = _parts(
        geometry, "action", base.evolve(i=1, l1=1), base.evolve(i=1)
    )
    (report,) = validate_operator(action, computation, check_homogeneity_flag=False)

    record = json.loads(report.to_json_line())

    assert record["condition"] == "action_register_diagonal"
    assert record["row"] == "p=0 k=0 t=0000 l1=1 l2=0 c=1 j=0 s=0000"
    assert record["column"] == "p=0 k=0 t=0000 l1=0 l2=0 c=1 j=0 s=0000"
    assert record["value"] == [1.0, 0.0]


def test_cyclic_shift_is_homogeneous():
    """Test translating h1 and the environment together preserves a uniform shift."""
    operator, _ = _shift(3)

    assert check_homogeneity(operator, Lattice.ENV_J) == []


def test_position_dependent_amplitude_breaks_homogeneity():
    """Test an amplitude tied to one site is reported."""
    _, base = _shift(3)
    operator, _ = _shift(3, planted=base)

    reports = check_homogeneity(operator, "env_j")

    assert reports
    assert {report.condition for report in reports} == {Condition.HOMOGENEITY_ENV}
    assert any(report.column == base for report in reports)


def test_exact_homogeneity_needs_cyclic_lattice():
    """Test bounded lattices need the windowed comparison."""
    operator, _ = _shift(3, boundary=Boundary.BOUNDED)

    with pytest.raises(PreconditionError):
        check_homogeneity(operator, Lattice.ENV_J)
    assert check_homogeneity(operator, Lattice.ENV_J, windowed=True) == []


def test_homogeneity_logs_compared_translates():
    """Test each element is compared both ways on a translation-closed basis."""
    operator, _ = _shift(3)

    with capture_logs() as logs:
        assert check_homogeneity(operator, Lattice.ENV_J) == []

    (event,) = [log for log in logs if log["event"] == "homogeneity_checked"]
    assert event["compared"] == 2 * operator.nnz
    assert event["skipped"] == 0
    assert event["violations"] == 0


def test_homogeneity_warns_when_nothing_is_compared():
    """Test a basis holding no translates yields a warning instead of a silent pass."""
    shift, base = _shift(3)
    column = base.evolve(s="100")
    row = column.evolve(j=1)
    basis = BasisEnumeration.from_configurations(
        shift.basis.geometry, [column, row]
    )
    operator = SparseOperator.from_elements(basis, {(row, column): 1.0})

    with capture_logs() as logs:
        assert check_homogeneity(operator, Lattice.ENV_J) == []

    (event,) = [log for log in logs if log["event"] == "homogeneity_vacuous"]
    assert event["log_level"] == "warning"
    assert (event["compared"], event["skipped"]) == (0, 2)


@pytest.mark.parametrize("sign_flip,expected", [(False, 0), (True, 1)])
def test_onboard_homogeneity(sign_flip, expected):
    """Test a write at h2 must not depend on where h2 stands."""
    geometry = LatticeGeometry(
        env_size=1, onboard_size=2, head_states=1, register_dim=1
    )
    base = make_configuration(geometry, p=0, k=0, t="00", l1=0, l2=0, i=0, j=0, s="0")
    configurations = [base.evolve(k=k, t=t) for k in range(2) for t in _bits(2)]
    elements = {
        (cfg.evolve(t=set_bit(cfg.t, cfg.k, 1), i=1), cfg): (
            -1.0 if sign_flip and cfg.k else 1.0
        )
        for cfg in configurations
        if cfg.t_k == 0
    }
    basis = BasisEnumeration.from_configurations(
        geometry, set(configurations) | {row for row, _ in elements}
    )
    operator = SparseOperator.from_elements(basis, elements)

    reports = check_homogeneity(operator, Lattice.ONBOARD_K)

    assert bool(reports) == bool(expected)
    assert {report.condition for report in reports} <= {Condition.HOMOGENEITY_ONBOARD}


def test_unitarity_of_permutation_and_planted_defect():
    """Test a permutation is exactly unitary and a shrunk column is not."""
    operator, base = _shift(3)
    defective, _ = _shift(3, planted=base)

    assert check_unitarity(operator) == 0.0
    assert check_unitarity(defective) == pytest.approx(0.75)


def test_unitarity_accepts_arrays():
    """Test dense and non-square input."""
    assert check_unitarity(rotation_matrix(0.3)) < 1e-15
    assert check_unitarity(np.array([[1.0], [0.0]])) == pytest.approx(1.0)


def test_unitarity_logs_above_tolerance():
    """Test a deviation beyond the tolerance is logged as a warning."""
    _, base = _shift(3)
    defective, _ = _shift(3, planted=base)

    with capture_logs() as logs:
        check_unitarity(defective, tol=1e-9)

    assert logs[0]["event"] == "unitarity_deviation"
    assert logs[0]["log_level"] == "warning"


def test_distinct_path_closes_on_cycle():
    """Test a cyclic shift returns to its start after M steps."""
    operator, base = _shift(4)

    result = check_distinct_path(operator, base, n_steps=10)

    assert result.is_distinct_path
    assert result.closed
    assert result.length == 4
    assert [cfg.j for cfg in result.visited] == [0, 1, 2, 3]


def test_distinct_path_stops_at_step_limit():
    """Test an open path that outlasts the step limit."""
    operator, base = _shift(4)

    result = check_distinct_path(operator, base, n_steps=2)

    assert result.is_distinct_path
    assert not result.closed
    assert result.length == 2


def test_distinct_path_of_zero_operator():
    """Test the zero operator has a path of length 0."""
    operator, base = _shift(3)

    result = check_distinct_path(SparseOperator.zero(operator.basis), base, n_steps=5)

    assert result.is_distinct_path
    assert result.length == 0
    assert result.visited == [base]


def test_distinct_path_rejects_branching(geometry, base):
    """Test a superposition image ends the distinct path."""
    left, right = base.evolve(i=1, s="1000"), base.evolve(i=1)
    basis = BasisEnumeration.from_configurations(geometry, [base, left, right])
    operator = SparseOperator.from_elements(
        basis, {(left, base): 1 / math.sqrt(2), (right, base): 1 / math.sqrt(2)}
    )

    assert not check_distinct_path(operator, base, n_steps=3).is_distinct_path


def test_distinct_path_start_outside_basis():
    """Test the start configuration must belong to the basis."""
    operator, base = _shift(3)

    with pytest.raises(BasisClosureError):
        check_distinct_path(operator, base.evolve(i=0), n_steps=1)


@pytest.mark.parametrize(
    "factory",
    [
        lambda: make_rotate_task(math.pi / 3, env="00"),
        lambda: make_conditional_rotate_task(math.pi / 2, env="01"),
        lambda: make_search_zeros_task(0.6, 0.8j, env="01"),
        lambda: make_search_zeros_task(1.0, 0.0, env="01", boundary="bounded"),
        lambda: make_lookup_task(
            LookupTable.from_function(2, lambda l2, l1, s: l2 ^ s)
        ),
        lambda: make_walk_task(env_size=8),
        lambda: make_copy_task(
            region=(0, 0), copy_region=(1, 1), env="00", onboard_size=2
        ),
        lambda: make_cleanup_task(
            region=(0, 0), pattern="0", copy_region=(1, 1), env="00", onboard_size=1
        ),
        lambda: make_shift_task(region=(0, 0), offset=1, env="00", onboard_size=1),
    ],
    ids=[
        "rotate",
        "conditional_rotate",
        "search",
        "search_bounded",
        "lookup",
        "walk",
        "copy",
        "cleanup",
        "shift",
    ],
)
def test_builtin_tasks_satisfy_every_condition(factory):
    """Test built-in tasks pass every structural check on their full basis.

    The full basis holds every translate, so homogeneity compares real pairs.
    """
    task = factory()
    operator = task.step_operator()
    basis = full_basis(task.geometry, max_dim=task.geometry.dimension)
    action = to_matrix(operator.action_part(), basis, check=False)
    computation = to_matrix(operator.computation_part(), basis, check=False)

    with capture_logs() as logs:
        reports = validate_operator(action, computation, check_homogeneity_flag=True)

    assert reports == []
    assert not [log for log in logs if log["event"] == "homogeneity_vacuous"]
    (env_check,) = [
        log
        for log in logs
        if log["event"] == "homogeneity_checked" and log["lattice"] == "env_j"
    ]
    assert env_check["compared"] > 0
