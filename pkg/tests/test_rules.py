"""Tests for the rule language and lookup tables."""

import pytest
from pydantic import ValidationError

from src.models import (
    LocalRule,
    LookupTable,
    Phase,
    RuleMatch,
    RuleOutcome,
    RuleSet,
    gated_table,
)
from src.models.rules import rules_from_dicts


def test_ruleset_json_round_trip():
    """Test a rule set survives serialization, complex amplitudes included."""
    ruleset = RuleSet(
        phase=Phase.ACTION,
        rules=[
            LocalRule(
                phase=Phase.ACTION,
                match=RuleMatch(l2=1, s=0),
                outcome=RuleOutcome(s=1, flip_control=True),
                amplitude=0.6 + 0.8j,
                label="rotate",
            ),
            LocalRule(phase=Phase.ACTION, outcome=RuleOutcome(dj=-1)),
        ],
    )

    restored = RuleSet.from_json(ruleset.to_json())

    assert restored == ruleset
    assert restored.rules[0].amplitude == 0.6 + 0.8j


def test_amplitude_parses_pairs():
    """Test amplitudes given as [re, im] are accepted."""
    rule = LocalRule.model_validate({"phase": "action", "amplitude": [0.0, -1.0]})

    assert rule.amplitude == -1j


def test_ruleset_rejects_mixed_phases():
    """Test a rule tagged with the other phase is refused."""
    with pytest.raises(ValidationError):
        RuleSet(phase=Phase.COMPUTATION, rules=[LocalRule(phase=Phase.ACTION)])


def test_rule_match_rejects_unknown_fields():
    """Test matches only name the local context fields."""
    with pytest.raises(ValidationError):
        RuleMatch.model_validate({"j": 3})


def test_rules_from_dicts():
    """Test plain dictionaries build a rule set."""
    ruleset = rules_from_dicts(
        Phase.COMPUTATION,
        [
            {"match": {"p": 0}, "outcome": {"p": 1, "dk": 1}},
            {"outcome": {"flip_control": True}},
        ],
    )

    assert len(ruleset) == 2
    assert ruleset.rules[0].match.key == (0, None, None, None, None)
    assert ruleset.rules[1].match.mask == (False,) * 5


def test_lookup_table_from_function_is_total():
    """Test tabulating a function covers the whole domain."""
    table = LookupTable.from_function(3, lambda l2, l1, s: (l2 + s) % 3)

    assert table.is_total
    assert table.lookup(2, 0, 1) == 0


def test_lookup_table_reports_missing_entries():
    """Test partial tables list their gaps."""
    table = LookupTable(register_dim=2, entries=((0, 0, 0, 1),))

    assert not table.is_total
    assert len(table.missing()) == 7
    assert (0, 0, 1) in table.missing()


@pytest.mark.parametrize(
    "entries",
    [
        ((0, 0, 0, 2),),
        ((0, 0, 2, 0),),
        ((0, 0, 0, 1), (0, 0, 0, 0)),
    ],
)
def test_lookup_table_rejects_bad_rows(entries):
    """Test out-of-range and conflicting rows are refused."""
    with pytest.raises(ValueError):
        LookupTable(register_dim=2, entries=entries)


def test_gated_table_advances_only_from_predecessor():
    """Test a memory-gated table falls back to 0 from an unexpected memory value."""
    table = gated_table(4, {0: (1, 2), 1: (3, 3), 2: (3, 3), 3: (3, 3)})

    assert table.lookup(0, 0, 0) == 1
    assert table.lookup(0, 0, 1) == 2
    assert table.lookup(1, 0, 1) == 3
    assert table.lookup(3, 2, 0) == 3
    assert table.lookup(3, 3, 1) == 3
    assert table.lookup(1, 2, 0) == 0
    assert table.lookup(0, 3, 0) == 0


def test_rules_inherit_the_rule_set_phase():
    """Test rules given as plain objects take the phase of their rule set."""
    ruleset = RuleSet.model_validate(
        {"phase": "action", "rules": [{"match": {"s": 1}, "outcome": {"dj": -1}}]}
    )

    assert ruleset.rules[0].phase is Phase.ACTION
    assert ruleset.rules[0].outcome.dj == -1
