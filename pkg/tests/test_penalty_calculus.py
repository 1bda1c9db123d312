import numpy as np
import pytest

from collab_score.errors import DimensionMismatch, InvalidArg, NegativeArg, NonpositiveStep
from collab_score.penalty import PenaltyKind, PenaltySpec, derivative, prox_weighted_l1, value


def _brute_force_prox(v: float, w: float, eta: float) -> float:
    grid = np.linspace(-5.0, 5.0, 200_001)
    objective = 0.5 * (grid - v) ** 2 + eta * w * np.abs(grid)
    return float(grid[np.argmin(objective)])


@pytest.mark.parametrize("v", [-3.2, -0.4, 0.0, 0.15, 1.7, 4.0])
@pytest.mark.parametrize("w", [0.0, 0.3, 1.5])
def test_prox_matches_brute_force(v: float, w: float) -> None:
    got = prox_weighted_l1(np.array([v]), np.array([w]), 0.5)[0]
    assert got == pytest.approx(_brute_force_prox(v, w, 0.5), abs=1e-4)


def test_prox_produces_exact_zeros_and_keeps_zero_weights() -> None:
    out = prox_weighted_l1(np.array([0.2, -0.2, 3.0, -3.0]), np.array([1.0, 1.0, 0.0, 0.0]), 0.5)
    assert out[0] == 0.0 and out[1] == 0.0
    assert out[2] == 3.0 and out[3] == -3.0


def test_prox_argument_errors() -> None:
    with pytest.raises(DimensionMismatch):
        prox_weighted_l1(np.zeros(2), np.zeros(3), 1.0)
    with pytest.raises(NonpositiveStep):
        prox_weighted_l1(np.zeros(2), np.zeros(2), 0.0)


@pytest.mark.parametrize("kind", ["SCAD", "MCP"])
def test_penalty_is_continuous_at_breakpoints(kind: str) -> None:
    spec = PenaltySpec.of(kind, lam=0.4)
    for point in (spec.lam, spec.a * spec.lam):
        below, above = value(spec, point - 1e-9), value(spec, point + 1e-9)
        assert below == pytest.approx(above, abs=1e-8)
        assert derivative(spec, point - 1e-9) == pytest.approx(derivative(spec, point + 1e-9), abs=1e-6)


@pytest.mark.parametrize("kind", ["L1", "SCAD", "MCP"])
def test_derivative_matches_value_slope(kind: str) -> None:
    spec = PenaltySpec.of(kind, lam=0.5)
    grid = np.array([0.05, 0.3, 0.7, 1.2, 2.5])
    step = 1e-6
    slope = (value(spec, grid + step) - value(spec, grid - step)) / (2 * step)
    assert np.allclose(derivative(spec, grid), slope, atol=1e-5)


def test_derivative_levels() -> None:
    scad = PenaltySpec.of(PenaltyKind.SCAD, lam=1.0)
    mcp = PenaltySpec.of(PenaltyKind.MCP, lam=1.0)
    assert derivative(scad, 0.0) == 1.0
    assert derivative(scad, 5.0) == 0.0
    assert derivative(mcp, 1.5) == pytest.approx(0.5)
    assert derivative(mcp, 3.0) == 0.0
    assert value(scad, 10.0) == pytest.approx(4.7 / 2.0)
    assert scad.flat_threshold == pytest.approx(3.7)
    assert PenaltySpec.of("L1", lam=1.0).flat_threshold is None


def test_penalty_argument_errors() -> None:
    spec = PenaltySpec.of("SCAD", lam=0.1)
    with pytest.raises(NegativeArg):
        value(spec, -1.0)
    with pytest.raises(NegativeArg):
        derivative(spec, np.array([0.2, -0.1]))
    with pytest.raises(InvalidArg):
        PenaltySpec.of("SCAD", lam=0.1, a=2.0)
    with pytest.raises(InvalidArg):
        PenaltySpec.of("MCP", lam=0.1, a=1.0)
    with pytest.raises(InvalidArg):
        spec.with_lambda(-0.5)


def test_direct_construction_is_validated() -> None:
    assert PenaltySpec(kind="MCP", a=3.0, lam=0.2).kind is PenaltyKind.MCP
    with pytest.raises(InvalidArg):
        PenaltySpec(kind=PenaltyKind.SCAD, a=1.5, lam=0.1)
    with pytest.raises(InvalidArg):
        PenaltySpec(kind=PenaltyKind.L1, a=0.0, lam=-1.0)
    with pytest.raises(InvalidArg):
        PenaltySpec(kind="ridge", a=0.0, lam=0.1)
