from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest

from src.errors import ArtifactIOError, ConfigError, EmptyBundleError, ScenarioMismatchError, SizeMismatchError
from src.model import InitialLaw, constant_kernel
from src.stochastics import (
    ParticleEnsemble,
    STREAM_KIND_LIMIT_AGENT,
    TimeGrid,
    dump_bundle,
    ensemble_of,
    load_bundle,
    measure_summary,
    pairing_bound_check,
    sample_bundle,
    w2_distance_empirical,
    w2_squared_sorted,
)


GAUSSIAN = InitialLaw(family="gaussian", mean=0.5, std=0.5)
POINT = InitialLaw(family="point", mean=1.0)


def _assert_same_bundle(a, b) -> None:
    assert a.seed == b.seed and a.grid == b.grid and a.agent_kind == b.agent_kind
    for name in ("dW0", "dW", "xi0", "xi"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name


def test_grid_knots_end_exactly_at_horizon() -> None:
    grid = TimeGrid(0.3, 7)
    assert grid.knots[0] == 0.0
    assert grid.knots[-1] == 0.3
    assert grid.refine(3).n_steps == 21


def test_grid_locates_knots_and_interior_points() -> None:
    grid = TimeGrid(1.0, 4)
    assert grid.index_of(0.5) == (2, 0.0)
    k, w = grid.index_of(0.3)
    assert k == 1
    assert w == pytest.approx(0.2)
    with pytest.raises(ConfigError):
        grid.index_of(1.5)


def test_grid_rejects_bad_sizes() -> None:
    with pytest.raises(ConfigError):
        TimeGrid(1.0, 0)
    with pytest.raises(ConfigError):
        TimeGrid(0.0, 10)


def test_bundle_shapes_and_determinism() -> None:
    grid = TimeGrid(1.0, 6)
    bundle = sample_bundle(grid, 3, 5, POINT, GAUSSIAN, seed=11)
    assert bundle.dW0.shape == (3, 6)
    assert bundle.dW.shape == (3, 5, 6)
    assert bundle.xi0.shape == (3,)
    assert bundle.xi.shape == (3, 5)
    assert np.all(bundle.xi0 == 1.0)
    _assert_same_bundle(bundle, sample_bundle(grid, 3, 5, POINT, GAUSSIAN, seed=11))


def test_head_is_identical_to_sampling_the_smaller_bundle() -> None:
    grid = TimeGrid(1.0, 4)
    big = sample_bundle(grid, 5, 9, GAUSSIAN, GAUSSIAN, seed=2)
    small = sample_bundle(grid, 2, 4, GAUSSIAN, GAUSSIAN, seed=2)
    _assert_same_bundle(big.head(2, 4), small)
    assert big.common_noise_of(small)


def test_head_larger_than_bundle_is_rejected() -> None:
    bundle = sample_bundle(TimeGrid(1.0, 2), 2, 2, POINT, POINT, seed=0)
    with pytest.raises(SizeMismatchError):
        bundle.head(3, 2)


def test_other_seed_changes_noise() -> None:
    grid = TimeGrid(1.0, 4)
    a = sample_bundle(grid, 2, 3, POINT, POINT, seed=0)
    b = sample_bundle(grid, 2, 3, POINT, POINT, seed=1)
    assert not np.array_equal(a.dW0, b.dW0)
    assert not a.common_noise_of(b)


def test_limit_agent_stream_shares_only_the_common_noise() -> None:
    grid = TimeGrid(1.0, 4)
    field = sample_bundle(grid, 3, 5, GAUSSIAN, GAUSSIAN, seed=8)
    agents = sample_bundle(grid, 3, 5, GAUSSIAN, GAUSSIAN, seed=8, agent_kind=STREAM_KIND_LIMIT_AGENT)
    assert agents.common_noise_of(field)
    assert np.array_equal(agents.dW0, field.dW0)
    assert not np.any(agents.dW == field.dW)
    assert not np.any(agents.xi == field.xi)
    assert agents.head(2, 3).agent_kind == STREAM_KIND_LIMIT_AGENT
    with pytest.raises(ConfigError):
        sample_bundle(grid, 3, 5, GAUSSIAN, GAUSSIAN, seed=8, agent_kind=0)


def test_increments_have_brownian_variance() -> None:
    grid = TimeGrid(1.0, 10)
    bundle = sample_bundle(grid, 4, 500, POINT, POINT, seed=3)
    assert bundle.dW.var() == pytest.approx(grid.dt, rel=0.05)
    assert abs(bundle.dW.mean()) < 0.01


def test_empty_bundle_is_rejected() -> None:
    with pytest.raises(EmptyBundleError):
        sample_bundle(TimeGrid(1.0, 2), 0, 4, POINT, POINT, seed=0)
    with pytest.raises(EmptyBundleError):
        sample_bundle(TimeGrid(1.0, 2), 4, 0, POINT, POINT, seed=0)


def test_bundle_dump_replays_bit_for_bit(tmp_path: Path) -> None:
    bundle = sample_bundle(TimeGrid(0.5, 3), 2, 4, GAUSSIAN, GAUSSIAN, seed=21)
    path = tmp_path / "bundle.bin"
    dump_bundle(bundle, path)
    _assert_same_bundle(load_bundle(path), bundle)

    agents = sample_bundle(TimeGrid(0.5, 3), 2, 4, GAUSSIAN, GAUSSIAN, seed=21, agent_kind=STREAM_KIND_LIMIT_AGENT)
    dump_bundle(agents, path)
    assert load_bundle(path).agent_kind == STREAM_KIND_LIMIT_AGENT


def test_truncated_bundle_file_is_an_io_error(tmp_path: Path) -> None:
    bundle = sample_bundle(TimeGrid(0.5, 3), 2, 4, GAUSSIAN, GAUSSIAN, seed=21)
    path = tmp_path / "bundle.bin"
    dump_bundle(bundle, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ArtifactIOError):
        load_bundle(path)
    (tmp_path / "junk.bin").write_bytes(b"not a bundle at all, just bytes")
    with pytest.raises(ArtifactIOError):
        load_bundle(tmp_path / "junk.bin")


def test_sorted_w2_equals_best_permutation() -> None:
    rng = np.random.default_rng(4)
    for _ in range(20):
        a, b = rng.normal(size=5), rng.normal(size=5)
        best = min(np.mean((a - b[list(perm)]) ** 2) for perm in itertools.permutations(range(5)))
        assert float(w2_squared_sorted(a, b)) == pytest.approx(best, rel=1e-12, abs=1e-15)


def test_w2_of_a_shifted_sample_is_the_shift() -> None:
    a = np.random.default_rng(5).normal(size=50)
    assert w2_distance_empirical(a, a + 0.25) == pytest.approx(0.25)
    assert w2_distance_empirical(a, a[::-1]) == 0.0


def test_w2_size_mismatch() -> None:
    with pytest.raises(SizeMismatchError):
        w2_distance_empirical(np.zeros(3), np.zeros(4))


def test_pairing_bound_holds_for_random_couplings() -> None:
    rng = np.random.default_rng(6)
    for _ in range(200):
        a = ParticleEnsemble(0, rng.normal(size=16))
        b = ParticleEnsemble(0, rng.normal(1.0, 2.0, size=16))
        w2_sq, paired = pairing_bound_check(a, b)
        assert w2_sq <= paired * (1.0 + 1e-12) + 1e-15


def test_pairing_bound_requires_one_scenario() -> None:
    with pytest.raises(ScenarioMismatchError):
        pairing_bound_check(ParticleEnsemble(0, np.zeros(3)), ParticleEnsemble(1, np.zeros(3)))
    with pytest.raises(SizeMismatchError):
        pairing_bound_check(ParticleEnsemble(0, np.zeros(3)), ParticleEnsemble(0, np.zeros(4)))


def test_ensemble_rejects_empty_states() -> None:
    with pytest.raises(EmptyBundleError):
        ParticleEnsemble(0, np.array([]))


def test_ensemble_moments_and_summary() -> None:
    states = np.array([[1.0, 3.0], [0.0, 2.0]])
    ensemble = ensemble_of(states, 1)
    assert ensemble.mean == 1.0
    assert ensemble.second_moment == 2.0
    assert measure_summary(ensemble, constant_kernel(0.7)) == 0.7
