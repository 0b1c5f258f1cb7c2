from __future__ import annotations

from pathlib import Path

import pytest

from src.catalog import CATALOG, build_model, catalog_names, load_model
from src.config import load_run_config
from src.errors import AssumptionViolation, ConfigError


CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


def test_catalog_names_are_sorted() -> None:
    names = catalog_names()
    assert names == sorted(names)
    assert {"lq_weak", "lq_weak_alt", "lq_decoupled", "lq_unit", "trivial", "smooth_weak"} <= set(names)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_every_catalog_instance_builds(name: str) -> None:
    spec = load_model(name)
    assert spec.name == name
    assert spec.horizon == 1.0


def test_catalog_prefix_is_accepted() -> None:
    assert load_model("catalog:lq_unit").name == "lq_unit"
    with pytest.raises(ConfigError) as excinfo:
        load_model("catalog:nope")
    assert "lq_weak" in excinfo.value.details["catalog"]


def test_missing_model_file() -> None:
    with pytest.raises(ConfigError):
        load_model("does/not/exist.toml")


def test_lq_model_file_round_trips_into_lq_source(tmp_path: Path) -> None:
    path = tmp_path / "m.toml"
    path.write_text(
        'kind = "lq"\nname = "mine"\nhorizon = 2.0\n'
        "[coefficients]\nQ = 1.0\nR = 2.0\nG = 0.5\n"
        '[init_minor]\nfamily = "gaussian"\nmean = 0.1\nstd = 0.2\n'
    )
    spec = load_model(path)
    assert spec.name == "mine"
    assert spec.horizon == 2.0
    assert spec.lq_source is not None
    assert spec.lq_source.R == 2.0
    assert spec.init_minor.family == "gaussian"


def test_generic_model_file_has_no_lq_source(tmp_path: Path) -> None:
    path = tmp_path / "g.toml"
    path.write_text(
        'kind = "generic"\n'
        "[sigma0]\nintercept = 0.3\n"
        '[minor_cost]\nkind = "quadratic_plus_smooth"\nR = 1.0\nkappa = 0.5\n'
    )
    spec = load_model(path)
    assert spec.lq_source is None
    assert spec.minor_cost.control_curvature is None
    assert spec.major_cost.control_curvature == 1.0


def test_unparsable_model_file(tmp_path: Path) -> None:
    path = tmp_path / "bad.toml"
    path.write_text("kind = [unterminated\n")
    with pytest.raises(ConfigError):
        load_model(path)


def test_unknown_kind_and_coefficients_are_rejected() -> None:
    with pytest.raises(ConfigError):
        build_model({"kind": "quartic"})
    with pytest.raises(ConfigError) as excinfo:
        build_model({"kind": "lq", "coefficients": {"Q": 1.0, "zeta": 2.0}})
    assert excinfo.value.details["unknown"] == ["zeta"]


def test_malformed_tabulated_coefficient() -> None:
    document = {"kind": "generic", "b": {"kind": "tabulated", "times": [0.0, 1.0], "slope_x": [1.0]}}
    with pytest.raises(ConfigError):
        build_model(document)
    with pytest.raises(ConfigError):
        build_model({"kind": "generic", "b": {"kind": "constant", "kernel_slope": 0.1}})


def test_non_positive_control_weight_breaks_assumptions() -> None:
    with pytest.raises(AssumptionViolation) as excinfo:
        build_model({"kind": "generic", "minor_cost": {"R": -1.0}})
    assert "minor_cost.R must be positive" in excinfo.value.details["violations"]


def test_smooth_instance_has_no_closed_form_curvature() -> None:
    spec = load_model("smooth_weak")
    assert spec.minor_cost.control_curvature is None
    assert spec.major_cost.control_curvature == 1.0


@pytest.mark.parametrize("name", ["lq_weak.toml", "smooth_generic.toml"])
def test_shipped_model_files_build(name: str) -> None:
    spec = load_model(CONFIG_DIR / "models" / name)
    assert spec.horizon == 1.0


def test_shipped_file_matches_catalog_instance() -> None:
    from_file = load_model(CONFIG_DIR / "models" / "lq_weak.toml").lq_source
    from_catalog = load_model("lq_weak").lq_source
    for name in ("a0", "c0", "e0", "s0", "Q0", "R0", "r0", "G0", "a", "c", "e", "s", "s_tilde", "Q", "R", "rho", "r",
                 "G"):
        assert getattr(from_file, name) == getattr(from_catalog, name), name


@pytest.mark.parametrize("name", ["solve.toml", "oracle_check.toml", "nash.toml", "validate.toml"])
def test_shipped_run_configs_load(name: str) -> None:
    config = load_run_config(CONFIG_DIR / name)
    assert config.model
