import pytest

from ncpick.config import DEFAULT_SETTINGS, Settings


def test_defaults() -> None:
    assert DEFAULT_SETTINGS.tol_psd == 1e-9
    assert DEFAULT_SETTINGS.tol_interp == 1e-6
    assert DEFAULT_SETTINGS.k_out == 8
    assert DEFAULT_SETTINGS.to_json()["depth_cap"] == 200
    assert DEFAULT_SETTINGS.kernel_depth_cap == 5000


def test_replace_skips_none() -> None:
    s = DEFAULT_SETTINGS.replace(tol_psd=None, k_out=3)
    assert s.tol_psd == DEFAULT_SETTINGS.tol_psd
    assert s.k_out == 3


def test_validation() -> None:
    with pytest.raises(ValueError):
        Settings(tol_psd=0.0)
    with pytest.raises(ValueError):
        Settings(depth_cap=-1)
    with pytest.raises(ValueError):
        Settings(tol_interp=float("inf"))
    with pytest.raises(ValueError):
        Settings.from_mapping({"K": float("inf")})


def test_from_mapping_instance_layout() -> None:
    s = Settings.from_mapping({"tolerances": {"psd": 1e-7, "interp": 1e-5}, "K": 12})
    assert (s.tol_psd, s.tol_interp, s.k_out) == (1e-7, 1e-5, 12)
    assert Settings.from_mapping({"depth_cap": 50.0}).depth_cap == 50
    with pytest.raises(ValueError):
        Settings.from_mapping({"colour": "blue"})
    with pytest.raises(ValueError):
        Settings.from_mapping({"K": 2.5})


def test_from_mapping_layers_on_base() -> None:
    base = Settings(k_out=4)
    assert Settings.from_mapping({"tol_series": 1e-6}, base).k_out == 4


def test_from_env(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("NCPICK_TOL_PSD", "1e-6")
    monkeypatch.setenv("NCPICK_K_OUT", "5")
    s = Settings.from_env(dotenv=False)
    assert s.tol_psd == 1e-6
    assert s.k_out == 5


def test_from_env_rejects_garbage(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("NCPICK_DEPTH_CAP", "lots")
    with pytest.raises(ValueError):
        Settings.from_env(dotenv=False)
