"""Named parameter sets used throughout the tests and the CLI."""

from .maps import GrhtMap, HenonMap, QuadFixtureMap

__all__ = ["PRESETS", "get_preset", "preset_names"]


def _param1():
    return GrhtMap(lam=4 / 5, sigma=5 / 4, c2=-0.5, d1=1.0, d5=1.0)


def _param2():
    return GrhtMap(lam=-4 / 5, sigma=-5 / 4, c2=-0.5, d1=1.0, d5=1.0)


def _param3():
    return GrhtMap(lam=4 / 5, sigma=-5 / 4, c2=-0.5, d1=1.0, d5=1.0)


def _param4():
    return GrhtMap(lam=-4 / 5, sigma=5 / 4, c2=-0.5, d1=-1.0, d5=1.0)


def _toy_unfold():
    # resonant unfolding base point: a1 = 0.2 with b1 = -a1
    return GrhtMap(lam=0.8, sigma=1.25, c2=-0.5, d1=1.0, d5=1.0,
                   a1=0.2, b1=-0.2)


def _toy_unfold_linear():
    # same family with resonance terms switched off (analytically solvable)
    return GrhtMap(lam=0.8, sigma=1.25, c2=-0.5, d1=1.0, d5=1.0)


def _lc_example():
    # the parameter set used for the critical-curve / basin-boundary study
    return GrhtMap(lam=3 / 5, sigma=5 / 3, c2=-0.8, d1=1.0, d5=0.8)


def _ghm_tangle():
    return HenonMap(alpha=-0.4, beta=0.8, R=0.08, S=-0.125)


def _ghm_neutral():
    return HenonMap(alpha=0.8145, beta=0.8055, R=0.1170465574, S=0.3)


def _fixture_quadratic():
    return QuadFixtureMap(a=0.5, b=-2.0)


PRESETS = {
    "param1": _param1,
    "param2": _param2,
    "param3": _param3,
    "param4": _param4,
    "toy-unfold": _toy_unfold,
    "toy-unfold-linear": _toy_unfold_linear,
    "lc-example": _lc_example,
    "ghm-tangle": _ghm_tangle,
    "ghm-neutral": _ghm_neutral,
    "fixture-quadratic": _fixture_quadratic,
}


def get_preset(name: str):
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {preset_names()}")


def preset_names():
    return sorted(PRESETS)
