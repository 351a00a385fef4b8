"""Network configuration: populations, weights, rates, inputs and sizes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .activation import Activation
from .errors import ConfigError

MARKOV_RATES = ("scaled", "literal", "quiescent")


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ConfigError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NetworkConfig:
    """An ``M``-population network.

    ``w[i, j]`` is the effective weight of population ``j`` onto population
    ``i``. Sizes are stored as inverse sizes ``inv_sizes[i] = 1 / N_i`` so that
    the infinite network (``n = 0``) is representable.

    ``noise_exponent`` is the exponent ``g`` of the Langevin noise prefactor
    ``N_i ** -g``; ``markov_rate`` selects the up-rate convention of the
    Markov chain (see :func:`momentfield.stochastic.transition_rates`).
    """

    alpha: np.ndarray
    w: np.ndarray
    inputs: np.ndarray
    inv_sizes: np.ndarray
    activations: tuple[Activation, ...]
    noise_exponent: float = 1.0
    markov_rate: str = "scaled"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        alpha = _frozen(self.alpha, 1, "alpha")
        m = alpha.size
        if m < 1:
            raise ConfigError("need at least one population")
        w = _frozen(self.w, 2, "w")
        inputs = _frozen(self.inputs, 1, "inputs")
        inv = _frozen(np.broadcast_to(self.inv_sizes, (m,)), 1, "inv_sizes")
        if w.shape != (m, m) or inputs.shape != (m,):
            raise ConfigError(f"dimension mismatch: M={m}, w{w.shape}, I{inputs.shape}")
        if np.any(alpha <= 0):
            raise ConfigError("all relaxation rates alpha_i must be > 0")
        if np.any(inv < 0) or not np.all(np.isfinite(inv)):
            raise ConfigError("sizes must be positive (n = 1/N >= 0)")
        acts = self.activations
        if isinstance(acts, Activation):
            acts = (acts,) * m
        acts = tuple(acts)
        if len(acts) != m:
            raise ConfigError(f"need {m} activations, got {len(acts)}")
        if self.markov_rate not in MARKOV_RATES:
            raise ConfigError(f"markov_rate must be one of {MARKOV_RATES}")
        for name, val in (("alpha", alpha), ("w", w), ("inputs", inputs), ("inv_sizes", inv), ("activations", acts)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "_shared_act", all(a == acts[0] for a in acts))

    # ------------------------------------------------------------------ props
    @property
    def M(self) -> int:
        return self.alpha.size

    @property
    def sizes(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.inv_sizes

    @property
    def n(self) -> float:
        """The common inverse size, when all populations have the same size."""
        if np.ptp(self.inv_sizes) > 0:
            raise ConfigError("populations have different sizes; use inv_sizes")
        return float(self.inv_sizes[0])

    def int_sizes(self) -> np.ndarray:
        sizes = self.sizes
        r = np.rint(sizes)
        if not np.all(np.isfinite(sizes)) or np.any(np.abs(sizes - r) > 1e-9) or np.any(r < 1):
            raise ConfigError(f"Markov simulation needs integer sizes >= 1, got {sizes}")
        return r.astype(np.int64)

    # --------------------------------------------------------------- updates
    def with_input(self, i: int, value: float) -> "NetworkConfig":
        inputs = np.array(self.inputs)
        inputs[i] = value
        return replace(self, inputs=inputs)

    def with_inputs(self, inputs) -> "NetworkConfig":
        return replace(self, inputs=np.asarray(inputs, dtype=float))

    def with_n(self, n: float) -> "NetworkConfig":
        return replace(self, inv_sizes=np.full(self.M, float(n)))

    def with_size(self, size: float) -> "NetworkConfig":
        return self.with_n(1.0 / size)

    def with_param(self, name: str, value: float) -> "NetworkConfig":
        """Set a scalar parameter by name.

        Names: ``I<k>`` (input, 1-based), ``n``, ``N``, ``alpha`` (all rates),
        ``alpha<k>``, ``w`` (one-population weight), ``w<i><j>`` (1-based),
        ``p`` (homotopy parameter of every shifted-sigmoid activation).
        """
        if name == "n":
            return self.with_n(value)
        if name == "N":
            return self.with_size(value)
        if name == "I" and self.M == 1:
            return self.with_input(0, value)
        if name.startswith("I") and name[1:].isdigit():
            return self.with_input(int(name[1:]) - 1, value)
        if name == "alpha":
            return replace(self, alpha=np.full(self.M, float(value)))
        if name.startswith("alpha") and name[5:].isdigit():
            a = np.array(self.alpha)
            a[int(name[5:]) - 1] = value
            return replace(self, alpha=a)
        if name == "w" and self.M == 1:
            return replace(self, w=np.array([[float(value)]]))
        if name.startswith("w") and len(name) == 3 and name[1:].isdigit():
            w = np.array(self.w)
            w[int(name[1]) - 1, int(name[2]) - 1] = value
            return replace(self, w=w)
        if name == "p":
            acts = tuple(
                Activation(a.kind, {**a.params, "p": float(value)}) if a.kind == "shifted-sigmoid" else a
                for a in self.activations
            )
            return replace(self, activations=acts)
        raise ConfigError(f"unknown parameter name {name!r}")

    def get_param(self, name: str) -> float:
        if name == "n":
            return self.n
        if name == "N":
            return 1.0 / self.n
        if name == "I" and self.M == 1:
            return float(self.inputs[0])
        if name.startswith("I") and name[1:].isdigit():
            return float(self.inputs[int(name[1:]) - 1])
        if name == "alpha":
            return float(self.alpha[0])
        if name.startswith("alpha") and name[5:].isdigit():
            return float(self.alpha[int(name[5:]) - 1])
        if name == "w" and self.M == 1:
            return float(self.w[0, 0])
        if name.startswith("w") and len(name) == 3 and name[1:].isdigit():
            return float(self.w[int(name[1]) - 1, int(name[2]) - 1])
        if name == "p":
            return float(self.activations[0].params.get("p", 0.0))
        raise ConfigError(f"unknown parameter name {name!r}")

    # ------------------------------------------------------------ evaluation
    def act_derivs(self, s: np.ndarray, order: int) -> np.ndarray:
        """``[f_i^(k)(s_i)]`` as an ``(order + 1, M)`` array."""
        if self._shared_act:
            return self.activations[0].derivs(s, order)
        return np.stack([a.derivs(si, order) for a, si in zip(self.activations, s)], axis=1)

    # ------------------------------------------------------------ serialise
    def to_dict(self) -> dict:
        d = {
            "M": self.M,
            "alpha": self.alpha.tolist(),
            "w": self.w.tolist(),
            "I": self.inputs.tolist(),
        }
        if np.ptp(self.inv_sizes) == 0:
            d["n"] = float(self.inv_sizes[0])
        else:
            d["N"] = self.sizes.tolist()
        if self._shared_act:
            d["activation"] = self.activations[0].to_dict()
        else:
            d["activation"] = [a.to_dict() for a in self.activations]
        d["noise_exponent"] = self.noise_exponent
        d["markov_rate"] = self.markov_rate
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        try:
            alpha = np.atleast_1d(np.asarray(d["alpha"], dtype=float))
            m = int(d.get("M", alpha.size))
            if alpha.size == 1 and m > 1:
                alpha = np.full(m, alpha[0])
            w = np.atleast_2d(np.asarray(d["w"], dtype=float))
            inputs = np.atleast_1d(np.asarray(d["I"], dtype=float))
            if "N" in d and "n" in d:
                raise ConfigError("give either N or n, not both")
            if "N" in d:
                sizes = np.atleast_1d(np.asarray(d["N"], dtype=float))
                if np.any(sizes < 1):
                    raise ConfigError("population sizes N_i must be >= 1")
                inv = np.broadcast_to(1.0 / sizes, (m,))
            else:
                inv = np.full(m, float(d.get("n", 0.0)))
            act = d.get("activation", {"kind": "logistic"})
            if isinstance(act, list):
                acts = tuple(Activation.from_dict(a) for a in act)
            else:
                acts = (Activation.from_dict(act),) * m
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid network config: {exc!r}") from exc
        if alpha.size != m:
            raise ConfigError(f"M={m} but alpha has {alpha.size} entries")
        return cls(
            alpha=alpha,
            w=w,
            inputs=inputs,
            inv_sizes=inv,
            activations=acts,
            noise_exponent=float(d.get("noise_exponent", 1.0)),
            markov_rate=str(d.get("markov_rate", "scaled")),
            meta={k: v for k, v in d.items() if k in ("name", "description")},
        )


def load_config(path) -> NetworkConfig:
    """Read a JSON network file; syntax errors carry line and column."""
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return NetworkConfig.from_dict(d)


def builtin_config(name: str) -> NetworkConfig:
    """Load one of the shipped configs (``model1``, ``model2``, ``onepop``, ``hopf_tanh``)."""
    ref = resources.files("momentfield") / "data" / f"{name}.json"
    if not ref.is_file():
        raise ConfigError(f"no built-in config named {name!r}")
    return NetworkConfig.from_dict(json.loads(ref.read_text()))


def resolve_config(name_or_path) -> NetworkConfig:
    p = Path(name_or_path)
    if p.exists():
        return load_config(p)
    return builtin_config(str(name_or_path).removesuffix(".json"))


def model1(I1: float = -0.5, n: float = 0.0) -> NetworkConfig:
    return builtin_config("model1").with_input(0, I1).with_n(n)


def model2(I1: float = 0.0, I2: float = 0.0, n: float = 0.0) -> NetworkConfig:
    return builtin_config("model2").with_inputs([I1, I2]).with_n(n)


def one_population(w=10.0, alpha=1.0, I=-5.0, n=0.0, activation: Activation | None = None) -> NetworkConfig:
    return NetworkConfig(
        alpha=[alpha], w=[[w]], inputs=[I], inv_sizes=[n], activations=(activation or Activation.logistic(),)
    )
