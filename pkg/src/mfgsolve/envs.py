"""Environment abstraction and the malware-spread benchmark.

An :class:`EnvModel` exposes the stage game in two flavors:

- an exact transition kernel ``kernel(x, a, z) -> distribution over types``
  used by the ground-truth solver and the deterministic mean-field update;
- a black-box sampler used by the model-free solver, which by default draws
  from the kernel via inverse-CDF so both solvers face statistically
  identical dynamics.  Environments may ship a sampler only, which locks
  out the exact solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import _frozen


class KernelUnavailableError(RuntimeError):
    """Raised when an operation needs the exact kernel and the environment
    only provides sample access."""


@dataclass(frozen=True)
class EnvModel:
    """Stage game: type/action spaces, reward, and transition access.

    ``reward_fn(z)`` returns the (n_types, n_actions) reward matrix at mean
    field z; ``kernel_fn(z)``, when present, returns the (n_types,
    n_actions, n_types) transition tensor.  ``sampler_fn(x, a, z, n, rng)``
    draws n next types; when omitted it is derived from the kernel.
    """

    name: str
    n_types: int
    n_actions: int
    discount: float
    horizon: int
    reward_fn: Callable[[np.ndarray], np.ndarray]
    kernel_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sampler_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.n_types < 2 or self.n_actions < 1:
            raise ValueError("need n_types >= 2 and n_actions >= 1")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.kernel_fn is None and self.sampler_fn is None:
            raise ValueError("environment needs a kernel or a sampler")

    @property
    def has_kernel(self) -> bool:
        return self.kernel_fn is not None

    def reward_matrix(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(self.reward_fn(np.asarray(z, float)), dtype=np.float64)

    def reward(self, x: int, a: int, z: np.ndarray) -> float:
        return float(self.reward_matrix(z)[x, a])

    def kernel_tensor(self, z: np.ndarray) -> np.ndarray:
        if self.kernel_fn is None:
            raise KernelUnavailableError(
                f"environment {self.name!r} provides sample access only")
        k = np.asarray(self.kernel_fn(np.asarray(z, float)), dtype=np.float64)
        if k.shape != (self.n_types, self.n_actions, self.n_types):
            raise ValueError(f"kernel tensor has shape {k.shape}")
        return k

    def kernel_row(self, x: int, a: int, z: np.ndarray) -> np.ndarray:
        return self.kernel_tensor(z)[x, a]

    def sample_many(self, x: int, a: int, z: np.ndarray, n: int,
                    rng: np.random.Generator) -> np.ndarray:
        """Draw n next types for (x, a, z); reproducible given the stream."""
        if self.sampler_fn is not None:
            out = np.asarray(self.sampler_fn(x, a, z, n, rng), dtype=np.int64)
            if out.shape != (n,):
                raise ValueError(f"sampler returned shape {out.shape}")
            return out
        cdf = np.cumsum(self.kernel_row(x, a, z))
        draws = np.searchsorted(cdf, rng.random(n), side="right")
        return np.minimum(draws, self.n_types - 1).astype(np.int64)

    def sample(self, x: int, a: int, z: np.ndarray,
               rng: np.random.Generator) -> int:
        return int(self.sample_many(x, a, z, 1, rng)[0])


def sample_transition(env: EnvModel, x: int, a: int, z: np.ndarray,
                      rng: np.random.Generator) -> int:
    """Draw one next type from the environment's transition law."""
    return env.sample(x, a, z, rng)


@dataclass(frozen=True)
class MalwareParams:
    """Parameters of the malware-spread game.

    Types: 0 = healthy, 1 = infected.  Actions: 0 = do nothing, 1 = repair.
    A healthy node that does nothing gets infected with probability
    ``infection_prob``; repairing returns any node to healthy.  Per-stage
    reward is -(k + z(1)) * x - repair_cost * a: being infected costs more
    when a larger fraction z(1) of the population is infected.
    """

    k: float = 0.2
    repair_cost: float = 0.5
    infection_prob: float = 0.9
    discount: float = 0.9
    horizon: int = 60

    def __post_init__(self):
        if self.k < 0.0 or self.repair_cost < 0.0:
            raise ValueError("k and repair_cost must be >= 0")
        if not 0.0 <= self.infection_prob <= 1.0:
            raise ValueError(f"infection_prob must be in [0, 1], "
                             f"got {self.infection_prob}")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")


def malware_env(params: MalwareParams | None = None) -> EnvModel:
    """Two-type infection/repair game.

    The kernel does not depend on the mean field; only the reward couples
    to z, through the infected fraction z(1).
    """
    p = params or MalwareParams()

    kernel = np.zeros((2, 2, 2))
    kernel[0, 0] = (1.0 - p.infection_prob, p.infection_prob)
    kernel[1, 0] = (0.0, 1.0)
    kernel[:, 1, 0] = 1.0  # repair resets to healthy
    kernel = _frozen(kernel)

    def reward_fn(z: np.ndarray) -> np.ndarray:
        r = np.empty((2, 2))
        infected_cost = p.k + z[1]
        r[0, 0] = 0.0
        r[0, 1] = -p.repair_cost
        r[1, 0] = -infected_cost
        r[1, 1] = -infected_cost - p.repair_cost
        return r

    return EnvModel(
        name="malware",
        n_types=2,
        n_actions=2,
        discount=p.discount,
        horizon=p.horizon,
        reward_fn=reward_fn,
        kernel_fn=lambda z: kernel,
    )


class UnknownEnvironmentError(KeyError):
    pass


def _build_malware(params: dict) -> EnvModel:
    try:
        return malware_env(MalwareParams(**params))
    except TypeError as exc:
        raise ValueError(f"bad malware parameters: {exc}") from exc


ENVIRONMENTS: dict[str, Callable[[dict], EnvModel]] = {
    "malware": _build_malware,
}


def make_env(name: str, params: dict) -> EnvModel:
    """Construct a registered environment from config parameters."""
    try:
        builder = ENVIRONMENTS[name]
    except KeyError:
        known = ", ".join(sorted(ENVIRONMENTS))
        raise UnknownEnvironmentError(
            f"unknown environment {name!r} (known: {known})") from None
    return builder(dict(params))
