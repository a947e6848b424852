"""Discrete-time small-signal model of a group of inverter-based DGs."""
import logging
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from ..errors import SimulationError

logger = logging.getLogger(__name__)

Discretization = Literal["exact", "euler"]

# Per-DG state layout
ANGLE, FREQ, VOLT, CURR = range(4)
STATES_PER_DG = 4
INPUTS_PER_DG = 2  # control reference, demand-coupled input
PHASES = ("a", "b", "c")


def channel_names(bus_count: int, dg_count: int) -> tuple[str, ...]:
    """Output channel names: K bus channels each for v_pu, delta and f, then per DG
    the three-phase voltage, current and THD."""
    names = [f"v_pu_{k}" for k in range(bus_count)]
    names += [f"delta_{k}" for k in range(bus_count)]
    names += [f"f_{k}" for k in range(bus_count)]
    for j in range(dg_count):
        for kind in ("v", "i", "thd"):
            names += [f"dg{j}_{kind}_{ph}" for ph in PHASES]
    return tuple(names)


def dg_channel_slice(bus_count: int, dg: int) -> slice:
    """Slice of the nine three-phase channels that belong to `dg`."""
    start = 3 * bus_count + 9 * dg
    return slice(start, start + 9)


def discretize(
    a: NDArray[np.float64], b: NDArray[np.float64], dt: float, method: Discretization
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Discretize continuous dynamics `x' = a x + b u` with step `dt`.

    The exact method takes the matrix exponential of the augmented matrix
    `[[a, b], [0, 0]] * dt`; the Euler method uses `I + a dt` and `b dt`.
    """
    if dt <= 0:
        raise ValueError(f"Time step must be positive, got {dt}")

    m, n_in = b.shape
    if method == "euler":
        return np.eye(m) + a * dt, b * dt
    if method != "exact":
        raise ValueError(f"Unknown discretization '{method}'")

    aug = np.zeros((m + n_in, m + n_in))
    aug[:m, :m] = a
    aug[:m, m:] = b
    phi = expm(aug * dt)
    return phi[:m, :m], phi[:m, m:]


@dataclass
class DgModel:
    """Linear DG model `dx/dt = A~ x + B u`, `y = C x`.

    The output feedback `u_fb = K y` is already folded into `A~`.

    Outputs are deviations from the nominal operating point `y0`.
    """

    a_tilde: NDArray[np.float64]
    b_mat: NDArray[np.float64]
    c_mat: NDArray[np.float64]
    k_mat: NDArray[np.float64]
    dt: float
    y0: NDArray[np.float64]
    bus_count: int
    dg_count: int
    method: Discretization = "exact"

    ad: NDArray[np.float64] = field(init=False, repr=False)
    bd: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self):
        """Check dimensions, discretize and check the nominal stability."""
        m = self.a_tilde.shape[0]
        if self.a_tilde.shape != (m, m):
            raise ValueError(f"A~ must be square, got {self.a_tilde.shape}")
        if self.b_mat.shape[0] != m:
            raise ValueError(f"B needs {m} rows, got {self.b_mat.shape[0]}")
        if self.c_mat.shape[1] != m:
            raise ValueError(f"C needs {m} columns, got {self.c_mat.shape[1]}")
        if self.k_mat.shape != (self.b_mat.shape[1], self.c_mat.shape[0]):
            raise ValueError(
                f"K must be {self.b_mat.shape[1]}x{self.c_mat.shape[0]}, "
                f"got {self.k_mat.shape}"
            )
        if self.y0.shape != (self.c_mat.shape[0],):
            raise ValueError("y0 must have one entry per output")
        if self.c_mat.shape[0] != 3 * self.bus_count + 9 * self.dg_count:
            raise ValueError("Output count must be 3K + 9N")

        self.ad, self.bd = discretize(self.a_tilde, self.b_mat, self.dt, self.method)
        radius = self.spectral_radius()
        if radius >= 1:
            raise ValueError(
                f"Discretized model is unstable (spectral radius {radius})"
            )

    @property
    def state_dim(self) -> int:
        """Number of states m."""
        return self.a_tilde.shape[0]

    @property
    def output_dim(self) -> int:
        """Number of outputs n."""
        return self.c_mat.shape[0]

    @property
    def input_dim(self) -> int:
        """Number of exogenous inputs."""
        return self.b_mat.shape[1]

    @property
    def channels(self) -> tuple[str, ...]:
        """Names of the output channels."""
        return channel_names(self.bus_count, self.dg_count)

    def spectral_radius(self) -> float:
        """Largest eigenvalue magnitude of the discretized state matrix."""
        return float(np.max(np.abs(np.linalg.eigvals(self.ad))))

    def control_input(self, dg: int) -> int:
        """Index of the control-reference input of `dg`."""
        return INPUTS_PER_DG * dg

    def demand_input(self, dg: int) -> int:
        """Index of the demand-coupled input of `dg`."""
        return INPUTS_PER_DG * dg + 1

    def state_index(self, dg: int, kind: int) -> int:
        """Index of state `kind` (ANGLE, FREQ, VOLT, CURR) of `dg`."""
        return STATES_PER_DG * dg + kind


def step(
    model: DgModel,
    state: NDArray[np.float64],
    u: NDArray[np.float64],
    t: Optional[float] = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Advance the model by one sample.

    Args:
        model: The discretized model.
        state: Current state deviation, shape (m,).
        u: Exogenous input held over the step, shape (n_in,).
        t: Simulation time, used only in error messages.

    Returns:
        The next state and the output `C state` of the current state.

    Raises:
        SimulationError: If the next state is not finite.
    """
    if state.shape != (model.state_dim,):
        raise ValueError(f"Expected state of shape ({model.state_dim},)")
    if u.shape != (model.input_dim,):
        raise ValueError(f"Expected input of shape ({model.input_dim},)")

    y = model.c_mat @ state
    nxt = model.ad @ state + model.bd @ u
    if not np.all(np.isfinite(nxt)):
        raise SimulationError(t if t is not None else float("nan"), "state diverged")
    return nxt, y


def synthetic_dg_model(
    dg_count: int = 4,
    bus_count: int = 6,
    dt: float = 1e-3,
    seed: int = 0,
    method: Discretization = "exact",
    coupling: float = 1.0,
    droop: float = 2.0,
) -> DgModel:
    """Generate a random, stable DG model.

    Each DG owns angle, frequency, voltage and current states. The open-loop matrix
    is `-D + (S - S^T) / 2` with positive decay rates `D`, so its symmetric part is
    negative definite; the frequency droop feedback keeps it that way.

    Args:
        dg_count: Number of DGs N.
        bus_count: Number of monitored buses K.
        dt: Sample time in seconds.
        seed: Seed for the random matrices.
        method: Discretization method.
        coupling: Scale of the weak inter-DG coupling.
        droop: Frequency droop gain from bus frequency to control reference.
    """
    rng = np.random.default_rng(seed)
    m = STATES_PER_DG * dg_count
    n_in = INPUTS_PER_DG * dg_count

    rates = rng.uniform(20.0, 60.0, size=m)
    skew = coupling * rng.normal(size=(m, m))
    for j in range(dg_count):
        block = slice(STATES_PER_DG * j, STATES_PER_DG * (j + 1))
        skew[block, block] = 10.0 * rng.normal(size=(STATES_PER_DG, STATES_PER_DG))
    a_open = -np.diag(rates) + (skew - skew.T) / 2

    b = np.zeros((m, n_in))
    for j in range(dg_count):
        b[STATES_PER_DG * j + FREQ, INPUTS_PER_DG * j] = 20.0
        b[STATES_PER_DG * j + CURR, INPUTS_PER_DG * j + 1] = 20.0
        b[STATES_PER_DG * j + VOLT, INPUTS_PER_DG * j + 1] = 6.0

    n = 3 * bus_count + 9 * dg_count
    c = np.zeros((n, m))
    y0 = np.zeros(n)
    for k in range(bus_count):
        j = k % dg_count
        c[k, STATES_PER_DG * j + VOLT] = 0.05
        c[bus_count + k, STATES_PER_DG * j + ANGLE] = 1.0
        c[2 * bus_count + k, STATES_PER_DG * j + FREQ] = 0.5
        y0[k] = 1.0
        y0[bus_count + k] = -0.05 * k
        y0[2 * bus_count + k] = 60.0
    phase_gain = np.array([1.0, 0.98, 1.02])
    for j in range(dg_count):
        rows = dg_channel_slice(bus_count, j)
        base = rows.start
        for p in range(3):
            c[base + p, STATES_PER_DG * j + VOLT] = 0.1 * phase_gain[p]
            c[base + p, STATES_PER_DG * j + ANGLE] = 0.02
            c[base + 3 + p, STATES_PER_DG * j + CURR] = 0.5 * phase_gain[p]
            c[base + 3 + p, STATES_PER_DG * j + FREQ] = 0.05
        y0[base : base + 3] = 1.0
        y0[base + 3 : base + 6] = 0.5
        y0[base + 6 : base + 9] = 0.02

    # Droop: control reference of DG j reacts to the frequency of bus j
    k_mat = np.zeros((n_in, n))
    for j in range(min(dg_count, bus_count)):
        k_mat[INPUTS_PER_DG * j, 2 * bus_count + j] = -droop
    a_tilde = a_open + b @ k_mat @ c

    model = DgModel(
        a_tilde=a_tilde,
        b_mat=b,
        c_mat=c,
        k_mat=k_mat,
        dt=dt,
        y0=y0,
        bus_count=bus_count,
        dg_count=dg_count,
        method=method,
    )
    logger.debug(
        f"Synthetic DG model: m={m}, n={n}, spectral radius "
        f"{model.spectral_radius():.6f}"
    )
    return model
