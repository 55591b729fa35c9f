"""
Pydantic models for taulab parameters, check results and run manifests.

Array-valued types (grids, realizations, symbols) live as frozen dataclasses
in the numeric modules that own them; the models here carry real scalars and
JSON-serializable run records only.
"""

import math
import uuid
from datetime import datetime, timezone
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator
from scipy import special

from . import __version__
from .errors import DomainError

RunStatus = Literal["queued", "running", "completed", "failed"]


def _near_integer(value: float, tol: float = 1e-12) -> bool:
    return abs(value - round(value)) < tol


class BesselParams(BaseModel):
    """Hard-edge Bessel symbol parameters."""
    model_config = ConfigDict(frozen=True)

    nu: float = Field(0.0, gt=-1.0)
    N: int = Field(30, ge=1)
    weight_cap: int = Field(10, ge=0)


class EllipticParams(BaseModel):
    """Modulus, quarter periods and lattice invariants of the Lame lattice."""
    model_config = ConfigDict(frozen=True)

    k2: float = Field(gt=0.0, lt=1.0)
    K: float
    Kp: float
    e1: float
    e2: float
    e3: float
    g2: float
    g3: float

    @computed_field
    @property
    def k(self) -> float:
        return math.sqrt(self.k2)

    @classmethod
    def from_k2(cls, k2: float) -> "EllipticParams":
        """
        Build the lattice data from the squared modulus.

        Args:
            k2: k^2 in (0, 1)

        Returns:
            EllipticParams with K, K' from the complete elliptic integral and
            e_i, g2, g3 from their polynomial expressions in k^2.
        """
        if not 0.0 < k2 < 1.0:
            raise DomainError(f"k^2 must lie in (0, 1), got {k2}", tag="elliptic-modulus")
        return cls(
            k2=k2,
            K=float(special.ellipk(k2)),
            Kp=float(special.ellipk(1.0 - k2)),
            e1=(2.0 - k2) / 3.0,
            e2=(2.0 * k2 - 1.0) / 3.0,
            e3=-(k2 + 1.0) / 3.0,
            g2=4.0 * (k2 * k2 - k2 + 1.0) / 3.0,
            g3=4.0 * (k2 - 2.0) * (2.0 * k2 - 1.0) * (k2 + 1.0) / 27.0,
        )


class PviParams(BaseModel):
    """Parameters of the Painleve VI linear pair."""
    model_config = ConfigDict(frozen=True)

    theta0: float
    theta1: float
    thetat: float
    z0: float
    z1: float
    zt: float
    u0: float
    u1: float
    ut: float
    t: float

    @field_validator("u0", "u1", "ut")
    @classmethod
    def _nonzero_gauge(cls, value: float) -> float:
        if value == 0.0:
            raise ValueError("u_nu must be nonzero")
        return value

    @field_validator("t")
    @classmethod
    def _regular_t(cls, value: float) -> float:
        if value in (0.0, 1.0):
            raise ValueError("t must differ from 0 and 1")
        return value

    @computed_field
    @property
    def theta_inf(self) -> float:
        return -2.0 * (self.z0 + self.z1 + self.zt) - (self.theta0 + self.theta1 + self.thetat)

    @model_validator(mode="after")
    def _non_resonant(self) -> "PviParams":
        theta = self.theta_inf
        if _near_integer(theta) and round(theta) != 0:
            raise ValueError(f"theta_inf = {theta} is a nonzero integer; the Laurent recurrence is resonant")
        return self

    @classmethod
    def triangular(
        cls,
        theta0: float,
        theta1: float,
        thetat: float,
        z0: float,
        z1: float,
        zt: float,
        u0: float,
        u1: float,
        t: float,
    ) -> "PviParams":
        """Choose u_t so that W_inf is lower triangular with eigenvalues +-theta_inf/2."""
        if zt == 0.0:
            raise ValueError("z_t must be nonzero to balance the (1,2) entry of W_inf")
        ut = -(u0 * z0 + u1 * z1) / zt
        return cls(
            theta0=theta0, theta1=theta1, thetat=thetat,
            z0=z0, z1=z1, zt=zt,
            u0=u0, u1=u1, ut=ut, t=t,
        )


class HgParams(BaseModel):
    """Parameters of the hypergeometric kernel, a + b = 0."""
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _hypotheses(self) -> "HgParams":
        if abs(self.a + self.b) > 1e-12:
            raise ValueError(f"a + b must vanish, got {self.a + self.b}")
        if -self.a * self.b <= 1.25:
            raise ValueError(f"-ab must exceed 5/4, got {-self.a * self.b}")
        if _near_integer(2.0 * math.sqrt(-self.a * self.b), 1e-10):
            raise ValueError("2 sqrt(-ab) must not be an integer")
        return self

    @property
    def c0(self) -> float:
        return self.c

    @property
    def c1(self) -> float:
        return self.a + self.b - self.c + 1.0

    @property
    def ab(self) -> float:
        return self.a * self.b

    @property
    def kappa(self) -> float:
        return math.sqrt(-self.ab)


class CheckResult(BaseModel):
    """Outcome of a single invariant or oracle check."""
    name: str
    module: str
    passed: bool
    error: Optional[float] = None
    tolerance: Optional[float] = None
    elapsed: float = 0.0
    detail: str = ""
    data: Dict[str, Any] = Field(default_factory=dict)


class SuiteReport(BaseModel):
    """Machine-readable verdict of a check run."""
    runId: str
    suite: str
    status: RunStatus
    passed: bool = False
    seed: int = 0
    tol: float = 0.0
    budget: float = 300.0
    elapsed: float = 0.0
    checks: List[CheckResult] = Field(default_factory=list)
    errors: List[str] = Field(default_factory=list)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]


class RunManifest(BaseModel):
    """Everything needed to reproduce one CLI invocation."""
    runId: str
    command: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)
    parameters: Dict[str, Any] = Field(default_factory=dict)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    truncations: Dict[str, Any] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    checks: List[CheckResult] = Field(default_factory=list)
    wall_time: float = 0.0
    version: str = __version__
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())


def generate_run_id() -> str:
    """run-<8 hex>-<epoch milliseconds>."""
    timestamp = int(datetime.now(timezone.utc).timestamp() * 1000)
    unique_id = str(uuid.uuid4())[:8]
    return f"run-{unique_id}-{timestamp}"
