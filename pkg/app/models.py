from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.errors import ConfigError

EXPERIMENTS = ("pilot-estimation", "spreading", "single-detection", "collective-detection", "multiuser", "fig3")
ExperimentName = Literal["pilot-estimation", "spreading", "single-detection", "collective-detection", "multiuser", "fig3"]

# Which SNR a grid means when the config does not say
DEFAULT_SNR_CONVENTION = {
    "pilot-estimation": "snr_hat",
    "spreading": "snr",
    "single-detection": "snr",
    "collective-detection": "snr",
    "multiuser": "snr",
    "fig3": "snr",
}


class ChannelConfig(BaseModel):
    """Gain model of the sub-channels.

    rayleigh: F(T_i) ~ CN(0, gain_variance). bounded: fixed gains t + it from
    the listed quadrature magnitudes, one per sub-channel.
    """

    kind: Literal["rayleigh", "bounded"] = "rayleigh"
    gain_variance: float = Field(1.0, gt=0)
    magnitudes: Optional[list[float]] = None
    n: Optional[int] = Field(None, ge=1)
    good_indices: Optional[list[int]] = None

    @staticmethod
    def parse_spec(text: str) -> dict:
        """`rayleigh:VAR` or `bounded:t0,t1,...` as raw config fields."""
        kind, _, arg = text.partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "rayleigh":
                return {"kind": "rayleigh", "gain_variance": float(arg) if arg else 1.0}
            if kind == "bounded":
                return {"kind": "bounded", "magnitudes": [float(t) for t in arg.split(",") if t]}
        except ValueError as e:
            raise ConfigError(f"invalid channel model {text!r}", "channel.model") from e
        raise ConfigError(f"unknown channel model {text!r}; expected rayleigh:VAR or bounded:LIST", "channel.model")

    @model_validator(mode="after")
    def check_bounded(self):
        if self.kind == "bounded":
            if not self.magnitudes:
                raise ConfigError("bounded model needs a non-empty gain list", "channel.magnitudes")
            if any(not 0 <= t <= 2**-0.5 + 1e-12 for t in self.magnitudes):
                raise ConfigError("bounded magnitudes must lie in [0, 1/sqrt(2)]", "channel.magnitudes")
            if self.n is not None and self.n != len(self.magnitudes):
                raise ConfigError(f"n={self.n} but {len(self.magnitudes)} gains listed", "channel.n")
        return self

    @property
    def size(self) -> int:
        if self.n is not None:
            return self.n
        if self.magnitudes:
            return len(self.magnitudes)
        return len(self.good_indices) if self.good_indices else 1


class PlanConfig(BaseModel):
    n: int = Field(..., ge=1)
    l: int = Field(..., ge=1)
    g: Optional[int] = Field(None, ge=1)
    good_indices: Optional[list[int]] = None

    @model_validator(mode="after")
    def fill_g(self):
        if self.g is None:
            self.g = self.n - self.l + 1
        if self.g + self.l - 1 != self.n:
            raise ConfigError(f"g + (l - 1) must equal n (g={self.g}, l={self.l}, n={self.n})", "plan.g")
        return self


class CodebookConfig(BaseModel):
    d: int = Field(2, ge=1)
    n_codewords: int = Field(2, ge=2)
    codeword_seed: int = Field(0, ge=0, lt=2**64)


class AllocationConfig(BaseModel):
    dims: list[int] = Field(..., min_length=1)
    k_in: Optional[int] = Field(None, ge=1)

    @field_validator("dims")
    @classmethod
    def positive_dims(cls, dims):
        if any(r < 1 for r in dims):
            raise ValueError("every user needs at least one dimension")
        return dims


class SimulationConfig(BaseModel):
    experiment: ExperimentName
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    plan: Optional[PlanConfig] = None
    codebook: Optional[CodebookConfig] = None
    allocation: Optional[AllocationConfig] = None
    measurement: str = "het"
    snr_grid: list[float] = Field(..., min_length=1)
    snr_convention: Optional[Literal["snr", "snr_hat"]] = None
    l_grid: list[int] = Field(default_factory=lambda: [1], min_length=1)
    k_grid: list[int] = Field(default_factory=lambda: [1], min_length=1)
    trials: int = Field(..., ge=1)
    master_seed: int = Field(..., ge=0, lt=2**64)
    output_path: Optional[str] = None
    output_format: Literal["csv", "json"] = "csv"

    @field_validator("snr_grid")
    @classmethod
    def positive_snr(cls, grid):
        if any(not s > 0 for s in grid):
            raise ValueError("SNR grid values must be > 0 (linear units)")
        return grid

    @field_validator("l_grid", "k_grid")
    @classmethod
    def positive_ints(cls, grid):
        if any(v < 1 for v in grid):
            raise ValueError("grid values must be >= 1")
        return grid

    @model_validator(mode="after")
    def check_experiment_sections(self):
        if self.snr_convention is None:
            self.snr_convention = DEFAULT_SNR_CONVENTION[self.experiment]
        if self.experiment == "spreading" and self.plan is None:
            raise ConfigError("spreading needs a plan (n, l, g)", "plan")
        if self.experiment in ("collective-detection", "multiuser") and self.codebook is None:
            self.codebook = CodebookConfig(codeword_seed=self.master_seed)
        if self.experiment == "multiuser" and self.allocation is None:
            raise ConfigError("multiuser needs an allocation (dims)", "allocation")
        if self.experiment in ("pilot-estimation", "multiuser") and self.channel.kind != "rayleigh":
            raise ConfigError(f"{self.experiment} closed forms assume the rayleigh model", "channel.kind")
        return self


def load_config(data: dict) -> SimulationConfig:
    """Validate a raw config mapping, re-raising failures as ConfigError with the field path."""
    try:
        return SimulationConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first.get("loc", ()))
        raise ConfigError(first.get("msg", str(e)), path) from e


class ErrorRateRow(BaseModel):
    experiment: str
    snr: float
    snr_convention: str
    l: Optional[int] = None
    k: Optional[int] = None
    d: Optional[int] = None
    n_codewords: Optional[int] = None
    trials: int
    seed: int
    empirical_p: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    analytic_p: float
    analytic_ref: str
    z_score: Optional[float] = None

    @property
    def is_bound(self) -> bool:
        return self.analytic_ref.endswith("-bound")

    @property
    def compared(self) -> bool:
        return self.empirical_p is not None and self.z_score is not None

    @property
    def passed(self) -> bool:
        if not self.compared:
            return True
        limit = 3.0 + 1e-9
        return self.z_score <= limit if self.is_bound else abs(self.z_score) <= limit


class ErrorRateReport(BaseModel):
    config: dict
    snr_convention: str
    rows: list[ErrorRateRow] = []

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)
