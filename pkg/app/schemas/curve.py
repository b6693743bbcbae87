from typing import Annotated, Literal, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field


class PiecewiseCurve(BaseModel):
    """Piecewise-linear cumulative curve; zero before the first knot, asymptote after the last."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["piecewise"] = "piecewise"
    knots: Tuple[Tuple[float, float], ...] = ()
    asymptote: float = Field(..., ge=0.0, le=1.0)


class DelayedExponentialCurve(BaseModel):
    """C(t) = p_max * (1 - exp(-lambda * (t - t0))) for t >= t0, else 0."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    kind: Literal["delayed_exponential"] = "delayed_exponential"
    t0: float = 0.0
    rate: float = Field(..., alias="lambda")
    p_max: float = Field(..., ge=0.0, le=1.0)

    @property
    def asymptote(self) -> float:
        return self.p_max


TemporalCurve = Annotated[
    Union[PiecewiseCurve, DelayedExponentialCurve],
    Field(discriminator="kind"),
]
