"""
Visual relationship triplets ⟨person, worn|unworn, clothing⟩ and their confidence.

With detector confidences p(S|I) and p(O|I) taken as given, and S and O assumed independent:

    p(S, P, O | I) = p(S|I) · p(O|I) · p(P|S,O,I)
"""

from typing import Annotated, Optional, Sequence

import numpy as np
import pydantic
from pydantic import ConfigDict, Field, model_validator

from .models import Predicate
from .utils import ProbabilityRangeError, ShapeError, check_probability

Probability = Annotated[float, Field(ge=0.0, le=1.0)]


class MaskRef(pydantic.BaseModel):
    """A segmentation mask of one image."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    image_id: str
    mask_id: int = Field(..., ge=0)


class Triplet(pydantic.BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    subject: MaskRef
    predicate: Predicate
    object: MaskRef
    image_id: str

    @model_validator(mode="after")
    def _same_image(self):
        if not self.subject.image_id == self.object.image_id == self.image_id:
            raise ValueError(
                f"subject ({self.subject.image_id}) and object ({self.object.image_id}) "
                f"must both belong to image {self.image_id}"
            )
        return self


class TripletConfidence(pydantic.BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    p_s: Probability
    p_o: Probability
    p_p: Probability
    p_joint: Probability

    @model_validator(mode="after")
    def _joint_is_product(self):
        if self.p_joint != self.p_s * (self.p_o * self.p_p):
            raise ValueError(f"p_joint {self.p_joint} is not p_s * p_o * p_p")
        return self


def compose_chain(p_s: float, p_po_given_s: float) -> float:
    """p(S|I) · p(P,O|S,I), the chain rule with no independence assumption.

    Raises:
        ProbabilityRangeError: an input lies outside [0, 1].
    """
    return check_probability("p_s", p_s) * check_probability("p_po_given_s", p_po_given_s)


def compose_triplet(p_s: float, p_o: float, p_p: float) -> TripletConfidence:
    """Joint triplet confidence from detector confidences and the predicate probability.

    Raises:
        ProbabilityRangeError: an input lies outside [0, 1].
    """
    p_s = check_probability("p_s", p_s)
    p_o = check_probability("p_o", p_o)
    p_p = check_probability("p_p", p_p)
    return TripletConfidence(p_s=p_s, p_o=p_o, p_p=p_p, p_joint=compose_chain(p_s, p_o * p_p))


def confidence_matrix(
    p_pp: np.ndarray, p_s: Optional[Sequence[float]] = None, p_o: Optional[Sequence[float]] = None
) -> np.ndarray:
    """
    Joint confidence for every (person row, clothing column) cell of a predicate matrix.

    Missing detector confidences count as 1, leaving that factor out.
    """
    p_pp = np.asarray(p_pp, dtype=np.float64)
    if p_pp.ndim != 2:
        raise ShapeError(f"predicate matrix must be 2-d, got shape {p_pp.shape}")
    rows, cols = p_pp.shape
    p_s = np.ones(rows) if p_s is None else np.asarray(p_s, dtype=np.float64).reshape(-1)
    p_o = np.ones(cols) if p_o is None else np.asarray(p_o, dtype=np.float64).reshape(-1)
    if p_s.size != rows or p_o.size != cols:
        raise ShapeError(f"{p_s.size} person and {p_o.size} clothing confidences for a {rows}x{cols} matrix")
    for name, values in (("p_pp", p_pp), ("p_s", p_s), ("p_o", p_o)):
        if not np.all((values >= 0.0) & (values <= 1.0)):
            raise ProbabilityRangeError(f"{name} holds values outside [0, 1]")
    return np.array(
        [[compose_triplet(p_s[i], p_o[j], p_pp[i, j]).p_joint for j in range(cols)] for i in range(rows)]
    )
