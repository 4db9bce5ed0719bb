"""Request/response models for the scoring wire protocol (schema version 1).

All log-probabilities are natural-log. Every response carries one result per
request item, in request order.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

SCHEMA_VERSION = 1


class NextItem(BaseModel):
    context: list[str] = Field(default_factory=list)


class NextRequest(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    items: list[NextItem]
    top_k: int | None = None

    model_config = {"populate_by_name": True}


class NextResult(BaseModel):
    tokens: list[str]
    logprobs: list[float]
    tail_mass: float


class SeqItem(BaseModel):
    context: list[str] = Field(default_factory=list)
    continuation: list[str]

    @model_validator(mode="after")
    def _nonempty_continuation(self):
        if not self.continuation:
            raise ValueError("continuation must be nonempty")
        return self


class SeqRequest(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    items: list[SeqItem]

    model_config = {"populate_by_name": True}


class SeqResult(BaseModel):
    logprob: float


class MaskSpanModel(BaseModel):
    start: int
    tokens: list[str]

    @model_validator(mode="after")
    def _nonempty(self):
        if self.start < 0 or not self.tokens:
            raise ValueError("span needs a nonnegative start and answer tokens")
        return self


class InfillItem(BaseModel):
    visible: list[str | None]
    spans: list[MaskSpanModel]
    mask_fraction: float = 0.5
    condition: list[str] | None = None
    include_unconditional: bool = False

    @model_validator(mode="after")
    def _has_spans(self):
        if not self.spans:
            raise ValueError("at least one answer span is required")
        return self


class InfillRequest(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    items: list[InfillItem]

    model_config = {"populate_by_name": True}


class InfillResult(BaseModel):
    logprob: float
    unconditional_logprob: float | None = None


class Health(BaseModel):
    status: str
    model_id: str
    stub: bool
    schema_version: int = Field(default=SCHEMA_VERSION, serialization_alias="schema")
