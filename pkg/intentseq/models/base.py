"""Base models for intentseq records."""

from typing import Any, ClassVar

import pandas as pd
from pydantic import BaseModel as PydanticBaseModel
from pydantic import Field, computed_field


class BaseModel(PydanticBaseModel):
    """Base model with common configuration."""

    model_config = {
        "extra": "forbid",
        "validate_assignment": True,
        "str_strip_whitespace": True,
    }


class RowModel(BaseModel):
    """Record that is also written as one CSV row.

    Subclasses list the CSV columns in ``csv_columns``; computed summaries are
    never part of the row.
    """

    csv_columns: ClassVar[tuple[str, ...]] = ()

    def to_row(self) -> dict[str, Any]:
        """Return the CSV columns of this record, in order."""
        data = self.model_dump(mode="json")
        return {column: data[column] for column in self.csv_columns}


class ListResponseModel[T](BaseModel):
    """Generic wrapper for list results (manifests, stream predictions)."""

    response: list[T] = Field(description="List of items")
    total_count: int | None = Field(None, description="Total number of items available")

    @computed_field
    @property
    def count(self) -> int:
        """Number of items in the current response."""
        return len(self.response)

    @computed_field
    @property
    def summary(self) -> str:
        """Human-readable summary of the response."""
        if self.total_count is not None:
            return f"{self.count} of {self.total_count} items"
        return f"{self.count} items"

    def to_frame(self) -> pd.DataFrame:
        """Tabulate the items; row records keep their declared column order."""
        rows: list[dict[str, Any]] = []
        columns: list[str] | None = None
        for item in self.response:
            if isinstance(item, RowModel):
                rows.append(item.to_row())
                columns = list(item.csv_columns)
            elif isinstance(item, PydanticBaseModel):
                rows.append(item.model_dump(mode="json"))
            else:
                rows.append({"value": item})
        return pd.DataFrame(rows, columns=columns)
