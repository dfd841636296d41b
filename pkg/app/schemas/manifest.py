from pydantic import BaseModel, Field
from typing import Any, Dict, List


class RunManifest(BaseModel):
    """Record written next to every output set so the run can be replayed"""
    command: str
    argv: List[str] = Field(default_factory=list, description="Arguments after the program name")
    inputs: List[str] = Field(default_factory=list)
    params: Dict[str, Any] = Field(default_factory=dict, description="Flattened parameter map")
    version: str
    timestamp: str = Field(..., description="UTC ISO-8601")
