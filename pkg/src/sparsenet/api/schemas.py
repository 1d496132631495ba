from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from sparsenet.topology import Kind


class ConstructionModel(BaseModel):
    kind: Kind
    k: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)


class TopologyRequest(ConstructionModel):
    n: int = Field(ge=1)
    m: int = Field(ge=1)


class TopologyResponse(BaseModel):
    n: int
    m: int
    construction: str
    k: Optional[int]
    seed: Optional[int]
    edge_count: int
    density: float
    edgelist: str


class AnalyzeRequest(BaseModel):
    """Either an edge-list document or a construction to build."""

    edgelist: Optional[str] = None
    topology: Optional[TopologyRequest] = None
    include_eigenvalues: bool = False

    @model_validator(mode="after")
    def _one_source(self):
        if (self.edgelist is None) == (self.topology is None):
            raise ValueError("give exactly one of edgelist or topology")
        return self


class SpectralResponse(BaseModel):
    construction: str
    n: int
    m: int
    k: Optional[int]
    seed: Optional[int]
    component_count: int
    lambda2: float
    second_largest_nonzero: float
    largest_nonzero: float
    zero_tolerance: float
    eigenvalues: Optional[List[float]] = None
    csv_header: str
    csv_row: str


class RunOptions(BaseModel):
    config: str = Field(description="contents of the config file")
    profile: Optional[Literal["desk", "paper"]] = None
    base_seed: Optional[int] = None
    out_dir: str


class TrainRequest(RunOptions):
    pass


class EpochModel(BaseModel):
    epoch: int
    train_loss: float
    test_accuracy: float


class LayerStatsModel(BaseModel):
    max: float
    min: float
    std: float


class TrainResponse(BaseModel):
    initial_loss: float
    initial_accuracy: float
    final_accuracy: float
    epochs: List[EpochModel]
    weight_stats: List[LayerStatsModel]
    seconds: float
    checkpoint_path: str
    record_path: str


class SweepRequest(RunOptions):
    workers: int = Field(default=1, ge=1)


class SweepJob(BaseModel):
    id: str
    state: Literal["queued", "running", "done", "failed"]
    label: str
    cells_total: int
    cells_done: int
    out_dir: str
    csv_path: Optional[str] = None
    error: Optional[str] = None


class ReportRequest(BaseModel):
    csv_paths: List[str] = Field(min_length=1)
    out_dir: str
    label: Optional[str] = None


class CorrelationModel(BaseModel):
    degree: str
    metric: str
    samples: int
    pearson_r: Optional[float]
    status: str


class ReportResponse(BaseModel):
    tables: Dict[str, str]
    correlations: List[CorrelationModel]


class Health(BaseModel):
    status: str
    version: str
