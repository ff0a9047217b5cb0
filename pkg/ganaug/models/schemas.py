from pydantic import BaseModel, Field


class FidResult(BaseModel):
    """One Fréchet distance evaluation."""

    score: float
    n_real: int
    n_fake: int
    d: int
    embedder: str

    def line(self) -> str:
        return (
            f"FID={self.score:.6f} n_real={self.n_real} n_fake={self.n_fake} "
            f"d={self.d} embedder={self.embedder}"
        )


class EpochMetrics(BaseModel):
    """Discriminator/generator loss and discriminator accuracy for one epoch."""

    epoch: int
    d_loss: float
    g_loss: float
    d_accuracy: float = Field(ge=0.0, le=1.0)
    wall_time_s: float = 0.0


class FidPoint(BaseModel):
    epoch: int
    fid: float
    n_real: int
    n_fake: int
    d: int


class TensorEntry(BaseModel):
    """Location of one float64 tensor inside a checkpoint payload."""

    name: str
    shape: list[int]
    offset: int
    nbytes: int


class CheckpointHeader(BaseModel):
    format_version: int
    config_fingerprint: str
    epoch: int
    generator_spec: dict
    discriminator_spec: dict
    generator_adam_t: int
    discriminator_adam_t: int
    rng_state: dict
    training: dict[str, str] = Field(default_factory=dict)
    tensors: list[TensorEntry] = Field(default_factory=list)


class TrainReport(BaseModel):
    """Summary written to <output_dir>/report.json at the end of a run.

    Timestamps are left empty when wall-clock recording is off.
    """

    started_at: str | None = None
    completed_at: str | None = None
    success: bool = False
    error: str | None = None
    config: dict = Field(default_factory=dict)
    epochs_completed: int = 0
    metrics: list[EpochMetrics] = Field(default_factory=list)
    fid_history: list[FidPoint] = Field(default_factory=list)
    final_checkpoint: str | None = None
