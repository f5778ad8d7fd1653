from pydantic import BaseModel, Field, model_validator


class DimensionReport(BaseModel):
    """Dimensions combinatoires exactes d'une classe finie."""
    instances: int = Field(..., ge=1, description="Taille de l'espace d'instances")
    hypotheses: int = Field(..., ge=1, description="Nombre d'hypothèses")
    vc: int = Field(..., ge=0)
    dual_vc: int = Field(..., ge=0)
    littlestone: int = Field(..., ge=0)
    threshold: int = Field(..., ge=0)
    oracle_query_lower_bound: float = Field(
        0.0, ge=0, description="log2(Tdim - 1) / 2, borne inférieure de requêtes à l'oracle parfait"
    )

    @model_validator(mode="after")
    def check_relations(self):
        """Relations classiques entre dimensions, vérifiées sur chaque rapport."""
        if self.vc > self.littlestone:
            raise ValueError(f"vc={self.vc} exceeds littlestone={self.littlestone}")
        if self.dual_vc >= 2 ** (self.vc + 1):
            raise ValueError(f"dual_vc={self.dual_vc} must stay below 2^(vc+1)")
        if self.littlestone >= 1:
            if self.littlestone.bit_length() - 1 > self.threshold:
                raise ValueError(
                    f"floor(log2 littlestone)={self.littlestone.bit_length() - 1} exceeds threshold={self.threshold}"
                )
            if self.threshold >= 2 ** (self.littlestone + 1):
                raise ValueError(f"threshold={self.threshold} must stay below 2^(littlestone+1)")
        return self


class DimensionRequest(BaseModel):
    """Corps de POST /api/v1/dimensions."""
    instances: int = Field(..., ge=1, le=64)
    rows: list[str] = Field(..., min_length=1, description="Une chaîne '+-' par hypothèse")
