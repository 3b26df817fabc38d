from typing import Optional

from fastapi import APIRouter, Query

from app.routes.spectrum import Generator
from app.schemas import CovarianceDocument
from app.services.asymptotics import covariance_report
from app.services.network import network_from_spec
from app.services.spectral import classify_regime, decompose

router = APIRouter(prefix="/api", tags=["covariance"])


@router.get("/covariance", response_model=CovarianceDocument)
async def get_covariance(
    gen: Generator = Query(..., description="network generator"),
    n: int = Query(..., ge=1, le=200),
    alpha: float = Query(1.0, gt=0.0, le=1.0),
    p: Optional[float] = Query(None, gt=0.0, lt=1.0),
    gamma: float = Query(..., gt=0.5, le=1.0),
    c: float = Query(1.0, gt=0.0),
    tol: float = Query(1e-9, gt=0.0),
):
    """Asymptotic covariance report for a generated network"""
    spec = decompose(network_from_spec(gen, n=n, alpha=alpha, p=p))
    return covariance_report(spec, classify_regime(spec, gamma, c, tol)).to_dict()
