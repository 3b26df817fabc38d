from typing import Literal, Optional

from fastapi import APIRouter, Query

from app.schemas import NetworkDocument, SpectralDocument
from app.services.network import network_from_spec
from app.services.spectral import decompose

router = APIRouter(prefix="/api", tags=["spectrum"])

Generator = Literal['mean-field', 'cycle', 'special-vertex']


@router.get("/spectrum", response_model=SpectralDocument)
async def get_spectrum(
    gen: Generator = Query(..., description="network generator"),
    n: int = Query(..., ge=1, le=200),
    alpha: float = Query(1.0, gt=0.0, le=1.0),
    p: Optional[float] = Query(None, gt=0.0, lt=1.0),
):
    """Eigenvalues and biorthogonal eigenvectors of a generated network"""
    return decompose(network_from_spec(gen, n=n, alpha=alpha, p=p)).to_dict()


@router.post("/spectrum", response_model=SpectralDocument)
async def post_spectrum(document: NetworkDocument):
    """Eigenvalues and biorthogonal eigenvectors of an explicit network"""
    return decompose(document.build()).to_dict()
