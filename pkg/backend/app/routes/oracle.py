from typing import Optional

from fastapi import APIRouter, Query

from app.services.asymptotics import (
    AppendixOracleInput,
    appendix_limit_estimate,
    appendix_limit_partial,
    appendix_limit_value,
)

router = APIRouter(prefix="/api/oracle", tags=["oracle"])


def complex_value(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


@router.get("/appendix")
async def get_appendix_partial(
    a1: float = Query(..., gt=0.0, description="real part of alpha1"),
    b1: float = Query(0.0, description="imaginary part of alpha1"),
    a2: float = Query(..., gt=0.0, description="real part of alpha2"),
    b2: float = Query(0.0, description="imaginary part of alpha2"),
    gamma: float = Query(..., gt=0.5, le=1.0),
    c: float = Query(1.0, gt=0.0),
    n: int = Query(10 ** 5, ge=2, le=10 ** 7),
    m0: Optional[int] = Query(None, ge=2),
):
    """Normalized truncated product-sum, its limit and the extrapolated estimate"""
    inp = AppendixOracleInput(complex(a1, b1), complex(a2, b2), gamma, c, n, m0)
    return {
        "n": inp.n,
        "m0": inp.m0,
        "log_normalized": inp.log_normalized,
        "partial": complex_value(appendix_limit_partial(inp)),
        "estimate": complex_value(appendix_limit_estimate(inp)),
        "limit": complex_value(appendix_limit_value(inp)),
    }
