import numpy as np
from fastapi import APIRouter

from app.schemas import (
    ConfidenceIntervalDocument,
    ConfidenceIntervalRequest,
    TestResultDocument,
    TopologyTestRequest,
)
from app.services.dynamics import project
from app.services.inference import confidence_interval, topology_test
from app.services.spectral import decompose

router = APIRouter(prefix="/api/inference", tags=["inference"])


@router.post("/ci", response_model=ConfidenceIntervalDocument)
async def post_confidence_interval(request: ConfidenceIntervalRequest):
    """Confidence interval for Z_inf from an observation at time n"""
    spec = decompose(request.network.build())
    z_tilde = request.z_tilde
    if z_tilde is None:
        z_tilde = project(spec, np.asarray(request.state, dtype=float))[0]
    return confidence_interval(z_tilde, request.n, request.gamma, request.c, spec, request.level).to_dict()


@router.post("/test", response_model=TestResultDocument)
async def post_topology_test(request: TopologyTestRequest):
    """Chi-square test of the hypothesized network against an observed state"""
    result = topology_test(
        np.asarray(request.state, dtype=float), request.n, request.network.build(),
        request.gamma, request.c, request.level, request.tol,
    )
    return result.to_dict()
