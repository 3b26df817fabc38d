from typing import Optional

from fastapi import APIRouter, Query
from fastapi.responses import StreamingResponse

from app.routes.spectrum import Generator
from app.schemas import (
    SIMULATION_HORIZON_LIMIT,
    NetworkSpecModel,
    ScheduleModel,
    SimulationRequest,
    TrajectorySummaryDocument,
)
from app.services.dynamics import simulate
from app.services.spectral import decompose

router = APIRouter(prefix="/api", tags=["simulation"])


def run(request: SimulationRequest):
    net = request.network.build()
    variant = request.forcing.build() if request.forcing is not None else None
    trajectory = simulate(
        net, request.schedule.build(), request.initial_state(net.n_vertices), request.horizon,
        stride=request.stride, variant=variant, seed=request.seed, replication=request.replication,
    )
    return net, trajectory


@router.post("/simulate", response_model=TrajectorySummaryDocument)
def post_simulate(request: SimulationRequest):
    """Run one trajectory and return its summary"""
    net, trajectory = run(request)
    return trajectory.summary(decompose(net) if net.irreducible else None)


# CSV Export Endpoints


@router.get("/export/trajectory")
def export_trajectory(
    gen: Generator = Query(..., description="network generator"),
    n: int = Query(..., ge=1, le=200),
    alpha: float = Query(1.0, gt=0.0, le=1.0),
    p: Optional[float] = Query(None, gt=0.0, lt=1.0),
    gamma: float = Query(..., gt=0.5, le=1.0),
    c: float = Query(1.0, gt=0.0),
    z0: float = Query(0.5, ge=0.0, le=1.0),
    horizon: int = Query(1000, ge=1, le=SIMULATION_HORIZON_LIMIT),
    stride: Optional[int] = Query(None, ge=1),
    seed: int = Query(0, ge=0),
    replication: int = Query(0, ge=0),
):
    """Export one trajectory (n, Z_1..Z_N) to CSV"""
    request = SimulationRequest(
        network=NetworkSpecModel(kind=gen, n=n, alpha=alpha, p=p),
        schedule=ScheduleModel(gamma=gamma, c=c),
        z0=z0, horizon=horizon, stride=stride, seed=seed, replication=replication,
    )
    _, trajectory = run(request)
    filename = f"trajectory_{gen}_{n}_seed{seed}.csv"
    return StreamingResponse(
        iter([trajectory.to_csv()]),
        media_type="text/csv",
        headers={"Content-Disposition": f"attachment; filename={filename}"}
    )
