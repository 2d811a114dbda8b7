import uuid
from datetime import datetime, timezone

from fastapi import Body, FastAPI, Query, Request
from fastapi.responses import JSONResponse, StreamingResponse

from app.errors import ConfigError, DomainError
from app.harness import run, sweep_figure3
from app.logging_config import get_logger, setup_logging
from app.models import load_config
from app.report_io import emit_csv, report_document

# Initialize logging
setup_logging()
logger = get_logger(__name__)

app = FastAPI(title="Adaptive Quadrature Detection Simulator")


# Middleware to add request ID
@app.middleware("http")
async def add_request_id(request: Request, call_next):
    request_id = str(uuid.uuid4())
    request.state.request_id = request_id

    logger.info(
        f"Request started: {request.method} {request.url.path}",
        extra={"request_id": request_id},
    )

    try:
        response = await call_next(request)
        logger.info(
            f"Request completed: {request.method} {request.url.path} - {response.status_code}",
            extra={"request_id": request_id},
        )
        return response
    except Exception as e:
        logger.error(f"Request failed: {str(e)}", extra={"request_id": request_id}, exc_info=True)
        raise


@app.exception_handler(ConfigError)
async def config_error_handler(request: Request, exc: ConfigError):
    return JSONResponse(status_code=422, content={"detail": str(exc), "field": exc.field_path})


@app.exception_handler(DomainError)
async def domain_error_handler(request: Request, exc: DomainError):
    return JSONResponse(status_code=422, content={"detail": str(exc), "field": None})


@app.get("/health")
async def health_check():
    logger.info("Health check requested")
    return {
        "status": "healthy",
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def _parse_grid(text: str, cast, name: str) -> list:
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"expected comma-separated values, got {text!r}", name) from e


def _figure3_config(snr_grid: str, l_grid: str, k_grid: str, seed: int):
    return load_config(
        {
            "experiment": "fig3",
            "snr_grid": _parse_grid(snr_grid, float, "snr_grid"),
            "l_grid": _parse_grid(l_grid, int, "l_grid"),
            "k_grid": _parse_grid(k_grid, int, "k_grid"),
            "trials": 1,
            "master_seed": seed,
        }
    )


# Monte Carlo runs are CPU bound; a plain def keeps them off the event loop
@app.post("/experiments/run")
def run_experiment(payload: dict = Body(...)):
    config = load_config(payload)
    report = run(config)
    return report_document(report)


@app.get("/experiments/fig3")
async def figure3(
    snr_grid: str = Query("1,2,4,8,16,32,64"),
    l_grid: str = Query("1,2,4,8"),
    k_grid: str = Query("1,2"),
    seed: int = Query(0, ge=0),
):
    report = sweep_figure3(_figure3_config(snr_grid, l_grid, k_grid, seed))
    return report_document(report)


@app.get("/experiments/fig3/download")
async def download_figure3_csv(
    snr_grid: str = Query("1,2,4,8,16,32,64"),
    l_grid: str = Query("1,2,4,8"),
    k_grid: str = Query("1,2"),
    seed: int = Query(0, ge=0),
):
    report = sweep_figure3(_figure3_config(snr_grid, l_grid, k_grid, seed))

    return StreamingResponse(
        iter([emit_csv(report)]),
        media_type="text/csv",
        headers={
            "Content-Disposition": 'attachment; filename="fig3.csv"',
        },
    )
