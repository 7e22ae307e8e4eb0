"""
Mock metadata server speaking the ECS v4, GCP and Azure response shapes.

Used by the test suite and by `flakeless mock-metadata` for local runs:

    flakeless mock-metadata --port 8169 &
    AWS_EXECUTION_ENV=AWS_ECS_FARGATE \
    ECS_CONTAINER_METADATA_URI_V4=http://127.0.0.1:8169/v4/container \
        flakeless resolve
"""

from typing import Optional

from fastapi import FastAPI, Header, Query
from fastapi.responses import JSONResponse, PlainTextResponse

AWS_IP = "10.0.1.2"
GCP_IP = "10.8.3.4"
AZURE_IP = "10.240.0.7"

ECS_PATH = "/v4/container"
GCP_PATH = "/computeMetadata/v1/instance/network-interfaces/0/ip"
AZURE_PATH = "/metadata/instance/network/interface/0/ipv4/ipAddress/0/privateIpAddress"


def create_mock_metadata_app(
    aws_ip: str = AWS_IP,
    gcp_ip: str = GCP_IP,
    azure_ip: str = AZURE_IP,
    fail_status: Optional[int] = None,
) -> FastAPI:
    """
    Build the mock app.

    Args:
        aws_ip / gcp_ip / azure_ip: addresses each provider reports
        fail_status: when set, every metadata route answers with this status
    """
    app = FastAPI(title="flakeless mock metadata", version="1.0.0")

    def failure():
        return PlainTextResponse("injected failure", status_code=fail_status)

    @app.get(ECS_PATH)
    async def ecs_container():
        # https://docs.aws.amazon.com/AmazonECS/latest/developerguide/task-metadata-endpoint-v4.html
        if fail_status:
            return failure()
        return JSONResponse({
            "DockerId": "ea32192c8553fbff06c9340478a2ff089b2bb5646fb718b4ee206641c9086d66",
            "Name": "flakeless",
            "Image": "flakeless:latest",
            "KnownStatus": "RUNNING",
            "Networks": [
                {
                    "NetworkMode": "awsvpc",
                    "IPv4Addresses": [aws_ip],
                    "IPv4SubnetCIDRBlock": "10.0.0.0/16",
                }
            ],
        })

    @app.get(GCP_PATH)
    async def gcp_ip_route(metadata_flavor: Optional[str] = Header(None)):
        if fail_status:
            return failure()
        if metadata_flavor != "Google":
            return PlainTextResponse("Missing Metadata-Flavor:Google header.", status_code=403)
        return PlainTextResponse(gcp_ip)

    @app.get(AZURE_PATH)
    async def azure_ip_route(
        metadata: Optional[str] = Header(None),
        api_version: Optional[str] = Query(None, alias="api-version"),
        format: Optional[str] = Query(None),
    ):
        if fail_status:
            return failure()
        if metadata != "true":
            return JSONResponse({"error": "Bad request. Required metadata header not specified"},
                                status_code=400)
        if not api_version:
            return JSONResponse({"error": "Bad request. api-version was not specified"},
                                status_code=400)
        if format != "text":
            return JSONResponse({"error": "Bad request. format=text is required for leaf nodes"},
                                status_code=400)
        return PlainTextResponse(azure_ip)

    return app


def mock_endpoint_env(base_url: str) -> dict:
    """Env entries pointing every provider at a mock served from base_url."""
    base = base_url.rstrip("/")
    return {
        "ECS_CONTAINER_METADATA_URI_V4": base + ECS_PATH,
        "FLAKELESS_GCP_METADATA_URL": base + GCP_PATH,
        "FLAKELESS_AZURE_METADATA_URL": (
            base + AZURE_PATH + "?api-version=2021-02-01&format=text"
        ),
    }
