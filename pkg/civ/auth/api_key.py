"""
API key authentication for the civ HTTP API
"""
from fastapi import HTTPException, Security
from fastapi.security.api_key import APIKeyHeader
from starlette.status import HTTP_403_FORBIDDEN

from ..config import get_settings

# API key header name
API_KEY_NAME = "X-API-Key"
API_KEY_HEADER = APIKeyHeader(name=API_KEY_NAME, auto_error=False)


async def get_api_key(api_key_header: str = Security(API_KEY_HEADER)) -> str:
    """
    Validate the API key header against settings.api_key

    Returns:
        The key, or "dev_mode" when no key is configured

    Raises:
        HTTPException: If the key is invalid or missing
    """
    expected = get_settings().api_key
    if not expected:
        return "dev_mode"

    if api_key_header and api_key_header == expected:
        return api_key_header

    raise HTTPException(status_code=HTTP_403_FORBIDDEN, detail="Invalid or missing API key")
