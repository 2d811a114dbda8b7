#!/usr/bin/env python

import argparse
import asyncio
import os
import sys

import httpx

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.config import settings  # noqa: E402


async def fetch_fig3(base_url: str, params: dict) -> str:
    """
    Call the /experiments/fig3/download endpoint and return the CSV body.
    """
    url = f"{base_url}/experiments/fig3/download"
    async with httpx.AsyncClient(timeout=60.0) as client:
        print(f"[FIG3] Calling {url} with {params}")
        resp = await client.get(url, params=params)
        resp.raise_for_status()
        return resp.text


async def main(argv=None):
    parser = argparse.ArgumentParser(description="Download the analytic estimation-error curves as CSV")
    parser.add_argument("--api-url", default=settings.API_URL)
    parser.add_argument("--snr-grid", default="1,2,4,8,16,32,64")
    parser.add_argument("--l-grid", default="1,2,4,8")
    parser.add_argument("--k-grid", default="1,2")
    parser.add_argument("--out", default="fig3.csv")
    args = parser.parse_args(argv)

    params = {"snr_grid": args.snr_grid, "l_grid": args.l_grid, "k_grid": args.k_grid}
    body = await fetch_fig3(args.api_url.rstrip("/"), params)

    with open(args.out, "w", newline="") as f:
        f.write(body)
    print(f"[FIG3] Wrote {body.count(chr(10)) - 1} rows to {args.out}")


if __name__ == "__main__":
    asyncio.run(main())
