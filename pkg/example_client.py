"""
Example client for the trimfit MCP server.

Connects in-process (no subprocess, no network), lists the solvers, solves
one synthetic scene and runs a small outlier sweep.
"""

import asyncio
from fastmcp import Client

from mcp_server import mcp


async def main():
    """Call every trimfit tool once and print the results."""
    print("🚀 Connecting to the trimfit MCP server (in-process)...")

    async with Client(mcp) as client:
        print("✅ Connected!")

        print("\n📋 Available solvers:")
        solvers = (await client.call_tool("list_solvers")).data
        for solver in solvers:
            kind = "robust" if solver["robust"] else "plain"
            print(f"  • {solver['name']:<18} ({kind}) {solver['description']}")

        print("\n📐 Solving a 500-point scene with 30% outliers...")
        solved = (await client.call_tool(
            "solve_scene",
            {"solver": "robust_upnp_incr", "n": 500, "noise_px": 3.0, "outlier_frac": 0.3, "seed": 7},
        )).data
        print(f"  Rotation error: {solved['rot_err']:.3e} rad")
        print(f"  Position error: {solved['pos_err']:.3e} m")
        print(f"  Iterations: {solved['iterations']} ({'converged' if solved['converged'] else 'not converged'})")
        print(f"  Outliers among the retained half: {solved['outliers_retained']}")

        print("\n📊 Outlier sweep (10 trials per value)...")
        rows = (await client.call_tool(
            "run_sweep",
            {"axis": "outliers", "values": [0.1, 0.3], "n": 300, "trials": 10},
        )).data
        for row in rows:
            print(f"  {row['solver']:<18} outliers={row['outlier_frac']:<5} "
                  f"median rot err={float(row['median_rot_err']):.3e} success={row['success_rate']:.0%}")


if __name__ == "__main__":
    asyncio.run(main())
