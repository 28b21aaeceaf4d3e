from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from atlas.errors import AtlasError
from pipelines.atlas import analyze, probe, sweep, verify
from pipelines.atlas.state import RunConfig
from utils.config import default_samples, default_seed, load_env
from utils.logger import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

PIPELINES = {
    "analyze": analyze,
    "sweep": sweep,
    "verify": verify,
    "probe": probe,
}


def _split(values: Optional[List[str]]) -> List[str]:
    out: List[str] = []
    for v in values or []:
        out.extend(p.strip() for p in v.split(",") if p.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m pipelines.atlas",
        description="Convexity atlas of ML-detector error rates in AWGN.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--builtin", help="builtin constellation, e.g. bpsk, qpsk, qam16, psk8, grid3x3x3")
    src.add_argument("--file", help="constellation JSON file")
    common.add_argument("--auto-normalize", action="store_true", help="rescale a file to unit energy")
    common.add_argument("--axis", default="snr", choices=["snr", "noise"])
    common.add_argument("--grid-min", type=float, default=None, help="default 0.5")
    common.add_argument("--grid-max", type=float, default=None, help="default 16")
    common.add_argument("--grid-points", type=int, default=None, help="default 10")
    common.add_argument("--log", action=argparse.BooleanOptionalAction, default=True, help="log-spaced grid")
    common.add_argument("--samples", type=int, default=None, help="Monte Carlo samples per point")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory (default runs/<command>)")
    common.add_argument("--diagram", action="store_true", help="write the pipeline's Mermaid graph and exit")

    sub.add_parser("analyze", parents=[common], help="geometry and theorem thresholds")

    sweep_p = sub.add_parser("sweep", parents=[common], help="error-rate / curvature sweeps")
    sweep_p.add_argument(
        "--metric",
        action="append",
        help="ser, ser:i, pep:i:j, ber, or d2:<any of these>; repeatable or comma separated",
    )

    verify_p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    verify_p.add_argument("--only", action="append", help="check name(s), comma separated")

    probe_p = sub.add_parser("probe", parents=[common], help="conjecture / chi2 / jensen / sphere probes")
    probe_p.add_argument("kind", choices=["conjecture", "chi2", "jensen", "sphere"])
    probe_p.add_argument("--n", type=int, default=None, help="dimension")
    probe_p.add_argument("--M", type=int, default=None, help="code size for random spherical codes")
    probe_p.add_argument("--code-seed", type=int, default=0)
    probe_p.add_argument("--target", type=float, default=1e-2, help="SER at γ0 for calibration")
    probe_p.add_argument("--gamma0", type=float, default=None)
    probe_p.add_argument("--metric", default="ser", help="jensen target: ser, ser:i, pep:i:j or ber")
    probe_p.add_argument("--a", type=float, default=None)
    probe_p.add_argument("--b", type=float, default=None)
    probe_p.add_argument("--lam", type=float, default=0.5)
    probe_p.add_argument("--noise-power", type=float, default=None)
    probe_p.add_argument("--eps", type=float, default=None)

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    kwargs: Dict[str, Any] = dict(
        command=args.command,
        builtin=args.builtin,
        file=args.file,
        auto_normalize=args.auto_normalize,
        axis=args.axis,
        log=args.log,
        samples=default_samples() if args.samples is None else args.samples,
        seed=default_seed() if args.seed is None else args.seed,
        out=args.out or str(Path("runs") / args.command),
    )
    grid = {"grid_min": args.grid_min, "grid_max": args.grid_max, "grid_points": args.grid_points}
    kwargs.update({k: v for k, v in grid.items() if v is not None})
    kwargs["grid_given"] = any(v is not None for v in grid.values())
    if args.command == "sweep":
        kwargs["metrics"] = tuple(_split(args.metric) or ["ser"])
    elif args.command == "verify":
        kwargs["only"] = tuple(_split(args.only))
    elif args.command == "probe":
        kwargs.update(
            probe=args.kind,
            n=args.n,
            M=args.M,
            code_seed=args.code_seed,
            target_rate=args.target,
            gamma0=args.gamma0,
            metrics=(args.metric,),
            a=args.a,
            b=args.b,
            lam=args.lam,
            noise_power=args.noise_power,
            eps=args.eps,
        )
    return RunConfig(**kwargs)


def main(argv: Optional[List[str]] = None) -> int:
    load_env()
    args = build_parser().parse_args(argv)
    mod = PIPELINES[args.command]

    if args.diagram:
        out = Path(args.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{args.command}_graph.mmd"
        mod.save_graph_diagram(str(path))
        return EXIT_OK

    logger.info(f"[atlas] CLI start {args.command}")
    try:
        config = config_from_args(args)
        result = mod.run(config)
    except AtlasError as e:
        logger.error(f"[atlas] {args.command} refused: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    print(json.dumps(result, indent=2, default=str))
    logger.info(f"[atlas] CLI end {args.command}")

    if args.command == "verify" and not result["passed"]:
        return EXIT_FAILED
    if args.command == "sweep" and not result["ok"]:
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
