# main.py
import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from config_settings import settings
from orchestrators_master import MasterOrchestrator, RunConfig
from utils_errors import SpreadLabError
from utils_logger import get_logger

logger = get_logger("main")

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_INPUT_ERROR = 2


def _p_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad exponent list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=settings.output_dir, help="output directory")
    common.add_argument("--threads", type=int, default=settings.threads)
    common.add_argument("--seed", type=int, default=settings.sample_seed)

    orlicz = argparse.ArgumentParser(add_help=False)
    orlicz.add_argument("--tau", default=settings.tau)
    orlicz.add_argument("--r", default=settings.r)
    orlicz.add_argument("--p", dest="orlicz_p", default=settings.p)

    parser = argparse.ArgumentParser(prog="spreadlab", description="Exact constructions of sequence-space norms and their domination orders.")
    sub = parser.add_subparsers(dest="command", required=True)

    ext = sub.add_parser("extend", parents=[common], help="extend a submultiplicative function")
    ext.add_argument("--input", help="PWL CSV (x,S(x)); defaults to the identity on [1,2]")
    ext.add_argument("--slow-eps", help="one slowdown segment with this slope")
    ext.add_argument("--slow-to", help="slow extension to this domain end")
    ext.add_argument("--eps", help="total growth bound for --slow-to")
    ext.add_argument("--fast-to", help="speed up until S exceeds this value")
    ext.add_argument("--grid-points", type=int, default=None)

    inc = sub.add_parser("incomparable", parents=[common], help="build a pairwise incomparable family")
    inc.add_argument("--count", type=int, default=2)
    inc.add_argument("--requests", type=int, default=1)
    inc.add_argument("--verify", action="store_true", help="recheck submultiplicativity after each request")

    ps = sub.add_parser("powerset", parents=[common], help="power-set domination diagram")
    ps.add_argument("--n", type=int, default=2)
    ps.add_argument("--p", default="1")
    ps.add_argument("--threshold", type=int, default=1)
    ps.add_argument("--requests", type=int, default=None)

    enc = sub.add_parser("encode", parents=[common, orlicz], help="encode a finite lattice by Orlicz patterns")
    src = enc.add_mutually_exclusive_group()
    src.add_argument("--lattice", help="lattice JSON {elements, covers}")
    src.add_argument("--lattice-name", default="m3", help="one of the built-in lattices")
    enc.add_argument("--depth", type=int, default=6)

    nrm = sub.add_parser("norm", parents=[common], help="evaluate a norm on vectors")
    nrm.add_argument("--spec", required=True, help="norm description JSON")
    nrm.add_argument("--vectors", required=True, help="JSON list of coefficient vectors")

    ch = sub.add_parser("chain", parents=[common], help="l_p-sum classification over a p-list")
    ch.add_argument("--p-list", type=_p_list, default=[2, 2.25, 2.5, 2.75, 3])
    ch.add_argument("--samples", type=int, default=50)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = {"command": args.command, "out": args.out, "threads": args.threads, "seed": args.seed}
    if args.command == "extend":
        inputs = {
            "input": args.input,
            "slow_eps": args.slow_eps,
            "slow_to": args.slow_to,
            "eps": args.eps,
            "fast_to": args.fast_to,
            "grid_points": args.grid_points,
        }
    elif args.command == "incomparable":
        inputs = {"count": args.count, "requests": args.requests, "verify": args.verify}
    elif args.command == "powerset":
        inputs = {"n": args.n, "p": args.p, "threshold": args.threshold, "requests": args.requests}
    elif args.command == "encode":
        base.update(tau=args.tau, r=args.r, p=args.orlicz_p, depth=args.depth)
        inputs = {"lattice": args.lattice, "lattice_name": None if args.lattice else args.lattice_name}
    elif args.command == "norm":
        inputs = {"spec": args.spec, "vectors": args.vectors}
    else:
        inputs = {"p_list": args.p_list, "samples": args.samples}
    return RunConfig(**base, inputs=inputs)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        result = MasterOrchestrator(config).run()
    except (SpreadLabError, OSError, ValidationError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_INPUT_ERROR
    if not result.ok:
        logger.warning(f"{args.command}: verification failed, see {config.out}/{args.command}_report.txt")
        return EXIT_VERIFICATION_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
