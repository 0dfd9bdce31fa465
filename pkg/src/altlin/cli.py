"""Command line: ``altlin run|validate|gen-instance``.

Exit codes: 0 success, 1 config error, 2 solver divergence.
"""

from __future__ import annotations

import argparse
import sys

from altlin import bench


def _print_errors(errors) -> None:
    for err in errors:
        print(f"error: {err}", file=sys.stderr)


def _cmd_run(args) -> int:
    try:
        config = bench.load_config(args.config)
        result = bench.run_experiment(config, out_dir=args.out_dir)
    except bench.ConfigError as exc:
        _print_errors(exc.errors)
        return bench.EXIT_CONFIG
    except (OSError, ValueError) as exc:
        _print_errors([str(exc)])
        return bench.EXIT_CONFIG
    for msg in result.messages:
        print(f"warning: {msg}", file=sys.stderr)
    print(f"wrote {len(result.traces)} trace(s) and summary.csv to {result.output_dir}")
    return result.exit_code


def _cmd_validate(args) -> int:
    errors = bench.validate_config(args.config)
    if errors:
        _print_errors(errors)
        return bench.EXIT_CONFIG
    print("ok")
    return bench.EXIT_OK


def _cmd_gen(args) -> int:
    try:
        paths = bench.generate_instance_files(args.spec, args.out)
    except bench.ConfigError as exc:
        _print_errors(exc.errors)
        return bench.EXIT_CONFIG
    except (OSError, ValueError) as exc:
        _print_errors([str(exc)])
        return bench.EXIT_CONFIG
    for p in paths:
        print(p)
    return bench.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="altlin", description="Alternating linearization experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--out-dir", default=None, help="override [report] output_dir")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)

    gen = sub.add_parser("gen-instance", help="write the [problem] instance of a spec as matrix files")
    gen.add_argument("spec")
    gen.add_argument("out")
    gen.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
