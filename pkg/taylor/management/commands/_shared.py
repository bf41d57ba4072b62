from django.core.management.base import CommandError

from taylor.exceptions import ConfigError, InvalidFigureError, StageError


def add_common_arguments(parser):
    parser.add_argument("--output-dir", dest="output_dir", default=None,
                        help="Directory for CSV/JSON/SVG outputs (overrides the config).")
    parser.add_argument("--n-steps", dest="n_steps", type=int, default=None,
                        help="Number of RK7 steps across [x_z, hi].")
    parser.add_argument("--mode", choices=("factored", "direct"), default=None,
                        help="How the remainder spline composes with T1.")


def overrides_from(options) -> dict:
    return {k: options.get(k) for k in ("output_dir", "n_steps", "mode") if options.get(k) is not None}


def call_service(fn, *args, **kwargs):
    """Run a service call, mapping config errors to exit 2 and stage failures to exit 1."""
    try:
        return fn(*args, **kwargs)
    except (ConfigError, InvalidFigureError) as exc:
        raise CommandError(str(exc), returncode=2)
    except StageError as exc:
        raise CommandError(str(exc), returncode=1)
