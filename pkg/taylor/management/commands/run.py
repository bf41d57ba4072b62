from django.core.management.base import BaseCommand

from taylor.management.commands._shared import add_common_arguments, call_service, overrides_from
from taylor.services import experiment


class Command(BaseCommand):
    help = 'Run one remainder-enhancement experiment from a flat key = value config file.'

    def add_arguments(self, parser):
        parser.add_argument("config", help="Config path, or the name of a bundled config (example1.cfg).")
        add_common_arguments(parser)

    def handle(self, *args, **options):
        config = call_service(experiment.load_config, options["config"], overrides_from(options))
        report = call_service(experiment.run, config)

        self.stdout.write(f"{config.label}: x_z={report.x_z!r}, roots {report.roots}")
        for b in report.branches:
            self.stdout.write(f"  {b['id']}: xi_z={b['xi_z']!r} max|dR|={b['max_abs_delta_r']:.3e}"
                              f" constraint {'ok' if b['constraint_ok_everywhere'] else 'violated'}")
        if report.spliced:
            self.stdout.write(f"  spliced at {report.switch_points}: max|dR|={report.spliced['max_abs_delta_r']:.3e}")
        m = report.metrics
        self.stdout.write(f"  delta_T={m['delta_t']:.3e} delta_CS={m['delta_cs']:.3e} B_U={m['b_u']:.3e}")
        for w in report.warnings:
            self.stdout.write(self.style.WARNING(f"  warning: {w}"))
        self.stdout.write(self.style.SUCCESS(f'Outputs written to {config.output_dir}'))
