from django.core.management.base import BaseCommand

from taylor.management.commands._shared import add_common_arguments, call_service, overrides_from
from taylor.services import experiment


def _flag(v):
    return "-" if v is None else ("pass" if v else "FAIL")


def _num(v):
    return "-" if v is None else f"{v:.1e}"


class Command(BaseCommand):
    help = 'Reproduce the spline/Taylor comparison table for the bundled examples.'

    def add_arguments(self, parser):
        add_common_arguments(parser)

    def handle(self, *args, **options):
        rows, path = call_service(experiment.table1, overrides_from(options))
        header = f"{'function':<18} {'I':<9} {'delta_T':>18} {'delta_CS':>18} {'B_U':>18}"
        self.stdout.write(header)
        for r in rows:
            interval = f"[{r['lo']:g},{r['hi']:g}]"
            cells = [f"{_num(r[k])} ({_num(r['published_' + k])}) {_flag(r[k + '_ok'])}"
                     for k in ("delta_t", "delta_cs", "b_u")]
            self.stdout.write(f"{r['function']:<18} {interval:<9} " + " ".join(f"{c:>18}" for c in cells))
        self.stdout.write("computed (published) check")
        self.stdout.write(self.style.SUCCESS(f'Table written to {path}'))
