from django.core.management.base import BaseCommand

from taylor.management.commands._shared import add_common_arguments, call_service, overrides_from
from taylor.services import experiment


class Command(BaseCommand):
    help = 'Emit the data series and an SVG rendering of figure N (1-6).'

    def add_arguments(self, parser):
        parser.add_argument("n", type=int)
        add_common_arguments(parser)

    def handle(self, *args, **options):
        cols, paths = call_service(experiment.figure, options["n"], overrides_from(options))
        self.stdout.write(f"figure {options['n']}: columns {', '.join(cols)}")
        self.stdout.write(self.style.SUCCESS('Wrote ' + ', '.join(str(p) for p in paths)))
