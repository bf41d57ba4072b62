from django.core.management.base import BaseCommand, CommandError

from taylor.services.selfcheck import all_passed, run_selfcheck


class Command(BaseCommand):
    help = 'Run the analytic-oracle checks of the numerical core; exit 0 iff all pass.'

    def handle(self, *args, **options):
        results = run_selfcheck()
        for r in results:
            line = f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value} (target {r.target}) {r.detail}".rstrip()
            self.stdout.write(self.style.SUCCESS(line) if r.passed else self.style.ERROR(line))
        if not all_passed(results):
            failed = sum(1 for r in results if not r.passed)
            raise CommandError(f"{failed} of {len(results)} checks failed", returncode=1)
        self.stdout.write(self.style.SUCCESS(f'All {len(results)} checks passed'))
