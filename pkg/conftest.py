import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "remainder_lab.settings")
django.setup()
