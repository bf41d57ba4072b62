from django.apps import AppConfig

class TaylorConfig(AppConfig):
    name = 'taylor'
    verbose_name = 'Taylor remainder lab'
