from django.apps import AppConfig


class AlphavbConfig(AppConfig):
    name = 'alphavb'
    verbose_name = 'Renyi spike-and-slab variational Bayes'
