from django.apps import AppConfig


class AugmentationConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "Cltci.augmentation"
