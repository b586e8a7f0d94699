import copy
import json

from django import forms
from django.conf import settings


def get_label(unit):
    if unit is None:
        return ""
    label = str(unit.translation.language)
    if unit.translation.language.direction == "rtl":
        label = label + " (rtl)"
    return label
