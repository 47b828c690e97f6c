"""
Spectrogram translation for instrumental audio tasks
"""

# ruff: noqa

from spectrans.core import *
from spectrans.dsp import *
from spectrans.datagen import *
from spectrans.autodiff import *
from spectrans.translator import *
from spectrans.vocoder import *
from spectrans.metrics import *
