"""Multimodal oncology agent toolkit.

Generates evidence-grounded patient reports with a tool-calling agent and
measures how much mutation-predictive signal those reports carry, using a
from-scratch MLP under stratified cross-validation.
"""

__version__ = "0.1.0"
