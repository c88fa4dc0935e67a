"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

from momclust.config import RELAXATION_R2P1, RELAXATION_R2PP1, ORDER_DNN, ORDER_PSD
from momclust.logger import logger

__version__ = "0.1.0"
