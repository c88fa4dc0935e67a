"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

import logging

# Create and configure logger
logger = logging.getLogger(__name__)
