"""Multiple-choice question generation from educational text.

Subpackages are imported lazily where they pull in heavy dependencies
(torch is only loaded when a real model is trained or restored).
"""

__version__ = "0.1.0"
