__all__ = [
    'eval',
    'generate',
    'gradcheck',
    'train',
]

from . import eval  # pylint: disable=redefined-builtin
from . import generate
from . import gradcheck
from . import train
