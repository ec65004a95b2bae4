"""aspectly types."""
from .corpus import *
from .enums import *
from .metrics import *
from .model import *
from .text import *
