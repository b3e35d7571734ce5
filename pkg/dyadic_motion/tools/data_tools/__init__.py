from . import arrays, files
