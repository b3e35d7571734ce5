""" Audio-driven interactive head motion in a synthetic dyadic world """

__version__ = "1.0.0"
