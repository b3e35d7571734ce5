""" Torch networks and pydantic schemas """
