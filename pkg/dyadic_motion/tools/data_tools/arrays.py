import numpy as np


def strictly_increasing(data):
    return all(x < y for x, y in zip(data, data[1:]))


def run_lengths(labels):
    """ Lengths of maximal constant runs, in order """
    labels = np.asarray(labels)
    if labels.size == 0:
        return []
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    edges = np.concatenate([[0], change, [labels.size]])
    return np.diff(edges).tolist()


def count_switches(labels):
    labels = np.asarray(labels)
    return int(np.count_nonzero(labels[1:] != labels[:-1]))


def moving_average(data, width: int):
    """ Centered moving average with edge padding, same length as data """
    data = np.asarray(data, dtype=np.float64)
    if width <= 1:
        return data.copy()
    kernel = np.ones(width) / width
    padded = np.pad(data, (width // 2, width - 1 - width // 2), mode="edge")
    return np.convolve(padded, kernel, mode="valid")
